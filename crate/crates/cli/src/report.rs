//! Report documents: machine-readable JSON whose byte content is
//! deterministic under a fixed seed. Timings never appear here; they go to
//! a sibling `timings.json` that is excluded from determinism comparisons.

use std::path::Path;

use influence_core::data::write_atomic;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    #[serde(flatten)]
    pub body: ReportBody,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReportBody {
    Train(TrainReportBody),
    Influence(InfluenceReportBody),
    AttackTarget {
        acc_budget: f64,
        rows: Vec<AttackRow>,
        summary: Vec<AttackSummary>,
    },
    AttackMulti {
        acc_budget: f64,
        rows: Vec<MultiRow>,
    },
    AttackScale {
        rows: Vec<ScaleRow>,
    },
    Fairness {
        baseline_dp_gap: Option<f64>,
        baseline_accuracy: Option<f64>,
        acc_budget: f64,
        rows: Vec<FairnessReportRow>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainReportBody {
    pub converged: bool,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub pristine_accuracy: f64,
    pub num_params: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InfluenceReportBody {
    pub scores: Vec<f64>,
    /// Training indices in decreasing-score order.
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackRow {
    pub seed: u64,
    pub c: f64,
    pub k: usize,
    pub target: usize,
    pub initial_rank: usize,
    pub final_rank: usize,
    pub success: bool,
    /// Success under the accuracy budget on the pristine set.
    pub success_budget: bool,
    pub delta_acc_test: f64,
    pub delta_acc_pristine: f64,
    pub transfer_rank: usize,
    pub influence_grad_norm: f64,
    pub chosen_init: usize,
    pub chosen_lr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackSummary {
    pub c: f64,
    pub k: usize,
    pub success_rate: f64,
    pub success_rate_budget: f64,
    pub transfer_success_rate: f64,
    pub mean_delta_acc_pristine: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiRow {
    pub seed: u64,
    pub c: f64,
    pub k: usize,
    pub size: usize,
    pub hits: usize,
    pub success_rate: f64,
    pub success_rate_budget: f64,
    pub delta_acc_pristine: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleRow {
    pub lambda: f64,
    pub accuracy: f64,
    /// Argmax predictions identical to the unscaled model on the test set.
    pub predictions_identical: bool,
    pub mean_abs_rank_shift: f64,
    pub max_abs_rank_shift: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FairnessReportRow {
    pub lambda: f64,
    pub dp_gap: Option<f64>,
    pub accuracy: Option<f64>,
    pub lp_objective: Option<f64>,
    pub base_soft_dp: Option<f64>,
    pub success: bool,
    pub error: Option<String>,
}

impl Report {
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(self)
            .map_err(|e| CliError::Numerical(format!("report serialization: {e}")))?;
        bytes.push(b'\n');
        write_atomic(path, &bytes).map_err(CliError::from)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Data(format!("cannot read report {}: {e}", path.display())))?;
        let report: Report = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Data(format!("report schema in {}: {e}", path.display())))?;
        report.validate(path)?;
        Ok(report)
    }

    /// Self-consistency: every success flag must be recomputable from the
    /// row's own fields.
    fn validate(&self, path: &Path) -> Result<(), CliError> {
        let fail = |msg: String| {
            Err(CliError::Data(format!(
                "self-consistency check failed in {}: {msg}",
                path.display()
            )))
        };
        match &self.body {
            ReportBody::AttackTarget {
                acc_budget, rows, ..
            } => {
                for row in rows {
                    if row.success != (row.final_rank <= row.k) {
                        return fail(format!(
                            "target {} success flag vs final_rank {} k {}",
                            row.target, row.final_rank, row.k
                        ));
                    }
                    let budget_ok = row.success && row.delta_acc_pristine <= *acc_budget;
                    if row.success_budget != budget_ok {
                        return fail(format!("target {} budget flag", row.target));
                    }
                }
            }
            ReportBody::Fairness {
                baseline_dp_gap,
                baseline_accuracy,
                acc_budget,
                rows,
            } => {
                if let (Some(base_gap), Some(base_acc)) = (baseline_dp_gap, baseline_accuracy) {
                    for row in rows {
                        if row.lambda == 1.0 {
                            continue;
                        }
                        if let (Some(gap), Some(acc)) = (row.dp_gap, row.accuracy) {
                            let expect =
                                gap > *base_gap && (acc - base_acc).abs() <= *acc_budget;
                            if row.success != expect {
                                return fail(format!("lambda {} success flag", row.lambda));
                            }
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Wall-clock timings, written beside the report and excluded from the
/// determinism contract.
#[derive(Debug, Serialize, Deserialize)]
pub struct Timings {
    pub command: String,
    pub total_seconds: f64,
    pub cells: Vec<(String, f64)>,
}

impl Timings {
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(self)
            .map_err(|e| CliError::Numerical(format!("timings serialization: {e}")))?;
        bytes.push(b'\n');
        write_atomic(path, &bytes).map_err(CliError::from)
    }
}
