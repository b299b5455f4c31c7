//! The downstream fairness application: influence-driven reweighing of
//! training data, retraining, and demographic-parity evaluation.
//!
//! The pipeline mirrors the reweighing recipe: compute a fairness influence
//! and a utility influence for every training sample against a validation
//! set, solve a small LP for removal weights `w` in `[0,1]^n`, retrain a
//! downstream model on the reweighed data, and measure its demographic
//! parity gap. The scaling attack feeds a scaled base model into this
//! pipeline; scaling never changes the base model's predictions, so the
//! whole effect travels through the distorted influence scores.

use ndarray::Array1;

use crate::attack::scaling_attack;
use crate::error::{Error, Result};
use crate::glm::{self, sigmoid, Dataset, GlmModel, LossSpec, TrainConfig};
use crate::influence::{self, IhvpConfig};
use crate::lp::{self, Constraint, ConstraintKind, LpProblem};

/// How reweigh solutions map onto retraining sample weights. `w_i` reads as
/// the removed fraction of sample `i` by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    OneMinus,
    Direct,
}

#[derive(Debug, Clone)]
pub struct FairnessConfig {
    pub beta: f64,
    pub gamma: f64,
    /// L2 regularization of the base and downstream models; also the
    /// Hessian damping of the influence solves.
    pub l2_reg: f64,
    pub solver_tol: f64,
    pub surrogate_temperature: f64,
    pub acc_budget: f64,
    pub weight_mode: WeightMode,
}

impl Default for FairnessConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            gamma: 0.1,
            l2_reg: 1.0,
            solver_tol: 1e-8,
            surrogate_temperature: 1.0,
            acc_budget: 0.03,
            weight_mode: WeightMode::OneMinus,
        }
    }
}

impl FairnessConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) || !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParam {
                name: "beta/gamma",
                reason: "must lie in [0, 1]".into(),
            });
        }
        if self.l2_reg < 0.0 {
            return Err(Error::InvalidParam {
                name: "l2_reg",
                reason: "must be non-negative".into(),
            });
        }
        if self.solver_tol <= 0.0 || self.surrogate_temperature <= 0.0 {
            return Err(Error::InvalidParam {
                name: "solver_tol/surrogate_temperature",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }

    pub fn ihvp(&self) -> IhvpConfig {
        IhvpConfig::with_damp(self.l2_reg)
    }
}

/// How the LP finished. Dual agreement is carried alongside the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    /// Constraints met to machine precision.
    Optimal,
    /// Constraints met within the configured tolerance only.
    OptimalWithinTolerance,
}

/// Solution of a reweighing problem.
#[derive(Debug, Clone)]
pub struct ReweighWeights {
    pub w: Vec<f64>,
    pub status: SolverStatus,
    /// The minimized objective `sum_i w_i`.
    pub objective: f64,
    pub residuals: Vec<f64>,
    /// |simplex objective - dual search optimum|; small on healthy solves.
    pub duality_gap: f64,
}

/// Demographic parity of a model on a grouped dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DpReport {
    pub dp_gap: f64,
    pub group_positive_rates: (f64, f64),
    pub accuracy: f64,
}

/// Demographic parity gap by direct counting:
/// `|Pr(pred = 1 | group 0) - Pr(pred = 1 | group 1)|`.
pub fn dp_gap(predictions: &[usize], groups: &[u8]) -> Result<f64> {
    let (rates, _) = group_positive_rates(predictions, groups)?;
    Ok((rates.0 - rates.1).abs())
}

fn group_positive_rates(predictions: &[usize], groups: &[u8]) -> Result<((f64, f64), (usize, usize))> {
    if predictions.len() != groups.len() {
        return Err(Error::DimensionMismatch {
            expected: predictions.len(),
            got: groups.len(),
            context: "groups vs predictions",
        });
    }
    let mut pos = [0usize; 2];
    let mut tot = [0usize; 2];
    for (&p, &g) in predictions.iter().zip(groups) {
        let g = g as usize;
        tot[g] += 1;
        if p == 1 {
            pos[g] += 1;
        }
    }
    for g in 0..2u8 {
        if tot[g as usize] == 0 {
            return Err(Error::EmptyGroup { group: g });
        }
    }
    Ok((
        (
            pos[0] as f64 / tot[0] as f64,
            pos[1] as f64 / tot[1] as f64,
        ),
        (tot[0], tot[1]),
    ))
}

/// Full demographic-parity report for a model.
pub fn dp_report(model: &GlmModel, data: &Dataset) -> Result<DpReport> {
    let groups = data.groups().ok_or(Error::MissingGroups)?;
    let preds = glm::predictions(model, data)?;
    let (rates, _) = group_positive_rates(&preds, groups)?;
    Ok(DpReport {
        dp_gap: (rates.0 - rates.1).abs(),
        group_positive_rates: rates,
        accuracy: glm::accuracy(model, data)?,
    })
}

fn positive_probs(model: &GlmModel, data: &Dataset, temperature: f64) -> Result<Vec<f64>> {
    if model.num_classes() != 2 {
        return Err(Error::InvalidParam {
            name: "model",
            reason: "the fairness surrogate requires a binary model".into(),
        });
    }
    Ok((0..data.len())
        .map(|i| {
            let m = model.class_scores(data.features().row(i))[1];
            sigmoid(m / temperature)
        })
        .collect())
}

/// Differentiable demographic-parity surrogate: the absolute difference of
/// the mean positive-class probabilities of the two groups.
pub fn soft_dp(model: &GlmModel, data: &Dataset, temperature: f64) -> Result<f64> {
    Ok(soft_dp_signed(model, data, temperature)?.abs())
}

fn soft_dp_signed(model: &GlmModel, data: &Dataset, temperature: f64) -> Result<f64> {
    let groups = data.groups().ok_or(Error::MissingGroups)?;
    let probs = positive_probs(model, data, temperature)?;
    let mut sum = [0.0f64; 2];
    let mut tot = [0usize; 2];
    for (i, &g) in groups.iter().enumerate() {
        sum[g as usize] += probs[i];
        tot[g as usize] += 1;
    }
    for g in 0..2u8 {
        if tot[g as usize] == 0 {
            return Err(Error::EmptyGroup { group: g });
        }
    }
    Ok(sum[0] / tot[0] as f64 - sum[1] / tot[1] as f64)
}

/// Gradient of [`soft_dp`] with respect to the model parameters. At the
/// absolute-value kink (equal group means) the zero subgradient is chosen.
pub fn soft_dp_grad(model: &GlmModel, data: &Dataset, temperature: f64) -> Result<Array1<f64>> {
    let groups = data.groups().ok_or(Error::MissingGroups)?;
    let probs = positive_probs(model, data, temperature)?;
    let signed = soft_dp_signed(model, data, temperature)?;
    let sign = if signed == 0.0 { 0.0 } else { signed.signum() };
    let mut grad = Array1::zeros(model.num_params());
    if sign == 0.0 {
        return Ok(grad);
    }
    let mut tot = [0usize; 2];
    for &g in groups {
        tot[g as usize] += 1;
    }
    let d = model.dim();
    for i in 0..data.len() {
        let g = groups[i] as usize;
        let group_sign = if g == 0 { 1.0 } else { -1.0 };
        let s = probs[i];
        let coeff = sign * group_sign * s * (1.0 - s) / (temperature * tot[g] as f64);
        let x = data.features().row(i);
        for j in 0..d {
            grad[j] += coeff * x[j];
        }
        if model.has_bias() {
            grad[d] += coeff;
        }
    }
    Ok(grad)
}

/// Fairness influence of every training sample: the influence-function
/// bilinear form with the surrogate's validation gradient on the test side.
pub fn fairness_influence(
    model: &GlmModel,
    train_data: &Dataset,
    val_data: &Dataset,
    temperature: f64,
    ihvp_cfg: &IhvpConfig,
) -> Result<Vec<f64>> {
    let g_fair = soft_dp_grad(model, val_data, temperature)?;
    let s_fair = influence::ihvp(model, train_data, &g_fair, ihvp_cfg)?;
    let mut out = Vec::with_capacity(train_data.len());
    for i in 0..train_data.len() {
        let g = glm::sample_grad(model, train_data.features().row(i), train_data.labels()[i]);
        out.push(-s_fair.dot(&g));
    }
    Ok(out)
}

/// Utility influence: the ordinary test-set influence against the
/// validation set.
pub fn utility_influence(
    model: &GlmModel,
    train_data: &Dataset,
    val_data: &Dataset,
    ihvp_cfg: &IhvpConfig,
) -> Result<Vec<f64>> {
    Ok(influence::influence_set(model, train_data, val_data, ihvp_cfg)?.scores)
}

fn finish_solution(
    problem: &LpProblem,
    solution: lp::LpSolution,
    tol: f64,
) -> Result<ReweighWeights> {
    let max_residual = solution
        .residuals
        .iter()
        .fold(0.0f64, |acc, r| acc.max(r.abs()));
    if max_residual > tol {
        return Err(Error::LpInfeasible {
            residual: max_residual,
        });
    }
    let dual = lp::dual_value(problem)?;
    let duality_gap = (dual - solution.objective).abs();
    let status = if max_residual <= 1e-12 {
        SolverStatus::Optimal
    } else {
        SolverStatus::OptimalWithinTolerance
    };
    Ok(ReweighWeights {
        w: solution.x,
        status,
        objective: solution.objective,
        residuals: solution.residuals,
        duality_gap,
    })
}

/// Basic reweighing problem: minimize `sum w_i` subject to
/// `sum w_i I_fair_i = -f_fair`, `sum w_i I_util_i <= 0`, `w in [0,1]^n`.
/// The equality is accepted within `tol`.
pub fn solve_reweigh_basic(
    i_fair: &[f64],
    i_util: &[f64],
    f_fair_val: f64,
    tol: f64,
) -> Result<ReweighWeights> {
    if i_fair.len() != i_util.len() || i_fair.is_empty() {
        return Err(Error::InvalidParam {
            name: "influence vectors",
            reason: "must be nonempty and of equal length".into(),
        });
    }
    let n = i_fair.len();
    let problem = LpProblem {
        objective: vec![1.0; n],
        constraints: vec![
            Constraint {
                coeffs: i_fair.to_vec(),
                kind: ConstraintKind::Eq,
                rhs: -f_fair_val,
            },
            Constraint {
                coeffs: i_util.to_vec(),
                kind: ConstraintKind::Le,
                rhs: 0.0,
            },
        ],
        upper: vec![1.0; n],
    };
    let solution = lp::solve(&problem, tol)?;
    finish_solution(&problem, solution, tol.max(1e-6))
}

/// Closed-form inner minimum `min over v in [0,1]^n of sum v_i I_util_i`.
pub fn inner_utility_min(i_util: &[f64]) -> f64 {
    i_util.iter().map(|v| v.min(0.0)).sum()
}

/// Advanced reweighing problem with the `(beta, gamma)` trade-off knobs:
/// `sum w_i I_fair_i <= -(1-beta) f_fair` and
/// `sum w_i I_util_i <= gamma * (min over v of sum v_i I_util_i)`.
pub fn solve_reweigh_advanced(
    i_fair: &[f64],
    i_util: &[f64],
    f_fair_val: f64,
    beta: f64,
    gamma: f64,
    tol: f64,
) -> Result<ReweighWeights> {
    if i_fair.len() != i_util.len() || i_fair.is_empty() {
        return Err(Error::InvalidParam {
            name: "influence vectors",
            reason: "must be nonempty and of equal length".into(),
        });
    }
    if !(0.0..=1.0).contains(&beta) || !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParam {
            name: "beta/gamma",
            reason: "must lie in [0, 1]".into(),
        });
    }
    let n = i_fair.len();
    let problem = LpProblem {
        objective: vec![1.0; n],
        constraints: vec![
            Constraint {
                coeffs: i_fair.to_vec(),
                kind: ConstraintKind::Le,
                rhs: -(1.0 - beta) * f_fair_val,
            },
            Constraint {
                coeffs: i_util.to_vec(),
                kind: ConstraintKind::Le,
                rhs: gamma * inner_utility_min(i_util),
            },
        ],
        upper: vec![1.0; n],
    };
    let solution = lp::solve(&problem, tol)?;
    finish_solution(&problem, solution, tol.max(1e-6))
}

/// Retrains the downstream model on the reweighed data. Weight mode
/// `OneMinus` trains with per-sample weights `1 - w_i` (a solution weight of
/// 1 removes the sample); `Direct` uses `w_i` as-is.
///
/// The weights are rescaled to sum to `n` before training so that removing
/// samples keeps the data term and the L2 regularizer in the same balance as
/// an actual retrain on the surviving samples; removing one sample entirely
/// then matches leave-one-out training, and an all-zero solution reproduces
/// the honest model bit for bit.
pub fn retrain_downstream(
    train_data: &Dataset,
    weights: &ReweighWeights,
    l2_reg: f64,
    mode: WeightMode,
    cfg: &TrainConfig,
) -> Result<GlmModel> {
    if weights.w.len() != train_data.len() {
        return Err(Error::DimensionMismatch {
            expected: train_data.len(),
            got: weights.w.len(),
            context: "reweigh solution vs training set",
        });
    }
    let effective: Vec<f64> = weights
        .w
        .iter()
        .map(|&w| {
            let w = w.clamp(0.0, 1.0);
            match mode {
                WeightMode::OneMinus => 1.0 - w,
                WeightMode::Direct => w,
            }
        })
        .collect();
    let total: f64 = effective.iter().sum();
    if total <= 1e-9 {
        return Err(Error::ZeroEffectiveWeights);
    }
    let scale = train_data.len() as f64 / total;
    let effective: Vec<f64> = effective.iter().map(|w| w * scale).collect();
    let reweighed = train_data.clone().replace_weights(Some(effective))?;
    let spec = LossSpec::regularized(l2_reg)?;
    Ok(glm::train_erm(&reweighed, &spec, cfg)?.model)
}

/// One row of the scaling-attack fairness sweep.
#[derive(Debug, Clone)]
pub struct FairnessRow {
    pub lambda: f64,
    pub base_soft_dp: f64,
    pub downstream: Option<DpReport>,
    pub lp_objective: Option<f64>,
    /// Higher downstream gap than the unattacked row at comparable accuracy.
    pub success: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct FairnessAttackReport {
    pub rows: Vec<FairnessRow>,
    /// Downstream gap and accuracy of the unattacked (`lambda = 1`) pipeline.
    pub baseline_dp_gap: Option<f64>,
    pub baseline_accuracy: Option<f64>,
}

/// Runs the full scaling-attack sweep: for `lambda = 1` and every grid
/// value, scale the base model, push it through the reweighing pipeline,
/// retrain downstream, and report demographic parity on the pristine set.
/// Per-lambda failures are recorded and the grid continues.
pub fn fairness_attack_eval(
    train_data: &Dataset,
    val_data: &Dataset,
    pristine_data: &Dataset,
    lambda_grid: &[f64],
    cfg: &FairnessConfig,
    train_cfg: &TrainConfig,
) -> Result<FairnessAttackReport> {
    cfg.validate()?;
    let spec = LossSpec::regularized(cfg.l2_reg)?;
    let base = glm::train_erm(train_data, &spec, train_cfg)?.model;
    let ihvp_cfg = cfg.ihvp();

    let mut lambdas = vec![1.0];
    for &l in lambda_grid {
        if !lambdas.contains(&l) {
            lambdas.push(l);
        }
    }

    let mut rows: Vec<FairnessRow> = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let row = run_pipeline(&base, train_data, val_data, pristine_data, lambda, cfg, &ihvp_cfg, train_cfg);
        rows.push(match row {
            Ok(row) => row,
            Err(err) => FairnessRow {
                lambda,
                base_soft_dp: f64::NAN,
                downstream: None,
                lp_objective: None,
                success: false,
                error: Some(err.to_string()),
            },
        });
    }

    let baseline = rows
        .first()
        .and_then(|r| r.downstream.as_ref())
        .map(|d| (d.dp_gap, d.accuracy));
    if let Some((base_gap, base_acc)) = baseline {
        for row in rows.iter_mut().skip(1) {
            if let Some(d) = &row.downstream {
                row.success =
                    d.dp_gap > base_gap && (d.accuracy - base_acc).abs() <= cfg.acc_budget;
            }
        }
    }
    Ok(FairnessAttackReport {
        baseline_dp_gap: baseline.map(|b| b.0),
        baseline_accuracy: baseline.map(|b| b.1),
        rows,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_pipeline(
    base: &GlmModel,
    train_data: &Dataset,
    val_data: &Dataset,
    pristine_data: &Dataset,
    lambda: f64,
    cfg: &FairnessConfig,
    ihvp_cfg: &IhvpConfig,
    train_cfg: &TrainConfig,
) -> Result<FairnessRow> {
    let scaled = scaling_attack(base, lambda)?;
    let f_fair = soft_dp(&scaled, val_data, cfg.surrogate_temperature)?;
    let i_fair = fairness_influence(&scaled, train_data, val_data, cfg.surrogate_temperature, ihvp_cfg)?;
    let i_util = utility_influence(&scaled, train_data, val_data, ihvp_cfg)?;
    let weights = solve_reweigh_advanced(&i_fair, &i_util, f_fair, cfg.beta, cfg.gamma, cfg.solver_tol)?;
    let downstream = retrain_downstream(train_data, &weights, cfg.l2_reg, cfg.weight_mode, train_cfg)?;
    let report = dp_report(&downstream, pristine_data)?;
    Ok(FairnessRow {
        lambda,
        base_soft_dp: f_fair,
        downstream: Some(report),
        lp_objective: Some(weights.objective),
        success: false,
        error: None,
    })
}
