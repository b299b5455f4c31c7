//! Experiment configuration: a TOML document validated strictly (unknown
//! keys are schema violations) before any computation runs.

use std::path::PathBuf;

use influence_core::objectives::ObjectiveVariant;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub influence: InfluenceConfig,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub fairness: FairnessSection,
    /// Master seed; every run derives from it. `--seed` overrides.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Blobs,
    BiasedGroups,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// CSV mode: training data (header `f0..f{d-1},label[,group]`).
    pub train_path: Option<PathBuf>,
    /// CSV mode: shared test set; split in half for test/pristine unless
    /// `pristine_path` is given.
    pub test_path: Option<PathBuf>,
    pub pristine_path: Option<PathBuf>,
    /// Skip training and load this model instead.
    pub model_path: Option<PathBuf>,
    /// Generator mode: total sample count; half trains, the rest splits
    /// into test and pristine halves.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_classes")]
    pub num_classes: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_gap")]
    pub base_rate_gap: f64,
    #[serde(default)]
    pub generator_seed: u64,
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
}

fn default_n() -> usize {
    600
}
fn default_d() -> usize {
    8
}
fn default_classes() -> usize {
    2
}
fn default_separation() -> f64 {
    2.0
}
fn default_gap() -> f64 {
    0.2
}
fn default_split_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub l2_damp: f64,
    pub damp_in_loss: bool,
    pub has_bias: bool,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            l2_damp: 0.01,
            damp_in_loss: false,
            has_bias: true,
            max_iters: 50_000,
            grad_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InfluenceConfig {
    pub cg_tol: f64,
    pub cg_max_iter: Option<usize>,
}

impl Default for InfluenceConfig {
    fn default() -> Self {
        Self {
            cg_tol: 1e-8,
            cg_max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    MaxTarget,
    MaxTargetMinTopK,
    MaxTargetMinHigher,
}

impl From<VariantName> for ObjectiveVariant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::MaxTarget => ObjectiveVariant::MaxTarget,
            VariantName::MaxTargetMinTopK => ObjectiveVariant::MaxTargetMinTopK,
            VariantName::MaxTargetMinHigher => ObjectiveVariant::MaxTargetMinHigher,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub c_grid: Vec<f64>,
    pub relative_radius: bool,
    pub k: usize,
    pub variant: VariantName,
    pub steps: usize,
    pub num_inits: usize,
    pub init_noise_scale: f64,
    pub learning_rates: Vec<f64>,
    /// Single-target sweeps attack this many independent targets per cell.
    pub num_targets: usize,
    /// Targets are drawn outside the current top-k unless disabled.
    pub exclude_top_k_targets: bool,
    /// Multi-target sweeps run one attack per set size.
    pub target_sizes: Vec<usize>,
    pub target_seed: u64,
    pub acc_budget: f64,
    /// Scaling coefficients of the `attack-scale` report.
    pub scale_lambdas: Vec<f64>,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            c_grid: vec![0.05, 0.1, 0.2, 0.5],
            relative_radius: true,
            k: 10,
            variant: VariantName::MaxTargetMinHigher,
            steps: 100,
            num_inits: 5,
            init_noise_scale: 0.01,
            learning_rates: vec![0.01, 0.1],
            num_targets: 20,
            exclude_top_k_targets: true,
            target_sizes: vec![10, 50],
            target_seed: 100,
            acc_budget: 0.03,
            scale_lambdas: vec![0.25, 4.0, 64.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightModeName {
    OneMinus,
    Direct,
}

impl From<WeightModeName> for influence_core::fairness::WeightMode {
    fn from(v: WeightModeName) -> Self {
        match v {
            WeightModeName::OneMinus => influence_core::fairness::WeightMode::OneMinus,
            WeightModeName::Direct => influence_core::fairness::WeightMode::Direct,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FairnessSection {
    pub lambda_grid: Vec<f64>,
    pub beta: f64,
    pub gamma: f64,
    pub l2_reg: f64,
    pub solver_tol: f64,
    pub surrogate_temperature: f64,
    pub acc_budget: f64,
    pub weight_mode: WeightModeName,
}

impl Default for FairnessSection {
    fn default() -> Self {
        Self {
            lambda_grid: (-2..=6).map(|e| 2f64.powi(e)).collect(),
            beta: 0.5,
            gamma: 0.1,
            l2_reg: 1.0,
            solver_tol: 1e-8,
            surrogate_temperature: 1.0,
            acc_budget: 0.03,
            weight_mode: WeightModeName::OneMinus,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("config schema: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.data.source == DataSource::Csv
            && (self.data.train_path.is_none() || self.data.test_path.is_none())
        {
            return Err(CliError::Config(
                "source = \"csv\" requires train_path and test_path".into(),
            ));
        }
        if self.attack.c_grid.is_empty()
            || self.attack.learning_rates.is_empty()
            || self.attack.target_sizes.is_empty()
        {
            return Err(CliError::Config(
                "attack grids (c_grid, learning_rates, target_sizes) must be nonempty".into(),
            ));
        }
        if self.attack.k == 0 || self.attack.steps == 0 || self.attack.num_inits == 0 {
            return Err(CliError::Config(
                "attack k, steps and num_inits must be positive".into(),
            ));
        }
        if self.fairness.lambda_grid.iter().any(|l| *l <= 0.0) {
            return Err(CliError::Config(
                "fairness lambda_grid entries must be positive".into(),
            ));
        }
        if self.data.n < 4 || self.data.d == 0 {
            return Err(CliError::Config("data.n must be >= 4 and data.d >= 1".into()));
        }
        Ok(())
    }

    pub fn ihvp(&self) -> influence_core::influence::IhvpConfig {
        influence_core::influence::IhvpConfig {
            damp: self.model.l2_damp,
            cg_tol: self.influence.cg_tol,
            cg_max_iter: self.influence.cg_max_iter,
        }
    }

    pub fn train_config(&self) -> influence_core::glm::TrainConfig {
        influence_core::glm::TrainConfig {
            max_iters: self.model.max_iters,
            grad_tol: self.model.grad_tol,
            initial_step: 1.0,
            has_bias: self.model.has_bias,
            seed: self.seed,
        }
    }

    pub fn loss_spec(&self) -> Result<influence_core::glm::LossSpec, CliError> {
        influence_core::glm::LossSpec::new(self.model.l2_damp, self.model.damp_in_loss)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn attack_config(&self, c: f64) -> influence_core::attack::AttackConfig {
        influence_core::attack::AttackConfig {
            c,
            relative_radius: self.attack.relative_radius,
            k: self.attack.k,
            learning_rates: self.attack.learning_rates.clone(),
            steps: self.attack.steps,
            num_inits: self.attack.num_inits,
            init_noise_scale: self.attack.init_noise_scale,
            variant: self.attack.variant.into(),
            acc_budget: self.attack.acc_budget,
            seed: self.seed,
            ihvp: self.ihvp(),
        }
    }

    pub fn fairness_config(&self) -> influence_core::fairness::FairnessConfig {
        influence_core::fairness::FairnessConfig {
            beta: self.fairness.beta,
            gamma: self.fairness.gamma,
            l2_reg: self.fairness.l2_reg,
            solver_tol: self.fairness.solver_tol,
            surrogate_temperature: self.fairness.surrogate_temperature,
            acc_budget: self.fairness.acc_budget,
            weight_mode: self.fairness.weight_mode.into(),
        }
    }
}
