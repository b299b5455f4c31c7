//! Attack drivers: the projected-Adam loop over the backward-friendly
//! objective, the loss-reweighing baseline, the weight-scaling attack, and
//! evaluation metrics.
//!
//! One optimization run fixes an initialization and a learning rate, then
//! repeats: recompute influence scores at the current parameters, linearize
//! the attack loss there, rebuild the backward-friendly objective, take its
//! frozen-solve gradient, Adam-update, and project back onto the
//! manipulation ball around the honest parameters. Set memberships are
//! frozen within a step and recomputed at the next.
//!
//! Every iterate of every run is a candidate (the honest parameters are kept
//! as a step-zero candidate too, so a vacuous goal returns them unchanged);
//! candidates compare by hit count, then summed target rank, then accuracy
//! drop, and runs are swept in a fixed (init, learning-rate) order, so the
//! whole attack is deterministic under its seed.

use ndarray::Array1;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::glm::{self, Dataset, GlmModel};
use crate::influence::{self, IhvpConfig, InfluenceVector};
use crate::objectives::{self, ObjectiveVariant};

/// Settings of the projected-Adam attack.
#[derive(Debug, Clone)]
pub struct AttackConfig {
    /// Manipulation radius. Interpreted relative to the honest parameter
    /// norm by default (`radius = c * ||theta*||`).
    pub c: f64,
    pub relative_radius: bool,
    /// Desired rank: the attack succeeds when the target reaches rank <= k.
    pub k: usize,
    pub learning_rates: Vec<f64>,
    pub steps: usize,
    pub num_inits: usize,
    /// Initialization noise, relative to `||theta*|| / sqrt(p)`.
    pub init_noise_scale: f64,
    pub variant: ObjectiveVariant,
    /// Accuracy-drop budget of the constrained success regime.
    pub acc_budget: f64,
    pub seed: u64,
    pub ihvp: IhvpConfig,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            c: 0.5,
            relative_radius: true,
            k: 10,
            learning_rates: vec![0.01, 0.1],
            steps: 100,
            num_inits: 5,
            init_noise_scale: 0.01,
            variant: ObjectiveVariant::MaxTargetMinHigher,
            acc_budget: 0.03,
            seed: 0,
            ihvp: IhvpConfig::default(),
        }
    }
}

impl AttackConfig {
    fn validate(&self) -> Result<()> {
        if self.c < 0.0 || !self.c.is_finite() {
            return Err(Error::InvalidParam {
                name: "c",
                reason: "radius must be finite and non-negative".into(),
            });
        }
        if self.steps == 0 || self.num_inits == 0 || self.learning_rates.is_empty() {
            return Err(Error::InvalidParam {
                name: "attack config",
                reason: "steps, num_inits and learning_rates must be nonempty/positive".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.acc_budget) {
            return Err(Error::InvalidParam {
                name: "acc_budget",
                reason: "must lie in [0, 1]".into(),
            });
        }
        Ok(())
    }
}

/// Adam first/second moment state.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Array1<f64>,
    v: Array1<f64>,
    t: u32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(p: usize) -> Self {
        Self {
            m: Array1::zeros(p),
            v: Array1::zeros(p),
            t: 0,
        }
    }

    /// One update; returns the new parameter vector.
    pub fn step(&mut self, theta: &Array1<f64>, grad: &Array1<f64>, lr: f64) -> Array1<f64> {
        self.t += 1;
        let b1t = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let b2t = 1.0 - ADAM_BETA2.powi(self.t as i32);
        let mut out = theta.clone();
        for j in 0..theta.len() {
            self.m[j] = ADAM_BETA1 * self.m[j] + (1.0 - ADAM_BETA1) * grad[j];
            self.v[j] = ADAM_BETA2 * self.v[j] + (1.0 - ADAM_BETA2) * grad[j] * grad[j];
            let mhat = self.m[j] / b1t;
            let vhat = self.v[j] / b2t;
            out[j] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
        }
        out
    }
}

/// Projects `theta` onto the ball of radius `c * ||theta*||` (or `c` in
/// absolute mode) centered at `theta*`.
pub fn project_ball(
    theta: &Array1<f64>,
    theta_star: &Array1<f64>,
    c: f64,
    relative: bool,
) -> Array1<f64> {
    let radius = if relative {
        c * theta_star.dot(theta_star).sqrt()
    } else {
        c
    };
    if radius == 0.0 {
        return theta_star.clone();
    }
    let diff = theta - theta_star;
    let dist = diff.dot(&diff).sqrt();
    if dist <= radius {
        theta.clone()
    } else {
        theta_star + &(diff * (radius / dist))
    }
}

/// Outcome for one target of an attack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetOutcome {
    pub target_idx: usize,
    pub initial_rank: usize,
    pub final_rank: usize,
    pub success: bool,
}

/// A run that had to be abandoned (solver failure); other runs proceed.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub init: usize,
    pub lr: f64,
    pub message: String,
}

/// Result of a single-target attack.
#[derive(Debug, Clone)]
pub struct AttackResult {
    pub theta_prime: GlmModel,
    pub initial_rank: usize,
    pub final_rank: usize,
    pub success: bool,
    /// Accuracy drop on the shared test set.
    pub delta_acc: f64,
    /// Attack loss at every iterate of the selected run (`steps + 1` values).
    pub loss_trajectory: Vec<f64>,
    pub chosen_init: usize,
    pub chosen_lr: f64,
    pub failed_runs: Vec<RunFailure>,
}

/// Result of a multi-target attack: one summed objective, per-target ranks.
#[derive(Debug, Clone)]
pub struct MultiAttackResult {
    pub theta_prime: GlmModel,
    pub per_target: Vec<TargetOutcome>,
    /// Fraction of targets at rank <= k under the returned parameters.
    pub success_rate: f64,
    pub delta_acc: f64,
    pub loss_trajectory: Vec<f64>,
    pub chosen_init: usize,
    pub chosen_lr: f64,
    pub failed_runs: Vec<RunFailure>,
}

#[derive(Debug, Clone)]
struct Candidate {
    theta: Array1<f64>,
    ranks: Vec<usize>,
    hits: usize,
    rank_sum: usize,
    delta_acc: f64,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        (self.hits, std::cmp::Reverse(self.rank_sum))
            .cmp(&(other.hits, std::cmp::Reverse(other.rank_sum)))
            .then(
                other
                    .delta_acc
                    .partial_cmp(&self.delta_acc)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
            .is_gt()
    }
}

struct RunOutcome {
    best: Candidate,
    trajectory: Vec<f64>,
    init: usize,
    lr: f64,
}

fn evaluate_candidate(
    model: &GlmModel,
    scores: &InfluenceVector,
    targets: &[usize],
    k: usize,
    acc_star: f64,
    test_data: &Dataset,
) -> Result<Candidate> {
    let mut ranks = Vec::with_capacity(targets.len());
    for &t in targets {
        ranks.push(influence::rank_of(scores, t)?);
    }
    let hits = ranks.iter().filter(|&&r| r <= k).count();
    let rank_sum = ranks.iter().sum();
    let acc = glm::accuracy(model, test_data)?;
    Ok(Candidate {
        theta: model.theta().clone(),
        ranks,
        hits,
        rank_sum,
        delta_acc: acc_star - acc,
    })
}

/// Core attack loop shared by the single- and multi-target drivers.
fn run_attack(
    train_data: &Dataset,
    test_data: &Dataset,
    theta_star: &GlmModel,
    targets: &[usize],
    cfg: &AttackConfig,
) -> Result<MultiAttackResult> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(Error::InvalidParam {
            name: "targets",
            reason: "target set must be nonempty".into(),
        });
    }
    for &t in targets {
        if t >= train_data.len() {
            return Err(Error::IndexOutOfBounds {
                index: t,
                len: train_data.len(),
            });
        }
    }
    let p = theta_star.num_params();
    let acc_star = glm::accuracy(theta_star, test_data)?;

    // honest-model scores anchor the initial ranks and the step-0 candidate
    let scores0 = influence::influence_set(theta_star, train_data, test_data, &cfg.ihvp)?;
    let sentinel = evaluate_candidate(theta_star, &scores0, targets, cfg.k, acc_star, test_data)?;
    let initial_ranks = sentinel.ranks.clone();

    let norm_star = theta_star.theta().dot(theta_star.theta()).sqrt();
    let noise_sd = cfg.init_noise_scale * norm_star.max(1e-12) / (p as f64).sqrt();

    let mut best_run: Option<RunOutcome> = None;
    let mut failed_runs = Vec::new();

    for init in 0..cfg.num_inits {
        // one noise draw per init, shared across learning rates
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(init as u64 + 1);
        let noise: Array1<f64> =
            Array1::from_shape_fn(p, |_| noise_sd * rng.sample::<f64, _>(StandardNormal));
        let theta0 = project_ball(
            &(theta_star.theta() + &noise),
            theta_star.theta(),
            cfg.c,
            cfg.relative_radius,
        );

        for &lr in &cfg.learning_rates {
            match attack_run(
                train_data, test_data, theta_star, targets, cfg, &theta0, lr, acc_star, &sentinel,
            ) {
                Ok(mut outcome) => {
                    outcome.init = init;
                    outcome.lr = lr;
                    let replace = match &best_run {
                        None => true,
                        Some(cur) => outcome.best.better_than(&cur.best),
                    };
                    if replace {
                        best_run = Some(outcome);
                    }
                }
                Err(err) => failed_runs.push(RunFailure {
                    init,
                    lr,
                    message: err.to_string(),
                }),
            }
        }
    }

    let Some(run) = best_run else {
        return Err(Error::LpFailed(format!(
            "every attack run failed; first failure: {}",
            failed_runs
                .first()
                .map_or_else(|| "none recorded".into(), |f| f.message.clone())
        )));
    };

    let theta_prime = theta_star.with_theta(run.best.theta.clone())?;
    let per_target: Vec<TargetOutcome> = targets
        .iter()
        .zip(initial_ranks.iter().zip(run.best.ranks.iter()))
        .map(|(&t, (&r0, &r1))| TargetOutcome {
            target_idx: t,
            initial_rank: r0,
            final_rank: r1,
            success: r1 <= cfg.k,
        })
        .collect();
    let success_rate = run.best.hits as f64 / targets.len() as f64;
    Ok(MultiAttackResult {
        theta_prime,
        per_target,
        success_rate,
        delta_acc: run.best.delta_acc,
        loss_trajectory: run.trajectory,
        chosen_init: run.init,
        chosen_lr: run.lr,
        failed_runs,
    })
}

#[allow(clippy::too_many_arguments)]
fn attack_run(
    train_data: &Dataset,
    test_data: &Dataset,
    theta_star: &GlmModel,
    targets: &[usize],
    cfg: &AttackConfig,
    theta0: &Array1<f64>,
    lr: f64,
    acc_star: f64,
    sentinel: &Candidate,
) -> Result<RunOutcome> {
    let mut model = theta_star.with_theta(theta0.clone())?;
    let mut adam = AdamState::new(theta_star.num_params());
    let mut best = sentinel.clone();
    let mut trajectory = Vec::with_capacity(cfg.steps + 1);

    for step in 0..=cfg.steps {
        // forward scores; the test-side solve is reused as the frozen u1
        let s_test = influence::test_loss_ihvp(&model, train_data, test_data, &cfg.ihvp)?;
        let scores = influence::scores_from_test_solution(&model, train_data, &s_test)?;
        let loss = objectives::attack_loss(&scores, targets, cfg.variant, cfg.k)?;
        trajectory.push(loss);

        let cand = evaluate_candidate(&model, &scores, targets, cfg.k, acc_star, test_data)?;
        if cand.better_than(&best) {
            best = cand;
        }
        if step == cfg.steps {
            break;
        }

        let lin = objectives::linearize(&scores, targets, cfg.variant, cfg.k)?;
        let v1 = -glm::grad_sum(&model, test_data)?;
        let u1 = -&s_test;
        let (_, aux) = objectives::build_backward_friendly_with_u1(
            &model, train_data, &lin.u, v1, u1, &cfg.ihvp,
        )?;
        let grad = objectives::grad_backward_friendly(&model, train_data, test_data, &lin.u, &aux)?;
        let updated = adam.step(model.theta(), &grad, lr);
        let projected = project_ball(&updated, theta_star.theta(), cfg.c, cfg.relative_radius);
        model = model.with_theta(projected)?;
    }

    Ok(RunOutcome {
        best,
        trajectory,
        init: 0,
        lr,
    })
}

/// Pushes one training sample toward the top `k` of the influence ranking.
pub fn single_target_attack(
    train_data: &Dataset,
    test_data: &Dataset,
    theta_star: &GlmModel,
    target_idx: usize,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    let multi = run_attack(train_data, test_data, theta_star, &[target_idx], cfg)?;
    let outcome = &multi.per_target[0];
    Ok(AttackResult {
        theta_prime: multi.theta_prime,
        initial_rank: outcome.initial_rank,
        final_rank: outcome.final_rank,
        success: outcome.success,
        delta_acc: multi.delta_acc,
        loss_trajectory: multi.loss_trajectory,
        chosen_init: multi.chosen_init,
        chosen_lr: multi.chosen_lr,
        failed_runs: multi.failed_runs,
    })
}

/// Optimizes the summed objective over a whole target set in one run.
pub fn multi_target_attack(
    train_data: &Dataset,
    test_data: &Dataset,
    theta_star: &GlmModel,
    target_set: &[usize],
    cfg: &AttackConfig,
) -> Result<MultiAttackResult> {
    run_attack(train_data, test_data, theta_star, target_set, cfg)
}

/// Loss-reweighing baseline: stochastic training where batches sample the
/// target with weight `lambda` and everything else with weight 1.
#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub has_bias: bool,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            steps: 1400,
            batch_size: 256,
            lr: 0.01,
            has_bias: true,
            seed: 0,
        }
    }
}

/// Trains a model with the target's sampling weight set to `lambda`.
/// `lambda = 1` reduces to uniform sampling; `lambda = 0` never samples the
/// target (leave-one-out training).
pub fn baseline_reweigh_attack(
    train_data: &Dataset,
    target_idx: usize,
    lambda: f64,
    cfg: &BaselineConfig,
) -> Result<GlmModel> {
    if train_data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if target_idx >= train_data.len() {
        return Err(Error::IndexOutOfBounds {
            index: target_idx,
            len: train_data.len(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParam {
            name: "lambda",
            reason: "sampling weight must be finite and non-negative".into(),
        });
    }
    let mut weights = vec![1.0; train_data.len()];
    weights[target_idx] = lambda;
    let dist = rand::distr::weighted::WeightedIndex::new(&weights).map_err(|e| {
        Error::InvalidParam {
            name: "lambda",
            reason: e.to_string(),
        }
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = GlmModel::zeros(train_data.num_classes(), train_data.dim(), cfg.has_bias)?;
    let mut adam = AdamState::new(model.num_params());
    let batch = cfg.batch_size.min(train_data.len().max(1));

    for _ in 0..cfg.steps {
        let mut grad = Array1::zeros(model.num_params());
        for _ in 0..batch {
            let i = dist.sample(&mut rng);
            let g = glm::sample_grad(&model, train_data.features().row(i), train_data.labels()[i]);
            grad += &g;
        }
        grad.mapv_inplace(|v| v / batch as f64);
        let theta = adam.step(model.theta(), &grad, cfg.lr);
        model = model.with_theta(theta)?;
    }
    Ok(model)
}

/// Scales every parameter (bias included) by `lambda > 0`. Argmax class
/// predictions are unchanged for every input.
pub fn scaling_attack(model: &GlmModel, lambda: f64) -> Result<GlmModel> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParam {
            name: "lambda",
            reason: format!("scaling coefficient must be positive and finite, got {lambda}"),
        });
    }
    model.with_theta(model.theta() * lambda)
}

/// Post-hoc evaluation of a manipulated model.
#[derive(Debug, Clone)]
pub struct AttackEvaluation {
    /// Per-target rank under the shared test set.
    pub final_ranks: Vec<usize>,
    /// Fraction of targets at rank <= k, regardless of accuracy.
    pub success_rate: f64,
    /// Same, but zeroed when the pristine accuracy drop exceeds the budget.
    pub success_rate_within_budget: f64,
    pub delta_acc_test: f64,
    pub delta_acc_pristine: f64,
    /// Per-target rank when influence is recomputed against the pristine set.
    pub transfer_ranks: Vec<usize>,
    pub transfer_success_rate: f64,
    /// Norm of the influence-score gradient at the honest parameters, per
    /// target (the easy/hard-sample diagnostic).
    pub influence_grad_norms: Vec<f64>,
}

/// Evaluates `theta_prime` against `theta_star`: success under the budgeted
/// and unconstrained regimes, accuracy drops, transfer ranks on a pristine
/// test set, and the influence-gradient norms of the targets.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_attack(
    theta_prime: &GlmModel,
    theta_star: &GlmModel,
    train_data: &Dataset,
    test_data: &Dataset,
    pristine_data: &Dataset,
    targets: &[usize],
    k: usize,
    acc_budget: f64,
    ihvp: &IhvpConfig,
) -> Result<AttackEvaluation> {
    let scores = influence::influence_set(theta_prime, train_data, test_data, ihvp)?;
    let mut final_ranks = Vec::with_capacity(targets.len());
    for &t in targets {
        final_ranks.push(influence::rank_of(&scores, t)?);
    }
    let hits = final_ranks.iter().filter(|&&r| r <= k).count();
    let success_rate = hits as f64 / targets.len().max(1) as f64;

    let delta_acc_test =
        glm::accuracy(theta_star, test_data)? - glm::accuracy(theta_prime, test_data)?;
    let delta_acc_pristine =
        glm::accuracy(theta_star, pristine_data)? - glm::accuracy(theta_prime, pristine_data)?;
    let success_rate_within_budget = if delta_acc_pristine <= acc_budget {
        success_rate
    } else {
        0.0
    };

    let transfer_scores = influence::influence_set(theta_prime, train_data, pristine_data, ihvp)?;
    let mut transfer_ranks = Vec::with_capacity(targets.len());
    for &t in targets {
        transfer_ranks.push(influence::rank_of(&transfer_scores, t)?);
    }
    let transfer_hits = transfer_ranks.iter().filter(|&&r| r <= k).count();
    let transfer_success_rate = transfer_hits as f64 / targets.len().max(1) as f64;

    // sensitivity of each target's own score to the honest parameters
    let mut influence_grad_norms = Vec::with_capacity(targets.len());
    for &t in targets {
        let mut u = vec![0.0; train_data.len()];
        u[t] = 1.0;
        let (_, aux) =
            objectives::build_backward_friendly(theta_star, train_data, test_data, &u, ihvp)?;
        let g =
            objectives::grad_backward_friendly(theta_star, train_data, test_data, &u, &aux)?;
        influence_grad_norms.push(g.dot(&g).sqrt());
    }

    Ok(AttackEvaluation {
        final_ranks,
        success_rate,
        success_rate_within_budget,
        delta_acc_test,
        delta_acc_pristine,
        transfer_ranks,
        transfer_success_rate,
        influence_grad_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_blobs;
    use crate::glm::{accuracy, predictions, train_erm, LossSpec, TrainConfig};
    use ndarray::array;

    fn trained_blobs(n: usize, d: usize, seed: u64) -> (Dataset, Dataset, GlmModel) {
        // one generator draw, split so train and test share class centers
        let all = synth_blobs(2 * n, d, 2, 2.0, seed).unwrap();
        let (train, test) = crate::data::split_halves_stratified(&all, seed + 1).unwrap();
        let report = train_erm(
            &train,
            &LossSpec::damped(0.01).unwrap(),
            &TrainConfig {
                grad_tol: 1e-6,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        (train, test, report.model)
    }

    #[test]
    fn project_ball_cases() {
        let star = array![3.0, 4.0]; // norm 5
        let inside = array![3.1, 4.1];
        let out = project_ball(&inside, &star, 0.5, true);
        assert_eq!(out, inside);

        let collapsed = project_ball(&inside, &star, 0.0, true);
        assert_eq!(collapsed, star);

        let far = array![30.0, 4.0];
        let proj = project_ball(&far, &star, 0.5, true);
        let dist = {
            let d = &proj - &star;
            d.dot(&d).sqrt()
        };
        assert!((dist - 2.5).abs() < 1e-12);

        // absolute mode
        let proj_abs = project_ball(&far, &star, 1.0, false);
        let dist_abs = {
            let d = &proj_abs - &star;
            d.dot(&d).sqrt()
        };
        assert!((dist_abs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_attack_preserves_argmax() {
        let (train, _, model) = trained_blobs(60, 3, 5);
        let base = predictions(&model, &train).unwrap();
        for lambda in [0.25, 1.0, 4.0, 64.0] {
            let scaled = scaling_attack(&model, lambda).unwrap();
            assert_eq!(predictions(&scaled, &train).unwrap(), base);
            assert_eq!(
                accuracy(&scaled, &train).unwrap(),
                accuracy(&model, &train).unwrap()
            );
        }
        assert!(scaling_attack(&model, 0.0).is_err());
        assert!(scaling_attack(&model, -2.0).is_err());
    }

    #[test]
    fn scaling_identity() {
        let model = GlmModel::from_theta(array![1.0, -3.0], 2, 2, false).unwrap();
        let same = scaling_attack(&model, 1.0).unwrap();
        assert_eq!(same.theta(), model.theta());
        let doubled = scaling_attack(&model, 2.0).unwrap();
        assert_eq!(doubled.theta(), &array![2.0, -6.0]);
    }

    #[test]
    fn zero_radius_returns_star() {
        let (train, test, model) = trained_blobs(40, 3, 7);
        let cfg = AttackConfig {
            c: 0.0,
            steps: 3,
            num_inits: 2,
            learning_rates: vec![0.1],
            k: 5,
            ..AttackConfig::default()
        };
        let result = single_target_attack(&train, &test, &model, 0, &cfg).unwrap();
        assert_eq!(result.theta_prime.theta(), model.theta());
        assert_eq!(result.success, result.initial_rank <= 5);
        assert_eq!(result.final_rank, result.initial_rank);
        assert_eq!(result.delta_acc, 0.0);
        assert_eq!(result.loss_trajectory.len(), 4);
    }

    #[test]
    fn already_ranked_target_succeeds_immediately() {
        let (train, test, model) = trained_blobs(40, 3, 9);
        let scores = influence::influence_set(&model, &train, &test, &IhvpConfig::default())
            .unwrap();
        let ranking = influence::rank(&scores).unwrap();
        let top = ranking.order[0];
        let cfg = AttackConfig {
            steps: 3,
            num_inits: 1,
            learning_rates: vec![0.01],
            k: 5,
            ..AttackConfig::default()
        };
        let result = single_target_attack(&train, &test, &model, top, &cfg).unwrap();
        assert!(result.success);
        assert!(result.final_rank <= result.initial_rank);
    }

    #[test]
    fn multi_attack_on_current_top_k_is_vacuous() {
        let (train, test, model) = trained_blobs(40, 3, 21);
        let k = 5;
        let scores =
            influence::influence_set(&model, &train, &test, &IhvpConfig::default()).unwrap();
        let ranking = influence::rank(&scores).unwrap();
        let targets: Vec<usize> = ranking.order[..k].to_vec();
        let cfg = AttackConfig {
            steps: 3,
            num_inits: 1,
            learning_rates: vec![0.01],
            k,
            ..AttackConfig::default()
        };
        let result = multi_target_attack(&train, &test, &model, &targets, &cfg).unwrap();
        assert_eq!(result.success_rate, 1.0);
    }

    #[test]
    fn singleton_multi_matches_single() {
        let (train, test, model) = trained_blobs(50, 4, 11);
        let cfg = AttackConfig {
            steps: 5,
            num_inits: 2,
            learning_rates: vec![0.05],
            k: 8,
            seed: 42,
            ..AttackConfig::default()
        };
        let single = single_target_attack(&train, &test, &model, 3, &cfg).unwrap();
        let multi = multi_target_attack(&train, &test, &model, &[3], &cfg).unwrap();
        assert_eq!(single.theta_prime.theta(), multi.theta_prime.theta());
        assert_eq!(single.final_rank, multi.per_target[0].final_rank);
        assert_eq!(single.loss_trajectory, multi.loss_trajectory);
        assert_eq!(single.chosen_init, multi.chosen_init);
    }

    #[test]
    fn attack_is_deterministic() {
        let (train, test, model) = trained_blobs(50, 4, 13);
        let cfg = AttackConfig {
            steps: 4,
            num_inits: 2,
            learning_rates: vec![0.05, 0.1],
            k: 5,
            seed: 7,
            ..AttackConfig::default()
        };
        let a = single_target_attack(&train, &test, &model, 2, &cfg).unwrap();
        let b = single_target_attack(&train, &test, &model, 2, &cfg).unwrap();
        assert_eq!(a.theta_prime.theta(), b.theta_prime.theta());
        assert_eq!(a.loss_trajectory, b.loss_trajectory);
        assert_eq!(a.final_rank, b.final_rank);
        assert_eq!(a.chosen_init, b.chosen_init);
        assert_eq!(a.chosen_lr, b.chosen_lr);
    }

    #[test]
    fn returned_theta_respects_radius() {
        let (train, test, model) = trained_blobs(40, 3, 17);
        let cfg = AttackConfig {
            c: 0.3,
            steps: 10,
            num_inits: 2,
            learning_rates: vec![0.2],
            k: 1,
            ..AttackConfig::default()
        };
        let result = single_target_attack(&train, &test, &model, 5, &cfg).unwrap();
        let diff = result.theta_prime.theta() - model.theta();
        let dist = diff.dot(&diff).sqrt();
        let radius = 0.3 * model.theta().dot(model.theta()).sqrt();
        assert!(dist <= radius + 1e-9);
        assert!(result.loss_trajectory.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn baseline_lambda_zero_never_samples_target() {
        // target has a unique extreme feature; leave-one-out must ignore it
        let train = Dataset::new(
            array![[1.0, 0.0], [-1.0, 0.1], [1.2, -0.1], [-0.9, 0.0], [100.0, 100.0]],
            vec![1, 0, 1, 0, 0],
        )
        .unwrap();
        let cfg = BaselineConfig {
            steps: 300,
            batch_size: 8,
            seed: 3,
            ..BaselineConfig::default()
        };
        let model = baseline_reweigh_attack(&train, 4, 0.0, &cfg).unwrap();
        // the model should classify the first four points, target excluded
        let sub = train.subset(&[0, 1, 2, 3]).unwrap();
        assert!(accuracy(&model, &sub).unwrap() >= 0.75);
    }

    #[test]
    fn baseline_uniform_matches_erm_accuracy() {
        // lambda = 1 is plain uniform sampling; the stochastic model should
        // land within a couple of points of the full-batch one
        let train = synth_blobs(200, 4, 2, 2.5, 41).unwrap();
        let erm = train_erm(
            &train,
            &LossSpec::damped(0.0).unwrap(),
            &TrainConfig {
                grad_tol: 1e-6,
                ..TrainConfig::default()
            },
        )
        .unwrap()
        .model;
        let cfg = BaselineConfig {
            seed: 5,
            ..BaselineConfig::default()
        };
        let sgd = baseline_reweigh_attack(&train, 0, 1.0, &cfg).unwrap();
        let a_erm = accuracy(&erm, &train).unwrap();
        let a_sgd = accuracy(&sgd, &train).unwrap();
        assert!(
            (a_erm - a_sgd).abs() <= 0.02,
            "uniform baseline accuracy {a_sgd} vs ERM {a_erm}"
        );
    }

    #[test]
    fn baseline_heavy_weight_trades_rank_for_accuracy() {
        let (train, test, _) = trained_blobs(120, 4, 43);
        let ihvp = IhvpConfig::default();
        // a target that starts outside the top ranks
        let scores = influence::influence_set(
            &train_erm(
                &train,
                &LossSpec::damped(0.01).unwrap(),
                &TrainConfig::default(),
            )
            .unwrap()
            .model,
            &train,
            &test,
            &ihvp,
        )
        .unwrap();
        let ranking = influence::rank(&scores).unwrap();
        let target = *ranking.order.last().unwrap();

        let cfg = BaselineConfig {
            seed: 11,
            ..BaselineConfig::default()
        };
        let honest = baseline_reweigh_attack(&train, target, 1.0, &cfg).unwrap();
        let attacked = baseline_reweigh_attack(&train, target, 1e4, &cfg).unwrap();

        let rank_honest = {
            let s = influence::influence_set(&honest, &train, &test, &ihvp).unwrap();
            influence::rank_of(&s, target).unwrap()
        };
        let rank_attacked = {
            let s = influence::influence_set(&attacked, &train, &test, &ihvp).unwrap();
            influence::rank_of(&s, target).unwrap()
        };
        assert!(
            rank_attacked < rank_honest,
            "rank did not improve: {rank_attacked} vs {rank_honest}"
        );
        let acc_honest = accuracy(&honest, &test).unwrap();
        let acc_attacked = accuracy(&attacked, &test).unwrap();
        assert!(
            acc_attacked < acc_honest,
            "accuracy did not drop: {acc_attacked} vs {acc_honest}"
        );
    }

    #[test]
    fn baseline_is_deterministic() {
        let (train, _, _) = trained_blobs(30, 3, 19);
        let cfg = BaselineConfig {
            steps: 50,
            seed: 11,
            ..BaselineConfig::default()
        };
        let a = baseline_reweigh_attack(&train, 2, 10.0, &cfg).unwrap();
        let b = baseline_reweigh_attack(&train, 2, 10.0, &cfg).unwrap();
        assert_eq!(a.theta(), b.theta());
    }

    proptest::proptest! {
        #[test]
        fn projection_contract(
            theta in proptest::collection::vec(-10.0f64..10.0, 2..8),
            star in proptest::collection::vec(-10.0f64..10.0, 2..8),
            c in 0.0f64..3.0,
        ) {
            let n = theta.len().min(star.len());
            let theta = Array1::from_vec(theta[..n].to_vec());
            let star = Array1::from_vec(star[..n].to_vec());
            let projected = project_ball(&theta, &star, c, true);
            let radius = c * star.dot(&star).sqrt();
            let dist = {
                let d = &projected - &star;
                d.dot(&d).sqrt()
            };
            proptest::prop_assert!(dist <= radius + 1e-9);
            // idempotent
            let twice = project_ball(&projected, &star, c, true);
            let drift = {
                let d = &twice - &projected;
                d.dot(&d).sqrt()
            };
            proptest::prop_assert!(drift <= 1e-12);
        }
    }

    #[test]
    fn evaluate_attack_identity_model() {
        let (train, test, model) = trained_blobs(40, 3, 23);
        let pristine = synth_blobs(20, 3, 2, 2.0, 999).unwrap();
        let eval = evaluate_attack(
            &model,
            &model,
            &train,
            &test,
            &pristine,
            &[1, 2],
            10,
            0.03,
            &IhvpConfig::default(),
        )
        .unwrap();
        assert_eq!(eval.delta_acc_test, 0.0);
        assert_eq!(eval.delta_acc_pristine, 0.0);
        assert_eq!(eval.success_rate, eval.success_rate_within_budget);
        // transfer with pristine == test set reproduces the final ranks
        let eval2 = evaluate_attack(
            &model,
            &model,
            &train,
            &test,
            &test,
            &[1, 2],
            10,
            0.03,
            &IhvpConfig::default(),
        )
        .unwrap();
        assert_eq!(eval2.final_ranks, eval2.transfer_ranks);
    }
}
