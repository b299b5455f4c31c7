//! Attack objectives over influence scores.
//!
//! The attack loss is a function of the influence vector. Because the scores
//! themselves hide an inverse Hessian, differentiating the loss directly
//! through parameters is impractical; instead each optimization step
//! linearizes the loss at the current scores (coefficient vector `u`, with
//! the membership sets frozen) and rewrites the linear functional as
//!
//! ```text
//! l = v1' H^{-1} v2,     v1 = -sum of test gradients,
//!                        v2 = sum_z u_z grad L(z)
//! ```
//!
//! whose value can be computed as `v1' u2 + u1' v2 - u1' H u2` with the two
//! solves `u1 = H^{-1} v1`, `u2 = H^{-1} v2` computed once and frozen. The
//! gradient with the frozen solves is exactly the chain-rule gradient of the
//! linearized objective: `-(sum test Hessians) u2 + (sum_z u_z Hess_z) u1 -
//! u1' (dH/dtheta) u2`. The damped Hessian is used throughout; the damping's
//! own gradient contribution vanishes because `u1`, `u2` are frozen.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::glm::{self, Dataset, GlmModel};
use crate::influence::{self, IhvpConfig, InfluenceVector};

/// Which attack loss to optimize. The variants are cumulative refinements:
/// push the target's influence up; also push down whatever currently sits in
/// the top `k`; or push down every sample ranked above the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveVariant {
    MaxTarget,
    MaxTargetMinTopK,
    MaxTargetMinHigher,
}

impl ObjectiveVariant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::MaxTarget => "max-target",
            Self::MaxTargetMinTopK => "max-target-min-top-k",
            Self::MaxTargetMinHigher => "max-target-min-higher",
        }
    }
}

/// The coefficient vector of the linearized attack loss: `u_z` is the
/// partial derivative of the loss with respect to the influence score of
/// training sample `z`, with set memberships frozen at the current scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedObjective {
    pub u: Vec<f64>,
}

/// Frozen quantities of one backward-friendly evaluation: the two gradient
/// aggregates and their IHVP solutions.
#[derive(Debug, Clone)]
pub struct FrozenAux {
    pub v1: Array1<f64>,
    pub v2: Array1<f64>,
    pub u1: Array1<f64>,
    pub u2: Array1<f64>,
}

fn validate_targets(n: usize, targets: &[usize], k: usize) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::InvalidParam {
            name: "targets",
            reason: "target set must be nonempty".into(),
        });
    }
    for &t in targets {
        if t >= n {
            return Err(Error::IndexOutOfBounds { index: t, len: n });
        }
    }
    if k == 0 {
        return Err(Error::InvalidParam {
            name: "k",
            reason: "desired rank must be at least 1".into(),
        });
    }
    if k > n {
        return Err(Error::InvalidParam {
            name: "k",
            reason: format!("k = {k} exceeds training set size {n}"),
        });
    }
    Ok(())
}

/// Attack loss at the given scores, summed over targets.
///
/// `MaxTargetMinHigher` (the final objective) charges each target
/// `-I_target + mean(I_z : I_z > I_target)`, with an empty mean contributing
/// zero. Membership uses strict inequality, so exact ties stay out of the
/// competing set.
pub fn attack_loss(
    scores: &InfluenceVector,
    targets: &[usize],
    variant: ObjectiveVariant,
    k: usize,
) -> Result<f64> {
    validate_targets(scores.len(), targets, k)?;
    let s = &scores.scores;
    for (i, v) in s.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteScore { index: i });
        }
    }
    let mut total = 0.0;
    match variant {
        ObjectiveVariant::MaxTarget => {
            for &t in targets {
                total -= s[t];
            }
        }
        ObjectiveVariant::MaxTargetMinTopK => {
            let ranking = influence::rank(scores)?;
            let top_mean: f64 =
                ranking.order[..k].iter().map(|&z| s[z]).sum::<f64>() / k as f64;
            for &t in targets {
                total += -s[t] + top_mean;
            }
        }
        ObjectiveVariant::MaxTargetMinHigher => {
            for &t in targets {
                let threshold = s[t];
                let mut sum = 0.0;
                let mut count = 0usize;
                for &v in s.iter() {
                    if v > threshold {
                        sum += v;
                        count += 1;
                    }
                }
                total -= threshold;
                if count > 0 {
                    total += sum / count as f64;
                }
            }
        }
    }
    Ok(total)
}

/// Coefficients of the linearized loss at the given scores. With the frozen
/// memberships, `u' scores` equals [`attack_loss`] exactly.
pub fn linearize(
    scores: &InfluenceVector,
    targets: &[usize],
    variant: ObjectiveVariant,
    k: usize,
) -> Result<LinearizedObjective> {
    validate_targets(scores.len(), targets, k)?;
    let s = &scores.scores;
    let mut u = vec![0.0; s.len()];
    match variant {
        ObjectiveVariant::MaxTarget => {
            for &t in targets {
                u[t] -= 1.0;
            }
        }
        ObjectiveVariant::MaxTargetMinTopK => {
            let ranking = influence::rank(scores)?;
            for &t in targets {
                u[t] -= 1.0;
                for &z in &ranking.order[..k] {
                    u[z] += 1.0 / k as f64;
                }
            }
        }
        ObjectiveVariant::MaxTargetMinHigher => {
            for &t in targets {
                u[t] -= 1.0;
                let threshold = s[t];
                let members: Vec<usize> = (0..s.len()).filter(|&z| s[z] > threshold).collect();
                if !members.is_empty() {
                    let share = 1.0 / members.len() as f64;
                    for z in members {
                        u[z] += share;
                    }
                }
            }
        }
    }
    Ok(LinearizedObjective { u })
}

/// Evaluates the backward-friendly objective and freezes its IHVP solutions.
///
/// Returns `(value, aux)` where `value = v1' u2 + u1' v2 - u1' (H+damp I) u2`
/// and each of the three terms equals `v1' (H+damp I)^{-1} v2` up to solver
/// tolerance; the value therefore matches `u' influence_set(...)`.
pub fn build_backward_friendly(
    model: &GlmModel,
    train_data: &Dataset,
    test_data: &Dataset,
    u: &[f64],
    cfg: &IhvpConfig,
) -> Result<(f64, FrozenAux)> {
    let v1 = -glm::grad_sum(model, test_data)?;
    let u1 = influence::ihvp(model, train_data, &v1, cfg)?;
    build_backward_friendly_with_u1(model, train_data, u, v1, u1, cfg)
}

/// Same as [`build_backward_friendly`] but reusing a precomputed `v1` and its
/// solve `u1` (the attack loop already has them from the forward scores).
pub fn build_backward_friendly_with_u1(
    model: &GlmModel,
    train_data: &Dataset,
    u: &[f64],
    v1: Array1<f64>,
    u1: Array1<f64>,
    cfg: &IhvpConfig,
) -> Result<(f64, FrozenAux)> {
    let v2 = glm::weighted_grad_sum(model, train_data, u)?;
    let u2 = influence::ihvp(model, train_data, &v2, cfg)?;
    let spec = glm::LossSpec {
        l2_damp: cfg.damp,
        damp_in_loss: false,
    };
    let h_u2 = glm::hvp(model, train_data, &u2, &spec)?;
    let value = v1.dot(&u2) + u1.dot(&v2) - u1.dot(&h_u2);
    Ok((value, FrozenAux { v1, v2, u1, u2 }))
}

/// Gradient of the backward-friendly objective with `u1`, `u2` frozen:
///
/// ```text
/// -(sum of test-sample Hessians) u2
/// + (sum_z u_z * Hessian of L(z)) u1
/// - u1' (dH/dtheta) u2
/// ```
///
/// All three terms are matrix-free. `aux` must have been built at this
/// model's parameters.
pub fn grad_backward_friendly(
    model: &GlmModel,
    train_data: &Dataset,
    test_data: &Dataset,
    u: &[f64],
    aux: &FrozenAux,
) -> Result<Array1<f64>> {
    let ones = vec![1.0; test_data.len()];
    let term_test = glm::hvp_weighted_sum(model, test_data, &ones, &aux.u2)?;
    let term_train = glm::hvp_weighted_sum(model, train_data, u, &aux.u1)?;
    let spec = glm::LossSpec {
        l2_damp: 0.0,
        damp_in_loss: false,
    };
    let term_third = glm::third_contract_grad(model, train_data, &aux.u1, &aux.u2, &spec)?;
    Ok(-term_test + term_train - term_third)
}
