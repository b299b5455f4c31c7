//! Influence scores for training samples and their ranking.
//!
//! A training point's influence on a test point is the bilinear form
//! `-grad L(z_test)' (H + damp I)^{-1} grad L(z_train)`, with `H` the mean
//! training-loss Hessian. Set influence over a whole test set needs a single
//! inverse-Hessian-vector product: solve once against the summed test
//! gradient, then take one inner product per training sample.
//!
//! The solver is plain conjugate gradients over the matrix-free
//! Hessian-vector product; the damped Hessian is positive definite whenever
//! `damp > 0` (and for these GLMs positive semi-definite always).

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::glm::{self, Dataset, GlmModel, LossSpec, Sample};

/// Solver settings for the inverse-Hessian-vector product.
#[derive(Debug, Clone, Copy)]
pub struct IhvpConfig {
    /// Damping added to the Hessian, shared with the loss side.
    pub damp: f64,
    /// Relative residual threshold for conjugate gradients.
    pub cg_tol: f64,
    /// Iteration cap; `None` means `10 * p`.
    pub cg_max_iter: Option<usize>,
}

impl Default for IhvpConfig {
    fn default() -> Self {
        Self {
            damp: 0.01,
            cg_tol: 1e-8,
            cg_max_iter: None,
        }
    }
}

impl IhvpConfig {
    pub fn with_damp(damp: f64) -> Self {
        Self {
            damp,
            ..Self::default()
        }
    }

    fn loss_spec(&self) -> LossSpec {
        LossSpec {
            l2_damp: self.damp,
            damp_in_loss: false,
        }
    }

    fn max_iter(&self, p: usize) -> usize {
        self.cg_max_iter.unwrap_or(10 * p.max(1))
    }
}

/// Per-training-sample influence scores, index-aligned with the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceVector {
    pub scores: Vec<f64>,
}

impl InfluenceVector {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Training indices sorted by decreasing score; `rank_of[i]` is the 1-based
/// rank of training sample `i` (rank 1 = highest score). Ties order by
/// ascending training index.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub order: Vec<usize>,
    pub rank_of: Vec<usize>,
}

/// Solves `(H + damp I) x = v` by conjugate gradients over the matrix-free
/// Hessian product. The returned solution always satisfies the residual
/// contract `||(H + damp I) x - v|| <= cg_tol * ||v||`; failure to reach it
/// within the iteration cap is an error carrying the achieved residual.
pub fn ihvp(
    model: &GlmModel,
    train_data: &Dataset,
    v: &Array1<f64>,
    cfg: &IhvpConfig,
) -> Result<Array1<f64>> {
    let p = model.num_params();
    if v.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: v.len(),
            context: "ihvp right-hand side",
        });
    }
    if cfg.cg_tol <= 0.0 {
        return Err(Error::InvalidParam {
            name: "cg_tol",
            reason: "must be positive".into(),
        });
    }
    let spec = cfg.loss_spec();
    let b_norm = v.dot(v).sqrt();
    if b_norm == 0.0 {
        return Ok(Array1::zeros(p));
    }
    let apply = |x: &Array1<f64>| glm::hvp(model, train_data, x, &spec);

    let mut x = Array1::<f64>::zeros(p);
    let mut r = v.clone();
    let mut d = r.clone();
    let mut rs = r.dot(&r);
    let tol_abs = cfg.cg_tol * b_norm;
    let max_iter = cfg.max_iter(p);
    let mut iters = 0usize;

    while iters < max_iter {
        if rs.sqrt() <= tol_abs {
            // confirm with the true residual; the recurrence can drift
            let true_r = v - &apply(&x)?;
            let true_norm = true_r.dot(&true_r).sqrt();
            if true_norm <= tol_abs {
                return Ok(x);
            }
            r = true_r;
            d = r.clone();
            rs = r.dot(&r);
        }
        let ad = apply(&d)?;
        let dad = d.dot(&ad);
        if dad <= 0.0 || !dad.is_finite() {
            // curvature breakdown: the damped Hessian should prevent this
            return Err(Error::CgDidNotConverge {
                achieved: rs.sqrt() / b_norm,
                required: cfg.cg_tol,
                iters,
            });
        }
        let alpha = rs / dad;
        x.scaled_add(alpha, &d);
        r.scaled_add(-alpha, &ad);
        let rs_new = r.dot(&r);
        let beta = rs_new / rs;
        d = &r + &(beta * &d);
        rs = rs_new;
        iters += 1;
    }
    // final exactness check after exhausting iterations
    let true_r = v - &apply(&x)?;
    let achieved = true_r.dot(&true_r).sqrt() / b_norm;
    if achieved <= cfg.cg_tol {
        Ok(x)
    } else {
        Err(Error::CgDidNotConverge {
            achieved,
            required: cfg.cg_tol,
            iters,
        })
    }
}

/// Influence of one training sample on the loss at one test sample.
pub fn influence_pair(
    model: &GlmModel,
    z_train: &Sample,
    z_test: &Sample,
    train_data: &Dataset,
    cfg: &IhvpConfig,
) -> Result<f64> {
    let g_test = glm::sample_grad(model, z_test.features.view(), z_test.label);
    let s = ihvp(model, train_data, &g_test, cfg)?;
    let g_train = glm::sample_grad(model, z_train.features.view(), z_train.label);
    Ok(-s.dot(&g_train))
}

/// Influence of every training sample on the summed test-set loss.
///
/// One IHVP against the summed test gradient, then `n` inner products; the
/// result equals summing [`influence_pair`] over the test set.
pub fn influence_set(
    model: &GlmModel,
    train_data: &Dataset,
    test_data: &Dataset,
    cfg: &IhvpConfig,
) -> Result<InfluenceVector> {
    let s_test = test_loss_ihvp(model, train_data, test_data, cfg)?;
    scores_from_test_solution(model, train_data, &s_test)
}

/// The solved vector `(H + damp I)^{-1} (sum of test gradients)`. Exposed so
/// the attack loop can reuse it as a frozen IHVP solution.
pub fn test_loss_ihvp(
    model: &GlmModel,
    train_data: &Dataset,
    test_data: &Dataset,
    cfg: &IhvpConfig,
) -> Result<Array1<f64>> {
    let g_test = glm::grad_sum(model, test_data)?;
    ihvp(model, train_data, &g_test, cfg)
}

/// Scores from a precomputed test-side IHVP solution.
pub fn scores_from_test_solution(
    model: &GlmModel,
    train_data: &Dataset,
    s_test: &Array1<f64>,
) -> Result<InfluenceVector> {
    let mut scores = Vec::with_capacity(train_data.len());
    for i in 0..train_data.len() {
        let g = glm::sample_grad(model, train_data.features().row(i), train_data.labels()[i]);
        scores.push(-s_test.dot(&g));
    }
    Ok(InfluenceVector { scores })
}

/// Stable decreasing sort of the scores; ties break by ascending index.
pub fn rank(scores: &InfluenceVector) -> Result<Ranking> {
    for (i, s) in scores.scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFiniteScore { index: i });
        }
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores.scores[b]
            .partial_cmp(&scores.scores[a])
            .expect("scores checked finite")
            .then(a.cmp(&b))
    });
    let mut rank_of = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        rank_of[idx] = pos + 1;
    }
    Ok(Ranking { order, rank_of })
}

/// 1-based rank of one training sample, consistent with [`rank`].
pub fn rank_of(scores: &InfluenceVector, target_idx: usize) -> Result<usize> {
    let n = scores.len();
    if target_idx >= n {
        return Err(Error::IndexOutOfBounds {
            index: target_idx,
            len: n,
        });
    }
    let t = scores.scores[target_idx];
    if !t.is_finite() {
        return Err(Error::NonFiniteScore { index: target_idx });
    }
    let mut ahead = 0usize;
    for (i, &s) in scores.scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFiniteScore { index: i });
        }
        if s > t || (s == t && i < target_idx) {
            ahead += 1;
        }
    }
    Ok(ahead + 1)
}
