//! Losses, gradients and curvature for binary and multinomial logistic
//! regression, plus full-batch ERM training.
//!
//! Everything here is matrix-free: Hessian-vector products and the
//! third-derivative contraction are computed from per-sample closed forms,
//! never by materializing a `p x p` (or `p x p x p`) array. Binary models use
//! the reduced single-weight-vector parameterization (`p = d` plus an
//! optional bias); multiclass models store per-class weight rows followed by
//! per-class biases.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// A feature matrix with integer labels, an optional binary group attribute
/// and optional per-sample weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    groups: Option<Vec<u8>>,
    sample_weights: Option<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset, inferring the class count as `max(label) + 1`
    /// (at least 2).
    pub fn new(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let inferred = labels.iter().copied().max().map_or(2, |m| (m + 1).max(2));
        Self::with_num_classes(features, labels, inferred)
    }

    /// Builds a dataset with an explicit class count.
    pub fn with_num_classes(
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                got: labels.len(),
                context: "labels vs feature rows",
            });
        }
        if num_classes < 2 {
            return Err(Error::InvalidParam {
                name: "num_classes",
                reason: format!("must be at least 2, got {num_classes}"),
            });
        }
        if features.ncols() == 0 {
            return Err(Error::InvalidParam {
                name: "features",
                reason: "feature dimension must be at least 1".into(),
            });
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "dataset features",
            });
        }
        for (row, &label) in labels.iter().enumerate() {
            if label >= num_classes {
                return Err(Error::LabelOutOfRange {
                    row,
                    label,
                    num_classes,
                });
            }
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            groups: None,
            sample_weights: None,
        })
    }

    /// An empty dataset of the given feature dimension. Useful as the
    /// no-data limit of Hessian products.
    pub fn empty(dim: usize, num_classes: usize) -> Self {
        Self {
            features: Array2::zeros((0, dim)),
            labels: Vec::new(),
            num_classes: num_classes.max(2),
            groups: None,
            sample_weights: None,
        }
    }

    pub fn with_groups(mut self, groups: Vec<u8>) -> Result<Self> {
        if groups.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: groups.len(),
                context: "groups vs samples",
            });
        }
        if let Some(&bad) = groups.iter().find(|&&g| g > 1) {
            return Err(Error::InvalidParam {
                name: "groups",
                reason: format!("group values must be 0 or 1, got {bad}"),
            });
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn with_sample_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: weights.len(),
                context: "sample weights vs samples",
            });
        }
        if !weights.iter().all(|w| w.is_finite() && *w >= 0.0) {
            return Err(Error::InvalidParam {
                name: "sample_weights",
                reason: "weights must be finite and non-negative".into(),
            });
        }
        self.sample_weights = Some(weights);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn groups(&self) -> Option<&[u8]> {
        self.groups.as_deref()
    }

    pub fn sample_weights(&self) -> Option<&[f64]> {
        self.sample_weights.as_deref()
    }

    /// Weight of sample `i` (1 when no weights are attached).
    pub fn weight(&self, i: usize) -> f64 {
        self.sample_weights.as_ref().map_or(1.0, |w| w[i])
    }

    /// Owned copy of sample `i`.
    pub fn sample(&self, i: usize) -> Result<Sample> {
        if i >= self.len() {
            return Err(Error::IndexOutOfBounds {
                index: i,
                len: self.len(),
            });
        }
        Ok(Sample {
            features: self.features.row(i).to_owned(),
            label: self.labels[i],
        })
    }

    /// New dataset containing the given rows, carrying groups and weights.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Array2::zeros((indices.len(), self.dim()));
        let mut labels = Vec::with_capacity(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            if i >= self.len() {
                return Err(Error::IndexOutOfBounds {
                    index: i,
                    len: self.len(),
                });
            }
            features.row_mut(r).assign(&self.features.row(i));
            labels.push(self.labels[i]);
        }
        let mut out = Self::with_num_classes(features, labels, self.num_classes)?;
        if let Some(g) = &self.groups {
            out = out.with_groups(indices.iter().map(|&i| g[i]).collect())?;
        }
        if let Some(w) = &self.sample_weights {
            out = out.with_sample_weights(indices.iter().map(|&i| w[i]).collect())?;
        }
        Ok(out)
    }

    /// Replaces the sample weights (or clears them with `None`).
    pub fn replace_weights(mut self, weights: Option<Vec<f64>>) -> Result<Self> {
        match weights {
            Some(w) => self.with_sample_weights(w),
            None => {
                self.sample_weights = None;
                Ok(self)
            }
        }
    }
}

/// A single (features, label) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Array1<f64>,
    pub label: usize,
}

/// Parameters of a logistic-regression model.
///
/// Binary models (`num_classes == 2`) keep one weight vector of length `dim`
/// plus an optional bias. Multiclass models keep `num_classes` weight rows
/// (row-major) followed by the per-class biases.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmModel {
    theta: Array1<f64>,
    num_classes: usize,
    dim: usize,
    has_bias: bool,
}

impl GlmModel {
    pub fn zeros(num_classes: usize, dim: usize, has_bias: bool) -> Result<Self> {
        let p = Self::param_len(num_classes, dim, has_bias)?;
        Ok(Self {
            theta: Array1::zeros(p),
            num_classes,
            dim,
            has_bias,
        })
    }

    pub fn from_theta(
        theta: Array1<f64>,
        num_classes: usize,
        dim: usize,
        has_bias: bool,
    ) -> Result<Self> {
        let p = Self::param_len(num_classes, dim, has_bias)?;
        if theta.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: theta.len(),
                context: "theta length",
            });
        }
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "model parameters",
            });
        }
        Ok(Self {
            theta,
            num_classes,
            dim,
            has_bias,
        })
    }

    pub fn param_len(num_classes: usize, dim: usize, has_bias: bool) -> Result<usize> {
        if num_classes < 2 {
            return Err(Error::InvalidParam {
                name: "num_classes",
                reason: format!("must be at least 2, got {num_classes}"),
            });
        }
        if dim == 0 {
            return Err(Error::InvalidParam {
                name: "dim",
                reason: "must be at least 1".into(),
            });
        }
        let bias = usize::from(has_bias);
        Ok(if num_classes == 2 {
            dim + bias
        } else {
            num_classes * dim + num_classes * bias
        })
    }

    pub fn theta(&self) -> &Array1<f64> {
        &self.theta
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_bias(&self) -> bool {
        self.has_bias
    }

    /// Same shape, new parameter values.
    pub fn with_theta(&self, theta: Array1<f64>) -> Result<Self> {
        Self::from_theta(theta, self.num_classes, self.dim, self.has_bias)
    }

    /// Raw class scores for one input. Binary models report `[0, m]` where
    /// `m` is the margin, so argmax matches the sign convention.
    pub fn class_scores(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        if self.num_classes == 2 {
            let m = self.margin(x);
            Array1::from_vec(vec![0.0, m])
        } else {
            let mut s = Array1::zeros(self.num_classes);
            let d = self.dim;
            for c in 0..self.num_classes {
                let w = self.theta.slice(ndarray::s![c * d..(c + 1) * d]);
                let mut v = w.dot(&x);
                if self.has_bias {
                    v += self.theta[self.num_classes * d + c];
                }
                s[c] = v;
            }
            s
        }
    }

    /// Predicted class; score ties break toward the lower class index.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> usize {
        let s = self.class_scores(x);
        let mut best = 0;
        for c in 1..s.len() {
            if s[c] > s[best] {
                best = c;
            }
        }
        best
    }

    fn margin(&self, x: ArrayView1<'_, f64>) -> f64 {
        debug_assert_eq!(self.num_classes, 2);
        let w = self.theta.slice(ndarray::s![..self.dim]);
        let mut m = w.dot(&x);
        if self.has_bias {
            m += self.theta[self.dim];
        }
        m
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: data.dim(),
                context: "data dim vs model dim",
            });
        }
        if data.num_classes() > self.num_classes {
            return Err(Error::DimensionMismatch {
                expected: self.num_classes,
                got: data.num_classes(),
                context: "data classes vs model classes",
            });
        }
        Ok(())
    }

    fn check_vec(&self, v: &Array1<f64>, context: &'static str) -> Result<()> {
        if v.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: v.len(),
                context,
            });
        }
        Ok(())
    }
}

/// Loss shaping: damping strength and whether it also enters the training
/// loss (it always enters the Hessian). Per-sample terms are averaged over
/// the sample count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    /// Added to the Hessian as `l2_damp * I`; with `damp_in_loss` also adds
    /// `(l2_damp / 2) * ||theta||^2` to the loss.
    pub l2_damp: f64,
    pub damp_in_loss: bool,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            l2_damp: 0.01,
            damp_in_loss: false,
        }
    }
}

impl LossSpec {
    pub fn new(l2_damp: f64, damp_in_loss: bool) -> Result<Self> {
        if !(l2_damp >= 0.0 && l2_damp.is_finite()) {
            return Err(Error::InvalidParam {
                name: "l2_damp",
                reason: format!("must be finite and non-negative, got {l2_damp}"),
            });
        }
        Ok(Self {
            l2_damp,
            damp_in_loss,
        })
    }

    /// Damping in the Hessian only; the training loss stays plain.
    pub fn damped(l2_damp: f64) -> Result<Self> {
        Self::new(l2_damp, false)
    }

    /// Damping in both the Hessian and the training loss (L2-regularized
    /// training, used by the fairness base models).
    pub fn regularized(l2_damp: f64) -> Result<Self> {
        Self::new(l2_damp, true)
    }
}

#[inline]
pub(crate) fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(m: f64) -> f64 {
    m.max(0.0) + (-m.abs()).exp().ln_1p()
}

/// Per-sample softmax probabilities from class scores.
fn softmax(scores: &Array1<f64>) -> Array1<f64> {
    let mx = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = scores.mapv(|s| (s - mx).exp());
    let z = p.sum();
    p.mapv_inplace(|v| v / z);
    p
}

/// Weighted mean cross-entropy, plus `(l2_damp/2)*||theta||^2` when the
/// damping-in-loss flag is set.
pub fn loss(model: &GlmModel, data: &Dataset, spec: &LossSpec) -> Result<f64> {
    model.check_data(data)?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.len() as f64;
    let mut total = 0.0;
    for i in 0..data.len() {
        let x = data.features().row(i);
        let y = data.labels()[i];
        let li = if model.num_classes == 2 {
            let m = model.margin(x);
            softplus(m) - (y as f64) * m
        } else {
            let s = model.class_scores(x);
            let mx = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + s.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
            lse - s[y]
        };
        total += data.weight(i) * li;
    }
    let mut out = total / n;
    if spec.damp_in_loss {
        out += 0.5 * spec.l2_damp * model.theta.dot(&model.theta);
    }
    if !out.is_finite() {
        return Err(Error::NonFinite { context: "loss" });
    }
    Ok(out)
}

/// Gradient of one sample's cross-entropy at the model parameters.
/// Sample weights and damping do not apply here.
pub fn sample_grad(model: &GlmModel, x: ArrayView1<'_, f64>, y: usize) -> Array1<f64> {
    let mut g = Array1::zeros(model.num_params());
    accumulate_sample_grad(model, x, y, 1.0, &mut g);
    g
}

fn accumulate_sample_grad(
    model: &GlmModel,
    x: ArrayView1<'_, f64>,
    y: usize,
    coeff: f64,
    out: &mut Array1<f64>,
) {
    let d = model.dim;
    if model.num_classes == 2 {
        let r = coeff * (sigmoid(model.margin(x)) - y as f64);
        for j in 0..d {
            out[j] += r * x[j];
        }
        if model.has_bias {
            out[d] += r;
        }
    } else {
        let p = softmax(&model.class_scores(x));
        for c in 0..model.num_classes {
            let r = coeff * (p[c] - f64::from(c == y));
            for j in 0..d {
                out[c * d + j] += r * x[j];
            }
            if model.has_bias {
                out[model.num_classes * d + c] += r;
            }
        }
    }
}

/// Gradient of [`loss`] at the model parameters.
pub fn grad(model: &GlmModel, data: &Dataset, spec: &LossSpec) -> Result<Array1<f64>> {
    model.check_data(data)?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.len() as f64;
    let mut g = Array1::zeros(model.num_params());
    for i in 0..data.len() {
        let w = data.weight(i);
        if w == 0.0 {
            continue;
        }
        accumulate_sample_grad(model, data.features().row(i), data.labels()[i], w / n, &mut g);
    }
    if spec.damp_in_loss {
        g.scaled_add(spec.l2_damp, &model.theta);
    }
    Ok(g)
}

/// Plain (unweighted, unnormalized) sum of per-sample gradients. This is the
/// test-set gradient sum of the influence definition.
pub fn grad_sum(model: &GlmModel, data: &Dataset) -> Result<Array1<f64>> {
    model.check_data(data)?;
    let mut g = Array1::zeros(model.num_params());
    for i in 0..data.len() {
        accumulate_sample_grad(model, data.features().row(i), data.labels()[i], 1.0, &mut g);
    }
    Ok(g)
}

/// `sum_i coeffs[i] * grad L(z_i)` over the dataset, ignoring any attached
/// sample weights.
pub fn weighted_grad_sum(model: &GlmModel, data: &Dataset, coeffs: &[f64]) -> Result<Array1<f64>> {
    model.check_data(data)?;
    if coeffs.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: coeffs.len(),
            context: "coefficient vector vs samples",
        });
    }
    let mut g = Array1::zeros(model.num_params());
    for i in 0..data.len() {
        if coeffs[i] == 0.0 {
            continue;
        }
        accumulate_sample_grad(model, data.features().row(i), data.labels()[i], coeffs[i], &mut g);
    }
    Ok(g)
}

/// Damped Hessian-vector product `(H + l2_damp * I) v` where `H` is the mean
/// per-sample cross-entropy Hessian (with sample weights).
///
/// Binary closed form per sample: `sig(m) sig(-m) (x~' v) x~`; multiclass
/// uses the softmax Hessian contraction. The empty-data limit is
/// `l2_damp * v`.
pub fn hvp(model: &GlmModel, data: &Dataset, v: &Array1<f64>, spec: &LossSpec) -> Result<Array1<f64>> {
    model.check_data(data)?;
    model.check_vec(v, "hvp input vector")?;
    let mut out = Array1::zeros(model.num_params());
    if !data.is_empty() {
        let n = data.len() as f64;
        for i in 0..data.len() {
            let w = data.weight(i);
            if w == 0.0 {
                continue;
            }
            accumulate_sample_hvp(model, data.features().row(i), v, w / n, &mut out);
        }
    }
    out.scaled_add(spec.l2_damp, v);
    Ok(out)
}

/// `sum_i coeffs[i] * (per-sample Hessian of L(z_i)) v` — no damping, no
/// normalization, attached sample weights ignored. This is the building
/// block for the backward-friendly gradient terms.
pub fn hvp_weighted_sum(
    model: &GlmModel,
    data: &Dataset,
    coeffs: &[f64],
    v: &Array1<f64>,
) -> Result<Array1<f64>> {
    model.check_data(data)?;
    model.check_vec(v, "hvp input vector")?;
    if coeffs.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: coeffs.len(),
            context: "coefficient vector vs samples",
        });
    }
    let mut out = Array1::zeros(model.num_params());
    for i in 0..data.len() {
        if coeffs[i] == 0.0 {
            continue;
        }
        accumulate_sample_hvp(model, data.features().row(i), v, coeffs[i], &mut out);
    }
    Ok(out)
}

fn accumulate_sample_hvp(
    model: &GlmModel,
    x: ArrayView1<'_, f64>,
    v: &Array1<f64>,
    coeff: f64,
    out: &mut Array1<f64>,
) {
    let d = model.dim;
    if model.num_classes == 2 {
        let s = sigmoid(model.margin(x));
        let curv = s * (1.0 - s);
        // x~' v with the implicit bias coordinate
        let mut xv = v.slice(ndarray::s![..d]).dot(&x);
        if model.has_bias {
            xv += v[d];
        }
        let r = coeff * curv * xv;
        for j in 0..d {
            out[j] += r * x[j];
        }
        if model.has_bias {
            out[d] += r;
        }
    } else {
        let cc = model.num_classes;
        let p = softmax(&model.class_scores(x));
        // a_c = v_c . x~ per class
        let mut a = Array1::zeros(cc);
        for c in 0..cc {
            let mut ac = v.slice(ndarray::s![c * d..(c + 1) * d]).dot(&x);
            if model.has_bias {
                ac += v[cc * d + c];
            }
            a[c] = ac;
        }
        let pa: f64 = (0..cc).map(|c| p[c] * a[c]).sum();
        for c in 0..cc {
            let r = coeff * p[c] * (a[c] - pa);
            for j in 0..d {
                out[c * d + j] += r * x[j];
            }
            if model.has_bias {
                out[cc * d + c] += r;
            }
        }
    }
}

/// Gradient of `u1' H(theta) u2` with `u1`, `u2` held fixed: the vector with
/// entries `u1' (dH/dtheta_j) u2`. `H` is the mean per-sample Hessian (with
/// sample weights); damping contributes zero.
pub fn third_contract_grad(
    model: &GlmModel,
    data: &Dataset,
    u1: &Array1<f64>,
    u2: &Array1<f64>,
    _spec: &LossSpec,
) -> Result<Array1<f64>> {
    model.check_data(data)?;
    model.check_vec(u1, "third contraction u1")?;
    model.check_vec(u2, "third contraction u2")?;
    let mut out = Array1::zeros(model.num_params());
    if data.is_empty() {
        return Ok(out);
    }
    let n = data.len() as f64;
    let d = model.dim;
    for i in 0..data.len() {
        let w = data.weight(i);
        if w == 0.0 {
            continue;
        }
        let x = data.features().row(i);
        if model.num_classes == 2 {
            let s = sigmoid(model.margin(x));
            // l'''(m) = sig'(m) (1 - 2 sig(m))
            let third = s * (1.0 - s) * (1.0 - 2.0 * s);
            let mut xu1 = u1.slice(ndarray::s![..d]).dot(&x);
            let mut xu2 = u2.slice(ndarray::s![..d]).dot(&x);
            if model.has_bias {
                xu1 += u1[d];
                xu2 += u2[d];
            }
            let r = (w / n) * third * xu1 * xu2;
            for j in 0..d {
                out[j] += r * x[j];
            }
            if model.has_bias {
                out[d] += r;
            }
        } else {
            let cc = model.num_classes;
            let p = softmax(&model.class_scores(x));
            let mut a1 = Array1::zeros(cc);
            let mut a2 = Array1::zeros(cc);
            for c in 0..cc {
                let mut v1 = u1.slice(ndarray::s![c * d..(c + 1) * d]).dot(&x);
                let mut v2 = u2.slice(ndarray::s![c * d..(c + 1) * d]).dot(&x);
                if model.has_bias {
                    v1 += u1[cc * d + c];
                    v2 += u2[cc * d + c];
                }
                a1[c] = v1;
                a2[c] = v2;
            }
            let pa1: f64 = (0..cc).map(|c| p[c] * a1[c]).sum();
            let pa2: f64 = (0..cc).map(|c| p[c] * a2[c]).sum();
            let pq: f64 = (0..cc).map(|c| p[c] * a1[c] * a2[c]).sum();
            // derivative of u1' H_sample u2 with respect to the class scores
            for k in 0..cc {
                let g = p[k]
                    * ((a1[k] * a2[k] - pq)
                        - (a1[k] - pa1) * pa2
                        - pa1 * (a2[k] - pa2));
                let r = (w / n) * g;
                for j in 0..d {
                    out[k * d + j] += r * x[j];
                }
                if model.has_bias {
                    out[cc * d + k] += r;
                }
            }
        }
    }
    Ok(out)
}

/// Full-batch gradient descent with Armijo backtracking.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub max_iters: usize,
    /// Converged when the gradient 2-norm drops to this value.
    pub grad_tol: f64,
    /// Step-size schedule: the backtracking base step; it doubles after an
    /// accepted step and halves until the Armijo condition holds.
    pub initial_step: f64,
    pub has_bias: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            grad_tol: 1e-7,
            initial_step: 1.0,
            has_bias: true,
            seed: 0,
        }
    }
}

/// Outcome of [`train_erm`]. Non-convergence is reported, not silent:
/// `converged` is false and `final_grad_norm` carries the residual.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: GlmModel,
    pub converged: bool,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Empirical risk minimization for the weighted cross-entropy objective.
/// Deterministic: zero initialization, fixed descent schedule.
pub fn train_erm(data: &Dataset, spec: &LossSpec, cfg: &TrainConfig) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.grad_tol <= 0.0 {
        return Err(Error::InvalidParam {
            name: "grad_tol",
            reason: "must be positive".into(),
        });
    }
    if cfg.max_iters == 0 {
        return Err(Error::InvalidParam {
            name: "max_iters",
            reason: "must be at least 1".into(),
        });
    }
    let distinct: std::collections::BTreeSet<usize> = data.labels().iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::TooFewClasses);
    }

    let mut model = GlmModel::zeros(data.num_classes(), data.dim(), cfg.has_bias)?;
    let initial_loss = loss(&model, data, spec)?;
    let mut f = initial_loss;
    let mut g = grad(&model, data, spec)?;
    let mut step = cfg.initial_step;
    let mut iterations = 0;

    for it in 0..cfg.max_iters {
        iterations = it;
        let gnorm = g.dot(&g).sqrt();
        if gnorm <= cfg.grad_tol {
            return Ok(TrainReport {
                model,
                converged: true,
                iterations,
                final_grad_norm: gnorm,
                initial_loss,
                final_loss: f,
            });
        }
        // Armijo backtracking along -g
        let gsq = gnorm * gnorm;
        let mut accepted = false;
        while step > 1e-20 {
            let theta_new = model.theta() - &(step * &g);
            let cand = model.with_theta(theta_new)?;
            let f_new = loss(&cand, data, spec)?;
            if f_new <= f - 1e-4 * step * gsq {
                model = cand;
                f = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // step underflow: cannot make progress
            break;
        }
        g = grad(&model, data, spec)?;
        step = (step * 2.0).min(1e6);
    }

    let gnorm = g.dot(&g).sqrt();
    Ok(TrainReport {
        model,
        converged: gnorm <= cfg.grad_tol,
        iterations: iterations + 1,
        final_grad_norm: gnorm,
        initial_loss,
        final_loss: f,
    })
}

/// Fraction of samples whose argmax class score equals the label.
pub fn accuracy(model: &GlmModel, data: &Dataset) -> Result<f64> {
    model.check_data(data)?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    for i in 0..data.len() {
        if model.predict(data.features().row(i)) == data.labels()[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Argmax class predictions for every sample.
pub fn predictions(model: &GlmModel, data: &Dataset) -> Result<Vec<usize>> {
    model.check_data(data)?;
    Ok((0..data.len())
        .map(|i| model.predict(data.features().row(i)))
        .collect())
}
