//! Independent verification helpers: finite differences, dense Hessian
//! assembly from per-sample outer products, and a small dense linear solve.
//!
//! These exist so tests can check the matrix-free implementations against a
//! second computation path. They are deliberately written the slow, obvious
//! way and must stay independent of the code they verify.

use ndarray::{Array1, Array2};

use crate::glm::{sigmoid, Dataset, GlmModel};

/// Central finite differences of a scalar function of the parameter vector.
pub fn fd_grad<F>(f: &F, theta: &Array1<f64>, step: f64) -> Array1<f64>
where
    F: Fn(&Array1<f64>) -> f64,
{
    let mut g = Array1::zeros(theta.len());
    let mut probe = theta.clone();
    for j in 0..theta.len() {
        probe[j] = theta[j] + step;
        let plus = f(&probe);
        probe[j] = theta[j] - step;
        let minus = f(&probe);
        probe[j] = theta[j];
        g[j] = (plus - minus) / (2.0 * step);
    }
    g
}

/// Max absolute difference between two vectors, relative to the larger
/// infinity norm (floored to dodge division by zero on zero vectors).
pub fn max_rel_err(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = a
        .iter()
        .chain(b.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1e-12);
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
        / scale
}

/// Dense damped Hessian of the weighted mean cross-entropy, assembled from
/// per-sample outer products.
pub fn dense_hessian(model: &GlmModel, data: &Dataset, damp: f64) -> Array2<f64> {
    let p = model.num_params();
    let d = model.dim();
    let cc = model.num_classes();
    let mut h = Array2::zeros((p, p));
    let n = data.len() as f64;
    for i in 0..data.len() {
        let w = data.weight(i);
        if w == 0.0 {
            continue;
        }
        let x = data.features().row(i);
        // augmented feature vector
        let mut xa = Vec::with_capacity(d + 1);
        xa.extend(x.iter().copied());
        if model.has_bias() {
            xa.push(1.0);
        }
        if cc == 2 {
            let s = sigmoid(model.class_scores(x)[1]);
            let curv = s * (1.0 - s) * w / n;
            for a in 0..xa.len() {
                for b in 0..xa.len() {
                    h[(a, b)] += curv * xa[a] * xa[b];
                }
            }
        } else {
            let scores = model.class_scores(x);
            let mx = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut prob: Vec<f64> = scores.iter().map(|v| (v - mx).exp()).collect();
            let z: f64 = prob.iter().sum();
            prob.iter_mut().for_each(|v| *v /= z);
            // index helper for (class, augmented coordinate)
            let idx = |c: usize, j: usize| -> usize {
                if j < d {
                    c * d + j
                } else {
                    cc * d + c
                }
            };
            for c1 in 0..cc {
                for c2 in 0..cc {
                    let block = (if c1 == c2 { prob[c1] } else { 0.0 } - prob[c1] * prob[c2])
                        * w
                        / n;
                    for a in 0..xa.len() {
                        for b in 0..xa.len() {
                            h[(idx(c1, a), idx(c2, b))] += block * xa[a] * xa[b];
                        }
                    }
                }
            }
        }
    }
    for j in 0..p {
        h[(j, j)] += damp;
    }
    h
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// Panics on a numerically singular system; intended for small test oracles.
pub fn dense_solve(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    assert_eq!(a.nrows(), n);
    assert_eq!(a.ncols(), n);
    let mut m = a.clone();
    let mut rhs = b.clone();
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if m[(r, col)].abs() > m[(pivot, col)].abs() {
                pivot = r;
            }
        }
        assert!(
            m[(pivot, col)].abs() > 1e-300,
            "dense_solve: singular matrix"
        );
        if pivot != col {
            for c in 0..n {
                let tmp = m[(col, c)];
                m[(col, c)] = m[(pivot, c)];
                m[(pivot, c)] = tmp;
            }
            rhs.swap(col, pivot);
        }
        for r in col + 1..n {
            let factor = m[(r, col)] / m[(col, col)];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                m[(r, c)] -= factor * m[(col, c)];
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    let mut x = Array1::zeros(n);
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in row + 1..n {
            acc -= m[(row, c)] * x[c];
        }
        x[row] = acc / m[(row, row)];
    }
    x
}

/// Smallest eigenvalue of a symmetric matrix via inverse power iteration on
/// a shifted system. Good enough for the small positive-definiteness checks.
pub fn min_eigenvalue_sym(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    // Rayleigh bound: shift by the max row sum so the target becomes the
    // largest eigenvalue of (shift*I - A).
    let shift = (0..n)
        .map(|r| (0..n).map(|c| a[(r, c)].abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        + 1.0;
    let mut b = -a.clone();
    for j in 0..n {
        b[(j, j)] += shift;
    }
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let w = b.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return shift;
        }
        let w = w / norm;
        let new_lambda = w.dot(&b.dot(&w));
        let done = (new_lambda - lambda).abs() <= 1e-13 * new_lambda.abs().max(1.0);
        lambda = new_lambda;
        v = w;
        if done {
            break;
        }
    }
    shift - lambda
}
