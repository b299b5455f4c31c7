//! Dataset and model interchange, deterministic splits and generators, and
//! the rank-impossibility construction.
//!
//! Datasets travel as CSV with header `f0..f{d-1},label[,group]`; reals are
//! written with 17 significant digits so a round trip reproduces the exact
//! values. Models travel as a small JSON document. Everything that draws
//! randomness takes an explicit seed and is bit-deterministic under it.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{Dataset, GlmModel};

/// Writes bytes to `path` via a temporary sibling file and a rename, so
/// readers never observe a half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn fmt_real(v: f64) -> String {
    // 17 significant digits: exact f64 round trip
    format!("{v:.16e}")
}

/// Serializes the dataset to CSV (`f0..f{d-1},label[,group]`).
pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let mut header: Vec<String> = (0..data.dim()).map(|j| format!("f{j}")).collect();
        header.push("label".into());
        if data.groups().is_some() {
            header.push("group".into());
        }
        w.write_record(&header)?;
        for i in 0..data.len() {
            let mut rec: Vec<String> = data
                .features()
                .row(i)
                .iter()
                .map(|v| fmt_real(*v))
                .collect();
            rec.push(data.labels()[i].to_string());
            if let Some(g) = data.groups() {
                rec.push(g[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    write_atomic(path, &out)
}

/// Parses a dataset CSV, validating the header layout and every cell.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();

    let mut d = 0usize;
    while d < cols.len() && cols[d] == format!("f{d}") {
        d += 1;
    }
    if d == 0 {
        return Err(Error::Schema {
            location: "header".into(),
            message: format!(
                "expected feature columns f0..f{{d-1}} first, found {:?}",
                cols.first().copied().unwrap_or("<empty>")
            ),
        });
    }
    let mut rest = cols[d..].iter();
    match rest.next() {
        Some(&"label") => {}
        other => {
            return Err(Error::Schema {
                location: "header".into(),
                message: format!("expected column \"label\" after features, found {other:?}"),
            });
        }
    }
    let has_group = match rest.next() {
        None => false,
        Some(&"group") => true,
        Some(other) => {
            return Err(Error::Schema {
                location: "header".into(),
                message: format!("unexpected column {other:?} (only \"group\" may follow \"label\")"),
            });
        }
    };
    if rest.next().is_some() {
        return Err(Error::Schema {
            location: "header".into(),
            message: "trailing columns after \"group\"".into(),
        });
    }

    let mut flat: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut groups: Vec<u8> = Vec::new();
    for (ridx, record) in reader.records().enumerate() {
        let record = record?;
        let loc = |col: &str| format!("row {}, column {col}", ridx + 2);
        let expect = d + 1 + usize::from(has_group);
        if record.len() != expect {
            return Err(Error::Schema {
                location: format!("row {}", ridx + 2),
                message: format!("expected {expect} cells, found {}", record.len()),
            });
        }
        for j in 0..d {
            let cell = record.get(j).unwrap().trim();
            let v: f64 = cell.parse().map_err(|_| Error::Schema {
                location: loc(&format!("f{j}")),
                message: format!("not a real number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Schema {
                    location: loc(&format!("f{j}")),
                    message: "non-finite feature".into(),
                });
            }
            flat.push(v);
        }
        let lcell = record.get(d).unwrap().trim();
        let label: usize = lcell.parse().map_err(|_| Error::Schema {
            location: loc("label"),
            message: format!("not a non-negative integer: {lcell:?}"),
        })?;
        labels.push(label);
        if has_group {
            let gcell = record.get(d + 1).unwrap().trim();
            let g: u8 = gcell.parse().ok().filter(|g| *g <= 1).ok_or_else(|| {
                Error::Schema {
                    location: loc("group"),
                    message: format!("group must be 0 or 1, found {gcell:?}"),
                }
            })?;
            groups.push(g);
        }
    }

    let n = labels.len();
    let features = Array2::from_shape_vec((n, d), flat).map_err(|e| Error::Schema {
        location: "body".into(),
        message: e.to_string(),
    })?;

    let mut data = Dataset::new(features, labels)?;
    if has_group {
        data = data.with_groups(groups)?;
    }
    Ok(data)
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFileRepr {
    num_classes: usize,
    dim: usize,
    has_bias: bool,
    theta: Vec<f64>,
}

/// Serializes a model as a small JSON document.
pub fn save_model(model: &GlmModel, path: &Path) -> Result<()> {
    let repr = ModelFileRepr {
        num_classes: model.num_classes(),
        dim: model.dim(),
        has_bias: model.has_bias(),
        theta: model.theta().to_vec(),
    };
    let mut bytes = serde_json::to_vec_pretty(&repr)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn load_model(path: &Path) -> Result<GlmModel> {
    let bytes = std::fs::read(path)?;
    let repr: ModelFileRepr = serde_json::from_slice(&bytes)?;
    GlmModel::from_theta(
        Array1::from_vec(repr.theta),
        repr.num_classes,
        repr.dim,
        repr.has_bias,
    )
}

/// Splits into two halves preserving per-class counts to within one sample.
/// Deterministic under the seed; the halves are disjoint and exhaustive.
pub fn split_halves_stratified(data: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in data.labels().iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    for (class, members) in &by_class {
        if members.len() < 2 {
            return Err(Error::InvalidParam {
                name: "data",
                reason: format!("class {class} has a single member; cannot split"),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first: Vec<usize> = Vec::new();
    let mut second: Vec<usize> = Vec::new();
    let mut extra_to_first = true;
    for (_, mut members) in by_class {
        members.shuffle(&mut rng);
        let mut take = members.len() / 2;
        if members.len() % 2 == 1 {
            // odd classes alternate which half receives the extra sample
            if extra_to_first {
                take += 1;
            }
            extra_to_first = !extra_to_first;
        }
        first.extend(&members[..take]);
        second.extend(&members[take..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((data.subset(&first)?, data.subset(&second)?))
}

/// Gaussian class clusters: centers are seeded random unit directions scaled
/// by `separation`, unit within-class noise, labels balanced round-robin.
pub fn synth_blobs(
    n: usize,
    d: usize,
    num_classes: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if num_classes < 2 || n < num_classes || d == 0 {
        return Err(Error::InvalidParam {
            name: "synth_blobs",
            reason: format!("need n >= num_classes >= 2 and d >= 1; got n={n}, d={d}, classes={num_classes}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = Array2::zeros((num_classes, d));
    for c in 0..num_classes {
        let mut v: Array1<f64> = Array1::from_shape_fn(d, |_| rng.sample(StandardNormal));
        let norm = v.dot(&v).sqrt().max(1e-12);
        v.mapv_inplace(|x| x / norm * separation);
        centers.row_mut(c).assign(&v);
    }
    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % num_classes;
        labels.push(c);
        for j in 0..d {
            let noise: f64 = rng.sample(StandardNormal);
            features[(i, j)] = centers[(c, j)] + noise;
        }
    }
    Dataset::with_num_classes(features, labels, num_classes)
}

/// Binary dataset with a sensitive group: group labels are balanced coin
/// flips, positive-label rates differ across groups by `base_rate_gap`, and
/// the features carry both the label signal (axis 0) and the group signal
/// (axis 1), so a trained classifier exhibits a demographic disparity.
pub fn synth_biased_groups(n: usize, d: usize, base_rate_gap: f64, seed: u64) -> Result<Dataset> {
    if n < 4 || d < 2 || !(0.0..=0.9).contains(&base_rate_gap) {
        return Err(Error::InvalidParam {
            name: "synth_biased_groups",
            reason: format!("need n >= 4, d >= 2, gap in [0, 0.9]; got n={n}, d={d}, gap={base_rate_gap}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate0 = (0.5 + base_rate_gap / 2.0).min(0.95);
    let rate1 = (0.5 - base_rate_gap / 2.0).max(0.05);
    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for i in 0..n {
        let g = u8::from(rng.random::<bool>());
        let rate = if g == 0 { rate0 } else { rate1 };
        let y = usize::from(rng.random::<f64>() < rate);
        groups.push(g);
        labels.push(y);
        for j in 0..d {
            let noise: f64 = rng.sample(StandardNormal);
            features[(i, j)] = noise;
        }
        features[(i, 0)] += if y == 1 { 1.25 } else { -1.25 };
        features[(i, 1)] += if g == 1 { 0.75 } else { -0.75 };
    }
    Dataset::with_num_classes(features, labels, 2)?.with_groups(groups)
}

/// The one-hot construction whose target sample can never reach the top `k`
/// of the influence ranking, for any parameter vector of the no-bias binary
/// family. Index layout: filler samples `(e_i, y_i)`, then the target
/// `(e_1, +1)`, then `k` duplicates of `(-e_1, +1)`.
#[derive(Debug, Clone)]
pub struct ImpossibilitySetup {
    pub train: Dataset,
    pub test: Dataset,
    pub target_idx: usize,
    pub bar_indices: Vec<usize>,
}

/// Builds the construction for dimension `d >= 2` with `k >= 1` duplicated
/// opposing samples. Filler labels are seeded coin flips over `{+1, -1}`
/// (mapped to classes 1/0); `fix_labels_positive` pins them all to `+1`.
pub fn impossibility_dataset(
    d: usize,
    k: usize,
    seed: u64,
    fix_labels_positive: bool,
) -> Result<ImpossibilitySetup> {
    if d < 2 || k == 0 {
        return Err(Error::InvalidParam {
            name: "impossibility_dataset",
            reason: format!("need d >= 2 and k >= 1; got d={d}, k={k}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = d + k;
    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    // filler one-hot samples along axes 2..=d (0-based 1..d-1)
    for (row, axis) in (1..d).enumerate() {
        features[(row, axis)] = 1.0;
        let positive = fix_labels_positive || rng.random::<bool>();
        labels.push(usize::from(positive));
    }
    let target_idx = d - 1;
    features[(target_idx, 0)] = 1.0;
    labels.push(1);
    let bar_indices: Vec<usize> = (d..d + k).collect();
    for &row in &bar_indices {
        features[(row, 0)] = -1.0;
        labels.push(1);
    }
    let train = Dataset::with_num_classes(features, labels, 2)?;

    let mut test_features = Array2::zeros((1, d));
    test_features[(0, 0)] = 1.0;
    let test = Dataset::with_num_classes(test_features, vec![1], 2)?;

    Ok(ImpossibilitySetup {
        train,
        test,
        target_idx,
        bar_indices,
    })
}
