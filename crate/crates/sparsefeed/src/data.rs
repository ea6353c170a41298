//! Dataset ingestion: LIBSVM and numeric CSV loaders, per-feature
//! normalization, seeded train/test splitting, and a synthetic blob
//! generator for desk-scale experiments.

use crate::error::{Error, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::path::Path;

/// Dense feature matrix plus class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map(|r| r.len()).unwrap_or(0)
    }

    pub fn classes(&self) -> usize {
        self.labels.iter().max().map(|m| m + 1).unwrap_or(0)
    }
}

/// Load a LIBSVM-format file: `label idx:value ...` per line, 1-based
/// indices. The dimension is the largest index seen. Labels must be
/// non-negative integers.
pub fn load_libsvm(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
    let mut max_index = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let label_tok = parts.next().unwrap();
        let label: i64 = label_tok.parse().map_err(|_| {
            Error::Data(format!(
                "{}:{}: label '{label_tok}' is not an integer",
                path.display(),
                lineno + 1
            ))
        })?;
        if label < 0 {
            return Err(Error::Data(format!(
                "{}:{}: label {label} out of range (labels are class indices >= 0)",
                path.display(),
                lineno + 1
            )));
        }
        let mut entries = Vec::new();
        for tok in parts {
            let Some((idx, val)) = tok.split_once(':') else {
                return Err(Error::Data(format!(
                    "{}:{}: expected 'index:value', got '{tok}'",
                    path.display(),
                    lineno + 1
                )));
            };
            let idx: usize = idx.parse().map_err(|_| {
                Error::Data(format!(
                    "{}:{}: bad feature index '{idx}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            if idx == 0 {
                return Err(Error::Data(format!(
                    "{}:{}: LIBSVM indices are 1-based",
                    path.display(),
                    lineno + 1
                )));
            }
            let val: f64 = val.parse().map_err(|_| {
                Error::Data(format!(
                    "{}:{}: bad feature value '{val}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            max_index = max_index.max(idx);
            entries.push((idx - 1, val));
        }
        rows.push((label as usize, entries));
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: empty dataset", path.display())));
    }
    let mut features = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (label, entries) in rows {
        let mut row = vec![0.0; max_index];
        for (j, v) in entries {
            row[j] = v;
        }
        features.push(row);
        labels.push(label);
    }
    Ok(Dataset { features, labels })
}

/// Load a header-less numeric CSV; `label_column` names the class column,
/// all remaining columns are features in order.
pub fn load_csv(path: &Path, label_column: usize) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if let Some(w) = width {
            if fields.len() != w {
                return Err(Error::Data(format!(
                    "{}:{}: expected {w} fields, got {}",
                    path.display(),
                    lineno + 1,
                    fields.len()
                )));
            }
        } else {
            if fields.len() < 2 {
                return Err(Error::Data(format!(
                    "{}:{}: need at least a label and one feature column",
                    path.display(),
                    lineno + 1
                )));
            }
            if label_column >= fields.len() {
                return Err(Error::Data(format!(
                    "{}:{}: label column {label_column} out of range ({} columns)",
                    path.display(),
                    lineno + 1,
                    fields.len()
                )));
            }
            width = Some(fields.len());
        }
        let mut row = Vec::with_capacity(fields.len() - 1);
        let mut label = None;
        for (c, field) in fields.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Data(format!(
                    "{}:{}: column {c}: '{field}' is not a number",
                    path.display(),
                    lineno + 1
                ))
            })?;
            if c == label_column {
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(Error::Data(format!(
                        "{}:{}: label {v} is not a non-negative integer",
                        path.display(),
                        lineno + 1
                    )));
                }
                label = Some(v as usize);
            } else {
                row.push(v);
            }
        }
        features.push(row);
        labels.push(label.unwrap());
    }
    if features.is_empty() {
        return Err(Error::Data(format!("{}: empty dataset", path.display())));
    }
    Ok(Dataset { features, labels })
}

/// Write a dataset as numeric CSV with the label in column `label_column`.
/// Values use shortest round-trip formatting, so load(write(d)) == d.
pub fn write_csv(dataset: &Dataset, label_column: usize, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (row, label) in dataset.features.iter().zip(&dataset.labels) {
        let width = row.len() + 1;
        debug_assert!(label_column < width);
        let mut fields: Vec<String> = Vec::with_capacity(width);
        let mut fi = row.iter();
        for c in 0..width {
            if c == label_column {
                fields.push(label.to_string());
            } else {
                fields.push(format!("{}", fi.next().unwrap()));
            }
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Normalize each feature column to mean 0.5 and standard deviation 0.5
/// (constant columns become all 0.5).
pub fn normalize_features(features: &mut [Vec<f64>]) {
    if features.is_empty() {
        return;
    }
    let n = features.len() as f64;
    let width = features[0].len();
    for j in 0..width {
        let mean: f64 = features.iter().map(|r| r[j]).sum::<f64>() / n;
        let var: f64 = features.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        for r in features.iter_mut() {
            r[j] = if std > 0.0 { (r[j] - mean) / std * 0.5 + 0.5 } else { 0.5 };
        }
    }
}

/// Seeded train/test split; returns (train, test).
pub fn split_train_test(dataset: &Dataset, test_fraction: f64, seed: u64) -> (Dataset, Dataset) {
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rand::Rng::gen_range(&mut rng, 0..=i);
        order.swap(i, j);
    }
    let n_test = ((n as f64) * test_fraction).round() as usize;
    let (test_idx, train_idx) = order.split_at(n_test.min(n));
    let collect = |idx: &[usize]| Dataset {
        features: idx.iter().map(|&i| dataset.features[i].clone()).collect(),
        labels: idx.iter().map(|&i| dataset.labels[i]).collect(),
    };
    (collect(train_idx), collect(test_idx))
}

/// Synthetic Gaussian blob classification set: `classes` seeded centers,
/// points scattered around them, labels by generating center.
pub fn make_blobs(n: usize, d: usize, classes: usize, seed: u64) -> Dataset {
    assert!(classes >= 2 && d >= 1 && n >= classes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..d).map(|_| 2.0 * normal()).collect())
        .collect();
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        let row: Vec<f64> = centers[c].iter().map(|v| v + 0.7 * normal()).collect();
        features.push(row);
        labels.push(c);
    }
    Dataset { features, labels }
}

/// Multinomial cross-entropy loss of flattened class-major weights `x` on a
/// dataset, without any regularizer.
pub fn multinomial_ce_loss(dataset: &Dataset, classes: usize, x: &[f64]) -> f64 {
    let d = dataset.n_features();
    debug_assert_eq!(x.len(), classes * d);
    let mut total = 0.0;
    for (row, &y) in dataset.features.iter().zip(&dataset.labels) {
        let logits: Vec<f64> = (0..classes)
            .map(|c| x[c * d..(c + 1) * d].iter().zip(row).map(|(a, b)| a * b).sum())
            .collect();
        let max = logits.iter().cloned().fold(f64::MIN, f64::max);
        let log_sum = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        total += log_sum - logits[y];
    }
    total / dataset.len() as f64
}

/// Argmax-class accuracy of flattened class-major weights `x`.
pub fn argmax_accuracy(dataset: &Dataset, classes: usize, x: &[f64]) -> f64 {
    let d = dataset.n_features();
    let mut correct = 0usize;
    for (row, &y) in dataset.features.iter().zip(&dataset.labels) {
        let mut best = (f64::MIN, 0usize);
        for c in 0..classes {
            let score: f64 = x[c * d..(c + 1) * d].iter().zip(row).map(|(a, b)| a * b).sum();
            if score > best.0 {
                best = (score, c);
            }
        }
        if best.1 == y {
            correct += 1;
        }
    }
    correct as f64 / dataset.len() as f64
}
