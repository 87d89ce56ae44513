//! Covariate-shift split: the tails of the per-row feature mean become the OOD set.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Normalization, Targets};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of rows taken from each tail.
    pub ood_fraction: f64,
    /// Share of the middle block used for training; the rest is validation.
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ood_fraction: 0.05,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OodSplit {
    pub train: Dataset,
    pub val: Dataset,
    pub ood: Dataset,
    /// Original row indices of each part.
    pub train_rows: Vec<usize>,
    pub val_rows: Vec<usize>,
    pub ood_rows: Vec<usize>,
}

pub const MIN_SPLIT_ROWS: usize = 20;

/// Sorts rows by their raw feature mean (stable, so ties keep original order), holds
/// out `floor(fraction · N)` rows from each end, and shuffles the middle into train and
/// validation. Features, and regression targets, are then z-scored with training
/// statistics only.
pub fn ood_split(data: &Dataset, spec: &SplitSpec) -> Result<OodSplit> {
    if !(spec.ood_fraction > 0.0 && spec.ood_fraction < 0.5) {
        return Err(Error::invalid("ood fraction must lie in (0, 0.5)"));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0) {
        return Err(Error::invalid("train fraction must lie in (0, 1]"));
    }
    if data.kind() == super::TaskKind::Preference {
        return Err(Error::invalid("ood split applies to row-labeled data"));
    }
    let n = data.len();
    if n < MIN_SPLIT_ROWS {
        return Err(Error::invalid(format!("ood split needs at least {MIN_SPLIT_ROWS} rows, got {n}")));
    }
    let d = data.dim() as f64;
    let means: Vec<f64> = (0..n).map(|i| data.x.row(i).iter().sum::<f64>() / d).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]));

    let tail = (spec.ood_fraction * n as f64).floor() as usize;
    let mut ood_rows: Vec<usize> = order[..tail].to_vec();
    ood_rows.extend_from_slice(&order[n - tail..]);
    let mut middle = order[tail..n - tail].to_vec();
    middle.sort_unstable();
    middle.shuffle(&mut rng::seeded(spec.seed));
    let n_train = ((spec.train_fraction * middle.len() as f64).round() as usize).clamp(1, middle.len());
    let val_rows = middle.split_off(n_train);
    let train_rows = middle;

    let norm = fit_normalization(&data.select(&train_rows));
    let apply = |rows: &[usize]| {
        let mut part = data.select(rows);
        normalize(&mut part, &norm);
        part
    };
    Ok(OodSplit {
        train: apply(&train_rows),
        val: apply(&val_rows),
        ood: apply(&ood_rows),
        train_rows,
        val_rows,
        ood_rows,
    })
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-12 { std } else { 1.0 })
}

/// Population z-scoring statistics; a constant column gets unit scale.
pub fn fit_normalization(train: &Dataset) -> Normalization {
    let (feature_mean, feature_std) = (0..train.dim())
        .map(|c| mean_std((0..train.x.rows()).map(|r| train.x.get(r, c))))
        .unzip();
    let (target_mean, target_std) = match &train.targets {
        Targets::Real(y) => mean_std(y.iter().copied()),
        _ => (0.0, 1.0),
    };
    Normalization {
        feature_mean,
        feature_std,
        target_mean,
        target_std,
    }
}

pub fn normalize(data: &mut Dataset, norm: &Normalization) {
    for r in 0..data.x.rows() {
        for (c, v) in data.x.row_mut(r).iter_mut().enumerate() {
            *v = (*v - norm.feature_mean[c]) / norm.feature_std[c];
        }
    }
    if let Targets::Real(y) = &mut data.targets {
        for v in y {
            *v = (*v - norm.target_mean) / norm.target_std;
        }
    }
    data.normalization = Some(norm.clone());
}
