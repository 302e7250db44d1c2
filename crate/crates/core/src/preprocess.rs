//! Training-data preparation: class balancing, log transform, min-max
//! normalization, splits and multi-project combination.

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Metric};
use crate::error::{Error, LogOffender, Result};
use crate::rng::{seeded, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogMode {
    /// `ln(x)`; any `x <= 0` is an error.
    #[default]
    Strict,
    /// `ln(1 + x)`.
    Log1p,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformPlan {
    pub log_columns: Vec<Metric>,
    pub log_mode: LogMode,
    /// Metrics excluded from the default training feature set.
    pub drop_columns: Vec<Metric>,
    pub normalize: bool,
}

impl Default for TransformPlan {
    fn default() -> Self {
        Self {
            log_columns: vec![
                Metric::Ns,
                Metric::Nf,
                Metric::Ndev,
                Metric::Nuc,
                Metric::Exp,
                Metric::Rexp,
                Metric::Sexp,
            ],
            log_mode: LogMode::Strict,
            drop_columns: vec![Metric::Nd, Metric::Rexp, Metric::La, Metric::Ld],
            normalize: true,
        }
    }
}

impl TransformPlan {
    /// All metrics except `drop_columns`.
    pub fn training_features(&self) -> Vec<Metric> {
        Metric::ALL
            .iter()
            .copied()
            .filter(|m| !self.drop_columns.contains(m))
            .collect()
    }

    /// The same plan with log columns limited to `features`.
    pub fn restricted_to(&self, features: &[Metric]) -> TransformPlan {
        TransformPlan {
            log_columns: self
                .log_columns
                .iter()
                .copied()
                .filter(|m| features.contains(m))
                .collect(),
            ..self.clone()
        }
    }
}

/// Per-column min/max fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub columns: Vec<ColumnBounds>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnBounds {
    pub metric: Metric,
    pub min: f64,
    pub max: f64,
}

impl NormalizationParams {
    pub fn get(&self, metric: Metric) -> Option<&ColumnBounds> {
        self.columns.iter().find(|c| c.metric == metric)
    }
}

impl ColumnBounds {
    /// `(x - min) / (max - min)`, or 0 for a constant column. Not clamped.
    pub fn scale(&self, x: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (x - self.min) / span
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.9,
            seed: 0,
        }
    }
}

fn class_indices(d: &Dataset) -> (Vec<usize>, Vec<usize>) {
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (i, r) in d.records().iter().enumerate() {
        if r.label() {
            pos.push(i)
        } else {
            neg.push(i)
        }
    }
    (pos, neg)
}

fn require_both_classes(d: &Dataset) -> Result<(Vec<usize>, Vec<usize>)> {
    let (pos, neg) = class_indices(d);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::OneClass(format!(
            "'{}' has {} defective and {} clean rows",
            d.project(),
            pos.len(),
            neg.len()
        )));
    }
    Ok((pos, neg))
}

/// Draws `per_class` rows from each class without replacement and shuffles
/// the result.
fn balanced_sample(d: &Dataset, pos: &[usize], neg: &[usize], per_class: usize, seed: u64, stream: Stream) -> Dataset {
    let mut rng = seeded(seed, stream);
    let mut keep = Vec::with_capacity(2 * per_class);
    for class in [pos, neg] {
        if class.len() == per_class {
            keep.extend_from_slice(class);
        } else {
            keep.extend(index::sample(&mut rng, class.len(), per_class).into_iter().map(|k| class[k]));
        }
    }
    keep.shuffle(&mut rng);
    d.subset(&keep)
}

/// Random undersampling of the majority class down to the minority count.
pub fn undersample(d: &Dataset, seed: u64) -> Result<Dataset> {
    let (pos, neg) = require_both_classes(d)?;
    let minority = pos.len().min(neg.len());
    Ok(balanced_sample(d, &pos, &neg, minority, seed, Stream::Undersample))
}

/// Replaces every cell of `plan.log_columns` with its logarithm.
pub fn log_transform(d: &Dataset, plan: &TransformPlan) -> Result<Dataset> {
    let mut offenders = Vec::new();
    for (row, r) in d.records().iter().enumerate() {
        for &m in &plan.log_columns {
            let x = r.get(m);
            let bad = match plan.log_mode {
                LogMode::Strict => !(x > 0.0),
                LogMode::Log1p => !(x > -1.0),
            };
            if bad {
                offenders.push(LogOffender {
                    row,
                    column: m.name().to_string(),
                    value: x,
                });
            }
        }
    }
    if !offenders.is_empty() {
        return Err(Error::LogDomain(offenders));
    }
    Ok(d.map_records(|_, r| {
        for &m in &plan.log_columns {
            let x = r.get(m);
            r.set(
                m,
                match plan.log_mode {
                    LogMode::Strict => x.ln(),
                    LogMode::Log1p => x.ln_1p(),
                },
            );
        }
    }))
}

pub fn fit_minmax(d: &Dataset, columns: &[Metric]) -> Result<NormalizationParams> {
    if d.is_empty() {
        return Err(Error::Empty("cannot fit min-max on an empty dataset".into()));
    }
    Ok(NormalizationParams {
        columns: columns
            .iter()
            .map(|&m| {
                let range = d.range(m).expect("non-empty");
                ColumnBounds {
                    metric: m,
                    min: range.min,
                    max: range.max,
                }
            })
            .collect(),
    })
}

/// Min-max scales the dataset's active features with previously fitted bounds.
pub fn apply_minmax(d: &Dataset, params: &NormalizationParams) -> Result<Dataset> {
    let bounds = d
        .features()
        .iter()
        .map(|&m| params.get(m).copied().ok_or_else(|| Error::MissingParams(m.name().into())))
        .collect::<Result<Vec<_>>>()?;
    Ok(d.map_records(|_, r| {
        for b in &bounds {
            r.set(b.metric, b.scale(r.get(b.metric)));
        }
    }))
}

/// Seeded shuffle, then the first `floor(n * train_fraction)` rows train.
pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Spec(format!(
            "train_fraction must be in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let n = d.len();
    if n < 2 {
        return Err(Error::TooSmall(format!("split needs at least 2 rows, got {n}")));
    }
    let n_train = (n as f64 * spec.train_fraction).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::TooSmall(format!(
            "{n} rows at fraction {} leave an empty partition",
            spec.train_fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(spec.seed, Stream::Split));
    Ok((d.subset(&order[..n_train]), d.subset(&order[n_train..])))
}

/// Balances each source, then downsamples every source to the smallest
/// balanced size so each project contributes the same number of rows.
pub fn combine(datasets: &[Dataset], seed: u64) -> Result<Dataset> {
    if datasets.len() < 2 {
        return Err(Error::Spec(format!(
            "combine needs at least 2 datasets, got {}",
            datasets.len()
        )));
    }
    let classes = datasets
        .iter()
        .map(require_both_classes)
        .collect::<Result<Vec<_>>>()?;
    let per_class = classes
        .iter()
        .map(|(p, n)| p.len().min(n.len()))
        .min()
        .expect("at least two sources");

    let parts: Vec<Dataset> = datasets
        .iter()
        .zip(&classes)
        .enumerate()
        .map(|(i, (d, (pos, neg)))| {
            balanced_sample(d, pos, neg, per_class, seed.wrapping_add(i as u64), Stream::Combine)
        })
        .collect();
    let project = datasets
        .iter()
        .map(Dataset::project)
        .collect::<Vec<_>>()
        .join("+");
    let merged = Dataset::concat(project, parts);
    let mut order: Vec<usize> = (0..merged.len()).collect();
    order.shuffle(&mut seeded(seed, Stream::Combine));
    Ok(merged.subset(&order))
}

/// Columns the strict log would fail on, formatted for messages.
pub fn describe_offenders(offenders: &[LogOffender], limit: usize) -> String {
    let mut parts: Vec<String> = offenders
        .iter()
        .take(limit)
        .map(|o| format!("(row {}, {}={})", o.row, o.column, o.value))
        .collect();
    if offenders.len() > limit {
        parts.push(format!("... {} more", offenders.len() - limit));
    }
    parts.join(" ")
}
