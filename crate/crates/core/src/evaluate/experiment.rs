use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::folds::FoldPlan;
use super::pipeline::TrainedPipeline;
use crate::dataset::{feature_label, ColumnSchema, Dataset, Metric};
use crate::error::{Error, Result};
use crate::metrics::{precision, recall, ConfusionCounts};
use crate::mlp::TrainConfig;
use crate::parallel::{self, Parallelism};
use crate::preprocess::{combine, TransformPlan};

/// A grid of feature combinations evaluated by repeated k-fold CV.
///
/// Serialized as TOML with every default written out, so a report can carry
/// the exact configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// One CSV, or several that are combined into one balanced pool.
    pub datasets: Vec<PathBuf>,
    #[serde(default)]
    pub combine_seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default = "half")]
    pub threshold: f64,
    pub combinations: Vec<Vec<Metric>>,
    #[serde(default)]
    pub transform: TransformPlan,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub folds: FoldPlan,
    #[serde(skip)]
    pub parallelism: Parallelism,
}

fn one() -> usize {
    1
}

fn half() -> f64 {
    0.5
}

impl ExperimentSpec {
    pub fn new(datasets: Vec<PathBuf>, combinations: Vec<Vec<Metric>>) -> Self {
        Self {
            datasets,
            combine_seed: 0,
            repetitions: 1,
            threshold: 0.5,
            combinations,
            transform: TransformPlan::default(),
            train: TrainConfig::default(),
            folds: FoldPlan::default(),
            parallelism: Parallelism::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.combinations.is_empty() {
            return Err(Error::Spec("at least one feature combination is required".into()));
        }
        if let Some(i) = self.combinations.iter().position(Vec::is_empty) {
            return Err(Error::Spec(format!("combination {} is empty", i + 1)));
        }
        if self.repetitions == 0 {
            return Err(Error::Spec("repetitions must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Spec(format!("threshold must be in [0, 1], got {}", self.threshold)));
        }
        if self.folds.k < 2 {
            return Err(Error::Spec(format!("k must be at least 2, got {}", self.folds.k)));
        }
        self.train.validate()
    }

    /// Parses TOML. Relative dataset paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::Spec(e.message().trim().to_string()))?;
        if let Some(base) = base_dir {
            for p in &mut spec.datasets {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(|p| {
            let p = if p.as_os_str().is_empty() { Path::new(".") } else { p };
            std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
        });
        Self::from_toml(&text, base.as_deref())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Spec(format!("cannot serialize spec: {e}")))
    }

    /// Loads the datasets, combining them when there is more than one.
    pub fn load_data(&self, schema: &ColumnSchema) -> Result<Dataset> {
        let loaded = self
            .datasets
            .iter()
            .map(|p| Dataset::load(p, schema))
            .collect::<Result<Vec<_>>>()?;
        match loaded.len() {
            1 => Ok(loaded.into_iter().next().expect("one dataset")),
            _ => combine(&loaded, self.combine_seed),
        }
    }

    /// Fold plan and training config for repetition `r`.
    pub fn repetition(&self, r: usize) -> (FoldPlan, TrainConfig) {
        let r = r as u64;
        let folds = FoldPlan {
            seed: self.folds.seed.wrapping_add(r),
            ..self.folds.clone()
        };
        let train = TrainConfig {
            seed: self.train.seed.wrapping_add(r),
            ..self.train.clone()
        };
        (folds, train)
    }
}

/// Outcome on one held-out fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub repetition: usize,
    pub fold: usize,
    pub counts: ConfusionCounts,
    /// `None` when the fold has no actual positives.
    pub recall: Option<f64>,
    /// `None` when nothing in the fold was predicted positive.
    pub precision: Option<f64>,
}

/// All folds of all repetitions for one feature combination.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationResult {
    pub features: Vec<Metric>,
    pub folds: Vec<FoldResult>,
}

/// Arithmetic mean of the defined values, `None` if there are none.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.into_iter().flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

impl CombinationResult {
    pub fn label(&self) -> String {
        feature_label(&self.features)
    }

    pub fn mean_recall(&self) -> Option<f64> {
        mean_defined(self.folds.iter().map(|f| f.recall))
    }

    pub fn mean_precision(&self) -> Option<f64> {
        mean_defined(self.folds.iter().map(|f| f.precision))
    }

    pub fn repetition_recall(&self, r: usize) -> Option<f64> {
        mean_defined(self.folds.iter().filter(|f| f.repetition == r).map(|f| f.recall))
    }

    pub fn repetition_precision(&self, r: usize) -> Option<f64> {
        mean_defined(self.folds.iter().filter(|f| f.repetition == r).map(|f| f.precision))
    }
}

/// Seed used to train fold `fold` given the repetition's training seed.
fn fold_seed(base: u64, fold: usize) -> u64 {
    base.wrapping_add((fold as u64) << 32)
}

/// One repetition of k-fold CV. Each training portion is undersampled,
/// transformed and normalized on its own; the held-out fold only receives the
/// fitted transforms.
pub fn kfold_repetition(
    data: &Dataset,
    spec: &ExperimentSpec,
    features: &[Metric],
    repetition: usize,
) -> Result<Vec<FoldResult>> {
    if !data.has_both_classes() {
        return Err(Error::OneClass(format!(
            "{} needs both classes for cross-validation",
            data.project()
        )));
    }
    let (plan, train) = spec.repetition(repetition);
    let folds = plan.assign(data)?;
    let jobs: Vec<(usize, Vec<usize>)> = folds.into_iter().enumerate().collect();
    let n = data.len();
    let results = parallel::map(spec.parallelism, jobs, |(i, held_out)| {
        let mut in_fold = vec![false; n];
        for &r in &held_out {
            in_fold[r] = true;
        }
        let train_rows: Vec<usize> = (0..n).filter(|&r| !in_fold[r]).collect();
        let cfg = TrainConfig {
            seed: fold_seed(train.seed, i),
            ..train.clone()
        };
        let pipeline = TrainedPipeline::fit(
            &data.subset(&train_rows),
            features,
            &spec.transform,
            &cfg,
            spec.threshold,
        )?;
        let test = data.subset(&held_out);
        let (predicted, _) = pipeline.predict(&test)?;
        let counts = ConfusionCounts::from_predictions(&predicted, &test.labels());
        Ok(FoldResult {
            repetition,
            fold: i,
            counts,
            recall: recall(&counts).ok(),
            precision: precision(&counts).ok(),
        })
    });
    results.into_iter().collect()
}

/// k-fold CV of one combination using the spec's base seeds.
pub fn kfold_cv(data: &Dataset, spec: &ExperimentSpec, features: &[Metric]) -> Result<CombinationResult> {
    Ok(CombinationResult {
        features: features.to_vec(),
        folds: kfold_repetition(data, spec, features, 0)?,
    })
}

/// Results of a full experiment, sorted by descending mean recall.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub project: String,
    pub n_rows: usize,
    pub n_defect: usize,
    pub results: Vec<CombinationResult>,
}

/// Runs every combination for every repetition on an already loaded dataset.
pub fn run_on(data: &Dataset, spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.combinations.len())
        .flat_map(|c| (0..spec.repetitions).map(move |r| (c, r)))
        .collect();
    let runs = parallel::map(spec.parallelism, jobs, |(c, r)| {
        let features = &spec.combinations[c];
        kfold_repetition(data, spec, features, r).map_err(|e| Error::Combination {
            combination: feature_label(features),
            source: Box::new(e),
        })
    });
    let mut runs = runs.into_iter();
    let mut results = Vec::with_capacity(spec.combinations.len());
    for features in &spec.combinations {
        let mut folds = Vec::new();
        for _ in 0..spec.repetitions {
            folds.extend(runs.next().expect("one run per job")?);
        }
        results.push(CombinationResult {
            features: features.clone(),
            folds,
        });
    }
    // stable: ties keep spec order; undefined means go last
    results.sort_by(|a, b| match (a.mean_recall(), b.mean_recall()) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(ExperimentReport {
        spec: spec.clone(),
        project: data.project().to_string(),
        n_rows: data.len(),
        n_defect: data.defect_count(),
        results,
    })
}

/// Loads the spec's datasets with the default schema and runs the grid.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    if spec.datasets.is_empty() {
        return Err(Error::Spec("at least one dataset is required".into()));
    }
    let data = spec.load_data(&ColumnSchema::default())?;
    run_on(&data, spec)
}
