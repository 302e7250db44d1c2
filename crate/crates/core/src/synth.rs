//! Synthetic Kamei-schema datasets with a controllable class signal.
//!
//! Each continuous metric is drawn as `offset + exp(mu + sigma * (z + shift))`
//! with `z ~ N(0, 1)`. For signal features the defective class gets
//! `shift = separation`, i.e. its log-scale mean moves up by `separation`
//! standard deviations; every other feature is identically distributed across
//! classes. Log-designated columns use `offset = 1`, so they are always >= 1
//! and survive a strict natural log. `fix` is Bernoulli, with the log-odds
//! shifted by `separation` when it is a signal feature.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{ChangeRecord, Dataset, Metric};
use crate::error::{Error, Result};
use crate::preprocess::TransformPlan;
use crate::rng::{seeded, Stream};

const SIGMA: f64 = 0.5;
const FIX_BASE_RATE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub defect_fraction: f64,
    pub signal_features: Vec<Metric>,
    pub separation: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_rows: 1000,
            defect_fraction: 0.5,
            signal_features: vec![Metric::Lt, Metric::Age],
            separation: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.defect_fraction > 0.0 && self.defect_fraction < 1.0) {
            return Err(Error::Spec(format!(
                "defect_fraction must be in (0, 1), got {}",
                self.defect_fraction
            )));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::Spec(format!("separation must be finite and >= 0, got {}", self.separation)));
        }
        if self.n_rows == 0 {
            return Err(Error::Spec("n_rows must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of defective rows: `round(n_rows * defect_fraction)`.
    pub fn n_defect(&self) -> usize {
        (self.n_rows as f64 * self.defect_fraction).round() as usize
    }
}

/// Log-scale location of each metric's base distribution.
fn location(m: Metric) -> f64 {
    match m {
        Metric::Ns => 0.0,
        Metric::Nd => 0.3,
        Metric::Nf => 0.7,
        Metric::Entropy => -1.0,
        Metric::La => -1.5,
        Metric::Ld => -2.0,
        Metric::Lt => 5.0,
        Metric::Fix => 0.0,
        Metric::Ndev => 1.5,
        Metric::Age => 3.0,
        Metric::Nuc => 1.0,
        Metric::Exp => 4.5,
        Metric::Rexp => 2.0,
        Metric::Sexp => 3.5,
    }
}

pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let log_columns = TransformPlan::default().log_columns;
    let mut rng = seeded(spec.seed, Stream::Synth);
    let n_defect = spec.n_defect();

    let mut labels: Vec<bool> = (0..spec.n_rows).map(|i| i < n_defect).collect();
    labels.shuffle(&mut rng);

    let fix_logit = (FIX_BASE_RATE / (1.0 - FIX_BASE_RATE)).ln();
    let records = labels
        .into_iter()
        .map(|label| {
            let mut values = [0.0; Metric::COUNT];
            for m in Metric::ALL {
                let shift = if label && spec.signal_features.contains(&m) {
                    spec.separation
                } else {
                    0.0
                };
                values[m.index()] = if m == Metric::Fix {
                    let p = 1.0 / (1.0 + (-(fix_logit + shift)).exp());
                    f64::from(u8::from(rng.gen::<f64>() < p))
                } else {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let offset = if log_columns.contains(&m) { 1.0 } else { 0.0 };
                    offset + (location(m) + SIGMA * (z + shift)).exp()
                };
            }
            ChangeRecord::new(values, label)
        })
        .collect();
    Dataset::new(format!("synth-{}", spec.seed), records)
}
