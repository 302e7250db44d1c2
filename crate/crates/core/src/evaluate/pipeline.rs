use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Metric};
use crate::error::{Error, Result};
use crate::mlp::{self, MlpModel, TrainConfig};
use crate::preprocess::{apply_minmax, fit_minmax, log_transform, undersample, NormalizationParams, TransformPlan};

/// A trained classifier together with the preprocessing it was fitted with,
/// so new changes can be scored exactly like the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub features: Vec<Metric>,
    pub transform: TransformPlan,
    pub normalization: Option<NormalizationParams>,
    pub threshold: f64,
    pub train: TrainConfig,
    pub loss_trace: Vec<f64>,
    pub model: MlpModel,
}

impl TrainedPipeline {
    /// Undersample, select, log-transform, fit min-max, then train.
    /// `train.seed` drives undersampling, initialization, shuffling and dropout.
    pub fn fit(
        data: &Dataset,
        features: &[Metric],
        transform: &TransformPlan,
        train: &TrainConfig,
        threshold: f64,
    ) -> Result<Self> {
        train.validate()?;
        let balanced = undersample(data, train.seed)?;
        let plan = transform.restricted_to(features);
        let selected = log_transform(&balanced.select_features(features)?, &plan)?;
        let (prepared, normalization) = if plan.normalize {
            let params = fit_minmax(&selected, features)?;
            (apply_minmax(&selected, &params)?, Some(params))
        } else {
            (selected, None)
        };
        let init = MlpModel::init(features.len(), train.seed)?;
        let (model, loss_trace) = mlp::train(&init, &prepared, train)?;
        Ok(Self {
            features: features.to_vec(),
            transform: plan,
            normalization,
            threshold,
            train: train.clone(),
            loss_trace,
            model,
        })
    }

    /// Applies the fitted preprocessing to `d`. No resampling.
    pub fn prepare(&self, d: &Dataset) -> Result<Dataset> {
        let selected = log_transform(&d.select_features(&self.features)?, &self.transform)?;
        match &self.normalization {
            Some(p) => apply_minmax(&selected, p),
            None => Ok(selected),
        }
    }

    pub fn score(&self, d: &Dataset) -> Result<Vec<f64>> {
        self.model.forward(&self.prepare(d)?.feature_matrix(), None)
    }

    pub fn predict(&self, d: &Dataset) -> Result<(Vec<bool>, Vec<f64>)> {
        mlp::predict_labels(&self.model, &self.prepare(d)?, self.threshold)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pipeline serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: TrainedPipeline =
            serde_json::from_str(&text).map_err(|e| Error::Spec(format!("bad model file {}: {e}", path.display())))?;
        // re-validate the network shape
        let model = MlpModel::from_json(&p.model.to_json())?;
        if model.input_dim() != p.features.len() {
            return Err(Error::Dim("model input width does not match its feature list".into()));
        }
        Ok(p)
    }
}
