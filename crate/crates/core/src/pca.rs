//! Principal component analysis over selected change metrics.
//!
//! The covariance matrix is at most 14x14, so it is decomposed directly with
//! the cyclic Jacobi method in [`crate::jacobi`]. Components follow a fixed
//! sign convention (largest-magnitude loading positive), so refitting the
//! same data yields bit-identical models.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Metric};
use crate::error::{Error, Result};
use crate::jacobi::symmetric_eigen;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub features: Vec<Metric>,
    pub means: Vec<f64>,
    /// Per-feature standard deviations when fitted with `standardize`.
    /// Zero-variance columns keep a scale of 1.
    pub scales: Option<Vec<f64>>,
    /// Retained components, one unit vector per row, by descending variance.
    pub components: Vec<Vec<f64>>,
    /// Full covariance spectrum, descending (length = feature count).
    pub eigenvalues: Vec<f64>,
    /// `eigenvalue / total variance` for the full spectrum.
    pub explained_variance_ratio: Vec<f64>,
}

/// Rows mapped into component space.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub points: Matrix,
    pub labels: Vec<bool>,
}

pub fn fit_pca(d: &Dataset, features: &[Metric], n_components: usize, standardize: bool) -> Result<PcaModel> {
    let x = d
        .select_features(features)
        .map_err(|e| Error::Dim(e.to_string()))?
        .feature_matrix();
    let (n, p) = (x.nrows(), x.ncols());
    if n < 2 {
        return Err(Error::Degenerate(format!("PCA needs at least 2 rows, got {n}")));
    }
    if p == 0 || n_components == 0 || n_components > p || p > n {
        return Err(Error::Dim(format!(
            "need 1 <= components ({n_components}) <= features ({p}) <= rows ({n})"
        )));
    }

    let means: Vec<f64> = (0..p).map(|j| x.column(j).iter().sum::<f64>() / n as f64).collect();
    let mut centered = Matrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            centered.set(i, j, x.get(i, j) - means[j]);
        }
    }

    let scales = standardize.then(|| {
        (0..p)
            .map(|j| {
                let ss: f64 = (0..n).map(|i| centered.get(i, j).powi(2)).sum();
                let sd = (ss / (n - 1) as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect::<Vec<f64>>()
    });
    if let Some(s) = &scales {
        for i in 0..n {
            for j in 0..p {
                centered.set(i, j, centered.get(i, j) / s[j]);
            }
        }
    }

    let mut cov = Matrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let s: f64 = (0..n).map(|i| centered.get(i, a) * centered.get(i, b)).sum::<f64>() / (n - 1) as f64;
            cov.set(a, b, s);
            cov.set(b, a, s);
        }
    }

    let eig = symmetric_eigen(&cov);
    let total: f64 = eig.values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("all selected features are constant".into()));
    }
    let components = eig
        .vectors
        .into_iter()
        .take(n_components)
        .map(orient)
        .collect();
    Ok(PcaModel {
        features: features.to_vec(),
        means,
        scales,
        components,
        explained_variance_ratio: eig.values.iter().map(|v| v / total).collect(),
        eigenvalues: eig.values,
    })
}

/// Flips a vector so its largest-magnitude coordinate (first on ties) is positive.
fn orient(mut v: Vec<f64>) -> Vec<f64> {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    fn standardized_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, x)| {
                let c = x - self.means[j];
                match &self.scales {
                    Some(s) => c / s[j],
                    None => c,
                }
            })
            .collect()
    }

    /// Maps component coordinates back to feature space.
    pub fn reconstruct(&self, projection: &Projection) -> Matrix {
        let p = self.features.len();
        let mut out = Matrix::zeros(projection.points.nrows(), p);
        for (i, coords) in projection.points.rows().enumerate() {
            for j in 0..p {
                let mut x: f64 = coords.iter().zip(&self.components).map(|(c, comp)| c * comp[j]).sum();
                if let Some(s) = &self.scales {
                    x *= s[j];
                }
                out.set(i, j, x + self.means[j]);
            }
        }
        out
    }

    /// Features of component `k` ordered by absolute loading, largest first.
    pub fn loading_ranking(&self, k: usize) -> Vec<(Metric, f64)> {
        let mut ranked: Vec<(Metric, f64)> = self
            .features
            .iter()
            .copied()
            .zip(self.components[k].iter().copied())
            .collect();
        ranked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
        ranked
    }

    /// JSON dump of the model plus per-component loading rankings.
    pub fn dump(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            #[serde(flatten)]
            model: &'a PcaModel,
            loading_ranking: Vec<Vec<(Metric, f64)>>,
        }
        let dump = Dump {
            model: self,
            loading_ranking: (0..self.n_components()).map(|k| self.loading_ranking(k)).collect(),
        };
        serde_json::to_string_pretty(&dump).expect("PCA model serializes")
    }
}

pub fn project(model: &PcaModel, d: &Dataset) -> Result<Projection> {
    let x = d
        .select_features(&model.features)
        .map_err(|_| {
            Error::FeatureMismatch(format!(
                "model uses [{}] but dataset has [{}]",
                crate::dataset::feature_label(&model.features),
                crate::dataset::feature_label(d.features())
            ))
        })?
        .feature_matrix();
    let k = model.n_components();
    let mut points = Matrix::zeros(x.nrows(), k);
    for (i, row) in x.rows().enumerate() {
        let z = model.standardized_row(row);
        for (c, comp) in model.components.iter().enumerate() {
            points.set(i, c, z.iter().zip(comp).map(|(a, b)| a * b).sum());
        }
    }
    Ok(Projection {
        points,
        labels: d.labels(),
    })
}

/// Writes `pc1[,pc2],label` rows for an external plotter.
pub fn export_scatter(p: &Projection, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_scatter(p, file).map_err(|e| Error::io(path, e))
}

pub fn write_scatter<W: Write>(p: &Projection, writer: W) -> std::io::Result<()> {
    let k = p.points.ncols().min(2);
    if k == 0 {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidInput, "projection has no components"));
    }
    let mut w = std::io::BufWriter::new(writer);
    let header = if k == 2 { "pc1,pc2,label" } else { "pc1,label" };
    writeln!(w, "{header}")?;
    for (row, &label) in p.points.rows().zip(&p.labels) {
        for x in &row[..k] {
            write!(w, "{x},")?;
        }
        writeln!(w, "{}", u8::from(label))?;
    }
    w.flush()
}
