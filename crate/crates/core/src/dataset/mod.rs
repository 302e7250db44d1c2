//! Kamei-schema change datasets: ingestion, emission, summaries and audits.

mod audit;
mod schema;

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Arc, OnceLock};

pub use audit::{audit_dataset, AuditReport};
pub use schema::{feature_label, Column, ColumnSchema, Metric, LABEL};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One code change: the fourteen metrics plus its defect label.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeRecord {
    values: [f64; Metric::COUNT],
    label: bool,
    meta: Vec<String>,
    source: Arc<str>,
}

impl ChangeRecord {
    pub fn new(values: [f64; Metric::COUNT], label: bool) -> Self {
        Self {
            values,
            label,
            meta: Vec::new(),
            source: Arc::from(""),
        }
    }

    pub fn get(&self, metric: Metric) -> f64 {
        self.values[metric.index()]
    }

    pub fn set(&mut self, metric: Metric, value: f64) {
        self.values[metric.index()] = value;
    }

    pub fn values(&self) -> &[f64; Metric::COUNT] {
        &self.values
    }

    pub fn label(&self) -> bool {
        self.label
    }

    /// Opaque non-metric cells (ids, dates) in the order of
    /// [`Dataset::meta_columns`].
    pub fn meta(&self) -> &[String] {
        &self.meta
    }

    /// Project this row came from.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub(crate) fn with_source(mut self, source: Arc<str>) -> Self {
        self.source = source;
        self
    }

    /// Effort proxy used for inspection ranking: stored `la + ld`.
    pub fn churn(&self) -> f64 {
        self.get(Metric::La) + self.get(Metric::Ld)
    }

    /// `lt = 0` with non-zero churn: `la`/`ld` hold raw line counts.
    pub fn is_raw_churn(&self) -> bool {
        self.get(Metric::Lt) == 0.0 && (self.get(Metric::La) > 0.0 || self.get(Metric::Ld) > 0.0)
    }

    fn check(&self, row: usize) -> Result<()> {
        for m in Metric::ALL {
            let v = self.get(m);
            let reason = if !v.is_finite() {
                "value must be finite"
            } else if matches!(
                m,
                Metric::Ns | Metric::Nd | Metric::Nf | Metric::Ndev | Metric::Entropy | Metric::Age
            ) && v < 0.0
            {
                "value must be non-negative"
            } else if m == Metric::Fix && v != 0.0 && v != 1.0 {
                "fix must be 0 or 1"
            } else {
                continue;
            };
            return Err(Error::Parse {
                row,
                column: m.name().to_string(),
                value: v.to_string(),
                reason: reason.to_string(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

/// An ordered set of change records with an active feature set.
///
/// Every record carries all fourteen metrics; `features` names the ones that
/// feature math (training, PCA, normalization) looks at.
#[derive(Debug, Clone)]
pub struct Dataset {
    project: String,
    features: Vec<Metric>,
    records: Vec<ChangeRecord>,
    meta_columns: Vec<String>,
    ranges: OnceLock<Vec<ColumnRange>>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.project == other.project
            && self.features == other.features
            && self.records == other.records
            && self.meta_columns == other.meta_columns
    }
}

impl Dataset {
    /// Builds a dataset over all fourteen metrics, validating every record.
    pub fn new(project: impl Into<String>, records: Vec<ChangeRecord>) -> Result<Self> {
        let project = project.into();
        let source: Arc<str> = Arc::from(project.as_str());
        let mut out = Vec::with_capacity(records.len());
        for (i, r) in records.into_iter().enumerate() {
            r.check(i + 1)?;
            if !r.meta.is_empty() {
                return Err(Error::Schema("records built in memory carry no metadata".into()));
            }
            out.push(if r.source.is_empty() { r.with_source(source.clone()) } else { r });
        }
        Ok(Self::from_parts(project, Metric::ALL.to_vec(), out, Vec::new()))
    }

    pub(crate) fn from_parts(
        project: String,
        features: Vec<Metric>,
        records: Vec<ChangeRecord>,
        meta_columns: Vec<String>,
    ) -> Self {
        Self {
            project,
            features,
            records,
            meta_columns,
            ranges: OnceLock::new(),
        }
    }

    /// Same project, features and metadata layout, different rows.
    pub(crate) fn with_records(&self, records: Vec<ChangeRecord>) -> Self {
        Self::from_parts(
            self.project.clone(),
            self.features.clone(),
            records,
            self.meta_columns.clone(),
        )
    }

    pub fn project(&self) -> &str {
        &self.project
    }

    pub fn features(&self) -> &[Metric] {
        &self.features
    }

    pub fn records(&self) -> &[ChangeRecord] {
        &self.records
    }

    pub fn meta_columns(&self) -> &[String] {
        &self.meta_columns
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn defect_count(&self) -> usize {
        self.records.iter().filter(|r| r.label).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let d = self.defect_count();
        d > 0 && d < self.len()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn column(&self, metric: Metric) -> Vec<f64> {
        self.records.iter().map(|r| r.get(metric)).collect()
    }

    /// Min/max of a metric over all rows, computed once per dataset.
    /// `None` when the dataset is empty.
    pub fn range(&self, metric: Metric) -> Option<ColumnRange> {
        if self.records.is_empty() {
            return None;
        }
        let ranges = self.ranges.get_or_init(|| {
            Metric::ALL
                .iter()
                .map(|&m| {
                    self.records.iter().fold(
                        ColumnRange {
                            min: f64::INFINITY,
                            max: f64::NEG_INFINITY,
                        },
                        |acc, r| ColumnRange {
                            min: acc.min.min(r.get(m)),
                            max: acc.max.max(r.get(m)),
                        },
                    )
                })
                .collect()
        });
        Some(ranges[metric.index()])
    }

    /// Active feature columns as an `n x features` matrix.
    pub fn feature_matrix(&self) -> Matrix {
        let p = self.features.len();
        let mut data = Vec::with_capacity(self.len() * p);
        for r in &self.records {
            data.extend(self.features.iter().map(|&m| r.get(m)));
        }
        Matrix::from_row_major(self.len(), p, data)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        self.with_records(indices.iter().map(|&i| self.records[i].clone()).collect())
    }

    /// Restricts the active feature set. Row order is unchanged.
    pub fn select_features(&self, features: &[Metric]) -> Result<Dataset> {
        let mut chosen = Vec::with_capacity(features.len());
        for &m in features {
            if !self.features.contains(&m) {
                return Err(Error::UnknownFeature(m.name().to_string()));
            }
            if !chosen.contains(&m) {
                chosen.push(m);
            }
        }
        Ok(Self::from_parts(
            self.project.clone(),
            chosen,
            self.records.clone(),
            self.meta_columns.clone(),
        ))
    }

    /// Like [`select_features`](Self::select_features) but takes names or
    /// aliases, e.g. `["LT", "PD"]`.
    pub fn select_named<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset> {
        let metrics = names
            .iter()
            .map(|n| Metric::parse(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        self.select_features(&metrics)
    }

    /// Maps every record through `f`, keeping layout.
    pub(crate) fn map_records(&self, mut f: impl FnMut(usize, &mut ChangeRecord)) -> Dataset {
        let mut records = self.records.clone();
        for (i, r) in records.iter_mut().enumerate() {
            f(i, r);
        }
        self.with_records(records)
    }

    /// Concatenates datasets. Metadata is kept only when every part shares
    /// the same metadata columns.
    pub(crate) fn concat(project: String, parts: Vec<Dataset>) -> Dataset {
        let features = parts
            .first()
            .map(|d| d.features.clone())
            .unwrap_or_else(|| Metric::ALL.to_vec());
        let meta = parts.first().map(|d| d.meta_columns.clone()).unwrap_or_default();
        let same_meta = parts.iter().all(|d| d.meta_columns == meta);
        let mut records: Vec<ChangeRecord> = parts.into_iter().flat_map(|d| d.records).collect();
        if !same_meta {
            records.iter_mut().for_each(|r| r.meta.clear());
        }
        Self::from_parts(project, features, records, if same_meta { meta } else { Vec::new() })
    }

    /// Loads a CSV file. The project tag defaults to the file stem.
    pub fn load(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<Dataset> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let project = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_reader(file, project, schema)
    }

    pub fn from_reader<R: Read>(reader: R, project: impl Into<String>, schema: &ColumnSchema) -> Result<Dataset> {
        let project = project.into();
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
            return Err(Error::Schema("missing header row".into()));
        }

        let mut metric_pos: [Option<usize>; Metric::COUNT] = [None; Metric::COUNT];
        let mut label_pos = None;
        let mut meta_pos = Vec::new();
        let mut meta_columns = Vec::new();
        for (i, h) in headers.iter().enumerate() {
            let slot = match schema.resolve(h) {
                Some(Column::Metric(m)) => &mut metric_pos[m.index()],
                Some(Column::Label) => &mut label_pos,
                None => {
                    meta_pos.push(i);
                    meta_columns.push(h.trim().to_string());
                    continue;
                }
            };
            if slot.is_some() {
                return Err(Error::Schema(format!("duplicate column for '{}'", h.trim())));
            }
            *slot = Some(i);
        }
        for m in Metric::ALL {
            if metric_pos[m.index()].is_none() {
                return Err(Error::Schema(format!(
                    "missing required column '{}'",
                    schema.describe(Column::Metric(m))
                )));
            }
        }
        let label_pos = label_pos.ok_or_else(|| {
            Error::Schema(format!(
                "missing required column '{}'",
                schema.describe(Column::Label)
            ))
        })?;

        let source: Arc<str> = Arc::from(project.as_str());
        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row_no = i + 1;
            let row = row?;
            let mut values = [0.0; Metric::COUNT];
            for m in Metric::ALL {
                let cell = &row[metric_pos[m.index()].unwrap()];
                values[m.index()] = if m == Metric::Fix {
                    match parse_binary(cell) {
                        Some(b) => f64::from(u8::from(b)),
                        None => {
                            return Err(Error::Parse {
                                row: row_no,
                                column: m.name().into(),
                                value: cell.into(),
                                reason: "fix must be 0, 1, true or false".into(),
                            })
                        }
                    }
                } else {
                    parse_number(cell).ok_or_else(|| Error::Parse {
                        row: row_no,
                        column: m.name().into(),
                        value: cell.into(),
                        reason: "not a finite number".into(),
                    })?
                };
            }
            let label_cell = &row[label_pos];
            let label = parse_binary(label_cell).ok_or_else(|| Error::Label {
                row: row_no,
                value: label_cell.into(),
            })?;
            let record = ChangeRecord {
                values,
                label,
                meta: meta_pos.iter().map(|&p| row[p].to_string()).collect(),
                source: source.clone(),
            };
            record.check(row_no)?;
            records.push(record);
        }
        Ok(Self::from_parts(project, Metric::ALL.to_vec(), records, meta_columns))
    }

    /// Writes the canonical CSV: fourteen metrics, `label`, then metadata.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_writer(file)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header = Metric::ALL
            .iter()
            .map(|m| m.name())
            .chain(std::iter::once(LABEL))
            .chain(self.meta_columns.iter().map(String::as_str));
        w.write_record(header)?;
        for r in &self.records {
            let cells = r
                .values
                .iter()
                .map(|v| v.to_string())
                .chain(std::iter::once(if r.label { "1" } else { "0" }.to_string()))
                .chain(r.meta.iter().cloned());
            w.write_record(cells)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_binary(cell: &str) -> Option<bool> {
    let c = cell.trim();
    if c == "1" || c.eq_ignore_ascii_case("true") {
        Some(true)
    } else if c == "0" || c.eq_ignore_ascii_case("false") {
        Some(false)
    } else {
        None
    }
}

/// Per-column statistics in a [`DatasetSummary`].
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub metric: Metric,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub project: String,
    pub n_changes: usize,
    pub n_defect: usize,
    /// `None` for an empty dataset.
    pub pct_defect: Option<f64>,
    pub columns: Vec<ColumnStats>,
}

pub fn summarize(d: &Dataset) -> DatasetSummary {
    let n = d.len();
    let n_defect = d.defect_count();
    let columns = if n == 0 {
        Vec::new()
    } else {
        Metric::ALL
            .iter()
            .map(|&m| {
                let range = d.range(m).expect("non-empty");
                let mean = d.records.iter().map(|r| r.get(m)).sum::<f64>() / n as f64;
                ColumnStats {
                    metric: m,
                    min: range.min,
                    max: range.max,
                    mean,
                }
            })
            .collect()
    };
    DatasetSummary {
        project: d.project.clone(),
        n_changes: n,
        n_defect,
        pct_defect: (n > 0).then(|| n_defect as f64 / n as f64),
        columns,
    }
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "project: {}", self.project)?;
        writeln!(f, "changes: {}", self.n_changes)?;
        match self.pct_defect {
            Some(p) => writeln!(f, "defect-inducing: {} ({:.2}%)", self.n_defect, p * 100.0)?,
            None => writeln!(f, "defect-inducing: undefined (empty dataset)")?,
        }
        if !self.columns.is_empty() {
            writeln!(f, "{:<8} {:>14} {:>14} {:>14}", "column", "min", "max", "mean")?;
            for c in &self.columns {
                writeln!(f, "{:<8} {:>14.4} {:>14.4} {:>14.4}", c.metric.name(), c.min, c.max, c.mean)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KAMEI_HEADER: &str =
        "transactionid,commitdate,ns,nm,nf,entrophy,la,ld,lt,fix,ndev,pd,npt,exp,rexp,sexp,bug";

    fn kamei_csv(rows: &[&str]) -> String {
        let mut s = String::from(KAMEI_HEADER);
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s.push('\n');
        s
    }

    fn load_str(s: &str) -> Result<Dataset> {
        Dataset::from_reader(s.as_bytes(), "t", &ColumnSchema::kamei())
    }

    #[test]
    fn aliases_canonicalize_and_order_is_kept() {
        let csv = kamei_csv(&[
            "a1,2006/01/01,1,2,3,0.5,0.1,0.2,100,TRUE,4,12.5,3,40,2.5,7,1",
            "a2,2006/01/02,1,1,1,0,0,0,0,FALSE,1,0,1,0,0,0,0",
            "a3,2006/01/03,2,2,2,1,12,3,0,0,2,3,2,5,1,1,false",
        ]);
        let d = load_str(&csv).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.meta_columns(), ["transactionid", "commitdate"]);
        let r0 = &d.records()[0];
        assert_eq!(r0.get(Metric::Nd), 2.0);
        assert_eq!(r0.get(Metric::Age), 12.5);
        assert_eq!(r0.get(Metric::Nuc), 3.0);
        assert_eq!(r0.get(Metric::Entropy), 0.5);
        assert_eq!(r0.get(Metric::Fix), 1.0);
        assert!(r0.label());
        let ids: Vec<_> = d.records().iter().map(|r| r.meta()[0].clone()).collect();
        assert_eq!(ids, ["a1", "a2", "a3"]);
        assert_eq!(d.records()[2].source(), "t");
    }

    #[test]
    fn missing_label_names_the_column() {
        let csv = "ns,nm,nf,entrophy,la,ld,lt,fix,ndev,pd,npt,exp,rexp,sexp\n1,1,1,0,0,0,0,0,1,0,1,0,0,0\n";
        let err = load_str(csv).unwrap_err();
        assert_eq!(err.code(), "E_SCHEMA");
        assert!(err.to_string().contains("bug/label"), "{err}");
    }

    #[test]
    fn parse_and_label_errors_point_at_the_cell() {
        let err = load_str(&kamei_csv(&["x,y,1,1,1,zero,0,0,0,0,1,0,1,0,0,0,0"])).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "entropy");
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = load_str(&kamei_csv(&["x,y,1,1,1,0,0,0,0,0,1,0,1,0,0,0,yes"])).unwrap_err();
        assert_eq!(err.code(), "E_LABEL");
        let err = load_str(&kamei_csv(&["x,y,1,1,1,0,0,0,0,0,1,0,1,0,0,0,2"])).unwrap_err();
        assert_eq!(err.code(), "E_LABEL");
        let err = load_str(&kamei_csv(&["x,y,1,1,1,0,0,0,0,0,1,NaN,1,0,0,0,1"])).unwrap_err();
        assert_eq!(err.code(), "E_PARSE");
        let err = load_str(&kamei_csv(&["x,y,-1,1,1,0,0,0,0,0,1,0,1,0,0,0,1"])).unwrap_err();
        assert_eq!(err.code(), "E_PARSE");
    }

    #[test]
    fn duplicate_canonical_columns_are_rejected() {
        let csv = "ns,nd,nm,nf,entropy,la,ld,lt,fix,ndev,age,nuc,exp,rexp,sexp,label\n";
        assert_eq!(load_str(csv).unwrap_err().code(), "E_SCHEMA");
    }

    #[test]
    fn emission_uses_canonical_order() {
        let d = load_str(&kamei_csv(&["a1,d,1,2,3,0.5,0.1,0.2,100,1,4,12.5,3,40,2.5,7,1"])).unwrap();
        let mut out = Vec::new();
        d.to_writer(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "ns,nd,nf,entropy,la,ld,lt,fix,ndev,age,nuc,exp,rexp,sexp,label,transactionid,commitdate\n\
             1,2,3,0.5,0.1,0.2,100,1,4,12.5,3,40,2.5,7,1,a1,d\n"
        );
    }

    #[test]
    fn summary_counts() {
        let mk = |label| ChangeRecord::new([1.0; 14], label);
        let d = Dataset::new("s", (0..10).map(|i| mk(i % 2 == 0)).collect()).unwrap();
        let s = summarize(&d);
        assert_eq!(s.n_changes, 10);
        assert_eq!(s.pct_defect, Some(0.5));

        let clean = Dataset::new("c", (0..4).map(|_| mk(false)).collect()).unwrap();
        assert_eq!(summarize(&clean).pct_defect, Some(0.0));

        let empty = Dataset::new("e", Vec::new()).unwrap();
        let s = summarize(&empty);
        assert_eq!(s.n_changes, 0);
        assert_eq!(s.pct_defect, None);
        assert!(s.to_string().contains("undefined"));
    }

    #[test]
    fn select_features_keeps_rows_and_label() {
        let d = load_str(&kamei_csv(&[
            "a,b,1,2,3,0.5,0.1,0.2,100,1,4,12.5,3,40,2.5,7,1",
            "c,d,2,2,3,0.5,0.1,0.2,50,0,4,2,3,40,2.5,7,0",
        ]))
        .unwrap();
        let s = d.select_named(&["LT", "PD"]).unwrap();
        assert_eq!(s.features(), [Metric::Lt, Metric::Age]);
        let m = s.feature_matrix();
        assert_eq!((m.nrows(), m.ncols()), (2, 2));
        assert_eq!(m.row(1), [50.0, 2.0]);
        assert_eq!(s.labels(), [true, false]);

        let all = d.select_features(&Metric::ALL).unwrap();
        assert_eq!(all.features(), d.features());

        match d.select_named(&["XYZ"]) {
            Err(Error::UnknownFeature(n)) => assert_eq!(n, "XYZ"),
            other => panic!("unexpected {other:?}"),
        }
        // features outside the active set are unknown too
        assert_eq!(s.select_features(&[Metric::Nd]).unwrap_err().code(), "E_UNKNOWN_FEATURE");
    }

    #[test]
    fn range_is_cached_per_dataset() {
        let mut vals = [1.0; 14];
        let a = ChangeRecord::new(vals, false);
        vals[Metric::Lt.index()] = 9.0;
        let b = ChangeRecord::new(vals, true);
        let d = Dataset::new("r", vec![a, b]).unwrap();
        let r = d.range(Metric::Lt).unwrap();
        assert_eq!((r.min, r.max), (1.0, 9.0));
        assert!(Dataset::new("e", vec![]).unwrap().range(Metric::Lt).is_none());
    }
}
