//! Node-by-time panels of temperature deviations (or inputs) and their CSV form.
//!
//! CSV layout: a header row with one label per node, then one row per time
//! step. Values are written in shortest round-trip scientific notation so an
//! export followed by an import reproduces every bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    labels: Vec<String>,
    dt: f64,
    series: Vec<Vec<f64>>,
}

impl TimeSeriesPanel {
    /// `series[i]` is the time series of node `i`.
    pub fn new(labels: Vec<String>, dt: f64, series: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != series.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} series",
                labels.len(),
                series.len()
            )));
        }
        if series.is_empty() {
            return Err(Error::DimensionMismatch("panel has no nodes".into()));
        }
        let n = series[0].len();
        if n == 0 {
            return Err(Error::DimensionMismatch("panel has no samples".into()));
        }
        if let Some(i) = series.iter().position(|s| s.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "series {} has {} samples, expected {n}",
                i + 1,
                series[i].len()
            )));
        }
        if let Some(i) = series.iter().position(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "series {} contains non-finite values",
                i + 1
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("sampling interval {dt} is not positive")));
        }
        Ok(Self { labels, dt, series })
    }

    /// Labels `1..=m`.
    pub fn numbered(dt: f64, series: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (1..=series.len()).map(|i| i.to_string()).collect();
        Self::new(labels, dt, series)
    }

    pub fn node_count(&self) -> usize {
        self.series.len()
    }

    pub fn len(&self) -> usize {
        self.series[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn series(&self, node: usize) -> &[f64] {
        &self.series[node]
    }

    pub fn all_series(&self) -> &[Vec<f64>] {
        &self.series
    }

    pub fn value(&self, node: usize, k: usize) -> f64 {
        self.series[node][k]
    }

    pub fn mean(&self, node: usize) -> f64 {
        let s = &self.series[node];
        s.iter().sum::<f64>() / s.len() as f64
    }

    /// Population variance (divides by N).
    pub fn variance(&self, node: usize) -> f64 {
        let mu = self.mean(node);
        let s = &self.series[node];
        s.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / s.len() as f64
    }

    /// Copy with every series shifted to zero sample mean.
    pub fn centered(&self) -> Self {
        let series = (0..self.node_count())
            .map(|i| {
                let mu = self.mean(i);
                self.series[i].iter().map(|v| v - mu).collect()
            })
            .collect();
        Self {
            labels: self.labels.clone(),
            dt: self.dt,
            series,
        }
    }

    /// Relabels nodes so that node `v` becomes node `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let m = self.node_count();
        let mut labels = vec![String::new(); m];
        let mut series = vec![Vec::new(); m];
        for v in 0..m {
            labels[perm[v]] = self.labels[v].clone();
            series[perm[v]] = self.series[v].clone();
        }
        Self {
            labels,
            dt: self.dt,
            series,
        }
    }

    /// Keeps samples `start..` of every series.
    pub fn skip(&self, start: usize) -> Result<Self> {
        if start >= self.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot drop {start} of {} samples",
                self.len()
            )));
        }
        Ok(Self {
            labels: self.labels.clone(),
            dt: self.dt,
            series: self.series.iter().map(|s| s[start..].to_vec()).collect(),
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        writer.write_record(&self.labels).map_err(io)?;
        let mut row = Vec::with_capacity(self.node_count());
        for k in 0..self.len() {
            row.clear();
            row.extend(self.series.iter().map(|s| format!("{:e}", s[k])));
            writer.write_record(&row).map_err(io)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Reads the CSV layout written by [`write_csv`](Self::write_csv).
    /// `origin` names the source in diagnostics.
    pub fn read_csv<R: Read>(input: R, dt: f64, origin: &Path) -> Result<Self> {
        let malformed = |detail: String| Error::MalformedFile {
            path: origin.to_path_buf(),
            detail,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let labels: Vec<String> = reader
            .headers()
            .map_err(|e| malformed(format!("cannot read header row: {e}")))?
            .iter()
            .map(str::to_owned)
            .collect();
        if labels.is_empty() || labels.iter().all(String::is_empty) {
            return Err(malformed("header row has no node labels".into()));
        }
        let m = labels.len();
        let mut series = vec![Vec::new(); m];
        for record in reader.records() {
            let record = record.map_err(|e| malformed(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != m {
                return Err(malformed(format!(
                    "row {line}: expected {m} fields, found {}",
                    record.len()
                )));
            }
            for (col, cell) in record.iter().enumerate() {
                let value: f64 = cell.parse().map_err(|_| {
                    malformed(format!(
                        "row {line}, column {} ('{}'): cannot parse '{cell}' as a number",
                        col + 1,
                        labels[col]
                    ))
                })?;
                if !value.is_finite() {
                    return Err(malformed(format!(
                        "row {line}, column {} ('{}'): value '{cell}' is not finite",
                        col + 1,
                        labels[col]
                    )));
                }
                series[col].push(value);
            }
        }
        if series[0].is_empty() {
            return Err(malformed("no data rows".into()));
        }
        Self::new(labels, dt, series)
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn import_csv(path: &Path, dt: f64) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::MalformedFile {
            path: path.to_path_buf(),
            detail: format!("cannot open panel: {e}"),
        })?;
        Self::read_csv(std::io::BufReader::new(file), dt, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> TimeSeriesPanel {
        TimeSeriesPanel::new(
            vec!["a".into(), "b".into()],
            1.0,
            vec![vec![1.0, 2.0, 3.0], vec![0.1, -0.2, 1e-300]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_ragged_and_non_finite() {
        assert!(TimeSeriesPanel::numbered(1.0, vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(TimeSeriesPanel::numbered(1.0, vec![vec![f64::NAN]]).is_err());
        assert!(TimeSeriesPanel::numbered(1.0, vec![vec![]]).is_err());
    }

    #[test]
    fn centered_has_zero_mean() {
        let c = small().centered();
        assert!(c.mean(0).abs() < 1e-15);
        assert_eq!(c.series(0), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        small().export_csv(&path).unwrap();
        let back = TimeSeriesPanel::import_csv(&path, 1.0).unwrap();
        assert_eq!(back, small());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("a,b\n"));
    }

    #[test]
    fn ragged_row_names_the_row() {
        let text = "x,y\n1,2\n3\n";
        let err = TimeSeriesPanel::read_csv(text.as_bytes(), 1.0, Path::new("p.csv")).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::MalformedFile { .. }));
        assert!(msg.contains("row 3") && msg.contains("expected 2 fields, found 1"), "{msg}");
    }

    #[test]
    fn non_numeric_cell_names_the_cell() {
        let text = "x,y\n1,2\n3,abc\n";
        let err = TimeSeriesPanel::read_csv(text.as_bytes(), 1.0, Path::new("p.csv")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3, column 2 ('y')") && msg.contains("'abc'"), "{msg}");
    }

    #[test]
    fn empty_body_is_malformed() {
        let err = TimeSeriesPanel::read_csv("x,y\n".as_bytes(), 1.0, Path::new("p.csv")).unwrap_err();
        assert!(err.to_string().contains("no data rows"));
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 3), 1..40),
            scale in -300i32..300,
        ) {
            let factor = 10f64.powi(scale / 10);
            let series = (0..3).map(|i| rows.iter().map(|r| r[i] * factor).collect()).collect();
            let panel = TimeSeriesPanel::numbered(1.0, series).unwrap();
            let mut buf = Vec::new();
            panel.write_csv(&mut buf).unwrap();
            let back = TimeSeriesPanel::read_csv(buf.as_slice(), 1.0, Path::new("mem")).unwrap();
            prop_assert_eq!(back, panel);
        }
    }
}
