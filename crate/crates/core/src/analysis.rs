//! Fisher separability of label pairs and the tables built from it.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dataset::{format_sig9, Emotion, LabeledDataset};
use crate::error::{Error, Result};
use crate::features::FeatureGroup;
use crate::stats::{mean_std, StdConvention};

/// Fisher ratio `(mu_a - mu_b)^2 / (sigma_a^2 + sigma_b^2)` with standard
/// deviations under `convention`.
///
/// Zero pooled variance gives `+inf` when the means differ and `0` when they
/// coincide.
pub fn fisher_separability_with(a: &[f64], b: &[f64], convention: StdConvention) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "separability needs at least 2 samples per side, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, sa) = mean_std(a, convention);
    let (mb, sb) = mean_std(b, convention);
    let gap = (ma - mb) * (ma - mb);
    let pooled = sa * sa + sb * sb;
    Ok(if pooled == 0.0 {
        if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        gap / pooled
    })
}

/// Fisher ratio with population standard deviations.
pub fn fisher_separability(a: &[f64], b: &[f64]) -> Result<f64> {
    fisher_separability_with(a, b, StdConvention::Population)
}

/// Per-feature, per-label means and standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelStats {
    pub labels: Vec<Emotion>,
    /// `[feature][label]` pairs of (mean, std).
    pub moments: Vec<Vec<(f64, f64)>>,
}

impl LabelStats {
    pub fn compute(ds: &LabeledDataset, convention: StdConvention) -> Self {
        let labels = ds.labels();
        let moments = (0..ds.n_features())
            .map(|f| {
                labels
                    .iter()
                    .map(|&l| mean_std(&ds.column_for(f, l), convention))
                    .collect()
            })
            .collect();
        Self { labels, moments }
    }
}

/// Best separating feature of one label pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBest {
    pub value: f64,
    pub feature: usize,
    pub group: FeatureGroup,
}

/// Symmetric matrix of maximal Fisher ratios over the labels present.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparabilityMatrix {
    pub labels: Vec<Emotion>,
    /// `cells[i][j]`, `None` on the diagonal.
    pub cells: Vec<Vec<Option<PairBest>>>,
}

impl SeparabilityMatrix {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        self.cells[i][j].as_ref().map(|c| c.value)
    }

    pub fn group(&self, i: usize, j: usize) -> Option<FeatureGroup> {
        self.cells[i][j].as_ref().map(|c| c.group)
    }

    pub fn index_of(&self, label: Emotion) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Builds a value-only matrix (no feature attribution), e.g. from a
    /// parsed report. Groups are set to `Intensity` and features to 0.
    pub fn from_values(labels: Vec<Emotion>, values: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(Error::Schema(format!("expected a {n}x{n} matrix")));
        }
        let cells = values
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(j, v)| match (i == j, v) {
                        (true, _) => Ok(None),
                        (false, Some(value)) => Ok(Some(PairBest {
                            value,
                            feature: 0,
                            group: FeatureGroup::Intensity,
                        })),
                        (false, None) => Err(Error::Schema(format!("missing cell ({i}, {j})"))),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { labels, cells })
    }
}

/// Maximum Fisher ratio over all features for every pair of labels, with the
/// group of the winning feature. Ties go to the earliest feature column.
pub fn pairwise_max_separability(ds: &LabeledDataset) -> Result<SeparabilityMatrix> {
    pairwise_max_separability_with(ds, StdConvention::Population)
}

pub fn pairwise_max_separability_with(
    ds: &LabeledDataset,
    convention: StdConvention,
) -> Result<SeparabilityMatrix> {
    let labels = ds.require_two_per_label()?;
    let n = labels.len();
    let groups = ds.schema().groups();
    // columns[label][feature]
    let columns: Vec<Vec<Vec<f64>>> = labels
        .iter()
        .map(|&l| (0..ds.n_features()).map(|f| ds.column_for(f, l)).collect())
        .collect();

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let bests = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut best: Option<PairBest> = None;
            for f in 0..ds.n_features() {
                let v = fisher_separability_with(&columns[i][f], &columns[j][f], convention)?;
                if best.as_ref().map_or(true, |b| v > b.value) {
                    best = Some(PairBest {
                        value: v,
                        feature: f,
                        group: groups[f],
                    });
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = vec![vec![None; n]; n];
    for (&(i, j), best) in pairs.iter().zip(bests) {
        cells[i][j] = best.clone();
        cells[j][i] = best;
    }
    Ok(SeparabilityMatrix { labels, cells })
}

/// Per-label mean and standard deviation of its off-diagonal row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSummary {
    pub label: Emotion,
    pub average: f64,
    pub std: f64,
}

pub fn label_summary(m: &SeparabilityMatrix, convention: StdConvention) -> Vec<LabelSummary> {
    (0..m.size())
        .map(|i| {
            let row: Vec<f64> = (0..m.size()).filter_map(|j| m.value(i, j)).collect();
            let (average, std) = mean_std(&row, convention);
            LabelSummary {
                label: m.labels[i],
                average,
                std,
            }
        })
        .collect()
}

/// Shortest text that parses back to the same `f64`, so CSV reports
/// round-trip exactly.
fn fmt_value(v: f64) -> String {
    format!("{v}")
}

/// CSV with labels as header row and first column; diagonal rendered as "-".
pub fn matrix_csv(m: &SeparabilityMatrix) -> String {
    render_grid(m, ',', |i, j| m.value(i, j).map(fmt_value))
}

pub fn groups_csv(m: &SeparabilityMatrix) -> String {
    render_grid(m, ',', |i, j| m.group(i, j).map(|g| g.name().to_string()))
}

fn render_grid(
    m: &SeparabilityMatrix,
    sep: char,
    cell: impl Fn(usize, usize) -> Option<String>,
) -> String {
    let mut out = String::from("Label");
    for l in &m.labels {
        out.push(sep);
        out.push_str(l.title());
    }
    out.push('\n');
    for (i, l) in m.labels.iter().enumerate() {
        out.push_str(l.title());
        for j in 0..m.size() {
            out.push(sep);
            out.push_str(&cell(i, j).unwrap_or_else(|| "-".into()));
        }
        out.push('\n');
    }
    out
}

pub fn summary_csv(summary: &[LabelSummary]) -> String {
    let mut out = String::from("Label");
    for s in summary {
        out.push(',');
        out.push_str(s.label.title());
    }
    out.push_str("\nAverage");
    for s in summary {
        out.push(',');
        out.push_str(&fmt_value(s.average));
    }
    out.push_str("\nSTD");
    for s in summary {
        out.push(',');
        out.push_str(&fmt_value(s.std));
    }
    out.push('\n');
    out
}

/// Parses a matrix written by [`matrix_csv`].
pub fn parse_matrix_csv<R: Read>(r: R) -> Result<SeparabilityMatrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = reader.headers()?.clone();
    if header.get(0) != Some("Label") {
        return Err(Error::Schema("first header cell must be \"Label\"".into()));
    }
    let labels = header
        .iter()
        .skip(1)
        .map(str::parse)
        .collect::<Result<Vec<Emotion>>>()?;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != labels.len() + 1 {
            return Err(Error::Schema(format!("row {} has {} cells", i + 1, record.len())));
        }
        let row_label: Emotion = record[0].parse()?;
        if labels.get(i) != Some(&row_label) {
            return Err(Error::Schema(format!("row {} label {row_label} out of order", i + 1)));
        }
        let row = record
            .iter()
            .skip(1)
            .map(|c| match c.trim() {
                "-" => Ok(None),
                s => s
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::Schema(format!("bad cell {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        values.push(row);
    }
    SeparabilityMatrix::from_values(labels, values)
}

/// Plain-text rendering of the three tables.
pub fn text_report(m: &SeparabilityMatrix, summary: &[LabelSummary], feature_names: &[String]) -> String {
    let width = 10;
    let mut out = String::new();
    let header = |out: &mut String| {
        let _ = write!(out, "{:<width$}", "Label");
        for l in &m.labels {
            let _ = write!(out, "{:>width$}", l.title());
        }
        out.push('\n');
    };

    out.push_str("Maximum separability\n");
    header(&mut out);
    for (i, l) in m.labels.iter().enumerate() {
        let _ = write!(out, "{:<width$}", l.title());
        for j in 0..m.size() {
            let cell = m
                .value(i, j)
                .map(|v| if v.is_infinite() { "inf".into() } else { format!("{v:.2}") })
                .unwrap_or_else(|| "-".into());
            let _ = write!(out, "{cell:>width$}");
        }
        out.push('\n');
    }

    out.push_str("\nFeature group causing the maximum separability\n");
    header(&mut out);
    for (i, l) in m.labels.iter().enumerate() {
        let _ = write!(out, "{:<width$}", l.title());
        for j in 0..m.size() {
            let cell = m.group(i, j).map(|g| g.name()).unwrap_or("-");
            let _ = write!(out, "{cell:>width$}");
        }
        out.push('\n');
    }

    out.push_str("\nAverage and standard deviation of maximum separability\n");
    header(&mut out);
    for (name, pick) in [("Average", 0), ("STD", 1)] {
        let _ = write!(out, "{name:<width$}");
        for s in summary {
            let v = if pick == 0 { s.average } else { s.std };
            let _ = write!(out, "{:>width$}", format!("{v:.2}"));
        }
        out.push('\n');
    }

    out.push_str("\nWinning features\n");
    for i in 0..m.size() {
        for j in i + 1..m.size() {
            if let Some(c) = &m.cells[i][j] {
                let name = feature_names.get(c.feature).map(String::as_str).unwrap_or("?");
                let _ = writeln!(
                    out,
                    "{:<9} vs {:<9} {:>10}  {} ({})",
                    m.labels[i].title(),
                    m.labels[j].title(),
                    format_sig9(c.value),
                    name,
                    c.group
                );
            }
        }
    }
    out
}

/// Paths written by [`emit_reports`].
#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub matrix: PathBuf,
    pub groups: PathBuf,
    pub summary: PathBuf,
    pub text: PathBuf,
}

pub fn emit_reports(
    dir: &Path,
    m: &SeparabilityMatrix,
    summary: &[LabelSummary],
    feature_names: &[String],
) -> Result<ReportPaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = ReportPaths {
        matrix: dir.join("separability.csv"),
        groups: dir.join("groups.csv"),
        summary: dir.join("summary.csv"),
        text: dir.join("separability_report.txt"),
    };
    let write = |p: &Path, s: String| fs::write(p, s).map_err(|e| Error::io(p, e));
    write(&paths.matrix, matrix_csv(m))?;
    write(&paths.groups, groups_csv(m))?;
    write(&paths.summary, summary_csv(summary))?;
    write(&paths.text, text_report(m, summary, feature_names))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_fisher() {
        let v = fisher_separability(&[-1.0, 1.0], &[1.0, 3.0]).unwrap();
        assert_eq!(v, 2.0);
    }

    #[test]
    fn identical_lists_give_zero() {
        let a = [0.3, 1.2, -0.7, 2.2];
        assert_eq!(fisher_separability(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_variance() {
        assert_eq!(fisher_separability(&[1.0, 1.0], &[2.0, 2.0]).unwrap(), f64::INFINITY);
        assert_eq!(fisher_separability(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(fisher_separability(&[1.0], &[2.0, 3.0]).is_err());
    }

    #[test]
    fn sample_convention_halves_two_point_ratio() {
        // Two points: sample variance is twice the population variance.
        let v = fisher_separability_with(&[-1.0, 1.0], &[1.0, 3.0], StdConvention::Sample).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn summary_of_constant_row() {
        let labels = vec![Emotion::Happy, Emotion::Sad, Emotion::Epic];
        let c = Some(0.7);
        let m = SeparabilityMatrix::from_values(
            labels,
            vec![vec![None, c, c], vec![c, None, c], vec![c, c, None]],
        )
        .unwrap();
        for s in label_summary(&m, StdConvention::Sample) {
            assert!((s.average - 0.7).abs() < 1e-15);
            assert_eq!(s.std, 0.0);
        }
    }
}
