//! Multiclass SVM (one-vs-one over SMO-trained binary machines) and
//! leave-one-out evaluation.

pub mod smo;

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Emotion, LabeledDataset, LabeledRow};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "emotag-svm";
pub const MODEL_VERSION: u32 = 1;
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    #[default]
    Rbf,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelKind::Linear),
            "rbf" => Ok(KernelKind::Rbf),
            other => Err(Error::InvalidParameter(format!("unknown kernel {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub kernel: KernelKind,
    pub c: f64,
    /// RBF width; `None` selects `1 / (d * mean feature variance)` on the
    /// standardized training rows.
    pub gamma: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Rbf,
            c: 1.0,
            gamma: None,
            tolerance: 1e-3,
            max_iterations: 100_000,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("C must be > 0, got {}", self.c)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidParameter(format!("gamma must be > 0, got {g}")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be > 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be > 0".into()));
        }
        Ok(())
    }

    fn kernel_for(&self, rows: &[Vec<f64>]) -> Kernel {
        match self.kernel {
            KernelKind::Linear => Kernel::Linear,
            KernelKind::Rbf => Kernel::Rbf {
                gamma: self.gamma.unwrap_or_else(|| default_gamma(rows)),
            },
        }
    }
}

/// `1 / (d * mean column variance)`, falling back to `1 / d` when every
/// column is constant.
pub fn default_gamma(rows: &[Vec<f64>]) -> f64 {
    let d = rows.first().map_or(1, Vec::len).max(1);
    let n = rows.len().max(1) as f64;
    let mean_var = (0..d)
        .map(|c| {
            let m = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            rows.iter().map(|r| (r[c] - m) * (r[c] - m)).sum::<f64>() / n
        })
        .sum::<f64>()
        / d as f64;
    if mean_var > 0.0 {
        1.0 / (d as f64 * mean_var)
    } else {
        1.0 / d as f64
    }
}

/// Per-column z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidParameter("cannot standardize zero rows".into()))?;
        let d = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Dimension {
                expected: d,
                got: bad.len(),
            });
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        let mut std = vec![0.0; d];
        for c in 0..d {
            let m = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[c] - m) * (r[c] - m)).sum::<f64>() / n;
            mean[c] = m;
            std[c] = var.sqrt();
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Z-scores `row`; columns whose std is below the floor map to 0.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| if *s < STD_FLOOR { 0.0 } else { (x - m) / s })
            .collect()
    }
}

/// A trained two-class machine; positive decisions favour `positive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub positive: Emotion,
    pub negative: Emotion,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub coefficients: Vec<f64>,
    pub rho: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl BinarySvm {
    pub fn decision(&self, kernel: &Kernel, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, c)| c * kernel.eval(sv, x))
            .sum::<f64>()
            - self.rho
    }
}

/// Trains one binary machine; rows of `positive_rows` get label +1.
///
/// `rows` are used as given (no standardization). Exceeding
/// `max_iterations` is not an error: the result carries `converged = false`.
pub fn train_binary(
    positive_rows: &[Vec<f64>],
    negative_rows: &[Vec<f64>],
    kernel: &Kernel,
    params: &TrainParams,
    classes: (Emotion, Emotion),
) -> Result<BinarySvm> {
    params.validate()?;
    if positive_rows.is_empty() || negative_rows.is_empty() {
        return Err(Error::InvalidParameter("both classes need at least one row".into()));
    }
    let rows: Vec<&Vec<f64>> = positive_rows.iter().chain(negative_rows).collect();
    let y: Vec<f64> = std::iter::repeat(1.0)
        .take(positive_rows.len())
        .chain(std::iter::repeat(-1.0).take(negative_rows.len()))
        .collect();
    let n = rows.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(rows[i], rows[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let sol = smo::solve(&k, &y, params.c, params.tolerance, params.max_iterations);
    let (support_vectors, coefficients) = sol
        .alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0.0)
        .map(|(i, &a)| (rows[i].clone(), a * y[i]))
        .unzip();
    Ok(BinarySvm {
        positive: classes.0,
        negative: classes.1,
        support_vectors,
        coefficients,
        rho: sol.rho,
        converged: sol.converged,
        iterations: sol.iterations,
    })
}

/// One-vs-one multiclass SVM with its own input standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub classes: Vec<Emotion>,
    pub kernel: Kernel,
    pub params: TrainParams,
    pub standardizer: Standardizer,
    pub machines: Vec<BinarySvm>,
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Rows sorted by label then feature values, so training ignores input order.
fn canonical_order(rows: &[&LabeledRow]) -> Vec<(Emotion, Vec<f64>)> {
    let mut out: Vec<(Emotion, Vec<f64>)> = rows.iter().map(|r| (r.label, r.features.clone())).collect();
    out.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| lexicographic(&a.1, &b.1)));
    out
}

impl SvmModel {
    pub fn train(ds: &LabeledDataset, params: &TrainParams) -> Result<Self> {
        let rows: Vec<&LabeledRow> = ds.rows().iter().collect();
        Self::train_rows(&rows, params, None)
    }

    /// Trains on `rows`; a supplied standardizer is used as is instead of
    /// being fitted to these rows.
    pub fn train_rows(
        rows: &[&LabeledRow],
        params: &TrainParams,
        standardizer: Option<Standardizer>,
    ) -> Result<Self> {
        params.validate()?;
        let ordered = canonical_order(rows);
        let raw: Vec<Vec<f64>> = ordered.iter().map(|(_, f)| f.clone()).collect();
        let standardizer = match standardizer {
            Some(s) => s,
            None => Standardizer::fit(&raw)?,
        };
        let scaled: Vec<(Emotion, Vec<f64>)> = ordered
            .iter()
            .map(|(l, f)| (*l, standardizer.apply(f)))
            .collect();
        let classes: Vec<Emotion> = Emotion::ALL
            .into_iter()
            .filter(|e| scaled.iter().any(|(l, _)| l == e))
            .collect();
        if classes.len() < 2 {
            return Err(Error::TooFewLabels);
        }
        let all: Vec<Vec<f64>> = scaled.iter().map(|(_, f)| f.clone()).collect();
        let kernel = params.kernel_for(&all);
        let of = |class: Emotion| -> Vec<Vec<f64>> {
            scaled
                .iter()
                .filter(|(l, _)| *l == class)
                .map(|(_, f)| f.clone())
                .collect()
        };
        let mut machines = Vec::new();
        for (i, &a) in classes.iter().enumerate() {
            for &b in &classes[i + 1..] {
                machines.push(train_binary(&of(a), &of(b), &kernel, params, (a, b))?);
            }
        }
        Ok(Self {
            classes,
            kernel,
            params: *params,
            standardizer,
            machines,
        })
    }

    pub fn all_converged(&self) -> bool {
        self.machines.iter().all(|m| m.converged)
    }

    /// One-vs-one vote. Ties go to the class with the larger summed
    /// |decision| over the contests it won, then to the earlier class.
    pub fn predict(&self, features: &[f64]) -> Result<Emotion> {
        if features.len() != self.standardizer.dim() {
            return Err(Error::Dimension {
                expected: self.standardizer.dim(),
                got: features.len(),
            });
        }
        let x = self.standardizer.apply(features);
        let mut votes = vec![0usize; self.classes.len()];
        let mut strength = vec![0.0f64; self.classes.len()];
        let idx = |e: Emotion| self.classes.iter().position(|&c| c == e).expect("known class");
        for m in &self.machines {
            let d = m.decision(&self.kernel, &x);
            let winner = if d >= 0.0 { idx(m.positive) } else { idx(m.negative) };
            votes[winner] += 1;
            strength[winner] += d.abs();
        }
        let best = (0..self.classes.len())
            .max_by(|&a, &b| {
                votes[a]
                    .cmp(&votes[b])
                    .then(strength[a].total_cmp(&strength[b]))
                    .then(b.cmp(&a))
            })
            .expect("at least two classes");
        Ok(self.classes[best])
    }

    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer_pretty(w, &file).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)
            .map_err(|e| Error::Model(format!("unreadable model: {e}")))?;
        if text.trim().is_empty() {
            return Err(Error::Model("empty model file".into()));
        }
        let header: ModelHeader =
            serde_json::from_str(&text).map_err(|e| Error::Model(format!("corrupt model file: {e}")))?;
        if header.format != MODEL_FORMAT {
            return Err(Error::Model(format!("not an {MODEL_FORMAT} file")));
        }
        if header.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "model version {} is not supported (expected {MODEL_VERSION})",
                header.version
            )));
        }
        let file: ModelFile =
            serde_json::from_str(&text).map_err(|e| Error::Model(format!("corrupt model file: {e}")))?;
        let m = file.model;
        let d = m.standardizer.dim();
        if m.standardizer.std.len() != d
            || m.machines
                .iter()
                .flat_map(|b| &b.support_vectors)
                .any(|sv| sv.len() != d)
            || m.machines.iter().any(|b| b.coefficients.len() != b.support_vectors.len())
            || m.machines.iter().any(|b| {
                !m.classes.contains(&b.positive) || !m.classes.contains(&b.negative)
            })
        {
            return Err(Error::Model("inconsistent model dimensions".into()));
        }
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: SvmModel,
}

#[derive(Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
}

/// How LOOCV fits the feature standardizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scaling {
    /// Refit on each fold's training rows.
    #[default]
    PerFold,
    /// Fit once on every row, held-out rows included. Leaks test data; kept
    /// for comparison only.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub labels: Vec<Emotion>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub per_label_accuracy: Vec<f64>,
    pub overall_accuracy: f64,
    /// Predicted label of every row, in dataset order.
    pub predictions: Vec<Emotion>,
}

impl EvalReport {
    fn from_predictions(labels: Vec<Emotion>, truth: &[Emotion], predictions: Vec<Emotion>) -> Self {
        let n = labels.len();
        let pos = |e: Emotion| labels.iter().position(|&l| l == e).expect("label present");
        let mut confusion = vec![vec![0usize; n]; n];
        for (&t, &p) in truth.iter().zip(&predictions) {
            confusion[pos(t)][pos(p)] += 1;
        }
        let per_label_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let total: usize = row.iter().sum();
                if total == 0 {
                    0.0
                } else {
                    row[i] as f64 / total as f64
                }
            })
            .collect();
        let correct: usize = (0..n).map(|i| confusion[i][i]).sum();
        let overall_accuracy = correct as f64 / truth.len().max(1) as f64;
        Self {
            labels,
            confusion,
            per_label_accuracy,
            overall_accuracy,
            predictions,
        }
    }

    pub fn accuracy_of(&self, label: Emotion) -> Option<f64> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .map(|i| self.per_label_accuracy[i])
    }

    /// Per-label accuracy in percent, one column per label.
    pub fn accuracy_csv(&self) -> String {
        let mut out = String::from("Label");
        for l in &self.labels {
            let _ = write!(out, ",{}", l.title());
        }
        out.push_str(",Overall\nAccuracy (%)");
        for a in &self.per_label_accuracy {
            let _ = write!(out, ",{:.1}", a * 100.0);
        }
        let _ = writeln!(out, ",{:.1}", self.overall_accuracy * 100.0);
        out
    }

    pub fn confusion_text(&self) -> String {
        let w = 10;
        let mut out = String::new();
        let _ = write!(out, "{:<w$}", "Label");
        for l in &self.labels {
            let _ = write!(out, "{:>w$}", l.title());
        }
        let _ = writeln!(out, "{:>w$}", "Accuracy");
        for (i, l) in self.labels.iter().enumerate() {
            let _ = write!(out, "{:<w$}", l.title());
            for c in &self.confusion[i] {
                let _ = write!(out, "{c:>w$}");
            }
            let _ = writeln!(out, "{:>w$}", format!("{:.1}%", self.per_label_accuracy[i] * 100.0));
        }
        let _ = writeln!(out, "Overall accuracy: {:.1}%", self.overall_accuracy * 100.0);
        out
    }
}

/// Leave-one-out cross-validation with a per-fold standardizer.
pub fn loocv(ds: &LabeledDataset, params: &TrainParams) -> Result<EvalReport> {
    loocv_with(ds, params, Scaling::PerFold)
}

pub fn loocv_with(ds: &LabeledDataset, params: &TrainParams, scaling: Scaling) -> Result<EvalReport> {
    params.validate()?;
    let labels = ds.require_two_per_label()?;
    let rows = ds.rows();
    let global = match scaling {
        Scaling::PerFold => None,
        Scaling::Global => {
            let all: Vec<Vec<f64>> = rows.iter().map(|r| r.features.clone()).collect();
            Some(Standardizer::fit(&all)?)
        }
    };
    let predictions = (0..rows.len())
        .into_par_iter()
        .map(|held_out| {
            let train: Vec<&LabeledRow> = rows
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != held_out)
                .map(|(_, r)| r)
                .collect();
            let model = SvmModel::train_rows(&train, params, global.clone())?;
            model.predict(&rows[held_out].features)
        })
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<Emotion> = rows.iter().map(|r| r.label).collect();
    Ok(EvalReport::from_predictions(labels, &truth, predictions))
}
