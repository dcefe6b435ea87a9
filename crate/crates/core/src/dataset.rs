//! Emotion labels, labelled feature tables and their CSV/JSON encodings.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSchema, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Happy,
    Sad,
    Relaxing,
    Exciting,
    Epic,
    Thriller,
}

impl Emotion {
    pub const ALL: [Emotion; 6] = [
        Emotion::Happy,
        Emotion::Sad,
        Emotion::Relaxing,
        Emotion::Exciting,
        Emotion::Epic,
        Emotion::Thriller,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Relaxing => "relaxing",
            Emotion::Exciting => "exciting",
            Emotion::Epic => "epic",
            Emotion::Thriller => "thriller",
        }
    }

    /// Capitalized form used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            Emotion::Happy => "Happy",
            Emotion::Sad => "Sad",
            Emotion::Relaxing => "Relaxing",
            Emotion::Exciting => "Exciting",
            Emotion::Epic => "Epic",
            Emotion::Thriller => "Thriller",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        Emotion::ALL
            .into_iter()
            .find(|e| e.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

/// Formats like C's `%.9g`: nine significant digits, trailing zeros trimmed.
pub fn format_sig9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_value(field: &str, line: usize, column: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Schema(format!("line {line}, column {column}: {field:?} is not a number")))
}

/// One row of a feature table; the label is optional for unlabelled inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub part_id: String,
    pub label: Option<Emotion>,
    pub values: Vec<f64>,
}

/// A feature matrix with a fixed schema, as written by the extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub schema: Arc<FeatureSchema>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(schema: Arc<FeatureSchema>) -> Self {
        Self {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, part_id: impl Into<String>, label: Option<Emotion>, features: &FeatureVector) -> Result<()> {
        if features.schema().names() != self.schema.names() {
            return Err(Error::Schema("feature vector schema differs from table".into()));
        }
        self.rows.push(FeatureRow {
            part_id: part_id.into(),
            label,
            values: features.values().to_vec(),
        });
        Ok(())
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["part_id".to_string(), "label".to_string()];
        h.extend(self.schema.names().iter().cloned());
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        for row in &self.rows {
            let mut record = vec![
                row.part_id.clone(),
                row.label.map(|l| l.to_string()).unwrap_or_default(),
            ];
            record.extend(row.values.iter().map(|&v| format_sig9(v)));
            out.write_record(&record)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Reads a CSV whose header must match `schema` exactly.
    pub fn read_csv<R: Read>(r: R, schema: Arc<FeatureSchema>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let expected = Self::new(schema.clone()).header();
        let header: Vec<String> = reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
        if header.len() != expected.len() {
            return Err(Error::Schema(format!(
                "expected {} columns, found {}",
                expected.len(),
                header.len()
            )));
        }
        if let Some(i) = header.iter().zip(&expected).position(|(a, b)| a != b) {
            return Err(Error::Schema(format!(
                "column {} is {:?}, expected {:?}",
                i + 1,
                header[i],
                expected[i]
            )));
        }
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Schema(e.to_string()))?;
            let line = i + 2;
            if record.len() != expected.len() {
                return Err(Error::Schema(format!(
                    "line {line}: expected {} fields, found {}",
                    expected.len(),
                    record.len()
                )));
            }
            let label = match record[1].trim() {
                "" => None,
                s => Some(s.parse()?),
            };
            let values = (2..record.len())
                .map(|c| parse_value(&record[c], line, &expected[c]))
                .collect::<Result<Vec<_>>>()?;
            rows.push(FeatureRow {
                part_id: record[0].to_string(),
                label,
                values,
            });
        }
        Ok(Self { schema, rows })
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        let doc = JsonTable {
            columns: self.schema.names().to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| JsonRow {
                    part_id: r.part_id.clone(),
                    label: r.label,
                    values: r.values.clone(),
                })
                .collect(),
        };
        serde_json::to_writer_pretty(w, &doc).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn read_json<R: Read>(r: R, schema: Arc<FeatureSchema>) -> Result<Self> {
        let doc: JsonTable = serde_json::from_reader(r).map_err(|e| Error::Schema(e.to_string()))?;
        if doc.columns != schema.names() {
            return Err(Error::Schema("JSON columns differ from the feature schema".into()));
        }
        let rows = doc
            .rows
            .into_iter()
            .map(|r| {
                if r.values.len() != schema.len() {
                    return Err(Error::Schema(format!("row {} has {} values", r.part_id, r.values.len())));
                }
                Ok(FeatureRow {
                    part_id: r.part_id,
                    label: r.label,
                    values: r.values,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { schema, rows })
    }
}

#[derive(Serialize, Deserialize)]
struct JsonTable {
    columns: Vec<String>,
    rows: Vec<JsonRow>,
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    part_id: String,
    label: Option<Emotion>,
    values: Vec<f64>,
}

/// A labelled sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    pub part_id: String,
    pub label: Emotion,
    pub features: Vec<f64>,
}

/// Fully labelled rows with unique ids and finite features.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    schema: Arc<FeatureSchema>,
    rows: Vec<LabeledRow>,
}

impl LabeledDataset {
    pub fn new(schema: Arc<FeatureSchema>, rows: Vec<LabeledRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for row in &rows {
            if !seen.insert(row.part_id.as_str()) {
                return Err(Error::Schema(format!("duplicate part_id {:?}", row.part_id)));
            }
            if row.features.len() != schema.len() {
                return Err(Error::Dimension {
                    expected: schema.len(),
                    got: row.features.len(),
                });
            }
            if row.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "part {} has non-finite features",
                    row.part_id
                )));
            }
        }
        Ok(Self { schema, rows })
    }

    pub fn from_table(table: FeatureTable) -> Result<Self> {
        let rows = table
            .rows
            .into_iter()
            .map(|r| {
                let label = r
                    .label
                    .ok_or_else(|| Error::Schema(format!("part {} has no label", r.part_id)))?;
                Ok(LabeledRow {
                    part_id: r.part_id,
                    label,
                    features: r.values,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(table.schema, rows)
    }

    pub fn into_table(self) -> FeatureTable {
        FeatureTable {
            schema: self.schema,
            rows: self
                .rows
                .into_iter()
                .map(|r| FeatureRow {
                    part_id: r.part_id,
                    label: Some(r.label),
                    values: r.features,
                })
                .collect(),
        }
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn rows(&self) -> &[LabeledRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    /// Labels that occur in the dataset, in canonical order.
    pub fn labels(&self) -> Vec<Emotion> {
        Emotion::ALL
            .into_iter()
            .filter(|e| self.rows.iter().any(|r| r.label == *e))
            .collect()
    }

    pub fn count(&self, label: Emotion) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }

    /// Errors unless at least two labels are present, each with two rows.
    pub fn require_two_per_label(&self) -> Result<Vec<Emotion>> {
        let labels = self.labels();
        if labels.len() < 2 {
            return Err(Error::TooFewLabels);
        }
        for &l in &labels {
            if self.count(l) < 2 {
                return Err(Error::TooFewSamples(l.to_string()));
            }
        }
        Ok(labels)
    }

    /// Values of feature `column` for every row with `label`.
    pub fn column_for(&self, column: usize, label: Emotion) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.label == label)
            .map(|r| r.features[column])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(0.5), "0.5");
        assert_eq!(format_sig9(123_456_789.0), "123456789");
        assert_eq!(format_sig9(1_234_567_890.0), "1.23456789e+09");
        assert_eq!(format_sig9(-2.302_585_092_994), "-2.30258509");
        assert_eq!(format_sig9(1e-10), "1e-10");
        assert_eq!(format_sig9(0.000_123_456_789_12), "0.000123456789");
        assert_eq!(format_sig9(f64::INFINITY), "inf");
    }

    #[test]
    fn labels_parse_case_insensitively() {
        assert_eq!("Epic".parse::<Emotion>().unwrap(), Emotion::Epic);
        assert!(matches!("angry".parse::<Emotion>(), Err(Error::UnknownLabel(_))));
    }

    fn tiny_schema() -> Arc<FeatureSchema> {
        FeatureSchema::standard()
    }

    #[test]
    fn csv_rejects_permuted_header() {
        let schema = tiny_schema();
        let mut header = FeatureTable::new(schema.clone()).header();
        header.swap(2, 3);
        let csv = header.join(",") + "\n";
        assert!(matches!(
            FeatureTable::read_csv(csv.as_bytes(), schema),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let schema = tiny_schema();
        let row = LabeledRow {
            part_id: "a".into(),
            label: Emotion::Sad,
            features: vec![0.0; schema.len()],
        };
        assert!(LabeledDataset::new(schema, vec![row.clone(), row]).is_err());
    }
}
