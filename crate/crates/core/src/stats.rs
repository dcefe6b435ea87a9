//! Small descriptive-statistics helpers shared across modules.

/// Which divisor a standard deviation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdConvention {
    /// Divide by N.
    #[default]
    Population,
    /// Divide by N - 1.
    Sample,
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Two-pass mean and standard deviation. Empty input gives `(0, 0)`; a single
/// value under the sample convention has std 0.
pub fn mean_std(values: &[f64], convention: StdConvention) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    let denom = match convention {
        StdConvention::Population => values.len() as f64,
        StdConvention::Sample if values.len() > 1 => (values.len() - 1) as f64,
        StdConvention::Sample => return (m, 0.0),
    };
    (m, (ss / denom).sqrt())
}

pub fn population_mean_std(values: &[f64]) -> (f64, f64) {
    mean_std(values, StdConvention::Population)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conventions() {
        let v = [1.0, 3.0];
        assert_eq!(mean_std(&v, StdConvention::Population), (2.0, 1.0));
        let (_, s) = mean_std(&v, StdConvention::Sample);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[], StdConvention::Sample), (0.0, 0.0));
        assert_eq!(mean_std(&[4.0], StdConvention::Sample), (4.0, 0.0));
    }
}
