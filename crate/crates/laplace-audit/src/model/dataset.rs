//! Dataset parsing and reproducible synthetic data generators.
//!
//! Text files hold one observation per line, with columns separated by
//! commas, semicolons, or whitespace. Lines starting with `#` are comments.
//! A single leading header line of non-numeric tokens is tolerated and
//! skipped. Every retained row must parse to finite numbers and have the
//! same number of columns.
//!
//! The generators are deterministic in the seed and have the *prefix
//! property*: for a fixed seed, the first `n` rows of a size-`m` draw equal
//! the size-`n` draw whenever `n <= m`. For the logistic generator each row
//! consumes a fixed random budget independent of the feature dimension, so
//! prefixes are also stable across `d`. This keeps sample-size sweeps and
//! minimum-`n` searches monotone in the data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{AuditError, Result};

/// Maximum feature dimension served by [`gen_logistic`]'s fixed per-row
/// random budget.
pub const MAX_LOGISTIC_DIM: usize = 32;

/// A parsed rectangular dataset: `rows[i]` is observation `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
}

impl Dataset {
    /// Parse text into a dataset. `#` lines are comments; an initial
    /// non-numeric line is treated as a header. Errors carry the 1-based
    /// line number of the offending row.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width: Option<usize> = None;
        let mut saw_data = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = line
                .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .collect();
            let parsed: std::result::Result<Vec<f64>, _> =
                tokens.iter().map(|t| t.parse::<f64>()).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if !saw_data => continue, // header line
                Err(_) => {
                    return Err(AuditError::Invalid(format!(
                        "row {line_no}: could not parse '{line}' as numbers"
                    )))
                }
            };
            if values.iter().any(|v| !v.is_finite()) {
                return Err(AuditError::Invalid(format!(
                    "row {line_no}: non-finite value in '{line}'"
                )));
            }
            match width {
                None => width = Some(values.len()),
                Some(w) if w != values.len() => {
                    return Err(AuditError::Invalid(format!(
                        "row {line_no}: expected {w} columns, found {}",
                        values.len()
                    )))
                }
                _ => {}
            }
            saw_data = true;
            rows.push(values);
        }
        if rows.is_empty() {
            return Err(AuditError::Invalid("dataset contains no data rows".into()));
        }
        Ok(Dataset { rows })
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Extract a single column as a vector.
    pub fn column(&self, j: usize) -> Result<Vec<f64>> {
        if self.rows.iter().any(|r| j >= r.len()) {
            return Err(AuditError::Invalid(format!(
                "column {j} out of range for dataset of width {}",
                self.rows.first().map_or(0, |r| r.len())
            )));
        }
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Split rows into features and `+-1` labels, taking the last column as
    /// the label.
    pub fn logistic_parts(&self) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let mut xs = Vec::with_capacity(self.rows.len());
        let mut ys = Vec::with_capacity(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() < 2 {
                return Err(AuditError::Invalid(format!(
                    "row {}: logistic data needs at least one feature and a label",
                    i + 1
                )));
            }
            let (feat, label) = row.split_at(row.len() - 1);
            let y = label[0];
            if y != 1.0 && y != -1.0 {
                return Err(AuditError::Invalid(format!(
                    "row {}: label must be +1 or -1, got {y}",
                    i + 1
                )));
            }
            xs.push(feat.to_vec());
            ys.push(y);
        }
        Ok((xs, ys))
    }
}

/// Draw `n` exponential observations with the given mean (inverse CDF of a
/// uniform stream, so prefixes are stable in `n`).
pub fn gen_exponential(n: usize, mean: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            -mean * (1.0 - u).ln()
        })
        .collect()
}

/// Draw `n` Weibull observations with shape `k` and scale `scale`.
pub fn gen_weibull(n: usize, k: f64, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            scale * (-(1.0 - u).ln()).powf(1.0 / k)
        })
        .collect()
}

/// Draw `n` logistic-regression rows with standard normal features of
/// dimension `d` and labels from the true coefficient vector `theta_star`
/// (the first `d` entries are used). Each row consumes
/// [`MAX_LOGISTIC_DIM`] normals plus one uniform regardless of `d`, so
/// prefixes agree across both `n` and `d`.
pub fn gen_logistic(n: usize, d: usize, theta_star: &[f64], seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    assert!(
        d <= MAX_LOGISTIC_DIM,
        "logistic generator supports d <= {MAX_LOGISTIC_DIM}, got {d}"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let mut budget = [0.0_f64; MAX_LOGISTIC_DIM];
        for slot in budget.iter_mut() {
            *slot = StandardNormal.sample(&mut rng);
        }
        let u: f64 = rng.gen();
        let x: Vec<f64> = budget[..d].to_vec();
        let lin: f64 = x
            .iter()
            .zip(theta_star.iter().chain(std::iter::repeat(&0.0)))
            .map(|(a, b)| a * b)
            .sum();
        let p = 1.0 / (1.0 + (-lin).exp());
        ys.push(if u < p { 1.0 } else { -1.0 });
        xs.push(x);
    }
    (xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_mixed_separators_and_comments() {
        let d = Dataset::parse("# hello\nx y\n1, 2\n3; 4\n5 6\n").unwrap();
        assert_eq!(d.rows, vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
    }

    #[test]
    fn parse_reports_row_number() {
        let err = Dataset::parse("1 2\nfoo bar\n").unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn parse_rejects_ragged_rows() {
        let err = Dataset::parse("1 2\n3\n").unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn generators_have_prefix_property() {
        let a = gen_exponential(50, 10.0, 7);
        let b = gen_exponential(120, 10.0, 7);
        assert_eq!(a[..], b[..50]);

        let (xa, ya) = gen_logistic(30, 5, &[1.0; 5], 3);
        let (xb, yb) = gen_logistic(80, 5, &[1.0; 5], 3);
        assert_eq!(xa[..], xb[..30]);
        assert_eq!(ya[..], yb[..30]);
    }

    #[test]
    fn logistic_prefix_across_dimension() {
        let (x3, _) = gen_logistic(10, 3, &[1.0; 3], 11);
        let (x7, _) = gen_logistic(10, 7, &[1.0; 3], 11);
        for i in 0..10 {
            assert_eq!(x3[i][..], x7[i][..3]);
        }
    }

    #[test]
    fn logistic_parts_checks_labels() {
        let d = Dataset::parse("0.5 1\n-0.2 -1\n").unwrap();
        let (x, y) = d.logistic_parts().unwrap();
        assert_eq!(x, vec![vec![0.5], vec![-0.2]]);
        assert_eq!(y, vec![1.0, -1.0]);
        let bad = Dataset::parse("0.5 2\n").unwrap();
        assert!(bad.logistic_parts().is_err());
    }
}
