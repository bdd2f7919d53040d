//! Well feature assembly: standardization, vocabulary encoding, and missing
//! value handling for the mixed-type clustering inputs.
//!
//! Numeric columns are standardized to zero mean and unit variance; constant
//! columns carry no information and are dropped. Missing numeric values are
//! imputed with the column median and flagged through a companion
//! categorical indicator column, so "was missing" stays available as a
//! clustering signal.

use super::kprototypes::MixedRecord;
use crate::error::{Error, Result};

/// Raw per-well inputs before encoding.
#[derive(Debug, Clone, Default)]
pub struct RawWells {
    pub names: Vec<String>,
    pub coords: Vec<(f64, f64)>,
    pub numeric_names: Vec<String>,
    /// `[column][well]`, None = missing.
    pub numeric: Vec<Vec<Option<f64>>>,
    pub categorical_names: Vec<String>,
    /// `[column][well]`.
    pub categorical: Vec<Vec<String>>,
}

/// Encoded, standardized feature matrix.
#[derive(Debug, Clone)]
pub struct WellFeatureMatrix {
    pub names: Vec<String>,
    pub coords: Vec<(f64, f64)>,
    pub records: Vec<MixedRecord>,
    pub numeric_names: Vec<String>,
    pub categorical_names: Vec<String>,
    /// Category string per encoded id, one vocabulary per categorical column.
    pub vocabularies: Vec<Vec<String>>,
    pub dropped_columns: Vec<String>,
    /// Wells x columns that were imputed.
    pub imputed: Vec<(usize, usize)>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn build_features(raw: &RawWells) -> Result<WellFeatureMatrix> {
    let n = raw.names.len();
    if n == 0 {
        return Err(Error::invalid("feature matrix: no wells"));
    }
    if raw.coords.len() != n {
        return Err(Error::invalid("feature matrix: coords/names length mismatch"));
    }
    for (c, col) in raw.numeric.iter().enumerate() {
        if col.len() != n {
            return Err(Error::invalid(format!(
                "feature matrix: numeric column `{}` has {} rows, expected {n}",
                raw.numeric_names.get(c).map(String::as_str).unwrap_or("?"),
                col.len()
            )));
        }
    }
    for (c, col) in raw.categorical.iter().enumerate() {
        if col.len() != n {
            return Err(Error::invalid(format!(
                "feature matrix: categorical column `{}` has {} rows, expected {n}",
                raw.categorical_names.get(c).map(String::as_str).unwrap_or("?"),
                col.len()
            )));
        }
    }

    let mut numeric_kept: Vec<(String, Vec<f64>)> = Vec::new();
    let mut dropped = Vec::new();
    let mut imputed = Vec::new();
    let mut indicator_cols: Vec<(String, Vec<String>)> = Vec::new();

    for (c, col) in raw.numeric.iter().enumerate() {
        let name = raw.numeric_names[c].clone();
        let present: Vec<f64> = col.iter().flatten().copied().collect();
        if present.is_empty() {
            dropped.push(name);
            continue;
        }
        for v in &present {
            if !v.is_finite() {
                return Err(Error::invalid(format!(
                    "feature matrix: non-finite value in numeric column `{name}`"
                )));
            }
        }
        let mut sorted = present.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = median(&sorted);
        let has_missing = col.iter().any(|v| v.is_none());
        let filled: Vec<f64> = col
            .iter()
            .enumerate()
            .map(|(w, v)| match v {
                Some(x) => *x,
                None => {
                    imputed.push((w, c));
                    med
                }
            })
            .collect();
        let mean = filled.iter().sum::<f64>() / n as f64;
        let var = filled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
        if var <= 0.0 {
            dropped.push(name.clone());
        } else {
            let sd = var.sqrt();
            numeric_kept.push((name.clone(), filled.iter().map(|v| (v - mean) / sd).collect()));
        }
        if has_missing {
            indicator_cols.push((
                format!("{name}_missing"),
                col.iter()
                    .map(|v| if v.is_some() { "present" } else { "missing" }.to_string())
                    .collect(),
            ));
        }
    }

    let mut categorical_names = raw.categorical_names.clone();
    let mut categorical_cols: Vec<Vec<String>> = raw.categorical.clone();
    for (name, col) in indicator_cols {
        categorical_names.push(name);
        categorical_cols.push(col);
    }

    // vocabulary encoding in first-appearance order
    let mut vocabularies: Vec<Vec<String>> = Vec::with_capacity(categorical_cols.len());
    let mut encoded: Vec<Vec<u32>> = Vec::with_capacity(categorical_cols.len());
    for col in &categorical_cols {
        let mut vocab: Vec<String> = Vec::new();
        let ids = col
            .iter()
            .map(|v| {
                if let Some(i) = vocab.iter().position(|x| x == v) {
                    i as u32
                } else {
                    vocab.push(v.clone());
                    (vocab.len() - 1) as u32
                }
            })
            .collect();
        vocabularies.push(vocab);
        encoded.push(ids);
    }

    let records = (0..n)
        .map(|w| MixedRecord {
            numeric: numeric_kept.iter().map(|(_, col)| col[w]).collect(),
            categorical: encoded.iter().map(|col| col[w]).collect(),
        })
        .collect();

    Ok(WellFeatureMatrix {
        names: raw.names.clone(),
        coords: raw.coords.clone(),
        records,
        numeric_names: numeric_kept.into_iter().map(|(n, _)| n).collect(),
        categorical_names,
        vocabularies,
        dropped_columns: dropped,
        imputed,
    })
}
