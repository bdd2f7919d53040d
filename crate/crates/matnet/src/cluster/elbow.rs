//! Elbow criterion for selecting the cluster count: the knee of the
//! cost-vs-k curve, located as the point of maximum perpendicular distance
//! below the chord joining the curve's endpoints. Ties and degenerate
//! (straight-line) curves resolve to the smallest k.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ElbowResult {
    pub k_star: usize,
    /// (k, cost) pairs actually evaluated, ascending k.
    pub curve: Vec<(usize, f64)>,
    /// True when the curve is a straight line and no knee exists.
    pub degenerate: bool,
}

/// Knee of an explicit cost curve.
pub fn elbow_from_curve(curve: &[(usize, f64)]) -> Result<ElbowResult> {
    if curve.len() < 2 {
        return Err(Error::invalid("elbow: need at least two (k, cost) points"));
    }
    for w in curve.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::invalid("elbow: k values must be strictly increasing"));
        }
    }
    let (k_lo, c_lo) = (curve[0].0 as f64, curve[0].1);
    let (k_hi, c_hi) = (curve[curve.len() - 1].0 as f64, curve[curve.len() - 1].1);
    let chord = ((k_hi - k_lo), (c_hi - c_lo));
    let chord_len = (chord.0 * chord.0 + chord.1 * chord.1).sqrt();
    let scale = curve.iter().map(|&(_, c)| c.abs()).fold(1.0, f64::max);

    let mut best_k = curve[0].0;
    let mut best_d = 0.0;
    for &(k, c) in curve {
        // signed perpendicular distance; positive below the chord
        let rel = ((k as f64 - k_lo), (c - c_lo));
        let cross = chord.0 * rel.1 - chord.1 * rel.0;
        let dist = -cross / chord_len;
        if dist > best_d {
            best_d = dist;
            best_k = k;
        }
    }
    let degenerate = best_d <= 1e-12 * scale;
    Ok(ElbowResult {
        k_star: if degenerate { curve[0].0 } else { best_k },
        curve: curve.to_vec(),
        degenerate,
    })
}

/// Fits every k in the range and applies the knee rule to the resulting
/// curve.
pub fn elbow_select<F>(k_range: std::ops::RangeInclusive<usize>, mut fit: F) -> Result<ElbowResult>
where
    F: FnMut(usize) -> Result<f64>,
{
    let mut curve = Vec::new();
    for k in k_range {
        curve.push((k, fit(k)?));
    }
    elbow_from_curve(&curve)
}
