//! Dynamic time warping between scalar sequences.
//!
//! The alignment honors the endpoint, monotonicity, and step-size
//! constraints: a path starts at (1,1), ends at (N,M), and each pair may be
//! followed only by (i+1,j), (i,j+1), or (i+1,j+1). Each visited pair (i,j)
//! contributes w_move * C(i,j), where the weight depends on the move that
//! entered it (w_h horizontal, w_v vertical, w_d diagonal; the first pair
//! counts as diagonal).

use crate::error::{Error, Result};
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalMetric {
    SquaredEuclidean,
    Manhattan,
}

impl LocalMetric {
    fn cost<T: Float>(self, a: T, b: T) -> T {
        let d = a - b;
        match self {
            LocalMetric::SquaredEuclidean => d * d,
            LocalMetric::Manhattan => d.abs(),
        }
    }
}

/// Direction weights (w_h, w_v, w_d). (1,1,1) favors diagonal moves; (1,1,2)
/// counterbalances the one-step diagonal advantage.
#[derive(Debug, Clone, Copy)]
pub struct DtwWeights<T> {
    pub w_h: T,
    pub w_v: T,
    pub w_d: T,
}

impl<T: Float> DtwWeights<T> {
    pub fn equal() -> Self {
        DtwWeights {
            w_h: T::one(),
            w_v: T::one(),
            w_d: T::one(),
        }
    }

    pub fn counterbalanced() -> Self {
        DtwWeights {
            w_h: T::one(),
            w_v: T::one(),
            w_d: T::one() + T::one(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DtwResult<T> {
    pub cost: T,
    /// One optimal warping path as 0-based (i, j) index pairs.
    pub path: Vec<(usize, usize)>,
}

/// O(N*M) dynamic program returning the optimal cost and one optimal path
/// (ties prefer diagonal, then vertical).
pub fn dtw<T: Float>(
    x: &[T],
    y: &[T],
    weights: DtwWeights<T>,
    metric: LocalMetric,
) -> Result<DtwResult<T>> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("dtw: sequences must be nonempty"));
    }
    let n = x.len();
    let m = y.len();
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    let mut acc = vec![T::infinity(); (n + 1) * (m + 1)];
    // 0 = none, 1 = diagonal, 2 = vertical (j-1), 3 = horizontal (i-1)
    let mut back = vec![0u8; (n + 1) * (m + 1)];
    acc[idx(0, 0)] = T::zero();
    for i in 1..=n {
        for j in 1..=m {
            let c = metric.cost(x[i - 1], y[j - 1]);
            let diag = acc[idx(i - 1, j - 1)] + weights.w_d * c;
            let vert = acc[idx(i, j - 1)] + weights.w_v * c;
            let horiz = acc[idx(i - 1, j)] + weights.w_h * c;
            let (best, mv) = if diag <= vert && diag <= horiz {
                (diag, 1)
            } else if vert <= horiz {
                (vert, 2)
            } else {
                (horiz, 3)
            };
            acc[idx(i, j)] = best;
            back[idx(i, j)] = mv;
        }
    }
    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        path.push((i - 1, j - 1));
        match back[idx(i, j)] {
            1 => {
                i -= 1;
                j -= 1;
            }
            2 => j -= 1,
            3 => i -= 1,
            _ => break, // reached (1,1) -> recorded; predecessor is (0,0)
        }
        if i == 0 && j == 0 {
            break;
        }
    }
    path.reverse();
    Ok(DtwResult {
        cost: acc[idx(n, m)],
        path,
    })
}

/// DTW(N,M) / (N+M): the average alignment cost, comparable across lengths.
pub fn dtw_normalized<T: Float>(
    x: &[T],
    y: &[T],
    weights: DtwWeights<T>,
    metric: LocalMetric,
) -> Result<T> {
    let r = dtw(x, y, weights, metric)?;
    Ok(r.cost / T::from(x.len() + y.len()).unwrap())
}
