//! Piecewise-linear interpolation over a strictly increasing abscissa.
//!
//! Shared by the PVT and relative-permeability tables. Evaluation clamps to
//! the end values outside the tabulated range, so the derivative there is
//! zero; at interior nodes the derivative is the mean of the two adjacent
//! segment slopes, which keeps Newton iterations away from node
//! discontinuities.

use num_traits::Float;

/// Index of the segment `[xs[i], xs[i+1])` containing `x`, clamped to the
/// valid range. Requires `xs.len() >= 2`.
fn segment<T: Float>(xs: &[T], x: T) -> usize {
    let n = xs.len();
    if x <= xs[0] {
        return 0;
    }
    if x >= xs[n - 2] {
        return n - 2;
    }
    // partition_point: count of nodes <= x, minus one gives the lower node.
    let idx = xs.partition_point(|&v| v <= x);
    idx - 1
}

/// Linear interpolation of `ys` over `xs` at `x`, clamped outside the table.
/// Exact at nodes.
pub fn eval<T: Float>(xs: &[T], ys: &[T], x: T) -> T {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = segment(xs, x);
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// Slope of the interpolant at `x`: zero outside the table, segment slope
/// inside, mean of adjacent slopes exactly at interior nodes, one-sided
/// slope at the end nodes.
pub fn slope<T: Float>(xs: &[T], ys: &[T], x: T) -> T {
    let n = xs.len();
    if x < xs[0] || x > xs[n - 1] {
        return T::zero();
    }
    let seg = |i: usize| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    // Exactly on a node?
    if let Ok(k) = xs.binary_search_by(|v| v.partial_cmp(&x).expect("finite abscissa")) {
        return if k == 0 {
            seg(0)
        } else if k == n - 1 {
            seg(n - 2)
        } else {
            let two = T::one() + T::one();
            (seg(k - 1) + seg(k)) / two
        };
    }
    seg(segment(xs, x))
}

/// Validates that `xs` is strictly increasing with at least two finite nodes.
pub fn check_strictly_increasing<T: Float>(xs: &[T]) -> Result<(), String> {
    if xs.len() < 2 {
        return Err(format!("need at least 2 nodes, got {}", xs.len()));
    }
    for (i, w) in xs.windows(2).enumerate() {
        if !w[0].is_finite() || !w[1].is_finite() {
            return Err(format!("non-finite node at index {}", i));
        }
        if w[1] <= w[0] {
            return Err(format!("nodes not strictly increasing at index {}", i + 1));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const XS: [f64; 3] = [1000.0, 3000.0, 4000.0];
    const YS: [f64; 3] = [1.20, 1.30, 1.32];

    #[test]
    fn exact_at_nodes() {
        for (x, y) in XS.iter().zip(YS.iter()) {
            assert_eq!(eval(&XS, &YS, *x), *y);
        }
    }

    #[test]
    fn midpoint_and_clamp() {
        assert_eq!(eval(&XS, &YS, 2000.0), 1.25);
        assert_eq!(eval(&XS, &YS, 500.0), 1.20);
        assert_eq!(eval(&XS, &YS, 5000.0), 1.32);
    }

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn slopes() {
        close(slope(&XS, &YS, 2000.0), 0.10 / 2000.0);
        assert_eq!(slope(&XS, &YS, 5000.0), 0.0);
        assert_eq!(slope(&XS, &YS, 999.0), 0.0);
        // interior node: mean of adjacent slopes
        close(slope(&XS, &YS, 3000.0), 0.5 * (0.10 / 2000.0 + 0.02 / 1000.0));
        // end nodes: one-sided
        close(slope(&XS, &YS, 1000.0), 0.10 / 2000.0);
        close(slope(&XS, &YS, 4000.0), 0.02 / 1000.0);
    }

    #[test]
    fn slope_matches_central_difference_inside_segments() {
        let h = 1e-3;
        for &x in &[1500.0, 2200.0, 3456.0, 3999.0_f64] {
            let fd = (eval(&XS, &YS, x + h) - eval(&XS, &YS, x - h)) / (2.0 * h);
            let an = slope(&XS, &YS, x);
            assert!((fd - an).abs() < 1e-10, "x={x}: fd={fd} an={an}");
        }
    }
}
