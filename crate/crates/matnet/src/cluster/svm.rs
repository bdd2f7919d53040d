//! Maximum-margin zone delineation: one-vs-rest kernel SVMs over wellhead
//! coordinates, rasterized into a labeled grid with polygonal zone
//! boundaries.
//!
//! The binary machines are trained with the classic pairwise SMO scheme;
//! the partner index is drawn from a seeded generator, so training is
//! deterministic for a fixed seed.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    Polynomial { degree: u32, gamma: f64, coef0: f64 },
    Rbf { gamma: f64 },
}

impl Kernel {
    fn apply(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let dot = a.0 * b.0 + a.1 * b.1;
        match *self {
            Kernel::Linear => dot,
            Kernel::Polynomial { degree, gamma, coef0 } => (gamma * dot + coef0).powi(degree as i32),
            Kernel::Rbf { gamma } => {
                let dx = a.0 - b.0;
                let dy = a.1 - b.1;
                (-gamma * (dx * dx + dy * dy)).exp()
            }
        }
    }
}

/// One trained binary classifier (class vs rest).
#[derive(Debug, Clone)]
struct BinarySvc {
    points: Vec<(f64, f64)>,
    coef: Vec<f64>, // alpha_i * y_i
    bias: f64,
    kernel: Kernel,
}

impl BinarySvc {
    fn decision(&self, x: (f64, f64)) -> f64 {
        let mut f = self.bias;
        for (p, c) in self.points.iter().zip(&self.coef) {
            if *c != 0.0 {
                f += c * self.kernel.apply(*p, x);
            }
        }
        f
    }
}

/// Pairwise SMO for the soft-margin dual; labels are +-1.
fn train_binary(
    points: &[(f64, f64)],
    labels: &[f64],
    c: f64,
    kernel: Kernel,
    rng: &mut ChaCha8Rng,
) -> BinarySvc {
    let n = points.len();
    let tol = 1e-4;
    let max_quiet_passes = 10;
    let mut alphas = vec![0.0f64; n];
    let mut bias = 0.0f64;
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| kernel.apply(points[i], points[j])).collect())
        .collect();
    let f = |alphas: &[f64], bias: f64, i: usize| -> f64 {
        let mut v = bias;
        for j in 0..n {
            if alphas[j] != 0.0 {
                v += alphas[j] * labels[j] * gram[j][i];
            }
        }
        v
    };

    let mut quiet = 0;
    let mut total_iters = 0;
    while quiet < max_quiet_passes && total_iters < 200 {
        total_iters += 1;
        let mut changed = 0;
        for i in 0..n {
            let e_i = f(&alphas, bias, i) - labels[i];
            if (labels[i] * e_i < -tol && alphas[i] < c) || (labels[i] * e_i > tol && alphas[i] > 0.0)
            {
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                let e_j = f(&alphas, bias, j) - labels[j];
                let (a_i_old, a_j_old) = (alphas[i], alphas[j]);
                let (lo, hi) = if labels[i] != labels[j] {
                    ((a_j_old - a_i_old).max(0.0), (c + a_j_old - a_i_old).min(c))
                } else {
                    ((a_i_old + a_j_old - c).max(0.0), (a_i_old + a_j_old).min(c))
                };
                if lo >= hi {
                    continue;
                }
                let eta = 2.0 * gram[i][j] - gram[i][i] - gram[j][j];
                if eta >= 0.0 {
                    continue;
                }
                let mut a_j = a_j_old - labels[j] * (e_i - e_j) / eta;
                a_j = a_j.clamp(lo, hi);
                if (a_j - a_j_old).abs() < 1e-7 {
                    continue;
                }
                let a_i = a_i_old + labels[i] * labels[j] * (a_j_old - a_j);
                alphas[i] = a_i;
                alphas[j] = a_j;
                let b1 = bias - e_i
                    - labels[i] * (a_i - a_i_old) * gram[i][i]
                    - labels[j] * (a_j - a_j_old) * gram[i][j];
                let b2 = bias - e_j
                    - labels[i] * (a_i - a_i_old) * gram[i][j]
                    - labels[j] * (a_j - a_j_old) * gram[j][j];
                bias = if 0.0 < a_i && a_i < c {
                    b1
                } else if 0.0 < a_j && a_j < c {
                    b2
                } else {
                    0.5 * (b1 + b2)
                };
                changed += 1;
            }
        }
        if changed == 0 {
            quiet += 1;
        } else {
            quiet = 0;
        }
    }
    BinarySvc {
        points: points.to_vec(),
        coef: alphas.iter().zip(labels).map(|(a, y)| a * y).collect(),
        bias,
        kernel,
    }
}

/// One-vs-rest multi-class classifier over 2D coordinates.
#[derive(Debug, Clone)]
pub struct MultiClassSvm {
    classes: Vec<usize>,
    machines: Vec<BinarySvc>,
}

impl MultiClassSvm {
    pub fn fit(
        points: &[(f64, f64)],
        labels: &[usize],
        kernel: Kernel,
        c: f64,
        seed: u64,
    ) -> Result<Self> {
        if points.len() != labels.len() || points.is_empty() {
            return Err(Error::invalid("svm: empty or mismatched training set"));
        }
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::invalid("svm: need at least two classes"));
        }
        let mut machines = Vec::with_capacity(classes.len());
        for (rank, &cls) in classes.iter().enumerate() {
            let y: Vec<f64> = labels
                .iter()
                .map(|&l| if l == cls { 1.0 } else { -1.0 })
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(rank as u64));
            machines.push(train_binary(points, &y, c, kernel, &mut rng));
        }
        Ok(MultiClassSvm { classes, machines })
    }

    /// Argmax of the per-class decision values; ties take the smaller class.
    pub fn predict(&self, x: (f64, f64)) -> usize {
        let mut best = self.classes[0];
        let mut best_v = f64::NEG_INFINITY;
        for (cls, machine) in self.classes.iter().zip(&self.machines) {
            let v = machine.decision(x);
            if v > best_v {
                best_v = v;
                best = *cls;
            }
        }
        best
    }

    pub fn training_accuracy(&self, points: &[(f64, f64)], labels: &[usize]) -> f64 {
        let hits = points
            .iter()
            .zip(labels)
            .filter(|(p, l)| self.predict(**p) == **l)
            .count();
        hits as f64 / points.len() as f64
    }
}

/// Zone raster plus extracted boundaries.
#[derive(Debug, Clone)]
pub struct ZoneMap {
    /// Cell-center coordinates of the raster axes.
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `labels[iy][ix]`.
    pub labels: Vec<Vec<usize>>,
    pub model: Option<MultiClassSvm>,
    /// Accuracy over wells belonging to trained (non-singleton) classes.
    pub training_accuracy: f64,
    /// Classes with a single well, mapped as point-buffer zones.
    pub singleton_classes: Vec<usize>,
    pub polygons: Vec<ZonePolygon>,
}

#[derive(Debug, Clone)]
pub struct ZonePolygon {
    pub label: usize,
    /// Closed rings of (x, y) vertices (first vertex repeated at the end).
    pub rings: Vec<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct ZoneSpec {
    pub kernel: Kernel,
    pub c: f64,
    pub resolution: usize,
    pub seed: u64,
    /// Bounding-box margin as a fraction of each axis span.
    pub margin: f64,
}

impl Default for ZoneSpec {
    fn default() -> Self {
        ZoneSpec {
            kernel: Kernel::Rbf { gamma: 1.0 },
            c: 10.0,
            resolution: 64,
            seed: 0,
            margin: 0.05,
        }
    }
}

/// Trains the multi-class boundary model and rasterizes zones over the well
/// bounding box. Classes with fewer than two wells cannot train a margin and
/// become point-buffer zones stamped around their well.
pub fn zone_map(points: &[(f64, f64)], labels: &[usize], spec: &ZoneSpec) -> Result<ZoneMap> {
    if points.is_empty() || points.len() != labels.len() {
        return Err(Error::invalid("zone map: empty or mismatched inputs"));
    }
    if spec.resolution < 2 {
        return Err(Error::invalid("zone map: resolution must be >= 2"));
    }
    let mut class_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *class_counts.entry(l).or_default() += 1;
    }
    let singleton_classes: Vec<usize> = class_counts
        .iter()
        .filter(|(_, &n)| n < 2)
        .map(|(&c, _)| c)
        .collect();
    for &c in &singleton_classes {
        log::warn!("zone map: class {c} has a single well; mapped as a point-buffer zone");
    }
    let trained_idx: Vec<usize> = (0..points.len())
        .filter(|&i| !singleton_classes.contains(&labels[i]))
        .collect();
    let trained_points: Vec<(f64, f64)> = trained_idx.iter().map(|&i| points[i]).collect();
    let trained_labels: Vec<usize> = trained_idx.iter().map(|&i| labels[i]).collect();

    let trained_classes: usize = {
        let mut cl = trained_labels.clone();
        cl.sort_unstable();
        cl.dedup();
        cl.len()
    };
    let model = if trained_classes >= 2 {
        Some(MultiClassSvm::fit(
            &trained_points,
            &trained_labels,
            spec.kernel,
            spec.c,
            spec.seed,
        )?)
    } else {
        None
    };
    let training_accuracy = match &model {
        Some(m) => m.training_accuracy(&trained_points, &trained_labels),
        None => 1.0,
    };

    // raster over the padded bounding box
    let (mut x_lo, mut x_hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.0), hi.max(p.0))
        });
    let (mut y_lo, mut y_hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
    let pad = |lo: &mut f64, hi: &mut f64| {
        let span = (*hi - *lo).max(1.0);
        *lo -= spec.margin * span;
        *hi += spec.margin * span;
    };
    pad(&mut x_lo, &mut x_hi);
    pad(&mut y_lo, &mut y_hi);
    let r = spec.resolution;
    let dx = (x_hi - x_lo) / r as f64;
    let dy = (y_hi - y_lo) / r as f64;
    let xs: Vec<f64> = (0..r).map(|i| x_lo + (i as f64 + 0.5) * dx).collect();
    let ys: Vec<f64> = (0..r).map(|j| y_lo + (j as f64 + 0.5) * dy).collect();

    let fallback_nearest = |x: (f64, f64)| -> usize {
        let mut best = labels[0];
        let mut best_d = f64::INFINITY;
        for (p, &l) in points.iter().zip(labels) {
            let d = (p.0 - x.0).powi(2) + (p.1 - x.1).powi(2);
            if d < best_d {
                best_d = d;
                best = l;
            }
        }
        best
    };
    let mut grid: Vec<Vec<usize>> = ys
        .iter()
        .map(|&cy| {
            xs.iter()
                .map(|&cx| match &model {
                    Some(m) => m.predict((cx, cy)),
                    None => fallback_nearest((cx, cy)),
                })
                .collect()
        })
        .collect();

    let cell_of = |p: (f64, f64)| -> (usize, usize) {
        let ix = (((p.0 - x_lo) / dx).floor() as isize).clamp(0, r as isize - 1) as usize;
        let iy = (((p.1 - y_lo) / dy).floor() as isize).clamp(0, r as isize - 1) as usize;
        (ix, iy)
    };
    // every well's own cell carries the well's predicted label
    for (p, &l) in points.iter().zip(labels) {
        let (ix, iy) = cell_of(*p);
        grid[iy][ix] = match &model {
            Some(m) if !singleton_classes.contains(&l) => m.predict(*p),
            _ => l,
        };
    }
    // point-buffer zones: a small disc around each singleton well
    for (p, &l) in points.iter().zip(labels) {
        if singleton_classes.contains(&l) {
            let (cx, cy) = cell_of(*p);
            for iy in cy.saturating_sub(1)..(cy + 2).min(r) {
                for ix in cx.saturating_sub(1)..(cx + 2).min(r) {
                    grid[iy][ix] = l;
                }
            }
        }
    }

    let polygons = trace_polygons(&grid, x_lo, y_lo, dx, dy);

    Ok(ZoneMap {
        xs,
        ys,
        labels: grid,
        model,
        training_accuracy,
        singleton_classes,
        polygons,
    })
}

/// Boundary rings of each zone label, traced along cell edges with the zone
/// kept on the left (counterclockwise outer rings).
fn trace_polygons(
    grid: &[Vec<usize>],
    x_lo: f64,
    y_lo: f64,
    dx: f64,
    dy: f64,
) -> Vec<ZonePolygon> {
    let ny = grid.len();
    let nx = grid[0].len();
    let mut out: BTreeMap<usize, Vec<Vec<(f64, f64)>>> = BTreeMap::new();
    let mut labels: Vec<usize> = grid.iter().flatten().copied().collect();
    labels.sort_unstable();
    labels.dedup();

    for label in labels {
        // oriented boundary edges keyed by start vertex (integer corners)
        let mut edges: BTreeMap<(i64, i64), Vec<(i64, i64)>> = BTreeMap::new();
        let mut push = |from: (i64, i64), to: (i64, i64)| {
            edges.entry(from).or_default().push(to);
        };
        for (iy, row) in grid.iter().enumerate() {
            for (ix, &l) in row.iter().enumerate() {
                if l != label {
                    continue;
                }
                let (x0, y0) = (ix as i64, iy as i64);
                let differs = |jx: isize, jy: isize| -> bool {
                    jx < 0
                        || jy < 0
                        || jx >= nx as isize
                        || jy >= ny as isize
                        || grid[jy as usize][jx as usize] != label
                };
                if differs(ix as isize, iy as isize - 1) {
                    push((x0, y0), (x0 + 1, y0)); // bottom, +x
                }
                if differs(ix as isize + 1, iy as isize) {
                    push((x0 + 1, y0), (x0 + 1, y0 + 1)); // right, +y
                }
                if differs(ix as isize, iy as isize + 1) {
                    push((x0 + 1, y0 + 1), (x0, y0 + 1)); // top, -x
                }
                if differs(ix as isize - 1, iy as isize) {
                    push((x0, y0 + 1), (x0, y0)); // left, -y
                }
            }
        }
        let mut rings = Vec::new();
        while let Some((&start, _)) = edges.iter().next() {
            let mut ring_idx = vec![start];
            let mut current = start;
            let mut incoming = (0i64, 0i64);
            loop {
                let Some(nexts) = edges.get_mut(&current) else {
                    break;
                };
                // prefer the sharpest left turn to stay on this region
                let pick = if nexts.len() == 1 {
                    0
                } else {
                    let angle_rank = |to: (i64, i64)| -> i64 {
                        let dir = (to.0 - current.0, to.1 - current.1);
                        // cross/dot relative to incoming direction
                        let cross = incoming.0 * dir.1 - incoming.1 * dir.0;
                        let dot = incoming.0 * dir.0 + incoming.1 * dir.1;
                        if cross > 0 {
                            0 // left turn
                        } else if cross == 0 && dot > 0 {
                            1 // straight
                        } else {
                            2 // right turn / reverse
                        }
                    };
                    (0..nexts.len())
                        .min_by_key(|&i| (angle_rank(nexts[i]), nexts[i]))
                        .expect("nonempty")
                };
                let next = nexts.swap_remove(pick);
                if nexts.is_empty() {
                    edges.remove(&current);
                }
                incoming = (next.0 - current.0, next.1 - current.1);
                ring_idx.push(next);
                current = next;
                if current == start {
                    break;
                }
            }
            if ring_idx.len() > 2 {
                rings.push(
                    ring_idx
                        .iter()
                        .map(|&(gx, gy)| (x_lo + gx as f64 * dx, y_lo + gy as f64 * dy))
                        .collect(),
                );
            }
        }
        out.entry(label).or_default().extend(rings);
    }
    out.into_iter()
        .map(|(label, rings)| ZonePolygon { label, rings })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linearly_separable_clusters_get_a_straight_boundary() {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for i in 0..6 {
            points.push((0.0 + 0.1 * i as f64, 0.0 + 0.15 * i as f64));
            labels.push(0);
            points.push((5.0 + 0.1 * i as f64, 5.0 + 0.15 * i as f64));
            labels.push(1);
        }
        let model = MultiClassSvm::fit(&points, &labels, Kernel::Linear, 10.0, 1).unwrap();
        assert_eq!(model.training_accuracy(&points, &labels), 1.0);

        let spec = ZoneSpec {
            kernel: Kernel::Linear,
            c: 10.0,
            resolution: 32,
            seed: 1,
            margin: 0.05,
        };
        let zm = zone_map(&points, &labels, &spec).unwrap();
        assert_eq!(zm.training_accuracy, 1.0);
        // every well's cell carries its own label
        for (p, &l) in points.iter().zip(&labels) {
            let ix = zm
                .xs
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - p.0).abs().partial_cmp(&(b.1 - p.0).abs()).unwrap())
                .unwrap()
                .0;
            let iy = zm
                .ys
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - p.1).abs().partial_cmp(&(b.1 - p.1).abs()).unwrap())
                .unwrap()
                .0;
            assert_eq!(zm.labels[iy][ix], l);
        }
    }

    #[test]
    fn xor_defeats_linear_but_not_rbf() {
        let points = vec![(0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (1.0, 0.0)];
        let labels = vec![0, 0, 1, 1];
        let linear = MultiClassSvm::fit(&points, &labels, Kernel::Linear, 100.0, 2).unwrap();
        assert!(linear.training_accuracy(&points, &labels) < 1.0);
        let rbf = MultiClassSvm::fit(
            &points,
            &labels,
            Kernel::Rbf { gamma: 3.0 },
            100.0,
            2,
        )
        .unwrap();
        assert_eq!(rbf.training_accuracy(&points, &labels), 1.0);
    }

    #[test]
    fn singleton_class_becomes_point_buffer() {
        let points = vec![(0.0, 0.0), (0.3, 0.1), (5.0, 5.0), (5.2, 4.9), (-4.0, 6.0)];
        let labels = vec![0, 0, 1, 1, 7];
        let zm = zone_map(&points, &labels, &ZoneSpec::default()).unwrap();
        assert_eq!(zm.singleton_classes, vec![7]);
        // its own cell carries the singleton label
        let p = points[4];
        let ix = zm
            .xs
            .iter()
            .position(|&x| (x - p.0).abs() <= (zm.xs[1] - zm.xs[0]) / 2.0 + 1e-12)
            .unwrap();
        let iy = zm
            .ys
            .iter()
            .position(|&y| (y - p.1).abs() <= (zm.ys[1] - zm.ys[0]) / 2.0 + 1e-12)
            .unwrap();
        assert_eq!(zm.labels[iy][ix], 7);
    }

    #[test]
    fn polygons_cover_every_label_and_close() {
        let points = vec![(0.0, 0.0), (0.5, 0.2), (5.0, 5.0), (5.5, 5.2)];
        let labels = vec![0, 0, 1, 1];
        let spec = ZoneSpec {
            kernel: Kernel::Linear,
            c: 10.0,
            resolution: 16,
            seed: 3,
            margin: 0.05,
        };
        let zm = zone_map(&points, &labels, &spec).unwrap();
        let poly_labels: Vec<usize> = zm.polygons.iter().map(|p| p.label).collect();
        assert_eq!(poly_labels, vec![0, 1]);
        for poly in &zm.polygons {
            assert!(!poly.rings.is_empty());
            for ring in &poly.rings {
                assert_eq!(ring.first(), ring.last());
                assert!(ring.len() >= 5);
            }
        }
    }

    #[test]
    fn training_is_deterministic_for_a_seed() {
        let points: Vec<(f64, f64)> = (0..20)
            .map(|i| ((i % 5) as f64 + 0.01 * i as f64, (i / 5) as f64))
            .collect();
        let labels: Vec<usize> = (0..20).map(|i| (i % 5) / 3).collect();
        let a = MultiClassSvm::fit(&points, &labels, Kernel::Rbf { gamma: 0.8 }, 5.0, 9).unwrap();
        let b = MultiClassSvm::fit(&points, &labels, Kernel::Rbf { gamma: 0.8 }, 5.0, 9).unwrap();
        for i in 0..a.machines.len() {
            assert_eq!(a.machines[i].coef, b.machines[i].coef);
            assert_eq!(a.machines[i].bias, b.machines[i].bias);
        }
    }
}
