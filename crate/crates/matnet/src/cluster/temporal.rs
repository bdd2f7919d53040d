//! Temporal clustering: k-means-style iteration with normalized DTW as the
//! similarity measure and medoid centers, plus adaptive sub-clustering of
//! clusters whose internal variation exceeds a threshold.

use super::dtw::{dtw_normalized, DtwWeights, LocalMetric};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct TemporalParams {
    pub weights: DtwWeights<f64>,
    pub metric: LocalMetric,
    pub max_iters: usize,
}

impl Default for TemporalParams {
    fn default() -> Self {
        TemporalParams {
            weights: DtwWeights::equal(),
            metric: LocalMetric::SquaredEuclidean,
            max_iters: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TemporalClustering {
    pub k: usize,
    /// Medoid series index per cluster.
    pub medoids: Vec<usize>,
    pub assignment: Vec<usize>,
    /// Total within-cluster normalized-DTW cost.
    pub cost: f64,
    pub cost_trace: Vec<f64>,
}

/// Full pairwise normalized-DTW matrix; `d[i][j]` is dist(series_i, series_j).
pub fn pairwise_normalized_dtw(series: &[Vec<f64>], params: &TemporalParams) -> Result<Vec<Vec<f64>>> {
    let n = series.len();
    let mut d = vec![vec![0.0; n]; n];
    let symmetric = params.weights.w_h == params.weights.w_v;
    for i in 0..n {
        for j in (i + 1)..n {
            let dij = dtw_normalized(&series[i], &series[j], params.weights, params.metric)?;
            d[i][j] = dij;
            d[j][i] = if symmetric {
                dij
            } else {
                dtw_normalized(&series[j], &series[i], params.weights, params.metric)?
            };
        }
    }
    Ok(d)
}

fn kmeanspp_medoids(dist: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = dist.len();
    let mut medoids = vec![rng.gen_range(0..n)];
    while medoids.len() < k {
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                medoids
                    .iter()
                    .map(|&m| dist[i][m] * dist[i][m])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = n - 1;
            for (i, w) in weights.iter().enumerate() {
                if target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            (0..n).find(|i| !medoids.contains(i)).unwrap_or(0)
        };
        if medoids.contains(&next) {
            if let Some(i) = (0..n).find(|i| !medoids.contains(i)) {
                medoids.push(i);
            } else {
                break;
            }
        } else {
            medoids.push(next);
        }
    }
    medoids
}

/// Lloyd-style iteration on a precomputed distance matrix: assign to the
/// nearest medoid, then move each medoid to the member minimizing its
/// cluster's summed distance.
pub fn cluster_on_matrix(
    dist: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<TemporalClustering> {
    let n = dist.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "temporal clustering: k = {k} must be in 1..={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let medoids = kmeanspp_medoids(dist, k, &mut rng);
    cluster_on_matrix_with_init(dist, &medoids, max_iters)
}

/// Same iteration from explicit initial medoids (used by the permutation
/// tests and the adaptive splitter).
pub fn cluster_on_matrix_with_init(
    dist: &[Vec<f64>],
    init_medoids: &[usize],
    max_iters: usize,
) -> Result<TemporalClustering> {
    let n = dist.len();
    let k = init_medoids.len();
    let mut medoids = init_medoids.to_vec();
    let mut assignment = vec![0usize; n];
    let mut cost_trace = Vec::new();
    for _ in 0..max_iters {
        // assignment step
        let mut cost = 0.0;
        for i in 0..n {
            let (mut best_c, mut best_d) = (0usize, f64::INFINITY);
            for (c, &m) in medoids.iter().enumerate() {
                if dist[i][m] < best_d {
                    best_d = dist[i][m];
                    best_c = c;
                }
            }
            assignment[i] = best_c;
            cost += best_d;
        }
        cost_trace.push(cost);
        // medoid update
        let mut new_medoids = medoids.clone();
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| assignment[i] == c).collect();
            if members.is_empty() {
                // take the point farthest from its current medoid
                let far = (0..n)
                    .max_by(|&a, &b| {
                        dist[a][medoids[assignment[a]]]
                            .partial_cmp(&dist[b][medoids[assignment[b]]])
                            .unwrap()
                            .then(b.cmp(&a))
                    })
                    .expect("nonempty series set");
                log::warn!("temporal clustering: cluster {c} emptied; re-seeded from series {far}");
                new_medoids[c] = far;
                continue;
            }
            let best = members
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let ca: f64 = members.iter().map(|&i| dist[i][a]).sum();
                    let cb: f64 = members.iter().map(|&i| dist[i][b]).sum();
                    ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
                })
                .expect("members nonempty");
            new_medoids[c] = best;
        }
        if new_medoids == medoids {
            break;
        }
        medoids = new_medoids;
    }
    let cost = *cost_trace.last().expect("at least one iteration");
    Ok(TemporalClustering {
        k,
        medoids,
        assignment,
        cost,
        cost_trace,
    })
}

/// k-means/DTW clustering of raw series.
pub fn temporal_kmeans(
    series: &[Vec<f64>],
    k: usize,
    params: &TemporalParams,
    seed: u64,
) -> Result<TemporalClustering> {
    if series.iter().any(|s| s.is_empty()) {
        return Err(Error::invalid("temporal clustering: empty series"));
    }
    let dist = pairwise_normalized_dtw(series, params)?;
    cluster_on_matrix(&dist, k, seed, params.max_iters)
}

/// Mean pairwise normalized DTW among the members of one cluster.
pub fn internal_variation(dist: &[Vec<f64>], members: &[usize]) -> f64 {
    if members.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            total += 0.5 * (dist[i][j] + dist[j][i]);
            pairs += 1;
        }
    }
    total / pairs as f64
}

/// Recursively splits clusters whose internal variation exceeds `threshold`
/// into two, until every cluster passes or the depth cap is reached. Labels
/// come back flattened, ordered by each cluster's smallest member index.
pub fn adaptive_split(
    dist: &[Vec<f64>],
    model: &TemporalClustering,
    threshold: f64,
    seed: u64,
    max_depth: usize,
) -> Result<TemporalClustering> {
    let n = dist.len();
    let mut final_groups: Vec<Vec<usize>> = Vec::new();
    let mut queue: Vec<(Vec<usize>, usize)> = (0..model.k)
        .map(|c| {
            (
                (0..n).filter(|&i| model.assignment[i] == c).collect::<Vec<_>>(),
                0usize,
            )
        })
        .filter(|(members, _)| !members.is_empty())
        .collect();

    while let Some((members, depth)) = queue.pop() {
        let variation = internal_variation(dist, &members);
        if variation <= threshold || members.len() < 2 || depth >= max_depth {
            final_groups.push(members);
            continue;
        }
        // restrict the matrix to the members and split in two
        let sub: Vec<Vec<f64>> = members
            .iter()
            .map(|&i| members.iter().map(|&j| dist[i][j]).collect())
            .collect();
        let split = cluster_on_matrix(&sub, 2, seed.wrapping_add(depth as u64 + 1), 100)?;
        let mut parts = vec![Vec::new(), Vec::new()];
        for (local, &global) in members.iter().enumerate() {
            parts[split.assignment[local]].push(global);
        }
        if parts.iter().any(|p| p.is_empty()) {
            final_groups.push(members); // could not split further
            continue;
        }
        for part in parts {
            queue.push((part, depth + 1));
        }
    }

    final_groups.sort_by_key(|g| *g.iter().min().expect("nonempty group"));
    let mut assignment = vec![0usize; n];
    let mut medoids = Vec::with_capacity(final_groups.len());
    let mut cost = 0.0;
    for (label, group) in final_groups.iter().enumerate() {
        let medoid = group
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let ca: f64 = group.iter().map(|&i| dist[i][a]).sum();
                let cb: f64 = group.iter().map(|&i| dist[i][b]).sum();
                ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
            })
            .expect("nonempty group");
        medoids.push(medoid);
        for &i in group {
            assignment[i] = label;
            cost += dist[i][medoid];
        }
    }
    Ok(TemporalClustering {
        k: final_groups.len(),
        medoids,
        assignment,
        cost,
        cost_trace: vec![cost],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(level: f64, n: usize) -> Vec<f64> {
        vec![level; n]
    }

    fn ramp(slope: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| slope * i as f64).collect()
    }

    #[test]
    fn separates_flat_low_from_ramp_high() {
        let mut series = Vec::new();
        for i in 0..5 {
            series.push(flat(0.1 * i as f64, 12));
        }
        for i in 0..5 {
            series.push(ramp(1.0 + 0.1 * i as f64, 12));
        }
        let model = temporal_kmeans(&series, 2, &TemporalParams::default(), 3).unwrap();
        let first = model.assignment[0];
        assert!(model.assignment[..5].iter().all(|&a| a == first));
        assert!(model.assignment[5..].iter().all(|&a| a != first));

        // exhaustive 2-partition check on the same distance matrix
        let dist = pairwise_normalized_dtw(&series, &TemporalParams::default()).unwrap();
        let n = series.len();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << (n - 1)) {
            let mut groups = vec![Vec::new(), Vec::new()];
            for i in 0..n {
                let side = if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as usize };
                groups[side].push(i);
            }
            if groups.iter().any(|g| g.is_empty()) {
                continue;
            }
            let mut cost = 0.0;
            for g in &groups {
                let medoid_cost = g
                    .iter()
                    .map(|&m| g.iter().map(|&i| dist[i][m]).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                cost += medoid_cost;
            }
            best = best.min(cost);
        }
        assert!((model.cost - best).abs() <= 1e-9 * best.max(1e-12));
    }

    #[test]
    fn k_equals_n_gives_zero_cost() {
        let series: Vec<Vec<f64>> = (0..6).map(|i| ramp(0.3 * i as f64 + 0.1, 8)).collect();
        let model = temporal_kmeans(&series, 6, &TemporalParams::default(), 1).unwrap();
        assert_eq!(model.cost, 0.0);
    }

    #[test]
    fn objective_non_increasing() {
        let series: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                (0..10)
                    .map(|t| ((i * 7 + t) as f64 * 0.61).sin() + 0.2 * i as f64)
                    .collect()
            })
            .collect();
        let model = temporal_kmeans(&series, 3, &TemporalParams::default(), 5).unwrap();
        for w in model.cost_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn permutation_with_mapped_init_gives_identical_partition() {
        let series: Vec<Vec<f64>> = (0..9)
            .map(|i| {
                (0..10)
                    .map(|t| ((i % 3) as f64 * 2.0 + (t as f64 * 0.3).cos()))
                    .collect()
            })
            .collect();
        let params = TemporalParams::default();
        let dist = pairwise_normalized_dtw(&series, &params).unwrap();
        let init = [0usize, 1, 2];
        let base = cluster_on_matrix_with_init(&dist, &init, 100).unwrap();

        // shuffle: i -> (i*4+2) mod 9 is a permutation of 0..9
        let perm: Vec<usize> = (0..9).map(|i| (i * 4 + 2) % 9).collect();
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| series[i].clone()).collect();
        let dist_s = pairwise_normalized_dtw(&shuffled, &params).unwrap();
        let init_mapped: Vec<usize> = init
            .iter()
            .map(|&m| perm.iter().position(|&p| p == m).unwrap())
            .collect();
        let moved = cluster_on_matrix_with_init(&dist_s, &init_mapped, 100).unwrap();
        for (new_idx, &orig) in perm.iter().enumerate() {
            assert_eq!(moved.assignment[new_idx], base.assignment[orig]);
        }
    }

    #[test]
    fn adaptive_split_behaviour() {
        // cluster 0: two obvious families; cluster 1: tight
        let mut series = Vec::new();
        for _ in 0..4 {
            series.push(flat(0.0, 10));
        }
        for _ in 0..4 {
            series.push(flat(5.0, 10));
        }
        for _ in 0..4 {
            series.push(ramp(3.0, 10));
        }
        let params = TemporalParams::default();
        let dist = pairwise_normalized_dtw(&series, &params).unwrap();
        // start from a deliberately coarse 2-cluster model
        let coarse = cluster_on_matrix_with_init(&dist, &[0, 8], 100).unwrap();

        // infinite threshold: nothing splits
        let same = adaptive_split(&dist, &coarse, f64::INFINITY, 9, 8).unwrap();
        assert_eq!(same.k, coarse.k);

        // moderate threshold: exactly the mixed flat cluster splits
        let split = adaptive_split(&dist, &coarse, 0.5, 9, 8).unwrap();
        assert_eq!(split.k, 3);
        let l0 = split.assignment[0];
        assert!(split.assignment[..4].iter().all(|&a| a == l0));
        let l1 = split.assignment[4];
        assert!(split.assignment[4..8].iter().all(|&a| a == l1));
        assert_ne!(l0, l1);

        // all clusters already under threshold: unchanged
        let fine = adaptive_split(&dist, &split, 1.0e9, 9, 8).unwrap();
        assert_eq!(fine.k, split.k);
        assert_eq!(fine.assignment, split.assignment);
    }

    #[test]
    fn rejects_too_many_clusters() {
        let series: Vec<Vec<f64>> = (0..3).map(|i| flat(i as f64, 5)).collect();
        assert!(temporal_kmeans(&series, 4, &TemporalParams::default(), 1).is_err());
    }
}
