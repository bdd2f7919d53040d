//! k-prototypes clustering of mixed numeric/categorical records.
//!
//! Cost of a record against a prototype is squared Euclidean distance on the
//! numeric attributes plus gamma times the number of categorical mismatches;
//! the total cost zeta sums each record's distance to its assigned
//! prototype. The fit follows the classic online scheme: seed k prototypes,
//! allocate each object updating the receiving prototype immediately, then
//! run reallocation sweeps until a full pass moves nothing.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One data object: standardized numeric attributes plus vocabulary-encoded
/// categorical attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedRecord {
    pub numeric: Vec<f64>,
    pub categorical: Vec<u32>,
}

/// Squared Euclidean numeric distance plus gamma-weighted mismatch count.
pub fn kprototypes_distance(
    record: &MixedRecord,
    numeric_center: &[f64],
    categorical_mode: &[u32],
    gamma: f64,
) -> Result<f64> {
    if record.numeric.len() != numeric_center.len()
        || record.categorical.len() != categorical_mode.len()
    {
        return Err(Error::invalid(format!(
            "k-prototypes: dimension mismatch (record {}x{}, prototype {}x{})",
            record.numeric.len(),
            record.categorical.len(),
            numeric_center.len(),
            categorical_mode.len()
        )));
    }
    let numeric: f64 = record
        .numeric
        .iter()
        .zip(numeric_center)
        .map(|(a, c)| (a - c) * (a - c))
        .sum();
    let mismatches = record
        .categorical
        .iter()
        .zip(categorical_mode)
        .filter(|(a, c)| a != c)
        .count();
    Ok(numeric + gamma * mismatches as f64)
}

#[derive(Debug, Clone)]
pub struct KPrototypesModel {
    pub k: usize,
    pub gamma: f64,
    pub numeric_centers: Vec<Vec<f64>>,
    pub categorical_modes: Vec<Vec<u32>>,
    pub assignment: Vec<usize>,
    /// Final cost zeta.
    pub cost: f64,
    /// Cost after the initial allocation and after each sweep.
    pub cost_trace: Vec<f64>,
    pub sweeps: usize,
}

/// Running per-cluster statistics: numeric sums and categorical counts.
struct ClusterStats {
    count: usize,
    numeric_sum: Vec<f64>,
    /// `[attribute][category] -> members`.
    cat_counts: Vec<Vec<usize>>,
}

impl ClusterStats {
    fn new(m_r: usize, vocab_sizes: &[usize]) -> Self {
        ClusterStats {
            count: 0,
            numeric_sum: vec![0.0; m_r],
            cat_counts: vocab_sizes.iter().map(|&v| vec![0; v]).collect(),
        }
    }

    fn add(&mut self, rec: &MixedRecord) {
        self.count += 1;
        for (s, v) in self.numeric_sum.iter_mut().zip(&rec.numeric) {
            *s += v;
        }
        for (counts, &c) in self.cat_counts.iter_mut().zip(&rec.categorical) {
            counts[c as usize] += 1;
        }
    }

    fn remove(&mut self, rec: &MixedRecord) {
        self.count -= 1;
        for (s, v) in self.numeric_sum.iter_mut().zip(&rec.numeric) {
            *s -= v;
        }
        for (counts, &c) in self.cat_counts.iter_mut().zip(&rec.categorical) {
            counts[c as usize] -= 1;
        }
    }

    fn mean(&self) -> Vec<f64> {
        self.numeric_sum
            .iter()
            .map(|s| s / self.count.max(1) as f64)
            .collect()
    }

    /// Most common category per attribute; ties take the smallest id.
    fn mode(&self) -> Vec<u32> {
        self.cat_counts
            .iter()
            .map(|counts| {
                counts
                    .iter()
                    .enumerate()
                    .max_by(|(ia, ca), (ib, cb)| ca.cmp(cb).then(ib.cmp(ia)))
                    .map(|(i, _)| i as u32)
                    .unwrap_or(0)
            })
            .collect()
    }
}

/// Default categorical weight: half the mean per-column numeric standard
/// deviation (0.5 exactly on standardized data).
pub fn default_gamma(records: &[MixedRecord]) -> f64 {
    let m_r = records.first().map_or(0, |r| r.numeric.len());
    if m_r == 0 || records.len() < 2 {
        return 0.5;
    }
    let n = records.len() as f64;
    let mut total_sd = 0.0;
    for col in 0..m_r {
        let mean: f64 = records.iter().map(|r| r.numeric[col]).sum::<f64>() / n;
        let var: f64 = records
            .iter()
            .map(|r| (r.numeric[col] - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        total_sd += var.sqrt();
    }
    0.5 * total_sd / m_r as f64
}

fn seed_prototypes(records: &[MixedRecord], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = records.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    while chosen.len() < k {
        // k-means++ on the numeric part; all-zero weights fall back to the
        // lowest-index unchosen record.
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                chosen
                    .iter()
                    .map(|&c| {
                        records[i]
                            .numeric
                            .iter()
                            .zip(&records[c].numeric)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                    })
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
            // numeric part carries no information: uniform over unchosen
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            if free.is_empty() {
                break;
            }
            free[rng.gen_range(0..free.len())]
        };
        if chosen.contains(&next) {
            // zero-weight duplicate pick: take the first unchosen record
            if let Some(i) = (0..n).find(|i| !chosen.contains(i)) {
                chosen.push(i);
            } else {
                break;
            }
        } else {
            chosen.push(next);
        }
    }
    chosen
}

/// Fits k prototypes with `n_init` seeded restarts, keeping the lowest-cost
/// model. Deterministic for a fixed seed.
pub fn kprototypes_fit(
    records: &[MixedRecord],
    k: usize,
    gamma: f64,
    seed: u64,
    n_init: usize,
    max_sweeps: usize,
) -> Result<KPrototypesModel> {
    let n = records.len();
    if n == 0 {
        return Err(Error::invalid("k-prototypes: empty dataset"));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "k-prototypes: k = {k} must be in 1..={n}"
        )));
    }
    let m_r = records[0].numeric.len();
    let m_c = records[0].categorical.len();
    if m_r + m_c == 0 {
        return Err(Error::invalid("k-prototypes: records have no attributes"));
    }
    for (i, r) in records.iter().enumerate() {
        if r.numeric.len() != m_r || r.categorical.len() != m_c {
            return Err(Error::invalid(format!(
                "k-prototypes: record {i} has inconsistent dimensions"
            )));
        }
    }
    let mut best: Option<KPrototypesModel> = None;
    for restart in 0..n_init.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart as u64));
        let model = fit_once(records, k, gamma, max_sweeps, &mut rng)?;
        if best.as_ref().is_none_or(|b| model.cost < b.cost) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn fit_once(
    records: &[MixedRecord],
    k: usize,
    gamma: f64,
    max_sweeps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<KPrototypesModel> {
    let n = records.len();
    let m_r = records[0].numeric.len();
    let vocab_sizes: Vec<usize> = (0..records[0].categorical.len())
        .map(|a| records.iter().map(|r| r.categorical[a] as usize + 1).max().unwrap_or(1))
        .collect();

    // Step 1: initial prototypes are the seeded records themselves.
    let seeds = seed_prototypes(records, k, rng);
    let mut centers: Vec<Vec<f64>> = seeds.iter().map(|&i| records[i].numeric.clone()).collect();
    let mut modes: Vec<Vec<u32>> = seeds.iter().map(|&i| records[i].categorical.clone()).collect();
    let mut stats: Vec<ClusterStats> = (0..k).map(|_| ClusterStats::new(m_r, &vocab_sizes)).collect();

    let nearest = |rec: &MixedRecord, centers: &[Vec<f64>], modes: &[Vec<u32>]| -> Result<usize> {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let d = kprototypes_distance(rec, &centers[c], &modes[c], gamma)?;
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        Ok(best)
    };

    // Step 2: online allocation with immediate prototype updates.
    let mut assignment = vec![0usize; n];
    for (i, rec) in records.iter().enumerate() {
        let c = nearest(rec, &centers, &modes)?;
        assignment[i] = c;
        stats[c].add(rec);
        centers[c] = stats[c].mean();
        modes[c] = stats[c].mode();
    }

    let total_cost = |assignment: &[usize], centers: &[Vec<f64>], modes: &[Vec<u32>]| -> Result<f64> {
        let mut z = 0.0;
        for (rec, &c) in records.iter().zip(assignment) {
            z += kprototypes_distance(rec, &centers[c], &modes[c], gamma)?;
        }
        Ok(z)
    };

    let mut cost_trace = vec![total_cost(&assignment, &centers, &modes)?];

    // Steps 3-4: reallocation sweeps until a full no-change cycle.
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut moved = 0usize;
        for (i, rec) in records.iter().enumerate() {
            let current = assignment[i];
            let target = nearest(rec, &centers, &modes)?;
            if target != current {
                stats[current].remove(rec);
                stats[target].add(rec);
                centers[current] = stats[current].mean();
                modes[current] = stats[current].mode();
                centers[target] = stats[target].mean();
                modes[target] = stats[target].mode();
                assignment[i] = target;
                moved += 1;
            }
        }
        // Re-seed any emptied cluster from the globally farthest record.
        for c in 0..k {
            if stats[c].count == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = kprototypes_distance(
                            &records[a],
                            &centers[assignment[a]],
                            &modes[assignment[a]],
                            gamma,
                        )
                        .unwrap_or(0.0);
                        let db = kprototypes_distance(
                            &records[b],
                            &centers[assignment[b]],
                            &modes[assignment[b]],
                            gamma,
                        )
                        .unwrap_or(0.0);
                        da.partial_cmp(&db).unwrap().then(b.cmp(&a))
                    })
                    .expect("nonempty dataset");
                log::warn!("k-prototypes: cluster {c} emptied; re-seeded from record {far}");
                let old = assignment[far];
                stats[old].remove(&records[far]);
                centers[old] = stats[old].mean();
                modes[old] = stats[old].mode();
                stats[c].add(&records[far]);
                centers[c] = stats[c].mean();
                modes[c] = stats[c].mode();
                assignment[far] = c;
                moved += 1;
            }
        }
        cost_trace.push(total_cost(&assignment, &centers, &modes)?);
        if moved == 0 {
            break;
        }
    }

    let cost = *cost_trace.last().expect("trace nonempty");
    Ok(KPrototypesModel {
        k,
        gamma,
        numeric_centers: centers,
        categorical_modes: modes,
        assignment,
        cost,
        cost_trace,
        sweeps,
    })
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Exhaustive two-cluster search: best cost over all assignments with
    //! mean/mode centers, independent of the online heuristic.

    use super::*;

    pub fn best_two_cluster_cost(records: &[MixedRecord], gamma: f64) -> f64 {
        let n = records.len();
        assert!(n <= 16, "oracle is exponential");
        let m_r = records[0].numeric.len();
        let vocab: Vec<usize> = (0..records[0].categorical.len())
            .map(|a| records.iter().map(|r| r.categorical[a] as usize + 1).max().unwrap())
            .collect();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << (n - 1)) {
            // record 0 always in cluster 0 (halves the label symmetry)
            let mut parts = [ClusterStats::new(m_r, &vocab), ClusterStats::new(m_r, &vocab)];
            for (i, rec) in records.iter().enumerate() {
                let side = if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as usize };
                parts[side].add(rec);
            }
            if parts[0].count == 0 || parts[1].count == 0 {
                continue;
            }
            let centers = [parts[0].mean(), parts[1].mean()];
            let modes = [parts[0].mode(), parts[1].mode()];
            let mut cost = 0.0;
            for (i, rec) in records.iter().enumerate() {
                let side = if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as usize };
                cost += kprototypes_distance(rec, &centers[side], &modes[side], gamma).unwrap();
            }
            if cost < best {
                best = cost;
            }
        }
        best
    }
}
