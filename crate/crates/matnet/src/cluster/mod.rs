//! Spatio-temporal well clustering and zone delineation.
//!
//! Spatial clustering handles mixed static attributes with k-prototypes;
//! temporal clustering aligns production/injection signals with normalized
//! DTW under a k-medoids iteration, optionally sub-splitting heterogeneous
//! clusters. The two label sets fuse by cross product (small groups merged
//! into their nearest neighbor by prototype distance), and an SVM traces the
//! zone boundaries in the physical plane.

pub mod dtw;
pub mod elbow;
pub mod feature;
pub mod kprototypes;
pub mod svm;
pub mod temporal;

pub use dtw::{dtw, dtw_normalized, DtwResult, DtwWeights, LocalMetric};
pub use elbow::{elbow_from_curve, elbow_select, ElbowResult};
pub use feature::{build_features, RawWells, WellFeatureMatrix};
pub use kprototypes::{default_gamma, kprototypes_distance, kprototypes_fit, KPrototypesModel, MixedRecord};
pub use svm::{zone_map, Kernel, MultiClassSvm, ZoneMap, ZonePolygon, ZoneSpec};
pub use temporal::{
    adaptive_split, pairwise_normalized_dtw, temporal_kmeans, TemporalClustering, TemporalParams,
};

use crate::error::Result;
use std::collections::BTreeMap;

/// Context for measuring distances between fused label groups.
pub struct FusionContext<'a> {
    /// Spatial records (standardized), used for prototype distances.
    pub records: &'a [MixedRecord],
    pub gamma: f64,
    /// One pairwise normalized-DTW matrix per temporal channel.
    pub channel_dists: Vec<&'a [Vec<f64>]>,
}

/// Cross-product fusion of several per-well label vectors, then bottom-up
/// merging of groups smaller than `min_size` into their nearest group by
/// prototype distance. Returns flattened labels in 0..K, ordered by each
/// group's smallest well index.
pub fn fuse_labels(
    label_sets: &[Vec<usize>],
    min_size: usize,
    ctx: &FusionContext,
) -> Result<Vec<usize>> {
    let n = label_sets
        .first()
        .map(|l| l.len())
        .ok_or_else(|| crate::error::Error::invalid("fusion: no label sets"))?;
    for ls in label_sets {
        if ls.len() != n {
            return Err(crate::error::Error::invalid(
                "fusion: label vectors have different lengths",
            ));
        }
    }
    // group wells by their label tuple
    let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for w in 0..n {
        let key: Vec<usize> = label_sets.iter().map(|ls| ls[w]).collect();
        groups.entry(key).or_default().push(w);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();

    // merge undersized groups, smallest first
    while groups.len() > 1 {
        let (idx, _) = match groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.len() < min_size)
            .min_by_key(|(i, g)| (g.len(), *i))
        {
            Some(x) => x,
            None => break,
        };
        let small = groups.remove(idx);
        let nearest = groups
            .iter()
            .enumerate()
            .min_by(|(ia, a), (ib, b)| {
                let da = group_distance(&small, a, ctx);
                let db = group_distance(&small, b, ctx);
                da.partial_cmp(&db).unwrap().then(ia.cmp(ib))
            })
            .map(|(i, _)| i)
            .expect("at least one group left");
        let mut merged = small;
        merged.append(&mut groups[nearest]);
        merged.sort_unstable();
        groups[nearest] = merged;
    }

    groups.sort_by_key(|g| *g.iter().min().expect("nonempty group"));
    let mut labels = vec![0usize; n];
    for (li, g) in groups.iter().enumerate() {
        for &w in g {
            labels[w] = li;
        }
    }
    Ok(labels)
}

/// Prototype distance between two well groups: mixed k-prototypes distance
/// between group centroids plus normalized DTW between channel medoids.
fn group_distance(a: &[usize], b: &[usize], ctx: &FusionContext) -> f64 {
    let proto = |members: &[usize]| -> MixedRecord {
        let m_r = ctx.records[0].numeric.len();
        let m_c = ctx.records[0].categorical.len();
        let mut numeric = vec![0.0; m_r];
        for &w in members {
            for (s, v) in numeric.iter_mut().zip(&ctx.records[w].numeric) {
                *s += v;
            }
        }
        for v in numeric.iter_mut() {
            *v /= members.len() as f64;
        }
        let categorical = (0..m_c)
            .map(|c| {
                let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
                for &w in members {
                    *counts.entry(ctx.records[w].categorical[c]).or_default() += 1;
                }
                counts
                    .into_iter()
                    .max_by(|(ka, ca), (kb, cb)| ca.cmp(cb).then(kb.cmp(ka)))
                    .map(|(k, _)| k)
                    .unwrap_or(0)
            })
            .collect();
        MixedRecord { numeric, categorical }
    };
    let pa = proto(a);
    let pb = proto(b);
    let mut d = kprototypes_distance(&pa, &pb.numeric, &pb.categorical, ctx.gamma).unwrap_or(0.0);

    for dist in &ctx.channel_dists {
        let medoid = |members: &[usize]| -> usize {
            members
                .iter()
                .copied()
                .min_by(|&x, &y| {
                    let cx: f64 = members.iter().map(|&i| dist[i][x]).sum();
                    let cy: f64 = members.iter().map(|&i| dist[i][y]).sum();
                    cx.partial_cmp(&cy).unwrap().then(x.cmp(&y))
                })
                .expect("nonempty group")
        };
        d += dist[medoid(a)][medoid(b)];
    }
    d
}
