//! Reliability clustering: 1-D k-means with k = 2.
//!
//! Devices are partitioned into a high-reliability cluster `M_HR` and a
//! low-reliability cluster `M_LR` by Lloyd iteration on the combined
//! reliability value. Centroids start at the minimum and maximum of the
//! values, which is deterministic, never produces an empty cluster, and for
//! k = 2 in one dimension converges to the same fixed points as well-seeded
//! random starts. Values equidistant from both centroids go to the low
//! cluster so borderline devices get the stronger (replication) policy.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::DeviceId;

/// Spread below which all values are treated as one cluster.
const DEGENERATE_SPREAD: f64 = 1e-12;

const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cannot cluster an empty input")]
    EmptyInput,
}

/// Result of a k-means run over 1-D values.
#[derive(Debug, Clone)]
pub struct Kmeans1d {
    /// Cluster index per input value.
    pub assignments: Vec<usize>,
    /// Final centroid per cluster, ascending.
    pub centroids: Vec<f64>,
    /// Within-cluster sum of squared distances after each iteration.
    pub wcss_per_iter: Vec<f64>,
}

/// Lloyd iteration: assign each value to the nearest centroid, recompute
/// centroids as means, until assignments stop changing or the iteration cap
/// is hit. The seed is kept in the interface for forward compatibility; the
/// min/max initializer does not consume it.
pub fn kmeans_1d(values: &[f64], k: usize, _seed: u64) -> Result<Kmeans1d, ClusterError> {
    if values.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    assert!(k >= 1, "k must be at least 1");
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    if k == 1 || max - min < DEGENERATE_SPREAD {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let wcss = values.iter().map(|v| (v - mean).powi(2)).sum();
        return Ok(Kmeans1d {
            assignments: vec![0; values.len()],
            centroids: vec![mean],
            wcss_per_iter: vec![wcss],
        });
    }

    let mut centroids: Vec<f64> =
        (0..k).map(|i| min + i as f64 * (max - min) / (k - 1) as f64).collect();
    let mut assignments = vec![0usize; values.len()];
    let mut wcss_per_iter = Vec::new();

    for _ in 0..MAX_ITERATIONS {
        // Nearest centroid; on a tie the lower centroid wins (strict `<`
        // while scanning ascending centroids).
        let mut changed = false;
        for (i, &v) in values.iter().enumerate() {
            let mut best = 0usize;
            let mut best_dist = (v - centroids[0]).abs();
            for (j, &c) in centroids.iter().enumerate().skip(1) {
                let dist = (v - c).abs();
                if dist < best_dist {
                    best = j;
                    best_dist = dist;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        let wcss = values
            .iter()
            .zip(&assignments)
            .map(|(v, &a)| (v - centroids[a]).powi(2))
            .sum();
        wcss_per_iter.push(wcss);

        if !changed && wcss_per_iter.len() > 1 {
            break;
        }
        // Recompute centroids as cluster means; an empty cluster keeps its
        // previous centroid.
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (v, &a) in values.iter().zip(&assignments) {
            sums[a] += v;
            counts[a] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j] / counts[j] as f64;
            }
        }
    }
    Ok(Kmeans1d { assignments, centroids, wcss_per_iter })
}

/// The two reliability clusters.
#[derive(Debug, Clone)]
pub struct ClusterSplit {
    /// High-reliability cluster `M_HR`.
    pub high: BTreeSet<DeviceId>,
    /// Low-reliability cluster `M_LR`.
    pub low: BTreeSet<DeviceId>,
    pub centroid_high: f64,
    pub centroid_low: f64,
}

impl ClusterSplit {
    pub fn is_high(&self, id: &str) -> bool {
        self.high.contains(id)
    }
}

/// Splits devices into high/low reliability clusters with 2-means over their
/// reliability values. The cluster with the larger centroid becomes `M_HR`.
/// With no spread in the values, everything is `M_HR` (identical devices give
/// k-means no signal, and checkpointing is the cheaper default).
pub fn split_by_reliability(scored: &[(DeviceId, f64)], seed: u64) -> ClusterSplit {
    assert!(!scored.is_empty(), "at least one device required");
    let values: Vec<f64> = scored.iter().map(|(_, r)| *r).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if scored.len() == 1 || max - min < DEGENERATE_SPREAD {
        return ClusterSplit {
            high: scored.iter().map(|(id, _)| id.clone()).collect(),
            low: BTreeSet::new(),
            centroid_high: values.iter().sum::<f64>() / values.len() as f64,
            centroid_low: values.iter().sum::<f64>() / values.len() as f64,
        };
    }
    let run = kmeans_1d(&values, 2, seed).expect("non-empty input");
    // Min/max initialization keeps centroid order, but read it explicitly.
    let (lo_cluster, hi_cluster) =
        if run.centroids[0] <= run.centroids[1] { (0usize, 1usize) } else { (1, 0) };
    let mut high = BTreeSet::new();
    let mut low = BTreeSet::new();
    for ((id, _), &a) in scored.iter().zip(&run.assignments) {
        if a == hi_cluster {
            high.insert(id.clone());
        } else {
            low.insert(id.clone());
        }
    }
    ClusterSplit {
        high,
        low,
        centroid_high: run.centroids[hi_cluster],
        centroid_low: run.centroids[lo_cluster],
    }
}
