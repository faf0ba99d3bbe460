//! Density-based clustering over a precomputed distance matrix.

use std::collections::VecDeque;

use super::metric::DistanceMatrix;
use crate::error::{Error, Result};

pub const NOISE: i64 = -1;
pub const DEFAULT_MIN_PTS: usize = 5;
pub const DEFAULT_EPS_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    pub labels: Vec<i64>,
    pub cluster_count: usize,
}

impl ClusterLabels {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.cluster_count];
        for &l in &self.labels {
            if l >= 0 {
                s[l as usize] += 1;
            }
        }
        s
    }

    /// Renumbers clusters in order of their smallest member index.
    pub fn canonical(&self) -> ClusterLabels {
        let mut map = vec![NOISE; self.cluster_count];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if l < 0 {
                    return NOISE;
                }
                let slot = &mut map[l as usize];
                if *slot < 0 {
                    *slot = next;
                    next += 1;
                }
                *slot
            })
            .collect();
        ClusterLabels {
            labels,
            cluster_count: next as usize,
        }
    }
}

/// `eps = fraction × median pairwise distance`.
pub fn default_eps(dm: &DistanceMatrix) -> f64 {
    DEFAULT_EPS_FRACTION * dm.median()
}

/// DBSCAN. A point is core when at least `min_pts` points (itself included)
/// lie within `eps`. Core points within `eps` of each other share a cluster.
/// A non-core point within `eps` of some core point joins the cluster of its
/// nearest such core point (lowest index on ties); the rest are noise.
/// Clusters are numbered by their lowest-index core point.
pub fn cluster(dm: &DistanceMatrix, eps: f64, min_pts: usize) -> Result<ClusterLabels> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be > 0, got {eps}")));
    }
    if min_pts < 1 {
        return Err(Error::InvalidArgument("min_pts must be >= 1".into()));
    }
    let n = dm.n();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dm.get(i, j) <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut labels = vec![NOISE; n];
    let mut count = 0i64;
    for start in 0..n {
        if !core[start] || labels[start] != NOISE {
            continue;
        }
        labels[start] = count;
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if core[q] && labels[q] == NOISE {
                    labels[q] = count;
                    queue.push_back(q);
                }
            }
        }
        count += 1;
    }

    for p in 0..n {
        if core[p] {
            continue;
        }
        let nearest = neighbors[p]
            .iter()
            .filter(|&&q| core[q])
            .min_by(|&&a, &&b| dm.get(p, a).total_cmp(&dm.get(p, b)).then(a.cmp(&b)));
        if let Some(&q) = nearest {
            labels[p] = labels[q];
        }
    }
    Ok(ClusterLabels {
        labels,
        cluster_count: count as usize,
    })
}
