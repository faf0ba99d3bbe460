//! Cosine profiles of clusters against a direction, cluster purity and
//! label agreement.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::dbscan::{ClusterLabels, NOISE};
use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, norm};

pub const HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct CosineProfile {
    /// Cosines keyed by cluster label; noise sits under `-1`.
    pub per_cluster: BTreeMap<i64, Vec<f64>>,
    pub excluded_zero_norm: usize,
}

pub fn cosine_profile(
    direction: &[f64],
    activations: &[Vec<f64>],
    labels: &ClusterLabels,
) -> Result<CosineProfile> {
    check_dim(activations.len(), labels.labels.len())?;
    let dn = norm(direction);
    if dn == 0.0 {
        return Err(Error::InvalidArgument("direction must be nonzero".into()));
    }
    let cosines: Vec<Option<f64>> = activations
        .par_iter()
        .map(|a| {
            check_dim(direction.len(), a.len())?;
            let an = norm(a);
            Ok((an > 0.0).then(|| (dot(direction, a) / (dn * an)).clamp(-1.0, 1.0)))
        })
        .collect::<Result<_>>()?;
    let mut per_cluster: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    let mut excluded = 0;
    for (c, &l) in cosines.iter().zip(&labels.labels) {
        match c {
            Some(v) => per_cluster.entry(l).or_default().push(*v),
            None => excluded += 1,
        }
    }
    Ok(CosineProfile {
        per_cluster,
        excluded_zero_norm: excluded,
    })
}

/// Counts in [`HISTOGRAM_BINS`] equal bins over [−1, 1]; 1.0 lands in the last bin.
pub fn cosine_histogram(values: &[f64]) -> Vec<usize> {
    let mut bins = vec![0; HISTOGRAM_BINS];
    for v in values {
        let i = ((v + 1.0) / 2.0 * HISTOGRAM_BINS as f64).floor();
        bins[(i.max(0.0) as usize).min(HISTOGRAM_BINS - 1)] += 1;
    }
    bins
}

/// Lower edge of histogram bin `i`.
pub fn bin_lower_edge(i: usize) -> f64 {
    -1.0 + 2.0 * i as f64 / HISTOGRAM_BINS as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPurity {
    pub cluster: i64,
    pub size: usize,
    pub majority_class: usize,
    pub purity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Monosemanticity {
    pub clusters: Vec<ClusterPurity>,
    /// Size-weighted mean purity over clusters; noise excluded.
    pub mean_purity: f64,
}

pub fn monosemanticity_score(labels: &ClusterLabels, class_labels: &[usize]) -> Result<Monosemanticity> {
    check_dim(labels.labels.len(), class_labels.len())?;
    let mut counts: BTreeMap<i64, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&l, &c) in labels.labels.iter().zip(class_labels) {
        if l != NOISE {
            *counts.entry(l).or_default().entry(c).or_default() += 1;
        }
    }
    let mut clusters = Vec::new();
    let (mut majority_total, mut member_total) = (0, 0);
    for (cluster, by_class) in counts {
        let size: usize = by_class.values().sum();
        let (&majority_class, &top) = by_class
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .expect("cluster has members");
        majority_total += top;
        member_total += size;
        clusters.push(ClusterPurity {
            cluster,
            size,
            majority_class,
            purity: top as f64 / size as f64,
        });
    }
    Ok(Monosemanticity {
        clusters,
        mean_purity: if member_total > 0 {
            majority_total as f64 / member_total as f64
        } else {
            0.0
        },
    })
}

fn choose2(n: usize) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings. Noise (`-1`) counts as one
/// more group. Returns 1 when both labelings are a single group.
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    let mut table: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut rows: BTreeMap<i64, usize> = BTreeMap::new();
    let mut cols: BTreeMap<i64, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&n| choose2(n)).sum();
    let sa: f64 = rows.values().map(|&n| choose2(n)).sum();
    let sb: f64 = cols.values().map(|&n| choose2(n)).sum();
    let total = choose2(a.len());
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
