//! Clustering of activations and spline codes, NMF directions and cosine
//! profiles.

pub mod dbscan;
pub mod metric;
pub mod nmf;
pub mod profile;

pub use dbscan::{cluster, default_eps, ClusterLabels, DEFAULT_MIN_PTS, NOISE};
pub use metric::{distance_matrix, DistanceMatrix, Item, Metric, MetricKind, MetricRegistry};
pub use nmf::{nmf, shift_to_min, NmfFactors};
pub use profile::{
    adjusted_rand_index, cosine_histogram, cosine_profile, monosemanticity_score, CosineProfile,
    Monosemanticity,
};
