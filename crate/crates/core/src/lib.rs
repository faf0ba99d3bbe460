//! Polytope-partition analysis for small piecewise-linear networks.
//!
//! A ReLU network cuts each layer's input space into convex polytopes, and on
//! every polytope the downstream network is one affine map. This crate builds
//! and trains tiny networks, names polytopes by their spline codes, recovers
//! the affine map of each code, and measures how densely polytope boundaries
//! are packed between points, along paths, across 2-D slices and along
//! scaling rays.
//!
//! Module map:
//!
//! - [`net`]: networks, traces, training, file format
//! - [`data`]: labeled datasets and the Gaussian blob generator
//! - [`code`]: spline codes, region affines, region constraints, soft codes
//! - [`density`]: pair/path/local boundary density and scaling sweeps
//! - [`slice`]: 2-D boundary heatmaps
//! - [`cluster`]: distance matrices, DBSCAN, NMF, cosine profiles
//! - [`oracle`]: exhaustive lattice enumeration of regions for ground truth
//! - [`stats`]: Welch's t-test and bootstrap intervals
//! - [`repro`]: the seeded end-to-end reproduction pipeline

pub mod cluster;
pub mod code;
pub mod data;
pub mod density;
pub mod error;
pub mod linalg;
pub mod net;
pub mod oracle;
pub mod output;
pub mod repro;
pub mod seed;
pub mod slice;
pub mod stats;

pub use code::{LayerSpan, RegionAffine, RegionConstraints, SoftCode, SplineCode};
pub use data::LabeledDataset;
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use net::{ActivationKind, ActivationTrace, Layer, PwlNetwork, TrainConfig};
