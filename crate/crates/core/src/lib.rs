//! Gravitational federated clustering.
//!
//! Clients privatize their points with the Laplace mechanism, run k-means
//! locally and upload weighted centroids once. The server turns those
//! centroids into a softened potential field, sweeps its superlevel sets and
//! reads the global centroids off the leaves of the resulting merge tree.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below name the common instantiations.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod field;
pub mod harness;
pub mod heuristics;
pub mod local;
pub mod metrics;
pub mod points;
pub mod privacy;
pub mod rng;
pub mod scalar;
pub mod topology;

pub use error::{Error, Result};
pub use points::Points;
pub use scalar::Scalar;

pub type DatasetF64 = dataset::Dataset<f64>;
pub type DatasetF32 = dataset::Dataset<f32>;
pub type PointsF64 = Points<f64>;
pub type PointsF32 = Points<f32>;
pub type WeightedCentroidF64 = local::WeightedCentroid<f64>;
pub type WeightedCentroidF32 = local::WeightedCentroid<f32>;
pub type PotentialFieldF64 = field::PotentialField<f64>;
pub type PotentialFieldF32 = field::PotentialField<f32>;
pub type MergeTreeF64 = topology::MergeTree<f64>;
pub type MergeTreeF32 = topology::MergeTree<f32>;
