//! Unsupervised active sample selection under domain shift.
//!
//! Pool samples and their source-style reconstructions are embedded on the
//! unit hypersphere by a small teacher/student head, clustered with
//! spherical k-means, and ranked by how ambiguous their cluster membership is
//! and how far they sit from their reconstruction. The lowest-ranked
//! fraction of the pool is sent for annotation.

pub mod bench;
pub mod clustering;
pub mod dataio;
pub mod geometry;
pub mod pairs;
pub mod pipeline;
pub mod reconproxy;
pub mod selection;
pub mod tinynet;

use thiserror::Error;

pub use geometry::{GeometryError, UnitEmbedding};
pub use pairs::{pool_pairs, PairSource, PairedFeatures};

/// Any failure of the end-to-end pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Train(#[from] tinynet::TrainError),
    #[error(transparent)]
    Cluster(#[from] clustering::ClusterError),
    #[error(transparent)]
    Selection(#[from] selection::SelectionError),
    #[error(transparent)]
    Recon(#[from] reconproxy::ReconError),
    #[error(transparent)]
    Data(#[from] dataio::DataError),
    #[error(transparent)]
    Bench(#[from] bench::BenchError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("sample {0:?} has no reconstruction")]
    UnpairedSample(String),
    #[error("sample {0:?} has no recon_row but the external provider is selected")]
    MissingReconPair(String),
    #[error("no source samples in domain {0:?}")]
    MissingSource(String),
}
