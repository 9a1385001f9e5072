//! Random walks in growing dimension: the Wiener-spiral path limit, the
//! squared-norm limit laws of three increment models, and the Monte Carlo
//! harness that checks them.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod sampling;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};
pub use geometry::{AlignmentResult, SpiralRef};
pub use harness::{ExperimentConfig, ExperimentKind, Report};
pub use linalg::{GramMatrix, PointCloud, VectorD};
pub use models::{ComponentLaw, Increment, ModelSpec};
pub use sampling::{derive_stream, RadialLaw, SeedSpec, StableLawRef, Stream};
pub use stats::{LimitLaw, TestVerdict};
pub use walk::{OccupancyStats, WalkPath, WalkSummary};
