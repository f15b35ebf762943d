//! Semantic voxel mapping with uncertainty-weighted robust Bayesian fusion.
//!
//! The library fuses per-pixel class probability distributions coming from an
//! uncertainty-aware segmentation network into a sparse voxel map. Besides the
//! classic Bayesian product update and the usual averaging/voting baselines it
//! implements a robust fusion rule that regularizes each observation towards
//! the uniform distribution and weighs it by a per-class Dirichlet
//! concentration derived from the epistemic (model) uncertainty, so that
//! overconfident outlier predictions cannot single-handedly flip a voxel.
//!
//! Modules:
//! - [`types`]: label sets, simplex vectors, voxel keys, camera geometry.
//! - [`observation`]: MC-sample aggregation, regularization, concentrations.
//! - [`fusion`]: per-voxel state and the four fusion strategies.
//! - [`map`]: sparse voxel hash-map and depth-image integration.
//! - [`sim`]: synthetic box-world scenes and a noisy Bayesian sensor model.
//! - [`metrics`]: IoU / mIoU / accuracy evaluation against ground truth.

pub mod fusion;
pub mod map;
pub mod metrics;
pub mod observation;
pub mod scalar;
pub mod sim;
pub mod types;

pub use fusion::{FusionStrategy, VoxelState};
pub use map::{Frame, FrameObservations, SemanticVoxelMap};
pub use observation::{DirichletObservation, EpistemicVariance, FusionConfig, McSampleSet};
pub use scalar::Real;
pub use types::{CameraIntrinsics, ClassProbs, CoreError, LabelSet, Pose, VoxelKey};

/// Single-precision probability vector.
pub type ClassProbs32 = ClassProbs<f32>;
/// Double-precision probability vector. The reference pipeline runs in f64.
pub type ClassProbs64 = ClassProbs<f64>;
pub type FusionConfig32 = FusionConfig<f32>;
pub type FusionConfig64 = FusionConfig<f64>;
pub type VoxelState32 = VoxelState<f32>;
pub type VoxelState64 = VoxelState<f64>;
pub type SemanticVoxelMap32 = SemanticVoxelMap<f32>;
pub type SemanticVoxelMap64 = SemanticVoxelMap<f64>;
