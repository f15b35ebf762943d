//! Sparse voxel hash-map, pinhole back-projection of labeled depth pixels,
//! frame-to-voxel grouping, and map-level queries.
//!
//! Only observed surface voxels are stored; there is no free-space carving.
//! Frames must arrive in nondecreasing timestamp order, and within a frame
//! all pixels hitting one voxel are fused as a single batch.

use std::collections::HashMap;

use crate::fusion::{FusionStrategy, VoxelState};
use crate::observation::{
    observation_from_moments, DirichletObservation, EpistemicVariance, FusionConfig, McSampleSet,
};
use crate::scalar::Real;
use crate::types::{CameraIntrinsics, ClassProbs, Pose, VoxelKey};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("frame timestamp {got} precedes last integrated timestamp {last}")]
    OrderViolation { got: f64, last: f64 },
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
}

/// Per-pixel observation tensors of a frame, row-major with the pixel index
/// varying fastest: `[M, K, H, W]` MC samples or `[2, K, H, W]` mean/variance
/// planes.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameObservations<T> {
    McSamples {
        num_samples: usize,
        num_classes: usize,
        data: Vec<T>,
    },
    MeanVariance {
        num_classes: usize,
        data: Vec<T>,
    },
}

impl<T: Real> FrameObservations<T> {
    pub fn num_classes(&self) -> usize {
        match self {
            FrameObservations::McSamples { num_classes, .. }
            | FrameObservations::MeanVariance { num_classes, .. } => *num_classes,
        }
    }

    fn expected_len(&self, pixels: usize) -> usize {
        match self {
            FrameObservations::McSamples {
                num_samples,
                num_classes,
                ..
            } => num_samples * num_classes * pixels,
            FrameObservations::MeanVariance { num_classes, .. } => 2 * num_classes * pixels,
        }
    }

    fn data_len(&self) -> usize {
        match self {
            FrameObservations::McSamples { data, .. }
            | FrameObservations::MeanVariance { data, .. } => data.len(),
        }
    }
}

/// One sensor frame: pose, intrinsics, depth image and observation tensors.
/// Depth of 0 or non-finite marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T> {
    pub timestamp: f64,
    pub pose: Pose<T>,
    pub intrinsics: CameraIntrinsics<T>,
    pub depth: Vec<T>,
    pub observations: FrameObservations<T>,
}

impl<T: Real> Frame<T> {
    fn validate(&self) -> Result<(), MapError> {
        let pixels = (self.intrinsics.width * self.intrinsics.height) as usize;
        if self.depth.len() != pixels {
            return Err(MapError::MalformedFrame(format!(
                "depth has {} values, expected {}",
                self.depth.len(),
                pixels
            )));
        }
        if self.observations.data_len() != self.observations.expected_len(pixels) {
            return Err(MapError::MalformedFrame(format!(
                "observation tensor has {} values, expected {}",
                self.observations.data_len(),
                self.observations.expected_len(pixels)
            )));
        }
        Ok(())
    }

    /// Predictive mean and clamped epistemic variance for one pixel. Stored
    /// per-pixel vectors are rescaled onto the simplex to absorb storage
    /// quantization (tensor files carry f32 payloads).
    fn pixel_moments(
        &self,
        u: u32,
        v: u32,
        eps_var: T,
    ) -> Result<(ClassProbs<T>, EpistemicVariance<T>), MapError> {
        let w = self.intrinsics.width as usize;
        let h = self.intrinsics.height as usize;
        let px = v as usize * w + u as usize;
        let plane = h * w;
        let bad = |e| MapError::MalformedFrame(format!("pixel ({u}, {v}): {e}"));
        match &self.observations {
            FrameObservations::McSamples {
                num_samples,
                num_classes,
                data,
            } => {
                let k = *num_classes;
                let mut samples = Vec::with_capacity(*num_samples);
                for s in 0..*num_samples {
                    let mut raw = Vec::with_capacity(k);
                    for c in 0..k {
                        raw.push(data[((s * k + c) * plane) + px]);
                    }
                    samples.push(ClassProbs::normalize(&raw).map_err(bad)?);
                }
                let set = McSampleSet::new(samples);
                let mean = crate::observation::predictive_mean(&set);
                let var = crate::observation::epistemic_variance(&set, eps_var);
                Ok((mean, var))
            }
            FrameObservations::MeanVariance { num_classes, data } => {
                let k = *num_classes;
                let mut mean = Vec::with_capacity(k);
                let mut var = Vec::with_capacity(k);
                for c in 0..k {
                    mean.push(data[c * plane + px]);
                    var.push(data[(k + c) * plane + px]);
                }
                Ok((
                    ClassProbs::normalize(&mean).map_err(bad)?,
                    EpistemicVariance::from_raw(&var, eps_var),
                ))
            }
        }
    }
}

/// Counts reported by [`SemanticVoxelMap::integrate_frame`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UpdateSummary {
    pub voxels_touched: usize,
    pub pixels_used: usize,
    pub pixels_skipped: usize,
}

/// Result of a voxel query.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelQuery<T> {
    pub posterior: ClassProbs<T>,
    pub label: usize,
    pub alpha_bar: Option<Vec<T>>,
}

/// Back-project pixel (u, v) with depth `d` (meters along the camera z axis)
/// into a world point: `((u - cx) d / fx, (v - cy) d / fy, d)` transformed by
/// the camera-to-world pose.
pub fn back_project<T: Real>(
    u: T,
    v: T,
    d: T,
    intr: &CameraIntrinsics<T>,
    pose: &Pose<T>,
) -> [T; 3] {
    let cam = [(u - intr.cx) * d / intr.fx, (v - intr.cy) * d / intr.fy, d];
    pose.transform(cam)
}

/// Per-axis `floor(coordinate / voxel_size)`.
pub fn voxelize<T: Real>(point: [T; 3], voxel_size: T) -> VoxelKey {
    VoxelKey::from_point(point, voxel_size)
}

enum Payload<T> {
    Probs(ClassProbs<T>),
    Dirichlet(DirichletObservation<T>),
}

/// Sparse hash-map from voxel keys to fused per-voxel state.
#[derive(Debug, Clone)]
pub struct SemanticVoxelMap<T> {
    voxel_size: T,
    num_classes: usize,
    strategy: FusionStrategy,
    cfg: FusionConfig<T>,
    stride: usize,
    cells: HashMap<VoxelKey, VoxelState<T>>,
    last_timestamp: Option<f64>,
}

impl<T: Real> SemanticVoxelMap<T> {
    pub fn new(
        num_classes: usize,
        voxel_size: T,
        strategy: FusionStrategy,
        cfg: FusionConfig<T>,
    ) -> Self {
        assert!(num_classes >= 2, "need at least two classes");
        assert!(voxel_size > T::zero(), "voxel size must be positive");
        Self {
            voxel_size,
            num_classes,
            strategy,
            cfg,
            stride: 1,
            cells: HashMap::new(),
            last_timestamp: None,
        }
    }

    /// Integer pixel subsampling stride (1 = every pixel).
    pub fn with_stride(mut self, stride: usize) -> Self {
        assert!(stride >= 1, "stride must be at least 1");
        self.stride = stride;
        self
    }

    pub fn strategy(&self) -> FusionStrategy {
        self.strategy
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn voxel_size(&self) -> T {
        self.voxel_size
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Back-project every valid pixel, group by voxel, and fuse each voxel's
    /// batch in one call per the map strategy.
    pub fn integrate_frame(&mut self, frame: &Frame<T>) -> Result<UpdateSummary, MapError> {
        if let Some(last) = self.last_timestamp {
            if frame.timestamp < last {
                return Err(MapError::OrderViolation {
                    got: frame.timestamp,
                    last,
                });
            }
        }
        frame.validate()?;
        if frame.observations.num_classes() != self.num_classes {
            return Err(MapError::MalformedFrame(format!(
                "observation tensor has {} classes, map has {}",
                frame.observations.num_classes(),
                self.num_classes
            )));
        }

        let mut summary = UpdateSummary::default();
        let mut batches: HashMap<VoxelKey, Vec<Payload<T>>> = HashMap::new();
        let w = frame.intrinsics.width;
        let h = frame.intrinsics.height;
        for v in (0..h).step_by(self.stride) {
            for u in (0..w).step_by(self.stride) {
                let d = frame.depth[(v * w + u) as usize];
                if !(d.is_finite() && d > T::zero()) {
                    summary.pixels_skipped += 1;
                    continue;
                }
                let point = back_project(
                    T::from_f64_lossy(u as f64),
                    T::from_f64_lossy(v as f64),
                    d,
                    &frame.intrinsics,
                    &frame.pose,
                );
                let key = voxelize(point, self.voxel_size);
                let payload = self.pixel_payload(frame, u, v)?;
                batches.entry(key).or_default().push(payload);
                summary.pixels_used += 1;
            }
        }

        summary.voxels_touched = batches.len();
        let strategy = self.strategy;
        let cfg = self.cfg;
        let k = self.num_classes;
        for (key, batch) in batches {
            let state = self
                .cells
                .entry(key)
                .or_insert_with(|| VoxelState::new(k, strategy));
            match strategy {
                FusionStrategy::SumProbs => state.fuse_sum_probs(&unwrap_probs(batch)),
                FusionStrategy::SumLabels => state.fuse_sum_labels(&unwrap_probs(batch)),
                FusionStrategy::BayesianClassic => {
                    state.fuse_classic(&unwrap_probs(batch), cfg.p_min)
                }
                FusionStrategy::Robust { .. } => state.fuse_robust(&unwrap_dirichlet(batch)),
            }
        }
        self.last_timestamp = Some(frame.timestamp);
        Ok(summary)
    }

    fn pixel_payload(&self, frame: &Frame<T>, u: u32, v: u32) -> Result<Payload<T>, MapError> {
        let (mean, var) = frame.pixel_moments(u, v, self.cfg.eps_var)?;
        Ok(match self.strategy {
            // baselines consume the deterministic mean prediction
            FusionStrategy::SumProbs | FusionStrategy::SumLabels | FusionStrategy::BayesianClassic => {
                Payload::Probs(mean)
            }
            FusionStrategy::Robust {
                regularize,
                dirichlet,
            } => Payload::Dirichlet(observation_from_moments(
                &mean, &var, regularize, dirichlet, &self.cfg,
            )),
        })
    }

    pub fn query(&self, key: VoxelKey) -> Option<VoxelQuery<T>> {
        self.cells.get(&key).map(|state| {
            let posterior = state.posterior();
            let label = posterior.argmax();
            VoxelQuery {
                posterior,
                label,
                alpha_bar: state.alpha_bar().map(|a| a.to_vec()),
            }
        })
    }

    /// All stored voxels as `(key, argmax label, max probability)`, sorted by
    /// key lexicographically.
    pub fn export_labels(&self) -> Vec<(VoxelKey, usize, T)> {
        let mut rows: Vec<_> = self
            .cells
            .iter()
            .map(|(&key, state)| {
                let post = state.posterior();
                let label = post.argmax();
                (key, label, post.component(label))
            })
            .collect();
        rows.sort_by_key(|r| r.0);
        rows
    }
}

fn unwrap_probs<T>(batch: Vec<Payload<T>>) -> Vec<ClassProbs<T>> {
    batch
        .into_iter()
        .map(|p| match p {
            Payload::Probs(p) => p,
            Payload::Dirichlet(_) => unreachable!("baseline strategy received dirichlet payload"),
        })
        .collect()
}

fn unwrap_dirichlet<T>(batch: Vec<Payload<T>>) -> Vec<DirichletObservation<T>> {
    batch
        .into_iter()
        .map(|p| match p {
            Payload::Dirichlet(d) => d,
            Payload::Probs(_) => unreachable!("robust strategy received probability payload"),
        })
        .collect()
}
