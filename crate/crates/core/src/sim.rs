//! Synthetic data generation: labeled box-world scenes, orbit camera
//! trajectories, ray-cast depth rendering and a noisy Bayesian-sensor model
//! with controllable outliers and error-correlated epistemic uncertainty.
//!
//! All randomness flows through counter-based substreams derived from
//! `(seed, stream, index)`, so pixel order and parallelism cannot change the
//! output and a fixed seed reproduces the dataset bit for bit.

use rand::RngCore;
use rand_distr::{Distribution, Gamma};

use crate::observation::McSampleSet;
use crate::types::{CameraIntrinsics, ClassProbs, Pose, VoxelKey};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid sensor model: {0}")]
    InvalidSensorModel(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
}

/// Axis-aligned labeled box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub class: usize,
}

/// Labeled box-world scene. On overlapping geometry the first box in list
/// order wins, both for ray hits at equal depth and for ground-truth voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub boxes: Vec<AxisBox>,
    pub background_class: usize,
    pub num_classes: usize,
}

/// Declarative scene description. The optional floor becomes a thin
/// background-class box appended after the object boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub num_classes: usize,
    pub background_class: usize,
    pub boxes: Vec<AxisBox>,
    pub floor: Option<FloorSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorSpec {
    /// Top surface height of the floor slab.
    pub z: f64,
    /// Half extent in x and y, centered on the origin.
    pub half_extent: f64,
    pub thickness: f64,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SimError> {
    if spec.num_classes < 2 {
        return Err(SimError::InvalidScene("need at least two classes".into()));
    }
    if spec.background_class >= spec.num_classes {
        return Err(SimError::InvalidScene(format!(
            "background class {} out of range",
            spec.background_class
        )));
    }
    if spec.boxes.is_empty() && spec.floor.is_none() {
        return Err(SimError::InvalidScene(
            "empty box list with no background floor".into(),
        ));
    }
    let mut boxes = Vec::with_capacity(spec.boxes.len() + 1);
    for b in &spec.boxes {
        if b.class >= spec.num_classes {
            return Err(SimError::InvalidScene(format!(
                "box class {} out of range",
                b.class
            )));
        }
        for a in 0..3 {
            if !(b.min[a] < b.max[a]) {
                return Err(SimError::InvalidScene(format!(
                    "box min {:?} not below max {:?}",
                    b.min, b.max
                )));
            }
        }
        boxes.push(*b);
    }
    if let Some(f) = spec.floor {
        if !(f.half_extent > 0.0 && f.thickness > 0.0) {
            return Err(SimError::InvalidScene("degenerate floor".into()));
        }
        boxes.push(AxisBox {
            min: [-f.half_extent, -f.half_extent, f.z - f.thickness],
            max: [f.half_extent, f.half_extent, f.z],
            class: spec.background_class,
        });
    }
    Ok(Scene {
        boxes,
        background_class: spec.background_class,
        num_classes: spec.num_classes,
    })
}

/// Slab-method ray/box intersection. Returns the entry distance along `dir`
/// for rays starting outside the box; `None` on miss or when the origin is
/// inside.
pub fn ray_box_entry(origin: [f64; 3], dir: [f64; 3], b: &AxisBox) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for a in 0..3 {
        if dir[a] == 0.0 {
            if origin[a] < b.min[a] || origin[a] > b.max[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[a];
        let mut t0 = (b.min[a] - origin[a]) * inv;
        let mut t1 = (b.max[a] - origin[a]) * inv;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    (t_near > 1e-9).then_some(t_near)
}

/// Ray-cast depth and true-class images.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthRender {
    /// Per-pixel depth along the camera z axis; 0 where no surface is hit.
    pub depth: Vec<f64>,
    /// Per-pixel class of the hit box; background class where no hit.
    pub class: Vec<usize>,
}

/// Render per-pixel nearest ray/box intersections. Rays pass through integer
/// pixel coordinates; depth is the camera-z distance, so back-projecting the
/// depth image reproduces the hit points.
pub fn render_depth(scene: &Scene, pose: &Pose<f64>, intr: &CameraIntrinsics<f64>) -> DepthRender {
    let w = intr.width as usize;
    let h = intr.height as usize;
    let mut depth = vec![0.0; w * h];
    let mut class = vec![scene.background_class; w * h];
    let origin = pose.translation();
    for v in 0..h {
        for u in 0..w {
            let dir_cam = [
                (u as f64 - intr.cx) / intr.fx,
                (v as f64 - intr.cy) / intr.fy,
                1.0,
            ];
            let dir = pose.rotate(dir_cam);
            let mut best: Option<(f64, usize)> = None;
            for b in &scene.boxes {
                if let Some(t) = ray_box_entry(origin, dir, b) {
                    // strict < keeps the first box on ties
                    if best.map_or(true, |(bt, _)| t < bt) {
                        best = Some((t, b.class));
                    }
                }
            }
            if let Some((t, c)) = best {
                depth[v * w + u] = t; // dir_cam.z == 1, so t is camera-z depth
                class[v * w + u] = c;
            }
        }
    }
    DepthRender { depth, class }
}

/// Synthetic Bayesian-sensor error model.
///
/// `epistemic_spread_*` are dispersion scales for the Dirichlet noise around
/// the pixel mean: MC samples are drawn from `Dir(mean / spread)`, so the
/// per-class sample variance is roughly `mean (1 - mean) * spread / (1 +
/// spread)`. A spread of exactly 0 produces noise-free samples equal to the
/// mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    /// Probability mass placed on the true class for non-outlier pixels.
    pub p_correct: f64,
    /// Fraction of pixels that are outliers.
    pub outlier_rate: f64,
    /// Peak probability assigned to the wrong class on outlier pixels.
    pub outlier_confidence: f64,
    pub epistemic_spread_correct: f64,
    pub epistemic_spread_outlier: f64,
    /// Fraction of outliers that receive the high (detectable) dispersion;
    /// the rest stay overconfident with the low dispersion.
    pub uncertainty_error_correlation: f64,
    pub seed: u64,
}

impl SensorModel {
    pub fn validate(&self) -> Result<(), SimError> {
        let unit = |v: f64, name: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SimError::InvalidSensorModel(format!(
                    "{name} = {v} outside [0, 1]"
                )))
            }
        };
        unit(self.p_correct, "p_correct")?;
        unit(self.outlier_rate, "outlier_rate")?;
        unit(self.outlier_confidence, "outlier_confidence")?;
        unit(
            self.uncertainty_error_correlation,
            "uncertainty_error_correlation",
        )?;
        if self.epistemic_spread_correct < 0.0 || self.epistemic_spread_outlier < 0.0 {
            return Err(SimError::InvalidSensorModel(
                "spreads must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// One simulated pixel observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSample {
    pub samples: McSampleSet<f64>,
    pub outlier: bool,
}

/// Simulate the network output for one pixel of known true class.
///
/// With probability `outlier_rate` the pixel is an outlier whose mean places
/// `outlier_confidence` on a wrong class chosen uniformly; otherwise the mean
/// places `p_correct` on the true class. MC samples are drawn around the mean
/// with the spread picked by the outlier/correlation logic.
pub fn sample_sensor(
    true_class: usize,
    num_classes: usize,
    model: &SensorModel,
    num_samples: usize,
    rng: &mut SubstreamRng,
) -> SensorSample {
    assert!(num_samples >= 1);
    assert!(true_class < num_classes && num_classes >= 2);
    let outlier = rng.next_f64() < model.outlier_rate;
    let mut mean = vec![0.0f64; num_classes];
    if outlier {
        let mut wrong = rng.next_below((num_classes - 1) as u64) as usize;
        if wrong >= true_class {
            wrong += 1;
        }
        let rest = (1.0 - model.outlier_confidence) / (num_classes - 1) as f64;
        for (c, m) in mean.iter_mut().enumerate() {
            *m = if c == wrong {
                model.outlier_confidence
            } else {
                rest
            };
        }
    } else {
        let rest = (1.0 - model.p_correct) / (num_classes - 1) as f64;
        for (c, m) in mean.iter_mut().enumerate() {
            *m = if c == true_class {
                model.p_correct
            } else {
                rest
            };
        }
    }
    let spread = if outlier {
        if rng.next_f64() < model.uncertainty_error_correlation {
            model.epistemic_spread_outlier
        } else {
            model.epistemic_spread_correct
        }
    } else {
        model.epistemic_spread_correct
    };

    let samples = if spread == 0.0 {
        vec![ClassProbs::from_raw_mean(&mean); num_samples]
    } else {
        (0..num_samples)
            .map(|_| dirichlet_around(&mean, spread, rng))
            .collect()
    };
    SensorSample {
        samples: McSampleSet::new(samples),
        outlier,
    }
}

impl ClassProbs<f64> {
    fn from_raw_mean(mean: &[f64]) -> Self {
        ClassProbs::normalize(mean).expect("sensor mean is a positive vector")
    }
}

/// One Dirichlet draw centered on `mean` with concentration `mean / spread`.
/// Stays on the simplex by construction.
fn dirichlet_around(mean: &[f64], spread: f64, rng: &mut SubstreamRng) -> ClassProbs<f64> {
    let mut raw = vec![0.0f64; mean.len()];
    let mut sum = 0.0;
    for (r, &m) in raw.iter_mut().zip(mean) {
        if m <= 0.0 {
            continue;
        }
        let gamma = Gamma::new(m / spread, 1.0).expect("positive shape");
        *r = gamma.sample(rng);
        sum += *r;
    }
    if sum <= 0.0 || !sum.is_finite() {
        // all gamma draws underflowed; fall back to the mean
        return ClassProbs::from_raw_mean(mean);
    }
    ClassProbs::normalize(&raw).expect("gamma draws are nonnegative")
}

/// Ground-truth surface voxels: every cell containing a boundary point of a
/// box, labeled by the owning (first-listed) box. Sorted by key.
pub fn rasterize_gt(scene: &Scene, voxel_size: f64) -> Vec<(VoxelKey, usize)> {
    let mut cells = std::collections::BTreeMap::new();
    let floor_key = |c: f64| (c / voxel_size).floor() as i64;
    for b in &scene.boxes {
        let lo = [floor_key(b.min[0]), floor_key(b.min[1]), floor_key(b.min[2])];
        let hi = [floor_key(b.max[0]), floor_key(b.max[1]), floor_key(b.max[2])];
        for axis in 0..3 {
            let (p, q) = ((axis + 1) % 3, (axis + 2) % 3);
            for layer in [lo[axis], hi[axis]] {
                for i in lo[p]..=hi[p] {
                    for j in lo[q]..=hi[q] {
                        let mut idx = [0i64; 3];
                        idx[axis] = layer;
                        idx[p] = i;
                        idx[q] = j;
                        cells
                            .entry(VoxelKey::new(idx[0], idx[1], idx[2]))
                            .or_insert(b.class);
                    }
                }
            }
        }
    }
    cells.into_iter().collect()
}

/// Which observation tensor layout a simulated frame carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationKind {
    McSamples,
    MeanVariance,
}

/// Render one frame and simulate the sensor for every valid pixel.
///
/// Returns the frame plus the per-pixel outlier flags (false for pixels
/// without depth). Pixels without a surface hit get a uniform mean and zero
/// variance in the tensor; integration skips them via the zero depth. Each
/// pixel draws from its own `(seed, frame_index, pixel)` substream, so the
/// result does not depend on pixel iteration order.
pub fn simulate_frame(
    scene: &Scene,
    timed_pose: &TimedPose,
    intr: &CameraIntrinsics<f64>,
    model: &SensorModel,
    num_samples: usize,
    frame_index: u64,
    kind: ObservationKind,
) -> (crate::map::Frame<f64>, Vec<bool>) {
    let render = render_depth(scene, &timed_pose.pose, intr);
    let w = intr.width as usize;
    let h = intr.height as usize;
    let plane = w * h;
    let k = scene.num_classes;
    let uniform = 1.0 / k as f64;

    let mut outliers = vec![false; plane];
    let mut data = match kind {
        ObservationKind::McSamples => {
            let mut d = vec![0.0f64; num_samples * k * plane];
            for s in 0..num_samples {
                for c in 0..k {
                    let base = (s * k + c) * plane;
                    d[base..base + plane].fill(uniform);
                }
            }
            d
        }
        ObservationKind::MeanVariance => {
            let mut d = vec![0.0f64; 2 * k * plane];
            for c in 0..k {
                d[c * plane..(c + 1) * plane].fill(uniform);
            }
            d
        }
    };

    for px in 0..plane {
        if render.depth[px] <= 0.0 {
            continue;
        }
        let mut rng = SubstreamRng::for_substream(model.seed, frame_index, px as u64);
        let sample = sample_sensor(render.class[px], k, model, num_samples, &mut rng);
        outliers[px] = sample.outlier;
        match kind {
            ObservationKind::McSamples => {
                for (s, probs) in sample.samples.samples().iter().enumerate() {
                    for c in 0..k {
                        data[(s * k + c) * plane + px] = probs.component(c);
                    }
                }
            }
            ObservationKind::MeanVariance => {
                let mean = crate::observation::predictive_mean(&sample.samples);
                // raw (unclamped) variance; ingestion applies the clamp
                let m = sample.samples.num_samples() as f64;
                for c in 0..k {
                    let mu = mean.component(c);
                    let var = sample
                        .samples
                        .samples()
                        .iter()
                        .map(|p| (p.component(c) - mu).powi(2))
                        .sum::<f64>()
                        / m;
                    data[c * plane + px] = mu;
                    data[(k + c) * plane + px] = var;
                }
            }
        }
    }

    let observations = match kind {
        ObservationKind::McSamples => crate::map::FrameObservations::McSamples {
            num_samples,
            num_classes: k,
            data,
        },
        ObservationKind::MeanVariance => crate::map::FrameObservations::MeanVariance {
            num_classes: k,
            data,
        },
    };
    (
        crate::map::Frame {
            timestamp: timed_pose.timestamp,
            pose: timed_pose.pose,
            intrinsics: *intr,
            depth: render.depth,
            observations,
        },
        outliers,
    )
}

/// Camera trajectory description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectorySpec {
    /// Poses equally spaced on a circle of `radius` around `center` at
    /// absolute height `height`, all looking at `center`.
    Orbit {
        center: [f64; 3],
        radius: f64,
        height: f64,
        frames: usize,
        /// Timestamp spacing in seconds.
        dt: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPose {
    pub timestamp: f64,
    pub pose: Pose<f64>,
}

pub fn generate_trajectory(spec: &TrajectorySpec) -> Result<Vec<TimedPose>, SimError> {
    match *spec {
        TrajectorySpec::Orbit {
            center,
            radius,
            height,
            frames,
            dt,
        } => {
            if frames == 0 {
                return Err(SimError::InvalidTrajectory("need at least one frame".into()));
            }
            if !(radius > 0.0) {
                return Err(SimError::InvalidTrajectory("radius must be positive".into()));
            }
            if !(dt > 0.0) {
                return Err(SimError::InvalidTrajectory("dt must be positive".into()));
            }
            Ok((0..frames)
                .map(|i| {
                    let angle = 2.0 * std::f64::consts::PI * i as f64 / frames as f64;
                    let eye = [
                        center[0] + radius * angle.cos(),
                        center[1] + radius * angle.sin(),
                        height,
                    ];
                    TimedPose {
                        timestamp: i as f64 * dt,
                        pose: Pose::look_at(eye, center, [0.0, 0.0, 1.0]),
                    }
                })
                .collect())
        }
    }
}

/// Counter-based splittable RNG. A substream is fully determined by
/// `(seed, stream, index)` through splitmix64 finalizer mixing, then advances
/// as a plain splitmix64 sequence. Platform-stable 64-bit arithmetic only.
#[derive(Debug, Clone)]
pub struct SubstreamRng {
    state: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SubstreamRng {
    pub fn for_substream(seed: u64, stream: u64, index: u64) -> Self {
        let mut state = mix64(seed ^ GOLDEN);
        state = mix64(state ^ mix64(stream.wrapping_add(GOLDEN)));
        state = mix64(state ^ mix64(index.wrapping_add(0xBF58_476D_1CE4_E5B9)));
        Self { state }
    }

    pub fn next_u64_value(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64_value() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, bound) via rejection-free multiply-shift; the
    /// tiny modulo bias is irrelevant for class choices.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        ((self.next_u64_value() as u128 * bound as u128) >> 64) as u64
    }
}

impl RngCore for SubstreamRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64_value() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_u64_value()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64_value().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
