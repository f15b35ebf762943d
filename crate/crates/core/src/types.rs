//! Foundational domain types: label sets, simplex vectors, voxel keys and the
//! minimal camera geometry needed for back-projection.

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    #[error("label set needs at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("duplicate class name `{0}`")]
    DuplicateClassName(String),
    #[error("probability vector has no positive component")]
    DegenerateDistribution,
    #[error("component {index} = {value} is outside [0, 1]")]
    InvalidProbability { index: usize, value: f64 },
    #[error("negative component {index} = {value}")]
    NegativeComponent { index: usize, value: f64 },
    #[error("components sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("probability vector must have at least two components")]
    EmptyVector,
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("quaternion norm {0} differs from 1")]
    UnnormalizedQuaternion(f64),
}

/// Closed set of semantic classes. Names are display-only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn new(names: Vec<String>) -> Result<Self, CoreError> {
        if names.len() < 2 {
            return Err(CoreError::TooFewClasses(names.len()));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(CoreError::DuplicateClassName(name.clone()));
            }
        }
        Ok(Self { names })
    }

    pub fn num_classes(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, class: usize) -> &str {
        &self.names[class]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Point on the K-class probability simplex.
///
/// Construction validates that every component is in [0, 1] and the vector
/// sums to one; out-of-tolerance inputs are rejected rather than silently
/// renormalized, so upstream bugs surface early. Use [`ClassProbs::normalize`]
/// when the input is an unnormalized nonnegative vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbs<T> {
    p: Vec<T>,
}

impl<T: Real> ClassProbs<T> {
    pub fn new(p: Vec<T>) -> Result<Self, CoreError> {
        if p.len() < 2 {
            return Err(CoreError::EmptyVector);
        }
        for (i, &v) in p.iter().enumerate() {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(CoreError::InvalidProbability {
                    index: i,
                    value: v.to_f64_lossy(),
                });
            }
        }
        let sum: T = p.iter().copied().sum();
        if (sum - T::one()).abs() > T::simplex_tolerance() {
            return Err(CoreError::NotNormalized {
                sum: sum.to_f64_lossy(),
            });
        }
        Ok(Self { p })
    }

    /// Scale a nonnegative vector onto the simplex.
    pub fn normalize(raw: &[T]) -> Result<Self, CoreError> {
        if raw.len() < 2 {
            return Err(CoreError::EmptyVector);
        }
        for (i, &v) in raw.iter().enumerate() {
            if v < T::zero() || !v.is_finite() {
                return Err(CoreError::NegativeComponent {
                    index: i,
                    value: v.to_f64_lossy(),
                });
            }
        }
        let sum: T = raw.iter().copied().sum();
        if sum <= T::zero() {
            return Err(CoreError::DegenerateDistribution);
        }
        Ok(Self {
            p: raw.iter().map(|&v| v / sum).collect(),
        })
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k >= 2, "need at least two classes");
        let v = T::one() / T::from_f64_lossy(k as f64);
        Self { p: vec![v; k] }
    }

    /// For internal use by operations that produce simplex vectors by
    /// construction (softmax, averaging of simplex points).
    pub(crate) fn from_normalized_unchecked(p: Vec<T>) -> Self {
        Self { p }
    }

    /// Index of the maximal component; ties break to the lowest index so map
    /// outputs are reproducible.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.p.len() {
            if self.p[i] > self.p[best] {
                best = i;
            }
        }
        best
    }

    pub fn num_classes(&self) -> usize {
        self.p.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.p
    }

    pub fn component(&self, class: usize) -> T {
        self.p[class]
    }

    pub fn into_vec(self) -> Vec<T> {
        self.p
    }
}

/// Integer voxel grid index: `floor(coordinate / voxel_size)` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelKey {
    pub ix: i64,
    pub iy: i64,
    pub iz: i64,
}

impl VoxelKey {
    pub fn new(ix: i64, iy: i64, iz: i64) -> Self {
        Self { ix, iy, iz }
    }

    pub fn from_point<T: Real>(point: [T; 3], voxel_size: T) -> Self {
        let f = |c: T| (c / voxel_size).floor().to_i64().expect("voxel index in range");
        Self {
            ix: f(point[0]),
            iy: f(point[1]),
            iz: f(point[2]),
        }
    }
}

/// Pinhole camera model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: u32,
    pub height: u32,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: u32, height: u32) -> Result<Self, CoreError> {
        if !(fx > T::zero() && fy > T::zero()) {
            return Err(CoreError::InvalidIntrinsics(
                "focal lengths must be positive".into(),
            ));
        }
        if width == 0 || height == 0 {
            return Err(CoreError::InvalidIntrinsics(
                "image size must be positive".into(),
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }
}

/// Camera-to-world rigid transform: right-handed, camera z forward, x right,
/// y down. Rotation stored as a unit quaternion (x, y, z, w).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T> {
    translation: [T; 3],
    rotation: [T; 4],
}

impl<T: Real> Pose<T> {
    pub fn new(translation: [T; 3], rotation_xyzw: [T; 4]) -> Result<Self, CoreError> {
        let n = rotation_xyzw
            .iter()
            .map(|&c| c * c)
            .fold(T::zero(), |a, b| a + b)
            .sqrt();
        if (n - T::one()).abs() > T::simplex_tolerance() {
            return Err(CoreError::UnnormalizedQuaternion(n.to_f64_lossy()));
        }
        Ok(Self {
            translation,
            rotation: rotation_xyzw,
        })
    }

    pub fn identity() -> Self {
        Self {
            translation: [T::zero(); 3],
            rotation: [T::zero(), T::zero(), T::zero(), T::one()],
        }
    }

    pub fn from_translation(translation: [T; 3]) -> Self {
        Self {
            translation,
            ..Self::identity()
        }
    }

    pub fn translation(&self) -> [T; 3] {
        self.translation
    }

    pub fn rotation_xyzw(&self) -> [T; 4] {
        self.rotation
    }

    /// Rotate a vector by the pose's quaternion: v' = v + 2w(q×v) + 2q×(q×v).
    pub fn rotate(&self, v: [T; 3]) -> [T; 3] {
        let [qx, qy, qz, qw] = self.rotation;
        let q = [qx, qy, qz];
        let t = scale(cross(q, v), T::from_f64_lossy(2.0));
        add(add(v, scale(t, qw)), cross(q, t))
    }

    /// Apply the full transform: R v + t.
    pub fn transform(&self, p: [T; 3]) -> [T; 3] {
        add(self.rotate(p), self.translation)
    }

    /// Camera at `eye` with the optical axis (camera z) pointing at `target`.
    /// `up` is the world up direction used to fix the roll; camera y ends up
    /// pointing "down" with respect to it, matching the image convention.
    pub fn look_at(eye: [T; 3], target: [T; 3], up: [T; 3]) -> Self {
        let z = norm3(sub(target, eye));
        let mut x = cross(z, up);
        let xn = len3(x);
        if xn < T::from_f64_lossy(1e-9) {
            // optical axis parallel to up; fall back to an arbitrary roll
            x = cross(z, [T::zero(), T::one(), T::zero()]);
        }
        let x = norm3(x);
        let y = cross(z, x);
        Self {
            translation: eye,
            rotation: quat_from_columns(x, y, z),
        }
    }
}

fn cross<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn add<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale<T: Real>(a: [T; 3], s: T) -> [T; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn len3<T: Real>(a: [T; 3]) -> T {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn norm3<T: Real>(a: [T; 3]) -> [T; 3] {
    let n = len3(a);
    scale(a, T::one() / n)
}

/// Quaternion from a rotation matrix given by its columns (Shepperd's method).
fn quat_from_columns<T: Real>(x: [T; 3], y: [T; 3], z: [T; 3]) -> [T; 4] {
    // m[r][c], columns are the camera axes in world coordinates
    let m = [
        [x[0], y[0], z[0]],
        [x[1], y[1], z[1]],
        [x[2], y[2], z[2]],
    ];
    let quarter = T::from_f64_lossy(0.25);
    let tr = m[0][0] + m[1][1] + m[2][2];
    let (qx, qy, qz, qw);
    if tr > T::zero() {
        let s = (tr + T::one()).sqrt() * T::from_f64_lossy(2.0);
        qw = quarter * s;
        qx = (m[2][1] - m[1][2]) / s;
        qy = (m[0][2] - m[2][0]) / s;
        qz = (m[1][0] - m[0][1]) / s;
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = (T::one() + m[0][0] - m[1][1] - m[2][2]).sqrt() * T::from_f64_lossy(2.0);
        qw = (m[2][1] - m[1][2]) / s;
        qx = quarter * s;
        qy = (m[0][1] + m[1][0]) / s;
        qz = (m[0][2] + m[2][0]) / s;
    } else if m[1][1] > m[2][2] {
        let s = (T::one() + m[1][1] - m[0][0] - m[2][2]).sqrt() * T::from_f64_lossy(2.0);
        qw = (m[0][2] - m[2][0]) / s;
        qx = (m[0][1] + m[1][0]) / s;
        qy = quarter * s;
        qz = (m[1][2] + m[2][1]) / s;
    } else {
        let s = (T::one() + m[2][2] - m[0][0] - m[1][1]).sqrt() * T::from_f64_lossy(2.0);
        qw = (m[1][0] - m[0][1]) / s;
        qx = (m[0][2] + m[2][0]) / s;
        qy = (m[1][2] + m[2][1]) / s;
        qz = quarter * s;
    }
    // renormalize to keep the Pose invariant tight
    let n = (qx * qx + qy * qy + qz * qz + qw * qw).sqrt();
    [qx / n, qy / n, qz / n, qw / n]
}
