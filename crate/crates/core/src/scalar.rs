use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar used throughout the map and fusion math: f32 or f64.
pub trait Real:
    Float
    + FromPrimitive
    + NumAssign
    + core::iter::Sum<Self>
    + core::fmt::Debug
    + core::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 must convert")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance for "sums to one" checks. 1e-9 for f64; widened for f32,
    /// where 1e-9 is below the representable resolution of a sum of ones.
    fn simplex_tolerance() -> Self {
        let floor = Self::from_f64_lossy(1e-9);
        floor.max(Self::epsilon() * Self::from_f64_lossy(32.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}
