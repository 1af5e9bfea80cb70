//! Scalar abstraction for the numeric kernels.
//!
//! Reward arithmetic, protocol metrics, and the toy policy are generic over
//! [`Real`]; everything graph- or text-shaped is scalar-free. Concrete `f64`
//! aliases for the generic types live at the crate root.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Send + Sync + 'static
{
    /// Conversion from an `f64` constant. Panics only on values the target
    /// type cannot represent at all (never for finite inputs).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant")
    }

    /// Conversion from a set cardinality or group size.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(|| Self::of(n as f64))
    }

    /// Clamp into `[0, 1]`.
    fn clip01(self) -> Self {
        self.max(Self::zero()).min(Self::one())
    }

    /// Widen to `f64` for display and formatting.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
