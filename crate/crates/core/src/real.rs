//! Scalar abstraction for the physics and network layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used by the physical models (`f32` or `f64`).
pub trait Real: Float + FromPrimitive + ToPrimitive + Debug + Display + Sum + Send + Sync + 'static {
    /// Converts a literal. Panics only for values not representable at all.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl<T> Real for T where T: Float + FromPrimitive + ToPrimitive + Debug + Display + Sum + Send + Sync + 'static {}
