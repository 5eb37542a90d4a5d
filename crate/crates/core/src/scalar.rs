//! Scalar abstraction for the numeric core.
//!
//! Everything downstream is generic over [`Scalar`] so the same kernels run
//! in `f32` or `f64`. The toolkit's working precision is `f64`; `f32` exists
//! for memory-bound experimentation and to keep the kernels honest about
//! precision assumptions.

use num_traits::{Float, FromPrimitive, NumAssignOps};
use std::fmt::{Debug, Display};
use std::iter::Sum;

pub trait Scalar:
    Float + FromPrimitive + NumAssignOps + Sum + Send + Sync + Debug + Display + Default + 'static
{
    /// Shorthand for lifting an `f64` constant into the scalar type.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable in scalar type")
    }

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn as_f64(self) -> f64 {
        self
    }
}
