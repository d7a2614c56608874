//! Scalar abstraction shared by the numerical modules.
//!
//! Everything below `fem`, `modal`, `sensitivity`, `solvers` and `updating`
//! is written against [`Real`], so the same code runs in `f64` (the default
//! used by the experiments and the CLI) and `f32`.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the solvers: `f32` or `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    /// A tolerance of `x`, floored at a small multiple of machine epsilon so
    /// that tolerances tuned for `f64` stay reachable in lower precision.
    fn tol(x: f64) -> Self {
        let floor = 64.0 * Self::default_epsilon().to_f64().unwrap_or(f64::EPSILON);
        Self::lit(x.max(floor))
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn count(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}
