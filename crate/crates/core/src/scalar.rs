use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point element type for the linear-algebra side of the crate.
///
/// Implemented for `f32` and `f64`. Scenario generation, marginal densities
/// and the experiment harness work in `f64`; the projection, model and
/// statistic code is written against this trait so either precision can be
/// used for the compressed-domain math.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + std::fmt::Display + 'static
{
    /// Bound on `max |A Aᵀ - I|` accepted for a freshly built projection.
    const ORTHO_TOL: f64;
    /// Tolerance used when checking that an input covariance is symmetric.
    const SYMMETRY_TOL: f64;

    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const ORTHO_TOL: f64 = 1e-10;
    const SYMMETRY_TOL: f64 = 1e-9;
}

impl Scalar for f32 {
    const ORTHO_TOL: f64 = 1e-4;
    const SYMMETRY_TOL: f64 = 1e-4;
}
