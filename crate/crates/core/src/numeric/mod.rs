//! Certified real arithmetic.

mod cf;
mod constant;
mod fixed;
mod real;

pub use cf::{
    convergents_certified, convergents_of, norm_of_multiple_lt, small_norm_multiple, small_norm_multiple_above,
    ContinuedFraction,
};
pub use constant::{first_primes, CertifiedReal, Precision, RealConst};
pub use fixed::{rational_to_frac128, FixedThreshold, Frac128, FracKernel, HALF};
pub use real::{Certainty, PreciseReal, Threshold};
