//! Numeric scalar abstraction for probabilities, rewards and values.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar used for probabilities and values: `f32` or `f64`.
///
/// The tolerances are per type so that `f32` games remain usable: value
/// iteration to `1e-8` is not meaningful at single precision.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + FromStr + Sum + Debug + Display + Send + Sync + 'static
{
    /// Default convergence threshold for value iteration.
    fn default_epsilon() -> Self;
    /// Tolerance when checking that a distribution sums to one.
    fn distribution_tolerance() -> Self;

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("scalar conversion from f64")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar conversion to f64")
    }
}

impl Scalar for f64 {
    fn default_epsilon() -> Self {
        1e-8
    }
    fn distribution_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn default_epsilon() -> Self {
        1e-5
    }
    fn distribution_tolerance() -> Self {
        1e-5
    }
}
