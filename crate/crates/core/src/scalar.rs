//! Scalar abstraction shared by the numeric kernels.
//!
//! Metric kernels (colorfulness, probe training, deviation, agreement and
//! error statistics) are written against [`Real`] so they run in `f32` or
//! `f64`. The record types that cross file boundaries are instantiated with
//! `f64`; see the aliases at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64` (constants, configuration).
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 converts to every Real")
    }

    /// Conversion from a count.
    fn of_count(count: usize) -> Self {
        Self::from_usize(count).expect("count converts to every Real")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real always converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Ratio of two counts, zero when the denominator is zero.
pub fn ratio<T: Real>(numerator: usize, denominator: usize) -> T {
    if denominator == 0 {
        T::zero()
    } else {
        T::of_count(numerator) / T::of_count(denominator)
    }
}

/// Arithmetic mean; `None` for an empty sequence.
pub fn mean<T: Real>(values: impl IntoIterator<Item = T>) -> Option<T> {
    let mut n = 0usize;
    let mut sum = T::zero();
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / T::of_count(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_of_counts_is_correctly_rounded() {
        assert_eq!(ratio::<f64>(10, 1000), 0.01);
        assert_eq!(ratio::<f64>(947, 1000), 0.947);
        assert_eq!(ratio::<f32>(1, 4), 0.25f32);
        assert_eq!(ratio::<f64>(3, 0), 0.0);
    }

    #[test]
    fn mean_handles_empty() {
        assert_eq!(mean::<f64>([]), None);
        assert_eq!(mean([1.0f64, 2.0, 3.0]), Some(2.0));
    }
}
