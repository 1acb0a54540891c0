use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numerical code is generic over: `f32` or `f64`.
///
/// The tolerances scale with the precision of the type.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Allowed deviation of a stored distribution's sum from one.
    const SIMPLEX_TOLERANCE: f64;
    /// Constructors silently renormalize inputs whose sum is this close to one.
    const RENORMALIZE_TOLERANCE: f64;
    /// Relative guard band applied to certificate thresholds.
    const CERTIFICATE_TOLERANCE: f64;

    /// Converts an `f64` literal. Every finite `f64` is representable (possibly rounded).
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f64 {
    const SIMPLEX_TOLERANCE: f64 = 1e-12;
    const RENORMALIZE_TOLERANCE: f64 = 1e-9;
    const CERTIFICATE_TOLERANCE: f64 = 1e-12;
}

impl Scalar for f32 {
    const SIMPLEX_TOLERANCE: f64 = 1e-5;
    const RENORMALIZE_TOLERANCE: f64 = 1e-4;
    const CERTIFICATE_TOLERANCE: f64 = 1e-6;
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum<S: Scalar>(values: impl IntoIterator<Item = S>) -> S {
    let mut sum = S::zero();
    let mut comp = S::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

/// Pairwise summation with a fixed split point, so the result depends only
/// on the order of `values` and not on how the terms were produced.
pub fn pairwise_sum<S: Scalar>(values: &[S]) -> S {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().fold(S::zero(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let v = [1.0f64, 1e100, 1.0, -1e100];
        assert_eq!(neumaier_sum(v), 2.0);
    }

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 5050.0);
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
    }
}
