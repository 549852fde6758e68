//! Scalar abstraction used by the metric and accuracy code.
//!
//! Every ratio this crate reports is a quotient of integer counts, so the
//! arithmetic only needs `Num` plus a way to lift a count into the field.
//! That lets the same code run in `f32`, `f64`, or exactly in rationals.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Float, Num, ToPrimitive};

/// A field the metrics can be evaluated in.
pub trait Scalar: Num + Clone + PartialOrd + Debug + Send + Sync {
    /// Lift a non-negative count into the field.
    fn from_count(n: u64) -> Self;

    /// Nearest `f64`, used only for formatting and correlation.
    fn to_f64_lossy(&self) -> f64;

    /// `num / den`, or zero when `den` is zero.
    fn ratio_or_zero(num: u64, den: u64) -> Self {
        if den == 0 {
            Self::zero()
        } else {
            Self::from_count(num) / Self::from_count(den)
        }
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_count(n: u64) -> Self {
                n as $t
            }

            fn to_f64_lossy(&self) -> f64 {
                *self as f64
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

impl Scalar for Ratio<i64> {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(i64::try_from(n).expect("count exceeds i64"))
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for BigRational {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(BigInt::from(n))
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Harmonic mean of precision and recall, zero when both are zero.
pub fn harmonic_mean<S: Scalar>(p: &S, r: &S) -> S {
    let sum = p.clone() + r.clone();
    if sum.is_zero() {
        S::zero()
    } else {
        let two = S::one() + S::one();
        two * p.clone() * r.clone() / sum
    }
}

/// Sum with a fixed pairwise tree shape, so the result depends only on the
/// order of `values` and never on how the work was scheduled.
pub fn pairwise_sum<S: Scalar>(values: &[S]) -> S {
    match values.len() {
        0 => S::zero(),
        1 => values[0].clone(),
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

/// Round a percentage `100 * k / n` to two decimals, exactly (half away from zero).
pub fn format_percent_exact(k: u64, n: u64) -> String {
    assert!(n > 0, "percentage over an empty denominator");
    let k = u128::from(k);
    let n = u128::from(n);
    // hundredths of a percent, rounded half up
    let scaled = (20_000 * k + n) / (2 * n);
    format!("{}.{:02}", scaled / 100, scaled % 100)
}

/// Two-decimal rendering of any scalar.
pub fn format_fixed2<S: Scalar>(value: &S) -> String {
    format!("{:.2}", value.to_f64_lossy())
}

/// Two-decimal percentage rendering of a ratio in `[0, 1]`.
pub fn format_pct2<S: Scalar>(value: &S) -> String {
    format!("{:.2}", 100.0 * value.to_f64_lossy())
}

/// `true` when two floats are within `tol` of each other.
pub fn close<F: Float>(a: F, b: F, tol: F) -> bool {
    (a - b).abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn exact_percentages_round_like_tables() {
        assert_eq!(format_percent_exact(126, 130), "96.92");
        assert_eq!(format_percent_exact(97, 100), "97.00");
        assert_eq!(format_percent_exact(0, 7), "0.00");
        assert_eq!(format_percent_exact(7, 7), "100.00");
        // 1/8 = 12.5% exactly
        assert_eq!(format_percent_exact(1, 8), "12.50");
        // 2/3 = 66.666..
        assert_eq!(format_percent_exact(2, 3), "66.67");
    }

    #[test]
    fn ratio_or_zero_convention() {
        assert_eq!(f64::ratio_or_zero(3, 0), 0.0);
        assert_eq!(Rational64::ratio_or_zero(1, 2), Rational64::new(1, 2));
    }

    #[test]
    fn harmonic_mean_in_rationals() {
        let p = Rational64::new(1, 2);
        let r = Rational64::from_integer(1);
        assert_eq!(harmonic_mean(&p, &r), Rational64::new(2, 3));
        assert_eq!(harmonic_mean(&Rational64::from_integer(0), &Rational64::from_integer(0)), Rational64::from_integer(0));
    }

    #[test]
    fn pairwise_sum_matches_naive_for_exact() {
        let v: Vec<Rational64> = (1..=9).map(|d| Rational64::new(1, d)).collect();
        let naive = v.iter().fold(Rational64::from_integer(0), |a, b| a + b);
        assert_eq!(pairwise_sum(&v), naive);
    }
}
