use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::MetricsError;

/// A ratio before and after clamping to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tradeoff<T> {
    pub raw: T,
    pub clamped: T,
}

/// `(c_a - c_r) / (c_n - c_r)`: how much of the raw-data advantage over the
/// best constant guess survives sanitization.
pub fn tradeoff_ratio<T: Float>(c_n: T, c_a: T, c_r: T) -> Result<Tradeoff<T>, MetricsError> {
    let denom = c_n - c_r;
    if denom == T::zero() {
        return Err(MetricsError::DegenerateBaseline);
    }
    let raw = (c_a - c_r) / denom;
    Ok(Tradeoff {
        raw,
        clamped: raw.max(T::zero()).min(T::one()),
    })
}

/// Privacy leakage of the private attribute. 0 means no better than guessing.
pub fn privacy_leakage<T: Float>(c_n: T, c_a: T, c_r: T) -> Result<Tradeoff<T>, MetricsError> {
    tradeoff_ratio(c_n, c_a, c_r)
}

/// Retained utility of the utility attribute. 1 means no drop.
pub fn utility_performance<T: Float>(c_n: T, c_a: T, c_r: T) -> Result<Tradeoff<T>, MetricsError> {
    tradeoff_ratio(c_n, c_a, c_r)
}

/// Attribute accuracies and the resulting leakage/utility ratios of one
/// mechanism.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffScores {
    pub m_p: f64,
    pub m_u: f64,
    pub m_p_raw: f64,
    pub m_u_raw: f64,
    /// `(c_n, c_a, c_r)` of the private attribute.
    pub private_accuracies: [f64; 3],
    /// `(c_n, c_a, c_r)` of the utility attribute.
    pub utility_accuracies: [f64; 3],
}

impl TradeoffScores {
    pub fn compute(private: [f64; 3], utility: [f64; 3]) -> Result<Self, MetricsError> {
        let p = privacy_leakage(private[0], private[1], private[2])?;
        let u = utility_performance(utility[0], utility[1], utility[2])?;
        Ok(TradeoffScores {
            m_p: p.clamped,
            m_u: u.clamped,
            m_p_raw: p.raw,
            m_u_raw: u.raw,
            private_accuracies: private,
            utility_accuracies: utility,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn alfr_task1_values() {
        let p = privacy_leakage(0.84, 0.65, 0.69).unwrap();
        assert_abs_diff_eq!(p.raw, -0.2667, epsilon = 1e-3);
        assert_eq!(p.clamped, 0.0);
        let u = utility_performance(0.88, 0.81, 0.74).unwrap();
        assert_abs_diff_eq!(u.clamped, 0.50, epsilon = 1e-9);
    }

    #[test]
    fn above_raw_clamps_to_one() {
        let u = utility_performance(0.88, 0.89, 0.74).unwrap();
        assert_abs_diff_eq!(u.raw, 1.0714, epsilon = 1e-3);
        assert_eq!(u.clamped, 1.0);
    }

    #[test]
    fn no_op_is_exactly_one() {
        assert_eq!(tradeoff_ratio(0.83, 0.83, 0.69).unwrap().raw, 1.0);
        assert_eq!(tradeoff_ratio(0.83f32, 0.83, 0.69).unwrap().clamped, 1.0);
    }

    #[test]
    fn degenerate_baseline() {
        assert_eq!(
            tradeoff_ratio(0.7, 0.6, 0.7),
            Err(MetricsError::DegenerateBaseline)
        );
    }

    proptest! {
        #[test]
        fn clamped_is_clamp_of_raw(c_n in 0.0f64..1.0, c_a in 0.0f64..1.0, c_r in 0.0f64..1.0) {
            prop_assume!(c_n != c_r);
            let t = tradeoff_ratio(c_n, c_a, c_r).unwrap();
            prop_assert_eq!(t.clamped, t.raw.max(0.0).min(1.0));
            prop_assert!((0.0..=1.0).contains(&t.clamped));
        }
    }
}
