use serde::Serialize;

use super::distribution::WorkQuasiDistribution;
use crate::error::{Error, Result};

/// Increasing utility `f(w)` used in the Jensen bound `<w> >= f^{-1}(<f(w)>)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum UtilityFunction {
    /// `slope * w + intercept`.
    Affine { slope: f64, intercept: f64 },
    /// `-exp(-rate * w)`, for which `-f''/f' = rate`.
    Exponential { rate: f64 },
}

impl Default for UtilityFunction {
    fn default() -> Self {
        UtilityFunction::Exponential { rate: 1.0 }
    }
}

impl UtilityFunction {
    pub fn value(&self, w: f64) -> f64 {
        match *self {
            UtilityFunction::Affine { slope, intercept } => slope * w + intercept,
            UtilityFunction::Exponential { rate } => -(-rate * w).exp(),
        }
    }

    /// `f^{-1}(y)`; `+inf` where `y` lies above the range of `f`.
    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            UtilityFunction::Affine { slope, intercept } => (y - intercept) / slope,
            UtilityFunction::Exponential { rate } => {
                if y >= 0.0 {
                    f64::INFINITY
                } else {
                    -(-y).ln() / rate
                }
            }
        }
    }

    /// Lower bound on `-f''/f'`.
    pub fn concavity_bound(&self) -> f64 {
        match *self {
            UtilityFunction::Affine { .. } => 0.0,
            UtilityFunction::Exponential { rate } => rate,
        }
    }

    fn check_increasing(&self, w: f64) -> Result<()> {
        let ok = match *self {
            UtilityFunction::Affine { slope, .. } => slope > 0.0,
            UtilityFunction::Exponential { rate } => rate > 0.0 && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::NotIncreasing { w })
        }
    }

    /// `f^{-1}(sum_a p_a f(w_a))`, evaluated relative to the smallest atom so
    /// the exponential does not overflow for large supports.
    fn certainty_equivalent(&self, dist: &WorkQuasiDistribution) -> f64 {
        match *self {
            UtilityFunction::Affine { .. } => {
                let mean_f: f64 = dist.atoms().iter().map(|a| a.p * self.value(a.w)).sum();
                self.inverse(mean_f)
            }
            UtilityFunction::Exponential { rate } => {
                let w0 = dist.support().0;
                let s: f64 = dist
                    .atoms()
                    .iter()
                    .map(|a| a.p * (-rate * (a.w - w0)).exp())
                    .sum();
                if s <= 0.0 {
                    f64::INFINITY
                } else {
                    w0 - s.ln() / rate
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JensenReport {
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
    pub has_negative_weight: bool,
}

/// Compares `<w>` with `f^{-1}(<f(w)>)`.
///
/// A violation is only possible when some weight is negative; a violation on
/// a nonnegative distribution is reported as an invariant failure.
pub fn jensen_check(dist: &WorkQuasiDistribution, f: UtilityFunction) -> Result<JensenReport> {
    f.check_increasing(dist.support().0)?;
    let lhs = dist.mean();
    let rhs = f.certainty_equivalent(dist);
    let violated = lhs < rhs - 1e-12 * lhs.abs().max(1.0);
    let has_negative_weight = dist.min_weight() < 0.0;
    if violated && !has_negative_weight {
        return Err(Error::Invariant(format!(
            "Jensen bound violated by a nonnegative distribution: {lhs} < {rhs}"
        )));
    }
    Ok(JensenReport {
        lhs,
        rhs,
        violated,
        has_negative_weight,
    })
}
