//! Water-draw distributions used by the transition kernel.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};

/// Standard normal CDF through the complementary error function, which keeps
/// full relative precision in both tails.
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Distribution of the hot-water mass drawn during one step, before clipping
/// at zero.
#[derive(Debug, Clone, PartialEq)]
pub enum DrawModel {
    Gaussian {
        mean: f64,
        sigma: f64,
    },
    /// Finite support; probabilities sum to one.
    Discrete(Vec<(f64, f64)>),
}

/// Gaussian mass beyond this many standard deviations is folded into the last
/// enumerated cell (it is below 1e-18).
pub(crate) const GAUSSIAN_SPAN: f64 = 9.0;

impl DrawModel {
    pub fn gaussian(mean: f64, sigma: f64) -> Result<Self> {
        if !mean.is_finite() || !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!(
                "invalid draw distribution: mean={mean}, sigma={sigma}"
            )));
        }
        Ok(DrawModel::Gaussian { mean, sigma })
    }

    pub fn discrete(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("empty discrete distribution".into()));
        }
        let total: f64 = points.iter().map(|&(_, p)| p).sum();
        let valid = points
            .iter()
            .all(|&(w, p)| w.is_finite() && p.is_finite() && p >= 0.0);
        if !valid || (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "discrete distribution must have finite points and probabilities summing to 1 (got {total})"
            )));
        }
        Ok(DrawModel::Discrete(points))
    }

    /// Draw used by the deterministic reading of this distribution: the mean,
    /// clipped at zero.
    pub fn nominal(&self) -> f64 {
        match self {
            DrawModel::Gaussian { mean, .. } => mean.max(0.0),
            DrawModel::Discrete(points) => points.iter().map(|&(w, p)| w * p).sum::<f64>().max(0.0),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        match self {
            DrawModel::Gaussian { sigma, .. } => *sigma == 0.0,
            DrawModel::Discrete(_) => false,
        }
    }

    /// `P(max(W, 0) <= w)`.
    pub fn clipped_cdf(&self, w: f64) -> f64 {
        if w < 0.0 {
            return 0.0;
        }
        match self {
            DrawModel::Gaussian { mean, sigma } => {
                if *sigma == 0.0 {
                    if w >= *mean {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    standard_normal_cdf((w - mean) / sigma)
                }
            }
            DrawModel::Discrete(points) => points
                .iter()
                .filter(|&&(x, _)| x <= w)
                .map(|&(_, p)| p)
                .sum(),
        }
    }

    /// A draw beyond which the remaining probability is negligible.
    pub(crate) fn upper_support(&self) -> f64 {
        match self {
            DrawModel::Gaussian { mean, sigma } => (mean + GAUSSIAN_SPAN * sigma).max(0.0),
            DrawModel::Discrete(points) => points.iter().map(|&(w, _)| w).fold(0.0, f64::max),
        }
    }
}
