//! The Marčenko–Pastur family with index `q = T/N` and scale `sigma2`.
//!
//! The continuous part has density
//! `q / (2π σ² x) · sqrt((σ² b_q − x)(x − σ² a_q))` on `[σ² a_q, σ² b_q]`
//! with `a_q = (1 − sqrt(1/q))²` and `b_q = (1 + sqrt(1/q))²`. When `q < 1`
//! an atom of mass `1 − q` sits at the origin.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::DistributionFunction;
use crate::quad;

const CDF_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpError {
    #[error(
        "invalid Marchenko-Pastur parameters: q={q}, sigma2={sigma2} (both must be finite and > 0)"
    )]
    InvalidParams { q: f64, sigma2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpParams {
    q: f64,
    sigma2: f64,
}

impl MpParams {
    pub fn new(q: f64, sigma2: f64) -> Result<Self, MpError> {
        if !(q.is_finite() && q > 0.0 && sigma2.is_finite() && sigma2 > 0.0) {
            return Err(MpError::InvalidParams { q, sigma2 });
        }
        Ok(Self { q, sigma2 })
    }

    /// Unit scale, `MP_q`.
    pub fn standard(q: f64) -> Result<Self, MpError> {
        Self::new(q, 1.0)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `(σ² a_q, σ² b_q)`.
    pub fn support(&self) -> (f64, f64) {
        let r = (1.0 / self.q).sqrt();
        let lower = (1.0 - r) * (1.0 - r);
        let upper = (1.0 + r) * (1.0 + r);
        (self.sigma2 * lower, self.sigma2 * upper)
    }

    /// Continuous density only; the atom is reported by [`Self::mass_at_zero`].
    ///
    /// Panics if `x` is NaN.
    pub fn pdf(&self, x: f64) -> f64 {
        assert!(!x.is_nan(), "mp pdf evaluated at NaN");
        let (lo, hi) = self.support();
        if x <= lo || x >= hi || x <= 0.0 {
            return 0.0;
        }
        self.q / (2.0 * PI * self.sigma2 * x) * ((hi - x) * (x - lo)).sqrt()
    }

    pub fn mass_at_zero(&self) -> f64 {
        (1.0 - self.q).max(0.0)
    }

    /// Distribution function, atom included.
    ///
    /// The density is integrated in the angle `θ` of `x = a + h(1 − cos θ)`,
    /// which turns both square-root edges (and the `x^{-1/2}` pole at `q = 1`)
    /// into an analytic integrand.
    ///
    /// Panics if `x` is NaN.
    pub fn cdf(&self, x: f64) -> f64 {
        assert!(!x.is_nan(), "mp cdf evaluated at NaN");
        if x < 0.0 {
            return 0.0;
        }
        let atom = self.mass_at_zero();
        let (lo, hi) = self.support();
        if x <= lo {
            return atom;
        }
        if x >= hi {
            return 1.0;
        }
        let half = 0.5 * (hi - lo);
        let theta_x = 2.0 * ((x - lo) / (2.0 * half)).sqrt().min(1.0).asin();
        let coef = self.q * half * half / (2.0 * PI * self.sigma2);
        let integrand = |theta: f64| {
            let (s, c) = (0.5 * theta).sin_cos();
            let s2 = s * s;
            let point = lo + 2.0 * half * s2;
            // sin²θ = 4 sin²(θ/2) cos²(θ/2)
            coef * 4.0 * s2 * c * c / point
        };
        let mass = quad::integrate(integrand, 0.0, theta_x, CDF_TOL);
        (atom + mass).clamp(0.0, 1.0)
    }

    /// Evenly spaced `(x, pdf, cdf)` rows over `[0.9·lower, 1.1·upper]`.
    pub fn curve(&self, points: usize) -> Vec<(f64, f64, f64)> {
        let (lo, hi) = self.support();
        let start = 0.9 * lo;
        let end = 1.1 * hi;
        match points {
            0 => Vec::new(),
            1 => vec![(start, self.pdf(start), self.cdf(start))],
            _ => {
                let step = (end - start) / (points - 1) as f64;
                (0..points)
                    .map(|k| {
                        let x = if k + 1 == points {
                            end
                        } else {
                            start + step * k as f64
                        };
                        (x, self.pdf(x), self.cdf(x))
                    })
                    .collect()
            }
        }
    }
}

impl DistributionFunction for MpParams {
    fn cdf(&self, x: f64) -> f64 {
        MpParams::cdf(self, x)
    }

    fn cdf_left(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            MpParams::cdf(self, x)
        }
    }

    fn jumps(&self) -> Vec<f64> {
        if self.q < 1.0 {
            vec![0.0]
        } else {
            Vec::new()
        }
    }

    fn has_continuous_part(&self) -> bool {
        true
    }

    fn span(&self) -> (f64, f64) {
        let (lo, hi) = self.support();
        (lo.min(0.0), hi)
    }
}
