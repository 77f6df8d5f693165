//! Catalog of 1-D target distributions with CDF, survival function, quantile
//! and log-density.

use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

pub fn std_normal_pdf(z: f64) -> f64 {
    std_normal_ln_pdf(z).exp()
}

pub fn std_normal_ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

pub fn std_normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Distribution spec as read from JSON, e.g. `{"kind": "exponential", "rate": 1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Normal { mu: f64, sigma: f64 },
    Exponential { rate: f64 },
    Uniform { a: f64, b: f64 },
    GaussianMixture { weights: Vec<f64>, means: Vec<f64>, sigmas: Vec<f64> },
}

pub fn parse_distribution_json(text: &str) -> Result<Distribution> {
    let d: Distribution = serde_json::from_str(text)?;
    d.validate()?;
    Ok(d)
}

/// A JSON array of distribution specs, one per scalar block.
pub fn parse_targets_json(text: &str) -> Result<Vec<Distribution>> {
    let ds: Vec<Distribution> = serde_json::from_str(text)?;
    for d in &ds {
        d.validate()?;
    }
    Ok(ds)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")))
    }
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            Distribution::Normal { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::Parameter("normal mean must be finite".into()));
                }
                positive("sigma", *sigma)
            }
            Distribution::Exponential { rate } => positive("rate", *rate),
            Distribution::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::Parameter(format!("uniform needs finite a < b, got [{a}, {b}]")));
                }
                Ok(())
            }
            Distribution::GaussianMixture { weights, means, sigmas } => {
                if weights.is_empty() || weights.len() != means.len() || weights.len() != sigmas.len() {
                    return Err(Error::Parameter("mixture needs equal, non-zero numbers of weights, means and sigmas".into()));
                }
                for &w in weights {
                    positive("mixture weight", w)?;
                }
                for &s in sigmas {
                    positive("mixture sigma", s)?;
                }
                if means.iter().any(|m| !m.is_finite()) {
                    return Err(Error::Parameter("mixture means must be finite".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Parameter(format!("mixture weights sum to {total}, not 1")));
                }
                Ok(())
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Distribution::Normal { mu, sigma } => std_normal_cdf((x - mu) / sigma),
            Distribution::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Distribution::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Distribution::GaussianMixture { weights, means, sigmas } => weights
                .iter()
                .zip(means)
                .zip(sigmas)
                .map(|((w, m), s)| w * std_normal_cdf((x - m) / s))
                .sum(),
        }
    }

    /// `1 − F(x)`, accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        match self {
            Distribution::Normal { mu, sigma } => std_normal_cdf((mu - x) / sigma),
            Distribution::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Distribution::Uniform { a, b } => ((b - x) / (b - a)).clamp(0.0, 1.0),
            Distribution::GaussianMixture { weights, means, sigmas } => weights
                .iter()
                .zip(means)
                .zip(sigmas)
                .map(|((w, m), s)| w * std_normal_cdf((m - x) / s))
                .sum(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            Distribution::Normal { mu, sigma } => std_normal_ln_pdf((x - mu) / sigma) - sigma.ln(),
            Distribution::Exponential { rate } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * x
                }
            }
            Distribution::Uniform { a, b } => {
                if x < *a || x > *b {
                    f64::NEG_INFINITY
                } else {
                    -(b - a).ln()
                }
            }
            Distribution::GaussianMixture { weights, means, sigmas } => {
                let terms: Vec<f64> = weights
                    .iter()
                    .zip(means)
                    .zip(sigmas)
                    .map(|((w, m), s)| w.ln() + std_normal_ln_pdf((x - m) / s) - s.ln())
                    .collect();
                let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if top == f64::NEG_INFINITY {
                    return top;
                }
                top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
            }
        }
    }

    /// `F⁻¹(p)`.
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Distribution::Normal { mu, sigma } => mu + sigma * std_normal_quantile(p),
            Distribution::Exponential { rate } => -(-p).ln_1p() / rate,
            Distribution::Uniform { a, b } => a + (b - a) * p,
            Distribution::GaussianMixture { .. } => self.mixture_root(p, false),
        }
    }

    /// The `x` with `1 − F(x) = q`, for upper-tail accuracy.
    pub fn quantile_upper(&self, q: f64) -> f64 {
        match self {
            Distribution::Normal { mu, sigma } => mu - sigma * std_normal_quantile(q),
            Distribution::Exponential { rate } => -q.ln() / rate,
            Distribution::Uniform { a, b } => b - (b - a) * q,
            Distribution::GaussianMixture { .. } => self.mixture_root(q, true),
        }
    }

    /// Bisection on the CDF (or survival function) followed by Newton polish.
    fn mixture_root(&self, level: f64, upper: bool) -> f64 {
        let Distribution::GaussianMixture { means, sigmas, .. } = self else { unreachable!() };
        let mut lo = means.iter().zip(sigmas).map(|(m, s)| m - 12.0 * s).fold(f64::INFINITY, f64::min);
        let mut hi = means.iter().zip(sigmas).map(|(m, s)| m + 12.0 * s).fold(f64::NEG_INFINITY, f64::max);
        // g is increasing in x in both cases.
        let g = |x: f64| if upper { level - self.sf(x) } else { self.cdf(x) - level };
        let width = hi - lo;
        while g(lo) > 0.0 {
            lo -= width;
        }
        while g(hi) < 0.0 {
            hi += width;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-12 || mid == lo || mid == hi {
                break;
            }
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..3 {
            let dens = self.pdf(x);
            if !(dens > 0.0) {
                break;
            }
            let next = x - g(x) / dens;
            if !(next >= lo && next <= hi) || next == x {
                break;
            }
            x = next;
        }
        x
    }

    /// Closed-form differential entropy where one exists.
    pub fn entropy(&self) -> Option<f64> {
        match self {
            Distribution::Normal { sigma, .. } => Some(0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + sigma.ln()),
            Distribution::Exponential { rate } => Some(1.0 - rate.ln()),
            Distribution::Uniform { a, b } => Some((b - a).ln()),
            Distribution::GaussianMixture { .. } => None,
        }
    }
}
