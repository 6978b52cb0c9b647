//! Model branches, parameters and coefficient functions for the
//! mean-reverting CEV volatility SDE
//!
//! ```text
//! dx_t = [q(t) x_t - s(t) x_t^(2 gamma + 1)] dt + l(t) x_t^(gamma + 1) dZ_t
//! ```
//!
//! with `s(t) = (m - 1) l(t)^2 / 2` and the three solvable exponent
//! choices m = -gamma, gamma, -2 gamma.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VolCevError};

/// The three solvable exponent branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// m = -gamma: density known only through a Laplace-transform
    /// identity; moment pricing diverges.
    MNegGamma,
    /// m = gamma: degenerate (delta) transition law, fully closed-form
    /// swaps and options.
    MGamma,
    /// m = -2 gamma: Bessel-plus-atom transition density and closed-form
    /// moments, for the canonical coefficient pair.
    MNeg2Gamma,
}

/// Deterministic coefficient of time, evaluable and exactly integrable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoefficientFn {
    Constant { value: f64 },
    /// scale * exp(-rate * t); scale must be positive.
    ExpDecay { scale: f64, rate: f64 },
    /// Piecewise-linear in t; knots strictly increasing, flat beyond the ends.
    Tabulated { knots: Vec<(f64, f64)> },
}

impl CoefficientFn {
    pub fn constant(value: f64) -> Self {
        CoefficientFn::Constant { value }
    }

    pub fn exp_decay(scale: f64, rate: f64) -> Self {
        CoefficientFn::ExpDecay { scale, rate }
    }

    fn check(&self) -> Result<()> {
        match self {
            CoefficientFn::Constant { .. } => Ok(()),
            CoefficientFn::ExpDecay { scale, .. } => {
                if *scale > 0.0 {
                    Ok(())
                } else {
                    Err(VolCevError::Domain(format!("ExpDecay scale must be > 0, got {scale}")))
                }
            }
            CoefficientFn::Tabulated { knots } => {
                if knots.len() < 2 {
                    return Err(VolCevError::Domain(
                        "Tabulated coefficient needs at least two knots".into(),
                    ));
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(VolCevError::Domain(
                        "Tabulated knots must be strictly increasing in t".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            CoefficientFn::Constant { value } => *value,
            CoefficientFn::ExpDecay { scale, rate } => scale * (-rate * t).exp(),
            CoefficientFn::Tabulated { knots } => {
                if t <= knots[0].0 {
                    return knots[0].1;
                }
                if t >= knots[knots.len() - 1].0 {
                    return knots[knots.len() - 1].1;
                }
                let i = knots.partition_point(|&(tk, _)| tk <= t) - 1;
                let (t0, v0) = knots[i];
                let (t1, v1) = knots[i + 1];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Exact integral over [t0, t1] (analytic per kind; piecewise-linear
    /// segments integrated exactly for tabulated data).
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        if t1 < t0 {
            return -self.integral(t1, t0);
        }
        match self {
            CoefficientFn::Constant { value } => value * (t1 - t0),
            CoefficientFn::ExpDecay { scale, rate } => {
                if rate.abs() < 1e-14 {
                    scale * (t1 - t0)
                } else {
                    scale * ((-rate * t0).exp() - (-rate * t1).exp()) / rate
                }
            }
            CoefficientFn::Tabulated { .. } => {
                // trapezoid over the knot partition restricted to [t0, t1]
                let mut cuts: Vec<f64> = vec![t0];
                if let CoefficientFn::Tabulated { knots } = self {
                    for &(tk, _) in knots {
                        if tk > t0 && tk < t1 {
                            cuts.push(tk);
                        }
                    }
                }
                cuts.push(t1);
                cuts.windows(2)
                    .map(|w| 0.5 * (self.eval(w[0]) + self.eval(w[1])) * (w[1] - w[0]))
                    .sum()
            }
        }
    }

    /// The same coefficient run backwards over [0, horizon]:
    /// `reversed(t) = self(horizon - t)`.
    pub fn reversed_over(&self, horizon: f64) -> CoefficientFn {
        match self {
            CoefficientFn::Constant { value } => CoefficientFn::Constant { value: *value },
            CoefficientFn::ExpDecay { scale, rate } => CoefficientFn::ExpDecay {
                scale: scale * (-rate * horizon).exp(),
                rate: -rate,
            },
            CoefficientFn::Tabulated { knots } => {
                let mut rev: Vec<(f64, f64)> =
                    knots.iter().map(|&(t, v)| (horizon - t, v)).collect();
                rev.reverse();
                CoefficientFn::Tabulated { knots: rev }
            }
        }
    }
}

/// A constraint the spec fails to meet for a requested computation.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Moment of order `i` with gamma > 0 needs gamma > (i-1)/2
    /// (equivalently CEV exponent beta = (2+gamma)/2 above its floor).
    ExponentRange { moment_order: u32, gamma: f64, gamma_min: f64 },
    /// gamma at or below -1 breaks mean reversion of the variance drift.
    GammaBelowMinusOne { gamma: f64 },
    /// The m = -gamma branch has no finite moment prices: the
    /// fractional-derivative representation of E[y^i] diverges.
    MomentPricingDiverges,
    /// Closed forms for m = -2 gamma require q(t) = -theta and
    /// l(t) = epsilon * exp(-theta * gamma * t).
    NonCanonicalCoefficients { max_q_dev: f64, max_l_dev: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::ExponentRange { moment_order, gamma, gamma_min } => write!(
                f,
                "moment i={moment_order} with gamma={gamma} > 0 requires gamma > {gamma_min} \
                 (CEV exponent beta = (2+gamma)/2 > {})",
                1.0 + gamma_min / 2.0
            ),
            Violation::GammaBelowMinusOne { gamma } => {
                write!(f, "gamma={gamma} <= -1 breaks mean reversion of the variance drift")
            }
            Violation::MomentPricingDiverges => write!(
                f,
                "the m = -gamma branch cannot price moments: the moment integral diverges \
                 for every order, so this model is rejected for pricing"
            ),
            Violation::NonCanonicalCoefficients { max_q_dev, max_l_dev } => write!(
                f,
                "closed forms for m = -2 gamma require q(t) = -theta and \
                 l(t) = epsilon*exp(-theta*gamma*t); observed deviations q: {max_q_dev:.2e}, \
                 l: {max_l_dev:.2e}"
            ),
        }
    }
}

/// Full parameterization of one solvable model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub branch: Branch,
    pub gamma: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub q_fn: CoefficientFn,
    pub l_fn: CoefficientFn,
}

impl ModelSpec {
    pub fn new(
        branch: Branch,
        gamma: f64,
        theta: f64,
        epsilon: f64,
        q_fn: CoefficientFn,
        l_fn: CoefficientFn,
    ) -> Result<Self> {
        if gamma == 0.0 {
            return Err(VolCevError::Domain("gamma must be nonzero".into()));
        }
        if !(epsilon > 0.0) {
            return Err(VolCevError::Domain(format!("epsilon must be > 0, got {epsilon}")));
        }
        if theta < 0.0 {
            return Err(VolCevError::Domain(format!("theta must be >= 0, got {theta}")));
        }
        q_fn.check()?;
        l_fn.check()?;
        Ok(ModelSpec { branch, gamma, theta, epsilon, q_fn, l_fn })
    }

    /// The coefficient pair that makes the m = -2 gamma branch solvable:
    /// constant q = -theta and l(t) = epsilon * exp(-theta * gamma * t).
    pub fn canonical(branch: Branch, gamma: f64, theta: f64, epsilon: f64) -> Result<Self> {
        let q_fn = CoefficientFn::constant(-theta);
        let l_fn = CoefficientFn::exp_decay(epsilon, theta * gamma);
        ModelSpec::new(branch, gamma, theta, epsilon, q_fn, l_fn)
    }

    /// Largest pointwise deviation of (q, l) from the canonical pair on a
    /// probe grid over [0, t_max].
    pub fn canonical_deviation(&self, t_max: f64) -> (f64, f64) {
        let n = 17;
        let mut dq = 0.0f64;
        let mut dl = 0.0f64;
        for k in 0..=n {
            let t = t_max * k as f64 / n as f64;
            dq = dq.max((self.q_fn.eval(t) + self.theta).abs());
            let l_ref = self.epsilon * (-self.theta * self.gamma * t).exp();
            dl = dl.max((self.l_fn.eval(t) - l_ref).abs());
        }
        (dq, dl)
    }

    pub fn is_canonical(&self, t_max: f64) -> bool {
        let (dq, dl) = self.canonical_deviation(t_max);
        dq <= 1e-12 && dl <= 1e-12
    }

    /// Drift of the instantaneous-volatility SDE at (t, x).
    pub fn drift_vol(&self, t: f64, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Err(VolCevError::Domain(format!("drift_vol requires x > 0, got {x}")));
        }
        let g = self.gamma;
        let l = self.l_fn.eval(t);
        let q = self.q_fn.eval(t);
        let coeff = match self.branch {
            Branch::MNegGamma => 0.5 * (g + 1.0),
            Branch::MGamma => 0.5 * (1.0 - g),
            Branch::MNeg2Gamma => 0.5 * (1.0 + 2.0 * g),
        };
        Ok(coeff * l * l * x.powf(2.0 * g + 1.0) + q * x)
    }

    /// Diffusion of the instantaneous-volatility SDE: l(t) x^(gamma+1).
    pub fn diffusion_vol(&self, t: f64, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Err(VolCevError::Domain(format!("diffusion_vol requires x > 0, got {x}")));
        }
        Ok(self.l_fn.eval(t) * x.powf(self.gamma + 1.0))
    }

    /// Drift of the instantaneous-variance SDE (Ito image of `drift_vol`):
    /// `drift_var(t, x^2) = 2 x drift_vol(t, x) + diffusion_vol(t, x)^2`.
    pub fn drift_var(&self, t: f64, v: f64) -> Result<f64> {
        if v <= 0.0 {
            return Err(VolCevError::Domain(format!("drift_var requires v > 0, got {v}")));
        }
        let g = self.gamma;
        let l = self.l_fn.eval(t);
        let q = self.q_fn.eval(t);
        let coeff = match self.branch {
            Branch::MNegGamma => 2.0 + g,
            Branch::MGamma => 2.0 - g,
            Branch::MNeg2Gamma => 2.0 * (1.0 + g),
        };
        Ok(coeff * l * l * v.powf(1.0 + g) + 2.0 * q * v)
    }

    /// exp(gamma * integral of q over [t, t_prime]); equals 1 at t = t_prime.
    pub fn z_factor(&self, t: f64, t_prime: f64) -> Result<f64> {
        if t > t_prime {
            return Err(VolCevError::Domain(format!(
                "z_factor requires t <= t_prime, got t={t}, t_prime={t_prime}"
            )));
        }
        Ok((self.gamma * self.q_fn.integral(t, t_prime)).exp())
    }

    /// Constraints that must hold for closed-form pricing of moment `i`.
    /// An empty list means the spec supports it.
    pub fn validate(&self, moment_order: u32) -> Vec<Violation> {
        let mut out = Vec::new();
        match self.branch {
            Branch::MNegGamma => out.push(Violation::MomentPricingDiverges),
            Branch::MGamma => {}
            Branch::MNeg2Gamma => {
                let g = self.gamma;
                if g > 0.0 {
                    let gamma_min = (moment_order as f64 - 1.0) / 2.0;
                    if g <= gamma_min {
                        out.push(Violation::ExponentRange {
                            moment_order,
                            gamma: g,
                            gamma_min,
                        });
                    }
                } else if g <= -1.0 {
                    out.push(Violation::GammaBelowMinusOne { gamma: g });
                }
                let (dq, dl) = self.canonical_deviation(2.0);
                if dq > 1e-12 || dl > 1e-12 {
                    out.push(Violation::NonCanonicalCoefficients { max_q_dev: dq, max_l_dev: dl });
                }
            }
        }
        out
    }
}
