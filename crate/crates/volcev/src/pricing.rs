//! Closed-form strikes for moment, variance and volatility swaps, and
//! quadrature prices for options on realized moments.
//!
//! For the m = -2 gamma branch the moment functional entering the i-th
//! swap leg is
//!
//! ```text
//! Q_i(tau, x) = G phi^(1-kappa) Gamma(2-kappa) M(kappa, 2, -G),
//! kappa = (i-1)/(2 gamma),  phi = 2 tau gamma^2 epsilon^2,
//! G = e^(2 tau gamma theta) x^(-2 gamma) / phi,
//! ```
//!
//! which equals the transition moment E[y^(i-1-2 gamma)] and tends to
//! x^(i-1-2 gamma) as tau -> 0. Genuine power moments E[y^j] come from
//! the same kernel with kappa = 1 + j/(2 gamma).

use std::cell::{Cell, RefCell};

use crate::density::{density_m_gamma, DensityEval, TransitionQuery};
use crate::error::{Result, VolCevError};
use crate::model::{Branch, ModelSpec};
use crate::quad;
use crate::specialfn;

/// The (G, phi, kappa) triple of one moment evaluation.
#[derive(Debug, Clone, Copy)]
pub struct MomentKernel {
    pub g_big: f64,
    pub phi: f64,
    pub kappa: f64,
}

impl MomentKernel {
    fn from_parts(spec: &ModelSpec, x: f64, tau: f64, kappa: f64) -> Result<Self> {
        if spec.branch != Branch::MNeg2Gamma {
            return Err(VolCevError::Domain(format!(
                "moment kernel requires the m = -2 gamma branch, got {:?}",
                spec.branch
            )));
        }
        if !(x > 0.0) {
            return Err(VolCevError::Domain(format!("x must be > 0, got {x}")));
        }
        if !(tau > 0.0) {
            return Err(VolCevError::Domain(format!("tau must be > 0, got {tau}")));
        }
        if !(kappa < 2.0) {
            return Err(VolCevError::Domain(format!(
                "moment diverges: kappa = {kappa} >= 2 puts Gamma(2 - kappa) at or past its pole"
            )));
        }
        let g = spec.gamma;
        let phi = 2.0 * tau * g * g * spec.epsilon * spec.epsilon;
        let a = (tau * g * spec.theta).exp() * x.powf(-g);
        Ok(MomentKernel { g_big: a * a / phi, phi, kappa })
    }

    /// Kernel of the i-th swap functional Q_i, i >= 1.
    pub fn printed(spec: &ModelSpec, x: f64, tau: f64, i: u32) -> Result<Self> {
        if i < 1 {
            return Err(VolCevError::Domain("moment order must be >= 1".into()));
        }
        Self::from_parts(spec, x, tau, (i as f64 - 1.0) / (2.0 * spec.gamma))
    }

    /// Kernel of the genuine power moment E[y^j].
    pub fn power(spec: &ModelSpec, x: f64, tau: f64, j: f64) -> Result<Self> {
        Self::from_parts(spec, x, tau, 1.0 + j / (2.0 * spec.gamma))
    }

    /// ln of the kernel value; safe for the short-horizon blow-up of G.
    pub fn ln_value(&self) -> Result<f64> {
        Ok(self.g_big.ln() + (1.0 - self.kappa) * self.phi.ln()
            + specialfn::ln_gamma(2.0 - self.kappa)?
            + specialfn::ln_kummer_m_negarg(self.kappa, 2.0, self.g_big)?)
    }

    pub fn value(&self) -> Result<f64> {
        let ln = self.ln_value()?;
        if ln > 709.0 {
            return Err(VolCevError::Overflow(ln));
        }
        Ok(ln.exp())
    }
}

fn validated(spec: &ModelSpec, moment_order: u32) -> Result<()> {
    let violations = spec.validate(moment_order);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(VolCevError::Validation(violations))
    }
}

/// The i-th moment functional of the transition over [t, t_prime].
///
/// m = -2 gamma: the closed-form kernel above. m = gamma: the delta law
/// transports x along the flow, so the functional is the genuine moment
/// x^i exp(i integral of q). m = -gamma: rejected, no finite moments.
pub fn moment_expectation(spec: &ModelSpec, x: f64, t: f64, t_prime: f64, i: u32) -> Result<f64> {
    validated(spec, i)?;
    if t_prime == t {
        // analytic short-horizon limit, so time integrals can touch tau = 0
        if !(x > 0.0) {
            return Err(VolCevError::Domain(format!("x must be > 0, got {x}")));
        }
        return Ok(match spec.branch {
            Branch::MNeg2Gamma => x.powf(i as f64 - 1.0 - 2.0 * spec.gamma),
            _ => x.powi(i as i32),
        });
    }
    match spec.branch {
        Branch::MNeg2Gamma => MomentKernel::printed(spec, x, t_prime - t, i)?.value(),
        Branch::MGamma => {
            if !(x > 0.0) {
                return Err(VolCevError::Domain(format!("x must be > 0, got {x}")));
            }
            Ok(x.powi(i as i32) * (i as f64 * spec.q_fn.integral(t, t_prime)).exp())
        }
        Branch::MNegGamma => unreachable!("validate rejects m = -gamma"),
    }
}

/// Genuine transition moment E[y_{t'}^j | x_t = x].
pub fn generalized_moment(spec: &ModelSpec, x: f64, t: f64, t_prime: f64, j: f64) -> Result<f64> {
    match spec.branch {
        Branch::MNeg2Gamma => {
            validated(spec, 1)?;
            MomentKernel::power(spec, x, t_prime - t, j)?.value()
        }
        Branch::MGamma => {
            if !(x > 0.0) {
                return Err(VolCevError::Domain(format!("x must be > 0, got {x}")));
            }
            Ok(x.powf(j) * (j * spec.q_fn.integral(t, t_prime)).exp())
        }
        Branch::MNegGamma => validated(spec, 1).map(|_| unreachable!()),
    }
}

/// Fair strike of a swap, or the realized-moment leg of an option.
#[derive(Debug, Clone, Copy)]
pub struct SwapQuote {
    pub moment_order: u32,
    pub horizon: f64,
    pub x0: f64,
    pub value: f64,
    pub quadrature_error: f64,
    pub branch: Branch,
    pub converged: bool,
}

fn check_contract(x0: f64, horizon: f64) -> Result<()> {
    if !(x0 > 0.0) {
        return Err(VolCevError::Domain(format!("x0 must be > 0, got {x0}")));
    }
    if !(horizon > 0.0) {
        return Err(VolCevError::Domain(format!("horizon must be > 0, got {horizon}")));
    }
    Ok(())
}

/// Fair strike of the i-th moment swap:
/// V_i = (1/T) integral over [0, T] of the i-th moment functional.
pub fn moment_swap_fair_strike(
    spec: &ModelSpec,
    x0: f64,
    horizon: f64,
    i: u32,
) -> Result<SwapQuote> {
    check_contract(x0, horizon)?;
    validated(spec, i)?;
    let inner_err: RefCell<Option<VolCevError>> = RefCell::new(None);
    let r = quad::integrate(
        |t| match moment_expectation(spec, x0, 0.0, t, i) {
            Ok(v) => v,
            Err(e) => {
                inner_err.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        horizon,
        1e-12,
        1e-9,
    );
    if let Some(e) = inner_err.into_inner() {
        return Err(e);
    }
    Ok(SwapQuote {
        moment_order: i,
        horizon,
        x0,
        value: r.value / horizon,
        quadrature_error: r.abs_error / horizon,
        branch: spec.branch,
        converged: r.converged,
    })
}

/// Fair strike of the i-th variance-swap-family contract; alias of
/// [`moment_swap_fair_strike`] (the realized quantity of the i = 1
/// contract is (1/T) integral of x_t^(-2 gamma)).
pub fn variance_swap_fair_strike(
    spec: &ModelSpec,
    x0: f64,
    horizon: f64,
    i: u32,
) -> Result<SwapQuote> {
    moment_swap_fair_strike(spec, x0, horizon, i)
}

/// The m = gamma moment swap, V_i = x^i (1/T) integral of
/// exp(i integral of q); independent of epsilon and gamma.
pub fn moment_swap_m_gamma(spec: &ModelSpec, x0: f64, horizon: f64, i: u32) -> Result<SwapQuote> {
    if spec.branch != Branch::MGamma {
        return Err(VolCevError::Domain(format!(
            "moment_swap_m_gamma requires the m = gamma branch, got {:?}",
            spec.branch
        )));
    }
    moment_swap_fair_strike(spec, x0, horizon, i)
}

/// Average genuine moment (1/T) integral of E[y_t^n]; the strike that
/// makes the realized-moment leg of an option worth zero.
pub fn realized_moment_strike(
    spec: &ModelSpec,
    x0: f64,
    horizon: f64,
    n: u32,
) -> Result<SwapQuote> {
    check_contract(x0, horizon)?;
    let inner_err: RefCell<Option<VolCevError>> = RefCell::new(None);
    let r = quad::integrate(
        |t| match generalized_moment(spec, x0, 0.0, t, n as f64) {
            Ok(v) => v,
            Err(e) => {
                inner_err.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        horizon,
        1e-12,
        1e-9,
    );
    if let Some(e) = inner_err.into_inner() {
        return Err(e);
    }
    Ok(SwapQuote {
        moment_order: n,
        horizon,
        x0,
        value: r.value / horizon,
        quadrature_error: r.abs_error / horizon,
        branch: spec.branch,
        converged: r.converged,
    })
}

/// Fair strike of a volatility swap with convexity correction.
#[derive(Debug, Clone, Copy)]
pub struct VolSwapQuote {
    pub horizon: f64,
    pub x0: f64,
    /// sqrt(V1) - Var[V] / (8 V1^(3/2))
    pub value: f64,
    pub fair_variance: f64,
    pub variance_of_v: f64,
    /// Set when the quadrature estimate of Var[V] came out (slightly)
    /// negative and was clamped to zero.
    pub variance_clamped: bool,
    pub converged: bool,
}

/// Volatility swap via the second-order expansion of the square root.
///
/// E[V^2] is the double integral of the product of one-step moment
/// functionals; for this model it factorizes into V1^2, so the
/// correction vanishes up to quadrature noise.
pub fn volatility_swap_fair_strike(
    spec: &ModelSpec,
    x0: f64,
    horizon: f64,
) -> Result<VolSwapQuote> {
    check_contract(x0, horizon)?;
    if spec.branch != Branch::MNeg2Gamma || spec.gamma >= 0.0 {
        return Err(VolCevError::Domain(format!(
            "volatility swap needs the m = -2 gamma branch with gamma < 0, got {:?} with \
             gamma = {}",
            spec.branch, spec.gamma
        )));
    }
    let v1 = moment_swap_fair_strike(spec, x0, horizon, 1)?;
    let inner_err: RefCell<Option<VolCevError>> = RefCell::new(None);
    let ev2 = quad::integrate_2d(
        |s, t| {
            let a = moment_expectation(spec, x0, 0.0, s, 1);
            let b = moment_expectation(spec, x0, 0.0, t, 1);
            match (a, b) {
                (Ok(a), Ok(b)) => a * b,
                (Err(e), _) | (_, Err(e)) => {
                    inner_err.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            }
        },
        0.0,
        horizon,
        0.0,
        horizon,
        1e-10,
    );
    if let Some(e) = inner_err.into_inner() {
        return Err(e);
    }
    let e_v2 = ev2.value / (horizon * horizon);
    let raw_var = e_v2 - v1.value * v1.value;
    let variance_clamped = raw_var < 0.0;
    let var = raw_var.max(0.0);
    let value = v1.value.sqrt() - var / (8.0 * v1.value.powf(1.5));
    Ok(VolSwapQuote {
        horizon,
        x0,
        value,
        fair_variance: v1.value,
        variance_of_v: var,
        variance_clamped,
        converged: v1.converged && ev2.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PricingMethod {
    /// m = gamma: pointwise positive part of the deterministic flow.
    ClosedForm,
    /// m = -2 gamma: quadrature against the Bessel-plus-atom density.
    DoubleIntegral,
}

#[derive(Debug, Clone, Copy)]
pub struct OptionQuote {
    pub kind: OptionKind,
    pub moment_power: u32,
    pub strike: f64,
    pub rate: f64,
    pub horizon: f64,
    pub value: f64,
    pub method: PricingMethod,
    pub converged: bool,
}

/// Option on the realized n-th moment, priced slice by slice:
///
/// ```text
/// call = e^(-rT) (1/T) integral over [0,T] of E[(y_t^n - K)+] dt
/// ```
///
/// and the put likewise with (K - y_t^n)+. The boundary atom of the
/// m = -2 gamma law sits at y = 0 (gamma < 0) and contributes K times
/// its mass to every put slice. Slice-wise put-call parity against
/// [`realized_moment_strike`] is exact.
pub fn option_on_moment_swap(
    spec: &ModelSpec,
    x0: f64,
    horizon: f64,
    n: u32,
    strike: f64,
    rate: f64,
    kind: OptionKind,
) -> Result<OptionQuote> {
    check_contract(x0, horizon)?;
    if n < 1 {
        return Err(VolCevError::Domain("moment power must be >= 1".into()));
    }
    if !(strike > 0.0) {
        return Err(VolCevError::Domain(format!("strike must be > 0, got {strike}")));
    }
    let (method, slice): (PricingMethod, Box<dyn Fn(f64) -> Result<(f64, bool)> + '_>) =
        match spec.branch {
        Branch::MNeg2Gamma => {
            if spec.gamma > 0.0 {
                return Err(VolCevError::Domain(
                    "option pricing needs a normalized density; for gamma > 0 the \
                     m = -2 gamma closed form is only formal"
                        .into(),
                ));
            }
            validated(spec, n)?;
            let y_k = strike.powf(1.0 / n as f64);
            let f = move |t: f64| -> Result<(f64, bool)> {
                let query = TransitionQuery::new(spec.clone(), x0, 0.0, t)?;
                let eval = DensityEval::new(&query)?;
                let r = match kind {
                    OptionKind::Call => eval.integrate_between(
                        |y| y.powi(n as i32) - strike,
                        y_k,
                        f64::INFINITY,
                        1e-11,
                    ),
                    OptionKind::Put => {
                        let cont = eval.integrate_between(
                            |y| strike - y.powi(n as i32),
                            0.0,
                            y_k,
                            1e-11,
                        );
                        return Ok((cont.value + strike * eval.atom_mass(), cont.converged));
                    }
                };
                Ok((r.value, r.converged))
            };
            (PricingMethod::DoubleIntegral, Box::new(f))
        }
        Branch::MGamma => {
            let f = move |t: f64| -> Result<(f64, bool)> {
                let query = TransitionQuery::new(spec.clone(), x0, 0.0, t)?;
                let point = density_m_gamma(&query)?.point;
                let diff = point.powi(n as i32) - strike;
                let v = match kind {
                    OptionKind::Call => diff.max(0.0),
                    OptionKind::Put => (-diff).max(0.0),
                };
                Ok((v, true))
            };
            (PricingMethod::ClosedForm, Box::new(f))
        }
        Branch::MNegGamma => return validated(spec, n).map(|_| unreachable!()),
    };

    let inner_err: RefCell<Option<VolCevError>> = RefCell::new(None);
    let inner_converged = Cell::new(true);
    let outer = quad::integrate(
        |t| match slice(t) {
            Ok((v, c)) => {
                if !c {
                    inner_converged.set(false);
                }
                v
            }
            Err(e) => {
                inner_err.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        horizon,
        1e-9,
        1e-8,
    );
    if let Some(e) = inner_err.into_inner() {
        return Err(e);
    }
    Ok(OptionQuote {
        kind,
        moment_power: n,
        strike,
        rate,
        horizon,
        value: (-rate * horizon).exp() * outer.value / horizon,
        method,
        converged: outer.converged && inner_converged.get(),
    })
}
