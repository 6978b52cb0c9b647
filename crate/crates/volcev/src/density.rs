//! Closed-form transition laws of the instantaneous volatility.
//!
//! The m = -2 gamma branch has an absolutely continuous Bessel part plus
//! a point mass at the boundary where y^(-2 gamma) vanishes; the
//! m = gamma branch degenerates to a unit point mass transported along
//! the deterministic flow.

use crate::error::{Result, VolCevError};
use crate::model::{Branch, ModelSpec, Violation};
use crate::quad;
use crate::specialfn;

/// Backward transition query: start level `x` at time `t`, target time
/// `t_prime > t`.
#[derive(Debug, Clone)]
pub struct TransitionQuery {
    pub spec: ModelSpec,
    pub x: f64,
    pub t: f64,
    pub t_prime: f64,
}

impl TransitionQuery {
    pub fn new(spec: ModelSpec, x: f64, t: f64, t_prime: f64) -> Result<Self> {
        if !(x > 0.0) {
            return Err(VolCevError::Domain(format!("initial level x must be > 0, got {x}")));
        }
        if !(t_prime > t) {
            return Err(VolCevError::Domain(format!(
                "need t_prime > t, got t={t}, t_prime={t_prime}"
            )));
        }
        Ok(TransitionQuery { spec, x, t, t_prime })
    }

    pub fn tau(&self) -> f64 {
        self.t_prime - self.t
    }
}

/// Where the boundary atom sits: y^(-2 gamma) = 0 is y -> 0+ for
/// gamma < 0 and y -> infinity for gamma > 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomLocation {
    OriginBoundary,
    InfinityBoundary,
}

/// Evaluator for the m = -2 gamma transition law at fixed (x, tau).
///
/// `formal_only` is set for gamma > 0, where the closed form does not
/// integrate to one and must be treated as a formal expression; callers
/// should surface a warning rather than an error.
#[derive(Debug, Clone)]
pub struct DensityEval {
    gamma: f64,
    /// e^(tau gamma theta) x^(-gamma)
    a: f64,
    /// 2 tau gamma^2 epsilon^2
    phi: f64,
    /// a^2 / phi
    g_big: f64,
    pub formal_only: bool,
}

impl DensityEval {
    pub fn new(query: &TransitionQuery) -> Result<Self> {
        let spec = &query.spec;
        if spec.branch != Branch::MNeg2Gamma {
            return Err(VolCevError::Domain(format!(
                "the Bessel-plus-atom density requires the m = -2 gamma branch, got {:?}",
                spec.branch
            )));
        }
        if !spec.is_canonical(query.t_prime.max(1.0)) {
            let (dq, dl) = spec.canonical_deviation(query.t_prime.max(1.0));
            return Err(VolCevError::Validation(vec![Violation::NonCanonicalCoefficients {
                max_q_dev: dq,
                max_l_dev: dl,
            }]));
        }
        let g = spec.gamma;
        let tau = query.tau();
        let phi = 2.0 * tau * g * g * spec.epsilon * spec.epsilon;
        let a = (tau * g * spec.theta).exp() * query.x.powf(-g);
        Ok(DensityEval { gamma: g, a, phi, g_big: a * a / phi, formal_only: g > 0.0 })
    }

    /// Density of the absolutely continuous part at level y > 0.
    pub fn continuous_at(&self, y: f64) -> f64 {
        if !(y > 0.0) {
            return 0.0;
        }
        let g = self.gamma;
        let w = y.powf(-g);
        let b = 2.0 * self.a * w / self.phi;
        let scaled = match specialfn::bessel_i1_scaled(b) {
            Ok(r) => r.value,
            Err(_) => return 0.0,
        };
        if scaled <= 0.0 {
            return 0.0;
        }
        // exponents fused in log space: the Gaussian kernel in w = y^(-gamma)
        // absorbs the unscaled Bessel growth exactly
        let d = self.a - w;
        let ln_p = (2.0 * g.abs()).ln() - (g + 1.0) * y.ln() + self.a.ln() - self.phi.ln()
            - d * d / self.phi
            + scaled.ln();
        if ln_p < -740.0 {
            0.0
        } else {
            ln_p.exp()
        }
    }

    /// Boundary-absorption probability exp(-G); complements the
    /// continuous mass so the law totals one.
    pub fn atom_mass(&self) -> f64 {
        (-self.g_big).exp()
    }

    pub fn atom_location(&self) -> AtomLocation {
        if self.gamma < 0.0 {
            AtomLocation::OriginBoundary
        } else {
            AtomLocation::InfinityBoundary
        }
    }

    /// y-interval outside which the continuous part carries less than
    /// ~1e-15 of mass. The Gaussian factor in w = y^(-gamma) sets the
    /// bulk; a separate polynomial-tail bound covers the boundary side.
    pub fn support(&self) -> (f64, f64) {
        const L: f64 = 60.0;
        let half = (L * self.phi).sqrt();
        let w_gauss_lo = self.a - half;
        let w_hi = self.a + half;
        let w_lo = if w_gauss_lo > 0.0 {
            w_gauss_lo
        } else {
            // mass below w_cut is ~ e^{-G} (G/phi) w_cut^2; once the
            // boundary mass is negligible any cut well under the peak works
            let w_cut = (1e-16 * self.phi * (self.g_big.min(700.0)).exp()
                / self.g_big.max(1e-300))
            .sqrt();
            w_cut.min(0.01 * self.a).max(1e-300)
        };
        let y1 = w_lo.powf(-1.0 / self.gamma);
        let y2 = w_hi.powf(-1.0 / self.gamma);
        (y1.min(y2), y1.max(y2))
    }

    /// Integral of f(y) against the continuous part, on a log axis.
    pub fn integrate_against<F: Fn(f64) -> f64>(&self, f: F, abs_tol: f64) -> quad::QuadResult {
        let (y_lo, y_hi) = self.support();
        quad::integrate(
            |u| {
                let y = u.exp();
                f(y) * self.continuous_at(y) * y
            },
            y_lo.ln(),
            y_hi.ln(),
            abs_tol,
            1e-9,
        )
    }

    /// Integral of f(y) against the continuous part restricted to
    /// [lo, hi], intersected with the numerical support.
    pub fn integrate_between<F: Fn(f64) -> f64>(
        &self,
        f: F,
        lo: f64,
        hi: f64,
        abs_tol: f64,
    ) -> quad::QuadResult {
        let (y_lo, y_hi) = self.support();
        let a = lo.max(y_lo);
        let b = hi.min(y_hi);
        if !(b > a) {
            return quad::QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0, converged: true };
        }
        quad::integrate(
            |u| {
                let y = u.exp();
                f(y) * self.continuous_at(y) * y
            },
            a.ln(),
            b.ln(),
            abs_tol,
            1e-9,
        )
    }

    /// Total mass of the continuous part by quadrature.
    pub fn continuous_mass(&self) -> quad::QuadResult {
        self.integrate_against(|_| 1.0, 1e-10)
    }
}

/// Continuous part of the m = -2 gamma transition density at y.
pub fn density_m_neg2gamma(query: &TransitionQuery, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(VolCevError::Domain(format!("density requires y > 0, got {y}")));
    }
    Ok(DensityEval::new(query)?.continuous_at(y))
}

/// Boundary-atom mass of the m = -2 gamma transition law.
pub fn atom_mass_m_neg2gamma(query: &TransitionQuery) -> Result<f64> {
    Ok(DensityEval::new(query)?.atom_mass())
}

/// The m = gamma transition law: a unit point mass at the flow image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaLaw {
    /// y* = x exp(integral of q over [t, t'])
    pub point: f64,
}

pub fn density_m_gamma(query: &TransitionQuery) -> Result<DeltaLaw> {
    let spec = &query.spec;
    if spec.branch != Branch::MGamma {
        return Err(VolCevError::Domain(format!(
            "density_m_gamma requires the m = gamma branch, got {:?}",
            spec.branch
        )));
    }
    let point = query.x * spec.q_fn.integral(query.t, query.t_prime).exp();
    Ok(DeltaLaw { point })
}

/// Quadrature side of the Laplace-transform identity:
/// integral of e^(-y^(-2 gamma) mu) against the full law (continuous
/// part plus atom; the atom sits where the exponent vanishes, so it
/// contributes its mass unchanged).
pub fn laplace_transform_lhs(query: &TransitionQuery, mu: f64) -> Result<f64> {
    if mu < 0.0 {
        return Err(VolCevError::Domain(format!("mu must be >= 0, got {mu}")));
    }
    let eval = DensityEval::new(query)?;
    let g2 = -2.0 * query.spec.gamma;
    let cont = eval.integrate_against(|y| (-y.powf(g2) * mu).exp(), 1e-10);
    Ok(cont.value + eval.atom_mass())
}

/// Closed right-hand side of the Laplace-transform identity.
pub fn laplace_transform_rhs(query: &TransitionQuery, mu: f64) -> Result<f64> {
    if mu < 0.0 {
        return Err(VolCevError::Domain(format!("mu must be >= 0, got {mu}")));
    }
    let spec = &query.spec;
    if spec.branch != Branch::MNeg2Gamma {
        return Err(VolCevError::Domain(format!(
            "the Laplace-transform closed form requires the m = -2 gamma branch, got {:?}",
            spec.branch
        )));
    }
    let g = spec.gamma;
    let tau = query.tau();
    let phi = 2.0 * tau * g * g * spec.epsilon * spec.epsilon;
    let num = (2.0 * tau * g * spec.theta).exp() * query.x.powf(-2.0 * g) * mu;
    Ok((-num / (1.0 + phi * mu)).exp())
}

/// Integral of y^power against the continuous part (the atom contributes
/// nothing for power > 0 with gamma < 0, where it sits at the origin).
pub fn moment_by_quadrature(query: &TransitionQuery, power: f64) -> Result<quad::QuadResult> {
    let eval = DensityEval::new(query)?;
    Ok(eval.integrate_against(|y| y.powf(power), 1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoefficientFn;

    fn query(gamma: f64, theta: f64, eps: f64, x: f64, tau: f64) -> TransitionQuery {
        let spec = ModelSpec::canonical(Branch::MNeg2Gamma, gamma, theta, eps).unwrap();
        TransitionQuery::new(spec, x, 0.0, tau).unwrap()
    }

    #[test]
    fn atom_mass_hand_value() {
        // exp(-e^{2*0.5*(-0.6)*0.1} * 0.2^{1.2} / (2*0.5*0.36*0.01))
        let q = query(-0.6, 0.1, 0.1, 0.2, 0.5);
        let expected = 3.398_356_831_937_069e-17;
        let got = atom_mass_m_neg2gamma(&q).unwrap();
        assert!((got - expected).abs() < 1e-27, "{got}");
    }

    #[test]
    fn atom_mass_vanishes_at_short_horizon() {
        let q = query(-0.6, 0.1, 0.1, 0.2, 1e-8);
        assert_eq!(atom_mass_m_neg2gamma(&q).unwrap(), 0.0);
    }

    #[test]
    fn atom_mass_monotone_in_tau() {
        let mut last = 0.0;
        for &tau in &[0.1, 0.5, 1.0, 2.0, 5.0, 20.0] {
            let m = atom_mass_m_neg2gamma(&query(-0.6, 0.1, 0.1, 0.2, tau)).unwrap();
            assert!(m >= last, "tau={tau}");
            last = m;
        }
    }

    #[test]
    fn continuous_mass_complements_atom() {
        let q = query(-0.5, 0.1, 0.1, 0.2, 1.0);
        let eval = DensityEval::new(&q).unwrap();
        let total = eval.continuous_mass().value + eval.atom_mass();
        assert!((total - 1.0).abs() < 1e-7, "total={total}");
    }

    #[test]
    fn density_nonnegative_on_log_grid() {
        let q = query(-0.6, 0.1, 0.1, 0.2, 0.5);
        let eval = DensityEval::new(&q).unwrap();
        let mut y = 1e-6;
        while y < 1e3 {
            assert!(eval.continuous_at(y) >= 0.0, "y={y}");
            y *= 3.7;
        }
    }

    #[test]
    fn density_rejects_wrong_branch_and_bad_y() {
        let spec = ModelSpec::canonical(Branch::MGamma, 0.5, 0.1, 0.1).unwrap();
        let q = TransitionQuery::new(spec, 0.2, 0.0, 0.5).unwrap();
        assert!(density_m_neg2gamma(&q, 0.2).is_err());
        let q2 = query(-0.6, 0.1, 0.1, 0.2, 0.5);
        assert!(density_m_neg2gamma(&q2, -1.0).is_err());
    }

    #[test]
    fn density_rejects_non_canonical_coefficients() {
        let spec = ModelSpec::new(
            Branch::MNeg2Gamma,
            -0.6,
            0.1,
            0.1,
            CoefficientFn::constant(-0.12),
            CoefficientFn::exp_decay(0.1, -0.06),
        )
        .unwrap();
        let q = TransitionQuery::new(spec, 0.2, 0.0, 0.5).unwrap();
        assert!(matches!(DensityEval::new(&q), Err(VolCevError::Validation(_))));
    }

    #[test]
    fn positive_gamma_is_formal_only() {
        let spec = ModelSpec::canonical(Branch::MNeg2Gamma, 0.8, 0.1, 0.1).unwrap();
        let q = TransitionQuery::new(spec, 0.2, 0.0, 0.5).unwrap();
        assert!(DensityEval::new(&q).unwrap().formal_only);
        assert!(!DensityEval::new(&query(-0.6, 0.1, 0.1, 0.2, 0.5)).unwrap().formal_only);
    }

    #[test]
    fn laplace_lhs_at_zero_is_one() {
        let q = query(-0.6, 0.1, 0.1, 0.2, 0.5);
        assert!((laplace_transform_lhs(&q, 0.0).unwrap() - 1.0).abs() < 1e-7);
        assert_eq!(laplace_transform_rhs(&q, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn laplace_large_mu_approaches_atom_mass() {
        let q = query(-0.5, 0.1, 0.1, 0.2, 1.0);
        let atom = atom_mass_m_neg2gamma(&q).unwrap();
        let lhs = laplace_transform_lhs(&q, 1e6).unwrap();
        assert!((lhs - atom).abs() < 1e-4, "lhs={lhs} atom={atom}");
    }

    #[test]
    fn delta_law_flow_images() {
        // q == 0: identity flow
        let spec = ModelSpec::new(
            Branch::MGamma,
            1.0,
            0.0,
            0.1,
            CoefficientFn::constant(0.0),
            CoefficientFn::constant(0.1),
        )
        .unwrap();
        let q = TransitionQuery::new(spec, 0.3, 0.0, 1.0).unwrap();
        assert_eq!(density_m_gamma(&q).unwrap().point, 0.3);

        // constant q = -theta: exponential decay
        let spec = ModelSpec::new(
            Branch::MGamma,
            1.0,
            0.2,
            0.1,
            CoefficientFn::constant(-0.2),
            CoefficientFn::constant(0.1),
        )
        .unwrap();
        let q = TransitionQuery::new(spec, 0.3, 0.0, 1.0).unwrap();
        let expected = 0.3 * (-0.2f64).exp();
        assert!((density_m_gamma(&q).unwrap().point - expected).abs() < 1e-15);

        // tabulated q matches quadrature of the integrand
        let qt = CoefficientFn::Tabulated { knots: vec![(0.0, -0.3), (0.5, -0.1), (1.5, -0.2)] };
        let spec =
            ModelSpec::new(Branch::MGamma, 1.0, 0.0, 0.1, qt.clone(), CoefficientFn::constant(0.1))
                .unwrap();
        let q = TransitionQuery::new(spec, 0.3, 0.1, 1.2).unwrap();
        let oracle = crate::quad::integrate(|t| qt.eval(t), 0.1, 1.2, 1e-13, 1e-13);
        let expected = 0.3 * oracle.value.exp();
        assert!((density_m_gamma(&q).unwrap().point - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn short_horizon_concentrates_near_start() {
        let q = query(-0.6, 0.1, 0.1, 0.2, 1e-5);
        let eval = DensityEval::new(&q).unwrap();
        let window = eval
            .integrate_against(|y| if (y - 0.2).abs() <= 0.01 { 1.0 } else { 0.0 }, 1e-10)
            .value;
        let total = eval.continuous_mass().value;
        assert!((window - total).abs() < 1e-6, "window={window} total={total}");
    }
}
