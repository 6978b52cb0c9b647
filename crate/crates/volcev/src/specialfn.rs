//! Special functions needed by the closed-form densities and moment
//! formulas: Gamma, log-Gamma, the Kummer confluent hypergeometric
//! function M(a,b,z) and the modified Bessel function I1.
//!
//! Everything here is self-contained and pure; the only state is the
//! argument list.

use crate::error::{Result, VolCevError};

/// Value together with an error estimate and a convergence flag.
///
/// `converged == false` means the caller must not use `value` silently.
#[derive(Debug, Clone, Copy)]
pub struct EvalResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub converged: bool,
}

impl EvalResult {
    fn exact(value: f64) -> Self {
        EvalResult { value, abs_error_estimate: 2.0 * f64::EPSILON * value.abs(), converged: true }
    }
}

// Lanczos approximation, g = 7, 9 terms.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const SQRT_TWO_PI: f64 = 2.506_628_274_631_000_7;

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.5 && (x - x.round()).abs() < 1e-12
}

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (original minus one)
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

/// Gamma function.
///
/// Relative error below 1e-12 on [1e-3, 170]; reflection handles the
/// negative axis away from the poles.
pub fn gamma(a: f64) -> Result<EvalResult> {
    if is_nonpositive_integer(a) {
        return Err(VolCevError::GammaPole(a));
    }
    if a > 171.61 {
        return Err(VolCevError::Overflow(a));
    }
    if a < 0.5 {
        // reflection: Gamma(a) Gamma(1-a) = pi / sin(pi a)
        let reflected = gamma(1.0 - a)?;
        let value = std::f64::consts::PI / ((std::f64::consts::PI * a).sin() * reflected.value);
        return Ok(EvalResult::exact(value));
    }
    let x = a - 1.0;
    let t = x + 7.5;
    // t^(x+0.5) alone can overflow even when Gamma(a) is representable
    let value = if (x + 0.5) * t.ln() > 700.0 {
        ln_gamma(a)?.exp()
    } else {
        SQRT_TWO_PI * t.powf(x + 0.5) * (-t).exp() * lanczos_sum(x)
    };
    Ok(EvalResult::exact(value))
}

/// Natural log of Gamma(a) for a > 0.
pub fn ln_gamma(a: f64) -> Result<f64> {
    if a <= 0.0 {
        return Err(VolCevError::Domain(format!("ln_gamma requires a > 0, got {a}")));
    }
    if a < 0.5 {
        let lg = ln_gamma(1.0 - a)?;
        return Ok(std::f64::consts::PI.ln() - ((std::f64::consts::PI * a).sin()).ln() - lg);
    }
    let x = a - 1.0;
    let t = x + 7.5;
    Ok(SQRT_TWO_PI.ln() + (x + 0.5) * t.ln() - t + lanczos_sum(x).ln())
}

const KUMMER_SWITCH: f64 = 30.0;
const KUMMER_BAND: f64 = 5.0;
const KUMMER_REL_TARGET: f64 = 1e-10;
const BAND_AGREEMENT: f64 = 1e-8;

/// Ascending Kummer series with a cancellation-aware error estimate.
fn kummer_series(a: f64, b: f64, z: f64) -> (f64, f64) {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut max_mag = 1.0f64;
    for k in 0..500 {
        let kf = k as f64;
        term *= (a + kf) * z / ((b + kf) * (kf + 1.0));
        sum += term;
        max_mag = max_mag.max(term.abs()).max(sum.abs());
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    let abs_err = f64::EPSILON * max_mag + term.abs();
    (sum, abs_err)
}

/// Large-|z| expansion for z -> -inf: M(a,b,-x) ~ Gamma(b)/Gamma(b-a) x^-a S(x).
fn kummer_asymptotic_neg(a: f64, b: f64, x: f64) -> Result<(f64, f64)> {
    let (ln_s, s_sign, rel_err) = asymptotic_tail_ln(a, a - b + 1.0, x);
    let prefactor_ln = ln_gamma(b)? - ln_gamma(b - a)? - a * x.ln();
    let value = s_sign * (prefactor_ln + ln_s).exp();
    Ok((value, rel_err * value.abs()))
}

/// Large-z expansion for z -> +inf: M(a,b,x) ~ Gamma(b)/Gamma(a) e^x x^(a-b) S.
fn kummer_asymptotic_pos(a: f64, b: f64, x: f64) -> Result<(f64, f64)> {
    let (ln_s, s_sign, rel_err) = asymptotic_tail_ln(b - a, 1.0 - a, x);
    let prefactor_ln = ln_gamma(b)? - ln_gamma(a)? + x + (a - b) * x.ln();
    if prefactor_ln + ln_s > 709.0 {
        return Err(VolCevError::Overflow(x));
    }
    let value = s_sign * (prefactor_ln + ln_s).exp();
    Ok((value, rel_err * value.abs()))
}

/// S = sum_n (p)_n (q)_n / (n! x^n), truncated at the smallest term.
/// Returns (ln|S|, sign(S), relative error estimate). At least four
/// correction terms are taken before truncation is allowed.
fn asymptotic_tail_ln(p: f64, q: f64, x: f64) -> (f64, f64, f64) {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut last_mag = 1.0f64;
    let mut rel_err = f64::EPSILON;
    for n in 0..40 {
        let nf = n as f64;
        let next = term * (p + nf) * (q + nf) / ((nf + 1.0) * x);
        if n >= 4 && next.abs() >= last_mag {
            rel_err = next.abs() / sum.abs().max(1e-300);
            break;
        }
        term = next;
        last_mag = term.abs();
        sum += term;
        rel_err = term.abs() / sum.abs().max(1e-300);
        if rel_err < 1e-16 {
            break;
        }
    }
    (sum.abs().ln(), sum.signum(), rel_err)
}

fn kummer_series_path(a: f64, b: f64, z: f64) -> (f64, f64) {
    if z < 0.0 && b - a > 0.0 {
        // Kummer transformation keeps every series term positive.
        let (m, err) = kummer_series(b - a, b, -z);
        let e = z.exp();
        (e * m, e * err)
    } else {
        kummer_series(a, b, z)
    }
}

fn kummer_asymptotic_path(a: f64, b: f64, z: f64) -> Result<(f64, f64)> {
    if z < 0.0 {
        kummer_asymptotic_neg(a, b, -z)
    } else {
        kummer_asymptotic_pos(a, b, z)
    }
}

/// Kummer confluent hypergeometric function M(a, b, z).
///
/// Ascending series for |z| below 30, large-|z| asymptotics above; in the
/// crossover band both branches are evaluated and must agree to 1e-8 or
/// the result is flagged unconverged.
pub fn kummer_m(a: f64, b: f64, z: f64) -> Result<EvalResult> {
    if is_nonpositive_integer(b) {
        return Err(VolCevError::InvalidParameter(format!(
            "kummer_m: b must not be a non-positive integer, got {b}"
        )));
    }
    if !z.is_finite() {
        return Err(VolCevError::Domain(format!("kummer_m: z must be finite, got {z}")));
    }
    if z == 0.0 || a == 0.0 {
        return Ok(EvalResult::exact(1.0));
    }
    // Terminating polynomial when a is a non-positive integer.
    if is_nonpositive_integer(a) {
        let (v, e) = kummer_series(a, b, z);
        return Ok(EvalResult { value: v, abs_error_estimate: e, converged: true });
    }

    let az = z.abs();
    let in_band = (az - KUMMER_SWITCH).abs() <= KUMMER_BAND;

    if az < KUMMER_SWITCH {
        let (v, e) = kummer_series_path(a, b, z);
        let mut converged = e <= KUMMER_REL_TARGET * v.abs();
        let mut err = e;
        if in_band {
            if let Ok((va, _)) = kummer_asymptotic_path(a, b, z) {
                let diff = (va - v).abs();
                err = err.max(diff);
                converged = converged && diff <= BAND_AGREEMENT * v.abs().max(1e-300);
            }
        }
        Ok(EvalResult { value: v, abs_error_estimate: err, converged })
    } else {
        let (v, e) = kummer_asymptotic_path(a, b, z)?;
        let mut converged = e <= KUMMER_REL_TARGET * v.abs();
        let mut err = e;
        if in_band {
            let (vs, _) = kummer_series_path(a, b, z);
            let diff = (vs - v).abs();
            err = err.max(diff);
            converged = converged && diff <= BAND_AGREEMENT * v.abs().max(1e-300);
        }
        Ok(EvalResult { value: v, abs_error_estimate: err, converged })
    }
}

/// ln M(a, b, -g) for g >= 0, requiring b > 0 and b - a > 0 so the value
/// is strictly positive. This is the overflow-safe route used by the
/// moment formulas, where g blows up as the horizon shrinks.
pub(crate) fn ln_kummer_m_negarg(a: f64, b: f64, g: f64) -> Result<f64> {
    if !(b > 0.0 && b - a > 0.0) {
        return Err(VolCevError::InvalidParameter(format!(
            "ln_kummer_m_negarg requires b > 0 and b - a > 0, got a={a} b={b}"
        )));
    }
    if g < 0.0 {
        return Err(VolCevError::Domain(format!("ln_kummer_m_negarg: g must be >= 0, got {g}")));
    }
    if g == 0.0 {
        return Ok(0.0);
    }
    if g <= KUMMER_SWITCH {
        let (m, _) = kummer_series(b - a, b, g);
        Ok(-g + m.ln())
    } else {
        let (ln_s, sign, _) = asymptotic_tail_ln(a, a - b + 1.0, g);
        if sign <= 0.0 {
            return Err(VolCevError::Convergence(format!(
                "asymptotic tail lost positivity at a={a} b={b} g={g}"
            )));
        }
        Ok(ln_gamma(b)? - ln_gamma(b - a)? - a * g.ln() + ln_s)
    }
}

const BESSEL_SERIES_CUT: f64 = 20.0;
const BESSEL_UNSCALED_MAX: f64 = 700.0;

fn bessel_i1_series(z: f64) -> f64 {
    let q = z * 0.5;
    let mut term = q;
    let mut sum = q;
    for k in 1..200 {
        let kf = k as f64;
        term *= q * q / (kf * (kf + 1.0));
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Scaled asymptotic tail: e^-z I1(z) ~ S(z) / sqrt(2 pi z).
fn bessel_i1_scaled_asymptotic(z: f64) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..40 {
        let kf = k as f64;
        let next = -term * (4.0 - (2.0 * kf - 1.0).powi(2)) / (8.0 * kf * z);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * z).sqrt()
}

/// Modified Bessel function of the first kind, order 1.
///
/// Relative error below 1e-12 on [0, 700]; above that the unscaled value
/// overflows the exponent fusion, so callers must use [`bessel_i1_scaled`].
pub fn bessel_i1(z: f64) -> Result<EvalResult> {
    if z < 0.0 {
        return Err(VolCevError::Domain(format!("bessel_i1 requires z >= 0, got {z}")));
    }
    if z > BESSEL_UNSCALED_MAX {
        return Err(VolCevError::Overflow(z));
    }
    if z <= BESSEL_SERIES_CUT {
        Ok(EvalResult::exact(bessel_i1_series(z)))
    } else {
        Ok(EvalResult::exact(bessel_i1_scaled_asymptotic(z) * z.exp()))
    }
}

/// e^-z I1(z), finite for any z >= 0.
pub fn bessel_i1_scaled(z: f64) -> Result<EvalResult> {
    if z < 0.0 {
        return Err(VolCevError::Domain(format!("bessel_i1_scaled requires z >= 0, got {z}")));
    }
    if z <= BESSEL_SERIES_CUT {
        Ok(EvalResult::exact(bessel_i1_series(z) * (-z).exp()))
    } else {
        Ok(EvalResult::exact(bessel_i1_scaled_asymptotic(z)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma_one_is_one() {
        assert!(rel(gamma(1.0).unwrap().value, 1.0) < 1e-14);
    }

    #[test]
    fn gamma_half_is_sqrt_pi() {
        assert!(rel(gamma(0.5).unwrap().value, std::f64::consts::PI.sqrt()) < 1e-13);
    }

    #[test]
    fn gamma_matches_euler_integral_at_2_75() {
        // frozen from the quadrature oracle in tests/oracles.rs
        assert!(rel(gamma(2.75).unwrap().value, 1.608_359_421_985_545_7) < 1e-12);
    }

    #[test]
    fn gamma_rejects_poles_and_overflow() {
        assert!(matches!(gamma(0.0), Err(VolCevError::GammaPole(_))));
        assert!(matches!(gamma(-3.0), Err(VolCevError::GammaPole(_))));
        assert!(matches!(gamma(200.0), Err(VolCevError::Overflow(_))));
    }

    #[test]
    fn ln_gamma_consistent_with_gamma() {
        for &a in &[0.3, 1.7, 10.0, 50.0, 150.0] {
            // exp amplifies the absolute error of ln_gamma by ln(Gamma(a))
            assert!(rel(ln_gamma(a).unwrap().exp(), gamma(a).unwrap().value) < 1e-11);
        }
    }

    #[test]
    fn kummer_at_zero_is_one() {
        assert_eq!(kummer_m(0.3, 1.2, 0.0).unwrap().value, 1.0);
        assert_eq!(kummer_m(-4.0, 2.0, 0.0).unwrap().value, 1.0);
    }

    #[test]
    fn kummer_m_1_2_closed_form() {
        let z = 0.7f64;
        let expected = (z.exp() - 1.0) / z;
        assert!(rel(kummer_m(1.0, 2.0, z).unwrap().value, expected) < 1e-13);
    }

    #[test]
    fn kummer_negative_argument_frozen() {
        // frozen from the extended-precision ascending series oracle
        let r = kummer_m(-0.5, 2.0, -3.2).unwrap();
        assert!(r.converged);
        assert!(rel(r.value, 1.647_301_734_653_738_8) < 1e-10);
    }

    #[test]
    fn kummer_asymptotic_regime_frozen() {
        // M(-0.5, 2, z) far into the asymptotic regime
        for (z, expected) in [(-60.0, 5.899_609_139_917_180_4), (-200.0, 10.678_330_073_537_731)] {
            let r = kummer_m(-0.5, 2.0, z).unwrap();
            assert!(r.converged, "z={z}");
            assert!(rel(r.value, expected) < 1e-10, "z={z}: {} vs {expected}", r.value);
        }
    }

    #[test]
    fn kummer_crossover_band_agrees() {
        // both branches live here; the band check must pass and match mpmath
        for (z, expected) in [(-25.0, 3.873_531_747_341_502_4), (-30.0, 4.222_831_719_676_999), (-35.0, 4.545_409_805_121_321_4)] {
            let r = kummer_m(-0.5, 2.0, z).unwrap();
            assert!(r.converged, "band cross-validation failed at z={z}");
            assert!(rel(r.value, expected) < 1e-9, "z={z}");
        }
    }

    #[test]
    fn kummer_large_positive() {
        let r = kummer_m(2.5, 2.0, 60.0).unwrap();
        assert!(rel(r.value, 6.737_397_234_809_573e26) < 1e-9);
    }

    #[test]
    fn kummer_rejects_bad_b() {
        assert!(matches!(kummer_m(0.5, 0.0, 1.0), Err(VolCevError::InvalidParameter(_))));
        assert!(matches!(kummer_m(0.5, -2.0, 1.0), Err(VolCevError::InvalidParameter(_))));
    }

    #[test]
    fn ln_kummer_matches_linear_space() {
        for &g in &[0.5, 5.0, 29.0, 31.0, 100.0, 1e4] {
            let ln_m = ln_kummer_m_negarg(-0.4, 2.0, g).unwrap();
            let direct = kummer_m(-0.4, 2.0, -g).unwrap().value;
            assert!(rel(ln_m.exp(), direct) < 1e-9, "g={g}");
        }
    }

    #[test]
    fn bessel_i1_at_zero() {
        assert_eq!(bessel_i1(0.0).unwrap().value, 0.0);
    }

    #[test]
    fn bessel_i1_small_argument_leading_terms() {
        let z = 1e-4f64;
        let lead = z / 2.0 + z.powi(3) / 16.0;
        assert!(rel(bessel_i1(z).unwrap().value, lead) < 1e-12);
    }

    #[test]
    fn bessel_i1_frozen_values() {
        assert!(rel(bessel_i1(5.0).unwrap().value, 24.335_642_142_450_527) < 1e-12);
        assert!(rel(bessel_i1(0.5).unwrap().value, 0.257_894_305_390_896_32) < 1e-12);
        assert!(rel(bessel_i1(20.0).unwrap().value, 42_454_973.385_127_77) < 1e-12);
    }

    #[test]
    fn bessel_scaled_matches_unscaled() {
        for &z in &[0.5, 5.0, 19.9, 20.1, 100.0, 650.0] {
            let s = bessel_i1_scaled(z).unwrap().value;
            let u = bessel_i1(z).unwrap().value;
            assert!(rel(s * z.exp(), u) < 1e-12, "z={z}");
        }
    }

    #[test]
    fn bessel_scaled_large_argument_frozen() {
        assert!(rel(bessel_i1_scaled(700.0).unwrap().value, 0.015_070_519_444_716_847) < 1e-12);
    }

    #[test]
    fn bessel_rejects_negative() {
        assert!(matches!(bessel_i1(-1.0), Err(VolCevError::Domain(_))));
        assert!(matches!(bessel_i1(800.0), Err(VolCevError::Overflow(_))));
    }
}
