//! Analytic references for Keplerian motion.
//!
//! The Equation of the Centre is the residual `v - M` between the true
//! anomaly `v` of a body on a Kepler ellipse and the mean anomaly `M` it would
//! have on a uniform circle. Two routes compute it here:
//!
//! - [`centre_exact`] solves Kepler's equation `M = E - e sin E` for the
//!   eccentric anomaly and converts to the true anomaly. This is the ground
//!   truth used everywhere else in the crate.
//! - [`centre_bessel_series`] sums the classical Bessel-function series,
//!   truncated at `S` outer and `P` inner terms.
//!
//! [`centre_coefficient_c1`] is the `sin M` coefficient of that series
//! expanded to seventh order in `e`, and [`invert_c1`] maps a fitted `sin M`
//! coefficient back to an eccentricity.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Orbital eccentricity of a closed orbit, `0 <= e < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Eccentricity(f64);

impl Eccentricity {
    pub fn new(e: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&e) {
            return Err(Error::validation("eccentricity", format!("{e} is outside [0, 1)")));
        }
        Ok(Eccentricity(e))
    }

    /// The circular orbit.
    pub const ZERO: Eccentricity = Eccentricity(0.0);

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Eccentricity {
    type Error = Error;

    fn try_from(e: f64) -> Result<Self> {
        Eccentricity::new(e)
    }
}

/// Mean, eccentric and true anomaly of one orbital position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyTriple {
    pub mean: f64,
    pub eccentric: f64,
    pub true_anomaly: f64,
}

impl AnomalyTriple {
    /// Solves for all three anomalies at mean anomaly `mean`.
    pub fn from_mean(mean: f64, e: Eccentricity) -> Result<Self> {
        let eccentric = solve_kepler(mean, e, DEFAULT_TOLERANCE)?;
        Ok(AnomalyTriple { mean, eccentric, true_anomaly: true_anomaly_from_eccentric(eccentric, e) })
    }
}

/// Truncation of the double sum in [`centre_bessel_series`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesTruncation {
    outer: u32,
    inner: u32,
}

impl SeriesTruncation {
    pub fn new(outer: u32, inner: u32) -> Result<Self> {
        if outer < 1 {
            return Err(Error::validation("series truncation", "outer index must be at least 1"));
        }
        Ok(SeriesTruncation { outer, inner })
    }

    pub fn outer(self) -> u32 {
        self.outer
    }

    pub fn inner(self) -> u32 {
        self.inner
    }
}

impl Default for SeriesTruncation {
    fn default() -> Self {
        SeriesTruncation { outer: 12, inner: 12 }
    }
}

/// Residual tolerance used by [`centre_exact`].
pub const DEFAULT_TOLERANCE: f64 = 1e-13;

const BESSEL_TERM_FLOOR: f64 = 1e-18;
const NEWTON_MAX_ITERATIONS: usize = 50;
const BISECTION_MAX_ITERATIONS: usize = 200;

/// Bessel function of the first kind `J_n(x)` by its ascending power series.
///
/// Intended for `|x| <= 30`; beyond that the alternating series loses too
/// many digits to cancellation.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * x;
    // (x/2)^n / n!
    let mut term = (1..=n).fold(1.0, |acc, k| acc * half / f64::from(k));
    let step = -half * half;
    let mut sum = term;
    let mut k = 0.0;
    while term.abs() >= BESSEL_TERM_FLOOR {
        k += 1.0;
        term *= step / (k * (f64::from(n) + k));
        sum += term;
    }
    sum
}

/// `J_n` for any integer order via `J_{-n}(x) = (-1)^n J_n(x)`.
pub fn bessel_j_signed(n: i64, x: f64) -> f64 {
    let order = n.unsigned_abs() as u32;
    let value = bessel_j(order, x);
    if n < 0 && order % 2 == 1 {
        -value
    } else {
        value
    }
}

/// `beta = (1 - sqrt(1 - e^2)) / e`, evaluated as `e / (1 + sqrt(1 - e^2))`.
pub fn beta_of_e(e: Eccentricity) -> f64 {
    let e = e.value();
    e / (1.0 + (1.0 - e * e).sqrt())
}

/// Bessel-series form of `v - M`.
pub fn centre_bessel_series(e: Eccentricity, mean: f64, trunc: SeriesTruncation) -> f64 {
    let beta = beta_of_e(e);
    let e = e.value();
    if e == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for s in 1..=i64::from(trunc.outer) {
        let x = s as f64 * e;
        let mut bracket = bessel_j_signed(s, x);
        let mut beta_p = 1.0;
        for p in 1..=i64::from(trunc.inner) {
            beta_p *= beta;
            bracket += beta_p * (bessel_j_signed(s - p, x) + bessel_j_signed(s + p, x));
        }
        total += bracket / s as f64 * (s as f64 * mean).sin();
    }
    2.0 * total
}

/// First-order (`sin M`) coefficient: `2e - e^3/4 + 5e^5/96 + 107e^7/4608`.
pub fn centre_coefficient_c1(e: Eccentricity) -> f64 {
    let e = e.value();
    let e2 = e * e;
    e * (2.0 + e2 * (-0.25 + e2 * (5.0 / 96.0 + e2 * 107.0 / 4608.0)))
}

const INVERT_UPPER_E: f64 = 0.99;
const INVERT_TOLERANCE: f64 = 1e-12;

/// The eccentricity whose first-order coefficient equals `coeff`.
///
/// `c1` is strictly increasing on `[0, 0.99]`, so bisection on that bracket
/// finds the unique root.
pub fn invert_c1(coeff: f64) -> Result<Eccentricity> {
    let upper = centre_coefficient_c1(Eccentricity(INVERT_UPPER_E));
    if !(0.0..upper).contains(&coeff) {
        return Err(Error::Numeric(format!("sin M coefficient {coeff} is outside [0, {upper})")));
    }
    if coeff == 0.0 {
        return Ok(Eccentricity::ZERO);
    }
    let (mut lo, mut hi) = (0.0, INVERT_UPPER_E);
    while hi - lo > INVERT_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if centre_coefficient_c1(Eccentricity(mid)) < coeff {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Eccentricity(0.5 * (lo + hi)))
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_pi(angle: f64) -> f64 {
    let wrapped = angle - TAU * (angle / TAU).round();
    if wrapped <= -PI {
        wrapped + TAU
    } else {
        wrapped
    }
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_two_pi(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Solves Kepler's equation `M = E - e sin E` for the eccentric anomaly.
///
/// The solve happens on `M` reduced to `(-pi, pi]` and the result is shifted
/// back onto the branch of the input, so `E` is continuous in `M`. Newton's
/// method is tried first, then bisection on `[M - e, M + e]`.
pub fn solve_kepler(mean: f64, e: Eccentricity, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::validation("tolerance", "must be positive"));
    }
    if !mean.is_finite() {
        return Err(Error::Numeric(format!("mean anomaly {mean} is not finite")));
    }
    let reduced = wrap_pi(mean);
    let branch = mean - reduced;
    let e = e.value();
    let kepler = |ecc: f64| ecc - e * ecc.sin() - reduced;

    let mut ecc = reduced + e * reduced.sin();
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let f = kepler(ecc);
        if f.abs() < tol {
            return Ok(ecc + branch);
        }
        let next = ecc - f / (1.0 - e * ecc.cos());
        if !next.is_finite() {
            break;
        }
        ecc = next;
    }

    let (mut lo, mut hi) = (reduced - e, reduced + e);
    for _ in 0..BISECTION_MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let f = kepler(mid);
        if f.abs() < tol {
            return Ok(mid + branch);
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numeric(format!("Kepler solve did not converge for M = {mean}, e = {e}")))
}

/// Eccentric to true anomaly, continuous across `2pi` branches.
pub fn true_anomaly_from_eccentric(ecc: f64, e: Eccentricity) -> f64 {
    let e = e.value();
    if e == 0.0 {
        return ecc;
    }
    let turns = (ecc / TAU).round();
    let reduced = ecc - turns * TAU;
    let half = 0.5 * reduced;
    2.0 * ((1.0 + e).sqrt() * half.sin()).atan2((1.0 - e).sqrt() * half.cos()) + turns * TAU
}

/// Exact `v - M` through the Kepler solve.
pub fn centre_exact(mean: f64, e: Eccentricity) -> Result<f64> {
    let ecc = solve_kepler(mean, e, DEFAULT_TOLERANCE)?;
    Ok(true_anomaly_from_eccentric(ecc, e) - mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ecc(e: f64) -> Eccentricity {
        Eccentricity::new(e).unwrap()
    }

    #[test]
    fn eccentricity_bounds() {
        assert!(Eccentricity::new(-0.1).is_err());
        assert!(Eccentricity::new(1.0).is_err());
        assert!(Eccentricity::new(f64::NAN).is_err());
        assert_eq!(ecc(0.5).value(), 0.5);
    }

    #[test]
    fn bessel_values() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(3, 0.0), 0.0);
        // mpmath besselj(1, 0.1)
        assert!((bessel_j(1, 0.1) - 0.049_937_526_036_241_997_6).abs() < 1e-15);
        assert!((bessel_j_signed(-1, 0.1) + bessel_j(1, 0.1)).abs() < 1e-18);
        assert_eq!(bessel_j_signed(-2, 0.7), bessel_j(2, 0.7));
    }

    #[test]
    fn bessel_recurrence() {
        for n in 1..=5u32 {
            for x in [0.05, 0.1, 0.5, 1.0, 2.0] {
                let lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x);
                let rhs = 2.0 * f64::from(n) / x * bessel_j(n, x);
                assert!((lhs - rhs).abs() < 1e-10, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn beta_values() {
        assert_eq!(beta_of_e(Eccentricity::ZERO), 0.0);
        assert!((beta_of_e(ecc(0.0549)) - 0.027_470_714_872_820_874).abs() < 1e-15);
        assert!((beta_of_e(ecc(0.1)) - 0.050_125_628_933_800_453).abs() < 1e-15);
    }

    #[test]
    fn c1_values() {
        assert_eq!(centre_coefficient_c1(Eccentricity::ZERO), 0.0);
        assert!((centre_coefficient_c1(ecc(0.0549)) - 0.109_758_658_722_949_5).abs() < 1e-15);
        assert!((centre_coefficient_c1(ecc(0.0547705)) - 0.1095).abs() < 1e-6);
    }

    #[test]
    fn invert_c1_values() {
        assert_eq!(invert_c1(0.0).unwrap().value(), 0.0);
        assert!((invert_c1(0.1095).unwrap().value() - 0.054_770_524_796_259_3).abs() < 1e-10);
        let round = invert_c1(centre_coefficient_c1(ecc(0.2))).unwrap().value();
        assert!((round - 0.2).abs() < 1e-10);
        assert!(invert_c1(-0.01).is_err());
        assert!(invert_c1(5.0).is_err());
    }

    #[test]
    fn kepler_solver_examples() {
        let tol = 1e-12;
        assert_eq!(solve_kepler(0.0, ecc(0.3), tol).unwrap(), 0.0);
        assert!((solve_kepler(PI, ecc(0.3), tol).unwrap() - PI).abs() < 1e-15);
        // bisection oracle at 30 digits
        let e1 = solve_kepler(1.0, ecc(0.1), tol).unwrap();
        assert!((e1 - 1.088_597_752_397_893_6).abs() < 1e-12);
        // branch is preserved
        let shifted = solve_kepler(1.0 + 4.0 * PI, ecc(0.1), tol).unwrap();
        assert!((shifted - e1 - 4.0 * PI).abs() < 1e-12);
        assert!(solve_kepler(1.0, ecc(0.1), 0.0).is_err());
    }

    #[test]
    fn true_anomaly_examples() {
        assert_eq!(true_anomaly_from_eccentric(0.0, ecc(0.5)), 0.0);
        assert!((true_anomaly_from_eccentric(PI, ecc(0.5)) - PI).abs() < 1e-15);
        let v = true_anomaly_from_eccentric(1.08868, ecc(0.1));
        assert!((v - 1.179_555_077_177_087_3).abs() < 1e-12);
        // continuity through 2pi
        let a = true_anomaly_from_eccentric(TAU - 1e-9, ecc(0.3));
        let b = true_anomaly_from_eccentric(TAU + 1e-9, ecc(0.3));
        assert!((b - a).abs() < 1e-8);
    }

    #[test]
    fn centre_exact_examples() {
        assert_eq!(centre_exact(1.3, Eccentricity::ZERO).unwrap(), 0.0);
        assert!(centre_exact(PI, ecc(0.2)).unwrap().abs() < 1e-12);
        assert!((centre_exact(1.0, ecc(0.1)).unwrap() - 0.179_469_262_699_768_7).abs() < 1e-12);
    }

    #[test]
    fn series_examples() {
        let trunc = SeriesTruncation::default();
        assert_eq!(centre_bessel_series(Eccentricity::ZERO, 0.7, trunc), 0.0);
        let e = ecc(0.0549);
        let diff = centre_bessel_series(e, PI / 2.0, trunc) - centre_exact(PI / 2.0, e).unwrap();
        assert!(diff.abs() < 1e-8);
        let s = centre_bessel_series(ecc(0.1), 1.0, trunc);
        assert!((s - 0.179_469_262_699_768_7).abs() < 1e-8);
        assert!(SeriesTruncation::new(0, 3).is_err());
    }

    #[test]
    fn centre_is_odd_and_vanishes_at_apsides() {
        for e in [0.01, 0.0549, 0.2, 0.6] {
            let e = ecc(e);
            for k in -4..=4 {
                let m = f64::from(k) * PI;
                assert!(centre_exact(m, e).unwrap().abs() < 1e-10, "k={k}");
            }
            for m in [0.1, 0.9, 2.5, 7.0] {
                let sum = centre_exact(m, e).unwrap() + centre_exact(-m, e).unwrap();
                assert!(sum.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wrapping() {
        assert!((wrap_pi(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_pi(-PI) - PI).abs() < 1e-12);
        assert!((wrap_two_pi(-0.5) - (TAU - 0.5)).abs() < 1e-12);
        assert!(wrap_two_pi(TAU) < 1e-12);
    }
}
