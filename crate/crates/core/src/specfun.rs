//! Bessel functions of the first kind `J0`, `J1` and the modified Bessel
//! functions `I0`, `I1` for real arguments.
//!
//! Three evaluation regimes are used for `J`:
//!
//! * `|z| <= 8`: power series. The largest term is bounded by `I0(8) ~ 430`,
//!   so cancellation costs at most ~1e-13 absolute.
//! * `8 < |z| < 20`: Miller backward recurrence normalised with
//!   `J0 + 2 (J2 + J4 + ...) = 1`.
//! * `|z| >= 20`: Hankel asymptotic expansion, whose smallest term is of
//!   order `e^{-2|z|}`.
//!
//! `I0` and `I1` use the (positive-term) power series up to `|z| = 25` and the
//! large-argument expansion beyond. Every routine is allocation free.

use crate::error::{Error, Result};

const SERIES_SWITCH_J: f64 = 8.0;
const HANKEL_SWITCH_J: f64 = 20.0;
const ASYMPTOTIC_SWITCH_I: f64 = 25.0;

/// Largest `|z|` accepted by [`bessel_i`]; `e^700` is still representable.
pub const I_OVERFLOW_GUARD: f64 = 700.0;

/// Controls the power-series evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselAccuracy {
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl Default for BesselAccuracy {
    fn default() -> Self {
        Self {
            abs_tol: 1e-17,
            max_terms: 200,
        }
    }
}

impl BesselAccuracy {
    pub fn new(abs_tol: f64, max_terms: usize) -> Result<Self> {
        if !(abs_tol > 0.0) || !abs_tol.is_finite() {
            return Err(Error::Validation {
                name: "abs_tol",
                reason: format!("must be positive and finite, got {abs_tol}"),
            });
        }
        if max_terms == 0 {
            return Err(Error::Validation {
                name: "max_terms",
                reason: "must be at least 1".into(),
            });
        }
        Ok(Self { abs_tol, max_terms })
    }
}

/// `J_order(z)` for `order` in `{0, 1}`.
pub fn bessel_j(order: u32, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("bessel_j: non-finite argument {z}")));
    }
    match order {
        0 => Ok(j0(z)),
        1 => Ok(j1(z)),
        _ => Err(Error::Domain(format!("bessel_j: unsupported order {order}"))),
    }
}

/// `I_order(z)` for `order` in `{0, 1}` and `|z| <= 700`.
pub fn bessel_i(order: u32, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("bessel_i: non-finite argument {z}")));
    }
    if z.abs() > I_OVERFLOW_GUARD {
        return Err(Error::Range(format!(
            "bessel_i: |z| = {} exceeds overflow guard {I_OVERFLOW_GUARD}",
            z.abs()
        )));
    }
    match order {
        0 => Ok(i0(z)),
        1 => Ok(i1(z)),
        _ => Err(Error::Domain(format!("bessel_i: unsupported order {order}"))),
    }
}

pub fn j0(z: f64) -> f64 {
    let x = z.abs();
    if x <= SERIES_SWITCH_J {
        j_series(0, x, &BesselAccuracy::default())
    } else if x < HANKEL_SWITCH_J {
        miller_j01(x).0
    } else {
        hankel_j(0, x)
    }
}

pub fn j1(z: f64) -> f64 {
    let x = z.abs();
    let v = if x <= SERIES_SWITCH_J {
        j_series(1, x, &BesselAccuracy::default())
    } else if x < HANKEL_SWITCH_J {
        miller_j01(x).1
    } else {
        hankel_j(1, x)
    };
    if z < 0.0 {
        -v
    } else {
        v
    }
}

pub fn i0(z: f64) -> f64 {
    let x = z.abs();
    if x <= ASYMPTOTIC_SWITCH_I {
        i_series(0, x, &BesselAccuracy::default())
    } else {
        asymptotic_i(0, x)
    }
}

pub fn i1(z: f64) -> f64 {
    let x = z.abs();
    let v = if x <= ASYMPTOTIC_SWITCH_I {
        i_series(1, x, &BesselAccuracy::default())
    } else {
        asymptotic_i(1, x)
    };
    if z < 0.0 {
        -v
    } else {
        v
    }
}

/// `e^{-|z|} I0(z)`, finite for every finite `z`.
pub fn i0_scaled(z: f64) -> f64 {
    let x = z.abs();
    if x <= ASYMPTOTIC_SWITCH_I {
        i_series(0, x, &BesselAccuracy::default()) * (-x).exp()
    } else {
        asymptotic_i_scaled(0, x)
    }
}

/// `J0(2 sqrt(w))` for `w >= 0`, the form in which `J0` enters the kernels.
pub fn j0_root(w: f64) -> f64 {
    debug_assert!(w >= 0.0);
    if w <= 16.0 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..80 {
            let kf = k as f64;
            term *= -w / (kf * kf);
            sum += term;
            if term.abs() < 1e-17 {
                break;
            }
        }
        sum
    } else {
        j0(2.0 * w.sqrt())
    }
}

/// `J1(2 sqrt(w)) / sqrt(w)` for `w >= 0`; an entire function of `w` equal
/// to 1 at the origin.
pub fn j1_root_ratio(w: f64) -> f64 {
    debug_assert!(w >= 0.0);
    if w <= 16.0 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..80 {
            let kf = k as f64;
            term *= -w / (kf * (kf + 1.0));
            sum += term;
            if term.abs() < 1e-17 {
                break;
            }
        }
        sum
    } else {
        let r = w.sqrt();
        j1(2.0 * r) / r
    }
}

/// Power series for `J_order(z)`.
pub fn j_series(order: u32, z: f64, acc: &BesselAccuracy) -> f64 {
    let half = 0.5 * z;
    let q = -half * half;
    let n = order as f64;
    let mut term = if order == 0 { 1.0 } else { half };
    let mut sum = term;
    for k in 1..acc.max_terms {
        let kf = k as f64;
        term *= q / (kf * (kf + n));
        sum += term;
        if term.abs() < acc.abs_tol {
            break;
        }
    }
    sum
}

/// Power series for `I_order(z)`; all terms share the sign of `z^order`.
pub fn i_series(order: u32, z: f64, acc: &BesselAccuracy) -> f64 {
    let half = 0.5 * z;
    let q = half * half;
    let n = order as f64;
    let mut term = if order == 0 { 1.0 } else { half };
    let mut sum = term;
    for k in 1..acc.max_terms {
        let kf = k as f64;
        term *= q / (kf * (kf + n));
        sum += term;
        if term.abs() <= acc.abs_tol * sum.abs() {
            break;
        }
    }
    sum
}

fn miller_j01(x: f64) -> (f64, f64) {
    let start = (x + 30.0 + 6.0 * x.sqrt()) as usize;
    let start = start + start % 2;
    let mut next = 0.0_f64;
    let mut cur = 1e-30_f64;
    let mut norm = 0.0_f64;
    let mut j0 = 0.0;
    let mut j1 = 0.0;
    // cur holds J_k (unnormalised), next holds J_{k+1}
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
        let order = k - 1;
        if order == 1 {
            j1 = cur;
        }
        if order > 0 && order % 2 == 0 {
            norm += 2.0 * cur;
        }
        if order == 0 {
            j0 = cur;
        }
    }
    norm += j0;
    (j0 / norm, j1 / norm)
}

/// `a_k(nu)` ratio: `a_{k}/a_{k-1} = (4 nu^2 - (2k-1)^2) / (8k)`.
fn hankel_step(mu: f64, k: usize) -> f64 {
    let odd = (2 * k - 1) as f64;
    (mu - odd * odd) / (8.0 * k as f64)
}

fn hankel_j(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        a *= hankel_step(mu, k) / x;
        let mag = a.abs();
        if mag > last || mag < 1e-18 {
            break;
        }
        last = mag;
        // a_k / x^k enters P with sign (-1)^{k/2} for even k,
        // Q with sign (-1)^{(k-1)/2} for odd k
        match k % 4 {
            0 => p += a,
            1 => q += a,
            2 => p -= a,
            _ => q -= a,
        }
    }
    let chi = x - (0.5 * order as f64 + 0.25) * std::f64::consts::PI;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

fn asymptotic_i(order: u32, x: f64) -> f64 {
    // split e^x to stay finite near the overflow guard
    let half = (0.5 * x).exp();
    half * (half * asymptotic_i_scaled(order, x))
}

/// `e^{-x} I_order(x)` from the large-argument expansion.
fn asymptotic_i_scaled(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    let mut sum = 1.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        a *= -hankel_step(mu, k) / x;
        let mag = a.abs();
        if mag > last || mag < 1e-18 {
            break;
        }
        last = mag;
        sum += a;
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_origin() {
        assert_eq!(bessel_j(1, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i(1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn reference_values() {
        // 40-term series evaluated in extended precision
        assert!((j1(2.0) - 0.576_724_807_756_873_4).abs() < 1e-15);
        assert!((i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(bessel_j(0, f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(bessel_j(2, 1.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_i(0, 701.0), Err(Error::Range(_))));
        assert!(bessel_i(1, -700.0).unwrap().is_finite());
        assert!(BesselAccuracy::new(0.0, 10).is_err());
        assert!(BesselAccuracy::new(1e-10, 0).is_err());
    }

    #[test]
    fn regimes_agree_at_seams() {
        let acc = BesselAccuracy::default();
        let x = SERIES_SWITCH_J;
        let (m0, m1) = miller_j01(x);
        assert!((j_series(0, x, &acc) - m0).abs() < 1e-12);
        assert!((j_series(1, x, &acc) - m1).abs() < 1e-12);
        let x = HANKEL_SWITCH_J;
        let (m0, m1) = miller_j01(x);
        assert!((hankel_j(0, x) - m0).abs() < 1e-12);
        assert!((hankel_j(1, x) - m1).abs() < 1e-12);
        let x = ASYMPTOTIC_SWITCH_I;
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(i_series(0, x, &acc), asymptotic_i(0, x)) < 1e-12);
        assert!(rel(i_series(1, x, &acc), asymptotic_i(1, x)) < 1e-12);
    }

    #[test]
    fn root_forms_match_direct_evaluation() {
        for &w in &[0.0_f64, 0.01, 0.7, 3.0, 15.9, 16.1, 40.0, 200.0] {
            let r: f64 = w.sqrt();
            assert!((j0_root(w) - j0(2.0 * r)).abs() < 1e-13, "w = {w}");
            if w > 0.0 {
                assert!((j1_root_ratio(w) - j1(2.0 * r) / r).abs() < 1e-13, "w = {w}");
            }
        }
        assert_eq!(j1_root_ratio(0.0), 1.0);
    }

    #[test]
    fn derivative_identity() {
        // J1'(z) = J0(z) - J1(z)/z
        let mut z = 0.5;
        while z <= 20.0 {
            let h = 1e-5;
            let fd = (j1(z + h) - j1(z - h)) / (2.0 * h);
            assert!((fd - (j0(z) - j1(z) / z)).abs() < 1e-6, "z = {z}");
            z += 0.25;
        }
    }
}
