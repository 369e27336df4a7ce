//! Model constants, their admissible ranges, and the scalar envelope functions
//! and constants that appear in the a priori bounds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Degeneracy, Error, Result};

/// Relative gap below which two decay rates are treated as equal.
pub const RATE_COINCIDENCE: f64 = 1e-8;

/// Kinetic constants of the three-variable system
/// `u_t = D u_xx - w + y + u(a-u)(u-1)`, `w_t = eps(-beta w + c + u)`,
/// `y_t = delta(-u + h - d y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub diffusion: f64,
    pub eps: f64,
    pub beta: f64,
    pub delta: f64,
    pub d: f64,
    pub c: f64,
    pub h: f64,
}

impl ModelParams {
    /// The demonstration parameter set shipped as the configuration default.
    pub fn demo() -> Self {
        Self {
            a: 0.5,
            diffusion: 1.0,
            eps: 0.08,
            beta: 0.8,
            delta: 0.04,
            d: 1.0,
            c: 0.3,
            h: 0.2,
        }
    }

    pub fn beta_eps(&self) -> f64 {
        self.beta * self.eps
    }

    pub fn delta_d(&self) -> f64 {
        self.delta * self.d
    }

    pub fn decay_rates(&self) -> DecayRates {
        let l = self.a.min(self.beta_eps());
        DecayRates {
            l,
            q: l.min(self.delta_d()),
        }
    }

    /// `h/d - c/beta`, the asymptotic value of the constant forcing.
    pub fn forcing_offset(&self) -> f64 {
        self.h / self.d - self.c / self.beta
    }
}

/// `l = min(a, beta eps)` and `q = min(a, beta eps, delta d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRates {
    pub l: f64,
    pub q: f64,
}

/// Parameters that passed [`validate`], together with their decay rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedParams {
    pub params: ModelParams,
    pub rates: DecayRates,
}

impl std::ops::Deref for ValidatedParams {
    type Target = ModelParams;
    fn deref(&self) -> &ModelParams {
        &self.params
    }
}

fn check(name: &'static str, value: f64, ok: bool, rule: &str) -> Result<()> {
    if !value.is_finite() || !ok {
        return Err(Error::Validation {
            name,
            reason: format!("{rule}, got {value}"),
        });
    }
    Ok(())
}

/// Checks the admissible ranges and that the initial data are bounded.
pub fn validate(
    raw: ModelParams,
    u0_sup: f64,
    w0_sup: f64,
    y0_sup: f64,
) -> Result<ValidatedParams> {
    check("a", raw.a, raw.a > 0.0 && raw.a < 1.0, "must satisfy 0 < a < 1")?;
    check("D", raw.diffusion, raw.diffusion > 0.0, "must be positive")?;
    check("eps", raw.eps, raw.eps > 0.0, "must be positive")?;
    check("beta", raw.beta, raw.beta > 0.0, "must be positive")?;
    check("delta", raw.delta, raw.delta > 0.0, "must be positive")?;
    check("d", raw.d, raw.d > 0.0, "must be positive")?;
    check("c", raw.c, raw.c >= 0.0, "must be non-negative")?;
    check("h", raw.h, raw.h >= 0.0, "must be non-negative")?;
    for (name, v) in [("u0", u0_sup), ("w0", w0_sup), ("y0", y0_sup)] {
        if !v.is_finite() {
            return Err(Error::Data(format!("sup-norm of {name} is not finite")));
        }
    }
    Ok(ValidatedParams {
        params: raw,
        rates: raw.decay_rates(),
    })
}

/// Names of the scalar envelope functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Envelope {
    A,
    B,
    C,
    E,
    L,
    Lambda,
    G,
    H,
}

impl std::str::FromStr for Envelope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "A" => Envelope::A,
            "B" => Envelope::B,
            "C" => Envelope::C,
            "E" => Envelope::E,
            "L" => Envelope::L,
            "lambda" => Envelope::Lambda,
            "g" => Envelope::G,
            "h" => Envelope::H,
            other => return Err(Error::Domain(format!("unknown envelope {other}"))),
        })
    }
}

fn rates_coincide(p: f64, r: f64) -> bool {
    (r - p).abs() <= RATE_COINCIDENCE * (r.abs() + p.abs())
}

/// `(e^{-p t} - e^{-r t}) / (r - p)`, symmetric in the two rates and equal to
/// `t e^{-m t}` (midpoint rate `m`) when they coincide.
pub fn exp_difference(p: f64, r: f64, t: f64) -> f64 {
    if rates_coincide(p, r) {
        let m = 0.5 * (p + r);
        return t * (-m * t).exp();
    }
    let (lo, hi) = if p < r { (p, r) } else { (r, p) };
    let gap = hi - lo;
    (-lo * t).exp() * (-(-gap * t).exp_m1()) / gap
}

/// `lambda(t) = 1 + pi t (sqrt(eps) + sqrt(delta) + pi t sqrt(delta eps))`.
pub fn lambda(t: f64, p: &ModelParams) -> f64 {
    let se = p.eps.sqrt();
    let sd = p.delta.sqrt();
    1.0 + PI * t * (se + sd + PI * t * (sd * se))
}

pub fn env_a(t: f64, p: &ModelParams) -> f64 {
    exp_difference(p.beta_eps(), p.a, t)
}

pub fn env_b(t: f64, p: &ModelParams) -> f64 {
    exp_difference(p.delta_d(), p.a, t)
}

pub fn env_c(t: f64, p: &ModelParams) -> f64 {
    exp_difference(p.delta_d(), p.beta_eps(), t)
}

pub fn env_e(t: f64, p: &ModelParams) -> f64 {
    exp_difference(p.decay_rates().q, p.delta_d(), t)
}

pub fn env_l(t: f64, p: &ModelParams) -> f64 {
    exp_difference(p.decay_rates().q, p.beta_eps(), t)
}

/// `lambda(t) [E(t) + L(t)]`, i.e. `|beta eps - delta d| g(t)`; finite even
/// when the two rates coincide.
pub fn g_scaled(t: f64, p: &ModelParams) -> f64 {
    lambda(t, p) * (env_e(t, p) + env_l(t, p))
}

/// `lambda(t) [E(t) + L(t)] / |beta eps - delta d|`; `+inf` when the rates
/// coincide.
pub fn env_g(t: f64, p: &ModelParams) -> f64 {
    let gap = p.beta_eps() - p.delta_d();
    if rates_coincide(p.beta_eps(), p.delta_d()) {
        return f64::INFINITY;
    }
    g_scaled(t, p) / gap.abs()
}

/// `lambda(t) / (eps beta - delta d)^2 [L(t) + (1 + t (delta d - eps beta)) E(t)]`.
pub fn env_h(t: f64, p: &ModelParams) -> f64 {
    let gap = p.delta_d() - p.beta_eps();
    if rates_coincide(p.beta_eps(), p.delta_d()) {
        return f64::INFINITY;
    }
    lambda(t, p) / (gap * gap) * (env_l(t, p) + (1.0 + t * gap) * env_e(t, p))
}

/// Evaluates the named envelope at `t >= 0`.
pub fn envelope(name: Envelope, t: f64, p: &ModelParams) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("envelope time must be >= 0, got {t}")));
    }
    Ok(match name {
        Envelope::A => env_a(t, p),
        Envelope::B => env_b(t, p),
        Envelope::C => env_c(t, p),
        Envelope::E => env_e(t, p),
        Envelope::L => env_l(t, p),
        Envelope::Lambda => lambda(t, p),
        Envelope::G => env_g(t, p),
        Envelope::H => env_h(t, p),
    })
}

/// A bound constant that may be undefined because one of its denominators
/// vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constant {
    Value(f64),
    Degenerate(Degeneracy),
}

impl Constant {
    pub fn get(self) -> Result<f64> {
        match self {
            Constant::Value(v) => Ok(v),
            Constant::Degenerate(which) => Err(Error::DegenerateBoundConstant(which)),
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Constant::Value(v) => Some(v),
            Constant::Degenerate(_) => None,
        }
    }
}

/// `S` bounds the time-integrated `L1` norm of the kernel; `M`, `N` bound the
/// time-integrated norms of the derived kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub s: f64,
    pub m: Constant,
    pub n: Constant,
}

pub fn constant_s(p: &ModelParams) -> f64 {
    let DecayRates { l, .. } = p.decay_rates();
    let (a, be, dd) = (p.a, p.beta_eps(), p.delta_d());
    let se = p.eps.sqrt();
    let sd = p.delta.sqrt();
    1.0 / a
        + se * PI * (a + be) / (2.0 * (a * be).powf(1.5))
        + sd * PI
            * ((dd + a) / (a * dd).powf(1.5)
                + 3.0 * PI * se * (dd * dd + l * l) / (4.0 * (l * dd).powf(2.5)))
}

pub fn bound_constants(p: &ModelParams) -> BoundConstants {
    let q = p.decay_rates().q;
    let (be, dd) = (p.beta_eps(), p.delta_d());
    let se = p.eps.sqrt();
    let sd = p.delta.sqrt();
    let m = if rates_coincide(q, dd) {
        Constant::Degenerate(Degeneracy::DeltaDEqualsQ)
    } else {
        Constant::Value(
            (q + dd
                + PI * (se + sd) * (q * q + dd * dd) / (dd * q)
                + 2.0 * PI * PI * (sd * se) * (q.powi(3) + dd.powi(3)) / (q * dd).powi(2))
                / ((dd - q).abs() * p.delta * q * p.d),
        )
    };
    // the last denominator is (q beta d)^2
    let n = if rates_coincide(q, be) {
        Constant::Degenerate(Degeneracy::BetaEpsEqualsQ)
    } else {
        Constant::Value(
            (q + be
                + PI * (se + sd) * (q * q + be * be) / (be * q)
                + 2.0 * PI * PI * (sd * se) * (q.powi(3) + be.powi(3))
                    / (q * p.beta * p.d).powi(2))
                / ((be - q).abs() * q * be),
        )
    };
    BoundConstants {
        s: constant_s(p),
        m,
        n,
    }
}

/// Whether `beta eps` and `delta d` coincide within [`RATE_COINCIDENCE`].
pub fn slow_rates_coincide(p: &ModelParams) -> bool {
    rates_coincide(p.beta_eps(), p.delta_d())
}

/// Whether `q` and `delta d` coincide within [`RATE_COINCIDENCE`].
pub fn q_is_delta_d(p: &ModelParams) -> bool {
    rates_coincide(p.decay_rates().q, p.delta_d())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_is_accepted() {
        let v = validate(ModelParams::demo(), 1.0, 0.0, 0.0).unwrap();
        assert_eq!(v.rates.q, 0.04);
        assert_eq!(v.rates.l, 0.08 * 0.8);
    }

    #[test]
    fn out_of_range_constants_are_named() {
        let mut p = ModelParams::demo();
        p.a = 1.2;
        match validate(p, 1.0, 0.0, 0.0) {
            Err(Error::Validation { name, .. }) => assert_eq!(name, "a"),
            other => panic!("unexpected {other:?}"),
        }
        let mut p = ModelParams::demo();
        p.diffusion = 0.0;
        match validate(p, 1.0, 0.0, 0.0) {
            Err(Error::Validation { name, .. }) => assert_eq!(name, "D"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            validate(ModelParams::demo(), f64::INFINITY, 0.0, 0.0),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn envelope_examples() {
        let p = ModelParams::demo();
        assert_eq!(envelope(Envelope::Lambda, 0.0, &p).unwrap(), 1.0);
        let mut q = p;
        q.a = 2.0;
        q.beta = 1.0;
        q.eps = 1.0;
        let exact = (-1f64).exp() - (-2f64).exp();
        assert!((envelope(Envelope::A, 1.0, &q).unwrap() - exact).abs() < 1e-15);
        q.a = 1.0;
        assert!((envelope(Envelope::A, 1.0, &q).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!(matches!(
            envelope(Envelope::A, -1.0, &p),
            Err(Error::Domain(_))
        ));
        assert!("lambda".parse::<Envelope>().is_ok());
        assert!("zeta".parse::<Envelope>().is_err());
    }

    #[test]
    fn coincident_slow_rates_do_not_divide_by_zero() {
        let mut p = ModelParams::demo();
        p.beta = 0.5; // beta eps = 0.04 = delta d
        assert!(env_g(1.0, &p).is_infinite());
        assert!(env_h(1.0, &p).is_infinite());
        assert!(g_scaled(1.0, &p).is_finite());
    }

    #[test]
    fn degenerate_constants_are_flagged() {
        let k = bound_constants(&ModelParams::demo());
        assert_eq!(k.m, Constant::Degenerate(Degeneracy::DeltaDEqualsQ));
        assert!(matches!(
            k.m.get(),
            Err(Error::DegenerateBoundConstant(Degeneracy::DeltaDEqualsQ))
        ));
        assert!(k.n.value().unwrap() > 0.0);
        assert!(k.s > 0.0);
    }
}
