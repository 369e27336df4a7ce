//! Reference values of `J0`, `J1`, `I0`, `I1` from their power series in
//! exact fixed-point arithmetic, independent of the floating-point
//! evaluators in [`crate::specfun`].

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

/// Fractional bits of the fixed-point representation.
const FRACTION_BITS: u32 = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BesselKind {
    J0,
    J1,
    I0,
    I1,
}

impl BesselKind {
    pub const ALL: [BesselKind; 4] = [BesselKind::J0, BesselKind::J1, BesselKind::I0, BesselKind::I1];

    pub fn name(self) -> &'static str {
        match self {
            BesselKind::J0 => "J0",
            BesselKind::J1 => "J1",
            BesselKind::I0 => "I0",
            BesselKind::I1 => "I1",
        }
    }

    fn order(self) -> u32 {
        match self {
            BesselKind::J0 | BesselKind::I0 => 0,
            BesselKind::J1 | BesselKind::I1 => 1,
        }
    }

    fn alternating(self) -> bool {
        matches!(self, BesselKind::J0 | BesselKind::J1)
    }

    /// The floating-point evaluator under test.
    pub fn eval(self, z: f64) -> f64 {
        match self {
            BesselKind::J0 => crate::specfun::j0(z),
            BesselKind::J1 => crate::specfun::j1(z),
            BesselKind::I0 => crate::specfun::i0(z),
            BesselKind::I1 => crate::specfun::i1(z),
        }
    }
}

/// `z = mantissa * 2^exponent` exactly.
fn decompose(z: f64) -> (u64, i32) {
    if z == 0.0 {
        return (0, 0);
    }
    let bits = z.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    }
}

fn shift(v: BigInt, by: i64) -> BigInt {
    if by >= 0 {
        v << by as usize
    } else {
        v >> (-by) as usize
    }
}

/// Series value at `|z| <= 64` (finite, not NaN), correct to far below one
/// unit in the last place of `f64`.
pub fn series_oracle(kind: BesselKind, z: f64) -> f64 {
    assert!(z.is_finite() && z.abs() <= 64.0, "oracle covers |z| <= 64");
    let n = kind.order();
    let (mant, exp) = decompose(z.abs());
    let p = FRACTION_BITS as i64;
    // x = |z| / 2 in fixed point, x^2 as (m^2, 2(exp-1)) exactly
    let m = BigInt::from(mant);
    let e_half = exp as i64 - 1;
    let x_fixed = shift(m.clone(), p + e_half);
    let m2 = &m * &m;
    let e2 = 2 * e_half;
    let one = BigInt::from(1) << FRACTION_BITS as usize;
    let mut term = if n == 0 { one } else { x_fixed };
    let mut sum = term.clone();
    let mut k: u64 = 1;
    loop {
        term = shift(&term * &m2, e2);
        term /= BigInt::from(k * (k + n as u64));
        if term.is_zero() {
            break;
        }
        if kind.alternating() && k % 2 == 1 {
            sum -= &term;
        } else {
            sum += &term;
        }
        k += 1;
    }
    // keep 64 significant bits before converting
    let bits = sum.bits() as i64;
    let drop = (bits - 64).max(0);
    let top = shift(sum, -drop).to_f64().expect("fits");
    let v = top * 2f64.powi((drop - p) as i32);
    if n == 1 && z < 0.0 {
        -v
    } else {
        v
    }
}
