#![allow(dead_code)]

use std::num::NonZeroUsize;

use fhr_core::ode;
use fhr_core::ModelParams;
use gauss_quad::GaussLegendre;

/// Composite Gauss-Legendre rule with `panels` equal panels of `degree`
/// nodes each.
pub fn composite_gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, degree: usize) -> f64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(degree).unwrap());
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|j| {
            let lo = a + j as f64 * h;
            rule.integrate(lo, lo + h, &f)
        })
        .sum()
}

/// Parameters whose bound constants are all finite and small.
pub fn tight_params() -> ModelParams {
    ModelParams {
        a: 0.5,
        diffusion: 1.0,
        eps: 1.0,
        beta: 1.0,
        delta: 1.0,
        d: 1.0,
        c: 0.3,
        h: 0.2,
    }
}

/// The system without diffusion, `(u, w, y)` at each of `times`.
pub fn homogeneous_ode(p: &ModelParams, state: [f64; 3], times: &[f64]) -> Vec<[f64; 3]> {
    let rhs = |_t: f64, s: &[f64], out: &mut [f64]| {
        let (u, w, y) = (s[0], s[1], s[2]);
        out[0] = -w + y + u * (p.a - u) * (u - 1.0);
        out[1] = p.eps * (-p.beta * w + p.c + u);
        out[2] = p.delta * (-u + p.h - p.d * y);
    };
    ode::integrate_to_times(rhs, times, &state, 1e-12)
        .unwrap()
        .into_iter()
        .map(|s| [s[0], s[1], s[2]])
        .collect()
}
