//! The fundamental solution `H = H1 - H2` of
//! `L u = u_t - D u_xx + a u + int_0^t [eps e^{-eps beta (t-s)} + delta e^{-delta d (t-s)}] u(x,s) ds`,
//! its Laplace transform, and tabulation on a grid.
//!
//! Both correction integrals carry `J1(2 sqrt(k y (t-y))) sqrt(k y / (t-y))`,
//! which equals `k y * j1_root_ratio(k y (t-y))` and is smooth at `y = t`.
//! The only non-smooth endpoint is `y = 0`, where the heat kernel behaves like
//! `y^{-1/2}`; every integral over `[0, t]` is therefore taken in the variable
//! `v` with `y = t v^2`.

use std::cell::RefCell;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::bounds::pointwise_h_bound;
use crate::convolution::{conv_time_exp, eval_k_delta, TimeSignal};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ode;
use crate::params::{lambda, ModelParams};
use crate::quadrature::{integrate, QuadratureSpec};

/// Damped heat kernel `e^{-x^2/(4 D t) - a t} / (2 sqrt(pi D t))`.
pub fn damped_heat(x: f64, t: f64, p: &ModelParams) -> f64 {
    (-x * x / (4.0 * p.diffusion * t) - p.a * t).exp() / (2.0 * (PI * p.diffusion * t).sqrt())
}

fn check_time(t: f64, what: &str) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!(
            "{what} is defined for t > 0 only, got t = {t}"
        )));
    }
    Ok(())
}

/// Runs an integrand that may fail; the first failure aborts the outer
/// quadrature with that error.
pub(crate) fn integrate_fallible<F>(f: F, lo: f64, hi: f64, quad: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let est = integrate(
        |v| {
            if failure.borrow().is_some() {
                return 0.0;
            }
            match f(v) {
                Ok(y) => y,
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    0.0
                }
            }
        },
        lo,
        hi,
        quad,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(est?.value)
}

/// `eps int_0^t G_a(x, y) y Phi(eps y (t-y)) e^{-beta eps (t-y)} dy`, the
/// memory correction inside `H1`.
fn h1_correction(x: f64, t: f64, p: &ModelParams, quad: &QuadratureSpec) -> Result<f64> {
    if p.eps == 0.0 {
        return Ok(0.0);
    }
    let dd = p.diffusion;
    let be = p.beta_eps();
    let pref = p.eps * t.powf(1.5) / (PI * dd).sqrt();
    let f = |v: f64| {
        let v2 = v * v;
        let y = t * v2;
        let gauss = (-x * x / (4.0 * dd * y) - p.a * y).exp();
        gauss * v2 * crate::specfun::j1_root_ratio(p.eps * y * (t - y)) * (-be * (t - y)).exp()
    };
    let est = integrate(f, 0.0, 1.0, quad)?;
    Ok(pref * est.value)
}

/// First part of the fundamental solution.
pub fn eval_h1(x: f64, t: f64, p: &ModelParams, quad: &QuadratureSpec) -> Result<f64> {
    check_time(t, "H1")?;
    let corr = h1_correction(x, t, p, quad).map_err(|e| e.at(|| format!("H1(x={x}, t={t})")))?;
    Ok(damped_heat(x, t, p) - corr)
}

/// `delta int_0^t H1(x, y) e^{-delta d (t-y)} y Phi(delta y (t-y)) dy`.
pub fn eval_h2(x: f64, t: f64, p: &ModelParams, quad: &QuadratureSpec) -> Result<f64> {
    check_time(t, "H2")?;
    if p.delta == 0.0 {
        return Ok(0.0);
    }
    let dd = p.delta_d();
    let f = |v: f64| -> Result<f64> {
        let v2 = v * v;
        let y = t * v2;
        let h1 = eval_h1(x, y, p, quad)?;
        Ok(h1
            * (-dd * (t - y)).exp()
            * y
            * crate::specfun::j1_root_ratio(p.delta * y * (t - y))
            * 2.0
            * t
            * v)
    };
    let value = integrate_fallible(f, 0.0, 1.0, quad)
        .map_err(|e| e.at(|| format!("H2(x={x}, t={t})")))?;
    Ok(p.delta * value)
}

/// `H = H1 - H2`.
pub fn eval_h(x: f64, t: f64, p: &ModelParams, quad: &QuadratureSpec) -> Result<f64> {
    Ok(eval_h1(x, t, p, quad)? - eval_h2(x, t, p, quad)?)
}

fn check_half_plane(s: f64, p: &ModelParams) -> Result<()> {
    let edge = (-p.a).max(-p.beta_eps()).max(-p.delta_d());
    if !(s > edge) || !s.is_finite() {
        return Err(Error::Domain(format!(
            "Laplace variable s = {s} outside the half-plane s > {edge}"
        )));
    }
    Ok(())
}

fn transform_from_sigma_sq(x: f64, sigma_sq: f64, p: &ModelParams) -> f64 {
    let sigma = sigma_sq.sqrt();
    let sd = p.diffusion.sqrt();
    (-x.abs() * sigma / sd).exp() / (2.0 * sigma * sd)
}

/// `e^{-|x| sigma / sqrt(D)} / (2 sigma sqrt(D))` with
/// `sigma^2 = s + a + delta/(s + delta d) + eps/(s + beta eps)`: the transform
/// of the fundamental solution of `L`.
pub fn laplace_h_closed(x: f64, s: f64, p: &ModelParams) -> Result<f64> {
    check_half_plane(s, p)?;
    let sigma_sq = s + p.a + p.delta / (s + p.delta_d()) + p.eps / (s + p.beta_eps());
    Ok(transform_from_sigma_sq(x, sigma_sq, p))
}

/// Transform of [`eval_h`] as constructed. Each memory correction acts as the
/// substitution `s -> s + k/(s + r)` on the transform of what it corrects, so
/// `H2` (built from `H1`) shifts the argument of the `eps` term as well:
/// `sigma^2 = s' + a + eps/(s' + beta eps)` with `s' = s + delta/(s + delta d)`.
pub fn laplace_h_composed(x: f64, s: f64, p: &ModelParams) -> Result<f64> {
    check_half_plane(s, p)?;
    let shifted = s + p.delta / (s + p.delta_d());
    let sigma_sq = shifted + p.a + p.eps / (shifted + p.beta_eps());
    Ok(transform_from_sigma_sq(x, sigma_sq, p))
}

/// Smallest horizon (on a 1/8 grid) past which the tail
/// `lambda(t) e^{-(q+s) t} / (q+s)` drops below `tol`.
pub fn laplace_horizon(s: f64, p: &ModelParams, tol: f64) -> Result<f64> {
    let rate = p.decay_rates().q + s;
    if !(rate > 0.0) {
        return Err(Error::Domain(format!(
            "tail bound needs q + s > 0, got {rate}"
        )));
    }
    let tail = |t: f64| lambda(t, p) * (-rate * t).exp() / rate;
    let mut t = 0.125;
    while tail(t) >= tol {
        t += 0.125;
        if t > 1e6 {
            return Err(Error::Domain("Laplace horizon search diverged".into()));
        }
    }
    Ok(t)
}

/// `|int_0^{t_max} e^{-s t} H(x,t) dt - laplace_h_closed(x, s)|`.
pub fn verify_laplace(
    x: f64,
    s: f64,
    p: &ModelParams,
    quad: &QuadratureSpec,
    t_max: f64,
) -> Result<f64> {
    let numeric = laplace_numeric(x, s, p, quad, t_max)?;
    Ok((numeric - laplace_h_closed(x, s, p)?).abs())
}

/// Truncated numerical transform `int_0^{t_max} e^{-s t} H(x,t) dt`, taken
/// in `tau` with `t = tau^2`.
pub fn laplace_numeric(
    x: f64,
    s: f64,
    p: &ModelParams,
    quad: &QuadratureSpec,
    t_max: f64,
) -> Result<f64> {
    check_half_plane(s, p)?;
    let rate = p.decay_rates().q + s;
    if !(rate > 0.0) {
        return Err(Error::Domain(format!("tail bound needs q + s > 0, got {rate}")));
    }
    let tail = lambda(t_max, p) * (-rate * t_max).exp() / rate;
    if !(tail < quad.abs_tol) {
        return Err(Error::Domain(format!(
            "t_max = {t_max} leaves a tail bound {tail:e} >= abs_tol {:e}",
            quad.abs_tol
        )));
    }
    let f = |tau: f64| -> Result<f64> {
        let t = tau * tau;
        Ok(2.0 * tau * (-s * t).exp() * eval_h(x, t, p, quad)?)
    };
    integrate_fallible(f, 0.0, t_max.sqrt(), quad)
}

/// `int_R H(x,t) dx` obtained from the spatial-moment ODE of `L`:
/// `u' = -a u - w + y`, `w' = eps(u - beta w)`, `y' = -delta(u + d y)`,
/// `u(0) = 1`.
pub fn moment_oracle(t: f64, p: &ModelParams) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("moment oracle needs t >= 0, got {t}")));
    }
    let (a, eps, beta, delta, d) = (p.a, p.eps, p.beta, p.delta, p.d);
    let y = ode::integrate(
        |_, s, ds| {
            ds[0] = -a * s[0] - s[1] + s[2];
            ds[1] = eps * (s[0] - beta * s[1]);
            ds[2] = -delta * (s[0] + d * s[2]);
        },
        0.0,
        t,
        &[1.0, 0.0, 0.0],
        1e-10,
    )?;
    Ok(y[0])
}

/// `int_R H(x,t) dx` for the kernel as constructed: the transform
/// `1/sigma^2` of [`laplace_h_composed`] realised as a four-state linear ODE
/// (`z` carries the `delta` shift seen by the `eps` memory).
pub fn composed_moment(t: f64, p: &ModelParams) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("moment needs t >= 0, got {t}")));
    }
    let (a, eps, beta, delta, d) = (p.a, p.eps, p.beta, p.delta, p.d);
    let y = ode::integrate(
        |_, s, ds| {
            ds[0] = -a * s[0] - s[1] + s[2];
            ds[1] = eps * (s[0] - beta * s[1]) - s[3];
            ds[2] = -delta * (s[0] + d * s[2]);
            ds[3] = delta * (s[1] - d * s[3]);
        },
        0.0,
        t,
        &[1.0, 0.0, 0.0, 0.0],
        1e-10,
    )?;
    Ok(y[0])
}

/// Spatial integral `int_R f(x) dx` of an even function given on `x >= 0`,
/// integrated out to `reach`.
pub fn integrate_even<F>(f: F, reach: f64, quad: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    // split so that the adaptive rule sees the peak region on its own
    let near = reach.min(1.0);
    let a = integrate_fallible(&f, 0.0, near, quad)?;
    let b = if reach > near {
        integrate_fallible(&f, near, reach, quad)?
    } else {
        0.0
    };
    Ok(2.0 * (a + b))
}

/// Half-width beyond which the Gaussian envelope of every kernel at time `t`
/// carries negligible mass.
pub fn spatial_reach(t: f64, p: &ModelParams) -> f64 {
    14.0 * (p.diffusion * t).sqrt() + 1.0
}

/// `int_R H(x,t) dx` by adaptive spatial quadrature of [`eval_h`].
pub fn spatial_integral_h(t: f64, p: &ModelParams, quad: &QuadratureSpec) -> Result<f64> {
    integrate_even(|x| eval_h(x, t, p, quad), spatial_reach(t, p), quad)
}

/// `int_R |H(x,t)| dx` by adaptive spatial quadrature of [`eval_h`].
pub fn spatial_l1_h(t: f64, p: &ModelParams, quad: &QuadratureSpec) -> Result<f64> {
    integrate_even(|x| Ok(eval_h(x, t, p, quad)?.abs()), spatial_reach(t, p), quad)
}

/// Samples of `H`, `K_delta` and `H_delta` at grid offsets `i dx`
/// (`i = 0..nx`, evenness covers negative offsets) and times `t_k`,
/// `k = 1..nt`. Row `k = 0` is the distributional limit and is never read.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub grid: Grid,
    pub quad: QuadratureSpec,
    values_h: Vec<f64>,
    values_kdelta: Vec<f64>,
    values_hdelta: Vec<f64>,
}

/// Which tabulated kernel to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    H,
    KDelta,
    HDelta,
}

impl KernelTable {
    fn storage(&self, kind: KernelKind) -> &[f64] {
        match kind {
            KernelKind::H => &self.values_h,
            KernelKind::KDelta => &self.values_kdelta,
            KernelKind::HDelta => &self.values_hdelta,
        }
    }

    /// Kernel value at signed offset `i dx` and time `t_k`, `k >= 1`.
    pub fn value(&self, kind: KernelKind, offset: isize, k: usize) -> f64 {
        assert!(k >= 1, "kernel row 0 is the distributional limit");
        let i = offset.unsigned_abs();
        self.storage(kind)[k * self.grid.nx + i]
    }

    pub fn h(&self, offset: isize, k: usize) -> f64 {
        self.value(KernelKind::H, offset, k)
    }

    pub fn k_delta(&self, offset: isize, k: usize) -> f64 {
        self.value(KernelKind::KDelta, offset, k)
    }

    pub fn h_delta(&self, offset: isize, k: usize) -> f64 {
        self.value(KernelKind::HDelta, offset, k)
    }

    /// Non-negative offsets `0..nx` at time `t_k`.
    pub fn row(&self, kind: KernelKind, k: usize) -> &[f64] {
        assert!(k >= 1, "kernel row 0 is the distributional limit");
        let nx = self.grid.nx;
        &self.storage(kind)[k * nx..(k + 1) * nx]
    }

    /// `int_R |kernel(x, t_k)| dx` by the trapezoid rule over all signed
    /// offsets.
    pub fn l1_norm(&self, kind: KernelKind, k: usize) -> f64 {
        let row = self.row(kind, k);
        let dx = self.grid.dx();
        dx * (row[0].abs() + 2.0 * row[1..].iter().map(|v| v.abs()).sum::<f64>())
    }

    /// `int_R kernel(x, t_k) dx` by the trapezoid rule.
    pub fn mass(&self, kind: KernelKind, k: usize) -> f64 {
        let row = self.row(kind, k);
        let dx = self.grid.dx();
        dx * (row[0] + 2.0 * row[1..].iter().sum::<f64>())
    }

    /// Assembles a table from precomputed rows (time-major, row 0 ignored).
    pub fn from_parts(
        grid: Grid,
        quad: QuadratureSpec,
        values_h: Vec<f64>,
        values_kdelta: Vec<f64>,
        values_hdelta: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.nx * grid.nt;
        if values_h.len() != n || values_kdelta.len() != n || values_hdelta.len() != n {
            return Err(Error::Shape(format!("kernel table needs {n} entries per kernel")));
        }
        Ok(Self {
            grid,
            quad,
            values_h,
            values_kdelta,
            values_hdelta,
        })
    }
}

/// Upper bound for `|K_delta(x, t)|`: `t` times the largest pointwise bound
/// of `H1` on `(0, t]`.
fn k_delta_magnitude_bound(x: f64, t: f64, p: &ModelParams) -> f64 {
    let peak = (x * x / (2.0 * p.diffusion)).clamp(1e-300, t);
    let gauss = (-x * x / (4.0 * p.diffusion * peak)).exp() / (2.0 * (PI * p.diffusion * peak).sqrt());
    t * gauss * (1.0 + p.eps * t * t)
}

/// Tabulates `H` and `K_delta` by quadrature on every `(offset, time)` cell
/// and `H_delta = e^{-beta eps t} * K_delta` by the trapezoid time rule.
/// Cells whose magnitude bound is below `abs_tol / 1000` are stored as zero.
pub fn build_kernel_table(grid: &Grid, p: &ModelParams, quad: &QuadratureSpec) -> Result<KernelTable> {
    grid.validate()?;
    quad.validate()?;
    let nx = grid.nx;
    let nt = grid.nt;
    let dx = grid.dx();
    let negligible = 1e-3 * quad.abs_tol;
    let cells: Vec<(usize, usize)> = (1..nt).flat_map(|k| (0..nx).map(move |i| (i, k))).collect();
    let computed: Vec<(f64, f64)> = cells
        .par_iter()
        .map(|&(i, k)| -> Result<(f64, f64)> {
            let x = i as f64 * dx;
            let t = grid.t(k);
            let h = if pointwise_h_bound(x, t, p)? < negligible {
                0.0
            } else {
                eval_h(x, t, p, quad)
                    .map_err(|e| e.at(|| format!("(dx = {x}, t = {t})")))?
            };
            let kd = if k_delta_magnitude_bound(x, t, p) < negligible {
                0.0
            } else {
                eval_k_delta(x, t, p, quad)
                    .map_err(|e| e.at(|| format!("(dx = {x}, t = {t})")))?
            };
            Ok((h, kd))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values_h = vec![0.0; nx * nt];
    let mut values_kdelta = vec![0.0; nx * nt];
    for (&(i, k), &(h, kd)) in cells.iter().zip(&computed) {
        values_h[k * nx + i] = h;
        values_kdelta[k * nx + i] = kd;
    }
    // H_delta(x, t) = int_0^t e^{-beta eps (t - tau)} K_delta(x, tau) dtau
    let mut values_hdelta = vec![0.0; nx * nt];
    let dt = grid.dt();
    for i in 0..nx {
        let series = TimeSignal::new(dt, (0..nt).map(|k| values_kdelta[k * nx + i]).collect());
        let conv = conv_time_exp(p.beta_eps(), &series);
        for k in 1..nt {
            values_hdelta[k * nx + i] = conv.values[k];
        }
    }
    KernelTable::from_parts(*grid, *quad, values_h, values_kdelta, values_hdelta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn damped_only() -> ModelParams {
        ModelParams {
            a: 1.0,
            diffusion: 1.0,
            eps: 0.0,
            beta: 0.8,
            delta: 0.0,
            d: 1.0,
            c: 0.0,
            h: 0.0,
        }
    }

    #[test]
    fn reduces_to_damped_heat_kernel() {
        let q = QuadratureSpec::default();
        let v = eval_h(0.0, 1.0, &damped_only(), &q).unwrap();
        let expected = (-1f64).exp() / (2.0 * PI.sqrt());
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.103_776_874_355_148_6).abs() < 1e-12);
        assert_eq!(eval_h2(0.3, 1.0, &damped_only(), &q).unwrap(), 0.0);
    }

    #[test]
    fn rejects_non_positive_time() {
        let q = QuadratureSpec::default();
        let p = ModelParams::demo();
        assert!(matches!(eval_h1(1.0, 0.0, &p, &q), Err(Error::Domain(_))));
        assert!(matches!(eval_h(1.0, -1.0, &p, &q), Err(Error::Domain(_))));
        assert!(matches!(eval_h2(1.0, 0.0, &p, &q), Err(Error::Domain(_))));
    }

    #[test]
    fn even_in_space() {
        let q = QuadratureSpec::default();
        let p = ModelParams::demo();
        assert_eq!(eval_h1(3.0, 1.0, &p, &q).unwrap(), eval_h1(-3.0, 1.0, &p, &q).unwrap());
        assert_eq!(eval_h2(2.0, 1.5, &p, &q).unwrap(), eval_h2(-2.0, 1.5, &p, &q).unwrap());
    }

    #[test]
    fn laplace_domain_and_reductions() {
        let p = ModelParams::demo();
        assert!(laplace_h_closed(1.0, -0.05, &p).is_err());
        let s = 1.0;
        let sigma = (s + p.a + p.delta / (s + p.delta_d()) + p.eps / (s + p.beta_eps())).sqrt();
        let at0 = laplace_h_closed(0.0, s, &p).unwrap();
        assert!((at0 - 1.0 / (2.0 * sigma)).abs() < 1e-15);
        let q = damped_only();
        let v = laplace_h_closed(0.7, 2.0, &q).unwrap();
        let expected = (-0.7 * 3f64.sqrt()).exp() / (2.0 * 3f64.sqrt());
        assert!((v - expected).abs() < 1e-15);
        assert_eq!(v, laplace_h_composed(0.7, 2.0, &q).unwrap());
    }

    #[test]
    fn moment_at_origin_and_without_memory() {
        let p = ModelParams::demo();
        assert_eq!(moment_oracle(0.0, &p).unwrap(), 1.0);
        let mut q = damped_only();
        q.a = 0.5;
        assert!((moment_oracle(3.0, &q).unwrap() - (-1.5f64).exp()).abs() < 1e-9);
        assert!((composed_moment(3.0, &q).unwrap() - (-1.5f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn horizon_meets_tail_bound() {
        let p = ModelParams::demo();
        let t = laplace_horizon(1.0, &p, 1e-9).unwrap();
        let rate = p.decay_rates().q + 1.0;
        assert!(lambda(t, &p) * (-rate * t).exp() / rate < 1e-9);
        assert!(lambda(t - 0.125, &p) * (-rate * (t - 0.125)).exp() / rate >= 1e-9);
    }
}
