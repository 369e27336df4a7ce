//! Time convolution `*`, space convolution `⋄`, space-time convolution `⊗`,
//! the derived kernels `K_delta`, `H_delta`, and the identities linking them
//! to `H`.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kernel::{
    eval_h, eval_h1, integrate_even, integrate_fallible, spatial_reach, KernelKind, KernelTable,
};
use crate::params::ModelParams;
use crate::quadrature::QuadratureSpec;
use crate::specfun::j0_root;

/// Samples `values[k]` at `t_k = k dt`, `k = 0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl TimeSignal {
    pub fn new(dt: f64, values: Vec<f64>) -> Self {
        Self { dt, values }
    }

    pub fn from_fn(dt: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        Self::new(dt, (0..n).map(|k| f(k as f64 * dt)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn trapezoid_conv(f: &[f64], g: &[f64], dt: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for (k, slot) in out.iter_mut().enumerate().skip(1) {
        let mut acc = 0.5 * (f[k] * g[0] + f[0] * g[k]);
        for j in 1..k {
            acc += f[k - j] * g[j];
        }
        *slot = dt * acc;
    }
    out
}

/// `(f * g)(t_k) = int_0^{t_k} f(t_k - tau) g(tau) dtau` by the trapezoid
/// rule on the common grid.
pub fn conv_time(f: &TimeSignal, g: &TimeSignal) -> Result<TimeSignal> {
    if f.len() != g.len() || f.dt != g.dt {
        return Err(Error::Shape(format!(
            "time signals differ: {} samples at dt = {} vs {} samples at dt = {}",
            f.len(),
            f.dt,
            g.len(),
            g.dt
        )));
    }
    Ok(TimeSignal::new(f.dt, trapezoid_conv(&f.values, &g.values, f.dt)))
}

/// `e^{-rate t} * g`.
pub fn conv_time_exp(rate: f64, g: &TimeSignal) -> TimeSignal {
    let decay: Vec<f64> = (0..g.len()).map(|k| (-rate * k as f64 * g.dt).exp()).collect();
    TimeSignal::new(g.dt, trapezoid_conv(&decay, &g.values, g.dt))
}

/// `K_delta(x,t) = int_0^t e^{-delta d (t-y)} H1(x,y) J0(2 sqrt(delta y (t-y))) dy`.
pub fn eval_k_delta(x: f64, t: f64, p: &ModelParams, quad: &QuadratureSpec) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("K_delta is defined for t > 0 only, got t = {t}")));
    }
    let dd = p.delta_d();
    let f = |v: f64| -> Result<f64> {
        let y = t * v * v;
        let h1 = eval_h1(x, y, p, quad)?;
        Ok(h1 * (-dd * (t - y)).exp() * j0_root(p.delta * y * (t - y)) * 2.0 * t * v)
    };
    integrate_fallible(f, 0.0, 1.0, quad).map_err(|e| e.at(|| format!("K_delta(x={x}, t={t})")))
}

/// `H_delta = e^{-beta eps t} * K_delta`, by adaptive quadrature over `K_delta`.
pub fn eval_h_delta(x: f64, t: f64, p: &ModelParams, quad: &QuadratureSpec) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("H_delta is defined for t > 0 only, got t = {t}")));
    }
    let be = p.beta_eps();
    let f = |v: f64| -> Result<f64> {
        let tau = t * v * v;
        Ok((-be * (t - tau)).exp() * eval_k_delta(x, tau, p, quad)? * 2.0 * t * v)
    };
    integrate_fallible(f, 0.0, 1.0, quad).map_err(|e| e.at(|| format!("H_delta(x={x}, t={t})")))
}

/// `int_R |kernel(x, t)| dx` by adaptive spatial quadrature of the point
/// evaluators.
pub fn kernel_l1(kind: KernelKind, t: f64, p: &ModelParams, quad: &QuadratureSpec) -> Result<f64> {
    let reach = spatial_reach(t, p);
    match kind {
        KernelKind::H => integrate_even(|x| Ok(eval_h(x, t, p, quad)?.abs()), reach, quad),
        KernelKind::KDelta => integrate_even(|x| Ok(eval_k_delta(x, t, p, quad)?.abs()), reach, quad),
        KernelKind::HDelta => integrate_even(|x| Ok(eval_h_delta(x, t, p, quad)?.abs()), reach, quad),
    }
}

/// Data reflected evenly about both end points: index `j` of the result is
/// grid index `j - (nx - 1)`, covering `-(nx-1) ..= 2(nx-1)`.
fn mirror_extend(data: &[f64]) -> Vec<f64> {
    let n = data.len();
    let last = n - 1;
    (0..3 * n - 2)
        .map(|j| {
            let g = j as isize - last as isize;
            let idx = if g < 0 {
                (-g) as usize
            } else if g as usize > last {
                2 * last - g as usize
            } else {
                g as usize
            };
            data[idx]
        })
        .collect()
}

/// Bound on the mass the truncated kernel row misses.
fn tail_estimate(data_sup: f64, row: &[f64], dx: f64) -> f64 {
    let last = row.last().copied().unwrap_or(0.0).abs();
    2.0 * data_sup * last * (row.len() - 1) as f64 * dx
}

fn check_tail(data_sup: f64, row: &[f64], dx: f64, tol: f64) -> Result<()> {
    let tail = tail_estimate(data_sup, row, dx);
    if tail > 100.0 * tol {
        return Err(Error::Truncation { tail });
    }
    Ok(())
}

/// `(kernel ⋄ data)(x_i) = int_R kernel(x_i - xi) data(xi) dxi` with the
/// kernel given at offsets `0..nx` (even) and the data extended by
/// reflection past both ends of the grid, so the result honours a zero-flux
/// boundary.
///
/// Fails with a truncation error when the kernel has not decayed at the
/// largest offset (tail estimate above `100 tol`).
pub fn conv_space(data: &[f64], kernel_row: &[f64], dx: f64, tol: f64) -> Result<Vec<f64>> {
    let nx = data.len();
    if kernel_row.len() != nx {
        return Err(Error::Shape(format!(
            "kernel row has {} offsets, data has {nx} points",
            kernel_row.len()
        )));
    }
    if nx < 2 {
        return Err(Error::Shape("space convolution needs at least 2 points".into()));
    }
    let sup = data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    check_tail(sup, kernel_row, dx, tol)?;
    let ext = mirror_extend(data);
    let last = nx - 1;
    Ok((0..nx)
        .map(|i| {
            let mut acc = kernel_row[0] * ext[last + i];
            for m in 1..nx {
                acc += kernel_row[m] * (ext[last + i - m] + ext[last + i + m]);
            }
            dx * acc
        })
        .collect())
}

/// Discrete `kernel ⋄ data` at every time `t_k`, `k >= 1`; row 0 is the
/// `t -> 0` limit, which is `data` for `H` and zero for the derived kernels.
pub fn conv_space_table(table: &KernelTable, kind: KernelKind, data: &[f64]) -> Result<Field> {
    let grid = table.grid;
    let tol = table.quad.abs_tol;
    let rows: Vec<Vec<f64>> = (1..grid.nt)
        .into_par_iter()
        .map(|k| conv_space(data, table.row(kind, k), grid.dx(), tol))
        .collect::<Result<_>>()?;
    let mut out = Field::zeros(grid);
    if kind == KernelKind::H {
        out.slice_mut(0).copy_from_slice(data);
    }
    for (k, row) in rows.into_iter().enumerate() {
        out.slice_mut(k + 1).copy_from_slice(&row);
    }
    Ok(out)
}

/// Kernel rows transformed once, so that every space convolution against
/// them becomes a pointwise product in frequency.
pub struct SpectralKernel {
    grid: Grid,
    kind: KernelKind,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    rows: Vec<Vec<Complex64>>,
    last_row: Vec<f64>,
    tol: f64,
}

impl SpectralKernel {
    pub fn new(table: &KernelTable, kind: KernelKind) -> Self {
        let grid = table.grid;
        let nx = grid.nx;
        let len = (3 * nx - 2).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let rows = (0..grid.nt)
            .into_par_iter()
            .map(|k| {
                if k == 0 {
                    return Vec::new();
                }
                let row = table.row(kind, k);
                let mut buf = vec![Complex64::new(0.0, 0.0); len];
                for j in 0..2 * nx - 1 {
                    let m = (j as isize - (nx as isize - 1)).unsigned_abs();
                    buf[j].re = row[m];
                }
                forward.process(&mut buf);
                buf
            })
            .collect();
        Self {
            grid,
            kind,
            len,
            forward,
            inverse,
            rows,
            last_row: table.row(kind, grid.nt - 1).to_vec(),
            tol: table.quad.abs_tol,
        }
    }

    fn transform_data(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (slot, v) in buf.iter_mut().zip(mirror_extend(data)) {
            slot.re = v;
        }
        self.forward.process(&mut buf);
        buf
    }

    fn back(&self, mut acc: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut acc);
        let nx = self.grid.nx;
        let scale = self.grid.dx() / self.len as f64;
        (0..nx).map(|i| acc[2 * (nx - 1) + i].re * scale).collect()
    }

    /// `kernel(t_k) ⋄ data`, `k >= 1`.
    pub fn space(&self, k: usize, data: &[f64]) -> Vec<f64> {
        let fd = self.transform_data(data);
        let acc = self.rows[k].iter().zip(&fd).map(|(a, b)| a * b).collect();
        self.back(acc)
    }

    /// `kernel ⊗ f` on the table grid, trapezoid in time. The zero-lag term
    /// is `f` itself for `H` (its `t -> 0` limit is a point mass) and zero
    /// for the derived kernels.
    pub fn apply(&self, f: &Field) -> Result<Field> {
        let grid = self.grid;
        if f.grid != grid {
            return Err(Error::Shape("field and kernel table live on different grids".into()));
        }
        check_tail(f.sup(), &self.last_row, grid.dx(), self.tol)?;
        let nt = grid.nt;
        let dt = grid.dt();
        let spectra: Vec<Vec<Complex64>> = (0..nt)
            .into_par_iter()
            .map(|j| self.transform_data(f.slice(j)))
            .collect();
        let rows: Vec<Vec<f64>> = (1..nt)
            .into_par_iter()
            .map(|k| {
                let mut acc = vec![Complex64::new(0.0, 0.0); self.len];
                // j = 0 carries half weight, j = 1..k-1 full weight
                for j in 0..k {
                    let w = if j == 0 { 0.5 } else { 1.0 };
                    for ((a, kr), fj) in acc.iter_mut().zip(&self.rows[k - j]).zip(&spectra[j]) {
                        *a += kr * fj * w;
                    }
                }
                let mut row = self.back(acc);
                if self.kind == KernelKind::H {
                    for (r, v) in row.iter_mut().zip(f.slice(k)) {
                        *r += 0.5 * v;
                    }
                }
                for r in row.iter_mut() {
                    *r *= dt;
                }
                row
            })
            .collect();
        let mut out = Field::zeros(grid);
        for (k, row) in rows.into_iter().enumerate() {
            out.slice_mut(k + 1).copy_from_slice(&row);
        }
        Ok(out)
    }
}

/// `kernel ⊗ f` (see [`SpectralKernel::apply`]).
pub fn conv_spacetime(table: &KernelTable, kind: KernelKind, f: &Field) -> Result<Field> {
    SpectralKernel::new(table, kind).apply(f)
}

/// `kernel ⊗ f` by direct summation; quadratic in both grid sizes.
pub fn conv_spacetime_direct(table: &KernelTable, kind: KernelKind, f: &Field) -> Result<Field> {
    let grid = table.grid;
    if f.grid != grid {
        return Err(Error::Shape("field and kernel table live on different grids".into()));
    }
    let dx = grid.dx();
    let dt = grid.dt();
    let tol = table.quad.abs_tol;
    let mut out = Field::zeros(grid);
    for k in 1..grid.nt {
        let mut row = vec![0.0; grid.nx];
        for j in 0..k {
            let w = if j == 0 { 0.5 } else { 1.0 };
            let part = conv_space(f.slice(j), table.row(kind, k - j), dx, tol)?;
            for (r, v) in row.iter_mut().zip(part) {
                *r += w * v;
            }
        }
        if kind == KernelKind::H {
            for (r, v) in row.iter_mut().zip(f.slice(k)) {
                *r += 0.5 * v;
            }
        }
        for (r, v) in out.slice_mut(k).iter_mut().zip(row) {
            *r = dt * v;
        }
    }
    Ok(out)
}

/// Sup-norm residuals of the kernel identities over the sampled offsets and
/// all grid times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    /// `e^{-delta d t} * H - K_delta`
    pub kdelta: f64,
    /// `e^{-eps beta t} * H - [K_delta + (delta d - eps beta) e^{-beta eps t} * K_delta]`
    pub keps: f64,
    /// `e^{-eps beta t} * H - [K_delta + (delta d - eps beta) H_delta]`
    pub hdelta: f64,
    /// `(t e^{-delta d t}) * H - e^{-delta d t} * K_delta`
    pub shift: f64,
    /// Offset and time of the largest of the four residuals.
    pub worst_x: f64,
    pub worst_t: f64,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        self.kdelta.max(self.keps).max(self.hdelta).max(self.shift)
    }
}

/// Offsets at which the identities are checked by default. The point
/// `x = 0` is excluded: `H(0, t) ~ t^{-1/2}` is not resolved by a uniform
/// trapezoid rule in time.
pub const IDENTITY_OFFSETS: [f64; 9] = [0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0];

/// Smallest offset admitted into identity residuals.
pub const IDENTITY_MIN_OFFSET: f64 = 0.5;

struct Residuals {
    values: [f64; 4],
    worst: (f64, f64, f64),
}

fn residuals_at(
    x: f64,
    grid: &Grid,
    p: &ModelParams,
    h: &[f64],
    kd: &[f64],
    hd: &[f64],
    acc: &mut Residuals,
) {
    let dt = grid.dt();
    let hs = TimeSignal::new(dt, h.to_vec());
    let ks = TimeSignal::new(dt, kd.to_vec());
    let gap = p.delta_d() - p.beta_eps();
    let r1 = conv_time_exp(p.delta_d(), &hs);
    let r2 = conv_time_exp(p.beta_eps(), &hs);
    let kh = conv_time_exp(p.beta_eps(), &ks);
    let ramp = TimeSignal::from_fn(dt, h.len(), |t| t * (-p.delta_d() * t).exp());
    let lhs_shift = conv_time(&ramp, &hs).expect("same grid");
    let rhs_shift = conv_time_exp(p.delta_d(), &ks);
    for k in 1..h.len() {
        let r = [
            (r1.values[k] - kd[k]).abs(),
            (r2.values[k] - (kd[k] + gap * kh.values[k])).abs(),
            (r2.values[k] - (kd[k] + gap * hd[k])).abs(),
            (lhs_shift.values[k] - rhs_shift.values[k]).abs(),
        ];
        for (slot, v) in acc.values.iter_mut().zip(r) {
            *slot = slot.max(v);
        }
        let m = r.iter().fold(0.0_f64, |a, &b| a.max(b));
        if m > acc.worst.0 {
            acc.worst = (m, x, grid.t(k));
        }
    }
}

fn finish(acc: Residuals) -> IdentityReport {
    IdentityReport {
        kdelta: acc.values[0],
        keps: acc.values[1],
        hdelta: acc.values[2],
        shift: acc.values[3],
        worst_x: acc.worst.1,
        worst_t: acc.worst.2,
    }
}

/// Identity residuals on the time grid of `grid` at the offsets in `xs`
/// (each at least [`IDENTITY_MIN_OFFSET`]), with `H` and `K_delta` evaluated
/// by quadrature and `H_delta` evaluated independently as
/// `int_0^t e^{-beta eps (t - tau)} K_delta(x, tau) dtau` on the grid.
pub fn check_identities_at(
    xs: &[f64],
    grid: &Grid,
    p: &ModelParams,
    quad: &QuadratureSpec,
) -> Result<IdentityReport> {
    grid.validate()?;
    if let Some(&x) = xs.iter().find(|x| x.abs() < IDENTITY_MIN_OFFSET) {
        return Err(Error::Domain(format!(
            "identity offsets must satisfy |x| >= {IDENTITY_MIN_OFFSET}, got {x}"
        )));
    }
    let nt = grid.nt;
    let samples: Vec<(f64, Vec<f64>, Vec<f64>)> = xs
        .par_iter()
        .map(|&x| -> Result<(f64, Vec<f64>, Vec<f64>)> {
            let mut h = vec![0.0; nt];
            let mut kd = vec![0.0; nt];
            for k in 1..nt {
                let t = grid.t(k);
                h[k] = eval_h(x, t, p, quad)?;
                kd[k] = eval_k_delta(x, t, p, quad)?;
            }
            Ok((x, h, kd))
        })
        .collect::<Result<_>>()?;
    let mut acc = Residuals {
        values: [0.0; 4],
        worst: (0.0, 0.0, 0.0),
    };
    for (x, h, kd) in &samples {
        let hd = conv_time_exp(p.beta_eps(), &TimeSignal::new(grid.dt(), kd.clone()));
        residuals_at(*x, grid, p, h, kd, &hd.values, &mut acc);
    }
    Ok(finish(acc))
}

/// [`check_identities_at`] on the default offsets that fit inside the grid.
pub fn check_identities(grid: &Grid, p: &ModelParams, quad: &QuadratureSpec) -> Result<IdentityReport> {
    let reach = grid.x_max - grid.x_min;
    let xs: Vec<f64> = IDENTITY_OFFSETS.iter().copied().filter(|&x| x <= reach).collect();
    check_identities_at(&xs, grid, p, quad)
}

/// Identity residuals read off a kernel table, at every offset of at least
/// [`IDENTITY_MIN_OFFSET`].
pub fn check_identities_table(table: &KernelTable, p: &ModelParams) -> IdentityReport {
    let grid = table.grid;
    let nt = grid.nt;
    let mut acc = Residuals {
        values: [0.0; 4],
        worst: (0.0, 0.0, 0.0),
    };
    for i in 0..grid.nx {
        let x = i as f64 * grid.dx();
        if x < IDENTITY_MIN_OFFSET {
            continue;
        }
        let column = |kind| -> Vec<f64> {
            (0..nt)
                .map(|k| if k == 0 { 0.0 } else { table.value(kind, i as isize, k) })
                .collect()
        };
        let h = column(KernelKind::H);
        let kd = column(KernelKind::KDelta);
        let hd = column(KernelKind::HDelta);
        residuals_at(x, &grid, p, &h, &kd, &hd, &mut acc);
    }
    finish(acc)
}
