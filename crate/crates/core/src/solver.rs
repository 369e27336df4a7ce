//! Solution of the reduced problem for `u` by Picard iteration on
//! `u = H ⋄ u0 + H ⊗ F(u)`, recovery of the slow variables, the expanded
//! convolution form used as a cross-check, and a finite-difference solver of
//! the original system.

use serde::{Deserialize, Serialize};

use crate::convolution::{conv_space_table, conv_time_exp, SpectralKernel, TimeSignal};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kernel::{KernelKind, KernelTable};
use crate::params::ModelParams;

/// Closed-form initial profile sampled onto the space axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Profile {
    Zero,
    Constant { value: f64 },
    /// `amplitude * exp(-(x - center)^2 / (2 width^2))`.
    Gaussian { center: f64, width: f64, amplitude: f64 },
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value,
            Profile::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let z = (x - center) / width;
                amplitude * (-0.5 * z * z).exp()
            }
        }
    }

    /// `sup_R |profile|`.
    pub fn sup(&self) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value.abs(),
            Profile::Gaussian { amplitude, .. } => amplitude.abs(),
        }
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        match *self {
            Profile::Gaussian { width, .. } if !(width > 0.0) || !width.is_finite() => {
                Err(Error::Validation {
                    name,
                    reason: format!("gaussian width must be positive, got {width}"),
                })
            }
            _ if !self.sup().is_finite() => Err(Error::Data(format!("{name} is not finite"))),
            _ => Ok(()),
        }
    }
}

/// Initial values of `(u, w, y)` sampled on the space axis of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u0: Vec<f64>,
    pub w0: Vec<f64>,
    pub y0: Vec<f64>,
    sups: [f64; 3],
}

impl InitialData {
    /// Samples; the sup-norms are taken from the samples.
    pub fn from_samples(u0: Vec<f64>, w0: Vec<f64>, y0: Vec<f64>) -> Result<Self> {
        if u0.len() != w0.len() || u0.len() != y0.len() {
            return Err(Error::Shape("initial data arrays differ in length".into()));
        }
        let sup = |v: &[f64], name: &str| -> Result<f64> {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Data(format!("{name} has non-finite samples")));
            }
            Ok(v.iter().fold(0.0_f64, |m, x| m.max(x.abs())))
        };
        let sups = [sup(&u0, "u0")?, sup(&w0, "w0")?, sup(&y0, "y0")?];
        Ok(Self { u0, w0, y0, sups })
    }

    /// Profiles sampled at the grid points; the sup-norms are those of the
    /// profiles on the whole line.
    pub fn from_profiles(grid: &Grid, u0: Profile, w0: Profile, y0: Profile) -> Result<Self> {
        u0.validate("u0")?;
        w0.validate("w0")?;
        y0.validate("y0")?;
        let xs = grid.xs();
        let sample = |p: Profile| xs.iter().map(|&x| p.eval(x)).collect::<Vec<_>>();
        let mut data = Self::from_samples(sample(u0), sample(w0), sample(y0))?;
        data.sups = [u0.sup(), w0.sup(), y0.sup()];
        Ok(data)
    }

    pub fn zeros(nx: usize) -> Self {
        Self::from_samples(vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]).expect("zeros are finite")
    }

    pub fn len(&self) -> usize {
        self.u0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u0.is_empty()
    }

    pub fn u0_sup(&self) -> f64 {
        self.sups[0]
    }

    pub fn w0_sup(&self) -> f64 {
        self.sups[1]
    }

    pub fn y0_sup(&self) -> f64 {
        self.sups[2]
    }
}

/// Stopping rule of the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardSpec {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardSpec {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 50,
        }
    }
}

impl PicardSpec {
    pub fn new(tol: f64, max_iter: usize) -> Result<Self> {
        let s = Self { tol, max_iter };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::Validation {
                name: "tol",
                reason: format!("must be positive, got {}", self.tol),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::Validation {
                name: "max_iter",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Sampled `(u, w, y)` with the diagnostics of the run that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub grid: Grid,
    pub u: Field,
    pub w: Field,
    pub y: Field,
    pub iterations_used: usize,
    pub final_update_norm: f64,
    /// Sup-norm of each successive update.
    pub history: Vec<f64>,
    /// `max |phi'(u)|` over the range of `u`.
    pub lipschitz_estimate: f64,
    /// `1.1 sup |phi(u)|` over the range of `u`, fixed when the run finished.
    pub phi_norm: f64,
}

/// `phi(u) = u^2 (a + 1 - u)`, the nonlinearity left after moving `-a u` to
/// the linear operator.
pub fn phi(u: f64, p: &ModelParams) -> f64 {
    u * u * (p.a + 1.0 - u)
}

/// `f(u) = u (a - u)(u - 1)`.
pub fn reaction(u: f64, p: &ModelParams) -> f64 {
    u * (p.a - u) * (u - 1.0)
}

/// Source of the reduced problem at space index `i`:
/// `phi(u) - w0 e^{-eps beta t} + y0 e^{-delta d t} - (c/beta)(1 - e^{-eps beta t}) + (h/d)(1 - e^{-delta d t})`.
pub fn source_f(i: usize, t: f64, u: f64, data: &InitialData, p: &ModelParams) -> f64 {
    let ew = (-p.beta_eps() * t).exp();
    let ey = (-p.delta_d() * t).exp();
    phi(u, p) - data.w0[i] * ew + data.y0[i] * ey - p.c / p.beta * (1.0 - ew)
        + p.h / p.d * (1.0 - ey)
}

/// `F(x_i, t_k, u(x_i, t_k))` on the whole grid.
pub fn source_field(u: &Field, data: &InitialData, p: &ModelParams) -> Field {
    let grid = u.grid;
    let mut out = Field::zeros(grid);
    for k in 0..grid.nt {
        let t = grid.t(k);
        for i in 0..grid.nx {
            out.set(i, k, source_f(i, t, u.get(i, k), data, p));
        }
    }
    out
}

fn range(f: &Field) -> (f64, f64) {
    f.values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// `sup |phi|` over `[lo, hi]`.
pub fn phi_sup_on(lo: f64, hi: f64, p: &ModelParams) -> f64 {
    let peak = 2.0 * (p.a + 1.0) / 3.0;
    [lo, hi, 0.0, peak]
        .iter()
        .filter(|&&u| u >= lo && u <= hi)
        .fold(0.0_f64, |m, &u| m.max(phi(u, p).abs()))
}

/// `sup |phi'|` over `[lo, hi]`, `phi'(u) = 2u(a+1) - 3u^2`.
pub fn phi_lipschitz_on(lo: f64, hi: f64, p: &ModelParams) -> f64 {
    let d = |u: f64| 2.0 * u * (p.a + 1.0) - 3.0 * u * u;
    let peak = (p.a + 1.0) / 3.0;
    [lo, hi, peak]
        .iter()
        .filter(|&&u| u >= lo && u <= hi)
        .fold(0.0_f64, |m, &u| m.max(d(u).abs()))
}

fn check_data(data: &InitialData, grid: &Grid) -> Result<()> {
    if data.len() != grid.nx {
        return Err(Error::Shape(format!(
            "initial data has {} points, grid has {}",
            data.len(),
            grid.nx
        )));
    }
    Ok(())
}

fn finish(
    u: Field,
    data: &InitialData,
    p: &ModelParams,
    iterations_used: usize,
    history: Vec<f64>,
) -> SolutionField {
    let (w, y) = recover_wy(&u, data, p);
    let (lo, hi) = range(&u);
    SolutionField {
        grid: u.grid,
        iterations_used,
        final_update_norm: history.last().copied().unwrap_or(0.0),
        history,
        lipschitz_estimate: phi_lipschitz_on(lo, hi, p),
        phi_norm: 1.1 * phi_sup_on(lo, hi, p),
        u,
        w,
        y,
    }
}

/// Iterates `u <- H ⋄ u0 + H ⊗ F(u)` from `u = H ⋄ u0` until successive
/// iterates differ by at most `spec.tol` in sup-norm, then recovers `w` and
/// `y`.
pub fn picard_solve(
    data: &InitialData,
    grid: &Grid,
    p: &ModelParams,
    table: &KernelTable,
    spec: &PicardSpec,
) -> Result<SolutionField> {
    spec.validate()?;
    check_data(data, grid)?;
    if table.grid != *grid {
        return Err(Error::Shape("kernel table was built on a different grid".into()));
    }
    let affine = conv_space_table(table, KernelKind::H, &data.u0)?;
    let engine = SpectralKernel::new(table, KernelKind::H);
    let mut u = affine.clone();
    let mut history = Vec::new();
    for iteration in 1..=spec.max_iter {
        let mut next = engine.apply(&source_field(&u, data, p))?;
        for (v, a) in next.values.iter_mut().zip(&affine.values) {
            *v += a;
        }
        if !next.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite iterate at iteration {iteration}"
            )));
        }
        let update = next.sup_diff(&u)?;
        history.push(update);
        u = next;
        if update <= spec.tol {
            return Ok(finish(u, data, p, iteration, history));
        }
    }
    Err(Error::NonConvergence { history })
}

/// `w = w0 e^{-eps beta t} + (c/beta)(1 - e^{-eps beta t}) + eps e^{-eps beta t} * u` and
/// `y = y0 e^{-delta d t} + (h/d)(1 - e^{-delta d t}) - delta e^{-delta d t} * u`,
/// with the time convolutions taken by the trapezoid rule.
pub fn recover_wy(u: &Field, data: &InitialData, p: &ModelParams) -> (Field, Field) {
    let grid = u.grid;
    let mut w = Field::zeros(grid);
    let mut y = Field::zeros(grid);
    for i in 0..grid.nx {
        let series = TimeSignal::new(grid.dt(), u.series(i));
        let mw = conv_time_exp(p.beta_eps(), &series);
        let my = conv_time_exp(p.delta_d(), &series);
        for k in 0..grid.nt {
            let t = grid.t(k);
            let ew = (-p.beta_eps() * t).exp();
            let ey = (-p.delta_d() * t).exp();
            w.set(
                i,
                k,
                data.w0[i] * ew + p.c / p.beta * (1.0 - ew) + p.eps * mw.values[k],
            );
            y.set(
                i,
                k,
                data.y0[i] * ey + p.h / p.d * (1.0 - ey) - p.delta * my.values[k],
            );
        }
    }
    (w, y)
}

/// The three fields reassembled from the expanded convolution form.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub u: Field,
    pub w: Field,
    pub y: Field,
}

fn add_scaled(acc: &mut Field, f: &Field, scale: f64) {
    for (a, b) in acc.values.iter_mut().zip(&f.values) {
        *a += scale * b;
    }
}

/// Reassembles `u` from its expanded convolution form
///
/// `H ⋄ u0 + K_delta ⋄ (y0 - w0) + H ⊗ phi(u) + (eps beta - delta d) H_delta ⋄ w0
///  + (c/beta)(delta d - eps beta) H_delta ⋄ 1 + (h/d - c/beta) H ⊗ 1 + (c/beta - h/d) K_delta ⋄ 1`,
///
/// and `w`, `y` from `K_eps = K_delta + (delta d - eps beta) H_delta` and
/// `K_delta` applied to `u0` and to the full source `F(u)`.
pub fn explicit_representation(
    data: &InitialData,
    grid: &Grid,
    p: &ModelParams,
    table: &KernelTable,
    u: &Field,
) -> Result<Representation> {
    check_data(data, grid)?;
    if table.grid != *grid || u.grid != *grid {
        return Err(Error::Shape("fields and kernel table live on different grids".into()));
    }
    let gap = p.delta_d() - p.beta_eps();
    let offset = p.forcing_offset();
    let ones = vec![1.0; grid.nx];
    let diff: Vec<f64> = data.y0.iter().zip(&data.w0).map(|(y, w)| y - w).collect();
    let h_eng = SpectralKernel::new(table, KernelKind::H);
    let kd_eng = SpectralKernel::new(table, KernelKind::KDelta);
    let hd_eng = SpectralKernel::new(table, KernelKind::HDelta);

    let mut ru = conv_space_table(table, KernelKind::H, &data.u0)?;
    add_scaled(&mut ru, &conv_space_table(table, KernelKind::KDelta, &diff)?, 1.0);
    let mut phi_field = Field::zeros(*grid);
    for (v, x) in phi_field.values.iter_mut().zip(&u.values) {
        *v = phi(*x, p);
    }
    add_scaled(&mut ru, &h_eng.apply(&phi_field)?, 1.0);
    let hd_w0 = conv_space_table(table, KernelKind::HDelta, &data.w0)?;
    add_scaled(&mut ru, &hd_w0, -gap);
    let hd_one = conv_space_table(table, KernelKind::HDelta, &ones)?;
    add_scaled(&mut ru, &hd_one, p.c / p.beta * gap);
    let one_field = Field::from_fn(*grid, |_, _| 1.0);
    add_scaled(&mut ru, &h_eng.apply(&one_field)?, offset);
    let kd_one = conv_space_table(table, KernelKind::KDelta, &ones)?;
    add_scaled(&mut ru, &kd_one, -offset);

    let source = source_field(u, data, p);
    let kd_u0 = conv_space_table(table, KernelKind::KDelta, &data.u0)?;
    let hd_u0 = conv_space_table(table, KernelKind::HDelta, &data.u0)?;
    let kd_f = kd_eng.apply(&source)?;
    let hd_f = hd_eng.apply(&source)?;

    let mut rw = Field::zeros(*grid);
    let mut ry = Field::zeros(*grid);
    for k in 0..grid.nt {
        let t = grid.t(k);
        let ew = (-p.beta_eps() * t).exp();
        let ey = (-p.delta_d() * t).exp();
        for i in 0..grid.nx {
            let keps = kd_u0.get(i, k) + gap * hd_u0.get(i, k) + kd_f.get(i, k) + gap * hd_f.get(i, k);
            let kdel = kd_u0.get(i, k) + kd_f.get(i, k);
            rw.set(i, k, data.w0[i] * ew + p.c / p.beta * (1.0 - ew) + p.eps * keps);
            ry.set(i, k, data.y0[i] * ey + p.h / p.d * (1.0 - ey) - p.delta * kdel);
        }
    }
    Ok(Representation {
        u: ru,
        w: rw,
        y: ry,
    })
}

#[doc(hidden)]
pub use explicit_representation as representation_318;

/// Time stepping of the finite-difference solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FdmOptions {
    /// RK4 substeps per output interval; chosen from the stability limit
    /// when absent.
    pub substeps: Option<usize>,
}

/// Safety factor applied to the explicit diffusion limit `dx^2 / (2 D)`.
pub const CFL_SAFETY: f64 = 0.9;

/// Values of `|u|` beyond which the explicit solver reports blow-up.
pub const BLOW_UP: f64 = 1e3;

fn fdm_rhs(state: &[f64], out: &mut [f64], nx: usize, inv_dx2: f64, p: &ModelParams) {
    let (u, rest) = state.split_at(nx);
    let (w, y) = rest.split_at(nx);
    let (du, rest) = out.split_at_mut(nx);
    let (dw, dy) = rest.split_at_mut(nx);
    for i in 0..nx {
        // zero flux through ghost points u_{-1} = u_1, u_{nx} = u_{nx-2}
        let left = if i == 0 { u[1] } else { u[i - 1] };
        let right = if i == nx - 1 { u[nx - 2] } else { u[i + 1] };
        let lap = (left - 2.0 * u[i] + right) * inv_dx2;
        du[i] = p.diffusion * lap - w[i] + y[i] + reaction(u[i], p);
        dw[i] = p.eps * (-p.beta * w[i] + p.c + u[i]);
        dy[i] = p.delta * (-u[i] + p.h - p.d * y[i]);
    }
}

/// Method of lines for the full system with zero-flux ends, central
/// differences in space and classical RK4 in time.
pub fn fdm_solve(
    data: &InitialData,
    grid: &Grid,
    p: &ModelParams,
    opts: &FdmOptions,
) -> Result<SolutionField> {
    grid.validate()?;
    check_data(data, grid)?;
    let nx = grid.nx;
    let dx = grid.dx();
    let dt = grid.dt();
    let limit = CFL_SAFETY * dx * dx / (2.0 * p.diffusion);
    let substeps = match opts.substeps {
        Some(0) => {
            return Err(Error::Configuration("substeps must be at least 1".into()));
        }
        Some(n) => n,
        None => (dt / limit).ceil().max(1.0) as usize,
    };
    let h = dt / substeps as f64;
    if h > limit {
        return Err(Error::Configuration(format!(
            "time step {h:e} exceeds the stability limit {limit:e}; use at least {} substeps",
            (dt / limit).ceil()
        )));
    }
    let inv_dx2 = 1.0 / (dx * dx);
    let mut state: Vec<f64> = data
        .u0
        .iter()
        .chain(&data.w0)
        .chain(&data.y0)
        .copied()
        .collect();
    let n = state.len();
    let mut u = Field::zeros(*grid);
    let mut w = Field::zeros(*grid);
    let mut y = Field::zeros(*grid);
    let store = |k: usize, s: &[f64], u: &mut Field, w: &mut Field, y: &mut Field| {
        u.slice_mut(k).copy_from_slice(&s[..nx]);
        w.slice_mut(k).copy_from_slice(&s[nx..2 * nx]);
        y.slice_mut(k).copy_from_slice(&s[2 * nx..]);
    };
    store(0, &state, &mut u, &mut w, &mut y);
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for k in 1..grid.nt {
        for _ in 0..substeps {
            fdm_rhs(&state, &mut k1, nx, inv_dx2, p);
            for j in 0..n {
                tmp[j] = state[j] + 0.5 * h * k1[j];
            }
            fdm_rhs(&tmp, &mut k2, nx, inv_dx2, p);
            for j in 0..n {
                tmp[j] = state[j] + 0.5 * h * k2[j];
            }
            fdm_rhs(&tmp, &mut k3, nx, inv_dx2, p);
            for j in 0..n {
                tmp[j] = state[j] + h * k3[j];
            }
            fdm_rhs(&tmp, &mut k4, nx, inv_dx2, p);
            for j in 0..n {
                state[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        if state[..nx].iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP) {
            return Err(Error::Divergence(format!(
                "|u| exceeded {BLOW_UP} by t = {}",
                grid.t(k)
            )));
        }
        store(k, &state, &mut u, &mut w, &mut y);
    }
    let (lo, hi) = range(&u);
    Ok(SolutionField {
        grid: *grid,
        u,
        w,
        y,
        iterations_used: 0,
        final_update_norm: 0.0,
        history: Vec::new(),
        lipschitz_estimate: phi_lipschitz_on(lo, hi, p),
        phi_norm: 1.1 * phi_sup_on(lo, hi, p),
    })
}
