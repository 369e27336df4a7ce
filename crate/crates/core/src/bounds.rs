//! A priori envelopes for the kernels and for the solution, and reports that
//! compare observed norms against them.

use rayon::prelude::*;
use serde::Serialize;

use crate::convolution::kernel_l1;
use crate::error::{Degeneracy, Error, Result};
use crate::kernel::{KernelKind, KernelTable};
use crate::params::{
    bound_constants, env_a, env_b, env_c, env_e, env_g, env_h, env_l, g_scaled, lambda,
    slow_rates_coincide, q_is_delta_d, Constant, ModelParams,
};
use crate::solver::{InitialData, SolutionField};
use crate::specfun::i0_scaled;

fn check_positive_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("bound needs t > 0, got {t}")));
    }
    Ok(())
}

/// `G(x,t) [e^{-at} + t eps A + delta t (1 + eps t/|a - beta eps|) B + (eps t/|a - eps beta|) C]`
/// with `G` the undamped heat kernel. `+inf` when `a = beta eps` and the
/// memory terms are present.
pub fn pointwise_h_bound(x: f64, t: f64, p: &ModelParams) -> Result<f64> {
    check_positive_time(t)?;
    let heat = (-x * x / (4.0 * p.diffusion * t)).exp() / (2.0 * (std::f64::consts::PI * p.diffusion * t).sqrt());
    let gap = (p.a - p.beta_eps()).abs();
    let over_gap = |num: f64| if num == 0.0 { 0.0 } else { num / gap };
    let factor = (-p.a * t).exp()
        + t * p.eps * env_a(t, p)
        + p.delta * t * (1.0 + over_gap(p.eps * t)) * env_b(t, p)
        + over_gap(p.eps * t) * env_c(t, p);
    Ok(heat * factor)
}

/// The two envelopes of `int_R |H(x,t)| dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L1Bounds {
    /// Modified-Bessel form.
    pub bessel_form: f64,
    /// `lambda(t) e^{-q t}`.
    pub exp_form: f64,
}

/// `e^{-(r + s) t / 2} I0((r - s) t / 2)`, evaluated without overflow.
fn damped_i0(r: f64, s: f64, t: f64) -> f64 {
    let z = 0.5 * (r - s) * t;
    (-(0.5 * (r + s) * t - z.abs())).exp() * i0_scaled(z)
}

pub fn l1_h_bounds(t: f64, p: &ModelParams) -> Result<L1Bounds> {
    check_positive_time(t)?;
    let pi = std::f64::consts::PI;
    let (se, sd) = (p.eps.sqrt(), p.delta.sqrt());
    let l = p.decay_rates().l;
    let bessel_form = (-p.a * t).exp()
        + se * pi * t * damped_i0(p.beta_eps(), p.a, t)
        + sd * pi * t * (damped_i0(p.delta_d(), p.a, t) + se * pi * t * damped_i0(p.delta_d(), l, t));
    Ok(L1Bounds {
        bessel_form,
        exp_form: lambda(t, p) * (-p.decay_rates().q * t).exp(),
    })
}

/// Envelopes of the derived kernels at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelBounds {
    /// `int |K_delta| dx <= lambda E`.
    pub b38: Constant,
    /// `int_0^t e^{-delta d tau} int |K_delta(t - tau)| <= t lambda E`.
    pub dccc: Constant,
    /// `int |H_delta| dx <= g`.
    pub bbb38: Constant,
    /// `int_0^t e^{-delta d tau} int |H_delta(t - tau)| <= h`.
    pub bccc: Constant,
    /// `int_0^t e^{-beta eps tau} int |H_delta(t - tau)| <= t lambda [C + L] / |delta d - q|`.
    pub ccc: Constant,
    /// `int_0^t int |H_delta| <= (M + N) / |beta eps - delta d|`.
    pub ddccc: Constant,
}

pub fn kdelta_hdelta_bounds(t: f64, p: &ModelParams) -> Result<KernelBounds> {
    check_positive_time(t)?;
    let lam = lambda(t, p);
    let e = env_e(t, p);
    let coincide = slow_rates_coincide(p);
    let slow = |v: f64| {
        if coincide {
            Constant::Degenerate(Degeneracy::BetaEpsEqualsDeltaD)
        } else {
            Constant::Value(v)
        }
    };
    let ccc = if q_is_delta_d(p) {
        Constant::Degenerate(Degeneracy::DeltaDEqualsQ)
    } else {
        let q = p.decay_rates().q;
        Constant::Value(t * lam * (env_c(t, p) + env_l(t, p)) / (p.delta_d() - q).abs())
    };
    let consts = bound_constants(p);
    let ddccc = match (consts.m, consts.n) {
        (Constant::Degenerate(d), _) | (_, Constant::Degenerate(d)) => Constant::Degenerate(d),
        (Constant::Value(m), Constant::Value(n)) => {
            if coincide {
                Constant::Degenerate(Degeneracy::BetaEpsEqualsDeltaD)
            } else {
                Constant::Value((m + n) / (p.beta_eps() - p.delta_d()).abs())
            }
        }
    };
    Ok(KernelBounds {
        b38: Constant::Value(lam * e),
        dccc: Constant::Value(t * lam * e),
        bbb38: slow(env_g(t, p)),
        bccc: slow(env_h(t, p)),
        ccc,
        ddccc,
    })
}

/// Sup-norms entering the solution envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DataSups {
    pub u0: f64,
    pub w0: f64,
    pub y0: f64,
    pub phi: f64,
}

impl DataSups {
    pub fn new(data: &InitialData, phi: f64) -> Self {
        Self {
            u0: data.u0_sup(),
            w0: data.w0_sup(),
            y0: data.y0_sup(),
            phi,
        }
    }
}

/// Envelopes of `|u|`, `|w|`, `|y|` at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionBounds {
    pub u: f64,
    pub w: Constant,
    pub y: Constant,
}

fn first_degeneracy(list: &[Constant]) -> Option<Degeneracy> {
    list.iter().find_map(|c| match c {
        Constant::Degenerate(d) => Some(*d),
        Constant::Value(_) => None,
    })
}

pub fn solution_bounds(t: f64, p: &ModelParams, sups: &DataSups) -> Result<SolutionBounds> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("bound needs t >= 0, got {t}")));
    }
    if ![sups.u0, sups.w0, sups.y0, sups.phi].iter().all(|v| v.is_finite()) {
        return Err(Error::Data("sup-norms must be finite".into()));
    }
    let consts = bound_constants(p);
    let rates = p.decay_rates();
    let lam = lambda(t, p);
    let e = env_e(t, p);
    let off = p.forcing_offset().abs();
    let cb = p.c / p.beta;
    let gap = (p.delta_d() - p.beta_eps()).abs();
    let u = sups.u0 * lam * (-rates.q * t).exp()
        + (sups.phi + off) * consts.s
        + (sups.y0 + sups.w0 + off) * lam * e
        + (sups.w0 + cb) * g_scaled(t, p);

    let q_gap = if q_is_delta_d(p) {
        Constant::Degenerate(Degeneracy::DeltaDEqualsQ)
    } else {
        Constant::Value((p.delta_d() - rates.q).abs())
    };
    let g = if slow_rates_coincide(p) {
        Constant::Degenerate(Degeneracy::BetaEpsEqualsDeltaD)
    } else {
        Constant::Value(env_g(t, p))
    };
    let w = match first_degeneracy(&[consts.m, consts.n, q_gap, g]) {
        Some(d) => Constant::Degenerate(d),
        None => {
            let (m, n) = (consts.m.value().unwrap(), consts.n.value().unwrap());
            let qg = q_gap.value().unwrap();
            let g = g.value().unwrap();
            Constant::Value(
                sups.w0 * (-p.beta_eps() * t).exp()
                    + cb
                    + p.eps * sups.u0 * lam * e
                    + p.eps * (sups.phi + off) * (2.0 * m + n)
                    + p.eps * gap / qg * (cb + sups.w0) * t * lam * (env_c(t, p) + env_l(t, p))
                    + p.eps * (sups.y0 + sups.w0 + off + gap * sups.u0) * g,
            )
        }
    };
    let h = if slow_rates_coincide(p) {
        Constant::Degenerate(Degeneracy::BetaEpsEqualsDeltaD)
    } else {
        Constant::Value(env_h(t, p))
    };
    let y = match first_degeneracy(&[consts.m, h]) {
        Some(d) => Constant::Degenerate(d),
        None => {
            let m = consts.m.value().unwrap();
            Constant::Value(
                sups.y0 * (-p.delta_d() * t).exp()
                    + p.h / p.d
                    + p.delta * sups.u0 * lam * e
                    + p.delta * (sups.y0 + sups.w0 + off) * t * lam * e
                    + p.delta * (sups.phi + off) * m
                    + gap * (sups.w0 + cb) * h.value().unwrap(),
            )
        }
    };
    Ok(SolutionBounds { u, w, y })
}

/// Whether a report was checked or skipped.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum ReportStatus {
    Checked,
    NotApplicable(String),
}

/// Observed norms against an envelope, one entry per sampled time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub bound_id: String,
    pub times: Vec<f64>,
    pub observed: Vec<f64>,
    pub envelope: Vec<f64>,
    pub margin: Vec<f64>,
    pub pass: bool,
    pub status: ReportStatus,
}

/// Tolerated shortfall `1e-7 + 1e-4 envelope`.
pub fn slack(envelope: f64) -> f64 {
    1e-7 + 1e-4 * envelope.abs()
}

impl BoundReport {
    pub fn new(id: &str, times: Vec<f64>, observed: Vec<f64>, envelope: Vec<f64>) -> Self {
        let margin: Vec<f64> = envelope.iter().zip(&observed).map(|(e, o)| e - o).collect();
        let pass = margin
            .iter()
            .zip(&envelope)
            .all(|(m, e)| *m >= -slack(*e) || (e.is_infinite() && *e > 0.0));
        Self {
            bound_id: id.to_string(),
            times,
            observed,
            envelope,
            margin,
            pass,
            status: ReportStatus::Checked,
        }
    }

    pub fn not_applicable(id: &str, reason: String) -> Self {
        Self {
            bound_id: id.to_string(),
            times: Vec::new(),
            observed: Vec::new(),
            envelope: Vec::new(),
            margin: Vec::new(),
            pass: false,
            status: ReportStatus::NotApplicable(reason),
        }
    }

    pub fn is_skipped(&self) -> bool {
        matches!(self.status, ReportStatus::NotApplicable(_))
    }

    /// Passed, or skipped because the envelope is undefined.
    pub fn acceptable(&self) -> bool {
        self.pass || self.is_skipped()
    }

    /// Time and margin of the smallest margin relative to its slack.
    pub fn worst(&self) -> Option<(f64, f64)> {
        self.margin
            .iter()
            .zip(&self.envelope)
            .zip(&self.times)
            .map(|((m, e), t)| (m + slack(*e), *t, *m))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, t, m)| (t, m))
    }
}

fn envelope_series(
    id: &str,
    times: &[f64],
    observed: Vec<f64>,
    f: impl Fn(f64) -> Result<Constant>,
) -> Result<BoundReport> {
    let mut env = Vec::with_capacity(times.len());
    for &t in times {
        match f(t)? {
            Constant::Value(v) => env.push(v),
            Constant::Degenerate(d) => {
                return Ok(BoundReport::not_applicable(id, format!("degenerate rates: {d}")));
            }
        }
    }
    Ok(BoundReport::new(id, times.to_vec(), observed, env))
}

/// Stable identifiers of the reports produced by [`check_run`], in order.
pub const REPORT_IDS: [&str; 11] = [
    "u_sup",
    "w_sup",
    "y_sup",
    "h_l1_exp",
    "h_l1_bessel",
    "kdelta_l1",
    "hdelta_l1",
    "h_time_integral",
    "kdelta_time_integral",
    "hdelta_time_integral",
    "kdelta_weighted_time_integral",
];

/// Running maximum of `int_0^{t_k} n(tau) dtau` by the trapezoid rule, with
/// `n(0) = n0`.
fn running_integral(norms: &[f64], n0: f64, dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(norms.len());
    let mut acc = 0.0;
    let mut prev = n0;
    let mut best = 0.0_f64;
    for &n in norms {
        acc += 0.5 * dt * (prev + n);
        prev = n;
        best = best.max(acc);
        out.push(best);
    }
    out
}

/// Checks a solution and the kernel table it was computed with against
/// every applicable envelope. Reports whose envelope is undefined for `p`
/// are returned as not applicable.
///
/// The `L1` norms of `H` and `K_delta` are taken by adaptive spatial
/// quadrature at every grid time (`K_delta` has a corner at `x = 0` that a
/// trapezoid sum over the table would overestimate); the norms of
/// `H_delta` are read off the table.
pub fn check_run(
    sol: &SolutionField,
    table: &KernelTable,
    p: &ModelParams,
    data: &InitialData,
) -> Result<Vec<BoundReport>> {
    let grid = sol.grid;
    if table.grid.nt != grid.nt || table.grid.t_max != grid.t_max {
        return Err(Error::Shape("kernel table and solution use different time grids".into()));
    }
    let sups = DataSups::new(data, sol.phi_norm);
    let all_times = grid.ts();
    let mut reports = Vec::new();

    let sol_bounds: Vec<SolutionBounds> = all_times
        .iter()
        .map(|&t| solution_bounds(t, p, &sups))
        .collect::<Result<_>>()?;
    let slice_sups = |f: &crate::grid::Field| (0..grid.nt).map(|k| f.slice_sup(k)).collect::<Vec<_>>();
    reports.push(BoundReport::new(
        REPORT_IDS[0],
        all_times.clone(),
        slice_sups(&sol.u),
        sol_bounds.iter().map(|b| b.u).collect(),
    ));
    reports.push(envelope_series(REPORT_IDS[1], &all_times, slice_sups(&sol.w), |t| {
        Ok(solution_bounds(t, p, &sups)?.w)
    })?);
    reports.push(envelope_series(REPORT_IDS[2], &all_times, slice_sups(&sol.y), |t| {
        Ok(solution_bounds(t, p, &sups)?.y)
    })?);

    let times: Vec<f64> = all_times[1..].to_vec();
    let quadrature_l1 = |kind| -> Result<Vec<f64>> {
        times.par_iter().map(|&t| kernel_l1(kind, t, p, &table.quad)).collect()
    };
    let h_l1 = quadrature_l1(KernelKind::H)?;
    let kd_l1 = quadrature_l1(KernelKind::KDelta)?;
    let hd_l1: Vec<f64> = (1..grid.nt).map(|k| table.l1_norm(KernelKind::HDelta, k)).collect();
    let l1b: Vec<L1Bounds> = times.iter().map(|&t| l1_h_bounds(t, p)).collect::<Result<_>>()?;
    reports.push(BoundReport::new(
        REPORT_IDS[3],
        times.clone(),
        h_l1.clone(),
        l1b.iter().map(|b| b.exp_form).collect(),
    ));
    reports.push(BoundReport::new(
        REPORT_IDS[4],
        times.clone(),
        h_l1.clone(),
        l1b.iter().map(|b| b.bessel_form).collect(),
    ));
    reports.push(envelope_series(REPORT_IDS[5], &times, kd_l1.clone(), |t| {
        Ok(kdelta_hdelta_bounds(t, p)?.b38)
    })?);
    reports.push(envelope_series(REPORT_IDS[6], &times, hd_l1.clone(), |t| {
        Ok(kdelta_hdelta_bounds(t, p)?.bbb38)
    })?);

    let dt = grid.dt();
    let consts = bound_constants(p);
    let h_int = running_integral(&h_l1, 1.0, dt);
    reports.push(BoundReport::new(REPORT_IDS[7], times.clone(), h_int, vec![consts.s; times.len()]));
    let kd_int = running_integral(&kd_l1, 0.0, dt);
    reports.push(envelope_series(REPORT_IDS[8], &times, kd_int, |_| Ok(consts.m))?);
    let hd_int = running_integral(&hd_l1, 0.0, dt);
    reports.push(envelope_series(REPORT_IDS[9], &times, hd_int, |t| {
        Ok(kdelta_hdelta_bounds(t, p)?.ddccc)
    })?);
    // int_0^t e^{-delta d tau} int |K_delta(t - tau)| dtau, trapezoid in tau
    let weighted: Vec<f64> = (1..grid.nt)
        .map(|k| {
            let norm = |j: usize| if j == 0 { 0.0 } else { kd_l1[j - 1] };
            let mut acc = 0.5 * norm(k);
            for j in 1..k {
                acc += (-p.delta_d() * grid.t(j)).exp() * norm(k - j);
            }
            dt * acc
        })
        .collect();
    reports.push(envelope_series(REPORT_IDS[10], &times, weighted, |t| {
        Ok(kdelta_hdelta_bounds(t, p)?.dccc)
    })?);
    Ok(reports)
}
