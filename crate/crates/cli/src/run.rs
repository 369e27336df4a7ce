use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::anyhow;
use chrono::{SecondsFormat, Utc};
use fhr_core::bounds::{check_run, REPORT_IDS};
use fhr_core::kernel::build_kernel_table;
use fhr_core::params::bound_constants;
use fhr_core::solver::{fdm_solve, picard_solve};
use fhr_core::{BoundReport, Constant, Field, Grid, InitialData, SolutionField};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{parse_str, RunConfig, Strictness};
use crate::Failure;

pub const FIELDS: &str = "fields.csv";
pub const FIELDS_FDM: &str = "fields_fdm.csv";
pub const DIAGNOSTICS: &str = "diagnostics.csv";
pub const ROUTE_DIFF: &str = "route_diff.csv";
pub const MANIFEST: &str = "manifest.json";
const LOCK: &str = ".lock";

/// Exclusive marker on a run directory, removed on drop.
struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self, Failure> {
        let path = dir.join(LOCK);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| Failure::Input(anyhow!("cannot lock {} ({e}); is another run using it?", dir.display())))?;
        Ok(Self(path))
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DerivedConstant {
    Value(f64),
    Degenerate(String),
}

impl From<Constant> for DerivedConstant {
    fn from(c: Constant) -> Self {
        match c {
            Constant::Value(v) => DerivedConstant::Value(v),
            Constant::Degenerate(d) => DerivedConstant::Degenerate(d.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub l: f64,
    pub q: f64,
    pub s: f64,
    pub m: DerivedConstant,
    pub n: DerivedConstant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub status: String,
    pub iterations: usize,
    pub final_update_norm: f64,
    /// `max |phi'|` over the range of `u`, the Lipschitz constant `W_F`.
    pub lipschitz_estimate: Option<f64>,
    /// `W_F S`, the contraction factor the update norms should follow.
    pub contraction_estimate: Option<f64>,
    /// `sup |phi|` bound stored for the envelope check.
    pub phi_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub label: String,
    /// Whether the model constants are the invented demonstration defaults.
    pub demo_parameters: bool,
    pub config: String,
    pub derived: Derived,
    pub convergence: Convergence,
    pub route_max_diff: Option<[f64; 3]>,
    /// SHA-256 of each emitted file.
    pub checksums: BTreeMap<String, String>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Input(anyhow!("{}: {e}", path.display()))
}

fn write_fields(path: &Path, grid: &Grid, u: &Field, w: &Field, y: &Field) -> Result<(), Failure> {
    let file = File::create(path).map_err(io(path))?;
    let mut out = BufWriter::new(file);
    let mut text = String::from("x,t,u,w,y\n");
    for k in 0..grid.nt {
        let t = grid.t(k);
        for i in 0..grid.nx {
            let _ = writeln!(
                text,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                grid.x(i),
                t,
                u.get(i, k),
                w.get(i, k),
                y.get(i, k)
            );
        }
        if text.len() > 1 << 20 {
            out.write_all(text.as_bytes()).map_err(io(path))?;
            text.clear();
        }
    }
    out.write_all(text.as_bytes()).map_err(io(path))?;
    out.flush().map_err(io(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(io(path))
}

fn diagnostics_csv(history: &[f64]) -> String {
    let mut s = String::from("iteration,update_norm\n");
    for (i, v) in history.iter().enumerate() {
        let _ = writeln!(s, "{},{:.16e}", i + 1, v);
    }
    s
}

fn sha256(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(io(path))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn derived(config: &RunConfig) -> Derived {
    let rates = config.params.decay_rates();
    let consts = bound_constants(&config.params);
    Derived {
        l: rates.l,
        q: rates.q,
        s: consts.s,
        m: consts.m.into(),
        n: consts.n.into(),
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn progress(verbose: bool, clock: &Instant, what: &str) {
    if verbose {
        eprintln!("[{:>8.2} s] {what}", clock.elapsed().as_secs_f64());
    }
}

pub fn solve(config: &RunConfig, dir: &Path, verbose: bool) -> Result<(), Failure> {
    let clock = Instant::now();
    let started = now();
    fs::create_dir_all(dir).map_err(io(dir))?;
    let _lock = DirLock::acquire(dir)?;
    if dir.join(MANIFEST).exists() {
        return Err(Failure::Input(anyhow!(
            "{} already holds a finished run; choose another --out",
            dir.display()
        )));
    }
    let grid = config.grid;
    let p = &config.params;
    let data = InitialData::from_profiles(&grid, config.initial.u0, config.initial.w0, config.initial.y0)?;
    let table = build_kernel_table(&grid, p, &config.quad)?;
    progress(verbose, &clock, "kernel table built");

    let mut emitted = vec![DIAGNOSTICS];
    let outcome = picard_solve(&data, &grid, p, &table, &config.picard);
    progress(verbose, &clock, "fixed-point iteration finished");
    let derived = derived(config);
    let (history, convergence, sol) = match outcome {
        Ok(sol) => {
            let conv = Convergence {
                status: "converged".into(),
                iterations: sol.iterations_used,
                final_update_norm: sol.final_update_norm,
                lipschitz_estimate: Some(sol.lipschitz_estimate),
                contraction_estimate: Some(sol.lipschitz_estimate * derived.s),
                phi_norm: Some(sol.phi_norm),
            };
            (sol.history.clone(), conv, Some(sol))
        }
        Err(fhr_core::Error::NonConvergence { history }) => {
            let conv = Convergence {
                status: "non_convergence".into(),
                iterations: history.len(),
                final_update_norm: history.last().copied().unwrap_or(f64::NAN),
                lipschitz_estimate: None,
                contraction_estimate: None,
                phi_norm: None,
            };
            (history, conv, None)
        }
        Err(e) => return Err(e.into()),
    };
    write_text(&dir.join(DIAGNOSTICS), &diagnostics_csv(&history))?;

    let mut route_max_diff = None;
    if let Some(sol) = &sol {
        write_fields(&dir.join(FIELDS), &grid, &sol.u, &sol.w, &sol.y)?;
        emitted.push(FIELDS);
        if config.oracle {
            let fdm = fdm_solve(&data, &grid, p, &config.fdm)?;
            progress(verbose, &clock, "finite-difference oracle finished");
            write_fields(&dir.join(FIELDS_FDM), &grid, &fdm.u, &fdm.w, &fdm.y)?;
            let mut text = String::from("t,u,w,y\n");
            let mut worst = [0.0_f64; 3];
            for k in 0..grid.nt {
                let diff = |a: &Field, b: &Field| {
                    a.slice(k).iter().zip(b.slice(k)).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
                };
                let row = [diff(&sol.u, &fdm.u), diff(&sol.w, &fdm.w), diff(&sol.y, &fdm.y)];
                for (w, r) in worst.iter_mut().zip(row) {
                    *w = w.max(r);
                }
                let _ = writeln!(text, "{:.16e},{:.16e},{:.16e},{:.16e}", grid.t(k), row[0], row[1], row[2]);
            }
            write_text(&dir.join(ROUTE_DIFF), &text)?;
            emitted.extend([FIELDS_FDM, ROUTE_DIFF]);
            println!("route sup-difference picard vs fdm: u {:.3e}, w {:.3e}, y {:.3e}", worst[0], worst[1], worst[2]);
            route_max_diff = Some(worst);
        }
    }

    let mut checksums = BTreeMap::new();
    for name in emitted {
        checksums.insert(name.to_string(), sha256(&dir.join(name))?);
    }
    let manifest = Manifest {
        tool: "fhr".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        started,
        finished: now(),
        label: config.seed_label.clone(),
        demo_parameters: config.uses_demo_params(),
        config: config.emit(),
        derived,
        convergence,
        route_max_diff,
        checksums,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&dir.join(MANIFEST), &(json + "\n"))?;
    progress(verbose, &clock, "manifest written");

    match sol {
        Some(sol) => {
            println!(
                "converged in {} iterations (last update {:.3e}); wrote {}",
                sol.iterations_used,
                sol.final_update_norm,
                dir.display()
            );
            Ok(())
        }
        None => Err(Failure::NonConvergence(format!(
            "no convergence in {} iterations (last update {:.3e}); diagnostics in {}",
            history.len(),
            manifest.convergence.final_update_norm,
            dir.display()
        ))),
    }
}

fn corrupt(path: &Path, what: impl std::fmt::Display) -> Failure {
    Failure::Input(anyhow!("{}: {what}", path.display()))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, Failure> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    serde_json::from_str(&text).map_err(|e| corrupt(&path, e))
}

/// `(u, w, y)` from a fields file laid out on `grid`.
pub fn read_fields(path: &Path, grid: &Grid) -> Result<[Field; 3], Failure> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    let mut lines = text.lines();
    if lines.next() != Some("x,t,u,w,y") {
        return Err(corrupt(path, "missing header `x,t,u,w,y`"));
    }
    let mut fields = [Field::zeros(*grid), Field::zeros(*grid), Field::zeros(*grid)];
    let mut n = 0;
    for (row, line) in lines.enumerate() {
        let (i, k) = (row % grid.nx, row / grid.nx);
        if k >= grid.nt {
            return Err(corrupt(path, "more rows than the grid holds"));
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| corrupt(path, format_args!("line {}: {e}", row + 2)))?;
        if vals.len() != 5 {
            return Err(corrupt(path, format_args!("line {}: expected 5 columns", row + 2)));
        }
        let scale = grid.x_max.abs().max(grid.x_min.abs()).max(grid.t_max);
        if (vals[0] - grid.x(i)).abs() > 1e-9 * scale || (vals[1] - grid.t(k)).abs() > 1e-9 * scale {
            return Err(corrupt(path, format_args!("line {}: (x, t) off the configured grid", row + 2)));
        }
        for (f, v) in fields.iter_mut().zip(&vals[2..]) {
            f.set(i, k, *v);
        }
        n += 1;
    }
    if n != grid.nx * grid.nt {
        return Err(corrupt(path, format_args!("{n} rows, expected {}", grid.nx * grid.nt)));
    }
    Ok(fields)
}

fn report_csv(reports: &[&BoundReport]) -> String {
    let mut s = String::from("t,observed,envelope,margin,pass\n");
    let Some(first) = reports.first() else {
        return s;
    };
    for j in 0..first.times.len() {
        // the tightest of the given reports at each time
        let r = reports
            .iter()
            .filter(|r| !r.is_skipped())
            .min_by(|a, b| a.margin[j].total_cmp(&b.margin[j]));
        if let Some(r) = r {
            let pass = reports.iter().filter(|r| !r.is_skipped()).all(|r| r.margin[j] >= -fhr_core::bounds::slack(r.envelope[j]));
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.times[j], r.observed[j], r.envelope[j], r.margin[j], pass
            );
        }
    }
    s
}

pub fn bounds(dir: &Path, verbose: bool) -> Result<(), Failure> {
    let clock = Instant::now();
    let manifest = read_manifest(dir)?;
    let config = parse_str(&manifest.config).map_err(|e| corrupt(&dir.join(MANIFEST), e))?;
    config
        .validate(Strictness::Full)
        .map_err(|e| corrupt(&dir.join(MANIFEST), e))?;
    let phi_norm = manifest
        .convergence
        .phi_norm
        .ok_or_else(|| corrupt(&dir.join(MANIFEST), "run did not converge; nothing to check"))?;
    let fields_path = dir.join(FIELDS);
    match (manifest.checksums.get(FIELDS), sha256(&fields_path)) {
        (Some(expected), Ok(actual)) if *expected != actual => {
            eprintln!("warning: {} does not match its manifest checksum", fields_path.display());
        }
        (_, Err(e)) => return Err(e),
        _ => {}
    }
    let _lock = DirLock::acquire(dir)?;
    let grid = config.grid;
    let [u, w, y] = read_fields(&fields_path, &grid)?;
    let data = InitialData::from_profiles(&grid, config.initial.u0, config.initial.w0, config.initial.y0)?;
    let table = build_kernel_table(&grid, &config.params, &config.quad)?;
    progress(verbose, &clock, "kernel table rebuilt");
    let sol = SolutionField {
        grid,
        u,
        w,
        y,
        iterations_used: manifest.convergence.iterations,
        final_update_norm: manifest.convergence.final_update_norm,
        history: Vec::new(),
        lipschitz_estimate: manifest.convergence.lipschitz_estimate.unwrap_or(f64::NAN),
        phi_norm,
    };
    let reports = check_run(&sol, &table, &config.params, &data)?;
    progress(verbose, &clock, "envelopes checked");

    let by_id = |id: &str| reports.iter().find(|r| r.bound_id == id).expect("check_run emits every id");
    for (file, id) in [("bounds_u.csv", "u_sup"), ("bounds_w.csv", "w_sup"), ("bounds_y.csv", "y_sup")] {
        write_text(&dir.join(file), &report_csv(&[by_id(id)]))?;
    }
    let kernel_reports: Vec<&BoundReport> = REPORT_IDS[3..].iter().map(|id| by_id(id)).collect();
    // kernel reports live on the times t > 0 and share them
    write_text(&dir.join("bounds_kernels.csv"), &report_csv(&kernel_reports))?;
    for r in &kernel_reports {
        write_text(&dir.join(format!("bounds_kernel_{}.csv", r.bound_id)), &report_csv(&[*r]))?;
    }

    let mut failed = Vec::new();
    let mut skipped = Vec::new();
    for r in &reports {
        if r.is_skipped() {
            skipped.push(r.bound_id.as_str());
        } else if !r.pass {
            failed.push(r.bound_id.as_str());
        }
        if verbose {
            match r.worst() {
                Some((t, m)) => eprintln!("{:<30} pass={} worst margin {m:.3e} at t = {t}", r.bound_id, r.pass),
                None => eprintln!("{:<30} skipped", r.bound_id),
            }
        }
    }
    let checked = reports.len() - skipped.len();
    let summary = format!(
        "bounds: {} of {checked} checked reports pass, {} skipped as degenerate{}",
        checked - failed.len(),
        skipped.len(),
        if failed.is_empty() { String::new() } else { format!("; failing: {}", failed.join(", ")) }
    );
    if failed.is_empty() {
        println!("{summary}");
        Ok(())
    } else {
        Err(Failure::Verification(summary))
    }
}

/// Loads a configuration, falling back to the documented defaults.
pub fn load_config(path: Option<&Path>, strictness: Strictness) -> Result<RunConfig, Failure> {
    let config = match path {
        Some(p) => crate::config::parse_config(p, strictness)?,
        None => {
            let c = RunConfig::default();
            c.validate(strictness)?;
            c
        }
    };
    Ok(config)
}

pub fn context_dir(config: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.clone())
}

