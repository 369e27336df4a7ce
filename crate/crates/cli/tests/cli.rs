use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TIGHT: &str = "\
[model]
a = 0.5
D = 1
eps = 1
beta = 1.5
delta = 1
d = 1
c = 0.3
h = 0.2
";

const SMALL_GRID: &str = "\
[grid]
x_min = -10
x_max = 10
nx = 81
t_max = 1
nt = 41
";

fn fhr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fhr"))
        .args(args)
        .env("FHR_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn solve(config: &Path, out: &Path) -> Output {
    fhr(&["solve", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn bounds(run: &Path) -> Output {
    fhr(&["bounds", run.to_str().unwrap()])
}

/// `(x, t, u, w, y)` rows of a fields file.
fn read_rows(path: &Path) -> Vec<[f64; 5]> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,t,u,w,y"));
    lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            [v[0], v[1], v[2], v[3], v[4]]
        })
        .collect()
}

fn value_after(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .and_then(|rest| rest.trim().trim_start_matches('=').trim().parse().ok())
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

#[test]
fn memoryless_kernel_is_damped_heat_kernel() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "m.ini", "[model]\na = 1\nD = 1\neps = 0\ndelta = 0\n");
    let out = fhr(&["kernel", "--config", cfg.to_str().unwrap(), "--x", "0", "--t", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let h = value_after(&stdout(&out), "H ");
    let exact = (-1.0_f64).exp() / (2.0 * std::f64::consts::PI.sqrt());
    assert!((h - exact).abs() < 1e-12, "{h} vs {exact}");
}

#[test]
fn kernel_rejects_nonpositive_time() {
    let out = fhr(&["kernel", "--x", "0", "--t", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("t > 0"), "{}", stderr(&out));
}

#[test]
fn kernel_value_sits_inside_its_bound() {
    let out = fhr(&["kernel", "--x", "0.5", "--t", "0.5"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let h = value_after(&text, "H ");
    let bound = value_after(&text, "bound");
    assert!(h.abs() <= bound, "{text}");
    assert!(value_after(&text, "margin") >= 0.0);
}

#[test]
fn bessel_suite_passes() {
    let out = fhr(&["verify", "bessel"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn laplace_suite_with_weak_slow_memory_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "l.ini", "[model]\ndelta = 1e-12\n");
    let out = fhr(&["verify", "laplace", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
}

#[test]
fn laplace_suite_on_demo_names_worst_case() {
    // The closed form and the numerically transformed kernel disagree at the
    // demonstration constants; the failure must point at the largest residual.
    let out = fhr(&["verify", "laplace"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("worst x = "), "{err}");
}

#[test]
fn identities_hold_when_slow_rates_coincide() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "i.ini",
        "[model]\neps = 0.05\nbeta = 0.8\n[grid]\nx_min = -8\nx_max = 8\nnx = 81\nt_max = 1\nnt = 101\n",
    );
    let out = fhr(&["verify", "identities", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("collapses"));
}

#[test]
fn zero_data_gives_zero_solution() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "z.ini",
        &format!("[model]\nc = 0\nh = 0\n{SMALL_GRID}[initial]\nu0 = zero\nw0 = zero\ny0 = zero\n"),
    );
    let run = tmp.path().join("run");
    let out = solve(&cfg, &run);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = read_rows(&run.join("fields.csv"));
    assert_eq!(rows.len(), 81 * 41);
    assert!(rows.iter().all(|r| r[2] == 0.0 && r[3] == 0.0 && r[4] == 0.0));

    let b = bounds(&run);
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
}

#[test]
fn solve_writes_checksummed_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.ini", &format!("{TIGHT}{SMALL_GRID}"));
    let run = tmp.path().join("run");
    let out = solve(&cfg, &run);
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["fields.csv", "diagnostics.csv", "manifest.json"] {
        assert!(run.join(name).is_file(), "missing {name}");
    }
    assert!(!run.join("fields_fdm.csv").exists());
    assert!(!run.join(".lock").exists());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["convergence"]["status"], "converged");
    let recorded = manifest["checksums"]["fields.csv"].as_str().unwrap();
    let digest = sha2_hex(&fs::read(run.join("fields.csv")).unwrap());
    assert_eq!(recorded, digest);
}

fn sha2_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn oracle_route_agrees() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "o.ini", &format!("{SMALL_GRID}[solver]\noracle = true\n"));
    let run = tmp.path().join("run");
    let out = solve(&cfg, &run);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(run.join("route_diff.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,u,w,y"));
    let mut worst = 0.0_f64;
    for l in lines {
        for v in l.split(',').skip(1) {
            worst = worst.max(v.parse::<f64>().unwrap());
        }
    }
    assert!(worst <= 5e-3, "{worst}");
    assert_eq!(read_rows(&run.join("fields_fdm.csv")).len(), 81 * 41);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "d.ini", &format!("{TIGHT}{SMALL_GRID}"));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(solve(&cfg, &a).status.success());
    assert!(solve(&cfg, &b).status.success());
    assert_eq!(fs::read(a.join("fields.csv")).unwrap(), fs::read(b.join("fields.csv")).unwrap());
}

#[test]
fn non_convergence_exits_three_with_diagnostics() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "n.ini",
        &format!("{SMALL_GRID}[solver]\nmax_iter = 1\ntol = 1e-14\n"),
    );
    let run = tmp.path().join("run");
    let out = solve(&cfg, &run);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let diag = fs::read_to_string(run.join("diagnostics.csv")).unwrap();
    assert!(diag.lines().count() >= 2);
    assert!(!run.join("fields.csv").exists());
}

#[test]
fn tight_run_passes_bounds_and_corruption_is_caught() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.ini", &format!("{TIGHT}{SMALL_GRID}"));
    let run = tmp.path().join("run");
    assert!(solve(&cfg, &run).status.success());

    let ok = bounds(&run);
    assert_eq!(ok.status.code(), Some(0), "{}{}", stdout(&ok), stderr(&ok));
    for name in ["bounds_u.csv", "bounds_w.csv", "bounds_y.csv", "bounds_kernels.csv"] {
        let text = fs::read_to_string(run.join(name)).unwrap();
        assert!(text.starts_with("t,observed,envelope,margin,pass"), "{name}");
    }

    let path = run.join("fields.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let mut scaled = format!("{}\n", lines.next().unwrap());
    for l in lines {
        let mut cols: Vec<String> = l.split(',').map(str::to_string).collect();
        let u: f64 = cols[2].parse().unwrap();
        cols[2] = format!("{:.16e}", u * 100.0);
        scaled.push_str(&cols.join(","));
        scaled.push('\n');
    }
    fs::write(&path, scaled).unwrap();
    let bad = bounds(&run);
    assert_eq!(bad.status.code(), Some(1));
    let err = stderr(&bad);
    assert!(err.contains("u_sup"), "{err}");
    assert!(!err.contains("w_sup") && !err.contains("y_sup"), "{err}");
}

#[test]
fn bounds_on_incomplete_run_is_input_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.ini", &format!("{TIGHT}{SMALL_GRID}"));
    let run = tmp.path().join("run");
    assert!(solve(&cfg, &run).status.success());
    fs::remove_file(run.join("fields.csv")).unwrap();
    assert_eq!(bounds(&run).status.code(), Some(2));
    assert_eq!(bounds(&tmp.path().join("nowhere")).status.code(), Some(2));
}

#[test]
fn config_errors_are_reported_by_line() {
    let tmp = TempDir::new().unwrap();
    let dup = write_config(tmp.path(), "dup.ini", "[model]\na = 0.5\nD = 1\na = 0.4\n");
    let out = solve(&dup, &tmp.path().join("r1"));
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 4") && err.contains("line 2"), "{err}");

    let bad = write_config(tmp.path(), "bad.ini", "[model]\na = 1.5\n");
    let out = solve(&bad, &tmp.path().join("r2"));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("a"));
}

#[test]
fn lock_blocks_concurrent_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.ini", &format!("{TIGHT}{SMALL_GRID}"));
    let run = tmp.path().join("run");
    fs::create_dir_all(&run).unwrap();
    fs::write(run.join(".lock"), "").unwrap();
    let out = solve(&cfg, &run);
    assert_eq!(out.status.code(), Some(2));
    assert!(!run.join("fields.csv").exists());
}

#[test]
fn finished_run_is_not_overwritten() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.ini", &format!("{TIGHT}{SMALL_GRID}"));
    let run = tmp.path().join("run");
    assert!(solve(&cfg, &run).status.success());
    let before = fs::read(run.join("manifest.json")).unwrap();
    assert_eq!(solve(&cfg, &run).status.code(), Some(2));
    assert_eq!(fs::read(run.join("manifest.json")).unwrap(), before);
}
