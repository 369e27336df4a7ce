mod common;

use fhr_core::bounds::{
    check_run, kdelta_hdelta_bounds, l1_h_bounds, pointwise_h_bound, solution_bounds, REPORT_IDS,
};
use fhr_core::kernel::{build_kernel_table, eval_h, spatial_l1_h};
use fhr_core::params::lambda;
use fhr_core::solver::picard_solve;
use fhr_core::{
    Constant, DataSups, Grid, InitialData, ModelParams, PicardSpec, Profile, QuadratureSpec,
    SolutionField,
};

fn slow_params() -> ModelParams {
    ModelParams {
        beta: 1.5,
        ..common::tight_params()
    }
}

fn solve(p: &ModelParams, grid: &Grid, data: &InitialData) -> (SolutionField, fhr_core::KernelTable) {
    let table = build_kernel_table(grid, p, &QuadratureSpec::default()).unwrap();
    let sol = picard_solve(data, grid, p, &table, &PicardSpec::default()).unwrap();
    (sol, table)
}

fn small_grid() -> Grid {
    Grid::new(-8.0, 8.0, 81, 1.0, 21).unwrap()
}

fn failing(reports: &[fhr_core::BoundReport]) -> Vec<String> {
    reports.iter().filter(|r| !r.acceptable()).map(|r| r.bound_id.clone()).collect()
}

#[test]
fn pointwise_bound_dominates_kernel() {
    let p = ModelParams::demo();
    let b = pointwise_h_bound(0.0, 1.0, &p).unwrap();
    let h = eval_h(0.0, 1.0, &p, &QuadratureSpec::default()).unwrap();
    assert!(b.is_finite() && b >= h.abs());
}

#[test]
fn l1_envelopes_dominate_quadrature() {
    let p = ModelParams::demo();
    let q = QuadratureSpec::default();
    let b = l1_h_bounds(2.0, &p).unwrap();
    assert!((b.exp_form - 5.785194864399630539).abs() < 1e-13);
    for t in [0.1, 1.0, 3.0] {
        let b = l1_h_bounds(t, &p).unwrap();
        let l1 = spatial_l1_h(t, &p, &q).unwrap();
        assert!(l1 <= b.exp_form && l1 <= b.bessel_form, "t={t}");
    }
}

#[test]
fn derived_kernel_constants_at_unit_time() {
    let k = kdelta_hdelta_bounds(1.0, &ModelParams::demo()).unwrap();
    let close = |c: Constant, v: f64| (c.get().unwrap() / v - 1.0).abs() < 1e-13;
    assert!(close(k.b38, 2.954623770787664264));
    assert!(close(k.dccc, 2.954623770787664264));
    assert!(close(k.bbb38, 244.7530836033733300));
    assert!(close(k.bccc, 10074.93582635773607));
    assert!(matches!(k.ccc, Constant::Degenerate(_)));
    assert!(matches!(k.ddccc, Constant::Degenerate(_)));
}

#[test]
fn initial_data_term_decays() {
    let p = ModelParams::demo();
    let q = p.decay_rates().q;
    let t = 100.0 / q;
    assert!(lambda(t, &p) * (-q * t).exp() < 1e-6);
    let sups = DataSups { u0: 1.0, w0: 0.0, y0: 0.0, phi: 0.2 };
    let far = solution_bounds(t, &p, &sups).unwrap().u;
    let limit = (sups.phi + p.forcing_offset().abs()) * fhr_core::params::constant_s(&p);
    assert!((far / limit - 1.0).abs() < 0.01, "{far} vs {limit}");
}

#[test]
fn zero_run_passes_trivially() {
    let p = ModelParams {
        c: 0.0,
        h: 0.0,
        ..slow_params()
    };
    let grid = small_grid();
    let data = InitialData::zeros(grid.nx);
    let (sol, table) = solve(&p, &grid, &data);
    let reports = check_run(&sol, &table, &p, &data).unwrap();
    assert_eq!(reports.len(), REPORT_IDS.len());
    assert!(reports.iter().all(|r| r.pass), "{:?}", failing(&reports));
}

#[test]
fn demo_slow_bounds_are_skipped() {
    let p = ModelParams::demo();
    let grid = Grid::new(-8.0, 8.0, 41, 0.5, 11).unwrap();
    let data = InitialData::zeros(grid.nx);
    let (sol, table) = solve(&p, &grid, &data);
    let reports = check_run(&sol, &table, &p, &data).unwrap();
    let skipped: Vec<&str> = reports.iter().filter(|r| r.is_skipped()).map(|r| r.bound_id.as_str()).collect();
    assert_eq!(skipped, ["w_sup", "y_sup", "kdelta_time_integral", "hdelta_time_integral"]);
    assert!(failing(&reports).is_empty());
}

#[test]
fn tampering_fails_exactly_the_tampered_report() {
    let p = slow_params();
    let grid = small_grid();
    let u0 = Profile::Gaussian {
        center: 0.0,
        width: 1.0,
        amplitude: 0.1,
    };
    let data = InitialData::from_profiles(&grid, u0, Profile::Zero, Profile::Zero).unwrap();
    let (sol, table) = solve(&p, &grid, &data);
    let clean = check_run(&sol, &table, &p, &data).unwrap();
    assert!(clean.iter().all(|r| r.pass), "{:?}", failing(&clean));

    let mut bad = sol.clone();
    bad.u = sol.u.scaled(100.0);
    assert_eq!(failing(&check_run(&bad, &table, &p, &data).unwrap()), ["u_sup"]);
    let mut bad = sol.clone();
    bad.w = sol.w.scaled(1000.0);
    assert_eq!(failing(&check_run(&bad, &table, &p, &data).unwrap()), ["w_sup"]);
    let mut bad = sol;
    bad.y = bad.y.scaled(1000.0);
    assert_eq!(failing(&check_run(&bad, &table, &p, &data).unwrap()), ["y_sup"]);
}
