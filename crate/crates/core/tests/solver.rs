mod common;

use fhr_core::convolution::{conv_space_table, conv_spacetime};
use fhr_core::kernel::build_kernel_table;
use fhr_core::solver::{fdm_solve, picard_solve, recover_wy, explicit_representation, source_field};
use fhr_core::{
    Error, FdmOptions, Field, Grid, InitialData, KernelKind, ModelParams, PicardSpec, Profile,
    QuadratureSpec,
};

fn constant_data(grid: &Grid, u: f64, w: f64, y: f64) -> InitialData {
    InitialData::from_profiles(
        grid,
        Profile::Constant { value: u },
        Profile::Constant { value: w },
        Profile::Constant { value: y },
    )
    .unwrap()
}

fn bump(grid: &Grid) -> InitialData {
    let u0 = Profile::Gaussian {
        center: 0.0,
        width: 2.0,
        amplitude: 0.5,
    };
    InitialData::from_profiles(grid, u0, Profile::Zero, Profile::Zero).unwrap()
}

fn max_deviation(field: &Field, k: usize, value: f64) -> f64 {
    field.slice(k).iter().fold(0.0_f64, |m, v| m.max((v - value).abs()))
}

#[test]
fn zero_data_without_forcing_stays_zero() {
    let p = ModelParams {
        c: 0.0,
        h: 0.0,
        ..ModelParams::demo()
    };
    let grid = Grid::new(-5.0, 5.0, 21, 0.5, 11).unwrap();
    let table = build_kernel_table(&grid, &p, &QuadratureSpec::default()).unwrap();
    let sol = picard_solve(&InitialData::zeros(grid.nx), &grid, &p, &table, &PicardSpec::default()).unwrap();
    assert_eq!(sol.u.sup(), 0.0);
    assert_eq!(sol.w.sup(), 0.0);
    assert_eq!(sol.y.sup(), 0.0);
    assert_eq!(sol.iterations_used, 1);
}

#[test]
fn homogeneous_data_follows_ode_without_slow_memory() {
    // with delta -> 0 the kernel's spatial moment is exactly that of the
    // diffusion-free system
    let p = ModelParams {
        delta: 1e-12,
        ..ModelParams::demo()
    };
    let grid = Grid::new(-10.0, 10.0, 201, 2.0, 201).unwrap();
    let table = build_kernel_table(&grid, &p, &QuadratureSpec::default()).unwrap();
    let k0 = 0.5;
    let sol = picard_solve(&constant_data(&grid, k0, 0.0, 0.0), &grid, &p, &table, &PicardSpec::default()).unwrap();
    let ode = common::homogeneous_ode(&p, [k0, 0.0, 0.0], &grid.ts());
    let mut worst = 0.0_f64;
    for k in 0..grid.nt {
        worst = worst.max(max_deviation(&sol.u, k, ode[k][0]));
        worst = worst.max(max_deviation(&sol.w, k, ode[k][1]));
    }
    assert!(worst <= 1e-5, "{worst:e}");
}

#[test]
fn fdm_constant_data_matches_ode() {
    let p = ModelParams::demo();
    let grid = Grid::new(-5.0, 5.0, 51, 2.0, 41).unwrap();
    let state = [0.3, 0.1, -0.2];
    let sol = fdm_solve(&constant_data(&grid, state[0], state[1], state[2]), &grid, &p, &FdmOptions::default()).unwrap();
    let ode = common::homogeneous_ode(&p, state, &grid.ts());
    for k in 0..grid.nt {
        assert!(max_deviation(&sol.u, k, ode[k][0]) < 1e-6, "u at k={k}");
        assert!(max_deviation(&sol.w, k, ode[k][1]) < 1e-6, "w at k={k}");
        assert!(max_deviation(&sol.y, k, ode[k][2]) < 1e-6, "y at k={k}");
    }
}

#[test]
fn converged_solution_is_a_fixed_point() {
    let p = ModelParams::demo();
    let grid = Grid::new(-12.0, 12.0, 121, 1.0, 51).unwrap();
    let table = build_kernel_table(&grid, &p, &QuadratureSpec::default()).unwrap();
    let data = bump(&grid);
    let spec = PicardSpec::new(1e-8, 50).unwrap();
    let sol = picard_solve(&data, &grid, &p, &table, &spec).unwrap();
    let mut again = conv_spacetime(&table, KernelKind::H, &source_field(&sol.u, &data, &p)).unwrap();
    let affine = conv_space_table(&table, KernelKind::H, &data.u0).unwrap();
    for (v, a) in again.values.iter_mut().zip(&affine.values) {
        *v += a;
    }
    assert!(again.sup_diff(&sol.u).unwrap() <= spec.tol);
    assert!(sol.final_update_norm <= spec.tol);
    assert_eq!(sol.history.len(), sol.iterations_used);
}

#[test]
fn too_few_iterations_report_history() {
    let p = ModelParams::demo();
    let grid = Grid::new(-12.0, 12.0, 61, 1.0, 21).unwrap();
    let table = build_kernel_table(&grid, &p, &QuadratureSpec::default()).unwrap();
    let spec = PicardSpec::new(1e-12, 2).unwrap();
    match picard_solve(&bump(&grid), &grid, &p, &table, &spec) {
        Err(Error::NonConvergence { history }) => assert_eq!(history.len(), 2),
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn routes_agree_and_refine() {
    let p = ModelParams::demo();
    let q = QuadratureSpec::default();
    let grid = Grid::new(-12.0, 12.0, 61, 1.0, 51).unwrap();
    let run = |g: &Grid| {
        let table = build_kernel_table(g, &p, &q).unwrap();
        let data = bump(g);
        let sol = picard_solve(&data, g, &p, &table, &PicardSpec::default()).unwrap();
        let fdm = fdm_solve(&data, g, &p, &FdmOptions::default()).unwrap();
        let rep = explicit_representation(&data, g, &p, &table, &sol.u).unwrap();
        let rep_diff = [
            rep.u.sup_diff(&sol.u).unwrap(),
            rep.w.sup_diff(&sol.w).unwrap(),
            rep.y.sup_diff(&sol.y).unwrap(),
        ];
        (sol.u.sup_diff(&fdm.u).unwrap(), rep_diff)
    };
    let (coarse, _) = run(&grid);
    let (fine, rep_diff) = run(&grid.refined(2));
    assert!(2.0 * fine <= coarse, "{coarse:e} -> {fine:e}");
    assert!(fine <= 5e-3, "{fine:e}");
    assert!(rep_diff.iter().all(|&d| d <= 1e-3), "{rep_diff:?}");
}

#[test]
fn recovered_slow_variables_satisfy_their_equations() {
    let p = ModelParams::demo();
    let grid = Grid::new(-6.0, 6.0, 13, 2.0, 401).unwrap();
    let u = Field::from_fn(grid, |x, t| (0.5 * x).cos() * (-t).exp() + 0.2 * t);
    let data = InitialData::from_samples(u.slice(0).to_vec(), vec![0.1; grid.nx], vec![-0.05; grid.nx]).unwrap();
    let (w, y) = recover_wy(&u, &data, &p);
    let dt = grid.dt();
    let mut worst = 0.0_f64;
    for k in 1..grid.nt - 1 {
        for i in 0..grid.nx {
            let dw = (w.get(i, k + 1) - w.get(i, k - 1)) / (2.0 * dt);
            let dy = (y.get(i, k + 1) - y.get(i, k - 1)) / (2.0 * dt);
            let rw = dw - p.eps * (-p.beta * w.get(i, k) + p.c + u.get(i, k));
            let ry = dy - p.delta * (-u.get(i, k) + p.h - p.d * y.get(i, k));
            worst = worst.max(rw.abs()).max(ry.abs());
        }
    }
    assert!(worst <= 1e-3, "{worst:e}");
}
