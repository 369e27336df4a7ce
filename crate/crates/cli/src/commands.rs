use fhr_core::bounds::pointwise_h_bound;
use fhr_core::convolution::check_identities;
use fhr_core::kernel::{
    composed_moment, eval_h1, eval_h2, laplace_h_closed, laplace_h_composed, laplace_horizon,
    laplace_numeric, moment_oracle, spatial_integral_h,
};
use fhr_core::oracle::{series_oracle, BesselKind};
use fhr_core::params::slow_rates_coincide;

use crate::config::RunConfig;
use crate::Failure;

pub fn kernel(config: &RunConfig, x: f64, t: f64) -> Result<(), Failure> {
    let p = &config.params;
    let q = &config.quad;
    let h1 = eval_h1(x, t, p, q)?;
    let h2 = eval_h2(x, t, p, q)?;
    let h = h1 - h2;
    let bound = pointwise_h_bound(x, t, p)?;
    println!("x      = {x:?}");
    println!("t      = {t:?}");
    println!("H1     = {h1:?}");
    println!("H2     = {h2:?}");
    println!("H      = {h:?}");
    println!("bound  = {bound:?}");
    println!("margin = {:?}", bound - h.abs());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Laplace,
    Identities,
    Moments,
    Bessel,
}

struct Check {
    label: String,
    residual: f64,
    limit: f64,
}

fn conclude(name: &str, checks: &[Check]) -> Result<(), Failure> {
    let worst = checks
        .iter()
        .max_by(|a, b| (a.residual / a.limit).total_cmp(&(b.residual / b.limit)))
        .expect("every suite has checks");
    let breaches = checks.iter().filter(|c| !(c.residual <= c.limit)).count();
    if breaches == 0 {
        println!("{name}: all {} residuals within limits (worst {}: {:.3e})", checks.len(), worst.label, worst.residual);
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "{name}: {breaches} of {} residuals over limit; worst {} with {:.3e} > {:.1e}",
            checks.len(),
            worst.label,
            worst.residual,
            worst.limit
        )))
    }
}

pub fn verify(config: &RunConfig, suite: Suite) -> Result<(), Failure> {
    match suite {
        Suite::Laplace => verify_laplace(config),
        Suite::Identities => verify_identities(config),
        Suite::Moments => verify_moments(config),
        Suite::Bessel => verify_bessel(),
    }
}

fn verify_laplace(config: &RunConfig) -> Result<(), Failure> {
    let p = &config.params;
    let q = &config.quad;
    println!("{:>6} {:>6} {:>22} {:>22} {:>10} {:>10}", "x", "s", "numeric", "closed", "residual", "composed");
    let mut checks = Vec::new();
    for x in [0.25, 0.5, 1.0, 2.0, 4.0] {
        for s in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let horizon = laplace_horizon(s, p, q.abs_tol)?;
            let numeric = laplace_numeric(x, s, p, q, horizon)?;
            let closed = laplace_h_closed(x, s, p)?;
            let composed = laplace_h_composed(x, s, p)?;
            let residual = (numeric - closed).abs();
            println!(
                "{x:>6} {s:>6} {numeric:>22.15e} {closed:>22.15e} {residual:>10.3e} {:>10.3e}",
                (numeric - composed).abs()
            );
            checks.push(Check {
                label: format!("x = {x}, s = {s}"),
                residual,
                limit: 1e-4,
            });
        }
    }
    conclude("laplace", &checks)
}

fn verify_identities(config: &RunConfig) -> Result<(), Failure> {
    let p = &config.params;
    if slow_rates_coincide(p) {
        println!("beta*eps = delta*d: K_eps collapses to K_delta");
    }
    let r = check_identities(&config.grid, p, &config.quad)?;
    let checks = [("K_delta", r.kdelta), ("K_eps", r.keps), ("H_delta", r.hdelta), ("shift", r.shift)]
        .into_iter()
        .map(|(name, residual)| {
            println!("{name:>8} {residual:.3e}");
            Check {
                label: format!("{name} (largest at x = {}, t = {})", r.worst_x, r.worst_t),
                residual,
                limit: 1e-4,
            }
        })
        .collect::<Vec<_>>();
    conclude("identities", &checks)
}

fn verify_moments(config: &RunConfig) -> Result<(), Failure> {
    let p = &config.params;
    println!("{:>6} {:>22} {:>22} {:>10} {:>10}", "t", "int H dx", "oracle", "residual", "composed");
    let mut checks = Vec::new();
    for t in [0.25, 0.5, 1.0, 2.0, 5.0] {
        let integral = spatial_integral_h(t, p, &config.quad)?;
        let oracle = moment_oracle(t, p)?;
        let residual = (integral - oracle).abs();
        println!(
            "{t:>6} {integral:>22.15e} {oracle:>22.15e} {residual:>10.3e} {:>10.3e}",
            (integral - composed_moment(t, p)?).abs()
        );
        checks.push(Check {
            label: format!("t = {t}"),
            residual,
            limit: 1e-5,
        });
    }
    conclude("moments", &checks)
}

fn verify_bessel() -> Result<(), Failure> {
    let mut checks = Vec::new();
    for kind in BesselKind::ALL {
        let mut worst = (0.0_f64, 0.0);
        for k in 0..=2000 {
            let z = -50.0 + 0.05 * k as f64;
            let exact = series_oracle(kind, z);
            let scale = match kind {
                BesselKind::J0 | BesselKind::J1 => 1.0,
                BesselKind::I0 | BesselKind::I1 => exact.abs().max(1.0),
            };
            let err = (kind.eval(z) - exact).abs() / scale;
            if err > worst.0 {
                worst = (err, z);
            }
        }
        println!("{:>3} max error {:.3e} at z = {}", kind.name(), worst.0, worst.1);
        checks.push(Check {
            label: format!("{} at z = {}", kind.name(), worst.1),
            residual: worst.0,
            limit: 1e-12,
        });
    }
    conclude("bessel", &checks)
}
