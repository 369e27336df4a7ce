//! Adaptive Dormand-Prince 5(4) integrator for small linear and nonlinear
//! ODE systems; used by the moment oracle and by tests as an independent
//! reference for the reaction kinetics.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1` with mixed absolute/relative
/// local error control `tol`.
pub fn integrate<F>(mut f: F, t0: f64, t1: f64, y0: &[f64], tol: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    if t1 == t0 {
        return Ok(y);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut h = (span * 1e-3).min(0.01).max(1e-12);
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut steps = 0usize;
    f(t, &y, &mut k[0]);
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        if steps > 10_000_000 {
            return Err(Error::Divergence("ODE integrator exceeded step budget".into()));
        }
        let remaining = (t1 - t).abs();
        if h > remaining {
            h = remaining;
        }
        let hs = h * dir;
        for s in 1..7 {
            for j in 0..n {
                let mut acc = y[j];
                for (m, km) in k.iter().enumerate().take(s) {
                    acc += hs * A[s][m] * km[j];
                }
                tmp[j] = acc;
            }
            f(t + C[s] * hs, &tmp, &mut k[s]);
        }
        let mut err = 0.0_f64;
        let mut y5 = vec![0.0; n];
        for j in 0..n {
            let mut hi = y[j];
            let mut lo = y[j];
            for s in 0..7 {
                hi += hs * B5[s] * k[s][j];
                lo += hs * B4[s] * k[s][j];
            }
            y5[j] = hi;
            let scale = tol * (1.0 + y[j].abs().max(hi.abs()));
            err = err.max((hi - lo).abs() / scale);
        }
        if !err.is_finite() {
            return Err(Error::Divergence("non-finite ODE state".into()));
        }
        if err <= 1.0 {
            t += hs;
            y = y5;
            // FSAL: last stage is f at the new point
            let last = k[6].clone();
            k[0] = last;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < 1e-14 * span {
            return Err(Error::Divergence("ODE step size underflow".into()));
        }
    }
    Ok(y)
}

/// States at each of the (increasing) output `times`, starting from `y0` at
/// `times[0]`.
pub fn integrate_to_times<F>(mut f: F, times: &[f64], y0: &[f64], tol: f64) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut out = Vec::with_capacity(times.len());
    let mut y = y0.to_vec();
    let mut t = match times.first() {
        Some(&t) => t,
        None => return Ok(out),
    };
    for &target in times {
        y = integrate(&mut f, t, target, &y, tol)?;
        t = target;
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let y = integrate(|_, y, dy| dy[0] = -2.0 * y[0], 0.0, 3.0, &[1.0], 1e-11).unwrap();
        assert!((y[0] - (-6f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_at_output_times() {
        let times = [0.0, 1.0, 2.0, 10.0];
        let ys = integrate_to_times(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            &times,
            &[1.0, 0.0],
            1e-11,
        )
        .unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - t.cos()).abs() < 1e-9, "t = {t}");
        }
    }
}
