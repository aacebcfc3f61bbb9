//! Adaptive Dormand–Prince 5(4) integrator for complex-valued systems
//! parameterized by a real variable.

use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

/// Step-size controller settings.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_steps: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-12, abs: 1e-14, max_steps: 200_000 }
    }
}

/// Counters from a completed integration.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

/// Integrates y' = rhs(τ, y) from τ0 to τ1 (either direction).
pub fn integrate<F>(mut rhs: F, tau0: f64, tau1: f64, y0: &[C], tol: Tolerance) -> Result<(Vec<C>, Stats)>
where
    F: FnMut(f64, &[C], &mut [C]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut stats = Stats::default();
    if tau0 == tau1 {
        return Ok((y, stats));
    }
    let dir = (tau1 - tau0).signum();
    let span = (tau1 - tau0).abs();
    let mut tau = tau0;
    let mut h = (0.01 * span).min(0.05);
    let mut k: Vec<Vec<C>> = vec![vec![C::new(0.0, 0.0); n]; 7];
    let mut tmp = vec![C::new(0.0, 0.0); n];
    let mut ynew = vec![C::new(0.0, 0.0); n];
    rhs(tau, &y, &mut k[0]);

    while (tau1 - tau) * dir > 0.0 {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(Error::StepRejection(format!(
                "step budget exhausted at τ = {tau} ({} rejected)",
                stats.rejected
            )));
        }
        let last = h >= (tau1 - tau).abs();
        if last {
            h = (tau1 - tau).abs();
        }
        let s = h * dir;

        macro_rules! stage {
            ($dst:expr, $c:expr, [$(($i:expr, $a:expr)),*]) => {{
                for j in 0..n {
                    tmp[j] = y[j] $(+ k[$i][j] * ($a * s))*;
                }
                let (_, tail) = k.split_at_mut($dst);
                rhs(tau + $c * s, &tmp, &mut tail[0]);
            }};
        }
        stage!(1, C2, [(0, A21)]);
        stage!(2, C3, [(0, A31), (1, A32)]);
        stage!(3, C4, [(0, A41), (1, A42), (2, A43)]);
        stage!(4, C5, [(0, A51), (1, A52), (2, A53), (3, A54)]);
        stage!(5, 1.0, [(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
        for j in 0..n {
            ynew[j] = y[j] + (k[0][j] * B1 + k[2][j] * B3 + k[3][j] * B4 + k[4][j] * B5 + k[5][j] * B6) * s;
        }
        {
            let (_, tail) = k.split_at_mut(6);
            rhs(tau + s, &ynew, &mut tail[0]);
        }
        let mut err: f64 = 0.0;
        for j in 0..n {
            let e = (k[0][j] * E1 + k[2][j] * E3 + k[3][j] * E4 + k[4][j] * E5 + k[5][j] * E6 + k[6][j] * E7) * s;
            let sc = tol.abs + tol.rel * y[j].norm().max(ynew[j].norm());
            err = err.max(e.norm() / sc);
        }
        if !err.is_finite() {
            return Err(Error::StepRejection(format!("non-finite state at τ = {tau}")));
        }
        if err <= 1.0 {
            stats.accepted += 1;
            tau = if last { tau1 } else { tau + s };
            std::mem::swap(&mut y, &mut ynew);
            k.swap(0, 6);
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < 1e-14 * span.max(1.0) {
                return Err(Error::StepRejection(format!("step size underflow at τ = {tau}")));
            }
        }
    }
    Ok((y, stats))
}

/// Convenience wrapper for real systems: integrates and returns the real part.
pub fn integrate_real<F>(mut rhs: F, t0: f64, t1: f64, y0: &[f64], tol: Tolerance) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let yc: Vec<C> = y0.iter().map(|&v| C::new(v, 0.0)).collect();
    let mut re = vec![0.0; n];
    let mut out = vec![0.0; n];
    let (y, _) = integrate(
        |t, y: &[C], dy: &mut [C]| {
            for j in 0..n {
                re[j] = y[j].re;
            }
            rhs(t, &re, &mut out);
            for j in 0..n {
                dy[j] = C::new(out[j], 0.0);
            }
        },
        t0,
        t1,
        &yc,
        tol,
    )?;
    Ok(y.iter().map(|c| c.re).collect())
}
