//! Composite Gauss–Legendre quadrature for smooth, exponentially decaying
//! integrands on the real line.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points per panel.
pub const PANEL_ORDER: usize = 10;

/// Gauss–Legendre nodes and weights on [−1, 1], computed by Newton iteration
/// on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

/// ∫_a^b f with one 10-point panel.
pub fn gl_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = panel_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    x.iter().zip(w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// ∫_a^b f with equal panels no wider than `max_width`.
pub fn composite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, max_width: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let n = ((b - a).abs() / max_width).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    (0..n)
        .map(|k| gl_panel(f, a + k as f64 * h, a + (k + 1) as f64 * h))
        .sum()
}

/// Same as [`composite`] but also returns ∫|f|, used as the integrand scale
/// for degeneracy decisions.
fn composite_with_scale<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, max_width: f64) -> (f64, f64) {
    let (x, w) = panel_rule();
    let n = ((b - a).abs() / max_width).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    let (mut val, mut abs) = (0.0, 0.0);
    for k in 0..n {
        let lo = a + k as f64 * h;
        let half = 0.5 * h;
        let mid = lo + half;
        for (xi, wi) in x.iter().zip(w) {
            let v = f(mid + half * xi);
            val += wi * v * half;
            abs += wi * v.abs() * half;
        }
    }
    (val, abs)
}

/// Integration window on the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum Window {
    /// Grow the symmetric window until the integrand has decayed to 1e−15 of
    /// its maximum.
    #[default]
    Auto,
    /// Use [−T, T] and fail if the integrand has not decayed to 1e−14 of its
    /// maximum at the edges.
    Fixed(f64),
}


/// Outcome of a line integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineIntegral {
    pub value: f64,
    /// |Q(h) − Q(h/2)| plus a rounding floor.
    pub abs_error: f64,
    /// ∫|f|.
    pub scale: f64,
    /// Half-width of the window actually used.
    pub half_width: f64,
}

const AUTO_START: f64 = 10.0;
const AUTO_MAX: f64 = 400.0;

fn edge_magnitude<F: Fn(f64) -> f64>(f: &F, t: f64) -> f64 {
    // Several probes so that an accidental zero crossing at the edge does not
    // pass as decay.
    [0.0, 0.31, 0.73]
        .iter()
        .map(|d| f(t - d).abs().max(f(-t + d).abs()))
        .fold(0.0, f64::max)
}

fn sampled_max<F: Fn(f64) -> f64>(f: &F, t: f64) -> f64 {
    let n = (40.0 * t).ceil() as usize;
    (0..=n)
        .map(|k| f(-t + 2.0 * t * k as f64 / n as f64).abs())
        .fold(0.0, f64::max)
}

fn suggested_window<F: Fn(f64) -> f64>(f: &F, start: f64, rel: f64) -> f64 {
    let mut t = start;
    while t < AUTO_MAX {
        t *= 1.5;
        if edge_magnitude(f, t) <= rel * sampled_max(f, t) {
            return t;
        }
    }
    AUTO_MAX
}

/// ∫_{−∞}^{∞} f dt for an exponentially decaying smooth integrand, with panels
/// no wider than `panel_width`.
pub fn integrate_line<F: Fn(f64) -> f64>(f: &F, window: Window, panel_width: f64) -> Result<LineIntegral> {
    let half_width = match window {
        Window::Fixed(t) => {
            if !(t > 0.0) {
                return Err(Error::Config(format!("quadrature window must be positive, got {t}")));
            }
            let peak = sampled_max(f, t);
            let edge = edge_magnitude(f, t);
            if peak > 0.0 && edge > 1e-14 * peak {
                return Err(Error::WindowTooSmall {
                    edge_ratio: edge / peak,
                    suggested: suggested_window(f, t, 1e-14),
                });
            }
            t
        }
        Window::Auto => {
            let mut t = AUTO_START;
            loop {
                let peak = sampled_max(f, t);
                if peak == 0.0 || edge_magnitude(f, t) <= 1e-15 * peak {
                    break t;
                }
                t *= 1.5;
                if t > AUTO_MAX {
                    return Err(Error::WindowTooSmall {
                        edge_ratio: edge_magnitude(f, AUTO_MAX) / sampled_max(f, AUTO_MAX),
                        suggested: AUTO_MAX,
                    });
                }
            }
        }
    };
    let coarse = composite(f, -half_width, half_width, panel_width);
    let (fine, scale) = composite_with_scale(f, -half_width, half_width, 0.5 * panel_width);
    Ok(LineIntegral {
        value: fine,
        abs_error: (fine - coarse).abs() + 4.0 * f64::EPSILON * scale,
        scale,
        half_width,
    })
}

/// Antiderivative tables on [0, T] for evaluating F(t) = ∫_0^t f and
/// G(t) = ∫_t^T f at arbitrary points in [−T, T] by panel prefix sums plus
/// one partial panel.
pub struct Cumulative<F: Fn(f64) -> f64> {
    f: F,
    h: f64,
    /// prefix[k] = ∫_0^{k h} f (k ≥ 0) for the positive side.
    pos: Vec<f64>,
    /// neg[k] = ∫_0^{−k h} f.
    neg: Vec<f64>,
    /// tail[k] = ∫_{k h}^{T} f, accumulated from the right so that small
    /// tails keep their relative accuracy.
    tail: Vec<f64>,
}

impl<F: Fn(f64) -> f64> Cumulative<F> {
    pub fn new(f: F, half_width: f64, panel_width: f64) -> Self {
        let n = (half_width / panel_width).ceil() as usize;
        let h = half_width / n as f64;
        let mut pos = vec![0.0; n + 1];
        let mut neg = vec![0.0; n + 1];
        for k in 0..n {
            let a = k as f64 * h;
            pos[k + 1] = pos[k] + gl_panel(&f, a, a + h);
            neg[k + 1] = neg[k] + gl_panel(&f, -a, -a - h);
        }
        let mut tail = vec![0.0; n + 1];
        for k in (0..n).rev() {
            let a = k as f64 * h;
            tail[k] = tail[k + 1] + gl_panel(&f, a, a + h);
        }
        Cumulative { f, h, pos, neg, tail }
    }

    /// ∫_0^t f.
    pub fn from_zero(&self, t: f64) -> f64 {
        let table = if t >= 0.0 { &self.pos } else { &self.neg };
        let k = ((t.abs() / self.h).floor() as usize).min(table.len() - 1);
        let anchor = if t >= 0.0 { k as f64 * self.h } else { -(k as f64) * self.h };
        table[k] + gl_panel(&self.f, anchor, t)
    }

    /// ∫_t^{T} f where T is the table's right end. For t ≥ 0 this is
    /// accumulated from the right end; for t < 0 it is ∫_t^0 f + ∫_0^T f.
    pub fn to_right_end(&self, t: f64) -> f64 {
        if t < 0.0 {
            return self.tail[0] - self.from_zero(t);
        }
        let k = ((t / self.h).ceil() as usize).min(self.tail.len() - 1);
        self.tail[k] + gl_panel(&self.f, t, k as f64 * self.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{sech, sech_power_integral};

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // degree 18 exactly: ∫x^18 = 2/19
        let v: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(18)).sum();
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn line_integral_of_sech_powers() {
        for p in [1.0, 2.4142, 3.0, 5.5] {
            let r = integrate_line(&|t: f64| sech(t).powf(p), Window::Auto, 0.5).unwrap();
            assert!((r.value - sech_power_integral(p)).abs() < 1e-13, "p = {p}");
            assert!(r.abs_error < 1e-12);
        }
    }

    #[test]
    fn fixed_window_too_small_is_reported() {
        let err = integrate_line(&|t: f64| sech(t), Window::Fixed(5.0), 0.5).unwrap_err();
        match err {
            Error::WindowTooSmall { suggested, .. } => assert!(suggested > 30.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cumulative_matches_closed_form() {
        // ∫_0^t sech² = tanh t
        let c = Cumulative::new(|t: f64| sech(t).powi(2), 30.0, 0.5);
        for t in [-7.3, -0.2, 0.0, 0.6, 4.9] {
            assert!((c.from_zero(t) - t.tanh()).abs() < 1e-14);
            assert!((c.to_right_end(t) - (1.0 - t.tanh())).abs() < 1e-14);
        }
    }
}
