//! Complex-time monodromy of the example's planar variational blocks
//! ξ'' = q(t) ξ around the regular singular points z = 0 of the charts
//! z = e^{−t} (Σ₊, t → +∞) and z = e^{t} (Σ₋, t → −∞).
//!
//! Block 1 has q = 1 − 6 sech² t and block 2 has q = s − 2β₁ sech² t (at β₂ = 0).
//! Both are written in companion form Ξ = (ξ, ξ'), which is traceless, so
//! det M = 1.
//!
//! The loop in the chart |z| = ε is traversed in the t-variable along
//! t = ±(t₁ − iθ) with t₁ = −log ε. The monodromy M_loc of that loop acts on
//! data at the basepoint ±t₁. In the t = 0 basis (even/odd solutions, Φ(0) = I)
//! the monodromy is M = Φ(t₁)⁻¹ M_loc Φ(t₁). Computing it that way would cost
//! about cond Φ(t₁) ≈ e^{2√q∞ t₁} in accuracy. Instead M = V T V⁻¹, where:
//!
//! * V = [v̂_d, v̂_d^⊥], and v̂_d is the decaying Frobenius solution of the
//!   chart carried back to t = 0. Going backward it is the dominant solution,
//!   so it stays accurate.
//! * T = [[μ_d, c], [0, μ_g]] holds the loop eigenvalues from M_loc.
//! * The coupling c comes from the same construction on an anchor loop of
//!   radius e^{−1}. The punctured disc |z| < 1 holds no other singular point,
//!   so that loop is homotopic to the ε-loop and its conjugation to t = 0 is
//!   well conditioned.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::duffing::ExampleParams;
use crate::error::{Error, Result};
use crate::ode::{integrate, Tolerance};

type C = Complex64;

/// Radius e^{−ANCHOR_T1} of the well-conditioned anchor loop.
const ANCHOR_T1: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    /// z = e^{−t}, neighbourhood of t = +∞.
    #[serde(rename = "sigma_plus")]
    Plus,
    /// z = e^{t}, neighbourhood of t = −∞.
    #[serde(rename = "sigma_minus")]
    Minus,
}

impl Chart {
    /// Chart rate λ with z = e^{λ t}.
    pub fn rate(&self) -> f64 {
        match self {
            Chart::Plus => -1.0,
            Chart::Minus => 1.0,
        }
    }
    fn side(&self) -> f64 {
        -self.rate()
    }
}

/// A loop |z| = ε in one chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartLoop {
    pub chart: Chart,
    pub epsilon: f64,
    /// Step budget of the adaptive integrator on the loop.
    pub angular_steps: usize,
}

impl ChartLoop {
    pub fn new(chart: Chart, epsilon: f64) -> Result<Self> {
        let c = ChartLoop { chart, epsilon, angular_steps: 200_000 };
        c.validate()?;
        Ok(c)
    }

    /// The circle must stay clear of the poles of sech, which lie on |z| = 1;
    /// ε² ≤ 1e−4 keeps the coefficient within 1e−4 of its limit.
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon * self.epsilon <= 1e-4) {
            return Err(Error::Config(format!("chart radius ε = {} must satisfy 0 < ε² ≤ 1e−4", self.epsilon)));
        }
        Ok(())
    }

    /// Real-axis basepoint magnitude t₁ = −log ε / |λ|.
    pub fn t1(&self) -> f64 {
        -self.epsilon.ln() / self.chart.rate().abs()
    }
}

fn potential(block: u8, p: &ExampleParams, sech2: C) -> Result<C> {
    match block {
        1 => Ok(C::new(1.0, 0.0) - sech2 * 6.0),
        2 => Ok(C::new(p.s, 0.0) - sech2 * (2.0 * p.beta1)),
        _ => Err(Error::Usage(format!("block must be 1 or 2, got {block}"))),
    }
}

fn q_limit(block: u8, p: &ExampleParams) -> Result<f64> {
    Ok(potential(block, p, C::new(0.0, 0.0))?.re)
}

/// sech²(t) for complex t without overflow.
fn sech2(t: C) -> C {
    let e = if t.re >= 0.0 { (-t).exp() } else { t.exp() };
    let s = e * 2.0 / (C::new(1.0, 0.0) + e * e);
    s * s
}

/// Coefficient matrix of dΞ/dz = B(z) Ξ in the chart, where
/// B(z) = A(t(z)) / (λ z) and A = [[0, 1], [q, 0]]. Uses sech t = 2z/(1+z²).
pub fn chart_coefficients(block: u8, p: &ExampleParams, chart: &ChartLoop, z: C) -> Result<DMatrix<C>> {
    if z.norm() == 0.0 {
        return Err(Error::Domain("z = 0 is the singular point; use chart_residue".into()));
    }
    if (z.norm() - 1.0).abs() < 1e-12 {
        return Err(Error::Domain(format!("z = {z} lies on the pole locus |z| = 1")));
    }
    let sech = z * 2.0 / (C::new(1.0, 0.0) + z * z);
    let q = potential(block, p, sech * sech)?;
    let scale = C::new(1.0, 0.0) / (z * chart.chart.rate());
    Ok(DMatrix::from_row_slice(2, 2, &[C::new(0.0, 0.0), scale, q * scale, C::new(0.0, 0.0)]))
}

/// lim_{z→0} z·B(z) = A(±∞)/λ, whose eigenvalues are the Frobenius exponents.
pub fn chart_residue(block: u8, p: &ExampleParams, chart: &ChartLoop) -> Result<DMatrix<C>> {
    let q = q_limit(block, p)?;
    let l = chart.chart.rate();
    Ok(DMatrix::from_row_slice(2, 2, &[C::new(0.0, 0.0), C::new(1.0 / l, 0.0), C::new(q / l, 0.0), C::new(0.0, 0.0)]))
}

/// Frobenius exponents at z = 0 (eigenvalues of the residue), ascending.
pub fn frobenius_exponents(block: u8, p: &ExampleParams, chart: &ChartLoop) -> Result<[f64; 2]> {
    let r = q_limit(block, p)?.sqrt() / chart.chart.rate().abs();
    Ok([-r, r])
}

fn tol() -> Tolerance {
    Tolerance { rel: 1e-12, abs: 1e-14, max_steps: 200_000 }
}

/// Integrates the 2×2 fundamental matrix (columns of `y0`) along the path
/// t(τ) = t_start + τ·dir, τ ∈ [0, len].
fn propagate(block: u8, p: &ExampleParams, t_start: C, dir: C, len: f64, y0: &DMatrix<C>, steps: usize) -> Result<DMatrix<C>> {
    let q_of = |t: C| potential(block, p, sech2(t));
    potential(block, p, C::new(0.0, 0.0))?;
    let cols = y0.ncols();
    let mut init = Vec::with_capacity(2 * cols);
    for k in 0..cols {
        init.push(y0[(0, k)]);
        init.push(y0[(1, k)]);
    }
    let (y, _) = integrate(
        |tau, y: &[C], dy: &mut [C]| {
            let t = t_start + dir * tau;
            let q = q_of(t).expect("block validated");
            for k in 0..cols {
                dy[2 * k] = dir * y[2 * k + 1];
                dy[2 * k + 1] = dir * q * y[2 * k];
            }
        },
        0.0,
        len,
        &init,
        Tolerance { max_steps: steps, ..tol() },
    )?;
    let mut out = DMatrix::zeros(2, cols);
    for k in 0..cols {
        out[(0, k)] = y[2 * k];
        out[(1, k)] = y[2 * k + 1];
    }
    Ok(out)
}

/// Loop monodromy at basepoint ±t₁ (Ψ(2π) with Ψ(0) = I).
fn loop_matrix(block: u8, p: &ExampleParams, chart: Chart, t1: f64, steps: usize) -> Result<DMatrix<C>> {
    let side = chart.side();
    // Σ₊: t = t₁ − iθ; Σ₋: t = −t₁ + iθ. Both wind z once counterclockwise.
    let start = C::new(side * t1, 0.0);
    let dir = C::new(0.0, -side);
    propagate(block, p, start, dir, 2.0 * std::f64::consts::PI, &DMatrix::identity(2, 2), steps)
}

/// Transports vectors given at ±t₁ back to t = 0 along the real axis.
fn to_origin(block: u8, p: &ExampleParams, chart: Chart, t1: f64, v: &DMatrix<C>) -> Result<DMatrix<C>> {
    let side = chart.side();
    propagate(block, p, C::new(side * t1, 0.0), C::new(-side, 0.0), t1, v, tol().max_steps)
}

fn eigenvalues2(m: &DMatrix<C>) -> [C; 2] {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (tr * tr - det * 4.0).sqrt();
    [(tr + disc) / 2.0, (tr - disc) / 2.0]
}

fn eigenvector2(m: &DMatrix<C>, mu: C) -> DVector<C> {
    let a = DVector::from_vec(vec![m[(0, 1)], mu - m[(0, 0)]]);
    let b = DVector::from_vec(vec![mu - m[(1, 1)], m[(1, 0)]]);
    let v = if a.norm() >= b.norm() { a } else { b };
    if v.norm() == 0.0 {
        DVector::from_vec(vec![C::new(1.0, 0.0), C::new(0.0, 0.0)])
    } else {
        normalize_line(v)
    }
}

/// Unit vector with its largest entry real and positive.
fn normalize_line(v: DVector<C>) -> DVector<C> {
    let n = v.norm();
    let big = if v[0].norm() >= v[1].norm() { v[0] } else { v[1] };
    let phase = big / big.norm();
    v.map(|c| c / (phase * n))
}

/// Decaying eigen-direction of a loop matrix at basepoint ±t₁: the
/// eigenvector whose ratio ξ'/ξ is closest to the decay rate ∓√q∞.
fn decaying_direction(m: &DMatrix<C>, chart: Chart, qinf: f64) -> (C, C, DVector<C>) {
    let target = C::new(-chart.side() * qinf.sqrt(), 0.0);
    let mus = eigenvalues2(m);
    let score = |mu: C| {
        let v = eigenvector2(m, mu);
        if v[0].norm() == 0.0 {
            f64::INFINITY
        } else {
            (v[1] / v[0] - target).norm()
        }
    };
    let (d, g) = if score(mus[0]) <= score(mus[1]) { (mus[0], mus[1]) } else { (mus[1], mus[0]) };
    (d, g, eigenvector2(m, d))
}

/// Monodromy of one block around one chart's singular point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonodromyResult {
    pub chart: ChartLoop,
    pub block: u8,
    pub params: ExampleParams,
    /// M in the t = 0 basis (columns: even and odd solutions, Φ(0) = I).
    pub matrix: DMatrix<C>,
    /// Loop monodromy at the basepoint ±t₁ (Ψ(2π), Ψ(0) = I).
    pub local: DMatrix<C>,
    /// Global fundamental matrix Φ(±t₁) from real-axis integration.
    pub basis_at_t1: DMatrix<C>,
    pub det_residual: f64,
    /// [decaying, growing] eigenvalues.
    pub eigenvalues: [C; 2],
    /// Eigen-directions in the t = 0 basis; the second one is omitted when
    /// the eigenvalues coincide (unipotent case).
    pub eigenvectors: Vec<DVector<C>>,
    /// ‖M − M_anchor‖∞, a consistency check against the anchor loop.
    pub anchor_discrepancy: f64,
}

impl MonodromyResult {
    pub fn decaying_direction(&self) -> &DVector<C> {
        &self.eigenvectors[0]
    }

    pub fn to_json(&self) -> serde_json::Value {
        let re: Vec<Vec<f64>> = (0..2).map(|i| (0..2).map(|j| self.matrix[(i, j)].re).collect()).collect();
        let im: Vec<Vec<f64>> = (0..2).map(|i| (0..2).map(|j| self.matrix[(i, j)].im).collect()).collect();
        serde_json::json!({
            "chart": self.chart.chart,
            "epsilon": self.chart.epsilon,
            "t1": self.chart.t1(),
            "block": self.block,
            "matrix": { "re": re, "im": im },
            "eigenvalues": self.eigenvalues.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
            "det_residual": self.det_residual,
            "anchor_discrepancy": self.anchor_discrepancy,
        })
    }
}

fn anchored_matrix(block: u8, p: &ExampleParams, chart: Chart) -> Result<DMatrix<C>> {
    let side = chart.side();
    let phi = propagate(block, p, C::new(0.0, 0.0), C::new(side, 0.0), ANCHOR_T1, &DMatrix::identity(2, 2), tol().max_steps)?;
    let l = loop_matrix(block, p, chart, ANCHOR_T1, tol().max_steps)?;
    let inv = phi.clone().try_inverse().ok_or_else(|| Error::NumericalQuality("singular anchor basis".into()))?;
    Ok(inv * l * phi)
}

/// Computes M for `block` in the given chart. `params.beta2` is ignored (the
/// blocks decouple at β₂ = 0).
pub fn monodromy_matrix(block: u8, params: &ExampleParams, chart: &ChartLoop) -> Result<MonodromyResult> {
    chart.validate()?;
    let qinf = q_limit(block, params)?;
    if !(qinf > 0.0) {
        return Err(Error::Config("the saddle requires q(±∞) > 0".into()));
    }
    let t1 = chart.t1();
    let local = loop_matrix(block, params, chart.chart, t1, chart.angular_steps)?;
    let det = local[(0, 0)] * local[(1, 1)] - local[(0, 1)] * local[(1, 0)];
    let det_residual = (det - C::new(1.0, 0.0)).norm();
    if det_residual > 1e-6 {
        return Err(Error::NumericalQuality(format!("|det M − 1| = {det_residual:.2e}")));
    }
    let (mut mu_d, mut mu_g, v_loc) = decaying_direction(&local, chart.chart, qinf);
    // Integer exponent difference 2√q∞: the loop matrix is a Jordan block, and
    // roundoff splits its double eigenvalue by O(√tol). Use the exact mean.
    let coincident = {
        let d = 2.0 * qinf.sqrt();
        (d - d.round()).abs() < 1e-9
    };
    if coincident {
        let mean = (local[(0, 0)] + local[(1, 1)]) / 2.0;
        mu_d = mean;
        mu_g = mean;
    }
    let v0 = to_origin(block, params, chart.chart, t1, &DMatrix::from_column_slice(2, 1, v_loc.as_slice()))?;
    let vd = normalize_line(v0.column(0).into_owned());
    let vperp = DVector::from_vec(vec![-vd[1].conj(), vd[0].conj()]);
    let v = DMatrix::from_columns(&[vd.clone(), vperp.clone()]);
    let vinv = v.adjoint();
    let anchor = anchored_matrix(block, params, chart.chart)?;
    let coupling = (&vinv * &anchor * &v)[(0, 1)];
    let t = DMatrix::from_row_slice(2, 2, &[mu_d, coupling, C::new(0.0, 0.0), mu_g]);
    let matrix = &v * t * &vinv;
    let mut eigenvectors = vec![vd.clone()];
    if !coincident {
        let w = &vd * (coupling / (mu_g - mu_d)) + &vperp;
        eigenvectors.push(normalize_line(w));
    }
    let anchor_discrepancy = (&matrix - &anchor).iter().map(|c| c.norm()).fold(0.0, f64::max);
    let basis_at_t1 = propagate(
        block,
        params,
        C::new(0.0, 0.0),
        C::new(chart.chart.side(), 0.0),
        t1,
        &DMatrix::identity(2, 2),
        tol().max_steps,
    )?;
    Ok(MonodromyResult {
        chart: *chart,
        block,
        params: *params,
        matrix,
        local,
        basis_at_t1,
        det_residual,
        eigenvalues: [mu_d, mu_g],
        eigenvectors,
        anchor_discrepancy,
    })
}

/// Angle between the complex lines spanned by `a` and `b`.
pub fn line_angle(a: &DVector<C>, b: &DVector<C>) -> f64 {
    let a = a / C::new(a.norm(), 0.0);
    let b = b / C::new(b.norm(), 0.0);
    let proj = a.dotc(&b);
    let resid = (&b - &a * proj).norm();
    resid.min(1.0).asin()
}

/// Outcome of the simultaneous-triangularizability test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnosis {
    /// Minimal angle between eigenvector lines of M₊ and M₋.
    pub angle: f64,
    /// The shared line when `angle` ≤ [`COMMON_LINE_TOL`].
    pub common_line: Option<DVector<C>>,
    pub triangularizable: bool,
    /// min_λ ‖M₊ v_b − λ v_b‖ and the same for M₋, if a bounded direction was given.
    pub bounded_residuals: Option<[f64; 2]>,
    pub bounded_fixed: Option<bool>,
}

pub const COMMON_LINE_TOL: f64 = 1e-5;
pub const BOUNDED_FIXED_TOL: f64 = 1e-6;

fn fixed_residual(m: &DMatrix<C>, eig: &[C; 2], v: &DVector<C>) -> f64 {
    let v = v / C::new(v.norm(), 0.0);
    let mv = m * &v;
    eig.iter().map(|l| (&mv - &v * *l).norm()).fold(f64::INFINITY, f64::min)
}

/// Looks for a common eigenvector line of M₊ and M₋ and checks that a known
/// bounded-solution direction is fixed by both.
pub fn check_triangularizable(
    plus: &MonodromyResult,
    minus: &MonodromyResult,
    bounded_direction: Option<&DVector<C>>,
) -> Result<Diagnosis> {
    if plus.block != minus.block
        || plus.chart.chart != Chart::Plus
        || minus.chart.chart != Chart::Minus
        || plus.params != minus.params
    {
        return Err(Error::Usage("M₊ and M₋ must be the same block and parameters, in charts Σ₊ and Σ₋".into()));
    }
    let mut angle = f64::INFINITY;
    let mut line = None;
    for a in &plus.eigenvectors {
        for b in &minus.eigenvectors {
            let th = line_angle(a, b);
            if th < angle {
                angle = th;
                line = Some(a.clone());
            }
        }
    }
    let triangularizable = angle <= COMMON_LINE_TOL;
    let bounded_residuals = bounded_direction.map(|v| {
        [fixed_residual(&plus.matrix, &plus.eigenvalues, v), fixed_residual(&minus.matrix, &minus.eigenvalues, v)]
    });
    Ok(Diagnosis {
        angle,
        common_line: if triangularizable { line } else { None },
        triangularizable,
        bounded_residuals,
        bounded_fixed: bounded_residuals.map(|r| r[0] <= BOUNDED_FIXED_TOL && r[1] <= BOUNDED_FIXED_TOL),
    })
}

/// Block-diagonal 4×4 monodromy diag(M_block1, M_block2) in the coordinates
/// (ξ₁, ξ₁', ξ₂, ξ₂').
pub fn block_diagonal(block1: &MonodromyResult, block2: &MonodromyResult) -> Result<DMatrix<C>> {
    if block1.block != 1 || block2.block != 2 || block1.chart.chart != block2.chart.chart {
        return Err(Error::Usage("expected block 1 and block 2 in the same chart".into()));
    }
    let mut m = DMatrix::zeros(4, 4);
    m.view_mut((0, 0), (2, 2)).copy_from(&block1.matrix);
    m.view_mut((2, 2), (2, 2)).copy_from(&block2.matrix);
    Ok(m)
}

/// Largest failure of M to preserve the flag span{f₁} ⊂ span{f₁, f₂} ⊂ …:
/// the norm of the component of M f_k outside span{f₁…f_k}.
pub fn flag_residual(m: &DMatrix<C>, flag: &[DVector<C>]) -> f64 {
    let mut worst: f64 = 0.0;
    let mut basis: Vec<DVector<C>> = Vec::new();
    for f in flag {
        let mut w = f.clone();
        for b in &basis {
            let c = b.dotc(&w);
            w -= b * c;
        }
        basis.push(&w / C::new(w.norm(), 0.0));
        let mut image = m * (f / C::new(f.norm(), 0.0));
        for b in &basis {
            let c = b.dotc(&image);
            image -= b * c;
        }
        worst = worst.max(image.norm());
    }
    worst
}
