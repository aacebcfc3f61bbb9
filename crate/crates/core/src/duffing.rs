//! The coupled four-dimensional Duffing-type example
//!
//! ```text
//! ẋ₁ = x₃,  ẋ₂ = x₄,
//! ẋ₃ = x₁ − (x₁² + γx₂²)x₁ − β₂x₂,
//! ẋ₄ = s x₂ − β₁(x₁² + 2x₂²)x₂ − β₂x₁ − β₃x₂²,
//! ```
//!
//! reversible under R = diag(1, 1, −1, −1), with its closed-form homoclinic
//! orbit, resonance condition and bounded variational solutions.
//!
//! The coupling γ defaults to β₁, which makes the system a natural Hamiltonian
//! one; `Coupling::Fixed(8.0)` gives the variant with a constant coupling.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate_real, Tolerance};
use crate::special::sech;
use crate::system::{ParamMap, ReversibleSystem};

pub const REGISTRY_NAME: &str = "duffing4d";

/// Coefficient of x₁x₂² in the ẋ₃ equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum Coupling {
    /// γ = β₁ (tracks β₁ under continuation).
    #[default]
    Beta1,
    /// γ held at a fixed value.
    Fixed(f64),
}


/// Parameters of the example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleParams {
    pub s: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    /// Resonance index ℓ used by the closed-form objects.
    pub ell: u32,
}

impl ExampleParams {
    /// Parameters with β₁ placed on the ℓ-th resonance.
    pub fn at_resonance(s: f64, ell: u32, beta2: f64, beta3: f64) -> Result<Self> {
        Ok(ExampleParams { s, beta1: resonance_beta1(s, ell)?, beta2, beta3, ell })
    }

    /// √s.
    pub fn root_s(&self) -> f64 {
        self.s.sqrt()
    }

    /// Whether β₁ lies on the ℓ-th resonance (relative tolerance 1e−12).
    pub fn is_resonant(&self) -> bool {
        match resonance_beta1(self.s, self.ell) {
            Ok(b) => (self.beta1 - b).abs() <= 1e-12 * b.abs().max(1.0),
            Err(_) => false,
        }
    }
}

/// The example system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Duffing4d {
    pub p: ExampleParams,
    pub coupling: Coupling,
}

impl Duffing4d {
    pub fn new(p: ExampleParams) -> Self {
        Duffing4d { p, coupling: Coupling::Beta1 }
    }

    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = coupling;
        self
    }

    /// Current value of γ.
    pub fn gamma(&self) -> f64 {
        match self.coupling {
            Coupling::Beta1 => self.p.beta1,
            Coupling::Fixed(g) => g,
        }
    }

    /// Builds from a parameter map; missing entries default to s = 2, ℓ = 0,
    /// β₁ on the resonance, β₂ = β₃ = 0. A `coupling` entry selects a fixed γ.
    pub fn from_map(m: &ParamMap) -> Result<Self> {
        for k in m.keys() {
            if !["s", "beta1", "beta2", "beta3", "ell", "coupling"].contains(&k.as_str()) {
                return Err(Error::UnknownParameter(k.clone()));
            }
        }
        let s = m.get("s").copied().unwrap_or(2.0);
        let ell_f = m.get("ell").copied().unwrap_or(0.0);
        if ell_f < 0.0 || ell_f.fract() != 0.0 {
            return Err(Error::Config(format!("ell must be a nonnegative integer, got {ell_f}")));
        }
        let ell = ell_f as u32;
        let beta1 = match m.get("beta1") {
            Some(b) => *b,
            None => resonance_beta1(s, ell)?,
        };
        let p = ExampleParams {
            s,
            beta1,
            beta2: m.get("beta2").copied().unwrap_or(0.0),
            beta3: m.get("beta3").copied().unwrap_or(0.0),
            ell,
        };
        let coupling = m.get("coupling").map(|g| Coupling::Fixed(*g)).unwrap_or(Coupling::Beta1);
        Ok(Duffing4d { p, coupling })
    }

    /// Vector field on a fixed-size state, used by the hot loops.
    #[inline]
    pub fn eval(&self, x: &[f64; 4]) -> [f64; 4] {
        let ExampleParams { s, beta1, beta2, beta3, .. } = self.p;
        let g = self.gamma();
        let [x1, x2, x3, x4] = *x;
        [
            x3,
            x4,
            x1 - (x1 * x1 + g * x2 * x2) * x1 - beta2 * x2,
            s * x2 - beta1 * (x1 * x1 + 2.0 * x2 * x2) * x2 - beta2 * x1 - beta3 * x2 * x2,
        ]
    }

    /// Jacobian on a fixed-size state (row-major).
    #[inline]
    pub fn jac(&self, x: &[f64; 4]) -> [[f64; 4]; 4] {
        let ExampleParams { s, beta1, beta2, beta3, .. } = self.p;
        let g = self.gamma();
        let [x1, x2, _, _] = *x;
        [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [1.0 - 3.0 * x1 * x1 - g * x2 * x2, -2.0 * g * x1 * x2 - beta2, 0.0, 0.0],
            [
                -2.0 * beta1 * x1 * x2 - beta2,
                s - beta1 * (x1 * x1 + 6.0 * x2 * x2) - 2.0 * beta3 * x2,
                0.0,
                0.0,
            ],
        ]
    }
}

fn as4(x: &DVector<f64>) -> [f64; 4] {
    [x[0], x[1], x[2], x[3]]
}

impl ReversibleSystem for Duffing4d {
    fn name(&self) -> &str {
        REGISTRY_NAME
    }

    fn dim(&self) -> usize {
        4
    }

    fn params(&self) -> ParamMap {
        let mut m = ParamMap::new();
        m.insert("s".into(), self.p.s);
        m.insert("beta1".into(), self.p.beta1);
        m.insert("beta2".into(), self.p.beta2);
        m.insert("beta3".into(), self.p.beta3);
        if let Coupling::Fixed(g) = self.coupling {
            m.insert("coupling".into(), g);
        }
        m
    }

    fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "s" => self.p.s = value,
            "beta1" => self.p.beta1 = value,
            "beta2" => self.p.beta2 = value,
            "beta3" => self.p.beta3 = value,
            "coupling" => self.coupling = Coupling::Fixed(value),
            _ => return Err(Error::UnknownParameter(name.to_string())),
        }
        Ok(())
    }

    fn f(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_row_slice(&self.eval(&as4(x)))
    }

    fn df(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let j = self.jac(&as4(x));
        DMatrix::from_fn(4, 4, |r, c| j[r][c])
    }

    fn d2f(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let b1 = self.p.beta1;
        let g = self.gamma();
        let (x1, x2) = (x[0], x[1]);
        let mixed = u[0] * v[1] + u[1] * v[0];
        DVector::from_row_slice(&[
            0.0,
            0.0,
            -6.0 * x1 * u[0] * v[0] - 2.0 * g * x2 * mixed - 2.0 * g * x1 * u[1] * v[1],
            -2.0 * b1 * x2 * u[0] * v[0] - 2.0 * b1 * x1 * mixed
                - (12.0 * b1 * x2 + 2.0 * self.p.beta3) * u[1] * v[1],
        ])
    }

    fn d3f(&self, _x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let b1 = self.p.beta1;
        let g = self.gamma();
        DVector::from_row_slice(&[
            0.0,
            0.0,
            -6.0 * u[0] * v[0] * w[0] - 2.0 * g * (u[0] * v[1] * w[1] + u[1] * v[0] * w[1] + u[1] * v[1] * w[0]),
            -2.0 * b1 * (u[0] * v[0] * w[1] + u[0] * v[1] * w[0] + u[1] * v[0] * w[0]) - 12.0 * b1 * u[1] * v[1] * w[1],
        ])
    }

    fn dmu_f(&self, x: &DVector<f64>, name: &str) -> Result<DVector<f64>> {
        let (x1, x2) = (x[0], x[1]);
        let tied = matches!(self.coupling, Coupling::Beta1);
        let v = match name {
            "s" => [0.0, 0.0, 0.0, x2],
            "beta1" => [0.0, 0.0, if tied { -x1 * x2 * x2 } else { 0.0 }, -(x1 * x1 + 2.0 * x2 * x2) * x2],
            "beta2" => [0.0, 0.0, -x2, -x1],
            "beta3" => [0.0, 0.0, 0.0, -x2 * x2],
            "coupling" if !tied => [0.0, 0.0, -x1 * x2 * x2, 0.0],
            _ => return Err(Error::UnknownParameter(name.to_string())),
        };
        Ok(DVector::from_row_slice(&v))
    }

    fn dmu_df(&self, x: &DVector<f64>, name: &str, v: &DVector<f64>) -> Result<DVector<f64>> {
        let (x1, x2) = (x[0], x[1]);
        let tied = matches!(self.coupling, Coupling::Beta1);
        let (r3, r4): ([f64; 2], [f64; 2]) = match name {
            "s" => ([0.0, 0.0], [0.0, 1.0]),
            "beta1" => (
                if tied { [-x2 * x2, -2.0 * x1 * x2] } else { [0.0, 0.0] },
                [-2.0 * x1 * x2, -(x1 * x1 + 6.0 * x2 * x2)],
            ),
            "beta2" => ([0.0, -1.0], [-1.0, 0.0]),
            "beta3" => ([0.0, 0.0], [0.0, -2.0 * x2]),
            "coupling" if !tied => ([-x2 * x2, -2.0 * x1 * x2], [0.0, 0.0]),
            _ => return Err(Error::UnknownParameter(name.to_string())),
        };
        Ok(DVector::from_row_slice(&[
            0.0,
            0.0,
            r3[0] * v[0] + r3[1] * v[1],
            r4[0] * v[0] + r4[1] * v[1],
        ]))
    }

    fn involution(&self) -> DMatrix<f64> {
        involutions().0
    }

    fn box_clone(&self) -> Box<dyn ReversibleSystem> {
        Box::new(*self)
    }
}

/// (R, S, S′): reverser, the x₂-reflection and the x₁-reflection.
pub fn involutions() -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let d = |a: [f64; 4]| DMatrix::from_diagonal(&DVector::from_row_slice(&a));
    (d([1.0, 1.0, -1.0, -1.0]), d([1.0, -1.0, 1.0, -1.0]), d([-1.0, 1.0, -1.0, 1.0]))
}

/// β₁ at which the x₂-block of the variational equation has a bounded even
/// solution: ((2√s + 4ℓ + 1)² − 1)/8.
pub fn resonance_beta1(s: f64, ell: u32) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("s must be positive, got {s}")));
    }
    let a = 2.0 * s.sqrt() + 4.0 * ell as f64 + 1.0;
    Ok((a * a - 1.0) / 8.0)
}

/// Homoclinic orbit of the invariant plane at β₂ = 0:
/// (±√2 sech t, 0, ∓√2 sech t tanh t, 0).
pub fn homoclinic_exact(t: f64, sign: f64) -> DVector<f64> {
    let sq2 = std::f64::consts::SQRT_2;
    let (sh, th) = (sech(t), t.tanh());
    let sg = sign.signum();
    DVector::from_row_slice(&[sg * sq2 * sh, 0.0, -sg * sq2 * sh * th, 0.0])
}

/// Coefficients c_k of the bounded even solution Σ c_k sech^{√s+2k} t of
/// ξ'' = (s − 2β₁ sech² t) ξ at the ℓ-th resonance, with c₀ = 1.
///
/// Substituting the series gives the terminating recurrence
/// c_{k+1} [(x+2k+2)² − x²] = c_k [(x+2k)(x+2k+1) − 2β₁], x = √s.
pub fn xi2_coefficients(s: f64, ell: u32) -> Result<Vec<f64>> {
    let two_beta1 = 2.0 * resonance_beta1(s, ell)?;
    let x = s.sqrt();
    let mut c = vec![1.0];
    for k in 0..ell {
        let p = x + 2.0 * k as f64;
        let next = c[k as usize] * (p * (p + 1.0) - two_beta1) / ((p + 2.0).powi(2) - x * x);
        c.push(next);
    }
    Ok(c)
}

/// Evaluates (Σ c_k sech^{x+2k}, d/dt of it).
pub fn sech_series(coeffs: &[f64], x: f64, t: f64) -> (f64, f64) {
    let sh = sech(t);
    let th = t.tanh();
    let (mut val, mut der) = (0.0, 0.0);
    for (k, c) in coeffs.iter().enumerate() {
        let p = x + 2.0 * k as f64;
        let term = c * sh.powf(p);
        val += term;
        der -= p * term * th;
    }
    (val, der)
}

/// Bounded even solution (ξ̄₂, ξ̄₄) of the x₂-block at β₁ = resonance_beta1(s, ℓ),
/// normalized by its leading coefficient (ξ̄₂ ~ 2^{√s} e^{−√s|t|}).
pub fn bounded_xi2(t: f64, s: f64, ell: u32) -> Result<(f64, f64)> {
    if ell > 2 {
        return Err(Error::Unsupported(format!("bounded solutions are provided for ℓ ≤ 2, got {ell}")));
    }
    let c = xi2_coefficients(s, ell)?;
    Ok(sech_series(&c, s.sqrt(), t))
}

/// Potential of the x₁-block: ξ₁'' = (1 − 6 sech² t) ξ₁.
pub fn block1_potential(t: f64) -> f64 {
    1.0 - 6.0 * sech(t).powi(2)
}

/// Potential of the x₂-block: ξ₂'' = (s − 2β₁ sech² t) ξ₂.
pub fn block2_potential(t: f64, s: f64, beta1: f64) -> f64 {
    s - 2.0 * beta1 * sech(t).powi(2)
}

/// Odd bounded solution of the x₁-block, (ẋ₁ʰ, ẍ₁ʰ).
pub fn block1_bounded(t: f64) -> [f64; 2] {
    let sq2 = std::f64::consts::SQRT_2;
    let (sh, th) = (sech(t), t.tanh());
    [-sq2 * sh * th, sq2 * (sh - 2.0 * sh * sh * sh)]
}

/// Even unbounded mate of [`block1_bounded`] with Wronskian 1.
///
/// From y = cosh t/2 − (3/2) sech t + (3t/2) sech t tanh t, which satisfies
/// W(sech·tanh, y) = 1; the mate is −y/√2.
pub fn block1_even_mate(t: f64) -> [f64; 2] {
    let sq2 = std::f64::consts::SQRT_2;
    let (sh, th) = (sech(t), t.tanh());
    let y = 0.5 * t.cosh() - 1.5 * sh + 1.5 * t * sh * th;
    let dy = 0.5 * t.sinh() + 3.0 * sh * th + 1.5 * t * sh * (2.0 * sh * sh - 1.0);
    [-y / sq2, -dy / sq2]
}

/// Values of a planar fundamental pair and its adjoint pair at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarValues {
    pub phi_b: [f64; 2],
    pub phi_u: [f64; 2],
    pub psi_b: [f64; 2],
    pub psi_u: [f64; 2],
}

impl PlanarValues {
    fn from_pair(phi_b: [f64; 2], phi_u: [f64; 2]) -> Self {
        // Columns of Φ^{-T} for det Φ = 1.
        PlanarValues {
            phi_b,
            phi_u,
            psi_b: [phi_u[1], -phi_u[0]],
            psi_u: [-phi_b[1], phi_b[0]],
        }
    }

    /// φ_b ∧ φ_u.
    pub fn wronskian(&self) -> f64 {
        self.phi_b[0] * self.phi_u[1] - self.phi_b[1] * self.phi_u[0]
    }
}

/// Exponential rates of the planar solutions at ±∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRates {
    /// φ_b ~ e^{−decay |t|}.
    pub decay: f64,
    /// φ_u ~ e^{growth |t|}.
    pub growth: f64,
}

/// Fundamental and adjoint solutions of one planar block, tabulated on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanarFundamentalSet {
    pub block: u8,
    pub grid: Vec<f64>,
    pub values: Vec<PlanarValues>,
    pub rates: GrowthRates,
}

impl PlanarFundamentalSet {
    /// Largest deviation of the Wronskian from 1 over the grid.
    pub fn wronskian_drift(&self) -> f64 {
        self.values.iter().map(|v| (v.wronskian() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Block 1: closed-form pair. Block 2 (β₁ on resonance, β₂ = 0): the bounded
/// series solution and an odd mate with Wronskian 1 integrated from t = 0.
pub fn planar_fundamentals(block: u8, p: &ExampleParams, grid: &[f64]) -> Result<PlanarFundamentalSet> {
    if p.beta2 != 0.0 {
        return Err(Error::Domain("the planar blocks decouple only for β₂ = 0".into()));
    }
    match block {
        1 => Ok(PlanarFundamentalSet {
            block,
            grid: grid.to_vec(),
            values: grid
                .iter()
                .map(|&t| PlanarValues::from_pair(block1_bounded(t), block1_even_mate(t)))
                .collect(),
            rates: GrowthRates { decay: 1.0, growth: 1.0 },
        }),
        2 => {
            if !p.is_resonant() {
                return Err(Error::OffResonance(format!(
                    "β₁ = {} is not the ℓ = {} resonance value for s = {}",
                    p.beta1, p.ell, p.s
                )));
            }
            let c = xi2_coefficients(p.s, p.ell)?;
            let x = p.s.sqrt();
            let (b0, _) = sech_series(&c, x, 0.0);
            let (s, beta1) = (p.s, p.beta1);
            let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = block2_potential(t, s, beta1) * y[0];
            };
            // Odd mate: (0, 1/ξ̄₂(0)) gives W = 1. Integrate outward from 0 in
            // each direction, visiting grid points in order of |t|.
            let mut order: Vec<usize> = (0..grid.len()).collect();
            order.sort_by(|&a, &b| grid[a].abs().total_cmp(&grid[b].abs()));
            let mut mate = vec![[0.0; 2]; grid.len()];
            let mut fwd = (0.0, vec![0.0, 1.0 / b0]);
            let mut bwd = (0.0, vec![0.0, 1.0 / b0]);
            for i in order {
                let t = grid[i];
                let state = if t >= 0.0 { &mut fwd } else { &mut bwd };
                let y = integrate_real(rhs, state.0, t, &state.1, Tolerance::default())?;
                *state = (t, y);
                mate[i] = [state.1[0], state.1[1]];
            }
            let values = grid
                .iter()
                .zip(&mate)
                .map(|(&t, m)| {
                    let (v, d) = sech_series(&c, x, t);
                    PlanarValues::from_pair([v, d], *m)
                })
                .collect();
            Ok(PlanarFundamentalSet { block, grid: grid.to_vec(), values, rates: GrowthRates { decay: x, growth: x } })
        }
        _ => Err(Error::Usage(format!("block must be 1 or 2, got {block}"))),
    }
}
