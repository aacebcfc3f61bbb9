//! Melnikov-type coefficients deciding the bifurcation of a symmetric
//! homoclinic orbit when the variational equation has a second bounded
//! solution φ₂, and the resulting classification.
//!
//! With ψ the bounded adjoint solution paired with φ₂ and ⟨·,·⟩ the system's
//! adapted inner product:
//!
//! * a₂ = ∫⟨ψ, D_μ f(xʰ)⟩,
//! * b₂ = ½∫⟨ψ, D²f(xʰ)(φ₂, φ₂)⟩,
//! * ā₂ = ∫⟨ψ, D_μD_x f(xʰ) φ₂ + D²f(xʰ)(ξ^μ, φ₂)⟩,
//! * b̄₂ = ∫⟨ψ, ⅙D³f(xʰ)(φ₂, φ₂, φ₂) + D²f(xʰ)(ξ^α, φ₂)⟩,
//!
//! where ξ^μ and ξ^α are bounded symmetric solutions of the inhomogeneous
//! variational equations forced by D_μ f and ½D²f(φ₂, φ₂).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::duffing::{block1_bounded, block1_even_mate, homoclinic_exact, sech_series, xi2_coefficients, Duffing4d};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_line, Cumulative, LineIntegral, Window};
use crate::special::gamma;
use crate::system::{fix_r_projector, ReversibleSystem};

/// Relative threshold below which a coefficient counts as zero.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Default panel width for the composite Gauss–Legendre rule.
pub const PANEL_WIDTH: f64 = 0.5;

/// A quadrature-computed coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub value: f64,
    pub abs_error: f64,
    /// ∫|integrand|, the reference for the degeneracy decision.
    pub scale: f64,
}

impl Coefficient {
    pub fn is_zero(&self) -> bool {
        self.value.abs() <= DEGENERACY_TOL * self.scale
    }
}

impl From<LineIntegral> for Coefficient {
    fn from(q: LineIntegral) -> Self {
        Coefficient { value: q.value, abs_error: q.abs_error, scale: q.scale }
    }
}

pub type TimeFn<'a> = Box<dyn Fn(f64) -> DVector<f64> + Send + Sync + 'a>;

/// Orbit, bounded variational solution and bounded adjoint solution.
pub struct MelnikovInputs<'a> {
    pub system: &'a dyn ReversibleSystem,
    pub orbit: TimeFn<'a>,
    pub phi2: TimeFn<'a>,
    pub psi: TimeFn<'a>,
    pub window: Window,
    pub panel_width: f64,
}

/// Consistency of the inputs (all should be at rounding level).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InputDiagnostics {
    /// max_t |⟨ψ, φ₂' − Df φ₂⟩| with φ₂' by central differences.
    pub variational_residual: f64,
    /// max_t |ψ' + (Df)ᵀψ| (Euclidean case) by central differences.
    pub adjoint_residual: f64,
    /// Fix(−R) coordinates of φ₂(0).
    pub phi2_symmetry: f64,
}

impl<'a> MelnikovInputs<'a> {
    fn inner(&self, gram: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a.transpose() * gram * b)[0]
    }

    fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<Coefficient> {
        Ok(integrate_line(&f, self.window, self.panel_width)?.into())
    }

    pub fn diagnostics(&self) -> Result<InputDiagnostics> {
        let h = 1e-5;
        let g = self.system.inner_product();
        let (mut ve, mut adj) = (0.0f64, 0.0f64);
        for k in 0..41 {
            let t = -8.0 + 0.4 * k as f64;
            let x = (self.orbit)(t);
            let a = self.system.df(&x);
            let dphi = ((self.phi2)(t + h) - (self.phi2)(t - h)) / (2.0 * h);
            let dpsi = ((self.psi)(t + h) - (self.psi)(t - h)) / (2.0 * h);
            let psi = (self.psi)(t);
            ve = ve.max(self.inner(&g, &psi, &(dphi - &a * (self.phi2)(t))).abs());
            // For a Gram matrix G the adjoint equation reads Gψ' = −AᵀGψ.
            adj = adj.max((&g * dpsi + a.transpose() * &g * psi).amax());
        }
        let (_, anti) = fix_r_projector(self.system)?;
        Ok(InputDiagnostics {
            variational_residual: ve,
            adjoint_residual: adj,
            phi2_symmetry: (anti * (self.phi2)(0.0)).amax(),
        })
    }
}

/// a₂ and b₂ for the parameter `param`.
pub fn compute_a2_b2(inputs: &MelnikovInputs, param: &str) -> Result<(Coefficient, Coefficient)> {
    let sys = inputs.system;
    let g = sys.inner_product();
    // Parameter name is validated up front so that errors are not swallowed
    // inside the integrand.
    sys.dmu_f(&(inputs.orbit)(0.0), param)?;
    let a2 = inputs.integrate(|t| {
        let x = (inputs.orbit)(t);
        let d = sys.dmu_f(&x, param).expect("parameter validated");
        inputs.inner(&g, &(inputs.psi)(t), &d)
    })?;
    let b2 = inputs.integrate(|t| {
        let x = (inputs.orbit)(t);
        let p = (inputs.phi2)(t);
        0.5 * inputs.inner(&g, &(inputs.psi)(t), &sys.d2f(&x, &p, &p))
    })?;
    Ok((a2, b2))
}

/// ā₂ for the parameter `param`, given the bounded solution ξ^μ of
/// ξ' = Df ξ + D_μ f.
pub fn compute_abar2(inputs: &MelnikovInputs, param: &str, xi_mu: &(dyn Fn(f64) -> DVector<f64> + Sync)) -> Result<Coefficient> {
    let sys = inputs.system;
    let g = sys.inner_product();
    sys.dmu_df(&(inputs.orbit)(0.0), param, &(inputs.phi2)(0.0))?;
    inputs.integrate(|t| {
        let x = (inputs.orbit)(t);
        let p = (inputs.phi2)(t);
        let v = sys.dmu_df(&x, param, &p).expect("parameter validated") + sys.d2f(&x, &xi_mu(t), &p);
        inputs.inner(&g, &(inputs.psi)(t), &v)
    })
}

/// b̄₂ given the bounded symmetric solution ξ^α of ξ' = Df ξ + ½D²f(φ₂, φ₂).
pub fn compute_bbar2(inputs: &MelnikovInputs, xi_alpha: &(dyn Fn(f64) -> DVector<f64> + Sync)) -> Result<Coefficient> {
    let sys = inputs.system;
    let g = sys.inner_product();
    inputs.integrate(|t| {
        let x = (inputs.orbit)(t);
        let p = (inputs.phi2)(t);
        let v = sys.d3f(&x, &p, &p, &p) / 6.0 + sys.d2f(&x, &xi_alpha(t), &p);
        inputs.inner(&g, &(inputs.psi)(t), &v)
    })
}

// ---------------------------------------------------------------------------
// Classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SaddleNode,
    Transcritical,
    Pitchfork,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "saddle_node" => Ok(Mode::SaddleNode),
            "transcritical" => Ok(Mode::Transcritical),
            "pitchfork" => Ok(Mode::Pitchfork),
            other => Err(Error::Usage(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "persistence")]
    Persistence,
    #[serde(rename = "saddle-node-super")]
    SaddleNodeSuper,
    #[serde(rename = "saddle-node-sub")]
    SaddleNodeSub,
    #[serde(rename = "transcritical")]
    Transcritical,
    #[serde(rename = "pitchfork-super")]
    PitchforkSuper,
    #[serde(rename = "pitchfork-sub")]
    PitchforkSub,
    #[serde(rename = "degenerate")]
    Degenerate,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Persistence => "persistence",
            Classification::SaddleNodeSuper => "saddle-node-super",
            Classification::SaddleNodeSub => "saddle-node-sub",
            Classification::Transcritical => "transcritical",
            Classification::PitchforkSuper => "pitchfork-super",
            Classification::PitchforkSub => "pitchfork-sub",
            Classification::Degenerate => "degenerate",
        }
    }

    /// Sign of μ − μ* on the bifurcating branch near the bifurcation point:
    /// +1 supercritical, −1 subcritical, `None` when both sides are populated
    /// or the case is degenerate.
    pub fn branch_side(&self) -> Option<f64> {
        match self {
            Classification::SaddleNodeSuper | Classification::PitchforkSuper => Some(1.0),
            Classification::SaddleNodeSub | Classification::PitchforkSub => Some(-1.0),
            _ => None,
        }
    }
}

/// Available coefficients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub a2: Option<Coefficient>,
    pub b2: Option<Coefficient>,
    pub abar2: Option<Coefficient>,
    pub bbar2: Option<Coefficient>,
}

fn need(c: Option<Coefficient>, name: &str, mode: Mode) -> Result<Coefficient> {
    c.ok_or_else(|| Error::Usage(format!("{name} is required for {mode:?}")))
}

/// Saddle-node: a₂b₂ < 0 supercritical. Transcritical: ā₂, b₂ ≠ 0.
/// Pitchfork: ā₂b̄₂ < 0 supercritical. Any deciding coefficient at zero
/// (relative to its integrand scale) gives `Degenerate`.
pub fn classify(c: &Coefficients, mode: Mode) -> Result<Classification> {
    let (first, second) = match mode {
        Mode::SaddleNode => (need(c.a2, "a2", mode)?, need(c.b2, "b2", mode)?),
        Mode::Transcritical => (need(c.abar2, "abar2", mode)?, need(c.b2, "b2", mode)?),
        Mode::Pitchfork => (need(c.abar2, "abar2", mode)?, need(c.bbar2, "bbar2", mode)?),
    };
    if first.is_zero() || second.is_zero() {
        return Ok(Classification::Degenerate);
    }
    let product = first.value * second.value;
    Ok(match mode {
        Mode::SaddleNode if product < 0.0 => Classification::SaddleNodeSuper,
        Mode::SaddleNode => Classification::SaddleNodeSub,
        Mode::Transcritical => Classification::Transcritical,
        Mode::Pitchfork if product < 0.0 => Classification::PitchforkSuper,
        Mode::Pitchfork => Classification::PitchforkSub,
    })
}

// ---------------------------------------------------------------------------
// Closed form for the example

/// P₀, P₁, P₂ numerators of the closed-form b̄₂, coefficients from x⁰ upward.
const P_COEFFS: [&[f64]; 3] = [
    &[0.0, -1.0, -1.0, 1.0],
    &[-630.0, -2427.0, -3502.0, -1971.0, 115.0, 530.0, 145.0],
    &[
        -12_012_000.0,
        -49_776_200.0,
        -429_952_220.0,
        -76_574_432.0,
        -15_422_381.0,
        -4_949_646.0,
        2_451_387.0,
        1_310_501.0,
        242_984.0,
        16_627.0,
    ],
];
const P2_FACTOR: f64 = 27.0;

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

/// P_ℓ(x) as printed.
pub fn closed_form_numerator(ell: u32, x: f64) -> Result<f64> {
    match ell {
        0 | 1 => Ok(horner(P_COEFFS[ell as usize], x)),
        2 => Ok(P2_FACTOR * horner(P_COEFFS[2], x)),
        _ => Err(Error::Unsupported(format!("closed form only for ℓ ≤ 2, got {ell}"))),
    }
}

/// Q_ℓ(x) = ∏_{j≤ℓ}(x+j)³ ∏_{j≤4ℓ}(4x+2j−1), Q₀ = 1.
pub fn closed_form_denominator(ell: u32, x: f64) -> f64 {
    let a: f64 = (1..=ell).map(|j| (x + j as f64).powi(3)).product();
    let b: f64 = (1..=4 * ell).map(|j| 4.0 * x + 2.0 * j as f64 - 1.0).product();
    a * b
}

/// Closed-form b̄₂ = √π Γ(2√s)/Γ(2√s + ½) · P_ℓ(√s)/Q_ℓ(√s). It describes the
/// example with coupling γ = β₁, β₂ = β₃ = 0, β₁ on the ℓ-th resonance.
pub fn compute_bbar2_closed(s: f64, ell: u32) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("s must be positive, got {s}")));
    }
    let x = s.sqrt();
    let g = std::f64::consts::PI.sqrt() * gamma(2.0 * x) / gamma(2.0 * x + 0.5);
    Ok(g * closed_form_numerator(ell, x)? / closed_form_denominator(ell, x))
}

// ---------------------------------------------------------------------------
// Example specialisation

/// Bounded data of the example at a resonance: the orbit in the invariant
/// plane, φ₂ = (0, ξ̄₂, 0, ξ̄₄) and ψ = (0, −ξ̄₄, 0, ξ̄₂).
pub fn example_inputs<'a>(sys: &'a Duffing4d, window: Window) -> Result<MelnikovInputs<'a>> {
    let p = sys.p;
    if !p.is_resonant() {
        return Err(Error::OffResonance(format!(
            "β₁ = {} is not the ℓ = {} resonance value for s = {}",
            p.beta1, p.ell, p.s
        )));
    }
    let c = xi2_coefficients(p.s, p.ell)?;
    let c2 = c.clone();
    let x = p.s.sqrt();
    Ok(MelnikovInputs {
        system: sys,
        orbit: Box::new(|t| homoclinic_exact(t, 1.0)),
        phi2: Box::new(move |t| {
            let (v, d) = sech_series(&c, x, t);
            DVector::from_row_slice(&[0.0, v, 0.0, d])
        }),
        psi: Box::new(move |t| {
            let (v, d) = sech_series(&c2, x, t);
            DVector::from_row_slice(&[0.0, -d, 0.0, v])
        }),
        window,
        panel_width: PANEL_WIDTH,
    })
}

/// First component of ξ^α for the example: the even bounded solution of
/// ξ₁'' = (1 − 6 sech² t) ξ₁ + g(t) with g = ½D²f₃(xʰ)(φ₂, φ₂), built by
/// variation of parameters with the Wronskian-1 pair (u_b odd, u_u even):
///
/// ξ₁ = −u_b(t) ∫₀ᵗ u_u g − u_u(t) ∫ₜ^∞ u_b g.
pub struct XiAlpha {
    near: Cumulative<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    far: Cumulative<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    half_width: f64,
}

impl XiAlpha {
    pub fn new(sys: &Duffing4d, half_width: f64) -> Result<Self> {
        let p = sys.p;
        let c = xi2_coefficients(p.s, p.ell)?;
        let x = p.s.sqrt();
        let gamma = sys.gamma();
        let forcing = move |t: f64| {
            let (v, _) = sech_series(&c, x, t);
            // ½ D²f₃(xʰ)(φ₂, φ₂) = −γ x₁ʰ ξ̄₂²
            -gamma * homoclinic_exact(t, 1.0)[0] * v * v
        };
        let f1 = forcing.clone();
        let near: Box<dyn Fn(f64) -> f64 + Send + Sync> = Box::new(move |t| block1_even_mate(t)[0] * f1(t));
        let far: Box<dyn Fn(f64) -> f64 + Send + Sync> = Box::new(move |t| block1_bounded(t)[0] * forcing(t));
        Ok(XiAlpha {
            near: Cumulative::new(near, half_width, 0.25),
            far: Cumulative::new(far, half_width, 0.25),
            half_width,
        })
    }

    /// (ξ₁, ξ₁'). The boundary terms of the differentiated integrals cancel,
    /// so ξ₁' uses the derivatives of the fundamental pair. ξ₁ is even, so
    /// negative times are reflected to avoid cancellation against the growing
    /// mate; beyond the table the solution is below rounding and returned as 0.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        if t < 0.0 {
            let (v, d) = self.eval(-t);
            return (v, -d);
        }
        if t > self.half_width {
            return (0.0, 0.0);
        }
        let ub = block1_bounded(t);
        let uu = block1_even_mate(t);
        let i_near = self.near.from_zero(t);
        let i_far = self.far.to_right_end(t);
        (-ub[0] * i_near - uu[0] * i_far, -ub[1] * i_near - uu[1] * i_far)
    }

    /// ξ^α as a state vector (ξ₁, 0, ξ₁', 0).
    pub fn vector(&self, t: f64) -> DVector<f64> {
        let (a, b) = self.eval(t);
        DVector::from_row_slice(&[a, 0.0, b, 0.0])
    }
}

/// Window half-width used for the ξ^α tables: the tail integrals must reach
/// the point where everything has decayed below rounding.
const XI_ALPHA_HALF_WIDTH: f64 = 40.0;

fn require_pitchfork_setting(sys: &Duffing4d) -> Result<()> {
    if sys.p.beta2 != 0.0 || sys.p.beta3 != 0.0 {
        return Err(Error::Domain("b̄₂ is defined for β₂ = β₃ = 0".into()));
    }
    if !sys.p.is_resonant() {
        return Err(Error::OffResonance(format!("β₁ = {} is off resonance", sys.p.beta1)));
    }
    Ok(())
}

/// b̄₂ for the example by the specialised formula
/// b̄₂ = −2β₁∫x₁ʰ ξ₁^α ξ̄₂² − 2β₁∫ξ̄₂⁴.
pub fn compute_bbar2_quadrature(sys: &Duffing4d, window: Window) -> Result<Coefficient> {
    require_pitchfork_setting(sys)?;
    let drift = [-6.0, -1.0, 0.0, 2.5, 7.0]
        .iter()
        .map(|&t| {
            let (b, u) = (block1_bounded(t), block1_even_mate(t));
            (b[0] * u[1] - b[1] * u[0] - 1.0).abs()
        })
        .fold(0.0, f64::max);
    if drift > 1e-8 {
        return Err(Error::NumericalQuality(format!("Wronskian drift {drift:.2e}")));
    }
    let p = sys.p;
    let c = xi2_coefficients(p.s, p.ell)?;
    let x = p.s.sqrt();
    let xa = XiAlpha::new(sys, XI_ALPHA_HALF_WIDTH)?;
    let b1 = p.beta1;
    let q = integrate_line(
        &|t: f64| {
            let (v, _) = sech_series(&c, x, t);
            let v2 = v * v;
            -2.0 * b1 * homoclinic_exact(t, 1.0)[0] * xa.eval(t).0 * v2 - 2.0 * b1 * v2 * v2
        },
        window,
        PANEL_WIDTH,
    )?;
    Ok(q.into())
}

/// Full report for the example at its bifurcation point (β₂ = 0, β₁ on the
/// ℓ-th resonance unless stated otherwise).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MelnikovReport {
    pub mode: Mode,
    pub s: f64,
    pub ell: u32,
    pub beta1: f64,
    pub beta3: f64,
    pub coupling: f64,
    pub coefficients: Coefficients,
    /// Closed-form b̄₂ when the configuration matches its hypotheses.
    pub bbar2_closed: Option<f64>,
    pub classification: Classification,
}

impl MelnikovReport {
    /// JSON with top-level coefficient values and their error estimates.
    pub fn to_json(&self) -> serde_json::Value {
        let v = |c: Option<Coefficient>| c.map(|c| c.value);
        let e = |c: Option<Coefficient>| c.map(|c| c.abs_error);
        let c = &self.coefficients;
        serde_json::json!({
            "a2": v(c.a2),
            "b2": v(c.b2),
            "abar2": v(c.abar2),
            "bbar2": v(c.bbar2),
            "bbar2_closed": self.bbar2_closed,
            "classification": self.classification.as_str(),
            "errors": {"a2": e(c.a2), "b2": e(c.b2), "abar2": e(c.abar2), "bbar2": e(c.bbar2)},
            "scales": {
                "a2": c.a2.map(|c| c.scale),
                "b2": c.b2.map(|c| c.scale),
                "abar2": c.abar2.map(|c| c.scale),
                "bbar2": c.bbar2.map(|c| c.scale),
            },
            "inputs": {
                "mode": self.mode,
                "s": self.s,
                "ell": self.ell,
                "beta1": self.beta1,
                "beta3": self.beta3,
                "coupling": self.coupling,
            },
        })
    }
}

/// Computes the coefficients needed by `mode` for the example and classifies.
/// β₂ is set to 0 (the bifurcation point); for the pitchfork β₃ must be 0.
/// Off resonance there is no second bounded solution and the orbit persists.
pub fn example_report(sys: &Duffing4d, mode: Mode, window: Window) -> Result<MelnikovReport> {
    let mut sys = *sys;
    sys.p.beta2 = 0.0;
    let mut report = MelnikovReport {
        mode,
        s: sys.p.s,
        ell: sys.p.ell,
        beta1: sys.p.beta1,
        beta3: sys.p.beta3,
        coupling: sys.gamma(),
        coefficients: Coefficients::default(),
        bbar2_closed: None,
        classification: Classification::Persistence,
    };
    if !sys.p.is_resonant() {
        return Ok(report);
    }
    let inputs = example_inputs(&sys, window)?;
    let mut c = Coefficients::default();
    match mode {
        Mode::SaddleNode => {
            let (a2, b2) = compute_a2_b2(&inputs, "beta2")?;
            c.a2 = Some(a2);
            c.b2 = Some(b2);
        }
        Mode::Transcritical => {
            let (_, b2) = compute_a2_b2(&inputs, "beta1")?;
            let zero = |_: f64| DVector::zeros(4);
            c.abar2 = Some(compute_abar2(&inputs, "beta1", &zero)?);
            c.b2 = Some(b2);
        }
        Mode::Pitchfork => {
            require_pitchfork_setting(&sys)?;
            let zero = |_: f64| DVector::zeros(4);
            c.abar2 = Some(compute_abar2(&inputs, "beta1", &zero)?);
            c.bbar2 = Some(compute_bbar2_quadrature(&sys, window)?);
            if sys.gamma() == sys.p.beta1 && sys.p.ell <= 2 {
                report.bbar2_closed = Some(compute_bbar2_closed(sys.p.s, sys.p.ell)?);
            }
        }
    }
    report.coefficients = c;
    report.classification = classify(&c, mode)?;
    Ok(report)
}
