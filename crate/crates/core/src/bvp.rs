//! Symmetric homoclinic orbits as a boundary value problem on [−T, 0].
//!
//! The orbit is discretized by 3-stage Gauss collocation on a mesh
//! −T = t₀ < … < t_N = 0. Collocation with Gauss points on one interval is the
//! same map as one step of the 3-stage Gauss Runge–Kutta method, so the
//! per-interval defect is x_{i+1} − Φ_{h_i}(x_i) with Φ the (implicit) Gauss
//! step. Boundary rows are L_s x(−T) = 0 and the Fix(−R) coordinates of x(0).
//!
//! Newton does not work on all N+1 node states. Consecutive intervals are
//! grouped into segments no longer than [`BvpSettings::segment_length`]; the
//! unknowns are the states at segment boundaries and interior nodes follow by
//! stepping. Within one time unit the saddle amplifies by at most e^{√s},
//! so the condensed system keeps the conditioning of the full collocation
//! system while its Jacobian is small enough for a dense factorization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{build_ls, equilibrium_spectrum, fix_r_projector, ParamMap, ReversibleSystem};

const SQ15: f64 = 3.872_983_346_207_417;

/// Gauss–Legendre 3-stage Butcher tableau.
const GAUSS_C: [f64; 3] = [0.5 - SQ15 / 10.0, 0.5, 0.5 + SQ15 / 10.0];
const GAUSS_B: [f64; 3] = [5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0];
const GAUSS_A: [[f64; 3]; 3] = [
    [5.0 / 36.0, 2.0 / 9.0 - SQ15 / 15.0, 5.0 / 36.0 - SQ15 / 30.0],
    [5.0 / 36.0 + SQ15 / 24.0, 2.0 / 9.0, 5.0 / 36.0 - SQ15 / 24.0],
    [5.0 / 36.0 + SQ15 / 30.0, 2.0 / 9.0 + SQ15 / 15.0, 5.0 / 36.0],
];

/// Numerical settings of the boundary value solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BvpSettings {
    /// Half-interval length T.
    pub t_half: f64,
    /// Number of mesh intervals on [−T, 0].
    pub intervals: usize,
    /// Newton stops once the residual ∞-norm is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Maximal time span of one condensation segment.
    pub segment_length: f64,
    /// Nontriviality guard: δ_min = `trivial_ratio` · ‖guess‖.
    pub trivial_ratio: f64,
}

impl Default for BvpSettings {
    fn default() -> Self {
        BvpSettings { t_half: 20.0, intervals: 400, tol: 1e-10, max_iter: 25, segment_length: 1.0, trivial_ratio: 1e-3 }
    }
}

impl BvpSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_half > 0.0) || self.intervals == 0 || !(self.tol > 0.0) || !(self.segment_length > 0.0) {
            return Err(Error::Config(format!("invalid BVP settings {self:?}")));
        }
        Ok(())
    }
}

/// Result of one Gauss step, optionally with sensitivities.
pub struct GaussStep {
    pub x: DVector<f64>,
    /// ∂x_new/∂x.
    pub dx: Option<DMatrix<f64>>,
    /// ∂x_new/∂μ for the requested parameter.
    pub dmu: Option<DVector<f64>>,
}

/// One step of the 3-stage Gauss method (equivalently, Gauss collocation on
/// one interval). Stage equations are solved by Newton's method.
pub fn gauss_step(
    system: &dyn ReversibleSystem,
    x: &DVector<f64>,
    h: f64,
    sensitivities: bool,
    param: Option<&str>,
) -> Result<GaussStep> {
    let d = x.len();
    let f0 = system.f(x);
    let mut y: Vec<DVector<f64>> = GAUSS_C.iter().map(|c| x + &f0 * (c * h)).collect();
    let scale = x.amax().max(1.0);
    let mut converged = false;
    for _ in 0..30 {
        let fy: Vec<DVector<f64>> = y.iter().map(|v| system.f(v)).collect();
        let jacs: Vec<DMatrix<f64>> = y.iter().map(|v| system.df(v)).collect();
        let mut g = DVector::zeros(3 * d);
        for j in 0..3 {
            let mut r = &y[j] - x;
            for l in 0..3 {
                r -= &fy[l] * (h * GAUSS_A[j][l]);
            }
            g.rows_mut(j * d, d).copy_from(&r);
        }
        let m = stage_matrix(&jacs, h);
        let delta = m
            .lu()
            .solve(&(-g))
            .ok_or_else(|| Error::NumericalQuality(format!("singular stage system for step h = {h}")))?;
        for j in 0..3 {
            y[j] += delta.rows(j * d, d);
        }
        if !delta.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("non-finite stage values".into()));
        }
        if delta.amax() <= 1e-15 * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalQuality(format!("stage equations did not converge for h = {h}")));
    }
    let fy: Vec<DVector<f64>> = y.iter().map(|v| system.f(v)).collect();
    let mut xn = x.clone();
    for j in 0..3 {
        xn += &fy[j] * (h * GAUSS_B[j]);
    }
    if !sensitivities && param.is_none() {
        return Ok(GaussStep { x: xn, dx: None, dmu: None });
    }
    let jacs: Vec<DMatrix<f64>> = y.iter().map(|v| system.df(v)).collect();
    let lu = stage_matrix(&jacs, h).lu();
    let dx = if sensitivities {
        let mut rhs = DMatrix::zeros(3 * d, d);
        for j in 0..3 {
            rhs.view_mut((j * d, 0), (d, d)).fill_with_identity();
        }
        let dy = lu.solve(&rhs).ok_or_else(|| Error::NumericalQuality("singular stage system".into()))?;
        let mut out = DMatrix::identity(d, d);
        for j in 0..3 {
            out += &jacs[j] * dy.view((j * d, 0), (d, d)) * (h * GAUSS_B[j]);
        }
        Some(out)
    } else {
        None
    };
    let dmu = match param {
        Some(name) => {
            let fmu: Vec<DVector<f64>> = y.iter().map(|v| system.dmu_f(v, name)).collect::<Result<_>>()?;
            let mut rhs = DVector::zeros(3 * d);
            for j in 0..3 {
                let mut r = DVector::zeros(d);
                for l in 0..3 {
                    r += &fmu[l] * (h * GAUSS_A[j][l]);
                }
                rhs.rows_mut(j * d, d).copy_from(&r);
            }
            let dy = lu.solve(&rhs).ok_or_else(|| Error::NumericalQuality("singular stage system".into()))?;
            let mut out = DVector::zeros(d);
            for j in 0..3 {
                out += (&jacs[j] * dy.rows(j * d, d) + &fmu[j]) * (h * GAUSS_B[j]);
            }
            Some(out)
        }
        None => None,
    };
    Ok(GaussStep { x: xn, dx, dmu })
}

fn stage_matrix(jacs: &[DMatrix<f64>], h: f64) -> DMatrix<f64> {
    let d = jacs[0].nrows();
    let mut m = DMatrix::identity(3 * d, 3 * d);
    for j in 0..3 {
        for l in 0..3 {
            let mut blk = m.view_mut((j * d, l * d), (d, d));
            blk -= &jacs[l] * (h * GAUSS_A[j][l]);
        }
    }
    m
}

/// Orbit summaries used as bifurcation-diagram ordinates. `x2` refers to the
/// second state component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitMeasures {
    pub x2_at_0: f64,
    pub max_x2: f64,
    pub min_x2: f64,
    /// (∫_{−T}^{T} |x(t)|² dt)^{1/2} over the reflected orbit.
    pub l2_norm: f64,
}

/// A converged symmetric homoclinic orbit on the half interval [−T, 0].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomoclinicOrbit {
    pub mesh: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub params: ParamMap,
    /// ‖L_s x(−T)‖∞.
    pub projection_residual: f64,
    /// ‖P₋ x(0)‖∞ with P₋ the Fix(−R) coordinates.
    pub symmetry_residual: f64,
    /// ∞-norm of the per-interval collocation defects.
    pub collocation_residual: f64,
    pub newton_iterations: usize,
    pub measures: OrbitMeasures,
    /// Involution used to reconstruct x(t) = R x(−t) on [0, T].
    pub involution: DMatrix<f64>,
}

impl HomoclinicOrbit {
    pub fn t_half(&self) -> f64 {
        -self.mesh[0]
    }

    /// Nodes and states on the full interval [−T, T].
    pub fn full_orbit(&self) -> (Vec<f64>, Vec<DVector<f64>>) {
        let mut ts = self.mesh.clone();
        let mut xs = self.states.clone();
        for i in (0..self.mesh.len() - 1).rev() {
            ts.push(-self.mesh[i]);
            xs.push(&self.involution * &self.states[i]);
        }
        (ts, xs)
    }

    /// CSV with header `t,x1,…,xn` on the reflected interval [−T, T].
    pub fn to_csv(&self) -> String {
        let (ts, xs) = self.full_orbit();
        let d = self.states[0].len();
        let mut out = String::from("t");
        for k in 1..=d {
            out.push_str(&format!(",x{k}"));
        }
        out.push('\n');
        for (t, x) in ts.iter().zip(&xs) {
            out.push_str(&format!("{t:.12e}"));
            for v in x.iter() {
                out.push_str(&format!(",{v:.12e}"));
            }
            out.push('\n');
        }
        out
    }

    /// JSON sidecar: parameters, residuals and measures.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "params": self.params,
            "t_half": self.t_half(),
            "intervals": self.mesh.len() - 1,
            "projection_residual": self.projection_residual,
            "symmetry_residual": self.symmetry_residual,
            "collocation_residual": self.collocation_residual,
            "newton_iterations": self.newton_iterations,
            "measures": self.measures,
        })
    }

    /// Discrete L² norm of the half orbit (trapezoid rule).
    pub fn half_norm(&self) -> f64 {
        half_norm(&self.mesh, &self.states)
    }

    /// ∫_{−T}^{T} x_k(t)² dt for component k (0-based), trapezoid rule on
    /// the half orbit, doubled. The integrand is even, so the rule has no
    /// endpoint correction terms at t = 0.
    pub fn component_l2_squared(&self, k: usize) -> f64 {
        2.0 * trapezoid(&self.mesh, |i| self.states[i][k].powi(2))
    }

    /// Number of extrema of x₂ on the reflected orbit's half [−T, 0],
    /// counting t = 0 (where x₂ is always critical by symmetry) and ignoring
    /// oscillations below `rel_floor` times max|x₂|.
    pub fn x2_extrema_count(&self, system: &dyn ReversibleSystem, rel_floor: f64) -> usize {
        let amp = self.states.iter().map(|x| x[1].abs()).fold(0.0, f64::max);
        if amp == 0.0 {
            return 0;
        }
        let slope: Vec<f64> = self.states.iter().map(|x| system.f(x)[1]).collect();
        let mut count = 1;
        let n = self.states.len();
        // sign changes of ẋ₂ strictly inside (−T, 0)
        let mut last_sign = 0.0;
        for i in 0..n - 1 {
            if self.states[i][1].abs() < rel_floor * amp {
                continue;
            }
            let sgn = slope[i].signum();
            if slope[i] != 0.0 {
                if last_sign != 0.0 && sgn != last_sign {
                    count += 1;
                }
                last_sign = sgn;
            }
        }
        count
    }
}

fn trapezoid(mesh: &[f64], val: impl Fn(usize) -> f64) -> f64 {
    (0..mesh.len() - 1).map(|i| 0.5 * (mesh[i + 1] - mesh[i]) * (val(i) + val(i + 1))).sum()
}

fn half_norm(mesh: &[f64], states: &[DVector<f64>]) -> f64 {
    trapezoid(mesh, |i| states[i].norm_squared()).sqrt()
}

/// x₂(0), extrema of x₂ over the reflected orbit and the L² norm.
///
/// Interior extrema are located between nodes where ẋ₂ changes sign and
/// refined by a secant iteration on the sub-step length of a Gauss step, so
/// they inherit the discretization's accuracy. R preserves x₂ for the example;
/// for a general involution the reflected half contributes R-images, which
/// are included as candidates.
pub fn orbit_measures(system: &dyn ReversibleSystem, orbit: &HomoclinicOrbit) -> OrbitMeasures {
    measures_from(system, &orbit.mesh, &orbit.states, &orbit.involution)
}

fn measures_from(
    system: &dyn ReversibleSystem,
    mesh: &[f64],
    states: &[DVector<f64>],
    r: &DMatrix<f64>,
) -> OrbitMeasures {
    let n = states.len();
    let x2_at_0 = states[n - 1][1];
    let mut candidates: Vec<DVector<f64>> = vec![states[0].clone(), states[n - 1].clone()];
    let slope = |x: &DVector<f64>| system.f(x)[1];
    let mut s_prev = slope(&states[0]);
    for i in 0..n - 1 {
        let s_next = slope(&states[i + 1]);
        if s_prev != 0.0 && s_next != 0.0 && s_prev.signum() != s_next.signum() {
            candidates.push(refine_extremum(system, &states[i], mesh[i + 1] - mesh[i], s_prev, s_next));
        } else if s_next == 0.0 {
            candidates.push(states[i + 1].clone());
        }
        s_prev = s_next;
    }
    let mut max_x2 = f64::NEG_INFINITY;
    let mut min_x2 = f64::INFINITY;
    for c in &candidates {
        for v in [c[1], (r * c)[1]] {
            max_x2 = max_x2.max(v);
            min_x2 = min_x2.min(v);
        }
    }
    let l2_norm = (2.0 * half_norm(mesh, states).powi(2)).sqrt();
    OrbitMeasures { x2_at_0, max_x2, min_x2, l2_norm }
}

fn refine_extremum(system: &dyn ReversibleSystem, x: &DVector<f64>, h: f64, s0: f64, s1: f64) -> DVector<f64> {
    let eval = |tau: f64| -> Option<(DVector<f64>, f64)> {
        let y = gauss_step(system, x, tau, false, None).ok()?.x;
        let s = system.f(&y)[1];
        Some((y, s))
    };
    // Illinois-modified regula falsi on τ ∈ [0, h].
    let (mut a, mut fa, mut b, mut fb) = (0.0, s0, h, s1);
    let mut best = None;
    let mut side = 0;
    for _ in 0..60 {
        let c = (a * fb - b * fa) / (fb - fa);
        let Some((y, fc)) = eval(c) else { break };
        best = Some(y);
        if fc == 0.0 || (b - a).abs() < 1e-15 * h.max(1.0) {
            break;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if fc.abs() < 1e-15 {
            break;
        }
    }
    best.unwrap_or_else(|| x.clone())
}

/// Condensed residual and derivatives at a vector of segment-boundary states.
pub struct Condensed {
    pub residual: DVector<f64>,
    pub jacobian: Option<DMatrix<f64>>,
    /// ∂residual/∂μ for the requested parameter.
    pub param_column: Option<DVector<f64>>,
    /// States at every mesh node obtained by stepping within segments.
    pub nodes: Vec<DVector<f64>>,
}

/// The boundary value problem for a symmetric homoclinic orbit.
#[derive(Clone)]
pub struct HomoclinicBvp {
    system: Box<dyn ReversibleSystem>,
    settings: BvpSettings,
    mesh: Vec<f64>,
    /// Indices into the mesh of segment boundaries (first 0, last N).
    segments: Vec<usize>,
    ls: DMatrix<f64>,
    /// L_s from construction; later L_s rows are sign-aligned with it so the
    /// boundary rows vary smoothly with parameters.
    ls_reference: DMatrix<f64>,
    fix_minus: DMatrix<f64>,
}

impl std::fmt::Debug for HomoclinicBvp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HomoclinicBvp")
            .field("system", &self.system.name())
            .field("params", &self.system.params())
            .field("settings", &self.settings)
            .finish()
    }
}

fn uniform_mesh(t_half: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| -t_half + t_half * i as f64 / n as f64).map(|t| if t.abs() < 1e-300 { 0.0 } else { t }).collect()
}

fn align_rows(ls: DMatrix<f64>, reference: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = ls;
    if out.shape() != reference.shape() {
        return out;
    }
    for i in 0..out.nrows() {
        if out.row(i).dot(&reference.row(i)) < 0.0 {
            out.row_mut(i).neg_mut();
        }
    }
    out
}

impl HomoclinicBvp {
    /// Uniform mesh with `settings.intervals` intervals on [−T, 0].
    pub fn new(system: Box<dyn ReversibleSystem>, settings: BvpSettings) -> Result<Self> {
        settings.validate()?;
        let mesh = uniform_mesh(settings.t_half, settings.intervals);
        Self::with_mesh(system, mesh, settings)
    }

    /// Custom strictly increasing mesh from −T to 0.
    pub fn with_mesh(system: Box<dyn ReversibleSystem>, mesh: Vec<f64>, mut settings: BvpSettings) -> Result<Self> {
        if mesh.len() < 2 || mesh.windows(2).any(|w| !(w[1] > w[0])) || mesh[mesh.len() - 1] != 0.0 || !(mesh[0] < 0.0) {
            return Err(Error::Config("mesh must increase strictly from −T to 0".into()));
        }
        settings.t_half = -mesh[0];
        settings.intervals = mesh.len() - 1;
        settings.validate()?;
        let ls = build_ls(&equilibrium_spectrum(system.as_ref())?)?;
        let (_, fix_minus) = fix_r_projector(system.as_ref())?;
        let mut segments = vec![0];
        let mut start = mesh[0];
        for i in 1..mesh.len() {
            if i == mesh.len() - 1 || mesh[i + 1] - start > settings.segment_length + 1e-12 {
                segments.push(i);
                start = mesh[i];
            }
        }
        Ok(HomoclinicBvp { system, settings, mesh, segments, ls_reference: ls.clone(), ls, fix_minus })
    }

    pub fn system(&self) -> &dyn ReversibleSystem {
        self.system.as_ref()
    }
    pub fn settings(&self) -> &BvpSettings {
        &self.settings
    }
    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }
    pub fn ls(&self) -> &DMatrix<f64> {
        &self.ls
    }
    pub fn fix_minus(&self) -> &DMatrix<f64> {
        &self.fix_minus
    }
    pub fn segment_boundaries(&self) -> &[usize] {
        &self.segments
    }
    pub fn dim(&self) -> usize {
        self.system.dim()
    }
    pub fn param(&self, name: &str) -> Result<f64> {
        self.system.param(name)
    }

    /// Changes one parameter and recomputes L_s.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let mut sys = self.system.box_clone();
        sys.set_param(name, value)?;
        let ls = self.ls_for(sys.as_ref())?;
        self.system = sys;
        self.ls = ls;
        Ok(())
    }

    fn ls_for(&self, sys: &dyn ReversibleSystem) -> Result<DMatrix<f64>> {
        Ok(align_rows(build_ls(&equilibrium_spectrum(sys)?)?, &self.ls_reference))
    }

    /// Samples a function of time on the mesh.
    pub fn sample(&self, f: impl Fn(f64) -> DVector<f64>) -> Vec<DVector<f64>> {
        self.mesh.iter().map(|&t| f(t)).collect()
    }

    /// Residual of the full collocation system at the given node states:
    /// `[x_{i+1} − Φ_{h_i}(x_i) for each interval; L_s x(−T); P₋ x(0)]`.
    pub fn assemble_residual(&self, states: &[DVector<f64>]) -> Result<DVector<f64>> {
        let d = self.dim();
        let n = self.mesh.len() - 1;
        if states.len() != n + 1 || states.iter().any(|x| x.len() != d) {
            return Err(Error::Usage(format!("expected {} states of dimension {d}", n + 1)));
        }
        if states.iter().any(|x| !x.iter().all(|v| v.is_finite())) {
            return Err(Error::Domain("non-finite state".into()));
        }
        let half = d / 2;
        let mut res = DVector::zeros(d * n + 2 * half);
        for i in 0..n {
            let step = gauss_step(self.system(), &states[i], self.mesh[i + 1] - self.mesh[i], false, None)?;
            res.rows_mut(i * d, d).copy_from(&(&states[i + 1] - step.x));
        }
        res.rows_mut(d * n, half).copy_from(&(&self.ls * &states[0]));
        res.rows_mut(d * n + half, half).copy_from(&(&self.fix_minus * &states[n]));
        Ok(res)
    }

    /// Number of condensed unknowns: dim · (segments + 1).
    pub fn unknown_count(&self) -> usize {
        self.dim() * self.segments.len()
    }

    /// Picks the segment-boundary states out of a full node vector.
    pub fn condense(&self, states: &[DVector<f64>]) -> DVector<f64> {
        let d = self.dim();
        let mut u = DVector::zeros(self.unknown_count());
        for (k, &i) in self.segments.iter().enumerate() {
            u.rows_mut(k * d, d).copy_from(&states[i]);
        }
        u
    }

    /// Condensed residual `[L_s X₀; X_{k+1} − Φ_k(X_k); P₋ X_K]` with
    /// optional Jacobian and parameter derivative.
    pub fn condensed(&self, u: &DVector<f64>, jacobian: bool, param: Option<&str>) -> Result<Condensed> {
        let d = self.dim();
        let half = d / 2;
        let nseg = self.segments.len() - 1;
        if u.len() != self.unknown_count() {
            return Err(Error::Usage(format!("expected {} unknowns", self.unknown_count())));
        }
        if !u.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("non-finite state".into()));
        }
        let m = self.unknown_count();
        let mut res = DVector::zeros(m);
        let mut jac = if jacobian { Some(DMatrix::zeros(m, m)) } else { None };
        let mut col = param.map(|_| DVector::zeros(m));
        let mut nodes = Vec::with_capacity(self.mesh.len());

        let x0 = u.rows(0, d).into_owned();
        res.rows_mut(0, half).copy_from(&(&self.ls * &x0));
        if let Some(j) = jac.as_mut() {
            j.view_mut((0, 0), (half, d)).copy_from(&self.ls);
        }
        if let (Some(c), Some(name)) = (col.as_mut(), param) {
            c.rows_mut(0, half).copy_from(&(self.ls_derivative(name)? * &x0));
        }
        for k in 0..nseg {
            let mut x = u.rows(k * d, d).into_owned();
            let mut sens = if jacobian { Some(DMatrix::identity(d, d)) } else { None };
            let mut dmu = param.map(|_| DVector::zeros(d));
            for i in self.segments[k]..self.segments[k + 1] {
                nodes.push(x.clone());
                let h = self.mesh[i + 1] - self.mesh[i];
                let step = gauss_step(self.system(), &x, h, jacobian, param)?;
                if let (Some(s), Some(dx)) = (sens.as_mut(), step.dx.as_ref()) {
                    *s = dx * &*s;
                }
                if let (Some(p), Some(sd)) = (dmu.as_mut(), step.dmu.as_ref()) {
                    let prev = step.dx.as_ref().expect("sensitivities requested with parameter") * &*p;
                    *p = prev + sd;
                }
                x = step.x;
            }
            let row = half + k * d;
            let next = u.rows((k + 1) * d, d);
            res.rows_mut(row, d).copy_from(&(next - &x));
            if let (Some(j), Some(s)) = (jac.as_mut(), sens.as_ref()) {
                j.view_mut((row, k * d), (d, d)).copy_from(&(-s));
                j.view_mut((row, (k + 1) * d), (d, d)).fill_with_identity();
            }
            if let (Some(c), Some(p)) = (col.as_mut(), dmu.as_ref()) {
                c.rows_mut(row, d).copy_from(&(-p));
            }
        }
        let xk = u.rows(nseg * d, d).into_owned();
        nodes.push(xk.clone());
        res.rows_mut(m - half, half).copy_from(&(&self.fix_minus * &xk));
        if let Some(j) = jac.as_mut() {
            j.view_mut((m - half, nseg * d), (half, d)).copy_from(&self.fix_minus);
        }
        Ok(Condensed { residual: res, jacobian: jac, param_column: col, nodes })
    }

    /// ∂L_s/∂μ by central differences (L_s depends on μ only through the
    /// linearization at the origin).
    fn ls_derivative(&self, name: &str) -> Result<DMatrix<f64>> {
        let mu = self.system.param(name)?;
        let h = 1e-6 * mu.abs().max(1.0);
        let mut plus = self.system.box_clone();
        let mut minus = self.system.box_clone();
        plus.set_param(name, mu + h)?;
        minus.set_param(name, mu - h)?;
        Ok((self.ls_for(plus.as_ref())? - self.ls_for(minus.as_ref())?) / (2.0 * h))
    }

    /// Builds the orbit record from condensed unknowns.
    pub fn orbit_from(&self, u: &DVector<f64>, newton_iterations: usize) -> Result<HomoclinicOrbit> {
        let c = self.condensed(u, false, None)?;
        let states = c.nodes;
        let d = self.dim();
        let n = states.len() - 1;
        let res = self.assemble_residual(&states)?;
        let collocation_residual = res.rows(0, d * n).amax();
        let projection_residual = (&self.ls * &states[0]).amax();
        let symmetry_residual = (&self.fix_minus * &states[n]).amax();
        let involution = self.system.involution();
        let measures = measures_from(self.system(), &self.mesh, &states, &involution);
        Ok(HomoclinicOrbit {
            mesh: self.mesh.clone(),
            states,
            params: self.system.params(),
            projection_residual,
            symmetry_residual,
            collocation_residual,
            newton_iterations,
            measures,
            involution,
        })
    }

    /// Newton's method with backtracking on the condensed system.
    ///
    /// Fails with [`Error::TrivialSolution`] if the converged orbit's norm
    /// is below `trivial_ratio` times the guess norm.
    pub fn solve(&self, guess: &[DVector<f64>]) -> Result<HomoclinicOrbit> {
        if guess.len() != self.mesh.len() {
            return Err(Error::Usage(format!("guess must have {} states", self.mesh.len())));
        }
        let guess_norm = half_norm(&self.mesh, guess);
        let delta_min = self.settings.trivial_ratio * guess_norm;
        let (u, iterations) = self.newton(self.condense(guess), |_| Ok(()))?;
        let orbit = self.orbit_from(&u, iterations)?;
        let norm = orbit.half_norm();
        if !(norm >= delta_min) || norm == 0.0 {
            return Err(Error::TrivialSolution { norm, threshold: delta_min });
        }
        Ok(orbit)
    }

    /// Damped Newton iteration on the condensed residual. `check` may veto
    /// an iterate (used by callers with extra constraints).
    pub fn newton(
        &self,
        mut u: DVector<f64>,
        mut check: impl FnMut(&DVector<f64>) -> Result<()>,
    ) -> Result<(DVector<f64>, usize)> {
        let mut c = self.condensed(&u, true, None)?;
        let mut rnorm = c.residual.amax();
        for it in 0..=self.settings.max_iter {
            if rnorm <= self.settings.tol {
                check(&u)?;
                return Ok((u, it));
            }
            if it == self.settings.max_iter {
                break;
            }
            let jac = c.jacobian.take().expect("jacobian requested");
            let delta = jac
                .lu()
                .solve(&(-&c.residual))
                .ok_or(Error::NoConvergence { iterations: it, residual: rnorm })?;
            let mut lambda = 1.0;
            loop {
                let trial = &u + &delta * lambda;
                match self.condensed(&trial, true, None) {
                    Ok(ct) if ct.residual.amax() < rnorm || lambda < 1.0 / 64.0 => {
                        u = trial;
                        rnorm = ct.residual.amax();
                        c = ct;
                        break;
                    }
                    Err(e) if lambda < 1.0 / 64.0 => return Err(e),
                    _ => lambda *= 0.5,
                }
            }
        }
        Err(Error::NoConvergence { iterations: self.settings.max_iter, residual: rnorm })
    }
}
