//! Bifurcation-diagram drivers for the four-dimensional example: the
//! saddle-node in β₂ and the transcritical/pitchfork crossings in β₁.

use serde::{Deserialize, Serialize};

use crate::bvp::{BvpSettings, HomoclinicBvp, HomoclinicOrbit};
use crate::continuation::{
    continue_branch, continue_from, switch_branch_signed, Branch, BranchStart, ContinuationSettings, SpecialKind,
    SWITCH_EPSILON,
};
use crate::duffing::{homoclinic_exact, resonance_beta1, Coupling, Duffing4d, ExampleParams};
use crate::error::{Error, Result};

/// Fixed parameters of one diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramSetup {
    pub s: f64,
    pub ell: u32,
    pub beta3: f64,
    pub coupling: Coupling,
}

impl DiagramSetup {
    pub fn resonance(&self) -> Result<f64> {
        resonance_beta1(self.s, self.ell)
    }

    fn system(&self, beta1: f64, beta2: f64) -> Duffing4d {
        Duffing4d::new(ExampleParams { s: self.s, beta1, beta2, beta3: self.beta3, ell: self.ell })
            .with_coupling(self.coupling)
    }
}

/// The BVP of the diagram at (β₁, β₂ = 0).
pub fn diagram_bvp(setup: &DiagramSetup, beta1: f64, bvp_settings: &BvpSettings) -> Result<HomoclinicBvp> {
    HomoclinicBvp::new(Box::new(setup.system(beta1, 0.0)), *bvp_settings)
}

/// The homoclinic orbit of the invariant plane x₂ = x₄ = 0 at β₂ = 0.
pub fn planar_orbit(setup: &DiagramSetup, beta1: f64, bvp_settings: &BvpSettings) -> Result<(HomoclinicBvp, HomoclinicOrbit)> {
    let bvp = diagram_bvp(setup, beta1, bvp_settings)?;
    let orbit = bvp.solve(&bvp.sample(|t| homoclinic_exact(t, 1.0)))?;
    Ok((bvp, orbit))
}

/// Saddle-node diagram in β₂ through the fold at β₂ = 0.
///
/// The fold itself is the planar orbit at β₂ = 0, where the branch tangent
/// is φ₂. Continuation first follows +φ₂ out of the range and then turns
/// around, so the returned branch covers both halves and crosses the fold
/// (where the fold is detected and localized).
pub fn saddle_node_branch(
    setup: &DiagramSetup,
    range: [f64; 2],
    bvp_settings: &BvpSettings,
    settings: &ContinuationSettings,
) -> Result<Branch> {
    let beta1 = setup.resonance()?;
    let (bvp, orbit) = planar_orbit(setup, beta1, bvp_settings)?;
    let lead_in = ContinuationSettings { detect_branch_points: false, detect_folds: false, ..*settings };
    let first = continue_branch(&bvp, &orbit, "beta2", range, &lead_in)?;
    let last = first.points.last().ok_or_else(|| Error::Inconclusive("empty lead-in branch".into()))?;
    if first.points.len() < 2 {
        return Err(Error::Inconclusive(format!("lead-in stopped: {}", first.termination)));
    }
    let start = BranchStart {
        orbit: last.orbit.clone().expect("stored orbit"),
        u: last.u.clone(),
        param: last.param,
        tangent: -&last.tangent,
    };
    continue_from(&bvp, &start, "beta2", range, settings)
}

/// A diagram with a primary branch and the branches switched onto at its
/// branch point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossingDiagram {
    pub primary: Branch,
    /// Switched branches for perturbation signs +, − (in that order).
    pub switched: Vec<Branch>,
}

/// Continues the planar branch (x₂ ≡ 0) in β₁ across the resonance value and
/// switches at the branch point nearest to it. `half_width` sets the β₁
/// range [β₁* − w, β₁* + w].
pub fn crossing_diagram(
    setup: &DiagramSetup,
    half_width: f64,
    bvp_settings: &BvpSettings,
    settings: &ContinuationSettings,
    switched_settings: &ContinuationSettings,
) -> Result<CrossingDiagram> {
    let beta1 = setup.resonance()?;
    crossing_diagram_in(setup, [beta1 - half_width, beta1 + half_width], bvp_settings, settings, switched_settings)
}

/// [`crossing_diagram`] on an explicit β₁ range, which must contain the
/// resonance value.
pub fn crossing_diagram_in(
    setup: &DiagramSetup,
    range: [f64; 2],
    bvp_settings: &BvpSettings,
    settings: &ContinuationSettings,
    switched_settings: &ContinuationSettings,
) -> Result<CrossingDiagram> {
    let beta1 = setup.resonance()?;
    if !(range[0] < beta1 && beta1 < range[1]) {
        return Err(Error::Config(format!("β₁ range [{}, {}] must contain the resonance value {beta1}", range[0], range[1])));
    }
    let (bvp, orbit) = planar_orbit(setup, range[0], bvp_settings)?;
    let primary_settings = ContinuationSettings { direction: 1.0, detect_folds: false, ..*settings };
    let primary = continue_branch(&bvp, &orbit, "beta1", range, &primary_settings)?;
    let bp = primary
        .specials
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == SpecialKind::BranchPoint)
        .min_by(|a, b| (a.1.param - beta1).abs().total_cmp(&(b.1.param - beta1).abs()))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Inconclusive(format!("no branch point in [{}, {}]", range[0], range[1])))?;
    let mut switched = Vec::new();
    for sign in [1.0, -1.0] {
        let start = switch_branch_signed(&bvp, &primary, bp, sign, SWITCH_EPSILON, settings)?;
        switched.push(continue_from(&bvp, &start, "beta1", range, switched_settings)?);
    }
    Ok(CrossingDiagram { primary, switched })
}

/// All orbits of `branch` at `branch.param = value`: every segment between
/// consecutive points that brackets `value` is re-solved there, starting
/// from the linear blend of its end points. Orbits that coincide (measures
/// within 1e−8) are reported once.
pub fn profiles_at(bvp: &HomoclinicBvp, branch: &Branch, value: f64) -> Result<Vec<HomoclinicOrbit>> {
    let mut at = bvp.clone();
    at.set_param(&branch.param, value)?;
    let mut found: Vec<HomoclinicOrbit> = Vec::new();
    for w in branch.points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (da, db) = (a.param - value, b.param - value);
        if da * db > 0.0 || da == db {
            continue;
        }
        let theta = da / (da - db);
        let guess = &a.u * (1.0 - theta) + &b.u * theta;
        let (u, iters) = at.newton(guess, |_| Ok(()))?;
        let orbit = at.orbit_from(&u, iters)?;
        let m = orbit.measures;
        let duplicate = found.iter().any(|o| {
            let n = o.measures;
            (n.x2_at_0 - m.x2_at_0).abs() <= 1e-8 && (n.l2_norm - m.l2_norm).abs() <= 1e-8
        });
        if !duplicate {
            found.push(orbit);
        }
    }
    Ok(found)
}
