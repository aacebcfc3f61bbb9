//! Pseudo-arclength continuation of homoclinic orbits in one parameter.
//!
//! Points are pairs (u, μ) with u the condensed BVP unknowns. Arclength is
//! measured in the weighted norm ‖(u, μ)‖² = w·‖u‖² + μ², where w is the mean
//! segment duration so that w·‖u‖² approximates ∫_{−T}^0 |x|² dt.
//!
//! Folds are detected by sign changes of the μ-component of the tangent;
//! branch points by sign changes of det [F_u F_μ; tᵀW] (the bordered
//! Jacobian with the tangent row). Both are localized by an Illinois
//! iteration in arclength.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bvp::{HomoclinicBvp, HomoclinicOrbit, OrbitMeasures};
use crate::error::{Error, Result};
use crate::melnikov::{Classification, MelnikovReport, Mode};
use crate::system::ParamMap;

/// Step control and detection settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationSettings {
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    /// Orientation of the initial tangent: sign of its μ-component, or of its
    /// largest component when the start is a fold.
    pub direction: f64,
    pub corrector_tol: f64,
    pub max_corrector: usize,
    /// Special points are localized until the bracketing parameter values
    /// differ by at most this.
    pub locate_tol: f64,
    pub detect_folds: bool,
    pub detect_branch_points: bool,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        ContinuationSettings {
            ds: 1e-2,
            ds_min: 1e-5,
            ds_max: 5e-2,
            max_steps: 400,
            direction: 1.0,
            corrector_tol: 1e-10,
            max_corrector: 10,
            locate_tol: 1e-6,
            detect_folds: true,
            detect_branch_points: true,
        }
    }
}

impl ContinuationSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.ds_min > 0.0
            && self.ds_min <= self.ds
            && self.ds <= self.ds_max
            && self.corrector_tol > 0.0
            && self.locate_tol > 0.0
            && self.direction != 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid continuation settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpecialKind {
    #[serde(rename = "FOLD")]
    Fold,
    #[serde(rename = "BP")]
    BranchPoint,
}

impl SpecialKind {
    pub fn label(&self) -> &'static str {
        match self {
            SpecialKind::Fold => "FOLD",
            SpecialKind::BranchPoint => "BP",
        }
    }
}

/// One stored point of a branch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchPoint {
    pub param: f64,
    pub measures: OrbitMeasures,
    pub arclength: f64,
    /// Sign of the μ-component of the tangent.
    pub tangent_sign: f64,
    pub special: Option<SpecialKind>,
    #[serde(skip)]
    pub orbit: Option<HomoclinicOrbit>,
    #[serde(skip)]
    pub u: DVector<f64>,
    #[serde(skip)]
    pub tangent: DVector<f64>,
}

/// A localized fold or branch point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecialPoint {
    pub kind: SpecialKind,
    pub param: f64,
    /// Width in μ of the final localization bracket.
    pub localization_residual: f64,
    /// Index of the point in [`Branch::points`].
    pub index: usize,
    pub measures: OrbitMeasures,
}

/// A continued branch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub param: String,
    pub fixed: ParamMap,
    pub points: Vec<BranchPoint>,
    pub specials: Vec<SpecialPoint>,
    /// Why continuation stopped.
    pub termination: String,
}

impl Branch {
    /// CSV `index,param,x2_at_0,max_x2,min_x2,l2_norm,arclength,special`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,param,x2_at_0,max_x2,min_x2,l2_norm,arclength,special\n");
        for (i, p) in self.points.iter().enumerate() {
            let m = &p.measures;
            out.push_str(&format!(
                "{i},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
                p.param,
                m.x2_at_0,
                m.max_x2,
                m.min_x2,
                m.l2_norm,
                p.arclength,
                p.special.map(|k| k.label()).unwrap_or("")
            ));
        }
        out
    }

    /// JSON summary with the localized special points.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "param": self.param,
            "fixed": self.fixed,
            "points": self.points.len(),
            "specials": self.specials,
            "termination": self.termination,
            "param_range": [
                self.points.iter().map(|p| p.param).fold(f64::INFINITY, f64::min),
                self.points.iter().map(|p| p.param).fold(f64::NEG_INFINITY, f64::max),
            ],
        })
    }

    pub fn specials_of(&self, kind: SpecialKind) -> impl Iterator<Item = &SpecialPoint> {
        self.specials.iter().filter(move |s| s.kind == kind)
    }
}

/// A point from which continuation can start: converged unknowns, parameter
/// and a tangent (or tangent hint).
#[derive(Debug, Clone)]
pub struct BranchStart {
    pub orbit: HomoclinicOrbit,
    pub u: DVector<f64>,
    pub param: f64,
    pub tangent: DVector<f64>,
}

struct Evaluated {
    residual: DVector<f64>,
    fu: DMatrix<f64>,
    fmu: DVector<f64>,
}

#[derive(Clone)]
struct State {
    u: DVector<f64>,
    mu: f64,
    tangent: DVector<f64>,
    det: f64,
    iterations: usize,
}

struct Tracker<'a> {
    bvp: &'a HomoclinicBvp,
    param: String,
    settings: ContinuationSettings,
    weight: f64,
    min_norm: f64,
}

impl<'a> Tracker<'a> {
    fn new(bvp: &'a HomoclinicBvp, param: &str, settings: ContinuationSettings, reference_norm: f64) -> Result<Self> {
        settings.validate()?;
        bvp.param(param)?;
        let segs = bvp.segment_boundaries().len() - 1;
        let weight = bvp.settings().t_half / segs as f64;
        let min_norm = bvp.settings().trivial_ratio * reference_norm;
        Ok(Tracker { bvp, param: param.to_string(), settings, weight, min_norm })
    }

    fn at(&self, mu: f64) -> Result<HomoclinicBvp> {
        let mut b = self.bvp.clone();
        b.set_param(&self.param, mu)?;
        Ok(b)
    }

    fn evaluate(&self, u: &DVector<f64>, mu: f64) -> Result<Evaluated> {
        let c = self.at(mu)?.condensed(u, true, Some(&self.param))?;
        Ok(Evaluated { residual: c.residual, fu: c.jacobian.expect("requested"), fmu: c.param_column.expect("requested") })
    }

    fn weighted(&self, t: &DVector<f64>) -> DVector<f64> {
        let m = t.len() - 1;
        let mut w = t * self.weight;
        w[m] = t[m];
        w
    }

    fn wnorm(&self, t: &DVector<f64>) -> f64 {
        t.dot(&self.weighted(t)).sqrt()
    }

    fn bordered(&self, e: &Evaluated, row: &DVector<f64>) -> DMatrix<f64> {
        let m = e.fu.nrows();
        let mut b = DMatrix::zeros(m + 1, m + 1);
        b.view_mut((0, 0), (m, m)).copy_from(&e.fu);
        b.view_mut((0, m), (m, 1)).copy_from(&e.fmu);
        b.row_mut(m).copy_from(&row.transpose());
        b
    }

    /// Tangent continuing `hint` (solve [F_u F_μ; hintᵀW] t = e), W-normalized,
    /// plus the bordered determinant with the new tangent row.
    fn tangent_from_hint(&self, e: &Evaluated, hint: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let m = e.fu.nrows();
        let b = self.bordered(e, &self.weighted(hint));
        let mut rhs = DVector::zeros(m + 1);
        rhs[m] = 1.0;
        let t = b.lu().solve(&rhs).ok_or_else(|| Error::NumericalQuality("singular bordered Jacobian".into()))?;
        let t = &t / self.wnorm(&t);
        let det = self.bordered(e, &self.weighted(&t)).lu().determinant();
        Ok((t, det))
    }

    /// Null vectors of [F_u F_μ] from an SVD, smallest singular value first.
    fn null_space(&self, e: &Evaluated, count: usize) -> Vec<DVector<f64>> {
        let m = e.fu.nrows();
        let mut a = DMatrix::zeros(m + 1, m + 1);
        a.view_mut((0, 0), (m, m)).copy_from(&e.fu);
        a.view_mut((0, m), (m, 1)).copy_from(&e.fmu);
        let svd = a.svd(false, true);
        let vt = svd.v_t.expect("requested");
        let mut idx: Vec<usize> = (0..m + 1).collect();
        idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
        idx.into_iter().take(count).map(|i| vt.row(i).transpose()).collect()
    }

    fn orient(&self, mut t: DVector<f64>) -> DVector<f64> {
        let m = t.len() - 1;
        let dir = self.settings.direction.signum();
        let key = if t[m].abs() > 1e-6 * self.wnorm(&t) {
            t[m]
        } else {
            let (imax, _) = t.iter().enumerate().fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
            t[imax]
        };
        if key * dir < 0.0 {
            t.neg_mut();
        }
        t
    }

    /// Newton on [F(u, μ); ⟨Wt, (u, μ) − pred⟩] = 0.
    fn correct(&self, pred: &DVector<f64>, t: &DVector<f64>) -> Result<State> {
        let m = pred.len() - 1;
        let wt = self.weighted(t);
        let mut z = pred.clone();
        for it in 0..=self.settings.max_corrector {
            let u = z.rows(0, m).into_owned();
            let e = self.evaluate(&u, z[m])?;
            let plane = wt.dot(&(&z - pred));
            let rnorm = e.residual.amax().max(plane.abs());
            if rnorm <= self.settings.corrector_tol {
                let (tangent, det) = self.tangent_from_hint(&e, t)?;
                if self.norm_of(&u) < self.min_norm {
                    return Err(Error::TrivialSolution { norm: self.norm_of(&u), threshold: self.min_norm });
                }
                return Ok(State { u, mu: z[m], tangent, det, iterations: it });
            }
            if it == self.settings.max_corrector {
                return Err(Error::NoConvergence { iterations: it, residual: rnorm });
            }
            let b = self.bordered(&e, &wt);
            let mut rhs = DVector::zeros(m + 1);
            rhs.rows_mut(0, m).copy_from(&(-&e.residual));
            rhs[m] = -plane;
            let dz = b.lu().solve(&rhs).ok_or_else(|| Error::NumericalQuality("singular corrector system".into()))?;
            z += dz;
        }
        unreachable!()
    }

    fn norm_of(&self, u: &DVector<f64>) -> f64 {
        (u.norm_squared() * self.weight).sqrt()
    }

    fn stack(u: &DVector<f64>, mu: f64) -> DVector<f64> {
        let m = u.len();
        let mut z = DVector::zeros(m + 1);
        z.rows_mut(0, m).copy_from(u);
        z[m] = mu;
        z
    }

    fn point(&self, s: &State, arclength: f64, special: Option<SpecialKind>) -> Result<BranchPoint> {
        let orbit = self.at(s.mu)?.orbit_from(&s.u, s.iterations)?;
        let m = s.tangent.len() - 1;
        Ok(BranchPoint {
            param: s.mu,
            measures: orbit.measures,
            arclength,
            tangent_sign: s.tangent[m].signum(),
            special,
            orbit: Some(orbit),
            u: s.u.clone(),
            tangent: s.tangent.clone(),
        })
    }

    fn test_value(kind: SpecialKind, s: &State) -> f64 {
        match kind {
            SpecialKind::Fold => s.tangent[s.tangent.len() - 1],
            SpecialKind::BranchPoint => s.det,
        }
    }

    /// Illinois iteration on σ ∈ (0, ds) along the tangent at `a`.
    fn locate(&self, kind: SpecialKind, a: &State, ds: f64, g_end: f64, mu_end: f64) -> Result<(State, f64, f64)> {
        let za = Self::stack(&a.u, a.mu);
        let (mut lo, mut glo, mut mulo) = (0.0, Self::test_value(kind, a), a.mu);
        let (mut hi, mut ghi, mut muhi) = (ds, g_end, mu_end);
        let mut best: Option<(State, f64)> = None;
        let mut side = 0;
        for _ in 0..80 {
            if (muhi - mulo).abs() <= self.settings.locate_tol && best.is_some() {
                break;
            }
            let sigma = (lo * ghi - hi * glo) / (ghi - glo);
            let sigma = if sigma.is_finite() && sigma > lo && sigma < hi { sigma } else { 0.5 * (lo + hi) };
            let s = self.correct(&(&za + &a.tangent * sigma), &a.tangent)?;
            let g = Self::test_value(kind, &s);
            let mu = s.mu;
            best = Some((s, sigma));
            if g == 0.0 {
                mulo = mu;
                muhi = mu;
                break;
            }
            if g.signum() == ghi.signum() {
                hi = sigma;
                ghi = g;
                muhi = mu;
                if side == -1 {
                    glo *= 0.5;
                }
                side = -1;
            } else {
                lo = sigma;
                glo = g;
                mulo = mu;
                if side == 1 {
                    ghi *= 0.5;
                }
                side = 1;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        let (s, sigma) = best.ok_or_else(|| Error::Inconclusive("special point not localized".into()))?;
        Ok((s, sigma, (muhi - mulo).abs()))
    }

    fn run(&self, start: State, range: [f64; 2]) -> Result<Branch> {
        let [lo, hi] = range;
        if !(lo < hi) {
            return Err(Error::Config(format!("empty parameter range [{lo}, {hi}]")));
        }
        let mut points = vec![self.point(&start, 0.0, None)?];
        let mut specials = Vec::new();
        let mut cur = start;
        let mut ds = self.settings.ds;
        let mut arclength = 0.0;
        let mut termination = format!("maximum number of steps ({}) reached", self.settings.max_steps);
        'steps: for _ in 0..self.settings.max_steps {
            let zc = Self::stack(&cur.u, cur.mu);
            let next = loop {
                let attempt = self.correct(&(&zc + &cur.tangent * ds), &cur.tangent);
                match attempt {
                    // Reject steps whose tangent turned by more than ~25°;
                    // such jumps usually switch branches.
                    Ok(s) if self.weighted(&s.tangent).dot(&cur.tangent) > 0.9 => break s,
                    Ok(_) | Err(_) => {
                        ds *= 0.5;
                        if ds < self.settings.ds_min {
                            termination = format!("corrector failed at minimal step near {} = {}", self.param, cur.mu);
                            break 'steps;
                        }
                    }
                }
            };
            let m = cur.tangent.len() - 1;
            let mut found: Vec<(SpecialKind, State, f64, f64)> = Vec::new();
            if self.settings.detect_folds && cur.tangent[m] * next.tangent[m] < 0.0 {
                let (s, sigma, res) = self.locate(SpecialKind::Fold, &cur, ds, next.tangent[m], next.mu)?;
                found.push((SpecialKind::Fold, s, sigma, res));
            }
            if self.settings.detect_branch_points && cur.det * next.det < 0.0 {
                let (s, sigma, res) = self.locate(SpecialKind::BranchPoint, &cur, ds, next.det, next.mu)?;
                found.push((SpecialKind::BranchPoint, s, sigma, res));
            }
            found.sort_by(|a, b| a.2.total_cmp(&b.2));
            for (kind, s, sigma, res) in found {
                if s.mu < lo || s.mu > hi {
                    continue;
                }
                let p = self.point(&s, arclength + sigma, Some(kind))?;
                specials.push(SpecialPoint {
                    kind,
                    param: s.mu,
                    localization_residual: res,
                    index: points.len(),
                    measures: p.measures,
                });
                points.push(p);
            }
            if next.mu < lo || next.mu > hi {
                termination = format!("left the range [{lo}, {hi}]");
                break;
            }
            arclength += ds;
            points.push(self.point(&next, arclength, None)?);
            ds = if next.iterations <= 3 {
                (ds * 1.5).min(self.settings.ds_max)
            } else if next.iterations >= 6 {
                (ds * 0.5).max(self.settings.ds_min)
            } else {
                ds
            };
            cur = next;
        }
        Ok(Branch { param: self.param.clone(), fixed: self.bvp.system().params(), points, specials, termination })
    }
}

/// Continues the branch through `start_orbit` in `param` over `range`.
///
/// The start tangent is the null vector of [F_u F_μ], oriented by
/// `settings.direction`. This also works when the start is a fold.
pub fn continue_branch(
    bvp: &HomoclinicBvp,
    start_orbit: &HomoclinicOrbit,
    param: &str,
    range: [f64; 2],
    settings: &ContinuationSettings,
) -> Result<Branch> {
    let mu = bvp.param(param)?;
    let tracker = Tracker::new(bvp, param, *settings, start_orbit.half_norm())?;
    let u = bvp.condense(&start_orbit.states);
    let e = tracker.evaluate(&u, mu)?;
    let null = tracker.null_space(&e, 1).remove(0);
    let t0 = tracker.orient(&null / tracker.wnorm(&null));
    let (tangent, det) = tracker.tangent_from_hint(&e, &t0)?;
    tracker.run(State { u, mu, tangent, det, iterations: start_orbit.newton_iterations }, range)
}

/// Continues from a [`BranchStart`] (e.g. the result of [`switch_branch`]),
/// keeping the orientation of its tangent.
pub fn continue_from(
    bvp: &HomoclinicBvp,
    start: &BranchStart,
    param: &str,
    range: [f64; 2],
    settings: &ContinuationSettings,
) -> Result<Branch> {
    let b = {
        let mut b = bvp.clone();
        b.set_param(param, start.param)?;
        b
    };
    let tracker = Tracker::new(&b, param, *settings, start.orbit.half_norm())?;
    let e = tracker.evaluate(&start.u, start.param)?;
    let (tangent, det) = tracker.tangent_from_hint(&e, &start.tangent)?;
    tracker.run(State { u: start.u.clone(), mu: start.param, tangent, det, iterations: 0 }, range)
}

/// Perturbation used by [`switch_branch`] in the weighted norm.
pub const SWITCH_EPSILON: f64 = 1e-2;

/// Starts the bifurcating branch at a localized branch point: perturbs along
/// the second null direction of [F_u F_μ] (orthogonal to the branch tangent)
/// by `sign·epsilon` and corrects on the hyperplane ⟨t₂, z − z*⟩ = ε.
pub fn switch_branch_signed(
    bvp: &HomoclinicBvp,
    branch: &Branch,
    special_index: usize,
    sign: f64,
    epsilon: f64,
    settings: &ContinuationSettings,
) -> Result<BranchStart> {
    let sp = branch
        .specials
        .get(special_index)
        .ok_or_else(|| Error::Usage(format!("no special point #{special_index}")))?;
    if sp.kind != SpecialKind::BranchPoint {
        return Err(Error::Usage("branch switching needs a BRANCH_POINT".into()));
    }
    let p = &branch.points[sp.index];
    let mut at = bvp.clone();
    at.set_param(&branch.param, p.param)?;
    let start_norm = p.orbit.as_ref().map(|o| o.half_norm()).unwrap_or(1.0);
    let tracker = Tracker::new(&at, &branch.param, *settings, start_norm)?;
    let e = tracker.evaluate(&p.u, p.param)?;
    let t1 = &p.tangent;
    let mut t2: Option<DVector<f64>> = None;
    for v in tracker.null_space(&e, 2) {
        let w = &v - t1 * tracker.weighted(t1).dot(&v);
        let n = tracker.wnorm(&w);
        if n > 0.5 && t2.as_ref().is_none_or(|c| tracker.wnorm(c) < n) {
            t2 = Some(w / n);
        }
    }
    let t2 = t2.ok_or_else(|| Error::NumericalQuality("no second null direction at branch point".into()))?;
    let t2 = tracker.orient_largest(t2) * sign.signum();
    let z0 = Tracker::stack(&p.u, p.param);
    let s = tracker.correct(&(&z0 + &t2 * epsilon), &t2)?;
    let orbit = tracker.at(s.mu)?.orbit_from(&s.u, s.iterations)?;
    let dist = (orbit.measures.x2_at_0 - p.measures.x2_at_0)
        .abs()
        .max((orbit.measures.l2_norm - p.measures.l2_norm).abs());
    if dist < 10.0 * bvp.settings().tol {
        return Err(Error::NumericalQuality("switched orbit coincides with the original branch".into()));
    }
    // Orient the new tangent away from the branch point.
    let tangent = if s.tangent.dot(&tracker.weighted(&t2)) < 0.0 { -s.tangent } else { s.tangent };
    Ok(BranchStart { orbit, u: s.u, param: s.mu, tangent })
}

impl Tracker<'_> {
    fn orient_largest(&self, mut t: DVector<f64>) -> DVector<f64> {
        let (imax, _) = t.iter().enumerate().fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        if t[imax] < 0.0 {
            t.neg_mut();
        }
        t
    }
}

/// [`switch_branch_signed`] trying +ε first, then −ε.
pub fn switch_branch(
    bvp: &HomoclinicBvp,
    branch: &Branch,
    special_index: usize,
    settings: &ContinuationSettings,
) -> Result<BranchStart> {
    let mut last = None;
    for sign in [1.0, -1.0] {
        match switch_branch_signed(bvp, branch, special_index, sign, SWITCH_EPSILON, settings) {
            Ok(s) => return Ok(s),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("two attempts"))
}

/// Outcome of comparing a continued diagram with the Melnikov prediction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Consistency {
    pub kind: SpecialKind,
    pub predicted_param: f64,
    pub found_param: f64,
    pub location_error: f64,
    /// Log-log exponent of |μ − μ*| against |α − α*| (saddle-node).
    pub exponent: Option<f64>,
    /// Slope dα/dμ at the crossing (transcritical).
    pub slope: Option<f64>,
    /// max |μ_A(α) − μ_B(−α)| over matched amplitudes (pitchfork).
    pub evenness_error: Option<f64>,
    /// Observed sign of μ − μ* on the bifurcating branch.
    pub observed_side: Option<f64>,
    pub predicted_side: Option<f64>,
    pub side_consistent: bool,
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Exponent p of |Δμ| ≈ C|Δα|^p (1 + kΔα): least squares for
/// ln|Δμ| = p ln|Δα| + ln C + kΔα. The linear term absorbs the cubic
/// asymmetry of the fold, which otherwise biases a plain log-log slope
/// taken over both sides.
fn corrected_exponent(pts: &[(f64, f64)]) -> Result<f64> {
    let a = DMatrix::from_fn(pts.len(), 3, |i, j| match j {
        0 => pts[i].1.abs().ln(),
        1 => 1.0,
        _ => pts[i].1,
    });
    let y = DVector::from_iterator(pts.len(), pts.iter().map(|(dm, _)| dm.abs().max(1e-300).ln()));
    let sol = a
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::Inconclusive(format!("fold fit: {e}")))?;
    Ok(sol[0])
}

/// Amplitude used for local fits: x₂(0).
fn amplitude(p: &BranchPoint) -> f64 {
    p.measures.x2_at_0
}

/// Checks location, local shape and side of a bifurcation against a
/// Melnikov report. `primary` carries the special point; `switched` holds
/// the bifurcating branches for transcritical/pitchfork cases.
pub fn verify_against_melnikov(
    primary: &Branch,
    switched: &[&Branch],
    report: &MelnikovReport,
) -> Result<Consistency> {
    let (kind, predicted) = match report.mode {
        Mode::SaddleNode => (SpecialKind::Fold, 0.0),
        Mode::Transcritical | Mode::Pitchfork => (SpecialKind::BranchPoint, report.beta1),
    };
    let sp = primary
        .specials_of(kind)
        .min_by(|a, b| (a.param - predicted).abs().total_cmp(&(b.param - predicted).abs()))
        .ok_or_else(|| Error::Inconclusive(format!("no {} on the branch", kind.label())))?;
    let mu_star = sp.param;
    let alpha_star = sp.measures.x2_at_0;
    let predicted_side = report.classification.branch_side();
    let mut out = Consistency {
        kind,
        predicted_param: predicted,
        found_param: mu_star,
        location_error: (mu_star - predicted).abs(),
        exponent: None,
        slope: None,
        evenness_error: None,
        observed_side: None,
        predicted_side,
        side_consistent: false,
    };
    // points within a small amplitude window around the special point
    let near = |b: &Branch, lo: f64, hi: f64| -> Vec<(f64, f64)> {
        b.points
            .iter()
            .filter(|p| p.special.is_none())
            .map(|p| (p.param - mu_star, amplitude(p) - alpha_star))
            .filter(|(_, da)| da.abs() >= lo && da.abs() <= hi)
            .collect()
    };
    let side_of = |pts: &[(f64, f64)]| -> Option<f64> {
        let pos = pts.iter().filter(|(dm, _)| *dm > 0.0).count();
        let neg = pts.iter().filter(|(dm, _)| *dm < 0.0).count();
        match (pos, neg) {
            (p, 0) if p > 0 => Some(1.0),
            (0, n) if n > 0 => Some(-1.0),
            _ => None,
        }
    };
    match report.mode {
        Mode::SaddleNode => {
            // Only the stretch between the neighbouring folds belongs to
            // this fold's local quadratic picture.
            let lo_idx = primary.specials_of(SpecialKind::Fold).map(|f| f.index).filter(|&i| i < sp.index).max();
            let hi_idx = primary.specials_of(SpecialKind::Fold).map(|f| f.index).filter(|&i| i > sp.index).min();
            let local = Branch {
                points: primary
                    .points
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| lo_idx.is_none_or(|l| *i > l) && hi_idx.is_none_or(|h| *i < h))
                    .map(|(_, p)| p.clone())
                    .collect(),
                specials: Vec::new(),
                ..primary.clone()
            };
            // Stay within half the amplitude distance to the next fold.
            let reach = primary
                .specials_of(SpecialKind::Fold)
                .filter(|f| f.index != sp.index)
                .map(|f| 0.5 * (f.measures.x2_at_0 - alpha_star).abs())
                .fold(0.1, f64::min);
            let pts = near(&local, 1e-3, reach);
            if pts.len() < 4 {
                return Err(Error::Inconclusive(format!("{} points near the fold", pts.len())));
            }
            out.exponent = Some(corrected_exponent(&pts)?);
            out.observed_side = side_of(&pts);
            out.side_consistent = predicted_side.is_some() && out.observed_side == predicted_side;
        }
        Mode::Transcritical => {
            let mut pts: Vec<(f64, f64)> = Vec::new();
            for b in switched {
                pts.extend(near(b, 1e-4, 0.05));
            }
            if pts.len() < 2 {
                return Err(Error::Inconclusive("too few points on the crossing branch".into()));
            }
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            out.slope = Some(least_squares_slope(&xs, &ys));
            out.observed_side = side_of(&pts);
            // Both sides populated is what a transcritical crossing predicts.
            out.side_consistent = report.classification == Classification::Transcritical && out.observed_side.is_none();
        }
        Mode::Pitchfork => {
            if switched.len() < 2 {
                return Err(Error::Inconclusive("pitchfork check needs the conjugate pair".into()));
            }
            let a = near(switched[0], 1e-3, 0.2);
            let b = near(switched[1], 1e-3, 0.2);
            if a.len() < 3 || b.len() < 3 {
                return Err(Error::Inconclusive("too few points on the switched branches".into()));
            }
            let mut all = a.clone();
            all.extend(b.iter().copied());
            out.observed_side = side_of(&all);
            out.side_consistent = predicted_side.is_some() && out.observed_side == predicted_side;
            // Evenness: interpolate branch B's μ at the mirrored amplitudes of A.
            let mut bs = b.clone();
            bs.sort_by(|x, y| x.1.total_cmp(&y.1));
            let mut worst: f64 = 0.0;
            for (dm, da) in &a {
                let target = -da;
                if let Some(w) = bs.windows(2).find(|w| (w[0].1 - target) * (w[1].1 - target) <= 0.0) {
                    let f = (target - w[0].1) / (w[1].1 - w[0].1);
                    let mb = w[0].0 + f * (w[1].0 - w[0].0);
                    worst = worst.max((dm - mb).abs());
                }
            }
            out.evenness_error = Some(worst);
        }
    }
    Ok(out)
}
