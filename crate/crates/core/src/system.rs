//! Reversible vector fields: the trait every solver consumes, axiom checks,
//! the saddle spectrum at the origin and the boundary operators built from it.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named real parameters.
pub type ParamMap = BTreeMap<String, f64>;

/// Threshold on |Re λ| below which the origin is declared non-hyperbolic.
pub const HYPERBOLICITY_TOL: f64 = 1e-8;

/// A vector field ẋ = f(x; μ) together with a linear involution R such that
/// f(Rx; μ) = −R f(x; μ).
///
/// Parameters live inside the value; continuation works on clones with a
/// modified parameter. Higher derivatives fall back to central differences
/// when a system does not override them; the fallback loses roughly a third
/// (d2f) or half (d3f) of the significant digits.
pub trait ReversibleSystem: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn params(&self) -> ParamMap;
    fn set_param(&mut self, name: &str, value: f64) -> Result<()>;
    fn f(&self, x: &DVector<f64>) -> DVector<f64>;
    fn df(&self, x: &DVector<f64>) -> DMatrix<f64>;
    fn involution(&self) -> DMatrix<f64>;
    fn box_clone(&self) -> Box<dyn ReversibleSystem>;

    fn param(&self, name: &str) -> Result<f64> {
        self.params()
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    /// D²_x f(x)(u, v).
    fn d2f(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let h = fd_step(x);
        (self.df(&(x + u * h)) * v - self.df(&(x - u * h)) * v) / (2.0 * h)
    }

    /// D³_x f(x)(u, v, w).
    fn d3f(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let h = fd_step(x).sqrt() * 1e-2;
        (self.d2f(&(x + w * h), u, v) - self.d2f(&(x - w * h), u, v)) / (2.0 * h)
    }

    /// ∂f/∂μ for the named parameter.
    fn dmu_f(&self, x: &DVector<f64>, name: &str) -> Result<DVector<f64>> {
        let mu = self.param(name)?;
        let h = fd_step(&DVector::from_element(1, mu));
        let mut plus = self.box_clone();
        let mut minus = self.box_clone();
        plus.set_param(name, mu + h)?;
        minus.set_param(name, mu - h)?;
        Ok((plus.f(x) - minus.f(x)) / (2.0 * h))
    }

    /// ∂/∂μ (D_x f) applied to v.
    fn dmu_df(&self, x: &DVector<f64>, name: &str, v: &DVector<f64>) -> Result<DVector<f64>> {
        let mu = self.param(name)?;
        let h = fd_step(&DVector::from_element(1, mu));
        let mut plus = self.box_clone();
        let mut minus = self.box_clone();
        plus.set_param(name, mu + h)?;
        minus.set_param(name, mu - h)?;
        Ok((plus.df(x) * v - minus.df(x) * v) / (2.0 * h))
    }

    /// Symmetric positive definite Gram matrix of the inner product for which
    /// Fix(−R) = Fix(R)^⊥. The Euclidean product suits orthogonal R.
    fn inner_product(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim())
    }
}

impl Clone for Box<dyn ReversibleSystem> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

fn fd_step(x: &DVector<f64>) -> f64 {
    f64::EPSILON.cbrt() * x.amax().max(1.0)
}

/// A user-defined system assembled from closures.
#[derive(Clone)]
pub struct CallbackSystem {
    name: String,
    dim: usize,
    params: ParamMap,
    field: Arc<dyn Fn(&DVector<f64>, &ParamMap) -> DVector<f64> + Send + Sync>,
    jacobian: Option<Arc<dyn Fn(&DVector<f64>, &ParamMap) -> DMatrix<f64> + Send + Sync>>,
    involution: DMatrix<f64>,
    gram: Option<DMatrix<f64>>,
}

impl CallbackSystem {
    pub fn new<F>(name: &str, params: ParamMap, involution: DMatrix<f64>, field: F) -> Result<Self>
    where
        F: Fn(&DVector<f64>, &ParamMap) -> DVector<f64> + Send + Sync + 'static,
    {
        let dim = involution.nrows();
        if dim == 0 || !dim.is_multiple_of(2) || !involution.is_square() {
            return Err(Error::Config(format!(
                "state dimension must be even and positive with a square involution, got {}×{}",
                involution.nrows(),
                involution.ncols()
            )));
        }
        Ok(CallbackSystem {
            name: name.to_string(),
            dim,
            params,
            field: Arc::new(field),
            jacobian: None,
            involution,
            gram: None,
        })
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&DVector<f64>, &ParamMap) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_inner_product(mut self, gram: DMatrix<f64>) -> Result<Self> {
        if gram.nrows() != self.dim || !gram.is_square() {
            return Err(Error::Config("inner-product matrix has the wrong shape".into()));
        }
        if (&gram - gram.transpose()).amax() > 1e-12 || gram.clone().cholesky().is_none() {
            return Err(Error::Config("inner-product matrix must be symmetric positive definite".into()));
        }
        self.gram = Some(gram);
        Ok(self)
    }
}

impl ReversibleSystem for CallbackSystem {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn params(&self) -> ParamMap {
        self.params.clone()
    }
    fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        match self.params.get_mut(name) {
            Some(v) => {
                *v = value;
                Ok(())
            }
            None => Err(Error::UnknownParameter(name.to_string())),
        }
    }
    fn f(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.field)(x, &self.params)
    }
    fn df(&self, x: &DVector<f64>) -> DMatrix<f64> {
        if let Some(j) = &self.jacobian {
            return j(x, &self.params);
        }
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            let h = f64::EPSILON.cbrt() * x[k].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            m.set_column(k, &((self.f(&xp) - self.f(&xm)) / (2.0 * h)));
        }
        m
    }
    fn involution(&self) -> DMatrix<f64> {
        self.involution.clone()
    }
    fn inner_product(&self) -> DMatrix<f64> {
        self.gram.clone().unwrap_or_else(|| DMatrix::identity(self.dim, self.dim))
    }
    fn box_clone(&self) -> Box<dyn ReversibleSystem> {
        Box::new(self.clone())
    }
}

// ---------------------------------------------------------------------------
// Axiom checks

/// Outcome of the sampled reversibility check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReversibilityReport {
    pub samples: usize,
    /// max ‖f(Rx) + R f(x)‖ over the samples.
    pub max_residual: f64,
    /// max of the residual divided by 1 + ‖f(x)‖.
    pub max_relative: f64,
    pub involutive: bool,
    pub pass: bool,
}

fn sample_state(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.gen_range(-2.0..2.0))
}

fn is_involutive(r: &DMatrix<f64>) -> bool {
    let n = r.nrows();
    (r * r - DMatrix::<f64>::identity(n, n)).amax() <= 1e-12 * r.amax().max(1.0)
}

/// Samples states in the box [−2, 2]^dim and checks f(Rx) + R f(x) = 0. The
/// origin is always among the samples.
pub fn check_reversibility(system: &dyn ReversibleSystem, n_samples: usize, seed: u64) -> Result<ReversibilityReport> {
    let dim = system.dim();
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::Config(format!("state dimension must be even, got {dim}")));
    }
    if n_samples == 0 {
        return Err(Error::Config("at least one sample is required".into()));
    }
    let r = system.involution();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut max_res, mut max_rel) = (0.0f64, 0.0f64);
    for k in 0..n_samples {
        let x = if k == 0 { DVector::zeros(dim) } else { sample_state(&mut rng, dim) };
        let fx = system.f(&x);
        let res = (system.f(&(&r * &x)) + &r * &fx).norm();
        max_res = max_res.max(res);
        max_rel = max_rel.max(res / (1.0 + fx.norm()));
    }
    let involutive = is_involutive(&r);
    Ok(ReversibilityReport {
        samples: n_samples,
        max_residual: max_res,
        max_relative: max_rel,
        involutive,
        pass: involutive && max_rel <= 1e-10,
    })
}

/// Structural checks beyond reversibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxiomReport {
    pub involutive: bool,
    pub fix_dim: usize,
    pub anti_fix_dim: usize,
    pub equilibrium_residual: f64,
    /// Largest asymmetry of d2f/d3f under argument permutation.
    pub tensor_asymmetry: f64,
}

pub fn check_axioms(system: &dyn ReversibleSystem, n_samples: usize, seed: u64) -> AxiomReport {
    let dim = system.dim();
    let r = system.involution();
    let eye = DMatrix::<f64>::identity(dim, dim);
    let rank = |m: DMatrix<f64>| m.rank(1e-10);
    let fix_dim = dim - rank(&r - &eye);
    let anti_fix_dim = dim - rank(&r + &eye);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut asym = 0.0f64;
    for _ in 0..n_samples {
        let x = sample_state(&mut rng, dim);
        let u = sample_state(&mut rng, dim);
        let v = sample_state(&mut rng, dim);
        let w = sample_state(&mut rng, dim);
        let a = system.d2f(&x, &u, &v);
        asym = asym.max((&a - system.d2f(&x, &v, &u)).amax() / (1.0 + a.amax()));
        let b = system.d3f(&x, &u, &v, &w);
        for other in [system.d3f(&x, &v, &u, &w), system.d3f(&x, &w, &v, &u), system.d3f(&x, &u, &w, &v)] {
            asym = asym.max((&b - other).amax() / (1.0 + b.amax()));
        }
    }
    AxiomReport {
        involutive: is_involutive(&r),
        fix_dim,
        anti_fix_dim,
        equilibrium_residual: system.f(&DVector::zeros(dim)).amax(),
        tensor_asymmetry: asym,
    }
}

// ---------------------------------------------------------------------------
// Spectrum at the origin

/// Eigen-data of the Jacobian at the saddle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaddleSpectrum {
    /// All eigenvalues, sorted by real part (then imaginary part).
    pub eigenvalues: Vec<Complex64>,
    pub unstable_values: Vec<Complex64>,
    pub stable_values: Vec<Complex64>,
    /// Right eigenvectors for the eigenvalues with positive real part.
    pub unstable_right: Vec<DVector<Complex64>>,
    /// Left (row) eigenvectors for the eigenvalues with negative real part.
    pub stable_left: Vec<DVector<Complex64>>,
}

fn cmp_complex(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Unit norm, first component with modulus above 1e−12 made real positive.
fn normalize_vector(mut v: DVector<Complex64>) -> DVector<Complex64> {
    let nrm = v.norm();
    v /= Complex64::new(nrm, 0.0);
    if let Some(c) = v.iter().find(|c| c.norm() > 1e-12).copied() {
        let phase = c / c.norm();
        v /= phase;
    }
    v
}

/// Null vectors of a complex matrix from its SVD: the `count` right singular
/// vectors with the smallest singular values, plus the largest of those
/// singular values relative to the matrix scale.
fn null_vectors(m: &DMatrix<Complex64>, count: usize) -> (Vec<DVector<Complex64>>, f64) {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let scale = svd.singular_values.amax().max(1.0);
    let worst = idx[..count].iter().map(|&i| svd.singular_values[i]).fold(0.0, f64::max) / scale;
    let vecs = idx[..count]
        .iter()
        .map(|&i| v_t.row(i).transpose().map(|c| c.conj()))
        .collect();
    (vecs, worst)
}

/// Eigen-decomposition of D_x f(0): eigenvalues from the real Schur form,
/// right and left eigenvectors as SVD null vectors of (J − λI) and (J − λI)ᵀ.
pub fn equilibrium_spectrum(system: &dyn ReversibleSystem) -> Result<SaddleSpectrum> {
    let dim = system.dim();
    let j = system.df(&DVector::zeros(dim));
    let mut eig: Vec<Complex64> = j.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(cmp_complex);
    for l in &eig {
        if l.re.abs() < HYPERBOLICITY_TOL {
            return Err(Error::NonHyperbolic { re: l.re, im: l.im });
        }
    }
    let jc = j.map(|v| Complex64::new(v, 0.0));
    let scale = j.amax().max(1.0);

    // Cluster numerically equal eigenvalues so that repeated semisimple
    // eigenvalues get a full eigenspace.
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for l in &eig {
        match clusters.last_mut() {
            Some((c, m)) if (*c - *l).norm() <= 1e-8 * scale => *m += 1,
            _ => clusters.push((*l, 1)),
        }
    }
    let mut unstable_right = Vec::new();
    let mut stable_left = Vec::new();
    let mut unstable_values = Vec::new();
    let mut stable_values = Vec::new();
    for (l, m) in clusters {
        let shifted = &jc - DMatrix::<Complex64>::identity(dim, dim) * l;
        let (right, worst_r) = null_vectors(&shifted, m);
        let (left, worst_l) = null_vectors(&shifted.transpose(), m);
        if worst_r > 1e-7 || worst_l > 1e-7 {
            return Err(Error::DefectiveSpectrum(format!(
                "eigenvalue {l} has geometric multiplicity below {m}"
            )));
        }
        if l.re > 0.0 {
            unstable_right.extend(right.into_iter().map(normalize_vector));
            unstable_values.extend(std::iter::repeat_n(l, m));
        } else {
            stable_left.extend(left.into_iter().map(normalize_vector));
            stable_values.extend(std::iter::repeat_n(l, m));
        }
    }
    if unstable_values.len() != dim / 2 {
        return Err(Error::DefectiveSpectrum(format!(
            "expected {} unstable eigenvalues, found {}",
            dim / 2,
            unstable_values.len()
        )));
    }
    Ok(SaddleSpectrum { eigenvalues: eig, unstable_values, stable_values, unstable_right, stable_left })
}

/// Real n×2n matrix whose rows span the stable left eigenspace: rows are the
/// left eigenvectors for real eigenvalues and the normalized real and
/// imaginary parts for complex-conjugate pairs.
pub fn build_ls(spectrum: &SaddleSpectrum) -> Result<DMatrix<f64>> {
    let n = spectrum.stable_left.len();
    if n == 0 || n != spectrum.unstable_right.len() {
        return Err(Error::DefectiveSpectrum("stable/unstable dimensions differ".into()));
    }
    let dim = spectrum.stable_left[0].len();
    let mut rows: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut k = 0;
    while k < n {
        let l = spectrum.stable_values[k];
        let w = &spectrum.stable_left[k];
        if l.im.abs() <= 1e-12 {
            rows.push(w.map(|c| c.re));
            k += 1;
        } else {
            rows.push(w.map(|c| c.re));
            rows.push(w.map(|c| c.im));
            k += 2;
        }
    }
    let mut ls = DMatrix::zeros(n, dim);
    for (i, r) in rows.into_iter().take(n).enumerate() {
        let mut r = r.clone() / r.norm();
        if let Some(c) = r.iter().find(|c| c.abs() > 1e-12).copied() {
            if c < 0.0 {
                r = -r;
            }
        }
        ls.set_row(i, &r.transpose());
    }
    Ok(ls)
}

/// Coordinates on Fix(R) and on Fix(−R): two n×2n matrices whose rows are
/// G-orthonormal bases of the ±1 eigenspaces of R, composed with G so that
/// `P x` reads off the components.
pub fn fix_r_projector(system: &dyn ReversibleSystem) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let r = system.involution();
    let dim = r.nrows();
    if !is_involutive(&r) {
        return Err(Error::Config("R is not an involution".into()));
    }
    let g = system.inner_product();
    let eye = DMatrix::<f64>::identity(dim, dim);
    let basis = |m: DMatrix<f64>| -> DMatrix<f64> {
        // Column space of the projector (I ± R)/2 spans the eigenspace.
        let svd = m.svd(true, false);
        let u = svd.u.expect("requested U");
        let mut cols: Vec<DVector<f64>> = Vec::new();
        for (i, s) in svd.singular_values.iter().enumerate() {
            if *s > 1e-10 {
                cols.push(u.column(i).into_owned());
            }
        }
        // G-orthonormalize (Gram–Schmidt) and fix signs deterministically.
        let mut out: Vec<DVector<f64>> = Vec::new();
        for mut c in cols {
            for q in &out {
                let proj = (q.transpose() * &g * &c)[0];
                c -= q * proj;
            }
            let nrm = (c.transpose() * &g * &c)[0].sqrt();
            c /= nrm;
            out.push(c);
        }
        if out.is_empty() {
            return DMatrix::zeros(0, dim);
        }
        let mut mat = DMatrix::from_columns(&out).transpose() * &g;
        for mut row in mat.row_iter_mut() {
            if let Some(c) = row.iter().find(|c| c.abs() > 1e-12).copied() {
                if c < 0.0 {
                    row.neg_mut();
                }
            }
        }
        mat
    };
    let plus = basis((&eye + &r) * 0.5);
    let minus = basis((&eye - &r) * 0.5);
    if plus.nrows() != dim / 2 || minus.nrows() != dim / 2 {
        return Err(Error::Config(format!(
            "dim Fix(R) = {}, dim Fix(−R) = {}; both must equal {}",
            plus.nrows(),
            minus.nrows(),
            dim / 2
        )));
    }
    Ok((canonical_rows(plus), canonical_rows(minus)))
}

/// For coordinate-aligned eigenspaces the SVD may return rows in any order;
/// sort rows by the index of their leading entry so that output is stable.
fn canonical_rows(m: DMatrix<f64>) -> DMatrix<f64> {
    let mut rows: Vec<_> = m.row_iter().map(|r| r.into_owned()).collect();
    let lead = |r: &nalgebra::RowDVector<f64>| r.iter().position(|c| c.abs() > 1e-12).unwrap_or(usize::MAX);
    rows.sort_by_key(lead);
    DMatrix::from_rows(&rows)
}

// ---------------------------------------------------------------------------
// Registry

type Constructor = Arc<dyn Fn(&ParamMap) -> Result<Box<dyn ReversibleSystem>> + Send + Sync>;

fn registry() -> &'static RwLock<BTreeMap<String, Constructor>> {
    static REG: std::sync::OnceLock<RwLock<BTreeMap<String, Constructor>>> = std::sync::OnceLock::new();
    REG.get_or_init(|| {
        let mut m: BTreeMap<String, Constructor> = BTreeMap::new();
        m.insert(
            crate::duffing::REGISTRY_NAME.to_string(),
            Arc::new(|p: &ParamMap| Ok(Box::new(crate::duffing::Duffing4d::from_map(p)?) as Box<dyn ReversibleSystem>)),
        );
        RwLock::new(m)
    })
}

/// Registers a constructor under `name`, replacing any previous entry.
pub fn register_system<F>(name: &str, ctor: F)
where
    F: Fn(&ParamMap) -> Result<Box<dyn ReversibleSystem>> + Send + Sync + 'static,
{
    registry().write().expect("registry lock").insert(name.to_string(), Arc::new(ctor));
}

/// Builds a registered system with the given parameter overrides.
pub fn system_by_name(name: &str, params: &ParamMap) -> Result<Box<dyn ReversibleSystem>> {
    let ctor = registry()
        .read()
        .expect("registry lock")
        .get(name)
        .cloned()
        .ok_or_else(|| Error::Config(format!("no system registered under `{name}`")))?;
    ctor(params)
}

pub fn registered_systems() -> Vec<String> {
    registry().read().expect("registry lock").keys().cloned().collect()
}
