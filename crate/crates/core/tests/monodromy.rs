use nalgebra::DVector;
use num_complex::Complex64 as C;
use proptest::prelude::*;
use revhom::duffing::{block1_bounded, bounded_xi2, ExampleParams};
use revhom::monodromy::*;
use revhom::Error;

fn params(s: f64, beta1: f64) -> ExampleParams {
    ExampleParams { s, beta1, beta2: 0.0, beta3: 0.0, ell: 0 }
}

fn resonant(s: f64, ell: u32) -> ExampleParams {
    ExampleParams::at_resonance(s, ell, 0.0, 0.0).unwrap()
}

fn pair(block: u8, p: &ExampleParams, eps: f64) -> (MonodromyResult, MonodromyResult) {
    let plus = monodromy_matrix(block, p, &ChartLoop::new(Chart::Plus, eps).unwrap()).unwrap();
    let minus = monodromy_matrix(block, p, &ChartLoop::new(Chart::Minus, eps).unwrap()).unwrap();
    (plus, minus)
}

fn cvec(a: f64, b: f64) -> DVector<C> {
    DVector::from_vec(vec![C::new(a, 0.0), C::new(b, 0.0)])
}

fn det(m: &nalgebra::DMatrix<C>) -> C {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

#[test]
fn unit_determinant_and_exponent_eigenvalues() {
    let p = resonant(2.0, 0);
    for eps in [1e-3, 1e-4, 1e-5] {
        for block in [1u8, 2] {
            let (plus, minus) = pair(block, &p, eps);
            for m in [&plus, &minus] {
                assert!(m.det_residual <= 1e-8, "{}", m.det_residual);
                assert!((det(&m.matrix) - 1.0).norm() <= 1e-8);
                let a = if block == 1 { 1.0 } else { 2f64.sqrt() };
                let want = C::new(0.0, 2.0 * std::f64::consts::PI * a).exp();
                assert!((m.eigenvalues[0] - want).norm() <= 1e-8);
                assert!((m.eigenvalues[1] - want.conj()).norm() <= 1e-8);
            }
        }
    }
}

#[test]
fn entries_converge_as_radius_shrinks() {
    let p = params(2.0, 2.5);
    let ms: Vec<_> = [1e-3, 1e-4, 1e-5].iter().map(|&e| pair(2, &p, e).0.matrix).collect();
    for w in ms.windows(2) {
        let d = (&w[0] - &w[1]).iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(d <= 1e-5, "{d}");
    }
}

#[test]
fn anchor_loop_agrees() {
    for (block, p) in [(1u8, resonant(2.0, 1)), (2, params(3.0, 4.0)), (2, resonant(2.0, 2))] {
        let (plus, minus) = pair(block, &p, 1e-4);
        assert!(plus.anchor_discrepancy <= 1e-7, "{}", plus.anchor_discrepancy);
        assert!(minus.anchor_discrepancy <= 1e-7, "{}", minus.anchor_discrepancy);
    }
}

#[test]
fn resonance_gives_common_line_through_bounded_solution() {
    for (s, ell) in [(2.0, 0), (2.0, 1), (3.0, 0), (2.0, 2)] {
        let p = resonant(s, ell);
        let (plus, minus) = pair(2, &p, 1e-4);
        let (x, dx) = bounded_xi2(0.0, s, ell).unwrap();
        let vb = cvec(x, dx);
        let d = check_triangularizable(&plus, &minus, Some(&vb)).unwrap();
        assert!(d.triangularizable && d.angle <= 1e-5, "s={s} ell={ell}: {}", d.angle);
        assert_eq!(d.bounded_fixed, Some(true), "{:?}", d.bounded_residuals);
        assert!(line_angle(d.common_line.as_ref().unwrap(), &vb) <= 1e-5);
    }
}

#[test]
fn off_resonance_has_no_common_line() {
    let (plus, minus) = pair(2, &params(2.0, 2.5), 1e-4);
    let d = check_triangularizable(&plus, &minus, None).unwrap();
    assert!(!d.triangularizable);
    assert!(d.angle > 0.1, "{}", d.angle);
    assert!(d.common_line.is_none());
}

#[test]
fn block_one_is_unipotent_with_logarithm() {
    let p = resonant(2.0, 0);
    let (plus, minus) = pair(1, &p, 1e-4);
    let b = block1_bounded(0.0);
    let vb = cvec(b[0], b[1]);
    for m in [&plus, &minus] {
        let id = nalgebra::DMatrix::<C>::identity(2, 2);
        let n = &m.matrix - &id;
        let n2 = &n * &n;
        assert!(n2.iter().map(|c| c.norm()).fold(0.0, f64::max) <= 1e-8);
        assert!(n.iter().map(|c| c.norm()).fold(0.0, f64::max) >= 1e-3);
        assert_eq!(m.eigenvectors.len(), 1);
        assert!(line_angle(m.decaying_direction(), &vb) <= 1e-6);
    }
    let d = check_triangularizable(&plus, &minus, Some(&vb)).unwrap();
    assert!(d.triangularizable);
    assert_eq!(d.bounded_fixed, Some(true));
}

#[test]
fn block_diagonal_preserves_flag_at_resonance() {
    let p = resonant(2.0, 1);
    let b1 = block1_bounded(0.0);
    let (x, dx) = bounded_xi2(0.0, 2.0, 1).unwrap();
    let f1 = DVector::from_vec(vec![C::new(b1[0], 0.0), C::new(b1[1], 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)]);
    let f2 = DVector::from_vec(vec![C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(x, 0.0), C::new(dx, 0.0)]);
    for chart in [Chart::Plus, Chart::Minus] {
        let c = ChartLoop::new(chart, 1e-4).unwrap();
        let m = block_diagonal(&monodromy_matrix(1, &p, &c).unwrap(), &monodromy_matrix(2, &p, &c).unwrap()).unwrap();
        assert!(flag_residual(&m, &[f1.clone(), f2.clone()]) <= 1e-6);
    }
}

#[test]
fn chart_coefficients_and_residue() {
    let p = params(2.0, 1.5);
    let c = ChartLoop::new(Chart::Plus, 1e-3).unwrap();
    assert!(matches!(chart_coefficients(2, &p, &c, C::new(1.0, 0.0)), Err(Error::Domain(_))));
    assert!(matches!(chart_coefficients(2, &p, &c, C::new(0.0, 1.0)), Err(Error::Domain(_))));
    assert!(matches!(chart_coefficients(2, &p, &c, C::new(0.0, 0.0)), Err(Error::Domain(_))));
    // z·B(z) → residue as z → 0
    let z = C::new(1e-7, 2e-7);
    let zb = chart_coefficients(2, &p, &c, z).unwrap() * z;
    let r = chart_residue(2, &p, &c).unwrap();
    assert!((zb - &r).iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-10);
    assert_eq!(frobenius_exponents(2, &p, &c).unwrap(), [-(2f64.sqrt()), 2f64.sqrt()]);
    // matches the real potential on the real axis (t = 0.3 ⇒ z = e^{−0.3})
    let t: f64 = 0.3;
    let z = C::new((-t).exp(), 0.0);
    let b = chart_coefficients(2, &p, &c, z).unwrap();
    let q = 2.0 - 2.0 * 1.5 / t.cosh().powi(2);
    assert!(((b[(1, 0)] * z * -1.0).re - q).abs() < 1e-12);
}

#[test]
fn invalid_requests() {
    assert!(ChartLoop::new(Chart::Plus, 0.05).is_err());
    assert!(ChartLoop::new(Chart::Plus, 0.0).is_err());
    let p = params(2.0, 2.5);
    let c = ChartLoop::new(Chart::Plus, 1e-3).unwrap();
    assert!(matches!(monodromy_matrix(3, &p, &c), Err(Error::Usage(_))));
    let (plus, minus) = pair(2, &p, 1e-3);
    assert!(matches!(check_triangularizable(&minus, &plus, None), Err(Error::Usage(_))));
    let other = monodromy_matrix(1, &p, &ChartLoop::new(Chart::Minus, 1e-3).unwrap()).unwrap();
    assert!(matches!(check_triangularizable(&plus, &other, None), Err(Error::Usage(_))));
}

#[test]
fn json_report_layout() {
    let m = monodromy_matrix(2, &params(2.0, 2.5), &ChartLoop::new(Chart::Minus, 1e-3).unwrap()).unwrap();
    let js = m.to_json();
    assert_eq!(js["chart"], "sigma_minus");
    assert_eq!(js["matrix"]["re"].as_array().unwrap().len(), 2);
    assert!(js["det_residual"].as_f64().unwrap() <= 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn determinant_is_one_and_charts_are_reflections(s in 1.2f64..4.0, beta1 in 0.5f64..6.0) {
        let (plus, minus) = pair(2, &params(s, beta1), 1e-3);
        prop_assert!((det(&plus.matrix) - 1.0).norm() <= 1e-8);
        // even potential: M₋ = R M₊ R with R = diag(1, −1)
        let r = nalgebra::DMatrix::from_diagonal(&cvec(1.0, -1.0));
        let refl = &r * &plus.matrix * &r;
        let d = (&refl - &minus.matrix).iter().map(|c| c.norm()).fold(0.0, f64::max);
        prop_assert!(d <= 1e-7, "{}", d);
    }
}
