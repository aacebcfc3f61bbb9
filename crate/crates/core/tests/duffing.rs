use approx::assert_relative_eq;
use nalgebra::DVector;
use proptest::prelude::*;
use revhom::duffing::*;
use revhom::system::{check_reversibility, ReversibleSystem};
use revhom::{Coupling, Error, ParamMap};

fn vec4(a: [f64; 4]) -> DVector<f64> {
    DVector::from_row_slice(&a)
}

fn sys(beta1: f64, beta2: f64, beta3: f64) -> Duffing4d {
    Duffing4d::new(ExampleParams { s: 2.0, beta1, beta2, beta3, ell: 0 })
}

#[test]
fn homoclinic_orbit_solves_the_plane_equation() {
    let f = sys(1.7, 0.0, 4.0);
    for t in [-6.0, -1.0, -0.2, 0.0, 0.7, 3.0] {
        let h = 1e-5;
        let x = homoclinic_exact(t, 1.0);
        let dx = (homoclinic_exact(t + h, 1.0) - homoclinic_exact(t - h, 1.0)) / (2.0 * h);
        assert!((f.f(&x) - dx).amax() <= 1e-9, "t = {t}");
    }
    // R-symmetry: x(−t) = R x(t)
    let (r, _, _) = involutions();
    assert!((homoclinic_exact(-1.3, 1.0) - &r * homoclinic_exact(1.3, 1.0)).amax() <= 1e-15);
}

#[test]
fn x2_reflection_symmetry_when_beta2_and_beta3_vanish() {
    let (_, s, sp) = involutions();
    let x = vec4([0.3, -0.7, 1.1, 0.2]);
    let f = sys(1.5, 0.0, 0.0);
    assert!((f.f(&(&s * &x)) - &s * f.f(&x)).amax() <= 1e-14);
    // β₃ ≠ 0 breaks S; β₂ = β₃ = 0 keeps S′ as well
    let g = sys(1.5, 0.0, 4.0);
    assert!((g.f(&(&s * &x)) - &s * g.f(&x)).amax() > 1e-3);
    assert!((f.f(&(&sp * &x)) - &sp * f.f(&x)).amax() <= 1e-14);
}

#[test]
fn printed_coupling_changes_only_the_x1_equation() {
    let x = vec4([0.4, 0.5, -0.1, 0.3]);
    let a = sys(2.0, 0.1, 1.0);
    let b = a.with_coupling(Coupling::Fixed(8.0));
    let d = a.f(&x) - b.f(&x);
    assert_relative_eq!(d[2], (8.0 - 2.0) * 0.4 * 0.25, epsilon = 1e-14);
    assert_eq!((d[0], d[1], d[3]), (0.0, 0.0, 0.0));
    assert_eq!(b.gamma(), 8.0);
}

#[test]
fn resonance_formula_and_series() {
    assert_relative_eq!(resonance_beta1(2.0, 0).unwrap(), (1.0 + 2f64.sqrt()) * 2f64.sqrt() / 2.0, epsilon = 1e-14);
    assert_relative_eq!(resonance_beta1(2.0, 1).unwrap(), 7.535_533_905_932_738, epsilon = 1e-13);
    assert!(resonance_beta1(-1.0, 0).is_err());
    for (s, ell) in [(2.0, 0), (2.0, 1), (2.0, 2), (3.0, 1), (0.7, 2)] {
        let beta1 = resonance_beta1(s, ell).unwrap();
        for t in [-3.0, -0.5, 0.0, 1.2, 4.0] {
            let h = 1e-4;
            let xi = |t| bounded_xi2(t, s, ell).unwrap().0;
            let second = (xi(t + h) - 2.0 * xi(t) + xi(t - h)) / (h * h);
            assert!((second - block2_potential(t, s, beta1) * xi(t)).abs() <= 1e-6, "s={s} ell={ell} t={t}");
        }
    }
    assert!(matches!(bounded_xi2(0.0, 2.0, 3), Err(Error::Unsupported(_))));
}

#[test]
fn ell_equals_number_of_interior_zeros_on_the_half_line() {
    for ell in 0..=2u32 {
        let mut sign_changes = 0;
        let mut prev = bounded_xi2(0.0, 2.0, ell).unwrap().0;
        for k in 1..2000 {
            let v = bounded_xi2(k as f64 * 0.005, 2.0, ell).unwrap().0;
            if v * prev < 0.0 {
                sign_changes += 1;
            }
            prev = v;
        }
        assert_eq!(sign_changes, ell);
    }
}

#[test]
fn planar_fundamental_pairs() {
    let grid: Vec<f64> = (-40..=40).map(|k| k as f64 * 0.2).collect();
    let p = ExampleParams::at_resonance(2.0, 1, 0.0, 0.0).unwrap();
    for block in [1u8, 2] {
        let set = planar_fundamentals(block, &p, &grid).unwrap();
        assert!(set.wronskian_drift() <= 1e-8, "block {block}: {}", set.wronskian_drift());
        for v in &set.values {
            // adjoint pair is dual: ⟨ψ_b, φ_b⟩ = 1, ⟨ψ_b, φ_u⟩ = 0
            let d = v.psi_b[0] * v.phi_b[0] + v.psi_b[1] * v.phi_b[1];
            let o = v.psi_b[0] * v.phi_u[0] + v.psi_b[1] * v.phi_u[1];
            assert!((d - 1.0).abs() <= 1e-8 && o.abs() <= 1e-8);
        }
    }
    let off = ExampleParams { beta1: 2.5, ..p };
    assert!(matches!(planar_fundamentals(2, &off, &grid), Err(Error::OffResonance(_))));
    assert!(planar_fundamentals(2, &ExampleParams { beta2: 0.1, ..p }, &grid).is_err());
    assert!(planar_fundamentals(3, &p, &grid).is_err());
}

#[test]
fn parameter_map_round_trip() {
    let mut m = ParamMap::new();
    m.insert("s".into(), 3.0);
    m.insert("ell".into(), 1.0);
    let d = Duffing4d::from_map(&m).unwrap();
    assert!(d.p.is_resonant());
    assert_eq!(d.coupling, Coupling::Beta1);
    m.insert("coupling".into(), 8.0);
    assert_eq!(Duffing4d::from_map(&m).unwrap().coupling, Coupling::Fixed(8.0));
    m.insert("ell".into(), 0.5);
    assert!(Duffing4d::from_map(&m).is_err());
    let mut bad = ParamMap::new();
    bad.insert("beta4".into(), 1.0);
    assert!(matches!(Duffing4d::from_map(&bad), Err(Error::UnknownParameter(_))));
    let mut s = sys(1.0, 0.0, 0.0);
    s.set_param("beta2", 0.25).unwrap();
    assert_eq!(s.param("beta2").unwrap(), 0.25);
}

fn any_state() -> impl Strategy<Value = [f64; 4]> {
    [-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reversible_for_all_parameters(b1 in 0.0f64..10.0, b2 in -1.0f64..1.0, b3 in -5.0f64..5.0, x in any_state()) {
        let f = sys(b1, b2, b3);
        let (r, _, _) = involutions();
        let x = vec4(x);
        prop_assert!((f.f(&(&r * &x)) + &r * f.f(&x)).amax() <= 1e-12);
        prop_assert!(check_reversibility(&f, 5, 2).unwrap().pass);
    }

    #[test]
    fn analytic_derivatives_match_differences(b2 in -1.0f64..1.0, b3 in -5.0f64..5.0, x in any_state(), u in any_state(), v in any_state()) {
        for coupling in [Coupling::Beta1, Coupling::Fixed(8.0)] {
            let f = sys(2.3, b2, b3).with_coupling(coupling);
            let (x, u, v) = (vec4(x), vec4(u), vec4(v));
            let h = 1e-6;
            let fd = (f.f(&(&x + &u * h)) - f.f(&(&x - &u * h))) / (2.0 * h);
            prop_assert!((f.df(&x) * &u - fd).amax() <= 1e-6);
            let fd2 = (f.df(&(&x + &v * h)) * &u - f.df(&(&x - &v * h)) * &u) / (2.0 * h);
            prop_assert!((f.d2f(&x, &u, &v) - fd2).amax() <= 1e-5);
            let fd3 = (f.d2f(&(&x + &v * h), &u, &u) - f.d2f(&(&x - &v * h), &u, &u)) / (2.0 * h);
            prop_assert!((f.d3f(&x, &u, &u, &v) - fd3).amax() <= 1e-5);
            for name in ["beta1", "beta2", "beta3", "s"] {
                let mut p = f;
                let mut m = f;
                let base = f.param(name).unwrap();
                p.set_param(name, base + h).unwrap();
                m.set_param(name, base - h).unwrap();
                let fdm = (p.f(&x) - m.f(&x)) / (2.0 * h);
                prop_assert!((f.dmu_f(&x, name).unwrap() - fdm).amax() <= 1e-6, "{}", name);
            }
        }
    }
}
