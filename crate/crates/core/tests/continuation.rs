use revhom::bvp::BvpSettings;
use revhom::continuation::*;
use revhom::diagrams::*;
use revhom::duffing::{Duffing4d, ExampleParams};
use revhom::melnikov::{example_report, Classification, Mode};
use revhom::quadrature::Window;
use revhom::Coupling;

fn setup(ell: u32, beta3: f64) -> DiagramSetup {
    DiagramSetup { s: 2.0, ell, beta3, coupling: Coupling::Beta1 }
}

fn fine() -> ContinuationSettings {
    ContinuationSettings { ds: 5e-3, ds_max: 2e-2, max_steps: 40, ..Default::default() }
}

fn report(ell: u32, beta3: f64, mode: Mode) -> revhom::melnikov::MelnikovReport {
    let sys = Duffing4d::new(ExampleParams::at_resonance(2.0, ell, 0.0, beta3).unwrap());
    example_report(&sys, mode, Window::Auto).unwrap()
}

#[test]
fn saddle_node_fold_at_zero() {
    let b = saddle_node_branch(&setup(0, 4.0), [-0.5, 0.5], &BvpSettings::default(), &fine()).unwrap();
    let folds: Vec<_> = b.specials_of(SpecialKind::Fold).collect();
    assert_eq!(folds.len(), 1);
    let f = folds[0];
    assert!(f.param.abs() <= 1e-4);
    assert!(f.localization_residual <= 1e-6);
    // dμ/ds changes sign across the fold
    let before = &b.points[f.index - 1];
    let after = &b.points[f.index + 1];
    assert!(before.tangent_sign * after.tangent_sign < 0.0);
    // two coexisting orbits at equal μ on the two sides
    assert!(before.param < 0.0 && after.param < 0.0);
    assert!(before.measures.x2_at_0 * after.measures.x2_at_0 < 0.0);

    let c = verify_against_melnikov(&b, &[], &report(0, 4.0, Mode::SaddleNode)).unwrap();
    let e = c.exponent.unwrap();
    assert!((e - 2.0).abs() <= 0.1, "exponent {e}");
    assert!(c.side_consistent, "{c:?}");
}

#[test]
fn branch_points_respect_step_bound_and_invariants() {
    let s = fine();
    let b = saddle_node_branch(&setup(1, 4.0), [-0.5, 0.5], &BvpSettings::default(), &s).unwrap();
    for w in b.points.windows(2) {
        assert!(w[1].arclength - w[0].arclength <= s.ds_max + 1e-15);
        assert!(w[1].arclength >= w[0].arclength);
    }
    for p in &b.points {
        let o = p.orbit.as_ref().unwrap();
        assert!(o.projection_residual <= 1e-9 && o.symmetry_residual <= 1e-9);
        assert!(o.collocation_residual <= 1e-9);
    }
}

#[test]
fn transcritical_crossing() {
    let cs = ContinuationSettings { max_steps: 30, ..fine() };
    let d = crossing_diagram(&setup(0, 4.0), 0.3, &BvpSettings::default(), &cs, &cs).unwrap();
    let bp = d.primary.specials_of(SpecialKind::BranchPoint).next().unwrap();
    assert!((bp.param - 1.707_106_78).abs() <= 1e-3);
    assert!(bp.localization_residual <= 1e-6);
    let sw: Vec<&Branch> = d.switched.iter().collect();
    let c = verify_against_melnikov(&d.primary, &sw, &report(0, 4.0, Mode::Transcritical)).unwrap();
    assert!(c.slope.unwrap().abs() > 0.01);
    assert!(c.side_consistent);
    // the switched orbits are off the planar branch
    for b in &d.switched {
        assert!(b.points[0].measures.x2_at_0.abs() > 1e-3);
    }
}

#[test]
fn pitchfork_pair_is_conjugate_and_one_sided() {
    let cs = ContinuationSettings { max_steps: 30, ..fine() };
    let d = crossing_diagram(&setup(0, 0.0), 0.3, &BvpSettings::default(), &cs, &cs).unwrap();
    let bp = d.primary.specials_of(SpecialKind::BranchPoint).next().unwrap();
    assert!((bp.param - 1.707_106_78).abs() <= 1e-3);
    let (a, b) = (&d.switched[0], &d.switched[1]);
    assert_eq!(a.points.len(), b.points.len());
    for (pa, pb) in a.points.iter().zip(&b.points) {
        assert!((pa.measures.max_x2 + pb.measures.min_x2).abs() <= 1e-6);
        assert!((pa.param - pb.param).abs() <= 1e-8);
    }
    let rep = report(0, 0.0, Mode::Pitchfork);
    assert_eq!(rep.classification, Classification::PitchforkSub);
    let c = verify_against_melnikov(&d.primary, &[a, b], &rep).unwrap();
    assert!(c.side_consistent, "{c:?}");
    assert!(c.evenness_error.unwrap() <= 1e-6);
}

#[test]
fn switching_is_robust_to_perturbation_size() {
    let cs = ContinuationSettings { max_steps: 30, ..fine() };
    let s = setup(0, 0.0);
    let (bvp, orbit) = planar_orbit(&s, 1.6, &BvpSettings::default()).unwrap();
    let primary = continue_branch(&bvp, &orbit, "beta1", [1.6, 1.8], &cs).unwrap();
    let idx = primary.specials.iter().position(|p| p.kind == SpecialKind::BranchPoint).unwrap();
    let mu_star = primary.specials[idx].param;
    let big = switch_branch_signed(&bvp, &primary, idx, 1.0, 2e-2, &cs).unwrap();
    let small = switch_branch_signed(&bvp, &primary, idx, 1.0, 1e-2, &cs).unwrap();
    let (a1, a2) = (big.orbit.measures.x2_at_0, small.orbit.measures.x2_at_0);
    assert!(a1 * a2 > 0.0);
    // same parabola μ − μ* = c α²
    let c1 = (big.param - mu_star) / (a1 * a1);
    let c2 = (small.param - mu_star) / (a2 * a2);
    assert!((c1 - c2).abs() <= 0.05 * c2.abs(), "{c1} vs {c2}");
    // switch_branch returns the + side first
    let any = switch_branch(&bvp, &primary, idx, &cs).unwrap();
    assert!(any.orbit.measures.x2_at_0 * a2 > 0.0);
}

#[test]
fn special_points_move_little_with_the_mesh() {
    let cs = ContinuationSettings { max_steps: 25, ..fine() };
    let loc = |n: usize| {
        let bs = BvpSettings { intervals: n, ..Default::default() };
        let (bvp, orbit) = planar_orbit(&setup(1, 0.0), 7.4, &bs).unwrap();
        let b = continue_branch(&bvp, &orbit, "beta1", [7.4, 7.7], &cs).unwrap();
        let p = b.specials_of(SpecialKind::BranchPoint).next().unwrap().param;
        p
    };
    assert!((loc(200) - loc(400)).abs() <= 1e-4);
}

#[test]
fn branch_csv_schema() {
    let cs = ContinuationSettings { max_steps: 10, ..fine() };
    let b = saddle_node_branch(&setup(0, 4.0), [-0.5, 0.5], &BvpSettings::default(), &cs).unwrap();
    let csv = b.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "index,param,x2_at_0,max_x2,min_x2,l2_norm,arclength,special");
    let fold_rows = csv.lines().filter(|l| l.ends_with(",FOLD")).count();
    assert_eq!(fold_rows, 1);
    let js = b.summary_json();
    assert_eq!(js["specials"][0]["kind"], "FOLD");
}

#[test]
fn invalid_settings_rejected() {
    let s = setup(0, 4.0);
    let (bvp, orbit) = planar_orbit(&s, s.resonance().unwrap(), &BvpSettings { intervals: 50, ..Default::default() }).unwrap();
    let bad = ContinuationSettings { ds: 1.0, ..Default::default() };
    assert!(continue_branch(&bvp, &orbit, "beta2", [-1.0, 1.0], &bad).is_err());
    assert!(continue_branch(&bvp, &orbit, "nope", [-1.0, 1.0], &fine()).is_err());
    assert!(continue_branch(&bvp, &orbit, "beta2", [1.0, -1.0], &fine()).is_err());
}
