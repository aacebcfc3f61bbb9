use criterion::{black_box, criterion_group, criterion_main, Criterion};
use revhom::bvp::{gauss_step, BvpSettings, HomoclinicBvp};
use revhom::duffing::{homoclinic_exact, Duffing4d, ExampleParams};
use revhom::melnikov::compute_bbar2_quadrature;
use revhom::monodromy::{monodromy_matrix, Chart, ChartLoop};
use revhom::quadrature::Window;

fn system() -> Duffing4d {
    Duffing4d::new(ExampleParams::at_resonance(2.0, 1, 0.0, 4.0).unwrap())
}

fn gauss(c: &mut Criterion) {
    let sys = system();
    let x = homoclinic_exact(-2.0, 1.0);
    c.bench_function("gauss_step", |b| b.iter(|| gauss_step(&sys, black_box(&x), 0.05, false, None).unwrap()));
    c.bench_function("gauss_step_with_sensitivities", |b| {
        b.iter(|| gauss_step(&sys, black_box(&x), 0.05, true, Some("beta2")).unwrap())
    });
}

fn bvp(c: &mut Criterion) {
    let bvp = HomoclinicBvp::new(Box::new(system()), BvpSettings::default()).unwrap();
    let guess = bvp.sample(|t| homoclinic_exact(t, 1.0) * 0.9);
    let mut group = c.benchmark_group("bvp");
    group.sample_size(10);
    group.bench_function("solve_400_intervals", |b| b.iter(|| bvp.solve(black_box(&guess)).unwrap()));
    group.finish();
}

fn melnikov(c: &mut Criterion) {
    let sys = Duffing4d::new(ExampleParams::at_resonance(2.0, 1, 0.0, 0.0).unwrap());
    let mut group = c.benchmark_group("melnikov");
    group.sample_size(10);
    group.bench_function("bbar2_quadrature", |b| b.iter(|| compute_bbar2_quadrature(black_box(&sys), Window::Auto).unwrap()));
    group.finish();
}

fn monodromy(c: &mut Criterion) {
    let p = ExampleParams::at_resonance(2.0, 0, 0.0, 0.0).unwrap();
    let chart = ChartLoop::new(Chart::Plus, 1e-3).unwrap();
    let mut group = c.benchmark_group("monodromy");
    group.sample_size(10);
    group.bench_function("block2_sigma_plus", |b| b.iter(|| monodromy_matrix(2, black_box(&p), &chart).unwrap()));
    group.finish();
}

criterion_group!(benches, gauss, bvp, melnikov, monodromy);
criterion_main!(benches);
