use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use tcdirac::classical::integrate_trajectory;
use tcdirac::germ::{integrate_germ, GermInit};
use tcdirac::ode::OdeOptions;
use tcdirac::rng::CounterRng;
use tcdirac::spin::{integrate_spinor, pi_identity_residuals, KinematicPoint};
use tcdirac::wavepacket::{gram_matrix, multi_indices, ScalarTcs};
use tcdirac::{Constants, Vec3};
use tcdirac_bench::magnetic_fixture;

fn bench_trajectory(c: &mut Criterion) {
    let fx = magnetic_fixture(10.0);
    let opts = OdeOptions::tol(1e-10, 1e-12);
    c.bench_function("trajectory_T10_magnetic", |b| {
        b.iter(|| {
            let traj =
                integrate_trajectory(&fx.spec, &fx.z0, (0.0, black_box(10.0)), &opts).unwrap();
            black_box(traj.n_accepted())
        })
    });
}

fn bench_germ(c: &mut Criterion) {
    let fx = magnetic_fixture(10.0);
    let opts = OdeOptions::tol(1e-10, 1e-12);
    c.bench_function("germ_T10_magnetic", |b| {
        b.iter(|| {
            let series = integrate_germ(&fx.traj, &fx.spec, &GermInit::default(), &opts).unwrap();
            black_box(series.im_b)
        })
    });
}

fn bench_spinor(c: &mut Criterion) {
    let fx = magnetic_fixture(10.0);
    let opts = OdeOptions::tol(1e-12, 1e-14);
    let ell = Vec3::new(0.0, 0.8, 0.6);
    c.bench_function("spinor_T10_magnetic", |b| {
        b.iter(|| {
            let s = integrate_spinor(&fx.traj, &fx.spec, 2.0, &ell, 1, &opts).unwrap();
            black_box(s.eta(10.0).unwrap())
        })
    });
}

fn bench_identity_suite(c: &mut Criterion) {
    let cst = Constants::default();
    let mut rng = CounterRng::new(7);
    c.bench_function("identity_suite_one_draw", |b| {
        b.iter(|| {
            let k = KinematicPoint::from_beta(
                rng.beta(0.95),
                rng.vec3(-1.0, 1.0),
                rng.vec3(-1.0, 1.0),
                &cst,
            )
            .unwrap();
            let rep =
                pi_identity_residuals(&k, &rng.vec3(-1.0, 1.0), &rng.vec3(-1.0, 1.0), &cst);
            black_box(rep.max_residual())
        })
    });
}

fn bench_gram(c: &mut Criterion) {
    let fx = magnetic_fixture(2.0);
    let tcs = ScalarTcs::new(&fx.spec, &fx.traj, &fx.germ, 1e-2).unwrap();
    let nus = multi_indices(2);
    let grid = tcs.grid(1.0, 24).unwrap();
    c.bench_function("gram_10_states_24cubed", |b| {
        b.iter(|| {
            let g = gram_matrix(&tcs, &nus, 1.0, &grid).unwrap();
            black_box(g[(0, 0)])
        })
    });
}

criterion_group!(
    benches,
    bench_trajectory,
    bench_germ,
    bench_spinor,
    bench_identity_suite,
    bench_gram
);
criterion_main!(benches);
