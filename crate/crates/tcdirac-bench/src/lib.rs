//! Shared benchmark fixtures: one bounded magnetic-field scenario reused by
//! every benchmark so timings are comparable across pipeline stages.

use tcdirac::classical::{integrate_trajectory, Mode, PhasePoint, PhaseTrajectory};
use tcdirac::emfield::Gauge;
use tcdirac::germ::{integrate_germ, GermInit, GermSeries};
use tcdirac::ode::OdeOptions;
use tcdirac::{Constants, FieldModel, HamiltonianSpec, Vec3};

pub struct Fixture {
    pub spec: HamiltonianSpec,
    pub z0: PhasePoint,
    pub traj: PhaseTrajectory,
    pub germ: GermSeries,
    pub t_end: f64,
}

pub fn magnetic_fixture(t_end: f64) -> Fixture {
    let spec = HamiltonianSpec::new(
        Mode::RelativisticPlus,
        Constants::default(),
        FieldModel::UniformMagnetic { h0: Vec3::new(0.0, 0.0, 1.0), gauge: Gauge::Symmetric },
    )
    .unwrap();
    let z0 = PhasePoint::new(Vec3::new(0.35, 0.0, 0.08), Vec3::new(0.0, 0.3, 0.0));
    let opts = OdeOptions::tol(1e-12, 1e-13);
    let traj = integrate_trajectory(&spec, &z0, (0.0, t_end), &opts).unwrap();
    let germ = integrate_germ(&traj, &spec, &GermInit::default(), &opts).unwrap();
    Fixture { spec, z0, traj, germ, t_end }
}
