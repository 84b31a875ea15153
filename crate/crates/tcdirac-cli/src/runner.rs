//! Scenario pipeline: trajectory -> germ -> spin -> {wavepacket, moments,
//! green}, with dependency resolution, residual recording, and atomic output
//! emission.

use crate::config::{OutputKind, Scenario, ValidatedScenario};
use crate::outputs::Stage;
use crate::report::{ExpectationRecord, GreenReport, RunReport, StageReport};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;
use tcdirac::classical::{integrate_trajectory, PhaseTrajectory};
use tcdirac::germ::{integrate_germ, q_matrix, validate_germ_init, GermSeries, GermState};
use tcdirac::moments::{
    delta2_from_sigma, init_eta, integrate_moments, sigma_from_germ, MomentOptions,
};
use tcdirac::spin::{
    bmt_pointwise_residuals, boost_zeta_to_a, integrate_spinor, KinematicPoint, SpinSeries,
};
use tcdirac::wavepacket::green::GreenKernel;
use tcdirac::wavepacket::{
    expectation_dirac, DiracTcs, ExpectationValue, Observable, QuadratureGrid, QuadratureScheme,
    ScalarTcs,
};
use tcdirac::{EngineError, Vec3};

#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Domain(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Schema(m) | CliError::Domain(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(m) => CliError::Schema(m),
            EngineError::Domain(m) => CliError::Domain(m),
            EngineError::Numerical(m) => CliError::Numerical(m),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunFlags {
    pub hbar: Option<f64>,
    pub order: Option<u8>,
    pub seed: Option<u64>,
    pub reproducible: bool,
}

fn sample_times(t_span: [f64; 2], n: usize) -> Vec<f64> {
    (0..=n).map(|k| t_span[0] + (t_span[1] - t_span[0]) * k as f64 / n as f64).collect()
}

/// Loose sanity ceilings on the recorded stage residuals; orders of
/// magnitude above healthy values, so tripping one means the run is broken,
/// and per the run contract a failed invariant must surface in the exit
/// code, not just the report.
fn gate_residual(stage: &str, id: &str, value: f64, ceiling: f64) -> Result<(), CliError> {
    if value.is_finite() && value <= ceiling {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "stage {stage}: invariant '{id}' = {value:.3e} exceeds sanity ceiling {ceiling:.1e}"
        )))
    }
}

struct StageTimer {
    start: Instant,
    reproducible: bool,
}

impl StageTimer {
    fn new(reproducible: bool) -> Self {
        StageTimer { start: Instant::now(), reproducible }
    }

    fn seconds(&self) -> f64 {
        if self.reproducible {
            0.0
        } else {
            self.start.elapsed().as_secs_f64()
        }
    }
}

pub fn run_scenario(config_path: &Path, out_dir: &Path, flags: &RunFlags) -> Result<RunReport, CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Schema(format!("cannot read config {}: {e}", config_path.display())))?;
    let mut scenario = Scenario::parse(&text).map_err(CliError::Schema)?;
    if let Some(h) = flags.hbar {
        scenario.constants.hbar = h;
    }
    if let Some(o) = flags.order {
        scenario.order = o;
    }
    if let Some(s) = flags.seed {
        scenario.seed = s;
    }
    let v = scenario.validate()?;
    let mut stage = Stage::new(out_dir).map_err(CliError::Io)?;
    match run_pipeline(&v, &mut stage, flags.reproducible) {
        Ok(mut report) => {
            stage
                .write_json("report.json", &report)
                .map_err(CliError::Io)
                .and_then(|_| stage.commit().map_err(CliError::Io))
                .map(|files| {
                    report.output_manifest = files;
                    report
                })
        }
        Err(e) => {
            stage.abort();
            Err(e)
        }
    }
}

fn run_pipeline(v: &ValidatedScenario, stage: &mut Stage, reproducible: bool) -> Result<RunReport, CliError> {
    let sc = &v.scenario;
    let wants = |k: OutputKind| sc.outputs.contains(&k);
    let need_germ = wants(OutputKind::Germ)
        || wants(OutputKind::Moments)
        || wants(OutputKind::Expectations)
        || wants(OutputKind::Wavefunction)
        || wants(OutputKind::Green);
    let need_spin = wants(OutputKind::Spin)
        || wants(OutputKind::Eta)
        || wants(OutputKind::Expectations)
        || wants(OutputKind::Wavefunction)
        || wants(OutputKind::Green);

    let opts = sc.tolerances.ode_options();
    let times = sample_times(sc.t_span, sc.n_samples);
    let mut stages: Vec<StageReport> = Vec::new();

    // trajectory (always)
    let timer = StageTimer::new(reproducible);
    let traj = integrate_trajectory(&v.spec, &v.z0, (sc.t_span[0], sc.t_span[1]), &opts)?;
    let mut outputs = Vec::new();
    let mut residuals = BTreeMap::new();
    let l0 = v.spec.lambda_value(&v.z0, sc.t_span[0]);
    let zf = traj.phase_point(sc.t_span[1])?;
    residuals.insert("lambda_drift".to_string(), (v.spec.lambda_value(&zf, sc.t_span[1]) - l0).abs());
    if wants(OutputKind::Trajectory) {
        let mut rows = Vec::with_capacity(times.len());
        for &t in &times {
            let s = traj.sample(&v.spec, t)?;
            rows.push(vec![
                t, s.z.p.x, s.z.p.y, s.z.p.z, s.z.x.x, s.z.x.y, s.z.x.z, s.s0, s.epsilon,
                s.beta.x, s.beta.y, s.beta.z, s.gamma,
            ]);
        }
        stage
            .write_csv(
                "trajectory.csv",
                &[
                    "t", "p1", "p2", "p3", "x1", "x2", "x3", "S0", "epsilon", "beta1", "beta2",
                    "beta3", "gamma",
                ],
                &rows,
            )
            .map_err(CliError::Io)?;
        outputs.push("trajectory.csv".to_string());
    }
    stages.push(StageReport {
        name: "trajectory".into(),
        status: "ok".into(),
        wall_s: timer.seconds(),
        outputs,
        residuals,
    });

    // germ
    let germ: Option<GermSeries> = if need_germ {
        let timer = StageTimer::new(reproducible);
        let series = integrate_germ(&traj, &v.spec, &v.germ_init, &opts)?;
        let mut outputs = Vec::new();
        let mut residuals = BTreeMap::new();
        let (lag, drift, det_rel) = tcdirac::germ::conservation_drift(&series, &times)?;
        gate_residual("germ", "lagrangian_residual", lag, 1e-6)?;
        gate_residual("germ", "normalization_drift", drift, 1e-6)?;
        gate_residual("germ", "det_c_floor", 1e-8 / det_rel.max(1e-300), 1.0)?;
        residuals.insert("lagrangian_residual".into(), lag);
        residuals.insert("normalization_drift".into(), drift);
        residuals.insert("det_c_min_relative".into(), det_rel);
        if wants(OutputKind::Germ) {
            let mut header: Vec<String> = vec!["t".into()];
            for m in ["b", "c"] {
                for i in 1..=3 {
                    for j in 1..=3 {
                        header.push(format!("{m}{i}{j}_re"));
                        header.push(format!("{m}{i}{j}_im"));
                    }
                }
            }
            header.extend(["det_c_re".into(), "det_c_im".into(), "lagrangian_residual".into(), "normalization_drift".into()]);
            let headers: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let norm0 = series.im_b;
            let mut rows = Vec::with_capacity(times.len());
            for &t in &times {
                let (b, c) = series.matrices(t)?;
                let mut row = vec![t];
                for m in [&b, &c] {
                    for i in 0..3 {
                        for j in 0..3 {
                            row.push(m[(i, j)].re);
                            row.push(m[(i, j)].im);
                        }
                    }
                }
                let det = c.determinant();
                row.push(det.re);
                row.push(det.im);
                let (lag_t, nf) = series.invariants(t)?;
                row.push(lag_t);
                let mut nd = 0.0f64;
                for i in 0..3 {
                    for j in 0..3 {
                        let expect = if i == j { norm0[i] } else { 0.0 };
                        nd = nd.max((nf[(i, j)] - tcdirac::C64::new(expect, 0.0)).norm());
                    }
                }
                row.push(nd);
                rows.push(row);
            }
            stage.write_csv("germ.csv", &headers, &rows).map_err(CliError::Io)?;
            outputs.push("germ.csv".to_string());
        }
        stages.push(StageReport {
            name: "germ".into(),
            status: "ok".into(),
            wall_s: timer.seconds(),
            outputs,
            residuals,
        });
        Some(series)
    } else {
        None
    };

    // spin transport
    let spins: Option<SpinSeries> = if need_spin {
        let timer = StageTimer::new(reproducible);
        let series = integrate_spinor(&traj, &v.spec, sc.g, &v.ell, sc.spin.zeta, &opts)?;
        let mut outputs = Vec::new();
        let mut residuals = BTreeMap::new();
        let mut norm_drift = 0.0f64;
        let mut rows = Vec::with_capacity(times.len());
        let mut rms = [0.0f64; 2];
        for &t in &times {
            let u = series.u(t)?;
            norm_drift = norm_drift.max((u.norm() - 1.0).abs());
            let eta = series.eta(t)?;
            let k = KinematicPoint::on_trajectory(&v.spec, &traj, t)?;
            let pol = boost_zeta_to_a(&eta, &k.beta, k.gamma);
            let (r230, rb14) = bmt_pointwise_residuals(&traj, &v.spec, &series, t)?;
            rms[0] += r230 * r230;
            rms[1] += rb14 * rb14;
            rows.push(vec![
                t, u[0].re, u[0].im, u[1].re, u[1].im, eta.x, eta.y, eta.z, pol.a0, pol.a.x,
                pol.a.y, pol.a.z, r230, rb14,
            ]);
        }
        let m = times.len() as f64;
        gate_residual("spin", "u_norm_drift", norm_drift, 1e-8)?;
        residuals.insert("u_norm_drift".into(), norm_drift);
        residuals.insert("bmt_rms_eq_2_30".into(), (rms[0] / m).sqrt());
        residuals.insert("bmt_rms_eq_B_14".into(), (rms[1] / m).sqrt());
        if wants(OutputKind::Spin) {
            stage
                .write_csv(
                    "spin.csv",
                    &[
                        "t", "u1_re", "u1_im", "u2_re", "u2_im", "eta1", "eta2", "eta3", "a0",
                        "a1", "a2", "a3", "res_eq_2_30", "res_eq_B_14",
                    ],
                    &rows,
                )
                .map_err(CliError::Io)?;
            outputs.push("spin.csv".to_string());
        }
        if wants(OutputKind::Eta) {
            let eta_rows: Vec<Vec<f64>> =
                rows.iter().map(|r| vec![r[0], r[5], r[6], r[7]]).collect();
            stage
                .write_csv("eta.csv", &["t", "eta1", "eta2", "eta3"], &eta_rows)
                .map_err(CliError::Io)?;
            outputs.push("eta.csv".to_string());
        }
        stages.push(StageReport {
            name: "spin".into(),
            status: "ok".into(),
            wall_s: timer.seconds(),
            outputs,
            residuals,
        });
        Some(series)
    } else {
        None
    };

    // moments
    if wants(OutputKind::Moments) {
        let timer = StageTimer::new(reproducible);
        let diag = validate_germ_init(&v.germ_init);
        let g0 = GermState {
            t: sc.t_span[0],
            b: v.germ_init.b0,
            c: v.germ_init.c0,
            q: q_matrix(&v.germ_init.b0, &v.germ_init.c0)?,
            sqrt_det_c: {
                let d = v.germ_init.c0.determinant();
                tcdirac::C64::from_polar(d.norm().sqrt(), 0.5 * d.arg())
            },
            im_b: diag.im_b,
        };
        let (sxx, spp, spx) = sigma_from_germ(&g0, &sc.nu, sc.constants.hbar);
        let delta2_0 = delta2_from_sigma(&sxx, &spp, &spx);
        let eta0 = init_eta(sc.spin.zeta, sc.spin.zeta_prime, &v.ell)?;
        let series = integrate_moments(
            &v.spec,
            sc.g,
            &v.z0,
            &delta2_0,
            &eta0,
            (sc.t_span[0], sc.t_span[1]),
            &opts,
            &MomentOptions::default(),
        )?;
        let mut residuals = BTreeMap::new();
        let mut sym = 0.0f64;
        let mut rows = Vec::with_capacity(times.len());
        for &t in &times {
            let st = series.state(t)?;
            sym = sym.max((st.delta2 - st.delta2.transpose()).norm());
            let mut row = vec![t];
            for i in 0..3 {
                row.push(st.z.p[i]);
            }
            for i in 0..3 {
                row.push(st.z.x[i]);
            }
            for i in 0..6 {
                for j in i..6 {
                    row.push(st.delta2[(i, j)]);
                }
            }
            for i in 0..3 {
                row.push(st.eta[i].re);
                row.push(st.eta[i].im);
            }
            rows.push(row);
        }
        gate_residual("moments", "delta2_symmetry", sym, 1e-8)?;
        residuals.insert("delta2_symmetry".into(), sym);
        let mut header: Vec<String> =
            vec!["t".into(), "p1".into(), "p2".into(), "p3".into(), "x1".into(), "x2".into(), "x3".into()];
        for i in 1..=6 {
            for j in i..=6 {
                header.push(format!("d2_{i}{j}"));
            }
        }
        for i in 1..=3 {
            header.push(format!("eta{i}_re"));
            header.push(format!("eta{i}_im"));
        }
        let headers: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        stage.write_csv("moments.csv", &headers, &rows).map_err(CliError::Io)?;
        stages.push(StageReport {
            name: "moments".into(),
            status: "ok".into(),
            wall_s: timer.seconds(),
            outputs: vec!["moments.csv".into()],
            residuals,
        });
    }

    // wavepacket expectations and wavefunction dump
    if wants(OutputKind::Expectations) || wants(OutputKind::Wavefunction) {
        let timer = StageTimer::new(reproducible);
        let germ_ref = germ.as_ref().expect("germ stage resolved");
        let spins_ref = spins.as_ref().expect("spin stage resolved");
        let tcs = ScalarTcs::new(&v.spec, &traj, germ_ref, sc.constants.hbar)?;
        let dirac = DiracTcs { scalar: &tcs, spins: spins_ref, nu: sc.nu, order: sc.order };
        let t_eval = sc.t_span[1];
        let snap = dirac.snapshot(t_eval)?;
        let grid = match sc.grid.scheme {
            QuadratureScheme::GaussHermite => tcs.grid(t_eval, sc.grid.nodes_per_axis)?,
            QuadratureScheme::UniformBox => {
                let core = tcs.core(t_eval)?;
                QuadratureGrid::uniform_box_packet(
                    &core.center,
                    &core.im_q,
                    sc.constants.hbar,
                    sc.grid.nodes_per_axis,
                    6.0,
                )?
            }
        };
        let mut outputs = Vec::new();
        let mut residuals = BTreeMap::new();
        if wants(OutputKind::Expectations) {
            let mut records = Vec::new();
            for obs in [
                Observable::Norm,
                Observable::Position,
                Observable::Momentum,
                Observable::PauliSpin,
                Observable::BargmannS0,
                Observable::BargmannSvec,
            ] {
                let val = expectation_dirac(&snap, obs, &grid, &v.spec)?;
                let (re, im) = match val {
                    ExpectationValue::Scalar { re, im } => (vec![re], vec![im]),
                    ExpectationValue::Vector { re, im } => (re.to_vec(), im.to_vec()),
                };
                records.push(ExpectationRecord {
                    observable: format!("{obs:?}").to_lowercase(),
                    value_re: re,
                    value_im: im,
                    grid: sc.grid,
                    nu: sc.nu,
                    zeta: sc.spin.zeta,
                    order: sc.order,
                    hbar: sc.constants.hbar,
                });
            }
            let norm = records[0].value_re[0];
            residuals.insert("norm_minus_one".into(), (norm - 1.0).abs());
            stage.write_json("expectations.json", &records).map_err(CliError::Io)?;
            outputs.push("expectations.json".to_string());
        }
        if wants(OutputKind::Wavefunction) {
            let mut rows = Vec::with_capacity(grid.len());
            for x in &grid.points {
                let val = snap.value(x);
                rows.push(vec![
                    x.x, x.y, x.z, val[0].re, val[0].im, val[1].re, val[1].im, val[2].re,
                    val[2].im, val[3].re, val[3].im,
                ]);
            }
            stage
                .write_csv(
                    "wavefunction.csv",
                    &[
                        "x1", "x2", "x3", "re_c1", "im_c1", "re_c2", "im_c2", "re_c3", "im_c3",
                        "re_c4", "im_c4",
                    ],
                    &rows,
                )
                .map_err(CliError::Io)?;
            outputs.push("wavefunction.csv".to_string());
        }
        stages.push(StageReport {
            name: "wavepacket".into(),
            status: "ok".into(),
            wall_s: timer.seconds(),
            outputs,
            residuals,
        });
    }

    // green kernel diagnostics
    if wants(OutputKind::Green) {
        let timer = StageTimer::new(reproducible);
        let germ_ref = germ.as_ref().expect("germ stage resolved");
        let tcs = ScalarTcs::new(&v.spec, &traj, germ_ref, sc.constants.hbar)?;
        let sp = integrate_spinor(&traj, &v.spec, sc.g, &v.ell, 1, &opts)?;
        let sm = integrate_spinor(&traj, &v.spec, sc.g, &v.ell, -1, &opts)?;
        let span = sc.t_span[1] - sc.t_span[0];
        let (s, t) = (sc.t_span[0] + 0.15 * span, sc.t_span[0] + 0.85 * span);
        let kernel0 = GreenKernel { scalar: &tcs, spins: [&sp, &sm], nu_max: 0 };
        let dirac = DiracTcs { scalar: &tcs, spins: &sp, nu: [0, 0, 0], order: 0 };
        let snap_s = dirac.snapshot(s)?;
        let snap_t = dirac.snapshot(t)?;
        let grid_s = tcs.grid(s, sc.grid.nodes_per_axis.max(24))?;
        let prop = kernel0.apply(t, s, &|x: &Vec3| snap_s.value(x), &grid_s)?;
        let grid_t = tcs.grid(t, sc.grid.nodes_per_axis.max(24))?;
        let mut diff = 0.0;
        for (x, w) in grid_t.points.iter().zip(&grid_t.weights) {
            let d = prop.value(x) - snap_t.value(x);
            diff += w * (d.adjoint() * d)[0].re;
        }
        let delta = 0.5 * sc.constants.hbar.sqrt();
        let snap_d = dirac.snapshot(s)?;
        let shifted = move |x: &Vec3| snap_d.value(&(x - Vec3::new(delta, 0.0, 0.0)));
        let grid32 = tcs.grid(s, sc.grid.nodes_per_axis.max(32))?;
        let kernel6 = GreenKernel { scalar: &tcs, spins: [&sp, &sm], nu_max: 6 };
        let expansion = kernel6.expand(s, &shifted, &grid32)?;
        let mut input_norm = 0.0;
        for (x, w) in grid32.points.iter().zip(&grid32.weights) {
            let v4 = shifted(x);
            input_norm += w * (v4.adjoint() * v4)[0].re;
        }
        let shells = expansion.shell_norms(6);
        let rep = GreenReport {
            s,
            t,
            propagation_l2_error: diff.sqrt(),
            input_norm,
            displaced_truncation_residuals: shells
                .iter()
                .map(|cap| (input_norm - cap).max(0.0))
                .collect(),
        };
        let mut residuals = BTreeMap::new();
        residuals.insert("propagation_l2_error".into(), rep.propagation_l2_error);
        stage.write_json("green.json", &rep).map_err(CliError::Io)?;
        stages.push(StageReport {
            name: "green".into(),
            status: "ok".into(),
            wall_s: timer.seconds(),
            outputs: vec!["green.json".into()],
            residuals,
        });
    }

    Ok(RunReport {
        config_echo: sc.clone(),
        seed: sc.seed,
        reproducible,
        stages,
        output_manifest: Vec::new(),
    })
}

/// Keep the trajectory type exported for the integration tests.
pub type _Traj = PhaseTrajectory;
