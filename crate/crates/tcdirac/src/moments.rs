//! Closed ODE system for quantum averages with spin back-reaction, the
//! correlation matrices built from the germ, and the spin-orbit coupling
//! coefficient matrices.
//!
//! Phase ordering is z = (p, x) throughout; `Delta2` is the 6x6 second-moment
//! matrix `[[sigma_pp, sigma_px], [sigma_xp, sigma_xx]]`. The polarization
//! precesses as `etadot = (2/hbar) D0 x eta`, which is the sign consistent
//! with the spinor transport `i hbar du/dt = <sigma, D0> u`.

use crate::classical::{
    lambda_third_contract, symplectic_unit, HamiltonianSpec, PhasePoint, PhaseTrajectory,
};
use crate::emfield::{cross_matrix, FieldDerivatives};
use crate::germ::{dnu_inverse, GermInit, GermState};
use crate::ode::{self, DenseSolution, OdeError, OdeOptions};
use crate::spin::{d0_vector, KinematicPoint};
use crate::{C64, CVec3, EngineError, Mat3, Mat6, Vec3, Vec6};

type CMat6 = nalgebra::Matrix6<C64>;

/// Quantum averages: phase center, centered second moments, polarization.
#[derive(Debug, Clone)]
pub struct MomentState {
    pub t: f64,
    pub z: PhasePoint,
    pub delta2: Mat6,
    pub eta: CVec3,
}

/// Coefficient matrices of the `<sigma, D_x dx + D_p dp>` coupling term plus
/// the zeroth-order precession vector.
#[derive(Debug, Clone)]
pub struct SpinCouplingMatrices {
    pub d0: Vec3,
    pub dx: Mat3,
    pub dp: Mat3,
    /// Whether the `e c hbar / (2 eps)` prefactor was applied to dx, dp.
    pub prefactor_applied: bool,
}

/// Assemble D_p and D_x from the kinematics and first field derivatives.
///
/// `with_prefactor` multiplies both matrices by `e c hbar / (2 eps)`, making
/// the coupling term dimensionally homogeneous with `<sigma, D0>`; the raw
/// printed blocks are obtained with the flag off.
pub fn dxp_matrices(
    k: &KinematicPoint,
    fd: &FieldDerivatives,
    g: f64,
    cst: &crate::Constants,
    with_prefactor: bool,
) -> SpinCouplingMatrices {
    let gt = 0.5 * (g - 2.0);
    let n = 1.0 + 1.0 / k.gamma;
    let b = k.beta;
    let ce = cst.c / k.epsilon;
    // T v = beta <beta, v>/n - v
    let t_mat = b * b.transpose() / n - Mat3::identity();
    let g1 = t_mat * k.e_field;
    let g2 = b * (b.dot(&k.h_field) / n) + k.h_field / k.gamma;
    let g3 = b * (b.dot(&k.e_field) / n) + k.e_field / k.gamma;
    let dp_raw: Mat3 = -ce
        * (cross_matrix(&g1) * t_mat
            + g2 * b.transpose()
            + gt * k.gamma * b.dot(&k.h_field) * t_mat
            + gt * k.gamma * cross_matrix(&g3) * t_mat);
    // D_x: the same structure contracted with -(e/c) dA, plus the field
    // gradient terms carrying dH and dE.
    let grad_part = -(b * b.transpose() / n + Mat3::identity() / k.gamma) * fd.dh
        + gt * k.gamma * (cross_matrix(&b) * fd.de - fd.dh + (b * b.transpose() / n) * fd.dh);
    let dx_raw = dp_raw * (-(cst.e / cst.c) * fd.da) + grad_part;
    let pref = if with_prefactor { cst.e * cst.c * cst.hbar / (2.0 * k.epsilon) } else { 1.0 };
    SpinCouplingMatrices {
        d0: d0_vector(k, g, cst),
        dx: pref * dx_raw,
        dp: pref * dp_raw,
        prefactor_applied: with_prefactor,
    }
}

/// Initial polarization for the moment system; `k = z_hat`.
///
/// `eta(0) = (1+zz')/2 z ell + (1-zz')/2 [ell x (k x ell) + i z ell x k] /
/// sqrt(1 - <ell,k>^2)`.
pub fn init_eta(zeta: i8, zeta_prime: i8, ell: &Vec3) -> Result<CVec3, EngineError> {
    if ell.norm() < 1e-12 {
        return Err(EngineError::Domain("spin axis must be a nonzero vector".into()));
    }
    let l = ell / ell.norm();
    let khat = Vec3::z();
    let zz = (zeta * zeta_prime) as f64;
    let diag = 0.5 * (1.0 + zz) * (zeta as f64);
    let mut eta = CVec3::new(
        C64::new(diag * l.x, 0.0),
        C64::new(diag * l.y, 0.0),
        C64::new(diag * l.z, 0.0),
    );
    if zeta != zeta_prime {
        let lk = l.dot(&khat);
        let denom2 = 1.0 - lk * lk;
        if denom2 <= 1e-12 {
            return Err(EngineError::Domain(
                "eta init with zeta != zeta' requires ell not parallel to z".into(),
            ));
        }
        let denom = denom2.sqrt();
        let re = l.cross(&khat.cross(&l)) / denom;
        let im = (zeta as f64) * l.cross(&khat) / denom;
        for i in 0..3 {
            eta[i] += C64::new(re[i], im[i]);
        }
    }
    Ok(eta)
}

/// Correlation blocks from the germ at one time:
/// `sigma_xx = (hbar/2) Re(C Dnu^-1 C^+)`, `sigma_pp` likewise with B,
/// `sigma_px = (hbar/2) Re(B Dnu^-1 C^+)` (half-sums of each matrix with
/// its conjugate).
pub fn sigma_from_germ(state: &GermState, nu: &[u32; 3], hbar: f64) -> (Mat3, Mat3, Mat3) {
    let d = dnu_inverse(nu, &state.im_b).map(|v| C64::new(v, 0.0));
    let sxx = (state.c * d * state.c.adjoint()).map(|z| 0.5 * hbar * z.re);
    let spp = (state.b * d * state.b.adjoint()).map(|z| 0.5 * hbar * z.re);
    let spx = (state.b * d * state.c.adjoint()).map(|z| 0.5 * hbar * z.re);
    (sxx, spp, spx)
}

/// 6x6 Delta2 from the sigma blocks in z = (p, x) order.
pub fn delta2_from_sigma(sxx: &Mat3, spp: &Mat3, spx: &Mat3) -> Mat6 {
    let mut d = Mat6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = spp[(i, j)];
            d[(i, 3 + j)] = spx[(i, j)];
            d[(3 + i, j)] = spx[(j, i)];
            d[(3 + i, 3 + j)] = sxx[(i, j)];
        }
    }
    d
}

#[derive(Debug, Clone, Copy)]
pub struct MomentOptions {
    /// Apply the `e c hbar / (2 eps)` prefactor to D_x, D_p.
    pub dxp_prefactor: bool,
    /// Couple the polarization back into the center motion through D_x, D_p.
    pub spin_coupling: bool,
}

impl Default for MomentOptions {
    fn default() -> Self {
        MomentOptions { dxp_prefactor: true, spin_coupling: true }
    }
}

/// Right-hand side of the closed moment system at one state.
pub fn moments_rhs(
    state: &MomentState,
    t: f64,
    spec: &HamiltonianSpec,
    g: f64,
    mopts: &MomentOptions,
) -> Result<(Vec6, Mat6, CVec3), EngineError> {
    let d = spec.lambda_derivs(&state.z, t)?;
    let grad = {
        let mut v = Vec6::zeros();
        for i in 0..3 {
            v[i] = d.grad_p[i];
            v[3 + i] = d.grad_x[i];
        }
        v
    };
    let hess = spec.lambda_hessian6(&state.z, t)?;
    let j = symplectic_unit();
    // third-derivative contraction (1/2) <d_z, Delta2 d_z> J grad
    let t3 = lambda_third_contract(spec, &state.z, t, &state.delta2)?;
    let mut zdot = j * grad + 0.5 * j * t3;
    let k = KinematicPoint::at_point(spec, &state.z, t)?;
    let d0 = d0_vector(&k, g, &spec.constants);
    if mopts.spin_coupling {
        let coup = dxp_matrices(&k, &d.fields, g, &spec.constants, mopts.dxp_prefactor);
        let eta_re = Vec3::new(state.eta[0].re, state.eta[1].re, state.eta[2].re);
        // Heisenberg flow of <sigma, D_x dx + D_p dp>: transposed contraction
        let fp = coup.dp.transpose() * eta_re;
        let fx = coup.dx.transpose() * eta_re;
        let mut sv = Vec6::zeros();
        for i in 0..3 {
            sv[i] = fp[i];
            sv[3 + i] = fx[i];
        }
        zdot += j * sv;
    }
    let delta2dot = j * hess * state.delta2 - state.delta2 * hess * j;
    // etadot = (2/hbar) D0 x eta (componentwise complex cross product)
    let f = 2.0 / spec.constants.hbar;
    let etadot = CVec3::new(
        C64::new(f * d0.y, 0.0) * state.eta[2] - C64::new(f * d0.z, 0.0) * state.eta[1],
        C64::new(f * d0.z, 0.0) * state.eta[0] - C64::new(f * d0.x, 0.0) * state.eta[2],
        C64::new(f * d0.x, 0.0) * state.eta[1] - C64::new(f * d0.y, 0.0) * state.eta[0],
    );
    Ok((zdot, delta2dot, etadot))
}

const UPPER: [(usize, usize); 21] = [
    (0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (0, 5),
    (1, 1), (1, 2), (1, 3), (1, 4), (1, 5),
    (2, 2), (2, 3), (2, 4), (2, 5),
    (3, 3), (3, 4), (3, 5),
    (4, 4), (4, 5),
    (5, 5),
];

fn pack_state(z: &PhasePoint, d2: &Mat6, eta: &CVec3, y: &mut [f64]) {
    for i in 0..3 {
        y[i] = z.p[i];
        y[3 + i] = z.x[i];
    }
    for (k, (i, j)) in UPPER.iter().enumerate() {
        y[6 + k] = d2[(*i, *j)];
    }
    for i in 0..3 {
        y[27 + 2 * i] = eta[i].re;
        y[27 + 2 * i + 1] = eta[i].im;
    }
}

fn unpack_state(t: f64, y: &[f64]) -> MomentState {
    let z = PhasePoint::from_slice(&y[0..6]);
    let mut d2 = Mat6::zeros();
    for (k, (i, j)) in UPPER.iter().enumerate() {
        d2[(*i, *j)] = y[6 + k];
        d2[(*j, *i)] = y[6 + k];
    }
    let eta = CVec3::new(
        C64::new(y[27], y[28]),
        C64::new(y[29], y[30]),
        C64::new(y[31], y[32]),
    );
    MomentState { t, z, delta2: d2, eta }
}

/// Dense solution of the coupled 6+21+6-component real system.
#[derive(Debug, Clone)]
pub struct MomentSeries {
    dense: DenseSolution,
}

impl MomentSeries {
    pub fn state(&self, t: f64) -> Result<MomentState, EngineError> {
        let y = self.dense.eval_vec(t).map_err(EngineError::from)?;
        Ok(unpack_state(t, &y))
    }
}

pub fn integrate_moments(
    spec: &HamiltonianSpec,
    g: f64,
    z0: &PhasePoint,
    delta2_0: &Mat6,
    eta0: &CVec3,
    t_span: (f64, f64),
    opts: &OdeOptions,
    mopts: &MomentOptions,
) -> Result<MomentSeries, EngineError> {
    spec.check_initial_point(z0)?;
    let sym = (delta2_0 - delta2_0.transpose()).norm();
    if sym > 1e-12 * delta2_0.norm().max(1.0) {
        return Err(EngineError::Domain(format!(
            "Delta2 initial matrix must be symmetric (residual {sym:.3e})"
        )));
    }
    let mut y0 = [0.0; 33];
    pack_state(z0, delta2_0, eta0, &mut y0);
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> ode::RhsResult {
        let st = unpack_state(t, y);
        let (zdot, d2dot, etadot) = moments_rhs(&st, t, spec, g, mopts)
            .map_err(|e| OdeError::Domain { t, what: e.to_string() })?;
        for i in 0..6 {
            dy[i] = zdot[i];
        }
        for (k, (i, j)) in UPPER.iter().enumerate() {
            dy[6 + k] = 0.5 * (d2dot[(*i, *j)] + d2dot[(*j, *i)]);
        }
        for i in 0..3 {
            dy[27 + 2 * i] = etadot[i].re;
            dy[27 + 2 * i + 1] = etadot[i].im;
        }
        Ok(())
    };
    let dense = ode::solve(rhs, t_span.0, t_span.1, &y0, opts)?;
    Ok(MomentSeries { dense })
}

/// Direct transport of Delta2 alone along a fixed classical trajectory
/// (`Delta2dot = J H Delta2 - Delta2 H J` with H evaluated on the
/// trajectory); the reference side of the A-matrix equivalence oracle.
pub fn integrate_delta2_along(
    traj: &PhaseTrajectory,
    spec: &HamiltonianSpec,
    delta2_0: &Mat6,
    opts: &OdeOptions,
) -> Result<DenseSolution, EngineError> {
    let j = symplectic_unit();
    let mut y0 = [0.0; 21];
    for (k, (a, b)) in UPPER.iter().enumerate() {
        y0[k] = delta2_0[(*a, *b)];
    }
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> ode::RhsResult {
        let z = traj.phase_point(t).map_err(|e| OdeError::Domain { t, what: e.to_string() })?;
        let hess = spec
            .lambda_hessian6(&z, t)
            .map_err(|e| OdeError::Domain { t, what: e.to_string() })?;
        let mut d2 = Mat6::zeros();
        for (k, (a, b)) in UPPER.iter().enumerate() {
            d2[(*a, *b)] = y[k];
            d2[(*b, *a)] = y[k];
        }
        let d2dot = j * hess * d2 - d2 * hess * j;
        for (k, (a, b)) in UPPER.iter().enumerate() {
            dy[k] = 0.5 * (d2dot[(*a, *b)] + d2dot[(*b, *a)]);
        }
        Ok(())
    };
    ode::solve(rhs, traj.t0(), traj.tf(), &y0, opts).map_err(EngineError::from)
}

pub fn delta2_from_packed(y: &[f64]) -> Mat6 {
    let mut d2 = Mat6::zeros();
    for (k, (a, b)) in UPPER.iter().enumerate() {
        d2[(*a, *b)] = y[k];
        d2[(*b, *a)] = y[k];
    }
    d2
}

/// `A(0) = [[B0, B0*], [C0, C0*]]` of the transport form.
pub fn a0_from_germ(init: &GermInit) -> CMat6 {
    let mut a = CMat6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            a[(i, j)] = init.b0[(i, j)];
            a[(i, 3 + j)] = init.b0[(i, j)].conj();
            a[(3 + i, j)] = init.c0[(i, j)];
            a[(3 + i, 3 + j)] = init.c0[(i, j)].conj();
        }
    }
    a
}

/// Core matrix making `A Delta2_core A^+` reproduce the (5.15) sigma blocks:
/// `(hbar/4) diag(Dnu^-1, Dnu^-1)`.
pub fn delta2_core_from_nu(nu: &[u32; 3], im_b: &[f64; 3], hbar: f64) -> Mat6 {
    let d = dnu_inverse(nu, im_b);
    let mut core = Mat6::zeros();
    for i in 0..3 {
        core[(i, i)] = 0.25 * hbar * d[(i, i)];
        core[(3 + i, 3 + i)] = 0.25 * hbar * d[(i, i)];
    }
    core
}

/// Transported second moments via `Adot = J lambda'' A`,
/// `Delta2(t) = A Delta2_core A^+`.
#[derive(Debug, Clone)]
pub struct AMatrixSeries {
    dense: DenseSolution,
    core: Mat6,
}

pub fn amatrix_form(
    traj: &PhaseTrajectory,
    spec: &HamiltonianSpec,
    a0: &CMat6,
    delta2_core: &Mat6,
    opts: &OdeOptions,
) -> Result<AMatrixSeries, EngineError> {
    let j = symplectic_unit().map(|v| C64::new(v, 0.0));
    let mut y0 = [0.0; 72];
    for (k, z) in a0.iter().enumerate() {
        y0[2 * k] = z.re;
        y0[2 * k + 1] = z.im;
    }
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> ode::RhsResult {
        let z = traj.phase_point(t).map_err(|e| OdeError::Domain { t, what: e.to_string() })?;
        let hess = spec
            .lambda_hessian6(&z, t)
            .map_err(|e| OdeError::Domain { t, what: e.to_string() })?
            .map(|v| C64::new(v, 0.0));
        let mut a = CMat6::zeros();
        for k in 0..36 {
            a[k] = C64::new(y[2 * k], y[2 * k + 1]);
        }
        let adot = j * hess * a;
        for (k, z) in adot.iter().enumerate() {
            dy[2 * k] = z.re;
            dy[2 * k + 1] = z.im;
        }
        Ok(())
    };
    let dense = ode::solve(rhs, traj.t0(), traj.tf(), &y0, opts)?;
    Ok(AMatrixSeries { dense, core: *delta2_core })
}

impl AMatrixSeries {
    pub fn a_matrix(&self, t: f64) -> Result<CMat6, EngineError> {
        let y = self.dense.eval_vec(t).map_err(EngineError::from)?;
        let mut a = CMat6::zeros();
        for k in 0..36 {
            a[k] = C64::new(y[2 * k], y[2 * k + 1]);
        }
        Ok(a)
    }

    pub fn delta2(&self, t: f64) -> Result<Mat6, EngineError> {
        let a = self.a_matrix(t)?;
        let core = self.core.map(|v| C64::new(v, 0.0));
        let full = a * core * a.adjoint();
        let imag = full.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let scale = full.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        if imag > 1e-8 * scale {
            return Err(EngineError::Numerical(format!(
                "transported Delta2 acquired imaginary part {imag:.3e}"
            )));
        }
        Ok(full.map(|z| z.re))
    }
}

/// Finite-difference residual of the Delta2 transport equation for moments
/// assembled from the germ via (5.15): checks that the germ-built Delta2(t)
/// solves `Delta2dot = J H Delta2 - Delta2 H J`.
pub fn germ_moment_residual(
    traj: &PhaseTrajectory,
    spec: &HamiltonianSpec,
    series: &crate::germ::GermSeries,
    nu: &[u32; 3],
    hbar: f64,
    times: &[f64],
    dt: f64,
) -> Result<f64, EngineError> {
    let j = symplectic_unit();
    let d2_at = |t: f64| -> Result<Mat6, EngineError> {
        let st = series.state(t)?;
        let (sxx, spp, spx) = sigma_from_germ(&st, nu, hbar);
        Ok(delta2_from_sigma(&sxx, &spp, &spx))
    };
    let (lo, hi) = (traj.t0().min(traj.tf()), traj.t0().max(traj.tf()));
    let mut worst = 0.0f64;
    for &t in times {
        if t - dt < lo || t + dt > hi {
            continue;
        }
        let dp = d2_at(t + dt)?;
        let dm = d2_at(t - dt)?;
        let d2 = d2_at(t)?;
        let fd = (dp - dm) / (2.0 * dt);
        let hess = spec.lambda_hessian6(&traj.phase_point(t)?, t)?;
        let rhs = j * hess * d2 - d2 * hess * j;
        worst = worst.max((fd - rhs).norm() / d2.norm().max(1e-300));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{integrate_trajectory, Mode};
    use crate::emfield::{FieldModel, Gauge};
    use crate::germ::integrate_germ;
    use crate::rng::CounterRng;
    use crate::spin::integrate_spinor;
    use crate::{CMat3, Constants};

    fn cst() -> Constants {
        Constants::default()
    }

    #[test]
    fn dxp_zero_field_is_zero() {
        let spec =
            HamiltonianSpec::new(Mode::RelativisticPlus, cst(), FieldModel::Zero).unwrap();
        let z = PhasePoint::new(Vec3::new(0.3, 0.1, 0.0), Vec3::zeros());
        let k = KinematicPoint::at_point(&spec, &z, 0.0).unwrap();
        let d = spec.lambda_derivs(&z, 0.0).unwrap();
        let coup = dxp_matrices(&k, &d.fields, 2.6, &cst(), true);
        assert!(coup.d0.norm() == 0.0);
        assert!(coup.dx.norm() == 0.0);
        assert!(coup.dp.norm() == 0.0);
    }

    #[test]
    fn dxp_rest_frame_crossed_reduction() {
        // at beta = 0 with uniform fields the D_x block is exactly the D_p
        // block contracted with -(e/c) dA
        let spec = HamiltonianSpec::new(
            Mode::RelativisticPlus,
            cst(),
            FieldModel::Crossed {
                e0: Vec3::new(0.2, -0.1, 0.3),
                h0: Vec3::new(0.0, 0.0, 1.0),
                gauge: Gauge::Symmetric,
            },
        )
        .unwrap();
        let z = PhasePoint::new(Vec3::zeros(), Vec3::zeros());
        let k = KinematicPoint::at_point(&spec, &z, 0.0).unwrap();
        let d = spec.lambda_derivs(&z, 0.0).unwrap();
        let coup = dxp_matrices(&k, &d.fields, 2.3, &cst(), false);
        let expect_dx = coup.dp * (-(cst().e / cst().c) * d.fields.da);
        assert!((coup.dx - expect_dx).norm() < 1e-14);
        // uniform H only, beta = 0: dp vanishes
        let spec_h = HamiltonianSpec::new(
            Mode::RelativisticPlus,
            cst(),
            FieldModel::UniformMagnetic { h0: Vec3::new(0.0, 0.0, 1.0), gauge: Gauge::Symmetric },
        )
        .unwrap();
        let kh = KinematicPoint::at_point(&spec_h, &z, 0.0).unwrap();
        let dh = spec_h.lambda_derivs(&z, 0.0).unwrap();
        let ch = dxp_matrices(&kh, &dh.fields, 2.3, &cst(), false);
        assert!(ch.dp.norm() < 1e-15);
    }

    #[test]
    fn dxp_linear_in_field_gradients() {
        let spec = HamiltonianSpec::new(
            Mode::RelativisticPlus,
            cst(),
            crate::emfield::sample_polynomial_field(),
        )
        .unwrap();
        let z = PhasePoint::new(Vec3::new(0.2, -0.1, 0.3), Vec3::new(0.4, 0.2, -0.3));
        let k = KinematicPoint::at_point(&spec, &z, 0.5).unwrap();
        let d = spec.lambda_derivs(&z, 0.5).unwrap();
        let c1 = dxp_matrices(&k, &d.fields, 2.5, &cst(), true);
        let mut fd2 = d.fields.clone();
        fd2.de *= 2.0;
        fd2.dh *= 2.0;
        let c2 = dxp_matrices(&k, &fd2, 2.5, &cst(), true);
        // dp has no field-gradient dependence; the dx gradient part doubles
        assert!((c2.dp - c1.dp).norm() < 1e-15);
        let grad1 = c1.dx - c1.dp * (-(cst().e / cst().c) * d.fields.da);
        let grad2 = c2.dx - c2.dp * (-(cst().e / cst().c) * fd2.da);
        assert!((grad2 - 2.0 * grad1).norm() < 1e-12 * grad1.norm().max(1e-30));
    }

    #[test]
    fn init_eta_cases() {
        let e = init_eta(1, 1, &Vec3::z()).unwrap();
        assert!((e[2] - C64::new(1.0, 0.0)).norm() < 1e-15 && e[0].norm() + e[1].norm() < 1e-15);
        let l = Vec3::new(0.3, -0.5, 0.8).normalize();
        let e = init_eta(-1, -1, &l).unwrap();
        for i in 0..3 {
            assert!((e[i] - C64::new(-l[i], 0.0)).norm() < 1e-15);
        }
        // zeta=+1, zeta'=-1, ell=x: eta = (0, -i, 1)
        let e = init_eta(1, -1, &Vec3::x()).unwrap();
        assert!(e[0].norm() < 1e-15);
        assert!((e[1] - C64::new(0.0, -1.0)).norm() < 1e-15);
        assert!((e[2] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(init_eta(1, -1, &Vec3::z()).is_err());
    }

    #[test]
    fn sigma_from_default_germ() {
        let hbar = 0.02;
        let state = GermState {
            t: 0.0,
            b: CMat3::identity() * C64::i(),
            c: CMat3::identity(),
            q: CMat3::identity() * C64::i(),
            sqrt_det_c: C64::new(1.0, 0.0),
            im_b: [1.0; 3],
        };
        let (sxx, spp, spx) = sigma_from_germ(&state, &[0, 0, 0], hbar);
        assert!((sxx - Mat3::identity() * (hbar / 2.0)).norm() < 1e-15);
        assert!((spp - Mat3::identity() * (hbar / 2.0)).norm() < 1e-15);
        assert!(spx.norm() < 1e-15);
        let (sxx1, _, _) = sigma_from_germ(&state, &[1, 0, 0], hbar);
        let expect = Mat3::from_diagonal(&Vec3::new(3.0, 1.0, 1.0)) * (hbar / 2.0);
        assert!((sxx1 - expect).norm() < 1e-15);
        // exact linear hbar scaling
        let (s2, p2, c2) = sigma_from_germ(&state, &[1, 0, 0], 2.0 * hbar);
        assert_eq!(s2, 2.0 * sxx1);
        let (_, p1, c1) = sigma_from_germ(&state, &[1, 0, 0], hbar);
        assert_eq!(p2, 2.0 * p1);
        assert_eq!(c2, 2.0 * c1);
    }

    #[test]
    fn sigma_free_particle_quadratic_growth() {
        let spec = HamiltonianSpec::new(Mode::RelativisticPlus, cst(), FieldModel::Zero).unwrap();
        let z0 = PhasePoint::new(Vec3::new(0.3, 0.0, 0.0), Vec3::zeros());
        let traj = integrate_trajectory(&spec, &z0, (0.0, 2.0), &OdeOptions::default()).unwrap();
        let series = integrate_germ(&traj, &spec, &GermInit::default(), &OdeOptions::tol(1e-12, 1e-13)).unwrap();
        let hbar = 0.01;
        let s0 = series.state(0.0).unwrap();
        let (sxx0, spp0, spx0) = sigma_from_germ(&s0, &[0, 0, 0], hbar);
        let pp = spec.variational_matrices(&z0, 0.0).unwrap().pp;
        for &t in &[0.5, 1.3, 2.0] {
            let st = series.state(t).unwrap();
            let (sxx, spp, spx) = sigma_from_germ(&st, &[0, 0, 0], hbar);
            // C = C0 + t pp B0 with B0 = iI, C0 = I:
            // sigma_xx(t) = sigma_xx0 + t (pp spx0^T + spx0 pp) + t^2 pp spp0 pp
            let expect = sxx0
                + t * (pp * spx0.transpose() + spx0 * pp)
                + t * t * pp * spp0 * pp;
            assert!((sxx - expect).norm() < 1e-12, "t={t}");
            assert!((spp - spp0).norm() < 1e-13);
            let _ = spx;
        }
    }

    #[test]
    fn delta2_stays_symmetric_and_eta_conserved() {
        let spec = HamiltonianSpec::new(
            Mode::RelativisticPlus,
            cst(),
            FieldModel::UniformMagnetic { h0: Vec3::new(0.0, 0.0, 0.9), gauge: Gauge::Symmetric },
        )
        .unwrap();
        let z0 = PhasePoint::new(Vec3::new(0.3, 0.0, 0.05), Vec3::new(0.0, 0.4, 0.0));
        let d2 = delta2_from_sigma(
            &(Mat3::identity() * 0.005),
            &(Mat3::identity() * 0.005),
            &Mat3::zeros(),
        );
        let eta0 = init_eta(1, 1, &Vec3::new(1.0, 0.0, 1.0).normalize()).unwrap();
        let series = integrate_moments(
            &spec,
            2.0,
            &z0,
            &d2,
            &eta0,
            (0.0, 10.0),
            &OdeOptions::tol(1e-11, 1e-13),
            &MomentOptions::default(),
        )
        .unwrap();
        for k in 0..=50 {
            let st = series.state(10.0 * k as f64 / 50.0).unwrap();
            assert!((st.delta2 - st.delta2.transpose()).norm() <= 1e-10 * st.delta2.norm());
            let eta_norm: f64 = st.eta.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((eta_norm - 1.0).abs() <= 1e-10);
            for i in 0..3 {
                assert!(st.eta[i].im.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_field_eta_static() {
        let spec = HamiltonianSpec::new(Mode::RelativisticPlus, cst(), FieldModel::Zero).unwrap();
        let z0 = PhasePoint::new(Vec3::new(0.2, 0.0, 0.0), Vec3::zeros());
        let eta0 = init_eta(1, 1, &Vec3::x()).unwrap();
        let series = integrate_moments(
            &spec,
            2.0,
            &z0,
            &Mat6::zeros(),
            &eta0,
            (0.0, 3.0),
            &OdeOptions::default(),
            &MomentOptions::default(),
        )
        .unwrap();
        let st = series.state(3.0).unwrap();
        for i in 0..3 {
            assert!((st.eta[i] - eta0[i]).norm() < 1e-12);
        }
        // with Delta2 = 0 and no field the center follows the classical line
        let traj = integrate_trajectory(&spec, &z0, (0.0, 3.0), &OdeOptions::default()).unwrap();
        let zc = traj.phase_point(3.0).unwrap();
        assert!((st.z.p - zc.p).norm() + (st.z.x - zc.x).norm() < 1e-9);
    }

    #[test]
    fn eta_matches_spinor_transport() {
        let spec = HamiltonianSpec::new(
            Mode::RelativisticPlus,
            cst(),
            FieldModel::UniformMagnetic { h0: Vec3::new(0.0, 0.0, 1.0), gauge: Gauge::Symmetric },
        )
        .unwrap();
        let z0 = PhasePoint::new(Vec3::new(0.35, 0.0, 0.0), Vec3::new(0.0, 0.3, 0.0));
        let ell = Vec3::new(1.0, 0.0, 0.3).normalize();
        let traj = integrate_trajectory(&spec, &z0, (0.0, 8.0), &OdeOptions::tol(1e-12, 1e-13)).unwrap();
        let spins = integrate_spinor(&traj, &spec, 2.0, &ell, 1, &OdeOptions::tol(1e-12, 1e-14)).unwrap();
        let eta0 = init_eta(1, 1, &ell).unwrap();
        let moments = integrate_moments(
            &spec,
            2.0,
            &z0,
            &Mat6::zeros(),
            &eta0,
            (0.0, 8.0),
            &OdeOptions::tol(1e-12, 1e-14),
            &MomentOptions { spin_coupling: false, ..Default::default() },
        )
        .unwrap();
        for k in 0..=40 {
            let t = 8.0 * k as f64 / 40.0;
            let eta_s = spins.eta(t).unwrap();
            let st = moments.state(t).unwrap();
            let eta_m = Vec3::new(st.eta[0].re, st.eta[1].re, st.eta[2].re);
            assert!((eta_s - eta_m).norm() <= 1e-8, "eta mismatch at t={t}: {:e}", (eta_s - eta_m).norm());
        }
    }

    #[test]
    fn amatrix_equivalence_with_direct_transport() {
        let spec = HamiltonianSpec::new(
            Mode::RelativisticPlus,
            cst(),
            FieldModel::HarmonicScalar { k: 0.4 },
        )
        .unwrap();
        let z0 = PhasePoint::new(Vec3::new(0.15, 0.05, 0.0), Vec3::new(0.3, 0.0, 0.2));
        let traj = integrate_trajectory(&spec, &z0, (0.0, 5.0), &OdeOptions::tol(1e-12, 1e-13)).unwrap();
        let init = GermInit::default();
        let hbar = 0.02;
        let core = delta2_core_from_nu(&[0, 0, 0], &[1.0; 3], hbar);
        let a0 = a0_from_germ(&init);
        let aseries = amatrix_form(&traj, &spec, &a0, &core, &OdeOptions::tol(1e-12, 1e-13)).unwrap();
        let d2_init = aseries.delta2(0.0).unwrap();
        let direct = integrate_delta2_along(&traj, &spec, &d2_init, &OdeOptions::tol(1e-12, 1e-13)).unwrap();
        for k in 0..=20 {
            let t = 5.0 * k as f64 / 20.0;
            let da = aseries.delta2(t).unwrap();
            let dd = delta2_from_packed(&direct.eval_vec(t).unwrap());
            assert!((da - dd).norm() <= 1e-8, "t={t}: {:e}", (da - dd).norm());
        }
        // and both match the (5.15) germ assembly
        let germ = integrate_germ(&traj, &spec, &init, &OdeOptions::tol(1e-12, 1e-13)).unwrap();
        for &t in &[1.0, 3.0, 5.0] {
            let st = germ.state(t).unwrap();
            let (sxx, spp, spx) = sigma_from_germ(&st, &[0, 0, 0], hbar);
            let dg = delta2_from_sigma(&sxx, &spp, &spx);
            let da = aseries.delta2(t).unwrap();
            assert!((da - dg).norm() <= 1e-8, "germ vs transport at t={t}");
        }
    }

    #[test]
    fn germ_moment_ode_residual_small() {
        let spec = HamiltonianSpec::new(
            Mode::RelativisticPlus,
            cst(),
            FieldModel::UniformMagnetic { h0: Vec3::new(0.0, 0.0, 1.0), gauge: Gauge::Symmetric },
        )
        .unwrap();
        let z0 = PhasePoint::new(Vec3::new(0.3, 0.0, 0.1), Vec3::new(0.0, 0.2, 0.0));
        let traj = integrate_trajectory(&spec, &z0, (0.0, 5.0), &OdeOptions::tol(1e-12, 1e-13)).unwrap();
        let germ = integrate_germ(&traj, &spec, &GermInit::default(), &OdeOptions::tol(1e-12, 1e-13)).unwrap();
        let times: Vec<f64> = (1..50).map(|k| 5.0 * k as f64 / 50.0).collect();
        for nu in [[0u32, 0, 0], [1, 0, 0]] {
            let res = germ_moment_residual(&traj, &spec, &germ, &nu, 0.01, &times, 1e-4).unwrap();
            assert!(res < 1e-6, "nu={nu:?}: residual {res:e}");
        }
    }

    #[test]
    fn rhs_symmetry_of_delta2_dot() {
        let spec = HamiltonianSpec::new(
            Mode::RelativisticPlus,
            cst(),
            FieldModel::UniformMagnetic { h0: Vec3::new(0.1, 0.0, 1.0), gauge: Gauge::Symmetric },
        )
        .unwrap();
        let mut rng = CounterRng::new(17);
        for _ in 0..20 {
            // random symmetric Delta2
            let mut d2 = Mat6::zeros();
            for i in 0..6 {
                for j in i..6 {
                    let v = rng.range(-0.01, 0.01);
                    d2[(i, j)] = v;
                    d2[(j, i)] = v;
                }
            }
            let st = MomentState {
                t: 0.0,
                z: PhasePoint::new(rng.vec3(-0.3, 0.3), rng.vec3(-0.3, 0.3)),
                delta2: d2,
                eta: init_eta(1, 1, &rng.unit_vec3()).unwrap(),
            };
            let (_, d2dot, _) = moments_rhs(&st, 0.0, &spec, 2.0, &MomentOptions::default()).unwrap();
            assert!((d2dot - d2dot.transpose()).norm() <= 1e-12 * d2dot.norm().max(1e-30));
        }
    }
}
