//! Complex-germ variational dynamics along a classical trajectory.
//!
//! Integrates the matrix system `Bdot = -lambda_xp B - lambda_xx C`,
//! `Cdot = lambda_pp B + lambda_px C` (columns are the complex solutions
//! (W_j, Z_j) of the linearized flow), and maintains the derived quantities:
//! `Q = B C^-1`, the diagonal normalization `Im b_j`, and `sqrt(det C)` with
//! a globally continuous branch obtained by accumulating the argument of
//! `det C` between neighbouring samples (intervals are subdivided until each
//! increment is below pi/2).

use crate::classical::{HamiltonianSpec, PhaseTrajectory};
use crate::ode::{self, DenseSolution, OdeError, OdeOptions};
use crate::{C64, CMat3, EngineError, Mat3, Vec3};

/// Initial complex germ: columns of `b0` are W_j(0), columns of `c0` are
/// Z_j(0). The default `(iI, I)` is the isotropic unit-width packet.
#[derive(Debug, Clone, PartialEq)]
pub struct GermInit {
    pub b0: CMat3,
    pub c0: CMat3,
}

impl Default for GermInit {
    fn default() -> Self {
        GermInit { b0: CMat3::identity() * C64::i(), c0: CMat3::identity() }
    }
}

/// Residuals of the three admissibility conditions plus the extracted
/// normalization diagonal.
#[derive(Debug, Clone)]
pub struct GermDiagnostics {
    pub ok: bool,
    /// `|det C0|` against the rank threshold `1e-12 |C0|^3`.
    pub det_c0_abs: f64,
    pub rank_ok: bool,
    /// Max element of `C0^T B0 - B0^T C0`.
    pub lagrangian_residual: f64,
    /// Max off-diagonal / imaginary-diagonal element of
    /// `(1/2i)(C0^+ B0 - B0^+ C0)`.
    pub normalization_residual: f64,
    /// Diagonal Im b_j (meaningful when `ok`).
    pub im_b: [f64; 3],
}

/// Germ snapshot at one time.
#[derive(Debug, Clone)]
pub struct GermState {
    pub t: f64,
    pub b: CMat3,
    pub c: CMat3,
    pub q: CMat3,
    /// Continuous-branch square root of det C.
    pub sqrt_det_c: C64,
    pub im_b: [f64; 3],
}

const BRANCH_MAX_DEPTH: usize = 48;

/// `C^T B - B^T C` (Lagrangian-plane residual, conserved by the flow).
pub fn lagrangian_form(b: &CMat3, c: &CMat3) -> CMat3 {
    c.transpose() * b - b.transpose() * c
}

/// `(1/2i)(C^+ B - B^+ C)`; real positive diagonal for an admissible germ.
pub fn normalization_form(b: &CMat3, c: &CMat3) -> CMat3 {
    (c.adjoint() * b - b.adjoint() * c) / (C64::i() * 2.0)
}

pub fn validate_germ_init(init: &GermInit) -> GermDiagnostics {
    let scale_b = init.b0.norm().max(1.0);
    let scale_c = init.c0.norm().max(1.0);
    let det = init.c0.determinant();
    let rank_ok = det.norm() > 1e-12 * scale_c.powi(3);
    let lag = lagrangian_form(&init.b0, &init.c0);
    let lagrangian_residual = lag.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let nf = normalization_form(&init.b0, &init.c0);
    let mut normalization_residual = 0.0f64;
    let mut im_b = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                normalization_residual = normalization_residual.max(nf[(i, j)].im.abs());
                im_b[i] = nf[(i, i)].re;
            } else {
                normalization_residual = normalization_residual.max(nf[(i, j)].norm());
            }
        }
    }
    let tol = 1e-12 * scale_b * scale_c;
    let ok = rank_ok
        && lagrangian_residual <= tol
        && normalization_residual <= tol
        && im_b.iter().all(|&v| v > 0.0);
    GermDiagnostics {
        ok,
        det_c0_abs: det.norm(),
        rank_ok,
        lagrangian_residual,
        normalization_residual,
        im_b,
    }
}

/// `D_nu^-1 = diag((2 nu_k + 1) / Im b_k)`.
pub fn dnu_inverse(nu: &[u32; 3], im_b: &[f64; 3]) -> Mat3 {
    Mat3::from_diagonal(&Vec3::new(
        (2.0 * nu[0] as f64 + 1.0) / im_b[0],
        (2.0 * nu[1] as f64 + 1.0) / im_b[1],
        (2.0 * nu[2] as f64 + 1.0) / im_b[2],
    ))
}

/// `Q = B C^-1` with symmetry and positivity checks.
pub fn q_matrix(b: &CMat3, c: &CMat3) -> Result<CMat3, EngineError> {
    let cinv = c
        .try_inverse()
        .ok_or_else(|| EngineError::Numerical("singular C matrix in Q = B C^-1".into()))?;
    let q = b * cinv;
    let sym = (q - q.transpose()).norm();
    if sym > 1e-8 * q.norm().max(1.0) {
        return Err(EngineError::Numerical(format!(
            "Q lost symmetry: |Q - Q^T| = {sym:.3e}"
        )));
    }
    let im_q = q.map(|z| z.im);
    let eig = nalgebra::SymmetricEigen::new(0.5 * (im_q + im_q.transpose()));
    if eig.eigenvalues.min() <= 0.0 {
        return Err(EngineError::Numerical(format!(
            "Im Q not positive definite (min eigenvalue {:.3e})",
            eig.eigenvalues.min()
        )));
    }
    Ok(q)
}

fn pack(b: &CMat3, c: &CMat3, y: &mut [f64]) {
    for (k, z) in b.iter().enumerate() {
        y[2 * k] = z.re;
        y[2 * k + 1] = z.im;
    }
    for (k, z) in c.iter().enumerate() {
        y[18 + 2 * k] = z.re;
        y[18 + 2 * k + 1] = z.im;
    }
}

fn unpack(y: &[f64]) -> (CMat3, CMat3) {
    let mut b = CMat3::zeros();
    let mut c = CMat3::zeros();
    for k in 0..9 {
        b[k] = C64::new(y[2 * k], y[2 * k + 1]);
        c[k] = C64::new(y[18 + 2 * k], y[18 + 2 * k + 1]);
    }
    (b, c)
}

/// Dense germ solution over the trajectory span.
#[derive(Debug, Clone)]
pub struct GermSeries {
    dense: DenseSolution,
    /// (t, accumulated arg of det C) at branch reference nodes, in
    /// integration order.
    branch: Vec<(f64, f64)>,
    pub im_b: [f64; 3],
    pub det_c0: C64,
    t0: f64,
    tf: f64,
}

pub fn integrate_germ(
    traj: &PhaseTrajectory,
    spec: &HamiltonianSpec,
    init: &GermInit,
    opts: &OdeOptions,
) -> Result<GermSeries, EngineError> {
    let diag = validate_germ_init(init);
    if !diag.ok {
        return Err(EngineError::Domain(format!(
            "invalid germ init: rank_ok={}, lagrangian residual {:.3e}, normalization residual {:.3e}, Im b = {:?}",
            diag.rank_ok, diag.lagrangian_residual, diag.normalization_residual, diag.im_b
        )));
    }
    let (t0, tf) = (traj.t0(), traj.tf());
    let mut y0 = [0.0; 36];
    pack(&init.b0, &init.c0, &mut y0);
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> ode::RhsResult {
        let z = traj
            .phase_point(t)
            .map_err(|e| OdeError::Domain { t, what: e.to_string() })?;
        let var = spec
            .variational_matrices(&z, t)
            .map_err(|e| OdeError::Domain { t, what: e.to_string() })?;
        let (b, c) = unpack(y);
        let xx = var.xx.map(|v| C64::new(v, 0.0));
        let xp = var.xp.map(|v| C64::new(v, 0.0));
        let px = var.px.map(|v| C64::new(v, 0.0));
        let pp = var.pp.map(|v| C64::new(v, 0.0));
        let bdot = -xp * b - xx * c;
        let cdot = pp * b + px * c;
        let mut out = [0.0; 36];
        pack(&bdot, &cdot, &mut out);
        dy.copy_from_slice(&out);
        Ok(())
    };
    let dense = ode::solve(rhs, t0, tf, &y0, opts)?;

    // branch tracking over accepted-step endpoints, subdividing as needed
    let det_c0 = init.c0.determinant();
    let det_floor = 1e-8 * det_c0.norm();
    let det_at = |t: f64| -> Result<C64, EngineError> {
        let y = dense.eval_vec(t).map_err(EngineError::from)?;
        let (_, c) = unpack(&y);
        Ok(c.determinant())
    };
    let mut branch: Vec<(f64, f64)> = vec![(t0, det_c0.arg())];
    let times = dense.step_times();
    for w in times.windows(2) {
        extend_branch(&mut branch, w[0], w[1], &det_at, det_floor, 0)?;
    }
    Ok(GermSeries { dense, branch, im_b: diag.im_b, det_c0, t0, tf })
}

fn extend_branch<F>(
    branch: &mut Vec<(f64, f64)>,
    ta: f64,
    tb: f64,
    det_at: &F,
    det_floor: f64,
    depth: usize,
) -> Result<(), EngineError>
where
    F: Fn(f64) -> Result<C64, EngineError>,
{
    let da = det_at(ta)?;
    let db = det_at(tb)?;
    if db.norm() < det_floor {
        return Err(EngineError::Numerical(format!(
            "caustic: |det C| = {:.3e} fell below {:.3e} at t = {:.9e}",
            db.norm(),
            det_floor,
            tb
        )));
    }
    let inc = (db / da).arg();
    if inc.abs() < std::f64::consts::FRAC_PI_2 {
        let phi_a = branch.last().expect("branch seeded").1;
        branch.push((tb, phi_a + inc));
        Ok(())
    } else {
        if depth >= BRANCH_MAX_DEPTH {
            return Err(EngineError::Numerical(format!(
                "det C branch tracking failed near t = {ta:.9e} (argument jump {inc:.3e})"
            )));
        }
        let tm = 0.5 * (ta + tb);
        extend_branch(branch, ta, tm, det_at, det_floor, depth + 1)?;
        extend_branch(branch, tm, tb, det_at, det_floor, depth + 1)
    }
}

impl GermSeries {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn matrices(&self, t: f64) -> Result<(CMat3, CMat3), EngineError> {
        let y = self.dense.eval_vec(t).map_err(EngineError::from)?;
        Ok(unpack(&y))
    }

    /// Accumulated continuous argument of det C at time t.
    fn det_arg(&self, t: f64, det: C64) -> f64 {
        // nearest branch node at or before t in integration direction
        let dir = (self.tf - self.t0).signum();
        let key = dir * t;
        let mut lo = 0usize;
        let mut hi = self.branch.len();
        while hi - lo > 1 {
            let m = (lo + hi) / 2;
            if dir * self.branch[m].0 <= key + 1e-15 {
                lo = m;
            } else {
                hi = m;
            }
        }
        let (t_ref, phi_ref) = self.branch[lo];
        let det_ref = {
            let y = self.dense.eval_vec(t_ref).expect("branch node inside span");
            let (_, c) = unpack(&y);
            c.determinant()
        };
        phi_ref + (det / det_ref).arg()
    }

    pub fn state(&self, t: f64) -> Result<GermState, EngineError> {
        let (b, c) = self.matrices(t)?;
        let det = c.determinant();
        let phi = self.det_arg(t, det);
        let sqrt_det_c = C64::from_polar(det.norm().sqrt(), 0.5 * phi);
        let q = q_matrix(&b, &c)?;
        Ok(GermState { t, b, c, q, sqrt_det_c, im_b: self.im_b })
    }

    /// Conservation diagnostics at time t:
    /// (max |C^T B - B^T C|, normalization matrix).
    pub fn invariants(&self, t: f64) -> Result<(f64, CMat3), EngineError> {
        let (b, c) = self.matrices(t)?;
        let lag = lagrangian_form(&b, &c);
        Ok((lag.iter().map(|z| z.norm()).fold(0.0, f64::max), normalization_form(&b, &c)))
    }

    /// Max finite-difference residual of the matrix Riccati equation
    /// `Qdot + lambda_xx + lambda_xp Q + Q lambda_px + Q lambda_pp Q = 0`
    /// over the sample times (interior points only).
    pub fn riccati_residual(
        &self,
        traj: &PhaseTrajectory,
        spec: &HamiltonianSpec,
        times: &[f64],
        dt: f64,
    ) -> Result<f64, EngineError> {
        let mut worst = 0.0f64;
        let (lo, hi) = (self.t0.min(self.tf), self.t0.max(self.tf));
        for &t in times {
            if t - dt < lo || t + dt > hi {
                continue;
            }
            let qp = self.state(t + dt)?.q;
            let qm = self.state(t - dt)?.q;
            let q = self.state(t)?.q;
            let qdot = (qp - qm) / C64::new(2.0 * dt, 0.0);
            let z = traj.phase_point(t)?;
            let var = spec.variational_matrices(&z, t)?;
            let xx = var.xx.map(|v| C64::new(v, 0.0));
            let xp = var.xp.map(|v| C64::new(v, 0.0));
            let px = var.px.map(|v| C64::new(v, 0.0));
            let pp = var.pp.map(|v| C64::new(v, 0.0));
            let res = qdot + xx + xp * q + q * px + q * pp * q;
            worst = worst.max(res.norm());
        }
        Ok(worst)
    }
}

/// Germ conservation-law drift over a set of sample times: returns
/// (max Lagrangian residual, max drift of the normalization matrix,
/// min |det C| / |det C(0)|).
pub fn conservation_drift(
    series: &GermSeries,
    times: &[f64],
) -> Result<(f64, f64, f64), EngineError> {
    let mut lag_max = 0.0f64;
    let mut norm_drift = 0.0f64;
    let mut det_min_rel = f64::INFINITY;
    let norm0 = CMat3::from_diagonal(&nalgebra::Vector3::new(
        C64::new(series.im_b[0], 0.0),
        C64::new(series.im_b[1], 0.0),
        C64::new(series.im_b[2], 0.0),
    ));
    for &t in times {
        let (lag, nf) = series.invariants(t)?;
        lag_max = lag_max.max(lag);
        norm_drift = norm_drift.max((nf - norm0).norm());
        let (_, c) = series.matrices(t)?;
        det_min_rel = det_min_rel.min(c.determinant().norm() / series.det_c0.norm());
    }
    Ok((lag_max, norm_drift, det_min_rel))
}
