//! Classical relativistic (and nonrelativistic) Hamiltonian flows.
//!
//! The authoritative definition of every derived quantity here is analytic
//! differentiation of the Hamiltonian
//! `lambda_(+/-) = e Phi +/- sqrt(c^2 P^2 + m0^2 c^4)`, `P = p - (e/c) A`
//! (nonrelativistic option `P^2/2m + e Phi`). The gradient, Hessian blocks
//! and the mixed time derivative all come from closed chain-rule forms over
//! the field derivative tables; finite differences of `lambda_value` are used
//! only as test oracles.

use crate::emfield::{FieldDerivatives, FieldModel};
use crate::ode::{self, DenseSolution, OdeError, OdeOptions};
use crate::{Constants, EngineError, Mat3, Mat6, Vec3, Vec6};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Positive-frequency sheet `lambda(+) = e Phi + eps`.
    RelativisticPlus,
    /// Negative-frequency sheet `lambda(-) = e Phi - eps`.
    RelativisticMinus,
    /// `P^2 / 2 m0 + e Phi`.
    Nonrelativistic,
}

impl Mode {
    pub fn frequency_sign(&self) -> f64 {
        match self {
            Mode::RelativisticMinus => -1.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    pub mode: Mode,
    pub constants: Constants,
    pub field: FieldModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub p: Vec3,
    pub x: Vec3,
}

impl PhasePoint {
    pub fn new(p: Vec3, x: Vec3) -> Self {
        PhasePoint { p, x }
    }

    pub fn as_vec6(&self) -> Vec6 {
        Vec6::new(self.p.x, self.p.y, self.p.z, self.x.x, self.x.y, self.x.z)
    }

    pub fn from_slice(y: &[f64]) -> Self {
        PhasePoint {
            p: Vec3::new(y[0], y[1], y[2]),
            x: Vec3::new(y[3], y[4], y[5]),
        }
    }
}

/// Second-derivative blocks of lambda, 3x3 each.
#[derive(Debug, Clone, Copy)]
pub struct VariationalMatrices {
    pub xx: Mat3,
    pub xp: Mat3,
    pub px: Mat3,
    pub pp: Mat3,
}

impl VariationalMatrices {
    /// Max of the symmetry residuals `|xx - xx^T|`, `|pp - pp^T|`,
    /// `|xp - px^T|`.
    pub fn symmetry_residual(&self) -> f64 {
        let a = (self.xx - self.xx.transpose()).norm();
        let b = (self.pp - self.pp.transpose()).norm();
        let c = (self.xp - self.px.transpose()).norm();
        a.max(b).max(c)
    }
}

/// All first/second derivatives of lambda at one phase point.
#[derive(Debug, Clone)]
pub struct LambdaDerivs {
    pub value: f64,
    pub grad_p: Vec3,
    pub grad_x: Vec3,
    pub var: VariationalMatrices,
    /// Kinetic momentum `P = p - (e/c) A`.
    pub kinetic_p: Vec3,
    /// `eps = sqrt(c^2 P^2 + m0^2 c^4)` (relativistic modes; rest energy
    /// scale is still reported in nonrelativistic mode).
    pub epsilon: f64,
    /// Velocity over c: `beta = lambda_p / c` (carries the frequency sign).
    pub beta: Vec3,
    /// Field derivative table used for the evaluation.
    pub fields: FieldDerivatives,
}

impl HamiltonianSpec {
    pub fn new(mode: Mode, constants: Constants, field: FieldModel) -> Result<Self, EngineError> {
        constants.validate().map_err(EngineError::Config)?;
        field.validate()?;
        Ok(HamiltonianSpec { mode, constants, field })
    }

    pub fn kinetic_momentum(&self, z: &PhasePoint, t: f64) -> Vec3 {
        let (_, a) = self.field.potentials(&z.x, t, self.constants.c);
        z.p - a * (self.constants.e / self.constants.c)
    }

    pub fn epsilon(&self, z: &PhasePoint, t: f64) -> f64 {
        let c = self.constants.c;
        let kp = self.kinetic_momentum(z, t);
        (c * c * kp.norm_squared() + self.constants.rest_energy().powi(2)).sqrt()
    }

    /// lambda at (z, t): `e Phi +/- eps`, or the nonrelativistic form.
    pub fn lambda_value(&self, z: &PhasePoint, t: f64) -> f64 {
        let cst = &self.constants;
        let (phi, a) = self.field.potentials(&z.x, t, cst.c);
        let kp = z.p - a * (cst.e / cst.c);
        match self.mode {
            Mode::Nonrelativistic => kp.norm_squared() / (2.0 * cst.m0) + cst.e * phi,
            m => {
                let eps = (cst.c * cst.c * kp.norm_squared() + cst.rest_energy().powi(2)).sqrt();
                cst.e * phi + m.frequency_sign() * eps
            }
        }
    }

    /// Analytic value/gradient/Hessian bundle; derivative order of the field
    /// table is 2 (enough for the variational blocks).
    pub fn lambda_derivs(&self, z: &PhasePoint, t: f64) -> Result<LambdaDerivs, EngineError> {
        let cst = &self.constants;
        let (e, c) = (cst.e, cst.c);
        let fd = self.field.derivatives(&z.x, t, c, 2)?;
        let kp = z.p - fd.a * (e / c);
        let rest2 = cst.rest_energy().powi(2);
        let eps = (c * c * kp.norm_squared() + rest2).sqrt();

        let (value, grad_p, pp, beta) = match self.mode {
            Mode::Nonrelativistic => {
                let grad_p = kp / cst.m0;
                (
                    kp.norm_squared() / (2.0 * cst.m0) + e * fd.phi,
                    grad_p,
                    Mat3::identity() / cst.m0,
                    grad_p / c,
                )
            }
            m => {
                let s = m.frequency_sign();
                let b = kp * (c / eps);
                let grad_p = kp * (s * c * c / eps);
                let pp = (Mat3::identity() - b * b.transpose()) * (s * c * c / eps);
                (e * fd.phi + s * eps, grad_p, pp, grad_p / c)
            }
        };

        // grad_x_j = e Phi_j - e <beta, dA/dx_j>
        let grad_x = e * fd.dphi - e * (fd.da.transpose() * beta);
        // px = -(e/c) pp dA ; xp = px^T
        let px = -(e / c) * pp * fd.da;
        let xp = px.transpose();
        // xx_{kj} = e Phi_{kj} - e <beta, A_{,kj}> + (e^2/c^2) <A_{,k}, pp A_{,j}>
        let mut xx = e * fd.d2phi;
        for k in 0..3 {
            for j in 0..3 {
                let mut bterm = 0.0;
                for m in 0..3 {
                    bterm += beta[m] * fd.d2a[m][(k, j)];
                }
                xx[(k, j)] -= e * bterm;
            }
        }
        xx += (e * e / (c * c)) * fd.da.transpose() * pp * fd.da;

        Ok(LambdaDerivs {
            value,
            grad_p,
            grad_x,
            var: VariationalMatrices { xx, xp, px, pp },
            kinetic_p: kp,
            epsilon: eps,
            beta,
            fields: fd,
        })
    }

    /// Hamilton right-hand side `(pdot, xdot) = (-lambda_x, lambda_p)`.
    pub fn hamilton_rhs(&self, z: &PhasePoint, t: f64) -> Result<(Vec3, Vec3), EngineError> {
        let d = self.lambda_derivs(z, t)?;
        Ok((-d.grad_x, d.grad_p))
    }

    pub fn variational_matrices(&self, z: &PhasePoint, t: f64) -> Result<VariationalMatrices, EngineError> {
        Ok(self.lambda_derivs(z, t)?.var)
    }

    /// 6-gradient in z = (p, x) order.
    pub fn lambda_grad6(&self, z: &PhasePoint, t: f64) -> Result<Vec6, EngineError> {
        let d = self.lambda_derivs(z, t)?;
        let mut g = Vec6::zeros();
        for i in 0..3 {
            g[i] = d.grad_p[i];
            g[3 + i] = d.grad_x[i];
        }
        Ok(g)
    }

    /// 6x6 Hessian in z = (p, x) order: [[pp, px], [xp, xx]].
    pub fn lambda_hessian6(&self, z: &PhasePoint, t: f64) -> Result<Mat6, EngineError> {
        let v = self.variational_matrices(z, t)?;
        let mut h = Mat6::zeros();
        for i in 0..3 {
            for j in 0..3 {
                h[(i, j)] = v.pp[(i, j)];
                h[(i, 3 + j)] = v.px[(i, j)];
                h[(3 + i, j)] = v.xp[(i, j)];
                h[(3 + i, 3 + j)] = v.xx[(i, j)];
            }
        }
        Ok(h)
    }

    /// Time derivative of beta along the flow, from the analytic chain rule
    /// `beta_dot = (1/c) [pp pdot + px xdot - (e/c) pp A_t]`.
    pub fn beta_dot(&self, z: &PhasePoint, t: f64) -> Result<Vec3, EngineError> {
        let d = self.lambda_derivs(z, t)?;
        let pdot = -d.grad_x;
        let xdot = d.grad_p;
        let cst = &self.constants;
        Ok((d.var.pp * pdot + d.var.px * xdot - (cst.e / cst.c) * d.var.pp * d.fields.a_t)
            / cst.c)
    }

    /// gamma factor at (z, t); `1/sqrt(1 - beta^2)`.
    pub fn gamma(&self, z: &PhasePoint, t: f64) -> f64 {
        match self.mode {
            Mode::Nonrelativistic => {
                let v = self.kinetic_momentum(z, t) / self.constants.m0;
                let b2 = v.norm_squared() / (self.constants.c * self.constants.c);
                1.0 / (1.0 - b2).sqrt()
            }
            _ => self.epsilon(z, t) / self.constants.rest_energy(),
        }
    }

    pub fn check_initial_point(&self, z0: &PhasePoint) -> Result<(), EngineError> {
        if !z0.p.iter().chain(z0.x.iter()).all(|v| v.is_finite()) {
            return Err(EngineError::Domain("initial phase point has non-finite components".into()));
        }
        if matches!(self.mode, Mode::Nonrelativistic) {
            let v = self.kinetic_momentum(z0, 0.0) / self.constants.m0;
            if v.norm() >= self.constants.c {
                return Err(EngineError::Domain(format!(
                    "nonrelativistic velocity |v| = {:.3e} exceeds c = {:.3e}",
                    v.norm(),
                    self.constants.c
                )));
            }
        }
        Ok(())
    }
}

/// Dense classical solution `z(t)` with accumulated action `S0(t)`.
#[derive(Debug, Clone)]
pub struct PhaseTrajectory {
    dense: DenseSolution,
    t0: f64,
    tf: f64,
}

/// One sampled point of the flow with the derived kinematic scalars.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySample {
    pub t: f64,
    pub z: PhasePoint,
    pub s0: f64,
    pub epsilon: f64,
    pub beta: Vec3,
    pub gamma: f64,
}

impl PhaseTrajectory {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn phase_point(&self, t: f64) -> Result<PhasePoint, EngineError> {
        let mut y = [0.0; 7];
        self.dense.eval(t, &mut y).map_err(EngineError::from)?;
        Ok(PhasePoint::from_slice(&y))
    }

    pub fn action(&self, t: f64) -> Result<f64, EngineError> {
        let mut y = [0.0; 7];
        self.dense.eval(t, &mut y).map_err(EngineError::from)?;
        Ok(y[6])
    }

    pub fn sample(&self, spec: &HamiltonianSpec, t: f64) -> Result<TrajectorySample, EngineError> {
        let mut y = [0.0; 7];
        self.dense.eval(t, &mut y).map_err(EngineError::from)?;
        let z = PhasePoint::from_slice(&y);
        let eps = spec.epsilon(&z, t);
        let d = spec.lambda_derivs(&z, t)?;
        Ok(TrajectorySample {
            t,
            z,
            s0: y[6],
            epsilon: eps,
            beta: d.beta,
            gamma: spec.gamma(&z, t),
        })
    }

    /// Accepted integration-step endpoints (useful as a natural output grid).
    pub fn step_times(&self) -> Vec<f64> {
        self.dense.step_times()
    }

    pub fn n_accepted(&self) -> usize {
        self.dense.n_accepted
    }
}

/// Integrate the Hamilton system with the action as an augmented component:
/// state `[p, x, S0]`, `S0' = <p, xdot> - lambda`.
pub fn integrate_trajectory(
    spec: &HamiltonianSpec,
    z0: &PhasePoint,
    t_span: (f64, f64),
    opts: &OdeOptions,
) -> Result<PhaseTrajectory, EngineError> {
    spec.check_initial_point(z0)?;
    let y0 = [z0.p.x, z0.p.y, z0.p.z, z0.x.x, z0.x.y, z0.x.z, 0.0];
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> ode::RhsResult {
        if !y.iter().all(|v| v.is_finite()) {
            return Err(OdeError::Domain { t, what: "non-finite state during trajectory integration".into() });
        }
        let z = PhasePoint::from_slice(y);
        let d = spec
            .lambda_derivs(&z, t)
            .map_err(|e| OdeError::Domain { t, what: e.to_string() })?;
        let pdot = -d.grad_x;
        let xdot = d.grad_p;
        dy[0] = pdot.x;
        dy[1] = pdot.y;
        dy[2] = pdot.z;
        dy[3] = xdot.x;
        dy[4] = xdot.y;
        dy[5] = xdot.z;
        dy[6] = z.p.dot(&xdot) - d.value;
        Ok(())
    };
    let dense = ode::solve(rhs, t_span.0, t_span.1, &y0, opts)?;
    Ok(PhaseTrajectory { dense, t0: t_span.0, tf: t_span.1 })
}

/// Contraction `T_c = sum_ab Delta2_ab d^3 lambda / dz_c dz_a dz_b` by
/// directional central differences of the analytic Hessian,
/// step `1e-4 * max(1, |z|)` per direction.
pub fn lambda_third_contract(
    spec: &HamiltonianSpec,
    z: &PhasePoint,
    t: f64,
    delta2: &Mat6,
) -> Result<Vec6, EngineError> {
    let scale = z.as_vec6().norm().max(1.0);
    let h = 1e-4 * scale;
    let mut out = Vec6::zeros();
    for c in 0..6 {
        let mut yp = z.as_vec6();
        yp[c] += h;
        let mut ym = z.as_vec6();
        ym[c] -= h;
        let hp = spec.lambda_hessian6(&PhasePoint::from_slice(yp.as_slice()), t)?;
        let hm = spec.lambda_hessian6(&PhasePoint::from_slice(ym.as_slice()), t)?;
        let slice = (hp - hm) / (2.0 * h);
        let mut acc = 0.0;
        for a in 0..6 {
            for b in 0..6 {
                acc += delta2[(a, b)] * slice[(a, b)];
            }
        }
        out[c] = acc;
    }
    Ok(out)
}

/// 6x6 symplectic unit J = [[0, -I], [I, 0]] in z = (p, x) order:
/// `J grad = (-lambda_x, lambda_p)`.
pub fn symplectic_unit() -> Mat6 {
    let mut j = Mat6::zeros();
    for i in 0..3 {
        j[(i, 3 + i)] = -1.0;
        j[(3 + i, i)] = 1.0;
    }
    j
}
