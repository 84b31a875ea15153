//! Dirac matrix algebra, energy-sheet projectors, the identity suite for
//! them, and spin transport in both spinor and polarization-vector form.
//!
//! Conventions: `e` is the signed particle charge (`e0 = -e`), the Bohr
//! magneton `mu0 = hbar e0 / (2 m0 c)` uses `e0`, and the spinor transport
//! equation is `i hbar du/dt = <sigma, D0(t)> u`. The two printed 3-vector
//! forms of the classical spin-precession equation differ in the sign of the
//! anomalous `<a, E>` term and in the orientation of the `a x H` term; both
//! are implemented and an empirical transport oracle decides between them.

use crate::classical::{HamiltonianSpec, PhaseTrajectory};
use crate::ode::{self, DenseSolution, OdeError, OdeOptions};
use crate::{C64, CMat2, CMat4, CMat4x2, CVec2, Constants, EngineError, Mat3, Vec3};
use std::sync::OnceLock;

/// Pauli matrices and the 4x4 Dirac building blocks.
#[derive(Debug, Clone)]
pub struct DiracAlgebra {
    pub sigma: [CMat2; 3],
    pub rho1: CMat4,
    pub rho2: CMat4,
    pub rho3: CMat4,
    pub sigma4: [CMat4; 3],
    pub alpha: [CMat4; 3],
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn build_algebra() -> DiracAlgebra {
    let s1 = CMat2::new(c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.));
    let s2 = CMat2::new(c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.));
    let s3 = CMat2::new(c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.));
    let i2 = CMat2::identity();
    let z2 = CMat2::zeros();
    let block = |a: &CMat2, b: &CMat2, d: &CMat2, e: &CMat2| -> CMat4 {
        let mut m = CMat4::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(a);
        m.fixed_view_mut::<2, 2>(0, 2).copy_from(b);
        m.fixed_view_mut::<2, 2>(2, 0).copy_from(d);
        m.fixed_view_mut::<2, 2>(2, 2).copy_from(e);
        m
    };
    let rho1 = block(&z2, &i2, &i2, &z2);
    let rho2 = block(&z2, &(i2 * c(0., -1.)), &(i2 * c(0., 1.)), &z2);
    let rho3 = block(&i2, &z2, &z2, &(-i2));
    let sigma = [s1, s2, s3];
    let sigma4 = [
        block(&s1, &z2, &z2, &s1),
        block(&s2, &z2, &z2, &s2),
        block(&s3, &z2, &z2, &s3),
    ];
    let alpha = [rho1 * sigma4[0], rho1 * sigma4[1], rho1 * sigma4[2]];
    DiracAlgebra { sigma, rho1, rho2, rho3, sigma4, alpha }
}

pub fn dirac_algebra() -> &'static DiracAlgebra {
    static ALG: OnceLock<DiracAlgebra> = OnceLock::new();
    ALG.get_or_init(build_algebra)
}

/// `<sigma, v>` for a real 3-vector.
pub fn sigma_dot(v: &Vec3) -> CMat2 {
    let a = dirac_algebra();
    a.sigma[0] * c(v.x, 0.) + a.sigma[1] * c(v.y, 0.) + a.sigma[2] * c(v.z, 0.)
}

/// `<Sigma, v>` (4x4 block-diagonal Pauli contraction).
pub fn sigma4_dot(v: &Vec3) -> CMat4 {
    let a = dirac_algebra();
    a.sigma4[0] * c(v.x, 0.) + a.sigma4[1] * c(v.y, 0.) + a.sigma4[2] * c(v.z, 0.)
}

/// Kinematic data of one trajectory point, everything the spin formulas need.
#[derive(Debug, Clone, Copy)]
pub struct KinematicPoint {
    pub beta: Vec3,
    pub gamma: f64,
    pub epsilon: f64,
    pub kinetic_p: Vec3,
    pub phi: f64,
    pub e_field: Vec3,
    pub h_field: Vec3,
}

impl KinematicPoint {
    /// Build from a velocity and local fields (on-shell:
    /// `eps = gamma m0 c^2`, `P = eps beta / c`).
    pub fn from_beta(beta: Vec3, e_field: Vec3, h_field: Vec3, cst: &Constants) -> Result<Self, EngineError> {
        let b2 = beta.norm_squared();
        if b2 >= 1.0 {
            return Err(EngineError::Domain(format!("|beta| = {} >= 1", b2.sqrt())));
        }
        let gamma = 1.0 / (1.0 - b2).sqrt();
        let epsilon = gamma * cst.rest_energy();
        Ok(KinematicPoint {
            beta,
            gamma,
            epsilon,
            kinetic_p: epsilon * beta / cst.c,
            phi: 0.0,
            e_field,
            h_field,
        })
    }

    pub fn on_trajectory(spec: &HamiltonianSpec, traj: &PhaseTrajectory, t: f64) -> Result<Self, EngineError> {
        Self::at_point(spec, &traj.phase_point(t)?, t)
    }

    pub fn at_point(spec: &HamiltonianSpec, z: &crate::classical::PhasePoint, t: f64) -> Result<Self, EngineError> {
        let d = spec.lambda_derivs(z, t)?;
        Ok(KinematicPoint {
            beta: d.beta,
            gamma: spec.gamma(z, t),
            epsilon: d.epsilon,
            kinetic_p: d.kinetic_p,
            phi: d.fields.phi,
            e_field: d.fields.e,
            h_field: d.fields.h,
        })
    }

    /// `lambda_pp^(+) = (c^2/eps)(I - beta beta^T)`.
    pub fn lambda_pp(&self, cst: &Constants) -> Mat3 {
        (Mat3::identity() - self.beta * self.beta.transpose()) * (cst.c * cst.c / self.epsilon)
    }
}

/// 4x2 eigencolumn pairs of the Dirac principal symbol for the two sheets.
pub fn projectors_pi(k: &KinematicPoint) -> (CMat4x2, CMat4x2) {
    let n = 1.0 + 1.0 / k.gamma;
    let f = c(1.0 / (2.0 * n).sqrt(), 0.0);
    let sb = sigma_dot(&k.beta);
    let mut plus = CMat4x2::zeros();
    let mut minus = CMat4x2::zeros();
    plus.fixed_view_mut::<2, 2>(0, 0).copy_from(&(CMat2::identity() * c(n, 0.0) * f));
    plus.fixed_view_mut::<2, 2>(2, 0).copy_from(&(sb * f));
    minus.fixed_view_mut::<2, 2>(0, 0).copy_from(&(sb * f));
    minus.fixed_view_mut::<2, 2>(2, 0).copy_from(&(CMat2::identity() * c(-n, 0.0) * f));
    (plus, minus)
}

/// Analytic time derivative of the projectors given `beta_dot`.
pub fn projectors_pi_dot(k: &KinematicPoint, beta_dot: &Vec3) -> (CMat4x2, CMat4x2) {
    let n = 1.0 + 1.0 / k.gamma;
    let ndot = -k.gamma * k.beta.dot(beta_dot);
    let f = 1.0 / (2.0 * n).sqrt();
    let fdot = -ndot / (2.0 * n).powf(1.5);
    let sb = sigma_dot(&k.beta);
    let sbd = sigma_dot(beta_dot);
    let mut dplus = CMat4x2::zeros();
    let mut dminus = CMat4x2::zeros();
    // d/dt of f [n I; <sigma,beta>]
    let top = CMat2::identity() * c(fdot * n + f * ndot, 0.0);
    let bot = sb * c(fdot, 0.0) + sbd * c(f, 0.0);
    dplus.fixed_view_mut::<2, 2>(0, 0).copy_from(&top);
    dplus.fixed_view_mut::<2, 2>(2, 0).copy_from(&bot);
    // d/dt of f [<sigma,beta>; -n I]
    dminus.fixed_view_mut::<2, 2>(0, 0).copy_from(&bot);
    dminus.fixed_view_mut::<2, 2>(2, 0).copy_from(&(-top));
    (dplus, dminus)
}

/// Principal symbol `H0 = c <alpha, P> + rho3 m0 c^2 + e Phi`.
pub fn h0_matrix(k: &KinematicPoint, cst: &Constants) -> CMat4 {
    let a = dirac_algebra();
    let mut m = CMat4::zeros();
    for i in 0..3 {
        m += a.alpha[i] * c(cst.c * k.kinetic_p[i], 0.0);
    }
    m += a.rho3 * c(cst.rest_energy(), 0.0);
    m += CMat4::identity() * c(cst.e * k.phi, 0.0);
    m
}

fn max_abs2(m: &CMat2) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn max_abs3(m: &Mat3) -> f64 {
    m.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

fn max_abs42(m: &CMat4x2) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn max_abs4(m: &CMat4) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Apply a 2x2 matrix from the right to a 4x2 column pair.
fn mul_right(p: &CMat4x2, m: &CMat2) -> CMat4x2 {
    p * m
}

/// Residual table of one identity-suite evaluation.
#[derive(Debug, Clone, Default)]
pub struct IdentityReport {
    pub entries: Vec<(String, f64)>,
}

impl IdentityReport {
    fn push(&mut self, id: &str, r: f64) {
        self.entries.push((id.to_string(), r));
    }

    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }

    pub fn merge_max(&mut self, other: &IdentityReport) {
        if self.entries.is_empty() {
            self.entries = other.entries.clone();
            return;
        }
        for (mine, theirs) in self.entries.iter_mut().zip(&other.entries) {
            debug_assert_eq!(mine.0, theirs.0);
            mine.1 = mine.1.max(theirs.1);
        }
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.entries.iter().find(|(k, _)| k == id).map(|(_, r)| *r)
    }
}

/// Evaluate both sides of the projector / lambda_pp matrix identities and
/// return the max elementwise residual per identity. `beta_dot` feeds the
/// projector-derivative identity; `s_vec` is the arbitrary vector of the
/// `<Sigma, S>` expansion.
pub fn pi_identity_residuals(
    k: &KinematicPoint,
    beta_dot: &Vec3,
    s_vec: &Vec3,
    cst: &Constants,
) -> IdentityReport {
    let alg = dirac_algebra();
    let mut rep = IdentityReport::default();
    let n = 1.0 + 1.0 / k.gamma;
    let (eps, cc) = (k.epsilon, cst.c);
    let lpp = k.lambda_pp(cst);
    let bbt = k.beta * k.beta.transpose();

    // A.1 closed-form square root (negative-definite branch) against the
    // eigendecomposition oracle, plus the defining square relation.
    let closed_sqrt = (bbt / n - Mat3::identity()) * (cc / eps.sqrt());
    let eig = nalgebra::SymmetricEigen::new(lpp);
    let sqrt_oracle = -(eig.eigenvectors
        * Mat3::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()))
        * eig.eigenvectors.transpose());
    let r_a1 = max_abs3(&(closed_sqrt - sqrt_oracle)).max(max_abs3(&(closed_sqrt * closed_sqrt - lpp)));
    rep.push("A.1", r_a1);

    // A.2 inverse square root
    let closed_isqrt = -(Mat3::identity() + bbt * (k.gamma / n)) * (eps.sqrt() / cc);
    let r_a2 = max_abs3(&(closed_sqrt * closed_isqrt - Mat3::identity()))
        .max(max_abs3(&(closed_isqrt - sqrt_oracle.try_inverse().expect("invertible sqrt"))));
    rep.push("A.2", r_a2);

    // A.3 inverse
    let closed_inv = (Mat3::identity() + bbt * (k.gamma * k.gamma)) * (eps / (cc * cc));
    let r_a3 = max_abs3(&(lpp * closed_inv - Mat3::identity()));
    rep.push("A.3", r_a3);

    let (pp, pm) = projectors_pi(k);
    let h0 = h0_matrix(k, cst);
    let lam_p = cst.e * k.phi + eps;
    let lam_m = cst.e * k.phi - eps;

    // A.4 eigenrelation
    let r_a4 = max_abs42(&(h0 * pp - pp * c(lam_p, 0.0))).max(max_abs42(&(h0 * pm - pm * c(lam_m, 0.0))));
    rep.push("A.4", r_a4);

    // A.5 rho1 <Sigma, P> expansion (both printed forms)
    let sp = sigma_dot(&k.kinetic_p);
    let sb = sigma_dot(&k.beta);
    let bp = k.beta.dot(&k.kinetic_p);
    let lhs_p = alg.rho1 * sigma4_dot(&k.kinetic_p) * pp;
    let lhs_m = alg.rho1 * sigma4_dot(&k.kinetic_p) * pm;
    let bracket = sb * c(bp / n, 0.0) - sp;
    let rhs1_p = pp * c(bp, 0.0) + mul_right(&pm, &bracket);
    let rhs1_m = pm * c(-bp, 0.0) + mul_right(&pp, &bracket);
    let sqrt_p_vec = closed_sqrt * k.kinetic_p;
    let rhs2_p = pp * c(bp, 0.0) + mul_right(&pm, &(sigma_dot(&sqrt_p_vec) * c(eps.sqrt() / cc, 0.0)));
    let r_a5 = max_abs42(&(lhs_p - rhs1_p))
        .max(max_abs42(&(lhs_m - rhs1_m)))
        .max(max_abs42(&(lhs_p - rhs2_p)));
    rep.push("A.5", r_a5);

    // A.6 projector time derivative
    let (dp, dm) = projectors_pi_dot(k, beta_dot);
    let bxbd = k.beta.cross(beta_dot);
    let diag_term = sigma_dot(&bxbd) * c(0.0, 0.5 / n);
    let mix = sb * c(k.gamma * k.beta.dot(beta_dot) / n, 0.0) + sigma_dot(beta_dot);
    let rhs_dp = mul_right(&pp, &diag_term) + mul_right(&pm, &(mix * c(-0.5, 0.0)));
    let rhs_dm = mul_right(&pm, &diag_term) + mul_right(&pp, &(mix * c(0.5, 0.0)));
    let r_a6 = max_abs42(&(dp - rhs_dp)).max(max_abs42(&(dm - rhs_dm)));
    rep.push("A.6", r_a6);

    // A.7 rho3 <Sigma, H>
    let h = k.h_field;
    let sh = sigma_dot(&h);
    let bh = k.beta.dot(&h);
    let br7 = sb * c(bh / n, 0.0) - sh;
    let lhs7p = alg.rho3 * sigma4_dot(&h) * pp;
    let lhs7m = alg.rho3 * sigma4_dot(&h) * pm;
    let r_a7 = max_abs42(&(lhs7p - (mul_right(&pp, &(br7 * c(-1.0, 0.0))) + pm * c(bh, 0.0))))
        .max(max_abs42(&(lhs7m - (mul_right(&pm, &br7) + pp * c(bh, 0.0)))));
    rep.push("A.7", r_a7);

    // A.8 rho2 <Sigma, E>
    let e_f = k.e_field;
    let se = sigma_dot(&e_f);
    let sbxe = sigma_dot(&k.beta.cross(&e_f));
    let br8 = sb * c(k.beta.dot(&e_f) / n, 0.0) + se * c(1.0 / k.gamma, 0.0);
    let lhs8p = alg.rho2 * sigma4_dot(&e_f) * pp;
    let lhs8m = alg.rho2 * sigma4_dot(&e_f) * pm;
    let r_a8 = max_abs42(&(lhs8p - (mul_right(&pp, &(-sbxe)) + mul_right(&pm, &(br8 * c(0.0, -1.0))))))
        .max(max_abs42(&(lhs8m - (mul_right(&pm, &(-sbxe)) + mul_right(&pp, &(br8 * c(0.0, 1.0)))))));
    rep.push("A.8", r_a8);

    // A.9 <Sigma, S> for an arbitrary vector
    let ss = sigma_dot(s_vec);
    let br9 = ss * c(1.0 / k.gamma, 0.0) + sb * c(k.beta.dot(s_vec) / n, 0.0);
    let sbxs = sigma_dot(&k.beta.cross(s_vec));
    let lhs9p = sigma4_dot(s_vec) * pp;
    let lhs9m = sigma4_dot(s_vec) * pm;
    let r_a9 = max_abs42(&(lhs9p - (mul_right(&pp, &br9) + mul_right(&pm, &(sbxs * c(0.0, 1.0))))))
        .max(max_abs42(&(lhs9m - (mul_right(&pm, &br9) + mul_right(&pp, &(sbxs * c(0.0, -1.0)))))));
    rep.push("A.9", r_a9);

    // A.10 rho3 projection
    let r_a10 = max_abs42(&(alg.rho3 * pp - (pp * c(1.0 / k.gamma, 0.0) + mul_right(&pm, &sb))))
        .max(max_abs42(&(alg.rho3 * pm - (pm * c(-1.0 / k.gamma, 0.0) + mul_right(&pp, &sb)))));
    rep.push("A.10", r_a10);

    // A.11 rho2 swap
    let r_a11 = max_abs42(&(alg.rho2 * pp - pm * c(0.0, -1.0)))
        .max(max_abs42(&(alg.rho2 * pm - pp * c(0.0, 1.0))));
    rep.push("A.11", r_a11);

    // A.12 rho1
    let r_a12 = max_abs42(&(alg.rho1 * pp - (mul_right(&pp, &sb) - pm * c(1.0 / k.gamma, 0.0))))
        .max(max_abs42(&(alg.rho1 * pm - (mul_right(&pm, &(-sb)) - pp * c(1.0 / k.gamma, 0.0)))));
    rep.push("A.12", r_a12);

    // A.13 orthonormality
    let r_a13 = max_abs2(&(pp.adjoint() * pp - CMat2::identity()))
        .max(max_abs2(&(pm.adjoint() * pm - CMat2::identity())))
        .max(max_abs2(&(pp.adjoint() * pm)));
    rep.push("A.13", r_a13);

    // A.14 completeness
    let r_a14 = max_abs4(&(pp * pp.adjoint() + pm * pm.adjoint() - CMat4::identity()));
    rep.push("A.14", r_a14);

    rep
}

/// Effective spin-precession vector
/// `D0 = (mu0/gamma)[(1 + gt gamma) H - (1/(1+1/gamma) + gt gamma) beta x E
///       - (gt gamma/(1+1/gamma)) beta <beta, H>]`, `gt = (g-2)/2`.
pub fn d0_vector(k: &KinematicPoint, g: f64, cst: &Constants) -> Vec3 {
    let gt = 0.5 * (g - 2.0);
    let n = 1.0 + 1.0 / k.gamma;
    (cst.mu0() / k.gamma)
        * ((1.0 + gt * k.gamma) * k.h_field
            - (1.0 / n + gt * k.gamma) * k.beta.cross(&k.e_field)
            - (gt * k.gamma / n) * k.beta * k.beta.dot(&k.h_field))
}

/// Two-spinor state with its preparation data.
#[derive(Debug, Clone)]
pub struct SpinState {
    pub u: CVec2,
    pub zeta: i8,
    pub ell: Vec3,
}

/// `zeta`-eigenvector of `<sigma, ell>`, phase fixed so the first component
/// with modulus above 1e-12 is real positive.
pub fn spinor_from_axis(ell: &Vec3, zeta: i8) -> Result<SpinState, EngineError> {
    let norm = ell.norm();
    if norm < 1e-12 {
        return Err(EngineError::Domain("spin axis must be a nonzero vector".into()));
    }
    if !(zeta == 1 || zeta == -1) {
        return Err(EngineError::Domain(format!("zeta must be +1 or -1, got {zeta}")));
    }
    let l = ell / norm;
    let lp = c(l.x, l.y);
    let lm = c(l.x, -l.y);
    let mut u = if zeta == 1 {
        if l.z < -1.0 + 1e-14 {
            CVec2::new(c(0.0, 0.0), c(1.0, 0.0))
        } else {
            CVec2::new(c(1.0 + l.z, 0.0), lp)
        }
    } else if l.z < -1.0 + 1e-14 {
        CVec2::new(c(1.0, 0.0), c(0.0, 0.0))
    } else {
        CVec2::new(-lm, c(1.0 + l.z, 0.0))
    };
    u /= c(u.norm(), 0.0);
    // phase gauge
    let lead = if u[0].norm() > 1e-12 { u[0] } else { u[1] };
    u *= lead.conj() / c(lead.norm(), 0.0);
    Ok(SpinState { u, zeta, ell: l })
}

/// Rest-frame polarization `eta = u^+ sigma u` (real for a pure state).
pub fn eta_of(u: &CVec2) -> Vec3 {
    let a = dirac_algebra();
    Vec3::new(
        (u.adjoint() * a.sigma[0] * u)[0].re,
        (u.adjoint() * a.sigma[1] * u)[0].re,
        (u.adjoint() * a.sigma[2] * u)[0].re,
    )
}

/// Dense spinor transport along a trajectory.
#[derive(Debug, Clone)]
pub struct SpinSeries {
    dense: DenseSolution,
    pub initial: SpinState,
    pub g: f64,
}

impl SpinSeries {
    pub fn u(&self, t: f64) -> Result<CVec2, EngineError> {
        let y = self.dense.eval_vec(t).map_err(EngineError::from)?;
        Ok(CVec2::new(c(y[0], y[1]), c(y[2], y[3])))
    }

    pub fn eta(&self, t: f64) -> Result<Vec3, EngineError> {
        Ok(eta_of(&self.u(t)?))
    }
}

/// Integrate `i hbar du/dt = <sigma, D0(t)> u` along the trajectory.
pub fn integrate_spinor(
    traj: &PhaseTrajectory,
    spec: &HamiltonianSpec,
    g: f64,
    ell: &Vec3,
    zeta: i8,
    opts: &OdeOptions,
) -> Result<SpinSeries, EngineError> {
    let init = spinor_from_axis(ell, zeta)?;
    let hbar = spec.constants.hbar;
    let y0 = [init.u[0].re, init.u[0].im, init.u[1].re, init.u[1].im];
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> ode::RhsResult {
        let k = KinematicPoint::on_trajectory(spec, traj, t)
            .map_err(|e| OdeError::Domain { t, what: e.to_string() })?;
        let d0 = d0_vector(&k, g, &spec.constants);
        let u = CVec2::new(c(y[0], y[1]), c(y[2], y[3]));
        // du/dt = -(i/hbar) <sigma, D0> u
        let du = sigma_dot(&d0) * u * c(0.0, -1.0 / hbar);
        dy[0] = du[0].re;
        dy[1] = du[0].im;
        dy[2] = du[1].re;
        dy[3] = du[1].im;
        Ok(())
    };
    let dense = ode::solve(rhs, traj.t0(), traj.tf(), &y0, opts)?;
    Ok(SpinSeries { dense, initial: init, g })
}

/// Boosted polarization pseudovector.
#[derive(Debug, Clone, Copy)]
pub struct Polarization {
    pub a: Vec3,
    pub a0: f64,
}

/// `a = zeta + gamma beta <zeta, beta> / (1 + 1/gamma)`, `a0 = gamma <zeta, beta>`.
pub fn boost_zeta_to_a(zeta_vec: &Vec3, beta: &Vec3, gamma: f64) -> Polarization {
    let n = 1.0 + 1.0 / gamma;
    let zb = zeta_vec.dot(beta);
    let a = zeta_vec + gamma * beta * (zb / n);
    Polarization { a, a0: gamma * zb }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BmtConvention {
    /// `adot = (g e / 2 m0 c gamma)(E <beta,a> + a x H)
    ///  + ((g-2) e gamma / 2 m0 c) beta (<beta, a x H> + <a,beta><beta,E> - <a,E>)`
    Eq230,
    /// `adot = (g e / 2 m0 c gamma)(<a,beta> E + H x a)
    ///  + ((g-2) e gamma / 2 m0 c) beta (<a,E> + <a,beta><beta,E> + <beta, a x H>)`
    EqB14,
}

impl std::fmt::Display for BmtConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BmtConvention::Eq230 => write!(f, "eq_2_30"),
            BmtConvention::EqB14 => write!(f, "eq_B_14"),
        }
    }
}

/// 3-vector spin-precession right-hand side in the selected printed form.
pub fn bmt_rhs(a: &Vec3, k: &KinematicPoint, g: f64, cst: &Constants, conv: BmtConvention) -> Vec3 {
    let pref = g * cst.e / (2.0 * cst.m0 * cst.c * k.gamma);
    let anom = (g - 2.0) * cst.e * k.gamma / (2.0 * cst.m0 * cst.c);
    let (e_f, h) = (k.e_field, k.h_field);
    let b = k.beta;
    match conv {
        BmtConvention::Eq230 => {
            pref * (e_f * b.dot(a) + a.cross(&h))
                + anom * b * (b.dot(&a.cross(&h)) + a.dot(&b) * b.dot(&e_f) - a.dot(&e_f))
        }
        BmtConvention::EqB14 => {
            pref * (a.dot(&b) * e_f + h.cross(a))
                + anom * b * (a.dot(&e_f) + a.dot(&b) * b.dot(&e_f) + b.dot(&a.cross(&h)))
        }
    }
}

/// Boosted polarization vector assembled from the transported spinor at one
/// time: `a(t) = eta + gamma beta <eta, beta> / (1 + 1/gamma)`.
pub fn transported_a(
    traj: &PhaseTrajectory,
    spec: &HamiltonianSpec,
    spins: &SpinSeries,
    t: f64,
) -> Result<Vec3, EngineError> {
    let k = KinematicPoint::on_trajectory(spec, traj, t)?;
    Ok(boost_zeta_to_a(&spins.eta(t)?, &k.beta, k.gamma).a)
}

/// Pointwise residual of each printed convention against the transported
/// polarization: `da/dt` comes from a centered difference of `a(t)` built
/// out of the integrated spinor, so the check is fully empirical.
pub fn bmt_pointwise_residuals(
    traj: &PhaseTrajectory,
    spec: &HamiltonianSpec,
    spins: &SpinSeries,
    t: f64,
) -> Result<(f64, f64), EngineError> {
    let cst = &spec.constants;
    let (lo, hi) = (traj.t0().min(traj.tf()), traj.t0().max(traj.tf()));
    let dt = 1e-5 * (hi - lo).max(1.0);
    let t = t.clamp(lo + dt, hi - dt);
    let k = KinematicPoint::on_trajectory(spec, traj, t)?;
    let a = transported_a(traj, spec, spins, t)?;
    let ap = transported_a(traj, spec, spins, t + dt)?;
    let am = transported_a(traj, spec, spins, t - dt)?;
    let a_dot = (ap - am) / (2.0 * dt);
    Ok((
        (a_dot - bmt_rhs(&a, &k, spins.g, cst, BmtConvention::Eq230)).norm(),
        (a_dot - bmt_rhs(&a, &k, spins.g, cst, BmtConvention::EqB14)).norm(),
    ))
}

/// RMS of the pointwise residuals over a set of sample times, per convention.
pub fn bmt_convention_residuals(
    traj: &PhaseTrajectory,
    spec: &HamiltonianSpec,
    spins: &SpinSeries,
    times: &[f64],
) -> Result<(f64, f64), EngineError> {
    let mut acc = [0.0f64; 2];
    for &t in times {
        let (r230, rb14) = bmt_pointwise_residuals(traj, spec, spins, t)?;
        acc[0] += r230 * r230;
        acc[1] += rb14 * rb14;
    }
    let m = times.len().max(1) as f64;
    Ok(((acc[0] / m).sqrt(), (acc[1] / m).sqrt()))
}
