//! Trajectory-coherent wavepacket construction and quadrature expectations.
//!
//! Scalar states are `N (det C)^{-1/2} P_nu(xi) exp(i S / hbar)` with
//! `S = S0(t) + <p, dx> + (1/2) <dx, Q dx>` and `xi = dx / sqrt(hbar)`;
//! the excited-state polynomials come from a ladder recursion that is
//! hbar-free in the xi variables. Four-component states dress the scalar
//! family with the energy-sheet projectors, the transported two-spinor, and
//! (at order 1) the first momentum-correction operator acting analytically on
//! the polynomial x Gaussian form.

pub mod green;
pub mod poly;
pub mod quadrature;

pub use poly::PolyXi;
pub use quadrature::{QuadratureGrid, QuadratureScheme};

use crate::classical::{HamiltonianSpec, PhaseTrajectory};
use crate::germ::GermSeries;
use crate::spin::{projectors_pi, sigma_dot, KinematicPoint, SpinSeries};
use crate::{C64, CMat3, CVec3, CVec4, EngineError, Mat6, Vec3};
use serde::{Deserialize, Serialize};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Energy-sheet projector pair ordered as (own sheet, opposite sheet) for
/// the configured frequency mode: the negative-frequency branch swaps
/// `Pi+ <-> Pi-` per the substitution rules (exposed, untested against the
/// positive-branch oracles).
pub fn sheet_projectors(
    spec: &HamiltonianSpec,
    k: &KinematicPoint,
) -> (crate::CMat4x2, crate::CMat4x2) {
    let (pi_p, pi_m) = projectors_pi(k);
    match spec.mode {
        crate::classical::Mode::RelativisticMinus => (pi_m, pi_p),
        _ => (pi_p, pi_m),
    }
}

/// Multi-indices with `|nu| <= max_total`, ordered by total degree then
/// lexicographically (x-major); a stable enumeration for sums and reports.
pub fn multi_indices(max_total: usize) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for d in 0..=max_total as u32 {
        for i in (0..=d).rev() {
            for j in (0..=(d - i)).rev() {
                out.push([i, j, d - i - j]);
            }
        }
    }
    out
}

/// Scalar trajectory-coherent family over one (trajectory, germ) pair.
pub struct ScalarTcs<'a> {
    pub spec: &'a HamiltonianSpec,
    pub traj: &'a PhaseTrajectory,
    pub germ: &'a GermSeries,
    pub hbar: f64,
    pub nu_max: usize,
    n_hbar: f64,
}

/// Frozen kinematic data of one evaluation time.
#[derive(Debug, Clone)]
pub struct ScalarCore {
    pub t: f64,
    pub center: Vec3,
    pub p_center: Vec3,
    pub s0: f64,
    pub q: CMat3,
    pub im_q: crate::Mat3,
    /// `N_hbar / sqrt(det C)` with the continuous branch.
    pub gc: C64,
    pub hbar: f64,
}

impl ScalarCore {
    pub fn xi(&self, x: &Vec3) -> Vec3 {
        (x - self.center) / self.hbar.sqrt()
    }

    /// Complex action `S(x, t)`.
    pub fn action(&self, x: &Vec3) -> C64 {
        let dx = x - self.center;
        let dxc = CVec3::new(c(dx.x, 0.), c(dx.y, 0.), c(dx.z, 0.));
        let quad = (dxc.transpose() * (self.q * dxc))[0];
        c(self.s0 + self.p_center.dot(&dx), 0.0) + 0.5 * quad
    }

    /// Gaussian factor `gc exp(i S / hbar)`.
    pub fn gaussian(&self, x: &Vec3) -> C64 {
        let s = self.action(x);
        self.gc * (C64::i() * s / c(self.hbar, 0.0)).exp()
    }

    /// `dp_hat` applied to a polynomial factor:
    /// `P -> sqrt(hbar) ((Q xi) P - i grad P)` componentwise.
    pub fn dp_poly(&self, p: &PolyXi, axis: usize) -> PolyXi {
        let row = CVec3::new(self.q[(axis, 0)], self.q[(axis, 1)], self.q[(axis, 2)]);
        let mut out = p.mul_linear(&row);
        out.add_assign_scaled(&p.diff(axis), c(0.0, -1.0));
        out.scaled(c(self.hbar.sqrt(), 0.0))
    }
}

/// One scalar state frozen at a time: evaluate anywhere.
#[derive(Debug, Clone)]
pub struct ScalarSnapshot {
    pub core: ScalarCore,
    pub nu: [u32; 3],
    pub poly: PolyXi,
}

impl ScalarSnapshot {
    pub fn value(&self, x: &Vec3) -> C64 {
        self.core.gaussian(x) * self.poly.eval(&self.core.xi(x))
    }
}

impl<'a> ScalarTcs<'a> {
    pub fn new(
        spec: &'a HamiltonianSpec,
        traj: &'a PhaseTrajectory,
        germ: &'a GermSeries,
        hbar: f64,
    ) -> Result<Self, EngineError> {
        if hbar <= 0.0 {
            return Err(EngineError::Config("hbar must be positive".into()));
        }
        let g0 = germ.state(traj.t0())?;
        let im_q0 = g0.q.map(|z| z.im);
        let det_imq = im_q0.determinant();
        if det_imq <= 0.0 {
            return Err(EngineError::Numerical("det Im Q(0) not positive".into()));
        }
        // N = (pi hbar)^{-3/4} |det C0|^{1/2} (det Im Q0)^{1/4}
        let n_hbar = (std::f64::consts::PI * hbar).powf(-0.75)
            * g0.c.determinant().norm().sqrt()
            * det_imq.powf(0.25);
        Ok(ScalarTcs { spec, traj, germ, hbar, nu_max: 6, n_hbar })
    }

    pub fn norm_constant(&self) -> f64 {
        self.n_hbar
    }

    pub fn core(&self, t: f64) -> Result<ScalarCore, EngineError> {
        let sample = self.traj.sample(self.spec, t)?;
        let g = self.germ.state(t)?;
        Ok(ScalarCore {
            t,
            center: sample.z.x,
            p_center: sample.z.p,
            s0: sample.s0,
            q: g.q,
            im_q: g.q.map(|z| z.im),
            gc: c(self.n_hbar, 0.0) / g.sqrt_det_c,
            hbar: self.hbar,
        })
    }

    /// Excited-state polynomial from the ladder recursion
    /// `P -> (2 Im b_j)^{-1/2} [ <(Q Z_j* - W_j*), xi> P - i <Z_j*, grad P> ]`.
    pub fn polynomial(&self, nu: &[u32; 3], t: f64) -> Result<PolyXi, EngineError> {
        let total = (nu[0] + nu[1] + nu[2]) as usize;
        if total > self.nu_max {
            return Err(EngineError::Config(format!(
                "|nu| = {total} exceeds nu_max = {}",
                self.nu_max
            )));
        }
        let g = self.germ.state(t)?;
        let mut p = PolyXi::one();
        let mut norm = 1.0f64;
        for j in 0..3 {
            let zj = CVec3::new(g.c[(0, j)].conj(), g.c[(1, j)].conj(), g.c[(2, j)].conj());
            let wj = CVec3::new(g.b[(0, j)].conj(), g.b[(1, j)].conj(), g.b[(2, j)].conj());
            let lin = g.q * zj - wj;
            let pref = 1.0 / (2.0 * g.im_b[j]).sqrt();
            for step in 0..nu[j] {
                let mut next = p.mul_linear(&lin);
                for ax in 0..3 {
                    next.add_assign_scaled(&p.diff(ax), c(0.0, -1.0) * zj[ax]);
                }
                p = next.scaled(c(pref, 0.0));
                norm *= (step + 1) as f64;
            }
        }
        Ok(p.scaled(c(1.0 / norm.sqrt(), 0.0)))
    }

    pub fn snapshot(&self, nu: &[u32; 3], t: f64) -> Result<ScalarSnapshot, EngineError> {
        Ok(ScalarSnapshot { core: self.core(t)?, nu: *nu, poly: self.polynomial(nu, t)? })
    }

    pub fn eval(&self, nu: &[u32; 3], x: &Vec3, t: f64) -> Result<C64, EngineError> {
        Ok(self.snapshot(nu, t)?.value(x))
    }

    /// Normalized packet density `N^2 |det C|^-1 exp(-2 Im S / hbar)`
    /// (the exponent sign is fixed by `int rho d^3x = 1`).
    pub fn measure_density(&self, x: &Vec3, t: f64) -> Result<f64, EngineError> {
        let core = self.core(t)?;
        let s = core.action(x);
        let g = self.germ.state(t)?;
        Ok(self.n_hbar * self.n_hbar / g.c.determinant().norm() * (-2.0 * s.im / self.hbar).exp())
    }

    /// Default packet-adapted Gauss-Hermite grid at time t.
    pub fn grid(&self, t: f64, nodes_per_axis: usize) -> Result<QuadratureGrid, EngineError> {
        let core = self.core(t)?;
        QuadratureGrid::gauss_hermite_packet(&core.center, &core.im_q, self.hbar, nodes_per_axis)
    }
}

/// Gram matrix of the states listed in `nus` at time t.
pub fn gram_matrix(
    tcs: &ScalarTcs,
    nus: &[[u32; 3]],
    t: f64,
    grid: &QuadratureGrid,
) -> Result<nalgebra::DMatrix<C64>, EngineError> {
    let snaps: Vec<ScalarSnapshot> =
        nus.iter().map(|nu| tcs.snapshot(nu, t)).collect::<Result<_, _>>()?;
    let m = snaps.len();
    let mut vals = nalgebra::DMatrix::<C64>::zeros(m, grid.len());
    for (i, s) in snaps.iter().enumerate() {
        for (k, x) in grid.points.iter().enumerate() {
            vals[(i, k)] = s.value(x);
        }
    }
    let mut gram = nalgebra::DMatrix::<C64>::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            let mut acc = c(0.0, 0.0);
            for k in 0..grid.len() {
                acc += vals[(a, k)].conj() * vals[(b, k)] * c(grid.weights[k], 0.0);
            }
            gram[(a, b)] = acc;
        }
    }
    Ok(gram)
}

/// Four-component trajectory-coherent state configuration.
pub struct DiracTcs<'a> {
    pub scalar: &'a ScalarTcs<'a>,
    pub spins: &'a SpinSeries,
    pub nu: [u32; 3],
    pub order: u8,
}

/// Frozen four-component state: `Psi_alpha(x) = G(x) polys[alpha](xi)`.
#[derive(Debug, Clone)]
pub struct DiracSnapshot {
    pub core: ScalarCore,
    pub polys: [PolyXi; 4],
}

impl DiracSnapshot {
    pub fn value(&self, x: &Vec3) -> CVec4 {
        let g = self.core.gaussian(x);
        let xi = self.core.xi(x);
        CVec4::new(
            g * self.polys[0].eval(&xi),
            g * self.polys[1].eval(&xi),
            g * self.polys[2].eval(&xi),
            g * self.polys[3].eval(&xi),
        )
    }

    /// `p_hat_k Psi` as polynomial components (same Gaussian factor):
    /// `p_k P + dp_hat_k P`.
    pub fn momentum_polys(&self, axis: usize) -> [PolyXi; 4] {
        let pk = c(self.core.p_center[axis], 0.0);
        std::array::from_fn(|alpha| {
            let mut out = self.polys[alpha].scaled(pk);
            out.add_assign_scaled(&self.core.dp_poly(&self.polys[alpha], axis), c(1.0, 0.0));
            out
        })
    }
}

impl<'a> DiracTcs<'a> {
    pub fn snapshot(&self, t: f64) -> Result<DiracSnapshot, EngineError> {
        let spec = self.scalar.spec;
        let core = self.scalar.core(t)?;
        let p_nu = self.scalar.polynomial(&self.nu, t)?;
        let k = KinematicPoint::on_trajectory(spec, self.scalar.traj, t)?;
        let (pi_main, pi_other) = sheet_projectors(spec, &k);
        let u = self.spins.u(t)?;
        let upper = pi_main * u; // 4-vector
        let mut polys: [PolyXi; 4] = std::array::from_fn(|a| p_nu.scaled(upper[a]));
        if self.order >= 1 {
            // sqrt(hbar) Q1 applied to u P:
            // P1_hat = dp_hat - (e/c) dA dx acting on the polynomial factor
            let z = self.scalar.traj.phase_point(t)?;
            let fd = spec.field.derivatives(&z.x, t, spec.constants.c, 1)?;
            let m_mat = core.q
                - fd.da.map(|v| c(spec.constants.e / spec.constants.c * v, 0.0));
            let sqrt_h = c(self.scalar.hbar.sqrt(), 0.0);
            // v_k = sqrt(hbar) ((M xi)_k P - i d_k P)
            let v: [PolyXi; 3] = std::array::from_fn(|kx| {
                let row = CVec3::new(m_mat[(kx, 0)], m_mat[(kx, 1)], m_mat[(kx, 2)]);
                let mut out = p_nu.mul_linear(&row);
                out.add_assign_scaled(&p_nu.diff(kx), c(0.0, -1.0));
                out.scaled(sqrt_h)
            });
            // w = c [ <sigma,beta> u <beta, v>/(1+1/gamma) - <sigma, v> u ]
            let n = 1.0 + 1.0 / k.gamma;
            let sbu = sigma_dot(&k.beta) * u;
            let mut w = [PolyXi::zero(), PolyXi::zero()];
            for kx in 0..3 {
                let coeff = c(spec.constants.c * k.beta[kx] / n, 0.0);
                for a in 0..2 {
                    w[a].add_assign_scaled(&v[kx], coeff * sbu[a]);
                }
                let sku = crate::spin::dirac_algebra().sigma[kx] * u;
                for a in 0..2 {
                    w[a].add_assign_scaled(&v[kx], c(-spec.constants.c, 0.0) * sku[a]);
                }
            }
            // Psi += (1/(2 eps)) Pi_opposite w
            let pref = c(1.0 / (2.0 * k.epsilon), 0.0);
            for alpha in 0..4 {
                for b in 0..2 {
                    polys[alpha].add_assign_scaled(&w[b], pref * pi_other[(alpha, b)]);
                }
            }
        }
        Ok(DiracSnapshot { core, polys })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Position,
    Momentum,
    PauliSpin,
    BargmannS0,
    BargmannSvec,
    Norm,
}

#[derive(Debug, Clone, Serialize)]
pub enum ExpectationValue {
    Scalar { re: f64, im: f64 },
    Vector { re: [f64; 3], im: [f64; 3] },
}

impl ExpectationValue {
    fn from_c(v: C64) -> Self {
        ExpectationValue::Scalar { re: v.re, im: v.im }
    }

    fn from_cvec(v: [C64; 3]) -> Self {
        ExpectationValue::Vector { re: [v[0].re, v[1].re, v[2].re], im: [v[0].im, v[1].im, v[2].im] }
    }

    pub fn scalar(&self) -> C64 {
        match self {
            ExpectationValue::Scalar { re, im } => c(*re, *im),
            ExpectationValue::Vector { .. } => panic!("vector expectation"),
        }
    }

    pub fn vector(&self) -> [C64; 3] {
        match self {
            ExpectationValue::Vector { re, im } => {
                [c(re[0], im[0]), c(re[1], im[1]), c(re[2], im[2])]
            }
            ExpectationValue::Scalar { .. } => panic!("scalar expectation"),
        }
    }
}

/// Quadrature of `Psi^+ O Psi` for a four-component snapshot. Momentum-type
/// observables use the analytic polynomial action; the vector potential is
/// evaluated pointwise on the grid.
pub fn expectation_dirac(
    snap: &DiracSnapshot,
    obs: Observable,
    grid: &QuadratureGrid,
    spec: &HamiltonianSpec,
) -> Result<ExpectationValue, EngineError> {
    if grid.scheme == QuadratureScheme::GaussHermite && grid.nodes_per_axis < 20 {
        return Err(EngineError::Config(format!(
            "expectation grid under-resolved: {} nodes/axis < 20",
            grid.nodes_per_axis
        )));
    }
    let alg = crate::spin::dirac_algebra();
    match obs {
        Observable::Norm => {
            let mut acc = c(0.0, 0.0);
            for (xk, w) in grid.points.iter().zip(&grid.weights) {
                let v = snap.value(xk);
                acc += c(*w, 0.0) * (v.adjoint() * v)[0];
            }
            Ok(ExpectationValue::from_c(acc))
        }
        Observable::Position => {
            let mut acc = [c(0.0, 0.0); 3];
            for (xk, w) in grid.points.iter().zip(&grid.weights) {
                let v = snap.value(xk);
                let dens = (v.adjoint() * v)[0];
                for i in 0..3 {
                    acc[i] += c(w * xk[i], 0.0) * dens;
                }
            }
            Ok(ExpectationValue::from_cvec(acc))
        }
        Observable::Momentum => {
            let mpolys: [[PolyXi; 4]; 3] = std::array::from_fn(|k| snap.momentum_polys(k));
            let mut acc = [c(0.0, 0.0); 3];
            for (xk, w) in grid.points.iter().zip(&grid.weights) {
                let g = snap.core.gaussian(xk);
                let xi = snap.core.xi(xk);
                let v = snap.value(xk);
                for i in 0..3 {
                    let pv = CVec4::new(
                        g * mpolys[i][0].eval(&xi),
                        g * mpolys[i][1].eval(&xi),
                        g * mpolys[i][2].eval(&xi),
                        g * mpolys[i][3].eval(&xi),
                    );
                    acc[i] += c(*w, 0.0) * (v.adjoint() * pv)[0];
                }
            }
            Ok(ExpectationValue::from_cvec(acc))
        }
        Observable::PauliSpin => {
            let mut acc = [c(0.0, 0.0); 3];
            for (xk, w) in grid.points.iter().zip(&grid.weights) {
                let v = snap.value(xk);
                for i in 0..3 {
                    acc[i] += c(*w, 0.0) * (v.adjoint() * alg.sigma4[i] * v)[0];
                }
            }
            Ok(ExpectationValue::from_cvec(acc))
        }
        Observable::BargmannS0 | Observable::BargmannSvec => {
            let cst = &spec.constants;
            let mpolys: [[PolyXi; 4]; 3] = std::array::from_fn(|k| snap.momentum_polys(k));
            let mut acc0 = c(0.0, 0.0);
            let mut acc = [c(0.0, 0.0); 3];
            for (xk, w) in grid.points.iter().zip(&grid.weights) {
                let g = snap.core.gaussian(xk);
                let xi = snap.core.xi(xk);
                let v = snap.value(xk);
                let (_, a_pot) = spec.field.potentials(xk, snap.core.t, cst.c);
                // kinetic momentum applied per axis
                let pk: [CVec4; 3] = std::array::from_fn(|i| {
                    let mut pv = CVec4::new(
                        g * mpolys[i][0].eval(&xi),
                        g * mpolys[i][1].eval(&xi),
                        g * mpolys[i][2].eval(&xi),
                        g * mpolys[i][3].eval(&xi),
                    );
                    pv -= v * c(cst.e / cst.c * a_pot[i], 0.0);
                    pv
                });
                match obs {
                    Observable::BargmannS0 => {
                        // S0_hat = (1/m0 c) <Sigma, P_hat>
                        let mut sv = CVec4::zeros();
                        for i in 0..3 {
                            sv += alg.sigma4[i] * pk[i];
                        }
                        acc0 += c(w / (cst.m0 * cst.c), 0.0) * (v.adjoint() * sv)[0];
                    }
                    _ => {
                        // S_hat = rho3 Sigma + (1/m0 c) rho1 P_hat
                        for i in 0..3 {
                            let sv = alg.rho3 * alg.sigma4[i] * v
                                + alg.rho1 * pk[i] * c(1.0 / (cst.m0 * cst.c), 0.0);
                            acc[i] += c(*w, 0.0) * (v.adjoint() * sv)[0];
                        }
                    }
                }
            }
            if obs == Observable::BargmannS0 {
                Ok(ExpectationValue::from_c(acc0))
            } else {
                Ok(ExpectationValue::from_cvec(acc))
            }
        }
    }
}

/// Scalar-state expectation (position / momentum / norm).
pub fn expectation_scalar(
    snap: &ScalarSnapshot,
    obs: Observable,
    grid: &QuadratureGrid,
) -> Result<ExpectationValue, EngineError> {
    if grid.scheme == QuadratureScheme::GaussHermite && grid.nodes_per_axis < 20 {
        return Err(EngineError::Config(format!(
            "expectation grid under-resolved: {} nodes/axis < 20",
            grid.nodes_per_axis
        )));
    }
    match obs {
        Observable::Norm => {
            let mut acc = c(0.0, 0.0);
            for (xk, w) in grid.points.iter().zip(&grid.weights) {
                let v = snap.value(xk);
                acc += c(*w, 0.0) * v.conj() * v;
            }
            Ok(ExpectationValue::from_c(acc))
        }
        Observable::Position => {
            let mut acc = [c(0.0, 0.0); 3];
            for (xk, w) in grid.points.iter().zip(&grid.weights) {
                let v = snap.value(xk);
                let d = v.conj() * v;
                for i in 0..3 {
                    acc[i] += c(w * xk[i], 0.0) * d;
                }
            }
            Ok(ExpectationValue::from_cvec(acc))
        }
        Observable::Momentum => {
            let mpoly: [PolyXi; 3] = std::array::from_fn(|axis| {
                let mut out = snap.poly.scaled(c(snap.core.p_center[axis], 0.0));
                out.add_assign_scaled(&snap.core.dp_poly(&snap.poly, axis), c(1.0, 0.0));
                out
            });
            let mut acc = [c(0.0, 0.0); 3];
            for (xk, w) in grid.points.iter().zip(&grid.weights) {
                let g = snap.core.gaussian(xk);
                let xi = snap.core.xi(xk);
                let v = g * snap.poly.eval(&xi);
                for i in 0..3 {
                    acc[i] += c(*w, 0.0) * v.conj() * (g * mpoly[i].eval(&xi));
                }
            }
            Ok(ExpectationValue::from_cvec(acc))
        }
        other => Err(EngineError::Config(format!(
            "observable {other:?} is not defined for scalar states"
        ))),
    }
}

/// Full rank-3 derivative tensor of lambda by central differences of the
/// analytic Hessian; `tensor[c][(a,b)] = d^3 lambda / dz_c dz_a dz_b`.
fn third_tensor(
    spec: &HamiltonianSpec,
    z: &crate::classical::PhasePoint,
    t: f64,
) -> Result<[Mat6; 6], EngineError> {
    let scale = z.as_vec6().norm().max(1.0);
    let h = 1e-4 * scale;
    let mut out = [Mat6::zeros(); 6];
    for cidx in 0..6 {
        let mut yp = z.as_vec6();
        yp[cidx] += h;
        let mut ym = z.as_vec6();
        ym[cidx] -= h;
        let hp = spec.lambda_hessian6(&crate::classical::PhasePoint::from_slice(yp.as_slice()), t)?;
        let hm = spec.lambda_hessian6(&crate::classical::PhasePoint::from_slice(ym.as_slice()), t)?;
        out[cidx] = (hp - hm) / (2.0 * h);
    }
    Ok(out)
}

/// L2 residual of `(-i hbar d_t + lambda_hat) |nu, t>` where `lambda_hat` is
/// the third-order Taylor quantization of lambda about the trajectory point
/// (x-factors ordered left of momentum factors in the cubic term) and the
/// time derivative is a centered difference of the full state evaluator.
pub fn scalar_equation_residual(
    tcs: &ScalarTcs,
    nu: &[u32; 3],
    t: f64,
    dt: f64,
    grid: &QuadratureGrid,
) -> Result<f64, EngineError> {
    let snap = tcs.snapshot(nu, t)?;
    let snap_p = tcs.snapshot(nu, t + dt)?;
    let snap_m = tcs.snapshot(nu, t - dt)?;
    let spec = tcs.spec;
    let z = tcs.traj.phase_point(t)?;
    let d = spec.lambda_derivs(&z, t)?;
    let t3 = third_tensor(spec, &z, t)?;
    let sqrt_h = c(tcs.hbar.sqrt(), 0.0);
    let core = &snap.core;
    let p0 = &snap.poly;

    // lambda_hat P, assembled term by term
    let mut lp = p0.scaled(c(d.value, 0.0));
    // <lambda_x, dx> = sqrt(hbar) <lambda_x, xi>
    for a in 0..3 {
        lp.add_assign_scaled(&p0.mul_xi(a), sqrt_h * c(d.grad_x[a], 0.0));
    }
    // <lambda_p, dp_hat>
    let dp: [PolyXi; 3] = std::array::from_fn(|b| core.dp_poly(p0, b));
    for b in 0..3 {
        lp.add_assign_scaled(&dp[b], c(d.grad_p[b], 0.0));
    }
    // (1/2)[ <dx, xx dx> + <dx, xp dp> + <dp, px dx> + <dp, pp dp> ]
    for a in 0..3 {
        for b in 0..3 {
            let half = c(0.5, 0.0);
            // xx: hbar xi_a xi_b
            lp.add_assign_scaled(
                &p0.mul_xi(a).mul_xi(b),
                half * c(tcs.hbar * d.var.xx[(a, b)], 0.0),
            );
            // xp: xi_a (dp_b P)
            lp.add_assign_scaled(&dp[b].mul_xi(a), half * sqrt_h * c(d.var.xp[(a, b)], 0.0));
            // px: dp_a (xi_b P)
            lp.add_assign_scaled(
                &core.dp_poly(&p0.mul_xi(b), a),
                half * sqrt_h * c(d.var.px[(a, b)], 0.0),
            );
            // pp: dp_a dp_b P
            lp.add_assign_scaled(&core.dp_poly(&dp[b], a), half * c(d.var.pp[(a, b)], 0.0));
        }
    }
    // (1/6) sum_abc T_abc with canonical ordering: momentum factors first
    // (innermost), then x multiplications
    for a in 0..6 {
        for b in 0..6 {
            for cc in 0..6 {
                let coeff = t3[cc][(a, b)] / 6.0;
                if coeff == 0.0 {
                    continue;
                }
                let mut term = p0.clone();
                let mut xs: Vec<usize> = Vec::with_capacity(3);
                for idx in [a, b, cc] {
                    if idx < 3 {
                        term = core.dp_poly(&term, idx);
                    } else {
                        xs.push(idx - 3);
                    }
                }
                for ax in xs {
                    term = term.mul_xi(ax).scaled(sqrt_h);
                }
                lp.add_assign_scaled(&term, c(coeff, 0.0));
            }
        }
    }

    // residual on the grid
    let ih = c(0.0, -tcs.hbar) / c(2.0 * dt, 0.0);
    let mut acc = 0.0;
    for (xk, w) in grid.points.iter().zip(&grid.weights) {
        let dtpsi = ih * (snap_p.value(xk) - snap_m.value(xk));
        let lam = core.gaussian(xk) * lp.eval(&core.xi(xk));
        acc += w * (dtpsi + lam).norm_sqr();
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{integrate_trajectory, Mode, PhasePoint};
    use crate::emfield::{FieldModel, Gauge};
    use crate::germ::{integrate_germ, GermInit};
    use crate::ode::OdeOptions;
    use crate::spin::integrate_spinor;
    use crate::Constants;

    struct Fixture {
        spec: HamiltonianSpec,
        traj: PhaseTrajectory,
        germ: crate::germ::GermSeries,
    }

    fn fixture(field: FieldModel, p0: Vec3, x0: Vec3, t_end: f64) -> Fixture {
        let spec = HamiltonianSpec::new(Mode::RelativisticPlus, Constants::default(), field).unwrap();
        let traj = integrate_trajectory(
            &spec,
            &PhasePoint::new(p0, x0),
            (0.0, t_end),
            &OdeOptions::tol(1e-12, 1e-13),
        )
        .unwrap();
        let germ =
            integrate_germ(&traj, &spec, &GermInit::default(), &OdeOptions::tol(1e-12, 1e-13))
                .unwrap();
        Fixture { spec, traj, germ }
    }

    #[test]
    fn ground_state_normalized() {
        let f = fixture(FieldModel::Zero, Vec3::new(0.2, 0.0, 0.0), Vec3::zeros(), 2.0);
        let tcs = ScalarTcs::new(&f.spec, &f.traj, &f.germ, 1e-2).unwrap();
        for &t in &[0.0, 1.0, 2.0] {
            let grid = tcs.grid(t, 24).unwrap();
            let snap = tcs.snapshot(&[0, 0, 0], t).unwrap();
            let n = expectation_scalar(&snap, Observable::Norm, &grid).unwrap().scalar();
            assert!((n.re - 1.0).abs() < 1e-8, "norm at t={t}: {}", n.re);
            assert!(n.im.abs() < 1e-12);
        }
    }

    #[test]
    fn hermite_polynomials_at_t0() {
        let f = fixture(FieldModel::Zero, Vec3::zeros(), Vec3::zeros(), 1.0);
        let tcs = ScalarTcs::new(&f.spec, &f.traj, &f.germ, 1e-2).unwrap();
        // P_(1,0,0) proportional to xi_1
        let p = tcs.polynomial(&[1, 0, 0], 0.0).unwrap();
        let xi = Vec3::new(0.7, -0.3, 0.4);
        let v = p.eval(&xi);
        let v2 = p.eval(&(2.0 * xi));
        assert!((v2 - 2.0 * v).norm() < 1e-14, "not linear in xi_1");
        assert!(p.eval(&Vec3::new(0.0, 5.0, -3.0)).norm() < 1e-14);
        // P_(2,0,0) proportional to 2 xi^2 - 1 (Hermite H2 shape)
        let p2 = tcs.polynomial(&[2, 0, 0], 0.0).unwrap();
        let at = |x: f64| p2.eval(&Vec3::new(x, 0.0, 0.0));
        let h2 = |x: f64| 2.0 * x * x - 1.0;
        let ratio = at(1.3) / C64::new(h2(1.3), 0.0);
        let ratio2 = at(0.4) / C64::new(h2(0.4), 0.0);
        assert!((ratio - ratio2).norm() < 1e-12);
    }

    #[test]
    fn exact_oscillator_coherent_state() {
        // isotropic unit oscillator (e = +1, k = m = 1): the packet family is
        // an exact solution, pointwise:
        //   psi_0(x,t) = (pi hbar)^(-3/4) e^{-3it/2}
        //                exp[(i/hbar)(S0 + <p(t), dx> + (i/2)|dx|^2)]
        //   psi_(100)  = psi_0 * i sqrt(2) e^{-it} xi_1
        // with the classical center rotating and
        //   S0 = sum_ax [ (p0^2 - x0^2) sin(2t)/4 + x0 p0 (cos(2t) - 1)/2 ].
        let mut cst = Constants::default();
        cst.e = 1.0;
        let hbar = 1e-2;
        let spec = HamiltonianSpec::new(
            crate::classical::Mode::Nonrelativistic,
            cst,
            FieldModel::HarmonicScalar { k: 1.0 },
        )
        .unwrap();
        let p0 = Vec3::new(0.1, 0.3, -0.2);
        let x0 = Vec3::new(0.4, -0.2, 0.1);
        let traj = integrate_trajectory(
            &spec,
            &PhasePoint::new(p0, x0),
            (0.0, 3.0),
            &OdeOptions::tol(1e-13, 1e-15),
        )
        .unwrap();
        let germ =
            integrate_germ(&traj, &spec, &GermInit::default(), &OdeOptions::tol(1e-13, 1e-15))
                .unwrap();
        let tcs = ScalarTcs::new(&spec, &traj, &germ, hbar).unwrap();
        let t: f64 = 2.7;
        let xc = x0 * t.cos() + p0 * t.sin();
        let pc = p0 * t.cos() - x0 * t.sin();
        let mut s0 = 0.0;
        for ax in 0..3 {
            s0 += 0.25 * (p0[ax] * p0[ax] - x0[ax] * x0[ax]) * (2.0 * t).sin()
                + 0.5 * x0[ax] * p0[ax] * ((2.0 * t).cos() - 1.0);
        }
        let amp = (std::f64::consts::PI * hbar).powf(-0.75);
        let exact = |x: &Vec3, nu1: bool| -> C64 {
            let dx = x - xc;
            let s = C64::new(s0 + pc.dot(&dx), 0.5 * dx.norm_squared());
            let mut v = C64::new(amp, 0.0)
                * (C64::new(0.0, -1.5 * t)).exp()
                * (C64::i() * s / C64::new(hbar, 0.0)).exp();
            if nu1 {
                v *= C64::i()
                    * C64::new(2.0f64.sqrt() * dx.x / hbar.sqrt(), 0.0)
                    * (C64::new(0.0, -t)).exp();
            }
            v
        };
        for k in 0..20 {
            let x = xc + Vec3::new(
                0.2 * ((k as f64) * 0.7).sin(),
                0.15 * ((k as f64) * 1.3).cos(),
                0.1 * ((k as f64) * 0.4).sin(),
            ) * hbar.sqrt();
            let got0 = tcs.eval(&[0, 0, 0], &x, t).unwrap();
            let want0 = exact(&x, false);
            assert!(
                (got0 - want0).norm() <= 1e-9 * amp,
                "ground state mismatch at {x:?}: {:e}",
                (got0 - want0).norm() / amp
            );
            let got1 = tcs.eval(&[1, 0, 0], &x, t).unwrap();
            let want1 = exact(&x, true);
            assert!(
                (got1 - want1).norm() <= 1e-9 * amp,
                "excited state mismatch: {:e}",
                (got1 - want1).norm() / amp
            );
        }
        // quadratic Hamiltonian: the equation residual collapses to the
        // time-differencing error instead of the generic hbar^{3/2} scale
        let grid = tcs.grid(t, 24).unwrap();
        let r = scalar_equation_residual(&tcs, &[0, 0, 0], t, 5e-6, &grid).unwrap();
        assert!(r < 1e-6, "exact-case residual should be FD-limited, got {r:e}");
    }

    #[test]
    fn orthonormality_excited_states() {
        let f = fixture(
            FieldModel::UniformMagnetic { h0: Vec3::new(0.0, 0.0, 1.0), gauge: Gauge::Symmetric },
            Vec3::new(0.3, 0.0, 0.1),
            Vec3::new(0.0, 0.3, 0.0),
            2.0,
        );
        let tcs = ScalarTcs::new(&f.spec, &f.traj, &f.germ, 1e-2).unwrap();
        let nus = multi_indices(2);
        assert_eq!(nus.len(), 10);
        for &t in &[0.0, 1.0, 2.0] {
            let grid = tcs.grid(t, 24).unwrap();
            let g = gram_matrix(&tcs, &nus, t, &grid).unwrap();
            for a in 0..nus.len() {
                for b in 0..nus.len() {
                    let expect = if a == b { 1.0 } else { 0.0 };
                    let err = (g[(a, b)] - c(expect, 0.0)).norm();
                    assert!(err < 1e-6, "gram[{a}][{b}] at t={t}: err {err:e}");
                }
            }
        }
    }

    #[test]
    fn action_examples() {
        let f = fixture(FieldModel::Zero, Vec3::zeros(), Vec3::zeros(), 1.0);
        let tcs = ScalarTcs::new(&f.spec, &f.traj, &f.germ, 1e-2).unwrap();
        let core = tcs.core(0.0).unwrap();
        // at the center S = S0 = 0 at t=0
        assert!(core.action(&Vec3::zeros()).norm() < 1e-14);
        // Q = iI at t=0: S = i |d|^2 / 2
        let dvec = Vec3::new(0.2, -0.1, 0.3);
        let s = core.action(&dvec);
        assert!((s - C64::new(0.0, 0.5 * dvec.norm_squared())).norm() < 1e-13);
        // Im S >= 0 everywhere
        for k in 0..100 {
            let x = Vec3::new((k as f64 * 0.37).sin(), (k as f64 * 0.73).cos(), 0.3);
            assert!(core.action(&x).im >= 0.0);
        }
    }

    #[test]
    fn measure_density_normalizes_and_scales() {
        let f = fixture(FieldModel::Zero, Vec3::new(0.3, 0.0, 0.0), Vec3::zeros(), 2.0);
        for hbar in [1e-2, 5e-3] {
            let tcs = ScalarTcs::new(&f.spec, &f.traj, &f.germ, hbar).unwrap();
            let t = 1.2;
            let grid = tcs.grid(t, 24).unwrap();
            let mut total = 0.0;
            let mut second = 0.0;
            let center = tcs.core(t).unwrap().center;
            for (x, w) in grid.points.iter().zip(&grid.weights) {
                let rho = tcs.measure_density(x, t).unwrap();
                assert!(rho >= 0.0);
                total += w * rho;
                second += w * rho * (x - center).norm_squared();
            }
            assert!((total - 1.0).abs() < 1e-8, "hbar={hbar}: total={total}");
            // sigma^2 scales linearly in hbar
            if hbar == 1e-2 {
                let tcs2 = ScalarTcs::new(&f.spec, &f.traj, &f.germ, hbar / 2.0).unwrap();
                let grid2 = tcs2.grid(t, 24).unwrap();
                let mut second2 = 0.0;
                for (x, w) in grid2.points.iter().zip(&grid2.weights) {
                    second2 += w * tcs2.measure_density(x, t).unwrap() * (x - center).norm_squared();
                }
                let ratio = (second / second2).sqrt();
                assert!(
                    (ratio - 2.0f64.sqrt()).abs() < 0.02 * 2.0f64.sqrt(),
                    "sigma ratio {ratio}"
                );
            }
        }
    }

    #[test]
    fn covariance_matches_sigma_xx() {
        // quadrature covariance of rho equals the (5.15) sigma_xx with nu=0
        let f = fixture(
            FieldModel::HarmonicScalar { k: 0.3 },
            Vec3::new(0.1, 0.0, 0.0),
            Vec3::new(0.3, 0.0, 0.0),
            2.0,
        );
        let hbar = 1e-2;
        let tcs = ScalarTcs::new(&f.spec, &f.traj, &f.germ, hbar).unwrap();
        let t = 1.1;
        let grid = tcs.grid(t, 28).unwrap();
        let center = tcs.core(t).unwrap().center;
        let mut cov = crate::Mat3::zeros();
        for (x, w) in grid.points.iter().zip(&grid.weights) {
            let rho = tcs.measure_density(x, t).unwrap();
            let dx = x - center;
            cov += (w * rho) * dx * dx.transpose();
        }
        let gs = f.germ.state(t).unwrap();
        let (sxx, _, _) = crate::moments::sigma_from_germ(&gs, &[0, 0, 0], hbar);
        assert!(
            (cov - sxx).norm() <= 1e-6 * sxx.norm(),
            "covariance mismatch {:e}",
            (cov - sxx).norm() / sxx.norm()
        );
    }

    #[test]
    fn dirac_order0_rest_frame_structure() {
        let f = fixture(FieldModel::Zero, Vec3::zeros(), Vec3::zeros(), 1.0);
        let tcs = ScalarTcs::new(&f.spec, &f.traj, &f.germ, 1e-2).unwrap();
        let spins = integrate_spinor(&f.traj, &f.spec, 2.0, &Vec3::z(), 1, &OdeOptions::default())
            .unwrap();
        let dt = DiracTcs { scalar: &tcs, spins: &spins, nu: [0, 0, 0], order: 0 };
        let snap = dt.snapshot(0.5).unwrap();
        let x = Vec3::new(0.05, -0.02, 0.01);
        let v = snap.value(&x);
        // beta = 0: lower components vanish, upper = u * scalar
        assert!(v[2].norm() + v[3].norm() < 1e-14);
        let scalar = tcs.eval(&[0, 0, 0], &x, 0.5).unwrap();
        let u = spins.u(0.5).unwrap();
        assert!((v[0] - u[0] * scalar).norm() < 1e-12);
        assert!((v[1] - u[1] * scalar).norm() < 1e-12);
    }

    #[test]
    fn dirac_order0_norm_and_center() {
        let f = fixture(
            FieldModel::UniformMagnetic { h0: Vec3::new(0.0, 0.0, 1.0), gauge: Gauge::Symmetric },
            Vec3::new(0.3, 0.0, 0.05),
            Vec3::new(0.0, 0.4, 0.0),
            2.0,
        );
        let tcs = ScalarTcs::new(&f.spec, &f.traj, &f.germ, 1e-2).unwrap();
        let spins = integrate_spinor(&f.traj, &f.spec, 2.0, &Vec3::z(), 1, &OdeOptions::default())
            .unwrap();
        let dt = DiracTcs { scalar: &tcs, spins: &spins, nu: [0, 0, 0], order: 0 };
        let t = 1.4;
        let snap = dt.snapshot(t).unwrap();
        let grid = tcs.grid(t, 24).unwrap();
        let n = expectation_dirac(&snap, Observable::Norm, &grid, &f.spec).unwrap().scalar();
        assert!((n.re - 1.0).abs() < 1e-6, "norm {}", n.re);
        let xv = expectation_dirac(&snap, Observable::Position, &grid, &f.spec).unwrap().vector();
        let zc = f.traj.phase_point(t).unwrap();
        for i in 0..3 {
            assert!((xv[i].re - zc.x[i]).abs() < 1e-8, "<x_{i}>");
            assert!(xv[i].im.abs() < 1e-10);
        }
        let pv = expectation_dirac(&snap, Observable::Momentum, &grid, &f.spec).unwrap().vector();
        for i in 0..3 {
            assert!((pv[i].re - zc.p[i]).abs() < 1e-8, "<p_{i}>: {} vs {}", pv[i].re, zc.p[i]);
        }
    }

    #[test]
    fn bargmann_svec_reduces_to_eta_at_rest() {
        let f = fixture(FieldModel::Zero, Vec3::zeros(), Vec3::zeros(), 1.0);
        let tcs = ScalarTcs::new(&f.spec, &f.traj, &f.germ, 1e-2).unwrap();
        let ell = Vec3::new(1.0, 1.0, 0.5).normalize();
        let spins = integrate_spinor(&f.traj, &f.spec, 2.0, &ell, 1, &OdeOptions::default()).unwrap();
        let dt = DiracTcs { scalar: &tcs, spins: &spins, nu: [0, 0, 0], order: 0 };
        let t = 0.0;
        let snap = dt.snapshot(t).unwrap();
        let grid = tcs.grid(t, 24).unwrap();
        let sv = expectation_dirac(&snap, Observable::BargmannSvec, &grid, &f.spec).unwrap().vector();
        let eta = spins.eta(t).unwrap();
        for i in 0..3 {
            assert!((sv[i].re - eta[i]).abs() < 1e-6, "S_{i}: {} vs {}", sv[i].re, eta[i]);
        }
        // at rest the lower components vanish, so <Sigma> reduces to eta too
        let ps = expectation_dirac(&snap, Observable::PauliSpin, &grid, &f.spec).unwrap().vector();
        for i in 0..3 {
            assert!((ps[i].re - eta[i]).abs() < 1e-6);
        }
        let s0 = expectation_dirac(&snap, Observable::BargmannS0, &grid, &f.spec).unwrap().scalar();
        assert!(s0.norm() < 1e-6, "S0 at rest should vanish, got {s0}");
    }

    #[test]
    fn order1_norm_deviation_scales_linearly() {
        let f = fixture(
            FieldModel::UniformMagnetic { h0: Vec3::new(0.0, 0.0, 1.0), gauge: Gauge::Symmetric },
            Vec3::new(0.4, 0.0, 0.0),
            Vec3::new(0.0, 0.5, 0.0),
            1.0,
        );
        let t = 0.8;
        let mut devs = Vec::new();
        for hbar in [1e-2, 5e-3] {
            let tcs = ScalarTcs::new(&f.spec, &f.traj, &f.germ, hbar).unwrap();
            let spins =
                integrate_spinor(&f.traj, &f.spec, 2.0, &Vec3::z(), 1, &OdeOptions::default())
                    .unwrap();
            let dt = DiracTcs { scalar: &tcs, spins: &spins, nu: [0, 0, 0], order: 1 };
            let snap = dt.snapshot(t).unwrap();
            let grid = tcs.grid(t, 24).unwrap();
            let n = expectation_dirac(&snap, Observable::Norm, &grid, &f.spec).unwrap().scalar();
            devs.push((n.re - 1.0).abs());
        }
        let ratio = devs[0] / devs[1];
        assert!((1.5..=2.5).contains(&ratio), "norm deviation ratio {ratio}, devs {devs:?}");
    }

    #[test]
    fn equation_residual_scaling() {
        let f = fixture(
            FieldModel::UniformMagnetic { h0: Vec3::new(0.0, 0.0, 1.0), gauge: Gauge::Symmetric },
            Vec3::new(0.4, 0.0, 0.0),
            Vec3::new(0.0, 0.5, 0.0),
            1.0,
        );
        let t = 0.5;
        let mut res = Vec::new();
        for hbar in [1e-2, 5e-3, 2.5e-3] {
            let tcs = ScalarTcs::new(&f.spec, &f.traj, &f.germ, hbar).unwrap();
            let grid = tcs.grid(t, 24).unwrap();
            let r = scalar_equation_residual(&tcs, &[0, 0, 0], t, 5e-6, &grid).unwrap();
            res.push(r);
        }
        for w in res.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(
                (1.3..=1.7).contains(&order),
                "scaling exponent {order}, residuals {res:?}"
            );
        }
    }
}
