//! Zeroth-order Green kernel as a truncated spectral sum over the
//! trajectory-coherent basis:
//! `G(x, y, t, s) = sum_{|nu| <= nu_max} psi_nu(x, t) conj(psi_nu(y, s))
//!  (x) sum_zeta (Pi+(t) u(t, zeta)) (Pi+(s) u(s, zeta))^+`.
//!
//! Applying the kernel to a state reduces to one overlap integral per basis
//! element, so propagation through the kernel costs
//! `O(#nu x grid)` scalar state evaluations.

use super::{multi_indices, sheet_projectors, ScalarSnapshot, ScalarTcs};
use crate::spin::{KinematicPoint, SpinSeries};
use crate::wavepacket::QuadratureGrid;
use crate::{C64, CMat4, CVec4, EngineError, Vec3};

/// Green-kernel machinery over one (trajectory, germ) pair; `spins` holds the
/// two transported basis spinors `u(t, +1)` and `u(t, -1)`.
pub struct GreenKernel<'a> {
    pub scalar: &'a ScalarTcs<'a>,
    pub spins: [&'a SpinSeries; 2],
    pub nu_max: usize,
}

/// `sum_zeta (Pi+(t) u(t,zeta)) (Pi+(s) u(s,zeta))^+` (rank-2 4x4 factor).
fn spin_factor(kernel: &GreenKernel, t: f64, s: f64) -> Result<CMat4, EngineError> {
    let spec = kernel.scalar.spec;
    let kt = KinematicPoint::on_trajectory(spec, kernel.scalar.traj, t)?;
    let ks = KinematicPoint::on_trajectory(spec, kernel.scalar.traj, s)?;
    let (pi_t, _) = sheet_projectors(spec, &kt);
    let (pi_s, _) = sheet_projectors(spec, &ks);
    let mut m = CMat4::zeros();
    for series in kernel.spins {
        let ut = pi_t * series.u(t)?;
        let us = pi_s * series.u(s)?;
        m += ut * us.adjoint();
    }
    Ok(m)
}

impl<'a> GreenKernel<'a> {
    fn check_span(&self, t: f64, s: f64) -> Result<(), EngineError> {
        if s > t {
            return Err(EngineError::Domain(format!(
                "green kernel requires s <= t, got s = {s}, t = {t}"
            )));
        }
        Ok(())
    }

    /// Pointwise 4x4 kernel matrix.
    pub fn matrix(&self, x: &Vec3, y: &Vec3, t: f64, s: f64) -> Result<CMat4, EngineError> {
        self.check_span(t, s)?;
        let mut scalar_sum = C64::new(0.0, 0.0);
        for nu in multi_indices(self.nu_max) {
            let at = self.scalar.eval(&nu, x, t)?;
            let as_ = self.scalar.eval(&nu, y, s)?;
            scalar_sum += at * as_.conj();
        }
        Ok(spin_factor(self, t, s)? * scalar_sum)
    }

    /// Expand a four-component state at time s in the kernel basis:
    /// coefficients `c_(nu, zeta) = <Pi+(s) u(s,zeta) psi_nu(s) | Psi>`.
    pub fn expand<F>(&self, s: f64, psi: &F, grid: &QuadratureGrid) -> Result<GreenExpansion, EngineError>
    where
        F: Fn(&Vec3) -> CVec4,
    {
        let spec = self.scalar.spec;
        let ks = KinematicPoint::on_trajectory(spec, self.scalar.traj, s)?;
        let (pi_s, _) = sheet_projectors(spec, &ks);
        let u_basis: Vec<CVec4> =
            self.spins.iter().map(|sp| sp.u(s).map(|u| pi_s * u)).collect::<Result<_, _>>()?;
        // spinor inner products per grid point, then scalar overlaps per nu
        let nus = multi_indices(self.nu_max);
        let snaps: Vec<ScalarSnapshot> =
            nus.iter().map(|nu| self.scalar.snapshot(nu, s)).collect::<Result<_, _>>()?;
        let mut coeffs = Vec::with_capacity(nus.len() * 2);
        let mut spin_proj: Vec<[C64; 2]> = Vec::with_capacity(grid.len());
        for x in &grid.points {
            let v = psi(x);
            spin_proj.push([
                (u_basis[0].adjoint() * v)[0],
                (u_basis[1].adjoint() * v)[0],
            ]);
        }
        for (inu, snap) in snaps.iter().enumerate() {
            let mut acc = [C64::new(0.0, 0.0); 2];
            for ((x, w), sp) in grid.points.iter().zip(&grid.weights).zip(&spin_proj) {
                let conj_state = snap.value(x).conj();
                acc[0] += C64::new(*w, 0.0) * conj_state * sp[0];
                acc[1] += C64::new(*w, 0.0) * conj_state * sp[1];
            }
            coeffs.push(GreenCoefficient { nu: nus[inu], zeta: 1, c: acc[0] });
            coeffs.push(GreenCoefficient { nu: nus[inu], zeta: -1, c: acc[1] });
        }
        Ok(GreenExpansion { coeffs })
    }

    /// Propagate: `Psi(x, t) = int G(x, y, t, s) Psi(y, s) d^3y`, evaluated
    /// through the basis expansion at time s.
    pub fn apply<F>(
        &self,
        t: f64,
        s: f64,
        psi: &F,
        grid_s: &QuadratureGrid,
    ) -> Result<GreenPropagated, EngineError>
    where
        F: Fn(&Vec3) -> CVec4,
    {
        self.check_span(t, s)?;
        let expansion = self.expand(s, psi, grid_s)?;
        let spec = self.scalar.spec;
        let kt = KinematicPoint::on_trajectory(spec, self.scalar.traj, t)?;
        let (pi_t, _) = sheet_projectors(spec, &kt);
        let u_t: Vec<CVec4> =
            self.spins.iter().map(|sp| sp.u(t).map(|u| pi_t * u)).collect::<Result<_, _>>()?;
        let mut terms = Vec::with_capacity(expansion.coeffs.len());
        for gc in &expansion.coeffs {
            if gc.c.norm() == 0.0 {
                continue;
            }
            let spinor = if gc.zeta == 1 { u_t[0] } else { u_t[1] };
            terms.push((self.scalar.snapshot(&gc.nu, t)?, spinor * gc.c));
        }
        Ok(GreenPropagated { terms })
    }
}

#[derive(Debug, Clone)]
pub struct GreenCoefficient {
    pub nu: [u32; 3],
    pub zeta: i8,
    pub c: C64,
}

#[derive(Debug, Clone)]
pub struct GreenExpansion {
    pub coeffs: Vec<GreenCoefficient>,
}

impl GreenExpansion {
    /// Captured norm^2 up to each total degree shell, ascending; the
    /// truncation-convergence report.
    pub fn shell_norms(&self, nu_max: usize) -> Vec<f64> {
        (0..=nu_max)
            .map(|m| {
                self.coeffs
                    .iter()
                    .filter(|gc| (gc.nu[0] + gc.nu[1] + gc.nu[2]) as usize <= m)
                    .map(|gc| gc.c.norm_sqr())
                    .sum()
            })
            .collect()
    }
}

/// Kernel-propagated state: a finite combination of basis states at time t.
pub struct GreenPropagated {
    terms: Vec<(ScalarSnapshot, CVec4)>,
}

impl GreenPropagated {
    pub fn value(&self, x: &Vec3) -> CVec4 {
        let mut acc = CVec4::zeros();
        for (snap, spinor) in &self.terms {
            acc += spinor * snap.value(x);
        }
        acc
    }
}
