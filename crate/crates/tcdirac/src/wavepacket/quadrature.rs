//! Gauss-Hermite tensor quadrature in the eigenframe of Im Q, plus a uniform
//! box fallback for plotting.
//!
//! The affine map is chosen so the packet density `exp(-(1/hbar) <dx, ImQ dx>)`
//! becomes the exact Gauss-Hermite weight `exp(-|s|^2)`; integrals of
//! polynomial x Gaussian integrands of the same germ are then exact up to the
//! rule's degree.

use crate::{EngineError, Mat3, Vec3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureScheme {
    GaussHermite,
    UniformBox,
}

/// Nodes and weights of the n-point Gauss-Hermite rule (weight e^{-x^2})
/// via the Golub-Welsch eigenproblem of the Jacobi matrix.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut jac = nalgebra::DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
}

/// Quadrature grid for one packet snapshot: points and plain d^3x weights
/// (the Gauss-Hermite weights already carry the `e^{+|s|^2}` compensation, so
/// `sum_k w_k f(x_k)` approximates the free integral of f).
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub scheme: QuadratureScheme,
    pub nodes_per_axis: usize,
    pub center: Vec3,
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Build from the packet covariance data: center `x(t)` and the matrix
    /// `Im Q(t)` with the packet density `exp(-(1/hbar)<dx, ImQ dx>)`.
    pub fn gauss_hermite_packet(
        center: &Vec3,
        im_q: &Mat3,
        hbar: f64,
        nodes_per_axis: usize,
    ) -> Result<Self, EngineError> {
        if nodes_per_axis < 2 {
            return Err(EngineError::Config("need at least 2 quadrature nodes per axis".into()));
        }
        let sym = 0.5 * (im_q + im_q.transpose());
        let eig = nalgebra::SymmetricEigen::new(sym);
        if eig.eigenvalues.min() <= 0.0 {
            return Err(EngineError::Numerical(format!(
                "Im Q not positive definite in quadrature setup (min eig {:.3e})",
                eig.eigenvalues.min()
            )));
        }
        let (nodes, weights) = gauss_hermite(nodes_per_axis);
        // x = center + V diag(sqrt(hbar / d_k)) s ; d^3x jacobian
        let scale: Vec<f64> = (0..3).map(|k| (hbar / eig.eigenvalues[k]).sqrt()).collect();
        let jaco = scale.iter().product::<f64>();
        let n = nodes_per_axis;
        let mut points = Vec::with_capacity(n * n * n);
        let mut wts = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let s = Vec3::new(nodes[i], nodes[j], nodes[k]);
                    let local = Vec3::new(scale[0] * s.x, scale[1] * s.y, scale[2] * s.z);
                    points.push(center + eig.eigenvectors * local);
                    // e^{+|s|^2} undoes the Gauss-Hermite weight so `weights`
                    // are plain volume weights
                    let comp = (s.norm_squared()).exp();
                    wts.push(jaco * weights[i] * weights[j] * weights[k] * comp);
                }
            }
        }
        Ok(QuadratureGrid {
            scheme: QuadratureScheme::GaussHermite,
            nodes_per_axis,
            center: *center,
            points,
            weights: wts,
        })
    }

    /// Uniform box over +/- `half_widths` sigma along the Im Q eigenframe;
    /// trapezoid-free plain midpoint weights (plotting fallback).
    pub fn uniform_box_packet(
        center: &Vec3,
        im_q: &Mat3,
        hbar: f64,
        nodes_per_axis: usize,
        half_width_sigmas: f64,
    ) -> Result<Self, EngineError> {
        if nodes_per_axis < 2 {
            return Err(EngineError::Config("need at least 2 quadrature nodes per axis".into()));
        }
        let sym = 0.5 * (im_q + im_q.transpose());
        let eig = nalgebra::SymmetricEigen::new(sym);
        let sigma: Vec<f64> = (0..3).map(|k| (0.5 * hbar / eig.eigenvalues[k]).sqrt()).collect();
        let n = nodes_per_axis;
        let mut points = Vec::with_capacity(n * n * n);
        let mut wts = Vec::with_capacity(n * n * n);
        let cell: f64 = sigma
            .iter()
            .map(|s| 2.0 * half_width_sigmas * s / n as f64)
            .product();
        let coord = |sig: f64, idx: usize| -> f64 {
            // midpoints
            let l = 2.0 * half_width_sigmas * sig;
            -half_width_sigmas * sig + (idx as f64 + 0.5) * l / n as f64
        };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let local = Vec3::new(coord(sigma[0], i), coord(sigma[1], j), coord(sigma[2], k));
                    points.push(center + eig.eigenvectors * local);
                    wts.push(cell);
                }
            }
        }
        Ok(QuadratureGrid {
            scheme: QuadratureScheme::UniformBox,
            nodes_per_axis,
            center: *center,
            points,
            weights: wts,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_moments() {
        for n in [8, 20, 24, 32] {
            let (x, w) = gauss_hermite(n);
            let total: f64 = w.iter().sum();
            assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-12, "n={n}");
            let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
            assert!((m2 - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
            let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
            assert!((m4 - 0.75 * std::f64::consts::PI.sqrt()).abs() < 1e-11);
        }
    }

    #[test]
    fn packet_gaussian_normalizes() {
        // unit Gaussian of the packet covariance integrates to 1
        let im_q = Mat3::new(1.3, 0.2, 0.0, 0.2, 0.9, -0.1, 0.0, -0.1, 1.1);
        let hbar = 0.01;
        let center = Vec3::new(0.3, -0.2, 0.5);
        let grid = QuadratureGrid::gauss_hermite_packet(&center, &im_q, hbar, 20).unwrap();
        // density prop to exp(-(1/hbar) <dx, ImQ dx>), normalized:
        let det = im_q.determinant();
        let norm = (det / (std::f64::consts::PI * hbar).powi(3)).sqrt();
        let mut acc = 0.0;
        for (p, w) in grid.points.iter().zip(&grid.weights) {
            let dx = p - center;
            acc += w * norm * (-(dx.dot(&(im_q * dx))) / hbar).exp();
        }
        assert!((acc - 1.0).abs() < 1e-10, "integral = {acc}");
    }

    #[test]
    fn uniform_box_rough_normalization() {
        let im_q = Mat3::identity();
        let hbar = 0.01;
        let grid =
            QuadratureGrid::uniform_box_packet(&Vec3::zeros(), &im_q, hbar, 40, 6.0).unwrap();
        let norm = (1.0 / (std::f64::consts::PI * hbar).powi(3)).sqrt();
        let mut acc = 0.0;
        for (p, w) in grid.points.iter().zip(&grid.weights) {
            acc += w * norm * (-(p.norm_squared()) / hbar).exp();
        }
        assert!((acc - 1.0).abs() < 1e-3, "integral = {acc}");
    }
}
