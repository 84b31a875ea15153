//! Complex trivariate polynomials in the scaled offset `xi = dx / sqrt(hbar)`.
//!
//! The excited-state factors and every momentum-operator application stay in
//! this family, so a sparse exponent map with a handful of operations covers
//! all of the wavepacket algebra.

use crate::{C64, CVec3, Vec3};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct PolyXi {
    terms: BTreeMap<[u8; 3], C64>,
}

const DROP_EPS: f64 = 0.0; // keep exact zeros out, everything else stays

impl PolyXi {
    pub fn zero() -> Self {
        PolyXi { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        PolyXi::constant(C64::new(1.0, 0.0))
    }

    pub fn constant(c: C64) -> Self {
        let mut p = PolyXi::zero();
        p.add_term([0, 0, 0], c);
        p
    }

    pub fn add_term(&mut self, exps: [u8; 3], c: C64) {
        if c.norm() <= DROP_EPS {
            return;
        }
        let e = self.terms.entry(exps).or_insert(C64::new(0.0, 0.0));
        *e += c;
        if e.norm() == 0.0 {
            self.terms.remove(&exps);
        }
    }

    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e[0] as usize + e[1] as usize + e[2] as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = PolyXi::zero();
        for (e, v) in &self.terms {
            out.add_term(*e, *v * c);
        }
        out
    }

    pub fn add_assign_scaled(&mut self, other: &PolyXi, c: C64) {
        for (e, v) in &other.terms {
            self.add_term(*e, *v * c);
        }
    }

    /// Multiply by the monomial `xi_axis`.
    pub fn mul_xi(&self, axis: usize) -> Self {
        let mut out = PolyXi::zero();
        for (e, v) in &self.terms {
            let mut e2 = *e;
            e2[axis] += 1;
            out.add_term(e2, *v);
        }
        out
    }

    /// Multiply by a complex linear form `<coeff, xi>`.
    pub fn mul_linear(&self, coeff: &CVec3) -> Self {
        let mut out = PolyXi::zero();
        for axis in 0..3 {
            if coeff[axis].norm() > 0.0 {
                out.add_assign_scaled(&self.mul_xi(axis), coeff[axis]);
            }
        }
        out
    }

    /// d/d xi_axis.
    pub fn diff(&self, axis: usize) -> Self {
        let mut out = PolyXi::zero();
        for (e, v) in &self.terms {
            if e[axis] > 0 {
                let mut e2 = *e;
                e2[axis] -= 1;
                out.add_term(e2, *v * C64::new(e[axis] as f64, 0.0));
            }
        }
        out
    }

    pub fn eval(&self, xi: &Vec3) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (e, v) in &self.terms {
            let m = xi.x.powi(e[0] as i32) * xi.y.powi(e[1] as i32) * xi.z.powi(e[2] as i32);
            acc += *v * C64::new(m, 0.0);
        }
        acc
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8; 3], &C64)> {
        self.terms.iter()
    }
}
