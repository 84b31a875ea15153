//! Analytic external electromagnetic field models.
//!
//! Every model supplies gauge potentials (Phi, A) in Gaussian units together
//! with spatial derivative tensors up to order 3 and the time derivatives
//! needed for E = -grad Phi - (1/c) dA/dt. Fields and their first spatial
//! derivatives are assembled from the potential derivatives by one shared
//! builder, so the potential/field consistency invariant is a property of the
//! per-model derivative tables alone.

use crate::{EngineError, Mat3, Vec3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    Symmetric,
    Landau,
}

/// Monomial count for total degree <= 4 in three variables.
pub const POLY_MONOMIALS: usize = 35;
/// Cubic time dependence: four coefficients per monomial.
pub const POLY_TIME_COEFFS: usize = 4;
/// Flat parameter count of `custom_polynomial`: (Phi, A1, A2, A3) components.
pub const POLY_PARAMS: usize = 4 * POLY_MONOMIALS * POLY_TIME_COEFFS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FieldModel {
    Zero,
    UniformMagnetic { h0: Vec3, gauge: Gauge },
    UniformElectric { e0: Vec3 },
    Crossed { e0: Vec3, h0: Vec3, gauge: Gauge },
    HarmonicScalar { k: f64 },
    PlaneWave { amp: f64, k: Vec3, pol: Vec3, phase: f64 },
    /// Phi and the three A components as degree-<=4 polynomials in x with
    /// cubic-in-t coefficients; the flat layout is documented in the catalog.
    CustomPolynomial { coeffs: Vec<f64> },
}

/// Spatial derivative tensors of the potentials and fields at one (x, t).
///
/// Index conventions: `da[(i, j)] = dA_i/dx_j`, `d2a[i]` is the Hessian of
/// `A_i`, `d3phi[k]` is `d/dx_k` of the Phi Hessian, and
/// `d3a[i][k]` is `d/dx_k` of the `A_i` Hessian. Entries above the requested
/// order are zero.
#[derive(Debug, Clone)]
pub struct FieldDerivatives {
    pub order: usize,
    pub phi: f64,
    pub dphi: Vec3,
    pub d2phi: Mat3,
    pub d3phi: [Mat3; 3],
    pub a: Vec3,
    pub da: Mat3,
    pub d2a: [Mat3; 3],
    pub d3a: [[Mat3; 3]; 3],
    /// dA/dt and its spatial Jacobian (feed E and dE).
    pub a_t: Vec3,
    pub da_t: Mat3,
    pub e: Vec3,
    pub h: Vec3,
    pub de: Mat3,
    pub dh: Mat3,
}

impl FieldDerivatives {
    fn zeroed(order: usize) -> Self {
        FieldDerivatives {
            order,
            phi: 0.0,
            dphi: Vec3::zeros(),
            d2phi: Mat3::zeros(),
            d3phi: [Mat3::zeros(); 3],
            a: Vec3::zeros(),
            da: Mat3::zeros(),
            d2a: [Mat3::zeros(); 3],
            d3a: [[Mat3::zeros(); 3]; 3],
            a_t: Vec3::zeros(),
            da_t: Mat3::zeros(),
            e: Vec3::zeros(),
            h: Vec3::zeros(),
            de: Mat3::zeros(),
            dh: Mat3::zeros(),
        }
    }

    /// Fill e, h, de, dh from the potential-derivative entries.
    fn finish(mut self, c: f64) -> Self {
        self.e = -self.dphi - self.a_t / c;
        self.de = -self.d2phi - self.da_t / c;
        self.h = curl_from_jacobian(&self.da);
        for j in 0..3 {
            // dH_i/dx_j = eps_{ilm} d2A_m/(dx_l dx_j)
            let mut col = Vec3::zeros();
            for i in 0..3 {
                let mut s = 0.0;
                for l in 0..3 {
                    for m in 0..3 {
                        s += levi_civita(i, l, m) * self.d2a[m][(l, j)];
                    }
                }
                col[i] = s;
            }
            self.dh.set_column(j, &col);
        }
        self
    }
}

pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn curl_from_jacobian(da: &Mat3) -> Vec3 {
    Vec3::new(
        da[(2, 1)] - da[(1, 2)],
        da[(0, 2)] - da[(2, 0)],
        da[(1, 0)] - da[(0, 1)],
    )
}

/// Cross-product matrix: `cross_matrix(v) * w == v x w`.
pub fn cross_matrix(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Monomial exponents of total degree <= 4, in the canonical catalog order.
pub fn poly_monomials() -> Vec<[u32; 3]> {
    let mut out = Vec::with_capacity(POLY_MONOMIALS);
    for d in 0..=4u32 {
        for i in (0..=d).rev() {
            for j in (0..=(d - i)).rev() {
                out.push([i, j, d - i - j]);
            }
        }
    }
    debug_assert_eq!(out.len(), POLY_MONOMIALS);
    out
}

/// One polynomial component with cubic time coefficients.
struct PolyComponent<'a> {
    // coeffs[m][q] multiplies x^monomial[m] * t^q
    coeffs: &'a [f64],
}

impl<'a> PolyComponent<'a> {
    /// value and spatial derivatives to order 3; `t_order` = 0 evaluates the
    /// coefficients at t, 1 evaluates their time derivative.
    fn derivs(&self, mons: &[[u32; 3]], x: &Vec3, t: f64, t_order: usize) -> (f64, Vec3, Mat3, [Mat3; 3]) {
        let mut v = 0.0;
        let mut g = Vec3::zeros();
        let mut hs = Mat3::zeros();
        let mut th = [Mat3::zeros(); 3];
        for (m, exps) in mons.iter().enumerate() {
            let cs = &self.coeffs[m * POLY_TIME_COEFFS..(m + 1) * POLY_TIME_COEFFS];
            let ct = match t_order {
                0 => cs[0] + t * (cs[1] + t * (cs[2] + t * cs[3])),
                _ => cs[1] + t * (2.0 * cs[2] + t * 3.0 * cs[3]),
            };
            if ct == 0.0 {
                continue;
            }
            v += ct * mono_d(x, exps, &[]);
            for i in 0..3 {
                let gi = mono_d(x, exps, &[i]);
                if gi != 0.0 {
                    g[i] += ct * gi;
                }
                for j in i..3 {
                    let hij = mono_d(x, exps, &[i, j]);
                    if hij != 0.0 {
                        hs[(i, j)] += ct * hij;
                        if i != j {
                            hs[(j, i)] += ct * hij;
                        }
                    }
                    for k in j..3 {
                        let tijk = mono_d(x, exps, &[i, j, k]);
                        if tijk != 0.0 {
                            add_sym3(&mut th, i, j, k, ct * tijk);
                        }
                    }
                }
            }
        }
        (v, g, hs, th)
    }
}

fn permutations3(i: usize, j: usize, k: usize) -> Vec<(usize, usize, usize)> {
    let mut v = vec![
        (i, j, k),
        (i, k, j),
        (j, i, k),
        (j, k, i),
        (k, i, j),
        (k, j, i),
    ];
    v.sort_unstable();
    v.dedup();
    v
}

fn add_sym3(th: &mut [Mat3; 3], i: usize, j: usize, k: usize, val: f64) {
    for (a, b, c) in permutations3(i, j, k) {
        th[a][(b, c)] += val;
    }
}

/// Derivative of x^e0 y^e1 z^e2 with respect to the listed axes.
fn mono_d(x: &Vec3, exps: &[u32; 3], axes: &[usize]) -> f64 {
    let mut e = [exps[0] as i64, exps[1] as i64, exps[2] as i64];
    let mut factor = 1.0;
    for &ax in axes {
        if e[ax] == 0 {
            return 0.0;
        }
        factor *= e[ax] as f64;
        e[ax] -= 1;
    }
    factor * x.x.powi(e[0] as i32) * x.y.powi(e[1] as i32) * x.z.powi(e[2] as i32)
}

/// One row of the builtin catalog.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub kind: &'static str,
    pub params: &'static str,
    pub description: &'static str,
}

pub fn builtin_catalog() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry { kind: "zero", params: "[]", description: "no external field" },
        CatalogEntry {
            kind: "uniform_magnetic",
            params: "[Hx, Hy, Hz]",
            description: "uniform magnetic field; gauge symmetric (A = H x r / 2) or landau (H along z only)",
        },
        CatalogEntry {
            kind: "uniform_electric",
            params: "[Ex, Ey, Ez]",
            description: "uniform electric field from Phi = -<E, r>",
        },
        CatalogEntry {
            kind: "crossed",
            params: "[Ex, Ey, Ez, Hx, Hy, Hz]",
            description: "uniform electric plus uniform magnetic field",
        },
        CatalogEntry {
            kind: "harmonic_scalar",
            params: "[k]",
            description: "scalar well Phi = k |r|^2 / 2",
        },
        CatalogEntry {
            kind: "plane_wave",
            params: "[amp, kx, ky, kz, px, py, pz, phase]",
            description: "linearly polarized vacuum plane wave; polarization orthogonalized against k, omega = c |k|",
        },
        CatalogEntry {
            kind: "custom_polynomial",
            params: "[560 coefficients]",
            description: "Phi, A1, A2, A3 as degree-<=4 polynomials in x with cubic time coefficients; layout: component-major, then monomial (graded, x-major), then t-power",
        },
    ]
}

impl FieldModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            FieldModel::Zero => "zero",
            FieldModel::UniformMagnetic { .. } => "uniform_magnetic",
            FieldModel::UniformElectric { .. } => "uniform_electric",
            FieldModel::Crossed { .. } => "crossed",
            FieldModel::HarmonicScalar { .. } => "harmonic_scalar",
            FieldModel::PlaneWave { .. } => "plane_wave",
            FieldModel::CustomPolynomial { .. } => "custom_polynomial",
        }
    }

    /// Build from the scenario-config encoding (kind string + flat params).
    pub fn from_config(kind: &str, params: &[f64], gauge: Option<Gauge>) -> Result<Self, EngineError> {
        let gauge = gauge.unwrap_or(Gauge::Symmetric);
        let need = |n: usize| -> Result<(), EngineError> {
            if params.len() != n {
                Err(EngineError::Config(format!(
                    "field kind '{kind}' expects {n} params, got {}",
                    params.len()
                )))
            } else {
                Ok(())
            }
        };
        let model = match kind {
            "zero" => {
                need(0)?;
                FieldModel::Zero
            }
            "uniform_magnetic" => {
                need(3)?;
                FieldModel::UniformMagnetic { h0: Vec3::new(params[0], params[1], params[2]), gauge }
            }
            "uniform_electric" => {
                need(3)?;
                FieldModel::UniformElectric { e0: Vec3::new(params[0], params[1], params[2]) }
            }
            "crossed" => {
                need(6)?;
                FieldModel::Crossed {
                    e0: Vec3::new(params[0], params[1], params[2]),
                    h0: Vec3::new(params[3], params[4], params[5]),
                    gauge,
                }
            }
            "harmonic_scalar" => {
                need(1)?;
                FieldModel::HarmonicScalar { k: params[0] }
            }
            "plane_wave" => {
                need(8)?;
                FieldModel::PlaneWave {
                    amp: params[0],
                    k: Vec3::new(params[1], params[2], params[3]),
                    pol: Vec3::new(params[4], params[5], params[6]),
                    phase: params[7],
                }
            }
            "custom_polynomial" => {
                need(POLY_PARAMS)?;
                FieldModel::CustomPolynomial { coeffs: params.to_vec() }
            }
            other => return Err(EngineError::Config(format!("unknown field kind '{other}'"))),
        };
        model.validate()?;
        Ok(model)
    }

    /// Flat config encoding (round-trips through `from_config`).
    pub fn to_config(&self) -> (&'static str, Vec<f64>, Option<Gauge>) {
        match self {
            FieldModel::Zero => ("zero", vec![], None),
            FieldModel::UniformMagnetic { h0, gauge } => {
                ("uniform_magnetic", vec![h0.x, h0.y, h0.z], Some(*gauge))
            }
            FieldModel::UniformElectric { e0 } => ("uniform_electric", vec![e0.x, e0.y, e0.z], None),
            FieldModel::Crossed { e0, h0, gauge } => (
                "crossed",
                vec![e0.x, e0.y, e0.z, h0.x, h0.y, h0.z],
                Some(*gauge),
            ),
            FieldModel::HarmonicScalar { k } => ("harmonic_scalar", vec![*k], None),
            FieldModel::PlaneWave { amp, k, pol, phase } => (
                "plane_wave",
                vec![*amp, k.x, k.y, k.z, pol.x, pol.y, pol.z, *phase],
                None,
            ),
            FieldModel::CustomPolynomial { coeffs } => ("custom_polynomial", coeffs.clone(), None),
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        match self {
            FieldModel::UniformMagnetic { h0, gauge } | FieldModel::Crossed { h0, gauge, .. } => {
                if *gauge == Gauge::Landau && (h0.x != 0.0 || h0.y != 0.0) {
                    return Err(EngineError::Config(
                        "landau gauge is only supported for H along the z axis".into(),
                    ));
                }
                Ok(())
            }
            FieldModel::PlaneWave { k, pol, .. } => {
                if k.norm() == 0.0 {
                    return Err(EngineError::Config("plane_wave wave vector must be nonzero".into()));
                }
                let khat = k / k.norm();
                let perp = pol - khat * khat.dot(pol);
                if perp.norm() < 1e-12 * pol.norm().max(1.0) {
                    return Err(EngineError::Config(
                        "plane_wave polarization must have a component orthogonal to k".into(),
                    ));
                }
                Ok(())
            }
            FieldModel::CustomPolynomial { coeffs } => {
                if coeffs.len() != POLY_PARAMS {
                    return Err(EngineError::Config(format!(
                        "custom_polynomial expects {POLY_PARAMS} coefficients, got {}",
                        coeffs.len()
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn potentials(&self, x: &Vec3, t: f64, c: f64) -> (f64, Vec3) {
        let d = self.derivatives(x, t, c, 0).expect("order 0 derivatives");
        (d.phi, d.a)
    }

    pub fn fields(&self, x: &Vec3, t: f64, c: f64) -> (Vec3, Vec3) {
        let d = self.derivatives(x, t, c, 1).expect("order 1 derivatives");
        (d.e, d.h)
    }

    pub fn derivatives(&self, x: &Vec3, t: f64, c: f64, order: usize) -> Result<FieldDerivatives, EngineError> {
        if order > 3 {
            return Err(EngineError::Config(format!(
                "field derivatives supported up to order 3, requested {order}"
            )));
        }
        let mut d = FieldDerivatives::zeroed(order);
        match self {
            FieldModel::Zero => {}
            FieldModel::UniformMagnetic { h0, gauge } => {
                fill_uniform_magnetic(&mut d, h0, *gauge, x, order);
            }
            FieldModel::UniformElectric { e0 } => {
                fill_uniform_electric(&mut d, e0, x);
            }
            FieldModel::Crossed { e0, h0, gauge } => {
                fill_uniform_magnetic(&mut d, h0, *gauge, x, order);
                fill_uniform_electric(&mut d, e0, x);
            }
            FieldModel::HarmonicScalar { k } => {
                d.phi = 0.5 * k * x.norm_squared();
                d.dphi = *k * x;
                if order >= 2 {
                    d.d2phi = Mat3::identity() * *k;
                }
            }
            FieldModel::PlaneWave { amp, k, pol, phase } => {
                let knorm = k.norm();
                let khat = k / knorm;
                let ehat = {
                    let p = pol - khat * khat.dot(pol);
                    p / p.norm()
                };
                let omega = c * knorm;
                let arg = k.dot(x) - omega * t + phase;
                let (s, co) = arg.sin_cos();
                d.a = *amp * ehat * co;
                d.a_t = *amp * ehat * omega * s;
                if order >= 1 {
                    d.da = -(*amp) * s * ehat * k.transpose();
                    d.da_t = *amp * omega * co * ehat * k.transpose();
                }
                if order >= 2 {
                    for i in 0..3 {
                        d.d2a[i] = -(*amp) * ehat[i] * co * k * k.transpose();
                    }
                }
                if order >= 3 {
                    for i in 0..3 {
                        for l in 0..3 {
                            d.d3a[i][l] = *amp * ehat[i] * s * k[l] * k * k.transpose();
                        }
                    }
                }
            }
            FieldModel::CustomPolynomial { coeffs } => {
                let mons = poly_monomials();
                let stride = POLY_MONOMIALS * POLY_TIME_COEFFS;
                let comps: Vec<PolyComponent> = (0..4)
                    .map(|c| PolyComponent { coeffs: &coeffs[c * stride..(c + 1) * stride] })
                    .collect();
                let (v, g, hs, th) = comps[0].derivs(&mons, x, t, 0);
                d.phi = v;
                d.dphi = g;
                if order >= 2 {
                    d.d2phi = hs;
                }
                if order >= 3 {
                    d.d3phi = th;
                }
                for i in 0..3 {
                    let (v, g, hs, th) = comps[1 + i].derivs(&mons, x, t, 0);
                    d.a[i] = v;
                    if order >= 1 {
                        d.da.set_row(i, &g.transpose());
                    }
                    if order >= 2 {
                        d.d2a[i] = hs;
                    }
                    if order >= 3 {
                        d.d3a[i] = th;
                    }
                    let (vt, gt, _, _) = comps[1 + i].derivs(&mons, x, t, 1);
                    d.a_t[i] = vt;
                    if order >= 1 {
                        d.da_t.set_row(i, &gt.transpose());
                    }
                }
            }
        }
        Ok(d.finish(c))
    }
}

fn fill_uniform_magnetic(d: &mut FieldDerivatives, h0: &Vec3, gauge: Gauge, x: &Vec3, order: usize) {
    match gauge {
        Gauge::Symmetric => {
            d.a += 0.5 * h0.cross(x);
            if order >= 1 {
                d.da += 0.5 * cross_matrix(h0);
            }
        }
        Gauge::Landau => {
            // H = (0, 0, Hz): A = (-Hz * y, 0, 0)
            d.a += Vec3::new(-h0.z * x.y, 0.0, 0.0);
            if order >= 1 {
                let mut j = Mat3::zeros();
                j[(0, 1)] = -h0.z;
                d.da += j;
            }
        }
    }
}

fn fill_uniform_electric(d: &mut FieldDerivatives, e0: &Vec3, x: &Vec3) {
    d.phi += -e0.dot(x);
    d.dphi += -e0;
}

/// Nested central finite differences of the potentials; the contract fallback
/// for models without analytic derivative tables and the oracle the tests
/// compare the analytic tables against. Step per nesting level:
/// `h = 1e-4 * max(1, |x|)`.
pub fn fd_derivatives(model: &FieldModel, x: &Vec3, t: f64, c: f64, order: usize) -> Result<FieldDerivatives, EngineError> {
    if order > 3 {
        return Err(EngineError::Config(format!(
            "field derivatives supported up to order 3, requested {order}"
        )));
    }
    let h = 1e-4 * x.norm().max(1.0);
    let mut d = FieldDerivatives::zeroed(order);
    let (phi0, a0) = model.potentials(x, t, c);
    d.phi = phi0;
    d.a = a0;
    let pot = |x: &Vec3, t: f64| model.potentials(x, t, c);

    let shift = |x: &Vec3, ax: usize, s: f64| {
        let mut y = *x;
        y[ax] += s;
        y
    };
    if order >= 1 {
        for j in 0..3 {
            let (pp, ap) = pot(&shift(x, j, h), t);
            let (pm, am) = pot(&shift(x, j, -h), t);
            d.dphi[j] = (pp - pm) / (2.0 * h);
            for i in 0..3 {
                d.da[(i, j)] = (ap[i] - am[i]) / (2.0 * h);
            }
        }
        let ht = 1e-6 * t.abs().max(1.0);
        let (_, atp) = pot(x, t + ht);
        let (_, atm) = pot(x, t - ht);
        d.a_t = (atp - atm) / (2.0 * ht);
        for j in 0..3 {
            let (_, app) = pot(&shift(x, j, h), t + ht);
            let (_, apm) = pot(&shift(x, j, h), t - ht);
            let (_, amp_) = pot(&shift(x, j, -h), t + ht);
            let (_, amm) = pot(&shift(x, j, -h), t - ht);
            for i in 0..3 {
                d.da_t[(i, j)] = ((app[i] - apm[i]) - (amp_[i] - amm[i])) / (4.0 * h * ht);
            }
        }
    }
    if order >= 2 {
        for j in 0..3 {
            for k in j..3 {
                let (v, va) = fd_second(&pot, x, t, j, k, h);
                d.d2phi[(j, k)] = v;
                d.d2phi[(k, j)] = v;
                for i in 0..3 {
                    d.d2a[i][(j, k)] = va[i];
                    d.d2a[i][(k, j)] = va[i];
                }
            }
        }
    }
    if order >= 3 {
        for l in 0..3 {
            // d/dx_l of the Hessian by nesting
            for j in 0..3 {
                for k in j..3 {
                    let (vp, vap) = fd_second(&pot, &shift(x, l, h), t, j, k, h);
                    let (vm, vam) = fd_second(&pot, &shift(x, l, -h), t, j, k, h);
                    let v = (vp - vm) / (2.0 * h);
                    d.d3phi[l][(j, k)] = v;
                    d.d3phi[l][(k, j)] = v;
                    for i in 0..3 {
                        let va = (vap[i] - vam[i]) / (2.0 * h);
                        d.d3a[i][l][(j, k)] = va;
                        d.d3a[i][l][(k, j)] = va;
                    }
                }
            }
        }
    }
    Ok(d.finish(c))
}

fn fd_second<F>(pot: &F, x: &Vec3, t: f64, j: usize, k: usize, h: f64) -> (f64, Vec3)
where
    F: Fn(&Vec3, f64) -> (f64, Vec3),
{
    let xs = |dj: f64, dk: f64| {
        let mut y = *x;
        y[j] += dj;
        y[k] += dk;
        pot(&y, t)
    };
    if j == k {
        let (pp, ap) = xs(h, 0.0);
        let (pm, am) = xs(-h, 0.0);
        let (p0, a0) = pot(x, t);
        ((pp - 2.0 * p0 + pm) / (h * h), (ap - 2.0 * a0 + am) / (h * h))
    } else {
        let (ppp, app) = xs(h, h);
        let (ppm, apm) = xs(h, -h);
        let (pmp, amp_) = xs(-h, h);
        let (pmm, amm) = xs(-h, -h);
        (
            ((ppp - ppm) - (pmp - pmm)) / (4.0 * h * h),
            ((app - apm) - (amp_ - amm)) / (4.0 * h * h),
        )
    }
}

/// Mild time-dependent polynomial instance used by tests and the default
/// verification scenarios: anharmonic scalar well plus a weak sheared vector
/// potential with cubic time drift.
pub fn sample_polynomial_field() -> FieldModel {
    let mons = poly_monomials();
    let mut coeffs = vec![0.0; POLY_PARAMS];
    let stride = POLY_MONOMIALS * POLY_TIME_COEFFS;
    let mut set = |comp: usize, exps: [u32; 3], tpow: usize, v: f64| {
        let m = mons.iter().position(|e| *e == exps).expect("monomial");
        coeffs[comp * stride + m * POLY_TIME_COEFFS + tpow] = v;
    };
    // Phi: 0.05 (x^2 + y^2 + z^2) + 0.01 x^3 + 0.004 x y z + drift 0.002 t x
    set(0, [2, 0, 0], 0, 0.05);
    set(0, [0, 2, 0], 0, 0.05);
    set(0, [0, 0, 2], 0, 0.05);
    set(0, [3, 0, 0], 0, 0.01);
    set(0, [1, 1, 1], 0, 0.004);
    set(0, [1, 0, 0], 1, 0.002);
    // A: weak shear, quadratic pieces, slow time growth
    set(1, [0, 1, 0], 0, 0.03); // A1 ~ 0.03 y
    set(1, [0, 0, 2], 0, 0.005);
    set(2, [1, 0, 0], 0, -0.02); // A2 ~ -0.02 x
    set(2, [2, 0, 0], 0, 0.004);
    set(3, [1, 1, 0], 0, 0.006); // A3 ~ 0.006 x y
    set(3, [0, 1, 0], 2, 0.001); // t^2 growth
    FieldModel::CustomPolynomial { coeffs }
}

/// Catalog instances used by the conservation/orthonormality sweeps.
pub fn catalog_instances() -> Vec<FieldModel> {
    vec![
        FieldModel::Zero,
        FieldModel::UniformMagnetic { h0: Vec3::new(0.0, 0.0, 1.0), gauge: Gauge::Symmetric },
        FieldModel::UniformElectric { e0: Vec3::new(0.12, 0.0, 0.05) },
        FieldModel::Crossed {
            e0: Vec3::new(0.1, 0.02, 0.0),
            h0: Vec3::new(0.0, 0.1, 0.9),
            gauge: Gauge::Symmetric,
        },
        FieldModel::HarmonicScalar { k: 0.3 },
        FieldModel::PlaneWave {
            amp: 0.05,
            k: Vec3::new(0.0, 0.0, 0.7),
            pol: Vec3::new(1.0, 0.0, 0.0),
            phase: 0.3,
        },
        sample_polynomial_field(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    const C: f64 = 1.0;

    #[test]
    fn zero_field_everywhere() {
        let f = FieldModel::Zero;
        let (phi, a) = f.potentials(&Vec3::new(1.0, -2.0, 0.5), 0.3, C);
        assert_eq!(phi, 0.0);
        assert_eq!(a, Vec3::zeros());
        let (e, h) = f.fields(&Vec3::new(1.0, 2.0, 3.0), 0.0, C);
        assert_eq!(e, Vec3::zeros());
        assert_eq!(h, Vec3::zeros());
    }

    #[test]
    fn uniform_magnetic_symmetric_gauge() {
        let f = FieldModel::UniformMagnetic { h0: Vec3::new(0.0, 0.0, 1.0), gauge: Gauge::Symmetric };
        let (phi, a) = f.potentials(&Vec3::new(2.0, 0.0, 0.0), 0.0, C);
        assert_eq!(phi, 0.0);
        assert!((a - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
        let (e, h) = f.fields(&Vec3::new(5.0, -3.0, 2.0), 1.0, C);
        assert!(e.norm() < 1e-15);
        assert!((h - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-14);
        // Jacobian of A
        let d = f.derivatives(&Vec3::new(1.0, 1.0, 1.0), 0.0, C, 2).unwrap();
        let expect = Mat3::new(0.0, -0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!((d.da - expect).norm() < 1e-15);
        assert!(d.d2a.iter().all(|m| m.norm() == 0.0));
    }

    #[test]
    fn landau_gauge_same_field() {
        let h0 = Vec3::new(0.0, 0.0, 0.8);
        let f = FieldModel::UniformMagnetic { h0, gauge: Gauge::Landau };
        let (_, h) = f.fields(&Vec3::new(0.3, -0.7, 0.1), 0.0, C);
        assert!((h - h0).norm() < 1e-14);
        assert!(FieldModel::UniformMagnetic { h0: Vec3::new(1.0, 0.0, 0.0), gauge: Gauge::Landau }
            .validate()
            .is_err());
    }

    #[test]
    fn harmonic_scalar_values() {
        let f = FieldModel::HarmonicScalar { k: 2.0 };
        let (phi, a) = f.potentials(&Vec3::new(1.0, 1.0, 0.0), 0.0, C);
        assert!((phi - 2.0).abs() < 1e-15);
        assert_eq!(a, Vec3::zeros());
        let (e, h) = f.fields(&Vec3::new(1.0, 0.0, 0.0), 0.0, C);
        assert!((e - Vec3::new(-2.0, 0.0, 0.0)).norm() < 1e-15);
        assert!(h.norm() == 0.0);
        let d = f.derivatives(&Vec3::new(0.2, 0.4, -0.1), 0.0, C, 3).unwrap();
        assert!((d.d2phi - Mat3::identity() * 2.0).norm() < 1e-15);
        assert!(d.d3phi.iter().all(|m| m.norm() == 0.0));
    }

    #[test]
    fn fields_match_fd_of_potentials_all_catalog() {
        let mut rng = CounterRng::new(2024);
        for model in catalog_instances() {
            for _ in 0..100 {
                let x = rng.vec3(-1.5, 1.5);
                let t = rng.range(0.0, 2.0);
                let (e, h) = model.fields(&x, t, C);
                let fd = fd_derivatives(&model, &x, t, C, 1).unwrap();
                let scale = e.norm().max(h.norm()).max(1e-3);
                assert!(
                    (e - fd.e).norm() / scale < 1e-6,
                    "E mismatch for {} at {x:?}: {:?} vs {:?}",
                    model.kind_name(),
                    e,
                    fd.e
                );
                assert!(
                    (h - fd.h).norm() / scale < 1e-6,
                    "H mismatch for {}",
                    model.kind_name()
                );
            }
        }
    }

    #[test]
    fn div_h_vanishes_all_catalog() {
        let mut rng = CounterRng::new(7);
        for model in catalog_instances() {
            for _ in 0..50 {
                let x = rng.vec3(-1.0, 1.0);
                let t = rng.range(0.0, 1.0);
                let d = model.derivatives(&x, t, C, 1).unwrap();
                let div = d.dh[(0, 0)] + d.dh[(1, 1)] + d.dh[(2, 2)];
                let scale = d.dh.norm().max(1.0);
                assert!(div.abs() / scale < 1e-6, "div H != 0 for {}", model.kind_name());
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_fd_to_order_3() {
        let mut rng = CounterRng::new(99);
        for model in [sample_polynomial_field(), FieldModel::PlaneWave {
            amp: 0.3,
            k: Vec3::new(0.4, -0.2, 0.9),
            pol: Vec3::new(0.0, 1.0, 0.3),
            phase: 1.1,
        }] {
            for _ in 0..20 {
                let x = rng.vec3(-1.0, 1.0);
                let t = rng.range(0.0, 1.5);
                let an = model.derivatives(&x, t, C, 3).unwrap();
                let fd = fd_derivatives(&model, &x, t, C, 3).unwrap();
                assert!((an.dphi - fd.dphi).norm() < 1e-6 * an.dphi.norm().max(1.0));
                assert!((an.da - fd.da).norm() < 1e-6 * an.da.norm().max(1.0));
                assert!((an.d2phi - fd.d2phi).norm() < 1e-5 * an.d2phi.norm().max(1.0));
                for i in 0..3 {
                    assert!((an.d2a[i] - fd.d2a[i]).norm() < 1e-5 * an.d2a[i].norm().max(1.0));
                    assert!((an.d3phi[i] - fd.d3phi[i]).norm() < 2e-4 * an.d3phi[i].norm().max(1.0));
                }
                assert!((an.de - fd.de).norm() < 1e-5 * an.de.norm().max(1.0));
                assert!((an.dh - fd.dh).norm() < 1e-5 * an.dh.norm().max(1.0));
            }
        }
    }

    #[test]
    fn derivative_order_restriction_is_exact() {
        let model = sample_polynomial_field();
        let x = Vec3::new(0.4, -0.3, 0.9);
        let d3 = model.derivatives(&x, 0.7, C, 3).unwrap();
        let d2 = model.derivatives(&x, 0.7, C, 2).unwrap();
        assert_eq!(d3.phi, d2.phi);
        assert_eq!(d3.dphi, d2.dphi);
        assert_eq!(d3.d2phi, d2.d2phi);
        assert_eq!(d3.da, d2.da);
        for i in 0..3 {
            assert_eq!(d3.d2a[i], d2.d2a[i]);
        }
        assert!(d2.d3phi.iter().all(|m| m.norm() == 0.0));
    }

    #[test]
    fn derivative_tensors_symmetric() {
        let model = sample_polynomial_field();
        let x = Vec3::new(0.5, 0.2, -0.8);
        let d = model.derivatives(&x, 0.4, C, 3).unwrap();
        assert!((d.d2phi - d.d2phi.transpose()).norm() <= 1e-10);
        for i in 0..3 {
            assert!((d.d2a[i] - d.d2a[i].transpose()).norm() <= 1e-10);
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        assert!((d.d3phi[j][(k, l)] - d.d3phi[k][(j, l)]).abs() <= 1e-10);
                        assert!((d.d3a[i][j][(k, l)] - d.d3a[i][k][(j, l)]).abs() <= 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn order_above_three_rejected() {
        let e = FieldModel::Zero.derivatives(&Vec3::zeros(), 0.0, C, 4);
        assert!(matches!(e, Err(EngineError::Config(_))));
    }

    #[test]
    fn unknown_kind_rejected() {
        assert!(matches!(
            FieldModel::from_config("warp_core", &[], None),
            Err(EngineError::Config(_))
        ));
    }

    #[test]
    fn catalog_round_trips_through_config() {
        for model in catalog_instances() {
            let (kind, params, gauge) = model.to_config();
            let back = FieldModel::from_config(kind, &params, gauge).unwrap();
            assert_eq!(model, back);
        }
        // every catalog kind is constructible from its schema
        let names: Vec<&str> = builtin_catalog().iter().map(|e| e.kind).collect();
        assert!(names.contains(&"zero"));
        assert!(names.contains(&"uniform_magnetic"));
        assert_eq!(names.len(), 7);
    }

    #[test]
    fn plane_wave_is_vacuum_solution() {
        let model = FieldModel::PlaneWave {
            amp: 0.4,
            k: Vec3::new(0.3, 0.5, -0.2),
            pol: Vec3::new(0.0, 0.0, 1.0),
            phase: 0.2,
        };
        let mut rng = CounterRng::new(5);
        for _ in 0..30 {
            let x = rng.vec3(-2.0, 2.0);
            let t = rng.range(0.0, 3.0);
            let (e, h) = model.fields(&x, t, C);
            assert!((e.norm() - h.norm()).abs() < 1e-12);
            assert!(e.dot(&h).abs() < 1e-12);
        }
    }
}
