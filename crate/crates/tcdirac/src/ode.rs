//! Adaptive embedded Runge-Kutta integration with queryable dense output.
//!
//! Dormand-Prince 5(4) with the standard 4th-order continuous extension.
//! Every accepted step stores its interpolation coefficients, so the solution
//! can be evaluated at arbitrary times afterwards; the germ, spinor and
//! moment integrations sample the classical trajectory this way instead of
//! re-integrating on their own grids. A fixed-step classic RK4 (cubic Hermite
//! dense output) is available as a reproducibility fallback.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t:.9e} (h = {h:.3e}); problem too stiff for the embedded pair")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("exceeded {max_steps} steps at t = {t:.9e}")]
    MaxSteps { t: f64, max_steps: usize },
    #[error("{what}")]
    Domain { t: f64, what: String },
    #[error("invalid integration span [{t0}, {tf}]")]
    BadSpan { t0: f64, tf: f64 },
    #[error("dense output queried at t = {t:.9e} outside [{t0:.9e}, {tf:.9e}]")]
    OutOfRange { t: f64, t0: f64, tf: f64 },
}

pub type RhsResult = Result<(), OdeError>;

/// Method used when `fixed_step` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedMethod {
    /// Classic RK4; the plain reproducibility fallback.
    #[default]
    Rk4,
    /// Implicit midpoint (fixed-point iterated); symplectic for general
    /// Hamiltonians, offered as the optional structure-preserving method.
    ImplicitMidpoint,
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step guess; estimated automatically when `None`.
    pub h0: Option<f64>,
    /// When set, integrate with the fixed-step `fixed_method` instead of the
    /// adaptive pair.
    pub fixed_step: Option<f64>,
    pub fixed_method: FixedMethod,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 2_000_000,
            h0: None,
            fixed_step: None,
            fixed_method: FixedMethod::Rk4,
        }
    }
}

impl OdeOptions {
    pub fn tol(rtol: f64, atol: f64) -> Self {
        OdeOptions { rtol, atol, ..Default::default() }
    }
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
// embedded error weights (b5 - b4)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense-output weights
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone)]
enum StepInterp {
    /// DOPRI5 continuous extension: five coefficient vectors.
    Dopri([Vec<f64>; 5]),
    /// Cubic Hermite (fixed-step RK4 path): y0, y1, f0, f1.
    Hermite { y0: Vec<f64>, y1: Vec<f64>, f0: Vec<f64>, f1: Vec<f64> },
}

#[derive(Debug, Clone)]
struct DenseStep {
    t: f64,
    h: f64,
    interp: StepInterp,
}

/// Piecewise-polynomial solution over one integration span.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    t0: f64,
    tf: f64,
    dim: usize,
    steps: Vec<DenseStep>,
    y_end: Vec<f64>,
    pub n_accepted: usize,
    pub n_rejected: usize,
}

impl DenseSolution {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn y_end(&self) -> &[f64] {
        &self.y_end
    }

    /// Endpoints of every accepted step, in integration order (t0 first).
    pub fn step_times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.steps.iter().map(|s| s.t).collect();
        ts.push(self.tf);
        ts
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) -> Result<(), OdeError> {
        debug_assert_eq!(out.len(), self.dim);
        let dir = (self.tf - self.t0).signum();
        let lo = self.t0.min(self.tf);
        let hi = self.t0.max(self.tf);
        let tol = 1e-12 * (1.0 + hi.abs());
        if t < lo - tol || t > hi + tol {
            return Err(OdeError::OutOfRange { t, t0: self.t0, tf: self.tf });
        }
        // binary search for the step containing t (steps ordered by dir * t)
        let key = dir * t;
        let mut a = 0usize;
        let mut b = self.steps.len();
        while b - a > 1 {
            let m = (a + b) / 2;
            if dir * self.steps[m].t <= key {
                a = m;
            } else {
                b = m;
            }
        }
        let step = &self.steps[a];
        let theta = ((t - step.t) / step.h).clamp(0.0, 1.0);
        match &step.interp {
            StepInterp::Dopri(rc) => {
                let th1 = 1.0 - theta;
                for i in 0..self.dim {
                    out[i] = rc[0][i]
                        + theta
                            * (rc[1][i] + th1 * (rc[2][i] + theta * (rc[3][i] + th1 * rc[4][i])));
                }
            }
            StepInterp::Hermite { y0, y1, f0, f1 } => {
                let h = step.h;
                let t2 = theta * theta;
                let t3 = t2 * theta;
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + theta;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                for i in 0..self.dim {
                    out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
                }
            }
        }
        Ok(())
    }

    pub fn eval_vec(&self, t: f64) -> Result<Vec<f64>, OdeError> {
        let mut out = vec![0.0; self.dim];
        self.eval(t, &mut out)?;
        Ok(out)
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], rtol: f64, atol: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..err.len() {
        let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
        let q = err[i] / sc;
        acc += q * q;
    }
    (acc / err.len() as f64).sqrt()
}

fn initial_step<F>(f: &mut F, t0: f64, tf: f64, y0: &[f64], f0: &[f64], rtol: f64, atol: f64) -> Result<f64, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> RhsResult,
{
    let dir = (tf - t0).signum();
    let n = y0.len();
    let sc: Vec<f64> = y0.iter().map(|y| atol + rtol * y.abs()).collect();
    let d0 = (y0.iter().zip(&sc).map(|(y, s)| (y / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (f0.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min((tf - t0).abs());
    // one explicit Euler probe to estimate the second derivative
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + dir * h0 * f).collect();
    let mut f1 = vec![0.0; n];
    f(t0 + dir * h0, &y1, &mut f1)?;
    let d2 = (f1
        .iter()
        .zip(f0)
        .zip(&sc)
        .map(|((a, b), s)| ((a - b) / s).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok(h0.min(h1).min((tf - t0).abs()))
}

/// Integrate `dy/dt = f(t, y)` over `[t0, tf]` (either direction) and return
/// the dense solution.
pub fn solve<F>(mut f: F, t0: f64, tf: f64, y0: &[f64], opts: &OdeOptions) -> Result<DenseSolution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> RhsResult,
{
    if !t0.is_finite() || !tf.is_finite() || t0 == tf {
        return Err(OdeError::BadSpan { t0, tf });
    }
    if let Some(h) = opts.fixed_step {
        return match opts.fixed_method {
            FixedMethod::Rk4 => solve_rk4_fixed(f, t0, tf, y0, h, opts.max_steps),
            FixedMethod::ImplicitMidpoint => {
                solve_midpoint_fixed(f, t0, tf, y0, h, opts.max_steps)
            }
        };
    }
    let dir = (tf - t0).signum();
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    f(t, &y, &mut k1)?;
    let mut h = match opts.h0 {
        Some(h) => h.abs().min((tf - t0).abs()),
        None => initial_step(&mut f, t0, tf, &y, &k1, opts.rtol, opts.atol)?,
    };

    let mut steps: Vec<DenseStep> = Vec::new();
    let mut n_accepted = 0usize;
    let mut n_rejected = 0usize;
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];

    let mut nstep = 0usize;
    loop {
        if nstep >= opts.max_steps {
            return Err(OdeError::MaxSteps { t, max_steps: opts.max_steps });
        }
        nstep += 1;

        let remaining = (tf - t).abs();
        if h > remaining {
            h = remaining;
        }
        let hd = dir * h;
        if h < 1e-14 * (1.0 + t.abs()) {
            return Err(OdeError::StepSizeUnderflow { t, h });
        }

        for i in 0..n {
            ytmp[i] = y[i] + hd * A21 * k1[i];
        }
        f(t + C2 * hd, &ytmp, &mut k2)?;
        for i in 0..n {
            ytmp[i] = y[i] + hd * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * hd, &ytmp, &mut k3)?;
        for i in 0..n {
            ytmp[i] = y[i] + hd * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * hd, &ytmp, &mut k4)?;
        for i in 0..n {
            ytmp[i] = y[i] + hd * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * hd, &ytmp, &mut k5)?;
        for i in 0..n {
            ytmp[i] =
                y[i] + hd * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + hd, &ytmp, &mut k6)?;
        for i in 0..n {
            ynew[i] =
                y[i] + hd * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t + hd, &ynew, &mut k7)?;

        for i in 0..n {
            err[i] = hd
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = error_norm(&err, &y, &ynew, opts.rtol, opts.atol);

        if en <= 1.0 {
            // accept: build dense coefficients
            let mut rc0 = Vec::with_capacity(n);
            let mut rc1 = Vec::with_capacity(n);
            let mut rc2 = Vec::with_capacity(n);
            let mut rc3 = Vec::with_capacity(n);
            let mut rc4 = Vec::with_capacity(n);
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = hd * k1[i] - ydiff;
                rc0.push(y[i]);
                rc1.push(ydiff);
                rc2.push(bspl);
                rc3.push(ydiff - hd * k7[i] - bspl);
                rc4.push(
                    hd * (D1 * k1[i]
                        + D3 * k3[i]
                        + D4 * k4[i]
                        + D5 * k5[i]
                        + D6 * k6[i]
                        + D7 * k7[i]),
                );
            }
            steps.push(DenseStep { t, h: hd, interp: StepInterp::Dopri([rc0, rc1, rc2, rc3, rc4]) });
            n_accepted += 1;
            t += hd;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7); // FSAL

            if (tf - t).abs() <= 1e-14 * (1.0 + tf.abs()) {
                return Ok(DenseSolution {
                    t0,
                    tf,
                    dim: n,
                    steps,
                    y_end: y,
                    n_accepted,
                    n_rejected,
                });
            }
            let fac = (0.9 * en.powf(-0.2)).clamp(0.2, 5.0);
            h *= fac;
        } else {
            n_rejected += 1;
            let fac = (0.9 * en.powf(-0.2)).clamp(0.1, 1.0);
            h *= fac;
        }
    }
}

fn solve_rk4_fixed<F>(mut f: F, t0: f64, tf: f64, y0: &[f64], h_req: f64, max_steps: usize) -> Result<DenseSolution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> RhsResult,
{
    let span = tf - t0;
    let nsteps = (span.abs() / h_req.abs()).ceil().max(1.0) as usize;
    if nsteps > max_steps {
        return Err(OdeError::MaxSteps { t: t0, max_steps });
    }
    let h = span / nsteps as f64;
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut f0 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut steps = Vec::with_capacity(nsteps);
    f(t, &y, &mut f0)?;
    for istep in 0..nsteps {
        for i in 0..n {
            ytmp[i] = y[i] + 0.5 * h * f0[i];
        }
        f(t + 0.5 * h, &ytmp, &mut k2)?;
        for i in 0..n {
            ytmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(t + 0.5 * h, &ytmp, &mut k3)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * k3[i];
        }
        f(t + h, &ytmp, &mut k4)?;
        let y1: Vec<f64> = (0..n)
            .map(|i| y[i] + h / 6.0 * (f0[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let tnext = if istep + 1 == nsteps { tf } else { t0 + (istep + 1) as f64 * h };
        let mut f1 = vec![0.0; n];
        f(tnext, &y1, &mut f1)?;
        steps.push(DenseStep {
            t,
            h,
            interp: StepInterp::Hermite { y0: y.clone(), y1: y1.clone(), f0: f0.clone(), f1: f1.clone() },
        });
        t = tnext;
        y = y1;
        f0 = f1;
    }
    Ok(DenseSolution { t0, tf, dim: n, steps, y_end: y, n_accepted: nsteps, n_rejected: 0 })
}

fn solve_midpoint_fixed<F>(mut f: F, t0: f64, tf: f64, y0: &[f64], h_req: f64, max_steps: usize) -> Result<DenseSolution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> RhsResult,
{
    let span = tf - t0;
    let nsteps = (span.abs() / h_req.abs()).ceil().max(1.0) as usize;
    if nsteps > max_steps {
        return Err(OdeError::MaxSteps { t: t0, max_steps });
    }
    let h = span / nsteps as f64;
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut f0 = vec![0.0; n];
    f(t, &y, &mut f0)?;
    let mut steps = Vec::with_capacity(nsteps);
    let mut k = vec![0.0; n];
    let mut ymid = vec![0.0; n];
    for istep in 0..nsteps {
        // fixed-point iteration for k = f(t + h/2, y + (h/2) k)
        k.copy_from_slice(&f0);
        let tm = t + 0.5 * h;
        let mut converged = false;
        for _ in 0..50 {
            for i in 0..n {
                ymid[i] = y[i] + 0.5 * h * k[i];
            }
            let mut knew = vec![0.0; n];
            f(tm, &ymid, &mut knew)?;
            let delta: f64 = knew
                .iter()
                .zip(&k)
                .map(|(a, b)| (a - b).abs() / (1.0 + a.abs()))
                .fold(0.0, f64::max);
            k.copy_from_slice(&knew);
            if delta < 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(OdeError::StepSizeUnderflow { t, h: h.abs() });
        }
        let y1: Vec<f64> = (0..n).map(|i| y[i] + h * k[i]).collect();
        let tnext = if istep + 1 == nsteps { tf } else { t0 + (istep + 1) as f64 * h };
        let mut f1 = vec![0.0; n];
        f(tnext, &y1, &mut f1)?;
        steps.push(DenseStep {
            t,
            h,
            interp: StepInterp::Hermite { y0: y.clone(), y1: y1.clone(), f0: f0.clone(), f1: f1.clone() },
        });
        t = tnext;
        y = y1;
        f0 = f1;
    }
    Ok(DenseSolution { t0, tf, dim: n, steps, y_end: y, n_accepted: nsteps, n_rejected: 0 })
}
