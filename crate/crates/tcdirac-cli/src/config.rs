//! Scenario configuration: one JSON file, strict schema, every referenced
//! sub-config validated before any computation starts.

use serde::{Deserialize, Serialize};
use tcdirac::classical::Mode;
use tcdirac::germ::{validate_germ_init, GermInit};
use tcdirac::wavepacket::QuadratureScheme;
use tcdirac::{C64, CMat3, Constants, EngineError, FieldModel, Gauge, HamiltonianSpec, Vec3};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub constants: Constants,
    /// Gyromagnetic ratio.
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub field: FieldBlock,
    pub z0: PhaseBlock,
    #[serde(default)]
    pub germ: GermBlock,
    #[serde(default)]
    pub spin: SpinBlock,
    #[serde(default)]
    pub nu: [u32; 3],
    #[serde(default)]
    pub order: u8,
    pub t_span: [f64; 2],
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub grid: GridBlock,
    /// Requested stages/exports; dependencies are added automatically.
    pub outputs: Vec<OutputKind>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_g() -> f64 {
    2.0
}

fn default_mode() -> Mode {
    Mode::RelativisticPlus
}

fn default_samples() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub gauge: Option<Gauge>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseBlock {
    pub p: [f64; 3],
    pub x: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GermBlock {
    /// `"default"`: the isotropic unit-width packet `B0 = iI, C0 = I`.
    Named(String),
    Explicit {
        b0_re: [[f64; 3]; 3],
        b0_im: [[f64; 3]; 3],
        c0_re: [[f64; 3]; 3],
        c0_im: [[f64; 3]; 3],
    },
}

impl Default for GermBlock {
    fn default() -> Self {
        GermBlock::Named("default".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinBlock {
    pub ell: [f64; 3],
    pub zeta: i8,
    pub zeta_prime: i8,
}

impl Default for SpinBlock {
    fn default() -> Self {
        SpinBlock { ell: [0.0, 0.0, 1.0], zeta: 1, zeta_prime: 1 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    /// Fixed-step fallback: step size for the non-adaptive integrators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_step: Option<f64>,
    /// Fixed-step method; `rk4` or `implicit_midpoint` (symplectic).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_method: Option<tcdirac::ode::FixedMethod>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rel: 1e-10, abs: 1e-12, fixed_step: None, fixed_method: None }
    }
}

impl Tolerances {
    pub fn ode_options(&self) -> tcdirac::ode::OdeOptions {
        tcdirac::ode::OdeOptions {
            rtol: self.rel,
            atol: self.abs,
            fixed_step: self.fixed_step,
            fixed_method: self.fixed_method.unwrap_or_default(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub scheme: QuadratureScheme,
    pub nodes_per_axis: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock { scheme: QuadratureScheme::GaussHermite, nodes_per_axis: 24 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Trajectory,
    Germ,
    Spin,
    Eta,
    Moments,
    Expectations,
    Wavefunction,
    Green,
}

/// Everything the pipeline needs, validated.
pub struct ValidatedScenario {
    pub scenario: Scenario,
    pub spec: HamiltonianSpec,
    pub z0: tcdirac::PhasePoint,
    pub germ_init: GermInit,
    pub ell: Vec3,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, String> {
        serde_json::from_str(text).map_err(|e| format!("config schema violation: {e}"))
    }

    pub fn validate(self) -> Result<ValidatedScenario, EngineError> {
        self.constants.validate().map_err(EngineError::Config)?;
        let field = FieldModel::from_config(&self.field.kind, &self.field.params, self.field.gauge)?;
        let spec = HamiltonianSpec::new(self.mode, self.constants, field)?;
        let z0 = tcdirac::PhasePoint::new(Vec3::from(self.z0.p), Vec3::from(self.z0.x));
        spec.check_initial_point(&z0)?;
        if !(self.t_span[1] > self.t_span[0]) {
            return Err(EngineError::Config(format!(
                "t_span must be increasing, got {:?}",
                self.t_span
            )));
        }
        if self.order > 1 {
            return Err(EngineError::Config(format!("order must be 0 or 1, got {}", self.order)));
        }
        if self.nu.iter().sum::<u32>() > 6 {
            return Err(EngineError::Config(format!("|nu| must be <= 6, got {:?}", self.nu)));
        }
        if !(self.spin.zeta == 1 || self.spin.zeta == -1)
            || !(self.spin.zeta_prime == 1 || self.spin.zeta_prime == -1)
        {
            return Err(EngineError::Config("zeta and zeta_prime must be +1 or -1".into()));
        }
        let germ_init = match &self.germ {
            GermBlock::Named(name) if name == "default" => GermInit::default(),
            GermBlock::Named(other) => {
                return Err(EngineError::Config(format!(
                    "unknown germ preset '{other}' (only \"default\")"
                )))
            }
            GermBlock::Explicit { b0_re, b0_im, c0_re, c0_im } => {
                let mut b0 = CMat3::zeros();
                let mut c0 = CMat3::zeros();
                for i in 0..3 {
                    for j in 0..3 {
                        b0[(i, j)] = C64::new(b0_re[i][j], b0_im[i][j]);
                        c0[(i, j)] = C64::new(c0_re[i][j], c0_im[i][j]);
                    }
                }
                GermInit { b0, c0 }
            }
        };
        let diag = validate_germ_init(&germ_init);
        if !diag.ok {
            return Err(EngineError::Domain(format!(
                "germ init violates admissibility: rank_ok={}, lagrangian res {:.3e}, normalization res {:.3e}",
                diag.rank_ok, diag.lagrangian_residual, diag.normalization_residual
            )));
        }
        let ell = Vec3::from(self.spin.ell);
        if ell.norm() < 1e-12 {
            return Err(EngineError::Domain("spin.ell must be a nonzero vector".into()));
        }
        // eta init precondition surfaces now, not mid-pipeline
        tcdirac::moments::init_eta(self.spin.zeta, self.spin.zeta_prime, &ell)?;
        if self.grid.nodes_per_axis < 2 {
            return Err(EngineError::Config("grid.nodes_per_axis must be >= 2".into()));
        }
        if self.n_samples == 0 {
            return Err(EngineError::Config("n_samples must be >= 1".into()));
        }
        if let Some(h) = self.tolerances.fixed_step {
            if !(h > 0.0) {
                return Err(EngineError::Config(format!(
                    "tolerances.fixed_step must be positive, got {h}"
                )));
            }
        }
        Ok(ValidatedScenario { scenario: self, spec, z0, germ_init, ell })
    }
}
