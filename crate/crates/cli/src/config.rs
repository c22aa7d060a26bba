//! TOML experiment configuration with CLI-flag overrides.

use serde::{Deserialize, Serialize};
use visco_core::compressible::{CompressibleParams, PressureLaw};
use visco_core::field::{Field, Rank};
use visco_core::grid::{DealiasMode, Grid};
use visco_core::incompressible::{DtPolicy, FlowParams, SchemeConfig};
use visco_core::kinematics::{make_volume_preserving_eta, EtaKind};
use visco_core::synth;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Incompressible,
    Compressible,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Run,
    Sweep,
    CompareLinear,
    Straighten,
    Drift,
    Oracle,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub dealias: DealiasMode,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: 16,
            dealias: DealiasMode::Pad32,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamConfig {
    pub rho: f64,
    pub mu: f64,
    pub kappa: f64,
    /// compressible-only: dilatational viscosity
    pub lambda: f64,
    /// compressible-only: γ-law pressure P(τ) = a τ^γ
    pub pressure_a: f64,
    pub pressure_gamma: f64,
}

impl Default for ParamConfig {
    fn default() -> Self {
        ParamConfig {
            rho: 1.0,
            mu: 1.0,
            kappa: 1.0,
            lambda: 1.0,
            pressure_a: 0.5,
            pressure_gamma: 2.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSection {
    pub dt: f64,
    pub order: u32,
    pub proj_tol: f64,
}

impl Default for SchemeSection {
    fn default() -> Self {
        SchemeSection {
            dt: 1e-2,
            order: 2,
            proj_tol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityKind {
    Zero,
    Shear,
    /// seeded spectral noise with k⁻⁴ coefficient decay, then projected
    Noise,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialData {
    pub eta_kind: EtaKind,
    pub eta_amplitude: f64,
    pub eta_mode: i64,
    pub u_kind: VelocityKind,
    pub u_amplitude: f64,
    pub u_kmax: i64,
    pub seed: u64,
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData {
            eta_kind: EtaKind::Zero,
            eta_amplitude: 0.0,
            eta_mode: 1,
            u_kind: VelocityKind::Noise,
            u_amplitude: 0.05,
            u_kmax: 3,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub kappas: Vec<f64>,
    pub parallel: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    /// testing hook: force one check to fail
    pub inject_fault: bool,
    pub trials: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    pub experiment: Experiment,
    pub out_dir: String,
    pub t_final: f64,
    pub sample_interval: f64,
    pub grid: GridConfig,
    pub params: ParamConfig,
    pub scheme: SchemeSection,
    pub initial: InitialData,
    pub sweep: SweepSection,
    pub oracle: OracleSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: Model::Incompressible,
            experiment: Experiment::Run,
            out_dir: "out".into(),
            t_final: 1.0,
            sample_interval: 0.1,
            grid: GridConfig::default(),
            params: ParamConfig::default(),
            scheme: SchemeSection::default(),
            initial: InitialData::default(),
            sweep: SweepSection::default(),
            oracle: OracleSection::default(),
        }
    }
}

/// Flag values that override their config keys.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out_dir: Option<String>,
    pub kappa: Option<f64>,
    pub grid: Option<usize>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub order: Option<u32>,
    pub seed: Option<u64>,
    pub parallel: Option<bool>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&str>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {p}: {e}")))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{p}: {e}")))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &overrides.out_dir {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = overrides.kappa {
            cfg.params.kappa = v;
        }
        if let Some(v) = overrides.grid {
            cfg.grid.n = v;
        }
        if let Some(v) = overrides.t_final {
            cfg.t_final = v;
        }
        if let Some(v) = overrides.dt {
            cfg.scheme.dt = v;
        }
        if let Some(v) = overrides.order {
            cfg.scheme.order = v;
        }
        if let Some(v) = overrides.seed {
            cfg.initial.seed = v;
        }
        if let Some(v) = overrides.parallel {
            cfg.sweep.parallel = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.t_final > 0.0) {
            return Err(CliError::Config(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval <= self.t_final) {
            return Err(CliError::Config(format!(
                "sample_interval must lie in (0, t_final], got {} vs t_final {}",
                self.sample_interval, self.t_final
            )));
        }
        if self.experiment == Experiment::Sweep && self.sweep.kappas.is_empty() {
            return Err(CliError::Config("sweep.kappas must be nonempty".into()));
        }
        if !(self.scheme.order == 1 || self.scheme.order == 2) {
            return Err(CliError::Config(format!(
                "scheme.order must be 1 or 2, got {}",
                self.scheme.order
            )));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid, CliError> {
        Grid::new(self.grid.n, self.grid.n, self.grid.n, self.grid.dealias)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn flow_params(&self) -> Result<FlowParams, CliError> {
        FlowParams::new(self.params.rho, self.params.mu, self.params.kappa)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn compressible_params(&self) -> Result<CompressibleParams, CliError> {
        let law = PressureLaw::new(
            self.params.pressure_a,
            self.params.pressure_gamma,
            self.params.rho,
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        CompressibleParams::new(
            self.params.rho,
            self.params.mu,
            self.params.lambda,
            self.params.kappa,
            law,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig {
            dt: DtPolicy::Fixed { dt: self.scheme.dt },
            order: self.scheme.order,
            proj_tol: self.scheme.proj_tol,
            ..Default::default()
        }
    }

    /// Raw (unprojected) initial fields from the recipe.
    pub fn build_initial(&self, grid: Grid) -> Result<(Field, Field), CliError> {
        let eta0 = make_volume_preserving_eta(
            grid,
            self.initial.eta_kind,
            self.initial.eta_amplitude,
            self.initial.eta_mode,
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        let u0 = match self.initial.u_kind {
            VelocityKind::Zero => Field::zeros(grid, Rank::Vector),
            VelocityKind::Shear => Field::from_fn(grid, Rank::Vector, |_, y2, _, c| {
                if c == 0 {
                    self.initial.u_amplitude * y2.sin()
                } else {
                    0.0
                }
            }),
            VelocityKind::Noise => match self.model {
                Model::Incompressible => synth::random_divergence_free(
                    grid,
                    self.initial.u_kmax,
                    4.0,
                    self.initial.u_amplitude,
                    self.initial.seed,
                ),
                Model::Compressible => synth::random_band_limited(
                    grid,
                    Rank::Vector,
                    self.initial.u_kmax,
                    4.0,
                    self.initial.u_amplitude,
                    self.initial.seed,
                ),
            },
        };
        Ok((eta0, u0))
    }

    /// Canonical serialized form used for hashing and for the manifest.
    pub fn canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
