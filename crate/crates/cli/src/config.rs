//! Experiment configuration: strict JSON (or TOML) with frequencies given
//! either as angular rates (`*_rad_s`) or as ordinary frequencies
//! (`*_over_2pi_hz`, multiplied by 2π at load). Unknown keys are rejected.

use std::f64::consts::TAU;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use omarray::model::{CellParams, ModelKind, SenderState};
use omarray::protocols::{self, TransferPlan};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub array: ArraySection,
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub initial_state: StateSpec,
    /// State launched from cell N in the bidirectional command
    /// (defaults to `initial_state`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state_b: Option<StateSpec>,
    pub truncation: TruncationSection,
    #[serde(default)]
    pub open_system: OpenSystemSection,
    #[serde(default)]
    pub evolution: EvolutionSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    /// Number of evenly spaced sample times in [0, τ] for `simulate`.
    #[serde(default = "default_sample_points")]
    pub sample_points: usize,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_sample_points() -> usize {
    41
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub n_cells: usize,
    pub model: ModelField,
    pub cell: CellSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelField {
    Linearized,
    RedSideband,
}

impl From<ModelField> for ModelKind {
    fn from(m: ModelField) -> Self {
        match m {
            ModelField::Linearized => ModelKind::Linearized,
            ModelField::RedSideband => ModelKind::RedSideband,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_m_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_m_over_2pi_hz: Option<f64>,
    /// Defaults to −ω_m (red-sideband resonance) when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_p_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_p_over_2pi_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_over_2pi_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_over_2pi_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_over_2pi_hz: Option<f64>,
    #[serde(default)]
    pub n_c: f64,
    #[serde(default)]
    pub n_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub scheme: SchemeField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_over_2pi_hz: Option<f64>,
    /// End-bond coupling for the eigenmode and tunneling schemes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_over_2pi_hz: Option<f64>,
    /// Endpoint mechanical detuning for the tunneling scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_over_2pi_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeField {
    Pst,
    Eigenmode,
    Tunneling,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpec {
    #[default]
    PhiPlus,
    BigPhiPlus,
    #[serde(untagged)]
    Custom {
        custom: Vec<CustomAmplitude>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomAmplitude {
    pub n_optical: u32,
    pub n_mechanical: u32,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl StateSpec {
    pub fn to_sender_state(&self) -> SenderState {
        match self {
            StateSpec::PhiPlus => SenderState::PhiPlus,
            StateSpec::BigPhiPlus => SenderState::BigPhiPlus,
            StateSpec::Custom { custom } => SenderState::Custom(
                custom
                    .iter()
                    .map(|a| ((a.n_optical, a.n_mechanical), C64::new(a.re, a.im)))
                    .collect(),
            ),
        }
    }

    pub fn label(&self) -> String {
        match self {
            StateSpec::PhiPlus => "phi_plus".into(),
            StateSpec::BigPhiPlus => "big_phi_plus".into(),
            StateSpec::Custom { .. } => "custom".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSection {
    pub per_mode_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excitation_cap: Option<usize>,
    /// Ascending caps for the convergence study; needs at least two
    /// entries for a verdict.
    #[serde(default)]
    pub convergence_caps: Vec<usize>,
    #[serde(default = "default_convergence_tol")]
    pub convergence_tol: f64,
}

fn default_convergence_tol() -> f64 {
    omarray::dynamics::DEFAULT_CONVERGENCE_TOL
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenSystemSection {
    #[serde(default)]
    pub enabled: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(default)]
    pub method: MethodField,
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        EvolutionSection {
            rel_tol: None,
            abs_tol: None,
            method: MethodField::Auto,
            krylov_dim: default_krylov_dim(),
        }
    }
}

fn default_krylov_dim() -> usize {
    30
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodField {
    #[default]
    Auto,
    EigenPropagator,
    AdaptiveStepper,
    KrylovExpm,
}

impl From<MethodField> for omarray::dynamics::Method {
    fn from(m: MethodField) -> Self {
        use omarray::dynamics::Method;
        match m {
            MethodField::Auto => Method::Auto,
            MethodField::EigenPropagator => Method::EigenPropagator,
            MethodField::AdaptiveStepper => Method::AdaptiveStepper,
            MethodField::KrylovExpm => Method::KrylovExpm,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    /// Grid values of the swept ratio, in output order.
    pub grid: Vec<f64>,
    /// Initial states per grid point (defaults to `[initial_state]`).
    #[serde(default)]
    pub initial_states: Vec<StateSpec>,
    /// Mechanical bath occupations per grid point (defaults to `[cell.n_m]`).
    #[serde(default)]
    pub n_m_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    GOverJ,
    KappaOverJ,
}

impl SweepAxis {
    pub fn column_name(&self) -> &'static str {
        match self {
            SweepAxis::GOverJ => "g_over_j",
            SweepAxis::KappaOverJ => "kappa_over_j",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            prefix: default_prefix(),
        }
    }
}

fn default_prefix() -> String {
    "run".into()
}

fn resolve_freq(
    rad_s: Option<f64>,
    over_2pi: Option<f64>,
    name: &str,
) -> Result<Option<f64>, CliError> {
    match (rad_s, over_2pi) {
        (Some(_), Some(_)) => Err(CliError::Config(format!(
            "{name}: give either the _rad_s or the _over_2pi_hz form, not both"
        ))),
        (Some(v), None) => Ok(Some(v)),
        (None, Some(v)) => Ok(Some(v * TAU)),
        (None, None) => Ok(None),
    }
}

/// Physical inputs resolved from a config: base cell, model kind, plan.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub cell: CellParams,
    pub model_kind: ModelKind,
    pub plan: TransferPlan,
    pub n_cells: usize,
    pub j: f64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = if path.extension().and_then(|s| s.to_str()) == Some("toml") {
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.array.n_cells < 2 {
            return Err(CliError::Config(format!(
                "array.n_cells must be at least 2, got {}",
                self.array.n_cells
            )));
        }
        if self.truncation.per_mode_dim < 2 {
            return Err(CliError::Config(
                "truncation.per_mode_dim must be at least 2".into(),
            ));
        }
        if self.sample_points < 2 {
            return Err(CliError::Config("sample_points must be at least 2".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.grid.is_empty() {
                return Err(CliError::Config("sweep.grid must not be empty".into()));
            }
            if sweep.grid.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(CliError::Config(
                    "sweep.grid values must be finite and non-negative".into(),
                ));
            }
        }
        Ok(())
    }

    /// Resolve frequencies and build the cell parameters and transfer plan.
    pub fn resolve(&self) -> Result<ResolvedExperiment, CliError> {
        let c = &self.array.cell;
        let omega_m = resolve_freq(c.omega_m_rad_s, c.omega_m_over_2pi_hz, "array.cell.omega_m")?
            .ok_or_else(|| CliError::Config("array.cell.omega_m is required".into()))?;
        let delta_p = resolve_freq(c.delta_p_rad_s, c.delta_p_over_2pi_hz, "array.cell.delta_p")?
            .unwrap_or(-omega_m);
        let g = resolve_freq(c.g_rad_s, c.g_over_2pi_hz, "array.cell.g")?
            .ok_or_else(|| CliError::Config("array.cell.g is required".into()))?;
        let kappa =
            resolve_freq(c.kappa_rad_s, c.kappa_over_2pi_hz, "array.cell.kappa")?.unwrap_or(0.0);
        let gamma =
            resolve_freq(c.gamma_rad_s, c.gamma_over_2pi_hz, "array.cell.gamma")?.unwrap_or(0.0);
        let cell = CellParams::new(omega_m, delta_p, g)
            .and_then(|p| p.with_decay(kappa, gamma, c.n_c, c.n_m))
            .map_err(|e| CliError::Config(format!("array.cell: {e}")))?;

        let p = &self.protocol;
        let j = resolve_freq(p.j_rad_s, p.j_over_2pi_hz, "protocol.j")?
            .ok_or_else(|| CliError::Config("protocol.j is required".into()))?;
        let lambda = resolve_freq(p.lambda_rad_s, p.lambda_over_2pi_hz, "protocol.lambda")?;
        let delta = resolve_freq(p.delta_rad_s, p.delta_over_2pi_hz, "protocol.delta")?;
        let n = self.array.n_cells;
        let plan = match p.scheme {
            SchemeField::Pst => protocols::pst_profile(n, j),
            SchemeField::Eigenmode => {
                let lambda = lambda.ok_or_else(|| {
                    CliError::Config("protocol.lambda is required for the eigenmode scheme".into())
                })?;
                protocols::eigenmode_profile(n, lambda, j)
            }
            SchemeField::Tunneling => {
                let lambda = lambda.ok_or_else(|| {
                    CliError::Config("protocol.lambda is required for the tunneling scheme".into())
                })?;
                let delta = delta.ok_or_else(|| {
                    CliError::Config("protocol.delta is required for the tunneling scheme".into())
                })?;
                protocols::tunneling_profile(n, lambda, delta, j)
            }
        }
        .map_err(|e| CliError::Config(format!("protocol: {e}")))?;

        Ok(ResolvedExperiment {
            cell,
            model_kind: self.array.model.into(),
            plan,
            n_cells: n,
            j,
        })
    }
}
