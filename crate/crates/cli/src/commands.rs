//! The four experiment commands: check, simulate, sweep, bidirectional.
//! Each returns a typed outcome that the binary serializes and maps to an
//! exit code.

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use omarray::dynamics::{
    self, convergence_run, evolve_closed_sampled, evolve_open_sampled, thermal_dissipators,
    ConvergenceReport, EvolutionSpec,
};
use omarray::fock::{HilbertSpace, QuantumState};
use omarray::metrics::{phase_correct, receiver_state, transfer_fidelity};
use omarray::model::{
    build_array_hamiltonian, initial_sender_state, place_states, ArrayConfig, SenderState,
};
use omarray::polariton::{check_rwa, check_stability, DEFAULT_RWA_MARGIN};
use omarray::protocols::apply_plan;

use crate::config::{ExperimentConfig, ResolvedExperiment, StateSpec, SweepAxis};
use crate::CliError;

/// Execution options from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub force_dim: bool,
}

// ---------------------------------------------------------------------------
// check

#[derive(Debug, Clone, Serialize)]
pub struct StabilityCheck {
    pub cell: usize,
    pub g: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RwaCheck {
    pub ok: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub bond: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeCompatibilityCheck {
    pub ok: bool,
    pub ratio: f64,
    pub nearest_odd: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub stability: Vec<StabilityCheck>,
    pub rwa: RwaCheck,
    pub time_compatibility: TimeCompatibilityCheck,
    pub warnings: Vec<String>,
    pub all_ok: bool,
}

pub fn run_check(cfg: &ExperimentConfig) -> Result<CheckReport, CliError> {
    let resolved = cfg.resolve()?;
    let array = build_array(cfg, &resolved, false)?;

    let stability: Vec<StabilityCheck> = array
        .cells
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let bound =
                0.5 * (p.omega_m * p.omega_m + (p.gamma * p.gamma + p.kappa * p.kappa) / 4.0)
                    .sqrt();
            StabilityCheck {
                cell: i,
                g: p.g_eff,
                bound,
                ok: check_stability(p),
            }
        })
        .collect();

    // RWA is state-dependent: evaluate on the configured initial state in a
    // small space (the expectation values only need the state itself)
    let space = small_state_space(cfg, &resolved)?;
    let psi0 = initial_sender_state(&space, 0, &cfg.initial_state.to_sender_state())
        .map_err(CliError::Core)?;
    let rwa_rep = check_rwa(&array, &psi0, DEFAULT_RWA_MARGIN).map_err(CliError::Core)?;

    let tc = &resolved.plan.compatibility;
    let warnings: Vec<String> = resolved
        .plan
        .warnings
        .iter()
        .map(|w| w.to_string())
        .collect();
    let all_ok = stability.iter().all(|s| s.ok) && rwa_rep.ok && tc.ok;
    Ok(CheckReport {
        stability,
        rwa: RwaCheck {
            ok: rwa_rep.ok,
            lhs: rwa_rep.lhs,
            rhs: rwa_rep.rhs,
            ratio: rwa_rep.ratio,
            bond: rwa_rep.bond,
            margin: rwa_rep.margin,
        },
        time_compatibility: TimeCompatibilityCheck {
            ok: tc.ok,
            ratio: tc.ratio,
            nearest_odd: tc.nearest_odd,
        },
        warnings,
        all_ok,
    })
}

// ---------------------------------------------------------------------------
// shared assembly

fn build_array(
    cfg: &ExperimentConfig,
    resolved: &ResolvedExperiment,
    force_dim: bool,
) -> Result<ArrayConfig, CliError> {
    let mut array =
        apply_plan(&resolved.cell, &resolved.plan, resolved.model_kind).map_err(CliError::Core)?;
    array.dim_guard.force = force_dim;
    let _ = cfg;
    Ok(array)
}

fn small_state_space(
    cfg: &ExperimentConfig,
    resolved: &ResolvedExperiment,
) -> Result<HilbertSpace, CliError> {
    let dims = vec![cfg.truncation.per_mode_dim; 2 * resolved.n_cells];
    HilbertSpace::new(&dims, cfg.truncation.excitation_cap).map_err(CliError::Core)
}

/// The target reduced two-mode state on the receiver's truncated space.
fn target_state(
    spec: &SenderState,
    per_mode_dim: usize,
    cap: Option<usize>,
) -> Result<QuantumState, CliError> {
    let space = HilbertSpace::new(&[per_mode_dim, per_mode_dim], cap).map_err(CliError::Core)?;
    let amps_list = match spec {
        SenderState::PhiPlus => vec![((1u32, 0u32), C64::new(0.5f64.sqrt(), 0.0)), ((0, 1), C64::new(0.5f64.sqrt(), 0.0))],
        SenderState::BigPhiPlus => vec![((2, 0), C64::new(0.5f64.sqrt(), 0.0)), ((0, 2), C64::new(0.5f64.sqrt(), 0.0))],
        SenderState::Custom(list) => list.clone(),
    };
    let mut amps = DVector::from_element(space.dim(), C64::new(0.0, 0.0));
    for ((na, nb), amp) in amps_list {
        let idx = space.index_of(&[na, nb]).ok_or_else(|| {
            CliError::Config(format!(
                "target occupation ({na},{nb}) exceeds the truncation"
            ))
        })?;
        amps[idx] = amp;
    }
    let norm = amps.norm();
    if norm == 0.0 {
        return Err(CliError::Config("target state has no amplitude".into()));
    }
    QuantumState::pure(&space, amps / C64::new(norm, 0.0)).map_err(CliError::Core)
}

fn evolution_spec(
    cfg: &ExperimentConfig,
    h: omarray::fock::SparseOperator,
    dissipators: Vec<dynamics::Dissipator>,
    t_final: f64,
    force_dim: bool,
) -> EvolutionSpec {
    let open = !dissipators.is_empty();
    let mut spec = if open {
        EvolutionSpec::open(h, dissipators, t_final)
    } else {
        EvolutionSpec::closed(h, t_final)
    };
    if let Some(r) = cfg.evolution.rel_tol {
        spec.rel_tol = r;
    }
    if let Some(a) = cfg.evolution.abs_tol {
        spec.abs_tol = a;
    }
    spec.method = cfg.evolution.method.into();
    spec.krylov_dim = cfg.evolution.krylov_dim;
    spec.force_dim = force_dim;
    spec
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, Serialize)]
pub struct SampleRow {
    pub time_s: f64,
    pub raw_fidelity: f64,
    pub corrected_fidelity: f64,
    pub trace: f64,
    pub total_excitation: f64,
    /// One entry per cell: ⟨a†a⟩ + ⟨b†b⟩.
    pub cell_populations: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateOutcome {
    pub rows: Vec<SampleRow>,
    pub tau: f64,
    pub open_system: bool,
    pub convergence: Option<ConvergenceSummary>,
    pub min_eigenvalue_final: Option<f64>,
    pub max_trace_drift: f64,
    pub steps: usize,
    pub rhs_evals: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSummary {
    pub caps: Vec<usize>,
    pub values: Vec<f64>,
    pub converged: bool,
    pub last_delta: f64,
    pub tol: f64,
}

impl From<&ConvergenceReport> for ConvergenceSummary {
    fn from(r: &ConvergenceReport) -> Self {
        ConvergenceSummary {
            caps: r.caps.clone(),
            values: r.values.clone(),
            converged: r.converged(),
            last_delta: r.last_delta(),
            tol: r.tol,
        }
    }
}

struct PointResult {
    raw: f64,
    corrected: f64,
    trace: f64,
    min_eig: Option<f64>,
    drift: f64,
    steps: usize,
    rhs_evals: usize,
    rows: Vec<SampleRow>,
}

/// One full evolution (closed or open per config) of `array` from the
/// sender state, sampling fidelity and populations.
fn run_point(
    cfg: &ExperimentConfig,
    array: &ArrayConfig,
    state: &SenderState,
    cap: Option<usize>,
    sample_times: &[f64],
    tau: f64,
    force_dim: bool,
    want_rows: bool,
    want_min_eig: bool,
) -> Result<PointResult, CliError> {
    let n_cells = array.n_cells();
    let dims = vec![cfg.truncation.per_mode_dim; 2 * n_cells];
    let space = HilbertSpace::new(&dims, cap).map_err(CliError::Core)?;
    let h = build_array_hamiltonian(array, &space).map_err(CliError::Core)?;
    let psi0 = initial_sender_state(&space, 0, state).map_err(CliError::Core)?;
    let target = target_state(state, cfg.truncation.per_mode_dim, cap)?;
    let receiver = n_cells - 1;

    let open = cfg.open_system.enabled;
    let dissipators = if open {
        thermal_dissipators(array, &space).map_err(CliError::Core)?
    } else {
        Vec::new()
    };
    let spec = evolution_spec(cfg, h, dissipators, tau, force_dim);

    let mut rows = Vec::new();
    let mut sample_err: Option<CliError> = None;
    let mut on_sample = |t: f64, st: &QuantumState| {
        if !want_rows || sample_err.is_some() {
            return;
        }
        let sample = (|| -> Result<SampleRow, CliError> {
            let rho_r = receiver_state(st, receiver).map_err(CliError::Core)?;
            let raw = transfer_fidelity(&rho_r, &target).map_err(CliError::Core)?;
            let corrected = transfer_fidelity(
                &phase_correct(&rho_r, &array.cells[receiver], t).map_err(CliError::Core)?,
                &target,
            )
            .map_err(CliError::Core)?;
            let mut cell_populations = Vec::with_capacity(n_cells);
            for cell in 0..n_cells {
                let na = st
                    .occupation_expectation(omarray::model::optical_mode(cell))
                    .map_err(CliError::Core)?;
                let nb = st
                    .occupation_expectation(omarray::model::mechanical_mode(cell))
                    .map_err(CliError::Core)?;
                cell_populations.push(na + nb);
            }
            Ok(SampleRow {
                time_s: t,
                raw_fidelity: raw,
                corrected_fidelity: corrected,
                trace: st.trace(),
                total_excitation: st.total_excitation(),
                cell_populations,
            })
        })();
        match sample {
            Ok(row) => rows.push(row),
            Err(e) => sample_err = Some(e),
        }
    };

    let report = if open {
        evolve_open_sampled(&spec, &psi0.to_mixed(), sample_times, &mut on_sample)
            .map_err(CliError::Core)?
    } else {
        evolve_closed_sampled(&spec, &psi0, sample_times, &mut on_sample)
            .map_err(CliError::Core)?
    };
    if let Some(e) = sample_err {
        return Err(e);
    }

    let rho_r = receiver_state(&report.state, receiver).map_err(CliError::Core)?;
    let raw = transfer_fidelity(&rho_r, &target).map_err(CliError::Core)?;
    let corrected = transfer_fidelity(
        &phase_correct(&rho_r, &array.cells[receiver], tau).map_err(CliError::Core)?,
        &target,
    )
    .map_err(CliError::Core)?;
    let min_eig = if want_min_eig && open {
        Some(report.state.min_eigenvalue())
    } else {
        None
    };
    Ok(PointResult {
        raw,
        corrected,
        trace: report.state.trace(),
        min_eig,
        drift: report.drift,
        steps: report.steps,
        rhs_evals: report.rhs_evals,
        rows,
    })
}

pub fn run_simulate(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<SimulateOutcome, CliError> {
    let resolved = cfg.resolve()?;
    let array = build_array(cfg, &resolved, opts.force_dim)?;
    let tau = resolved.plan.tau();
    let n_samples = cfg.sample_points;
    let sample_times: Vec<f64> = (0..n_samples)
        .map(|k| tau * k as f64 / (n_samples - 1) as f64)
        .collect();
    let state = cfg.initial_state.to_sender_state();

    let point = run_point(
        cfg,
        &array,
        &state,
        cfg.truncation.excitation_cap,
        &sample_times,
        tau,
        opts.force_dim,
        true,
        true,
    )?;

    // convergence study at the transfer time over the configured caps
    let convergence = if cfg.truncation.convergence_caps.len() >= 2 {
        let report = convergence_run(
            &cfg.truncation.convergence_caps,
            cfg.truncation.convergence_tol,
            |cap| {
                let p = run_point(
                    cfg,
                    &array,
                    &state,
                    Some(cap),
                    &[],
                    tau,
                    opts.force_dim,
                    false,
                    false,
                )
                .map_err(|e| omarray::Error::InvalidParams(e.to_string()))?;
                Ok(p.corrected)
            },
        )
        .map_err(CliError::Core)?;
        Some(ConvergenceSummary::from(&report))
    } else {
        None
    };

    let warnings = resolved
        .plan
        .warnings
        .iter()
        .map(|w| w.to_string())
        .collect();
    Ok(SimulateOutcome {
        rows: point.rows,
        tau,
        open_system: cfg.open_system.enabled,
        convergence,
        min_eigenvalue_final: point.min_eig,
        max_trace_drift: point.drift,
        steps: point.steps,
        rhs_evals: point.rhs_evals,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub state: String,
    pub n_m: f64,
    pub tau: f64,
    pub raw_fidelity: f64,
    pub corrected_fidelity: f64,
    pub trace: f64,
    pub min_eigenvalue: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub tau: f64,
}

pub fn run_sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<SweepOutcome, CliError> {
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep section is required for the sweep command".into()))?;
    let resolved = cfg.resolve()?;
    let tau = resolved.plan.tau();

    let states: Vec<StateSpec> = if sweep.initial_states.is_empty() {
        vec![cfg.initial_state.clone()]
    } else {
        sweep.initial_states.clone()
    };
    let n_ms: Vec<f64> = if sweep.n_m_values.is_empty() {
        vec![cfg.array.cell.n_m]
    } else {
        sweep.n_m_values.clone()
    };

    // grid-major, then state, then bath occupation: deterministic row order
    let mut tasks = Vec::new();
    for &x in &sweep.grid {
        for st in &states {
            for &nm in &n_ms {
                tasks.push((x, st.clone(), nm));
            }
        }
    }

    let rows: Vec<SweepRow> = tasks
        .par_iter()
        .map(|(x, state_spec, nm)| {
            let outcome = (|| -> Result<PointResult, CliError> {
                let mut cell = resolved.cell.clone();
                match sweep.axis {
                    SweepAxis::GOverJ => cell.g_eff = x * resolved.j,
                    SweepAxis::KappaOverJ => cell.kappa = x * resolved.j,
                }
                cell.n_m = *nm;
                let mut array = apply_plan(&cell, &resolved.plan, resolved.model_kind)
                    .map_err(CliError::Core)?;
                array.dim_guard.force = opts.force_dim;
                run_point(
                    cfg,
                    &array,
                    &state_spec.to_sender_state(),
                    cfg.truncation.excitation_cap,
                    &[],
                    tau,
                    opts.force_dim,
                    false,
                    true,
                )
            })();
            match outcome {
                Ok(p) => SweepRow {
                    axis_value: *x,
                    state: state_spec.label(),
                    n_m: *nm,
                    tau,
                    raw_fidelity: p.raw,
                    corrected_fidelity: p.corrected,
                    trace: p.trace,
                    min_eigenvalue: p.min_eig,
                    status: "ok".into(),
                },
                Err(e) => SweepRow {
                    axis_value: *x,
                    state: state_spec.label(),
                    n_m: *nm,
                    tau,
                    raw_fidelity: f64::NAN,
                    corrected_fidelity: f64::NAN,
                    trace: f64::NAN,
                    min_eigenvalue: None,
                    status: format!("error: {e}"),
                },
            }
        })
        .collect();

    Ok(SweepOutcome {
        axis: sweep.axis,
        rows,
        tau,
    })
}

// ---------------------------------------------------------------------------
// bidirectional

#[derive(Debug, Clone, Serialize)]
pub struct BidirectionalOutcome {
    pub tau: f64,
    /// Fidelity of the state launched at cell 1, measured at cell N.
    pub forward_raw: f64,
    pub forward_corrected: f64,
    /// Fidelity of the state launched at cell N, measured at cell 1.
    pub backward_raw: f64,
    pub backward_corrected: f64,
    pub trace: f64,
    pub max_trace_drift: f64,
}

pub fn run_bidirectional(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<BidirectionalOutcome, CliError> {
    let resolved = cfg.resolve()?;
    if resolved.plan.scheme != omarray::protocols::Scheme::Pst {
        return Err(CliError::Config(
            "bidirectional transfer runs on the pst scheme".into(),
        ));
    }
    let array = build_array(cfg, &resolved, opts.force_dim)?;
    let tau = resolved.plan.tau();
    let n_cells = array.n_cells();
    let state_a = cfg.initial_state.to_sender_state();
    let state_b = cfg
        .initial_state_b
        .clone()
        .unwrap_or_else(|| cfg.initial_state.clone())
        .to_sender_state();

    let space = small_state_space(cfg, &resolved)?;
    let psi0 = place_states(&space, &[(0, state_a.clone()), (n_cells - 1, state_b.clone())])
        .map_err(CliError::Core)?;
    let h = build_array_hamiltonian(&array, &space).map_err(CliError::Core)?;

    let open = cfg.open_system.enabled;
    let dissipators = if open {
        thermal_dissipators(&array, &space).map_err(CliError::Core)?
    } else {
        Vec::new()
    };
    let spec = evolution_spec(cfg, h, dissipators, tau, opts.force_dim);
    let report = if open {
        evolve_open_sampled(&spec, &psi0.to_mixed(), &[], |_, _| {}).map_err(CliError::Core)?
    } else {
        evolve_closed_sampled(&spec, &psi0, &[], |_, _| {}).map_err(CliError::Core)?
    };

    let cap = cfg.truncation.excitation_cap;
    let target_a = target_state(&state_a, cfg.truncation.per_mode_dim, cap)?;
    let target_b = target_state(&state_b, cfg.truncation.per_mode_dim, cap)?;

    let fid = |cell: usize, target: &QuantumState| -> Result<(f64, f64), CliError> {
        let rho_r = receiver_state(&report.state, cell).map_err(CliError::Core)?;
        let raw = transfer_fidelity(&rho_r, target).map_err(CliError::Core)?;
        let corrected = transfer_fidelity(
            &phase_correct(&rho_r, &array.cells[cell], tau).map_err(CliError::Core)?,
            target,
        )
        .map_err(CliError::Core)?;
        Ok((raw, corrected))
    };
    let (fr, fc) = fid(n_cells - 1, &target_a)?;
    let (br, bc) = fid(0, &target_b)?;

    Ok(BidirectionalOutcome {
        tau,
        forward_raw: fr,
        forward_corrected: fc,
        backward_raw: br,
        backward_corrected: bc,
        trace: report.state.trace(),
        max_trace_drift: report.drift,
    })
}
