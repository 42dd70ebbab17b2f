//! Results files: UTF-8 CSV with a header row, a JSON metadata sidecar,
//! and an optional gnuplot script.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::commands::{BidirectionalOutcome, SimulateOutcome, SweepOutcome};
use crate::config::ExperimentConfig;
use crate::CliError;

pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const FIDELITY_CONVENTION: &str = "squared_overlap <psi_target|rho|psi_target>";

#[derive(Debug, Serialize)]
pub struct Metadata<'a, T: Serialize> {
    pub csv_schema_version: u32,
    pub fidelity_convention: &'static str,
    pub crate_version: &'static str,
    pub command: &'a str,
    pub wall_time_s: f64,
    pub config: &'a ExperimentConfig,
    pub summary: T,
}

pub struct OutputPaths {
    pub csv: PathBuf,
    pub metadata: PathBuf,
    pub gnuplot: Option<PathBuf>,
}

fn write_metadata<T: Serialize>(
    path: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    summary: T,
    elapsed: Duration,
) -> Result<(), CliError> {
    let meta = Metadata {
        csv_schema_version: CSV_SCHEMA_VERSION,
        fidelity_convention: FIDELITY_CONVENTION,
        crate_version: env!("CARGO_PKG_VERSION"),
        command,
        wall_time_s: elapsed.as_secs_f64(),
        config: cfg,
        summary,
    };
    let text = serde_json::to_string_pretty(&meta)
        .map_err(|e| CliError::Io(format!("metadata serialization: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
    Ok(())
}

pub fn write_simulate(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    outcome: &SimulateOutcome,
    elapsed: Duration,
    gnuplot: bool,
) -> Result<OutputPaths, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", out_dir.display())))?;
    let prefix = &cfg.output.prefix;
    let csv_path = out_dir.join(format!("{prefix}_timeseries.csv"));
    let n_cells = outcome.rows.first().map(|r| r.cell_populations.len()).unwrap_or(0);

    let mut w = csv::Writer::from_path(&csv_path)
        .map_err(|e| CliError::Io(format!("opening {}: {e}", csv_path.display())))?;
    let mut header = vec![
        "time_s".to_string(),
        "raw_fidelity".into(),
        "corrected_fidelity".into(),
        "trace".into(),
        "total_excitation".into(),
    ];
    for c in 1..=n_cells {
        header.push(format!("pop_cell_{c}"));
    }
    w.write_record(&header).map_err(csv_err)?;
    for row in &outcome.rows {
        let mut rec = vec![
            row.time_s.to_string(),
            row.raw_fidelity.to_string(),
            row.corrected_fidelity.to_string(),
            row.trace.to_string(),
            row.total_excitation.to_string(),
        ];
        rec.extend(row.cell_populations.iter().map(|p| p.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;

    let meta_path = out_dir.join(format!("{prefix}_timeseries.meta.json"));
    write_metadata(&meta_path, "simulate", cfg, outcome, elapsed)?;

    let gp = if gnuplot {
        let gp_path = out_dir.join(format!("{prefix}_timeseries.gp"));
        let script = format!(
            "set datafile separator ','\n\
             set key autotitle columnhead\n\
             set xlabel 'time (s)'\n\
             set ylabel 'fidelity'\n\
             set yrange [0:1.05]\n\
             plot '{csv}' using 1:2 with lines title 'raw', \\\n\
             \x20    '{csv}' using 1:3 with lines title 'corrected'\n",
            csv = csv_path.file_name().unwrap().to_string_lossy()
        );
        std::fs::write(&gp_path, script)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", gp_path.display())))?;
        Some(gp_path)
    } else {
        None
    };

    Ok(OutputPaths {
        csv: csv_path,
        metadata: meta_path,
        gnuplot: gp,
    })
}

pub fn write_sweep(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    outcome: &SweepOutcome,
    elapsed: Duration,
    gnuplot: bool,
) -> Result<OutputPaths, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", out_dir.display())))?;
    let prefix = &cfg.output.prefix;
    let csv_path = out_dir.join(format!("{prefix}_sweep.csv"));
    let mut w = csv::Writer::from_path(&csv_path)
        .map_err(|e| CliError::Io(format!("opening {}: {e}", csv_path.display())))?;
    w.write_record([
        outcome.axis.column_name(),
        "state",
        "n_m",
        "tau_s",
        "raw_fidelity",
        "corrected_fidelity",
        "trace",
        "min_eigenvalue",
        "status",
    ])
    .map_err(csv_err)?;
    for row in &outcome.rows {
        w.write_record([
            row.axis_value.to_string(),
            row.state.clone(),
            row.n_m.to_string(),
            row.tau.to_string(),
            row.raw_fidelity.to_string(),
            row.corrected_fidelity.to_string(),
            row.trace.to_string(),
            row.min_eigenvalue.map(|v| v.to_string()).unwrap_or_default(),
            row.status.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;

    let meta_path = out_dir.join(format!("{prefix}_sweep.meta.json"));
    write_metadata(&meta_path, "sweep", cfg, outcome, elapsed)?;

    let gp = if gnuplot {
        let gp_path = out_dir.join(format!("{prefix}_sweep.gp"));
        let script = format!(
            "set datafile separator ','\n\
             set key autotitle columnhead\n\
             set xlabel '{axis}'\n\
             set ylabel 'fidelity at tau'\n\
             set yrange [0:1.05]\n\
             {logscale}plot '{csv}' using 1:6 with linespoints title 'corrected'\n",
            axis = outcome.axis.column_name(),
            logscale = if outcome.axis == crate::config::SweepAxis::KappaOverJ {
                "set logscale x\n"
            } else {
                ""
            },
            csv = csv_path.file_name().unwrap().to_string_lossy()
        );
        std::fs::write(&gp_path, script)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", gp_path.display())))?;
        Some(gp_path)
    } else {
        None
    };

    Ok(OutputPaths {
        csv: csv_path,
        metadata: meta_path,
        gnuplot: gp,
    })
}

pub fn write_bidirectional(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    outcome: &BidirectionalOutcome,
    elapsed: Duration,
) -> Result<OutputPaths, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", out_dir.display())))?;
    let prefix = &cfg.output.prefix;
    let csv_path = out_dir.join(format!("{prefix}_bidirectional.csv"));
    let mut w = csv::Writer::from_path(&csv_path)
        .map_err(|e| CliError::Io(format!("opening {}: {e}", csv_path.display())))?;
    w.write_record([
        "direction",
        "tau_s",
        "raw_fidelity",
        "corrected_fidelity",
    ])
    .map_err(csv_err)?;
    w.write_record([
        "cell1_to_cellN".to_string(),
        outcome.tau.to_string(),
        outcome.forward_raw.to_string(),
        outcome.forward_corrected.to_string(),
    ])
    .map_err(csv_err)?;
    w.write_record([
        "cellN_to_cell1".to_string(),
        outcome.tau.to_string(),
        outcome.backward_raw.to_string(),
        outcome.backward_corrected.to_string(),
    ])
    .map_err(csv_err)?;
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;

    let meta_path = out_dir.join(format!("{prefix}_bidirectional.meta.json"));
    write_metadata(&meta_path, "bidirectional", cfg, outcome, elapsed)?;
    Ok(OutputPaths {
        csv: csv_path,
        metadata: meta_path,
        gnuplot: None,
    })
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}
