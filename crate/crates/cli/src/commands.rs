//! The four subcommands. Each returns an [`Outcome`] whose code is the
//! process exit status.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use landau_core::coefficients::{CoefficientEngine, CollisionKernel};
use landau_core::diagnostics::{diagnostics_row, DiagnosticsRow, PsiMonitor, DIAGNOSTICS_COLUMNS};
use landau_core::field::{make_bump_sum, make_maxwellian};
use landau_core::grid::{PhaseGrid, SpatialGrid, VelocityGrid};
use landau_core::snapshot::{load_field, save_field};
use landau_core::solver::{positive_part, run_simulation_with, RunEvent, RunStatus};
use landau_core::{DistributionField, Error};
use landau_verify::criteria::{run_suite, Suite};
use landau_verify::uniqueness::uniqueness_contraction_check;
use landau_verify::CheckReport;
use serde_json::json;

use crate::config::{InitialData, RunConfig};

pub const EXIT_OK: i32 = 0;
/// Failed checks and I/O problems.
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ABORT: i32 = 3;
pub const EXIT_INSTABILITY: i32 = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub message: String,
}

impl Outcome {
    fn ok(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_OK,
            message: message.into(),
        }
    }

    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

/// Exit code for a library error.
pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument { .. } | Error::GridMismatch(_) | Error::Format(_) | Error::EmptySample(_) => EXIT_CONFIG,
        Error::Instability { .. } => EXIT_INSTABILITY,
        Error::Io(_) => EXIT_FAILURE,
    }
}

fn from_error(e: Error) -> Outcome {
    Outcome::new(error_code(&e), e.to_string())
}

fn io_failure(what: &Path, e: std::io::Error) -> Outcome {
    Outcome::new(EXIT_FAILURE, format!("{}: {e}", what.display()))
}

pub fn phase_grid(cfg: &RunConfig) -> landau_core::Result<PhaseGrid<f64>> {
    let x = if cfg.dim_x == 0 {
        SpatialGrid::homogeneous()
    } else {
        SpatialGrid::new(cfg.dim_x, cfg.n_x, cfg.l_x)?
    };
    Ok(PhaseGrid::new(x, VelocityGrid::new(cfg.n_v, cfg.l_v)?))
}

/// The configured initial condition. A file carries its own grid.
pub fn initial_field(cfg: &RunConfig) -> landau_core::Result<DistributionField> {
    match &cfg.initial {
        InitialData::Maxwellian { density, temperature } => make_maxwellian(phase_grid(cfg)?, *density, 1.0 / *temperature),
        InitialData::BumpSum(bumps) => make_bump_sum(phase_grid(cfg)?, bumps),
        InitialData::File(p) => load_field(p),
    }
}

pub fn snapshot_name(index: usize) -> String {
    format!("snap_{index:05}.bin")
}

pub fn csv_header() -> String {
    DIAGNOSTICS_COLUMNS.join(",")
}

pub fn csv_line(row: &DiagnosticsRow) -> String {
    row.values().join(",")
}

/// Runs the solver and writes `snapshots/`, `diagnostics.csv` and
/// `summary.json` under the output directory. `summary.json` is written even
/// when the run ends early.
pub fn cmd_run(cfg: &RunConfig) -> Outcome {
    let start = Instant::now();
    let f_in = match initial_field(cfg) {
        Ok(f) => f,
        Err(e) => return from_error(e),
    };
    let out = &cfg.output_dir;
    let snap_dir = out.join("snapshots");
    if let Err(e) = fs::create_dir_all(&snap_dir) {
        return io_failure(&snap_dir, e);
    }
    let csv_path = out.join("diagnostics.csv");
    let mut csv = match fs::File::create(&csv_path) {
        Ok(f) => std::io::BufWriter::new(f),
        Err(e) => return io_failure(&csv_path, e),
    };
    let mut io_error: Option<Outcome> = None;
    if let Err(e) = writeln!(csv, "{}", csv_header()) {
        return io_failure(&csv_path, e);
    }
    let (mut last_t, mut peak_psi, mut peak_linf, mut n_snap) = (f_in.time, 0.0f64, 0.0f64, 0usize);
    let result = run_simulation_with(&f_in, &cfg.solver, |ev| {
        if io_error.is_some() {
            return;
        }
        match ev {
            RunEvent::Row(row) => {
                last_t = row.t;
                peak_psi = peak_psi.max(row.psi);
                peak_linf = peak_linf.max(row.linfty_k);
                if let Err(e) = writeln!(csv, "{}", csv_line(row)) {
                    io_error = Some(io_failure(&csv_path, e));
                }
            }
            RunEvent::Snapshot(f) => {
                let p = snap_dir.join(snapshot_name(n_snap));
                n_snap += 1;
                if let Err(e) = save_field(&p, f) {
                    io_error = Some(Outcome::new(EXIT_FAILURE, format!("{}: {e}", p.display())));
                }
            }
        }
    });
    if let Err(e) = csv.flush() {
        return io_failure(&csv_path, e);
    }
    if let Some(o) = io_error {
        return o;
    }
    let (status, outcome, steps) = match result {
        Ok(rec) => {
            last_t = rec.times.last().copied().unwrap_or(last_t);
            peak_psi = peak_psi.max(rec.peak_psi);
            peak_linf = peak_linf.max(rec.peak_linfty_k);
            match rec.status {
                RunStatus::Completed => ("completed", Outcome::ok(format!("completed at t = {last_t}")), rec.steps),
                RunStatus::ContinuationAbort { time, psi } => (
                    "continuation-abort",
                    Outcome::new(EXIT_ABORT, format!("psi = {psi} exceeded the threshold at t = {time}")),
                    rec.steps,
                ),
            }
        }
        Err(e) => match e {
            Error::Instability { time, .. } => {
                last_t = time;
                ("instability", from_error(e), 0)
            }
            other => return from_error(other),
        },
    };
    let summary = json!({
        "final_time": last_t,
        "status": status,
        "peak_psi": peak_psi,
        "peak_linfty_k": peak_linf,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "steps": steps,
        "snapshots": n_snap,
        "seed": cfg.seed,
        "gamma": cfg.solver.gamma,
        "k_decay": cfg.solver.k_decay,
    });
    let sp = out.join("summary.json");
    if let Err(e) = fs::write(&sp, serde_json::to_string_pretty(&summary).expect("summary serializes")) {
        return io_failure(&sp, e);
    }
    outcome
}

/// Diagnostics CSV (header plus one row per snapshot, in the given order).
pub fn diagnose(cfg: &RunConfig, snapshots: &[PathBuf]) -> landau_core::Result<String> {
    let kernel = CollisionKernel::new(cfg.solver.gamma)?;
    let engine = CoefficientEngine::new();
    let mut monitor = PsiMonitor::new(cfg.solver.psi_choice()?);
    let mut out = csv_header();
    out.push('\n');
    for p in snapshots {
        let f = positive_part(&load_field::<f64>(p)?);
        let coeffs = engine.compute_all(&f, &kernel)?;
        let row = diagnostics_row(&f, &coeffs, &mut monitor, cfg.solver.k_decay, 0.0, &cfg.solver.diagnostics)?;
        out.push_str(&csv_line(&row));
        out.push('\n');
    }
    Ok(out)
}

pub fn cmd_diagnose(cfg: &RunConfig, snapshots: &[PathBuf]) -> Outcome {
    match diagnose(cfg, snapshots) {
        Ok(csv) => Outcome::ok(csv),
        Err(e) => from_error(e),
    }
}

/// Runs a suite, writes `verify.json` and reports one line per check.
pub fn verify(cfg: &RunConfig, suite: Option<Suite>) -> Vec<CheckReport> {
    run_suite(suite.unwrap_or(cfg.suite), cfg.seed)
}

pub fn cmd_verify(cfg: &RunConfig, suite: Option<Suite>) -> Outcome {
    let reports = verify(cfg, suite);
    if let Err(e) = fs::create_dir_all(&cfg.output_dir) {
        return io_failure(&cfg.output_dir, e);
    }
    let p = cfg.output_dir.join("verify.json");
    if let Err(e) = fs::write(&p, serde_json::to_string_pretty(&reports).expect("reports serialize")) {
        return io_failure(&p, e);
    }
    let lines: Vec<String> = reports.iter().map(CheckReport::summary_line).collect();
    let code = if reports.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_FAILURE };
    Outcome::new(code, lines.join("\n"))
}

/// Snapshot files of a run directory, in name order. Accepts the run
/// directory itself or its `snapshots/` subdirectory.
pub fn snapshot_paths(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let sub = dir.join("snapshots");
    let dir = if sub.is_dir() { sub } else { dir.to_path_buf() };
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn compare(dir_a: &Path, dir_b: &Path, cfg: &RunConfig) -> Result<CheckReport, Outcome> {
    let load = |d: &Path| -> Result<Vec<DistributionField>, Outcome> {
        let paths = snapshot_paths(d).map_err(|e| io_failure(d, e))?;
        if paths.is_empty() {
            return Err(Outcome::new(EXIT_CONFIG, format!("{}: no snapshots", d.display())));
        }
        paths.iter().map(|p| load_field(p).map_err(from_error)).collect()
    };
    let (a, b) = (load(dir_a)?, load(dir_b)?);
    Ok(uniqueness_contraction_check(
        &a,
        &b,
        cfg.solver.diagnostics.holder_alpha,
        cfg.compare_c,
        cfg.compare_tol,
    ))
}

pub fn cmd_compare(dir_a: &Path, dir_b: &Path, cfg: &RunConfig) -> Outcome {
    match compare(dir_a, dir_b, cfg) {
        Ok(r) => Outcome::new(if r.pass { EXIT_OK } else { EXIT_FAILURE }, r.to_json()),
        Err(o) => o,
    }
}
