//! Experiment orchestration: expand (arms x seeds) into jobs, run them
//! (serially or in parallel; results are identical), aggregate, and write
//! artifacts.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use tilesim::analytics::{aggregate, MetricsTable};
use tilesim::coresim::{chronograph, simulate, Chronograph, CoreConfig, SimReport};
use tilesim::error::Error as CoreError;
use tilesim::memhier::HierarchyConfig;
use tilesim::sched::SchedulerPolicy;
use tilesim::tile::TileTrace;

use crate::config::{Diagnostic, ExperimentConfig};

#[derive(Debug, Clone)]
pub struct Job {
    pub row_label: String,
    pub arm_label: String,
    pub seed: u64,
    pub trace: Arc<TileTrace>,
    pub policy: SchedulerPolicy,
    pub core: CoreConfig,
    pub hier: HierarchyConfig,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub serial: bool,
    pub emit_chronographs: bool,
    /// Skip writing any files (used by validation-only paths and tests).
    pub dry_run: bool,
}

#[derive(Debug)]
pub struct RunSummary {
    pub table: MetricsTable,
    pub reports: Vec<(String, SimReport)>,
    pub csv_path: Option<PathBuf>,
    pub text_path: Option<PathBuf>,
    pub chronograph_paths: Vec<PathBuf>,
}

#[derive(Debug)]
pub enum RunError {
    /// Config failed validation; carries every diagnostic.
    Invalid(Vec<Diagnostic>),
    /// A simulation aborted (livelock or internal error); names the row.
    Aborted { row: String, source: CoreError },
    Io(anyhow::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Invalid(diags) => {
                writeln!(f, "configuration is invalid:")?;
                for d in diags {
                    writeln!(f, "  {d}")?;
                }
                Ok(())
            }
            RunError::Aborted { row, source } => {
                write!(f, "run `{row}` aborted: {source}")
            }
            RunError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

/// Expand the configured experiment into an ordered job list. Deterministic:
/// seed-major, then config arm order.
pub fn build_jobs(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Vec<Job>, RunError> {
    let seeds = cfg.effective_seeds();
    let multi_seed = seeds.len() > 1;
    let mut jobs = Vec::new();
    for &seed in &seeds {
        let trace = cfg.build_trace(seed, base_dir).map_err(RunError::Io)?;
        for arm in &cfg.arms {
            let policy = cfg
                .policy_for(arm, seed)
                .map_err(|d| RunError::Invalid(vec![d]))?;
            let row_label = if multi_seed {
                format!("{}@s{}", arm.label, seed)
            } else {
                arm.label.clone()
            };
            jobs.push(Job {
                row_label,
                arm_label: arm.label.clone(),
                seed,
                trace: Arc::clone(&trace),
                policy,
                core: cfg.core_for(arm),
                hier: cfg.hierarchy_for(arm),
            });
        }
    }
    Ok(jobs)
}

fn run_job(job: &Job) -> Result<SimReport, RunError> {
    simulate(&job.trace, &job.policy, &job.core, &job.hier).map_err(|e| RunError::Aborted {
        row: job.row_label.clone(),
        source: e,
    })
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Run every job, aggregate per seed against the baseline arm, and write the
/// CSV/text artifacts. Exit-status semantics: `Invalid` maps to a validation
/// failure, `Aborted` to a runtime abort.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    opts: &RunOptions,
) -> Result<RunSummary, RunError> {
    let diags = cfg.validate();
    for d in diags.iter().filter(|d| d.severity == crate::config::Severity::Warning) {
        log::warn!("{d}");
    }
    if ExperimentConfig::has_errors(&diags) {
        return Err(RunError::Invalid(diags));
    }

    let jobs = build_jobs(cfg, base_dir)?;
    let results: Vec<Result<SimReport, RunError>> = if opts.serial {
        jobs.iter().map(run_job).collect()
    } else {
        jobs.par_iter().map(run_job).collect()
    };
    let mut reports = Vec::with_capacity(jobs.len());
    for (job, result) in jobs.iter().zip(results) {
        reports.push((job.row_label.clone(), result?));
    }

    // aggregate per seed so speedups normalize against the same workload
    let baseline_label = cfg
        .baseline_label()
        .ok_or_else(|| RunError::Invalid(vec![crate::config::Diagnostic {
            severity: crate::config::Severity::Error,
            field: "arms".into(),
            message: "no baseline arm".into(),
        }]))?;
    let arms_per_seed = cfg.arms.len();
    let mut table = MetricsTable::default();
    for (chunk_idx, chunk) in reports.chunks(arms_per_seed).enumerate() {
        let seed_runs: Vec<(String, SimReport)> = chunk.to_vec();
        let base_row = jobs[chunk_idx * arms_per_seed..]
            .iter()
            .take(arms_per_seed)
            .find(|j| j.arm_label == baseline_label)
            .map(|j| j.row_label.clone())
            .expect("baseline arm present in every seed group");
        let sub = aggregate(&seed_runs, &base_row).map_err(|e| RunError::Aborted {
            row: base_row.clone(),
            source: e,
        })?;
        table.rows.extend(sub.rows);
    }

    let mut summary = RunSummary {
        table,
        reports,
        csv_path: None,
        text_path: None,
        chronograph_paths: Vec::new(),
    };

    if !opts.dry_run {
        let out_dir = opts
            .out_dir
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| RunError::Io(anyhow::anyhow!("creating {}: {e}", out_dir.display())))?;
        let name = cfg.experiment_name();
        let csv_path = out_dir.join(format!("{name}.csv"));
        std::fs::write(&csv_path, summary.table.to_csv()).map_err(|e| RunError::Io(e.into()))?;
        let text_path = out_dir.join(format!("{name}.txt"));
        std::fs::write(&text_path, summary.table.to_text()).map_err(|e| RunError::Io(e.into()))?;
        summary.csv_path = Some(csv_path);
        summary.text_path = Some(text_path);

        if opts.emit_chronographs || cfg.output.emit_chronographs {
            let max_cycles = cfg.output.chronograph_max_cycles.unwrap_or(100_000);
            for job in &jobs {
                match job_chronograph(job, max_cycles) {
                    Ok(Some(ch)) => {
                        let path =
                            out_dir.join(format!("{name}__{}.chrono.csv", sanitize(&job.row_label)));
                        std::fs::write(&path, ch.to_csv()).map_err(|e| RunError::Io(e.into()))?;
                        summary.chronograph_paths.push(path);
                    }
                    Ok(None) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(summary)
}

/// Chronograph for one job; None when the tile is too large for the
/// diagnostic (more than 64 warps).
pub fn job_chronograph(job: &Job, max_cycles: u64) -> Result<Option<Chronograph>, RunError> {
    if job.trace.geometry().warp_count() > 64 {
        log::warn!(
            "skipping chronograph for `{}`: {} warps exceed the 64-warp diagnostic bound",
            job.row_label,
            job.trace.geometry().warp_count()
        );
        return Ok(None);
    }
    chronograph(&job.trace, &job.policy, &job.core, &job.hier, max_cycles)
        .map(Some)
        .map_err(|e| RunError::Aborted {
            row: job.row_label.clone(),
            source: e,
        })
}
