use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tilesim::analytics::{min_estimate1, min_estimate2};
use tilesim::tile::TileGeometry;
use tilesim::workload::{
    generate, load_trace, measured_cf, measured_reuse, save_trace_string, LocalityParams,
};

use tilesim_cli::config::{apply_overrides, Diagnostic, ExperimentConfig, Severity};
use tilesim_cli::presets;
use tilesim_cli::runner::{self, RunError, RunOptions};

const EXIT_OK: u8 = 0;
const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "tilesim",
    about = "Cycle-level warp-scheduling simulator for a tile-based-rendering GPU core",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment and write its metrics table.
    Run(RunArgs),
    /// Validate a config; print diagnostics without running anything.
    Validate(ConfigArgs),
    /// Generate or inspect trace files.
    Trace {
        #[command(subcommand)]
        cmd: TraceCmd,
    },
    /// Per-cycle chronograph of one experiment arm (small tiles only).
    Chrono(ChronoArgs),
    /// List shipped presets or print one as TOML.
    Preset {
        #[command(subcommand)]
        cmd: PresetCmd,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config file (TOML).
    config: Option<PathBuf>,
    /// Use a shipped preset instead of a file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Override a config key by dotted path, e.g. --set core.max_warps=48.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Allow core parameters outside the studied sweep (pipeline width 2/4).
    #[arg(long)]
    allow_nonpaper: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory (default: config, then this variable, then cwd).
    #[arg(long, env = "TILESIM_OUTPUT_DIR")]
    out: Option<PathBuf>,
    /// Run arms one after another instead of in parallel.
    #[arg(long)]
    serial: bool,
    /// Also write per-arm chronograph CSVs (tiles up to 64 warps).
    #[arg(long)]
    emit_chrono: bool,
}

#[derive(Subcommand)]
enum TraceCmd {
    /// Generate a synthetic trace file.
    Gen(TraceGenArgs),
    /// Print summary statistics of a trace file.
    Inspect { file: PathBuf },
}

#[derive(Args)]
struct TraceGenArgs {
    #[arg(long, default_value_t = 32)]
    width: u32,
    #[arg(long, default_value_t = 32)]
    height: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2.5)]
    blocks_per_access: f64,
    #[arg(long)]
    reuse_target: Option<f64>,
    #[arg(long, default_value_t = 0.15)]
    mem_instr_ratio: f64,
    #[arg(long, default_value_t = 1.0)]
    texture_scale: f64,
    #[arg(long, default_value_t = 16)]
    texels_per_block: u32,
    /// Output file (stdout when omitted).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChronoArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Arm label to trace (default: every arm).
    #[arg(long)]
    arm: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    max_cycles: u64,
    /// `text` or `csv`.
    #[arg(long, default_value = "text")]
    format: String,
    /// Output file (stdout when omitted; with several arms, a label header
    /// separates the tables).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PresetCmd {
    List,
    Show { name: String },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Validate(args) => cmd_validate(args),
        Cmd::Trace { cmd } => cmd_trace(cmd),
        Cmd::Chrono(args) => cmd_chrono(args),
        Cmd::Preset { cmd } => cmd_preset(cmd),
    }
}

/// Resolve a config from file or preset, apply --set overrides, and report
/// the directory relative paths resolve against.
fn load_config(args: &ConfigArgs) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
    let (text, base_dir) = match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
            let dir = path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            (text, dir)
        }
        (None, Some(name)) => {
            let cfg = presets::preset(name).ok_or_else(|| {
                anyhow::anyhow!(
                    "unknown preset `{name}` (available: {})",
                    presets::PRESET_NAMES.join(", ")
                )
            })?;
            (cfg.to_toml_string(), PathBuf::from("."))
        }
        (None, None) => anyhow::bail!("pass a config file or --preset <name>"),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let text = apply_overrides(&text, &args.set)?;
    let mut cfg = ExperimentConfig::from_toml_str(&text)
        .map_err(|e| anyhow::anyhow!("config parse error: {e}"))?;
    if args.allow_nonpaper {
        cfg.allow_nonpaper = true;
    }
    Ok((cfg, base_dir))
}

fn print_diags(diags: &[Diagnostic]) {
    for d in diags {
        match d.severity {
            Severity::Error => eprintln!("{d}"),
            Severity::Warning => eprintln!("{d}"),
        }
    }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<u8> {
    let (cfg, base_dir) = match load_config(&args.config) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let opts = RunOptions {
        out_dir: args.out,
        serial: args.serial,
        emit_chronographs: args.emit_chrono,
        dry_run: false,
    };
    match runner::run_experiment(&cfg, &base_dir, &opts) {
        Ok(summary) => {
            print!("{}", summary.table.to_text());
            if let Some(p) = &summary.csv_path {
                eprintln!("wrote {}", p.display());
            }
            for p in &summary.chronograph_paths {
                eprintln!("wrote {}", p.display());
            }
            Ok(EXIT_OK)
        }
        Err(RunError::Invalid(diags)) => {
            print_diags(&diags);
            Ok(EXIT_VALIDATION)
        }
        Err(e @ RunError::Aborted { .. }) => {
            eprintln!("error: {e}");
            Ok(EXIT_RUNTIME)
        }
        Err(RunError::Io(e)) => Err(e),
    }
}

fn cmd_validate(args: ConfigArgs) -> anyhow::Result<u8> {
    let (cfg, _) = match load_config(&args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let diags = cfg.validate();
    print_diags(&diags);
    if ExperimentConfig::has_errors(&diags) {
        Ok(EXIT_VALIDATION)
    } else {
        println!("ok");
        Ok(EXIT_OK)
    }
}

fn cmd_trace(cmd: TraceCmd) -> anyhow::Result<u8> {
    match cmd {
        TraceCmd::Gen(args) => {
            let geom = TileGeometry::new(args.width, args.height)?;
            let params = LocalityParams {
                texels_per_block: args.texels_per_block,
                texture_scale: args.texture_scale,
                blocks_per_access: args.blocks_per_access,
                reuse_target: args.reuse_target,
                mem_instr_ratio: args.mem_instr_ratio,
                seed: args.seed,
            };
            let trace = generate(geom, &params)?;
            let text = save_trace_string(&trace);
            match args.out {
                Some(path) => std::fs::write(&path, text)?,
                None => print!("{text}"),
            }
            Ok(EXIT_OK)
        }
        TraceCmd::Inspect { file } => {
            let text = std::fs::read_to_string(&file)?;
            let trace = match load_trace(text.as_bytes()) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(EXIT_VALIDATION);
                }
            };
            let geom = trace.geometry();
            println!(
                "tile          {}x{} quads ({} warps)",
                geom.width_quads(),
                geom.height_quads(),
                geom.warp_count()
            );
            println!("instructions  {}", trace.total_instructions());
            println!("mem accesses  {}", trace.total_accesses());
            println!("unique blocks {}", trace.unique_blocks().len());
            if let Ok(cf) = measured_cf(&trace) {
                println!("cf            {cf:.4}");
                println!("reuse         {:.4}", measured_reuse(&trace)?);
                println!("size_ratio    {:.4}", min_estimate1(&trace));
                println!("size_ratio/cf {:.4}", min_estimate2(&trace, cf));
            }
            Ok(EXIT_OK)
        }
    }
}

fn cmd_chrono(args: ChronoArgs) -> anyhow::Result<u8> {
    let (cfg, base_dir) = match load_config(&args.config) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let diags = cfg.validate();
    if ExperimentConfig::has_errors(&diags) {
        print_diags(&diags);
        return Ok(EXIT_VALIDATION);
    }
    let jobs = match runner::build_jobs(&cfg, &base_dir) {
        Ok(j) => j,
        Err(RunError::Invalid(diags)) => {
            print_diags(&diags);
            return Ok(EXIT_VALIDATION);
        }
        Err(e) => anyhow::bail!("{e}"),
    };
    let selected: Vec<_> = jobs
        .iter()
        .filter(|j| args.arm.as_deref().map_or(true, |a| j.arm_label == a))
        .collect();
    if selected.is_empty() {
        eprintln!("error: no arm matches `{}`", args.arm.as_deref().unwrap_or(""));
        return Ok(EXIT_VALIDATION);
    }
    let mut out = String::new();
    for job in selected {
        let ch = match runner::job_chronograph(job, args.max_cycles) {
            Ok(Some(ch)) => ch,
            Ok(None) => continue,
            Err(e @ RunError::Aborted { .. }) => {
                eprintln!("error: {e}");
                return Ok(EXIT_RUNTIME);
            }
            Err(e) => anyhow::bail!("{e}"),
        };
        if args.arm.is_none() {
            out.push_str(&format!("# arm: {}\n", job.row_label));
        }
        match args.format.as_str() {
            "csv" => out.push_str(&ch.to_csv()),
            "text" => out.push_str(&ch.to_text()),
            other => anyhow::bail!("unknown format `{other}` (expected text or csv)"),
        }
    }
    match args.out {
        Some(path) => std::fs::write(&path, out)?,
        None => print!("{out}"),
    }
    Ok(EXIT_OK)
}

fn cmd_preset(cmd: PresetCmd) -> anyhow::Result<u8> {
    match cmd {
        PresetCmd::List => {
            for name in presets::PRESET_NAMES {
                println!("{name}");
            }
            Ok(EXIT_OK)
        }
        PresetCmd::Show { name } => match presets::preset(&name) {
            Some(cfg) => {
                print!("{}", cfg.to_toml_string());
                Ok(EXIT_OK)
            }
            None => {
                eprintln!(
                    "error: unknown preset `{name}` (available: {})",
                    presets::PRESET_NAMES.join(", ")
                );
                Ok(EXIT_VALIDATION)
            }
        },
    }
}
