//! Declarative experiment configuration: TOML schema, validation with
//! named-field diagnostics, and expansion into concrete simulation jobs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use tilesim::coresim::CoreConfig;
use tilesim::error::Error as CoreError;
use tilesim::memhier::{CacheConfig, HierarchyConfig};
use tilesim::sched::{SchedulerPolicy, SelectionPattern, WatchLevel};
use tilesim::tile::{TileGeometry, TileTrace};
use tilesim::workload::{generate, load_trace, LocalityParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub name: Option<String>,
    /// Permit core parameters outside the studied sweep (width 2/4).
    #[serde(default)]
    pub allow_nonpaper: bool,
    /// One simulation per (arm, seed). Ignored for trace workloads.
    #[serde(default)]
    pub seeds: Vec<u64>,
    pub workload: WorkloadSpec,
    #[serde(default)]
    pub core: CoreConfig,
    #[serde(default)]
    pub hierarchy: Option<HierarchySection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub arms: Vec<ArmSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WorkloadSpec {
    Generate(GenerateSpec),
    Trace(TraceSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateSpec {
    pub width_quads: u32,
    pub height_quads: u32,
    #[serde(default = "defaults::texels_per_block")]
    pub texels_per_block: u32,
    #[serde(default = "defaults::texture_scale")]
    pub texture_scale: f64,
    #[serde(default = "defaults::blocks_per_access")]
    pub blocks_per_access: f64,
    #[serde(default)]
    pub reuse_target: Option<f64>,
    #[serde(default = "defaults::mem_instr_ratio")]
    pub mem_instr_ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn texels_per_block() -> u32 {
        16
    }
    pub fn texture_scale() -> f64 {
        1.0
    }
    pub fn blocks_per_access() -> f64 {
        2.5
    }
    pub fn mem_instr_ratio() -> f64 {
        0.15
    }
    pub fn cf() -> f64 {
        2.5
    }
    pub fn threshold() -> f64 {
        4.0
    }
}

impl GenerateSpec {
    pub fn params(&self, seed: u64) -> LocalityParams {
        LocalityParams {
            texels_per_block: self.texels_per_block,
            texture_scale: self.texture_scale,
            blocks_per_access: self.blocks_per_access,
            reuse_target: self.reuse_target,
            mem_instr_ratio: self.mem_instr_ratio,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub inline: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct HierarchySection {
    #[serde(default)]
    pub main_memory_latency: Option<u32>,
    /// Explicit level chain (front first); omitted means the width-driven
    /// default (L0+L1+L2 at width 4, L1+L2 otherwise).
    #[serde(default)]
    pub levels: Option<Vec<CacheConfig>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub emit_chronographs: bool,
    #[serde(default)]
    pub chronograph_max_cycles: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmSpec {
    pub label: String,
    /// `baseline`, `fullpriority`, `freemshr` (with `n`, or `freemshr10`),
    /// or `wasp`.
    pub policy: String,
    #[serde(default)]
    pub pattern: Option<String>,
    #[serde(default = "defaults::cf")]
    pub cf: f64,
    #[serde(default = "defaults::threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub n: Option<u32>,
    /// `auto` (front level) or an explicit level name `l0`/`l1`/`l2`.
    #[serde(default)]
    pub watch_level: Option<String>,
    /// Exactly one arm carries the speedup normalization.
    #[serde(default)]
    pub baseline: bool,
    #[serde(default)]
    pub max_warps: Option<u32>,
    #[serde(default)]
    pub pipeline_width: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: `{}`: {}", self.field, self.message)
    }
}

fn err(field: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        severity: Severity::Error,
        field: field.to_string(),
        message: message.into(),
    }
}

fn warn(field: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        severity: Severity::Warning,
        field: field.to_string(),
        message: message.into(),
    }
}

fn push_core_error(diags: &mut Vec<Diagnostic>, e: CoreError) {
    match e {
        CoreError::Config { field, msg } => diags.push(err(&field, msg)),
        other => diags.push(err("config", other.to_string())),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn geometry(&self) -> Option<TileGeometry> {
        match &self.workload {
            WorkloadSpec::Generate(g) => TileGeometry::new(g.width_quads, g.height_quads).ok(),
            WorkloadSpec::Trace(_) => None, // known only after loading
        }
    }

    /// Effective core config for one arm (per-arm overrides applied).
    pub fn core_for(&self, arm: &ArmSpec) -> CoreConfig {
        let mut core = self.core;
        if let Some(m) = arm.max_warps {
            core.max_warps = m;
        }
        if let Some(w) = arm.pipeline_width {
            core.pipeline_width = w;
        }
        core
    }

    /// Effective hierarchy for one arm: explicit levels when given, else the
    /// width-driven default, with an optional memory-latency override.
    pub fn hierarchy_for(&self, arm: &ArmSpec) -> HierarchyConfig {
        let core = self.core_for(arm);
        let mut cfg = match &self.hierarchy {
            Some(section) => match &section.levels {
                Some(levels) => HierarchyConfig {
                    levels: levels.clone(),
                    main_memory_latency: section.main_memory_latency.unwrap_or(70),
                },
                None => {
                    let mut auto = HierarchyConfig::auto_for_width(core.pipeline_width);
                    if let Some(lat) = section.main_memory_latency {
                        auto.main_memory_latency = lat;
                    }
                    auto
                }
            },
            None => HierarchyConfig::auto_for_width(core.pipeline_width),
        };
        if cfg.main_memory_latency == 0 {
            cfg.main_memory_latency = 1;
        }
        cfg
    }

    fn watch_level_for(&self, arm: &ArmSpec, hier: &HierarchyConfig) -> Result<WatchLevel, String> {
        match arm.watch_level.as_deref() {
            None | Some("auto") => Ok(WatchLevel::Auto),
            Some(name) => {
                let upper = name.to_ascii_uppercase();
                hier.level_names()
                    .iter()
                    .position(|n| *n == upper)
                    .map(WatchLevel::Index)
                    .ok_or_else(|| {
                        format!(
                            "level `{name}` not in this hierarchy (levels: {})",
                            hier.level_names().join("/")
                        )
                    })
            }
        }
    }

    /// Build the scheduler policy of one arm against its hierarchy. The run
    /// seed feeds the random selection pattern.
    pub fn policy_for(&self, arm: &ArmSpec, seed: u64) -> Result<SchedulerPolicy, Diagnostic> {
        let hier = self.hierarchy_for(arm);
        let field = format!("arms.{}", arm.label);
        let pattern = match &arm.pattern {
            Some(p) => Some(
                SelectionPattern::parse(p, seed)
                    .map_err(|e| err(&format!("{field}.pattern"), e.to_string()))?,
            ),
            None => None,
        };
        let watch = self
            .watch_level_for(arm, &hier)
            .map_err(|m| err(&format!("{field}.watch_level"), m))?;
        let policy = arm.policy.to_ascii_lowercase();
        let need_pattern = |p: Option<SelectionPattern>| {
            p.ok_or_else(|| {
                err(
                    &format!("{field}.pattern"),
                    format!("policy `{}` needs a selection pattern", arm.policy),
                )
            })
        };
        let mut built = match policy.as_str() {
            "baseline" => SchedulerPolicy::baseline(),
            "fullpriority" => SchedulerPolicy::fullpriority(need_pattern(pattern)?),
            "wasp" => SchedulerPolicy::wasp(need_pattern(pattern)?, arm.cf, arm.threshold),
            other => {
                if let Some(rest) = other.strip_prefix("freemshr") {
                    let n = if rest.is_empty() {
                        arm.n.ok_or_else(|| {
                            err(
                                &format!("{field}.n"),
                                "policy `freemshr` needs `n` (or spell it freemshr<N>)",
                            )
                        })?
                    } else {
                        rest.parse().map_err(|_| {
                            err(
                                &format!("{field}.policy"),
                                format!("bad freemshr count in `{}`", arm.policy),
                            )
                        })?
                    };
                    SchedulerPolicy::freemshr(need_pattern(pattern)?, n)
                } else {
                    return Err(err(
                        &format!("{field}.policy"),
                        format!(
                            "unknown policy `{}` (expected baseline, fullpriority, freemshr<N> or wasp)",
                            arm.policy
                        ),
                    ));
                }
            }
        };
        built.watch_level = watch;
        Ok(built)
    }

    /// Check everything statically checkable. Warnings do not block a run.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        if self.schema != SCHEMA_VERSION {
            diags.push(err(
                "schema",
                format!("unsupported schema {} (this build reads {SCHEMA_VERSION})", self.schema),
            ));
        }
        if self.arms.is_empty() {
            diags.push(err("arms", "at least one arm is required"));
        }
        let baseline_count = self.arms.iter().filter(|a| a.baseline).count();
        if self.arms.len() > 1 && baseline_count != 1 {
            diags.push(err(
                "arms",
                format!("exactly one arm must set baseline = true (found {baseline_count})"),
            ));
        }
        let mut labels = std::collections::BTreeSet::new();
        for arm in &self.arms {
            if !labels.insert(arm.label.as_str()) {
                diags.push(err("arms", format!("duplicate label `{}`", arm.label)));
            }
        }

        match &self.workload {
            WorkloadSpec::Generate(g) => {
                if let Err(e) = TileGeometry::new(g.width_quads, g.height_quads) {
                    push_core_error(&mut diags, e);
                }
                if let Err(e) = g.params(g.seed).validate() {
                    push_core_error(&mut diags, e);
                }
            }
            WorkloadSpec::Trace(t) => {
                if t.path.is_none() && t.inline.is_none() {
                    diags.push(err("workload.path", "trace workload needs `path` or `inline`"));
                }
                if !self.seeds.is_empty() && self.seeds.len() > 1 {
                    diags.push(warn(
                        "seeds",
                        "trace workloads run once per arm; extra seeds are ignored",
                    ));
                }
            }
        }

        for arm in &self.arms {
            let field = format!("arms.{}", arm.label);
            let core = self.core_for(arm);
            if let Err(e) = core.validate() {
                push_core_error(&mut diags, e);
            }
            if !matches!(core.pipeline_width, 2 | 4) && !self.allow_nonpaper {
                diags.push(err(
                    &format!("{field}.pipeline_width"),
                    format!(
                        "width {} is outside the studied sweep {{2, 4}}; set allow_nonpaper = true (or pass --allow-nonpaper) to run it anyway",
                        core.pipeline_width
                    ),
                ));
            }
            let hier = self.hierarchy_for(arm);
            if let Err(e) = hier.validate() {
                push_core_error(&mut diags, e);
            }
            match self.policy_for(arm, self.seeds.first().copied().unwrap_or(0)) {
                Ok(policy) => {
                    if let (Some(pattern), Some(geom)) = (policy.pattern, self.geometry()) {
                        if pattern.degenerate_for(geom) {
                            diags.push(warn(
                                &format!("{field}.pattern"),
                                format!(
                                    "{} exceeds both dimensions of a {}x{} tile; only quad (0,0) is selected",
                                    pattern.label(),
                                    geom.width_quads(),
                                    geom.height_quads()
                                ),
                            ));
                        }
                    }
                }
                Err(d) => diags.push(d),
            }
        }
        diags
    }

    pub fn has_errors(diags: &[Diagnostic]) -> bool {
        diags.iter().any(|d| d.severity == Severity::Error)
    }

    /// Load (or generate) the workload trace for one run seed.
    pub fn build_trace(&self, seed: u64, base_dir: &Path) -> anyhow::Result<Arc<TileTrace>> {
        match &self.workload {
            WorkloadSpec::Generate(g) => {
                let geom = TileGeometry::new(g.width_quads, g.height_quads)?;
                Ok(Arc::new(generate(geom, &g.params(seed))?))
            }
            WorkloadSpec::Trace(t) => {
                let text = match (&t.inline, &t.path) {
                    (Some(s), _) => s.clone(),
                    (None, Some(p)) => {
                        let full = if p.is_absolute() {
                            p.clone()
                        } else {
                            base_dir.join(p)
                        };
                        std::fs::read_to_string(&full)
                            .map_err(|e| anyhow::anyhow!("reading {}: {e}", full.display()))?
                    }
                    (None, None) => anyhow::bail!("trace workload needs `path` or `inline`"),
                };
                Ok(Arc::new(load_trace(text.as_bytes())?))
            }
        }
    }

    /// Run seeds: the configured list, or the single workload seed.
    pub fn effective_seeds(&self) -> Vec<u64> {
        match &self.workload {
            WorkloadSpec::Trace(_) => vec![0],
            WorkloadSpec::Generate(g) => {
                if self.seeds.is_empty() {
                    vec![g.seed]
                } else {
                    self.seeds.clone()
                }
            }
        }
    }

    pub fn baseline_label(&self) -> Option<&str> {
        if self.arms.len() == 1 {
            return Some(&self.arms[0].label);
        }
        self.arms
            .iter()
            .find(|a| a.baseline)
            .map(|a| a.label.as_str())
    }

    pub fn experiment_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| "experiment".to_string())
    }
}

/// Apply `--set path=value` overrides onto the raw TOML tree before
/// deserialization. Paths are dotted keys with numeric segments indexing
/// arrays, e.g. `core.max_warps=48` or `arms.1.threshold=6`.
pub fn apply_overrides(text: &str, sets: &[String]) -> anyhow::Result<String> {
    if sets.is_empty() {
        return Ok(text.to_string());
    }
    let mut root: toml::Value = toml::from_str(text)?;
    for setting in sets {
        let (path, raw) = setting
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("--set expects key.path=value, got `{setting}`"))?;
        let value = parse_toml_scalar(raw);
        let mut node = &mut root;
        let segments: Vec<&str> = path.split('.').collect();
        for (i, seg) in segments.iter().enumerate() {
            let last = i == segments.len() - 1;
            node = if let Ok(index) = seg.parse::<usize>() {
                match node {
                    toml::Value::Array(arr) => {
                        if index >= arr.len() {
                            anyhow::bail!(
                                "`{path}`: index {index} out of bounds ({} entries)",
                                arr.len()
                            );
                        }
                        if last {
                            arr[index] = value.clone();
                            break;
                        }
                        &mut arr[index]
                    }
                    _ => anyhow::bail!("`{path}`: segment `{seg}` indexes a non-array"),
                }
            } else {
                match node {
                    toml::Value::Table(table) => {
                        if last {
                            table.insert(seg.to_string(), value.clone());
                            break;
                        }
                        table
                            .entry(seg.to_string())
                            .or_insert(toml::Value::Table(Default::default()))
                    }
                    _ => anyhow::bail!("`{path}`: segment `{seg}` keys a non-table"),
                }
            };
        }
    }
    Ok(toml::to_string(&root)?)
}

fn parse_toml_scalar(raw: &str) -> toml::Value {
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    // bracketed lists pass through the TOML parser
    if raw.starts_with('[') {
        if let Ok(v) = toml::from_str::<toml::Value>(&format!("x = {raw}")) {
            if let Some(x) = v.get("x") {
                return x.clone();
            }
        }
    }
    toml::Value::String(raw.to_string())
}
