//! Shipped experiment presets and the calibrated synthetic workload suite.

use crate::config::{
    ArmSpec, ExperimentConfig, GenerateSpec, HierarchySection, OutputSection, TraceSpec,
    WorkloadSpec,
};
use tilesim::coresim::CoreConfig;
use tilesim::memhier::CacheConfig;

/// The 15-warp worked example: three blocks, 7-cycle memory, 3 MSHRs,
/// one access per cycle.
pub const FIG3_TRACE: &str = include_str!("fig3.trace");

pub const PRESET_NAMES: [&str; 6] = [
    "fig3",
    "policy-compare",
    "sensitivity-width2",
    "sensitivity-width4",
    "mesh-sweep",
    "threshold-sweep",
];

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    match name {
        "fig3" => Some(fig3()),
        "policy-compare" => Some(policy_compare()),
        "sensitivity-width2" => Some(sensitivity(2)),
        "sensitivity-width4" => Some(sensitivity(4)),
        "mesh-sweep" => Some(mesh_sweep()),
        "threshold-sweep" => Some(threshold_sweep()),
        _ => None,
    }
}

fn arm(label: &str, policy: &str) -> ArmSpec {
    ArmSpec {
        label: label.to_string(),
        policy: policy.to_string(),
        pattern: None,
        cf: 2.5,
        threshold: 4.0,
        n: None,
        watch_level: None,
        baseline: false,
        max_warps: None,
        pipeline_width: None,
    }
}

fn patterned(label: &str, policy: &str, pattern: &str) -> ArmSpec {
    ArmSpec {
        pattern: Some(pattern.to_string()),
        ..arm(label, policy)
    }
}

/// Baseline/clustered/spaced runs of the worked 15-warp example. Width-1
/// core so exactly one access reaches the cache per cycle, like the
/// one-column-per-cycle chronograph.
pub fn fig3() -> ExperimentConfig {
    ExperimentConfig {
        schema: 1,
        name: Some("fig3".to_string()),
        allow_nonpaper: true,
        seeds: vec![],
        workload: WorkloadSpec::Trace(TraceSpec {
            path: None,
            inline: Some(FIG3_TRACE.to_string()),
        }),
        core: CoreConfig {
            max_warps: 15,
            pipeline_width: 1,
            ldst_issues_per_cycle: Some(1),
            launches_per_cycle: 1,
        },
        hierarchy: Some(HierarchySection {
            main_memory_latency: Some(7),
            levels: Some(vec![CacheConfig {
                capacity_blocks: 64,
                associativity: 4,
                hit_latency: 0,
                mshr_entries: 3,
            }]),
        }),
        output: OutputSection {
            dir: None,
            emit_chronographs: true,
            chronograph_max_cycles: Some(100),
        },
        arms: vec![
            ArmSpec {
                baseline: true,
                ..arm("baseline", "baseline")
            },
            patterned("clustered", "fullpriority", "cols5"),
            ArmSpec {
                threshold: 1.0,
                ..patterned("spaced", "wasp", "cols5")
            },
        ],
    }
}

/// One representative synthetic tile under the four policies.
pub fn policy_compare() -> ExperimentConfig {
    ExperimentConfig {
        schema: 1,
        name: Some("policy-compare".to_string()),
        allow_nonpaper: false,
        seeds: vec![11],
        workload: WorkloadSpec::Generate(default_tile(15.8, 0.15)),
        core: CoreConfig {
            max_warps: 64,
            pipeline_width: 4,
            ldst_issues_per_cycle: None,
            launches_per_cycle: 1,
        },
        hierarchy: None,
        output: OutputSection::default(),
        arms: vec![
            ArmSpec {
                baseline: true,
                ..arm("baseline", "baseline")
            },
            patterned("fullpriority", "fullpriority", "mesh4"),
            patterned("freemshr10", "freemshr10", "mesh4"),
            patterned("wasp", "wasp", "mesh4"),
        ],
    }
}

/// Occupancy sweep at one pipeline width: baseline and wasp at 28..128
/// resident warps, normalized against the width's optimal baseline.
fn sensitivity(width: u32) -> ExperimentConfig {
    let optimal = if width >= 4 { 64 } else { 48 };
    let mut arms = Vec::new();
    for warps in [28u32, 32, 48, 64, 128] {
        arms.push(ArmSpec {
            baseline: warps == optimal,
            max_warps: Some(warps),
            ..arm(&format!("baseline-{warps}w"), "baseline")
        });
        arms.push(ArmSpec {
            max_warps: Some(warps),
            ..patterned(&format!("wasp-{warps}w"), "wasp", "mesh4")
        });
    }
    ExperimentConfig {
        schema: 1,
        name: Some(format!("sensitivity-width{width}")),
        allow_nonpaper: false,
        seeds: vec![11],
        workload: WorkloadSpec::Generate(default_tile(15.8, 0.15)),
        core: CoreConfig {
            max_warps: optimal,
            pipeline_width: width,
            ldst_issues_per_cycle: None,
            launches_per_cycle: 1,
        },
        hierarchy: None,
        output: OutputSection::default(),
        arms,
    }
}

/// Priority-subset size sweep: mesh edge k in {2, 4, 8, 16}.
pub fn mesh_sweep() -> ExperimentConfig {
    let mut arms = vec![ArmSpec {
        baseline: true,
        ..arm("baseline", "baseline")
    }];
    for k in [2u32, 4, 8, 16] {
        arms.push(patterned(&format!("wasp-mesh{k}"), "wasp", &format!("mesh{k}")));
    }
    ExperimentConfig {
        schema: 1,
        name: Some("mesh-sweep".to_string()),
        allow_nonpaper: false,
        seeds: vec![11],
        workload: WorkloadSpec::Generate(default_tile(15.8, 0.15)),
        core: CoreConfig {
            max_warps: 64,
            pipeline_width: 4,
            ldst_issues_per_cycle: None,
            launches_per_cycle: 1,
        },
        hierarchy: None,
        output: OutputSection::default(),
        arms,
    }
}

/// Launch-gate threshold sweep for wasp.
pub fn threshold_sweep() -> ExperimentConfig {
    let mut arms = vec![ArmSpec {
        baseline: true,
        ..arm("baseline", "baseline")
    }];
    for t in [0u32, 2, 4, 6, 8, 10] {
        arms.push(ArmSpec {
            threshold: t as f64,
            ..patterned(&format!("wasp-t{t}"), "wasp", "mesh4")
        });
    }
    ExperimentConfig {
        schema: 1,
        name: Some("threshold-sweep".to_string()),
        allow_nonpaper: false,
        seeds: vec![11],
        workload: WorkloadSpec::Generate(default_tile(15.8, 0.15)),
        core: CoreConfig {
            max_warps: 64,
            pipeline_width: 4,
            ldst_issues_per_cycle: None,
            launches_per_cycle: 1,
        },
        hierarchy: None,
        output: OutputSection::default(),
        arms,
    }
}

fn default_tile(reuse: f64, mem_instr_ratio: f64) -> GenerateSpec {
    GenerateSpec {
        width_quads: 32,
        height_quads: 32,
        texels_per_block: 16,
        texture_scale: 1.0,
        blocks_per_access: 2.5,
        reuse_target: Some(reuse),
        mem_instr_ratio,
        seed: 0,
    }
}

/// One calibrated synthetic workload: a 32x32-quad tile whose block reuse and
/// memory-instruction ratio mirror a measured application profile.
#[derive(Debug, Clone, Copy)]
pub struct SuiteWorkload {
    pub name: &'static str,
    pub reuse: f64,
    pub mem_instr_ratio: f64,
    pub seed: u64,
}

impl SuiteWorkload {
    pub fn generate_spec(&self) -> GenerateSpec {
        GenerateSpec {
            seed: self.seed,
            ..default_tile(self.reuse, self.mem_instr_ratio)
        }
    }
}

/// Ten synthetic workloads spanning block reuse 3.3..22.9 and
/// memory-instruction ratios 0.07..0.26.
pub fn calibrated_suite() -> Vec<SuiteWorkload> {
    let profiles: [(f64, f64); 10] = [
        (8.1, 0.25),
        (4.8, 0.08),
        (12.3, 0.15),
        (19.8, 0.18),
        (15.8, 0.15),
        (19.3, 0.26),
        (3.3, 0.09),
        (22.9, 0.15),
        (15.8, 0.12),
        (13.9, 0.07),
    ];
    const NAMES: [&str; 10] = [
        "wl01", "wl02", "wl03", "wl04", "wl05", "wl06", "wl07", "wl08", "wl09", "wl10",
    ];
    profiles
        .iter()
        .zip(NAMES)
        .enumerate()
        .map(|(i, (&(reuse, ratio), name))| SuiteWorkload {
            name,
            reuse,
            mem_instr_ratio: ratio,
            seed: 1000 + i as u64,
        })
        .collect()
}
