//! Property tests spanning the core modules.

use std::collections::BTreeSet;

use proptest::prelude::*;

use tilesim::analytics::footprint_ratio;
use tilesim::coresim::{simulate, CoreConfig};
use tilesim::memhier::{AccessKind, CacheConfig, Hierarchy, HierarchyConfig};
use tilesim::sched::{SchedulerPolicy, SelectionPattern};
use tilesim::tile::{MemBlockId, QuadCoord, TileGeometry, TileTrace, WarpId};
use tilesim::workload::{generate, measured_cf, LocalityParams};

fn geom(w: u32, h: u32) -> TileGeometry {
    TileGeometry::new(w, h).unwrap()
}

proptest! {
    #[test]
    fn scanline_numbering_is_a_bijection(w in 1u32..=64, h in 1u32..=64) {
        let g = geom(w, h);
        let mut seen = vec![false; g.warp_count() as usize];
        for y in 0..h {
            for x in 0..w {
                let c = QuadCoord { x, y };
                let id = g.warp_of(c).unwrap();
                prop_assert!(!seen[id.0 as usize]);
                seen[id.0 as usize] = true;
                prop_assert_eq!(g.coord_of(id).unwrap(), c);
            }
        }
        prop_assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn unique_blocks_is_order_insensitive(seed in 0u64..1000) {
        let params = LocalityParams { seed, reuse_target: Some(4.0), ..Default::default() };
        let g = geom(8, 8);
        let trace = generate(g, &params).unwrap();
        let baseline = trace.unique_blocks();

        // rebuild with each warp's access list reversed (slots renumbered)
        let mut permuted = TileTrace::new(g);
        for w in g.warps() {
            let mut blocks: Vec<MemBlockId> = trace.accesses_of(w).iter().map(|a| a.block).collect();
            blocks.reverse();
            for (i, b) in blocks.into_iter().enumerate() {
                let token = trace.block_token(b).to_string();
                let id = permuted.intern_block(&token);
                permuted.push_access(w, i as u32, id).unwrap();
            }
        }
        // compare as token sets; ids are interning-order dependent
        let tokens = |t: &TileTrace, set: BTreeSet<MemBlockId>| -> BTreeSet<String> {
            set.into_iter().map(|b| t.block_token(b).to_string()).collect()
        };
        prop_assert_eq!(tokens(&trace, baseline), tokens(&permuted, permuted.unique_blocks()));
    }

    #[test]
    fn measured_cf_at_least_one_when_every_warp_accesses(seed in 0u64..1000) {
        let params = LocalityParams { seed, blocks_per_access: 1.7, ..Default::default() };
        let trace = generate(geom(6, 6), &params).unwrap();
        prop_assert!(measured_cf(&trace).unwrap() >= 1.0);
    }

    #[test]
    fn priority_partition_is_exact(w in 1u32..=40, h in 1u32..=40, k in 1u32..=16, seed in 0u64..100) {
        let g = geom(w, h);
        for pattern in [
            SelectionPattern::Mesh(k),
            SelectionPattern::RowLines(k),
            SelectionPattern::ColumnLines(k),
            SelectionPattern::TopFraction(k),
            SelectionPattern::Random { denominator: k, seed },
        ] {
            let set = pattern.select_priority(g);
            prop_assert!(set.iter().all(|id| id.0 < g.warp_count()));
            prop_assert!(!set.is_empty());
            // complement + set covers everything exactly once by construction
            let regular: Vec<WarpId> = g.warps().filter(|x| !set.contains(x)).collect();
            prop_assert_eq!(set.len() + regular.len(), g.warp_count() as usize);
        }
    }

    #[test]
    fn footprint_ratio_is_monotone_in_the_subset(seed in 0u64..300) {
        let g = geom(8, 8);
        let params = LocalityParams { seed, reuse_target: Some(6.0), ..Default::default() };
        let trace = generate(g, &params).unwrap();
        let small: BTreeSet<WarpId> = g.warps().filter(|w| w.0 % 8 == 0).collect();
        let big: BTreeSet<WarpId> = g.warps().filter(|w| w.0 % 4 == 0).collect();
        prop_assert!(small.is_subset(&big));
        let fr_small = footprint_ratio(&trace, &small).unwrap();
        let fr_big = footprint_ratio(&trace, &big).unwrap();
        prop_assert!(fr_small <= fr_big + 1e-12);
        let all: BTreeSet<WarpId> = g.warps().collect();
        prop_assert_eq!(footprint_ratio(&trace, &all).unwrap(), 1.0);
        prop_assert_eq!(footprint_ratio(&trace, &BTreeSet::new()).unwrap(), 0.0);
    }
}

/// Feed an access sequence through a hierarchy one per cycle, retrying
/// rejections, then drain all fills. Returns per-level primary-miss counts.
fn replay_primary_misses(cfg: &HierarchyConfig, accesses: &[(WarpId, MemBlockId)]) -> Vec<u64> {
    let mut hier = Hierarchy::new(cfg).unwrap();
    let mut cycle = 0u64;
    let mut idx = 0usize;
    while idx < accesses.len() {
        cycle += 1;
        hier.tick(cycle);
        let (w, b) = accesses[idx];
        if hier.access(w, b, cycle).kind != AccessKind::Rejected {
            idx += 1;
        }
        assert!(cycle < 1_000_000, "replay runaway");
    }
    let drained = |h: &Hierarchy| (0..h.level_count()).all(|i| h.free_mshrs(i) == cfg.levels[i].mshr_entries);
    while !drained(&hier) {
        cycle += 1;
        hier.tick(cycle);
    }
    (0..hier.level_count())
        .map(|i| hier.level_stats(i).primary_misses)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn primary_miss_counts_are_order_independent_when_working_set_fits(
        seed in 0u64..10_000,
        perm_seed in 0u64..10_000,
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;

        let g = geom(6, 6);
        let params = LocalityParams { seed, reuse_target: Some(4.0), ..Default::default() };
        let trace = generate(g, &params).unwrap();
        let cfg = HierarchyConfig {
            levels: vec![
                CacheConfig { capacity_blocks: 1024, associativity: 4, hit_latency: 1, mshr_entries: 8 },
                CacheConfig { capacity_blocks: 16384, associativity: 8, hit_latency: 18, mshr_entries: 16 },
            ],
            main_memory_latency: 30,
        };
        prop_assume!(trace.unique_blocks().len() <= 1024);

        let mut accesses: Vec<(WarpId, MemBlockId)> = g
            .warps()
            .flat_map(|w| trace.accesses_of(w).iter().map(move |a| (w, a.block)))
            .collect();
        let in_order = replay_primary_misses(&cfg, &accesses);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed);
        accesses.shuffle(&mut rng);
        let shuffled = replay_primary_misses(&cfg, &accesses);
        prop_assert_eq!(&in_order, &shuffled);
        let unique = trace.unique_blocks().len() as u64;
        prop_assert_eq!(in_order, vec![unique, unique]);
    }
}

fn two_level_cfg() -> HierarchyConfig {
    HierarchyConfig {
        levels: vec![
            CacheConfig {
                capacity_blocks: 1024,
                associativity: 4,
                hit_latency: 1,
                mshr_entries: 16,
            },
            CacheConfig {
                capacity_blocks: 16384,
                associativity: 8,
                hit_latency: 18,
                mshr_entries: 32,
            },
        ],
        main_memory_latency: 70,
    }
}

fn all_policies() -> Vec<(&'static str, SchedulerPolicy)> {
    vec![
        ("baseline", SchedulerPolicy::baseline()),
        (
            "fullpriority",
            SchedulerPolicy::fullpriority(SelectionPattern::Mesh(4)),
        ),
        (
            "freemshr10",
            SchedulerPolicy::freemshr(SelectionPattern::Mesh(4), 10),
        ),
        (
            "wasp",
            SchedulerPolicy::wasp(SelectionPattern::Mesh(4), 2.5, 4.0),
        ),
    ]
}

#[test]
fn instruction_count_and_primary_misses_are_policy_invariant() {
    let core = CoreConfig {
        max_warps: 16,
        pipeline_width: 2,
        ldst_issues_per_cycle: None,
        launches_per_cycle: 1,
    };
    let hier = two_level_cfg();
    for seed in [1u64, 2, 3, 4, 5] {
        let params = LocalityParams {
            seed,
            reuse_target: Some(6.0),
            mem_instr_ratio: 0.2,
            ..Default::default()
        };
        let trace = generate(geom(10, 10), &params).unwrap();
        assert!(trace.unique_blocks().len() <= 1024);
        let reports: Vec<_> = all_policies()
            .into_iter()
            .map(|(name, p)| (name, simulate(&trace, &p, &core, &hier).unwrap()))
            .collect();
        let (_, first) = &reports[0];
        for (name, r) in &reports {
            assert_eq!(
                r.instructions_executed, first.instructions_executed,
                "instruction conservation violated by {name}"
            );
            assert_eq!(r.instructions_executed, trace.total_instructions());
            assert_eq!(r.mem_accesses_all, trace.total_accesses());
            for (a, b) in r.levels.iter().zip(first.levels.iter()) {
                assert_eq!(
                    a.primary_misses, b.primary_misses,
                    "primary misses at {} differ under {name}",
                    a.name
                );
            }
        }
    }
}

#[test]
fn monotone_locality_smaller_scale_never_more_blocks() {
    // statistical: medians over 30 seeds of unique-block counts at two scales
    let g = geom(12, 12);
    let unique_at = |scale: f64, seed: u64| {
        let params = LocalityParams {
            texture_scale: scale,
            reuse_target: None,
            seed,
            ..Default::default()
        };
        generate(g, &params).unwrap().unique_blocks().len()
    };
    let mut fine = Vec::new();
    let mut coarse = Vec::new();
    for seed in 0..30u64 {
        coarse.push(unique_at(0.5, seed));
        fine.push(unique_at(2.0, seed));
    }
    fine.sort();
    coarse.sort();
    assert!(
        coarse[15] <= fine[15],
        "median unique blocks grew when the scale shrank: {} > {}",
        coarse[15],
        fine[15]
    );
}

#[test]
fn footprint_ordering_mesh_beats_lines_and_top() {
    // on spatially local traces, medians over 30 seeds
    let g = geom(32, 32);
    let mut mesh4 = Vec::new();
    let mut rows16 = Vec::new();
    let mut top16 = Vec::new();
    for seed in 0..30u64 {
        let params = LocalityParams {
            seed,
            reuse_target: Some(12.0),
            ..Default::default()
        };
        let trace = generate(g, &params).unwrap();
        let fr = |p: SelectionPattern| footprint_ratio(&trace, &p.select_priority(g)).unwrap();
        mesh4.push(fr(SelectionPattern::Mesh(4)));
        rows16.push(fr(SelectionPattern::RowLines(16)));
        top16.push(fr(SelectionPattern::TopFraction(16)));
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let m = median(&mut mesh4);
    let r = median(&mut rows16);
    let t = median(&mut top16);
    assert!(m > r, "mesh4 {m} vs rows16 {r}");
    assert!(m > t, "mesh4 {m} vs top16 {t}");
}

#[test]
fn wasp_with_bottomless_threshold_equals_fullpriority() {
    let params = LocalityParams {
        seed: 9,
        reuse_target: Some(8.0),
        ..Default::default()
    };
    let trace = generate(geom(16, 16), &params).unwrap();
    let core = CoreConfig {
        max_warps: 32,
        pipeline_width: 2,
        ldst_issues_per_cycle: None,
        launches_per_cycle: 1,
    };
    let hier = two_level_cfg();
    let wasp = SchedulerPolicy::wasp(SelectionPattern::Mesh(4), 2.5, f64::NEG_INFINITY);
    let full = SchedulerPolicy::fullpriority(SelectionPattern::Mesh(4));
    let a = simulate(&trace, &wasp, &core, &hier).unwrap();
    let b = simulate(&trace, &full, &core, &hier).unwrap();
    assert_eq!(a, b);
}

#[test]
fn wasp_with_impossible_gate_equals_regular_first() {
    let params = LocalityParams {
        seed: 9,
        reuse_target: Some(8.0),
        ..Default::default()
    };
    let trace = generate(geom(16, 16), &params).unwrap();
    let core = CoreConfig {
        max_warps: 32,
        pipeline_width: 2,
        ldst_issues_per_cycle: None,
        launches_per_cycle: 1,
    };
    let hier = two_level_cfg();
    // a gate that can never pass sends every launch to the regular queue,
    // exactly like requiring more free MSHRs than the level owns
    let wasp = SchedulerPolicy::wasp(SelectionPattern::Mesh(4), 2.5, f64::INFINITY);
    let regular_first = SchedulerPolicy::freemshr(SelectionPattern::Mesh(4), 17);
    let a = simulate(&trace, &wasp, &core, &hier).unwrap();
    let b = simulate(&trace, &regular_first, &core, &hier).unwrap();
    assert_eq!(a, b);
}
