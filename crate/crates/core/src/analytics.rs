//! Subset/footprint mathematics and cross-run metric aggregation.
//!
//! Footprint ratios quantify how much of a tile's unique-block set a warp
//! subset touches; the two size-ratio estimates bound how small a priority
//! subset can usefully be. `aggregate` turns a batch of labeled run reports
//! into a table normalized against a baseline row.

use std::collections::BTreeSet;

use crate::coresim::SimReport;
use crate::error::{Error, Result};
use crate::sched::SelectionPattern;
use crate::tile::{MemBlockId, TileTrace, WarpId};

/// |unique blocks touched by `subset`| / |unique blocks touched by the tile|.
pub fn footprint_ratio(trace: &TileTrace, subset: &BTreeSet<WarpId>) -> Result<f64> {
    let geom = trace.geometry();
    for w in subset {
        if w.0 >= geom.warp_count() {
            return Err(Error::domain(format!(
                "subset warp {} outside tile with {} warps",
                w.0,
                geom.warp_count()
            )));
        }
    }
    let all = trace.unique_blocks();
    if all.is_empty() {
        return Err(Error::UndefinedStatistic(
            "footprint ratio of a tile with an empty footprint".into(),
        ));
    }
    let sub: BTreeSet<MemBlockId> = subset
        .iter()
        .flat_map(|w| trace.accesses_of(*w).iter().map(|a| a.block))
        .collect();
    Ok(sub.len() as f64 / all.len() as f64)
}

/// Size ratio assuming one block per warp: unique blocks / warps.
pub fn min_estimate1(trace: &TileTrace) -> f64 {
    trace.unique_blocks().len() as f64 / trace.geometry().warp_count() as f64
}

/// Size ratio given `cf` distinct blocks per warp: unique / (warps * cf).
pub fn min_estimate2(trace: &TileTrace, cf: f64) -> f64 {
    assert!(cf > 0.0, "cf must be positive");
    min_estimate1(trace) / cf
}

/// Subset-size and footprint ratios for one selection pattern on one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetStats {
    pub pattern: SelectionPattern,
    pub subset_size_ratio: f64,
    pub footprint_ratio: f64,
}

pub fn subset_stats(trace: &TileTrace, pattern: SelectionPattern) -> Result<SubsetStats> {
    let geom = trace.geometry();
    let subset = pattern.select_priority(geom);
    Ok(SubsetStats {
        pattern,
        subset_size_ratio: subset.len() as f64 / geom.warp_count() as f64,
        footprint_ratio: footprint_ratio(trace, &subset)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub label: String,
    pub cycles: u64,
    /// baseline cycles / this run's cycles; > 1 is faster than baseline.
    pub speedup: f64,
    pub stall_pct: f64,
    pub lat_all: f64,
    pub lat_prio: f64,
    pub lat_reg: f64,
    pub l1_pmiss: u64,
    pub l2_pmiss: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

pub const CSV_HEADER: &str = "label,cycles,speedup,stall_pct,lat_all,lat_prio,lat_reg,l1_pmiss,l2_pmiss";

impl MetricsTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}\n",
                r.label,
                r.cycles,
                r.speedup,
                r.stall_pct,
                r.lat_all,
                r.lat_prio,
                r.lat_reg,
                r.l1_pmiss,
                r.l2_pmiss
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<28} {:>10} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            "label", "cycles", "speedup", "stall%", "lat_all", "lat_prio", "lat_reg", "l1_pmiss",
            "l2_pmiss"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<28} {:>10} {:>9.4} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9} {:>9}\n",
                r.label,
                r.cycles,
                r.speedup,
                r.stall_pct,
                r.lat_all,
                r.lat_prio,
                r.lat_reg,
                r.l1_pmiss,
                r.l2_pmiss
            ));
        }
        out
    }

    pub fn row(&self, label: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

fn pmiss_of(report: &SimReport, name: &str) -> u64 {
    report
        .levels
        .iter()
        .find(|l| l.name == name)
        .map(|l| l.primary_misses)
        .unwrap_or(0)
}

/// Tabulate labeled reports against the named baseline row. Labels must be
/// unique and the baseline label present.
pub fn aggregate(runs: &[(String, SimReport)], baseline_label: &str) -> Result<MetricsTable> {
    let mut seen = BTreeSet::new();
    for (label, _) in runs {
        if !seen.insert(label.as_str()) {
            return Err(Error::Aggregate(format!("label collision: `{label}`")));
        }
    }
    let baseline = runs
        .iter()
        .find(|(l, _)| l == baseline_label)
        .map(|(_, r)| r)
        .ok_or_else(|| {
            Error::Aggregate(format!("missing baseline label `{baseline_label}`"))
        })?;
    let base_cycles = baseline.total_cycles;
    let rows = runs
        .iter()
        .map(|(label, r)| {
            let speedup = if r.total_cycles == 0 {
                if base_cycles == 0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                base_cycles as f64 / r.total_cycles as f64
            };
            let stall_pct = if r.total_cycles == 0 {
                0.0
            } else {
                100.0 * r.front_level_stall_cycles as f64 / r.total_cycles as f64
            };
            MetricsRow {
                label: label.clone(),
                cycles: r.total_cycles,
                speedup,
                stall_pct,
                lat_all: r.avg_mem_latency_all,
                lat_prio: r.avg_mem_latency_priority,
                lat_reg: r.avg_mem_latency_regular,
                l1_pmiss: pmiss_of(r, "L1"),
                l2_pmiss: pmiss_of(r, "L2"),
            }
        })
        .collect();
    Ok(MetricsTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coresim::LevelReport;
    use crate::tile::TileGeometry;

    fn geom(w: u32, h: u32) -> TileGeometry {
        TileGeometry::new(w, h).unwrap()
    }

    fn fixture_two_blocks() -> TileTrace {
        // warps over blocks {A},{A},{B},{B}
        let mut t = TileTrace::new(geom(4, 1));
        let a = t.intern_block("A");
        let b = t.intern_block("B");
        t.push_access(WarpId(0), 0, a).unwrap();
        t.push_access(WarpId(1), 0, a).unwrap();
        t.push_access(WarpId(2), 0, b).unwrap();
        t.push_access(WarpId(3), 0, b).unwrap();
        t
    }

    #[test]
    fn footprint_of_full_subset_is_one() {
        let t = fixture_two_blocks();
        let all: BTreeSet<WarpId> = t.geometry().warps().collect();
        assert_eq!(footprint_ratio(&t, &all).unwrap(), 1.0);
    }

    #[test]
    fn footprint_of_empty_subset_is_zero() {
        let t = fixture_two_blocks();
        assert_eq!(footprint_ratio(&t, &BTreeSet::new()).unwrap(), 0.0);
    }

    #[test]
    fn footprint_half_example() {
        let t = fixture_two_blocks();
        let s: BTreeSet<WarpId> = [WarpId(0)].into_iter().collect();
        assert_eq!(footprint_ratio(&t, &s).unwrap(), 0.5);
    }

    #[test]
    fn footprint_errors_on_empty_tile_footprint() {
        let t = TileTrace::new(geom(2, 2));
        assert!(matches!(
            footprint_ratio(&t, &BTreeSet::new()),
            Err(Error::UndefinedStatistic(_))
        ));
    }

    #[test]
    fn footprint_rejects_out_of_range_subset() {
        let t = fixture_two_blocks();
        let s: BTreeSet<WarpId> = [WarpId(99)].into_iter().collect();
        assert!(footprint_ratio(&t, &s).is_err());
    }

    fn example_trace_15() -> TileTrace {
        let mut t = TileTrace::new(geom(15, 1));
        let blocks = [
            t.intern_block("A"),
            t.intern_block("B"),
            t.intern_block("C"),
        ];
        for w in 0..15u32 {
            t.push_access(WarpId(w), 0, blocks[(w / 5) as usize]).unwrap();
        }
        t
    }

    #[test]
    fn cornerstone_warps_cover_the_example_footprint() {
        let t = example_trace_15();
        let s: BTreeSet<WarpId> = [WarpId(0), WarpId(5), WarpId(10)].into_iter().collect();
        assert_eq!(footprint_ratio(&t, &s).unwrap(), 1.0);
    }

    #[test]
    fn min_estimate1_example_values() {
        let t = example_trace_15();
        assert!((min_estimate1(&t) - 0.2).abs() < 1e-12); // 3 / 15

        // every warp its own block -> 1.0
        let mut own = TileTrace::new(geom(3, 1));
        for w in 0..3u32 {
            let b = own.intern_block(&format!("B{w}"));
            own.push_access(WarpId(w), 0, b).unwrap();
        }
        assert_eq!(min_estimate1(&own), 1.0);
    }

    #[test]
    fn min_estimate2_divides_by_cf() {
        let t = example_trace_15();
        assert!((min_estimate2(&t, 2.5) - 0.08).abs() < 1e-12);
        assert_eq!(min_estimate2(&t, 1.0), min_estimate1(&t));
        assert!((min_estimate2(&t, 2.5) * 2.5 - min_estimate1(&t)).abs() < 1e-12);
    }

    fn report_with_cycles(cycles: u64) -> SimReport {
        SimReport {
            total_cycles: cycles,
            levels: vec![LevelReport {
                name: "L1".into(),
                hits: 0,
                primary_misses: 3,
                secondary_misses: 0,
            }],
            ..SimReport::default()
        }
    }

    #[test]
    fn aggregate_speedup_examples() {
        let runs = vec![
            ("baseline".to_string(), report_with_cycles(18)),
            ("clustered".to_string(), report_with_cycles(21)),
            ("same".to_string(), report_with_cycles(18)),
        ];
        let table = aggregate(&runs, "baseline").unwrap();
        assert!((table.row("clustered").unwrap().speedup - 18.0 / 21.0).abs() < 1e-9);
        assert!((table.row("clustered").unwrap().speedup - 0.857).abs() < 5e-4);
        assert_eq!(table.row("same").unwrap().speedup, 1.0);
        assert_eq!(table.row("baseline").unwrap().l1_pmiss, 3);
    }

    #[test]
    fn aggregate_preserves_cycle_ordering_in_speedups() {
        let runs = vec![
            ("base".to_string(), report_with_cycles(100)),
            ("fast".to_string(), report_with_cycles(80)),
            ("slow".to_string(), report_with_cycles(120)),
        ];
        let t = aggregate(&runs, "base").unwrap();
        let mut by_cycles: Vec<&MetricsRow> = t.rows.iter().collect();
        by_cycles.sort_by_key(|r| r.cycles);
        for pair in by_cycles.windows(2) {
            assert!(pair[0].speedup >= pair[1].speedup);
        }
    }

    #[test]
    fn aggregate_rejects_label_collisions_and_missing_baseline() {
        let runs = vec![
            ("a".to_string(), report_with_cycles(10)),
            ("a".to_string(), report_with_cycles(11)),
        ];
        assert!(matches!(aggregate(&runs, "a"), Err(Error::Aggregate(_))));
        let runs = vec![("a".to_string(), report_with_cycles(10))];
        assert!(matches!(aggregate(&runs, "nope"), Err(Error::Aggregate(_))));
    }

    #[test]
    fn csv_has_fixed_schema() {
        let runs = vec![("baseline".to_string(), report_with_cycles(18))];
        let t = aggregate(&runs, "baseline").unwrap();
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "label,cycles,speedup,stall_pct,lat_all,lat_prio,lat_reg,l1_pmiss,l2_pmiss"
        );
        assert_eq!(
            lines.next().unwrap(),
            "baseline,18,1.000000,0.000000,0.000000,0.000000,0.000000,3,0"
        );
    }
}
