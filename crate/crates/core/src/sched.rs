//! Priority-subset selection patterns and warp-launch policies.
//!
//! A selection pattern splits a tile's warps into a small `Priority` class —
//! chosen so its screen positions cover most of the tile's texture footprint —
//! and the remaining `Regular` class. A launch policy decides, at each launch
//! opportunity, whether the next warp comes from the priority or the regular
//! FIFO. The wasp policy gates priority launches on a blocking prediction:
//! free MSHR slots at the watched cache level, discounted by the misses the
//! non-blocked priority warps already in the core are still expected to
//! generate (`cf` each).

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tile::{TileGeometry, WarpId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SelectionPattern {
    /// First `1/denominator` of the warps in scanline order (top rows).
    TopFraction(u32),
    /// Every `stride`-th row of quads.
    RowLines(u32),
    /// Every `stride`-th column of quads.
    ColumnLines(u32),
    /// Top-left corner quad of every k x k subtile: both coordinates divisible
    /// by k.
    Mesh(u32),
    /// Uniform sample of `1/denominator` of the quads, drawn without
    /// replacement from the given seed.
    Random { denominator: u32, seed: u64 },
}

impl SelectionPattern {
    /// Parse the config spelling: `mesh4`, `top16`, `rows16`, `cols16`,
    /// `random16`. The experiment seed feeds the random pattern.
    pub fn parse(s: &str, experiment_seed: u64) -> Result<SelectionPattern> {
        let err = || {
            Error::config(
                "pattern",
                format!("unrecognized pattern `{s}` (expected mesh<k>, top<d>, rows<s>, cols<s> or random<d>)"),
            )
        };
        let split_at = s.find(|c: char| c.is_ascii_digit()).ok_or_else(err)?;
        let (word, num) = s.split_at(split_at);
        let n: u32 = num.parse().map_err(|_| err())?;
        if n == 0 {
            return Err(Error::config("pattern", format!("`{s}`: parameter must be >= 1")));
        }
        Ok(match word {
            "mesh" => SelectionPattern::Mesh(n),
            "top" => SelectionPattern::TopFraction(n),
            "rows" => SelectionPattern::RowLines(n),
            "cols" => SelectionPattern::ColumnLines(n),
            "random" => SelectionPattern::Random {
                denominator: n,
                seed: experiment_seed,
            },
            _ => return Err(err()),
        })
    }

    pub fn label(&self) -> String {
        match self {
            SelectionPattern::TopFraction(d) => format!("top{d}"),
            SelectionPattern::RowLines(s) => format!("rows{s}"),
            SelectionPattern::ColumnLines(s) => format!("cols{s}"),
            SelectionPattern::Mesh(k) => format!("mesh{k}"),
            SelectionPattern::Random { denominator, .. } => format!("random{denominator}"),
        }
    }

    /// True when the pattern's stride exceeds both tile dimensions, so only
    /// quad (0,0) gets selected.
    pub fn degenerate_for(&self, geom: TileGeometry) -> bool {
        let (w, h) = (geom.width_quads(), geom.height_quads());
        match *self {
            SelectionPattern::Mesh(k) => k > w && k > h,
            SelectionPattern::RowLines(s) => s > h && s > w,
            SelectionPattern::ColumnLines(s) => s > w && s > h,
            _ => false,
        }
    }

    /// The Priority warp class; the complement is Regular. Scanline order is
    /// preserved inside both classes.
    pub fn select_priority(&self, geom: TileGeometry) -> BTreeSet<WarpId> {
        if self.degenerate_for(geom) {
            log::warn!(
                "pattern {} larger than both dimensions of a {}x{} tile; only quad (0,0) selected",
                self.label(),
                geom.width_quads(),
                geom.height_quads()
            );
        }
        match *self {
            SelectionPattern::TopFraction(d) => {
                let total = geom.warp_count() as u64;
                let take = ((total + d as u64 - 1) / d as u64).max(1) as u32;
                (0..take.min(geom.warp_count())).map(WarpId).collect()
            }
            SelectionPattern::RowLines(stride) => geom
                .warps()
                .filter(|&w| geom.coord_of(w).unwrap().y % stride == 0)
                .collect(),
            SelectionPattern::ColumnLines(stride) => geom
                .warps()
                .filter(|&w| geom.coord_of(w).unwrap().x % stride == 0)
                .collect(),
            SelectionPattern::Mesh(k) => geom
                .warps()
                .filter(|&w| {
                    let c = geom.coord_of(w).unwrap();
                    c.x % k == 0 && c.y % k == 0
                })
                .collect(),
            SelectionPattern::Random { denominator, seed } => {
                let total = geom.warp_count() as u64;
                let take = ((total + denominator as u64 - 1) / denominator as u64).max(1) as usize;
                let mut ids: Vec<u32> = (0..geom.warp_count()).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                ids.shuffle(&mut rng);
                ids.truncate(take);
                ids.into_iter().map(WarpId).collect()
            }
        }
    }
}

/// Which cache level's free-MSHR count gates priority launches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WatchLevel {
    /// The front level of whatever hierarchy the run uses (L0 at width 4,
    /// L1 at width 2).
    Auto,
    Index(usize),
}

impl Default for WatchLevel {
    fn default() -> Self {
        WatchLevel::Auto
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    /// Single scanline FIFO, no priority class.
    Baseline,
    /// Drain the priority FIFO before touching the regular one.
    Fullpriority,
    /// Priority head only while at least `n` MSHRs are free at the watched
    /// level.
    Freemshr { n: u32 },
    /// Priority head while the blocking prediction stays above `threshold`.
    Wasp { cf: f64, threshold: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerPolicy {
    pub kind: PolicyKind,
    pub pattern: Option<SelectionPattern>,
    pub watch_level: WatchLevel,
}

impl SchedulerPolicy {
    pub fn baseline() -> Self {
        SchedulerPolicy {
            kind: PolicyKind::Baseline,
            pattern: None,
            watch_level: WatchLevel::Auto,
        }
    }

    pub fn fullpriority(pattern: SelectionPattern) -> Self {
        SchedulerPolicy {
            kind: PolicyKind::Fullpriority,
            pattern: Some(pattern),
            watch_level: WatchLevel::Auto,
        }
    }

    pub fn freemshr(pattern: SelectionPattern, n: u32) -> Self {
        SchedulerPolicy {
            kind: PolicyKind::Freemshr { n },
            pattern: Some(pattern),
            watch_level: WatchLevel::Auto,
        }
    }

    pub fn wasp(pattern: SelectionPattern, cf: f64, threshold: f64) -> Self {
        SchedulerPolicy {
            kind: PolicyKind::Wasp { cf, threshold },
            pattern: Some(pattern),
            watch_level: WatchLevel::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PolicyKind::Baseline => Ok(()),
            PolicyKind::Wasp { cf, .. } => {
                if cf <= 0.0 {
                    return Err(Error::config("policy.cf", "must be > 0"));
                }
                self.require_pattern()
            }
            _ => self.require_pattern(),
        }
    }

    fn require_pattern(&self) -> Result<()> {
        if self.pattern.is_none() {
            return Err(Error::config(
                "policy.pattern",
                "this policy needs a selection pattern",
            ));
        }
        Ok(())
    }

    /// The priority class this policy induces on a tile (empty for baseline).
    pub fn priority_set(&self, geom: TileGeometry) -> BTreeSet<WarpId> {
        match &self.pattern {
            Some(p) if self.kind != PolicyKind::Baseline => p.select_priority(geom),
            _ => BTreeSet::new(),
        }
    }
}

/// Expected free MSHR slots once the in-flight, not-yet-blocked priority
/// warps have issued their likely misses (`cf` each). May go negative.
pub fn real_free_mshrs(free: u32, nonblocked_priority_in_core: u32, cf: f64) -> f64 {
    free as f64 - nonblocked_priority_in_core as f64 * cf
}

/// Launch gate: strictly greater-than.
pub fn priority_over_regular(real_free: f64, threshold: f64) -> bool {
    real_free > threshold
}

/// The split input queues feeding one core. Total capacity is unchanged from
/// the single baseline FIFO; warps appear in scanline order inside each class.
#[derive(Debug, Clone)]
pub struct LaunchQueues {
    priority: VecDeque<WarpId>,
    regular: VecDeque<WarpId>,
}

impl LaunchQueues {
    pub fn new(geom: TileGeometry, priority_set: &BTreeSet<WarpId>) -> Self {
        let mut priority = VecDeque::new();
        let mut regular = VecDeque::new();
        for w in geom.warps() {
            if priority_set.contains(&w) {
                priority.push_back(w);
            } else {
                regular.push_back(w);
            }
        }
        LaunchQueues { priority, regular }
    }

    pub fn is_empty(&self) -> bool {
        self.priority.is_empty() && self.regular.is_empty()
    }

    pub fn remaining(&self) -> usize {
        self.priority.len() + self.regular.len()
    }
}

/// Observables the launch gate reads from the core and hierarchy.
#[derive(Debug, Clone, Copy)]
pub struct CoreObservables {
    pub free_mshrs_watch: u32,
    pub nonblocked_priority_in_core: u32,
}

/// Pick the next warp to launch, or None when both queues are empty. If the
/// preferred queue is empty the other serves as fallback, so no warp starves.
pub fn next_warp(
    policy: &SchedulerPolicy,
    queues: &mut LaunchQueues,
    obs: &CoreObservables,
) -> Option<WarpId> {
    let prefer_priority = match policy.kind {
        PolicyKind::Baseline => false,
        PolicyKind::Fullpriority => true,
        PolicyKind::Freemshr { n } => obs.free_mshrs_watch >= n,
        PolicyKind::Wasp { cf, threshold } => priority_over_regular(
            real_free_mshrs(obs.free_mshrs_watch, obs.nonblocked_priority_in_core, cf),
            threshold,
        ),
    };
    if prefer_priority {
        queues
            .priority
            .pop_front()
            .or_else(|| queues.regular.pop_front())
    } else {
        queues
            .regular
            .pop_front()
            .or_else(|| queues.priority.pop_front())
    }
}
