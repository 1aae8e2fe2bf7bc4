//! Blocking, non-blocking-cache memory hierarchy: a chain of set-associative
//! cache levels with finite MSHR tables in front of a fixed-latency main
//! memory.
//!
//! Miss handling follows the usual MSHR discipline: the first miss to a block
//! allocates one entry at every level the request traverses (a primary miss),
//! later accesses to a block that is already outstanding merge into the
//! existing entry (secondary misses), and the requester is released when the
//! fill arrives. Latencies are additive along the miss path: an access that
//! walks L0 -> L1 -> L2 -> memory pays every hit latency it traversed plus the
//! main-memory latency.
//!
//! Stall rule: once a level's MSHR table fills, the level enters a stalled
//! state and rejects *every* access directed at it — would-be hits and merges
//! included — until the table has drained back to empty. Rejected accesses
//! change no state; the caller retries. Fills retire at most one per level per
//! cycle, in issue order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tile::{MemBlockId, WarpId};

/// Fixed line size; block identifiers already name 64-byte blocks.
pub const LINE_BYTES: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub capacity_blocks: u32,
    pub associativity: u32,
    pub hit_latency: u32,
    pub mshr_entries: u32,
}

impl CacheConfig {
    pub fn validate(&self, name: &str) -> Result<()> {
        if self.mshr_entries == 0 {
            return Err(Error::config(
                format!("{name}.mshr_entries"),
                "must be at least 1",
            ));
        }
        if self.capacity_blocks == 0 || self.associativity == 0 {
            return Err(Error::config(
                format!("{name}.capacity_blocks"),
                "capacity and associativity must be at least 1",
            ));
        }
        if self.capacity_blocks % self.associativity != 0 {
            return Err(Error::config(
                format!("{name}.capacity_blocks"),
                format!(
                    "capacity {} not divisible by associativity {}",
                    self.capacity_blocks, self.associativity
                ),
            ));
        }
        Ok(())
    }
}

/// Ordered list of cache levels (front first) plus uniform main-memory latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub levels: Vec<CacheConfig>,
    pub main_memory_latency: u32,
}

impl HierarchyConfig {
    /// Default hierarchy for a pipeline width: wide (4) pipelines front the
    /// chain with a small two-port L0; narrow (2) pipelines start at L1.
    pub fn auto_for_width(pipeline_width: u32) -> Self {
        let l0 = CacheConfig {
            capacity_blocks: 8, // 0.5 KiB of 64-byte lines
            associativity: 4,
            hit_latency: 1,
            mshr_entries: 16,
        };
        let l1 = CacheConfig {
            capacity_blocks: 1024, // 64 KiB
            associativity: 4,
            hit_latency: 1,
            mshr_entries: 16,
        };
        let l2 = CacheConfig {
            capacity_blocks: 16384, // 1 MiB
            associativity: 8,
            hit_latency: 18,
            mshr_entries: 32,
        };
        let levels = if pipeline_width >= 4 {
            vec![l0, l1, l2]
        } else {
            vec![l1, l2]
        };
        HierarchyConfig {
            levels,
            main_memory_latency: 70,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::config("hierarchy.levels", "at least one cache level"));
        }
        if self.main_memory_latency == 0 {
            return Err(Error::config(
                "hierarchy.main_memory_latency",
                "must be at least 1",
            ));
        }
        for (cfg, name) in self.levels.iter().zip(self.level_names()) {
            cfg.validate(name)?;
        }
        Ok(())
    }

    /// Levels are named by position from the back: a 3-level chain is
    /// L0/L1/L2, a 2-level chain L1/L2, a single level just L1.
    pub fn level_names(&self) -> Vec<&'static str> {
        match self.levels.len() {
            1 => vec!["L1"],
            2 => vec!["L1", "L2"],
            3 => vec!["L0", "L1", "L2"],
            n => {
                // beyond three levels fall back to generic names
                const NAMES: [&str; 8] = ["C0", "C1", "C2", "C3", "C4", "C5", "C6", "C7"];
                NAMES[..n.min(8)].to_vec()
            }
        }
    }
}

/// Where an access was (or will be) satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServedBy {
    Level(usize),
    MainMemory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Hit,
    PrimaryMiss,
    SecondaryMiss,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessOutcome {
    pub kind: AccessKind,
    /// Cycle at which the data reaches the requester. Scheduled value; under
    /// fill-port contention the actual release reported by [`Hierarchy::tick`]
    /// may slip later. Absent for rejected accesses.
    pub complete_cycle: Option<u64>,
    pub served_by: Option<ServedBy>,
}

/// A requester parked on an outstanding miss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Waiter {
    pub warp: WarpId,
    pub issue_cycle: u64,
}

#[derive(Debug, Clone)]
struct MshrEntry {
    block: MemBlockId,
    fill_cycle: u64,
    seq: u64,
    source: ServedBy,
    waiters: Vec<Waiter>,
}

#[derive(Debug, Clone, Copy)]
struct ResidentLine {
    block: MemBlockId,
    lru_seq: u64,
}

/// Per-level hit/miss counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LevelStats {
    pub hits: u64,
    pub primary_misses: u64,
    pub secondary_misses: u64,
}

#[derive(Debug)]
struct Level {
    cfg: CacheConfig,
    sets: Vec<Vec<ResidentLine>>,
    /// Outstanding misses, kept sorted by (fill_cycle, seq).
    mshr: Vec<MshrEntry>,
    stalled: bool,
    lru_seq: u64,
    stats: LevelStats,
}

impl Level {
    fn new(cfg: CacheConfig) -> Self {
        let num_sets = (cfg.capacity_blocks / cfg.associativity) as usize;
        Level {
            cfg,
            sets: vec![Vec::new(); num_sets],
            mshr: Vec::new(),
            stalled: false,
            lru_seq: 0,
            stats: LevelStats::default(),
        }
    }

    fn set_index(&self, block: MemBlockId) -> usize {
        (block.0 % self.sets.len() as u64) as usize
    }

    fn contains(&self, block: MemBlockId) -> bool {
        let s = self.set_index(block);
        self.sets[s].iter().any(|l| l.block == block)
    }

    fn touch(&mut self, block: MemBlockId) {
        let s = self.set_index(block);
        self.lru_seq += 1;
        let seq = self.lru_seq;
        if let Some(line) = self.sets[s].iter_mut().find(|l| l.block == block) {
            line.lru_seq = seq;
        }
    }

    fn install(&mut self, block: MemBlockId) {
        let ways = self.cfg.associativity as usize;
        let s = self.set_index(block);
        self.lru_seq += 1;
        let seq = self.lru_seq;
        let set = &mut self.sets[s];
        if let Some(line) = set.iter_mut().find(|l| l.block == block) {
            line.lru_seq = seq;
            return;
        }
        if set.len() >= ways {
            // evict LRU
            let victim = set
                .iter()
                .enumerate()
                .min_by_key(|(_, l)| l.lru_seq)
                .map(|(i, _)| i)
                .expect("non-empty set");
            set.swap_remove(victim);
        }
        set.push(ResidentLine { block, lru_seq: seq });
    }

    fn mshr_entry(&self, block: MemBlockId) -> Option<&MshrEntry> {
        self.mshr.iter().find(|e| e.block == block)
    }

    fn live(&self) -> usize {
        self.mshr.len()
    }

    fn insert_entry(&mut self, entry: MshrEntry) {
        debug_assert!(self.mshr.iter().all(|e| e.block != entry.block));
        let pos = self
            .mshr
            .partition_point(|e| (e.fill_cycle, e.seq) <= (entry.fill_cycle, entry.seq));
        self.mshr.insert(pos, entry);
        assert!(
            self.mshr.len() <= self.cfg.mshr_entries as usize,
            "MSHR occupancy exceeded capacity"
        );
        if self.mshr.len() == self.cfg.mshr_entries as usize {
            self.stalled = true;
        }
    }
}

/// One block's fill retiring at one level. `waiters` is populated only for
/// front-level fills; downstream entries have no parked requesters.
#[derive(Debug, Clone)]
pub struct FillEvent {
    pub level: usize,
    pub block: MemBlockId,
    pub waiters: Vec<Waiter>,
}

enum Terminal {
    Hit(usize),
    /// Merge into an outstanding entry at this level.
    Merge(usize, u64, ServedBy),
    Memory,
}

#[derive(Debug)]
pub struct Hierarchy {
    levels: Vec<Level>,
    names: Vec<&'static str>,
    mem_latency: u32,
    alloc_seq: u64,
}

impl Hierarchy {
    pub fn new(cfg: &HierarchyConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Hierarchy {
            levels: cfg.levels.iter().map(|c| Level::new(*c)).collect(),
            names: cfg.level_names(),
            mem_latency: cfg.main_memory_latency,
            alloc_seq: 0,
        })
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level_name(&self, level: usize) -> &'static str {
        self.names[level]
    }

    /// Free MSHR slots at a level right now.
    pub fn free_mshrs(&self, level: usize) -> u32 {
        let l = &self.levels[level];
        l.cfg.mshr_entries - l.live() as u32
    }

    /// True while the front level is in its stalled state (MSHR table filled
    /// and not yet drained); every access is rejected during this window.
    pub fn front_stalled(&self) -> bool {
        self.levels[0].stalled
    }

    pub fn level_stats(&self, level: usize) -> LevelStats {
        self.levels[level].stats
    }

    /// Issue one access into the front of the hierarchy.
    ///
    /// Rejected outcomes leave the hierarchy untouched; the caller is expected
    /// to retry on a later cycle.
    pub fn access(&mut self, warp: WarpId, block: MemBlockId, cycle: u64) -> AccessOutcome {
        const REJECTED: AccessOutcome = AccessOutcome {
            kind: AccessKind::Rejected,
            complete_cycle: None,
            served_by: None,
        };

        // classify without touching state, so a rejection anywhere leaves
        // nothing half-allocated
        let mut latency: u64 = 0;
        let mut terminal = Terminal::Memory;
        let mut found = false;
        for (i, lvl) in self.levels.iter().enumerate() {
            if lvl.stalled {
                return REJECTED;
            }
            latency += lvl.cfg.hit_latency as u64;
            if lvl.contains(block) {
                terminal = Terminal::Hit(i);
                found = true;
                break;
            }
            if let Some(e) = lvl.mshr_entry(block) {
                terminal = Terminal::Merge(i, e.fill_cycle, e.source);
                found = true;
                break;
            }
            if lvl.live() >= lvl.cfg.mshr_entries as usize {
                return REJECTED; // cannot allocate the entry this miss needs
            }
        }
        if !found {
            latency += self.mem_latency as u64;
        }

        // commit
        match terminal {
            Terminal::Hit(0) => {
                self.levels[0].stats.hits += 1;
                self.levels[0].touch(block);
                AccessOutcome {
                    kind: AccessKind::Hit,
                    complete_cycle: Some(cycle + latency),
                    served_by: Some(ServedBy::Level(0)),
                }
            }
            Terminal::Merge(0, fill, source) => {
                self.levels[0].stats.secondary_misses += 1;
                let entry_idx = self.levels[0]
                    .mshr
                    .iter()
                    .position(|e| e.block == block)
                    .expect("merge target");
                self.levels[0].mshr[entry_idx].waiters.push(Waiter {
                    warp,
                    issue_cycle: cycle,
                });
                AccessOutcome {
                    kind: AccessKind::SecondaryMiss,
                    complete_cycle: Some(fill),
                    served_by: Some(source),
                }
            }
            Terminal::Hit(i) => {
                self.levels[i].stats.hits += 1;
                self.levels[i].touch(block);
                let fill = cycle + latency;
                self.allocate_path(warp, block, cycle, fill, i, ServedBy::Level(i));
                AccessOutcome {
                    kind: AccessKind::PrimaryMiss,
                    complete_cycle: Some(fill),
                    served_by: Some(ServedBy::Level(i)),
                }
            }
            Terminal::Merge(i, fill, source) => {
                self.levels[i].stats.secondary_misses += 1;
                self.allocate_path(warp, block, cycle, fill, i, source);
                AccessOutcome {
                    kind: AccessKind::PrimaryMiss,
                    complete_cycle: Some(fill),
                    served_by: Some(source),
                }
            }
            Terminal::Memory => {
                let fill = cycle + latency;
                let depth = self.levels.len();
                self.allocate_path(warp, block, cycle, fill, depth, ServedBy::MainMemory);
                AccessOutcome {
                    kind: AccessKind::PrimaryMiss,
                    complete_cycle: Some(fill),
                    served_by: Some(ServedBy::MainMemory),
                }
            }
        }
    }

    /// Allocate MSHR entries at levels `0..upto` for a miss whose data arrives
    /// (at every level) at `fill`. The requester waits on the front entry.
    fn allocate_path(
        &mut self,
        warp: WarpId,
        block: MemBlockId,
        cycle: u64,
        fill: u64,
        upto: usize,
        source: ServedBy,
    ) {
        for i in 0..upto {
            self.alloc_seq += 1;
            let waiters = if i == 0 {
                vec![Waiter {
                    warp,
                    issue_cycle: cycle,
                }]
            } else {
                Vec::new()
            };
            self.levels[i].stats.primary_misses += 1;
            let seq = self.alloc_seq;
            self.levels[i].insert_entry(MshrEntry {
                block,
                fill_cycle: fill,
                seq,
                source,
                waiters,
            });
        }
    }

    /// Advance one cycle: retire at most one due fill per level (issue order),
    /// install the block, free the entry, and report released waiters.
    pub fn tick(&mut self, now: u64) -> Vec<FillEvent> {
        let mut events = Vec::new();
        for (i, lvl) in self.levels.iter_mut().enumerate() {
            assert!(
                lvl.mshr.len() <= lvl.cfg.mshr_entries as usize,
                "MSHR occupancy exceeded capacity at {}",
                self.names[i]
            );
            let due = lvl
                .mshr
                .first()
                .map(|e| e.fill_cycle <= now)
                .unwrap_or(false);
            if due {
                let entry = lvl.mshr.remove(0);
                lvl.install(entry.block);
                if lvl.mshr.is_empty() {
                    lvl.stalled = false;
                }
                events.push(FillEvent {
                    level: i,
                    block: entry.block,
                    waiters: entry.waiters,
                });
            }
        }
        events
    }
}
