//! Domain types shared by every module: tiles, quads, warps, memory blocks
//! and per-tile access traces.
//!
//! A tile is a `width_quads x height_quads` grid of quads; each quad's shader
//! instance runs as one warp, numbered in scanline (row-major) order. Memory
//! is modeled at the granularity of opaque 64-byte blocks.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Screen-space extent of one tile, in quads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileGeometry {
    width_quads: u32,
    height_quads: u32,
}

impl TileGeometry {
    pub fn new(width_quads: u32, height_quads: u32) -> Result<Self> {
        if width_quads == 0 || height_quads == 0 {
            return Err(Error::domain(format!(
                "tile geometry must be at least 1x1 quads, got {width_quads}x{height_quads}"
            )));
        }
        Ok(Self {
            width_quads,
            height_quads,
        })
    }

    pub fn width_quads(&self) -> u32 {
        self.width_quads
    }

    pub fn height_quads(&self) -> u32 {
        self.height_quads
    }

    /// One warp per quad.
    pub fn warp_count(&self) -> u32 {
        self.width_quads * self.height_quads
    }

    pub fn contains(&self, coord: QuadCoord) -> bool {
        coord.x < self.width_quads && coord.y < self.height_quads
    }

    /// Scanline warp numbering: `id = y * width + x`.
    pub fn warp_of(&self, coord: QuadCoord) -> Result<WarpId> {
        if !self.contains(coord) {
            return Err(Error::domain(format!(
                "quad ({},{}) outside {}x{} tile",
                coord.x, coord.y, self.width_quads, self.height_quads
            )));
        }
        Ok(WarpId(coord.y * self.width_quads + coord.x))
    }

    /// Inverse of [`warp_of`](Self::warp_of).
    pub fn coord_of(&self, warp: WarpId) -> Result<QuadCoord> {
        if warp.0 >= self.warp_count() {
            return Err(Error::domain(format!(
                "warp {} outside {}x{} tile ({} warps)",
                warp.0,
                self.width_quads,
                self.height_quads,
                self.warp_count()
            )));
        }
        Ok(QuadCoord {
            x: warp.0 % self.width_quads,
            y: warp.0 / self.width_quads,
        })
    }

    /// All warps of the tile in scanline order.
    pub fn warps(&self) -> impl Iterator<Item = WarpId> {
        (0..self.warp_count()).map(WarpId)
    }
}

/// Position of a quad within its tile (0-based, x = column, y = row).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuadCoord {
    pub x: u32,
    pub y: u32,
}

/// Dense warp index in scanline order over the tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WarpId(pub u32);

impl std::fmt::Display for WarpId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Opaque identifier of a 64-byte memory block. Equality is the only
/// meaningful comparison; ids are dense per trace (interned in first-appearance
/// order), which keeps set-index distributions even in the cache model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MemBlockId(pub u64);

/// One memory instruction of a warp: at which instruction slot it sits and
/// which block it touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceAccess {
    pub slot: u32,
    pub block: MemBlockId,
}

/// Per-warp ordered block-access lists for one tile, plus an opaque count of
/// non-memory instructions per warp.
#[derive(Debug, Clone)]
pub struct TileTrace {
    geometry: TileGeometry,
    accesses: Vec<Vec<TraceAccess>>,
    compute_len: Vec<u32>,
    block_tokens: Vec<String>,
    token_index: HashMap<String, MemBlockId>,
}

impl TileTrace {
    pub fn new(geometry: TileGeometry) -> Self {
        let n = geometry.warp_count() as usize;
        Self {
            geometry,
            accesses: vec![Vec::new(); n],
            compute_len: vec![0; n],
            block_tokens: Vec::new(),
            token_index: HashMap::new(),
        }
    }

    pub fn geometry(&self) -> TileGeometry {
        self.geometry
    }

    /// Map a block token to its dense id, allocating a fresh id on first use.
    pub fn intern_block(&mut self, token: &str) -> MemBlockId {
        if let Some(&id) = self.token_index.get(token) {
            return id;
        }
        let id = MemBlockId(self.block_tokens.len() as u64);
        self.block_tokens.push(token.to_string());
        self.token_index.insert(token.to_string(), id);
        id
    }

    pub fn block_token(&self, id: MemBlockId) -> &str {
        &self.block_tokens[id.0 as usize]
    }

    pub fn block_count(&self) -> usize {
        self.block_tokens.len()
    }

    /// Append a memory access; slots must be strictly increasing per warp.
    pub fn push_access(&mut self, warp: WarpId, slot: u32, block: MemBlockId) -> Result<()> {
        let idx = self.check_warp(warp)?;
        if let Some(last) = self.accesses[idx].last() {
            if slot <= last.slot {
                return Err(Error::domain(format!(
                    "warp {}: instruction slot {} not greater than previous slot {}",
                    warp.0, slot, last.slot
                )));
            }
        }
        self.accesses[idx].push(TraceAccess { slot, block });
        Ok(())
    }

    pub fn set_compute_len(&mut self, warp: WarpId, len: u32) -> Result<()> {
        let idx = self.check_warp(warp)?;
        self.compute_len[idx] = len;
        Ok(())
    }

    fn check_warp(&self, warp: WarpId) -> Result<usize> {
        if warp.0 >= self.geometry.warp_count() {
            return Err(Error::domain(format!(
                "warp {} outside tile with {} warps",
                warp.0,
                self.geometry.warp_count()
            )));
        }
        Ok(warp.0 as usize)
    }

    pub fn accesses_of(&self, warp: WarpId) -> &[TraceAccess] {
        &self.accesses[warp.0 as usize]
    }

    pub fn compute_len_of(&self, warp: WarpId) -> u32 {
        self.compute_len[warp.0 as usize]
    }

    /// Total instruction count of one warp (memory + compute).
    pub fn instructions_of(&self, warp: WarpId) -> u32 {
        self.accesses[warp.0 as usize].len() as u32 + self.compute_len[warp.0 as usize]
    }

    pub fn total_instructions(&self) -> u64 {
        self.geometry
            .warps()
            .map(|w| self.instructions_of(w) as u64)
            .sum()
    }

    pub fn total_accesses(&self) -> u64 {
        self.accesses.iter().map(|a| a.len() as u64).sum()
    }

    /// Every warp's slots must stay below that warp's total instruction count.
    pub fn validate(&self) -> Result<()> {
        for w in self.geometry.warps() {
            let total = self.instructions_of(w);
            if let Some(last) = self.accesses[w.0 as usize].last() {
                if last.slot >= total {
                    return Err(Error::domain(format!(
                        "warp {}: instruction slot {} out of range (total instructions {})",
                        w.0, last.slot, total
                    )));
                }
            }
        }
        Ok(())
    }

    /// The set of distinct blocks appearing anywhere in the trace.
    pub fn unique_blocks(&self) -> BTreeSet<MemBlockId> {
        self.accesses
            .iter()
            .flat_map(|list| list.iter().map(|a| a.block))
            .collect()
    }
}
