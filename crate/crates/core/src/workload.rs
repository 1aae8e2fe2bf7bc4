//! TileTrace production: a synthetic generator with controllable texture
//! locality, plus the line-oriented trace file format.
//!
//! The generator maps each quad center through a scaled affine transform into
//! texel space and stamps a small footprint of distinct nearby blocks. Two
//! knobs shape the result: `blocks_per_access` sets the mean distinct blocks
//! each warp touches (the CF statistic), and either `texture_scale` (quad
//! distance -> texel distance) or `reuse_target` (mean warps sharing a block)
//! sets how much neighboring quads overlap. The underlying block grid is
//! Morton-coded so spatially adjacent blocks get nearby identifiers.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tile::{TileGeometry, TileTrace, WarpId};

/// Knobs for the synthetic texture-access generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityParams {
    /// Texels packed into one 64-byte block.
    pub texels_per_block: u32,
    /// Texel distance per quad distance; lower means neighboring quads land
    /// in the same blocks more often. Ignored when `reuse_target` is set.
    pub texture_scale: f64,
    /// Mean distinct blocks per warp (realized as floor + Bernoulli on the
    /// fraction); this is the CF the trace will measure.
    pub blocks_per_access: f64,
    /// Desired mean warps per block. When set, the effective texture scale is
    /// calibrated so the generated trace's measured reuse approaches this.
    pub reuse_target: Option<f64>,
    /// Fraction of each warp's instructions that are memory accesses.
    pub mem_instr_ratio: f64,
    pub seed: u64,
}

impl Default for LocalityParams {
    fn default() -> Self {
        LocalityParams {
            texels_per_block: 16,
            texture_scale: 1.0,
            blocks_per_access: 2.5,
            reuse_target: None,
            mem_instr_ratio: 0.15,
            seed: 0,
        }
    }
}

impl LocalityParams {
    pub fn validate(&self) -> Result<()> {
        if self.texels_per_block == 0 {
            return Err(Error::config("workload.texels_per_block", "must be >= 1"));
        }
        if !(self.mem_instr_ratio > 0.0 && self.mem_instr_ratio <= 1.0) {
            return Err(Error::config(
                "workload.mem_instr_ratio",
                "must be in (0, 1]",
            ));
        }
        if !(self.blocks_per_access >= 1.0 && self.blocks_per_access <= 16.0) {
            return Err(Error::config(
                "workload.blocks_per_access",
                "must be in [1, 16]",
            ));
        }
        if self.texture_scale <= 0.0 {
            return Err(Error::config("workload.texture_scale", "must be > 0"));
        }
        if let Some(r) = self.reuse_target {
            if r < 1.0 {
                return Err(Error::config("workload.reuse_target", "must be >= 1"));
            }
        }
        Ok(())
    }
}

// Offsets stamped around the center block, nearest first. 25 entries bound
// blocks_per_access at 16 comfortably.
const NEIGHBOR_OFFSETS: [(i64, i64); 24] = [
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (-1, 1),
    (1, -1),
    (-1, -1),
    (2, 0),
    (0, 2),
    (-2, 0),
    (0, -2),
    (2, 1),
    (1, 2),
    (-2, 1),
    (-1, 2),
    (2, -1),
    (1, -2),
    (-2, -1),
    (-1, -2),
    (2, 2),
    (-2, 2),
    (2, -2),
    (-2, -2),
];

// Keeps jittered coordinates positive before Morton encoding.
const GRID_BIAS: i64 = 1 << 16;

fn interleave_bits(v: u64) -> u64 {
    let mut x = v & 0xffff_ffff;
    x = (x | (x << 16)) & 0x0000_ffff_0000_ffff;
    x = (x | (x << 8)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

fn morton(x: u64, y: u64) -> u64 {
    interleave_bits(x) | (interleave_bits(y) << 1)
}

fn warp_rng(seed: u64, warp: WarpId) -> ChaCha8Rng {
    // splitmix-style avalanche so nearby warp ids decorrelate
    let mut z = seed ^ (warp.0 as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// Generate a trace. Deterministic for fixed `(geom, params)`.
pub fn generate(geom: TileGeometry, params: &LocalityParams) -> Result<TileTrace> {
    params.validate()?;
    let scale = match params.reuse_target {
        Some(target) => calibrate_scale(geom, params, target),
        None => params.texture_scale,
    };
    Ok(generate_with_scale(geom, params, scale))
}

fn generate_with_scale(geom: TileGeometry, params: &LocalityParams, scale: f64) -> TileTrace {
    let block_side = (params.texels_per_block as f64).sqrt().ceil().max(1.0);
    let mut trace = TileTrace::new(geom);
    for w in geom.warps() {
        let c = geom.coord_of(w).unwrap();
        let mut rng = warp_rng(params.seed, w);

        let base = params.blocks_per_access.floor();
        let frac = params.blocks_per_access - base;
        let mut k = base as usize;
        if rng.gen::<f64>() < frac {
            k += 1;
        }
        let k = k.clamp(1, NEIGHBOR_OFFSETS.len() + 1);

        let jx: f64 = rng.gen_range(-0.25..0.25);
        let jy: f64 = rng.gen_range(-0.25..0.25);
        let tx = (c.x as f64 + 0.5 + jx) * scale;
        let ty = (c.y as f64 + 0.5 + jy) * scale;
        let bx = (tx / block_side).floor() as i64 + GRID_BIAS;
        let by = (ty / block_side).floor() as i64 + GRID_BIAS;

        let mut ring = NEIGHBOR_OFFSETS;
        ring.shuffle(&mut rng);
        let mut blocks = Vec::with_capacity(k);
        blocks.push((bx, by));
        blocks.extend(ring.iter().take(k - 1).map(|&(dx, dy)| (bx + dx, by + dy)));

        let n_mem = blocks.len() as u32;
        let total = ((n_mem as f64 / params.mem_instr_ratio).round() as u32).max(n_mem);
        // memory instructions sit evenly through the warp's program with a
        // per-warp phase, so fetches follow some address computation and
        // co-resident warps do not fire their loads in lockstep
        let phase: f64 = rng.gen_range(0.25..0.75);
        for (i, (gx, gy)) in blocks.into_iter().enumerate() {
            let token = morton(gx as u64, gy as u64).to_string();
            let id = trace.intern_block(&token);
            let slot = (((i as f64 + phase) * total as f64 / n_mem as f64) as u32).min(total - 1);
            trace.push_access(w, slot, id).expect("slots are increasing");
        }
        trace.set_compute_len(w, total - n_mem).unwrap();
    }
    debug_assert!(trace.validate().is_ok());
    trace
}

/// Find a texture scale whose generated trace has measured reuse close to the
/// target. Reuse falls monotonically (statistically) as the scale grows, so a
/// log-space bisection converges; every probe regenerates from the same seed,
/// keeping the result deterministic.
fn calibrate_scale(geom: TileGeometry, params: &LocalityParams, target: f64) -> f64 {
    let reuse_at = |scale: f64| -> f64 {
        let t = generate_with_scale(geom, params, scale);
        let unique = t.unique_blocks().len().max(1) as f64;
        t.total_accesses() as f64 / unique
    };
    let mut lo = 1e-3_f64; // heavy sharing
    let mut hi = 1e4_f64; // everyone alone
    if target >= reuse_at(lo) {
        return lo;
    }
    if target <= reuse_at(hi) {
        return hi;
    }
    for _ in 0..40 {
        let mid = (lo * hi).sqrt();
        let r = reuse_at(mid);
        if r > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (r - target).abs() / target < 0.02 {
            return mid;
        }
    }
    (lo * hi).sqrt()
}

/// Mean warps sharing a block: total accesses / unique blocks.
pub fn measured_reuse(trace: &TileTrace) -> Result<f64> {
    let total = trace.total_accesses();
    if total == 0 {
        return Err(Error::UndefinedStatistic(
            "reuse of a trace with no accesses".into(),
        ));
    }
    Ok(total as f64 / trace.unique_blocks().len() as f64)
}

/// CF: mean distinct blocks accessed per warp.
pub fn measured_cf(trace: &TileTrace) -> Result<f64> {
    if trace.total_accesses() == 0 {
        return Err(Error::UndefinedStatistic(
            "CF of a trace with no accesses".into(),
        ));
    }
    let geom = trace.geometry();
    let sum: u64 = geom
        .warps()
        .map(|w| {
            let mut blocks: Vec<_> = trace.accesses_of(w).iter().map(|a| a.block).collect();
            blocks.sort();
            blocks.dedup();
            blocks.len() as u64
        })
        .sum();
    Ok(sum as f64 / geom.warp_count() as f64)
}

/// Write the line-oriented trace format:
/// a `tile <width> <height>` header, one `w <warp> <slot> <block>` line per
/// access (slot-ordered within a warp) and a `c <warp> <len>` line per warp
/// with nonzero compute length. `#` starts a comment.
pub fn save_trace<W: Write>(trace: &TileTrace, mut out: W) -> std::io::Result<()> {
    let geom = trace.geometry();
    writeln!(out, "tile {} {}", geom.width_quads(), geom.height_quads())?;
    for w in geom.warps() {
        for a in trace.accesses_of(w) {
            writeln!(out, "w {} {} {}", w.0, a.slot, trace.block_token(a.block))?;
        }
        let c = trace.compute_len_of(w);
        if c > 0 {
            writeln!(out, "c {} {}", w.0, c)?;
        }
    }
    Ok(())
}

pub fn save_trace_string(trace: &TileTrace) -> String {
    let mut buf = Vec::new();
    save_trace(trace, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("trace text is utf-8")
}

/// Parse the trace format, rejecting malformed records with line-numbered
/// diagnostics.
pub fn load_trace<R: BufRead>(reader: R) -> Result<TileTrace> {
    let mut trace: Option<TileTrace> = None;
    let mut line_no = 0usize;
    for line in reader.lines() {
        line_no += 1;
        let line = line?;
        let body = match line.find('#') {
            Some(i) => &line[..i],
            None => &line[..],
        };
        let mut fields = body.split_whitespace();
        let Some(tag) = fields.next() else { continue };
        let parse_err = |msg: String| Error::TraceParse { line: line_no, msg };
        match (tag, &mut trace) {
            ("tile", slot @ None) => {
                let w: u32 = next_num(&mut fields, line_no, "width")?;
                let h: u32 = next_num(&mut fields, line_no, "height")?;
                expect_end(&mut fields, line_no)?;
                let geom = TileGeometry::new(w, h)
                    .map_err(|e| parse_err(format!("bad tile header: {e}")))?;
                *slot = Some(TileTrace::new(geom));
            }
            ("tile", Some(_)) => {
                return Err(parse_err("duplicate `tile` header".into()));
            }
            ("w", Some(t)) => {
                let warp: u32 = next_num(&mut fields, line_no, "warp id")?;
                let slot: u32 = next_num(&mut fields, line_no, "instruction slot")?;
                let token = fields
                    .next()
                    .ok_or_else(|| parse_err("missing block id".into()))?
                    .to_string();
                expect_end(&mut fields, line_no)?;
                let id = t.intern_block(&token);
                t.push_access(WarpId(warp), slot, id)
                    .map_err(|e| parse_err(e.to_string()))?;
            }
            ("c", Some(t)) => {
                let warp: u32 = next_num(&mut fields, line_no, "warp id")?;
                let len: u32 = next_num(&mut fields, line_no, "compute length")?;
                expect_end(&mut fields, line_no)?;
                t.set_compute_len(WarpId(warp), len)
                    .map_err(|e| parse_err(e.to_string()))?;
            }
            ("w" | "c", None) => {
                return Err(parse_err(
                    "record before the `tile <width> <height>` header".into(),
                ));
            }
            (other, _) => {
                return Err(parse_err(format!("unknown record tag `{other}`")));
            }
        }
    }
    let trace = trace.ok_or(Error::TraceParse {
        line: line_no,
        msg: "truncated stream: no `tile` header found".into(),
    })?;
    trace.validate()?;
    Ok(trace)
}

fn next_num<T: std::str::FromStr>(
    fields: &mut std::str::SplitWhitespace<'_>,
    line: usize,
    what: &str,
) -> Result<T> {
    let tok = fields.next().ok_or(Error::TraceParse {
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::TraceParse {
        line,
        msg: format!("invalid {what} `{tok}`"),
    })
}

fn expect_end(fields: &mut std::str::SplitWhitespace<'_>, line: usize) -> Result<()> {
    if let Some(extra) = fields.next() {
        return Err(Error::TraceParse {
            line,
            msg: format!("unexpected trailing field `{extra}`"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tile::MemBlockId;

    fn geom(w: u32, h: u32) -> TileGeometry {
        TileGeometry::new(w, h).unwrap()
    }

    #[test]
    fn generator_is_deterministic() {
        let params = LocalityParams {
            reuse_target: Some(8.0),
            seed: 7,
            ..Default::default()
        };
        let a = generate(geom(16, 16), &params).unwrap();
        let b = generate(geom(16, 16), &params).unwrap();
        assert_eq!(save_trace_string(&a), save_trace_string(&b));
    }

    #[test]
    fn reuse_calibration_hits_target_within_tolerance() {
        let params = LocalityParams {
            reuse_target: Some(16.0),
            seed: 7,
            ..Default::default()
        };
        let t = generate(geom(32, 32), &params).unwrap();
        let reuse = measured_reuse(&t).unwrap();
        assert!(
            (reuse - 16.0).abs() / 16.0 <= 0.2,
            "measured reuse {reuse} outside +/-20% of 16"
        );
    }

    #[test]
    fn huge_scale_means_no_sharing() {
        let params = LocalityParams {
            texture_scale: 1e5,
            reuse_target: None,
            seed: 3,
            ..Default::default()
        };
        let t = generate(geom(16, 16), &params).unwrap();
        let reuse = measured_reuse(&t).unwrap();
        assert!(
            (reuse - 1.0).abs() < 0.05,
            "expected reuse ~1 with a huge scale, got {reuse}"
        );
    }

    #[test]
    fn measured_cf_tracks_blocks_per_access() {
        let params = LocalityParams {
            blocks_per_access: 2.5,
            reuse_target: Some(8.0),
            seed: 11,
            ..Default::default()
        };
        let t = generate(geom(32, 32), &params).unwrap();
        let cf = measured_cf(&t).unwrap();
        assert!((cf - 2.5).abs() < 0.15, "cf {cf} far from 2.5");
    }

    #[test]
    fn mem_instr_ratio_shapes_compute_padding() {
        let params = LocalityParams {
            blocks_per_access: 2.0,
            mem_instr_ratio: 0.1,
            reuse_target: None,
            seed: 5,
            ..Default::default()
        };
        let t = generate(geom(8, 8), &params).unwrap();
        let mem = t.total_accesses() as f64;
        let total = t.total_instructions() as f64;
        assert!((mem / total - 0.1).abs() < 0.02);
    }

    #[test]
    fn measured_cf_examples() {
        // every warp accesses the same two distinct blocks -> 2.0
        let mut t = TileTrace::new(geom(3, 1));
        let a = t.intern_block("A");
        let b = t.intern_block("B");
        for w in 0..3 {
            t.push_access(WarpId(w), 0, a).unwrap();
            t.push_access(WarpId(w), 1, b).unwrap();
        }
        assert_eq!(measured_cf(&t).unwrap(), 2.0);

        // {A}, {A,B}, {B,C,D} -> (1+2+3)/3 = 2.0
        let mut t = TileTrace::new(geom(3, 1));
        let a = t.intern_block("A");
        let b = t.intern_block("B");
        let c = t.intern_block("C");
        let d = t.intern_block("D");
        t.push_access(WarpId(0), 0, a).unwrap();
        t.push_access(WarpId(1), 0, a).unwrap();
        t.push_access(WarpId(1), 1, b).unwrap();
        t.push_access(WarpId(2), 0, b).unwrap();
        t.push_access(WarpId(2), 1, c).unwrap();
        t.push_access(WarpId(2), 2, d).unwrap();
        assert_eq!(measured_cf(&t).unwrap(), 2.0);
    }

    #[test]
    fn measured_cf_of_empty_trace_is_an_error() {
        let t = TileTrace::new(geom(2, 2));
        assert!(matches!(
            measured_cf(&t),
            Err(Error::UndefinedStatistic(_))
        ));
    }

    #[test]
    fn roundtrip_of_handwritten_fixture() {
        let fixture = "tile 3 1\nw 0 0 A\nw 0 2 B\nc 0 2\nw 1 0 A\nw 2 1 C\nc 2 3\n";
        let t = load_trace(fixture.as_bytes()).unwrap();
        assert_eq!(save_trace_string(&t), fixture);
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let s = "# a fixture\n\ntile 2 1\nw 0 0 A # trailing comment\n";
        let t = load_trace(s.as_bytes()).unwrap();
        assert_eq!(t.total_accesses(), 1);
        assert_eq!(t.block_token(MemBlockId(0)), "A");
    }

    #[test]
    fn unknown_warp_names_the_line() {
        let s = "tile 2 2\nw 99 0 A\n";
        match load_trace(s.as_bytes()) {
            Err(Error::TraceParse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("99"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_monotonic_slots_rejected() {
        let s = "tile 2 1\nw 0 5 A\nw 0 5 B\n";
        match load_trace(s.as_bytes()) {
            Err(Error::TraceParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_body_with_header_is_empty_trace() {
        let t = load_trace("tile 4 4\n".as_bytes()).unwrap();
        assert_eq!(t.total_accesses(), 0);
        assert_eq!(t.geometry().warp_count(), 16);
    }

    #[test]
    fn missing_header_is_truncated_stream() {
        match load_trace("w 0 0 A\n".as_bytes()) {
            Err(Error::TraceParse { msg, .. }) => assert!(msg.contains("header"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
        match load_trace("".as_bytes()) {
            Err(Error::TraceParse { msg, .. }) => assert!(msg.contains("truncated"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn slot_past_total_instructions_rejected() {
        // slot 4 with one access and compute_len 2 -> total 3, slot out of range
        let s = "tile 1 1\nw 0 4 A\nc 0 2\n";
        assert!(load_trace(s.as_bytes()).is_err());
    }
}
