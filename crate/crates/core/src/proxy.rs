//! Proxy regions, proxy-ownership mapping, the write-back merge cache (P$),
//! eviction-as-task, and the selective-cascading predicate.
//!
//! The grid is subdivided into congruent regions; within each region the
//! proxy owner of an element sits at the global owner's coordinates modulo
//! the region side. That placement makes the owner its own region's proxy
//! and puts every region's proxy for an element on the element's owner-bound
//! XY route, which is what lets passing messages cascade.

use crate::error::{Error, Result};
use crate::topology::{GridGeometry, TileId};
use crate::value::{identity, merge, MergeOp, Value, ValueKind};

/// Per-task proxy configuration.
#[derive(Debug, Clone, Copy)]
pub struct ProxyConfig {
    pub region_side: u32,
    pub merge: MergeOp,
    pub kind: ValueKind,
    pub default_value: Value,
    pub lines: u32,
    /// Full per-region copy instead of a cache.
    pub full_copy: bool,
}

impl ProxyConfig {
    pub fn validate(&self, grid: &GridGeometry) -> Result<()> {
        if self.region_side == 0 || !self.region_side.is_power_of_two() {
            return Err(Error::config(format!(
                "proxy region side must be a power of two, got {}",
                self.region_side
            )));
        }
        if grid.width() % self.region_side != 0 || grid.height() % self.region_side != 0 {
            return Err(Error::config(format!(
                "proxy region side {} does not divide the {}x{} grid",
                self.region_side,
                grid.width(),
                grid.height()
            )));
        }
        if !self.full_copy && !self.lines.is_power_of_two() {
            return Err(Error::config(format!(
                "proxy cache lines must be a power of two, got {}",
                self.lines
            )));
        }
        if identity(self.merge, self.kind) != self.default_value {
            return Err(Error::config(
                "proxy default value must be the merge identity (min -> max-sentinel, add -> 0)",
            ));
        }
        Ok(())
    }

    pub fn regions(&self, grid: &GridGeometry) -> u32 {
        (grid.width() / self.region_side) * (grid.height() / self.region_side)
    }
}

/// Proxy owner of `index` inside the requesting tile's region: the tile at
/// the global owner's coordinates modulo the region side.
pub fn proxy_owner_of(
    grid: &GridGeometry,
    region_side: u32,
    index: u64,
    array_len: u64,
    requesting: TileId,
) -> TileId {
    let owner = grid
        .owner_tile(index, array_len)
        .expect("proxy_owner_of: index validated by caller");
    proxy_owner_from(grid, region_side, owner, requesting)
}

/// Hot-path variant with the chunk shift precomputed by the channel table.
#[inline]
pub fn proxy_owner_fast(
    grid: &GridGeometry,
    region_side: u32,
    index: u32,
    chunk_shift: u32,
    requesting: TileId,
) -> TileId {
    proxy_owner_from(grid, region_side, grid.owner_tile_fast(index, chunk_shift), requesting)
}

#[inline]
fn proxy_owner_from(
    grid: &GridGeometry,
    region_side: u32,
    owner: TileId,
    requesting: TileId,
) -> TileId {
    let (ox, oy) = grid.xy(owner);
    let (rx, ry) = grid.xy(requesting);
    let m = region_side - 1; // power of two
    grid.at((rx & !m) | (ox & m), (ry & !m) | (oy & m))
}

pub fn is_proxy_owner(
    grid: &GridGeometry,
    region_side: u32,
    index: u64,
    array_len: u64,
    tile: TileId,
) -> bool {
    proxy_owner_of(grid, region_side, index, array_len, tile) == tile
}

/// Cascade eligibility of a passing owner-bound message at `tile` (the
/// congestion/idleness trigger is evaluated by the router): the tile must be
/// the message's proxy owner in its own region and not the global owner.
pub fn cascade_eligible(
    grid: &GridGeometry,
    region_side: u32,
    index: u64,
    array_len: u64,
    tile: TileId,
) -> bool {
    let owner = match grid.owner_tile(index, array_len) {
        Ok(o) => o,
        Err(_) => return false,
    };
    tile != owner && is_proxy_owner(grid, region_side, index, array_len, tile)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeOutcome {
    /// Merge left the stored value identical; the message is filtered.
    Unchanged,
    /// Value updated (or installed) in place.
    Updated,
    /// A dirty victim was written back as an owner-bound task message.
    Evicted { index: u32, value: Value },
}

#[derive(Debug, Clone, Copy, Default)]
struct PLine {
    tag: u32,
    value: Value,
    valid: bool,
    dirty: bool,
}

/// Direct-mapped write-back merge cache; one element per line. A miss
/// returns the merge identity. In full-copy mode the per-region share of the
/// array is held in full and only flushes write back.
#[derive(Debug, Clone)]
pub struct ProxyCache {
    pub cfg: ProxyConfig,
    lines: Vec<PLine>,
    mask: u32,
    /// Full-copy storage, indexed by the tile's proxied-element slot.
    full: Vec<(Value, bool)>,
    full_meta: Option<FullCopyMap>,
    pub dirty_count: u32,
    pub merges: u64,
    pub filtered: u64,
    pub evictions: u64,
}

/// Slot arithmetic for full-copy mode: the elements proxied by this tile are
/// those whose owners share its in-region position; they are enumerated by
/// (owner region index, offset within the owner's chunk).
#[derive(Debug, Clone, Copy)]
struct FullCopyMap {
    chunk: u64,
    chunk_shift: u32,
    regions_x: u32,
    region_side: u32,
    grid_width: u32,
}

impl FullCopyMap {
    fn slot(&self, index: u64, owner: TileId) -> usize {
        let (ox, oy) = (owner.0 % self.grid_width, owner.0 / self.grid_width);
        let k = (oy / self.region_side) * self.regions_x + ox / self.region_side;
        (k as u64 * self.chunk + (index & (self.chunk - 1))) as usize
    }

    fn index_of(&self, slot: usize, my_pos: (u32, u32)) -> u64 {
        let k = slot as u64 >> self.chunk_shift;
        let off = slot as u64 & (self.chunk - 1);
        let ky = k as u32 / self.regions_x;
        let kx = k as u32 % self.regions_x;
        let ox = kx * self.region_side + my_pos.0 % self.region_side;
        let oy = ky * self.region_side + my_pos.1 % self.region_side;
        let owner = (oy * self.grid_width + ox) as u64;
        (owner << self.chunk_shift) | off
    }
}

impl ProxyCache {
    pub fn new(cfg: ProxyConfig, grid: &GridGeometry, array_len: u64, tile: TileId) -> Self {
        let _ = tile;
        let (full, full_meta) = if cfg.full_copy {
            let chunk = grid.chunk_size(array_len);
            let regions_x = grid.width() / cfg.region_side;
            let regions_y = grid.height() / cfg.region_side;
            let slots = regions_x as u64 * regions_y as u64 * chunk;
            (
                vec![(cfg.default_value, false); slots as usize],
                Some(FullCopyMap {
                    chunk,
                    chunk_shift: chunk.trailing_zeros(),
                    regions_x,
                    region_side: cfg.region_side,
                    grid_width: grid.width(),
                }),
            )
        } else {
            (Vec::new(), None)
        };
        ProxyCache {
            cfg,
            lines: if cfg.full_copy {
                Vec::new()
            } else {
                vec![PLine::default(); cfg.lines as usize]
            },
            mask: cfg.lines.wrapping_sub(1),
            full,
            full_meta,
            dirty_count: 0,
            merges: 0,
            filtered: 0,
            evictions: 0,
        }
    }

    /// SRAM footprint: tag + element + state bits per line, or element +
    /// dirty bit per full-copy slot.
    pub fn sram_bytes(&self) -> u64 {
        let elem = self.cfg.kind.bytes();
        if self.cfg.full_copy {
            self.full.len() as u64 * (elem + 1)
        } else {
            self.lines.len() as u64 * (4 + elem + 1)
        }
    }

    /// Merge one incoming update. The caller must be the proxy owner of
    /// `index` within its region.
    pub fn merge_update(&mut self, index: u32, value: Value, owner: TileId) -> MergeOutcome {
        self.merges += 1;
        let op = self.cfg.merge;
        let kind = self.cfg.kind;
        if self.cfg.full_copy {
            let slot = self.full_meta.unwrap().slot(index as u64, owner);
            let (stored, dirty) = self.full[slot];
            let merged = merge(op, kind, stored, value);
            if merged == stored {
                self.filtered += 1;
                return MergeOutcome::Unchanged;
            }
            if !dirty {
                self.dirty_count += 1;
            }
            self.full[slot] = (merged, true);
            return MergeOutcome::Updated;
        }
        let slot = (index & self.mask) as usize;
        let line = self.lines[slot];
        if line.valid && line.tag == index {
            let merged = merge(op, kind, line.value, value);
            if merged == line.value {
                self.filtered += 1;
                return MergeOutcome::Unchanged;
            }
            if !line.dirty {
                self.dirty_count += 1;
            }
            self.lines[slot] = PLine { tag: index, value: merged, valid: true, dirty: true };
            return MergeOutcome::Updated;
        }
        // Miss: an identity-valued update would install a line that can
        // never be written back; filter it outright.
        let merged = merge(op, kind, self.cfg.default_value, value);
        if merged == self.cfg.default_value {
            self.filtered += 1;
            return MergeOutcome::Unchanged;
        }
        let outcome = if line.valid && line.dirty {
            self.evictions += 1;
            self.dirty_count -= 1;
            MergeOutcome::Evicted { index: line.tag, value: line.value }
        } else {
            MergeOutcome::Updated
        };
        self.lines[slot] = PLine { tag: index, value: merged, valid: true, dirty: true };
        self.dirty_count += 1;
        outcome
    }

    /// Plan-time dry run: would this update evict a dirty victim / change
    /// anything? Mirrors `merge_update` without mutating.
    pub fn peek_update(&self, index: u32, value: Value, owner: TileId) -> MergeOutcome {
        let op = self.cfg.merge;
        let kind = self.cfg.kind;
        if self.cfg.full_copy {
            let slot = self.full_meta.unwrap().slot(index as u64, owner);
            let (stored, _) = self.full[slot];
            return if merge(op, kind, stored, value) == stored {
                MergeOutcome::Unchanged
            } else {
                MergeOutcome::Updated
            };
        }
        let slot = (index & self.mask) as usize;
        let line = self.lines[slot];
        if line.valid && line.tag == index {
            return if merge(op, kind, line.value, value) == line.value {
                MergeOutcome::Unchanged
            } else {
                MergeOutcome::Updated
            };
        }
        if merge(op, kind, self.cfg.default_value, value) == self.cfg.default_value {
            MergeOutcome::Unchanged
        } else if line.valid && line.dirty {
            MergeOutcome::Evicted { index: line.tag, value: line.value }
        } else {
            MergeOutcome::Updated
        }
    }

    pub fn dirty(&self) -> bool {
        self.dirty_count > 0
    }

    /// Drain one dirty entry for a flush. Min-merges stay resident and
    /// clean (the retained value keeps filtering); add-merges reset so a
    /// delta is never written back twice.
    pub fn next_flush(&mut self, my_pos: (u32, u32)) -> Option<(u32, Value)> {
        if self.dirty_count == 0 {
            return None;
        }
        if self.cfg.full_copy {
            let meta = self.full_meta.unwrap();
            for slot in 0..self.full.len() {
                if self.full[slot].1 {
                    let value = self.full[slot].0;
                    let index = meta.index_of(slot, my_pos);
                    match self.cfg.merge {
                        MergeOp::Min => self.full[slot].1 = false,
                        MergeOp::Add => self.full[slot] = (self.cfg.default_value, false),
                    }
                    self.dirty_count -= 1;
                    return Some((index as u32, value));
                }
            }
        } else {
            for slot in 0..self.lines.len() {
                if self.lines[slot].valid && self.lines[slot].dirty {
                    let (tag, value) = (self.lines[slot].tag, self.lines[slot].value);
                    match self.cfg.merge {
                        MergeOp::Min => self.lines[slot].dirty = false,
                        MergeOp::Add => self.lines[slot] = PLine::default(),
                    }
                    self.dirty_count -= 1;
                    return Some((tag, value));
                }
            }
        }
        debug_assert!(false, "dirty_count out of sync");
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::Rng;

    fn grid(side: u32) -> GridGeometry {
        GridGeometry::new(side.min(16), (side / side.min(16)).max(1), 1, 1).unwrap()
    }

    fn cfg_min(region: u32, lines: u32) -> ProxyConfig {
        ProxyConfig {
            region_side: region,
            merge: MergeOp::Min,
            kind: ValueKind::U32,
            default_value: identity(MergeOp::Min, ValueKind::U32),
            lines,
            full_copy: false,
        }
    }

    #[test]
    fn index_zero_maps_to_region_origin() {
        let g = grid(8);
        for t in 0..64 {
            let p = proxy_owner_of(&g, 4, 0, 64, TileId(t));
            let (x, y) = g.xy(p);
            assert_eq!((x % 4, y % 4), (0, 0));
            let (tx, ty) = g.xy(TileId(t));
            assert_eq!((x / 4, y / 4), (tx / 4, ty / 4));
        }
    }

    #[test]
    fn region_count_formula() {
        let g = grid(16);
        assert_eq!(cfg_min(4, 16).regions(&g), 16);
        assert_eq!(cfg_min(8, 16).regions(&g), 4);
        assert_eq!(cfg_min(16, 16).regions(&g), 1);
    }

    #[test]
    fn owner_is_its_own_regions_proxy() {
        let g = grid(8);
        let len = 256u64;
        for i in 0..len {
            let owner = g.owner_tile(i, len).unwrap();
            assert_eq!(proxy_owner_of(&g, 4, i, len, owner), owner);
        }
    }

    /// Every region the owner-bound XY route crosses has its proxy owner of
    /// that element on the route.
    #[test]
    fn en_route_regions_expose_their_proxies() {
        use crate::topology::NocTopology;
        let g = grid(8);
        let len = 256u64;
        let region = 4u32;
        for i in 0..len {
            let owner = g.owner_tile(i, len).unwrap();
            for start in 0..64u32 {
                let p = proxy_owner_of(&g, region, i, len, TileId(start));
                // Walk the XY route, collecting the route set.
                let mut route = vec![p];
                let mut cur = p;
                while cur != owner {
                    let port = g.route_next_hop(cur, owner, NocTopology::Mesh);
                    cur = g.neighbor(cur, port, NocTopology::Mesh).unwrap();
                    route.push(cur);
                }
                // Regions crossed by the route.
                let mut regions: Vec<(u32, u32)> = route
                    .iter()
                    .map(|t| {
                        let (x, y) = g.xy(*t);
                        (x / region, y / region)
                    })
                    .collect();
                regions.sort_unstable();
                regions.dedup();
                for (rx, ry) in regions {
                    let region_tile = g.at(rx * region, ry * region);
                    let rp = proxy_owner_of(&g, region, i, len, region_tile);
                    assert!(
                        route.contains(&rp),
                        "element {i}: route from {} misses region ({rx},{ry}) proxy {}",
                        p.0,
                        rp.0
                    );
                }
            }
        }
    }

    #[test]
    fn min_merge_updates_and_filters() {
        let g = grid(8);
        let mut pc = ProxyCache::new(cfg_min(4, 16), &g, 256, TileId(0));
        let owner = TileId(0);
        // Miss installs merge(default, 7) = 7, dirty.
        assert_eq!(pc.merge_update(3, Value(7), owner), MergeOutcome::Updated);
        assert!(pc.dirty());
        // Lower value updates in place.
        assert_eq!(pc.merge_update(3, Value(5), owner), MergeOutcome::Updated);
        // Higher value is filtered: no update, no traffic.
        assert_eq!(pc.merge_update(3, Value(9), owner), MergeOutcome::Unchanged);
        assert_eq!(pc.filtered, 1);
    }

    #[test]
    fn add_merge_evicts_dirty_victim_as_task() {
        let g = grid(8);
        let cfg = ProxyConfig {
            region_side: 4,
            merge: MergeOp::Add,
            kind: ValueKind::U64,
            default_value: identity(MergeOp::Add, ValueKind::U64),
            lines: 16,
            full_copy: false,
        };
        let mut pc = ProxyCache::new(cfg, &g, 256, TileId(0));
        let owner = TileId(0);
        pc.merge_update(7, Value(3), owner);
        // Index 23 maps to the same line (23 & 15 = 7): dirty victim departs
        // as an owner-bound message carrying the accumulated count.
        match pc.merge_update(23, Value(1), owner) {
            MergeOutcome::Evicted { index, value } => {
                assert_eq!(index, 7);
                assert_eq!(value, Value(3));
            }
            other => panic!("expected eviction, got {other:?}"),
        }
    }

    #[test]
    fn random_merge_sequences_match_fold_oracle() {
        let g = grid(8);
        let len = 256u64;
        for &op in &[MergeOp::Min, MergeOp::Add] {
            let kind = if op == MergeOp::Min { ValueKind::U32 } else { ValueKind::U64 };
            let cfg = ProxyConfig {
                region_side: 4,
                merge: op,
                kind,
                default_value: identity(op, kind),
                lines: 8, // tiny, to force evictions
                full_copy: false,
            };
            let mut pc = ProxyCache::new(cfg, &g, len, TileId(0));
            let mut rng = Rng::new(99);
            // Owner-side oracle folds every raw update sequentially.
            let mut oracle = vec![identity(op, kind); 32];
            let mut owner_side = vec![identity(op, kind); 32];
            for _ in 0..500 {
                let idx = rng.below(32) as u32;
                let v = Value(1 + rng.below(100));
                oracle[idx as usize] = merge(op, kind, oracle[idx as usize], v);
                let owner = g.owner_tile(idx as u64, len).unwrap();
                match pc.merge_update(idx, v, owner) {
                    MergeOutcome::Evicted { index, value } => {
                        owner_side[index as usize] =
                            merge(op, kind, owner_side[index as usize], value);
                    }
                    _ => {}
                }
            }
            // Flush the remainder and fold into the owner side.
            while let Some((idx, v)) = pc.next_flush((0, 0)) {
                owner_side[idx as usize] = merge(op, kind, owner_side[idx as usize], v);
            }
            assert_eq!(owner_side, oracle, "op {op:?}");
        }
    }

    #[test]
    fn min_emissions_are_strictly_decreasing_without_conflicts() {
        let g = grid(8);
        // Enough lines that a single index never conflicts.
        let mut pc = ProxyCache::new(cfg_min(4, 64), &g, 256, TileId(0));
        let owner = TileId(0);
        let mut rng = Rng::new(5);
        let mut emitted: Vec<u64> = Vec::new();
        for _ in 0..200 {
            pc.merge_update(9, Value(1 + rng.below(1000)), owner);
            if rng.below(4) == 0 {
                if let Some((idx, v)) = pc.next_flush((0, 0)) {
                    assert_eq!(idx, 9);
                    emitted.push(v.0);
                }
            }
        }
        for w in emitted.windows(2) {
            assert!(w[1] < w[0], "emission sequence not strictly decreasing: {emitted:?}");
        }
    }

    #[test]
    fn flush_counts_one_message_per_dirty_line() {
        let g = grid(8);
        let mut pc = ProxyCache::new(cfg_min(4, 64), &g, 256, TileId(0));
        assert!(pc.next_flush((0, 0)).is_none()); // nothing dirty
        for i in 0..16u32 {
            pc.merge_update(i, Value(i as u64), TileId(0));
        }
        let mut n = 0;
        while pc.next_flush((0, 0)).is_some() {
            n += 1;
        }
        assert_eq!(n, 16);
        assert!(!pc.dirty());
    }

    #[test]
    fn full_copy_slot_round_trip() {
        let g = grid(8);
        let len = 256u64;
        let cfg = ProxyConfig { full_copy: true, ..cfg_min(4, 1) };
        // Proxy tile at in-region position (1, 2) of region (0, 0).
        let tile = g.at(1, 2);
        let mut pc = ProxyCache::new(cfg, &g, len, tile);
        let my_pos = g.xy(tile);
        // Elements proxied here are those whose owner is congruent to (1,2).
        let mut proxied = Vec::new();
        for i in 0..len {
            if proxy_owner_of(&g, 4, i, len, tile) == tile {
                proxied.push(i);
            }
        }
        assert_eq!(proxied.len() as u64, len / 16); // len / region_tiles
        for &i in &proxied {
            let owner = g.owner_tile(i, len).unwrap();
            pc.merge_update(i as u32, Value(i), owner);
        }
        let mut drained = Vec::new();
        while let Some((idx, v)) = pc.next_flush(my_pos) {
            assert_eq!(idx as u64, v.0);
            drained.push(idx as u64);
        }
        drained.sort_unstable();
        assert_eq!(drained, proxied);
    }
}
