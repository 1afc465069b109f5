//! Static geometry of the tile grid (tiles -> dies -> packages), data
//! ownership mapping, dimension-ordered route computation, and link
//! classification for latency/energy accounting.
//!
//! Tile ids are row-major over the global grid; die and package membership
//! are derived from coordinate bit fields, which keeps link classification
//! O(1). All side lengths are powers of two so that destination tiles can be
//! sliced straight out of array-index bits (header-free routing).

use crate::error::{Error, Result};
use crate::util::{div_ceil, is_pow2, log2, pow2_ceil};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NocTopology {
    Mesh,
    FoldedTorus,
}

impl NocTopology {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mesh" => Ok(NocTopology::Mesh),
            "folded_torus" | "torus" => Ok(NocTopology::FoldedTorus),
            other => Err(Error::config(format!(
                "unknown NoC topology mode `{other}` (expected mesh|folded_torus)"
            ))),
        }
    }
    pub fn name(self) -> &'static str {
        match self {
            NocTopology::Mesh => "mesh",
            NocTopology::FoldedTorus => "folded_torus",
        }
    }
}

/// Span of the wrap-around links. Only `System` (the whole allocated grid)
/// is routable for a single workload; smaller scopes would split the tile-NoC
/// into disconnected tori and are rejected at validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TorusScope {
    Die,
    Package,
    System,
}

impl TorusScope {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "die" => Ok(TorusScope::Die),
            "package" => Ok(TorusScope::Package),
            "system" => Ok(TorusScope::System),
            other => Err(Error::config(format!(
                "unknown torus scope `{other}` (expected die|package|system)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TileId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    North,
    South,
    East,
    West,
    Local,
}

impl Port {
    pub const DIRECTIONS: [Port; 4] = [Port::North, Port::South, Port::East, Port::West];

    pub fn opposite(self) -> Port {
        match self {
            Port::North => Port::South,
            Port::South => Port::North,
            Port::East => Port::West,
            Port::West => Port::East,
            Port::Local => Port::Local,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Port::North => 0,
            Port::South => 1,
            Port::East => 2,
            Port::West => 3,
            Port::Local => 4,
        }
    }

    pub fn is_x(self) -> bool {
        matches!(self, Port::East | Port::West)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkKind {
    IntraDie,
    DieToDie,
    OffPackage,
}

/// Latency/energy parameters of one hop class. Built by the NoC layer from
/// the energy model; every router-to-router hop maps to exactly one class.
#[derive(Debug, Clone, Copy)]
pub struct LinkClass {
    pub kind: LinkKind,
    pub latency_cycles: u32,
    pub energy_pj_per_bit: f64,
}

/// Tile/die/package hierarchy of the allocated grid.
#[derive(Debug, Clone, Copy)]
pub struct GridGeometry {
    pub tiles_per_die_side: u32,
    pub dies_per_package_side: u32,
    pub packages_x: u32,
    pub packages_y: u32,
    width: u32,
    height: u32,
    // Power-of-two sides let every coordinate op be a shift/mask.
    w_shift: u32,
    w_mask: u32,
}

impl GridGeometry {
    pub fn new(
        tiles_per_die_side: u32,
        dies_per_package_side: u32,
        packages_x: u32,
        packages_y: u32,
    ) -> Result<Self> {
        for (name, v) in [
            ("tiles_per_die_side", tiles_per_die_side),
            ("dies_per_package_side", dies_per_package_side),
            ("packages_x", packages_x),
            ("packages_y", packages_y),
        ] {
            if !is_pow2(v as u64) {
                return Err(Error::config(format!(
                    "{name} must be a power of two, got {v}"
                )));
            }
        }
        let side = tiles_per_die_side * dies_per_package_side;
        let width = side * packages_x;
        Ok(GridGeometry {
            tiles_per_die_side,
            dies_per_package_side,
            packages_x,
            packages_y,
            width,
            height: side * packages_y,
            w_shift: width.trailing_zeros(),
            w_mask: width - 1,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn tile_count(&self) -> u32 {
        self.width * self.height
    }
    pub fn die_side(&self) -> u32 {
        self.tiles_per_die_side
    }
    pub fn package_side(&self) -> u32 {
        self.tiles_per_die_side * self.dies_per_package_side
    }
    pub fn dies_x(&self) -> u32 {
        self.width / self.die_side()
    }
    pub fn dies_y(&self) -> u32 {
        self.height / self.die_side()
    }
    pub fn die_count(&self) -> u32 {
        self.dies_x() * self.dies_y()
    }
    pub fn tiles_per_die(&self) -> u32 {
        self.die_side() * self.die_side()
    }

    #[inline]
    pub fn xy(&self, t: TileId) -> (u32, u32) {
        (t.0 & self.w_mask, t.0 >> self.w_shift)
    }

    #[inline]
    pub fn at(&self, x: u32, y: u32) -> TileId {
        debug_assert!(x < self.width && y < self.height);
        TileId((y << self.w_shift) | x)
    }

    pub fn die_of(&self, t: TileId) -> u32 {
        let (x, y) = self.xy(t);
        (y / self.die_side()) * self.dies_x() + x / self.die_side()
    }

    pub fn package_of(&self, t: TileId) -> u32 {
        let (x, y) = self.xy(t);
        let side = self.package_side();
        (y / side) * self.packages_x + x / side
    }

    /// Chunk of each equal-sized shard: ceil(len / tiles) rounded up to a
    /// power of two, so the owner is a bit field of the index. Trailing
    /// tiles may own empty ranges.
    pub fn chunk_size(&self, array_len: u64) -> u64 {
        debug_assert!(array_len > 0);
        pow2_ceil(div_ceil(array_len, self.tile_count() as u64))
    }

    /// Owner tile of one array element.
    pub fn owner_tile(&self, index: u64, array_len: u64) -> Result<TileId> {
        if array_len == 0 {
            return Err(Error::input("owner_tile: array_len must be > 0"));
        }
        if index >= array_len {
            return Err(Error::input(format!(
                "owner_tile: index {index} out of range for array of length {array_len}"
            )));
        }
        let shift = log2(self.chunk_size(array_len));
        Ok(TileId((index >> shift) as u32))
    }

    /// Closed-form variant used on the hot path once the caller has
    /// validated the index.
    pub fn owner_tile_fast(&self, index: u32, chunk_shift: u32) -> TileId {
        TileId(index >> chunk_shift)
    }

    /// Half-open element range owned by a tile.
    pub fn owned_range(&self, t: TileId, array_len: u64) -> (u64, u64) {
        let chunk = self.chunk_size(array_len);
        let start = (t.0 as u64 * chunk).min(array_len);
        let end = ((t.0 as u64 + 1) * chunk).min(array_len);
        (start, end)
    }

    /// One step of dimension-ordered XY routing: X fully resolved before Y.
    /// In torus mode each dimension is a ring and the minimal direction is
    /// taken (ties go to the increasing coordinate).
    pub fn route_next_hop(&self, cur: TileId, dst: TileId, mode: NocTopology) -> Port {
        if cur == dst {
            return Port::Local;
        }
        let (cx, cy) = self.xy(cur);
        let (dx, dy) = self.xy(dst);
        if cx != dx {
            if step_dir(cx, dx, self.width, mode) > 0 {
                Port::East
            } else {
                Port::West
            }
        } else if step_dir(cy, dy, self.height, mode) > 0 {
            Port::South
        } else {
            Port::North
        }
    }

    /// Minimal hop count between two tiles in the configured topology.
    pub fn hop_count(&self, a: TileId, b: TileId, mode: NocTopology) -> u32 {
        let (ax, ay) = self.xy(a);
        let (bx, by) = self.xy(b);
        axis_dist(ax, bx, self.width, mode) + axis_dist(ay, by, self.height, mode)
    }

    /// Neighbor in one direction, honoring wrap links in torus mode.
    /// `None` at a mesh edge.
    pub fn neighbor(&self, t: TileId, port: Port, mode: NocTopology) -> Option<TileId> {
        let (x, y) = self.xy(t);
        let (w, h) = (self.width, self.height);
        let wrap = mode == NocTopology::FoldedTorus;
        let (nx, ny) = match port {
            Port::East => {
                if x + 1 < w {
                    (x + 1, y)
                } else if wrap && w > 1 {
                    (0, y)
                } else {
                    return None;
                }
            }
            Port::West => {
                if x > 0 {
                    (x - 1, y)
                } else if wrap && w > 1 {
                    (w - 1, y)
                } else {
                    return None;
                }
            }
            Port::South => {
                if y + 1 < h {
                    (x, y + 1)
                } else if wrap && h > 1 {
                    (x, 0)
                } else {
                    return None;
                }
            }
            Port::North => {
                if y > 0 {
                    (x, y - 1)
                } else if wrap && h > 1 {
                    (x, h - 1)
                } else {
                    return None;
                }
            }
            Port::Local => return Some(t),
        };
        Some(self.at(nx, ny))
    }

    /// Classify one router-to-router hop. Non-adjacent pairs are a router
    /// bug, not an input error.
    pub fn classify_hop(&self, cur: TileId, next: TileId, mode: NocTopology) -> Result<LinkKind> {
        let adjacent = Port::DIRECTIONS
            .iter()
            .any(|&p| self.neighbor(cur, p, mode) == Some(next));
        if !adjacent {
            return Err(Error::invariant(format!(
                "classify_hop: tiles {} and {} are not adjacent",
                cur.0, next.0
            )));
        }
        Ok(self.classify_ids(cur, next))
    }

    pub fn classify_ids(&self, a: TileId, b: TileId) -> LinkKind {
        if self.die_of(a) == self.die_of(b) {
            LinkKind::IntraDie
        } else if self.package_of(a) == self.package_of(b) {
            LinkKind::DieToDie
        } else {
            LinkKind::OffPackage
        }
    }
}

fn step_dir(c: u32, d: u32, n: u32, mode: NocTopology) -> i32 {
    match mode {
        NocTopology::Mesh => {
            if d > c {
                1
            } else {
                -1
            }
        }
        NocTopology::FoldedTorus => {
            let fwd = (d + n - c) % n;
            if fwd <= n - fwd {
                1
            } else {
                -1
            }
        }
    }
}

fn axis_dist(a: u32, b: u32, n: u32, mode: NocTopology) -> u32 {
    let d = a.abs_diff(b);
    match mode {
        NocTopology::Mesh => d,
        NocTopology::FoldedTorus => d.min(n - d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::Rng;

    fn grid_16x16() -> GridGeometry {
        // One 16x16 die.
        GridGeometry::new(16, 1, 1, 1).unwrap()
    }

    fn grid_8x8() -> GridGeometry {
        GridGeometry::new(8, 1, 1, 1).unwrap()
    }

    #[test]
    fn rejects_non_pow2_sides() {
        assert!(GridGeometry::new(12, 1, 1, 1).is_err());
        assert!(GridGeometry::new(16, 3, 1, 1).is_err());
    }

    #[test]
    fn owner_tile_examples() {
        let g = grid_16x16(); // 256 tiles
        assert_eq!(g.owner_tile(0, 1024).unwrap(), TileId(0));
        assert_eq!(g.owner_tile(37, 1024).unwrap(), TileId(9)); // chunk = 4
        assert!(matches!(g.owner_tile(1023, 1000), Err(Error::Input(_))));
    }

    #[test]
    fn owner_map_matches_brute_force_chunk_table() {
        // Independent oracle: explicit chunk table for len 64 over 16 tiles.
        let g = GridGeometry::new(4, 1, 1, 1).unwrap();
        let len = 64u64;
        let chunk = 4u64; // ceil(64/16) = 4, already a power of two
        let mut table = vec![0u32; len as usize];
        for t in 0..16u64 {
            for i in t * chunk..((t + 1) * chunk).min(len) {
                table[i as usize] = t as u32;
            }
        }
        for i in 0..len {
            assert_eq!(g.owner_tile(i, len).unwrap().0, table[i as usize]);
        }
    }

    #[test]
    fn owner_is_a_bit_slice_of_the_index() {
        let g = grid_16x16();
        let mut rng = Rng::new(7);
        for &len in &[1024u64, 4096, 100_000, 250] {
            let shift = log2(g.chunk_size(len));
            for _ in 0..200 {
                let i = rng.below(len);
                assert_eq!(g.owner_tile(i, len).unwrap().0 as u64, i >> shift);
            }
        }
    }

    #[test]
    fn ownership_partition_covers_without_overlap() {
        let g = grid_8x8();
        let mut rng = Rng::new(3);
        for _ in 0..20 {
            let len = 1 + rng.below(10_000);
            let mut seen = vec![false; len as usize];
            for t in 0..g.tile_count() {
                let (s, e) = g.owned_range(TileId(t), len);
                for i in s..e {
                    assert!(!seen[i as usize], "overlap at {i}");
                    seen[i as usize] = true;
                }
            }
            assert!(seen.iter().all(|&v| v), "coverage gap for len {len}");
        }
    }

    #[test]
    fn route_identity_is_local() {
        let g = grid_8x8();
        let t = g.at(3, 5);
        assert_eq!(g.route_next_hop(t, t, NocTopology::Mesh), Port::Local);
        assert_eq!(g.route_next_hop(t, t, NocTopology::FoldedTorus), Port::Local);
    }

    #[test]
    fn mesh_hop_count_is_manhattan() {
        let g = grid_8x8();
        assert_eq!(
            g.hop_count(g.at(0, 0), g.at(3, 2), NocTopology::Mesh),
            5
        );
    }

    #[test]
    fn torus_ring_of_8_wraps_in_one_hop() {
        let g = GridGeometry::new(8, 1, 1, 1).unwrap();
        assert_eq!(
            g.hop_count(g.at(0, 0), g.at(7, 0), NocTopology::FoldedTorus),
            1
        );
        assert_eq!(
            g.route_next_hop(g.at(0, 0), g.at(7, 0), NocTopology::FoldedTorus),
            Port::West
        );
    }

    /// BFS over the constructed link graph as an independent distance oracle.
    fn bfs_dist(g: &GridGeometry, src: TileId, mode: NocTopology) -> Vec<u32> {
        let n = g.tile_count() as usize;
        let mut dist = vec![u32::MAX; n];
        dist[src.0 as usize] = 0;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(src);
        while let Some(t) = queue.pop_front() {
            for &p in &Port::DIRECTIONS {
                if let Some(nb) = g.neighbor(t, p, mode) {
                    if dist[nb.0 as usize] == u32::MAX {
                        dist[nb.0 as usize] = dist[t.0 as usize] + 1;
                        queue.push_back(nb);
                    }
                }
            }
        }
        dist
    }

    #[test]
    fn all_pairs_torus_hops_match_bfs_oracle() {
        let g = grid_8x8();
        for a in 0..g.tile_count() {
            let dist = bfs_dist(&g, TileId(a), NocTopology::FoldedTorus);
            for b in 0..g.tile_count() {
                assert_eq!(
                    g.hop_count(TileId(a), TileId(b), NocTopology::FoldedTorus),
                    dist[b as usize],
                    "pair ({a},{b})"
                );
            }
        }
    }

    #[test]
    fn mesh_routes_are_symmetric_and_torus_never_worse() {
        let g = grid_8x8();
        for a in 0..g.tile_count() {
            for b in 0..g.tile_count() {
                let m = g.hop_count(TileId(a), TileId(b), NocTopology::Mesh);
                let m_rev = g.hop_count(TileId(b), TileId(a), NocTopology::Mesh);
                let t = g.hop_count(TileId(a), TileId(b), NocTopology::FoldedTorus);
                assert_eq!(m, m_rev);
                assert!(t <= m);
            }
        }
    }

    #[test]
    fn routes_reach_destination_and_are_minimal() {
        let g = grid_8x8();
        let mut rng = Rng::new(11);
        for &mode in &[NocTopology::Mesh, NocTopology::FoldedTorus] {
            for _ in 0..200 {
                let a = TileId(rng.below(64) as u32);
                let b = TileId(rng.below(64) as u32);
                let mut cur = a;
                let mut hops = 0;
                while cur != b {
                    let p = g.route_next_hop(cur, b, mode);
                    cur = g.neighbor(cur, p, mode).expect("route fell off the grid");
                    hops += 1;
                    assert!(hops <= 64, "route did not converge");
                }
                assert_eq!(hops, g.hop_count(a, b, mode));
            }
        }
    }

    #[test]
    fn hop_classification_follows_die_and_package_fields() {
        // 2x1 packages of 2x2 dies of 16x16 tiles: 64x32 tiles total,
        // package boundary at x=32.
        let g = GridGeometry::new(16, 2, 2, 1).unwrap();
        assert_eq!((g.width(), g.height()), (64, 32));
        // Inside one die.
        assert_eq!(
            g.classify_hop(g.at(0, 0), g.at(1, 0), NocTopology::Mesh).unwrap(),
            LinkKind::IntraDie
        );
        // Crossing tile 15 -> 16 on one row crosses dies within a package.
        assert_eq!(
            g.classify_hop(g.at(15, 0), g.at(16, 0), NocTopology::Mesh).unwrap(),
            LinkKind::DieToDie
        );
        // Crossing x=31 -> x=32 crosses packages.
        assert_eq!(
            g.classify_hop(g.at(31, 0), g.at(32, 0), NocTopology::Mesh).unwrap(),
            LinkKind::OffPackage
        );
        // Non-adjacent pair is an internal error.
        assert!(g.classify_hop(g.at(0, 0), g.at(5, 5), NocTopology::Mesh).is_err());
    }
}
