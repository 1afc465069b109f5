//! Sequential golden references: textbook implementations kept independent
//! of the simulator's execution path. PageRank's fixed-point variant uses
//! the same Q32 arithmetic as the simulated handlers so results compare
//! bit-exactly.

use std::collections::{BinaryHeap, VecDeque};

use super::csr::CsrGraph;
use crate::value::{fixed_from_f64, fixed_mul};

pub const UNREACHED: u32 = u32::MAX;

pub fn bfs(g: &CsrGraph, root: u64) -> Vec<u32> {
    let mut level = vec![UNREACHED; g.v as usize];
    level[root as usize] = 0;
    let mut q = VecDeque::new();
    q.push_back(root as u32);
    while let Some(v) = q.pop_front() {
        let next = level[v as usize] + 1;
        for &u in g.neighbors_of(v as u64) {
            if level[u as usize] == UNREACHED {
                level[u as usize] = next;
                q.push_back(u);
            }
        }
    }
    level
}

pub fn sssp(g: &CsrGraph, root: u64) -> Vec<u32> {
    let weights = g.weights.as_ref().expect("sssp oracle needs weights");
    let mut dist = vec![UNREACHED; g.v as usize];
    dist[root as usize] = 0;
    let mut heap: BinaryHeap<std::cmp::Reverse<(u64, u32)>> = BinaryHeap::new();
    heap.push(std::cmp::Reverse((0, root as u32)));
    while let Some(std::cmp::Reverse((d, v))) = heap.pop() {
        if d > dist[v as usize] as u64 {
            continue;
        }
        let (s, e) = (g.offsets[v as usize] as usize, g.offsets[v as usize + 1] as usize);
        for k in s..e {
            let u = g.neighbors[k];
            let nd = d + weights[k] as u64;
            if nd < dist[u as usize] as u64 {
                dist[u as usize] = nd as u32;
                heap.push(std::cmp::Reverse((nd, u)));
            }
        }
    }
    dist
}

/// Min-label propagation to a fixed point over the (already symmetrized)
/// edge set, seeded with vertex ids.
pub fn wcc(g: &CsrGraph) -> Vec<u32> {
    let mut label: Vec<u32> = (0..g.v as u32).collect();
    let mut q: VecDeque<u32> = (0..g.v as u32).collect();
    let mut queued = vec![true; g.v as usize];
    while let Some(v) = q.pop_front() {
        queued[v as usize] = false;
        let l = label[v as usize];
        for &u in g.neighbors_of(v as u64) {
            if l < label[u as usize] {
                label[u as usize] = l;
                if !queued[u as usize] {
                    queued[u as usize] = true;
                    q.push_back(u);
                }
            }
        }
    }
    label
}

pub const PAGERANK_DAMPING: f64 = 0.85;

/// Power iteration in Q32 fixed point: per epoch, every vertex scatters
/// rank/degree to its out-neighbors, then rank = 0.15/V + 0.85 * acc.
/// Dangling vertices scatter nothing.
pub fn pagerank_fixed(g: &CsrGraph, epochs: u32) -> Vec<i64> {
    let v = g.v as usize;
    let one_over_v = fixed_from_f64(1.0) / g.v as i64;
    let base = fixed_from_f64(1.0 - PAGERANK_DAMPING) / g.v as i64;
    let damp = fixed_from_f64(PAGERANK_DAMPING);
    let mut rank = vec![one_over_v; v];
    for _ in 0..epochs {
        let mut acc = vec![0i64; v];
        for s in 0..v {
            let deg = g.degree(s as u64);
            if deg == 0 {
                continue;
            }
            let contrib = rank[s] / deg as i64;
            for &u in g.neighbors_of(s as u64) {
                acc[u as usize] += contrib;
            }
        }
        for i in 0..v {
            rank[i] = base + fixed_mul(damp, acc[i]);
        }
    }
    rank
}

pub fn pagerank_float(g: &CsrGraph, epochs: u32) -> Vec<f64> {
    let v = g.v as usize;
    let mut rank = vec![1.0 / g.v as f64; v];
    let base = (1.0 - PAGERANK_DAMPING) / g.v as f64;
    for _ in 0..epochs {
        let mut acc = vec![0.0f64; v];
        for s in 0..v {
            let deg = g.degree(s as u64);
            if deg == 0 {
                continue;
            }
            let contrib = rank[s] / deg as f64;
            for &u in g.neighbors_of(s as u64) {
                acc[u as usize] += contrib;
            }
        }
        for i in 0..v {
            rank[i] = base + PAGERANK_DAMPING * acc[i];
        }
    }
    rank
}

/// y[c] = sum over rows v of w(v, c) * x[v]; integer Q16 x keeps the fold
/// exact in u64.
pub fn spmv(g: &CsrGraph, x: &[u64]) -> Vec<u64> {
    let weights = g.weights.as_ref().expect("spmv oracle needs weights");
    let mut y = vec![0u64; g.v as usize];
    for v in 0..g.v as usize {
        let (s, e) = (g.offsets[v] as usize, g.offsets[v + 1] as usize);
        for k in s..e {
            y[g.neighbors[k] as usize] += weights[k] as u64 * x[v];
        }
    }
    y
}

pub fn spmv_float(g: &CsrGraph, x: &[f64]) -> Vec<f64> {
    let weights = g.weights.as_ref().expect("spmv oracle needs weights");
    let mut y = vec![0.0f64; g.v as usize];
    for v in 0..g.v as usize {
        let (s, e) = (g.offsets[v] as usize, g.offsets[v + 1] as usize);
        for k in s..e {
            y[g.neighbors[k] as usize] += weights[k] as f64 * x[v];
        }
    }
    y
}

pub fn histogram(keys: &[u32], bins: u64) -> Vec<u64> {
    let mut counts = vec![0u64; bins as usize];
    for &k in keys {
        counts[(k >> 8) as usize] += 1;
    }
    counts
}

/// Traversed-edge count for TEPS: out-degrees summed over reached vertices.
pub fn traversed_edges(g: &CsrGraph, levels: &[u32]) -> u64 {
    (0..g.v)
        .filter(|&v| levels[v as usize] != UNREACHED)
        .map(|v| g.degree(v))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::Rng;

    fn cycle4() -> CsrGraph {
        // 0 -> 1 -> 2 -> 3 -> 0 plus 0 -> 3 to make level[3] = 1.
        CsrGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 3)], None)
    }

    #[test]
    fn bfs_on_cycle_with_chord() {
        assert_eq!(bfs(&cycle4(), 0), vec![0, 1, 2, 1]);
    }

    #[test]
    fn bfs_on_path_graph_counts_hops() {
        let edges: Vec<(u32, u32)> = (0..9).map(|i| (i, i + 1)).collect();
        let g = CsrGraph::from_edges(10, &edges, None);
        assert_eq!(bfs(&g, 0), (0..10).collect::<Vec<u32>>());
    }

    #[test]
    fn sssp_with_unit_weights_equals_bfs() {
        let g = super::super::rmat::generate_rmat(8, 8, 5);
        let unit = CsrGraph {
            weights: Some(vec![1; g.e as usize]),
            ..g.clone()
        };
        let d = sssp(&unit, 0);
        let l = bfs(&g, 0);
        assert_eq!(d, l);
    }

    #[test]
    fn wcc_components_on_disjoint_paths() {
        // Two components: {0,1,2} and {3,4}.
        let g = CsrGraph::from_edges(5, &[(0, 1), (1, 2), (3, 4)], None).symmetrized();
        let labels = wcc(&g);
        assert_eq!(labels, vec![0, 0, 0, 3, 3]);
    }

    #[test]
    fn spmv_matches_dense_multiply() {
        // Random 64x64 at ~5% density against a dense oracle.
        let mut rng = Rng::new(17);
        let n = 64u32;
        let mut edges = Vec::new();
        let mut weights = Vec::new();
        for r in 0..n {
            for c in 0..n {
                if rng.below(100) < 5 {
                    edges.push((r, c));
                    weights.push(1 + rng.below(255) as u32);
                }
            }
        }
        let g = CsrGraph::from_edges(n as u64, &edges, Some(&weights));
        let x: Vec<u64> = (0..n as u64).map(|_| rng.below(1 << 16)).collect();
        // Dense accumulation.
        let mut dense = vec![vec![0u64; n as usize]; n as usize];
        for (k, &(r, c)) in edges.iter().enumerate() {
            dense[r as usize][c as usize] += weights[k] as u64;
        }
        let mut want = vec![0u64; n as usize];
        for c in 0..n as usize {
            for r in 0..n as usize {
                want[c] += dense[r][c] * x[r];
            }
        }
        assert_eq!(spmv(&g, &x), want);
    }

    #[test]
    fn histogram_counts() {
        let keys = vec![0u32, 255, 256, 300, 256 * 63];
        let h = histogram(&keys, 64);
        assert_eq!(h[0], 2);
        assert_eq!(h[1], 2);
        assert_eq!(h[63], 1);
        assert_eq!(h.iter().sum::<u64>(), keys.len() as u64);
    }

    #[test]
    fn pagerank_fixed_mass_leaks_only_dangling_share() {
        let g = super::super::rmat::generate_rmat(8, 8, 9).symmetrized();
        let r = pagerank_fixed(&g, 3);
        let total: i64 = r.iter().sum();
        let one = crate::value::FIXED_ONE;
        // Isolated vertices scatter nothing, so mass only leaks, bounded by
        // the damping share of the isolated fraction.
        assert!(total <= one, "total {total}");
        assert!(total > one / 2, "total {total}");
    }

    #[test]
    fn traversed_edges_counts_only_reached() {
        let g = cycle4();
        let l = bfs(&g, 0);
        assert_eq!(traversed_edges(&g, &l), g.e);
        let l2 = vec![0, UNREACHED, UNREACHED, UNREACHED];
        assert_eq!(traversed_edges(&g, &l2), 2);
    }
}
