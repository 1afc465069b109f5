//! Recursive-matrix (Kronecker) random graph generation with the standard
//! Graph500 quadrant probabilities (0.57, 0.19, 0.19, 0.05) and edge factor
//! 16. Deterministic for a fixed seed; duplicates and self-loops are kept,
//! as kernels must tolerate them anyway.

use super::csr::CsrGraph;
use crate::util::Rng;

pub const RMAT_A: f64 = 0.57;
pub const RMAT_B: f64 = 0.19;
pub const RMAT_C: f64 = 0.19;

pub fn generate_rmat(scale: u32, edge_factor: u32, seed: u64) -> CsrGraph {
    assert!(scale >= 4, "rmat: scale must be >= 4");
    assert!(scale <= 31, "rmat: u32 vertex ids cap scale at 31");
    let v = 1u64 << scale;
    let e = edge_factor as u64 * v;
    let mut rng = Rng::new(seed);
    // Quadrant thresholds in u32 sample space.
    let t1 = (RMAT_A * 4294967296.0) as u64;
    let t2 = ((RMAT_A + RMAT_B) * 4294967296.0) as u64;
    let t3 = ((RMAT_A + RMAT_B + RMAT_C) * 4294967296.0) as u64;
    let mut edges = Vec::with_capacity(e as usize);
    let mut weights = Vec::with_capacity(e as usize);
    for _ in 0..e {
        let mut src = 0u32;
        let mut dst = 0u32;
        for _ in 0..scale {
            let r = rng.next_u32() as u64;
            let (sbit, dbit) = if r < t1 {
                (0, 0)
            } else if r < t2 {
                (0, 1)
            } else if r < t3 {
                (1, 0)
            } else {
                (1, 1)
            };
            src = (src << 1) | sbit;
            dst = (dst << 1) | dbit;
        }
        edges.push((src, dst));
        weights.push(1 + rng.below(255) as u32);
    }
    CsrGraph::from_edges(v, &edges, Some(&weights))
}

/// Uniform histogram keys over [0, bins * 256); the bin of a key is its
/// high bits (key >> 8).
pub fn generate_keys(count: u64, bins: u64, seed: u64) -> Vec<u32> {
    let mut rng = Rng::new(seed ^ 0x9e3779b97f4a7c15);
    let range = bins * 256;
    (0..count).map(|_| rng.below(range) as u32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_10_has_exactly_16k_edge_samples() {
        let g = generate_rmat(10, 16, 7);
        assert_eq!(g.v, 1024);
        assert_eq!(g.e, 16 * 1024);
        g.validate().unwrap();
        assert!(g.weights.as_ref().unwrap().iter().all(|&w| (1..=255).contains(&w)));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_rmat(8, 16, 42);
        let b = generate_rmat(8, 16, 42);
        let c = generate_rmat(8, 16, 43);
        assert_eq!(a, b);
        assert_ne!(a.neighbors, c.neighbors);
    }

    #[test]
    fn degree_distribution_is_heavy_tailed() {
        // Frozen observation for scale 14, edge factor 16, seed 1: the
        // hottest vertex collects hundreds of times the mean degree.
        let g = generate_rmat(14, 16, 1);
        let mean = g.e as f64 / g.v as f64;
        let max = (0..g.v).map(|v| g.degree(v)).max().unwrap();
        assert!(
            max as f64 >= 50.0 * mean,
            "max degree {max} not heavy-tailed vs mean {mean}"
        );
    }

    #[test]
    fn keys_fall_in_range() {
        let keys = generate_keys(1000, 64, 3);
        assert!(keys.iter().all(|&k| k < 64 * 256));
        let bins: Vec<u64> = keys.iter().map(|&k| (k >> 8) as u64).collect();
        assert!(bins.iter().any(|&b| b > 32)); // spread across the range
    }
}
