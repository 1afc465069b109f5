//! Small shared helpers: a stable PRNG, power-of-two math, content hashing.

/// SplitMix64. Hand-rolled so that generated datasets are bit-identical
/// across platforms and library upgrades (reports embed dataset hashes).
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    /// Uniform in [0, n). Modulo bias is < 2^-32 for the ranges used here.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }
}

pub fn is_pow2(n: u64) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// Smallest power of two >= n (n > 0).
pub fn pow2_ceil(n: u64) -> u64 {
    n.next_power_of_two()
}

pub fn log2(n: u64) -> u32 {
    debug_assert!(is_pow2(n));
    n.trailing_zeros()
}

pub fn div_ceil(a: u64, b: u64) -> u64 {
    (a + b - 1) / b
}

/// FNV-1a over a byte stream; used for dataset provenance hashes in reports.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rng_is_deterministic() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn pow2_helpers() {
        assert!(is_pow2(1) && is_pow2(64) && !is_pow2(12));
        assert_eq!(pow2_ceil(3), 4);
        assert_eq!(pow2_ceil(4), 4);
        assert_eq!(log2(1024), 10);
        assert_eq!(div_ceil(1000, 256), 4);
    }
}
