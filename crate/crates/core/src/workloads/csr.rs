//! Compressed-sparse-row graph container and its on-disk format.
//!
//! File layout (little-endian): magic "TCSR", u64 vertex count, u64 edge
//! count, u64 flags (bit 0: weights present), offsets as u64[V+1],
//! neighbors as u32[E], weights as u32[E] when flagged.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const TCSR_MAGIC: &[u8; 4] = b"TCSR";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrGraph {
    pub v: u64,
    pub e: u64,
    pub offsets: Vec<u64>,
    pub neighbors: Vec<u32>,
    pub weights: Option<Vec<u32>>,
}

impl CsrGraph {
    pub fn from_edges(v: u64, edges: &[(u32, u32)], weights: Option<&[u32]>) -> Self {
        let mut offsets = vec![0u64; v as usize + 1];
        for &(src, _) in edges {
            offsets[src as usize + 1] += 1;
        }
        for i in 0..v as usize {
            offsets[i + 1] += offsets[i];
        }
        let e = edges.len();
        let mut neighbors = vec![0u32; e];
        let mut w_out = weights.map(|_| vec![0u32; e]);
        let mut cursor = offsets.clone();
        for (k, &(src, dst)) in edges.iter().enumerate() {
            let pos = cursor[src as usize] as usize;
            neighbors[pos] = dst;
            if let (Some(out), Some(w)) = (w_out.as_mut(), weights) {
                out[pos] = w[k];
            }
            cursor[src as usize] += 1;
        }
        CsrGraph { v, e: e as u64, offsets, neighbors, weights: w_out }
    }

    pub fn degree(&self, v: u64) -> u64 {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    pub fn neighbors_of(&self, v: u64) -> &[u32] {
        let (s, e) = (self.offsets[v as usize] as usize, self.offsets[v as usize + 1] as usize);
        &self.neighbors[s..e]
    }

    pub fn validate(&self) -> Result<()> {
        if self.offsets.len() as u64 != self.v + 1 {
            return Err(Error::input("csr: offsets length must be V+1"));
        }
        if self.offsets[0] != 0 || *self.offsets.last().unwrap() != self.e {
            return Err(Error::input("csr: offsets must start at 0 and end at E"));
        }
        if self.offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::input("csr: offsets must be non-decreasing"));
        }
        if self.neighbors.len() as u64 != self.e {
            return Err(Error::input("csr: neighbor count must equal E"));
        }
        if self.neighbors.iter().any(|&n| n as u64 >= self.v) {
            return Err(Error::input("csr: neighbor id out of range"));
        }
        if let Some(w) = &self.weights {
            if w.len() as u64 != self.e {
                return Err(Error::input("csr: weight count must equal E"));
            }
        }
        Ok(())
    }

    /// Union with the reversed edge set (weights dropped); weak-connectivity
    /// workloads propagate against edge direction too.
    pub fn symmetrized(&self) -> CsrGraph {
        let mut edges = Vec::with_capacity(2 * self.e as usize);
        for v in 0..self.v {
            for &u in self.neighbors_of(v) {
                edges.push((v as u32, u));
                edges.push((u, v as u32));
            }
        }
        CsrGraph::from_edges(self.v, &edges, None)
    }

    pub fn write_tcsr(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(TCSR_MAGIC)?;
        w.write_all(&[0u8; 4])?; // pad the header to 8 bytes
        w.write_all(&self.v.to_le_bytes())?;
        w.write_all(&self.e.to_le_bytes())?;
        let flags: u64 = if self.weights.is_some() { 1 } else { 0 };
        w.write_all(&flags.to_le_bytes())?;
        for &o in &self.offsets {
            w.write_all(&o.to_le_bytes())?;
        }
        for &n in &self.neighbors {
            w.write_all(&n.to_le_bytes())?;
        }
        if let Some(weights) = &self.weights {
            for &x in weights {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_tcsr(path: &Path) -> Result<CsrGraph> {
        let mut r = BufReader::new(File::open(path)?);
        let mut head = [0u8; 8];
        r.read_exact(&mut head)?;
        if &head[0..4] != TCSR_MAGIC {
            return Err(Error::input(format!(
                "{}: not a TCSR file (bad magic)",
                path.display()
            )));
        }
        let mut u64buf = [0u8; 8];
        let mut read_u64 = |r: &mut BufReader<File>| -> Result<u64> {
            r.read_exact(&mut u64buf)?;
            Ok(u64::from_le_bytes(u64buf))
        };
        let v = read_u64(&mut r)?;
        let e = read_u64(&mut r)?;
        let flags = read_u64(&mut r)?;
        let mut offsets = vec![0u64; v as usize + 1];
        let mut buf = vec![0u8; (v as usize + 1) * 8];
        r.read_exact(&mut buf)?;
        for (i, ch) in buf.chunks_exact(8).enumerate() {
            offsets[i] = u64::from_le_bytes(ch.try_into().unwrap());
        }
        let mut nbuf = vec![0u8; e as usize * 4];
        r.read_exact(&mut nbuf)?;
        let neighbors = nbuf
            .chunks_exact(4)
            .map(|ch| u32::from_le_bytes(ch.try_into().unwrap()))
            .collect();
        let weights = if flags & 1 != 0 {
            let mut wbuf = vec![0u8; e as usize * 4];
            r.read_exact(&mut wbuf)?;
            Some(
                wbuf.chunks_exact(4)
                    .map(|ch| u32::from_le_bytes(ch.try_into().unwrap()))
                    .collect(),
            )
        } else {
            None
        };
        let g = CsrGraph { v, e, offsets, neighbors, weights };
        g.validate()?;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: u32) -> CsrGraph {
        let edges: Vec<(u32, u32)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        CsrGraph::from_edges(n as u64, &edges, None)
    }

    #[test]
    fn from_edges_builds_valid_csr() {
        let g = path_graph(10);
        g.validate().unwrap();
        assert_eq!(g.degree(0), 1);
        assert_eq!(g.degree(9), 0);
        assert_eq!(g.neighbors_of(3), &[4]);
    }

    #[test]
    fn symmetrize_doubles_edges() {
        let g = path_graph(4);
        let s = g.symmetrized();
        s.validate().unwrap();
        assert_eq!(s.e, 6);
        assert_eq!(s.neighbors_of(1), &[0, 2]);
    }

    #[test]
    fn tcsr_round_trip() {
        let edges = vec![(0u32, 1u32), (0, 2), (2, 1), (3, 0)];
        let weights = vec![5u32, 9, 1, 7];
        let g = CsrGraph::from_edges(4, &edges, Some(&weights));
        let dir = std::env::temp_dir().join(format!("tcsr_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("g.tcsr");
        g.write_tcsr(&p).unwrap();
        let back = CsrGraph::read_tcsr(&p).unwrap();
        assert_eq!(g, back);
        std::fs::remove_dir_all(&dir).ok();
    }
}
