//! Per-tile SRAM budget (scratchpad or cache mode), the direct-mapped
//! write-back data cache over each tile's private DRAM partition, the HBM
//! channel bandwidth/latency model, and prefetching.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::EnergyLedger;

pub const DCACHE_LINE_BITS: u64 = 512;
pub const DCACHE_LINE_BYTES: u64 = 64;
/// D$ tag + valid/dirty bookkeeping per line, charged against the SRAM
/// budget alongside the line data.
pub const DCACHE_TAG_BYTES: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemMode {
    /// Whole dataset resident in tile SRAM; HBM and its controller are off.
    Scratchpad,
    /// SRAM holds a direct-mapped D$ backed by the tile's DRAM partition.
    DCache,
}

/// Static SRAM partitioning of one tile. Everything must fit `capacity`.
#[derive(Debug, Clone, Serialize)]
pub struct SramBudget {
    pub capacity_bytes: u64,
    pub code_bytes: u64,
    pub queue_bytes: u64,
    pub pcache_bytes: u64,
    /// Scratchpad data or D$ (lines + tags), depending on mode.
    pub data_bytes: u64,
}

impl SramBudget {
    pub fn total(&self) -> u64 {
        self.code_bytes + self.queue_bytes + self.pcache_bytes + self.data_bytes
    }

    pub fn check(&self, tile: u32) -> Result<()> {
        if self.total() > self.capacity_bytes {
            return Err(Error::capacity(format!(
                "tile {tile}: SRAM over budget by {} bytes (capacity {}, code {}, queues {}, \
                 proxy cache {}, data {})",
                self.total() - self.capacity_bytes,
                self.capacity_bytes,
                self.code_bytes,
                self.queue_bytes,
                self.pcache_bytes,
                self.data_bytes,
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct DLine {
    tag: u64,
    valid: bool,
    dirty: bool,
    /// Fill in flight until this cycle (duplicate fills merge into it).
    ready_at: u64,
}

/// Direct-mapped write-back cache: 512-bit lines matching the memory
/// controller bitline, no coherence (each tile's partition is private).
#[derive(Debug, Clone)]
pub struct DCache {
    lines: Vec<DLine>,
    mask: u64,
    pub hits: u64,
    pub misses: u64,
    pub writebacks: u64,
    pub prefetch_fills: u64,
}

impl DCache {
    pub fn new(n_lines: u32) -> Self {
        debug_assert!(n_lines.is_power_of_two());
        DCache {
            lines: vec![DLine::default(); n_lines as usize],
            mask: n_lines as u64 - 1,
            hits: 0,
            misses: 0,
            writebacks: 0,
            prefetch_fills: 0,
        }
    }

    fn slot(&self, line_addr: u64) -> usize {
        (line_addr & self.mask) as usize
    }
}

/// One HBM pseudo-channel: fixed access latency plus a FIFO service queue
/// draining one 512-bit line per cycle (64 GB/s at 1 GHz).
#[derive(Debug, Clone, Default)]
pub struct HbmChannel {
    pub next_free: u64,
    pub bytes_transferred: u64,
    /// Peak bytes moved in any bandwidth window (1000 cycles).
    pub window_start: u64,
    pub window_bytes: u64,
    pub peak_window_bytes: u64,
}

pub const BW_WINDOW_CYCLES: u64 = 1000;

impl HbmChannel {
    /// Schedule one line transfer issued at `now`; returns the cycle the
    /// data arrives (reads) or completes (write-backs).
    fn schedule(&mut self, now: u64, service_cycles: u64, latency: u64, bytes: u64) -> u64 {
        let start = self.next_free.max(now);
        self.next_free = start + service_cycles;
        if start - self.window_start >= BW_WINDOW_CYCLES {
            self.peak_window_bytes = self.peak_window_bytes.max(self.window_bytes);
            self.window_start = start - start % BW_WINDOW_CYCLES;
            self.window_bytes = 0;
        }
        self.window_bytes += bytes;
        self.peak_window_bytes = self.peak_window_bytes.max(self.window_bytes);
        self.bytes_transferred += bytes;
        start + latency
    }
}

/// Layout of one sharded array across tile partitions: each tile's slice
/// sits at a per-tile base offset in its private address space.
#[derive(Debug, Clone)]
pub struct ArrayLayout {
    pub elem_bytes: u64,
    /// Element range [start, end) held by each tile.
    pub slice_start: Vec<u64>,
    /// Partition-local byte offset of each tile's slice.
    pub base: Vec<u64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AccessOutcome {
    pub stall_cycles: u64,
    pub hit: bool,
}

/// The memory subsystem: per-tile SRAM in one of two modes, per-die HBM
/// channels, per-array layouts.
#[derive(Debug)]
pub struct MemorySys {
    pub mode: MemMode,
    dcaches: Vec<DCache>,
    pub channels: Vec<HbmChannel>,
    tile_channel: Vec<u32>,
    layouts: Vec<ArrayLayout>,
    service_cycles: u64,
    latency_cycles: u64,
    /// Dataset bits resident in DRAM (refresh energy basis).
    pub stored_bits: u64,
    pub sram_bytes_accessed: u64,
}

impl MemorySys {
    pub fn new(
        mode: MemMode,
        tiles: u32,
        tiles_per_die: u32,
        hbm_channels: u32,
        gbps_per_channel: f64,
        latency_cycles: u32,
        dcache_lines: u32,
        layouts: Vec<ArrayLayout>,
    ) -> Self {
        let n_channels = match mode {
            MemMode::Scratchpad => 0,
            MemMode::DCache => {
                (tiles as u64).div_ceil(tiles_per_die as u64) as u32 * hbm_channels
            }
        };
        // Service time of one 512-bit line at the channel rate. GB/s at the
        // 1 GHz clock is bytes/cycle: 64 GB/s drains one line per cycle.
        let bytes_per_cycle = gbps_per_channel;
        let service = (DCACHE_LINE_BYTES as f64 / bytes_per_cycle).round().max(1.0) as u64;
        let dcaches = match mode {
            MemMode::Scratchpad => Vec::new(),
            MemMode::DCache => (0..tiles).map(|_| DCache::new(dcache_lines)).collect(),
        };
        // Consecutive in-die tiles share a channel: tiles_per_die / channels
        // tiles each. The mapping is only meaningful in D$ mode.
        let ch_per_die = if mode == MemMode::DCache { hbm_channels.max(1) } else { 1 };
        let per_channel = (tiles_per_die / ch_per_die).max(1);
        let tile_channel = (0..tiles)
            .map(|t| {
                let die = t / tiles_per_die;
                let local = t % tiles_per_die;
                die * ch_per_die + (local / per_channel).min(ch_per_die - 1)
            })
            .collect();
        MemorySys {
            mode,
            dcaches,
            channels: vec![HbmChannel::default(); n_channels as usize],
            tile_channel,
            layouts,
            service_cycles: service,
            latency_cycles: latency_cycles as u64,
            stored_bits: 0,
            sram_bytes_accessed: 0,
        }
    }

    pub fn set_stored_bits(&mut self, bits: u64) {
        self.stored_bits = bits;
    }

    fn addr_of(&self, array: usize, tile: u32, index: u64) -> u64 {
        let l = &self.layouts[array];
        debug_assert!(
            index >= l.slice_start[tile as usize],
            "address below tile partition"
        );
        l.base[tile as usize] + (index - l.slice_start[tile as usize]) * l.elem_bytes
    }

    pub fn elem_bytes(&self, array: usize) -> u64 {
        self.layouts[array].elem_bytes
    }

    /// One element access from the owning tile. Scratchpad mode is a 1-cycle
    /// SRAM access; D$ mode may stall on a line fill from the tile's DRAM
    /// partition. The access op's own cycle is charged by the PU; only extra
    /// stall cycles are returned.
    pub fn access(
        &mut self,
        tile: u32,
        array: usize,
        index: u64,
        write: bool,
        now: u64,
        energy: &mut EnergyParams_,
        ledger: &mut EnergyLedger,
    ) -> AccessOutcome {
        let bits = self.layouts[array].elem_bytes * 8;
        self.sram_bytes_accessed += self.layouts[array].elem_bytes;
        let sram_pj = if write {
            energy.sram_write_pj_per_bit * bits as f64
        } else {
            energy.sram_read_pj_per_bit * bits as f64
        };
        ledger.sram_pj += sram_pj;
        match self.mode {
            MemMode::Scratchpad => AccessOutcome { stall_cycles: 0, hit: true },
            MemMode::DCache => {
                ledger.cache_tag_pj += energy.cache_tag_pj;
                let addr = self.addr_of(array, tile, index);
                let line_addr = addr / DCACHE_LINE_BYTES;
                let ch = self.tile_channel[tile as usize] as usize;
                let dc = &mut self.dcaches[tile as usize];
                let slot = dc.slot(line_addr);
                let line = &mut dc.lines[slot];
                if line.valid && line.tag == line_addr {
                    dc.hits += 1;
                    if write {
                        line.dirty = true;
                    }
                    let stall = line.ready_at.saturating_sub(now);
                    return AccessOutcome { stall_cycles: stall, hit: true };
                }
                dc.misses += 1;
                if line.valid && line.dirty {
                    dc.writebacks += 1;
                    self.channels[ch].schedule(
                        now,
                        self.service_cycles,
                        0,
                        DCACHE_LINE_BYTES,
                    );
                    // Line read out of SRAM and written to DRAM.
                    ledger.sram_pj +=
                        energy.sram_read_pj_per_bit * DCACHE_LINE_BITS as f64;
                    ledger.hbm_pj += energy.hbm_pj_per_bit * DCACHE_LINE_BITS as f64;
                }
                let ready = self.channels[ch].schedule(
                    now,
                    self.service_cycles,
                    self.latency_cycles,
                    DCACHE_LINE_BYTES,
                );
                ledger.hbm_pj += energy.hbm_pj_per_bit * DCACHE_LINE_BITS as f64;
                ledger.sram_pj += energy.sram_write_pj_per_bit * DCACHE_LINE_BITS as f64;
                let line = &mut self.dcaches[tile as usize].lines[slot];
                line.tag = line_addr;
                line.valid = true;
                line.dirty = write;
                line.ready_at = ready;
                AccessOutcome { stall_cycles: ready - now, hit: false }
            }
        }
    }

    /// Issue a non-blocking fill for `array[index]`'s line. No effect when
    /// the line is resident or already in flight (duplicate fills merge).
    pub fn prefetch(
        &mut self,
        tile: u32,
        array: usize,
        index: u64,
        now: u64,
        energy: &mut EnergyParams_,
        ledger: &mut EnergyLedger,
    ) -> bool {
        if self.mode != MemMode::DCache {
            return false;
        }
        let addr = self.addr_of(array, tile, index);
        let line_addr = addr / DCACHE_LINE_BYTES;
        let ch = self.tile_channel[tile as usize] as usize;
        let dc = &mut self.dcaches[tile as usize];
        let slot = dc.slot(line_addr);
        let line = &mut dc.lines[slot];
        if line.valid && line.tag == line_addr {
            return false; // resident or in flight
        }
        if line.valid && line.dirty {
            dc.writebacks += 1;
            self.channels[ch].schedule(now, self.service_cycles, 0, DCACHE_LINE_BYTES);
            ledger.sram_pj += energy.sram_read_pj_per_bit * DCACHE_LINE_BITS as f64;
            ledger.hbm_pj += energy.hbm_pj_per_bit * DCACHE_LINE_BITS as f64;
        }
        let ready =
            self.channels[ch].schedule(now, self.service_cycles, self.latency_cycles, DCACHE_LINE_BYTES);
        ledger.hbm_pj += energy.hbm_pj_per_bit * DCACHE_LINE_BITS as f64;
        ledger.sram_pj += energy.sram_write_pj_per_bit * DCACHE_LINE_BITS as f64;
        let dc = &mut self.dcaches[tile as usize];
        dc.prefetch_fills += 1;
        let line = &mut dc.lines[slot];
        line.tag = line_addr;
        line.valid = true;
        line.dirty = false;
        line.ready_at = ready;
        true
    }

    /// Next-line prefetch target for streaming accesses, if `index+1` falls
    /// on a different cache line within the same tile slice.
    pub fn next_line_boundary(&self, array: usize, index: u64) -> bool {
        let l = &self.layouts[array];
        let per_line = DCACHE_LINE_BYTES / l.elem_bytes;
        (index + 1) % per_line == 0
    }

    pub fn refresh_energy_pj(&self, elapsed_cycles: u64, energy: &EnergyParams_) -> f64 {
        if self.channels.is_empty() {
            return 0.0;
        }
        let periods = elapsed_cycles as f64 / (energy.hbm_refresh_period_ms * 1e6);
        self.stored_bits as f64 * energy.hbm_refresh_pj_per_bit * periods
    }

    pub fn dcache_stats(&self) -> (u64, u64, u64, u64) {
        let mut agg = (0, 0, 0, 0);
        for d in &self.dcaches {
            agg.0 += d.hits;
            agg.1 += d.misses;
            agg.2 += d.writebacks;
            agg.3 += d.prefetch_fills;
        }
        agg
    }

    pub fn hbm_bytes(&self) -> u64 {
        self.channels.iter().map(|c| c.bytes_transferred).sum()
    }
}

// The energy constants struct lives in models; aliased here to keep call
// signatures readable.
pub use crate::models::EnergyParams as EnergyParams_;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::EnergyParams;

    /// 4 tiles on one die, 2 channels (tiles 0-1 on channel 0), one u32
    /// array of 4096 elements per tile (16 KiB slices), 16 D$ lines.
    fn sys(mode: MemMode) -> MemorySys {
        let layout = ArrayLayout {
            elem_bytes: 4,
            slice_start: vec![0, 4096, 8192, 12288],
            base: vec![0, 0, 0, 0],
        };
        MemorySys::new(mode, 4, 4, 2, 64.0, 50, 16, vec![layout])
    }

    #[test]
    fn scratchpad_read_is_stall_free_sram_energy() {
        let mut m = sys(MemMode::Scratchpad);
        let mut e = EnergyParams::default();
        let mut l = EnergyLedger::default();
        let out = m.access(0, 0, 3, false, 0, &mut e, &mut l);
        assert_eq!(out.stall_cycles, 0);
        // 0.18 pJ/bit * 32 bits
        assert!((l.sram_pj - 5.76).abs() < 1e-9);
        assert_eq!(m.hbm_bytes(), 0);
    }

    #[test]
    fn dcache_miss_stalls_latency_then_hits() {
        let mut m = sys(MemMode::DCache);
        let mut e = EnergyParams::default();
        let mut l = EnergyLedger::default();
        let miss = m.access(0, 0, 0, false, 0, &mut e, &mut l);
        assert!(!miss.hit);
        // Idle channel: the 50ns access latency, service slot overlapped.
        assert_eq!(miss.stall_cycles, 50);
        assert!(l.cache_tag_pj > 0.0);
        // Same line later: hit, no HBM traffic.
        let before = m.hbm_bytes();
        let hit = m.access(0, 0, 1, false, 100, &mut e, &mut l);
        assert!(hit.hit);
        assert_eq!(hit.stall_cycles, 0);
        assert_eq!(m.hbm_bytes(), before);
    }

    #[test]
    fn burst_queueing_matches_serial_service_oracle() {
        let mut m = sys(MemMode::DCache);
        let mut e = EnergyParams::default();
        let mut l = EnergyLedger::default();
        // 10 distinct lines issued at t=0 on one channel drain one per
        // cycle: the k-th fill waits k service slots, stalling 50 + k.
        for k in 0..10u64 {
            let out = m.access(0, 0, k * 16, false, 0, &mut e, &mut l);
            assert_eq!(out.stall_cycles, 50 + k, "request {k}");
        }
    }

    #[test]
    fn saturated_channel_bandwidth_is_bounded() {
        let mut m = sys(MemMode::DCache);
        let mut e = EnergyParams::default();
        let mut l = EnergyLedger::default();
        // Walk distinct lines so every access misses; back-to-back issue
        // saturates the channel at one 64-byte line per cycle.
        for t in 0..4000u64 {
            let idx = (t * 16) % 4096;
            m.access(0, 0, idx, false, t, &mut e, &mut l);
        }
        // 64 GB/s = 64 bytes/cycle: a 1000-cycle window moves <= 64_000 B
        // (fills plus dirty write-backs never exceed the service rate).
        assert!(m.channels[0].peak_window_bytes <= 64_000);
        assert!(m.channels[0].peak_window_bytes >= 63_000); // actually saturated
    }

    #[test]
    fn refresh_energy_arithmetic() {
        let mut m = sys(MemMode::DCache);
        m.set_stored_bits(1_000);
        let e = EnergyParams::default();
        // One full 32 ms period: bits * 0.22 pJ.
        let pj = m.refresh_energy_pj(32_000_000, &e);
        assert!((pj - 1_000.0 * 0.22).abs() < 1e-6);
        // Scratchpad systems have no channels and no refresh.
        let s = sys(MemMode::Scratchpad);
        assert_eq!(s.refresh_energy_pj(32_000_000, &e), 0.0);
    }

    #[test]
    fn duplicate_outstanding_fills_merge() {
        let mut m = sys(MemMode::DCache);
        let mut e = EnergyParams::default();
        let mut l = EnergyLedger::default();
        let first = m.access(0, 0, 0, false, 0, &mut e, &mut l);
        assert_eq!(first.stall_cycles, 50);
        let hbm_after_first = m.hbm_bytes();
        // Access to the same line while the fill is in flight: residual
        // stall only, no second transfer.
        let second = m.access(0, 0, 2, false, 10, &mut e, &mut l);
        assert!(second.hit);
        assert_eq!(second.stall_cycles, 40);
        assert_eq!(m.hbm_bytes(), hbm_after_first);
    }

    #[test]
    fn prefetch_skips_resident_lines() {
        let mut m = sys(MemMode::DCache);
        let mut e = EnergyParams::default();
        let mut l = EnergyLedger::default();
        assert!(m.prefetch(0, 0, 0, 0, &mut e, &mut l));
        assert!(!m.prefetch(0, 0, 1, 0, &mut e, &mut l)); // same line
        // After the fill, a demand access pays only the residual stall.
        let out = m.access(0, 0, 0, false, 20, &mut e, &mut l);
        assert!(out.hit);
        assert_eq!(out.stall_cycles, 30);
    }

    #[test]
    fn sram_budget_diagnostics_name_the_shortfall() {
        let b = SramBudget {
            capacity_bytes: 100,
            code_bytes: 50,
            queue_bytes: 30,
            pcache_bytes: 10,
            data_bytes: 20,
        };
        let err = b.check(7).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tile 7") && msg.contains("10 bytes"), "{msg}");
    }
}
