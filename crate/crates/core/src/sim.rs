//! The deterministic cycle engine: per-tile PUs and queues, the tile/die
//! router fabrics, proxy caches, the memory system, energy accounting, and
//! global quiescence with proxy flushing and epoch barriers.
//!
//! Each cycle runs three phases:
//!   1. PU phase (sequential in tile order): handler ops, dispatch, seeding,
//!      OQ injection.
//!   2. Intent phase (pure function of the frozen state, chunkable across
//!      threads): router arbitration, cascade claims.
//!   3. Commit phase (sequential in canonical node order): transfer
//!      progress, deliveries, absorptions, new transfers.
//! Results are bit-identical for any host thread count because intents
//! never mutate and commits re-validate in a fixed order.

use serde::Serialize;

use crate::config::{CascadeMode, PrefetchMode, RunConfig};
use crate::error::{Error, Result};
use crate::memory::{
    ArrayLayout, MemMode, MemorySys, SramBudget, DCACHE_LINE_BYTES, DCACHE_TAG_BYTES,
};
use crate::models::{self, EnergyLedger};
use crate::noc::{
    flits_for, Fabric, FabricKind, NocPhys, RouteKind, Transfer, TransferDest, WireMessage,
    INPORT_INJ, OUT_LOCAL,
};
use crate::proxy::{self, ProxyCache};
use crate::runtime::{tsu_select, Invocation, Plan, PlanOp, TaskKind, TaskQueues};
use crate::topology::{GridGeometry, LinkKind, NocTopology, TileId};
use crate::value::Value;
use crate::workloads::{Sharding, Workload, CH_UPDATE, TASK_EXPAND, TASK_PROXY, TASK_SOURCE};

/// Message/queue entry footprint charged against the SRAM budget (a 4-word
/// message plus queue bookkeeping).
const QUEUE_ENTRY_BYTES: u64 = 16;

#[derive(Debug, Clone)]
pub enum PuState {
    Idle,
    Running { task: usize, plan: Plan, pos: usize, stall: u64, oq_reserved: u32 },
}

#[derive(Debug)]
pub struct Tile {
    pub queues: Vec<TaskQueues>,
    pub pu: PuState,
    pub pcache: Option<ProxyCache>,
    rotate: usize,
    seed_next: u64,
    seed_end: u64,
    pub flushing: bool,
    /// Owned vertices whose frontier flag is raised, awaiting re-expansion.
    frontier: std::collections::VecDeque<u32>,
}

#[derive(Debug, Default, Clone, Serialize)]
pub struct Counters {
    pub injected: u64,
    pub ejected: u64,
    pub absorbed: u64,
    pub local_pushes: u64,
    /// Cycles a router head could not eject because the destination IQ was
    /// full (endpoint backpressure).
    pub eject_blocked_cycles: u64,
    /// Cycles an OQ head could not enter the injection buffer.
    pub inject_backpressure_cycles: u64,
    /// PU-idle cycles where IQ work existed but the OQ gate blocked it.
    pub gated_dispatch_cycles: u64,
    pub pu_ops: u64,
    pub pu_stall_cycles: u64,
    pub flit_hops_per_channel: Vec<u64>,
    pub msg_hops_per_channel: Vec<u64>,
    pub flit_hops_intra: u64,
    pub flit_hops_d2d: u64,
    pub flit_hops_off_package: u64,
    pub pcache_merges: u64,
    pub pcache_filtered: u64,
    pub pcache_evictions: u64,
    pub flush_rounds: u64,
    pub peak_cycle_sram_bytes: u64,
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Absorb {
        noc: u8,
        inport: u8,
        ch: u8,
    },
    Start {
        noc: u8,
        inport: u8,
        ch: u8,
        outport: u8,
        rot_pos: u16,
        duration: u32,
        dest: TransferDest,
        ring_entry: bool,
        ser_key: Option<(u32, u32)>,
        ser_cycles: u32,
    },
}

#[derive(Debug, Default, Clone)]
struct NodeIntents {
    actions: Vec<Action>,
    eject_blocked: u32,
}

pub struct Simulator {
    pub cfg: RunConfig,
    pub grid: GridGeometry,
    pub wl: Workload,
    pub tiles: Vec<Tile>,
    pub fabric: Fabric,
    pub die_fabric: Option<Fabric>,
    pub mem: MemorySys,
    pub ledger: EnergyLedger,
    pub counters: Counters,
    pub cycle: u64,
    pub last_result_update: u64,
    pub epochs_done: u32,
    pub tile_pitch_mm: f64,
    idle_streak: u32,
    activity: bool,
    intents: Vec<NodeIntents>,
    die_intents: Vec<NodeIntents>,
    threads: usize,
    sram_bytes_prev: u64,
    window_energy_prev: f64,
    pub peak_window_power_w: f64,
    pub busy_pu_cycles: u64,
}

impl Simulator {
    pub fn build(cfg: &RunConfig) -> Result<Simulator> {
        cfg.validate()?;
        let grid = GridGeometry::new(
            cfg.tiles_per_die_side,
            cfg.dies_per_package_side,
            cfg.packages_x,
            cfg.packages_y,
        )?;
        let wl = Workload::build(cfg, &grid)?;
        for ch in &wl.channels {
            if ch.on_die_noc && ch.route == RouteKind::RegionProxy {
                return Err(Error::config(format!(
                    "channel.{}: region-proxy routing requires a tile-NoC channel",
                    ch.name
                )));
            }
        }
        let tiles_n = grid.tile_count();

        // Memory layouts: each tile's slices packed consecutively into its
        // private address space.
        let mut layouts: Vec<ArrayLayout> = wl
            .arrays
            .iter()
            .map(|a| ArrayLayout {
                elem_bytes: a.elem_bytes,
                slice_start: a.slices.iter().map(|s| s.0).collect(),
                base: Vec::new(),
            })
            .collect();
        let mut footprint = vec![0u64; tiles_n as usize];
        for (ai, a) in wl.arrays.iter().enumerate() {
            for t in 0..tiles_n as usize {
                layouts[ai].base.push(footprint[t]);
                let (s, e) = a.slices[t];
                footprint[t] += (e - s) * a.elem_bytes;
            }
        }
        let mem_mode = if cfg.hbm.enabled { MemMode::DCache } else { MemMode::Scratchpad };
        let mut mem = MemorySys::new(
            mem_mode,
            tiles_n,
            grid.tiles_per_die(),
            cfg.hbm.channels,
            cfg.hbm.gbps_per_channel,
            cfg.hbm.latency_cycles,
            cfg.dcache_lines,
            layouts,
        );
        if mem_mode == MemMode::DCache {
            mem.set_stored_bits(footprint.iter().sum::<u64>() * 8);
            let partition =
                (cfg.hbm.gib * (1u64 << 30) as f64) as u64 / grid.tiles_per_die() as u64;
            if let Some((t, &need)) = footprint.iter().enumerate().max_by_key(|(_, &b)| b) {
                if need > partition {
                    return Err(Error::capacity(format!(
                        "tile {t}: dataset slice of {need} bytes exceeds its {partition}-byte \
                         DRAM partition (hbm.gib / tiles_per_die)"
                    )));
                }
            }
        }

        // Per-tile runtime state plus the SRAM budget check.
        let queue_bytes: u64 = wl
            .tasks
            .iter()
            .map(|t| (t.iq_size as u64 + t.oq_size as u64) * QUEUE_ENTRY_BYTES)
            .sum();
        let proxy_desc = wl.tasks.iter().find(|d| d.kind == TaskKind::UpdateProxy).cloned();
        let mut tiles = Vec::with_capacity(tiles_n as usize);
        for t in 0..tiles_n {
            let pcache = proxy_desc.as_ref().map(|d| {
                ProxyCache::new(
                    d.proxy.expect("proxy task carries its config"),
                    &grid,
                    wl.arrays[wl.roles.target].len(),
                    TileId(t),
                )
            });
            let data_bytes = match mem_mode {
                MemMode::Scratchpad => footprint[t as usize],
                MemMode::DCache => {
                    cfg.dcache_lines as u64 * (DCACHE_LINE_BYTES + DCACHE_TAG_BYTES)
                }
            };
            let budget = SramBudget {
                capacity_bytes: cfg.sram_kib * 1024,
                code_bytes: cfg.code_kib * 1024,
                queue_bytes,
                pcache_bytes: pcache.as_ref().map(|p| p.sram_bytes()).unwrap_or(0),
                data_bytes,
            };
            budget.check(t)?;
            let queues = wl
                .tasks
                .iter()
                .map(|d| TaskQueues { iq_cap: d.iq_size, oq_cap: d.oq_size, ..Default::default() })
                .collect();
            tiles.push(Tile {
                queues,
                pu: PuState::Idle,
                pcache,
                rotate: 0,
                seed_next: wl.seeds[t as usize].0,
                seed_end: wl.seeds[t as usize].1,
                flushing: false,
                frontier: std::collections::VecDeque::new(),
            });
        }

        // Fabrics.
        let value_words: Vec<u32> = wl.channels.iter().map(|c| c.value_words).collect();
        let mk_phys = |width: u32, d2d: u32, buffer: u32, chans: Vec<u8>, weights: &[u32]| {
            let mut rotation = Vec::new();
            for (slot, _) in chans.iter().enumerate() {
                for _ in 0..weights[slot].max(1) {
                    rotation.push(slot as u8);
                }
            }
            if rotation.is_empty() {
                rotation.push(0);
            }
            NocPhys {
                width_bits: width,
                d2d_width_bits: d2d,
                buffer_flits: buffer,
                channels: chans,
                rotation,
                bubble_flits: flits_for(128, width),
            }
        };
        let mut tile_nocs = Vec::new();
        for (i, n) in cfg.nocs.iter().enumerate() {
            let chans: Vec<u8> = wl
                .channels
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.on_die_noc && c.noc == i)
                .map(|(k, _)| k as u8)
                .collect();
            let weights: Vec<u32> =
                chans.iter().map(|&c| wl.channels[c as usize].weight).collect();
            tile_nocs.push(mk_phys(
                n.width_bits,
                n.d2d_width_bits,
                n.buffer_entries,
                chans,
                &weights,
            ));
        }
        let fabric = Fabric::new(
            FabricKind::Tile,
            grid,
            cfg.tile_noc_mode,
            tile_nocs,
            cfg.d2d_shared,
            value_words.clone(),
        );
        let die_chans: Vec<u8> = wl
            .channels
            .iter()
            .enumerate()
            .filter(|(_, c)| c.on_die_noc)
            .map(|(k, _)| k as u8)
            .collect();
        let die_fabric = if die_chans.is_empty() {
            None
        } else {
            let weights: Vec<u32> =
                die_chans.iter().map(|&c| wl.channels[c as usize].weight).collect();
            Some(Fabric::new(
                FabricKind::Die,
                grid,
                cfg.die_noc_mode,
                vec![mk_phys(
                    cfg.die_noc_width_bits,
                    cfg.die_noc_width_bits,
                    8,
                    die_chans,
                    &weights,
                )],
                false,
                value_words,
            ))
        };

        let tile_pitch_mm = models::tile_area_mm2(cfg.sram_kib * 1024, &cfg.cost).sqrt();
        let n_channels = wl.channels.len();
        let nodes = fabric.node_count() as usize;
        let die_nodes = die_fabric.as_ref().map(|f| f.node_count() as usize).unwrap_or(0);
        let threads = std::env::var("TASCADE_SIM_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&t| t > 0)
            .unwrap_or(1);
        Ok(Simulator {
            cfg: cfg.clone(),
            grid,
            wl,
            tiles,
            fabric,
            die_fabric,
            mem,
            ledger: EnergyLedger::default(),
            counters: Counters {
                flit_hops_per_channel: vec![0; n_channels],
                msg_hops_per_channel: vec![0; n_channels],
                ..Default::default()
            },
            cycle: 0,
            last_result_update: 0,
            epochs_done: 0,
            tile_pitch_mm,
            idle_streak: 0,
            activity: false,
            intents: vec![NodeIntents::default(); nodes],
            die_intents: vec![NodeIntents::default(); die_nodes],
            threads,
            sram_bytes_prev: 0,
            window_energy_prev: 0.0,
            peak_window_power_w: 0.0,
            busy_pu_cycles: 0,
        })
    }

    /// Simulate to global quiescence, through proxy flush rounds and epoch
    /// barriers.
    pub fn run(&mut self) -> Result<()> {
        loop {
            if self.cycle >= self.cfg.max_cycles {
                return Err(Error::invariant(format!(
                    "sim.max_cycles ({}) exceeded before quiescence",
                    self.cfg.max_cycles
                )));
            }
            self.step()?;
            if self.activity {
                self.idle_streak = 0;
                continue;
            }
            if self.quiescent() {
                if self.flush_dirty_proxies() {
                    self.counters.flush_rounds += 1;
                    continue;
                }
                if self.epochs_done < self.wl.epochs {
                    self.epoch_barrier();
                    if self.epochs_done < self.wl.epochs {
                        continue;
                    }
                }
                return Ok(());
            }
            self.idle_streak += 1;
            if self.idle_streak > 2 {
                return Err(Error::invariant(format!(
                    "deadlock: no progress at cycle {} with work outstanding \
                     (in-flight {}, queued {})",
                    self.cycle,
                    self.fabric.total_messages(),
                    self.total_queued(),
                )));
            }
        }
    }

    /// One simulated cycle.
    pub fn step(&mut self) -> Result<()> {
        self.activity = false;
        self.pu_phase()?;
        self.intent_phase();
        self.commit_phase();
        self.cycle += 1;
        self.end_of_cycle_accounting();
        #[cfg(debug_assertions)]
        self.validate_queues();
        Ok(())
    }

    /// Debug-build safety net: occupancies never exceed configured sizes
    /// and reservations stay within capacity.
    #[cfg(debug_assertions)]
    fn validate_queues(&self) {
        for (t, tile) in self.tiles.iter().enumerate() {
            for (k, q) in tile.queues.iter().enumerate() {
                debug_assert!(
                    q.iq.len() as u32 + q.iq_reserved <= q.iq_cap,
                    "tile {t} task {k}: IQ over capacity"
                );
                debug_assert!(
                    q.oq.len() as u32 + q.oq_reserved <= q.oq_cap,
                    "tile {t} task {k}: OQ over capacity"
                );
            }
        }
        for node in &self.fabric.nodes {
            for (noc_i, r) in node.nocs.iter().enumerate() {
                for port in &r.inp {
                    for fifo in port {
                        debug_assert!(
                            fifo.flits + fifo.reserved <= fifo.cap,
                            "noc {noc_i}: router buffer over capacity"
                        );
                    }
                }
            }
        }
    }

    pub fn had_activity(&self) -> bool {
        self.activity
    }

    fn end_of_cycle_accounting(&mut self) {
        let sram_now = self.mem.sram_bytes_accessed;
        let delta = sram_now - self.sram_bytes_prev;
        self.sram_bytes_prev = sram_now;
        self.counters.peak_cycle_sram_bytes = self.counters.peak_cycle_sram_bytes.max(delta);
        if self.cycle % 1000 == 0 {
            let total = self.ledger.total_pj();
            let window_pj = total - self.window_energy_prev;
            self.window_energy_prev = total;
            // 1000 cycles = 1 us.
            self.peak_window_power_w = self.peak_window_power_w.max(window_pj * 1e-12 / 1e-6);
        }
    }

    fn fab(&self, die: bool) -> &Fabric {
        if die {
            self.die_fabric.as_ref().expect("die fabric not configured")
        } else {
            &self.fabric
        }
    }

    fn fab_mut(&mut self, die: bool) -> &mut Fabric {
        if die {
            self.die_fabric.as_mut().expect("die fabric not configured")
        } else {
            &mut self.fabric
        }
    }

    // ----- phase 1: PUs, seeds, flushes, injection ------------------------

    fn pu_phase(&mut self) -> Result<()> {
        let idle_wb = self.cfg.idle_writeback;
        for t in 0..self.tiles.len() as u32 {
            let tile = &self.tiles[t as usize];
            let live = !matches!(tile.pu, PuState::Idle)
                || tile.flushing
                || tile.seed_next < tile.seed_end
                || !tile.frontier.is_empty()
                || tile.queues.iter().any(|q| !q.iq.is_empty() || !q.oq.is_empty())
                || (idle_wb && tile.pcache.as_ref().is_some_and(|p| p.dirty()));
            if !live {
                continue;
            }
            self.tile_pu_step(t)?;
            self.tile_seed_step(t);
            self.tile_frontier_step(t);
            self.tile_flush_step(t);
            if idle_wb {
                self.tile_idle_writeback(t);
            }
            self.tile_inject_step(t);
        }
        Ok(())
    }

    /// Optional staleness bound: an idle tile drains one dirty P$ entry per
    /// cycle toward the owner instead of waiting for a quiescence flush.
    fn tile_idle_writeback(&mut self, t: u32) {
        let ti = t as usize;
        if self.tiles[ti].pcache.is_none()
            || !matches!(self.tiles[ti].pu, PuState::Idle)
            || self.tiles[ti].flushing
        {
            return;
        }
        let my_pos = self.grid.xy(TileId(t));
        let tile = &mut self.tiles[ti];
        if tile.queues[TASK_PROXY].oq_free() == 0 {
            return;
        }
        let Some(pc) = tile.pcache.as_mut() else { return };
        if !pc.dirty() {
            return;
        }
        if let Some((index, value)) = pc.next_flush(my_pos) {
            tile.queues[TASK_PROXY].oq.push_back(WireMessage {
                channel: CH_UPDATE,
                dest_index: index,
                value,
            });
            self.activity = true;
        }
    }

    fn tile_pu_step(&mut self, t: u32) -> Result<()> {
        let ti = t as usize;
        if matches!(self.tiles[ti].pu, PuState::Idle) {
            let picked = {
                let wl = &self.wl;
                let grid = &self.grid;
                let tile = &self.tiles[ti];
                tsu_select(&tile.queues, &wl.tasks, tile.rotate, |task, head| {
                    head_oq_need(wl, grid, tile, task, head)
                })
            };
            match picked {
                None => {
                    if self.tiles[ti].queues.iter().any(|q| !q.iq.is_empty()) {
                        self.counters.gated_dispatch_cycles += 1;
                    }
                    return Ok(());
                }
                Some((task, need)) => self.dispatch(t, task, need),
            }
        }
        self.advance_pu(t)
    }

    fn dispatch(&mut self, t: u32, task: usize, oq_need: u32) {
        let ti = t as usize;
        let desc = self.wl.tasks[task].clone();
        self.tiles[ti].rotate = (task + 1) % self.wl.tasks.len();
        self.tiles[ti].queues[task].oq_reserved += oq_need;
        // Prefetch on dequeue: the message index names the data the handler
        // touches.
        let index = self.tiles[ti].queues[task].iq.front().expect("runnable task has work").index;
        if desc.prefetch != PrefetchMode::Off {
            for &arr in &desc.prefetch_arrays {
                if self.wl.arrays[arr].owns(t, index as u64) {
                    self.mem.prefetch(
                        t,
                        arr,
                        index as u64,
                        self.cycle,
                        &mut self.cfg.energy,
                        &mut self.ledger,
                    );
                }
            }
        }
        let tile = &mut self.tiles[ti];
        let inv = tile.queues[task].iq.front_mut().expect("runnable task has work");
        let plan = self.wl.plan(&self.grid, task, inv, tile.pcache.as_ref());
        debug_assert!(
            plan.ops().iter().filter(|op| matches!(op, PlanOp::Emit { .. })).count() as u32
                <= oq_need.max(if matches!(desc.kind, TaskKind::Update) { 1 } else { 0 }),
            "plan emissions exceed the gate's reservation"
        );
        tile.pu = PuState::Running { task, plan, pos: 0, stall: 0, oq_reserved: oq_need };
    }

    fn advance_pu(&mut self, t: u32) -> Result<()> {
        let ti = t as usize;
        let (task, op, done) = match &mut self.tiles[ti].pu {
            PuState::Idle => return Ok(()),
            PuState::Running { task, plan, pos, stall, .. } => {
                if *stall > 0 {
                    *stall -= 1;
                    self.counters.pu_stall_cycles += 1;
                    self.busy_pu_cycles += 1;
                    self.activity = true;
                    return Ok(());
                }
                let op = plan.op(*pos);
                *pos += 1;
                (*task, op, *pos >= plan.len())
            }
        };
        self.activity = true;
        self.busy_pu_cycles += 1;
        self.counters.pu_ops += 1;
        self.ledger.pu_pj += self.cfg.energy.pu_pj_per_op;
        self.execute_op(t, task, op)?;
        if done {
            self.complete_dispatch(t, task);
        }
        Ok(())
    }

    fn execute_op(&mut self, t: u32, task: usize, op: PlanOp) -> Result<()> {
        match op {
            PlanOp::Compute => {}
            PlanOp::Read { array, index } | PlanOp::Write { array, index, .. } => {
                let a = array as usize;
                if !self.wl.arrays[a].owns(t, index) {
                    return Err(Error::invariant(format!(
                        "tile {t}: handler touched {}[{index}] outside its shard \
                         (ownership breach)",
                        self.wl.arrays[a].name
                    )));
                }
                let write = matches!(op, PlanOp::Write { .. });
                if let PlanOp::Write { value, .. } = op {
                    if Some(a) == self.wl.roles.frontier {
                        if self.wl.arrays[a].data[index as usize] == 0 && value.0 != 0 {
                            self.tiles[t as usize].frontier.push_back(index as u32);
                        }
                    }
                    self.wl.arrays[a].data[index as usize] = value.0;
                    if a == self.wl.roles.target {
                        self.last_result_update = self.cycle;
                    }
                }
                let out = self.mem.access(
                    t,
                    a,
                    index,
                    write,
                    self.cycle,
                    &mut self.cfg.energy,
                    &mut self.ledger,
                );
                if out.stall_cycles > 0 {
                    if let PuState::Running { stall, .. } = &mut self.tiles[t as usize].pu {
                        *stall = out.stall_cycles;
                    }
                }
                // Streaming scans keep the next line in flight.
                if self.wl.tasks[task].prefetch == PrefetchMode::Stream
                    && self.wl.arrays[a].sharding == Sharding::LocalSlices
                    && self.mem.next_line_boundary(a, index)
                    && self.wl.arrays[a].owns(t, index + 1)
                {
                    self.mem.prefetch(
                        t,
                        a,
                        index + 1,
                        self.cycle,
                        &mut self.cfg.energy,
                        &mut self.ledger,
                    );
                }
            }
            PlanOp::ProxyMerge { index, value } => {
                let owner = self
                    .grid
                    .owner_tile(index as u64, self.wl.arrays[self.wl.roles.target].len())?;
                let pc = self.tiles[t as usize]
                    .pcache
                    .as_mut()
                    .ok_or_else(|| Error::invariant("proxy merge on a tile without a P$"))?;
                let bits = pc.cfg.kind.bytes() * 8;
                self.ledger.cache_tag_pj += self.cfg.energy.cache_tag_pj;
                self.ledger.sram_pj += self.cfg.energy.sram_write_pj_per_bit * bits as f64;
                self.mem.sram_bytes_accessed += pc.cfg.kind.bytes();
                match pc.merge_update(index, value, owner) {
                    proxy::MergeOutcome::Unchanged => self.counters.pcache_filtered += 1,
                    proxy::MergeOutcome::Updated => {}
                    proxy::MergeOutcome::Evicted { .. } => self.counters.pcache_evictions += 1,
                }
                self.counters.pcache_merges += 1;
            }
            PlanOp::Emit { channel, index, value } => {
                self.emit(t, task, WireMessage { channel, dest_index: index, value })?;
            }
        }
        Ok(())
    }

    /// Emissions land in a local IQ when this tile owns the destination
    /// (same cycle, zero NoC traffic); otherwise they enter the producing
    /// task's OQ, whose space the dispatch gate reserved.
    fn emit(&mut self, t: u32, task: usize, msg: WireMessage) -> Result<()> {
        let dest = self.dest_tile(TileId(t), &msg);
        let dest_task = self.wl.channels[msg.channel as usize].dest_task;
        if dest.0 == t && self.tiles[t as usize].queues[dest_task].iq_free() > 0 {
            self.tiles[t as usize].queues[dest_task]
                .iq
                .push_back(Invocation::new(msg.dest_index, msg.value));
            self.counters.local_pushes += 1;
            return Ok(());
        }
        let tile = &mut self.tiles[t as usize];
        let q = &mut tile.queues[task];
        if q.oq.len() as u32 >= q.oq_cap {
            return Err(Error::invariant(format!(
                "tile {t}: OQ overflow on task {task} (gate accounting bug)"
            )));
        }
        if let PuState::Running { oq_reserved, task: rt, .. } = &mut tile.pu {
            if *rt == task && *oq_reserved > 0 {
                *oq_reserved -= 1;
                q.oq_reserved -= 1;
            }
        }
        q.oq.push_back(msg);
        Ok(())
    }

    fn complete_dispatch(&mut self, t: u32, task: usize) {
        let tile = &mut self.tiles[t as usize];
        let (reenter, leftover) = match &tile.pu {
            PuState::Running { plan, oq_reserved, .. } => (plan.reenter, *oq_reserved),
            PuState::Idle => (false, 0),
        };
        tile.queues[task].oq_reserved -= leftover;
        if !reenter {
            tile.queues[task].iq.pop_front();
        }
        tile.pu = PuState::Idle;
    }

    fn tile_seed_step(&mut self, t: u32) {
        let ti = t as usize;
        while self.tiles[ti].seed_next < self.tiles[ti].seed_end {
            if self.tiles[ti].queues[TASK_SOURCE].iq_free() == 0 {
                break;
            }
            let idx = self.tiles[ti].seed_next;
            self.tiles[ti].seed_next += 1;
            self.tiles[ti].queues[TASK_SOURCE]
                .iq
                .push_back(Invocation::new(idx as u32, Value(0)));
            self.activity = true;
        }
    }

    /// Frontier scan: marked vertices re-enter the expand IQ as space
    /// allows. Marks deduplicate re-expansions, so spawn storms can never
    /// wedge the update tasks.
    fn tile_frontier_step(&mut self, t: u32) {
        let ti = t as usize;
        let Some(frontier) = self.wl.roles.frontier else { return };
        while !self.tiles[ti].frontier.is_empty() {
            if self.tiles[ti].queues[TASK_EXPAND].iq_free() == 0 {
                return;
            }
            let v = self.tiles[ti].frontier.pop_front().unwrap();
            self.wl.arrays[frontier].data[v as usize] = 0;
            self.tiles[ti].queues[TASK_EXPAND]
                .iq
                .push_back(Invocation::new(v, Value(0)));
            self.activity = true;
        }
    }

    /// Flush drain: dirty P$ entries become owner-bound messages through the
    /// proxy task's OQ, as capacity allows.
    fn tile_flush_step(&mut self, t: u32) {
        let ti = t as usize;
        if !self.tiles[ti].flushing {
            return;
        }
        let my_pos = self.grid.xy(TileId(t));
        loop {
            let tile = &mut self.tiles[ti];
            if tile.queues[TASK_PROXY].oq_free() == 0 {
                return;
            }
            let pc = tile.pcache.as_mut().expect("flushing tile has a P$");
            match pc.next_flush(my_pos) {
                Some((index, value)) => {
                    tile.queues[TASK_PROXY].oq.push_back(WireMessage {
                        channel: CH_UPDATE,
                        dest_index: index,
                        value,
                    });
                    self.activity = true;
                }
                None => {
                    tile.flushing = false;
                    return;
                }
            }
        }
    }

    fn tile_inject_step(&mut self, t: u32) {
        for task in 0..self.wl.tasks.len() {
            let Some(&msg) = self.tiles[t as usize].queues[task].oq.front() else {
                continue;
            };
            let die = self.wl.channels[msg.channel as usize].on_die_noc;
            let node = self.fab(die).node_of_tile(TileId(t));
            if self.fab_mut(die).inject(node, msg) {
                self.tiles[t as usize].queues[task].oq.pop_front();
                self.counters.injected += 1;
                self.activity = true;
            } else {
                self.counters.inject_backpressure_cycles += 1;
            }
        }
    }

    #[inline]
    fn dest_tile(&self, cur: TileId, msg: &WireMessage) -> TileId {
        let ch = &self.wl.channels[msg.channel as usize];
        match ch.route {
            RouteKind::Owner => self.grid.owner_tile_fast(msg.dest_index, ch.chunk_shift),
            RouteKind::RegionProxy => proxy::proxy_owner_fast(
                &self.grid,
                ch.proxy_region,
                msg.dest_index,
                ch.chunk_shift,
                cur,
            ),
        }
    }

    /// Destination tile as seen from a fabric node. Die-NoC channels route
    /// by owner only, so the current node never matters there.
    fn dest_tile_for(&self, die: bool, node: u32, msg: &WireMessage) -> TileId {
        if die {
            self.dest_tile(TileId(0), msg)
        } else {
            self.dest_tile(TileId(node), msg)
        }
    }

    // ----- phase 2: intents ------------------------------------------------

    fn intent_phase(&mut self) {
        let nodes = self.fabric.node_count() as usize;
        let threads = self.threads.min(nodes).max(1);
        let mut intents = std::mem::take(&mut self.intents);
        if threads > 1 && nodes >= 64 {
            let this = &*self;
            let chunk = nodes.div_ceil(threads);
            std::thread::scope(|s| {
                for (ci, slice) in intents.chunks_mut(chunk).enumerate() {
                    let base = ci * chunk;
                    s.spawn(move || {
                        for (off, out) in slice.iter_mut().enumerate() {
                            this.node_intents(false, (base + off) as u32, out);
                        }
                    });
                }
            });
        } else {
            for (n, out) in intents.iter_mut().enumerate() {
                self.node_intents(false, n as u32, out);
            }
        }
        self.intents = intents;
        if self.die_fabric.is_some() {
            let mut intents = std::mem::take(&mut self.die_intents);
            for (n, out) in intents.iter_mut().enumerate() {
                self.node_intents(true, n as u32, out);
            }
            self.die_intents = intents;
        }
    }

    /// Pure per-node arbitration against the frozen cycle state. Work is
    /// proportional to resident messages (occupancy bitmask), not router
    /// size.
    fn node_intents(&self, die: bool, n: u32, out: &mut NodeIntents) {
        out.actions.clear();
        out.eject_blocked = 0;
        let fabric = self.fab(die);
        let node = &fabric.nodes[n as usize];
        if node.msgs == 0 && node.active_transfers == 0 {
            return;
        }
        let torus = fabric.mode == NocTopology::FoldedTorus;
        let mut claimed: Option<(u8, u8, u8)> = None;
        // Selective cascading: an idle proxy owner may claim one passing
        // owner-bound message per cycle when the owner-ward port is
        // congested. Own injections are not "en route" and never cascade.
        if !die
            && self.cfg.cascade != CascadeMode::Off
            && matches!(self.tiles[n as usize].pu, PuState::Idle)
        {
            'cascade: for (noc_i, _phys) in fabric.nocs.iter().enumerate() {
                let router = &node.nocs[noc_i];
                // Inport bits below the injection row only.
                let mut m = router.occ & ((1 << (INPORT_INJ * 6)) - 1);
                while m != 0 {
                    let bit = m.trailing_zeros() as usize;
                    m &= m - 1;
                    let (inport, slot) = (bit / 6, bit % 6);
                    let ch = fabric.nocs[noc_i].channels[slot];
                    let meta = &self.wl.channels[ch as usize];
                    if !meta.cascade {
                        continue;
                    }
                    let fifo = &router.inp[inport][slot];
                    if fifo.head_locked {
                        continue;
                    }
                    let Some(msg) = fifo.head() else { continue };
                    let owner = self.grid.owner_tile_fast(msg.dest_index, meta.chunk_shift);
                    if owner.0 == n
                        || proxy::proxy_owner_fast(
                            &self.grid,
                            meta.proxy_region,
                            msg.dest_index,
                            meta.chunk_shift,
                            TileId(n),
                        ) != TileId(n)
                    {
                        continue;
                    }
                    if self.tiles[n as usize].queues[meta.proxy_task].iq_free() == 0 {
                        continue;
                    }
                    if self.cfg.cascade == CascadeMode::Contended {
                        let p = fabric.next_port(n, owner.0);
                        let congested = router.out[p.index()].is_some() || {
                            let flits = fabric.slot_flits(noc_i, slot);
                            match fabric.neighbor_node(n, p) {
                                Some(to) => {
                                    fabric.nodes[to as usize].nocs[noc_i].inp
                                        [p.opposite().index()][slot]
                                        .free()
                                        < flits
                                }
                                None => true,
                            }
                        };
                        if !congested {
                            continue;
                        }
                    }
                    out.actions.push(Action::Absorb {
                        noc: noc_i as u8,
                        inport: inport as u8,
                        ch: slot as u8,
                    });
                    claimed = Some((noc_i as u8, inport as u8, slot as u8));
                    break 'cascade;
                }
            }
        }
        // Output-port arbitration: weighted round-robin over channels, then
        // round-robin over input ports; one grant per free port per cycle.
        // Candidates are gathered once per head, then tried per port in
        // (rotation distance, inport distance) order.
        for (noc_i, phys) in fabric.nocs.iter().enumerate() {
            let router = &node.nocs[noc_i];
            if router.occ == 0 {
                continue;
            }
            // (rot_dist, in_dist, inport, slot, rot_pos) per candidate.
            let mut cands = [(0u8, 0u8, 0u8, 0u8, 0u16); 32];
            let mut cand_ports = [0u8; 32];
            let mut nc = 0usize;
            let mut m = router.occ;
            while m != 0 {
                let bit = m.trailing_zeros() as usize;
                m &= m - 1;
                let (inport, slot) = (bit / 6, bit % 6);
                if claimed == Some((noc_i as u8, inport as u8, slot as u8)) {
                    continue;
                }
                let fifo = &router.inp[inport][slot];
                if fifo.head_locked {
                    continue;
                }
                let Some(msg) = fifo.head() else { continue };
                let dest = self.dest_tile_for(die, n, msg);
                let dest_node = fabric.node_of_tile(dest);
                let port = fabric.next_port(n, dest_node);
                let outport = port.index();
                if router.out[outport].is_some() {
                    continue;
                }
                let (rd, rot_pos) =
                    rot_distance(&phys.rotation, router.rr_rot[outport], slot as u8);
                let id = (inport + 5 - router.rr_in[outport] as usize) % 5;
                cands[nc] = (rd, id as u8, inport as u8, slot as u8, rot_pos);
                cand_ports[nc] = outport as u8;
                nc += 1;
            }
            for outport in 0..5usize {
                if router.out[outport].is_some() {
                    continue;
                }
                let mut tried = 0u32;
                loop {
                    // Next candidate for this port in arbitration order.
                    let mut best: Option<usize> = None;
                    for i in 0..nc {
                        if cand_ports[i] as usize != outport || tried & (1 << i) != 0 {
                            continue;
                        }
                        if best.is_none_or(|b| {
                            (cands[i].0, cands[i].1) < (cands[b].0, cands[b].1)
                        }) {
                            best = Some(i);
                        }
                    }
                    let Some(i) = best else { break };
                    tried |= 1 << i;
                    let (_, _, inport, slot, rot_pos) = cands[i];
                    if let Some(action) =
                        self.admit(die, n, noc_i, inport as usize, slot as usize, outport, rot_pos, torus, out)
                    {
                        out.actions.push(action);
                        break;
                    }
                }
            }
        }
    }

    /// Admission control for one candidate head: IQ space for ejections,
    /// downstream credit plus the bubble margin for ring entries, and the
    /// shared D2D serializer. Returns the start action when admissible.
    #[allow(clippy::too_many_arguments)]
    fn admit(
        &self,
        die: bool,
        n: u32,
        noc_i: usize,
        inport: usize,
        slot: usize,
        outport: usize,
        rot_pos: u16,
        torus: bool,
        out: &mut NodeIntents,
    ) -> Option<Action> {
        let fabric = self.fab(die);
        let phys = &fabric.nocs[noc_i];
        let ch = phys.channels[slot];
        let meta = &self.wl.channels[ch as usize];
        let router = &fabric.nodes[n as usize].nocs[noc_i];
        let msg = router.inp[inport][slot].head()?;
        let flits = fabric.slot_flits(noc_i, slot);
        if outport == OUT_LOCAL {
            let dest = self.dest_tile_for(die, n, msg);
            if self.tiles[dest.0 as usize].queues[meta.dest_task].iq_free() == 0 {
                out.eject_blocked += 1;
                return None;
            }
            return Some(Action::Start {
                noc: noc_i as u8,
                inport: inport as u8,
                ch: slot as u8,
                outport: outport as u8,
                rot_pos,
                duration: flits,
                dest: TransferDest::Eject,
                ring_entry: false,
                ser_key: None,
                ser_cycles: 0,
            });
        }
        let port = PORTS[outport];
        let to = fabric.neighbor_node(n, port).expect("route step fell off the fabric");
        let kind = fabric.hop_kind(n, to);
        let ring_entry = torus && Fabric::enters_ring(inport, outport);
        let need = flits + if ring_entry { phys.bubble_flits } else { 0 };
        let down = &fabric.nodes[to as usize].nocs[noc_i].inp[port.opposite().index()][slot];
        if down.free() < need {
            return None;
        }
        let (duration, ser_cycles, flit_bits) = match kind {
            LinkKind::IntraDie => (flits, 0, flits as u64 * phys.width_bits as u64),
            _ => {
                let ser = flits_for(meta.bits(), phys.d2d_width_bits);
                let lat = if kind == LinkKind::DieToDie {
                    self.cfg.energy.d2d_latency_cycles
                } else {
                    self.cfg.energy.off_package_latency_cycles
                };
                (ser + lat, ser, ser as u64 * phys.d2d_width_bits as u64)
            }
        };
        let ser_key = if fabric.d2d_shared && kind != LinkKind::IntraDie {
            if fabric.serializers.get(&(n, to)).is_some_and(|&busy| busy > self.cycle) {
                return None;
            }
            Some((n, to))
        } else {
            None
        };
        Some(Action::Start {
            noc: noc_i as u8,
            inport: inport as u8,
            ch: slot as u8,
            outport: outport as u8,
            rot_pos,
            duration,
            dest: TransferDest::Forward { kind, flit_bits, to, flits },
            ring_entry,
            ser_key,
            ser_cycles,
        })
    }

    // ----- phase 3: commits --------------------------------------------------

    fn commit_phase(&mut self) {
        for n in 0..self.fabric.node_count() {
            self.counters.eject_blocked_cycles += self.intents[n as usize].eject_blocked as u64;
            self.commit_node(false, n);
        }
        if self.die_fabric.is_some() {
            for n in 0..self.die_fabric.as_ref().unwrap().node_count() {
                self.counters.eject_blocked_cycles +=
                    self.die_intents[n as usize].eject_blocked as u64;
                self.commit_node(true, n);
            }
        }
    }

    fn commit_node(&mut self, die: bool, n: u32) {
        let n_nocs = self.fab(die).nocs.len();
        // Progress active transfers; deliver completions.
        for noc_i in 0..n_nocs {
            for outport in 0..5usize {
                let Some(tr) = self.fab(die).nodes[n as usize].nocs[noc_i].out[outport] else {
                    continue;
                };
                self.activity = true;
                if tr.remaining > 1 {
                    self.fab_mut(die).nodes[n as usize].nocs[noc_i].out[outport] =
                        Some(Transfer { remaining: tr.remaining - 1, ..tr });
                    continue;
                }
                {
                    let fabric = self.fab_mut(die);
                    let router = &mut fabric.nodes[n as usize].nocs[noc_i];
                    router.out[outport] = None;
                    router.inp[tr.inport as usize][tr.ch as usize].head_locked = false;
                    fabric.nodes[n as usize].active_transfers -= 1;
                }
                self.complete_transfer(die, n, noc_i, outport, tr.inport as usize, tr.ch as usize, tr.dest);
            }
        }
        // Apply granted intents, re-validating against post-commit state.
        let mut actions = std::mem::take(if die {
            &mut self.die_intents[n as usize].actions
        } else {
            &mut self.intents[n as usize].actions
        });
        for action in actions.drain(..) {
            match action {
                Action::Absorb { noc, inport, ch } => self.commit_absorb(die, n, noc, inport, ch),
                Action::Start {
                    noc,
                    inport,
                    ch,
                    outport,
                    rot_pos,
                    duration,
                    dest,
                    ring_entry,
                    ser_key,
                    ser_cycles,
                } => self.commit_start(
                    die, n, noc, inport, ch, outport, rot_pos, duration, dest, ring_entry,
                    ser_key, ser_cycles,
                ),
            }
        }
        if die {
            self.die_intents[n as usize].actions = actions;
        } else {
            self.intents[n as usize].actions = actions;
        }
    }

    /// Pop the source head and hand it downstream: push into the neighbor's
    /// FIFO (consuming the reservation) or the destination IQ. Shared by
    /// multi-cycle transfer completions and single-cycle hops.
    fn complete_transfer(
        &mut self,
        die: bool,
        n: u32,
        noc_i: usize,
        outport: usize,
        inport: usize,
        ch_slot: usize,
        dest: TransferDest,
    ) {
        let (msg, global_ch) = {
            let fabric = self.fab_mut(die);
            let global_ch = fabric.nocs[noc_i].channels[ch_slot];
            let flits = fabric.slot_flits(noc_i, ch_slot);
            let router = &mut fabric.nodes[n as usize].nocs[noc_i];
            let fifo = &mut router.inp[inport][ch_slot];
            let msg = fifo.q.pop_front().expect("transfer without a head message");
            fifo.flits -= flits;
            if fifo.q.is_empty() {
                router.occ &= !crate::noc::occ_bit(inport, ch_slot);
            }
            fabric.nodes[n as usize].msgs -= 1;
            (msg, global_ch)
        };
        match dest {
            TransferDest::Forward { kind, flit_bits, to, flits } => {
                {
                    let fabric = self.fab_mut(die);
                    let router = &mut fabric.nodes[to as usize].nocs[noc_i];
                    let in_at = opposite_inport(outport);
                    let down = &mut router.inp[in_at][ch_slot];
                    down.reserved -= flits;
                    down.flits += flits;
                    down.q.push_back(msg);
                    router.occ |= crate::noc::occ_bit(in_at, ch_slot);
                    fabric.nodes[to as usize].msgs += 1;
                }
                let class = self.cfg.energy.link_class(kind, self.tile_pitch_mm);
                self.ledger.charge_link(kind, class.energy_pj_per_bit * flit_bits as f64);
                self.ledger.noc_router_pj +=
                    self.cfg.energy.noc_router_pj_per_bit * flit_bits as f64;
                self.counters.flit_hops_per_channel[global_ch as usize] += flits as u64;
                self.counters.msg_hops_per_channel[global_ch as usize] += 1;
                match kind {
                    LinkKind::IntraDie => self.counters.flit_hops_intra += flits as u64,
                    LinkKind::DieToDie => self.counters.flit_hops_d2d += flits as u64,
                    LinkKind::OffPackage => self.counters.flit_hops_off_package += flits as u64,
                }
            }
            TransferDest::Eject => {
                let dest_task = self.wl.channels[global_ch as usize].dest_task;
                let dest = self.dest_tile_for(die, n, &msg);
                let q = &mut self.tiles[dest.0 as usize].queues[dest_task];
                q.iq_reserved -= 1;
                q.iq.push_back(Invocation::new(msg.dest_index, msg.value));
                self.counters.ejected += 1;
            }
        }
    }

    fn commit_absorb(&mut self, die: bool, n: u32, noc: u8, inport: u8, ch: u8) {
        let (global_ch, flits) = {
            let f = self.fab(die);
            let g = f.nocs[noc as usize].channels[ch as usize];
            (g, f.slot_flits(noc as usize, ch as usize))
        };
        let proxy_task = self.wl.channels[global_ch as usize].proxy_task;
        if self.tiles[n as usize].queues[proxy_task].iq_free() == 0 {
            return;
        }
        let msg = {
            let fabric = self.fab_mut(die);
            let router = &mut fabric.nodes[n as usize].nocs[noc as usize];
            let fifo = &mut router.inp[inport as usize][ch as usize];
            if fifo.head_locked || fifo.q.is_empty() {
                return;
            }
            let msg = fifo.q.pop_front().unwrap();
            fifo.flits -= flits;
            if fifo.q.is_empty() {
                router.occ &= !crate::noc::occ_bit(inport as usize, ch as usize);
            }
            fabric.nodes[n as usize].msgs -= 1;
            msg
        };
        self.tiles[n as usize].queues[proxy_task]
            .iq
            .push_back(Invocation::new(msg.dest_index, msg.value));
        self.counters.absorbed += 1;
        self.activity = true;
    }

    #[allow(clippy::too_many_arguments)]
    fn commit_start(
        &mut self,
        die: bool,
        n: u32,
        noc: u8,
        inport: u8,
        ch: u8,
        outport: u8,
        rot_pos: u16,
        duration: u32,
        dest: TransferDest,
        ring_entry: bool,
        ser_key: Option<(u32, u32)>,
        ser_cycles: u32,
    ) {
        let head_ok = {
            let f = self.fab(die);
            let router = &f.nodes[n as usize].nocs[noc as usize];
            router.out[outport as usize].is_none() && {
                let fifo = &router.inp[inport as usize][ch as usize];
                !fifo.head_locked && !fifo.q.is_empty()
            }
        };
        if !head_ok {
            return;
        }
        match dest {
            TransferDest::Forward { to, flits, .. } => {
                let admit = {
                    let f = self.fab(die);
                    let need =
                        flits + if ring_entry { f.nocs[noc as usize].bubble_flits } else { 0 };
                    let down = &f.nodes[to as usize].nocs[noc as usize].inp
                        [opposite_inport(outport as usize)][ch as usize];
                    down.free() >= need
                        && !ser_key.is_some_and(|key| {
                            f.serializers.get(&key).is_some_and(|&b| b > self.cycle)
                        })
                };
                if !admit {
                    return;
                }
                let cycle = self.cycle;
                let fabric = self.fab_mut(die);
                fabric.nodes[to as usize].nocs[noc as usize].inp
                    [opposite_inport(outport as usize)][ch as usize]
                    .reserved += flits;
                if let Some(key) = ser_key {
                    fabric.serializers.insert(key, cycle + ser_cycles as u64);
                }
            }
            TransferDest::Eject => {
                let (msg, global_ch) = {
                    let f = self.fab(die);
                    let m = *f.nodes[n as usize].nocs[noc as usize].inp[inport as usize]
                        [ch as usize]
                        .head()
                        .unwrap();
                    (m, f.nocs[noc as usize].channels[ch as usize])
                };
                let dest_t = self.dest_tile_for(die, n, &msg);
                let dest_task = self.wl.channels[global_ch as usize].dest_task;
                if self.tiles[dest_t.0 as usize].queues[dest_task].iq_free() == 0 {
                    return;
                }
                self.tiles[dest_t.0 as usize].queues[dest_task].iq_reserved += 1;
            }
        }
        {
            let fabric = self.fab_mut(die);
            let rot_len = fabric.nocs[noc as usize].rotation.len();
            let router = &mut fabric.nodes[n as usize].nocs[noc as usize];
            router.rr_rot[outport as usize] = ((rot_pos as usize + 1) % rot_len) as u16;
            router.rr_in[outport as usize] = (inport + 1) % 5;
        }
        // The grant cycle streams the first flit: single-flit hops complete
        // immediately, so an uncontended message advances one hop per cycle.
        if duration == 1 {
            self.complete_transfer(die, n, noc as usize, outport as usize, inport as usize, ch as usize, dest);
        } else {
            let fabric = self.fab_mut(die);
            let router = &mut fabric.nodes[n as usize].nocs[noc as usize];
            router.inp[inport as usize][ch as usize].head_locked = true;
            router.out[outport as usize] =
                Some(Transfer { inport, ch, remaining: duration - 1, dest });
            fabric.nodes[n as usize].active_transfers += 1;
        }
        self.activity = true;
    }

    // ----- quiescence, flushing, epochs --------------------------------------

    fn total_queued(&self) -> u64 {
        self.tiles
            .iter()
            .map(|t| {
                t.frontier.len() as u64
                    + t.queues.iter().map(|q| q.iq.len() as u64 + q.oq.len() as u64).sum::<u64>()
            })
            .sum()
    }

    /// True iff all queues are empty, no flits are in flight, all PUs are
    /// idle, seeds are drained, and no flush is pending. Dirty proxy entries
    /// keep the run alive through `flush_dirty_proxies`.
    pub fn quiescent(&self) -> bool {
        self.fabric.is_idle()
            && self.die_fabric.as_ref().map(|f| f.is_idle()).unwrap_or(true)
            && self.tiles.iter().all(|t| {
                matches!(t.pu, PuState::Idle)
                    && !t.flushing
                    && t.seed_next == t.seed_end
                    && t.frontier.is_empty()
                    && t.queues
                        .iter()
                        .all(|q| q.iq.is_empty() && q.oq.is_empty() && q.iq_reserved == 0)
            })
    }

    pub fn dirty_proxies(&self) -> bool {
        self.tiles
            .iter()
            .any(|t| t.pcache.as_ref().map(|p| p.dirty()).unwrap_or(false))
    }

    fn flush_dirty_proxies(&mut self) -> bool {
        let mut any = false;
        for t in self.tiles.iter_mut() {
            if t.pcache.as_ref().map(|p| p.dirty()).unwrap_or(false) {
                t.flushing = true;
                any = true;
            }
        }
        any
    }

    /// Epoch barrier for scatter apps: recompute ranks from the epoch's
    /// accumulator, charge the per-tile update cost, and reseed the next
    /// epoch (the final barrier only settles ranks).
    fn epoch_barrier(&mut self) {
        let costs = self.wl.apply_epoch_update(&self.grid);
        let max_cost = costs.iter().copied().max().unwrap_or(0);
        self.cycle += max_cost;
        for &cost in &costs {
            self.counters.pu_ops += cost;
            self.busy_pu_cycles += cost;
            self.ledger.pu_pj += cost as f64 * self.cfg.energy.pu_pj_per_op;
            // One read plus two writes of one 64-bit element per owned vertex.
            let bits = 64.0 * (cost / 2) as f64;
            self.ledger.sram_pj += self.cfg.energy.sram_read_pj_per_bit * bits
                + 2.0 * self.cfg.energy.sram_write_pj_per_bit * bits;
        }
        self.epochs_done += 1;
        if self.epochs_done < self.wl.epochs {
            for t in 0..self.tiles.len() {
                self.tiles[t].seed_next = self.wl.seeds[t].0;
                self.tiles[t].seed_end = self.wl.seeds[t].1;
            }
        }
    }

    /// Drop all pending seed work so the fabric can be driven directly with
    /// `push_external_message` in network micro-scenarios.
    pub fn clear_pending_seeds(&mut self) {
        for t in self.tiles.iter_mut() {
            t.seed_next = t.seed_end;
        }
    }

    /// Inject a raw message at a tile's router, bypassing the task path.
    /// Harness hook for network micro-scenarios.
    pub fn push_external_message(&mut self, tile: u32, msg: WireMessage) -> bool {
        let die = self.wl.channels[msg.channel as usize].on_die_noc;
        let node = self.fab(die).node_of_tile(TileId(tile));
        let ok = self.fab_mut(die).inject(node, msg);
        if ok {
            self.counters.injected += 1;
        }
        ok
    }

    // ----- results -------------------------------------------------------------

    pub fn result(&self) -> Vec<u64> {
        self.wl.result().to_vec()
    }

    pub fn verify(&self) -> std::result::Result<(), String> {
        let golden = self.wl.run_oracle();
        self.wl.results_match(&self.result(), &golden)
    }

    /// Settle end-of-run refresh energy and return the total.
    pub fn refresh_and_total_energy(&mut self) -> f64 {
        self.ledger.hbm_refresh_pj = self.mem.refresh_energy_pj(self.cycle, &self.cfg.energy);
        self.ledger.total_pj()
    }

    pub fn utilization(&self) -> f64 {
        if self.cycle == 0 {
            return 0.0;
        }
        self.counters.pu_ops as f64 / (self.cycle as f64 * self.tiles.len() as f64)
    }
}

/// OQ slots the head invocation of `task` will need: exact for merge tasks
/// (a filtered update emits nothing), worst-case one message otherwise.
fn head_oq_need(
    wl: &Workload,
    grid: &GridGeometry,
    tile: &Tile,
    task: usize,
    head: &Invocation,
) -> u32 {
    match wl.tasks[task].kind {
        TaskKind::Source | TaskKind::Expand => 1,
        // Owner updates write locally (result plus frontier mark): no OQ.
        TaskKind::Update => 0,
        TaskKind::UpdateProxy => {
            let pc = tile.pcache.as_ref().expect("proxy task without P$");
            let len = wl.arrays[wl.roles.target].len();
            let owner = grid
                .owner_tile(head.index as u64, len)
                .expect("queued proxy update has a valid index");
            match pc.peek_update(head.index, head.value, owner) {
                crate::proxy::MergeOutcome::Evicted { .. } => 1,
                _ => 0,
            }
        }
    }
}

const PORTS: [crate::topology::Port; 5] = [
    crate::topology::Port::North,
    crate::topology::Port::South,
    crate::topology::Port::East,
    crate::topology::Port::West,
    crate::topology::Port::Local,
];

/// First occurrence of `slot` in the WRR rotation at or after `start`:
/// (distance, absolute position).
fn rot_distance(rotation: &[u8], start: u16, slot: u8) -> (u8, u16) {
    let len = rotation.len();
    for off in 0..len {
        let pos = (start as usize + off) % len;
        if rotation[pos] == slot {
            return (off as u8, pos as u16);
        }
    }
    debug_assert!(false, "slot missing from rotation");
    (u8::MAX, start)
}

/// Arrival inport at the receiving router for a given output direction.
fn opposite_inport(outport: usize) -> usize {
    match outport {
        0 => 1, // sent north, arrives on the south-facing inport
        1 => 0,
        2 => 3,
        3 => 2,
        _ => INPORT_INJ,
    }
}
