//! Workload construction: dataset generation/ingestion, sharding onto the
//! grid, the task-graph wiring of the six kernels, handler plans, and the
//! sequential golden oracles.
//!
//! Every app follows the same task shape: a source task seeds work, an
//! expand task scatters one message per edge/element, and an update task
//! merges at the owner (with an optional proxy-side variant merging into
//! the P$ en route).

pub mod csr;
pub mod oracle;
pub mod rmat;

use std::collections::BTreeMap;

use crate::config::{AccumMode, App, DatasetSpec, NocAssign, PrefetchMode, RunConfig};
use crate::error::{Error, Result};
use crate::noc::{ChannelMeta, RouteKind};
use crate::proxy::{ProxyCache, ProxyConfig};
use crate::runtime::{Invocation, Plan, PlanOp, TaskDescriptor, TaskKind};
use crate::topology::{GridGeometry, TileId};
use crate::util::{log2, Rng};
use crate::value::{fixed_from_f64, identity, merge, MergeOp, Value, ValueKind};
use csr::CsrGraph;

pub const TASK_SOURCE: usize = 0;
pub const TASK_EXPAND: usize = 1;
pub const TASK_UPDATE: usize = 2;
pub const TASK_PROXY: usize = 3;

pub const CH_EXPAND: u8 = 0;
pub const CH_UPDATE: u8 = 1;
pub const CH_PROXY: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sharding {
    /// Equal power-of-two chunks; the owner is a bit field of the index.
    EqualChunk,
    /// Tile-local slices derived from vertex ownership (adjacency data).
    LocalSlices,
}

#[derive(Debug, Clone)]
pub struct ArrayDef {
    pub name: &'static str,
    pub elem_bytes: u64,
    pub sharding: Sharding,
    pub data: Vec<u64>,
    /// Element range [start, end) resident on each tile.
    pub slices: Vec<(u64, u64)>,
}

impl ArrayDef {
    fn equal_chunk(
        name: &'static str,
        elem_bytes: u64,
        data: Vec<u64>,
        grid: &GridGeometry,
    ) -> Self {
        let len = data.len() as u64;
        let slices = (0..grid.tile_count())
            .map(|t| grid.owned_range(TileId(t), len))
            .collect();
        ArrayDef { name, elem_bytes, sharding: Sharding::EqualChunk, data, slices }
    }

    pub fn len(&self) -> u64 {
        self.data.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn owns(&self, tile: u32, index: u64) -> bool {
        let (s, e) = self.slices[tile as usize];
        (s..e).contains(&index)
    }
}

/// Array roles; indices into `Workload::arrays`.
#[derive(Debug, Clone, Copy)]
pub struct ArrayRoles {
    pub offsets: Option<usize>,
    pub neighbors: Option<usize>,
    pub weights: Option<usize>,
    /// Read by expand at the source index (level/dist/label/rank/x/keys).
    pub source_vals: usize,
    /// Merged by update at the destination index.
    pub target: usize,
    /// Re-expansion marks for search kernels: an improved vertex raises its
    /// frontier flag and the tile's frontier scanner feeds the expand IQ.
    pub frontier: Option<usize>,
}

#[derive(Debug)]
pub struct Workload {
    pub app: App,
    pub mode: AccumMode,
    pub graph: Option<CsrGraph>,
    pub bins: u64,
    pub arrays: Vec<ArrayDef>,
    pub roles: ArrayRoles,
    pub tasks: Vec<TaskDescriptor>,
    pub channels: Vec<ChannelMeta>,
    pub merge_op: MergeOp,
    pub kind: ValueKind,
    pub default_value: Value,
    /// Channel expand emits into (the proxy channel when proxies are on).
    pub expand_target: u8,
    pub epochs: u32,
    /// Per-tile seed ranges over the seed index space.
    pub seeds: Vec<(u64, u64)>,
    /// Index of the array holding final results.
    pub result_array: usize,
    pub dataset_hash: u64,
}

fn widen_u32(v: &[u32]) -> Vec<u64> {
    v.iter().map(|&x| x as u64).collect()
}

impl Workload {
    pub fn build(cfg: &RunConfig, grid: &GridGeometry) -> Result<Workload> {
        let (mut graph, gen_seed) = match &cfg.dataset {
            DatasetSpec::Generated { scale, edge_factor, seed } => {
                if *scale < 4 {
                    return Err(Error::config("dataset.scale must be >= 4"));
                }
                (rmat::generate_rmat(*scale, *edge_factor, *seed), *seed)
            }
            DatasetSpec::File(path) => (CsrGraph::read_tcsr(path)?, 1),
        };
        if cfg.app == App::Wcc {
            graph = graph.symmetrized();
        }
        if cfg.app == App::Sssp && graph.weights.is_none() {
            return Err(Error::config(
                "sssp needs edge weights; regenerate the dataset with weights",
            ));
        }
        let dataset_hash = hash_graph(&graph);
        let v = graph.v;
        if cfg.root >= v {
            return Err(Error::config(format!(
                "root {} out of range for {} vertices",
                cfg.root, v
            )));
        }

        let mode = cfg.accumulation;
        let (merge_op, kind) = match cfg.app {
            App::Bfs | App::Sssp | App::Wcc => (MergeOp::Min, ValueKind::U32),
            App::Pagerank => (
                MergeOp::Add,
                if mode == AccumMode::Float { ValueKind::F64 } else { ValueKind::FixedQ32 },
            ),
            App::Spmv => (
                MergeOp::Add,
                if mode == AccumMode::Float { ValueKind::F64 } else { ValueKind::U64 },
            ),
            App::Histogram => (MergeOp::Add, ValueKind::U64),
        };
        // Per-task merge/default overrides exist as knobs; reject values
        // that break the app's semantics instead of silently diverging.
        if let Some(t) = cfg.tasks.get("update") {
            if let Some(m) = t.merge {
                if m != merge_op {
                    return Err(Error::config(format!(
                        "task.update.merge {} conflicts with {}'s operator {}",
                        m.name(),
                        cfg.app.name(),
                        merge_op.name()
                    )));
                }
            }
            if let Some(d) = t.default_value {
                if Value(d) != identity(merge_op, kind) {
                    return Err(Error::config(
                        "task.update.default must equal the merge identity",
                    ));
                }
            }
        }
        let default_value = identity(merge_op, kind);

        // Arrays.
        let mut arrays: Vec<ArrayDef> = Vec::new();
        let mut roles = ArrayRoles {
            offsets: None,
            neighbors: None,
            weights: None,
            source_vals: 0,
            target: 0,
            frontier: None,
        };
        let bins = cfg.bins.unwrap_or_else(|| (v / 4).max(16));
        let push_adjacency = |arrays: &mut Vec<ArrayDef>, g: &CsrGraph| {
            let vslices: Vec<(u64, u64)> =
                (0..grid.tile_count()).map(|t| grid.owned_range(TileId(t), g.v)).collect();
            let off_slices: Vec<(u64, u64)> = vslices
                .iter()
                .map(|&(s, e)| if s < e { (s, e + 1) } else { (s, s) })
                .collect();
            let nbr_slices: Vec<(u64, u64)> = vslices
                .iter()
                .map(|&(s, e)| {
                    if s < e {
                        (g.offsets[s as usize], g.offsets[e as usize])
                    } else {
                        (0, 0)
                    }
                })
                .collect();
            arrays.push(ArrayDef {
                name: "offsets",
                elem_bytes: 8,
                sharding: Sharding::LocalSlices,
                data: g.offsets.clone(),
                slices: off_slices,
            });
            arrays.push(ArrayDef {
                name: "neighbors",
                elem_bytes: 4,
                sharding: Sharding::LocalSlices,
                data: widen_u32(&g.neighbors),
                slices: nbr_slices.clone(),
            });
            nbr_slices
        };

        let n_keys;
        match cfg.app {
            App::Bfs | App::Sssp | App::Wcc => {
                let nbr_slices = push_adjacency(&mut arrays, &graph);
                roles.offsets = Some(0);
                roles.neighbors = Some(1);
                if cfg.app == App::Sssp {
                    arrays.push(ArrayDef {
                        name: "edge_weights",
                        elem_bytes: 4,
                        sharding: Sharding::LocalSlices,
                        data: widen_u32(graph.weights.as_ref().unwrap()),
                        slices: nbr_slices,
                    });
                    roles.weights = Some(2);
                }
                let init = if cfg.app == App::Wcc {
                    (0..v).collect::<Vec<u64>>()
                } else {
                    vec![u32::MAX as u64; v as usize]
                };
                let name = match cfg.app {
                    App::Bfs => "level",
                    App::Sssp => "distance",
                    _ => "component",
                };
                arrays.push(ArrayDef::equal_chunk(name, 4, init, grid));
                let result = arrays.len() - 1;
                roles.source_vals = result;
                roles.target = result;
                arrays.push(ArrayDef::equal_chunk(
                    "frontier",
                    4,
                    vec![0u64; v as usize],
                    grid,
                ));
                roles.frontier = Some(arrays.len() - 1);
                n_keys = v;
            }
            App::Pagerank => {
                push_adjacency(&mut arrays, &graph);
                roles.offsets = Some(0);
                roles.neighbors = Some(1);
                let init_rank = match mode {
                    AccumMode::Fixed => (fixed_from_f64(1.0) / v as i64) as u64,
                    AccumMode::Float => (1.0 / v as f64).to_bits(),
                };
                arrays.push(ArrayDef::equal_chunk("rank", 8, vec![init_rank; v as usize], grid));
                arrays.push(ArrayDef::equal_chunk(
                    "rank_acc",
                    8,
                    vec![default_value.0; v as usize],
                    grid,
                ));
                roles.source_vals = 2;
                roles.target = 3;
                n_keys = v;
            }
            App::Spmv => {
                let nbr_slices = push_adjacency(&mut arrays, &graph);
                roles.offsets = Some(0);
                roles.neighbors = Some(1);
                arrays.push(ArrayDef {
                    name: "nonzeros",
                    elem_bytes: 4,
                    sharding: Sharding::LocalSlices,
                    data: widen_u32(graph.weights.as_ref().ok_or_else(|| {
                        Error::config("spmv needs matrix values; regenerate with weights")
                    })?),
                    slices: nbr_slices,
                });
                roles.weights = Some(2);
                let mut rng = Rng::new(gen_seed ^ 0x5851f42d4c957f2d);
                let x: Vec<u64> = (0..v)
                    .map(|_| match mode {
                        AccumMode::Fixed => rng.below(1 << 16),
                        AccumMode::Float => {
                            ((rng.below(1 << 16) as f64) / (1 << 16) as f64).to_bits()
                        }
                    })
                    .collect();
                arrays.push(ArrayDef::equal_chunk("x", 8, x, grid));
                arrays.push(ArrayDef::equal_chunk(
                    "y",
                    8,
                    vec![default_value.0; v as usize],
                    grid,
                ));
                roles.source_vals = 3;
                roles.target = 4;
                n_keys = v;
            }
            App::Histogram => {
                n_keys = graph.e;
                let keys = rmat::generate_keys(n_keys, bins, gen_seed);
                arrays.push(ArrayDef::equal_chunk("keys", 4, widen_u32(&keys), grid));
                arrays.push(ArrayDef::equal_chunk(
                    "counts",
                    8,
                    vec![0u64; bins as usize],
                    grid,
                ));
                roles.source_vals = 0;
                roles.target = 1;
            }
        }
        let result_array = roles.target;

        // Proxy configuration: the update task is the proxy-enabled one.
        for (name, t) in &cfg.tasks {
            if t.proxy_region.is_some() && name != "update" {
                return Err(Error::config(format!(
                    "task.{name}.proxy_region: only the update task takes a proxy"
                )));
            }
        }
        let proxy = match cfg.tasks.get("update").and_then(|t| t.proxy_region) {
            Some(region_side) => {
                let t = &cfg.tasks["update"];
                let pc = ProxyConfig {
                    region_side,
                    merge: merge_op,
                    kind,
                    default_value,
                    lines: t.proxy_lines.unwrap_or(1024),
                    full_copy: t.proxy_full_copy.unwrap_or(false),
                };
                pc.validate(grid)?;
                Some(pc)
            }
            None => None,
        };

        // Task descriptors. Defaults: IQ 64 / OQ 4 (the 16x ratio).
        let task_names = ["source", "expand", "update", "update_proxy"];
        let n_tasks = if proxy.is_some() { 4 } else { 3 };
        let mut tasks = Vec::with_capacity(n_tasks);
        for (i, &name) in task_names.iter().take(n_tasks).enumerate() {
            let ov = cfg.tasks.get(name);
            let kind_t = match i {
                TASK_SOURCE => TaskKind::Source,
                TASK_EXPAND => TaskKind::Expand,
                TASK_UPDATE => TaskKind::Update,
                _ => TaskKind::UpdateProxy,
            };
            let worst = match kind_t {
                // Add-merge owner updates spawn nothing.
                TaskKind::Update if merge_op == MergeOp::Add => 0,
                _ => 1,
            };
            let (default_prefetch, prefetch_arrays) = match kind_t {
                TaskKind::Source => (PrefetchMode::Off, vec![]),
                TaskKind::Expand => {
                    let mut arrs = vec![roles.source_vals];
                    if let Some(o) = roles.offsets {
                        arrs.push(o);
                    }
                    (PrefetchMode::Stream, arrs)
                }
                _ => (PrefetchMode::Index, vec![roles.target]),
            };
            tasks.push(TaskDescriptor {
                kind: kind_t,
                name: name.to_string(),
                iq_size: ov.and_then(|o| o.iq_size).unwrap_or(cfg.default_iq_size),
                oq_size: ov.and_then(|o| o.oq_size).unwrap_or(cfg.default_oq_size),
                input_channel: match i {
                    TASK_SOURCE => None,
                    TASK_EXPAND => Some(CH_EXPAND),
                    TASK_UPDATE => Some(CH_UPDATE),
                    _ => Some(CH_PROXY),
                },
                worst_case_emissions: worst,
                proxy: if kind_t == TaskKind::UpdateProxy { proxy } else { None },
                prefetch: ov.and_then(|o| o.prefetch).unwrap_or(default_prefetch),
                prefetch_arrays,
            });
        }

        // Channels. Expand rides the first (32-bit) NoC; the update channel
        // and its proxy ride the widest NoC.
        let widest = cfg
            .nocs
            .iter()
            .enumerate()
            .max_by_key(|(i, n)| (n.width_bits, *i))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let expand_len = arrays[roles.source_vals].len();
        let update_len = arrays[roles.target].len();
        let channel_names: BTreeMap<usize, String> = (0..n_tasks)
            .filter_map(|t| {
                let default = tasks[t].name.clone();
                let name = cfg
                    .tasks
                    .get(tasks[t].name.as_str())
                    .and_then(|o| o.channel.clone())
                    .unwrap_or(default);
                Some((t, name))
            })
            .collect();
        let ch_assign = |name: &str, default_noc: usize| -> (bool, usize, u32) {
            match cfg.channels.get(name) {
                Some(o) => {
                    let (on_die, noc) = match o.noc {
                        Some(NocAssign::Die) => (true, 0),
                        Some(NocAssign::Tile(i)) => (false, i),
                        None => (false, default_noc),
                    };
                    (on_die, noc, o.weight.unwrap_or(1))
                }
                None => (false, default_noc, 1),
            }
        };
        let mut channels = Vec::new();
        {
            let name = channel_names[&TASK_EXPAND].clone();
            let (on_die, noc, weight) = ch_assign(&name, 0);
            if !on_die && noc >= cfg.nocs.len() {
                return Err(Error::config(format!(
                    "channel.{name}.noc {noc} out of range ({} tile-NoCs)",
                    cfg.nocs.len()
                )));
            }
            channels.push(ChannelMeta {
                name,
                dest_task: TASK_EXPAND,
                value_words: 0,
                routing_len: expand_len,
                chunk_shift: log2(grid.chunk_size(expand_len)),
                route: RouteKind::Owner,
                on_die_noc: on_die,
                noc,
                weight,
                cascade: false,
                proxy_region: 0,
                proxy_task: 0,
            });
        }
        {
            let name = channel_names[&TASK_UPDATE].clone();
            let (on_die, noc, weight) = ch_assign(&name, widest);
            channels.push(ChannelMeta {
                name,
                dest_task: TASK_UPDATE,
                value_words: kind.wire_words(),
                routing_len: update_len,
                chunk_shift: log2(grid.chunk_size(update_len)),
                route: RouteKind::Owner,
                on_die_noc: on_die,
                noc,
                weight,
                cascade: proxy.is_some() && cfg.cascade != crate::config::CascadeMode::Off,
                proxy_region: proxy.map(|p| p.region_side).unwrap_or(0),
                proxy_task: TASK_PROXY,
            });
        }
        if proxy.is_some() {
            let name = channel_names[&TASK_PROXY].clone();
            let (on_die, noc, weight) = ch_assign(&name, widest);
            channels.push(ChannelMeta {
                name,
                dest_task: TASK_PROXY,
                value_words: kind.wire_words(),
                routing_len: update_len,
                chunk_shift: log2(grid.chunk_size(update_len)),
                route: RouteKind::RegionProxy,
                on_die_noc: on_die,
                noc,
                weight,
                cascade: false,
                proxy_region: proxy.map(|p| p.region_side).unwrap_or(0),
                proxy_task: TASK_PROXY,
            });
        }
        for ch in &channels {
            if ch.on_die_noc && ch.cascade {
                return Err(Error::config(format!(
                    "channel.{}: cascading requires a tile-NoC channel",
                    ch.name
                )));
            }
        }

        // Seeds: the root invocation for searches, every owned element for
        // scatter/reduce apps.
        let seed_space = match cfg.app {
            App::Bfs | App::Sssp => 0,
            App::Histogram => n_keys,
            _ => v,
        };
        let seeds: Vec<(u64, u64)> = if seed_space == 0 {
            let owner = grid.owner_tile(cfg.root, v)?;
            (0..grid.tile_count())
                .map(|t| if t == owner.0 { (cfg.root, cfg.root + 1) } else { (0, 0) })
                .collect()
        } else {
            (0..grid.tile_count())
                .map(|t| grid.owned_range(TileId(t), seed_space))
                .collect()
        };

        let expand_target = if proxy.is_some() { CH_PROXY } else { CH_UPDATE };
        Ok(Workload {
            app: cfg.app,
            mode,
            graph: Some(graph),
            bins,
            arrays,
            roles,
            tasks,
            channels,
            merge_op,
            kind,
            default_value,
            expand_target,
            epochs: if cfg.app == App::Pagerank { cfg.epochs.max(1) } else { 1 },
            seeds,
            result_array,
            dataset_hash,
        })
    }

    /// Compile one dispatch of `task` into abstract instructions. Expand
    /// invocations advance their edge cursor and re-enter while edges
    /// remain.
    pub fn plan(
        &self,
        grid: &GridGeometry,
        task: usize,
        inv: &mut Invocation,
        pcache: Option<&ProxyCache>,
    ) -> Plan {
        match task {
            TASK_SOURCE => self.plan_source(inv),
            TASK_EXPAND => self.plan_expand(inv),
            TASK_UPDATE => self.plan_update(inv),
            TASK_PROXY => self.plan_proxy(grid, inv, pcache.expect("proxy task without P$")),
            _ => unreachable!("unknown task {task}"),
        }
    }

    fn plan_source(&self, inv: &mut Invocation) -> Plan {
        let mut plan = Plan::default();
        match self.app {
            App::Bfs | App::Sssp => plan.push(PlanOp::Emit {
                channel: CH_UPDATE,
                index: inv.index,
                value: Value(0),
            }),
            _ => plan.push(PlanOp::Emit { channel: CH_EXPAND, index: inv.index, value: Value(0) }),
        }
        plan
    }

    fn plan_expand(&self, inv: &mut Invocation) -> Plan {
        if self.app == App::Histogram {
            let keys = self.roles.source_vals;
            let key = self.arrays[keys].data[inv.index as usize] as u32;
            let mut plan = Plan::default();
            plan.push(PlanOp::Read { array: keys as u8, index: inv.index as u64 });
            plan.push(PlanOp::Compute);
            plan.push(PlanOp::Emit {
                channel: self.expand_target,
                index: key >> 8,
                value: Value(1),
            });
            return plan;
        }
        let offsets = self.roles.offsets.unwrap();
        let neighbors = self.roles.neighbors.unwrap();
        let vals = self.roles.source_vals;
        if !inv.started {
            inv.started = true;
            inv.edge_base = self.arrays[offsets].data[inv.index as usize];
            inv.edge_end = self.arrays[offsets].data[inv.index as usize + 1];
            inv.cursor = 0;
            let stored = Value(self.arrays[vals].data[inv.index as usize]);
            // The carried value: emitted level/distance/label, or the
            // per-edge contribution for rank scatters.
            inv.value = match self.app {
                App::Pagerank => {
                    let deg = inv.edge_end - inv.edge_base;
                    if deg == 0 {
                        Value(0)
                    } else {
                        match self.mode {
                            AccumMode::Fixed => Value((stored.0 as i64 / deg as i64) as u64),
                            AccumMode::Float => {
                                Value((f64::from_bits(stored.0) / deg as f64).to_bits())
                            }
                        }
                    }
                }
                _ => stored,
            };
            let mut plan = Plan::default();
            plan.push(PlanOp::Read { array: offsets as u8, index: inv.index as u64 });
            plan.push(PlanOp::Read { array: offsets as u8, index: inv.index as u64 + 1 });
            plan.push(PlanOp::Read { array: vals as u8, index: inv.index as u64 });
            plan.reenter = inv.edge_end > inv.edge_base;
            return plan;
        }
        // One edge per dispatch-step.
        let k = inv.edge_base + inv.cursor as u64;
        let dst = self.arrays[neighbors].data[k as usize] as u32;
        let mut plan = Plan::default();
        plan.push(PlanOp::Read { array: neighbors as u8, index: k });
        let value = match self.app {
            App::Bfs => Value(inv.value.0 + 1),
            App::Wcc => inv.value,
            App::Pagerank => inv.value,
            App::Sssp => {
                let w = self.roles.weights.unwrap();
                plan.push(PlanOp::Read { array: w as u8, index: k });
                Value(inv.value.0 + self.arrays[w].data[k as usize])
            }
            App::Spmv => {
                let w = self.roles.weights.unwrap();
                plan.push(PlanOp::Read { array: w as u8, index: k });
                let nz = self.arrays[w].data[k as usize];
                match self.mode {
                    AccumMode::Fixed => Value(nz * inv.value.0),
                    AccumMode::Float => {
                        Value((nz as f64 * f64::from_bits(inv.value.0)).to_bits())
                    }
                }
            }
            App::Histogram => unreachable!(),
        };
        plan.push(PlanOp::Emit { channel: self.expand_target, index: dst, value });
        let more = inv.cursor as u64 + 1 < inv.edge_end - inv.edge_base;
        if more {
            inv.cursor += 1;
        }
        plan.reenter = more;
        plan
    }

    fn plan_update(&self, inv: &mut Invocation) -> Plan {
        let target = self.roles.target;
        let stored = Value(self.arrays[target].data[inv.index as usize]);
        let merged = merge(self.merge_op, self.kind, stored, inv.value);
        let mut plan = Plan::default();
        plan.push(PlanOp::Read { array: target as u8, index: inv.index as u64 });
        if merged != stored {
            plan.push(PlanOp::Write {
                array: target as u8,
                index: inv.index as u64,
                value: merged,
            });
            if let Some(frontier) = self.roles.frontier {
                // An improved vertex raises its re-expansion mark; the tile's
                // frontier scanner turns it into an expand dispatch. Update
                // tasks therefore never block on queue space.
                plan.push(PlanOp::Write {
                    array: frontier as u8,
                    index: inv.index as u64,
                    value: Value(1),
                });
            }
        }
        plan
    }

    fn plan_proxy(&self, grid: &GridGeometry, inv: &mut Invocation, pc: &ProxyCache) -> Plan {
        let len = self.arrays[self.roles.target].len();
        let owner = grid
            .owner_tile(inv.index as u64, len)
            .expect("proxy merge index validated at emission");
        let mut plan = Plan::default();
        plan.push(PlanOp::ProxyMerge { index: inv.index, value: inv.value });
        if let crate::proxy::MergeOutcome::Evicted { index, value } =
            pc.peek_update(inv.index, inv.value, owner)
        {
            plan.push(PlanOp::Emit { channel: CH_UPDATE, index, value });
        }
        plan
    }

    /// Barrier-time rank recompute for epoch-based scatters; returns the
    /// abstract-op cost per tile. No-op for single-epoch apps.
    pub fn apply_epoch_update(&mut self, grid: &GridGeometry) -> Vec<u64> {
        if self.app != App::Pagerank {
            return vec![0; grid.tile_count() as usize];
        }
        let v = self.arrays[self.roles.source_vals].len();
        let base_fixed = fixed_from_f64(1.0 - oracle::PAGERANK_DAMPING) / v as i64;
        let damp_fixed = fixed_from_f64(oracle::PAGERANK_DAMPING);
        let mut costs = vec![0u64; grid.tile_count() as usize];
        for t in 0..grid.tile_count() {
            let (s, e) = self.arrays[self.roles.source_vals].slices[t as usize];
            costs[t as usize] = 2 * (e - s);
            for i in s..e {
                let acc = self.arrays[self.roles.target].data[i as usize];
                let rank = match self.mode {
                    AccumMode::Fixed => {
                        (base_fixed + crate::value::fixed_mul(damp_fixed, acc as i64)) as u64
                    }
                    AccumMode::Float => ((1.0 - oracle::PAGERANK_DAMPING) / v as f64
                        + oracle::PAGERANK_DAMPING * f64::from_bits(acc))
                    .to_bits(),
                };
                self.arrays[self.roles.source_vals].data[i as usize] = rank;
                self.arrays[self.roles.target].data[i as usize] = self.default_value.0;
            }
        }
        costs
    }

    /// PageRank reports ranks; everything else reports the merge target.
    pub fn result(&self) -> &[u64] {
        if self.app == App::Pagerank {
            &self.arrays[self.roles.source_vals].data
        } else {
            &self.arrays[self.result_array].data
        }
    }

    /// Golden result computed sequentially, in the result array's encoding.
    pub fn run_oracle(&self) -> Vec<u64> {
        let g = self.graph.as_ref().unwrap();
        match self.app {
            App::Bfs => widen_u32(&oracle::bfs(g, self.root_of_seeds())),
            App::Sssp => widen_u32(&oracle::sssp(g, self.root_of_seeds())),
            App::Wcc => widen_u32(&oracle::wcc(g)),
            App::Pagerank => match self.mode {
                AccumMode::Fixed => oracle::pagerank_fixed(g, self.epochs)
                    .into_iter()
                    .map(|x| x as u64)
                    .collect(),
                AccumMode::Float => oracle::pagerank_float(g, self.epochs)
                    .into_iter()
                    .map(f64::to_bits)
                    .collect(),
            },
            App::Spmv => match self.mode {
                AccumMode::Fixed => {
                    let x = &self.arrays[self.roles.source_vals].data;
                    oracle::spmv(g, x)
                }
                AccumMode::Float => {
                    let x: Vec<f64> = self.arrays[self.roles.source_vals]
                        .data
                        .iter()
                        .map(|&b| f64::from_bits(b))
                        .collect();
                    oracle::spmv_float(g, &x).into_iter().map(f64::to_bits).collect()
                }
            },
            App::Histogram => {
                let keys: Vec<u32> = self.arrays[self.roles.source_vals]
                    .data
                    .iter()
                    .map(|&k| k as u32)
                    .collect();
                oracle::histogram(&keys, self.bins)
            }
        }
    }

    fn root_of_seeds(&self) -> u64 {
        self.seeds
            .iter()
            .find(|&&(s, e)| e > s)
            .map(|&(s, _)| s)
            .unwrap_or(0)
    }

    /// Compare simulator results against the oracle. Exact except for
    /// float-mode accumulation, which holds to a relative tolerance.
    pub fn results_match(&self, sim: &[u64], golden: &[u64]) -> std::result::Result<(), String> {
        if sim.len() != golden.len() {
            return Err(format!("length mismatch: {} vs {}", sim.len(), golden.len()));
        }
        let float_tolerant = self.mode == AccumMode::Float
            && matches!(self.app, App::Pagerank | App::Spmv);
        for (i, (&s, &o)) in sim.iter().zip(golden.iter()).enumerate() {
            if float_tolerant {
                let (fs, fo) = (f64::from_bits(s), f64::from_bits(o));
                let scale = fo.abs().max(1e-30);
                if ((fs - fo) / scale).abs() > 1e-6 {
                    return Err(format!("element {i}: {fs} vs oracle {fo}"));
                }
            } else if s != o {
                return Err(format!("element {i}: {s} vs oracle {o}"));
            }
        }
        Ok(())
    }

    /// Traversed/processed element count for TEPS: reached out-edges for
    /// searches, dataset elements for scatter/reduce apps.
    pub fn teps_elements(&self, result: &[u64]) -> u64 {
        let g = self.graph.as_ref().unwrap();
        match self.app {
            App::Bfs | App::Sssp => {
                let levels: Vec<u32> = result.iter().map(|&x| x as u32).collect();
                oracle::traversed_edges(g, &levels)
            }
            App::Wcc | App::Spmv => g.e,
            App::Pagerank => g.e * self.epochs as u64,
            App::Histogram => self.arrays[self.roles.source_vals].len(),
        }
    }
}

fn hash_graph(g: &CsrGraph) -> u64 {
    let mut bytes = Vec::with_capacity(32 + g.neighbors.len() * 4);
    bytes.extend_from_slice(&g.v.to_le_bytes());
    bytes.extend_from_slice(&g.e.to_le_bytes());
    for &n in &g.neighbors {
        bytes.extend_from_slice(&n.to_le_bytes());
    }
    if let Some(w) = &g.weights {
        for &x in w {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    crate::util::fnv1a(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(app: App, grid_side: u32) -> (RunConfig, GridGeometry) {
        let mut c = RunConfig::default();
        c.app = app;
        c.dataset = DatasetSpec::Generated { scale: 8, edge_factor: 8, seed: 3 };
        c.set_grid_side(grid_side).unwrap();
        let g = GridGeometry::new(
            c.tiles_per_die_side,
            c.dies_per_package_side,
            c.packages_x,
            c.packages_y,
        )
        .unwrap();
        (c, g)
    }

    #[test]
    fn histogram_bin_ownership_chunks() {
        // 64 bins over 16 tiles: bins 0..4 at tile 0.
        let g = GridGeometry::new(4, 1, 1, 1).unwrap();
        for b in 0..4 {
            assert_eq!(g.owner_tile(b, 64).unwrap().0, 0);
        }
        assert_eq!(g.owner_tile(4, 64).unwrap().0, 1);
    }

    #[test]
    fn update_channel_rides_the_wide_noc() {
        let (c, g) = cfg(App::Bfs, 8);
        let wl = Workload::build(&c, &g).unwrap();
        assert_eq!(wl.channels[CH_EXPAND as usize].noc, 0);
        assert_eq!(wl.channels[CH_UPDATE as usize].noc, 1); // 64-bit NoC
        assert_eq!(wl.channels[CH_UPDATE as usize].value_words, 1);
        assert_eq!(wl.channels[CH_EXPAND as usize].value_words, 0);
    }

    #[test]
    fn proxy_channel_appears_with_region() {
        let (mut c, g) = cfg(App::Sssp, 8);
        c.apply_map(&crate::config::parse_kv("task.update.proxy_region=4").unwrap()).unwrap();
        let wl = Workload::build(&c, &g).unwrap();
        assert_eq!(wl.tasks.len(), 4);
        assert_eq!(wl.channels.len(), 3);
        assert_eq!(wl.expand_target, CH_PROXY);
        assert!(wl.channels[CH_UPDATE as usize].cascade);
    }

    #[test]
    fn adjacency_slices_follow_vertex_ownership() {
        let (c, g) = cfg(App::Bfs, 4);
        let wl = Workload::build(&c, &g).unwrap();
        let graph = wl.graph.as_ref().unwrap();
        let offs = &wl.arrays[wl.roles.offsets.unwrap()];
        let nbrs = &wl.arrays[wl.roles.neighbors.unwrap()];
        for t in 0..g.tile_count() {
            let (vs, ve) = g.owned_range(TileId(t), graph.v);
            if vs < ve {
                assert_eq!(offs.slices[t as usize], (vs, ve + 1));
                assert_eq!(
                    nbrs.slices[t as usize],
                    (graph.offsets[vs as usize], graph.offsets[ve as usize])
                );
            }
        }
        // Every neighbor element is covered exactly once.
        let covered: u64 = nbrs.slices.iter().map(|(s, e)| e - s).sum();
        assert_eq!(covered, graph.e);
    }

    #[test]
    fn sssp_expand_emits_one_message_per_edge() {
        let (c, g) = cfg(App::Sssp, 4);
        let mut wl = Workload::build(&c, &g).unwrap();
        // Pick a vertex with at least 3 edges.
        let graph = wl.graph.as_ref().unwrap();
        let v = (0..graph.v).find(|&v| graph.degree(v) >= 3).unwrap();
        let deg = graph.degree(v);
        // Pretend its distance is resolved.
        let vals = wl.roles.source_vals;
        wl.arrays[vals].data[v as usize] = 10;
        let mut inv = Invocation::new(v as u32, Value(0));
        let mut emissions = 0;
        let mut steps = 0;
        loop {
            let plan = wl.plan(&g, TASK_EXPAND, &mut inv, None);
            emissions += plan
                .ops()
                .iter()
                .filter(|op| matches!(op, PlanOp::Emit { .. }))
                .count();
            steps += 1;
            if !plan.reenter {
                break;
            }
        }
        assert_eq!(emissions as u64, deg);
        assert_eq!(steps as u64, deg + 1); // header step + one per edge
    }

    #[test]
    fn update_plan_spawns_only_on_improvement() {
        let (c, g) = cfg(App::Bfs, 4);
        let mut wl = Workload::build(&c, &g).unwrap();
        let mut inv = Invocation::new(5, Value(2));
        let plan = wl.plan(&g, TASK_UPDATE, &mut inv, None);
        assert_eq!(plan.len(), 3); // read, write, frontier mark
        wl.arrays[wl.roles.target].data[5] = 1;
        let mut inv2 = Invocation::new(5, Value(2));
        let plan2 = wl.plan(&g, TASK_UPDATE, &mut inv2, None);
        assert_eq!(plan2.len(), 1); // filtered: read only
    }

    #[test]
    fn oracle_dispatch_matches_reference() {
        let (c, g) = cfg(App::Bfs, 4);
        let wl = Workload::build(&c, &g).unwrap();
        let o = wl.run_oracle();
        let reference = oracle::bfs(wl.graph.as_ref().unwrap(), 0);
        assert_eq!(o, widen_u32(&reference));
    }
}
