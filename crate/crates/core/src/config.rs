//! Run configuration: a flat UTF-8 `key=value` format with `#` comments,
//! CLI-overridable, covering every reconfigurable knob of the system.
//! Unknown keys and cross-constraint violations are rejected with named
//! diagnostics before any simulation state is built.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::models::{CostParams, EnergyParams};
use crate::topology::{NocTopology, TorusScope};
use crate::util::is_pow2;
use crate::value::MergeOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum App {
    Bfs,
    Sssp,
    Pagerank,
    Wcc,
    Spmv,
    Histogram,
}

impl App {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bfs" => Ok(App::Bfs),
            "sssp" => Ok(App::Sssp),
            "pagerank" => Ok(App::Pagerank),
            "wcc" => Ok(App::Wcc),
            "spmv" => Ok(App::Spmv),
            "histogram" => Ok(App::Histogram),
            other => Err(Error::config(format!(
                "unknown app `{other}` (expected bfs|sssp|pagerank|wcc|spmv|histogram)"
            ))),
        }
    }
    pub fn name(self) -> &'static str {
        match self {
            App::Bfs => "bfs",
            App::Sssp => "sssp",
            App::Pagerank => "pagerank",
            App::Wcc => "wcc",
            App::Spmv => "spmv",
            App::Histogram => "histogram",
        }
    }
    pub const ALL: [App; 6] = [
        App::Bfs,
        App::Sssp,
        App::Pagerank,
        App::Wcc,
        App::Spmv,
        App::Histogram,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetSpec {
    Generated { scale: u32, edge_factor: u32, seed: u64 },
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccumMode {
    Fixed,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CascadeMode {
    Off,
    Contended,
    Always,
}

impl CascadeMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(CascadeMode::Off),
            "contended" => Ok(CascadeMode::Contended),
            "always" => Ok(CascadeMode::Always),
            other => Err(Error::config(format!(
                "unknown proxy.cascade mode `{other}` (expected off|contended|always)"
            ))),
        }
    }
    pub fn name(self) -> &'static str {
        match self {
            CascadeMode::Off => "off",
            CascadeMode::Contended => "contended",
            CascadeMode::Always => "always",
        }
    }
}

/// One physical tile-NoC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NocConfig {
    pub width_bits: u32,
    pub d2d_width_bits: u32,
    /// Router buffer entries (flits) per channel per input port.
    pub buffer_entries: u32,
}

/// Where a logical channel's traffic rides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NocAssign {
    Tile(usize),
    Die,
}

#[derive(Debug, Clone, Default)]
pub struct ChannelOverride {
    pub noc: Option<NocAssign>,
    pub weight: Option<u32>,
}

#[derive(Debug, Clone, Default)]
pub struct TaskOverride {
    pub iq_size: Option<u32>,
    pub oq_size: Option<u32>,
    pub channel: Option<String>,
    pub proxy_region: Option<u32>,
    pub proxy_lines: Option<u32>,
    pub proxy_full_copy: Option<bool>,
    pub merge: Option<MergeOp>,
    pub default_value: Option<u64>,
    pub prefetch: Option<PrefetchMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefetchMode {
    Off,
    Index,
    Stream,
}

impl PrefetchMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(PrefetchMode::Off),
            "index" => Ok(PrefetchMode::Index),
            "stream" => Ok(PrefetchMode::Stream),
            other => Err(Error::config(format!(
                "unknown prefetch mode `{other}` (expected off|index|stream)"
            ))),
        }
    }
    pub fn name(self) -> &'static str {
        match self {
            PrefetchMode::Off => "off",
            PrefetchMode::Index => "index",
            PrefetchMode::Stream => "stream",
        }
    }
}

#[derive(Debug, Clone)]
pub struct HbmConfig {
    pub enabled: bool,
    pub gib: f64,
    pub channels: u32,
    pub gbps_per_channel: f64,
    pub latency_cycles: u32,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub app: App,
    pub dataset: DatasetSpec,
    pub root: u64,
    pub epochs: u32,
    pub bins: Option<u64>,
    pub accumulation: AccumMode,

    pub tiles_per_die_side: u32,
    pub dies_per_package_side: u32,
    pub packages_x: u32,
    pub packages_y: u32,
    pub tile_noc_mode: NocTopology,
    pub die_noc_mode: NocTopology,
    pub torus_scope: TorusScope,

    pub noc_option: char,
    pub nocs: Vec<NocConfig>,
    pub d2d_shared: bool,
    pub die_noc_width_bits: u32,

    pub channels: BTreeMap<String, ChannelOverride>,
    pub tasks: BTreeMap<String, TaskOverride>,
    pub default_iq_size: u32,
    pub default_oq_size: u32,

    pub sram_kib: u64,
    pub code_kib: u64,
    pub dcache_lines: u32,
    pub hbm: HbmConfig,

    pub cascade: CascadeMode,
    /// Idle tiles write one dirty P$ entry back per cycle (staleness bound);
    /// default is write-back on eviction and quiescence flush only.
    pub idle_writeback: bool,

    pub energy: EnergyParams,
    pub cost: CostParams,

    pub max_cycles: u64,
}

/// NoC width presets: the evaluated intra-die / die-to-die combinations.
/// (a) two 32-bit NoCs throttled through one shared 32-bit D2D link,
/// (b) 32+64-bit NoCs, shared 32-bit D2D,
/// (c) 32+64-bit NoCs, one 32-bit D2D link each (the default),
/// (d) 32+64-bit NoCs with full-width D2D links.
pub fn noc_option_preset(option: char) -> Result<(Vec<NocConfig>, bool)> {
    let mk = |w, d| NocConfig { width_bits: w, d2d_width_bits: d, buffer_entries: 8 };
    match option {
        'a' => Ok((vec![mk(32, 32), mk(32, 32)], true)),
        'b' => Ok((vec![mk(32, 32), mk(64, 32)], true)),
        'c' => Ok((vec![mk(32, 32), mk(64, 32)], false)),
        'd' => Ok((vec![mk(32, 32), mk(64, 64)], false)),
        other => Err(Error::config(format!(
            "unknown noc_option `{other}` (expected a|b|c|d)"
        ))),
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let (nocs, d2d_shared) = noc_option_preset('c').unwrap();
        RunConfig {
            app: App::Bfs,
            dataset: DatasetSpec::Generated { scale: 10, edge_factor: 16, seed: 1 },
            root: 0,
            epochs: 1,
            bins: None,
            accumulation: AccumMode::Fixed,
            tiles_per_die_side: 16,
            dies_per_package_side: 4,
            packages_x: 1,
            packages_y: 1,
            tile_noc_mode: NocTopology::FoldedTorus,
            die_noc_mode: NocTopology::FoldedTorus,
            torus_scope: TorusScope::System,
            noc_option: 'c',
            nocs,
            d2d_shared,
            die_noc_width_bits: 32,
            channels: BTreeMap::new(),
            tasks: BTreeMap::new(),
            default_iq_size: 64,
            default_oq_size: 4,
            sram_kib: 1536,
            code_kib: 64,
            dcache_lines: 256,
            hbm: HbmConfig {
                enabled: false,
                gib: 8.0,
                channels: 8,
                gbps_per_channel: 64.0,
                latency_cycles: 50,
            },
            cascade: CascadeMode::Contended,
            idle_writeback: false,
            energy: EnergyParams::default(),
            cost: CostParams::default(),
            max_cycles: 200_000_000,
        }
    }
}

/// Parse the flat key=value format. Later keys override earlier ones.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::config(format!("line {}: expected key=value, got `{line}`", lineno + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_u64(key: &str, v: &str) -> Result<u64> {
    v.parse()
        .map_err(|_| Error::config(format!("{key}: expected an unsigned integer, got `{v}`")))
}

fn parse_u32(key: &str, v: &str) -> Result<u32> {
    v.parse()
        .map_err(|_| Error::config(format!("{key}: expected an unsigned integer, got `{v}`")))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| Error::config(format!("{key}: expected a number, got `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err(Error::config(format!("{key}: expected a boolean, got `{v}`"))),
    }
}

impl RunConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_map(map)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply keys on top of the current config. `grid_side` is sugar that
    /// picks the smallest die/package hierarchy containing the grid.
    pub fn apply_map(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        // noc_option first so explicit per-noc keys can override the preset.
        if let Some(v) = map.get("noc_option") {
            let opt = v
                .chars()
                .next()
                .filter(|_| v.len() == 1)
                .ok_or_else(|| Error::config(format!("noc_option: got `{v}`")))?;
            let (nocs, shared) = noc_option_preset(opt)?;
            self.noc_option = opt;
            self.nocs = nocs;
            self.d2d_shared = shared;
        }
        if let Some(v) = map.get("grid_side") {
            self.set_grid_side(parse_u32("grid_side", v)?)?;
        }
        for (key, v) in map {
            match key.as_str() {
                "noc_option" | "grid_side" => {}
                "app" => self.app = App::parse(v)?,
                "dataset.path" => self.dataset = DatasetSpec::File(PathBuf::from(v)),
                "dataset.scale" | "dataset.edge_factor" | "dataset.seed" => {
                    let (mut scale, mut ef, mut seed) = match self.dataset {
                        DatasetSpec::Generated { scale, edge_factor, seed } => {
                            (scale, edge_factor, seed)
                        }
                        DatasetSpec::File(_) => (10, 16, 1),
                    };
                    match key.as_str() {
                        "dataset.scale" => scale = parse_u32(key, v)?,
                        "dataset.edge_factor" => ef = parse_u32(key, v)?,
                        _ => seed = parse_u64(key, v)?,
                    }
                    self.dataset = DatasetSpec::Generated { scale, edge_factor: ef, seed };
                }
                "root" => self.root = parse_u64(key, v)?,
                "epochs" => self.epochs = parse_u32(key, v)?,
                "bins" => self.bins = Some(parse_u64(key, v)?),
                "accumulation" => {
                    self.accumulation = match v.as_str() {
                        "fixed" => AccumMode::Fixed,
                        "float" => AccumMode::Float,
                        _ => {
                            return Err(Error::config(format!(
                                "accumulation: expected fixed|float, got `{v}`"
                            )))
                        }
                    }
                }
                "tiles_per_die_side" => self.tiles_per_die_side = parse_u32(key, v)?,
                "dies_per_package_side" => self.dies_per_package_side = parse_u32(key, v)?,
                "packages_x" => self.packages_x = parse_u32(key, v)?,
                "packages_y" => self.packages_y = parse_u32(key, v)?,
                "tile_noc_mode" => self.tile_noc_mode = NocTopology::parse(v)?,
                "die_noc_mode" => self.die_noc_mode = NocTopology::parse(v)?,
                "torus_scope" => self.torus_scope = TorusScope::parse(v)?,
                "d2d_shared" => self.d2d_shared = parse_bool(key, v)?,
                "die_noc.width_bits" => self.die_noc_width_bits = parse_u32(key, v)?,
                "iq_size" => self.default_iq_size = parse_u32(key, v)?,
                "oq_size" => self.default_oq_size = parse_u32(key, v)?,
                "sram_kib" => self.sram_kib = parse_u64(key, v)?,
                "code_kib" => self.code_kib = parse_u64(key, v)?,
                "dcache_lines" => self.dcache_lines = parse_u32(key, v)?,
                "hbm.enabled" => self.hbm.enabled = parse_bool(key, v)?,
                "hbm.gib" => self.hbm.gib = parse_f64(key, v)?,
                "hbm.channels" => self.hbm.channels = parse_u32(key, v)?,
                "hbm.gbps_per_channel" => self.hbm.gbps_per_channel = parse_f64(key, v)?,
                "hbm.latency_cycles" => self.hbm.latency_cycles = parse_u32(key, v)?,
                "proxy.cascade" => self.cascade = CascadeMode::parse(v)?,
                "proxy.idle_writeback" => self.idle_writeback = parse_bool(key, v)?,
                "sim.max_cycles" => self.max_cycles = parse_u64(key, v)?,
                _ => self.apply_structured(key, v)?,
            }
        }
        Ok(())
    }

    fn apply_structured(&mut self, key: &str, v: &str) -> Result<()> {
        if let Some(rest) = key.strip_prefix("noc.") {
            let (idx, field) = rest
                .split_once('.')
                .ok_or_else(|| Error::config(format!("malformed key `{key}`")))?;
            let i: usize = idx
                .parse()
                .map_err(|_| Error::config(format!("{key}: bad NoC index `{idx}`")))?;
            while self.nocs.len() <= i {
                self.nocs.push(NocConfig { width_bits: 32, d2d_width_bits: 32, buffer_entries: 8 });
            }
            match field {
                "width_bits" => self.nocs[i].width_bits = parse_u32(key, v)?,
                "d2d_width_bits" => self.nocs[i].d2d_width_bits = parse_u32(key, v)?,
                "buffer_entries" => self.nocs[i].buffer_entries = parse_u32(key, v)?,
                _ => return Err(Error::config(format!("unknown key `{key}`"))),
            }
            return Ok(());
        }
        if let Some(rest) = key.strip_prefix("channel.") {
            let (name, field) = rest
                .split_once('.')
                .ok_or_else(|| Error::config(format!("malformed key `{key}`")))?;
            let entry = self.channels.entry(name.to_string()).or_default();
            match field {
                "noc" => {
                    entry.noc = Some(if v == "die" {
                        NocAssign::Die
                    } else {
                        NocAssign::Tile(
                            v.parse()
                                .map_err(|_| Error::config(format!("{key}: got `{v}`")))?,
                        )
                    })
                }
                "weight" => entry.weight = Some(parse_u32(key, v)?),
                _ => return Err(Error::config(format!("unknown key `{key}`"))),
            }
            return Ok(());
        }
        if let Some(rest) = key.strip_prefix("task.") {
            let (name, field) = rest
                .split_once('.')
                .ok_or_else(|| Error::config(format!("malformed key `{key}`")))?;
            let entry = self.tasks.entry(name.to_string()).or_default();
            match field {
                "iq_size" => entry.iq_size = Some(parse_u32(key, v)?),
                "oq_size" => entry.oq_size = Some(parse_u32(key, v)?),
                "channel" => entry.channel = Some(v.to_string()),
                "proxy_region" => {
                    entry.proxy_region = match v {
                        "none" | "off" => None,
                        _ => Some(parse_u32(key, v)?),
                    }
                }
                "proxy_lines" => entry.proxy_lines = Some(parse_u32(key, v)?),
                "proxy_full_copy" => entry.proxy_full_copy = Some(parse_bool(key, v)?),
                "merge" => entry.merge = Some(MergeOp::parse(v)?),
                "default" => entry.default_value = Some(parse_u64(key, v)?),
                "prefetch" => entry.prefetch = Some(PrefetchMode::parse(v)?),
                _ => return Err(Error::config(format!("unknown key `{key}`"))),
            }
            return Ok(());
        }
        if let Some(field) = key.strip_prefix("energy.") {
            let e = &mut self.energy;
            let val = parse_f64(key, v)?;
            match field {
                "sram_read_pj_per_bit" => e.sram_read_pj_per_bit = val,
                "sram_write_pj_per_bit" => e.sram_write_pj_per_bit = val,
                "cache_tag_pj" => e.cache_tag_pj = val,
                "hbm_pj_per_bit" => e.hbm_pj_per_bit = val,
                "hbm_refresh_pj_per_bit" => e.hbm_refresh_pj_per_bit = val,
                "hbm_refresh_period_ms" => e.hbm_refresh_period_ms = val,
                "noc_wire_pj_per_bit_mm" => e.noc_wire_pj_per_bit_mm = val,
                "noc_router_pj_per_bit" => e.noc_router_pj_per_bit = val,
                "d2d_pj_per_bit" => e.d2d_pj_per_bit = val,
                "off_package_pj_per_bit" => e.off_package_pj_per_bit = val,
                "d2d_latency_cycles" => e.d2d_latency_cycles = val as u32,
                "off_package_latency_cycles" => e.off_package_latency_cycles = val as u32,
                "pu_pj_per_op" => e.pu_pj_per_op = val,
                _ => return Err(Error::config(format!("unknown key `{key}`"))),
            }
            return Ok(());
        }
        if let Some(field) = key.strip_prefix("cost.") {
            let c = &mut self.cost;
            let val = parse_f64(key, v)?;
            match field {
                "wafer_cost_usd" => c.wafer_cost_usd = val,
                "wafer_diameter_mm" => c.wafer_diameter_mm = val,
                "scribe_mm" => c.scribe_mm = val,
                "edge_loss_mm" => c.edge_loss_mm = val,
                "defect_per_mm2" => c.defect_per_mm2 = val,
                "interposer_frac" => c.interposer_frac = val,
                "substrate_frac" => c.substrate_frac = val,
                "bonding_frac" => c.bonding_frac = val,
                "hbm_usd_per_gb" => c.hbm_usd_per_gb = val,
                "hbm_gb" => c.hbm_gb = val,
                "hbm_die_area_mm2" => c.hbm_die_area_mm2 = val,
                "sram_mib_per_mm2" => c.sram_mib_per_mm2 = val,
                "sram_logic_ratio" => c.sram_logic_ratio = val,
                "die_margin_frac" => c.die_margin_frac = val,
                _ => return Err(Error::config(format!("unknown key `{key}`"))),
            }
            return Ok(());
        }
        Err(Error::config(format!("unknown key `{key}`")))
    }

    /// Map a square grid side onto the smallest hierarchy that holds it:
    /// up to 16 the grid is a single (partial) die, up to 64 one package of
    /// 16x16-tile dies, beyond that 64x64-tile packages.
    pub fn set_grid_side(&mut self, side: u32) -> Result<()> {
        if !is_pow2(side as u64) {
            return Err(Error::config(format!(
                "grid_side must be a power of two, got {side}"
            )));
        }
        if side <= 16 {
            self.tiles_per_die_side = side;
            self.dies_per_package_side = 1;
            self.packages_x = 1;
            self.packages_y = 1;
        } else if side <= 64 {
            self.tiles_per_die_side = 16;
            self.dies_per_package_side = side / 16;
            self.packages_x = 1;
            self.packages_y = 1;
        } else {
            self.tiles_per_die_side = 16;
            self.dies_per_package_side = 4;
            self.packages_x = side / 64;
            self.packages_y = side / 64;
        }
        Ok(())
    }

    pub fn grid_side(&self) -> u32 {
        self.tiles_per_die_side * self.dies_per_package_side * self.packages_x
    }

    pub fn validate(&self) -> Result<()> {
        if self.torus_scope != TorusScope::System {
            return Err(Error::config(
                "torus_scope: only `system` is implemented; die/package scopes would \
                 disconnect the tile-NoC for cross-die traffic",
            ));
        }
        if self.nocs.is_empty() {
            return Err(Error::config("at least one physical tile-NoC is required"));
        }
        for (i, n) in self.nocs.iter().enumerate() {
            if n.width_bits != 32 && n.width_bits != 64 {
                return Err(Error::config(format!(
                    "noc.{i}.width_bits must be 32 or 64, got {}",
                    n.width_bits
                )));
            }
            if n.d2d_width_bits != 32 && n.d2d_width_bits != 64 {
                return Err(Error::config(format!(
                    "noc.{i}.d2d_width_bits must be 32 or 64, got {}",
                    n.d2d_width_bits
                )));
            }
            if n.buffer_entries < 8 {
                return Err(Error::config(format!(
                    "noc.{i}.buffer_entries must be >= 8 so a maximum message plus the \
                     bubble margin fits, got {}",
                    n.buffer_entries
                )));
            }
        }
        if self.default_iq_size < 1 || self.default_oq_size < 1 {
            return Err(Error::config("iq_size and oq_size must be >= 1"));
        }
        for (name, t) in &self.tasks {
            if let Some(r) = t.proxy_region {
                let side = self.grid_side();
                if !is_pow2(r as u64) || r == 0 {
                    return Err(Error::config(format!(
                        "task.{name}.proxy_region must be a power of two, got {r}"
                    )));
                }
                if side % r != 0 {
                    return Err(Error::config(format!(
                        "task.{name}.proxy_region {r} does not divide grid_side {side}"
                    )));
                }
                if let Some(lines) = t.proxy_lines {
                    if !is_pow2(lines as u64) {
                        return Err(Error::config(format!(
                            "task.{name}.proxy_lines must be a power of two, got {lines}"
                        )));
                    }
                }
            }
        }
        if self.hbm.enabled {
            if self.hbm.channels == 0 || !is_pow2(self.hbm.channels as u64) {
                return Err(Error::config(format!(
                    "hbm.channels must be a positive power of two, got {}",
                    self.hbm.channels
                )));
            }
            if self.hbm.gbps_per_channel <= 0.0 || self.hbm.gib <= 0.0 {
                return Err(Error::config("hbm.gib and hbm.gbps_per_channel must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.cost.interposer_frac)
            || !(0.0..=1.0).contains(&self.cost.substrate_frac)
            || !(0.0..=1.0).contains(&self.cost.bonding_frac)
        {
            return Err(Error::config("cost fractions must lie in [0, 1]"));
        }
        if self.cost.wafer_cost_usd <= 0.0 || self.cost.hbm_usd_per_gb <= 0.0 {
            return Err(Error::config("cost prices must be positive"));
        }
        Ok(())
    }

    /// Full effective configuration, for report provenance. Every run is
    /// reproducible from this echo plus the dataset.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("app", self.app.name().to_string());
        match &self.dataset {
            DatasetSpec::Generated { scale, edge_factor, seed } => {
                put("dataset.scale", scale.to_string());
                put("dataset.edge_factor", edge_factor.to_string());
                put("dataset.seed", seed.to_string());
            }
            DatasetSpec::File(p) => put("dataset.path", p.display().to_string()),
        }
        put("root", self.root.to_string());
        put("epochs", self.epochs.to_string());
        if let Some(b) = self.bins {
            put("bins", b.to_string());
        }
        put(
            "accumulation",
            match self.accumulation {
                AccumMode::Fixed => "fixed".to_string(),
                AccumMode::Float => "float".to_string(),
            },
        );
        put("tiles_per_die_side", self.tiles_per_die_side.to_string());
        put("dies_per_package_side", self.dies_per_package_side.to_string());
        put("packages_x", self.packages_x.to_string());
        put("packages_y", self.packages_y.to_string());
        put("tile_noc_mode", self.tile_noc_mode.name().to_string());
        put("die_noc_mode", self.die_noc_mode.name().to_string());
        put("torus_scope", "system".to_string());
        put("noc_option", self.noc_option.to_string());
        put("d2d_shared", self.d2d_shared.to_string());
        put("die_noc.width_bits", self.die_noc_width_bits.to_string());
        for (i, n) in self.nocs.iter().enumerate() {
            put(&format!("noc.{i}.width_bits"), n.width_bits.to_string());
            put(&format!("noc.{i}.d2d_width_bits"), n.d2d_width_bits.to_string());
            put(&format!("noc.{i}.buffer_entries"), n.buffer_entries.to_string());
        }
        for (name, c) in &self.channels {
            if let Some(noc) = c.noc {
                let v = match noc {
                    NocAssign::Tile(i) => i.to_string(),
                    NocAssign::Die => "die".to_string(),
                };
                put(&format!("channel.{name}.noc"), v);
            }
            if let Some(w) = c.weight {
                put(&format!("channel.{name}.weight"), w.to_string());
            }
        }
        for (name, t) in &self.tasks {
            if let Some(v) = t.iq_size {
                put(&format!("task.{name}.iq_size"), v.to_string());
            }
            if let Some(v) = t.oq_size {
                put(&format!("task.{name}.oq_size"), v.to_string());
            }
            if let Some(v) = &t.channel {
                put(&format!("task.{name}.channel"), v.clone());
            }
            if let Some(v) = t.proxy_region {
                put(&format!("task.{name}.proxy_region"), v.to_string());
            }
            if let Some(v) = t.proxy_lines {
                put(&format!("task.{name}.proxy_lines"), v.to_string());
            }
            if let Some(v) = t.proxy_full_copy {
                put(&format!("task.{name}.proxy_full_copy"), v.to_string());
            }
            if let Some(v) = t.merge {
                put(&format!("task.{name}.merge"), v.name().to_string());
            }
            if let Some(v) = t.default_value {
                put(&format!("task.{name}.default"), v.to_string());
            }
            if let Some(v) = t.prefetch {
                put(&format!("task.{name}.prefetch"), v.name().to_string());
            }
        }
        put("iq_size", self.default_iq_size.to_string());
        put("oq_size", self.default_oq_size.to_string());
        put("sram_kib", self.sram_kib.to_string());
        put("code_kib", self.code_kib.to_string());
        put("dcache_lines", self.dcache_lines.to_string());
        put("hbm.enabled", self.hbm.enabled.to_string());
        put("hbm.gib", fmt_f64(self.hbm.gib));
        put("hbm.channels", self.hbm.channels.to_string());
        put("hbm.gbps_per_channel", fmt_f64(self.hbm.gbps_per_channel));
        put("hbm.latency_cycles", self.hbm.latency_cycles.to_string());
        put("proxy.cascade", self.cascade.name().to_string());
        put("proxy.idle_writeback", self.idle_writeback.to_string());
        put("sim.max_cycles", self.max_cycles.to_string());
        put("energy.pu_pj_per_op", fmt_f64(self.energy.pu_pj_per_op));
        put("cost.defect_per_mm2", fmt_f64(self.cost.defect_per_mm2));
        m
    }
}

fn fmt_f64(v: f64) -> String {
    let mut s = String::new();
    let _ = write!(s, "{v}");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_kv_with_comments() {
        let text = "# a comment\napp = sssp\n\ngrid_side=16 # trailing\ntask.update.proxy_region = 4\n";
        let map = parse_kv(text).unwrap();
        let cfg = RunConfig::from_map(&map).unwrap();
        assert_eq!(cfg.app, App::Sssp);
        assert_eq!(cfg.grid_side(), 16);
        assert_eq!(cfg.tasks["update"].proxy_region, Some(4));
    }

    #[test]
    fn rejects_unknown_keys() {
        let map = parse_kv("grid_sire=16\n").unwrap();
        let err = RunConfig::from_map(&map).unwrap_err();
        assert!(err.to_string().contains("grid_sire"));
    }

    #[test]
    fn rejects_region_not_dividing_grid() {
        let map = parse_kv("grid_side=16\ntask.update.proxy_region=5\n").unwrap();
        let err = RunConfig::from_map(&map).unwrap_err();
        assert!(err.to_string().contains("proxy_region"), "{err}");
    }

    #[test]
    fn noc_option_presets() {
        let (a, shared_a) = noc_option_preset('a').unwrap();
        assert_eq!(a.len(), 2);
        assert!(shared_a);
        let (c, shared_c) = noc_option_preset('c').unwrap();
        assert_eq!(c[1].width_bits, 64);
        assert!(!shared_c);
        assert!(noc_option_preset('z').is_err());
    }

    #[test]
    fn grid_side_sugar_maps_hierarchy() {
        let mut cfg = RunConfig::default();
        cfg.set_grid_side(8).unwrap();
        assert_eq!((cfg.tiles_per_die_side, cfg.dies_per_package_side), (8, 1));
        cfg.set_grid_side(32).unwrap();
        assert_eq!((cfg.tiles_per_die_side, cfg.dies_per_package_side), (16, 2));
        cfg.set_grid_side(128).unwrap();
        assert_eq!(cfg.packages_x, 2);
        assert!(cfg.set_grid_side(12).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set_grid_side(16).unwrap();
        let echo = cfg.echo();
        let again = RunConfig::from_map(&echo).unwrap();
        assert_eq!(again.grid_side(), 16);
        assert_eq!(again.noc_option, cfg.noc_option);
    }
}
