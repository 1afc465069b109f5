//! Structured run report: metrics, traffic, energy breakdown, cost, and a
//! full config echo for provenance. Serialized as versioned JSON with
//! deterministic field and key order; reports never carry timestamps, so
//! identical runs produce byte-identical documents.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::models::{self, EnergyLedger};
use crate::sim::{Counters, Simulator};
use crate::workloads::CH_UPDATE;
use crate::CLOCK_HZ;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct DatasetInfo {
    pub vertices: u64,
    pub edges: u64,
    pub hash: String,
}

#[derive(Debug, Serialize)]
pub struct GridInfo {
    pub width: u32,
    pub height: u32,
    pub tiles: u32,
    pub dies: u32,
    pub packages: u32,
}

#[derive(Debug, Serialize)]
pub struct Window {
    pub start_cycle: u64,
    pub end_cycle: u64,
}

#[derive(Debug, Serialize)]
pub struct Bandwidth {
    pub avg_on_chip_gbps: f64,
    pub peak_on_chip_gbps: f64,
    pub hbm_bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct Traffic {
    pub injected: u64,
    pub ejected: u64,
    pub absorbed: u64,
    pub local_pushes: u64,
    pub flit_hops_per_channel: BTreeMap<String, u64>,
    pub msg_hops_per_channel: BTreeMap<String, u64>,
    /// Flit-hops of the owner-bound update channel (the proxied one).
    pub owner_bound_flit_hops: u64,
    pub flit_hops_intra_die: u64,
    pub flit_hops_die_to_die: u64,
    pub flit_hops_off_package: u64,
    pub eject_blocked_cycles: u64,
    pub inject_backpressure_cycles: u64,
    pub gated_dispatch_cycles: u64,
    /// Endpoint backpressure metric: cycles deliveries stalled on full IQs
    /// plus cycles injections stalled on full buffers.
    pub backpressure_stall_cycles: u64,
    pub pcache_merges: u64,
    pub pcache_filtered: u64,
    pub pcache_evictions: u64,
    pub flush_rounds: u64,
}

#[derive(Debug, Serialize)]
pub struct EnergyReport {
    pub compute_pj: f64,
    pub memory_pj: f64,
    pub noc_pj: f64,
    pub total_pj: f64,
    pub compute_frac: f64,
    pub memory_frac: f64,
    pub noc_frac: f64,
    pub detail: EnergyLedger,
}

#[derive(Debug, Serialize)]
pub struct Power {
    pub avg_w: f64,
    pub peak_w: f64,
}

#[derive(Debug, Serialize)]
pub struct CostReport {
    pub die_area_mm2: f64,
    pub die_yield: f64,
    pub dies_per_wafer: u32,
    pub usd_per_die: f64,
    pub tca_dies: u32,
    pub hbm_dies: u32,
    pub packages: u32,
    pub package_usd: f64,
    pub total_usd: f64,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub app: String,
    pub dataset: DatasetInfo,
    pub grid: GridInfo,
    pub config: BTreeMap<String, String>,
    /// Cycles to global quiescence (includes the drain tail).
    pub cycles: u64,
    /// Measurement window: seed injection to the last owner-side update.
    pub window: Window,
    pub traversed_elements: u64,
    pub teps: f64,
    pub utilization: f64,
    pub bandwidth: Bandwidth,
    pub traffic: Traffic,
    pub energy: EnergyReport,
    pub power: Power,
    pub cost: CostReport,
    pub throughput_per_dollar: f64,
    pub efficiency_per_dollar: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verified: Option<bool>,
}

impl Report {
    pub fn from_sim(sim: &mut Simulator, verified: Option<bool>) -> Report {
        let total_pj = sim.refresh_and_total_energy();
        let counters: Counters = sim.counters.clone();
        let result = sim.result();
        let m = sim.wl.teps_elements(&result);
        let window_end = sim.last_result_update.max(1);
        let teps = models::teps(m, window_end, CLOCK_HZ);
        let cycles = sim.cycle.max(1);

        let cost = cost_report(sim);
        let graph = sim.wl.graph.as_ref();
        let dataset = DatasetInfo {
            vertices: graph.map(|g| g.v).unwrap_or(0),
            edges: graph.map(|g| g.e).unwrap_or(0),
            hash: format!("{:016x}", sim.wl.dataset_hash),
        };
        let mut flit_hops = BTreeMap::new();
        let mut msg_hops = BTreeMap::new();
        for (i, ch) in sim.wl.channels.iter().enumerate() {
            flit_hops.insert(ch.name.clone(), counters.flit_hops_per_channel[i]);
            msg_hops.insert(ch.name.clone(), counters.msg_hops_per_channel[i]);
        }
        let time_s = cycles as f64 / CLOCK_HZ;
        let avg_w = total_pj * 1e-12 / time_s;
        let ledger = sim.ledger;
        let teps_per_usd = teps / cost.total_usd;
        let eff_per_usd = if avg_w > 0.0 { teps / avg_w / cost.total_usd } else { 0.0 };
        Report {
            schema_version: SCHEMA_VERSION,
            app: sim.cfg.app.name().to_string(),
            dataset,
            grid: GridInfo {
                width: sim.grid.width(),
                height: sim.grid.height(),
                tiles: sim.grid.tile_count(),
                dies: sim.grid.die_count(),
                packages: sim.grid.packages_x * sim.grid.packages_y,
            },
            config: sim.cfg.echo(),
            cycles: sim.cycle,
            window: Window { start_cycle: 0, end_cycle: window_end },
            traversed_elements: m,
            teps,
            utilization: sim.utilization(),
            bandwidth: Bandwidth {
                avg_on_chip_gbps: sim.mem.sram_bytes_accessed as f64 / cycles as f64,
                peak_on_chip_gbps: counters.peak_cycle_sram_bytes as f64,
                hbm_bytes: sim.mem.hbm_bytes(),
            },
            traffic: Traffic {
                injected: counters.injected,
                ejected: counters.ejected,
                absorbed: counters.absorbed,
                local_pushes: counters.local_pushes,
                owner_bound_flit_hops: counters.flit_hops_per_channel
                    [CH_UPDATE as usize],
                flit_hops_per_channel: flit_hops,
                msg_hops_per_channel: msg_hops,
                flit_hops_intra_die: counters.flit_hops_intra,
                flit_hops_die_to_die: counters.flit_hops_d2d,
                flit_hops_off_package: counters.flit_hops_off_package,
                eject_blocked_cycles: counters.eject_blocked_cycles,
                inject_backpressure_cycles: counters.inject_backpressure_cycles,
                gated_dispatch_cycles: counters.gated_dispatch_cycles,
                backpressure_stall_cycles: counters.eject_blocked_cycles
                    + counters.inject_backpressure_cycles,
                pcache_merges: counters.pcache_merges,
                pcache_filtered: counters.pcache_filtered,
                pcache_evictions: counters.pcache_evictions,
                flush_rounds: counters.flush_rounds,
            },
            energy: EnergyReport {
                compute_pj: ledger.compute_pj(),
                memory_pj: ledger.memory_pj(),
                noc_pj: ledger.noc_pj(),
                total_pj,
                compute_frac: frac(ledger.compute_pj(), total_pj),
                memory_frac: frac(ledger.memory_pj(), total_pj),
                noc_frac: frac(ledger.noc_pj(), total_pj),
                detail: ledger,
            },
            power: Power { avg_w, peak_w: sim.peak_window_power_w.max(avg_w) },
            cost,
            throughput_per_dollar: teps_per_usd,
            efficiency_per_dollar: eff_per_usd,
            verified,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

fn frac(part: f64, total: f64) -> f64 {
    if total > 0.0 {
        part / total
    } else {
        0.0
    }
}

fn cost_report(sim: &Simulator) -> CostReport {
    let cfg = &sim.cfg;
    let area = models::die_area_mm2(sim.grid.tiles_per_die(), cfg.sram_kib * 1024, &cfg.cost);
    let die = models::die_cost(area, &cfg.cost).expect("die area validated at build");
    let packages = sim.grid.packages_x * sim.grid.packages_y;
    let tca_dies = sim.grid.die_count();
    let hbm_dies = if cfg.hbm.enabled { tca_dies } else { 0 };
    let per_pkg_tca = tca_dies / packages;
    let per_pkg_hbm = hbm_dies / packages;
    let package_usd =
        models::package_cost(per_pkg_tca, per_pkg_hbm, die.usd_per_die, area, &cfg.cost);
    CostReport {
        die_area_mm2: area,
        die_yield: die.yield_frac,
        dies_per_wafer: die.dies_per_wafer,
        usd_per_die: die.usd_per_die,
        tca_dies,
        hbm_dies,
        packages,
        package_usd,
        total_usd: package_usd * packages as f64,
    }
}
