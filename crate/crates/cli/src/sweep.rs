//! Experiment sweeps: one configuration axis per invocation, each point a
//! full simulation, results as CSV with the axis baseline normalized to 1.0
//! the way the corresponding study normalizes (speedup over no-proxy,
//! IQ-ratio-1, NoC option a, the smallest grid, or the SRAM-only package).
//!
//! Points run on a host thread pool capped by TASCADE_SIM_THREADS; every
//! point is internally deterministic, and rows are emitted in axis order,
//! so the CSV content is independent of the pool size.

use std::collections::BTreeMap;

use anyhow::bail;

use tascade_core::config::RunConfig;
use tascade_core::report::Report;
use tascade_core::Simulator;

pub const CSV_HEADER: &str = "axis,point,status,cycles,window_cycles,teps,utilization,\
owner_bound_flit_hops,total_flit_hops,backpressure_stall_cycles,energy_total_pj,avg_power_w,\
package_cost_usd,throughput_per_dollar,efficiency_per_dollar,speedup_vs_baseline,\
norm_throughput_per_dollar,norm_efficiency_per_dollar";

struct PointResult {
    label: String,
    outcome: Result<Report, String>,
}

fn default_points(axis: &str, base: &RunConfig) -> anyhow::Result<Vec<String>> {
    Ok(match axis {
        "iq_ratio" => ["1", "2", "4", "8", "16", "32"].map(String::from).to_vec(),
        "proxy_region" => {
            let side = base.grid_side();
            let mut pts = vec!["none".to_string()];
            for r in [16u32, 8, 4] {
                if r <= side && side % r == 0 {
                    pts.push(r.to_string());
                }
            }
            pts
        }
        "noc_option" => ["a", "b", "c", "d"].map(String::from).to_vec(),
        "grid_scale" => ["8", "16", "32"].map(String::from).to_vec(),
        "packaging" => ["sram_only", "hbm"].map(String::from).to_vec(),
        other => bail!(
            "unknown sweep axis `{other}` (expected iq_ratio|proxy_region|noc_option|grid_scale|packaging)"
        ),
    })
}

fn apply_point(axis: &str, point: &str, base: &RunConfig) -> anyhow::Result<RunConfig> {
    let mut cfg = base.clone();
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    match axis {
        "iq_ratio" => {
            let ratio: u32 = point.parse()?;
            map.insert("iq_size".into(), (ratio * cfg.default_oq_size).to_string());
        }
        "proxy_region" => {
            map.insert("task.update.proxy_region".into(), point.to_string());
        }
        "noc_option" => {
            map.insert("noc_option".into(), point.to_string());
        }
        "grid_scale" => {
            cfg.set_grid_side(point.parse()?)?;
        }
        "packaging" => {
            let enabled = match point {
                "sram_only" => "false",
                "hbm" => "true",
                other => bail!("packaging point must be sram_only|hbm, got `{other}`"),
            };
            map.insert("hbm.enabled".into(), enabled.to_string());
        }
        other => bail!("unknown sweep axis `{other}`"),
    }
    cfg.apply_map(&map)?;
    cfg.validate()?;
    Ok(cfg)
}

fn run_point(cfg: &RunConfig) -> Result<Report, String> {
    let mut sim = Simulator::build(cfg).map_err(|e| e.to_string())?;
    sim.run().map_err(|e| e.to_string())?;
    Ok(Report::from_sim(&mut sim, None))
}

pub fn run_sweep(axis: &str, points: Option<&str>, base: &RunConfig) -> anyhow::Result<String> {
    let points: Vec<String> = match points {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => default_points(axis, base)?,
    };
    if points.is_empty() {
        bail!("sweep needs at least one point");
    }
    let threads: usize = std::env::var("TASCADE_SIM_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&t| t > 0)
        .unwrap_or(1)
        .min(points.len());

    // Per-point failures are recorded and the sweep continues.
    let mut results: Vec<Option<PointResult>> = Vec::new();
    results.resize_with(points.len(), || None);
    let jobs: Vec<(usize, anyhow::Result<RunConfig>)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, apply_point(axis, p, base)))
        .collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let result_slots = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            let (next, result_slots, jobs, points) = (&next, &result_slots, &jobs, &points);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= jobs.len() {
                    return;
                }
                let outcome = match &jobs[i].1 {
                    Ok(cfg) => run_point(cfg),
                    Err(e) => Err(e.to_string()),
                };
                let row = PointResult { label: points[i].clone(), outcome };
                result_slots.lock().unwrap()[i] = Some(row);
            });
        }
    });

    let results: Vec<PointResult> =
        results.into_iter().map(|r| r.expect("all points processed")).collect();
    let baseline = results.iter().find_map(|r| r.outcome.as_ref().ok());
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in &results {
        match &r.outcome {
            Ok(rep) => {
                let speedup = baseline
                    .map(|b| b.cycles as f64 / rep.cycles as f64)
                    .unwrap_or(1.0);
                let norm_tpd = baseline
                    .map(|b| rep.throughput_per_dollar / b.throughput_per_dollar)
                    .unwrap_or(1.0);
                let norm_epd = baseline
                    .map(|b| rep.efficiency_per_dollar / b.efficiency_per_dollar)
                    .unwrap_or(1.0);
                let total_flit_hops: u64 = rep.traffic.flit_hops_per_channel.values().sum();
                csv.push_str(&format!(
                    "{},{},ok,{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    axis,
                    r.label,
                    rep.cycles,
                    rep.window.end_cycle,
                    rep.teps,
                    rep.utilization,
                    rep.traffic.owner_bound_flit_hops,
                    total_flit_hops,
                    rep.traffic.backpressure_stall_cycles,
                    rep.energy.total_pj,
                    rep.power.avg_w,
                    rep.cost.total_usd,
                    rep.throughput_per_dollar,
                    rep.efficiency_per_dollar,
                    speedup,
                    norm_tpd,
                    norm_epd,
                ));
            }
            Err(e) => {
                csv.push_str(&format!(
                    "{},{},\"error: {}\",,,,,,,,,,,,,,,\n",
                    axis,
                    r.label,
                    e.replace('"', "'")
                ));
            }
        }
    }
    Ok(csv)
}
