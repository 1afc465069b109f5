use std::collections::BTreeMap;
use tascade_core::config::RunConfig;
use tascade_core::sim::PuState;
use tascade_core::Simulator;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut map = BTreeMap::new();
    for kv in &args {
        let (k, v) = kv.split_once('=').unwrap();
        map.insert(k.to_string(), v.to_string());
    }
    let cfg = RunConfig::from_map(&map).unwrap();
    let mut sim = Simulator::build(&cfg).unwrap();
    let mut next_dump = 2000u64;
    loop {
        sim.step().unwrap();
        if !sim.had_activity() && sim.quiescent() { break; }
        if sim.cycle == next_dump {
            next_dump += 15000;
            let mut running = 0u32;
            let mut iq = vec![0u64; sim.wl.tasks.len()];
            let mut oqf = vec![0u64; sim.wl.tasks.len()];
            let mut worst_iq = (0u32, 0usize);
            for (ti, t) in sim.tiles.iter().enumerate() {
                if !matches!(t.pu, PuState::Idle) { running += 1; }
                for (k, q) in t.queues.iter().enumerate() {
                    iq[k] += q.iq.len() as u64;
                    if q.oq_free() == 0 { oqf[k] += 1; }
                    if q.iq.len() as u32 > worst_iq.0 { worst_iq = (q.iq.len() as u32, ti); }
                }
            }
            println!("cyc {:>6} run {:>4} inflight {:>6} iq {:?} oq_full {:?} worst_iq {:?} ej {} abs {} merges {} filt {} evict {}",
                sim.cycle, running, sim.fabric.total_messages(), iq, oqf, worst_iq,
                sim.counters.ejected, sim.counters.absorbed,
                sim.counters.pcache_merges, sim.counters.pcache_filtered, sim.counters.pcache_evictions);
        }
        if sim.cycle > 160_000 { break; }
    }
    println!("done at {} flush_rounds {}", sim.cycle, sim.counters.flush_rounds);
}
