use std::collections::BTreeMap;
use tascade_core::config::RunConfig;
use tascade_core::noc::WireMessage;
use tascade_core::util::Rng;
use tascade_core::value::Value;
use tascade_core::workloads::CH_UPDATE;
use tascade_core::Simulator;

fn main() {
    let map: BTreeMap<String, String> = [
        ("app", "histogram"), ("dataset.scale", "10"), ("grid_side", "16"),
        ("bins", "4096"), ("sim.max_cycles", "100000"),
    ].iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let cfg = RunConfig::from_map(&map).unwrap();
    let mut sim = Simulator::build(&cfg).unwrap();
    sim.clear_pending_seeds();
    let mut rng = Rng::new(7);
    // Uniform random traffic: 8 new messages per cycle for 5000 cycles.
    for c in 0..5000u64 {
        for _ in 0..64 {
            let from = rng.below(256) as u32;
            let dest = rng.below(4096) as u32;
            sim.push_external_message(from, WireMessage { channel: CH_UPDATE, dest_index: dest, value: Value(1) });
        }
        sim.step().unwrap();
        if c % 1000 == 0 {
            println!("cyc {} inflight {} inj {} ej {} rate {:.2}",
                sim.cycle, sim.fabric.total_messages(), sim.counters.injected, sim.counters.ejected,
                sim.counters.ejected as f64 / sim.cycle as f64);
        }
    }
    println!("final: inj {} ej {} cycles {}", sim.counters.injected, sim.counters.ejected, sim.cycle);
}
