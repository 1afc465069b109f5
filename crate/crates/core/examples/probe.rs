use std::collections::BTreeMap;
use tascade_core::config::RunConfig;
use tascade_core::noc::{Fabric, INPORT_INJ, OUT_LOCAL};
use tascade_core::topology::{NocTopology, TileId};
use tascade_core::Simulator;

fn diagnose(sim: &Simulator) {
    let fabric: &Fabric = &sim.fabric;
    let torus = fabric.mode == NocTopology::FoldedTorus;
    let (mut heads, mut port_busy, mut down_full, mut iq_block, mut movable) = (0, 0, 0, 0, 0);
    let mut locked = 0;
    for n in 0..fabric.node_count() {
        for (noc_i, phys) in fabric.nocs.iter().enumerate() {
            let router = &fabric.nodes[n as usize].nocs[noc_i];
            let mut m = router.occ;
            while m != 0 {
                let bit = m.trailing_zeros() as usize;
                m &= m - 1;
                let (inport, slot) = (bit / 6, bit % 6);
                let fifo = &router.inp[inport][slot];
                if fifo.head_locked { locked += 1; continue; }
                let Some(msg) = fifo.head() else { continue };
                heads += 1;
                let ch = phys.channels[slot];
                let meta = &sim.wl.channels[ch as usize];
                let dest = sim.grid.owner_tile_fast(msg.dest_index, meta.chunk_shift);
                let port = fabric.next_port(n, dest.0);
                let outport = port.index();
                if router.out[outport].is_some() { port_busy += 1; continue; }
                if outport == OUT_LOCAL {
                    if sim.tiles[dest.0 as usize].queues[meta.dest_task].iq_free() == 0 {
                        iq_block += 1;
                    } else { movable += 1; }
                    continue;
                }
                let to = fabric.neighbor_node(n, port).unwrap();
                let flits = fabric.slot_flits(noc_i, slot);
                let ring = torus && Fabric::enters_ring(inport, outport);
                let need = flits + if ring { phys.bubble_flits } else { 0 };
                let down = &fabric.nodes[to as usize].nocs[noc_i].inp[port.opposite().index()][slot];
                if down.free() < need { down_full += 1; } else { movable += 1; }
            }
        }
    }
    println!("  heads {heads} locked {locked} port_busy {port_busy} down_full {down_full} iq_block {iq_block} MOVABLE {movable}");
    let _ = INPORT_INJ;
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut map = BTreeMap::new();
    for kv in &args {
        let (k, v) = kv.split_once('=').unwrap();
        map.insert(k.to_string(), v.to_string());
    }
    let cfg = RunConfig::from_map(&map).unwrap();
    let mut sim = Simulator::build(&cfg).unwrap();
    let mut next_dump = 5000u64;
    loop {
        sim.step().unwrap();
        if !sim.had_activity() && sim.quiescent() { break; }
        if sim.cycle == next_dump {
            next_dump += 20000;
            println!("cyc {} inflight {} ej {}", sim.cycle, sim.fabric.total_messages(), sim.counters.ejected);
            diagnose(&sim);
        }
        if sim.cycle > 120_000 { break; }
    }
    println!("done at {}", sim.cycle);
}
