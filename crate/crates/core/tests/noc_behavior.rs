//! Network behavior under pressure: bubble deadlock avoidance on torus
//! rings, flow-control boundedness, weighted arbitration shares, D2D
//! serialization, and the die-NoC path.

use std::collections::BTreeMap;

use tascade_core::config::RunConfig;
use tascade_core::noc::{WireMessage, INPORT_INJ};
use tascade_core::util::Rng;
use tascade_core::value::Value;
use tascade_core::workloads::{CH_EXPAND, CH_UPDATE};
use tascade_core::Simulator;

fn cfg_from(pairs: &[(&str, &str)]) -> RunConfig {
    let map: BTreeMap<String, String> = pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    RunConfig::from_map(&map).expect("test config is valid")
}

/// Histogram updates are pure sinks (add-merge spawns nothing), which makes
/// saturation tests free of follow-on traffic.
fn quiet_sim(grid: u32, torus: bool, scale: u32) -> Simulator {
    let cfg = cfg_from(&[
        ("app", "histogram"),
        ("dataset.scale", &scale.to_string()),
        ("grid_side", &grid.to_string()),
        ("bins", &(grid * grid * 4).to_string()),
        (
            "tile_noc_mode",
            if torus { "folded_torus" } else { "mesh" },
        ),
        ("sim.max_cycles", "5000000"),
    ]);
    let mut sim = Simulator::build(&cfg).expect("build");
    sim.clear_pending_seeds();
    sim
}

/// Randomized saturation on a torus: sustained injection pressure must
/// never freeze the network (the engine aborts on any cycle where nothing
/// moves while work is outstanding).
fn saturate(mut sim: Simulator, pressure_cycles: u64, seed: u64) {
    let bins = sim.wl.arrays[sim.wl.roles.target].len();
    let tiles = sim.grid.tile_count() as u64;
    let mut rng = Rng::new(seed);
    for _ in 0..pressure_cycles {
        for _ in 0..4 {
            let from = rng.below(tiles) as u32;
            let dest = rng.below(bins) as u32;
            sim.push_external_message(
                from,
                WireMessage { channel: CH_UPDATE, dest_index: dest, value: Value(1) },
            );
        }
        sim.step().expect("saturated network must keep moving");
    }
    // Drain to quiescence; counts must reconcile.
    sim.run().expect("drain after saturation");
    assert_eq!(sim.counters.injected, sim.counters.ejected + sim.counters.absorbed);
}

#[test]
fn torus_8x8_survives_one_million_cycles_of_pressure() {
    // ~4M injection attempts over 1e6 cycles.
    saturate(quiet_sim(8, true, 8), 1_000_000, 11);
}

#[test]
fn torus_16x16_survives_saturation() {
    saturate(quiet_sim(16, true, 10), 200_000, 13);
}

#[test]
fn mesh_16x16_survives_saturation() {
    saturate(quiet_sim(16, false, 10), 100_000, 17);
}

#[test]
fn four_ring_bubble_blocks_injection_but_drains() {
    // One torus row of 4 tiles (grid 4x4, traffic confined to row 0).
    // Saturate the row ring with +2 wraparound traffic, then check that
    // injection saw backpressure while forwarding kept going, and that
    // everything drains.
    let mut sim = quiet_sim(4, true, 8);
    let bins = sim.wl.arrays[sim.wl.roles.target].len() as u32; // 64: 4 bins/tile
    let mut blocked_while_moving = 0u64;
    for c in 0..600u64 {
        for t in 0..4u32 {
            // Destination bin owned by the tile two hops around the row ring.
            let dest_tile = (t + 2) % 4;
            let bin = dest_tile * (bins / 16);
            sim.push_external_message(
                t,
                WireMessage { channel: CH_UPDATE, dest_index: bin, value: Value(1) },
            );
        }
        let hops_before = sim.counters.flit_hops_per_channel[CH_UPDATE as usize];
        let bp_before = sim.counters.inject_backpressure_cycles;
        sim.step().expect("ring must not deadlock");
        let moved = sim.counters.flit_hops_per_channel[CH_UPDATE as usize] > hops_before;
        // OQ-side backpressure shows up once the ring fills.
        let has_blocked_inject = sim
            .fabric
            .nodes
            .iter()
            .take(4)
            .any(|n| {
                n.nocs[1].inp[INPORT_INJ].iter().any(|f| f.free() < 2)
            });
        if c > 50 && moved && has_blocked_inject {
            blocked_while_moving += 1;
        }
        let _ = bp_before;
    }
    assert!(
        blocked_while_moving > 0,
        "saturation never produced blocked-injection-while-draining cycles"
    );
    sim.run().expect("drain");
    assert_eq!(sim.counters.injected, sim.counters.ejected + sim.counters.absorbed);
}

#[test]
fn weighted_round_robin_respects_shares() {
    // expand weight 1, update weight 3, both riding NoC 0 and continuously
    // backlogged from tile 0: departures stay near the 1:3 share and the
    // light channel is never starved.
    let cfg = cfg_from(&[
        ("app", "bfs"),
        ("dataset.scale", "10"),
        ("grid_side", "8"),
        ("tile_noc_mode", "mesh"),
        ("noc_option", "a"),
        ("channel.expand.noc", "0"),
        ("channel.update.noc", "0"),
        ("channel.update.weight", "3"),
        ("sim.max_cycles", "100000"),
    ]);
    let mut sim = Simulator::build(&cfg).expect("build");
    sim.clear_pending_seeds();
    let mut pushed = (0u64, 0u64);
    for _ in 0..400 {
        if sim.push_external_message(
            0,
            WireMessage { channel: CH_EXPAND, dest_index: 1023, value: Value(0) },
        ) {
            pushed.0 += 1;
        }
        if sim.push_external_message(
            0,
            WireMessage { channel: CH_UPDATE, dest_index: 1023, value: Value(1) },
        ) {
            pushed.1 += 1;
        }
        sim.step().expect("step");
    }
    let remaining = |sim: &Simulator, slot: usize| {
        sim.fabric.nodes[0].nocs[0].inp[INPORT_INJ][slot].q.len() as u64
    };
    let dep_e = pushed.0 - remaining(&sim, CH_EXPAND as usize);
    let dep_u = pushed.1 - remaining(&sim, CH_UPDATE as usize);
    assert!(dep_e > 0, "light channel starved");
    // update carries 2 flits per message vs expand's 1, so the cycle share
    // 3:1 yields a message share near 3:2.
    let ratio = dep_u as f64 / dep_e as f64;
    assert!(
        (1.0..=3.0).contains(&ratio),
        "weighted share out of range: expand {dep_e}, update {dep_u}"
    );
}

#[test]
fn d2d_crossing_serializes_at_link_width() {
    // One 64-bit update message crossing one die boundary. Option c
    // serializes 64 bits over a 32-bit D2D link (2 cycles) plus 4 cycles of
    // link latency; option d's 64-bit D2D link saves one cycle.
    let run = |option: &str| {
        let cfg = cfg_from(&[
            ("app", "bfs"),
            ("dataset.scale", "10"),
            ("grid_side", "32"),
            ("tile_noc_mode", "mesh"),
            ("noc_option", option),
            ("sim.max_cycles", "1000"),
        ]);
        let mut sim = Simulator::build(&cfg).expect("build");
        sim.clear_pending_seeds();
        // 1024 vertices over 1024 tiles: vertex 16 lives at tile (16,0), one
        // hop east of (15,0) across the die edge.
        assert!(sim.push_external_message(
            15,
            WireMessage { channel: CH_UPDATE, dest_index: 16, value: Value(3) }
        ));
        let mut cycles = 0u64;
        while sim.counters.ejected == 0 {
            sim.step().expect("step");
            cycles += 1;
            assert!(cycles < 100);
        }
        (cycles, sim.ledger.d2d_pj)
    };
    let (cycles_c, d2d_pj) = run("c");
    let (cycles_d, _) = run("d");
    // Hop (2 serialization + 4 latency) then a same-cycle ejection.
    assert_eq!(cycles_c, 7);
    assert_eq!(cycles_d, 6);
    // 64 bits at 0.55 pJ/bit.
    assert!((d2d_pj - 35.2).abs() < 1e-9, "d2d energy {d2d_pj}");
}

#[test]
fn die_noc_channel_hops_once_per_die() {
    // Map the update channel onto the die-NoC: a corner-to-corner message
    // on a 32x32 grid (2x2 dies) takes 2 die-level hops instead of 62.
    let cfg = cfg_from(&[
        ("app", "bfs"),
        ("dataset.scale", "10"),
        ("grid_side", "32"),
        ("tile_noc_mode", "mesh"),
        ("die_noc_mode", "mesh"),
        ("channel.update.noc", "die"),
        ("sim.max_cycles", "1000"),
    ]);
    let mut sim = Simulator::build(&cfg).expect("build");
    sim.clear_pending_seeds();
    assert!(sim.die_fabric.is_some());
    // Vertex 1023 is owned by tile 1023 = (31, 31), in die 3.
    assert!(sim.push_external_message(
        0,
        WireMessage { channel: CH_UPDATE, dest_index: 1023, value: Value(9) }
    ));
    let mut cycles = 0u64;
    while sim.counters.ejected == 0 {
        sim.step().expect("step");
        cycles += 1;
        assert!(cycles < 200, "die-NoC message never delivered");
    }
    assert_eq!(sim.counters.msg_hops_per_channel[CH_UPDATE as usize], 2);
    assert!(sim.counters.flit_hops_d2d > 0);
}

#[test]
fn flit_occupancy_matches_message_width() {
    // A 3-payload-word message occupies 4 flit slots of a 32-bit NoC
    // injection FIFO (128 bits / 32).
    let cfg = cfg_from(&[("app", "pagerank"), ("dataset.scale", "8"), ("grid_side", "4")]);
    let mut sim = Simulator::build(&cfg).expect("build");
    sim.clear_pending_seeds();
    // Fixed-point rank updates carry 2 payload words (index + 2 = 96 bits);
    // push onto the 32-bit expand NoC instead to get the 4-flit shape? The
    // expand channel carries no payload, so use the update channel moved to
    // NoC 0 in a dedicated config below.
    drop(sim);
    let cfg = cfg_from(&[
        ("app", "pagerank"),
        ("dataset.scale", "8"),
        ("grid_side", "4"),
        ("channel.update.noc", "0"),
    ]);
    let mut sim = Simulator::build(&cfg).expect("build");
    sim.clear_pending_seeds();
    assert!(sim.push_external_message(
        5,
        WireMessage { channel: CH_UPDATE, dest_index: 0, value: Value(7) }
    ));
    let slot = CH_UPDATE as usize; // slot order follows channel ids on NoC 0
    let fifo = &sim.fabric.nodes[5].nocs[0].inp[INPORT_INJ][slot];
    assert_eq!(fifo.q.len(), 1);
    assert_eq!(fifo.flits, 3); // index + 2-word fixed-point value = 96 bits
}
