//! Physical NoCs and cycle-accurate routers: per-channel input FIFOs drawn
//! from a shared buffer pool, message-granular wormhole transfers, weighted
//! round-robin channel arbitration, bubble deadlock avoidance on torus
//! rings, and the hook through which en-route proxy tiles absorb passing
//! messages.
//!
//! Routers advance in two phases per cycle: intents are computed against the
//! frozen cycle state (a pure function, safe to evaluate in parallel), then
//! commits apply in canonical node order, so outcomes never depend on
//! evaluation order.

use std::collections::{HashMap, VecDeque};

use crate::topology::{GridGeometry, LinkKind, NocTopology, Port, TileId};
use crate::value::Value;

pub const INPORT_INJ: usize = 4;
pub const OUT_LOCAL: usize = 4;

/// A task invocation in flight. The first word is the destination array
/// index (used for routing — there is no separate header word), followed by
/// the element payload when the channel carries one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WireMessage {
    pub channel: u8,
    pub dest_index: u32,
    pub value: Value,
}

/// How a channel's destination tile is derived from the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteKind {
    /// Global owner of the index (equal-chunk sharding).
    Owner,
    /// The proxy owner inside the sender's region.
    RegionProxy,
}

/// Wiring of one logical channel.
#[derive(Debug, Clone)]
pub struct ChannelMeta {
    pub name: String,
    /// Task type whose IQ consumes these messages.
    pub dest_task: usize,
    /// Payload words after the index (0..=2).
    pub value_words: u32,
    /// Length of the array associated with this channel for routing.
    pub routing_len: u64,
    pub chunk_shift: u32,
    pub route: RouteKind,
    pub on_die_noc: bool,
    /// Physical NoC index (within the tile or die fabric).
    pub noc: usize,
    pub weight: u32,
    /// Owner-bound channel of a proxied task: passing proxy owners may
    /// absorb its messages (selective cascading).
    pub cascade: bool,
    pub proxy_region: u32,
    pub proxy_task: usize,
}

impl ChannelMeta {
    pub fn words(&self) -> u32 {
        1 + self.value_words
    }
    pub fn bits(&self) -> u32 {
        self.words() * 32
    }
}

pub fn flits_for(bits: u32, width_bits: u32) -> u32 {
    (bits + width_bits - 1) / width_bits
}

/// Per-(port, channel) input FIFO. Capacity and occupancy are in flits of
/// the owning physical NoC; `reserved` holds space promised to in-progress
/// upstream transfers.
#[derive(Debug, Clone, Default)]
pub struct ChFifo {
    pub q: VecDeque<WireMessage>,
    pub flits: u32,
    pub reserved: u32,
    pub cap: u32,
    /// Head is being streamed out by an active transfer.
    pub head_locked: bool,
}

impl ChFifo {
    pub fn free(&self) -> u32 {
        self.cap - self.flits - self.reserved
    }
    pub fn head(&self) -> Option<&WireMessage> {
        self.q.front()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum TransferDest {
    Forward { kind: LinkKind, flit_bits: u64, to: u32, flits: u32 },
    Eject,
}

/// An in-progress hop: the message stays at the head of its input FIFO
/// (flits streaming) and space is already reserved downstream.
#[derive(Debug, Clone, Copy)]
pub struct Transfer {
    pub inport: u8,
    pub ch: u8,
    pub remaining: u32,
    pub dest: TransferDest,
}

#[derive(Debug, Clone)]
pub struct NocRouter {
    /// Input FIFOs: [N, S, E, W, injection] x channel slot.
    pub inp: [Vec<ChFifo>; 5],
    /// At most one active transfer per output port.
    pub out: [Option<Transfer>; 5],
    /// Weighted round-robin position per output port (into the rotation).
    pub rr_rot: [u16; 5],
    /// Input-port round-robin position per output port.
    pub rr_in: [u8; 5],
    /// Non-empty FIFO bitmask: bit (inport * 6 + slot). Keeps arbitration
    /// proportional to resident messages, not router size.
    pub occ: u32,
}

#[inline]
pub fn occ_bit(inport: usize, slot: usize) -> u32 {
    1 << (inport * 6 + slot)
}

#[derive(Debug, Clone, Default)]
pub struct RouterNode {
    pub nocs: Vec<NocRouter>,
    /// Messages resident in this node's FIFOs (fast idle skip).
    pub msgs: u32,
    pub active_transfers: u32,
}

/// Static parameters of one physical NoC within a fabric.
#[derive(Debug, Clone)]
pub struct NocPhys {
    pub width_bits: u32,
    pub d2d_width_bits: u32,
    pub buffer_flits: u32,
    /// Channel ids riding this NoC, in slot order.
    pub channels: Vec<u8>,
    /// WRR rotation: channel slots repeated by weight.
    pub rotation: Vec<u8>,
    /// Ring-entry bubble margin: one maximum-size message.
    pub bubble_flits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FabricKind {
    /// Nodes are tiles.
    Tile,
    /// Nodes are dies; the network hops once per die.
    Die,
}

/// One routing substrate: the per-tile network or the per-die network.
#[derive(Debug)]
pub struct Fabric {
    pub kind: FabricKind,
    pub w: u32,
    pub h: u32,
    w_shift: u32,
    w_mask: u32,
    pub mode: NocTopology,
    pub grid: GridGeometry,
    pub nocs: Vec<NocPhys>,
    pub d2d_shared: bool,
    pub nodes: Vec<RouterNode>,
    /// Busy-until cycle of the shared die-boundary serializer, keyed by the
    /// directed (from, to) node pair. Only used when `d2d_shared`.
    pub serializers: HashMap<(u32, u32), u64>,
    /// Channel id -> (noc index, slot) on this fabric.
    pub slot_of: Vec<Option<(u8, u8)>>,
    /// Channel id -> payload words (flit math without the channel table).
    pub value_words: Vec<u32>,
    /// Message flits per (noc, slot) at the intra-die width.
    flits_tab: Vec<Vec<u32>>,
}

impl Fabric {
    pub fn new(
        kind: FabricKind,
        grid: GridGeometry,
        mode: NocTopology,
        nocs: Vec<NocPhys>,
        d2d_shared: bool,
        value_words: Vec<u32>,
    ) -> Self {
        let (w, h) = match kind {
            FabricKind::Tile => (grid.width(), grid.height()),
            FabricKind::Die => (grid.dies_x(), grid.dies_y()),
        };
        let mut slot_of = vec![None; value_words.len()];
        let mut flits_tab = Vec::with_capacity(nocs.len());
        for (ni, n) in nocs.iter().enumerate() {
            let mut tab = Vec::with_capacity(n.channels.len());
            for (si, &ch) in n.channels.iter().enumerate() {
                slot_of[ch as usize] = Some((ni as u8, si as u8));
                tab.push(flits_for(32 * (1 + value_words[ch as usize]), n.width_bits));
            }
            flits_tab.push(tab);
        }
        let node = RouterNode {
            nocs: nocs
                .iter()
                .map(|n| NocRouter {
                    inp: std::array::from_fn(|_| {
                        n.channels
                            .iter()
                            .map(|_| ChFifo { cap: n.buffer_flits, ..Default::default() })
                            .collect()
                    }),
                    out: [None; 5],
                    rr_rot: [0; 5],
                    rr_in: [0; 5],
                    occ: 0,
                })
                .collect(),
            msgs: 0,
            active_transfers: 0,
        };
        Fabric {
            kind,
            w,
            h,
            w_shift: w.trailing_zeros(),
            w_mask: w - 1,
            mode,
            grid,
            nocs,
            d2d_shared,
            nodes: vec![node; (w * h) as usize],
            serializers: HashMap::new(),
            slot_of,
            value_words,
            flits_tab,
        }
    }

    pub fn node_count(&self) -> u32 {
        self.w * self.h
    }

    #[inline]
    pub fn node_xy(&self, n: u32) -> (u32, u32) {
        (n & self.w_mask, n >> self.w_shift)
    }

    pub fn node_of_tile(&self, t: TileId) -> u32 {
        match self.kind {
            FabricKind::Tile => t.0,
            FabricKind::Die => self.grid.die_of(t),
        }
    }

    pub fn msg_flits(&self, noc: usize, channel: u8) -> u32 {
        flits_for(32 * (1 + self.value_words[channel as usize]), self.nocs[noc].width_bits)
    }

    /// Table-driven flit count for a channel slot of one NoC.
    #[inline]
    pub fn slot_flits(&self, noc: usize, slot: usize) -> u32 {
        self.flits_tab[noc][slot]
    }

    /// XY step at node granularity (X fully resolved before Y).
    pub fn next_port(&self, cur: u32, dst: u32) -> Port {
        if cur == dst {
            return Port::Local;
        }
        let (cx, cy) = self.node_xy(cur);
        let (dx, dy) = self.node_xy(dst);
        let step = |c: u32, d: u32, n: u32| -> i32 {
            match self.mode {
                NocTopology::Mesh => {
                    if d > c {
                        1
                    } else {
                        -1
                    }
                }
                NocTopology::FoldedTorus => {
                    let fwd = (d + n - c) % n;
                    if fwd <= n - fwd {
                        1
                    } else {
                        -1
                    }
                }
            }
        };
        if cx != dx {
            if step(cx, dx, self.w) > 0 {
                Port::East
            } else {
                Port::West
            }
        } else if step(cy, dy, self.h) > 0 {
            Port::South
        } else {
            Port::North
        }
    }

    pub fn neighbor_node(&self, n: u32, port: Port) -> Option<u32> {
        let (x, y) = self.node_xy(n);
        let wrap = self.mode == NocTopology::FoldedTorus;
        let (nx, ny) = match port {
            Port::East => {
                if x + 1 < self.w {
                    (x + 1, y)
                } else if wrap && self.w > 1 {
                    (0, y)
                } else {
                    return None;
                }
            }
            Port::West => {
                if x > 0 {
                    (x - 1, y)
                } else if wrap && self.w > 1 {
                    (self.w - 1, y)
                } else {
                    return None;
                }
            }
            Port::South => {
                if y + 1 < self.h {
                    (x, y + 1)
                } else if wrap && self.h > 1 {
                    (x, 0)
                } else {
                    return None;
                }
            }
            Port::North => {
                if y > 0 {
                    (x, y - 1)
                } else if wrap && self.h > 1 {
                    (x, self.h - 1)
                } else {
                    return None;
                }
            }
            Port::Local => return Some(n),
        };
        Some(ny * self.w + nx)
    }

    /// Hop class between adjacent nodes of this fabric.
    pub fn hop_kind(&self, from: u32, to: u32) -> LinkKind {
        match self.kind {
            FabricKind::Tile => self.grid.classify_ids(TileId(from), TileId(to)),
            FabricKind::Die => {
                let per_pkg = self.grid.dies_per_package_side;
                let (ax, ay) = self.node_xy(from);
                let (bx, by) = self.node_xy(to);
                if (ax / per_pkg, ay / per_pkg) == (bx / per_pkg, by / per_pkg) {
                    LinkKind::DieToDie
                } else {
                    LinkKind::OffPackage
                }
            }
        }
    }

    /// Serialization + pipeline cycles of one hop. Intra-die wire latency is
    /// folded into the per-flit hop cycle; die crossings serialize at the
    /// narrower D2D width and add the link latency.
    pub fn hop_cycles(
        &self,
        noc: usize,
        kind: LinkKind,
        msg_bits: u32,
        d2d_latency: u32,
        off_pkg_latency: u32,
    ) -> u32 {
        let n = &self.nocs[noc];
        match kind {
            LinkKind::IntraDie => flits_for(msg_bits, n.width_bits),
            LinkKind::DieToDie => flits_for(msg_bits, n.d2d_width_bits) + d2d_latency,
            LinkKind::OffPackage => flits_for(msg_bits, n.d2d_width_bits) + off_pkg_latency,
        }
    }

    /// Whether moving from `inport` to `outport` enters a new ring (local
    /// injection or a dimension turn). Ring entries require the bubble
    /// margin in torus mode so in-transit traffic can always drain.
    pub fn enters_ring(inport: usize, outport: usize) -> bool {
        if outport == OUT_LOCAL {
            return false;
        }
        if inport == INPORT_INJ {
            return true;
        }
        let out_is_x = outport == Port::East.index() || outport == Port::West.index();
        let in_is_x = inport == Port::East.index() || inport == Port::West.index();
        in_is_x && !out_is_x
    }

    /// Push a message into the injection FIFO of its channel's NoC. Returns
    /// false (backpressure) when the partition cannot hold it; the caller's
    /// OQ keeps the message.
    pub fn inject(&mut self, node: u32, msg: WireMessage) -> bool {
        let (noc, slot) = match self.slot_of[msg.channel as usize] {
            Some(x) => x,
            None => return false,
        };
        let flits = self.slot_flits(noc as usize, slot as usize);
        let router = &mut self.nodes[node as usize].nocs[noc as usize];
        let fifo = &mut router.inp[INPORT_INJ][slot as usize];
        if fifo.free() < flits {
            return false;
        }
        fifo.q.push_back(msg);
        fifo.flits += flits;
        router.occ |= occ_bit(INPORT_INJ, slot as usize);
        self.nodes[node as usize].msgs += 1;
        true
    }

    pub fn is_idle(&self) -> bool {
        self.nodes.iter().all(|n| n.msgs == 0 && n.active_transfers == 0)
    }

    pub fn total_messages(&self) -> u64 {
        self.nodes.iter().map(|n| n.msgs as u64).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flit_math() {
        // Index + 1 payload word = 64 bits.
        assert_eq!(flits_for(64, 32), 2);
        // Index + 3 payload words = 128 bits -> 4 flits on a 32-bit NoC.
        assert_eq!(flits_for(128, 32), 4);
        assert_eq!(flits_for(128, 64), 2);
        assert_eq!(flits_for(32, 64), 1);
    }

    #[test]
    fn ring_entry_detection() {
        let e = Port::East.index();
        let n = Port::North.index();
        assert!(Fabric::enters_ring(INPORT_INJ, e));
        assert!(Fabric::enters_ring(e, n)); // X -> Y turn
        assert!(!Fabric::enters_ring(n, n)); // continuing in Y
        assert!(!Fabric::enters_ring(e, OUT_LOCAL));
    }

    #[test]
    fn injection_backpressure_when_partition_full() {
        let grid = GridGeometry::new(4, 1, 1, 1).unwrap();
        let nocs = vec![NocPhys {
            width_bits: 32,
            d2d_width_bits: 32,
            buffer_flits: 8,
            channels: vec![0],
            rotation: vec![0],
            bubble_flits: 4,
        }];
        let mut f = Fabric::new(FabricKind::Tile, grid, NocTopology::Mesh, nocs, false, vec![1]);
        let msg = WireMessage { channel: 0, dest_index: 9, value: Value(0) };
        // 2 flits each; 4 messages fill the 8-flit partition.
        for _ in 0..4 {
            assert!(f.inject(0, msg));
        }
        assert!(!f.inject(0, msg));
        assert_eq!(f.total_messages(), 4);
    }
}
