//! Per-tile execution state: input/output queues per task type, the task
//! scheduling unit's occupancy-driven policy, and the abstract-instruction
//! plans that handlers compile to.
//!
//! A handler runs against a four-call tile API (read_local, write_local,
//! proxy_merge, emit); each call costs one cycle plus any memory stalls.
//! Per-edge expand tasks process one edge per dequeue-step and re-enter the
//! IQ head with a cursor, so worst-case fan-out per dispatch stays one
//! message.

use std::collections::VecDeque;

use crate::config::PrefetchMode;
use crate::noc::WireMessage;
use crate::proxy::ProxyConfig;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// Frontier/source seeding (fed by the loader, not by a channel).
    Source,
    /// Edge-expand / scatter; one message per edge via a cursor.
    Expand,
    /// Owner-side update/reduce.
    Update,
    /// Proxy-side update/reduce into the P$.
    UpdateProxy,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Source => "source",
            TaskKind::Expand => "expand",
            TaskKind::Update => "update",
            TaskKind::UpdateProxy => "update_proxy",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TaskDescriptor {
    pub kind: TaskKind,
    pub name: String,
    pub iq_size: u32,
    pub oq_size: u32,
    /// Channel delivering this task's invocations (None: local pushes only).
    pub input_channel: Option<u8>,
    /// OQ slots one dispatch may need; gated before the task runs.
    pub worst_case_emissions: u32,
    pub proxy: Option<ProxyConfig>,
    pub prefetch: PrefetchMode,
    /// Arrays prefetched on dequeue (primary and optional second array).
    pub prefetch_arrays: Vec<usize>,
}

/// One queued task invocation: the routed index plus an optional payload
/// element; expand tasks carry their edge cursor here while re-entering.
#[derive(Debug, Clone, Copy)]
pub struct Invocation {
    pub index: u32,
    pub value: Value,
    pub cursor: u32,
    /// Edge range cached by the first expand step.
    pub edge_base: u64,
    pub edge_end: u64,
    pub started: bool,
}

impl Invocation {
    pub fn new(index: u32, value: Value) -> Self {
        Invocation { index, value, cursor: 0, edge_base: 0, edge_end: 0, started: false }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TaskQueues {
    pub iq: VecDeque<Invocation>,
    pub iq_cap: u32,
    /// IQ slots promised to in-flight ejections/absorptions.
    pub iq_reserved: u32,
    pub oq: VecDeque<WireMessage>,
    pub oq_cap: u32,
    /// OQ slots promised to the running dispatch (worst-case emissions).
    pub oq_reserved: u32,
}

impl TaskQueues {
    pub fn iq_free(&self) -> u32 {
        self.iq_cap - self.iq.len() as u32 - self.iq_reserved
    }
    pub fn oq_free(&self) -> u32 {
        self.oq_cap - self.oq.len() as u32 - self.oq_reserved
    }
    pub fn iq_occupancy(&self) -> u32 {
        self.iq.len() as u32 + self.iq_reserved
    }
    pub fn oq_occupancy(&self) -> u32 {
        self.oq.len() as u32 + self.oq_reserved
    }
}

/// One abstract instruction of a compiled handler. Each op takes one cycle;
/// reads and writes may add memory stalls.
#[derive(Debug, Clone, Copy)]
pub enum PlanOp {
    Compute,
    Read { array: u8, index: u64 },
    Write { array: u8, index: u64, value: Value },
    ProxyMerge { index: u32, value: Value },
    Emit { channel: u8, index: u32, value: Value },
}

pub const PLAN_MAX_OPS: usize = 4;

/// Compiled form of one dispatch (for expand tasks, one edge step). Inline
/// storage: dispatches happen millions of times per run.
#[derive(Debug, Clone, Copy)]
pub struct Plan {
    ops: [PlanOp; PLAN_MAX_OPS],
    len: u8,
    /// Invocation stays at the IQ head with an advanced cursor.
    pub reenter: bool,
}

impl Default for Plan {
    fn default() -> Self {
        Plan { ops: [PlanOp::Compute; PLAN_MAX_OPS], len: 0, reenter: false }
    }
}

impl Plan {
    pub fn push(&mut self, op: PlanOp) {
        assert!((self.len as usize) < PLAN_MAX_OPS, "handler plan overflow");
        self.ops[self.len as usize] = op;
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn op(&self, i: usize) -> PlanOp {
        debug_assert!(i < self.len as usize);
        self.ops[i]
    }

    pub fn ops(&self) -> &[PlanOp] {
        &self.ops[..self.len as usize]
    }
}

/// Occupancy-driven task selection: among task types with a non-empty IQ
/// and OQ room for the head dispatch's emissions, pick the one maximizing
/// iq_fraction - oq_fraction. The comparison is exact (integer
/// cross-multiplication); ties break by rotating priority.
///
/// `needed_oq` returns the OQ slots the head invocation requires; merge
/// tasks whose update would be filtered need none, so owner/proxy merging
/// never serializes behind write-back congestion.
pub fn tsu_select(
    queues: &[TaskQueues],
    descs: &[TaskDescriptor],
    rotate: usize,
    mut needed_oq: impl FnMut(usize, &Invocation) -> u32,
) -> Option<(usize, u32)> {
    let n = descs.len();
    let mut best: Option<(usize, u32, i128, i128)> = None; // (task, oq need, num, den)
    for off in 0..n {
        let t = (rotate + off) % n;
        let q = &queues[t];
        let Some(head) = q.iq.front() else { continue };
        let need = needed_oq(t, head);
        if q.oq_free() < need {
            continue;
        }
        // score = iq_occ/iq_cap - oq_occ/oq_cap as an exact rational.
        let num = q.iq_occupancy() as i128 * q.oq_cap as i128
            - q.oq_occupancy() as i128 * q.iq_cap as i128;
        let den = q.iq_cap as i128 * q.oq_cap as i128;
        let better = match best {
            None => true,
            Some((_, _, bn, bd)) => num * bd > bn * den,
        };
        if better {
            best = Some((t, need, num, den));
        }
    }
    best.map(|(t, need, _, _)| (t, need))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(name: &str, worst: u32) -> TaskDescriptor {
        TaskDescriptor {
            kind: TaskKind::Update,
            name: name.to_string(),
            iq_size: 16,
            oq_size: 4,
            input_channel: None,
            worst_case_emissions: worst,
            proxy: None,
            prefetch: PrefetchMode::Off,
            prefetch_arrays: Vec::new(),
        }
    }

    fn queues(iq_cap: u32, iq_len: u32, oq_cap: u32, oq_len: u32) -> TaskQueues {
        let mut q = TaskQueues { iq_cap, oq_cap, ..Default::default() };
        for i in 0..iq_len {
            q.iq.push_back(Invocation::new(i, Value(0)));
        }
        for _ in 0..oq_len {
            q.oq.push_back(WireMessage { channel: 0, dest_index: 0, value: Value(0) });
        }
        q
    }

    fn pick(qs: &[TaskQueues], ds: &[TaskDescriptor], rotate: usize) -> Option<usize> {
        tsu_select(qs, ds, rotate, |t, _| ds[t].worst_case_emissions).map(|(t, _)| t)
    }

    #[test]
    fn prefers_fuller_iq_with_empty_oqs() {
        // iq fractions {t0: 0.9, t1: 0.1}, both OQs empty -> t0.
        let qs = vec![queues(10, 9, 4, 0), queues(10, 1, 4, 0)];
        let ds = vec![desc("t2", 1), desc("t3", 1)];
        assert_eq!(pick(&qs, &ds, 0), Some(0));
        assert_eq!(pick(&qs, &ds, 1), Some(0)); // rotation can't override a strict max
    }

    #[test]
    fn full_oq_gates_out_the_only_candidate() {
        // Only t1 has IQ entries but its OQ is full: backpressure sensed,
        // the PU stays idle.
        let qs = vec![queues(10, 0, 4, 0), queues(10, 5, 4, 4)];
        let ds = vec![desc("t2", 1), desc("t3", 1)];
        assert_eq!(pick(&qs, &ds, 0), None);
    }

    #[test]
    fn filtered_merges_bypass_a_full_oq() {
        // Same shape, but the gate knows the head dispatch emits nothing.
        let qs = vec![queues(10, 0, 4, 0), queues(10, 5, 4, 4)];
        let ds = vec![desc("t2", 1), desc("t3", 1)];
        assert_eq!(tsu_select(&qs, &ds, 0, |_, _| 0), Some((1, 0)));
    }

    #[test]
    fn all_empty_is_idle() {
        let qs = vec![queues(10, 0, 4, 0), queues(10, 0, 4, 0)];
        let ds = vec![desc("t2", 1), desc("t3", 1)];
        assert_eq!(pick(&qs, &ds, 0), None);
    }

    #[test]
    fn ties_rotate() {
        let qs = vec![queues(10, 5, 4, 0), queues(10, 5, 4, 0)];
        let ds = vec![desc("a", 1), desc("b", 1)];
        assert_eq!(pick(&qs, &ds, 0), Some(0));
        assert_eq!(pick(&qs, &ds, 1), Some(1));
    }

    #[test]
    fn oq_pressure_lowers_score() {
        // Same IQ fill, but t0's OQ is half full: t1 wins.
        let qs = vec![queues(10, 5, 4, 2), queues(10, 5, 4, 0)];
        let ds = vec![desc("a", 1), desc("b", 1)];
        assert_eq!(pick(&qs, &ds, 0), Some(1));
    }
}
