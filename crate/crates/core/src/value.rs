//! Data-element representation and the commutative/associative merge
//! operators that proxy caches and owner updates rely on.
//!
//! Elements travel the NoC as 32-bit words, so every element is stored as a
//! raw `u64` with a per-workload interpretation. Fixed-point (Q32) is the
//! default accumulation mode for rank/sum workloads so merge order cannot
//! change results; float mode exists behind a tolerance.

use crate::error::{Error, Result};

pub const FIXED_POINT_BITS: u32 = 32;
pub const FIXED_ONE: i64 = 1i64 << FIXED_POINT_BITS;

/// Raw element bits; interpretation is given by [`ValueKind`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Value(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    U32,
    U64,
    FixedQ32,
    F64,
}

impl ValueKind {
    /// Payload words one element occupies in a task message.
    pub fn wire_words(self) -> u32 {
        match self {
            ValueKind::U32 => 1,
            _ => 2,
        }
    }

    /// Logical storage width, used for SRAM footprint and access energy.
    pub fn bytes(self) -> u64 {
        match self {
            ValueKind::U32 => 4,
            _ => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeOp {
    Min,
    Add,
}

impl MergeOp {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(MergeOp::Min),
            "add" => Ok(MergeOp::Add),
            other => Err(Error::config(format!(
                "unknown merge op `{other}` (expected min|add; must be commutative and associative)"
            ))),
        }
    }
    pub fn name(self) -> &'static str {
        match self {
            MergeOp::Min => "min",
            MergeOp::Add => "add",
        }
    }
}

/// Identity of the merge op: a P$ miss returns this value.
pub fn identity(op: MergeOp, kind: ValueKind) -> Value {
    match op {
        MergeOp::Min => match kind {
            ValueKind::U32 => Value(u32::MAX as u64),
            ValueKind::U64 => Value(u64::MAX),
            ValueKind::FixedQ32 => Value(i64::MAX as u64),
            ValueKind::F64 => Value(f64::INFINITY.to_bits()),
        },
        MergeOp::Add => match kind {
            ValueKind::F64 => Value(0f64.to_bits()),
            _ => Value(0),
        },
    }
}

pub fn merge(op: MergeOp, kind: ValueKind, a: Value, b: Value) -> Value {
    match (op, kind) {
        (MergeOp::Min, ValueKind::F64) => {
            let (x, y) = (f64::from_bits(a.0), f64::from_bits(b.0));
            if y < x {
                b
            } else {
                a
            }
        }
        (MergeOp::Min, ValueKind::FixedQ32) => {
            if (b.0 as i64) < (a.0 as i64) {
                b
            } else {
                a
            }
        }
        (MergeOp::Min, _) => Value(a.0.min(b.0)),
        (MergeOp::Add, ValueKind::F64) => {
            Value((f64::from_bits(a.0) + f64::from_bits(b.0)).to_bits())
        }
        (MergeOp::Add, ValueKind::FixedQ32) => Value((a.0 as i64).wrapping_add(b.0 as i64) as u64),
        (MergeOp::Add, _) => Value(a.0.wrapping_add(b.0)),
    }
}

/// Q32 fixed-point product, rounding toward zero.
pub fn fixed_mul(a: i64, b: i64) -> i64 {
    ((a as i128 * b as i128) >> FIXED_POINT_BITS) as i64
}

pub fn fixed_from_f64(x: f64) -> i64 {
    (x * FIXED_ONE as f64) as i64
}

pub fn fixed_to_f64(x: i64) -> f64 {
    x as f64 / FIXED_ONE as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_are_neutral() {
        for &kind in &[ValueKind::U32, ValueKind::U64, ValueKind::FixedQ32] {
            for &op in &[MergeOp::Min, MergeOp::Add] {
                let id = identity(op, kind);
                let v = Value(12345);
                assert_eq!(merge(op, kind, id, v), v);
                assert_eq!(merge(op, kind, v, id), v);
            }
        }
        let id = identity(MergeOp::Add, ValueKind::F64);
        let v = Value(2.5f64.to_bits());
        assert_eq!(merge(MergeOp::Add, ValueKind::F64, id, v), v);
    }

    #[test]
    fn min_and_add_basics() {
        assert_eq!(
            merge(MergeOp::Min, ValueKind::U32, Value(7), Value(5)),
            Value(5)
        );
        assert_eq!(
            merge(MergeOp::Add, ValueKind::U64, Value(3), Value(4)),
            Value(7)
        );
    }

    #[test]
    fn fixed_point_round_trip() {
        let x = fixed_from_f64(0.85);
        assert!((fixed_to_f64(x) - 0.85).abs() < 1e-9);
        let y = fixed_mul(x, fixed_from_f64(2.0));
        assert!((fixed_to_f64(y) - 1.7).abs() < 1e-8);
    }
}
