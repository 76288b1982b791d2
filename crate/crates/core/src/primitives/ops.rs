//! Per-thread operation counters.
//!
//! Every keyed-hash/hash invocation and every curve operation performed by
//! the primitives bumps a counter here. Protocol code never touches these
//! directly; callers wrap a computation in [`measure`] to see its cost.

use std::cell::Cell;
use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    /// Hash, keyed-hash and PRF evaluations.
    pub hash: u64,
    /// Scalar (modular) multiplications.
    pub mmul: u64,
    /// Curve point multiplications.
    pub emul: u64,
    /// Curve point additions.
    pub eadd: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Hash,
    MMul,
    EMul,
    EAdd,
}

thread_local! {
    static COUNTS: Cell<OpCounts> = const { Cell::new(OpCounts { hash: 0, mmul: 0, emul: 0, eadd: 0 }) };
}

pub fn record(op: Op) {
    record_n(op, 1);
}

pub fn record_n(op: Op, n: u64) {
    COUNTS.with(|c| {
        let mut v = c.get();
        match op {
            Op::Hash => v.hash += n,
            Op::MMul => v.mmul += n,
            Op::EMul => v.emul += n,
            Op::EAdd => v.eadd += n,
        }
        c.set(v);
    });
}

pub fn snapshot() -> OpCounts {
    COUNTS.with(|c| c.get())
}

/// Runs `f` and returns its result together with the operations it performed
/// on this thread.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, OpCounts) {
    let before = snapshot();
    let out = f();
    let after = snapshot();
    (out, after - before)
}

impl std::ops::Sub for OpCounts {
    type Output = OpCounts;

    fn sub(self, rhs: OpCounts) -> OpCounts {
        OpCounts {
            hash: self.hash - rhs.hash,
            mmul: self.mmul - rhs.mmul,
            emul: self.emul - rhs.emul,
            eadd: self.eadd - rhs.eadd,
        }
    }
}

impl Add for OpCounts {
    type Output = OpCounts;

    fn add(self, rhs: OpCounts) -> OpCounts {
        OpCounts {
            hash: self.hash + rhs.hash,
            mmul: self.mmul + rhs.mmul,
            emul: self.emul + rhs.emul,
            eadd: self.eadd + rhs.eadd,
        }
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, rhs: OpCounts) {
        *self = *self + rhs;
    }
}

impl OpCounts {
    /// Cost summary in the style of the usual comparison tables: cheap
    /// operations are dropped whenever a point multiplication is present.
    pub fn dominant(&self) -> String {
        if self.emul > 0 {
            return term(self.emul, "eMul");
        }
        let mut parts = Vec::new();
        if self.hash > 0 {
            parts.push(term(self.hash, "H"));
        }
        if self.eadd > 0 {
            parts.push(term(self.eadd, "eAdd"));
        }
        if self.mmul > 0 {
            parts.push(term(self.mmul, "mMul"));
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

fn term(n: u64, name: &str) -> String {
    if n == 1 {
        name.to_string()
    } else {
        format!("{n}{name}")
    }
}

impl fmt::Display for OpCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "H={} mMul={} eMul={} eAdd={}",
            self.hash, self.mmul, self.emul, self.eadd
        )
    }
}
