use crate::project::BlockIx;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Minimum observed distances toward the true and false outcome of a
/// branching node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchDist {
    pub t: f64,
    pub f: f64,
}

/// What a test execution observed: covered blocks and, per branching or
/// time-dependent node, the best distances seen. Loop headers record the
/// remaining iterations as their true (exit) distance, timed statements the
/// remaining steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub covered: BTreeSet<BlockIx>,
    pub dists: BTreeMap<BlockIx, BranchDist>,
}

impl ExecutionTrace {
    pub fn record(&mut self, block: BlockIx, t: f64, f: f64) {
        debug_assert!(t >= 0.0 && f >= 0.0);
        self.dists
            .entry(block)
            .and_modify(|d| {
                d.t = d.t.min(t);
                d.f = d.f.min(f);
            })
            .or_insert(BranchDist { t, f });
    }

    pub fn cover(&mut self, block: BlockIx) {
        self.covered.insert(block);
    }

    pub fn is_covered(&self, block: BlockIx) -> bool {
        self.covered.contains(&block)
    }

    pub fn dist(&self, block: BlockIx) -> Option<BranchDist> {
        self.dists.get(&block).copied()
    }
}
