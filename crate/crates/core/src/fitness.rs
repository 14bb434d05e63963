//! Per-block fitness: approach level, normalised branch distance and
//! normalised control-flow distance. Zero means covered.

use crate::graphs::{EdgeLabel, Graphs, Node, NodeIx};
use crate::project::{BlockIx, Project};
use crate::vm::ExecutionTrace;

/// x / (1 + x), mapping [0, inf) onto [0, 1).
pub fn alpha(x: f64) -> f64 {
    if x.is_infinite() {
        1.0
    } else {
        x / (1.0 + x)
    }
}

/// A block that a test suite should reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Goal {
    pub block: BlockIx,
    pub node: NodeIx,
}

/// Coverable blocks with their CFG nodes, in block pre-order.
pub fn goals(p: &Project, g: &Graphs) -> Vec<Goal> {
    p.coverable_blocks()
        .into_iter()
        .filter_map(|b| g.cfg.block_node(b).map(|node| Goal { block: b, node }))
        .collect()
}

/// The parts of a fitness value, kept for reporting and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakdown {
    pub approach_level: Option<u32>,
    pub branch: f64,
    pub flow: f64,
    pub value: f64,
}

/// Fitness of every goal against one trace. Covered-node computation is
/// shared across goals.
pub struct Evaluator<'a> {
    graphs: &'a Graphs,
    trace: &'a ExecutionTrace,
    covered: Vec<bool>,
}

impl<'a> Evaluator<'a> {
    pub fn new(graphs: &'a Graphs, trace: &'a ExecutionTrace) -> Self {
        let covered = graphs.cfg.covered_nodes(trace);
        Evaluator { graphs, trace, covered }
    }

    pub fn covered(&self) -> &[bool] {
        &self.covered
    }

    /// Value assigned when no covered node leads to the target; larger than
    /// any reachable value.
    pub fn unreachable_value(&self) -> f64 {
        2.0 * self.graphs.max_approach_level as f64 + 2.0
    }

    pub fn fitness(&self, target: NodeIx) -> f64 {
        self.breakdown(target).value
    }

    pub fn breakdown(&self, target: NodeIx) -> Breakdown {
        if self.covered[target] {
            return Breakdown { approach_level: Some(0), branch: 0.0, flow: 0.0, value: 0.0 };
        }
        let Some(al) = self.graphs.approach_level(&self.covered, target) else {
            let v = self.unreachable_value();
            return Breakdown { approach_level: None, branch: 1.0, flow: 1.0, value: v };
        };
        let dist = &self.graphs.distances[target];
        let want = al + 1;
        let controller = (0..self.covered.len())
            .find(|&n| self.covered[n] && dist[n] == want)
            .expect("approach level implies a controller");
        // dependences of the controller that lead one hop closer
        let next: Vec<_> = self.graphs.cdg.controls[controller]
            .iter()
            .filter(|d| dist[d.dependent] == want - 1)
            .collect();
        let branch = next
            .iter()
            .map(|d| self.branch_distance(controller, d.label))
            .fold(f64::INFINITY, f64::min);
        let branch = if branch.is_finite() { alpha(branch) } else { 1.0 };
        let flow = if branch > 0.0 {
            1.0
        } else {
            next.iter()
                .filter_map(|d| self.graphs.control_flow_distance(&self.covered, d.dependent))
                .min()
                .map_or(1.0, |c| alpha(c as f64))
        };
        Breakdown { approach_level: Some(al), branch, flow, value: 2.0 * al as f64 + branch + flow }
    }

    /// Raw distance to taking the `label` outcome at a covered node;
    /// infinite when nothing was recorded.
    fn branch_distance(&self, node: NodeIx, label: EdgeLabel) -> f64 {
        match (self.graphs.cfg.nodes[node], label) {
            (Node::Event(hat), _) => {
                if self.trace.is_covered(hat) {
                    0.0
                } else {
                    1.0
                }
            }
            (Node::Block(b), EdgeLabel::True) => self.trace.dist(b).map_or(f64::INFINITY, |d| d.t),
            (Node::Block(b), EdgeLabel::False) => self.trace.dist(b).map_or(f64::INFINITY, |d| d.f),
            _ => 0.0,
        }
    }
}

/// Fitness of each goal, in goal order.
pub fn evaluate(g: &Graphs, goals: &[Goal], trace: &ExecutionTrace) -> Vec<f64> {
    let ev = Evaluator::new(g, trace);
    goals.iter().map(|goal| ev.fitness(goal.node)).collect()
}
