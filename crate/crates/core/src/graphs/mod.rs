//! Interprocedural control-flow graph, control-dependence graph and the
//! per-target distance tables used by the fitness functions.

pub mod dom;

use crate::project::{BlockIx, Opcode, Project, ScriptIx, ScriptKind, SeqIx};
use crate::vm::ExecutionTrace;
use dom::UNREACHABLE;
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub type NodeIx = usize;

pub const ENTRY: NodeIx = 0;
pub const EXIT: NodeIx = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Node {
    Entry,
    Exit,
    Block(BlockIx),
    /// artificial "did this event happen?" node in front of a hat
    Event(BlockIx),
    /// shared return point of a custom block
    Return(ScriptIx),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeLabel {
    Flow,
    True,
    False,
    EventOccurs,
    EventAbsent,
}

impl EdgeLabel {
    fn name(self) -> &'static str {
        match self {
            EdgeLabel::Flow => "flow",
            EdgeLabel::True => "true",
            EdgeLabel::False => "false",
            EdgeLabel::EventOccurs => "event-occurs",
            EdgeLabel::EventAbsent => "event-absent",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cfg {
    pub nodes: Vec<Node>,
    pub succ: Vec<Vec<(NodeIx, EdgeLabel)>>,
    pub pred: Vec<Vec<NodeIx>>,
    /// forever headers, which get a virtual exit edge for postdominance only
    pub virtual_exits: Vec<NodeIx>,
    block_node: BTreeMap<BlockIx, NodeIx>,
    event_node: BTreeMap<BlockIx, NodeIx>,
    pub reachable: Vec<bool>,
}

struct CfgBuilder<'a> {
    p: &'a Project,
    cfg: Cfg,
    /// call sites per procedure script: the node following each call
    returns: BTreeMap<ScriptIx, Vec<NodeIx>>,
}

impl<'a> CfgBuilder<'a> {
    fn node(&mut self, n: Node) -> NodeIx {
        let ix = self.cfg.nodes.len();
        self.cfg.nodes.push(n);
        self.cfg.succ.push(vec![]);
        match n {
            Node::Block(b) => {
                self.cfg.block_node.insert(b, ix);
            }
            Node::Event(h) => {
                self.cfg.event_node.insert(h, ix);
            }
            _ => {}
        }
        ix
    }

    fn edge(&mut self, a: NodeIx, b: NodeIx, l: EdgeLabel) {
        if !self.cfg.succ[a].contains(&(b, l)) {
            self.cfg.succ[a].push((b, l));
        }
    }

    /// Allocates nodes for every hat and statement in pre-order so that node
    /// indices follow declaration order.
    fn alloc(&mut self) {
        for s in self.p.scripts_in_order() {
            if let (Some(h), ScriptKind::Event) = (self.p.scripts[s].hat, &self.p.scripts[s].kind) {
                self.node(Node::Event(h));
            }
            for b in self.p.script_preorder(s) {
                if !self.p.blocks[b].opcode.is_expression() {
                    self.node(Node::Block(b));
                }
            }
            if matches!(self.p.scripts[s].kind, ScriptKind::Procedure(_)) {
                self.node(Node::Return(s));
            }
        }
    }

    fn bn(&self, b: BlockIx) -> NodeIx {
        self.cfg.block_node[&b]
    }

    fn return_node(&self, s: ScriptIx) -> NodeIx {
        self.cfg.nodes.iter().position(|n| *n == Node::Return(s)).expect("procedure return node")
    }

    /// Links a sequence so that control continues at `follow` after it;
    /// returns the node control enters the sequence at.
    fn seq(&mut self, sq: SeqIx, follow: NodeIx) -> NodeIx {
        let mut next = follow;
        for &b in self.p.seqs[sq].iter().rev() {
            next = self.stmt(b, next);
        }
        next
    }

    fn stmt(&mut self, b: BlockIx, follow: NodeIx) -> NodeIx {
        let p = self.p;
        let blk = &p.blocks[b];
        let n = self.bn(b);
        use EdgeLabel::*;
        match blk.opcode {
            Opcode::If => {
                let body = self.seq(blk.children[0], follow);
                self.edge(n, body, True);
                self.edge(n, follow, False);
            }
            Opcode::IfElse => {
                let t = self.seq(blk.children[0], follow);
                let f = self.seq(blk.children[1], follow);
                self.edge(n, t, True);
                self.edge(n, f, False);
            }
            Opcode::RepeatTimes => {
                // true = loop finished
                let body = self.seq(blk.children[0], n);
                self.edge(n, body, False);
                self.edge(n, follow, True);
                self.edge(n, EXIT, Flow);
            }
            Opcode::RepeatUntil => {
                let body = self.seq(blk.children[0], n);
                self.edge(n, body, False);
                self.edge(n, follow, True);
            }
            Opcode::Forever => {
                let body = self.seq(blk.children[0], n);
                self.edge(n, body, Flow);
                self.cfg.virtual_exits.push(n);
            }
            Opcode::WaitUntil => {
                self.edge(n, follow, True);
                self.edge(n, EXIT, False);
            }
            op if op.is_time_dependent() => {
                // true = the statement ran to completion
                self.edge(n, follow, True);
                self.edge(n, EXIT, False);
            }
            Opcode::StopAll | Opcode::StopScript | Opcode::DeleteClone => {
                self.edge(n, EXIT, Flow);
            }
            Opcode::CallProcedure => {
                let actor = p.scripts[blk.script].actor;
                let name = blk.lit(0).unwrap_or_default();
                match p.actors[actor].procedures.get(&name) {
                    Some(&ps) => {
                        let hat = p.scripts[ps].hat.expect("procedure has a hat");
                        let h = self.bn(hat);
                        self.edge(n, h, Flow);
                        self.returns.entry(ps).or_default().push(follow);
                    }
                    None => self.edge(n, follow, Flow),
                }
            }
            _ => {
                self.edge(n, follow, Flow);
                for e in self.triggered_events(b) {
                    self.edge(n, e, Flow);
                }
            }
        }
        n
    }

    /// Event nodes of the handlers a statement can trigger.
    fn triggered_events(&self, b: BlockIx) -> Vec<NodeIx> {
        let p = self.p;
        let blk = &p.blocks[b];
        let hats = |op: Opcode, name: Option<String>| -> Vec<BlockIx> {
            p.hats_with(op)
                .filter(|&h| match &name {
                    None => true,
                    Some(n) => p.blocks[h].lit(0).map(|x| x.to_lowercase()) == Some(n.to_lowercase()),
                })
                .collect()
        };
        let handlers: Vec<BlockIx> = match blk.opcode {
            Opcode::Broadcast | Opcode::BroadcastAndWait => hats(Opcode::BroadcastReceived, blk.lit(0)),
            Opcode::SwitchBackdrop => {
                let name = blk.lit(0).filter(|n| p.actors[p.stage].costumes.iter().any(|c| &c.name == n));
                hats(Opcode::BackdropSwitched, name)
            }
            Opcode::NextBackdrop => hats(Opcode::BackdropSwitched, None),
            Opcode::CreateClone => {
                let t = blk.lit(0).unwrap_or_default();
                let actor = if t == crate::project::MYSELF { Some(p.actor_of_block(b)) } else { p.actor_ix(&t) };
                hats(Opcode::StartAsClone, None)
                    .into_iter()
                    .filter(|&h| Some(p.actor_of_block(h)) == actor)
                    .collect()
            }
            _ => vec![],
        };
        handlers.iter().map(|h| self.cfg.event_node[h]).collect()
    }

    fn build(mut self) -> Cfg {
        self.alloc();
        self.edge(ENTRY, EXIT, EdgeLabel::Flow);
        for s in self.p.scripts_in_order() {
            let script = &self.p.scripts[s];
            let end = match script.kind {
                ScriptKind::Event => EXIT,
                ScriptKind::Procedure(_) => self.return_node(s),
            };
            let first = self.seq(script.body, end);
            if let Some(h) = script.hat {
                let hn = self.bn(h);
                self.edge(hn, first, EdgeLabel::Flow);
                if script.kind == ScriptKind::Event {
                    let e = self.cfg.event_node[&h];
                    self.edge(e, hn, EdgeLabel::EventOccurs);
                    self.edge(e, EXIT, EdgeLabel::EventAbsent);
                    if self.p.blocks[h].opcode.is_user_input_hat() {
                        self.edge(ENTRY, e, EdgeLabel::Flow);
                    }
                }
            }
        }
        let returns = std::mem::take(&mut self.returns);
        for (ix, n) in self.cfg.nodes.clone().into_iter().enumerate() {
            if let Node::Return(s) = n {
                match returns.get(&s) {
                    Some(fs) => {
                        for &f in fs {
                            self.edge(ix, f, EdgeLabel::Flow);
                        }
                    }
                    None => self.edge(ix, EXIT, EdgeLabel::Flow),
                }
            }
        }
        let mut cfg = self.cfg;
        let n = cfg.nodes.len();
        cfg.pred = vec![vec![]; n];
        for (a, ss) in cfg.succ.iter().enumerate() {
            for &(b, _) in ss {
                if !cfg.pred[b].contains(&a) {
                    cfg.pred[b].push(a);
                }
            }
        }
        let from_entry = dom::reverse_bfs(&cfg.successor_lists(false), ENTRY);
        cfg.reachable = from_entry.iter().map(|&d| d != UNREACHABLE).collect();
        cfg
    }
}

impl Cfg {
    pub fn build(p: &Project) -> Cfg {
        let cfg = Cfg {
            nodes: vec![Node::Entry, Node::Exit],
            succ: vec![vec![], vec![]],
            pred: vec![],
            virtual_exits: vec![],
            block_node: BTreeMap::new(),
            event_node: BTreeMap::new(),
            reachable: vec![],
        };
        CfgBuilder { p, cfg, returns: BTreeMap::new() }.build()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn block_node(&self, b: BlockIx) -> Option<NodeIx> {
        self.block_node.get(&b).copied()
    }

    pub fn event_node(&self, hat: BlockIx) -> Option<NodeIx> {
        self.event_node.get(&hat).copied()
    }

    /// Plain successor lists, optionally with the virtual forever exits.
    pub fn successor_lists(&self, with_virtual: bool) -> Vec<Vec<NodeIx>> {
        let mut s: Vec<Vec<NodeIx>> = self
            .succ
            .iter()
            .map(|ss| {
                let mut v: Vec<NodeIx> = vec![];
                for &(b, _) in ss {
                    if !v.contains(&b) {
                        v.push(b);
                    }
                }
                v
            })
            .collect();
        if with_virtual {
            for &f in &self.virtual_exits {
                if !s[f].contains(&EXIT) {
                    s[f].push(EXIT);
                }
            }
        }
        s
    }

    pub fn label(&self, a: NodeIx, b: NodeIx) -> EdgeLabel {
        self.succ[a].iter().find(|(x, _)| *x == b).map(|(_, l)| *l).unwrap_or(EdgeLabel::Flow)
    }

    /// Nodes the trace reached. Entry is always covered; an event node counts
    /// as reached when it hangs off entry or off a reached node.
    pub fn covered_nodes(&self, trace: &ExecutionTrace) -> Vec<bool> {
        let mut cov: Vec<bool> = self
            .nodes
            .iter()
            .map(|n| match n {
                Node::Entry => true,
                Node::Block(b) => trace.is_covered(*b),
                _ => false,
            })
            .collect();
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Event(_) => cov[i] = self.pred[i].iter().any(|&p| cov[p]),
                Node::Return(_) => cov[i] = self.pred[i].iter().any(|&p| cov[p]),
                _ => {}
            }
        }
        cov
    }

    pub fn describe(&self, p: &Project, n: NodeIx) -> String {
        match self.nodes[n] {
            Node::Entry => "entry".into(),
            Node::Exit => "exit".into(),
            Node::Block(b) => format!("{} [{}]", p.blocks[b].id, p.blocks[b].opcode.name()),
            Node::Event(h) => event_label(p, h),
            Node::Return(s) => match &p.scripts[s].kind {
                ScriptKind::Procedure(name) => format!("return {name}"),
                ScriptKind::Event => "return".into(),
            },
        }
    }

    pub fn edge_list(&self, p: &Project) -> String {
        let mut out = String::new();
        for (a, ss) in self.succ.iter().enumerate() {
            for &(b, l) in ss {
                let _ = writeln!(out, "{} -> {} ({})", self.describe(p, a), self.describe(p, b), l.name());
            }
        }
        out
    }

    pub fn to_dot(&self, p: &Project) -> String {
        let mut out = String::from("digraph cfg {\n");
        for n in 0..self.len() {
            let _ = writeln!(out, "  n{n} [label={:?}];", self.describe(p, n));
        }
        for (a, ss) in self.succ.iter().enumerate() {
            for &(b, l) in ss {
                let _ = writeln!(out, "  n{a} -> n{b} [label={:?}];", l.name());
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Name of an artificial event node, e.g. `clicked Cat?`.
pub fn event_label(p: &Project, hat: BlockIx) -> String {
    let blk = &p.blocks[hat];
    let actor = &p.actors[p.actor_of_block(hat)].name;
    let arg = blk.lit(0).unwrap_or_default();
    match blk.opcode {
        Opcode::Greenflag => "greenflag?".into(),
        Opcode::KeyPressed => format!("key {arg}?"),
        Opcode::SpriteClicked => format!("clicked {actor}?"),
        Opcode::StageClicked => "clicked stage?".into(),
        Opcode::BroadcastReceived => "broadcast?".into(),
        Opcode::StartAsClone => format!("clone of {actor}?"),
        Opcode::BackdropSwitched => format!("backdrop {arg}?"),
        Opcode::LoudnessGreaterThan => "loud?".into(),
        _ => format!("{}?", blk.opcode.name()),
    }
}

/// One control dependence: `dependent` runs only if `controller` takes the
/// edge labelled `label`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Dependence {
    pub controller: NodeIx,
    pub label: EdgeLabel,
    pub dependent: NodeIx,
}

#[derive(Debug, Clone)]
pub struct Cdg {
    pub edges: Vec<Dependence>,
    /// per node, the dependences it is controlled by
    pub controllers: Vec<Vec<Dependence>>,
    /// per node, the dependences it controls
    pub controls: Vec<Vec<Dependence>>,
}

impl Cdg {
    pub fn build(cfg: &Cfg) -> Cdg {
        let succ = cfg.successor_lists(true);
        let n = cfg.len();
        let mut edges: Vec<Dependence> = dom::control_dependences(&succ, EXIT)
            .into_iter()
            .map(|(a, ei, m)| Dependence { controller: a, label: cfg.label(a, succ[a][ei]), dependent: m })
            .collect();
        edges.sort();
        edges.dedup();
        let mut controllers = vec![vec![]; n];
        let mut controls = vec![vec![]; n];
        for &d in &edges {
            controllers[d.dependent].push(d);
            controls[d.controller].push(d);
        }
        Cdg { edges, controllers, controls }
    }

    pub fn edge_list(&self, cfg: &Cfg, p: &Project) -> String {
        let mut out = String::new();
        for d in &self.edges {
            let _ = writeln!(
                out,
                "{} -> {} ({})",
                cfg.describe(p, d.controller),
                cfg.describe(p, d.dependent),
                d.label.name()
            );
        }
        out
    }

    pub fn to_dot(&self, cfg: &Cfg, p: &Project) -> String {
        let mut out = String::from("digraph cdg {\n");
        for n in 0..cfg.len() {
            let _ = writeln!(out, "  n{n} [label={:?}];", cfg.describe(p, n));
        }
        for d in &self.edges {
            let _ = writeln!(out, "  n{} -> n{} [label={:?}];", d.controller, d.dependent, d.label.name());
        }
        out.push_str("}\n");
        out
    }
}

/// CFG, CDG and, per target node, the CDG hop distance from every node.
#[derive(Debug, Clone)]
pub struct Graphs {
    pub cfg: Cfg,
    pub cdg: Cdg,
    /// `distances[t][n]`: hops from n to t along control dependences
    pub distances: Vec<Vec<u32>>,
    pub max_approach_level: u32,
}

impl Graphs {
    pub fn build(p: &Project) -> Graphs {
        let cfg = Cfg::build(p);
        let cdg = Cdg::build(&cfg);
        let dep_pred: Vec<Vec<NodeIx>> = cdg
            .controllers
            .iter()
            .map(|cs| {
                let mut v: Vec<NodeIx> = cs.iter().map(|d| d.controller).collect();
                v.dedup();
                v
            })
            .collect();
        let distances: Vec<Vec<u32>> = (0..cfg.len()).map(|t| dom::reverse_bfs(&dep_pred, t)).collect();
        let max_approach_level = distances
            .iter()
            .flat_map(|d| d.iter().copied())
            .filter(|&d| d != UNREACHABLE)
            .max()
            .unwrap_or(0);
        Graphs { cfg, cdg, distances, max_approach_level }
    }

    /// Number of unsatisfied control dependences between the closest
    /// covered node and the target; `None` when no covered node leads there.
    pub fn approach_level(&self, covered: &[bool], target: NodeIx) -> Option<u32> {
        if covered[target] {
            return Some(0);
        }
        self.distances[target]
            .iter()
            .enumerate()
            .filter(|&(n, &d)| covered[n] && d != UNREACHABLE)
            .map(|(_, &d)| d.saturating_sub(1))
            .min()
    }

    /// Backwards BFS depth from the target to the first covered node.
    pub fn control_flow_distance(&self, covered: &[bool], target: NodeIx) -> Option<u32> {
        dom::first_covered_depth(&self.cfg.pred, covered, target)
    }
}
