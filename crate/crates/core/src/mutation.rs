//! First-order mutants and mutation scores of generated suites.

use crate::postprocess;
use crate::project::{ArgDoc, BlockDoc, Opcode, Project, ProjectDoc, ScriptDoc, Slot};
use crate::suite::Suite;
use crate::vm::{normalize_key, VmConfig};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Seed for replacement choices when none is given. Kept apart from test
/// seeds so mutant sets stay the same across analysis reruns.
pub const DEFAULT_MUTANT_SEED: u64 = 0x6d75_7461_6e74;

pub const DEFAULT_MAX_STEPS: u64 = 200_000;

const EXTRA_KEYS: [&str; 5] = ["space", "up", "down", "left", "right"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Operator {
    /// key replacement
    KRM,
    /// statement deletion
    SBD,
    /// script (hat) deletion
    SDM,
    /// arithmetic operator replacement
    AOR,
    /// logical operator replacement
    LOR,
    /// relational operator replacement
    ROR,
    /// negate a condition
    NCM,
    /// variable replacement
    VRM,
}

impl Operator {
    pub const ALL: [Operator; 8] = [
        Operator::KRM,
        Operator::SBD,
        Operator::SDM,
        Operator::AOR,
        Operator::LOR,
        Operator::ROR,
        Operator::NCM,
        Operator::VRM,
    ];
}

impl std::fmt::Display for Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone)]
pub struct Mutant {
    pub id: String,
    pub operator: Operator,
    /// id of the changed block
    pub locus: String,
    pub description: String,
    pub project: Project,
}

fn visit<'a>(b: &'a BlockDoc, f: &mut impl FnMut(&'a BlockDoc)) {
    f(b);
    for a in &b.args {
        if let ArgDoc::Block(x) = a {
            visit(x, f);
        }
    }
    for seq in &b.children {
        for c in seq {
            visit(c, f);
        }
    }
}

fn scripts(doc: &ProjectDoc) -> impl Iterator<Item = (usize, &ScriptDoc)> {
    doc.actors
        .iter()
        .enumerate()
        .flat_map(|(i, a)| a.scripts.iter().chain(&a.custom_blocks).map(move |s| (i, s)))
}

/// Every block with the index of its actor, hats first within a script.
fn all_blocks(doc: &ProjectDoc) -> Vec<(usize, &BlockDoc)> {
    let mut out = vec![];
    for (a, s) in scripts(doc) {
        for b in s.hat.iter().chain(&s.body) {
            visit(b, &mut |x| out.push((a, x)));
        }
    }
    out
}

fn visit_mut(b: &mut BlockDoc, f: &mut impl FnMut(&mut BlockDoc) -> bool) -> bool {
    if f(b) {
        return true;
    }
    for a in &mut b.args {
        if let ArgDoc::Block(x) = a {
            if visit_mut(x, f) {
                return true;
            }
        }
    }
    b.children.iter_mut().flatten().any(|c| visit_mut(c, f))
}

fn each_block_mut(doc: &mut ProjectDoc, mut f: impl FnMut(&mut BlockDoc) -> bool) -> bool {
    for a in &mut doc.actors {
        for s in a.scripts.iter_mut().chain(a.custom_blocks.iter_mut()) {
            for b in s.hat.iter_mut().chain(s.body.iter_mut()) {
                if visit_mut(b, &mut f) {
                    return true;
                }
            }
        }
    }
    false
}

fn edit(doc: &mut ProjectDoc, id: &str, f: impl FnOnce(&mut BlockDoc)) -> bool {
    let mut f = Some(f);
    each_block_mut(doc, |b| {
        if b.id == id {
            (f.take().expect("edited once"))(b);
            true
        } else {
            false
        }
    })
}

fn remove_from(seq: &mut Vec<BlockDoc>, id: &str) -> bool {
    if let Some(i) = seq.iter().position(|b| b.id == id) {
        seq.remove(i);
        return true;
    }
    false
}

fn remove_statement(doc: &mut ProjectDoc, id: &str) -> bool {
    for a in &mut doc.actors {
        for s in a.scripts.iter_mut().chain(a.custom_blocks.iter_mut()) {
            if remove_from(&mut s.body, id) {
                return true;
            }
        }
    }
    each_block_mut(doc, |b| b.children.iter_mut().any(|seq| remove_from(seq, id)))
}

fn remove_hat(doc: &mut ProjectDoc, id: &str) -> bool {
    for a in &mut doc.actors {
        for s in &mut a.scripts {
            if s.hat.as_ref().is_some_and(|h| h.id == id) {
                s.hat = None;
                return true;
            }
        }
    }
    false
}

fn wrap_in_not(doc: &mut ProjectDoc, id: &str, new_id: &str) -> bool {
    each_block_mut(doc, |b| {
        for a in &mut b.args {
            if let ArgDoc::Block(x) = a {
                if x.id == id {
                    let inner = std::mem::replace(a, ArgDoc::Lit(crate::value::Value::Bool(false)));
                    *a = ArgDoc::Block(Box::new(BlockDoc {
                        id: new_id.to_string(),
                        opcode: Opcode::Not.name().into(),
                        args: vec![inner],
                        children: vec![],
                    }));
                    return true;
                }
            }
        }
        false
    })
}

/// Keys a KRM mutant may switch to: those the project uses plus the arrows
/// and space.
fn key_vocabulary(doc: &ProjectDoc) -> BTreeSet<String> {
    let mut keys: BTreeSet<String> = EXTRA_KEYS.iter().map(|k| k.to_string()).collect();
    for (_, b) in all_blocks(doc) {
        if let Some(k) = key_arg(b) {
            keys.insert(k);
        }
    }
    keys
}

fn key_arg(b: &BlockDoc) -> Option<String> {
    let op = Opcode::from_name(&b.opcode)?;
    if !matches!(op, Opcode::KeyPressed | Opcode::KeyPressedQ) {
        return None;
    }
    match b.args.first() {
        Some(ArgDoc::Lit(v)) => Some(normalize_key(&v.to_text())),
        _ => None,
    }
}

/// Indices of name slots that hold variable names.
fn variable_name_slot(op: Opcode) -> Option<usize> {
    matches!(op, Opcode::SetVariable | Opcode::ChangeVariable).then_some(0)
}

struct Gen<'a> {
    original: &'a Project,
    rng: ChaCha8Rng,
    out: Vec<Mutant>,
    counter: BTreeMap<Operator, usize>,
}

impl Gen<'_> {
    fn emit(&mut self, operator: Operator, locus: &str, description: String, change: impl FnOnce(&mut ProjectDoc) -> bool) {
        let mut doc = self.original.doc.clone();
        if !change(&mut doc) {
            return;
        }
        // a mutant that no longer loads is not a program; drop it
        let Ok(project) = Project::load(doc) else { return };
        let n = self.counter.entry(operator).or_default();
        *n += 1;
        self.out.push(Mutant { id: format!("{operator}-{n}"), operator, locus: locus.to_string(), description, project });
    }
}

/// All first-order mutants of a project. Operators that need a random
/// replacement draw it from `seed`.
pub fn generate_mutants(p: &Project, seed: u64) -> Vec<Mutant> {
    let doc = p.doc.clone();
    let keys = key_vocabulary(&doc);
    let mut g = Gen { original: p, rng: ChaCha8Rng::seed_from_u64(seed), out: vec![], counter: BTreeMap::new() };
    let blocks = all_blocks(&doc);
    let taken: BTreeSet<&str> = blocks.iter().map(|(_, b)| b.id.as_str()).collect();
    for &(actor, b) in &blocks {
        let Some(op) = Opcode::from_name(&b.opcode) else { continue };
        let id = b.id.as_str();

        if let Some(old) = key_arg(b) {
            let choices: Vec<&String> = keys.iter().filter(|k| **k != old).collect();
            if let Some(&new) = choices.choose(&mut g.rng) {
                let new = new.clone();
                g.emit(Operator::KRM, id, format!("key {old} -> {new}"), |d| {
                    edit(d, id, |x| x.args[0] = ArgDoc::Lit(crate::value::Value::Text(new.clone())))
                });
            }
        }

        if op.is_statement() && op.signature().1 == 0 {
            g.emit(Operator::SBD, id, format!("delete {}", b.opcode), |d| remove_statement(d, id));
        }

        if op.is_hat() && op != Opcode::ProcedureDefinition {
            g.emit(Operator::SDM, id, format!("delete hat {}", b.opcode), |d| remove_hat(d, id));
        }

        let swaps: &[Opcode] = match op {
            Opcode::Add | Opcode::Subtract | Opcode::Multiply | Opcode::Divide => {
                &[Opcode::Add, Opcode::Subtract, Opcode::Multiply, Opcode::Divide]
            }
            Opcode::And | Opcode::Or => &[Opcode::And, Opcode::Or],
            Opcode::Lt | Opcode::Gt | Opcode::Equals => &[Opcode::Lt, Opcode::Gt, Opcode::Equals],
            _ => &[],
        };
        let operator = match op {
            Opcode::And | Opcode::Or => Operator::LOR,
            Opcode::Lt | Opcode::Gt | Opcode::Equals => Operator::ROR,
            _ => Operator::AOR,
        };
        for &to in swaps.iter().filter(|&&to| to != op) {
            g.emit(operator, id, format!("{} -> {}", op.name(), to.name()), |d| {
                edit(d, id, |x| x.opcode = to.name().into())
            });
        }

        if op.is_boolean() {
            let mut new_id = format!("{id}_not");
            while taken.contains(new_id.as_str()) {
                new_id.push('_');
            }
            g.emit(Operator::NCM, id, format!("negate {}", b.opcode), |d| wrap_in_not(d, id, &new_id));
        }

        // variable reads in argument slots, then the name of set/change
        let in_scope = p.visible_variables(actor_ix(p, &doc, actor));
        let mut refs: Vec<(usize, String)> = b
            .args
            .iter()
            .enumerate()
            .filter_map(|(i, a)| match a {
                ArgDoc::Var { var } => Some((i, var.clone())),
                _ => None,
            })
            .collect();
        if let Some(i) = variable_name_slot(op) {
            if let Some(ArgDoc::Lit(v)) = b.args.get(i) {
                debug_assert_eq!(op.signature().0[i], Slot::Name);
                refs.push((i, v.to_text()));
            }
        }
        for (slot, old) in refs {
            let choices: Vec<&String> = in_scope.iter().filter(|v| **v != old).collect();
            let Some(&new) = choices.choose(&mut g.rng) else { continue };
            let new = new.clone();
            let is_read = matches!(b.args[slot], ArgDoc::Var { .. });
            g.emit(Operator::VRM, id, format!("variable {old} -> {new}"), |d| {
                edit(d, id, |x| {
                    x.args[slot] = if is_read {
                        ArgDoc::Var { var: new.clone() }
                    } else {
                        ArgDoc::Lit(crate::value::Value::Text(new.clone()))
                    }
                })
            });
        }
    }
    g.out
}

/// Document actor index to project actor index; loading may have inserted
/// a stage, but `p.doc` is the loaded document so the two agree.
fn actor_ix(p: &Project, doc: &ProjectDoc, i: usize) -> usize {
    p.actor_ix(&doc.actors[i].name).unwrap_or(i)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisConfig {
    /// replay seed when it differs from the suite's
    pub seed: Option<u64>,
    /// per-test step limit on a mutant; a test that hits it does not kill
    pub max_steps: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { seed: None, max_steps: DEFAULT_MAX_STEPS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MutantOutcome {
    pub id: String,
    pub operator: Operator,
    pub locus: String,
    pub description: String,
    pub killed: bool,
    /// indices into the suite's tests
    pub killed_by: Vec<usize>,
    /// tests stopped by the step limit
    pub exhausted: Vec<usize>,
    /// the VM panicked on some test; counted as a kill
    pub crashed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OperatorRow {
    pub operator: Operator,
    pub generated: usize,
    pub killed: usize,
    pub survived: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MutationReport {
    /// tests that already fail on the original and are left out
    pub excluded_tests: Vec<usize>,
    pub per_operator: Vec<OperatorRow>,
    pub generated: usize,
    pub killed: usize,
    pub score: f64,
    pub mutants: Vec<MutantOutcome>,
}

fn score(killed: usize, generated: usize) -> f64 {
    if generated == 0 {
        0.0
    } else {
        killed as f64 / generated as f64
    }
}

impl MutationReport {
    pub fn row(&self, op: Operator) -> &OperatorRow {
        self.per_operator.iter().find(|r| r.operator == op).expect("every operator has a row")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("operator,generated,killed,excluded,score\n");
        let excluded = self.excluded_tests.len();
        for r in &self.per_operator {
            s.push_str(&format!("{},{},{},{},{}\n", r.operator, r.generated, r.killed, excluded, r.score));
        }
        s.push_str(&format!("total,{},{},{},{}\n", self.generated, self.killed, excluded, self.score));
        s
    }
}

fn run_mutant(m: &Mutant, suite: &Suite, vm: &VmConfig, tests: &[usize], max_steps: u64) -> MutantOutcome {
    let mut o = MutantOutcome {
        id: m.id.clone(),
        operator: m.operator,
        locus: m.locus.clone(),
        description: m.description.clone(),
        killed: false,
        killed_by: vec![],
        exhausted: vec![],
        crashed: false,
    };
    for &i in tests {
        let t = &suite.tests[i];
        let r = catch_unwind(AssertUnwindSafe(|| {
            postprocess::replay(&m.project, vm, &t.events, &t.assertions, Some(max_steps))
        }));
        match r {
            Err(_) => {
                o.crashed = true;
                o.killed_by.push(i);
            }
            Ok(r) if r.exhausted => o.exhausted.push(i),
            Ok(r) if !r.ok() => o.killed_by.push(i),
            Ok(_) => {}
        }
    }
    o.killed = !o.killed_by.is_empty();
    o
}

/// Replays the suite on the original to exclude failing tests, then on
/// every mutant. A mutant is killed when some remaining test has a failing
/// assertion on it.
pub fn analyze(original: &Project, suite: &Suite, mutants: &[Mutant], cfg: &AnalysisConfig) -> MutationReport {
    let vm = VmConfig { seed: cfg.seed.unwrap_or(suite.seed), ..suite.vm_config() };
    let mut kept = vec![];
    let mut excluded = vec![];
    for (i, t) in suite.tests.iter().enumerate() {
        let ok = postprocess::check_compatible(original, &t.events, &t.assertions).is_ok()
            && postprocess::replay(original, &vm, &t.events, &t.assertions, None).ok();
        if ok {
            kept.push(i);
        } else {
            excluded.push(i);
        }
    }
    let mutants: Vec<MutantOutcome> =
        mutants.par_iter().map(|m| run_mutant(m, suite, &vm, &kept, cfg.max_steps)).collect();
    let per_operator: Vec<OperatorRow> = Operator::ALL
        .iter()
        .map(|&op| {
            let generated = mutants.iter().filter(|m| m.operator == op).count();
            let killed = mutants.iter().filter(|m| m.operator == op && m.killed).count();
            OperatorRow { operator: op, generated, killed, survived: generated - killed, score: score(killed, generated) }
        })
        .collect();
    let generated = mutants.len();
    let killed = mutants.iter().filter(|m| m.killed).count();
    MutationReport { excluded_tests: excluded, per_operator, generated, killed, score: score(killed, generated), mutants }
}
