//! Codon genotypes, decode-and-execute, and the genetic operators.

use crate::events::{self, Event, EventBounds, EventSpec};
use crate::fitness::{self, Goal};
use crate::graphs::Graphs;
use crate::project::{BlockIx, Project};
use crate::vm::{self, ExecutionTrace, VmConfig, VmState};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const CODON_MAX: u32 = 65536;

/// Which event set the decoder chooses from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum Extractor {
    #[default]
    Dynamic,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EncodingConfig {
    pub min_groups: usize,
    pub max_groups: usize,
    pub sigma: f64,
    pub bounds: EventBounds,
    pub extractor: Extractor,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            min_groups: 2,
            max_groups: 20,
            sigma: 10.0,
            bounds: EventBounds::default(),
            extractor: Extractor::Dynamic,
        }
    }
}

/// Flat codon list read in groups of one event codon plus its reserved
/// parameter codons.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Genotype {
    pub codons: Vec<u32>,
    pub group_size: usize,
}

impl Genotype {
    pub fn new(codons: Vec<u32>, group_size: usize) -> Self {
        assert!(group_size > 0 && codons.len().is_multiple_of(group_size), "codons must fill whole groups");
        Genotype { codons, group_size }
    }

    pub fn from_groups(groups: &[Vec<u32>]) -> Self {
        let gs = groups.first().map_or(1, |g| g.len());
        Genotype::new(groups.concat(), gs)
    }

    pub fn group_count(&self) -> usize {
        self.codons.len() / self.group_size
    }

    pub fn group(&self, i: usize) -> &[u32] {
        &self.codons[i * self.group_size..(i + 1) * self.group_size]
    }

    pub fn groups(&self) -> impl Iterator<Item = &[u32]> {
        self.codons.chunks(self.group_size)
    }

    pub fn truncate_groups(&mut self, n: usize) {
        self.codons.truncate(n * self.group_size);
    }
}

/// A project with everything the search needs precomputed.
#[derive(Debug, Clone)]
pub struct Subject {
    pub project: Project,
    pub graphs: Graphs,
    pub goals: Vec<Goal>,
    pub static_events: Vec<EventSpec>,
    pub group_size: usize,
}

impl Subject {
    pub fn new(project: Project) -> Subject {
        let graphs = Graphs::build(&project);
        let goals = fitness::goals(&project, &graphs);
        let static_events = events::static_extract(&project);
        let n_p = static_events.iter().map(|e| e.open_param_count()).max().unwrap_or(0);
        Subject { project, graphs, goals, static_events, group_size: n_p + 1 }
    }

    pub fn goal_blocks(&self) -> BTreeSet<BlockIx> {
        self.goals.iter().map(|g| g.block).collect()
    }

    /// Goal fitness values for a trace, in goal order.
    pub fn fitness(&self, trace: &ExecutionTrace) -> Vec<f64> {
        fitness::evaluate(&self.graphs, &self.goals, trace)
    }

    pub fn extract(&self, extractor: Extractor, state: &VmState) -> Vec<EventSpec> {
        match extractor {
            Extractor::Dynamic => events::dynamic_extract(state, &self.project),
            Extractor::Static => self.static_events.clone(),
        }
    }
}

/// A decoded and executed genotype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TestCase {
    pub genotype: Genotype,
    pub events: Vec<Event>,
    pub trace: ExecutionTrace,
    /// groups up to and including the last one that lowered the summed
    /// goal fitness
    pub last_improved: usize,
    pub steps: u64,
    pub stopped: bool,
    pub fitness: Vec<f64>,
}

impl TestCase {
    pub fn covered(&self) -> &BTreeSet<BlockIx> {
        &self.trace.covered
    }

    pub fn covers(&self, goal_ix: usize) -> bool {
        self.fitness[goal_ix] == 0.0
    }
}

/// Decoder state positioned after the greenflag step, so extension can keep
/// appending groups to a running execution.
pub struct Decoder<'a> {
    pub subject: &'a Subject,
    pub vm: VmConfig,
    pub enc: EncodingConfig,
    pub state: VmState,
    pub events: Vec<Event>,
    pub groups_used: usize,
    pub last_improved: usize,
    best_sum: f64,
}

impl<'a> Decoder<'a> {
    pub fn start(subject: &'a Subject, vm_cfg: &VmConfig, enc: &EncodingConfig) -> Self {
        let mut state = VmState::new(&subject.project, vm_cfg);
        vm::step(&subject.project, vm_cfg, &mut state, &[]);
        let best_sum = subject.fitness(&state.trace_snapshot()).iter().sum();
        Decoder {
            subject,
            vm: *vm_cfg,
            enc: *enc,
            state,
            events: vec![],
            groups_used: 0,
            last_improved: 0,
            best_sum,
        }
    }

    pub fn current_events(&self) -> Vec<EventSpec> {
        self.subject.extract(self.enc.extractor, &self.state)
    }

    /// Decodes and runs one group. Returns false when the program had
    /// already stopped and the group was not consumed.
    pub fn feed(&mut self, group: &[u32]) -> bool {
        if self.state.stopped {
            return false;
        }
        let set = self.current_events();
        let spec = &set[group[0] as usize % set.len()];
        let e = events::resolve(spec, &group[1..], &self.subject.project, &self.state, &self.enc.bounds);
        events::apply_event(&self.subject.project, &self.vm, &mut self.state, &e);
        self.events.push(e);
        self.groups_used += 1;
        let sum: f64 = self.subject.fitness(&self.state.trace_snapshot()).iter().sum();
        let improved = sum < self.best_sum;
        if improved {
            self.best_sum = sum;
            self.last_improved = self.groups_used;
        }
        true
    }

    /// The program has not stopped and some script is still running.
    pub fn is_active(&self) -> bool {
        !self.state.stopped && self.state.processes.iter().any(|p| p.is_active())
    }

    pub fn fitness_sum(&self) -> f64 {
        self.best_sum
    }

    pub fn finish(self, genotype: Genotype) -> TestCase {
        let trace = self.state.trace_snapshot();
        let fitness = self.subject.fitness(&trace);
        TestCase {
            genotype,
            events: self.events,
            trace,
            last_improved: self.last_improved,
            steps: self.state.sc,
            stopped: self.state.stopped,
            fitness,
        }
    }
}

pub fn decode_and_execute(subject: &Subject, g: &Genotype, vm_cfg: &VmConfig, enc: &EncodingConfig) -> TestCase {
    debug_assert_eq!(g.group_size, subject.group_size);
    let mut d = Decoder::start(subject, vm_cfg, enc);
    for group in g.groups() {
        if !d.feed(group) {
            break;
        }
    }
    d.finish(g.clone())
}

pub fn random_group<R: Rng>(rng: &mut R, group_size: usize) -> Vec<u32> {
    (0..group_size).map(|_| rng.random_range(0..CODON_MAX)).collect()
}

pub fn generate_random_codons<R: Rng>(rng: &mut R, group_size: usize, enc: &EncodingConfig) -> Genotype {
    let k = rng.random_range(enc.min_groups..=enc.max_groups);
    let codons = (0..k).flat_map(|_| random_group(rng, group_size)).collect();
    Genotype::new(codons, group_size)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupMutation {
    Insert,
    Perturb,
    Delete,
}

/// Applies one operator to group `i` of the groups, in place.
pub fn mutate_group<R: Rng>(
    groups: &mut Vec<Vec<u32>>,
    i: usize,
    op: GroupMutation,
    rng: &mut R,
    enc: &EncodingConfig,
) -> usize {
    let gs = groups[i].len();
    match op {
        GroupMutation::Insert => {
            if groups.len() >= enc.max_groups {
                return i + 1;
            }
            groups.insert(i, random_group(rng, gs));
            i + 2
        }
        GroupMutation::Perturb => {
            for c in groups[i].iter_mut() {
                let n = Normal::new(*c as f64, enc.sigma).expect("positive sigma");
                let v = n.sample(rng).round() as i64;
                *c = v.rem_euclid(CODON_MAX as i64) as u32;
            }
            i + 1
        }
        GroupMutation::Delete => {
            if groups.len() <= enc.min_groups {
                return i + 1;
            }
            groups.remove(i);
            i
        }
    }
}

/// Mutates each original group with probability 1/n_g using one of the
/// three group operators.
pub fn mutate<R: Rng>(g: &Genotype, rng: &mut R, enc: &EncodingConfig) -> Genotype {
    mutate_counted(g, rng, enc).0
}

/// [`mutate`], also returning how many groups were selected.
pub fn mutate_counted<R: Rng>(g: &Genotype, rng: &mut R, enc: &EncodingConfig) -> (Genotype, usize) {
    let n = g.group_count();
    if n == 0 {
        return (g.clone(), 0);
    }
    let mut selected = 0;
    let p = 1.0 / n as f64;
    let mut groups: Vec<Vec<u32>> = g.groups().map(|x| x.to_vec()).collect();
    let mut i = 0;
    while i < groups.len() {
        if rng.random_bool(p) {
            selected += 1;
            let op = match rng.random_range(0..3u8) {
                0 => GroupMutation::Insert,
                1 => GroupMutation::Perturb,
                _ => GroupMutation::Delete,
            };
            i = mutate_group(&mut groups, i, op, rng, enc);
        } else {
            i += 1;
        }
    }
    (Genotype::new(groups.concat(), g.group_size), selected)
}

/// Single-point crossover at the same relative position of both parents.
pub fn crossover_at(a: &Genotype, b: &Genotype, psi: f64) -> (Genotype, Genotype) {
    let gs = a.group_size;
    let ka = (psi * a.group_count() as f64).floor() as usize * gs;
    let kb = (psi * b.group_count() as f64).floor() as usize * gs;
    let c1 = [&a.codons[..ka], &b.codons[kb..]].concat();
    let c2 = [&b.codons[..kb], &a.codons[ka..]].concat();
    (Genotype::new(c1, gs), Genotype::new(c2, gs))
}

pub fn crossover<R: Rng>(a: &Genotype, b: &Genotype, rng: &mut R) -> (Genotype, Genotype) {
    for _ in 0..4 {
        let (c1, c2) = crossover_at(a, b, rng.random::<f64>());
        if !c1.codons.is_empty() && !c2.codons.is_empty() {
            return (c1, c2);
        }
    }
    (a.clone(), b.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g(groups: &[[u32; 2]]) -> Genotype {
        Genotype::from_groups(&groups.iter().map(|x| x.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn cat_bear_decoding() {
        let s = Subject::new(corpus::load("cat_bear"));
        assert_eq!(s.group_size, 2);
        let t = decode_and_execute(&s, &g(&[[4, 3], [5, 8], [2, 9]]), &VmConfig::default(), &EncodingConfig::default());
        assert_eq!(
            t.events,
            vec![
                Event::Wait { steps: 3 },
                Event::ClickSprite { sprite: "Cat".into() },
                Event::KeyPress { key: "space".into(), steps: 9 },
            ]
        );
    }

    #[test]
    fn zero_genotype_repeats_first_event() {
        let s = Subject::new(corpus::load("elephant"));
        let t = decode_and_execute(&s, &g(&[[0, 0], [0, 0], [0, 0]]), &VmConfig::default(), &EncodingConfig::default());
        assert_eq!(t.events, vec![Event::Wait { steps: 0 }; 3]);
        assert_eq!(t.steps, 4);
    }

    #[test]
    fn decoding_is_deterministic() {
        let s = Subject::new(corpus::load("zombie"));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc = EncodingConfig::default();
        for _ in 0..10 {
            let gt = generate_random_codons(&mut rng, s.group_size, &enc);
            let a = decode_and_execute(&s, &gt, &VmConfig::default(), &enc);
            let b = decode_and_execute(&s, &gt, &VmConfig::default(), &enc);
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }

    #[test]
    fn worked_crossover() {
        let t1 = g(&[[0, 1], [2, 3], [4, 5], [6, 7], [8, 9]]);
        let t2 = g(&[[10, 11], [12, 13], [14, 15]]);
        let (c1, c2) = crossover_at(&t1, &t2, 0.5);
        assert_eq!(c1, g(&[[0, 1], [2, 3], [12, 13], [14, 15]]));
        assert_eq!(c2, g(&[[10, 11], [4, 5], [6, 7], [8, 9]]));
        let (c1, c2) = crossover_at(&t1, &t2, 0.0);
        assert_eq!((c1, c2), (t2, t1));
    }

    #[test]
    fn worked_mutants() {
        let enc = EncodingConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let base: Vec<Vec<u32>> = vec![vec![4, 3], vec![5, 8], vec![2, 9]];
        let mut del = base.clone();
        mutate_group(&mut del, 1, GroupMutation::Delete, &mut rng, &enc);
        assert_eq!(del, vec![vec![4, 3], vec![2, 9]]);
        let mut ins = base.clone();
        mutate_group(&mut ins, 2, GroupMutation::Insert, &mut rng, &enc);
        assert_eq!(ins.len(), 4);
        assert_eq!(&ins[..2], &base[..2]);
        assert_eq!(ins[3], base[2]);
        let mut short = vec![vec![4, 3], vec![5, 8]];
        mutate_group(&mut short, 0, GroupMutation::Delete, &mut rng, &enc);
        assert_eq!(short.len(), 2);
    }

    #[test]
    fn about_one_group_mutated_on_average() {
        let enc = EncodingConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 100_000;
        let mut total = 0;
        for t in 0..trials {
            let gt = Genotype::new(vec![7; 2 * (2 + t % 19)], 2);
            total += mutate_counted(&gt, &mut rng, &enc).1;
        }
        let mean = total as f64 / trials as f64;
        assert!((mean - 1.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn random_group_counts_are_uniform() {
        let enc = EncodingConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0u32; 19];
        let n = 10_000;
        for _ in 0..n {
            let gt = generate_random_codons(&mut rng, 2, &enc);
            assert!(gt.codons.iter().all(|&c| c < CODON_MAX));
            counts[gt.group_count() - 2] += 1;
        }
        let e = n as f64 / 19.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 18 degrees of freedom, 99.9% quantile
        assert!(chi2 < 42.31, "{chi2}");
    }

    #[test]
    fn appended_groups_keep_the_prefix() {
        let s = Subject::new(corpus::load("maze"));
        let enc = EncodingConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let a = generate_random_codons(&mut rng, s.group_size, &enc);
            let mut b = a.clone();
            b.codons.extend(random_group(&mut rng, s.group_size * 3));
            let ta = decode_and_execute(&s, &a, &VmConfig::default(), &enc);
            let tb = decode_and_execute(&s, &b, &VmConfig::default(), &enc);
            assert_eq!(&tb.events[..ta.events.len()], &ta.events[..]);
        }
    }

    fn genotype(max: usize) -> impl Strategy<Value = Genotype> {
        (2..=max).prop_flat_map(|n| {
            proptest::collection::vec(0..CODON_MAX, n * 2).prop_map(|c| Genotype::new(c, 2))
        })
    }

    proptest! {
        #[test]
        fn crossover_conserves_groups(a in genotype(20), b in genotype(20), psi in 0.0f64..1.0) {
            let (c1, c2) = crossover_at(&a, &b, psi);
            prop_assert_eq!(c1.group_count() + c2.group_count(), a.group_count() + b.group_count());
            for c in [&c1, &c2] {
                prop_assert!(c.group_count() >= 2 && c.group_count() <= 20);
            }
        }

        #[test]
        fn mutation_keeps_groups_whole(a in genotype(20), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let enc = EncodingConfig::default();
            let m = mutate(&a, &mut rng, &enc);
            prop_assert_eq!(m.codons.len() % 2, 0);
            prop_assert!(m.group_count() >= enc.min_groups && m.group_count() <= enc.max_groups);
            prop_assert!(m.codons.iter().all(|&c| c < CODON_MAX));
        }
    }
}
