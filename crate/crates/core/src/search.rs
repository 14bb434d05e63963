//! Test suite generation: random search, MOSA and MIO, with extension and
//! reduction local search.

use crate::encoding::{self, Decoder, EncodingConfig, Genotype, Subject, TestCase};
use crate::events::{EventKind, EventSpec};
use crate::project::BlockIx;
use crate::vm::VmConfig;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Random,
    Mosa,
    Mio,
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Algorithm::Random),
            "mosa" => Ok(Algorithm::Mosa),
            "mio" => Ok(Algorithm::Mio),
            _ => Err(format!("unknown algorithm {s:?} (random, mosa, mio)")),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Random => "random",
            Algorithm::Mosa => "mosa",
            Algorithm::Mio => "mio",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Budget {
    Executions(u64),
    Steps(u64),
    Seconds(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MioParams {
    /// fraction of the budget after which the focused phase starts
    pub focus: f64,
    pub n0: f64,
    pub nf: f64,
    pub r0: f64,
    pub rf: f64,
    pub m0: f64,
    pub mf: f64,
}

impl Default for MioParams {
    fn default() -> Self {
        MioParams { focus: 1.0, n0: 10.0, nf: 1.0, r0: 0.9, rf: 0.0, m0: 1.0, mf: 10.0 }
    }
}

/// x0 + (xf - x0) * B / F before the focus point, xf after it.
pub fn dynamic_parameter(x0: f64, xf: f64, used: f64, focus: f64) -> f64 {
    if used < focus {
        x0 + (xf - x0) * used / focus
    } else {
        xf
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    pub budget: Budget,
    pub seed: u64,
    pub population: usize,
    pub crossover_prob: f64,
    pub local_search_prob: f64,
    pub mio: MioParams,
    pub new_event_prob: f64,
    /// group limit for extension local search
    pub max_codon_length: usize,
    pub vm: VmConfig,
    pub encoding: EncodingConfig,
}

impl SearchConfig {
    pub fn new(algorithm: Algorithm, budget: Budget, seed: u64) -> Self {
        SearchConfig {
            algorithm,
            budget,
            seed,
            population: 30,
            crossover_prob: 0.7,
            local_search_prob: 0.3,
            mio: MioParams::default(),
            new_event_prob: 0.5,
            max_codon_length: 20,
            vm: VmConfig::with_seed(seed),
            encoding: EncodingConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let probs = [
            ("crossover probability", self.crossover_prob),
            ("local search probability", self.local_search_prob),
            ("new event probability", self.new_event_prob),
            ("MIO focus", self.mio.focus),
            ("MIO r0", self.mio.r0),
            ("MIO rf", self.mio.rf),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        let budget_ok = match self.budget {
            Budget::Executions(n) | Budget::Steps(n) => n > 0,
            Budget::Seconds(x) => x > 0.0 && x.is_finite(),
        };
        if !budget_ok {
            return Err("budget must be positive".into());
        }
        if self.vm.acceleration < 1 {
            return Err("acceleration must be at least 1".into());
        }
        if self.population < 2 {
            return Err("population must be at least 2".into());
        }
        if self.encoding.min_groups == 0 || self.encoding.min_groups > self.encoding.max_groups {
            return Err("codon group bounds must satisfy 1 <= min <= max".into());
        }
        Ok(())
    }
}

/// One line of the coverage-over-time log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageRecord {
    pub execution_index: u64,
    pub vm_steps_used: u64,
    pub covered_blocks: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchResult {
    pub suite: Vec<TestCase>,
    pub covered: BTreeSet<BlockIx>,
    pub total_goals: usize,
    pub executions: u64,
    pub steps: u64,
    pub log: Vec<CoverageRecord>,
}

impl SearchResult {
    pub fn coverage(&self) -> f64 {
        if self.total_goals == 0 {
            1.0
        } else {
            self.covered.len() as f64 / self.total_goals as f64
        }
    }

    pub fn coverage_csv(&self) -> String {
        let mut s = String::from("executionIndex,vmStepsUsed,coveredBlocks,totalBlocks\n");
        for r in &self.log {
            s.push_str(&format!("{},{},{},{}\n", r.execution_index, r.vm_steps_used, r.covered_blocks, self.total_goals));
        }
        s
    }
}

/// Budget bookkeeping and the shared execution entry point.
struct Run<'a> {
    subject: &'a Subject,
    cfg: SearchConfig,
    rng: ChaCha8Rng,
    executions: u64,
    steps: u64,
    started: Instant,
    covered_goals: BTreeSet<usize>,
    log: Vec<CoverageRecord>,
    /// extended tests that did not replace their original but may still
    /// belong in the archive
    offered: Vec<TestCase>,
}

impl<'a> Run<'a> {
    fn new(subject: &'a Subject, cfg: &SearchConfig) -> Self {
        Run {
            subject,
            cfg: *cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            executions: 0,
            steps: 0,
            started: Instant::now(),
            covered_goals: BTreeSet::new(),
            log: vec![],
            offered: vec![],
        }
    }

    /// Fraction of the budget consumed, in [0, 1].
    fn used(&self) -> f64 {
        let f = match self.cfg.budget {
            Budget::Executions(n) => self.executions as f64 / n.max(1) as f64,
            Budget::Steps(n) => self.steps as f64 / n.max(1) as f64,
            Budget::Seconds(s) => self.started.elapsed().as_secs_f64() / s.max(1e-9),
        };
        f.min(1.0)
    }

    fn exhausted(&self) -> bool {
        match self.cfg.budget {
            Budget::Executions(n) => self.executions >= n,
            Budget::Steps(n) => self.steps >= n,
            Budget::Seconds(s) => self.started.elapsed() >= Duration::from_secs_f64(s.max(0.0)),
        }
    }

    fn all_covered(&self) -> bool {
        self.covered_goals.len() == self.subject.goals.len()
    }

    fn account(&mut self, t: &TestCase) {
        self.executions += 1;
        self.steps += t.steps;
        for (k, &f) in t.fitness.iter().enumerate() {
            if f == 0.0 {
                self.covered_goals.insert(k);
            }
        }
        self.log.push(CoverageRecord {
            execution_index: self.executions,
            vm_steps_used: self.steps,
            covered_blocks: self.covered_goals.len(),
        });
    }

    fn execute(&mut self, g: &Genotype) -> Option<TestCase> {
        if self.exhausted() {
            return None;
        }
        let t = encoding::decode_and_execute(self.subject, g, &self.cfg.vm, &self.cfg.encoding);
        self.account(&t);
        Some(t)
    }

    fn random_genotype(&mut self) -> Genotype {
        encoding::generate_random_codons(&mut self.rng, self.subject.group_size, &self.cfg.encoding)
    }

    fn random_test(&mut self) -> Option<TestCase> {
        let g = self.random_genotype();
        self.execute(&g)
    }

    fn mutate(&mut self, g: &Genotype) -> Genotype {
        encoding::mutate(g, &mut self.rng, &self.cfg.encoding)
    }

    /// Re-executes `t` and keeps appending groups while the summed fitness
    /// improves. The longer test replaces `t` only if it covers new blocks.
    fn extend(&mut self, t: &TestCase) -> Option<TestCase> {
        if t.stopped || t.genotype.group_count() >= self.cfg.max_codon_length {
            return Some(t.clone());
        }
        if self.exhausted() {
            return None;
        }
        let subject = self.subject;
        let mut d = Decoder::start(subject, &self.cfg.vm, &self.cfg.encoding);
        for group in t.genotype.groups() {
            d.feed(group);
        }
        let mut g = t.genotype.clone();
        let mut previous: Vec<EventSpec> = d.current_events();
        while g.group_count() < self.cfg.max_codon_length && d.is_active() {
            let set = d.current_events();
            let typing = set.iter().position(|e| matches!(e.kind(), EventKind::TypeText | EventKind::TypeNumber));
            let fresh: Vec<usize> = (0..set.len()).filter(|&i| !previous.contains(&set[i])).collect();
            let choice = match typing {
                Some(i) => i,
                None if !fresh.is_empty() && self.rng.random_bool(self.cfg.new_event_prob) => {
                    *fresh.choose(&mut self.rng).unwrap()
                }
                None => set.iter().position(|e| *e == EventSpec::Wait).unwrap_or(0),
            };
            let mut group = encoding::random_group(&mut self.rng, g.group_size);
            // the decoder takes codon mod |set|; keep the codon random above that
            let n = set.len() as u32;
            group[0] = (group[0] / n) * n + choice as u32;
            if group[0] >= encoding::CODON_MAX {
                group[0] = choice as u32;
            }
            previous = set;
            d.feed(&group);
            g.codons.extend_from_slice(&group);
            if d.last_improved != d.groups_used {
                break;
            }
        }
        let ext = d.finish(g);
        self.account(&ext);
        if ext.trace.covered.difference(&t.trace.covered).next().is_some() {
            Some(ext)
        } else {
            self.offered.push(ext);
            Some(t.clone())
        }
    }

    /// Drops the groups after the last improvement, keeping the trace.
    fn reduce(&self, t: &TestCase) -> TestCase {
        let n = t.genotype.group_count();
        if t.last_improved >= n {
            return t.clone();
        }
        let keep = t.last_improved.max(self.cfg.encoding.min_groups).min(n);
        let mut r = t.clone();
        r.genotype.truncate_groups(keep);
        r.events.truncate(keep);
        r
    }

    /// Applies each local search with the configured probability.
    fn local_search(&mut self, t: TestCase) -> Option<TestCase> {
        let mut t = t;
        if self.rng.random_bool(self.cfg.local_search_prob) {
            t = self.extend(&t)?;
        }
        if self.rng.random_bool(self.cfg.local_search_prob) {
            t = self.reduce(&t);
        }
        Some(t)
    }

    fn finish(self, suite: Vec<TestCase>) -> SearchResult {
        let covered = self.covered_goals.iter().map(|&k| self.subject.goals[k].block).collect();
        SearchResult {
            suite,
            covered,
            total_goals: self.subject.goals.len(),
            executions: self.executions,
            steps: self.steps,
            log: self.log,
        }
    }
}

fn shorter(a: &TestCase, b: &TestCase) -> bool {
    a.genotype.group_count() < b.genotype.group_count()
}

/// Best covering test per goal, preferring shorter genotypes.
struct CoverArchive {
    best: Vec<Option<TestCase>>,
}

impl CoverArchive {
    fn new(n: usize) -> Self {
        CoverArchive { best: vec![None; n] }
    }

    fn update(&mut self, t: &TestCase) {
        for (k, slot) in self.best.iter_mut().enumerate() {
            if t.covers(k) && slot.as_ref().is_none_or(|old| shorter(t, old)) {
                *slot = Some(t.clone());
            }
        }
    }

    fn is_covered(&self, k: usize) -> bool {
        self.best[k].is_some()
    }

    fn suite(&self) -> Vec<TestCase> {
        dedup(self.best.iter().flatten().cloned())
    }
}

fn dedup(tests: impl Iterator<Item = TestCase>) -> Vec<TestCase> {
    let mut out: Vec<TestCase> = vec![];
    for t in tests {
        if !out.iter().any(|o| o.genotype == t.genotype) {
            out.push(t);
        }
    }
    out
}

pub fn run(subject: &Subject, cfg: &SearchConfig) -> SearchResult {
    match cfg.algorithm {
        Algorithm::Random => random_search(subject, cfg),
        Algorithm::Mosa => mosa(subject, cfg),
        Algorithm::Mio => mio(subject, cfg),
    }
}

/// Keeps every random test that covers something new.
pub fn random_search(subject: &Subject, cfg: &SearchConfig) -> SearchResult {
    let mut run = Run::new(subject, cfg);
    let mut suite = vec![];
    while !run.all_covered() {
        let before = run.covered_goals.len();
        let Some(t) = run.random_test() else { break };
        if run.covered_goals.len() > before {
            suite.push(t);
        }
    }
    run.finish(suite)
}

fn dominates(a: &TestCase, b: &TestCase, objectives: &[usize]) -> bool {
    let mut strictly = false;
    for &k in objectives {
        if a.fitness[k] > b.fitness[k] {
            return false;
        }
        if a.fitness[k] < b.fitness[k] {
            strictly = true;
        }
    }
    strictly
}

/// Front 0 holds the best test per uncovered goal; the rest are the
/// non-dominated fronts on the uncovered goals.
pub fn preference_sort(pop: &[TestCase], uncovered: &[usize]) -> Vec<Vec<usize>> {
    if uncovered.is_empty() {
        let mut all: Vec<usize> = (0..pop.len()).collect();
        all.sort_by_key(|&i| pop[i].genotype.group_count());
        return vec![all];
    }
    let mut f0: Vec<usize> = vec![];
    for &k in uncovered {
        let best = (0..pop.len())
            .min_by(|&a, &b| {
                pop[a].fitness[k]
                    .total_cmp(&pop[b].fitness[k])
                    .then(pop[a].genotype.group_count().cmp(&pop[b].genotype.group_count()))
            })
            .unwrap();
        if !f0.contains(&best) {
            f0.push(best);
        }
    }
    let rest: Vec<usize> = (0..pop.len()).filter(|i| !f0.contains(i)).collect();
    let mut fronts = vec![f0];
    // fast non-dominated sorting of the remainder
    let n = rest.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list = vec![vec![]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates(&pop[rest[i]], &pop[rest[j]], uncovered) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            }
        }
    }
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = vec![];
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current.iter().map(|&i| rest[i]).collect());
        current = next;
    }
    fronts
}

pub fn crowding_distance(pop: &[TestCase], front: &[usize], objectives: &[usize]) -> Vec<f64> {
    let mut d = vec![0.0; front.len()];
    if front.len() <= 2 {
        return vec![f64::INFINITY; front.len()];
    }
    for &k in objectives {
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| pop[front[a]].fitness[k].total_cmp(&pop[front[b]].fitness[k]));
        let lo = pop[front[order[0]]].fitness[k];
        let hi = pop[front[*order.last().unwrap()]].fitness[k];
        d[order[0]] = f64::INFINITY;
        d[*order.last().unwrap()] = f64::INFINITY;
        if hi > lo {
            for w in 1..order.len() - 1 {
                let gap = pop[front[order[w + 1]]].fitness[k] - pop[front[order[w - 1]]].fitness[k];
                d[order[w]] += gap / (hi - lo);
            }
        }
    }
    d
}

/// Picks the next population of size `n`; returns it with each member's
/// (rank, crowding) for tournament selection.
fn select_population(pop: Vec<TestCase>, uncovered: &[usize], n: usize) -> (Vec<TestCase>, Vec<(usize, f64)>) {
    let fronts = preference_sort(&pop, uncovered);
    let mut chosen: Vec<(usize, (usize, f64))> = vec![];
    for (rank, front) in fronts.iter().enumerate() {
        if chosen.len() >= n {
            break;
        }
        let cd = crowding_distance(&pop, front, uncovered);
        let mut members: Vec<(usize, f64)> = front.iter().copied().zip(cd).collect();
        if chosen.len() + members.len() > n {
            members.sort_by(|a, b| b.1.total_cmp(&a.1));
            members.truncate(n - chosen.len());
        }
        chosen.extend(members.into_iter().map(|(i, c)| (i, (rank, c))));
    }
    let mut slots: Vec<Option<TestCase>> = pop.into_iter().map(Some).collect();
    let mut next = vec![];
    let mut info = vec![];
    for (i, ri) in chosen {
        next.push(slots[i].take().unwrap());
        info.push(ri);
    }
    (next, info)
}

fn tournament(rng: &mut ChaCha8Rng, info: &[(usize, f64)]) -> usize {
    let a = rng.random_range(0..info.len());
    let b = rng.random_range(0..info.len());
    let (ra, ca) = info[a];
    let (rb, cb) = info[b];
    if rb < ra || (rb == ra && cb > ca) {
        b
    } else {
        a
    }
}

pub fn mosa(subject: &Subject, cfg: &SearchConfig) -> SearchResult {
    let mut run = Run::new(subject, cfg);
    let mut archive = CoverArchive::new(subject.goals.len());
    let n = cfg.population;
    let mut pop = vec![];
    while pop.len() < n {
        let Some(t) = run.random_test() else { break };
        archive.update(&t);
        pop.push(t);
    }
    if pop.len() < 2 {
        return run.finish(archive.suite());
    }
    let uncovered = |a: &CoverArchive| (0..subject.goals.len()).filter(|&k| !a.is_covered(k)).collect::<Vec<_>>();
    let (mut pop, mut info) = select_population(pop, &uncovered(&archive), n);
    'outer: while !run.exhausted() && !run.all_covered() {
        let mut offspring = vec![];
        while offspring.len() < n {
            let a = tournament(&mut run.rng, &info);
            let b = tournament(&mut run.rng, &info);
            let (c1, c2) = if run.rng.random_bool(cfg.crossover_prob) {
                encoding::crossover(&pop[a].genotype, &pop[b].genotype, &mut run.rng)
            } else {
                (pop[a].genotype.clone(), pop[b].genotype.clone())
            };
            for c in [c1, c2] {
                let m = run.mutate(&c);
                let Some(t) = run.execute(&m) else { break 'outer };
                archive.update(&t);
                offspring.push(t);
            }
        }
        pop.extend(offspring);
        let (next, next_info) = select_population(pop, &uncovered(&archive), n);
        pop = next;
        info = next_info;
        for slot in pop.iter_mut() {
            let Some(t) = run.local_search(slot.clone()) else { break 'outer };
            archive.update(&t);
            for o in std::mem::take(&mut run.offered) {
                archive.update(&o);
            }
            *slot = t;
        }
    }
    run.finish(archive.suite())
}

/// Per-goal bounded populations; covered goals keep a single test.
struct MioArchive {
    pops: Vec<Vec<TestCase>>,
    covered: Vec<bool>,
    limit: f64,
}

impl MioArchive {
    fn update(&mut self, t: &TestCase, n: usize) {
        for k in 0..self.pops.len() {
            let f = t.fitness[k];
            if f == 0.0 {
                if !self.covered[k] || shorter(t, &self.pops[k][0]) {
                    self.pops[k] = vec![t.clone()];
                    self.covered[k] = true;
                }
            } else if !self.covered[k] && f < self.limit {
                let pop = &mut self.pops[k];
                pop.push(t.clone());
                pop.sort_by(|a, b| {
                    a.fitness[k].total_cmp(&b.fitness[k]).then(a.genotype.group_count().cmp(&b.genotype.group_count()))
                });
                pop.truncate(n.max(1));
            }
        }
    }

    fn shrink(&mut self, n: usize) {
        for (k, pop) in self.pops.iter_mut().enumerate() {
            if !self.covered[k] {
                pop.truncate(n.max(1));
            }
        }
    }

    fn is_empty(&self) -> bool {
        self.pops.iter().all(|p| p.is_empty())
    }
}

pub fn mio(subject: &Subject, cfg: &SearchConfig) -> SearchResult {
    let mut run = Run::new(subject, cfg);
    let goals = subject.goals.len();
    let limit = 2.0 * subject.graphs.max_approach_level as f64 + 2.0;
    let mut archive = MioArchive { pops: vec![vec![]; goals], covered: vec![false; goals], limit };
    let p = cfg.mio;
    while !run.exhausted() && !run.all_covered() {
        let used = run.used();
        let r = dynamic_parameter(p.r0, p.rf, used, p.focus);
        let n = dynamic_parameter(p.n0, p.nf, used, p.focus).round() as usize;
        let m = dynamic_parameter(p.m0, p.mf, used, p.focus).round().max(1.0) as usize;
        archive.shrink(n);
        let uncovered: Vec<usize> = (0..goals).filter(|&k| !archive.covered[k]).collect();
        let sample = archive.is_empty() || uncovered.is_empty() || run.rng.random_bool(r.clamp(0.0, 1.0));
        if sample {
            let Some(t) = run.random_test() else { break };
            archive.update(&t, n);
            let Some(t) = run.local_search(t) else { break };
            archive.update(&t, n);
            for o in std::mem::take(&mut run.offered) {
                archive.update(&o, n);
            }
            continue;
        }
        let with_pop: Vec<usize> = uncovered.iter().copied().filter(|&k| !archive.pops[k].is_empty()).collect();
        let k = if with_pop.is_empty() {
            *uncovered.choose(&mut run.rng).unwrap()
        } else {
            *with_pop.choose(&mut run.rng).unwrap()
        };
        let mut base = if archive.pops[k].is_empty() {
            let Some(t) = run.random_test() else { break };
            archive.update(&t, n);
            t
        } else {
            archive.pops[k].choose(&mut run.rng).unwrap().clone()
        };
        for _ in 0..m {
            let g = run.mutate(&base.genotype);
            let Some(t) = run.execute(&g) else { break };
            archive.update(&t, n);
            let improved = t.fitness[k] < base.fitness[k];
            if improved {
                base = t;
            }
            if base.fitness[k] == 0.0 {
                break;
            }
        }
        if let Some(t) = run.local_search(base) {
            archive.update(&t, n);
        }
        for o in std::mem::take(&mut run.offered) {
            archive.update(&o, n);
        }
    }
    let suite = dedup((0..goals).filter(|&k| archive.covered[k]).map(|k| archive.pops[k][0].clone()));
    run.finish(suite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn subject(name: &str) -> Subject {
        Subject::new(corpus::load(name))
    }

    #[test]
    fn trivial_project_needs_one_test() {
        let s = subject("trivial");
        for alg in [Algorithm::Random, Algorithm::Mosa, Algorithm::Mio] {
            let r = run(&s, &SearchConfig::new(alg, Budget::Executions(50), 1));
            assert_eq!(r.coverage(), 1.0, "{alg}");
            assert_eq!(r.suite.len(), 1, "{alg}");
        }
    }

    #[test]
    fn dead_script_stays_uncovered_and_budget_ends_the_run() {
        let p = crate::project::load_project_str(
            r#"{"actors":[{"name":"A","scripts":[
            {"hat":{"id":"h","opcode":"greenflag"},"body":[{"id":"s","opcode":"say","args":["hi"]}]},
            {"body":[{"id":"dead","opcode":"say","args":["never"]}]}]}]}"#,
        )
        .unwrap();
        let s = Subject::new(p);
        for alg in [Algorithm::Random, Algorithm::Mosa, Algorithm::Mio] {
            let r = run(&s, &SearchConfig::new(alg, Budget::Executions(40), 2));
            assert!(r.coverage() < 1.0);
            assert!(r.executions <= 40);
        }
    }

    #[test]
    fn same_seed_same_suite() {
        let s = subject("zombie");
        for alg in [Algorithm::Random, Algorithm::Mosa, Algorithm::Mio] {
            let cfg = SearchConfig::new(alg, Budget::Executions(120), 7);
            let a = serde_json::to_string(&run(&s, &cfg)).unwrap();
            let b = serde_json::to_string(&run(&s, &cfg)).unwrap();
            assert_eq!(a, b, "{alg}");
        }
    }

    #[test]
    fn coverage_log_is_monotone_and_within_budget() {
        let s = subject("maze");
        for alg in [Algorithm::Random, Algorithm::Mosa, Algorithm::Mio] {
            let r = run(&s, &SearchConfig::new(alg, Budget::Steps(5000), 3));
            assert!(r.log.windows(2).all(|w| w[0].covered_blocks <= w[1].covered_blocks));
            assert!(r.log.windows(2).all(|w| w[0].vm_steps_used < 5000));
            assert_eq!(r.log.last().unwrap().covered_blocks, r.covered.len());
            for t in &r.suite {
                assert!(t.fitness.contains(&0.0));
            }
        }
    }

    #[test]
    fn dynamic_parameter_interpolates() {
        assert_eq!(dynamic_parameter(20.0, 10.0, 0.25, 0.5), 15.0);
        assert_eq!(dynamic_parameter(20.0, 10.0, 0.5, 0.5), 10.0);
        assert_eq!(dynamic_parameter(0.9, 0.0, 0.7, 1.0), 0.9 - 0.9 * 0.7);
    }

    #[test]
    fn extension_types_an_answer_at_a_prompt() {
        let s = subject("fitness_example");
        let mut cfg = SearchConfig::new(Algorithm::Mosa, Budget::Executions(100), 4);
        cfg.new_event_prob = 0.0;
        let mut run = Run::new(&s, &cfg);
        // a test that only waits leaves the prompt open
        let t = run.execute(&Genotype::new(vec![1, 0, 1, 0], 2)).unwrap();
        assert!(matches!(t.events[0], crate::events::Event::Wait { .. }));
        let mut d = Decoder::start(&s, &cfg.vm, &cfg.encoding);
        for g in t.genotype.groups() {
            d.feed(g);
        }
        assert_eq!(d.current_events()[0], EventSpec::TypeNumber);
        let e = run.extend(&t).unwrap();
        assert!(matches!(e.events[2], crate::events::Event::TypeNumber { .. }) || e == t);
    }

    #[test]
    fn extension_waits_through_a_long_delay() {
        // the second half hides behind a 200-step wait
        let p = crate::project::load_project_str(
            r#"{"actors":[{"name":"A","scripts":[{"hat":{"id":"h","opcode":"greenflag"},"body":[
            {"id":"w","opcode":"waitSeconds","args":[6]},{"id":"s","opcode":"say","args":["late"]}]}]}]}"#,
        )
        .unwrap();
        let s = Subject::new(p);
        let cfg = SearchConfig::new(Algorithm::Mosa, Budget::Executions(100), 5);
        let mut run = Run::new(&s, &cfg);
        let t = run.execute(&Genotype::new(vec![0, 5, 0, 5], 2)).unwrap();
        assert!(!t.covers(s.goals.len() - 1));
        let e = run.extend(&t).unwrap();
        assert!(e.covered().contains(&s.project.block_ix("s").unwrap()));
    }

    #[test]
    fn full_coverage_test_is_not_extended() {
        let s = subject("trivial");
        let cfg = SearchConfig::new(Algorithm::Mosa, Budget::Executions(10), 5);
        let mut run = Run::new(&s, &cfg);
        let t = run.execute(&Genotype::new(vec![0, 0, 0, 0], 2)).unwrap();
        assert_eq!(run.extend(&t).unwrap(), t);
    }

    #[test]
    fn reduction_truncates_after_last_improvement() {
        let s = subject("cat_bear");
        let cfg = SearchConfig::new(Algorithm::Mosa, Budget::Executions(10), 5);
        let mut run = Run::new(&s, &cfg);
        // click and wait for the story to finish, then waits that change nothing
        let g = Genotype::new(vec![1, 0, 0, 40, 0, 0, 0, 0, 0, 0], 2);
        let t = run.execute(&g).unwrap();
        assert_eq!(t.last_improved, 2);
        let r = run.reduce(&t);
        assert_eq!(r.genotype.group_count(), 2);
        let again = run.execute(&r.genotype).unwrap();
        assert_eq!(again.covered(), t.covered());
    }
}
