//! Acceptance criteria, one line of output each. Runs without the libtest
//! harness so the lines show up in plain `cargo test` output.

use blockwhisker::brute;
use blockwhisker::corpus;
use blockwhisker::encoding::{crossover_at, decode_and_execute, EncodingConfig, Genotype, Subject};
use blockwhisker::events::{self, run_events, Event};
use blockwhisker::fitness::{self, alpha, Evaluator, Goal};
use blockwhisker::graphs::{dom, Graphs};
use blockwhisker::mutation::{self, AnalysisConfig, Operator};
use blockwhisker::postprocess::{self, Assertion, AssertionKind, Expected, Target};
use blockwhisker::project::{ArgDoc, BlockDoc, Project, ProjectDoc};
use blockwhisker::search::{self, Algorithm, Budget, SearchConfig};
use blockwhisker::suite::{self, Suite, SuiteTest};
use blockwhisker::value::Value;
use blockwhisker::vm::{ExecutionTrace, VmConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

const ALGS: [Algorithm; 3] = [Algorithm::Random, Algorithm::Mosa, Algorithm::Mio];

fn generate(s: &Subject, alg: Algorithm, budget: Budget, seed: u64) -> (Suite, String) {
    let cfg = SearchConfig::new(alg, budget, seed);
    let r = search::run(s, &cfg);
    (suite::build(s, &cfg, &r, true), r.coverage_csv())
}

// 1 ------------------------------------------------------------------------

fn determinism() -> Outcome {
    let started = Instant::now();
    let subjects: Vec<(&str, Subject)> = corpus::all().into_iter().map(|(n, p)| (n, Subject::new(p))).collect();
    let mut jobs = vec![];
    for (i, _) in subjects.iter().enumerate() {
        for alg in ALGS {
            for rep in 0..20 {
                jobs.push((i, alg, rep));
            }
        }
    }
    let outputs: Vec<(usize, Algorithm, String)> = jobs
        .par_iter()
        .map(|&(i, alg, _)| {
            let (s, csv) = generate(&subjects[i].1, alg, Budget::Executions(500), 42);
            (i, alg, s.to_json() + &csv)
        })
        .collect();
    let mut distinct: BTreeMap<(usize, String), BTreeSet<&String>> = BTreeMap::new();
    for (i, alg, out) in &outputs {
        distinct.entry((*i, alg.to_string())).or_default().insert(out);
    }
    for ((i, alg), outs) in &distinct {
        check(outs.len() == 1, format!("{} under {alg}: {} distinct outputs", subjects[*i].0, outs.len()))?;
    }
    let secs = started.elapsed().as_secs_f64();
    check(secs < 120.0, format!("took {secs:.1}s"))?;
    Ok(format!("{} runs, all byte-identical per configuration, {secs:.1}s", outputs.len()))
}

// 2 ------------------------------------------------------------------------

fn acceleration_invariance() -> Outcome {
    let mut runs = 0;
    for (name, p) in corpus::all() {
        let s = Subject::new(p);
        for alg in ALGS {
            let mut sets = vec![];
            for accel in [1, 2, 5, 10] {
                let mut cfg = SearchConfig::new(alg, Budget::Steps(20_000), 5);
                cfg.vm.acceleration = accel;
                sets.push(search::run(&s, &cfg).covered);
                runs += 1;
            }
            check(sets.windows(2).all(|w| w[0] == w[1]), format!("{name} under {alg}: covered sets differ"))?;
        }
    }
    Ok(format!("{runs} runs, covered sets equal across accelerations 1, 2, 5, 10"))
}

// 3 ------------------------------------------------------------------------

fn groups(gs: &[[u32; 2]]) -> Genotype {
    Genotype::from_groups(&gs.iter().map(|g| g.to_vec()).collect::<Vec<_>>())
}

fn worked_examples() -> Outcome {
    let s = Subject::new(corpus::load("cat_bear"));
    let t = decode_and_execute(&s, &groups(&[[4, 3], [5, 8], [2, 9]]), &VmConfig::default(), &EncodingConfig::default());
    let want = vec![
        Event::Wait { steps: 3 },
        Event::ClickSprite { sprite: "Cat".into() },
        Event::KeyPress { key: "space".into(), steps: 9 },
    ];
    check(t.events == want, format!("decoded {:?}", t.events))?;

    let p1 = groups(&[[0, 1], [2, 3], [4, 5], [6, 7], [8, 9]]);
    let p2 = groups(&[[10, 11], [12, 13], [14, 15]]);
    let (c1, c2) = crossover_at(&p1, &p2, 0.5);
    check(c1 == groups(&[[0, 1], [2, 3], [12, 13], [14, 15]]), format!("child 1 {:?}", c1.codons))?;
    check(c2 == groups(&[[10, 11], [4, 5], [6, 7], [8, 9]]), format!("child 2 {:?}", c2.codons))?;

    let p = corpus::load("fitness_example");
    let dist = |answer: i64, id: &str| {
        let st = run_events(&p, &VmConfig::default(), &[Event::TypeNumber { value: answer }]);
        st.trace.dist(p.block_ix(id).unwrap()).map(|d| d.t)
    };
    check(dist(42, "if50") == Some(9.0), format!("x=42: {:?}", dist(42, "if50")))?;
    check(dist(55, "if60") == Some(6.0), format!("x=55: {:?}", dist(55, "if60")))?;
    Ok("decode, both crossover children, branch distances 9 and 6".into())
}

// 4 ------------------------------------------------------------------------

/// Graph on n nodes, the last one the exit, where every node reaches the
/// exit.
fn random_graph(rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let n = rng.random_range(3..=50);
    let mut succ: Vec<Vec<usize>> = (0..n - 1)
        .map(|i| {
            let mut v = vec![rng.random_range(i + 1..n)];
            for _ in 0..rng.random_range(0..3) {
                v.push(rng.random_range(0..n));
            }
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    succ.push(vec![]);
    succ
}

fn reaches(succ: &[Vec<usize>], from: usize, to: usize, removed: Option<usize>) -> bool {
    let mut seen = vec![false; succ.len()];
    let mut stack = vec![from];
    while let Some(v) = stack.pop() {
        if Some(v) == removed || seen[v] {
            continue;
        }
        if v == to {
            return true;
        }
        seen[v] = true;
        stack.extend(&succ[v]);
    }
    false
}

/// m postdominates n when every path from n to the exit meets m: removing
/// m cuts n off from the exit.
fn postdominates(succ: &[Vec<usize>], exit: usize, m: usize, n: usize) -> bool {
    m == n || !reaches(succ, n, exit, Some(m))
}

fn cd_oracle(succ: &[Vec<usize>]) -> BTreeSet<(usize, usize)> {
    let exit = succ.len() - 1;
    let mut out = BTreeSet::new();
    for a in 0..succ.len() {
        for &b in &succ[a] {
            for m in 0..succ.len() {
                let strict = m != a && postdominates(succ, exit, m, a);
                if postdominates(succ, exit, m, b) && !strict {
                    out.insert((a, m));
                }
            }
        }
    }
    out
}

fn shortest(succ: &[Vec<usize>], from: usize, to: usize) -> Option<u32> {
    let mut d = vec![u32::MAX; succ.len()];
    d[from] = 0;
    let mut q = std::collections::VecDeque::from([from]);
    while let Some(v) = q.pop_front() {
        for &w in &succ[v] {
            if d[w] == u32::MAX {
                d[w] = d[v] + 1;
                q.push_back(w);
            }
        }
    }
    (d[to] != u32::MAX).then_some(d[to])
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let succ = random_graph(&mut rng);
        let got: BTreeSet<(usize, usize)> =
            dom::control_dependences(&succ, succ.len() - 1).into_iter().map(|(a, _, m)| (a, m)).collect();
        check(got == cd_oracle(&succ), format!("control dependences differ on {succ:?}"))?;
    }
    let a = started.elapsed().as_secs_f64();

    let started = Instant::now();
    for _ in 0..200 {
        let succ = random_graph(&mut rng);
        let n = succ.len();
        let mut pred = vec![vec![]; n];
        for (a, ss) in succ.iter().enumerate() {
            for &b in ss {
                pred[b].push(a);
            }
        }
        let covered: Vec<bool> = (0..n).map(|_| rng.random_bool(0.2)).collect();
        let target = rng.random_range(0..n);
        let want = (0..n).filter(|&v| covered[v]).filter_map(|v| shortest(&succ, v, target)).min();
        let got = dom::first_covered_depth(&pred, &covered, target);
        check(got == want, format!("distance {got:?} != {want:?} on {succ:?}"))?;
    }
    let b = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let mut compared = vec![];
    for (name, p) in corpus::all() {
        if events::static_extract(&p).len() > 3 {
            continue;
        }
        let s = Subject::new(p);
        let reach = brute::reachable(&s.project, &VmConfig::with_seed(1), brute::DEFAULT_MAX_LEN);
        let r = search::run(&s, &SearchConfig::new(Algorithm::Mio, Budget::Executions(5000), 1));
        check(r.covered == reach, format!("{name}: search {} blocks, oracle {}", r.covered.len(), reach.len()))?;
        compared.push(name);
    }
    let c = started.elapsed().as_secs_f64();
    for (part, secs) in [("a", a), ("b", b), ("c", c)] {
        check(secs < 60.0, format!("part {part} took {secs:.1}s"))?;
    }
    Ok(format!("200 CDGs, 200 distance graphs, search = oracle on {}", compared.join(", ")))
}

// 5 ------------------------------------------------------------------------

/// Two-sided Mann-Whitney U test with the normal approximation, tie
/// correction and continuity correction. Returns (U of `a`, p).
fn mann_whitney(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mut all: Vec<(f64, usize)> = a.iter().map(|&x| (x, 0)).chain(b.iter().map(|&x| (x, 1))).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = all.len();
    let mut ranks = vec![0.0; n];
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for rank in &mut ranks[i..=j] {
            *rank = r;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    let r1: f64 = all.iter().zip(&ranks).filter(|((_, g), _)| *g == 0).map(|(_, r)| r).sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let nn = n as f64;
    let var = n1 * n2 / 12.0 * ((nn + 1.0) - ties / (nn * (nn - 1.0)));
    if var <= 0.0 {
        return (u, 1.0);
    }
    let mean = n1 * n2 / 2.0;
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let p = 2.0 * (1.0 - Normal::standard().cdf(z));
    (u, p.min(1.0))
}

fn search_superiority() -> Outcome {
    // textbook check: complete separation of two samples of ten
    let (u, p) = mann_whitney(&(0..10).map(f64::from).collect::<Vec<_>>(), &(10..20).map(f64::from).collect::<Vec<_>>());
    check(u == 0.0 && (p - 1.8e-4).abs() < 2e-5, format!("U test self-check: U={u}, p={p}"))?;

    let mut lines = vec![];
    for name in ["story_chain", "two_if_guard"] {
        let s = Subject::new(corpus::load(name));
        let cov: BTreeMap<String, Vec<f64>> = ALGS
            .iter()
            .map(|&alg| {
                let v: Vec<f64> = (1000..1020)
                    .into_par_iter()
                    .map(|seed| search::run(&s, &SearchConfig::new(alg, Budget::Steps(20_000), seed)).coverage())
                    .collect();
                (alg.to_string(), v)
            })
            .collect();
        let full = |alg: &str| cov[alg].iter().filter(|&&c| c == 1.0).count();
        let (r, mo, mi) = (full("random"), full("mosa"), full("mio"));
        let (_, p_mosa) = mann_whitney(&cov["mosa"], &cov["random"]);
        let (_, p_mio) = mann_whitney(&cov["mio"], &cov["random"]);
        let line = format!("{name}: random {r}/20, MOSA {mo}/20 (p={p_mosa:.1e}), MIO {mi}/20 (p={p_mio:.1e})");
        check(mo >= 18 && mi >= 18 && r <= 5 && p_mosa < 0.05 && p_mio < 0.05, line.clone())?;
        lines.push(line);
    }
    Ok(lines.join("; "))
}

// 6 and 7 ------------------------------------------------------------------

fn goal_fitness(s: &Subject, events: &[Event], targets: &[Goal]) -> Vec<f64> {
    let trace = run_events(&s.project, &VmConfig::with_seed(9), events).trace_snapshot();
    let ev = Evaluator::new(&s.graphs, &trace);
    targets.iter().map(|g| ev.fitness(g.node)).collect()
}

fn targets_of(s: &Subject, t: &SuiteTest) -> Vec<Goal> {
    t.goals.iter().map(|id| *s.goals.iter().find(|g| s.project.blocks[g.block].id == *id).unwrap()).collect()
}

fn corpus_suites() -> Vec<(&'static str, Subject, Suite)> {
    corpus::all()
        .into_par_iter()
        .map(|(name, p)| {
            let s = Subject::new(p);
            let (suite, _) = generate(&s, Algorithm::Mio, Budget::Executions(1000), 9);
            (name, s, suite)
        })
        .collect()
}

fn minimization(suites: &[(&str, Subject, Suite)]) -> Outcome {
    let mut tests = 0;
    let mut checks = 0;
    for (name, s, suite) in suites {
        for t in &suite.tests {
            let targets = targets_of(s, t);
            let base = goal_fitness(s, &t.events, &targets);
            check(base.iter().all(|&f| f == 0.0), format!("{name}: minimized test lost a goal"))?;
            for i in 0..t.events.len() {
                let mut fewer = t.events.clone();
                fewer.remove(i);
                let f = goal_fitness(s, &fewer, &targets);
                check(f.iter().zip(&base).any(|(a, b)| a > b), format!("{name}: event {i} of a test is removable"))?;
                checks += 1;
            }
            tests += 1;
        }
    }
    Ok(format!("{tests} tests on {} projects, {checks} single removals all worsen fitness", suites.len()))
}

fn assertion_soundness(suites: &[(&str, Subject, Suite)]) -> Outcome {
    let mut n = 0;
    for (name, s, suite) in suites {
        let r = suite::replay(&s.project, suite, None).map_err(|e| e.to_string())?;
        check(r.failures() == 0, format!("{name}: {} false positives", r.failures()))?;
        n += r.passed();
    }
    // gotoXY(10, 20) on a key press: the only change is the position
    let p = corpus::load("goto_micro");
    let events = [Event::KeyPress { key: "space".into(), steps: 1 }];
    let got = postprocess::generate_assertions(&p, &VmConfig::default(), &events);
    let want = vec![Assertion {
        position: 1,
        kind: AssertionKind::Position,
        target: Target { actor: "Sprite".into(), clone: None },
        name: None,
        expected: Expected::Point { x: 10.0, y: 20.0 },
    }];
    check(got == want, format!("goto micro project: {got:?}"))?;
    Ok(format!("{n} assertions replay cleanly; goto micro project gives exactly 1"))
}

// 8 ------------------------------------------------------------------------

fn signatures(doc: &ProjectDoc) -> (BTreeMap<String, String>, BTreeMap<String, String>) {
    fn walk(b: &BlockDoc, parent: Option<&str>, sig: &mut BTreeMap<String, String>, par: &mut BTreeMap<String, String>) {
        let args: Vec<String> = b
            .args
            .iter()
            .map(|a| match a {
                ArgDoc::Block(_) => "#".into(),
                other => serde_json::to_string(other).unwrap(),
            })
            .collect();
        sig.insert(b.id.clone(), format!("{} {}", b.opcode, args.join(",")));
        if let Some(p) = parent {
            par.insert(b.id.clone(), p.to_string());
        }
        for a in &b.args {
            if let ArgDoc::Block(x) = a {
                walk(x, Some(&b.id), sig, par);
            }
        }
        for c in b.children.iter().flatten() {
            walk(c, Some(&b.id), sig, par);
        }
    }
    let (mut sig, mut par) = (BTreeMap::new(), BTreeMap::new());
    for a in &doc.actors {
        for s in a.scripts.iter().chain(&a.custom_blocks) {
            for b in s.hat.iter().chain(&s.body) {
                walk(b, None, &mut sig, &mut par);
            }
        }
    }
    (sig, par)
}

/// Changed, added, or topmost removed blocks between two documents.
fn loci(orig: &ProjectDoc, m: &ProjectDoc) -> BTreeSet<String> {
    let (a, par) = signatures(orig);
    let (b, _) = signatures(m);
    let mut out: BTreeSet<String> = b.keys().filter(|k| !a.contains_key(*k)).cloned().collect();
    for (id, s) in &a {
        match b.get(id) {
            Some(t) if t != s => {
                out.insert(id.clone());
            }
            None if par.get(id).is_none_or(|p| b.contains_key(p)) => {
                out.insert(id.clone());
            }
            _ => {}
        }
    }
    out
}

fn n_is(position: usize, n: f64) -> Assertion {
    Assertion {
        position,
        kind: AssertionKind::Variable,
        target: Target { actor: "Stage".into(), clone: None },
        name: Some("n".into()),
        expected: Expected::Value(Value::Num(n)),
    }
}

fn mutation_analysis() -> Outcome {
    let p = corpus::load("two_if_guard");
    let s = Subject::new(p.clone());
    let mutants: Vec<_> = mutation::generate_mutants(&p, mutation::DEFAULT_MUTANT_SEED)
        .into_iter()
        .filter(|m| matches!(m.operator, Operator::NCM | Operator::SDM))
        .collect();
    let all_killed: Vec<bool> = (2000..2020)
        .into_par_iter()
        .map(|seed| {
            let (suite, _) = generate(&s, Algorithm::Mio, Budget::Steps(20_000), seed);
            let r = mutation::analyze(&p, &suite, &mutants, &AnalysisConfig::default());
            r.killed == r.generated
        })
        .collect();
    let runs = all_killed.iter().filter(|&&k| k).count();
    check(runs >= 18, format!("all {} NCM/SDM mutants killed in only {runs}/20 runs", mutants.len()))?;

    // hand-traced ledger on the fixture (hat, inc, branch, lt, msg):
    // A presses space once and checks n = 1, B presses twice and checks n = 2.
    // KRM: other key, n stays 0, killed. SDM: no script, killed.
    // SBD inc: n stays 0, killed. SBD msg: n unaffected, survives.
    // ROR lt -> gt, lt -> equals and NCM only change the bubble, survive.
    let f = corpus::load("mutation_fixture");
    let fm = mutation::generate_mutants(&f, mutation::DEFAULT_MUTANT_SEED);
    let space = |k: usize| (0..k).map(|_| Event::KeyPress { key: "space".into(), steps: 1 }).collect::<Vec<_>>();
    let mut cfg = SearchConfig::new(Algorithm::Random, Budget::Executions(1), 3);
    cfg.vm.seed = 3;
    let hand = Suite {
        version: suite::SUITE_VERSION,
        project: f.name.clone(),
        project_hash: suite::project_hash(&f),
        seed: 3,
        config: cfg,
        group_size: 2,
        minimized: false,
        total_goals: 0,
        covered: vec![],
        tests: vec![
            SuiteTest { events: space(1), assertions: vec![n_is(1, 1.0)], genotype: vec![], goals: vec![] },
            SuiteTest { events: space(2), assertions: vec![n_is(2, 2.0)], genotype: vec![], goals: vec![] },
        ],
    };
    let r = mutation::analyze(&f, &hand, &fm, &AnalysisConfig::default());
    let ledger = [
        (Operator::KRM, 1, 1),
        (Operator::SBD, 2, 1),
        (Operator::SDM, 1, 1),
        (Operator::AOR, 0, 0),
        (Operator::LOR, 0, 0),
        (Operator::ROR, 2, 0),
        (Operator::NCM, 1, 0),
        (Operator::VRM, 0, 0),
    ];
    for (op, generated, killed) in ledger {
        let row = r.row(op);
        check(
            (row.generated, row.killed) == (generated, killed),
            format!("{op}: generated {} killed {}, ledger {generated}/{killed}", row.generated, row.killed),
        )?;
    }
    check(r.generated == 7 && r.killed == 3 && r.excluded_tests.is_empty(), "fixture totals")?;

    let mut total = 0;
    for (name, p) in corpus::all().into_iter().chain(std::iter::once(("mutation_fixture", f))) {
        for m in mutation::generate_mutants(&p, mutation::DEFAULT_MUTANT_SEED) {
            let l = loci(&p.doc, &m.project.doc);
            let wrapped = l.len() == 1 && l.iter().next().unwrap().starts_with(&m.locus);
            check(wrapped, format!("{name} {}: changed {l:?}", m.id))?;
            total += 1;
        }
    }
    Ok(format!("NCM/SDM all killed in {runs}/20 runs; fixture ledger exact; {total} mutants first-order"))
}

// 9 ------------------------------------------------------------------------

fn fitness_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let projects: Vec<(Project, Graphs)> = corpus::all()
        .into_iter()
        .map(|(_, p)| {
            let g = Graphs::build(&p);
            (p, g)
        })
        .collect();
    let mut goals_checked = 0;
    for _ in 0..10_000 {
        let (p, g) = &projects[rng.random_range(0..projects.len())];
        let gs = fitness::goals(p, g);
        let mut trace = ExecutionTrace::default();
        for goal in &gs {
            if rng.random_bool(0.4) {
                trace.cover(goal.block);
            }
            if rng.random_bool(0.5) {
                trace.record(goal.block, rng.random_range(0.0..100.0), rng.random_range(0.0..100.0));
            }
        }
        for (goal, f) in gs.iter().zip(fitness::evaluate(g, &gs, &trace)) {
            check((f == 0.0) == trace.is_covered(goal.block), format!("{}: f={f}", p.blocks[goal.block].id))?;
            goals_checked += 1;
        }
    }
    let mut xs: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..1e6)).collect();
    xs.sort_by(f64::total_cmp);
    check(xs.windows(2).all(|w| alpha(w[0]) <= alpha(w[1])), "alpha not monotone")?;

    let p = corpus::load("fitness_example");
    let g = Graphs::build(&p);
    let target = g.cfg.block_node(p.block_ix("change").unwrap()).unwrap();
    let f = |x: i64| {
        let trace = run_events(&p, &VmConfig::default(), &[Event::TypeNumber { value: x }]).trace_snapshot();
        Evaluator::new(&g, &trace).fitness(target)
    };
    let (a, b, c) = (f(42), f(55), f(61));
    check(a > b && b > c && c == 0.0, format!("f(42)={a}, f(55)={b}, f(61)={c}"))?;
    Ok(format!("{goals_checked} goals over 10^4 traces; f = {a:.3} > {b:.3} > {c}"))
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let secs = started.elapsed().as_secs_f64();
    match &r {
        Ok(d) => println!("criterion {n} {name}: PASS ({d}) [{secs:.1}s]"),
        Err(d) => println!("criterion {n} {name}: FAIL ({d}) [{secs:.1}s]"),
    }
    r.is_ok()
}

fn main() {
    // `cargo test -- --list` and filters are not meaningful here
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let suites = corpus_suites();
    let results = [
        run(1, "determinism", determinism),
        run(2, "acceleration invariance", acceleration_invariance),
        run(3, "worked examples", worked_examples),
        run(4, "oracle equivalence", oracle_equivalence),
        run(5, "search superiority", search_superiority),
        run(6, "minimization", || minimization(&suites)),
        run(7, "assertion soundness", || assertion_soundness(&suites)),
        run(8, "mutation analysis", mutation_analysis),
        run(9, "fitness properties", fitness_properties),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
