//! Test-suite documents: generation output, replay input.

use crate::encoding::{Subject, TestCase};
use crate::events::Event;
use crate::fitness::Goal;
use crate::postprocess::{self, Assertion, MismatchError, Replay};
use crate::project::Project;
use crate::search::{SearchConfig, SearchResult};
use crate::vm::{hex_digest, VmConfig};
use serde::{Deserialize, Serialize};

pub const SUITE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SuiteTest {
    pub events: Vec<Event>,
    pub assertions: Vec<Assertion>,
    /// codons as found by the search, before minimization
    pub genotype: Vec<u32>,
    /// ids of the goal blocks this test is kept for
    pub goals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Suite {
    pub version: u32,
    pub project: String,
    /// SHA-256 of the project document the suite was generated on
    pub project_hash: String,
    pub seed: u64,
    pub config: SearchConfig,
    pub group_size: usize,
    pub minimized: bool,
    pub total_goals: usize,
    pub covered: Vec<String>,
    pub tests: Vec<SuiteTest>,
}

impl Suite {
    pub fn coverage(&self) -> f64 {
        if self.total_goals == 0 {
            1.0
        } else {
            self.covered.len() as f64 / self.total_goals as f64
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Suite, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn vm_config(&self) -> VmConfig {
        self.config.vm
    }
}

pub fn project_hash(p: &Project) -> String {
    hex_digest(p.doc.to_json().as_bytes())
}

/// For each covered goal, the test kept for it: the one with the fewest
/// events, earliest on ties. Returns goal indices per test.
pub fn attribute_goals(suite: &[TestCase], goal_count: usize) -> Vec<Vec<usize>> {
    let mut per_test = vec![vec![]; suite.len()];
    for k in 0..goal_count {
        let best = suite
            .iter()
            .enumerate()
            .filter(|(_, t)| t.covers(k))
            .min_by_key(|(i, t)| (t.events.len(), *i));
        if let Some((i, _)) = best {
            per_test[i].push(k);
        }
    }
    per_test
}

/// Turns a search result into a suite: every test that is kept for some
/// goal is optionally minimized against those goals, then annotated.
pub fn build(subject: &Subject, cfg: &SearchConfig, result: &SearchResult, minimize: bool) -> Suite {
    let p = &subject.project;
    let attribution = attribute_goals(&result.suite, subject.goals.len());
    let mut tests = vec![];
    for (t, goal_ixs) in result.suite.iter().zip(attribution) {
        if goal_ixs.is_empty() {
            continue;
        }
        let targets: Vec<Goal> = goal_ixs.iter().map(|&k| subject.goals[k]).collect();
        let events = if minimize {
            postprocess::minimize(subject, &cfg.vm, &t.events, &targets)
        } else {
            t.events.clone()
        };
        let assertions = postprocess::generate_assertions(p, &cfg.vm, &events);
        tests.push(SuiteTest {
            events,
            assertions,
            genotype: t.genotype.codons.clone(),
            goals: targets.iter().map(|g| p.blocks[g.block].id.clone()).collect(),
        });
    }
    Suite {
        version: SUITE_VERSION,
        project: p.name.clone(),
        project_hash: project_hash(p),
        seed: cfg.seed,
        config: *cfg,
        group_size: subject.group_size,
        minimized: minimize,
        total_goals: subject.goals.len(),
        covered: result.covered.iter().map(|&b| p.blocks[b].id.clone()).collect(),
        tests,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SuiteReplay {
    /// false when replayed with a seed other than the generation seed; the
    /// results are then advisory only
    pub canonical: bool,
    pub seed: u64,
    pub tests: Vec<Replay>,
}

impl SuiteReplay {
    pub fn failures(&self) -> usize {
        self.tests.iter().map(|t| t.failures.len()).sum()
    }

    pub fn passed(&self) -> usize {
        self.tests.iter().map(|t| t.passed).sum()
    }
}

/// Replays every test of a suite, with the stored seed unless another one
/// is given.
pub fn replay(p: &Project, suite: &Suite, seed: Option<u64>) -> Result<SuiteReplay, MismatchError> {
    for t in &suite.tests {
        postprocess::check_compatible(p, &t.events, &t.assertions)?;
    }
    let seed = seed.unwrap_or(suite.seed);
    let vm = VmConfig { seed, ..suite.vm_config() };
    let tests = suite.tests.iter().map(|t| postprocess::replay(p, &vm, &t.events, &t.assertions, None)).collect();
    Ok(SuiteReplay { canonical: seed == suite.seed, seed, tests })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::search::{self, Algorithm, Budget};

    fn generated(name: &str, alg: Algorithm, minimize: bool) -> (Subject, Suite) {
        let s = Subject::new(corpus::load(name));
        let cfg = SearchConfig::new(alg, Budget::Executions(300), 7);
        let r = search::run(&s, &cfg);
        let suite = build(&s, &cfg, &r, minimize);
        (s, suite)
    }

    #[test]
    fn round_trip_and_replay() {
        let (s, suite) = generated("cat_bear", Algorithm::Mio, true);
        let back = Suite::from_json(&suite.to_json()).unwrap();
        assert_eq!(back, suite);
        let r = replay(&s.project, &back, None).unwrap();
        assert!(r.canonical);
        assert_eq!(r.failures(), 0);
        assert!(r.passed() > 0);
        assert!(!replay(&s.project, &back, Some(99)).unwrap().canonical);
    }

    #[test]
    fn minimization_keeps_coverage() {
        let (s, suite) = generated("elephant", Algorithm::Random, true);
        let r = replay(&s.project, &suite, None).unwrap();
        for (t, rep) in suite.tests.iter().zip(&r.tests) {
            for g in &t.goals {
                assert!(rep.covered.contains(g), "{g} lost");
            }
        }
        let all: std::collections::BTreeSet<_> = r.tests.iter().flat_map(|t| t.covered.iter().cloned()).collect();
        assert!(suite.covered.iter().all(|c| all.contains(c)));
    }

    #[test]
    fn attribution_prefers_short_tests() {
        let (s, _) = generated("trivial", Algorithm::Random, false);
        let cfg = SearchConfig::new(Algorithm::Random, Budget::Executions(50), 1);
        let r = search::run(&s, &cfg);
        let mut suite = r.suite.clone();
        let mut longer = suite[0].clone();
        longer.events.push(Event::Wait { steps: 1 });
        suite.insert(0, longer);
        let a = attribute_goals(&suite, s.goals.len());
        assert!(a[0].is_empty());
        assert!(!a[1].is_empty());
    }
}
