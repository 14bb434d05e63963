//! Test minimization and regression assertions.
//!
//! Assertions record the observable state after each event, but only the
//! properties whose value changed since the previous snapshot.

use crate::encoding::Subject;
use crate::events::{apply_event, Event};
use crate::fitness::Goal;
use crate::project::Project;
use crate::value::Value;
use crate::vm::{self, Bubble, VmConfig, VmState};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const POSITION_TOLERANCE: f64 = 5.0;
pub const DIRECTION_TOLERANCE: f64 = 1.0;

/// Fitness of `targets` after running `events` from a fresh VM.
fn target_fitness(subject: &Subject, vm_cfg: &VmConfig, events: &[Event], targets: &[Goal]) -> Vec<f64> {
    let st = crate::events::run_events(&subject.project, vm_cfg, events);
    let trace = st.trace_snapshot();
    let ev = crate::fitness::Evaluator::new(&subject.graphs, &trace);
    targets.iter().map(|g| ev.fitness(g.node)).collect()
}

/// Drops events from last to first whenever the fitness of every target
/// stays at least as good, repeating passes until nothing more can go. The
/// result is 1-minimal with respect to the targets.
pub fn minimize(subject: &Subject, vm_cfg: &VmConfig, events: &[Event], targets: &[Goal]) -> Vec<Event> {
    let mut kept = events.to_vec();
    let mut best = target_fitness(subject, vm_cfg, &kept, targets);
    loop {
        let mut changed = false;
        let mut i = kept.len();
        while i > 0 {
            i -= 1;
            let mut trial = kept.clone();
            trial.remove(i);
            let f = target_fitness(subject, vm_cfg, &trial, targets);
            if f.iter().zip(&best).all(|(a, b)| a <= b) {
                kept = trial;
                best = f;
                changed = true;
            }
        }
        if !changed {
            return kept;
        }
    }
}

/// True when removing any single event makes some target strictly worse.
pub fn is_one_minimal(subject: &Subject, vm_cfg: &VmConfig, events: &[Event], targets: &[Goal]) -> bool {
    let base = target_fitness(subject, vm_cfg, events, targets);
    (0..events.len()).all(|i| {
        let mut trial = events.to_vec();
        trial.remove(i);
        let f = target_fitness(subject, vm_cfg, &trial, targets);
        f.iter().zip(&base).any(|(a, b)| a > b)
    })
}

/// An actor instance: original sprites have no clone number.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Target {
    pub actor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clone: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AssertionKind {
    Backdrop,
    CloneCount,
    Costume,
    Direction,
    Layer,
    ListLength,
    Position,
    Say,
    Size,
    Touching,
    TouchingEdge,
    Variable,
    Visibility,
    Volume,
}

/// What a property is: the kind, whose it is, and an extra name for
/// variables, lists and the second sprite of Touching.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    kind: AssertionKind,
    target: Target,
    name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Expected {
    Point { x: f64, y: f64 },
    Number(f64),
    Bool(bool),
    Text(String),
    Value(Value),
    Bubble(Option<Bubble>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Assertion {
    /// 0 is the state after the greenflag step, i the state after event i.
    pub position: usize,
    pub kind: AssertionKind,
    pub target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub expected: Expected,
}

impl Assertion {
    fn key(&self) -> Key {
        Key { kind: self.kind, target: self.target.clone(), name: self.name.clone() }
    }

    /// Whether an observed value satisfies the assertion.
    pub fn accepts(&self, actual: Option<&Expected>) -> bool {
        let Some(actual) = actual else { return false };
        match (self.kind, &self.expected, actual) {
            (AssertionKind::Position, Expected::Point { x, y }, Expected::Point { x: ax, y: ay }) => {
                (x - ax).abs() <= POSITION_TOLERANCE && (y - ay).abs() <= POSITION_TOLERANCE
            }
            (AssertionKind::Direction, Expected::Number(d), Expected::Number(a)) => {
                let diff = (d - a).rem_euclid(360.0);
                diff.min(360.0 - diff) <= DIRECTION_TOLERANCE
            }
            (_, e, a) => e == a,
        }
    }
}

/// Every observable property of a state.
fn snapshot(p: &Project, st: &VmState) -> BTreeMap<Key, Expected> {
    let mut out = BTreeMap::new();
    let stage = Target { actor: p.actors[p.stage].name.clone(), clone: None };
    let mut put = |kind, target: &Target, name: Option<&str>, v: Expected| {
        out.insert(Key { kind, target: target.clone(), name: name.map(str::to_string) }, v);
    };
    let backdrop = &st.sprites[p.stage];
    let bd_name = p.actors[p.stage]
        .costumes
        .get(backdrop.costume)
        .map_or_else(|| backdrop.costume.to_string(), |c| c.name.clone());
    put(AssertionKind::Backdrop, &stage, None, Expected::Text(bd_name));
    for (a, actor) in p.actors.iter().enumerate() {
        if actor.is_stage {
            continue;
        }
        let t = Target { actor: actor.name.clone(), clone: None };
        let n = st.sprites.iter().filter(|s| s.alive && s.actor == a && s.clone_no.is_some()).count();
        put(AssertionKind::CloneCount, &t, None, Expected::Number(n as f64));
    }
    for (i, s) in st.sprites.iter().enumerate() {
        if !s.alive {
            continue;
        }
        let actor = &p.actors[s.actor];
        let t = Target { actor: actor.name.clone(), clone: s.clone_no };
        for (name, v) in &s.variables {
            put(AssertionKind::Variable, &t, Some(name), Expected::Value(v.clone()));
        }
        for (name, l) in &s.lists {
            put(AssertionKind::ListLength, &t, Some(name), Expected::Number(l.len() as f64));
        }
        put(AssertionKind::Volume, &t, None, Expected::Number(s.volume));
        if actor.is_stage {
            continue;
        }
        let costume = actor.costumes.get(s.costume).map_or_else(|| s.costume.to_string(), |c| c.name.clone());
        put(AssertionKind::Costume, &t, None, Expected::Text(costume));
        put(AssertionKind::Direction, &t, None, Expected::Number(s.direction));
        put(AssertionKind::Layer, &t, None, Expected::Number(s.layer as f64));
        put(AssertionKind::Position, &t, None, Expected::Point { x: s.x, y: s.y });
        put(AssertionKind::Say, &t, None, Expected::Bubble(s.bubble.clone()));
        put(AssertionKind::Size, &t, None, Expected::Number(s.size));
        put(AssertionKind::Visibility, &t, None, Expected::Bool(s.visible));
        put(AssertionKind::TouchingEdge, &t, None, Expected::Bool(vm::touching_edge(p, st, i)));
        for (b, other) in p.actors.iter().enumerate() {
            if !other.is_stage && b != s.actor {
                let touching = vm::touching_actor(p, st, i, b);
                put(AssertionKind::Touching, &t, Some(&other.name), Expected::Bool(touching));
            }
        }
    }
    out
}

fn diff(position: usize, before: &BTreeMap<Key, Expected>, after: &BTreeMap<Key, Expected>) -> Vec<Assertion> {
    after
        .iter()
        .filter(|(k, v)| before.get(k) != Some(v))
        .map(|(k, v)| Assertion {
            position,
            kind: k.kind,
            target: k.target.clone(),
            name: k.name.clone(),
            expected: v.clone(),
        })
        .collect()
}

/// Runs the events one at a time and asserts every property that changed
/// across each event.
pub fn generate_assertions(p: &Project, vm_cfg: &VmConfig, events: &[Event]) -> Vec<Assertion> {
    let mut st = VmState::new(p, vm_cfg);
    let mut prev = snapshot(p, &st);
    vm::step(p, vm_cfg, &mut st, &[]);
    let mut out = vec![];
    let mut cur = snapshot(p, &st);
    out.extend(diff(0, &prev, &cur));
    for (i, e) in events.iter().enumerate() {
        if st.stopped {
            break;
        }
        apply_event(p, vm_cfg, &mut st, e);
        prev = cur;
        cur = snapshot(p, &st);
        out.extend(diff(i + 1, &prev, &cur));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Failure {
    pub assertion: Assertion,
    pub actual: Option<Expected>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Replay {
    pub passed: usize,
    pub failures: Vec<Failure>,
    pub covered: BTreeSet<String>,
    pub steps: u64,
    /// the step limit was hit before the events were used up
    pub exhausted: bool,
}

impl Replay {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// A test refers to something the project does not have.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MismatchError {
    #[error("unknown sprite `{0}`")]
    Sprite(String),
    #[error("assertion at position {position} past the end of {events} events")]
    Position { position: usize, events: usize },
}

/// Checks that every actor named by events and assertions exists.
pub fn check_compatible(p: &Project, events: &[Event], assertions: &[Assertion]) -> Result<(), MismatchError> {
    let known = |n: &str| p.actor_ix(n).is_some();
    for e in events {
        let names: Vec<&str> = match e {
            Event::ClickSprite { sprite } | Event::MouseMoveTo { sprite } => vec![sprite],
            Event::DragSprite { sprite, target, .. } => match target {
                crate::events::DragTarget::Sprite(t) => vec![sprite, t],
                crate::events::DragTarget::Edge => vec![sprite],
            },
            _ => vec![],
        };
        if let Some(n) = names.into_iter().find(|n| !known(n)) {
            return Err(MismatchError::Sprite(n.to_string()));
        }
    }
    for a in assertions {
        if !known(&a.target.actor) {
            return Err(MismatchError::Sprite(a.target.actor.clone()));
        }
        if let Some(n) = a.name.as_deref().filter(|_| a.kind == AssertionKind::Touching) {
            if !known(n) {
                return Err(MismatchError::Sprite(n.to_string()));
            }
        }
        if a.position > events.len() {
            return Err(MismatchError::Position { position: a.position, events: events.len() });
        }
    }
    Ok(())
}

/// Re-executes the events and checks each assertion at its position. When
/// `max_steps` is reached the remaining events and assertions are skipped.
pub fn replay(p: &Project, vm_cfg: &VmConfig, events: &[Event], assertions: &[Assertion], max_steps: Option<u64>) -> Replay {
    let mut by_pos: BTreeMap<usize, Vec<&Assertion>> = BTreeMap::new();
    for a in assertions {
        by_pos.entry(a.position).or_default().push(a);
    }
    let mut r = Replay { passed: 0, failures: vec![], covered: BTreeSet::new(), steps: 0, exhausted: false };
    let check = |st: &VmState, pos: usize, r: &mut Replay| {
        let Some(list) = by_pos.get(&pos) else { return };
        let snap = snapshot(p, st);
        for a in list {
            let actual = snap.get(&a.key());
            if a.accepts(actual) {
                r.passed += 1;
            } else {
                r.failures.push(Failure { assertion: (*a).clone(), actual: actual.cloned() });
            }
        }
    };
    let mut st = VmState::new(p, vm_cfg);
    vm::step(p, vm_cfg, &mut st, &[]);
    check(&st, 0, &mut r);
    for (i, e) in events.iter().enumerate() {
        if max_steps.is_some_and(|m| st.sc >= m) {
            r.exhausted = true;
            break;
        }
        if !st.stopped {
            apply_event(p, vm_cfg, &mut st, e);
        }
        check(&st, i + 1, &mut r);
    }
    r.covered = st.trace.covered.iter().map(|&b| p.blocks[b].id.clone()).collect();
    r.steps = st.sc;
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::encoding::{decode_and_execute, random_group, EncodingConfig, Genotype};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn goal_of(s: &Subject, id: &str) -> Goal {
        let b = s.project.block_ix(id).unwrap();
        *s.goals.iter().find(|g| g.block == b).unwrap()
    }

    #[test]
    fn trailing_waits_are_dropped() {
        let s = Subject::new(corpus::load("goto_micro"));
        let events = vec![
            Event::KeyPress { key: "space".into(), steps: 1 },
            Event::Wait { steps: 5 },
            Event::Wait { steps: 7 },
        ];
        let target = goal_of(&s, "gotoXY1");
        let m = minimize(&s, &VmConfig::default(), &events, &[target]);
        assert_eq!(m, events[..1]);
    }

    #[test]
    fn single_event_is_unchanged() {
        let s = Subject::new(corpus::load("goto_micro"));
        let events = vec![Event::KeyPress { key: "space".into(), steps: 1 }];
        let m = minimize(&s, &VmConfig::default(), &events, &[goal_of(&s, "gotoXY1")]);
        assert_eq!(m, events);
    }

    #[test]
    fn still_sprite_has_no_position_assertions() {
        let p = corpus::load("goto_micro");
        let a = generate_assertions(&p, &VmConfig::default(), &[Event::Wait { steps: 3 }]);
        assert!(a.iter().all(|a| a.kind != AssertionKind::Position));
    }

    #[test]
    fn goto_gives_one_position_assertion() {
        let p = corpus::load("goto_micro");
        let events = [Event::KeyPress { key: "space".into(), steps: 1 }];
        let a = generate_assertions(&p, &VmConfig::default(), &events);
        let pos: Vec<_> = a.iter().filter(|a| a.kind == AssertionKind::Position).collect();
        assert_eq!(pos.len(), 1);
        assert_eq!(pos[0].position, 1);
        assert_eq!(pos[0].expected, Expected::Point { x: 10.0, y: 20.0 });
    }

    #[test]
    fn tolerances() {
        let t = Target { actor: "Sprite".into(), clone: None };
        let a = Assertion {
            position: 0,
            kind: AssertionKind::Position,
            target: t.clone(),
            name: None,
            expected: Expected::Point { x: 10.0, y: 20.0 },
        };
        assert!(a.accepts(Some(&Expected::Point { x: 15.0, y: 15.0 })));
        assert!(!a.accepts(Some(&Expected::Point { x: 15.5, y: 20.0 })));
        assert!(!a.accepts(None));
        let d = Assertion { kind: AssertionKind::Direction, expected: Expected::Number(180.0), ..a.clone() };
        assert!(d.accepts(Some(&Expected::Number(-179.5))));
        assert!(!d.accepts(Some(&Expected::Number(178.0))));
        let s = Assertion { kind: AssertionKind::Size, expected: Expected::Number(100.0), ..a };
        assert!(!s.accepts(Some(&Expected::Number(100.5))));
    }

    #[test]
    fn mismatch_is_reported() {
        let p = corpus::load("goto_micro");
        let e = [Event::ClickSprite { sprite: "Ghost".into() }];
        assert_eq!(check_compatible(&p, &e, &[]), Err(MismatchError::Sprite("Ghost".into())));
    }

    #[test]
    fn moved_sprite_fails_replay() {
        let p = corpus::load("goto_micro");
        let cfg = VmConfig::default();
        let events = [Event::KeyPress { key: "space".into(), steps: 1 }];
        let mut a = generate_assertions(&p, &cfg, &events);
        assert!(replay(&p, &cfg, &events, &a, None).ok());
        for x in &mut a {
            if let Expected::Point { x, .. } = &mut x.expected {
                *x += 6.0;
            }
        }
        assert_eq!(replay(&p, &cfg, &events, &a, None).failures.len(), 1);
    }

    fn random_events(name: &str, seed: u64, groups: usize) -> (Subject, Vec<Event>) {
        let s = Subject::new(corpus::load(name));
        let enc = EncodingConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let codons: Vec<u32> = (0..groups).flat_map(|_| random_group(&mut rng, s.group_size)).collect();
        let g = Genotype::new(codons, s.group_size);
        let t = decode_and_execute(&s, &g, &VmConfig::with_seed(seed), &enc);
        (s, t.events)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn minimized_tests_are_one_minimal(seed in 0u64..1000, project in 0usize..3) {
            let name = ["cat_bear", "elephant", "quiz"][project];
            let (s, events) = random_events(name, seed, 6);
            let cfg = VmConfig::with_seed(seed);
            let st = crate::events::run_events(&s.project, &cfg, &events);
            let targets: Vec<Goal> = s.goals.iter().copied().filter(|g| st.trace.is_covered(g.block)).collect();
            let m = minimize(&s, &cfg, &events, &targets);
            prop_assert!(is_one_minimal(&s, &cfg, &m, &targets));
            let after = crate::events::run_events(&s.project, &cfg, &m);
            prop_assert!(targets.iter().all(|g| after.trace.is_covered(g.block)));
        }

        #[test]
        fn assertions_are_sound(seed in 0u64..1000, project in 0..corpus::CORPUS.len()) {
            let (s, events) = random_events(corpus::CORPUS[project].0, seed, 5);
            let cfg = VmConfig::with_seed(seed);
            let a = generate_assertions(&s.project, &cfg, &events);
            let r = replay(&s.project, &cfg, &events, &a, None);
            prop_assert!(r.ok(), "{:?}", r.failures);
            prop_assert_eq!(r.passed, a.len());
        }

        #[test]
        fn assertions_match_independent_diffs(seed in 0u64..1000, project in 0..corpus::CORPUS.len()) {
            let (s, events) = random_events(corpus::CORPUS[project].0, seed, 5);
            let cfg = VmConfig::with_seed(seed);
            let a = generate_assertions(&s.project, &cfg, &events);
            // recount changes from whole-state snapshots taken separately
            let mut st = VmState::new(&s.project, &cfg);
            let mut states = vec![st.clone()];
            vm::step(&s.project, &cfg, &mut st, &[]);
            states.push(st.clone());
            for e in &events {
                if st.stopped { break; }
                apply_event(&s.project, &cfg, &mut st, e);
                states.push(st.clone());
            }
            let mut bound = 0;
            for w in states.windows(2) {
                bound += changed_properties(&s.project, &w[0], &w[1]);
            }
            prop_assert!(a.len() <= bound, "{} > {}", a.len(), bound);
            let position_changes: usize = states.windows(2).map(|w| moved_sprites(&s.project, &w[0], &w[1])).sum();
            let positions = a.iter().filter(|a| a.kind == AssertionKind::Position).count();
            prop_assert_eq!(positions, position_changes);
        }
    }

    fn moved_sprites(p: &Project, a: &VmState, b: &VmState) -> usize {
        b.sprites
            .iter()
            .enumerate()
            .filter(|(_, s)| s.alive && !p.actors[s.actor].is_stage)
            .filter(|(i, s)| a.sprites.get(*i).filter(|o| o.alive).is_none_or(|o| (o.x, o.y) != (s.x, s.y)))
            .count()
    }

    /// Upper bound on property changes between two states: every field of
    /// every instance that differs, plus every pair that could start or
    /// stop touching.
    fn changed_properties(p: &Project, a: &VmState, b: &VmState) -> usize {
        let sprite_actors = p.actors.iter().filter(|x| !x.is_stage).count();
        let mut n = 2 + sprite_actors; // backdrop, clone counts
        for (i, s) in b.sprites.iter().enumerate().filter(|(_, s)| s.alive) {
            match a.sprites.get(i).filter(|o| o.alive) {
                None => n += 9 + s.variables.len() + s.lists.len() + sprite_actors,
                Some(o) => {
                    n += [
                        o.x != s.x || o.y != s.y,
                        o.direction != s.direction,
                        o.size != s.size,
                        o.visible != s.visible,
                        o.costume != s.costume,
                        o.volume != s.volume,
                        o.layer != s.layer,
                        o.bubble != s.bubble,
                    ]
                    .iter()
                    .filter(|&&c| c)
                    .count();
                    n += s.variables.iter().filter(|(k, v)| o.variables.get(*k) != Some(v)).count();
                    n += s.lists.iter().filter(|(k, v)| o.lists.get(*k).map(Vec::len) != Some(v.len())).count();
                    // touching can change whenever anything moves
                    n += 1 + sprite_actors;
                }
            }
        }
        n
    }
}
