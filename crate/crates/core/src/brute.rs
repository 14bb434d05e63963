//! Exhaustive enumeration of short event sequences: the set of blocks any
//! of them reaches. Used as an oracle for search coverage on small projects.

use crate::events::{self, Event, EventSpec, TYPE_NUMBER_RANGE};
use crate::project::{Arg, BlockIx, Project};
use crate::vm::{self, VmConfig, VmState};
use rayon::prelude::*;
use std::collections::BTreeSet;

pub const DEFAULT_MAX_LEN: usize = 4;
pub const MAX_LEN: usize = 5;
/// Enumerations estimated above this many executions are refused.
pub const MAX_EXECUTIONS: f64 = 2e7;
const DURATIONS: [u64; 2] = [1, 10];

fn numeric_literals(p: &Project) -> BTreeSet<i64> {
    let mut out = BTreeSet::new();
    for b in &p.blocks {
        for a in &b.args {
            if let Arg::Lit(v) = a {
                if let Some(x) = v.as_comparable_number() {
                    if x.fract() == 0.0 && x.abs() <= TYPE_NUMBER_RANGE as f64 {
                        out.insert(x as i64);
                    }
                }
            }
        }
    }
    out
}

/// Concrete parameter choices for one extracted event.
pub fn parameter_grid(p: &Project, state: &VmState, spec: &EventSpec) -> Vec<Event> {
    match spec {
        EventSpec::KeyPress { key } => {
            DURATIONS.iter().map(|&steps| Event::KeyPress { key: key.clone(), steps }).collect()
        }
        EventSpec::Wait => DURATIONS.iter().map(|&steps| Event::Wait { steps }).collect(),
        EventSpec::ClickSprite { sprite } => vec![Event::ClickSprite { sprite: sprite.clone() }],
        EventSpec::ClickStage => vec![Event::ClickStage],
        EventSpec::TypeText => events::text_pool(p, &state.random_text)
            .into_iter()
            .map(|text| Event::TypeText { text })
            .collect(),
        EventSpec::TypeNumber => {
            let mut values = BTreeSet::from([0]);
            for k in numeric_literals(p) {
                for v in [k - 1, k, k + 1] {
                    if v.abs() <= TYPE_NUMBER_RANGE {
                        values.insert(v);
                    }
                }
            }
            values.into_iter().map(|value| Event::TypeNumber { value }).collect()
        }
        EventSpec::MouseDown { down } => vec![Event::MouseDown { down: *down }],
        EventSpec::MouseMove => {
            let mut points = vec![(0.0, 0.0)];
            for s in state.sprites.iter().filter(|s| s.alive) {
                if !points.contains(&(s.x, s.y)) {
                    points.push((s.x, s.y));
                }
            }
            points.into_iter().map(|(x, y)| Event::MouseMove { x, y }).collect()
        }
        EventSpec::MouseMoveTo { sprite } => vec![Event::MouseMoveTo { sprite: sprite.clone() }],
        EventSpec::DragSprite { sprite, target } => [360, 0]
            .into_iter()
            .map(|angle| Event::DragSprite { sprite: sprite.clone(), target: target.clone(), angle })
            .collect(),
        EventSpec::Sound { volume } => vec![Event::Sound { volume: *volume, steps: events::SOUND_STEPS }],
    }
}

fn explore(p: &Project, cfg: &VmConfig, state: &VmState, depth: usize, out: &mut BTreeSet<BlockIx>) {
    out.extend(state.trace.covered.iter().copied());
    if depth == 0 || state.stopped {
        return;
    }
    for spec in events::dynamic_extract(state, p) {
        for e in parameter_grid(p, state, &spec) {
            let mut next = state.clone();
            events::apply_event(p, cfg, &mut next, &e);
            explore(p, cfg, &next, depth - 1, out);
        }
    }
}

/// Upper estimate of executed sequences: each step can choose any
/// statically extracted event with any of its grid parameters.
pub fn estimate(p: &Project, cfg: &VmConfig, max_len: usize) -> f64 {
    let st = VmState::new(p, cfg);
    let b: usize = events::static_extract(p).iter().map(|s| parameter_grid(p, &st, s).len()).sum();
    (1..=max_len).map(|i| (b as f64).powi(i as i32)).sum()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BruteError {
    #[error("max length {0} exceeds the limit of {MAX_LEN}")]
    TooLong(usize),
    #[error("about {0:.3e} executions needed, refusing (limit {MAX_EXECUTIONS:.0e})")]
    TooMany(f64),
}

/// [`reachable`] after checking the length and the size estimate.
pub fn reachable_checked(p: &Project, cfg: &VmConfig, max_len: usize) -> Result<BTreeSet<BlockIx>, BruteError> {
    if max_len > MAX_LEN {
        return Err(BruteError::TooLong(max_len));
    }
    let n = estimate(p, cfg, max_len);
    if n > MAX_EXECUTIONS {
        return Err(BruteError::TooMany(n));
    }
    Ok(reachable(p, cfg, max_len))
}

/// Blocks covered by at least one event sequence of length at most
/// `max_len` (greenflag step first), choosing parameters from a small grid.
pub fn reachable(p: &Project, cfg: &VmConfig, max_len: usize) -> BTreeSet<BlockIx> {
    let mut root = VmState::new(p, cfg);
    vm::step(p, cfg, &mut root, &[]);
    let mut out: BTreeSet<BlockIx> = root.trace.covered.clone();
    if max_len == 0 || root.stopped {
        return out;
    }
    let firsts: Vec<Event> = events::dynamic_extract(&root, p)
        .iter()
        .flat_map(|spec| parameter_grid(p, &root, spec))
        .collect();
    let parts: Vec<BTreeSet<BlockIx>> = firsts
        .par_iter()
        .map(|e| {
            let mut s = root.clone();
            events::apply_event(p, cfg, &mut s, e);
            let mut acc = BTreeSet::new();
            explore(p, cfg, &s, max_len - 1, &mut acc);
            acc
        })
        .collect();
    for part in parts {
        out.extend(part);
    }
    out
}
