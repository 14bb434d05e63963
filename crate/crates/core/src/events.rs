//! Input events: which ones make sense for a program, how their parameters
//! are resolved, and how they turn into VM steps.

use crate::project::{Arg, BlockIx, Opcode, Project, ScriptIx, MOUSE_POINTER};
use crate::vm::{self, StepInput, VmConfig, VmState};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Duration of a simulated sound, in steps.
pub const SOUND_STEPS: u64 = 10;
pub const TYPE_NUMBER_RANGE: i64 = 100;
pub const FIXED_TEXTS: [&str; 3] = ["0", "10", "Hello"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Greenflag,
    KeyPress,
    ClickSprite,
    ClickStage,
    TypeText,
    TypeNumber,
    MouseDown,
    MouseMove,
    MouseMoveTo,
    DragSprite,
    Sound,
    Wait,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DragTarget {
    Sprite(String),
    Edge,
}

/// An event with its inferable parameters fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EventSpec {
    KeyPress { key: String },
    ClickSprite { sprite: String },
    ClickStage,
    TypeText,
    TypeNumber,
    MouseDown { down: bool },
    MouseMove,
    MouseMoveTo { sprite: String },
    DragSprite { sprite: String, target: DragTarget },
    Sound { volume: f64 },
    Wait,
}

impl EventSpec {
    pub fn kind(&self) -> EventKind {
        match self {
            EventSpec::KeyPress { .. } => EventKind::KeyPress,
            EventSpec::ClickSprite { .. } => EventKind::ClickSprite,
            EventSpec::ClickStage => EventKind::ClickStage,
            EventSpec::TypeText => EventKind::TypeText,
            EventSpec::TypeNumber => EventKind::TypeNumber,
            EventSpec::MouseDown { .. } => EventKind::MouseDown,
            EventSpec::MouseMove => EventKind::MouseMove,
            EventSpec::MouseMoveTo { .. } => EventKind::MouseMoveTo,
            EventSpec::DragSprite { .. } => EventKind::DragSprite,
            EventSpec::Sound { .. } => EventKind::Sound,
            EventSpec::Wait => EventKind::Wait,
        }
    }

    /// Parameters that cannot be inferred and are read from codons.
    pub fn open_param_count(&self) -> usize {
        match self {
            EventSpec::KeyPress { .. }
            | EventSpec::TypeNumber
            | EventSpec::DragSprite { .. }
            | EventSpec::Wait => 1,
            EventSpec::MouseMove => 2,
            _ => 0,
        }
    }
}

/// An event ready to execute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "camelCase")]
pub enum Event {
    KeyPress { key: String, steps: u64 },
    ClickSprite { sprite: String },
    ClickStage,
    TypeText { text: String },
    TypeNumber { value: i64 },
    MouseDown { down: bool },
    MouseMove { x: f64, y: f64 },
    MouseMoveTo { sprite: String },
    DragSprite { sprite: String, target: DragTarget, angle: u32 },
    Sound { volume: f64, steps: u64 },
    Wait { steps: u64 },
}

impl Event {
    pub fn kind(&self) -> EventKind {
        match self {
            Event::KeyPress { .. } => EventKind::KeyPress,
            Event::ClickSprite { .. } => EventKind::ClickSprite,
            Event::ClickStage => EventKind::ClickStage,
            Event::TypeText { .. } => EventKind::TypeText,
            Event::TypeNumber { .. } => EventKind::TypeNumber,
            Event::MouseDown { .. } => EventKind::MouseDown,
            Event::MouseMove { .. } => EventKind::MouseMove,
            Event::MouseMoveTo { .. } => EventKind::MouseMoveTo,
            Event::DragSprite { .. } => EventKind::DragSprite,
            Event::Sound { .. } => EventKind::Sound,
            Event::Wait { .. } => EventKind::Wait,
        }
    }
}

/// Parameter bounds that come from user configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EventBounds {
    pub key_press_steps: u32,
    pub wait_steps: u32,
}

impl Default for EventBounds {
    fn default() -> Self {
        EventBounds { key_press_steps: 50, wait_steps: 50 }
    }
}

fn push_unique(out: &mut Vec<EventSpec>, e: EventSpec) {
    if !out.contains(&e) {
        out.push(e);
    }
}

fn is_mouse(b: &crate::project::Block) -> bool {
    b.lit(0).as_deref() == Some(MOUSE_POINTER)
}

/// Events suggested by one block, in table order.
fn block_events(p: &Project, b: BlockIx, ask_numeric: &BTreeSet<ScriptIx>, out: &mut Vec<EventSpec>) {
    let blk = &p.blocks[b];
    let actor = &p.actors[p.actor_of_block(b)];
    match blk.opcode {
        Opcode::KeyPressed | Opcode::KeyPressedQ => {
            let key = vm::normalize_key(&blk.lit(0).unwrap_or_default());
            push_unique(out, EventSpec::KeyPress { key });
        }
        Opcode::SpriteClicked if !actor.is_stage => {
            push_unique(out, EventSpec::ClickSprite { sprite: actor.name.clone() })
        }
        Opcode::StageClicked => push_unique(out, EventSpec::ClickStage),
        Opcode::AskAndWait => {
            if ask_numeric.contains(&blk.script) {
                push_unique(out, EventSpec::TypeNumber)
            } else {
                push_unique(out, EventSpec::TypeText)
            }
        }
        Opcode::MouseDown => push_unique(out, EventSpec::MouseDown { down: true }),
        Opcode::MouseX | Opcode::MouseY => push_unique(out, EventSpec::MouseMove),
        Opcode::DistanceTo | Opcode::PointTowards if is_mouse(blk) => push_unique(out, EventSpec::MouseMove),
        Opcode::TouchingMousePointer if !actor.is_stage => {
            push_unique(out, EventSpec::MouseMoveTo { sprite: actor.name.clone() });
            push_unique(out, EventSpec::MouseMove);
        }
        Opcode::TouchingSprite if !actor.is_stage => {
            let target = DragTarget::Sprite(blk.lit(0).unwrap_or_default());
            push_unique(out, EventSpec::DragSprite { sprite: actor.name.clone(), target });
        }
        Opcode::TouchingEdge if !actor.is_stage => {
            push_unique(out, EventSpec::DragSprite { sprite: actor.name.clone(), target: DragTarget::Edge });
        }
        Opcode::Loudness | Opcode::LoudnessGreaterThan => {
            push_unique(out, EventSpec::Sound { volume: sound_volume(p) })
        }
        _ => {}
    }
}

/// Volume for simulated sounds: just above the largest literal threshold
/// the program compares loudness with.
pub fn sound_volume(p: &Project) -> f64 {
    let mut best: Option<f64> = None;
    let mut note = |v: &Arg| {
        if let Arg::Lit(v) = v {
            if let Some(x) = v.as_comparable_number() {
                best = Some(best.map_or(x, |b: f64| b.max(x)));
            }
        }
    };
    for blk in &p.blocks {
        match blk.opcode {
            Opcode::LoudnessGreaterThan => note(&blk.args[0]),
            Opcode::Lt | Opcode::Gt | Opcode::Equals => {
                for (i, a) in blk.args.iter().enumerate() {
                    if let Arg::Block(c) = a {
                        if p.blocks[*c].opcode == Opcode::Loudness {
                            note(&blk.args[1 - i]);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    match best {
        Some(t) => (t + 1.0).clamp(0.0, 100.0),
        None => 100.0,
    }
}

fn is_answer(p: &Project, a: &Arg) -> bool {
    matches!(a, Arg::Block(c) if p.blocks[*c].opcode == Opcode::Answer)
}

/// Variables assigned straight from `answer`.
fn answer_vars(p: &Project) -> BTreeSet<String> {
    p.blocks
        .iter()
        .filter(|b| b.opcode == Opcode::SetVariable && is_answer(p, &b.args[1]))
        .filter_map(|b| b.lit(0))
        .collect()
}

fn answer_like(p: &Project, vars: &BTreeSet<String>, a: &Arg) -> bool {
    is_answer(p, a) || matches!(a, Arg::Var(v) if vars.contains(v))
}

/// Scripts whose answers are used as numbers: as an arithmetic or ordering
/// operand, or compared for equality with a numeric literal.
fn numeric_answer_scripts(p: &Project) -> BTreeSet<ScriptIx> {
    let vars = answer_vars(p);
    let mut out = BTreeSet::new();
    for blk in &p.blocks {
        let numeric = match blk.opcode {
            Opcode::Add
            | Opcode::Subtract
            | Opcode::Multiply
            | Opcode::Divide
            | Opcode::Mod
            | Opcode::Lt
            | Opcode::Gt => blk.args.iter().any(|a| answer_like(p, &vars, a)),
            Opcode::Equals => (0..2).any(|i| {
                answer_like(p, &vars, &blk.args[i])
                    && matches!(&blk.args[1 - i], Arg::Lit(v) if v.as_comparable_number().is_some())
            }),
            _ => false,
        };
        if numeric {
            out.insert(blk.script);
        }
    }
    if out.is_empty() {
        return out;
    }
    // a comparison through a variable counts for every script that fills it
    let mut result = out.clone();
    for blk in &p.blocks {
        if blk.opcode == Opcode::SetVariable && is_answer(p, &blk.args[1]) {
            result.insert(blk.script);
        }
    }
    result.retain(|&s| p.script_preorder(s).iter().any(|&b| p.blocks[b].opcode == Opcode::AskAndWait));
    result
}

/// Strings offered to text prompts: literals compared with the answer,
/// the per-seed random text, and a few fixed values.
pub fn text_pool(p: &Project, random_text: &str) -> Vec<String> {
    let vars = answer_vars(p);
    let mut pool: Vec<String> = vec![];
    for blk in &p.blocks {
        if blk.opcode != Opcode::Equals {
            continue;
        }
        for i in 0..2 {
            if answer_like(p, &vars, &blk.args[i]) {
                if let Arg::Lit(v) = &blk.args[1 - i] {
                    let t = v.to_text();
                    if !pool.contains(&t) {
                        pool.push(t);
                    }
                }
            }
        }
    }
    for t in std::iter::once(random_text).chain(FIXED_TEXTS) {
        if !pool.iter().any(|x| x == t) {
            pool.push(t.to_string());
        }
    }
    pool
}

/// Every event the program could react to; Wait first.
pub fn static_extract(p: &Project) -> Vec<EventSpec> {
    let numeric = numeric_answer_scripts(p);
    let mut out = vec![EventSpec::Wait];
    for s in p.scripts_in_order() {
        for b in p.script_preorder(s) {
            block_events(p, b, &numeric, &mut out);
        }
    }
    out
}

/// Events that make sense in the current state: sensing blocks of active
/// scripts and hats of inactive ones. A pending text prompt narrows the set
/// to typing or waiting.
pub fn dynamic_extract(state: &VmState, p: &Project) -> Vec<EventSpec> {
    let numeric = numeric_answer_scripts(p);
    let active = state.active_scripts();
    let mut found = vec![];
    for s in p.scripts_in_order() {
        if active.contains(&s) {
            for b in p.script_preorder(s) {
                if !p.blocks[b].opcode.is_hat() {
                    block_events(p, b, &numeric, &mut found);
                }
            }
        } else if let Some(h) = p.scripts[s].hat {
            if p.blocks[h].opcode.is_user_input_hat() {
                block_events(p, h, &numeric, &mut found);
            }
        }
    }
    for e in found.iter_mut() {
        if let EventSpec::MouseDown { down } = e {
            *down = !state.input.mouse_down;
        }
    }
    if found.contains(&EventSpec::TypeText) {
        return vec![EventSpec::TypeText, EventSpec::Wait];
    }
    if found.contains(&EventSpec::TypeNumber) {
        return vec![EventSpec::TypeNumber, EventSpec::Wait];
    }
    let mut out = vec![EventSpec::Wait];
    out.extend(found);
    out
}

/// Fills in open parameters from the reserved codons of a group. `params`
/// holds every reserved codon of the group; unused ones are ignored.
pub fn resolve(spec: &EventSpec, params: &[u32], p: &Project, state: &VmState, bounds: &EventBounds) -> Event {
    let c = |i: usize| params.get(i).copied().unwrap_or(0);
    match spec {
        EventSpec::KeyPress { key } => {
            Event::KeyPress { key: key.clone(), steps: (c(0) % bounds.key_press_steps.max(1)) as u64 }
        }
        EventSpec::ClickSprite { sprite } => Event::ClickSprite { sprite: sprite.clone() },
        EventSpec::ClickStage => Event::ClickStage,
        EventSpec::TypeText => {
            let pool = text_pool(p, &state.random_text);
            Event::TypeText { text: pool[c(0) as usize % pool.len()].clone() }
        }
        EventSpec::TypeNumber => {
            let span = 2 * TYPE_NUMBER_RANGE as u32 + 1;
            Event::TypeNumber { value: (c(0) % span) as i64 - TYPE_NUMBER_RANGE }
        }
        EventSpec::MouseDown { down } => Event::MouseDown { down: *down },
        EventSpec::MouseMove => {
            let (w, h) = (p.stage_width, p.stage_height);
            let x = (c(0) as f64 % w) - w / 2.0;
            let y = (c(1) as f64 % h) - h / 2.0;
            Event::MouseMove { x, y }
        }
        EventSpec::MouseMoveTo { sprite } => Event::MouseMoveTo { sprite: sprite.clone() },
        EventSpec::DragSprite { sprite, target } => {
            Event::DragSprite { sprite: sprite.clone(), target: target.clone(), angle: c(0) }
        }
        EventSpec::Sound { volume } => Event::Sound { volume: *volume, steps: SOUND_STEPS },
        EventSpec::Wait => Event::Wait { steps: (c(0) % bounds.wait_steps.max(1)) as u64 },
    }
}

/// Clickable instance of a sprite: the original if visible, else the first
/// visible clone.
fn visible_instance(p: &Project, state: &VmState, sprite: &str) -> Option<usize> {
    let a = p.actor_ix(sprite)?;
    let mut it = state.instances_of(a).filter(|&i| state.sprites[i].visible);
    it.next()
}

fn drag_destination(p: &Project, state: &mut VmState, me: usize, target: &DragTarget, angle: u32) -> Option<(f64, f64)> {
    let (w, h) = (p.stage_width, p.stage_height);
    let s = &state.sprites[me];
    let (mut x, mut y, hor, vert) = match target {
        DragTarget::Sprite(name) => {
            let a = p.actor_ix(name)?;
            let t = state.instances_of(a).find(|&i| i != me)?;
            let t = &state.sprites[t];
            let c = &p.actors[t.actor].costumes[t.costume];
            (t.x, t.y, c.width * t.size / 100.0, c.height * t.size / 100.0)
        }
        DragTarget::Edge => {
            let c = &p.actors[s.actor].costumes[s.costume];
            let (sx, sy) = (s.x, s.y);
            let (hw, hh) = (c.width * s.size / 100.0, c.height * s.size / 100.0);
            let (x, y) = match state.rng.random_range(0..4u8) {
                0 => (-w / 2.0, sy),
                1 => (w / 2.0, sy),
                2 => (sx, -h / 2.0),
                _ => (sx, h / 2.0),
            };
            (x, y, hw, hh)
        }
    };
    if angle < 360 {
        let r = (angle as f64).to_radians();
        x += hor * r.cos();
        y += vert * r.sin();
    }
    Some((x, y))
}

/// Executes one event, returning the number of steps it took. Steps stop
/// early once the program has stopped.
pub fn apply_event(p: &Project, cfg: &VmConfig, state: &mut VmState, e: &Event) -> u64 {
    let start = state.sc;
    let one = |state: &mut VmState, inputs: &[StepInput]| {
        if !state.stopped {
            vm::step(p, cfg, state, inputs);
        }
    };
    match e {
        Event::KeyPress { key, steps } => {
            one(state, &[StepInput::KeyDown(key.clone())]);
            vm::run_steps(p, cfg, state, steps.max(&1) - 1);
            state.release_key(key);
        }
        Event::ClickSprite { sprite } => match visible_instance(p, state, sprite) {
            Some(i) => one(state, &[StepInput::ClickSprite(i)]),
            None => one(state, &[]),
        },
        Event::ClickStage => one(state, &[StepInput::ClickStage]),
        Event::TypeText { text } => {
            let inputs = if state.ask_focus() { vec![StepInput::Answer(text.clone())] } else { vec![] };
            one(state, &inputs);
        }
        Event::TypeNumber { value } => {
            let inputs = if state.ask_focus() { vec![StepInput::Answer(value.to_string())] } else { vec![] };
            one(state, &inputs);
        }
        Event::MouseDown { down } => one(state, &[StepInput::MouseButton(*down)]),
        Event::MouseMove { x, y } => one(state, &[StepInput::MouseMove { x: *x, y: *y }]),
        Event::MouseMoveTo { sprite } => {
            let pos = p
                .actor_ix(sprite)
                .and_then(|a| state.instances_of(a).next())
                .map(|i| (state.sprites[i].x, state.sprites[i].y));
            match pos {
                Some((x, y)) => one(state, &[StepInput::MouseMove { x, y }]),
                None => one(state, &[]),
            }
        }
        Event::DragSprite { sprite, target, angle } => {
            let inputs = match visible_instance(p, state, sprite) {
                Some(me) => match drag_destination(p, state, me, target, *angle) {
                    Some((x, y)) => vec![StepInput::Teleport { sprite: me, x, y }],
                    None => vec![],
                },
                None => vec![],
            };
            one(state, &inputs);
        }
        Event::Sound { volume, steps } => {
            let _ = state.set_virtual_sound(*volume, *steps);
            vm::run_steps(p, cfg, state, *steps);
        }
        Event::Wait { steps } => vm::run_steps(p, cfg, state, *steps.max(&1)),
    }
    state.sc - start
}

/// Runs the greenflag step followed by the events, stopping when the
/// program stops.
pub fn run_events(p: &Project, cfg: &VmConfig, events: &[Event]) -> VmState {
    let mut state = VmState::new(p, cfg);
    vm::step(p, cfg, &mut state, &[]);
    for e in events {
        if state.stopped {
            break;
        }
        apply_event(p, cfg, &mut state, e);
    }
    state
}
