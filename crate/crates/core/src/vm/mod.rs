//! Deterministic step-counter interpreter.
//!
//! Every temporal block is converted to a number of steps; one call to
//! [`step`] executes exactly one process batch and advances the step counter
//! by one. Nothing depends on wall-clock time.

mod exec;
mod trace;

pub use trace::{BranchDist, ExecutionTrace};

use crate::project::{ActorIx, BlockIx, Project, ScriptIx, SeqIx};
use crate::value::Value;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};

/// Seconds to whole steps: `ceil(x·1000 / stepTimeMs)`, at least one step
/// for any positive duration.
pub fn seconds_to_steps(x: f64, step_time_ms: f64) -> u64 {
    assert!(step_time_ms > 0.0, "step time must be positive");
    if x.is_nan() || x <= 0.0 {
        return 0;
    }
    let v = x * 1000.0 / step_time_ms;
    // absorb representation error such as 0.6·1000 = 600.0000000000001
    let r = (v - 1e-9).ceil();
    (r as u64).max(1)
}

pub const TIMER_PER_STEP: f64 = 0.075;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VmConfig {
    pub seed: u64,
    /// Step time at acceleration 1.
    pub base_step_time_ms: u32,
    pub acceleration: u32,
    pub clone_limit: usize,
}

impl Default for VmConfig {
    fn default() -> Self {
        VmConfig { seed: 0, base_step_time_ms: 30, acceleration: 1, clone_limit: 50 }
    }
}

impl VmConfig {
    pub fn with_seed(seed: u64) -> Self {
        VmConfig { seed, ..Default::default() }
    }

    /// Effective step time: the base step time divided by the acceleration
    /// factor, floored, at least 1 ms.
    pub fn step_time_ms(&self) -> u32 {
        (self.base_step_time_ms / self.acceleration.max(1)).max(1)
    }

    /// Steps a block waits for `seconds`. The acceleration factor shortens
    /// the block's time argument and the step time alike, so the step count
    /// does not change with it.
    pub fn duration_steps(&self, seconds: f64) -> u64 {
        let a = self.acceleration.max(1) as f64;
        seconds_to_steps(seconds / a, self.step_time_ms() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BubbleKind {
    Say,
    Think,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bubble {
    pub kind: BubbleKind,
    pub text: String,
}

/// Runtime attributes of a sprite, a clone, or the stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpriteState {
    pub actor: ActorIx,
    /// `None` for originals, else the clone's creation number (1-based,
    /// per actor).
    pub clone_no: Option<u32>,
    pub alive: bool,
    pub x: f64,
    pub y: f64,
    pub direction: f64,
    pub size: f64,
    pub visible: bool,
    pub costume: usize,
    pub volume: f64,
    pub layer: i64,
    pub variables: BTreeMap<String, Value>,
    pub lists: BTreeMap<String, Vec<Value>>,
    pub bubble: Option<Bubble>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputState {
    pub keys_down: BTreeSet<String>,
    pub mouse_x: f64,
    pub mouse_y: f64,
    pub mouse_down: bool,
    /// −1 means no simulated sound.
    pub sound_level: f64,
    /// First step at which the simulated sound is gone again.
    pub sound_until: u64,
}

impl Default for InputState {
    fn default() -> Self {
        InputState {
            keys_down: BTreeSet::new(),
            mouse_x: 0.0,
            mouse_y: 0.0,
            mouse_down: false,
            sound_level: -1.0,
            sound_until: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Frame {
    Seq { seq: SeqIx, pos: usize },
    /// `halted`: the current iteration has already halted at least once
    Loop { block: BlockIx, remaining: u64, halted: bool },
    Call,
}

/// Why a process is not running. Timed variants resume at the first step
/// with `sc > until`; a d-step halt started at step s has `until = s + d - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Halt {
    Running,
    /// loop back-edge: resumes in the next batch
    Yield,
    WaitSteps { until: u64, block: BlockIx },
    WaitUntil { block: BlockIx },
    GlideUntil { until: u64, start: u64, from: (f64, f64), to: (f64, f64), block: BlockIx },
    SayUntil { until: u64, block: BlockIx },
    SoundUntil { until: u64, block: BlockIx },
    AskUntil { block: BlockIx },
    BroadcastWait { keys: Vec<ProcKey>, block: BlockIx },
    Done,
}

impl Halt {
    /// Timed halt: (resume-after step, block).
    pub fn timed(&self) -> Option<(u64, BlockIx)> {
        match *self {
            Halt::WaitSteps { until, block }
            | Halt::GlideUntil { until, block, .. }
            | Halt::SayUntil { until, block }
            | Halt::SoundUntil { until, block } => Some((until, block)),
            _ => None,
        }
    }
}

/// Processes are identified by (script, sprite instance); sorting by this key
/// gives actor order, then script order, then clone creation order.
pub type ProcKey = (ScriptIx, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Process {
    pub key: ProcKey,
    pub frames: Vec<Frame>,
    pub halt: Halt,
    pub started: bool,
    /// created during the current batch; runs from the next one
    pub fresh: bool,
    pub generation: u64,
}

impl Process {
    pub fn is_active(&self) -> bool {
        self.halt != Halt::Done
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmState {
    pub sc: u64,
    pub processes: Vec<Process>,
    pub sprites: Vec<SpriteState>,
    pub input: InputState,
    pub timer_base: u64,
    pub answer: String,
    pub ask_queue: Vec<ProcKey>,
    pub stopped: bool,
    pub loudness_over: BTreeSet<ProcKey>,
    pub trace: ExecutionTrace,
    pub rng: ChaCha8Rng,
    /// Random string offered to text prompts, fixed per seed.
    pub random_text: String,
    pub clone_counter: BTreeMap<String, u32>,
}

/// One input applied before a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepInput {
    KeyDown(String),
    KeyUp(String),
    MouseMove { x: f64, y: f64 },
    MouseButton(bool),
    /// sprite instance index
    ClickSprite(usize),
    ClickStage,
    Answer(String),
    Sound { level: f64, steps: u64 },
    Teleport { sprite: usize, x: f64, y: f64 },
}

/// Blocks executed during one step, in execution order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepTrace {
    pub sc: u64,
    pub executed: Vec<BlockIx>,
}

impl VmState {
    pub fn new(project: &Project, config: &VmConfig) -> VmState {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let random_text: String = (0..8).map(|_| (b'a' + rng.random_range(0..26u8)) as char).collect();
        let sprites = project
            .actors
            .iter()
            .enumerate()
            .map(|(i, a)| SpriteState {
                actor: i,
                clone_no: None,
                alive: true,
                x: a.x,
                y: a.y,
                direction: a.direction,
                size: a.size,
                visible: a.visible,
                costume: a.costume,
                volume: a.volume,
                layer: a.layer,
                variables: a.variables.clone(),
                lists: a.lists.clone(),
                bubble: None,
            })
            .collect();
        VmState {
            sc: 0,
            processes: vec![],
            sprites,
            input: InputState::default(),
            timer_base: 0,
            answer: String::new(),
            ask_queue: vec![],
            stopped: false,
            loudness_over: BTreeSet::new(),
            trace: ExecutionTrace::default(),
            rng,
            random_text,
            clone_counter: BTreeMap::new(),
        }
    }

    pub fn ask_focus(&self) -> bool {
        !self.ask_queue.is_empty()
    }

    pub fn timer(&self) -> f64 {
        TIMER_PER_STEP * (self.sc - self.timer_base) as f64
    }

    /// Loudness as the program sees it: the simulated level, or 0 when there
    /// is none.
    pub fn loudness(&self) -> f64 {
        if self.input.sound_level < 0.0 {
            0.0
        } else {
            self.input.sound_level
        }
    }

    /// Simulates a sound of `volume` for the next `duration` steps.
    pub fn set_virtual_sound(&mut self, volume: f64, duration: u64) -> Result<(), String> {
        if !(0.0..=100.0).contains(&volume) {
            return Err(format!("volume {volume} outside [0, 100]"));
        }
        self.input.sound_level = volume;
        self.input.sound_until = self.sc + duration;
        Ok(())
    }

    pub fn release_key(&mut self, key: &str) {
        self.input.keys_down.remove(&normalize_key(key));
    }

    pub fn process(&self, key: ProcKey) -> Option<&Process> {
        self.processes.binary_search_by_key(&key, |p| p.key).ok().map(|i| &self.processes[i])
    }

    /// Scripts with at least one process that is not Done.
    pub fn active_scripts(&self) -> BTreeSet<ScriptIx> {
        self.processes.iter().filter(|p| p.is_active()).map(|p| p.key.0).collect()
    }

    /// Alive instances (original first, then clones) of an actor.
    pub fn instances_of(&self, actor: ActorIx) -> impl Iterator<Item = usize> + '_ {
        self.sprites
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.alive && s.actor == actor)
            .map(|(i, _)| i)
    }

    pub fn clone_count(&self) -> usize {
        self.sprites.iter().filter(|s| s.alive && s.clone_no.is_some()).count()
    }

    /// The trace with still-pending timed statements folded in as
    /// interrupted (true distance = steps left).
    pub fn trace_snapshot(&self) -> ExecutionTrace {
        let mut t = self.trace.clone();
        for p in &self.processes {
            if let Some((until, block)) = p.halt.timed() {
                let remaining = (until + 1).saturating_sub(self.sc).max(1);
                t.record(block, remaining as f64, 0.0);
            }
        }
        t
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("state serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex_digest(self.canonical_json().as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn normalize_key(k: &str) -> String {
    let k = k.trim().to_lowercase();
    match k.as_str() {
        "up arrow" => "up".into(),
        "down arrow" => "down".into(),
        "left arrow" => "left".into(),
        "right arrow" => "right".into(),
        " " => "space".into(),
        _ => k,
    }
}

/// Whether instance `i` overlaps some visible instance of `actor` other than
/// itself, by bounding boxes.
pub fn touching_actor(project: &Project, state: &VmState, i: usize, actor: ActorIx) -> bool {
    let s = &state.sprites[i];
    if !s.visible {
        return false;
    }
    let mine = exec::aabb(project, s);
    state
        .instances_of(actor)
        .filter(|&j| j != i)
        .any(|j| state.sprites[j].visible && exec::overlap(mine, exec::aabb(project, &state.sprites[j])))
}

pub fn touching_edge(project: &Project, state: &VmState, i: usize) -> bool {
    let s = &state.sprites[i];
    let (l, r, b, t) = exec::aabb(project, s);
    let (hw, hh) = (project.stage_width / 2.0, project.stage_height / 2.0);
    s.visible && (l <= -hw || r >= hw || b <= -hh || t >= hh)
}

/// Executes one batch. Inputs are applied first, then hats fire, then every
/// process runs until it halts, and finally the step counter advances.
pub fn step(project: &Project, config: &VmConfig, state: &mut VmState, inputs: &[StepInput]) -> StepTrace {
    exec::step(project, config, state, inputs)
}

/// Runs `n` idle steps, stopping early if the program stops.
pub fn run_steps(project: &Project, config: &VmConfig, state: &mut VmState, n: u64) {
    for _ in 0..n {
        if state.stopped {
            break;
        }
        step(project, config, state, &[]);
    }
}
