use super::*;
use crate::project::{Arg, Opcode, ScriptKind, MOUSE_POINTER, MYSELF};
use std::cmp::Ordering;

const MAX_OPS_PER_BATCH: usize = 100_000;
const MAX_CALL_DEPTH: usize = 256;

enum Flow {
    Next,
    Halted,
    Done,
    StopAll,
}

struct Exec<'a> {
    p: &'a Project,
    cfg: &'a VmConfig,
    st: &'a mut VmState,
    executed: Vec<BlockIx>,
}

pub(super) fn step(p: &Project, cfg: &VmConfig, st: &mut VmState, inputs: &[StepInput]) -> StepTrace {
    let mut ex = Exec { p, cfg, st, executed: vec![] };
    let sc = ex.st.sc;
    if !ex.st.stopped {
        ex.expire_sound();
        for i in inputs {
            ex.apply_input(i);
        }
        if sc == 0 {
            ex.fire_hats(|b| b.opcode == Opcode::Greenflag, None);
        }
        ex.fire_loudness_hats();
        ex.run_batch();
    }
    ex.st.sc += 1;
    StepTrace { sc, executed: ex.executed }
}

pub(super) fn aabb(p: &Project, s: &SpriteState) -> (f64, f64, f64, f64) {
    let c = &p.actors[s.actor].costumes[s.costume];
    let w = c.width * s.size / 100.0;
    let h = c.height * s.size / 100.0;
    (s.x - w / 2.0, s.x + w / 2.0, s.y - h / 2.0, s.y + h / 2.0)
}

pub(super) fn overlap(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1 && a.2 <= b.3 && b.2 <= a.3
}

fn normalize_direction(d: f64) -> f64 {
    let mut d = d % 360.0;
    if d > 180.0 {
        d -= 360.0;
    }
    if d <= -180.0 {
        d += 360.0;
    }
    d
}

fn num(x: f64) -> Value {
    Value::Num(if x.is_nan() { 0.0 } else { x })
}

fn bool_dist(b: bool) -> (bool, f64, f64) {
    if b {
        (true, 0.0, 1.0)
    } else {
        (false, 1.0, 0.0)
    }
}

impl<'a> Exec<'a> {
    // -- process table ------------------------------------------------------

    fn proc_ix(&self, key: ProcKey) -> Option<usize> {
        self.st.processes.binary_search_by_key(&key, |p| p.key).ok()
    }

    fn proc_mut(&mut self, key: ProcKey) -> &mut Process {
        let i = self.proc_ix(key).expect("process exists");
        &mut self.st.processes[i]
    }

    /// Starts or restarts the script on a sprite instance.
    fn start(&mut self, key: ProcKey, fresh: bool) {
        let body = self.p.scripts[key.0].body;
        let frames = vec![Frame::Seq { seq: body, pos: 0 }];
        match self.st.processes.binary_search_by_key(&key, |p| p.key) {
            Ok(i) => {
                let pr = &mut self.st.processes[i];
                pr.frames = frames;
                pr.halt = Halt::Running;
                pr.started = false;
                pr.fresh = fresh;
                pr.generation += 1;
            }
            Err(i) => self.st.processes.insert(
                i,
                Process { key, frames, halt: Halt::Running, started: false, fresh, generation: 0 },
            ),
        }
        self.st.ask_queue.retain(|k| *k != key);
    }

    /// Starts every event script whose hat satisfies `pred`, on all alive
    /// instances of its actor (or only on `only`).
    fn fire_hats<F: Fn(&crate::project::Block) -> bool>(&mut self, pred: F, only: Option<usize>) -> Vec<ProcKey> {
        self.fire_hats_fresh(pred, only, false)
    }

    fn fire_hats_fresh<F: Fn(&crate::project::Block) -> bool>(
        &mut self,
        pred: F,
        only: Option<usize>,
        fresh: bool,
    ) -> Vec<ProcKey> {
        let mut keys = vec![];
        for (si, s) in self.p.scripts.iter().enumerate() {
            if s.kind != ScriptKind::Event {
                continue;
            }
            let Some(h) = s.hat else { continue };
            if !pred(&self.p.blocks[h]) {
                continue;
            }
            let insts: Vec<usize> = match only {
                Some(i) => {
                    if self.st.sprites[i].actor == s.actor && self.st.sprites[i].alive {
                        vec![i]
                    } else {
                        vec![]
                    }
                }
                None => self.st.instances_of(s.actor).collect(),
            };
            for i in insts {
                keys.push((si, i));
            }
        }
        for &k in &keys {
            self.start(k, fresh);
        }
        keys
    }

    fn kill_process(&mut self, key: ProcKey) {
        if let Some(i) = self.proc_ix(key) {
            self.st.processes[i].halt = Halt::Done;
            self.st.processes[i].frames.clear();
        }
        self.st.ask_queue.retain(|k| *k != key);
    }

    // -- inputs -------------------------------------------------------------

    fn expire_sound(&mut self) {
        if self.st.input.sound_level >= 0.0 && self.st.sc >= self.st.input.sound_until {
            self.st.input.sound_level = -1.0;
        }
    }

    fn apply_input(&mut self, i: &StepInput) {
        match i {
            StepInput::KeyDown(k) => {
                let k = normalize_key(k);
                let newly = self.st.input.keys_down.insert(k.clone());
                if newly {
                    self.fire_hats(
                        |b| {
                            b.opcode == Opcode::KeyPressed
                                && b.lit(0).map(|x| {
                                    let x = normalize_key(&x);
                                    x == k || x == "any"
                                }) == Some(true)
                        },
                        None,
                    );
                }
            }
            StepInput::KeyUp(k) => {
                self.st.input.keys_down.remove(&normalize_key(k));
            }
            StepInput::MouseMove { x, y } => {
                self.st.input.mouse_x = *x;
                self.st.input.mouse_y = *y;
            }
            StepInput::MouseButton(d) => self.st.input.mouse_down = *d,
            StepInput::ClickSprite(i) => {
                if self.st.sprites.get(*i).map(|s| s.alive && s.visible) == Some(true) {
                    self.fire_hats(|b| b.opcode == Opcode::SpriteClicked, Some(*i));
                }
            }
            StepInput::ClickStage => {
                self.fire_hats(|b| b.opcode == Opcode::StageClicked, None);
            }
            StepInput::Answer(text) => {
                if !self.st.ask_queue.is_empty() {
                    let key = self.st.ask_queue.remove(0);
                    self.st.answer = text.clone();
                    if let Some(ix) = self.proc_ix(key) {
                        if matches!(self.st.processes[ix].halt, Halt::AskUntil { .. }) {
                            self.st.processes[ix].halt = Halt::Running;
                        }
                    }
                    let spr = key.1;
                    if self.st.sprites[spr].bubble.as_ref().map(|b| b.kind == BubbleKind::Say) == Some(true) {
                        self.st.sprites[spr].bubble = None;
                    }
                }
            }
            StepInput::Sound { level, steps } => {
                let _ = self.st.set_virtual_sound(*level, *steps);
            }
            StepInput::Teleport { sprite, x, y } => {
                if let Some(s) = self.st.sprites.get_mut(*sprite) {
                    if s.alive && s.visible {
                        s.x = *x;
                        s.y = *y;
                    }
                }
            }
        }
    }

    fn fire_loudness_hats(&mut self) {
        let mut to_fire = vec![];
        for (si, s) in self.p.scripts.iter().enumerate() {
            let Some(h) = s.hat else { continue };
            if self.p.blocks[h].opcode != Opcode::LoudnessGreaterThan {
                continue;
            }
            let insts: Vec<usize> = self.st.instances_of(s.actor).collect();
            for i in insts {
                let key = (si, i);
                let p = self.p;
                let threshold = self.eval_arg(&p.blocks[h].args[0], i).to_number();
                let over = self.st.loudness() > threshold && self.st.input.sound_level >= 0.0;
                let was = self.st.loudness_over.contains(&key);
                if over && !was {
                    self.st.loudness_over.insert(key);
                    to_fire.push(key);
                } else if !over && was {
                    self.st.loudness_over.remove(&key);
                }
            }
        }
        for k in to_fire {
            self.start(k, false);
        }
    }

    // -- scheduling ---------------------------------------------------------

    fn run_batch(&mut self) {
        let keys: Vec<ProcKey> =
            self.st.processes.iter().filter(|p| p.is_active() && !p.fresh).map(|p| p.key).collect();
        for key in keys {
            if self.st.stopped {
                break;
            }
            let Some(ix) = self.proc_ix(key) else { continue };
            let pr = &self.st.processes[ix];
            if pr.fresh || !pr.is_active() || !self.st.sprites[key.1].alive {
                continue;
            }
            self.run_process(key);
        }
        for p in &mut self.st.processes {
            p.fresh = false;
        }
        if self.st.stopped {
            for p in &mut self.st.processes {
                p.halt = Halt::Done;
                p.frames.clear();
            }
            self.st.ask_queue.clear();
        }
    }

    /// Returns true when the process may continue executing blocks now.
    fn resume_check(&mut self, key: ProcKey) -> bool {
        let sc = self.st.sc;
        let halt = self.proc_mut(key).halt.clone();
        match halt {
            Halt::Done => false,
            Halt::Running => true,
            Halt::Yield => {
                self.proc_mut(key).halt = Halt::Running;
                true
            }
            Halt::WaitSteps { until, block } | Halt::SoundUntil { until, block } => {
                if sc > until {
                    self.st.trace.record(block, 0.0, 1.0);
                    self.proc_mut(key).halt = Halt::Running;
                    true
                } else {
                    false
                }
            }
            Halt::SayUntil { until, block } => {
                if sc > until {
                    self.st.trace.record(block, 0.0, 1.0);
                    let kind = if self.p.blocks[block].opcode == Opcode::ThinkForSecs {
                        BubbleKind::Think
                    } else {
                        BubbleKind::Say
                    };
                    let spr = &mut self.st.sprites[key.1];
                    if spr.bubble.as_ref().map(|b| b.kind == kind) == Some(true) {
                        spr.bubble = None;
                    }
                    self.proc_mut(key).halt = Halt::Running;
                    true
                } else {
                    false
                }
            }
            Halt::GlideUntil { until, start, from, to, block } => {
                let steps = until + 1 - start;
                let spr = &mut self.st.sprites[key.1];
                if sc > until {
                    spr.x = to.0;
                    spr.y = to.1;
                    self.st.trace.record(block, 0.0, 1.0);
                    self.proc_mut(key).halt = Halt::Running;
                    true
                } else {
                    let k = sc - start;
                    if k >= steps {
                        spr.x = to.0;
                        spr.y = to.1;
                    } else {
                        let r = k as f64 / steps as f64;
                        spr.x = from.0 * (1.0 - r) + to.0 * r;
                        spr.y = from.1 * (1.0 - r) + to.1 * r;
                    }
                    false
                }
            }
            Halt::WaitUntil { block } => {
                let cond = match self.p.blocks[block].args[0] {
                    Arg::Block(c) => c,
                    _ => unreachable!("validated boolean slot"),
                };
                let (v, t, f) = self.eval_cond(cond, key.1);
                self.st.trace.record(block, t, f);
                if v {
                    self.proc_mut(key).halt = Halt::Running;
                }
                v
            }
            Halt::AskUntil { .. } => false,
            Halt::BroadcastWait { keys, .. } => {
                let all_done = keys.iter().all(|k| self.st.process(*k).map(|p| !p.is_active()).unwrap_or(true));
                if all_done {
                    self.proc_mut(key).halt = Halt::Running;
                }
                all_done
            }
        }
    }

    fn run_process(&mut self, key: ProcKey) {
        if !self.resume_check(key) {
            return;
        }
        let generation = self.proc_mut(key).generation;
        {
            let pr = self.proc_mut(key);
            if !pr.started {
                pr.started = true;
                if let Some(h) = self.p.scripts[key.0].hat {
                    self.st.trace.cover(h);
                    self.executed.push(h);
                }
            }
        }
        let mut ops = 0usize;
        loop {
            if self.st.stopped {
                return;
            }
            let Some(ix) = self.proc_ix(key) else { return };
            if self.st.processes[ix].generation != generation || self.st.processes[ix].halt != Halt::Running {
                return;
            }
            ops += 1;
            if ops > MAX_OPS_PER_BATCH {
                self.st.processes[ix].halt = Halt::Yield;
                return;
            }
            let top = self.st.processes[ix].frames.last().cloned();
            match top {
                None => {
                    self.st.processes[ix].halt = Halt::Done;
                    return;
                }
                Some(Frame::Call) => {
                    self.st.processes[ix].frames.pop();
                }
                Some(Frame::Loop { block, remaining, .. }) => {
                    self.loop_check(key, block, remaining);
                }
                Some(Frame::Seq { seq, pos }) => {
                    let seqv = &self.p.seqs[seq];
                    if pos >= seqv.len() {
                        let frames = &mut self.st.processes[ix].frames;
                        frames.pop();
                        // a loop iteration that already halted does not yield
                        // again at its back-edge
                        if let Some(Frame::Loop { halted, .. }) = frames.last_mut() {
                            if !std::mem::take(halted) {
                                self.st.processes[ix].halt = Halt::Yield;
                                return;
                            }
                        }
                        continue;
                    }
                    let b = seqv[pos];
                    match self.exec_stmt(key, b) {
                        Flow::Next => {}
                        Flow::Halted => return,
                        Flow::Done => {
                            self.kill_process(key);
                            return;
                        }
                        Flow::StopAll => {
                            self.st.stopped = true;
                            return;
                        }
                    }
                }
            }
        }
    }

    /// Advances the innermost sequence frame of a process past its current
    /// block.
    fn advance(&mut self, key: ProcKey) {
        let pr = self.proc_mut(key);
        for f in pr.frames.iter_mut().rev() {
            if let Frame::Seq { pos, .. } = f {
                *pos += 1;
                return;
            }
        }
    }

    fn push(&mut self, key: ProcKey, f: Frame) {
        self.proc_mut(key).frames.push(f);
    }

    fn loop_check(&mut self, key: ProcKey, block: BlockIx, remaining: u64) {
        let blk = &self.p.blocks[block];
        let body = blk.children[0];
        let iterate = match blk.opcode {
            Opcode::Forever => true,
            Opcode::RepeatTimes => {
                if remaining > 0 {
                    self.st.trace.record(block, remaining as f64, 0.0);
                    if let Some(Frame::Loop { remaining: r, .. }) = self.proc_mut(key).frames.last_mut() {
                        *r -= 1;
                    }
                    true
                } else {
                    self.st.trace.record(block, 0.0, 1.0);
                    false
                }
            }
            Opcode::RepeatUntil => {
                let cond = match blk.args[0] {
                    Arg::Block(c) => c,
                    _ => unreachable!("validated boolean slot"),
                };
                let (v, t, f) = self.eval_cond(cond, key.1);
                self.st.trace.record(block, t, f);
                !v
            }
            _ => unreachable!("loop frame on non-loop block"),
        };
        if iterate {
            self.push(key, Frame::Seq { seq: body, pos: 0 });
        } else {
            self.proc_mut(key).frames.pop();
            self.advance(key);
        }
    }

    fn halt(&mut self, key: ProcKey, h: Halt) -> Flow {
        self.advance(key);
        let pr = self.proc_mut(key);
        for f in &mut pr.frames {
            if let Frame::Loop { halted, .. } = f {
                *halted = true;
            }
        }
        pr.halt = h;
        Flow::Halted
    }

    // -- statements ---------------------------------------------------------

    fn exec_stmt(&mut self, key: ProcKey, b: BlockIx) -> Flow {
        let p = self.p;
        let blk = &p.blocks[b];
        let me = key.1;
        self.st.trace.cover(b);
        self.executed.push(b);
        let sc = self.st.sc;
        let cond_of = |i: usize| match blk.args[i] {
            Arg::Block(c) => c,
            _ => unreachable!("validated boolean slot"),
        };
        match blk.opcode {
            Opcode::If | Opcode::IfElse => {
                let (v, t, f) = self.eval_cond(cond_of(0), me);
                self.st.trace.record(b, t, f);
                self.advance(key);
                if v {
                    self.push(key, Frame::Seq { seq: blk.children[0], pos: 0 });
                } else if blk.opcode == Opcode::IfElse {
                    self.push(key, Frame::Seq { seq: blk.children[1], pos: 0 });
                }
                return Flow::Next;
            }
            Opcode::RepeatTimes => {
                let n = self.arg(blk, 0, me).to_number().round().max(0.0) as u64;
                self.push(key, Frame::Loop { block: b, remaining: n, halted: false });
                return Flow::Next;
            }
            Opcode::RepeatUntil | Opcode::Forever => {
                self.push(key, Frame::Loop { block: b, remaining: 0, halted: false });
                return Flow::Next;
            }
            Opcode::WaitSeconds => {
                let s = self.cfg.duration_steps(self.arg(blk, 0, me).to_number());
                return self.halt(key, Halt::WaitSteps { until: sc + s.max(1) - 1, block: b });
            }
            Opcode::WaitUntil => {
                let (v, t, f) = self.eval_cond(cond_of(0), me);
                self.st.trace.record(b, t, f);
                if v {
                    self.advance(key);
                    return Flow::Next;
                }
                return self.halt(key, Halt::WaitUntil { block: b });
            }
            Opcode::StopAll => return Flow::StopAll,
            Opcode::StopScript => return Flow::Done,
            Opcode::DeleteClone => {
                if self.st.sprites[me].clone_no.is_some() {
                    self.st.sprites[me].alive = false;
                    let keys: Vec<ProcKey> =
                        self.st.processes.iter().filter(|p| p.key.1 == me).map(|p| p.key).collect();
                    for k in keys {
                        self.kill_process(k);
                    }
                    return Flow::Done;
                }
            }
            Opcode::CreateClone => {
                let t = blk.lit(0).unwrap_or_default();
                let src = if t == MYSELF {
                    if p.actors[self.st.sprites[me].actor].is_stage {
                        None
                    } else {
                        Some(me)
                    }
                } else {
                    p.actor_ix(&t).filter(|&a| !p.actors[a].is_stage).filter(|&a| self.st.sprites[a].alive)
                };
                if let Some(src) = src {
                    self.create_clone(src);
                }
            }
            Opcode::Broadcast | Opcode::BroadcastAndWait => {
                let msg = self.arg(blk, 0, me).to_text();
                let keys = self.broadcast(&msg);
                if blk.opcode == Opcode::BroadcastAndWait && !keys.is_empty() {
                    return self.halt(key, Halt::BroadcastWait { keys, block: b });
                }
            }
            Opcode::CallProcedure => {
                let name = blk.lit(0).unwrap_or_default();
                let actor = self.st.sprites[me].actor;
                self.advance(key);
                let depth = self.proc_mut(key).frames.iter().filter(|f| matches!(f, Frame::Call)).count();
                if depth < MAX_CALL_DEPTH {
                    if let Some(&ps) = p.actors[actor].procedures.get(&name) {
                        if let Some(h) = p.scripts[ps].hat {
                            self.st.trace.cover(h);
                            self.executed.push(h);
                        }
                        self.push(key, Frame::Call);
                        self.push(key, Frame::Seq { seq: p.scripts[ps].body, pos: 0 });
                    }
                }
                return Flow::Next;
            }
            Opcode::GotoXY => {
                let x = self.arg(blk, 0, me).to_number();
                let y = self.arg(blk, 1, me).to_number();
                self.set_pos(me, x, y);
            }
            Opcode::ChangeXY => {
                let dx = self.arg(blk, 0, me).to_number();
                let dy = self.arg(blk, 1, me).to_number();
                let s = &self.st.sprites[me];
                let (x, y) = (s.x + dx, s.y + dy);
                self.set_pos(me, x, y);
            }
            Opcode::MoveSteps => {
                let n = self.arg(blk, 0, me).to_number();
                let s = &self.st.sprites[me];
                let rad = (90.0 - s.direction).to_radians();
                let (x, y) = (s.x + n * rad.cos(), s.y + n * rad.sin());
                self.set_pos(me, x, y);
            }
            Opcode::PointTowards => {
                let t = blk.lit(0).unwrap_or_default();
                if let Some((tx, ty)) = self.target_pos(&t, me) {
                    let s = &mut self.st.sprites[me];
                    let (dx, dy) = (tx - s.x, ty - s.y);
                    if dx != 0.0 || dy != 0.0 {
                        s.direction = normalize_direction(90.0 - dy.atan2(dx).to_degrees());
                    }
                }
            }
            Opcode::GlideSecsTo => {
                let secs = self.arg(blk, 0, me).to_number();
                let x = self.arg(blk, 1, me).to_number();
                let y = self.arg(blk, 2, me).to_number();
                let steps = self.cfg.duration_steps(secs);
                let s = &mut self.st.sprites[me];
                let from = (s.x, s.y);
                if steps == 0 {
                    s.x = x;
                    s.y = y;
                }
                return self.halt(key, Halt::GlideUntil { until: sc + steps.max(1) - 1, start: sc, from, to: (x, y), block: b });
            }
            Opcode::Say | Opcode::Think => {
                let text = self.arg(blk, 0, me).to_text();
                let kind = if blk.opcode == Opcode::Say { BubbleKind::Say } else { BubbleKind::Think };
                self.set_bubble(me, kind, text);
            }
            Opcode::SayForSecs | Opcode::ThinkForSecs => {
                let text = self.arg(blk, 0, me).to_text();
                let secs = self.arg(blk, 1, me).to_number();
                let kind = if blk.opcode == Opcode::SayForSecs { BubbleKind::Say } else { BubbleKind::Think };
                self.set_bubble(me, kind, text);
                let s = self.cfg.duration_steps(secs);
                return self.halt(key, Halt::SayUntil { until: sc + s.max(1) - 1, block: b });
            }
            Opcode::SwitchCostume => {
                let v = self.arg(blk, 0, me);
                let actor = self.st.sprites[me].actor;
                if let Some(c) = pick_costume(&p.actors[actor].costumes, &v) {
                    self.st.sprites[me].costume = c;
                }
            }
            Opcode::NextCostume => {
                let actor = self.st.sprites[me].actor;
                let n = p.actors[actor].costumes.len();
                let s = &mut self.st.sprites[me];
                s.costume = (s.costume + 1) % n;
            }
            Opcode::SwitchBackdrop => {
                let v = self.arg(blk, 0, me);
                if let Some(c) = pick_costume(&p.actors[p.stage].costumes, &v) {
                    self.switch_backdrop(c);
                }
            }
            Opcode::NextBackdrop => {
                let n = p.actors[p.stage].costumes.len();
                let c = (self.st.sprites[p.stage].costume + 1) % n;
                self.switch_backdrop(c);
            }
            Opcode::Show => self.st.sprites[me].visible = true,
            Opcode::Hide => self.st.sprites[me].visible = false,
            Opcode::SetSize => {
                let v = self.arg(blk, 0, me).to_number();
                self.st.sprites[me].size = v.max(0.0);
            }
            Opcode::SetVolume => {
                let v = self.arg(blk, 0, me).to_number();
                self.st.sprites[me].volume = v.clamp(0.0, 100.0);
            }
            Opcode::PlaySoundUntilDone => {
                let name = blk.lit(0).unwrap_or_default();
                let actor = self.st.sprites[me].actor;
                if let Some(snd) = p.actors[actor].sounds.iter().find(|s| s.name == name) {
                    let s = self.cfg.duration_steps(snd.duration_seconds);
                    return self.halt(key, Halt::SoundUntil { until: sc + s.max(1) - 1, block: b });
                }
            }
            Opcode::AskAndWait => {
                let q = self.arg(blk, 0, me).to_text();
                if !p.actors[self.st.sprites[me].actor].is_stage && !q.is_empty() {
                    self.set_bubble(me, BubbleKind::Say, q);
                }
                self.st.ask_queue.push(key);
                return self.halt(key, Halt::AskUntil { block: b });
            }
            Opcode::ResetTimer => self.st.timer_base = sc,
            Opcode::SetVariable => {
                let name = blk.lit(0).unwrap_or_default();
                let v = self.arg(blk, 1, me);
                *self.var_slot(me, &name) = v;
            }
            Opcode::ChangeVariable => {
                let name = blk.lit(0).unwrap_or_default();
                let d = self.arg(blk, 1, me).to_number();
                let slot = self.var_slot(me, &name);
                *slot = num(slot.to_number() + d);
            }
            Opcode::AddToList => {
                let item = self.arg(blk, 0, me);
                let name = blk.lit(1).unwrap_or_default();
                self.list_slot(me, &name).push(item);
            }
            op => unreachable!("`{}` is not a statement", op.name()),
        }
        self.advance(key);
        Flow::Next
    }

    fn set_pos(&mut self, me: usize, x: f64, y: f64) {
        if self.p.actors[self.st.sprites[me].actor].is_stage {
            return;
        }
        let s = &mut self.st.sprites[me];
        if x.is_finite() {
            s.x = x;
        }
        if y.is_finite() {
            s.y = y;
        }
    }

    fn set_bubble(&mut self, me: usize, kind: BubbleKind, text: String) {
        if self.p.actors[self.st.sprites[me].actor].is_stage {
            return;
        }
        self.st.sprites[me].bubble = if text.is_empty() { None } else { Some(Bubble { kind, text }) };
    }

    fn create_clone(&mut self, src: usize) {
        if self.st.clone_count() >= self.cfg.clone_limit {
            return;
        }
        let actor = self.st.sprites[src].actor;
        let name = self.p.actors[actor].name.clone();
        let n = self.st.clone_counter.entry(name).or_insert(0);
        *n += 1;
        let mut c = self.st.sprites[src].clone();
        c.clone_no = Some(*n);
        c.bubble = None;
        let ix = self.st.sprites.len();
        self.st.sprites.push(c);
        self.fire_hats_fresh(|b| b.opcode == Opcode::StartAsClone, Some(ix), true);
    }

    fn broadcast(&mut self, msg: &str) -> Vec<ProcKey> {
        let m = msg.to_lowercase();
        self.fire_hats_fresh(
            |b| b.opcode == Opcode::BroadcastReceived && b.lit(0).map(|x| x.to_lowercase()) == Some(m.clone()),
            None,
            true,
        )
    }

    fn switch_backdrop(&mut self, c: usize) {
        let stage = self.p.stage;
        self.st.sprites[stage].costume = c;
        let name = self.p.actors[stage].costumes[c].name.clone();
        self.fire_hats_fresh(
            |b| b.opcode == Opcode::BackdropSwitched && b.lit(0).as_deref() == Some(name.as_str()),
            None,
            true,
        );
    }

    fn var_slot(&mut self, me: usize, name: &str) -> &mut Value {
        let stage = self.p.stage;
        let target = if self.st.sprites[me].variables.contains_key(name) { me } else { stage };
        self.st.sprites[target].variables.entry(name.to_string()).or_default()
    }

    fn list_slot(&mut self, me: usize, name: &str) -> &mut Vec<Value> {
        let stage = self.p.stage;
        let target = if self.st.sprites[me].lists.contains_key(name) { me } else { stage };
        self.st.sprites[target].lists.entry(name.to_string()).or_default()
    }

    fn read_var(&self, me: usize, name: &str) -> Value {
        if let Some(v) = self.st.sprites[me].variables.get(name) {
            return v.clone();
        }
        self.st.sprites[self.p.stage].variables.get(name).cloned().unwrap_or_default()
    }

    fn read_list(&self, me: usize, name: &str) -> Option<&Vec<Value>> {
        self.st.sprites[me].lists.get(name).or_else(|| self.st.sprites[self.p.stage].lists.get(name))
    }

    // -- expressions --------------------------------------------------------

    fn arg(&mut self, blk: &crate::project::Block, i: usize, me: usize) -> Value {
        self.eval_arg(&blk.args[i], me)
    }

    fn eval_arg(&mut self, a: &Arg, me: usize) -> Value {
        match a {
            Arg::Lit(v) => v.clone(),
            Arg::Var(n) => self.read_var(me, n),
            Arg::Block(b) => self.eval(*b, me),
        }
    }

    /// Position of a named sprite (its original) or of the mouse pointer.
    fn target_pos(&self, name: &str, me: usize) -> Option<(f64, f64)> {
        if name == MOUSE_POINTER {
            return Some((self.st.input.mouse_x, self.st.input.mouse_y));
        }
        let a = self.p.actor_ix(name)?;
        let i = self.st.instances_of(a).find(|&i| i != me)?;
        Some((self.st.sprites[i].x, self.st.sprites[i].y))
    }

    fn eval(&mut self, b: BlockIx, me: usize) -> Value {
        let p = self.p;
        let blk = &p.blocks[b];
        if blk.opcode.is_boolean() {
            return Value::Bool(self.eval_cond(b, me).0);
        }
        match blk.opcode {
            Opcode::MouseX => num(self.st.input.mouse_x),
            Opcode::MouseY => num(self.st.input.mouse_y),
            Opcode::DistanceTo => {
                let t = blk.lit(0).unwrap_or_default();
                let s = &self.st.sprites[me];
                match self.target_pos(&t, me) {
                    Some((x, y)) => num(((x - s.x).powi(2) + (y - s.y).powi(2)).sqrt()),
                    None => num(10000.0),
                }
            }
            Opcode::Answer => Value::Text(self.st.answer.clone()),
            Opcode::Timer => num(self.st.timer()),
            Opcode::Loudness => num(self.st.loudness()),
            Opcode::LengthOfList => {
                let n = blk.lit(0).unwrap_or_default();
                num(self.read_list(me, &n).map(|l| l.len()).unwrap_or(0) as f64)
            }
            Opcode::ItemOfList => {
                let idx = self.arg(blk, 0, me);
                let n = blk.lit(1).unwrap_or_default();
                let list = self.read_list(me, &n).cloned().unwrap_or_default();
                let i = if idx.to_text().eq_ignore_ascii_case("last") {
                    list.len() as f64
                } else {
                    idx.to_number().floor()
                };
                if i >= 1.0 && (i as usize) <= list.len() {
                    list[i as usize - 1].clone()
                } else {
                    Value::Text(String::new())
                }
            }
            Opcode::Add | Opcode::Subtract | Opcode::Multiply | Opcode::Divide | Opcode::Mod => {
                let a = self.arg(blk, 0, me).to_number();
                let c = self.arg(blk, 1, me).to_number();
                num(match blk.opcode {
                    Opcode::Add => a + c,
                    Opcode::Subtract => a - c,
                    Opcode::Multiply => a * c,
                    Opcode::Divide => a / c,
                    _ => {
                        if c == 0.0 {
                            f64::NAN
                        } else {
                            ((a % c) + c) % c
                        }
                    }
                })
            }
            Opcode::Random => {
                let a = self.arg(blk, 0, me);
                let c = self.arg(blk, 1, me);
                let (x, y) = (a.to_number(), c.to_number());
                let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
                let integral = |v: &Value| !v.to_text().contains('.');
                if integral(&a) && integral(&c) {
                    num(self.st.rng.random_range(lo as i64..=hi as i64) as f64)
                } else if lo == hi {
                    num(lo)
                } else {
                    num(self.st.rng.random_range(lo..hi))
                }
            }
            Opcode::Join => {
                let a = self.arg(blk, 0, me).to_text();
                let c = self.arg(blk, 1, me).to_text();
                Value::Text(a + &c)
            }
            Opcode::Round => num(self.arg(blk, 0, me).to_number().round()),
            op => unreachable!("`{}` is not a reporter", op.name()),
        }
    }

    /// Evaluates a boolean block, returning its value and its distances to
    /// true and to false.
    fn eval_cond(&mut self, b: BlockIx, me: usize) -> (bool, f64, f64) {
        let p = self.p;
        let blk = &p.blocks[b];
        match blk.opcode {
            Opcode::Lt | Opcode::Gt | Opcode::Equals => {
                let a = self.arg(blk, 0, me);
                let c = self.arg(blk, 1, me);
                let ord = a.compare(&c);
                let value = match blk.opcode {
                    Opcode::Lt => ord == Ordering::Less,
                    Opcode::Gt => ord == Ordering::Greater,
                    _ => ord == Ordering::Equal,
                };
                match (a.as_comparable_number(), c.as_comparable_number()) {
                    (Some(x), Some(y)) => {
                        let (t, f) = relational_distance(blk.opcode, x, y);
                        (value, t, f)
                    }
                    _ => bool_dist(value),
                }
            }
            Opcode::And => {
                let (x, t1, f1) = self.eval_cond(arg_block(blk, 0), me);
                let (y, t2, f2) = self.eval_cond(arg_block(blk, 1), me);
                (x && y, t1 + t2, f1.min(f2))
            }
            Opcode::Or => {
                let (x, t1, f1) = self.eval_cond(arg_block(blk, 0), me);
                let (y, t2, f2) = self.eval_cond(arg_block(blk, 1), me);
                (x || y, t1.min(t2), f1 + f2)
            }
            Opcode::Not => {
                let (x, t, f) = self.eval_cond(arg_block(blk, 0), me);
                (!x, f, t)
            }
            Opcode::KeyPressedQ => {
                let k = normalize_key(&blk.lit(0).unwrap_or_default());
                let down = &self.st.input.keys_down;
                bool_dist(if k == "any" { !down.is_empty() } else { down.contains(&k) })
            }
            Opcode::MouseDown => bool_dist(self.st.input.mouse_down),
            Opcode::TouchingMousePointer => {
                let s = &self.st.sprites[me];
                let (mx, my) = (self.st.input.mouse_x, self.st.input.mouse_y);
                let bx = aabb(p, s);
                let touching = s.visible && bx.0 <= mx && mx <= bx.1 && bx.2 <= my && my <= bx.3;
                let d = ((mx - s.x).powi(2) + (my - s.y).powi(2)).sqrt();
                sensing_dist(touching, d)
            }
            Opcode::TouchingEdge => {
                let s = &self.st.sprites[me];
                let (l, r, bo, t) = aabb(p, s);
                let (hw, hh) = (p.stage_width / 2.0, p.stage_height / 2.0);
                let touching = s.visible && (l <= -hw || r >= hw || bo <= -hh || t >= hh);
                let d = (l + hw).min(hw - r).min(bo + hh).min(hh - t).max(0.0);
                sensing_dist(touching, d)
            }
            Opcode::TouchingSprite => {
                let name = blk.lit(0).unwrap_or_default();
                let Some(a) = p.actor_ix(&name) else { return (false, 1.0, 0.0) };
                let s = &self.st.sprites[me];
                let mine = aabb(p, s);
                let mut touching = false;
                let mut best = f64::INFINITY;
                for i in self.st.instances_of(a) {
                    if i == me {
                        continue;
                    }
                    let o = &self.st.sprites[i];
                    if s.visible && o.visible && overlap(mine, aabb(p, o)) {
                        touching = true;
                    }
                    best = best.min(((o.x - s.x).powi(2) + (o.y - s.y).powi(2)).sqrt());
                }
                if best.is_infinite() {
                    return (false, 1.0, 0.0);
                }
                sensing_dist(touching, best)
            }
            op => unreachable!("`{}` is not boolean", op.name()),
        }
    }
}

fn arg_block(blk: &crate::project::Block, i: usize) -> BlockIx {
    match blk.args[i] {
        Arg::Block(c) => c,
        _ => unreachable!("validated boolean slot"),
    }
}

fn sensing_dist(touching: bool, d: f64) -> (bool, f64, f64) {
    if touching {
        (true, 0.0, 1.0)
    } else {
        (false, d.max(f64::MIN_POSITIVE), 0.0)
    }
}

/// Distances of `x op y` to true and to false, with offset K = 1.
pub fn relational_distance(op: Opcode, x: f64, y: f64) -> (f64, f64) {
    match op {
        Opcode::Gt => {
            if x > y {
                (0.0, x - y)
            } else {
                (y - x + 1.0, 0.0)
            }
        }
        Opcode::Lt => {
            if x < y {
                (0.0, y - x)
            } else {
                (x - y + 1.0, 0.0)
            }
        }
        Opcode::Equals => {
            if x == y {
                (0.0, 1.0)
            } else {
                ((x - y).abs(), 0.0)
            }
        }
        _ => panic!("not a relational opcode"),
    }
}

fn pick_costume(costumes: &[crate::project::Costume], v: &Value) -> Option<usize> {
    let name = v.to_text();
    if let Some(i) = costumes.iter().position(|c| c.name == name) {
        return Some(i);
    }
    if let Some(n) = v.as_comparable_number() {
        let n = n.round() as i64;
        let len = costumes.len() as i64;
        return Some(((n - 1).rem_euclid(len)) as usize);
    }
    None
}
