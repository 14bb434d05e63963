//! Project documents, the supported opcode set, and the validated,
//! arena-indexed program representation used by the VM and the analyses.

use crate::value::Value;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub type BlockIx = usize;
pub type SeqIx = usize;
pub type ScriptIx = usize;
pub type ActorIx = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoadError {
    #[error("malformed project document: {0}")]
    Malformed(String),
    #[error("duplicate block id `{0}`")]
    DuplicateId(String),
    #[error("block `{id}`: unknown opcode `{opcode}`")]
    UnknownOpcode { id: String, opcode: String },
    #[error("block `{id}`: {msg}")]
    Invalid { id: String, msg: String },
    #[error("actor `{0}`: {1}")]
    Actor(String, String),
}

macro_rules! opcodes {
    ($($variant:ident => $name:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum Opcode { $(#[serde(rename = $name)] $variant),* }

        impl Opcode {
            pub fn name(self) -> &'static str {
                match self { $(Opcode::$variant => $name),* }
            }
            pub fn from_name(s: &str) -> Option<Opcode> {
                match s { $($name => Some(Opcode::$variant),)* _ => None }
            }
            pub const ALL: &'static [Opcode] = &[$(Opcode::$variant),*];
        }
    };
}

opcodes! {
    Greenflag => "greenflag",
    KeyPressed => "keyPressed",
    SpriteClicked => "spriteClicked",
    StageClicked => "stageClicked",
    BroadcastReceived => "broadcastReceived",
    StartAsClone => "startAsClone",
    BackdropSwitched => "backdropSwitched",
    LoudnessGreaterThan => "loudnessGreaterThan",
    ProcedureDefinition => "procedureDefinition",
    If => "if",
    IfElse => "ifElse",
    RepeatTimes => "repeatTimes",
    RepeatUntil => "repeatUntil",
    Forever => "forever",
    WaitSeconds => "waitSeconds",
    WaitUntil => "waitUntil",
    StopAll => "stopAll",
    StopScript => "stopScript",
    CreateClone => "createClone",
    DeleteClone => "deleteClone",
    Broadcast => "broadcast",
    BroadcastAndWait => "broadcastAndWait",
    CallProcedure => "callProcedure",
    GotoXY => "gotoXY",
    ChangeXY => "changeXY",
    MoveSteps => "moveSteps",
    PointTowards => "pointTowards",
    GlideSecsTo => "glideSecsTo",
    Say => "say",
    SayForSecs => "sayForSecs",
    Think => "think",
    ThinkForSecs => "thinkForSecs",
    SwitchCostume => "switchCostume",
    NextCostume => "nextCostume",
    SwitchBackdrop => "switchBackdrop",
    NextBackdrop => "nextBackdrop",
    Show => "show",
    Hide => "hide",
    SetSize => "setSize",
    PlaySoundUntilDone => "playSoundUntilDone",
    SetVolume => "setVolume",
    TouchingSprite => "touchingSprite",
    TouchingEdge => "touchingEdge",
    TouchingMousePointer => "touchingMousePointer",
    KeyPressedQ => "keyPressedQ",
    MouseDown => "mouseDown",
    MouseX => "mouseX",
    MouseY => "mouseY",
    DistanceTo => "distanceTo",
    AskAndWait => "askAndWait",
    Answer => "answer",
    Timer => "timer",
    ResetTimer => "resetTimer",
    Loudness => "loudness",
    SetVariable => "setVariable",
    ChangeVariable => "changeVariable",
    AddToList => "addToList",
    LengthOfList => "lengthOfList",
    ItemOfList => "itemOfList",
    Add => "add",
    Subtract => "subtract",
    Multiply => "multiply",
    Divide => "divide",
    Lt => "lt",
    Gt => "gt",
    Equals => "equals",
    And => "and",
    Or => "or",
    Not => "not",
    Random => "random",
    Join => "join",
    Mod => "mod",
    Round => "round",
}

/// What an argument slot accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// literal, variable reference or value reporter
    Any,
    /// a boolean reporter block
    Bool,
    /// a literal name (key, variable, list, sprite, message, procedure)
    Name,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Hat,
    Stack,
    Cap,
    Reporter,
    Boolean,
}

/// Special target names understood by sensing and motion blocks.
pub const MOUSE_POINTER: &str = "mouse-pointer";
pub const MYSELF: &str = "myself";

impl Opcode {
    pub fn shape(self) -> Shape {
        use Opcode::*;
        match self {
            Greenflag | KeyPressed | SpriteClicked | StageClicked | BroadcastReceived
            | StartAsClone | BackdropSwitched | LoudnessGreaterThan | ProcedureDefinition => {
                Shape::Hat
            }
            StopAll | StopScript | DeleteClone | Forever => Shape::Cap,
            TouchingSprite | TouchingEdge | TouchingMousePointer | KeyPressedQ | MouseDown | Lt
            | Gt | Equals | And | Or | Not => Shape::Boolean,
            MouseX | MouseY | DistanceTo | Answer | Timer | Loudness | LengthOfList
            | ItemOfList | Add | Subtract | Multiply | Divide | Random | Join | Mod | Round => {
                Shape::Reporter
            }
            _ => Shape::Stack,
        }
    }

    pub fn is_hat(self) -> bool {
        self.shape() == Shape::Hat
    }

    pub fn is_statement(self) -> bool {
        matches!(self.shape(), Shape::Stack | Shape::Cap)
    }

    pub fn is_expression(self) -> bool {
        matches!(self.shape(), Shape::Reporter | Shape::Boolean)
    }

    pub fn is_boolean(self) -> bool {
        self.shape() == Shape::Boolean
    }

    /// Argument slots and number of nested block sequences.
    pub fn signature(self) -> (&'static [Slot], usize) {
        use Opcode::*;
        use Slot::*;
        match self {
            Greenflag | SpriteClicked | StageClicked | StartAsClone => (&[], 0),
            KeyPressed | BroadcastReceived | BackdropSwitched | ProcedureDefinition => (&[Name], 0),
            LoudnessGreaterThan => (&[Any], 0),
            If => (&[Bool], 1),
            IfElse => (&[Bool], 2),
            RepeatTimes => (&[Any], 1),
            RepeatUntil => (&[Bool], 1),
            Forever => (&[], 1),
            WaitSeconds => (&[Any], 0),
            WaitUntil => (&[Bool], 0),
            StopAll | StopScript | DeleteClone => (&[], 0),
            CreateClone => (&[Name], 0),
            Broadcast | BroadcastAndWait => (&[Any], 0),
            CallProcedure => (&[Name], 0),
            GotoXY | ChangeXY => (&[Any, Any], 0),
            MoveSteps => (&[Any], 0),
            PointTowards => (&[Name], 0),
            GlideSecsTo => (&[Any, Any, Any], 0),
            Say | Think => (&[Any], 0),
            SayForSecs | ThinkForSecs => (&[Any, Any], 0),
            SwitchCostume | SwitchBackdrop => (&[Any], 0),
            NextCostume | NextBackdrop | Show | Hide => (&[], 0),
            SetSize | SetVolume => (&[Any], 0),
            PlaySoundUntilDone => (&[Name], 0),
            TouchingSprite => (&[Name], 0),
            TouchingEdge | TouchingMousePointer | MouseDown | MouseX | MouseY => (&[], 0),
            KeyPressedQ => (&[Name], 0),
            DistanceTo => (&[Name], 0),
            AskAndWait => (&[Any], 0),
            Answer | Timer | ResetTimer | Loudness => (&[], 0),
            SetVariable | ChangeVariable => (&[Name, Any], 0),
            AddToList => (&[Any, Name], 0),
            LengthOfList => (&[Name], 0),
            ItemOfList => (&[Any, Name], 0),
            Add | Subtract | Multiply | Divide | Lt | Gt | Equals | Random | Join | Mod => {
                (&[Any, Any], 0)
            }
            And | Or => (&[Bool, Bool], 0),
            Not => (&[Bool], 0),
            Round => (&[Any], 0),
        }
    }

    /// Statements that wait for a number of steps derived from seconds.
    pub fn is_time_dependent(self) -> bool {
        matches!(
            self,
            Opcode::WaitSeconds
                | Opcode::SayForSecs
                | Opcode::ThinkForSecs
                | Opcode::GlideSecsTo
                | Opcode::PlaySoundUntilDone
        )
    }

    /// Hats whose event comes from a user or the environment rather than
    /// from another script.
    pub fn is_user_input_hat(self) -> bool {
        matches!(
            self,
            Opcode::Greenflag
                | Opcode::KeyPressed
                | Opcode::SpriteClicked
                | Opcode::StageClicked
                | Opcode::LoudnessGreaterThan
        )
    }
}

// ---------------------------------------------------------------------------
// Documents

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDoc {
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_height")]
    pub height: f64,
}

fn default_width() -> f64 {
    480.0
}
fn default_height() -> f64 {
    360.0
}

impl Default for StageDoc {
    fn default() -> Self {
        StageDoc { width: 480.0, height: 360.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostumeDoc {
    pub name: String,
    #[serde(default = "default_costume_side")]
    pub width: f64,
    #[serde(default = "default_costume_side")]
    pub height: f64,
}

fn default_costume_side() -> f64 {
    40.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SoundDoc {
    pub name: String,
    pub duration_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArgDoc {
    Var { var: String },
    Block(Box<BlockDoc>),
    Lit(Value),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDoc {
    pub id: String,
    pub opcode: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<ArgDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<Vec<BlockDoc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptDoc {
    #[serde(default)]
    pub hat: Option<BlockDoc>,
    #[serde(default)]
    pub body: Vec<BlockDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ActorDoc {
    pub name: String,
    #[serde(default)]
    pub is_stage: bool,
    #[serde(default)]
    pub costumes: Vec<CostumeDoc>,
    #[serde(default)]
    pub sounds: Vec<SoundDoc>,
    #[serde(default)]
    pub variables: BTreeMap<String, Value>,
    #[serde(default)]
    pub lists: BTreeMap<String, Vec<Value>>,
    #[serde(default)]
    pub scripts: Vec<ScriptDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub custom_blocks: Vec<ScriptDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visible: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_costume: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub stage: StageDoc,
    pub actors: Vec<ActorDoc>,
}

impl ProjectDoc {
    pub fn from_json(text: &str) -> Result<ProjectDoc, LoadError> {
        serde_json::from_str(text).map_err(|e| LoadError::Malformed(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("project documents always serialize")
    }
}

// ---------------------------------------------------------------------------
// Validated program

#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Lit(Value),
    Var(String),
    Block(BlockIx),
}

#[derive(Debug, Clone)]
pub struct Block {
    pub id: String,
    pub opcode: Opcode,
    pub args: Vec<Arg>,
    pub children: Vec<SeqIx>,
    pub script: ScriptIx,
    pub parent: Option<BlockIx>,
}

impl Block {
    /// Literal text of argument `i`, if it is a literal.
    pub fn lit(&self, i: usize) -> Option<String> {
        match self.args.get(i) {
            Some(Arg::Lit(v)) => Some(v.to_text()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptKind {
    Event,
    Procedure(String),
}

#[derive(Debug, Clone)]
pub struct Script {
    pub actor: ActorIx,
    pub hat: Option<BlockIx>,
    pub body: SeqIx,
    pub kind: ScriptKind,
}

#[derive(Debug, Clone)]
pub struct Costume {
    pub name: String,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone)]
pub struct Sound {
    pub name: String,
    pub duration_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Actor {
    pub name: String,
    pub is_stage: bool,
    pub costumes: Vec<Costume>,
    pub sounds: Vec<Sound>,
    pub variables: BTreeMap<String, Value>,
    pub lists: BTreeMap<String, Vec<Value>>,
    /// Event scripts in declaration order.
    pub scripts: Vec<ScriptIx>,
    pub procedures: BTreeMap<String, ScriptIx>,
    pub x: f64,
    pub y: f64,
    pub direction: f64,
    pub size: f64,
    pub visible: bool,
    pub costume: usize,
    pub volume: f64,
    pub layer: i64,
}

#[derive(Debug, Clone)]
pub struct Project {
    pub doc: ProjectDoc,
    pub name: String,
    pub stage_width: f64,
    pub stage_height: f64,
    pub actors: Vec<Actor>,
    pub stage: ActorIx,
    pub blocks: Vec<Block>,
    pub seqs: Vec<Vec<BlockIx>>,
    pub scripts: Vec<Script>,
    pub warnings: Vec<String>,
    ids: BTreeMap<String, BlockIx>,
}

struct Builder<'a> {
    blocks: Vec<Block>,
    seqs: Vec<Vec<BlockIx>>,
    ids: BTreeMap<String, BlockIx>,
    actor_names: &'a BTreeSet<String>,
}

impl<'a> Builder<'a> {
    fn block(
        &mut self,
        doc: &BlockDoc,
        script: ScriptIx,
        parent: Option<BlockIx>,
        want: Shape,
    ) -> Result<BlockIx, LoadError> {
        let opcode = Opcode::from_name(&doc.opcode).ok_or_else(|| LoadError::UnknownOpcode {
            id: doc.id.clone(),
            opcode: doc.opcode.clone(),
        })?;
        let invalid = |msg: String| LoadError::Invalid { id: doc.id.clone(), msg };
        let shape = opcode.shape();
        let ok = match want {
            Shape::Hat => shape == Shape::Hat,
            Shape::Stack | Shape::Cap => opcode.is_statement(),
            Shape::Reporter => opcode.is_expression(),
            Shape::Boolean => shape == Shape::Boolean,
        };
        if !ok {
            return Err(invalid(format!("`{}` cannot be used in this position", doc.opcode)));
        }
        if self.ids.contains_key(&doc.id) {
            return Err(LoadError::DuplicateId(doc.id.clone()));
        }
        let (slots, n_children) = opcode.signature();
        if doc.args.len() != slots.len() {
            return Err(invalid(format!(
                "`{}` takes {} argument(s), got {}",
                doc.opcode,
                slots.len(),
                doc.args.len()
            )));
        }
        if doc.children.len() != n_children {
            return Err(invalid(format!(
                "`{}` takes {} nested sequence(s), got {}",
                doc.opcode,
                n_children,
                doc.children.len()
            )));
        }
        let ix = self.blocks.len();
        self.ids.insert(doc.id.clone(), ix);
        self.blocks.push(Block {
            id: doc.id.clone(),
            opcode,
            args: Vec::new(),
            children: Vec::new(),
            script,
            parent,
        });
        let mut args = Vec::with_capacity(slots.len());
        for (slot, arg) in slots.iter().zip(&doc.args) {
            let a = match (slot, arg) {
                (Slot::Bool, ArgDoc::Block(b)) => Arg::Block(self.block(b, script, Some(ix), Shape::Boolean)?),
                (Slot::Bool, _) => return Err(invalid("boolean slot needs a boolean block".into())),
                (Slot::Name, ArgDoc::Lit(v)) => Arg::Lit(Value::Text(v.to_text())),
                (Slot::Name, _) => return Err(invalid("name slot needs a literal".into())),
                (Slot::Any, ArgDoc::Lit(v)) => Arg::Lit(v.clone()),
                (Slot::Any, ArgDoc::Var { var }) => Arg::Var(var.clone()),
                (Slot::Any, ArgDoc::Block(b)) => Arg::Block(self.block(b, script, Some(ix), Shape::Reporter)?),
            };
            args.push(a);
        }
        let mut children = Vec::with_capacity(n_children);
        for seq in &doc.children {
            children.push(self.seq(seq, script, Some(ix))?);
        }
        if let (Opcode::TouchingSprite | Opcode::DistanceTo | Opcode::PointTowards, Some(Arg::Lit(v))) =
            (opcode, args.first())
        {
            let t = v.to_text();
            if t != MOUSE_POINTER && !self.actor_names.contains(&t) {
                return Err(invalid(format!("unknown sprite `{}`", t)));
            }
        }
        let b = &mut self.blocks[ix];
        b.args = args;
        b.children = children;
        Ok(ix)
    }

    fn seq(
        &mut self,
        docs: &[BlockDoc],
        script: ScriptIx,
        parent: Option<BlockIx>,
    ) -> Result<SeqIx, LoadError> {
        let mut out = Vec::with_capacity(docs.len());
        for d in docs {
            out.push(self.block(d, script, parent, Shape::Stack)?);
        }
        let ix = self.seqs.len();
        self.seqs.push(out);
        Ok(ix)
    }
}

/// Parses and validates a project document.
pub fn load_project_str(text: &str) -> Result<Project, LoadError> {
    Project::load(ProjectDoc::from_json(text)?)
}

impl Project {
    pub fn load(mut doc: ProjectDoc) -> Result<Project, LoadError> {
        let n_stages = doc.actors.iter().filter(|a| a.is_stage).count();
        if n_stages > 1 {
            return Err(LoadError::Malformed("more than one stage actor".into()));
        }
        if n_stages == 0 {
            doc.actors.insert(
                0,
                ActorDoc {
                    name: "Stage".into(),
                    is_stage: true,
                    costumes: vec![],
                    sounds: vec![],
                    variables: BTreeMap::new(),
                    lists: BTreeMap::new(),
                    scripts: vec![],
                    custom_blocks: vec![],
                    x: None,
                    y: None,
                    direction: None,
                    size: None,
                    visible: None,
                    current_costume: None,
                    volume: None,
                },
            );
        }
        let mut names = BTreeSet::new();
        for a in &doc.actors {
            if !names.insert(a.name.clone()) {
                return Err(LoadError::Actor(a.name.clone(), "duplicate actor name".into()));
            }
            if a.name == MOUSE_POINTER || a.name == MYSELF {
                return Err(LoadError::Actor(a.name.clone(), "reserved actor name".into()));
            }
        }
        if !(doc.stage.width > 0.0 && doc.stage.height > 0.0) {
            return Err(LoadError::Malformed("stage dimensions must be positive".into()));
        }
        let stage = doc.actors.iter().position(|a| a.is_stage).unwrap();
        let mut b = Builder { blocks: vec![], seqs: vec![], ids: BTreeMap::new(), actor_names: &names };
        let mut scripts: Vec<Script> = vec![];
        let mut actors = vec![];
        for (ai, a) in doc.actors.iter().enumerate() {
            let mut costumes: Vec<Costume> = a
                .costumes
                .iter()
                .map(|c| Costume { name: c.name.clone(), width: c.width, height: c.height })
                .collect();
            if costumes.is_empty() {
                costumes.push(if a.is_stage {
                    Costume { name: "backdrop1".into(), width: doc.stage.width, height: doc.stage.height }
                } else {
                    Costume { name: "costume1".into(), width: 40.0, height: 40.0 }
                });
            }
            let costume = a.current_costume.unwrap_or(0);
            if costume >= costumes.len() {
                return Err(LoadError::Actor(a.name.clone(), "currentCostume out of range".into()));
            }
            let direction = a.direction.unwrap_or(90.0);
            if !(-180.0..=180.0).contains(&direction) {
                return Err(LoadError::Actor(a.name.clone(), "direction outside [-180, 180]".into()));
            }
            let (x, y) = (a.x.unwrap_or(0.0), a.y.unwrap_or(0.0));
            if !x.is_finite() || !y.is_finite() {
                return Err(LoadError::Actor(a.name.clone(), "non-finite position".into()));
            }
            let mut actor = Actor {
                name: a.name.clone(),
                is_stage: a.is_stage,
                costumes,
                sounds: a
                    .sounds
                    .iter()
                    .map(|s| Sound { name: s.name.clone(), duration_seconds: s.duration_seconds.max(0.0) })
                    .collect(),
                variables: a.variables.clone(),
                lists: a.lists.clone(),
                scripts: vec![],
                procedures: BTreeMap::new(),
                x: if a.is_stage { 0.0 } else { x },
                y: if a.is_stage { 0.0 } else { y },
                direction,
                size: a.size.unwrap_or(100.0),
                visible: a.visible.unwrap_or(!a.is_stage),
                costume,
                volume: a.volume.unwrap_or(100.0).clamp(0.0, 100.0),
                layer: if a.is_stage { 0 } else { ai as i64 + 1 },
            };
            for sd in &a.scripts {
                let si = scripts.len();
                scripts.push(Script { actor: ai, hat: None, body: 0, kind: ScriptKind::Event });
                let hat = match &sd.hat {
                    Some(h) => {
                        let hb = b.block(h, si, None, Shape::Hat)?;
                        let op = b.blocks[hb].opcode;
                        if op == Opcode::ProcedureDefinition {
                            return Err(LoadError::Invalid {
                                id: h.id.clone(),
                                msg: "procedure definitions belong in customBlocks".into(),
                            });
                        }
                        if a.is_stage && matches!(op, Opcode::SpriteClicked | Opcode::StartAsClone) {
                            return Err(LoadError::Invalid {
                                id: h.id.clone(),
                                msg: format!("`{}` is not available on the stage", op.name()),
                            });
                        }
                        Some(hb)
                    }
                    None => None,
                };
                let body = b.seq(&sd.body, si, hat)?;
                scripts[si].hat = hat;
                scripts[si].body = body;
                actor.scripts.push(si);
            }
            for sd in &a.custom_blocks {
                let si = scripts.len();
                let h = sd.hat.as_ref().ok_or_else(|| {
                    LoadError::Actor(a.name.clone(), "custom block without a definition hat".into())
                })?;
                scripts.push(Script { actor: ai, hat: None, body: 0, kind: ScriptKind::Event });
                let hb = b.block(h, si, None, Shape::Hat)?;
                if b.blocks[hb].opcode != Opcode::ProcedureDefinition {
                    return Err(LoadError::Invalid {
                        id: h.id.clone(),
                        msg: "custom blocks must start with procedureDefinition".into(),
                    });
                }
                let pname = b.blocks[hb].lit(0).unwrap_or_default();
                if actor.procedures.contains_key(&pname) {
                    return Err(LoadError::Invalid { id: h.id.clone(), msg: format!("procedure `{}` defined twice", pname) });
                }
                let body = b.seq(&sd.body, si, Some(hb))?;
                scripts[si] = Script { actor: ai, hat: Some(hb), body, kind: ScriptKind::Procedure(pname.clone()) };
                actor.procedures.insert(pname, si);
            }
            actors.push(actor);
        }
        let name = doc.name.clone().unwrap_or_else(|| "project".into());
        let mut p = Project {
            doc,
            name,
            stage_width: 0.0,
            stage_height: 0.0,
            actors,
            stage,
            blocks: b.blocks,
            seqs: b.seqs,
            scripts,
            warnings: vec![],
            ids: b.ids,
        };
        p.stage_width = p.doc.stage.width;
        p.stage_height = p.doc.stage.height;
        p.check_references()?;
        Ok(p)
    }

    fn check_references(&mut self) -> Result<(), LoadError> {
        let messages: BTreeSet<String> = self
            .hats_with(Opcode::BroadcastReceived)
            .filter_map(|h| self.blocks[h].lit(0))
            .collect();
        let backdrops: BTreeSet<String> =
            self.actors[self.stage].costumes.iter().map(|c| c.name.clone()).collect();
        let mut warnings = vec![];
        for (ix, blk) in self.blocks.iter().enumerate() {
            let actor = &self.actors[self.scripts[blk.script].actor];
            match blk.opcode {
                Opcode::Broadcast | Opcode::BroadcastAndWait => {
                    if let Some(m) = blk.lit(0) {
                        if !messages.contains(&m) {
                            warnings.push(format!("block `{}`: no receiver for message `{}`", blk.id, m));
                        }
                    }
                }
                Opcode::BroadcastReceived => {}
                Opcode::CreateClone => {
                    let t = blk.lit(0).unwrap_or_default();
                    let ok = if t == MYSELF {
                        !actor.is_stage
                    } else {
                        self.actors.iter().any(|a| a.name == t && !a.is_stage)
                    };
                    if !ok {
                        warnings.push(format!("block `{}`: unknown clone target `{}`", blk.id, t));
                    }
                }
                Opcode::SwitchBackdrop => {
                    if let Some(n) = blk.lit(0) {
                        if !backdrops.contains(&n) && crate::value::parse_leading_number(&n) == 0.0 {
                            warnings.push(format!("block `{}`: unknown backdrop `{}`", blk.id, n));
                        }
                    }
                }
                Opcode::CallProcedure => {
                    let n = blk.lit(0).unwrap_or_default();
                    if !actor.procedures.contains_key(&n) {
                        return Err(LoadError::Invalid {
                            id: blk.id.clone(),
                            msg: format!("unknown procedure `{}`", n),
                        });
                    }
                }
                Opcode::PlaySoundUntilDone => {
                    let n = blk.lit(0).unwrap_or_default();
                    if !actor.sounds.iter().any(|s| s.name == n) {
                        warnings.push(format!("block `{}`: unknown sound `{}`", blk.id, n));
                    }
                }
                _ => {}
            }
            let _ = ix;
        }
        for s in &self.scripts {
            if s.hat.is_none() {
                warnings.push(format!(
                    "actor `{}`: script without hat is never scheduled",
                    self.actors[s.actor].name
                ));
            }
        }
        self.warnings = warnings;
        Ok(())
    }

    pub fn block_ix(&self, id: &str) -> Option<BlockIx> {
        self.ids.get(id).copied()
    }

    pub fn actor_ix(&self, name: &str) -> Option<ActorIx> {
        self.actors.iter().position(|a| a.name == name)
    }

    /// Hat blocks with a given opcode, in declaration order.
    pub fn hats_with(&self, op: Opcode) -> impl Iterator<Item = BlockIx> + '_ {
        self.scripts
            .iter()
            .filter_map(|s| s.hat)
            .filter(move |&h| self.blocks[h].opcode == op)
    }

    pub fn actor_of_block(&self, b: BlockIx) -> ActorIx {
        self.scripts[self.blocks[b].script].actor
    }

    /// Scripts in scheduling order: actors in declaration order, event
    /// scripts before custom blocks.
    pub fn scripts_in_order(&self) -> Vec<ScriptIx> {
        let mut out = vec![];
        for a in &self.actors {
            out.extend(a.scripts.iter().copied());
            out.extend(a.procedures.values().copied());
        }
        out.sort_by_key(|&s| (self.scripts[s].actor, s));
        out
    }

    /// Pre-order walk of a script: hat, then statements, each followed by its
    /// argument expressions and nested sequences.
    pub fn script_preorder(&self, s: ScriptIx) -> Vec<BlockIx> {
        let mut out = vec![];
        if let Some(h) = self.scripts[s].hat {
            self.preorder_block(h, &mut out);
        }
        self.preorder_seq(self.scripts[s].body, &mut out);
        out
    }

    /// Pre-order walk of one block and everything nested in it.
    pub fn preorder_block(&self, b: BlockIx, out: &mut Vec<BlockIx>) {
        out.push(b);
        for a in &self.blocks[b].args {
            if let Arg::Block(c) = a {
                self.preorder_block(*c, out);
            }
        }
        for &sq in &self.blocks[b].children {
            self.preorder_seq(sq, out);
        }
    }

    fn preorder_seq(&self, sq: SeqIx, out: &mut Vec<BlockIx>) {
        for &b in &self.seqs[sq] {
            self.preorder_block(b, out);
        }
    }

    /// Blocks that are coverage goals: hats and statements, in pre-order.
    pub fn coverable_blocks(&self) -> Vec<BlockIx> {
        let mut out = vec![];
        for s in self.scripts_in_order() {
            for b in self.script_preorder(s) {
                if !self.blocks[b].opcode.is_expression() {
                    out.push(b);
                }
            }
        }
        out
    }

    /// Variable names visible to an actor: its own then the stage's.
    pub fn visible_variables(&self, actor: ActorIx) -> Vec<String> {
        let mut v: Vec<String> = self.actors[actor].variables.keys().cloned().collect();
        if actor != self.stage {
            for k in self.actors[self.stage].variables.keys() {
                if !v.contains(k) {
                    v.push(k.clone());
                }
            }
        }
        v
    }
}
