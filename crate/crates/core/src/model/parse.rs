use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::{Map, Value};

use super::ModelError;
use crate::ingest::RawProject;

pub type BlockId = String;

#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub project_id: String,
    pub targets: Vec<Target>,
    pub extensions: Vec<String>,
    pub monitors: Vec<Monitor>,
    /// References that pointed at missing blocks and were dropped.
    pub dangling_refs: Vec<DanglingRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub name: String,
    pub is_stage: bool,
    pub blocks: BTreeMap<BlockId, Block>,
    pub costumes: Vec<Costume>,
    pub sounds: Vec<Sound>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub opcode: String,
    pub next: Option<BlockId>,
    pub parent: Option<BlockId>,
    pub inputs: BTreeMap<String, Input>,
    pub fields: BTreeMap<String, String>,
    pub shadow: bool,
    pub top_level: bool,
    /// `mutation.proccode` of custom-block prototypes and calls.
    pub proccode: Option<String>,
}

impl Block {
    /// Block ids this block points at: `next`, then inputs in name order.
    pub fn children(&self) -> impl Iterator<Item = &BlockId> {
        self.next.iter().chain(self.inputs.values().flat_map(Input::block_refs))
    }

    pub fn has_children(&self) -> bool {
        self.children().next().is_some()
    }

    /// Event and definition blocks that start a script.
    pub fn is_hat(&self) -> bool {
        is_hat_opcode(&self.opcode)
    }
}

pub fn is_hat_opcode(opcode: &str) -> bool {
    match opcode {
        "control_start_as_clone" | "procedures_definition" => true,
        _ => opcode
            .split_once('_')
            .is_some_and(|(_, rest)| rest.starts_with("when")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Input {
    pub value: InputValue,
    /// Shadow hidden under a reporter dropped into the slot.
    pub obscured: Option<InputValue>,
}

impl Input {
    pub fn block_refs(&self) -> impl Iterator<Item = &BlockId> {
        self.value
            .block_ref()
            .into_iter()
            .chain(self.obscured.as_ref().and_then(InputValue::block_ref))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputValue {
    Literal(Literal),
    Block(BlockId),
    Substack(BlockId),
    Empty,
}

impl InputValue {
    pub fn block_ref(&self) -> Option<&BlockId> {
        match self {
            InputValue::Block(id) | InputValue::Substack(id) => Some(id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Literal {
    pub kind: LiteralKind,
    pub value: String,
}

/// Compact primitive codes 4 through 13 of the project format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LiteralKind {
    Number,
    PositiveNumber,
    WholeNumber,
    Integer,
    Angle,
    Color,
    Text,
    Broadcast,
    Variable,
    List,
}

impl LiteralKind {
    pub fn from_code(code: i64) -> Option<Self> {
        Some(match code {
            4 => LiteralKind::Number,
            5 => LiteralKind::PositiveNumber,
            6 => LiteralKind::WholeNumber,
            7 => LiteralKind::Integer,
            8 => LiteralKind::Angle,
            9 => LiteralKind::Color,
            10 => LiteralKind::Text,
            11 => LiteralKind::Broadcast,
            12 => LiteralKind::Variable,
            13 => LiteralKind::List,
            _ => return None,
        })
    }

    /// Type prefix used in Argument element keys.
    pub fn type_name(self) -> &'static str {
        match self {
            LiteralKind::Number
            | LiteralKind::PositiveNumber
            | LiteralKind::WholeNumber
            | LiteralKind::Integer => "number",
            LiteralKind::Angle => "angle",
            LiteralKind::Color => "color",
            LiteralKind::Text => "text",
            LiteralKind::Broadcast => "message",
            LiteralKind::Variable => "variable",
            LiteralKind::List => "list",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Costume {
    pub name: String,
    pub asset_id: String,
    pub md5ext: String,
    pub data_format: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sound {
    pub name: String,
    pub asset_id: String,
    pub md5ext: String,
    pub data_format: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monitor {
    pub id: String,
    pub opcode: String,
    pub params: BTreeMap<String, String>,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DanglingRef {
    pub target: String,
    pub block: BlockId,
    /// `next`, `parent`, or `inputs.<NAME>`.
    pub slot: String,
    pub missing: BlockId,
}

impl std::fmt::Display for DanglingRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}/{}.{} -> {}",
            self.target, self.block, self.slot, self.missing
        )
    }
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

/// Scalar JSON values as the strings the editor would show.
fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn opt_str(obj: &Map<String, Value>, key: &str) -> String {
    obj.get(key).and_then(scalar_string).unwrap_or_default()
}

/// Parses a [`RawProject`] into the typed model.
pub fn parse_project(raw: &RawProject) -> Result<Project, ModelError> {
    let doc: Value = serde_json::from_slice(&raw.project_json)
        .map_err(|e| schema("$", format!("invalid JSON: {e}")))?;
    parse_project_value(&raw.project_id, &doc)
}

pub fn parse_project_value(project_id: &str, doc: &Value) -> Result<Project, ModelError> {
    let root = doc
        .as_object()
        .ok_or_else(|| schema("$", "project document is not an object"))?;
    if root.contains_key("objName") || !root.contains_key("targets") {
        return Err(ModelError::UnsupportedFormat);
    }
    let targets_json = root
        .get("targets")
        .and_then(Value::as_array)
        .ok_or_else(|| schema("$.targets", "expected an array"))?;
    if targets_json.is_empty() {
        return Err(schema("$.targets", "project has no targets"));
    }

    let mut dangling_refs = Vec::new();
    let mut targets = Vec::with_capacity(targets_json.len());
    let mut names = BTreeSet::new();
    for (i, t) in targets_json.iter().enumerate() {
        let path = format!("$.targets[{i}]");
        let mut target = parse_target(&path, t)?;
        if !names.insert(target.name.clone()) {
            return Err(schema(path, format!("duplicate target name {:?}", target.name)));
        }
        resolve_references(&mut target, &mut dangling_refs);
        check_acyclic(&target)?;
        targets.push(target);
    }

    let extensions = match root.get("extensions") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items.iter().filter_map(scalar_string).collect(),
        Some(_) => return Err(schema("$.extensions", "expected an array")),
    };

    let monitors = match root.get("monitors") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, m)| parse_monitor(&format!("$.monitors[{i}]"), m))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(schema("$.monitors", "expected an array")),
    };

    Ok(Project {
        project_id: project_id.to_string(),
        targets,
        extensions,
        monitors,
        dangling_refs,
    })
}

fn parse_target(path: &str, t: &Value) -> Result<Target, ModelError> {
    let obj = t
        .as_object()
        .ok_or_else(|| schema(path, "target is not an object"))?;
    let name = obj
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| schema(format!("{path}.name"), "missing target name"))?
        .to_string();
    let is_stage = obj.get("isStage").and_then(Value::as_bool).unwrap_or(false);

    let mut blocks = BTreeMap::new();
    match obj.get("blocks") {
        None | Some(Value::Null) => {}
        Some(Value::Object(map)) => {
            for (id, b) in map {
                let bpath = format!("{path}.blocks.{id}");
                blocks.insert(id.clone(), parse_block(&bpath, b)?);
            }
        }
        Some(_) => return Err(schema(format!("{path}.blocks"), "expected an object")),
    }

    let media = |key: &str| -> Result<Vec<(String, String, String, String)>, ModelError> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(Vec::new()),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, item)| {
                    let m = item.as_object().ok_or_else(|| {
                        schema(format!("{path}.{key}[{i}]"), "expected an object")
                    })?;
                    let asset_id = opt_str(m, "assetId");
                    let data_format = opt_str(m, "dataFormat");
                    let md5ext = match m.get("md5ext").and_then(Value::as_str) {
                        Some(s) => s.to_string(),
                        None if !asset_id.is_empty() => format!("{asset_id}.{data_format}"),
                        None => String::new(),
                    };
                    Ok((opt_str(m, "name"), asset_id, md5ext, data_format))
                })
                .collect(),
            Some(_) => Err(schema(format!("{path}.{key}"), "expected an array")),
        }
    };
    let costumes = media("costumes")?
        .into_iter()
        .map(|(name, asset_id, md5ext, data_format)| Costume {
            name,
            asset_id,
            md5ext,
            data_format,
        })
        .collect();
    let sounds = media("sounds")?
        .into_iter()
        .map(|(name, asset_id, md5ext, data_format)| Sound {
            name,
            asset_id,
            md5ext,
            data_format,
        })
        .collect();

    Ok(Target {
        name,
        is_stage,
        blocks,
        costumes,
        sounds,
    })
}

fn parse_block(path: &str, b: &Value) -> Result<Block, ModelError> {
    match b {
        Value::Object(obj) => parse_block_object(path, obj),
        // Loose variable/list reporters sitting on the canvas are stored as
        // `[kind, name, id, x, y]`.
        Value::Array(arr) => {
            let code = arr.first().and_then(Value::as_i64);
            let name = arr.get(1).and_then(scalar_string).unwrap_or_default();
            let (opcode, field) = match code {
                Some(12) => ("data_variable", "VARIABLE"),
                Some(13) => ("data_listcontents", "LIST"),
                _ => return Err(schema(path, "unsupported top-level primitive")),
            };
            Ok(Block {
                opcode: opcode.into(),
                next: None,
                parent: None,
                inputs: BTreeMap::new(),
                fields: BTreeMap::from([(field.to_string(), name)]),
                shadow: false,
                top_level: true,
                proccode: None,
            })
        }
        _ => Err(schema(path, "block is neither an object nor an array")),
    }
}

fn block_ref(path: &str, v: Option<&Value>) -> Result<Option<BlockId>, ModelError> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(schema(path, "expected a block id or null")),
    }
}

fn parse_block_object(path: &str, obj: &Map<String, Value>) -> Result<Block, ModelError> {
    let opcode = obj
        .get("opcode")
        .and_then(Value::as_str)
        .ok_or_else(|| schema(format!("{path}.opcode"), "missing opcode"))?
        .to_string();
    let next = block_ref(&format!("{path}.next"), obj.get("next"))?;
    let parent = block_ref(&format!("{path}.parent"), obj.get("parent"))?;

    let mut inputs = BTreeMap::new();
    match obj.get("inputs") {
        None | Some(Value::Null) => {}
        Some(Value::Object(map)) => {
            for (name, v) in map {
                let ipath = format!("{path}.inputs.{name}");
                inputs.insert(name.clone(), parse_input(&ipath, name, v)?);
            }
        }
        Some(_) => return Err(schema(format!("{path}.inputs"), "expected an object")),
    }

    let mut fields = BTreeMap::new();
    match obj.get("fields") {
        None | Some(Value::Null) => {}
        Some(Value::Object(map)) => {
            for (name, v) in map {
                let value = match v {
                    Value::Array(arr) => arr.first().and_then(scalar_string),
                    other => scalar_string(other),
                };
                if let Some(value) = value {
                    fields.insert(name.clone(), value);
                }
            }
        }
        Some(_) => return Err(schema(format!("{path}.fields"), "expected an object")),
    }

    let proccode = obj
        .get("mutation")
        .and_then(|m| m.get("proccode"))
        .and_then(Value::as_str)
        .map(str::to_owned);

    Ok(Block {
        opcode,
        next,
        parent,
        inputs,
        fields,
        shadow: obj.get("shadow").and_then(Value::as_bool).unwrap_or(false),
        top_level: obj.get("topLevel").and_then(Value::as_bool).unwrap_or(false),
        proccode,
    })
}

fn parse_input(path: &str, name: &str, v: &Value) -> Result<Input, ModelError> {
    let arr = v
        .as_array()
        .ok_or_else(|| schema(path, "input is not an array"))?;
    let shadow_type = arr
        .first()
        .and_then(Value::as_i64)
        .ok_or_else(|| schema(format!("{path}[0]"), "missing shadow type"))?;
    let substack = name.starts_with("SUBSTACK");
    let value = parse_input_value(&format!("{path}[1]"), substack, arr.get(1))?;
    let obscured = match (shadow_type, arr.get(2)) {
        (3, Some(v)) => match parse_input_value(&format!("{path}[2]"), false, Some(v))? {
            InputValue::Empty => None,
            other => Some(other),
        },
        (1..=3, _) => None,
        _ => return Err(schema(format!("{path}[0]"), "unknown shadow type")),
    };
    Ok(Input { value, obscured })
}

fn parse_input_value(path: &str, substack: bool, v: Option<&Value>) -> Result<InputValue, ModelError> {
    match v {
        None | Some(Value::Null) => Ok(InputValue::Empty),
        Some(Value::String(id)) if substack => Ok(InputValue::Substack(id.clone())),
        Some(Value::String(id)) => Ok(InputValue::Block(id.clone())),
        Some(Value::Array(prim)) => {
            let code = prim
                .first()
                .and_then(Value::as_i64)
                .ok_or_else(|| schema(format!("{path}[0]"), "missing primitive code"))?;
            let kind = LiteralKind::from_code(code)
                .ok_or_else(|| schema(format!("{path}[0]"), format!("unknown primitive {code}")))?;
            let value = prim.get(1).and_then(scalar_string).unwrap_or_default();
            Ok(InputValue::Literal(Literal { kind, value }))
        }
        Some(_) => Err(schema(path, "unexpected input value")),
    }
}

fn parse_monitor(path: &str, m: &Value) -> Result<Monitor, ModelError> {
    let obj = m
        .as_object()
        .ok_or_else(|| schema(path, "monitor is not an object"))?;
    let opcode = obj
        .get("opcode")
        .and_then(Value::as_str)
        .ok_or_else(|| schema(format!("{path}.opcode"), "missing opcode"))?
        .to_string();
    let params = obj
        .get("params")
        .and_then(Value::as_object)
        .map(|p| {
            p.iter()
                .filter_map(|(k, v)| scalar_string(v).map(|s| (k.clone(), s)))
                .collect()
        })
        .unwrap_or_default();
    Ok(Monitor {
        id: opt_str(obj, "id"),
        opcode,
        params,
        visible: obj.get("visible").and_then(Value::as_bool).unwrap_or(true),
    })
}

/// Drops references to blocks that do not exist, recording each one.
fn resolve_references(target: &mut Target, dangling: &mut Vec<DanglingRef>) {
    let ids: BTreeSet<BlockId> = target.blocks.keys().cloned().collect();
    let mut record = |block: &str, slot: String, missing: &str| {
        dangling.push(DanglingRef {
            target: target.name.clone(),
            block: block.to_string(),
            slot,
            missing: missing.to_string(),
        });
    };
    for (id, block) in target.blocks.iter_mut() {
        for (slot, link) in [("next", &mut block.next), ("parent", &mut block.parent)] {
            if link.as_ref().is_some_and(|to| !ids.contains(to)) {
                record(id, slot.into(), link.as_deref().unwrap_or_default());
                *link = None;
            }
        }
        for (name, input) in block.inputs.iter_mut() {
            let slot = format!("inputs.{name}");
            if input.value.block_ref().is_some_and(|to| !ids.contains(to)) {
                record(id, slot.clone(), input.value.block_ref().unwrap());
                input.value = InputValue::Empty;
            }
            if input
                .obscured
                .as_ref()
                .and_then(InputValue::block_ref)
                .is_some_and(|to| !ids.contains(to))
            {
                let missing = input.obscured.as_ref().and_then(InputValue::block_ref).unwrap();
                record(id, slot, missing);
                input.obscured = None;
            }
        }
    }
}

/// Rejects targets whose next/input edges contain a cycle.
fn check_acyclic(target: &Target) -> Result<(), ModelError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();
    for start in target.blocks.keys() {
        if marks.contains_key(start.as_str()) {
            continue;
        }
        // (block, children already pushed)
        let mut stack: Vec<(&str, bool)> = vec![(start, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                marks.insert(id, Mark::Done);
                continue;
            }
            match marks.get(id) {
                Some(Mark::Done) => continue,
                Some(Mark::Open) => continue,
                None => {}
            }
            marks.insert(id, Mark::Open);
            stack.push((id, true));
            for child in target.blocks[id].children() {
                match marks.get(child.as_str()) {
                    Some(Mark::Open) => {
                        return Err(ModelError::CyclicBlocks {
                            target: target.name.clone(),
                            block: child.clone(),
                        })
                    }
                    Some(Mark::Done) => {}
                    None => stack.push((child, false)),
                }
            }
        }
    }
    Ok(())
}
