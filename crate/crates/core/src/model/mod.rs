//! Typed Scratch 3 project model, scripts, and element extraction.

mod elements;
mod parse;
mod scripts;

use serde::Serialize;
use thiserror::Error;

pub use elements::{
    build_studio_index, extract_elements, monitor_key, Category, Element, ElementBag, StudioIndex,
};
pub use parse::{
    is_hat_opcode, parse_project, parse_project_value, Block, BlockId, Costume, DanglingRef,
    Input, InputValue, Literal, LiteralKind, Monitor, Project, Sound, Target,
};
pub use scripts::{extract_scripts, script_max_depth, Script, ScriptSet};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unsupported project format (not a Scratch 3 project)")]
    UnsupportedFormat,
    #[error("malformed project at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("block cycle in target {target:?} through block {block}")]
    CyclicBlocks { target: String, block: BlockId },
    #[error("duplicate project id {0}")]
    DuplicateProjectId(String),
    #[error("studio index needs at least one project")]
    EmptyIndex,
}

/// Per-project parse diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    pub project_id: String,
    pub orphan_blocks: usize,
    pub dangling_refs: Vec<String>,
}

impl Diagnostics {
    pub fn of(project: &Project, scripts: &ScriptSet) -> Self {
        Diagnostics {
            project_id: project.project_id.clone(),
            orphan_blocks: scripts.orphans.len(),
            dangling_refs: project.dangling_refs.iter().map(ToString::to_string).collect(),
        }
    }
}
