use std::collections::{BTreeMap, BTreeSet};

use super::parse::{Block, BlockId, Project};

/// A tree of blocks hanging off one top-level block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Script {
    /// Index into [`Project::targets`].
    pub target: usize,
    pub root: BlockId,
    /// Pre-order: a block, its inputs in name order, then its `next` chain.
    pub blocks: Vec<BlockId>,
    pub depth: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptSet {
    pub scripts: Vec<Script>,
    /// Blocks not reachable from any script root, as `(target index, id)`.
    pub orphans: Vec<(usize, BlockId)>,
}

fn starts_script(block: &Block) -> bool {
    block.top_level && !block.shadow && (block.is_hat() || block.has_children())
}

/// Groups every target's blocks into scripts.
///
/// A script starts at each non-shadow top-level block that is a hat or has
/// anything attached. Each block joins at most one script; blocks left over
/// are orphans.
pub fn extract_scripts(project: &Project) -> ScriptSet {
    let mut set = ScriptSet::default();
    for (t, target) in project.targets.iter().enumerate() {
        let mut claimed: BTreeSet<&str> = BTreeSet::new();
        let mut depths = DepthMemo::default();
        for (root, block) in &target.blocks {
            if !starts_script(block) || claimed.contains(root.as_str()) {
                continue;
            }
            let mut members = Vec::new();
            let mut stack = vec![root.as_str()];
            while let Some(id) = stack.pop() {
                if !claimed.insert(id) {
                    continue;
                }
                members.push(id.to_string());
                let b = &target.blocks[id];
                // Reverse push keeps pre-order: inputs (by name) before next.
                stack.extend(b.next.iter().map(String::as_str));
                for input in b.inputs.values().rev() {
                    let refs: Vec<&BlockId> = input.block_refs().collect();
                    stack.extend(refs.into_iter().rev().map(String::as_str));
                }
            }
            let depth = depths.depth(root, &target.blocks).max(1);
            set.scripts.push(Script {
                target: t,
                root: root.clone(),
                blocks: members,
                depth,
            });
        }
        for id in target.blocks.keys() {
            if !claimed.contains(id.as_str()) {
                set.orphans.push((t, id.clone()));
            }
        }
    }
    set
}

/// Number of non-shadow blocks on the longest path from the script root to a
/// leaf, following `next` links, substacks and block-valued inputs.
pub fn script_max_depth(script: &Script, blocks: &BTreeMap<BlockId, Block>) -> usize {
    DepthMemo::default().depth(&script.root, blocks).max(1)
}

#[derive(Default)]
struct DepthMemo {
    memo: BTreeMap<BlockId, usize>,
}

impl DepthMemo {
    /// Post-order evaluation with an explicit stack; chains can be thousands
    /// of blocks long.
    fn depth(&mut self, root: &str, blocks: &BTreeMap<BlockId, Block>) -> usize {
        let mut stack: Vec<(&str, bool)> = vec![(root, false)];
        while let Some((id, ready)) = stack.pop() {
            if self.memo.contains_key(id) {
                continue;
            }
            let Some(block) = blocks.get(id) else {
                self.memo.insert(id.to_string(), 0);
                continue;
            };
            if ready {
                let below = block
                    .children()
                    .map(|c| self.memo.get(c.as_str()).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                let own = usize::from(!block.shadow);
                self.memo.insert(id.to_string(), own + below);
            } else {
                stack.push((id, true));
                stack.extend(
                    block
                        .children()
                        .filter(|c| !self.memo.contains_key(c.as_str()))
                        .map(|c| (c.as_str(), false)),
                );
            }
        }
        self.memo.get(root).copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse::parse_project_value;
    use serde_json::{json, Value};

    fn project(blocks: Value) -> Project {
        parse_project_value(
            "p",
            &json!({"targets": [{"name": "Stage", "isStage": true, "blocks": blocks}]}),
        )
        .unwrap()
    }

    fn chain(n: usize) -> Value {
        let mut blocks = serde_json::Map::new();
        for i in 0..n {
            blocks.insert(
                format!("b{i:03}"),
                json!({
                    "opcode": if i == 0 { "event_whenflagclicked" } else { "motion_movesteps" },
                    "next": if i + 1 < n { Value::from(format!("b{:03}", i + 1)) } else { Value::Null },
                    "parent": if i > 0 { Value::from(format!("b{:03}", i - 1)) } else { Value::Null },
                    "topLevel": i == 0,
                }),
            );
        }
        Value::Object(blocks)
    }

    #[test]
    fn linear_chain() {
        let p = project(chain(4));
        let set = extract_scripts(&p);
        assert_eq!(set.scripts.len(), 1);
        assert_eq!(set.scripts[0].blocks.len(), 4);
        assert_eq!(set.scripts[0].depth, 4);
        assert_eq!(script_max_depth(&set.scripts[0], &p.targets[0].blocks), 4);
    }

    #[test]
    fn single_hat() {
        let p = project(json!({
            "h": {"opcode": "event_whenflagclicked", "next": null, "parent": null, "topLevel": true}
        }));
        let set = extract_scripts(&p);
        assert_eq!(set.scripts.len(), 1);
        assert_eq!(set.scripts[0].depth, 1);
    }

    #[test]
    fn two_chains() {
        let p = project(json!({
            "a1": {"opcode": "event_whenflagclicked", "next": "a2", "parent": null, "topLevel": true},
            "a2": {"opcode": "motion_movesteps", "next": null, "parent": "a1", "topLevel": false},
            "b1": {"opcode": "event_whenthisspriteclicked", "next": "b2", "parent": null, "topLevel": true},
            "b2": {"opcode": "looks_show", "next": null, "parent": "b1", "topLevel": false}
        }));
        assert_eq!(extract_scripts(&p).scripts.len(), 2);
    }

    #[test]
    fn lone_stack_block_is_orphan() {
        let p = project(json!({
            "x": {"opcode": "motion_movesteps", "next": null, "parent": null, "topLevel": true},
            "y": {"opcode": "motion_turnright", "next": null, "parent": null, "topLevel": false}
        }));
        let set = extract_scripts(&p);
        assert!(set.scripts.is_empty());
        assert_eq!(set.orphans.len(), 2);
    }

    #[test]
    fn reporters_add_depth_shadows_do_not() {
        let p = project(json!({
            "h": {"opcode": "event_whenflagclicked", "next": "s", "parent": null, "topLevel": true},
            "s": {"opcode": "looks_say", "next": null, "parent": "h", "topLevel": false,
                  "inputs": {"MESSAGE": [3, "j", [10, "hi"]]}},
            "j": {"opcode": "operator_join", "next": null, "parent": "s", "topLevel": false,
                  "inputs": {"STRING1": [1, "m"]}},
            "m": {"opcode": "text", "next": null, "parent": "j", "topLevel": false, "shadow": true,
                  "fields": {"TEXT": ["a", null]}}
        }));
        let set = extract_scripts(&p);
        assert_eq!(set.scripts[0].blocks, ["h", "s", "j", "m"]);
        assert_eq!(set.scripts[0].depth, 3);
    }

    #[test]
    fn deep_chain_does_not_overflow() {
        let p = project(chain(20_000));
        let set = extract_scripts(&p);
        assert_eq!(set.scripts[0].depth, 20_000);
    }
}
