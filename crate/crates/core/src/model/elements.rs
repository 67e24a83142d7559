use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::parse::{InputValue, Project};
use super::scripts::extract_scripts;
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Block,
    Costume,
    Sound,
    Monitor,
    Argument,
    ActionKey,
    Extension,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Block,
        Category::Costume,
        Category::Sound,
        Category::Monitor,
        Category::Argument,
        Category::ActionKey,
        Category::Extension,
    ];
}

/// A canonical project element: category plus identity key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Element {
    pub category: Category,
    pub key: String,
}

impl Element {
    pub fn new(category: Category, key: impl Into<String>) -> Self {
        Element {
            category,
            key: key.into(),
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}:{}", self.category, self.key)
    }
}

/// Element occurrence counts of one project, plus script shape.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ElementBag {
    pub project_id: String,
    pub counts: BTreeMap<Element, u64>,
    pub script_count: usize,
    pub max_depth: usize,
}

impl ElementBag {
    pub fn new(project_id: impl Into<String>) -> Self {
        ElementBag {
            project_id: project_id.into(),
            ..Default::default()
        }
    }

    /// Adds one occurrence. Empty keys are ignored.
    pub fn add(&mut self, category: Category, key: impl Into<String>) {
        let key = key.into();
        if key.is_empty() {
            return;
        }
        *self.counts.entry(Element::new(category, key)).or_insert(0) += 1;
    }

    pub fn count(&self, element: &Element) -> u64 {
        self.counts.get(element).copied().unwrap_or(0)
    }

    pub fn occurrences(&self, category: Category) -> u64 {
        self.counts
            .iter()
            .filter(|(e, _)| e.category == category)
            .map(|(_, n)| n)
            .sum()
    }

    pub fn distinct(&self) -> impl Iterator<Item = &Element> {
        self.counts.keys()
    }
}

/// Argument type prefix for a field, or `None` for key-option fields.
fn field_type(name: &str) -> Option<String> {
    match name {
        "KEY_OPTION" => None,
        "VARIABLE" => Some("variable".into()),
        "LIST" => Some("list".into()),
        "BROADCAST_OPTION" => Some("message".into()),
        other => Some(other.to_ascii_lowercase()),
    }
}

pub fn monitor_key(opcode: &str, params: &BTreeMap<String, String>) -> String {
    let params: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{opcode}({})", params.join(","))
}

/// Canonical element multiset of a project.
///
/// - Block: opcode of every non-shadow block, scripted or orphaned.
/// - Costume / Sound: asset id (content md5).
/// - Monitor: opcode and parameters of each visible monitor.
/// - Argument: `<type>:<value>` of literal inputs and of fields other than
///   key options.
/// - ActionKey: value of every `KEY_OPTION` field.
/// - Extension: entries of the extension list, and `procedure:<proccode>`
///   for each custom block prototype.
pub fn extract_elements(project: &Project) -> ElementBag {
    let mut bag = ElementBag::new(&project.project_id);

    for target in &project.targets {
        for block in target.blocks.values() {
            if !block.shadow {
                bag.add(Category::Block, &block.opcode);
            }
            if block.opcode == "procedures_prototype" {
                if let Some(code) = &block.proccode {
                    bag.add(Category::Extension, format!("procedure:{code}"));
                }
            }
            for input in block.inputs.values() {
                if let InputValue::Literal(lit) = &input.value {
                    if !lit.value.is_empty() {
                        bag.add(
                            Category::Argument,
                            format!("{}:{}", lit.kind.type_name(), lit.value),
                        );
                    }
                }
            }
            for (name, value) in &block.fields {
                if value.is_empty() {
                    continue;
                }
                match field_type(name) {
                    None => bag.add(Category::ActionKey, value),
                    Some(ty) => bag.add(Category::Argument, format!("{ty}:{value}")),
                }
            }
        }
        for costume in &target.costumes {
            let key = if costume.asset_id.is_empty() {
                &costume.md5ext
            } else {
                &costume.asset_id
            };
            bag.add(Category::Costume, key);
        }
        for sound in &target.sounds {
            let key = if sound.asset_id.is_empty() {
                &sound.md5ext
            } else {
                &sound.asset_id
            };
            bag.add(Category::Sound, key);
        }
    }

    for monitor in project.monitors.iter().filter(|m| m.visible) {
        bag.add(Category::Monitor, monitor_key(&monitor.opcode, &monitor.params));
    }
    for ext in &project.extensions {
        bag.add(Category::Extension, ext);
    }

    let scripts = extract_scripts(project);
    bag.script_count = scripts.scripts.len();
    bag.max_depth = scripts.scripts.iter().map(|s| s.depth).max().unwrap_or(0);
    bag
}

/// Document frequency of every element across a studio.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StudioIndex {
    pub project_ids: Vec<String>,
    pub df: BTreeMap<Element, usize>,
}

impl StudioIndex {
    /// Adds one project. Only presence counts, not multiplicity.
    pub fn add(&mut self, bag: &ElementBag) -> Result<(), ModelError> {
        if self.project_ids.contains(&bag.project_id) {
            return Err(ModelError::DuplicateProjectId(bag.project_id.clone()));
        }
        self.project_ids.push(bag.project_id.clone());
        for element in bag.distinct() {
            *self.df.entry(element.clone()).or_insert(0) += 1;
        }
        Ok(())
    }

    pub fn df(&self, element: &Element) -> Option<usize> {
        self.df.get(element).copied()
    }

    pub fn len(&self) -> usize {
        self.project_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.project_ids.is_empty()
    }
}

pub fn build_studio_index(bags: &[ElementBag]) -> Result<StudioIndex, ModelError> {
    if bags.is_empty() {
        return Err(ModelError::EmptyIndex);
    }
    let mut ids = BTreeSet::new();
    if let Some(dup) = bags.iter().find(|b| !ids.insert(b.project_id.as_str())) {
        return Err(ModelError::DuplicateProjectId(dup.project_id.clone()));
    }
    let mut index = StudioIndex::default();
    for bag in bags {
        index.add(bag)?;
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse::parse_project_value;
    use serde_json::json;

    fn bag_with(id: &str, elements: &[(Category, &str, u64)]) -> ElementBag {
        let mut bag = ElementBag::new(id);
        for (c, k, n) in elements {
            for _ in 0..*n {
                bag.add(*c, *k);
            }
        }
        bag
    }

    #[test]
    fn block_multiset() {
        let p = parse_project_value(
            "p",
            &json!({"targets": [{"name": "Stage", "isStage": true, "blocks": {
                "a": {"opcode": "motion_movesteps", "next": "b", "parent": null, "topLevel": true},
                "b": {"opcode": "motion_movesteps", "next": "c", "parent": "a", "topLevel": false},
                "c": {"opcode": "motion_movesteps", "next": null, "parent": "b", "topLevel": false}
            }}]}),
        )
        .unwrap();
        let bag = extract_elements(&p);
        assert_eq!(bag.count(&Element::new(Category::Block, "motion_movesteps")), 3);
    }

    #[test]
    fn key_option_is_action_key_not_argument() {
        let p = parse_project_value(
            "p",
            &json!({"targets": [{"name": "Stage", "isStage": true, "blocks": {
                "k": {"opcode": "sensing_keypressed", "next": null, "parent": null, "topLevel": true,
                      "inputs": {"KEY_OPTION": [1, "menu"]}},
                "menu": {"opcode": "sensing_keyoptions", "next": null, "parent": "k",
                         "topLevel": false, "shadow": true, "fields": {"KEY_OPTION": ["m", null]}}
            }}]}),
        )
        .unwrap();
        let bag = extract_elements(&p);
        assert_eq!(bag.count(&Element::new(Category::ActionKey, "m")), 1);
        assert_eq!(bag.occurrences(Category::Argument), 0);
        // The menu shadow is an input slot, not a block.
        assert_eq!(bag.occurrences(Category::Block), 1);
    }

    #[test]
    fn number_literal_argument() {
        let p = parse_project_value(
            "p",
            &json!({"targets": [{"name": "Stage", "isStage": true, "blocks": {
                "g": {"opcode": "motion_gotoxy", "next": null, "parent": null, "topLevel": true,
                      "inputs": {"X": [1, [4, "75"]], "Y": [1, [4, ""]]}}
            }}]}),
        )
        .unwrap();
        let bag = extract_elements(&p);
        assert_eq!(bag.count(&Element::new(Category::Argument, "number:75")), 1);
        assert_eq!(bag.occurrences(Category::Argument), 1);
    }

    #[test]
    fn media_monitors_and_extensions() {
        let p = parse_project_value(
            "p",
            &json!({
                "targets": [{"name": "Stage", "isStage": true, "blocks": {
                    "proto": {"opcode": "procedures_prototype", "next": null, "parent": null,
                              "topLevel": false, "shadow": true, "mutation": {"proccode": "jump %s"}}
                  },
                  "costumes": [{"assetId": "aa", "md5ext": "aa.svg", "dataFormat": "svg"}],
                  "sounds": [{"assetId": "bb", "md5ext": "bb.wav", "dataFormat": "wav"}]}],
                "monitors": [
                    {"id": "m1", "opcode": "data_variable", "params": {"VARIABLE": "score"}, "visible": true},
                    {"id": "m2", "opcode": "data_variable", "params": {"VARIABLE": "hidden"}, "visible": false}
                ],
                "extensions": ["pen"]
            }),
        )
        .unwrap();
        let bag = extract_elements(&p);
        assert_eq!(bag.count(&Element::new(Category::Costume, "aa")), 1);
        assert_eq!(bag.count(&Element::new(Category::Sound, "bb")), 1);
        assert_eq!(
            bag.count(&Element::new(Category::Monitor, "data_variable(VARIABLE=score)")),
            1
        );
        assert_eq!(bag.occurrences(Category::Monitor), 1);
        assert_eq!(bag.count(&Element::new(Category::Extension, "pen")), 1);
        assert_eq!(bag.count(&Element::new(Category::Extension, "procedure:jump %s")), 1);
    }

    #[test]
    fn df_counts_presence() {
        let bags = [
            bag_with("1", &[(Category::Block, "x", 5), (Category::Block, "y", 1)]),
            bag_with("2", &[(Category::Block, "y", 1)]),
            bag_with("3", &[(Category::Block, "y", 2), (Category::Block, "z", 1)]),
        ];
        let index = build_studio_index(&bags).unwrap();
        assert_eq!(index.df(&Element::new(Category::Block, "x")), Some(1));
        assert_eq!(index.df(&Element::new(Category::Block, "y")), Some(3));
        assert_eq!(index.df(&Element::new(Category::Block, "z")), Some(1));
        assert_eq!(index.len(), 3);
    }

    #[test]
    fn df_in_first_and_last() {
        let bags = [
            bag_with("1", &[(Category::Sound, "s", 1)]),
            bag_with("2", &[]),
            bag_with("3", &[(Category::Sound, "s", 1)]),
        ];
        let index = build_studio_index(&bags).unwrap();
        assert_eq!(index.df(&Element::new(Category::Sound, "s")), Some(2));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let bags = [bag_with("1", &[]), bag_with("1", &[])];
        assert!(matches!(
            build_studio_index(&bags),
            Err(ModelError::DuplicateProjectId(id)) if id == "1"
        ));
        assert!(matches!(build_studio_index(&[]), Err(ModelError::EmptyIndex)));
    }
}
