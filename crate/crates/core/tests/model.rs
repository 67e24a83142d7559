mod common;

use std::collections::BTreeSet;

use ccs_core::ingest::RawProject;
use ccs_core::metrics::{elaboration_raw, originality_raw};
use ccs_core::model::{
    build_studio_index, extract_elements, extract_scripts, parse_project, parse_project_value,
    Category, Diagnostics, Element, ModelError,
};
use common::{fixture_json, STUDIO_FIXTURES};
use serde_json::{json, Value};

#[test]
fn tiny_maze_elaboration() {
    let p = parse_project_value("maze", &fixture_json("tiny_maze.json")).unwrap();
    let scripts = extract_scripts(&p);
    assert_eq!(scripts.scripts.len(), 2);
    assert_eq!(scripts.scripts.iter().map(|s| s.depth).max(), Some(4));
    let bag = extract_elements(&p);
    assert_eq!(bag.occurrences(Category::Block), 7);
    assert_eq!(bag.occurrences(Category::Costume), 1);
    assert_eq!(elaboration_raw(&bag), 14.0);
}

#[test]
fn nested_loops_depth() {
    let p = parse_project_value("loops", &fixture_json("nested_loops.json")).unwrap();
    let bag = extract_elements(&p);
    assert_eq!(bag.max_depth, 4);
    assert_eq!(bag.script_count, 1);
    assert_eq!(bag.count(&Element::new(Category::Argument, "number:10")), 1);
    assert_eq!(bag.count(&Element::new(Category::Argument, "text:Hello!")), 1);
}

#[test]
fn alpha_elaboration_by_hand() {
    let p = parse_project_value("alpha", &fixture_json("studio_alpha.json")).unwrap();
    let bag = extract_elements(&p);
    assert_eq!(bag.occurrences(Category::Block), 10);
    assert_eq!(bag.occurrences(Category::Argument), 9);
    assert_eq!(bag.occurrences(Category::ActionKey), 1);
    assert_eq!(bag.occurrences(Category::Monitor), 1);
    assert_eq!(bag.occurrences(Category::Extension), 1);
    assert_eq!((bag.script_count, bag.max_depth), (3, 3));
    assert_eq!(elaboration_raw(&bag), 32.0);
}

#[test]
fn beta_diagnostics_and_procedures() {
    let p = parse_project_value("beta", &fixture_json("studio_beta.json")).unwrap();
    let scripts = extract_scripts(&p);
    let diag = Diagnostics::of(&p, &scripts);
    assert_eq!(diag.orphan_blocks, 1);
    assert!(diag.dangling_refs.is_empty());
    let bag = extract_elements(&p);
    assert_eq!(bag.count(&Element::new(Category::Extension, "procedure:jump %s")), 1);
    assert_eq!(bag.count(&Element::new(Category::ActionKey, "left arrow")), 1);
    assert_eq!(bag.count(&Element::new(Category::Argument, "text:hmm")), 0);
}

#[test]
fn scripts_partition_blocks() {
    for (_, file) in STUDIO_FIXTURES {
        let p = parse_project_value("p", &fixture_json(file)).unwrap();
        let set = extract_scripts(&p);
        let mut seen = BTreeSet::new();
        for s in &set.scripts {
            for b in &s.blocks {
                assert!(seen.insert((s.target, b.clone())), "{b} in two scripts");
            }
        }
        for o in &set.orphans {
            assert!(seen.insert(o.clone()));
        }
        let total: usize = p.targets.iter().map(|t| t.blocks.len()).sum();
        assert_eq!(seen.len(), total);
    }
}

#[test]
fn format_and_schema_errors() {
    let raw = |s: &str| RawProject::new("x", s.as_bytes().to_vec(), Default::default());
    assert!(matches!(
        parse_project(&raw(r#"{"objName": "Stage", "children": []}"#)),
        Err(ModelError::UnsupportedFormat)
    ));
    assert!(matches!(parse_project(&raw("[1]")), Err(ModelError::Schema { .. })));
    let cyc = json!({"targets": [{"name": "S", "blocks": {
        "a": {"opcode": "motion_movesteps", "next": "b", "topLevel": true},
        "b": {"opcode": "motion_movesteps", "next": "a"}
    }}]});
    assert!(matches!(
        parse_project_value("c", &cyc),
        Err(ModelError::CyclicBlocks { .. })
    ));
}

#[test]
fn dangling_reference_is_reported_not_fatal() {
    let doc = json!({"targets": [{"name": "S", "blocks": {
        "a": {"opcode": "event_whenflagclicked", "next": "ghost", "topLevel": true}
    }}]});
    let p = parse_project_value("d", &doc).unwrap();
    let diag = Diagnostics::of(&p, &extract_scripts(&p));
    assert_eq!(diag.dangling_refs.len(), 1);
    assert!(diag.dangling_refs[0].contains("ghost"));
}

#[test]
fn flat_oracle_matches_pipeline() {
    let docs: Vec<(&str, Value)> = STUDIO_FIXTURES
        .iter()
        .map(|(id, f)| (*id, fixture_json(f)))
        .collect();
    let bags: Vec<_> = docs
        .iter()
        .map(|(id, d)| extract_elements(&parse_project_value(id, d).unwrap()))
        .collect();
    let index = build_studio_index(&bags).unwrap();
    for ((id, o, e), bag) in common::flat::studio_scores(&docs).into_iter().zip(&bags) {
        assert_eq!(id, bag.project_id);
        assert!((originality_raw(bag, &index).unwrap() - o).abs() <= 1e-12);
        assert!((elaboration_raw(bag) - e).abs() <= 1e-12);
    }
}
