//! Independent re-derivation of elements, originality and elaboration
//! straight from raw project JSON.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

const HATS: [&str; 5] = [
    "event_whenflagclicked",
    "event_whenkeypressed",
    "event_whenbroadcastreceived",
    "event_whenthisspriteclicked",
    "procedures_definition",
];

fn prim_type(code: i64) -> &'static str {
    match code {
        4..=7 => "number",
        8 => "angle",
        9 => "color",
        10 => "text",
        11 => "message",
        12 => "variable",
        13 => "list",
        _ => panic!("unexpected primitive {code}"),
    }
}

fn s(v: &Value) -> String {
    match v {
        Value::String(x) => x.clone(),
        Value::Number(n) => n.to_string(),
        _ => String::new(),
    }
}

pub fn elements(doc: &Value) -> Vec<String> {
    let mut out = Vec::new();
    for t in doc["targets"].as_array().unwrap() {
        for b in t["blocks"].as_object().unwrap().values() {
            if let Some(arr) = b.as_array() {
                let (op, ty) = if arr[0] == 12 {
                    ("data_variable", "variable")
                } else {
                    ("data_listcontents", "list")
                };
                out.push(format!("Block:{op}"));
                out.push(format!("Argument:{ty}:{}", s(&arr[1])));
                continue;
            }
            let op = b["opcode"].as_str().unwrap();
            if b["shadow"] != true {
                out.push(format!("Block:{op}"));
            }
            if op == "procedures_prototype" {
                out.push(format!("Extension:procedure:{}", s(&b["mutation"]["proccode"])));
            }
            for inp in b["inputs"].as_object().unwrap().values() {
                if let Some(prim) = inp[1].as_array() {
                    let v = s(&prim[1]);
                    if !v.is_empty() {
                        out.push(format!("Argument:{}:{v}", prim_type(prim[0].as_i64().unwrap())));
                    }
                }
            }
            for (name, f) in b["fields"].as_object().unwrap() {
                let v = s(&f[0]);
                if v.is_empty() {
                    continue;
                }
                out.push(match name.as_str() {
                    "KEY_OPTION" => format!("ActionKey:{v}"),
                    "VARIABLE" => format!("Argument:variable:{v}"),
                    "LIST" => format!("Argument:list:{v}"),
                    "BROADCAST_OPTION" => format!("Argument:message:{v}"),
                    other => format!("Argument:{}:{v}", other.to_lowercase()),
                });
            }
        }
        for c in t["costumes"].as_array().unwrap() {
            out.push(format!("Costume:{}", s(&c["assetId"])));
        }
        for c in t["sounds"].as_array().unwrap() {
            out.push(format!("Sound:{}", s(&c["assetId"])));
        }
    }
    for m in doc["monitors"].as_array().unwrap() {
        if m["visible"] != false {
            let params: BTreeMap<String, String> = m["params"]
                .as_object()
                .unwrap()
                .iter()
                .map(|(k, v)| (k.clone(), s(v)))
                .collect();
            let p: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            out.push(format!("Monitor:{}({})", s(&m["opcode"]), p.join(",")));
        }
    }
    for e in doc["extensions"].as_array().unwrap() {
        out.push(format!("Extension:{}", s(e)));
    }
    out
}

fn children(b: &Value) -> Vec<String> {
    let mut c = Vec::new();
    if let Some(n) = b["next"].as_str() {
        c.push(n.to_string());
    }
    for inp in b["inputs"].as_object().unwrap().values() {
        if let Some(id) = inp[1].as_str() {
            c.push(id.to_string());
        }
    }
    c
}

fn depth(blocks: &serde_json::Map<String, Value>, id: &str) -> usize {
    let b = &blocks[id];
    let own = usize::from(b["shadow"] != true);
    own + children(b).iter().map(|c| depth(blocks, c)).max().unwrap_or(0)
}

/// (script count, max depth)
pub fn scripts(doc: &Value) -> (usize, usize) {
    let (mut count, mut max) = (0, 0);
    for t in doc["targets"].as_array().unwrap() {
        let blocks = t["blocks"].as_object().unwrap();
        for (id, b) in blocks {
            if !b.is_object() || b["topLevel"] != true || b["shadow"] == true {
                continue;
            }
            if HATS.contains(&b["opcode"].as_str().unwrap()) || !children(b).is_empty() {
                count += 1;
                max = max.max(depth(blocks, id));
            }
        }
    }
    (count, max)
}

/// `(project_id, originality_raw, elaboration_raw)` for a studio of raw
/// documents.
pub fn studio_scores(docs: &[(&str, Value)]) -> Vec<(String, f64, f64)> {
    let sets: Vec<Vec<String>> = docs.iter().map(|(_, d)| elements(d)).collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for set in &sets {
        for e in set.iter().collect::<BTreeSet<_>>() {
            *df.entry(e.as_str()).or_default() += 1;
        }
    }
    docs.iter()
        .zip(&sets)
        .map(|((id, doc), set)| {
            let o: f64 = set
                .iter()
                .collect::<BTreeSet<_>>()
                .iter()
                .map(|e| 1.0 / df[e.as_str()] as f64)
                .sum();
            let (sc, md) = scripts(doc);
            (id.to_string(), o, (set.len() + sc + md) as f64)
        })
        .collect()
}
