//! Fixture builders shared by the integration tests.
#![allow(dead_code)]

pub mod flat;

use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use serde_json::{json, Value};
use zip::write::SimpleFileOptions;

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture_json(name: &str) -> Value {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    serde_json::from_str(&text).expect("fixture is JSON")
}

pub fn png(img: &RgbImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

pub fn solid(w: u32, h: u32, rgb: [u8; 3]) -> RgbImage {
    RgbImage::from_pixel(w, h, Rgb(rgb))
}

/// White maze with thin black walls; `shift` moves one wall by a pixel so
/// the images are near-identical but not equal.
pub fn maze(shift: u32) -> RgbImage {
    let mut img = solid(64, 64, [255, 255, 255]);
    for i in 0..64 {
        img.put_pixel(i, 0, Rgb([0, 0, 0]));
        img.put_pixel(i, 63, Rgb([0, 0, 0]));
        img.put_pixel(0, i, Rgb([0, 0, 0]));
        img.put_pixel(63, i, Rgb([0, 0, 0]));
        if i < 48 {
            img.put_pixel(20 + shift, i, Rgb([0, 0, 0]));
            img.put_pixel(42, 63 - i, Rgb([0, 0, 0]));
        }
    }
    img
}

/// White and light-grey checkerboard.
pub fn checkerboard(cell: u32) -> RgbImage {
    RgbImage::from_fn(64, 64, |x, y| {
        if (x / cell + y / cell).is_multiple_of(2) {
            Rgb([200, 200, 200])
        } else {
            Rgb([255, 255, 255])
        }
    })
}

pub const SIMPLE_SVG: &[u8] = br##"<svg xmlns="http://www.w3.org/2000/svg" width="48" height="36"><rect width="48" height="36" fill="#3366cc"/></svg>"##;

/// Zips `project.json` and assets into sb3 bytes.
pub fn sb3(project: &Value, assets: &[(String, Vec<u8>)]) -> Vec<u8> {
    let mut zip = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let opts = SimpleFileOptions::default();
    zip.start_file("project.json", opts).unwrap();
    zip.write_all(&serde_json::to_vec(project).unwrap()).unwrap();
    for (name, bytes) in assets {
        zip.start_file(name.as_str(), opts).unwrap();
        zip.write_all(bytes).unwrap();
    }
    zip.finish().unwrap().into_inner()
}

pub fn write_sb3(dir: &Path, id: &str, project: &Value, assets: &[(String, Vec<u8>)]) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let path = dir.join(format!("{id}.sb3"));
    std::fs::write(&path, sb3(project, assets)).unwrap();
    path
}

/// Sprite project whose only content is the given costumes.
pub fn costume_project(md5exts: &[String]) -> Value {
    let costumes: Vec<Value> = md5exts
        .iter()
        .map(|m| {
            let (id, ext) = m.split_once('.').unwrap();
            json!({"name": id, "assetId": id, "md5ext": m, "dataFormat": ext})
        })
        .collect();
    json!({
        "targets": [
            {"isStage": true, "name": "Stage", "blocks": {}, "costumes": [], "sounds": []},
            {"isStage": false, "name": "Sprite1", "blocks": {}, "costumes": costumes, "sounds": []}
        ],
        "monitors": [],
        "extensions": []
    })
}

fn asset_name(project: &str, i: usize) -> String {
    format!("{project}{i:031x}.png")
}

/// Two 4-image projects: `similar` holds four near-identical maze images,
/// `varied` holds solid red, green, blue and a pale checkerboard. With
/// k = 4 one `varied` image has to share a cluster with the mazes; the pale
/// pattern is the one closest to them.
pub fn fig5_studio(dir: &Path) {
    let similar: Vec<(String, Vec<u8>)> = (0..4)
        .map(|i| (asset_name("a", i), png(&maze(i as u32))))
        .collect();
    let varied: Vec<(String, Vec<u8>)> = [
        solid(64, 64, [255, 0, 0]),
        solid(64, 64, [0, 255, 0]),
        solid(64, 64, [0, 0, 255]),
        checkerboard(8),
    ]
    .iter()
    .enumerate()
    .map(|(i, img)| (asset_name("b", i), png(img)))
    .collect();
    for (id, assets) in [("similar", similar), ("varied", varied)] {
        let names: Vec<String> = assets.iter().map(|(n, _)| n.clone()).collect();
        write_sb3(dir, id, &costume_project(&names), &assets);
    }
}

/// Assets referenced by the three `studio_*` fixtures.
pub fn studio_assets(project: &Value) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for target in project["targets"].as_array().unwrap() {
        for key in ["costumes", "sounds"] {
            for media in target[key].as_array().unwrap() {
                let name = media["md5ext"].as_str().unwrap().to_string();
                if !seen.insert(name.clone()) {
                    continue;
                }
                let bytes = match media["dataFormat"].as_str().unwrap() {
                    "svg" => SIMPLE_SVG.to_vec(),
                    "png" => {
                        let seed = name.as_bytes()[0];
                        let shade = seed.wrapping_mul(37);
                        png(&solid(24, 24, [shade, 255 - shade, seed]))
                    }
                    _ => b"RIFF0000WAVE".to_vec(),
                };
                out.push((name, bytes));
            }
        }
    }
    out
}

pub const STUDIO_FIXTURES: [(&str, &str); 3] = [
    ("alpha", "studio_alpha.json"),
    ("beta", "studio_beta.json"),
    ("gamma", "studio_gamma.json"),
];

/// Writes the three-project fixture studio as `.sb3` archives.
pub fn three_project_studio(dir: &Path) {
    for (id, file) in STUDIO_FIXTURES {
        let project = fixture_json(file);
        write_sb3(dir, id, &project, &studio_assets(&project));
    }
}

/// Runs the CLI entry point with string arguments.
pub fn ccs(args: &[&str]) -> i32 {
    ccs_core::cli::run(std::iter::once("ccs").chain(args.iter().copied()))
}

/// Kendall τ-b by exhaustive pair counting.
pub fn brute_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tx += 1;
            }
            if dy == 0.0 {
                ty += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    c += 1;
                } else {
                    d += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    (c - d) as f64 / (((n0 - tx) * (n0 - ty)) as f64).sqrt()
}
