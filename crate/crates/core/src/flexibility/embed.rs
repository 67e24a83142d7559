//! Image records and embeddings.
//!
//! The builtin featurizer is a fixed 240-dimensional descriptor: an 8×8
//! average-pooled RGB thumbnail (192 values in [0, 1]) followed by three
//! 16-bin per-channel histograms, each summing to 1 (48 values). Any other
//! embedding (e.g. CNN features computed offline) comes in through
//! [`import_embeddings`].

use std::collections::BTreeMap;
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::FlexError;

pub const THUMBNAIL_SIDE: usize = 8;
pub const HISTOGRAM_BINS: usize = 16;
pub const BUILTIN_DIM: usize = THUMBNAIL_SIDE * THUMBNAIL_SIDE * 3 + HISTOGRAM_BINS * 3;

/// Longest side an SVG costume is rasterized to.
#[cfg(feature = "svg")]
const SVG_MAX_SIDE: f32 = 480.0;

/// A decoded costume or backdrop.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    /// `<project_id>/<md5ext>`, the asset's path inside a studio directory.
    pub image_id: String,
    pub project_id: String,
    pub pixels: RgbImage,
}

impl ImageRecord {
    pub fn new(project_id: &str, name: &str, pixels: RgbImage) -> Result<Self, FlexError> {
        if pixels.width() == 0 || pixels.height() == 0 {
            return Err(FlexError::Decode {
                image: format!("{project_id}/{name}"),
                reason: "image has zero width or height".into(),
            });
        }
        Ok(ImageRecord {
            image_id: format!("{project_id}/{name}"),
            project_id: project_id.to_string(),
            pixels,
        })
    }

    /// Decodes asset bytes. Transparent pixels are composited over white,
    /// the stage's background.
    pub fn decode(project_id: &str, name: &str, bytes: &[u8]) -> Result<Self, FlexError> {
        let decode_err = |reason: String| FlexError::Decode {
            image: format!("{project_id}/{name}"),
            reason,
        };
        let is_svg = name
            .rsplit_once('.')
            .is_some_and(|(_, ext)| ext.eq_ignore_ascii_case("svg"));
        let rgba = if is_svg {
            rasterize_svg(bytes).map_err(decode_err)?
        } else {
            image::load_from_memory(bytes)
                .map_err(|e| decode_err(e.to_string()))?
                .to_rgba8()
        };
        Self::new(project_id, name, over_white(&rgba))
    }
}

fn over_white(rgba: &image::RgbaImage) -> RgbImage {
    RgbImage::from_fn(rgba.width(), rgba.height(), |x, y| {
        let [r, g, b, a] = rgba.get_pixel(x, y).0;
        let a = u32::from(a);
        let blend = |c: u8| ((u32::from(c) * a + 255 * (255 - a) + 127) / 255) as u8;
        Rgb([blend(r), blend(g), blend(b)])
    })
}

#[cfg(feature = "svg")]
fn rasterize_svg(bytes: &[u8]) -> Result<image::RgbaImage, String> {
    use resvg::{tiny_skia, usvg};
    let tree = usvg::Tree::from_data(bytes, &usvg::Options::default()).map_err(|e| e.to_string())?;
    let size = tree.size();
    let scale = (SVG_MAX_SIDE / size.width().max(size.height())).min(1.0);
    let width = ((size.width() * scale).ceil() as u32).max(1);
    let height = ((size.height() * scale).ceil() as u32).max(1);
    let mut pixmap = tiny_skia::Pixmap::new(width, height).ok_or("empty SVG canvas")?;
    resvg::render(
        &tree,
        tiny_skia::Transform::from_scale(scale, scale),
        &mut pixmap.as_mut(),
    );
    // tiny-skia stores premultiplied alpha.
    let mut data = pixmap.take();
    for px in data.chunks_exact_mut(4) {
        let a = px[3];
        if a > 0 && a < 255 {
            for c in &mut px[..3] {
                *c = ((u32::from(*c) * 255 + u32::from(a) / 2) / u32::from(a)).min(255) as u8;
            }
        }
    }
    image::RgbaImage::from_raw(width, height, data).ok_or_else(|| "bad pixmap size".to_string())
}

#[cfg(not(feature = "svg"))]
fn rasterize_svg(_bytes: &[u8]) -> Result<image::RgbaImage, String> {
    Err("SVG rasterization not enabled".into())
}

/// Half-open pixel span of thumbnail cell `i` along an axis of length `len`.
/// Every cell covers at least one pixel.
fn cell_span(i: usize, len: usize) -> (usize, usize) {
    let start = (i * len / THUMBNAIL_SIDE).min(len - 1);
    let end = ((i + 1) * len / THUMBNAIL_SIDE).max(start + 1);
    (start, end)
}

/// The builtin 240-dimensional descriptor of an image.
pub fn embed_image_builtin(img: &ImageRecord) -> Vec<f64> {
    let (w, h) = (img.pixels.width() as usize, img.pixels.height() as usize);
    let mut out = Vec::with_capacity(BUILTIN_DIM);

    for cy in 0..THUMBNAIL_SIDE {
        let (y0, y1) = cell_span(cy, h);
        for cx in 0..THUMBNAIL_SIDE {
            let (x0, x1) = cell_span(cx, w);
            let mut sum = [0u64; 3];
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = img.pixels.get_pixel(x as u32, y as u32).0;
                    for c in 0..3 {
                        sum[c] += u64::from(p[c]);
                    }
                }
            }
            let count = ((y1 - y0) * (x1 - x0)) as f64;
            out.extend(sum.iter().map(|&s| s as f64 / count / 255.0));
        }
    }

    let mut hist = [[0u64; HISTOGRAM_BINS]; 3];
    for p in img.pixels.pixels() {
        for c in 0..3 {
            hist[c][usize::from(p.0[c]) * HISTOGRAM_BINS / 256] += 1;
        }
    }
    let total = (w * h) as f64;
    for channel in &hist {
        out.extend(channel.iter().map(|&n| n as f64 / total));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingBackend {
    Builtin,
    Imported,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingSet {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
    pub backend: EmbeddingBackend,
}

impl EmbeddingSet {
    /// Vectors for `images`, in the same order.
    pub fn vectors_for<'a>(&'a self, images: &[ImageRecord]) -> Vec<&'a [f64]> {
        images
            .iter()
            .map(|img| self.vectors[&img.image_id].as_slice())
            .collect()
    }
}

/// Builtin embeddings of every image, computed in parallel.
pub fn embed_builtin(images: &[ImageRecord]) -> EmbeddingSet {
    use rayon::prelude::*;
    let vectors = images
        .par_iter()
        .map(|img| (img.image_id.clone(), embed_image_builtin(img)))
        .collect();
    EmbeddingSet {
        dim: BUILTIN_DIM,
        vectors,
        backend: EmbeddingBackend::Builtin,
    }
}

/// Loads embeddings from a CSV with header `image_id,v0,...,v{d-1}`.
/// Rows for images not in `images` are ignored.
pub fn import_embeddings(path: &Path, images: &[ImageRecord]) -> Result<EmbeddingSet, FlexError> {
    let file = std::fs::File::open(path).map_err(|e| FlexError::Import(format!("{}: {e}", path.display())))?;
    import_embeddings_from(file, images)
}

pub fn import_embeddings_from<R: std::io::Read>(
    reader: R,
    images: &[ImageRecord],
) -> Result<EmbeddingSet, FlexError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| FlexError::Import(e.to_string()))?
        .clone();
    if headers.get(0) != Some("image_id") || headers.len() < 2 {
        return Err(FlexError::Import(
            "expected header image_id,v0,...".into(),
        ));
    }
    let dim = headers.len() - 1;

    let mut vectors = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| FlexError::Import(e.to_string()))?;
        let id = record.get(0).unwrap_or_default().to_string();
        if record.len() - 1 != dim {
            return Err(FlexError::DimensionMismatch {
                image: id,
                expected: dim,
                found: record.len() - 1,
            });
        }
        let mut v = Vec::with_capacity(dim);
        for field in record.iter().skip(1) {
            let x: f64 = field
                .parse()
                .map_err(|_| FlexError::Import(format!("{id}: invalid number {field:?}")))?;
            if !x.is_finite() {
                return Err(FlexError::NonFiniteValue(id));
            }
            v.push(x);
        }
        vectors.insert(id, v);
    }

    if let Some(missing) = images.iter().find(|img| !vectors.contains_key(&img.image_id)) {
        return Err(FlexError::MissingEmbedding(missing.image_id.clone()));
    }
    let wanted: std::collections::BTreeSet<&str> =
        images.iter().map(|img| img.image_id.as_str()).collect();
    vectors.retain(|id, _| wanted.contains(id.as_str()));
    Ok(EmbeddingSet {
        dim,
        vectors,
        backend: EmbeddingBackend::Imported,
    })
}
