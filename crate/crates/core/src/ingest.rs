//! Grayscale image ingestion: PGM/CSV loading, block-mean downscaling, and
//! synthetic labeled datasets for desk-scale experiments.
//!
//! Pixel values live in `[0, 1]`. PGM files are binary (`P5`) with maxval
//! 255; other maxvals are rejected rather than rescaled so the quantization
//! semantics stay explicit. CSV images store one image row per line as
//! decimal reals.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Largest accepted pixel count; guards against corrupt headers.
const MAX_PIXELS: usize = 1 << 26;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed PGM: {0}")]
    MalformedPgm(String),
    #[error("unsupported PGM maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("malformed CSV image: {0}")]
    MalformedCsv(String),
    #[error("pixel value {value} out of range [0, 1] at row {row}, column {col}")]
    OutOfRange { row: usize, col: usize, value: f64 },
    #[error("image dimensions {width}x{height} overflow the supported size")]
    SizeOverflow { width: usize, height: usize },
    #[error("dimensions {width}x{height} not divisible by downscale factor {factor}")]
    NonDivisible {
        width: usize,
        height: usize,
        factor: usize,
    },
    #[error("pixel buffer has {found} values, expected {expected}")]
    PixelCount { expected: usize, found: usize },
    #[error("malformed dataset manifest: {0}")]
    MalformedManifest(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A grayscale image: row-major pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, IngestError> {
        let expected = width
            .checked_mul(height)
            .filter(|n| *n <= MAX_PIXELS)
            .ok_or(IngestError::SizeOverflow { width, height })?;
        if pixels.len() != expected {
            return Err(IngestError::PixelCount {
                expected,
                found: pixels.len(),
            });
        }
        for (i, v) in pixels.iter().enumerate() {
            if !(0.0..=1.0).contains(v) {
                return Err(IngestError::OutOfRange {
                    row: i / width.max(1),
                    col: i % width.max(1),
                    value: *v,
                });
            }
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self, IngestError> {
        Image::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }
}

/// Loads an image from disk, sniffing the format: files starting with the
/// `P5` magic parse as binary PGM, anything else as CSV.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image, IngestError> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(b"P5") {
        parse_pgm(&bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| IngestError::MalformedCsv("not valid UTF-8".into()))?;
        parse_csv(&text)
    }
}

/// Parses a binary PGM (`P5`, maxval 255); byte values divide by 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<Image, IngestError> {
    let mut pos = 0;
    let mut token = |bytes: &[u8]| -> Result<String, IngestError> {
        // Skip whitespace and `#` comments.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(IngestError::MalformedPgm("truncated header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if token(bytes)? != "P5" {
        return Err(IngestError::MalformedPgm("missing P5 magic".into()));
    }
    let parse_dim = |s: String| -> Result<usize, IngestError> {
        s.parse::<usize>()
            .map_err(|_| IngestError::MalformedPgm(format!("bad header field {s:?}")))
    };
    let width = parse_dim(token(bytes)?)?;
    let height = parse_dim(token(bytes)?)?;
    let maxval = parse_dim(token(bytes)?)? as u32;
    if maxval != 255 {
        return Err(IngestError::UnsupportedMaxval(maxval));
    }
    let count = width
        .checked_mul(height)
        .filter(|n| *n <= MAX_PIXELS)
        .ok_or(IngestError::SizeOverflow { width, height })?;
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    if bytes.len() < pos || bytes.len() - pos < count {
        return Err(IngestError::MalformedPgm(format!(
            "raster has {} bytes, expected {count}",
            bytes.len().saturating_sub(pos)
        )));
    }
    let pixels = bytes[pos..pos + count]
        .iter()
        .map(|b| f64::from(*b) / 255.0)
        .collect();
    Image::new(width, height, pixels)
}

/// Serializes an image as binary PGM; pixels quantize to `round(v * 255)`.
pub fn pgm_bytes(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.pixels.iter().map(|v| (v * 255.0).round() as u8));
    out
}

pub fn save_pgm(img: &Image, path: impl AsRef<Path>) -> Result<(), IngestError> {
    std::fs::write(path, pgm_bytes(img))?;
    Ok(())
}

/// Parses a CSV image: one image row per line, comma-separated decimal
/// reals, every value validated to `[0, 1]`.
pub fn parse_csv(text: &str) -> Result<Image, IngestError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (c, field) in line.split(',').enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                IngestError::MalformedCsv(format!("row {r}: bad field {field:?}"))
            })?;
            if !(0.0..=1.0).contains(&value) {
                return Err(IngestError::OutOfRange {
                    row: r,
                    col: c,
                    value,
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if height == 0 || width == 0 {
        return Err(IngestError::MalformedCsv("empty image".into()));
    }
    if rows.iter().any(|r| r.len() != width) {
        return Err(IngestError::MalformedCsv("ragged rows".into()));
    }
    Image::new(width, height, rows.into_iter().flatten().collect())
}

/// Serializes an image as CSV with full round-trip precision.
pub fn csv_string(img: &Image) -> String {
    let mut out = String::new();
    for r in 0..img.height {
        let row: Vec<String> = (0..img.width).map(|c| img.get(r, c).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn save_csv(img: &Image, path: impl AsRef<Path>) -> Result<(), IngestError> {
    std::fs::write(path, csv_string(img))?;
    Ok(())
}

/// Downscales by an integer factor; each output pixel is the arithmetic mean
/// of its `factor x factor` block.
pub fn downscale(img: &Image, factor: usize) -> Result<Image, IngestError> {
    assert!(factor >= 1, "factor must be positive");
    if img.width % factor != 0 || img.height % factor != 0 {
        return Err(IngestError::NonDivisible {
            width: img.width,
            height: img.height,
            factor,
        });
    }
    let (w, h) = (img.width / factor, img.height / factor);
    let denom = (factor * factor) as f64;
    let mut pixels = Vec::with_capacity(w * h);
    for br in 0..h {
        for bc in 0..w {
            let mut acc = 0.0;
            for r in 0..factor {
                for c in 0..factor {
                    acc += img.get(br * factor + r, bc * factor + c);
                }
            }
            pixels.push((acc / denom).clamp(0.0, 1.0));
        }
    }
    Image::new(w, h, pixels)
}

/// Deterministic synthetic dataset: per-class base intensity plus a
/// class-shaped blob, with additive pixel jitter clipped to `[0, 1]`.
/// Labels are assigned round-robin (`item i` gets class `i % num_classes`).
pub fn synth_dataset(
    seed: u64,
    count: usize,
    side: usize,
    num_classes: usize,
) -> Vec<(Image, usize)> {
    assert!(count >= 1, "count must be at least 1");
    assert!(side >= 4, "side must be at least 4");
    assert!(num_classes >= 2, "need at least two classes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let class = i % num_classes;
            (synth_image(&mut rng, side, class, num_classes), class)
        })
        .collect()
}

fn synth_image(rng: &mut ChaCha8Rng, side: usize, class: usize, num_classes: usize) -> Image {
    let base = 0.2 + 0.4 * class as f64 / (num_classes - 1) as f64;
    let band = (side / 5).max(1);
    let shape = class % 8;
    let mut pixels = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            let in_blob = match shape {
                0 => r >= side / 3 && r < side - side / 3,
                1 => c >= side / 3 && c < side - side / 3,
                2 => r.abs_diff(c) < band,
                3 => {
                    r >= side / 4 && r < side - side / 4 && c >= side / 4 && c < side - side / 4
                }
                4 => (side - 1 - r).abs_diff(c) < band,
                5 => {
                    let t = (side / 8).max(1);
                    r < t || c < t || r >= side - t || c >= side - t
                }
                6 => r < side / 2,
                _ => (r / band + c / band) % 2 == 0,
            };
            let blob = if in_blob { 0.3 } else { 0.0 };
            let jitter = rng.gen_range(-0.05..0.05);
            pixels.push((base + blob + jitter).clamp(0.0, 1.0));
        }
    }
    Image::new(side, side, pixels).expect("synthetic pixels are clipped to range")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: usize,
}

/// Dataset manifest document: image paths (relative to the manifest file)
/// with integer labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub images: Vec<ManifestEntry>,
}

/// Loads a manifest and every image it lists.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<(Image, usize)>, IngestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| IngestError::MalformedManifest(e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    manifest
        .images
        .iter()
        .map(|entry| Ok((load_image(base.join(&entry.path))?, entry.label)))
        .collect()
}

/// Writes a dataset as PGM files plus a `manifest.json` into `dir`;
/// returns the manifest path.
pub fn save_dataset_pgm(
    dir: impl AsRef<Path>,
    items: &[(Image, usize)],
) -> Result<PathBuf, IngestError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(items.len());
    for (i, (img, label)) in items.iter().enumerate() {
        let name = format!("img_{i:04}.pgm");
        save_pgm(img, dir.join(&name))?;
        entries.push(ManifestEntry {
            path: name,
            label: *label,
        });
    }
    let manifest_path = dir.join("manifest.json");
    let doc = serde_json::to_string_pretty(&DatasetManifest { images: entries })
        .expect("manifest serialization");
    std::fs::write(&manifest_path, doc)?;
    Ok(manifest_path)
}
