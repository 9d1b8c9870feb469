//! Mined flake silhouettes and their on-disk library format: one
//! `manifest.json` plus one binary PBM (P4) bitmap per shape.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::filter::FilterCriteria;
use crate::error::{Error, Result};
use crate::raster::BinaryMask;

#[derive(Debug, Clone, PartialEq)]
pub struct FlakeShape {
    /// Tight crop.
    pub mask: BinaryMask,
    pub area: usize,
    pub source_id: String,
}

impl FlakeShape {
    /// Crop `mask` tightly; `None` when it has no set pixels.
    pub fn from_mask(mask: &BinaryMask, source_id: impl Into<String>) -> Option<Self> {
        let mask = mask.crop_tight()?;
        Some(Self {
            area: mask.count(),
            mask,
            source_id: source_id.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeEntry {
    pub file: String,
    pub width: usize,
    pub height: usize,
    pub area: usize,
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryManifest {
    pub version: u32,
    pub shape_count: usize,
    pub total_area: usize,
    pub criteria: Option<FilterCriteria>,
    pub sources: Vec<String>,
    pub shapes: Vec<ShapeEntry>,
}

#[derive(Debug, Clone)]
pub struct ShapeLibrary {
    pub shapes: Vec<FlakeShape>,
    pub criteria: Option<FilterCriteria>,
    pub sources: Vec<String>,
}

const MANIFEST: &str = "manifest.json";

impl ShapeLibrary {
    pub fn new(shapes: Vec<FlakeShape>) -> Self {
        Self {
            shapes,
            criteria: None,
            sources: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn manifest(&self) -> LibraryManifest {
        LibraryManifest {
            version: 1,
            shape_count: self.shapes.len(),
            total_area: self.shapes.iter().map(|s| s.area).sum(),
            criteria: self.criteria,
            sources: self.sources.clone(),
            shapes: self
                .shapes
                .iter()
                .enumerate()
                .map(|(i, s)| ShapeEntry {
                    file: format!("shape_{i:06}.pbm"),
                    width: s.mask.width,
                    height: s.mask.height,
                    area: s.area,
                    source_id: s.source_id.clone(),
                })
                .collect(),
        }
    }

    /// Write into `dir`, which must exist.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let manifest = self.manifest();
        for (shape, entry) in self.shapes.iter().zip(&manifest.shapes) {
            let path = dir.join(&entry.file);
            fs::write(&path, encode_pbm(&shape.mask)).map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json("shape manifest", e))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: LibraryManifest =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let mut shapes = Vec::with_capacity(manifest.shapes.len());
        for entry in &manifest.shapes {
            let path = dir.join(&entry.file);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let mask = decode_pbm(&bytes).map_err(|reason| Error::Parse {
                path: path.display().to_string(),
                line: 0,
                reason,
            })?;
            if mask.dims() != (entry.width, entry.height) || mask.count() != entry.area || entry.area == 0 {
                return Err(Error::InvalidInput(format!(
                    "{}: bitmap does not match its manifest entry",
                    path.display()
                )));
            }
            shapes.push(FlakeShape {
                mask,
                area: entry.area,
                source_id: entry.source_id.clone(),
            });
        }
        if shapes.is_empty() {
            return Err(Error::InvalidInput(format!("{}: shape library is empty", dir.display())));
        }
        Ok(Self {
            shapes,
            criteria: manifest.criteria,
            sources: manifest.sources,
        })
    }
}

/// Binary PBM: `P4\n<w> <h>\n` then rows packed MSB-first, 1 = set.
pub fn encode_pbm(mask: &BinaryMask) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", mask.width, mask.height).into_bytes();
    let row_bytes = mask.width.div_ceil(8);
    for y in 0..mask.height {
        let mut row = vec![0u8; row_bytes];
        for x in 0..mask.width {
            if mask.get(x, y) {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    out
}

pub fn decode_pbm(bytes: &[u8]) -> std::result::Result<BinaryMask, String> {
    // header tokens separated by whitespace, one whitespace byte before raster
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 3 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PBM header".into());
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|e| e.to_string())?.to_string());
    }
    pos += 1;
    if tokens[0] != "P4" {
        return Err(format!("not a binary PBM (magic {:?})", tokens[0]));
    }
    let width: usize = tokens[1].parse().map_err(|_| "bad PBM width")?;
    let height: usize = tokens[2].parse().map_err(|_| "bad PBM height")?;
    let row_bytes = width.div_ceil(8);
    if bytes.len() < pos + row_bytes * height {
        return Err("truncated PBM raster".into());
    }
    let raster = &bytes[pos..];
    Ok(BinaryMask::from_fn(width, height, |x, y| raster[y * row_bytes + x / 8] & (0x80 >> (x % 8)) != 0))
}
