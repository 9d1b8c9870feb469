#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flakelab::raster::BinaryMask;
use flakelab::rng::rng_from_seed;
use flakelab::shapes::{FlakeShape, ShapeLibrary};
use rand::Rng;

pub fn flakelab<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_flakelab"))
        .args(args)
        .output()
        .expect("run flakelab")
}

/// Run and require success, returning stdout.
pub fn flakelab_ok<I, S>(args: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = flakelab(args);
    assert!(
        out.status.success(),
        "flakelab failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Star-shaped random polygon of radius `r` rasterized into its bounding square.
pub fn random_polygon(rng: &mut impl Rng, r: f64) -> BinaryMask {
    let k = rng.random_range(5..9);
    let mut angles: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let pts: Vec<(f64, f64)> = angles
        .iter()
        .map(|a| {
            let rr = r * rng.random_range(0.6..1.0);
            (rr * a.cos(), rr * a.sin())
        })
        .collect();
    let size = (2.0 * r) as usize + 2;
    let c = size as f64 / 2.0;
    BinaryMask::from_fn(size, size, |x, y| {
        let (px, py) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
        let mut inside = false;
        for i in 0..pts.len() {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            if (a.1 > py) != (b.1 > py) && px < (b.0 - a.0) * (py - a.1) / (b.1 - a.1) + a.0 {
                inside = !inside;
            }
        }
        inside
    })
}

/// In-memory library of `n` polygons with area at least 300 px.
pub fn polygon_library(seed: u64, n: usize) -> ShapeLibrary {
    let mut rng = rng_from_seed(seed);
    let mut shapes = Vec::new();
    while shapes.len() < n {
        let r = rng.random_range(12.0..40.0);
        let mask = random_polygon(&mut rng, r);
        if let Some(s) = FlakeShape::from_mask(&mask, format!("poly{}", shapes.len())) {
            if s.area >= 300 {
                shapes.push(s);
            }
        }
    }
    ShapeLibrary::new(shapes)
}

/// Microscope-like source images for shape mining: dark polygons on a light
/// background, kept clear of each other and of the border.
pub fn write_polygon_images(dir: &Path, seed: u64, count: usize) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    let mut rng = rng_from_seed(seed);
    let (w, h) = (320u32, 320u32);
    let mut paths = Vec::new();
    for i in 0..count {
        let mut img = image::RgbImage::from_pixel(w, h, image::Rgb([200, 200, 200]));
        let mut occupied = BinaryMask::new(w as usize, h as usize);
        for _ in 0..8 {
            let r = rng.random_range(14.0..40.0);
            let poly = random_polygon(&mut rng, r);
            let x0 = rng.random_range(4..w as usize - poly.width - 4);
            let y0 = rng.random_range(4..h as usize - poly.height - 4);
            let clash = (0..poly.height).any(|y| (0..poly.width).any(|x| occupied.get(x0 + x, y0 + y)));
            if clash {
                continue;
            }
            let level = [40u8, 100][rng.random_range(0..2)];
            for y in 0..poly.height {
                for x in 0..poly.width {
                    occupied.set(x0 + x, y0 + y, true);
                    if poly.get(x, y) {
                        img.put_pixel((x0 + x) as u32, (y0 + y) as u32, image::Rgb([level; 3]));
                    }
                }
            }
        }
        let path = dir.join(format!("source_{i:03}.png"));
        img.save(&path).unwrap();
        paths.push(path);
    }
    paths
}

/// Mine a shape library from freshly drawn polygon images through the CLI.
pub fn mined_library(root: &Path, seed: u64) -> PathBuf {
    let sources = root.join("sources");
    write_polygon_images(&sources, seed, 6);
    let lib = root.join("shapes");
    flakelab_ok(["mine-shapes", path_str(&sources), "--out", path_str(&lib)]);
    lib
}

/// Recursively read every file under `dir` as (relative path, bytes).
pub fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out
}

/// A config for quick 128x128 datasets.
pub fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "[scene]\nwidth = 128\nheight = 128\nshape_count = [1, 6]\nscale = [0.5, 1.0]\nmax_layers = 4\nmin_instance_area = 50\n",
    )
    .unwrap();
    path
}
