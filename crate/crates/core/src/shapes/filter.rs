//! Geometric quality filter for mined shapes.

use serde::{Deserialize, Serialize};

use super::components::Labeling;
use super::library::FlakeShape;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterCriteria {
    pub min_area: usize,
    /// Upper area bound as a fraction of the image area.
    pub max_area_fraction: f64,
    /// Area over convex-hull area.
    pub min_solidity: f64,
    /// Fraction of perimeter pixels allowed on the image border.
    pub max_border_fraction: f64,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        Self {
            min_area: 200,
            max_area_fraction: 0.25,
            min_solidity: 0.6,
            max_border_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeStats {
    pub area: usize,
    pub solidity: f64,
    pub border_fraction: f64,
}

/// Area, solidity and border-touch fraction of one labeled component.
pub fn shape_stats(labeling: &Labeling, label: u32) -> ShapeStats {
    let c = labeling.component(label);
    let (x0, y0, x1, y1) = c.bbox;
    let (w, h) = (labeling.width, labeling.height);
    let inside = |x: isize, y: isize| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && labeling.label_at(x as usize, y as usize) == label
    };

    let mut corners: Vec<(i64, i64)> = Vec::new();
    let mut perimeter = 0usize;
    let mut on_border = 0usize;
    for y in y0..y1 {
        let mut row_min = None;
        let mut row_max = None;
        for x in x0..x1 {
            if labeling.label_at(x, y) != label {
                continue;
            }
            row_min.get_or_insert(x);
            row_max = Some(x);
            let (xi, yi) = (x as isize, y as isize);
            let boundary = !inside(xi - 1, yi) || !inside(xi + 1, yi) || !inside(xi, yi - 1) || !inside(xi, yi + 1);
            if boundary {
                perimeter += 1;
                if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                    on_border += 1;
                }
            }
        }
        // the hull of a union of unit squares only needs the outermost
        // squares of each row
        if let (Some(a), Some(b)) = (row_min, row_max) {
            let (a, b, y) = (a as i64, b as i64, y as i64);
            corners.extend_from_slice(&[(a, y), (a, y + 1), (b + 1, y), (b + 1, y + 1)]);
        }
    }
    let hull = convex_hull_area(&mut corners);
    ShapeStats {
        area: c.area,
        solidity: if hull > 0.0 { c.area as f64 / hull } else { 0.0 },
        border_fraction: if perimeter > 0 { on_border as f64 / perimeter as f64 } else { 0.0 },
    }
}

/// Monotone-chain hull area of integer points.
fn convex_hull_area(points: &mut Vec<(i64, i64)>) -> f64 {
    points.sort_unstable();
    points.dedup();
    if points.len() < 3 {
        return 0.0;
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * points.len());
    for &p in points.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in points.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    let twice: i64 = (0..hull.len())
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    twice.abs() as f64 / 2.0
}

/// Keep components passing every criterion, tightly cropped.
pub fn filter_shapes(labeling: &Labeling, criteria: &FilterCriteria, source_id: &str) -> Vec<FlakeShape> {
    let image_area = (labeling.width * labeling.height) as f64;
    let max_area = criteria.max_area_fraction * image_area;
    labeling
        .components
        .iter()
        .filter(|c| c.area >= criteria.min_area && c.area as f64 <= max_area)
        .filter_map(|c| {
            let stats = shape_stats(labeling, c.label);
            if stats.solidity < criteria.min_solidity || stats.border_fraction > criteria.max_border_fraction {
                return None;
            }
            Some(FlakeShape {
                mask: labeling.cropped_mask_of(c.label),
                area: c.area,
                source_id: format!("{source_id}#{}", c.label),
            })
        })
        .collect()
}
