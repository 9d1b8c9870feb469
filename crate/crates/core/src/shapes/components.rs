//! Two-pass connected-component labeling over a union-find forest.

use serde::{Deserialize, Serialize};

use crate::raster::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    pub label: u32,
    pub area: usize,
    /// `(x0, y0, x1, y1)`, upper bounds exclusive.
    pub bbox: (usize, usize, usize, usize),
}

/// Label image (0 = background, components numbered densely from 1 in
/// raster order of first appearance) plus per-component statistics.
#[derive(Debug, Clone)]
pub struct Labeling {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub components: Vec<Component>,
}

impl Labeling {
    pub fn label_at(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn component(&self, label: u32) -> &Component {
        &self.components[label as usize - 1]
    }

    /// Full-canvas mask of one component.
    pub fn mask_of(&self, label: u32) -> BinaryMask {
        let c = self.component(label);
        let mut mask = BinaryMask::new(self.width, self.height);
        for y in c.bbox.1..c.bbox.3 {
            for x in c.bbox.0..c.bbox.2 {
                if self.label_at(x, y) == label {
                    mask.set(x, y, true);
                }
            }
        }
        mask
    }

    /// Mask of one component cropped to its bounding box.
    pub fn cropped_mask_of(&self, label: u32) -> BinaryMask {
        let c = self.component(label);
        let (x0, y0, x1, y1) = c.bbox;
        BinaryMask::from_fn(x1 - x0, y1 - y0, |x, y| self.label_at(x0 + x, y0 + y) == label)
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new() -> Self {
        // index 0 is the background sentinel
        Self { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Label regions of equal foreground value. Two foreground pixels are
/// adjacent when they are neighbors under `conn` and carry equal values.
pub fn label_regions<T: Copy + Eq>(
    width: usize,
    height: usize,
    values: &[T],
    is_foreground: impl Fn(T) -> bool,
    conn: Connectivity,
) -> Labeling {
    assert_eq!(values.len(), width * height, "value raster size mismatch");
    let mut provisional = vec![0u32; width * height];
    let mut forest = UnionFind::new();

    // previous-row and same-row neighbors that are already labeled
    let offsets: &[(isize, isize)] = match conn {
        Connectivity::Four => &[(-1, 0), (0, -1)],
        Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
    };

    for y in 0..height {
        for x in 0..width {
            let idx = y * width + x;
            let v = values[idx];
            if !is_foreground(v) {
                continue;
            }
            let mut label = 0u32;
            for &(dx, dy) in offsets {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= width as isize {
                    continue;
                }
                let nidx = ny as usize * width + nx as usize;
                if provisional[nidx] == 0 || values[nidx] != v {
                    continue;
                }
                label = if label == 0 {
                    provisional[nidx]
                } else {
                    forest.union(label, provisional[nidx])
                };
            }
            provisional[idx] = if label == 0 { forest.make() } else { label };
        }
    }

    let mut dense = vec![0u32; forest.parent.len()];
    let mut components: Vec<Component> = Vec::new();
    let mut labels = provisional;
    for y in 0..height {
        for x in 0..width {
            let idx = y * width + x;
            if labels[idx] == 0 {
                continue;
            }
            let root = forest.find(labels[idx]) as usize;
            if dense[root] == 0 {
                components.push(Component {
                    label: components.len() as u32 + 1,
                    area: 0,
                    bbox: (x, y, x + 1, y + 1),
                });
                dense[root] = components.len() as u32;
            }
            let l = dense[root];
            labels[idx] = l;
            let c = &mut components[l as usize - 1];
            c.area += 1;
            c.bbox = (c.bbox.0.min(x), c.bbox.1.min(y), c.bbox.2.max(x + 1), c.bbox.3.max(y + 1));
        }
    }

    Labeling {
        width,
        height,
        labels,
        components,
    }
}

pub fn connected_components(mask: &BinaryMask, conn: Connectivity) -> Labeling {
    label_regions(mask.width, mask.height, &mask.bits, |b| b, conn)
}
