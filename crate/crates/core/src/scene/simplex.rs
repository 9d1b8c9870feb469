//! Seeded 2D simplex gradient noise.

use rand::seq::SliceRandom;

use crate::rng::rng_from_seed;

const GRADIENTS: [(f64, f64); 12] = [
    (1.0, 1.0),
    (-1.0, 1.0),
    (1.0, -1.0),
    (-1.0, -1.0),
    (1.0, 0.0),
    (-1.0, 0.0),
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
    (0.0, 1.0),
    (0.0, -1.0),
];

#[derive(Debug, Clone)]
pub struct SimplexNoise {
    perm: [u8; 512],
}

impl SimplexNoise {
    pub fn new(seed: u64) -> Self {
        let mut table: Vec<u8> = (0..=255).collect();
        table.shuffle(&mut rng_from_seed(seed));
        let mut perm = [0u8; 512];
        for i in 0..512 {
            perm[i] = table[i & 255];
        }
        Self { perm }
    }

    fn corner(&self, i: i64, j: i64, x: f64, y: f64) -> f64 {
        let t = 0.5 - x * x - y * y;
        if t <= 0.0 {
            return 0.0;
        }
        let ii = (i & 255) as usize;
        let jj = (j & 255) as usize;
        let g = GRADIENTS[self.perm[ii + self.perm[jj] as usize] as usize % 12];
        let t2 = t * t;
        t2 * t2 * (g.0 * x + g.1 * y)
    }

    /// Noise value in `[-1, 1]`.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let f2 = 0.5 * (3f64.sqrt() - 1.0);
        let g2 = (3.0 - 3f64.sqrt()) / 6.0;
        let s = (x + y) * f2;
        let i = (x + s).floor();
        let j = (y + s).floor();
        let t = (i + j) * g2;
        let x0 = x - (i - t);
        let y0 = y - (j - t);
        let (i1, j1) = if x0 > y0 { (1, 0) } else { (0, 1) };
        let x1 = x0 - i1 as f64 + g2;
        let y1 = y0 - j1 as f64 + g2;
        let x2 = x0 - 1.0 + 2.0 * g2;
        let y2 = y0 - 1.0 + 2.0 * g2;
        let (i, j) = (i as i64, j as i64);
        let n = self.corner(i, j, x0, y0) + self.corner(i + i1, j + j1, x1, y1) + self.corner(i + 1, j + 1, x2, y2);
        (70.0 * n).clamp(-1.0, 1.0)
    }

    /// Two-octave fractal sum, normalized back to `[-1, 1]`.
    pub fn two_octave(&self, x: f64, y: f64) -> f64 {
        (self.sample(x, y) + 0.5 * self.sample(2.0 * x + 17.3, 2.0 * y - 9.1)) / 1.5
    }
}

/// One-off evaluation; prefer [`SimplexNoise`] when sampling many points.
pub fn simplex_noise(x: f64, y: f64, seed: u64) -> f64 {
    SimplexNoise::new(seed).sample(x, y)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;

    #[test]
    fn deterministic() {
        assert_eq!(simplex_noise(3.7, -1.2, 9), simplex_noise(3.7, -1.2, 9));
        assert_ne!(simplex_noise(3.7, -1.2, 9), simplex_noise(3.7, -1.2, 10));
    }

    #[test]
    fn bounded_and_zero_mean() {
        let noise = SimplexNoise::new(42);
        let mut rng = rng_from_seed(1);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let v = noise.sample(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0));
            assert!((-1.0..=1.0).contains(&v));
            sum += v;
        }
        let mean = sum / n as f64;
        assert!(mean.abs() <= 0.02, "mean {mean}");
    }

    #[test]
    fn continuous() {
        let noise = SimplexNoise::new(5);
        let (a, b) = (noise.sample(10.0, 20.0), noise.sample(10.0 + 1e-7, 20.0));
        assert!((a - b).abs() < 1e-4);
    }
}
