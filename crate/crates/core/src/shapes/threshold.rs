use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, GrayImage};

/// Rec. 601 luminance, rounded to the nearest level.
pub fn to_grayscale(img: &image::RgbImage) -> Result<GrayImage> {
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::InvalidInput("empty image".into()));
    }
    let data = img
        .pixels()
        .map(|p| {
            let l = 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]);
            l.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(w as usize, h as usize, data)
}

/// Half-open luminance range `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Band {
    pub lo: u16,
    pub hi: u16,
}

impl Band {
    pub fn new(lo: u16, hi: u16) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: u8) -> bool {
        let v = u16::from(v);
        v >= self.lo && v < self.hi
    }
}

pub fn validate_bands(bands: &[Band]) -> Result<()> {
    if bands.is_empty() {
        return Err(Error::Config("no brightness bands given".into()));
    }
    for b in bands {
        if b.lo >= b.hi || b.hi > 256 {
            return Err(Error::Config(format!("invalid brightness band [{}, {})", b.lo, b.hi)));
        }
    }
    let mut sorted = bands.to_vec();
    sorted.sort_by_key(|b| b.lo);
    if let Some(w) = sorted.windows(2).find(|w| w[1].lo < w[0].hi) {
        return Err(Error::Config(format!(
            "brightness bands [{}, {}) and [{}, {}) overlap",
            w[0].lo, w[0].hi, w[1].lo, w[1].hi
        )));
    }
    Ok(())
}

/// One binary mask per band; a pixel is set iff its luminance falls in the band.
pub fn stepped_threshold(gray: &GrayImage, bands: &[Band]) -> Result<Vec<BinaryMask>> {
    validate_bands(bands)?;
    Ok(bands
        .iter()
        .map(|band| BinaryMask {
            width: gray.width,
            height: gray.height,
            bits: gray.data.iter().map(|&v| band.contains(v)).collect(),
        })
        .collect())
}

/// `count` equal-width bands spanning the 1st to 99th luminance percentile.
pub fn default_bands(gray: &GrayImage, count: usize) -> Vec<Band> {
    let mut hist = [0usize; 256];
    for &v in &gray.data {
        hist[v as usize] += 1;
    }
    let total = gray.data.len();
    let percentile = |p: f64| -> u16 {
        let target = (p * total as f64).ceil().max(1.0) as usize;
        let mut acc = 0;
        for (v, &c) in hist.iter().enumerate() {
            acc += c;
            if acc >= target {
                return v as u16;
            }
        }
        255
    };
    let lo = percentile(0.01);
    let hi = percentile(0.99) + 1;
    let count = count.max(1);
    let span = f64::from(hi - lo);
    let mut bands = Vec::with_capacity(count);
    let mut prev = lo;
    for i in 1..=count {
        let edge = if i == count {
            hi
        } else {
            lo + (span * i as f64 / count as f64).round() as u16
        };
        if edge > prev {
            bands.push(Band::new(prev, edge));
            prev = edge;
        }
    }
    bands
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(v: u8) -> GrayImage {
        GrayImage::new(4, 3, vec![v; 12]).unwrap()
    }

    #[test]
    fn luminance_weights() {
        let px = |r, g, b| image::RgbImage::from_pixel(1, 1, image::Rgb([r, g, b]));
        assert_eq!(to_grayscale(&px(255, 255, 255)).unwrap().data[0], 255);
        assert_eq!(to_grayscale(&px(0, 0, 0)).unwrap().data[0], 0);
        assert_eq!(to_grayscale(&px(255, 0, 0)).unwrap().data[0], 76);
        assert!(to_grayscale(&image::RgbImage::new(0, 0)).is_err());
    }

    #[test]
    fn band_inclusion() {
        let m = stepped_threshold(&uniform(100), &[Band::new(90, 110)]).unwrap();
        assert!(m[0].bits.iter().all(|&b| b));
        let m = stepped_threshold(&uniform(100), &[Band::new(110, 130)]).unwrap();
        assert!(m[0].is_empty());
    }

    #[test]
    fn partition_masks_are_complementary() {
        let gray = GrayImage::new(16, 16, (0..=255).collect()).unwrap();
        let m = stepped_threshold(&gray, &[Band::new(0, 128), Band::new(128, 256)]).unwrap();
        assert!(m[0].bits.iter().zip(&m[1].bits).all(|(a, b)| a ^ b));
    }

    #[test]
    fn rejects_bad_bands() {
        let g = uniform(0);
        assert!(stepped_threshold(&g, &[Band::new(10, 10)]).is_err());
        assert!(stepped_threshold(&g, &[Band::new(0, 50), Band::new(40, 60)]).is_err());
        assert!(stepped_threshold(&g, &[Band::new(0, 257)]).is_err());
        assert!(stepped_threshold(&g, &[]).is_err());
    }

    #[test]
    fn default_bands_cover_percentile_range() {
        let gray = GrayImage::new(16, 16, (0..=255).collect()).unwrap();
        let bands = default_bands(&gray, 8);
        assert_eq!(bands.len(), 8);
        validate_bands(&bands).unwrap();
        assert!(bands[0].lo <= 3);
        assert!(bands[7].hi >= 252);
        assert!(bands.windows(2).all(|w| w[0].hi == w[1].lo));
    }
}
