//! Spectral integration of reflectance into camera RGB.

use serde::{Deserialize, Serialize};

use super::dispersion::SpectralCurve;
use super::tmm::LayerStack;
use crate::error::{Error, Result};

/// Wavelengths used for spectral integration, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthGrid {
    wavelengths: Vec<f64>,
}

impl WavelengthGrid {
    pub fn new(wavelengths: Vec<f64>) -> Result<Self> {
        if wavelengths.is_empty() {
            return Err(Error::InvalidInput("empty wavelength grid".into()));
        }
        if wavelengths.windows(2).any(|w| w[1] <= w[0]) || wavelengths.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput(
                "wavelength grid must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { wavelengths })
    }

    /// `start, start + step, ..., <= end`.
    pub fn uniform(start_nm: f64, end_nm: f64, step_nm: f64) -> Result<Self> {
        if !(step_nm > 0.0) || end_nm < start_nm {
            return Err(Error::InvalidInput(format!(
                "bad grid {start_nm}..{end_nm} step {step_nm}"
            )));
        }
        let n = ((end_nm - start_nm) / step_nm + 1e-9).floor() as usize + 1;
        Self::new((0..n).map(|i| start_nm + i as f64 * step_nm).collect())
    }

    /// 380 to 780 nm in 5 nm steps.
    pub fn visible() -> Self {
        Self::uniform(380.0, 780.0, 5.0).expect("static grid")
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths.is_empty()
    }

    /// Riemann-sum bin widths: forward differences, the last bin repeating the
    /// previous width. A single-point grid gets unit width.
    pub fn bin_widths(&self) -> Vec<f64> {
        let w = &self.wavelengths;
        if w.len() == 1 {
            return vec![1.0];
        }
        (0..w.len())
            .map(|i| if i + 1 < w.len() { w[i + 1] - w[i] } else { w[i] - w[i - 1] })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraResponse {
    pub r: SpectralCurve,
    pub g: SpectralCurve,
    pub b: SpectralCurve,
}

impl CameraResponse {
    pub fn channels(&self) -> [&SpectralCurve; 3] {
        [&self.r, &self.g, &self.b]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RgbColor {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl RgbColor {
    pub fn new(r: f64, g: f64, b: f64) -> Self {
        Self { r, g, b }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }

    pub fn clamped(self) -> Self {
        Self::new(self.r.clamp(0.0, 1.0), self.g.clamp(0.0, 1.0), self.b.clamp(0.0, 1.0))
    }
}

/// Integrates `R(l) * S(l) * camera_c(l) * dl` per channel and divides by a
/// fixed per-channel white reference (the same integral for a perfect mirror
/// under the reference illuminant), so a mirror lit by the reference renders
/// as `(1, 1, 1)`.
#[derive(Debug, Clone)]
pub struct ColorRenderer {
    grid: WavelengthGrid,
    /// `camera_c(l) * dl` per grid point.
    channel_weights: Vec<[f64; 3]>,
    /// Reference illuminant on the grid.
    reference_source: Vec<f64>,
    white: [f64; 3],
}

impl ColorRenderer {
    pub fn new(white_source: &SpectralCurve, camera: &CameraResponse, grid: WavelengthGrid) -> Result<Self> {
        let widths = grid.bin_widths();
        let mut channel_weights = Vec::with_capacity(grid.len());
        let mut reference_source = Vec::with_capacity(grid.len());
        let mut white = [0.0; 3];
        for (&wl, &dl) in grid.wavelengths().iter().zip(&widths) {
            let s = white_source.value_at(wl)?;
            let mut w = [0.0; 3];
            for (c, curve) in camera.channels().iter().enumerate() {
                w[c] = curve.value_at(wl)? * dl;
                white[c] += s * w[c];
            }
            channel_weights.push(w);
            reference_source.push(s);
        }
        if let Some(c) = white.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "zero white reference in channel {}",
                ["r", "g", "b"][c]
            )));
        }
        Ok(Self {
            grid,
            channel_weights,
            reference_source,
            white,
        })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn white_reference(&self) -> [f64; 3] {
        self.white
    }

    fn integrate(&self, stack: &LayerStack, source: impl Fn(usize, f64) -> Result<f64>) -> Result<RgbColor> {
        let mut acc = [0.0; 3];
        for (i, &wl) in self.grid.wavelengths().iter().enumerate() {
            let s = source(i, wl)?;
            if s == 0.0 {
                continue;
            }
            let r = stack.reflectance(wl)?;
            for c in 0..3 {
                acc[c] += r * s * self.channel_weights[i][c];
            }
        }
        Ok(RgbColor::new(acc[0] / self.white[0], acc[1] / self.white[1], acc[2] / self.white[2]))
    }

    /// Color under an arbitrary illuminant, before clamping.
    pub fn render_unclamped(&self, stack: &LayerStack, source: &SpectralCurve) -> Result<RgbColor> {
        self.integrate(stack, |_, wl| source.value_at(wl))
    }

    pub fn render(&self, stack: &LayerStack, source: &SpectralCurve) -> Result<RgbColor> {
        Ok(self.render_unclamped(stack, source)?.clamped())
    }

    /// Color under the reference illuminant, clamped.
    pub fn render_reference(&self, stack: &LayerStack) -> Result<RgbColor> {
        Ok(self
            .integrate(stack, |i, _| Ok(self.reference_source[i]))?
            .clamped())
    }
}

/// One-shot rendering that uses `source` as its own white reference.
pub fn render_color(
    stack: &LayerStack,
    source: &SpectralCurve,
    camera: &CameraResponse,
    grid: &WavelengthGrid,
) -> Result<RgbColor> {
    ColorRenderer::new(source, camera, grid.clone())?.render(stack, source)
}
