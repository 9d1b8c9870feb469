//! Normal-incidence reflectance of a coherent thin-film stack via 2x2
//! characteristic matrices.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use super::dispersion::DispersionTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Film {
    pub dispersion: Arc<DispersionTable>,
    pub thickness_nm: f64,
}

/// Ambient medium, films ordered top to bottom, then a semi-infinite substrate.
#[derive(Debug, Clone)]
pub struct LayerStack {
    pub ambient_n: f64,
    pub films: Vec<Film>,
    pub substrate: Arc<DispersionTable>,
}

impl LayerStack {
    pub fn new(ambient_n: f64, films: Vec<Film>, substrate: Arc<DispersionTable>) -> Result<Self> {
        if !(ambient_n.is_finite() && ambient_n > 0.0) {
            return Err(Error::InvalidInput(format!("ambient index must be positive, got {ambient_n}")));
        }
        if let Some(f) = films
            .iter()
            .find(|f| !(f.thickness_nm.is_finite() && f.thickness_nm >= 0.0))
        {
            return Err(Error::InvalidInput(format!(
                "film {} has invalid thickness {} nm",
                f.dispersion.material_name(),
                f.thickness_nm
            )));
        }
        Ok(Self {
            ambient_n,
            films,
            substrate,
        })
    }

    /// Bare substrate in air.
    pub fn bare(substrate: Arc<DispersionTable>) -> Self {
        Self {
            ambient_n: 1.0,
            films: Vec::new(),
            substrate,
        }
    }

    pub fn with_film(mut self, dispersion: Arc<DispersionTable>, thickness_nm: f64) -> Result<Self> {
        self.films.push(Film {
            dispersion,
            thickness_nm,
        });
        Self::new(self.ambient_n, self.films, self.substrate)
    }

    /// Amplitude reflection coefficient at normal incidence.
    pub fn reflection_coefficient(&self, wavelength_nm: f64) -> Result<Complex64> {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let i = Complex64::i();
        // running product [[m00, m01], [m10, m11]]
        let (mut m00, mut m01, mut m10, mut m11) = (one, zero, zero, one);
        for film in &self.films {
            if film.thickness_nm == 0.0 {
                continue;
            }
            let index = film.dispersion.interpolate_nk(wavelength_nm)?;
            let k0d = 2.0 * PI * film.thickness_nm / wavelength_nm;
            let delta = index * k0d;
            let (cos, sin) = (delta.cos(), delta.sin());
            // sin(delta) / index written through sinc so a vanishing index
            // cannot divide by zero.
            let sin_over_index = sinc(delta) * k0d;
            let a00 = cos;
            let a01 = i * sin_over_index;
            let a10 = i * index * sin;
            let a11 = cos;
            let (n00, n01) = (m00 * a00 + m01 * a10, m00 * a01 + m01 * a11);
            let (n10, n11) = (m10 * a00 + m11 * a10, m10 * a01 + m11 * a11);
            m00 = n00;
            m01 = n01;
            m10 = n10;
            m11 = n11;
        }
        let eta_sub = self.substrate.interpolate_nk(wavelength_nm)?;
        let b = m00 + m01 * eta_sub;
        let c = m10 + m11 * eta_sub;
        let eta0 = Complex64::new(self.ambient_n, 0.0);
        Ok((eta0 * b - c) / (eta0 * b + c))
    }

    /// Reflectance `|r|^2`.
    pub fn reflectance(&self, wavelength_nm: f64) -> Result<f64> {
        Ok(self.reflection_coefficient(wavelength_nm)?.norm_sqr())
    }
}

fn sinc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        Complex64::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Free-function form of [`LayerStack::reflectance`].
pub fn reflectance(stack: &LayerStack, wavelength_nm: f64) -> Result<f64> {
    stack.reflectance(wavelength_nm)
}
