use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One tabulated point of a complex refractive index `n - i k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NkSample {
    pub wavelength_nm: f64,
    pub n: f64,
    pub k: f64,
}

/// Wavelength-sampled complex refractive index of one material.
///
/// The sign convention is `N = n - i k` with `k >= 0` absorbing, paired with
/// a time dependence of `exp(+i w t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionTable {
    material_name: String,
    samples: Vec<NkSample>,
}

impl DispersionTable {
    pub fn new(material_name: impl Into<String>, samples: Vec<NkSample>) -> Result<Self> {
        let material_name = material_name.into();
        if samples.len() < 2 {
            return Err(Error::InvalidTable(format!(
                "{material_name}: at least 2 samples required, got {}",
                samples.len()
            )));
        }
        for s in &samples {
            if !(s.wavelength_nm.is_finite() && s.n.is_finite() && s.k.is_finite()) || s.n < 0.0 || s.k < 0.0 {
                return Err(Error::InvalidTable(format!(
                    "{material_name}: invalid sample at {} nm (n={}, k={})",
                    s.wavelength_nm, s.n, s.k
                )));
            }
        }
        if samples.windows(2).any(|w| w[1].wavelength_nm <= w[0].wavelength_nm) {
            return Err(Error::InvalidTable(format!(
                "{material_name}: wavelengths must be strictly increasing"
            )));
        }
        Ok(Self {
            material_name,
            samples,
        })
    }

    /// Dispersion-free material, tabulated over `[min_nm, max_nm]`.
    pub fn constant(material_name: impl Into<String>, n: f64, k: f64, min_nm: f64, max_nm: f64) -> Result<Self> {
        Self::new(
            material_name,
            vec![
                NkSample { wavelength_nm: min_nm, n, k },
                NkSample { wavelength_nm: max_nm, n, k },
            ],
        )
    }

    pub fn material_name(&self) -> &str {
        &self.material_name
    }

    pub fn samples(&self) -> &[NkSample] {
        &self.samples
    }

    pub fn range_nm(&self) -> (f64, f64) {
        (self.samples[0].wavelength_nm, self.samples[self.samples.len() - 1].wavelength_nm)
    }

    pub fn covers(&self, wavelength_nm: f64) -> bool {
        let (lo, hi) = self.range_nm();
        wavelength_nm >= lo && wavelength_nm <= hi
    }

    /// Complex index `n - i k`, linearly interpolating `n` and `k` separately.
    pub fn interpolate_nk(&self, wavelength_nm: f64) -> Result<Complex64> {
        let (lo, hi) = self.range_nm();
        if !(wavelength_nm >= lo && wavelength_nm <= hi) {
            return Err(Error::WavelengthOutOfRange {
                material: self.material_name.clone(),
                wavelength_nm,
                min_nm: lo,
                max_nm: hi,
            });
        }
        let upper = self
            .samples
            .partition_point(|s| s.wavelength_nm < wavelength_nm);
        let s1 = self.samples[upper];
        if s1.wavelength_nm == wavelength_nm {
            return Ok(Complex64::new(s1.n, -s1.k));
        }
        let s0 = self.samples[upper - 1];
        let t = (wavelength_nm - s0.wavelength_nm) / (s1.wavelength_nm - s0.wavelength_nm);
        let n = s0.n + t * (s1.n - s0.n);
        let k = s0.k + t * (s1.k - s0.k);
        Ok(Complex64::new(n, -k))
    }

    /// Parse the whitespace-delimited `wavelength_nm n k` format. A
    /// `# material=<name>` header line is required; other `#` lines are comments.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut name = None;
        let mut samples = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(value) = comment.trim().strip_prefix("material=") {
                    name = Some(value.trim().to_string());
                }
                continue;
            }
            let cols = parse_columns(line, 3, source, idx + 1)?;
            samples.push(NkSample {
                wavelength_nm: cols[0],
                n: cols[1],
                k: cols[2],
            });
        }
        let name = name.ok_or_else(|| Error::Parse {
            path: source.to_string(),
            line: 1,
            reason: "missing '# material=<name>' header".into(),
        })?;
        Self::new(name, samples)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// Non-negative spectral quantity sampled on increasing wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCurve {
    name: String,
    samples: Vec<(f64, f64)>,
}

impl SpectralCurve {
    pub fn new(name: impl Into<String>, samples: Vec<(f64, f64)>) -> Result<Self> {
        let name = name.into();
        if samples.is_empty() {
            return Err(Error::InvalidTable(format!("{name}: empty spectral curve")));
        }
        if samples
            .iter()
            .any(|&(w, v)| !w.is_finite() || !v.is_finite() || v < 0.0)
        {
            return Err(Error::InvalidTable(format!(
                "{name}: values must be finite and non-negative"
            )));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidTable(format!(
                "{name}: wavelengths must be strictly increasing"
            )));
        }
        Ok(Self { name, samples })
    }

    /// Constant curve over `[min_nm, max_nm]`.
    pub fn flat(name: impl Into<String>, value: f64, min_nm: f64, max_nm: f64) -> Result<Self> {
        Self::new(name, vec![(min_nm, value), (max_nm, value)])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn range_nm(&self) -> (f64, f64) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.samples.iter().map(|&(w, v)| (w, v * factor)).collect(),
        )
    }

    pub fn value_at(&self, wavelength_nm: f64) -> Result<f64> {
        let (lo, hi) = self.range_nm();
        if !(wavelength_nm >= lo && wavelength_nm <= hi) {
            return Err(Error::WavelengthOutOfRange {
                material: self.name.clone(),
                wavelength_nm,
                min_nm: lo,
                max_nm: hi,
            });
        }
        let upper = self.samples.partition_point(|s| s.0 < wavelength_nm);
        let (w1, v1) = self.samples[upper];
        if w1 == wavelength_nm {
            return Ok(v1);
        }
        let (w0, v0) = self.samples[upper - 1];
        Ok(v0 + (wavelength_nm - w0) / (w1 - w0) * (v1 - v0))
    }

    /// Parse the whitespace-delimited `wavelength_nm value` format.
    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols = parse_columns(line, 2, name, idx + 1)?;
            samples.push((cols[0], cols[1]));
        }
        Self::new(name, samples)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

fn parse_columns(line: &str, expected: usize, source: &str, line_no: usize) -> Result<Vec<f64>> {
    let cols: Vec<&str> = line.split_whitespace().collect();
    if cols.len() != expected {
        return Err(Error::Parse {
            path: source.to_string(),
            line: line_no,
            reason: format!("expected {expected} columns, found {}", cols.len()),
        });
    }
    cols.iter()
        .map(|c| {
            c.parse::<f64>().map_err(|e| Error::Parse {
                path: source.to_string(),
                line: line_no,
                reason: format!("{c:?}: {e}"),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> DispersionTable {
        DispersionTable::new(
            "test",
            vec![
                NkSample { wavelength_nm: 500.0, n: 2.0, k: 0.0 },
                NkSample { wavelength_nm: 600.0, n: 3.0, k: 1.0 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn exact_at_sample_point() {
        assert_eq!(two_point().interpolate_nk(500.0).unwrap(), Complex64::new(2.0, 0.0));
    }

    #[test]
    fn linear_at_midpoint() {
        let z = two_point().interpolate_nk(550.0).unwrap();
        assert!((z.re - 2.5).abs() < 1e-15);
        assert!((z.im + 0.5).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_names_material_and_wavelength() {
        let err = two_point().interpolate_nk(450.0).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::WavelengthOutOfRange { .. }));
        assert!(msg.contains("test") && msg.contains("450"), "{msg}");
    }

    #[test]
    fn rejects_non_monotone_and_short_tables() {
        let s = NkSample { wavelength_nm: 500.0, n: 1.0, k: 0.0 };
        assert!(DispersionTable::new("x", vec![s]).is_err());
        assert!(DispersionTable::new("x", vec![s, s]).is_err());
    }

    #[test]
    fn parses_file_format() {
        let text = "# material=Foo\n# comment\n400 1.5 0.0\n500 1.6 0.1\n";
        let t = DispersionTable::parse(text, "mem").unwrap();
        assert_eq!(t.material_name(), "Foo");
        assert_eq!(t.samples().len(), 2);
        assert!(DispersionTable::parse("400 1.5 0\n500 1.6 0\n", "mem").is_err());
        let err = DispersionTable::parse("# material=F\n400 1.5\n", "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn curve_interpolation_and_range() {
        let c = SpectralCurve::parse("400 0\n500 1\n", "c").unwrap();
        assert_eq!(c.value_at(450.0).unwrap(), 0.5);
        assert!(c.value_at(501.0).is_err());
        assert!(SpectralCurve::new("neg", vec![(400.0, -1.0)]).is_err());
    }
}
