use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Added to every fitted covariance diagonal.
pub const COVARIANCE_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianRepr {
    mean: Vec<f64>,
    /// Row-major `dim x dim`.
    covariance: Vec<f64>,
}

/// Multivariate normal with a cached Cholesky factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRepr", into = "GaussianRepr")]
pub struct Gaussian {
    mean: Vec<f64>,
    covariance: Vec<f64>,
    /// Lower Cholesky factor, row-major.
    chol: Vec<f64>,
    log_norm: f64,
}

impl TryFrom<GaussianRepr> for Gaussian {
    type Error = Error;

    fn try_from(r: GaussianRepr) -> Result<Self> {
        Gaussian::new(r.mean, r.covariance)
    }
}

impl From<Gaussian> for GaussianRepr {
    fn from(g: Gaussian) -> Self {
        Self {
            mean: g.mean,
            covariance: g.covariance,
        }
    }
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || covariance.len() != d * d {
            return Err(Error::InvalidInput(format!(
                "covariance has {} entries for dimension {d}",
                covariance.len()
            )));
        }
        let cov = DMatrix::from_row_slice(d, d, &covariance);
        if (0..d).any(|i| (0..i).any(|j| cov[(i, j)] != cov[(j, i)])) {
            return Err(Error::InvalidInput("covariance is not symmetric".into()));
        }
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("covariance is not positive definite".into()))?;
        let l = chol.l();
        let log_det_half: f64 = (0..d).map(|i| l[(i, i)].ln()).sum();
        let log_norm = -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - log_det_half;
        let chol = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| l[(i, j)]).collect();
        Ok(Self {
            mean,
            covariance,
            chol,
            log_norm,
        })
    }

    /// Sample mean and unbiased covariance plus the ridge; a single point
    /// gets the ridge alone.
    pub fn fit<'a>(dim: usize, points: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let pts: Vec<DVector<f64>> = points.into_iter().map(|p| DVector::from_column_slice(p)).collect();
        if pts.is_empty() {
            return Err(Error::InvalidInput("cannot fit a Gaussian to no points".into()));
        }
        let n = pts.len() as f64;
        let mean = pts.iter().fold(DVector::zeros(dim), |acc, p| acc + p) / n;
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        for p in &pts {
            let c = p - &mean;
            cov.ger(1.0, &c, &c, 1.0);
        }
        if pts.len() > 1 {
            cov /= n - 1.0;
        }
        // exact symmetry regardless of accumulation order
        let cov = (&cov + cov.transpose()) * 0.5 + DMatrix::identity(dim, dim) * COVARIANCE_RIDGE;
        let row_major = (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| cov[(i, j)]).collect();
        Self::new(mean.as_slice().to_vec(), row_major)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim(), self.dim(), &self.covariance)
    }

    /// Squared Mahalanobis distance.
    pub fn mahalanobis2(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut y = [0.0f64; 32];
        let mut heap;
        let y: &mut [f64] = if d <= 32 {
            &mut y[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut q = 0.0;
        for i in 0..d {
            let mut s = x[i] - self.mean[i];
            for j in 0..i {
                s -= self.chol[i * d + j] * y[j];
            }
            y[i] = s / self.chol[i * d + i];
            q += y[i] * y[i];
        }
        q
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis2(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// Internal class index with the largest posterior.
    pub class: usize,
    pub posteriors: Vec<f64>,
    /// `max_k log(prior_k * N_k(x))`.
    pub log_density: f64,
    pub rejected: bool,
}

/// Class-conditional Gaussians with priors and a log-density rejection floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityModel {
    pub components: Vec<Gaussian>,
    pub priors: Vec<f64>,
    pub rejection_threshold: f64,
}

impl DensityModel {
    /// Fit one Gaussian per class; `priors` default to class frequencies.
    /// The threshold is the `quantile` of training log densities under each
    /// point's own class.
    pub fn fit(
        dim: usize,
        points: &[f64],
        labels: &[usize],
        num_classes: usize,
        uniform_priors: bool,
        quantile: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&quantile) {
            return Err(Error::Config(format!("rejection quantile {quantile} must lie in [0, 1]")));
        }
        let mut components = Vec::with_capacity(num_classes);
        let mut counts = vec![0usize; num_classes];
        for class in 0..num_classes {
            let members: Vec<&[f64]> = labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == class)
                .map(|(i, _)| &points[i * dim..(i + 1) * dim])
                .collect();
            if members.len() < dim + 1 {
                return Err(Error::EmptyClass(format!(
                    "class {class} has {} points, at least {} needed",
                    members.len(),
                    dim + 1
                )));
            }
            counts[class] = members.len();
            components.push(Gaussian::fit(dim, members)?);
        }
        let total: usize = counts.iter().sum();
        let priors = if uniform_priors {
            vec![1.0 / num_classes as f64; num_classes]
        } else {
            counts.iter().map(|&c| c as f64 / total as f64).collect()
        };
        let mut model = Self {
            components,
            priors,
            rejection_threshold: f64::NEG_INFINITY,
        };
        let mut own: Vec<f64> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| model.priors[l].ln() + model.components[l].log_pdf(&points[i * dim..(i + 1) * dim]))
            .collect();
        own.sort_by(f64::total_cmp);
        model.rejection_threshold = own[((quantile * (own.len() - 1) as f64).floor()) as usize];
        Ok(model)
    }

    pub fn num_classes(&self) -> usize {
        self.components.len()
    }

    pub fn log_joint(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().zip(&self.priors).map(|(g, p)| p.ln() + g.log_pdf(x)).collect()
    }

    pub fn classify(&self, x: &[f64]) -> Classification {
        let scores = self.log_joint(x);
        let (class, max) = scores
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        let posteriors = if max.is_finite() {
            let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let sum: f64 = exp.iter().sum();
            exp.iter().map(|e| e / sum).collect()
        } else {
            vec![1.0 / scores.len() as f64; scores.len()]
        };
        Classification {
            class,
            posteriors,
            log_density: max,
            rejected: !(max >= self.rejection_threshold),
        }
    }
}
