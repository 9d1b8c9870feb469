//! Spectral-normalized residual embedding network with class-conditional
//! Gaussians in embedding space.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gaussian::{Classification, DensityModel};
use super::gmm::DEFAULT_REJECTION_QUANTILE;
use super::preprocess::Standardizer;
use super::set::LabeledContrastSet;
use crate::error::{Error, Result};
use crate::rng::derived_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmmConfig {
    pub input_dim: usize,
    pub embedding_dim: usize,
    /// Number of residual blocks.
    pub depth: usize,
    /// Upper bound `c` on each block's largest singular value.
    pub spectral_coefficient: f64,
    pub dropout: f64,
    /// Leaky rectifier slope for negative inputs.
    pub negative_slope: f64,
}

impl Default for AmmConfig {
    fn default() -> Self {
        Self {
            input_dim: 3,
            embedding_dim: 16,
            depth: 4,
            spectral_coefficient: 0.5,
            dropout: 0.1,
            negative_slope: 0.01,
        }
    }
}

impl AmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.embedding_dim == 0 {
            return Err(Error::Config("network dimensions must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} must lie in [0, 1)", self.dropout)));
        }
        if !(self.spectral_coefficient > 0.0 && self.spectral_coefficient.is_finite()) {
            return Err(Error::Config("spectral_coefficient must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.negative_slope) {
            return Err(Error::Config("negative_slope must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Points per step, drawn with replacement; capped at the set size.
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub rejection_quantile: f64,
    /// Power-iteration steps used to settle the spectral estimate after training.
    pub final_power_iterations: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 10_000,
            iterations: 5000,
            seed: 0,
            rejection_quantile: DEFAULT_REJECTION_QUANTILE,
            final_power_iterations: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.learning_rate, self.epsilon];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite()))
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.batch_size == 0
        {
            return Err(Error::Config("optimizer hyperparameters must be positive, betas in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.rejection_quantile) {
            return Err(Error::Config("rejection_quantile must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

mod matrix_serde {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Repr {
        rows: usize,
        cols: usize,
        /// Row-major.
        data: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let data = m.transpose().as_slice().to_vec();
        Repr {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let r = Repr::deserialize(d)?;
        if r.data.len() != r.rows * r.cols {
            return Err(serde::de::Error::custom(format!(
                "matrix {}x{} has {} entries",
                r.rows,
                r.cols,
                r.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(r.rows, r.cols, &r.data))
    }
}

/// One power-iteration step with persistent vectors:
/// `u <- normalize(W^T v)`, `v <- normalize(W u)`. Returns the estimate
/// `v^T W u`, or 0 when `W` annihilates the iterate.
pub fn power_iteration_step(w: &DMatrix<f64>, u: &mut DVector<f64>, v: &mut DVector<f64>) -> f64 {
    let wt_v = w.tr_mul(v);
    let n = wt_v.norm();
    if !(n > 0.0) {
        return 0.0;
    }
    *u = wt_v / n;
    let wu = w * &*u;
    let sigma = wu.norm();
    if !(sigma > 0.0) {
        return 0.0;
    }
    *v = wu / sigma;
    sigma
}

/// `min(1, c / sigma)`.
pub fn spectral_scale(sigma_hat: f64, coefficient: f64) -> f64 {
    if sigma_hat > coefficient {
        coefficient / sigma_hat
    } else {
        1.0
    }
}

/// `W * min(1, c / sigma_hat)` after one power-iteration step.
pub fn spectral_normalize(w: &DMatrix<f64>, coefficient: f64, u: &mut DVector<f64>, v: &mut DVector<f64>) -> DMatrix<f64> {
    let sigma = power_iteration_step(w, u, v);
    w * spectral_scale(sigma, coefficient)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralLinear {
    #[serde(with = "matrix_serde")]
    pub weight: DMatrix<f64>,
    #[serde(with = "matrix_serde")]
    pub bias: DMatrix<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Factor applied to `weight` in the forward pass.
    pub scale: f64,
}

impl SpectralLinear {
    pub fn effective_weight(&self) -> DMatrix<f64> {
        &self.weight * self.scale
    }

    /// Run `steps` power iterations and refresh `scale`.
    pub fn renormalize(&mut self, coefficient: f64, steps: usize) {
        let mut u = DVector::from_column_slice(&self.u);
        let mut v = DVector::from_column_slice(&self.v);
        let mut sigma = 0.0;
        for _ in 0..steps {
            sigma = power_iteration_step(&self.weight, &mut u, &mut v);
        }
        if steps > 0 {
            self.scale = spectral_scale(sigma, coefficient);
        }
        self.u = u.as_slice().to_vec();
        self.v = v.as_slice().to_vec();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmmNetwork {
    pub negative_slope: f64,
    pub dropout: f64,
    pub spectral_coefficient: f64,
    #[serde(with = "matrix_serde")]
    pub input_weight: DMatrix<f64>,
    #[serde(with = "matrix_serde")]
    pub input_bias: DMatrix<f64>,
    pub blocks: Vec<SpectralLinear>,
    #[serde(with = "matrix_serde")]
    pub head_weight: DMatrix<f64>,
    #[serde(with = "matrix_serde")]
    pub head_bias: DMatrix<f64>,
}

/// Intermediate activations of a batched forward pass.
struct ForwardCache {
    hidden: Vec<DMatrix<f64>>,
    pre: Vec<DMatrix<f64>>,
    logits: DMatrix<f64>,
}

fn add_row_bias(m: &mut DMatrix<f64>, bias: &DMatrix<f64>) {
    for (j, mut col) in m.column_iter_mut().enumerate() {
        col.add_scalar_mut(bias[j]);
    }
}

fn column_sums(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(m.ncols(), 1, m.column_iter().map(|c| c.sum()))
}

fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
}

fn unit_vector(rng: &mut impl Rng, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 {
            return v / n;
        }
    }
}

impl AmmNetwork {
    /// Fan-in uniform input projection and head; residual blocks rescaled so
    /// their largest singular value equals the coefficient.
    pub fn init(cfg: &AmmConfig, num_classes: usize, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        if num_classes == 0 {
            return Err(Error::InvalidInput("at least one class is required".into()));
        }
        let (d, e) = (cfg.input_dim, cfg.embedding_dim);
        let input_weight = uniform_matrix(rng, e, d, 1.0 / (d as f64).sqrt());
        let mut blocks = Vec::with_capacity(cfg.depth);
        for _ in 0..cfg.depth {
            let mut w = uniform_matrix(rng, e, e, 1.0 / (e as f64).sqrt());
            let sigma = w.clone().svd(false, false).singular_values.max();
            if sigma > 0.0 {
                w *= cfg.spectral_coefficient / sigma;
            }
            let mut block = SpectralLinear {
                weight: w,
                bias: DMatrix::zeros(e, 1),
                u: unit_vector(rng, e).as_slice().to_vec(),
                v: unit_vector(rng, e).as_slice().to_vec(),
                scale: 1.0,
            };
            block.renormalize(cfg.spectral_coefficient, 20);
            blocks.push(block);
        }
        Ok(Self {
            negative_slope: cfg.negative_slope,
            dropout: cfg.dropout,
            spectral_coefficient: cfg.spectral_coefficient,
            input_weight,
            input_bias: DMatrix::zeros(e, 1),
            blocks,
            head_weight: uniform_matrix(rng, num_classes, e, 1.0 / (e as f64).sqrt()),
            head_bias: DMatrix::zeros(num_classes, 1),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_weight.ncols()
    }

    pub fn embedding_dim(&self) -> usize {
        self.input_weight.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.head_weight.nrows()
    }

    /// Parameter groups in a fixed order: input weight, input bias, each
    /// block's weight and bias, head weight, head bias.
    pub fn parameters(&self) -> Vec<&DMatrix<f64>> {
        let mut out = vec![&self.input_weight, &self.input_bias];
        for b in &self.blocks {
            out.push(&b.weight);
            out.push(&b.bias);
        }
        out.push(&self.head_weight);
        out.push(&self.head_bias);
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut DMatrix<f64>> {
        let mut out = vec![&mut self.input_weight, &mut self.input_bias];
        for b in &mut self.blocks {
            out.push(&mut b.weight);
            out.push(&mut b.bias);
        }
        out.push(&mut self.head_weight);
        out.push(&mut self.head_bias);
        out
    }

    /// One power-iteration step per block, refreshing every scale.
    pub fn spectral_step(&mut self) {
        let c = self.spectral_coefficient;
        for b in &mut self.blocks {
            b.renormalize(c, 1);
        }
    }

    fn leaky(&self, z: f64) -> f64 {
        if z >= 0.0 {
            z
        } else {
            self.negative_slope * z
        }
    }

    fn forward_batch(&self, x: &DMatrix<f64>, masks: Option<&[DMatrix<f64>]>) -> ForwardCache {
        let mut h = x * self.input_weight.transpose();
        add_row_bias(&mut h, &self.input_bias);
        let mut hidden = Vec::with_capacity(self.blocks.len() + 1);
        let mut pre = Vec::with_capacity(self.blocks.len());
        for (l, b) in self.blocks.iter().enumerate() {
            let mut z = &h * b.effective_weight().transpose();
            add_row_bias(&mut z, &b.bias);
            let mut a = z.map(|v| self.leaky(v));
            if let Some(m) = masks {
                a.component_mul_assign(&m[l]);
            }
            let next = &h + a;
            hidden.push(h);
            pre.push(z);
            h = next;
        }
        let mut logits = &h * self.head_weight.transpose();
        add_row_bias(&mut logits, &self.head_bias);
        hidden.push(h);
        ForwardCache { hidden, pre, logits }
    }

    /// Embeddings (rows) of a batch of standardized points (rows), no dropout.
    pub fn embed_batch(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward_batch(x, None).hidden.pop().expect("final hidden state")
    }

    pub fn logits_batch(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward_batch(x, None).logits
    }

    pub fn embed(&self, x: &[f64]) -> Vec<f64> {
        self.embed_batch(&DMatrix::from_row_slice(1, x.len(), x)).as_slice().to_vec()
    }

    /// `(embedding, logits)` of one point; dropout only when `rng` is given.
    pub fn forward(&self, x: &[f64], rng: Option<&mut dyn rand::RngCore>) -> (Vec<f64>, Vec<f64>) {
        let xm = DMatrix::from_row_slice(1, x.len(), x);
        let masks = rng.map(|r| self.sample_masks(1, r));
        let cache = self.forward_batch(&xm, masks.as_deref());
        (
            cache.hidden.last().expect("final hidden state").as_slice().to_vec(),
            cache.logits.as_slice().to_vec(),
        )
    }

    /// Inverted-dropout masks: entries `0` or `1 / (1 - p)`.
    pub fn sample_masks(&self, rows: usize, rng: &mut (impl Rng + ?Sized)) -> Vec<DMatrix<f64>> {
        let keep = 1.0 - self.dropout;
        (0..self.blocks.len())
            .map(|_| DMatrix::from_fn(rows, self.embedding_dim(), |_, _| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }))
            .collect()
    }

    /// Mean softmax cross-entropy and its gradient for every parameter group
    /// (same order as [`AmmNetwork::parameters`]). Block scales are constants.
    pub fn loss_and_gradients(
        &self,
        x: &DMatrix<f64>,
        labels: &[usize],
        masks: Option<&[DMatrix<f64>]>,
    ) -> (f64, Vec<DMatrix<f64>>) {
        let n = x.nrows();
        let cache = self.forward_batch(x, masks);
        let mut dlogits = cache.logits.clone();
        let mut loss = 0.0;
        for i in 0..n {
            let row = cache.logits.row(i);
            let max = row.max();
            let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            loss += lse - row[labels[i]];
            for k in 0..row.len() {
                dlogits[(i, k)] = ((cache.logits[(i, k)] - lse).exp() - f64::from(u8::from(k == labels[i]))) / n as f64;
            }
        }
        loss /= n as f64;

        let depth = self.blocks.len();
        let last = &cache.hidden[depth];
        let d_head_w = dlogits.tr_mul(last);
        let d_head_b = column_sums(&dlogits);
        let mut dh = &dlogits * &self.head_weight;
        let mut block_grads = Vec::with_capacity(depth);
        for l in (0..depth).rev() {
            let b = &self.blocks[l];
            let z = &cache.pre[l];
            let slope = self.negative_slope;
            let mut dz = dh.zip_map(z, |g, zv| if zv >= 0.0 { g } else { g * slope });
            if let Some(m) = masks {
                dz.component_mul_assign(&m[l]);
            }
            let dw = dz.tr_mul(&cache.hidden[l]) * b.scale;
            let db = column_sums(&dz);
            dh += &dz * b.effective_weight();
            block_grads.push((dw, db));
        }
        let d_in_w = dh.tr_mul(x);
        let d_in_b = column_sums(&dh);
        let mut grads = vec![d_in_w, d_in_b];
        for (dw, db) in block_grads.into_iter().rev() {
            grads.push(dw);
            grads.push(db);
        }
        grads.push(d_head_w);
        grads.push(d_head_b);
        (loss, grads)
    }

    /// Sign of every pre-activation (`z >= 0`), block by block, column-major.
    /// The loss is smooth in the parameters wherever this pattern is constant.
    pub fn activation_pattern(&self, x: &DMatrix<f64>, masks: Option<&[DMatrix<f64>]>) -> Vec<bool> {
        self.forward_batch(x, masks).pre.iter().flat_map(|z| z.iter().map(|&v| v >= 0.0).collect::<Vec<_>>()).collect()
    }

    pub fn loss(&self, x: &DMatrix<f64>, labels: &[usize]) -> f64 {
        self.loss_and_gradients(x, labels, None).0
    }
}

struct Adam {
    m: Vec<DMatrix<f64>>,
    v: Vec<DMatrix<f64>>,
    t: i32,
}

impl Adam {
    fn new(params: &[&DMatrix<f64>]) -> Self {
        let zeros: Vec<DMatrix<f64>> = params.iter().map(|p| DMatrix::zeros(p.nrows(), p.ncols())).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, params: Vec<&mut DMatrix<f64>>, grads: &[DMatrix<f64>], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                p[i] -= cfg.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Rows of `set` as an `n x dim` matrix.
pub fn design_matrix(set: &LabeledContrastSet, indices: impl ExactSizeIterator<Item = usize>) -> DMatrix<f64> {
    let n = indices.len();
    let d = set.dim();
    let mut flat = Vec::with_capacity(n * d);
    for i in indices {
        flat.extend_from_slice(set.point(i));
    }
    DMatrix::from_row_slice(n, d, &flat)
}

/// State passed to a training monitor at every iteration, after the spectral
/// step and before the parameter update.
pub struct TrainStep<'a> {
    pub iteration: usize,
    pub loss: f64,
    pub gradient_norm: f64,
    pub network: &'a AmmNetwork,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmmModel {
    pub config: AmmConfig,
    pub network: AmmNetwork,
    pub standardizer: Standardizer,
    pub density: DensityModel,
    /// Training-set loss before the first and after the last update.
    pub initial_loss: f64,
    pub final_loss: f64,
}

impl AmmModel {
    pub fn embed_standardized(&self, x: &[f64]) -> Vec<f64> {
        self.network.embed(x)
    }

    pub fn classify_standardized(&self, x: &[f64]) -> Classification {
        self.density.classify(&self.network.embed(x))
    }

    pub fn classify(&self, raw: &[f64]) -> Classification {
        self.classify_standardized(&self.standardizer.apply(raw))
    }

    /// Classify many standardized points (rows) at once.
    pub fn classify_batch_standardized(&self, x: &DMatrix<f64>) -> Vec<Classification> {
        let emb = self.network.embed_batch(x);
        let mut row = vec![0.0; emb.ncols()];
        (0..emb.nrows())
            .map(|i| {
                for (j, r) in row.iter_mut().enumerate() {
                    *r = emb[(i, j)];
                }
                self.density.classify(&row)
            })
            .collect()
    }
}

pub fn classify_amm(model: &AmmModel, raw: &[f64]) -> Classification {
    model.classify(raw)
}

pub fn train_amm(
    set: &LabeledContrastSet,
    standardizer: Standardizer,
    amm: &AmmConfig,
    train: &TrainConfig,
) -> Result<AmmModel> {
    train_amm_monitored(set, standardizer, amm, train, |_| {})
}

/// Train on a preprocessed (standardized, balanced) set. Single-threaded and
/// bit-reproducible for a given seed.
pub fn train_amm_monitored(
    set: &LabeledContrastSet,
    standardizer: Standardizer,
    amm: &AmmConfig,
    train: &TrainConfig,
    mut monitor: impl FnMut(&TrainStep<'_>),
) -> Result<AmmModel> {
    amm.validate()?;
    train.validate()?;
    if set.dim() != amm.input_dim || standardizer.dim() != amm.input_dim {
        return Err(Error::DimensionMismatch {
            expected: (amm.input_dim, 1),
            actual: (set.dim(), 1),
        });
    }
    if set.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let k = set.num_classes();
    let mut init_rng = derived_rng(train.seed, "amm-init", 0);
    let mut rng = derived_rng(train.seed, "amm-train", 0);
    let mut net = AmmNetwork::init(amm, k, &mut init_rng)?;
    let all = design_matrix(set, 0..set.len());
    let labels = set.labels();
    let initial_loss = net.loss(&all, labels);

    let n = set.len();
    let batch = train.batch_size.min(n);
    let mut adam = Adam::new(&net.parameters());
    let mut idx = vec![0usize; batch];
    let mut batch_labels = vec![0usize; batch];
    for iteration in 1..=train.iterations {
        net.spectral_step();
        for (i, l) in idx.iter_mut().zip(batch_labels.iter_mut()) {
            *i = rng.random_range(0..n);
            *l = labels[*i];
        }
        let x = design_matrix(set, idx.iter().copied());
        let masks = (net.dropout > 0.0).then(|| net.sample_masks(batch, &mut rng));
        let (loss, grads) = net.loss_and_gradients(&x, &batch_labels, masks.as_deref());
        let gradient_norm = grads.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
        if !loss.is_finite() || !gradient_norm.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration,
                loss,
                grad_norm: gradient_norm,
            });
        }
        monitor(&TrainStep {
            iteration,
            loss,
            gradient_norm,
            network: &net,
        });
        adam.step(net.parameters_mut(), &grads, train);
    }
    let c = net.spectral_coefficient;
    for b in &mut net.blocks {
        b.renormalize(c, train.final_power_iterations);
    }
    let final_loss = net.loss(&all, labels);

    let emb = net.embed_batch(&all);
    let e = emb.ncols();
    let flat: Vec<f64> = (0..n).flat_map(|i| (0..e).map(move |j| (i, j))).map(|(i, j)| emb[(i, j)]).collect();
    let density = DensityModel::fit(e, &flat, labels, k, true, train.rejection_quantile)?;
    Ok(AmmModel {
        config: amm.clone(),
        network: net,
        standardizer,
        density,
        initial_loss,
        final_loss,
    })
}

#[cfg(test)]
mod tests {
    use rand_distr::{Distribution, Normal};

    use super::*;
    use crate::rng::rng_from_seed;

    fn largest_singular_value(m: &DMatrix<f64>) -> f64 {
        m.clone().svd(false, false).singular_values.max()
    }

    #[test]
    fn identity_is_halved_and_small_matrices_kept() {
        let mut rng = rng_from_seed(1);
        let mut u = unit_vector(&mut rng, 4);
        let mut v = unit_vector(&mut rng, 4);
        let w = DMatrix::<f64>::identity(4, 4);
        let out = spectral_normalize(&w, 0.5, &mut u, &mut v);
        assert!((out - w * 0.5).abs().max() < 1e-15);

        let small = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, 0.1, 0.2]));
        let (mut u, mut v) = (unit_vector(&mut rng, 3), unit_vector(&mut rng, 3));
        for _ in 0..50 {
            power_iteration_step(&small, &mut u, &mut v);
        }
        assert_eq!(spectral_normalize(&small, 0.5, &mut u, &mut v), small);
    }

    #[test]
    fn zero_matrix_unchanged() {
        let mut rng = rng_from_seed(2);
        let (mut u, mut v) = (unit_vector(&mut rng, 3), unit_vector(&mut rng, 3));
        let w = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(spectral_normalize(&w, 0.5, &mut u, &mut v), w);
    }

    #[test]
    fn converged_power_iteration_bounds_sigma() {
        let mut rng = rng_from_seed(3);
        for _ in 0..20 {
            let w = uniform_matrix(&mut rng, 16, 16, 2.0);
            let (mut u, mut v) = (unit_vector(&mut rng, 16), unit_vector(&mut rng, 16));
            for _ in 0..49 {
                power_iteration_step(&w, &mut u, &mut v);
            }
            let out = spectral_normalize(&w, 0.5, &mut u, &mut v);
            assert!(largest_singular_value(&out) <= 0.5 * 1.01);
        }
    }

    #[test]
    fn zero_blocks_are_identity_path() {
        let mut rng = rng_from_seed(4);
        let mut net = AmmNetwork::init(&AmmConfig::default(), 3, &mut rng).unwrap();
        for b in &mut net.blocks {
            b.weight.fill(0.0);
        }
        let x = [0.3, -1.2, 0.7];
        let h0 = &net.input_weight * DVector::from_column_slice(&x) + net.input_bias.column(0);
        let emb = net.embed(&x);
        for (a, b) in emb.iter().zip(h0.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn inference_is_deterministic_and_dropout_is_not() {
        let mut rng = rng_from_seed(5);
        let net = AmmNetwork::init(&AmmConfig { dropout: 0.5, ..Default::default() }, 3, &mut rng).unwrap();
        let x = [0.1, 0.2, 0.3];
        assert_eq!(net.forward(&x, None), net.forward(&x, None));
        let mut r = rng_from_seed(6);
        let a = net.forward(&x, Some(&mut r));
        let b = net.forward(&x, Some(&mut r));
        assert_ne!(a, b);
    }

    fn separated(seed: u64, n: usize) -> LabeledContrastSet {
        let mut rng = rng_from_seed(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let means = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 10.0, 0.0]];
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (c, m) in means.iter().enumerate() {
            for _ in 0..n {
                pts.push(m.map(|v| v + normal.sample(&mut rng)));
                labels.push(c);
            }
        }
        LabeledContrastSet::from_points(&pts, labels, vec!["a".into(), "b".into(), "c".into()]).unwrap()
    }

    #[test]
    fn short_training_is_reproducible_and_descends() {
        let set = separated(7, 60);
        let (std_set, st) = crate::mixture::standardize_fit_apply(&set).unwrap();
        let cfg = TrainConfig { iterations: 60, batch_size: 64, seed: 9, ..Default::default() };
        let a = train_amm(&std_set, st.clone(), &AmmConfig::default(), &cfg).unwrap();
        let b = train_amm(&std_set, st, &AmmConfig::default(), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.final_loss < a.initial_loss);
        for b in &a.network.blocks {
            assert!(largest_singular_value(&b.effective_weight()) <= 0.5 * 1.01);
        }
    }

    #[test]
    fn posteriors_sum_to_one() {
        let set = separated(8, 40);
        let (std_set, st) = crate::mixture::standardize_fit_apply(&set).unwrap();
        let cfg = TrainConfig { iterations: 20, seed: 1, ..Default::default() };
        let model = train_amm(&std_set, st, &AmmConfig::default(), &cfg).unwrap();
        let mut rng = rng_from_seed(10);
        for _ in 0..200 {
            let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(-20.0..20.0));
            let c = model.classify(&p);
            assert!((c.posteriors.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(c.posteriors.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn non_finite_inputs_abort_with_diagnostics() {
        let mut set = separated(9, 10);
        let (std_set, st) = crate::mixture::standardize_fit_apply(&set).unwrap();
        set = std_set;
        let cfg = TrainConfig { iterations: 5, learning_rate: 1e300, seed: 1, ..Default::default() };
        match train_amm(&set, st, &AmmConfig::default(), &cfg) {
            Err(Error::NonFiniteLoss { iteration, .. }) => assert!(iteration >= 1),
            other => panic!("expected divergence, got {:?}", other.map(|m| m.final_loss)),
        }
    }
}
