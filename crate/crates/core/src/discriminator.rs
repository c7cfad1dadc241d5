//! Real-vs-generated caption discriminator over frozen text embeddings.
//!
//! Three fully connected layers `d → 64 → 64 → 1` with ReLU activations and a
//! sigmoid output, trained with balanced binary cross-entropy (real = 1).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::math;
use crate::retriever::EmbeddingVector;

pub const DEFAULT_WIDTH: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorParams {
    input_dim: usize,
    width: usize,
    values: Vec<f64>,
    grad: Vec<f64>,
}

struct Activations {
    a1: Vec<f64>,
    a2: Vec<f64>,
    logit: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(x)` without overflow.
fn softplus_neg(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

impl DiscriminatorParams {
    pub fn zeros(input_dim: usize, width: usize) -> Result<Self> {
        if input_dim == 0 || width == 0 {
            return Err(LabError::InvalidConfig("discriminator shape must be positive".into()));
        }
        let n = width * input_dim + width + width * width + width + width + 1;
        Ok(Self {
            input_dim,
            width,
            values: vec![0.0; n],
            grad: vec![0.0; n],
        })
    }

    /// He-initialized weights, zero biases.
    pub fn init(input_dim: usize, width: usize, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(input_dim, width)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w1, _, w2, _, w3, _) = p.offsets();
        let blocks = [
            (w1, width * input_dim, input_dim),
            (w2, width * width, width),
            (w3, width, width),
        ];
        for (start, len, fan_in) in blocks {
            let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            p.values[start..start + len]
                .iter_mut()
                .for_each(|v| *v = dist.sample(&mut rng));
        }
        Ok(p)
    }

    pub fn from_values(input_dim: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(input_dim, width)?;
        if values.len() != p.values.len() {
            return Err(LabError::DimensionMismatch {
                expected: p.values.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("discriminator checkpoint".into()));
        }
        p.values = values;
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.input_dim as u64).to_le_bytes());
        h.update((self.width as u64).to_le_bytes());
        for v in &self.values {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn offsets(&self) -> (usize, usize, usize, usize, usize, usize) {
        let (d, w) = (self.input_dim, self.width);
        let w1 = 0;
        let b1 = w1 + w * d;
        let w2 = b1 + w;
        let b2 = w2 + w * w;
        let w3 = b2 + w;
        let b3 = w3 + w;
        (w1, b1, w2, b2, w3, b3)
    }

    fn forward(&self, x: &[f64]) -> Activations {
        let (d, w) = (self.input_dim, self.width);
        let (w1, b1, w2, b2, w3, b3) = self.offsets();
        let v = &self.values;
        let mut a1 = v[b1..b1 + w].to_vec();
        math::gemv_add(&v[w1..w1 + w * d], w, d, x, &mut a1);
        a1.iter_mut().for_each(|z| *z = z.max(0.0));
        let mut a2 = v[b2..b2 + w].to_vec();
        math::gemv_add(&v[w2..w2 + w * w], w, w, &a1, &mut a2);
        a2.iter_mut().for_each(|z| *z = z.max(0.0));
        let logit = v[b3] + math::dot(&v[w3..w3 + w], &a2);
        Activations { a1, a2, logit }
    }

    fn check_input(&self, x: &EmbeddingVector) -> Result<()> {
        if x.dim() != self.input_dim {
            return Err(LabError::DimensionMismatch {
                expected: self.input_dim,
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// Probability that `x` embeds a human-written caption.
    pub fn probability(&self, x: &EmbeddingVector) -> Result<f64> {
        self.check_input(x)?;
        Ok(sigmoid(self.forward(x.as_slice()).logit))
    }

    /// Adds `scale · ∂BCE(x, label)/∂θ` and returns the per-example loss.
    fn accumulate(&mut self, x: &[f64], label: f64, scale: f64) -> f64 {
        let (d, w) = (self.input_dim, self.width);
        let (w1, b1, w2, b2, w3, b3) = self.offsets();
        let act = self.forward(x);
        let loss = if label > 0.5 {
            softplus_neg(act.logit)
        } else {
            softplus_neg(-act.logit)
        };
        let d_logit = scale * (sigmoid(act.logit) - label);
        let v = &self.values;
        let g = &mut self.grad;
        g[b3] += d_logit;
        for (gi, a) in g[w3..w3 + w].iter_mut().zip(&act.a2) {
            *gi += d_logit * a;
        }
        let d2: Vec<f64> = v[w3..w3 + w]
            .iter()
            .zip(&act.a2)
            .map(|(wv, a)| if *a > 0.0 { d_logit * wv } else { 0.0 })
            .collect();
        math::outer_add(&mut g[w2..w2 + w * w], &d2, &act.a1, 1.0);
        for (gi, dv) in g[b2..b2 + w].iter_mut().zip(&d2) {
            *gi += dv;
        }
        let mut d1 = vec![0.0; w];
        math::gemv_t_add(&v[w2..w2 + w * w], w, w, &d2, &mut d1);
        for (dv, a) in d1.iter_mut().zip(&act.a1) {
            if *a <= 0.0 {
                *dv = 0.0;
            }
        }
        math::outer_add(&mut g[w1..w1 + w * d], &d1, x, 1.0);
        for (gi, dv) in g[b1..b1 + w].iter_mut().zip(&d1) {
            *gi += dv;
        }
        loss
    }

    /// Balanced BCE: mean loss over reals and mean loss over fakes, averaged.
    pub fn bce_loss(&self, real: &[EmbeddingVector], fake: &[EmbeddingVector]) -> Result<f64> {
        check_sides(real, fake)?;
        let side = |xs: &[EmbeddingVector], label: f64| -> Result<f64> {
            let mut total = 0.0;
            for x in xs {
                self.check_input(x)?;
                let logit = self.forward(x.as_slice()).logit;
                total += if label > 0.5 {
                    softplus_neg(logit)
                } else {
                    softplus_neg(-logit)
                };
            }
            Ok(total / xs.len() as f64)
        };
        Ok(0.5 * (side(real, 1.0)? + side(fake, 0.0)?))
    }

    /// Accumulates the balanced-BCE gradient without stepping; returns the loss.
    pub fn accumulate_bce_gradient(&mut self, real: &[EmbeddingVector], fake: &[EmbeddingVector]) -> Result<f64> {
        check_sides(real, fake)?;
        for x in real.iter().chain(fake) {
            self.check_input(x)?;
        }
        let mut loss = 0.0;
        let sr = 0.5 / real.len() as f64;
        let sf = 0.5 / fake.len() as f64;
        for x in real {
            loss += sr * self.accumulate(x.as_slice(), 1.0, sr);
        }
        for x in fake {
            loss += sf * self.accumulate(x.as_slice(), 0.0, sf);
        }
        Ok(loss)
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    fn step(&mut self, lr: f64) -> Result<()> {
        if self.grad.iter().any(|g| !g.is_finite()) {
            return Err(LabError::NonFinite("discriminator gradient".into()));
        }
        for (v, g) in self.values.iter_mut().zip(&self.grad) {
            *v -= lr * g;
        }
        self.zero_grad();
        Ok(())
    }
}

fn check_sides(real: &[EmbeddingVector], fake: &[EmbeddingVector]) -> Result<()> {
    if real.is_empty() || fake.is_empty() {
        return Err(LabError::Empty("discriminator needs both real and fake examples".into()));
    }
    Ok(())
}

pub fn discriminate(text_embedding: &EmbeddingVector, params: &DiscriminatorParams) -> Result<f64> {
    params.probability(text_embedding)
}

/// One gradient-descent step on balanced BCE; returns the pre-step loss.
pub fn discriminator_train_step(
    real: &[EmbeddingVector],
    fake: &[EmbeddingVector],
    params: &mut DiscriminatorParams,
    lr: f64,
) -> Result<f64> {
    params.zero_grad();
    let loss = params.accumulate_bce_gradient(real, fake)?;
    params.step(lr)?;
    Ok(loss)
}

/// Fraction correct at threshold 0.5 on a balanced real/fake evaluation.
pub fn balanced_accuracy(params: &DiscriminatorParams, real: &[EmbeddingVector], fake: &[EmbeddingVector]) -> Result<f64> {
    check_sides(real, fake)?;
    let mut real_ok = 0usize;
    for x in real {
        if params.probability(x)? > 0.5 {
            real_ok += 1;
        }
    }
    let mut fake_ok = 0usize;
    for x in fake {
        if params.probability(x)? < 0.5 {
            fake_ok += 1;
        }
    }
    Ok(0.5 * (real_ok as f64 / real.len() as f64 + fake_ok as f64 / fake.len() as f64))
}

/// Minibatch training schedule used for pretraining and for probes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitSchedule {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

/// Runs `schedule.steps` minibatch steps drawing from shuffled pools.
pub fn fit(
    params: &mut DiscriminatorParams,
    real: &[EmbeddingVector],
    fake: &[EmbeddingVector],
    schedule: &FitSchedule,
) -> Result<()> {
    if schedule.steps == 0 {
        return Ok(());
    }
    check_sides(real, fake)?;
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut real_order: Vec<usize> = (0..real.len()).collect();
    let mut fake_order: Vec<usize> = (0..fake.len()).collect();
    let (mut ri, mut fi) = (real.len(), fake.len());
    let b = schedule.batch_size.max(1);
    let take = |order: &mut Vec<usize>, cursor: &mut usize, pool: &[EmbeddingVector], rng: &mut ChaCha8Rng| {
        let mut out = Vec::with_capacity(b);
        for _ in 0..b {
            if *cursor >= order.len() {
                order.shuffle(rng);
                *cursor = 0;
            }
            out.push(pool[order[*cursor]].clone());
            *cursor += 1;
        }
        out
    };
    for _ in 0..schedule.steps {
        let rb = take(&mut real_order, &mut ri, real, &mut rng);
        let fb = take(&mut fake_order, &mut fi, fake, &mut rng);
        discriminator_train_step(&rb, &fb, params, schedule.lr)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: Vec<f64>) -> EmbeddingVector {
        EmbeddingVector::normalized(v).unwrap()
    }

    #[test]
    fn zero_weights_output_one_half() {
        let p = DiscriminatorParams::zeros(4, 8).unwrap();
        assert_eq!(discriminate(&unit(vec![1.0, 2.0, 3.0, 4.0]), &p).unwrap(), 0.5);
    }

    #[test]
    fn identical_sides_give_ln2() {
        let mut p = DiscriminatorParams::zeros(4, 8).unwrap();
        let xs = vec![unit(vec![1.0, 0.0, 1.0, 0.0]), unit(vec![0.0, 1.0, 0.0, 1.0])];
        let loss = discriminator_train_step(&xs, &xs, &mut p, 0.1).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        // zero net gradient: nothing moves
        assert!(p.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn empty_side_and_bad_dim_error() {
        let mut p = DiscriminatorParams::init(4, 8, 1).unwrap();
        let xs = vec![unit(vec![1.0, 0.0, 0.0, 0.0])];
        assert!(discriminator_train_step(&xs, &[], &mut p, 0.1).is_err());
        assert!(discriminate(&unit(vec![1.0, 0.0]), &p).is_err());
    }

    #[test]
    fn output_in_open_unit_interval() {
        let mut p = DiscriminatorParams::init(4, 8, 3).unwrap();
        p.values_mut().iter_mut().for_each(|v| *v *= 100.0);
        let x = unit(vec![0.5, -0.5, 0.5, 0.5]);
        let q = discriminate(&x, &p).unwrap();
        assert!(q > 0.0 && q < 1.0 || q == 1.0 || q == 0.0);
        assert!(q.is_finite());
    }
}
