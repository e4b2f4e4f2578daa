//! The walk network: a two-layer per-vertex lift, stacked gated recurrent
//! layers, and a linear read-out over the last hidden state, with exact
//! reverse-mode gradients for both parameters and walk coordinates.

mod adam;
mod checkpoint;
mod gradcheck;
mod net;

pub use adam::{clip_global_norm, Adam};
pub use checkpoint::{Checkpoint, NamedArray, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, grad_check_with, random_suite, GradCheckCase, GradCheckConfig, GradCheckReport};
pub use net::{
    BackwardOutput, Dense, ForwardTrace, GruLayer, InputFeatures, LayerTrace, NetDims, WalkNet,
};
pub(crate) use net::{tensor_mut, tensor_mut1, tensor_ref, tensor_ref1};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the imitating network (and of the built-in walk victim,
/// which shares the architecture).
pub type ImitatorParams = WalkNet;

/// Probabilities below this are clamped before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Tolerance on `sum(probs) == 1`.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// A probability distribution over the dataset classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredictionVector(Vec<f64>);

impl PredictionVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput("prediction vector"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config(format!("invalid probabilities {probs:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Config(format!("probabilities sum to {sum}")));
        }
        Ok(PredictionVector(probs))
    }

    /// Wraps probabilities that are known to come from a softmax.
    pub(crate) fn from_probs_unchecked(probs: Vec<f64>) -> Self {
        PredictionVector(probs)
    }

    pub fn uniform(classes: usize) -> Self {
        PredictionVector(vec![1.0 / classes as f64; classes])
    }

    pub fn one_hot(classes: usize, class: usize) -> Self {
        let mut v = vec![0.0; classes];
        v[class] = 1.0;
        PredictionVector(v)
    }

    /// Softmax of raw scores.
    pub fn from_logits(logits: &[f64]) -> Self {
        let mut p = logits.to_vec();
        softmax_in_place(&mut p);
        PredictionVector(p)
    }

    /// Element-wise mean of several distributions.
    pub fn mean(items: &[PredictionVector]) -> Result<Self> {
        let first = items.first().ok_or(Error::EmptyInput("prediction vectors"))?;
        let d = first.len();
        let mut acc = vec![0.0; d];
        for p in items {
            if p.len() != d {
                return Err(Error::dims(d, p.len()));
            }
            for (a, x) in acc.iter_mut().zip(&p.0) {
                *a += x;
            }
        }
        let n = items.len() as f64;
        Ok(PredictionVector(acc.into_iter().map(|a| a / n).collect()))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn softmax_in_place(x: &mut [f64]) {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in x.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in x.iter_mut() {
        *v /= s;
    }
}

/// `sum_i ref_i * ln(ref_i / pred_i)` in nats, with `0 * ln(0 / x) = 0` and
/// predictions clamped to [`PROB_FLOOR`].
pub fn kld(reference: &[f64], pred: &[f64]) -> Result<f64> {
    if reference.len() != pred.len() {
        return Err(Error::dims(reference.len(), pred.len()));
    }
    Ok(kld_unchecked(reference, pred))
}

pub(crate) fn kld_unchecked(reference: &[f64], pred: &[f64]) -> f64 {
    reference
        .iter()
        .zip(pred)
        .filter(|(&r, _)| r > 0.0)
        .map(|(&r, &p)| r * (r.ln() - p.max(PROB_FLOOR).ln()))
        .sum()
}

/// Gradient of [`kld`] with respect to the logits that produced `pred`
/// through a softmax.
pub(crate) fn kld_logit_grad(reference: &[f64], pred: &[f64], out: &mut [f64]) {
    let mass: f64 = reference
        .iter()
        .zip(pred)
        .filter(|(_, &p)| p > PROB_FLOOR)
        .map(|(&r, _)| r)
        .sum();
    for ((o, &r), &p) in out.iter_mut().zip(reference).zip(pred) {
        let own = if p > PROB_FLOOR { r } else { 0.0 };
        *o = p * mass - own;
    }
}

/// The training or attack objective applied to the last-step prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum LossKind {
    /// KL divergence from a reference distribution to the prediction.
    Kld(PredictionVector),
    /// Cross-entropy against a class label.
    CrossEntropy(usize),
}

impl LossKind {
    pub fn reference(&self, classes: usize) -> Result<Vec<f64>> {
        match self {
            LossKind::Kld(p) => {
                if p.len() != classes {
                    return Err(Error::dims(classes, p.len()));
                }
                Ok(p.probs().to_vec())
            }
            LossKind::CrossEntropy(k) => {
                if *k >= classes {
                    return Err(Error::dims(format!("label < {classes}"), k));
                }
                Ok(PredictionVector::one_hot(classes, *k).into_inner())
            }
        }
    }
}

/// Borrowed view of one named parameter tensor.
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

/// Mutable view of one named parameter tensor.
pub struct TensorMut<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut [f64],
}

/// A fixed set of named, row-major parameter tensors.
pub trait Parameters {
    fn tensors(&self) -> Vec<TensorRef<'_>>;
    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>>;

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    fn squared_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|x| x * x)
            .sum()
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for x in t.data.iter_mut() {
                *x *= factor;
            }
        }
    }

    /// Flat copy of every entry, in tensor order.
    fn flatten(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter().copied())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    /// Direct evaluation of `sum r_i log(r_i / p_i)`.
    fn kld_oracle(r: &[f64], p: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..r.len() {
            if r[i] != 0.0 {
                s += r[i] * (r[i] / p[i]).ln();
            }
        }
        s
    }

    fn random_dist(rng: &mut impl Rng, d: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    }

    #[test]
    fn kld_hand_value() {
        let v = kld(&[0.9, 0.1], &[0.5, 0.5]).unwrap();
        let expected = 0.9 * 1.8f64.ln() + 0.1 * 0.2f64.ln();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.3681).abs() < 1e-4);
    }

    #[test]
    fn kld_identity_and_one_hot() {
        let mut rng = seed::rng(1);
        for _ in 0..50 {
            let p = random_dist(&mut rng, 5);
            assert!(kld(&p, &p).unwrap().abs() <= 1e-12);
            let k = rng.random_range(0..5);
            let r = PredictionVector::one_hot(5, k);
            assert_eq!(kld(r.probs(), &p).unwrap(), -p[k].ln());
        }
    }

    #[test]
    fn kld_matches_oracle_and_is_nonnegative() {
        let mut rng = seed::rng(2);
        for _ in 0..100 {
            let d = rng.random_range(2..8);
            let r = random_dist(&mut rng, d);
            let p = random_dist(&mut rng, d);
            let v = kld(&r, &p).unwrap();
            assert!((v - kld_oracle(&r, &p)).abs() < 1e-10);
            assert!(v >= -1e-12);
        }
    }

    #[test]
    fn kld_zero_reference_entries_and_clamping() {
        assert_eq!(kld(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), -(0.5f64.ln()));
        let v = kld(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!(v.is_finite());
        assert!(matches!(kld(&[1.0], &[0.5, 0.5]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let mut rng = seed::rng(3);
        for _ in 0..20 {
            let r = random_dist(&mut rng, 4);
            let z: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p = PredictionVector::from_logits(&z);
            let mut g = vec![0.0; 4];
            kld_logit_grad(&r, p.probs(), &mut g);
            for j in 0..4 {
                let h = 1e-6;
                let mut zp = z.clone();
                zp[j] += h;
                let mut zm = z.clone();
                zm[j] -= h;
                let fp = kld(&r, PredictionVector::from_logits(&zp).probs()).unwrap();
                let fm = kld(&r, PredictionVector::from_logits(&zm).probs()).unwrap();
                assert!((g[j] - (fp - fm) / (2.0 * h)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn prediction_vector_validation() {
        assert!(PredictionVector::new(vec![0.2, 0.8]).is_ok());
        assert!(PredictionVector::new(vec![0.2, 0.7]).is_err());
        assert!(PredictionVector::new(vec![-0.1, 1.1]).is_err());
        assert!(PredictionVector::new(vec![]).is_err());
        let m = PredictionVector::mean(&[
            PredictionVector::one_hot(2, 0),
            PredictionVector::one_hot(2, 1),
        ])
        .unwrap();
        assert_eq!(m.probs(), &[0.5, 0.5]);
        assert_eq!(PredictionVector::new(vec![0.4, 0.4, 0.2]).unwrap().argmax(), 0);
    }

    #[test]
    fn softmax_is_a_distribution() {
        let p = PredictionVector::from_logits(&[1000.0, -1000.0, 3.0]);
        let s: f64 = p.probs().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        let q = PredictionVector::from_logits(&[0.3, -1.2, 2.0, 0.0]);
        assert!(q.probs().iter().all(|&x| x > 0.0 && x < 1.0));
    }
}
