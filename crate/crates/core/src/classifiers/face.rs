//! A permutation-invariant per-face classifier: every face is described by
//! its centroid, unit normal and relative area, passed through a shared
//! two-layer perceptron, mean-pooled and read out linearly.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::{decode_names, victim_manifest, Victim};
use crate::error::{Error, Result};
use crate::mesh::{cross, norm, sub, Mesh, Point};
use crate::nn::{
    kld_logit_grad, kld_unchecked, softmax_in_place, tensor_mut, tensor_mut1, tensor_ref,
    tensor_ref1, Checkpoint, Dense, NamedArray, Parameters, PredictionVector, TensorMut,
    TensorRef, CHECKPOINT_VERSION,
};
use crate::seed;

pub const FACE_FEATURES: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct FaceNet {
    pub layer1: Dense,
    pub layer2: Dense,
    pub head: Dense,
}

/// Intermediate activations of one mesh.
pub(crate) struct FaceTrace {
    x: Array2<f64>,
    a1: Array2<f64>,
    a2: Array2<f64>,
    pooled: Array1<f64>,
    pub(crate) probs: Vec<f64>,
}

impl FaceNet {
    pub fn new(hidden: usize, classes: usize, seed_: u64) -> Result<Self> {
        if hidden == 0 || classes == 0 {
            return Err(Error::Config("face network widths must be positive".into()));
        }
        let mut rng = seed::rng(seed_);
        let mut net = FaceNet::zeros(hidden, classes);
        // He-uniform for the ReLU layers, Glorot for the read-out.
        for (d, fan) in [
            (&mut net.layer1, FACE_FEATURES),
            (&mut net.layer2, hidden),
            (&mut net.head, hidden + classes),
        ] {
            let limit = (6.0 / fan as f64).sqrt();
            d.weight.mapv_inplace(|_| rng.random_range(-limit..limit));
        }
        Ok(net)
    }

    pub fn zeros(hidden: usize, classes: usize) -> Self {
        FaceNet {
            layer1: Dense::zeros(hidden, FACE_FEATURES),
            layer2: Dense::zeros(hidden, hidden),
            head: Dense::zeros(classes, hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.layer2.bias.len()
    }

    pub fn classes(&self) -> usize {
        self.head.bias.len()
    }

    /// `F x 7` feature matrix: centroid, unit normal, area times face count
    /// over total area.
    pub fn features(mesh: &Mesh) -> Result<Array2<f64>> {
        let faces = mesh.faces();
        if faces.is_empty() {
            return Err(Error::EmptyMesh("faces"));
        }
        let v = mesh.vertices();
        let mut x = Array2::zeros((faces.len(), FACE_FEATURES));
        let mut areas = Vec::with_capacity(faces.len());
        for (i, f) in faces.iter().enumerate() {
            let (a, b, c): (Point, Point, Point) = (v[f[0]], v[f[1]], v[f[2]]);
            let n = cross(sub(b, a), sub(c, a));
            let len = norm(n);
            for k in 0..3 {
                x[[i, k]] = (a[k] + b[k] + c[k]) / 3.0;
                x[[i, 3 + k]] = if len > 0.0 { n[k] / len } else { 0.0 };
            }
            areas.push(0.5 * len);
        }
        let total: f64 = areas.iter().sum();
        let scale = if total > 0.0 { faces.len() as f64 / total } else { 0.0 };
        for (i, a) in areas.into_iter().enumerate() {
            x[[i, 6]] = a * scale;
        }
        Ok(x)
    }

    pub(crate) fn forward_features(&self, x: Array2<f64>) -> FaceTrace {
        let mut a1 = self.layer1.forward(x.view());
        a1.mapv_inplace(|v| v.max(0.0));
        let mut a2 = self.layer2.forward(a1.view());
        a2.mapv_inplace(|v| v.max(0.0));
        let pooled = a2.mean_axis(Axis(0)).expect("at least one face");
        let mut probs = (self.head.weight.dot(&pooled) + &self.head.bias).to_vec();
        softmax_in_place(&mut probs);
        FaceTrace {
            x,
            a1,
            a2,
            pooled,
            probs,
        }
    }

    pub fn predict(&self, mesh: &Mesh) -> Result<PredictionVector> {
        Ok(PredictionVector::from_probs_unchecked(
            self.forward_features(FaceNet::features(mesh)?).probs,
        ))
    }

    /// Accumulates `scale` times the gradient of `KLD(target, prediction)`
    /// into `grads`; returns the unscaled loss.
    pub(crate) fn accumulate(
        &self,
        trace: &FaceTrace,
        target: &[f64],
        scale: f64,
        grads: &mut FaceNet,
    ) -> f64 {
        let loss = kld_unchecked(target, &trace.probs);
        let mut dl = vec![0.0; target.len()];
        kld_logit_grad(target, &trace.probs, &mut dl);
        let dl = Array1::from(dl) * scale;
        for (i, &g) in dl.iter().enumerate() {
            grads.head.bias[i] += g;
            grads
                .head
                .weight
                .row_mut(i)
                .scaled_add(g, &trace.pooled);
        }
        let dpooled = self.head.weight.t().dot(&dl) / trace.a2.nrows() as f64;
        let mut d2 = Array2::zeros(trace.a2.raw_dim());
        d2 += &dpooled;
        d2.zip_mut_with(&trace.a2, |g, &a| {
            if a <= 0.0 {
                *g = 0.0
            }
        });
        grads.layer2.weight += &d2.t().dot(&trace.a1);
        grads.layer2.bias += &d2.sum_axis(Axis(0));
        let mut d1 = d2.dot(&self.layer2.weight);
        d1.zip_mut_with(&trace.a1, |g, &a| {
            if a <= 0.0 {
                *g = 0.0
            }
        });
        grads.layer1.weight += &d1.t().dot(&trace.x);
        grads.layer1.bias += &d1.sum_axis(Axis(0));
        loss
    }

    fn to_checkpoint(&self, extra: &BTreeMap<String, String>) -> Checkpoint {
        let mut manifest = extra.clone();
        manifest.insert("version".into(), CHECKPOINT_VERSION.to_string());
        manifest.insert("arch".into(), "facenet".into());
        manifest.insert("hidden".into(), self.hidden().to_string());
        manifest.insert("classes".into(), self.classes().to_string());
        Checkpoint {
            manifest,
            tensors: self
                .tensors()
                .into_iter()
                .map(|t| NamedArray {
                    name: t.name,
                    shape: t.shape,
                    data: t.data.to_vec(),
                })
                .collect(),
        }
    }

    fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.get("arch")? != "facenet" {
            return Err(Error::Config("checkpoint does not hold a face network".into()));
        }
        let mut net = FaceNet::zeros(ckpt.parse("hidden")?, ckpt.parse("classes")?);
        ckpt.fill(&mut net)?;
        Ok(net)
    }
}

impl Parameters for FaceNet {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![
            tensor_ref("layer1.weight".into(), &self.layer1.weight),
            tensor_ref1("layer1.bias".into(), &self.layer1.bias),
            tensor_ref("layer2.weight".into(), &self.layer2.weight),
            tensor_ref1("layer2.bias".into(), &self.layer2.bias),
            tensor_ref("head.weight".into(), &self.head.weight),
            tensor_ref1("head.bias".into(), &self.head.bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        vec![
            tensor_mut("layer1.weight".into(), &mut self.layer1.weight),
            tensor_mut1("layer1.bias".into(), &mut self.layer1.bias),
            tensor_mut("layer2.weight".into(), &mut self.layer2.weight),
            tensor_mut1("layer2.bias".into(), &mut self.layer2.bias),
            tensor_mut("head.weight".into(), &mut self.head.weight),
            tensor_mut1("head.bias".into(), &mut self.head.bias),
        ]
    }
}

/// Face-feature victim. Deterministic: a query depends only on the mesh.
#[derive(Debug, Clone)]
pub struct FaceVictim {
    name: String,
    class_names: Vec<String>,
    net: FaceNet,
    seed: u64,
}

impl FaceVictim {
    pub fn new(name: impl Into<String>, class_names: Vec<String>, net: FaceNet, seed: u64) -> Result<Self> {
        if class_names.len() != net.classes() {
            return Err(Error::dims(net.classes(), class_names.len()));
        }
        Ok(FaceVictim {
            name: name.into(),
            class_names,
            net,
            seed,
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut m = victim_manifest("face", &self.name, &self.class_names, self.seed);
        m.insert("loss".into(), "cross-entropy".into());
        self.net.to_checkpoint(&m).save(dir)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        FaceVictim::new(
            ckpt.get("name")?,
            decode_names(ckpt.get("class_names")?),
            FaceNet::from_checkpoint(ckpt)?,
            ckpt.parse("seed")?,
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        FaceVictim::from_checkpoint(&Checkpoint::load(dir)?)
    }
}

impl Victim for FaceVictim {
    fn name(&self) -> &str {
        &self.name
    }

    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn query(&self, mesh: &Mesh) -> Result<PredictionVector> {
        self.net.predict(mesh)
    }
}
