//! Victim classifiers behind a query-only interface, and distillation of
//! an imitating walk network from their prediction vectors.
//!
//! Attack and imitation code only ever sees a [`VictimHandle`]; the
//! concrete victim types keep their parameters private.

mod face;
mod predictions;
mod table;
mod train;
mod walk_victim;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use face::{FaceNet, FaceVictim};
pub use predictions::{load_predictions, parse_predictions, save_predictions, write_predictions};
pub use table::TableVictim;
pub use train::{
    agreement, train_face_victim, train_imitator, train_victim, walk_average, EpochStats,
    Imitator, TrainingLog,
};
pub use walk_victim::WalkVictim;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::nn::{Checkpoint, InputFeatures, NetDims, PredictionVector};

/// A classifier that can only be asked for prediction vectors.
pub trait Victim: Send + Sync {
    fn name(&self) -> &str;
    fn class_names(&self) -> &[String];

    fn num_classes(&self) -> usize {
        self.class_names().len()
    }

    /// Repeated queries on the same mesh return identical vectors.
    fn query(&self, mesh: &Mesh) -> Result<PredictionVector>;
}

/// Shared, opaque query capability for a victim.
#[derive(Clone)]
pub struct VictimHandle(Arc<dyn Victim>);

impl VictimHandle {
    pub fn new<V: Victim + 'static>(victim: V) -> Self {
        VictimHandle(Arc::new(victim))
    }

    pub fn name(&self) -> &str {
        self.0.name()
    }

    pub fn class_names(&self) -> &[String] {
        self.0.class_names()
    }

    pub fn num_classes(&self) -> usize {
        self.0.num_classes()
    }

    pub fn query(&self, mesh: &Mesh) -> Result<PredictionVector> {
        let p = self.0.query(mesh)?;
        if p.len() != self.num_classes() {
            return Err(Error::dims(self.num_classes(), p.len()));
        }
        Ok(p)
    }

    /// Argmax class of [`query`](Self::query).
    pub fn classify(&self, mesh: &Mesh) -> Result<usize> {
        Ok(self.query(mesh)?.argmax())
    }
}

impl fmt::Debug for VictimHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VictimHandle")
            .field("name", &self.name())
            .field("classes", &self.num_classes())
            .finish()
    }
}

/// One prediction vector per mesh, in input order. Meshes are queried in
/// parallel on the current rayon pool.
pub fn query_all<M: AsRef<Mesh> + Sync>(
    victim: &VictimHandle,
    meshes: &[M],
) -> Result<Vec<PredictionVector>> {
    meshes.par_iter().map(|m| victim.query(m.as_ref())).collect()
}

impl AsRef<Mesh> for Mesh {
    fn as_ref(&self) -> &Mesh {
        self
    }
}

impl AsRef<Mesh> for crate::mesh::LabeledMesh {
    fn as_ref(&self) -> &Mesh {
        &self.mesh
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossChoice {
    CrossEntropy,
    Kld,
}

impl LossChoice {
    pub fn name(self) -> &'static str {
        match self {
            LossChoice::CrossEntropy => "cross-entropy",
            LossChoice::Kld => "kld",
        }
    }
}

impl FromStr for LossChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross-entropy" => Ok(LossChoice::CrossEntropy),
            "kld" => Ok(LossChoice::Kld),
            _ => Err(Error::Config(format!("unknown loss {s:?}"))),
        }
    }
}

/// Training hyperparameters shared by the victims and the imitator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub walks_per_mesh: usize,
    pub walk_length: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: LossChoice,
    /// Lift width; `0` disables the lift.
    pub lift: usize,
    pub hidden: usize,
    pub layers: usize,
    pub features: InputFeatures,
    /// Global gradient-norm cap; `0` disables clipping.
    pub clip_norm: f64,
    /// Probability mass spread evenly over all classes in one-hot targets.
    pub label_smoothing: f64,
    /// Standard deviation of Gaussian noise added to training coordinates.
    pub coordinate_noise: f64,
    /// Walks averaged per prediction when a walk network answers a query.
    pub query_walks: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            walks_per_mesh: 4,
            walk_length: 100,
            learning_rate: 1e-3,
            batch_size: 16,
            seed: 0,
            loss: LossChoice::Kld,
            lift: 32,
            hidden: 64,
            layers: 2,
            features: InputFeatures::Coordinates,
            clip_norm: 5.0,
            label_smoothing: 0.0,
            coordinate_noise: 0.0,
            query_walks: 8,
        }
    }
}

impl TrainConfig {
    /// Walk victim defaults: cross-entropy on lightly smoothed labels, so
    /// the victim's vectors stay informative rather than saturating at one.
    pub fn victim_default() -> Self {
        TrainConfig {
            loss: LossChoice::CrossEntropy,
            label_smoothing: 0.1,
            ..TrainConfig::default()
        }
    }

    /// Face victim defaults; walk settings are unused by that family.
    pub fn face_default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 8,
            learning_rate: 3e-3,
            hidden: 32,
            ..TrainConfig::victim_default()
        }
    }

    pub fn dims(&self, classes: usize) -> NetDims {
        NetDims {
            lift: (self.lift > 0).then_some(self.lift),
            hidden: self.hidden,
            layers: self.layers,
            classes,
            features: self.features,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} must be positive")));
        if self.walks_per_mesh == 0 {
            return bad("walks_per_mesh");
        }
        if self.walk_length == 0 {
            return bad("walk_length");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate");
        }
        if self.batch_size == 0 {
            return bad("batch_size");
        }
        if self.hidden == 0 || self.layers == 0 {
            return bad("hidden and layers");
        }
        if self.query_walks == 0 {
            return bad("query_walks");
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Config("label_smoothing must lie in [0, 1)".into()));
        }
        if !(self.coordinate_noise >= 0.0) || !(self.clip_norm >= 0.0) {
            return Err(Error::Config("noise and clip_norm must be non-negative".into()));
        }
        Ok(())
    }
}

/// Loads any victim checkpoint written by [`WalkVictim::save`] or
/// [`FaceVictim::save`].
pub fn load_victim(dir: &Path) -> Result<VictimHandle> {
    let ckpt = Checkpoint::load(dir)?;
    match ckpt.get("victim")? {
        "walk" => Ok(VictimHandle::new(WalkVictim::from_checkpoint(&ckpt)?)),
        "face" => Ok(VictimHandle::new(FaceVictim::from_checkpoint(&ckpt)?)),
        other => Err(Error::Config(format!("unknown victim kind {other:?}"))),
    }
}

pub(crate) fn encode_names(names: &[String]) -> String {
    names.join(",")
}

pub(crate) fn decode_names(s: &str) -> Vec<String> {
    s.split(',').map(str::to_string).collect()
}

pub(crate) fn victim_manifest(
    kind: &str,
    name: &str,
    class_names: &[String],
    seed: u64,
) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("victim".into(), kind.into());
    m.insert("name".into(), name.into());
    m.insert("class_names".into(), encode_names(class_names));
    m.insert("seed".into(), seed.to_string());
    m
}
