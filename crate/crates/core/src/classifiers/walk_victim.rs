use std::path::Path;

use super::{decode_names, train::walk_average, victim_manifest, Victim};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::nn::{Checkpoint, PredictionVector, WalkNet};

/// A walk network classifier answering with the mean softmax over a fixed
/// number of walks. The walk seed mixes the victim seed with the mesh
/// connectivity, so a mesh keeps its walks while its vertices move.
#[derive(Debug, Clone)]
pub struct WalkVictim {
    name: String,
    class_names: Vec<String>,
    net: WalkNet,
    walks: usize,
    walk_length: usize,
    seed: u64,
}

impl WalkVictim {
    pub fn new(
        name: impl Into<String>,
        class_names: Vec<String>,
        net: WalkNet,
        walks: usize,
        walk_length: usize,
        seed: u64,
    ) -> Result<Self> {
        if class_names.len() != net.classes() {
            return Err(Error::dims(net.classes(), class_names.len()));
        }
        if walks == 0 || walk_length == 0 {
            return Err(Error::Config("victim walks and walk length must be positive".into()));
        }
        Ok(WalkVictim {
            name: name.into(),
            class_names,
            net,
            walks,
            walk_length,
            seed,
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn walks(&self) -> usize {
        self.walks
    }

    pub fn walk_length(&self) -> usize {
        self.walk_length
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut m = victim_manifest("walk", &self.name, &self.class_names, self.seed);
        m.insert("query_walks".into(), self.walks.to_string());
        m.insert("walk_length".into(), self.walk_length.to_string());
        m.insert("loss".into(), "cross-entropy".into());
        self.net.to_checkpoint(&m).save(dir)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        WalkVictim::new(
            ckpt.get("name")?,
            decode_names(ckpt.get("class_names")?),
            WalkNet::from_checkpoint(ckpt)?,
            ckpt.parse("query_walks")?,
            ckpt.parse("walk_length")?,
            ckpt.parse("seed")?,
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        WalkVictim::from_checkpoint(&Checkpoint::load(dir)?)
    }
}

impl Victim for WalkVictim {
    fn name(&self) -> &str {
        &self.name
    }

    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn query(&self, mesh: &Mesh) -> Result<PredictionVector> {
        walk_average(&self.net, mesh, self.walks, self.walk_length, self.seed)
    }
}
