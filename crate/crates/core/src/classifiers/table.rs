use std::collections::HashMap;

use super::Victim;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::nn::PredictionVector;

/// A victim answering from precomputed vectors keyed by exact mesh content.
/// Querying any other mesh is an error, which makes it a strict probe for
/// code that must never touch a victim's internals.
#[derive(Debug, Clone)]
pub struct TableVictim {
    name: String,
    class_names: Vec<String>,
    table: HashMap<u64, PredictionVector>,
}

impl TableVictim {
    pub fn new(name: impl Into<String>, class_names: Vec<String>) -> Self {
        TableVictim {
            name: name.into(),
            class_names,
            table: HashMap::new(),
        }
    }

    pub fn insert(&mut self, mesh: &Mesh, prediction: PredictionVector) -> Result<()> {
        if prediction.len() != self.class_names.len() {
            return Err(Error::dims(self.class_names.len(), prediction.len()));
        }
        self.table.insert(mesh.fingerprint(), prediction);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Victim for TableVictim {
    fn name(&self) -> &str {
        &self.name
    }

    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn query(&self, mesh: &Mesh) -> Result<PredictionVector> {
        self.table.get(&mesh.fingerprint()).cloned().ok_or_else(|| {
            Error::Config(format!("{}: no stored prediction for this mesh", self.name))
        })
    }
}
