//! Procedurally generated, labeled mesh classification data.
//!
//! Each class is one primitive family. Intra-class variation comes from an
//! anisotropic scale and per-vertex Gaussian jitter; every mesh is then
//! normalized to the unit sphere.

pub mod primitives;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::mesh::{load_mesh, save_mesh, LabeledMesh, Mesh, MeshFormat};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Sphere,
    Cube,
    Cylinder,
    Torus,
    Cone,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Sphere,
        Family::Cube,
        Family::Cylinder,
        Family::Torus,
        Family::Cone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Sphere => "sphere",
            Family::Cube => "cube",
            Family::Cylinder => "cylinder",
            Family::Torus => "torus",
            Family::Cone => "cone",
        }
    }

    /// Resolution giving 150 to 400 vertices.
    pub fn default_resolution(self) -> u32 {
        match self {
            Family::Sphere => 2,
            Family::Cube => 6,
            Family::Cylinder | Family::Torus | Family::Cone => 5,
        }
    }

    /// The unscaled, unjittered primitive at a given resolution.
    ///
    /// Resolution means: subdivision level (sphere), quads per cube edge,
    /// `4r x 2r` grid (torus), `4r` segments with `2r` height steps and
    /// `r/2` cap rings (cylinder, cone).
    pub fn base_mesh(self, resolution: u32) -> primitives::RawMesh {
        let r = resolution as usize;
        match self {
            Family::Sphere => primitives::icosphere(resolution),
            Family::Cube => primitives::cube(r),
            Family::Torus => primitives::torus(4 * r, 2 * r, 1.0, 0.4),
            Family::Cylinder => primitives::cylinder(4 * r, 2 * r, (r / 2).max(1)),
            Family::Cone => primitives::cone(4 * r, 2 * r, (r / 2).max(1)),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidSpec(format!("unknown shape family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub class_id: usize,
    pub family: Family,
    pub resolution: u32,
    /// Standard deviation of per-coordinate Gaussian noise, applied before
    /// normalization.
    pub jitter: f64,
    pub anisotropic_scale: [f64; 3],
    pub seed: u64,
}

pub const SCALE_RANGE: (f64, f64) = (0.6, 1.4);
pub const DEFAULT_JITTER: f64 = 0.01;

impl ShapeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 1 {
            return Err(Error::InvalidSpec("resolution must be at least 1".into()));
        }
        // Unbounded resolutions blow up memory long before they are useful.
        let cap = match self.family {
            Family::Sphere => 6,
            _ => 64,
        };
        if self.resolution > cap {
            return Err(Error::InvalidSpec(format!(
                "resolution {} exceeds {cap} for {}",
                self.resolution, self.family
            )));
        }
        if !(self.jitter >= 0.0) || !self.jitter.is_finite() {
            return Err(Error::InvalidSpec(format!("jitter {} must be >= 0", self.jitter)));
        }
        for s in self.anisotropic_scale {
            if !(SCALE_RANGE.0..=SCALE_RANGE.1).contains(&s) {
                return Err(Error::InvalidSpec(format!(
                    "scale factor {s} outside [{}, {}]",
                    SCALE_RANGE.0, SCALE_RANGE.1
                )));
            }
        }
        Ok(())
    }
}

/// Builds the mesh described by `spec`: primitive, anisotropic scale, jitter,
/// unit-sphere normalization.
pub fn generate_shape(spec: &ShapeSpec) -> Result<Mesh> {
    spec.validate()?;
    let (mut vertices, faces) = spec.family.base_mesh(spec.resolution);
    let mut rng = seed::rng(spec.seed);
    let noise = Normal::new(0.0, spec.jitter).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    for v in &mut vertices {
        for k in 0..3 {
            v[k] *= spec.anisotropic_scale[k];
            if spec.jitter > 0.0 {
                v[k] += noise.sample(&mut rng);
            }
        }
    }
    Mesh::new(vertices, faces)?.normalize_unit_sphere()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<LabeledMesh>,
    pub test: Vec<LabeledMesh>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn split(&self, split: Split) -> &[LabeledMesh] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.num_classes();
        for m in self.train.iter().chain(&self.test) {
            if m.label >= d {
                return Err(Error::InvalidSpec(format!(
                    "{} has label {} but only {d} classes",
                    m.source_id, m.label
                )));
            }
        }
        let train_ids: std::collections::HashSet<&str> =
            self.train.iter().map(|m| m.source_id.as_str()).collect();
        if let Some(dup) = self.test.iter().find(|m| train_ids.contains(m.source_id.as_str())) {
            return Err(Error::InvalidSpec(format!(
                "{} is in both splits",
                dup.source_id
            )));
        }
        Ok(())
    }
}

/// Generation parameters for a whole dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub families: Vec<Family>,
    pub per_class: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub jitter: f64,
    /// Per-family resolution override; `None` uses each family's default.
    pub resolution: Option<u32>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            families: Family::ALL.to_vec(),
            per_class: 40,
            train_fraction: 0.8,
            seed: 0,
            jitter: DEFAULT_JITTER,
            resolution: None,
        }
    }
}

impl DatasetSpec {
    pub fn train_count(&self) -> usize {
        (self.train_fraction * self.per_class as f64).ceil() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::InvalidSpec("no families".into()));
        }
        for (i, f) in self.families.iter().enumerate() {
            if self.families[..i].contains(f) {
                return Err(Error::InvalidSpec(format!("family {f} listed twice")));
            }
        }
        if self.per_class < 2 {
            return Err(Error::InvalidSpec(format!(
                "per_class = {} cannot be split",
                self.per_class
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "train_fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// The shape spec for mesh `index` of `class_id`, derived only from the
    /// dataset seed.
    pub fn shape_spec(&self, class_id: usize, index: usize) -> ShapeSpec {
        let family = self.families[class_id];
        let mesh_seed = seed::derive_index(self.seed, family.name(), index as u64);
        let mut rng = seed::rng(seed::derive(mesh_seed, "scale"));
        let anisotropic_scale = [0; 3].map(|_| rng.random_range(SCALE_RANGE.0..=SCALE_RANGE.1));
        ShapeSpec {
            class_id,
            family,
            resolution: self.resolution.unwrap_or_else(|| family.default_resolution()),
            jitter: self.jitter,
            anisotropic_scale,
            seed: mesh_seed,
        }
    }
}

pub fn source_id(family: Family, index: usize) -> String {
    format!("{}_{index:03}", family.name())
}

/// Generates `per_class` meshes per family; the first
/// `ceil(train_fraction * per_class)` of each class go to the train split.
pub fn make_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let n_train = spec.train_count();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class_id, &family) in spec.families.iter().enumerate() {
        for index in 0..spec.per_class {
            let shape = spec.shape_spec(class_id, index);
            let lm = LabeledMesh {
                mesh: generate_shape(&shape)?,
                label: class_id,
                source_id: source_id(family, index),
            };
            if index < n_train {
                train.push(lm);
            } else {
                test.push(lm);
            }
        }
    }
    let ds = Dataset {
        train,
        test,
        class_names: spec.families.iter().map(|f| f.name().to_string()).collect(),
    };
    ds.validate()?;
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source_id: String,
    pub label: usize,
    pub split: Split,
    /// Path relative to the dataset root.
    pub path: String,
}

/// Index file written at the root of a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub class_names: Vec<String>,
    pub spec: Option<DatasetSpec>,
    pub train_count: usize,
    pub test_count: usize,
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `<root>/<class>/<split>/<source_id>.off` plus `manifest.json`.
pub fn save_dataset(ds: &Dataset, spec: Option<&DatasetSpec>, root: &Path) -> Result<()> {
    let mut entries = Vec::new();
    for (split, items) in [(Split::Train, &ds.train), (Split::Test, &ds.test)] {
        for lm in items {
            let rel = PathBuf::from(&ds.class_names[lm.label])
                .join(split.name())
                .join(format!("{}.off", lm.source_id));
            save_mesh(&lm.mesh, &root.join(&rel), MeshFormat::Off)?;
            entries.push(ManifestEntry {
                source_id: lm.source_id.clone(),
                label: lm.label,
                split,
                path: rel.to_string_lossy().into_owned(),
            });
        }
    }
    let manifest = DatasetManifest {
        class_names: ds.class_names.clone(),
        spec: spec.cloned(),
        train_count: ds.train.len(),
        test_count: ds.test.len(),
        entries,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(e.to_string()))?;
    fsutil::write_string_atomic(&root.join(MANIFEST_FILE), &(json + "\n"))
}

pub fn load_manifest(root: &Path) -> Result<DatasetManifest> {
    let path = root.join(MANIFEST_FILE);
    let text = fsutil::read_to_string(&path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let manifest = load_manifest(root)?;
    let mut ds = Dataset {
        train: Vec::new(),
        test: Vec::new(),
        class_names: manifest.class_names.clone(),
    };
    for e in &manifest.entries {
        let path = root.join(&e.path);
        let format = MeshFormat::from_path(&path).unwrap_or(MeshFormat::Off);
        let lm = LabeledMesh {
            mesh: load_mesh(&path, format)?,
            label: e.label,
            source_id: e.source_id.clone(),
        };
        match e.split {
            Split::Train => ds.train.push(lm),
            Split::Test => ds.test.push(lm),
        }
    }
    ds.validate()?;
    Ok(ds)
}
