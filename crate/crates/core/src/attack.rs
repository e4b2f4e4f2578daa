//! The walk-driven attack: repeatedly draw a walk on the current mesh, ask
//! the imitator about it, and nudge the walked vertices along the imitator's
//! coordinate gradient until the imitator is fooled on several consecutive
//! walks.

use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::mesh::{LabeledMesh, Mesh, Point};
use crate::nn::{argmax, kld_unchecked, PredictionVector, WalkNet};
use crate::seed;
use crate::walk::{default_walk_length, Walker};

/// How far the entry mesh may stray from the unit sphere.
pub const RADIUS_TOLERANCE: f64 = 0.05;

/// Recorded in run metadata so the sign of the update is never ambiguous.
pub const SIGN_CONVENTION: &str =
    "untargeted: +alpha * d KLD(pred, onehot(source)) / dx; targeted: -alpha * d KLD(pred, onehot(target)) / dx";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub alpha: f64,
    pub max_iterations: usize,
    /// `None` uses `min(200, |V|)`.
    pub walk_length: Option<usize>,
    /// Consecutive fooled walks needed to stop.
    pub stop_k: usize,
    pub seed: u64,
    /// Switches to the targeted variant.
    pub target: Option<usize>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            alpha: 0.01,
            max_iterations: 1000,
            walk_length: None,
            stop_k: 3,
            seed: 0,
            target: None,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be finite and non-negative, got {}", self.alpha)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.stop_k == 0 {
            return Err(Error::Config("stop_k must be at least 1".into()));
        }
        if self.walk_length == Some(0) {
            return Err(Error::Config("walk_length must be at least 1".into()));
        }
        Ok(())
    }
}

/// One line of the attack run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub predicted: usize,
    pub kld: f64,
    pub start_vertex: usize,
    pub counter: usize,
    /// Whether this iteration moved any vertex.
    pub updated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub attacked_mesh: Mesh,
    pub success: bool,
    pub iterations_used: usize,
    /// Attacked minus original position, per vertex.
    pub displacement: Vec<Point>,
    pub final_prediction: PredictionVector,
    /// KLD against the objective's one-hot vector, per iteration.
    pub loss_trace: Vec<f64>,
    pub log: Vec<IterationRecord>,
}

impl AttackResult {
    pub fn updates(&self) -> usize {
        self.log.iter().filter(|r| r.updated).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Objective {
    AwayFrom(usize),
    Toward(usize),
}

/// Untargeted attack against `label`, or the targeted variant when
/// `config.target` is set.
pub fn attack(
    mesh: &Mesh,
    label: usize,
    imitator: &WalkNet,
    config: &AttackConfig,
) -> Result<AttackResult> {
    match config.target {
        Some(t) => run(mesh, Objective::Toward(t), imitator, config),
        None => run(mesh, Objective::AwayFrom(label), imitator, config),
    }
}

/// Drives the imitator's prediction toward `target`.
pub fn targeted_attack(
    mesh: &Mesh,
    target: usize,
    imitator: &WalkNet,
    config: &AttackConfig,
) -> Result<AttackResult> {
    run(mesh, Objective::Toward(target), imitator, config)
}

fn run(mesh: &Mesh, objective: Objective, net: &WalkNet, config: &AttackConfig) -> Result<AttackResult> {
    config.validate()?;
    let d = net.classes();
    let class = match objective {
        Objective::AwayFrom(c) | Objective::Toward(c) => c,
    };
    if class >= d {
        return Err(Error::dims(format!("class < {d}"), class));
    }
    if mesh.vertex_count() == 0 {
        return Err(Error::EmptyMesh("vertices"));
    }
    let radius = mesh.max_radius();
    if (radius - 1.0).abs() > RADIUS_TOLERANCE {
        return Err(Error::NotNormalized { radius });
    }
    let length = config.walk_length.unwrap_or_else(|| default_walk_length(mesh));
    let reference = PredictionVector::one_hot(d, class).into_inner();
    let sign = match objective {
        Objective::AwayFrom(_) => 1.0,
        Objective::Toward(_) => -1.0,
    };

    let mut current = mesh.clone();
    let mut rng = seed::rng(config.seed);
    let mut walker = Walker::new();
    let mut counter = 0;
    let mut success = false;
    let mut loss_trace = Vec::new();
    let mut log = Vec::new();
    let mut final_prediction = PredictionVector::uniform(d);
    let mut grad_sum = vec![[0.0; 3]; mesh.vertex_count()];
    let mut in_walk = vec![false; mesh.vertex_count()];
    let mut touched = Vec::new();

    for iteration in 0..config.max_iterations {
        let walk = walker.extract(&current, length, &mut rng)?;
        let trace = net.forward(&walk.coords)?;
        let probs = trace.probs.row(0);
        let probs = probs.as_slice().expect("standard layout");
        let predicted = argmax(probs);
        let kld = kld_unchecked(&reference, probs);
        let satisfied = match objective {
            Objective::AwayFrom(c) => predicted != c,
            Objective::Toward(c) => predicted == c,
        };
        counter = if satisfied { counter + 1 } else { 0 };
        final_prediction = trace.prediction(0);
        loss_trace.push(kld);

        let mut updated = false;
        if counter >= config.stop_k {
            success = true;
        } else if !satisfied && config.alpha > 0.0 {
            let out = net.backward_batch(&trace, &[&reference], 1.0, false)?;
            for (&v, g) in walk.vertices.iter().zip(&out.input_grads[0]) {
                if !in_walk[v] {
                    in_walk[v] = true;
                    touched.push(v);
                }
                for k in 0..3 {
                    grad_sum[v][k] += g[k];
                }
            }
            let verts = current.vertices_mut();
            for &v in &touched {
                for k in 0..3 {
                    verts[v][k] += sign * config.alpha * grad_sum[v][k];
                }
                grad_sum[v] = [0.0; 3];
                in_walk[v] = false;
            }
            touched.clear();
            updated = true;
        }
        log.push(IterationRecord {
            iteration,
            predicted,
            kld,
            start_vertex: walk.start(),
            counter,
            updated,
        });
        if success {
            break;
        }
    }

    let displacement = current
        .vertices()
        .iter()
        .zip(mesh.vertices())
        .map(|(a, o)| [a[0] - o[0], a[1] - o[1], a[2] - o[2]])
        .collect();
    Ok(AttackResult {
        attacked_mesh: current,
        success,
        iterations_used: log.len(),
        displacement,
        final_prediction,
        loss_trace,
        log,
    })
}

/// Attacks every mesh against its own label (or `config.target`), in
/// parallel. Mesh `i` uses a seed derived from `config.seed` and `i`.
pub fn attack_all(
    meshes: &[LabeledMesh],
    imitator: &WalkNet,
    config: &AttackConfig,
) -> Result<Vec<AttackResult>> {
    config.validate()?;
    meshes
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let cfg = AttackConfig {
                seed: seed::derive_index(config.seed, "mesh", i as u64),
                ..config.clone()
            };
            attack(&m.mesh, m.label, imitator, &cfg)
        })
        .collect()
}

/// Writes one JSON object per iteration.
pub fn write_run_log(records: &[IterationRecord], w: &mut dyn Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_run_log(records: &[IterationRecord], path: &Path) -> Result<()> {
    write_atomic(path, |w| write_run_log(records, w))
}

/// Moves a uniformly chosen `floor(fraction * |V|)` vertices by isotropic
/// Gaussian offsets, rescaled so the mean displacement over all vertices
/// equals `magnitude`.
pub fn random_perturbation<R: Rng + ?Sized>(
    mesh: &Mesh,
    fraction: f64,
    magnitude: f64,
    rng: &mut R,
) -> Result<Mesh> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("fraction {fraction} outside [0, 1]")));
    }
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(Error::Config(format!("magnitude {magnitude} must be non-negative")));
    }
    let n = mesh.vertex_count();
    let count = (fraction * n as f64).floor() as usize;
    if count == 0 || magnitude == 0.0 {
        return Ok(mesh.clone());
    }
    let chosen = sample(rng, n, count).into_vec();
    let offsets: Vec<Point> = (0..count)
        .map(|_| [0; 3].map(|_| rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let total: f64 = offsets.iter().map(|o| crate::mesh::norm(*o)).sum();
    let scale = magnitude * n as f64 / total;
    let mut vertices = mesh.vertices().to_vec();
    for (&v, o) in chosen.iter().zip(&offsets) {
        for k in 0..3 {
            vertices[v][k] += scale * o[k];
        }
    }
    mesh.with_vertices(vertices)
}
