use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use super::face::FaceNet;
use super::{FaceVictim, LossChoice, TrainConfig, Victim, VictimHandle, WalkVictim};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::nn::{
    clip_global_norm, kld_unchecked, Adam, Checkpoint, Parameters, PredictionVector, WalkNet,
};
use crate::seed;
use crate::synth::Dataset;
use crate::walk::{walk_batch, Walker};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch's samples.
    pub loss: f64,
    /// Fraction of samples whose argmax matched the target's argmax.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
    /// Mean loss on a fixed probe set before and after training, when
    /// measured.
    pub probe_before: Option<f64>,
    pub probe_after: Option<f64>,
}

impl TrainingLog {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,accuracy\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{:.9e},{:.6}\n", e.epoch, e.loss, e.accuracy));
        }
        s
    }
}

/// Mean softmax of `net` over `walks` walks of `length` steps. The walks
/// depend only on `seed` and the mesh connectivity.
pub fn walk_average(
    net: &WalkNet,
    mesh: &Mesh,
    walks: usize,
    length: usize,
    seed: u64,
) -> Result<PredictionVector> {
    let mut rng = seed::rng(seed::mix(seed ^ mesh.topology_hash()));
    let ws = walk_batch(mesh, walks, length, &mut rng)?;
    let coords: Vec<&[Point]> = ws.iter().map(|w| w.coords.as_slice()).collect();
    let trace = net.forward_batch(&coords)?;
    let mean = trace.probs.mean_axis(ndarray::Axis(0)).ok_or(Error::EmptyInput("walks"))?;
    Ok(PredictionVector::from_probs_unchecked(mean.to_vec()))
}

fn smoothed_one_hot(classes: usize, label: usize, smoothing: f64) -> Vec<f64> {
    let mut t = vec![smoothing / classes as f64; classes];
    t[label] += 1.0 - smoothing;
    t
}

/// Mini-batch Adam on `mean KLD(target, prediction)` over random walks.
fn fit_walk_net(
    net: &mut WalkNet,
    meshes: &[&Mesh],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<TrainingLog> {
    let mut opt = Adam::new(cfg.learning_rate);
    let noise = (cfg.coordinate_noise > 0.0)
        .then(|| Normal::new(0.0, cfg.coordinate_noise).expect("finite noise scale"));
    let mut walker = Walker::new();
    let mut log = TrainingLog::default();
    let per_mesh = cfg.walks_per_mesh;

    for epoch in 0..cfg.epochs {
        let mut items: Vec<usize> = (0..meshes.len() * per_mesh).collect();
        items.shuffle(&mut seed::rng(seed::derive_index(cfg.seed, "shuffle", epoch as u64)));
        let epoch_seed = seed::derive_index(cfg.seed, "walks", epoch as u64);
        let (mut loss_sum, mut hits) = (0.0, 0usize);

        for batch in items.chunks(cfg.batch_size) {
            let mut coords = Vec::with_capacity(batch.len());
            for &item in batch {
                let mut rng = seed::rng(seed::derive_index(epoch_seed, "item", item as u64));
                let mut c = walker
                    .extract(meshes[item / per_mesh], cfg.walk_length, &mut rng)?
                    .coords;
                if let Some(n) = &noise {
                    for x in c.iter_mut().flatten() {
                        *x += n.sample(&mut rng);
                    }
                }
                coords.push(c);
            }
            let refs: Vec<&[Point]> = coords.iter().map(Vec::as_slice).collect();
            let trace = net.forward_batch(&refs)?;
            let trefs: Vec<&[f64]> = batch.iter().map(|&i| targets[i / per_mesh].as_slice()).collect();
            let out = net.backward_batch(&trace, &trefs, 1.0, true)?;
            let mut grads = out.param_grads.expect("requested");
            if cfg.clip_norm > 0.0 {
                clip_global_norm(&mut grads, cfg.clip_norm);
            }
            opt.step(net, &grads);
            loss_sum += out.loss * batch.len() as f64;
            for (b, t) in trefs.iter().enumerate() {
                let row = trace.probs.row(b);
                if crate::nn::argmax(row.as_slice().expect("standard layout")) == crate::nn::argmax(t) {
                    hits += 1;
                }
            }
        }
        if !net.is_finite() {
            return Err(Error::NonConvergence(format!("non-finite parameters in epoch {epoch}")));
        }
        log.epochs.push(EpochStats {
            epoch,
            loss: loss_sum / items.len() as f64,
            accuracy: hits as f64 / items.len() as f64,
        });
    }
    Ok(log)
}

fn check_train_inputs(dataset: &Dataset, config: &TrainConfig, loss: LossChoice) -> Result<()> {
    config.validate()?;
    if config.loss != loss {
        return Err(Error::Config(format!(
            "this trainer needs loss = {}, got {}",
            loss.name(),
            config.loss.name()
        )));
    }
    if dataset.train.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    dataset.validate()
}

fn require_accuracy(victim: &dyn Victim, dataset: &Dataset, config: &TrainConfig) -> Result<()> {
    if config.epochs == 0 {
        return Ok(());
    }
    let correct = dataset
        .train
        .par_iter()
        .map(|m| victim.query(&m.mesh).map(|p| (p.argmax() == m.label) as usize))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    let acc = correct as f64 / dataset.train.len() as f64;
    if acc < 0.6 {
        return Err(Error::NonConvergence(format!(
            "{} reached only {:.1}% train accuracy",
            victim.name(),
            acc * 100.0
        )));
    }
    Ok(())
}

/// Trains the walk-network victim on (optionally smoothed) one-hot labels.
pub fn train_victim(dataset: &Dataset, config: &TrainConfig) -> Result<(WalkVictim, TrainingLog)> {
    check_train_inputs(dataset, config, LossChoice::CrossEntropy)?;
    let d = dataset.num_classes();
    let mut net = WalkNet::new(config.dims(d), seed::derive(config.seed, "init"))?;
    let meshes: Vec<&Mesh> = dataset.train.iter().map(|m| &m.mesh).collect();
    let targets: Vec<Vec<f64>> = dataset
        .train
        .iter()
        .map(|m| smoothed_one_hot(d, m.label, config.label_smoothing))
        .collect();
    let log = fit_walk_net(&mut net, &meshes, &targets, config)?;
    let victim = WalkVictim::new(
        "walk-victim",
        dataset.class_names.clone(),
        net,
        config.query_walks,
        config.walk_length,
        seed::derive(config.seed, "query"),
    )?;
    require_accuracy(&victim, dataset, config)?;
    Ok((victim, log))
}

/// Trains the face-feature victim on (optionally smoothed) one-hot labels. `hidden` sets the
/// perceptron width and `batch_size` counts meshes per step; walk settings
/// are ignored.
pub fn train_face_victim(
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<(FaceVictim, TrainingLog)> {
    check_train_inputs(dataset, config, LossChoice::CrossEntropy)?;
    let d = dataset.num_classes();
    let mut net = FaceNet::new(config.hidden, d, seed::derive(config.seed, "init"))?;
    let noise = (config.coordinate_noise > 0.0)
        .then(|| Normal::new(0.0, config.coordinate_noise).expect("finite noise scale"));
    let clean: Vec<_> = dataset
        .train
        .iter()
        .map(|m| FaceNet::features(&m.mesh))
        .collect::<Result<_>>()?;
    let mut opt = Adam::new(config.learning_rate);
    let mut log = TrainingLog::default();
    let n = dataset.train.len();

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::rng(seed::derive_index(config.seed, "shuffle", epoch as u64)));
        let epoch_seed = seed::derive_index(config.seed, "noise", epoch as u64);
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let mut grads = FaceNet::zeros(net.hidden(), d);
            for &i in batch {
                let m = &dataset.train[i];
                let x = match &noise {
                    None => clean[i].clone(),
                    Some(dist) => {
                        let mut rng = seed::rng(seed::derive_index(epoch_seed, "mesh", i as u64));
                        let mut v = m.mesh.vertices().to_vec();
                        for x in v.iter_mut().flatten() {
                            *x += dist.sample(&mut rng);
                        }
                        FaceNet::features(&m.mesh.with_vertices(v)?)?
                    }
                };
                let trace = net.forward_features(x);
                let target = smoothed_one_hot(d, m.label, config.label_smoothing);
                loss_sum += net.accumulate(&trace, &target, 1.0 / batch.len() as f64, &mut grads);
                if crate::nn::argmax(&trace.probs) == m.label {
                    hits += 1;
                }
            }
            if config.clip_norm > 0.0 {
                clip_global_norm(&mut grads, config.clip_norm);
            }
            opt.step(&mut net, &grads);
        }
        if !net.is_finite() {
            return Err(Error::NonConvergence(format!("non-finite parameters in epoch {epoch}")));
        }
        log.epochs.push(EpochStats {
            epoch,
            loss: loss_sum / n as f64,
            accuracy: hits as f64 / n as f64,
        });
    }
    let victim = FaceVictim::new(
        "face-victim",
        dataset.class_names.clone(),
        net,
        config.seed,
    )?;
    require_accuracy(&victim, dataset, config)?;
    Ok((victim, log))
}

/// A walk network distilled from a victim's prediction vectors, with the
/// name of the victim it imitates.
#[derive(Debug, Clone, PartialEq)]
pub struct Imitator {
    pub net: WalkNet,
    pub imitates: String,
    pub walk_length: usize,
    pub query_walks: usize,
    /// Seed of the walks used by [`predict`](Self::predict).
    pub seed: u64,
}

impl Imitator {
    pub fn classes(&self) -> usize {
        self.net.classes()
    }

    /// Walk-averaged prediction, drawn the same way a walk victim draws its
    /// query walks.
    pub fn predict(&self, mesh: &Mesh) -> Result<PredictionVector> {
        walk_average(&self.net, mesh, self.query_walks, self.walk_length, self.seed)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut m = BTreeMap::new();
        m.insert("imitates".into(), self.imitates.clone());
        m.insert("walk_length".into(), self.walk_length.to_string());
        m.insert("query_walks".into(), self.query_walks.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("loss".into(), "kld".into());
        self.net.to_checkpoint(&m).save(dir)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let ckpt = Checkpoint::load(dir)?;
        let imitates = ckpt
            .get("imitates")
            .map_err(|_| Error::Config(format!("{} has no pairing metadata", dir.display())))?;
        Ok(Imitator {
            net: WalkNet::from_checkpoint(&ckpt)?,
            imitates: imitates.to_string(),
            walk_length: ckpt.parse("walk_length")?,
            query_walks: ckpt.parse("query_walks")?,
            seed: ckpt.parse("seed")?,
        })
    }
}

fn probe_loss(net: &WalkNet, meshes: &[&Mesh], targets: &[Vec<f64>], cfg: &TrainConfig) -> Result<f64> {
    let mut walker = Walker::new();
    let mut total = 0.0;
    for (i, (m, t)) in meshes.iter().zip(targets).enumerate() {
        let mut rng = seed::rng(seed::derive_index(cfg.seed, "probe", i as u64));
        let w = walker.extract(m, cfg.walk_length, &mut rng)?;
        let trace = net.forward(&w.coords)?;
        total += kld_unchecked(t, trace.probs.row(0).as_slice().expect("standard layout"));
    }
    Ok(total / meshes.len() as f64)
}

/// Distills an imitator from `targets`, the victim's vectors for the train
/// split in order.
///
/// Fails with `NonConvergence` when the mean KLD on a fixed probe set does
/// not fall below half its initial value (or below 1e-3).
pub fn train_imitator(
    dataset: &Dataset,
    targets: &[PredictionVector],
    config: &TrainConfig,
    imitates: &str,
) -> Result<(Imitator, TrainingLog)> {
    check_train_inputs(dataset, config, LossChoice::Kld)?;
    if targets.len() != dataset.train.len() {
        return Err(Error::dims(
            format!("{} targets", dataset.train.len()),
            targets.len(),
        ));
    }
    let d = dataset.num_classes();
    if let Some(t) = targets.iter().find(|t| t.len() != d) {
        return Err(Error::dims(d, t.len()));
    }
    let mut net = WalkNet::new(config.dims(d), seed::derive(config.seed, "init"))?;
    let meshes: Vec<&Mesh> = dataset.train.iter().map(|m| &m.mesh).collect();
    let tv: Vec<Vec<f64>> = targets.iter().map(|t| t.probs().to_vec()).collect();
    let before = probe_loss(&net, &meshes, &tv, config)?;
    let mut log = fit_walk_net(&mut net, &meshes, &tv, config)?;
    let after = probe_loss(&net, &meshes, &tv, config)?;
    log.probe_before = Some(before);
    log.probe_after = Some(after);
    if config.epochs > 0 && after >= 0.5 * before && after >= 1e-3 {
        return Err(Error::NonConvergence(format!(
            "probe KLD went from {before:.4} to {after:.4}"
        )));
    }
    let imitator = Imitator {
        net,
        imitates: imitates.to_string(),
        walk_length: config.walk_length,
        query_walks: config.query_walks,
        seed: seed::derive(config.seed, "query"),
    };
    Ok((imitator, log))
}

/// Fraction of meshes on which the imitator's walk-averaged argmax (over
/// `walks` walks) equals the victim's argmax.
pub fn agreement<M: AsRef<Mesh> + Sync>(
    imitator: &Imitator,
    victim: &VictimHandle,
    meshes: &[M],
    walks: usize,
) -> Result<f64> {
    if meshes.is_empty() {
        return Err(Error::EmptyInput("meshes"));
    }
    let probe = Imitator {
        query_walks: walks,
        ..imitator.clone()
    };
    let same = meshes
        .par_iter()
        .map(|m| {
            let m = m.as_ref();
            Ok((probe.predict(m)?.argmax() == victim.classify(m)?) as usize)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(same.iter().sum::<usize>() as f64 / meshes.len() as f64)
}
