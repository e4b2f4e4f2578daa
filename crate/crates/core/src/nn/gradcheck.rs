//! Central finite-difference verification of the analytic gradients.

use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use super::{InputFeatures, LossKind, NetDims, Parameters, PredictionVector, WalkNet};
use crate::error::Result;
use crate::mesh::Point;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Minimum number of entries compared. Every input coordinate is always
    /// included; parameters fill the remainder.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-4,
            abs_tol: 1e-5,
            rel_tol: 1e-3,
            samples: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub failures: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    /// Description of the entry with the largest absolute error.
    pub worst: String,
    pub passed: bool,
}

/// Checks the network's own backward pass with default step and absolute
/// tolerance and the given relative tolerance.
pub fn grad_check(
    net: &WalkNet,
    coords: &[Point],
    loss: &LossKind,
    rel_tol: f64,
) -> Result<GradCheckReport> {
    let trace = net.forward(coords)?;
    let (pg, ig) = net.backward(&trace, loss)?;
    let config = GradCheckConfig {
        rel_tol,
        ..GradCheckConfig::default()
    };
    grad_check_with(net, coords, loss, &config, &pg, &ig)
}

/// Compares externally supplied analytic gradients against finite
/// differences of the network loss.
pub fn grad_check_with(
    net: &WalkNet,
    coords: &[Point],
    loss: &LossKind,
    config: &GradCheckConfig,
    param_grads: &WalkNet,
    input_grads: &[Point],
) -> Result<GradCheckReport> {
    let h = config.step;
    let mut report = GradCheckReport {
        checked: 0,
        failures: 0,
        max_abs_error: 0.0,
        max_rel_error: 0.0,
        worst: String::new(),
        passed: true,
    };
    let mut record = |what: String, analytic: f64, numeric: f64| {
        let abs = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs());
        let rel = if scale > 0.0 { abs / scale } else { 0.0 };
        report.checked += 1;
        if abs > config.abs_tol && rel > config.rel_tol {
            report.failures += 1;
        }
        if abs >= report.max_abs_error {
            report.max_abs_error = abs;
            report.worst = format!("{what}: analytic {analytic:e}, numeric {numeric:e}");
        }
        report.max_rel_error = report.max_rel_error.max(rel);
    };

    let mut c = coords.to_vec();
    for t in 0..coords.len() {
        for k in 0..3 {
            let x = c[t][k];
            c[t][k] = x + h;
            let fp = net.loss(&c, loss)?;
            c[t][k] = x - h;
            let fm = net.loss(&c, loss)?;
            c[t][k] = x;
            record(format!("coord[{t}][{k}]"), input_grads[t][k], (fp - fm) / (2.0 * h));
        }
    }

    let total = net.parameter_count();
    let wanted = config.samples.saturating_sub(coords.len() * 3).min(total);
    let mut rng = seed::rng(config.seed);
    let mut picks = sample(&mut rng, total, wanted).into_vec();
    picks.sort_unstable();
    let analytic = param_grads.flatten();
    let names = entry_names(net);
    let mut probe = net.clone();
    for i in picks {
        let x = get(&probe, i);
        set(&mut probe, i, x + h);
        let fp = probe.loss(coords, loss)?;
        set(&mut probe, i, x - h);
        let fm = probe.loss(coords, loss)?;
        set(&mut probe, i, x);
        record(names(i), analytic[i], (fp - fm) / (2.0 * h));
    }
    report.passed = report.failures == 0;
    Ok(report)
}

/// One network configuration checked under one loss.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckCase {
    pub description: String,
    pub report: GradCheckReport,
}

/// Checks `configs` small random networks (walk length 1 to 6, hidden
/// width up to 16, three classes), cycling through recurrent depth 1 and 2,
/// lift on and off and both input featurizations. Each network is checked
/// under a soft-target KLD loss and a cross-entropy loss, over every input
/// coordinate and every parameter.
pub fn random_suite(configs: usize, seed_: u64) -> Result<Vec<GradCheckCase>> {
    let mut rng = seed::rng(seed_);
    let mut out = Vec::with_capacity(2 * configs);
    for i in 0..configs {
        let features = if (i / 4) % 2 == 0 {
            InputFeatures::Coordinates
        } else {
            InputFeatures::StepDeltas
        };
        let dims = NetDims {
            lift: ((i / 2) % 2 == 0).then(|| rng.random_range(2..=8)),
            hidden: rng.random_range(1..=16),
            layers: 1 + i % 2,
            classes: 3,
            features,
        };
        let mut net = WalkNet::new(dims.clone(), rng.random())?;
        let len = rng.random_range(1..=6);
        let coords: Vec<Point> = (0..len)
            .map(|_| [0; 3].map(|_| rng.random_range(-1.0..1.0)))
            .collect();
        // Finite differences are meaningless across a ReLU kink, and zero
        // biases put zero inputs right on it. Redraw biases until every lift
        // pre-activation is well clear of zero.
        loop {
            for t in net.tensors_mut() {
                if t.name.ends_with(".bias") {
                    for b in t.data.iter_mut() {
                        *b = rng.random_range(-0.5..0.5);
                    }
                }
            }
            if kink_margin(&net, &coords) > KINK_MARGIN {
                break;
            }
        }
        let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let soft = PredictionVector::new(raw.into_iter().map(|x| x / total).collect())?;
        for loss in [LossKind::Kld(soft), LossKind::CrossEntropy(rng.random_range(0..3))] {
            let trace = net.forward(&coords)?;
            let (pg, ig) = net.backward(&trace, &loss)?;
            let cfg = GradCheckConfig {
                samples: usize::MAX,
                seed: rng.random(),
                ..GradCheckConfig::default()
            };
            let report = grad_check_with(&net, &coords, &loss, &cfg, &pg, &ig)?;
            let kind = match loss {
                LossKind::Kld(_) => "kld",
                LossKind::CrossEntropy(_) => "cross-entropy",
            };
            out.push(GradCheckCase {
                description: format!(
                    "layers={} hidden={} lift={} features={} length={len} loss={kind}",
                    dims.layers,
                    dims.hidden,
                    dims.lift.map_or("none".to_string(), |l| l.to_string()),
                    dims.features,
                ),
                report,
            });
        }
    }
    Ok(out)
}

const KINK_MARGIN: f64 = 1e-2;

/// Smallest absolute lift pre-activation over the walk.
fn kink_margin(net: &WalkNet, coords: &[Point]) -> f64 {
    let mut x = net.features(&[coords], coords.len());
    let mut margin = f64::INFINITY;
    for d in &net.lift {
        let pre = d.forward(x.view());
        margin = pre.iter().fold(margin, |m, v| m.min(v.abs()));
        x = pre.mapv(|v| v.max(0.0));
    }
    margin
}

fn locate(net: &WalkNet, mut i: usize) -> (usize, usize) {
    for (k, t) in net.tensors().iter().enumerate() {
        if i < t.data.len() {
            return (k, i);
        }
        i -= t.data.len();
    }
    panic!("parameter index out of range");
}

fn get(net: &WalkNet, i: usize) -> f64 {
    let (k, j) = locate(net, i);
    net.tensors()[k].data[j]
}

fn set(net: &mut WalkNet, i: usize, v: f64) {
    let (k, j) = locate(net, i);
    net.tensors_mut()[k].data[j] = v;
}

fn entry_names(net: &WalkNet) -> impl Fn(usize) -> String + '_ {
    move |i| {
        let (k, j) = locate(net, i);
        format!("{}[{j}]", net.tensors()[k].name)
    }
}
