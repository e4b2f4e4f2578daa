//! End-to-end acceptance run. Trains the walk and face victims and their
//! imitators once on the default desk dataset, then checks every criterion
//! and prints one PASS/FAIL line per criterion. Exits nonzero on any FAIL.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use walkattack::attack::{attack, attack_all, random_perturbation, AttackConfig, AttackResult};
use walkattack::classifiers::{
    agreement, query_all, train_face_victim, train_imitator, train_victim, Imitator,
    TrainConfig, VictimHandle,
};
use walkattack::eval::{accuracy, cross_attack_matrix, evaluate_results, heatmap, EvalReport};
use walkattack::mesh::Mesh;
use walkattack::nn::{kld, random_suite, PredictionVector};
use walkattack::seed;
use walkattack::synth::{make_dataset, Dataset, DatasetSpec};
use walkattack::walk::Walker;

use rand::Rng;

/// Attack settings used for the efficacy criteria: a larger step than the
/// library default, walks as long as the imitator's training walks, and ten
/// consecutive fooled walks before stopping.
fn desk_attack() -> AttackConfig {
    AttackConfig {
        alpha: 0.15,
        max_iterations: 1000,
        walk_length: Some(100),
        stop_k: 10,
        seed: 0,
        target: None,
    }
}

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Suite {
    outcomes: Vec<Outcome>,
}

impl Suite {
    fn record(&mut self, id: usize, name: &'static str, pass: bool, detail: String) {
        println!("{} [{id:>2}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.outcomes.push(Outcome { id, name, pass, detail });
    }
}

fn minutes(d: Duration) -> String {
    format!("{:.1} min", d.as_secs_f64() / 60.0)
}

fn gradient_correctness(suite: &mut Suite) {
    let t = Instant::now();
    let cases = random_suite(24, 2024).expect("gradient suite");
    let elapsed = t.elapsed();
    let failed: Vec<_> = cases.iter().filter(|c| !c.report.passed).collect();
    let entries: usize = cases.iter().map(|c| c.report.checked).sum();
    let worst = cases.iter().map(|c| c.report.max_abs_error).fold(0.0, f64::max);
    let configs = cases.len() / 2;
    let pass = failed.is_empty() && configs >= 20 && elapsed < Duration::from_secs(60);
    let mut detail = format!(
        "{configs} configurations x 2 losses, {entries} entries, worst abs error {worst:.2e}, {:.1}s",
        elapsed.as_secs_f64()
    );
    for f in failed {
        detail.push_str(&format!("; failed {} ({})", f.description, f.report.worst));
    }
    suite.record(1, "gradient correctness", pass, detail);
}

fn kld_oracle(suite: &mut Suite) {
    let mut rng = seed::rng(99);
    let mut worst: f64 = 0.0;
    let mut self_worst: f64 = 0.0;
    let mut one_hot_exact = true;
    for _ in 0..100 {
        let d = rng.random_range(2..10);
        let draw = |rng: &mut seed::Rng| {
            let raw: Vec<f64> = (0..d).map(|_| rng.random_range(1e-3..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let r = draw(&mut rng);
        let p = draw(&mut rng);
        let mut hand = 0.0;
        for i in 0..d {
            hand += r[i] * (r[i] / p[i]).ln();
        }
        worst = worst.max((kld(&r, &p).unwrap() - hand).abs());
        self_worst = self_worst.max(kld(&p, &p).unwrap().abs());
        let k = rng.random_range(0..d);
        let onehot = PredictionVector::one_hot(d, k).into_inner();
        one_hot_exact &= kld(&onehot, &p).unwrap() == -p[k].ln();
    }
    let pass = worst <= 1e-10 && self_worst <= 1e-12 && one_hot_exact;
    suite.record(
        2,
        "KLD oracle",
        pass,
        format!("max |kld - hand| {worst:.1e}, max kld(p,p) {self_worst:.1e}, one-hot exact: {one_hot_exact}"),
    );
}

/// Independent of the library's adjacency: edges are read off the faces.
fn walk_invariants(suite: &mut Suite, ds: &Dataset) {
    let meshes: Vec<&Mesh> = ds.train.iter().chain(&ds.test).map(|m| &m.mesh).collect();
    let edges: Vec<HashSet<(usize, usize)>> = meshes
        .iter()
        .map(|m| {
            let mut e = HashSet::new();
            for f in m.faces() {
                for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                    e.insert((a.min(b), a.max(b)));
                }
            }
            e
        })
        .collect();
    let mut rng = seed::rng(5);
    let mut walker = Walker::new();
    let (mut transitions, mut bad_edges, mut bad_preference, mut jumps) = (0usize, 0usize, 0usize, 0usize);
    for w in 0..10_000 {
        let i = w % meshes.len();
        let mesh = meshes[i];
        let len = rng.random_range(2..=200);
        let walk = walker.extract(mesh, len, &mut rng).unwrap();
        let mut visited = HashSet::from([walk.vertices[0]]);
        for t in 1..walk.vertices.len() {
            let (a, b) = (walk.vertices[t - 1], walk.vertices[t]);
            if walk.jumps[t] {
                jumps += 1;
            } else {
                transitions += 1;
                if !edges[i].contains(&(a.min(b), a.max(b))) {
                    bad_edges += 1;
                }
                let unvisited_neighbor = edges[i].iter().any(|&(x, y)| {
                    (x == a && !visited.contains(&y)) || (y == a && !visited.contains(&x))
                });
                if unvisited_neighbor && visited.contains(&b) {
                    bad_preference += 1;
                }
            }
            visited.insert(b);
        }
    }
    suite.record(
        3,
        "walk invariants",
        bad_edges == 0 && bad_preference == 0,
        format!(
            "10000 walks, {transitions} transitions, {bad_edges} non-edges, {bad_preference} preference violations, {jumps} jumps"
        ),
    );
}

struct Trained {
    victim_a: VictimHandle,
    victim_b: VictimHandle,
    imitator_a: Imitator,
    imitator_b: Imitator,
}

fn train_all(suite: &mut Suite, ds: &Dataset) -> Trained {
    let t = Instant::now();
    let (va, _) = train_victim(ds, &TrainConfig::victim_default()).expect("walk victim");
    println!("  walk victim trained in {}", minutes(t.elapsed()));
    let victim_a = VictimHandle::new(va);

    let t = Instant::now();
    let targets = query_all(&victim_a, &ds.train).unwrap();
    let (imitator_a, log) =
        train_imitator(ds, &targets, &TrainConfig::default(), victim_a.name()).expect("imitator A");
    let fidelity_time = t.elapsed();
    let train_agree = agreement(&imitator_a, &victim_a, &ds.train, 8).unwrap();
    let test_agree = agreement(&imitator_a, &victim_a, &ds.test, 8).unwrap();
    suite.record(
        4,
        "imitation fidelity",
        train_agree >= 0.9 && test_agree >= 0.8 && fidelity_time <= Duration::from_secs(15 * 60),
        format!(
            "agreement train {train_agree:.3}, test {test_agree:.3}; probe KLD {:.3} -> {:.3}; query + training {}",
            log.probe_before.unwrap_or(f64::NAN),
            log.probe_after.unwrap_or(f64::NAN),
            minutes(fidelity_time)
        ),
    );

    let t = Instant::now();
    let (vb, _) = train_face_victim(ds, &TrainConfig::face_default()).expect("face victim");
    let victim_b = VictimHandle::new(vb);
    let targets = query_all(&victim_b, &ds.train).unwrap();
    let (imitator_b, _) =
        train_imitator(ds, &targets, &TrainConfig::default(), victim_b.name()).expect("imitator B");
    println!("  face victim and its imitator trained in {}", minutes(t.elapsed()));
    Trained { victim_a, victim_b, imitator_a, imitator_b }
}

fn attack_efficacy(suite: &mut Suite, ds: &Dataset, tr: &Trained) -> (Vec<AttackResult>, EvalReport) {
    let t = Instant::now();
    let results = attack_all(&ds.test, &tr.imitator_a.net, &desk_attack()).unwrap();
    let elapsed = t.elapsed();
    let report = evaluate_results(&tr.victim_a, &ds.test, &results).unwrap();
    let fooled = results.iter().filter(|r| r.success).count();
    suite.record(
        5,
        "attack efficacy",
        report.pre_attack_accuracy >= 0.9
            && report.post_attack_accuracy <= 0.3
            && elapsed <= Duration::from_secs(20 * 60),
        format!(
            "victim accuracy {:.3} -> {:.3} on {} test meshes, imitator fooled on {fooled}, {}",
            report.pre_attack_accuracy,
            report.post_attack_accuracy,
            results.len(),
            minutes(elapsed)
        ),
    );
    (results, report)
}

fn attack_beats_random(suite: &mut Suite, ds: &Dataset, tr: &Trained, report: &EvalReport) {
    let budget = report.mean_l2;
    let mut rng = seed::rng(6);
    let noisy: Vec<Mesh> = ds
        .test
        .iter()
        .map(|m| random_perturbation(&m.mesh, 0.3, budget, &mut rng).unwrap())
        .collect();
    let labels: Vec<usize> = ds.test.iter().map(|m| m.label).collect();
    let noisy_acc = accuracy(&tr.victim_a, &noisy, &labels).unwrap();
    let random_drop = report.pre_attack_accuracy - noisy_acc;
    let attack_drop = report.pre_attack_accuracy - report.post_attack_accuracy;
    suite.record(
        6,
        "attack beats random",
        random_drop <= 0.10 + 1e-12 && attack_drop >= 0.60 - 1e-12,
        format!(
            "random 30% perturbation at l2 {budget:.4}: drop {:.1} points; attack: drop {:.1} points",
            100.0 * random_drop,
            100.0 * attack_drop
        ),
    );
}

fn distortion_band(suite: &mut Suite, report: &EvalReport) {
    match report.mean_l2_flipped() {
        Some(l2) => suite.record(
            7,
            "distortion band",
            (0.02..=0.30).contains(&l2),
            format!(
                "mean per-vertex l2 over {} flipped meshes {l2:.4} (all meshes {:.4})",
                report.rows.iter().filter(|r| r.flipped()).count(),
                report.mean_l2
            ),
        ),
        None => suite.record(7, "distortion band", false, "no successful attacks".into()),
    }
}

fn cross_dominance(suite: &mut Suite, ds: &Dataset, tr: &Trained) {
    let t = Instant::now();
    let m = cross_attack_matrix(
        &[tr.victim_a.clone(), tr.victim_b.clone()],
        &[tr.imitator_a.clone(), tr.imitator_b.clone()],
        &ds.test,
        &desk_attack(),
    )
    .unwrap();
    let labels: Vec<usize> = ds.test.iter().map(|m| m.label).collect();
    let pre_b = accuracy(&tr.victim_b, &ds.test, &labels).unwrap();
    let cells = format!(
        "walk victim {:.3} own / {:.3} other; face victim {:.3} own / {:.3} other (clean {pre_b:.3}); {}",
        m.accuracy[0][0],
        m.accuracy[0][1],
        m.accuracy[1][1],
        m.accuracy[1][0],
        minutes(t.elapsed())
    );
    suite.record(8, "cross-imitator dominance", m.own_imitator_dominates(), cells);
}

fn heatmap_and_topology(suite: &mut Suite, ds: &Dataset, tr: &Trained, results: &[AttackResult]) {
    let mut problems = Vec::new();
    for (m, r) in ds.test.iter().zip(results) {
        if r.attacked_mesh.faces() != m.mesh.faces() {
            problems.push(format!("{}: faces changed", m.source_id));
        }
        let h = heatmap(&m.mesh, &r.attacked_mesh).unwrap();
        if h.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            problems.push(format!("{}: heat outside [0, 1]", m.source_id));
        }
        let moved = r.displacement.iter().any(|d| *d != [0.0; 3]);
        let max = h.values.iter().copied().fold(0.0, f64::max);
        if moved != (max == 1.0) {
            problems.push(format!("{}: heat max {max}", m.source_id));
        }
    }

    // Replay the first iterations of several attacks one step at a time.
    let cfg = desk_attack();
    let mut steps = 0;
    for (i, m) in ds.test.iter().enumerate().step_by(4) {
        let mesh_seed = seed::derive_index(cfg.seed, "mesh", i as u64);
        let mut rng = seed::rng(mesh_seed);
        let mut walker = Walker::new();
        let mut previous = m.mesh.clone();
        for k in 1..=8 {
            let walk = walker.extract(&m.mesh, 100, &mut rng).unwrap();
            let one = AttackConfig { max_iterations: k, seed: mesh_seed, ..cfg.clone() };
            let now = attack(&m.mesh, m.label, &tr.imitator_a.net, &one)
                .unwrap()
                .attacked_mesh;
            let walked: HashSet<usize> = walk.vertices.iter().copied().collect();
            for (v, (a, b)) in now.vertices().iter().zip(previous.vertices()).enumerate() {
                if a != b && !walked.contains(&v) {
                    problems.push(format!("{} iteration {k}: unwalked vertex {v} moved", m.source_id));
                }
            }
            previous = now;
            steps += 1;
        }
    }
    let detail = if problems.is_empty() {
        format!("{} attacked meshes, {steps} replayed iterations", results.len())
    } else {
        problems.join("; ")
    };
    suite.record(9, "heat map and topology invariants", problems.is_empty(), detail);
}

const PIPELINE_CONFIG: &str = r#"
seed = 11
[gen-data]
per_class = 8
[walk-victim]
epochs = 40
walk_length = 60
hidden = 32
lift = 16
[train-imitator]
epochs = 40
walk_length = 60
hidden = 32
lift = 16
[attack]
alpha = 0.15
walk_length = 60
stop_k = 10
max_iterations = 200
"#;

fn run_pipeline(root: &Path) -> Result<(), String> {
    let cfg = root.join("run.toml");
    fs::write(&cfg, PIPELINE_CONFIG).map_err(|e| e.to_string())?;
    let p = |s: &str| root.join(s).to_str().unwrap().to_string();
    let steps: Vec<Vec<String>> = vec![
        vec!["gen-data".into(), "--out".into(), p("data")],
        vec!["train-victim".into(), "--data".into(), p("data"), "--out".into(), p("victim")],
        vec!["query".into(), "--data".into(), p("data"), "--victim".into(), p("victim"), "--out".into(), p("query")],
        vec!["train-imitator".into(), "--data".into(), p("data"), "--predictions".into(), p("query"), "--out".into(), p("imitator")],
        vec!["attack".into(), "--data".into(), p("data"), "--imitator".into(), p("imitator"), "--out".into(), p("attack")],
        vec![
            "evaluate".into(), "--data".into(), p("data"), "--victim".into(), p("victim"),
            "--attacked".into(), p("attack"), "--out".into(), p("report"), "--heatmaps".into(),
        ],
    ];
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_walkattack"))
            .arg("--config")
            .arg(&cfg)
            .args(&args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(())
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn determinism(suite: &mut Suite) {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ran = run_pipeline(a.path()).and_then(|_| run_pipeline(b.path()));
    if let Err(e) = ran {
        suite.record(10, "pipeline determinism", false, e);
        return;
    }
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    let differing: Vec<&String> = ta
        .iter()
        .filter(|(k, v)| tb.get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    let has = |prefix: &str| ta.keys().any(|k| k.starts_with(prefix));
    let complete = has("victim/tensors.bin")
        && has("imitator/tensors.bin")
        && has("attack/meshes/")
        && has("report/report.csv");
    suite.record(
        10,
        "pipeline determinism",
        differing.is_empty() && ta.len() == tb.len() && complete,
        if differing.is_empty() {
            format!("{} files bit-identical across two runs", ta.len())
        } else {
            format!("differing files: {differing:?}")
        },
    );
}

fn main() {
    let start = Instant::now();
    let mut suite = Suite::default();
    gradient_correctness(&mut suite);
    kld_oracle(&mut suite);

    let ds = make_dataset(&DatasetSpec::default()).expect("default dataset");
    walk_invariants(&mut suite, &ds);

    let trained = train_all(&mut suite, &ds);
    let (results, report) = attack_efficacy(&mut suite, &ds, &trained);
    attack_beats_random(&mut suite, &ds, &trained, &report);
    distortion_band(&mut suite, &report);
    cross_dominance(&mut suite, &ds, &trained);
    heatmap_and_topology(&mut suite, &ds, &trained, &results);
    determinism(&mut suite);

    suite.outcomes.sort_by_key(|o| o.id);
    let failed: Vec<_> = suite.outcomes.iter().filter(|o| !o.pass).collect();
    println!(
        "acceptance: {} of {} criteria passed in {}",
        suite.outcomes.len() - failed.len(),
        suite.outcomes.len(),
        minutes(start.elapsed())
    );
    if !failed.is_empty() {
        for o in &failed {
            println!("  failed [{}] {}: {}", o.id, o.name, o.detail);
        }
        std::process::exit(1);
    }
}
