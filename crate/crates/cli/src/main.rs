//! `walkattack`: dataset generation, victim training, black-box querying,
//! imitator distillation, attack, evaluation and gradient checking.

mod config;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use walkattack::attack::{attack_all, save_run_log, AttackResult, SIGN_CONVENTION};
use walkattack::classifiers::{
    load_predictions, load_victim, query_all, save_predictions, train_face_victim,
    train_imitator, train_victim, Imitator,
};
use walkattack::eval::{evaluate, export_heatmap, heatmap};
use walkattack::mesh::{load_mesh, save_mesh, LabeledMesh, Mesh, MeshFormat};
use walkattack::nn::random_suite;
use walkattack::synth::{load_dataset, make_dataset, save_dataset, Split};
use walkattack::write_string_atomic;

use config::RunConfig;

const PREDICTIONS_FILE: &str = "predictions.csv";

#[derive(Parser)]
#[command(name = "walkattack", version, about = "Black-box random-walk attacks on mesh classifiers")]
struct Cli {
    /// TOML run configuration with one table per subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-mesh work (queries, attacks).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the labeled synthetic dataset.
    GenData(GenDataArgs),
    /// Train a victim classifier.
    TrainVictim(TrainVictimArgs),
    /// Query a victim for the prediction vector of every mesh in a split.
    Query(QueryArgs),
    /// Distill an imitating walk network from queried prediction vectors.
    TrainImitator(TrainImitatorArgs),
    /// Attack every mesh of a split through an imitator.
    Attack(AttackArgs),
    /// Measure victim accuracy and distortion, optionally with heat maps.
    Evaluate(EvaluateArgs),
    /// Finite-difference check of the walk network's gradients.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    per_class: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VictimKind {
    Walk,
    Face,
}

#[derive(Args)]
struct TrainVictimArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "walk")]
    kind: VictimKind,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    victim: PathBuf,
    /// Output directory for the prediction file and resolved config.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
}

#[derive(Args)]
struct TrainImitatorArgs {
    #[arg(long)]
    data: PathBuf,
    /// Output directory of `query`.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Victim name to record; defaults to the one stored by `query`.
    #[arg(long)]
    imitates: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    imitator: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    walk_length: Option<usize>,
    #[arg(long)]
    stop_k: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Drive every mesh toward this class instead of away from its label.
    #[arg(long)]
    target_class: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    victim: PathBuf,
    /// Output directory of `attack`; omitted, the clean meshes are scored
    /// against themselves.
    #[arg(long)]
    attacked: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
    /// Also write per-mesh displacement heat maps (PLY and CSV).
    #[arg(long)]
    heatmaps: bool,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    configs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        _ => Err(format!("unknown split {s:?} (train or test)")),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the worker pool")?;
    }
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::GenData(a) => gen_data(&mut cfg, a),
        Command::TrainVictim(a) => train_victim_cmd(&mut cfg, a),
        Command::Query(a) => query(&mut cfg, a),
        Command::TrainImitator(a) => train_imitator_cmd(&mut cfg, a),
        Command::Attack(a) => attack(&mut cfg, a),
        Command::Evaluate(a) => evaluate_cmd(&mut cfg, a),
        Command::Gradcheck(a) => gradcheck(&mut cfg, a),
    }
}

fn gen_data(cfg: &mut RunConfig, a: GenDataArgs) -> Result<()> {
    if let Some(s) = a.seed {
        cfg.gen_data.seed = s;
    }
    if let Some(n) = a.per_class {
        cfg.gen_data.per_class = n;
    }
    let ds = make_dataset(&cfg.gen_data)?;
    save_dataset(&ds, Some(&cfg.gen_data), &a.out)?;
    cfg.write(&a.out)?;
    println!(
        "wrote {} train and {} test meshes over {} classes to {}",
        ds.train.len(),
        ds.test.len(),
        ds.num_classes(),
        a.out.display()
    );
    Ok(())
}

fn train_victim_cmd(cfg: &mut RunConfig, a: TrainVictimArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let section = match a.kind {
        VictimKind::Walk => &mut cfg.walk_victim,
        VictimKind::Face => &mut cfg.face_victim,
    };
    if let Some(e) = a.epochs {
        section.epochs = e;
    }
    if let Some(s) = a.seed {
        section.seed = s;
    }
    let log = match a.kind {
        VictimKind::Walk => {
            let (v, log) = train_victim(&ds, section)?;
            v.save(&a.out)?;
            log
        }
        VictimKind::Face => {
            let (v, log) = train_face_victim(&ds, section)?;
            v.save(&a.out)?;
            log
        }
    };
    write_string_atomic(&a.out.join("training.csv"), &log.to_csv())?;
    cfg.write(&a.out)?;
    let last = log.epochs.last();
    println!(
        "trained victim: {} epochs, final loss {:.4}, final train accuracy {:.3}",
        log.epochs.len(),
        last.map_or(f64::NAN, |e| e.loss),
        last.map_or(f64::NAN, |e| e.accuracy)
    );
    Ok(())
}

fn query(cfg: &mut RunConfig, a: QueryArgs) -> Result<()> {
    if let Some(s) = a.split {
        cfg.query.split = s;
    }
    let ds = load_dataset(&a.data)?;
    let victim = load_victim(&a.victim)?;
    let meshes = ds.split(cfg.query.split);
    let preds = query_all(&victim, meshes)?;
    let records: Vec<_> = meshes
        .iter()
        .map(|m| m.source_id.clone())
        .zip(preds)
        .collect();
    save_predictions(&records, &a.out.join(PREDICTIONS_FILE))?;
    cfg.query.victim_name = victim.name().to_string();
    cfg.write(&a.out)?;
    println!("queried {} on {} meshes", victim.name(), records.len());
    Ok(())
}

fn train_imitator_cmd(cfg: &mut RunConfig, a: TrainImitatorArgs) -> Result<()> {
    if let Some(e) = a.epochs {
        cfg.train_imitator.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.train_imitator.seed = s;
    }
    let ds = load_dataset(&a.data)?;
    let imitates = match a.imitates {
        Some(n) => n,
        None => {
            let q = RunConfig::load(Some(&a.predictions.join(config::RESOLVED_FILE)))?;
            if q.query.victim_name.is_empty() {
                bail!("{} does not name the queried victim", a.predictions.display());
            }
            q.query.victim_name
        }
    };
    let records = load_predictions(&a.predictions.join(PREDICTIONS_FILE))?;
    let by_id: HashMap<_, _> = records.into_iter().collect();
    let targets = ds
        .train
        .iter()
        .map(|m| {
            by_id
                .get(&m.source_id)
                .cloned()
                .with_context(|| format!("no prediction for train mesh {}", m.source_id))
        })
        .collect::<Result<Vec<_>>>()?;
    let (imitator, log) = train_imitator(&ds, &targets, &cfg.train_imitator, &imitates)?;
    imitator.save(&a.out)?;
    write_string_atomic(&a.out.join("training.csv"), &log.to_csv())?;
    cfg.query.victim_name = imitates;
    cfg.write(&a.out)?;
    println!(
        "trained imitator of {}: probe KLD {:.4} -> {:.4}",
        imitator.imitates,
        log.probe_before.unwrap_or(f64::NAN),
        log.probe_after.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn attacked_mesh_path(dir: &Path, source_id: &str) -> PathBuf {
    dir.join("meshes").join(format!("{source_id}.off"))
}

fn attack(cfg: &mut RunConfig, a: AttackArgs) -> Result<()> {
    let s = &mut cfg.attack;
    if let Some(v) = a.split {
        s.split = v;
    }
    if let Some(v) = a.alpha {
        s.alpha = v;
    }
    if a.walk_length.is_some() {
        s.walk_length = a.walk_length;
    }
    if let Some(v) = a.stop_k {
        s.stop_k = v;
    }
    if let Some(v) = a.max_iterations {
        s.max_iterations = v;
    }
    if let Some(v) = a.seed {
        s.seed = v;
    }
    if a.target_class.is_some() {
        s.target = a.target_class;
    }
    s.sign_convention = SIGN_CONVENTION.to_string();
    let ds = load_dataset(&a.data)?;
    let imitator = Imitator::load(&a.imitator)?;
    let meshes = ds.split(s.split);
    let results = attack_all(meshes, &imitator.net, &s.attack_config())?;
    for (m, r) in meshes.iter().zip(&results) {
        save_mesh(&r.attacked_mesh, &attacked_mesh_path(&a.out, &m.source_id), MeshFormat::Off)?;
        save_run_log(&r.log, &a.out.join("logs").join(format!("{}.jsonl", m.source_id)))?;
    }
    write_string_atomic(&a.out.join("summary.csv"), &attack_summary(meshes, &results))?;
    cfg.query.victim_name = imitator.imitates.clone();
    cfg.write(&a.out)?;
    let fooled = results.iter().filter(|r| r.success).count();
    println!(
        "attacked {} meshes through the imitator of {}: {fooled} fooled the imitator",
        results.len(),
        imitator.imitates
    );
    Ok(())
}

fn attack_summary(meshes: &[LabeledMesh], results: &[AttackResult]) -> String {
    let mut out = format!("# {SIGN_CONVENTION}\nsource_id,label,success,iterations,updates,imitator_prediction\n");
    for (m, r) in meshes.iter().zip(results) {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.source_id,
            m.label,
            r.success,
            r.iterations_used,
            r.updates(),
            r.final_prediction.argmax()
        ));
    }
    out
}

fn evaluate_cmd(cfg: &mut RunConfig, a: EvaluateArgs) -> Result<()> {
    if let Some(s) = a.split {
        cfg.evaluate.split = s;
    }
    cfg.evaluate.heatmaps |= a.heatmaps;
    let ds = load_dataset(&a.data)?;
    let victim = load_victim(&a.victim)?;
    let originals = ds.split(cfg.evaluate.split);
    let attacked: Vec<Mesh> = match &a.attacked {
        None => originals.iter().map(|m| m.mesh.clone()).collect(),
        Some(dir) => originals
            .iter()
            .map(|m| load_mesh(&attacked_mesh_path(dir, &m.source_id), MeshFormat::Off))
            .collect::<walkattack::Result<_>>()?,
    };
    let report = evaluate(&victim, originals, &attacked)?;
    report.save(&a.out.join("report.csv"), &a.out.join("report.txt"))?;
    if cfg.evaluate.heatmaps {
        for (o, m) in originals.iter().zip(&attacked) {
            let heat = heatmap(&o.mesh, m)?;
            export_heatmap(m, &heat, &a.out.join("heatmaps").join(format!("{}.ply", o.source_id)))?;
        }
    }
    cfg.write(&a.out)?;
    print!("{}", report.to_table());
    Ok(())
}

fn gradcheck(cfg: &mut RunConfig, a: GradcheckArgs) -> Result<()> {
    if let Some(n) = a.configs {
        cfg.gradcheck.configs = n;
    }
    if let Some(s) = a.seed {
        cfg.gradcheck.seed = s;
    }
    let cases = random_suite(cfg.gradcheck.configs, cfg.gradcheck.seed)?;
    let failed: Vec<_> = cases.iter().filter(|c| !c.report.passed).collect();
    for c in &cases {
        println!(
            "{} {}: {} entries, max abs error {:.2e}",
            if c.report.passed { "ok  " } else { "FAIL" },
            c.description,
            c.report.checked,
            c.report.max_abs_error
        );
    }
    if let Some(dir) = &a.out {
        let json = serde_json::to_string_pretty(&cases).context("serializing report")?;
        write_string_atomic(&dir.join("gradcheck.json"), &(json + "\n"))?;
        cfg.write(dir)?;
    }
    if !failed.is_empty() {
        bail!("{} of {} gradient checks failed", failed.len(), cases.len());
    }
    Ok(())
}
