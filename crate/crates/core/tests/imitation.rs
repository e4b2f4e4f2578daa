use rand::Rng;
use walkattack::attack::{attack, AttackConfig};
use walkattack::classifiers::{
    agreement, query_all, train_imitator, Imitator, TableVictim, TrainConfig, VictimHandle,
    WalkVictim,
};
use walkattack::nn::{clip_global_norm, kld, Adam, InputFeatures, NetDims, PredictionVector, WalkNet};
use walkattack::synth::{make_dataset, Dataset, DatasetSpec};
use walkattack::walk::walk_batch;
use walkattack::{seed, Error};

fn small_dataset() -> Dataset {
    make_dataset(&DatasetSpec {
        per_class: 5,
        seed: 21,
        ..DatasetSpec::default()
    })
    .unwrap()
}

fn small_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        walk_length: 30,
        lift: 8,
        hidden: 16,
        walks_per_mesh: 4,
        batch_size: 8,
        learning_rate: 5e-3,
        ..TrainConfig::default()
    }
}

fn table_victim(ds: &Dataset, rng: &mut impl Rng) -> VictimHandle {
    let d = ds.num_classes();
    let prototypes: Vec<Vec<f64>> = (0..d)
        .map(|k| (0..d).map(|c| if c == k { 2.0 } else { rng.random_range(-1.0..1.0) }).collect())
        .collect();
    let mut t = TableVictim::new("table", ds.class_names.clone());
    for m in ds.train.iter().chain(&ds.test) {
        let logits: Vec<f64> = prototypes[m.label]
            .iter()
            .map(|x| x + rng.random_range(-0.1..0.1))
            .collect();
        t.insert(&m.mesh, PredictionVector::from_logits(&logits)).unwrap();
    }
    VictimHandle::new(t)
}

#[test]
fn imitator_trains_from_a_lookup_table_victim() {
    let ds = small_dataset();
    let victim = table_victim(&ds, &mut seed::rng(1));
    let targets = query_all(&victim, &ds.train).unwrap();
    let (imitator, log) = train_imitator(&ds, &targets, &small_config(60), victim.name()).unwrap();
    assert_eq!(imitator.imitates, "table");
    assert!(log.probe_after.unwrap() < 0.5 * log.probe_before.unwrap());

    // The attack only needs the imitator; the table cannot even answer for
    // the moved mesh.
    let m = &ds.test[0];
    let cfg = AttackConfig {
        alpha: 0.05,
        max_iterations: 20,
        walk_length: Some(30),
        ..AttackConfig::default()
    };
    let r = attack(&m.mesh, m.label, &imitator.net, &cfg).unwrap();
    if r.updates() > 0 {
        assert!(matches!(victim.query(&r.attacked_mesh), Err(Error::Config(_))));
    }
}

#[test]
fn imitator_training_is_deterministic() {
    let ds = small_dataset();
    let victim = table_victim(&ds, &mut seed::rng(2));
    let targets = query_all(&victim, &ds.train).unwrap();
    let cfg = small_config(60);
    let (a, la) = train_imitator(&ds, &targets, &cfg, "table").unwrap();
    let (b, lb) = train_imitator(&ds, &targets, &cfg, "table").unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);
}

#[test]
fn uniform_targets_give_a_uniform_imitator() {
    let ds = small_dataset();
    let d = ds.num_classes();
    let targets = vec![PredictionVector::uniform(d); ds.train.len()];
    let (imitator, log) = train_imitator(&ds, &targets, &small_config(20), "uniform").unwrap();
    assert!(log.probe_after.unwrap() < 1e-3, "{log:?}");
    for m in &ds.test {
        let p = imitator.predict(&m.mesh).unwrap();
        for &x in p.probs() {
            assert!((x - 1.0 / d as f64).abs() < 0.05, "{p:?}");
        }
    }
}

#[test]
fn single_batch_overfits() {
    let ds = small_dataset();
    let dims = NetDims {
        lift: Some(8),
        hidden: 16,
        layers: 2,
        classes: ds.num_classes(),
        features: InputFeatures::Coordinates,
    };
    let mut net = WalkNet::new(dims, 3).unwrap();
    let mut rng = seed::rng(9);
    let walks: Vec<_> = ds.train[..4]
        .iter()
        .map(|m| walk_batch(&m.mesh, 1, 20, &mut rng).unwrap().remove(0).coords)
        .collect();
    let refs: Vec<&[[f64; 3]]> = walks.iter().map(Vec::as_slice).collect();
    let targets: Vec<Vec<f64>> = (0..4)
        .map(|i| PredictionVector::one_hot(ds.num_classes(), i).into_inner())
        .collect();
    let trefs: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    let loss = |net: &WalkNet| {
        let t = net.forward_batch(&refs).unwrap();
        (0..4)
            .map(|b| kld(&targets[b], t.probs.row(b).as_slice().unwrap()).unwrap())
            .sum::<f64>()
            / 4.0
    };
    let initial = loss(&net);
    let mut opt = Adam::new(1e-2);
    for _ in 0..50 {
        let trace = net.forward_batch(&refs).unwrap();
        let mut g = net.backward_batch(&trace, &trefs, 1.0, true).unwrap().param_grads.unwrap();
        clip_global_norm(&mut g, 5.0);
        opt.step(&mut net, &g);
    }
    let last = loss(&net);
    assert!(last < 0.1 * initial, "{initial} -> {last}");
}

#[test]
fn self_agreement_and_chance_level() {
    let ds = small_dataset();
    let d = ds.num_classes();
    let net = WalkNet::new(small_config(0).dims(d), 5).unwrap();
    let victim = VictimHandle::new(
        WalkVictim::new("self", ds.class_names.clone(), net.clone(), 4, 30, 77).unwrap(),
    );
    let twin = Imitator {
        net,
        imitates: "self".into(),
        walk_length: 30,
        query_walks: 4,
        seed: 77,
    };
    assert_eq!(agreement(&twin, &victim, &ds.test, 4).unwrap(), 1.0);

    // Balanced one-hot answers against an untrained imitator.
    let mut table = TableVictim::new("labels", ds.class_names.clone());
    for m in &ds.train {
        table.insert(&m.mesh, PredictionVector::one_hot(d, m.label)).unwrap();
    }
    let labels = VictimHandle::new(table);
    let untrained = Imitator {
        net: WalkNet::zeros(small_config(0).dims(d)).unwrap(),
        ..twin
    };
    let a = agreement(&untrained, &labels, &ds.train, 4).unwrap();
    assert!((a - 1.0 / d as f64).abs() < 0.1, "{a}");
}
