//! Measurements on attacked meshes: victim accuracy, per-vertex L2
//! distortion, displacement heat maps, the victim-by-imitator attack matrix
//! and the per-mesh evaluation report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::attack::{attack_all, AttackConfig, AttackResult};
use crate::classifiers::{Imitator, VictimHandle};
use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic, write_string_atomic};
use crate::mesh::{save_mesh_with_attributes, MeshFormat, VertexAttributes};
use crate::mesh::{norm, sub, LabeledMesh, Mesh};

/// Written at the top of every report so the distortion numbers cannot be
/// misread.
pub const L2_DEFINITION: &str = "l2 = mean over vertices of ||attacked_v - original_v||_2, \
both meshes mapped by the original's unit-sphere frame (centroid to origin, max radius 1)";

/// Fraction of meshes whose victim argmax equals the label.
pub fn accuracy<M: AsRef<Mesh> + Sync>(
    victim: &VictimHandle,
    meshes: &[M],
    labels: &[usize],
) -> Result<f64> {
    let predicted = classify_all(victim, meshes, labels)?;
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// `matrix[label][predicted]` counts.
pub fn confusion_matrix<M: AsRef<Mesh> + Sync>(
    victim: &VictimHandle,
    meshes: &[M],
    labels: &[usize],
) -> Result<Vec<Vec<usize>>> {
    let d = victim.num_classes();
    let predicted = classify_all(victim, meshes, labels)?;
    let mut m = vec![vec![0; d]; d];
    for (&p, &l) in predicted.iter().zip(labels) {
        if l >= d {
            return Err(Error::dims(format!("label < {d}"), l));
        }
        m[l][p] += 1;
    }
    Ok(m)
}

fn classify_all<M: AsRef<Mesh> + Sync>(
    victim: &VictimHandle,
    meshes: &[M],
    labels: &[usize],
) -> Result<Vec<usize>> {
    if meshes.is_empty() {
        return Err(Error::EmptyInput("meshes"));
    }
    if meshes.len() != labels.len() {
        return Err(Error::dims(format!("{} labels", meshes.len()), labels.len()));
    }
    meshes.par_iter().map(|m| victim.classify(m.as_ref())).collect()
}

fn check_topology(original: &Mesh, attacked: &Mesh) -> Result<()> {
    if original.vertex_count() != attacked.vertex_count() {
        return Err(Error::TopologyMismatch(format!(
            "{} vs {} vertices",
            original.vertex_count(),
            attacked.vertex_count()
        )));
    }
    if original.faces() != attacked.faces() {
        return Err(Error::TopologyMismatch("face lists differ".into()));
    }
    Ok(())
}

/// Per-vertex displacement length, measured in the original's unit-sphere
/// frame.
pub fn vertex_displacements(original: &Mesh, attacked: &Mesh) -> Result<Vec<f64>> {
    check_topology(original, attacked)?;
    let frame = original.unit_sphere_frame()?;
    Ok(original
        .vertices()
        .iter()
        .zip(attacked.vertices())
        .map(|(&o, &a)| norm(sub(frame.map_point(a), frame.map_point(o))))
        .collect())
}

/// Mean per-vertex displacement; see [`L2_DEFINITION`].
pub fn l2_distortion(original: &Mesh, attacked: &Mesh) -> Result<f64> {
    let d = vertex_displacements(original, attacked)?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// Per-vertex displacement normalized by the mesh's largest displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap {
    pub values: Vec<f64>,
}

impl HeatMap {
    /// Linear blue-to-red ramp.
    pub fn color(value: f64) -> [u8; 3] {
        let v = value.clamp(0.0, 1.0);
        [(255.0 * v).round() as u8, 0, (255.0 * (1.0 - v)).round() as u8]
    }

    pub fn colors(&self) -> Vec<[u8; 3]> {
        self.values.iter().map(|&v| HeatMap::color(v)).collect()
    }
}

pub fn heatmap(original: &Mesh, attacked: &Mesh) -> Result<HeatMap> {
    let d = vertex_displacements(original, attacked)?;
    let max = d.iter().copied().fold(0.0, f64::max);
    let values = if max > 0.0 {
        d.iter().map(|x| x / max).collect()
    } else {
        vec![0.0; d.len()]
    };
    Ok(HeatMap { values })
}

/// Writes `path` as PLY with per-vertex quality and ramp colors, and a
/// sibling `.csv` of `vertex_index,value`. Returns the CSV path.
pub fn export_heatmap(mesh: &Mesh, heat: &HeatMap, path: &Path) -> Result<PathBuf> {
    if heat.values.len() != mesh.vertex_count() {
        return Err(Error::dims(mesh.vertex_count(), heat.values.len()));
    }
    let attrs = VertexAttributes {
        quality: Some(heat.values.clone()),
        colors: Some(heat.colors()),
    };
    save_mesh_with_attributes(mesh, &attrs, path, MeshFormat::Ply)?;
    let csv = path.with_extension("csv");
    write_atomic(&csv, |w| {
        writeln!(w, "vertex_index,value")?;
        for (i, v) in heat.values.iter().enumerate() {
            writeln!(w, "{i},{v:?}")?;
        }
        Ok(())
    })?;
    Ok(csv)
}

/// Victims down the rows, imitators across the columns; entry `(i, j)` is
/// victim `i`'s accuracy on the test meshes attacked through imitator `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossAttackMatrix {
    pub victims: Vec<String>,
    pub imitators: Vec<String>,
    pub accuracy: Vec<Vec<f64>>,
    /// Attacked test meshes per imitator, in test order.
    pub attacked: Vec<Vec<Mesh>>,
}

impl CrossAttackMatrix {
    /// Whether every victim does no better under its own imitator than
    /// under any other.
    pub fn own_imitator_dominates(&self) -> bool {
        self.victims.iter().enumerate().all(|(i, v)| {
            self.imitators.iter().enumerate().all(|(j, own)| {
                own != v
                    || (0..self.imitators.len())
                        .all(|k| self.accuracy[i][j] <= self.accuracy[i][k])
            })
        })
    }

    pub fn to_table(&self) -> String {
        let w = self
            .victims
            .iter()
            .chain(&self.imitators)
            .map(|s| s.len())
            .max()
            .unwrap_or(0)
            .max(8);
        let mut out = format!("{:w$}", "victim");
        for im in &self.imitators {
            let _ = write!(out, "  {:>w$}", format!("via {im}"), w = w + 4);
        }
        out.push('\n');
        for (v, row) in self.victims.iter().zip(&self.accuracy) {
            let _ = write!(out, "{v:w$}");
            for a in row {
                let _ = write!(out, "  {:>w$.3}", a, w = w + 4);
            }
            out.push('\n');
        }
        out
    }
}

/// Attacks `test` once through every imitator, then queries every victim on
/// every attacked set. Each imitator must name exactly one of the victims.
pub fn cross_attack_matrix(
    victims: &[VictimHandle],
    imitators: &[Imitator],
    test: &[LabeledMesh],
    config: &AttackConfig,
) -> Result<CrossAttackMatrix> {
    if victims.is_empty() || imitators.is_empty() {
        return Err(Error::EmptyInput("victims or imitators"));
    }
    for im in imitators {
        let owners = victims.iter().filter(|v| v.name() == im.imitates).count();
        if owners != 1 {
            return Err(Error::Config(format!(
                "imitator of {:?} matches {owners} victims",
                im.imitates
            )));
        }
    }
    let labels: Vec<usize> = test.iter().map(|m| m.label).collect();
    let mut attacked = Vec::with_capacity(imitators.len());
    for im in imitators {
        let results = attack_all(test, &im.net, config)?;
        attacked.push(results.into_iter().map(|r| r.attacked_mesh).collect::<Vec<_>>());
    }
    let accuracy = victims
        .iter()
        .map(|v| {
            attacked
                .iter()
                .map(|set| accuracy(v, set, &labels))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(CrossAttackMatrix {
        victims: victims.iter().map(|v| v.name().to_string()).collect(),
        imitators: imitators.iter().map(|i| i.imitates.clone()).collect(),
        accuracy,
        attacked,
    })
}

/// One evaluated mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub source_id: String,
    pub label: usize,
    pub pre_prediction: usize,
    pub post_prediction: usize,
    pub l2: f64,
}

impl ReportRow {
    pub fn flipped(&self) -> bool {
        self.pre_prediction == self.label && self.post_prediction != self.label
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub victim: String,
    pub class_names: Vec<String>,
    pub pre_attack_accuracy: f64,
    pub post_attack_accuracy: f64,
    pub mean_l2: f64,
    /// `None` for classes absent from the evaluated set.
    pub per_class_l2: Vec<Option<f64>>,
    /// Fraction of meshes correct before the attack that are wrong after it.
    pub success_rate: f64,
    pub rows: Vec<ReportRow>,
}

/// Queries `victim` on `originals` and on `attacked` (same order) and
/// measures the distortion of every pair.
pub fn evaluate(
    victim: &VictimHandle,
    originals: &[LabeledMesh],
    attacked: &[Mesh],
) -> Result<EvalReport> {
    if originals.is_empty() {
        return Err(Error::EmptyInput("meshes"));
    }
    if originals.len() != attacked.len() {
        return Err(Error::dims(
            format!("{} attacked meshes", originals.len()),
            attacked.len(),
        ));
    }
    let rows = originals
        .par_iter()
        .zip(attacked)
        .map(|(o, a)| {
            Ok(ReportRow {
                source_id: o.source_id.clone(),
                label: o.label,
                pre_prediction: victim.classify(&o.mesh)?,
                post_prediction: victim.classify(a)?,
                l2: l2_distortion(&o.mesh, a)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_rows(victim.name().to_string(), victim.class_names().to_vec(), rows)
}

/// Convenience for attack output.
pub fn evaluate_results(
    victim: &VictimHandle,
    originals: &[LabeledMesh],
    results: &[AttackResult],
) -> Result<EvalReport> {
    let attacked: Vec<Mesh> = results.iter().map(|r| r.attacked_mesh.clone()).collect();
    evaluate(victim, originals, &attacked)
}

impl EvalReport {
    /// Aggregates are always recomputed from the rows.
    pub fn from_rows(victim: String, class_names: Vec<String>, rows: Vec<ReportRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("report rows"));
        }
        let d = class_names.len();
        if let Some(r) = rows.iter().find(|r| r.label >= d) {
            return Err(Error::dims(format!("label < {d}"), r.label));
        }
        let n = rows.len() as f64;
        let pre = rows.iter().filter(|r| r.pre_prediction == r.label).count();
        let post = rows.iter().filter(|r| r.post_prediction == r.label).count();
        let flipped = rows.iter().filter(|r| r.flipped()).count();
        let mut sums = vec![(0.0, 0usize); d];
        for r in &rows {
            sums[r.label].0 += r.l2;
            sums[r.label].1 += 1;
        }
        Ok(EvalReport {
            victim,
            class_names,
            pre_attack_accuracy: pre as f64 / n,
            post_attack_accuracy: post as f64 / n,
            mean_l2: rows.iter().map(|r| r.l2).sum::<f64>() / n,
            per_class_l2: sums
                .into_iter()
                .map(|(s, c)| (c > 0).then(|| s / c as f64))
                .collect(),
            success_rate: if pre == 0 { 0.0 } else { flipped as f64 / pre as f64 },
            rows,
        })
    }

    /// Mean distortion over the meshes whose victim label the attack flipped.
    pub fn mean_l2_flipped(&self) -> Option<f64> {
        let l2: Vec<f64> = self.rows.iter().filter(|r| r.flipped()).map(|r| r.l2).collect();
        (!l2.is_empty()).then(|| l2.iter().sum::<f64>() / l2.len() as f64)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "victim               {}", self.victim);
        let _ = writeln!(out, "meshes               {}", self.rows.len());
        let _ = writeln!(out, "pre-attack accuracy  {:.4}", self.pre_attack_accuracy);
        let _ = writeln!(out, "post-attack accuracy {:.4}", self.post_attack_accuracy);
        let _ = writeln!(out, "success rate         {:.4}", self.success_rate);
        let _ = writeln!(out, "mean l2              {:.5}", self.mean_l2);
        for (name, l2) in self.class_names.iter().zip(&self.per_class_l2) {
            match l2 {
                Some(v) => {
                    let _ = writeln!(out, "  l2 {name:16} {v:.5}");
                }
                None => {
                    let _ = writeln!(out, "  l2 {name:16} -");
                }
            }
        }
        let _ = writeln!(out, "({L2_DEFINITION})");
        out
    }

    /// Header comments carry the definition and the aggregates; rows follow.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {L2_DEFINITION}");
        let _ = writeln!(out, "# victim={}", self.victim);
        let _ = writeln!(out, "# class_names={}", self.class_names.join(";"));
        let _ = writeln!(out, "# pre_attack_accuracy={:?}", self.pre_attack_accuracy);
        let _ = writeln!(out, "# post_attack_accuracy={:?}", self.post_attack_accuracy);
        let _ = writeln!(out, "# success_rate={:?}", self.success_rate);
        let _ = writeln!(out, "# mean_l2={:?}", self.mean_l2);
        out.push_str("source_id,label,pre_prediction,post_prediction,l2\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:?}",
                r.source_id, r.label, r.pre_prediction, r.post_prediction, r.l2
            );
        }
        out
    }

    /// Rebuilds a report from [`to_csv`](Self::to_csv) output. The stored
    /// aggregates must agree exactly with the ones recomputed from the rows.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut victim = None;
        let mut class_names = None;
        let mut stored = Vec::new();
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (i, line) in text.lines().enumerate() {
            let loc = || format!("report line {}", i + 1);
            if let Some(c) = line.strip_prefix("# ") {
                if let Some((k, v)) = c.split_once('=') {
                    match k {
                        "victim" => victim = Some(v.to_string()),
                        "class_names" => {
                            class_names = Some(v.split(';').map(str::to_string).collect())
                        }
                        "pre_attack_accuracy" | "post_attack_accuracy" | "success_rate"
                        | "mean_l2" => {
                            let x: f64 = v.parse().map_err(|_| Error::parse(loc(), "bad number"))?;
                            stored.push((k.to_string(), x));
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if !header_seen {
                header_seen = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(Error::parse(loc(), "expected 5 fields"));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(loc(), "bad integer"));
            rows.push(ReportRow {
                source_id: f[0].to_string(),
                label: int(f[1])?,
                pre_prediction: int(f[2])?,
                post_prediction: int(f[3])?,
                l2: f[4].parse().map_err(|_| Error::parse(loc(), "bad l2"))?,
            });
        }
        let report = EvalReport::from_rows(
            victim.ok_or_else(|| Error::parse("report", "missing victim"))?,
            class_names.ok_or_else(|| Error::parse("report", "missing class names"))?,
            rows,
        )?;
        for (k, x) in stored {
            let actual = match k.as_str() {
                "pre_attack_accuracy" => report.pre_attack_accuracy,
                "post_attack_accuracy" => report.post_attack_accuracy,
                "success_rate" => report.success_rate,
                _ => report.mean_l2,
            };
            if actual.to_bits() != x.to_bits() {
                return Err(Error::parse("report", format!("{k} {x} disagrees with rows ({actual})")));
            }
        }
        Ok(report)
    }

    pub fn save(&self, csv: &Path, table: &Path) -> Result<()> {
        write_string_atomic(csv, &self.to_csv())?;
        write_string_atomic(table, &self.to_table())
    }

    pub fn load(csv: &Path) -> Result<Self> {
        EvalReport::parse_csv(&read_to_string(csv)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::Victim;
    use crate::mesh::load_mesh_with_attributes;
    use crate::mesh::fixtures as test_meshes;
    use crate::nn::PredictionVector;
    use crate::seed;
    use rand::Rng;

    /// Predicts class `vertex_count % d`, with a fixed confidence.
    struct CountVictim(Vec<String>);

    impl Victim for CountVictim {
        fn name(&self) -> &str {
            "count"
        }
        fn class_names(&self) -> &[String] {
            &self.0
        }
        fn query(&self, mesh: &Mesh) -> Result<PredictionVector> {
            let d = self.0.len();
            let mut p = vec![0.1 / (d - 1) as f64; d];
            p[mesh.vertex_count() % d] = 0.9;
            PredictionVector::new(p)
        }
    }

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("c{i}")).collect()
    }

    fn sphere_meshes() -> Vec<Mesh> {
        (4..20)
            .map(|n| {
                let v = (0..n)
                    .map(|i| {
                        let t = i as f64 * 0.7;
                        [t.cos(), t.sin(), (i as f64 / n as f64) - 0.5]
                    })
                    .collect();
                Mesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
            })
            .collect()
    }

    #[test]
    fn accuracy_against_confusion_recount() {
        let d = 3;
        let victim = VictimHandle::new(CountVictim(names(d)));
        let meshes = sphere_meshes();
        let own: Vec<usize> = meshes.iter().map(|m| victim.classify(m).unwrap()).collect();
        assert_eq!(accuracy(&victim, &meshes, &own).unwrap(), 1.0);

        let mut rng = seed::rng(4);
        let truth: Vec<usize> = meshes.iter().map(|_| rng.random_range(0..d)).collect();
        let shifted: Vec<usize> = truth.iter().map(|l| (l + 1) % d).collect();
        let conf = confusion_matrix(&victim, &meshes, &shifted).unwrap();
        let diag: usize = (0..d).map(|c| conf[c][c]).sum();
        let mut brute = 0;
        for (m, &l) in meshes.iter().zip(&shifted) {
            if m.vertex_count() % d == l {
                brute += 1;
            }
        }
        assert_eq!(diag, brute);
        let acc = accuracy(&victim, &meshes, &shifted).unwrap();
        assert_eq!(acc, brute as f64 / meshes.len() as f64);

        let one = accuracy(&victim, &meshes[..1], &[0]).unwrap();
        assert!(one == 0.0 || one == 1.0);
        assert!(matches!(
            accuracy::<Mesh>(&victim, &[], &[]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn l2_matches_scalar_oracle() {
        let base = test_meshes::cube(0.7);
        let mut rng = seed::rng(11);
        let moved: Vec<[f64; 3]> = base
            .vertices()
            .iter()
            .map(|v| v.map(|x| x + rng.random_range(-0.05..0.05)))
            .collect();
        let attacked = base.with_vertices(moved).unwrap();

        // Independent recomputation from raw coordinates.
        let vs = base.vertices();
        let n = vs.len() as f64;
        let (mut cx, mut cy, mut cz) = (0.0, 0.0, 0.0);
        for v in vs {
            cx += v[0];
            cy += v[1];
            cz += v[2];
        }
        let c = [cx / n, cy / n, cz / n];
        let mut r: f64 = 0.0;
        for v in vs {
            let dx = v[0] - c[0];
            let dy = v[1] - c[1];
            let dz = v[2] - c[2];
            r = r.max((dx * dx + dy * dy + dz * dz).sqrt());
        }
        let mut total = 0.0;
        for (o, a) in vs.iter().zip(attacked.vertices()) {
            let dx = (a[0] - o[0]) / r;
            let dy = (a[1] - o[1]) / r;
            let dz = (a[2] - o[2]) / r;
            total += (dx * dx + dy * dy + dz * dz).sqrt();
        }
        let oracle = total / n;
        assert!((l2_distortion(&base, &attacked).unwrap() - oracle).abs() < 1e-9);
        assert_eq!(l2_distortion(&base, &base).unwrap(), 0.0);
    }

    #[test]
    fn uniform_translation_after_normalization() {
        let base = test_meshes::cube(1.0).normalize_unit_sphere().unwrap();
        let shifted = base.with_vertices(base.vertices().iter().map(|v| [v[0] + 0.1, v[1], v[2]]).collect()).unwrap();
        assert!((l2_distortion(&base, &shifted).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn l2_is_rigid_invariant() {
        let base = test_meshes::cube(0.5);
        let mut rng = seed::rng(2);
        let attacked = base
            .with_vertices(base.vertices().iter().map(|v| v.map(|x| x + rng.random_range(-0.1..0.1))).collect())
            .unwrap();
        let (s, c) = (0.3f64.sin(), 0.3f64.cos());
        let rigid = |m: &Mesh| {
            m.with_vertices(
                m.vertices()
                    .iter()
                    .map(|v| [c * v[0] - s * v[1] + 2.0, s * v[0] + c * v[1] - 1.0, v[2] + 0.5])
                    .collect(),
            )
            .unwrap()
        };
        let a = l2_distortion(&base, &attacked).unwrap();
        let b = l2_distortion(&rigid(&base), &rigid(&attacked)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn topology_mismatch() {
        let a = test_meshes::cube(1.0);
        let b = test_meshes::tetrahedron();
        assert!(matches!(l2_distortion(&a, &b), Err(Error::TopologyMismatch(_))));
        assert!(matches!(heatmap(&a, &b), Err(Error::TopologyMismatch(_))));
    }

    #[test]
    fn heatmap_cases() {
        let base = test_meshes::cube(1.0);
        assert!(heatmap(&base, &base).unwrap().values.iter().all(|&v| v == 0.0));

        let mut v = base.vertices().to_vec();
        v[3][1] += 0.2;
        let h = heatmap(&base, &base.with_vertices(v).unwrap()).unwrap();
        for (i, &x) in h.values.iter().enumerate() {
            assert_eq!(x, if i == 3 { 1.0 } else { 0.0 });
        }

        let mut rng = seed::rng(8);
        let offsets: Vec<[f64; 3]> = (0..base.vertex_count())
            .map(|_| [0; 3].map(|_| rng.random_range(-0.1..0.1)))
            .collect();
        let apply = |k: f64| {
            base.with_vertices(
                base.vertices()
                    .iter()
                    .zip(&offsets)
                    .map(|(p, o)| [p[0] + k * o[0], p[1] + k * o[1], p[2] + k * o[2]])
                    .collect(),
            )
            .unwrap()
        };
        let h1 = heatmap(&base, &apply(1.0)).unwrap();
        let h5 = heatmap(&base, &apply(5.0)).unwrap();
        assert_eq!(h1.values.iter().copied().fold(0.0, f64::max), 1.0);
        for (a, b) in h1.values.iter().zip(&h5.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn heatmap_export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = test_meshes::cube(1.0);
        let n = mesh.vertex_count();
        let heat = HeatMap {
            values: (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
        };
        let ply = dir.path().join("heat.ply");
        let csv = export_heatmap(&mesh, &heat, &ply).unwrap();
        let (_, attrs) = load_mesh_with_attributes(&ply, MeshFormat::Ply).unwrap();
        for (a, b) in attrs.quality.unwrap().iter().zip(&heat.values) {
            assert!((a - b).abs() < 1e-6);
        }
        let colors = attrs.colors.unwrap();
        assert_eq!(colors[0], [0, 0, 255]);
        assert_eq!(colors[n - 1], [255, 0, 0]);
        let text = std::fs::read_to_string(csv).unwrap();
        assert_eq!(text.lines().next(), Some("vertex_index,value"));
        assert_eq!(text.lines().count(), n + 1);

        let zero = HeatMap { values: vec![0.0; n] };
        assert!(zero.colors().iter().all(|&c| c == [0, 0, 255]));
    }

    #[test]
    fn report_round_trip_and_recount() {
        let victim = VictimHandle::new(CountVictim(names(3)));
        let meshes = sphere_meshes();
        let labeled: Vec<LabeledMesh> = meshes
            .iter()
            .enumerate()
            .map(|(i, m)| LabeledMesh {
                mesh: m.clone(),
                label: (m.vertex_count() + i % 2) % 3,
                source_id: format!("m{i}"),
            })
            .collect();
        let mut rng = seed::rng(5);
        let attacked: Vec<Mesh> = meshes
            .iter()
            .map(|m| {
                m.with_vertices(m.vertices().iter().map(|v| v.map(|x| x + rng.random_range(-0.01..0.01))).collect())
                    .unwrap()
            })
            .collect();
        let report = evaluate(&victim, &labeled, &attacked).unwrap();
        let parsed = EvalReport::parse_csv(&report.to_csv()).unwrap();
        assert_eq!(parsed, report);
        let hits = parsed.rows.iter().filter(|r| r.post_prediction == r.label).count();
        assert_eq!(parsed.post_attack_accuracy, hits as f64 / parsed.rows.len() as f64);
        assert!(report.to_csv().starts_with(&format!("# {L2_DEFINITION}")));

        let same = evaluate(&victim, &labeled, &meshes).unwrap();
        assert_eq!(same.mean_l2, 0.0);
        assert_eq!(same.pre_attack_accuracy, same.post_attack_accuracy);

        let tampered = report.to_csv().replace("# mean_l2=", "# mean_l2=1");
        assert!(EvalReport::parse_csv(&tampered).is_err());
    }
}
