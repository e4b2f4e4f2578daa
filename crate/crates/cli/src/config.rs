//! The run configuration file: one TOML table per subcommand. Every
//! subcommand writes the fully resolved configuration next to its outputs.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use walkattack::attack::AttackConfig;
use walkattack::classifiers::TrainConfig;
use walkattack::synth::{DatasetSpec, Split};
use walkattack::write_string_atomic;

pub const RESOLVED_FILE: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// When set, replaces the seed of every section.
    pub seed: Option<u64>,
    pub gen_data: DatasetSpec,
    pub walk_victim: TrainConfig,
    pub face_victim: TrainConfig,
    pub query: QuerySection,
    pub train_imitator: TrainConfig,
    pub attack: AttackSection,
    pub evaluate: EvaluateSection,
    pub gradcheck: GradcheckSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            gen_data: DatasetSpec::default(),
            walk_victim: TrainConfig::victim_default(),
            face_victim: TrainConfig::face_default(),
            query: QuerySection::default(),
            train_imitator: TrainConfig::default(),
            attack: AttackSection::default(),
            evaluate: EvaluateSection::default(),
            gradcheck: GradcheckSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuerySection {
    pub split: Split,
    /// Filled in by `query` with the name of the queried victim.
    pub victim_name: String,
}

impl Default for QuerySection {
    fn default() -> Self {
        QuerySection {
            split: Split::Train,
            victim_name: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub split: Split,
    pub alpha: f64,
    pub max_iterations: usize,
    pub walk_length: Option<usize>,
    pub stop_k: usize,
    pub seed: u64,
    pub target: Option<usize>,
    /// Written for the record; the update direction is fixed by the code.
    pub sign_convention: String,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection::from_config(Split::Test, &AttackConfig::default())
    }
}

impl AttackSection {
    pub fn from_config(split: Split, c: &AttackConfig) -> Self {
        AttackSection {
            split,
            alpha: c.alpha,
            max_iterations: c.max_iterations,
            walk_length: c.walk_length,
            stop_k: c.stop_k,
            seed: c.seed,
            target: c.target,
            sign_convention: walkattack::attack::SIGN_CONVENTION.to_string(),
        }
    }

    pub fn attack_config(&self) -> AttackConfig {
        AttackConfig {
            alpha: self.alpha,
            max_iterations: self.max_iterations,
            walk_length: self.walk_length,
            stop_k: self.stop_k,
            seed: self.seed,
            target: self.target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub split: Split,
    pub heatmaps: bool,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            split: Split::Test,
            heatmaps: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSection {
    pub configs: usize,
    pub seed: u64,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        GradcheckSection { configs: 24, seed: 0 }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                let user: toml::Table = toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?;
                RunConfig::overlay(user).with_context(|| format!("in config {}", p.display()))?
            }
        };
        if let Some(s) = cfg.seed {
            cfg.set_seed(s);
        }
        Ok(cfg)
    }

    /// Applies the keys of `user` over the defaults, table by table, so a
    /// partial section keeps the defaults of that section.
    pub fn overlay(user: toml::Table) -> Result<Self> {
        let mut base = toml::Table::try_from(RunConfig::default()).context("serializing defaults")?;
        merge(&mut base, user);
        Ok(base.try_into()?)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.gen_data.seed = seed;
        self.walk_victim.seed = seed;
        self.face_victim.seed = seed;
        self.train_imitator.seed = seed;
        self.attack.seed = seed;
        self.gradcheck.seed = seed;
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).context("serializing resolved config")?;
        write_string_atomic(&dir.join(RESOLVED_FILE), &text)?;
        Ok(())
    }
}

fn merge(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
