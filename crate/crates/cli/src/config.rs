//! The JSON experiment configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use segia_core::attack::AttackConfig;
use segia_core::defense::Theorem1Options;
use segia_core::graph::{generate_synthetic, largest_connected_component, load_graph, GraphPaths, SyntheticSpec};
use segia_core::surrogate::{SurrogateModel, TrainConfig, Variant};
use segia_core::{Graph, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    Synthetic(SyntheticSpec),
    /// Directory holding `edges.csv`, `features.csv`, `labels.csv` and
    /// `splits.json`.
    Dir(PathBuf),
    Files(GraphPaths),
}

impl Default for GraphSource {
    fn default() -> Self {
        GraphSource::Synthetic(SyntheticSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    pub source: GraphSource,
    /// Keep only the largest connected component of a loaded graph.
    pub largest_component: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            source: GraphSource::default(),
            largest_component: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub variant: Variant,
    /// Pruning threshold, used by PrSGC only.
    pub epsilon: f64,
    /// Hidden width, used by GCN2 only.
    pub hidden: usize,
    pub train: TrainConfig,
    /// Load weights from this file instead of training.
    pub checkpoint: Option<PathBuf>,
}

impl ModelSpec {
    fn with_variant(variant: Variant) -> Self {
        ModelSpec {
            variant,
            epsilon: 0.1,
            hidden: 16,
            train: TrainConfig::default(),
            checkpoint: None,
        }
    }

    pub fn init(&self, g: &Graph, seed: u64) -> Result<Model> {
        Ok(SurrogateModel::init(
            self.variant,
            g.n_features(),
            g.n_classes(),
            self.hidden,
            self.epsilon,
            seed,
        )?)
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::with_variant(Variant::Sgc)
    }
}

fn default_victim() -> ModelSpec {
    ModelSpec::with_variant(Variant::Gcn2)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepAxes {
    pub alpha: Vec<f64>,
    pub depth: Vec<usize>,
    pub perturbation_rate: Vec<f64>,
}

impl SweepAxes {
    pub fn n_cells(&self) -> usize {
        self.alpha.len() * self.depth.len() * self.perturbation_rate.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    pub surrogate: ModelSpec,
    #[serde(default = "default_victim")]
    pub victim: ModelSpec,
    pub attack: AttackConfig,
    /// Threshold of the pruning defender; defaults to the attack's `epsilon`.
    pub defense_epsilon: Option<f64>,
    pub sweep: SweepAxes,
    pub theorem1: Theorem1Options,
    /// Independent attack runs per `attack` invocation.
    pub n_seeds: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            graph: GraphConfig::default(),
            surrogate: ModelSpec::default(),
            victim: default_victim(),
            attack: AttackConfig::default(),
            defense_epsilon: None,
            sweep: SweepAxes::default(),
            theorem1: Theorem1Options::default(),
            n_seeds: 1,
            seed: 0,
            out: None,
            jobs: 1,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Applies overrides and fills derived defaults. The attack seed follows
    /// the global seed.
    pub fn resolve(mut self, overrides: &Overrides) -> Self {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(out) = &overrides.out {
            self.out = Some(out.clone());
        }
        if let Some(jobs) = overrides.jobs {
            self.jobs = jobs;
        }
        self.attack.seed = self.seed;
        self.defense_epsilon.get_or_insert(self.attack.epsilon);
        self
    }

    pub fn defense_epsilon(&self) -> f64 {
        self.defense_epsilon.unwrap_or(self.attack.epsilon)
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .context("no output directory: pass --out or set \"out\" in the config")
    }

    pub fn validate(&self) -> Result<()> {
        self.attack.validate()?;
        ensure!(self.n_seeds >= 1, "n_seeds must be at least 1");
        ensure!(self.jobs >= 1, "jobs must be at least 1");
        let eps = self.defense_epsilon();
        ensure!((-1.0..=1.0).contains(&eps), "defense epsilon {eps} outside [-1, 1]");
        let paths = match &self.graph.source {
            GraphSource::Synthetic(spec) => {
                spec.validate()?;
                None
            }
            GraphSource::Dir(dir) => Some(GraphPaths::in_dir(dir)),
            GraphSource::Files(paths) => Some(paths.clone()),
        };
        if let Some(p) = paths {
            for f in [&p.edges, &p.features, &p.labels, &p.splits] {
                ensure!(f.exists(), "graph file {} does not exist", f.display());
            }
        }
        for spec in [&self.surrogate, &self.victim] {
            if let Some(ck) = &spec.checkpoint {
                ensure!(ck.exists(), "checkpoint {} does not exist", ck.display());
            }
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> Result<()> {
        let axes = &self.sweep;
        for (name, empty) in [
            ("alpha", axes.alpha.is_empty()),
            ("depth", axes.depth.is_empty()),
            ("perturbation_rate", axes.perturbation_rate.is_empty()),
        ] {
            if empty {
                bail!("sweep axis `{name}` is empty");
            }
        }
        Ok(())
    }

    pub fn load_graph(&self) -> Result<Graph> {
        let g: Graph = match &self.graph.source {
            GraphSource::Synthetic(spec) => generate_synthetic(spec)?,
            GraphSource::Dir(dir) => load_graph(&GraphPaths::in_dir(dir))?,
            GraphSource::Files(paths) => load_graph(paths)?,
        };
        Ok(if self.graph.largest_component {
            largest_connected_component(&g)?
        } else {
            g
        })
    }
}
