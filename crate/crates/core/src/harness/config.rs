use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{NonlinearitySpec, WeightInit};
use crate::error::{Error, Result};
use crate::graph::{generate_graph, largest_connected_component, load_edge_list, Graph, GraphSpec};
use crate::measures::DirichletConvention;

pub const SEED_ENV: &str = "OVERSMOOTH_SEED";
pub const OUT_ENV: &str = "OVERSMOOTH_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// `erdos_renyi`, `cycle`, `complete`, `star`, `path` or `edge_list`.
    pub kind: String,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub self_loops: bool,
}

impl GraphConfig {
    pub fn generated(spec: GraphSpec, seed: u64, self_loops: bool) -> Self {
        let (kind, n, p) = match spec {
            GraphSpec::ErdosRenyi { n, p } => ("erdos_renyi", n, Some(p)),
            GraphSpec::Cycle { n } => ("cycle", n, None),
            GraphSpec::Complete { n } => ("complete", n, None),
            GraphSpec::Star { n } => ("star", n, None),
            GraphSpec::Path { n } => ("path", n, None),
        };
        GraphConfig { kind: kind.into(), n: Some(n), p, path: None, seed, self_loops }
    }

    fn spec(&self) -> Result<Option<GraphSpec>> {
        let n = || self.n.ok_or_else(|| Error::Config(format!("graph.n is required for kind {:?}", self.kind)));
        Ok(Some(match self.kind.as_str() {
            "erdos_renyi" => GraphSpec::ErdosRenyi {
                n: n()?,
                p: self.p.ok_or_else(|| Error::Config("graph.p is required for erdos_renyi".into()))?,
            },
            "cycle" => GraphSpec::Cycle { n: n()? },
            "complete" => GraphSpec::Complete { n: n()? },
            "star" => GraphSpec::Star { n: n()? },
            "path" => GraphSpec::Path { n: n()? },
            "edge_list" => return Ok(None),
            other => return Err(Error::Config(format!("unknown graph.kind {other:?}"))),
        }))
    }

    /// Builds the graph. Edge lists are reduced to their largest connected
    /// component.
    pub fn build(&self) -> Result<Graph> {
        match self.spec()? {
            Some(spec) => generate_graph(spec, self.seed, self.self_loops),
            None => {
                let path = self.path.as_ref().ok_or_else(|| Error::Config("graph.path is required for edge_list".into()))?;
                let g = load_edge_list(path, self.self_loops)?;
                Ok(largest_connected_component(&g).0)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self.spec() {
            Ok(Some(spec)) => format!("{spec} seed {}{}", self.seed, if self.self_loops { " +loops" } else { "" }),
            _ => format!("edge_list {:?}", self.path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gat,
    GcnRandomWalk,
}

/// Attention family and the scale of its randomly drawn parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttentionConfig {
    Gat {
        #[serde(default = "default_leaky")]
        leaky_slope: f64,
        #[serde(default = "default_gain")]
        gain: f64,
    },
    GatV2 {
        #[serde(default = "default_leaky")]
        leaky_slope: f64,
        #[serde(default = "default_gain")]
        gain: f64,
        hidden: Option<usize>,
    },
    DotProduct {
        scale: Option<f64>,
    },
    Constant,
}

fn default_leaky() -> f64 {
    0.2
}

fn default_gain() -> f64 {
    1.0
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig::Gat { leaky_slope: default_leaky(), gain: default_gain() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightConfig {
    RandomA3 {
        #[serde(default)]
        init: WeightInit,
    },
    A3Prime {
        #[serde(default = "default_xi")]
        xi: f64,
    },
    Identity,
    File {
        path: PathBuf,
    },
}

fn default_xi() -> f64 {
    0.1
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig::RandomA3 { init: WeightInit::Signed }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// I.i.d. standard normal entries.
    #[default]
    Normal,
    /// Identical rows drawn from a standard normal.
    Consensus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    #[serde(default = "default_name")]
    pub name: String,
}

fn default_name() -> String {
    "run".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, name: default_name() }
    }
}

/// One experiment: a graph, a model and a set of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default)]
    pub attention: AttentionConfig,
    /// Heads averaged per layer (GAT only).
    #[serde(default = "default_heads")]
    pub heads: usize,
    pub nonlinearity: NonlinearitySpec,
    pub depth: usize,
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    /// Columns of `X^(0)`; defaults to `hidden_dim`.
    pub input_dim: Option<usize>,
    #[serde(default)]
    pub weights: WeightConfig,
    /// First run seed; runs use `seed..seed + repeats`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub initial: InitialState,
    /// Defaults to `max(8, depth / 10)`.
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub dirichlet: DirichletConvention,
    /// Nonlinearities swept by `compare`; defaults to `[nonlinearity]`.
    pub compare_nonlinearities: Option<Vec<NonlinearitySpec>>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_model() -> ModelKind {
    ModelKind::Gat
}

fn default_heads() -> usize {
    1
}

fn default_hidden() -> usize {
    32
}

fn default_repeats() -> usize {
    1
}

impl ExperimentConfig {
    /// A GAT experiment with default settings on `graph`.
    pub fn new(graph: GraphConfig, nonlinearity: NonlinearitySpec, depth: usize) -> Self {
        ExperimentConfig {
            graph,
            model: ModelKind::Gat,
            attention: AttentionConfig::default(),
            heads: 1,
            nonlinearity,
            depth,
            hidden_dim: default_hidden(),
            input_dim: None,
            weights: WeightConfig::default(),
            seed: 0,
            repeats: 1,
            initial: InitialState::Normal,
            burn_in: None,
            dirichlet: DirichletConvention::Unnormalized,
            compare_nonlinearities: None,
            output: OutputConfig::default(),
        }
    }

    /// Parses TOML and resolves relative paths against `base_dir`.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(base) = base_dir {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            if let Some(p) = cfg.graph.path.as_mut() {
                fix(p);
            }
            if let WeightConfig::File { path } = &mut cfg.weights {
                fix(path);
            }
            if let Some(p) = cfg.output.dir.as_mut() {
                fix(p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent())
    }

    /// Applies `OVERSMOOTH_SEED` and `OVERSMOOTH_OUT` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(s) = std::env::var(SEED_ENV) {
            self.seed = s.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}={s:?} is not a seed")))?;
        }
        if let Ok(dir) = std::env::var(OUT_ENV) {
            self.output.dir = Some(PathBuf::from(dir));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::Config(format!("depth must be at least 2, got {}", self.depth)));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.hidden_dim == 0 || self.input_dim == Some(0) {
            return Err(Error::Config("feature dimensions must be positive".into()));
        }
        if self.heads == 0 {
            return Err(Error::Config("heads must be at least 1".into()));
        }
        self.nonlinearity.validate().map_err(|e| Error::Config(format!("nonlinearity: {e}")))?;
        for nl in self.compare_nonlinearities.iter().flatten() {
            nl.validate().map_err(|e| Error::Config(format!("compare_nonlinearities: {e}")))?;
        }
        self.graph.spec()?;
        if let Some(p) = &self.graph.path {
            if !p.exists() {
                return Err(Error::Config(format!("graph.path {} does not exist", p.display())));
            }
        }
        match &self.weights {
            WeightConfig::File { path } if !path.exists() => {
                return Err(Error::Config(format!("weights.path {} does not exist", path.display())));
            }
            WeightConfig::A3Prime { xi } if !(*xi > 0.0 && xi * (self.hidden_dim as f64) <= 1.0) => {
                return Err(Error::Config(format!(
                    "weights.xi = {xi} needs 0 < xi <= 1/hidden_dim = {}",
                    1.0 / self.hidden_dim as f64
                )));
            }
            WeightConfig::A3Prime { .. } | WeightConfig::Identity if self.d_in() != self.hidden_dim => {
                return Err(Error::Config("square weight kinds need input_dim == hidden_dim".into()));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn d_in(&self) -> usize {
        self.input_dim.unwrap_or(self.hidden_dim)
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or_else(|| (self.depth / 10).max(8))
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64).map(|k| self.seed + k).collect()
    }
}
