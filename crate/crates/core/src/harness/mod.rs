//! Seeded experiment runner: configuration, per-seed trajectories, rate fits,
//! CSV and JSON output, GAT versus GCN comparisons and the verification suite.

mod config;
mod verify;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    AttentionConfig, ExperimentConfig, GraphConfig, InitialState, ModelKind, OutputConfig, WeightConfig, OUT_ENV,
    SEED_ENV,
};
pub use verify::{verify_suite, CheckResult, Scope, VerificationReport, VerifyOptions};

use crate::attention::AttentionSpec;
use crate::dynamics::{read_weight_file, run_multi_head, Head, NonlinearitySpec, RunOptions, Series, WeightSequence};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::{fit_exponential_rate, Matrix, RateFit};

/// First line of every trajectory CSV.
pub const CSV_VERSION: &str = "# oversmooth trajectory v1";
pub const CSV_COLUMNS: &str = "seed,t,mu,dirichlet,max_abs_state,epsilon_t";

/// Fits stop before `μ` drops below this multiple of `μ(X^(0))`.
pub const FIT_FLOOR: f64 = 1e-12;

/// One seed of an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    #[serde(skip)]
    pub series: Series,
    pub fit: Option<RateFit>,
    /// Why no fit was produced.
    pub skipped: Option<String>,
    pub mu_initial: f64,
    pub mu_final: f64,
    pub min_epsilon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub burn_in: usize,
    /// Sorted by seed.
    pub runs: Vec<SeedRun>,
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn initial_state(cfg: &ExperimentConfig, n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 1));
    let d = cfg.d_in();
    match cfg.initial {
        InitialState::Normal => Matrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal)),
        InitialState::Consensus => {
            let row: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            Matrix::from_fn(n, d, |_, j| row[j])
        }
    }
}

fn load_weight_file(cfg: &ExperimentConfig) -> Result<Option<Vec<Matrix>>> {
    let WeightConfig::File { path } = &cfg.weights else { return Ok(None) };
    let mats = read_weight_file(BufReader::new(File::open(path)?))?;
    if mats.len() < cfg.depth {
        return Err(Error::Config(format!("{}: {} matrices for depth {}", path.display(), mats.len(), cfg.depth)));
    }
    Ok(Some(mats))
}

fn weights_for(cfg: &ExperimentConfig, seed: u64, file: Option<&[Matrix]>) -> Result<WeightSequence> {
    let (d_in, d, depth) = (cfg.d_in(), cfg.hidden_dim, cfg.depth);
    match &cfg.weights {
        WeightConfig::RandomA3 { init } => Ok(WeightSequence::random_a3_with(d_in, d, depth, seed, *init)),
        WeightConfig::A3Prime { xi } => WeightSequence::substochastic_a3prime(d, depth, *xi, seed),
        WeightConfig::Identity => Ok(WeightSequence::identity(d, depth)),
        WeightConfig::File { .. } => Ok(WeightSequence::user_supplied(file.expect("loaded up front").to_vec())),
    }
}

fn attention_for(cfg: &ExperimentConfig, seed: u64) -> AttentionSpec {
    let d = cfg.hidden_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 2));
    match (&cfg.model, &cfg.attention) {
        (ModelKind::GcnRandomWalk, _) | (_, AttentionConfig::Constant) => AttentionSpec::Constant,
        (_, AttentionConfig::Gat { leaky_slope, gain }) => AttentionSpec::random_gat(d, *leaky_slope, *gain, &mut rng),
        (_, AttentionConfig::GatV2 { leaky_slope, gain, hidden }) => {
            AttentionSpec::random_gatv2(d, hidden.unwrap_or(d), *leaky_slope, *gain, &mut rng)
        }
        (_, AttentionConfig::DotProduct { scale }) => AttentionSpec::DotProduct { scale: *scale },
    }
}

/// Heads for one seed. Head 0 draws from the run seed itself, so a single
/// head GAT and the GCN baseline share weights for every seed.
fn heads_for(cfg: &ExperimentConfig, seed: u64, file: Option<&[Matrix]>) -> Result<Vec<Head>> {
    let k = if cfg.model == ModelKind::Gat { cfg.heads } else { 1 };
    (0..k as u64)
        .map(|h| {
            let s = if h == 0 { seed } else { mix(seed, 100 + h) };
            Ok(Head { weights: weights_for(cfg, s, file)?, attention: attention_for(cfg, s) })
        })
        .collect()
}

/// Fit window `[burn_in, end]` where `end` is the last layer before `μ`
/// first drops below `FIT_FLOOR · μ(X^(0))`.
pub fn fit_window(mu: &[f64], burn_in: usize) -> std::result::Result<(usize, usize), String> {
    let mu0 = *mu.first().ok_or("empty series")?;
    let end = (0..mu.len()).take_while(|&t| mu[t] > 0.0 && mu[t] >= FIT_FLOOR * mu0).last();
    match end {
        Some(end) if end >= burn_in + 2 => Ok((burn_in, end)),
        Some(end) => Err(format!("mu reaches the floor at layer {} before burn-in {burn_in} + 3 points", end + 1)),
        None => Err("mu is zero at t = 0".into()),
    }
}

fn run_seed(cfg: &ExperimentConfig, g: &Graph, seed: u64, file: Option<&[Matrix]>) -> Result<SeedRun> {
    let x0 = initial_state(cfg, g.n_nodes(), seed);
    let heads = heads_for(cfg, seed, file)?;
    let opts = RunOptions { dirichlet: cfg.dirichlet, ..RunOptions::default() };
    let rec = run_multi_head(g, &x0, &heads, &cfg.nonlinearity, cfg.depth, &opts)?;
    let series = rec.series;
    let mu_initial = series.mu[0];
    let (fit, skipped) = if cfg.initial == InitialState::Consensus || mu_initial <= FIT_FLOOR * x0.max_abs() {
        (None, Some("consensus start".to_string()))
    } else {
        match fit_window(&series.mu, cfg.burn_in()) {
            Ok(w) => (Some(fit_exponential_rate(&series.mu, w)?), None),
            Err(why) => (None, Some(why)),
        }
    };
    Ok(SeedRun {
        seed,
        mu_initial,
        mu_final: *series.mu.last().expect("depth >= 2"),
        min_epsilon: series.min_epsilon(),
        fit,
        skipped,
        series,
    })
}

/// Runs every seed of `cfg` in parallel. Results are sorted by seed and do
/// not depend on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let g = cfg.graph.build()?;
    g.require_a1()?;
    let file = load_weight_file(cfg)?;
    let mut runs = cfg
        .seeds()
        .into_par_iter()
        .map(|seed| run_seed(cfg, &g, seed, file.as_deref()).map_err(|e| Error::Seeded { seed, inner: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|r| r.seed);
    Ok(ExperimentOutput {
        config: cfg.clone(),
        n_nodes: g.n_nodes(),
        n_edges: g.n_edges(),
        burn_in: cfg.burn_in(),
        runs,
    })
}

impl ExperimentOutput {
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{CSV_VERSION}")?;
        writeln!(w, "{CSV_COLUMNS}")?;
        for run in &self.runs {
            let s = &run.series;
            for t in 0..s.mu.len() {
                let eps = s.epsilon.get(t).map(|e| format!("{e:e}")).unwrap_or_default();
                writeln!(w, "{},{t},{:e},{:e},{:e},{eps}", run.seed, s.mu[t], s.dirichlet[t], s.max_abs[t])?;
            }
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("summary serializes")
    }

    /// Writes `<name>.csv` and `<name>.summary.json` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let name = &self.config.output.name;
        let csv = dir.join(format!("{name}.csv"));
        let mut w = BufWriter::new(File::create(&csv)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        let json = dir.join(format!("{name}.summary.json"));
        std::fs::write(&json, serde_json::to_string_pretty(&self.summary_json()).expect("json") + "\n")?;
        Ok(vec![csv, json])
    }

    pub fn slopes(&self) -> Vec<(u64, Option<f64>)> {
        self.runs.iter().map(|r| (r.seed, r.fit.map(|f| f.slope))).collect()
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

/// Paired GAT versus GCN slopes for one nonlinearity.
#[derive(Debug, Clone, Serialize)]
pub struct ModelComparison {
    pub nonlinearity: NonlinearitySpec,
    pub seeds: Vec<u64>,
    pub gat_slopes: Vec<Option<f64>>,
    pub gcn_slopes: Vec<Option<f64>>,
    pub gat_mean: f64,
    pub gat_std: f64,
    pub gcn_mean: f64,
    pub gcn_std: f64,
    /// Seeds where both fits exist and `slope(GCN) ≤ slope(GAT)`, over all
    /// seeds. Seeds missing a fit count against the verdict.
    pub verdict: f64,
    pub min_r_squared: f64,
}

/// Pairs two experiments seed by seed. Both must cover the same seeds.
pub fn compare_runs(gat: &ExperimentOutput, gcn: &ExperimentOutput) -> Result<ModelComparison> {
    let seeds: Vec<u64> = gat.runs.iter().map(|r| r.seed).collect();
    let other: Vec<u64> = gcn.runs.iter().map(|r| r.seed).collect();
    if seeds != other {
        return Err(Error::InvalidArgument(format!("seed sets differ: {seeds:?} vs {other:?}")));
    }
    let gat_slopes: Vec<Option<f64>> = gat.slopes().into_iter().map(|(_, s)| s).collect();
    let gcn_slopes: Vec<Option<f64>> = gcn.slopes().into_iter().map(|(_, s)| s).collect();
    let wins = gat_slopes
        .iter()
        .zip(&gcn_slopes)
        .filter(|(a, c)| matches!((a, c), (Some(a), Some(c)) if c <= a))
        .count();
    let (gat_mean, gat_std) = mean_std(&gat_slopes.iter().flatten().copied().collect::<Vec<_>>());
    let (gcn_mean, gcn_std) = mean_std(&gcn_slopes.iter().flatten().copied().collect::<Vec<_>>());
    let min_r_squared = gat
        .runs
        .iter()
        .chain(&gcn.runs)
        .filter_map(|r| r.fit.map(|f| f.r_squared))
        .fold(f64::INFINITY, f64::min);
    Ok(ModelComparison {
        nonlinearity: gat.config.nonlinearity,
        verdict: wins as f64 / seeds.len() as f64,
        seeds,
        gat_slopes,
        gcn_slopes,
        gat_mean,
        gat_std,
        gcn_mean,
        gcn_std,
        min_r_squared,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub graph: String,
    pub cells: Vec<ModelComparison>,
}

impl ComparisonReport {
    pub fn worst_verdict(&self) -> f64 {
        self.cells.iter().map(|c| c.verdict).fold(1.0, f64::min)
    }
}

/// Runs `cfg` as GAT and as the random-walk GCN for every nonlinearity in
/// `cfg.compare_nonlinearities` (or just `cfg.nonlinearity`) on the same
/// graph, inputs and weights.
pub fn compare_models(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    let grid = cfg.compare_nonlinearities.clone().unwrap_or_else(|| vec![cfg.nonlinearity]);
    let cells = grid
        .into_iter()
        .map(|nl| {
            let mut gat = cfg.clone();
            gat.nonlinearity = nl;
            gat.model = ModelKind::Gat;
            let mut gcn = gat.clone();
            gcn.model = ModelKind::GcnRandomWalk;
            compare_runs(&run_experiment(&gat)?, &run_experiment(&gcn)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport { graph: cfg.graph.describe(), cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphSpec;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(
            GraphConfig::generated(GraphSpec::ErdosRenyi { n: 10, p: 0.4 }, 3, true),
            NonlinearitySpec::LeakyRelu { slope: 0.4 },
            40,
        );
        cfg.hidden_dim = 6;
        cfg.repeats = 3;
        cfg.weights = WeightConfig::RandomA3 { init: crate::dynamics::WeightInit::Nonnegative };
        cfg
    }

    #[test]
    fn runs_are_deterministic_and_sorted() {
        let cfg = small();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 1, 2]);
        for (x, y) in a.runs.iter().zip(&b.runs) {
            assert_eq!(x.series, y.series);
        }
        let mut out = Vec::new();
        a.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_VERSION));
        assert_eq!(lines.next(), Some(CSV_COLUMNS));
        assert_eq!(lines.count(), 3 * 41);
    }

    #[test]
    fn fits_start_after_burn_in() {
        let out = run_experiment(&small()).unwrap();
        for r in &out.runs {
            let fit = r.fit.expect("fit");
            assert_eq!(fit.window.0, out.burn_in);
            assert!(fit.slope < 0.0);
        }
    }

    #[test]
    fn consensus_start_is_skipped() {
        let mut cfg = small();
        cfg.initial = InitialState::Consensus;
        let out = run_experiment(&cfg).unwrap();
        for r in &out.runs {
            assert!(r.fit.is_none());
            assert_eq!(r.skipped.as_deref(), Some("consensus start"));
            assert!(r.series.mu.iter().all(|&m| m < 1e-12));
        }
    }

    #[test]
    fn fit_window_rules() {
        let mu: Vec<f64> = (0..30).map(|t| (-(t as f64)).exp()).collect();
        assert_eq!(fit_window(&mu, 8), Ok((8, 27)));
        let fast: Vec<f64> = (0..30).map(|t| (-5.0 * t as f64).exp()).collect();
        assert!(fit_window(&fast, 8).is_err());
    }

    #[test]
    fn comparison_needs_matching_seeds() {
        let cfg = small();
        let a = run_experiment(&cfg).unwrap();
        let mut other = cfg.clone();
        other.seed = 5;
        let b = run_experiment(&other).unwrap();
        assert!(compare_runs(&a, &b).is_err());
        let c = compare_runs(&a, &a).unwrap();
        assert_eq!(c.verdict, 1.0);
    }

    #[test]
    fn bipartite_graph_is_rejected() {
        let mut cfg = small();
        cfg.graph = GraphConfig::generated(GraphSpec::Cycle { n: 4 }, 0, false);
        assert!(matches!(run_experiment(&cfg), Err(Error::A1Violated(_))));
    }
}
