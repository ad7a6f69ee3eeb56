//! Layer dynamics `X^(t+1) = σ(P^(t) X^(t) W^(t))`.
//!
//! Every run records the aggregation operators and the diagonal gates
//! `D = Diag(σ(y)/y)` so that the trajectory can be replayed as a product of
//! linear maps: the path-sum column expansion and the Kronecker form are both
//! checked against the recorded states.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{aggregation_operator, attention_scores, AggregationOperator, AttentionSpec};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::measures::{dirichlet_energy, mu, DirichletConvention};
use crate::numerics::Matrix;

/// Pointwise activation. All shipped kinds satisfy `0 ≤ σ(x)/x ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearitySpec {
    Identity,
    Relu,
    LeakyRelu { slope: f64 },
    Gelu,
    Silu,
    Tanh,
    Elu { alpha: f64 },
}

impl std::fmt::Display for NonlinearitySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NonlinearitySpec::Identity => write!(f, "identity"),
            NonlinearitySpec::Relu => write!(f, "relu"),
            NonlinearitySpec::LeakyRelu { slope } => write!(f, "leaky_relu({slope})"),
            NonlinearitySpec::Gelu => write!(f, "gelu"),
            NonlinearitySpec::Silu => write!(f, "silu"),
            NonlinearitySpec::Tanh => write!(f, "tanh"),
            NonlinearitySpec::Elu { alpha } => write!(f, "elu({alpha})"),
        }
    }
}

/// Tolerance on `σ(x)/x ≤ 1`.
pub const A4_TOL: f64 = 1e-12;

impl NonlinearitySpec {
    /// Every kind with default parameters, plus the leaky slopes used in
    /// experiments.
    pub fn shipped() -> Vec<NonlinearitySpec> {
        vec![
            NonlinearitySpec::Identity,
            NonlinearitySpec::Relu,
            NonlinearitySpec::LeakyRelu { slope: 0.01 },
            NonlinearitySpec::LeakyRelu { slope: 0.2 },
            NonlinearitySpec::LeakyRelu { slope: 0.4 },
            NonlinearitySpec::LeakyRelu { slope: 0.8 },
            NonlinearitySpec::Gelu,
            NonlinearitySpec::Silu,
            NonlinearitySpec::Tanh,
            NonlinearitySpec::Elu { alpha: 1.0 },
            NonlinearitySpec::Elu { alpha: 0.5 },
        ]
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            NonlinearitySpec::Identity => x,
            NonlinearitySpec::Relu => x.max(0.0),
            NonlinearitySpec::LeakyRelu { slope } => {
                if x >= 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            NonlinearitySpec::Gelu => x * 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2),
            NonlinearitySpec::Silu => x / (1.0 + (-x).exp()),
            NonlinearitySpec::Tanh => x.tanh(),
            NonlinearitySpec::Elu { alpha } => {
                if x >= 0.0 {
                    x
                } else {
                    alpha * x.exp_m1()
                }
            }
        }
    }

    /// Value assigned to `σ(0)/0`: 1 where the derivative at 0 is undefined
    /// or equals 1, otherwise `σ'(0)`.
    pub fn zero_ratio(&self) -> f64 {
        match self {
            NonlinearitySpec::Gelu | NonlinearitySpec::Silu => 0.5,
            _ => 1.0,
        }
    }

    /// `σ(x)/x`, or [`zero_ratio`](Self::zero_ratio) at 0.
    pub fn ratio(&self, x: f64) -> f64 {
        if x == 0.0 {
            self.zero_ratio()
        } else {
            self.eval(x) / x
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NonlinearitySpec::LeakyRelu { slope } if !(0.0..=1.0).contains(&slope) => Err(
                Error::InvalidArgument(format!("leaky_relu slope {slope} outside [0, 1]")),
            ),
            NonlinearitySpec::Elu { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                Err(Error::InvalidArgument(format!("elu alpha {alpha} outside (0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// Outcome of the A4 grid check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A4Report {
    pub spec: String,
    pub passed: bool,
    pub sigma_zero: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// First grid point where the check failed.
    pub worst_x: Option<f64>,
}

/// Checks `σ(0) = 0` and `0 ≤ σ(x)/x ≤ 1 + 1e-12` on `points` evenly spaced
/// values in `[−50, 50]`, skipping 0.
pub fn a4_grid_check(spec: &NonlinearitySpec, points: usize) -> A4Report {
    let sigma_zero = spec.eval(0.0);
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    let mut worst_x = None;
    let last = points.max(2) - 1;
    for k in 0..=last {
        let x = -50.0 + 100.0 * k as f64 / last as f64;
        if x == 0.0 {
            continue;
        }
        let r = spec.eval(x) / x;
        min_ratio = min_ratio.min(r);
        max_ratio = max_ratio.max(r);
        if worst_x.is_none() && !(0.0..=1.0 + A4_TOL).contains(&r) {
            worst_x = Some(x);
        }
    }
    A4Report {
        spec: spec.to_string(),
        passed: sigma_zero == 0.0 && worst_x.is_none() && spec.validate().is_ok(),
        sigma_zero,
        min_ratio,
        max_ratio,
        worst_x,
    }
}

/// One column's gate `D_i = Diag(σ(y)/y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalGate {
    pub diag: Vec<f64>,
    /// `‖D − I‖_∞ = max_i (1 − diag_i)`.
    pub delta: f64,
}

impl DiagonalGate {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if let Some((k, &v)) = diag.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("gate entry {k} = {v} outside [0, 1]")));
        }
        let delta = diag.iter().map(|d| 1.0 - d).fold(0.0, f64::max);
        Ok(DiagonalGate { diag, delta })
    }

    pub fn identity(n: usize) -> Self {
        DiagonalGate { diag: vec![1.0; n], delta: 0.0 }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.diag.iter().zip(v).map(|(d, x)| d * x).collect()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_diag(&self.diag)
    }
}

/// Applies `σ` entrywise and extracts one gate per column. Fails if an actual
/// entry of `y` breaks `0 ≤ σ(y)/y ≤ 1`.
pub fn apply_nonlinearity(spec: &NonlinearitySpec, y: &Matrix) -> Result<(Matrix, Vec<DiagonalGate>)> {
    spec.validate()?;
    let (n, d) = y.shape();
    let mut z = Matrix::zeros(n, d);
    let mut gates = Vec::with_capacity(d);
    for c in 0..d {
        let mut diag = Vec::with_capacity(n);
        for r in 0..n {
            let x = y[(r, c)];
            let s = spec.eval(x);
            z[(r, c)] = s;
            let ratio = if x == 0.0 { spec.zero_ratio() } else { s / x };
            if !(-A4_TOL..=1.0 + A4_TOL).contains(&ratio) {
                return Err(Error::A4Violated { row: r, col: c, x, ratio });
            }
            diag.push(ratio.clamp(0.0, 1.0));
        }
        gates.push(DiagonalGate::new(diag)?);
    }
    Ok((z, gates))
}

/// Entry distribution for [`WeightSequence::random_a3`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightInit {
    /// Uniform on `(−1, 1)`.
    #[default]
    Signed,
    /// Uniform on `[0, 1)`.
    Nonnegative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightProvenance {
    RandomA3 { seed: u64, init: WeightInit },
    SubstochasticA3Prime { seed: u64, xi: f64 },
    Identity,
    UserSupplied,
}

/// Per-layer weights `W^(0), W^(1), …`. `W^(0)` may be `d_in × d`, the rest
/// are `d × d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    pub mats: Vec<Matrix>,
    pub provenance: WeightProvenance,
}

impl WeightSequence {
    /// Uniform `(−1, 1)` entries, each matrix rescaled to `‖|W|‖_∞ = 1`.
    pub fn random_a3(d_in: usize, d: usize, depth: usize, seed: u64) -> Self {
        Self::random_a3_with(d_in, d, depth, seed, WeightInit::Signed)
    }

    /// As [`random_a3`](Self::random_a3) with a choice of entry distribution.
    /// Signed entries cancel, so `‖W‖₂` is roughly `2/√d` and states shrink
    /// quickly at large `d`; nonnegative entries keep `‖W‖₂` near 1.
    pub fn random_a3_with(d_in: usize, d: usize, depth: usize, seed: u64, init: WeightInit) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = match init {
            WeightInit::Signed => -1.0,
            WeightInit::Nonnegative => 0.0,
        };
        let mats = (0..depth)
            .map(|t| {
                let rows = if t == 0 { d_in } else { d };
                let w = Matrix::from_fn(rows, d, |_, _| rng.random_range(lo..1.0));
                let norm = w.abs().row_sums().into_iter().fold(0.0, f64::max);
                if norm > 0.0 {
                    w.scale(1.0 / norm)
                } else {
                    w
                }
            })
            .collect();
        WeightSequence { mats, provenance: WeightProvenance::RandomA3 { seed, init } }
    }

    /// Column-stochastic `d × d` matrices with a random symmetric sparsity
    /// pattern containing the diagonal and every nonzero at least `xi`.
    #[allow(clippy::needless_range_loop)]
    pub fn substochastic_a3prime(d: usize, depth: usize, xi: f64, seed: u64) -> Result<Self> {
        if !(xi > 0.0 && xi < 1.0) || xi * d as f64 > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "xi = {xi} must lie in (0, 1) with xi * d <= 1 (d = {d})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mats = Vec::with_capacity(depth);
        for _ in 0..depth {
            let mut support = vec![vec![false; d]; d];
            for i in 0..d {
                support[i][i] = true;
                for j in i + 1..d {
                    if rng.random::<f64>() < 0.5 {
                        support[i][j] = true;
                        support[j][i] = true;
                    }
                }
            }
            let mut w = Matrix::zeros(d, d);
            for j in 0..d {
                let rows: Vec<usize> = (0..d).filter(|&i| support[i][j]).collect();
                let spare = 1.0 - xi * rows.len() as f64;
                let raw: Vec<f64> = rows.iter().map(|_| rng.random::<f64>()).collect();
                let total: f64 = raw.iter().sum();
                for (&i, r) in rows.iter().zip(&raw) {
                    w[(i, j)] = xi + spare * r / total;
                }
            }
            mats.push(w);
        }
        Ok(WeightSequence { mats, provenance: WeightProvenance::SubstochasticA3Prime { seed, xi } })
    }

    pub fn identity(d: usize, depth: usize) -> Self {
        WeightSequence { mats: vec![Matrix::identity(d); depth], provenance: WeightProvenance::Identity }
    }

    pub fn user_supplied(mats: Vec<Matrix>) -> Self {
        WeightSequence { mats, provenance: WeightProvenance::UserSupplied }
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }
}

/// Reads matrices written one row per line, blocks separated by `---`.
/// Blank lines and `#` comments are ignored.
pub fn read_weight_file(reader: impl BufRead) -> Result<Vec<Matrix>> {
    let mut mats = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut flush = |rows: &mut Vec<Vec<f64>>, line: usize| -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let m = Matrix::from_rows(rows).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        mats.push(m);
        rows.clear();
        Ok(())
    };
    let mut last = 0;
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        last = k + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if body == "---" {
            flush(&mut rows, last)?;
            continue;
        }
        let row = body
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::Parse { line: last, msg: format!("bad number {tok:?}") })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: last,
                    msg: format!("row has {} entries, block started with {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    flush(&mut rows, last)?;
    Ok(mats)
}

pub fn write_weight_file(mats: &[Matrix], mut w: impl Write) -> Result<()> {
    for (k, m) in mats.iter().enumerate() {
        if k > 0 {
            writeln!(w, "---")?;
        }
        for i in 0..m.rows() {
            let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    Ok(())
}

/// How the aggregation operator of each layer is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Aggregation {
    Attention(AttentionSpec),
    /// The same operator at every layer.
    Fixed(Matrix),
}

/// How the diagonal gates of each layer are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Activation {
    Pointwise(NonlinearitySpec),
    /// Fixed per-column gate diagonals, `gates[c]` has one entry per node.
    FixedGates(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerRule {
    pub aggregation: Aggregation,
    pub activation: Activation,
}

impl LayerRule {
    pub fn new(aspec: AttentionSpec, nspec: NonlinearitySpec) -> Self {
        LayerRule { aggregation: Aggregation::Attention(aspec), activation: Activation::Pointwise(nspec) }
    }
}

/// Result of one layer.
#[derive(Debug, Clone)]
pub struct Step {
    pub x: Matrix,
    pub operator: AggregationOperator,
    pub gates: Vec<DiagonalGate>,
    pub preactivation: Matrix,
}

fn edge_min(p: &Matrix, g: &Graph) -> f64 {
    g.directed_edges().map(|(i, j)| p[(i, j)]).fold(f64::INFINITY, f64::min)
}

fn step_with(x: &Matrix, w: &Matrix, rule: &LayerRule, g: &Graph) -> Result<Step> {
    if x.cols() != w.rows() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} columns, W has {} rows",
            x.cols(),
            w.rows()
        )));
    }
    let operator = match &rule.aggregation {
        Aggregation::Attention(spec) => aggregation_operator(&attention_scores(x, w, spec, g)?, g)?,
        Aggregation::Fixed(p) => {
            if p.shape() != (g.n_nodes(), g.n_nodes()) {
                return Err(Error::DimensionMismatch(format!(
                    "fixed operator is {}x{} for {} nodes",
                    p.rows(),
                    p.cols(),
                    g.n_nodes()
                )));
            }
            AggregationOperator { p: p.clone(), epsilon: edge_min(p, g) }
        }
    };
    let preactivation = operator.p.try_matmul(&x.try_matmul(w)?)?;
    let (z, gates) = match &rule.activation {
        Activation::Pointwise(spec) => apply_nonlinearity(spec, &preactivation)?,
        Activation::FixedGates(diags) => {
            if diags.len() != preactivation.cols() || diags.iter().any(|d| d.len() != preactivation.rows()) {
                return Err(Error::DimensionMismatch("fixed gates do not match the layer output".into()));
            }
            let gates = diags.iter().cloned().map(DiagonalGate::new).collect::<Result<Vec<_>>>()?;
            let mut z = preactivation.clone();
            for (c, gate) in gates.iter().enumerate() {
                z.set_column(c, &gate.apply(&preactivation.column(c)));
            }
            (z, gates)
        }
    };
    Ok(Step { x: z, operator, gates, preactivation })
}

/// One layer: `P` from attention on `XW`, then `X′ = σ(PXW)`.
pub fn layer_step(
    x: &Matrix,
    w: &Matrix,
    aspec: &AttentionSpec,
    nspec: &NonlinearitySpec,
    g: &Graph,
) -> Result<Step> {
    step_with(x, w, &LayerRule::new(aspec.clone(), *nspec), g)
}

/// Per-layer scalar summaries. `mu`, `dirichlet` and `max_abs` have one entry
/// per state, `epsilon` one per layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Series {
    pub mu: Vec<f64>,
    pub dirichlet: Vec<f64>,
    pub max_abs: Vec<f64>,
    pub epsilon: Vec<f64>,
}

impl Series {
    fn push_state(&mut self, x: &Matrix, g: &Graph, conv: DirichletConvention) -> Result<()> {
        self.mu.push(mu(x));
        self.dirichlet.push(dirichlet_energy(x, g, conv)?);
        self.max_abs.push(x.max_abs());
        Ok(())
    }

    /// Smallest edge entry over all recorded operators.
    pub fn min_epsilon(&self) -> f64 {
        self.epsilon.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub dirichlet: DirichletConvention,
    /// Abort once `‖X‖_max` exceeds this.
    pub overflow_bound: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { dirichlet: DirichletConvention::Unnormalized, overflow_bound: 1e12 }
    }
}

/// Everything produced by a single-head run of `depth` layers.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub states: Vec<Matrix>,
    pub operators: Vec<Matrix>,
    /// `gates[t][c]` is the gate of column `c` at layer `t`.
    pub gates: Vec<Vec<DiagonalGate>>,
    pub preactivations: Vec<Matrix>,
    pub weights: Vec<Matrix>,
    pub series: Series,
}

impl TrajectoryRecord {
    pub fn depth(&self) -> usize {
        self.operators.len()
    }
}

fn guard(x: &Matrix, layer: usize, bound: f64) -> Result<()> {
    if x.first_non_finite().is_some() {
        return Err(Error::Overflow { layer, value: f64::INFINITY });
    }
    let m = x.max_abs();
    if m > bound {
        return Err(Error::Overflow { layer, value: m });
    }
    Ok(())
}

pub fn run_trajectory(
    g: &Graph,
    x0: &Matrix,
    weights: &WeightSequence,
    rule: &LayerRule,
    depth: usize,
) -> Result<TrajectoryRecord> {
    run_trajectory_with(g, x0, weights, rule, depth, &RunOptions::default())
}

pub fn run_trajectory_with(
    g: &Graph,
    x0: &Matrix,
    weights: &WeightSequence,
    rule: &LayerRule,
    depth: usize,
    opts: &RunOptions,
) -> Result<TrajectoryRecord> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    if weights.len() < depth {
        return Err(Error::InvalidArgument(format!(
            "{} weight matrices for {depth} layers",
            weights.len()
        )));
    }
    if x0.rows() != g.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "X0 has {} rows for {} nodes",
            x0.rows(),
            g.n_nodes()
        )));
    }
    guard(x0, 0, opts.overflow_bound)?;
    let mut rec = TrajectoryRecord {
        states: vec![x0.clone()],
        operators: Vec::with_capacity(depth),
        gates: Vec::with_capacity(depth),
        preactivations: Vec::with_capacity(depth),
        weights: weights.mats[..depth].to_vec(),
        series: Series::default(),
    };
    rec.series.push_state(x0, g, opts.dirichlet)?;
    for t in 0..depth {
        let step = step_with(&rec.states[t], &weights.mats[t], rule, g)?;
        guard(&step.x, t + 1, opts.overflow_bound)?;
        rec.series.push_state(&step.x, g, opts.dirichlet)?;
        rec.series.epsilon.push(step.operator.epsilon);
        rec.operators.push(step.operator.p);
        rec.gates.push(step.gates);
        rec.preactivations.push(step.preactivation);
        rec.states.push(step.x);
    }
    Ok(rec)
}

/// One attention head: its own weights and attention parameters.
#[derive(Debug, Clone)]
pub struct Head {
    pub weights: WeightSequence,
    pub attention: AttentionSpec,
}

/// States and summaries of a multi-head run. `epsilon` is the minimum over
/// heads per layer.
#[derive(Debug, Clone)]
pub struct MultiHeadRecord {
    pub states: Vec<Matrix>,
    pub series: Series,
}

/// Runs `X^(t+1) = (1/K) Σ_k σ(P_k^(t) X^(t) W_k^(t))`.
pub fn run_multi_head(
    g: &Graph,
    x0: &Matrix,
    heads: &[Head],
    nspec: &NonlinearitySpec,
    depth: usize,
    opts: &RunOptions,
) -> Result<MultiHeadRecord> {
    if heads.is_empty() {
        return Err(Error::InvalidArgument("need at least one head".into()));
    }
    if depth == 0 || heads.iter().any(|h| h.weights.len() < depth) {
        return Err(Error::InvalidArgument(format!("every head needs {depth} >= 1 weight matrices")));
    }
    guard(x0, 0, opts.overflow_bound)?;
    let mut series = Series::default();
    series.push_state(x0, g, opts.dirichlet)?;
    let mut states = vec![x0.clone()];
    for t in 0..depth {
        let mut outs = Vec::with_capacity(heads.len());
        let mut eps = f64::INFINITY;
        for h in heads {
            let rule = LayerRule::new(h.attention.clone(), *nspec);
            let step = step_with(&states[t], &h.weights.mats[t], &rule, g)?;
            eps = eps.min(step.operator.epsilon);
            outs.push(step.x);
        }
        let x = crate::attention::multi_head_average(&outs)?;
        guard(&x, t + 1, opts.overflow_bound)?;
        series.push_state(&x, g, opts.dirichlet)?;
        series.epsilon.push(eps);
        states.push(x);
    }
    Ok(MultiHeadRecord { states, series })
}

/// Maximum number of index paths [`verify_column_expansion`] will enumerate.
pub const EXPANSION_BUDGET: usize = 1_000_000;

/// Recomputes `X^(t+1)` for `t ≤ upto_t` as an explicit sum over index paths
/// `j_0 → j_1 → … → j_{t+1}`:
///
/// `X^(t+1)_{·i} = Σ (Π_k W^(k)_{j_k j_{k+1}}) D^(t)_{j_{t+1}} P^(t) ⋯ D^(0)_{j_1} P^(0) X^(0)_{·j_0}`
///
/// using the recorded operators and gates, and returns the largest absolute
/// deviation from the recorded states.
pub fn verify_column_expansion(rec: &TrajectoryRecord, upto_t: usize) -> Result<f64> {
    if upto_t >= rec.depth() {
        return Err(Error::InvalidArgument(format!(
            "upto_t = {upto_t} but the record has {} layers",
            rec.depth()
        )));
    }
    let d_in = rec.states[0].cols();
    let d = rec.weights[0].cols();
    let paths = (d_in as f64) * (d as f64).powi(upto_t as i32 + 1);
    if paths > EXPANSION_BUDGET as f64 {
        return Err(Error::BudgetExceeded(format!("{paths} index paths exceed {EXPANSION_BUDGET}")));
    }

    struct Walk<'a> {
        rec: &'a TrajectoryRecord,
        last: usize,
        out: Vec<Vec<f64>>,
    }

    impl Walk<'_> {
        fn visit(&mut self, k: usize, j: usize, v: &[f64], coef: f64) {
            let pv = self.rec.operators[k].mul_vec(v);
            let w = &self.rec.weights[k];
            for next in 0..w.cols() {
                let c = coef * w[(j, next)];
                if c == 0.0 {
                    continue;
                }
                let gated = self.rec.gates[k][next].apply(&pv);
                if k == self.last {
                    for (o, g) in self.out[next].iter_mut().zip(&gated) {
                        *o += c * g;
                    }
                } else {
                    self.visit(k + 1, next, &gated, c);
                }
            }
        }
    }

    let n = rec.states[0].rows();
    let mut worst = 0.0f64;
    for t in 0..=upto_t {
        let mut walk = Walk { rec, last: t, out: vec![vec![0.0; n]; d] };
        for j0 in 0..d_in {
            walk.visit(0, j0, &rec.states[0].column(j0), 1.0);
        }
        let target = &rec.states[t + 1];
        for (c, col) in walk.out.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                worst = worst.max((v - target[(r, c)]).abs());
            }
        }
    }
    Ok(worst)
}

/// A window of condition (★) and the layer/rows that satisfy it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarWitness {
    pub window: usize,
    pub offset: usize,
    /// One row per column with `σ(x)/x ≤ δ`.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarReport {
    pub holds: bool,
    pub witnesses: Vec<StarWitness>,
    pub first_failing_window: Option<usize>,
}

/// Condition (★): in every window `[mK, (m+1)K)` some layer has, in every
/// column, a node whose gate ratio is at most `delta`. Only complete windows
/// are examined.
pub fn check_condition_star(rec: &TrajectoryRecord, k: usize, delta: f64) -> StarReport {
    let mut witnesses = Vec::new();
    if k == 0 || !(delta > 0.0 && delta < 1.0) {
        return StarReport { holds: false, witnesses, first_failing_window: Some(0) };
    }
    for m in 0..rec.depth() / k {
        let found = (0..k).find_map(|n| {
            let layer = &rec.gates[m * k + n];
            layer
                .iter()
                .map(|gate| gate.diag.iter().position(|&r| r <= delta))
                .collect::<Option<Vec<_>>>()
                .map(|rows| StarWitness { window: m, offset: n, rows })
        });
        match found {
            Some(w) => witnesses.push(w),
            None => return StarReport { holds: false, witnesses, first_failing_window: Some(m) },
        }
    }
    StarReport { holds: true, witnesses, first_failing_window: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightCondition {
    /// Running products of `|W|` stay below `bound` in max-norm.
    A3 { bound: f64 },
    /// Column substochastic, diagonal `≥ xi`, symmetric sparsity with paired
    /// entries `≥ xi`.
    A3Prime { xi: f64 },
}

impl WeightCondition {
    pub const DEFAULT_A3_BOUND: f64 = 1e6;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightReport {
    pub holds: bool,
    /// `max_k ‖Π_{t≤k} |W^(t)|‖_max` (A3 only).
    pub running_max: Option<f64>,
    pub violations: Vec<String>,
}

pub fn check_weight_assumptions(ws: &WeightSequence, which: WeightCondition) -> WeightReport {
    let mut violations = Vec::new();
    match which {
        WeightCondition::A3 { bound } => {
            let mut running_max: f64 = 0.0;
            let mut prod: Option<Matrix> = None;
            for (t, w) in ws.mats.iter().enumerate() {
                let next = match &prod {
                    None => Ok(w.abs()),
                    Some(p) => p.try_matmul(&w.abs()),
                };
                match next {
                    Ok(p) => {
                        running_max = running_max.max(p.max_abs());
                        prod = Some(p);
                    }
                    Err(e) => {
                        violations.push(format!("layer {t}: {e}"));
                        break;
                    }
                }
            }
            if !(running_max <= bound) {
                violations.push(format!("running max {running_max:e} exceeds bound {bound:e}"));
            }
            WeightReport { holds: violations.is_empty(), running_max: Some(running_max), violations }
        }
        WeightCondition::A3Prime { xi } => {
            for (t, w) in ws.mats.iter().enumerate() {
                if !w.is_square() {
                    violations.push(format!("layer {t}: W is {}x{}", w.rows(), w.cols()));
                    continue;
                }
                let d = w.rows();
                for j in 0..d {
                    let col = w.column(j);
                    if col.iter().any(|&v| v < 0.0) {
                        violations.push(format!("layer {t}: column {j} has a negative entry"));
                    }
                    let s: f64 = col.iter().sum();
                    if s > 1.0 + 1e-12 {
                        violations.push(format!("layer {t}: column {j} sums to {s}"));
                    }
                }
                for i in 0..d {
                    if w[(i, i)] < xi {
                        violations.push(format!("layer {t}: W[{i},{i}] = {} < xi", w[(i, i)]));
                    }
                    for j in 0..d {
                        if i != j && w[(i, j)] > 0.0 && (w[(i, j)] < xi || w[(j, i)] < xi) {
                            violations.push(format!(
                                "layer {t}: W[{i},{j}] = {} needs W[{i},{j}], W[{j},{i}] >= xi, W[{j},{i}] = {}",
                                w[(i, j)],
                                w[(j, i)]
                            ));
                        }
                    }
                }
            }
            WeightReport { holds: violations.is_empty(), running_max: None, violations }
        }
    }
}

/// Largest `N·d` for which [`vectorized_step_check`] builds `Wᵀ ⊗ P`.
pub const KRON_BUDGET: usize = 1024;

/// Compares `vec(X^(t+1))` with `D̃ (W^(t)ᵀ ⊗ P^(t)) vec(X^(t))`, where `vec`
/// stacks columns and `D̃` stacks the column gates.
pub fn vectorized_step_check(rec: &TrajectoryRecord, t: usize) -> Result<f64> {
    if t >= rec.depth() {
        return Err(Error::InvalidArgument(format!("layer {t} not in a {}-layer record", rec.depth())));
    }
    let x = &rec.states[t];
    let w = &rec.weights[t];
    let n = x.rows();
    if n * x.cols().max(w.cols()) > KRON_BUDGET {
        return Err(Error::BudgetExceeded(format!(
            "N*d = {} exceeds {KRON_BUDGET}",
            n * x.cols().max(w.cols())
        )));
    }
    let k = w.transpose().kron(&rec.operators[t]);
    let vec_x: Vec<f64> = (0..x.cols()).flat_map(|c| x.column(c)).collect();
    let gates: Vec<f64> = rec.gates[t].iter().flat_map(|g| g.diag.iter().copied()).collect();
    let out: Vec<f64> = k.mul_vec(&vec_x).iter().zip(&gates).map(|(v, d)| v * d).collect();
    let next = &rec.states[t + 1];
    let target: Vec<f64> = (0..next.cols()).flat_map(|c| next.column(c)).collect();
    Ok(out.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}
