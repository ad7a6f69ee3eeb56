//! Products of gated aggregation operators.
//!
//! Operators in `𝒫_{G,ε}` share the graph's sparsity pattern, so any product
//! of `T` of them is entrywise positive once the boolean power `A^T` is, and
//! its entries are then at least `ε^T`. Gates `D` with `‖D − I‖_∞ = δ_t`
//! shave at least `ε^T δ_t` off the row sums of the following `T`-product.
//! That drives the contraction estimate, the `β` dichotomy and the JSR
//! probes below.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Activation, Aggregation, LayerRule, WeightSequence};
use crate::error::{Error, Result};
use crate::graph::{graph_lambda, graph_lambda_modulus, Graph};
use crate::measures::{projection_matrix, Projection};
use crate::numerics::{matrix_norm, spectral_radius, Matrix, NormKind};

/// Positivity horizon `T` and the entry floor `c = ε^T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Horizon {
    pub t: usize,
    pub c: f64,
}

/// Smallest `T` with every product of `T` operators from `𝒫_{G,ε}` entrywise
/// positive, found on boolean powers of the adjacency matrix.
pub fn positivity_horizon(g: &Graph, eps: f64) -> Result<Horizon> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must lie in (0, 1)")));
    }
    g.require_a1()?;
    let t = boolean_horizon(g).ok_or_else(|| Error::A1Violated("no power of A is positive".into()))?;
    Ok(Horizon { t, c: eps.powi(t as i32) })
}

fn boolean_horizon(g: &Graph) -> Option<usize> {
    let n = g.n_nodes();
    let words = n.div_ceil(64);
    let full: Vec<u64> = (0..words)
        .map(|w| {
            let bits = (n - 64 * w).min(64);
            if bits == 64 {
                u64::MAX
            } else {
                (1u64 << bits) - 1
            }
        })
        .collect();
    let adj: Vec<Vec<u64>> = (0..n)
        .map(|i| {
            let mut row = vec![0u64; words];
            for &j in g.neighbors(i) {
                row[j / 64] |= 1 << (j % 64);
            }
            row
        })
        .collect();
    let mut reach = adj.clone();
    for t in 1..=n * n + 1 {
        if reach.iter().all(|r| *r == full) {
            return Some(t);
        }
        reach = reach
            .iter()
            .map(|r| {
                let mut next = vec![0u64; words];
                for j in 0..n {
                    if r[j / 64] >> (j % 64) & 1 == 1 {
                        for (x, a) in next.iter_mut().zip(&adj[j]) {
                            *x |= a;
                        }
                    }
                }
                next
            })
            .collect();
    }
    None
}

fn check_epsilon(g: &Graph, eps: f64) -> Result<()> {
    let bound = 1.0 / g.max_degree().max(1) as f64;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps} must be positive")));
    }
    if eps > bound + 1e-15 {
        return Err(Error::EpsilonTooLarge { eps, bound });
    }
    if let Some(i) = (0..g.n_nodes()).find(|&i| g.neighbors(i).is_empty()) {
        return Err(Error::IsolatedNode(i));
    }
    Ok(())
}

/// `P_ij = ε + (1 − |𝒩_i| ε) w_j` with `w` uniform on the simplex.
pub fn random_class_operator(g: &Graph, eps: f64, rng: &mut impl Rng) -> Matrix {
    let n = g.n_nodes();
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        let nb = g.neighbors(i);
        let spare = 1.0 - eps * nb.len() as f64;
        let w: Vec<f64> = nb.iter().map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
        let total: f64 = w.iter().sum();
        for (&j, wj) in nb.iter().zip(&w) {
            p[(i, j)] = eps + spare * wj / total;
        }
    }
    p
}

/// Operator with `ε` on every edge except `(i, favourite[i])`, which takes the
/// remaining mass.
pub fn extremal_class_operator(g: &Graph, eps: f64, favourite: &[usize]) -> Result<Matrix> {
    let n = g.n_nodes();
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        let nb = g.neighbors(i);
        if !nb.contains(&favourite[i]) {
            return Err(Error::InvalidArgument(format!("{} is not a neighbour of {i}", favourite[i])));
        }
        for &j in nb {
            p[(i, j)] = eps;
        }
        p[(i, favourite[i])] = 1.0 - eps * (nb.len() - 1) as f64;
    }
    Ok(p)
}

fn random_extremal(g: &Graph, eps: f64, rng: &mut impl Rng) -> Matrix {
    let fav: Vec<usize> = (0..g.n_nodes())
        .map(|i| {
            let nb = g.neighbors(i);
            nb[rng.random_range(0..nb.len())]
        })
        .collect();
    extremal_class_operator(g, eps, &fav).expect("favourites drawn from neighbourhoods")
}

/// How a [`LayerSampler`] draws operators.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorMode {
    Random,
    Extremal,
    /// Random or extremal with equal probability.
    Mixed,
    Fixed(Matrix),
}

/// How a [`LayerSampler`] draws gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateMode {
    Identity,
    /// `D = s I`.
    Scalar { s: f64 },
    /// Diagonal entries uniform in `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Diagonal entries uniform in `[1 − r^t, 1]`, so `Σ δ_t < ∞`.
    Decaying { r: f64 },
    /// `D = 0` with probability `p`, otherwise uniform in `[0, 1]`.
    SometimesZero { p: f64 },
}

/// Seeded source of layer pairs `(D^(t), P^(t))` with `P^(t) ∈ 𝒫_{G,ε}`.
#[derive(Debug, Clone)]
pub struct LayerSampler {
    graph: Graph,
    eps: f64,
    operators: OperatorMode,
    gates: GateMode,
    seed: u64,
    rng: ChaCha8Rng,
    t: usize,
}

impl LayerSampler {
    pub fn new(graph: Graph, eps: f64, operators: OperatorMode, gates: GateMode, seed: u64) -> Result<Self> {
        check_epsilon(&graph, eps)?;
        if let OperatorMode::Fixed(p) = &operators {
            let m = crate::attention::check_membership(p, &graph, eps);
            if !m.member {
                return Err(Error::InvalidArgument(format!(
                    "fixed operator is not in the class: {:?}",
                    m.violations.first()
                )));
            }
        }
        Ok(LayerSampler { graph, eps, operators, gates, seed, rng: ChaCha8Rng::seed_from_u64(seed), t: 0 })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn describe(&self) -> String {
        let ops = match &self.operators {
            OperatorMode::Random => "random",
            OperatorMode::Extremal => "extremal",
            OperatorMode::Mixed => "mixed",
            OperatorMode::Fixed(_) => "fixed",
        };
        format!("{ops} operators, gates {:?}, eps {}, seed {}", self.gates, self.eps, self.seed)
    }

    /// Next gate diagonal and operator.
    pub fn next_pair(&mut self) -> (Vec<f64>, Matrix) {
        let n = self.graph.n_nodes();
        let p = match &self.operators {
            OperatorMode::Random => random_class_operator(&self.graph, self.eps, &mut self.rng),
            OperatorMode::Extremal => random_extremal(&self.graph, self.eps, &mut self.rng),
            OperatorMode::Mixed => {
                if self.rng.random::<bool>() {
                    random_class_operator(&self.graph, self.eps, &mut self.rng)
                } else {
                    random_extremal(&self.graph, self.eps, &mut self.rng)
                }
            }
            OperatorMode::Fixed(p) => p.clone(),
        };
        let d = match self.gates {
            GateMode::Identity => vec![1.0; n],
            GateMode::Scalar { s } => vec![s; n],
            GateMode::Uniform { lo, hi } => (0..n).map(|_| self.rng.random_range(lo..=hi)).collect(),
            GateMode::Decaying { r } => {
                let lo = 1.0 - r.powi(self.t as i32);
                (0..n).map(|_| self.rng.random_range(lo..=1.0)).collect()
            }
            GateMode::SometimesZero { p } => {
                if self.rng.random::<f64>() < p {
                    vec![0.0; n]
                } else {
                    (0..n).map(|_| self.rng.random::<f64>()).collect()
                }
            }
        };
        self.t += 1;
        (d, p)
    }
}

fn gate_rows(d: &[f64], m: &Matrix) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| d[i] * m[(i, j)])
}

fn delta_of(d: &[f64]) -> f64 {
    d.iter().map(|v| 1.0 - v).fold(0.0, f64::max)
}

fn inf_norm(m: &Matrix) -> f64 {
    m.abs().row_sums().into_iter().fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductClass {
    /// The product itself vanishes (`β = 0`).
    ErgodicToZero,
    /// The product approaches a rank-one matrix with identical rows (`β > 0`).
    ErgodicRankOne,
    Inconclusive,
}

/// Trace of a left product `Π_t = D^(t)P^(t) ⋯ D^(0)P^(0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductProbe {
    pub sequence_spec: String,
    pub horizon: usize,
    pub c: f64,
    /// `‖B Π_t‖_∞`.
    pub residuals: Vec<f64>,
    /// `‖Π_t‖_∞`.
    pub norms: Vec<f64>,
    pub deltas: Vec<f64>,
    /// `β_k = Π_{t≤k} (1 − c δ_t)`.
    pub beta_partials: Vec<f64>,
    /// First `t` with residual at most `tol`.
    pub reached_tol_at: Option<usize>,
    pub classification: ProductClass,
}

/// Accumulates up to `t_max` factors from `sampler` and classifies the final
/// product: below `tol` in norm, or with `‖BΠ‖_∞` below `tol`. Stops early
/// once the product itself vanishes.
pub fn ergodicity_probe(sampler: &mut LayerSampler, proj: &Projection, t_max: usize, tol: f64) -> Result<ProductProbe> {
    let horizon = positivity_horizon(sampler.graph(), sampler.eps())?;
    let n = sampler.graph().n_nodes();
    if proj.n() != n {
        return Err(Error::DimensionMismatch(format!("projection for N = {}, graph has {n}", proj.n())));
    }
    let mut prod = Matrix::identity(n);
    let mut probe = ProductProbe {
        sequence_spec: sampler.describe(),
        horizon: t_max,
        c: horizon.c,
        residuals: Vec::new(),
        norms: Vec::new(),
        deltas: Vec::new(),
        beta_partials: Vec::new(),
        reached_tol_at: None,
        classification: ProductClass::Inconclusive,
    };
    let mut beta = 1.0;
    for t in 0..t_max {
        let (d, p) = sampler.next_pair();
        prod = gate_rows(&d, &p.matmul(&prod));
        let delta = delta_of(&d);
        beta *= 1.0 - horizon.c * delta;
        let residual = inf_norm(&proj.b.matmul(&prod));
        let norm = inf_norm(&prod);
        probe.deltas.push(delta);
        probe.beta_partials.push(beta);
        probe.residuals.push(residual);
        probe.norms.push(norm);
        if residual <= tol {
            probe.reached_tol_at.get_or_insert(t);
        }
        if norm <= tol {
            break;
        }
    }
    probe.classification = match (probe.norms.last(), probe.residuals.last()) {
        (Some(&norm), _) if norm <= tol => ProductClass::ErgodicToZero,
        (_, Some(&res)) if res <= tol => ProductClass::ErgodicRankOne,
        _ => ProductClass::Inconclusive,
    };
    Ok(probe)
}

/// A failed instance of `‖Q̂_{t0,t1+T}‖_∞ ≤ (1 − c δ_{t1}) ‖Q̂_{t0,t1}‖_∞`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionViolation {
    pub trial: usize,
    pub t0: usize,
    pub t1: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Slack allowed in [`contraction_check`].
pub const CONTRACTION_SLACK: f64 = 1e-10;

/// For each trial draws a fresh sequence, a random start `t0`, and checks the
/// contraction inequality at every `t1 ≥ t0` for which `t1 + T` is in range.
/// `Q̂_{t0,t1} = P^(t1) D^(t1−1) P^(t1−1) ⋯ D^(t0) P^(t0)`.
pub fn contraction_check(
    sampler: &mut LayerSampler,
    horizon: Horizon,
    trials: usize,
    seq_len: usize,
) -> Vec<ContractionViolation> {
    let mut violations = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed ^ 0xc0de);
    let n = sampler.graph().n_nodes();
    for trial in 0..trials {
        let seq: Vec<(Vec<f64>, Matrix)> = (0..seq_len).map(|_| sampler.next_pair()).collect();
        if seq_len <= horizon.t {
            continue;
        }
        let t0 = rng.random_range(0..seq_len - horizon.t);
        // qhat[k] = Q̂_{t0, t0+k}
        let mut qhat = vec![seq[t0].1.clone()];
        for t in t0 + 1..seq_len {
            let prev = qhat.last().expect("nonempty");
            let (d, _) = &seq[t - 1];
            qhat.push(seq[t].1.matmul(&gate_rows(d, prev)));
        }
        debug_assert_eq!(qhat[0].rows(), n);
        for t1 in t0..seq_len - horizon.t {
            let lhs = inf_norm(&qhat[t1 + horizon.t - t0]);
            let rhs = (1.0 - horizon.c * delta_of(&seq[t1].0)) * inf_norm(&qhat[t1 - t0]);
            if lhs > rhs + CONTRACTION_SLACK {
                violations.push(ContractionViolation { trial, t0, t1, lhs, rhs });
            }
        }
    }
    violations
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    /// `Π_{t=m}^{M} (1 − δ_t)`.
    pub lower_factor: f64,
    /// Largest entrywise excess over either bound (0 when it holds).
    pub max_violation: f64,
}

/// Checks `(Π (1 − δ_t)) P^(M:m) ≤ Q_{m,M} ≤ P^(M:m)` entrywise on the layer
/// pairs `seq[m..=big_m]`.
pub fn sandwich_check(seq: &[(Vec<f64>, Matrix)], m: usize, big_m: usize) -> Result<SandwichReport> {
    if m > big_m || big_m >= seq.len() {
        return Err(Error::InvalidArgument(format!("window [{m}, {big_m}] outside {} layers", seq.len())));
    }
    let n = seq[m].1.rows();
    let mut q = Matrix::identity(n);
    let mut p = Matrix::identity(n);
    let mut lower_factor = 1.0;
    for (d, op) in &seq[m..=big_m] {
        q = gate_rows(d, &op.matmul(&q));
        p = op.matmul(&p);
        lower_factor *= 1.0 - delta_of(d);
    }
    let mut worst = 0.0f64;
    for (qv, pv) in q.as_slice().iter().zip(p.as_slice()) {
        worst = worst.max(qv - pv).max(lower_factor * pv - qv);
    }
    Ok(SandwichReport { lower_factor, max_violation: worst })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BirkhoffResult {
    pub phi: f64,
    pub tau: f64,
}

/// `φ = min (P_ik P_jl)/(P_jk P_il)` over all index quadruples and
/// `τ = (1 − √φ)/(1 + √φ)`, for entrywise positive `P`.
pub fn birkhoff_coefficient(p: &Matrix) -> Result<BirkhoffResult> {
    if p.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if let Some((k, _)) = p.as_slice().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "entry ({}, {}) is not positive",
            k / p.cols(),
            k % p.cols()
        )));
    }
    let mut phi = 1.0f64;
    for i in 0..p.rows() {
        for j in 0..p.rows() {
            let ratios = p.row(i).iter().zip(p.row(j)).map(|(a, b)| a / b);
            let (lo, hi) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
            phi = phi.min(lo / hi);
        }
    }
    let s = phi.sqrt();
    Ok(BirkhoffResult { phi, tau: (1.0 - s) / (1.0 + s) })
}

/// Matrix sets whose joint spectral radius can be probed.
#[derive(Debug, Clone)]
pub enum MatrixFamily {
    Finite(Vec<Matrix>),
    /// `𝒫̃_{G,ε} = {B P Bᵀ : P ∈ 𝒫_{G,ε}}`.
    Reduced { graph: Graph, eps: f64 },
    /// `ℳ_{G,ε,δ} = {D P : 0 ≤ D ≤ δ I, P ∈ 𝒫_{G,ε}}`.
    Gated { graph: Graph, eps: f64, delta: f64 },
}

impl MatrixFamily {
    fn check(&self) -> Result<()> {
        match self {
            MatrixFamily::Finite(ms) => {
                let first = ms.first().ok_or_else(|| Error::InvalidArgument("empty matrix family".into()))?;
                if !first.is_square() || ms.iter().any(|m| m.shape() != first.shape()) {
                    return Err(Error::DimensionMismatch("family needs square matrices of one size".into()));
                }
                Ok(())
            }
            MatrixFamily::Reduced { graph, eps } => check_epsilon(graph, *eps),
            MatrixFamily::Gated { graph, eps, delta } => {
                if !(0.0..=1.0).contains(delta) {
                    return Err(Error::InvalidArgument(format!("gate cap {delta} outside [0, 1]")));
                }
                check_epsilon(graph, *eps)
            }
        }
    }

    fn dim(&self) -> usize {
        match self {
            MatrixFamily::Finite(ms) => ms[0].rows(),
            MatrixFamily::Reduced { graph, .. } => graph.n_nodes() - 1,
            MatrixFamily::Gated { graph, .. } => graph.n_nodes(),
        }
    }

    fn draw(&self, proj: Option<&Projection>, rng: &mut ChaCha8Rng) -> Matrix {
        match self {
            MatrixFamily::Finite(ms) => ms[rng.random_range(0..ms.len())].clone(),
            MatrixFamily::Reduced { graph, eps } => {
                let p = if rng.random::<bool>() {
                    random_class_operator(graph, *eps, rng)
                } else {
                    random_extremal(graph, *eps, rng)
                };
                proj.expect("projection for reduced family").reduce(&p).expect("shapes agree")
            }
            MatrixFamily::Gated { graph, eps, delta } => {
                let p = if rng.random::<bool>() {
                    random_class_operator(graph, *eps, rng)
                } else {
                    random_extremal(graph, *eps, rng)
                };
                let d: Vec<f64> = (0..graph.n_nodes()).map(|_| rng.random_range(0.0..=*delta)).collect();
                gate_rows(&d, &p)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JsrEstimate {
    /// `max ρ(Π)^{1/k}` over sampled and included products: a valid lower
    /// bound on the JSR.
    pub lower: f64,
    /// `max ‖Π^m‖₂^{1/(mk)}` with `mk ≥ k_max`: an estimate, not a certified
    /// bound.
    pub upper: f64,
    pub k_max: usize,
    pub samples: usize,
    pub lambda_ref: Option<f64>,
    /// Length of the product attaining `lower`.
    pub lower_witness_len: usize,
}

/// Long-product growth of `m` seen through its powers.
fn power_growth(m: &Matrix, k: usize, k_max: usize) -> Result<f64> {
    let reps = k_max.div_ceil(k).max(1);
    let total = (reps * k) as f64;
    let mut acc = m.clone();
    let mut log_scale = 0.0;
    for _ in 1..reps {
        acc = acc.matmul(m);
        let s = acc.max_abs();
        if s == 0.0 {
            return Ok(0.0);
        }
        acc = acc.scale(1.0 / s);
        log_scale += s.ln();
    }
    let norm = matrix_norm(&acc, NormKind::Two)?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok(((norm.ln() + log_scale) / total).exp())
}

/// Samples `samples` products with lengths cycling through `1..=k_max`, plus
/// every matrix in `include` on its own.
pub fn jsr_estimate(
    family: &MatrixFamily,
    k_max: usize,
    samples: usize,
    include: &[Matrix],
    seed: u64,
) -> Result<JsrEstimate> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    family.check()?;
    if samples == 0 && include.is_empty() {
        return Err(Error::InvalidArgument("nothing to sample".into()));
    }
    let dim = family.dim();
    if let Some(m) = include.iter().find(|m| m.shape() != (dim, dim)) {
        return Err(Error::DimensionMismatch(format!(
            "included {}x{} matrix in a family of {dim}x{dim}",
            m.rows(),
            m.cols()
        )));
    }
    let proj = match family {
        MatrixFamily::Reduced { graph, .. } => Some(projection_matrix(graph.n_nodes())?),
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lower = 0.0f64;
    let mut upper = 0.0f64;
    let mut witness = 1;
    let mut consider = |prod: &Matrix, k: usize, lower: &mut f64, upper: &mut f64| -> Result<()> {
        let rho = spectral_radius(prod)?.powf(1.0 / k as f64);
        if rho > *lower {
            *lower = rho;
            witness = k;
        }
        *upper = upper.max(power_growth(prod, k, k_max)?).max(rho);
        Ok(())
    };
    for m in include {
        consider(m, 1, &mut lower, &mut upper)?;
    }
    for s in 0..samples {
        let k = 1 + s % k_max;
        let mut prod = family.draw(proj.as_ref(), &mut rng);
        for _ in 1..k {
            prod = family.draw(proj.as_ref(), &mut rng).matmul(&prod);
        }
        consider(&prod, k, &mut lower, &mut upper)?;
    }
    Ok(JsrEstimate { lower, upper, k_max, samples, lambda_ref: None, lower_witness_len: witness })
}

/// Outcome of comparing the graph's `λ` against `JSR(𝒫̃_{G,ε})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaReport {
    /// Second largest eigenvalue of `D^{−1/2} A D^{−1/2}`.
    pub lambda_algebraic: f64,
    /// Largest modulus among the remaining eigenvalues.
    pub lambda_modulus: f64,
    /// `ρ(B D⁻¹A Bᵀ)`.
    pub rho_reduced_random_walk: f64,
    pub estimate: JsrEstimate,
    /// `lower − λ_modulus`, reported rather than asserted.
    pub gap: f64,
    /// `λ ≤ lower + 1e-9` for both readings of `λ`.
    pub holds: bool,
    /// `|ρ(P̃_rw) − λ_modulus|`.
    pub identity_error: f64,
}

pub const LAMBDA_TOL: f64 = 1e-9;

/// Runs [`jsr_estimate`] over `𝒫̃_{G,ε}` with the reduced random-walk operator,
/// the reduced uniform operator (when in the class) and a few extremal
/// operators always included.
pub fn lambda_vs_jsr(g: &Graph, eps: f64, k_max: usize, samples: usize, seed: u64) -> Result<LambdaReport> {
    g.require_a1()?;
    check_epsilon(g, eps)?;
    let n = g.n_nodes();
    let proj = projection_matrix(n)?;
    let rw = g.random_walk_operator()?;
    let reduced_rw = proj.reduce(&rw)?;
    let mut include = vec![reduced_rw.clone()];
    let uniform = Matrix::filled(n, n, 1.0 / n as f64);
    if crate::attention::check_membership(&uniform, g, eps).member {
        include.push(proj.reduce(&uniform)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe7);
    for _ in 0..4 {
        include.push(proj.reduce(&random_extremal(g, eps, &mut rng))?);
    }
    let mut estimate = jsr_estimate(&MatrixFamily::Reduced { graph: g.clone(), eps }, k_max, samples, &include, seed)?;
    let lambda_algebraic = graph_lambda(g)?;
    let lambda_modulus = graph_lambda_modulus(g)?;
    estimate.lambda_ref = Some(lambda_modulus);
    let rho = spectral_radius(&reduced_rw)?;
    Ok(LambdaReport {
        lambda_algebraic,
        lambda_modulus,
        rho_reduced_random_walk: rho,
        gap: estimate.lower - lambda_modulus,
        holds: lambda_algebraic <= estimate.lower + LAMBDA_TOL && lambda_modulus <= estimate.lower + LAMBDA_TOL,
        identity_error: (rho - lambda_modulus).abs(),
        estimate,
    })
}

/// The two-node system whose fixed point keeps `μ` away from zero under
/// weights with an asymmetric sparsity pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleSystem {
    /// `K₂` with self-loops.
    pub graph: Graph,
    pub p: Matrix,
    pub w: Matrix,
    /// `gates[c]` is the diagonal applied to output column `c`.
    pub gates: Vec<Vec<f64>>,
    pub x: Matrix,
}

impl CounterexampleSystem {
    pub fn rule(&self) -> LayerRule {
        LayerRule {
            aggregation: Aggregation::Fixed(self.p.clone()),
            activation: Activation::FixedGates(self.gates.clone()),
        }
    }

    pub fn weights(&self, depth: usize) -> WeightSequence {
        WeightSequence::user_supplied(vec![self.w.clone(); depth])
    }

    /// The same system with the gate diagonals swapped between the columns,
    /// `D₁ = I` on column 1 and `D₂ = diag(1/2, 1)` on column 2. `X` is not a
    /// fixed point of this variant.
    pub fn with_swapped_gates(&self) -> Self {
        let mut other = self.clone();
        other.gates.swap(0, 1);
        other
    }
}

/// `P = ½ 11ᵀ`, `W = [[2/3, 0], [1/3, 1]]`, `X = [[1/3, 1], [2/3, 1]]`, with
/// column 1 gated by `diag(1/2, 1)` and column 2 ungated. Then
/// `σ(PXW) = X`: column 1 of `PXW` is `(2/3, 2/3)` and column 2 is `(1, 1)`.
pub fn counterexample_system() -> CounterexampleSystem {
    let graph = Graph::new(2, &[(0, 1)], true).expect("valid two-node graph");
    CounterexampleSystem {
        graph,
        p: Matrix::filled(2, 2, 0.5),
        w: Matrix::from_rows(&[[2.0 / 3.0, 0.0], [1.0 / 3.0, 1.0]]).expect("2x2"),
        gates: vec![vec![0.5, 1.0], vec![1.0, 1.0]],
        x: Matrix::from_rows(&[[1.0 / 3.0, 1.0], [2.0 / 3.0, 1.0]]).expect("2x2"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::run_trajectory;
    use crate::graph::{generate_graph, GraphSpec};
    use crate::measures::mu;
    use approx::assert_abs_diff_eq;

    fn k3() -> Graph {
        Graph::new(3, &[(0, 1), (1, 2), (0, 2)], false).unwrap()
    }

    fn brute_horizon(g: &Graph) -> Option<usize> {
        let a = g.adjacency();
        let mut pow = a.clone();
        for t in 1..=g.n_nodes().pow(2) + 1 {
            if pow.as_slice().iter().all(|&v| v > 0.0) {
                return Some(t);
            }
            pow = pow.matmul(a).map(|v| v.min(1.0));
        }
        None
    }

    #[test]
    fn horizon_examples() {
        let kl = generate_graph(GraphSpec::Complete { n: 4 }, 0, true).unwrap();
        assert_eq!(positivity_horizon(&kl, 0.2).unwrap(), Horizon { t: 1, c: 0.2 });

        let h = positivity_horizon(&k3(), 0.5).unwrap();
        assert_eq!(h.t, 2);
        assert_abs_diff_eq!(h.c, 0.25, epsilon = 1e-15);
        let p = k3().random_walk_operator().unwrap();
        assert_abs_diff_eq!(p.matmul(&p).min_entry(), 0.25, epsilon = 1e-15);

        let c5 = generate_graph(GraphSpec::Cycle { n: 5 }, 0, false).unwrap();
        assert_eq!(positivity_horizon(&c5, 0.5).unwrap().t, 4);

        let c4 = generate_graph(GraphSpec::Cycle { n: 4 }, 0, false).unwrap();
        assert!(matches!(positivity_horizon(&c4, 0.5), Err(Error::A1Violated(_))));
        assert!(positivity_horizon(&c5, 1.0).is_err());
    }

    #[test]
    fn horizon_matches_brute_force() {
        for seed in 0..30 {
            let g = generate_graph(GraphSpec::ErdosRenyi { n: 3 + seed as usize % 6, p: 0.5 }, seed, seed % 3 == 0)
                .unwrap();
            if !g.diagnose().satisfies_a1 {
                continue;
            }
            let t = positivity_horizon(&g, 0.1).unwrap().t;
            assert_eq!(Some(t), brute_horizon(&g));
            assert!(t <= g.n_nodes().pow(2));
        }
    }

    #[test]
    fn horizon_on_wide_graph() {
        let g = generate_graph(GraphSpec::Cycle { n: 131 }, 0, false).unwrap();
        assert_eq!(positivity_horizon(&g, 0.5).unwrap().t, 130);
    }

    #[test]
    fn class_operators_are_members() {
        let g = generate_graph(GraphSpec::ErdosRenyi { n: 7, p: 0.5 }, 3, true).unwrap();
        let eps = 1.0 / g.max_degree() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let p = random_class_operator(&g, eps * 0.5, &mut rng);
            assert!(crate::attention::check_membership(&p, &g, eps * 0.5).member);
            let p = random_extremal(&g, eps, &mut rng);
            assert!(crate::attention::check_membership(&p, &g, eps - 1e-15).member);
        }
        assert!(matches!(
            LayerSampler::new(g, eps * 1.5, OperatorMode::Random, GateMode::Identity, 0),
            Err(Error::EpsilonTooLarge { .. })
        ));
    }

    #[test]
    fn uniform_consensus_in_one_step() {
        let g = generate_graph(GraphSpec::Complete { n: 4 }, 0, true).unwrap();
        let mut s =
            LayerSampler::new(g, 0.25, OperatorMode::Fixed(Matrix::filled(4, 4, 0.25)), GateMode::Identity, 0).unwrap();
        let probe = ergodicity_probe(&mut s, &projection_matrix(4).unwrap(), 10, 1e-12).unwrap();
        assert!(probe.residuals[0] < 1e-15);
        assert_eq!(probe.classification, ProductClass::ErgodicRankOne);
    }

    #[test]
    fn random_products_reach_consensus() {
        let g = generate_graph(GraphSpec::Complete { n: 5 }, 0, false).unwrap();
        let proj = projection_matrix(5).unwrap();
        for seed in 0..8 {
            let mut s = LayerSampler::new(g.clone(), 0.1, OperatorMode::Random, GateMode::Identity, seed).unwrap();
            let probe = ergodicity_probe(&mut s, &proj, 500, 1e-8).unwrap();
            assert_eq!(probe.classification, ProductClass::ErgodicRankOne);
            assert!(probe.norms.iter().all(|&v| (v - 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn halved_gates_drive_product_to_zero() {
        let g = k3();
        let mut s = LayerSampler::new(g.clone(), 0.5, OperatorMode::Random, GateMode::Scalar { s: 0.5 }, 1).unwrap();
        let probe = ergodicity_probe(&mut s, &projection_matrix(3).unwrap(), 200, 1e-10).unwrap();
        assert_eq!(probe.classification, ProductClass::ErgodicToZero);
        let c = probe.c;
        for (k, b) in probe.beta_partials.iter().enumerate() {
            assert_abs_diff_eq!(*b, (1.0 - c / 2.0).powi(k as i32 + 1), epsilon = 1e-12);
        }
        assert!(probe.beta_partials.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn contraction_holds() {
        let g = k3();
        let h = positivity_horizon(&g, 0.5).unwrap();
        for gates in [GateMode::Identity, GateMode::SometimesZero { p: 0.3 }, GateMode::Uniform { lo: 0.0, hi: 1.0 }]
        {
            let mut s = LayerSampler::new(g.clone(), 0.5, OperatorMode::Mixed, gates, 4).unwrap();
            assert!(contraction_check(&mut s, h, 50, 12).is_empty());
        }
        let c5 = generate_graph(GraphSpec::Cycle { n: 5 }, 0, false).unwrap();
        let h = positivity_horizon(&c5, 0.3).unwrap();
        let mut s = LayerSampler::new(c5, 0.3, OperatorMode::Extremal, GateMode::SometimesZero { p: 0.5 }, 9).unwrap();
        assert!(contraction_check(&mut s, h, 50, 16).is_empty());
    }

    #[test]
    fn zero_gate_contracts_by_one_minus_c() {
        let g = k3();
        let h = positivity_horizon(&g, 0.5).unwrap();
        let mut s = LayerSampler::new(g, 0.5, OperatorMode::Random, GateMode::Scalar { s: 0.0 }, 0).unwrap();
        let seq: Vec<_> = (0..3).map(|_| s.next_pair()).collect();
        let q0 = seq[0].1.clone();
        let q2 = seq[2].1.matmul(&gate_rows(&seq[1].0, &seq[1].1.matmul(&gate_rows(&seq[0].0, &q0))));
        assert!(inf_norm(&q2) <= (1.0 - h.c) * inf_norm(&q0));
    }

    #[test]
    fn sandwich_holds_on_tails() {
        let g = k3();
        let mut s = LayerSampler::new(g, 0.4, OperatorMode::Random, GateMode::Decaying { r: 0.7 }, 2).unwrap();
        let seq: Vec<_> = (0..60).map(|_| s.next_pair()).collect();
        for m in [0, 10, 30] {
            let r = sandwich_check(&seq, m, 59).unwrap();
            assert!(r.max_violation <= 1e-14, "{r:?}");
            assert!(r.lower_factor > 0.0 || m == 0);
        }
        assert!(sandwich_check(&seq, 10, 60).is_err());
    }

    #[test]
    fn birkhoff_examples() {
        let r = birkhoff_coefficient(&Matrix::filled(3, 3, 1.0 / 3.0)).unwrap();
        assert_abs_diff_eq!(r.phi, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.tau, 0.0, epsilon = 1e-15);
        let p = Matrix::from_rows(&[[0.9, 0.1], [0.1, 0.9]]).unwrap();
        let r = birkhoff_coefficient(&p).unwrap();
        assert_abs_diff_eq!(r.phi, 1.0 / 81.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.tau, 0.8, epsilon = 1e-14);
        assert!(birkhoff_coefficient(&Matrix::identity(2)).is_err());
    }

    #[test]
    fn birkhoff_is_submultiplicative() {
        let g = generate_graph(GraphSpec::Complete { n: 4 }, 0, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let p = random_class_operator(&g, 0.02, &mut rng);
            let q = random_class_operator(&g, 0.02, &mut rng);
            let tp = birkhoff_coefficient(&p).unwrap().tau;
            let tq = birkhoff_coefficient(&q).unwrap().tau;
            let tpq = birkhoff_coefficient(&p.matmul(&q)).unwrap().tau;
            assert!(tpq <= tp * tq + 1e-12);
        }
    }

    #[test]
    fn jsr_of_singleton() {
        let m = Matrix::from_rows(&[[0.5, 0.4], [-0.3, 0.2]]).unwrap();
        let e = jsr_estimate(&MatrixFamily::Finite(vec![m.clone()]), 32, 64, &[], 0).unwrap();
        let rho = spectral_radius(&m).unwrap();
        assert!((e.lower - rho).abs() <= 1e-6);
        assert!(e.upper >= e.lower - 1e-12);
        assert!(jsr_estimate(&MatrixFamily::Finite(vec![]), 4, 4, &[], 0).is_err());
        assert!(jsr_estimate(&MatrixFamily::Finite(vec![m]), 4, 0, &[], 0).is_err());
    }

    #[test]
    fn jsr_of_reduced_class_on_k3() {
        let g = k3();
        let proj = projection_matrix(3).unwrap();
        let rw = proj.reduce(&g.random_walk_operator().unwrap()).unwrap();
        let e = jsr_estimate(&MatrixFamily::Reduced { graph: g.clone(), eps: 0.5 }, 16, 64, &[rw], 0).unwrap();
        assert!(e.lower >= 0.5 - 1e-12);
        assert!(e.upper < 1.0 - 1e-3);
    }

    #[test]
    fn jsr_of_gated_class_below_one() {
        let e = jsr_estimate(&MatrixFamily::Gated { graph: k3(), eps: 0.5, delta: 0.5 }, 32, 128, &[], 1).unwrap();
        assert!(e.upper < 1.0);
        assert!(e.lower <= e.upper + 1e-6);
    }

    #[test]
    fn lambda_comparison() {
        let kl = generate_graph(GraphSpec::Complete { n: 3 }, 0, true).unwrap();
        let r = lambda_vs_jsr(&kl, 1.0 / 3.0, 16, 64, 0).unwrap();
        assert_abs_diff_eq!(r.lambda_algebraic, 0.0, epsilon = 1e-12);
        assert!(r.holds);

        let c5 = generate_graph(GraphSpec::Cycle { n: 5 }, 0, false).unwrap();
        let r = lambda_vs_jsr(&c5, 0.5, 16, 64, 0).unwrap();
        assert_abs_diff_eq!(r.lambda_algebraic, (2.0 * std::f64::consts::PI / 5.0).cos(), epsilon = 1e-12);
        assert!(r.estimate.lower >= 0.309);
        assert!(r.holds);
        assert!(r.identity_error <= 1e-9);
        assert!(matches!(lambda_vs_jsr(&c5, 0.6, 16, 64, 0), Err(Error::EpsilonTooLarge { .. })));
    }

    #[test]
    fn counterexample_is_a_fixed_point() {
        let ce = counterexample_system();
        let rec = run_trajectory(&ce.graph, &ce.x, &ce.weights(100), &ce.rule(), 100).unwrap();
        assert!(rec.states.iter().all(|s| s.max_abs_diff(&ce.x) <= 1e-12));
        assert_abs_diff_eq!(mu(&ce.x), 2f64.sqrt() / 6.0, epsilon = 1e-15);

        let swapped = ce.with_swapped_gates();
        let rec = run_trajectory(&swapped.graph, &swapped.x, &swapped.weights(1), &swapped.rule(), 1).unwrap();
        assert!(rec.states[1].max_abs_diff(&ce.x) > 0.1);
    }
}
