use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::asymptotics::{
    contraction_check, counterexample_system, ergodicity_probe, jsr_estimate, lambda_vs_jsr, positivity_horizon,
    random_class_operator, GateMode, LayerSampler, MatrixFamily, OperatorMode, ProductClass, LAMBDA_TOL,
};
use crate::attention::{aggregation_operator, attention_scores, check_membership, AttentionSpec};
use crate::dynamics::{
    a4_grid_check, apply_nonlinearity, check_weight_assumptions, run_trajectory, verify_column_expansion,
    vectorized_step_check, LayerRule, NonlinearitySpec, WeightCondition, WeightSequence,
};
use crate::graph::{generate_graph, Graph, GraphSpec};
use crate::measures::{mu, projection_matrix, reduced_operator};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    A4,
    Mu,
    Projection,
    Membership,
    Expansion,
    Kronecker,
    Positivity,
    Contraction,
    Ergodicity,
    Jsr,
    Lambda,
    Counterexample,
    A3Prime,
}

impl Scope {
    pub const ALL: [Scope; 13] = [
        Scope::A4,
        Scope::Mu,
        Scope::Projection,
        Scope::Membership,
        Scope::Expansion,
        Scope::Kronecker,
        Scope::Positivity,
        Scope::Contraction,
        Scope::Ergodicity,
        Scope::Jsr,
        Scope::Lambda,
        Scope::Counterexample,
        Scope::A3Prime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scope::A4 => "a4",
            Scope::Mu => "mu",
            Scope::Projection => "projection",
            Scope::Membership => "membership",
            Scope::Expansion => "expansion",
            Scope::Kronecker => "kronecker",
            Scope::Positivity => "positivity",
            Scope::Contraction => "contraction",
            Scope::Ergodicity => "ergodicity",
            Scope::Jsr => "jsr",
            Scope::Lambda => "lambda",
            Scope::Counterexample => "counterexample",
            Scope::A3Prime => "a3prime",
        }
    }

    /// Parses a comma-separated list; `all` selects every scope.
    pub fn parse_list(s: &str) -> Result<Vec<Scope>, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                return Ok(Scope::ALL.to_vec());
            }
            let scope: Scope = part.parse()?;
            if !out.contains(&scope) {
                out.push(scope);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Scope::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| format!("unknown scope {s:?}; expected one of {}", Scope::ALL.map(|s| s.name()).join(", ")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub scope: Scope,
    pub name: String,
    pub passed: bool,
    pub measured: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl CheckResult {
    fn bound(scope: Scope, name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        CheckResult {
            scope,
            name: name.into(),
            passed: measured <= tolerance,
            measured: Some(measured),
            tolerance: Some(tolerance),
            detail: String::new(),
        }
    }

    fn flag(scope: Scope, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult { scope, name: name.into(), passed, measured: None, tolerance: None, detail: detail.into() }
    }

    fn failed(scope: Scope, name: impl Into<String>, err: crate::Error) -> Self {
        Self::flag(scope, name, false, err.to_string())
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub n_checks: usize,
    pub n_failed: usize,
    pub checks: Vec<CheckResult>,
}

/// Scopes to run and the graphs that graph-dependent scopes iterate over.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub scopes: Vec<Scope>,
    pub graphs: Vec<(String, Graph)>,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { scopes: Scope::ALL.to_vec(), graphs: builtin_graphs(), seed: 0 }
    }
}

/// Small A1 graphs: `K₃`, `K₃` with self-loops, `C₅`, a star with
/// self-loops and an A1-conditioned `ER(8, 0.5)`.
pub fn builtin_graphs() -> Vec<(String, Graph)> {
    let mk = |spec, loops| generate_graph(spec, 0, loops).expect("builtin graph");
    let er = (0u64..)
        .map(|s| (s, generate_graph(GraphSpec::ErdosRenyi { n: 8, p: 0.5 }, s, false)))
        .find_map(|(s, g)| g.ok().filter(|g| g.require_a1().is_ok()).map(|g| (s, g)))
        .expect("some seed gives an A1 graph");
    vec![
        ("K3".into(), mk(GraphSpec::Complete { n: 3 }, false)),
        ("K3+loops".into(), mk(GraphSpec::Complete { n: 3 }, true)),
        ("C5".into(), mk(GraphSpec::Cycle { n: 5 }, false)),
        ("star(5)+loops".into(), mk(GraphSpec::Star { n: 5 }, true)),
        (format!("ER(8,0.5) seed {}", er.0), er.1),
    ]
}

fn normal(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Smallest `ε` bound of the class on `g`.
fn class_eps(g: &Graph) -> f64 {
    1.0 / g.max_degree().max(1) as f64
}

fn check_a4() -> Vec<CheckResult> {
    NonlinearitySpec::shipped()
        .iter()
        .map(|spec| {
            let r = a4_grid_check(spec, 10_001);
            CheckResult::flag(Scope::A4, format!("a4 {spec}"), r.passed, format!(
                "sigma(0) = {}, ratio in [{:.6}, {:.6}]",
                r.sigma_zero, r.min_ratio, r.max_ratio
            ))
        })
        .collect()
}

fn check_mu(rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let mut worst_consensus = 0.0f64;
    let mut worst_shift = 0.0f64;
    let mut worst_triangle = f64::NEG_INFINITY;
    let mut worst_projection = 0.0f64;
    let mut min_nonconsensus = f64::INFINITY;
    for trial in 0..200 {
        let n = 2 + trial % 7;
        let d = 1 + trial % 4;
        let row = normal(1, d, rng);
        let c = Matrix::from_fn(n, d, |_, j| row[(0, j)]);
        worst_consensus = worst_consensus.max(mu(&c));
        let x = normal(n, d, rng);
        let y = normal(n, d, rng);
        worst_shift = worst_shift.max((mu(&x.try_add(&c).expect("shapes")) - mu(&x)).abs());
        worst_triangle = worst_triangle.max(mu(&x.try_add(&y).expect("shapes")) - mu(&x) - mu(&y));
        let b = projection_matrix(n).expect("n >= 2").b;
        worst_projection = worst_projection.max((mu(&x) - b.matmul(&x).frobenius()).abs());
        min_nonconsensus = min_nonconsensus.min(mu(&x));
    }
    vec![
        CheckResult::bound(Scope::Mu, "mu vanishes at consensus", worst_consensus, 1e-12),
        CheckResult::flag(Scope::Mu, "mu positive off consensus", min_nonconsensus > 0.0, format!("min {min_nonconsensus:e}")),
        CheckResult::bound(Scope::Mu, "mu translation invariant", worst_shift, 1e-12),
        CheckResult::bound(Scope::Mu, "mu subadditive", worst_triangle.max(0.0), 1e-12),
        CheckResult::bound(Scope::Mu, "mu equals |BX|_F", worst_projection, 1e-12),
    ]
}

fn check_projection(rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let mut ones = 0.0f64;
    let mut orth = 0.0f64;
    let mut inter = 0.0f64;
    for n in 2..=12 {
        let proj = projection_matrix(n).expect("n >= 2");
        ones = proj.b.mul_vec(&vec![1.0; n]).iter().fold(ones, |a, v| a.max(v.abs()));
        orth = orth.max(proj.b.matmul(&proj.b.transpose()).max_abs_diff(&Matrix::identity(n - 1)));
        for _ in 0..10 {
            let raw = Matrix::from_fn(n, n, |_, _| rng.random::<f64>());
            let s = raw.row_sums();
            let p = Matrix::from_fn(n, n, |i, j| raw[(i, j)] / s[i]);
            let pt = reduced_operator(&p, &proj).expect("shapes");
            inter = inter.max(proj.b.matmul(&p).max_abs_diff(&pt.matmul(&proj.b)));
        }
    }
    vec![
        CheckResult::bound(Scope::Projection, "B1 = 0", ones, 1e-12),
        CheckResult::bound(Scope::Projection, "BB^T = I", orth, 1e-12),
        CheckResult::bound(Scope::Projection, "BP = P~B", inter, 1e-12),
    ]
}

fn check_membership_scope(graphs: &[(String, Graph)], rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for (name, g) in graphs {
        let d = 3;
        let mut members = 0;
        let mut shift_gap = 0.0f64;
        let mut failure = None;
        for _ in 0..20 {
            let x = normal(g.n_nodes(), d, rng);
            let w = normal(d, d, rng);
            let spec = AttentionSpec::random_gat(d, 0.2, 1.0, rng);
            let res = attention_scores(&x, &w, &spec, g).and_then(|s| {
                let op = aggregation_operator(&s, g)?;
                let mut shifted = s.clone();
                for i in 0..g.n_nodes() {
                    shifted.shift_row(i, 7.5 * i as f64 - 3.0);
                }
                let op2 = aggregation_operator(&shifted, g)?;
                Ok((op, op2))
            });
            match res {
                Ok((op, op2)) => {
                    let m = check_membership(&op.p, g, op.epsilon);
                    if m.member {
                        members += 1;
                    } else {
                        failure.get_or_insert_with(|| format!("{:?}", m.violations.first()));
                    }
                    shift_gap = shift_gap.max(op.p.max_abs_diff(&op2.p));
                }
                Err(e) => {
                    failure.get_or_insert_with(|| e.to_string());
                }
            }
        }
        out.push(CheckResult::flag(
            Scope::Membership,
            format!("attention operators in class on {name}"),
            members == 20,
            failure.unwrap_or_else(|| "20/20 members".into()),
        ));
        out.push(CheckResult::bound(Scope::Membership, format!("softmax shift invariance on {name}"), shift_gap, 1e-12));
    }
    out
}

fn small_relu_record(seed: u64) -> crate::Result<crate::dynamics::TrajectoryRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = generate_graph(GraphSpec::Complete { n: 3 }, 0, false)?;
    let x0 = normal(3, 2, &mut rng);
    let ws = WeightSequence::user_supplied((0..5).map(|_| normal(2, 2, &mut rng)).collect());
    let spec = AttentionSpec::random_gat(2, 0.2, 1.0, &mut rng);
    run_trajectory(&g, &x0, &ws, &LayerRule::new(spec, NonlinearitySpec::Relu), 5)
}

fn check_expansion(seed: u64) -> Vec<CheckResult> {
    let mut worst = 0.0f64;
    for s in 0..5 {
        match small_relu_record(seed + s).and_then(|rec| verify_column_expansion(&rec, 4)) {
            Ok(dev) => worst = worst.max(dev),
            Err(e) => return vec![CheckResult::failed(Scope::Expansion, "column expansion", e)],
        }
    }
    vec![CheckResult::bound(Scope::Expansion, "column expansion N=3 d=2 t<=4", worst, 1e-9)]
}

fn check_kronecker(seed: u64) -> Vec<CheckResult> {
    let mut worst = 0.0f64;
    let mut gate_gap = 0.0f64;
    for s in 0..5 {
        let rec = match small_relu_record(seed + 100 + s) {
            Ok(r) => r,
            Err(e) => return vec![CheckResult::failed(Scope::Kronecker, "kronecker form", e)],
        };
        for t in 0..rec.depth() {
            match vectorized_step_check(&rec, t) {
                Ok(dev) => worst = worst.max(dev),
                Err(e) => return vec![CheckResult::failed(Scope::Kronecker, "kronecker form", e)],
            }
            let y = &rec.preactivations[t];
            for spec in NonlinearitySpec::shipped() {
                if let Ok((z, gates)) = apply_nonlinearity(&spec, y) {
                    for (c, gate) in gates.iter().enumerate() {
                        let dy = gate.apply(&y.column(c));
                        gate_gap = dy.iter().zip(z.column(c)).fold(gate_gap, |a, (u, v)| a.max((u - v).abs()));
                    }
                }
            }
        }
    }
    vec![
        CheckResult::bound(Scope::Kronecker, "vec(X') = D~(W^T kron P) vec(X)", worst, 1e-10),
        CheckResult::bound(Scope::Kronecker, "sigma(Y)_i = D_i Y_i", gate_gap, 1e-12),
    ]
}

fn brute_horizon(g: &Graph) -> Option<usize> {
    let a = g.adjacency();
    let mut pow = a.clone();
    for t in 1..=g.n_nodes().pow(2) + 1 {
        if pow.as_slice().iter().all(|&v| v > 0.0) {
            return Some(t);
        }
        pow = pow.matmul(a).map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    }
    None
}

fn check_positivity(graphs: &[(String, Graph)], seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for (name, g) in graphs {
        let eps = class_eps(g);
        let h = match positivity_horizon(g, eps) {
            Ok(h) => h,
            Err(e) => {
                out.push(CheckResult::failed(Scope::Positivity, format!("positivity horizon on {name}"), e));
                continue;
            }
        };
        let brute = brute_horizon(g);
        out.push(CheckResult::flag(
            Scope::Positivity,
            format!("positivity horizon on {name}"),
            brute == Some(h.t),
            format!("T = {}, brute force {brute:?}", h.t),
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = f64::INFINITY;
        for _ in 0..100 {
            let mut prod = random_class_operator(g, eps, &mut rng);
            for _ in 1..h.t {
                prod = random_class_operator(g, eps, &mut rng).matmul(&prod);
            }
            worst = worst.min(prod.min_entry() / h.c);
        }
        out.push(
            CheckResult::flag(
                Scope::Positivity,
                format!("T-products bounded below by eps^T on {name}"),
                worst >= 1.0 - 1e-12,
                "",
            )
            .with_detail(format!("min entry / c = {worst:.6}")),
        );
    }
    out
}

fn check_contraction(graphs: &[(String, Graph)], seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for (name, g) in graphs {
        let eps = class_eps(g);
        let res = positivity_horizon(g, eps).and_then(|h| {
            let mut s = LayerSampler::new(g.clone(), eps, OperatorMode::Mixed, GateMode::Uniform { lo: 0.0, hi: 1.0 }, seed)?;
            Ok(contraction_check(&mut s, h, 100, 3 * h.t + 8))
        });
        out.push(match res {
            Ok(v) => CheckResult::flag(
                Scope::Contraction,
                format!("contraction lemma on {name}"),
                v.is_empty(),
                format!("{} violations", v.len()),
            ),
            Err(e) => CheckResult::failed(Scope::Contraction, format!("contraction lemma on {name}"), e),
        });
    }
    out
}

fn check_ergodicity(graphs: &[(String, Graph)], seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let cases = [
        ("identity gates", GateMode::Identity, ProductClass::ErgodicRankOne),
        ("summable gate defects", GateMode::Decaying { r: 0.5 }, ProductClass::ErgodicRankOne),
        ("halved gates", GateMode::Scalar { s: 0.5 }, ProductClass::ErgodicToZero),
    ];
    for (name, g) in graphs {
        let eps = class_eps(g);
        let proj = match projection_matrix(g.n_nodes()) {
            Ok(p) => p,
            Err(e) => {
                out.push(CheckResult::failed(Scope::Ergodicity, format!("ergodicity on {name}"), e));
                continue;
            }
        };
        for (label, gates, expected) in cases {
            let label = format!("{label} on {name}");
            let mut bad = 0;
            let mut err = None;
            for s in 0..8 {
                let res = LayerSampler::new(g.clone(), eps, OperatorMode::Mixed, gates, seed + s)
                    .and_then(|mut sampler| ergodicity_probe(&mut sampler, &proj, 2000, 1e-8));
                match res {
                    Ok(p) if p.classification == expected => {}
                    Ok(_) => bad += 1,
                    Err(e) => {
                        err = Some(e);
                        break;
                    }
                }
            }
            out.push(match err {
                Some(e) => CheckResult::failed(Scope::Ergodicity, label, e),
                None => CheckResult::flag(Scope::Ergodicity, label, bad == 0, format!("{bad}/8 misclassified, expected {expected:?}")),
            });
        }
    }
    out
}

fn check_jsr(graphs: &[(String, Graph)], seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for (name, g) in graphs {
        let label = format!("JSR of reduced class below 1 on {name}");
        let eps = class_eps(g);
        let res = positivity_horizon(g, eps).and_then(|_| {
            let reduced = jsr_estimate(&MatrixFamily::Reduced { graph: g.clone(), eps }, 16, 400, &[], seed)?;
            let gated = jsr_estimate(&MatrixFamily::Gated { graph: g.clone(), eps, delta: 0.9 }, 16, 400, &[], seed)?;
            Ok((reduced, gated))
        });
        match res {
            Ok((reduced, gated)) => {
                out.push(
                    CheckResult::flag(Scope::Jsr, label, reduced.lower <= reduced.upper + 1e-12 && reduced.upper < 1.0, "")
                        .with_detail(format!("lower {:.6}, upper {:.6}", reduced.lower, reduced.upper)),
                );
                out.push(
                    CheckResult::flag(
                        Scope::Jsr,
                        format!("JSR of gated class below gate cap on {name}"),
                        gated.upper <= 0.9 + 1e-12,
                        "",
                    )
                    .with_detail(format!("lower {:.6}, upper {:.6}", gated.lower, gated.upper)),
                );
            }
            Err(e) => out.push(CheckResult::failed(Scope::Jsr, label, e)),
        }
    }
    out
}

fn check_lambda(graphs: &[(String, Graph)], seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for (name, g) in graphs {
        match lambda_vs_jsr(g, class_eps(g), 24, 300, seed) {
            Ok(r) => {
                out.push(CheckResult::flag(Scope::Lambda, format!("lambda <= JSR lower on {name}"), r.holds, format!(
                    "lambda {:.9} (modulus {:.9}), lower {:.9}, gap {:.3e}",
                    r.lambda_algebraic, r.lambda_modulus, r.estimate.lower, r.gap
                )));
                out.push(CheckResult::bound(
                    Scope::Lambda,
                    format!("rho(P~_rw) = lambda on {name}"),
                    r.identity_error,
                    LAMBDA_TOL,
                ));
            }
            Err(e) => out.push(CheckResult::failed(Scope::Lambda, format!("lambda <= JSR lower on {name}"), e)),
        }
    }
    out
}

/// `μ` of the counterexample system over `steps` layers.
fn counterexample_mu(steps: usize) -> crate::Result<(Vec<f64>, f64)> {
    let sys = counterexample_system();
    let rec = run_trajectory(&sys.graph, &sys.x, &sys.weights(steps), &sys.rule(), steps)?;
    let drift = rec.states.iter().map(|s| s.max_abs_diff(&sys.x)).fold(0.0, f64::max);
    Ok((rec.series.mu, drift))
}

fn check_counterexample() -> Vec<CheckResult> {
    let target = 2f64.sqrt() / 6.0;
    match counterexample_mu(1000) {
        Ok((mus, drift)) => {
            let dev = mus.iter().map(|m| (m - target).abs()).fold(0.0, f64::max);
            vec![
                CheckResult::bound(Scope::Counterexample, "X fixed over 1000 steps", drift, 1e-12),
                CheckResult::bound(Scope::Counterexample, "mu constant at sqrt(2)/6", dev, 1e-12)
                    .with_detail(format!("mu = {:.5}", mus[mus.len() - 1])),
            ]
        }
        Err(e) => vec![CheckResult::failed(Scope::Counterexample, "counterexample fixed point", e)],
    }
}

/// First layer with `μ < 1e-6` when A3′ weights drive a GAT on `K₃`.
pub(crate) fn a3prime_hitting_time(seed: u64, depth: usize) -> crate::Result<Option<usize>> {
    let g = generate_graph(GraphSpec::Complete { n: 3 }, 0, false)?;
    let d = 4;
    let ws = WeightSequence::substochastic_a3prime(d, depth, 0.1, seed)?;
    let report = check_weight_assumptions(&ws, WeightCondition::A3Prime { xi: 0.1 });
    if !report.holds {
        return Err(crate::Error::InvalidArgument(format!("weights violate A3': {:?}", report.violations.first())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = normal(3, d, &mut rng);
    let spec = AttentionSpec::random_gat(d, 0.2, 1.0, &mut rng);
    let rec = run_trajectory(&g, &x0, &ws, &LayerRule::new(spec, NonlinearitySpec::Relu), depth)?;
    Ok(rec.series.mu.iter().position(|&m| m < 1e-6))
}

fn check_a3prime(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut worst = Some(0);
    for s in 0..5 {
        match a3prime_hitting_time(seed + s, 300) {
            Ok(t) => worst = worst.zip(t).map(|(a, b)| a.max(b)),
            Err(e) => {
                out.push(CheckResult::failed(Scope::A3Prime, "A3' weights oversmooth", e));
                return out;
            }
        }
    }
    out.push(CheckResult::flag(
        Scope::A3Prime,
        "A3' weights drive mu below 1e-6 within 300 layers",
        worst.is_some(),
        format!("slowest hitting layer {worst:?}"),
    ));
    out.push(match counterexample_mu(300) {
        Ok((mus, _)) => {
            let min = mus.iter().copied().fold(f64::INFINITY, f64::min);
            CheckResult::flag(Scope::A3Prime, "asymmetric pattern keeps mu >= 0.2", min >= 0.2, format!("min mu {min:.6}"))
        }
        Err(e) => CheckResult::failed(Scope::A3Prime, "asymmetric pattern keeps mu >= 0.2", e),
    });
    out
}

/// Runs the selected checks. Failures, including errors such as an A1
/// violation, become report entries.
pub fn verify_suite(opts: &VerifyOptions) -> VerificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut checks = Vec::new();
    for &scope in &opts.scopes {
        checks.extend(match scope {
            Scope::A4 => check_a4(),
            Scope::Mu => check_mu(&mut rng),
            Scope::Projection => check_projection(&mut rng),
            Scope::Membership => check_membership_scope(&opts.graphs, &mut rng),
            Scope::Expansion => check_expansion(opts.seed),
            Scope::Kronecker => check_kronecker(opts.seed),
            Scope::Positivity => check_positivity(&opts.graphs, opts.seed),
            Scope::Contraction => check_contraction(&opts.graphs, opts.seed),
            Scope::Ergodicity => check_ergodicity(&opts.graphs, opts.seed),
            Scope::Jsr => check_jsr(&opts.graphs, opts.seed),
            Scope::Lambda => check_lambda(&opts.graphs, opts.seed),
            Scope::Counterexample => check_counterexample(),
            Scope::A3Prime => check_a3prime(opts.seed),
        });
    }
    let n_failed = checks.iter().filter(|c| !c.passed).count();
    VerificationReport { passed: n_failed == 0, n_checks: checks.len(), n_failed, checks }
}
