//! Attention score functions and the masked softmax that turns them into
//! row-stochastic aggregation operators supported on the graph.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::Matrix;

/// Attention function `Ψ` and its parameters. `h_i` below denotes row `i` of
/// `XW`, i.e. `Wᵀ X_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttentionSpec {
    /// `e_ij = LeakyReLU(aᵀ [h_i ‖ h_j])`, `a` of length `2d'`.
    Gat { a: Vec<f64>, leaky_slope: f64 },
    /// `e_ij = aᵀ LeakyReLU(M [h_i ‖ h_j])`, `M` of shape `k × 2d'`, `a` of length `k`.
    GatV2 { a: Vec<f64>, m: Matrix, leaky_slope: f64 },
    /// `e_ij = scale · ⟨h_i, h_j⟩`; `scale` defaults to `1/√d'`.
    DotProduct { scale: Option<f64> },
    /// `e_ij = 0`: the random-walk operator `D_deg⁻¹ A`.
    Constant,
}

impl AttentionSpec {
    /// GAT parameters `a ~ N(0, std²)` of length `2d`.
    pub fn random_gat(d: usize, leaky_slope: f64, std: f64, rng: &mut impl Rng) -> Self {
        let a = (0..2 * d).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
        AttentionSpec::Gat { a, leaky_slope }
    }

    /// GATv2 parameters with a `hidden × 2d` mixing matrix.
    pub fn random_gatv2(d: usize, hidden: usize, leaky_slope: f64, std: f64, rng: &mut impl Rng) -> Self {
        let a = (0..hidden).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
        let m = Matrix::from_fn(hidden, 2 * d, |_, _| {
            rng.sample::<f64, _>(StandardNormal) / (2.0 * d as f64).sqrt()
        });
        AttentionSpec::GatV2 { a, m, leaky_slope }
    }

    fn check(&self, d: usize) -> Result<()> {
        let slope_ok = |s: f64| s > 0.0 && s < 1.0;
        match self {
            AttentionSpec::Gat { a, leaky_slope } => {
                if a.len() != 2 * d {
                    return Err(Error::DimensionMismatch(format!(
                        "GAT vector a has length {}, expected 2d' = {}",
                        a.len(),
                        2 * d
                    )));
                }
                if !slope_ok(*leaky_slope) {
                    return Err(Error::InvalidArgument(format!("leaky slope {leaky_slope} outside (0, 1)")));
                }
            }
            AttentionSpec::GatV2 { a, m, leaky_slope } => {
                if m.cols() != 2 * d || m.rows() != a.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "GATv2 expects M of shape {}x{} and a of length {}, got {}x{} and {}",
                        a.len(),
                        2 * d,
                        m.rows(),
                        m.rows(),
                        m.cols(),
                        a.len()
                    )));
                }
                if !slope_ok(*leaky_slope) {
                    return Err(Error::InvalidArgument(format!("leaky slope {leaky_slope} outside (0, 1)")));
                }
            }
            AttentionSpec::DotProduct { scale } => {
                if let Some(s) = scale {
                    if !s.is_finite() {
                        return Err(Error::InvalidArgument("dot-product scale must be finite".into()));
                    }
                }
            }
            AttentionSpec::Constant => {}
        }
        Ok(())
    }
}

fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Raw scores `e_ij` for every ordered edge, row `i` aligned with
/// [`Graph::neighbors`]`(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeScores {
    rows: Vec<Vec<f64>>,
}

impl EdgeScores {
    /// Wraps per-row scores. Each row must match the neighbourhood size.
    pub fn new(g: &Graph, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != g.n_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "{} score rows for {} nodes",
                rows.len(),
                g.n_nodes()
            )));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != g.neighbors(i).len() {
                return Err(Error::DimensionMismatch(format!(
                    "node {i}: {} scores for {} neighbours",
                    r.len(),
                    g.neighbors(i).len()
                )));
            }
        }
        Ok(EdgeScores { rows })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// Score of the ordered edge `(i, j)`, if present.
    pub fn get(&self, g: &Graph, i: usize, j: usize) -> Option<f64> {
        g.neighbors(i).binary_search(&j).ok().map(|k| self.rows[i][k])
    }

    /// Adds `shift` to every score in row `i`.
    pub fn shift_row(&mut self, i: usize, shift: f64) {
        self.rows[i].iter_mut().for_each(|e| *e += shift);
    }
}

/// Computes `e_ij = Ψ(Wᵀ X_i, Wᵀ X_j)` for every ordered edge of `g`.
pub fn attention_scores(x: &Matrix, w: &Matrix, spec: &AttentionSpec, g: &Graph) -> Result<EdgeScores> {
    if x.rows() != g.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} rows for {} nodes",
            x.rows(),
            g.n_nodes()
        )));
    }
    let h = x.try_matmul(w)?;
    let d = h.cols();
    spec.check(d)?;
    let n = g.n_nodes();
    let rows = match spec {
        AttentionSpec::Constant => (0..n).map(|i| vec![0.0; g.neighbors(i).len()]).collect(),
        AttentionSpec::Gat { a, leaky_slope } => {
            let (a_src, a_dst) = a.split_at(d);
            let src: Vec<f64> = (0..n).map(|i| dot(a_src, h.row(i))).collect();
            let dst: Vec<f64> = (0..n).map(|j| dot(a_dst, h.row(j))).collect();
            (0..n)
                .map(|i| {
                    g.neighbors(i).iter().map(|&j| leaky_relu(src[i] + dst[j], *leaky_slope)).collect()
                })
                .collect()
        }
        AttentionSpec::GatV2 { a, m, leaky_slope } => {
            let k = m.rows();
            let m_src = Matrix::from_fn(k, d, |r, c| m[(r, c)]);
            let m_dst = Matrix::from_fn(k, d, |r, c| m[(r, d + c)]);
            let src: Vec<Vec<f64>> = (0..n).map(|i| m_src.mul_vec(h.row(i))).collect();
            let dst: Vec<Vec<f64>> = (0..n).map(|j| m_dst.mul_vec(h.row(j))).collect();
            (0..n)
                .map(|i| {
                    g.neighbors(i)
                        .iter()
                        .map(|&j| {
                            (0..k)
                                .map(|r| a[r] * leaky_relu(src[i][r] + dst[j][r], *leaky_slope))
                                .sum()
                        })
                        .collect()
                })
                .collect()
        }
        AttentionSpec::DotProduct { scale } => {
            let s = scale.unwrap_or(1.0 / (d.max(1) as f64).sqrt());
            (0..n)
                .map(|i| g.neighbors(i).iter().map(|&j| s * dot(h.row(i), h.row(j))).collect())
                .collect()
        }
    };
    Ok(EdgeScores { rows })
}

/// A row-stochastic matrix supported on the graph's edges, together with its
/// smallest edge entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregationOperator {
    pub p: Matrix,
    /// `min P_ij` over the edges of the graph.
    pub epsilon: f64,
}

/// Row-wise masked softmax of `scores` over each neighbourhood.
pub fn aggregation_operator(scores: &EdgeScores, g: &Graph) -> Result<AggregationOperator> {
    let n = g.n_nodes();
    let mut p = Matrix::zeros(n, n);
    let mut epsilon = f64::INFINITY;
    for i in 0..n {
        let nb = g.neighbors(i);
        if nb.is_empty() {
            return Err(Error::IsolatedNode(i));
        }
        let row = scores.row(i);
        if let Some(k) = row.iter().position(|e| !e.is_finite()) {
            return Err(Error::NonFinite { row: i, col: nb[k] });
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|e| (e - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (&j, e) in nb.iter().zip(&exps) {
            let v = e / total;
            p[(i, j)] = v;
            epsilon = epsilon.min(v);
        }
    }
    Ok(AggregationOperator { p, epsilon })
}

/// Ways a matrix can fail membership in `𝒫_{G,ε}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MembershipViolation {
    Shape { rows: usize, cols: usize, n_nodes: usize },
    RowSum { row: usize, sum: f64 },
    OffSupport { i: usize, j: usize, value: f64 },
    BelowFloor { i: usize, j: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    pub violations: Vec<MembershipViolation>,
}

/// Tolerance on row sums for membership in `𝒫_{G,ε}`.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Checks `p ∈ 𝒫_{G,ε}`: row-stochastic, zero off the graph's support and at
/// least `eps` on every edge.
pub fn check_membership(p: &Matrix, g: &Graph, eps: f64) -> Membership {
    let n = g.n_nodes();
    let mut violations = Vec::new();
    if p.shape() != (n, n) {
        violations.push(MembershipViolation::Shape { rows: p.rows(), cols: p.cols(), n_nodes: n });
        return Membership { member: false, violations };
    }
    for i in 0..n {
        let sum: f64 = p.row(i).iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            violations.push(MembershipViolation::RowSum { row: i, sum });
        }
        for j in 0..n {
            let v = p[(i, j)];
            if g.has_edge(i, j) {
                if !(v >= eps) {
                    violations.push(MembershipViolation::BelowFloor { i, j, value: v });
                }
            } else if v != 0.0 {
                violations.push(MembershipViolation::OffSupport { i, j, value: v });
            }
        }
    }
    Membership { member: violations.is_empty(), violations }
}

/// Entrywise mean of single-head outputs.
pub fn multi_head_average(outputs: &[Matrix]) -> Result<Matrix> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::InvalidArgument("need at least one head".into()))?;
    let mut acc = first.clone();
    for o in &outputs[1..] {
        acc = acc.try_add(o)?;
    }
    Ok(acc.scale(1.0 / outputs.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_graph, GraphSpec};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn k3() -> Graph {
        Graph::new(3, &[(0, 1), (1, 2), (0, 2)], false).unwrap()
    }

    #[test]
    fn constant_and_zero_parameter_scores_vanish() {
        let g = k3();
        let x = Matrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        let w = Matrix::identity(2);
        let s = attention_scores(&x, &w, &AttentionSpec::Constant, &g).unwrap();
        assert!((0..3).all(|i| s.row(i).iter().all(|&e| e == 0.0)));
        let zero_gat = AttentionSpec::Gat { a: vec![0.0; 4], leaky_slope: 0.2 };
        let s = attention_scores(&x, &w, &zero_gat, &g).unwrap();
        assert!((0..3).all(|i| s.row(i).iter().all(|&e| e == 0.0)));
    }

    #[test]
    fn gat_scalar_score() {
        let g = Graph::new(2, &[(0, 1)], false).unwrap();
        let x = Matrix::column_vector(&[1.0, 2.0]);
        let w = Matrix::identity(1);
        let spec = AttentionSpec::Gat { a: vec![1.0, 1.0], leaky_slope: 0.2 };
        let s = attention_scores(&x, &w, &spec, &g).unwrap();
        assert_eq!(s.get(&g, 0, 1), Some(3.0));
        let neg = AttentionSpec::Gat { a: vec![-1.0, -1.0], leaky_slope: 0.2 };
        let s = attention_scores(&x, &w, &neg, &g).unwrap();
        assert_abs_diff_eq!(s.get(&g, 0, 1).unwrap(), -0.6, epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = k3();
        let x = Matrix::zeros(3, 2);
        assert!(attention_scores(&x, &Matrix::identity(3), &AttentionSpec::Constant, &g).is_err());
        let spec = AttentionSpec::Gat { a: vec![1.0; 3], leaky_slope: 0.2 };
        assert!(matches!(
            attention_scores(&x, &Matrix::identity(2), &spec, &g),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn softmax_cases() {
        let g = k3();
        let zero = EdgeScores::new(&g, vec![vec![0.0; 2]; 3]).unwrap();
        let op = aggregation_operator(&zero, &g).unwrap();
        assert_eq!(op.epsilon, 0.5);
        assert_eq!(op.p, g.random_walk_operator().unwrap());

        let k4 = generate_graph(GraphSpec::Complete { n: 4 }, 0, true).unwrap();
        let zero = EdgeScores::new(&k4, vec![vec![0.0; 4]; 4]).unwrap();
        let op = aggregation_operator(&zero, &k4).unwrap();
        assert!(op.p.as_slice().iter().all(|&v| v == 0.25));

        let star = generate_graph(GraphSpec::Star { n: 3 }, 0, false).unwrap();
        let s = EdgeScores::new(&star, vec![vec![3f64.ln(), 0.0], vec![0.0], vec![0.0]]).unwrap();
        let op = aggregation_operator(&s, &star).unwrap();
        assert_abs_diff_eq!(op.p[(0, 1)], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(op.p[(0, 2)], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn softmax_survives_large_scores() {
        let g = k3();
        let s = EdgeScores::new(&g, vec![vec![1000.0, 999.0], vec![-1e4, 0.0], vec![0.0, 0.0]]).unwrap();
        let op = aggregation_operator(&s, &g).unwrap();
        assert!(op.p.first_non_finite().is_none());
        assert!(check_membership(&op.p, &g, op.epsilon).member);
    }

    #[test]
    fn isolated_node_cannot_normalize() {
        let g = Graph::new(3, &[(0, 1)], false).unwrap();
        let s = EdgeScores::new(&g, vec![vec![0.0], vec![0.0], vec![]]).unwrap();
        assert_eq!(aggregation_operator(&s, &g), Err(Error::IsolatedNode(2)));
    }

    #[test]
    fn membership_checks() {
        let g = k3();
        let p = g.random_walk_operator().unwrap();
        assert!(check_membership(&p, &g, 0.4).member);
        let m = check_membership(&p, &g, 0.6);
        assert!(!m.member);
        assert_eq!(m.violations.len(), 6);
        assert!(m.violations.iter().all(|v| matches!(v, MembershipViolation::BelowFloor { .. })));

        let mut off = p.clone();
        off[(0, 0)] = 0.1;
        off[(0, 1)] = 0.4;
        let m = check_membership(&off, &g, 0.1);
        assert!(!m.member);
        assert!(m.violations.contains(&MembershipViolation::OffSupport { i: 0, j: 0, value: 0.1 }));
    }

    #[test]
    fn head_averaging() {
        let o = Matrix::from_fn(3, 2, |i, j| i as f64 - j as f64 * 0.5);
        assert_eq!(multi_head_average(std::slice::from_ref(&o)).unwrap(), o);
        assert_eq!(multi_head_average(&[o.clone(), o.clone()]).unwrap(), o);
        let avg = multi_head_average(&[o.clone(), o.scale(-1.0)]).unwrap();
        assert_eq!(avg.max_abs(), 0.0);
        assert!(multi_head_average(&[o, Matrix::zeros(2, 2)]).is_err());
        assert!(multi_head_average(&[]).is_err());
    }

    #[test]
    fn gatv2_and_dot_product_produce_members() {
        let g = generate_graph(GraphSpec::Cycle { n: 5 }, 0, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Matrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
        let w = Matrix::identity(3);
        for spec in [
            AttentionSpec::random_gatv2(3, 4, 0.2, 1.0, &mut rng),
            AttentionSpec::DotProduct { scale: None },
        ] {
            let s = attention_scores(&x, &w, &spec, &g).unwrap();
            let op = aggregation_operator(&s, &g).unwrap();
            assert!(op.epsilon > 0.0);
            assert!(check_membership(&op.p, &g, op.epsilon).member);
        }
    }
}
