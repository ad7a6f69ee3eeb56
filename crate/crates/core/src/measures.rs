use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::Matrix;

/// Node similarity `μ(X) = ‖X − 1γ_X‖_F` with `γ_X` the mean row.
pub fn mu(x: &Matrix) -> f64 {
    let n = x.rows();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for j in 0..x.cols() {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        total += col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    }
    total.sqrt()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirichletConvention {
    /// `Σ_{i<j, A_ij=1} ‖X_i − X_j‖²`, i.e. half the sum over ordered pairs.
    #[default]
    Unnormalized,
    /// `Σ_{i<j, A_ij=1} ‖X_i/√d_i − X_j/√d_j‖²`.
    DegreeNormalized,
}

/// Dirichlet energy of `x` on `g`. Self-loops contribute nothing.
pub fn dirichlet_energy(x: &Matrix, g: &Graph, convention: DirichletConvention) -> Result<f64> {
    if x.rows() != g.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} rows for {} nodes",
            x.rows(),
            g.n_nodes()
        )));
    }
    let deg = g.degrees();
    let mut e = 0.0;
    for (i, j) in g.edges().filter(|(i, j)| i != j) {
        let (si, sj) = match convention {
            DirichletConvention::Unnormalized => (1.0, 1.0),
            DirichletConvention::DegreeNormalized => {
                (1.0 / (deg[i] as f64).sqrt(), 1.0 / (deg[j] as f64).sqrt())
            }
        };
        e += x
            .row(i)
            .iter()
            .zip(x.row(j))
            .map(|(a, b)| (si * a - sj * b).powi(2))
            .sum::<f64>();
    }
    Ok(e)
}

/// Helmert projection onto the orthogonal complement of `span{1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    pub b: Matrix,
}

impl Projection {
    pub fn n(&self) -> usize {
        self.b.cols()
    }

    /// `B P Bᵀ`.
    pub fn reduce(&self, p: &Matrix) -> Result<Matrix> {
        self.b.try_matmul(p)?.try_matmul(&self.b.transpose())
    }
}

/// Row `k` (1-based) holds `1/√(k(k+1))` in its first `k` slots and
/// `−k/√(k(k+1))` in slot `k+1`.
pub fn projection_matrix(n: usize) -> Result<Projection> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("projection needs N >= 2, got {n}")));
    }
    let b = Matrix::from_fn(n - 1, n, |r, c| {
        let k = (r + 1) as f64;
        let s = 1.0 / (k * (k + 1.0)).sqrt();
        if c <= r {
            s
        } else if c == r + 1 {
            -k * s
        } else {
            0.0
        }
    });
    Ok(Projection { b })
}

/// The reduced operator `P̃ = B P Bᵀ`, which satisfies `BP = P̃B` whenever
/// `P` is row-stochastic.
pub fn reduced_operator(p: &Matrix, proj: &Projection) -> Result<Matrix> {
    if p.shape() != (proj.n(), proj.n()) {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, projection expects {}x{}",
            p.rows(),
            p.cols(),
            proj.n(),
            proj.n()
        )));
    }
    proj.reduce(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_graph, GraphSpec};
    use crate::numerics::spectral_radius;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn mu_examples() {
        let c = Matrix::from_fn(4, 3, |_, j| j as f64 - 1.5);
        assert_eq!(mu(&c), 0.0);
        let x = Matrix::column_vector(&[0.0, 2.0]);
        assert_abs_diff_eq!(mu(&x), 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn dirichlet_examples() {
        let g = Graph::new(2, &[(0, 1)], false).unwrap();
        let x = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        assert_eq!(dirichlet_energy(&x, &g, DirichletConvention::Unnormalized).unwrap(), 4.0);

        let k3 = Graph::new(3, &[(0, 1), (1, 2), (0, 2)], false).unwrap();
        let x = Matrix::column_vector(&[0.0, 1.0, 2.0]);
        assert_eq!(dirichlet_energy(&x, &k3, DirichletConvention::Unnormalized).unwrap(), 6.0);
        let c = Matrix::filled(3, 2, 0.7);
        for conv in [DirichletConvention::Unnormalized, DirichletConvention::DegreeNormalized] {
            assert_eq!(dirichlet_energy(&c, &k3, conv).unwrap(), 0.0);
        }
    }

    #[test]
    fn normalized_dirichlet_on_star() {
        let g = generate_graph(GraphSpec::Star { n: 3 }, 0, false).unwrap();
        let x = Matrix::column_vector(&[2f64.sqrt(), 1.0, 1.0]);
        let e = dirichlet_energy(&x, &g, DirichletConvention::DegreeNormalized).unwrap();
        assert_abs_diff_eq!(e, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn helmert_rows() {
        let p = projection_matrix(2).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(p.b[(0, 0)], h, epsilon = 1e-15);
        assert_abs_diff_eq!(p.b[(0, 1)], -h, epsilon = 1e-15);

        let p3 = projection_matrix(3).unwrap();
        let bx = p3.b.mul_vec(&[1.0, -1.0, 0.0]);
        assert_abs_diff_eq!(bx.iter().map(|v| v * v).sum::<f64>().sqrt(), 2f64.sqrt(), epsilon = 1e-14);
        assert!(projection_matrix(1).is_err());
    }

    #[test]
    fn reduced_operator_examples() {
        let proj = projection_matrix(4).unwrap();
        let r = reduced_operator(&Matrix::identity(4), &proj).unwrap();
        assert!(r.max_abs_diff(&Matrix::identity(3)) < 1e-12);
        let r = reduced_operator(&Matrix::filled(4, 4, 0.25), &proj).unwrap();
        assert!(r.max_abs() < 1e-12);

        let k3 = Graph::new(3, &[(0, 1), (1, 2), (0, 2)], false).unwrap();
        let proj = projection_matrix(3).unwrap();
        let r = reduced_operator(&k3.random_walk_operator().unwrap(), &proj).unwrap();
        assert_abs_diff_eq!(spectral_radius(&r).unwrap(), 0.5, epsilon = 1e-12);
        assert!(reduced_operator(&Matrix::identity(2), &proj).is_err());
    }

    fn matrix_strategy(n: usize, d: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-5.0..5.0f64, n * d).prop_map(move |v| Matrix::new(n, d, v).unwrap())
    }

    fn stochastic_strategy(n: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(0.01..1.0f64, n * n).prop_map(move |v| {
            let m = Matrix::new(n, n, v).unwrap();
            let s = m.row_sums();
            Matrix::from_fn(n, n, |i, j| m[(i, j)] / s[i])
        })
    }

    proptest! {
        #[test]
        fn projection_is_orthonormal(n in 2usize..12) {
            let b = projection_matrix(n).unwrap().b;
            prop_assert!(b.mul_vec(&vec![1.0; n]).iter().all(|v| v.abs() < 1e-12));
            let bbt = b.matmul(&b.transpose());
            prop_assert!(bbt.max_abs_diff(&Matrix::identity(n - 1)) < 1e-12);
        }

        #[test]
        fn mu_matches_projection(x in (2usize..7, 1usize..4).prop_flat_map(|(n, d)| matrix_strategy(n, d))) {
            let b = projection_matrix(x.rows()).unwrap().b;
            prop_assert!((mu(&x) - b.matmul(&x).frobenius()).abs() < 1e-12);
        }

        #[test]
        fn mu_is_translation_invariant_and_subadditive(
            (x, y, c) in (2usize..7, 1usize..4).prop_flat_map(|(n, d)| {
                (matrix_strategy(n, d), matrix_strategy(n, d), prop::collection::vec(-3.0..3.0f64, d))
            })
        ) {
            let shifted = Matrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] + c[j]);
            prop_assert!((mu(&shifted) - mu(&x)).abs() < 1e-12);
            prop_assert!(mu(&x.try_add(&y).unwrap()) <= mu(&x) + mu(&y) + 1e-12);
        }

        #[test]
        fn reduced_operator_intertwines(p in (2usize..7).prop_flat_map(stochastic_strategy)) {
            let proj = projection_matrix(p.rows()).unwrap();
            let pt = reduced_operator(&p, &proj).unwrap();
            let lhs = proj.b.matmul(&p);
            let rhs = pt.matmul(&proj.b);
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }

        #[test]
        fn dirichlet_is_bounded_by_mu(x in matrix_strategy(5, 3), seed in 0u64..1000) {
            let g = generate_graph(GraphSpec::ErdosRenyi { n: 5, p: 0.6 }, seed, false).unwrap();
            let dmax = g.max_degree() as f64;
            let e = dirichlet_energy(&x, &g, DirichletConvention::Unnormalized).unwrap();
            let m = mu(&x);
            prop_assert!(e <= 2.0 * dmax * m * m + 1e-9);
            prop_assert!(e.sqrt() <= (2.0 * dmax).sqrt() * m + 1e-9);
        }
    }
}
