//! Dense small-matrix linear algebra.
//!
//! Everything downstream works on [`Matrix`], a row-major `f64` matrix sized
//! for desk-scale graphs (N up to a few hundred). Norms, spectral radius,
//! symmetric eigenvalues and the log-linear rate fit live here.
//!
//! The general (asymmetric) eigenvalue problem is delegated to nalgebra's real
//! Schur decomposition; the spectral norm is computed by power iteration on
//! `MᵀM`.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix of finite reals.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        let m = Matrix { rows, cols, data };
        if let Some((row, col)) = m.first_non_finite() {
            return Err(Error::NonFinite { row, col });
        }
        Ok(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    /// Single-column matrix.
    pub fn column_vector(v: &[f64]) -> Self {
        Matrix { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|k| (k / self.cols.max(1), k % self.cols.max(1)))
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Entrywise absolute value `|M|`.
    pub fn abs(&self) -> Matrix {
        self.map(f64::abs)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn try_matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix product. Panics on mismatched inner dimensions.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        self.try_matmul(rhs).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "vector length does not match matrix columns");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn try_add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn try_sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Matrix) -> Matrix {
        let (r1, c1) = self.shape();
        let (r2, c2) = rhs.shape();
        Matrix::from_fn(r1 * r2, c1 * c2, |i, j| self[(i / r2, j / c2)] * rhs[(i % r2, j % c2)])
    }

    /// `M^k` for square `M` (by repeated squaring).
    pub fn pow(&self, mut k: u32) -> Matrix {
        assert!(self.is_square(), "pow requires a square matrix");
        let mut result = Matrix::identity(self.rows);
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = result.matmul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.matmul(&base);
            }
        }
        result
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (acc, v) in s.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        s
    }

    /// `max |M_ij|`, zero for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max |A_ij - B_ij|`; infinite when the shapes differ.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

/// Norm selector for [`matrix_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Maximum absolute column sum.
    One,
    /// Largest singular value.
    Two,
    /// Maximum absolute row sum.
    Inf,
    Frobenius,
    /// Maximum absolute entry.
    Max,
    /// Entrywise `(p, q)` norm: `(Σ_j (Σ_i |M_ij|^p)^{q/p})^{1/q}`, either
    /// exponent may be `f64::INFINITY`.
    Pq(f64, f64),
}

impl NormKind {
    /// Whether `‖AB‖ ≤ ‖A‖‖B‖` holds for this norm on square matrices.
    pub fn is_submultiplicative(self) -> bool {
        match self {
            NormKind::One | NormKind::Two | NormKind::Inf | NormKind::Frobenius => true,
            NormKind::Max => false,
            // (1,1) is the entrywise 1-norm, which is submultiplicative.
            NormKind::Pq(p, q) => (p == 1.0 && q == 1.0) || (p == 2.0 && q == 2.0),
        }
    }
}

/// Settings for the power iterations in this module.
#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        PowerIteration { seed: 0x5eed, restarts: 10, max_iter: 10_000, rel_tol: 1e-12 }
    }
}

fn validate(m: &Matrix) -> Result<()> {
    if m.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if let Some((row, col)) = m.first_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    Ok(())
}

/// Computes the requested norm of `m`.
pub fn matrix_norm(m: &Matrix, kind: NormKind) -> Result<f64> {
    validate(m)?;
    Ok(match kind {
        NormKind::One => m.abs().col_sums().into_iter().fold(0.0, f64::max),
        NormKind::Inf => m.abs().row_sums().into_iter().fold(0.0, f64::max),
        NormKind::Frobenius => m.frobenius(),
        NormKind::Max => m.max_abs(),
        NormKind::Two => two_norm_with(m, &PowerIteration { restarts: 3, ..Default::default() }),
        NormKind::Pq(p, q) => {
            if !(p >= 1.0) || !(q >= 1.0) {
                return Err(Error::InvalidArgument(format!("(p, q) = ({p}, {q}) outside [1, inf]")));
            }
            pq_norm(m, p, q)
        }
    })
}

fn pq_norm(m: &Matrix, p: f64, q: f64) -> f64 {
    let col_norms = (0..m.cols()).map(|j| {
        let col = m.column(j);
        if p.is_infinite() {
            col.iter().fold(0.0, |a: f64, v| a.max(v.abs()))
        } else {
            col.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
        }
    });
    if q.is_infinite() {
        col_norms.fold(0.0, f64::max)
    } else {
        col_norms.map(|c| c.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration from several seeded starts.
fn psd_top_eigenvalue(g: &Matrix, cfg: &PowerIteration) -> f64 {
    let n = g.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: f64 = 0.0;
    for _ in 0..cfg.restarts.max(1) {
        let mut v = random_unit(n, &mut rng);
        let mut estimate = 0.0;
        for _ in 0..cfg.max_iter {
            let w = g.mul_vec(&v);
            let norm = vec_norm(&w);
            if norm == 0.0 {
                estimate = 0.0;
                break;
            }
            // Rayleigh quotient of the normalised iterate.
            let rq: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
            v = w.into_iter().map(|x| x / norm).collect();
            let done = (rq - estimate).abs() <= cfg.rel_tol * rq.abs().max(f64::MIN_POSITIVE);
            estimate = rq;
            if done {
                break;
            }
        }
        best = best.max(estimate);
    }
    best
}

/// Spectral norm by power iteration on the smaller Gram matrix.
pub fn two_norm_with(m: &Matrix, cfg: &PowerIteration) -> f64 {
    let mt = m.transpose();
    let gram = if m.cols() <= m.rows() { mt.matmul(m) } else { m.matmul(&mt) };
    psd_top_eigenvalue(&gram, cfg).max(0.0).sqrt()
}

fn require_square(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    Ok(())
}

/// All eigenvalues of a real square matrix as `(re, im)` pairs.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<(f64, f64)>> {
    validate(m)?;
    require_square(m)?;
    let n = m.rows();
    let schur = nalgebra::linalg::Schur::try_new(m.to_nalgebra(), 1e-15, 100_000 * n.max(1))
        .ok_or_else(|| Error::NoConvergence("real Schur decomposition".into()))?;
    Ok(schur.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect())
}

/// Spectral radius `max |λ|`.
///
/// Eigenvalues come from the real Schur form; if that fails to converge the
/// power-iteration / Gelfand estimate [`spectral_radius_power`] is used.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    validate(m)?;
    require_square(m)?;
    match eigenvalues(m) {
        Ok(ev) => Ok(ev.iter().map(|&(re, im)| re.hypot(im)).fold(0.0, f64::max)),
        Err(_) => Ok(spectral_radius_power(m, &PowerIteration::default())),
    }
}

/// `‖M^k‖_2^{1/k}` for `k = 1..=k_max`. By Gelfand's formula the sequence
/// tends to `ρ(M)` and every term is an upper bound on it.
pub fn gelfand_sequence(m: &Matrix, k_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k_max);
    let mut power = Matrix::identity(m.rows());
    // Track a running scale so long products of large or small matrices stay
    // representable: ‖M^k‖ = scale · ‖power‖.
    let mut log_scale = 0.0;
    let cfg = PowerIteration { restarts: 2, ..Default::default() };
    for k in 1..=k_max {
        power = power.matmul(m);
        let s = power.max_abs();
        if s == 0.0 {
            out.push(0.0);
            out.extend(std::iter::repeat_n(0.0, k_max - k));
            break;
        }
        power = power.scale(1.0 / s);
        log_scale += s.ln();
        let norm = two_norm_with(&power, &cfg);
        out.push(((log_scale + norm.ln()) / k as f64).exp());
    }
    out
}

/// Spectral radius by power iteration with seeded restarts, falling back to
/// the `k = 64` Gelfand term when the iteration does not settle (complex or
/// sign-alternating dominant eigenvalues).
pub fn spectral_radius_power(m: &Matrix, cfg: &PowerIteration) -> f64 {
    let n = m.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<f64> = None;
    for _ in 0..cfg.restarts.max(1) {
        let mut v = random_unit(n, &mut rng);
        let mut prev = f64::NAN;
        let mut converged = None;
        for _ in 0..cfg.max_iter {
            let w = m.mul_vec(&v);
            let norm = vec_norm(&w);
            if norm == 0.0 {
                converged = Some(0.0);
                break;
            }
            if (norm - prev).abs() <= cfg.rel_tol * norm {
                converged = Some(norm);
                break;
            }
            prev = norm;
            v = w.into_iter().map(|x| x / norm).collect();
        }
        if let Some(r) = converged {
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        }
    }
    let gelfand = gelfand_sequence(m, 64).last().copied().unwrap_or(0.0);
    match best {
        // A converged iterate can still sit on a subdominant eigenvector if
        // the start happened to miss the dominant one; the Gelfand term is an
        // upper bound, so only trust values consistent with it.
        Some(r) if r <= gelfand * (1.0 + 1e-9) => r,
        _ => gelfand,
    }
}

fn check_symmetric(s: &Matrix, tol: f64) -> Result<()> {
    require_square(s)?;
    for i in 0..s.rows() {
        for j in (i + 1)..s.cols() {
            let gap = (s[(i, j)] - s[(j, i)]).abs();
            if gap > tol {
                return Err(Error::NotSymmetric { row: i, col: j, gap });
            }
        }
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix, sorted in decreasing order.
pub fn symmetric_eigenvalues(s: &Matrix) -> Result<Vec<f64>> {
    validate(s)?;
    check_symmetric(s, 1e-10)?;
    let n = s.rows();
    let eig = nalgebra::linalg::SymmetricEigen::try_new(s.to_nalgebra(), 1e-15, 100_000 * n.max(1))
        .ok_or_else(|| Error::NoConvergence("symmetric eigendecomposition".into()))?;
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// Second largest eigenvalue of a symmetric matrix, in algebraic order.
pub fn second_eigenvalue_symmetric(s: &Matrix) -> Result<f64> {
    let ev = symmetric_eigenvalues(s)?;
    ev.get(1).copied().ok_or_else(|| {
        Error::InvalidArgument("a 1x1 matrix has no second eigenvalue".into())
    })
}

/// Least-squares fit of `log series[t] ≈ intercept + slope·t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Inclusive layer range the fit used.
    pub window: (usize, usize),
}

impl RateFit {
    /// Per-layer contraction factor `q = e^slope`.
    pub fn q(&self) -> f64 {
        self.slope.exp()
    }

    /// Prefactor `C₁ = e^intercept`.
    pub fn c1(&self) -> f64 {
        self.intercept.exp()
    }
}

/// Fits an exponential rate to `series` over the inclusive window
/// `[start, end]`.
pub fn fit_exponential_rate(series: &[f64], window: (usize, usize)) -> Result<RateFit> {
    let (start, end) = window;
    if end < start || end - start + 1 < 3 {
        return Err(Error::WindowTooShort { start, end });
    }
    if end >= series.len() {
        return Err(Error::InvalidArgument(format!(
            "window end {end} beyond series length {}",
            series.len()
        )));
    }
    let mut xs = Vec::with_capacity(end - start + 1);
    let mut ys = Vec::with_capacity(end - start + 1);
    for (t, &v) in series.iter().enumerate().take(end + 1).skip(start) {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositive { index: t, value: v });
        }
        xs.push(t as f64);
        ys.push(v.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    // Residual noise at the level of rounding counts as a perfect fit; this
    // also covers the zero-variance (constant) series.
    let noise_floor = 1e-24 * n * (1.0 + my * my);
    let r_squared = if ss_res <= noise_floor {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RateFit { slope, intercept, r_squared, window })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn stochastic_example_has_spectral_norm_above_one() {
        let p = m(&[&[0.9, 0.1], &[0.25, 0.75]]);
        let two = matrix_norm(&p, NormKind::Two).unwrap();
        assert_abs_diff_eq!(two, 1.0188, epsilon = 1e-3);
        assert_abs_diff_eq!(spectral_radius(&p).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn named_norms() {
        assert_eq!(matrix_norm(&Matrix::identity(3), NormKind::Inf).unwrap(), 1.0);
        let a = m(&[&[1.0, -2.0], &[3.0, 4.0]]);
        assert_abs_diff_eq!(matrix_norm(&a, NormKind::Pq(1.0, 1.0)).unwrap(), 10.0, epsilon = 1e-14);
        assert_eq!(matrix_norm(&a, NormKind::One).unwrap(), 6.0);
        assert_eq!(matrix_norm(&a, NormKind::Inf).unwrap(), 7.0);
        assert_eq!(matrix_norm(&a, NormKind::Max).unwrap(), 4.0);
        assert_abs_diff_eq!(matrix_norm(&a, NormKind::Frobenius).unwrap(), 30f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(
            matrix_norm(&a, NormKind::Pq(2.0, 2.0)).unwrap(),
            30f64.sqrt(),
            epsilon = 1e-14
        );
        assert_eq!(matrix_norm(&a, NormKind::Pq(f64::INFINITY, f64::INFINITY)).unwrap(), 4.0);
    }

    #[test]
    fn norm_rejects_empty_and_bad_exponents() {
        assert_eq!(matrix_norm(&Matrix::zeros(0, 0), NormKind::Two), Err(Error::EmptyMatrix));
        assert!(matches!(
            matrix_norm(&Matrix::identity(2), NormKind::Pq(0.5, 1.0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn constructor_rejects_non_finite() {
        assert_eq!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { row: 0, col: 1 })
        );
    }

    #[test]
    fn spectral_radius_cases() {
        assert_abs_diff_eq!(spectral_radius(&m(&[&[0.0, 1.0], &[0.0, 0.0]])).unwrap(), 0.0, epsilon = 1e-12);
        let tri = m(&[&[2.0 / 3.0, 0.0], &[1.0 / 3.0, 1.0]]);
        assert_abs_diff_eq!(spectral_radius(&tri).unwrap(), 1.0, epsilon = 1e-12);
        // Rotation: complex pair of modulus 1.
        let rot = m(&[&[0.0, -1.0], &[1.0, 0.0]]);
        assert_abs_diff_eq!(spectral_radius(&rot).unwrap(), 1.0, epsilon = 1e-12);
        assert!(matches!(spectral_radius(&Matrix::zeros(2, 3)), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn power_fallback_agrees_with_schur() {
        let a = m(&[&[0.5, 0.2, 0.0], &[0.1, -0.3, 0.4], &[0.0, 0.6, 0.1]]);
        let schur = spectral_radius(&a).unwrap();
        let power = spectral_radius_power(&a, &PowerIteration::default());
        assert_abs_diff_eq!(schur, power, epsilon = 1e-8);
        let rot = m(&[&[0.0, -0.5], &[0.5, 0.0]]);
        assert_abs_diff_eq!(spectral_radius_power(&rot, &PowerIteration::default()), 0.5, epsilon = 1e-3);
    }

    #[test]
    fn second_eigenvalue_cases() {
        // (A + I)/3 on K3 with self-loops is the uniform matrix.
        let s = Matrix::filled(3, 3, 1.0 / 3.0);
        assert_abs_diff_eq!(second_eigenvalue_symmetric(&s).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(second_eigenvalue_symmetric(&Matrix::identity(2)).unwrap(), 1.0, epsilon = 1e-12);
        let k3 = Matrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 0.5 });
        assert_abs_diff_eq!(second_eigenvalue_symmetric(&k3).unwrap(), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn second_eigenvalue_rejects_asymmetric() {
        let a = m(&[&[1.0, 0.0], &[1e-6, 1.0]]);
        assert!(matches!(second_eigenvalue_symmetric(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn exact_geometric_fit() {
        let series: Vec<f64> = (0..=20).map(|t| 2.0 * 0.5f64.powi(t)).collect();
        let fit = fit_exponential_rate(&series, (0, 20)).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.5f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.q(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn constant_series_fit() {
        let fit = fit_exponential_rate(&[1.0; 10], (0, 9)).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn noisy_geometric_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let series: Vec<f64> = (0..=50)
            .map(|t| 0.9f64.powi(t) + rng.random_range(-1e-6..1e-6))
            .collect();
        let fit = fit_exponential_rate(&series, (0, 50)).unwrap();
        assert!((fit.slope - 0.9f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn fit_errors() {
        assert_eq!(
            fit_exponential_rate(&[1.0, 0.5, 0.25], (0, 1)),
            Err(Error::WindowTooShort { start: 0, end: 1 })
        );
        assert_eq!(
            fit_exponential_rate(&[1.0, 0.5, 0.0, 0.1], (0, 3)),
            Err(Error::NonPositive { index: 2, value: 0.0 })
        );
    }

    #[test]
    fn kron_and_pow() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let k = Matrix::identity(2).kron(&a);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(2, 3)], 2.0);
        assert_eq!(k[(0, 2)], 0.0);
        assert_eq!(a.pow(3), a.matmul(&a).matmul(&a));
        assert_eq!(a.pow(0), Matrix::identity(2));
    }

    #[test]
    fn gelfand_sequence_approaches_radius() {
        let a = m(&[&[0.5, 1.0], &[0.0, 0.25]]);
        let seq = gelfand_sequence(&a, 64);
        assert!(seq.iter().all(|&v| v >= 0.5 - 1e-12));
        assert!((seq[63] - 0.5).abs() < 0.05);
    }
}
