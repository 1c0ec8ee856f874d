//! Dense matrix-vector kernels plus the two numerical utilities the solvers
//! need: a power-iteration estimate of the squared spectral norm and a
//! minimum-norm least-squares solve.
//!
//! Everything here operates on plain `f64` slices and owned vectors; matrices
//! are dense row-major. All functions are pure.

use crate::error::{Error, Result};

/// Real coordinate vector. Finiteness of the entries is an invariant of the
/// problem data and is checked where instances are constructed.
pub type Vector = Vec<f64>;

pub const DEFAULT_POWER_TOL: f64 = 1e-10;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "DenseMatrix::new",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Copy of column `j`.
    pub fn column(&self, j: usize) -> Vector {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Submatrix keeping the listed columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(self.rows * indices.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(indices.iter().map(|&j| row[j]));
        }
        DenseMatrix {
            rows: self.rows,
            cols: indices.len(),
            data,
        }
    }

    /// `A x` as the standard dense product.
    pub fn matvec(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "matvec",
                expected: self.cols,
                actual: x.len(),
            });
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| dot(row, x))
            .collect())
    }

    /// `A^T y`.
    pub fn matvec_t(&self, y: &[f64]) -> Result<Vector> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "matvec_t",
                expected: self.rows,
                actual: y.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.data.chunks_exact(self.cols).zip(y) {
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Gram matrix `A^T A` (cols x cols). Only used on narrow selections.
    pub fn gram(&self) -> DenseMatrix {
        let n = self.cols;
        let mut g = DenseMatrix::zeros(n, n);
        for row in self.data.chunks_exact(n) {
            for i in 0..n {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                for (j, &rj) in row.iter().enumerate().skip(i) {
                    g.data[i * n + j] += ri * rj;
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g.data[i * n + j] = g.data[j * n + i];
            }
        }
        g
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn norm1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `x + alpha * y`, allocated.
pub fn axpy(x: &[f64], alpha: f64, y: &[f64]) -> Vector {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a + alpha * b).collect()
}

pub fn sub(x: &[f64], y: &[f64]) -> Vector {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn scale(x: &[f64], alpha: f64) -> Vector {
    x.iter().map(|a| a * alpha).collect()
}

/// Estimate of `||A||_2^2` by power iteration on `A^T A`.
///
/// Starts from the deterministic all-ones direction so repeated runs agree
/// exactly. The returned value is a Rayleigh quotient of `A^T A`, hence
/// nonnegative and a lower bound on the true squared spectral norm; callers
/// that need an upper bound apply a safety factor on top.
pub fn spectral_norm_sq(a: &DenseMatrix, tol: f64, max_iter: usize) -> f64 {
    assert!(tol > 0.0 && max_iter >= 1);
    let n = a.cols();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut rayleigh = 0.0;
    for iter in 0..max_iter {
        let av = a.matvec(&v).expect("v has length cols");
        let w = a.matvec_t(&av).expect("Av has length rows");
        let next = dot(&v, &w);
        let wn = norm2(&w);
        if wn == 0.0 {
            return 0.0;
        }
        v = scale(&w, 1.0 / wn);
        if iter > 0 && (next - rayleigh).abs() <= tol * next.max(f64::MIN_POSITIVE) {
            return next;
        }
        rayleigh = next;
    }
    rayleigh
}

/// Power-iteration estimate with the default tolerance and iteration budget.
pub fn spectral_norm_sq_default(a: &DenseMatrix) -> f64 {
    spectral_norm_sq(a, DEFAULT_POWER_TOL, 10 * (a.rows() + a.cols()))
}

/// Minimum-2-norm solution of `min ||Ax - b||_2`.
///
/// Runs conjugate gradients on the normal equations `A^T A x = A^T b`, whose
/// right-hand side always lies in the range of the operator, so the system is
/// consistent even for rank-deficient matrices (the companion system
/// `A A^T u = b` is not: column-centered matrices annihilate the all-ones
/// direction). Started from zero the iterates stay in the row space of `A`,
/// which is what makes the returned solution minimum-norm. `tol` is the
/// absolute target for the normal-equation residual `||A^T (Ax - b)||_2`.
pub fn min_norm_lsq(a: &DenseMatrix, b: &[f64], tol: f64) -> Result<Vector> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            context: "min_norm_lsq",
            expected: a.rows(),
            actual: b.len(),
        });
    }
    let rhs = a.matvec_t(b)?;
    let apply = |x: &[f64]| {
        let ax = a.matvec(x).expect("dims");
        a.matvec_t(&ax).expect("dims")
    };
    let cap = 4 * a.rows().max(a.cols()) + 50;
    cg_solve(apply, &rhs, tol, cap, "min_norm_lsq")
}

/// Conjugate gradients for a symmetric positive semidefinite operator.
fn cg_solve(
    apply: impl Fn(&[f64]) -> Vector,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
    context: &'static str,
) -> Result<Vector> {
    let mut x = vec![0.0; rhs.len()];
    let mut r = rhs.to_vec();
    let mut rs = dot(&r, &r);
    if rs.sqrt() <= tol {
        return Ok(x);
    }
    let mut p = r.clone();
    for _ in 0..max_iter {
        let ap = apply(&p);
        let denom = dot(&p, &ap);
        if denom <= 0.0 {
            // Exhausted the reachable Krylov space; x is the best projection.
            break;
        }
        let alpha = rs / denom;
        x = axpy(&x, alpha, &p);
        r = axpy(&r, -alpha, &ap);
        let rs_next = dot(&r, &r);
        if rs_next.sqrt() <= tol {
            return Ok(x);
        }
        p = axpy(&r, rs_next / rs, &p);
        rs = rs_next;
    }
    Err(Error::NoConvergence {
        context,
        iterations: max_iter,
        residual: rs.sqrt(),
    })
}

/// Cholesky factor of a symmetric positive definite matrix.
pub struct Cholesky {
    n: usize,
    factor: Vec<f64>, // lower triangle, row-major
}

impl Cholesky {
    pub fn factor(matrix: &DenseMatrix, context: &'static str) -> Result<Self> {
        assert_eq!(matrix.rows(), matrix.cols());
        let n = matrix.rows();
        let max_diag = (0..n).fold(0.0f64, |m, i| m.max(matrix.get(i, i)));
        let pivot_floor = max_diag * n as f64 * f64::EPSILON;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = matrix.get(i, j);
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= pivot_floor {
                        return Err(Error::RankDeficient(context));
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, factor: l })
    }

    /// Solves `L L^T x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vector {
        let n = self.n;
        debug_assert_eq!(rhs.len(), n);
        let mut y = rhs.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.factor[i * n + k] * y[k];
            }
            y[i] /= self.factor[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.factor[k * n + i] * y[k];
            }
            y[i] /= self.factor[i * n + i];
        }
        y
    }

    /// Trace of the inverse of the factored matrix: `||L^{-1}||_F^2`.
    pub fn trace_inverse(&self) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            for i in j..n {
                for k in j..i {
                    col[i] -= self.factor[i * n + k] * col[k];
                }
                col[i] /= self.factor[i * n + i];
            }
            total += col[j..].iter().map(|v| v * v).sum::<f64>();
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::testutil;
    use proptest::prelude::*;

    fn random_matrix(rng: &mut Rng, m: usize, n: usize) -> DenseMatrix {
        let data = (0..m * n).map(|_| rng.normal()).collect();
        DenseMatrix::new(m, n, data).unwrap()
    }

    #[test]
    fn matvec_identity() {
        let a = DenseMatrix::identity(2);
        assert_eq!(a.matvec(&[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn matvec_hand_sum() {
        let a = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(a.matvec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    #[allow(clippy::needless_range_loop)] // the index loop is the oracle
    fn matvec_matches_entrywise_oracle() {
        let mut rng = Rng::new(11);
        let a = random_matrix(&mut rng, 5, 8);
        let x: Vector = (0..8).map(|_| rng.normal()).collect();
        let got = a.matvec(&x).unwrap();
        // Independent entrywise dot-product loop.
        for i in 0..5 {
            let mut expect = 0.0;
            for j in 0..8 {
                expect += a.get(i, j) * x[j];
            }
            let denom = expect.abs().max(1.0);
            assert!((got[i] - expect).abs() / denom <= 1e-12);
        }
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let a = DenseMatrix::identity(2);
        assert!(matches!(
            a.matvec(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spectral_norm_identity_and_diag() {
        let tol = 1e-10;
        let a = DenseMatrix::identity(3);
        assert!((spectral_norm_sq(&a, tol, 100) - 1.0).abs() <= tol);

        let d = DenseMatrix::new(2, 2, vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((spectral_norm_sq(&d, tol, 1000) - 9.0).abs() <= 9.0 * tol);
    }

    #[test]
    fn spectral_norm_matches_svd_oracle() {
        let mut rng = Rng::new(23);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 10, 20);
            let est = spectral_norm_sq_default(&a);
            let svals = testutil::singular_values(&a);
            let truth = svals[0] * svals[0];
            assert!(
                (est - truth).abs() <= 1e-6 * truth,
                "estimate {est} vs oracle {truth}"
            );
        }
    }

    #[test]
    fn spectral_norm_zero_matrix() {
        let a = DenseMatrix::zeros(3, 4);
        assert_eq!(spectral_norm_sq(&a, 1e-10, 50), 0.0);
    }

    #[test]
    fn spectral_norm_below_frobenius() {
        let mut rng = Rng::new(31);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 6, 9);
            assert!(spectral_norm_sq_default(&a) <= a.frobenius_norm_sq() * (1.0 + 1e-12));
        }
        // Rank one: the two norms agree.
        let u: Vector = (0..5).map(|_| rng.normal()).collect();
        let v: Vector = (0..7).map(|_| rng.normal()).collect();
        let mut data = Vec::new();
        for ui in &u {
            for vj in &v {
                data.push(ui * vj);
            }
        }
        let a = DenseMatrix::new(5, 7, data).unwrap();
        let fro = a.frobenius_norm_sq();
        assert!((spectral_norm_sq_default(&a) - fro).abs() <= 1e-10 * fro);
    }

    #[test]
    fn lsq_identity() {
        let a = DenseMatrix::identity(2);
        let x = min_norm_lsq(&a, &[1.0, 2.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn lsq_minimum_norm_completion() {
        let a = DenseMatrix::new(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let x = min_norm_lsq(&a, &[2.0], 1e-12).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-10);
        assert!(x[1].abs() < 1e-12 && x[2].abs() < 1e-12);
    }

    #[test]
    fn lsq_matches_qr_oracle() {
        let mut rng = Rng::new(47);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 4, 8);
            let b: Vector = (0..4).map(|_| rng.normal()).collect();
            let x = min_norm_lsq(&a, &b, 1e-10).unwrap();
            let r = sub(&a.matvec(&x).unwrap(), &b);
            assert!(norm2(&r) <= 1e-8, "residual {}", norm2(&r));

            let x_qr = testutil::min_norm_solve_qr(&a, &b);
            assert!(norm2(&sub(&x, &x_qr)) <= 1e-7 * norm2(&x_qr).max(1.0));

            // Orthogonal to the null space: x lies in the row space, so its
            // projection onto the row space equals itself.
            let proj = testutil::project_onto_rowspace(&a, &x);
            assert!(norm2(&sub(&proj, &x)) <= 1e-8 * norm2(&x).max(1.0));
        }
    }

    #[test]
    fn lsq_normal_equation_residual() {
        let mut rng = Rng::new(53);
        for &(m, n) in &[(6usize, 10usize), (10, 6)] {
            let a = random_matrix(&mut rng, m, n);
            let b: Vector = (0..m).map(|_| rng.normal()).collect();
            let x = min_norm_lsq(&a, &b, 1e-10).unwrap();
            let resid = sub(&a.matvec(&x).unwrap(), &b);
            let normal_resid = a.matvec_t(&resid).unwrap();
            let atb = a.matvec_t(&b).unwrap();
            assert!(norm2(&normal_resid) <= 1e-6 * norm2(&atb));
        }
    }

    #[test]
    fn lsq_handles_rank_deficient_consistently() {
        // Duplicated rows: b = (1, 2) is inconsistent, yet the least-squares
        // problem has the unique minimum-norm solution (1.5, 0, 0).
        let a = DenseMatrix::new(2, 3, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let x = min_norm_lsq(&a, &[1.0, 2.0], 1e-10).unwrap();
        assert!((x[0] - 1.5).abs() <= 1e-10);
        assert!(x[1] == 0.0 && x[2] == 0.0);
    }

    #[test]
    fn lsq_unreachable_tolerance_reports_residual() {
        // Hilbert-style matrix: squaring its conditioning in the normal
        // equations leaves a residual plateau far above the tolerance.
        let n = 20;
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(1.0 / (i + j + 1) as f64);
            }
        }
        let a = DenseMatrix::new(n, n, data).unwrap();
        let mut b = vec![0.0; n];
        b[0] = 1.0;
        match min_norm_lsq(&a, &b, 1e-300) {
            Err(Error::NoConvergence { residual, .. }) => {
                assert!(residual.is_finite() && residual > 0.0)
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_roundtrip_and_trace() {
        let mut rng = Rng::new(71);
        let a = random_matrix(&mut rng, 12, 6);
        let g = a.gram();
        let chol = Cholesky::factor(&g, "test").unwrap();
        let rhs: Vector = (0..6).map(|_| rng.normal()).collect();
        let x = chol.solve(&rhs);
        let gx = g.matvec(&x).unwrap();
        assert!(norm2(&sub(&gx, &rhs)) <= 1e-8 * norm2(&rhs));

        let eigs = testutil::symmetric_eigenvalues(&g);
        let trace_oracle: f64 = eigs.iter().map(|l| 1.0 / l).sum();
        assert!((chol.trace_inverse() - trace_oracle).abs() <= 1e-8 * trace_oracle);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let g = DenseMatrix::new(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            Cholesky::factor(&g, "test"),
            Err(Error::RankDeficient(_))
        ));
    }

    proptest! {
        #[test]
        fn matvec_is_linear(seed in 0u64..1000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let mut rng = Rng::new(seed);
            let a = random_matrix(&mut rng, 4, 6);
            let x: Vector = (0..6).map(|_| rng.normal()).collect();
            let y: Vector = (0..6).map(|_| rng.normal()).collect();
            let combo: Vector = x.iter().zip(&y).map(|(xi, yi)| alpha * xi + beta * yi).collect();
            let lhs = a.matvec(&combo).unwrap();
            let rhs: Vector = a
                .matvec(&x)
                .unwrap()
                .iter()
                .zip(&a.matvec(&y).unwrap())
                .map(|(ax, ay)| alpha * ax + beta * ay)
                .collect();
            let scale_ref = norm2(&lhs).max(norm2(&rhs)).max(1.0);
            prop_assert!(norm2(&sub(&lhs, &rhs)) <= 1e-12 * scale_ref);
        }
    }
}
