//! Independent numerical oracles used only by the test suite. These routines
//! deliberately avoid the production code paths they are used to check.

// Reference implementations stay close to their textbook index form.
#![allow(clippy::needless_range_loop, clippy::manual_memcpy)]

use crate::linalg::{dot, norm2, DenseMatrix, Vector};

/// Singular values by one-sided Jacobi: rotate column pairs until all pairs
/// are orthogonal, then the column norms are the singular values. Descending.
pub fn singular_values(a: &DenseMatrix) -> Vector {
    let m = a.rows();
    let n = a.cols();
    // Work on columns of A (or of A^T if that is thinner).
    let mut cols: Vec<Vector> = if m >= n {
        (0..n).map(|j| a.column(j)).collect()
    } else {
        (0..m).map(|i| a.row(i).to_vec()).collect()
    };
    let k = cols.len();
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..k {
            for q in p + 1..k {
                let app = dot(&cols[p], &cols[p]);
                let aqq = dot(&cols[q], &cols[q]);
                let apq = dot(&cols[p], &cols[q]);
                if apq.abs() <= 1e-30 {
                    continue;
                }
                off = off.max(apq.abs() / (app * aqq).sqrt().max(1e-300));
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..cols[p].len() {
                    let vp = cols[p][i];
                    let vq = cols[q][i];
                    cols[p][i] = c * vp - s * vq;
                    cols[q][i] = s * vp + c * vq;
                }
            }
        }
        if off < 1e-14 {
            break;
        }
    }
    let mut svals: Vector = cols.iter().map(|c| norm2(c)).collect();
    svals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    svals
}

/// Eigenvalues of a symmetric matrix by classical two-sided Jacobi sweeps.
pub fn symmetric_eigenvalues(g: &DenseMatrix) -> Vector {
    assert_eq!(g.rows(), g.cols());
    let n = g.rows();
    let mut a: Vec<Vector> = (0..n).map(|i| g.row(i).to_vec()).collect();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() < 1e-13 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let tau = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p][i];
                    let aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Thin Householder QR of a matrix; returns (Q, R) with Q m x k orthonormal
/// columns and R k x k upper triangular, k = min(m, n) assuming full rank.
fn householder_qr(a: &DenseMatrix) -> (Vec<Vector>, Vec<Vector>) {
    let m = a.rows();
    let n = a.cols();
    assert!(m >= n, "householder_qr expects a tall matrix");
    let mut work: Vec<Vector> = (0..n).map(|j| a.column(j)).collect();
    let mut reflectors: Vec<Vector> = Vec::new();
    for k in 0..n {
        let mut v: Vector = vec![0.0; m];
        for i in k..m {
            v[i] = work[k][i];
        }
        let alpha = -v[k].signum() * norm2(&v[k..]);
        v[k] -= alpha;
        let vn = norm2(&v);
        if vn > 0.0 {
            v.iter_mut().for_each(|x| *x /= vn);
            for col in work.iter_mut() {
                let proj = 2.0 * dot(&v, col);
                for i in 0..m {
                    col[i] -= proj * v[i];
                }
            }
        }
        reflectors.push(v);
    }
    // R is the top n x n of the transformed columns.
    let r: Vec<Vector> = (0..n).map(|i| (0..n).map(|j| work[j][i]).collect()).collect();
    // Q columns: apply reflectors in reverse to unit vectors.
    let mut q: Vec<Vector> = Vec::new();
    for j in 0..n {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        for v in reflectors.iter().rev() {
            let proj = 2.0 * dot(v, &e);
            for i in 0..m {
                e[i] -= proj * v[i];
            }
        }
        q.push(e);
    }
    (q, r)
}

/// Minimum-norm least-squares solution via dense QR of `A^T`:
/// with A^T = QR, the min-norm solution of `Ax = b` is `Q R^{-T} b`.
pub fn min_norm_solve_qr(a: &DenseMatrix, b: &[f64]) -> Vector {
    let m = a.rows();
    let n = a.cols();
    assert!(m <= n, "oracle covers the wide full-row-rank case");
    let mut at_data = Vec::with_capacity(m * n);
    for j in 0..n {
        for i in 0..m {
            at_data.push(a.get(i, j));
        }
    }
    let at = DenseMatrix::new(n, m, at_data).unwrap();
    let (q, r) = householder_qr(&at);
    // Forward-substitute R^T y = b.
    let mut y = b.to_vec();
    for i in 0..m {
        for k in 0..i {
            y[i] -= r[k][i] * y[k];
        }
        y[i] /= r[i][i];
    }
    let mut x = vec![0.0; n];
    for (col, &yi) in q.iter().zip(&y) {
        for i in 0..n {
            x[i] += col[i] * yi;
        }
    }
    x
}

/// Orthogonal projection of `x` onto the row space of `A` (via QR of A^T).
pub fn project_onto_rowspace(a: &DenseMatrix, x: &[f64]) -> Vector {
    let m = a.rows();
    let n = a.cols();
    assert!(m <= n);
    let mut at_data = Vec::with_capacity(m * n);
    for j in 0..n {
        for i in 0..m {
            at_data.push(a.get(i, j));
        }
    }
    let at = DenseMatrix::new(n, m, at_data).unwrap();
    let (q, _) = householder_qr(&at);
    let mut proj = vec![0.0; n];
    for col in &q {
        let c = dot(col, x);
        for i in 0..n {
            proj[i] += c * col[i];
        }
    }
    proj
}

/// Error function, Abramowitz & Stegun 7.1.26 (absolute error < 1.5e-7).
pub fn erf(x: f64) -> f64 {
    let sign = x.signum();
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}
