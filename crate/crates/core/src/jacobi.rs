//! Cyclic Jacobi eigendecomposition for small symmetric matrices.

use crate::matrix::Matrix;

const MAX_SWEEPS: usize = 100;

/// Relative off-diagonal Frobenius norm at which the sweep loop stops.
pub const CONVERGENCE: f64 = 1e-12;

/// Eigenvalues (descending) and matching unit eigenvectors (as rows).
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

fn off_norm(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a.get(i, j) * a.get(i, j);
            }
        }
    }
    s.sqrt()
}

/// Decomposes a symmetric matrix. Only the symmetric part is meaningful;
/// callers pass covariance matrices.
pub fn symmetric_eigen(input: &Matrix) -> SymmetricEigen {
    let n = input.nrows();
    assert_eq!(n, input.ncols(), "matrix must be square");
    let mut a = input.clone();
    let mut v = Matrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let scale = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && off_norm(&a) > CONVERGENCE * scale.max(f64::MIN_POSITIVE) {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)).then(i.cmp(&j)));
    SymmetricEigen {
        values: order.iter().map(|&i| a.get(i, i)).collect(),
        vectors: order.iter().map(|&i| v.column(i)).collect(),
        sweeps,
    }
}
