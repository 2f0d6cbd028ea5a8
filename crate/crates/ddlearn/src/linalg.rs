//! Small dense linear-algebra helpers shared across modules.
//!
//! Column dot products go through a single routine so that code paths which
//! must agree bit-for-bit (serial vs. batch encoding) see identical floats.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Dot product of columns `i` and `j` of `m`.
#[inline]
pub(crate) fn col_dot(m: &ArrayView2<f64>, i: usize, j: usize) -> f64 {
    m.column(i).dot(&m.column(j))
}

/// Dot product of column `i` of `m` with `v`.
#[inline]
pub(crate) fn col_vec_dot(m: &ArrayView2<f64>, i: usize, v: &ArrayView1<f64>) -> f64 {
    m.column(i).dot(v)
}

/// Squared Euclidean norm.
#[inline]
pub(crate) fn norm_sq(v: &ArrayView1<f64>) -> f64 {
    v.dot(v)
}

/// In-place Cholesky factorization of a symmetric positive-definite matrix.
/// Returns the lower factor, or `None` when a pivot is not strictly positive.
fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let d = diag.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

fn cholesky_substitute(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves the symmetric positive-definite system `a x = b` by Cholesky.
/// On a failed factorization the diagonal is jittered by `jitter` and the
/// factorization retried once; `None` if that also fails.
pub(crate) fn solve_spd(a: &Array2<f64>, b: &Array1<f64>, jitter: f64) -> Option<Array1<f64>> {
    if let Some(l) = cholesky(a) {
        return Some(cholesky_substitute(&l, b));
    }
    let mut aj = a.clone();
    for i in 0..aj.nrows() {
        aj[(i, i)] += jitter;
    }
    cholesky(&aj).map(|l| cholesky_substitute(&l, b))
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (descending) and the matching eigenvectors as columns.
pub(crate) fn jacobi_eigh(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap());
    let vals = Array1::from_iter(order.iter().map(|&i| m[(i, i)]));
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vecs.column_mut(dst).assign(&v.column(src));
    }
    (vals, vecs)
}

/// Leading singular triple (sigma, u, v) of `e`, computed from the Gram
/// matrix of the smaller side so the eigenproblem stays cheap.
pub(crate) fn top_singular_triple(e: &ArrayView2<f64>) -> (f64, Array1<f64>, Array1<f64>) {
    let (rows, cols) = e.dim();
    if rows <= cols {
        // Gram over rows: G = E E^T, u from its top eigenvector.
        let mut g = Array2::<f64>::zeros((rows, rows));
        for i in 0..rows {
            for j in i..rows {
                let d = e.row(i).dot(&e.row(j));
                g[(i, j)] = d;
                g[(j, i)] = d;
            }
        }
        let (vals, vecs) = jacobi_eigh(&g);
        let sigma = vals[0].max(0.0).sqrt();
        let u = vecs.column(0).to_owned();
        let v = if sigma > 0.0 {
            e.t().dot(&u) / sigma
        } else {
            Array1::zeros(cols)
        };
        (sigma, u, v)
    } else {
        let mut g = Array2::<f64>::zeros((cols, cols));
        for i in 0..cols {
            for j in i..cols {
                let d = col_dot(e, i, j);
                g[(i, j)] = d;
                g[(j, i)] = d;
            }
        }
        let (vals, vecs) = jacobi_eigh(&g);
        let sigma = vals[0].max(0.0).sqrt();
        let v = vecs.column(0).to_owned();
        let u = if sigma > 0.0 {
            e.dot(&v) / sigma
        } else {
            Array1::zeros(rows)
        };
        (sigma, u, v)
    }
}
