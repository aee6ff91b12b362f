//! Dense linear-algebra helpers shared by the design and geometry builders.

use nalgebra::{DMatrix, DVector};

/// Symmetric eigendecomposition with eigenvalues sorted descending and a
/// deterministic sign convention: the first entry of each eigenvector with
/// magnitude above `sign_tol` is made positive.
pub fn symmetric_eigen_sorted(m: &DMatrix<f64>, sign_tol: f64) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("NaN eigenvalue")
            .then(a.cmp(&b))
    });
    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    fix_column_signs(&mut vectors, sign_tol);
    (values, vectors)
}

/// Makes the first entry with magnitude above `tol` in each column positive.
pub fn fix_column_signs(m: &mut DMatrix<f64>, tol: f64) {
    for j in 0..m.ncols() {
        let mut flip = false;
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v.abs() > tol {
                flip = v < 0.0;
                break;
            }
        }
        if flip {
            for i in 0..m.nrows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

/// Greedy column-pivoted Householder QR, used only to rank columns by how
/// much independent mass they carry. Returns the pivot order (original
/// column indices, best first) and the magnitudes of the R diagonal.
pub fn pivoted_qr_columns(g: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>) {
    let rows = g.nrows();
    let cols = g.ncols();
    let steps = rows.min(cols);
    let mut work = g.clone();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut rdiag = Vec::with_capacity(steps);

    for k in 0..steps {
        // Pivot: remaining column with the largest trailing norm.
        let mut best = k;
        let mut best_norm = -1.0;
        for j in k..cols {
            let norm: f64 = (k..rows).map(|i| work[(i, j)].powi(2)).sum();
            if norm > best_norm {
                best_norm = norm;
                best = j;
            }
        }
        if best != k {
            work.swap_columns(k, best);
            perm.swap(k, best);
        }

        // Householder reflection zeroing the trailing part of column k.
        let norm = best_norm.max(0.0).sqrt();
        if norm == 0.0 {
            rdiag.push(0.0);
            continue;
        }
        let alpha = if work[(k, k)] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| work[(i, k)]).collect();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv > 0.0 {
            for j in k..cols {
                let dot: f64 = (k..rows).map(|i| v[i - k] * work[(i, j)]).sum();
                let scale = 2.0 * dot / vtv;
                for i in k..rows {
                    work[(i, j)] -= scale * v[i - k];
                }
            }
        }
        rdiag.push(alpha.abs());
    }
    (perm, rdiag)
}

/// Two-norm condition number estimated from the singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 1.0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Thin QR orthonormalization of the columns of `m` (must have full column
/// rank). Returns the Q factor with the same column span.
pub fn orthonormalize_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    // A negative R diagonal flips the corresponding column span direction;
    // normalize signs so the output is deterministic and span-equivalent.
    let r = qr.r();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Max absolute entry of a matrix; zero for empty matrices.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn eigen_sorted_descending_with_positive_leading_entries() {
        let m = dmatrix![2.0, 1.0; 1.0, 2.0];
        let (vals, vecs) = symmetric_eigen_sorted(&m, 1e-12);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        for j in 0..2 {
            assert!(vecs[(0, j)] > 0.0);
            let residual = &m * vecs.column(j) - vals[j] * vecs.column(j);
            assert!(residual.amax() < 1e-12);
        }
    }

    #[test]
    fn pivoted_qr_prefers_dominant_columns() {
        // Column 2 has by far the largest norm, then column 0.
        let g = dmatrix![
            1.0, 0.1, 10.0;
            0.5, 0.1, -8.0
        ];
        let (perm, rdiag) = pivoted_qr_columns(&g);
        assert_eq!(perm[0], 2);
        assert_eq!(rdiag.len(), 2);
        assert!(rdiag[0] >= rdiag[1]);
    }

    #[test]
    fn orthonormalize_produces_orthonormal_basis_of_same_span() {
        let m = dmatrix![
            1.0, 1.0;
            1.0, 0.0;
            0.0, 2.0
        ];
        let q = orthonormalize_columns(&m);
        let gram = q.transpose() * &q;
        assert!(max_abs(&(gram - DMatrix::identity(2, 2))) < 1e-12);
        // Span check: projecting m onto q leaves no residual.
        let proj = &q * (q.transpose() * &m);
        assert!(max_abs(&(proj - m)) < 1e-12);
    }
}
