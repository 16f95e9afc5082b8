//! Small dense linear-algebra helpers shared by the modules.

use crate::{Error, Mat, Result};
use nalgebra::{DVector, SymmetricEigen};

/// `J = [[0, I], [-I, 0]]` of size `2n`.
pub fn j_matrix(n: usize) -> Mat {
    let mut j = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// Multiply by `J` from the left without forming it: `J [x; y] = [y; -x]`.
pub fn j_mul(m: &Mat) -> Mat {
    let n = m.nrows() / 2;
    let mut out = Mat::zeros(m.nrows(), m.ncols());
    for c in 0..m.ncols() {
        for i in 0..n {
            out[(i, c)] = m[(n + i, c)];
            out[(n + i, c)] = -m[(i, c)];
        }
    }
    out
}

/// Multiply by `J` from the right: `[x y] J = [-y x]`.
pub fn mul_j(m: &Mat) -> Mat {
    let n = m.ncols() / 2;
    let mut out = Mat::zeros(m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for i in 0..n {
            out[(r, i)] = -m[(r, n + i)];
            out[(r, n + i)] = m[(r, i)];
        }
    }
    out
}

pub fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn identity(n: usize) -> Mat {
    Mat::identity(n, n)
}

/// `[0; I]`, the frame of `L₀`.
pub fn l0_frame(n: usize) -> Mat {
    let mut m = Mat::zeros(2 * n, n);
    for i in 0..n {
        m[(n + i, i)] = 1.0;
    }
    m
}

/// `[I; 0]`, the frame of `ℝⁿ ⊕ {0}`.
pub fn horizontal_frame(n: usize) -> Mat {
    let mut m = Mat::zeros(2 * n, n);
    for i in 0..n {
        m[(i, i)] = 1.0;
    }
    m
}

pub fn top(m: &Mat) -> Mat {
    let n = m.nrows() / 2;
    m.rows(0, n).into_owned()
}

pub fn bottom(m: &Mat) -> Mat {
    let n = m.nrows() / 2;
    m.rows(n, n).into_owned()
}

/// Stack two blocks with equal column counts.
pub fn vstack(a: &Mat, b: &Mat) -> Mat {
    let mut m = Mat::zeros(a.nrows() + b.nrows(), a.ncols());
    m.rows_mut(0, a.nrows()).copy_from(a);
    m.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    m
}

pub fn hstack(a: &Mat, b: &Mat) -> Mat {
    let mut m = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    m.columns_mut(0, a.ncols()).copy_from(a);
    m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    m
}

/// Assemble `[[p, q], [r, s]]` from four `n×n` blocks.
pub fn blocks(p: &Mat, q: &Mat, r: &Mat, s: &Mat) -> Mat {
    let n = p.nrows();
    let mut m = Mat::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(p);
    m.view_mut((0, n), (n, n)).copy_from(q);
    m.view_mut((n, 0), (n, n)).copy_from(r);
    m.view_mut((n, n), (n, n)).copy_from(s);
    m
}

/// Split a `2n×2n` matrix into its four `n×n` blocks.
pub fn split(m: &Mat) -> (Mat, Mat, Mat, Mat) {
    let n = m.nrows() / 2;
    (
        m.view((0, 0), (n, n)).into_owned(),
        m.view((0, n), (n, n)).into_owned(),
        m.view((n, 0), (n, n)).into_owned(),
        m.view((n, n), (n, n)).into_owned(),
    )
}

pub fn inverse(m: &Mat, what: &str) -> Result<Mat> {
    let inv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(what.to_string()))?;
    if inv.iter().all(|x| x.is_finite()) {
        Ok(inv)
    } else {
        Err(Error::Singular(what.to_string()))
    }
}

/// `Φ⁻¹ = J⁻¹ Φᵀ J = -J Φᵀ J` for a symplectic `Φ`.
pub fn symplectic_inverse(phi: &Mat) -> Mat {
    -j_mul(&mul_j(&phi.transpose()))
}

/// Singular values in decreasing order.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m)[0]
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
pub fn sym_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.nrows();
    let e = SymmetricEigen::new(sym(m));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| e.eigenvalues[i].partial_cmp(&e.eigenvalues[j]).unwrap());
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &e.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Numerical rank with a threshold relative to the largest singular value.
pub fn rank(m: &Mat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > rel_tol * smax).count(),
        _ => 0,
    }
}

/// Orthonormal basis of the right null space, threshold relative to `scale`.
pub fn null_space(m: &Mat, rel_tol: f64, scale: f64) -> Mat {
    let cols = m.ncols();
    let padded;
    let m = if m.nrows() < cols {
        padded = vstack(m, &Mat::zeros(cols - m.nrows(), cols));
        &padded
    } else {
        m
    };
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let mut basis = Vec::new();
    for i in 0..cols {
        if svd.singular_values[i] <= rel_tol * scale {
            basis.push(vt.row(i).transpose());
        }
    }
    let mut out = Mat::zeros(cols, basis.len());
    for (k, v) in basis.iter().enumerate() {
        out.set_column(k, v);
    }
    out
}

/// Thin QR with the sign of each diagonal entry of `R` made positive.
pub fn orthonormalize(m: &Mat) -> Mat {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..q.ncols() {
        if r[(k, k)] < 0.0 {
            let mut col = q.column_mut(k);
            col.neg_mut();
        }
    }
    q
}

/// Right-multiply `f` by the orthogonal factor that best aligns it with `prev`.
pub fn procrustes_align(f: &Mat, prev: &Mat) -> Mat {
    let m = f.transpose() * prev;
    let svd = m.svd(true, true);
    let u = svd.u.expect("u");
    let vt = svd.v_t.expect("v_t");
    f * (u * vt)
}

pub fn column(v: &[f64]) -> Mat {
    Mat::from_column_slice(v.len(), 1, v)
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Symmetric matrix with the given eigenvalues and eigenvectors (columns).
pub fn from_eigen(vals: &[f64], vecs: &Mat) -> Mat {
    let n = vals.len();
    let mut d = Mat::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = vals[i];
    }
    sym(&(vecs * d * vecs.transpose()))
}
