//! The symplectic space `ℝⁿ ⊕ ℝⁿ*`: the form ω, the group and algebra,
//! Lagrangian frames and the charts of the Lagrangian Grassmannian.

use crate::linalg::{
    horizontal_frame, hstack, inverse, j_matrix, j_mul, l0_frame, orthonormalize, rank, singular_values,
    spectral_norm, vstack,
};
use crate::symform::SymmetricForm;
use crate::{Error, Mat, Result};

pub const DEFAULT_RANK_TOL: f64 = 1e-8;
pub const ISOTROPY_TOL: f64 = 1e-10;

/// A vector `(v, α)` of `ℝⁿ ⊕ ℝⁿ*`.
#[derive(Clone, Debug, PartialEq)]
pub struct SympVector {
    data: Vec<f64>,
}

impl SympVector {
    pub fn new(v: &[f64], alpha: &[f64]) -> Result<Self> {
        if v.len() != alpha.len() {
            return Err(Error::Dimension(format!("v has {} entries, alpha {}", v.len(), alpha.len())));
        }
        Ok(SympVector { data: v.iter().chain(alpha).copied().collect() })
    }

    pub fn from_stacked(z: &[f64]) -> Result<Self> {
        if !z.len().is_multiple_of(2) {
            return Err(Error::Dimension("stacked vector must have even length".into()));
        }
        Ok(SympVector { data: z.to_vec() })
    }

    pub fn n(&self) -> usize {
        self.data.len() / 2
    }

    pub fn v(&self) -> &[f64] {
        &self.data[..self.n()]
    }

    pub fn alpha(&self) -> &[f64] {
        &self.data[self.n()..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// `ω(z1, z2) = α2(v1) − α1(v2)`.
pub fn omega(z1: &SympVector, z2: &SympVector) -> Result<f64> {
    if z1.n() != z2.n() {
        return Err(Error::Dimension(format!("omega on sizes {} and {}", z1.n(), z2.n())));
    }
    let a: f64 = z1.v().iter().zip(z2.alpha()).map(|(x, y)| x * y).sum();
    let b: f64 = z1.alpha().iter().zip(z2.v()).map(|(x, y)| x * y).sum();
    Ok(a - b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SympKind {
    Group,
    Algebra,
}

/// An element of `Sp(2n)` or `sp(2n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SympMatrix {
    pub m: Mat,
    pub kind: SympKind,
}

/// `[[A, B], [C, -Aᵀ]]`, with `B` and `C` symmetric.
pub fn assemble_sp(a: &Mat, b: &SymmetricForm, c: &SymmetricForm) -> SympMatrix {
    SympMatrix {
        m: crate::linalg::blocks(a, b.matrix(), c.matrix(), &(-a.transpose())),
        kind: SympKind::Algebra,
    }
}

/// Inverse of [`assemble_sp`].
pub fn split_sp(x: &SympMatrix) -> (Mat, SymmetricForm, SymmetricForm) {
    let (a, b, c, _) = crate::linalg::split(&x.m);
    (a, SymmetricForm::new(b), SymmetricForm::new(c))
}

/// `‖XᵀJ + JX‖∞`, zero exactly on `sp(2n)`.
pub fn algebra_residual(x: &Mat) -> f64 {
    let n = x.nrows() / 2;
    let j = j_matrix(n);
    crate::linalg::max_abs(&(x.transpose() * &j + &j * x))
}

/// Drift `‖MᵀJM − J‖₂` and whether it is within `tol`.
pub fn is_symplectic(m: &Mat, tol: f64) -> (bool, f64) {
    let drift = symplectic_drift(m);
    (drift <= tol, drift)
}

pub fn symplectic_drift(m: &Mat) -> f64 {
    let n = m.nrows() / 2;
    let d = m.transpose() * j_mul(m) - j_matrix(n);
    spectral_norm(&d)
}

/// Cheap upper bound of the drift (Frobenius norm).
pub fn symplectic_drift_frobenius(m: &Mat) -> f64 {
    let n = m.nrows() / 2;
    (m.transpose() * j_mul(m) - j_matrix(n)).norm()
}

/// A `2n×n` frame whose columns span a Lagrangian subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianFrame {
    cols: Mat,
}

impl LagrangianFrame {
    /// Validate rank and isotropy of `cols`.
    pub fn new(cols: Mat) -> Result<Self> {
        Self::with_tol(cols, DEFAULT_RANK_TOL)
    }

    pub fn with_tol(cols: Mat, rank_tol: f64) -> Result<Self> {
        let (r, c) = cols.shape();
        if r != 2 * c || c == 0 {
            return Err(Error::Dimension(format!("Lagrangian frame must be 2n x n, got {r}x{c}")));
        }
        if !cols.iter().all(|x| x.is_finite()) {
            return Err(Error::Invalid("frame has non-finite entries".into()));
        }
        if rank(&cols, rank_tol) < c {
            return Err(Error::Degenerate("frame columns are linearly dependent".into()));
        }
        let q = orthonormalize(&cols);
        let iso = crate::linalg::max_abs(&(q.transpose() * j_mul(&q)));
        if iso > ISOTROPY_TOL {
            return Err(Error::Invalid(format!("frame is not isotropic (|QᵀJQ| = {iso:.2e})")));
        }
        Ok(LagrangianFrame { cols })
    }

    /// Wrap without validation; callers guarantee the invariants.
    pub fn from_cols_unchecked(cols: Mat) -> Self {
        LagrangianFrame { cols }
    }

    /// `L₀ = {0} ⊕ ℝⁿ*`.
    pub fn l0(n: usize) -> Self {
        LagrangianFrame { cols: l0_frame(n) }
    }

    /// `ℝⁿ ⊕ {0}`.
    pub fn horizontal(n: usize) -> Self {
        LagrangianFrame { cols: horizontal_frame(n) }
    }

    /// `{(Sα, α)}` for symmetric `S`.
    pub fn graph(s: &SymmetricForm) -> Self {
        LagrangianFrame { cols: vstack(s.matrix(), &Mat::identity(s.n(), s.n())) }
    }

    pub fn n(&self) -> usize {
        self.cols.ncols()
    }

    pub fn columns(&self) -> &Mat {
        &self.cols
    }

    pub fn into_columns(self) -> Mat {
        self.cols
    }

    /// Orthonormal frame of the same subspace.
    pub fn orthonormal(&self) -> Mat {
        orthonormalize(&self.cols)
    }

    /// Image under a linear map of the ambient space.
    pub fn transform(&self, m: &Mat) -> Self {
        LagrangianFrame { cols: m * &self.cols }
    }
}

/// `dim(L1 ∩ L2) = 2n − rank([L1 | L2])`.
pub fn intersection_dim(l1: &LagrangianFrame, l2: &LagrangianFrame, rank_tol: f64) -> Result<usize> {
    if l1.n() != l2.n() {
        return Err(Error::Dimension("frames of different sizes".into()));
    }
    let m = hstack(&l1.orthonormal(), &l2.orthonormal());
    Ok(2 * l1.n() - rank(&m, rank_tol))
}

/// Smallest singular value of `[L1 | L2]` built from orthonormal frames;
/// zero exactly when the subspaces meet.
pub fn transversality(l1: &LagrangianFrame, l2: &LagrangianFrame) -> f64 {
    let m = hstack(&l1.orthonormal(), &l2.orthonormal());
    *singular_values(&m).last().unwrap()
}

fn check_pair(xi0: &LagrangianFrame, xi1: &LagrangianFrame) -> Result<Mat> {
    if xi0.n() != xi1.n() {
        return Err(Error::Dimension("chart frames of different sizes".into()));
    }
    if intersection_dim(xi0, xi1, DEFAULT_RANK_TOL)? > 0 {
        return Err(Error::NotTransverse("chart pair (xi0, xi1)".into()));
    }
    // N = X1ᵀ J E, invertible exactly when the pair is transverse
    Ok(xi1.columns().transpose() * j_mul(xi0.columns()))
}

/// `φ_{ξ0,ξ1}(L)`: the form `ω(T·,·)` on `ξ0`, in the basis of `xi0`'s
/// columns, where `Gr(T) = L` for `T: ξ0 → ξ1`.
pub fn chart(xi0: &LagrangianFrame, xi1: &LagrangianFrame, l: &LagrangianFrame) -> Result<SymmetricForm> {
    check_pair(xi0, xi1)?;
    if l.n() != xi0.n() {
        return Err(Error::Dimension("chart argument has wrong size".into()));
    }
    if intersection_dim(l, xi1, DEFAULT_RANK_TOL)? > 0 {
        return Err(Error::NotTransverse("L is outside the chart domain".into()));
    }
    Ok(chart_raw(xi0.columns(), xi1.columns(), l.columns()))
}

/// Chart value without domain checks. Solves `[G | −X1][C; D] = E`, then
/// `S = (X1 D)ᵀ J E`.
pub(crate) fn chart_raw(e: &Mat, x1: &Mat, g: &Mat) -> SymmetricForm {
    let n = e.ncols();
    let m = hstack(g, &(-x1));
    let sol = m.lu().solve(e).unwrap_or_else(|| Mat::from_element(2 * n, n, f64::NAN));
    let d = sol.rows(n, n).into_owned();
    SymmetricForm::new((x1 * d).transpose() * j_mul(e))
}

/// The unique `L` transverse to `ξ1` with `chart(ξ0, ξ1, L) = S`:
/// `L = span(E + X1 N⁻ᵀ S)` with `N = X1ᵀ J E`.
pub fn chart_inverse(xi0: &LagrangianFrame, xi1: &LagrangianFrame, s: &SymmetricForm) -> Result<LagrangianFrame> {
    let nmat = check_pair(xi0, xi1)?;
    if s.n() != xi0.n() {
        return Err(Error::Dimension("chart value has wrong size".into()));
    }
    let ninv_t = inverse(&nmat, "chart pairing")?.transpose();
    Ok(LagrangianFrame { cols: xi0.columns() + xi1.columns() * ninv_t * s.matrix() })
}

/// A Lagrangian `ξ1` transverse to both `xi0` and `L` with `chart(xi0, ξ1, L) = P`.
///
/// With `E`, `G` the frames of `xi0` and `L`, `K = GᵀJE` and `H = G K⁻ᵀ`, the
/// pair `(H, E)` is a symplectic basis adapted to `L ⊕ ξ0`; in it the answer is
/// the span of `H − E P⁻¹`.
pub fn complement_with_chart_value(
    l: &LagrangianFrame,
    xi0: &LagrangianFrame,
    p: &SymmetricForm,
) -> Result<LagrangianFrame> {
    if l.n() != xi0.n() || p.n() != l.n() {
        return Err(Error::Dimension("complement inputs differ in size".into()));
    }
    if intersection_dim(l, xi0, DEFAULT_RANK_TOL)? > 0 {
        return Err(Error::NotTransverse("L and xi0".into()));
    }
    let pinv = inverse(p.matrix(), "prescribed chart value")
        .map_err(|_| Error::Degenerate("prescribed chart value".into()))?;
    if crate::symform::inertia(p, crate::symform::DEFAULT_ZERO_TOL).n_zero > 0 {
        return Err(Error::Degenerate("prescribed chart value".into()));
    }
    let e = xi0.columns();
    let g = l.columns();
    let k = g.transpose() * j_mul(e);
    let kinv_t = inverse(&k, "pairing of L and xi0")?.transpose();
    let h = g * kinv_t;
    let xi1 = LagrangianFrame { cols: h - e * pinv };
    let back = chart(xi0, &xi1, l)?;
    let err = crate::linalg::max_abs(&(back.matrix() - p.matrix()));
    if err > 1e-9 * (1.0 + p.norm()) {
        return Err(Error::Residual { what: "chart round trip".into(), value: err, tol: 1e-9 });
    }
    Ok(xi1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn omega_examples() {
        let z1 = SympVector::new(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        let z2 = SympVector::new(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(omega(&z1, &z2).unwrap(), 1.0);
        assert_eq!(omega(&z2, &z1).unwrap(), -1.0);
        assert_eq!(omega(&z1, &z1).unwrap(), 0.0);
        let z3 = SympVector::new(&[1.0], &[0.0]).unwrap();
        assert!(omega(&z1, &z3).is_err());
    }

    #[test]
    fn assemble_split_round_trip() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 0.3]);
        let b = SymmetricForm::new(Mat::from_row_slice(2, 2, &[1.0, 0.2, 0.2, -1.0]));
        let c = SymmetricForm::diag(&[0.7, 0.1]);
        let x = assemble_sp(&a, &b, &c);
        assert!(algebra_residual(&x.m) < 1e-14);
        let (a2, b2, c2) = split_sp(&x);
        assert_eq!(a2, a);
        assert_eq!(b2, b);
        assert_eq!(c2, c);
    }

    #[test]
    fn symplectic_examples() {
        assert_eq!(is_symplectic(&Mat::identity(4, 4), 1e-12), (true, 0.0));
        assert!(is_symplectic(&j_matrix(2), 1e-12).0);
        let d = Mat::from_diagonal(&nalgebra::DVector::from_column_slice(&[2.0, 1.0, 0.5, 1.0]));
        assert!(is_symplectic(&d, 1e-12).0);
        let bad = Mat::from_diagonal(&nalgebra::DVector::from_column_slice(&[2.0, 1.0, 2.0, 1.0]));
        assert!(!is_symplectic(&bad, 1e-12).0);
    }

    #[test]
    fn intersection_examples() {
        let l0 = LagrangianFrame::l0(2);
        assert_eq!(intersection_dim(&l0, &l0, 1e-8).unwrap(), 2);
        assert_eq!(intersection_dim(&l0, &LagrangianFrame::horizontal(2), 1e-8).unwrap(), 0);
        let p = SymmetricForm::diag(&[1.0, 0.0]);
        assert_eq!(intersection_dim(&LagrangianFrame::graph(&p), &l0, 1e-8).unwrap(), 1);
    }

    #[test]
    fn chart_of_graph_is_its_matrix() {
        let xi0 = LagrangianFrame::l0(2);
        let xi1 = LagrangianFrame::horizontal(2);
        let p = SymmetricForm::new(Mat::from_row_slice(2, 2, &[0.4, -1.0, -1.0, 2.0]));
        let s = chart(&xi0, &xi1, &LagrangianFrame::graph(&p)).unwrap();
        assert_relative_eq!(s.matrix(), p.matrix(), epsilon = 1e-14);
        let z = chart(&xi0, &xi1, &xi0).unwrap();
        assert!(z.norm() < 1e-15);
    }

    #[test]
    fn chart_inverse_examples() {
        let xi0 = LagrangianFrame::l0(2);
        let xi1 = LagrangianFrame::horizontal(2);
        let zero = chart_inverse(&xi0, &xi1, &SymmetricForm::zeros(2)).unwrap();
        assert_eq!(intersection_dim(&zero, &xi0, 1e-8).unwrap(), 2);
        let diag = chart_inverse(&xi0, &xi1, &SymmetricForm::identity(2)).unwrap();
        let expect = LagrangianFrame::graph(&SymmetricForm::identity(2));
        assert_eq!(intersection_dim(&diag, &expect, 1e-8).unwrap(), 2);
    }

    #[test]
    fn chart_rejects_non_transverse_pair() {
        let l0 = LagrangianFrame::l0(2);
        assert!(matches!(chart(&l0, &l0, &l0), Err(Error::NotTransverse(_))));
        let xi1 = LagrangianFrame::horizontal(2);
        assert!(chart(&l0, &xi1, &xi1).is_err());
    }

    #[test]
    fn complement_example() {
        let l = LagrangianFrame::horizontal(2);
        let xi0 = LagrangianFrame::l0(2);
        let p = SymmetricForm::diag(&[-1.0, -1.0]);
        let xi1 = complement_with_chart_value(&l, &xi0, &p).unwrap();
        let id_graph = LagrangianFrame::graph(&SymmetricForm::identity(2));
        assert_eq!(intersection_dim(&xi1, &id_graph, 1e-8).unwrap(), 2);
        let s = chart(&xi0, &xi1, &l).unwrap();
        assert_relative_eq!(s.matrix(), p.matrix(), epsilon = 1e-12);
    }

    #[test]
    fn complement_rejects_bad_inputs() {
        let xi0 = LagrangianFrame::l0(2);
        let p = SymmetricForm::diag(&[1.0, -1.0]);
        assert!(complement_with_chart_value(&xi0, &xi0, &p).is_err());
        let l = LagrangianFrame::horizontal(2);
        assert!(complement_with_chart_value(&l, &xi0, &SymmetricForm::diag(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn frame_validation() {
        assert!(LagrangianFrame::new(Mat::identity(4, 2)).is_ok());
        // span{e1, e3} is not isotropic: ω(e1, e3) = 1
        let mut m = Mat::zeros(4, 2);
        m[(0, 0)] = 1.0;
        m[(2, 1)] = 1.0;
        assert!(LagrangianFrame::new(m).is_err());
        assert!(LagrangianFrame::new(Mat::zeros(4, 2)).is_err());
    }
}
