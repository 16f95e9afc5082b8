//! Real symmetric bilinear forms: inertia, distance to the degenerate cone and
//! connecting paths of fixed inertia.

use crate::jet::{Jet, MatJet};
use crate::linalg::{from_eigen, sym, sym_eigen};
use crate::{Error, Mat, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_ZERO_TOL: f64 = 1e-9;

/// `n×n` symmetric matrix; symmetry is enforced when constructed.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricForm {
    m: Mat,
}

impl SymmetricForm {
    /// Symmetrize `(M + Mᵀ)/2`. Panics if `m` is not square.
    pub fn new(m: Mat) -> Self {
        assert!(m.is_square(), "symmetric form needs a square matrix");
        SymmetricForm { m: sym(&m) }
    }

    pub fn try_new(m: Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!("form must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        Ok(Self::new(m))
    }

    pub fn zeros(n: usize) -> Self {
        SymmetricForm { m: Mat::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        SymmetricForm { m: Mat::identity(n, n) }
    }

    pub fn diag(d: &[f64]) -> Self {
        SymmetricForm { m: Mat::from_diagonal(&nalgebra::DVector::from_column_slice(d)) }
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Mat {
        &self.m
    }

    pub fn into_matrix(self) -> Mat {
        self.m
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        sym_eigen(&self.m).0
    }

    /// `Zᵀ S Z`.
    pub fn congruence(&self, z: &Mat) -> Self {
        Self::new(z.transpose() * &self.m * z)
    }

    pub fn scale(&self, s: f64) -> Self {
        SymmetricForm { m: &self.m * s }
    }

    /// Largest absolute eigenvalue.
    pub fn norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0_f64, |a, x| a.max(x.abs()))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(x);
        (v.transpose() * &self.m * &v)[(0, 0)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inertia {
    pub n_plus: usize,
    pub n_minus: usize,
    pub n_zero: usize,
}

impl Inertia {
    /// Index of the form: the number of negative eigenvalues.
    pub fn index(&self) -> usize {
        self.n_minus
    }

    pub fn signature(&self) -> i64 {
        self.n_plus as i64 - self.n_minus as i64
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.n_zero == 0
    }
}

impl From<(usize, usize, usize)> for Inertia {
    fn from((n_plus, n_minus, n_zero): (usize, usize, usize)) -> Self {
        Inertia { n_plus, n_minus, n_zero }
    }
}

/// Counts of eigenvalues above, below and inside `±zero_tol·‖S‖`.
pub fn inertia(s: &SymmetricForm, zero_tol: f64) -> Inertia {
    inertia_of_eigenvalues(&s.eigenvalues(), zero_tol)
}

pub fn inertia_of_eigenvalues(ev: &[f64], zero_tol: f64) -> Inertia {
    let scale = ev.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let band = zero_tol * scale;
    let mut out = Inertia { n_plus: 0, n_minus: 0, n_zero: 0 };
    for &l in ev {
        if scale == 0.0 || l.abs() <= band {
            out.n_zero += 1;
        } else if l > 0.0 {
            out.n_plus += 1;
        } else {
            out.n_minus += 1;
        }
    }
    out
}

/// Smallest singular value, the spectral distance to the nearest degenerate form.
pub fn distance_to_degenerate(s: &SymmetricForm) -> f64 {
    s.eigenvalues().iter().fold(f64::INFINITY, |a, x| a.min(x.abs()))
}

/// Smooth path `[0, 1] → forms of fixed inertia` between two nondegenerate forms.
///
/// Eigenvalues keep their signs and move log-linearly in magnitude; for `n = 2`
/// the eigenbasis rotates at constant speed through the shorter angle mod π.
#[derive(Clone, Debug)]
pub struct SpectralPath {
    signs: Vec<f64>,
    log0: Vec<f64>,
    log1: Vec<f64>,
    theta0: f64,
    dtheta: f64,
}

impl SpectralPath {
    pub fn new(s0: &SymmetricForm, s1: &SymmetricForm) -> Result<Self> {
        let n = s0.n();
        if s1.n() != n {
            return Err(Error::Dimension("path endpoints differ in size".into()));
        }
        if n > 2 {
            return Err(Error::Invalid("connecting paths are implemented for n <= 2".into()));
        }
        let (v0, e0) = sym_eigen(s0.matrix());
        let (v1, e1) = sym_eigen(s1.matrix());
        let i0 = inertia_of_eigenvalues(&v0, DEFAULT_ZERO_TOL);
        let i1 = inertia_of_eigenvalues(&v1, DEFAULT_ZERO_TOL);
        if !i0.is_nondegenerate() || !i1.is_nondegenerate() {
            return Err(Error::Degenerate("path endpoints must be nondegenerate".into()));
        }
        if i0 != i1 {
            return Err(Error::Invalid(format!("inertia mismatch {i0:?} vs {i1:?}")));
        }
        let (theta0, dtheta) = if n == 2 {
            let a0 = e0[(1, 0)].atan2(e0[(0, 0)]);
            let a1 = e1[(1, 0)].atan2(e1[(0, 0)]);
            let pi = std::f64::consts::PI;
            let d = (a1 - a0).rem_euclid(pi);
            (a0, if d > 0.5 * pi { d - pi } else { d })
        } else {
            (0.0, 0.0)
        };
        Ok(SpectralPath {
            signs: v0.iter().map(|x| x.signum()).collect(),
            log0: v0.iter().map(|x| x.abs().ln()).collect(),
            log1: v1.iter().map(|x| x.abs().ln()).collect(),
            theta0,
            dtheta,
        })
    }

    pub fn n(&self) -> usize {
        self.signs.len()
    }

    pub fn eval(&self, s: f64) -> SymmetricForm {
        let vals: Vec<f64> = (0..self.n())
            .map(|i| self.signs[i] * ((1.0 - s) * self.log0[i] + s * self.log1[i]).exp())
            .collect();
        SymmetricForm { m: from_eigen(&vals, &self.rotation(self.theta0 + s * self.dtheta)) }
    }

    fn rotation(&self, th: f64) -> Mat {
        if self.n() == 1 {
            return Mat::identity(1, 1);
        }
        let (s, c) = th.sin_cos();
        Mat::from_row_slice(2, 2, &[c, -s, s, c])
    }

    /// Jet of the path composed with a scalar parameter curve.
    pub fn jet(&self, s: &Jet) -> MatJet {
        let order = s.order();
        let n = self.n();
        let lam: Vec<Jet> = (0..n)
            .map(|i| {
                let l = s.scale(self.log1[i] - self.log0[i]).add_const(self.log0[i]);
                l.exp().scale(self.signs[i])
            })
            .collect();
        if n == 1 {
            return MatJet(lam[0].0.iter().map(|&c| Mat::from_element(1, 1, c)).collect());
        }
        let th = s.scale(self.dtheta).add_const(self.theta0);
        let (sn, cs) = th.sin_cos();
        // R diag(l1, l2) Rᵀ with R = [[c, -s], [s, c]]
        let cc = &cs * &cs;
        let ss = &sn * &sn;
        let sc = &sn * &cs;
        let m00 = &(&lam[0] * &cc) + &(&lam[1] * &ss);
        let m11 = &(&lam[0] * &ss) + &(&lam[1] * &cc);
        let m01 = &(&lam[0] - &lam[1]) * &sc;
        MatJet(
            (0..=order)
                .map(|k| Mat::from_row_slice(2, 2, &[m00.0[k], m01.0[k], m01.0[k], m11.0[k]]))
                .collect(),
        )
    }

    pub fn sample(&self, steps: usize) -> Vec<SymmetricForm> {
        let steps = steps.max(1);
        (0..=steps).map(|k| self.eval(k as f64 / steps as f64)).collect()
    }
}

/// Sampled path of `steps + 1` forms from `s0` to `s1` with constant inertia.
pub fn index_path(s0: &SymmetricForm, s1: &SymmetricForm, steps: usize) -> Result<Vec<SymmetricForm>> {
    Ok(SpectralPath::new(s0, s1)?.sample(steps))
}
