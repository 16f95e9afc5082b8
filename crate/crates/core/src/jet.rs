//! Truncated Taylor expansions ("jets") of scalar and matrix curves.
//!
//! A jet of order `k` at `t0` stores `c[i] = f⁽ⁱ⁾(t0) / i!` for `i = 0..=k`.
//! Arithmetic on jets propagates derivatives exactly up to that order, which
//! lets the pipeline differentiate compositions of smooth curves without
//! finite differences.

use crate::Mat;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq)]
pub struct Jet(pub Vec<f64>);

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

impl Jet {
    pub fn constant(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        Jet(c)
    }

    /// The identity curve `t ↦ t` expanded at `t0`.
    pub fn variable(t0: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = t0;
        if order > 0 {
            c[1] = 1.0;
        }
        Jet(c)
    }

    /// Build from derivative values `f, f', f'', ...`.
    pub fn from_derivatives(d: &[f64]) -> Self {
        Jet(d.iter().enumerate().map(|(k, v)| v / factorial(k)).collect())
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// `k`-th derivative at the expansion point.
    pub fn deriv(&self, k: usize) -> f64 {
        self.0.get(k).map_or(0.0, |c| c * factorial(k))
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..=self.order()).map(|k| self.deriv(k)).collect()
    }

    /// Jet of the derivative curve (one order lower).
    pub fn derivative(&self) -> Jet {
        if self.order() == 0 {
            return Jet(vec![0.0]);
        }
        Jet((1..self.0.len()).map(|k| k as f64 * self.0[k]).collect())
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let mut c = self.0.clone();
        c.resize(order + 1, 0.0);
        Jet(c)
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet(self.0.iter().map(|c| c * s).collect())
    }

    pub fn add_const(&self, s: f64) -> Jet {
        let mut c = self.0.clone();
        c[0] += s;
        Jet(c)
    }

    pub fn recip(&self) -> Jet {
        let a = &self.0;
        let mut b = vec![0.0; a.len()];
        b[0] = 1.0 / a[0];
        for k in 1..a.len() {
            let s: f64 = (1..=k).map(|j| a[j] * b[k - j]).sum();
            b[k] = -s * b[0];
        }
        Jet(b)
    }

    pub fn div(&self, other: &Jet) -> Jet {
        self * &other.recip()
    }

    pub fn exp(&self) -> Jet {
        let a = &self.0;
        let mut e = vec![0.0; a.len()];
        e[0] = a[0].exp();
        for k in 1..a.len() {
            let s: f64 = (1..=k).map(|j| j as f64 * a[j] * e[k - j]).sum();
            e[k] = s / k as f64;
        }
        Jet(e)
    }

    pub fn ln(&self) -> Jet {
        let a = &self.0;
        let mut l = vec![0.0; a.len()];
        l[0] = a[0].ln();
        for k in 1..a.len() {
            let s: f64 = (1..k).map(|j| j as f64 * l[j] * a[k - j]).sum();
            l[k] = (a[k] - s / k as f64) / a[0];
        }
        Jet(l)
    }

    pub fn sqrt(&self) -> Jet {
        let a = &self.0;
        let mut r = vec![0.0; a.len()];
        r[0] = a[0].sqrt();
        for k in 1..a.len() {
            let s: f64 = (1..k).map(|j| r[j] * r[k - j]).sum();
            r[k] = (a[k] - s) / (2.0 * r[0]);
        }
        Jet(r)
    }

    /// `(sin f, cos f)`.
    pub fn sin_cos(&self) -> (Jet, Jet) {
        let a = &self.0;
        let mut s = vec![0.0; a.len()];
        let mut c = vec![0.0; a.len()];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..a.len() {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for j in 1..=k {
                ss += j as f64 * a[j] * c[k - j];
                cc += j as f64 * a[j] * s[k - j];
            }
            s[k] = ss / k as f64;
            c[k] = -cc / k as f64;
        }
        (Jet(s), Jet(c))
    }

    /// Compose an outer function given by its derivatives `g(x0), g'(x0), ...`
    /// at `x0 = self.value()` (Faà di Bruno through jet powers).
    pub fn compose(&self, outer: &[f64]) -> Jet {
        let order = self.order();
        let mut dx = self.clone();
        dx.0[0] = 0.0;
        let mut out = Jet::constant(outer[0], order);
        let mut pow = Jet::constant(1.0, order);
        for (k, g) in outer.iter().enumerate().skip(1).take(order) {
            pow = &pow * &dx;
            let coeff = g / factorial(k);
            for i in 0..=order {
                out.0[i] += coeff * pow.0[i];
            }
        }
        out
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        let k = self.0.len().min(o.0.len());
        let mut c = vec![0.0; k];
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = (0..=i).map(|j| self.0[j] * o.0[i - j]).sum();
        }
        Jet(c)
    }
}

/// Jet of a matrix-valued curve.
#[derive(Clone, Debug, PartialEq)]
pub struct MatJet(pub Vec<Mat>);

impl MatJet {
    pub fn constant(m: Mat, order: usize) -> Self {
        let (r, c) = m.shape();
        let mut v = vec![Mat::zeros(r, c); order + 1];
        v[0] = m;
        MatJet(v)
    }

    pub fn from_derivatives(d: Vec<Mat>) -> Self {
        MatJet(d.into_iter().enumerate().map(|(k, m)| m / factorial(k)).collect())
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0[0].shape()
    }

    pub fn value(&self) -> &Mat {
        &self.0[0]
    }

    pub fn deriv(&self, k: usize) -> Mat {
        match self.0.get(k) {
            Some(m) => m * factorial(k),
            None => Mat::zeros(self.0[0].nrows(), self.0[0].ncols()),
        }
    }

    pub fn derivative(&self) -> MatJet {
        if self.order() == 0 {
            let (r, c) = self.shape();
            return MatJet(vec![Mat::zeros(r, c)]);
        }
        MatJet((1..self.0.len()).map(|k| &self.0[k] * k as f64).collect())
    }

    pub fn truncate(&self, order: usize) -> MatJet {
        let (r, c) = self.shape();
        let mut v = self.0.clone();
        v.resize(order + 1, Mat::zeros(r, c));
        MatJet(v)
    }

    pub fn transpose(&self) -> MatJet {
        MatJet(self.0.iter().map(|m| m.transpose()).collect())
    }

    pub fn map(&self, f: impl Fn(&Mat) -> Mat) -> MatJet {
        MatJet(self.0.iter().map(f).collect())
    }

    pub fn scale(&self, s: f64) -> MatJet {
        self.map(|m| m * s)
    }

    /// Multiply by a scalar jet.
    pub fn scale_jet(&self, s: &Jet) -> MatJet {
        let k = self.0.len().min(s.0.len());
        let (r, c) = self.shape();
        MatJet(
            (0..k)
                .map(|i| {
                    let mut acc = Mat::zeros(r, c);
                    for j in 0..=i {
                        acc += &self.0[j] * s.0[i - j];
                    }
                    acc
                })
                .collect(),
        )
    }

    /// Left-multiply by a constant matrix.
    pub fn lmul(&self, m: &Mat) -> MatJet {
        self.map(|x| m * x)
    }

    /// Right-multiply by a constant matrix.
    pub fn rmul(&self, m: &Mat) -> MatJet {
        self.map(|x| x * m)
    }

    /// Jet of the square root of a curve of positive definite matrices.
    pub fn sqrt_spd(&self) -> Option<MatJet> {
        let eig = self.0[0].clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return None;
        }
        let q = &eig.eigenvectors;
        let mu: Vec<f64> = eig.eigenvalues.iter().map(|l| l.sqrt()).collect();
        let n = mu.len();
        let mut y = vec![q * Mat::from_diagonal(&nalgebra::DVector::from_vec(mu.clone())) * q.transpose()];
        // Y₀Yₖ + YₖY₀ = Sₖ − Σ YᵢYₖ₋ᵢ, diagonal in the eigenbasis of Y₀
        for k in 1..self.0.len() {
            let mut rhs = self.0[k].clone();
            for i in 1..k {
                rhs -= &y[i] * &y[k - i];
            }
            let mut r = q.transpose() * rhs * q;
            for i in 0..n {
                for j in 0..n {
                    r[(i, j)] /= mu[i] + mu[j];
                }
            }
            y.push(q * r * q.transpose());
        }
        Some(MatJet(y))
    }

    /// Jet of the inverse curve.
    pub fn inverse(&self) -> Option<MatJet> {
        let a0inv = self.0[0].clone().try_inverse()?;
        let mut b: Vec<Mat> = Vec::with_capacity(self.0.len());
        b.push(a0inv.clone());
        for k in 1..self.0.len() {
            let mut s = &self.0[k] * &b[0];
            for j in 1..k {
                s += &self.0[j] * &b[k - j];
            }
            b.push(-(&a0inv * s));
        }
        Some(MatJet(b))
    }

    pub fn sym(&self) -> MatJet {
        self.map(crate::linalg::sym)
    }

    /// Evaluate the Taylor polynomial at offset `dt`.
    pub fn eval(&self, dt: f64) -> Mat {
        let mut acc = self.0[self.order()].clone();
        for k in (0..self.order()).rev() {
            acc = acc * dt + &self.0[k];
        }
        acc
    }
}

impl Add for &MatJet {
    type Output = MatJet;
    fn add(self, o: &MatJet) -> MatJet {
        MatJet(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &MatJet {
    type Output = MatJet;
    fn sub(self, o: &MatJet) -> MatJet {
        MatJet(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &MatJet {
    type Output = MatJet;
    fn neg(self) -> MatJet {
        self.scale(-1.0)
    }
}

impl Mul for &MatJet {
    type Output = MatJet;
    fn mul(self, o: &MatJet) -> MatJet {
        let k = self.0.len().min(o.0.len());
        MatJet(
            (0..k)
                .map(|i| {
                    let mut acc = &self.0[0] * &o.0[i];
                    for j in 1..=i {
                        acc.gemm(1.0, &self.0[j], &o.0[i - j], 1.0);
                    }
                    acc
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exp_sin_cos_of_variable() {
        let t0 = 0.3;
        let x = Jet::variable(t0, 5);
        let e = x.exp();
        for k in 0..=5 {
            assert_relative_eq!(e.deriv(k), t0.exp(), max_relative = 1e-14);
        }
        let (s, c) = x.sin_cos();
        assert_relative_eq!(s.deriv(3), -t0.cos(), max_relative = 1e-14);
        assert_relative_eq!(c.deriv(2), -t0.cos(), max_relative = 1e-14);
    }

    #[test]
    fn matrix_square_root_squares_back() {
        let s = MatJet(vec![
            Mat::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
            Mat::from_row_slice(2, 2, &[0.5, -0.2, -0.2, 0.1]),
            Mat::from_row_slice(2, 2, &[0.0, 0.4, 0.4, -0.3]),
            Mat::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.2]),
        ]);
        let y = s.sqrt_spd().unwrap();
        let back = &y * &y;
        for k in 0..4 {
            assert_relative_eq!(back.0[k], s.0[k], epsilon = 1e-13);
        }
        assert!(MatJet(vec![-Mat::identity(2, 2)]).sqrt_spd().is_none());
    }

    #[test]
    fn recip_ln_sqrt_against_closed_forms() {
        let t0 = 1.7;
        let x = Jet::variable(t0, 4);
        let r = x.recip();
        assert_relative_eq!(r.deriv(3), -6.0 / t0.powi(4), max_relative = 1e-13);
        let l = x.ln();
        assert_relative_eq!(l.deriv(2), -1.0 / (t0 * t0), max_relative = 1e-13);
        let q = x.sqrt();
        assert_relative_eq!(q.deriv(2), -0.25 * t0.powf(-1.5), max_relative = 1e-13);
    }

    #[test]
    fn compose_matches_chain_rule() {
        // g(x) = x³ composed with f(t) = sin t at t0
        let t0 = 0.4;
        let (s, _) = Jet::variable(t0, 3).sin_cos();
        let x0 = t0.sin();
        let g = [x0.powi(3), 3.0 * x0 * x0, 6.0 * x0, 6.0];
        let h = s.compose(&g);
        let cube = &(&s * &s) * &s;
        for k in 0..=3 {
            assert_relative_eq!(h.deriv(k), cube.deriv(k), max_relative = 1e-12);
        }
    }

    #[test]
    fn matrix_inverse_jet() {
        let t0 = 0.2;
        let x = Jet::variable(t0, 3);
        let (s, c) = x.sin_cos();
        let one = Jet::constant(1.0, 3);
        let two = Jet::constant(2.0, 3);
        // A(t) = [[2, sin t], [cos t, 1]]
        let entries = [&two, &s, &c, &one];
        let a = MatJet(
            (0..=3)
                .map(|k| Mat::from_row_slice(2, 2, &[entries[0].0[k], entries[1].0[k], entries[2].0[k], entries[3].0[k]]))
                .collect(),
        );
        let inv = a.inverse().unwrap();
        let prod = &a * &inv;
        assert_relative_eq!(prod.0[0], Mat::identity(2, 2), epsilon = 1e-14);
        for k in 1..=3 {
            assert!(prod.0[k].norm() < 1e-13);
        }
    }
}
