//! Conformally flat realization of a Morse–Sturm system on `ℝⁿ⁺¹`.
//!
//! Coordinates are `(x₁, …, xₙ, x_{n+1})` with the geodesic `γ(t) = t e_{n+1}`.
//! The metric is `𝔤(x) = e^{Ω(x)} (g ⊕ ε dx²_{n+1})` with
//! `Ω(x) = σ Σᵢⱼ (g R(x_{n+1}))ᵢⱼ xᵢ xⱼ`. Everything downstream of the metric
//! evaluator works by central differences of `𝔤`.

use crate::sds::{MatCurve, MorseSturm};
use crate::symform::{inertia, Inertia, DEFAULT_ZERO_TOL};
use crate::{Error, Grid, Mat, Result, SymmetricForm};
use serde::{Deserialize, Serialize};

pub const DEFAULT_FD_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Causal {
    Spacelike,
    Timelike,
}

impl std::str::FromStr for Causal {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spacelike" => Ok(Causal::Spacelike),
            "timelike" => Ok(Causal::Timelike),
            _ => Err(Error::Parse(format!("causal character must be spacelike or timelike, got {s:?}"))),
        }
    }
}

/// Signs `σ` in `Ω` and `ε` in front of `dx²_{n+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignCalibration {
    pub omega_sign: f64,
    pub dx_sign: f64,
}

impl Causal {
    /// With `R(X, Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]}Z` the Jacobi equation along
    /// the axis reads `v″ = εσ R v`, so `σ = ε` gives back `v″ = R v`. The
    /// oscillator `R ≡ −1` then has its first conjugate instant at `π`
    /// (see `oscillator_metric_reproduces_pi` below).
    pub fn calibration(self) -> SignCalibration {
        match self {
            Causal::Spacelike => SignCalibration { omega_sign: 1.0, dx_sign: 1.0 },
            Causal::Timelike => SignCalibration { omega_sign: -1.0, dx_sign: -1.0 },
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConformalMetric {
    pub g: SymmetricForm,
    pub r: MatCurve,
    pub grid: Grid,
    pub causal: Causal,
    pub signs: SignCalibration,
}

pub fn metric_from_morse_sturm(ms: &MorseSturm, causal: Causal) -> Result<ConformalMetric> {
    ms.validate()?;
    Ok(ConformalMetric { g: ms.g.clone(), r: ms.r.clone(), grid: ms.grid.clone(), causal, signs: causal.calibration() })
}

impl ConformalMetric {
    pub fn n(&self) -> usize {
        self.g.n()
    }

    /// `g R(t)`, symmetrized.
    pub fn gr(&self, t: f64) -> Mat {
        crate::linalg::sym(&(self.g.matrix() * self.r.value(t)))
    }

    pub fn omega(&self, x: &[f64]) -> f64 {
        let n = self.n();
        let gr = self.gr(x[n]);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += gr[(i, j)] * x[i] * x[j];
            }
        }
        self.signs.omega_sign * s
    }

    /// `g ⊕ ε`, the metric on the axis.
    pub fn base(&self) -> Mat {
        let n = self.n();
        let mut m = Mat::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(self.g.matrix());
        m[(n, n)] = self.signs.dx_sign;
        m
    }

    pub fn metric(&self, x: &[f64]) -> Mat {
        self.base() * self.omega(x).exp()
    }

    /// Index of `g ⊕ ε dx²`; the conformal factor is positive so this is the
    /// index at every point.
    pub fn index_of_metric(&self) -> usize {
        inertia(&SymmetricForm::new(self.base()), DEFAULT_ZERO_TOL).index()
    }
}

fn shifted(x: &[f64], k: usize, d: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[k] += d;
    y
}

/// `∂_k 𝔤` at `x` by central differences.
fn metric_gradient(m: &ConformalMetric, x: &[f64], h: f64) -> Vec<Mat> {
    (0..x.len()).map(|k| (m.metric(&shifted(x, k, h)) - m.metric(&shifted(x, k, -h))) / (2.0 * h)).collect()
}

/// `Γ[k][(i, j)] = Γᵏᵢⱼ`.
pub fn christoffel(m: &ConformalMetric, x: &[f64], h: f64) -> Result<Vec<Mat>> {
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let d = x.len();
    if d != m.n() + 1 {
        return Err(Error::Dimension(format!("point has {d} coordinates, metric lives on R^{}", m.n() + 1)));
    }
    let ginv = m
        .metric(x)
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("metric at {x:?}")))?;
    let dg = metric_gradient(m, x, h);
    // first kind, [i j l] = ½(∂ᵢ𝔤ⱼₗ + ∂ⱼ𝔤ᵢₗ − ∂ₗ𝔤ᵢⱼ)
    let first = |i: usize, j: usize, l: usize| 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
    let mut gamma = vec![Mat::zeros(d, d); d];
    for (k, gk) in gamma.iter_mut().enumerate() {
        for i in 0..d {
            for j in i..d {
                let v: f64 = (0..d).map(|l| ginv[(k, l)] * first(i, j, l)).sum();
                gk[(i, j)] = v;
                gk[(j, i)] = v;
            }
        }
    }
    Ok(gamma)
}

/// Christoffel symbols of `e^Ω 𝔤₀` from `dΩ`, with `∂_{n+1}Ω` taken from the
/// derivative of `R`: `Γᵏᵢⱼ = ½(δᵏⱼ ∂ᵢΩ + δᵏᵢ ∂ⱼΩ − 𝔤₀ᵏˡ 𝔤₀ᵢⱼ ∂ₗΩ)`.
pub fn christoffel_closed_form(m: &ConformalMetric, x: &[f64]) -> Result<Vec<Mat>> {
    let n = m.n();
    let d = n + 1;
    if x.len() != d {
        return Err(Error::Dimension(format!("point has {} coordinates, metric lives on R^{d}", x.len())));
    }
    let t = x[n];
    let r = m.r.jet(t, 1);
    let gr = crate::linalg::sym(&(m.g.matrix() * &r.0[0]));
    let dgr = crate::linalg::sym(&(m.g.matrix() * &r.0[1]));
    let v = nalgebra::DVector::from_column_slice(&x[..n]);
    let sigma = m.signs.omega_sign;
    let gv = &gr * &v;
    let mut dom: Vec<f64> = (0..n).map(|i| 2.0 * sigma * gv[i]).collect();
    dom.push(sigma * (v.transpose() * &dgr * &v)[(0, 0)]);
    let b = m.base();
    let binv = b.clone().try_inverse().ok_or_else(|| Error::Singular("axis metric".into()))?;
    let raised: Vec<f64> = (0..d).map(|k| (0..d).map(|l| binv[(k, l)] * dom[l]).sum()).collect();
    let mut gamma = vec![Mat::zeros(d, d); d];
    for (k, gk) in gamma.iter_mut().enumerate() {
        for i in 0..d {
            for j in 0..d {
                let mut s = -raised[k] * b[(i, j)];
                if k == j {
                    s += dom[i];
                }
                if k == i {
                    s += dom[j];
                }
                gk[(i, j)] = 0.5 * s;
            }
        }
    }
    Ok(gamma)
}

/// Observed order of the stencil error of `christoffel` at `x` between `h` and `h/2`.
pub fn christoffel_stencil_order(m: &ConformalMetric, x: &[f64], h: f64) -> Result<(f64, f64, f64)> {
    let exact = christoffel_closed_form(m, x)?;
    let err = |h: f64| -> Result<f64> {
        let g = christoffel(m, x, h)?;
        Ok(g.iter().zip(&exact).map(|(a, b)| crate::linalg::max_abs(&(a - b))).fold(0.0, f64::max))
    };
    let (e1, e2) = (err(h)?, err(0.5 * h)?);
    Ok((e1, e2, (e1 / e2).log2()))
}

fn sup(gamma: &[Mat]) -> f64 {
    gamma.iter().map(crate::linalg::max_abs).fold(0.0, f64::max)
}

fn axis_point(n: usize, t: f64) -> Vec<f64> {
    let mut x = vec![0.0; n + 1];
    x[n] = t;
    x
}

/// Grid times whose stencil stays inside `[a, b]`.
fn interior_times(grid: &Grid, h: f64) -> Vec<f64> {
    grid.times().into_iter().filter(|&t| t - h >= grid.a && t + h <= grid.b).collect()
}

/// `max ‖γ̈ + Γ(γ̇, γ̇)‖` along `γ(t) = t e_{n+1}`; with `γ̈ = 0` this is `max |Γᵏ_{n+1,n+1}|`.
pub fn geodesic_residual(m: &ConformalMetric, h: f64) -> Result<f64> {
    let n = m.n();
    let mut worst = 0.0_f64;
    for t in interior_times(&m.grid, h) {
        let gamma = christoffel(m, &axis_point(n, t), h)?;
        worst = worst.max(gamma.iter().map(|gk| gk[(n, n)].abs()).fold(0.0, f64::max));
    }
    Ok(worst)
}

/// `max ‖Γ‖` over the axis, every index triple.
pub fn max_christoffel_on_axis(m: &ConformalMetric, h: f64) -> Result<f64> {
    let n = m.n();
    let mut worst = 0.0_f64;
    for t in interior_times(&m.grid, h) {
        worst = worst.max(sup(&christoffel(m, &axis_point(n, t), h)?));
    }
    Ok(worst)
}

/// The conformal factor read back from the metric, `Ω = ln(ε 𝔤_{n+1,n+1})`.
pub fn conformal_factor(m: &ConformalMetric, x: &[f64]) -> f64 {
    let n = m.n();
    (m.signs.dx_sign * m.metric(x)[(n, n)]).ln()
}

/// `R(t)` from the normal Hessian of the conformal factor on the axis,
/// `∂ᵢ∂ⱼΩ = 2σ (gR)ᵢⱼ`, by central second differences.
pub fn recovered_curvature(m: &ConformalMetric, t: f64, h: f64) -> Result<Mat> {
    let n = m.n();
    let x = axis_point(n, t);
    let e = |y: &[f64]| conformal_factor(m, y);
    let mut hess = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                (e(&shifted(&x, i, h)) - 2.0 * e(&x) + e(&shifted(&x, i, -h))) / (h * h)
            } else {
                let pp = e(&shifted(&shifted(&x, i, h), j, h));
                let pm = e(&shifted(&shifted(&x, i, h), j, -h));
                let mp = e(&shifted(&shifted(&x, i, -h), j, h));
                let mm = e(&shifted(&shifted(&x, i, -h), j, -h));
                (pp - pm - mp + mm) / (4.0 * h * h)
            };
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let gr = hess * (0.5 * m.signs.omega_sign);
    let ginv = m.g.matrix().clone().try_inverse().ok_or_else(|| Error::Singular("Morse–Sturm metric g".into()))?;
    Ok(ginv * gr)
}

/// `sup_t ‖R_rec(t) − R(t)‖ / sup_t ‖R(t)‖` over the report grid (absolute when `R ≡ 0`).
pub fn jacobi_roundtrip(m: &ConformalMetric, ms: &MorseSturm, h: f64) -> Result<f64> {
    let (mut err, mut size) = (0.0_f64, 0.0_f64);
    for t in ms.grid.times() {
        let r = ms.r.value(t);
        err = err.max(crate::linalg::max_abs(&(recovered_curvature(m, t, h)? - &r)));
        size = size.max(crate::linalg::max_abs(&r));
    }
    Ok(if size > 0.0 { err / size } else { err })
}

/// Jacobi operator `J ↦ −R(J, γ̇)γ̇` on the normal directions, from the
/// Riemann tensor assembled out of differenced Christoffel symbols.
pub fn jacobi_operator(m: &ConformalMetric, t: f64, h: f64) -> Result<Mat> {
    let n = m.n();
    let x = axis_point(n, t);
    let gamma = christoffel(m, &x, h)?;
    let dgamma: Vec<Vec<Mat>> = (0..=n)
        .map(|i| {
            let p = christoffel(m, &shifted(&x, i, h), h)?;
            let q = christoffel(m, &shifted(&x, i, -h), h)?;
            Ok(p.iter().zip(&q).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        })
        .collect::<Result<_>>()?;
    // Rˡᵢⱼₖ = ∂ᵢΓˡⱼₖ − ∂ⱼΓˡᵢₖ + ΓˡᵢₘΓᵐⱼₖ − ΓˡⱼₘΓᵐᵢₖ with j = k = n+1
    let riemann = |l: usize, i: usize, j: usize, k: usize| {
        let mut v = dgamma[i][l][(j, k)] - dgamma[j][l][(i, k)];
        for mm in 0..=n {
            v += gamma[l][(i, mm)] * gamma[mm][(j, k)] - gamma[l][(j, mm)] * gamma[mm][(i, k)];
        }
        v
    };
    let mut out = Mat::zeros(n, n);
    for l in 0..n {
        for i in 0..n {
            out[(l, i)] = -riemann(l, i, n, n);
        }
    }
    Ok(out)
}

/// Inertia of `𝔤` at `points`; fails if it is not the same everywhere.
pub fn metric_inertia(m: &ConformalMetric, points: &[Vec<f64>]) -> Result<Inertia> {
    let mut seen: Option<Inertia> = None;
    for x in points {
        let i = inertia(&SymmetricForm::new(m.metric(x)), DEFAULT_ZERO_TOL);
        match seen {
            None => seen = Some(i),
            Some(s) if s != i => {
                return Err(Error::Degenerate(format!("metric inertia jumps from {s:?} to {i:?} at {x:?}")))
            }
            _ => {}
        }
    }
    seen.ok_or_else(|| Error::Invalid("no sample points".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub causal: Causal,
    pub fd_step: f64,
    pub max_christoffel_on_axis: f64,
    /// The same at `h/2`.
    pub max_christoffel_on_axis_half: f64,
    /// `log₂` of the ratio between the two; `None` when both vanish exactly.
    pub christoffel_order: Option<f64>,
    pub geodesic_residual: f64,
    /// Relative sup mismatch between recovered and input `R`.
    pub curvature_mismatch: f64,
    pub index_of_metric: usize,
    /// Index seen on the sample cloud around the axis.
    pub sampled_index: usize,
}

pub const CHRISTOFFEL_TOL: f64 = 1e-4;
pub const CURVATURE_TOL: f64 = 1e-3;
pub const MIN_ORDER: f64 = 1.9;

impl GeometryReport {
    pub fn passed(&self) -> bool {
        self.max_christoffel_on_axis <= CHRISTOFFEL_TOL
            && self.curvature_mismatch <= CURVATURE_TOL
            && self.christoffel_order.is_none_or(|p| p >= MIN_ORDER)
            && self.index_of_metric == self.sampled_index
    }
}

/// Points near the axis: grid times crossed with a few normal offsets.
fn sample_cloud(m: &ConformalMetric) -> Vec<Vec<f64>> {
    let n = m.n();
    let mut out = Vec::new();
    let times = m.grid.times();
    let stride = (times.len() / 64).max(1);
    for (k, &t) in times.iter().enumerate().step_by(stride) {
        for s in [-1.0, -0.3, 0.0, 0.5, 1.0] {
            let mut x = axis_point(n, t);
            for (i, xi) in x.iter_mut().take(n).enumerate() {
                *xi = 1e-2 * s * if (i + k) % 2 == 0 { 1.0 } else { -0.7 };
            }
            out.push(x);
        }
    }
    out
}

/// Build the metric of `ms` and run every check at step `h` (and `h/2` for the order).
pub fn verify_geometry(ms: &MorseSturm, causal: Causal, h: f64) -> Result<GeometryReport> {
    let m = metric_from_morse_sturm(ms, causal)?;
    let max_christoffel_on_axis = max_christoffel_on_axis(&m, h)?;
    let max_christoffel_on_axis_half = self::max_christoffel_on_axis(&m, 0.5 * h)?;
    // on the axis Ω and dΩ vanish and Ω is even in the normal coordinates, so the
    // central stencils cancel exactly; an order only exists if something is left
    let christoffel_order = if max_christoffel_on_axis == 0.0 && max_christoffel_on_axis_half == 0.0 {
        None
    } else {
        Some((max_christoffel_on_axis / max_christoffel_on_axis_half).log2())
    };
    let geodesic_residual = geodesic_residual(&m, h)?;
    let curvature_mismatch = jacobi_roundtrip(&m, ms, h)?;
    let sampled_index = metric_inertia(&m, &sample_cloud(&m))?.index();
    Ok(GeometryReport {
        causal,
        fd_step: h,
        max_christoffel_on_axis,
        max_christoffel_on_axis_half,
        christoffel_order,
        geodesic_residual,
        curvature_mismatch,
        index_of_metric: m.index_of_metric(),
        sampled_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sds::{conjugate_instants, SampledMatCurve};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn oscillator(b: f64, n: usize) -> MorseSturm {
        let grid = Grid::new(0.0, b, n).unwrap();
        MorseSturm::new(SymmetricForm::identity(1), MatCurve::constant(Mat::from_element(1, 1, -1.0)), grid).unwrap()
    }

    fn lorentz_ms() -> MorseSturm {
        // g = diag(1, −1), gR symmetric with t-dependence
        let g = SymmetricForm::diag(&[1.0, -1.0]);
        let r = MatCurve::Analytic(Arc::new(|t: f64, order| {
            let s = Mat::from_row_slice(2, 2, &[t.sin(), 0.3 * t, 0.3 * t, -1.0 + 0.5 * t.cos()]);
            let ds = Mat::from_row_slice(2, 2, &[t.cos(), 0.3, 0.3, -0.5 * t.sin()]);
            let ginv = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
            let mut j = vec![&ginv * s, &ginv * ds];
            j.resize(order.max(1) + 1, Mat::zeros(2, 2));
            crate::jet::MatJet(j).truncate(order)
        }));
        MorseSturm::new(g, r, Grid::new(0.0, 2.0, 64).unwrap()).unwrap()
    }

    #[test]
    fn flat_metric_is_constant() {
        let grid = Grid::new(0.0, 1.0, 16).unwrap();
        let ms = MorseSturm::new(SymmetricForm::diag(&[1.0, -1.0]), MatCurve::constant(Mat::zeros(2, 2)), grid).unwrap();
        let m = metric_from_morse_sturm(&ms, Causal::Spacelike).unwrap();
        assert_eq!(m.metric(&[0.3, -2.0, 0.5]), m.base());
        assert_eq!(sup(&christoffel(&m, &[0.3, -2.0, 0.5], 1e-3).unwrap()), 0.0);
        assert_eq!(jacobi_roundtrip(&m, &ms, 1e-3).unwrap(), 0.0);
        assert_eq!(m.index_of_metric(), 1);
    }

    #[test]
    fn axis_is_geodesic_and_off_axis_is_curved() {
        let ms = lorentz_ms();
        let m = metric_from_morse_sturm(&ms, Causal::Spacelike).unwrap();
        assert_eq!(m.metric(&[0.0, 0.0, 0.7]), m.base());
        assert!(geodesic_residual(&m, 1e-3).unwrap() <= 1e-4);
        assert!(max_christoffel_on_axis(&m, 1e-3).unwrap() <= 1e-4);
        let off = christoffel(&m, &[0.2, -0.1, 0.7], 1e-3).unwrap();
        assert!(sup(&off) > 1e-2);
        for gk in &off {
            assert_eq!(gk, &gk.transpose());
        }
    }

    #[test]
    fn christoffel_matches_closed_form_off_axis() {
        // 𝔤 = e^Ω 𝔤₀ with 𝔤₀ constant: Γᵏᵢⱼ = ½(δᵏⱼ ∂ᵢΩ + δᵏᵢ ∂ⱼΩ − 𝔤₀ᵏˡ 𝔤₀ᵢⱼ ∂ₗΩ)
        let ms = lorentz_ms();
        let m = metric_from_morse_sturm(&ms, Causal::Timelike).unwrap();
        let x = [0.2, -0.1, 0.7];
        let gr = m.gr(x[2]);
        let dgr = Mat::from_row_slice(2, 2, &[x[2].cos(), 0.3, 0.3, -0.5 * x[2].sin()]);
        let v = nalgebra::DVector::from_row_slice(&x[..2]);
        let sigma = m.signs.omega_sign;
        let mut dom = [0.0; 3];
        let gv = &gr * &v;
        dom[0] = 2.0 * sigma * gv[0];
        dom[1] = 2.0 * sigma * gv[1];
        dom[2] = sigma * (v.transpose() * &dgr * &v)[(0, 0)];
        let b = m.base();
        let binv = b.clone().try_inverse().unwrap();
        let exact = |k: usize, i: usize, j: usize| {
            let mut s = 0.0;
            if k == j {
                s += dom[i];
            }
            if k == i {
                s += dom[j];
            }
            s -= (0..3).map(|l| binv[(k, l)] * dom[l]).sum::<f64>() * b[(i, j)];
            0.5 * s
        };
        let err = |h: f64| {
            let g = christoffel(&m, &x, h).unwrap();
            let mut e = 0.0_f64;
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        e = e.max((g[k][(i, j)] - exact(k, i, j)).abs());
                    }
                }
            }
            e
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        assert!(e1 < 1e-4, "{e1}");
        assert!((e1 / e2).log2() > 1.9, "order {}", (e1 / e2).log2());
        let lib = christoffel_closed_form(&m, &x).unwrap();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    assert_relative_eq!(lib[k][(i, j)], exact(k, i, j), epsilon = 1e-13);
                }
            }
        }
        let (_, _, p) = christoffel_stencil_order(&m, &x, 1e-2).unwrap();
        assert!(p > 1.9);
    }

    #[test]
    fn omega_is_quadratic_in_normal_coordinates() {
        let m = metric_from_morse_sturm(&lorentz_ms(), Causal::Spacelike).unwrap();
        let x = [0.3, -0.4, 1.1];
        for lam in [0.5, 2.0, -3.0] {
            let y = [lam * x[0], lam * x[1], x[2]];
            assert_relative_eq!(m.omega(&y), lam * lam * m.omega(&x), max_relative = 1e-14);
        }
    }

    #[test]
    fn recovered_curvature_is_exact_for_large_r() {
        // Ω is quadratic, so its second differences carry rounding error only
        let grid = Grid::new(0.0, 1.0, 32).unwrap();
        let ms = MorseSturm::new(
            SymmetricForm::diag(&[1.0, -1.0]),
            MatCurve::constant(Mat::from_row_slice(2, 2, &[-3e7, 1e5, -1e5, 2e6])),
            grid,
        )
        .unwrap();
        for causal in [Causal::Spacelike, Causal::Timelike] {
            let m = metric_from_morse_sturm(&ms, causal).unwrap();
            assert!(jacobi_roundtrip(&m, &ms, 1e-3).unwrap() < 1e-9);
        }
    }

    #[test]
    fn riemann_route_converges_at_second_order() {
        let ms = lorentz_ms();
        for causal in [Causal::Spacelike, Causal::Timelike] {
            let m = metric_from_morse_sturm(&ms, causal).unwrap();
            let err = |h: f64| crate::linalg::max_abs(&(jacobi_operator(&m, 0.9, h).unwrap() - ms.r.value(0.9)));
            let (e1, e2) = (err(2e-2), err(1e-2));
            assert!(e1 < 1e-2 && (e1 / e2).log2() > 1.9, "{causal:?} {e1} {e2}");
        }
    }

    #[test]
    fn metric_index_follows_causal_character() {
        let ms = lorentz_ms();
        let s = verify_geometry(&ms, Causal::Spacelike, 1e-3).unwrap();
        let t = verify_geometry(&ms, Causal::Timelike, 1e-3).unwrap();
        assert_eq!((s.index_of_metric, s.sampled_index), (1, 1));
        assert_eq!((t.index_of_metric, t.sampled_index), (2, 2));
        assert!(s.passed() && t.passed(), "{s:?} {t:?}");
    }

    #[test]
    fn riemann_tensor_gives_back_r_in_both_characters() {
        let ms = lorentz_ms();
        for causal in [Causal::Spacelike, Causal::Timelike] {
            let m = metric_from_morse_sturm(&ms, causal).unwrap();
            for t in [0.4, 1.3] {
                let k = jacobi_operator(&m, t, 1e-3).unwrap();
                let r = ms.r.value(t);
                assert!(crate::linalg::max_abs(&(k - &r)) < 1e-4, "{causal:?} t = {t}");
            }
        }
    }

    #[test]
    fn oscillator_metric_reproduces_pi() {
        // sign calibration: the Jacobi operator of the metric, fed back to the
        // detector, must put the first conjugate instant at π
        let ms = oscillator(3.5, 512);
        for causal in [Causal::Spacelike, Causal::Timelike] {
            let m = metric_from_morse_sturm(&ms, causal).unwrap();
            let times = ms.grid.times();
            let values = times.iter().map(|&t| jacobi_operator(&m, t, 1e-3).unwrap()).collect::<Vec<_>>();
            for v in &values {
                assert!((v[(0, 0)] + 1.0).abs() < 1e-4);
            }
            let back = MorseSturm::new(
                SymmetricForm::identity(1),
                MatCurve::Sampled(SampledMatCurve::from_values(times, values).unwrap()),
                ms.grid.clone(),
            )
            .unwrap();
            let report = conjugate_instants(&back.to_system().unwrap()).unwrap();
            assert_eq!(report.instants.len(), 1);
            assert!((report.instants[0].t - std::f64::consts::PI).abs() < 1e-3);
        }
    }

    #[test]
    fn bad_step_rejected() {
        let m = metric_from_morse_sturm(&oscillator(1.0, 8), Causal::Spacelike).unwrap();
        assert!(christoffel(&m, &[0.0, 0.5], 0.0).is_err());
        assert!(christoffel(&m, &[0.0], 1e-3).is_err());
    }
}
