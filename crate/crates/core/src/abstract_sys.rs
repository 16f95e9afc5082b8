//! Abstract symplectic systems: a curve `t ↦ ξ(t)` of Lagrangian subspaces.

use crate::fd::{bracket, fornberg, interp_scalar, stencil_range};
use crate::grid::Grid;
use crate::jet::MatJet;
use crate::linalg::{
    hstack, inverse, j_matrix, j_mul, l0_frame, max_abs, mul_j, orthonormalize, procrustes_align,
    symplectic_inverse,
};
use crate::sds::{fundamental_matrix, BlocksJet, Fundamental, IntegrateOptions, SympDiffSystem};
use crate::symform::{inertia, SymmetricForm, DEFAULT_ZERO_TOL};
use crate::symplectic::{chart_raw, LagrangianFrame};
use crate::{Error, Mat, Result};
use std::sync::Arc;

pub type FrameFn = dyn Fn(f64, usize) -> MatJet + Send + Sync;

/// Smooth frame curve `t ↦ G(t)` given by its jets.
#[derive(Clone)]
pub struct FrameCurve(pub Arc<FrameFn>);

impl std::fmt::Debug for FrameCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FrameCurve")
    }
}

impl FrameCurve {
    pub fn new(f: impl Fn(f64, usize) -> MatJet + Send + Sync + 'static) -> Self {
        FrameCurve(Arc::new(f))
    }

    pub fn jet(&self, t: f64, order: usize) -> MatJet {
        (self.0)(t, order).truncate(order)
    }

    pub fn value(&self, t: f64) -> Mat {
        self.jet(t, 0).0.swap_remove(0)
    }
}

/// `(V, ω, ξ)` sampled on the solution nodes of a grid.
#[derive(Clone, Debug)]
pub struct AbstractSystem {
    pub n: usize,
    pub grid: Grid,
    pub times: Vec<f64>,
    /// `2n × n` frame of `ξ(t)` at each time.
    pub frames: Vec<Mat>,
    /// Exact curve the samples were taken from, when known.
    pub curve: Option<FrameCurve>,
    pub note: String,
}

impl AbstractSystem {
    pub fn new(grid: Grid, times: Vec<f64>, frames: Vec<Mat>, note: impl Into<String>) -> Result<Self> {
        if times.len() != frames.len() || times.len() < 5 {
            return Err(Error::Invalid("abstract system needs at least 5 frames, one per time".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("frame times must increase strictly".into()));
        }
        let n = frames[0].ncols();
        for (t, f) in times.iter().zip(&frames) {
            if f.shape() != (2 * n, n) {
                return Err(Error::Dimension(format!("frame at t = {t} is not {}×{n}", 2 * n)));
            }
            LagrangianFrame::new(f.clone()).map_err(|e| Error::Invalid(format!("frame at t = {t}: {e}")))?;
        }
        Ok(AbstractSystem { n, grid, times, frames, curve: None, note: note.into() })
    }

    /// Sample a frame curve on the solution nodes of `grid`.
    pub fn from_curve(n: usize, grid: Grid, curve: FrameCurve, note: impl Into<String>) -> Result<Self> {
        let times = grid.nodes();
        let frames = times.iter().map(|&t| curve.value(t)).collect();
        let mut s = Self::new(grid, times, frames, note)?;
        if s.n != n {
            return Err(Error::Dimension("frame curve has the wrong size".into()));
        }
        s.curve = Some(curve);
        Ok(s)
    }

    /// Index of the sample at time `t`, if `t` is one.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let i = bracket(&self.times, t);
        let tol = 1e-12 * (self.grid.b - self.grid.a).abs().max(1.0);
        [i, i + 1].into_iter().find(|&j| j < self.times.len() && (self.times[j] - t).abs() <= tol)
    }

    /// Frames at the report grid points.
    pub fn grid_frames(&self) -> Result<Vec<Mat>> {
        self.grid
            .times()
            .iter()
            .map(|&t| {
                self.node_index(t)
                    .map(|i| self.frames[i].clone())
                    .ok_or_else(|| Error::Invalid(format!("no frame sampled at grid point {t}")))
            })
            .collect()
    }

    /// Image under a fixed linear symplectomorphism.
    pub fn transform(&self, psi: &Mat) -> AbstractSystem {
        let curve = self.curve.as_ref().map(|c| {
            let c = c.clone();
            let psi = psi.clone();
            FrameCurve::new(move |t, order| c.jet(t, order).lmul(&psi))
        });
        AbstractSystem {
            n: self.n,
            grid: self.grid.clone(),
            times: self.times.clone(),
            frames: self.frames.iter().map(|f| psi * f).collect(),
            curve,
            note: self.note.clone(),
        }
    }

    /// Orthonormal frames, each aligned with its predecessor.
    pub fn aligned_frames(&self) -> Vec<Mat> {
        let mut out: Vec<Mat> = Vec::with_capacity(self.frames.len());
        for f in &self.frames {
            let q = orthonormalize(f);
            let q = match out.last() {
                Some(prev) => procrustes_align(&q, prev),
                None => q,
            };
            out.push(q);
        }
        out
    }
}

/// `ξ(t) = Φ(t)⁻¹(L₀)` for the solution nodes of the integration.
pub fn xi_from_fundamental(fund: &Fundamental) -> Result<AbstractSystem> {
    let n = fund.phi[0].nrows() / 2;
    let l0 = l0_frame(n);
    let frames = fund.phi.iter().map(|p| symplectic_inverse(p) * &l0).collect();
    AbstractSystem::new(fund.grid.clone(), fund.times.clone(), frames, "xi(t) = Phi(t)^-1 L0")
}

pub fn xi_from_system(sys: &SympDiffSystem) -> Result<AbstractSystem> {
    let fund = fundamental_matrix(sys, &IntegrateOptions::default())?;
    xi_from_fundamental(&fund)
}

/// Push a form `q` on `L₀` (in `α` coordinates) forward through `Φ⁻¹` to the
/// Lagrangian spanned by `frame` (assumed to be `Φ⁻¹ L₀`), in the basis `frame`.
pub fn pushforward(q: &Mat, phi: &Mat, frame: &Mat) -> Mat {
    let n = q.nrows();
    let image = phi * frame;
    let alpha = image.rows(n, n).into_owned();
    alpha.transpose() * q * alpha
}

/// `max ‖ξ′(t) − pushforward(−B(t), Φ(t)⁻¹)‖ / (1 + ‖B(t)‖)` over interior report grid points.
pub fn pushforward_residual(sys: &SympDiffSystem, fund: &Fundamental) -> Result<f64> {
    let s = xi_from_fundamental(fund)?;
    let mut worst = 0.0_f64;
    for (k, &i) in fund.grid_indices().iter().enumerate() {
        if k == 0 || k == sys.grid.n {
            continue;
        }
        let t = s.times[i];
        let b = sys.blocks(t).b;
        let d = derivative_at(&s, i, &SymmetricForm::zeros(s.n))?;
        let p = pushforward(&(-&b), &fund.phi[i], &s.frames[i]);
        worst = worst.max(crate::linalg::spectral_norm(&(d.matrix() - p)) / (1.0 + crate::linalg::spectral_norm(&b)));
    }
    Ok(worst)
}

/// `ξ′(t)` at a sample time, as a form in the basis of the stored frame.
pub fn xi_derivative_form(s: &AbstractSystem, t: f64) -> Result<SymmetricForm> {
    xi_derivative_form_with(s, t, &SymmetricForm::zeros(s.n))
}

/// Same, with the chart complement `JQ + Q·shift` (`Q` an orthonormal frame of `ξ(t)`).
pub fn xi_derivative_form_with(s: &AbstractSystem, t: f64, shift: &SymmetricForm) -> Result<SymmetricForm> {
    let i = s
        .node_index(t)
        .ok_or_else(|| Error::Invalid(format!("t = {t} is not a sample time of the abstract system")))?;
    derivative_at(s, i, shift)
}

fn derivative_at(s: &AbstractSystem, i: usize, shift: &SymmetricForm) -> Result<SymmetricForm> {
    let len = s.times.len();
    if i == 0 || i + 1 >= len {
        return Err(Error::Invalid(format!("t = {} is an endpoint; the stencil needs interior points", s.times[i])));
    }
    let e = &s.frames[i];
    let q = orthonormalize(e);
    let comp = j_mul(&q) + &q * shift.matrix();
    let range = stencil_range(i, len, 5);
    let w = fornberg(s.times[i], &s.times[range.clone()], 1);
    let mut acc = Mat::zeros(s.n, s.n);
    for (k, j) in range.enumerate() {
        if j == i {
            continue;
        }
        let c = chart_raw(e, &comp, &s.frames[j]);
        acc += c.matrix() * w[1][k];
    }
    if !acc.iter().all(|x| x.is_finite()) {
        return Err(Error::NotTransverse(format!("chart at t = {} does not cover the stencil", s.times[i])));
    }
    Ok(SymmetricForm::new(acc))
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AbstractIndex {
    pub nondegenerate: bool,
    /// Index of `−ξ′(t)` at the first interior grid point.
    pub index: usize,
    /// First grid time where `ξ′` degenerates or its index changes.
    pub first_failure: Option<f64>,
}

/// Nondegeneracy and index of `−ξ′(t)` over the interior report grid points.
pub fn abstract_index(s: &AbstractSystem) -> Result<AbstractIndex> {
    let mut index = None;
    for k in 1..s.grid.n {
        let t = s.grid.t(k);
        let i = s.node_index(t).ok_or_else(|| Error::Invalid(format!("no frame sampled at grid point {t}")))?;
        let d = derivative_at(s, i, &SymmetricForm::zeros(s.n))?;
        let inr = inertia(&d.scale(-1.0), DEFAULT_ZERO_TOL);
        let ok = inr.is_nondegenerate() && index.is_none_or(|m| m == inr.n_minus);
        if !ok {
            return Ok(AbstractIndex {
                nondegenerate: false,
                index: index.unwrap_or(inr.n_minus),
                first_failure: Some(t),
            });
        }
        index.get_or_insert(inr.n_minus);
    }
    Ok(AbstractIndex { nondegenerate: true, index: index.unwrap_or(0), first_failure: None })
}

/// `det(Q_aᵀ J Q_t)` on aligned orthonormal frames; vanishes exactly where `ξ(t) ∩ ξ(a) ≠ 0`.
pub fn intersection_trace(s: &AbstractSystem) -> Vec<f64> {
    let q = s.aligned_frames();
    let qa_j = mul_j(&q[0].transpose());
    q.iter().map(|qt| (&qa_j * qt).determinant()).collect()
}

/// Sign changes of [`intersection_trace`] beyond `a + exclusion`, located on the cubic interpolant.
pub fn abstract_instants(s: &AbstractSystem, exclusion: f64) -> Vec<f64> {
    let d = intersection_trace(s);
    let t0 = s.times[0] + exclusion;
    let mut out = Vec::new();
    for i in 0..d.len() - 1 {
        if s.times[i] <= t0 || d[i] == 0.0 || (d[i] > 0.0) == (d[i + 1] > 0.0) {
            continue;
        }
        let (mut lo, mut hi) = (s.times[i], s.times[i + 1]);
        let f = |t: f64| interp_scalar(&s.times, &d, t);
        let flo = f(lo);
        while hi - lo > 1e-13 * (1.0 + hi.abs()) {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out
}

/// Blocks of `X = −U′ᵀ J U J` from jets of a Lagrangian frame `G`, where
/// `Q = G(GᵀG)^{-1/2}` is the polar factor, `U = (Q | −JQ)` is orthogonal and
/// symplectic, and `ψ = UᵀJ` maps `ξ(t)` to `L₀`. Using `Q` keeps `X` at the size of
/// the rotation speed of `ξ` however badly `G` is scaled.
pub fn blocks_from_frame_jet(g: &MatJet) -> Option<BlocksJet> {
    let order = g.order().checked_sub(1)?;
    let n = g.shape().1;
    let g = &(g * &(&g.transpose() * g).sqrt_spd()?.inverse()?);
    let h = g.map(j_mul).scale(-1.0);
    let u = MatJet(g.0.iter().zip(&h.0).map(|(a, b)| hstack(a, b)).collect());
    let du = u.derivative();
    let u = u.truncate(order);
    let x = (&du.transpose() * &u.map(j_mul)).map(|m| -mul_j(m));
    let a = x.map(|m| m.view((0, 0), (n, n)).into_owned());
    let b = x.map(|m| m.view((0, n), (n, n)).into_owned()).sym();
    let c = x.map(|m| m.view((n, 0), (n, n)).into_owned()).sym();
    Some(BlocksJet { a, b, c })
}

/// A differential system whose `ξ` is the given curve up to a fixed symplectomorphism.
///
/// With an exact frame curve the coefficients are analytic in `t`. Otherwise the
/// sampled frames are orthonormalized and aligned, `ψ = UᵀJ` with `U = (F | −JF)`,
/// `Φ = ψ ψ(a)⁻¹`, and `X = Φ′Φ⁻¹` by 5-point differences projected onto `sp(2n)`.
pub fn realize_system(s: &AbstractSystem) -> Result<SympDiffSystem> {
    if let Some(curve) = &s.curve {
        let curve = curve.clone();
        let n = s.n;
        for t in s.grid.times() {
            blocks_from_frame_jet(&curve.jet(t, 1))
                .ok_or_else(|| Error::Singular(format!("frame Gram matrix at t = {t}")))?;
        }
        return Ok(SympDiffSystem::analytic(n, s.grid.clone(), move |t, order| {
            blocks_from_frame_jet(&curve.jet(t, order + 1)).expect("frame curve has full rank")
        }));
    }
    let q = s.aligned_frames();
    for (w, t) in q.windows(2).zip(&s.times[1..]) {
        let overlap = crate::linalg::singular_values(&(w[0].transpose() * &w[1]));
        if overlap.last().copied().unwrap_or(0.0) < 0.5 {
            return Err(Error::Invalid(format!("frames change too fast near t = {t}; sample more densely")));
        }
    }
    let psi: Vec<Mat> = q.iter().map(|f| mul_j(&hstack(f, &(-j_mul(f))).transpose())).collect();
    let psi_a_inv = inverse(&psi[0], "psi(a)")?;
    let phi: Vec<Mat> = psi.iter().map(|p| p * &psi_a_inv).collect();
    let jm = j_matrix(s.n);
    let len = phi.len();
    let mut values = Vec::with_capacity(len);
    for i in 0..len {
        let range = stencil_range(i, len, 5);
        let w = fornberg(s.times[i], &s.times[range.clone()], 1);
        let mut dphi = Mat::zeros(2 * s.n, 2 * s.n);
        for (k, j) in range.enumerate() {
            dphi += &phi[j] * w[1][k];
        }
        let x = dphi * symplectic_inverse(&phi[i]);
        let x = (&x + &jm * x.transpose() * &jm) * 0.5;
        values.push(crate::sds::Blocks::from_x(&x));
    }
    let sys = SympDiffSystem::sampled(s.grid.clone(), s.times.clone(), values)?;
    if max_abs(&sys.x(s.grid.a)).is_nan() {
        return Err(Error::Invalid("realized coefficients are not finite".into()));
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sds::{conjugate_instants, Blocks};
    use approx::assert_relative_eq;

    fn ms(r: f64, b: f64, n: usize) -> SympDiffSystem {
        SympDiffSystem::constant(
            Grid::new(0.0, b, n).unwrap(),
            Blocks { a: Mat::zeros(1, 1), b: Mat::identity(1, 1), c: Mat::from_element(1, 1, r) },
        )
    }

    #[test]
    fn zero_system_is_constant_and_degenerate() {
        let g = Grid::new(0.0, 1.0, 64).unwrap();
        let sys = SympDiffSystem::constant(g, Blocks { a: Mat::zeros(2, 2), b: Mat::zeros(2, 2), c: Mat::zeros(2, 2) });
        let s = xi_from_system(&sys).unwrap();
        for f in &s.frames {
            assert_eq!(f, &l0_frame(2));
        }
        assert_eq!(xi_derivative_form(&s, s.times[10]).unwrap().norm(), 0.0);
        assert!(!abstract_index(&s).unwrap().nondegenerate);
        let real = realize_system(&s).unwrap();
        assert_eq!(max_abs(&real.blocks(0.5).b), 0.0);
    }

    #[test]
    fn oscillator_derivative_is_pushforward() {
        let sys = ms(-1.0, 3.5, 1024);
        let fund = fundamental_matrix(&sys, &IntegrateOptions::default()).unwrap();
        let s = xi_from_fundamental(&fund).unwrap();
        assert_eq!(s.frames[0], l0_frame(1));
        for i in (3..s.times.len() - 3).step_by(50) {
            let d = xi_derivative_form(&s, s.times[i]).unwrap();
            let p = pushforward(&(-sys.blocks(s.times[i]).b), &fund.phi[i], &s.frames[i]);
            assert_relative_eq!(d.matrix(), &p, epsilon = 1e-6);
            let d2 = xi_derivative_form_with(&s, s.times[i], &SymmetricForm::diag(&[0.7])).unwrap();
            assert_relative_eq!(d.matrix(), d2.matrix(), epsilon = 1e-6);
        }
        let idx = abstract_index(&s).unwrap();
        assert_eq!((idx.nondegenerate, idx.index), (true, 0));
        let inst = abstract_instants(&s, 5.0 * s.grid.h());
        assert_eq!(inst.len(), 1);
        assert!((inst[0] - std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn realization_round_trip_keeps_instants() {
        let sys = ms(-1.0, 3.5, 2048);
        let s = xi_from_system(&sys).unwrap();
        let real = realize_system(&s).unwrap();
        let before = conjugate_instants(&sys).unwrap();
        let after = conjugate_instants(&real).unwrap();
        assert_eq!(after.instants.len(), 1);
        assert!((before.instants[0].t - after.instants[0].t).abs() < 1e-6);
    }

    #[test]
    fn analytic_frame_realization() {
        // ξ(t) = graph of S(t) = diag(t, -t) over L0, shifted: frames [S(t); I]
        let curve = FrameCurve::new(|t, order| {
            let mut v = vec![Mat::zeros(4, 2); order + 1];
            v[0][(0, 0)] = t;
            v[0][(1, 1)] = -t;
            v[0][(2, 0)] = 1.0;
            v[0][(3, 1)] = 1.0;
            if order >= 1 {
                v[1][(0, 0)] = 1.0;
                v[1][(1, 1)] = -1.0;
            }
            MatJet(v)
        });
        let grid = Grid::new(0.0, 1.0, 128).unwrap();
        let s = AbstractSystem::from_curve(2, grid, curve, "test").unwrap();
        let idx = abstract_index(&s).unwrap();
        assert_eq!((idx.nondegenerate, idx.index), (true, 1));
        let x = realize_system(&s).unwrap();
        assert!(x.b_inertia().unwrap().is_nondegenerate());
        assert_eq!(x.b_inertia().unwrap().n_minus, 1);
        let x_fd = realize_system(&AbstractSystem { curve: None, ..s.clone() }).unwrap();
        for t in [0.2, 0.5, 0.8] {
            let (p, q) = (x.x(t), x_fd.x(t));
            // same ξ-curve, possibly different gauge: compare B up to congruence through inertia
            assert_eq!(
                crate::symform::inertia(&SymmetricForm::new(x.blocks(t).b), 1e-9),
                crate::symform::inertia(&SymmetricForm::new(x_fd.blocks(t).b), 1e-9)
            );
            assert!(crate::symplectic::algebra_residual(&p) < 1e-12);
            assert!(crate::symplectic::algebra_residual(&q) < 1e-12);
        }
    }
}
