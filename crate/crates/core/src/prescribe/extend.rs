use super::vanish::smooth_step;
use crate::abstract_sys::FrameCurve;
use crate::fd::gauss5;
use crate::jet::{Jet, MatJet};
use crate::linalg::{hstack, inverse, j_mul, max_abs, orthonormalize, singular_values, spectral_norm};
use crate::symform::{distance_to_degenerate, inertia, SpectralPath, SymmetricForm, DEFAULT_ZERO_TOL};
use crate::symplectic::{complement_with_chart_value, intersection_dim, transversality, LagrangianFrame};
use crate::{Error, Grid, Mat, Result};
use std::sync::Arc;

pub type MatFn = Arc<dyn Fn(f64, usize) -> MatJet + Send + Sync>;

const TAYLOR_ORDER: usize = 3;
const PANELS: usize = 512;

fn norm(m: &Mat) -> f64 {
    spectral_norm(m)
}

/// `Σ coeffs[k] (s − c)ᵏ` for a jet `s`.
fn taylor_poly(coeffs: &[Mat], s: &Jet, c: f64) -> MatJet {
    let x = s.add_const(-c);
    let mut pow = Jet::constant(1.0, s.order());
    let mut out = MatJet::constant(coeffs[0].clone(), s.order());
    for ck in &coeffs[1..] {
        pow = &pow * &x;
        out = &out + &MatJet::constant(ck.clone(), s.order()).scale_jet(&pow);
    }
    out
}

/// `β·T + (1 − β)·S` for a scalar jet `β`.
fn blend(beta: &Jet, t: &MatJet, s: &MatJet) -> MatJet {
    let one_minus = beta.scale(-1.0).add_const(1.0);
    &t.scale_jet(beta) + &s.scale_jet(&one_minus)
}

/// Cumulative Gauss quadrature of a matrix curve on fixed panels.
#[derive(Clone, Debug)]
struct Cumulative {
    edges: Vec<f64>,
    cum: Vec<Mat>,
}

impl Cumulative {
    fn new(f: &dyn Fn(f64) -> Mat, lo: f64, hi: f64, panels: usize) -> Self {
        let edges: Vec<f64> = (0..=panels).map(|k| lo + (hi - lo) * k as f64 / panels as f64).collect();
        let mut cum = vec![f(lo) * 0.0];
        for w in edges.windows(2) {
            let step = gauss5(f, w[0], w[1]);
            cum.push(&cum[cum.len() - 1] + step);
        }
        Cumulative { edges, cum }
    }

    fn total(&self) -> &Mat {
        &self.cum[self.cum.len() - 1]
    }

    fn at(&self, f: &dyn Fn(f64) -> Mat, t: f64) -> Mat {
        let lo = self.edges[0];
        let hi = self.edges[self.edges.len() - 1];
        if t <= lo {
            return &self.cum[0] * 1.0;
        }
        if t >= hi {
            return self.total().clone();
        }
        let k = (((t - lo) / (hi - lo)) * (self.edges.len() - 1) as f64).floor() as usize;
        let k = k.min(self.edges.len() - 2);
        &self.cum[k] + gauss5(f, self.edges[k], t)
    }
}

/// Everything in the average-preserving extension that does not depend on `η`.
#[derive(Clone)]
pub struct AveragePlan {
    pub a: f64,
    pub c: f64,
    pub u: Mat,
    /// Radius of a ball around `u` of forms with the inertia of `u`.
    pub r: f64,
    /// `M = ‖u‖ + 1 + ‖γ‖∞`.
    pub m_bound: f64,
    /// `‖γ − u‖∞` over the connecting curve.
    pub deviation: f64,
    path: SpectralPath,
    taubar: MatFn,
    taylor: Vec<Mat>,
    kappa: f64,
}

impl AveragePlan {
    /// The connecting curve on `[c − ℓ, c]`: the in-`U` path from `u` to `τ̄(c)`,
    /// then a blend over `[c − 2κ, c − κ]` into the Taylor polynomial of `τ̄` at `c`.
    fn gamma_on(&self, t: &Jet, ell: f64, kappa: f64) -> MatJet {
        let c = self.c;
        let theta = smooth_step(&t.add_const(-(c - ell)).scale(1.0 / (ell - 2.0 * kappa)));
        let path = self.path.jet(&theta);
        let beta = smooth_step(&t.add_const(-(c - 2.0 * kappa)).scale(1.0 / kappa));
        let poly = taylor_poly(&self.taylor, t, c);
        blend(&beta, &poly, &path)
    }

    /// Pick `ε` and assemble the extension.
    pub fn finish(self, eta: f64) -> Result<AverageExtension> {
        if !(eta > 0.0) {
            return Err(Error::Invalid("eta must be positive".into()));
        }
        let span = self.c - self.a;
        let bound = self.r.min(1.0);
        let mut eps = (0.9 * eta).min(0.5 * span).min(0.5);
        let mut tries = 0;
        while eps / (span - eps) * self.deviation >= bound {
            eps *= 0.5;
            tries += 1;
            if tries > 200 {
                return Err(Error::NotFound("no admissible epsilon for the extension".into()));
            }
        }
        let kappa = (eps / 8.0).min(self.kappa);
        let c = self.c;
        let mut ext = AverageExtension {
            plan: self,
            eta,
            eps,
            kappa,
            delta: Mat::zeros(0, 0),
            i1: span - 0.75 * eps,
            gamma_int: Cumulative { edges: vec![], cum: vec![] },
            phi1_int: Cumulative { edges: vec![], cum: vec![] },
        };
        let g = |t: f64| ext.gamma_jet(&Jet::variable(t, 0)).0.swap_remove(0);
        ext.gamma_int = Cumulative::new(&g, c - 0.5 * eps, c, PANELS);
        let p1 = |t: f64| Mat::from_element(1, 1, ext.phi1(&Jet::variable(t, 0)).value());
        ext.phi1_int = Cumulative::new(&p1, c - 0.95 * eps, c - 0.55 * eps, PANELS / 4);
        let u = &ext.plan.u;
        ext.delta = -(ext.gamma_int.total() - u * (0.5 * eps)) / ext.i1;
        Ok(ext)
    }
}

/// Build the `η`-independent part: the connecting path inside the set of forms
/// with the inertia of `u`, its Taylor junction with `τ̄` at `c`, and `M`.
pub fn plan_average(taubar: MatFn, u: &SymmetricForm, a: f64, c: f64, b: f64) -> Result<AveragePlan> {
    if !(a < c && c <= b) {
        return Err(Error::Invalid(format!("need a < c <= b, got {a}, {c}, {b}")));
    }
    let tc = taubar(c, TAYLOR_ORDER);
    let end = SymmetricForm::new(tc.value().clone());
    let iu = inertia(u, DEFAULT_ZERO_TOL);
    let ie = inertia(&end, DEFAULT_ZERO_TOL);
    if !iu.is_nondegenerate() || iu != ie {
        return Err(Error::Invalid(format!("u has inertia {iu:?}, the curve starts with {ie:?}")));
    }
    let path = SpectralPath::new(u, &end)?;
    let margin = 0.25 * distance_to_degenerate(&end);
    let taylor = tc.0.clone();
    let mut kappa = 0.25;
    let samples = 64;
    loop {
        let ok = (0..=samples).all(|k| {
            let s = c - 2.0 * kappa * k as f64 / samples as f64;
            let poly = taylor_poly(&taylor, &Jet::constant(s, 0), c).0.swap_remove(0);
            norm(&(&poly - end.matrix())) <= margin
        });
        if ok {
            break;
        }
        kappa *= 0.5;
        if kappa < 1e-12 {
            return Err(Error::NotFound("no Taylor junction radius keeps the path nondegenerate".into()));
        }
    }
    let mut plan = AveragePlan {
        a,
        c,
        u: u.matrix().clone(),
        r: distance_to_degenerate(u),
        m_bound: 0.0,
        deviation: 0.0,
        path,
        taubar: taubar.clone(),
        taylor,
        kappa,
    };
    // the curve is a convex combination of path and Taylor values, so both sups bound it
    let mut sup = 0.0_f64;
    let mut dev = 0.0_f64;
    let n_path = 4096;
    for k in 0..=n_path {
        let x = k as f64 / n_path as f64;
        let p = plan.path.eval(x).into_matrix();
        let q = taylor_poly(&plan.taylor, &Jet::constant(c - 2.0 * kappa * x, 0), c).0.swap_remove(0);
        for g in [p, q] {
            if inertia(&SymmetricForm::new(g.clone()), DEFAULT_ZERO_TOL) != iu {
                return Err(Error::Degenerate("connecting path leaves the inertia class".into()));
            }
            sup = sup.max(norm(&g));
            dev = dev.max(norm(&(&g - &plan.u)));
        }
    }
    plan.m_bound = norm(&plan.u) + 1.0 + sup;
    plan.deviation = dev;
    Ok(plan)
}

/// Extension `τ` of `τ̄` to `[a, b]` with mean `u` on `[a, c]`, constant on `[a, c − η]`.
#[derive(Clone)]
pub struct AverageExtension {
    pub plan: AveragePlan,
    pub eta: f64,
    pub eps: f64,
    /// Blend length of the Taylor junction.
    pub kappa: f64,
    pub delta: Mat,
    /// `∫ₐᶜ φ₁`.
    i1: f64,
    gamma_int: Cumulative,
    phi1_int: Cumulative,
}

pub fn extend_average(taubar: MatFn, u: &SymmetricForm, a: f64, c: f64, b: f64, eta: f64) -> Result<AverageExtension> {
    plan_average(taubar, u, a, c, b)?.finish(eta)
}

impl AverageExtension {
    pub fn a(&self) -> f64 {
        self.plan.a
    }

    pub fn c(&self) -> f64 {
        self.plan.c
    }

    /// `φ₁`, equal to 1 up to `c − 0.95ε` and 0 from `c − 0.55ε`.
    fn phi1(&self, t: &Jet) -> Jet {
        let lo = self.plan.c - 0.95 * self.eps;
        smooth_step(&t.add_const(-lo).scale(1.0 / (0.4 * self.eps))).scale(-1.0).add_const(1.0)
    }

    /// `γ` on `[c − ε/2, c]`.
    fn gamma_jet(&self, t: &Jet) -> MatJet {
        self.plan.gamma_on(t, 0.5 * self.eps, self.kappa)
    }

    /// `‖δ‖` and the bound `ε/(c − a − ε) ‖γ − u‖∞`.
    pub fn delta_bound(&self) -> (f64, f64) {
        let span = self.plan.c - self.plan.a;
        (norm(&self.delta), self.eps / (span - self.eps) * self.plan.deviation)
    }

    /// Jet of `τ` at `t`.
    pub fn tau_jet(&self, t: f64, order: usize) -> MatJet {
        let c = self.plan.c;
        let u = &self.plan.u;
        if t >= c {
            return (self.plan.taubar)(t, order);
        }
        let tj = Jet::variable(t, order);
        if t >= c - 0.5 * self.eps {
            return self.gamma_jet(&tj);
        }
        if t >= c - 0.95 * self.eps {
            let p1 = self.phi1(&tj);
            return &MatJet::constant(u.clone(), order) + &MatJet::constant(self.delta.clone(), order).scale_jet(&p1);
        }
        MatJet::constant(u + &self.delta, order)
    }

    /// `∫ₐᵗ τ` for `t ∈ [a, c]`.
    pub fn integral(&self, t: f64) -> Mat {
        let (a, c, eps) = (self.plan.a, self.plan.c, self.eps);
        let u = &self.plan.u;
        let t = t.clamp(a, c);
        if t <= c - 0.95 * eps {
            return (u + &self.delta) * (t - a);
        }
        if t <= c - 0.55 * eps {
            let p1 = |s: f64| Mat::from_element(1, 1, self.phi1(&Jet::variable(s, 0)).value());
            let part = self.phi1_int.at(&p1, t)[(0, 0)];
            return u * (t - a) + &self.delta * (c - 0.95 * eps - a + part);
        }
        let base = u * (t.min(c - 0.5 * eps) - a) + &self.delta * self.i1;
        if t <= c - 0.5 * eps {
            return base;
        }
        let g = |s: f64| self.gamma_jet(&Jet::variable(s, 0)).0.swap_remove(0);
        base + self.gamma_int.at(&g, t)
    }

    /// Jet of `σ(t) = ∫ₐᵗ τ` for `t ≤ c`.
    pub fn integral_jet(&self, t: f64, order: usize) -> MatJet {
        let mut out = vec![self.integral(t)];
        if order > 0 {
            let tau = self.tau_jet(t, order - 1);
            for (k, m) in tau.0.into_iter().enumerate() {
                out.push(m / (k + 1) as f64);
            }
        }
        MatJet(out)
    }
}

/// Extension of a curve of forms `σ̄` on `[c, b]` to `[a, b]` with `σ(a) = 0`.
#[derive(Clone)]
pub struct FormExtension {
    pub average: AverageExtension,
    pub sigmabar: MatFn,
    pub b: f64,
}

/// `σ = ∫ₐ τ` where `τ` extends `σ̄′` with mean `σ̄(c)/(c − a)`.
pub fn extend_forms(sigmabar: MatFn, a: f64, c: f64, b: f64) -> Result<FormExtension> {
    let sc = sigmabar(c, 1);
    let s0 = SymmetricForm::new(sc.value().clone());
    let s1 = SymmetricForm::new(sc.deriv(1));
    let i0 = inertia(&s0, DEFAULT_ZERO_TOL);
    let i1 = inertia(&s1, DEFAULT_ZERO_TOL);
    if !i0.is_nondegenerate() || !i1.is_nondegenerate() {
        return Err(Error::Degenerate("the curve of forms or its derivative is degenerate at c".into()));
    }
    if i0 != i1 {
        return Err(Error::Invalid(format!("inertia of sigma(c) {i0:?} differs from that of sigma'(c) {i1:?}")));
    }
    let u = s0.scale(1.0 / (c - a));
    let sb = sigmabar.clone();
    let taubar: MatFn = Arc::new(move |t, order| sb(t, order + 1).derivative());
    let plan = plan_average(taubar, &u, a, c, b)?;
    let r = distance_to_degenerate(&s0);
    let eta = 0.5 * r / plan.m_bound;
    let average = plan.finish(eta)?;
    let ext = FormExtension { average, sigmabar, b };
    let mismatch = max_abs(&(ext.average.integral(c) - s0.matrix()));
    if mismatch > 1e-8 * (1.0 + s0.norm()) {
        return Err(Error::Residual { what: "sigma(c) against the given curve".into(), value: mismatch, tol: 1e-8 });
    }
    Ok(ext)
}

impl FormExtension {
    pub fn sigma_jet(&self, t: f64, order: usize) -> MatJet {
        if t >= self.average.c() {
            (self.sigmabar)(t, order)
        } else {
            self.average.integral_jet(t, order)
        }
    }

    pub fn sigma(&self, t: f64) -> Mat {
        self.sigma_jet(t, 0).0.swap_remove(0)
    }
}

/// Jet of `φ_{ξ0,ξ1}(L(t))` from a frame jet of `L`, with `E`, `X1` frames of `ξ0`, `ξ1`.
pub fn chart_jet(e: &Mat, x1: &Mat, g: &MatJet) -> Option<MatJet> {
    let n = e.ncols();
    let m = MatJet(g.0.iter().enumerate().map(|(k, gk)| hstack(gk, &(if k == 0 { -x1 } else { x1 * 0.0 }))).collect());
    let sol = m.inverse()?.rmul(e);
    let d = sol.map(|s| s.rows(n, n).into_owned());
    let k = x1.transpose() * j_mul(e);
    Some((&d.transpose() * &MatJet::constant(k, d.order())).sym())
}

/// Extension of a curve of Lagrangians on `[c, b]` back to `ξ(a) = ξ0`.
#[derive(Clone)]
pub struct LagrangianExtension {
    pub xi0: LagrangianFrame,
    pub xi1: LagrangianFrame,
    pub p: SymmetricForm,
    pub c: f64,
    pub b_prime: f64,
    pub forms: FormExtension,
    xibar: FrameCurve,
    /// `N⁻ᵀ` for the chart inverse `E + X1 N⁻ᵀ σ`.
    ninv_t: Mat,
    gauge: Vec<Mat>,
    pub gauge_kappa: f64,
}

/// Extend `ξ̄` (given on `[c, b]`, transverse to `xi0` at `c`, nondegenerate derivative)
/// to `[a, b]` with `ξ(a) = xi0` and `ξ(t) ∩ xi0 = 0` on `]a, c]`.
pub fn extend_lagrangian(
    xibar: FrameCurve,
    xi0: &LagrangianFrame,
    a: f64,
    c: f64,
    grid: &Grid,
) -> Result<LagrangianExtension> {
    extend_lagrangian_with(xibar, xi0, a, c, grid, None)
}

/// As [`extend_lagrangian`] with an explicit chart value `P = φ(ξ̄(c))`. By default
/// `P` is chosen so that the chart derivative at `c` equals `P/(c − a)`, which makes
/// the average-preserving extension a short blend.
pub fn extend_lagrangian_with(
    xibar: FrameCurve,
    xi0: &LagrangianFrame,
    a: f64,
    c: f64,
    grid: &Grid,
    chart_value: Option<SymmetricForm>,
) -> Result<LagrangianExtension> {
    let n = xi0.n();
    let gc = LagrangianFrame::new(xibar.value(c))?;
    if intersection_dim(&gc, xi0, crate::symplectic::DEFAULT_RANK_TOL)? > 0 {
        return Err(Error::NotTransverse("the curve meets xi0 at c".into()));
    }
    // inertia of ξ̄′(c) through a chart centred at ξ̄(c)
    let q = orthonormalize(gc.columns());
    let d0 = chart_jet(gc.columns(), &j_mul(&q), &xibar.jet(c, 1))
        .ok_or_else(|| Error::Singular("chart centred at the curve".into()))?;
    let ic = inertia(&SymmetricForm::new(d0.deriv(1)), DEFAULT_ZERO_TOL);
    if !ic.is_nondegenerate() {
        return Err(Error::Degenerate("derivative of the curve at c".into()));
    }
    let diag: Vec<f64> = (0..n).map(|i| if i < ic.n_plus { 1.0 } else { -1.0 }).collect();
    let p = match chart_value {
        Some(p) => {
            if inertia(&p, DEFAULT_ZERO_TOL) != ic {
                return Err(Error::Invalid("chart value must have the inertia of the derivative at c".into()));
            }
            p
        }
        None => {
            // with chart value P the chart derivative at c is P D P; D⁻¹/(c − a) makes it P/(c − a)
            let p0 = SymmetricForm::diag(&diag);
            let x0 = complement_with_chart_value(&gc, xi0, &p0)?;
            let s0 = chart_jet(xi0.columns(), x0.columns(), &xibar.jet(c, 1))
                .ok_or_else(|| Error::Singular("provisional chart at c".into()))?;
            let d = p0.matrix() * s0.deriv(1) * p0.matrix();
            SymmetricForm::new(inverse(&d, "derivative form at c")? / (c - a))
        }
    };
    let xi1 = complement_with_chart_value(&gc, xi0, &p)?;

    // chart horizon: last grid point up to which ξ̄ stays transverse to ξ1
    let t0 = transversality(&gc, &xi1);
    let mut b_prime = c;
    for t in grid.times().into_iter().filter(|&t| t > c) {
        let l = LagrangianFrame::from_cols_unchecked(xibar.value(t));
        if transversality(&l, &xi1) < 1e-3 * t0 {
            break;
        }
        b_prime = t;
    }
    if b_prime <= c {
        return Err(Error::NotFound("the chart horizon beyond c is empty".into()));
    }

    let e = xi0.columns().clone();
    let x1 = xi1.columns().clone();
    let xb = xibar.clone();
    let (e2, x12) = (e.clone(), x1.clone());
    let sigmabar: MatFn = Arc::new(move |t, order| {
        chart_jet(&e2, &x12, &xb.jet(t, order)).unwrap_or_else(|| MatJet::constant(Mat::from_element(n, n, f64::NAN), order))
    });
    let forms = extend_forms(sigmabar, a, c, b_prime)?;
    let nmat = x1.transpose() * j_mul(&e);
    let ninv_t = inverse(&nmat, "chart pairing")?.transpose();

    let mut ext = LagrangianExtension {
        xi0: xi0.clone(),
        xi1,
        p,
        c,
        b_prime,
        forms,
        xibar,
        ninv_t,
        gauge: Vec::new(),
        gauge_kappa: 0.0,
    };
    // gauge M with G_L M = G_R at c, matched to third order
    let gl = ext.left_frame(&(ext.forms.sigmabar)(c, TAYLOR_ORDER));
    let gr = ext.xibar.jet(c, TAYLOR_ORDER);
    let glt = gl.transpose();
    let m = &(&glt * &gl).inverse().ok_or_else(|| Error::Singular("frame Gram matrix".into()))? * &(&glt * &gr);
    ext.gauge = m.0.clone();
    let m0 = m.0[0].clone();
    let margin = 0.5 * singular_values(&m0).last().copied().unwrap_or(0.0);
    if !(margin > 0.0) {
        return Err(Error::Singular("frame gauge at c".into()));
    }
    let mut kappa = 0.25 * (c - a);
    loop {
        let ok = (0..=64).all(|k| {
            let s = c - 2.0 * kappa * k as f64 / 64.0;
            let poly = taylor_poly(&ext.gauge, &Jet::constant(s, 0), c).0.swap_remove(0);
            norm(&(poly - &m0)) <= margin
        });
        if ok {
            break;
        }
        kappa *= 0.5;
        if kappa < 1e-12 {
            return Err(Error::NotFound("no gauge blending radius".into()));
        }
    }
    ext.gauge_kappa = kappa;
    Ok(ext)
}

impl LagrangianExtension {
    fn left_frame(&self, sigma: &MatJet) -> MatJet {
        let e = MatJet::constant(self.xi0.columns().clone(), sigma.order());
        let x = self.xi1.columns() * &self.ninv_t;
        &e + &sigma.lmul(&x)
    }

    pub fn a(&self) -> f64 {
        self.forms.average.a()
    }

    /// Smallest `t` where the curve is not exactly `ξ̄`.
    pub fn extension_start(&self) -> f64 {
        let avg = &self.forms.average;
        (self.c - avg.eps).min(self.c - 2.0 * self.gauge_kappa)
    }

    /// Frame jet of the extended curve.
    pub fn frame_jet(&self, t: f64, order: usize) -> MatJet {
        if t >= self.c {
            return self.xibar.jet(t, order);
        }
        let gl = self.left_frame(&self.forms.sigma_jet(t, order));
        let tj = Jet::variable(t, order);
        let m0 = MatJet::constant(self.gauge[0].clone(), order);
        let beta = smooth_step(&tj.add_const(-(self.c - 2.0 * self.gauge_kappa)).scale(1.0 / self.gauge_kappa));
        let m = blend(&beta, &taylor_poly(&self.gauge, &tj, self.c), &m0);
        &gl * &m
    }

    pub fn curve(&self) -> FrameCurve {
        let me = self.clone();
        FrameCurve::new(move |t, order| me.frame_jet(t, order))
    }
}
