use super::system::{BlocksJet, MatCurve, MorseSturm, SampledMatCurve, SympDiffSystem};
use crate::fd::{fornberg, stencil_range};
use crate::jet::MatJet;
use crate::linalg::{blocks, inverse, max_abs, spectral_norm, sym};
use crate::symform::SymmetricForm;
use crate::symplectic::symplectic_drift;
use crate::{Error, Mat, Result};

/// Isomorphism `(v, α) ↦ (Z v, Z⁻ᵀ(W v + α))` between systems.
#[derive(Clone, Debug)]
pub struct IsoPair {
    pub z: MatCurve,
    pub w: MatCurve,
}

impl IsoPair {
    pub fn identity(n: usize) -> Self {
        IsoPair { z: MatCurve::constant(Mat::identity(n, n)), w: MatCurve::constant(Mat::zeros(n, n)) }
    }

    /// The block matrix `[[Z, 0], [Z⁻ᵀW, Z⁻ᵀ]]` at `t`.
    pub fn matrix(&self, t: f64) -> Result<Mat> {
        let z = self.z.value(t);
        let w = self.w.value(t);
        let zit = inverse(&z, "isomorphism Z(t)")?.transpose();
        let n = z.nrows();
        Ok(blocks(&z, &Mat::zeros(n, n), &(&zit * w), &zit))
    }

    /// Largest symplectic drift of the block matrix over the report grid.
    pub fn max_drift(&self, grid: &crate::Grid) -> Result<f64> {
        let mut worst = 0.0_f64;
        for t in grid.times() {
            worst = worst.max(symplectic_drift(&self.matrix(t)?));
        }
        Ok(worst)
    }
}

/// Transported blocks from jets of `X`, `Z` (one order higher) and `W` (one order higher).
fn transport(x: &BlocksJet, z: &MatJet, w: &MatJet, order: usize) -> Option<BlocksJet> {
    let z = z.truncate(order + 1);
    let w = w.truncate(order + 1);
    let zinv = z.inverse()?.truncate(order);
    let dz = z.derivative();
    let dw = w.derivative();
    let z = z.truncate(order);
    let w = w.truncate(order);
    let (a, b, c) = (x.a.truncate(order), x.b.truncate(order), x.c.truncate(order));
    let zb = &z * &b;
    let a_t = &(&(&dz + &(&z * &a)) - &(&zb * &w)) * &zinv;
    let b_t = (&zb * &z.transpose()).sym();
    let wbw = &(&w * &b) * &w;
    let inner = &(&(&(&dw + &(&w * &a)) + &c) - &wbw) + &(&a.transpose() * &w);
    let c_t = (&(&zinv.transpose() * &inner) * &zinv).sym();
    Some(BlocksJet { a: a_t, b: b_t, c: c_t })
}

/// The system `X̃` whose solutions are the images of solutions of `X` under `iso`.
pub fn apply_isomorphism(sys: &SympDiffSystem, iso: &IsoPair) -> Result<SympDiffSystem> {
    for t in sys.grid.times() {
        let z = iso.z.value(t);
        if z.shape() != (sys.n, sys.n) {
            return Err(Error::Dimension("isomorphism size differs from the system".into()));
        }
        inverse(&z, "isomorphism Z(t)").map_err(|_| Error::Singular(format!("Z(t) is singular at t = {t}")))?;
    }
    let coeff = sys.coeff.clone();
    let iso = iso.clone();
    Ok(SympDiffSystem::analytic(sys.n, sys.grid.clone(), move |t, order| {
        let x = coeff.jet(t, order);
        let z = iso.z.jet(t, order + 1);
        let w = iso.w.jet(t, order + 1);
        transport(&x, &z, &w, order).expect("Z(t) was checked invertible on the grid")
    }))
}

/// `M₁ = −½ B′ B⁻¹` as a jet of the given order (needs `B` one order higher).
fn m1_jet(b: &MatJet, order: usize) -> Option<MatJet> {
    let binv = b.inverse()?;
    Some((&b.derivative() * &binv.truncate(b.order() - 1)).scale(-0.5).truncate(order))
}

/// Jets of `Z` solving `Z′ = Z M` at a point, from the value and the jet of `M`.
fn ode_jet(z: &Mat, m: &MatJet, order: usize) -> MatJet {
    let mut out = vec![z.clone()];
    for k in 0..order {
        let mut acc = Mat::zeros(z.nrows(), z.ncols());
        for i in 0..=k {
            if k - i <= m.order() {
                acc += &out[i] * &m.0[k - i];
            }
        }
        out.push(acc / (k + 1) as f64);
    }
    MatJet(out)
}

/// A matrix similar to the `R` of the Morse–Sturm reduction at a point, from a
/// jet of `X` of order at least 2.
///
/// The composite reduction has `W = sym(B⁻¹(A + M₁))` whatever `Z` is, and
/// `R = Z B K Z⁻¹` with `K = W′ + WA + C − WBW + AᵀW`; this returns `B K`.
pub fn morse_sturm_curvature(x: &BlocksJet) -> Option<Mat> {
    if x.order() < 2 {
        return None;
    }
    let binv = x.b.inverse()?;
    let m = m1_jet(&x.b, 1)?;
    let w = (&binv.truncate(1) * &(&x.a.truncate(1) + &m)).sym();
    let (a, c, b) = (&x.a.0[0], &x.c.0[0], &x.b.0[0]);
    let w0 = &w.0[0];
    let k = &w.0[1] + w0 * a + c - w0 * b * w0 + a.transpose() * w0;
    Some(b * k)
}

/// Newton steps `Z ← (I + ½(B₀ − M)M⁻¹) Z` with `M = Z B Zᵀ`, pulling `Z B Zᵀ` back onto `B₀`.
fn restore_flat(z: &Mat, b: &Mat, b0: &Mat) -> Mat {
    let mut z = z.clone();
    for _ in 0..2 {
        let m = sym(&(&z * b * z.transpose()));
        let defect = b0 - &m;
        if max_abs(&defect) <= 1e-15 * (1.0 + max_abs(b0)) {
            break;
        }
        let Some(minv) = m.clone().try_inverse() else { break };
        z = (Mat::identity(z.nrows(), z.nrows()) + defect * minv * 0.5) * z;
    }
    z
}

fn rk4<S, F>(y: &S, t: f64, h: f64, f: F) -> S
where
    S: Clone + std::ops::Add<S, Output = S> + std::ops::Mul<f64, Output = S>,
    F: Fn(f64, &S) -> S,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &(y.clone() + k1.clone() * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(y.clone() + k2.clone() * (0.5 * h)));
    let k4 = f(t + h, &(y.clone() + k3.clone() * h));
    y.clone() + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
}

#[derive(Clone)]
struct Pair(Mat, Mat);

impl std::ops::Add for Pair {
    type Output = Pair;
    fn add(self, o: Pair) -> Pair {
        Pair(self.0 + o.0, self.1 + o.1)
    }
}

impl std::ops::Mul<f64> for Pair {
    type Output = Pair;
    fn mul(self, s: f64) -> Pair {
        Pair(self.0 * s, self.1 * s)
    }
}

fn b_jet(sys: &SympDiffSystem, t: f64, order: usize) -> BlocksJet {
    sys.jet(t, order)
}

/// Flatten `B`: returns `X̃` with `B̃ ≡ B(a)` and the isomorphism (`W ≡ 0`).
///
/// `Z′ = −½ Z B′ B⁻¹` is integrated with RK4 on twice the grid schedule so that
/// every stage node of the grid is a solution node; `X̃` is sampled there.
pub fn flatten_b(sys: &SympDiffSystem) -> Result<(SympDiffSystem, IsoPair)> {
    sys.b_inertia()?;
    let n = sys.n;
    let nodes = sys.grid.stage_nodes();
    let m1 = |t: f64| -> Mat {
        let j = b_jet(sys, t, 1);
        m1_jet(&j.b, 0).expect("B(t) nondegenerate").0.swap_remove(0)
    };
    let mut z = Mat::identity(n, n);
    let mut zs = Vec::with_capacity(nodes.len());
    zs.push(z.clone());
    for w in nodes.windows(2) {
        z = rk4(&z, w[0], w[1] - w[0], |t, z: &Mat| z * m1(t));
        zs.push(z.clone());
    }
    let mut sys_jets = Vec::with_capacity(nodes.len());
    let mut z_jets = Vec::with_capacity(nodes.len());
    for (&t, z) in nodes.iter().zip(&zs) {
        let x = sys.jet(t, 1);
        let m = m1_jet(&x.b, 0).ok_or_else(|| Error::Degenerate(format!("B(t) at t = {t}")))?;
        let zj = ode_jet(z, &m, 1);
        let zero = MatJet::constant(Mat::zeros(n, n), 1);
        let tj = transport(&x.truncate(0), &zj, &zero, 0)
            .ok_or_else(|| Error::Singular(format!("Z(t) is singular at t = {t}")))?;
        sys_jets.push(tj);
        z_jets.push(zj);
    }
    let iso = IsoPair {
        z: MatCurve::Sampled(SampledMatCurve::new(nodes.clone(), z_jets)?),
        w: MatCurve::constant(Mat::zeros(n, n)),
    };
    let out = SympDiffSystem::sampled_jets(sys.grid.clone(), nodes, sys_jets)?;
    Ok((out, iso))
}

/// Result of the two-stage reduction with its residual diagnostics.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub morse_sturm: MorseSturm,
    /// Composite isomorphism from the input system to the Morse–Sturm system.
    pub iso: IsoPair,
    /// `max ‖Ã‖` with `Z′` taken from the ODE.
    pub a_residual: f64,
    /// `max ‖Ã‖` with `Z′` from finite differences of the stored `Z`.
    pub a_residual_fd: f64,
    /// `max ‖Z₁ B Z₁ᵀ − B(a)‖`.
    pub b_defect: f64,
    /// `max ‖(BW − A)B + B(BW − A)ᵀ‖` in the second stage.
    pub lie_residual: f64,
}

pub const A_TOL: f64 = 1e-8;
pub const B_TOL: f64 = 1e-8;
pub const LIE_TOL: f64 = 1e-10;

/// Reduce a nondegenerate system to Morse–Sturm form.
pub fn to_morse_sturm(sys: &SympDiffSystem) -> Result<(MorseSturm, IsoPair)> {
    let r = to_morse_sturm_report(sys)?;
    Ok((r.morse_sturm, r.iso))
}

/// Both reduction stages fused into one ODE for `(Z₁, Z₂)`:
/// `Z₁′ = Z₁ M₁` flattens `B` and `Z₂′ = Z₂(B₀W − Ã)` removes `A`.
pub fn to_morse_sturm_report(sys: &SympDiffSystem) -> Result<Reduction> {
    sys.b_inertia()?;
    let n = sys.n;
    let nodes = sys.grid.stage_nodes();
    let x0 = sys.blocks(sys.grid.a);
    let b0 = sym(&x0.b);
    let b0inv = sym(&inverse(&b0, "B(a)")?);
    let w_of = |at: &Mat| sym(&(&b0inv * at));

    // (A + M₁, M₁) at a time; each RK4 step reuses the value at its left end
    let coeffs_of = |t: f64, x: &BlocksJet| -> Result<(Mat, Mat, Mat)> {
        let m = m1_jet(&x.b.truncate(1), 0).ok_or_else(|| Error::Degenerate(format!("B(t) at t = {t}")))?.0.swap_remove(0);
        Ok((&x.a.0[0] + &m, m, x.b.0[0].clone()))
    };
    // stage nodes alternate solution nodes and midpoints; their order-2 jets feed
    // both the RK4 stages and the transport below
    let node_jets: Vec<BlocksJet> = nodes.iter().map(|&t| sys.jet(t, 2)).collect();
    let cs = nodes.iter().zip(&node_jets).map(|(&t, x)| coeffs_of(t, x)).collect::<Result<Vec<_>>>()?;
    // Ã = Z₁(A + M₁)Z₁⁻¹ with the RK4 stage state
    let rhs = |c: &(Mat, Mat, Mat), y: &Pair| -> Pair {
        let z1inv = y.0.clone().try_inverse().unwrap_or_else(|| Mat::from_element(n, n, f64::NAN));
        let at = &y.0 * &c.0 * z1inv;
        let l = &b0 * w_of(&at) - at;
        Pair(&y.0 * &c.1, &y.1 * l)
    };
    let mut y = Pair(Mat::identity(n, n), Mat::identity(n, n));
    let mut states = Vec::with_capacity(nodes.len());
    states.push(y.clone());
    for i in (0..nodes.len() - 1).step_by(2) {
        let h = nodes[i + 2] - nodes[i];
        let (cl, cm, cr) = (&cs[i], &cs[i + 1], &cs[i + 2]);
        let k1 = rhs(cl, &y);
        let k2 = rhs(cm, &(y.clone() + k1.clone() * (0.5 * h)));
        let k3 = rhs(cm, &(y.clone() + k2.clone() * (0.5 * h)));
        let k4 = rhs(cr, &(y.clone() + k3.clone() * h));
        let mut next = y.clone() + (k1.clone() + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        next.0 = restore_flat(&next.0, &cr.2, &b0);
        if !next.0.iter().chain(next.1.iter()).all(|v| v.is_finite()) {
            return Err(Error::Singular(format!("reduction ODE diverged at t = {}", nodes[i + 2])));
        }
        // cubic Hermite value at the midpoint
        let d1 = rhs(cr, &next);
        let mut mid = (y.clone() + next.clone()) * 0.5 + (k1 + d1 * -1.0) * (h / 8.0);
        mid.0 = restore_flat(&mid.0, &cm.2, &b0);
        states.push(mid);
        states.push(next.clone());
        y = next;
    }

    let mut r_vals = Vec::with_capacity(nodes.len());
    let mut z_jets = Vec::with_capacity(nodes.len());
    let mut w_jets = Vec::with_capacity(nodes.len());
    let mut a_residual = 0.0_f64;
    let mut b_defect = 0.0_f64;
    let mut lie_residual = 0.0_f64;
    for ((&t, Pair(z1, z2)), x) in nodes.iter().zip(&states).zip(&node_jets) {
        let m = m1_jet(&x.b, 1).ok_or_else(|| Error::Degenerate(format!("B(t) at t = {t}")))?;
        let z1j = ode_jet(z1, &m, 2);
        let z1inv = z1j.inverse().ok_or_else(|| Error::Singular(format!("Z₁(t) at t = {t}")))?;
        // first stage, jets of order 1
        let am = &x.a.truncate(1) + &m;
        let at = &(&z1j.truncate(1) * &am) * &z1inv.truncate(1);
        let c1 = (&(&z1inv.transpose().truncate(0) * &x.c.truncate(0)) * &z1inv.truncate(0)).sym();
        let b1 = sym(&(z1 * &x.b.0[0] * z1.transpose()));
        b_defect = b_defect.max(max_abs(&(&b1 - &b0)));
        // second stage
        let w2 = at.map(|m| w_of(m));
        let l = &b0 * &w2.0[0] - &at.0[0];
        lie_residual = lie_residual.max(max_abs(&(&l * &b0 + &b0 * l.transpose())));
        let z2j = ode_jet(z2, &MatJet(vec![l]), 1);
        let at0 = MatJet(vec![at.0[0].clone()]);
        let b1j = MatJet(vec![b1.clone()]);
        let x1 = BlocksJet { a: at0, b: b1j, c: c1 };
        let tj = transport(&x1, &z2j, &w2, 0).ok_or_else(|| Error::Singular(format!("Z₂(t) at t = {t}")))?;
        a_residual = a_residual.max(max_abs(&tj.a.0[0]));
        r_vals.push(&b0 * &tj.c.0[0]);
        // composite Z = Z₂Z₁, W = Z₁ᵀW₂Z₁
        let zj = &z2j * &z1j.truncate(1);
        let wj = &(&z1j.truncate(1).transpose() * &w2) * &z1j.truncate(1);
        z_jets.push(zj);
        w_jets.push(wj.sym());
    }

    // independent check of Ã with Z′ from a 5-point stencil on the nodes
    let zs: Vec<Mat> = z_jets.iter().map(|j| j.0[0].clone()).collect();
    let mut a_residual_fd = 0.0_f64;
    for (i, &t) in nodes.iter().enumerate() {
        let range = stencil_range(i, nodes.len(), 5);
        let wts = fornberg(t, &nodes[range.clone()], 1);
        let mut dz = Mat::zeros(n, n);
        for (k, j) in range.enumerate() {
            dz += &zs[j] * wts[1][k];
        }
        let x = node_jets[i].value();
        let z = &zs[i];
        let w = &w_jets[i].0[0];
        let zinv = inverse(z, "Z(t)")?;
        let at = (dz + z * &x.a - z * &x.b * w) * zinv;
        a_residual_fd = a_residual_fd.max(max_abs(&at));
    }

    let scale = 1.0 + spectral_norm(&b0);
    if b_defect > B_TOL * scale {
        return Err(Error::Residual { what: "Z B Zᵀ − B(a)".into(), value: b_defect, tol: B_TOL * scale });
    }
    if lie_residual > LIE_TOL * scale * scale {
        return Err(Error::Residual { what: "Lie algebra membership".into(), value: lie_residual, tol: LIE_TOL });
    }
    if a_residual > A_TOL {
        return Err(Error::Residual { what: "transported A".into(), value: a_residual, tol: A_TOL });
    }
    let g = SymmetricForm::new(b0inv);
    let r = MatCurve::Sampled(SampledMatCurve::from_values(nodes.clone(), r_vals)?);
    let morse_sturm = MorseSturm::new(g, r, sys.grid.clone())?;
    let iso = IsoPair {
        z: MatCurve::Sampled(SampledMatCurve::new(nodes.clone(), z_jets)?),
        w: MatCurve::Sampled(SampledMatCurve::new(nodes, w_jets)?),
    };
    Ok(Reduction { morse_sturm, iso, a_residual, a_residual_fd, b_defect, lie_residual })
}
