use crate::fd::{bracket, fornberg, stencil_range};
use crate::grid::Grid;
use crate::jet::MatJet;
use crate::linalg::{blocks, inverse, max_abs, split};
use crate::symform::{inertia, Inertia, SymmetricForm, DEFAULT_ZERO_TOL};
use crate::{Error, Mat, Result};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Blocks `(A, B, C)` of `X = [[A, B], [C, -Aᵀ]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Blocks {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
}

impl Blocks {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn x(&self) -> Mat {
        blocks(&self.a, &self.b, &self.c, &(-self.a.transpose()))
    }

    /// Read the blocks of `X`, symmetrizing `B` and `C`.
    pub fn from_x(x: &Mat) -> Self {
        let (a, b, c, _) = split(x);
        Blocks { a, b: crate::linalg::sym(&b), c: crate::linalg::sym(&c) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlocksJet {
    pub a: MatJet,
    pub b: MatJet,
    pub c: MatJet,
}

impl BlocksJet {
    pub fn order(&self) -> usize {
        self.a.order().min(self.b.order()).min(self.c.order())
    }

    pub fn value(&self) -> Blocks {
        Blocks { a: self.a.0[0].clone(), b: self.b.0[0].clone(), c: self.c.0[0].clone() }
    }

    pub fn constant(v: &Blocks, order: usize) -> Self {
        BlocksJet {
            a: MatJet::constant(v.a.clone(), order),
            b: MatJet::constant(v.b.clone(), order),
            c: MatJet::constant(v.c.clone(), order),
        }
    }

    pub fn truncate(&self, order: usize) -> Self {
        BlocksJet { a: self.a.truncate(order), b: self.b.truncate(order), c: self.c.truncate(order) }
    }
}

/// Matrix samples with optional derivative levels, interpolated between nodes.
#[derive(Clone, Debug)]
pub struct SampledMatCurve {
    pub times: Vec<f64>,
    pub jets: Vec<MatJet>,
    stored: usize,
}

impl SampledMatCurve {
    pub fn new(times: Vec<f64>, jets: Vec<MatJet>) -> Result<Self> {
        if times.len() != jets.len() || times.len() < 2 {
            return Err(Error::Invalid("sampled curve needs matching times and values (at least 2)".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("sample times must increase strictly".into()));
        }
        let stored = jets.iter().map(|j| j.order()).min().unwrap_or(0);
        Ok(SampledMatCurve { times, jets, stored })
    }

    pub fn from_values(times: Vec<f64>, values: Vec<Mat>) -> Result<Self> {
        Self::new(times, values.into_iter().map(|m| MatJet::constant(m, 0)).collect())
    }

    pub fn stored_order(&self) -> usize {
        self.stored
    }

    fn node(&self, t: f64) -> Option<usize> {
        let i = bracket(&self.times, t);
        let tol = 1e-12 * (self.times[self.times.len() - 1] - self.times[0]).abs().max(1.0);
        if (self.times[i] - t).abs() <= tol {
            Some(i)
        } else if (self.times[i + 1] - t).abs() <= tol {
            Some(i + 1)
        } else {
            None
        }
    }

    pub fn value(&self, t: f64) -> Mat {
        self.jet(t, 0).0.swap_remove(0)
    }

    /// Jet at `t`. Stored levels are used at nodes and interpolated between;
    /// higher orders come from finite differences of the values.
    pub fn jet(&self, t: f64, order: usize) -> MatJet {
        let stored = self.stored_order();
        let node = self.node(t);
        if let (Some(i), true) = (node, order <= stored) {
            return self.jets[i].truncate(order);
        }
        let (r, c) = self.jets[0].shape();
        let mut out = Vec::with_capacity(order + 1);
        let len = self.times.len();
        let i0 = bracket(&self.times, t);
        // interpolation stencil
        let (irange, iw) = {
            let width = 4.min(len);
            let start = if i0 == 0 { 0 } else { (i0 - 1).min(len - width) };
            let range = start..start + width;
            let w = fornberg(t, &self.times[range.clone()], 0).swap_remove(0);
            (range, w)
        };
        for k in 0..=order.min(stored) {
            match node {
                Some(i) => out.push(self.jets[i].0[k].clone()),
                None => {
                    let mut acc = Mat::zeros(r, c);
                    for (w, i) in iw.iter().zip(irange.clone()) {
                        acc += &self.jets[i].0[k] * *w;
                    }
                    out.push(acc);
                }
            }
        }
        if order > stored {
            let centre = node.unwrap_or(i0);
            let range = stencil_range(centre, len, 5.max(order + 2).min(len));
            let w = fornberg(t, &self.times[range.clone()], order);
            let mut fact = 1.0;
            for k in 1..=order {
                fact *= k as f64;
                if k <= stored {
                    continue;
                }
                let mut acc = Mat::zeros(r, c);
                for (j, i) in range.clone().enumerate() {
                    acc += &self.jets[i].0[0] * w[k][j];
                }
                out.push(acc / fact);
            }
        }
        MatJet(out)
    }
}

pub type BlocksFn = dyn Fn(f64, usize) -> BlocksJet + Send + Sync;

/// Coefficient source of a system.
#[derive(Clone)]
pub enum Coeff {
    /// Closure returning exact jets of `(A, B, C)`.
    Analytic(Arc<BlocksFn>),
    /// Samples interpolated between nodes.
    Sampled { a: SampledMatCurve, b: SampledMatCurve, c: SampledMatCurve },
}

impl std::fmt::Debug for Coeff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coeff::Analytic(_) => write!(f, "Coeff::Analytic"),
            Coeff::Sampled { a, .. } => write!(f, "Coeff::Sampled({} nodes)", a.times.len()),
        }
    }
}

impl Coeff {
    pub fn jet(&self, t: f64, order: usize) -> BlocksJet {
        match self {
            Coeff::Analytic(f) => f(t, order).truncate(order),
            Coeff::Sampled { a, b, c } => BlocksJet { a: a.jet(t, order), b: b.jet(t, order), c: c.jet(t, order) },
        }
    }

    pub fn blocks(&self, t: f64) -> Blocks {
        self.jet(t, 0).value()
    }
}

/// Built-in analytic systems addressable from files.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AnalyticId {
    pub id: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

impl AnalyticId {
    /// Coefficients of the named system: `flat` (`B = I`) or `oscillator`
    /// (`B = I`, `C = -ω² I`, parameter `omega`, default 1).
    pub fn coeff(&self, n: usize) -> Result<Coeff> {
        let eye = Mat::identity(n, n);
        let zero = Mat::zeros(n, n);
        let c = match self.id.as_str() {
            "flat" => zero.clone(),
            "oscillator" => {
                let w = self.params.get("omega").copied().unwrap_or(1.0);
                -&eye * (w * w)
            }
            other => return Err(Error::Invalid(format!("unknown analytic system id {other:?}"))),
        };
        let v = Blocks { a: zero, b: eye, c };
        Ok(Coeff::Analytic(Arc::new(move |_t, order| BlocksJet::constant(&v, order))))
    }
}

/// A symplectic differential system on a grid.
#[derive(Clone, Debug)]
pub struct SympDiffSystem {
    pub n: usize,
    pub grid: Grid,
    pub coeff: Coeff,
    pub id: Option<AnalyticId>,
}

impl SympDiffSystem {
    pub fn analytic(n: usize, grid: Grid, f: impl Fn(f64, usize) -> BlocksJet + Send + Sync + 'static) -> Self {
        SympDiffSystem { n, grid, coeff: Coeff::Analytic(Arc::new(f)), id: None }
    }

    /// Analytic system with constant blocks.
    pub fn constant(grid: Grid, v: Blocks) -> Self {
        let n = v.n();
        Self::analytic(n, grid, move |_t, order| BlocksJet::constant(&v, order))
    }

    pub fn from_id(n: usize, grid: Grid, id: AnalyticId) -> Result<Self> {
        let coeff = id.coeff(n)?;
        Ok(SympDiffSystem { n, grid, coeff, id: Some(id) })
    }

    /// System sampled at the given times (which should contain the RK4 stage nodes).
    pub fn sampled(grid: Grid, times: Vec<f64>, values: Vec<Blocks>) -> Result<Self> {
        let n = values.first().map(|v| v.n()).ok_or_else(|| Error::Invalid("no samples".into()))?;
        if values.iter().any(|v| v.n() != n || v.b.shape() != (n, n) || v.c.shape() != (n, n)) {
            return Err(Error::Dimension("samples have inconsistent sizes".into()));
        }
        let a = SampledMatCurve::from_values(times.clone(), values.iter().map(|v| v.a.clone()).collect())?;
        let b = SampledMatCurve::from_values(times.clone(), values.iter().map(|v| v.b.clone()).collect())?;
        let c = SampledMatCurve::from_values(times, values.into_iter().map(|v| v.c).collect())?;
        let sys = SympDiffSystem { n, grid, coeff: Coeff::Sampled { a, b, c }, id: None };
        sys.validate()?;
        Ok(sys)
    }

    pub fn sampled_jets(grid: Grid, times: Vec<f64>, jets: Vec<BlocksJet>) -> Result<Self> {
        let n = jets.first().map(|v| v.a.shape().0).ok_or_else(|| Error::Invalid("no samples".into()))?;
        let a = SampledMatCurve::new(times.clone(), jets.iter().map(|v| v.a.clone()).collect())?;
        let b = SampledMatCurve::new(times.clone(), jets.iter().map(|v| v.b.clone()).collect())?;
        let c = SampledMatCurve::new(times, jets.into_iter().map(|v| v.c).collect())?;
        Ok(SympDiffSystem { n, grid, coeff: Coeff::Sampled { a, b, c }, id: None })
    }

    pub fn blocks(&self, t: f64) -> Blocks {
        self.coeff.blocks(t)
    }

    pub fn jet(&self, t: f64, order: usize) -> BlocksJet {
        self.coeff.jet(t, order)
    }

    pub fn x(&self, t: f64) -> Mat {
        self.blocks(t).x()
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.coeff, Coeff::Sampled { .. })
    }

    /// Check the algebra invariants (`B`, `C` symmetric) on the report grid.
    pub fn validate(&self) -> Result<()> {
        for k in 0..=self.grid.n {
            let t = self.grid.t(k);
            let v = self.blocks(t);
            let scale = 1.0 + max_abs(&v.b).max(max_abs(&v.c));
            let asym = max_abs(&(&v.b - v.b.transpose())).max(max_abs(&(&v.c - v.c.transpose())));
            if asym > 1e-12 * scale || !v.a.iter().chain(v.b.iter()).chain(v.c.iter()).all(|x| x.is_finite()) {
                return Err(Error::Invalid(format!("coefficients leave sp(2n) at t = {t}")));
            }
        }
        Ok(())
    }

    /// Inertia of `B(t)`, required nondegenerate and constant over the grid.
    pub fn b_inertia(&self) -> Result<Inertia> {
        let mut first: Option<Inertia> = None;
        for k in 0..=self.grid.n {
            let t = self.grid.t(k);
            let i = inertia(&SymmetricForm::new(self.blocks(t).b), DEFAULT_ZERO_TOL);
            if !i.is_nondegenerate() {
                return Err(Error::Degenerate(format!("B(t) is degenerate at t = {t}")));
            }
            match first {
                None => first = Some(i),
                Some(f) if f != i => return Err(Error::Degenerate(format!("inertia of B(t) changes at t = {t}"))),
                _ => {}
            }
        }
        Ok(first.expect("grid is nonempty"))
    }

    /// Sample the coefficients at every RK4 stage node.
    pub fn sample_stage_nodes(&self) -> Result<SympDiffSystem> {
        let times = self.grid.stage_nodes();
        let values = times.iter().map(|&t| self.blocks(t)).collect();
        SympDiffSystem::sampled(self.grid.clone(), times, values)
    }
}

pub type MatFn = dyn Fn(f64, usize) -> MatJet + Send + Sync;

/// Matrix curve, analytic or sampled.
#[derive(Clone)]
pub enum MatCurve {
    Analytic(Arc<MatFn>),
    Sampled(SampledMatCurve),
}

impl std::fmt::Debug for MatCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MatCurve::Analytic(_) => write!(f, "MatCurve::Analytic"),
            MatCurve::Sampled(s) => write!(f, "MatCurve::Sampled({} nodes)", s.times.len()),
        }
    }
}

impl MatCurve {
    pub fn constant(m: Mat) -> Self {
        MatCurve::Analytic(Arc::new(move |_t, order| MatJet::constant(m.clone(), order)))
    }

    pub fn jet(&self, t: f64, order: usize) -> MatJet {
        match self {
            MatCurve::Analytic(f) => f(t, order).truncate(order),
            MatCurve::Sampled(s) => s.jet(t, order),
        }
    }

    pub fn value(&self, t: f64) -> Mat {
        self.jet(t, 0).0.swap_remove(0)
    }
}

/// `v″ = R(t) v` with `g R(t)` symmetric for a constant nondegenerate `g`.
#[derive(Clone, Debug)]
pub struct MorseSturm {
    pub g: SymmetricForm,
    pub r: MatCurve,
    pub grid: Grid,
}

impl MorseSturm {
    pub fn new(g: SymmetricForm, r: MatCurve, grid: Grid) -> Result<Self> {
        let ms = MorseSturm { g, r, grid };
        ms.validate()?;
        Ok(ms)
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    pub fn validate(&self) -> Result<()> {
        if !inertia(&self.g, DEFAULT_ZERO_TOL).is_nondegenerate() {
            return Err(Error::Degenerate("Morse–Sturm metric g".into()));
        }
        for k in 0..=self.grid.n {
            let t = self.grid.t(k);
            let gr = self.g.matrix() * self.r.value(t);
            let asym = max_abs(&(&gr - gr.transpose()));
            if asym > 1e-9 * (1.0 + max_abs(&gr)) {
                return Err(Error::Invalid(format!("g R(t) is not symmetric at t = {t} ({asym:.2e})")));
            }
        }
        Ok(())
    }

    /// As a symplectic system: `A = 0`, `B = g⁻¹`, `C = g R`.
    pub fn to_system(&self) -> Result<SympDiffSystem> {
        let n = self.n();
        let g = self.g.matrix().clone();
        let binv = crate::linalg::sym(&inverse(&g, "Morse–Sturm metric")?);
        let blocks_at = {
            let g = g.clone();
            let binv = binv.clone();
            move |r: &MatJet| BlocksJet {
                a: MatJet::constant(Mat::zeros(n, n), r.order()),
                b: MatJet::constant(binv.clone(), r.order()),
                c: r.lmul(&g).sym(),
            }
        };
        match &self.r {
            MatCurve::Analytic(f) => {
                let f = f.clone();
                Ok(SympDiffSystem::analytic(n, self.grid.clone(), move |t, order| blocks_at(&f(t, order))))
            }
            MatCurve::Sampled(s) => {
                let jets = s.jets.iter().map(&blocks_at).collect();
                SympDiffSystem::sampled_jets(self.grid.clone(), s.times.clone(), jets)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sampled_curve_interpolates_and_differentiates() {
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.025).collect();
        let vals: Vec<Mat> = times.iter().map(|&t| Mat::from_element(1, 1, (2.0 * t).sin())).collect();
        let s = SampledMatCurve::from_values(times, vals).unwrap();
        let j = s.jet(0.5, 2);
        assert_relative_eq!(j.0[0][(0, 0)], 1.0_f64.sin(), epsilon = 1e-14);
        assert_relative_eq!(j.deriv(1)[(0, 0)], 2.0 * 1.0_f64.cos(), epsilon = 1e-5);
        let off = s.jet(0.5123, 1);
        // cubic interpolation remainder: |Π(t − tᵢ)| · max|f⁗| / 4!
        let w: f64 = [0.475, 0.5, 0.525, 0.55].iter().map(|ti| 0.5123 - ti).product();
        let bound = w.abs() * 16.0 / 24.0;
        assert!((off.0[0][(0, 0)] - 1.0246_f64.sin()).abs() <= bound);
        assert_relative_eq!(off.deriv(1)[(0, 0)], 2.0 * (1.0246_f64).cos(), epsilon = 1e-5);
    }

    #[test]
    fn morse_sturm_as_system() {
        let grid = Grid::new(0.0, 1.0, 8).unwrap();
        let ms = MorseSturm::new(SymmetricForm::diag(&[2.0]), MatCurve::constant(Mat::from_element(1, 1, -3.0)), grid)
            .unwrap();
        let sys = ms.to_system().unwrap();
        let v = sys.blocks(0.3);
        assert_relative_eq!(v.b[(0, 0)], 0.5);
        assert_relative_eq!(v.c[(0, 0)], -6.0);
        assert_eq!(v.a[(0, 0)], 0.0);
    }

    #[test]
    fn asymmetric_samples_rejected() {
        let grid = Grid::new(0.0, 1.0, 1).unwrap();
        let bad = Blocks {
            a: Mat::zeros(2, 2),
            b: Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
            c: Mat::zeros(2, 2),
        };
        assert!(SympDiffSystem::sampled(grid, vec![0.0, 1.0], vec![bad.clone(), bad]).is_err());
    }
}
