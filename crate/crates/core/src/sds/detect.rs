use super::integrate::{fundamental_matrix, phi_at, Fundamental, IntegrateOptions};
use super::system::SympDiffSystem;
use crate::linalg::{bottom, null_space, singular_values, spectral_norm, sym_eigen, top};
use crate::symform::{inertia_of_eigenvalues, Inertia};
use crate::{Error, Mat, Result};
use serde::{Deserialize, Serialize};

/// Orientation convention for crossing signatures, recorded in every report.
pub const SIGNATURE_CONVENTION: &str =
    "signature of the restriction of xi'(t) (the push-forward of -B(t)) to xi(t) ∩ xi(a); \
     the harmonic oscillator v'' = -v crosses at pi with signature -1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectOptions {
    /// Threshold on `|d(t)| / max_grid |d|`.
    pub zero_tol: f64,
    pub rank_tol: f64,
    /// Bisection tolerance for instant locations.
    pub t_tol: f64,
    /// Relative threshold for zero eigenvalues of the crossing form.
    pub crossing_tol: f64,
    /// Exclusion radius in grid steps (`ε_a = steps · (b − a)/N`).
    pub exclusion_steps: f64,
    pub integrate: IntegrateOptions,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            zero_tol: 1e-7,
            rank_tol: 1e-8,
            t_tol: 1e-10,
            crossing_tol: 1e-6,
            exclusion_steps: 5.0,
            integrate: IntegrateOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Signature {
    Value(i64),
    Unavailable,
}

impl Serialize for Signature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Signature::Value(v) => s.serialize_i64(*v),
            Signature::Unavailable => s.serialize_str("unavailable"),
        }
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Number(n) => n
                .as_i64()
                .map(Signature::Value)
                .ok_or_else(|| serde::de::Error::custom("signature must be an integer")),
            serde_json::Value::String(s) if s == "unavailable" => Ok(Signature::Unavailable),
            other => Err(serde::de::Error::custom(format!("bad signature {other}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstantKind {
    /// `d` changes sign; located by bisection.
    SignChange,
    /// `d` dips below the threshold without changing sign.
    Touching,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instant {
    pub t: f64,
    pub multiplicity: usize,
    pub signature: Signature,
    pub kind: InstantKind,
    /// The crossing form restricted to the intersection is degenerate.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub lo: f64,
    pub hi: f64,
    pub max_multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub a: f64,
    pub b: f64,
    pub grid_n: usize,
    pub zero_tol: f64,
    pub rank_tol: f64,
    pub t_tol: f64,
    pub crossing_tol: f64,
    pub exclusion_radius: f64,
    /// `max_grid |d|`, the normalization of `d_trace`.
    pub d_scale: f64,
    pub max_drift: f64,
    pub signature_convention: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugateReport {
    pub instants: Vec<Instant>,
    pub clusters: Vec<Cluster>,
    /// Normalized `d(t_k)` on the report grid.
    pub d_trace: Vec<f64>,
    pub meta: ReportMeta,
}

impl ConjugateReport {
    pub fn times(&self) -> Vec<f64> {
        let lo = self.meta.a;
        let h = (self.meta.b - lo) / self.meta.grid_n as f64;
        (0..=self.meta.grid_n).map(|k| if k == self.meta.grid_n { self.meta.b } else { lo + k as f64 * h }).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.instants.is_empty() && self.clusters.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossingData {
    pub multiplicity: usize,
    pub signature: i64,
    pub inertia: Inertia,
}

impl CrossingData {
    pub fn degenerate(&self) -> bool {
        self.inertia.n_zero > 0
    }
}

fn d_of(phi: &Mat) -> f64 {
    let n = phi.nrows() / 2;
    phi.view((0, n), (n, n)).into_owned().determinant()
}

fn upper_block(phi: &Mat) -> Mat {
    let n = phi.nrows() / 2;
    phi.view((0, n), (n, n)).into_owned()
}

/// Rank deficiency of the upper block of `Φ[0; I]`, relative to the top rows of `Φ`.
fn multiplicity_of(phi: &Mat, rank_tol: f64) -> usize {
    let n = phi.nrows() / 2;
    let scale = spectral_norm(&top(phi));
    let s = singular_values(&upper_block(phi));
    n - s.iter().filter(|&&x| x > rank_tol * scale).count()
}

struct Scan<'a> {
    sys: &'a SympDiffSystem,
    fund: &'a Fundamental,
    scale: f64,
    opts: &'a DetectOptions,
}

impl Scan<'_> {
    fn dn(&self, t: f64) -> f64 {
        d_of(&phi_at(self.sys, self.fund, t)) / self.scale
    }

    /// Root of `g` in `[lo, hi]` given `g(lo)` and `g(hi)` of opposite signs.
    fn bisect(&self, g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut glo: f64) -> f64 {
        while hi - lo > self.opts.t_tol {
            let mid = 0.5 * (lo + hi);
            let gm = g(mid);
            if gm == 0.0 {
                return mid;
            }
            if (gm > 0.0) == (glo > 0.0) {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Where `|d|` crosses the zero threshold between `lo` (outside) and `hi` (inside).
    fn threshold_crossing(&self, lo: f64, hi: f64) -> f64 {
        let tol = self.opts.zero_tol;
        let g = |t: f64| self.dn(t).abs() - tol;
        let glo = g(lo);
        if glo <= 0.0 || g(hi) > 0.0 {
            return if glo <= 0.0 { lo } else { hi };
        }
        self.bisect(g, lo, hi, glo)
    }
}

/// Conjugate instants with default options.
pub fn conjugate_instants(sys: &SympDiffSystem) -> Result<ConjugateReport> {
    conjugate_instants_with(sys, &DetectOptions::default())
}

/// Scan `d(t) = det(upper block of Φ(t)[0; I])` on the report grid.
pub fn conjugate_instants_with(sys: &SympDiffSystem, opts: &DetectOptions) -> Result<ConjugateReport> {
    let fund = fundamental_matrix(sys, &opts.integrate)?;
    report_from_fundamental(sys, &fund, opts)
}

pub(crate) fn report_from_fundamental(
    sys: &SympDiffSystem,
    fund: &Fundamental,
    opts: &DetectOptions,
) -> Result<ConjugateReport> {
    let grid = &sys.grid;
    let h = grid.h();
    let raw: Vec<f64> = (0..=grid.n).map(|k| d_of(fund.at_grid(k))).collect();
    let scale = raw.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let dn: Vec<f64> = raw.iter().map(|x| if scale > 0.0 { x / scale } else { 0.0 }).collect();
    let scan = Scan { sys, fund, scale: if scale > 0.0 { scale } else { 1.0 }, opts };
    let eps_a = opts.exclusion_steps * h;
    let k0 = ((eps_a / h) * (1.0 + 1e-12)).floor() as usize + 1;
    let zero = |k: usize| dn[k].abs() < opts.zero_tol;

    let mut instants = Vec::new();
    let mut clusters = Vec::new();
    let mut k = k0.min(grid.n + 1);
    while k <= grid.n {
        if !zero(k) {
            // plain sign change between consecutive nonzero samples
            if k < grid.n && !zero(k + 1) && (dn[k] > 0.0) != (dn[k + 1] > 0.0) {
                let t = scan.bisect(|t| scan.dn(t), grid.t(k), grid.t(k + 1), dn[k]);
                instants.push(make_instant(sys, fund, t, InstantKind::SignChange, opts));
            }
            k += 1;
            continue;
        }
        let i = k;
        let mut j = k;
        while j < grid.n && zero(j + 1) {
            j += 1;
        }
        k = j + 1;
        let left = (i > k0).then(|| i - 1);
        let right = (j < grid.n).then_some(j + 1);
        let sign_change = match (left, right) {
            (Some(l), Some(r)) => (dn[l] > 0.0) != (dn[r] > 0.0),
            _ => false,
        };
        if j - i <= 2 {
            let t = match (left, right) {
                (Some(l), Some(r)) if sign_change => scan.bisect(|t| scan.dn(t), grid.t(l), grid.t(r), dn[l]),
                (Some(l), Some(r)) => {
                    let lo = scan.threshold_crossing(grid.t(l), grid.t(i));
                    let hi = scan.threshold_crossing(grid.t(r), grid.t(j));
                    0.5 * (lo + hi)
                }
                _ => {
                    let best = (i..=j).min_by(|&p, &q| dn[p].abs().partial_cmp(&dn[q].abs()).unwrap()).unwrap();
                    grid.t(best)
                }
            };
            let kind = if sign_change { InstantKind::SignChange } else { InstantKind::Touching };
            instants.push(make_instant(sys, fund, t, kind, opts));
        } else {
            let lo = match left {
                Some(l) => scan.threshold_crossing(grid.t(l), grid.t(i)),
                None => grid.t(i),
            };
            let hi = match right {
                Some(r) => scan.threshold_crossing(grid.t(r), grid.t(j)),
                None => grid.t(j),
            };
            let max_multiplicity = (i..=j).map(|p| multiplicity_of(fund.at_grid(p), opts.rank_tol)).max().unwrap_or(0);
            clusters.push(Cluster { lo, hi, max_multiplicity });
        }
    }
    instants.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    Ok(ConjugateReport {
        instants,
        clusters,
        d_trace: dn,
        meta: ReportMeta {
            a: grid.a,
            b: grid.b,
            grid_n: grid.n,
            zero_tol: opts.zero_tol,
            rank_tol: opts.rank_tol,
            t_tol: opts.t_tol,
            crossing_tol: opts.crossing_tol,
            exclusion_radius: eps_a,
            d_scale: scale,
            max_drift: fund.max_drift,
            signature_convention: SIGNATURE_CONVENTION.to_string(),
        },
    })
}

fn make_instant(sys: &SympDiffSystem, fund: &Fundamental, t: f64, kind: InstantKind, opts: &DetectOptions) -> Instant {
    let phi = phi_at(sys, fund, t);
    match crossing_from_phi(sys, &phi, t, opts) {
        Ok(c) => Instant {
            t,
            multiplicity: c.multiplicity,
            signature: Signature::Value(c.signature),
            kind,
            degenerate: c.degenerate(),
        },
        Err(_) => Instant {
            t,
            multiplicity: multiplicity_of(&phi, opts.rank_tol).max(1),
            signature: Signature::Unavailable,
            kind,
            degenerate: true,
        },
    }
}

fn crossing_from_phi(sys: &SympDiffSystem, phi: &Mat, t: f64, opts: &DetectOptions) -> Result<CrossingData> {
    let scale = spectral_norm(&top(phi));
    let kernel = null_space(&upper_block(phi), opts.rank_tol, scale);
    let m = kernel.ncols();
    if m == 0 {
        return Err(Error::NotConjugate(format!("t = {t}")));
    }
    // (0, α) = Φ(t)(0, β) for β in the kernel, α = Φ₂₂ β
    let n = sys.n;
    let lower = bottom(phi).columns(n, n).into_owned();
    let alpha = lower * kernel;
    let b = sys.blocks(t).b;
    let q = -(alpha.transpose() * &b * &alpha);
    let (ev, _) = sym_eigen(&q);
    let band = opts.crossing_tol * spectral_norm(&b).max(f64::MIN_POSITIVE) * spectral_norm(&alpha).powi(2);
    let inertia = if band > 0.0 {
        let mut i = Inertia { n_plus: 0, n_minus: 0, n_zero: 0 };
        for l in ev {
            if l.abs() <= band {
                i.n_zero += 1;
            } else if l > 0.0 {
                i.n_plus += 1;
            } else {
                i.n_minus += 1;
            }
        }
        i
    } else {
        inertia_of_eigenvalues(&ev, 0.0)
    };
    Ok(CrossingData { multiplicity: m, signature: inertia.signature(), inertia })
}

/// Multiplicity and signature of the crossing at a conjugate instant `t`.
pub fn crossing_data(sys: &SympDiffSystem, t: f64, opts: &DetectOptions) -> Result<CrossingData> {
    if !(t > sys.grid.a && t <= sys.grid.b) {
        return Err(Error::Invalid(format!("t = {t} outside ]a, b]")));
    }
    let fund = fundamental_matrix(sys, &opts.integrate)?;
    let phi = phi_at(sys, &fund, t);
    crossing_from_phi(sys, &phi, t, opts)
}

/// Sum of crossing signatures, defined only for isolated nondegenerate crossings.
pub fn maslov_regular(sys: &SympDiffSystem, opts: &DetectOptions) -> Result<i64> {
    let report = conjugate_instants_with(sys, opts)?;
    if !report.clusters.is_empty() {
        return Err(Error::Unavailable("conjugate instants accumulate in clusters".into()));
    }
    let mut total = 0;
    for inst in &report.instants {
        match inst.signature {
            Signature::Value(s) if !inst.degenerate => total += s,
            _ => return Err(Error::Unavailable(format!("degenerate crossing at t = {}", inst.t))),
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::sds::system::Blocks;

    fn ms1(r: f64, b: f64) -> SympDiffSystem {
        SympDiffSystem::constant(
            Grid::new(0.0, b, 4096).unwrap(),
            Blocks { a: Mat::zeros(1, 1), b: Mat::identity(1, 1), c: Mat::from_element(1, 1, r) },
        )
    }

    #[test]
    fn flat_has_no_instants() {
        let r = conjugate_instants(&ms1(0.0, 1.0)).unwrap();
        assert!(r.is_empty());
        assert_eq!(maslov_regular(&ms1(0.0, 1.0), &DetectOptions::default()).unwrap(), 0);
    }

    #[test]
    fn oscillator_instant_at_pi() {
        let r = conjugate_instants(&ms1(-1.0, 3.5)).unwrap();
        assert_eq!(r.instants.len(), 1);
        assert!(r.clusters.is_empty());
        let i = &r.instants[0];
        assert!((i.t - std::f64::consts::PI).abs() < 1e-6);
        assert_eq!(i.multiplicity, 1);
        assert_eq!(i.signature, Signature::Value(-1));
        assert_eq!(i.kind, InstantKind::SignChange);
        let c = crossing_data(&ms1(-1.0, 3.5), std::f64::consts::PI, &DetectOptions::default()).unwrap();
        assert_eq!((c.multiplicity, c.signature), (1, -1));
        assert_eq!(maslov_regular(&ms1(-1.0, 3.5), &DetectOptions::default()).unwrap(), -1);
    }

    #[test]
    fn crossing_data_rejects_non_conjugate() {
        let r = crossing_data(&ms1(-1.0, 3.5), 1.0, &DetectOptions::default());
        assert!(matches!(r, Err(Error::NotConjugate(_))));
    }

    #[test]
    fn signature_serializes_as_int_or_string() {
        assert_eq!(serde_json::to_string(&Signature::Value(-1)).unwrap(), "-1");
        assert_eq!(serde_json::to_string(&Signature::Unavailable).unwrap(), "\"unavailable\"");
        let s: Signature = serde_json::from_str("\"unavailable\"").unwrap();
        assert_eq!(s, Signature::Unavailable);
    }
}
