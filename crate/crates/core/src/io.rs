//! JSON files for systems, abstract systems and metrics, and the CSV trace.
//!
//! Matrices inside sample arrays are flattened column-major; small fixed
//! matrices (`g`) are written as arrays of rows.

use crate::abstract_sys::AbstractSystem;
use crate::geometry::{Causal, ConformalMetric, SignCalibration};
use crate::sds::{AnalyticId, Blocks, Coeff, ConjugateReport, MatCurve, MorseSturm, Reduction, SampledMatCurve, SympDiffSystem};
use crate::{Error, Grid, Mat, Result, SymmetricForm};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub fn flatten(m: &Mat) -> Vec<f64> {
    m.as_slice().to_vec()
}

pub fn unflatten(v: &[f64], rows: usize, cols: usize) -> Result<Mat> {
    if v.len() != rows * cols {
        return Err(Error::Dimension(format!("expected {} entries for a {rows}×{cols} matrix, got {}", rows * cols, v.len())));
    }
    Ok(Mat::from_column_slice(rows, cols, v))
}

pub fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if rows.iter().any(|x| x.len() != c) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSamples {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoeffFile {
    AnalyticId {
        id: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        params: BTreeMap<String, f64>,
    },
    Sampled {
        times: Vec<f64>,
        samples: BlockSamples,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "grid_N")]
    pub grid_n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refine: Vec<u32>,
    pub coeff: CoeffFile,
}

impl SystemFile {
    /// Named systems keep their id; everything else is written as samples at
    /// the integrator's stage nodes, so reading the file back reproduces the
    /// integration exactly.
    pub fn from_system(sys: &SympDiffSystem) -> Self {
        let coeff = match (&sys.id, &sys.coeff) {
            (Some(id), _) => CoeffFile::AnalyticId { id: id.id.clone(), params: id.params.clone() },
            (None, Coeff::Sampled { a, b, c }) if a.times == sys.grid.stage_nodes() => CoeffFile::Sampled {
                times: a.times.clone(),
                samples: BlockSamples {
                    a: a.jets.iter().map(|j| flatten(&j.0[0])).collect(),
                    b: b.jets.iter().map(|j| flatten(&j.0[0])).collect(),
                    c: c.jets.iter().map(|j| flatten(&j.0[0])).collect(),
                },
            },
            (None, _) => {
                let times = sys.grid.stage_nodes();
                let vals: Vec<Blocks> = times.iter().map(|&t| sys.blocks(t)).collect();
                CoeffFile::Sampled {
                    samples: BlockSamples {
                        a: vals.iter().map(|v| flatten(&v.a)).collect(),
                        b: vals.iter().map(|v| flatten(&v.b)).collect(),
                        c: vals.iter().map(|v| flatten(&v.c)).collect(),
                    },
                    times,
                }
            }
        };
        SystemFile { n: sys.n, a: sys.grid.a, b: sys.grid.b, grid_n: sys.grid.n, refine: sys.grid.refine.clone(), coeff }
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = Grid::new(self.a, self.b, self.grid_n)?;
        if self.refine.is_empty() {
            Ok(g)
        } else {
            g.with_refine(self.refine.clone())
        }
    }

    pub fn to_system(&self) -> Result<SympDiffSystem> {
        let n = self.n;
        if n == 0 {
            return Err(Error::Invalid("n must be positive".into()));
        }
        let grid = self.grid()?;
        let sys = match &self.coeff {
            CoeffFile::AnalyticId { id, params } => {
                SympDiffSystem::from_id(n, grid, AnalyticId { id: id.clone(), params: params.clone() })?
            }
            CoeffFile::Sampled { times, samples } => {
                let len = times.len();
                if samples.a.len() != len || samples.b.len() != len || samples.c.len() != len {
                    return Err(Error::Dimension("sample arrays and times differ in length".into()));
                }
                let mut vals = Vec::with_capacity(len);
                for k in 0..len {
                    vals.push(Blocks {
                        a: unflatten(&samples.a[k], n, n)?,
                        b: unflatten(&samples.b[k], n, n)?,
                        c: unflatten(&samples.c[k], n, n)?,
                    });
                }
                if times.first().is_some_and(|&t| t > grid.a) || times.last().is_some_and(|&t| t < grid.b) {
                    return Err(Error::Invalid("samples do not cover [a, b]".into()));
                }
                SympDiffSystem::sampled(grid, times.clone(), vals)?
            }
        };
        sys.validate()?;
        Ok(sys)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbstractFile {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "grid_N")]
    pub grid_n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refine: Vec<u32>,
    pub times: Vec<f64>,
    /// `2n × n` frames, column-major.
    pub frames: Vec<Vec<f64>>,
    #[serde(default)]
    pub note: String,
}

impl AbstractFile {
    pub fn from_abstract(s: &AbstractSystem) -> Self {
        AbstractFile {
            n: s.n,
            a: s.grid.a,
            b: s.grid.b,
            grid_n: s.grid.n,
            refine: s.grid.refine.clone(),
            times: s.times.clone(),
            frames: s.frames.iter().map(flatten).collect(),
            note: s.note.clone(),
        }
    }

    pub fn to_abstract(&self) -> Result<AbstractSystem> {
        let mut grid = Grid::new(self.a, self.b, self.grid_n)?;
        if !self.refine.is_empty() {
            grid = grid.with_refine(self.refine.clone())?;
        }
        let frames = self.frames.iter().map(|f| unflatten(f, 2 * self.n, self.n)).collect::<Result<Vec<_>>>()?;
        AbstractSystem::new(grid, self.times.clone(), frames, self.note.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RCurveFile {
    pub times: Vec<f64>,
    /// `n × n` values of `R`, column-major.
    pub values: Vec<Vec<f64>>,
    pub grid: Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricFile {
    pub n: usize,
    pub g: Vec<Vec<f64>>,
    pub causal: Causal,
    #[serde(rename = "Rcurve")]
    pub r_curve: RCurveFile,
    pub sign_calibration: SignCalibration,
}

fn sampled_r(r: &MatCurve, grid: &Grid) -> (Vec<f64>, Vec<Mat>) {
    match r {
        MatCurve::Sampled(s) => (s.times.clone(), s.jets.iter().map(|j| j.0[0].clone()).collect()),
        MatCurve::Analytic(_) => {
            let times = grid.stage_nodes();
            let vals = times.iter().map(|&t| r.value(t)).collect();
            (times, vals)
        }
    }
}

impl MetricFile {
    pub fn from_metric(m: &ConformalMetric) -> Self {
        let (times, vals) = sampled_r(&m.r, &m.grid);
        MetricFile {
            n: m.n(),
            g: rows_of(m.g.matrix()),
            causal: m.causal,
            r_curve: RCurveFile { times, values: vals.iter().map(flatten).collect(), grid: m.grid.clone() },
            sign_calibration: m.signs,
        }
    }

    pub fn to_morse_sturm(&self) -> Result<MorseSturm> {
        let g = from_rows(&self.g)?;
        if g.shape() != (self.n, self.n) {
            return Err(Error::Dimension(format!("g must be {0}×{0}", self.n)));
        }
        let vals = self.r_curve.values.iter().map(|v| unflatten(v, self.n, self.n)).collect::<Result<Vec<_>>>()?;
        let r = MatCurve::Sampled(SampledMatCurve::from_values(self.r_curve.times.clone(), vals)?);
        MorseSturm::new(SymmetricForm::try_new(g)?, r, self.r_curve.grid.clone())
    }

    pub fn to_metric(&self) -> Result<ConformalMetric> {
        let ms = self.to_morse_sturm()?;
        let m = crate::geometry::metric_from_morse_sturm(&ms, self.causal)?;
        if self.sign_calibration != m.signs {
            return Err(Error::Invalid(format!(
                "sign calibration {:?} does not match the {:?} convention {:?}",
                self.sign_calibration, self.causal, m.signs
            )));
        }
        Ok(m)
    }
}

/// Output of the reduction: the Morse–Sturm system and its residuals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionFile {
    pub g: Vec<Vec<f64>>,
    /// `A = 0`, `B = g⁻¹`, `C = gR` on the input grid.
    pub system: SystemFile,
    pub a_residual: f64,
    pub a_residual_fd: f64,
    pub b_defect: f64,
    pub lie_residual: f64,
}

impl ReductionFile {
    pub fn from_reduction(r: &Reduction) -> Result<Self> {
        let sys = r.morse_sturm.to_system()?;
        Ok(ReductionFile {
            g: rows_of(r.morse_sturm.g.matrix()),
            system: SystemFile::from_system(&sys),
            a_residual: r.a_residual,
            a_residual_fd: r.a_residual_fd,
            b_defect: r.b_defect,
            lie_residual: r.lie_residual,
        })
    }
}

/// A system with `A ≡ 0` and constant `B` read as `v″ = g⁻¹C v`, `g = B⁻¹`.
pub fn as_morse_sturm(sys: &SympDiffSystem) -> Option<MorseSturm> {
    let b0 = sys.blocks(sys.grid.a).b;
    let tol = 1e-12 * (1.0 + crate::linalg::max_abs(&b0));
    let times = sys.grid.stage_nodes();
    for &t in &times {
        let v = sys.blocks(t);
        if crate::linalg::max_abs(&v.a) > tol || crate::linalg::max_abs(&(&v.b - &b0)) > tol {
            return None;
        }
    }
    let g = crate::linalg::sym(&b0.clone().try_inverse()?);
    let vals: Vec<Mat> = times.iter().map(|&t| &b0 * sys.blocks(t).c).collect();
    let r = MatCurve::Sampled(SampledMatCurve::from_values(times, vals).ok()?);
    MorseSturm::new(SymmetricForm::new(g), r, sys.grid.clone()).ok()
}

/// `t,d(t)` rows on the report grid, `d` unnormalized.
pub fn trace_csv(report: &ConjugateReport) -> String {
    let mut out = String::from("t,d\n");
    for (t, d) in report.times().iter().zip(&report.d_trace) {
        out.push_str(&format!("{t},{}\n", d * report.meta.d_scale));
    }
    out
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    std::fs::write(path, to_json(v)? + "\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
