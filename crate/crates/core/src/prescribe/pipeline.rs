use super::extend::{extend_lagrangian, LagrangianExtension};
use super::set::ClosedSetDescriptor;
use super::vanish::{rho_jet, vanishing_function, RadiusCurve, VanishingFunction, VanishingOptions};
use crate::abstract_sys::{abstract_index, blocks_from_frame_jet, realize_system, AbstractIndex, AbstractSystem, FrameCurve};
use crate::error::StageExt;
use crate::jet::MatJet;
use crate::sds::{conjugate_instants_with, morse_sturm_curvature, to_morse_sturm_report, ConjugateReport, DetectOptions, Reduction, SympDiffSystem};
use crate::linalg::spectral_norm;
use crate::{Error, Grid, LagrangianFrame, Mat, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrescribeOptions {
    pub grid_n: usize,
    /// Bump height of `f`.
    pub amplitude: f64,
    /// Bump edge width in report grid steps.
    pub width_steps: f64,
    /// Substeps per interval near the boundary of `F`.
    pub flank_substeps: u32,
    /// Half-width of the densest flank zone, in bump widths.
    pub flank_widths: f64,
    /// Substeps per interval where the curve is extended.
    pub extension_substeps: u32,
    /// Largest rotation of the curve, in radians, allowed across one substep.
    pub step_angle: f64,
    /// Largest `h √‖R‖` per substep, `R` the curvature of the reduced system.
    pub curvature_step: f64,
    /// Cap on substeps per report interval.
    pub max_substeps: u32,
    pub detect: DetectOptions,
}

impl Default for PrescribeOptions {
    fn default() -> Self {
        PrescribeOptions {
            grid_n: 4096,
            amplitude: 0.5,
            width_steps: 15.0,
            flank_substeps: 128,
            flank_widths: 1.0,
            extension_substeps: 32,
            step_angle: 0.02,
            curvature_step: 0.01,
            max_substeps: 256,
            detect: DetectOptions::default(),
        }
    }
}

/// Component-wise comparison of a report with the prescribed set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetComparison {
    /// `(prescribed lo, hi, detected lo, hi)` per matched component.
    pub matched: Vec<(f64, f64, f64, f64)>,
    pub missing: Vec<(f64, f64)>,
    pub spurious: Vec<(f64, f64)>,
    /// Largest edge error over matched components, in grid steps.
    pub max_edge_steps: f64,
    pub tolerance_steps: f64,
    pub pass: bool,
}

/// Match every component of `set` with a detected instant or cluster.
pub fn compare_with_set(report: &ConjugateReport, set: &ClosedSetDescriptor, tolerance_steps: f64) -> SetComparison {
    let h = (report.meta.b - report.meta.a) / report.meta.grid_n as f64;
    let mut detected: Vec<(f64, f64)> = report
        .instants
        .iter()
        .map(|i| (i.t, i.t))
        .chain(report.clusters.iter().map(|c| (c.lo, c.hi)))
        .collect();
    detected.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut used = vec![false; detected.len()];
    let mut matched = Vec::new();
    let mut missing = Vec::new();
    let mut worst = 0.0_f64;
    let reach = (tolerance_steps + 1.0) * h;
    for &(lo, hi) in &set.intervals {
        let hit = detected
            .iter()
            .enumerate()
            .filter(|(k, d)| !used[*k] && d.0 <= hi + reach && d.1 >= lo - reach)
            .min_by(|x, y| {
                let ex = (x.1 .0 - lo).abs().max((x.1 .1 - hi).abs());
                let ey = (y.1 .0 - lo).abs().max((y.1 .1 - hi).abs());
                ex.total_cmp(&ey)
            })
            .map(|(k, _)| k);
        match hit {
            Some(k) => {
                used[k] = true;
                let (dlo, dhi) = detected[k];
                worst = worst.max((dlo - lo).abs().max((dhi - hi).abs()) / h);
                matched.push((lo, hi, dlo, dhi));
            }
            None => missing.push((lo, hi)),
        }
    }
    let spurious: Vec<(f64, f64)> =
        detected.iter().zip(&used).filter(|(_, &u)| !u).map(|(d, _)| *d).collect();
    let pass = missing.is_empty() && spurious.is_empty() && worst <= tolerance_steps;
    SetComparison { matched, missing, spurious, max_edge_steps: worst, tolerance_steps, pass }
}

/// Substeps per report interval: dense near the boundary of `F`, over the extension, and wherever the
/// curve turns faster than `step_angle` per substep, or where the reduced system's curvature
/// would oscillate by more than `curvature_step` per substep.
///
/// Both rates are read off the coefficient jet `X(t₀ + s) ≈ Σ cₖ sᵏ` of the
/// realized system at both ends and the middle of each interval.
pub fn refinement_schedule(
    grid: &Grid,
    set: &ClosedSetDescriptor,
    curve: &FrameCurve,
    extension: (f64, f64),
    width: f64,
    opts: &PrescribeOptions,
) -> Result<Vec<u32>> {
    let edges = set.boundary();
    let reach = opts.flank_widths * width;
    // [‖c₀‖, ‖c₁‖, ‖c₂‖, √‖R‖]
    let rates = |t: f64| -> Result<[f64; 4]> {
        let x = blocks_from_frame_jet(&curve.jet(t, 3))
            .ok_or_else(|| Error::Singular(format!("frame Gram matrix at t = {t}")))?;
        let mut r = [0.0; 4];
        for k in 0..3 {
            r[k] = spectral_norm(&x.a.0[k]) + spectral_norm(&x.b.0[k]) + spectral_norm(&x.c.0[k]);
        }
        let curv = morse_sturm_curvature(&x).ok_or_else(|| Error::Degenerate(format!("B(t) at t = {t}")))?;
        r[3] = spectral_norm(&curv).sqrt();
        Ok(r)
    };
    let turn = |r: &[f64; 4], h: f64| {
        let angle = r[0] * h + r[1] * h * h / 2.0 + r[2] * h * h * h / 3.0;
        angle / opts.step_angle > 1.0 || r[3] * h / opts.curvature_step > 1.0
    };
    let h = grid.h();
    let mut left = rates(grid.a)?;
    let mut out = Vec::with_capacity(grid.n);
    for k in 0..grid.n {
        let (t0, t1) = (grid.t(k), grid.t(k + 1));
        let mid = rates(0.5 * (t0 + t1))?;
        let right = rates(t1)?;
        let mut m = 1;
        while m < opts.max_substeps && [&left, &mid, &right].iter().any(|r| turn(r, h / m as f64)) {
            m *= 2;
        }
        // full density within `reach` of an edge, a quarter as much per further doubling
        let gap = edges.iter().map(|&e| (e - t1).max(t0 - e).max(0.0)).fold(f64::INFINITY, f64::min);
        let mut tier = opts.flank_substeps;
        let mut zone = reach;
        while tier > 1 && gap > zone {
            tier /= 4;
            zone *= 2.0;
        }
        m = m.max(tier.max(1));
        if t1 >= extension.0 && t0 <= extension.1 {
            m = m.max(opts.extension_substeps);
        }
        out.push(m.min(opts.max_substeps));
        left = right;
    }
    Ok(out)
}

/// Every stage of the construction, kept for inspection and output.
#[derive(Clone)]
pub struct Prescribed {
    pub set: ClosedSetDescriptor,
    pub options: PrescribeOptions,
    pub f: VanishingFunction,
    pub c: f64,
    pub extension: LagrangianExtension,
    pub abstract_system: AbstractSystem,
    pub index: AbstractIndex,
    pub system: SympDiffSystem,
    pub reduction: Reduction,
    pub morse_sturm_system: SympDiffSystem,
    pub report: ConjugateReport,
    pub comparison: SetComparison,
}

impl Prescribed {
    /// Abstract index `(true, 1)` and the report agrees with `F`.
    pub fn passed(&self) -> bool {
        self.index.nondegenerate && self.index.index == 1 && self.comparison.pass
    }
}

pub fn build_prescribed(set: &ClosedSetDescriptor) -> Result<Prescribed> {
    build_prescribed_with(set, &PrescribeOptions::default())
}

/// `ρ(t)` graphed over `L₀`: the frame `[ρ(t); I]`.
fn graph_curve(f: &VanishingFunction) -> FrameCurve {
    let r = RadiusCurve(f.clone());
    FrameCurve::new(move |t, order| {
        let rho = rho_jet(&r, t, order);
        MatJet(
            rho.0
                .iter()
                .enumerate()
                .map(|(k, m)| {
                    let lower = if k == 0 { Mat::identity(2, 2) } else { Mat::zeros(2, 2) };
                    crate::linalg::vstack(m, &lower)
                })
                .collect(),
        )
    })
}

pub fn build_prescribed_with(set: &ClosedSetDescriptor, opts: &PrescribeOptions) -> Result<Prescribed> {
    let (a, b) = (set.a, set.b);
    let grid = Grid::new(a, b, opts.grid_n).stage("grid")?;
    let h = grid.h();
    let width = opts.width_steps * h;
    let f = vanishing_function(set, VanishingOptions { amplitude: opts.amplitude, width }).stage("vanishing_function")?;
    let c = match set.inf() {
        Some(lo) => 0.5 * (a + lo),
        None => 0.5 * (a + b),
    };
    let xibar = graph_curve(&f);
    let extension = extend_lagrangian(xibar, &LagrangianFrame::l0(2), a, c, &grid).stage("extend_lagrangian")?;
    let curve = extension.curve();
    let refine = refinement_schedule(&grid, set, &curve, (extension.extension_start(), c), width, opts).stage("refine")?;
    let grid = grid.with_refine(refine).stage("grid")?;
    let abstract_system = AbstractSystem::from_curve(2, grid, curve, "prescribed conjugate set")
        .stage("abstract_system")?;
    let index = abstract_index(&abstract_system).stage("abstract_index")?;
    let system = realize_system(&abstract_system).stage("realize_system")?;
    let reduction = to_morse_sturm_report(&system).stage("to_morse_sturm")?;
    let morse_sturm_system = reduction.morse_sturm.to_system().stage("to_morse_sturm")?;
    let report = conjugate_instants_with(&morse_sturm_system, &opts.detect).stage("conjugate_instants")?;
    let comparison = compare_with_set(&report, set, 2.0);
    if !index.nondegenerate {
        return Err(Error::Degenerate(format!(
            "xi' degenerates or changes index at t = {:?}",
            index.first_failure
        ))
        .at("abstract_index"));
    }
    Ok(Prescribed {
        set: set.clone(),
        options: *opts,
        f,
        c,
        extension,
        abstract_system,
        index,
        system,
        reduction,
        morse_sturm_system,
        report,
        comparison,
    })
}
