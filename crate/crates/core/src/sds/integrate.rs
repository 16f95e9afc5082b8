use super::system::SympDiffSystem;
use crate::grid::Grid;
use crate::linalg::{inverse, j_mul};
use crate::symplectic::{symplectic_drift, symplectic_drift_frobenius};
use crate::{Error, Mat, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrateOptions {
    /// Drift above which one restoration step is applied.
    pub reproject_tol: f64,
    /// Drift that aborts the integration.
    pub ceiling: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { reproject_tol: 1e-10, ceiling: 1e-6 }
    }
}

/// Fundamental matrix sampled at the solution nodes of the grid.
#[derive(Clone, Debug)]
pub struct Fundamental {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub phi: Vec<Mat>,
    /// Largest spectral drift `‖ΦᵀJΦ − J‖` over the report grid.
    pub max_drift: f64,
    pub reprojections: usize,
    grid_idx: Vec<usize>,
}

impl Fundamental {
    /// `Φ(t_k)` at report grid point `k`.
    pub fn at_grid(&self, k: usize) -> &Mat {
        &self.phi[self.grid_idx[k]]
    }

    pub fn grid_indices(&self) -> &[usize] {
        &self.grid_idx
    }
}

fn rk4_step(x0: &Mat, xm: &Mat, x1: &Mat, phi: &Mat, h: f64) -> Mat {
    let k1 = x0 * phi;
    let k2 = xm * (phi + &k1 * (0.5 * h));
    let k3 = xm * (phi + &k2 * (0.5 * h));
    let k4 = x1 * (phi + &k3 * h);
    phi + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
}

/// `Φ ← Φ − ½ J⁻¹ Φ⁻ᵀ (ΦᵀJΦ − J)`.
fn reproject(phi: &Mat) -> Result<Mat> {
    let n = phi.nrows() / 2;
    let defect = phi.transpose() * j_mul(phi) - crate::linalg::j_matrix(n);
    let inv_t = inverse(phi, "fundamental matrix")?.transpose();
    // J⁻¹ = −J
    Ok(phi + j_mul(&(inv_t * defect)) * 0.5)
}

/// Integrate `Φ′ = XΦ`, `Φ(a) = I` with classical RK4 over the grid schedule.
pub fn fundamental_matrix(sys: &SympDiffSystem, opts: &IntegrateOptions) -> Result<Fundamental> {
    let grid = &sys.grid;
    let stage = grid.stage_nodes();
    let dim = 2 * sys.n;
    let mut phi = Mat::identity(dim, dim);
    let nsub = (stage.len() - 1) / 2;
    let mut times = Vec::with_capacity(nsub + 1);
    let mut out = Vec::with_capacity(nsub + 1);
    times.push(stage[0]);
    out.push(phi.clone());
    let mut reprojections = 0;
    let mut x_prev = sys.x(stage[0]);
    for j in 0..nsub {
        let (t0, tm, t1) = (stage[2 * j], stage[2 * j + 1], stage[2 * j + 2]);
        let xm = sys.x(tm);
        let x1 = sys.x(t1);
        phi = rk4_step(&x_prev, &xm, &x1, &phi, t1 - t0);
        if !phi.iter().all(|v| v.is_finite()) {
            return Err(Error::Drift { drift: f64::INFINITY, ceiling: opts.ceiling, t: t1 });
        }
        if symplectic_drift_frobenius(&phi) > opts.reproject_tol {
            phi = reproject(&phi)?;
            reprojections += 1;
            let d = symplectic_drift_frobenius(&phi);
            if d > opts.ceiling && symplectic_drift(&phi) > opts.ceiling {
                return Err(Error::Drift { drift: symplectic_drift(&phi), ceiling: opts.ceiling, t: t1 });
            }
        }
        times.push(t1);
        out.push(phi.clone());
        x_prev = x1;
    }
    let grid_idx = grid.grid_node_indices();
    let max_drift = grid_idx.iter().map(|&i| symplectic_drift(&out[i])).fold(0.0, f64::max);
    Ok(Fundamental { grid: grid.clone(), times, phi: out, max_drift, reprojections, grid_idx })
}

/// `Φ(t)` off the nodes: one RK4 step from the nearest solution node below `t`
/// (or above, for `t` before the first node).
pub fn phi_at(sys: &SympDiffSystem, fund: &Fundamental, t: f64) -> Mat {
    let i = crate::fd::bracket(&fund.times, t);
    let (t0, base) = if (fund.times[i + 1] - t).abs() < (t - fund.times[i]).abs() {
        (fund.times[i + 1], &fund.phi[i + 1])
    } else {
        (fund.times[i], &fund.phi[i])
    };
    let h = t - t0;
    if h == 0.0 {
        return base.clone();
    }
    rk4_step(&sys.x(t0), &sys.x(t0 + 0.5 * h), &sys.x(t), base, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sds::system::Blocks;
    use approx::assert_relative_eq;

    fn ms1(r: f64, b: f64, n: usize) -> SympDiffSystem {
        let g = Grid::new(0.0, b, n).unwrap();
        SympDiffSystem::constant(
            g,
            Blocks { a: Mat::zeros(1, 1), b: Mat::identity(1, 1), c: Mat::from_element(1, 1, r) },
        )
    }

    #[test]
    fn zero_system_gives_identity() {
        let g = Grid::new(0.0, 1.0, 64).unwrap();
        let sys = SympDiffSystem::constant(g, Blocks { a: Mat::zeros(2, 2), b: Mat::zeros(2, 2), c: Mat::zeros(2, 2) });
        let f = fundamental_matrix(&sys, &IntegrateOptions::default()).unwrap();
        for p in &f.phi {
            assert_eq!(p, &Mat::identity(4, 4));
        }
    }

    #[test]
    fn free_particle_closed_form() {
        let f = fundamental_matrix(&ms1(0.0, 1.0, 4096), &IntegrateOptions::default()).unwrap();
        for k in [0, 100, 4096] {
            let t = f.grid.t(k);
            let expect = Mat::from_row_slice(2, 2, &[1.0, t, 0.0, 1.0]);
            assert_relative_eq!(f.at_grid(k), &expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn oscillator_closed_form() {
        let sys = ms1(-1.0, 3.5, 4096);
        let f = fundamental_matrix(&sys, &IntegrateOptions::default()).unwrap();
        for k in (0..=4096).step_by(97) {
            let t = f.grid.t(k);
            let expect = Mat::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
            assert_relative_eq!(f.at_grid(k), &expect, epsilon = 1e-8);
        }
        assert!(f.max_drift <= 1e-8);
        let p = phi_at(&sys, &f, 1.2345);
        assert_relative_eq!(p[(0, 1)], 1.2345_f64.sin(), epsilon = 1e-10);
    }

    #[test]
    fn refinement_schedule_is_honoured() {
        let g = Grid::new(0.0, 3.5, 64).unwrap().with_substeps(8).unwrap();
        let sys = SympDiffSystem::constant(
            g,
            Blocks { a: Mat::zeros(1, 1), b: Mat::identity(1, 1), c: Mat::from_element(1, 1, -1.0) },
        );
        let f = fundamental_matrix(&sys, &IntegrateOptions::default()).unwrap();
        assert_eq!(f.times.len(), 64 * 8 + 1);
        let t = f.grid.t(64);
        assert_relative_eq!(f.at_grid(64)[(0, 1)], t.sin(), epsilon = 1e-8);
    }
}
