//! Uniform report grids with an optional per-interval refinement schedule.
//!
//! The report grid has `n + 1` points `t_k = a + k h`. Interval `k` may be
//! split into `refine[k]` equal integration substeps; the endpoints of those
//! substeps are the *solution nodes*, where the fundamental matrix is stored.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refine: Vec<u32>,
}

impl Grid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Invalid(format!("interval [{a}, {b}] is empty")));
        }
        if n == 0 {
            return Err(Error::Invalid("grid needs at least one step".into()));
        }
        Ok(Grid { a, b, n, refine: Vec::new() })
    }

    pub fn with_refine(mut self, refine: Vec<u32>) -> Result<Self> {
        if refine.len() != self.n || refine.contains(&0) {
            return Err(Error::Invalid("refinement schedule must give a positive count per interval".into()));
        }
        if refine.iter().all(|&m| m == 1) {
            self.refine.clear();
        } else {
            self.refine = refine;
        }
        Ok(self)
    }

    /// Uniform refinement of every interval.
    pub fn with_substeps(self, m: u32) -> Result<Self> {
        let n = self.n;
        self.with_refine(vec![m; n])
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.n {
            self.b
        } else {
            self.a + k as f64 * self.h()
        }
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.t(k)).collect()
    }

    pub fn substeps(&self, k: usize) -> usize {
        if self.refine.is_empty() {
            1
        } else {
            self.refine[k] as usize
        }
    }

    /// Solution node times, grid points included.
    pub fn nodes(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_nodes());
        for k in 0..self.n {
            let m = self.substeps(k);
            let (t0, t1) = (self.t(k), self.t(k + 1));
            for j in 0..m {
                out.push(t0 + (t1 - t0) * j as f64 / m as f64);
            }
        }
        out.push(self.b);
        out
    }

    /// Solution nodes plus the midpoint of every substep (the RK4 stage times).
    pub fn stage_nodes(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.n_nodes());
        for k in 0..self.n {
            let m = 2 * self.substeps(k);
            let (t0, t1) = (self.t(k), self.t(k + 1));
            for j in 0..m {
                out.push(t0 + (t1 - t0) * j as f64 / m as f64);
            }
        }
        out.push(self.b);
        out
    }

    pub fn n_nodes(&self) -> usize {
        if self.refine.is_empty() {
            self.n + 1
        } else {
            self.refine.iter().map(|&m| m as usize).sum::<usize>() + 1
        }
    }

    /// Position of each report grid point inside [`Grid::nodes`].
    pub fn grid_node_indices(&self) -> Vec<usize> {
        let mut idx = Vec::with_capacity(self.n + 1);
        let mut acc = 0;
        idx.push(0);
        for k in 0..self.n {
            acc += self.substeps(k);
            idx.push(acc);
        }
        idx
    }

    /// Index of the nearest report grid point.
    pub fn nearest(&self, t: f64) -> usize {
        let k = ((t - self.a) / self.h()).round();
        k.clamp(0.0, self.n as f64) as usize
    }

    /// Index `k` of the interval `[t_k, t_{k+1}]` containing `t`.
    pub fn interval_of(&self, t: f64) -> usize {
        let k = ((t - self.a) / self.h()).floor();
        k.clamp(0.0, (self.n - 1) as f64) as usize
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.a && t <= self.b
    }

    pub fn max_substeps(&self) -> usize {
        self.refine.iter().copied().max().unwrap_or(1) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_follow_schedule() {
        let g = Grid::new(0.0, 1.0, 4).unwrap().with_refine(vec![1, 2, 1, 3]).unwrap();
        let nodes = g.nodes();
        assert_eq!(nodes.len(), g.n_nodes());
        assert_eq!(nodes.len(), 8);
        let idx = g.grid_node_indices();
        assert_eq!(idx, vec![0, 1, 3, 4, 7]);
        for (k, &i) in idx.iter().enumerate() {
            assert!((nodes[i] - g.t(k)).abs() < 1e-15);
        }
        assert_eq!(g.stage_nodes().len(), 2 * (g.n_nodes() - 1) + 1);
    }

    #[test]
    fn trivial_schedule_is_dropped() {
        let g = Grid::new(0.0, 2.0, 8).unwrap().with_substeps(1).unwrap();
        assert!(g.refine.is_empty());
        assert_eq!(g.nodes().len(), 9);
        assert_eq!(g.t(8), 2.0);
    }

    #[test]
    fn rejects_empty_interval() {
        assert!(Grid::new(1.0, 1.0, 10).is_err());
        assert!(Grid::new(0.0, 1.0, 0).is_err());
    }
}
