//! Finite-difference weights, interpolation and quadrature on arbitrary nodes.

use crate::Mat;

/// Fornberg weights: `w[d][i]` approximates the `d`-th derivative at `x0` as
/// `Σ_i w[d][i] f(x_i)`, for `d = 0..=order`.
pub fn fornberg(x0: f64, xs: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Indices of a stencil of `width` consecutive nodes around position `i`,
/// shifted inward at the ends.
pub fn stencil_range(i: usize, len: usize, width: usize) -> std::ops::Range<usize> {
    let width = width.min(len);
    let half = width / 2;
    let start = i.saturating_sub(half).min(len - width);
    start..start + width
}

/// Index of the last node `<= t` (clamped so that `i + 1` is valid).
pub fn bracket(times: &[f64], t: f64) -> usize {
    match times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
        Ok(i) => i.min(times.len().saturating_sub(2)),
        Err(0) => 0,
        Err(i) => (i - 1).min(times.len().saturating_sub(2)),
    }
}

/// Four-point Lagrange interpolation of matrix samples at `t`.
pub fn interp_mat(times: &[f64], values: &[Mat], t: f64) -> Mat {
    let (range, w) = interp_weights(times, t);
    let mut acc = &values[range.start] * w[0];
    for (k, i) in range.clone().enumerate().skip(1) {
        acc += &values[i] * w[k];
    }
    acc
}

pub fn interp_scalar(times: &[f64], values: &[f64], t: f64) -> f64 {
    let (range, w) = interp_weights(times, t);
    range.zip(w).map(|(i, wi)| values[i] * wi).sum()
}

fn interp_weights(times: &[f64], t: f64) -> (std::ops::Range<usize>, Vec<f64>) {
    let i = bracket(times, t);
    let len = times.len();
    let width = 4.min(len);
    let start = if i == 0 { 0 } else { (i - 1).min(len - width) };
    let range = start..start + width;
    let w = fornberg(t, &times[range.clone()], 0).swap_remove(0);
    (range, w)
}

/// Derivatives of order `1..=order` of sampled matrices at node `i`, using
/// the `width` nearest nodes.
pub fn node_derivatives(times: &[f64], values: &[Mat], i: usize, order: usize, width: usize) -> Vec<Mat> {
    let range = stencil_range(i, times.len(), width);
    let w = fornberg(times[i], &times[range.clone()], order);
    (1..=order)
        .map(|d| {
            let mut acc = Mat::zeros(values[i].nrows(), values[i].ncols());
            for (k, j) in range.clone().enumerate() {
                acc += &values[j] * w[d][k];
            }
            acc
        })
        .collect()
}

/// Composite Simpson rule for `∫_lo^hi f` with `m` (rounded up to even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, m: usize) -> f64 {
    let m = (m + m % 2).max(2);
    let h = (hi - lo) / m as f64;
    let mut s = f(lo) + f(hi);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + k as f64 * h);
    }
    s * h / 3.0
}

/// Five-point Gauss–Legendre rule on `[lo, hi]`.
pub fn gauss5<T>(f: impl Fn(f64) -> T, lo: f64, hi: f64) -> T
where
    T: std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut acc = f(mid + half * X[0]) * (W[0] * half);
    for k in 1..5 {
        acc = acc + f(mid + half * X[k]) * (W[k] * half);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fornberg_central_weights() {
        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fornberg(0.0, &xs, 2);
        let d1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        let d2 = [-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0];
        for i in 0..5 {
            assert_relative_eq!(w[1][i], d1[i], epsilon = 1e-14);
            assert_relative_eq!(w[2][i], d2[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn nonuniform_derivative_is_exact_on_quartics() {
        let xs = [0.0, 0.1, 0.15, 0.4, 0.7];
        let f = |x: f64| 1.0 + x - 2.0 * x * x + 0.5 * x.powi(3) + x.powi(4);
        let df = |x: f64| 1.0 - 4.0 * x + 1.5 * x * x + 4.0 * x.powi(3);
        let w = fornberg(0.15, &xs, 1);
        let approx: f64 = xs.iter().zip(&w[1]).map(|(x, wi)| f(*x) * wi).sum();
        assert_relative_eq!(approx, df(0.15), epsilon = 1e-12);
    }

    #[test]
    fn interpolation_exact_on_cubics() {
        let times: Vec<f64> = (0..10).map(|k| k as f64 * 0.3).collect();
        let f = |x: f64| 2.0 - x + 0.3 * x.powi(3);
        let vals: Vec<f64> = times.iter().map(|&x| f(x)).collect();
        for &t in &[0.05, 1.0, 2.61, 2.7] {
            assert_relative_eq!(interp_scalar(&times, &vals, t), f(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn simpson_and_gauss() {
        let s = simpson(|x| x.sin(), 0.0, std::f64::consts::PI, 200);
        assert_relative_eq!(s, 2.0, epsilon = 1e-8);
        let g = gauss5(|x: f64| x.powi(8), 0.0, 1.0);
        assert_relative_eq!(g, 1.0 / 9.0, epsilon = 1e-14);
    }
}
