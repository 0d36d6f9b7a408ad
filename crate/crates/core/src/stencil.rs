//! Finite-difference first derivatives on uniform grids.
//!
//! Weights come from Fornberg's recursion, so the same code yields the
//! centered stencil in the interior and shifted one-sided stencils near
//! the ends of the grid.

use std::ops::{Add, Mul};

/// Number of nodes in the default derivative stencil (tenth order).
pub const DEFAULT_STENCIL: usize = 11;

/// Fornberg weights for the `order`-th derivative at `x0` from `nodes`.
pub fn fornberg_weights(x0: f64, nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(n > order, "need more nodes than the derivative order");
    // c[j][k]: weight of node j for the k-th derivative.
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// First-derivative operator on a uniform grid of `len` points with spacing `h`.
#[derive(Debug, Clone)]
pub struct UniformDerivative {
    len: usize,
    width: usize,
    // weights[p]: stencil starting `p` nodes before the evaluation point, scaled by 1/h
    weights: Vec<Vec<f64>>,
}

impl UniformDerivative {
    pub fn new(len: usize, h: f64) -> Self {
        Self::with_width(len, h, DEFAULT_STENCIL)
    }

    /// Stencil width is clamped to the grid length; it must be at least 3.
    pub fn with_width(len: usize, h: f64, width: usize) -> Self {
        assert!(len >= 3, "derivative needs at least 3 grid points");
        let width = width.min(len).max(3);
        let weights = (0..width)
            .map(|p| {
                let nodes: Vec<f64> = (0..width).map(|s| s as f64 - p as f64).collect();
                fornberg_weights(0.0, &nodes, 1)
                    .into_iter()
                    .map(|w| w / h)
                    .collect()
            })
            .collect();
        Self { len, width, weights }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// First node of the stencil used at `i`, together with its weights.
    pub fn stencil(&self, i: usize) -> (usize, &[f64]) {
        let half = self.width / 2;
        let start = i.saturating_sub(half).min(self.len - self.width);
        (start, &self.weights[i - start])
    }

    pub fn at<T>(&self, values: &[T], i: usize) -> T
    where
        T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    {
        let (start, w) = self.stencil(i);
        let mut acc = values[start] * w[0];
        for (s, &ws) in w.iter().enumerate().skip(1) {
            acc = acc + values[start + s] * ws;
        }
        acc
    }

    pub fn apply<T>(&self, values: &[T]) -> Vec<T>
    where
        T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    {
        assert_eq!(values.len(), self.len);
        (0..self.len).map(|i| self.at(values, i)).collect()
    }
}
