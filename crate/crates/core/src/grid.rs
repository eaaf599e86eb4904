//! Time grids and per-node / per-interval sample storage.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("grid needs at least one interval")]
    Empty,
    #[error("grid nodes must start at 0 and increase strictly (node {0})")]
    NotIncreasing(usize),
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
}

/// Nodes `0 = t₀ < t₁ < … < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
}

impl Grid {
    /// Uniform grid with `intervals` equal steps over `[0, horizon]`.
    pub fn uniform(horizon: f64, intervals: usize) -> Result<Self, GridError> {
        if intervals == 0 {
            return Err(GridError::Empty);
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(GridError::BadHorizon(horizon));
        }
        let nodes = (0..=intervals)
            .map(|k| if k == intervals { horizon } else { horizon * k as f64 / intervals as f64 })
            .collect();
        Ok(Self { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self, GridError> {
        if nodes.len() < 2 {
            return Err(GridError::Empty);
        }
        if nodes[0] != 0.0 {
            return Err(GridError::NotIncreasing(0));
        }
        for k in 1..nodes.len() {
            if !(nodes[k] > nodes[k - 1]) || !nodes[k].is_finite() {
                return Err(GridError::NotIncreasing(k));
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    #[inline]
    pub fn step(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.nodes[k] + self.nodes[k + 1])
    }

    /// Index of the interval `[t_k, t_{k+1})` containing `t`; the final node
    /// maps to the last interval.
    pub fn interval_of(&self, t: f64) -> usize {
        let n = self.intervals();
        match self.nodes.binary_search_by(|x| x.partial_cmp(&t).unwrap_or(core::cmp::Ordering::Less)) {
            Ok(k) => k.min(n - 1),
            Err(k) => k.saturating_sub(1).min(n - 1),
        }
    }

    /// Node index equal to `t` within `tol`, if any.
    pub fn node_at(&self, t: f64, tol: f64) -> Option<usize> {
        let k = self.interval_of(t);
        [k, k + 1].into_iter().find(|&j| j < self.nodes.len() && (self.nodes[j] - t).abs() <= tol)
    }
}

/// Rows of equal dimension, stored contiguously. Used for node states
/// (`N+1` rows) and interval controls (`N` rows).
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    dim: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn zeros(len: usize, dim: usize) -> Self {
        Self { dim, data: vec![0.0; len * dim] }
    }

    pub fn constant(len: usize, value: &[f64]) -> Self {
        let mut data = Vec::with_capacity(len * value.len());
        for _ in 0..len {
            data.extend_from_slice(value);
        }
        Self { dim: value.len(), data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            assert_eq!(r.as_ref().len(), dim, "row dimension mismatch");
            data.extend_from_slice(r.as_ref());
        }
        Self { dim, data }
    }

    pub fn from_fn(len: usize, dim: usize, mut f: impl FnMut(usize) -> Vec<f64>) -> Self {
        let mut data = Vec::with_capacity(len * dim);
        for k in 0..len {
            let r = f(k);
            assert_eq!(r.len(), dim, "row dimension mismatch");
            data.extend_from_slice(&r);
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Linear interpolation between node rows `k` and `k+1`.
    pub fn lerp(&self, k: usize, theta: f64) -> Vec<f64> {
        let a = self.row(k);
        let b = self.row(k + 1);
        a.iter().zip(b).map(|(x, y)| x + theta * (y - x)).collect()
    }

    pub fn max_abs_diff(&self, other: &Samples) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_endpoints() {
        let g = Grid::uniform(2.0, 4).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.interval_of(2.0), 3);
        assert_eq!(g.interval_of(0.5), 1);
        assert_eq!(g.interval_of(0.49), 0);
        assert_eq!(g.node_at(1.0 + 1e-14, 1e-12), Some(2));
    }

    #[test]
    fn rejects_unsorted_nodes() {
        assert_eq!(Grid::from_nodes(vec![0.0, 1.0, 1.0]), Err(GridError::NotIncreasing(2)));
        assert_eq!(Grid::uniform(1.0, 0), Err(GridError::Empty));
    }
}
