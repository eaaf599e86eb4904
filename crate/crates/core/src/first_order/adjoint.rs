//! Costate integration for `ṗ = −f_xᵀ p` along a base process, with jumps at
//! measure atoms.
//!
//! Conventions: `p` is left-continuous, the stored node value is the left limit
//! and an atom at node `n` satisfies `p(tₙ+) = p(tₙ) + jump`. Terminal data is
//! `p(T+)`.

use alloc::vec;
use alloc::vec::Vec;

use super::FirstOrderError;
use crate::grid::Samples;
use crate::math::{self, Mat};
use crate::model::problem::ProblemSpec;
use crate::trajectory::ControlProcess;

#[derive(Debug, Clone, PartialEq)]
pub struct Costate {
    /// Left limits `p(tₖ)`, `N+1` rows.
    pub values: Samples,
    /// `(node, jump)` pairs sorted by node, nonzero jumps only.
    pub atoms: Vec<(usize, Vec<f64>)>,
}

impl Costate {
    pub fn n(&self) -> usize {
        self.values.dim()
    }

    pub fn left(&self, k: usize) -> &[f64] {
        self.values.row(k)
    }

    /// `p(tₖ+)`.
    pub fn right(&self, k: usize) -> Vec<f64> {
        let mut v = self.values.row(k).to_vec();
        if let Some((_, j)) = self.atoms.iter().find(|(node, _)| *node == k) {
            math::axpy(1.0, j, &mut v);
        }
        v
    }

    pub fn jump(&self, k: usize) -> Option<&[f64]> {
        self.atoms.iter().find(|(node, _)| *node == k).map(|(_, j)| j.as_slice())
    }

    /// Largest component over all left and right limits.
    pub fn sup_norm(&self) -> f64 {
        (0..self.values.len()).fold(0.0, |m: f64, k| m.max(math::norm_inf(self.left(k))).max(math::norm_inf(&self.right(k))))
    }

    /// Sum of `ℓ¹` increments, jumps included.
    pub fn total_variation(&self) -> f64 {
        let last = self.values.len() - 1;
        let mut tv = 0.0;
        for k in 0..=last {
            if let Some(j) = self.jump(k) {
                tv += j.iter().map(|v| v.abs()).sum::<f64>();
            }
            if k < last {
                let r = self.right(k);
                tv += self.left(k + 1).iter().zip(&r).map(|(a, b)| (a - b).abs()).sum::<f64>();
            }
        }
        tv
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut values = self.values.clone();
        values.as_mut_slice().iter_mut().for_each(|v| *v *= c);
        let atoms = self.atoms.iter().map(|(k, j)| (*k, math::scale(c, j))).collect();
        Self { values, atoms }
    }
}

/// Discrete adjoint propagators of one base process. `mats[k]` maps the left
/// limit at `t_{k+1}` to the right limit at `t_k` (one backward RK4 step with
/// `x̄` interpolated linearly and `ū` frozen).
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointOperator {
    n: usize,
    mats: Vec<Mat>,
}

impl AdjointOperator {
    pub fn new(p: &ProblemSpec, base: &ControlProcess) -> Result<Self, FirstOrderError> {
        let grid = &base.grid;
        let n = p.n;
        let mut mats = Vec::with_capacity(grid.intervals());
        for k in 0..grid.intervals() {
            let u = base.u.row(k);
            let jac = |t: f64, x: &[f64]| p.f_jac(t, x, u).map(|(fx, _)| fx).map_err(|source| FirstOrderError::Expr { interval: k, source });
            let a1 = jac(grid.t(k + 1), base.x.row(k + 1))?;
            let a2 = jac(grid.midpoint(k), &base.x.lerp(k, 0.5))?;
            let a3 = jac(grid.t(k), base.x.row(k))?;
            let h = grid.step(k);
            let step = |v: &[f64]| -> Vec<f64> {
                let k1 = a1.tmul_vec(v);
                let k2 = a2.tmul_vec(&math::add(v, &math::scale(0.5 * h, &k1)));
                let k3 = a2.tmul_vec(&math::add(v, &math::scale(0.5 * h, &k2)));
                let k4 = a3.tmul_vec(&math::add(v, &math::scale(h, &k3)));
                (0..n).map(|i| v[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
            };
            let mut m = Mat::zeros(n, n);
            for c in 0..n {
                let mut e = vec![0.0; n];
                e[c] = 1.0;
                for (r, v) in step(&e).into_iter().enumerate() {
                    m.set(r, c, v);
                }
            }
            mats.push(m);
        }
        Ok(Self { n, mats })
    }

    pub fn intervals(&self) -> usize {
        self.mats.len()
    }

    pub fn propagator(&self, k: usize) -> &Mat {
        &self.mats[k]
    }

    fn merged(&self, atoms: &[(usize, Vec<f64>)]) -> Vec<(usize, Vec<f64>)> {
        let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
        for (k, j) in atoms {
            match out.iter_mut().find(|(node, _)| node == k) {
                Some((_, acc)) => math::axpy(1.0, j, acc),
                None => out.push((*k, j.clone())),
            }
        }
        out.retain(|(_, j)| j.iter().any(|v| *v != 0.0));
        out.sort_by_key(|(k, _)| *k);
        out
    }

    /// Backward sweep from `p(T+) = terminal`.
    pub fn backward(&self, terminal: &[f64], atoms: &[(usize, Vec<f64>)]) -> Costate {
        let nn = self.intervals();
        let atoms = self.merged(atoms);
        let mut values = Samples::zeros(nn + 1, self.n);
        let mut q = terminal.to_vec();
        for k in (0..=nn).rev() {
            if k < nn {
                q = self.mats[k].mul_vec(values.row(k + 1));
            }
            if let Some((_, j)) = atoms.iter().find(|(node, _)| *node == k) {
                math::axpy(-1.0, j, &mut q);
            }
            values.row_mut(k).copy_from_slice(&q);
        }
        Costate { values, atoms }
    }

    /// Forward sweep from `p(0) = initial`, `p(t) = p(0) − ∫₀ᵗ H_x ds + ∫₀ᵗ γ dμ`,
    /// stepping with the inverse of each backward propagator.
    pub fn forward(&self, initial: &[f64], atoms: &[(usize, Vec<f64>)]) -> Result<Costate, FirstOrderError> {
        let nn = self.intervals();
        let atoms = self.merged(atoms);
        let mut values = Samples::zeros(nn + 1, self.n);
        values.row_mut(0).copy_from_slice(initial);
        for k in 0..nn {
            let mut q = values.row(k).to_vec();
            if let Some((_, j)) = atoms.iter().find(|(node, _)| *node == k) {
                math::axpy(1.0, j, &mut q);
            }
            let next = math::solve(&self.mats[k], &q).ok_or(FirstOrderError::SingularPropagator { interval: k })?;
            values.row_mut(k + 1).copy_from_slice(&next);
        }
        Ok(Costate { values, atoms })
    }
}
