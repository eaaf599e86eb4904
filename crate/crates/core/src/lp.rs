//! Dense two-phase simplex for small linear programs over `x ≥ 0`.
//!
//! Pricing uses the largest reduced cost and falls back to Bland's rule after a
//! run of degenerate pivots, which rules out cycling.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rel: Rel,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("simplex did not terminate within {0} pivots")]
    IterationLimit(usize),
    #[error("row {row} has {got} coefficients, expected {expected}")]
    Dimension { row: usize, got: usize, expected: usize },
    #[error("non-finite coefficient in row {0}")]
    NotFinite(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible { phase_one: f64 },
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(&self) -> Option<(&[f64], f64)> {
        match self {
            LpOutcome::Optimal { x, value } => Some((x, *value)),
            _ => None,
        }
    }
}

/// `maximize cᵀx` subject to the rows and `x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lp {
    pub nvars: usize,
    pub rows: Vec<Row>,
}

const PIVOT_TOL: f64 = 1e-11;

impl Lp {
    pub fn new(nvars: usize) -> Self {
        Self { nvars, rows: Vec::new() }
    }

    pub fn add(&mut self, coeffs: Vec<f64>, rel: Rel, rhs: f64) {
        self.rows.push(Row { coeffs, rel, rhs });
    }

    pub fn feasible(&self) -> Result<LpOutcome, LpError> {
        self.maximize(&vec![0.0; self.nvars])
    }

    pub fn minimize(&self, c: &[f64]) -> Result<LpOutcome, LpError> {
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        Ok(match self.maximize(&neg)? {
            LpOutcome::Optimal { x, value } => LpOutcome::Optimal { x, value: -value },
            other => other,
        })
    }

    pub fn maximize(&self, c: &[f64]) -> Result<LpOutcome, LpError> {
        let nv = self.nvars;
        let mut rows: Vec<Row> = Vec::with_capacity(self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            if r.coeffs.len() != nv {
                return Err(LpError::Dimension { row: i, got: r.coeffs.len(), expected: nv });
            }
            if !r.rhs.is_finite() || r.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(LpError::NotFinite(i));
            }
            let mut r = r.clone();
            if r.rhs < 0.0 {
                r.coeffs.iter_mut().for_each(|v| *v = -*v);
                r.rhs = -r.rhs;
                r.rel = match r.rel {
                    Rel::Le => Rel::Ge,
                    Rel::Ge => Rel::Le,
                    Rel::Eq => Rel::Eq,
                };
            }
            rows.push(r);
        }
        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.rel != Rel::Eq).count();
        let n_art = rows.iter().filter(|r| r.rel != Rel::Le).count();
        let width = nv + n_slack + n_art + 1;
        let art0 = nv + n_slack;
        let mut t = Tableau { m, width, data: vec![0.0; (m + 1) * width], basis: vec![0; m], ncols_allowed: width - 1 };
        let (mut si, mut ai) = (nv, art0);
        for (i, r) in rows.iter().enumerate() {
            t.data[i * width..i * width + nv].copy_from_slice(&r.coeffs);
            t.data[i * width + width - 1] = r.rhs;
            match r.rel {
                Rel::Le => {
                    t.data[i * width + si] = 1.0;
                    t.basis[i] = si;
                    si += 1;
                }
                Rel::Ge => {
                    t.data[i * width + si] = -1.0;
                    si += 1;
                    t.data[i * width + ai] = 1.0;
                    t.basis[i] = ai;
                    ai += 1;
                }
                Rel::Eq => {
                    t.data[i * width + ai] = 1.0;
                    t.basis[i] = ai;
                    ai += 1;
                }
            }
        }
        let scale = 1.0 + rows.iter().fold(0.0f64, |a, r| a.max(r.rhs));
        let limit = 50 * (m + width) + 1000;
        if n_art > 0 {
            // phase 1: maximize −Σ artificials
            let mut obj = vec![0.0; width];
            for j in art0..width - 1 {
                obj[j] = -1.0;
            }
            t.set_objective(&obj);
            t.run(limit)?;
            let phase_one = t.value();
            if phase_one < -1e-9 * scale {
                return Ok(LpOutcome::Infeasible { phase_one });
            }
            t.expel_artificials(art0);
            t.ncols_allowed = art0;
        }
        let mut obj = vec![0.0; width];
        obj[..nv].copy_from_slice(c);
        t.set_objective(&obj);
        if !t.run(limit)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![0.0; nv];
        for (i, &b) in t.basis.iter().enumerate() {
            if b < nv {
                x[b] = t.rhs(i).max(0.0);
            }
        }
        let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
        Ok(LpOutcome::Optimal { x, value })
    }
}

struct Tableau {
    m: usize,
    width: usize,
    /// `m` constraint rows then the reduced-cost row; last column is the rhs.
    data: Vec<f64>,
    basis: Vec<usize>,
    ncols_allowed: usize,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn value(&self) -> f64 {
        -self.at(self.m, self.width - 1)
    }

    /// Objective row holds reduced costs `c_j − c_Bᵀ B⁻¹ a_j`; its rhs is `−c_Bᵀ x_B`.
    fn set_objective(&mut self, c: &[f64]) {
        let w = self.width;
        let base = self.m * w;
        self.data[base..base + w].copy_from_slice(c);
        self.data[base + w - 1] = 0.0;
        for i in 0..self.m {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    self.data[base + j] -= cb * self.data[i * w + j];
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.data[r * w + c];
        for j in 0..w {
            self.data[r * w + j] /= p;
        }
        self.data[r * w + c] = 1.0;
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for chunk in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = chunk[c];
            if f != 0.0 {
                for j in 0..w {
                    chunk[j] -= f * prow[j];
                }
                chunk[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Returns `false` when the objective is unbounded.
    fn run(&mut self, limit: usize) -> Result<bool, LpError> {
        let mut degenerate_run = 0usize;
        for _ in 0..limit {
            let bland = degenerate_run > 30;
            let obj = self.m;
            let mut enter = None;
            let mut best = 1e-10;
            for j in 0..self.ncols_allowed {
                let d = self.at(obj, j);
                if d > best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(c) = enter else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && self.basis[i] < self.basis[li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(false);
            };
            degenerate_run = if ratio == 0.0 { degenerate_run + 1 } else { 0 };
            self.pivot(r, c);
        }
        Err(LpError::IterationLimit(limit))
    }

    fn expel_artificials(&mut self, art0: usize) {
        let mut i = 0;
        while i < self.m {
            if self.basis[i] >= art0 {
                let col = (0..art0).find(|&j| self.at(i, j).abs() > 1e-9);
                match col {
                    Some(c) => self.pivot(i, c),
                    None => {
                        // redundant row: drop it
                        let w = self.width;
                        self.data.drain(i * w..(i + 1) * w);
                        self.basis.remove(i);
                        self.m -= 1;
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = Lp::new(2);
        lp.add(vec![1.0, 0.0], Rel::Le, 4.0);
        lp.add(vec![0.0, 2.0], Rel::Le, 12.0);
        lp.add(vec![3.0, 2.0], Rel::Le, 18.0);
        let (x, v) = lp.maximize(&[3.0, 5.0]).unwrap().optimal().map(|(x, v)| (x.to_vec(), v)).unwrap();
        assert!((v - 36.0).abs() < 1e-12);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn equalities_and_infeasibility() {
        let mut lp = Lp::new(2);
        lp.add(vec![1.0, 1.0], Rel::Eq, 1.0);
        lp.add(vec![1.0, -1.0], Rel::Ge, 0.5);
        let (x, _) = lp.minimize(&[1.0, 0.0]).unwrap().optimal().map(|(x, v)| (x.to_vec(), v)).unwrap();
        assert!((x[0] - 0.75).abs() < 1e-12);
        lp.add(vec![1.0, 0.0], Rel::Le, 0.5);
        assert!(matches!(lp.feasible().unwrap(), LpOutcome::Infeasible { .. }));
    }

    #[test]
    fn unbounded_and_redundant() {
        let mut lp = Lp::new(2);
        lp.add(vec![1.0, -1.0], Rel::Le, 1.0);
        assert_eq!(lp.maximize(&[1.0, 1.0]).unwrap(), LpOutcome::Unbounded);
        let mut lp = Lp::new(2);
        lp.add(vec![1.0, 1.0], Rel::Eq, 1.0);
        lp.add(vec![2.0, 2.0], Rel::Eq, 2.0);
        lp.add(vec![-1.0, 0.0], Rel::Ge, -0.25);
        let (x, v) = lp.maximize(&[0.0, 1.0]).unwrap().optimal().map(|(x, v)| (x.to_vec(), v)).unwrap();
        assert!((v - 1.0).abs() < 1e-12 && x[0].abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's cycling example; must terminate at value 1/20.
        let mut lp = Lp::new(4);
        lp.add(vec![0.25, -60.0, -1.0 / 25.0, 9.0], Rel::Le, 0.0);
        lp.add(vec![0.5, -90.0, -1.0 / 50.0, 3.0], Rel::Le, 0.0);
        lp.add(vec![0.0, 0.0, 1.0, 0.0], Rel::Le, 1.0);
        let out = lp.maximize(&[0.75, -150.0, 1.0 / 50.0, -6.0]).unwrap();
        assert!((out.optimal().unwrap().1 - 0.05).abs() < 1e-12);
    }
}
