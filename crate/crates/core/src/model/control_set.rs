//! Control-set families `U(t)`: boxes, finite sets and their unions, with an
//! optional piecewise-constant schedule over the horizon.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlSetError {
    #[error("box bounds have length {lo}/{hi}, expected {m}")]
    BoxDimension { lo: usize, hi: usize, m: usize },
    #[error("box lower bound exceeds upper bound in coordinate {0}")]
    BoxOrder(usize),
    #[error("box bound in coordinate {0} is NaN")]
    BoxNan(usize),
    #[error("finite set is empty")]
    EmptyFinite,
    #[error("finite point {index} has dimension {got}, expected {m}")]
    PointDimension { index: usize, got: usize, m: usize },
    #[error("finite point {0} is not finite")]
    PointNotFinite(usize),
    #[error("schedule needs one region per piece and strictly increasing breakpoints")]
    BadSchedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    pub fn clamp(&self, u: &[f64]) -> Vec<f64> {
        u.iter().enumerate().map(|(i, v)| v.max(self.lo[i]).min(self.hi[i])).collect()
    }

    fn validate(&self, m: usize) -> Result<(), ControlSetError> {
        if self.lo.len() != m || self.hi.len() != m {
            return Err(ControlSetError::BoxDimension { lo: self.lo.len(), hi: self.hi.len(), m });
        }
        for i in 0..m {
            if self.lo[i].is_nan() || self.hi[i].is_nan() {
                return Err(ControlSetError::BoxNan(i));
            }
            if self.lo[i] > self.hi[i] || self.lo[i] == f64::INFINITY || self.hi[i] == f64::NEG_INFINITY {
                return Err(ControlSetError::BoxOrder(i));
            }
        }
        Ok(())
    }

    fn contains(&self, u: &[f64], tol: f64) -> bool {
        u.iter().enumerate().all(|(i, v)| *v >= self.lo[i] - tol && *v <= self.hi[i] + tol)
    }

    /// Finite stand-in for each coordinate range; infinite ends are replaced by
    /// `anchor ± 1` (or the finite end ± 1).
    fn finite_range(&self, i: usize, anchor: f64) -> (f64, f64) {
        let (lo, hi) = (self.lo[i], self.hi[i]);
        let lo = if lo.is_finite() { lo } else if hi.is_finite() { hi.min(anchor) - 1.0 } else { anchor - 1.0 };
        let hi = if hi.is_finite() { hi } else { lo.max(anchor) + 1.0 };
        (lo, hi)
    }
}

/// One time slice of `U(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Box(BoxSet),
    Finite(Vec<Vec<f64>>),
    Union(BoxSet, Vec<Vec<f64>>),
}

/// Tangent directions allowed in one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Free,
    NonNeg,
    NonPos,
    Zero,
}

impl Cone {
    pub fn contains(self, d: f64, tol: f64) -> bool {
        match self {
            Cone::Free => true,
            Cone::NonNeg => d >= -tol,
            Cone::NonPos => d <= tol,
            Cone::Zero => d.abs() <= tol,
        }
    }

    /// Euclidean projection of a scalar onto the cone.
    pub fn project(self, d: f64) -> f64 {
        match self {
            Cone::Free => d,
            Cone::NonNeg => d.max(0.0),
            Cone::NonPos => d.min(0.0),
            Cone::Zero => 0.0,
        }
    }
}

impl Region {
    pub fn box_part(&self) -> Option<&BoxSet> {
        match self {
            Region::Box(b) | Region::Union(b, _) => Some(b),
            Region::Finite(_) => None,
        }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        match self {
            Region::Finite(p) | Region::Union(_, p) => p,
            Region::Box(_) => &[],
        }
    }

    fn validate(&self, m: usize) -> Result<(), ControlSetError> {
        if let Some(b) = self.box_part() {
            b.validate(m)?;
        }
        if matches!(self, Region::Finite(_)) && self.points().is_empty() {
            return Err(ControlSetError::EmptyFinite);
        }
        for (index, p) in self.points().iter().enumerate() {
            if p.len() != m {
                return Err(ControlSetError::PointDimension { index, got: p.len(), m });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(ControlSetError::PointNotFinite(index));
            }
        }
        Ok(())
    }

    /// Nearest point and Euclidean distance. Ties prefer the box, then the lowest point index.
    pub fn project(&self, u: &[f64]) -> (Vec<f64>, f64) {
        let mut best: Option<(Vec<f64>, f64)> = None;
        if let Some(b) = self.box_part() {
            let c = b.clamp(u);
            let d = math::dist(&c, u);
            best = Some((c, d));
        }
        for p in self.points() {
            let d = math::dist(p, u);
            if best.as_ref().map_or(true, |(_, bd)| d < *bd) {
                best = Some((p.clone(), d));
            }
        }
        best.unwrap_or_else(|| (u.to_vec(), 0.0))
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        self.box_part().is_some_and(|b| b.contains(u, tol)) || self.points().iter().any(|p| math::dist(p, u) <= tol)
    }

    /// Closed-form tangent cone `T(U, ū)` per coordinate; `None` if `ū ∉ U`.
    /// When `ū` lies in the box branch of a union, the box governs.
    pub fn tangent_cone(&self, ubar: &[f64], tol: f64) -> Option<Vec<Cone>> {
        if let Some(b) = self.box_part() {
            if b.contains(ubar, tol) {
                return Some(
                    (0..ubar.len())
                        .map(|i| {
                            let at_lo = (ubar[i] - b.lo[i]).abs() <= tol;
                            let at_hi = (ubar[i] - b.hi[i]).abs() <= tol;
                            match (at_lo, at_hi) {
                                (true, true) => Cone::Zero,
                                (true, false) => Cone::NonNeg,
                                (false, true) => Cone::NonPos,
                                (false, false) => Cone::Free,
                            }
                        })
                        .collect(),
                );
            }
        }
        if self.points().iter().any(|p| math::dist(p, ubar) <= tol) {
            return Some(vec![Cone::Zero; ubar.len()]);
        }
        None
    }

    /// Second-order tangent set `T²(U, ū; u)` per coordinate; `None` if empty
    /// (including when `u` is not tangent).
    pub fn second_order_tangent(&self, ubar: &[f64], dir: &[f64], tol: f64) -> Option<Vec<Cone>> {
        let cone = self.tangent_cone(ubar, tol)?;
        let mut out = Vec::with_capacity(cone.len());
        for (c, d) in cone.iter().zip(dir) {
            let next = match c {
                Cone::Free => Cone::Free,
                Cone::Zero if d.abs() <= tol => Cone::Zero,
                Cone::NonNeg if *d > tol => Cone::Free,
                Cone::NonNeg if d.abs() <= tol => Cone::NonNeg,
                Cone::NonPos if *d < -tol => Cone::Free,
                Cone::NonPos if d.abs() <= tol => Cone::NonPos,
                _ => return None,
            };
            out.push(next);
        }
        Some(out)
    }

    /// Candidate points: a `per_axis` lattice over the box (plus all corners)
    /// and every finite point. Lattices of size 1 use the box centre.
    pub fn lattice(&self, per_axis: usize, anchor: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        if let Some(b) = self.box_part() {
            let m = b.lo.len();
            let axes: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    let (lo, hi) = b.finite_range(i, anchor.get(i).copied().unwrap_or(0.0));
                    if per_axis <= 1 || lo == hi {
                        vec![0.5 * (lo + hi)]
                    } else {
                        (0..per_axis).map(|k| lo + (hi - lo) * k as f64 / (per_axis - 1) as f64).collect()
                    }
                })
                .collect();
            push_product(&axes, &mut out);
            let corners: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    let (lo, hi) = b.finite_range(i, anchor.get(i).copied().unwrap_or(0.0));
                    if lo == hi {
                        vec![lo]
                    } else {
                        vec![lo, hi]
                    }
                })
                .collect();
            push_product(&corners, &mut out);
        }
        out.extend(self.points().iter().cloned());
        dedup(&mut out);
        out
    }

    /// Finite bounding box of the box branch (see [`Region::lattice`] for infinite ends).
    pub fn box_bounds(&self, anchor: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let b = self.box_part()?;
        let (lo, hi) = (0..b.lo.len()).map(|i| b.finite_range(i, anchor.get(i).copied().unwrap_or(0.0))).unzip();
        Some((lo, hi))
    }
}

fn push_product(axes: &[Vec<f64>], out: &mut Vec<Vec<f64>>) {
    if axes.is_empty() {
        out.push(Vec::new());
        return;
    }
    let mut idx = vec![0usize; axes.len()];
    loop {
        out.push(idx.iter().enumerate().map(|(i, k)| axes[i][*k]).collect());
        let mut c = 0;
        loop {
            if c == axes.len() {
                return;
            }
            idx[c] += 1;
            if idx[c] < axes[c].len() {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
    }
}

fn dedup(points: &mut Vec<Vec<f64>>) {
    let mut seen: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    points.retain(|p| {
        if seen.iter().any(|q| q == p) {
            false
        } else {
            seen.push(p.clone());
            true
        }
    });
}

/// `U(t)`: `regions[i]` on `[breaks[i-1], breaks[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSet {
    regions: Vec<Region>,
    breaks: Vec<f64>,
}

impl ControlSet {
    pub fn fixed(region: Region) -> Self {
        Self { regions: vec![region], breaks: Vec::new() }
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self::fixed(Region::Box(BoxSet::new(lo, hi)))
    }

    pub fn finite(points: Vec<Vec<f64>>) -> Self {
        Self::fixed(Region::Finite(points))
    }

    pub fn scheduled(regions: Vec<Region>, breaks: Vec<f64>) -> Result<Self, ControlSetError> {
        if regions.len() != breaks.len() + 1 || breaks.windows(2).any(|w| !(w[0] < w[1])) || breaks.iter().any(|b| !b.is_finite()) {
            return Err(ControlSetError::BadSchedule);
        }
        Ok(Self { regions, breaks })
    }

    pub fn validate(&self, m: usize) -> Result<(), ControlSetError> {
        self.regions.iter().try_for_each(|r| r.validate(m))
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn is_time_dependent(&self) -> bool {
        self.regions.len() > 1
    }

    pub fn at(&self, t: f64) -> &Region {
        &self.regions[self.breaks.partition_point(|&b| b <= t)]
    }

    /// Region governing the open interval `(a, b)`: looked up at its midpoint.
    pub fn on_interval(&self, a: f64, b: f64) -> &Region {
        self.at(0.5 * (a + b))
    }

    pub fn project(&self, t: f64, u: &[f64]) -> (Vec<f64>, f64) {
        self.at(t).project(u)
    }
}
