//! Projected limited-memory BFGS over a box (plus an arbitrary projection for
//! the coupled weight block).

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::PenaltyError;
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsConfig {
    pub max_iters: usize,
    pub pg_tol: f64,
    pub memory: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub z: Vec<f64>,
    pub value: f64,
    pub start_value: f64,
    pub iterations: usize,
    pub pg_norm: f64,
}

fn pg_norm(z: &[f64], g: &[f64], project: &impl Fn(&mut [f64])) -> f64 {
    let mut t: Vec<f64> = z.iter().zip(g).map(|(a, b)| a - b).collect();
    project(&mut t);
    t.iter().zip(z).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

pub fn run(
    eval: &mut impl FnMut(&[f64]) -> Result<(f64, Vec<f64>), PenaltyError>,
    project: &impl Fn(&mut [f64]),
    lo: &[f64],
    hi: &[f64],
    z0: &[f64],
    cfg: &LbfgsConfig,
) -> Result<LbfgsResult, PenaltyError> {
    let mut z = z0.to_vec();
    project(&mut z);
    let (mut f, mut g) = eval(&z)?;
    let start_value = f;
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;
    let mut stall = 0;
    let mut pg = pg_norm(&z, &g, project);
    while iterations < cfg.max_iters {
        if pg <= cfg.pg_tol * (1.0 + f.abs()) {
            break;
        }
        iterations += 1;
        // Coordinates pinned at a bound with the gradient pushing outward are held fixed.
        let free: Vec<bool> = (0..z.len())
            .map(|i| {
                let at_lo = z[i] <= lo[i] && g[i] > 0.0;
                let at_hi = z[i] >= hi[i] && g[i] < 0.0;
                !(at_lo || at_hi)
            })
            .collect();
        let gm: Vec<f64> = g.iter().zip(&free).map(|(v, fr)| if *fr { *v } else { 0.0 }).collect();
        let mut d = two_loop(&gm, &mem);
        for (di, fr) in d.iter_mut().zip(&free) {
            if !fr {
                *di = 0.0;
            }
        }
        if math::dot(&d, &gm) >= 0.0 || d.iter().any(|v| !v.is_finite()) {
            mem.clear();
            d = gm.iter().map(|v| -v).collect();
        }
        let mut step = if mem.is_empty() { 1.0 / math::norm_inf(&gm).max(1.0) } else { 1.0 };
        let mut accepted = None;
        for attempt in 0..60 {
            let mut zt: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            project(&mut zt);
            let dz: Vec<f64> = zt.iter().zip(&z).map(|(a, b)| a - b).collect();
            let pred = math::dot(&g, &dz);
            if pred >= 0.0 {
                if attempt == 0 && !mem.is_empty() {
                    // projection bent the quasi-Newton step uphill; fall back to steepest descent
                    mem.clear();
                    d = gm.iter().map(|v| -v).collect();
                    step = 1.0 / math::norm_inf(&gm).max(1.0);
                    continue;
                }
                step *= 0.5;
                continue;
            }
            let (ft, gt) = eval(&zt)?;
            if ft <= f + 1e-4 * pred {
                accepted = Some((zt, dz, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((zt, s, ft, gt)) = accepted else {
            if !mem.is_empty() {
                mem.clear();
                continue;
            }
            break;
        };
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = math::dot(&s, &y);
        if sy > 1e-12 * math::norm(&s) * math::norm(&y) && sy > 0.0 {
            if mem.len() == cfg.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        stall = if f - ft <= 1e-15 * (1.0 + f.abs()) { stall + 1 } else { 0 };
        z = zt;
        f = ft;
        g = gt;
        pg = pg_norm(&z, &g, project);
        if stall >= 10 {
            break;
        }
    }
    Ok(LbfgsResult { z, value: f, start_value, iterations, pg_norm: pg })
}

fn two_loop(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * math::dot(s, &q);
        math::axpy(-a, y, &mut q);
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = math::dot(s, y) / math::dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
        let b = rho * math::dot(y, &q);
        math::axpy(a - b, s, &mut q);
    }
    q.iter().map(|v| -v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn bound_constrained_quadratic() {
        // min (a-2)² + 10(b+1)² on [0,1]² → (1, 0)
        let mut eval = |z: &[f64]| -> Result<(f64, Vec<f64>), PenaltyError> {
            Ok(((z[0] - 2.0).powi(2) + 10.0 * (z[1] + 1.0).powi(2), vec![2.0 * (z[0] - 2.0), 20.0 * (z[1] + 1.0)]))
        };
        let lo = [0.0, 0.0];
        let hi = [1.0, 1.0];
        let project = |z: &mut [f64]| {
            for i in 0..2 {
                z[i] = z[i].clamp(lo[i], hi[i]);
            }
        };
        let cfg = LbfgsConfig { max_iters: 100, pg_tol: 1e-12, memory: 5 };
        let r = run(&mut eval, &project, &lo, &hi, &[0.5, 0.5], &cfg).unwrap();
        assert!((r.z[0] - 1.0).abs() < 1e-12 && r.z[1].abs() < 1e-12);
    }

    #[test]
    fn rosenbrock_unconstrained() {
        let mut eval = |z: &[f64]| -> Result<(f64, Vec<f64>), PenaltyError> {
            let (a, b) = (z[0], z[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            Ok((v, vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]))
        };
        let lo = [f64::NEG_INFINITY; 2];
        let hi = [f64::INFINITY; 2];
        let cfg = LbfgsConfig { max_iters: 1000, pg_tol: 1e-10, memory: 7 };
        let r = run(&mut eval, &|_: &mut [f64]| {}, &lo, &hi, &[-1.2, 1.0], &cfg).unwrap();
        assert!((r.z[0] - 1.0).abs() < 1e-6 && (r.z[1] - 1.0).abs() < 1e-6, "{:?}", r.z);
    }
}
