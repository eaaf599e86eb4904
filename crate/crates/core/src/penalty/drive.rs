//! The optimality alternative: either some `λ > 0` makes the candidate a local
//! minimizer of the penalized functional (nonsingular case), or a sequence of
//! Ekeland-regularized near-minimizers stays infeasible (singular case).

use alloc::vec;
use alloc::vec::Vec;

use super::{endpoint_distance, j_k, DecisionVector, MinimizeConfig, Mode, PenaltyError, PenaltyFunctional, Trace, Tube};
use crate::grid::Samples;
use crate::model::problem::ProblemSpec;
use crate::trajectory::{integrate_relaxed, ControlProcess};

#[derive(Debug, Clone, PartialEq)]
pub struct AlternativeConfig {
    pub lambda_grid: Vec<f64>,
    pub minimize: MinimizeConfig,
    /// Nonsingular when `min 𝒥 ≥ 𝒥(candidate) − tol_alt`.
    pub tol_alt: f64,
    /// Singular anchors must keep the endpoint distance above this.
    pub tol_feas: f64,
    /// Singular anchors must keep `J_k` at or below this.
    pub tol_dyn: f64,
    pub tube_x: f64,
    pub tube_u: f64,
    pub ekeland_m: Vec<f64>,
}

impl Default for AlternativeConfig {
    fn default() -> Self {
        Self {
            lambda_grid: (0..=10).map(|i| 1.0 / (1u32 << i) as f64).collect(),
            minimize: MinimizeConfig { max_iters: 500, ..MinimizeConfig::default() },
            tol_alt: 1e-7,
            tol_feas: 1e-6,
            tol_dyn: 1e-6,
            tube_x: 0.1,
            tube_u: 0.1,
            ekeland_m: vec![10.0, 100.0, 1000.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkelandStep {
    pub m: f64,
    pub anchor: DecisionVector,
    pub endpoint_distance: f64,
    pub j_k: f64,
    pub value: f64,
    pub trace: Trace,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlternativeOutcome {
    Nonsingular { lambda: f64, z: DecisionVector, value: f64, candidate_value: f64, trace: Trace, probes: Vec<(f64, f64)> },
    Singular { sequence: Vec<EkelandStep>, probes: Vec<(f64, f64)> },
    Inconclusive { sequence: Vec<EkelandStep>, probes: Vec<(f64, f64)> },
}

pub fn optimality_alternative_drive(
    p: &ProblemSpec,
    candidate: &ControlProcess,
    u_refs: &[Samples],
    cfg: &AlternativeConfig,
) -> Result<AlternativeOutcome, PenaltyError> {
    let grid = candidate.grid.clone();
    let k = u_refs.len();
    let z0 = DecisionVector::from_process(candidate, k);
    let reference_cost = p.ell(candidate.x0(), candidate.xt())?[0];
    if p.r() == 0 && p.s() == 0 {
        let f = PenaltyFunctional {
            problem: p,
            grid,
            u_refs: u_refs.to_vec(),
            reference_cost,
            mode: Mode::Nonsingular { lambda: 1.0 },
            tube: None,
        };
        let value = f.value(&z0)?;
        return Ok(AlternativeOutcome::Nonsingular {
            lambda: 1.0,
            z: z0,
            value,
            candidate_value: value,
            trace: Trace { start_value: value, stages: Vec::new() },
            probes: Vec::new(),
        });
    }
    let tube = Tube { center: candidate.clone(), x_radius: cfg.tube_x, u_radius: cfg.tube_u };
    let mut probes = Vec::new();
    let mut fallback: Option<(f64, DecisionVector)> = None;
    for &lambda in &cfg.lambda_grid {
        let f = PenaltyFunctional {
            problem: p,
            grid: grid.clone(),
            u_refs: u_refs.to_vec(),
            reference_cost,
            mode: Mode::Nonsingular { lambda },
            tube: Some(tube.clone()),
        };
        let candidate_value = f.value(&z0)?;
        let (z, trace) = f.minimize(&z0, &cfg.minimize)?;
        let value = trace.final_value();
        probes.push((lambda, value));
        if value >= candidate_value - cfg.tol_alt {
            return Ok(AlternativeOutcome::Nonsingular { lambda, z, value, candidate_value, trace, probes });
        }
        let infeas = endpoint_distance(p, z.x.row(0), z.x.row(z.x.len() - 1))? + j_k(p, &grid, &z, u_refs)?;
        if fallback.as_ref().map_or(true, |(b, _)| infeas < *b) {
            fallback = Some((infeas, z));
        }
    }
    let mut anchor = reintegrate(p, &fallback.map(|(_, z)| z).unwrap_or(z0), u_refs, &grid)?;
    let mut sequence = Vec::new();
    for &m in &cfg.ekeland_m {
        let f = PenaltyFunctional {
            problem: p,
            grid: grid.clone(),
            u_refs: u_refs.to_vec(),
            reference_cost,
            mode: Mode::Ekeland { lambda: 0.0, m, anchor: anchor.clone() },
            tube: Some(tube.clone()),
        };
        let (z, trace) = f.minimize(&anchor, &cfg.minimize)?;
        anchor = reintegrate(p, &z, u_refs, &grid)?;
        let d = endpoint_distance(p, anchor.x.row(0), anchor.x.row(anchor.x.len() - 1))?;
        let j = j_k(p, &grid, &anchor, u_refs)?;
        let value = f.value(&anchor)?;
        sequence.push(EkelandStep { m, anchor: anchor.clone(), endpoint_distance: d, j_k: j, value, trace });
    }
    let singular = sequence.iter().all(|s| s.endpoint_distance > cfg.tol_feas && s.j_k <= cfg.tol_dyn);
    Ok(if singular {
        AlternativeOutcome::Singular { sequence, probes }
    } else {
        AlternativeOutcome::Inconclusive { sequence, probes }
    })
}

/// Replace the states by the relaxed solution from `x(0)` under the same controls and weights.
fn reintegrate(p: &ProblemSpec, z: &DecisionVector, u_refs: &[Samples], grid: &crate::grid::Grid) -> Result<DecisionVector, PenaltyError> {
    let proc = integrate_relaxed(p, z.x.row(0), &z.u, u_refs, &z.alphas, grid)?;
    Ok(DecisionVector { x: proc.x, u: z.u.clone(), alphas: z.alphas.clone() })
}
