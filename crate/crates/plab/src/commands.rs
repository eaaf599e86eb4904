//! Subcommand implementations. Each returns a [`Report`]; the exit code rides
//! along in the report.

use std::path::{Path, PathBuf};
use std::time::Instant;

use plab_core::first_order::{
    comparison_controls, extract_multipliers, mp_residuals, MpTolerances, MultiplierConfig, MultiplierOutcome, SupConfig,
};
use plab_core::penalty::{optimality_alternative_drive, AlternativeConfig, AlternativeOutcome, EkelandStep, MinimizeConfig, Trace};
use plab_core::rng::SeededRng;
use plab_core::second_order::{soc_certificate, SocConfig, SocReport, SocVerdict};
use plab_core::trajectory::{
    chattering_control, constant_control, integrate_forward, integrate_relaxed, perturb_process, regularity_check, residual,
    sup_distance, TrajectoryError,
};
use plab_core::{Catalog, ControlProcess, Grid, Samples};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::cli::{
    CandidateArgs, CatalogArgs, CertifyMpArgs, CertifySocArgs, ChatterArgs, Command, Common, MultiplierArgs, ReduceArgs, RegularityArgs,
    SimulateArgs,
};
use crate::direction_io::DirectionFile;
use crate::error::CliError;
use crate::problem_file::{resolve_problem, scan_catalog_dir, LoadedProblem, ProblemSource, CATALOG_DIR_ENV};
use crate::report::{self, Report};
use crate::trajectory_io::{read_trajectory, write_trajectory};

pub const DEFAULT_GRID: usize = 200;

/// Cone violations listed per direction; the full count is reported too.
const MAX_LISTED: usize = 20;

pub fn execute(cmd: &Command) -> Result<(Report, Option<PathBuf>), CliError> {
    Ok(match cmd {
        Command::Catalog(a) => (cmd_catalog(a)?, a.out.clone()),
        Command::Simulate(a) => (timed(&a.common, || cmd_simulate(a))?, a.common.out.clone()),
        Command::Reduce(a) => (timed(&a.common, || cmd_reduce(a))?, a.common.out.clone()),
        Command::CertifyMp(a) => (timed(&a.common, || cmd_certify_mp(a))?, a.common.out.clone()),
        Command::CertifySoc(a) => (timed(&a.common, || cmd_certify_soc(a))?, a.common.out.clone()),
        Command::Chatter(a) => (timed(&a.common, || cmd_chatter(a))?, a.common.out.clone()),
        Command::Regularity(a) => (timed(&a.common, || cmd_regularity(a))?, a.common.out.clone()),
    })
}

fn timed(common: &Common, f: impl FnOnce() -> Result<Report, CliError>) -> Result<Report, CliError> {
    let start = Instant::now();
    let mut r = f()?;
    if common.timing {
        r.timing = Some(start.elapsed().as_secs_f64());
    }
    Ok(r)
}

fn catalog_dir() -> Option<PathBuf> {
    std::env::var_os(CATALOG_DIR_ENV).map(PathBuf::from)
}

fn pool(jobs: u64) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs as usize).build().map_err(|e| CliError::Usage(format!("--jobs: {e}")))
}

/// Problem, candidate process and the config echo shared by the commands.
pub struct Setup {
    pub problem: LoadedProblem,
    pub base: ControlProcess,
    pub config: Map<String, Value>,
}

/// Resolves the problem and the candidate. A control file supplies the grid,
/// the control and `x(0)`; the state is re-integrated unless `keep_state`.
pub fn setup(common: &Common, cand: &CandidateArgs, keep_state: bool) -> Result<Setup, CliError> {
    let problem = resolve_problem(&common.problem, &common.params, catalog_dir().as_deref())?;
    let p = &problem.spec;
    let base = match &cand.control {
        Some(path) => {
            let file = read_trajectory(path)?;
            if file.n() != p.n || file.m() != p.m {
                return Err(CliError::format(path, format!("problem needs n = {}, m = {}; file has {} and {}", p.n, p.m, file.n(), file.m())));
            }
            if let Some(n) = common.grid.filter(|n| *n != file.grid.intervals()) {
                return Err(CliError::Usage(format!("--grid {n} disagrees with the control file ({} intervals)", file.grid.intervals())));
            }
            if (file.grid.horizon() - p.horizon).abs() > 1e-12 * p.horizon {
                return Err(CliError::format(path, format!("file horizon {} differs from T = {}", file.grid.horizon(), p.horizon)));
            }
            let x0 = cand.x0.as_ref().map_or_else(|| file.x0().to_vec(), |v| v.0.clone());
            if keep_state && cand.x0.is_none() {
                file
            } else {
                integrate_forward(p, &x0, &file.u, &file.grid)?
            }
        }
        None => {
            let grid = Grid::uniform(p.horizon, common.grid.unwrap_or(DEFAULT_GRID)).map_err(|e| CliError::Usage(e.to_string()))?;
            let default = problem.candidate.clone();
            let u = match (&cand.constant_control, &default) {
                (Some(v), _) => v.0.clone(),
                (None, Some(c)) => c.control.clone(),
                (None, None) => return Err(CliError::NoCandidate),
            };
            let x0 = match (&cand.x0, &default) {
                (Some(v), _) => v.0.clone(),
                (None, Some(c)) => c.x0.clone(),
                (None, None) => return Err(CliError::Usage("no initial state: pass --x0".into())),
            };
            if u.len() != p.m || x0.len() != p.n {
                return Err(CliError::Usage(format!("control needs {} components and x0 needs {}", p.m, p.n)));
            }
            integrate_forward(p, &x0, &constant_control(&grid, &u), &grid)?
        }
    };
    let mut config = Map::new();
    let source = match &problem.source {
        ProblemSource::Catalog => json!("catalog"),
        ProblemSource::File(path) => json!(path.display().to_string()),
    };
    let params: Map<String, Value> = problem.params.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    config.insert("problem".into(), json!({ "name": problem.name, "source": source, "params": params }));
    config.insert("grid".into(), json!(base.grid.intervals()));
    config.insert("seed".into(), json!(common.seed));
    config.insert(
        "candidate".into(),
        json!({
            "control_file": cand.control.as_ref().map(|p| p.display().to_string()),
            "constant_control": cand.constant_control.as_ref().map(|v| v.0.clone()),
            "x0": base.x0(),
        }),
    );
    Ok(Setup { problem, base, config })
}

fn finish(command: &'static str, status: &str, exit_code: i32, config: Map<String, Value>, results: Value) -> Report {
    Report { command, status: status.to_string(), exit_code, config: Value::Object(config), results, timing: None }
}

pub fn cmd_catalog(_: &CatalogArgs) -> Result<Report, CliError> {
    let builtin: Vec<Value> = Catalog::builtin()
        .entries()
        .iter()
        .map(|e| {
            json!({
                "name": e.name,
                "summary": e.summary,
                "params": e.params.iter().map(|s| json!({ "name": s.name, "default": s.default, "doc": s.doc })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut files = Vec::new();
    if let Some(dir) = catalog_dir() {
        for (name, parsed) in scan_catalog_dir(&dir)? {
            files.push(match parsed {
                Ok(f) => json!({ "name": name, "summary": f.summary, "params": [{ "name": "T", "default": f.horizon, "doc": "horizon" }] }),
                Err(e) => json!({ "name": name, "error": e.to_string() }),
            });
        }
    }
    let mut config = Map::new();
    config.insert("catalog_dir".into(), json!(catalog_dir().map(|d| d.display().to_string())));
    Ok(finish("catalog", "ok", 0, config, json!({ "builtin": builtin, "files": files })))
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<Report, CliError> {
    let s = setup(&a.common, &a.candidate, false)?;
    let p = &s.problem.spec;
    let res = residual(p, &s.base)?;
    let ell = p.ell(s.base.x0(), s.base.xt()).map_err(|e| CliError::Usage(format!("endpoint: {e}")))?;
    let g: Vec<f64> = (0..=s.base.grid.intervals())
        .map(|k| p.g(s.base.grid.t(k), s.base.x.row(k)).map(|v| v.into_iter().fold(f64::NEG_INFINITY, f64::max)))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("state constraint: {e}")))?;
    if let Some(path) = &a.save_trajectory {
        write_trajectory(path, &s.base)?;
    }
    let results = json!({
        "x_final": s.base.xt(),
        "cost": ell[0],
        "endpoint_values": ell,
        "max_state_constraint": if p.s() > 0 { g.iter().copied().fold(f64::NEG_INFINITY, f64::max) } else { f64::NAN },
        "first_infeasible_interval": s.base.first_infeasible_control(p, 1e-12),
        "residual": { "l1": res.l1_residual, "sup": res.sup_residual },
        "trajectory_file": a.save_trajectory.as_ref().map(|p| p.display().to_string()),
    });
    Ok(finish("simulate", "ok", 0, s.config, results))
}

fn trace_json(t: &Trace) -> Value {
    json!({
        "start_value": t.start_value,
        "stages": t.stages.iter().map(|s| json!({
            "eps": s.eps,
            "smoothed_value": s.smoothed_value,
            "true_value": s.true_value,
            "best_value": s.best_value,
            "iterations": s.iterations,
            "pg_norm": s.pg_norm,
        })).collect::<Vec<_>>(),
    })
}

fn probes_json(probes: &[(f64, f64)]) -> Value {
    Value::Array(probes.iter().map(|(l, v)| json!({ "lambda": l, "value": v })).collect())
}

fn sequence_json(seq: &[EkelandStep]) -> Value {
    Value::Array(
        seq.iter()
            .map(|s| {
                json!({
                    "m": s.m,
                    "endpoint_distance": s.endpoint_distance,
                    "j_k": s.j_k,
                    "value": s.value,
                    "trace": trace_json(&s.trace),
                })
            })
            .collect(),
    )
}

fn l1_distance(a: &Samples, b: &Samples, grid: &Grid) -> f64 {
    (0..grid.intervals()).map(|k| grid.step(k) * a.row(k).iter().zip(b.row(k)).map(|(x, y)| (x - y).abs()).sum::<f64>()).sum()
}

pub fn cmd_reduce(a: &ReduceArgs) -> Result<Report, CliError> {
    let mut s = setup(&a.common, &a.candidate, false)?;
    let p = &s.problem.spec;
    let grid = s.base.grid.clone();
    let refs = a
        .references
        .iter()
        .map(|r| {
            if r.0.len() != p.m {
                return Err(CliError::Usage(format!("--reference needs {} components", p.m)));
            }
            Ok(constant_control(&grid, &r.0))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut cfg = AlternativeConfig {
        tol_alt: a.tol_alt,
        tol_feas: a.tol_feas,
        tol_dyn: a.tol_dyn,
        minimize: MinimizeConfig { max_iters: a.max_iters, ..MinimizeConfig::default() },
        ..AlternativeConfig::default()
    };
    if let Some(l) = &a.lambda_grid {
        if l.0.iter().any(|v| !(*v > 0.0)) {
            return Err(CliError::Usage("--lambda-grid entries must be positive".into()));
        }
        cfg.lambda_grid = l.0.clone();
    }
    s.config.insert(
        "penalty".into(),
        json!({
            "lambda_grid": cfg.lambda_grid,
            "tol_alt": cfg.tol_alt,
            "tol_feas": cfg.tol_feas,
            "tol_dyn": cfg.tol_dyn,
            "tube_x": cfg.tube_x,
            "tube_u": cfg.tube_u,
            "ekeland_m": cfg.ekeland_m,
            "smoothing_schedule": cfg.minimize.smoothing_schedule,
            "max_iters": cfg.minimize.max_iters,
            "references": a.references.iter().map(|r| r.0.clone()).collect::<Vec<_>>(),
        }),
    );
    let outcome = optimality_alternative_drive(p, &s.base, &refs, &cfg)?;
    let (status, code, results, saved) = match &outcome {
        AlternativeOutcome::Nonsingular { lambda, z, value, candidate_value, trace, probes } => {
            let proc = z.to_process(&grid);
            let ell = p.ell(proc.x0(), proc.xt()).map_err(|e| CliError::Usage(format!("endpoint: {e}")))?;
            let results = json!({
                "verdict": "nonsingular",
                "lambda": lambda,
                "value": value,
                "candidate_value": candidate_value,
                "probes": probes_json(probes),
                "trace": trace_json(trace),
                "minimizer": {
                    "x_final": proc.xt(),
                    "cost": ell[0],
                    "alphas": z.alphas,
                    "control_l1_distance": l1_distance(&proc.u, &s.base.u, &grid),
                    "state_sup_distance": sup_distance(&proc.x, &s.base.x),
                },
            });
            ("nonsingular", 0, results, Some(proc))
        }
        AlternativeOutcome::Singular { sequence, probes } | AlternativeOutcome::Inconclusive { sequence, probes } => {
            let singular = matches!(outcome, AlternativeOutcome::Singular { .. });
            let verdict = if singular { "singular" } else { "inconclusive" };
            let results = json!({
                "verdict": verdict,
                "probes": probes_json(probes),
                "sequence": sequence_json(sequence),
            });
            (verdict, 1, results, sequence.last().map(|st| st.anchor.to_process(&grid)))
        }
    };
    if let (Some(path), Some(proc)) = (&a.save_trajectory, &saved) {
        write_trajectory(path, proc)?;
    }
    Ok(finish("reduce", status, code, s.config, results))
}

fn multiplier_config(m: &MultiplierArgs) -> MultiplierConfig {
    MultiplierConfig { per_axis: m.per_axis as usize, tol_active: m.tol_active, ..MultiplierConfig::default() }
}

pub fn cmd_certify_mp(a: &CertifyMpArgs) -> Result<Report, CliError> {
    let mut s = setup(&a.common, &a.candidate, false)?;
    let p = &s.problem.spec;
    let mcfg = multiplier_config(&a.multipliers);
    let tol = MpTolerances { residual: a.tol_residual, gap: a.tol_gap, active: a.multipliers.tol_active };
    let sup = SupConfig { lattice_step: Some(a.sup_step), ..SupConfig::default() };
    s.config.insert(
        "tolerances".into(),
        json!({ "residual": tol.residual, "gap": tol.gap, "active": tol.active, "sup_step": a.sup_step, "per_axis": mcfg.per_axis }),
    );
    let comps = comparison_controls(p, &s.base, mcfg.per_axis);
    let (status, code, results) = match extract_multipliers(p, &s.base, &comps, &mcfg)? {
        MultiplierOutcome::Infeasible { rows } => (
            "infeasible",
            1,
            json!({ "comparison_controls": comps.len(), "comparison_rows": rows, "multipliers": null, "mp": null }),
        ),
        MultiplierOutcome::Feasible(t) => {
            let r = mp_residuals(p, &s.base, &t, &sup, &tol)?;
            let results = json!({
                "comparison_controls": comps.len(),
                "multipliers": report::multiplier_tuple(&t),
                "mp": {
                    "transversality": r.transversality,
                    "adjoint": r.adjoint,
                    "hamiltonian_gap": r.hamiltonian_gap,
                    "gap_node": r.gap_node,
                    "slackness": r.slackness,
                    "support": r.support,
                    "sign": r.sign,
                    "normalization": r.normalization,
                    "nontriviality": r.nontriviality,
                    "total_variation": r.total_variation,
                    "pass": r.pass,
                },
            });
            if r.pass {
                ("pass", 0, results)
            } else {
                ("fail", 1, results)
            }
        }
    };
    Ok(finish("certify-mp", status, code, s.config, results))
}

fn verdict_key(v: SocVerdict) -> &'static str {
    match v {
        SocVerdict::Holds => "holds",
        SocVerdict::Violated => "violated",
        SocVerdict::Rejected => "rejected",
        SocVerdict::FirstOrderFailure => "first-order-failure",
    }
}

fn soc_json(path: &Path, beta: f64, r: &SocReport) -> Value {
    json!({
        "file": path.display().to_string(),
        "beta": beta,
        "verdict": verdict_key(r.verdict),
        "message": r.verdict.to_string(),
        "q_value": r.q_value,
        "q_max": r.q_max,
        "tol_soc": r.tol_soc,
        "h12": r.h12,
        "cone": {
            "member": r.cone.member,
            "endpoint": r.cone.endpoint.iter().map(|(i, v)| json!({ "index": i, "value": v })).collect::<Vec<_>>(),
            "equalities": r.cone.equalities.iter().map(|(i, v)| json!({ "index": i, "value": v })).collect::<Vec<_>>(),
            "state": r.cone.state,
            "violations": r.cone.violations.iter().take(MAX_LISTED).map(|v| v.to_string()).collect::<Vec<_>>(),
            "violation_count": r.cone.violations.len(),
        },
        "feasibility": {
            "feasible": r.feasibility.feasible,
            "tangent": r.feasibility.tangent,
            "second_tangent": r.feasibility.second_tangent,
            "offending_interval": r.feasibility.offending_interval,
            "xi_integral": r.feasibility.xi_integral,
        },
        "multiplier_lambdas": r.multiplier.as_ref().map(|m| m.lambdas.clone()),
        "maximizer": r.maximizer.as_ref().map(report::multiplier_tuple),
    })
}

pub fn cmd_certify_soc(a: &CertifySocArgs) -> Result<Report, CliError> {
    let mut s = setup(&a.common, &a.candidate, false)?;
    let p = &s.problem.spec;
    let cfg = SocConfig { multipliers: multiplier_config(&a.multipliers), tol_soc: a.tol_soc, tol_cone: a.tol_cone, ..SocConfig::default() };
    s.config.insert(
        "tolerances".into(),
        json!({ "soc": cfg.tol_soc, "cone": cfg.tol_cone, "active": cfg.multipliers.tol_active, "per_axis": cfg.multipliers.per_axis }),
    );
    let dirs = a
        .directions
        .iter()
        .map(|path| {
            let f = DirectionFile::read(path)?;
            Ok((path.clone(), f.beta, f.to_direction(path, &s.base)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let comps = comparison_controls(p, &s.base, cfg.multipliers.per_axis);
    let base = &s.base;
    let reports: Vec<Result<SocReport, CliError>> =
        pool(a.common.jobs)?.install(|| dirs.par_iter().map(|(_, _, d)| Ok(soc_certificate(p, base, d, &comps, &cfg)?)).collect());
    let mut rows = Vec::with_capacity(dirs.len());
    let mut worst = SocVerdict::Holds;
    for ((path, beta, _), r) in dirs.iter().zip(reports) {
        let r = r?;
        let rank = |v: SocVerdict| match v {
            SocVerdict::Holds => 0,
            SocVerdict::Rejected => 1,
            SocVerdict::Violated => 2,
            SocVerdict::FirstOrderFailure => 3,
        };
        if rank(r.verdict) > rank(worst) {
            worst = r.verdict;
        }
        rows.push(soc_json(path, *beta, &r));
    }
    let code = if worst == SocVerdict::Holds { 0 } else { 1 };
    Ok(finish("certify-soc", verdict_key(worst), code, s.config, json!({ "directions": rows })))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 || pts.len() != points.len() {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Smallest `q ≤ 10⁴` making every cumulative weight a multiple of `1/q`.
fn weight_denominator(alphas: &[f64]) -> Option<usize> {
    let cum: Vec<f64> = alphas.iter().scan(0.0, |acc, a| {
        *acc += a;
        Some(*acc)
    }).collect();
    (1..=10_000usize).find(|q| cum.iter().all(|c| (c * *q as f64 - (c * *q as f64).round()).abs() <= 1e-9 * *q as f64))
}

pub fn cmd_chatter(a: &ChatterArgs) -> Result<Report, CliError> {
    if a.candidate.control.is_some() {
        return Err(CliError::Usage("chatter uses a constant base control; pass --constant-control instead of --control".into()));
    }
    let mut s = setup(&a.common, &a.candidate, false)?;
    let p = &s.problem.spec;
    let u = s.base.u.row(0).to_vec();
    let refs: Vec<Vec<f64>> = if a.references.is_empty() {
        let (_, hi) = p
            .control_set
            .at(0.0)
            .box_bounds(&u)
            .ok_or_else(|| CliError::Usage("control set is not a box: pass --reference".into()))?;
        vec![hi]
    } else {
        a.references.iter().map(|r| r.0.clone()).collect()
    };
    if refs.iter().any(|r| r.len() != p.m) {
        return Err(CliError::Usage(format!("--reference needs {} components", p.m)));
    }
    let alphas = match &a.alpha {
        Some(v) => v.0.clone(),
        None => {
            let alpha = s.problem.params.iter().find(|(k, _)| k == "alpha").map_or(0.5, |(_, v)| *v);
            vec![alpha / refs.len() as f64; refs.len()]
        }
    };
    if alphas.len() != refs.len() {
        return Err(CliError::Usage(format!("{} weights for {} references", alphas.len(), refs.len())));
    }
    let q = weight_denominator(&alphas).ok_or_else(|| CliError::Usage("weights must be rational with denominator at most 10000".into()))?;
    let base_n = s.base.grid.intervals();
    s.config.insert(
        "chatter".into(),
        json!({ "references": refs, "alphas": alphas, "s": a.s.0, "base_control": u }),
    );
    let x0 = s.base.x0().to_vec();
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &pieces in &a.s.0 {
        let unit = pieces * q;
        let intervals = unit * base_n.div_ceil(unit).max(1);
        let grid = Grid::uniform(p.horizon, intervals).map_err(|e| CliError::Usage(e.to_string()))?;
        let ubar = constant_control(&grid, &u);
        let ref_samples: Vec<Samples> = refs.iter().map(|r| constant_control(&grid, r)).collect();
        let relaxed = integrate_relaxed(p, &x0, &ubar, &ref_samples, &alphas, &grid)?;
        let chatter = chattering_control(&ubar, &ref_samples, &alphas, pieces, &grid)?;
        let actual = integrate_forward(p, &x0, &chatter, &grid)?;
        let err = sup_distance(&actual.x, &relaxed.x);
        points.push((pieces as f64, err));
        rows.push(json!({ "s": pieces, "intervals": intervals, "sup_error": err, "scaled_error": err * pieces as f64 }));
    }
    let results = json!({ "table": rows, "slope": log_log_slope(&points), "horizon": p.horizon });
    Ok(finish("chatter", "ok", 0, s.config, results))
}

/// Independent per-sample seed, so results do not depend on `--jobs`.
fn sample_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn cmd_regularity(a: &RegularityArgs) -> Result<Report, CliError> {
    let mut s = setup(&a.common, &a.candidate, true)?;
    let p = &s.problem.spec;
    let amplitude = a.amplitude.unwrap_or(0.1 * a.eps0);
    s.config.insert("regularity".into(), json!({ "samples": a.samples, "eps0": a.eps0, "amplitude": amplitude }));
    let check = |proc: &ControlProcess, seed: u64| -> Result<Value, CliError> {
        let mut rng = SeededRng::new(seed);
        Ok(match regularity_check(p, proc, a.eps0, &mut rng) {
            Ok(r) => json!({
                "residual": r.residual,
                "lipschitz_integral": r.lipschitz_integral,
                "constant": r.constant,
                "bound": r.bound,
                "realized_distance": r.realized_distance,
                "holds": r.holds,
            }),
            Err(TrajectoryError::HypothesisViolated { lhs, eps0 }) => {
                json!({ "hypothesis_violated": { "lhs": lhs, "eps0": eps0 }, "holds": false })
            }
            Err(e) => return Err(e.into()),
        })
    };
    let base_row = check(&s.base, a.common.seed)?;
    let base = &s.base;
    let rows: Vec<Result<Value, CliError>> = pool(a.common.jobs)?.install(|| {
        (0..a.samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = SeededRng::new(sample_seed(a.common.seed, i));
                let perturbed = perturb_process(base, amplitude, &mut rng);
                let mut row = check(&perturbed, sample_seed(a.common.seed, i).rotate_left(17))?;
                row["sample"] = json!(i);
                row["perturbation_sup"] = json!(sup_distance(&perturbed.x, &base.x));
                Ok(row)
            })
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let all: Vec<&Value> = std::iter::once(&base_row).chain(&rows).collect();
    let hypothesis = all.iter().filter(|r| r.get("hypothesis_violated").is_some()).count();
    let violations = all.iter().filter(|r| r.get("hypothesis_violated").is_none() && r["holds"] == json!(false)).count();
    let (status, code) = match (hypothesis, violations) {
        (0, 0) => ("holds", 0),
        (0, _) => ("violated", 1),
        _ => ("hypothesis-violated", 1),
    };
    let results = json!({
        "base": base_row,
        "samples": rows,
        "violations": violations,
        "hypothesis_violations": hypothesis,
    });
    Ok(finish("regularity", status, code, s.config, results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1000.0].iter().map(|s| (*s, 0.25 / s)).collect();
        assert!((log_log_slope(&pts).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(log_log_slope(&[(10.0, 0.0), (100.0, 1.0)]), None);
    }

    #[test]
    fn denominators() {
        assert_eq!(weight_denominator(&[0.5]), Some(2));
        assert_eq!(weight_denominator(&[0.25, 0.5]), Some(4));
        assert_eq!(weight_denominator(&[0.3]), Some(10));
    }
}
