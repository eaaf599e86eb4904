use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::model::catalog::Catalog;
use crate::model::control_set::ControlSet;
use crate::trajectory::{constant_control, integrate_forward, step_control};

fn cat(name: &str) -> ProblemSpec {
    Catalog::builtin().build(name, &[]).unwrap()
}

fn forward(p: &ProblemSpec, x0: &[f64], u: &Samples, grid: &Grid) -> ControlProcess {
    integrate_forward(p, x0, u, grid).unwrap()
}

#[test]
fn psi_cases() {
    let p = cat("state-bound");
    let g = Grid::uniform(1.0, 100).unwrap();
    // ride the bound: u = 1 until t = 0.5, then 0
    let opt = forward(&p, &[0.0], &step_control(&g, &[1.0], 0.5, &[0.0]), &g);
    let ref_cost = p.ell(opt.x0(), opt.xt()).unwrap()[0];
    assert!(psi(&p, &opt.x, &g, ref_cost, 0.0).unwrap().abs() < 1e-12);
    let lq = cat("lq-scalar");
    let lower = forward(&lq, &[0.0], &constant_control(&g, &[-1.0]), &g);
    assert!(psi(&lq, &lower.x, &g, 0.0, 0.0).unwrap() < 0.0);
    let ex = cat("example-5-1");
    let cand = forward(&ex, &[0.0, 0.0], &constant_control(&g, &[0.0]), &g);
    assert_eq!(psi(&ex, &cand.x, &g, 0.0, 0.0).unwrap(), 0.0);
}

#[test]
fn endpoint_distance_cases() {
    let ctl = ControlSet::boxed(vec![0.0], vec![1.0]);
    let p = ProblemSpec::from_sources(1, 1, 1.0, 0, &["u1"], &[], &["x2", "x1"], ctl.clone()).unwrap();
    assert_eq!(endpoint_distance(&p, &[0.0], &[5.0]).unwrap(), 0.0);
    assert!((endpoint_distance(&p, &[0.3], &[5.0]).unwrap() - 0.3).abs() < 1e-15);
    let q = ProblemSpec::from_sources(1, 1, 1.0, 1, &["u1"], &[], &["x2", "x1"], ctl).unwrap();
    assert_eq!(endpoint_distance(&q, &[-5.0], &[0.0]).unwrap(), 0.0);
}

#[test]
fn j_k_cases() {
    let p = cat("lq-scalar");
    let g = Grid::uniform(1.0, 50).unwrap();
    let z = DecisionVector { x: Samples::zeros(51, 1), u: constant_control(&g, &[1.0]), alphas: vec![] };
    assert!((j_k(&p, &g, &z, &[]).unwrap() - 1.0).abs() < 1e-12);
    let sol = forward(&p, &[0.0], &constant_control(&g, &[1.0]), &g);
    assert!(j_k(&p, &g, &DecisionVector::from_process(&sol, 0), &[]).unwrap() < 1e-12);
    // relaxed solution with one reference and α = 0.5
    let refs = vec![constant_control(&g, &[-1.0])];
    let rel = crate::trajectory::integrate_relaxed(&p, &[0.0], &constant_control(&g, &[1.0]), &refs, &[0.5], &g).unwrap();
    let z = DecisionVector { x: rel.x, u: rel.u, alphas: vec![0.5] };
    assert!(j_k(&p, &g, &z, &refs).unwrap() < 1e-12);
}

#[test]
fn functional_values() {
    let p = cat("lq-scalar");
    let g = Grid::uniform(1.0, 40).unwrap();
    let opt = forward(&p, &[0.0], &constant_control(&g, &[-1.0]), &g);
    let f = PenaltyFunctional::nonsingular(&p, g.clone(), -1.0, 1.0);
    assert!(f.value(&DecisionVector::from_process(&opt, 0)).unwrap().abs() < 1e-12);

    // Ekeland mode at its own anchor: λψₘ + d
    let off = forward(&p, &[0.2], &constant_control(&g, &[0.0]), &g);
    let anchor = DecisionVector::from_process(&off, 0);
    let fe = PenaltyFunctional { mode: Mode::Ekeland { lambda: 0.5, m: 10.0, anchor: anchor.clone() }, ..f.clone() };
    let expect = 0.5 * (0.2 + 1.0 + 0.01) + 0.2;
    assert!((fe.value(&anchor).unwrap() - expect).abs() < 1e-12);

    // Example 5.1 descent: value = λ x₂(1) < 0 up to quadrature error
    let ex = cat("example-5-1");
    let g = Grid::uniform(1.0, 200).unwrap();
    let needle = forward(&ex, &[0.0, 0.0], &step_control(&g, &[0.75], 0.1, &[0.0]), &g);
    let f = PenaltyFunctional::nonsingular(&ex, g.clone(), 0.0, 1.0);
    let v = f.value(&DecisionVector::from_process(&needle, 0)).unwrap();
    assert!(v < 0.0);
    assert!((v - needle.xt()[1]).abs() < 1e-5, "{} vs {}", v, needle.xt()[1]);
}

#[test]
fn components_are_nonnegative_at_feasible_costlier_points() {
    let p = cat("lq-scalar");
    let g = Grid::uniform(1.0, 40).unwrap();
    let f = PenaltyFunctional::nonsingular(&p, g.clone(), -1.0, 1.0);
    for u in [-0.5, 0.0, 0.7] {
        let z = DecisionVector::from_process(&forward(&p, &[0.0], &constant_control(&g, &[u]), &g), 0);
        let c = f.components(&z).unwrap();
        assert!(c.iter().all(|v| *v >= -1e-15), "{:?}", c);
        assert!((f.value(&z).unwrap() - (u + 1.0)).abs() < 1e-12);
    }
}

fn fd_check(f: &PenaltyFunctional, z: &DecisionVector, eps: f64) {
    let (_, g) = f.smoothed(z, eps).unwrap();
    let base = z.flatten();
    let h = 1e-6;
    for i in 0..base.len() {
        let mut zp = z.clone();
        let mut v = base.clone();
        v[i] += h;
        zp.unflatten(&v);
        let fp = f.smoothed(&zp, eps).unwrap().0;
        v[i] -= 2.0 * h;
        zp.unflatten(&v);
        let fm = f.smoothed(&zp, eps).unwrap().0;
        let fd = (fp - fm) / (2.0 * h);
        assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + fd.abs()), "coord {}: fd {} vs {}", i, fd, g[i]);
    }
}

#[test]
fn smoothed_gradient_matches_differences() {
    let p = cat("state-bound");
    let g = Grid::uniform(1.0, 6).unwrap();
    let mut rng = crate::rng::SeededRng::new(7);
    let x = Samples::from_fn(7, 1, |_| vec![rng.range(-0.5, 0.8)]);
    let u = Samples::from_fn(6, 1, |_| vec![rng.range(-1.0, 1.0)]);
    let refs = vec![Samples::from_fn(6, 1, |_| vec![rng.range(-1.0, 1.0)])];
    let z = DecisionVector { x: x.clone(), u: u.clone(), alphas: vec![0.3] };
    let mut f = PenaltyFunctional::nonsingular(&p, g.clone(), -0.3, 0.7);
    f.u_refs = refs.clone();
    fd_check(&f, &z, 1e-2);
    let anchor = DecisionVector { x: Samples::zeros(7, 1), u: Samples::zeros(6, 1), alphas: vec![0.1] };
    f.mode = Mode::Ekeland { lambda: 0.4, m: 10.0, anchor };
    fd_check(&f, &z, 1e-2);

    let ex = cat("example-5-1");
    let x = Samples::from_fn(7, 2, |_| vec![rng.range(-0.5, 0.5), rng.range(-0.5, 0.5)]);
    let z = DecisionVector { x, u, alphas: vec![] };
    let f = PenaltyFunctional::nonsingular(&ex, g, 0.0, 1.0);
    fd_check(&f, &z, 1e-2);
}

#[test]
fn alpha_projection() {
    let mut a = vec![0.8, 0.6, -0.2];
    project_alphas(&mut a);
    assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    assert!((a[0] - 0.6).abs() < 1e-15 && (a[1] - 0.4).abs() < 1e-15 && a[2] == 0.0);
    let mut b = vec![0.2, 0.3];
    project_alphas(&mut b);
    assert_eq!(b, vec![0.2, 0.3]);
}

#[test]
fn minimize_keeps_exact_optimum() {
    let p = cat("lq-scalar");
    let g = Grid::uniform(1.0, 50).unwrap();
    let opt = forward(&p, &[0.0], &constant_control(&g, &[-1.0]), &g);
    let f = PenaltyFunctional::nonsingular(&p, g.clone(), -1.0, 0.5);
    let z0 = DecisionVector::from_process(&opt, 0);
    let v0 = f.value(&z0).unwrap();
    let (z, trace) = f.minimize(&z0, &MinimizeConfig::default()).unwrap();
    assert!((f.value(&z).unwrap() - v0).abs() <= 1e-10);
    assert!(trace.final_value() <= trace.stages[0].best_value + 1e-9);
}

#[test]
fn minimize_recovers_lq_optimum() {
    let p = cat("lq-scalar");
    let g = Grid::uniform(1.0, 50).unwrap();
    let start = forward(&p, &[0.0], &constant_control(&g, &[0.0]), &g);
    let f = PenaltyFunctional::nonsingular(&p, g.clone(), 0.0, 0.5);
    let (z, trace) = f.minimize(&DecisionVector::from_process(&start, 0), &MinimizeConfig::default()).unwrap();
    let l1: f64 = (0..50).map(|k| g.step(k) * (z.u.row(k)[0] + 1.0).abs()).sum();
    assert!(l1 <= 1e-3, "L1 error {}", l1);
    assert!((z.x.row(50)[0] + 1.0).abs() <= 1e-3);
    let vals: Vec<f64> = trace.stages.iter().map(|s| s.best_value).collect();
    assert!(vals.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn zero_lambda_feasible_anchor() {
    let p = cat("lq-scalar");
    let g = Grid::uniform(1.0, 30).unwrap();
    let feas = forward(&p, &[0.0], &constant_control(&g, &[0.3]), &g);
    let f = PenaltyFunctional::nonsingular(&p, g.clone(), 0.3, 0.0);
    let z0 = DecisionVector::from_process(&feas, 0);
    assert!(f.value(&z0).unwrap().abs() < 1e-12);
    let (_, trace) = f.minimize(&z0, &MinimizeConfig::default()).unwrap();
    assert!(trace.final_value() <= 1e-9);
}

#[test]
fn alternative_on_example_is_nonsingular() {
    let p = cat("example-5-1");
    let g = Grid::uniform(1.0, 50).unwrap();
    let cand = forward(&p, &[0.0, 0.0], &constant_control(&g, &[0.0]), &g);
    match optimality_alternative_drive(&p, &cand, &[], &AlternativeConfig::default()).unwrap() {
        AlternativeOutcome::Nonsingular { lambda, value, .. } => {
            assert_eq!(lambda, 1.0);
            assert!(value >= -1e-7);
        }
        other => panic!("unexpected {:?}", other),
    }
}

#[test]
fn alternative_on_unreachable_endpoint_is_singular() {
    let p = cat("unreachable-endpoint");
    let g = Grid::uniform(1.0, 20).unwrap();
    let cand = forward(&p, &[0.0], &constant_control(&g, &[0.0]), &g);
    match optimality_alternative_drive(&p, &cand, &[], &AlternativeConfig::default()).unwrap() {
        AlternativeOutcome::Singular { sequence, .. } => {
            assert_eq!(sequence.len(), 3);
            assert!(sequence.iter().all(|s| s.endpoint_distance > 0.5 && s.j_k <= 1e-6));
        }
        other => panic!("unexpected {:?}", other),
    }
}

#[test]
fn alternative_without_constraints_is_trivial() {
    let p = cat("relax-demo");
    let g = Grid::uniform(1.0, 10).unwrap();
    let cand = forward(&p, &[0.0], &constant_control(&g, &[0.0]), &g);
    assert!(matches!(
        optimality_alternative_drive(&p, &cand, &[], &AlternativeConfig::default()).unwrap(),
        AlternativeOutcome::Nonsingular { lambda, .. } if lambda == 1.0
    ));
}
