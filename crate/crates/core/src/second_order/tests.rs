use alloc::vec;
use alloc::string::ToString;
use alloc::vec::Vec;

use super::*;
use crate::first_order::{comparison_controls, integrate_adjoint};
use crate::grid::Grid;
use crate::model::catalog::Catalog;
use crate::model::control_set::ControlSet;
use crate::rng::SeededRng;
use crate::trajectory::{constant_control, integrate_forward, step_control};

const PI: f64 = core::f64::consts::PI;

fn ex51(n: usize) -> (ProblemSpec, ControlProcess) {
    let p = Catalog::builtin().build("example-5-1", &[]).unwrap();
    let g = Grid::uniform(1.0, n).unwrap();
    let base = integrate_forward(&p, &[0.0, 0.0], &constant_control(&g, &[0.0]), &g).unwrap();
    (p, base)
}

/// `λ₀ = 1`, `λ₂ = −1`, `p ≡ (0, −1)`.
fn canonical(p: &ProblemSpec, base: &ControlProcess) -> MultiplierTuple {
    let lambdas = vec![1.0, 0.0, -1.0];
    let costate = integrate_adjoint(p, base, &lambdas, &[]).unwrap();
    MultiplierTuple { lambdas, measures: Vec::new(), costate }
}

fn violating_direction(base: &ControlProcess, eps: f64) -> CriticalDirection {
    let g = &base.grid;
    CriticalDirection::new(vec![0.0, 0.0], constant_control(g, &[0.0]), 1.0, step_control(g, &[0.75], eps, &[0.0]))
}

fn random_nonneg(rng: &mut SeededRng, grid: &Grid) -> Samples {
    let pieces = 1 + (rng.uniform() * 5.0) as usize;
    let levels: Vec<f64> = (0..pieces).map(|_| rng.uniform()).collect();
    Samples::from_fn(grid.intervals(), 1, |k| vec![levels[k * pieces / grid.intervals()]])
}

fn trapezoid_h1u(h: &Samples, u: &Samples, grid: &Grid) -> f64 {
    (0..grid.intervals()).map(|k| 0.5 * grid.step(k) * u.row(k)[0] * (h.row(k)[0] + h.row(k + 1)[0])).sum()
}

#[test]
fn cone_membership() {
    let (p, base) = ex51(100);
    let zero = CriticalDirection::zero(&p, &base);
    let r = critical_cone_check(&p, &base, &zero, 1e-9).unwrap();
    assert!(r.member, "{:?}", r.violations);

    let up = CriticalDirection::new(vec![0.0, 0.0], constant_control(&base.grid, &[1.0]), 0.0, base.u.clone());
    let r = critical_cone_check(&p, &base, &up, 1e-9).unwrap();
    assert!(r.member);
    assert_eq!(r.endpoint.len(), 1);
    assert!(r.endpoint[0].1.abs() < 1e-12);

    let down = CriticalDirection::new(vec![0.0, 0.0], constant_control(&base.grid, &[-1.0]), 0.0, base.u.clone());
    let r = critical_cone_check(&p, &base, &down, 1e-9).unwrap();
    assert!(!r.member);
    assert_eq!(r.violations[0], ConeViolation::Tangent { interval: 0 });

    let r = critical_cone_check(&p, &base, &violating_direction(&base, 0.1), 1e-9).unwrap();
    assert!(r.member, "{:?}", r.violations);
}

#[test]
fn feasibility_on_unit_box() {
    let (p, base) = ex51(10);
    let g = &base.grid;
    let grid = default_lambda_grid();
    let one = constant_control(g, &[1.0]);
    let r = second_order_feasibility_check(&p, &base, &one, None, &grid, 1e-12).unwrap();
    assert!(r.feasible);
    assert!(r.xi.iter().all(|v| *v == 0.0));
    assert_eq!(r.xi_integral, 0.0);

    let r = second_order_feasibility_check(&p, &base, &constant_control(g, &[-1.0]), None, &grid, 1e-12).unwrap();
    assert!(!r.tangent && !r.feasible);
    assert_eq!(r.offending_interval, Some(0));

    let zero = constant_control(g, &[0.0]);
    let r = second_order_feasibility_check(&p, &base, &zero, Some(&one), &grid, 1e-12).unwrap();
    assert!(r.feasible && r.xi_integral == 0.0);
    let r = second_order_feasibility_check(&p, &base, &zero, Some(&constant_control(g, &[-1.0])), &grid, 1e-12).unwrap();
    assert!(r.tangent && !r.second_tangent);

    // Brute force: d(ū + tu + t²v, U) = o(t²) exactly when v ∈ T².
    let region = p.control_set.at(0.0);
    for (u, v, inside) in [(0.0, 1.0, true), (0.0, -1.0, false), (1.0, -3.0, true), (0.0, 0.0, true)] {
        let worst = [1e-2, 1e-3, 1e-4].iter().map(|t| region.project(&[t * u + t * t * v]).1 / (t * t)).fold(0.0, f64::max);
        let closed = region.second_order_tangent(&[0.0], &[u], 1e-12).is_some_and(|c| c[0].contains(v, 1e-12));
        assert_eq!(closed, inside);
        assert_eq!(worst < 1e-9, inside);
    }

    let finite = ProblemSpec::from_sources(1, 1, 1.0, 0, &["u1"], &[], &["x2"], ControlSet::finite(vec![vec![0.0], vec![1.0]])).unwrap();
    let r = second_order_feasibility_check(&finite, &base_for(&finite, 10), &constant_control(g, &[0.5]), None, &grid, 1e-12).unwrap();
    assert!(!r.feasible);
}

fn base_for(p: &ProblemSpec, n: usize) -> ControlProcess {
    let g = Grid::uniform(1.0, n).unwrap();
    integrate_forward(p, &[0.0], &constant_control(&g, &[0.0]), &g).unwrap()
}

#[test]
fn example_form_beta_zero() {
    let (p, base) = ex51(200);
    let mult = canonical(&p, &base);
    let mut dir = CriticalDirection::new(vec![0.0, 0.0], constant_control(&base.grid, &[1.0]), 0.0, base.u.clone());
    dir.integrate(&p, &base).unwrap();
    let q = quadratic_form(&p, &base, &mult, &dir).unwrap();
    assert!((q - PI).abs() < 1e-6 * PI, "{q}");

    let zero = CriticalDirection::zero(&p, &base);
    assert_eq!(quadratic_form(&p, &base, &mult, &zero).unwrap(), 0.0);

    let mut rng = SeededRng::new(7);
    for _ in 0..20 {
        let u = random_nonneg(&mut rng, &base.grid);
        let mut d = CriticalDirection::new(vec![0.0, 0.0], u.clone(), 0.0, base.u.clone());
        let h = d.integrate(&p, &base).unwrap().clone();
        let oracle = 2.0 * PI * trapezoid_h1u(&h, &u, &base.grid);
        let q = quadratic_form(&p, &base, &mult, &d).unwrap();
        assert!((q - oracle).abs() <= 1e-6 * oracle.abs().max(1e-12), "{q} vs {oracle}");
        let r = reduced_quadratic_form(&p, &base, &mult, &d).unwrap();
        assert!((q - r).abs() <= 1e-10 * (1.0 + q.abs()), "{q} vs {r}");
    }
}

#[test]
fn example_form_beta_one_is_negative() {
    let (p, base) = ex51(200);
    let mult = canonical(&p, &base);
    let eps = 0.1;
    let q = quadratic_form(&p, &base, &mult, &violating_direction(&base, eps)).unwrap();
    let oracle = -0.75 * eps * eps / 2.0;
    assert!((q - oracle).abs() < 1e-9, "{q}");
}

#[test]
fn certificate_on_example() {
    let (p, base) = ex51(50);
    let cfg = SocConfig::default();
    let comps = comparison_controls(&p, &base, 5);
    let dir = CriticalDirection::new(vec![0.0, 0.0], constant_control(&base.grid, &[1.0]), 0.0, base.u.clone());
    let r = soc_certificate(&p, &base, &dir, &comps, &cfg).unwrap();
    assert_eq!(r.verdict, SocVerdict::Holds);
    let (qv, qm) = (r.q_value.unwrap(), r.q_max.unwrap());
    assert!((qm - PI / 2.0).abs() < 1e-6, "{qm}");
    assert!(qm >= qv);
    assert!(r.h12);
    let m = r.multiplier.unwrap();
    assert!((quadratic_form(&p, &base, &m, &dir).unwrap() - qv).abs() < 1e-9);

    let r = soc_certificate(&p, &base, &violating_direction(&base, 0.1), &comps, &cfg).unwrap();
    assert_eq!(r.verdict, SocVerdict::Violated);
    assert!((r.q_max.unwrap() + 0.75 * 0.01 / 4.0).abs() < 1e-9, "{:?}", r.q_max);
    assert!(r.verdict.to_string().contains("VIOLATED"));

    let down = CriticalDirection::new(vec![0.0, 0.0], constant_control(&base.grid, &[-1.0]), 0.0, base.u.clone());
    assert_eq!(soc_certificate(&p, &base, &down, &comps, &cfg).unwrap().verdict, SocVerdict::Rejected);
}

#[test]
fn certificate_reports_first_order_failure() {
    let p = Catalog::builtin().build("lq-scalar", &[]).unwrap();
    let g = Grid::uniform(1.0, 20).unwrap();
    let base = integrate_forward(&p, &[0.0], &constant_control(&g, &[0.0]), &g).unwrap();
    let comps = comparison_controls(&p, &base, 5);
    let dir = CriticalDirection::zero(&p, &base);
    let r = soc_certificate(&p, &base, &dir, &comps, &SocConfig::default()).unwrap();
    assert_eq!(r.verdict, SocVerdict::FirstOrderFailure);
    assert!(r.q_max.is_none());
}

#[test]
fn q_max_monotone_in_comparisons() {
    let (p, base) = ex51(20);
    let cfg = SocConfig::default();
    let all = comparison_controls(&p, &base, 5);
    let dir = violating_direction(&base, 0.1);
    let mut last = f64::INFINITY;
    for take in [0, 5, 20, all.len()] {
        let r = soc_certificate(&p, &base, &dir, &all[..take], &cfg).unwrap();
        let q = r.q_max.unwrap();
        assert!(q <= last + 1e-12, "{q} > {last}");
        last = q;
    }
}

#[test]
fn affine_in_multiplier() {
    let p = Catalog::builtin().build("state-bound", &[]).unwrap();
    let g = Grid::uniform(1.0, 40).unwrap();
    let base = integrate_forward(&p, &[0.0], &step_control(&g, &[1.0], 0.5, &[0.0]), &g).unwrap();
    let mut rng = SeededRng::new(3);
    let mut dir = CriticalDirection::new(vec![0.3], Samples::from_fn(40, 1, |_| vec![rng.uniform() - 0.5]), 0.0, base.u.clone());
    dir.integrate(&p, &base).unwrap();
    let measure = |rng: &mut SeededRng| Measure { constraint: 0, nodes: vec![10, 20, 40], weights: (0..3).map(|_| rng.uniform()).collect() };
    for _ in 0..10 {
        let (l1, l2) = ([rng.uniform(), rng.uniform()], [rng.uniform(), -rng.uniform()]);
        let (m1, m2) = (measure(&mut rng), measure(&mut rng));
        let q1 = quadratic_form_from_weights(&p, &base, &l1, &[m1.clone()], &dir).unwrap();
        let q2 = quadratic_form_from_weights(&p, &base, &l2, &[m2.clone()], &dir).unwrap();
        let c = rng.uniform();
        let lam: Vec<f64> = l1.iter().zip(&l2).map(|(a, b)| c * a + (1.0 - c) * b).collect();
        let mix = Measure { constraint: 0, nodes: m1.nodes.clone(), weights: m1.weights.iter().zip(&m2.weights).map(|(a, b)| c * a + (1.0 - c) * b).collect() };
        let q = quadratic_form_from_weights(&p, &base, &lam, &[mix], &dir).unwrap();
        assert!((q - (c * q1 + (1.0 - c) * q2)).abs() <= 1e-9, "{q}");
    }
}

#[test]
fn quadratically_homogeneous() {
    let (p, base) = ex51(50);
    let mult = canonical(&p, &base);
    let mut rng = SeededRng::new(11);
    let u = random_nonneg(&mut rng, &base.grid);
    let v = Samples::from_fn(50, 1, |_| vec![rng.uniform()]);
    let mut w = base.u.clone();
    w.row_mut(3)[0] = 0.4;
    let dir = CriticalDirection::new(vec![0.0, 0.0], u, 0.7, w).with_v(v);
    let q = quadratic_form(&p, &base, &mult, &dir).unwrap();
    for c in [0.5, 2.0, 3.0] {
        let qc = quadratic_form(&p, &base, &mult, &dir.scaled(c)).unwrap();
        assert!((qc - c * c * q).abs() <= 1e-8 * (c * c * q).abs(), "{c}: {qc} vs {}", c * c * q);
    }
}

#[test]
fn abstract_smooth_quadratic() {
    // g(y) = y, F₀ = x1² + 3 x2² + x1 x2; minimum at 0.
    let m = AbstractModel::from_sources(2, 0, vec![vec![1.0]], &[&["x1^2 + 3*x2^2 + x1*x2"]], None).unwrap();
    let dir = AbstractDirection { h: vec![1.0, -2.0], u: vec![], beta: vec![], v: vec![] };
    let r = abstract_model_check(&m, &[0.0, 0.0], &[], &dir, 1e-9).unwrap();
    assert!(r.holds);
    assert_eq!(r.maximizer.unwrap(), vec![1.0]);
    let hess = 2.0 * 1.0 + 6.0 * 4.0 + 2.0 * (1.0 * -2.0);
    assert!((r.sup_form.unwrap() - hess).abs() < 1e-6);
}

#[test]
fn abstract_absolute_value() {
    let m = AbstractModel::from_sources(1, 0, vec![vec![1.0], vec![-1.0]], &[&["x1^2"]], None).unwrap();
    for h in [0.5, -1.0, 2.0] {
        let dir = AbstractDirection { h: vec![h], u: vec![], beta: vec![], v: vec![] };
        let r = abstract_model_check(&m, &[0.0], &[], &dir, 1e-9).unwrap();
        assert_eq!(r.active, vec![0, 1]);
        assert!((r.sup_form.unwrap() - 2.0 * h * h).abs() < 1e-6);
        assert!(r.holds);
    }
}

#[test]
fn abstract_rejects_non_critical() {
    // g(y) = y, F₀ = x1: not stationary, and h = 1 raises g.
    let m = AbstractModel::from_sources(1, 0, vec![vec![1.0]], &[&["x1"]], None).unwrap();
    let dir = AbstractDirection { h: vec![1.0], u: vec![], beta: vec![], v: vec![] };
    let r = abstract_model_check(&m, &[0.0], &[], &dir, 1e-9).unwrap();
    assert!(matches!(r.violation, Some(AbstractViolation::Critical { excess }) if (excess - 1.0).abs() < 1e-12));
    assert!(r.lambda_empty && !r.holds);
}

#[test]
fn abstract_alpha_direction() {
    // g(y) = y, F₀ = x1², F₁ = 1 + x1: β enters through the cross term 2βF₁ₓh.
    let m = AbstractModel::from_sources(1, 0, vec![vec![1.0]], &[&["x1^2"], &["1 + x1"]], None).unwrap();
    let dir = AbstractDirection { h: vec![1.0], u: vec![], beta: vec![0.0], v: vec![] };
    assert!(abstract_model_check(&m, &[0.0], &[], &dir, 1e-9).unwrap().holds);
    let dir = AbstractDirection { h: vec![1.0], u: vec![], beta: vec![0.5], v: vec![] };
    let r = abstract_model_check(&m, &[0.0], &[], &dir, 1e-9).unwrap();
    assert!(matches!(r.violation, Some(AbstractViolation::Critical { .. })));
}
