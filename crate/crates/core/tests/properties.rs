//! Randomized properties of the differentiation, adjoint, multiplier and
//! second-order machinery.

use plab_core::first_order::{comparison_controls, AdjointOperator, Column, MultiplierConfig, MultiplierSystem};
use plab_core::grid::{Grid, Samples};
use plab_core::model::control_set::{BoxSet, Region};
use plab_core::model::expr::{BinOp, Func, Func2, Pwc, Var};
use plab_core::second_order::{
    abstract_model_check, quadratic_form_from_weights, AbstractDirection, AbstractModel, CriticalDirection,
};
use plab_core::trajectory::{constant_control, integrate_forward, step_control};
use plab_core::{parse_expr, Catalog, ControlProcess, Expr, ProblemSpec};
use proptest::prelude::*;

fn cat(name: &str) -> ProblemSpec {
    Catalog::builtin().build(name, &[]).unwrap()
}

fn process(p: &ProblemSpec, x0: &[f64], u: Samples, grid: &Grid) -> ControlProcess {
    integrate_forward(p, x0, &u, grid).unwrap()
}

/// Smooth trees over `x1..x3, u1, t` whose values stay moderate on `[-1,1]`.
fn smooth_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-2.0..2.0f64).prop_map(Expr::Num),
        (0..3usize).prop_map(|i| Expr::Var(Var::X(i))),
        Just(Expr::Var(Var::U(0))),
        Just(Expr::Var(Var::T)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::bin(BinOp::Sub, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
            inner.clone().prop_map(Expr::neg),
            inner.clone().prop_map(|a| Expr::call(Func::Sin, a)),
            inner.clone().prop_map(|a| Expr::call(Func::Cos, a)),
            inner.clone().prop_map(|a| Expr::call(Func::Exp, Expr::call(Func::Sin, a))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::bin(BinOp::Div, a, Expr::add(Expr::num(2.5), Expr::call(Func::Cos, b)))),
            (inner.clone(), 2..4u32).prop_map(|(a, k)| Expr::bin(BinOp::Pow, a, Expr::num(k as f64))),
            inner.prop_map(|a| Expr::call(Func::Sqrt, Expr::add(Expr::num(1.5), Expr::call(Func::Sin, a)))),
        ]
    })
}

/// Any tree the grammar can print, including kinks and time tables.
fn any_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-1e3..1e3f64).prop_map(Expr::Num),
        Just(Expr::Pi),
        (0..3usize).prop_map(|i| Expr::Var(Var::X(i))),
        (0..2usize).prop_map(|j| Expr::Var(Var::U(j))),
        Just(Expr::Var(Var::T)),
        (prop::collection::vec(-5.0..5.0f64, 2..4)).prop_map(|v| {
            let breaks: Vec<f64> = (1..v.len()).map(|i| i as f64 / v.len() as f64).collect();
            Expr::Pwc(Pwc::new(v, breaks).unwrap())
        }),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        let op = prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div), Just(BinOp::Pow)];
        let f = prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp), Just(Func::Log), Just(Func::Sqrt), Just(Func::Abs)];
        let f2 = prop_oneof![Just(Func2::Max2), Just(Func2::Min2)];
        prop_oneof![
            (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::bin(o, a, b)),
            inner.clone().prop_map(Expr::neg),
            (f, inner.clone()).prop_map(|(f, a)| Expr::call(f, a)),
            (f2, inner.clone(), inner).prop_map(|(f, a, b)| Expr::Call2(f, Box::new(a), Box::new(b))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gradient_matches_central_differences(e in smooth_expr(), z in prop::collection::vec(-1.0..1.0f64, 5)) {
        let (t, x, u) = (0.5 * (z[4] + 1.0), &z[..3], &z[3..4]);
        let v = e.eval(t, x, u).unwrap();
        let (gx, gu) = e.grad(t, x, u).unwrap();
        let ad: Vec<f64> = gx.into_iter().chain(gu).collect();
        let h = 1e-6;
        for i in 0..4 {
            let mut zp = z[..4].to_vec();
            let mut zm = z[..4].to_vec();
            zp[i] += h;
            zm[i] -= h;
            let fd = (e.eval(t, &zp[..3], &zp[3..]).unwrap() - e.eval(t, &zm[..3], &zm[3..]).unwrap()) / (2.0 * h);
            let scale = 1.0 + ad[i].abs() + v.abs();
            prop_assert!((ad[i] - fd).abs() <= 1e-6 * scale, "{}: d{} ad {} fd {}", e, i, ad[i], fd);
        }
    }

    #[test]
    fn printing_then_parsing_is_identity(e in any_expr()) {
        let text = e.to_string();
        let back = parse_expr(&text, 3, 2).unwrap();
        prop_assert_eq!(back.to_string(), text.clone());
        prop_assert_eq!(back, e);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn box_projection_is_nearest(lo in prop::collection::vec(-2.0..0.0f64, 2), w in prop::collection::vec(0.0..3.0f64, 2),
                                 u in prop::collection::vec(-5.0..5.0f64, 2), probe in prop::collection::vec(0.0..1.0f64, 2)) {
        let hi: Vec<f64> = lo.iter().zip(&w).map(|(a, b)| a + b).collect();
        let region = Region::Box(BoxSet::new(lo.clone(), hi.clone()));
        let (proj, d) = region.project(&u);
        prop_assert!(region.contains(&proj, 0.0));
        prop_assert_eq!(region.project(&proj).1, 0.0);
        let other: Vec<f64> = (0..2).map(|i| lo[i] + probe[i] * w[i]).collect();
        let d_other = ((u[0] - other[0]).powi(2) + (u[1] - other[1]).powi(2)).sqrt();
        prop_assert!(d <= d_other + 1e-12);
    }

    #[test]
    fn adjoint_is_linear(a in prop::collection::vec(-3.0..3.0f64, 2), b in prop::collection::vec(-3.0..3.0f64, 2),
                         ja in prop::collection::vec(-1.0..1.0f64, 2), node in 0..=40usize, c in -2.0..2.0f64) {
        let p = cat("example-5-1");
        let g = Grid::uniform(1.0, 40).unwrap();
        let mut rng_u = Samples::zeros(40, 1);
        for k in 0..40 {
            rng_u.row_mut(k)[0] = 0.5 + 0.5 * ((k as f64) * 0.37).sin();
        }
        let base = process(&p, &[0.1, 0.0], rng_u, &g);
        let op = AdjointOperator::new(&p, &base).unwrap();
        let pa = op.backward(&a, &[(node, ja.clone())]);
        let pb = op.backward(&b, &[]);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| c * x + y).collect();
        let pm = op.backward(&mix, &[(node, ja.iter().map(|v| c * v).collect())]);
        for k in 0..=40 {
            for i in 0..2 {
                let want = c * pa.left(k)[i] + pb.left(k)[i];
                prop_assert!((pm.left(k)[i] - want).abs() <= 1e-10 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn forward_and_backward_adjoint_agree(terminal in prop::collection::vec(-2.0..2.0f64, 1), jump in -1.0..1.0f64,
                                          node in 0..=30usize, a in -1.5..1.5f64) {
        let p = Catalog::builtin().build("exp-growth", &[("a", a)]).unwrap();
        let g = Grid::uniform(1.0, 30).unwrap();
        let base = process(&p, &[1.0], constant_control(&g, &[0.2]), &g);
        let op = AdjointOperator::new(&p, &base).unwrap();
        let atoms = vec![(node, vec![jump])];
        let back = op.backward(&terminal, &atoms);
        let fwd = op.forward(back.left(0), &atoms).unwrap();
        for k in 0..=30 {
            prop_assert!((back.left(k)[0] - fwd.left(k)[0]).abs() <= 1e-10 * (1.0 + back.left(k)[0].abs()));
        }
    }
}

fn state_bound() -> (ProblemSpec, ControlProcess) {
    let p = cat("state-bound");
    let g = Grid::uniform(1.0, 20).unwrap();
    let base = process(&p, &[0.0], step_control(&g, &[1.0], 0.5, &[0.0]), &g);
    (p, base)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn form_is_affine_in_multiplier(l1 in prop::collection::vec(-1.0..1.0f64, 2), l2 in prop::collection::vec(-1.0..1.0f64, 2),
                                    w1 in prop::collection::vec(0.0..1.0f64, 3), w2 in prop::collection::vec(0.0..1.0f64, 3),
                                    du in prop::collection::vec(-1.0..1.0f64, 20), c in 0.0..1.0f64) {
        let (p, base) = state_bound();
        let dir = CriticalDirection::new(vec![0.2], Samples::from_rows(1, &du.iter().map(|v| [*v]).collect::<Vec<_>>()), 0.0, base.u.clone());
        let nodes = vec![5, 10, 20];
        let m = |w: &[f64]| vec![plab_core::first_order::Measure { constraint: 0, nodes: nodes.clone(), weights: w.to_vec() }];
        let q1 = quadratic_form_from_weights(&p, &base, &l1, &m(&w1), &dir).unwrap();
        let q2 = quadratic_form_from_weights(&p, &base, &l2, &m(&w2), &dir).unwrap();
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| c * x + (1.0 - c) * y).collect::<Vec<f64>>();
        let q = quadratic_form_from_weights(&p, &base, &mix(&l1, &l2), &m(&mix(&w1, &w2)), &dir).unwrap();
        let want = c * q1 + (1.0 - c) * q2;
        prop_assert!((q - want).abs() <= 1e-9 * (1.0 + want.abs()), "{} vs {}", q, want);
    }

    #[test]
    fn form_is_quadratically_homogeneous(levels in prop::collection::vec(0.0..1.0f64, 4), v in prop::collection::vec(0.0..1.0f64, 4),
                                         beta in 0.0..2.0f64, c in 0.1..4.0f64) {
        let p = cat("example-5-1");
        let g = Grid::uniform(1.0, 40).unwrap();
        let base = process(&p, &[0.0, 0.0], constant_control(&g, &[0.0]), &g);
        let u = Samples::from_fn(40, 1, |k| vec![levels[k / 10]]);
        let vs = Samples::from_fn(40, 1, |k| vec![v[k / 10]]);
        let w = step_control(&g, &[0.75], 0.25, &[0.0]);
        let dir = CriticalDirection::new(vec![0.0, 0.0], u, beta, w).with_v(vs);
        let lam = [1.0, 0.0, -1.0];
        let q = quadratic_form_from_weights(&p, &base, &lam, &[], &dir).unwrap();
        let qc = quadratic_form_from_weights(&p, &base, &lam, &[], &dir.scaled(c)).unwrap();
        prop_assert!((qc - c * c * q).abs() <= 1e-8 * (c * c * q).abs().max(1e-12), "{} vs {}", qc, c * c * q);
    }

    #[test]
    fn adding_comparisons_shrinks_the_polytope(obj in prop::collection::vec(-1.0..1.0f64, 64), cut in 0.0..1.0f64) {
        let (p, base) = state_bound();
        let cfg = MultiplierConfig::default();
        let all = comparison_controls(&p, &base, 5);
        let some = &all[..(cut * all.len() as f64) as usize];
        let small = MultiplierSystem::new(&p, &base, some, &cfg).unwrap();
        let large = MultiplierSystem::new(&p, &base, &all, &cfg).unwrap();
        prop_assert_eq!(small.columns.clone(), large.columns.clone());
        let a: Vec<f64> = small.columns.iter().enumerate().map(|(i, _)| obj[i % obj.len()]).collect();
        let s = small.maximize(&a, &cfg).unwrap();
        let l = large.maximize(&a, &cfg).unwrap();
        match (s, l) {
            (Some((vs, _)), Some((vl, _))) => prop_assert!(vl <= vs + 1e-9, "{} > {}", vl, vs),
            (None, l) => prop_assert!(l.is_none()),
            (Some(_), None) => {}
        }
        let free_only = |c: Column| matches!(c, Column::Lambda { free: true, .. });
        if large.feasible_with(free_only, &cfg).unwrap() {
            prop_assert!(small.feasible_with(free_only, &cfg).unwrap());
        }
    }
}

/// Quarter-lattice symmetric `A` keeps nonzero eigenvalues away from zero,
/// so a polar grid decides local minimality of `xᵀAx` reliably.
fn quarter_matrix() -> impl Strategy<Value = [f64; 3]> {
    (-8..=8i32, -8..=8i32, -8..=8i32).prop_map(|(a, b, d)| [a as f64 / 4.0, b as f64 / 4.0, d as f64 / 4.0])
}

fn brute_force_min(j: impl Fn(&[f64]) -> f64) -> bool {
    let j0 = j(&[0.0, 0.0]);
    for ri in 1..=10 {
        let r = 0.005 * ri as f64;
        for ai in 0..720 {
            let th = ai as f64 * std::f64::consts::PI / 360.0;
            if j(&[r * th.cos(), r * th.sin()]) < j0 - 1e-14 {
                return false;
            }
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn abstract_sup_form_agrees_with_brute_force(m in quarter_matrix(), two_sided in any::<bool>()) {
        let q = format!("({:?})*x1^2 + 2*({:?})*x1*x2 + ({:?})*x2^2", m[0], m[1], m[2]);
        let forms = if two_sided { vec![vec![1.0], vec![-1.0]] } else { vec![vec![1.0]] };
        let model = AbstractModel::from_sources(2, 0, forms, &[&[q.as_str()]], None).unwrap();
        let quad = |x: &[f64]| m[0] * x[0] * x[0] + 2.0 * m[1] * x[0] * x[1] + m[2] * x[1] * x[1];
        let is_min = brute_force_min(|x| if two_sided { quad(x).abs() } else { quad(x) });
        if is_min {
            for ai in 0..36 {
                let th = ai as f64 * std::f64::consts::PI / 18.0;
                let dir = AbstractDirection { h: vec![th.cos(), th.sin()], u: vec![], beta: vec![], v: vec![] };
                let r = abstract_model_check(&model, &[0.0, 0.0], &[], &dir, 1e-9).unwrap();
                if r.violation.is_none() {
                    prop_assert!(r.sup_form.unwrap() >= -1e-6, "{:?} at {}", m, th);
                }
            }
        }
    }
}
