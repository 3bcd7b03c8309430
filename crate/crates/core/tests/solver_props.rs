use bcscg_ds::poll::{poll_step, sufficient_decrease};
use bcscg_ds::solver::SolverState;
use bcscg_ds::{
    bcscg_ds_with, equiangular_basis, BoxDomain, Evaluator, Execution, PollStatus, SolverParams, BARRIER_VALUE,
};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random box, a feasible start inside it and a shifted ill-scaled quadratic.
#[derive(Debug, Clone)]
struct Case {
    domain: BoxDomain,
    x0: DVector<f64>,
    shift: Vec<f64>,
    weights: Vec<f64>,
}

fn case(n: usize, seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo: Vec<f64> = (0..n).map(|_| rng.gen_range(-20.0..0.0)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(1.0..30.0)).collect();
    let x0 = DVector::from_fn(n, |i, _| rng.gen_range(lo[i]..=hi[i]));
    Case {
        domain: BoxDomain::new(DVector::from_vec(lo), DVector::from_vec(hi)).unwrap(),
        x0,
        shift: (0..n).map(|_| rng.gen_range(-25.0..25.0)).collect(),
        weights: (0..n).map(|_| rng.gen_range(0.1..10.0)).collect(),
    }
}

impl Case {
    fn f(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.shift)
            .zip(&self.weights)
            .map(|((v, s), w)| w * (v - s) * (v - s))
            .sum()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn run_trace_invariants(n in 1usize..8, seed in any::<u64>(), mult in 1usize..30) {
        let c = case(n, seed);
        let f = |x: &[f64]| c.f(x);
        let params = SolverParams { budget_multiplier: mult, ..SolverParams::default() };
        let t = bcscg_ds_with(&f, &c.domain, &c.x0, &params, seed % 7, Execution::Sequential).unwrap();
        prop_assert!(t.evaluations <= params.budget_for(n));
        prop_assert!(c.domain.contains(&t.final_point));
        prop_assert_eq!(t.best_history[0], (1, c.f(c.x0.as_slice())));
        for w in t.best_history.windows(2) {
            prop_assert!(w[1].0 > w[0].0);
            prop_assert!(w[1].1 <= w[0].1);
        }
        prop_assert_eq!(t.best_history.last().unwrap().1, t.final_value);
        prop_assert_eq!(t.final_value, c.f(t.final_point.as_slice()));
    }

    #[test]
    fn execution_mode_does_not_change_results(n in 1usize..10, seed in any::<u64>()) {
        let c = case(n, seed);
        let f = |x: &[f64]| c.f(x);
        let params = SolverParams { budget_multiplier: 15, ..SolverParams::default() };
        let a = bcscg_ds_with(&f, &c.domain, &c.x0, &params, 3, Execution::Sequential).unwrap();
        let b = bcscg_ds_with(&f, &c.domain, &c.x0, &params, 3, Execution::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn successful_poll_gives_sufficient_decrease(n in 1usize..8, seed in any::<u64>()) {
        let c = case(n, seed);
        let f = |x: &[f64]| c.f(x);
        let params = SolverParams::default();
        let mut ev = Evaluator::new(&f, &c.domain, 50 * (n + 1));
        let f0 = ev.evaluate(&c.x0).unwrap();
        let r0 = params.initial_radius_for(&c.domain);
        let mut st = SolverState::new(c.x0.clone(), f0, r0, 0);
        let out = poll_step(&mut st, &mut ev, &equiangular_basis(n), &params);
        for (t, v) in &out.trial_set {
            prop_assert!((&c.x0 - t).norm() <= r0 * (1.0 + 1e-12));
            if !c.domain.contains(t) {
                prop_assert_eq!(*v, BARRIER_VALUE);
            }
        }
        if out.status == PollStatus::Success {
            let (p, v) = out.best.unwrap();
            prop_assert!(c.domain.contains(&p));
            prop_assert!(sufficient_decrease(v, f0, out.radius, params.rho));
        }
    }
}

#[test]
fn infeasible_points_cost_nothing() {
    let d = BoxDomain::uniform(2, 0.0, 1.0).unwrap();
    let f = |x: &[f64]| x[0] + x[1];
    let mut ev = Evaluator::new(&f, &d, 2);
    assert_eq!(ev.evaluate(&DVector::from_vec(vec![2.0, 0.5])).unwrap(), BARRIER_VALUE);
    assert_eq!(ev.used(), 0);
    ev.evaluate(&DVector::from_vec(vec![0.5, 0.5])).unwrap();
    ev.evaluate(&DVector::from_vec(vec![0.5, 0.5])).unwrap();
    assert_eq!(ev.used(), 1);
}

#[test]
fn same_seed_reproduces() {
    let c = case(5, 11);
    let f = |x: &[f64]| c.f(x);
    let params = SolverParams {
        budget_multiplier: 10,
        ..SolverParams::default()
    };
    let run = |s| bcscg_ds_with(&f, &c.domain, &c.x0, &params, s, Execution::Sequential).unwrap();
    assert_eq!(run(1), run(1));
}
