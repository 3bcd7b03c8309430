//! The BCSCG-DS driver: poll step, then a search step made of the quadratic
//! model step, the simplex-gradient probe with vicinity search, and the SCG
//! line search, followed by the poll-parameter update.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{equiangular_basis, DirectionBasis, HaltonCursor};
use crate::poll::{poll_step, BoxDomain, Evaluator, EvaluatorParts, PollStatus};
use crate::search::{quadratic_model_step, scg_step, simplex_gradient_probe, vicinity_search, ScgMemory};
use crate::{Execution, Objective};

/// Solver parameters. The shrink and expansion factors `tau_l`, `tau_u` default
/// to 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Sufficient-decrease constant in `γ(r) = ρr²`.
    pub rho: f64,
    /// Shrink factor applied to `r_k` and `Δᵖ_k` after a failed poll round.
    pub tau_l: f64,
    /// Expansion factor for `Δᵖ_k` after long search steps.
    pub tau_u: f64,
    /// Poll radius tolerance; the incumbent is declared stationary once
    /// `r_k ≤ eps`.
    pub eps: f64,
    /// Relative enlargement of the simplex-gradient ball, `r_k(1 + eps2)`.
    pub eps2: f64,
    /// Vicinity search uses `⌊fraction · n⌋` points.
    pub vicinity_count_fraction: f64,
    /// `r₀ = Δ₀ᵖ = fraction · minᵢ(uᵢ − lᵢ)` unless `initial_radius` is set.
    pub initial_radius_fraction: f64,
    pub initial_radius: Option<f64>,
    /// Budget is `multiplier · (n + 1)` unless `budget` is set.
    pub budget_multiplier: usize,
    pub budget: Option<usize>,
    pub brent_max_iter: usize,
    pub brent_tol: f64,
    pub execution: Execution,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            rho: 0.25,
            tau_l: 2.0,
            tau_u: 2.0,
            eps: 1e-6,
            eps2: 0.01,
            vicinity_count_fraction: 0.1,
            initial_radius_fraction: 0.1,
            initial_radius: None,
            budget_multiplier: 40,
            budget: None,
            brent_max_iter: 20,
            brent_tol: 1e-5,
            execution: Execution::default(),
        }
    }
}

impl SolverParams {
    pub fn budget_for(&self, n: usize) -> usize {
        self.budget.unwrap_or(self.budget_multiplier * (n + 1))
    }

    pub fn vicinity_count(&self, n: usize) -> usize {
        (self.vicinity_count_fraction * n as f64).floor() as usize
    }

    pub fn initial_radius_for(&self, domain: &BoxDomain) -> f64 {
        self.initial_radius
            .unwrap_or(self.initial_radius_fraction * domain.min_width())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0,1)");
        }
        if !(self.tau_l > 1.0) || !(self.tau_u > 1.0) {
            return bad("tau_l and tau_u must exceed 1");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        if !(self.eps2 > 0.0 && self.eps2 < 1.0) {
            return bad("eps2 must lie in (0,1)");
        }
        if !(self.vicinity_count_fraction >= 0.0) {
            return bad("vicinity_count_fraction must be nonnegative");
        }
        if !(self.brent_tol > 0.0) {
            return bad("brent_tol must be positive");
        }
        Ok(())
    }
}

/// Mutable per-iteration state of one run.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: DVector<f64>,
    pub f: f64,
    /// Direct-search radius `r_k`.
    pub radius: f64,
    /// Poll size parameter `Δᵖ_k`.
    pub delta_p: f64,
    /// Current (possibly rotated) poll directions.
    pub directions: DirectionBasis,
    pub cursor: HaltonCursor,
    pub scg_memory: ScgMemory,
    pub iteration: usize,
}

impl SolverState {
    /// State at `x` with `r₀ = Δ₀ᵖ = radius`, unrotated equiangular directions
    /// and a Halton cursor starting at index `1 + seed`.
    pub fn new(x: DVector<f64>, f: f64, radius: f64, seed: u64) -> Self {
        let n = x.len();
        Self {
            directions: equiangular_basis(n),
            cursor: HaltonCursor::starting_at(n, seed.saturating_add(1)),
            x,
            f,
            radius,
            delta_p: radius,
            scg_memory: ScgMemory::new(),
            iteration: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Budget,
    Stationary,
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub f_before: f64,
    pub poll_value: f64,
    pub poll_radius: f64,
    pub rotations: usize,
    pub step_length: f64,
    pub delta_p_after: f64,
    pub f_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    /// `(evaluation_count, best_value)` after every true evaluation.
    pub best_history: Vec<(usize, f64)>,
    pub final_point: DVector<f64>,
    pub final_value: f64,
    pub termination: Termination,
    pub evaluations: usize,
    pub iterations: Vec<IterationLog>,
    /// Failed poll rounds over the whole run.
    pub rotations: usize,
    /// Radius and poll parameter at termination.
    pub final_radius: f64,
    pub final_delta_p: f64,
}

/// `Δᵖ_{k+1}` after a search step of length `step`: raised to `step` when
/// `step > Δ`, then overwritten with `τ_u Δ` when `step > 2Δ`.
pub fn update_poll_parameters(delta_p: f64, step_length: f64, tau_u: f64) -> f64 {
    let mut next = delta_p;
    if step_length > delta_p {
        next = step_length;
    }
    if step_length > 2.0 * delta_p {
        next = tau_u * delta_p;
    }
    next
}

/// Minimizes `objective` over `domain` from `x0` with default execution
/// settings taken from `params`.
pub fn bcscg_ds(
    objective: &dyn Objective,
    domain: &BoxDomain,
    x0: &DVector<f64>,
    params: &SolverParams,
    seed: u64,
) -> Result<RunTrace> {
    bcscg_ds_with(objective, domain, x0, params, seed, params.execution)
}

/// As [`bcscg_ds`] with an explicit execution mode for poll rounds.
pub fn bcscg_ds_with(
    objective: &dyn Objective,
    domain: &BoxDomain,
    x0: &DVector<f64>,
    params: &SolverParams,
    seed: u64,
    execution: Execution,
) -> Result<RunTrace> {
    params.validate()?;
    let n = domain.dimension();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if !domain.contains(x0) {
        return Err(Error::InfeasibleStart);
    }
    let budget = params.budget_for(n);
    if budget < n + 1 {
        return Err(Error::InfeasibleBudget {
            budget,
            required: n + 1,
        });
    }
    let radius = params.initial_radius_for(domain);
    if !(radius > 0.0) {
        return Err(Error::InvalidConfig("initial radius must be positive".into()));
    }

    let mut eval = Evaluator::new(objective, domain, budget).with_execution(execution);
    let f0 = eval.evaluate(x0)?;
    let base = equiangular_basis(n);
    let mut state = SolverState::new(x0.clone(), f0, radius, seed);
    let l = params.vicinity_count(n);
    let mut logs = Vec::new();
    let mut rotations = 0;

    let termination = loop {
        let poll = poll_step(&mut state, &mut eval, &base, params);
        rotations += poll.rotations;
        match poll.status {
            PollStatus::Exhausted => break Termination::Stationary,
            PollStatus::BudgetExhausted => break Termination::Budget,
            PollStatus::Success => {}
        }
        let (poll_point, poll_value) = poll.best.clone().expect("success carries a point");
        let f_before = state.f;

        match search_step(&mut state, &mut eval, &poll, (poll_point, poll_value), l, params) {
            Ok((point, value, step_length)) => {
                state.delta_p = update_poll_parameters(state.delta_p, step_length, params.tau_u);
                state.x = point;
                state.f = value;
                // keep the incumbent at the cache minimum
                if let Some((p, v)) = eval.best() {
                    if v < state.f {
                        state.x = p.clone();
                        state.f = v;
                    }
                }
                state.iteration += 1;
                logs.push(IterationLog {
                    f_before,
                    poll_value,
                    poll_radius: poll.radius,
                    rotations: poll.rotations,
                    step_length,
                    delta_p_after: state.delta_p,
                    f_after: state.f,
                });
            }
            Err(Error::BudgetExhausted) => break Termination::Budget,
            Err(e) => return Err(e),
        }
    };

    let final_radius = state.radius;
    let final_delta_p = state.delta_p;
    let EvaluatorParts {
        history: best_history,
        best,
        used: evaluations,
    } = eval.into_parts();
    let (final_point, final_value) = best.unwrap_or((state.x, state.f));
    Ok(RunTrace {
        best_history,
        final_point,
        final_value,
        termination,
        evaluations,
        iterations: logs,
        rotations,
        final_radius,
        final_delta_p,
    })
}

/// Search step after a successful poll. Returns the new best point, its value
/// and the SCG line-search step length.
fn search_step(
    state: &mut SolverState,
    eval: &mut Evaluator<'_>,
    poll: &crate::poll::PollOutcome,
    poll_best: (DVector<f64>, f64),
    l: usize,
    params: &SolverParams,
) -> Result<(DVector<f64>, f64, f64)> {
    let x_k = state.x.clone();
    let f_k = state.f;
    let r_k = state.radius;
    let mut best = poll_best;
    let mut trial_set = poll.trial_set.clone();

    let mut gradient = None;
    if poll.last_round_feasible {
        if let Some(found) = quadratic_model_step(
            eval,
            &x_k,
            f_k,
            &poll.trial_set,
            best.1,
            params.brent_max_iter,
            params.brent_tol,
        )? {
            best = found;
        }
        let probe = simplex_gradient_probe(eval, &x_k, f_k, r_k, params.eps2)?;
        gradient = probe.gradient;
        if let Some((p, v)) = probe.probe {
            if v < best.1 {
                best = (p.clone(), v);
            }
            trial_set.push((p, v));
        }
    }

    best = vicinity_search(eval, &x_k, r_k, &trial_set, best, l)?;

    let scg = scg_step(
        eval,
        &x_k,
        f_k,
        best,
        gradient.as_ref(),
        &mut state.scg_memory,
        params.brent_max_iter,
        params.brent_tol,
    )?;
    Ok((scg.point, scg.value, scg.step_length))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn sq(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn poll_parameter_update_rules() {
        assert_eq!(update_poll_parameters(1.0, 1.5, 2.0), 1.5);
        assert_eq!(update_poll_parameters(1.0, 3.0, 2.0), 2.0);
        assert_eq!(update_poll_parameters(1.0, 0.5, 2.0), 1.0);
        assert_eq!(update_poll_parameters(1.0, 1.0, 2.0), 1.0);
    }

    #[test]
    fn sphere_2d_reference_run() {
        let domain = BoxDomain::uniform(2, -50.0, 50.0).unwrap();
        let x0 = dvector![40.0, 40.0];
        let t = bcscg_ds(&sq, &domain, &x0, &SolverParams::default(), 0).unwrap();
        assert!(t.final_value <= 1e-4 * 3200.0, "{}", t.final_value);
        assert!(t.evaluations <= 120);
        assert!(t.best_history.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn infeasible_start_and_budget() {
        let domain = BoxDomain::uniform(2, -1.0, 1.0).unwrap();
        assert!(matches!(
            bcscg_ds(&sq, &domain, &dvector![2.0, 0.0], &SolverParams::default(), 0),
            Err(Error::InfeasibleStart)
        ));
        let p = SolverParams {
            budget_multiplier: 0,
            ..SolverParams::default()
        };
        assert!(matches!(
            bcscg_ds(&sq, &domain, &dvector![0.5, 0.0], &p, 0),
            Err(Error::InfeasibleBudget { budget: 0, .. })
        ));
    }

    #[test]
    fn start_at_minimizer_is_stationary() {
        let domain = BoxDomain::uniform(3, -50.0, 50.0).unwrap();
        let t = bcscg_ds(&sq, &domain, &dvector![0.0, 0.0, 0.0], &SolverParams::default(), 0).unwrap();
        assert_eq!(t.termination, Termination::Stationary);
        assert!(t.final_radius <= 1e-6);
        assert_eq!(t.rotations, 24);
        assert_eq!(t.evaluations, 1 + 4 * 24);
    }

    #[test]
    fn execution_modes_agree() {
        let domain = BoxDomain::uniform(6, -50.0, 50.0).unwrap();
        let x0 = DVector::from_vec(vec![10.0, -20.0, 30.0, 5.0, -7.0, 1.0]);
        let f = |x: &[f64]| {
            x.windows(2)
                .map(|w| 100.0 * (w[0] * w[0] - w[1]).powi(2) + (w[0] - 1.0).powi(2))
                .sum::<f64>()
        };
        let p = SolverParams::default();
        let a = bcscg_ds_with(&f, &domain, &x0, &p, 3, Execution::Sequential).unwrap();
        let b = bcscg_ds_with(&f, &domain, &x0, &p, 3, Execution::Parallel).unwrap();
        assert_eq!(a.best_history, b.best_history);
        assert_eq!(a.final_point, b.final_point);
    }
}
