//! The poll step: barrier-guarded evaluation of n+1 trial points on the ball
//! `B(x_k, r_k)`, sufficient-decrease acceptance and rotation on failure.

use std::collections::HashMap;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{rotate_basis, DirectionBasis};
use crate::solver::{SolverParams, SolverState};
use crate::{map_ordered, Execution, Objective};

/// Value assigned to points outside the box (extreme barrier).
pub const BARRIER_VALUE: f64 = 1.79e308;

/// The feasible region `Ω = {x : lᵢ ≤ xᵢ ≤ uᵢ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxDomain {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidBox("zero-dimensional box".into()));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(Error::InvalidBox(format!(
                "coordinate {i}: lower {} is not below upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// `[lo, hi]ⁿ`.
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(DVector::from_element(n, lo), DVector::from_element(n, hi))
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dimension()
            && x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(&v, (&l, &u))| v >= l && v <= u)
    }

    /// Componentwise projection onto the box.
    pub fn clamp(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .map(|(&v, (&l, &u))| v.clamp(l, u)),
        )
    }

    pub fn min_width(&self) -> f64 {
        (&self.upper - &self.lower).min()
    }

    pub fn max_width(&self) -> f64 {
        (&self.upper - &self.lower).max()
    }
}

/// Exact-match cache of feasible evaluations, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct EvalCache {
    index: HashMap<Vec<u64>, usize>,
    points: Vec<DVector<f64>>,
    values: Vec<f64>,
}

fn key(x: &DVector<f64>) -> Vec<u64> {
    // +0.0 and -0.0 must share a key
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl EvalCache {
    pub fn get(&self, x: &DVector<f64>) -> Option<f64> {
        self.index.get(&key(x)).map(|&i| self.values[i])
    }

    fn insert(&mut self, x: DVector<f64>, value: f64) {
        let k = key(&x);
        if self.index.contains_key(&k) {
            return;
        }
        self.index.insert(k, self.points.len());
        self.points.push(x);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DVector<f64>, f64)> {
        self.points.iter().zip(self.values.iter().copied())
    }

    /// Cached points `y ≠ center` with `‖y − center‖ ≤ radius`.
    pub fn within_ball(&self, center: &DVector<f64>, radius: f64) -> Vec<(DVector<f64>, f64)> {
        self.iter()
            .filter(|(p, _)| {
                let dist = (*p - center).norm();
                dist > 1e-14 && dist <= radius
            })
            .map(|(p, v)| (p.clone(), v))
            .collect()
    }

    pub fn min(&self) -> Option<(&DVector<f64>, f64)> {
        self.iter()
            .fold(None, |best: Option<(&DVector<f64>, f64)>, (p, v)| match best {
                Some((_, bv)) if bv <= v => best,
                _ => Some((p, v)),
            })
    }
}

/// Outcome of a batch evaluation. `values` covers a prefix of the requested
/// points; it is shorter than the request only when the budget ran out.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub values: Vec<f64>,
    pub exhausted: bool,
}

/// What remains of an [`Evaluator`] once a run ends.
#[derive(Debug, Clone)]
pub struct EvaluatorParts {
    pub history: Vec<(usize, f64)>,
    pub best: Option<(DVector<f64>, f64)>,
    pub used: usize,
}

/// Budgeted, cached, barrier-guarded access to the objective.
///
/// Infeasible points cost nothing and return [`BARRIER_VALUE`]; cached points
/// return their stored value without consuming budget. Every true evaluation
/// appends `(evaluations_used, best_value)` to the history.
pub struct Evaluator<'a> {
    objective: &'a dyn Objective,
    domain: &'a BoxDomain,
    budget: usize,
    used: usize,
    cache: EvalCache,
    best: Option<(DVector<f64>, f64)>,
    history: Vec<(usize, f64)>,
    execution: Execution,
}

impl<'a> Evaluator<'a> {
    pub fn new(objective: &'a dyn Objective, domain: &'a BoxDomain, budget: usize) -> Self {
        Self {
            objective,
            domain,
            budget,
            used: 0,
            cache: EvalCache::default(),
            best: None,
            history: Vec::new(),
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn domain(&self) -> &BoxDomain {
        self.domain
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.used
    }

    pub fn cache(&self) -> &EvalCache {
        &self.cache
    }

    pub fn history(&self) -> &[(usize, f64)] {
        &self.history
    }

    pub fn best(&self) -> Option<(&DVector<f64>, f64)> {
        self.best.as_ref().map(|(p, v)| (p, *v))
    }

    /// Consumes the evaluator, returning its history, best point and
    /// evaluation count.
    pub fn into_parts(self) -> EvaluatorParts {
        EvaluatorParts {
            history: self.history,
            best: self.best,
            used: self.used,
        }
    }

    fn record(&mut self, x: DVector<f64>, value: f64) -> f64 {
        self.used += 1;
        let value = if value.is_finite() { value } else { BARRIER_VALUE };
        if value < BARRIER_VALUE {
            if self.best.as_ref().is_none_or(|(_, b)| value < *b) {
                self.best = Some((x.clone(), value));
            }
            self.cache.insert(x, value);
        }
        let best = self.best.as_ref().map_or(BARRIER_VALUE, |(_, b)| *b);
        self.history.push((self.used, best));
        value
    }

    /// Barrier-guarded evaluation of a single point.
    pub fn evaluate(&mut self, x: &DVector<f64>) -> Result<f64> {
        if !self.domain.contains(x) {
            return Ok(BARRIER_VALUE);
        }
        if let Some(v) = self.cache.get(x) {
            return Ok(v);
        }
        if self.used >= self.budget {
            return Err(Error::BudgetExhausted);
        }
        let v = self.objective.value(x.as_slice());
        Ok(self.record(x.clone(), v))
    }

    /// Evaluates `points` in order. Independent true evaluations may run
    /// concurrently; bookkeeping (budget, cache, history) is applied in input
    /// order so results do not depend on the execution mode.
    pub fn evaluate_batch(&mut self, points: &[DVector<f64>]) -> BatchResult {
        enum Slot {
            Known(f64),
            Fresh(usize),
            Repeat(usize),
        }
        let mut slots = Vec::with_capacity(points.len());
        let mut fresh: Vec<&DVector<f64>> = Vec::new();
        let mut fresh_keys: HashMap<Vec<u64>, usize> = HashMap::new();
        for x in points {
            if !self.domain.contains(x) {
                slots.push(Slot::Known(BARRIER_VALUE));
            } else if let Some(v) = self.cache.get(x) {
                slots.push(Slot::Known(v));
            } else if let Some(&j) = fresh_keys.get(&key(x)) {
                slots.push(Slot::Repeat(j));
            } else {
                fresh_keys.insert(key(x), fresh.len());
                slots.push(Slot::Fresh(fresh.len()));
                fresh.push(x);
            }
        }
        let affordable = fresh.len().min(self.remaining());
        let objective = self.objective;
        let computed = map_ordered(self.execution, &fresh[..affordable], |x| objective.value(x.as_slice()));

        let mut values = Vec::with_capacity(points.len());
        let mut recorded: Vec<f64> = Vec::with_capacity(affordable);
        for (x, slot) in points.iter().zip(slots) {
            let v = match slot {
                Slot::Known(v) => v,
                Slot::Repeat(j) => recorded[j],
                Slot::Fresh(j) if j < affordable => {
                    let v = self.record(x.clone(), computed[j]);
                    recorded.push(v);
                    v
                }
                Slot::Fresh(_) => {
                    return BatchResult {
                        values,
                        exhausted: true,
                    }
                }
            };
            values.push(v);
        }
        BatchResult {
            values,
            exhausted: false,
        }
    }
}

/// `f_new < f_incumbent − ρ r²`.
pub fn sufficient_decrease(f_new: f64, f_incumbent: f64, r: f64, rho: f64) -> bool {
    f_new < f_incumbent - rho * r * r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PollStatus {
    /// A trial point achieved sufficient decrease.
    Success,
    /// The radius fell to the tolerance: the incumbent is declared stationary.
    Exhausted,
    /// The evaluation budget ran out mid-poll.
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct PollOutcome {
    pub status: PollStatus,
    /// Best trial point of the whole poll step (present on success).
    pub best: Option<(DVector<f64>, f64)>,
    pub radius: f64,
    pub poll_parameter: f64,
    /// Every point evaluated during this poll step, including earlier failed
    /// rotations, in evaluation order.
    pub trial_set: Vec<(DVector<f64>, f64)>,
    /// Whether every trial point of the final round lay inside the box.
    pub last_round_feasible: bool,
    /// Number of failed rounds (rotations) within this poll step.
    pub rotations: usize,
}

/// Runs rounds of n+1 trials `x_k + r_k d` until one achieves sufficient
/// decrease, the radius falls to `params.eps`, or the budget runs out.
///
/// Each failed round draws a Halton direction, rotates `base` onto it and
/// divides both `r_k` and `Δᵖ_k` by `τ_l`. The state's radius, poll
/// parameter, direction set and cursor are updated in place.
pub fn poll_step(
    state: &mut SolverState,
    eval: &mut Evaluator<'_>,
    base: &DirectionBasis,
    params: &SolverParams,
) -> PollOutcome {
    let mut trial_set: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut rotations = 0;
    loop {
        if state.radius <= params.eps {
            return PollOutcome {
                status: PollStatus::Exhausted,
                best: None,
                radius: state.radius,
                poll_parameter: state.delta_p,
                trial_set,
                last_round_feasible: false,
                rotations,
            };
        }
        let trials: Vec<DVector<f64>> = state
            .directions
            .directions()
            .iter()
            .map(|d| &state.x + d * state.radius)
            .collect();
        let feasible = trials.iter().all(|t| eval.domain().contains(t));
        let batch = eval.evaluate_batch(&trials);
        let round_start = trial_set.len();
        trial_set.extend(trials.into_iter().zip(batch.values.iter().copied()));
        if batch.exhausted {
            return PollOutcome {
                status: PollStatus::BudgetExhausted,
                best: None,
                radius: state.radius,
                poll_parameter: state.delta_p,
                trial_set,
                last_round_feasible: feasible,
                rotations,
            };
        }

        let round_min = trial_set[round_start..]
            .iter()
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min);
        if sufficient_decrease(round_min, state.f, state.radius, params.rho) {
            // lowest index wins ties
            let (p, v) = trial_set
                .iter()
                .fold(None, |best: Option<&(DVector<f64>, f64)>, t| match best {
                    Some(b) if b.1 <= t.1 => Some(b),
                    _ => Some(t),
                })
                .expect("non-empty trial set");
            return PollOutcome {
                status: PollStatus::Success,
                best: Some((p.clone(), *v)),
                radius: state.radius,
                poll_parameter: state.delta_p,
                trial_set,
                last_round_feasible: feasible,
                rotations,
            };
        }

        let u = state.cursor.next_direction();
        state.directions = rotate_basis(base, &u);
        state.delta_p /= params.tau_l;
        state.radius /= params.tau_l;
        rotations += 1;
    }
}
