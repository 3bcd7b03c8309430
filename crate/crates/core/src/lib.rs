//! Box-constrained derivative-free optimization with BCSCG-DS.
//!
//! The solver alternates a convergence-guaranteeing poll step (n+1 equiangular
//! directions on a shrinking ball, rotated by Householder reflections towards
//! Halton directions on failure) with an opportunistic search step built from
//! quadratic interpolation models, simplex gradients, a vicinity search and a
//! scaled-conjugate-gradient line search.
//!
//! Alongside the solver the crate ships the benchmark apparatus used to study
//! it: noisy smooth and piecewise-smooth least-squares problems, a parallel
//! experiment grid runner persisting JSON run records, performance profiles
//! and median progress curves.
//!
//! ```
//! use bcscg_ds::{bcscg_ds, BoxDomain, SolverParams, Termination};
//! use nalgebra::DVector;
//!
//! let domain = BoxDomain::uniform(2, -50.0, 50.0).unwrap();
//! let sphere = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
//! let x0 = DVector::from_vec(vec![40.0, 40.0]);
//! let trace = bcscg_ds(&sphere, &domain, &x0, &SolverParams::default(), 0).unwrap();
//! assert!(trace.final_value < 1e-4 * 3200.0);
//! assert!(matches!(trace.termination, Termination::Budget | Termination::Stationary));
//! ```
//!
//! # Parallelism
//!
//! With the default `parallel` feature, independent objective evaluations of
//! one poll round and independent cells of an experiment grid run on the rayon
//! thread pool. Disabling the feature compiles a purely sequential crate;
//! results are identical either way.

// `!(a > b)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod geometry;
pub mod models;
pub mod poll;
pub mod problems;
pub mod search;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{equiangular_basis, householder_matrix, rotate_basis, DirectionBasis, HaltonCursor};
pub use models::{fit_quadratic, simplex_gradient, QuadraticModel, SampleSet};
pub use poll::{BoxDomain, Evaluator, PollOutcome, PollStatus, BARRIER_VALUE};
pub use problems::{make_problem, LeastSquaresProblem, NoisyVariant, Variant};
pub use solver::{bcscg_ds, bcscg_ds_with, RunTrace, SolverParams, Termination};

/// A scalar objective `f: ℝⁿ → ℝ`.
///
/// Implementations must be pure: the solver caches values by point and may
/// evaluate independent points concurrently.
pub trait Objective: Sync {
    fn value(&self, x: &[f64]) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// How batches of independent work are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled, otherwise
    /// falls back to sequential execution.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `items`, in parallel when `exec` allows it. Output order
/// always matches input order.
pub(crate) fn map_ordered<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() > 1 {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}
