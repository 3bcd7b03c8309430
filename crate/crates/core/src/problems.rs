//! Least-squares test problems, the Chebyshev-based deterministic noise and
//! the smooth / piecewise-smooth noisy objectives built from them.
//!
//! Every catalog problem is a residual vector `(f₁(x), …, f_m(x))`. The smooth
//! objective is `(1 + ε_f ψ(x)) Σ fᵢ(x)²`, the piecewise-smooth one is
//! `(1 + ε_f ψ(x)) Σ |fᵢ(x)|`, where
//! `ψ(x) = U₃(0.9 sin(100‖x‖₁) cos(100‖x‖_∞) + 0.1 cos(‖x‖₂))` and
//! `U₃(α) = α(4α² − 3)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poll::BoxDomain;
use crate::Objective;

/// Default relative noise level.
pub const DEFAULT_EPS_F: f64 = 1e-3;
/// Every catalog problem lives in `[BOX_LOWER, BOX_UPPER]ⁿ`.
pub const BOX_LOWER: f64 = -50.0;
pub const BOX_UPPER: f64 = 50.0;

/// Cubic Chebyshev polynomial `α(4α² − 3)`.
pub fn chebyshev_u3(alpha: f64) -> f64 {
    alpha * (4.0 * alpha * alpha - 3.0)
}

/// `0.9 sin(100‖x‖₁) cos(100‖x‖_∞) + 0.1 cos(‖x‖₂)`.
pub fn psi0(x: &[f64]) -> f64 {
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    let linf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let l2 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    0.9 * (100.0 * l1).sin() * (100.0 * linf).cos() + 0.1 * l2.cos()
}

/// Deterministic noise `U₃(ψ₀(x)) ∈ [−1, 1]`.
pub fn psi(x: &[f64]) -> f64 {
    chebyshev_u3(psi0(x))
}

/// The built-in residual families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    ChainedRosenbrock,
    BroydenTridiagonal,
    GenBroydenTridiagonal,
    ChainedWood,
    DiscreteBoundaryValue,
    ChainedFreudensteinRoth,
    SingularBroyden,
    BroydenBanded,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 8] = [
        ProblemKind::ChainedRosenbrock,
        ProblemKind::BroydenTridiagonal,
        ProblemKind::GenBroydenTridiagonal,
        ProblemKind::ChainedWood,
        ProblemKind::DiscreteBoundaryValue,
        ProblemKind::ChainedFreudensteinRoth,
        ProblemKind::SingularBroyden,
        ProblemKind::BroydenBanded,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::ChainedRosenbrock => "chained_rosenbrock",
            ProblemKind::BroydenTridiagonal => "broyden_tridiagonal",
            ProblemKind::GenBroydenTridiagonal => "gen_broyden_tridiagonal",
            ProblemKind::ChainedWood => "chained_wood",
            ProblemKind::DiscreteBoundaryValue => "discrete_boundary_value",
            ProblemKind::ChainedFreudensteinRoth => "chained_freudenstein_roth",
            ProblemKind::SingularBroyden => "singular_broyden",
            ProblemKind::BroydenBanded => "broyden_banded",
        }
    }

    fn check_dimension(self, n: usize) -> Result<()> {
        let fail = |reason| {
            Err(Error::IncompatibleDimension {
                problem: self.name().to_string(),
                dim: n,
                reason,
            })
        };
        match self {
            ProblemKind::ChainedRosenbrock | ProblemKind::ChainedFreudensteinRoth if n < 2 => {
                fail("chained problems need n >= 2")
            }
            ProblemKind::ChainedWood if n < 4 || !n.is_multiple_of(2) => fail("chained Wood needs an even n >= 4"),
            _ if n == 0 => fail("dimension must be positive"),
            _ => Ok(()),
        }
    }

    fn term_count(self, n: usize) -> usize {
        match self {
            ProblemKind::ChainedRosenbrock | ProblemKind::ChainedFreudensteinRoth => 2 * (n - 1),
            ProblemKind::ChainedWood => 3 * (n - 2),
            _ => n,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownProblem(s.to_string()))
    }
}

/// `f(x) = Σ fᵢ(x)²` over the box `[−50, 50]ⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresProblem {
    kind: ProblemKind,
    n: usize,
    domain: BoxDomain,
}

/// Looks up a catalog problem by its stable name.
pub fn make_problem(name: &str, n: usize) -> Result<LeastSquaresProblem> {
    let kind: ProblemKind = name.parse()?;
    kind.check_dimension(n)?;
    Ok(LeastSquaresProblem {
        kind,
        n,
        domain: BoxDomain::uniform(n, BOX_LOWER, BOX_UPPER)?,
    })
}

// zero-padded neighbour access for banded residuals
#[inline]
fn at(x: &[f64], i: isize) -> f64 {
    if i < 0 || i as usize >= x.len() {
        0.0
    } else {
        x[i as usize]
    }
}

impl LeastSquaresProblem {
    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn term_count(&self) -> usize {
        self.kind.term_count(self.n)
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Residuals `(f₁(x), …, f_m(x))`.
    pub fn terms(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(x.len(), n, "dimension mismatch");
        let mut out = Vec::with_capacity(self.term_count());
        match self.kind {
            ProblemKind::ChainedRosenbrock => {
                for k in 0..n - 1 {
                    out.push(10.0 * (x[k] * x[k] - x[k + 1]));
                    out.push(x[k] - 1.0);
                }
            }
            ProblemKind::ChainedFreudensteinRoth => {
                for k in 0..n - 1 {
                    let (a, b) = (x[k], x[k + 1]);
                    out.push(a + ((5.0 - b) * b - 2.0) * b - 13.0);
                    out.push(a + ((1.0 + b) * b - 14.0) * b - 29.0);
                }
            }
            ProblemKind::ChainedWood => {
                let (s90, s10) = (90f64.sqrt(), 10f64.sqrt());
                for k in (0..n - 2).step_by(2) {
                    let (a, b, c, d) = (x[k], x[k + 1], x[k + 2], x[k + 3]);
                    out.push(10.0 * (a * a - b));
                    out.push(a - 1.0);
                    out.push(s90 * (c * c - d));
                    out.push(c - 1.0);
                    out.push(s10 * (b + d - 2.0));
                    out.push((b - d) / s10);
                }
            }
            ProblemKind::BroydenTridiagonal | ProblemKind::SingularBroyden => {
                let squared = self.kind == ProblemKind::SingularBroyden;
                for i in 0..n as isize {
                    let xi = x[i as usize];
                    let r = (3.0 - 2.0 * xi) * xi - at(x, i - 1) - 2.0 * at(x, i + 1) + 1.0;
                    out.push(if squared { r * r } else { r });
                }
            }
            ProblemKind::GenBroydenTridiagonal => {
                for i in 0..n as isize {
                    let xi = x[i as usize];
                    out.push((3.0 - 2.0 * xi) * xi - at(x, i - 1) - at(x, i + 1) + 1.0);
                }
            }
            ProblemKind::DiscreteBoundaryValue => {
                let h = 1.0 / (n as f64 + 1.0);
                for i in 0..n as isize {
                    let xi = x[i as usize];
                    let t = (i + 1) as f64 * h;
                    out.push(2.0 * xi - at(x, i - 1) - at(x, i + 1) + 0.5 * h * h * (xi + t + 1.0).powi(3));
                }
            }
            ProblemKind::BroydenBanded => {
                for i in 0..n {
                    let xi = x[i];
                    let lo = i.saturating_sub(5);
                    let hi = (i + 1).min(n - 1);
                    let band: f64 = (lo..=hi).filter(|&j| j != i).map(|j| x[j] * (1.0 + x[j])).sum();
                    out.push(xi * (2.0 + 5.0 * xi * xi) + 1.0 - band);
                }
            }
        }
        out
    }

    /// Coordinates (0-based) that term `i` depends on.
    pub fn term_variables(&self, i: usize) -> Vec<usize> {
        let n = self.n;
        let window =
            |lo: isize, hi: isize| -> Vec<usize> { (lo.max(0)..=hi.min(n as isize - 1)).map(|j| j as usize).collect() };
        match self.kind {
            ProblemKind::ChainedRosenbrock => {
                let k = i / 2;
                if i.is_multiple_of(2) {
                    vec![k, k + 1]
                } else {
                    vec![k]
                }
            }
            ProblemKind::ChainedFreudensteinRoth => vec![i / 2, i / 2 + 1],
            ProblemKind::ChainedWood => {
                let k = 2 * (i / 6);
                match i % 6 {
                    0 => vec![k, k + 1],
                    1 => vec![k],
                    2 => vec![k + 2, k + 3],
                    3 => vec![k + 2],
                    _ => vec![k + 1, k + 3],
                }
            }
            ProblemKind::BroydenBanded => window(i as isize - 5, i as isize + 1),
            _ => window(i as isize - 1, i as isize + 1),
        }
    }

    pub fn sum_of_squares(&self, x: &[f64]) -> f64 {
        self.terms(x).iter().map(|t| t * t).sum()
    }

    pub fn sum_of_abs(&self, x: &[f64]) -> f64 {
        self.terms(x).iter().map(|t| t.abs()).sum()
    }
}

/// How residuals are aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `Σ fᵢ²`
    Smooth,
    /// `Σ |fᵢ|`
    Piecewise,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Smooth => "smooth",
            Variant::Piecewise => "piecewise",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(Variant::Smooth),
            "piecewise" => Ok(Variant::Piecewise),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant `{other}` (expected smooth or piecewise)"
            ))),
        }
    }
}

/// A least-squares problem made noisy: `(1 + ε_f ψ(x)) · aggregate(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyVariant {
    pub base: LeastSquaresProblem,
    pub variant: Variant,
    pub eps_f: f64,
}

impl NoisyVariant {
    pub fn new(base: LeastSquaresProblem, variant: Variant, eps_f: f64) -> Result<Self> {
        if !(eps_f >= 0.0) {
            return Err(Error::InvalidConfig("eps_f must be nonnegative".into()));
        }
        Ok(Self { base, variant, eps_f })
    }

    /// Noise-free aggregate of the residuals.
    pub fn aggregate(&self, x: &[f64]) -> f64 {
        match self.variant {
            Variant::Smooth => self.base.sum_of_squares(x),
            Variant::Piecewise => self.base.sum_of_abs(x),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let agg = self.aggregate(x);
        if self.eps_f == 0.0 {
            agg
        } else {
            (1.0 + self.eps_f * psi(x)) * agg
        }
    }

    pub fn domain(&self) -> &BoxDomain {
        self.base.domain()
    }
}

impl Objective for NoisyVariant {
    fn value(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }
}

/// Uniform point in the box from a ChaCha8 stream seeded with `seed`
/// (`ChaCha8Rng::seed_from_u64`), coordinates drawn in index order.
pub fn random_start(domain: &BoxDomain, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_iterator(
        domain.dimension(),
        domain
            .lower()
            .iter()
            .zip(domain.upper().iter())
            .map(|(&l, &u)| rng.gen_range(l..=u))
            .collect::<Vec<_>>(),
    )
}
