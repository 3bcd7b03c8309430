//! Poll direction sets: regular-simplex (equiangular) minimal positive bases,
//! Halton quasi-random directions and Householder rotations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Reflectors with `‖d − u‖` at or below this are treated as the identity.
pub const REFLECTOR_TOL: f64 = 1e-12;

const HALTON_ZERO_TOL: f64 = 1e-12;

/// Radical inverse of `index` in `base`.
///
/// Digits of `index` in base `base` are mirrored about the radix point, so
/// `index = d0 + d1·b + d2·b² + …` maps to `d0/b + d1/b² + d2/b³ + …`.
pub fn halton_value(index: u64, base: u64) -> f64 {
    debug_assert!(base >= 2);
    let b = base as f64;
    let mut i = index;
    let inv = 1.0 / b;
    let mut scale = inv;
    let mut acc = 0.0;
    while i > 0 {
        acc += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    acc
}

/// The first `n` primes in increasing order.
pub fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut candidate = 2u64;
    while primes.len() < n {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// Position in an `n`-dimensional Halton sequence, one prime base per coordinate.
///
/// A cursor belongs to a single solver run; every draw consumes at least one
/// index and indices are never reused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HaltonCursor {
    index: u64,
    bases: Vec<u64>,
}

impl HaltonCursor {
    pub fn new(n: usize) -> Self {
        Self::starting_at(n, 1)
    }

    /// Cursor whose next draw uses `index` (clamped to at least 1).
    pub fn starting_at(n: usize, index: u64) -> Self {
        assert!(n >= 1, "dimension must be positive");
        Self {
            index: index.max(1),
            bases: first_primes(n),
        }
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn bases(&self) -> &[u64] {
        &self.bases
    }

    pub fn dimension(&self) -> usize {
        self.bases.len()
    }

    /// Raw Halton point in `(0,1)ⁿ` at the current index; advances the cursor.
    pub fn next_point(&mut self) -> DVector<f64> {
        let idx = self.index;
        self.index += 1;
        DVector::from_iterator(self.bases.len(), self.bases.iter().map(|&b| halton_value(idx, b)))
    }

    /// Next unit direction: the Halton point mapped to `(−1,1)ⁿ` by `2h − 1`
    /// and normalized. Points that land on the origin are skipped.
    pub fn next_direction(&mut self) -> DVector<f64> {
        loop {
            let v = self.next_point().map(|h| 2.0 * h - 1.0);
            let norm = v.norm();
            if norm >= HALTON_ZERO_TOL {
                return v / norm;
            }
        }
    }
}

/// `n + 1` unit vectors in `ℝⁿ` with pairwise dot product `−1/n` and zero sum.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionBasis {
    directions: Vec<DVector<f64>>,
}

impl DirectionBasis {
    /// Wraps a direction list without checking the invariants.
    pub fn from_directions(directions: Vec<DVector<f64>>) -> Self {
        Self { directions }
    }

    pub fn dimension(&self) -> usize {
        self.directions[0].len()
    }

    pub fn directions(&self) -> &[DVector<f64>] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn first(&self) -> &DVector<f64> {
        &self.directions[0]
    }

    /// Largest deviations from the three basis invariants:
    /// `(max |‖d‖ − 1|, max |dᵢ·dⱼ + 1/n|, ‖Σ d‖)`.
    pub fn invariant_residuals(&self) -> (f64, f64, f64) {
        let n = self.dimension() as f64;
        let mut norm_err: f64 = 0.0;
        let mut dot_err: f64 = 0.0;
        let mut sum = DVector::zeros(self.dimension());
        for (i, di) in self.directions.iter().enumerate() {
            norm_err = norm_err.max((di.norm() - 1.0).abs());
            sum += di;
            for dj in &self.directions[i + 1..] {
                dot_err = dot_err.max((di.dot(dj) + 1.0 / n).abs());
            }
        }
        (norm_err, dot_err, sum.norm())
    }
}

/// Vertices of a regular simplex centred at the origin.
///
/// The first `n` vertices are `a·eᵢ + b·𝟙`, the last is `−𝟙/√n`, with
/// `a = √((n+1)/n)` and `b = (1/√n − a)/n`.
pub fn equiangular_basis(n: usize) -> DirectionBasis {
    assert!(n >= 1, "dimension must be positive");
    let nf = n as f64;
    let a = ((nf + 1.0) / nf).sqrt();
    let b = (1.0 / nf.sqrt() - a) / nf;
    let mut directions = Vec::with_capacity(n + 1);
    for i in 0..n {
        let mut d = DVector::from_element(n, b);
        d[i] += a;
        let norm = d.norm();
        directions.push(d / norm);
    }
    directions.push(DVector::from_element(n, -1.0 / nf.sqrt()));
    DirectionBasis { directions }
}

/// `H = I − 2 vvᵀ/‖v‖²` with `v = d − u`; for unit `d`, `u` this maps `d` onto `u`.
pub fn householder_matrix(d: &DVector<f64>, u: &DVector<f64>) -> Result<DMatrix<f64>> {
    let v = d - u;
    let vv = v.norm_squared();
    if vv.sqrt() <= REFLECTOR_TOL {
        return Err(Error::DegenerateReflection);
    }
    let mut h = DMatrix::identity(d.len(), d.len());
    h.ger(-2.0 / vv, &v, &v, 1.0);
    Ok(h)
}

/// Reflects every direction of `base` with the Householder matrix that maps
/// its first direction onto `u`. Returns `base` unchanged when the reflector
/// degenerates.
pub fn rotate_basis(base: &DirectionBasis, u: &DVector<f64>) -> DirectionBasis {
    let h = match householder_matrix(base.first(), u) {
        Ok(h) => h,
        Err(_) => return base.clone(),
    };
    DirectionBasis {
        directions: base.directions.iter().map(|d| &h * d).collect(),
    }
}
