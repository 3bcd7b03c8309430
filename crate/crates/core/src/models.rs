//! Quadratic interpolation models and simplex gradients.
//!
//! Models use the monomial basis `{1, x₁, …, xₙ, x₁²/2, …, xₙ²/2, x₁x₂, x₁x₃,
//! …, xₙ₋₁xₙ}` in coordinates relative to the sample-set centre. Depending on
//! the number of samples the coefficients come from a least-squares fit, a
//! square solve, or the minimum-Frobenius-norm (MFN) problem
//! `min ½‖α_Q‖² s.t. M_L α_L + M_Q α_Q = f`, which is solved through the
//! block system `[[M_Q M_Qᵀ, M_L], [M_Lᵀ, 0]] (μ, α_L) = (f, 0)`,
//! `α_Q = M_Qᵀ μ`.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot / singular-value threshold for model fits.
pub const MODEL_RANK_TOL: f64 = 1e-12;
/// Relative singular-value threshold for simplex gradients.
pub const POISED_TOL: f64 = 1e-10;

/// Number of monomials in a full quadratic basis on `ℝⁿ`.
pub fn basis_size(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

/// Centre `y⁰` plus `p` further sample points and the `p + 1` values
/// `f(y⁰), f(y¹), …, f(yᵖ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub center: DVector<f64>,
    pub points: Vec<DVector<f64>>,
    pub values: Vec<f64>,
}

impl SampleSet {
    pub fn new(center: DVector<f64>, points: Vec<DVector<f64>>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), points.len() + 1, "one value per sample plus the centre");
        Self { center, points, values }
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    /// Total number of samples including the centre (`p + 1`).
    pub fn len(&self) -> usize {
        self.points.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn all_points(&self) -> impl Iterator<Item = &DVector<f64>> {
        std::iter::once(&self.center).chain(self.points.iter())
    }
}

/// `m(y) = α_Lᵀ φ_L(y − c) + α_Qᵀ φ_Q(y − c)` around the frame origin `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub center: DVector<f64>,
    /// Constant term followed by the n linear coefficients.
    pub alpha_l: DVector<f64>,
    /// Squares (`xᵢ²/2`) first, then cross terms `xᵢxⱼ`, `i < j`, row-major.
    pub alpha_q: DVector<f64>,
}

/// Quadratic monomials `φ_Q(z)` in the fixed ordering.
pub fn quadratic_features(z: &DVector<f64>) -> DVector<f64> {
    let n = z.len();
    let mut phi = Vec::with_capacity(n * (n + 1) / 2);
    phi.extend(z.iter().map(|v| 0.5 * v * v));
    for i in 0..n {
        for j in i + 1..n {
            phi.push(z[i] * z[j]);
        }
    }
    DVector::from_vec(phi)
}

/// Packs a symmetric matrix into `α_Q` ordering.
pub fn hessian_to_alpha_q(h: &DMatrix<f64>) -> DVector<f64> {
    let n = h.nrows();
    let mut a = Vec::with_capacity(n * (n + 1) / 2);
    a.extend((0..n).map(|i| h[(i, i)]));
    for i in 0..n {
        for j in i + 1..n {
            a.push(h[(i, j)]);
        }
    }
    DVector::from_vec(a)
}

impl QuadraticModel {
    /// Builds a model from its value, gradient and Hessian at `center`.
    pub fn from_taylor(center: DVector<f64>, value: f64, gradient: &DVector<f64>, hessian: &DMatrix<f64>) -> Self {
        let n = center.len();
        let mut alpha_l = DVector::zeros(n + 1);
        alpha_l[0] = value;
        alpha_l.rows_mut(1, n).copy_from(gradient);
        Self {
            center,
            alpha_l,
            alpha_q: hessian_to_alpha_q(hessian),
        }
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        let n = self.dimension();
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = self.alpha_q[i];
        }
        let mut k = n;
        for i in 0..n {
            for j in i + 1..n {
                h[(i, j)] = self.alpha_q[k];
                h[(j, i)] = self.alpha_q[k];
                k += 1;
            }
        }
        h
    }

    /// Gradient of the model at the frame origin.
    pub fn linear_gradient(&self) -> DVector<f64> {
        self.alpha_l.rows(1, self.dimension()).into_owned()
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let w = x - &self.center;
        self.alpha_l[0] + self.linear_gradient().dot(&w) + self.alpha_q.dot(&quadratic_features(&w))
    }
}

/// Fits a quadratic to `samples`: least squares when over-determined,
/// a square solve when determined, the MFN model otherwise.
pub fn fit_quadratic(samples: &SampleSet) -> Result<QuadraticModel> {
    let n = samples.dimension();
    let m = samples.len();
    let center = &samples.center;
    let f_ref = samples.values[0];

    // Work in z = (y − c)/s with O(1) entries; undo the scaling at the end.
    let shifted: Vec<DVector<f64>> = samples.all_points().map(|y| y - center).collect();
    let s = shifted.iter().map(|w| w.norm()).fold(0.0, f64::max);
    let s = if s > 0.0 { s } else { 1.0 };
    let z: Vec<DVector<f64>> = shifted.iter().map(|w| w / s).collect();
    let rhs = DVector::from_iterator(m, samples.values.iter().map(|v| v - f_ref));

    let (lin, hess_z) = if m >= basis_size(n) {
        fit_regression(&z, &rhs)?
    } else {
        fit_mfn(&z, &rhs)?
    };

    let mut alpha_l = DVector::zeros(n + 1);
    alpha_l[0] = lin[0] + f_ref;
    for i in 0..n {
        alpha_l[i + 1] = lin[i + 1] / s;
    }
    let hess = hess_z / (s * s);
    Ok(QuadraticModel {
        center: center.clone(),
        alpha_l,
        alpha_q: hessian_to_alpha_q(&hess),
    })
}

fn fit_regression(z: &[DVector<f64>], rhs: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = z[0].len();
    let cols = basis_size(n);
    let mut mat = DMatrix::zeros(z.len(), cols);
    for (r, zr) in z.iter().enumerate() {
        mat[(r, 0)] = 1.0;
        for i in 0..n {
            mat[(r, 1 + i)] = zr[i];
        }
        let q = quadratic_features(zr);
        for (k, v) in q.iter().enumerate() {
            mat[(r, 1 + n + k)] = *v;
        }
    }
    let svd = mat.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > MODEL_RANK_TOL * smax) {
        return Err(Error::SingularSystem);
    }
    let alpha = svd.solve(rhs, 0.0).map_err(|_| Error::SingularSystem)?;
    let lin = alpha.rows(0, n + 1).into_owned();
    let model = QuadraticModel {
        center: DVector::zeros(n),
        alpha_l: lin.clone(),
        alpha_q: alpha.rows(n + 1, cols - n - 1).into_owned(),
    };
    Ok((lin, model.hessian()))
}

fn fit_mfn(z: &[DVector<f64>], rhs: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let m = z.len();
    let n = z[0].len();
    let dim = m + n + 1;
    let mut f = DMatrix::zeros(dim, dim);
    // (M_Q M_Qᵀ)_ab = φ_Q(z_a)·φ_Q(z_b) = (z_aᵀz_b)²/2 − Σᵢ (z_ai z_bi)²/4
    for a in 0..m {
        for b in a..m {
            let dot = z[a].dot(&z[b]);
            let sq: f64 = z[a].iter().zip(z[b].iter()).map(|(x, y)| (x * y) * (x * y)).sum();
            let k = 0.5 * dot * dot - 0.25 * sq;
            f[(a, b)] = k;
            f[(b, a)] = k;
        }
        f[(a, m)] = 1.0;
        f[(m, a)] = 1.0;
        for i in 0..n {
            f[(a, m + 1 + i)] = z[a][i];
            f[(m + 1 + i, a)] = z[a][i];
        }
    }
    let mut b = DVector::zeros(dim);
    b.rows_mut(0, m).copy_from(rhs);

    let lu = f.lu();
    let u = lu.u();
    let diag = u.diagonal().abs();
    if !(diag.min() > MODEL_RANK_TOL * diag.max()) {
        return Err(Error::SingularSystem);
    }
    let sol = lu.solve(&b).ok_or(Error::SingularSystem)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let mu = sol.rows(0, m);
    let lin = sol.rows(m, n + 1).into_owned();

    // α_Q = M_Qᵀ μ, i.e. H = Σ_j μ_j z_j z_jᵀ with the diagonal halved.
    let mut h = DMatrix::zeros(n, n);
    for (j, zj) in z.iter().enumerate() {
        h.ger(mu[j], zj, zj, 1.0);
    }
    for i in 0..n {
        h[(i, i)] *= 0.5;
    }
    Ok((lin, h))
}

/// Value, gradient and Hessian of `model` at `x`.
pub fn model_gradient_hessian(model: &QuadraticModel, x: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
    let h = model.hessian();
    let w = x - &model.center;
    let g = model.linear_gradient() + &h * &w;
    (model.value(x), g, h)
}

/// Unique minimizer of `model` when its Hessian is positive definite.
pub fn model_minimizer(model: &QuadraticModel) -> Option<DVector<f64>> {
    let h = model.hessian();
    let scale = h.abs().max();
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let chol = Cholesky::new(h)?;
    let l = chol.l_dirty();
    // reject numerically semidefinite factorizations
    let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |a, &v| a.min(v * v));
    if !(min_pivot > MODEL_RANK_TOL * scale) {
        return None;
    }
    let step = chol.solve(&(-model.linear_gradient()));
    if step.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(&model.center + step)
}

/// Simplex gradient at `center` from `neighbors`: solves `Yᵀ g = b` with
/// `Y = [y¹ − y⁰, …]` and `b = [f(yⁱ) − f(y⁰)]`; least squares when there are
/// more neighbours than dimensions, minimum-norm when there are fewer.
///
/// `values[0]` is `f(center)`, followed by one value per neighbour.
pub fn simplex_gradient(center: &DVector<f64>, neighbors: &[DVector<f64>], values: &[f64]) -> Result<DVector<f64>> {
    assert_eq!(values.len(), neighbors.len() + 1);
    let n = center.len();
    let q = neighbors.len();
    if q == 0 {
        return Err(Error::NotPoised);
    }
    let mut y = DMatrix::zeros(q, n);
    for (r, p) in neighbors.iter().enumerate() {
        y.row_mut(r).copy_from(&(p - center).transpose());
    }
    let b = DVector::from_iterator(q, values[1..].iter().map(|v| v - values[0]));
    let svd = y.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || !(smin > POISED_TOL * smax) {
        return Err(Error::NotPoised);
    }
    svd.solve(&b, 0.0).map_err(|_| Error::NotPoised)
}
