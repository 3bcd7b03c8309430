//! Search-step machinery: quadratic-model descent, simplex-gradient probe,
//! vicinity search, and the scaled-conjugate-gradient line search.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::{fit_quadratic, model_minimizer, simplex_gradient, SampleSet};
use crate::poll::{BoxDomain, Evaluator, BARRIER_VALUE};

const GOLDEN: f64 = 0.381_966_011_250_105_1;
const DEGENERATE_TOL: f64 = 1e-14;

/// Previous simplex gradient and realized step of the last completed SCG
/// iteration. Both are stored together or not at all.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScgMemory {
    last: Option<(DVector<f64>, DVector<f64>)>,
}

impl ScgMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(prev_gradient: DVector<f64>, prev_step: DVector<f64>) -> Self {
        Self {
            last: Some((prev_gradient, prev_step)),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.last.is_none()
    }

    pub fn prev_gradient(&self) -> Option<&DVector<f64>> {
        self.last.as_ref().map(|(g, _)| g)
    }

    pub fn prev_step(&self) -> Option<&DVector<f64>> {
        self.last.as_ref().map(|(_, s)| s)
    }

    pub fn store(&mut self, gradient: DVector<f64>, step: DVector<f64>) {
        self.last = Some((gradient, step));
    }

    pub fn reset(&mut self) {
        self.last = None;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    /// `α`, in units of the search direction.
    pub step_length: f64,
    pub point: DVector<f64>,
    pub value: f64,
}

/// Largest `α ≥ 0` with `x + αd ∈ Ω`.
pub fn max_feasible_step(x: &DVector<f64>, d: &DVector<f64>, domain: &BoxDomain) -> f64 {
    let mut alpha = f64::INFINITY;
    for i in 0..x.len() {
        let di = d[i];
        if di > 0.0 {
            alpha = alpha.min((domain.upper()[i] - x[i]) / di);
        } else if di < 0.0 {
            alpha = alpha.min((domain.lower()[i] - x[i]) / di);
        }
    }
    if alpha.is_infinite() {
        let norm = d.norm();
        alpha = if norm > 0.0 {
            10.0 * domain.max_width() / norm
        } else {
            0.0
        };
    }
    alpha.max(0.0)
}

/// Brent's derivative-free minimizer on `[0, upper]`: golden-section steps
/// with successive parabolic interpolation. Returns `(α, φ(α), b)` where `b`
/// is the final right end of the bracket.
fn brent_bounded<F>(mut phi: F, upper: f64, tol: f64, max_iter: usize) -> Result<(f64, f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let sqrt_eps = f64::EPSILON.sqrt();
    let (mut a, mut b) = (0.0, upper);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = phi(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);

    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = sqrt_eps * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if (u - a) < tol2 || (b - u) < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d >= 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let u = u.clamp(0.0, upper);
        let fu = phi(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok((x, fx, b))
}

/// Minimizes `φ(α) = f(x + αd)` over `α ∈ [0, max_feasible_step]` with Brent's
/// method. Uses at most `max_iter + 2` evaluations. Falls back to `α = 0` and
/// `fx` when nothing beats the incumbent.
pub fn brent_line_search(
    eval: &mut Evaluator<'_>,
    x: &DVector<f64>,
    fx: f64,
    d: &DVector<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<LineSearchResult> {
    let domain = eval.domain().clone();
    let upper = max_feasible_step(x, d, &domain);
    let incumbent = LineSearchResult {
        step_length: 0.0,
        point: x.clone(),
        value: fx,
    };
    if !(upper > 0.0) || d.norm() == 0.0 {
        return Ok(incumbent);
    }
    let point_at = |alpha: f64| domain.clamp(&(x + d * alpha));
    let mut phi = |alpha: f64| eval.evaluate(&point_at(alpha));
    let (mut alpha, mut value, right) = brent_bounded(&mut phi, upper, tol, max_iter)?;

    // Brent never lands exactly on the bracket end; probe it when the
    // right end never moved, i.e. the minimizer is pinned against the box.
    if right >= upper && alpha < upper {
        let fu = phi(upper)?;
        if fu < value {
            alpha = upper;
            value = fu;
        }
    }
    if value < fx {
        Ok(LineSearchResult {
            step_length: alpha,
            point: point_at(alpha),
            value,
        })
    } else {
        Ok(incumbent)
    }
}

fn unit(v: &DVector<f64>) -> Option<DVector<f64>> {
    let n = v.norm();
    (n > DEGENERATE_TOL).then(|| v / n)
}

/// Fits a quadratic model through `x_k` and the feasible poll trials and tries
/// its minimizer (directly when feasible, otherwise by a line search from
/// `x_k` towards it). Returns the new point only if it beats `best_value`.
pub fn quadratic_model_step(
    eval: &mut Evaluator<'_>,
    x_k: &DVector<f64>,
    f_k: f64,
    trial_set: &[(DVector<f64>, f64)],
    best_value: f64,
    brent_max_iter: usize,
    brent_tol: f64,
) -> Result<Option<(DVector<f64>, f64)>> {
    let n = x_k.len();
    let mut points = Vec::with_capacity(trial_set.len());
    let mut values = vec![f_k];
    for (p, v) in trial_set {
        if *v < BARRIER_VALUE && eval.domain().contains(p) && (p - x_k).norm() > DEGENERATE_TOL {
            points.push(p.clone());
            values.push(*v);
        }
    }
    if points.len() + 1 < n + 2 {
        return Ok(None);
    }
    let model = match fit_quadratic(&SampleSet::new(x_k.clone(), points, values)) {
        Ok(m) => m,
        Err(Error::SingularSystem) => return Ok(None),
        Err(e) => return Err(e),
    };
    let Some(y) = model_minimizer(&model) else {
        return Ok(None);
    };
    let candidate = if eval.domain().contains(&y) {
        let v = eval.evaluate(&y)?;
        (y, v)
    } else {
        let Some(dir) = unit(&(&y - x_k)) else {
            return Ok(None);
        };
        let ls = brent_line_search(eval, x_k, f_k, &dir, brent_max_iter, brent_tol)?;
        (ls.point, ls.value)
    };
    Ok((candidate.1 < best_value).then_some(candidate))
}

/// Evaluates up to `l` points on the sphere of radius `r_k` around `x_k`,
/// pointing at the midpoints between `best` and the `l` best trial points.
pub fn vicinity_search(
    eval: &mut Evaluator<'_>,
    x_k: &DVector<f64>,
    r_k: f64,
    trial_set: &[(DVector<f64>, f64)],
    best: (DVector<f64>, f64),
    l: usize,
) -> Result<(DVector<f64>, f64)> {
    let mut sorted: Vec<&(DVector<f64>, f64)> = trial_set.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let candidates: Vec<DVector<f64>> = sorted
        .iter()
        .take(l)
        .filter_map(|(v, _)| {
            let avg = (&best.0 + v) * 0.5;
            unit(&(avg - x_k)).map(|dir| x_k + dir * r_k)
        })
        .collect();
    let batch = eval.evaluate_batch(&candidates);
    let mut best = best;
    for (p, v) in candidates.into_iter().zip(batch.values) {
        if v < best.1 {
            best = (p, v);
        }
    }
    if batch.exhausted {
        return Err(Error::BudgetExhausted);
    }
    Ok(best)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientProbe {
    /// Simplex gradient at `x_k`; absent when the neighbourhood is not poised
    /// or the gradient vanishes.
    pub gradient: Option<DVector<f64>>,
    /// The evaluated point `x_k − r_k ∇ₛf/‖∇ₛf‖`.
    pub probe: Option<(DVector<f64>, f64)>,
}

/// Simplex gradient from every cached point within `r_k(1 + eps2)` of `x_k`,
/// followed by one evaluation at distance `r_k` along its negative.
pub fn simplex_gradient_probe(
    eval: &mut Evaluator<'_>,
    x_k: &DVector<f64>,
    f_k: f64,
    r_k: f64,
    eps2: f64,
) -> Result<GradientProbe> {
    let near = eval.cache().within_ball(x_k, r_k * (1.0 + eps2));
    if near.is_empty() {
        return Ok(GradientProbe::default());
    }
    let (points, vals): (Vec<_>, Vec<_>) = near.into_iter().unzip();
    let mut values = Vec::with_capacity(vals.len() + 1);
    values.push(f_k);
    values.extend(vals);
    let g = match simplex_gradient(x_k, &points, &values) {
        Ok(g) => g,
        Err(Error::NotPoised) => return Ok(GradientProbe::default()),
        Err(e) => return Err(e),
    };
    let Some(dir) = unit(&g) else {
        return Ok(GradientProbe::default());
    };
    let x_g = x_k - dir * r_k;
    let v = eval.evaluate(&x_g)?;
    Ok(GradientProbe {
        gradient: Some(g),
        probe: Some((x_g, v)),
    })
}

/// `θ = −s sᵀ / (sᵀ g)` with `s = x_best − x_k`.
pub fn scg_theta(x_best: &DVector<f64>, x_k: &DVector<f64>, gradient: &DVector<f64>) -> Result<DMatrix<f64>> {
    let s = x_best - x_k;
    let sg = s.dot(gradient);
    if s.norm() <= DEGENERATE_TOL || sg.abs() <= DEGENERATE_TOL {
        return Err(Error::DegenerateTheta);
    }
    Ok(&s * s.transpose() * (-1.0 / sg))
}

/// `β = (θy − s)ᵀ g / (yᵀ s)` with `y = g − g_prev`.
pub fn scg_beta(theta: &DMatrix<f64>, g_new: &DVector<f64>, g_prev: &DVector<f64>, s: &DVector<f64>) -> Option<f64> {
    let y = g_new - g_prev;
    let ys = y.dot(s);
    if ys.abs() <= DEGENERATE_TOL {
        return None;
    }
    Some((theta * &y - s).dot(g_new) / ys)
}

/// `d = −θ g + β s`, restarting with `−g` when there is no memory or `yᵀs`
/// degenerates.
pub fn scg_direction(theta: &DMatrix<f64>, g_new: &DVector<f64>, memory: &ScgMemory) -> DVector<f64> {
    let (Some(g_prev), Some(s)) = (memory.prev_gradient(), memory.prev_step()) else {
        return -g_new;
    };
    match scg_beta(theta, g_new, g_prev, s) {
        Some(beta) => -(theta * g_new) + s * beta,
        None => -g_new,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScgOutcome {
    pub point: DVector<f64>,
    pub value: f64,
    /// Distance covered by the line search when it improved on the best
    /// point, else 0.
    pub step_length: f64,
}

/// Scaled-conjugate-gradient step from `x_k`. Uses the SCG direction when it
/// is a descent direction for `gradient`, otherwise the greedy direction
/// `x_best − x_k`. Updates `memory` with the current gradient and the realized
/// step towards the returned point.
#[allow(clippy::too_many_arguments)]
pub fn scg_step(
    eval: &mut Evaluator<'_>,
    x_k: &DVector<f64>,
    f_k: f64,
    best: (DVector<f64>, f64),
    gradient: Option<&DVector<f64>>,
    memory: &mut ScgMemory,
    brent_max_iter: usize,
    brent_tol: f64,
) -> Result<ScgOutcome> {
    let greedy = &best.0 - x_k;
    let direction = match gradient {
        Some(g) => {
            let d = match scg_theta(&best.0, x_k, g) {
                Ok(theta) => scg_direction(&theta, g, memory),
                Err(_) => greedy.clone(),
            };
            if d.dot(g) < 0.0 {
                unit(&d)
            } else {
                unit(&greedy)
            }
        }
        None => unit(&greedy),
    };

    let mut outcome = ScgOutcome {
        point: best.0,
        value: best.1,
        step_length: 0.0,
    };
    if let Some(dir) = direction {
        let ls = brent_line_search(eval, x_k, f_k, &dir, brent_max_iter, brent_tol)?;
        if ls.value < outcome.value {
            outcome = ScgOutcome {
                point: ls.point,
                value: ls.value,
                step_length: ls.step_length,
            };
        }
    }
    match gradient {
        Some(g) => memory.store(g.clone(), &outcome.point - x_k),
        None => memory.reset(),
    }
    Ok(outcome)
}
