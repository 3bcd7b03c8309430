//! Independent reference computations shared by the integration tests.
//! Nothing here goes through nalgebra's factorizations.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;

/// Dense solve by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// `(y_i²/2)_i` followed by `(y_i y_j)_{i<j}`.
pub fn quad_monomials(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut out: Vec<f64> = y.iter().map(|v| 0.5 * v * v).collect();
    for i in 0..n {
        for j in i + 1..n {
            out.push(y[i] * y[j]);
        }
    }
    out
}

/// Minimum Frobenius norm interpolation written as the full first-order
/// optimality system of
///
///   min ½‖α_Q‖²  s.t.  α_c + α_gᵀ w_a + α_Qᵀ φ_Q(w_a) = f_a,   w_a = y_a − c,
///
/// in the unknowns `(α_Q, α_c, α_g, λ)`. Returns `(α_c, α_g, α_Q)`.
pub fn mfn_kkt_oracle(center: &[f64], points: &[Vec<f64>], values: &[f64]) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let n = center.len();
    let q = n * (n + 1) / 2;
    let m = points.len();
    let dim = q + 1 + n + m;
    let mut a = vec![vec![0.0; dim]; dim];
    let mut b = vec![0.0; dim];
    let rows: Vec<(Vec<f64>, Vec<f64>)> = points
        .iter()
        .map(|y| {
            let w: Vec<f64> = y.iter().zip(center).map(|(a, c)| a - c).collect();
            let phi = quad_monomials(&w);
            (w, phi)
        })
        .collect();
    // α_Q − Σ_a λ_a φ_Q(w_a) = 0
    for k in 0..q {
        a[k][k] = 1.0;
        for (j, (_, phi)) in rows.iter().enumerate() {
            a[k][q + 1 + n + j] = -phi[k];
        }
    }
    // Σ_a λ_a = 0 and Σ_a λ_a w_a = 0
    for (j, (w, _)) in rows.iter().enumerate() {
        a[q][q + 1 + n + j] = 1.0;
        for i in 0..n {
            a[q + 1 + i][q + 1 + n + j] = w[i];
        }
    }
    // interpolation rows
    for (j, (w, phi)) in rows.iter().enumerate() {
        let r = q + 1 + n + j;
        a[r][..q].copy_from_slice(phi);
        a[r][q] = 1.0;
        a[r][q + 1..q + 1 + n].copy_from_slice(w);
        b[r] = values[j];
    }
    let sol = gauss_solve(a, b)?;
    Some((sol[q], sol[q + 1..q + 1 + n].to_vec(), sol[..q].to_vec()))
}

/// A random quadratic `f(x) = c + gᵀx + ½ xᵀHx` with `H` symmetric.
#[derive(Debug, Clone)]
pub struct RandomQuadratic {
    pub c: f64,
    pub g: Vec<f64>,
    pub h: Vec<Vec<f64>>,
}

impl RandomQuadratic {
    pub fn sample<R: Rng>(rng: &mut R, n: usize) -> Self {
        let mut h = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-3.0..3.0);
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        Self {
            c: rng.gen_range(-5.0..5.0),
            g: (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect(),
            h,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut v = self.c;
        for i in 0..n {
            v += self.g[i] * x[i];
            for j in 0..n {
                v += 0.5 * x[i] * self.h[i][j] * x[j];
            }
        }
        v
    }

    /// Gradient at `x`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| self.g[i] + (0..x.len()).map(|j| self.h[i][j] * x[j]).sum::<f64>())
            .collect()
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
