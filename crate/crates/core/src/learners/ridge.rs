use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SimError};

/// Solves `(XᵀX + λI) w = Xᵀy` by Cholesky factorization.
pub fn fit_ridge(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if x.is_empty() || x.len() != y.len() {
        return Err(SimError::LengthMismatch(x.len(), y.len()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(SimError::InvalidArgument(format!("ridge λ = {lambda}")));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(SimError::InvalidArgument("ragged design matrix".into()));
    }
    let (gram, rhs) = normal_equations(x, y, lambda);
    let max_diag = (0..d).map(|i| gram[(i, i)]).fold(0.0_f64, f64::max);
    let chol = gram.cholesky().ok_or(SimError::RankDeficient)?;
    // A numerically singular Gram matrix can still factor with a tiny pivot.
    let l = chol.l_dirty();
    if (0..d).any(|i| l[(i, i)] * l[(i, i)] <= 1e-12 * max_diag.max(f64::MIN_POSITIVE)) {
        return Err(SimError::RankDeficient);
    }
    let w = chol.solve(&rhs);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(SimError::RankDeficient);
    }
    Ok(w.iter().copied().collect())
}

fn normal_equations(x: &[Vec<f64>], y: &[f64], lambda: f64) -> (DMatrix<f64>, DVector<f64>) {
    let d = x[0].len();
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for (row, &target) in x.iter().zip(y) {
        for i in 0..d {
            if row[i] == 0.0 {
                continue;
            }
            rhs[i] += row[i] * target;
            for j in i..d {
                gram[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
        gram[(i, i)] += lambda;
    }
    (gram, rhs)
}

/// `Xᵀ(Xw − y) + λw`, the gradient of the ridge objective (up to a factor 2).
pub fn ridge_gradient(x: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64) -> Vec<f64> {
    let mut g: Vec<f64> = w.iter().map(|wi| lambda * wi).collect();
    for (row, &target) in x.iter().zip(y) {
        let r = dot(row, w) - target;
        for (gi, xi) in g.iter_mut().zip(row) {
            *gi += xi * r;
        }
    }
    g
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
