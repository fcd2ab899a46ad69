//! Ordinary least squares with coefficient standard errors.

use crate::error::{arg, Error, Result};
use crate::geometry::solve;

#[derive(Clone, Debug)]
pub struct LeastSquares {
    /// Intercept first, then one coefficient per regressor.
    pub coef: Vec<f64>,
    pub stderr: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl LeastSquares {
    pub fn residual_max(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Fits `y ≈ c0 + Σ c_k x_k`. Each row of `xs` holds the regressors of one observation.
pub fn least_squares(xs: &[Vec<f64>], y: &[f64]) -> Result<LeastSquares> {
    let m = y.len();
    if xs.len() != m {
        return arg("regressor and response lengths differ");
    }
    let p = xs.first().map_or(0, |r| r.len()) + 1;
    if m < p {
        return arg(format!("{m} observations cannot determine {p} coefficients"));
    }
    if xs.iter().any(|r| r.len() + 1 != p) || y.iter().any(|v| !v.is_finite()) {
        return arg("ragged or non-finite regression input");
    }
    let row = |i: usize| -> Vec<f64> {
        let mut r = Vec::with_capacity(p);
        r.push(1.0);
        r.extend_from_slice(&xs[i]);
        r
    };
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (i, yi) in y.iter().enumerate().take(m) {
        let r = row(i);
        for ((ra, ty), tx) in r.iter().zip(xty.iter_mut()).zip(xtx.iter_mut()) {
            *ty += ra * yi;
            for (rb, v) in r.iter().zip(tx.iter_mut()) {
                *v += ra * rb;
            }
        }
    }
    // reject designs whose regressors do not vary
    for (a, xa) in xtx.iter().enumerate().skip(1) {
        let mean = xtx[0][a] / m as f64;
        let var = xa[a] / m as f64 - mean * mean;
        if !(var > 1e-12 * (1.0 + mean * mean)) {
            return arg(format!("regressor {a} does not vary"));
        }
    }
    let singular = || Error::Argument("ill-conditioned regression design".into());
    let coef = solve(xtx.clone(), xty).ok_or_else(singular)?;
    let residuals: Vec<f64> = (0..m)
        .map(|i| y[i] - row(i).iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let dof = (m - p).max(1) as f64;
    let sigma2 = residuals.iter().map(|r| r * r).sum::<f64>() / dof;
    let mut stderr = Vec::with_capacity(p);
    for a in 0..p {
        let mut e = vec![0.0; p];
        e[a] = 1.0;
        let col = solve(xtx.clone(), e).ok_or_else(singular)?;
        stderr.push((sigma2 * col[a]).max(0.0).sqrt());
    }
    Ok(LeastSquares {
        coef,
        stderr,
        residuals,
    })
}

/// Simple regression `y ≈ a + b x`.
pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LeastSquares> {
    let xs: Vec<Vec<f64>> = x.iter().map(|v| vec![*v]).collect();
    least_squares(&xs, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = line_fit(&x, &y).unwrap();
        assert!((f.coef[0] - 2.0).abs() < 1e-12 && (f.coef[1] + 0.5).abs() < 1e-12);
        assert!(f.residual_max() < 1e-12);
    }

    #[test]
    fn known_noisy_fit() {
        // y = 1, 3, 2, 5 at x = 0..3: slope 1.1, intercept 1.1
        let f = line_fit(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 5.0]).unwrap();
        assert!((f.coef[1] - 1.1).abs() < 1e-12);
        assert!((f.coef[0] - 1.1).abs() < 1e-12);
        // s² = 2.7 / 2, Sxx = 5
        assert!((f.stderr[1] - (1.35f64 / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_designs() {
        assert!(line_fit(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
        assert!(line_fit(&[1.0], &[0.0]).is_err());
        let xs = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0], vec![4.0, 8.0]];
        assert!(least_squares(&xs, &[1.0, 2.0, 3.0, 4.0]).is_err());
    }
}
