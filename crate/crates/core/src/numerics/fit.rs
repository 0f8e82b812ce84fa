use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{Error, Result};

/// Least-squares fit `log y ≈ slope·log x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit<T> {
    pub slope: T,
    pub intercept: T,
    pub rms_residual: T,
    pub points: usize,
}

/// Ordinary least-squares line through `(xs, ys)`: `(slope, intercept, rms)`.
pub fn least_squares<T: Real>(xs: &[T], ys: &[T]) -> Result<(T, T, T)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid(
            "least squares needs matching inputs, at least 2 points",
        ));
    }
    let m = T::from_usize_(xs.len());
    let mx = xs.iter().fold(T::zero(), |s, &x| s + x) / m;
    let my = ys.iter().fold(T::zero(), |s, &y| s + y) / m;
    let (mut sxx, mut sxy) = (T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        sxx = sxx + (x - mx) * (x - mx);
        sxy = sxy + (x - mx) * (y - my);
    }
    if !(sxx > T::zero()) {
        return Err(Error::invalid("least squares needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss = xs.iter().zip(ys).fold(T::zero(), |s, (&x, &y)| {
        let e = y - slope * x - intercept;
        s + e * e
    });
    Ok((slope, intercept, (ss / m).sqrt()))
}

fn logs<T: Real>(xs: &[T], ys: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("fit inputs differ in length"));
    }
    if xs.len() < 4 {
        return Err(Error::invalid(format!(
            "slope fit needs at least 4 points, got {}",
            xs.len()
        )));
    }
    if xs
        .iter()
        .chain(ys)
        .any(|v| !(*v > T::zero()) || !v.is_finite())
    {
        return Err(Error::invalid(
            "slope fit inputs must be positive and finite",
        ));
    }
    Ok((
        xs.iter().map(|x| x.ln()).collect(),
        ys.iter().map(|y| y.ln()).collect(),
    ))
}

pub fn fit_loglog<T: Real>(xs: &[T], ys: &[T]) -> Result<SlopeFit<T>> {
    let (lx, ly) = logs(xs, ys)?;
    let (slope, intercept, rms_residual) = least_squares(&lx, &ly)?;
    Ok(SlopeFit {
        slope,
        intercept,
        rms_residual,
        points: xs.len(),
    })
}

/// Log-log fit with a first-order correction: `log y ≈ k·log x + b + c·x`.
///
/// For `y = C x^k (1 + O(x))` as `x → 0` this removes the bias the plain
/// fit picks up from the correction term. The returned slope is `k`.
pub fn fit_loglog_corrected<T: Real>(xs: &[T], ys: &[T]) -> Result<SlopeFit<T>> {
    let (lx, ly) = logs(xs, ys)?;
    // Normal equations for the basis (log x, 1, x).
    let cols: [Vec<T>; 3] = [lx.clone(), vec![T::one(); xs.len()], xs.to_vec()];
    let mut a = [[T::zero(); 4]; 3];
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] = cols[i]
                .iter()
                .zip(&cols[j])
                .fold(T::zero(), |s, (p, q)| s + *p * *q);
        }
        a[i][3] = cols[i]
            .iter()
            .zip(&ly)
            .fold(T::zero(), |s, (p, q)| s + *p * *q);
    }
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        if a[col][col] == T::zero() {
            return Err(Error::Singular(col));
        }
        for row in 0..3 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..4 {
                    a[row][k] = a[row][k] - f * a[col][k];
                }
            }
        }
    }
    let coef: Vec<T> = (0..3).map(|i| a[i][3] / a[i][i]).collect();
    let ss = (0..xs.len()).fold(T::zero(), |s, i| {
        let e = ly[i] - coef[0] * lx[i] - coef[1] - coef[2] * xs[i];
        s + e * e
    });
    Ok(SlopeFit {
        slope: coef[0],
        intercept: coef[1],
        rms_residual: (ss / T::from_usize_(xs.len())).sqrt(),
        points: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xs() -> Vec<f64> {
        (0..12).map(|i| 0.1 * 1.4f64.powi(i)).collect()
    }

    #[test]
    fn exact_power_laws() {
        let x = xs();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let f = fit_loglog(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-10);
        assert!(f.rms_residual < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| 3.0 / v).collect();
        assert!((fit_loglog(&x, &y).unwrap().slope + 1.0).abs() < 1e-10);
    }

    #[test]
    fn perturbed_power_law() {
        let x = xs();
        let y: Vec<f64> = x
            .iter()
            .map(|v| v * v * (1.0 + 0.01 * v.ln().sin()))
            .collect();
        assert!((fit_loglog(&x, &y).unwrap().slope - 2.0).abs() < 0.02);
    }

    #[test]
    fn corrected_fit_removes_linear_correction() {
        let x: Vec<f64> = (0..10).map(|i| 0.02 * 1.3f64.powi(i)).collect();
        let y: Vec<f64> = x.iter().map(|d| d.powi(-2) * (0.5 * d).exp()).collect();
        let f = fit_loglog_corrected(&x, &y).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_loglog(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_loglog(&[1.0, 2.0, 3.0, -4.0], &[1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(fit_loglog(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 3.0, 4.0]).is_err());
    }
}
