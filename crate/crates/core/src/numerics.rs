//! Small numerical helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Result};

/// Uniform grid `t_m = m T / steps`, `m = 0..=steps`.
pub fn uniform_grid(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|m| horizon * m as f64 / steps as f64).collect()
}

/// `(1/T) ∫_0^T f` by the trapezoid rule on a uniform grid.
pub fn trapezoid_average(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            (inner + 0.5 * (values[0] + values[n - 1])) / (n - 1) as f64
        }
    }
}

/// Cubic Hermite value at the midpoint of an interval of length `h`.
pub fn hermite_mid(y0: &DVector<f64>, d0: &DVector<f64>, y1: &DVector<f64>, d1: &DVector<f64>, h: f64) -> DVector<f64> {
    (y0 + y1) * 0.5 + (d0 - d1) * (h / 8.0)
}

/// Linear interpolation on a uniform grid over `[0, horizon]`; a single
/// sample is read as a constant path.
pub fn interp_uniform(values: &[DVector<f64>], horizon: f64, t: f64) -> DVector<f64> {
    if values.len() == 1 {
        return values[0].clone();
    }
    let steps = values.len() - 1;
    let x = (t / horizon * steps as f64).clamp(0.0, steps as f64);
    let m = (x.floor() as usize).min(steps - 1);
    let w = x - m as f64;
    &values[m] * (1.0 - w) + &values[m + 1] * w
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Largest singular value.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.singular_values().max()
}

/// Minimum eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Principal square root of a symmetric PSD matrix. Negative eigenvalues
/// down to `-1e-12 · trace` are clamped to zero; anything below is rejected.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut sym = m.clone();
    symmetrize(&mut sym);
    // absolute floor for matrices that are zero up to roundoff
    let tol = 1e-12 * sym.trace().abs() + 1e-15;
    if sym.nrows() == 1 {
        let v = sym[(0, 0)];
        if v < -tol {
            return invalid(format!("matrix is not PSD (value {v:e})"));
        }
        return Ok(DMatrix::from_element(1, 1, v.max(0.0).sqrt()));
    }
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().any(|&l| l < -tol) {
        return invalid(format!(
            "matrix is not PSD (min eigenvalue {:e})",
            eig.eigenvalues.min()
        ));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Builds a `d × d` matrix from row vectors.
pub fn matrix_from_rows(rows: &[Vec<f64>], d: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return invalid(format!("{what} must be a {d}x{d} matrix"));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return invalid(format!("{what} has non-finite entries"));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let grid = uniform_grid(2.0, 10);
        let vals: Vec<f64> = grid.iter().map(|t| 3.0 * t + 1.0).collect();
        assert_relative_eq!(trapezoid_average(&vals), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn hermite_is_exact_for_cubics() {
        let f = |t: f64| t * t * t - 2.0 * t;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let v = |x: f64| DVector::from_element(1, x);
        let mid = hermite_mid(&v(f(1.0)), &v(df(1.0)), &v(f(1.5)), &v(df(1.5)), 0.5);
        assert_relative_eq!(mid[0], f(1.25), epsilon = 1e-14);
    }

    #[test]
    fn sqrt_of_psd() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let s = psd_sqrt(&m).unwrap();
        assert_relative_eq!(&s * &s, m, epsilon = 1e-12);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(psd_sqrt(&bad).is_err());
    }

    #[test]
    fn interpolation_endpoints() {
        let vals = vec![DVector::from_element(1, 0.0), DVector::from_element(1, 2.0)];
        assert_eq!(interp_uniform(&vals, 1.0, 0.25)[0], 0.5);
        assert_eq!(interp_uniform(&vals, 1.0, 1.0)[0], 2.0);
        assert_eq!(interp_uniform(&vals[..1], 1.0, 0.7)[0], 0.0);
    }
}
