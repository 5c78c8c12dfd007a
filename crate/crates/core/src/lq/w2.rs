use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::numerics::psd_sqrt;

use super::spec::GaussianLaw;

/// Squared 2-Wasserstein distance between two Gaussians,
/// `|m₁ − m₂|² + tr(S₁ + S₂ − 2 (S₁^½ S₂ S₁^½)^½)`.
pub fn w2_squared(
    mean1: &DVector<f64>,
    cov1: &DMatrix<f64>,
    mean2: &DVector<f64>,
    cov2: &DMatrix<f64>,
) -> Result<f64> {
    let d = mean1.len();
    if mean2.len() != d || cov1.shape() != (d, d) || cov2.shape() != (d, d) {
        return invalid("w2: dimension mismatch");
    }
    let shift = (mean1 - mean2).norm_squared();
    let r1 = psd_sqrt(cov1)?;
    let bures = if d == 1 {
        let r2 = psd_sqrt(cov2)?;
        (r1[(0, 0)] - r2[(0, 0)]).powi(2)
    } else {
        let cross = psd_sqrt(&(&r1 * cov2 * &r1))?;
        cov1.trace() + cov2.trace() - 2.0 * cross.trace()
    };
    Ok(shift + bures.max(0.0))
}

pub fn w2_squared_laws(a: &GaussianLaw, b: &GaussianLaw) -> Result<f64> {
    w2_squared(&a.mean, &a.cov, &b.mean, &b.cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_closed_form() {
        let a = GaussianLaw::scalar(0.0, 1.0);
        let b = GaussianLaw::scalar(1.0, 4.0);
        assert_relative_eq!(w2_squared_laws(&a, &b).unwrap(), 2.0, epsilon = 1e-14);
        assert_eq!(w2_squared_laws(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn commuting_covariances_split_per_axis() {
        let m1 = DVector::from_vec(vec![0.0, 1.0]);
        let m2 = DVector::from_vec(vec![2.0, -1.0]);
        let s1 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 9.0]));
        let s2 = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.25]));
        let axis = |a: f64, b: f64, va: f64, vb: f64| (a - b).powi(2) + (va.sqrt() - vb.sqrt()).powi(2);
        let expected = axis(0.0, 2.0, 1.0, 4.0) + axis(1.0, -1.0, 9.0, 0.25);
        assert_relative_eq!(w2_squared(&m1, &s1, &m2, &s2).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let m = DVector::zeros(2);
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.5]));
        assert!(w2_squared(&m, &bad, &m, &DMatrix::identity(2, 2)).is_err());
    }
}
