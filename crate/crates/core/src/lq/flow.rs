use nalgebra::{DMatrix, DVector};

use crate::error::{GameError, Result};
use crate::numerics::{min_eigenvalue, symmetrize};

use super::riccati::RiccatiSolution;
use super::spec::{GaussianLaw, LqGameSpec};

/// Joint covariances up to this size are eigen-checked at every step;
/// larger ones every [`LARGE_CHECK_STRIDE`] steps and at the end.
const FULL_CHECK_DIM: usize = 64;
const LARGE_CHECK_STRIDE: usize = 20;

/// Relative tolerance of the covariance PSD check.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Joint Gaussian law of the equilibrium states on the reported grid, kept
/// as per-player marginals plus the joint covariance at `T`.
#[derive(Debug, Clone)]
pub struct GaussianFlow {
    pub index_set: Vec<usize>,
    pub dim: usize,
    pub horizon: f64,
    pub steps: usize,
    means: Vec<DVector<f64>>,
    marginal_covs: Vec<Vec<DMatrix<f64>>>,
    pub terminal_cov: DMatrix<f64>,
}

impl GaussianFlow {
    pub fn time(&self, m: usize) -> f64 {
        self.horizon * m as f64 / self.steps as f64
    }

    /// Law of player `i` (global index) at `t_m`.
    pub fn marginal(&self, i: usize, m: usize) -> Option<GaussianLaw> {
        let a = self.index_set.binary_search(&i).ok()?;
        let d = self.dim;
        Some(GaussianLaw::new(
            self.means[m].rows(a * d, d).into_owned(),
            self.marginal_covs[m][a].clone(),
        ))
    }

    /// Stacked mean vector at `t_m`.
    pub fn mean(&self, m: usize) -> &DVector<f64> {
        &self.means[m]
    }

    /// `sup_m 𝔪₂` of player `i`.
    pub fn sup_second_moment(&self, i: usize) -> Option<f64> {
        (0..=self.steps)
            .map(|m| self.marginal(i, m).map(|g| g.second_moment()))
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
    }
}

fn psd_check(s: &DMatrix<f64>, t: f64) -> Result<()> {
    let trace = s.trace();
    let min_eig = min_eigenvalue(s);
    if min_eig < -PSD_TOLERANCE * trace.abs().max(f64::MIN_POSITIVE) {
        return Err(GameError::Covariance { time: t, min_eig });
    }
    Ok(())
}

/// Integrates `ṁ = A m − K⁻¹ q`, `Ṡ = A S + S Aᵀ + blockdiag(Σ^i)` forward
/// with `A = −K⁻¹ P`, by RK4 on the reported grid of `sol`.
pub fn gaussian_flow(spec: &LqGameSpec, sol: &RiccatiSolution) -> Result<GaussianFlow> {
    let set = &sol.index_set;
    let d = spec.dim;
    let n = set.len() * d;
    let kinv: Vec<f64> = set
        .iter()
        .flat_map(|&i| std::iter::repeat_n(1.0 / spec.kappa[i], d))
        .collect();
    let mut diffusion = DMatrix::zeros(n, n);
    let mut mean = DVector::zeros(n);
    let mut cov = DMatrix::zeros(n, n);
    for (a, &i) in set.iter().enumerate() {
        diffusion
            .view_mut((a * d, a * d), (d, d))
            .copy_from(&spec.diffusion(i));
        mean.rows_mut(a * d, d).copy_from(&spec.init[i].mean);
        cov.view_mut((a * d, a * d), (d, d)).copy_from(&spec.init[i].cov);
    }
    let drift = |k: usize, m: &DVector<f64>, s: &DMatrix<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let mut a = -sol.p_fine(k);
        for (row, &w) in kinv.iter().enumerate() {
            a.row_mut(row).scale_mut(w);
        }
        let mut dm = &a * m;
        for (row, &w) in kinv.iter().enumerate() {
            dm[row] -= w * sol.q_fine(k)[row];
        }
        let as_ = &a * s;
        let ds = &as_ + as_.transpose() + &diffusion;
        (dm, ds)
    };
    let marginals = |s: &DMatrix<f64>| -> Vec<DMatrix<f64>> {
        (0..set.len())
            .map(|a| s.view((a * d, a * d), (d, d)).into_owned())
            .collect()
    };

    let steps = sol.steps;
    let h = spec.horizon / steps as f64;
    let mut means = Vec::with_capacity(steps + 1);
    let mut marginal_covs = Vec::with_capacity(steps + 1);
    means.push(mean.clone());
    marginal_covs.push(marginals(&cov));
    for m in 0..steps {
        let (k1m, k1s) = drift(2 * m, &mean, &cov);
        let (k2m, k2s) = drift(2 * m + 1, &(&mean + &k1m * (0.5 * h)), &(&cov + &k1s * (0.5 * h)));
        let (k3m, k3s) = drift(2 * m + 1, &(&mean + &k2m * (0.5 * h)), &(&cov + &k2s * (0.5 * h)));
        let (k4m, k4s) = drift(2 * m + 2, &(&mean + &k3m * h), &(&cov + &k3s * h));
        mean += (k1m + k2m * 2.0 + k3m * 2.0 + k4m) * (h / 6.0);
        cov += (k1s + k2s * 2.0 + k3s * 2.0 + k4s) * (h / 6.0);
        symmetrize(&mut cov);
        let t = (m + 1) as f64 * h;
        if n <= FULL_CHECK_DIM || (m + 1) % LARGE_CHECK_STRIDE == 0 || m + 1 == steps {
            psd_check(&cov, t)?;
        }
        means.push(mean.clone());
        marginal_covs.push(marginals(&cov));
    }
    Ok(GaussianFlow {
        index_set: set.clone(),
        dim: d,
        horizon: spec.horizon,
        steps,
        means,
        marginal_covs,
        terminal_cov: cov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_chain;
    use crate::lq::riccati::riccati_solve;
    use approx::assert_relative_eq;

    #[test]
    fn pure_diffusion_when_p_vanishes() {
        let spec = LqGameSpec::scalar(
            build_chain(1, false).unwrap(),
            2.0,
            1.0,
            1.0,
            0.0,
            0.5,
            vec![GaussianLaw::scalar(1.5, 0.3)],
        )
        .unwrap();
        let sol = riccati_solve(&spec, &[0], None, 20).unwrap();
        let flow = gaussian_flow(&spec, &sol).unwrap();
        for m in 0..=20 {
            let g = flow.marginal(0, m).unwrap();
            assert_relative_eq!(g.mean[0], 1.5, epsilon = 1e-14);
            assert_relative_eq!(g.cov[(0, 0)], 0.3 + 0.25 * flow.time(m), epsilon = 1e-13);
        }
    }

    #[test]
    fn deterministic_flow_keeps_zero_covariance() {
        let mut spec = LqGameSpec::chain_benchmark(6, 0.3).unwrap();
        for i in 0..6 {
            spec.sigma[i] = DMatrix::zeros(1, 1);
            spec.init[i].cov = DMatrix::zeros(1, 1);
        }
        let sol = riccati_solve(&spec, &spec.all_players(), None, 50).unwrap();
        let flow = gaussian_flow(&spec, &sol).unwrap();
        assert_eq!(flow.terminal_cov.amax(), 0.0);
    }
}
