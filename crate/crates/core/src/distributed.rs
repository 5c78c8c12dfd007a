//! LQ games in distributed strategies.
//!
//! Each player best-responds to the product of the other players' laws, so
//! its value function is `w^i(t, x) = ½xᵀK^i x + k^i·x + c^i`. Integrating
//! `f^i` against the neighbours' marginals leaves the gradient
//! `n_iQx − μQ Σ_{j∼i} E[X^j_t]`, hence only neighbour means enter:
//!
//! ```text
//! K̇^i = K^i K^i/κ^i − n_iQ,                 K^i(T) = G^i,
//! k̇^i = K^i k^i/κ^i + μQ Σ_{j∼i} E[X^j_t],   k^i(T) = 0,
//! ṁ^i = −(K^i m^i + k^i)/κ^i,
//! Ṡ^i = −(K^i S^i + S^i K^i)/κ^i + Σ^i.
//! ```
//!
//! Variances never feed back, so the equilibrium is a fixed point over the
//! mean paths, found by damped Picard iteration.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, GameError, Result};
use crate::graph::nkh_table;
use crate::lq::experiment::{check_radii, reduction_bound};
use crate::lq::riccati::{normalize_index_set, BoundaryData, BLOWUP_LIMIT};
use crate::lq::{BoundaryPolicy, CurveRow, GaussianLaw, LqGameSpec, W2Curve};
use crate::numerics::{hermite_mid, symmetrize, trapezoid_average};
use crate::lq::w2::w2_squared_laws;

/// Starting point of the Picard iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanGuess {
    #[default]
    Zeros,
    /// Every player's mean held at its initial value.
    InitialMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub guess: MeanGuess,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 500,
            guess: MeanGuess::Zeros,
        }
    }
}

/// Mean path of one player with its time derivative, on the reported grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanPath {
    pub values: Vec<DVector<f64>>,
    pub slopes: Vec<DVector<f64>>,
}

impl MeanPath {
    fn constant(v: &DVector<f64>, steps: usize) -> Self {
        MeanPath {
            values: vec![v.clone(); steps + 1],
            slopes: vec![DVector::zeros(v.len()); steps + 1],
        }
    }

    /// Value at fine index `k` (even: grid node, odd: Hermite midpoint).
    fn fine(&self, k: usize, h: f64) -> DVector<f64> {
        let m = k / 2;
        if k.is_multiple_of(2) {
            self.values[m].clone()
        } else {
            hermite_mid(&self.values[m], &self.slopes[m], &self.values[m + 1], &self.slopes[m + 1], h)
        }
    }

    fn sup_distance(&self, other: &MeanPath) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }

    fn mix(&mut self, other: &MeanPath, w: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a = &*a * (1.0 - w) + b * w;
        }
        for (a, b) in self.slopes.iter_mut().zip(&other.slopes) {
            *a = &*a * (1.0 - w) + b * w;
        }
    }
}

/// Converged distributed equilibrium on an index set.
#[derive(Debug, Clone)]
pub struct DistributedSolution {
    pub index_set: Vec<usize>,
    pub dim: usize,
    pub horizon: f64,
    pub steps: usize,
    /// `K^i` on the doubled grid, per local player.
    pub gains: Vec<Vec<DMatrix<f64>>>,
    /// `k^i` on the reported grid, per local player.
    pub offsets: Vec<Vec<DVector<f64>>>,
    pub means: Vec<MeanPath>,
    pub covs: Vec<Vec<DMatrix<f64>>>,
    /// Number of Picard updates applied.
    pub iterations: usize,
    /// Sup-norm change proposed by every sweep, the last one below `tol`.
    pub residuals: Vec<f64>,
}

impl DistributedSolution {
    pub fn marginal(&self, i: usize, m: usize) -> Option<GaussianLaw> {
        let a = self.index_set.binary_search(&i).ok()?;
        Some(GaussianLaw::new(self.means[a].values[m].clone(), self.covs[a][m].clone()))
    }

    pub fn time(&self, m: usize) -> f64 {
        self.horizon * m as f64 / self.steps as f64
    }
}

/// `K^i` on the doubled grid by backward RK4.
fn gain_path(spec: &LqGameSpec, i: usize, steps: usize) -> Result<Vec<DMatrix<f64>>> {
    let fine = 2 * steps;
    let h = spec.horizon / fine as f64;
    let inv = 1.0 / spec.kappa[i];
    let source = &spec.coupling * spec.graph.neighbors(i).len() as f64;
    // dK/dτ with τ = T − t
    let rhs = |k: &DMatrix<f64>| &source - k * k * inv;
    let mut k = spec.terminal[i].clone();
    let mut path = vec![DMatrix::zeros(spec.dim, spec.dim); fine + 1];
    path[fine] = k.clone();
    for idx in (0..fine).rev() {
        let k1 = rhs(&k);
        let k2 = rhs(&(&k + &k1 * (0.5 * h)));
        let k3 = rhs(&(&k + &k2 * (0.5 * h)));
        let k4 = rhs(&(&k + &k3 * h));
        k += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        symmetrize(&mut k);
        let norm = k.amax();
        if !norm.is_finite() || norm > BLOWUP_LIMIT {
            return Err(GameError::BlowUp {
                time: idx as f64 * h,
                norm,
                limit: BLOWUP_LIMIT,
            });
        }
        path[idx] = k.clone();
    }
    Ok(path)
}

/// Forcing `μQ Σ_{j∼i} E[X^j_t]` of player `i` on the doubled grid.
///
/// Reads exactly the neighbours of `i`: iterate paths for those in
/// `index_set`, boundary means for the rest.
pub fn hjb_forcing(
    spec: &LqGameSpec,
    i: usize,
    index_set: &[usize],
    means: &[MeanPath],
    boundary: Option<&BoundaryData>,
    steps: usize,
) -> Result<Vec<DVector<f64>>> {
    let fine = 2 * steps;
    let h = spec.horizon / steps as f64;
    let mut out = vec![DVector::zeros(spec.dim); fine + 1];
    for &j in spec.graph.neighbors(i) {
        match index_set.binary_search(&j) {
            Ok(b) => {
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot += means[b].fine(k, h);
                }
            }
            Err(_) => {
                let bd = boundary.ok_or_else(|| GameError::InvalidInput(format!("missing boundary data for player {j}")))?;
                if !bd.paths.contains_key(&j) {
                    return invalid(format!("missing boundary data for player {j}"));
                }
                for (k, slot) in out.iter_mut().enumerate() {
                    let t = spec.horizon * k as f64 / fine as f64;
                    *slot += bd.mean_at(j, t).expect("checked");
                }
            }
        }
    }
    let scale = &spec.coupling * spec.mu;
    Ok(out.into_iter().map(|v| &scale * v).collect())
}

/// Best response of player `i` to given forcing: offset path and new mean path.
fn best_response(
    spec: &LqGameSpec,
    i: usize,
    gains: &[DMatrix<f64>],
    forcing: &[DVector<f64>],
    steps: usize,
) -> (Vec<DVector<f64>>, MeanPath) {
    let h = spec.horizon / steps as f64;
    let inv = 1.0 / spec.kappa[i];
    let d = spec.dim;
    // backward offset, derivative in τ is −k̇
    let off_rhs = |kf: usize, k: &DVector<f64>| -(&gains[kf] * k * inv + &forcing[kf]);
    let mut offsets = vec![DVector::zeros(d); steps + 1];
    let mut k = DVector::zeros(d);
    for m in (0..steps).rev() {
        let k1 = off_rhs(2 * m + 2, &k);
        let k2 = off_rhs(2 * m + 1, &(&k + &k1 * (0.5 * h)));
        let k3 = off_rhs(2 * m + 1, &(&k + &k2 * (0.5 * h)));
        let k4 = off_rhs(2 * m, &(&k + &k3 * h));
        k += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        offsets[m] = k.clone();
    }
    let off_slope = |m: usize| &gains[2 * m] * &offsets[m] * inv + &forcing[2 * m];
    let off_mid = |m: usize| hermite_mid(&offsets[m], &off_slope(m), &offsets[m + 1], &off_slope(m + 1), h);

    let drift = |kf: usize, off: &DVector<f64>, x: &DVector<f64>| -(&gains[kf] * x + off) * inv;
    let mut values = Vec::with_capacity(steps + 1);
    let mut slopes = Vec::with_capacity(steps + 1);
    let mut x = spec.init[i].mean.clone();
    for m in 0..steps {
        let mid = off_mid(m);
        let k1 = drift(2 * m, &offsets[m], &x);
        let k2 = drift(2 * m + 1, &mid, &(&x + &k1 * (0.5 * h)));
        let k3 = drift(2 * m + 1, &mid, &(&x + &k2 * (0.5 * h)));
        let k4 = drift(2 * m + 2, &offsets[m + 1], &(&x + &k3 * h));
        values.push(x.clone());
        slopes.push(k1.clone());
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    slopes.push(drift(2 * steps, &offsets[steps], &x));
    values.push(x);
    (offsets, MeanPath { values, slopes })
}

fn covariance_path(spec: &LqGameSpec, i: usize, gains: &[DMatrix<f64>], steps: usize) -> Vec<DMatrix<f64>> {
    let h = spec.horizon / steps as f64;
    let inv = 1.0 / spec.kappa[i];
    let sigma = spec.diffusion(i);
    let rhs = |kf: usize, s: &DMatrix<f64>| {
        let ks = &gains[kf] * s * inv;
        -(&ks + ks.transpose()) + &sigma
    };
    let mut s = spec.init[i].cov.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(s.clone());
    for m in 0..steps {
        let k1 = rhs(2 * m, &s);
        let k2 = rhs(2 * m + 1, &(&s + &k1 * (0.5 * h)));
        let k3 = rhs(2 * m + 1, &(&s + &k2 * (0.5 * h)));
        let k4 = rhs(2 * m + 2, &(&s + &k3 * h));
        s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        symmetrize(&mut s);
        out.push(s.clone());
    }
    out
}

/// Damped Picard iteration over the mean paths of the players in `index_set`.
///
/// The first update replaces the guess; later ones mix with weight
/// `damping`. Stops once a sweep proposes a sup-norm change below `tol`.
pub fn distributed_fixed_point(
    spec: &LqGameSpec,
    index_set: &[usize],
    boundary: Option<&BoundaryData>,
    steps: usize,
    opts: &PicardOptions,
) -> Result<DistributedSolution> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return invalid(format!("damping must lie in (0, 1], got {}", opts.damping));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 || opts.max_iter == 0 {
        return invalid("tol must be positive and max_iter at least 1");
    }
    if steps < 2 {
        return invalid(format!("steps must be at least 2, got {steps}"));
    }
    let set = normalize_index_set(spec, index_set)?;
    let gains = set
        .par_iter()
        .map(|&i| gain_path(spec, i, steps))
        .collect::<Result<Vec<_>>>()?;
    let mut means: Vec<MeanPath> = set
        .iter()
        .map(|&i| match opts.guess {
            MeanGuess::Zeros => MeanPath::constant(&DVector::zeros(spec.dim), steps),
            MeanGuess::InitialMeans => MeanPath::constant(&spec.init[i].mean, steps),
        })
        .collect();
    let mut residuals = Vec::new();
    let mut iterations = 0;
    loop {
        let responses = set
            .par_iter()
            .enumerate()
            .map(|(a, &i)| {
                let forcing = hjb_forcing(spec, i, &set, &means, boundary, steps)?;
                Ok(best_response(spec, i, &gains[a], &forcing, steps))
            })
            .collect::<Result<Vec<_>>>()?;
        let residual = responses
            .iter()
            .zip(&means)
            .map(|((_, new), old)| new.sup_distance(old))
            .fold(0.0, f64::max);
        residuals.push(residual);
        if !residual.is_finite() {
            return Err(GameError::NonConvergence {
                iterations,
                residual,
                history: residuals,
            });
        }
        if residual < opts.tol {
            let offsets = responses.into_iter().map(|(o, _)| o).collect();
            let covs = set
                .iter()
                .enumerate()
                .map(|(a, &i)| covariance_path(spec, i, &gains[a], steps))
                .collect();
            if residuals.len() > 6 && residuals[5..].windows(2).any(|w| w[1] > w[0]) {
                warn!("Picard residuals are not monotone after the fifth sweep");
            }
            return Ok(DistributedSolution {
                index_set: set,
                dim: spec.dim,
                horizon: spec.horizon,
                steps,
                gains,
                offsets,
                means,
                covs,
                iterations,
                residuals,
            });
        }
        if iterations == opts.max_iter {
            return Err(GameError::NonConvergence {
                iterations,
                residual,
                history: residuals,
            });
        }
        let w = if iterations == 0 { 1.0 } else { opts.damping };
        for (old, (_, new)) in means.iter_mut().zip(&responses) {
            old.mix(new, w);
        }
        iterations += 1;
    }
}

/// Full-versus-reduced comparison for distributed equilibria; the
/// `iterations` column holds the reduced game's Picard count.
pub fn distributed_reduction_experiment(
    spec: &LqGameSpec,
    root: usize,
    r_list: &[usize],
    policy: BoundaryPolicy,
    steps: usize,
    opts: &PicardOptions,
) -> Result<W2Curve> {
    check_radii(r_list)?;
    let table = nkh_table(&spec.graph, root)?;
    let full = distributed_fixed_point(spec, &spec.all_players(), None, steps, opts)?;
    let bounds = spec.cost_bounds();
    let rows = r_list
        .par_iter()
        .map(|&r| {
            let set = table.ball(r.min(table.h_star));
            let boundary = BoundaryData::from_policy(spec, &set, policy);
            let reduced = distributed_fixed_point(spec, &set, Some(&boundary), steps, opts)?;
            let gaps = (0..=steps)
                .map(|m| {
                    w2_squared_laws(
                        &full.marginal(root, m).expect("root in full game"),
                        &reduced.marginal(root, m).expect("root in ball"),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let sup_pair = |j: usize| {
                (0..=steps)
                    .map(|m| {
                        full.marginal(j, m).map_or(0.0, |g| g.second_moment())
                            + boundary.second_moment_at(j, full.time(m)).unwrap_or(0.0)
                    })
                    .fold(0.0, f64::max)
            };
            let b = reduction_bound(&bounds, &spec.graph, &table, r, &set, sup_pair)?;
            Ok(CurveRow {
                r,
                avg_w2_sq: trapezoid_average(&gaps),
                sup_w2_sq: gaps.iter().copied().fold(0.0, f64::max),
                gamma_r: b.gamma_r,
                rhs: b.rhs,
                theta: b.theta,
                theta_star: b.theta_star,
                iterations: Some(reduced.iterations),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(W2Curve {
        root,
        steps,
        refinement_change: f64::NAN,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lq::{gaussian_flow, riccati_solve};
    use approx::assert_relative_eq;

    #[test]
    fn decoupled_converges_in_one_update() {
        let spec = LqGameSpec::chain_benchmark(5, 0.0).unwrap();
        let sol = distributed_fixed_point(&spec, &spec.all_players(), None, 100, &PicardOptions::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        let ol = riccati_solve(&spec, &spec.all_players(), None, 100).unwrap();
        for m in 0..=100 {
            assert_relative_eq!(sol.gains[0][2 * m][(0, 0)], ol.p(m)[(0, 0)], epsilon = 1e-14);
        }
    }

    #[test]
    fn single_player_matches_open_loop() {
        let spec = LqGameSpec::scalar(
            crate::graph::build_chain(1, false).unwrap(),
            1.5,
            2.0,
            1.0,
            0.3,
            0.7,
            vec![GaussianLaw::scalar(0.4, 0.2)],
        )
        .unwrap();
        let mut spec = spec;
        spec.terminal[0] = DMatrix::from_element(1, 1, 0.5);
        let dist = distributed_fixed_point(&spec, &[0], None, 200, &PicardOptions::default()).unwrap();
        let ol = gaussian_flow(&spec, &riccati_solve(&spec, &[0], None, 200).unwrap()).unwrap();
        for m in [0, 50, 200] {
            let (a, b) = (dist.marginal(0, m).unwrap(), ol.marginal(0, m).unwrap());
            assert_relative_eq!(a.mean[0], b.mean[0], epsilon = 1e-10);
            assert_relative_eq!(a.cov[(0, 0)], b.cov[(0, 0)], epsilon = 1e-10);
        }
    }

    #[test]
    fn forcing_reads_only_neighbours() {
        let spec = LqGameSpec::chain_benchmark(7, 0.3).unwrap();
        let set = spec.all_players();
        let steps = 20;
        let mut means: Vec<MeanPath> = set.iter().map(|&i| MeanPath::constant(&spec.init[i].mean, steps)).collect();
        let before = hjb_forcing(&spec, 0, &set, &means, None, steps).unwrap();
        means[3] = MeanPath::constant(&DVector::from_element(1, 42.0), steps);
        let after = hjb_forcing(&spec, 0, &set, &means, None, steps).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn bad_options_are_rejected() {
        let spec = LqGameSpec::chain_benchmark(5, 0.3).unwrap();
        let opts = PicardOptions { damping: 0.0, ..Default::default() };
        assert!(distributed_fixed_point(&spec, &[0, 1], None, 10, &opts).is_err());
    }

    #[test]
    fn non_convergence_reports_history() {
        let spec = LqGameSpec::chain_benchmark(5, 0.3).unwrap();
        let opts = PicardOptions { max_iter: 2, ..Default::default() };
        match distributed_fixed_point(&spec, &spec.all_players(), None, 50, &opts) {
            Err(GameError::NonConvergence { iterations, history, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(history.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
