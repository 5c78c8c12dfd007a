use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decay::{gamma_r, gamma_sequence, theta_from_game, theta_star, tilde_gamma, CostBounds};
use crate::error::{invalid, GameError, Result};
use crate::graph::{nkh_table, Graph, NkhTable};
use crate::numerics::{ls_slope, op_norm, trapezoid_average};

use super::flow::{gaussian_flow, GaussianFlow};
use super::riccati::{check_refinement, riccati_solve, BoundaryData, BoundaryPolicy, RiccatiSolution};
use super::spec::{GaussianLaw, LqGameSpec};
use super::w2::w2_squared_laws;

/// Default number of reported time steps.
pub const DEFAULT_STEPS: usize = 2000;
/// Maximum relative change of `P(0)` when the step count is doubled.
pub const REFINEMENT_LIMIT: f64 = 1e-6;

/// One radius of a reduction curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub r: usize,
    /// `⨏₀ᵀ W₂²` between the player-of-interest marginals.
    pub avg_w2_sq: f64,
    pub sup_w2_sq: f64,
    pub gamma_r: f64,
    pub rhs: f64,
    pub theta: f64,
    pub theta_star: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W2Curve {
    pub root: usize,
    pub steps: usize,
    pub refinement_change: f64,
    pub rows: Vec<CurveRow>,
}

impl W2Curve {
    /// `avg[r+1]/avg[r]` for consecutive rows whose denominator exceeds `floor`.
    pub fn ratios(&self, floor: f64) -> Vec<(usize, f64)> {
        self.rows
            .windows(2)
            .filter(|w| w[0].avg_w2_sq > floor && w[1].r == w[0].r + 1)
            .map(|w| (w[0].r, w[1].avg_w2_sq / w[0].avg_w2_sq))
            .collect()
    }
}

/// `γ^(r)` and the assembled right-hand side of the reduction estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ReductionBound {
    pub gamma_r: f64,
    pub rhs: f64,
    pub theta: f64,
    pub theta_star: f64,
}

/// Right side `γ^(r)/β_0 · Σ_{j∈L_r} 2(α_j + β_j) S_j`, which bounds
/// `⨏ W₂²` of the player of interest; `S_j = sup_t(𝔪₂(m^j_t) + 𝔪₂(Z^j_t))`.
pub(crate) fn reduction_bound(
    bounds: &CostBounds,
    graph: &Graph,
    table: &NkhTable,
    r: usize,
    index_set: &[usize],
    sup_pair: impl Fn(usize) -> f64,
) -> Result<ReductionBound> {
    let theta = theta_from_game(bounds, graph, index_set)?;
    let r_eff = r.min(table.h_star);
    let theta_star = theta_star(table, r_eff)?;
    if theta > theta_star {
        warn!("r = {r}: smallness ratio {theta:.4} exceeds threshold {theta_star:.4}");
    }
    if r >= table.h_star {
        return Ok(ReductionBound {
            gamma_r: 0.0,
            rhs: 0.0,
            theta,
            theta_star,
        });
    }
    let g_r = if theta.is_finite() {
        match gamma_sequence(table, theta, r_eff) {
            Ok(seq) => gamma_r(&seq),
            Err(GameError::Infeasible(_)) => f64::NAN,
            Err(e) => return Err(e),
        }
    } else {
        f64::NAN
    };
    let weights = bounds.weights();
    let beta0 = weights[table.root].1;
    let sum: f64 = table
        .layer(r)
        .iter()
        .map(|&j| 2.0 * (weights[j].0 + weights[j].1) * sup_pair(j))
        .sum();
    let rhs = if g_r.is_nan() { f64::INFINITY } else { g_r * sum / beta0 };
    Ok(ReductionBound {
        gamma_r: g_r,
        rhs,
        theta,
        theta_star,
    })
}

pub(crate) fn check_radii(r_list: &[usize]) -> Result<()> {
    if r_list.is_empty() {
        return invalid("r_list must be non-empty");
    }
    if r_list.contains(&0) {
        return invalid("radius 0 gives an empty index set");
    }
    Ok(())
}

/// Full-game solve after the step-refinement check.
pub fn full_solution(spec: &LqGameSpec, steps: usize) -> Result<(RiccatiSolution, GaussianFlow, f64)> {
    let change = check_refinement(spec, steps, REFINEMENT_LIMIT)?;
    let sol = riccati_solve(spec, &spec.all_players(), None, steps)?;
    let flow = gaussian_flow(spec, &sol)?;
    Ok((sol, flow, change))
}

/// `W₂²` between the marginals of `i` in two flows at every grid time.
pub fn w2_path(a: &GaussianFlow, b: &GaussianFlow, i: usize) -> Result<Vec<f64>> {
    if a.steps != b.steps {
        return invalid("flows on different grids");
    }
    (0..=a.steps)
        .map(|m| {
            let (x, y) = (
                a.marginal(i, m).ok_or_else(|| GameError::InvalidInput(format!("player {i} not in flow")))?,
                b.marginal(i, m).ok_or_else(|| GameError::InvalidInput(format!("player {i} not in flow")))?,
            );
            w2_squared_laws(&x, &y)
        })
        .collect()
}

/// Compares the full game with reduced games on balls of radius `r` around
/// `root` for every `r` in `r_list`.
pub fn reduction_experiment(
    spec: &LqGameSpec,
    root: usize,
    r_list: &[usize],
    policy: BoundaryPolicy,
    steps: usize,
) -> Result<W2Curve> {
    check_radii(r_list)?;
    let table = nkh_table(&spec.graph, root)?;
    let (_, full, change) = full_solution(spec, steps)?;
    let bounds = spec.cost_bounds();
    let rows = r_list
        .par_iter()
        .map(|&r| {
            let set = table.ball(r.min(table.h_star));
            let boundary = BoundaryData::from_policy(spec, &set, policy);
            let sol = riccati_solve(spec, &set, Some(&boundary), steps)?;
            let reduced = gaussian_flow(spec, &sol)?;
            let gaps = w2_path(&full, &reduced, root)?;
            let sup_pair = |j: usize| {
                (0..=steps)
                    .map(|m| {
                        let own = full.marginal(j, m).map_or(0.0, |g| g.second_moment());
                        let z = boundary.second_moment_at(j, full.time(m)).unwrap_or(0.0);
                        own + z
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
                iterations: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(W2Curve {
        root,
        steps,
        refinement_change: change,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvRow {
    pub k: usize,
    pub distance: Option<usize>,
    /// `max_t ‖P^{root,k}(t)‖_op`.
    pub max_norm: f64,
    pub norm_at_zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvDecayReport {
    pub root: usize,
    pub rows: Vec<DvRow>,
    /// `(distance, max over the layer of max_norm)`, distances ≥ 1.
    pub by_distance: Vec<(usize, f64)>,
    /// Least-squares slope of `ln max_norm` against distance; NaN with fewer
    /// than two usable distances.
    pub slope: f64,
}

/// Off-diagonal block norms `P^{root,k}` of a full-game solution.
pub fn dv_decay_report(sol: &RiccatiSolution, table: &NkhTable) -> Result<DvDecayReport> {
    let root = table.root;
    if sol.local(root).is_none() || sol.index_set.len() != table.layer_of.len() {
        return invalid("dv_decay_report needs the full-game solution");
    }
    let rows: Vec<DvRow> = (0..table.layer_of.len())
        .filter(|&k| k != root)
        .map(|k| {
            let norms: Vec<f64> = (0..=sol.steps)
                .map(|m| op_norm(&sol.block(m, root, k).expect("full solution")))
                .collect();
            DvRow {
                k,
                distance: table.layer_of[k],
                max_norm: norms.iter().copied().fold(0.0, f64::max),
                norm_at_zero: norms[0],
            }
        })
        .collect();
    let by_distance: Vec<(usize, f64)> = (1..table.h_star)
        .map(|h| {
            let top = rows
                .iter()
                .filter(|row| row.distance == Some(h))
                .map(|row| row.max_norm)
                .fold(0.0, f64::max);
            (h, top)
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = by_distance
        .iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|&(h, v)| (h as f64, v.ln()))
        .unzip();
    let slope = if xs.len() >= 2 { ls_slope(&xs, &ys) } else { f64::NAN };
    Ok(DvDecayReport {
        root,
        rows,
        by_distance,
        slope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub root: usize,
    pub k: usize,
    pub distance: Option<usize>,
    pub w2_sq_terminal: f64,
    pub w2_sq_integral: f64,
    /// `W₂²(T) + ∫₀ᵀ W₂²`.
    pub lhs: f64,
    pub w2_sq_initial: f64,
    pub theta: f64,
    pub gamma_tilde: Option<f64>,
    /// `max_t Σ_j ‖P^{kj}(t)‖_op`.
    pub dv_norm: f64,
    /// `max(1/α̃_0, T/β̃_0) (2κ^k + T‖Dv^k‖_∞)` with the halved weights
    /// `α̃_0 = κ^0/16 + K_g^0 T`, `β̃_0 = κ^0/16 + K_f^0 T²`.
    pub constant: f64,
    pub bound: f64,
}

/// Two full flows differing only in player `k`'s initial law.
pub fn perturbation_experiment(
    spec: &LqGameSpec,
    root: usize,
    k: usize,
    new_init_k: GaussianLaw,
    steps: usize,
) -> Result<PerturbationReport> {
    let n = spec.num_players();
    if root >= n || k >= n {
        return invalid("player index out of range");
    }
    if k == root {
        return invalid("perturbed player must differ from the player of interest");
    }
    let mut perturbed = spec.clone();
    perturbed.init[k] = new_init_k;
    perturbed.validate()?;

    let table = nkh_table(&spec.graph, root)?;
    let all = spec.all_players();
    let sol = riccati_solve(spec, &all, None, steps)?;
    let base = gaussian_flow(spec, &sol)?;
    let moved = gaussian_flow(&perturbed, &sol)?;
    let gaps = w2_path(&base, &moved, root)?;
    let w2_sq_terminal = gaps[steps];
    let w2_sq_integral = spec.horizon * trapezoid_average(&gaps);
    let w2_sq_initial = w2_squared_laws(&spec.init[k], &perturbed.init[k])?;

    let bounds = spec.cost_bounds();
    let theta = theta_from_game(&bounds, &spec.graph, &all)?;
    let distance = table.layer_of[k];
    let gamma_tilde = match distance {
        None => Some(0.0),
        Some(r) if theta.is_finite() => match tilde_gamma(&table, theta, r) {
            Ok(t) => Some(t.total),
            Err(GameError::Infeasible(msg)) => {
                warn!("perturbation constant unavailable: {msg}");
                None
            }
            Err(e) => return Err(e),
        },
        Some(_) => None,
    };
    let dv_norm = (0..=steps)
        .map(|m| {
            all.iter()
                .map(|&j| op_norm(&sol.block(m, k, j).expect("full solution")))
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let t = spec.horizon;
    let alpha0 = spec.kappa[root] / 16.0 + bounds.k_g[root] * t;
    let beta0 = spec.kappa[root] / 16.0 + bounds.k_f[root] * t * t;
    let constant = (1.0 / alpha0).max(t / beta0) * (2.0 * spec.kappa[k] + t * dv_norm);
    let bound = gamma_tilde.map_or(f64::INFINITY, |g| g * constant * w2_sq_initial);
    Ok(PerturbationReport {
        root,
        k,
        distance,
        w2_sq_terminal,
        w2_sq_integral,
        lhs: w2_sq_terminal + w2_sq_integral,
        w2_sq_initial,
        theta,
        gamma_tilde,
        dv_norm,
        constant,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn decoupled_curve_vanishes() {
        let spec = LqGameSpec::chain_benchmark(9, 0.0).unwrap();
        let curve = reduction_experiment(&spec, 0, &[1, 2, 3], BoundaryPolicy::FrozenInitial, 200).unwrap();
        assert!(curve.rows.iter().all(|r| r.avg_w2_sq <= 1e-16));
    }

    #[test]
    fn whole_graph_gives_zero_gap() {
        let spec = LqGameSpec::chain_benchmark(7, 0.3).unwrap();
        let curve = reduction_experiment(&spec, 0, &[4, 6], BoundaryPolicy::FrozenInitial, 200).unwrap();
        for row in &curve.rows {
            assert_eq!(row.avg_w2_sq, 0.0);
            assert_eq!(row.rhs, 0.0);
            assert_eq!(row.gamma_r, 0.0);
        }
    }

    #[test]
    fn radius_zero_is_rejected() {
        let spec = LqGameSpec::chain_benchmark(5, 0.3).unwrap();
        assert!(reduction_experiment(&spec, 0, &[0], BoundaryPolicy::FrozenInitial, 50).is_err());
    }

    #[test]
    fn unchanged_initial_law_gives_zero() {
        let spec = LqGameSpec::chain_benchmark(9, 0.3).unwrap();
        let same = spec.init[3].clone();
        let rep = perturbation_experiment(&spec, 0, 3, same, 100).unwrap();
        assert_eq!(rep.lhs, 0.0);
    }

    #[test]
    fn decoupled_perturbation_only_moves_k() {
        let spec = LqGameSpec::chain_benchmark(9, 0.0).unwrap();
        let mut law = spec.init[4].clone();
        law.mean += DVector::from_element(1, 0.5);
        let rep = perturbation_experiment(&spec, 0, 4, law, 100).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert!((rep.w2_sq_initial - 0.25).abs() < 1e-15);
    }
}
