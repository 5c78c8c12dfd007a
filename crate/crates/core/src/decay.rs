//! Decay constants for recursive inequalities on graph layers.
//!
//! Given non-negative vertex weights `C^i` with `C^i ≤ γ Σ_{j∼i} C^j` on the
//! first `r` layers around the root, summing over layer `h` and absorbing the
//! layers `≤ h` yields `Σ_{L_h} C ≤ γ_h Σ_{L_{h+1}} C` with
//!
//! ```text
//! γ_0 = γ,
//! γ_h = γ · sup_{k∈L_{h+1}} N_k^h / (1 − γ Σ_{i=0}^{h} sup_{k∈L_i} N_k^h Π_{j=i}^{h−1} γ_j),
//! ```
//!
//! and iterating gives `C^0 ≤ γ^(r) Σ_{L_r} C` with `γ^(r) = Π_{j<r} γ_j`.
//! With a point source `E` at a vertex of layer `r` the same bookkeeping gives
//! `C^0 ≤ γ̃^(r) E`, where `γ̃^(r) = Σ_{j=r}^{h*−1} γ^(j) γ̃_j`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, GameError, Result};
use crate::graph::{nkh_table, Graph, NkhTable};

/// Per-player structural constants of the costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBounds {
    pub horizon: f64,
    pub kappa: Vec<f64>,
    pub k_f: Vec<f64>,
    pub l_f: Vec<f64>,
    pub k_g: Vec<f64>,
    pub l_g: Vec<f64>,
}

impl CostBounds {
    pub fn uniform(n: usize, horizon: f64, kappa: f64, k_f: f64, l_f: f64, k_g: f64, l_g: f64) -> Self {
        CostBounds {
            horizon,
            kappa: vec![kappa; n],
            k_f: vec![k_f; n],
            l_f: vec![l_f; n],
            k_g: vec![k_g; n],
            l_g: vec![l_g; n],
        }
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return invalid(format!("horizon must be positive, got {}", self.horizon));
        }
        for (name, v) in [
            ("kappa", &self.kappa),
            ("k_f", &self.k_f),
            ("l_f", &self.l_f),
            ("k_g", &self.k_g),
            ("l_g", &self.l_g),
        ] {
            if v.len() != n {
                return invalid(format!("{name} has {} entries for {n} players", v.len()));
            }
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return invalid(format!("{name} entries must be finite and non-negative"));
            }
        }
        if self.kappa.iter().any(|&k| k <= 0.0) {
            return invalid("kappa entries must be positive");
        }
        Ok(())
    }

    /// Weights `(α_j, β_j) = (κ^j/8 + K_g^j T, κ^j/8 + K_f^j T²)`.
    pub fn weights(&self) -> Vec<(f64, f64)> {
        let t = self.horizon;
        (0..self.len())
            .map(|j| {
                (
                    self.kappa[j] / 8.0 + self.k_g[j] * t,
                    self.kappa[j] / 8.0 + self.k_f[j] * t * t,
                )
            })
            .collect()
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Smallness ratio
/// `θ = sup_{i∈I} max(ℓ_g^i / inf_{j∼i}(κ^j/(8T) + K_g^j), ℓ_f^i / inf_{j∼i}(κ^j/(8T²) + K_f^j))`.
///
/// An empty neighbourhood has infimum `+∞`. Returns `+∞` when a positive
/// numerator meets a zero denominator.
pub fn theta_from_game(b: &CostBounds, g: &Graph, index_set: &[usize]) -> Result<f64> {
    b.validate(g.len())?;
    if index_set.is_empty() {
        return invalid("index set must be non-empty");
    }
    let t = b.horizon;
    let mut theta: f64 = 0.0;
    for &i in index_set {
        if i >= g.len() {
            return invalid(format!("index {i} outside the graph"));
        }
        let inf_g = g
            .neighbors(i)
            .iter()
            .map(|&j| b.kappa[j] / (8.0 * t) + b.k_g[j])
            .fold(f64::INFINITY, f64::min);
        let inf_f = g
            .neighbors(i)
            .iter()
            .map(|&j| b.kappa[j] / (8.0 * t * t) + b.k_f[j])
            .fold(f64::INFINITY, f64::min);
        theta = theta.max(ratio(b.l_g[i], inf_g)).max(ratio(b.l_f[i], inf_f));
    }
    Ok(theta)
}

/// Ratio `sup_{i∈I} max(α'_i / inf_{j∼i} α_j, β'_i / inf_{j∼i} β_j)` for
/// arbitrary weights, with `α'_i = ℓ_g^i T` and `β'_i = ℓ_f^i T²`.
pub fn weighted_ratio(b: &CostBounds, g: &Graph, index_set: &[usize], weights: &[(f64, f64)]) -> f64 {
    let t = b.horizon;
    index_set
        .iter()
        .map(|&i| {
            let inf_a = g.neighbors(i).iter().map(|&j| weights[j].0).fold(f64::INFINITY, f64::min);
            let inf_b = g.neighbors(i).iter().map(|&j| weights[j].1).fold(f64::INFINITY, f64::min);
            ratio(b.l_g[i] * t, inf_a).max(ratio(b.l_f[i] * t * t, inf_b))
        })
        .fold(0.0, f64::max)
}

/// Denominator term `γ Σ_{i=0}^{h} sup_{k∈L_i} N_k^h Π_{j=i}^{h−1} γ_j`.
fn absorbed(t: &NkhTable, gamma: f64, h: usize, seq: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..=h {
        let s = t.sup_count(i, h);
        if s == 0 {
            continue;
        }
        let prod: f64 = seq[i..h].iter().product();
        total += s as f64 * prod;
    }
    gamma * total
}

/// The sequence `γ_0, …, γ_{r−1}`.
///
/// Fails with [`GameError::Infeasible`] when a denominator is non-positive.
pub fn gamma_sequence(t: &NkhTable, gamma: f64, r: usize) -> Result<Vec<f64>> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return invalid(format!("gamma must be finite and non-negative, got {gamma}"));
    }
    if r > t.h_star {
        return invalid(format!("r = {r} exceeds h* = {}", t.h_star));
    }
    let mut seq = Vec::with_capacity(r);
    for h in 0..r {
        if h == 0 {
            seq.push(gamma);
            continue;
        }
        let den = 1.0 - absorbed(t, gamma, h, &seq);
        if den <= 0.0 {
            return Err(GameError::Infeasible(format!(
                "denominator {den:.3e} at h = {h} for gamma = {gamma}"
            )));
        }
        seq.push(gamma * t.sup_count(h + 1, h) as f64 / den);
    }
    Ok(seq)
}

/// `γ^(r)`: product of the sequence, 1 when empty.
pub fn gamma_r(seq: &[f64]) -> f64 {
    seq.iter().product()
}

const BISECTION_STEPS: usize = 60;

/// Supremum of the `γ ∈ (0, 1]` for which [`gamma_sequence`] is feasible
/// up to `r`, by bisection; returns 1 when all of `(0, 1]` is feasible.
pub fn theta_star(t: &NkhTable, r: usize) -> Result<f64> {
    let r = r.min(t.h_star);
    if gamma_sequence(t, 1.0, r).is_ok() {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..BISECTION_STEPS {
        if hi - lo < 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if gamma_sequence(t, mid, r).is_ok() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `γ = γ̄ / (K (1 + γ̄))` with `K = 2𝔫`.
pub fn theta_star_uniform(n_bound: usize, gamma_bar: f64) -> Result<f64> {
    if n_bound == 0 {
        return invalid("n_bound must be at least 1");
    }
    if !(gamma_bar > 0.0 && gamma_bar < 1.0) {
        return invalid(format!("gamma_bar must lie in (0, 1), got {gamma_bar}"));
    }
    let k = 2.0 * n_bound as f64;
    Ok(gamma_bar / (k * (1.0 + gamma_bar)))
}

/// Perturbation constants: `(γ̃_r, …, γ̃_{h*−1})` and `γ̃^(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TildeGamma {
    pub r: usize,
    pub seq: Vec<f64>,
    pub total: f64,
}

/// Constants for a point source at distance `r` from the root.
///
/// `γ̃_r = 1/(1 − D_r)`, which equals `γ_r / (γ sup_{L_{r+1}} N^r)` whenever
/// that supremum is positive and stays finite when it vanishes; for `j > r`
/// the numerator collects every earlier source contribution reaching layer `j`.
pub fn tilde_gamma(t: &NkhTable, gamma: f64, r: usize) -> Result<TildeGamma> {
    if r >= t.h_star {
        return invalid(format!("r = {r} must be below h* = {}", t.h_star));
    }
    let hs = t.h_star;
    let seq = gamma_sequence(t, gamma, hs)?;
    let mut tilde = vec![0.0; hs];
    for j in r..hs {
        let den = 1.0 - absorbed(t, gamma, j, &seq);
        if den <= 0.0 {
            return Err(GameError::Infeasible(format!(
                "tilde denominator {den:.3e} at j = {j}"
            )));
        }
        if j == r {
            tilde[j] = 1.0 / den;
            continue;
        }
        let mut num = 0.0;
        for ell in 0..j {
            let s = t.sup_count(ell, j);
            if s == 0 {
                continue;
            }
            for i in r.max(ell)..j {
                let prod: f64 = seq[ell..i].iter().product();
                num += s as f64 * tilde[i] * prod;
            }
        }
        tilde[j] = gamma * num / den;
    }
    let total = (r..hs).map(|j| gamma_r(&seq[..j]) * tilde[j]).sum();
    Ok(TildeGamma {
        r,
        seq: tilde[r..].to_vec(),
        total,
    })
}

/// `(θ*, r*)` reaching accuracy `ε` with moment bound `M`, using
/// `γ̄ = 1/(4𝔫)` and `r* = ⌈log₂(2M/ε)⌉` (0 when `ε ≥ 2M`).
pub fn reduction_radius(epsilon: f64, moment: f64, n_bound: usize) -> Result<(f64, usize)> {
    if !(epsilon > 0.0 && moment > 0.0) {
        return invalid("epsilon and moment bound must be positive");
    }
    let theta = theta_star_uniform(n_bound, 1.0 / (4.0 * n_bound as f64))?;
    let r = (2.0 * moment / epsilon).log2().ceil().max(0.0) as usize;
    Ok((theta, r))
}

/// Checks `C^0 ≤ γ^(r) Σ_{L_r} C^i` for weights satisfying
/// `C^i ≤ γ Σ_{j∼i} C^j` on layers `0..r`.
///
/// Inputs that violate the hypothesis (beyond a `1e−10` relative slack) are
/// rejected rather than reported as a failed check.
pub fn lemma51_oracle(g: &Graph, root: usize, gamma: f64, r: usize, c: &[f64]) -> Result<bool> {
    if c.len() != g.len() {
        return invalid(format!("{} weights for {} vertices", c.len(), g.len()));
    }
    if c.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return invalid("weights must be finite and non-negative");
    }
    let t = nkh_table(g, root)?;
    let r = r.min(t.h_star);
    for layer in t.layers.iter().take(r) {
        for &i in layer {
            let rhs: f64 = gamma * g.neighbors(i).iter().map(|&j| c[j]).sum::<f64>();
            if c[i] > rhs * (1.0 + 1e-10) + 1e-300 {
                return invalid(format!("hypothesis fails at vertex {i}: {} > {rhs}", c[i]));
            }
        }
    }
    let seq = gamma_sequence(&t, gamma, r)?;
    let bound = gamma_r(&seq) * t.layer(r).iter().map(|&i| c[i]).sum::<f64>();
    Ok(c[root] <= bound * (1.0 + 1e-9) + 1e-300)
}

/// Everything the decay analysis produces for one root and radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub root: usize,
    pub r: usize,
    pub h_star: usize,
    pub theta: f64,
    pub theta_star: f64,
    pub feasible: bool,
    pub gamma_seq: Vec<f64>,
    pub gamma_r: f64,
    /// `sup_{k∈L_{h+1}} N_k^h` for each `h < r`.
    pub sup_counts: Vec<usize>,
    pub tilde_gamma_seq: Vec<f64>,
    pub tilde_gamma_r: Option<f64>,
    pub rhs_weights: Vec<(f64, f64)>,
}

/// Assembles the [`DecayReport`] with `θ` taken over the radius-`r` ball.
pub fn decay_report(b: &CostBounds, g: &Graph, root: usize, r: usize) -> Result<DecayReport> {
    let t = nkh_table(g, root)?;
    let r_eff = r.min(t.h_star);
    let ball = t.ball(r_eff.max(1));
    let theta = theta_from_game(b, g, &ball)?;
    let theta_star = theta_star(&t, r_eff)?;
    let seq = if theta.is_finite() {
        gamma_sequence(&t, theta, r_eff).ok()
    } else {
        None
    };
    let feasible = seq.is_some() && theta <= theta_star;
    let gamma_seq = seq.unwrap_or_default();
    let tilde = if theta.is_finite() && r_eff < t.h_star {
        tilde_gamma(&t, theta, r_eff).ok()
    } else {
        None
    };
    Ok(DecayReport {
        root,
        r: r_eff,
        h_star: t.h_star,
        theta,
        theta_star,
        feasible,
        gamma_r: if gamma_seq.len() == r_eff { gamma_r(&gamma_seq) } else { f64::NAN },
        gamma_seq,
        sup_counts: (0..r_eff).map(|h| t.sup_count(h + 1, h)).collect(),
        tilde_gamma_seq: tilde.as_ref().map(|x| x.seq.clone()).unwrap_or_default(),
        tilde_gamma_r: tilde.map(|x| x.total),
        rhs_weights: b.weights(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_chain, build_lattice, Orientation};
    use approx::assert_relative_eq;

    fn cycle_table(n: usize) -> NkhTable {
        nkh_table(&build_chain(n, true).unwrap(), 0).unwrap()
    }

    #[test]
    fn theta_on_chain() {
        let g = build_chain(9, true).unwrap();
        let b = CostBounds::uniform(9, 1.0, 1.0, 1.0, 0.15, 0.0, 0.0);
        let all: Vec<usize> = (0..9).collect();
        assert_relative_eq!(theta_from_game(&b, &g, &all).unwrap(), 0.15 / 1.125, epsilon = 1e-15);

        let b0 = CostBounds::uniform(9, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0);
        assert_eq!(theta_from_game(&b0, &g, &all).unwrap(), 0.0);

        let mut b2 = b.clone();
        b2.horizon = 2.0;
        assert!(theta_from_game(&b2, &g, &all).unwrap() > theta_from_game(&b, &g, &all).unwrap());
        assert!(theta_from_game(&b, &g, &[]).is_err());
    }

    #[test]
    fn theta_empty_neighbourhood_is_zero() {
        let g = build_chain(1, false).unwrap();
        let b = CostBounds::uniform(1, 1.0, 1.0, 0.0, 0.5, 0.0, 0.5);
        assert_eq!(theta_from_game(&b, &g, &[0]).unwrap(), 0.0);
    }

    #[test]
    fn cycle_gamma_values() {
        let t = cycle_table(41);
        let seq = gamma_sequence(&t, 0.25, 3).unwrap();
        assert_relative_eq!(seq[1], 0.25 / (1.0 - 2.0 * 0.0625), epsilon = 1e-15);
        assert_relative_eq!(seq[1], 0.285_714_285_714_285_7, epsilon = 1e-12);
        assert_relative_eq!(seq[2], 0.269_230_769_230_769_2, epsilon = 1e-12);
    }

    #[test]
    fn outward_lattice_gamma_is_two_theta() {
        let t = nkh_table(&build_lattice(6, Orientation::Outward).unwrap(), 0).unwrap();
        let seq = gamma_sequence(&t, 0.2, 4).unwrap();
        for &g in &seq[1..] {
            assert_relative_eq!(g, 0.4, epsilon = 1e-15);
        }
        assert_relative_eq!(gamma_r(&seq[..3]), 0.032, epsilon = 1e-15);
    }

    #[test]
    fn empty_next_layer_gives_zero() {
        let t = cycle_table(7);
        let seq = gamma_sequence(&t, 0.2, t.h_star).unwrap();
        assert_eq!(*seq.last().unwrap(), 0.0);
        assert_eq!(gamma_r(&seq), 0.0);
        assert_eq!(gamma_r(&[]), 1.0);
        assert!(gamma_sequence(&t, 0.2, t.h_star + 1).is_err());
    }

    #[test]
    fn infeasible_gamma_is_reported() {
        let t = cycle_table(41);
        let err = gamma_sequence(&t, 0.9, 10).unwrap_err();
        assert!(matches!(err, GameError::Infeasible(_)));
    }

    #[test]
    fn theta_star_cases() {
        let t = nkh_table(&build_lattice(6, Orientation::Outward).unwrap(), 0).unwrap();
        assert_eq!(theta_star(&t, 6).unwrap(), 1.0);
        let single = nkh_table(&build_chain(1, false).unwrap(), 0).unwrap();
        assert_eq!(theta_star(&single, 1).unwrap(), 1.0);

        // on long cycles the threshold decreases towards 1/2
        let t = cycle_table(401);
        let mut prev = 1.0;
        for r in [5, 20, 80, 200] {
            let ts = theta_star(&t, r).unwrap();
            assert!(ts >= 0.5 && ts <= prev, "r = {r}: {ts}");
            assert!(gamma_sequence(&t, ts, r).is_ok());
            assert!(gamma_sequence(&t, ts + 1e-9, r).is_err());
            prev = ts;
        }
        assert!(prev < 0.51);
    }

    #[test]
    fn uniform_threshold_values() {
        assert_relative_eq!(theta_star_uniform(1, 0.5).unwrap(), 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(theta_star_uniform(4, 0.25).unwrap(), 0.025, epsilon = 1e-15);
        assert!(theta_star_uniform(0, 0.5).is_err());
        assert!(theta_star_uniform(2, 1.0).is_err());
    }

    #[test]
    fn reduction_radius_values() {
        assert_eq!(reduction_radius(0.01, 5.0, 2).unwrap().1, 10);
        assert_eq!(reduction_radius(10.0, 5.0, 2).unwrap().1, 0);
        assert_eq!(reduction_radius(1.0, 1.0, 2).unwrap().1, 1);
        let (theta, _) = reduction_radius(1.0, 1.0, 2).unwrap();
        assert_relative_eq!(theta, theta_star_uniform(2, 0.125).unwrap());
    }

    #[test]
    fn tilde_gamma_single_term_at_last_layer() {
        let t = cycle_table(9);
        let r = t.h_star - 1;
        let tg = tilde_gamma(&t, 0.1, r).unwrap();
        let seq = gamma_sequence(&t, 0.1, t.h_star).unwrap();
        assert_eq!(tg.seq.len(), 1);
        assert_relative_eq!(tg.total, gamma_r(&seq[..r]) * tg.seq[0], epsilon = 1e-15);
        assert!(tilde_gamma(&t, 0.1, t.h_star).is_err());
    }

    #[test]
    fn tilde_gamma_vanishes_with_theta() {
        let t = cycle_table(17);
        let a = tilde_gamma(&t, 1e-3, 2).unwrap().total;
        let b = tilde_gamma(&t, 1e-6, 2).unwrap().total;
        assert!(b < a && b < 1e-10);
    }

    #[test]
    fn lemma51_zero_and_rejection() {
        let g = build_chain(9, true).unwrap();
        assert!(lemma51_oracle(&g, 0, 0.2, 3, &[0.0; 9]).unwrap());
        let mut c = vec![0.0; 9];
        c[0] = 1.0;
        assert!(lemma51_oracle(&g, 0, 0.2, 3, &c).is_err());
    }

    #[test]
    fn report_assembles() {
        let g = build_chain(21, true).unwrap();
        let b = CostBounds::uniform(21, 1.0, 1.0, 1.0, 0.15, 0.0, 0.0);
        let rep = decay_report(&b, &g, 0, 4).unwrap();
        assert!(rep.feasible);
        assert_eq!(rep.gamma_seq.len(), 4);
        assert_relative_eq!(rep.gamma_r, rep.gamma_seq.iter().product::<f64>());
        assert_eq!(rep.sup_counts, vec![1, 1, 1, 1]);
        assert!(rep.tilde_gamma_r.unwrap() > 0.0);
        assert_eq!(rep.rhs_weights[0], (0.125, 1.125));
    }
}
