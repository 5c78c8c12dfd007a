//! Backward block-Riccati solve for the LQ decoupling field.
//!
//! Substituting `v^i(t, x) = Σ_j P^{ij}(t) x^j + q^i(t)` into the forward-backward
//! system: second derivatives of a linear field vanish, `D_x H^i = 0` and
//! `D_p H^j(p) = p/κ^j`, so the transport term `Σ_j D_j v^i · D_p H^j(v^j)`
//! becomes `Σ_{j,k} P^{ij} P^{jk} x^k / κ^j + Σ_j P^{ij} q^j / κ^j`. The
//! source `D_i f^i = Σ_k F^{ik} x^k + c^i(t)` is linear too, where `c^i`
//! collects the frozen boundary players. Matching the coefficients of `x^k`
//! and the constant term gives
//!
//! ```text
//! Ṗ = P K⁻¹ P − F,        P(T) = blockdiag(G^i),
//! q̇ = P K⁻¹ q − c,        q(T) = 0,
//! ```
//!
//! with `c^i(t) = −μQ Σ_{j∈N_i∖I} E[Z^j_t]`. Both are integrated backward by
//! RK4 in `τ = T − t` on a grid twice as fine as the reported one, so the
//! forward state flow gets exact midpoint values.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, GameError, Result};
use crate::numerics::interp_uniform;

use super::spec::{GaussianLaw, LqGameSpec};

/// Abort threshold on the entries of `P`.
pub const BLOWUP_LIMIT: f64 = 1e8;

/// Laws of the boundary processes `Z^j` outside the reduced index set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// `Z^j_t ≡ X^j_0`, so its law stays `m_0^j`.
    #[default]
    FrozenInitial,
    /// `Z^j_t ≡ 0`.
    ZeroDirac,
}

/// Mean and covariance samples of one boundary process on a uniform grid
/// over `[0, T]`; a single sample is a constant path.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPath {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

impl BoundaryPath {
    pub fn constant(law: &GaussianLaw) -> Self {
        BoundaryPath {
            means: vec![law.mean.clone()],
            covs: vec![law.cov.clone()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub horizon: f64,
    pub paths: BTreeMap<usize, BoundaryPath>,
}

impl BoundaryData {
    /// Boundary players of `index_set` with laws chosen by `policy`.
    pub fn from_policy(spec: &LqGameSpec, index_set: &[usize], policy: BoundaryPolicy) -> Self {
        let paths = boundary_players(spec, index_set)
            .into_iter()
            .map(|j| {
                let law = match policy {
                    BoundaryPolicy::FrozenInitial => spec.init[j].clone(),
                    BoundaryPolicy::ZeroDirac => GaussianLaw::dirac(DVector::zeros(spec.dim)),
                };
                (j, BoundaryPath::constant(&law))
            })
            .collect();
        BoundaryData {
            horizon: spec.horizon,
            paths,
        }
    }

    pub fn mean_at(&self, j: usize, t: f64) -> Option<DVector<f64>> {
        self.paths
            .get(&j)
            .map(|p| interp_uniform(&p.means, self.horizon, t))
    }

    /// `𝔪₂(Z^j_t)`.
    pub fn second_moment_at(&self, j: usize, t: f64) -> Option<f64> {
        let p = self.paths.get(&j)?;
        let mean = interp_uniform(&p.means, self.horizon, t);
        let covs: Vec<DVector<f64>> = p
            .covs
            .iter()
            .map(|c| DVector::from_element(1, c.trace()))
            .collect();
        Some(mean.norm_squared() + interp_uniform(&covs, self.horizon, t)[0])
    }
}

/// `⋃_{i∈I} N_i ∖ I`, sorted.
pub fn boundary_players(spec: &LqGameSpec, index_set: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = index_set
        .iter()
        .flat_map(|&i| spec.graph.neighbors(i).iter().copied())
        .filter(|j| index_set.binary_search(j).is_err())
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Sorted, deduplicated copy of `index_set` after range checks.
pub fn normalize_index_set(spec: &LqGameSpec, index_set: &[usize]) -> Result<Vec<usize>> {
    if index_set.is_empty() {
        return invalid("index set must be non-empty");
    }
    let mut set = index_set.to_vec();
    set.sort_unstable();
    set.dedup();
    if let Some(&bad) = set.iter().find(|&&i| i >= spec.num_players()) {
        return invalid(format!("index {bad} out of range for {} players", spec.num_players()));
    }
    Ok(set)
}

/// Solution of the backward system on the reported grid of `steps` intervals.
///
/// `P` and `q` are kept on the doubled grid: fine index `2m` is the reported
/// time `t_m`, `2m + 1` its midpoint.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub index_set: Vec<usize>,
    pub dim: usize,
    pub horizon: f64,
    pub steps: usize,
    p: Vec<DMatrix<f64>>,
    q: Vec<DVector<f64>>,
}

impl RiccatiSolution {
    pub fn time(&self, m: usize) -> f64 {
        self.horizon * m as f64 / self.steps as f64
    }

    /// `P(t_m)`.
    pub fn p(&self, m: usize) -> &DMatrix<f64> {
        &self.p[2 * m]
    }

    /// `q(t_m)`.
    pub fn q(&self, m: usize) -> &DVector<f64> {
        &self.q[2 * m]
    }

    /// Values on the doubled grid, `k = 0..=2·steps`.
    pub fn p_fine(&self, k: usize) -> &DMatrix<f64> {
        &self.p[k]
    }

    pub fn q_fine(&self, k: usize) -> &DVector<f64> {
        &self.q[k]
    }

    /// Position of a global player index in the solved set.
    pub fn local(&self, i: usize) -> Option<usize> {
        self.index_set.binary_search(&i).ok()
    }

    /// Block `P^{ij}(t_m)` for global indices `i, j` of the solved set.
    pub fn block(&self, m: usize, i: usize, j: usize) -> Option<DMatrix<f64>> {
        let (a, b) = (self.local(i)?, self.local(j)?);
        let d = self.dim;
        Some(self.p(m).view((a * d, b * d), (d, d)).into_owned())
    }
}

fn rhs(
    f: &DMatrix<f64>,
    kinv: &DVector<f64>,
    c: &DVector<f64>,
    p: &DMatrix<f64>,
    q: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    // P K⁻¹ with K⁻¹ diagonal
    let mut pk = p.clone();
    for (col, &w) in kinv.iter().enumerate() {
        pk.column_mut(col).scale_mut(w);
    }
    (f - &pk * p, c - pk * q)
}

/// Integrates the backward system on `index_set` (any order; stored sorted).
///
/// `boundary` must cover every player in `⋃_{i∈I} N_i ∖ I`.
pub fn riccati_solve(
    spec: &LqGameSpec,
    index_set: &[usize],
    boundary: Option<&BoundaryData>,
    steps: usize,
) -> Result<RiccatiSolution> {
    if steps < 2 {
        return invalid(format!("steps must be at least 2, got {steps}"));
    }
    let set = normalize_index_set(spec, index_set)?;
    let needed = boundary_players(spec, &set);
    if let Some(&j) = needed
        .iter()
        .find(|j| boundary.is_none_or(|b| !b.paths.contains_key(j)))
    {
        return invalid(format!("missing boundary data for player {j}"));
    }
    let d = spec.dim;
    let n = set.len() * d;
    let f = spec.assemble_f_on(&set);
    let kinv = DVector::from_iterator(n, set.iter().flat_map(|&i| std::iter::repeat_n(1.0 / spec.kappa[i], d)));
    let forcing = |t: f64| -> DVector<f64> {
        let mut c = DVector::zeros(n);
        let Some(b) = boundary else { return c };
        for (a, &i) in set.iter().enumerate() {
            let mut sum = DVector::zeros(d);
            for &j in spec.graph.neighbors(i) {
                if set.binary_search(&j).is_err() {
                    sum += b.mean_at(j, t).expect("checked above");
                }
            }
            if sum.iter().any(|&x| x != 0.0) {
                let block = &spec.coupling * sum * (-spec.mu);
                c.rows_mut(a * d, d).copy_from(&block);
            }
        }
        c
    };

    let fine = 2 * steps;
    let h = spec.horizon / fine as f64;
    let mut p_path = vec![DMatrix::zeros(n, n); fine + 1];
    let mut q_path = vec![DVector::zeros(n); fine + 1];
    let mut p = DMatrix::zeros(n, n);
    for (a, &i) in set.iter().enumerate() {
        p.view_mut((a * d, a * d), (d, d)).copy_from(&spec.terminal[i]);
    }
    let mut q = DVector::zeros(n);
    p_path[fine] = p.clone();
    q_path[fine] = q.clone();
    for k in (0..fine).rev() {
        let t1 = (k + 1) as f64 * h;
        let (c1, c2, c3) = (forcing(t1), forcing(t1 - 0.5 * h), forcing(k as f64 * h));
        let (k1p, k1q) = rhs(&f, &kinv, &c1, &p, &q);
        let (k2p, k2q) = rhs(&f, &kinv, &c2, &(&p + &k1p * (0.5 * h)), &(&q + &k1q * (0.5 * h)));
        let (k3p, k3q) = rhs(&f, &kinv, &c2, &(&p + &k2p * (0.5 * h)), &(&q + &k2q * (0.5 * h)));
        let (k4p, k4q) = rhs(&f, &kinv, &c3, &(&p + &k3p * h), &(&q + &k3q * h));
        p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
        q += (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (h / 6.0);
        let norm = p.amax();
        if !norm.is_finite() || norm > BLOWUP_LIMIT {
            return Err(GameError::BlowUp {
                time: k as f64 * h,
                norm,
                limit: BLOWUP_LIMIT,
            });
        }
        p_path[k] = p.clone();
        q_path[k] = q.clone();
    }
    Ok(RiccatiSolution {
        index_set: set,
        dim: d,
        horizon: spec.horizon,
        steps,
        p: p_path,
        q: q_path,
    })
}

/// Relative change of the full-game `P(0)` when the step count is doubled.
pub fn refinement_change(spec: &LqGameSpec, steps: usize) -> Result<f64> {
    let all = spec.all_players();
    let coarse = riccati_solve(spec, &all, None, steps)?;
    let fine = riccati_solve(spec, &all, None, 2 * steps)?;
    let scale = fine.p(0).amax();
    let diff = (coarse.p(0) - fine.p(0)).amax();
    Ok(if scale == 0.0 { diff } else { diff / scale })
}

/// Fails with [`GameError::Refinement`] when doubling the step count moves
/// `P(0)` by more than `limit` in relative max-norm.
pub fn check_refinement(spec: &LqGameSpec, steps: usize, limit: f64) -> Result<f64> {
    let change = refinement_change(spec, steps)?;
    if change > limit {
        return Err(GameError::Refinement { change, limit });
    }
    Ok(change)
}
