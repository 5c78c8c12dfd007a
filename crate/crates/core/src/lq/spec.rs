use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::decay::CostBounds;
use crate::error::{invalid, GameError, Result};
use crate::graph::{build_chain, Graph, GraphDoc};
use crate::numerics::{matrix_from_rows, matrix_to_rows, min_eigenvalue};

/// Gaussian law `N(mean, cov)` on `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLaw {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianLaw {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        GaussianLaw { mean, cov }
    }

    pub fn scalar(mean: f64, var: f64) -> Self {
        GaussianLaw {
            mean: DVector::from_element(1, mean),
            cov: DMatrix::from_element(1, 1, var),
        }
    }

    pub fn dirac(point: DVector<f64>) -> Self {
        let d = point.len();
        GaussianLaw {
            mean: point,
            cov: DMatrix::zeros(d, d),
        }
    }

    /// `E|X|² = |mean|² + tr(cov)`.
    pub fn second_moment(&self) -> f64 {
        self.mean.norm_squared() + self.cov.trace()
    }
}

/// Linear-quadratic network game.
///
/// Player `i` controls `dX^i = a^i dt + σ^i dB^i` at running cost
/// `κ^i |a|²/2 + Σ_{j∼i} ½ (x^i − μ x^j)ᵀ Q (x^i − μ x^j)` and terminal cost
/// `½ x^iᵀ G^i x^i`, so `H^i(p) = |p|²/(2κ^i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqGameSpec {
    pub graph: Graph,
    pub dim: usize,
    pub horizon: f64,
    pub kappa: Vec<f64>,
    pub coupling: DMatrix<f64>,
    pub mu: f64,
    pub terminal: Vec<DMatrix<f64>>,
    pub sigma: Vec<DMatrix<f64>>,
    pub init: Vec<GaussianLaw>,
}

impl LqGameSpec {
    /// One-dimensional game with uniform parameters and `G = 0`.
    pub fn scalar(
        graph: Graph,
        horizon: f64,
        kappa: f64,
        q: f64,
        mu: f64,
        sigma: f64,
        init: Vec<GaussianLaw>,
    ) -> Result<Self> {
        let n = graph.len();
        let spec = LqGameSpec {
            graph,
            dim: 1,
            horizon,
            kappa: vec![kappa; n],
            coupling: DMatrix::from_element(1, 1, q),
            mu,
            terminal: vec![DMatrix::zeros(1, 1); n],
            sigma: vec![DMatrix::from_element(1, 1, sigma); n],
            init,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Cycle of `n` players with `d = 1`, `κ = Q = T = σ = 1` and initial laws
    /// `N((i mod 3) − 1, 1)`.
    pub fn chain_benchmark(n: usize, mu: f64) -> Result<Self> {
        let init = (0..n)
            .map(|i| GaussianLaw::scalar((i % 3) as f64 - 1.0, 1.0))
            .collect();
        Self::scalar(build_chain(n, true)?, 1.0, 1.0, 1.0, mu, 1.0, init)
    }

    pub fn num_players(&self) -> usize {
        self.graph.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.graph.len();
        let d = self.dim;
        if n == 0 || d == 0 {
            return invalid("game needs at least one player and dimension d ≥ 1");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return invalid(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.kappa.len() != n || self.kappa.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return invalid("kappa needs one positive entry per player");
        }
        if !(0.0..1.0).contains(&self.mu) {
            return invalid(format!("mu must lie in [0, 1), got {}", self.mu));
        }
        check_square(&self.coupling, d, "coupling Q")?;
        check_symmetric(&self.coupling, "coupling Q")?;
        if min_eigenvalue(&self.coupling) <= 0.0 {
            return invalid("coupling Q must be positive definite");
        }
        if self.terminal.len() != n || self.sigma.len() != n || self.init.len() != n {
            return invalid("terminal, sigma and init need one entry per player");
        }
        for i in 0..n {
            check_square(&self.terminal[i], d, "terminal G")?;
            check_symmetric(&self.terminal[i], "terminal G")?;
            if min_eigenvalue(&self.terminal[i]) < -1e-12 {
                return invalid(format!("terminal G of player {i} is not PSD"));
            }
            check_square(&self.sigma[i], d, "sigma")?;
            let law = &self.init[i];
            if law.mean.len() != d || law.mean.iter().any(|x| !x.is_finite()) {
                return invalid(format!("initial mean of player {i} must have {d} finite entries"));
            }
            check_square(&law.cov, d, "initial covariance")?;
            check_symmetric(&law.cov, "initial covariance")?;
            if min_eigenvalue(&law.cov) < -1e-12 {
                return invalid(format!("initial covariance of player {i} is not PSD"));
            }
        }
        Ok(())
    }

    /// Extreme eigenvalues `(λ, Λ)` of `Q`.
    pub fn coupling_bounds(&self) -> (f64, f64) {
        let eig = SymmetricEigen::new(self.coupling.clone()).eigenvalues;
        (eig.min(), eig.max())
    }

    /// Structural constants of the costs.
    ///
    /// `ℓ_f = μΛ/2`, `K_g = λ_min(G)`, `ℓ_g = 0`. For `K_f` the own-state
    /// convexity of `Σ_{j∼i} φ(x^i − μx^j)` is `n_i(λ − μΛ/2)`; the reported
    /// value is `min(λ, n_i(λ − μΛ/2))` clamped at zero, which equals `λ`
    /// on the cycle whenever `μΛ ≤ λ`.
    pub fn cost_bounds(&self) -> CostBounds {
        let (lambda, big_lambda) = self.coupling_bounds();
        own_convexity_bounds(
            &self.graph,
            self.horizon,
            &self.kappa,
            lambda,
            big_lambda,
            self.mu,
            self.terminal.iter().map(min_eigenvalue).collect(),
        )
    }

    /// `Σ^i = σ^i σ^iᵀ`.
    pub fn diffusion(&self, i: usize) -> DMatrix<f64> {
        &self.sigma[i] * self.sigma[i].transpose()
    }

    /// Gradient matrix `F` of `D_i f^i`: `F^{ii} = n_i Q`, `F^{ik} = −μQ` for
    /// `k ∈ N_i`, restricted to `index_set` (sorted).
    pub fn assemble_f_on(&self, index_set: &[usize]) -> DMatrix<f64> {
        let d = self.dim;
        let n = index_set.len() * d;
        let mut f = DMatrix::zeros(n, n);
        for (a, &i) in index_set.iter().enumerate() {
            let nbrs = self.graph.neighbors(i);
            f.view_mut((a * d, a * d), (d, d))
                .copy_from(&(&self.coupling * nbrs.len() as f64));
            for &k in nbrs {
                if let Ok(b) = index_set.binary_search(&k) {
                    f.view_mut((a * d, b * d), (d, d))
                        .copy_from(&(&self.coupling * -self.mu));
                }
            }
        }
        f
    }

    pub fn all_players(&self) -> Vec<usize> {
        (0..self.num_players()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LqGameDoc::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: LqGameDoc =
            serde_json::from_str(text).map_err(|e| GameError::InvalidInput(format!("game JSON: {e}")))?;
        doc.try_into()
    }
}

/// Shared by the quadratic and convex couplings: constants of
/// `f^i = Σ_{j∼i} φ(x^i − μx^j)` with `λ ≤ φ'' ≤ Λ`.
pub(crate) fn own_convexity_bounds(
    graph: &Graph,
    horizon: f64,
    kappa: &[f64],
    lambda: f64,
    big_lambda: f64,
    mu: f64,
    k_g: Vec<f64>,
) -> CostBounds {
    let n = graph.len();
    let k_f = (0..n)
        .map(|i| {
            let own = graph.neighbors(i).len() as f64 * (lambda - mu * big_lambda / 2.0);
            lambda.min(own).max(0.0)
        })
        .collect();
    CostBounds {
        horizon,
        kappa: kappa.to_vec(),
        k_f,
        l_f: vec![mu * big_lambda / 2.0; n],
        k_g: k_g.into_iter().map(|x| x.max(0.0)).collect(),
        l_g: vec![0.0; n],
    }
}

fn check_square(m: &DMatrix<f64>, d: usize, what: &str) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return invalid(format!("{what} must be {d}x{d}"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return invalid(format!("{what} has non-finite entries"));
    }
    Ok(())
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return invalid(format!("{what} must be symmetric"));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianDoc {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

/// JSON form of [`LqGameSpec`], every per-player field listed explicitly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqGameDoc {
    pub graph: GraphDoc,
    pub dim: usize,
    pub horizon: f64,
    pub kappa: Vec<f64>,
    pub coupling: Vec<Vec<f64>>,
    pub mu: f64,
    pub terminal: Vec<Vec<Vec<f64>>>,
    pub sigma: Vec<Vec<Vec<f64>>>,
    pub init: Vec<GaussianDoc>,
}

impl From<&LqGameSpec> for LqGameDoc {
    fn from(s: &LqGameSpec) -> Self {
        LqGameDoc {
            graph: s.graph.clone().into(),
            dim: s.dim,
            horizon: s.horizon,
            kappa: s.kappa.clone(),
            coupling: matrix_to_rows(&s.coupling),
            mu: s.mu,
            terminal: s.terminal.iter().map(matrix_to_rows).collect(),
            sigma: s.sigma.iter().map(matrix_to_rows).collect(),
            init: s
                .init
                .iter()
                .map(|g| GaussianDoc {
                    mean: g.mean.iter().copied().collect(),
                    cov: matrix_to_rows(&g.cov),
                })
                .collect(),
        }
    }
}

impl TryFrom<LqGameDoc> for LqGameSpec {
    type Error = GameError;

    fn try_from(doc: LqGameDoc) -> Result<Self> {
        let d = doc.dim;
        let mats = |v: &[Vec<Vec<f64>>], what: &str| -> Result<Vec<DMatrix<f64>>> {
            v.iter().map(|m| matrix_from_rows(m, d, what)).collect()
        };
        let init = doc
            .init
            .iter()
            .map(|g| {
                if g.mean.len() != d {
                    return invalid(format!("initial mean must have {d} entries"));
                }
                Ok(GaussianLaw::new(
                    DVector::from_vec(g.mean.clone()),
                    matrix_from_rows(&g.cov, d, "initial covariance")?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = LqGameSpec {
            graph: Graph::try_from(doc.graph)?,
            dim: d,
            horizon: doc.horizon,
            kappa: doc.kappa,
            coupling: matrix_from_rows(&doc.coupling, d, "coupling Q")?,
            mu: doc.mu,
            terminal: mats(&doc.terminal, "terminal G")?,
            sigma: mats(&doc.sigma, "sigma")?,
            init,
        };
        spec.validate()?;
        Ok(spec)
    }
}
