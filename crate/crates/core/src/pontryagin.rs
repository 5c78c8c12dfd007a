//! Deterministic games with a convex coupling, solved along characteristics.
//!
//! With `σ = 0`, Dirac initial data and `H^i(p) = |p|²/(2κ^i)`, the state
//! moves by `Ẋ^j = −D_pH^j(v^j) = −v^j/κ^j`, so along the flow the chain rule
//! gives `d/dt v^i(t, X_t) = ∂_t v^i + Σ_j D_j v^i Ẋ^j = −D_i f^i(X_t)`. Writing
//! `p^i = v^i(t, X_t)` turns the system into the two-point problem
//!
//! ```text
//! Ẋ^i = −p^i/κ^i,   ṗ^i = −D_i f^i(X),   X(0) = x_0,   p^i(T) = G^i X^i(T),
//! ```
//!
//! solved by single shooting on `p(0)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decay::CostBounds;
use crate::error::{invalid, GameError, Result};
use crate::graph::{build_chain, nkh_table, Graph, GraphDoc};
use crate::lq::experiment::{check_radii, reduction_bound};
use crate::lq::spec::own_convexity_bounds;
use crate::lq::{BoundaryPolicy, CurveRow, W2Curve};
use crate::numerics::{matrix_from_rows, matrix_to_rows, min_eigenvalue, trapezoid_average};

/// Largest shooting dimension `d·|I|`.
pub const MAX_SHOOTING_DIM: usize = 64;

/// `ln cosh x` without overflow.
fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Convex `φ: R^d → R` with `λ ≤ φ'' ≤ Λ`, applied coordinate-wise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexCoupling {
    /// `½λ|z|²`.
    Quadratic { lambda: f64 },
    /// `½λ|z|² + ε Σ log cosh z_c`, so `Λ = λ + ε`.
    Smoothed { lambda: f64, epsilon: f64 },
}

impl ConvexCoupling {
    pub fn validate(&self) -> Result<()> {
        let (l, e) = match *self {
            ConvexCoupling::Quadratic { lambda } => (lambda, 0.0),
            ConvexCoupling::Smoothed { lambda, epsilon } => (lambda, epsilon),
        };
        if !(l > 0.0 && l.is_finite() && e >= 0.0 && e.is_finite()) {
            return invalid("coupling needs lambda > 0 and epsilon ≥ 0");
        }
        Ok(())
    }

    /// `(λ, Λ)`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            ConvexCoupling::Quadratic { lambda } => (lambda, lambda),
            ConvexCoupling::Smoothed { lambda, epsilon } => (lambda, lambda + epsilon),
        }
    }

    pub fn value(&self, z: &DVector<f64>) -> f64 {
        match *self {
            ConvexCoupling::Quadratic { lambda } => 0.5 * lambda * z.norm_squared(),
            ConvexCoupling::Smoothed { lambda, epsilon } => {
                0.5 * lambda * z.norm_squared() + epsilon * z.iter().map(|&c| log_cosh(c)).sum::<f64>()
            }
        }
    }

    pub fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        match *self {
            ConvexCoupling::Quadratic { lambda } => z * lambda,
            ConvexCoupling::Smoothed { lambda, epsilon } => z.map(|c| lambda * c + epsilon * c.tanh()),
        }
    }
}

/// Deterministic game `f^i = Σ_{j∼i} φ(x^i − μx^j)`, `g^i = ½x^iᵀG^i x^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetGameSpec {
    pub graph: Graph,
    pub dim: usize,
    pub horizon: f64,
    pub kappa: Vec<f64>,
    pub coupling: ConvexCoupling,
    pub mu: f64,
    pub terminal: Vec<DMatrix<f64>>,
    pub init: Vec<DVector<f64>>,
}

impl DetGameSpec {
    /// Cycle with `d = 1`, `κ = T = 1`, `G = 0` and `x_0^i = (i mod 3) − 1`.
    pub fn chain_benchmark(n: usize, mu: f64, coupling: ConvexCoupling) -> Result<Self> {
        let spec = DetGameSpec {
            graph: build_chain(n, true)?,
            dim: 1,
            horizon: 1.0,
            kappa: vec![1.0; n],
            coupling,
            mu,
            terminal: vec![DMatrix::zeros(1, 1); n],
            init: (0..n)
                .map(|i| DVector::from_element(1, (i % 3) as f64 - 1.0))
                .collect(),
        };
        spec.validate()?;
        Ok(spec)
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
            return invalid("horizon must be positive");
        }
        if self.kappa.len() != n || self.kappa.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return invalid("kappa needs one positive entry per player");
        }
        if !(0.0..1.0).contains(&self.mu) {
            return invalid(format!("mu must lie in [0, 1), got {}", self.mu));
        }
        self.coupling.validate()?;
        if self.terminal.len() != n || self.init.len() != n {
            return invalid("terminal and init need one entry per player");
        }
        for (i, g) in self.terminal.iter().enumerate() {
            if g.shape() != (d, d) || (g - g.transpose()).amax() > 1e-12 * g.amax().max(1.0) {
                return invalid(format!("terminal G of player {i} must be a symmetric {d}x{d} matrix"));
            }
            if min_eigenvalue(g) < -1e-12 {
                return invalid(format!("terminal G of player {i} is not PSD"));
            }
        }
        if self.init.iter().any(|x| x.len() != d || x.iter().any(|v| !v.is_finite())) {
            return invalid(format!("initial states must have {d} finite entries"));
        }
        Ok(())
    }

    pub fn cost_bounds(&self) -> CostBounds {
        let (lambda, big_lambda) = self.coupling.bounds();
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

    /// `f^i(x)`, reading `x^j` for every neighbour.
    pub fn running_cost(&self, i: usize, x: &[DVector<f64>]) -> f64 {
        self.graph
            .neighbors(i)
            .iter()
            .map(|&j| self.coupling.value(&(&x[i] - &x[j] * self.mu)))
            .sum()
    }

    /// `D_i f^i(x) = Σ_{j∼i} φ'(x^i − μx^j)`.
    pub fn own_gradient(&self, i: usize, x: &[DVector<f64>]) -> DVector<f64> {
        self.graph
            .neighbors(i)
            .iter()
            .fold(DVector::zeros(self.dim), |acc, &j| {
                acc + self.coupling.gradient(&(&x[i] - &x[j] * self.mu))
            })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DetGameDoc::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DetGameDoc =
            serde_json::from_str(text).map_err(|e| GameError::InvalidInput(format!("game JSON: {e}")))?;
        doc.try_into()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetGameDoc {
    pub graph: GraphDoc,
    pub dim: usize,
    pub horizon: f64,
    pub kappa: Vec<f64>,
    pub coupling: ConvexCoupling,
    pub mu: f64,
    pub terminal: Vec<Vec<Vec<f64>>>,
    pub init: Vec<Vec<f64>>,
}

impl From<&DetGameSpec> for DetGameDoc {
    fn from(s: &DetGameSpec) -> Self {
        DetGameDoc {
            graph: s.graph.clone().into(),
            dim: s.dim,
            horizon: s.horizon,
            kappa: s.kappa.clone(),
            coupling: s.coupling,
            mu: s.mu,
            terminal: s.terminal.iter().map(matrix_to_rows).collect(),
            init: s.init.iter().map(|x| x.iter().copied().collect()).collect(),
        }
    }
}

impl TryFrom<DetGameDoc> for DetGameSpec {
    type Error = GameError;

    fn try_from(doc: DetGameDoc) -> Result<Self> {
        let spec = DetGameSpec {
            graph: Graph::try_from(doc.graph)?,
            dim: doc.dim,
            horizon: doc.horizon,
            kappa: doc.kappa,
            coupling: doc.coupling,
            mu: doc.mu,
            terminal: doc
                .terminal
                .iter()
                .map(|m| matrix_from_rows(m, doc.dim, "terminal G"))
                .collect::<Result<_>>()?,
            init: doc.init.into_iter().map(DVector::from_vec).collect(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Frozen positions of the players outside the index set.
pub fn det_boundary(spec: &DetGameSpec, index_set: &[usize], policy: BoundaryPolicy) -> BTreeMap<usize, DVector<f64>> {
    index_set
        .iter()
        .flat_map(|&i| spec.graph.neighbors(i).iter().copied())
        .filter(|j| index_set.binary_search(j).is_err())
        .map(|j| {
            let z = match policy {
                BoundaryPolicy::FrozenInitial => spec.init[j].clone(),
                BoundaryPolicy::ZeroDirac => DVector::zeros(spec.dim),
            };
            (j, z)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShootingOptions {
    pub steps: usize,
    pub tol: f64,
    pub max_newton: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            steps: 1000,
            tol: 1e-10,
            max_newton: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TpbvpSolution {
    pub index_set: Vec<usize>,
    pub dim: usize,
    pub horizon: f64,
    pub steps: usize,
    /// Stacked states per grid time.
    pub states: Vec<DVector<f64>>,
    pub costates: Vec<DVector<f64>>,
    /// `max |p^i(T) − G^i X^i(T)|`.
    pub residual: f64,
    pub newton_iterations: usize,
    pub fallback_iterations: usize,
}

impl TpbvpSolution {
    pub fn state(&self, i: usize, m: usize) -> Option<DVector<f64>> {
        let a = self.index_set.binary_search(&i).ok()?;
        Some(self.states[m].rows(a * self.dim, self.dim).into_owned())
    }

    pub fn time(&self, m: usize) -> f64 {
        self.horizon * m as f64 / self.steps as f64
    }
}

struct Shooter<'a> {
    spec: &'a DetGameSpec,
    set: Vec<usize>,
    boundary: &'a BTreeMap<usize, DVector<f64>>,
    steps: usize,
}

impl Shooter<'_> {
    fn n(&self) -> usize {
        self.set.len() * self.spec.dim
    }

    fn field(&self, x: &DVector<f64>, p: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let d = self.spec.dim;
        let mut dx = DVector::zeros(self.n());
        let mut dp = DVector::zeros(self.n());
        for (a, &i) in self.set.iter().enumerate() {
            let xi = x.rows(a * d, d);
            let mut grad = DVector::zeros(d);
            for &j in self.spec.graph.neighbors(i) {
                let xj = match self.set.binary_search(&j) {
                    Ok(b) => x.rows(b * d, d).into_owned(),
                    Err(_) => self.boundary[&j].clone(),
                };
                grad += self.spec.coupling.gradient(&(xi - xj * self.spec.mu));
            }
            dx.rows_mut(a * d, d).copy_from(&(p.rows(a * d, d) / -self.spec.kappa[i]));
            dp.rows_mut(a * d, d).copy_from(&(-grad));
        }
        (dx, dp)
    }

    /// RK4 over `[0, T]` forward (`dir = 1`) or backward (`dir = −1`) from
    /// the given end state; returns the full path.
    fn integrate(&self, x0: DVector<f64>, p0: DVector<f64>, dir: f64) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let h = dir * self.spec.horizon / self.steps as f64;
        let (mut x, mut p) = (x0, p0);
        let mut xs = Vec::with_capacity(self.steps + 1);
        let mut ps = Vec::with_capacity(self.steps + 1);
        xs.push(x.clone());
        ps.push(p.clone());
        for _ in 0..self.steps {
            let (a1, b1) = self.field(&x, &p);
            let (a2, b2) = self.field(&(&x + &a1 * (0.5 * h)), &(&p + &b1 * (0.5 * h)));
            let (a3, b3) = self.field(&(&x + &a2 * (0.5 * h)), &(&p + &b2 * (0.5 * h)));
            let (a4, b4) = self.field(&(&x + &a3 * h), &(&p + &b3 * h));
            x += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
            p += (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (h / 6.0);
            xs.push(x.clone());
            ps.push(p.clone());
        }
        (xs, ps)
    }

    fn x0(&self) -> DVector<f64> {
        let d = self.spec.dim;
        let mut x = DVector::zeros(self.n());
        for (a, &i) in self.set.iter().enumerate() {
            x.rows_mut(a * d, d).copy_from(&self.spec.init[i]);
        }
        x
    }

    fn terminal_residual(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let d = self.spec.dim;
        let mut r = p.clone();
        for (a, &i) in self.set.iter().enumerate() {
            let gx = &self.spec.terminal[i] * x.rows(a * d, d);
            let mut block = r.rows_mut(a * d, d);
            block -= gx;
        }
        r
    }

    fn residual(&self, p0: &DVector<f64>) -> DVector<f64> {
        let (xs, ps) = self.integrate(self.x0(), p0.clone(), 1.0);
        self.terminal_residual(&xs[self.steps], &ps[self.steps])
    }

    fn jacobian(&self, p0: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        let cols: Vec<DVector<f64>> = (0..n)
            .into_par_iter()
            .map(|c| {
                let h = 1e-6 * (1.0 + p0[c].abs());
                let (mut up, mut down) = (p0.clone(), p0.clone());
                up[c] += h;
                down[c] -= h;
                (self.residual(&up) - self.residual(&down)) / (2.0 * h)
            })
            .collect();
        DMatrix::from_columns(&cols)
    }
}

const FALLBACK_SWEEPS: usize = 200;
const FALLBACK_DAMPING: f64 = 0.5;

/// Newton shooting on `p(0)` with a central-difference Jacobian and
/// backtracking; a stalled step falls back to damped fixed-point sweeps
/// `p ← p − ω R(p)`.
pub fn shoot(
    spec: &DetGameSpec,
    index_set: &[usize],
    boundary: &BTreeMap<usize, DVector<f64>>,
    opts: &ShootingOptions,
) -> Result<TpbvpSolution> {
    if opts.steps < 2 || opts.tol.is_nan() || opts.tol <= 0.0 || opts.max_newton == 0 {
        return invalid("shooting needs steps ≥ 2, tol > 0 and max_newton ≥ 1");
    }
    let set = normalize_index_set_det(spec, index_set)?;
    if set.len() * spec.dim > MAX_SHOOTING_DIM {
        return invalid(format!("shooting dimension exceeds {MAX_SHOOTING_DIM}"));
    }
    for &i in &set {
        for j in spec.graph.neighbors(i) {
            if set.binary_search(j).is_err() && !boundary.contains_key(j) {
                return invalid(format!("missing boundary path for player {j}"));
            }
        }
    }
    let sh = Shooter {
        spec,
        set,
        boundary,
        steps: opts.steps,
    };
    let mut p = DVector::zeros(sh.n());
    let mut r = sh.residual(&p);
    let mut history = vec![r.amax()];
    let mut newton = 0;
    let mut fallback = 0;
    while r.amax() > opts.tol {
        if newton == opts.max_newton {
            return Err(GameError::NonConvergence {
                iterations: newton,
                residual: r.amax(),
                history,
            });
        }
        newton += 1;
        let step = sh.jacobian(&p).lu().solve(&(-&r));
        let mut accepted = false;
        if let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
            let mut t = 1.0;
            for _ in 0..30 {
                let trial = &p + &step * t;
                let rt = sh.residual(&trial);
                if rt.amax() < (1.0 - 1e-4 * t) * r.amax() {
                    p = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
        }
        if !accepted {
            for _ in 0..FALLBACK_SWEEPS {
                let trial = &p - &r * FALLBACK_DAMPING;
                let rt = sh.residual(&trial);
                fallback += 1;
                // Also stops on a NaN residual.
                if rt.amax().is_nan() || rt.amax() >= r.amax() {
                    break;
                }
                p = trial;
                r = rt;
            }
        }
        history.push(r.amax());
        if !r.amax().is_finite() {
            return Err(GameError::NonConvergence {
                iterations: newton,
                residual: r.amax(),
                history,
            });
        }
    }
    let (states, costates) = sh.integrate(sh.x0(), p, 1.0);
    Ok(TpbvpSolution {
        index_set: sh.set,
        dim: spec.dim,
        horizon: spec.horizon,
        steps: opts.steps,
        states,
        costates,
        residual: r.amax(),
        newton_iterations: newton,
        fallback_iterations: fallback,
    })
}

fn normalize_index_set_det(spec: &DetGameSpec, index_set: &[usize]) -> Result<Vec<usize>> {
    if index_set.is_empty() {
        return invalid("index set must be non-empty");
    }
    let mut set = index_set.to_vec();
    set.sort_unstable();
    set.dedup();
    if set.iter().any(|&i| i >= spec.num_players()) {
        return invalid("index out of range");
    }
    Ok(set)
}

/// Integrates the converged system backward from `(X(T), p(T))` and returns
/// the largest deviation from `(x_0, p(0))`.
pub fn time_reversal_error(
    spec: &DetGameSpec,
    sol: &TpbvpSolution,
    boundary: &BTreeMap<usize, DVector<f64>>,
) -> f64 {
    let sh = Shooter {
        spec,
        set: sol.index_set.clone(),
        boundary,
        steps: sol.steps,
    };
    let (xs, ps) = sh.integrate(sol.states[sol.steps].clone(), sol.costates[sol.steps].clone(), -1.0);
    let end = sol.steps;
    (&xs[end] - &sol.states[0]).amax().max((&ps[end] - &sol.costates[0]).amax())
}

/// Largest relative deviation between `D_i f^i` and central differences of
/// `f^i` over all players and coordinates at the given joint states.
pub fn gradient_selfcheck(spec: &DetGameSpec, points: &[Vec<DVector<f64>>]) -> Result<f64> {
    let n = spec.num_players();
    let mut worst = 0.0f64;
    for x in points {
        if x.len() != n || x.iter().any(|v| v.len() != spec.dim) {
            return invalid("each point needs one d-vector per player");
        }
        for i in 0..n {
            let analytic = spec.own_gradient(i, x);
            for c in 0..spec.dim {
                let h = 1e-5 * (1.0 + x[i][c].abs());
                let mut up = x.clone();
                let mut down = x.clone();
                up[i][c] += h;
                down[i][c] -= h;
                let fd = (spec.running_cost(i, &up) - spec.running_cost(i, &down)) / (2.0 * h);
                let scale = analytic[c].abs().max(fd.abs()).max(1.0);
                worst = worst.max((analytic[c] - fd).abs() / scale);
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub violations: usize,
    /// Smallest `lhs − rhs` over the samples.
    pub worst_margin: f64,
}

/// Samples `(D_if^i(x) − D_if^i(y))·(x^i − y^i) ≥ K_f^i|x^i − y^i|² −
/// ℓ_f^i Σ_{j∼i}|x^j − y^j|²` on random pairs in `[−5, 5]^{Nd}`.
pub fn monotonicity_check(spec: &DetGameSpec, samples: usize, seed: u64) -> MonotonicityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = spec.cost_bounds();
    let n = spec.num_players();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<DVector<f64>> {
        (0..n)
            .map(|_| DVector::from_fn(spec.dim, |_, _| rng.random_range(-5.0..5.0)))
            .collect()
    };
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let i = rng.random_range(0..n);
        let di = &x[i] - &y[i];
        let lhs = (spec.own_gradient(i, &x) - spec.own_gradient(i, &y)).dot(&di);
        let spread: f64 = spec.graph.neighbors(i).iter().map(|&j| (&x[j] - &y[j]).norm_squared()).sum();
        let rhs = bounds.k_f[i] * di.norm_squared() - bounds.l_f[i] * spread * (1.0 + 1e-8);
        let margin = lhs - rhs;
        if margin < -1e-12 * (lhs.abs() + rhs.abs()).max(1.0) {
            violations += 1;
        }
        worst = worst.min(margin);
    }
    MonotonicityReport {
        samples,
        violations,
        worst_margin: worst,
    }
}

/// Full-versus-reduced comparison with squared point distances in the
/// `w2` columns and Newton counts in `iterations`.
pub fn det_reduction_experiment(
    spec: &DetGameSpec,
    root: usize,
    r_list: &[usize],
    policy: BoundaryPolicy,
    opts: &ShootingOptions,
) -> Result<(W2Curve, Vec<f64>)> {
    check_radii(r_list)?;
    let table = nkh_table(&spec.graph, root)?;
    let empty = BTreeMap::new();
    let full = shoot(spec, &(0..spec.num_players()).collect::<Vec<_>>(), &empty, opts)?;
    let bounds = spec.cost_bounds();
    let steps = opts.steps;
    let results = r_list
        .par_iter()
        .map(|&r| {
            let set = table.ball(r.min(table.h_star));
            let boundary = det_boundary(spec, &set, policy);
            let reduced = shoot(spec, &set, &boundary, opts)?;
            let gaps: Vec<f64> = (0..=steps)
                .map(|m| {
                    (full.state(root, m).expect("full") - reduced.state(root, m).expect("ball")).norm_squared()
                })
                .collect();
            let sup_pair = |j: usize| {
                let z = boundary.get(&j).map_or(0.0, |z| z.norm_squared());
                (0..=steps)
                    .map(|m| full.state(j, m).map_or(0.0, |x| x.norm_squared()) + z)
                    .fold(0.0, f64::max)
            };
            let b = reduction_bound(&bounds, &spec.graph, &table, r, &set, sup_pair)?;
            Ok((
                CurveRow {
                    r,
                    avg_w2_sq: trapezoid_average(&gaps),
                    sup_w2_sq: gaps.iter().copied().fold(0.0, f64::max),
                    gamma_r: b.gamma_r,
                    rhs: b.rhs,
                    theta: b.theta,
                    theta_star: b.theta_star,
                    iterations: Some(reduced.newton_iterations),
                },
                reduced.residual,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, residuals) = results.into_iter().unzip();
    Ok((
        W2Curve {
            root,
            steps,
            refinement_change: f64::NAN,
            rows,
        },
        residuals,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_cosh_is_stable() {
        assert_relative_eq!(log_cosh(0.3), 0.3f64.cosh().ln(), epsilon = 1e-15);
        assert_relative_eq!(log_cosh(800.0), 800.0 - std::f64::consts::LN_2, epsilon = 1e-12);
        assert_eq!(log_cosh(0.0), 0.0);
    }

    #[test]
    fn isolated_player_stays_put() {
        let g = Graph::new(vec![vec![]]).unwrap();
        let spec = DetGameSpec {
            graph: g,
            dim: 1,
            horizon: 1.0,
            kappa: vec![1.0],
            coupling: ConvexCoupling::Quadratic { lambda: 1.0 },
            mu: 0.3,
            terminal: vec![DMatrix::zeros(1, 1)],
            init: vec![DVector::from_element(1, 0.7)],
        };
        let sol = shoot(&spec, &[0], &BTreeMap::new(), &ShootingOptions::default()).unwrap();
        assert_eq!(sol.newton_iterations, 0);
        assert!(sol.states.iter().all(|x| x[0] == 0.7));
        assert!(sol.costates.iter().all(|p| p[0] == 0.0));
    }

    #[test]
    fn zero_gradient_at_origin() {
        let spec = DetGameSpec::chain_benchmark(5, 0.3, ConvexCoupling::Smoothed { lambda: 1.0, epsilon: 0.1 }).unwrap();
        let zero = vec![DVector::zeros(1); 5];
        assert_eq!(spec.own_gradient(2, &zero)[0], 0.0);
    }

    #[test]
    fn json_roundtrip() {
        let spec = DetGameSpec::chain_benchmark(4, 0.3, ConvexCoupling::Smoothed { lambda: 1.0, epsilon: 0.1 }).unwrap();
        assert_eq!(DetGameSpec::from_json(&spec.to_json()).unwrap(), spec);
    }
}
