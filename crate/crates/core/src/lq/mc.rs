//! Monte Carlo cross-check of the Gaussian gap: full and reduced systems are
//! driven by the same initial samples and Brownian increments, and the
//! player-of-interest marginals are compared through sorted samples.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::trapezoid_average;

use super::riccati::{normalize_index_set, riccati_solve, BoundaryData, RiccatiSolution};
use super::spec::LqGameSpec;

/// Paths per independently seeded chunk.
pub const CHUNK: usize = 1000;
const MAX_EVALUATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// `⨏ W₂²` from the pooled samples.
    pub estimate: f64,
    /// Batch-means standard error across chunks.
    pub std_error: f64,
    /// Mean of the per-chunk estimates; exceeds `estimate` by the extra
    /// small-sample bias of the sorted estimator.
    pub chunk_mean: f64,
    /// Diagnostic: `⨏ W₂²` between Gaussians fitted to the pooled samples.
    pub moment_estimate: f64,
    pub paths: usize,
    pub chunks: usize,
    pub steps: usize,
}

fn sorted_w2_sq(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

fn moment_w2_sq(a: &[f64], b: &[f64]) -> f64 {
    let moments = |v: &[f64]| {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let ((ma, sa), (mb, sb)) = (moments(a), moments(b));
    (ma - mb).powi(2) + (sa - sb).powi(2)
}

struct System<'a> {
    sol: &'a RiccatiSolution,
    kinv: DVector<f64>,
    sigma: DVector<f64>,
    /// Rows of the full noise matrix feeding this system.
    rows: Vec<usize>,
}

impl System<'_> {
    fn step(&self, m: usize, x: &mut DMatrix<f64>, noise: &DMatrix<f64>, h: f64) {
        let p = self.sol.p(m);
        let q = self.sol.q(m);
        let mut drift = p * &*x;
        for (a, &w) in self.kinv.iter().enumerate() {
            let mut row = drift.row_mut(a);
            row.add_scalar_mut(q[a]);
            row.scale_mut(-w * h);
        }
        *x += drift;
        let sq = h.sqrt();
        for (a, &src) in self.rows.iter().enumerate() {
            let s = self.sigma[a] * sq;
            if s != 0.0 {
                let mut row = x.row_mut(a);
                row += noise.row(src) * s;
            }
        }
    }
}

/// Smallest stride dividing `steps` with at most [`MAX_EVALUATIONS`] intervals.
fn eval_stride(steps: usize) -> usize {
    (1..=steps)
        .find(|&s| steps.is_multiple_of(s) && steps / s <= MAX_EVALUATIONS)
        .unwrap_or(steps)
}

/// Euler–Maruyama estimate of `⨏₀ᵀ W₂²(m^root_t, m̂^root_t)` between the full
/// game and the reduced game on `index_set`.
///
/// Paths are split into chunks of [`CHUNK`]; chunk `c` draws from `ChaCha8Rng`
/// seeded with `seed` on stream `c`, so results do not depend on the number
/// of worker threads. The estimate sorts the pooled samples of every chunk;
/// the standard error is taken from the spread of the per-chunk estimates.
pub fn mc_coupling_oracle(
    spec: &LqGameSpec,
    root: usize,
    index_set: &[usize],
    boundary: Option<&BoundaryData>,
    paths: usize,
    seed: u64,
    steps: usize,
) -> Result<McEstimate> {
    if spec.dim != 1 {
        return invalid("the Monte Carlo oracle supports d = 1 only");
    }
    if paths < CHUNK {
        return invalid(format!("need at least {CHUNK} paths, got {paths}"));
    }
    let set = normalize_index_set(spec, index_set)?;
    let Ok(root_local) = set.binary_search(&root) else {
        return invalid("root must belong to the reduced index set");
    };
    let all = spec.all_players();
    let full_sol = riccati_solve(spec, &all, None, steps)?;
    let red_sol = riccati_solve(spec, &set, boundary, steps)?;
    let system = |sol, players: &[usize]| System {
        sol,
        kinv: DVector::from_iterator(players.len(), players.iter().map(|&i| 1.0 / spec.kappa[i])),
        sigma: DVector::from_iterator(players.len(), players.iter().map(|&i| spec.sigma[i][(0, 0)])),
        rows: players.to_vec(),
    };
    let full = system(&full_sol, &all);
    let reduced = system(&red_sol, &set);
    let n = all.len();
    let h = spec.horizon / steps as f64;
    let stride = eval_stride(steps);

    let num_chunks = paths.div_ceil(CHUNK);
    let mut chunks: Vec<Chunk> = (0..num_chunks)
        .map(|c| {
            let size = CHUNK.min(paths - c * CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut x = DMatrix::zeros(n, size);
            for i in 0..n {
                let (m0, s0) = (spec.init[i].mean[0], spec.init[i].cov[(0, 0)].max(0.0).sqrt());
                for p in 0..size {
                    let z: f64 = rng.sample(StandardNormal);
                    x[(i, p)] = m0 + s0 * z;
                }
            }
            let xr = x.select_rows(&set);
            Chunk {
                noise: DMatrix::zeros(n, size),
                x,
                xr,
                rng,
            }
        })
        .collect();

    let mut pooled = Vec::with_capacity(steps / stride + 1);
    let mut fitted = Vec::with_capacity(steps / stride + 1);
    let mut per_chunk = vec![Vec::with_capacity(steps / stride + 1); num_chunks];
    let mut record = |chunks: &[Chunk]| {
        let (mut a, mut b) = (Vec::with_capacity(paths), Vec::with_capacity(paths));
        for (c, ch) in chunks.iter().enumerate() {
            let mut ca: Vec<f64> = ch.x.row(root).iter().copied().collect();
            let mut cb: Vec<f64> = ch.xr.row(root_local).iter().copied().collect();
            a.extend_from_slice(&ca);
            b.extend_from_slice(&cb);
            per_chunk[c].push(sorted_w2_sq(&mut ca, &mut cb));
        }
        fitted.push(moment_w2_sq(&a, &b));
        pooled.push(sorted_w2_sq(&mut a, &mut b));
    };
    record(&chunks);
    for m in 0..steps {
        chunks.par_iter_mut().for_each(|ch| {
            let rng = &mut ch.rng;
            ch.noise.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            full.step(m, &mut ch.x, &ch.noise, h);
            reduced.step(m, &mut ch.xr, &ch.noise, h);
        });
        if (m + 1) % stride == 0 {
            record(&chunks);
        }
    }
    let estimates: Vec<f64> = per_chunk.iter().map(|g| trapezoid_average(g)).collect();
    let k = estimates.len() as f64;
    let chunk_mean = estimates.iter().sum::<f64>() / k;
    let std_error = if estimates.len() > 1 {
        let var = estimates.iter().map(|v| (v - chunk_mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        f64::NAN
    };
    Ok(McEstimate {
        estimate: trapezoid_average(&pooled),
        std_error,
        chunk_mean,
        moment_estimate: trapezoid_average(&fitted),
        paths,
        chunks: num_chunks,
        steps,
    })
}

struct Chunk {
    x: DMatrix<f64>,
    xr: DMatrix<f64>,
    noise: DMatrix<f64>,
    rng: ChaCha8Rng,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_divides() {
        assert_eq!(eval_stride(2000), 10);
        assert_eq!(eval_stride(150), 1);
        assert_eq!(eval_stride(401), 401);
    }

    #[test]
    fn rejects_vector_states_and_few_paths() {
        let spec = LqGameSpec::chain_benchmark(5, 0.3).unwrap();
        assert!(mc_coupling_oracle(&spec, 0, &[0, 1, 4], None, 10, 1, 10).is_err());
    }
}
