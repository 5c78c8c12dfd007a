//! JSON experiment configuration. Every object rejects unknown keys and all
//! numeric ranges are checked before anything is dispatched.

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use sparse_game_core::distributed::{MeanGuess, PicardOptions};
use sparse_game_core::graph::{build_chain, build_lattice, build_tree, GraphDoc};
use sparse_game_core::lq::{BoundaryPolicy, GaussianLaw, LqGameSpec, DEFAULT_STEPS};
use sparse_game_core::pontryagin::{ConvexCoupling, DetGameSpec, ShootingOptions};
use sparse_game_core::{Graph, Orientation};

use crate::CliError;

pub const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Constants,
    ReduceOl,
    ReduceDist,
    ReduceDet,
    DecayV,
    Perturb,
    Validate,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Constants => "constants",
            Kind::ReduceOl => "reduce-ol",
            Kind::ReduceDist => "reduce-dist",
            Kind::ReduceDet => "reduce-det",
            Kind::DecayV => "decay-v",
            Kind::Perturb => "perturb",
            Kind::Validate => "validate",
        }
    }

    /// Default output file stem.
    pub fn stem(self) -> String {
        self.name().replace('-', "_")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must agree with the subcommand when present.
    #[serde(default)]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub graph: Option<GraphConfig>,
    #[serde(default)]
    pub game: Option<GameConfig>,
    #[serde(default)]
    pub root: usize,
    #[serde(default)]
    pub radii: Vec<usize>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub perturb: Option<PerturbConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphConfig {
    Chain { n: usize, cyclic: bool },
    Tree { branching: usize, depth: usize },
    Lattice { radius: u32, orientation: Orientation },
    Inline { n: usize, in_neighbors: Vec<Vec<usize>> },
}

impl GraphConfig {
    pub fn build(&self) -> Result<Graph, CliError> {
        let g = match self {
            GraphConfig::Chain { n, cyclic } => build_chain(*n, *cyclic),
            GraphConfig::Tree { branching, depth } => build_tree(*branching, *depth),
            GraphConfig::Lattice { radius, orientation } => build_lattice(*radius, *orientation),
            GraphConfig::Inline { n, in_neighbors } => Graph::try_from(GraphDoc {
                n: *n,
                in_neighbors: in_neighbors.clone(),
                labels: None,
            }),
        };
        g.map_err(|e| CliError::Config(format!("graph: {e}")))
    }
}

/// A per-player field: one value for everybody, an explicit list, or a list
/// repeated cyclically (`player i` takes entry `i mod len`).
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PerPlayer<T> {
    Uniform(T),
    Each(Vec<T>),
    Cycle(Vec<T>),
}

impl<T: Clone> PerPlayer<T> {
    fn expand(&self, n: usize, what: &str) -> Result<Vec<T>, CliError> {
        match self {
            PerPlayer::Uniform(v) => Ok(vec![v.clone(); n]),
            PerPlayer::Each(v) if v.len() == n => Ok(v.clone()),
            PerPlayer::Each(v) => Err(CliError::Config(format!(
                "{what}: expected {n} entries, got {}",
                v.len()
            ))),
            PerPlayer::Cycle(v) if v.is_empty() => Err(CliError::Config(format!("{what}: empty cycle"))),
            PerPlayer::Cycle(v) => Ok((0..n).map(|i| v[i % v.len()].clone()).collect()),
        }
    }
}

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub mean: Vec<f64>,
    pub cov: Rows,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameConfig {
    Lq {
        #[serde(default = "one")]
        dim: usize,
        horizon: f64,
        kappa: PerPlayer<f64>,
        coupling: Rows,
        mu: f64,
        terminal: PerPlayer<Rows>,
        sigma: PerPlayer<Rows>,
        init: PerPlayer<GaussianConfig>,
    },
    Deterministic {
        #[serde(default = "one")]
        dim: usize,
        horizon: f64,
        kappa: PerPlayer<f64>,
        coupling: ConvexCoupling,
        mu: f64,
        terminal: PerPlayer<Rows>,
        init: PerPlayer<Vec<f64>>,
    },
}

fn one() -> usize {
    1
}

fn matrix(rows: &Rows, d: usize, what: &str) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(CliError::Config(format!("{what}: expected a {d}x{d} matrix")));
    }
    Ok(DMatrix::from_fn(d, d, |a, b| rows[a][b]))
}

fn vector(v: &[f64], d: usize, what: &str) -> Result<DVector<f64>, CliError> {
    if v.len() != d {
        return Err(CliError::Config(format!("{what}: expected {d} entries")));
    }
    Ok(DVector::from_column_slice(v))
}

fn gaussian(g: &GaussianConfig, d: usize) -> Result<GaussianLaw, CliError> {
    Ok(GaussianLaw::new(
        vector(&g.mean, d, "initial mean")?,
        matrix(&g.cov, d, "initial covariance")?,
    ))
}

/// A fully assembled game.
pub enum Game {
    Lq(LqGameSpec),
    Det(DetGameSpec),
}

impl GameConfig {
    pub fn build(&self, graph: Graph) -> Result<Game, CliError> {
        let n = graph.len();
        let spec_err = |e: sparse_game_core::GameError| CliError::Config(format!("game: {e}"));
        match self {
            GameConfig::Lq {
                dim,
                horizon,
                kappa,
                coupling,
                mu,
                terminal,
                sigma,
                init,
            } => {
                let d = *dim;
                let mats = |p: &PerPlayer<Rows>, what: &str| -> Result<Vec<DMatrix<f64>>, CliError> {
                    p.expand(n, what)?.iter().map(|m| matrix(m, d, what)).collect()
                };
                let spec = LqGameSpec {
                    graph,
                    dim: d,
                    horizon: *horizon,
                    kappa: kappa.expand(n, "kappa")?,
                    coupling: matrix(coupling, d, "coupling")?,
                    mu: *mu,
                    terminal: mats(terminal, "terminal")?,
                    sigma: mats(sigma, "sigma")?,
                    init: init
                        .expand(n, "init")?
                        .iter()
                        .map(|g| gaussian(g, d))
                        .collect::<Result<_, _>>()?,
                };
                spec.validate().map_err(spec_err)?;
                Ok(Game::Lq(spec))
            }
            GameConfig::Deterministic {
                dim,
                horizon,
                kappa,
                coupling,
                mu,
                terminal,
                init,
            } => {
                let d = *dim;
                let spec = DetGameSpec {
                    graph,
                    dim: d,
                    horizon: *horizon,
                    kappa: kappa.expand(n, "kappa")?,
                    coupling: *coupling,
                    mu: *mu,
                    terminal: terminal
                        .expand(n, "terminal")?
                        .iter()
                        .map(|m| matrix(m, d, "terminal"))
                        .collect::<Result<_, _>>()?,
                    init: init
                        .expand(n, "init")?
                        .iter()
                        .map(|v| vector(v, d, "init"))
                        .collect::<Result<_, _>>()?,
                };
                spec.validate().map_err(spec_err)?;
                Ok(Game::Det(spec))
            }
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Time steps; defaults to 2000 for LQ games and 1000 for shooting.
    pub steps: Option<usize>,
    pub tol: Option<f64>,
    pub damping: Option<f64>,
    pub max_iter: Option<usize>,
    pub max_newton: Option<usize>,
    pub guess: Option<MeanGuess>,
    pub boundary: Option<BoundaryPolicy>,
    pub seed: Option<u64>,
    pub mc_paths: Option<usize>,
}

impl SolverConfig {
    pub fn check(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(s) = self.steps {
            if s == 0 || s > MAX_STEPS {
                return bad(format!("solver.steps must lie in 1..={MAX_STEPS}, got {s}"));
            }
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("solver.tol must be positive, got {t}"));
            }
        }
        if let Some(d) = self.damping {
            if !(d > 0.0 && d <= 1.0) {
                return bad(format!("solver.damping must lie in (0, 1], got {d}"));
            }
        }
        if self.max_iter == Some(0) || self.max_newton == Some(0) {
            return bad("iteration caps must be positive".into());
        }
        if let Some(p) = self.mc_paths {
            if p < sparse_game_core::lq::mc::CHUNK {
                return bad(format!(
                    "solver.mc_paths must be at least {}, got {p}",
                    sparse_game_core::lq::mc::CHUNK
                ));
            }
        }
        Ok(())
    }

    pub fn lq_steps(&self) -> usize {
        self.steps.unwrap_or(DEFAULT_STEPS)
    }

    pub fn picard(&self) -> PicardOptions {
        let d = PicardOptions::default();
        PicardOptions {
            damping: self.damping.unwrap_or(d.damping),
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            guess: self.guess.unwrap_or(d.guess),
        }
    }

    pub fn shooting(&self) -> ShootingOptions {
        let d = ShootingOptions::default();
        ShootingOptions {
            steps: self.steps.unwrap_or(d.steps),
            tol: self.tol.unwrap_or(d.tol),
            max_newton: self.max_newton.unwrap_or(d.max_newton),
        }
    }

    pub fn boundary(&self) -> BoundaryPolicy {
        self.boundary.unwrap_or_default()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub player: usize,
    pub init: GaussianConfig,
}

impl PerturbConfig {
    pub fn law(&self, d: usize) -> Result<GaussianLaw, CliError> {
        gaussian(&self.init, d)
    }
}

/// File names, resolved against `--out`. Plain names only.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<String>,
    pub json: Option<String>,
}

impl OutputConfig {
    pub fn names(&self, kind: Kind) -> Result<(String, String), CliError> {
        let stem = kind.stem();
        let csv = self.csv.clone().unwrap_or_else(|| format!("{stem}.csv"));
        let json = self.json.clone().unwrap_or_else(|| format!("{stem}.json"));
        for name in [&csv, &json] {
            let plain = std::path::Path::new(name)
                .file_name()
                .is_some_and(|f| f == name.as_str());
            if !plain {
                return Err(CliError::Config(format!("output name {name:?} must be a plain file name")));
            }
        }
        if csv == json {
            return Err(CliError::Config("csv and json outputs must differ".into()));
        }
        Ok((csv, json))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.solver.check()?;
        Ok(cfg)
    }

    pub fn game(&self) -> Result<Game, CliError> {
        let graph = self
            .graph
            .as_ref()
            .ok_or_else(|| CliError::Config("config needs a `graph` section".into()))?
            .build()?;
        let game = self
            .game
            .as_ref()
            .ok_or_else(|| CliError::Config("config needs a `game` section".into()))?
            .build(graph)?;
        let n = match &game {
            Game::Lq(s) => s.num_players(),
            Game::Det(s) => s.num_players(),
        };
        if self.root >= n {
            return Err(CliError::Config(format!("root {} out of range for {n} players", self.root)));
        }
        Ok(game)
    }

    /// Radii, sorted and checked.
    pub fn radii(&self) -> Result<Vec<usize>, CliError> {
        if self.radii.is_empty() {
            return Err(CliError::Config("`radii` must list at least one radius".into()));
        }
        if self.radii.contains(&0) {
            return Err(CliError::Config("radii must be positive".into()));
        }
        let mut r = self.radii.clone();
        r.sort_unstable();
        r.dedup();
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHAIN: &str = r#"{
        "graph": {"generator": "chain", "n": 7, "cyclic": true},
        "game": {"kind": "lq", "horizon": 1, "kappa": {"uniform": 1}, "coupling": [[1]],
                 "mu": 0.3, "terminal": {"uniform": [[0]]}, "sigma": {"uniform": [[1]]},
                 "init": {"cycle": [{"mean": [-1], "cov": [[1]]}, {"mean": [0], "cov": [[1]]},
                                    {"mean": [1], "cov": [[1]]}]}},
        "radii": [1, 2]
    }"#;

    #[test]
    fn chain_config_matches_benchmark() {
        let cfg = ExperimentConfig::parse(CHAIN).unwrap();
        let Game::Lq(spec) = cfg.game().unwrap() else { panic!("expected LQ") };
        assert_eq!(spec, LqGameSpec::chain_benchmark(7, 0.3).unwrap());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = CHAIN.replacen("\"radii\"", "\"radius\"", 1);
        assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))));
        let text = CHAIN.replacen("\"cyclic\": true", "\"cyclic\": true, \"x\": 1", 1);
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn ranges_checked() {
        let text = CHAIN.replacen("\"radii\"", "\"solver\": {\"damping\": 1.5}, \"radii\"", 1);
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = CHAIN.replacen("\"radii\"", "\"solver\": {\"steps\": 0}, \"radii\"", 1);
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn per_player_lengths_checked() {
        let text = CHAIN.replacen("{\"uniform\": 1}", "{\"each\": [1, 1]}", 1);
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert!(cfg.game().is_err());
    }

    #[test]
    fn output_names_must_be_plain() {
        let o = OutputConfig {
            csv: Some("../x.csv".into()),
            json: None,
        };
        assert!(o.names(Kind::ReduceOl).is_err());
        let (c, j) = OutputConfig::default().names(Kind::ReduceOl).unwrap();
        assert_eq!((c.as_str(), j.as_str()), ("reduce_ol.csv", "reduce_ol.json"));
    }
}
