//! Dispatch from subcommand to solver and report assembly.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sparse_game_core::acceptance::{run_all, run_criterion, AcceptanceOptions};
use sparse_game_core::decay::decay_report;
use sparse_game_core::distributed::distributed_reduction_experiment;
use sparse_game_core::graph::nkh_table;
use sparse_game_core::lq::{
    dv_decay_report, full_solution, perturbation_experiment, reduction_experiment, DvDecayReport, LqGameSpec,
    W2Curve,
};
use sparse_game_core::pontryagin::det_reduction_experiment;
use sparse_game_core::{CostBounds, DecayReport, GameError, Graph};

use crate::config::{ExperimentConfig, Game, Kind};
use crate::output::{fmt_f64, to_json, write_all_atomic, Table};
use crate::{Cli, CliError};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None if cli.command == Kind::Validate => ExperimentConfig::parse("{}")?,
        None => return Err(CliError::Config(format!("`{}` needs --config", cli.command.name()))),
    };
    if let Some(kind) = cfg.kind {
        if kind != cli.command {
            return Err(CliError::Config(format!(
                "config is for `{}` but `{}` was requested",
                kind.name(),
                cli.command.name()
            )));
        }
    }
    if cli.steps.is_some() {
        cfg.solver.steps = cli.steps;
    }
    if cli.seed.is_some() {
        cfg.solver.seed = cli.seed;
    }
    cfg.solver.check()?;
    if (cli.inject_theta.is_some() || !cli.criteria.is_empty()) && cli.command != Kind::Validate {
        return Err(CliError::Config("--inject-theta and --criteria apply to `validate` only".into()));
    }

    if cli.command == Kind::Validate {
        return validate(cli, &cfg);
    }
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let (csv_name, json_name) = cfg.outputs.names(cli.command)?;
    let game = cfg.game()?;
    let report = match (cli.command, &game) {
        (Kind::Constants, _) => constants(&cfg, &game, cli.strict)?,
        (Kind::ReduceOl, Game::Lq(spec)) => reduce_ol(&cfg, spec, cli.strict)?,
        (Kind::ReduceDist, Game::Lq(spec)) => reduce_dist(&cfg, spec, cli.strict)?,
        (Kind::DecayV, Game::Lq(spec)) => decay_v(&cfg, spec)?,
        (Kind::Perturb, Game::Lq(spec)) => perturb(&cfg, spec, cli.strict)?,
        (Kind::ReduceDet, Game::Det(spec)) => {
            let radii = cfg.radii()?;
            preflight(&spec.cost_bounds(), &spec.graph, cfg.root, &radii, cli.strict)?;
            let (curve, residuals) =
                det_reduction_experiment(spec, cfg.root, &radii, cfg.solver.boundary(), &cfg.solver.shooting())?;
            curve_report(&curve, Some(&residuals))?
        }
        (Kind::ReduceDet, Game::Lq(_)) => {
            return Err(CliError::Config("`reduce-det` needs a deterministic game".into()))
        }
        (kind, Game::Det(_)) => {
            return Err(CliError::Config(format!("`{}` needs an LQ game", kind.name())));
        }
        (Kind::Validate, _) => unreachable!(),
    };
    let written = write_all_atomic(&out_dir, &[(csv_name, report.csv), (json_name, report.json)])?;
    print!("{}", report.summary);
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    eprintln!("{} finished in {:.2} s", cli.command.name(), start.elapsed().as_secs_f64());
    Ok(())
}

struct Report {
    csv: Vec<u8>,
    json: Vec<u8>,
    summary: String,
}

/// Checks the smallness condition for every radius: warns by default and
/// aborts in strict mode.
fn preflight(bounds: &CostBounds, graph: &Graph, root: usize, radii: &[usize], strict: bool) -> Result<Vec<DecayReport>, CliError> {
    let mut reports = Vec::with_capacity(radii.len());
    for &r in radii {
        let rep = decay_report(bounds, graph, root, r)?;
        if !rep.feasible {
            let msg = format!(
                "r = {r}: theta = {:.6e} exceeds theta* = {:.6e}; the decay estimate is not guaranteed",
                rep.theta, rep.theta_star
            );
            if strict {
                return Err(GameError::Infeasible(msg).into());
            }
            log::warn!("{msg}");
        }
        reports.push(rep);
    }
    Ok(reports)
}

fn constants(cfg: &ExperimentConfig, game: &Game, strict: bool) -> Result<Report, CliError> {
    let (bounds, graph) = match game {
        Game::Lq(s) => (s.cost_bounds(), &s.graph),
        Game::Det(s) => (s.cost_bounds(), &s.graph),
    };
    let radii = cfg.radii()?;
    let reports = preflight(&bounds, graph, cfg.root, &radii, strict)?;
    let last = reports.last().expect("radii are non-empty");
    let mut table = Table::new(vec!["h", "sup_count", "gamma_h", "gamma_prod"]);
    let mut prod = 1.0;
    for (h, (&g, &s)) in last.gamma_seq.iter().zip(&last.sup_counts).enumerate() {
        prod *= g;
        table.push(vec![h.to_string(), s.to_string(), fmt_f64(g), fmt_f64(prod)]);
    }
    let mut summary = format!(
        "root {}  r {}  h* {}  theta {}  theta* {}  feasible {}\n",
        last.root,
        last.r,
        last.h_star,
        fmt_f64(last.theta),
        fmt_f64(last.theta_star),
        last.feasible
    );
    summary += &table.to_text();
    #[derive(Serialize)]
    struct Doc<'a> {
        reports: &'a [DecayReport],
    }
    Ok(Report {
        csv: table.to_csv()?,
        json: to_json(&Doc { reports: &reports })?,
        summary,
    })
}

fn curve_report(curve: &W2Curve, residuals: Option<&[f64]>) -> Result<Report, CliError> {
    let with_iters = curve.rows.iter().any(|r| r.iterations.is_some());
    let mut header = vec!["r", "avg_w2_sq", "sup_w2_sq", "gamma_r", "rhs", "theta", "theta_star"];
    if with_iters {
        header.push("iterations");
    }
    if residuals.is_some() {
        header.push("residual");
    }
    let mut table = Table::new(header);
    for (k, row) in curve.rows.iter().enumerate() {
        let mut cells = vec![
            row.r.to_string(),
            fmt_f64(row.avg_w2_sq),
            fmt_f64(row.sup_w2_sq),
            fmt_f64(row.gamma_r),
            fmt_f64(row.rhs),
            fmt_f64(row.theta),
            fmt_f64(row.theta_star),
        ];
        if with_iters {
            cells.push(row.iterations.map(|i| i.to_string()).unwrap_or_default());
        }
        if let Some(res) = residuals {
            cells.push(res.get(k).map(|&x| fmt_f64(x)).unwrap_or_default());
        }
        table.push(cells);
    }
    #[derive(Serialize)]
    struct Doc<'a> {
        curve: &'a W2Curve,
        #[serde(skip_serializing_if = "Option::is_none")]
        residuals: Option<&'a [f64]>,
    }
    Ok(Report {
        csv: table.to_csv()?,
        json: to_json(&Doc { curve, residuals })?,
        summary: table.to_text(),
    })
}

fn reduce_ol(cfg: &ExperimentConfig, spec: &LqGameSpec, strict: bool) -> Result<Report, CliError> {
    let radii = cfg.radii()?;
    preflight(&spec.cost_bounds(), &spec.graph, cfg.root, &radii, strict)?;
    let curve = reduction_experiment(spec, cfg.root, &radii, cfg.solver.boundary(), cfg.solver.lq_steps())?;
    curve_report(&curve, None)
}

fn reduce_dist(cfg: &ExperimentConfig, spec: &LqGameSpec, strict: bool) -> Result<Report, CliError> {
    let radii = cfg.radii()?;
    preflight(&spec.cost_bounds(), &spec.graph, cfg.root, &radii, strict)?;
    let curve = distributed_reduction_experiment(
        spec,
        cfg.root,
        &radii,
        cfg.solver.boundary(),
        cfg.solver.lq_steps(),
        &cfg.solver.picard(),
    )?;
    curve_report(&curve, None)
}

fn decay_v(cfg: &ExperimentConfig, spec: &LqGameSpec) -> Result<Report, CliError> {
    let (sol, _, change) = full_solution(spec, cfg.solver.lq_steps())?;
    let report = dv_decay_report(&sol, &nkh_table(&spec.graph, cfg.root)?)?;
    let mut table = Table::new(vec!["k", "distance", "max_norm", "norm_at_zero"]);
    for row in &report.rows {
        table.push(vec![
            row.k.to_string(),
            row.distance.map(|d| d.to_string()).unwrap_or_default(),
            fmt_f64(row.max_norm),
            fmt_f64(row.norm_at_zero),
        ]);
    }
    let mut summary = String::from("distance  max_norm\n");
    for (d, v) in &report.by_distance {
        summary += &format!("{d:>8}  {}\n", fmt_f64(*v));
    }
    summary += &format!("slope of ln max_norm per unit distance: {}\n", fmt_f64(report.slope));
    #[derive(Serialize)]
    struct Doc<'a> {
        refinement_change: f64,
        report: &'a DvDecayReport,
    }
    Ok(Report {
        csv: table.to_csv()?,
        json: to_json(&Doc {
            refinement_change: change,
            report: &report,
        })?,
        summary,
    })
}

fn perturb(cfg: &ExperimentConfig, spec: &LqGameSpec, strict: bool) -> Result<Report, CliError> {
    let p = cfg
        .perturb
        .as_ref()
        .ok_or_else(|| CliError::Config("`perturb` needs a `perturb` section".into()))?;
    if p.player >= spec.num_players() {
        return Err(CliError::Config(format!("perturb.player {} out of range", p.player)));
    }
    let rep = perturbation_experiment(spec, cfg.root, p.player, p.law(spec.dim)?, cfg.solver.lq_steps())?;
    if !rep.bound.is_finite() {
        let msg = format!("player {} lies outside the range where the perturbation bound applies", p.player);
        if strict {
            return Err(GameError::Infeasible(msg).into());
        }
        log::warn!("{msg}");
    }
    let mut table = Table::new(vec![
        "k",
        "distance",
        "w2_sq_terminal",
        "w2_sq_integral",
        "lhs",
        "w2_sq_initial",
        "theta",
        "gamma_tilde",
        "dv_norm",
        "constant",
        "bound",
    ]);
    table.push(vec![
        rep.k.to_string(),
        rep.distance.map(|d| d.to_string()).unwrap_or_default(),
        fmt_f64(rep.w2_sq_terminal),
        fmt_f64(rep.w2_sq_integral),
        fmt_f64(rep.lhs),
        fmt_f64(rep.w2_sq_initial),
        fmt_f64(rep.theta),
        rep.gamma_tilde.map(fmt_f64).unwrap_or_default(),
        fmt_f64(rep.dv_norm),
        fmt_f64(rep.constant),
        fmt_f64(rep.bound),
    ]);
    Ok(Report {
        csv: table.to_csv()?,
        json: to_json(&rep)?,
        summary: table.to_text(),
    })
}

fn validate(cli: &Cli, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let defaults = AcceptanceOptions::default();
    let opts = AcceptanceOptions {
        steps: cfg.solver.steps.unwrap_or(defaults.steps),
        mc_paths: cfg.solver.mc_paths.unwrap_or(defaults.mc_paths),
        seed: cfg.solver.seed.unwrap_or(defaults.seed),
        inject_theta: cli.inject_theta,
    };
    let results = if cli.criteria.is_empty() {
        run_all(&opts)
    } else {
        cli.criteria
            .iter()
            .map(|&id| {
                run_criterion(id, &opts)
                    .ok_or_else(|| CliError::Config(format!("no acceptance criterion numbered {id}")))
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    let mut text = String::new();
    for r in &results {
        println!("{}", r.line());
        eprintln!(
            "criterion {:>2}: {:.2} s of {} s",
            r.id,
            r.elapsed.as_secs_f64(),
            r.budget.as_secs()
        );
        text += &r.line();
        text.push('\n');
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    text += &format!("{} passed, {failed} failed\n", results.len() - failed);
    println!("{} passed, {failed} failed", results.len() - failed);
    if let Some(dir) = &cli.out {
        write_all_atomic(Path::new(dir), &[("validate.txt".to_string(), text.into_bytes())])?;
    }
    if failed > 0 {
        return Err(CliError::Acceptance(failed));
    }
    Ok(())
}
