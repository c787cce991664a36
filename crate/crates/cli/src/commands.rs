//! One function per subcommand, each producing a [`Report`].

use std::path::PathBuf;

use num_rational::BigRational;
use num_traits::ToPrimitive;

use nfl_core::case2::Case2Options;
use nfl_core::chaos::{rationals_up_to, sweep_truncation, TruncationOutcome, TruncationReport};
use nfl_core::ifs::DEFAULT_NODE_BUDGET;
use nfl_core::noise::density::DEFAULT_RESOLUTION;
use nfl_core::noise::parse_unit_rational;
use nfl_core::scalar::exact_rational;
use nfl_core::{
    distribution_case1, distribution_case2, emit_intervals, exact_enumeration, run_tree, DistributionTable,
    Simulation, UnitRational,
};

use crate::config::{parse_variant, NoiseConfig, RunConfig};
use crate::format::{render_density, Cell, Meta, Report};
use crate::{Cli, CliError, Command, VERSION};

pub const DEFAULT_TRIALS: u64 = 10_000;
pub const DEFAULT_HORIZON: usize = 20;
pub const DEFAULT_DEPTH: usize = 8;
pub const DEFAULT_CASE1_STAGES: usize = 10;
pub const DEFAULT_CASE2_STAGES: usize = 6;
pub const DEFAULT_CHAOS_STAGES: usize = 10_000;

#[derive(Debug)]
pub struct Output {
    pub report: Report,
    pub meta: Meta,
    pub out: Option<PathBuf>,
}

/// Applies the command-line overrides to `cfg`, then runs the command.
pub fn run(cli: &Cli, mut cfg: RunConfig) -> Result<Output, CliError> {
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    cfg.seed = Some(seed);
    if cli.out.is_some() {
        cfg.out.clone_from(&cli.out);
    }
    let mut dumps = None;
    match &cli.command {
        Command::Dim { .. } | Command::Tree { .. } | Command::EmitIntervals { .. } => {}
        Command::Simulate { trials, horizon, policy } => {
            cfg.trials = Some(trials.or(cfg.trials).unwrap_or(DEFAULT_TRIALS));
            cfg.horizon = Some(horizon.or(cfg.horizon).unwrap_or(DEFAULT_HORIZON));
            if policy.is_some() {
                cfg.policy.clone_from(policy);
            }
        }
        Command::Analytic1 { max_stage, .. } => {
            cfg.max_stage = Some(max_stage.or(cfg.max_stage).unwrap_or(DEFAULT_CASE1_STAGES));
        }
        Command::Analytic2 { max_stage, resolution, dump_dir } => {
            cfg.max_stage = Some(max_stage.or(cfg.max_stage).unwrap_or(DEFAULT_CASE2_STAGES));
            cfg.resolution = Some(resolution.or(cfg.resolution).unwrap_or(DEFAULT_RESOLUTION));
            dumps.clone_from(dump_dir);
        }
        Command::Chaos { epsilon, x0, variant, max_stage } => {
            cfg.max_stage = Some(max_stage.or(cfg.max_stage).unwrap_or(DEFAULT_CHAOS_STAGES));
            apply_tent_overrides(&mut cfg, *epsilon, x0.clone(), variant.clone())?;
        }
    }
    if let Command::Tree { depth } | Command::EmitIntervals { depth } = &cli.command {
        cfg.depth = Some(depth.or(cfg.depth).unwrap_or(DEFAULT_DEPTH));
    }

    let meta = Meta { version: VERSION, config_sha256: cfg.digest(), seed };
    let report = match &cli.command {
        Command::Dim { tol } => dim(&cfg, *tol)?,
        Command::Simulate { .. } => simulate(&cfg, seed)?,
        Command::Tree { .. } => tree(&cfg, seed)?,
        Command::EmitIntervals { .. } => intervals(&cfg, seed)?,
        Command::Analytic1 { exact, .. } => analytic1(&cfg, *exact)?,
        Command::Analytic2 { .. } => analytic2(&cfg, &meta, dumps)?,
        Command::Chaos { .. } => chaos(&cfg)?,
    };
    Ok(Output { report, meta, out: cfg.out.clone() })
}

fn apply_tent_overrides(
    cfg: &mut RunConfig,
    epsilon: Option<f64>,
    x0: Option<String>,
    variant: Option<String>,
) -> Result<(), CliError> {
    match &mut cfg.noise {
        Some(NoiseConfig::Tent { epsilon: e, x0: x, variant: v }) => {
            if let Some(eps) = epsilon {
                *e = eps;
            }
            if let Some(s) = x0 {
                *x = s;
            }
            if variant.is_some() {
                *v = variant;
            }
        }
        _ => match (epsilon, x0) {
            (Some(epsilon), Some(x0)) => cfg.noise = Some(NoiseConfig::Tent { epsilon, x0, variant }),
            _ => {
                return Err(CliError::Config(
                    "noise.type: chaos needs \"tent\" noise, or both --epsilon and --x0".into(),
                ))
            }
        },
    }
    Ok(())
}

fn dim(cfg: &RunConfig, tol: f64) -> Result<Report, CliError> {
    let s = cfg.system()?.moran_dimension(tol)?;
    let mut r = Report::new("dim", vec!["dimension"]);
    r.push(vec![Cell::Num(s)]);
    Ok(r)
}

fn simulate(cfg: &RunConfig, seed: u64) -> Result<Report, CliError> {
    let system = cfg.system()?;
    let noise = cfg.noise()?;
    let horizon = cfg.horizon.unwrap_or(DEFAULT_HORIZON);
    let sim = Simulation::new(&system, &noise, cfg.policy("uniform")?, horizon)?;
    let dist = sim.monte_carlo(cfg.trials.unwrap_or(DEFAULT_TRIALS), seed)?;
    let mut r = Report::new("simulate", vec!["stage", "estimate", "stderr", "trials"]);
    for row in dist.rows() {
        r.push(vec![
            Cell::Int(row.stage as u64),
            Cell::Prob(row.estimate),
            Cell::Num(row.stderr),
            Cell::Int(row.trials),
        ]);
    }
    Ok(r)
}

fn tree(cfg: &RunConfig, seed: u64) -> Result<Report, CliError> {
    let t = run_tree(&cfg.system()?, &cfg.noise()?, cfg.depth.unwrap_or(DEFAULT_DEPTH), seed, DEFAULT_NODE_BUDGET)?;
    let mut r = Report::new("tree", vec!["address", "diameter", "noise_term", "collapsed"]);
    for n in &t.nodes {
        r.push(vec![
            Cell::Text(n.address.to_string()),
            Cell::Num(n.diameter),
            Cell::Num(n.noise_term),
            Cell::Bool(n.collapsed),
        ]);
    }
    Ok(r)
}

fn intervals(cfg: &RunConfig, seed: u64) -> Result<Report, CliError> {
    let t = run_tree(&cfg.system()?, &cfg.noise()?, cfg.depth.unwrap_or(DEFAULT_DEPTH), seed, DEFAULT_NODE_BUDGET)?;
    let mut r = Report::new("emit-intervals", vec!["address", "length"]);
    for row in emit_intervals(&t) {
        r.push(vec![Cell::Text(row.address.to_string()), Cell::Num(row.length)]);
    }
    Ok(r)
}

fn table_report<T: ToPrimitive>(command: &'static str, table: &DistributionTable<T>, with_ge: bool) -> Report {
    let p = |x: &T| Cell::Prob(x.to_f64().unwrap_or(f64::NAN));
    let columns = if with_ge { vec!["stage", "LE", "NT", "C", "GE", "regime"] } else { vec!["stage", "LE", "NT", "C"] };
    let mut r = Report::new(command, columns);
    for row in &table.rows {
        let mut cells = vec![Cell::Int(row.stage as u64), p(&row.le), p(&row.nt), p(&row.c)];
        if with_ge {
            cells.push(p(&row.ge));
            cells.push(row.regime.map_or(Cell::Empty, |g| Cell::Text(g.tag().into())));
        }
        r.push(cells);
    }
    r
}

fn analytic1(cfg: &RunConfig, exact: bool) -> Result<Report, CliError> {
    let system = cfg.system()?;
    let noise = cfg.trivalued()?;
    let stages = cfg.max_stage.unwrap_or(DEFAULT_CASE1_STAGES);
    if stages == 0 {
        return Err(CliError::Config("max_stage: must be at least 1".into()));
    }
    let address = cfg.table_address(stages)?;
    if exact {
        let to_exact = |x: &f64| exact_rational(*x);
        let sys: nfl_core::SystemDescriptor<BigRational> = system.convert(to_exact)?;
        let tri = noise.convert(to_exact)?;
        let e = exact_enumeration(&sys, &tri, &address, stages)?;
        let mut r = table_report("analytic1", &e.table, true);
        r.notes.push("exact enumeration of all 3^n kick sequences".into());
        Ok(r)
    } else {
        Ok(table_report("analytic1", &distribution_case1(&system, &noise, &address, stages)?, true))
    }
}

fn analytic2(cfg: &RunConfig, meta: &Meta, dumps: Option<PathBuf>) -> Result<Report, CliError> {
    let system = cfg.system()?;
    let noise = cfg.density_noise()?;
    let stages = cfg.max_stage.unwrap_or(DEFAULT_CASE2_STAGES);
    let address = cfg.table_address(stages.max(1))?;
    let options = Case2Options {
        resolution: cfg.resolution.unwrap_or(DEFAULT_RESOLUTION),
        keep_densities: dumps.is_some(),
        ..Default::default()
    };
    let result = distribution_case2(&system, &noise, &address, stages, &options)?;
    if let Some(dir) = dumps {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        for s in &result.states {
            let p = dir.join(format!("stage_{}.csv", s.stage));
            std::fs::write(&p, render_density(meta, s.stage, &s.density))
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))?;
        }
    }
    Ok(table_report("analytic2", &result.table, false))
}

/// `q<=N` sweep bound, if `arg` is one.
fn sweep_bound(arg: &str) -> Option<&str> {
    arg.trim().strip_prefix("q<=").map(str::trim)
}

fn chaos(cfg: &RunConfig) -> Result<Report, CliError> {
    let system = cfg.system()?;
    let Some(NoiseConfig::Tent { epsilon, x0, variant }) = &cfg.noise else {
        unreachable!("tent noise is ensured by the overrides");
    };
    let variant = parse_variant(variant.as_deref())?;
    let x0s: Vec<UnitRational> = match sweep_bound(x0) {
        Some(n) => {
            let q: u64 = n
                .parse()
                .ok()
                .filter(|&q| (2..=1 << 16).contains(&q))
                .ok_or_else(|| CliError::Config(format!("x0: sweep bound {n:?} must be an integer in 2..=65536")))?;
            rationals_up_to(q)
        }
        None => vec![parse_unit_rational(x0).map_err(|e| CliError::Config(format!("x0: {e}")))?],
    };
    let tent = nfl_core::TentNoise::new(*epsilon, x0s[0], variant).map_err(|e| CliError::Config(format!("noise: {e}")))?;
    let policy = cfg.policy("cyclic")?;
    let reports = sweep_truncation(&system, &tent, &policy, &x0s, cfg.max_stage.unwrap_or(DEFAULT_CHAOS_STAGES))?;
    Ok(chaos_report(&reports))
}

fn chaos_report(reports: &[TruncationReport]) -> Report {
    let mut r = Report::new("chaos", vec!["x0", "k", "collapse_stage", "n0", "bound_satisfied"]);
    let opt = |v: Option<usize>| v.map_or(Cell::Empty, |x| Cell::Int(x as u64));
    for rep in reports {
        r.push(vec![
            Cell::Text(format!("{}/{}", rep.x0.numer(), rep.x0.denom())),
            opt(rep.hit_stage),
            opt(rep.collapse_stage),
            Cell::Int(rep.n0 as u64),
            Cell::Bool(rep.bound_satisfied),
        ]);
    }
    let summary = nfl_core::verify_truncation_bound(reports);
    if reports.len() > 1 || summary.no_hit > 0 || summary.truncated_before_hit > 0 {
        r.notes.push(format!(
            "{} runs: {} entered (0, a), {} truncated before entering, {} neither within the stage budget, {} outside the bound",
            summary.total,
            summary.hit,
            summary.truncated_before_hit,
            summary.no_hit,
            summary.violators.len()
        ));
    }
    if reports.iter().any(|x| x.outcome == TruncationOutcome::TruncatedBeforeHit) {
        r.notes.push("empty k: the event came before the orbit entered (0, a)".into());
    }
    r
}
