//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use nfl_core::case2::Case2Options;
use nfl_core::chaos::{first_entry, rationals_up_to};
use nfl_core::scalar::{exact_rational, ratio};
use nfl_core::sim::PathStatus;
use nfl_core::*;

// tolerances and budgets
const MORAN_TOL: f64 = 1e-12;
const MORAN_BUDGET: Duration = Duration::from_millis(10);
const ZERO_NOISE_STAGES: usize = 1000;
const ZERO_NOISE_PATHS: u64 = 200;
const ENVELOPE_PATHS: u64 = 100_000;
const ENVELOPE_STAGES: usize = 50;
const ENVELOPE_BOUND: f64 = 0.05;
const ENVELOPE_SLACK: f64 = 1e-12;
const ENVELOPE_BUDGET: Duration = Duration::from_secs(5);
const DEEP_MAX_STAGE: usize = 12;
const MC_PATHS: u64 = 1_000_000;
const SE_MULTIPLE: f64 = 3.0;
const DEEP_BUDGET: Duration = Duration::from_secs(60);
const RECURSION_REL_TOL: f64 = 0.10;
const RECURSION_STAGES: usize = 4;
const SHRINK_STAGES: usize = 8;
const RECURSION_BUDGET: Duration = Duration::from_secs(30);
const CASE2_STAGE1_TOL: f64 = 1e-3;
const CASE2_STAGES: usize = 6;
const CASE2_RESOLUTION: usize = 1 << 14;
const CASE2_REFINEMENT_TOL: f64 = 1e-3;
const CASE2_BUDGET: Duration = Duration::from_secs(60);
const TENT_MAX_DENOM: u64 = 512;
const TENT_ENTRY_STAGES: usize = 10_000;
const TENT_BUDGET: Duration = Duration::from_secs(30);
const SWEEP_POINTS: usize = 1000;
const SWEEP_BUDGET: Duration = Duration::from_secs(1);

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn within_budget(elapsed: Duration, budget: Duration) -> (bool, String) {
    (elapsed < budget, format!("{:.3} s of {:.3} s", elapsed.as_secs_f64(), budget.as_secs_f64()))
}

fn exact_pair(ratios: &[f64], delta: f64) -> (SystemDescriptor<BigRational>, TriValuedNoise<BigRational>) {
    let sys = validate_system(ratios).unwrap().convert(|x| exact_rational(*x)).unwrap();
    let noise = TriValuedNoise::uniform(delta, ratios.len()).unwrap().convert(|x| exact_rational(*x)).unwrap();
    (sys, noise)
}

fn moran() -> Verdict {
    let start = Instant::now();
    let s2 = validate_system(&[1.0 / 3.0, 1.0 / 3.0]).unwrap().moran_dimension(1e-15).unwrap();
    let s3 = validate_system(&[0.5, 0.5, 0.5]).unwrap().moran_dimension(1e-15).unwrap();
    let (fast, time) = within_budget(start.elapsed(), MORAN_BUDGET);
    let e2 = (s2 - 2f64.ln() / 3f64.ln()).abs();
    let e3 = (s3 - 3f64.ln() / 2f64.ln()).abs();
    verdict(
        e2 <= MORAN_TOL && e3 <= MORAN_TOL && fast,
        format!("errors {e2:.1e} and {e3:.1e} (tol {MORAN_TOL:.0e}), {time}"),
    )
}

fn zero_noise() -> Verdict {
    // ratios >= 1/2 keep 1000-stage products inside the normal f64 range
    let sys = validate_system(&[0.5, 0.6]).unwrap();
    let noise = NoiseModel::Zero;
    let sim = Simulation::new(&sys, &noise, AddressPolicy::UniformRandom, ZERO_NOISE_STAGES).unwrap();
    let bad: Vec<u64> = (0..ZERO_NOISE_PATHS)
        .into_par_iter()
        .filter(|&i| {
            let out = sim.run_path(i, 17, true);
            if out.status != PathStatus::Survived || out.terminal_stage != ZERO_NOISE_STAGES {
                return true;
            }
            let mut prod = 1.0f64;
            out.trace.unwrap().iter().skip(1).any(|s| {
                prod *= sys.ratio(*s.address.symbols().last().unwrap());
                s.diameter.to_bits() != prod.to_bits() || s.noise_term != 0.0 || s.collapsed
            })
        })
        .collect();
    verdict(
        bad.is_empty(),
        format!("{} of {ZERO_NOISE_PATHS} paths of {ZERO_NOISE_STAGES} stages differ from the product or collapse", bad.len()),
    )
}

fn envelope() -> Verdict {
    let start = Instant::now();
    let sys = validate_system(&[1.0f64 / 3.0, 1.0 / 3.0]).unwrap();
    let noise = NoiseModel::TriValued(TriValuedNoise::uniform(0.1, 2).unwrap());
    let sim = Simulation::new(&sys, &noise, AddressPolicy::UniformRandom, ENVELOPE_STAGES).unwrap();
    let worst = (0..ENVELOPE_PATHS)
        .into_par_iter()
        .map(|i| {
            sim.run_path(i, 5, true)
                .trace
                .unwrap()
                .iter()
                .map(|s| s.noise_term.abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let (fast, time) = within_budget(start.elapsed(), ENVELOPE_BUDGET);
    verdict(
        worst <= ENVELOPE_BOUND + ENVELOPE_SLACK && fast,
        format!("max |N| = {worst:.15} over {ENVELOPE_PATHS} paths (bound {ENVELOPE_BOUND}), {time}"),
    )
}

fn deep_regime() -> Verdict {
    let start = Instant::now();
    let address = Address::cyclic(&[1], DEEP_MAX_STAGE);
    let (sys, noise) = exact_pair(&[0.25, 0.25], 0.1);
    let e = exact_enumeration(&sys, &noise, &address, DEEP_MAX_STAGE).unwrap();
    let third = ratio(1, 3);
    let deep: Vec<_> = e.table.rows.iter().zip(&e.counts).filter(|(r, _)| r.regime == Some(RegimeClass::Deep)).collect();
    let exact_ok = !deep.is_empty() && deep.iter().all(|(r, c)| c.is_exact_third() && r.le == third);

    let fsys = validate_system(&[0.25, 0.25]).unwrap();
    let fnoise = NoiseModel::TriValued(TriValuedNoise::uniform(0.1, 2).unwrap());
    let mc = monte_carlo_distribution(&fsys, &fnoise, AddressPolicy::FixedSequence(address), MC_PATHS, DEEP_MAX_STAGE, 2024)
        .unwrap();
    // conditional collapse frequency among paths alive at the start of each deep stage
    let mut worst = 0.0f64;
    for (row, _) in &deep {
        let alive = mc.alive_after(row.stage - 1);
        let p = 1.0 / 3.0;
        let se = (p * (1.0 - p) / alive as f64).sqrt();
        let est = mc.events[row.stage - 1] as f64 / alive as f64;
        worst = worst.max((est - p).abs() / se);
    }
    let (fast, time) = within_budget(start.elapsed(), DEEP_BUDGET);
    verdict(
        exact_ok && worst <= SE_MULTIPLE && fast,
        format!(
            "{} deep stages, all exact thirds: {exact_ok}; worst conditional MC deviation {worst:.2} SE over {MC_PATHS} paths, {time}",
            deep.len()
        ),
    )
}

fn max_abs_le_error(delta: f64) -> f64 {
    let address = Address::cyclic(&[1], SHRINK_STAGES);
    let sys = validate_system(&[0.25, 0.25]).unwrap();
    let noise = TriValuedNoise::uniform(delta, 2).unwrap();
    let analytic = distribution_case1(&sys, &noise, &address, SHRINK_STAGES).unwrap();
    let (es, en) = exact_pair(&[0.25, 0.25], delta);
    let exact = exact_enumeration(&es, &en, &address, SHRINK_STAGES).unwrap();
    analytic
        .rows
        .iter()
        .zip(&exact.table.rows)
        .map(|(a, x)| (a.le - x.le.to_f64().unwrap()).abs())
        .fold(0.0, f64::max)
}

fn recursion() -> Verdict {
    let start = Instant::now();
    let address = Address::cyclic(&[1], RECURSION_STAGES);
    let sys = validate_system(&[0.25, 0.25]).unwrap();
    let noise = TriValuedNoise::uniform(0.1, 2).unwrap();
    let analytic = distribution_case1(&sys, &noise, &address, RECURSION_STAGES).unwrap();
    let (es, en) = exact_pair(&[0.25, 0.25], 0.1);
    let exact = exact_enumeration(&es, &en, &address, RECURSION_STAGES).unwrap();
    let rel: Vec<f64> = analytic
        .rows
        .iter()
        .zip(&exact.table.rows)
        .map(|(a, x)| {
            let x = x.c.to_f64().unwrap();
            if x == 0.0 && a.c == 0.0 { 0.0 } else { (a.c - x).abs() / x.abs().max(f64::MIN_POSITIVE) }
        })
        .collect();
    let rel_ok = rel.iter().all(|r| *r <= RECURSION_REL_TOL);
    let errs = [max_abs_le_error(0.1), max_abs_le_error(0.05), max_abs_le_error(0.01)];
    let shrinks = errs[0] >= errs[1] && errs[1] >= errs[2];
    let (fast, time) = within_budget(start.elapsed(), RECURSION_BUDGET);
    let c: Vec<String> = analytic.rows.iter().map(|r| format!("{:.6}", r.c)).collect();
    let x: Vec<String> = exact.table.rows.iter().map(|r| format!("{:.6}", r.c.to_f64().unwrap())).collect();
    let r: Vec<String> = rel.iter().map(|v| format!("{:.1}%", v * 100.0)).collect();
    verdict(
        rel_ok && shrinks && fast,
        format!(
            "analytic C [{}] vs exact [{}], relative error [{}] (tol {:.0}%): {rel_ok}; max |LE error| {:.4} / {:.4} / {:.4} shrinking: {shrinks}; {time}",
            c.join(", "),
            x.join(", "),
            r.join(", "),
            RECURSION_REL_TOL * 100.0,
            errs[0],
            errs[1],
            errs[2]
        ),
    )
}

fn case2_table(resolution: usize) -> Table {
    let sys = validate_system(&[0.5, 0.5]).unwrap();
    let grid = build_density(&DensityFamily::Uniform { beta: 1.5 }, resolution).unwrap();
    let opts = Case2Options { resolution, ..Default::default() };
    distribution_case2(&sys, &DensityNoise::shared(grid), &Address::cyclic(&[1], CASE2_STAGES), CASE2_STAGES, &opts)
        .unwrap()
        .table
}

fn case2() -> Verdict {
    let start = Instant::now();
    let coarse = case2_table(CASE2_RESOLUTION);
    // same support with half the spacing
    let fine = case2_table(2 * CASE2_RESOLUTION - 1);
    let stage1 = (coarse.rows[0].c - 1.0 / 6.0).abs();
    let refine = coarse.rows.iter().zip(&fine.rows).map(|(a, b)| (a.c - b.c).abs()).fold(0.0, f64::max);

    let sys = validate_system(&[0.5, 0.5]).unwrap();
    let grid = build_density(&DensityFamily::Uniform { beta: 1.5 }, CASE2_RESOLUTION).unwrap();
    let noise = NoiseModel::Density(DensityNoise::shared(grid));
    let policy = AddressPolicy::FixedSequence(Address::cyclic(&[1], CASE2_STAGES));
    let mc = monte_carlo_distribution(&sys, &noise, policy, MC_PATHS, CASE2_STAGES, 99).unwrap();
    let worst = coarse
        .rows
        .iter()
        .map(|r| {
            let se = (r.c * (1.0 - r.c) / MC_PATHS as f64).sqrt();
            (mc.estimate(r.stage) - r.c).abs() / se
        })
        .fold(0.0, f64::max);
    let (fast, time) = within_budget(start.elapsed(), CASE2_BUDGET);
    verdict(
        stage1 <= CASE2_STAGE1_TOL && worst <= SE_MULTIPLE && refine < CASE2_REFINEMENT_TOL && fast,
        format!(
            "|C1 - 1/6| = {stage1:.2e}; worst MC deviation {worst:.2} SE; refinement shift {refine:.2e}; {time}"
        ),
    )
}

fn tent_bounds() -> Verdict {
    let start = Instant::now();
    let bounds = compute_n0(1.0 / 3.0, 0.1).unwrap();
    let n0_ok = bounds.n0 == 3 && bounds.a == UnitRational::new(1, 16);
    let shift = bounds.shift();
    let sys = validate_system(&[1.0 / 3.0, 1.0 / 3.0]).unwrap();
    let policy = AddressPolicy::Cyclic(vec![1]);
    let entering: Vec<(UnitRational, usize)> = rationals_up_to(TENT_MAX_DENOM)
        .into_par_iter()
        .filter_map(|x0| first_entry(x0, shift, TENT_ENTRY_STAGES).map(|k| (x0, k)))
        .collect();
    let check = |variant: TentVariant| -> usize {
        entering
            .par_iter()
            .filter(|(x0, k)| {
                let noise = TentNoise::new(0.1, *x0, variant).unwrap();
                match run_until_truncation(&sys, &noise, &policy, TENT_ENTRY_STAGES) {
                    Ok(rep) => match rep.collapse_stage {
                        Some(c) => variant == TentVariant::Collapse && c > k + bounds.n0,
                        None => true,
                    },
                    Err(_) => true,
                }
            })
            .count()
    };
    let collapse_fail = check(TentVariant::Collapse);
    let merge_fail = check(TentVariant::Merge);
    let (fast, time) = within_budget(start.elapsed(), TENT_BUDGET);
    verdict(
        n0_ok && collapse_fail == 0 && merge_fail == 0 && !entering.is_empty() && fast,
        format!(
            "n0 = {}, a = {}; {} entering x0 with q <= {TENT_MAX_DENOM}: {collapse_fail} collapse runs unbounded or late, {merge_fail} merge runs never merged; {time}",
            bounds.n0,
            bounds.a,
            entering.len()
        ),
    )
}

/// Points strictly inside `(lo, hi)`.
fn interior(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    (1..=count).map(move |i| lo + (hi - lo) * i as f64 / (count + 1) as f64)
}

fn l_sweep() -> Verdict {
    let start = Instant::now();
    let (xi, eps) = (1.0f64 / 3.0, 0.1f64);
    let n0 = compute_n0(xi, eps).unwrap().n0;
    let mut checked = 0usize;
    let mut failures = Vec::new();
    let mut attainable_failures = 0usize;
    for k in 1..=10i32 {
        let prod = xi.powi(k);
        let upper = eps * (1.0 - xi.powi(k + 1)) / (1.0 - xi);
        for n in interior(-prod, upper, SWEEP_POINTS) {
            let Ok(l) = compute_l(prod, n, xi, eps) else { continue };
            checked += 1;
            if l >= n0 {
                failures.push((k, n, l));
            }
        }
        // what the recursion can actually reach by stage k
        let reach = eps * xi * (1.0 - xi.powi(k)) / (1.0 - xi);
        for n in interior(-prod.min(reach), reach, SWEEP_POINTS) {
            if compute_l(prod, n, xi, eps).is_ok_and(|l| l >= n0) {
                attainable_failures += 1;
            }
        }
    }
    let (fast, time) = within_budget(start.elapsed(), SWEEP_BUDGET);
    let first = failures
        .first()
        .map(|(k, n, l)| format!(", first at k = {k}, N = {n:.4}, l = {l}"))
        .unwrap_or_default();
    verdict(
        failures.is_empty() && fast,
        format!(
            "{} of {checked} admissible (k, N) give l >= n0 = {n0}{first}; reachable range: {attainable_failures} cases; {time}",
            failures.len()
        ),
    )
}

fn nfl(config: &Path, args: &[&str], threads: &str, out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_nfl"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("NFL_THREADS", threads)
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("{args:?} exited with {status}"));
    }
    std::fs::read(out).map_err(|e| e.to_string())
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let sim_cfg = dir.path().join("sim.json");
    std::fs::write(&sim_cfg, r#"{"ratios":[0.25,0.4],"noise":{"type":"trivalued","deltas":[0.1,0.2]},"trials":100000,"horizon":12}"#).unwrap();
    let a1_cfg = dir.path().join("a1.json");
    std::fs::write(&a1_cfg, r#"{"ratios":[0.25,0.25],"noise":{"type":"trivalued","deltas":[0.1]},"max_stage":12}"#).unwrap();
    let runs: [(&Path, &[&str]); 3] = [
        (&sim_cfg, &["simulate", "--seed", "42"]),
        (&a1_cfg, &["analytic1"]),
        (&a1_cfg, &["analytic1", "--exact"]),
    ];
    let mut same = 0;
    let mut notes = Vec::new();
    for (i, (cfg, args)) in runs.iter().enumerate() {
        let outputs: Result<Vec<Vec<u8>>, String> = ["1", "2", "4"]
            .iter()
            .map(|t| nfl(cfg, args, t, &dir.path().join(format!("out{i}_{t}.csv"))))
            .collect();
        match outputs {
            Ok(o) if o.windows(2).all(|w| w[0] == w[1]) && !o[0].is_empty() => same += 1,
            Ok(_) => notes.push(format!("{args:?} differs across thread counts")),
            Err(e) => notes.push(e),
        }
    }
    verdict(
        same == runs.len(),
        format!("{same} of {} commands byte-identical under NFL_THREADS = 1, 2, 4{}", runs.len(), if notes.is_empty() { String::new() } else { format!(": {}", notes.join("; ")) }),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("moran dimension", moran),
        ("zero-noise identity", zero_noise),
        ("noise envelope", envelope),
        ("three-valued deep regime", deep_regime),
        ("three-valued recursion", recursion),
        ("density pipeline", case2),
        ("tent truncation bound", tent_bounds),
        ("l below n0", l_sweep),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        if !v.passed {
            failed += 1;
        }
        println!("criterion {} ({name}): {}  {}", i + 1, if v.passed { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
