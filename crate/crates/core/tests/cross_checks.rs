//! Analytic tables, exact enumeration and simulation checked against each other.

use nfl_core::case2::Case2Options;
use nfl_core::chaos::{rationals_up_to, sweep_truncation, TruncationOutcome};
use nfl_core::scalar::exact_rational;
use nfl_core::*;

fn three_se(p: f64, trials: u64) -> f64 {
    3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

#[test]
fn density_pipeline_matches_simulation() {
    let system = validate_system(&[0.5, 0.5]).unwrap();
    let grid = build_density(&DensityFamily::Uniform { beta: 1.5 }, 1 << 12).unwrap();
    let address = Address::cyclic(&[1], 6);
    let table = distribution_case2(
        &system,
        &DensityNoise::shared(grid.clone()),
        &address,
        6,
        &Case2Options { resolution: 1 << 12, ..Default::default() },
    )
    .unwrap()
    .table;
    let noise = NoiseModel::Density(DensityNoise::shared(grid));
    let trials = 200_000;
    let mc = monte_carlo_distribution(&system, &noise, AddressPolicy::FixedSequence(address), trials, 6, 11).unwrap();
    for row in &table.rows {
        let est = mc.estimate(row.stage);
        let tol = three_se(row.c, trials);
        assert!((est - row.c).abs() <= tol, "stage {} pipeline {} mc {est} tol {tol}", row.stage, row.c);
    }
}

#[test]
fn enumeration_matches_simulation() {
    let system = validate_system(&[0.25, 0.25]).unwrap();
    let tri = TriValuedNoise::uniform(0.1, 2).unwrap();
    let address = Address::cyclic(&[1, 2], 8);
    let exact = exact_enumeration(
        &system.convert(|x| exact_rational(*x)).unwrap(),
        &tri.convert(|x| exact_rational(*x)).unwrap(),
        &address,
        8,
    )
    .unwrap();
    let noise = NoiseModel::TriValued(tri);
    let trials = 100_000;
    let mc = monte_carlo_distribution(&system, &noise, AddressPolicy::FixedSequence(address), trials, 8, 3).unwrap();
    for row in &exact.table.rows {
        let c = num_traits::ToPrimitive::to_f64(&row.c).unwrap();
        assert!((mc.estimate(row.stage) - c).abs() <= three_se(c, trials).max(1e-12), "stage {}", row.stage);
    }
}

#[test]
fn tree_survivors_follow_the_table() {
    // delta = 9/64 puts the transitional stage exactly on 1/3, so the closed form is exact here
    let system = validate_system(&[0.25, 0.25]).unwrap();
    let tri = TriValuedNoise::uniform(9.0 / 64.0, 2).unwrap();
    let address = Address::cyclic(&[1], 6);
    let analytic = distribution_case1(&system, &tri, &address, 6).unwrap();
    let exact = exact_enumeration(
        &system.convert(|x| exact_rational(*x)).unwrap(),
        &tri.convert(|x| exact_rational(*x)).unwrap(),
        &address,
        6,
    )
    .unwrap()
    .table;
    let exact_alive = 1.0 - num_traits::ToPrimitive::to_f64(&exact.total_collapse()).unwrap();
    let alive = 1.0 - analytic.total_collapse();
    assert!((alive - exact_alive).abs() < 1e-15);
    let noise = NoiseModel::TriValued(tri);
    let reps = 200u64;
    let fractions: Vec<f64> = (0..reps)
        .map(|seed| {
            let tree = run_tree(&system, &noise, 6, seed, 1 << 20).unwrap();
            tree.alive_leaves().count() as f64 / 64.0
        })
        .collect();
    let mean = fractions.iter().sum::<f64>() / reps as f64;
    let var = fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let se = (var / reps as f64).sqrt();
    assert!((mean - alive).abs() <= 3.0 * se, "mean {mean} analytic {alive} se {se}");
}

#[test]
fn small_tent_sweep_is_bounded() {
    let system = validate_system(&[1.0 / 3.0, 1.0 / 3.0]).unwrap();
    let tent = TentNoise::new(0.1, UnitRational::new(1, 2), TentVariant::Collapse).unwrap();
    let reports = sweep_truncation(&system, &tent, &AddressPolicy::Cyclic(vec![1]), &rationals_up_to(64), 10_000).unwrap();
    let summary = verify_truncation_bound(&reports);
    assert!(summary.passed(), "{:?}", summary.violators);
    assert!(reports.iter().any(|r| r.outcome == TruncationOutcome::Truncated));
}
