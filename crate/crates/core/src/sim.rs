//! Noisy diameter recursion along single lineages and whole address trees.
//!
//! A lineage carries its diameter `L` and noise term `N`; each stage
//! applies `L <- xi (L + delta)` and `N <- xi (N + delta)`, so that
//! `L = product + N` throughout. A lineage collapses when its diameter
//! reaches zero or below and merges when `N >= product`.

use rand::Rng;
use rayon::prelude::*;

use crate::chaos::TentState;
use crate::error::{Error, Result};
use crate::ifs::{check_node_budget, Address, AddressTree, GeneratingSetRecord, SystemDescriptor};
use crate::noise::{tent_delta, NoiseModel, TriValuedNoise};
use crate::rng::{unit_rng, PathRng};
use crate::scalar::Real;

/// How the symbol of each stage is chosen along a lineage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AddressPolicy {
    /// A given address; must cover the whole horizon.
    FixedSequence(Address),
    /// Independent uniform symbol at each stage.
    UniformRandom,
    /// A pattern repeated forever.
    Cyclic(Vec<usize>),
}

impl AddressPolicy {
    pub fn check(&self, symbols: usize, horizon: usize) -> Result<()> {
        match self {
            AddressPolicy::FixedSequence(a) => {
                a.check(symbols)?;
                if a.stage() < horizon {
                    return Err(Error::SequenceTooShort { len: a.stage(), needed: horizon });
                }
                Ok(())
            }
            AddressPolicy::Cyclic(p) => {
                if p.is_empty() {
                    return Err(Error::BadParameters("cyclic address pattern is empty".into()));
                }
                Address::new(p.clone()).check(symbols)
            }
            AddressPolicy::UniformRandom => Ok(()),
        }
    }

    /// Symbol used at `stage` (1-based).
    pub fn symbol<R: Rng + ?Sized>(&self, stage: usize, symbols: usize, rng: &mut R) -> usize {
        match self {
            AddressPolicy::FixedSequence(a) => a.symbols()[stage - 1],
            AddressPolicy::Cyclic(p) => p[(stage - 1) % p.len()],
            AddressPolicy::UniformRandom => rng.random_range(1..=symbols),
        }
    }

    /// The address followed for `len` stages, when it does not depend on chance.
    pub fn address(&self, len: usize) -> Option<Address> {
        match self {
            AddressPolicy::FixedSequence(a) => Some(a.prefix(len)),
            AddressPolicy::Cyclic(p) => Some(Address::cyclic(p, len)),
            AddressPolicy::UniformRandom => None,
        }
    }
}

/// Which events end a lineage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Collapse,
    Merge,
    Either,
}

impl Termination {
    /// Merge-directed tent noise looks for merges, everything else for collapse.
    pub fn for_noise<T: Real>(noise: &NoiseModel<T>) -> Self {
        if noise.is_merge_directed() {
            Termination::Merge
        } else {
            Termination::Collapse
        }
    }
}

/// Diameter and noise term of one lineage at some stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState<T> {
    pub stage: usize,
    pub diameter: T,
    pub noise_term: T,
    /// Noiseless product of the ratios so far.
    pub product: T,
    pub address: Address,
    /// The last step took the diameter to zero or below.
    pub collapsed: bool,
    /// The last step took the noise term to the noiseless product or above.
    pub merged: bool,
}

impl<T: Real> PathState<T> {
    /// Stage 0: unit diameter, no noise.
    pub fn root() -> Self {
        Self {
            stage: 0,
            diameter: T::one(),
            noise_term: T::zero(),
            product: T::one(),
            address: Address::root(),
            collapsed: false,
            merged: false,
        }
    }
}

/// Advances one stage with symbol `symbol` (ratio `ratio`) and disturbance `delta`.
///
/// The events are decided on the pre-scaling sums: `xi > 0`, so
/// `xi (L + delta) <= 0` iff `L + delta <= 0`, and the test stays correct
/// when the scaled diameter underflows.
pub fn step<T: Real>(state: &PathState<T>, symbol: usize, ratio: T, delta: T) -> PathState<T> {
    let l = state.diameter + delta;
    let n = state.noise_term + delta;
    PathState {
        stage: state.stage + 1,
        diameter: ratio * l,
        noise_term: ratio * n,
        product: state.product * ratio,
        address: state.address.child(symbol),
        collapsed: l <= T::zero(),
        merged: n >= state.product,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathStatus {
    Collapsed,
    Merged,
    Survived,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome<T> {
    pub status: PathStatus,
    /// Stage of the terminal event, or the horizon for survivors.
    pub terminal_stage: usize,
    pub final_state: PathState<T>,
    /// Every state from stage 0, when requested.
    pub trace: Option<Vec<PathState<T>>>,
}

/// Per-lineage disturbance source.
pub(crate) struct PathNoise<'a, T> {
    model: &'a NoiseModel<T>,
    tent: Option<TentState>,
}

impl<'a, T: Real> PathNoise<'a, T> {
    pub(crate) fn new(model: &'a NoiseModel<T>) -> Self {
        let tent = match model {
            NoiseModel::Tent(t) => Some(TentState::new(t.x0())),
            _ => None,
        };
        Self { model, tent }
    }

    pub(crate) fn next<R: Rng + ?Sized>(&mut self, symbol: usize, rng: &mut R) -> T {
        match self.model {
            NoiseModel::Zero => T::zero(),
            NoiseModel::TriValued(n) => n.sample(symbol, rng),
            NoiseModel::Density(d) => d.sampler(symbol).sample(rng),
            NoiseModel::Tent(t) => {
                let state = self.tent.as_mut().expect("tent state");
                *state = state.step();
                tent_delta(&state.x(), t)
            }
        }
    }
}

/// A configured simulation: system, noise, address policy and horizon.
#[derive(Debug, Clone)]
pub struct Simulation<'a, T> {
    system: &'a SystemDescriptor<T>,
    noise: &'a NoiseModel<T>,
    policy: AddressPolicy,
    horizon: usize,
    termination: Termination,
}

impl<'a, T: Real> Simulation<'a, T> {
    pub fn new(
        system: &'a SystemDescriptor<T>,
        noise: &'a NoiseModel<T>,
        policy: AddressPolicy,
        horizon: usize,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidHorizon);
        }
        policy.check(system.symbol_count(), horizon)?;
        noise.check_symbols(system.symbol_count())?;
        Ok(Self {
            system,
            noise,
            policy,
            horizon,
            termination: Termination::for_noise(noise),
        })
    }

    pub fn with_termination(mut self, termination: Termination) -> Self {
        self.termination = termination;
        self
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    fn is_terminal(&self, s: &PathState<T>) -> Option<PathStatus> {
        let collapse = s.collapsed && self.termination != Termination::Merge;
        let merge = s.merged && self.termination != Termination::Collapse;
        if collapse {
            Some(PathStatus::Collapsed)
        } else if merge {
            Some(PathStatus::Merged)
        } else {
            None
        }
    }

    /// Runs lineage `path_index` under `seed` until a terminal event or the horizon.
    pub fn run_path(&self, path_index: u64, seed: u64, keep_trace: bool) -> TrajectoryOutcome<T> {
        let mut rng = unit_rng(seed, path_index);
        self.run_with(&mut rng, keep_trace)
    }

    fn run_with(&self, rng: &mut PathRng, keep_trace: bool) -> TrajectoryOutcome<T> {
        let k = self.system.symbol_count();
        let mut noise = PathNoise::new(self.noise);
        let mut state = PathState::root();
        let mut trace = keep_trace.then(|| vec![state.clone()]);
        for stage in 1..=self.horizon {
            let symbol = self.policy.symbol(stage, k, rng);
            let delta = noise.next(symbol, rng);
            state = step(&state, symbol, self.system.ratio(symbol), delta);
            if let Some(t) = trace.as_mut() {
                t.push(state.clone());
            }
            if let Some(status) = self.is_terminal(&state) {
                return TrajectoryOutcome { status, terminal_stage: stage, final_state: state, trace };
            }
        }
        TrajectoryOutcome {
            status: PathStatus::Survived,
            terminal_stage: self.horizon,
            final_state: state,
            trace,
        }
    }

    /// Monte Carlo estimate of the per-stage terminal-event probabilities.
    ///
    /// Path `i` always uses stream `i` of `seed`, and counts are merged as
    /// integers, so the result does not depend on the thread schedule.
    pub fn monte_carlo(&self, trials: u64, seed: u64) -> Result<EmpiricalDistribution> {
        if trials == 0 {
            return Err(Error::BadParameters("at least one trial is required".into()));
        }
        const CHUNK: u64 = 2048;
        let chunks = trials.div_ceil(CHUNK);
        let horizon = self.horizon;
        let partial: Vec<Vec<u64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut counts = vec![0u64; horizon + 1];
                for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                    let out = self.run_path(i, seed, false);
                    match out.status {
                        PathStatus::Survived => counts[0] += 1,
                        _ => counts[out.terminal_stage] += 1,
                    }
                }
                counts
            })
            .collect();
        let mut total = vec![0u64; horizon + 1];
        for counts in partial {
            for (t, c) in total.iter_mut().zip(counts) {
                *t += c;
            }
        }
        Ok(EmpiricalDistribution {
            horizon,
            trials,
            survived: total[0],
            events: total[1..].to_vec(),
        })
    }
}

/// Single lineage run; see [`Simulation::run_path`].
pub fn run_path<T: Real>(
    system: &SystemDescriptor<T>,
    noise: &NoiseModel<T>,
    policy: AddressPolicy,
    horizon: usize,
    seed: u64,
) -> Result<TrajectoryOutcome<T>> {
    Ok(Simulation::new(system, noise, policy, horizon)?.run_path(0, seed, true))
}

/// See [`Simulation::monte_carlo`].
pub fn monte_carlo_distribution<T: Real>(
    system: &SystemDescriptor<T>,
    noise: &NoiseModel<T>,
    policy: AddressPolicy,
    trials: u64,
    horizon: usize,
    seed: u64,
) -> Result<EmpiricalDistribution> {
    Simulation::new(system, noise, policy, horizon)?.monte_carlo(trials, seed)
}

/// Per-stage terminal-event frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalDistribution {
    pub horizon: usize,
    pub trials: u64,
    /// `events[n - 1]` = lineages whose terminal event happened at stage `n`.
    pub events: Vec<u64>,
    pub survived: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalRow {
    pub stage: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl EmpiricalDistribution {
    pub fn estimate(&self, stage: usize) -> f64 {
        self.events[stage - 1] as f64 / self.trials as f64
    }

    pub fn stderr(&self, stage: usize) -> f64 {
        let p = self.estimate(stage);
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Lineages still alive after `stage`.
    pub fn alive_after(&self, stage: usize) -> u64 {
        self.trials - self.events[..stage].iter().sum::<u64>()
    }

    pub fn rows(&self) -> Vec<EmpiricalRow> {
        (1..=self.horizon)
            .map(|stage| EmpiricalRow {
                stage,
                estimate: self.estimate(stage),
                stderr: self.stderr(stage),
                trials: self.trials,
            })
            .collect()
    }
}

/// Runs the recursion over the whole address tree to `depth`.
///
/// Every node draws its own disturbance from the stream numbered by its
/// breadth-first position in the complete tree. Tent noise is shared by
/// depth, since the orbit is indexed by stage. A collapsed node keeps its
/// record but is not expanded.
pub fn run_tree<T: Real>(
    system: &SystemDescriptor<T>,
    noise: &NoiseModel<T>,
    depth: usize,
    seed: u64,
    node_budget: usize,
) -> Result<AddressTree<T>> {
    let k = system.symbol_count();
    check_node_budget(k, depth, node_budget)?;
    noise.check_symbols(k)?;
    let tent_deltas: Vec<T> = match noise {
        NoiseModel::Tent(t) => {
            let mut x = TentState::new(t.x0());
            (0..depth)
                .map(|_| {
                    x = x.step();
                    tent_delta(&x.x(), t)
                })
                .collect()
        }
        _ => Vec::new(),
    };
    let mut nodes = vec![GeneratingSetRecord {
        address: Address::root(),
        diameter: T::one(),
        noise_term: T::zero(),
        collapsed: false,
    }];
    // (node index in `nodes`, breadth-first id in the complete tree)
    let mut frontier: Vec<(usize, u64)> = vec![(0, 0)];
    let mut level_offset: u64 = 0;
    let mut level_size: u64 = 1;
    let tent_deltas = &tent_deltas;
    for stage in 1..=depth {
        let next_offset = level_offset + level_size;
        let children: Vec<(GeneratingSetRecord<T>, u64)> = frontier
            .par_iter()
            .flat_map_iter(|&(idx, id)| {
                let parent = &nodes[idx];
                let rank = id - level_offset;
                (1..=k).map(move |j| {
                    let child_id = next_offset + rank * k as u64 + (j as u64 - 1);
                    let delta = match noise {
                        NoiseModel::Zero => T::zero(),
                        NoiseModel::TriValued(n) => n.sample(j, &mut unit_rng(seed, child_id)),
                        NoiseModel::Density(d) => d.sampler(j).sample(&mut unit_rng(seed, child_id)),
                        NoiseModel::Tent(_) => tent_deltas[stage - 1],
                    };
                    let ratio = system.ratio(j);
                    let l = parent.diameter + delta;
                    let rec = GeneratingSetRecord {
                        address: parent.address.child(j),
                        diameter: ratio * l,
                        noise_term: ratio * (parent.noise_term + delta),
                        collapsed: l <= T::zero(),
                    };
                    (rec, child_id)
                })
            })
            .collect();
        frontier.clear();
        for (rec, id) in children {
            if !rec.collapsed {
                frontier.push((nodes.len(), id));
            }
            nodes.push(rec);
        }
        level_offset = next_offset;
        level_size *= k as u64;
    }
    Ok(AddressTree { depth, nodes })
}

/// Checks `|N| <= xi_max * delta_max / (1 - xi_max)` on every state of a trace.
pub fn noise_bound_check<T: Real>(
    trace: &[PathState<T>],
    system: &SystemDescriptor<T>,
    noise: &TriValuedNoise<T>,
) -> bool {
    let xi = system.xi_max();
    let bound = xi * noise.delta_max() / (T::one() - xi);
    trace.iter().all(|s| s.noise_term.abs() <= bound)
}
