//! Tent-map driven disturbance and the finite-stage truncation it forces.
//!
//! Once the orbit enters `(0, a)` with `a = 2^-(n0+1)`, the next `n0`
//! iterates stay below 1/2, every kick is `-eps`, and `n0` was chosen so
//! that this many negative kicks push the diameter to zero. The orbit is
//! iterated in exact rational arithmetic: in binary floating point `x -> 2x`
//! sheds a mantissa bit per step and every orbit ends at 0 within about 60
//! iterations, which would fake the ergodic behaviour the argument needs.

use std::fmt::Debug;

use num_traits::Num;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ifs::SystemDescriptor;
use crate::noise::{tent_condition, tent_delta, ConditionReport, TentNoise, TentVariant, UnitRational};
use crate::rng::unit_rng;
use crate::scalar::Real;
use crate::sim::{step, AddressPolicy, PathState};

/// Exact tent-map state `x = numer / denom`.
///
/// The denominator is fixed for the whole orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TentState {
    numer: u128,
    denom: u128,
    index: usize,
}

impl TentState {
    pub fn new(x0: UnitRational) -> Self {
        Self {
            numer: u128::from(*x0.numer()),
            denom: u128::from(*x0.denom()),
            index: 0,
        }
    }

    /// `2x` below 1/2, `2(1 - x)` from 1/2 up.
    pub fn step(self) -> Self {
        let twice = 2 * self.numer;
        let numer = if twice < self.denom { twice } else { 2 * (self.denom - self.numer) };
        Self { numer, denom: self.denom, index: self.index + 1 }
    }

    /// Current point (not reduced to lowest terms).
    pub fn x(&self) -> UnitRational {
        UnitRational::new_raw(self.numer as u64, self.denom as u64)
    }

    pub fn iterate_index(&self) -> usize {
        self.index
    }

    pub fn denom(&self) -> u64 {
        self.denom as u64
    }

    /// True when `0 < x < a` for `a = 1 / 2^shift`.
    pub fn in_dyadic_window(&self, shift: u32) -> bool {
        self.numer > 0 && (self.numer << shift) < self.denom
    }
}

/// One exact tent-map step.
pub fn tent_step(state: TentState) -> TentState {
    state.step()
}

/// Floating tent-map step. Diagnostic only: orbits degenerate to 0.
pub fn tent_step_float<T: Real>(x: T) -> T {
    let two = T::of(2.0);
    if x < T::of(0.5) { two * x } else { two * (T::one() - x) }
}

/// First `n` in `0..=max_stage` with `x_n` in `(0, 1/2^shift)`.
pub fn first_entry(x0: UnitRational, shift: u32, max_stage: usize) -> Option<usize> {
    let mut s = TentState::new(x0);
    for n in 0..=max_stage {
        if s.in_dyadic_window(shift) {
            return Some(n);
        }
        s = s.step();
    }
    None
}

/// `[A] + 1` where values within 1e-12 of an integer snap to it, so the
/// result always exceeds the true `A`.
fn integer_part_plus_one<T: Real>(a: T) -> usize {
    let nearest = a.round();
    let part = if (a - nearest).abs() < T::of(1e-12) { nearest } else { a.floor() };
    part.max(T::zero()).to_usize().unwrap_or(usize::MAX).saturating_add(1)
}

/// Window length `n0` and trigger interval `(0, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationBounds {
    pub n0: usize,
    /// `a = 1 / 2^(n0 + 1)`, exact.
    pub a: UnitRational,
    pub condition_ok: bool,
}

impl TruncationBounds {
    /// `log2(1/a)`.
    pub fn shift(&self) -> u32 {
        (self.n0 + 1) as u32
    }
}

/// `n0 = [log(1 + (1/xi - 1)/eps) / log(1/xi)] + 1` and `a = 2^-(n0+1)`.
pub fn compute_n0<T: Real>(xi_max: T, epsilon: T) -> Result<TruncationBounds> {
    let cond = tent_condition(xi_max, epsilon);
    if !cond.holds {
        return Err(Error::ChaosConditionViolated { lhs: cond.lhs });
    }
    let inv = xi_max.recip();
    let ratio = (T::one() + (inv - T::one()) / epsilon).ln() / inv.ln();
    let n0 = integer_part_plus_one(ratio);
    if n0 >= 63 {
        return Err(Error::BadParameters(format!("window length {n0} is too large")));
    }
    Ok(TruncationBounds {
        n0,
        a: UnitRational::new(1, 1u64 << (n0 + 1)),
        condition_ok: true,
    })
}

/// Negative kicks needed after the hit:
/// `l = [log(1 + (1/xi - 1)/eps * (prod_k + N_k)) / log(1/xi)] + 1`.
pub fn compute_l<T: Real>(prod_k: T, n_k: T, xi_max: T, epsilon: T) -> Result<usize> {
    let live = prod_k + n_k;
    if !(live > T::zero() && live < T::one()) {
        return Err(Error::InvalidState { value: live.as_f64() });
    }
    let inv = xi_max.recip();
    let ratio = (T::one() + (inv - T::one()) / epsilon * live).ln() / inv.ln();
    Ok(integer_part_plus_one(ratio))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TruncationOutcome {
    /// Terminal event after the orbit entered `(0, a)`.
    Truncated,
    /// Terminal event before the orbit ever entered `(0, a)`.
    TruncatedBeforeHit,
    /// Neither an entry nor an event within the stage budget.
    NoHit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    pub x0: UnitRational,
    pub variant: TentVariant,
    /// First `n >= 0` with `x_n` in `(0, a)`, if it came before the event.
    pub hit_stage: Option<usize>,
    /// Stage of the collapse (or merge, for the merge-directed rule).
    pub collapse_stage: Option<usize>,
    pub n0: usize,
    /// Predicted kicks needed from the state at the hit.
    pub l_predicted: Option<usize>,
    /// Observed `collapse_stage - hit_stage`.
    pub l_used: Option<usize>,
    pub bound_satisfied: bool,
    pub outcome: TruncationOutcome,
}

impl TruncationReport {
    /// Recomputes the bound from the stages instead of trusting the flag.
    pub fn within_bound(&self) -> bool {
        match (self.hit_stage, self.collapse_stage) {
            (Some(k), Some(c)) => c <= k + self.n0,
            (None, Some(_)) => true,
            _ => false,
        }
    }
}

/// One stage of a coupled run.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledStep<T> {
    pub x: UnitRational,
    pub delta: T,
    pub state: PathState<T>,
}

fn coupled_run<T: Real>(
    system: &SystemDescriptor<T>,
    noise: &TentNoise<T>,
    policy: &AddressPolicy,
    max_stage: usize,
    mut trace: Option<&mut Vec<CoupledStep<T>>>,
) -> Result<TruncationReport> {
    let bounds = compute_n0(system.xi_max(), noise.epsilon())?;
    let k_sym = system.symbol_count();
    policy.check(k_sym, if matches!(policy, AddressPolicy::FixedSequence(_)) { max_stage } else { 1 })?;
    let shift = bounds.shift();
    let mut rng = unit_rng(0, 0);
    let mut x = TentState::new(noise.x0());
    let mut hit = x.in_dyadic_window(shift).then_some(0);
    let mut state = PathState::<T>::root();
    let mut l_predicted = None;
    if hit.is_some() {
        l_predicted = predicted_l(&state, system, noise);
    }
    let mut stage = 0;
    loop {
        // beyond max_stage only to settle a run whose window is still open
        let limit = match hit {
            Some(k) => max_stage.max(k + bounds.n0),
            None => max_stage,
        };
        if stage >= limit {
            break;
        }
        stage += 1;
        x = x.step();
        let delta = tent_delta(&x.x(), noise);
        let symbol = policy.symbol(stage, k_sym, &mut rng);
        state = step(&state, symbol, system.ratio(symbol), delta);
        if let Some(t) = trace.as_deref_mut() {
            t.push(CoupledStep { x: x.x(), delta, state: state.clone() });
        }
        let event = match noise.variant() {
            TentVariant::Collapse => state.collapsed,
            TentVariant::Merge => state.merged,
        };
        if event {
            let (outcome, bound_satisfied, l_used) = match hit {
                Some(k) => (TruncationOutcome::Truncated, stage <= k + bounds.n0, Some(stage - k)),
                None => (TruncationOutcome::TruncatedBeforeHit, true, None),
            };
            return Ok(TruncationReport {
                x0: noise.x0(),
                variant: noise.variant(),
                hit_stage: hit,
                collapse_stage: Some(stage),
                n0: bounds.n0,
                l_predicted,
                l_used,
                bound_satisfied,
                outcome,
            });
        }
        if hit.is_none() && x.in_dyadic_window(shift) {
            hit = Some(stage);
            l_predicted = predicted_l(&state, system, noise);
        }
    }
    match hit {
        Some(k) => Err(Error::MaxStageExceeded { hit_stage: k, stage }),
        None => Ok(TruncationReport {
            x0: noise.x0(),
            variant: noise.variant(),
            hit_stage: None,
            collapse_stage: None,
            n0: bounds.n0,
            l_predicted: None,
            l_used: None,
            bound_satisfied: false,
            outcome: TruncationOutcome::NoHit,
        }),
    }
}

fn predicted_l<T: Real>(state: &PathState<T>, system: &SystemDescriptor<T>, noise: &TentNoise<T>) -> Option<usize> {
    // mirrored quantity for the merge rule: distance of N from +product
    let n = match noise.variant() {
        TentVariant::Collapse => state.noise_term,
        TentVariant::Merge => -state.noise_term,
    };
    compute_l(state.product, n, system.xi_max(), noise.epsilon()).ok()
}

/// Couples the tent orbit with the diameter recursion until the
/// variant's terminal event.
///
/// A run whose orbit entered `(0, a)` is followed for at least `n0`
/// stages past the entry; failing to terminate there is reported as
/// [`Error::MaxStageExceeded`]. Random address policies draw from stream 0
/// of seed 0.
pub fn run_until_truncation<T: Real>(
    system: &SystemDescriptor<T>,
    noise: &TentNoise<T>,
    policy: &AddressPolicy,
    max_stage: usize,
) -> Result<TruncationReport> {
    coupled_run(system, noise, policy, max_stage, None)
}

/// [`run_until_truncation`] that also returns every coupled step.
pub fn run_until_truncation_traced<T: Real>(
    system: &SystemDescriptor<T>,
    noise: &TentNoise<T>,
    policy: &AddressPolicy,
    max_stage: usize,
) -> Result<(TruncationReport, Vec<CoupledStep<T>>)> {
    let mut trace = Vec::new();
    let report = coupled_run(system, noise, policy, max_stage, Some(&mut trace))?;
    Ok((report, trace))
}

/// Reduced fractions `p/q` in `(0, 1)` with `q <= max_denom`, ascending.
pub fn rationals_up_to(max_denom: u64) -> Vec<UnitRational> {
    let mut out: Vec<UnitRational> = (2..=max_denom)
        .flat_map(|q| (1..q).filter(move |&p| num_integer::gcd(p, q) == 1).map(move |p| UnitRational::new(p, q)))
        .collect();
    out.sort();
    out
}

/// Runs every `x0` concurrently; reports come back in the order of `x0s`.
pub fn sweep_truncation<T: Real>(
    system: &SystemDescriptor<T>,
    noise: &TentNoise<T>,
    policy: &AddressPolicy,
    x0s: &[UnitRational],
    max_stage: usize,
) -> Result<Vec<TruncationReport>> {
    x0s.par_iter()
        .map(|&x0| run_until_truncation(system, &noise.with_x0(x0)?, policy, max_stage))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationSummary {
    pub total: usize,
    /// Runs whose orbit entered `(0, a)` before the terminal event.
    pub hit: usize,
    pub truncated_before_hit: usize,
    pub no_hit: usize,
    pub within_bound: usize,
    pub violators: Vec<TruncationReport>,
}

impl TruncationSummary {
    /// Every counted run truncated, and within the bound.
    pub fn passed(&self) -> bool {
        self.violators.is_empty()
    }
}

/// Tallies reports sharing one `(xi, eps)`; runs without an entry or an
/// event are counted separately and excluded from the bound statistics.
pub fn verify_truncation_bound(reports: &[TruncationReport]) -> TruncationSummary {
    let mut summary = TruncationSummary {
        total: reports.len(),
        hit: 0,
        truncated_before_hit: 0,
        no_hit: 0,
        within_bound: 0,
        violators: Vec::new(),
    };
    for r in reports {
        match r.outcome {
            TruncationOutcome::NoHit if r.collapse_stage.is_none() && r.hit_stage.is_none() => {
                summary.no_hit += 1;
                continue;
            }
            TruncationOutcome::TruncatedBeforeHit => summary.truncated_before_hit += 1,
            _ => summary.hit += 1,
        }
        if r.within_bound() && r.bound_satisfied {
            summary.within_bound += 1;
        } else {
            summary.violators.push(r.clone());
        }
    }
    summary
}

/// Points of the unit interval that can be built from a fraction.
pub trait UnitPoint: Clone + PartialOrd + Num + Debug {
    fn from_fraction(num: u64, den: u64) -> Self;
}

impl UnitPoint for f64 {
    fn from_fraction(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }
}

impl UnitPoint for f32 {
    fn from_fraction(num: u64, den: u64) -> Self {
        (num as f64 / den as f64) as f32
    }
}

impl UnitPoint for UnitRational {
    fn from_fraction(num: u64, den: u64) -> Self {
        UnitRational::new(num, den)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub passed: bool,
    pub detail: String,
}

/// Empirical checks of the hypotheses for a general chaotic map. Each
/// check is reported on its own; none of them is a proof.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedReport {
    /// The rule gives one and the same negative value on the whole interval.
    pub constant_negative: CheckOutcome,
    /// Sampled orbits enter the interval within the stage budget.
    pub orbits_enter: CheckOutcome,
    /// From any point of the interval the next `n0` iterates still get
    /// the negative value, so an entry delivers `n0` consecutive kicks.
    pub window_holds: CheckOutcome,
    pub n0: Option<usize>,
}

impl GeneralizedReport {
    pub fn all_passed(&self) -> bool {
        self.constant_negative.passed && self.orbits_enter.passed && self.window_holds.passed
    }
}

/// Denominator of the starting points used for the entry check.
const ENTRY_DENOM: u64 = 65_521;

/// Checks a general map and sign rule on `interval = (lo, hi)`.
///
/// `sample_count` points of the interval are tested for the sign rule and
/// the window, and `sample_count` starting points spread over `(0, 1)`
/// are followed for up to `max_stage` iterations.
#[allow(clippy::too_many_arguments)]
pub fn check_generalized_conditions<X, T, M, D>(
    map: M,
    delta_rule: D,
    interval: (X, X),
    sample_count: usize,
    xi_max: T,
    max_stage: usize,
) -> GeneralizedReport
where
    X: UnitPoint,
    T: Real,
    M: Fn(&X) -> X,
    D: Fn(&X) -> T,
{
    let (lo, hi) = interval;
    let count = sample_count.max(1) as u64;
    let inside = |x: &X| *x > lo && *x < hi;
    let samples: Vec<X> = (1..=count)
        .map(|i| lo.clone() + (hi.clone() - lo.clone()) * X::from_fraction(i, count + 1))
        .collect();

    let values: Vec<T> = samples.iter().map(&delta_rule).collect();
    let first = values[0];
    let constant = values.iter().all(|v| *v == first);
    let constant_negative = CheckOutcome {
        passed: constant && first < T::zero(),
        detail: if constant {
            format!("rule value {first} on all {count} samples")
        } else {
            let (mn, mx) = values.iter().fold((first, first), |(a, b), v| (a.min(*v), b.max(*v)));
            format!("rule varies on the interval: {mn} .. {mx}")
        },
    };

    let entered = (0..count)
        .filter(|&i| {
            let num = 1 + i * (ENTRY_DENOM - 2) / count.max(2);
            let mut x = X::from_fraction(num, ENTRY_DENOM);
            for _ in 0..=max_stage {
                if inside(&x) {
                    return true;
                }
                x = map(&x);
            }
            false
        })
        .count() as u64;
    let orbits_enter = CheckOutcome {
        passed: entered == count,
        detail: format!("{entered} of {count} sampled orbits entered within {max_stage} iterations"),
    };

    let n0 = if constant_negative.passed {
        compute_n0(xi_max, -first).ok().map(|b| b.n0)
    } else {
        None
    };
    let window_holds = match n0 {
        None => CheckOutcome {
            passed: false,
            detail: "no admissible window: the rule is not a constant negative value or the tent condition fails".into(),
        },
        Some(n0) => {
            let bad = samples
                .iter()
                .filter(|x0| {
                    let mut x = (*x0).clone();
                    (0..n0).any(|_| {
                        x = map(&x);
                        delta_rule(&x) != first
                    })
                })
                .count();
            CheckOutcome {
                passed: bad == 0,
                detail: format!("{bad} of {count} interval samples leave the negative region within {n0} iterates"),
            }
        }
    };

    GeneralizedReport {
        constant_negative,
        orbits_enter,
        window_holds,
        n0,
    }
}

/// Tent condition for a system and epsilon, re-exported for convenience.
pub fn chaos_condition<T: Real>(system: &SystemDescriptor<T>, epsilon: T) -> ConditionReport {
    tent_condition(system.xi_max(), epsilon)
}
