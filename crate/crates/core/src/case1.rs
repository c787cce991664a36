//! Collapse distribution for three-valued noise.
//!
//! With `B = xi * Delta / (1 - xi)` (largest ratio and amplitude) a stage
//! can only collapse once the noiseless product has shrunk to `B`. Between
//! the two products the collapse probability is taken proportional to the
//! length of the reachable range; past that every path whose last kick is
//! negative collapses, provided the amplitudes are close enough to each
//! other. [`exact_enumeration`] counts all `3^n` kick sequences as ground truth.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ifs::{Address, SystemDescriptor};
use crate::noise::{validate_case1, TriValuedNoise};
use crate::scalar::OrderedField;

/// Largest stage the enumeration accepts.
pub const MAX_ENUMERATION_STAGE: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeClass {
    NoCollapsePossible,
    Transitional,
    Deep,
}

impl RegimeClass {
    pub fn tag(&self) -> &'static str {
        match self {
            RegimeClass::NoCollapsePossible => "no-collapse-possible",
            RegimeClass::Transitional => "transitional",
            RegimeClass::Deep => "deep",
        }
    }
}

impl fmt::Display for RegimeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionRow<T> {
    pub stage: usize,
    pub le: T,
    pub nt: T,
    pub c: T,
    pub ge: T,
    pub regime: Option<RegimeClass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionTable<T> {
    pub address: Address,
    pub rows: Vec<DistributionRow<T>>,
}

impl<T: OrderedField> DistributionTable<T> {
    /// Builds rows from per-stage `LE` with `NT_n = 1 - sum_{i<n} C_i`.
    pub fn from_le(address: Address, les: Vec<(T, Option<RegimeClass>)>) -> Self {
        let mut cumulative = T::zero();
        let rows = les
            .into_iter()
            .enumerate()
            .map(|(i, (le, regime))| {
                let nt = T::one() - cumulative.clone();
                let c = nt.clone() * le.clone();
                cumulative = cumulative.clone() + c.clone();
                DistributionRow { stage: i + 1, ge: le.clone(), le, nt, c, regime }
            })
            .collect();
        Self { address, rows }
    }

    /// `sum_n C_n`.
    pub fn total_collapse(&self) -> T {
        self.rows.iter().fold(T::zero(), |acc, r| acc + r.c.clone())
    }

    pub fn c_column(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.c.clone()).collect()
    }

    pub fn le_column(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.le.clone()).collect()
    }
}

/// `B = xi_max * delta_max / (1 - xi_max)`.
pub fn collapse_bound<T: OrderedField>(system: &SystemDescriptor<T>, noise: &TriValuedNoise<T>) -> T {
    let xi = system.xi_max();
    xi.clone() * noise.delta_max() / (T::one() - xi)
}

fn prepared<T: OrderedField>(
    system: &SystemDescriptor<T>,
    noise: &TriValuedNoise<T>,
    address: &Address,
    stage: usize,
) -> Result<Vec<T>> {
    system.check_address(address)?;
    noise.check_symbols(system.symbol_count())?;
    if stage == 0 {
        return Err(Error::InvalidHorizon);
    }
    if address.stage() < stage {
        return Err(Error::BadAddress(format!(
            "address {address} has {} symbols, stage {stage} needs that many",
            address.stage()
        )));
    }
    Ok(system.prefix_products(address))
}

fn regime_of<T: OrderedField>(prev: &T, cur: &T, bound: &T) -> RegimeClass {
    if cur > bound {
        RegimeClass::NoCollapsePossible
    } else if prev > bound {
        RegimeClass::Transitional
    } else {
        RegimeClass::Deep
    }
}

fn checked_regime<T: OrderedField>(
    system: &SystemDescriptor<T>,
    noise: &TriValuedNoise<T>,
    products: &[T],
    stage: usize,
) -> Result<RegimeClass> {
    let bound = collapse_bound(system, noise);
    let regime = regime_of(&products[stage - 1], &products[stage], &bound);
    if regime == RegimeClass::Deep {
        let cond = validate_case1(system, noise);
        if !cond.holds {
            return Err(Error::Case1ConditionViolated {
                stage,
                xi_max: system.xi_max().to_f64().unwrap_or(f64::NAN),
                bound: cond.rhs,
            });
        }
    }
    Ok(regime)
}

/// Regime of `stage` along `address` (the first `stage` symbols are used).
pub fn classify_regime<T: OrderedField>(
    system: &SystemDescriptor<T>,
    noise: &TriValuedNoise<T>,
    address: &Address,
    stage: usize,
) -> Result<RegimeClass> {
    let products = prepared(system, noise, address, stage)?;
    checked_regime(system, noise, &products, stage)
}

fn le_from_regime<T: OrderedField>(
    system: &SystemDescriptor<T>,
    noise: &TriValuedNoise<T>,
    product: &T,
    regime: RegimeClass,
) -> T {
    match regime {
        RegimeClass::NoCollapsePossible => T::zero(),
        RegimeClass::Deep => T::one() / T::from_u8(3).expect("3 is representable"),
        RegimeClass::Transitional => {
            let xi = system.xi_max();
            let xd = xi.clone() * noise.delta_max();
            let two = T::one() + T::one();
            let le = (xd.clone() - (T::one() - xi) * product.clone()) / (two * xd);
            if le < T::zero() {
                T::zero()
            } else if le > T::one() {
                T::one()
            } else {
                le
            }
        }
    }
}

/// Conditional collapse probability at `stage` given survival so far.
pub fn le_case1<T: OrderedField>(
    system: &SystemDescriptor<T>,
    noise: &TriValuedNoise<T>,
    address: &Address,
    stage: usize,
) -> Result<T> {
    let products = prepared(system, noise, address, stage)?;
    let regime = checked_regime(system, noise, &products, stage)?;
    Ok(le_from_regime(system, noise, &products[stage], regime))
}

/// Analytic table for stages `1..=max_stage` along `address`.
pub fn distribution_case1<T: OrderedField>(
    system: &SystemDescriptor<T>,
    noise: &TriValuedNoise<T>,
    address: &Address,
    max_stage: usize,
) -> Result<DistributionTable<T>> {
    let products = prepared(system, noise, address, max_stage)?;
    let les = (1..=max_stage)
        .map(|n| {
            let regime = checked_regime(system, noise, &products, n)?;
            Ok((le_from_regime(system, noise, &products[n], regime), Some(regime)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistributionTable::from_le(address.prefix(max_stage), les))
}

/// Integer tallies of the enumeration at one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageCounts {
    pub stage: usize,
    /// Sequences of length `stage - 1` with no collapse so far.
    pub alive_before: u64,
    /// Sequences of length `stage` whose first collapse is at `stage`.
    pub collapsed: u64,
}

impl StageCounts {
    /// All surviving prefixes collapse on their negative kick, and only then.
    pub fn is_exact_third(&self) -> bool {
        self.alive_before > 0 && self.collapsed == self.alive_before
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration<T> {
    pub address: Address,
    pub counts: Vec<StageCounts>,
    pub table: DistributionTable<T>,
}

// Prefixes expanded before the subtrees are handed to rayon.
const SPLIT_STAGE: usize = 4;

struct Walk<'a, T> {
    products: &'a [T],
    kicks: Vec<[T; 3]>,
    ratios: Vec<T>,
}

impl<T: OrderedField> Walk<'_, T> {
    /// Depth-first from a live state at `stage - 1` with noise term `n`.
    fn descend(&self, stage: usize, n: &T, counts: &mut [u64]) {
        if stage > self.ratios.len() {
            return;
        }
        for kick in &self.kicks[stage - 1] {
            let shifted = n.clone() + kick.clone();
            // L_{n-1} + delta = prod_{n-1} + N_{n-1} + delta
            if self.products[stage - 1].clone() + shifted.clone() <= T::zero() {
                counts[stage - 1] += 1;
            } else {
                self.descend(stage + 1, &(self.ratios[stage - 1].clone() * shifted), counts);
            }
        }
    }

    fn frontier(&self, depth: usize, counts: &mut [u64]) -> Vec<T> {
        let mut live = vec![T::zero()];
        for stage in 1..=depth {
            let mut next = Vec::with_capacity(live.len() * 3);
            for n in &live {
                for kick in &self.kicks[stage - 1] {
                    let shifted = n.clone() + kick.clone();
                    if self.products[stage - 1].clone() + shifted.clone() <= T::zero() {
                        counts[stage - 1] += 1;
                    } else {
                        next.push(self.ratios[stage - 1].clone() * shifted);
                    }
                }
            }
            live = next;
        }
        live
    }
}

/// Exact first-collapse statistics over all `3^n` equiprobable kick
/// sequences along `address`. Collapsed prefixes are pruned, so later
/// stages only see survivors.
pub fn exact_enumeration<T>(
    system: &SystemDescriptor<T>,
    noise: &TriValuedNoise<T>,
    address: &Address,
    max_stage: usize,
) -> Result<Enumeration<T>>
where
    T: OrderedField + Send + Sync,
{
    if max_stage > MAX_ENUMERATION_STAGE {
        return Err(Error::BudgetExceeded { stages: max_stage, max: MAX_ENUMERATION_STAGE });
    }
    let products = prepared(system, noise, address, max_stage)?;
    let symbols = &address.symbols()[..max_stage];
    let walk = Walk {
        products: &products,
        kicks: symbols.iter().map(|&j| noise.outcomes(j)).collect(),
        ratios: symbols.iter().map(|&j| system.ratio(j)).collect(),
    };
    let split = SPLIT_STAGE.min(max_stage);
    let mut collapsed = vec![0u64; max_stage];
    let live = walk.frontier(split, &mut collapsed);
    let deeper = live
        .par_iter()
        .map(|n| {
            let mut c = vec![0u64; max_stage];
            walk.descend(split + 1, n, &mut c);
            c
        })
        .reduce(
            || vec![0u64; max_stage],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    collapsed.iter_mut().zip(deeper).for_each(|(x, y)| *x += y);

    let bound = collapse_bound(system, noise);
    let mut alive = 1u64;
    let mut counts = Vec::with_capacity(max_stage);
    let mut les = Vec::with_capacity(max_stage);
    for (i, &c) in collapsed.iter().enumerate() {
        let stage = i + 1;
        counts.push(StageCounts { stage, alive_before: alive, collapsed: c });
        let le = if alive == 0 {
            T::zero()
        } else {
            T::from_u64(c).expect("count fits") / T::from_u64(3 * alive).expect("count fits")
        };
        les.push((le, Some(regime_of(&products[i], &products[stage], &bound))));
        alive = 3 * alive - c;
    }
    Ok(Enumeration {
        address: address.prefix(max_stage),
        counts,
        table: DistributionTable::from_le(address.prefix(max_stage), les),
    })
}
