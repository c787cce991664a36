//! Self-similar systems described by their contraction ratios.
//!
//! Only the diameters of generating sets matter for collapse, so a system
//! is reduced to its list of ratios. The root set always has diameter 1.
//! The open-set condition on the underlying maps cannot be checked from
//! ratios alone and is assumed.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::{OrderedField, Real};

/// Default cap on the number of nodes in an address tree.
pub const DEFAULT_NODE_BUDGET: usize = 1 << 22;

/// Contraction ratios of an iterated function system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDescriptor<T> {
    ratios: Vec<T>,
    xi_max: T,
}

impl<T: OrderedField> SystemDescriptor<T> {
    /// Checks `0 < ratio < 1` for every ratio and that there are at least two maps.
    pub fn new(ratios: Vec<T>) -> Result<Self> {
        if ratios.len() < 2 {
            return Err(Error::TooFewMaps {
                count: ratios.len(),
            });
        }
        for (index, r) in ratios.iter().enumerate() {
            if !(*r > T::zero() && *r < T::one()) {
                return Err(Error::RatioOutOfRange {
                    index,
                    value: approx_f64(r),
                });
            }
        }
        let xi_max = ratios
            .iter()
            .cloned()
            .reduce(|a, b| if b > a { b } else { a })
            .expect("non-empty");
        Ok(Self { ratios, xi_max })
    }

    pub fn ratios(&self) -> &[T] {
        &self.ratios
    }

    /// The largest contraction ratio.
    pub fn xi_max(&self) -> T {
        self.xi_max.clone()
    }

    /// Number of maps K.
    pub fn symbol_count(&self) -> usize {
        self.ratios.len()
    }

    /// Ratio of the 1-based `symbol`.
    pub fn ratio(&self, symbol: usize) -> T {
        self.ratios[symbol - 1].clone()
    }

    /// Noiseless diameter of the generating set at `address`: the product
    /// of its ratios, 1 at the root.
    pub fn noiseless_diameter(&self, address: &Address) -> T {
        address
            .symbols()
            .iter()
            .fold(T::one(), |acc, &j| acc * self.ratio(j))
    }

    /// Products of the first `n` ratios along `address`, for `n = 0..=len`.
    pub fn prefix_products(&self, address: &Address) -> Vec<T> {
        let mut out = Vec::with_capacity(address.stage() + 1);
        let mut acc = T::one();
        out.push(acc.clone());
        for &j in address.symbols() {
            acc = acc * self.ratio(j);
            out.push(acc.clone());
        }
        out
    }

    pub fn check_address(&self, address: &Address) -> Result<()> {
        address.check(self.symbol_count())
    }

    /// Maps the ratios into another scalar type, e.g. exact rationals.
    pub fn convert<U: OrderedField>(&self, f: impl Fn(&T) -> Option<U>) -> Result<SystemDescriptor<U>> {
        let ratios = self
            .ratios
            .iter()
            .enumerate()
            .map(|(index, r)| {
                f(r).ok_or(Error::RatioOutOfRange {
                    index,
                    value: approx_f64(r),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SystemDescriptor::new(ratios)
    }
}

/// Builds a [`SystemDescriptor`] from raw ratios.
pub fn validate_system<T: OrderedField>(ratios: &[T]) -> Result<SystemDescriptor<T>> {
    SystemDescriptor::new(ratios.to_vec())
}

impl<T: Real> SystemDescriptor<T> {
    /// Similarity dimension: the root `s` of `sum_j ratio_j^s = 1`.
    ///
    /// Bisection on `[0, ln K / ln(1/xi_max) + 1]`; the sum is strictly
    /// decreasing in `s`, equals `K - 1 > 0` at the left end and is below
    /// zero at the right end. Bisection runs down to floating resolution
    /// and the residual is then checked against `tol`.
    pub fn moran_dimension(&self, tol: T) -> Result<T> {
        let residual = |s: T| self.ratios.iter().map(|r| r.powf(s)).sum::<T>() - T::one();
        let k = T::of_usize(self.symbol_count());
        let mut lo = T::zero();
        let mut hi = k.ln() / self.xi_max.recip().ln() + T::one();
        let max_iterations = 400;
        for _ in 0..max_iterations {
            let mid = (lo + hi) / T::of(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            if residual(mid) > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (rlo, rhi) = (residual(lo).abs(), residual(hi).abs());
        let (s, r) = if rlo <= rhi { (lo, rlo) } else { (hi, rhi) };
        if r <= tol {
            Ok(s)
        } else {
            Err(Error::ToleranceNotMet {
                tol: tol.as_f64(),
                iterations: max_iterations,
            })
        }
    }
}

pub(crate) fn approx_f64<T: num_traits::ToPrimitive>(x: &T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Index string `j_1 ... j_n` of a generating set, 1-based symbols.
///
/// Serialized as dot-separated symbols (`"1.2.1"`); the root is `""`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address(Vec<usize>);

impl Address {
    pub fn root() -> Self {
        Address(Vec::new())
    }

    pub fn new(symbols: Vec<usize>) -> Self {
        Address(symbols)
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    /// Stage of the generating set (the root is stage 0).
    pub fn stage(&self) -> usize {
        self.0.len()
    }

    pub fn child(&self, symbol: usize) -> Address {
        let mut s = self.0.clone();
        s.push(symbol);
        Address(s)
    }

    pub fn prefix(&self, n: usize) -> Address {
        Address(self.0[..n.min(self.0.len())].to_vec())
    }

    /// Repeats `pattern` cyclically up to `len` symbols.
    pub fn cyclic(pattern: &[usize], len: usize) -> Address {
        Address(pattern.iter().copied().cycle().take(len).collect())
    }

    pub fn check(&self, symbols: usize) -> Result<()> {
        match self.0.iter().find(|&&j| j == 0 || j > symbols) {
            Some(&symbol) => Err(Error::SymbolOutOfRange { symbol, symbols }),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, j) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{j}")?;
        }
        Ok(())
    }
}

impl FromStr for Address {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Address::root());
        }
        s.split('.')
            .map(|part| match part.trim().parse::<usize>() {
                Ok(j) if j >= 1 => Ok(j),
                _ => Err(Error::BadAddress(s.to_string())),
            })
            .collect::<Result<Vec<_>>>()
            .map(Address)
    }
}

/// One node of an address tree.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingSetRecord<T> {
    pub address: Address,
    /// Observed diameter; non-positive exactly when `collapsed`.
    pub diameter: T,
    pub noise_term: T,
    pub collapsed: bool,
}

/// Address tree in breadth-first order, root first.
///
/// Collapsed nodes are kept but have no children.
#[derive(Debug, Clone, PartialEq)]
pub struct AddressTree<T> {
    pub depth: usize,
    pub nodes: Vec<GeneratingSetRecord<T>>,
}

impl<T: Clone> AddressTree<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes at full depth that did not collapse.
    pub fn alive_leaves(&self) -> impl Iterator<Item = &GeneratingSetRecord<T>> {
        self.nodes
            .iter()
            .filter(move |n| n.address.stage() == self.depth && !n.collapsed)
    }

    pub fn collapsed(&self) -> impl Iterator<Item = &GeneratingSetRecord<T>> {
        self.nodes.iter().filter(|n| n.collapsed)
    }
}

/// Number of nodes of a complete K-ary tree of the given depth.
pub fn complete_tree_size(symbols: usize, depth: usize) -> u128 {
    let k = symbols as u128;
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for _ in 0..=depth {
        total = total.saturating_add(level);
        level = level.saturating_mul(k);
    }
    total
}

pub(crate) fn check_node_budget(symbols: usize, depth: usize, budget: usize) -> Result<()> {
    let nodes = complete_tree_size(symbols, depth);
    if nodes > budget as u128 {
        Err(Error::DepthTooLarge { nodes, budget })
    } else {
        Ok(())
    }
}

/// Complete address tree to `depth` annotated with noiseless diameters.
pub fn enumerate_addresses<T: OrderedField>(
    system: &SystemDescriptor<T>,
    depth: usize,
    budget: usize,
) -> Result<AddressTree<T>> {
    let k = system.symbol_count();
    check_node_budget(k, depth, budget)?;
    let mut nodes = vec![GeneratingSetRecord {
        address: Address::root(),
        diameter: T::one(),
        noise_term: T::zero(),
        collapsed: false,
    }];
    let mut level_start = 0;
    for _ in 0..depth {
        let level_end = nodes.len();
        for parent in level_start..level_end {
            for j in 1..=k {
                let p = &nodes[parent];
                let rec = GeneratingSetRecord {
                    address: p.address.child(j),
                    diameter: p.diameter.clone() * system.ratio(j),
                    noise_term: T::zero(),
                    collapsed: false,
                };
                nodes.push(rec);
            }
        }
        level_start = level_end;
    }
    Ok(AddressTree { depth, nodes })
}

/// One row of 1-D interval output.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRow<T> {
    pub address: Address,
    pub length: T,
}

/// Surviving full-depth generating sets and their lengths.
pub fn emit_intervals<T: Clone>(tree: &AddressTree<T>) -> Vec<IntervalRow<T>> {
    tree.alive_leaves()
        .map(|n| IntervalRow {
            address: n.address.clone(),
            length: n.diameter.clone(),
        })
        .collect()
}
