//! Disturbance sources for the diameter recursion and the parameter
//! conditions the analytic results depend on.

pub mod density;

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ifs::{approx_f64, SystemDescriptor};
use crate::scalar::{OrderedField, Real};

pub use density::{
    build_density, sample_density, DensityFamily, DensityGrid, DensitySampler, FamilyParams,
};

/// Exact point of the unit interval, used for tent-map states.
pub type UnitRational = Ratio<u64>;

/// Noise taking `-delta_i`, `0`, `+delta_i` with probability 1/3 each,
/// one amplitude per symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct TriValuedNoise<T> {
    deltas: Vec<T>,
    delta_max: T,
    delta_min: T,
}

impl<T: OrderedField> TriValuedNoise<T> {
    /// Amplitudes must lie in `[0, 1)`; zero gives a noiseless symbol.
    pub fn new(deltas: Vec<T>) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::BadParameters("tri-valued noise needs at least one amplitude".into()));
        }
        for d in &deltas {
            if !(*d >= T::zero() && *d < T::one()) {
                return Err(Error::BadParameters(format!(
                    "amplitude {} is outside [0, 1)",
                    approx_f64(d)
                )));
            }
        }
        let pick = |better: fn(&T, &T) -> bool| {
            deltas
                .iter()
                .cloned()
                .reduce(|a, b| if better(&b, &a) { b } else { a })
                .expect("non-empty")
        };
        let delta_max = pick(|b, a| b > a);
        let delta_min = pick(|b, a| b < a);
        Ok(Self { deltas, delta_max, delta_min })
    }

    /// Same amplitude for all `symbols` maps.
    pub fn uniform(delta: T, symbols: usize) -> Result<Self> {
        Self::new(vec![delta; symbols])
    }

    pub fn deltas(&self) -> &[T] {
        &self.deltas
    }

    /// Amplitude for the 1-based `symbol`; a single amplitude is shared by all symbols.
    pub fn delta(&self, symbol: usize) -> T {
        if self.deltas.len() == 1 {
            self.deltas[0].clone()
        } else {
            self.deltas[symbol - 1].clone()
        }
    }

    pub fn delta_max(&self) -> T {
        self.delta_max.clone()
    }

    pub fn delta_min(&self) -> T {
        self.delta_min.clone()
    }

    pub(crate) fn check_symbols(&self, symbols: usize) -> Result<()> {
        if self.deltas.len() == 1 || self.deltas.len() == symbols {
            Ok(())
        } else {
            Err(Error::BadParameters(format!(
                "{} amplitudes given for {symbols} maps",
                self.deltas.len()
            )))
        }
    }

    /// The three equiprobable values for `symbol`, in the order `-, 0, +`.
    pub fn outcomes(&self, symbol: usize) -> [T; 3] {
        let d = self.delta(symbol);
        [-d.clone(), T::zero(), d]
    }

    /// Same noise over another scalar type.
    pub fn convert<U: OrderedField>(&self, f: impl Fn(&T) -> Option<U>) -> Result<TriValuedNoise<U>> {
        let deltas = self
            .deltas
            .iter()
            .map(|d| f(d).ok_or_else(|| Error::BadParameters(format!("amplitude {} is not convertible", approx_f64(d)))))
            .collect::<Result<Vec<_>>>()?;
        TriValuedNoise::new(deltas)
    }

    /// One draw for `symbol`.
    pub fn sample<R: Rng + ?Sized>(&self, symbol: usize, rng: &mut R) -> T {
        let [minus, zero, plus] = self.outcomes(symbol);
        match rng.random_range(0..3u8) {
            0 => minus,
            1 => zero,
            _ => plus,
        }
    }
}

/// Free-function form of [`TriValuedNoise::sample`].
pub fn sample_trivalued<T: OrderedField, R: Rng + ?Sized>(
    noise: &TriValuedNoise<T>,
    symbol: usize,
    rng: &mut R,
) -> T {
    noise.sample(symbol, rng)
}

/// Which event the tent-driven sign rule pushes towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TentVariant {
    /// `-eps` below 1/2, `+eps` from 1/2 up.
    Collapse,
    /// Signs flipped.
    Merge,
}

impl FromStr for TentVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "collapse" | "collapse-directed" => Ok(Self::Collapse),
            "merge" | "merge-directed" => Ok(Self::Merge),
            other => Err(Error::BadParameters(format!("unknown tent variant {other:?}"))),
        }
    }
}

impl fmt::Display for TentVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Collapse => "collapse",
            Self::Merge => "merge",
        })
    }
}

/// Deterministic noise driven by the tent map.
#[derive(Debug, Clone, PartialEq)]
pub struct TentNoise<T> {
    epsilon: T,
    x0: UnitRational,
    variant: TentVariant,
}

impl<T: Real> TentNoise<T> {
    pub fn new(epsilon: T, x0: UnitRational, variant: TentVariant) -> Result<Self> {
        if !(epsilon > T::zero() && epsilon < T::one()) {
            return Err(Error::BadParameters(format!("epsilon {epsilon} is outside (0, 1)")));
        }
        if x0 > UnitRational::from_integer(1) {
            return Err(Error::BadParameters(format!("x0 {x0} is outside [0, 1]")));
        }
        Ok(Self { epsilon, x0, variant })
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn x0(&self) -> UnitRational {
        self.x0
    }

    pub fn variant(&self) -> TentVariant {
        self.variant
    }

    pub fn with_x0(&self, x0: UnitRational) -> Result<Self> {
        Self::new(self.epsilon, x0, self.variant)
    }
}

/// Parses `"p/q"` (or an integer `0`/`1`) into an exact point of `[0, 1]`.
pub fn parse_unit_rational(s: &str) -> Result<UnitRational> {
    let x: UnitRational = s
        .trim()
        .parse()
        .map_err(|_| Error::BadParameters(format!("cannot parse {s:?} as a fraction p/q")))?;
    if x > UnitRational::from_integer(1) {
        return Err(Error::BadParameters(format!("{s} is outside [0, 1]")));
    }
    Ok(x)
}

/// True when `x < 1/2`.
pub fn below_half(x: &UnitRational) -> bool {
    x.numer().checked_mul(2).is_some_and(|n2| n2 < *x.denom())
}

/// Sign rule of the tent-driven noise evaluated at `x`.
pub fn tent_delta<T: Real>(x: &UnitRational, noise: &TentNoise<T>) -> T {
    let negative = match noise.variant {
        TentVariant::Collapse => below_half(x),
        TentVariant::Merge => !below_half(x),
    };
    if negative { -noise.epsilon } else { noise.epsilon }
}

/// Outcome of checking one of the analytic hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// The inequality being checked, in plain text.
    pub inequality: &'static str,
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} ({} vs {})",
            self.inequality,
            if self.holds { "holds" } else { "fails" },
            self.lhs,
            self.rhs
        )
    }
}

pub const CASE1_INEQUALITY: &str = "xi_max <= delta_min / (2 delta_max + delta_min)";
pub const TENT_INEQUALITY: &str = "xi_max + epsilon / (1 - xi_max) < 1";

/// Checks `xi_max <= delta_min / (2 delta_max + delta_min)`; equality holds.
pub fn validate_case1<T: OrderedField>(
    system: &SystemDescriptor<T>,
    noise: &TriValuedNoise<T>,
) -> ConditionReport {
    let xi = system.xi_max();
    let (dmax, dmin) = (noise.delta_max(), noise.delta_min());
    let two = T::one() + T::one();
    let denom = two * dmax + dmin.clone();
    let holds = denom > T::zero() && xi.clone() * denom.clone() <= dmin.clone();
    let rhs = if denom > T::zero() { approx_f64(&(dmin / denom)) } else { 0.0 };
    ConditionReport {
        holds,
        lhs: approx_f64(&xi),
        rhs,
        inequality: CASE1_INEQUALITY,
    }
}

/// Checks `xi_max + epsilon / (1 - xi_max) < 1`.
pub fn validate_tent<T: Real>(system: &SystemDescriptor<T>, noise: &TentNoise<T>) -> ConditionReport {
    tent_condition(system.xi_max(), noise.epsilon())
}

pub(crate) fn tent_condition<T: Real>(xi: T, epsilon: T) -> ConditionReport {
    let lhs = xi + epsilon / (T::one() - xi);
    ConditionReport {
        holds: lhs < T::one(),
        lhs: lhs.as_f64(),
        rhs: 1.0,
        inequality: TENT_INEQUALITY,
    }
}

/// Per-symbol densities (a single grid is shared by all symbols).
#[derive(Debug, Clone)]
pub struct DensityNoise<T> {
    samplers: Vec<DensitySampler<T>>,
}

impl<T: Real> DensityNoise<T> {
    pub fn new(grids: Vec<DensityGrid<T>>) -> Result<Self> {
        if grids.is_empty() {
            return Err(Error::BadParameters("density noise needs at least one grid".into()));
        }
        Ok(Self {
            samplers: grids.iter().map(DensityGrid::sampler).collect(),
        })
    }

    pub fn shared(grid: DensityGrid<T>) -> Self {
        Self { samplers: vec![grid.sampler()] }
    }

    pub fn grid(&self, symbol: usize) -> &DensityGrid<T> {
        self.sampler(symbol).grid()
    }

    pub fn sampler(&self, symbol: usize) -> &DensitySampler<T> {
        if self.samplers.len() == 1 {
            &self.samplers[0]
        } else {
            &self.samplers[symbol - 1]
        }
    }

    pub fn grid_count(&self) -> usize {
        self.samplers.len()
    }
}

/// The disturbance applied at each stage.
#[derive(Debug, Clone)]
pub enum NoiseModel<T> {
    /// No disturbance.
    Zero,
    TriValued(TriValuedNoise<T>),
    Density(DensityNoise<T>),
    Tent(TentNoise<T>),
}

impl<T: Real> NoiseModel<T> {
    /// Checks per-symbol data against the number of maps.
    pub fn check_symbols(&self, symbols: usize) -> Result<()> {
        match self {
            NoiseModel::TriValued(n) => n.check_symbols(symbols),
            NoiseModel::Density(d) if d.grid_count() != 1 && d.grid_count() != symbols => {
                Err(Error::BadParameters(format!(
                    "{} densities given for {symbols} maps",
                    d.grid_count()
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn is_merge_directed(&self) -> bool {
        matches!(self, NoiseModel::Tent(t) if t.variant() == TentVariant::Merge)
    }
}
