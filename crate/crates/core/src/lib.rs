//! Random self-similar sets whose generating-set diameters are perturbed
//! at every stage, and the probability that a branch collapses.
//!
//! Numerical code is generic over [`scalar::Real`] (`f32`, `f64`); the
//! address products and the three-valued enumeration also accept exact
//! rationals through [`scalar::OrderedField`]. The aliases below fix `f64`,
//! with `*32` variants for single precision.

pub mod case1;
pub mod case2;
pub mod chaos;
pub mod error;
pub mod ifs;
pub mod noise;
pub mod rng;
pub mod scalar;
pub mod sim;

pub use case1::{
    classify_regime, distribution_case1, exact_enumeration, le_case1, DistributionRow, DistributionTable,
    Enumeration, RegimeClass, StageCounts,
};
pub use case2::{
    convolve, distribution_case2, scale_density, tail_mass, truncate_renormalize, Case2Options, Case2Result,
    PropagationState,
};
pub use chaos::{
    compute_l, compute_n0, run_until_truncation, tent_step, verify_truncation_bound, TentState, TruncationBounds,
    TruncationReport, TruncationSummary,
};
pub use error::{Error, Result};
pub use ifs::{emit_intervals, enumerate_addresses, validate_system, Address, AddressTree, SystemDescriptor};
pub use noise::{
    build_density, DensityFamily, DensityGrid, DensityNoise, NoiseModel, TentNoise, TentVariant, TriValuedNoise,
    UnitRational,
};
pub use scalar::{OrderedField, Real};
pub use sim::{monte_carlo_distribution, run_path, run_tree, AddressPolicy, EmpiricalDistribution, Simulation};

pub type System = SystemDescriptor<f64>;
pub type System32 = SystemDescriptor<f32>;
pub type SystemExact = SystemDescriptor<num_rational::BigRational>;
pub type Noise = NoiseModel<f64>;
pub type Noise32 = NoiseModel<f32>;
pub type Density = DensityGrid<f64>;
pub type Density32 = DensityGrid<f32>;
pub type Table = DistributionTable<f64>;
pub type TableExact = DistributionTable<num_rational::BigRational>;
