//! Collapse distribution for noise with a density.
//!
//! The density of the noise term is pushed forward one stage at a time:
//! convolve with the next kick density, scale by the ratio, read off the
//! mass below `-prod_n`, cut that mass away and renormalize. Every density
//! lives on a uniform grid (see [`DensityGrid`]).

use num_traits::Zero;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::case1::DistributionTable;
use crate::error::{Error, Result};
use crate::ifs::{Address, SystemDescriptor};
use crate::noise::density::DEFAULT_RESOLUTION;
use crate::noise::{DensityGrid, DensityNoise};
use crate::scalar::Real;

/// Largest grid the pipeline will build.
pub const DEFAULT_POINT_BUDGET: usize = 1 << 22;
/// Collapse probabilities this close to 1 leave nothing to renormalize.
pub const DEGENERATE_TOL: f64 = 1e-12;
/// Tolerated gap between a given collapse probability and the grid's own tail mass.
pub const CONSISTENCY_TOL: f64 = 1e-3;

// Products of grid sizes above this use the FFT.
const DIRECT_LIMIT: usize = 1 << 15;

/// Density of `ratio * X` from the density of `X`.
pub fn scale_density<T: Real>(grid: &DensityGrid<T>, ratio: T) -> Result<DensityGrid<T>> {
    if !(ratio > T::zero() && ratio < T::one()) {
        return Err(Error::RatioOutOfRange { index: 0, value: ratio.as_f64() });
    }
    let values = grid.values().iter().map(|v| *v / ratio).collect();
    DensityGrid::from_raw(grid.lower() * ratio, grid.spacing() * ratio, values)
}

fn trapezoid_weighted<T: Real>(grid: &DensityGrid<T>) -> Vec<T> {
    let mut w = grid.values().to_vec();
    let n = w.len();
    let half = T::of(0.5);
    w[0] *= half;
    w[n - 1] *= half;
    w
}

fn common_spacing<T: Real>(
    a: &DensityGrid<T>,
    b: &DensityGrid<T>,
    budget: usize,
) -> Result<(DensityGrid<T>, DensityGrid<T>)> {
    let (ha, hb) = (a.spacing(), b.spacing());
    if (ha - hb).abs() <= T::epsilon() * T::of(16.0) * ha.max(hb) {
        return Ok((a.clone(), b.clone()));
    }
    let h = ha.min(hb);
    let need = |g: &DensityGrid<T>| ((g.upper() - g.lower()) / h).ceil().to_usize().unwrap_or(usize::MAX).saturating_add(1);
    let points = need(a).saturating_add(need(b));
    if points > budget {
        return Err(Error::ResolutionOverflow { points, budget });
    }
    let fix = |g: &DensityGrid<T>| if g.spacing() == h { Ok(g.clone()) } else { g.resample_to_spacing(h) };
    Ok((fix(a)?, fix(b)?))
}

fn checked_output_len(na: usize, nb: usize, budget: usize) -> Result<usize> {
    let points = na + nb - 1;
    if points > budget {
        Err(Error::ResolutionOverflow { points, budget })
    } else {
        Ok(points)
    }
}

fn assemble<T: Real>(a: &DensityGrid<T>, b: &DensityGrid<T>, raw: Vec<T>) -> Result<DensityGrid<T>> {
    let h = a.spacing();
    let values: Vec<T> = raw.into_iter().map(|v| (v * h).max(T::zero())).collect();
    let out = DensityGrid::from_raw(a.lower() + b.lower(), h, values)?;
    // the discrete sum already carries ma * mb up to the two end cells
    let m = out.mass();
    if m > T::zero() {
        Ok(out.scaled_values(a.mass() * b.mass() / m))
    } else {
        Ok(out)
    }
}

/// Convolution by direct summation. Grids must share a spacing.
pub fn convolve_direct<T: Real>(a: &DensityGrid<T>, b: &DensityGrid<T>, budget: usize) -> Result<DensityGrid<T>> {
    let len = checked_output_len(a.len(), b.len(), budget)?;
    let (wa, wb) = (trapezoid_weighted(a), trapezoid_weighted(b));
    let mut raw = vec![T::zero(); len];
    for (i, x) in wa.iter().enumerate() {
        for (j, y) in wb.iter().enumerate() {
            raw[i + j] += *x * *y;
        }
    }
    assemble(a, b, raw)
}

/// Convolution through the FFT. Grids must share a spacing.
pub fn convolve_fft<T: Real>(a: &DensityGrid<T>, b: &DensityGrid<T>, budget: usize) -> Result<DensityGrid<T>> {
    let len = checked_output_len(a.len(), b.len(), budget)?;
    let n = len.next_power_of_two();
    let pad = |w: Vec<T>| {
        let mut v: Vec<Complex<T>> = w.into_iter().map(|x| Complex::new(x, T::zero())).collect();
        v.resize(n, Complex::zero());
        v
    };
    let (mut fa, mut fb) = (pad(trapezoid_weighted(a)), pad(trapezoid_weighted(b)));
    let mut planner = FftPlanner::<T>::new();
    let forward = planner.plan_fft_forward(n);
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    planner.plan_fft_inverse(n).process(&mut fa);
    let scale = T::of_usize(n).recip();
    let raw = fa.into_iter().take(len).map(|c| c.re * scale).collect();
    assemble(a, b, raw)
}

/// Density of `X + Y` for independent `X`, `Y`.
///
/// Unequal spacings are resampled to the finer one first.
pub fn convolve<T: Real>(a: &DensityGrid<T>, b: &DensityGrid<T>, budget: usize) -> Result<DensityGrid<T>> {
    let (a, b) = common_spacing(a, b, budget)?;
    if a.len().saturating_mul(b.len()) <= DIRECT_LIMIT {
        convolve_direct(&a, &b, budget)
    } else {
        convolve_fft(&a, &b, budget)
    }
}

/// Mass of `grid` over `(-inf, cutoff]`.
pub fn tail_mass<T: Real>(grid: &DensityGrid<T>, cutoff: T) -> T {
    grid.mass_below(cutoff).max(T::zero()).min(T::one())
}

/// Removes the mass at or below `threshold` and divides by `1 - collapse_prob`.
///
/// The result keeps the point count and spans `[threshold, upper]` when
/// the cut falls inside the support.
pub fn truncate_renormalize<T: Real>(grid: &DensityGrid<T>, threshold: T, collapse_prob: T) -> Result<DensityGrid<T>> {
    let degenerate = || Error::DegenerateDensity { collapse_prob: collapse_prob.as_f64() };
    if collapse_prob >= T::one() - T::of(DEGENERATE_TOL) || threshold >= grid.upper() {
        return Err(degenerate());
    }
    let tail = tail_mass(grid, threshold);
    if (tail - collapse_prob).abs() > T::of(CONSISTENCY_TOL) {
        log::warn!(
            "collapse probability {collapse_prob} differs from the density's tail mass {tail} below {threshold}"
        );
    }
    let keep = T::one() - collapse_prob;
    if threshold <= grid.lower() {
        return Ok(grid.clone().scaled_values(keep.recip()));
    }
    let n = grid.len();
    let spacing = (grid.upper() - threshold) / T::of_usize(n - 1);
    let values = (0..n).map(|i| grid.value_at(threshold + spacing * T::of_usize(i))).collect();
    let cut = DensityGrid::from_raw(threshold, spacing, values)?;
    let m = cut.mass();
    if !(m > T::zero()) {
        return Err(degenerate());
    }
    Ok(cut.scaled_values((grid.mass() - tail) / (m * keep)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case2Options {
    /// Grid points kept per stage.
    pub resolution: usize,
    pub point_budget: usize,
    pub keep_densities: bool,
}

impl Default for Case2Options {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            point_budget: DEFAULT_POINT_BUDGET,
            keep_densities: false,
        }
    }
}

/// Conditional density of the noise term after `stage`, given survival.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationState<T> {
    pub stage: usize,
    pub density: DensityGrid<T>,
    pub cumulative_collapse: T,
    pub nt: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case2Result<T> {
    pub table: DistributionTable<T>,
    /// One entry per stage when densities were requested.
    pub states: Vec<PropagationState<T>>,
}

/// Stage-by-stage collapse table along `address`.
///
/// The kick density of symbol `j` is `noise.grid(j)`.
pub fn distribution_case2<T: Real>(
    system: &SystemDescriptor<T>,
    noise: &DensityNoise<T>,
    address: &Address,
    max_stage: usize,
    options: &Case2Options,
) -> Result<Case2Result<T>> {
    if max_stage == 0 {
        return Err(Error::InvalidHorizon);
    }
    system.check_address(address)?;
    if address.stage() < max_stage {
        return Err(Error::BadAddress(format!(
            "address {address} has {} symbols, stage {max_stage} needs that many",
            address.stage()
        )));
    }
    if options.resolution < 2 || options.resolution > options.point_budget {
        return Err(Error::ResolutionOverflow { points: options.resolution, budget: options.point_budget });
    }
    let products = system.prefix_products(address);
    let mut conditional: Option<DensityGrid<T>> = None;
    let mut cumulative = T::zero();
    let mut les = Vec::with_capacity(max_stage);
    let mut states = Vec::new();
    for stage in 1..=max_stage {
        let j = address.symbols()[stage - 1];
        let kick = noise.grid(j);
        let ratio = system.ratio(j);
        let before = match &conditional {
            None => scale_density(kick, ratio)?,
            Some(prev) => scale_density(&convolve(prev, kick, options.point_budget)?, ratio)?,
        };
        let before = before.resample_to_points(options.resolution)?;
        let cutoff = -products[stage];
        let le = tail_mass(&before, cutoff);
        let nt = T::one() - cumulative;
        cumulative += nt * le;
        les.push((le, None));
        if stage < max_stage || options.keep_densities {
            let after = truncate_renormalize(&before, cutoff, le)?;
            if options.keep_densities {
                states.push(PropagationState {
                    stage,
                    density: after.clone(),
                    cumulative_collapse: cumulative,
                    nt,
                });
            }
            conditional = Some(after);
        }
    }
    Ok(Case2Result {
        table: DistributionTable::from_le(address.prefix(max_stage), les),
        states,
    })
}
