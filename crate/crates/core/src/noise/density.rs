//! Probability densities sampled on uniform grids.
//!
//! A grid stores point values `values[i]` at `lower + i * spacing` and is
//! read as the piecewise-linear interpolant of those values, zero outside
//! `[lower, upper]`. Its mass is the trapezoid integral, which is exact for
//! that interpolant.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Minimum point count for the named families.
pub const MIN_RESOLUTION: usize = 64;
/// Default point count for named families.
pub const DEFAULT_RESOLUTION: usize = 1 << 14;
/// Mass tolerance after construction or renormalization.
pub const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid<T> {
    lower: T,
    spacing: T,
    values: Vec<T>,
}

impl<T: Real> DensityGrid<T> {
    /// Raw constructor: checks shape and signs but does not normalize.
    pub fn from_raw(lower: T, spacing: T, values: Vec<T>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::BadParameters("a density grid needs at least 2 points".into()));
        }
        if !(spacing > T::zero()) || !spacing.is_finite() || !lower.is_finite() {
            return Err(Error::BadParameters(format!(
                "grid spacing {spacing} / lower bound {lower} invalid"
            )));
        }
        if values.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::BadParameters("density values must be finite and nonnegative".into()));
        }
        Ok(Self { lower, spacing, values })
    }

    /// Tabulated density on `[lower, upper]`, rescaled to unit mass.
    pub fn tabulated(lower: T, upper: T, values: Vec<T>) -> Result<Self> {
        if !(upper > lower) {
            return Err(Error::BadParameters(format!("support [{lower}, {upper}] is empty")));
        }
        if values.len() < 2 {
            return Err(Error::BadParameters("a density grid needs at least 2 points".into()));
        }
        let spacing = (upper - lower) / T::of_usize(values.len() - 1);
        Self::from_raw(lower, spacing, values)?.normalized()
    }

    pub fn lower(&self) -> T {
        self.lower
    }

    pub fn upper(&self) -> T {
        self.lower + self.spacing * T::of_usize(self.values.len() - 1)
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> T {
        self.lower + self.spacing * T::of_usize(i)
    }

    /// Trapezoid mass.
    pub fn mass(&self) -> T {
        let n = self.values.len();
        let inner: T = self.values.iter().copied().sum();
        self.spacing * (inner - (self.values[0] + self.values[n - 1]) / T::of(2.0))
    }

    /// Rescales to unit mass.
    pub fn normalized(mut self) -> Result<Self> {
        let m = self.mass();
        if !(m > T::zero()) {
            return Err(Error::BadParameters("density has zero mass".into()));
        }
        for v in &mut self.values {
            *v /= m;
        }
        Ok(self)
    }

    pub(crate) fn scaled_values(mut self, factor: T) -> Self {
        for v in &mut self.values {
            *v *= factor;
        }
        self
    }

    /// Value of the interpolant at `x`; zero outside the support.
    pub fn value_at(&self, x: T) -> T {
        if x < self.lower || x > self.upper() {
            return T::zero();
        }
        let pos = (x - self.lower) / self.spacing;
        let last = self.values.len() - 1;
        let i = pos.floor().to_usize().unwrap_or(last).min(last);
        if i == last {
            return self.values[last];
        }
        let t = pos - T::of_usize(i);
        self.values[i] + (self.values[i + 1] - self.values[i]) * t
    }

    /// Integral of the interpolant over `(-inf, cutoff]`.
    pub fn mass_below(&self, cutoff: T) -> T {
        if cutoff <= self.lower {
            return T::zero();
        }
        if cutoff >= self.upper() {
            return self.mass();
        }
        let h = self.spacing;
        let half = T::of(0.5);
        let pos = (cutoff - self.lower) / h;
        let last = self.values.len() - 1;
        let i = pos.floor().to_usize().unwrap_or(0).min(last - 1);
        let mut acc = T::zero();
        for k in 0..i {
            acc += (self.values[k] + self.values[k + 1]) * half;
        }
        acc *= h;
        let dx = cutoff - self.point(i);
        let (a, b) = (self.values[i], self.values[i + 1]);
        acc + a * dx + (b - a) * dx * dx / (T::of(2.0) * h)
    }

    /// Resamples onto `points` evenly spaced points over the same support,
    /// then restores the original mass.
    pub fn resample_to_points(&self, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::BadParameters("resampling needs at least 2 points".into()));
        }
        if points == self.values.len() {
            return Ok(self.clone());
        }
        let spacing = (self.upper() - self.lower) / T::of_usize(points - 1);
        let values = (0..points)
            .map(|i| self.value_at(self.lower + spacing * T::of_usize(i)))
            .collect();
        Self::from_raw(self.lower, spacing, values)?.with_mass_of(self)
    }

    /// Resamples onto spacing `spacing` starting at the same lower bound;
    /// the last point may lie past `upper`, where the density is zero.
    /// The original mass is restored afterwards.
    pub fn resample_to_spacing(&self, spacing: T) -> Result<Self> {
        let width = (self.upper() - self.lower) / spacing;
        let cells = (width - T::of(1e-9)).ceil().max(T::one());
        let points = cells.to_usize().ok_or_else(|| {
            Error::BadParameters(format!("cannot resample to spacing {spacing}"))
        })? + 1;
        let values = (0..points)
            .map(|i| self.value_at(self.lower + spacing * T::of_usize(i)))
            .collect();
        Self::from_raw(self.lower, spacing, values)?.with_mass_of(self)
    }

    fn with_mass_of(self, reference: &Self) -> Result<Self> {
        let m = self.mass();
        if !(m > T::zero()) {
            return Err(Error::BadParameters("resampling lost all mass".into()));
        }
        let target = reference.mass();
        Ok(self.scaled_values(target / m))
    }

    /// Precomputes the cell masses used for inverse-CDF sampling.
    pub fn sampler(&self) -> DensitySampler<T> {
        let half = T::of(0.5);
        let mut cumulative = Vec::with_capacity(self.values.len());
        let mut acc = T::zero();
        cumulative.push(acc);
        for w in self.values.windows(2) {
            acc += (w[0] + w[1]) * half * self.spacing;
            cumulative.push(acc);
        }
        DensitySampler {
            grid: self.clone(),
            cumulative,
        }
    }
}

/// Inverse-CDF sampler for the piecewise-linear density of a grid.
#[derive(Debug, Clone)]
pub struct DensitySampler<T> {
    grid: DensityGrid<T>,
    cumulative: Vec<T>,
}

impl<T: Real> DensitySampler<T> {
    pub fn grid(&self) -> &DensityGrid<T> {
        &self.grid
    }

    /// Maps a uniform `u` in `[0, 1)` to a point of the support.
    pub fn quantile(&self, u: T) -> T {
        let total = *self.cumulative.last().expect("non-empty");
        let target = u.max(T::zero()).min(T::one()) * total;
        // first index with cumulative > target, minus one, is the cell
        let idx = self.cumulative.partition_point(|c| *c <= target);
        let cells = self.cumulative.len() - 1;
        let i = idx.saturating_sub(1).min(cells - 1);
        let r = target - self.cumulative[i];
        let h = self.grid.spacing;
        let a = self.grid.values[i];
        let b = self.grid.values[i + 1];
        // solve a t + (b - a) t^2 / (2h) = r for t in [0, h]
        let slope = (b - a) / h;
        let disc = (a * a + T::of(2.0) * slope * r).max(T::zero());
        // stable root of the quadratic; 0/0 only for an empty cell
        let t = T::of(2.0) * r / (a + disc.sqrt());
        let t = if t.is_finite() { t.max(T::zero()).min(h) } else { h * T::of(0.5) };
        self.grid.point(i) + t
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        self.quantile(T::of(rng.random::<f64>()))
    }
}

/// One draw from `grid` by inverse CDF.
///
/// Builds a sampler on every call; reuse [`DensityGrid::sampler`] in loops.
pub fn sample_density<T: Real, R: Rng + ?Sized>(grid: &DensityGrid<T>, rng: &mut R) -> T {
    grid.sampler().sample(rng)
}

/// Named density families for the noise amplitude.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityFamily<T> {
    /// Uniform on `[-beta, beta]`.
    Uniform { beta: T },
    /// Symmetric triangle on `[-beta, beta]`.
    Triangular { beta: T },
    /// Gaussian with standard deviation `sigma` cut at `+-cut * sigma`.
    TruncatedGaussian { sigma: T, cut: T },
    /// Arbitrary nonnegative values on `[lower, upper]`, renormalized.
    Tabulated { lower: T, upper: T, values: Vec<T> },
}

/// Loose parameters for constructing a family by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FamilyParams<T> {
    pub beta: Option<T>,
    pub sigma: Option<T>,
    pub cut: Option<T>,
    pub lower: Option<T>,
    pub upper: Option<T>,
    pub values: Option<Vec<T>>,
}

impl<T: Real> DensityFamily<T> {
    pub fn from_name(name: &str, p: &FamilyParams<T>) -> Result<Self> {
        let need = |v: Option<T>, field: &str| {
            v.ok_or_else(|| Error::BadParameters(format!("{name} density needs `{field}`")))
        };
        match name {
            "uniform" => Ok(Self::Uniform { beta: need(p.beta, "beta")? }),
            "triangular" => Ok(Self::Triangular { beta: need(p.beta, "beta")? }),
            "gaussian" | "truncated-gaussian" => Ok(Self::TruncatedGaussian {
                sigma: need(p.sigma, "sigma")?,
                cut: p.cut.unwrap_or(T::of(4.0)),
            }),
            "tabulated" => Ok(Self::Tabulated {
                lower: need(p.lower, "lower")?,
                upper: need(p.upper, "upper")?,
                values: p
                    .values
                    .clone()
                    .ok_or_else(|| Error::BadParameters("tabulated density needs `values`".into()))?,
            }),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }
}

/// Samples a named family on `resolution` points and normalizes it.
pub fn build_density<T: Real>(family: &DensityFamily<T>, resolution: usize) -> Result<DensityGrid<T>> {
    let positive = |v: T, what: &str| {
        if v > T::zero() && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::BadParameters(format!("{what} must be positive, got {v}")))
        }
    };
    let sampled = |lo: T, hi: T, f: &dyn Fn(T) -> T| -> Result<DensityGrid<T>> {
        if resolution < MIN_RESOLUTION {
            return Err(Error::BadParameters(format!(
                "resolution {resolution} is below the minimum {MIN_RESOLUTION}"
            )));
        }
        let h = (hi - lo) / T::of_usize(resolution - 1);
        let values = (0..resolution).map(|i| f(lo + h * T::of_usize(i))).collect();
        DensityGrid::from_raw(lo, h, values)?.normalized()
    };
    match family {
        DensityFamily::Uniform { beta } => {
            let beta = positive(*beta, "beta")?;
            let height = T::one() / (T::of(2.0) * beta);
            sampled(-beta, beta, &|_| height)
        }
        DensityFamily::Triangular { beta } => {
            let beta = positive(*beta, "beta")?;
            sampled(-beta, beta, &|x| ((beta - x.abs()) / (beta * beta)).max(T::zero()))
        }
        DensityFamily::TruncatedGaussian { sigma, cut } => {
            let sigma = positive(*sigma, "sigma")?;
            let cut = positive(*cut, "cut")?;
            let half = T::of(0.5);
            sampled(-cut * sigma, cut * sigma, &|x| {
                let z = x / sigma;
                (-(z * z) * half).exp()
            })
        }
        DensityFamily::Tabulated { lower, upper, values } => {
            DensityGrid::tabulated(*lower, *upper, values.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::unit_rng;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_family() {
        let g = build_density(&DensityFamily::Uniform { beta: 1.5_f64 }, 1 << 14).unwrap();
        assert_relative_eq!(g.lower(), -1.5);
        assert_relative_eq!(g.upper(), 1.5, epsilon = 1e-12);
        assert!(g.values().iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
        assert!((g.mass() - 1.0).abs() < MASS_TOL);
    }

    #[test]
    fn triangular_family() {
        let g = build_density(&DensityFamily::Triangular { beta: 1.0 }, 1 << 14).unwrap();
        let peak = g.values().iter().cloned().fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-3);
        assert!((g.value_at(0.0) - 1.0).abs() < 1e-3);
        assert!((g.mass() - 1.0).abs() < MASS_TOL);
        let odd = build_density(&DensityFamily::Triangular { beta: 1.0 }, 1025).unwrap();
        assert_relative_eq!(odd.values()[512], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tabulated_is_renormalized() {
        let g = build_density(
            &DensityFamily::Tabulated { lower: 0.0_f64, upper: 2.0, values: vec![3.0, 5.0, 3.0, 1.0, 7.0] },
            0,
        )
        .unwrap();
        assert!((g.mass() - 1.0).abs() < MASS_TOL);
    }

    #[test]
    fn family_errors() {
        assert_eq!(
            DensityFamily::<f64>::from_name("cauchy", &FamilyParams::default()),
            Err(Error::UnknownFamily("cauchy".into()))
        );
        assert!(matches!(
            DensityFamily::<f64>::from_name("uniform", &FamilyParams::default()),
            Err(Error::BadParameters(_))
        ));
        assert!(build_density(&DensityFamily::Uniform { beta: -1.0 }, 128).is_err());
        assert!(build_density(&DensityFamily::Uniform { beta: 1.0 }, 16).is_err());
        assert!(DensityGrid::from_raw(0.0, 0.1, vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn gaussian_mass() {
        let g = build_density(&DensityFamily::TruncatedGaussian { sigma: 0.3_f64, cut: 4.0 }, 4097).unwrap();
        assert!((g.mass() - 1.0).abs() < MASS_TOL);
        assert!((g.mass_below(0.0) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn mass_below_is_exact_for_linear_pieces() {
        let g = DensityGrid::from_raw(0.0, 1.0, vec![0.0, 1.0, 0.0]).unwrap();
        assert_relative_eq!(g.mass(), 1.0);
        assert_relative_eq!(g.mass_below(0.5), 0.125);
        assert_relative_eq!(g.mass_below(1.0), 0.5);
        assert_relative_eq!(g.mass_below(1.5), 0.875);
        assert_eq!(g.mass_below(-1.0), 0.0);
        assert_relative_eq!(g.mass_below(9.0), 1.0);
    }

    #[test]
    fn uniform_sample_mean() {
        let beta = 1.5;
        let s = build_density(&DensityFamily::Uniform { beta }, 1 << 14).unwrap().sampler();
        let mut rng = unit_rng(11, 0);
        let n = 1_000_000;
        let mean = (0..n).map(|_| s.sample(&mut rng)).sum::<f64>() / n as f64;
        // 3 standard errors of the mean: std = beta / sqrt(3)
        assert!(mean.abs() <= 3.0 * (beta / 3f64.sqrt()) / 1e3, "mean {mean}");
    }

    #[test]
    fn narrow_grid_samples_stay_in_support() {
        let g = DensityGrid::tabulated(0.2 - 1e-6, 0.2 + 1e-6, vec![1.0; 65]).unwrap();
        let mut rng = unit_rng(3, 9);
        for _ in 0..10_000 {
            let x = sample_density(&g, &mut rng);
            assert!(x >= g.lower() && x <= g.upper());
        }
    }

    #[test]
    fn sampling_replays() {
        let s = build_density(&DensityFamily::Triangular { beta: 1.0 }, 257).unwrap().sampler();
        let a: Vec<f64> = { let mut r = unit_rng(5, 1); (0..100).map(|_| s.sample(&mut r)).collect() };
        let b: Vec<f64> = { let mut r = unit_rng(5, 1); (0..100).map(|_| s.sample(&mut r)).collect() };
        assert_eq!(a, b);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let g = DensityGrid::from_raw(-1.0, 0.5, vec![0.0, 0.5, 1.0, 0.5, 0.0]).unwrap().normalized().unwrap();
        let s = g.sampler();
        for k in 1..20 {
            let u = k as f64 / 20.0;
            let x = s.quantile(u);
            assert!((g.mass_below(x) - u).abs() < 1e-12, "u {u} x {x}");
        }
    }

    #[test]
    fn resampling_keeps_mass() {
        let g = build_density(&DensityFamily::Uniform { beta: 1.0_f64 }, 1001).unwrap();
        let r = g.resample_to_spacing(0.0013).unwrap();
        assert!((r.mass() - 1.0).abs() < 1e-12);
        assert!((r.spacing() - 0.0013).abs() < 1e-15);
        assert!(r.upper() >= g.upper());
        let p = g.resample_to_points(77).unwrap();
        assert!((p.mass() - 1.0).abs() < 1e-12);
        assert_relative_eq!(p.upper(), 1.0, epsilon = 1e-12);
    }
}
