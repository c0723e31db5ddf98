//! Probability densities sampled on a symmetric uniform grid, their moments,
//! and the free-energy functionals.
//!
//! All integrals use the trapezoid rule, summed in mirrored pairs
//! `(x_i, x_{n-1-i})`. Reflection `u(x) ↦ u(-x)` therefore permutes addends
//! inside each pair only, which makes odd moments of a grid-symmetric density
//! exactly zero and every functional exactly reflection invariant.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::poly::{expand_against_moments, Polynomial};
use crate::potentials::{ConfiningPotential, InteractionPotential};

#[derive(Clone, Debug, PartialEq)]
pub enum MeasureError {
    InvalidGrid { half_width: f64, n: usize },
    LengthMismatch { expected: usize, got: usize },
    NegativeValue { index: usize, value: f64 },
    NonFinite { index: usize },
    ZeroMass,
    InvalidSpec(&'static str),
}

impl fmt::Display for MeasureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidGrid { half_width, n } => write!(
                f,
                "invalid grid [-{half_width}, {half_width}] with {n} nodes (need L > 0, n >= 16)"
            ),
            Self::LengthMismatch { expected, got } => {
                write!(f, "expected {expected} values, got {got}")
            }
            Self::NegativeValue { index, value } => {
                write!(f, "negative density value {value} at node {index}")
            }
            Self::NonFinite { index } => write!(f, "non-finite density value at node {index}"),
            Self::ZeroMass => write!(f, "density has zero mass on the grid"),
            Self::InvalidSpec(why) => write!(f, "invalid density spec: {why}"),
        }
    }
}

impl core::error::Error for MeasureError {}

/// Uniform grid on `[-L, L]` with `n` nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    half_width: f64,
    n: usize,
    dx: f64,
}

pub const MIN_NODES: usize = 16;

impl Grid {
    pub fn new(half_width: f64, n: usize) -> Result<Self, MeasureError> {
        if !(half_width > 0.0 && half_width.is_finite()) || n < MIN_NODES {
            return Err(MeasureError::InvalidGrid { half_width, n });
        }
        Ok(Self {
            half_width,
            n,
            dx: 2.0 * half_width / (n - 1) as f64,
        })
    }

    /// Grid whose half-width satisfies the default truncation rule for `V`
    /// at noise `eps` (see [`truncation_half_width`]).
    pub fn for_potential(v: &ConfiningPotential, eps: f64, n: usize) -> Result<Self, MeasureError> {
        Self::new(truncation_half_width(v, eps), n)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Node `i`; computed so that `x(n-1-i) == -x(i)` bit for bit.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (2.0 * i as f64 - (self.n - 1) as f64) * self.half_width / (self.n - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n - 1 {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    #[inline]
    pub fn mirror(&self, i: usize) -> usize {
        self.n - 1 - i
    }

    /// Trapezoid integral of the node values `f(i)`, summed in mirrored pairs.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        let n = self.n;
        let half = n / 2;
        let mut acc = 0.5 * (f(0) + f(n - 1));
        for i in 1..half {
            acc += f(i) + f(n - 1 - i);
        }
        if n % 2 == 1 {
            acc += f(half);
        }
        acc * self.dx
    }

    /// Finer grid with the same extent and half the spacing.
    pub fn refined(&self) -> Self {
        Self::new(self.half_width, 2 * self.n - 1).expect("refining a valid grid")
    }
}

/// Half-width `L` with `V(L) - εL²/4 ≥ V(a) + 40ε`, rounded up to a multiple
/// of 0.05. The Gibbs tails beyond `L` then carry relative mass below `e^-80`.
pub fn truncation_half_width(v: &ConfiningPotential, eps: f64) -> f64 {
    let target = v.value(v.well()) + 40.0 * eps;
    let q = v
        .poly()
        .sub(&Polynomial::monomial(0.25 * eps, 2))
        .sub(&Polynomial::constant(target));
    let r = q.real_roots().into_iter().fold(v.well(), f64::max);
    libm::ceil(r / 0.05) * 0.05
}

/// Moments `m_0 … m_K` of a measure.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    m: Vec<f64>,
}

impl MomentVector {
    pub fn new(m: Vec<f64>) -> Self {
        assert!(!m.is_empty(), "moment vector needs at least m0");
        Self { m }
    }

    /// Moments of the point mass at `c`.
    pub fn dirac(c: f64, k: usize) -> Self {
        Self::new((0..=k).map(|j| math::powi(c, j as i32)).collect())
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Highest order `K`.
    pub fn order(&self) -> usize {
        self.m.len() - 1
    }

    pub fn get(&self, k: usize) -> f64 {
        self.m[k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.m
    }

    pub fn mean(&self) -> f64 {
        self.m.get(1).copied().unwrap_or(0.0)
    }

    pub fn variance(&self) -> f64 {
        let m1 = self.mean();
        self.m.get(2).map_or(0.0, |m2| m2 - m1 * m1)
    }

    /// Moments of the reflected measure.
    pub fn reflect(&self) -> Self {
        Self::new(
            self.m
                .iter()
                .enumerate()
                .map(|(k, &v)| if k % 2 == 1 { -v } else { v })
                .collect(),
        )
    }

    /// Euclidean distance on `(m_1, …, m_k)`.
    pub fn distance(&self, other: &Self, k: usize) -> f64 {
        let k = k.min(self.order()).min(other.order());
        math::sqrt(
            (1..=k)
                .map(|j| (self.m[j] - other.m[j]) * (self.m[j] - other.m[j]))
                .sum(),
        )
    }

    /// Largest change over `m_1 … m_k`.
    pub fn max_change(&self, other: &Self, k: usize) -> f64 {
        let k = k.min(self.order()).min(other.order());
        (1..=k).fold(0.0, |acc, j| acc.max((self.m[j] - other.m[j]).abs()))
    }

    pub fn max_odd_abs(&self) -> f64 {
        self.m
            .iter()
            .skip(1)
            .step_by(2)
            .fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    /// `m_0 = 1` (to `tol`), even moments nonnegative, and `m_2 ≥ m_1²`.
    pub fn is_consistent(&self, tol: f64) -> bool {
        (self.m[0] - 1.0).abs() <= tol
            && self.m.iter().step_by(2).all(|&v| v >= -tol)
            && self.variance() >= -tol
    }

    /// `(1-λ) self + λ other`, entrywise.
    pub fn blend(&self, other: &Self, lambda: f64) -> Self {
        Self::new(
            self.m
                .iter()
                .zip(&other.m)
                .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
                .collect(),
        )
    }
}

/// Default number of tracked moments: `max(8q², 2 deg F)` capped at 16.
pub fn default_moment_order(v: &ConfiningPotential, f: &InteractionPotential) -> usize {
    let q = v.half_degree().max(f.half_degree());
    (8 * q * q).max(2 * f.degree()).min(16)
}

/// Probability density sampled at the nodes of a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    grid: Grid,
    values: Vec<f64>,
}

pub const MASS_TOL: f64 = 1e-8;

impl GridDensity {
    /// Normalizes `values` to unit trapezoid mass.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, MeasureError> {
        let mut d = Self::unnormalized(grid, values)?;
        let mass = d.mass();
        if !(mass > 0.0) {
            return Err(MeasureError::ZeroMass);
        }
        d.values.iter_mut().for_each(|v| *v /= mass);
        Ok(d)
    }

    /// Checks positivity and finiteness but leaves the mass as given.
    pub fn unnormalized(grid: Grid, values: Vec<f64>) -> Result<Self, MeasureError> {
        if values.len() != grid.len() {
            return Err(MeasureError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        for (index, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(MeasureError::NonFinite { index });
            }
            if v < 0.0 {
                return Err(MeasureError::NegativeValue { index, value: v });
            }
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self, MeasureError> {
        let values = (0..grid.len()).map(|i| f(grid.x(i))).collect();
        Self::new(grid, values)
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(|i| self.values[i])
    }

    /// Trapezoid moments `m_0 … m_k`; `m_0` is the computed mass.
    pub fn moments(&self, k: usize) -> MomentVector {
        let g = &self.grid;
        let n = g.len();
        let half = n / 2;
        let mut acc = vec![0.0; k + 1];
        // same mirrored-pair order as `Grid::integrate`
        let pair = |i: usize, j: usize, scale: f64, acc: &mut [f64]| {
            let (xi, xj) = (g.x(i), g.x(j));
            let (mut pi, mut pj) = (self.values[i] * scale, self.values[j] * scale);
            for slot in acc.iter_mut() {
                *slot += pi + pj;
                pi *= xi;
                pj *= xj;
            }
        };
        pair(0, n - 1, 0.5, &mut acc);
        for i in 1..half {
            pair(i, n - 1 - i, 1.0, &mut acc);
        }
        if n % 2 == 1 {
            let x = g.x(half);
            let mut p = self.values[half];
            for slot in acc.iter_mut() {
                *slot += p;
                p *= x;
            }
        }
        MomentVector::new(acc.into_iter().map(|a| a * g.dx()).collect())
    }

    pub fn mean(&self) -> f64 {
        self.grid.integrate(|i| self.grid.x(i) * self.values[i])
    }

    /// `∫ u log u`, with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        self.grid.integrate(|i| math::xlogx(self.values[i]))
    }

    /// `u(x) ↦ u(-x)`.
    pub fn reflect(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self::from_raw(self.grid.clone(), values)
    }

    /// `(u(x) + u(-x)) / 2`, renormalized.
    pub fn symmetrize(&self) -> Self {
        let values = (0..self.grid.len())
            .map(|i| 0.5 * (self.values[i] + self.values[self.grid.mirror(i)]))
            .collect();
        Self::new(self.grid.clone(), values).expect("symmetrizing a valid density")
    }

    pub fn asymmetry(&self) -> f64 {
        (0..self.grid.len()).fold(0.0, |acc: f64, i| {
            acc.max((self.values[i] - self.values[self.grid.mirror(i)]).abs())
        })
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }

    /// Largest nodewise difference to another density on the same grid.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "grids differ");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc: f64, (a, b)| acc.max((a - b).abs()))
    }

    /// `∫ (F∗u)(x) u(x) dx / 2` with `F∗u` built from the moments of `u`.
    pub fn interaction_energy(&self, f: &InteractionPotential) -> f64 {
        if f.is_zero() {
            return 0.0;
        }
        let m = self.moments(f.degree());
        let conv = expand_against_moments(f.poly(), m.as_slice());
        0.5 * self.grid.integrate(|i| conv.eval(self.grid.x(i)) * self.values[i])
    }

    pub fn confinement_energy(&self, v: &ConfiningPotential) -> f64 {
        self.grid.integrate(|i| v.value(self.grid.x(i)) * self.values[i])
    }

    /// `Υ(u) = ∫ V u + ½ ∬ F(x-y) u(x) u(y)`, the free energy without entropy.
    pub fn potential_energy(&self, v: &ConfiningPotential, f: &InteractionPotential) -> f64 {
        self.confinement_energy(v) + self.interaction_energy(f)
    }
}

/// Terms of `Υ_ε(u) = (ε/2) ∫ u log u + ∫ V u + ½ ∬ F(x-y) u(x) u(y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeEnergyBreakdown {
    pub entropy_term: f64,
    pub confinement_term: f64,
    pub interaction_term: f64,
    pub total: f64,
}

pub fn free_energy(
    u: &GridDensity,
    v: &ConfiningPotential,
    f: &InteractionPotential,
    eps: f64,
) -> FreeEnergyBreakdown {
    let entropy_term = 0.5 * eps * u.entropy();
    let confinement_term = u.confinement_energy(v);
    let interaction_term = u.interaction_energy(f);
    FreeEnergyBreakdown {
        entropy_term,
        confinement_term,
        interaction_term,
        total: entropy_term + confinement_term + interaction_term,
    }
}

/// `Υ_ε⁻(u)`: only the negative part of the entropy, no interaction.
pub fn reduced_free_energy(u: &GridDensity, v: &ConfiningPotential, eps: f64) -> f64 {
    let g = u.grid();
    let neg_entropy = g.integrate(|i| {
        let x = u.values()[i];
        if x < 1.0 {
            math::xlogx(x)
        } else {
            0.0
        }
    });
    0.5 * eps * neg_entropy + u.confinement_energy(v)
}

/// `Ξ_ε = -ε/4 - 4ε/e + min_x (V(x) - εx²/4)`, a lower bound of `Υ_ε` over
/// all probability densities.
pub fn free_energy_lower_bound(v: &ConfiningPotential, eps: f64) -> f64 {
    let shifted = v.poly().sub(&Polynomial::monomial(0.25 * eps, 2));
    let (_, min) = shifted
        .global_min()
        .expect("a confining potential minus a quadratic is bounded below");
    -0.25 * eps - 4.0 * eps / core::f64::consts::E + min
}

/// Closed-form initial densities, sampled onto a grid on demand.
#[derive(Clone, Debug, PartialEq)]
pub enum DensitySpec {
    Gaussian { mean: f64, std: f64 },
    /// Weighted Gaussian mixture `(weight, mean, std)`.
    Mixture(Vec<(f64, f64, f64)>),
    /// Equal-weight Gaussians at `±center`.
    SymmetricPair { center: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
    Triangle { center: f64, half_width: f64 },
}

impl DensitySpec {
    pub fn sample(&self, grid: &Grid) -> Result<GridDensity, MeasureError> {
        let gauss = |x: f64, m: f64, s: f64| {
            let z = (x - m) / s;
            math::exp(-0.5 * z * z) / s
        };
        match self {
            Self::Gaussian { mean, std } => {
                if !(*std > 0.0) {
                    return Err(MeasureError::InvalidSpec("std must be positive"));
                }
                GridDensity::from_fn(grid.clone(), |x| gauss(x, *mean, *std))
            }
            Self::Mixture(parts) => {
                if parts.is_empty() || parts.iter().any(|&(w, _, s)| !(w >= 0.0 && s > 0.0)) {
                    return Err(MeasureError::InvalidSpec(
                        "mixture needs nonnegative weights and positive stds",
                    ));
                }
                GridDensity::from_fn(grid.clone(), |x| {
                    parts.iter().map(|&(w, m, s)| w * gauss(x, m, s)).sum()
                })
            }
            Self::SymmetricPair { center, std } => {
                if !(*std > 0.0) {
                    return Err(MeasureError::InvalidSpec("std must be positive"));
                }
                GridDensity::from_fn(grid.clone(), |x| {
                    gauss(x, *center, *std) + gauss(x, -*center, *std)
                })
            }
            Self::Uniform { lo, hi } => {
                if !(lo < hi) {
                    return Err(MeasureError::InvalidSpec("uniform needs lo < hi"));
                }
                GridDensity::from_fn(grid.clone(), |x| if x >= *lo && x <= *hi { 1.0 } else { 0.0 })
            }
            Self::Triangle { center, half_width } => {
                if !(*half_width > 0.0) {
                    return Err(MeasureError::InvalidSpec("half width must be positive"));
                }
                GridDensity::from_fn(grid.clone(), |x| {
                    (1.0 - (x - center).abs() / half_width).max(0.0)
                })
            }
        }
    }

    /// The spec of the reflected density.
    pub fn reflect(&self) -> Self {
        match self {
            Self::Gaussian { mean, std } => Self::Gaussian {
                mean: -mean,
                std: *std,
            },
            Self::Mixture(parts) => {
                Self::Mixture(parts.iter().map(|&(w, m, s)| (w, -m, s)).collect())
            }
            Self::SymmetricPair { .. } => self.clone(),
            Self::Uniform { lo, hi } => Self::Uniform { lo: -hi, hi: -lo },
            Self::Triangle { center, half_width } => Self::Triangle {
                center: -center,
                half_width: *half_width,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{validate_confining, InteractionPotential};

    fn quartic() -> ConfiningPotential {
        validate_confining(&[0.0, 0.0, -0.5, 0.0, 0.25]).unwrap()
    }

    fn std_normal(grid: &Grid) -> GridDensity {
        DensitySpec::Gaussian { mean: 0.0, std: 1.0 }.sample(grid).unwrap()
    }

    #[test]
    fn grid_is_mirror_exact() {
        let g = Grid::new(3.7, 801).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.x(i), -g.x(g.mirror(i)));
        }
        assert_eq!(g.x(400), 0.0);
        assert!(Grid::new(1.0, 15).is_err());
        assert!(Grid::new(-1.0, 100).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let g = Grid::new(10.0, 2001).unwrap();
        let m = std_normal(&g).moments(4);
        assert!((m.get(0) - 1.0).abs() < 1e-12);
        assert!(m.get(1).abs() < 1e-12);
        assert!((m.get(2) - 1.0).abs() < 1e-6);
        assert!((m.get(4) - 3.0).abs() < 1e-6);
    }

    #[test]
    fn symmetric_density_has_zero_odd_moments() {
        let g = Grid::new(4.0, 400).unwrap();
        let u = DensitySpec::SymmetricPair { center: 1.3, std: 0.4 }.sample(&g).unwrap();
        let m = u.moments(9);
        for k in (1..=9).step_by(2) {
            assert_eq!(m.get(k), 0.0, "m{k}");
        }
    }

    #[test]
    fn triangle_mean() {
        let g = Grid::new(3.0, 601).unwrap();
        let u = DensitySpec::Triangle { center: 1.0, half_width: 0.1 }.sample(&g).unwrap();
        assert!((u.moments(1).get(1) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_entropy() {
        let g = Grid::new(10.0, 2001).unwrap();
        let expected = -0.5 * math::ln(2.0 * core::f64::consts::PI * core::f64::consts::E);
        assert!((std_normal(&g).entropy() - expected).abs() < 1e-4);
    }

    #[test]
    fn uniform_entropy_and_zero_regions() {
        // nodes at multiples of 0.01, so the uniform's edges sit on nodes
        let g = Grid::new(2.0, 401).unwrap();
        let u = DensitySpec::Uniform { lo: -1.0, hi: 1.0 }.sample(&g).unwrap();
        let h = u.entropy();
        assert!(h.is_finite());
        assert!((h + core::f64::consts::LN_2).abs() < 1e-2, "{h}");
    }

    #[test]
    fn free_energy_of_gaussian() {
        // oracle from Gaussian moments: m2 = 1, m4 = 3, m1 = 0
        let g = Grid::new(10.0, 2001).unwrap();
        let u = std_normal(&g);
        let v = quartic();
        let f = InteractionPotential::quadratic(0.5).unwrap();
        let fe = free_energy(&u, &v, &f, 1.0);
        let entropy = -0.5 * math::ln(2.0 * core::f64::consts::PI * core::f64::consts::E);
        let expected_entropy = 0.5 * entropy;
        let expected_confinement = 3.0 / 4.0 - 1.0 / 2.0;
        // ½ ∬ α(x-y)²/2 = α/2 (m2 - m1²)
        let expected_interaction = 0.25;
        assert!((fe.entropy_term - expected_entropy).abs() < 1e-4);
        assert!((fe.confinement_term - expected_confinement).abs() < 1e-6);
        assert!((fe.interaction_term - expected_interaction).abs() < 1e-6);
        let expected_total = expected_entropy + expected_confinement + expected_interaction;
        assert!((fe.total - expected_total).abs() < 1e-4);
        assert!((expected_total - (-0.209_469_266_602_336)).abs() < 1e-12);
        assert_eq!(
            fe.total,
            fe.entropy_term + fe.confinement_term + fe.interaction_term
        );
    }

    #[test]
    fn narrow_bump_at_the_well() {
        let v = quartic();
        let f = InteractionPotential::quadratic(0.5).unwrap();
        let g = Grid::new(2.5, 5001).unwrap();
        let u = DensitySpec::Gaussian { mean: 1.0, std: 0.01 }.sample(&g).unwrap();
        let fe = free_energy(&u, &v, &f, 1e-4);
        assert!((fe.total + 0.25).abs() < 1e-3, "{fe:?}");
    }

    #[test]
    fn lower_bound_values() {
        let v = quartic();
        assert!((free_energy_lower_bound(&v, 0.0) + 0.25).abs() < 1e-15);
        let expected = -0.025 - 0.4 / core::f64::consts::E - 1.05 * 1.05 / 4.0;
        assert!((free_energy_lower_bound(&v, 0.1) - expected).abs() < 1e-13);
        // scan oracle
        let scan = (-3000..=3000)
            .map(|i| {
                let x = i as f64 * 1e-3;
                x.powi(4) / 4.0 - 0.525 * x * x
            })
            .fold(f64::INFINITY, f64::min);
        assert!((expected - (-0.025 - 0.4 / core::f64::consts::E + scan)).abs() < 1e-6);
        assert!((expected + 0.447777).abs() < 1e-5);
    }

    #[test]
    fn symmetrize_bump() {
        let g = Grid::new(3.0, 601).unwrap();
        let u = DensitySpec::Gaussian { mean: 1.0, std: 0.05 }.sample(&g).unwrap();
        let s = u.symmetrize();
        assert!(s.is_symmetric(1e-12));
        let left = g.integrate(|i| if g.x(i) < 0.0 { s.values()[i] } else { 0.0 });
        assert!((left - 0.5).abs() < 1e-9);
        let shifted = DensitySpec::Gaussian { mean: 0.3, std: 1.0 }.sample(&g).unwrap();
        assert!(!shifted.is_symmetric(1e-6));
    }

    #[test]
    fn reflection_invariance_is_exact() {
        let g = Grid::new(3.0, 601).unwrap();
        let u = DensitySpec::Mixture(vec![(0.3, -0.7, 0.2), (0.7, 0.9, 0.35)])
            .sample(&g)
            .unwrap();
        let v = quartic();
        let f = validate_interaction_quartic();
        let a = free_energy(&u, &v, &f, 0.3);
        let b = free_energy(&u.reflect(), &v, &f, 0.3);
        assert_eq!(a, b);
    }

    fn validate_interaction_quartic() -> InteractionPotential {
        crate::potentials::validate_interaction(&[0.0, 0.0, 0.1, 0.0, 0.05]).unwrap()
    }

    #[test]
    fn reduced_functional_is_below() {
        let g = Grid::new(3.0, 601).unwrap();
        let u = DensitySpec::Gaussian { mean: 0.5, std: 0.1 }.sample(&g).unwrap();
        let v = quartic();
        let f = InteractionPotential::quadratic(0.5).unwrap();
        assert!(free_energy(&u, &v, &f, 0.2).total >= reduced_free_energy(&u, &v, 0.2));
    }

    #[test]
    fn truncation_rule() {
        let v = quartic();
        let l = truncation_half_width(&v, 0.1);
        let q = |x: f64| v.value(x) - 0.025 * x * x;
        assert!(q(l) >= -0.25 + 4.0);
        assert!(q(l - 0.05) < -0.25 + 4.0);
    }

    #[test]
    fn rejects_bad_values() {
        let g = Grid::new(1.0, 16).unwrap();
        let mut vals = vec![1.0; 16];
        vals[3] = -1.0;
        assert!(matches!(
            GridDensity::new(g.clone(), vals),
            Err(MeasureError::NegativeValue { index: 3, .. })
        ));
        assert_eq!(GridDensity::new(g.clone(), vec![0.0; 16]), Err(MeasureError::ZeroMass));
        assert!(GridDensity::new(g, vec![1.0; 3]).is_err());
    }
}
