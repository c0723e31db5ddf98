//! Small-noise asymptotics: Laplace moment ratios
//! `∫ x^l e^{-2U/ε} / ∫ e^{-2U/ε}` and free-energy sweeps of the stationary
//! branches as `ε → 0`.

use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::poly::Polynomial;
use crate::potentials::{ConfiningPotential, InteractionPotential};
use crate::quadrature;
use crate::stationary::{
    self, EnumerationReport, StationaryConfig, StationaryError, StationaryMeasure, Symmetry,
};
use crate::measures::{Grid, MomentVector};

#[derive(Clone, Debug, PartialEq)]
pub enum AsymptoticsError {
    /// `U` is not coercive (odd degree or negative leading coefficient).
    GrowthPreconditionFails,
    InvalidEps(f64),
    QuadratureFailed { error: f64 },
    /// The sweep lost track of a branch at this `ε`.
    BranchLost { branch: Symmetry, eps: f64 },
    EpsNotDecreasing,
    Stationary(StationaryError),
}

impl fmt::Display for AsymptoticsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::GrowthPreconditionFails => write!(f, "U is not coercive"),
            Self::InvalidEps(e) => write!(f, "eps must be positive, got {e}"),
            Self::QuadratureFailed { error } => {
                write!(f, "quadrature did not reach tolerance (error estimate {error:e})")
            }
            Self::BranchLost { branch, eps } => write!(f, "branch {branch} lost at eps = {eps}"),
            Self::EpsNotDecreasing => write!(f, "eps values must be strictly decreasing"),
            Self::Stationary(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for AsymptoticsError {}

impl From<StationaryError> for AsymptoticsError {
    fn from(e: StationaryError) -> Self {
        Self::Stationary(e)
    }
}

const QUAD_REL_TOL: f64 = 1e-12;
const MAX_INTERVALS: usize = 20_000;
/// Integrand cut-off: `2(U - min U)/ε ≤ EXPONENT_CUTOFF`.
const EXPONENT_CUTOFF: f64 = 800.0;

/// `e^{-2(U - min U)/ε}` on the interval where it exceeds `e^{-800}`.
struct Gibbs<'a> {
    u: &'a Polynomial,
    umin: f64,
    eps: f64,
    lo: f64,
    hi: f64,
    crit: Vec<f64>,
    even: bool,
}

impl<'a> Gibbs<'a> {
    fn new(u: &'a Polynomial, eps: f64) -> Result<Self, AsymptoticsError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(AsymptoticsError::InvalidEps(eps));
        }
        if u.degree() < 2 || u.degree() % 2 == 1 || u.leading() <= 0.0 {
            return Err(AsymptoticsError::GrowthPreconditionFails);
        }
        let (_, umin) = u.global_min().ok_or(AsymptoticsError::GrowthPreconditionFails)?;
        let level = u.sub(&Polynomial::constant(umin + 0.5 * EXPONENT_CUTOFF * eps));
        let roots = level.real_roots();
        let (lo, hi) = match (roots.first(), roots.last()) {
            (Some(&lo), Some(&hi)) if hi > lo => (lo, hi),
            _ => return Err(AsymptoticsError::GrowthPreconditionFails),
        };
        Ok(Self {
            u,
            umin,
            eps,
            lo,
            hi,
            crit: u.deriv(1).real_roots_in(lo, hi),
            even: u.is_even(),
        })
    }

    fn weight(&self, x: f64) -> f64 {
        math::exp(-2.0 * (self.u.eval(x) - self.umin) / self.eps)
    }

    fn breaks(&self, a: f64, b: f64) -> Vec<f64> {
        let mut br: Vec<f64> = (0..=32).map(|k| a + (b - a) * k as f64 / 32.0).collect();
        br.extend(self.crit.iter().copied().filter(|&c| c > a && c < b));
        br.sort_by(f64::total_cmp);
        br
    }

    /// `∫_a^b x^l e^{-2(U - min U)/ε} dx`, folded onto `[0, hi]` for even `U`
    /// over the full range.
    fn moment(&self, l: usize, a: f64, b: f64, abs_tol: f64) -> Result<f64, AsymptoticsError> {
        let full = a <= self.lo && b >= self.hi;
        let q = if self.even && full {
            let r = self.hi;
            quadrature::integrate(
                |x| {
                    let w = self.weight(x);
                    let p = math::powi(x, l as i32);
                    p * w + math::powi(-x, l as i32) * w
                },
                &self.breaks(0.0, r),
                QUAD_REL_TOL,
                abs_tol,
                MAX_INTERVALS,
            )
        } else {
            let (a, b) = (a.max(self.lo), b.min(self.hi));
            if b <= a {
                return Ok(0.0);
            }
            quadrature::integrate(
                |x| math::powi(x, l as i32) * self.weight(x),
                &self.breaks(a, b),
                QUAD_REL_TOL,
                abs_tol,
                MAX_INTERVALS,
            )
        };
        if !q.converged {
            return Err(AsymptoticsError::QuadratureFailed { error: q.error });
        }
        Ok(q.value)
    }

    fn scale(&self) -> f64 {
        self.lo.abs().max(self.hi.abs()).max(1.0)
    }
}

/// `∫ x^l e^{-2U/ε} dx / ∫ e^{-2U/ε} dx` for coercive `U`.
///
/// For even `U` the integrand is folded to `x^l w(x) + (-x)^l w(-x)` on
/// `[0, R]`, so odd `l` gives exactly zero.
pub fn laplace_ratio(u: &Polynomial, eps: f64, l: usize) -> Result<f64, AsymptoticsError> {
    let g = Gibbs::new(u, eps)?;
    let d = g.moment(0, f64::NEG_INFINITY, f64::INFINITY, 0.0)?;
    if l == 0 {
        return Ok(1.0);
    }
    let abs_tol = 1e-14 * d * math::powi(g.scale(), l as i32);
    let n = g.moment(l, f64::NEG_INFINITY, f64::INFINITY, abs_tol)?;
    Ok(n / d)
}

/// Global minimizers of `U` within `tol` of the minimum value.
pub fn extract_minima(u: &Polynomial, tol: f64) -> Vec<f64> {
    let d = u.deriv(1);
    let crit: Vec<f64> = d
        .real_roots()
        .into_iter()
        .map(|x| d.newton_polish(x, 50))
        .collect();
    let Some(min) = crit.iter().map(|&x| u.eval(x)).min_by(f64::total_cmp) else {
        return Vec::new();
    };
    crit.into_iter().filter(|&x| u.eval(x) <= min + tol).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaplaceReport {
    pub eps: f64,
    pub minima: Vec<f64>,
    /// Mass fraction of `e^{-2U/ε}` in each minimum's Voronoi cell.
    pub weights: Vec<f64>,
    /// `(l, ratio)` pairs.
    pub ratios: Vec<(usize, f64)>,
}

impl LaplaceReport {
    /// `Σ_j p_j A_j^l`, the small-noise prediction for the `l`-th ratio.
    pub fn predicted(&self, l: usize) -> f64 {
        self.minima
            .iter()
            .zip(&self.weights)
            .map(|(a, p)| p * math::powi(*a, l as i32))
            .sum()
    }
}

/// Ratios for each `l` in `ls`, plus the global minima and their observed
/// cell weights.
pub fn laplace_report(u: &Polynomial, eps: f64, ls: &[usize]) -> Result<LaplaceReport, AsymptoticsError> {
    let g = Gibbs::new(u, eps)?;
    let minima = extract_minima(u, 1e-9 * (1.0 + g.umin.abs()));
    let total = g.moment(0, f64::NEG_INFINITY, f64::INFINITY, 0.0)?;
    // cell integrals are taken on the unfolded line
    let unfolded = Gibbs { even: false, ..Gibbs::new(u, eps)? };
    let mut weights = Vec::with_capacity(minima.len());
    for (j, _) in minima.iter().enumerate() {
        let a = if j == 0 {
            f64::NEG_INFINITY
        } else {
            0.5 * (minima[j - 1] + minima[j])
        };
        let b = if j + 1 == minima.len() {
            f64::INFINITY
        } else {
            0.5 * (minima[j] + minima[j + 1])
        };
        let cell = if minima.len() == 1 {
            total
        } else {
            unfolded.moment(0, a, b, 0.0)?
        };
        weights.push(cell / total);
    }
    let mut ratios = Vec::with_capacity(ls.len());
    for &l in ls {
        ratios.push((l, laplace_ratio(u, eps, l)?));
    }
    Ok(LaplaceReport {
        eps,
        minima,
        weights,
        ratios,
    })
}

/// Free energies of the three stationary branches along a decreasing `ε`
/// sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub eps_values: Vec<f64>,
    pub fe_sym: Vec<f64>,
    pub fe_plus: Vec<f64>,
    pub fe_minus: Vec<f64>,
    /// `V(x₀) + F(2x₀)/4`.
    pub predicted_sym_limit: f64,
    /// `V(a)`.
    pub predicted_asym_limit: f64,
}

impl SweepReport {
    fn series(&self, branch: Symmetry) -> (&[f64], f64) {
        match branch {
            Symmetry::Symmetric => (&self.fe_sym, self.predicted_sym_limit),
            Symmetry::AsymmetricPlus => (&self.fe_plus, self.predicted_asym_limit),
            Symmetry::AsymmetricMinus => (&self.fe_minus, self.predicted_asym_limit),
        }
    }

    /// `|Υ_ε - limit|` along the sweep.
    pub fn gaps(&self, branch: Symmetry) -> Vec<f64> {
        let (s, lim) = self.series(branch);
        s.iter().map(|v| (v - lim).abs()).collect()
    }

    /// True when the distance to the predicted limit never grows as `ε`
    /// decreases.
    pub fn approach_is_monotone(&self, branch: Symmetry) -> bool {
        self.gaps(branch).windows(2).all(|w| w[1] <= w[0])
    }

    /// `Υ_ε(u₊) < Υ_ε(u₀)` at every swept `ε`.
    pub fn ordering_holds(&self) -> bool {
        self.fe_plus.iter().zip(&self.fe_sym).all(|(p, s)| p < s)
    }
}

/// `V(x₀) + F(2x₀)/4` and `V(a)`.
pub fn predicted_limits(
    v: &ConfiningPotential,
    f: &InteractionPotential,
) -> Result<(f64, f64), StationaryError> {
    let x0 = stationary::find_x0(v, f)?;
    Ok((v.value(x0) + 0.25 * f.value(2.0 * x0), v.value(v.well())))
}

/// Enumerate at each `ε` (grid rebuilt for each `ε` with `nodes` nodes, other
/// settings from `template`) and follow the branches.
pub fn free_energy_sweep(
    v: &ConfiningPotential,
    f: &InteractionPotential,
    eps_list: &[f64],
    nodes: usize,
    template: &StationaryConfig,
) -> Result<SweepReport, AsymptoticsError> {
    check_decreasing(eps_list)?;
    let mut reports = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let cfg = StationaryConfig {
            grid: Grid::for_potential(v, eps, nodes).map_err(StationaryError::from)?,
            ..template.clone()
        };
        reports.push(stationary::enumerate(v, f, eps, &cfg)?);
    }
    sweep_from_reports(v, f, eps_list, &reports)
}

fn check_decreasing(eps_list: &[f64]) -> Result<(), AsymptoticsError> {
    if let Some(&e) = eps_list.iter().find(|e| !(**e > 0.0)) {
        return Err(AsymptoticsError::InvalidEps(e));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(AsymptoticsError::EpsNotDecreasing);
    }
    Ok(())
}

/// Branch tracking over precomputed enumerations (one per `ε`): each branch
/// keeps the measure of its symmetry class nearest in moments to its
/// previous member.
pub fn sweep_from_reports(
    v: &ConfiningPotential,
    f: &InteractionPotential,
    eps_list: &[f64],
    reports: &[EnumerationReport],
) -> Result<SweepReport, AsymptoticsError> {
    check_decreasing(eps_list)?;
    let (sym_limit, asym_limit) = predicted_limits(v, f)?;
    let mut out = SweepReport {
        eps_values: eps_list.to_vec(),
        fe_sym: Vec::new(),
        fe_plus: Vec::new(),
        fe_minus: Vec::new(),
        predicted_sym_limit: sym_limit,
        predicted_asym_limit: asym_limit,
    };
    for branch in [Symmetry::Symmetric, Symmetry::AsymmetricPlus, Symmetry::AsymmetricMinus] {
        let mut prev: Option<MomentVector> = None;
        for (&eps, rep) in eps_list.iter().zip(reports) {
            let pick = pick_branch(rep, branch, prev.as_ref())
                .ok_or(AsymptoticsError::BranchLost { branch, eps })?;
            prev = Some(pick.moments.clone());
            let fe = pick.free_energy.total;
            match branch {
                Symmetry::Symmetric => out.fe_sym.push(fe),
                Symmetry::AsymmetricPlus => out.fe_plus.push(fe),
                Symmetry::AsymmetricMinus => out.fe_minus.push(fe),
            }
        }
    }
    Ok(out)
}

fn pick_branch<'a>(
    rep: &'a EnumerationReport,
    branch: Symmetry,
    prev: Option<&MomentVector>,
) -> Option<&'a StationaryMeasure> {
    let cands = rep.measures.iter().filter(|m| m.symmetry == branch);
    match prev {
        Some(p) => cands.min_by(|a, b| a.moments.distance(p, 4).total_cmp(&b.moments.distance(p, 4))),
        None => cands.min_by(|a, b| a.free_energy.total.total_cmp(&b.free_energy.total)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn double_well() -> Polynomial {
        // (x² - 1)² / 4
        Polynomial::new(vec![0.25, 0.0, -0.5, 0.0, 0.25])
    }

    #[test]
    fn odd_ratio_vanishes_exactly() {
        for eps in [0.2, 0.1, 0.05] {
            assert_eq!(laplace_ratio(&double_well(), eps, 1).unwrap(), 0.0);
            assert_eq!(laplace_ratio(&double_well(), eps, 3).unwrap(), 0.0);
        }
    }

    #[test]
    fn shifted_quadratic_mean() {
        // (x - 2)²: Gaussian with mean 2 for every ε
        let u = Polynomial::new(vec![4.0, -4.0, 1.0]);
        for eps in [1.0, 0.1, 0.01] {
            let r = laplace_ratio(&u, eps, 1).unwrap();
            assert!((r - 2.0).abs() < 1e-11, "{r}");
            // variance ε/4
            let m2 = laplace_ratio(&u, eps, 2).unwrap();
            assert!((m2 - 4.0 - eps / 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_shift_invariance() {
        let u = Polynomial::new(vec![0.0, 0.3, -0.5, 0.0, 0.25]);
        let shifted = u.add(&Polynomial::constant(17.0));
        let a = laplace_ratio(&u, 0.1, 2).unwrap();
        let b = laplace_ratio(&shifted, 0.1, 2).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs());
    }

    #[test]
    fn noncoercive_rejected() {
        let u = Polynomial::new(vec![0.0, 0.0, -1.0]);
        assert_eq!(laplace_ratio(&u, 0.1, 1), Err(AsymptoticsError::GrowthPreconditionFails));
        let u = Polynomial::new(vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(laplace_ratio(&u, 0.1, 1), Err(AsymptoticsError::GrowthPreconditionFails));
    }

    #[test]
    fn minima_examples() {
        let m = extract_minima(&double_well(), 1e-12);
        assert_eq!(m.len(), 2);
        assert!((m[0] + 1.0).abs() < 1e-12 && (m[1] - 1.0).abs() < 1e-12);
        let tilted = Polynomial::new(vec![0.0, 0.01, -0.5, 0.0, 0.25]);
        let m = extract_minima(&tilted, 1e-12);
        assert_eq!(m.len(), 1);
        assert!(m[0] < -0.9);
    }

    #[test]
    fn symmetric_weights_are_even() {
        let r = laplace_report(&double_well(), 0.1, &[2]).unwrap();
        assert_eq!(r.weights.len(), 2);
        assert!((r.weights[0] - 0.5).abs() < 1e-10);
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((r.predicted(2) - 1.0).abs() < 1e-10);
    }
}
