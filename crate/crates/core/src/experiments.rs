//! Convergence and basin-of-attraction experiments on concrete instances.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::measures::{free_energy, DensitySpec, GridDensity, MeasureError};
use crate::pde::{self, SolverConfig, SolverError, TrajectoryRecord};
use crate::potentials::{ConfiningPotential, InteractionPotential};
use crate::stationary::{
    self, EnumerationReport, StationaryConfig, StationaryError, StationaryMeasure, Symmetry,
};
use crate::{asymptotics, math};

#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentError {
    /// The final density matches no enumerated stationary measure.
    NoMatch {
        nearest: Option<Symmetry>,
        final_distance: f64,
        moment_distance: f64,
        fe_limit: f64,
    },
    HypothesisFailed { name: String },
    GridMismatch,
    Solver(SolverError),
    Stationary(StationaryError),
    Measure(MeasureError),
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoMatch {
                nearest,
                final_distance,
                moment_distance,
                ..
            } => {
                write!(f, "final density matches no stationary measure (nearest ")?;
                match nearest {
                    Some(s) => write!(f, "{s}")?,
                    None => write!(f, "none")?,
                }
                write!(f, ", sup distance {final_distance:e}, moment distance {moment_distance:e})")
            }
            Self::HypothesisFailed { name } => write!(f, "hypothesis failed: {name}"),
            Self::GridMismatch => write!(f, "initial density and stationary set use different grids"),
            Self::Solver(e) => write!(f, "{e}"),
            Self::Stationary(e) => write!(f, "{e}"),
            Self::Measure(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ExperimentError {}

impl From<SolverError> for ExperimentError {
    fn from(e: SolverError) -> Self {
        Self::Solver(e)
    }
}

impl From<StationaryError> for ExperimentError {
    fn from(e: StationaryError) -> Self {
        Self::Stationary(e)
    }
}

impl From<MeasureError> for ExperimentError {
    fn from(e: MeasureError) -> Self {
        Self::Measure(e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub solver: SolverConfig,
    /// Its grid is the grid of every run.
    pub stationary: StationaryConfig,
    /// Sup-norm matching tolerance.
    pub sup_tol: f64,
    /// Tolerance on each of the first four moments.
    pub moment_tol: f64,
    /// Tolerance for `|ξ(t_end) - Υ_ε(limit)|`.
    pub energy_match_tol: f64,
    pub strict: bool,
}

impl ExperimentConfig {
    pub fn new(solver: SolverConfig, stationary: StationaryConfig) -> Self {
        Self {
            solver,
            stationary,
            sup_tol: 1e-4,
            moment_tol: 1e-6,
            energy_match_tol: 1e-6,
            strict: false,
        }
    }

    pub fn eps(&self) -> f64 {
        self.solver.eps
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceVerdict {
    pub limit_measure: StationaryMeasure,
    pub matched_branch: Symmetry,
    /// Distance in the first four moments to the limit, per record.
    pub distance_history: Vec<f64>,
    pub final_distance: f64,
    pub moment_distance: f64,
    /// `ξ(t_end)`.
    pub fe_limit: f64,
    /// `Υ_ε(final) ≤ min ξ + tol`.
    pub energy_bound_ok: bool,
    /// `|ξ(t_end) - Υ_ε(limit)| ≤ tol`.
    pub energy_limit_ok: bool,
    /// A run whose energy reaches the asymmetric level ends on an asymmetric
    /// branch.
    pub low_energy_branch_ok: bool,
    pub passed: bool,
    pub trajectory: Box<TrajectoryRecord>,
}

fn max_moment_gap(a: &crate::MomentVector, b: &crate::MomentVector) -> f64 {
    (1..=4).fold(0.0_f64, |m, k| m.max((a.get(k) - b.get(k)).abs()))
}

/// Evolve `u0` to the convergence detector and identify its limit among the
/// enumerated stationary measures (enumerated here when `known` is `None`).
pub fn verify_global_convergence(
    u0: &GridDensity,
    v: &ConfiningPotential,
    f: &InteractionPotential,
    cfg: &ExperimentConfig,
    known: Option<&EnumerationReport>,
) -> Result<ConvergenceVerdict, ExperimentError> {
    if u0.grid() != &cfg.stationary.grid {
        return Err(ExperimentError::GridMismatch);
    }
    let eps = cfg.eps();
    let owned;
    let report = match known {
        Some(r) => r,
        None => {
            owned = stationary::enumerate(v, f, eps, &cfg.stationary)?;
            &owned
        }
    };
    let solver = SolverConfig {
        stop_on_convergence: true,
        ..cfg.solver.clone()
    };
    let rec = pde::evolve(u0, &solver, v, f)?;
    let last = rec.final_density.clone();
    let fe_limit = *rec.free_energy.last().expect("evolve records t = 0");
    let final_moments = last.moments(4);

    let nearest = report
        .measures
        .iter()
        .min_by(|a, b| {
            max_moment_gap(&a.moments, &final_moments)
                .total_cmp(&max_moment_gap(&b.moments, &final_moments))
        });
    let Some(limit) = nearest else {
        return Err(ExperimentError::NoMatch {
            nearest: None,
            final_distance: f64::INFINITY,
            moment_distance: f64::INFINITY,
            fe_limit,
        });
    };
    let final_distance = last.sup_distance(&limit.density);
    let moment_distance = max_moment_gap(&limit.moments, &final_moments);
    if !(final_distance <= cfg.sup_tol && moment_distance <= cfg.moment_tol) {
        return Err(ExperimentError::NoMatch {
            nearest: Some(limit.symmetry),
            final_distance,
            moment_distance,
            fe_limit,
        });
    }

    let tol = solver.energy_tolerance(u0.grid());
    let min_xi = rec.free_energy.iter().copied().fold(f64::INFINITY, f64::min);
    let energy_bound_ok = free_energy(&last, v, f, eps).total <= min_xi + tol;
    let energy_limit_ok = (fe_limit - limit.free_energy.total).abs() <= cfg.energy_match_tol;
    let low_energy_branch_ok = match report.plus() {
        Some(p) if min_xi <= p.free_energy.total + 1e-9 => limit.symmetry != Symmetry::Symmetric,
        _ => true,
    };
    let distance_history = rec
        .moment_history
        .iter()
        .map(|m| max_moment_gap(m, &limit.moments))
        .collect();
    Ok(ConvergenceVerdict {
        limit_measure: limit.clone(),
        matched_branch: limit.symmetry,
        distance_history,
        final_distance,
        moment_distance,
        fe_limit,
        energy_bound_ok,
        energy_limit_ok,
        low_energy_branch_ok,
        passed: energy_bound_ok && energy_limit_ok && low_energy_branch_ok,
        trajectory: Box::new(rec),
    })
}

/// Named predicates on the initial density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Hypothesis {
    /// `u0(x) = u0(-x)` on the grid.
    Symmetric,
    MeanPositive,
    MeanNegative,
    /// `Υ(u0) < V(x₀) + F(2x₀)/4` (noise-free energy).
    EnergyBelowSymmetricLevel,
    /// `Υ_ε(u0)` below the lower bound of the infimum over zero-mean
    /// densities (which implies it is below the infimum).
    FreeEnergyBelowHyperplane,
}

impl Hypothesis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Symmetric => "symmetric_u0",
            Self::MeanPositive => "mean_positive",
            Self::MeanNegative => "mean_negative",
            Self::EnergyBelowSymmetricLevel => "energy_below_symmetric_level",
            Self::FreeEnergyBelowHyperplane => "free_energy_below_hyperplane",
        }
    }

    /// Mirror image under `x ↦ -x`.
    pub fn reflect(self) -> Self {
        match self {
            Self::MeanPositive => Self::MeanNegative,
            Self::MeanNegative => Self::MeanPositive,
            other => other,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisCheck {
    pub hypothesis: Hypothesis,
    pub passed: bool,
    /// The evaluated quantity and the threshold it is compared with.
    pub value: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasinSpec {
    pub name: String,
    pub u0: DensitySpec,
    pub expected: Symmetry,
    pub hypotheses: Vec<Hypothesis>,
}

impl BasinSpec {
    /// Mirror the initial density, the expected branch and the mean-sign
    /// hypotheses.
    pub fn reflect(&self) -> Self {
        let expected = match self.expected {
            Symmetry::AsymmetricPlus => Symmetry::AsymmetricMinus,
            Symmetry::AsymmetricMinus => Symmetry::AsymmetricPlus,
            Symmetry::Symmetric => Symmetry::Symmetric,
        };
        Self {
            name: alloc::format!("{} (mirrored)", self.name),
            u0: self.u0.reflect(),
            expected,
            hypotheses: self.hypotheses.iter().map(|h| h.reflect()).collect(),
        }
    }
}

pub fn check_hypothesis(
    h: Hypothesis,
    u0: &GridDensity,
    v: &ConfiningPotential,
    f: &InteractionPotential,
    eps: f64,
) -> Result<HypothesisCheck, ExperimentError> {
    let (value, threshold, passed) = match h {
        Hypothesis::Symmetric => {
            let a = u0.asymmetry();
            (a, 1e-12, a <= 1e-12)
        }
        Hypothesis::MeanPositive => {
            let m = u0.mean();
            (m, 0.0, m > 0.0)
        }
        Hypothesis::MeanNegative => {
            let m = u0.mean();
            (m, 0.0, m < 0.0)
        }
        Hypothesis::EnergyBelowSymmetricLevel => {
            let (level, _) = asymptotics::predicted_limits(v, f)?;
            let e = u0.potential_energy(v, f);
            (e, level, e < level)
        }
        Hypothesis::FreeEnergyBelowHyperplane => {
            let bound = hyperplane_lower_bound(v, f, eps);
            let e = free_energy(u0, v, f, eps).total;
            (e, bound, e < bound)
        }
    };
    Ok(HypothesisCheck {
        hypothesis: h,
        passed,
        value,
        threshold,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasinVerdict {
    pub name: String,
    pub expected: Symmetry,
    pub checks: Vec<HypothesisCheck>,
    pub hypothesis_ok: bool,
    pub outcome: Result<ConvergenceVerdict, ExperimentError>,
    /// Converged to the expected branch with all consistency checks.
    pub passed: bool,
}

impl BasinVerdict {
    pub fn matched_branch(&self) -> Option<Symmetry> {
        self.outcome.as_ref().ok().map(|v| v.matched_branch)
    }

    pub fn final_distance(&self) -> f64 {
        match &self.outcome {
            Ok(v) => v.final_distance,
            Err(ExperimentError::NoMatch { final_distance, .. }) => *final_distance,
            Err(_) => f64::NAN,
        }
    }

    pub fn fe_limit(&self) -> f64 {
        match &self.outcome {
            Ok(v) => v.fe_limit,
            Err(ExperimentError::NoMatch { fe_limit, .. }) => *fe_limit,
            Err(_) => f64::NAN,
        }
    }

    /// Failures that count against the run: in-hypothesis runs that did not
    /// pass. Out-of-hypothesis outcomes are informational.
    pub fn is_failure(&self) -> bool {
        self.hypothesis_ok && !self.passed
    }
}

/// Check the hypotheses of `spec`, run the convergence experiment and compare
/// the limit with the expected branch. In strict mode a failed hypothesis is
/// an error; otherwise the run is labeled out-of-hypothesis.
pub fn verify_basin(
    spec: &BasinSpec,
    v: &ConfiningPotential,
    f: &InteractionPotential,
    cfg: &ExperimentConfig,
    known: Option<&EnumerationReport>,
) -> Result<BasinVerdict, ExperimentError> {
    let u0 = spec.u0.sample(&cfg.stationary.grid)?;
    let checks = spec
        .hypotheses
        .iter()
        .map(|&h| check_hypothesis(h, &u0, v, f, cfg.eps()))
        .collect::<Result<Vec<_>, _>>()?;
    let hypothesis_ok = checks.iter().all(|c| c.passed);
    if !hypothesis_ok && cfg.strict {
        let failed = checks.iter().find(|c| !c.passed).expect("some check failed");
        return Err(ExperimentError::HypothesisFailed {
            name: failed.hypothesis.name().into(),
        });
    }
    let outcome = match verify_global_convergence(&u0, v, f, cfg, known) {
        Ok(v) => Ok(v),
        Err(e @ ExperimentError::NoMatch { .. }) => Err(e),
        Err(e) => return Err(e),
    };
    let passed = matches!(&outcome, Ok(v) if v.passed && v.matched_branch == spec.expected);
    Ok(BasinVerdict {
        name: spec.name.clone(),
        expected: spec.expected,
        checks,
        hypothesis_ok,
        outcome,
        passed,
    })
}

/// `-ε/4 - 4ε/e + min_x (V(x) + F''(0) x²/2 - ε x²/4)`, a lower bound for
/// `Υ_ε` over zero-mean densities.
pub fn hyperplane_lower_bound(v: &ConfiningPotential, f: &InteractionPotential, eps: f64) -> f64 {
    let q = v
        .poly()
        .add(&crate::Polynomial::monomial(0.5 * f.curvature_at_origin() - 0.25 * eps, 2));
    let (_, min) = q.global_min().expect("even polynomial with positive leading coefficient");
    -0.25 * eps - 4.0 * eps / core::f64::consts::E + min
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperplaneBounds {
    pub lower: f64,
    /// Smallest `Υ_ε` found over symmetric two-bump densities.
    pub upper: f64,
    pub witness: DensitySpec,
}

/// The rigorous lower bound together with a numerical upper bound from a
/// search over `½N(c, s²) + ½N(-c, s²)` on the configured grid.
pub fn inf_over_hyperplane(
    v: &ConfiningPotential,
    f: &InteractionPotential,
    eps: f64,
    cfg: &StationaryConfig,
) -> Result<HyperplaneBounds, ExperimentError> {
    let grid = &cfg.grid;
    let dx = grid.dx();
    let fe = |c: f64, s: f64| -> Result<f64, ExperimentError> {
        let u = DensitySpec::SymmetricPair { center: c, std: s }.sample(grid)?;
        Ok(free_energy(&u, v, f, eps).total)
    };
    let c_max = 0.75 * grid.half_width();
    let s_min = 3.0 * dx;
    let s_max = 0.25 * grid.half_width();
    let mut best = (0.0, s_max, f64::INFINITY);
    for i in 0..=40 {
        let c = c_max * i as f64 / 40.0;
        for j in 0..=30 {
            let s = s_min * math::exp(libm::log(s_max / s_min) * j as f64 / 30.0);
            let e = fe(c, s)?;
            if e < best.2 {
                best = (c, s, e);
            }
        }
    }
    // coordinate refinement with shrinking steps
    let (mut c, mut s, mut e) = best;
    let mut hc = c_max / 40.0;
    let mut hs = 0.2 * s;
    while hc > 1e-6 {
        let mut improved = false;
        for (dc, ds) in [(hc, 0.0), (-hc, 0.0), (0.0, hs), (0.0, -hs)] {
            let (nc, ns) = ((c + dc).max(0.0), (s + ds).max(s_min));
            let ne = fe(nc, ns)?;
            if ne < e {
                (c, s, e) = (nc, ns, ne);
                improved = true;
            }
        }
        if !improved {
            hc *= 0.5;
            hs *= 0.5;
        }
    }
    Ok(HyperplaneBounds {
        lower: hyperplane_lower_bound(v, f, eps),
        upper: e,
        witness: DensitySpec::SymmetricPair { center: c, std: s },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::validate_confining;

    fn quartic() -> ConfiningPotential {
        validate_confining(&[0.0, 0.0, -0.5, 0.0, 0.25]).unwrap()
    }

    fn config(eps: f64) -> ExperimentConfig {
        let v = quartic();
        let st = StationaryConfig::for_potential(&v, eps, 801).unwrap();
        let solver = SolverConfig::new(eps, 0.01, 200.0).unwrap();
        ExperimentConfig::new(solver, st)
    }

    #[test]
    fn lower_bound_limits() {
        let v = quartic();
        let lin = InteractionPotential::quadratic(0.5).unwrap();
        let syn = InteractionPotential::quadratic(1.5).unwrap();
        assert!((hyperplane_lower_bound(&v, &lin, 1e-9) + 0.0625).abs() < 1e-8);
        assert!(hyperplane_lower_bound(&v, &syn, 1e-9).abs() < 1e-8);
    }

    #[test]
    fn stationary_start_converges_immediately() {
        let v = quartic();
        let f = InteractionPotential::quadratic(0.5).unwrap();
        let cfg = config(0.1);
        let rep = stationary::enumerate(&v, &f, 0.1, &cfg.stationary).unwrap();
        let plus = rep.plus().unwrap();
        let verdict =
            verify_global_convergence(&plus.density, &v, &f, &cfg, Some(&rep)).unwrap();
        assert!(verdict.passed);
        assert_eq!(verdict.matched_branch, Symmetry::AsymmetricPlus);
        assert!(verdict.final_distance < 1e-12);
        assert!(verdict.trajectory.steps <= 2);
    }

    #[test]
    fn strict_mode_rejects_failed_hypothesis() {
        let v = quartic();
        let f = InteractionPotential::quadratic(0.5).unwrap();
        let mut cfg = config(0.1);
        cfg.strict = true;
        let spec = BasinSpec {
            name: "wrong sign".into(),
            u0: DensitySpec::Gaussian { mean: -0.5, std: 0.2 },
            expected: Symmetry::AsymmetricPlus,
            hypotheses: alloc::vec![Hypothesis::MeanPositive],
        };
        let err = verify_basin(&spec, &v, &f, &cfg, None).unwrap_err();
        assert_eq!(err, ExperimentError::HypothesisFailed { name: "mean_positive".into() });
    }

    #[test]
    fn hyperplane_sandwich() {
        let v = quartic();
        let f = InteractionPotential::quadratic(0.5).unwrap();
        let cfg = StationaryConfig::for_potential(&v, 0.1, 401).unwrap();
        let b = inf_over_hyperplane(&v, &f, 0.1, &cfg).unwrap();
        assert!(b.upper >= b.lower);
    }
}
