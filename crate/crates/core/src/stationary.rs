//! Stationary measures as fixed points of the self-consistency map
//! `m ↦ moments(Z⁻¹ exp[-(2/ε)(V + F∗u_m)])`, where `F∗u_m` only depends on
//! the first `deg F` moments.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::measures::{
    default_moment_order, free_energy, DensitySpec, FreeEnergyBreakdown, Grid, GridDensity,
    MeasureError, MomentVector,
};
use crate::pde;
use crate::poly::{expand_against_moments, Polynomial};
use crate::potentials::{ConfiningPotential, InteractionPotential};

#[derive(Clone, Debug, PartialEq)]
pub enum StationaryError {
    DegenerateNormalization { z: f64 },
    NoConvergence { iterations: usize, residual: f64 },
    Uncertified { eta_norm: f64 },
    InvalidSeed(&'static str),
    NoAdmissibleRoot { candidates: usize },
    Measure(MeasureError),
}

impl fmt::Display for StationaryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DegenerateNormalization { z } => {
                write!(f, "normalization constant {z} underflowed; widen the grid or raise eps")
            }
            Self::NoConvergence {
                iterations,
                residual,
            } => write!(f, "no fixed point after {iterations} iterations (residual {residual:e})"),
            Self::Uncertified { eta_norm } => {
                write!(f, "fixed point fails the stationarity certificate: max|eta| = {eta_norm:e}")
            }
            Self::InvalidSeed(why) => write!(f, "invalid seed: {why}"),
            Self::NoAdmissibleRoot { candidates } => write!(
                f,
                "expected one admissible nonnegative root of V'(x) + F'(2x)/2, found {candidates}"
            ),
            Self::Measure(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for StationaryError {}

impl From<MeasureError> for StationaryError {
    fn from(e: MeasureError) -> Self {
        Self::Measure(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symmetry {
    Symmetric,
    AsymmetricPlus,
    AsymmetricMinus,
}

impl Symmetry {
    pub fn label(self) -> &'static str {
        match self {
            Self::Symmetric => "symmetric",
            Self::AsymmetricPlus => "asymmetric_plus",
            Self::AsymmetricMinus => "asymmetric_minus",
        }
    }
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum M3Status {
    /// Exactly three measures: one symmetric and a mirrored asymmetric pair.
    M3,
    /// The same, counting only measures with free energy at most `M`.
    M3Prime(f64),
    /// A unique symmetric measure, other counts unresolved.
    ZeroM1Only,
    Other,
}

impl fmt::Display for M3Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::M3 => write!(f, "M3"),
            Self::M3Prime(m) => write!(f, "M3_prime({m})"),
            Self::ZeroM1Only => write!(f, "ZeroM1_only"),
            Self::Other => write!(f, "other"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryConfig {
    pub grid: Grid,
    pub damping: f64,
    pub tol_fp: f64,
    pub max_iter: usize,
    pub eta_tol: f64,
    pub dedup_tol: f64,
    /// Odd-moment magnitude below which a measure counts as symmetric.
    pub odd_tol: f64,
    /// Energy level `M` for the primed count.
    pub energy_level: Option<f64>,
    pub seed_std: f64,
    pub extra_seeds: Vec<DensitySpec>,
}

impl StationaryConfig {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            damping: 0.5,
            tol_fp: 1e-12,
            max_iter: 10_000,
            eta_tol: 1e-7,
            dedup_tol: 1e-6,
            odd_tol: 1e-9,
            energy_level: None,
            seed_std: 0.2,
            extra_seeds: Vec::new(),
        }
    }

    /// Default grid for `V` at noise `eps` with `n` nodes.
    pub fn for_potential(v: &ConfiningPotential, eps: f64, n: usize) -> Result<Self, StationaryError> {
        Ok(Self::new(Grid::for_potential(v, eps, n)?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryMeasure {
    pub density: GridDensity,
    pub moments: MomentVector,
    pub free_energy: FreeEnergyBreakdown,
    pub symmetry: Symmetry,
    /// Final `max_k |T(m)_k - m_k|` of the self-consistency map.
    pub residual: f64,
    /// `max |η|` recomputed from the density.
    pub eta_norm: f64,
    pub iterations: usize,
}

/// `W = V + F∗u` with `F∗u` expanded from the given moments.
pub fn self_consistent_potential(
    moments: &MomentVector,
    v: &ConfiningPotential,
    f: &InteractionPotential,
) -> Result<Polynomial, StationaryError> {
    if f.is_zero() {
        return Ok(v.poly().clone());
    }
    if moments.len() < f.degree() + 1 {
        return Err(StationaryError::InvalidSeed("moment vector shorter than deg F + 1"));
    }
    Ok(v.poly().add(&expand_against_moments(f.poly(), moments.as_slice())))
}

/// `Z⁻¹ exp[-(2/ε)(V + F∗u)]` on `grid`, with `F∗u` built from `moments`.
pub fn gibbs_density(
    moments: &MomentVector,
    v: &ConfiningPotential,
    f: &InteractionPotential,
    eps: f64,
    grid: &Grid,
) -> Result<GridDensity, StationaryError> {
    if moments.as_slice().iter().any(|m| !m.is_finite()) {
        return Err(StationaryError::InvalidSeed("non-finite moments"));
    }
    let w = self_consistent_potential(moments, v, f)?;
    let wx: Vec<f64> = grid.nodes().iter().map(|&x| w.eval(x)).collect();
    let wmin = wx.iter().copied().fold(f64::INFINITY, f64::min);
    let vals: Vec<f64> = wx.iter().map(|&y| math::exp(-2.0 * (y - wmin) / eps)).collect();
    let z = grid.integrate(|i| vals[i]);
    if !(z > 1e-300) || !z.is_finite() {
        return Err(StationaryError::DegenerateNormalization { z });
    }
    Ok(GridDensity::from_raw(
        grid.clone(),
        vals.into_iter().map(|x| x / z).collect(),
    ))
}

fn fixed_point_order(f: &InteractionPotential) -> usize {
    f.degree().max(1)
}

/// Damped iteration of the self-consistency map from `seed`.
///
/// The residual is `max_{1≤k≤deg F} |T(m)_k - m_k|`; the damping factor is
/// halved whenever the residual grows.
pub fn fixed_point_solve(
    seed: &MomentVector,
    v: &ConfiningPotential,
    f: &InteractionPotential,
    eps: f64,
    cfg: &StationaryConfig,
) -> Result<StationaryMeasure, StationaryError> {
    let kf = fixed_point_order(f);
    if seed.len() < kf + 1 {
        return Err(StationaryError::InvalidSeed("moment vector shorter than deg F + 1"));
    }
    let mut m: Vec<f64> = seed.as_slice()[..=kf].to_vec();
    if m.iter().any(|x| !x.is_finite()) {
        return Err(StationaryError::InvalidSeed("non-finite moments"));
    }
    m[0] = 1.0;
    let mut lambda = cfg.damping;
    let mut prev = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let mv = MomentVector::new(m.clone());
        let u = gibbs_density(&mv, v, f, eps, &cfg.grid)?;
        let t = u.moments(kf);
        residual = (1..=kf).fold(0.0_f64, |r, k| r.max((t.get(k) - m[k]).abs()));
        if residual < cfg.tol_fp {
            return certify(u, residual, it, v, f, eps, cfg);
        }
        if residual > prev {
            lambda = (0.5 * lambda).max(1.0 / 1024.0);
        }
        prev = residual;
        for (k, mk) in m.iter_mut().enumerate().take(kf + 1).skip(1) {
            *mk = (1.0 - lambda) * *mk + lambda * t.get(k);
        }
    }
    Err(StationaryError::NoConvergence {
        iterations: cfg.max_iter,
        residual,
    })
}

fn certify(
    density: GridDensity,
    residual: f64,
    iterations: usize,
    v: &ConfiningPotential,
    f: &InteractionPotential,
    eps: f64,
    cfg: &StationaryConfig,
) -> Result<StationaryMeasure, StationaryError> {
    let eta_norm = pde::eta(&density, v, f, eps)
        .iter()
        .fold(0.0_f64, |m, e| m.max(e.abs()));
    if !(eta_norm <= cfg.eta_tol) {
        return Err(StationaryError::Uncertified { eta_norm });
    }
    let moments = density.moments(default_moment_order(v, f).max(4));
    let symmetry = classify(&moments, cfg.odd_tol);
    Ok(StationaryMeasure {
        free_energy: free_energy(&density, v, f, eps),
        density,
        moments,
        symmetry,
        residual,
        eta_norm,
        iterations,
    })
}

fn classify(m: &MomentVector, odd_tol: f64) -> Symmetry {
    if m.max_odd_abs() <= odd_tol {
        Symmetry::Symmetric
    } else if m.mean() > 0.0 {
        Symmetry::AsymmetricPlus
    } else {
        Symmetry::AsymmetricMinus
    }
}

/// The unique nonnegative root of `V'(x) + F'(2x)/2` with
/// `V''(x) + (F''(0) + F''(2x))/2 > 0`.
pub fn find_x0(v: &ConfiningPotential, f: &InteractionPotential) -> Result<f64, StationaryError> {
    let g = v.d1().add(&f.d1().scale_arg(2.0).scale(0.5));
    let second = |x: f64| v.d2().eval(x) + 0.5 * (f.curvature_at_origin() + f.d2().eval(2.0 * x));
    let mut admissible: Vec<f64> = g
        .real_roots()
        .into_iter()
        .filter(|&r| r > -1e-10)
        .map(|r| if r.abs() <= 1e-10 { 0.0 } else { g.newton_polish(r, 50) })
        .filter(|&r| second(r) > 0.0)
        .collect();
    admissible.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    match admissible.as_slice() {
        [x] => Ok(*x),
        other => Err(StationaryError::NoAdmissibleRoot {
            candidates: other.len(),
        }),
    }
}

/// Named seed for the enumeration battery.
#[derive(Clone, Debug, PartialEq)]
pub struct Seed {
    pub label: String,
    pub moments: MomentVector,
}

/// Gaussian bumps at `0, ±x₀, ±a, ±a/2`, the symmetric pair `±x₀`, and any
/// configured extras. Seeds whose centre repeats an earlier one are skipped.
pub fn seed_battery(
    v: &ConfiningPotential,
    f: &InteractionPotential,
    cfg: &StationaryConfig,
) -> Result<Vec<Seed>, StationaryError> {
    let a = v.well();
    let x0 = find_x0(v, f).ok();
    let std = cfg.seed_std;
    let mut centres: Vec<(String, f64)> = vec![("bump 0".into(), 0.0)];
    let mut push = |name: &str, c: f64| {
        if !centres.iter().any(|(_, d)| (c - d).abs() < 1e-12) {
            centres.push((name.into(), c));
        }
    };
    if let Some(x0) = x0 {
        push("bump +x0", x0);
        push("bump -x0", -x0);
    }
    push("bump +a", a);
    push("bump -a", -a);
    push("bump +a/2", 0.5 * a);
    push("bump -a/2", -0.5 * a);

    let k = default_moment_order(v, f).max(4);
    let mut seeds = Vec::new();
    for (label, c) in centres {
        let u = DensitySpec::Gaussian { mean: c, std }.sample(&cfg.grid)?;
        seeds.push(Seed {
            label,
            moments: u.moments(k),
        });
    }
    if let Some(x0) = x0.filter(|&x| x > 0.0) {
        let u = DensitySpec::SymmetricPair { center: x0, std }.sample(&cfg.grid)?;
        seeds.push(Seed {
            label: "pair ±x0".into(),
            moments: u.moments(k),
        });
    }
    for (i, spec) in cfg.extra_seeds.iter().enumerate() {
        let u = spec.sample(&cfg.grid)?;
        seeds.push(Seed {
            label: alloc::format!("extra {i}"),
            moments: u.moments(k),
        });
    }
    Ok(seeds)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedOutcome {
    pub label: String,
    /// Index into `measures`, or the failure.
    pub result: Result<usize, StationaryError>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnumerationReport {
    pub measures: Vec<StationaryMeasure>,
    pub m3_status: M3Status,
    pub ordering_ok: bool,
    pub seeds: Vec<SeedOutcome>,
}

impl EnumerationReport {
    pub fn count(&self, s: Symmetry) -> usize {
        self.measures.iter().filter(|m| m.symmetry == s).count()
    }

    pub fn symmetric(&self) -> Option<&StationaryMeasure> {
        self.measures.iter().find(|m| m.symmetry == Symmetry::Symmetric)
    }

    pub fn plus(&self) -> Option<&StationaryMeasure> {
        lowest(self.measures.iter().filter(|m| m.symmetry == Symmetry::AsymmetricPlus))
    }

    pub fn minus(&self) -> Option<&StationaryMeasure> {
        lowest(self.measures.iter().filter(|m| m.symmetry == Symmetry::AsymmetricMinus))
    }

    /// Index of the measure closest to `m` in the first four moments.
    pub fn nearest(&self, m: &MomentVector) -> Option<(usize, f64)> {
        self.measures
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.moments.distance(m, 4)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

fn lowest<'a>(it: impl Iterator<Item = &'a StationaryMeasure>) -> Option<&'a StationaryMeasure> {
    it.min_by(|a, b| a.free_energy.total.total_cmp(&b.free_energy.total))
}

/// Solve every seed of the battery and assemble the report.
pub fn enumerate(
    v: &ConfiningPotential,
    f: &InteractionPotential,
    eps: f64,
    cfg: &StationaryConfig,
) -> Result<EnumerationReport, StationaryError> {
    let seeds = seed_battery(v, f, cfg)?;
    let solved: Vec<_> = seeds
        .into_iter()
        .map(|s| {
            let r = fixed_point_solve(&s.moments, v, f, eps, cfg);
            (s.label, r)
        })
        .collect();
    Ok(assemble_report(solved, cfg))
}

/// Deduplicate solved seeds and classify the resulting set.
pub fn assemble_report(
    solved: Vec<(String, Result<StationaryMeasure, StationaryError>)>,
    cfg: &StationaryConfig,
) -> EnumerationReport {
    let mut measures: Vec<StationaryMeasure> = Vec::new();
    let mut seeds = Vec::new();
    for (label, r) in solved {
        let result = r.map(|m| {
            match measures
                .iter()
                .position(|q| q.moments.distance(&m.moments, 4) < cfg.dedup_tol)
            {
                Some(i) => i,
                None => {
                    measures.push(m);
                    measures.len() - 1
                }
            }
        });
        seeds.push(SeedOutcome { label, result });
    }
    let m3_status = m3_status(&measures, cfg.energy_level);
    let ordering_ok = ordering_ok(&measures);
    EnumerationReport {
        measures,
        m3_status,
        ordering_ok,
        seeds,
    }
}

fn three_shape<'a>(it: impl Iterator<Item = &'a StationaryMeasure> + Clone) -> bool {
    let count = |s| it.clone().filter(|m| m.symmetry == s).count();
    it.clone().count() == 3
        && count(Symmetry::Symmetric) == 1
        && count(Symmetry::AsymmetricPlus) == 1
        && count(Symmetry::AsymmetricMinus) == 1
}

fn m3_status(measures: &[StationaryMeasure], level: Option<f64>) -> M3Status {
    if three_shape(measures.iter()) {
        return M3Status::M3;
    }
    if let Some(m) = level {
        if three_shape(measures.iter().filter(|s| s.free_energy.total <= m)) {
            return M3Status::M3Prime(m);
        }
    }
    if measures.iter().filter(|m| m.symmetry == Symmetry::Symmetric).count() == 1 {
        M3Status::ZeroM1Only
    } else {
        M3Status::Other
    }
}

/// `Υ(u₊) = Υ(u₋)` within 1e-9 and both below every symmetric measure.
fn ordering_ok(measures: &[StationaryMeasure]) -> bool {
    let best = |s| lowest(measures.iter().filter(|m| m.symmetry == s));
    let (Some(p), Some(n)) = (best(Symmetry::AsymmetricPlus), best(Symmetry::AsymmetricMinus)) else {
        return false;
    };
    let sym: Vec<f64> = measures
        .iter()
        .filter(|m| m.symmetry == Symmetry::Symmetric)
        .map(|m| m.free_energy.total)
        .collect();
    if sym.is_empty() {
        return false;
    }
    let (ep, en) = (p.free_energy.total, n.free_energy.total);
    (ep - en).abs() <= 1e-9 && sym.iter().all(|&s| ep < s && en < s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::validate_confining;

    fn quartic() -> ConfiningPotential {
        validate_confining(&[0.0, 0.0, -0.5, 0.0, 0.25]).unwrap()
    }

    #[test]
    fn x0_examples() {
        let v = quartic();
        let x0 = find_x0(&v, &InteractionPotential::quadratic(0.5).unwrap()).unwrap();
        assert!((x0 - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(find_x0(&v, &InteractionPotential::quadratic(1.5).unwrap()).unwrap(), 0.0);
        assert!((find_x0(&v, &InteractionPotential::none()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_against_point_mass() {
        let v = quartic();
        let f = InteractionPotential::quadratic(1.0).unwrap();
        let g = Grid::new(3.0, 601).unwrap();
        let a = 0.4;
        let u = gibbs_density(&MomentVector::dirac(a, 2), &v, &f, 0.5, &g).unwrap();
        let oracle = GridDensity::from_fn(g.clone(), |x| {
            math::exp(-4.0 * (v.value(x) + 0.5 * (x - a) * (x - a)))
        })
        .unwrap();
        assert!(u.sup_distance(&oracle) < 1e-12 * oracle.values().iter().fold(0.0, |m: f64, x| m.max(*x)));
        assert!((u.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_seed_stays_symmetric() {
        let v = quartic();
        let f = InteractionPotential::quadratic(0.5).unwrap();
        let cfg = StationaryConfig::for_potential(&v, 0.1, 801).unwrap();
        let seed = DensitySpec::Gaussian { mean: 0.0, std: 0.2 }
            .sample(&cfg.grid)
            .unwrap()
            .moments(4);
        let s = fixed_point_solve(&seed, &v, &f, 0.1, &cfg).unwrap();
        assert_eq!(s.symmetry, Symmetry::Symmetric);
        assert_eq!(s.moments.max_odd_abs(), 0.0);
        assert!(s.eta_norm <= 1e-7);
    }

    #[test]
    fn reflected_seed_gives_reflected_measure() {
        let v = quartic();
        let f = InteractionPotential::quadratic(0.5).unwrap();
        let cfg = StationaryConfig::for_potential(&v, 0.1, 801).unwrap();
        let spec = DensitySpec::Gaussian { mean: 1.0, std: 0.2 };
        let up = spec.sample(&cfg.grid).unwrap().moments(4);
        let down = spec.reflect().sample(&cfg.grid).unwrap().moments(4);
        let p = fixed_point_solve(&up, &v, &f, 0.1, &cfg).unwrap();
        let m = fixed_point_solve(&down, &v, &f, 0.1, &cfg).unwrap();
        assert_eq!(p.symmetry, Symmetry::AsymmetricPlus);
        assert_eq!(m.symmetry, Symmetry::AsymmetricMinus);
        assert_eq!(p.moments.reflect(), m.moments);
        assert_eq!(p.free_energy.total, m.free_energy.total);
        assert!(p.moments.mean() > 0.9);
    }

    #[test]
    fn noninteracting_case_is_immediate() {
        let v = quartic();
        let f = InteractionPotential::none();
        let cfg = StationaryConfig::for_potential(&v, 0.5, 401).unwrap();
        let r = enumerate(&v, &f, 0.5, &cfg).unwrap();
        assert_eq!(r.measures.len(), 1);
        assert_eq!(r.m3_status, M3Status::ZeroM1Only);
        assert!(!r.ordering_ok);
    }
}
