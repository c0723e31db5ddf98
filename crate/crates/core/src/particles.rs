//! Euler–Maruyama simulation of the mean-field particle system
//!
//! ```text
//! dX^i = sqrt(ε) dB^i - V'(X^i) dt - (1/N) Σ_j F'(X^i - X^j) dt
//! ```
//!
//! The interaction sum runs over all `j`, including `j = i` (`F'(0) = 0`).
//! It is evaluated through the empirical power sums `S_k = (1/N) Σ_j x_j^k`,
//! which turn `(1/N) Σ_j F'(x - x_j)` into a polynomial in `x`.
//!
//! Every particle owns a ChaCha8 stream (stream id = particle index) derived
//! from the run seed, so a run is reproducible regardless of how the particle
//! loop is scheduled.

use alloc::vec::Vec;
use core::fmt;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StandardUniform};

use crate::math;
use crate::measures::{Grid, GridDensity, MeasureError, MomentVector};
use crate::poly::{expand_against_moments, Polynomial};
use crate::potentials::{ConfiningPotential, InteractionPotential};

#[derive(Clone, Debug, PartialEq)]
pub enum ParticleError {
    InvalidConfig(&'static str),
    NumericalBlowup { t: f64, index: usize, value: f64 },
    Measure(MeasureError),
}

impl fmt::Display for ParticleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidConfig(why) => write!(f, "invalid particle config: {why}"),
            Self::NumericalBlowup { t, index, value } => write!(
                f,
                "particle {index} reached {value} at t = {t}; reduce dt"
            ),
            Self::Measure(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ParticleError {}

impl From<MeasureError> for ParticleError {
    fn from(e: MeasureError) -> Self {
        Self::Measure(e)
    }
}

/// Initial law of the particle cloud.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialLaw {
    /// Independent draws by inverse CDF from a grid density.
    Density(GridDensity),
    /// Fixed starting positions; `N` is their count.
    Points(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleConfig {
    pub n: usize,
    pub eps: f64,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub record_every: usize,
    /// `|x|` beyond which a step is declared a blowup.
    pub guard: f64,
}

impl ParticleConfig {
    pub fn new(n: usize, eps: f64, dt: f64, t_end: f64, seed: u64) -> Result<Self, ParticleError> {
        if n < 2 {
            return Err(ParticleError::InvalidConfig("need at least two particles"));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(ParticleError::InvalidConfig("eps must be nonnegative"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ParticleError::InvalidConfig("dt must be positive"));
        }
        if !(t_end >= 0.0) {
            return Err(ParticleError::InvalidConfig("t_end must be nonnegative"));
        }
        Ok(Self {
            n,
            eps,
            dt,
            t_end,
            seed,
            record_every: 1,
            guard: 1e6,
        })
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }
}

/// Positions, time and per-particle generators.
#[derive(Clone, Debug)]
pub struct ParticleState {
    positions: Vec<f64>,
    t: f64,
    rngs: Vec<ChaCha8Rng>,
}

impl ParticleState {
    /// Draw the initial cloud. With [`InitialLaw::Points`] the count must
    /// match `cfg.n`.
    pub fn init(cfg: &ParticleConfig, law: &InitialLaw) -> Result<Self, ParticleError> {
        let base = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut rngs: Vec<ChaCha8Rng> = (0..cfg.n)
            .map(|i| {
                let mut r = base.clone();
                r.set_stream(i as u64);
                r
            })
            .collect();
        let positions = match law {
            InitialLaw::Points(p) => {
                if p.len() != cfg.n {
                    return Err(ParticleError::InvalidConfig("point count differs from n"));
                }
                if p.iter().any(|x| !x.is_finite()) {
                    return Err(ParticleError::InvalidConfig("non-finite initial position"));
                }
                p.clone()
            }
            InitialLaw::Density(u) => {
                let icdf = InverseCdf::new(u);
                rngs.iter_mut()
                    .map(|r| icdf.quantile(StandardUniform.sample(r)))
                    .collect()
            }
        };
        Ok(Self {
            positions,
            t: 0.0,
            rngs,
        })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn moments(&self, k: usize) -> MomentVector {
        empirical_moments(&self.positions, k)
    }
}

/// `S_k = (1/N) Σ_j x_j^k` for `k = 0..=k_max`.
pub fn empirical_moments(x: &[f64], k_max: usize) -> MomentVector {
    let mut s = alloc::vec![0.0; k_max + 1];
    for &xi in x {
        let mut p = 1.0;
        for slot in s.iter_mut() {
            *slot += p;
            p *= xi;
        }
    }
    let n = x.len() as f64;
    MomentVector::new(s.into_iter().map(|v| v / n).collect())
}

fn mean_field_polynomial(x: &[f64], p: &Polynomial) -> Polynomial {
    if p.is_zero() {
        return Polynomial::zero();
    }
    let s = empirical_moments(x, p.degree());
    expand_against_moments(p, s.as_slice())
}

/// `-V'(x_i) - (1/N) Σ_j F'(x_i - x_j)` for every particle, in
/// `O(N deg F)` through power sums.
pub fn drift_all(x: &[f64], v: &ConfiningPotential, f: &InteractionPotential) -> Vec<f64> {
    let conv = mean_field_polynomial(x, f.d1());
    x.iter().map(|&xi| -v.d1().eval(xi) - conv.eval(xi)).collect()
}

/// Reference `O(N²)` evaluation of [`drift_all`].
pub fn drift_all_pairwise(x: &[f64], v: &ConfiningPotential, f: &InteractionPotential) -> Vec<f64> {
    let n = x.len() as f64;
    x.iter()
        .map(|&xi| {
            let s: f64 = x.iter().map(|&xj| f.d1().eval(xi - xj)).sum();
            -v.d1().eval(xi) - s / n
        })
        .collect()
}

/// `Υ^N(x) = (1/N) Σ V(x_i) + (1/2N²) Σ_i Σ_j F(x_i - x_j)` by the double
/// sum.
pub fn upsilon_n(x: &[f64], v: &ConfiningPotential, f: &InteractionPotential) -> f64 {
    let n = x.len() as f64;
    let conf: f64 = x.iter().map(|&xi| v.value(xi)).sum::<f64>() / n;
    let mut inter = 0.0;
    for &xi in x {
        for &xj in x {
            inter += f.value(xi - xj);
        }
    }
    conf + 0.5 * inter / (n * n)
}

/// [`upsilon_n`] through power sums, `O(N deg F)`.
pub fn upsilon_n_power_sums(x: &[f64], v: &ConfiningPotential, f: &InteractionPotential) -> f64 {
    let n = x.len() as f64;
    let conv = mean_field_polynomial(x, f.poly());
    x.iter()
        .map(|&xi| v.value(xi) + 0.5 * conv.eval(xi))
        .sum::<f64>()
        / n
}

/// One Euler–Maruyama step.
pub fn em_step(
    state: &mut ParticleState,
    cfg: &ParticleConfig,
    v: &ConfiningPotential,
    f: &InteractionPotential,
) -> Result<(), ParticleError> {
    let b = drift_all(&state.positions, v, f);
    let sigma = math::sqrt(cfg.eps * cfg.dt);
    let t = state.t + cfg.dt;
    for (i, ((x, r), bi)) in state
        .positions
        .iter_mut()
        .zip(state.rngs.iter_mut())
        .zip(b)
        .enumerate()
    {
        let xi: f64 = StandardNormal.sample(r);
        *x += bi * cfg.dt + sigma * xi;
        if !(x.abs() <= cfg.guard) {
            return Err(ParticleError::NumericalBlowup { t, index: i, value: *x });
        }
    }
    state.t = t;
    Ok(())
}

/// Recorded empirical quantities of a particle run.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalTrajectory {
    pub times: Vec<f64>,
    /// Empirical moments `m_0..m_4`.
    pub moment_history: Vec<MomentVector>,
    pub upsilon_n: Vec<f64>,
    pub final_positions: Vec<f64>,
}

impl EmpiricalTrajectory {
    /// Monte-Carlo standard error of the empirical `m_k` (`k ∈ {1, 2}`) at
    /// record `i`, from the recorded moments up to order `2k`.
    pub fn standard_error(&self, i: usize, k: usize) -> f64 {
        let m = &self.moment_history[i];
        let n = self.final_positions.len() as f64;
        let var = (m.get(2 * k) - m.get(k) * m.get(k)).max(0.0);
        math::sqrt(var / n)
    }
}

/// Simulate until `t_end`, recording every `record_every` steps and at the
/// end.
pub fn run(
    cfg: &ParticleConfig,
    law: &InitialLaw,
    v: &ConfiningPotential,
    f: &InteractionPotential,
) -> Result<EmpiricalTrajectory, ParticleError> {
    let mut state = ParticleState::init(cfg, law)?;
    let steps = libm::round(cfg.t_end / cfg.dt) as usize;
    let mut rec = EmpiricalTrajectory {
        times: Vec::new(),
        moment_history: Vec::new(),
        upsilon_n: Vec::new(),
        final_positions: Vec::new(),
    };
    let record = |rec: &mut EmpiricalTrajectory, s: &ParticleState| {
        rec.times.push(s.t);
        rec.moment_history.push(s.moments(4));
        rec.upsilon_n.push(upsilon_n_power_sums(&s.positions, v, f));
    };
    record(&mut rec, &state);
    for k in 1..=steps {
        em_step(&mut state, cfg, v, f)?;
        if k % cfg.record_every == 0 || k == steps {
            record(&mut rec, &state);
        }
    }
    rec.final_positions = state.positions;
    Ok(rec)
}

/// Inverse of the piecewise-linear CDF obtained by cumulative trapezoid
/// integration of a grid density.
#[derive(Clone, Debug)]
pub struct InverseCdf {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    pub fn new(u: &GridDensity) -> Self {
        let g = u.grid();
        let vals = u.values();
        let nodes = g.nodes();
        let mut cdf = alloc::vec![0.0; g.len()];
        for i in 1..g.len() {
            cdf[i] = cdf[i - 1] + 0.5 * g.dx() * (vals[i - 1] + vals[i]);
        }
        let total = cdf[g.len() - 1];
        cdf.iter_mut().for_each(|c| *c /= total);
        Self { nodes, cdf }
    }

    /// The point where the CDF reaches `p ∈ [0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let i = self.cdf.partition_point(|&c| c < p).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (x0, x1) = (self.nodes[i - 1], self.nodes[i]);
        if c1 > c0 {
            x0 + (p - c0) / (c1 - c0) * (x1 - x0)
        } else {
            x0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    /// `0.9 min(σ, IQR/1.34) N^{-1/5}`.
    Silverman,
    Fixed(f64),
}

impl Bandwidth {
    pub fn resolve(self, x: &[f64]) -> f64 {
        match self {
            Self::Fixed(h) => h,
            Self::Silverman => {
                let n = x.len() as f64;
                let m = empirical_moments(x, 2);
                let sd = math::sqrt((m.get(2) - m.get(1) * m.get(1)).max(0.0));
                let mut sorted = x.to_vec();
                sorted.sort_by(f64::total_cmp);
                let q = |p: f64| sorted[libm::floor(p * (n - 1.0)) as usize];
                let iqr = q(0.75) - q(0.25);
                let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
                0.9 * spread * libm::pow(n, -0.2)
            }
        }
    }
}

/// Gaussian kernel density estimate of a point cloud on `grid`.
pub fn kde(x: &[f64], grid: &Grid, bandwidth: Bandwidth) -> Result<GridDensity, ParticleError> {
    let h = bandwidth.resolve(x);
    if !(h > 0.0) {
        return Err(ParticleError::InvalidConfig("bandwidth must be positive"));
    }
    let vals = grid
        .nodes()
        .iter()
        .map(|&y| {
            x.iter()
                .map(|&xi| {
                    let z = (y - xi) / h;
                    math::exp(-0.5 * z * z)
                })
                .sum::<f64>()
        })
        .collect();
    Ok(GridDensity::new(grid.clone(), vals)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::DensitySpec;
    use crate::potentials::{validate_confining, validate_interaction};

    fn quartic() -> ConfiningPotential {
        validate_confining(&[0.0, 0.0, -0.5, 0.0, 0.25]).unwrap()
    }

    #[test]
    fn two_particle_drift() {
        let v = quartic();
        let f = InteractionPotential::quadratic(1.0).unwrap();
        let b = drift_all(&[0.0, 1.0], &v, &f);
        // particle at 0: -V'(0) - (F'(0) + F'(-1))/2 = 0.5
        assert!((b[0] - 0.5).abs() < 1e-15);
        // particle at 1: -V'(1) - (F'(1) + F'(0))/2 = -0.5
        assert!((b[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn collapsed_cloud_feels_only_confinement() {
        let v = quartic();
        let f = validate_interaction(&[0.0, 0.0, 0.25, 0.0, 0.1]).unwrap();
        let c = 0.3;
        let b = drift_all(&[c; 7], &v, &f);
        for bi in b {
            assert!((bi + v.d1().eval(c)).abs() < 1e-14);
        }
    }

    #[test]
    fn upsilon_examples() {
        let v = quartic();
        let f = InteractionPotential::quadratic(1.0).unwrap();
        assert!((upsilon_n(&[1.0; 5], &v, &f) + 0.25).abs() < 1e-15);
        assert!(upsilon_n(&[0.0, 1.0], &v, &f).abs() < 1e-15);
        assert!(upsilon_n_power_sums(&[0.0, 1.0], &v, &f).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_pair_stays_put() {
        let v = quartic();
        let f = InteractionPotential::quadratic(0.5).unwrap();
        let cfg = ParticleConfig::new(2, 0.0, 0.01, 1.0, 7).unwrap();
        let mut s = ParticleState::init(&cfg, &InitialLaw::Points(alloc::vec![1.0, 1.0])).unwrap();
        for _ in 0..100 {
            em_step(&mut s, &cfg, &v, &f).unwrap();
        }
        assert_eq!(s.positions(), &[1.0, 1.0]);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let v = quartic();
        let f = InteractionPotential::quadratic(0.5).unwrap();
        let g = Grid::new(3.0, 301).unwrap();
        let u = DensitySpec::Gaussian { mean: 0.2, std: 0.4 }.sample(&g).unwrap();
        let cfg = ParticleConfig::new(200, 0.3, 1e-2, 0.5, 42).unwrap();
        let a = run(&cfg, &InitialLaw::Density(u.clone()), &v, &f).unwrap();
        let b = run(&cfg, &InitialLaw::Density(u.clone()), &v, &f).unwrap();
        assert_eq!(a, b);
        let other = ParticleConfig { seed: 43, ..cfg };
        let c = run(&other, &InitialLaw::Density(u), &v, &f).unwrap();
        assert_ne!(a.final_positions, c.final_positions);
    }

    #[test]
    fn blowup_is_reported() {
        // V' = x^3 - x with a huge step overshoots without bound
        let v = quartic();
        let f = InteractionPotential::none();
        let mut cfg = ParticleConfig::new(2, 0.0, 10.0, 100.0, 1).unwrap();
        cfg.guard = 1e3;
        let err = run(&cfg, &InitialLaw::Points(alloc::vec![2.0, -2.0]), &v, &f).unwrap_err();
        assert!(matches!(err, ParticleError::NumericalBlowup { .. }));
    }

    #[test]
    fn inverse_cdf_of_uniform() {
        let g = Grid::new(2.0, 401).unwrap();
        let u = DensitySpec::Uniform { lo: -1.0, hi: 1.0 }.sample(&g).unwrap();
        let icdf = InverseCdf::new(&u);
        assert!(icdf.quantile(0.5).abs() < 1e-12);
        assert!((icdf.quantile(0.75) - 0.5).abs() < 0.02);
        assert!(icdf.quantile(0.0) <= -0.99);
        assert!(icdf.quantile(1.0) >= 0.99);
    }

    #[test]
    fn kde_recovers_a_gaussian() {
        let g = Grid::new(4.0, 401).unwrap();
        let target = DensitySpec::Gaussian { mean: 0.0, std: 1.0 }.sample(&g).unwrap();
        let icdf = InverseCdf::new(&target);
        let n = 4000;
        let pts: Vec<f64> = (0..n).map(|i| icdf.quantile((i as f64 + 0.5) / n as f64)).collect();
        let est = kde(&pts, &g, Bandwidth::Silverman).unwrap();
        assert!(est.sup_distance(&target) < 0.02);
    }
}
