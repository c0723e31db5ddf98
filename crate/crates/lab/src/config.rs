//! Run configuration: a TOML file with a fixed set of keys.
//!
//! ```toml
//! eps = 0.1
//! seed = 7
//!
//! [potentials]
//! V = [0, 0, -0.5, 0, 0.25]
//! F = [0, 0, 0.25]
//!
//! [grid]
//! n = 801
//!
//! [initial]
//! kind = "gaussian"
//! mean = 0.4
//! std = 0.5
//! ```
//!
//! Unknown keys are rejected. Potentials are validated against the standing
//! assumptions before anything runs.

use std::path::PathBuf;

use mckean_core::pde::cfl_dt;
use mckean_core::{
    validate_confining, validate_interaction, ConfiningPotential, DensitySpec, Grid, GridDensity,
    Hypothesis, InteractionPotential, Polynomial, Scheme, SolverConfig, StationaryConfig, Symmetry,
};
use serde::Deserialize;

use crate::error::LabError;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    eps: Option<f64>,
    eps_list: Option<Vec<f64>>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    strict: Option<bool>,
    potentials: RawPotentials,
    grid: Option<RawGrid>,
    solver: Option<RawSolver>,
    stationary: Option<RawStationary>,
    particles: Option<RawParticles>,
    initial: Option<RawDensity>,
    laplace: Option<RawLaplace>,
    #[serde(default, rename = "experiment")]
    experiments: Vec<RawExperiment>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotentials {
    #[serde(rename = "V")]
    v: Vec<f64>,
    #[serde(rename = "F")]
    f: Vec<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(rename = "L")]
    half_width: Option<f64>,
    n: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    dt: Option<f64>,
    t_end: Option<f64>,
    scheme: Option<String>,
    record_every: Option<usize>,
    eta_tol: Option<f64>,
    stop_on_convergence: Option<bool>,
    moments: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawStationary {
    damping: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    eta_tol: Option<f64>,
    dedup_tol: Option<f64>,
    energy_level: Option<f64>,
    seed_std: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParticles {
    n: usize,
    dt: f64,
    t_end: f64,
    record_every: Option<usize>,
    write_points: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLaplace {
    #[serde(rename = "U")]
    u: Vec<f64>,
    eps_list: Vec<f64>,
    l: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    name: String,
    u0: RawDensity,
    expected: Option<String>,
    #[serde(default)]
    hypotheses: Vec<String>,
    #[serde(default)]
    mirror: bool,
}

#[derive(Deserialize, Clone)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawDensity {
    Gaussian { mean: f64, std: f64 },
    Mixture { components: Vec<[f64; 3]> },
    SymmetricPair { center: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
    Triangle { center: f64, half_width: f64 },
}

impl From<RawDensity> for DensitySpec {
    fn from(d: RawDensity) -> Self {
        match d {
            RawDensity::Gaussian { mean, std } => Self::Gaussian { mean, std },
            RawDensity::Mixture { components } => {
                Self::Mixture(components.into_iter().map(|[w, m, s]| (w, m, s)).collect())
            }
            RawDensity::SymmetricPair { center, std } => Self::SymmetricPair { center, std },
            RawDensity::Uniform { lo, hi } => Self::Uniform { lo, hi },
            RawDensity::Triangle { center, half_width } => Self::Triangle { center, half_width },
        }
    }
}

#[derive(Clone, Debug)]
pub struct GridSpec {
    /// `None` selects the truncation rule of the confining potential.
    pub half_width: Option<f64>,
    pub n: usize,
}

#[derive(Clone, Debug)]
pub struct SolverSpec {
    /// `None` selects the explicit CFL step of the initial density.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub scheme: Scheme,
    pub record_every: usize,
    pub eta_tol: f64,
    pub stop_on_convergence: bool,
    pub moments: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct StationarySpec {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub eta_tol: f64,
    pub dedup_tol: f64,
    pub energy_level: Option<f64>,
    pub seed_std: f64,
}

#[derive(Clone, Debug)]
pub struct ParticleSpec {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub write_points: bool,
}

#[derive(Clone, Debug)]
pub struct LaplaceSpec {
    pub u: Polynomial,
    pub eps_list: Vec<f64>,
    pub ls: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub name: String,
    pub u0: DensitySpec,
    pub expected: Option<Symmetry>,
    pub hypotheses: Vec<Hypothesis>,
    pub mirror: bool,
}

/// A fully validated configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub v: ConfiningPotential,
    pub f: InteractionPotential,
    pub eps: Option<f64>,
    pub eps_list: Vec<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub strict: bool,
    pub grid: GridSpec,
    pub solver: SolverSpec,
    pub stationary: StationarySpec,
    pub particles: Option<ParticleSpec>,
    pub initial: Option<DensitySpec>,
    pub laplace: Option<LaplaceSpec>,
    pub experiments: Vec<ExperimentSpec>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn positive(field: &str, x: f64) -> Result<f64, LabError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(LabError::validation(field, "positive", format!("got {x}")))
    }
}

fn parse_symmetry(field: &str, s: &str) -> Result<Symmetry, LabError> {
    match s {
        "symmetric" => Ok(Symmetry::Symmetric),
        "plus" | "asymmetric_plus" => Ok(Symmetry::AsymmetricPlus),
        "minus" | "asymmetric_minus" => Ok(Symmetry::AsymmetricMinus),
        other => Err(LabError::validation(
            field,
            "branch",
            format!("unknown branch `{other}` (symmetric, plus, minus)"),
        )),
    }
}

fn parse_hypothesis(field: &str, s: &str) -> Result<Hypothesis, LabError> {
    [
        Hypothesis::Symmetric,
        Hypothesis::MeanPositive,
        Hypothesis::MeanNegative,
        Hypothesis::EnergyBelowSymmetricLevel,
        Hypothesis::FreeEnergyBelowHyperplane,
    ]
    .into_iter()
    .find(|h| h.name() == s)
    .ok_or_else(|| LabError::validation(field, "hypothesis", format!("unknown hypothesis `{s}`")))
}

fn check_density(field: &str, spec: &DensitySpec) -> Result<(), LabError> {
    // sampling on a throwaway grid exercises the spec's own checks
    let grid = Grid::new(10.0, 101).expect("fixed grid");
    match spec.sample(&grid) {
        Ok(_) => Ok(()),
        Err(mckean_core::MeasureError::ZeroMass) => Ok(()),
        Err(e) => Err(LabError::validation(field, "density", e)),
    }
}

/// Parse and validate a config file's text.
pub fn parse_config(text: &str) -> Result<RunConfig, LabError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        LabError::parse(line, e.message().trim_end())
    })?;

    if raw.eps.is_none() && raw.eps_list.is_none() {
        return Err(LabError::parse(None, "missing key `eps` (or `eps_list`)"));
    }
    let eps = raw.eps.map(|e| positive("eps", e)).transpose()?;
    let eps_list = raw.eps_list.unwrap_or_default();
    for (i, &e) in eps_list.iter().enumerate() {
        positive(&format!("eps_list[{i}]"), e)?;
    }

    let v = validate_confining(&raw.potentials.v)
        .map_err(|e| LabError::validation("potentials.V", e.assumption(true), &e))?;
    let f = if raw.potentials.f.iter().all(|&c| c == 0.0) {
        InteractionPotential::none()
    } else {
        validate_interaction(&raw.potentials.f)
            .map_err(|e| LabError::validation("potentials.F", e.assumption(false), &e))?
    };

    let g = raw.grid.unwrap_or_default();
    let grid = GridSpec {
        half_width: g.half_width.map(|l| positive("grid.L", l)).transpose()?,
        n: g.n.unwrap_or(801),
    };
    if grid.n < 17 || grid.n.is_multiple_of(2) {
        return Err(LabError::validation(
            "grid.n",
            "odd node count",
            format!("need an odd count of at least 17 so the grid is mirror symmetric, got {}", grid.n),
        ));
    }

    let s = raw.solver.unwrap_or_default();
    let scheme = match s.scheme.as_deref() {
        None | Some("semi_implicit") => Scheme::SemiImplicit,
        Some("explicit_upwind") => Scheme::ExplicitUpwind,
        Some(other) => {
            return Err(LabError::validation(
                "solver.scheme",
                "scheme",
                format!("unknown scheme `{other}` (semi_implicit, explicit_upwind)"),
            ))
        }
    };
    let solver = SolverSpec {
        dt: s.dt.map(|d| positive("solver.dt", d)).transpose()?,
        t_end: s.t_end.map(|t| positive("solver.t_end", t)).transpose()?.unwrap_or(100.0),
        scheme,
        record_every: s.record_every.unwrap_or(10).max(1),
        eta_tol: s.eta_tol.map(|t| positive("solver.eta_tol", t)).transpose()?.unwrap_or(1e-7),
        stop_on_convergence: s.stop_on_convergence.unwrap_or(true),
        moments: s.moments,
    };

    let st = raw.stationary.unwrap_or_default();
    let stationary = StationarySpec {
        damping: st.damping.unwrap_or(0.5),
        tol: st.tol.map(|t| positive("stationary.tol", t)).transpose()?.unwrap_or(1e-12),
        max_iter: st.max_iter.unwrap_or(10_000),
        eta_tol: st.eta_tol.map(|t| positive("stationary.eta_tol", t)).transpose()?.unwrap_or(1e-7),
        dedup_tol: st.dedup_tol.map(|t| positive("stationary.dedup_tol", t)).transpose()?.unwrap_or(1e-6),
        energy_level: st.energy_level,
        seed_std: st.seed_std.map(|t| positive("stationary.seed_std", t)).transpose()?.unwrap_or(0.2),
    };
    if !(stationary.damping > 0.0 && stationary.damping <= 1.0) {
        return Err(LabError::validation(
            "stationary.damping",
            "0 < damping <= 1",
            format!("got {}", stationary.damping),
        ));
    }

    let particles = match raw.particles {
        None => None,
        Some(p) => {
            if p.n < 2 {
                return Err(LabError::validation("particles.n", "at least 2", format!("got {}", p.n)));
            }
            Some(ParticleSpec {
                n: p.n,
                dt: positive("particles.dt", p.dt)?,
                t_end: positive("particles.t_end", p.t_end)?,
                record_every: p.record_every.unwrap_or(1).max(1),
                write_points: p.write_points.unwrap_or(false),
            })
        }
    };

    let initial = raw.initial.map(DensitySpec::from);
    if let Some(u0) = &initial {
        check_density("initial", u0)?;
    }

    let laplace = match raw.laplace {
        None => None,
        Some(l) => {
            let u = Polynomial::new(l.u);
            if u.degree() < 2 || u.degree() % 2 == 1 || u.leading() <= 0.0 {
                return Err(LabError::validation(
                    "laplace.U",
                    "coercive",
                    "need even degree >= 2 with a positive leading coefficient",
                ));
            }
            for (i, &e) in l.eps_list.iter().enumerate() {
                positive(&format!("laplace.eps_list[{i}]"), e)?;
            }
            Some(LaplaceSpec {
                u,
                eps_list: l.eps_list,
                ls: l.l,
            })
        }
    };

    let mut experiments = Vec::with_capacity(raw.experiments.len());
    for (i, e) in raw.experiments.into_iter().enumerate() {
        let field = format!("experiment[{i}]");
        let u0 = DensitySpec::from(e.u0);
        check_density(&format!("{field}.u0"), &u0)?;
        experiments.push(ExperimentSpec {
            expected: e
                .expected
                .as_deref()
                .map(|s| parse_symmetry(&format!("{field}.expected"), s))
                .transpose()?,
            hypotheses: e
                .hypotheses
                .iter()
                .map(|h| parse_hypothesis(&format!("{field}.hypotheses"), h))
                .collect::<Result<_, _>>()?,
            name: e.name,
            u0,
            mirror: e.mirror,
        });
    }

    Ok(RunConfig {
        v,
        f,
        eps,
        eps_list,
        seed: raw.seed.unwrap_or(0),
        out: raw.out,
        strict: raw.strict.unwrap_or(false),
        grid,
        solver,
        stationary,
        particles,
        initial,
        laplace,
        experiments,
    })
}

impl RunConfig {
    /// The single noise level, required by most subcommands.
    pub fn require_eps(&self, command: &str) -> Result<f64, LabError> {
        self.eps
            .ok_or_else(|| LabError::parse(None, format!("`{command}` needs the key `eps`")))
    }

    pub fn require_initial(&self, command: &str) -> Result<&DensitySpec, LabError> {
        self.initial
            .as_ref()
            .ok_or_else(|| LabError::parse(None, format!("`{command}` needs an [initial] table")))
    }

    pub fn grid_for(&self, eps: f64) -> Result<Grid, LabError> {
        let grid = match self.grid.half_width {
            Some(l) => Grid::new(l, self.grid.n),
            None => Grid::for_potential(&self.v, eps, self.grid.n),
        };
        grid.map_err(|e| LabError::validation("grid", "grid", e))
    }

    pub fn solver_config(&self, eps: f64, u0: &GridDensity) -> Result<SolverConfig, LabError> {
        let dt = self.solver.dt.unwrap_or_else(|| cfl_dt(u0, &self.v, &self.f, eps));
        let mut cfg = SolverConfig::new(eps, dt, self.solver.t_end)
            .map_err(|e| LabError::validation("solver", "solver", e))?
            .with_scheme(self.solver.scheme)
            .with_record_every(self.solver.record_every)
            .with_stop_on_convergence(self.solver.stop_on_convergence);
        cfg.eta_tol = self.solver.eta_tol;
        if let Some(k) = self.solver.moments {
            cfg = cfg.with_moment_order(k);
        }
        Ok(cfg)
    }

    pub fn stationary_config(&self, grid: Grid) -> StationaryConfig {
        let s = &self.stationary;
        StationaryConfig {
            damping: s.damping,
            tol_fp: s.tol,
            max_iter: s.max_iter,
            eta_tol: s.eta_tol,
            dedup_tol: s.dedup_tol,
            energy_level: s.energy_level,
            seed_std: s.seed_std,
            ..StationaryConfig::new(grid)
        }
    }
}
