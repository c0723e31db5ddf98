use std::path::{Path, PathBuf};

use mckean_core::experiments::{check_hypothesis, BasinSpec};
use mckean_core::particles::{self, InitialLaw, ParticleConfig};
use mckean_core::potentials::is_synchronized;
use mckean_core::{
    asymptotics, enumerate, evolve, find_x0, verify_basin, verify_global_convergence,
    EnumerationReport, ExperimentConfig, ExperimentError, GridDensity, Symmetry,
};
use rayon::prelude::*;

use crate::config::{ExperimentSpec, RunConfig};
use crate::error::LabError;
use crate::output::{self, VerdictLine};
use crate::svg::{emit_svg, Plot, Series};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Validate,
    Stationary,
    Evolve,
    Particles,
    Asymptotics,
    Basin,
    Converge,
}

/// What a subcommand did: human-readable lines for stdout, the files it
/// wrote, and whether every verdict passed.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
    pub success: bool,
}

impl Report {
    fn ok() -> Self {
        Self {
            success: true,
            ..Self::default()
        }
    }

    fn say(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    pub fn exit_code(&self) -> i32 {
        if self.success {
            0
        } else {
            1
        }
    }
}

struct Out<'a> {
    dir: &'a Path,
    report: Report,
}

impl Out<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.report.files.push(p.clone());
        p
    }
}

/// Run one subcommand, writing its outputs under `out_dir`.
pub fn run_subcommand(cmd: Command, cfg: &RunConfig, out_dir: &Path) -> Result<Report, LabError> {
    if cmd != Command::Validate {
        std::fs::create_dir_all(out_dir).map_err(|e| LabError::io(out_dir, e))?;
    }
    let mut out = Out {
        dir: out_dir,
        report: Report::ok(),
    };
    match cmd {
        Command::Validate => validate(cfg, &mut out)?,
        Command::Stationary => stationary(cfg, &mut out)?,
        Command::Evolve => evolve_cmd(cfg, &mut out)?,
        Command::Particles => particles_cmd(cfg, &mut out)?,
        Command::Asymptotics => asymptotics_cmd(cfg, &mut out)?,
        Command::Basin => basin(cfg, &mut out)?,
        Command::Converge => converge(cfg, &mut out)?,
    }
    Ok(out.report)
}

fn validate(cfg: &RunConfig, out: &mut Out) -> Result<(), LabError> {
    let r = &mut out.report;
    r.say(format!("a = {}", cfg.v.well()));
    r.say(format!("m = {}", cfg.v.half_degree()));
    r.say(format!("n = {}", cfg.f.half_degree()));
    match find_x0(&cfg.v, &cfg.f) {
        Ok(x0) => r.say(format!("x0 = {x0}")),
        Err(e) => r.say(format!("x0 = undefined ({e})")),
    }
    r.say(format!("LIN = {}", cfg.f.is_linear()));
    r.say(format!("SYN = {}", is_synchronized(&cfg.v, &cfg.f)));
    Ok(())
}

fn density_points(u: &GridDensity) -> Vec<(f64, f64)> {
    u.values().iter().enumerate().map(|(i, &v)| (u.grid().x(i), v)).collect()
}

fn enumerate_at(cfg: &RunConfig, eps: f64) -> Result<EnumerationReport, LabError> {
    let st = cfg.stationary_config(cfg.grid_for(eps)?);
    enumerate(&cfg.v, &cfg.f, eps, &st).map_err(|e| LabError::run("stationary", e))
}

fn stationary(cfg: &RunConfig, out: &mut Out) -> Result<(), LabError> {
    let eps = cfg.require_eps("stationary")?;
    let rep = enumerate_at(cfg, eps)?;
    output::write_stationary(&out.path("stationary.csv"), &rep.measures)?;
    let summary = format!("m3_status = {}\nordering_ok = {}\n", rep.m3_status, rep.ordering_ok);
    output::write_text(&out.path("stationary_summary.txt"), &summary)?;
    let mut plot = Plot::new(&format!("Stationary measures, eps = {eps}"), "x", "u(x)");
    for (i, m) in rep.measures.iter().enumerate() {
        output::write_density(
            &out.path(&format!("stationary_{i}_{}.csv", m.symmetry.label())),
            &m.density,
        )?;
        plot = plot.series(Series::new(m.symmetry.label(), density_points(&m.density)));
    }
    if !rep.measures.is_empty() {
        emit_svg(&plot, &out.path("stationary.svg"))?;
    }
    for s in &rep.seeds {
        if let Err(e) = &s.result {
            out.report.say(format!("seed {}: {e}", s.label));
        }
    }
    out.report.say(format!("{} stationary measures", rep.measures.len()));
    for m in &rep.measures {
        out.report.say(format!(
            "{}: m1 = {:.10}, m2 = {:.10}, free energy = {:.10}",
            m.symmetry,
            m.moments.get(1),
            m.moments.get(2),
            m.free_energy.total
        ));
    }
    out.report.say(summary.lines().next().unwrap_or_default().to_string());
    Ok(())
}

fn energy_plot(title: &str, times: &[f64], xi: &[f64]) -> Plot {
    Plot::new(title, "t", "free energy")
        .series(Series::new("xi(t)", times.iter().copied().zip(xi.iter().copied()).collect()))
}

fn evolve_cmd(cfg: &RunConfig, out: &mut Out) -> Result<(), LabError> {
    let eps = cfg.require_eps("evolve")?;
    let grid = cfg.grid_for(eps)?;
    let u0 = cfg
        .require_initial("evolve")?
        .sample(&grid)
        .map_err(|e| LabError::validation("initial", "density", e))?;
    let solver = cfg.solver_config(eps, &u0)?;
    let rec = evolve(&u0, &solver, &cfg.v, &cfg.f).map_err(|e| LabError::run("evolve", e))?;
    output::write_trajectory(&out.path("trajectory.csv"), &rec)?;
    output::write_density(&out.path("density_initial.csv"), &u0)?;
    output::write_density(&out.path("density_final.csv"), &rec.final_density)?;
    emit_svg(
        &energy_plot(&format!("Free energy, eps = {eps}"), &rec.times, &rec.free_energy),
        &out.path("free_energy.svg"),
    )?;
    emit_svg(
        &Plot::new("Density", "x", "u(x)")
            .series(Series::new("u0", density_points(&u0)))
            .series(Series::new(
                format!("u(t = {})", rec.times.last().copied().unwrap_or(0.0)),
                density_points(&rec.final_density),
            )),
        &out.path("density.svg"),
    )?;
    out.report.say(format!(
        "{:?} after {} steps at t = {}, free energy {} -> {}, largest recorded increase {:e}",
        rec.status,
        rec.steps,
        rec.times.last().copied().unwrap_or(0.0),
        rec.free_energy[0],
        rec.free_energy.last().copied().unwrap_or(f64::NAN),
        rec.max_energy_increase()
    ));
    Ok(())
}

fn particles_cmd(cfg: &RunConfig, out: &mut Out) -> Result<(), LabError> {
    let eps = cfg.require_eps("particles")?;
    let spec = cfg
        .particles
        .as_ref()
        .ok_or_else(|| LabError::parse(None, "`particles` needs a [particles] table"))?;
    let grid = cfg.grid_for(eps)?;
    let u0 = cfg
        .require_initial("particles")?
        .sample(&grid)
        .map_err(|e| LabError::validation("initial", "density", e))?;
    let pc = ParticleConfig::new(spec.n, eps, spec.dt, spec.t_end, cfg.seed)
        .map_err(|e| LabError::validation("particles", "particles", e))?
        .with_record_every(spec.record_every);
    let traj = particles::run(&pc, &InitialLaw::Density(u0), &cfg.v, &cfg.f)
        .map_err(|e| LabError::run("particles", e))?;
    output::write_particles(&out.path("particles.csv"), &traj)?;
    if spec.write_points {
        output::write_points(&out.path("points.csv"), &traj.final_positions)?;
    }
    let series = |k: usize| -> Vec<(f64, f64)> {
        traj.times
            .iter()
            .zip(&traj.moment_history)
            .map(|(&t, m)| (t, m.get(k)))
            .collect()
    };
    emit_svg(
        &Plot::new(&format!("Empirical moments, N = {}", spec.n), "t", "moment")
            .series(Series::new("m1", series(1)))
            .series(Series::new("m2", series(2))),
        &out.path("particles.svg"),
    )?;
    let last = traj.moment_history.last().expect("t = 0 is recorded");
    out.report.say(format!(
        "N = {}, seed = {}, final m1 = {}, m2 = {}",
        spec.n,
        cfg.seed,
        last.get(1),
        last.get(2)
    ));
    Ok(())
}

fn asymptotics_cmd(cfg: &RunConfig, out: &mut Out) -> Result<(), LabError> {
    if cfg.eps_list.is_empty() && cfg.laplace.is_none() {
        return Err(LabError::parse(
            None,
            "`asymptotics` needs `eps_list` or a [laplace] table",
        ));
    }
    if !cfg.eps_list.is_empty() {
        let eps_list = &cfg.eps_list;
        let template = cfg.stationary_config(cfg.grid_for(eps_list[0])?);
        let sweep = match cfg.grid.half_width {
            // a fixed extent: enumerate on the configured grid at every eps
            Some(_) => {
                let reports = eps_list
                    .iter()
                    .map(|&e| enumerate_at(cfg, e))
                    .collect::<Result<Vec<_>, _>>()?;
                asymptotics::sweep_from_reports(&cfg.v, &cfg.f, eps_list, &reports)
            }
            None => asymptotics::free_energy_sweep(&cfg.v, &cfg.f, eps_list, cfg.grid.n, &template),
        }
        .map_err(|e| LabError::run("asymptotics", e))?;
        output::write_sweep(&out.path("sweep.csv"), &sweep)?;
        let pts = |s: &[f64]| -> Vec<(f64, f64)> {
            sweep.eps_values.iter().copied().zip(s.iter().copied()).collect()
        };
        emit_svg(
            &Plot::new("Free energy of the stationary branches", "eps", "free energy")
                .series(Series::new("symmetric", pts(&sweep.fe_sym)))
                .series(Series::new("asymmetric", pts(&sweep.fe_plus)))
                .ref_line("V(x0) + F(2x0)/4", sweep.predicted_sym_limit)
                .ref_line("V(a)", sweep.predicted_asym_limit),
            &out.path("sweep.svg"),
        )?;
        for (i, e) in sweep.eps_values.iter().enumerate() {
            out.report.say(format!(
                "eps = {e}: symmetric {:.6}, plus {:.6}, minus {:.6}",
                sweep.fe_sym[i], sweep.fe_plus[i], sweep.fe_minus[i]
            ));
        }
        out.report.say(format!(
            "limits: symmetric {}, asymmetric {}; monotone approach: symmetric {}, plus {}",
            sweep.predicted_sym_limit,
            sweep.predicted_asym_limit,
            sweep.approach_is_monotone(Symmetry::Symmetric),
            sweep.approach_is_monotone(Symmetry::AsymmetricPlus)
        ));
    }
    if let Some(lap) = &cfg.laplace {
        let mut rows = Vec::new();
        for &eps in &lap.eps_list {
            let rep = asymptotics::laplace_report(&lap.u, eps, &lap.ls)
                .map_err(|e| LabError::run("laplace", e))?;
            for &(l, ratio) in &rep.ratios {
                rows.push(vec![
                    output::num(eps),
                    format!("{l}"),
                    output::num(ratio),
                    output::num(rep.predicted(l)),
                ]);
                out.report.say(format!("laplace eps = {eps}, l = {l}: {ratio}"));
            }
        }
        output::write_csv(&out.path("laplace.csv"), &["eps", "l", "ratio", "predicted"], rows)?;
    }
    Ok(())
}

fn experiment_config(cfg: &RunConfig, eps: f64, strict: bool) -> Result<ExperimentConfig, LabError> {
    let grid = cfg.grid_for(eps)?;
    let st = cfg.stationary_config(grid.clone());
    // dt falls back to the CFL step of a unit Gaussian when unset
    let probe = mckean_core::DensitySpec::Gaussian { mean: 0.0, std: 1.0 }
        .sample(&grid)
        .map_err(|e| LabError::validation("grid", "grid", e))?;
    let mut ec = ExperimentConfig::new(cfg.solver_config(eps, &probe)?, st);
    ec.strict = strict;
    Ok(ec)
}

fn expand(experiments: &[ExperimentSpec]) -> Vec<ExperimentSpec> {
    let mut all = Vec::new();
    for e in experiments {
        all.push(e.clone());
        if e.mirror {
            let spec = to_basin(e, e.expected.unwrap_or(Symmetry::Symmetric)).reflect();
            all.push(ExperimentSpec {
                name: spec.name,
                u0: spec.u0,
                expected: e.expected.map(|_| spec.expected),
                hypotheses: spec.hypotheses,
                mirror: false,
            });
        }
    }
    all
}

fn to_basin(e: &ExperimentSpec, expected: Symmetry) -> BasinSpec {
    BasinSpec {
        name: e.name.clone(),
        u0: e.u0.clone(),
        expected,
        hypotheses: e.hypotheses.clone(),
    }
}

fn require_experiments(cfg: &RunConfig, command: &str) -> Result<(), LabError> {
    if cfg.experiments.is_empty() {
        return Err(LabError::parse(
            None,
            format!("`{command}` needs at least one [[experiment]] table"),
        ));
    }
    Ok(())
}

fn basin(cfg: &RunConfig, out: &mut Out) -> Result<(), LabError> {
    let eps = cfg.require_eps("basin")?;
    require_experiments(cfg, "basin")?;
    let mut specs = Vec::new();
    for (i, e) in expand(&cfg.experiments).iter().enumerate() {
        let expected = e.expected.ok_or_else(|| {
            LabError::validation(
                format!("experiment[{i}].expected"),
                "basin",
                "basin experiments need an expected branch",
            )
        })?;
        specs.push(to_basin(e, expected));
    }
    let ec = experiment_config(cfg, eps, cfg.strict)?;
    let known = enumerate_at(cfg, eps)?;
    let results: Vec<_> = specs
        .par_iter()
        .map(|s| verify_basin(s, &cfg.v, &cfg.f, &ec, Some(&known)))
        .collect();
    let mut lines = Vec::with_capacity(specs.len());
    for (spec, r) in specs.iter().zip(results) {
        let line = match r {
            Ok(b) => {
                out.report.success &= !b.is_failure();
                let label = if b.hypothesis_ok { "" } else { " (out of hypothesis)" };
                out.report.say(format!(
                    "{}: expected {}, got {}{label}; {}",
                    b.name,
                    b.expected,
                    b.matched_branch().map_or("no match", |m| m.label()),
                    if b.passed { "PASS" } else { "FAIL" }
                ));
                VerdictLine {
                    name: b.name.clone(),
                    hypothesis_ok: b.hypothesis_ok,
                    matched_branch: b.matched_branch().map(|m| m.label().to_string()),
                    final_distance: finite(b.final_distance()),
                    fe_limit: finite(b.fe_limit()),
                    passed: b.passed,
                }
            }
            Err(e @ ExperimentError::HypothesisFailed { .. }) => {
                out.report.success = false;
                out.report.say(format!("{}: {e}; FAIL", spec.name));
                VerdictLine {
                    name: spec.name.clone(),
                    hypothesis_ok: false,
                    matched_branch: None,
                    final_distance: None,
                    fe_limit: None,
                    passed: false,
                }
            }
            Err(e) => return Err(LabError::run("basin", format!("{}: {e}", spec.name))),
        };
        lines.push(line);
    }
    output::write_jsonl(&out.path("basin.jsonl"), &lines)?;
    Ok(())
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

fn converge(cfg: &RunConfig, out: &mut Out) -> Result<(), LabError> {
    let eps = cfg.require_eps("converge")?;
    require_experiments(cfg, "converge")?;
    let specs = expand(&cfg.experiments);
    let ec = experiment_config(cfg, eps, false)?;
    let known = enumerate_at(cfg, eps)?;
    let grid = &ec.stationary.grid;
    let results: Vec<_> = specs
        .par_iter()
        .map(|s| -> Result<_, LabError> {
            let u0 = s.u0.sample(grid).map_err(|e| LabError::validation("u0", "density", e))?;
            let checks = s
                .hypotheses
                .iter()
                .map(|&h| check_hypothesis(h, &u0, &cfg.v, &cfg.f, eps))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| LabError::run("converge", e))?;
            let verdict = verify_global_convergence(&u0, &cfg.v, &cfg.f, &ec, Some(&known));
            Ok((u0, checks.iter().all(|c| c.passed), verdict))
        })
        .collect();
    let mut lines = Vec::with_capacity(specs.len());
    for (spec, r) in specs.iter().zip(results) {
        let (u0, hypothesis_ok, verdict) = r?;
        let line = match verdict {
            Ok(v) => {
                let passed = v.passed && spec.expected.is_none_or(|e| e == v.matched_branch);
                out.report.success &= passed || !hypothesis_ok;
                let stem = file_stem(&spec.name);
                output::write_trajectory(&out.path(&format!("{stem}_trajectory.csv")), &v.trajectory)?;
                emit_svg(
                    &energy_plot(&spec.name, &v.trajectory.times, &v.trajectory.free_energy),
                    &out.path(&format!("{stem}_free_energy.svg")),
                )?;
                emit_svg(
                    &Plot::new(&spec.name, "x", "u(x)")
                        .series(Series::new("u0", density_points(&u0)))
                        .series(Series::new(
                            format!("u(t = {})", v.trajectory.times.last().copied().unwrap_or(0.0)),
                            density_points(&v.trajectory.final_density),
                        ))
                        .series(Series::new(
                            format!("{} stationary", v.matched_branch),
                            density_points(&v.limit_measure.density),
                        )),
                    &out.path(&format!("{stem}_density.svg")),
                )?;
                out.report.say(format!(
                    "{}: converged to {} (sup distance {:.2e}); {}",
                    spec.name,
                    v.matched_branch,
                    v.final_distance,
                    if passed { "PASS" } else { "FAIL" }
                ));
                VerdictLine {
                    name: spec.name.clone(),
                    hypothesis_ok,
                    matched_branch: Some(v.matched_branch.label().to_string()),
                    final_distance: finite(v.final_distance),
                    fe_limit: finite(v.fe_limit),
                    passed,
                }
            }
            Err(ExperimentError::NoMatch {
                nearest,
                final_distance,
                fe_limit,
                ..
            }) => {
                out.report.success &= !hypothesis_ok;
                out.report.say(format!(
                    "{}: no stationary measure matched (nearest {}, sup distance {final_distance:.2e}); FAIL",
                    spec.name,
                    nearest.map_or("none", |n| n.label())
                ));
                VerdictLine {
                    name: spec.name.clone(),
                    hypothesis_ok,
                    matched_branch: None,
                    final_distance: finite(final_distance),
                    fe_limit: finite(fe_limit),
                    passed: false,
                }
            }
            Err(e) => return Err(LabError::run("converge", format!("{}: {e}", spec.name))),
        };
        lines.push(line);
    }
    output::write_jsonl(&out.path("converge.jsonl"), &lines)?;
    Ok(())
}
