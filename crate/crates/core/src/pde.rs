//! Time stepping for the granular media equation
//!
//! ```text
//! ∂_t u = ∂_x [ (ε/2) ∂_x u + u (V' + F'∗u) ]
//! ```
//!
//! in conservative flux form on a node-centred finite-volume mesh whose cells
//! carry the trapezoid weights, with zero flux through both ends. The default
//! scheme uses the exponentially fitted (Scharfetter–Gummel / Chang–Cooper)
//! flux built from nodal differences of the frozen potential
//! `W = V + F∗u`, stepped implicitly. Its discrete equilibrium is exactly
//! `u_i ∝ exp(-2 W(x_i)/ε)`, so self-consistent Gibbs densities are fixed
//! points to rounding.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::measures::{
    default_moment_order, free_energy, Grid, GridDensity, MomentVector,
};
use crate::poly::{expand_against_moments, Polynomial};
use crate::potentials::{ConfiningPotential, InteractionPotential};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Explicit Euler with an upwinded drift flux.
    ExplicitUpwind,
    /// Implicit exponentially fitted flux with the nonlocal drift frozen
    /// once per step.
    SemiImplicit,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolverError {
    InvalidConfig(&'static str),
    StabilityViolation { dt: f64, limit: f64 },
    PositivityLoss { index: usize, value: f64 },
    NonmonotoneEnergy { t: f64, increase: f64 },
    MomentBoundExceeded { t: f64, order: usize, value: f64 },
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidConfig(why) => write!(f, "invalid solver config: {why}"),
            Self::StabilityViolation { dt, limit } => {
                write!(f, "dt = {dt} exceeds the stability limit {limit}")
            }
            Self::PositivityLoss { index, value } => {
                write!(f, "density undershoot {value} at node {index}; refine dt or the grid")
            }
            Self::NonmonotoneEnergy { t, increase } => {
                write!(f, "free energy increased by {increase} at t = {t}")
            }
            Self::MomentBoundExceeded { t, order, value } => {
                write!(f, "moment m{order} = {value} exceeds the ceiling at t = {t}")
            }
        }
    }
}

impl core::error::Error for SolverError {}

/// Largest undershoot that is clamped away instead of reported.
pub const CLAMP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub eps: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub record_every: usize,
    /// Stationarity certificate for the convergence detector: `max |η|`.
    pub eta_tol: f64,
    /// Free-energy change between records below which the run may stop.
    pub energy_stall_tol: f64,
    /// Allowed free-energy increase between consecutive records.
    pub energy_tol: f64,
    pub stop_on_convergence: bool,
    /// Highest recorded moment; `None` picks the default order.
    pub moment_order: Option<usize>,
    pub moment_ceiling: f64,
}

impl SolverConfig {
    pub fn new(eps: f64, dt: f64, t_end: f64) -> Result<Self, SolverError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(SolverError::InvalidConfig("eps must be positive"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SolverError::InvalidConfig("dt must be positive"));
        }
        if !(t_end >= 0.0) {
            return Err(SolverError::InvalidConfig("t_end must be nonnegative"));
        }
        Ok(Self {
            eps,
            dt,
            t_end,
            scheme: Scheme::SemiImplicit,
            record_every: 1,
            eta_tol: 1e-7,
            energy_stall_tol: 1e-12,
            energy_tol: 0.0,
            stop_on_convergence: true,
            moment_order: None,
            moment_ceiling: 1e12,
        })
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }

    pub fn with_stop_on_convergence(mut self, stop: bool) -> Self {
        self.stop_on_convergence = stop;
        self
    }

    pub fn with_moment_order(mut self, k: usize) -> Self {
        self.moment_order = Some(k);
        self
    }

    /// Energy tolerance actually used: the configured one, or
    /// `10 dt dx²` (floored at 1e-13) when left at zero.
    pub fn energy_tolerance(&self, grid: &Grid) -> f64 {
        if self.energy_tol > 0.0 {
            self.energy_tol
        } else {
            (10.0 * self.dt * grid.dx() * grid.dx()).max(1e-13)
        }
    }

    /// The stability bound declared by the scheme for density `u`.
    ///
    /// Explicit: `0.4 min(dx²/ε, dx/max|b|)`. Semi-implicit: the frozen
    /// nonlocal drift must not move by more than half its curvature scale per
    /// step, `dt ≤ 0.5 / max_{|z| ≤ 2L} F''(z)`.
    pub fn stability_limit(
        &self,
        u: &GridDensity,
        v: &ConfiningPotential,
        f: &InteractionPotential,
    ) -> f64 {
        match self.scheme {
            Scheme::ExplicitUpwind => cfl_dt(u, v, f, self.eps),
            Scheme::SemiImplicit => {
                let reach = 2.0 * u.grid().half_width();
                let fmax = f.d2().eval(reach).abs().max(f.d2().eval(0.0).abs());
                if fmax > 0.0 {
                    0.5 / fmax
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// `0.4 min(dx²/ε, dx/max|b|)` with `b` the face drift of the current density.
pub fn cfl_dt(
    u: &GridDensity,
    v: &ConfiningPotential,
    f: &InteractionPotential,
    eps: f64,
) -> f64 {
    let g = u.grid();
    let w = frozen_potential(u, v, f);
    let dx = g.dx();
    let bmax = w
        .windows(2)
        .fold(0.0_f64, |m, p| m.max(((p[1] - p[0]) / dx).abs()));
    let diff = dx * dx / eps;
    let adv = if bmax > 0.0 { dx / bmax } else { f64::INFINITY };
    0.4 * diff.min(adv)
}

/// `W(x_i) = V(x_i) + (F∗u)(x_i)` at every node.
pub fn frozen_potential(
    u: &GridDensity,
    v: &ConfiningPotential,
    f: &InteractionPotential,
) -> Vec<f64> {
    let conv = interaction_polynomial(u, f.poly());
    let g = u.grid();
    (0..g.len())
        .map(|i| {
            let x = g.x(i);
            v.value(x) + conv.eval(x)
        })
        .collect()
}

fn interaction_polynomial(u: &GridDensity, p: &Polynomial) -> Polynomial {
    if p.is_zero() {
        return Polynomial::zero();
    }
    let m = u.moments(p.degree());
    expand_against_moments(p, m.as_slice())
}

/// Nodal drift `b = V' + F'∗u`.
pub fn drift(u: &GridDensity, v: &ConfiningPotential, f: &InteractionPotential) -> Vec<f64> {
    let conv = interaction_polynomial(u, f.d1());
    let g = u.grid();
    (0..g.len())
        .map(|i| {
            let x = g.x(i);
            v.d1().eval(x) + conv.eval(x)
        })
        .collect()
}

const STENCIL: usize = 9;

/// Unit-spacing weights for the first derivative at node `s` of a
/// `STENCIL`-point stencil, for each `s` (Fornberg's recursion).
fn derivative_weights() -> [[f64; STENCIL]; STENCIL] {
    let mut table = [[0.0; STENCIL]; STENCIL];
    for (s, row) in table.iter_mut().enumerate() {
        let z = s as f64;
        let x: [f64; STENCIL] = core::array::from_fn(|k| k as f64);
        // c[j][m]: weight of node j for the m-th derivative, m ∈ {0, 1}
        let mut c = [[0.0f64; 2]; STENCIL];
        c[0][0] = 1.0;
        let mut c1 = 1.0;
        let mut c4 = x[0] - z;
        for i in 1..STENCIL {
            let mn = i.min(1);
            let mut c2 = 1.0;
            let c5 = c4;
            c4 = x[i] - z;
            for j in 0..i {
                let c3 = x[i] - x[j];
                c2 *= c3;
                if j == i - 1 {
                    for k in (1..=mn).rev() {
                        c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                    }
                    c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
                }
                for k in (1..=mn).rev() {
                    c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
                }
                c[j][0] = c4 * c[j][0] / c3;
            }
            c1 = c2;
        }
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = c[k][1];
        }
    }
    table
}

/// The flux `η = (ε/2) ∂_x u + u (V' + F'∗u)` at every node.
///
/// `∂_x u` is evaluated as `u ∂_x log u` with a 9-point stencil (centred in
/// the interior, shifted near the ends), which differentiates polynomial
/// log-densities of degree ≤ 8 exactly; Gibbs densities of polynomial
/// potentials therefore give `η ≈ 0` to rounding. Nodes whose stencil touches
/// a zero value fall back to second-order differences of `u`.
pub fn eta(
    u: &GridDensity,
    v: &ConfiningPotential,
    f: &InteractionPotential,
    eps: f64,
) -> Vec<f64> {
    let b = drift(u, v, f);
    eta_with_drift(u, &b, eps)
}

fn eta_with_drift(u: &GridDensity, b: &[f64], eps: f64) -> Vec<f64> {
    let g = u.grid();
    let n = g.len();
    let dx = g.dx();
    let d = 0.5 * eps;
    let vals = u.values();
    let logs: Vec<f64> = vals
        .iter()
        .map(|&x| if x > 0.0 { math::ln(x) } else { f64::NEG_INFINITY })
        .collect();
    let weights = derivative_weights();
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(STENCIL / 2).min(n - STENCIL);
            let window = &logs[start..start + STENCIL];
            if window.iter().all(|l| l.is_finite()) {
                let w = &weights[i - start];
                let dlog = window.iter().zip(w).map(|(l, c)| l * c).sum::<f64>() / dx;
                vals[i] * (d * dlog + b[i])
            } else {
                let du = if i == 0 {
                    (vals[1] - vals[0]) / dx
                } else if i == n - 1 {
                    (vals[n - 1] - vals[n - 2]) / dx
                } else {
                    (vals[i + 1] - vals[i - 1]) / (2.0 * dx)
                };
                d * du + vals[i] * b[i]
            }
        })
        .collect()
}

/// `∫ η² / u` (integrand taken as 0 where `u = 0`).
pub fn dissipation(
    u: &GridDensity,
    v: &ConfiningPotential,
    f: &InteractionPotential,
    eps: f64,
) -> f64 {
    let e = eta(u, v, f, eps);
    dissipation_of(u, &e)
}

fn dissipation_of(u: &GridDensity, e: &[f64]) -> f64 {
    let vals = u.values();
    u.grid().integrate(|i| {
        if vals[i] > 0.0 {
            e[i] * e[i] / vals[i]
        } else {
            0.0
        }
    })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// `B(z) = z / (e^z - 1)`.
#[inline]
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-10 {
        1.0 - 0.5 * z
    } else {
        z / math::expm1(z)
    }
}

/// One time step of the configured scheme.
pub fn step(
    u: &GridDensity,
    cfg: &SolverConfig,
    v: &ConfiningPotential,
    f: &InteractionPotential,
) -> Result<GridDensity, SolverError> {
    let limit = cfg.stability_limit(u, v, f);
    if cfg.dt > limit {
        return Err(SolverError::StabilityViolation { dt: cfg.dt, limit });
    }
    let w = frozen_potential(u, v, f);
    let next = match cfg.scheme {
        Scheme::SemiImplicit => implicit_fitted_step(u, &w, cfg.eps, cfg.dt),
        Scheme::ExplicitUpwind => explicit_upwind_step(u, &w, cfg.eps, cfg.dt),
    };
    finish_step(u.grid().clone(), next)
}

fn finish_step(grid: Grid, mut next: Vec<f64>) -> Result<GridDensity, SolverError> {
    let (index, min) = next
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &x)| if x < acc.1 { (i, x) } else { acc });
    if !min.is_finite() || next.iter().any(|x| !x.is_finite()) {
        return Err(SolverError::PositivityLoss {
            index,
            value: f64::NAN,
        });
    }
    if min < 0.0 {
        if min < -CLAMP_TOL {
            return Err(SolverError::PositivityLoss { index, value: min });
        }
        next.iter_mut().for_each(|x| *x = x.max(0.0));
        return GridDensity::new(grid, next)
            .map_err(|_| SolverError::PositivityLoss { index, value: min });
    }
    Ok(GridDensity::from_raw(grid, next))
}

/// Implicit Euler with the fitted flux
/// `J_{i+½} = (D/dx) [B(-δ) u_{i+1} - B(δ) u_i]`, `δ = (W_{i+1} - W_i)/D`,
/// `D = ε/2`.
fn implicit_fitted_step(u: &GridDensity, w: &[f64], eps: f64, dt: f64) -> Vec<f64> {
    let g = u.grid();
    let n = g.len();
    let d = 0.5 * eps;
    let k = d / g.dx();
    // face i sits between nodes i and i+1
    let mut up = vec![0.0; n - 1];
    let mut down = vec![0.0; n - 1];
    for i in 0..n - 1 {
        let delta = (w[i + 1] - w[i]) / d;
        up[i] = k * bernoulli(-delta);
        down[i] = k * bernoulli(delta);
    }
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let wi = g.weight(i) / dt;
        let out_right = if i + 1 < n { down[i] } else { 0.0 };
        let out_left = if i > 0 { up[i - 1] } else { 0.0 };
        diag[i] = wi + (out_right + out_left);
        if i > 0 {
            lower[i] = -down[i - 1];
        }
        if i + 1 < n {
            upper[i] = -up[i];
        }
        rhs[i] = wi * u.values()[i];
    }
    solve_tridiagonal_mirrored(&lower, &diag, &upper, &rhs)
}

fn explicit_upwind_step(u: &GridDensity, w: &[f64], eps: f64, dt: f64) -> Vec<f64> {
    let g = u.grid();
    let n = g.len();
    let dx = g.dx();
    let d = 0.5 * eps;
    let vals = u.values();
    let flux: Vec<f64> = (0..n - 1)
        .map(|i| {
            let b = (w[i + 1] - w[i]) / dx;
            d * (vals[i + 1] - vals[i]) / dx + b.max(0.0) * vals[i + 1] + b.min(0.0) * vals[i]
        })
        .collect();
    (0..n)
        .map(|i| {
            let right = if i + 1 < n { flux[i] } else { 0.0 };
            let left = if i > 0 { flux[i - 1] } else { 0.0 };
            vals[i] + dt / g.weight(i) * (right - left)
        })
        .collect()
}

/// Tridiagonal solve by elimination from both ends towards the middle row.
///
/// For a system that is invariant under index reflection `i ↦ n-1-i`, every
/// operation on the left half has a bitwise-identical mirror on the right
/// half, so a mirror-symmetric right-hand side gives a mirror-symmetric
/// solution exactly when `n` is odd.
pub fn solve_tridiagonal_mirrored(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Vec<f64> {
    let n = diag.len();
    assert!(n >= 3, "system too small");
    let mid = n / 2;
    let mut dd = diag.to_vec();
    let mut rr = rhs.to_vec();
    for i in 1..mid {
        let m = lower[i] / dd[i - 1];
        dd[i] -= m * upper[i - 1];
        rr[i] -= m * rr[i - 1];
    }
    for i in (mid + 1..n - 1).rev() {
        let m = upper[i] / dd[i + 1];
        dd[i] -= m * lower[i + 1];
        rr[i] -= m * rr[i + 1];
    }
    let ml = lower[mid] / dd[mid - 1];
    let mr = upper[mid] / dd[mid + 1];
    let dm = diag[mid] - (ml * upper[mid - 1] + mr * lower[mid + 1]);
    let rm = rhs[mid] - (ml * rr[mid - 1] + mr * rr[mid + 1]);
    let mut x = vec![0.0; n];
    x[mid] = rm / dm;
    for i in (0..mid).rev() {
        x[i] = (rr[i] - upper[i] * x[i + 1]) / dd[i];
    }
    for i in mid + 1..n {
        x[i] = (rr[i] - lower[i] * x[i - 1]) / dd[i];
    }
    x
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    /// The stationarity detector fired before `t_end`.
    Converged,
    Completed,
}

/// Time series of one PDE run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// `ξ(t) = Υ_ε(u_t)`.
    pub free_energy: Vec<f64>,
    /// `∫ η_t² / u_t`.
    pub dissipation: Vec<f64>,
    pub max_eta: Vec<f64>,
    pub moment_history: Vec<MomentVector>,
    pub final_density: GridDensity,
    pub status: RunStatus,
    pub steps: usize,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest increase between consecutive recorded free energies
    /// (negative when strictly decreasing throughout).
    pub fn max_energy_increase(&self) -> f64 {
        self.free_energy
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

struct Snapshot {
    free_energy: f64,
    dissipation: f64,
    max_eta: f64,
    moments: MomentVector,
}

fn snapshot(
    u: &GridDensity,
    v: &ConfiningPotential,
    f: &InteractionPotential,
    eps: f64,
    k: usize,
) -> Snapshot {
    let e = eta(u, v, f, eps);
    Snapshot {
        free_energy: free_energy(u, v, f, eps).total,
        dissipation: dissipation_of(u, &e),
        max_eta: max_abs(&e),
        moments: u.moments(k),
    }
}

/// Evolve `u0` until `t_end`, or until `max|η| < eta_tol` and the recorded
/// free energy stalls (when `stop_on_convergence`).
pub fn evolve(
    u0: &GridDensity,
    cfg: &SolverConfig,
    v: &ConfiningPotential,
    f: &InteractionPotential,
) -> Result<TrajectoryRecord, SolverError> {
    let k = cfg.moment_order.unwrap_or_else(|| default_moment_order(v, f));
    let energy_tol = cfg.energy_tolerance(u0.grid());
    let total_steps = libm::round(cfg.t_end / cfg.dt) as usize;

    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        free_energy: Vec::new(),
        dissipation: Vec::new(),
        max_eta: Vec::new(),
        moment_history: Vec::new(),
        final_density: u0.clone(),
        status: RunStatus::Completed,
        steps: 0,
    };
    let push = |rec: &mut TrajectoryRecord, t: f64, s: Snapshot| -> Result<bool, SolverError> {
        for (order, &m) in s.moments.as_slice().iter().enumerate() {
            if !(m.abs() <= cfg.moment_ceiling) {
                return Err(SolverError::MomentBoundExceeded { t, order, value: m });
            }
        }
        let mut stalled = false;
        if let Some(&prev) = rec.free_energy.last() {
            let increase = s.free_energy - prev;
            if increase > energy_tol {
                return Err(SolverError::NonmonotoneEnergy { t, increase });
            }
            stalled = increase.abs() < cfg.energy_stall_tol;
        }
        let converged = stalled && s.max_eta < cfg.eta_tol;
        rec.times.push(t);
        rec.free_energy.push(s.free_energy);
        rec.dissipation.push(s.dissipation);
        rec.max_eta.push(s.max_eta);
        rec.moment_history.push(s.moments);
        Ok(converged)
    };

    push(&mut rec, 0.0, snapshot(u0, v, f, cfg.eps, k))?;
    let mut u = u0.clone();
    for n in 1..=total_steps {
        u = step(&u, cfg, v, f)?;
        rec.steps = n;
        if n % cfg.record_every == 0 || n == total_steps {
            let t = n as f64 * cfg.dt;
            let converged = push(&mut rec, t, snapshot(&u, v, f, cfg.eps, k))?;
            if converged && cfg.stop_on_convergence {
                rec.status = RunStatus::Converged;
                break;
            }
        }
    }
    rec.final_density = u;
    Ok(rec)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DissipationSample {
    pub t: f64,
    /// Finite-difference estimate of `ξ'(t)`.
    pub xi_prime: f64,
    /// `-∫ η² / u` at `t`.
    pub bound: f64,
}

impl DissipationSample {
    /// `ξ' + ∫ η²/u`; positive values violate the dissipation inequality.
    pub fn defect(&self) -> f64 {
        self.xi_prime - self.bound
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DissipationReport {
    pub samples: Vec<DissipationSample>,
    /// `max(0, max_k defect_k)`.
    pub max_violation: f64,
    /// `max_k |defect_k|`.
    pub max_defect: f64,
}

/// Compare central differences of the recorded `ξ` with `-∫ η²/u` at every
/// interior record. Records with uneven spacing use the nonuniform
/// three-point formula.
pub fn dissipation_check(rec: &TrajectoryRecord) -> DissipationReport {
    let mut samples = Vec::new();
    let t = &rec.times;
    let xi = &rec.free_energy;
    for k in 1..t.len().saturating_sub(1) {
        let h0 = t[k] - t[k - 1];
        let h1 = t[k + 1] - t[k];
        let xi_prime = -h1 / (h0 * (h0 + h1)) * xi[k - 1]
            + (h1 - h0) / (h0 * h1) * xi[k]
            + h0 / (h1 * (h0 + h1)) * xi[k + 1];
        samples.push(DissipationSample {
            t: t[k],
            xi_prime,
            bound: -rec.dissipation[k],
        });
    }
    let max_violation = samples.iter().fold(0.0_f64, |m, s| m.max(s.defect()));
    let max_defect = samples.iter().fold(0.0_f64, |m, s| m.max(s.defect().abs()));
    DissipationReport {
        samples,
        max_violation,
        max_defect,
    }
}
