//! The characteristic (Goursat) problem: traces on `Σ = {t = φ(x)}`, the
//! λ-slowdown construction, round trips, trace constants and foliations.

mod flattened;

pub use flattened::InitialVelocity;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::cauchy::{energy_monitor, solve_cauchy, CauchyError, SolverConfig, TimeScheme, Trajectory};
use crate::fields::{FirstOrderOperator, MetricField, Regularity, StateVector};
use crate::grid::{same_grid, GridFunction};
use crate::mollify::{default_base_radius, regularize_coefficients, MollifyError};
use crate::norms::{energy, hk_norm, sigma_h1_norm, sigma_l2_dnu0, NormError};
use crate::surface::{flatten, foliation_slice, CharacteristicSurface, SurfaceError};

use flattened::{solve_flattened, FlattenedFailure};

#[derive(Debug, Error)]
pub enum GoursatError {
    #[error("surface φ ranges over [{lo}, {hi}] but the trajectory covers [{window_lo}, {window_hi}]")]
    OutsideWindow { lo: f64, hi: f64, window_lo: f64, window_hi: f64 },
    #[error("lambda schedule must be non-empty, strictly increasing and inside (0, 1)")]
    BadSchedule,
    #[error("data and surface live on different grids")]
    GridMismatch,
    #[error("data is not finite")]
    NonFinite,
    #[error("window T={t} must exceed max |φ| = {phi}")]
    Window { t: f64, phi: f64 },
    #[error("ensemble size {0} below 8")]
    Ensemble(usize),
    #[error("no λ stage fit the step budget (first needed {steps} steps of {dt:.3e})")]
    StepBudget { dt: f64, steps: usize },
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Cauchy(#[from] CauchyError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Mollify(#[from] MollifyError),
}

/// `λₖ = 1 − 2^{−k}`, `k = 2..=8`.
pub fn default_lambda_schedule() -> Vec<f64> {
    (2..=8).map(|k| 1.0 - 0.5f64.powi(k)).collect()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GoursatConfig {
    pub lambda_schedule: Vec<f64>,
    pub cfl_fraction: f64,
    pub scheme: TimeScheme,
    pub initial_velocity: InitialVelocity,
    /// Stop once a gap falls below this multiple of `‖v‖_{H¹(Σ)}`.
    pub early_stop_tol: f64,
    /// Per-direction step budget of one flattened solve.
    pub max_steps: usize,
    /// Mollify lipschitz coefficients with width ≈ 4 spacings.
    pub regularize: bool,
}

impl Default for GoursatConfig {
    fn default() -> Self {
        Self {
            lambda_schedule: default_lambda_schedule(),
            cfl_fraction: 0.5,
            scheme: TimeScheme::Rk4,
            initial_velocity: InitialVelocity::ZeroTime,
            early_stop_tol: 1e-10,
            max_steps: 2_000_000,
            regularize: true,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct GoursatStage {
    pub lambda: f64,
    pub a_min: f64,
    pub dt: f64,
    pub steps: usize,
    pub roundtrip_l2: f64,
    pub roundtrip_h1: f64,
}

#[derive(Debug, Clone)]
pub struct GoursatResult {
    /// The `λ = 1` solution in `(t, x)` from the last stage's data.
    pub trajectory: Trajectory,
    pub lambda_schedule: Vec<f64>,
    pub successive_h1_gaps: Vec<f64>,
    pub roundtrip_l2: f64,
    pub roundtrip_h1: f64,
    /// False when `v ≡ 0` and the round-trip errors are absolute.
    pub relative: bool,
    pub stages: Vec<GoursatStage>,
    /// Set when the schedule was cut short by the step budget.
    pub warning: Option<String>,
}

/// `ψ(x) = u(φ(x), x)` node by node.
pub fn trace_on_surface(traj: &Trajectory, surface: &CharacteristicSurface) -> Result<GridFunction, GoursatError> {
    if !same_grid(traj.grid(), surface.grid()) {
        return Err(GoursatError::GridMismatch);
    }
    let (lo, hi) = surface.phi_range();
    let (wlo, whi) = traj.window();
    let slack = 1e-12 * (1.0 + wlo.abs().max(whi.abs()));
    if lo < wlo - slack || hi > whi + slack {
        return Err(GoursatError::OutsideWindow { lo, hi, window_lo: wlo, window_hi: whi });
    }
    let phi = surface.phi().values();
    let vals = (0..phi.len()).map(|i| traj.node_value(i, phi[i]).map(|(u, _)| u)).collect::<Result<Vec<_>, _>>()?;
    Ok(GridFunction::from_values(surface.grid(), vals).expect("grid length"))
}

fn trace_pair(traj: &Trajectory, surface: &CharacteristicSurface) -> Result<(GridFunction, GridFunction), GoursatError> {
    let u = trace_on_surface(traj, surface)?;
    let phi = surface.phi().values();
    let ut = (0..phi.len()).map(|i| traj.node_value(i, phi[i]).map(|(_, v)| v)).collect::<Result<Vec<_>, _>>()?;
    Ok((u, GridFunction::from_values(surface.grid(), ut).expect("grid length")))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RoundtripError {
    pub l2: f64,
    pub h1: f64,
    /// False when `v ≡ 0`; the errors are then absolute.
    pub relative: bool,
}

fn compare(psi: &GridFunction, v: &GridFunction, surface: &CharacteristicSurface, metric: &MetricField) -> Result<RoundtripError, GoursatError> {
    let d = psi - v;
    let (l2, h1) = (hk_norm(&d, 0)?, sigma_h1_norm(&d, surface, metric));
    let (nl2, nh1) = (hk_norm(v, 0)?, sigma_h1_norm(v, surface, metric));
    if nl2 == 0.0 {
        return Ok(RoundtripError { l2, h1, relative: false });
    }
    Ok(RoundtripError { l2: l2 / nl2, h1: h1 / nh1, relative: true })
}

/// Relative `L²` and `H¹(Σ)` distance between the trace of `result` and `v`.
pub fn roundtrip_error(
    v: &GridFunction,
    result: &GoursatResult,
    surface: &CharacteristicSurface,
    metric: &MetricField,
) -> Result<RoundtripError, GoursatError> {
    compare(&trace_on_surface(&result.trajectory, surface)?, v, surface, metric)
}

/// Mollification level whose radius is about four grid spacings.
pub fn grid_tied_level(grid: &crate::grid::PeriodicGrid) -> usize {
    (default_base_radius(grid) / (4.0 * grid.min_spacing())).round().max(1.0) as usize
}

fn needs_regularization(metric: &MetricField, op: &FirstOrderOperator) -> bool {
    metric.regularity() == Regularity::Lipschitz || op.regularity.iter().any(|r| *r == Regularity::Lipschitz)
}

/// Sign of `b⁰ − b^αφ_α` on `Σ`: `Some(0)` if it vanishes, `None` if mixed.
fn damping_sign(op: &FirstOrderOperator, surface: &CharacteristicSurface) -> Option<f64> {
    let grid = surface.grid();
    let phi = surface.phi().values();
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for i in 0..grid.len() {
        let x = grid.position(i);
        let grad = surface.grad_at(i);
        let mut p = op.b0.eval(phi[i], x);
        for (axis, b) in op.b.iter().enumerate() {
            p -= b.eval(phi[i], x) * grad[axis];
        }
        lo = lo.min(p);
        hi = hi.max(p);
    }
    match (lo < 0.0, hi > 0.0) {
        (true, true) => None,
        (true, false) => Some(-1.0),
        (false, true) => Some(1.0),
        (false, false) => Some(0.0),
    }
}

/// Solves the characteristic problem `u|_Σ = v` by λ-slowdown.
///
/// Each stage flattens `λg` along `Σ`, steps from `s = 0` with `w = v`,
/// reads the solution off on a slice `t = t₀` and evolves that slice under
/// the original equation across `Σ`. The flattened problem has a stiff mode
/// of rate `−(b⁰ − b^αφ_α)/a`, so `t₀` is `max φ` (forward in `s`) unless the
/// flattened damping is negative, in which case it is `min φ`.
pub fn solve_goursat(
    v: &GridFunction,
    surface: &CharacteristicSurface,
    metric: &MetricField,
    op: &FirstOrderOperator,
    config: &GoursatConfig,
) -> Result<GoursatResult, GoursatError> {
    let sched = &config.lambda_schedule;
    if sched.is_empty() || sched.iter().any(|l| !(*l > 0.0 && *l < 1.0)) || sched.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GoursatError::BadSchedule);
    }
    if !same_grid(v.grid(), surface.grid()) {
        return Err(GoursatError::GridMismatch);
    }
    if v.values().iter().any(|x| !x.is_finite()) {
        return Err(GoursatError::NonFinite);
    }
    let grid = surface.grid();
    let (lo, hi) = surface.phi_range();
    let (t0, mut warning) = match damping_sign(op, surface) {
        Some(d) if d < 0.0 => (lo, None),
        Some(_) => (hi, None),
        None => (hi, Some("flattened damping b⁰ − b^αφ_α changes sign; the stiff mode may grow".to_string())),
    };
    let (smooth_metric, smooth_op) = if config.regularize && needs_regularization(metric, op) {
        regularize_coefficients(metric, op, grid_tied_level(grid), default_base_radius(grid))?
    } else {
        (metric.clone(), op.clone())
    };
    let resolve = SolverConfig { cfl_fraction: config.cfl_fraction, scheme: config.scheme, ..SolverConfig::default() }.with_window(lo, hi);
    let v_norm = sigma_h1_norm(v, surface, metric);

    let mut stages = Vec::new();
    let mut used = Vec::new();
    let mut gaps = Vec::new();
    let mut best: Option<(Trajectory, GridFunction)> = None;
    for &lambda in sched {
        let problem = flatten(&smooth_metric, &smooth_op, surface, lambda)?;
        let outcome = match solve_flattened(&problem, v, t0, config.cfl_fraction, config.scheme, config.initial_velocity, config.max_steps) {
            Ok(o) => o,
            Err(FlattenedFailure::StepBudget { dt, steps }) => {
                if best.is_none() {
                    return Err(GoursatError::StepBudget { dt, steps });
                }
                warning = Some(format!("stopped before λ={lambda}: {steps} steps of {dt:.3e} exceed the budget"));
                break;
            }
        };
        let traj = solve_cauchy(&outcome.data, &resolve, metric, op, None)?;
        let psi = trace_on_surface(&traj, surface)?;
        let err = compare(&psi, v, surface, metric)?;
        stages.push(GoursatStage { lambda, a_min: problem.a_min(), dt: outcome.dt, steps: outcome.steps, roundtrip_l2: err.l2, roundtrip_h1: err.h1 });
        used.push(lambda);
        let stop = match &best {
            Some((_, prev)) => {
                let gap = sigma_h1_norm(&(&psi - prev), surface, metric);
                gaps.push(gap);
                gap < config.early_stop_tol * v_norm
            }
            None => false,
        };
        best = Some((traj, psi));
        if stop {
            break;
        }
    }
    let (trajectory, psi) = best.expect("at least one stage");
    let err = compare(&psi, v, surface, metric)?;
    Ok(GoursatResult {
        trajectory,
        lambda_schedule: used,
        successive_h1_gaps: gaps,
        roundtrip_l2: err.l2,
        roundtrip_h1: err.h1,
        relative: err.relative,
        stages,
        warning,
    })
}

/// Characteristic data `u|_Σ` of `u = F(x − t) + G(x + t)` on the flat 1d
/// cone `φ = min(x, 2π − x)` with `F = sin`, `G = ½cos`.
pub fn dalembert_cone_data(grid: &std::sync::Arc<crate::grid::PeriodicGrid>) -> GridFunction {
    GridFunction::from_fn(grid, |x| {
        let x = x[0];
        if x <= std::f64::consts::PI {
            0.5 * (2.0 * x).cos()
        } else {
            (2.0 * x).sin() + 0.5
        }
    })
}

/// The solution behind [`dalembert_cone_data`].
pub fn dalembert_cone_solution(t: f64, x: f64) -> f64 {
    (x - t).sin() + 0.5 * (x + t).cos()
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TraceConstants {
    pub k2: f64,
    pub k3: f64,
    /// `‖𝕋u‖_{1,Σ} / sup √E` per ensemble member.
    pub ratios: Vec<f64>,
    /// `K₁` of the ensemble solves.
    pub k1: f64,
    /// Smallest energy-estimate margin over the ensemble solves.
    pub max_violation: f64,
}

/// Band-limited data with Fourier modes up to 4 on every axis.
pub fn random_band_limited(grid: &std::sync::Arc<crate::grid::PeriodicGrid>, rng: &mut ChaCha8Rng) -> StateVector {
    const MODES: i32 = 4;
    let draw = |rng: &mut ChaCha8Rng| {
        let dim = grid.dim();
        let ks: Vec<[i32; 2]> = if dim == 1 {
            (0..=MODES).map(|k| [k, 0]).collect()
        } else {
            (0..=MODES).flat_map(|a| (-MODES..=MODES).map(move |b| [a, b])).filter(|k| k[0] > 0 || k[1] >= 0).collect()
        };
        let coef: Vec<(f64, f64)> = ks.iter().map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        GridFunction::from_fn(grid, |x| {
            ks.iter()
                .zip(&coef)
                .map(|(k, (a, b))| {
                    let p = k[0] as f64 * x[0] + k[1] as f64 * x[1];
                    a * p.cos() + b * p.sin()
                })
                .sum()
        })
    };
    let u = draw(rng);
    let ut = draw(rng);
    StateVector::new(u, ut, 0.0)
}

/// Empirical `K₂ = max ‖𝕋u‖_{1,Σ}/‖u‖_{F,T}` and `K₃ = max` of the inverse
/// over a seeded ensemble of Cauchy data at `t = 0`.
pub fn estimate_trace_constants(
    metric: &MetricField,
    op: &FirstOrderOperator,
    surface: &CharacteristicSurface,
    t_max: f64,
    ensemble_size: usize,
    seed: u64,
) -> Result<TraceConstants, GoursatError> {
    let phi_max = surface.phi().max_abs();
    if !(t_max > phi_max) {
        return Err(GoursatError::Window { t: t_max, phi: phi_max });
    }
    if ensemble_size < 8 {
        return Err(GoursatError::Ensemble(ensemble_size));
    }
    let grid = surface.grid();
    let cfg = SolverConfig::default().with_window(-t_max, t_max);
    let runs = (0..ensemble_size as u64)
        .into_par_iter()
        .map(|member| -> Result<(f64, f64, f64), GoursatError> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(member);
            let data = random_band_limited(grid, &mut rng);
            let traj = solve_cauchy(&data, &cfg, metric, op, None)?;
            let report = energy_monitor(&traj, metric, op, None)?;
            let sup_e = traj.states().map(|s| energy(&s, metric)).fold(0.0, f64::max);
            let (u, ut) = trace_pair(&traj, surface)?;
            let trace = (sigma_h1_norm(&u, surface, metric).powi(2) + sigma_l2_dnu0(&ut, surface, metric)?.powi(2)).sqrt();
            Ok((trace / sup_e.sqrt(), report.k1, report.max_violation))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let k1 = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    let max_violation = runs.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let ratios: Vec<f64> = runs.into_iter().map(|r| r.0).collect();
    let k2 = ratios.iter().copied().fold(0.0, f64::max);
    let k3 = ratios.iter().map(|r| 1.0 / r).fold(0.0, f64::max);
    Ok(TraceConstants { k2, k3, ratios, k1, max_violation })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FoliationTable {
    pub times: Vec<f64>,
    /// `‖v(tᵢ₊₁) − v(tᵢ)‖_{H¹} / |tᵢ₊₁ − tᵢ|`, one per consecutive pair.
    pub moduli: Vec<f64>,
}

impl FoliationTable {
    pub fn max_modulus(&self) -> f64 {
        self.moduli.iter().copied().fold(0.0, f64::max)
    }
}

/// Difference quotients of `t ↦ u(t + φ(·), ·)` in `H¹`.
pub fn foliation_continuity(traj: &Trajectory, surface: &CharacteristicSurface, times: &[f64]) -> Result<FoliationTable, GoursatError> {
    let slices = times
        .iter()
        .map(|&t| trace_on_surface(traj, &foliation_slice(surface, t)))
        .collect::<Result<Vec<_>, _>>()?;
    let moduli = slices
        .windows(2)
        .zip(times.windows(2))
        .map(|(v, t)| Ok(hk_norm(&(&v[1] - &v[0]), 1)? / (t[1] - t[0]).abs()))
        .collect::<Result<Vec<f64>, GoursatError>>()?;
    Ok(FoliationTable { times: times.to_vec(), moduli })
}
