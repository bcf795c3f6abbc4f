//! Energies, Sobolev norms on the torus and on `Σ`, and the constant `K₁`.

use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

use crate::fields::{sym_eigenvalues, FirstOrderOperator, MetricField, SpatialForm, StateVector};
use crate::grid::{GridFunction, PeriodicGrid};
use crate::surface::{dnu0_density, CharacteristicSurface, SurfaceError};

/// Time samples used for coefficient envelopes.
pub const K1_TIME_SAMPLES: usize = 65;

#[derive(Debug, Error)]
pub enum NormError {
    #[error("Sobolev order {0} not supported (max 2)")]
    Order(usize),
    #[error("T must be positive, got {0}")]
    BadHorizon(f64),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("need strictly increasing times and matching energies")]
    BadSeries,
}

/// `∫ (|∂ₜu|² + g^{αβ}∂_αu∂_βu + |u|²) dν` at `state.time`.
pub fn energy(state: &StateVector, metric: &MetricField) -> f64 {
    let form = SpatialForm::at_time(state.grid(), metric, state.time);
    energy_with_form(state, &form)
}

pub(crate) fn energy_with_form(state: &StateVector, form: &SpatialForm) -> f64 {
    let grid = state.grid();
    let mass: f64 = grid
        .density()
        .iter()
        .zip(state.u.values().iter().zip(state.ut.values()))
        .map(|(g, (u, v))| g * (u * u + v * v))
        .sum();
    mass * grid.cell_volume() + form.quadratic(state.u.values())
}

/// Flat-reference Sobolev norm: `k = 0` is the γ-weighted `L²` norm, higher
/// orders add forward-difference derivatives (all ordered pairs for `k = 2`).
pub fn hk_norm(f: &GridFunction, k: usize) -> Result<f64, NormError> {
    if k > 2 {
        return Err(NormError::Order(k));
    }
    let grid = f.grid();
    let v = f.values();
    let dv = grid.cell_volume();
    let gamma = grid.density();
    let mut acc: f64 = v.iter().zip(gamma).map(|(x, g)| g * x * x).sum::<f64>() * dv;
    if k >= 1 {
        for axis in 0..grid.dim() {
            let gf = grid.face_density(axis);
            let d = forward(grid, v, axis);
            acc += d.iter().zip(&gf).map(|(x, g)| g * x * x).sum::<f64>() * dv;
        }
    }
    if k >= 2 {
        for a in 0..grid.dim() {
            let da = forward(grid, v, a);
            for b in 0..grid.dim() {
                let dab = forward(grid, &da, b);
                acc += dab.iter().zip(gamma).map(|(x, g)| g * x * x).sum::<f64>() * dv;
            }
        }
    }
    Ok(acc.sqrt())
}

fn forward(grid: &PeriodicGrid, v: &[f64], axis: usize) -> Vec<f64> {
    let h = grid.spacing(axis);
    (0..v.len()).map(|i| (v[grid.neighbor(i, axis, 1)] - v[i]) / h).collect()
}

/// Divergence-form quadratic form with the metric evaluated on `Σ`.
fn surface_form(surface: &CharacteristicSurface, metric: &MetricField) -> SpatialForm {
    let grid = surface.grid();
    let phi = surface.phi().values();
    SpatialForm::assemble(grid, metric, 1.0, |i| phi[i], |i, axis| 0.5 * (phi[i] + phi[grid.neighbor(i, axis, 1)]))
}

/// `(∫ |ψ|² + g^{αβ}(φ(x), x) ∂_αψ ∂_βψ dν)^{1/2}`.
pub fn sigma_h1_norm(psi: &GridFunction, surface: &CharacteristicSurface, metric: &MetricField) -> f64 {
    let grid = psi.grid();
    let mass: f64 = psi.values().iter().zip(grid.density()).map(|(p, g)| g * p * p).sum();
    (mass * grid.cell_volume() + surface_form(surface, metric).quadratic(psi.values())).sqrt()
}

/// `L²` norm of `ψ` against `dν⁰ = (1 − g^{αβ}∂_αφ∂_βφ) dν`.
pub fn sigma_l2_dnu0(psi: &GridFunction, surface: &CharacteristicSurface, metric: &MetricField) -> Result<f64, NormError> {
    let density = dnu0_density(surface, metric)?;
    let grid = psi.grid();
    let acc: f64 = psi
        .values()
        .iter()
        .zip(density.values())
        .zip(grid.density())
        .map(|((p, d), g)| g * d.max(0.0) * p * p)
        .sum();
    Ok((acc * grid.cell_volume()).sqrt())
}

/// Energy of `state` restricted to `{x : φ(x) ≤ t}`; face terms are split
/// evenly between their two nodes.
pub fn energy_phi(state: &StateVector, surface: &CharacteristicSurface, metric: &MetricField, t: f64) -> f64 {
    let grid = state.grid();
    let form = SpatialForm::at_time(grid, metric, state.time);
    let grad = form.node_density(state.u.values());
    let phi = surface.phi().values();
    let acc: f64 = (0..grid.len())
        .filter(|&i| phi[i] <= t)
        .map(|i| {
            let (u, v) = (state.u.values()[i], state.ut.values()[i]);
            grid.density()[i] * (u * u + v * v) + grad[i]
        })
        .sum();
    acc * grid.cell_volume()
}

/// Coefficient envelopes entering `K₁`, each a discrete sup.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct K1Breakdown {
    pub dt_metric: f64,
    pub divergence: f64,
    pub b0: f64,
    pub b: f64,
    pub c: f64,
    /// `max(1, 1/λ_min)`, converts `|∂u|²` into `g^{αβ}∂_αu∂_βu`.
    pub rho: f64,
}

impl K1Breakdown {
    pub fn total(&self) -> f64 {
        self.rho * (self.dt_metric + 2.0 * self.divergence) + 2.0 * (self.b0 + self.b * self.rho + self.c) + 1.0
    }
}

/// Admissible `K₁` for `E(t) ≤ E(s) e^{K₁|t−s|}` on `[−T, T]`, sampled on a
/// default grid with unit density.
pub fn k1_bound(metric: &MetricField, op: &FirstOrderOperator, t_max: f64) -> Result<f64, NormError> {
    let grid = if metric.dim() == 1 { PeriodicGrid::new_1d(256) } else { PeriodicGrid::new_2d(64, 64) };
    Ok(k1_breakdown(metric, op, t_max, &grid)?.total())
}

/// `K₁` envelopes sampled on `grid` (its density enters the divergence term).
///
/// Times come from a fixed lattice of [`K1_TIME_SAMPLES`] points over the
/// metric window (or a fixed step when the window is unbounded), keeping
/// every point within one step of `[−T, T]`; so the result is nondecreasing
/// in `T`.
pub fn k1_breakdown(metric: &MetricField, op: &FirstOrderOperator, t_max: f64, grid: &Arc<PeriodicGrid>) -> Result<K1Breakdown, NormError> {
    if !(t_max > 0.0) {
        return Err(NormError::BadHorizon(t_max));
    }
    let dim = grid.dim();
    let times = sample_times(metric, op, t_max);
    let mut out = K1Breakdown { dt_metric: 0.0, divergence: 0.0, b0: 0.0, b: 0.0, c: 0.0, rho: 1.0 };
    let mut lambda_min = f64::INFINITY;
    let ln_gamma: Vec<f64> = grid.density().iter().map(|g| g.ln()).collect();
    for &t in &times {
        for i in 0..grid.len() {
            let x = grid.position(i);
            let g = metric.eval(t, x);
            lambda_min = lambda_min.min(sym_eigenvalues(&g, dim)[0]);
            let dg = metric.time_derivative(t, x);
            out.dt_metric = out.dt_metric.max(crate::fields::sym_norm(&dg, dim));
            let mut p2 = 0.0;
            for beta in 0..dim {
                let mut p = 0.0;
                for alpha in 0..dim {
                    let h = grid.spacing(alpha);
                    let mut xp = x;
                    let mut xm = x;
                    xp[alpha] += h;
                    xm[alpha] -= h;
                    p += (metric.eval(t, xp)[alpha][beta] - metric.eval(t, xm)[alpha][beta]) / (2.0 * h);
                    let dl = (ln_gamma[grid.neighbor(i, alpha, 1)] - ln_gamma[grid.neighbor(i, alpha, -1)]) / (2.0 * h);
                    p += g[alpha][beta] * dl;
                }
                p2 += p * p;
            }
            out.divergence = out.divergence.max(p2.sqrt());
            out.b0 = out.b0.max(op.b0.eval(t, x).abs());
            let bn: f64 = op.b.iter().map(|b| b.eval(t, x).powi(2)).sum::<f64>().sqrt();
            out.b = out.b.max(bn);
            out.c = out.c.max(op.c.eval(t, x).abs());
        }
    }
    out.rho = 1.0f64.max(1.0 / lambda_min);
    Ok(out)
}

fn sample_times(metric: &MetricField, op: &FirstOrderOperator, t_max: f64) -> Vec<f64> {
    if !metric.is_time_dependent() && !op.time_dependent {
        return vec![0.0];
    }
    let (lo, hi) = metric.window();
    // fixed lattice; one extra lattice point beyond ±T keeps the sets nested in T
    let (start, step, count) = if lo.is_finite() && hi.is_finite() {
        (lo, (hi - lo) / (K1_TIME_SAMPLES - 1) as f64, K1_TIME_SAMPLES)
    } else {
        let step = 1.0 / 32.0;
        let k = (t_max / step).ceil() as i64 + 1;
        (-(k as f64) * step, step, 2 * k as usize + 1)
    };
    (0..count).map(|j| start + step * j as f64).filter(|t| t.abs() <= t_max + step).collect()
}

/// Energies along a run next to the bound `E(s)e^{K₁|t−s|}` (with a source,
/// `e^{K₁|t−s|}(√E(s) + |∫ₛᵗ‖f‖|)²`).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub bound_curve: Vec<f64>,
    /// `min (bound − E)/bound`; negative means the bound was violated.
    pub max_violation: f64,
    pub k1: f64,
    /// Index of the data time `s`.
    pub reference: usize,
}

impl EnergyReport {
    /// `times` strictly increasing; `source_l2[i] = ‖f(tᵢ)‖_{L²}` if a source is present.
    pub fn new(times: Vec<f64>, energies: Vec<f64>, reference: usize, k1: f64, source_l2: Option<&[f64]>) -> Result<Self, NormError> {
        if times.len() != energies.len() || times.is_empty() || reference >= times.len() || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(NormError::BadSeries);
        }
        let n = times.len();
        // |∫ₛᵗ ‖f‖| by trapezoid outward from the reference
        let mut forcing = vec![0.0; n];
        if let Some(f) = source_l2 {
            for i in reference + 1..n {
                forcing[i] = forcing[i - 1] + 0.5 * (f[i] + f[i - 1]) * (times[i] - times[i - 1]);
            }
            for i in (0..reference).rev() {
                forcing[i] = forcing[i + 1] + 0.5 * (f[i] + f[i + 1]) * (times[i + 1] - times[i]);
            }
        }
        let e0 = energies[reference];
        let s = times[reference];
        let bound_curve: Vec<f64> = (0..n).map(|i| (k1 * (times[i] - s).abs()).exp() * (e0.sqrt() + forcing[i]).powi(2)).collect();
        let max_violation = energies
            .iter()
            .zip(&bound_curve)
            .map(|(e, b)| if *b > 0.0 { (b - e) / b } else if *e > 0.0 { -1.0 } else { 0.0 })
            .fold(f64::INFINITY, f64::min);
        Ok(Self { times, energies, bound_curve, max_violation, k1, reference })
    }

    /// `max E(tⱼ) / (E(tᵢ) e^{K₁|tⱼ−tᵢ|})` over all ordered pairs; the
    /// estimate holds two-sidedly, so any pair is a valid `(s, t)`.
    /// Only meaningful without a source.
    pub fn worst_pair_ratio(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.times.len() {
            if self.energies[i] <= 0.0 {
                continue;
            }
            for j in 0..self.times.len() {
                let b = self.energies[i] * (self.k1 * (self.times[j] - self.times[i]).abs()).exp();
                worst = worst.max(self.energies[j] / b);
            }
        }
        worst
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# goursat-lab energy v1")?;
        writeln!(w, "t,energy,bound,margin")?;
        for i in 0..self.times.len() {
            let b = self.bound_curve[i];
            let margin = if b > 0.0 { (b - self.energies[i]) / b } else { 0.0 };
            writeln!(w, "{},{},{},{}", self.times[i], self.energies[i], b, margin)?;
        }
        Ok(())
    }
}
