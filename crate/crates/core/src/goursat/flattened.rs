//! Explicit stepping of the λ-slowed equation in `(s, x)`, `s = t − φ(x)`.
//!
//! With `a = 1 − λ g^{αβ}φ_αφ_β` and `B^β = λ g^{αβ}φ_α` the discrete
//! Lagrangian is
//! `½ Σ γ a ẇ² + Σ_faces γ_f B (Aẇ) D⁺w − ½ λ Q(w)`,
//! where `A` averages nodes onto faces and `Q` is the divergence-form
//! quadratic form. The state is `(w, Z)` with the conjugate momentum
//! `Z = γ a ẇ + Aᵀ(γ_f B D⁺w)`.

use std::sync::Arc;

use crate::cauchy::integrator::{FirstOrderSystem, Stepper};
use crate::cauchy::TimeScheme;
use crate::fields::{SampledOperator, SpatialForm, StateVector};
use crate::grid::{GridFunction, PeriodicGrid};
use crate::surface::TransformedProblem;

/// How `∂ₛw` is fixed on `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialVelocity {
    /// `∂ₛw(0) = 0`, i.e. `∂ₜu|_Σ = 0`.
    ZeroTime,
    /// Derivative along the λg-normal `∂ₜ − λg^{αβ}φ_α∂_β` zero:
    /// `∂ₛw = λg^{αβ}φ_α∂_βv / (1 + λg^{αβ}φ_αφ_β)`.
    NormalZero,
}

impl std::str::FromStr for InitialVelocity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "zero_time" | "zero" => Ok(Self::ZeroTime),
            "normal_zero" | "normal" => Ok(Self::NormalZero),
            other => Err(format!("unknown initial velocity {other:?} (zero_time, normal_zero)")),
        }
    }
}

struct Coefficients {
    s: f64,
    /// `γ a` at nodes.
    mass: Vec<f64>,
    /// `γ_f B^β` at the faces of axis β.
    flux: Vec<Vec<f64>>,
    form: SpatialForm,
}

pub(super) struct FlattenedSystem<'a> {
    problem: &'a TransformedProblem,
    grid: Arc<PeriodicGrid>,
    coeffs: Coefficients,
    sampled: Option<(f64, SampledOperator)>,
    buf: Vec<f64>,
    wdot: Vec<f64>,
}

impl<'a> FlattenedSystem<'a> {
    pub fn new(problem: &'a TransformedProblem) -> Self {
        let grid = Arc::clone(problem.surface.grid());
        let coeffs = Self::build(problem, &grid, 0.0);
        let n = grid.len();
        Self { problem, grid, coeffs, sampled: None, buf: vec![0.0; n], wdot: vec![0.0; n] }
    }

    fn build(problem: &TransformedProblem, grid: &Arc<PeriodicGrid>, s: f64) -> Coefficients {
        let (a, cross) = problem.coefficients_at(s);
        let phi = problem.surface.phi().values();
        let mass = a.values().iter().zip(grid.density()).map(|(a, g)| a * g).collect();
        let flux = cross
            .iter()
            .enumerate()
            .map(|(axis, b)| grid.face_density(axis).iter().zip(b.values()).map(|(g, b)| g * b).collect())
            .collect();
        let form = SpatialForm::assemble(grid, &problem.spatial, problem.lambda, |i| s + phi[i], |i, axis| {
            s + 0.5 * (phi[i] + phi[grid.neighbor(i, axis, 1)])
        });
        Coefficients { s, mass, flux, form }
    }

    fn refresh(&mut self, s: f64) {
        if self.problem.spatial.is_time_dependent() && self.coeffs.s != s {
            self.coeffs = Self::build(self.problem, &self.grid, s);
        }
        let stale = match &self.sampled {
            None => true,
            Some((s0, _)) => self.problem.first_order.time_dependent && *s0 != s,
        };
        if stale {
            self.sampled = Some((s, SampledOperator::sample(&self.problem.first_order, &self.grid, s)));
        }
    }

    /// `Σ_β Aᵀ(γ_f B D⁺w)` into `out`.
    fn cross_momentum(grid: &PeriodicGrid, flux: &[Vec<f64>], w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (axis, f) in flux.iter().enumerate() {
            let h = grid.spacing(axis);
            for i in 0..w.len() {
                let ip = grid.neighbor(i, axis, 1);
                let x = 0.5 * f[i] * (w[ip] - w[i]) / h;
                out[i] += x;
                out[ip] += x;
            }
        }
    }

    /// `∂ₛw` recovered from `(w, Z)` at `s`.
    pub fn velocity(&mut self, s: f64, w: &[f64], z: &[f64], out: &mut [f64]) {
        self.refresh(s);
        Self::cross_momentum(&self.grid, &self.coeffs.flux, w, &mut self.buf);
        for i in 0..w.len() {
            out[i] = (z[i] - self.buf[i]) / self.coeffs.mass[i];
        }
    }

    /// Initial momentum for data `(v, ·)` on `s = 0`.
    pub fn initial_momentum(&mut self, v: &[f64], choice: InitialVelocity) -> Vec<f64> {
        self.refresh(0.0);
        let mut z = vec![0.0; v.len()];
        Self::cross_momentum(&self.grid, &self.coeffs.flux, v, &mut z);
        if choice == InitialVelocity::NormalZero {
            // γa ∂ₛw = Aᵀ(γ_f B D⁺v)·a/(2 − a), since 1 + λ|∇φ|² = 2 − a
            for (zi, a) in z.iter_mut().zip(self.problem.a.values()) {
                *zi *= 2.0 / (2.0 - a);
            }
        }
        z
    }

    /// Largest characteristic speed over the stored sample of `s` values.
    pub fn max_speed(&self, s_samples: &[f64]) -> f64 {
        s_samples.iter().map(|&s| self.problem.max_speed(s)).fold(0.0, f64::max)
    }
}

impl FirstOrderSystem for FlattenedSystem<'_> {
    fn rhs(&mut self, s: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.grid.len();
        let (w, z) = y.split_at(n);
        let (dw, dz) = dy.split_at_mut(n);
        let mut wdot = std::mem::take(&mut self.wdot);
        self.velocity(s, w, z, &mut wdot);
        dw.copy_from_slice(&wdot);
        let g = &*self.grid;
        self.coeffs.form.apply(w, dz);
        for i in 0..n {
            self.buf[i] = 0.0;
        }
        if let Some((_, op)) = &self.sampled {
            op.subtract_from(g, w, &wdot, &mut self.buf);
        }
        for i in 0..n {
            dz[i] = g.density()[i] * (dz[i] + self.buf[i]);
        }
        for (axis, f) in self.coeffs.flux.iter().enumerate() {
            let h = g.spacing(axis);
            for i in 0..n {
                let ip = g.neighbor(i, axis, 1);
                let x = f[i] * 0.5 * (wdot[i] + wdot[ip]) / h;
                dz[i] -= x;
                dz[ip] += x;
            }
        }
        self.wdot = wdot;
    }
}

/// Outcome of one flattened solve.
#[derive(Debug, Clone)]
pub(super) struct FlattenedOutcome {
    /// `(u, ∂ₜu)` of the λ-slowed solution on `t = t0`.
    pub data: StateVector,
    pub dt: f64,
    pub steps: usize,
}

pub(super) enum FlattenedFailure {
    StepBudget { dt: f64, steps: usize },
}

/// Integrates from `s = 0` with data `(v, ·)` and samples each node at
/// `s_i = t0 − φ_i`.
pub(super) fn solve_flattened(
    problem: &TransformedProblem,
    v: &GridFunction,
    t0: f64,
    cfl: f64,
    scheme: TimeScheme,
    initial: InitialVelocity,
    max_steps: usize,
) -> Result<FlattenedOutcome, FlattenedFailure> {
    let grid = Arc::clone(problem.surface.grid());
    let n = grid.len();
    let phi = problem.surface.phi().values();
    let targets: Vec<f64> = phi.iter().map(|p| t0 - p).collect();
    let s_lo = targets.iter().copied().fold(0.0, f64::min);
    let s_hi = targets.iter().copied().fold(0.0, f64::max);

    let mut sys = FlattenedSystem::new(problem);
    let speed = sys.max_speed(&[s_lo, 0.5 * s_lo, 0.0, 0.5 * s_hi, s_hi]);
    let dt = cfl * grid.min_spacing() / ((grid.dim() as f64).sqrt() * speed);
    let longest = s_hi.max(-s_lo);
    let steps_needed = (longest / dt).ceil() as usize;
    if !(dt > 0.0) || steps_needed > max_steps {
        return Err(FlattenedFailure::StepBudget { dt, steps: steps_needed });
    }

    let z0 = sys.initial_momentum(v.values(), initial);
    let mut y0 = Vec::with_capacity(2 * n);
    y0.extend_from_slice(v.values());
    y0.extend_from_slice(&z0);
    let mut wdot0 = vec![0.0; n];
    sys.velocity(0.0, &y0[..n], &y0[n..], &mut wdot0);

    let mut u = vec![0.0; n];
    let mut ut = vec![0.0; n];
    for i in (0..n).filter(|&i| targets[i] == 0.0) {
        u[i] = y0[i];
        ut[i] = wdot0[i];
    }
    let mut stepper = Stepper::new(2 * n);
    let mut total = 0;
    for (end, sign) in [(s_hi, 1.0), (s_lo, -1.0)] {
        let mut pending: Vec<usize> = (0..n).filter(|&i| targets[i] * sign > 0.0).collect();
        if pending.is_empty() {
            continue;
        }
        pending.sort_by(|&a, &b| (targets[a] * sign).total_cmp(&(targets[b] * sign)));
        let steps = ((end * sign) / dt).ceil().max(1.0) as usize;
        let ds = end / steps as f64;
        let mut y = y0.clone();
        let mut wd = wdot0.clone();
        let mut next = 0;
        for k in 0..steps {
            let s = ds * k as f64;
            let prev = y.clone();
            let prev_wd = wd.clone();
            stepper.rk_step(scheme, &mut sys, s, ds, &mut y);
            let s_new = if k + 1 == steps { end } else { ds * (k + 1) as f64 };
            sys.velocity(s_new, &y[..n], &y[n..], &mut wd);
            while next < pending.len() && targets[pending[next]] * sign <= s_new * sign {
                let i = pending[next];
                let theta = ((targets[i] - s) / ds).clamp(0.0, 1.0);
                u[i] = hermite(theta, ds, prev[i], prev_wd[i], y[i], wd[i]);
                ut[i] = (1.0 - theta) * prev_wd[i] + theta * wd[i];
                next += 1;
            }
            if next == pending.len() {
                total += k + 1;
                break;
            }
        }
    }
    let data = StateVector::new(GridFunction::from_raw(&grid, u), GridFunction::from_raw(&grid, ut), t0);
    Ok(FlattenedOutcome { data, dt, steps: total })
}

fn hermite(s: f64, tau: f64, p0: f64, m0: f64, p1: f64, m1: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * tau * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * tau * m1
}
