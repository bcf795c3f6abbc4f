//! The system for `U = (u, ∂₁u, …, ∂ₙu)` obtained by differentiating
//! `∂ₜ²u = g^{αβ}∂_α∂_βu` in space:
//! `∂ₜ²w_μ = g^{αβ}∂_α∂_βw_μ + (∂_μg^{αβ})∂_αw_β`.

use std::sync::Arc;

use crate::fields::{MetricField, Regularity, StateVector, Tensor2};
use crate::grid::{GridFunction, PeriodicGrid};

use super::integrator::{SecondOrderSystem, Stepper};
use super::{max_stable_dt, CauchyError, SolverConfig, Trajectory};

/// Constant in the expected constraint size `C·h²·(1 + |t − t₀|)²·scale`.
pub const CONSTRAINT_CONSTANT: f64 = 5.0;
/// Drift beyond this multiple of the expected size aborts the run.
pub const DRIFT_FACTOR: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct DerivedSolution {
    /// The scalar component `u`.
    pub trajectory: Trajectory,
    /// `components[k][axis][node]`: evolved `∂_axis u` at stored step `k`.
    pub components: Vec<Vec<Vec<f64>>>,
    /// `max |w − D^c u|` per stored step.
    pub drift: Vec<f64>,
    /// The abort threshold at each stored step.
    pub allowed: Vec<f64>,
}

impl DerivedSolution {
    pub fn component(&self, step: usize, axis: usize) -> GridFunction {
        GridFunction::from_raw(self.trajectory.grid(), self.components[step][axis].clone()).with_time(self.trajectory.times()[step])
    }

    pub fn max_drift(&self) -> f64 {
        self.drift.iter().copied().fold(0.0, f64::max)
    }
}

struct DerivedSystem<'a> {
    grid: Arc<PeriodicGrid>,
    metric: &'a MetricField,
    cached: Option<(f64, Vec<Tensor2>, Vec<Vec<Tensor2>>)>,
}

impl DerivedSystem<'_> {
    fn sample(&mut self, t: f64) {
        let stale = match &self.cached {
            None => true,
            Some((t0, ..)) => self.metric.is_time_dependent() && *t0 != t,
        };
        if !stale {
            return;
        }
        let g = &self.grid;
        let m: Vec<Tensor2> = (0..g.len()).map(|i| self.metric.eval(t, g.position(i))).collect();
        let dm = (0..g.dim())
            .map(|mu| {
                let h = g.spacing(mu);
                (0..g.len())
                    .map(|i| {
                        let mut xp = g.position(i);
                        let mut xm = xp;
                        xp[mu] += h;
                        xm[mu] -= h;
                        let (a, b) = (self.metric.eval(t, xp), self.metric.eval(t, xm));
                        let mut d = [[0.0; 2]; 2];
                        for r in 0..2 {
                            for c in 0..2 {
                                d[r][c] = (a[r][c] - b[r][c]) / (2.0 * h);
                            }
                        }
                        d
                    })
                    .collect()
            })
            .collect();
        self.cached = Some((t, m, dm));
    }
}

fn hessian(g: &PeriodicGrid, m: &[Tensor2], v: &[f64], out: &mut [f64]) {
    for i in 0..g.len() {
        let mut acc = 0.0;
        for axis in 0..g.dim() {
            let h = g.spacing(axis);
            acc += m[i][axis][axis] * (v[g.neighbor(i, axis, 1)] - 2.0 * v[i] + v[g.neighbor(i, axis, -1)]) / (h * h);
        }
        if g.dim() == 2 && m[i][0][1] != 0.0 {
            let pp = v[g.neighbor(g.neighbor(i, 0, 1), 1, 1)];
            let pm = v[g.neighbor(g.neighbor(i, 0, 1), 1, -1)];
            let mp = v[g.neighbor(g.neighbor(i, 0, -1), 1, 1)];
            let mm = v[g.neighbor(g.neighbor(i, 0, -1), 1, -1)];
            acc += 2.0 * m[i][0][1] * (pp - pm - mp + mm) / (4.0 * g.spacing(0) * g.spacing(1));
        }
        out[i] = acc;
    }
}

fn centered(g: &PeriodicGrid, v: &[f64], axis: usize, i: usize) -> f64 {
    (v[g.neighbor(i, axis, 1)] - v[g.neighbor(i, axis, -1)]) / (2.0 * g.spacing(axis))
}

impl SecondOrderSystem for DerivedSystem<'_> {
    fn accel(&mut self, t: f64, q: &[f64], _p: &[f64], out: &mut [f64]) {
        self.sample(t);
        let (_, m, dm) = self.cached.as_ref().expect("sampled");
        let g = &self.grid;
        let n = g.len();
        let dim = g.dim();
        for c in 0..=dim {
            hessian(g, m, &q[c * n..(c + 1) * n], &mut out[c * n..(c + 1) * n]);
        }
        for mu in 0..dim {
            for i in 0..n {
                let mut acc = 0.0;
                for a in 0..dim {
                    for b in 0..dim {
                        let d = dm[mu][i][a][b];
                        if d != 0.0 {
                            acc += d * centered(g, &q[(1 + b) * n..(2 + b) * n], a, i);
                        }
                    }
                }
                out[(1 + mu) * n + i] += acc;
            }
        }
    }
}

/// Evolves `(u, ∇u)` from `(u₀, u₁)` with `w(0) = D^c u₀`, `∂ₜw(0) = D^c u₁`,
/// checking `|w − D^c u|` at every step.
pub fn solve_derived_system(data: &StateVector, config: &SolverConfig, metric: &MetricField) -> Result<DerivedSolution, CauchyError> {
    config.validate()?;
    if metric.regularity() == Regularity::Bounded {
        return Err(CauchyError::Config("derived system needs a metric with bounded first derivatives".into()));
    }
    let (lo, hi) = config.window;
    let t0 = data.time;
    if !(t0 >= lo && t0 <= hi) {
        return Err(CauchyError::OutsideWindow { t: t0, lo, hi });
    }
    metric.check_time(lo)?;
    metric.check_time(hi)?;
    let grid = Arc::clone(data.grid());
    let n = grid.len();
    let dim = grid.dim();
    let dt_max = max_stable_dt(metric, &grid, config.window, config.cfl_fraction, None, None)?;
    let dt = config.dt.unwrap_or(dt_max);
    if dt > dt_max * (1.0 + 1e-12) || !(dt > 0.0) {
        return Err(CauchyError::StepTooLarge { dt, max: dt_max });
    }

    let grad = |v: &[f64]| -> Vec<f64> { (0..dim).flat_map(|a| (0..n).map(move |i| (a, i))).map(|(a, i)| centered(&grid, v, a, i)).collect() };
    let mut y0 = Vec::with_capacity(2 * (1 + dim) * n);
    y0.extend_from_slice(data.u.values());
    y0.extend(grad(data.u.values()));
    y0.extend_from_slice(data.ut.values());
    y0.extend(grad(data.ut.values()));
    let m = (1 + dim) * n;
    let h = grid.min_spacing();
    let scale = 1.0 + y0.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let allowed_at = |t: f64| DRIFT_FACTOR * CONSTRAINT_CONSTANT * h * h * (1.0 + (t - t0).abs()).powi(2) * scale;
    let drift_of = |y: &[f64]| -> f64 {
        let g = grad(&y[..n]);
        g.iter().zip(&y[n..m]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };

    let mut sys = DerivedSystem { grid: Arc::clone(&grid), metric, cached: None };
    let mut stepper = Stepper::new(2 * m);
    let mut run = |target: f64| -> Result<(Vec<f64>, Vec<Vec<f64>>), CauchyError> {
        let len = (target - t0).abs();
        let (mut times, mut ys) = (Vec::new(), Vec::new());
        if len == 0.0 {
            return Ok((times, ys));
        }
        let steps = (len / dt - 1e-9).ceil().max(1.0) as usize;
        let step = (target - t0) / steps as f64;
        let mut y = y0.clone();
        for k in 0..steps {
            stepper.second_order_step(config.scheme, &mut sys, t0 + step * k as f64, step, &mut y);
            let t = if k + 1 == steps { target } else { t0 + step * (k + 1) as f64 };
            let drift = drift_of(&y);
            let allowed = allowed_at(t);
            if !drift.is_finite() || drift > allowed {
                return Err(CauchyError::ConstraintDrift { t, drift, allowed });
            }
            if (k + 1) % config.store_every == 0 || k + 1 == steps {
                times.push(t);
                ys.push(y.clone());
            }
        }
        Ok((times, ys))
    };
    let (bt, by) = run(lo)?;
    let (ft, fy) = run(hi)?;
    let mut times: Vec<f64> = bt.into_iter().rev().collect();
    let mut ys: Vec<Vec<f64>> = by.into_iter().rev().collect();
    let reference = times.len();
    times.push(t0);
    ys.push(y0.clone());
    times.extend(ft);
    ys.extend(fy);

    let mut traj = Trajectory {
        grid: Arc::clone(&grid),
        times: Vec::with_capacity(times.len()),
        u: Vec::new(),
        ut: Vec::new(),
        utt: Vec::new(),
        dt,
        reference,
        metric: metric.clone(),
        op: crate::fields::FirstOrderOperator::zero(dim),
        source: None,
    };
    let mut components = Vec::with_capacity(times.len());
    let (mut drift, mut allowed) = (Vec::new(), Vec::new());
    let mut acc = vec![0.0; m];
    for (t, y) in times.iter().zip(&ys) {
        sys.accel(*t, &y[..m], &y[m..], &mut acc);
        traj.times.push(*t);
        traj.u.push(y[..n].to_vec());
        traj.ut.push(y[m..m + n].to_vec());
        traj.utt.push(acc[..n].to_vec());
        components.push((0..dim).map(|a| y[(1 + a) * n..(2 + a) * n].to_vec()).collect());
        drift.push(drift_of(y));
        allowed.push(allowed_at(*t));
    }
    Ok(DerivedSolution { trajectory: traj, components, drift, allowed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::catalog;
    use crate::grid::{diff, DiffScheme};

    fn data(g: &Arc<PeriodicGrid>, u: impl Fn(f64) -> f64) -> StateVector {
        StateVector::new(GridFunction::from_fn(g, |x| u(x[0])), GridFunction::zeros(g), 0.0)
    }

    #[test]
    fn flat_component_tracks_scalar_gradient() {
        let g = PeriodicGrid::new_1d(128);
        let sol = solve_derived_system(&data(&g, f64::sin), &SolverConfig::default(), &MetricField::flat(1)).unwrap();
        let k = sol.trajectory.len() - 1;
        let t = sol.trajectory.times()[k];
        let w = sol.component(k, 0);
        let du = diff(&sol.trajectory.state(k).u, 0, DiffScheme::Centered2).unwrap();
        assert!((&w - &du).max_abs() < 1e-12);
        let want = GridFunction::from_fn(&g, |x| x[0].cos() * t.cos());
        assert!((&w - &want).max_abs() < 1e-3);
    }

    #[test]
    fn zero_and_constant_data() {
        let g = PeriodicGrid::new_1d(32);
        let flat = MetricField::flat(1);
        let z = solve_derived_system(&StateVector::zeros(&g, 0.0), &SolverConfig::default(), &flat).unwrap();
        assert!(z.components.iter().flatten().flatten().all(|&v| v == 0.0));
        let c = solve_derived_system(&data(&g, |_| 1.0), &SolverConfig::default(), &flat).unwrap();
        assert!(c.trajectory.states().all(|s| s.u.values().iter().all(|&v| (v - 1.0).abs() < 1e-14)));
        assert_eq!(c.max_drift(), 0.0);
    }

    #[test]
    fn smooth_constraint_within_order() {
        let entry = catalog("smooth1d").unwrap();
        let mut drifts = Vec::new();
        for n in [64, 128] {
            let g = PeriodicGrid::new_1d(n);
            let sol = solve_derived_system(&data(&g, f64::sin), &SolverConfig::default(), &entry.metric).unwrap();
            let h = g.spacing(0);
            assert!(sol.max_drift() < 5.0 * h * h, "{n}: {}", sol.max_drift());
            drifts.push(sol.max_drift());
        }
        assert!((drifts[0] / drifts[1]).log2() > 1.7, "{drifts:?}");
    }

    #[test]
    fn two_dimensional_flat() {
        let g = PeriodicGrid::new_2d(24, 24);
        let d = StateVector::new(GridFunction::from_fn(&g, |x| x[0].sin() * x[1].cos()), GridFunction::zeros(&g), 0.0);
        let sol = solve_derived_system(&d, &SolverConfig::default().with_window(-0.5, 0.5), &MetricField::flat(2)).unwrap();
        assert!(sol.max_drift() < 1e-12);
        assert_eq!(sol.components[0].len(), 2);
    }

    #[test]
    fn rejects_bounded_metric() {
        let g = PeriodicGrid::new_1d(16);
        let m = MetricField::scalar_1d(|_, _| 1.0, Regularity::Bounded, (-1.0, 1.0), crate::fields::EllipticityBounds { lower: 1.0, upper: 1.0 }, false);
        assert!(matches!(solve_derived_system(&data(&g, f64::sin), &SolverConfig::default(), &m), Err(CauchyError::Config(_))));
    }
}
