//! Approximate identities `ρₖ`, spatial mollification, the commutator
//! defect `Fₖ` and space-time regularization of rough coefficients.

use std::sync::Arc;

use thiserror::Error;

use crate::fields::{Coefficient, FirstOrderOperator, MetricField, Regularity, Tensor2};
use crate::grid::{convolve_periodic, convolve_signed, GridError, GridFunction, PeriodicGrid, Position};
use crate::norms::hk_norm;

/// Spatial offsets per radius (each direction) in coefficient regularization.
const REG_SPACE_POINTS: usize = 8;
/// Time offsets per radius (each direction).
const REG_TIME_POINTS: usize = 4;

#[derive(Debug, Error)]
pub enum MollifyError {
    #[error("mollifier level must be at least 1")]
    BadLevel,
    #[error("base radius {radius} outside (0, {max}]")]
    BadRadius { radius: f64, max: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `(1 − r²)²` on the unit ball.
#[inline]
fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (1.0 - r2).powi(2)
    } else {
        0.0
    }
}

/// Default base radius: an eighth of the shortest circumference.
pub fn default_base_radius(grid: &PeriodicGrid) -> f64 {
    (0..grid.dim()).map(|a| grid.circumference(a)).fold(f64::INFINITY, f64::min) / 8.0
}

/// Discrete `ρₖ`, stored as a kernel indexed from the origin node.
#[derive(Debug, Clone)]
pub struct Mollifier {
    profile: GridFunction,
    level: usize,
    radius: f64,
}

impl Mollifier {
    /// Level-`k` bump of radius `base_radius / k`, normalised on `grid`.
    pub fn new(grid: &Arc<PeriodicGrid>, level: usize, base_radius: f64) -> Result<Self, MollifyError> {
        if level == 0 {
            return Err(MollifyError::BadLevel);
        }
        let max = (0..grid.dim()).map(|a| grid.circumference(a)).fold(f64::INFINITY, f64::min) / 4.0;
        if !(base_radius > 0.0 && base_radius <= max) {
            return Err(MollifyError::BadRadius { radius: base_radius, max });
        }
        let radius = base_radius / level as f64;
        let raw: Vec<f64> = (0..grid.len())
            .map(|i| {
                let y = grid.wrapped_offset(i);
                bump((y[0] * y[0] + y[1] * y[1]) / (radius * radius))
            })
            .collect();
        let mass: f64 = raw.iter().sum::<f64>() * grid.cell_volume();
        let profile = GridFunction::from_raw(grid, raw.iter().map(|v| v / mass).collect());
        Ok(Self { profile, level, radius })
    }

    pub fn with_default_radius(grid: &Arc<PeriodicGrid>, level: usize) -> Result<Self, MollifyError> {
        Self::new(grid, level, default_base_radius(grid))
    }

    pub fn profile(&self) -> &GridFunction {
        &self.profile
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction, MollifyError> {
        Ok(convolve_periodic(f, &self.profile)?.with_time_of(f))
    }

    /// `∂_αρₖ` by centred differences of the discrete profile.
    pub fn derivative(&self, axis: usize) -> GridFunction {
        let g = self.profile.grid();
        let v = self.profile.values();
        let h = g.spacing(axis);
        GridFunction::from_raw(g, (0..g.len()).map(|i| (v[g.neighbor(i, axis, 1)] - v[g.neighbor(i, axis, -1)]) / (2.0 * h)).collect())
    }

    /// `C(ρ) = √dim Σ_α Σ_z |z|₁ |∂_αρₖ(z)| dz`, the constant in
    /// `‖Fₖ‖ ≤ C(ρ) Lip(h) ‖w‖_{H¹}`. Invariant under rescaling of the
    /// bump, up to discretisation.
    pub fn commutator_constant(&self) -> f64 {
        let g = self.profile.grid();
        let mut acc = 0.0;
        for axis in 0..g.dim() {
            let d = self.derivative(axis);
            for i in 0..g.len() {
                let z = g.wrapped_offset(i);
                acc += (z[0].abs() + z[1].abs()) * d.values()[i].abs();
            }
        }
        (g.dim() as f64).sqrt() * acc * g.cell_volume()
    }
}

/// Continuum value of [`Mollifier::commutator_constant`] in one dimension:
/// `∫|z||ρ'(z)| dz = ∫ρ = 1`.
pub const CONTINUUM_COMMUTATOR_CONSTANT_1D: f64 = 1.0;

trait WithTimeOf {
    fn with_time_of(self, other: &GridFunction) -> Self;
}

impl WithTimeOf for GridFunction {
    fn with_time_of(self, other: &GridFunction) -> Self {
        match other.time() {
            Some(t) => self.with_time(t),
            None => self,
        }
    }
}

/// `wₖ(t) = w(t) ∗ ρₖ` for every slice.
pub fn mollify_space(family: &[GridFunction], level: usize, base_radius: f64) -> Result<Vec<GridFunction>, MollifyError> {
    let Some(first) = family.first() else {
        return Ok(Vec::new());
    };
    let m = Mollifier::new(first.grid(), level, base_radius)?;
    family.iter().map(|w| m.apply(w)).collect()
}

/// Output of [`commutator_defect`].
#[derive(Debug, Clone)]
pub struct CommutatorDefect {
    pub field: GridFunction,
    pub l2_norm: f64,
    /// `C(ρ) · Lip(h) · ‖w‖_{H¹}`.
    pub bound: f64,
    pub constant: f64,
    pub lipschitz: f64,
}

/// Largest adjacent-node slope of any entry of `h^{αβ}(t, ·)`.
pub fn lipschitz_envelope(metric: &MetricField, grid: &PeriodicGrid, t: f64) -> f64 {
    let dim = grid.dim();
    let vals: Vec<Tensor2> = (0..grid.len()).map(|i| metric.eval(t, grid.position(i))).collect();
    let mut lip: f64 = 0.0;
    for axis in 0..dim {
        let h = grid.spacing(axis);
        for i in 0..grid.len() {
            let j = grid.neighbor(i, axis, 1);
            for a in 0..dim {
                for b in 0..dim {
                    lip = lip.max((vals[j][a][b] - vals[i][a][b]).abs() / h);
                }
            }
        }
    }
    lip
}

/// `Fₖ = h^{αβ}[(∂_βw) ∗ ∂_αρₖ] − (h^{αβ}∂_βw) ∗ ∂_αρₖ` at time `t`.
pub fn commutator_defect(
    h_metric: &MetricField,
    w: &GridFunction,
    level: usize,
    t: f64,
    base_radius: f64,
) -> Result<CommutatorDefect, MollifyError> {
    let grid = w.grid();
    let dim = grid.dim();
    let m = Mollifier::new(grid, level, base_radius)?;
    let hvals: Vec<Tensor2> = (0..grid.len()).map(|i| h_metric.eval(t, grid.position(i))).collect();
    let dw: Vec<GridFunction> = (0..dim)
        .map(|b| {
            let v = w.values();
            let h = grid.spacing(b);
            GridFunction::from_raw(grid, (0..grid.len()).map(|i| (v[grid.neighbor(i, b, 1)] - v[grid.neighbor(i, b, -1)]) / (2.0 * h)).collect())
        })
        .collect();
    let mut field = vec![0.0; grid.len()];
    for a in 0..dim {
        let drho = m.derivative(a);
        for b in 0..dim {
            let inner = convolve_signed(&dw[b], &drho);
            let weighted = GridFunction::from_raw(grid, (0..grid.len()).map(|i| hvals[i][a][b] * dw[b].values()[i]).collect());
            let outer = convolve_signed(&weighted, &drho);
            for i in 0..grid.len() {
                field[i] += hvals[i][a][b] * inner.values()[i] - outer.values()[i];
            }
        }
    }
    let field = GridFunction::from_raw(grid, field).with_time(t);
    let l2_norm = (field.values().iter().map(|v| v * v).sum::<f64>() * grid.cell_volume()).sqrt();
    let constant = m.commutator_constant();
    let lipschitz = lipschitz_envelope(h_metric, grid, t);
    let norm = hk_norm(w, 1).expect("order 1 is supported");
    Ok(CommutatorDefect { field, l2_norm, bound: constant * lipschitz * norm, constant, lipschitz })
}

/// Offsets and weights of a normalised bump of `radius` sampled on a
/// regular lattice, `points` per radius in each direction.
fn bump_stencil(dim: usize, radius: f64, points: usize) -> Vec<(Position, f64)> {
    let step = radius / points as f64;
    let p = points as isize;
    let mut out = Vec::new();
    let range_y = if dim == 2 { -p..=p } else { 0..=0 };
    for j in range_y {
        for i in -p..=p {
            let y = [i as f64 * step, j as f64 * step];
            let w = bump((y[0] * y[0] + y[1] * y[1]) / (radius * radius));
            if w > 0.0 {
                out.push((y, w));
            }
        }
    }
    let total: f64 = out.iter().map(|(_, w)| w).sum();
    out.iter_mut().for_each(|(_, w)| *w /= total);
    out
}

/// Reflects `t` into `[lo, hi]`.
fn reflect(t: f64, lo: f64, hi: f64) -> f64 {
    if !lo.is_finite() || !hi.is_finite() {
        return t;
    }
    let mut t = t;
    for _ in 0..4 {
        if t < lo {
            t = 2.0 * lo - t;
        } else if t > hi {
            t = 2.0 * hi - t;
        } else {
            break;
        }
    }
    t.clamp(lo, hi)
}

/// A space-time averaging operator shared by the metric and coefficients.
#[derive(Clone)]
struct SpaceTimeAverage {
    space: Arc<Vec<(Position, f64)>>,
    time: Arc<Vec<(f64, f64)>>,
    window: (f64, f64),
}

impl SpaceTimeAverage {
    fn new(dim: usize, radius: f64, window: (f64, f64), time_dependent: bool) -> Self {
        let space = bump_stencil(dim, radius, REG_SPACE_POINTS);
        let time = if time_dependent {
            bump_stencil(1, radius, REG_TIME_POINTS).into_iter().map(|(y, w)| (y[0], w)).collect()
        } else {
            vec![(0.0, 1.0)]
        };
        Self { space: Arc::new(space), time: Arc::new(time), window }
    }

    fn average<F: Fn(f64, Position) -> [[f64; 2]; 2]>(&self, t: f64, x: Position, f: F) -> [[f64; 2]; 2] {
        let mut acc = [[0.0; 2]; 2];
        for &(tau, wt) in self.time.iter() {
            let s = reflect(t - tau, self.window.0, self.window.1);
            for &(y, wy) in self.space.iter() {
                let v = f(s, [x[0] - y[0], x[1] - y[1]]);
                let w = wt * wy;
                for a in 0..2 {
                    for b in 0..2 {
                        acc[a][b] += w * v[a][b];
                    }
                }
            }
        }
        acc
    }
}

/// `ᵏg` and `ᵏL₁`: joint space-time convolution with a bump of radius
/// `base_radius / k`, time reflected at the metric window edges.
pub fn regularize_coefficients(
    metric: &MetricField,
    op: &FirstOrderOperator,
    level: usize,
    base_radius: f64,
) -> Result<(MetricField, FirstOrderOperator), MollifyError> {
    if level == 0 {
        return Err(MollifyError::BadLevel);
    }
    if !(base_radius > 0.0) {
        return Err(MollifyError::BadRadius { radius: base_radius, max: f64::INFINITY });
    }
    let radius = base_radius / level as f64;
    let dim = metric.dim();
    let window = metric.window();
    let avg = SpaceTimeAverage::new(dim, radius, window, metric.is_time_dependent());
    let reg_metric = if metric.is_flat() {
        metric.clone()
    } else {
        let eval = Arc::clone(metric.evaluator());
        let avg = avg.clone();
        MetricField::new(
            dim,
            Arc::new(move |t, x| avg.average(t, x, |s, y| eval(s, y))),
            Regularity::Smooth,
            window,
            metric.bounds(),
            metric.is_time_dependent(),
        )
    };
    let op_avg = SpaceTimeAverage::new(dim, radius, window, op.time_dependent);
    let reg = |c: &Coefficient| match c {
        Coefficient::Zero => Coefficient::Zero,
        Coefficient::Func(f) => {
            let f = Arc::clone(f);
            let avg = op_avg.clone();
            Coefficient::func(move |t, x| avg.average(t, x, |s, y| [[f(s, y), 0.0], [0.0, 0.0]])[0][0])
        }
    };
    let reg_op = FirstOrderOperator {
        b0: reg(&op.b0),
        b: op.b.iter().map(reg).collect(),
        c: reg(&op.c),
        regularity: [Regularity::Smooth; 3],
        time_dependent: op.time_dependent,
    };
    Ok((reg_metric, reg_op))
}
