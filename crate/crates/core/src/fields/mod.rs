//! Time-dependent inverse metrics `g^{αβ}(t, x)`, first-order operators
//! `L₁ = b⁰∂ₜ + b^α∂_α + c`, and their discretisation on periodic grids.

mod catalog;

pub use catalog::{c1_metric, catalog, catalog_names, CatalogEntry, ExactSolution};

use std::sync::Arc;

use thiserror::Error;

use crate::grid::{GridFunction, PeriodicGrid, Position};

/// 2×2 matrix; only the leading `dim × dim` block is meaningful.
pub type Tensor2 = [[f64; 2]; 2];
pub type TensorFn = Arc<dyn Fn(f64, Position) -> Tensor2 + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64, Position) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("metric is not symmetric at t={t}, node {node}")]
    NonSymmetric { t: f64, node: usize },
    #[error("metric eigenvalue {eig} is not positive at t={t}, node {node}")]
    NonPositive { t: f64, node: usize, eig: f64 },
    #[error("need at least 2 sample times, got {0}")]
    TooFewSamples(usize),
    #[error("unknown catalog entry {0:?}")]
    UnknownCatalog(String),
    #[error("metric dimension {metric} does not match grid dimension {grid}")]
    DimensionMismatch { metric: usize, grid: usize },
    #[error("time {t} outside the declared window [{lo}, {hi}]")]
    OutsideWindow { t: f64, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularity {
    Smooth,
    C1,
    Lipschitz,
    /// Bounded measurable; only allowed for lower-order coefficients.
    Bounded,
}

/// Two-sided eigenvalue envelope of `g^{αβ}`: `lower·Id ≤ g^{-1} ≤ upper·Id`.
///
/// The covariant metric then satisfies `C₁ Id ≤ g ≤ C₂ Id` with
/// `C₁ = 1/upper`, `C₂ = 1/lower`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EllipticityBounds {
    pub lower: f64,
    pub upper: f64,
}

impl EllipticityBounds {
    pub fn c1(&self) -> f64 {
        1.0 / self.upper
    }

    pub fn c2(&self) -> f64 {
        1.0 / self.lower
    }

    pub fn contains(&self, other: &EllipticityBounds, tol: f64) -> bool {
        other.lower >= self.lower - tol && other.upper <= self.upper + tol
    }
}

/// Inverse metric `g^{αβ}(t, x)` with its regularity class and time window.
#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    eval: TensorFn,
    regularity: Regularity,
    window: (f64, f64),
    bounds: EllipticityBounds,
    time_dependent: bool,
    flat: bool,
}

impl std::fmt::Debug for MetricField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricField")
            .field("dim", &self.dim)
            .field("regularity", &self.regularity)
            .field("window", &self.window)
            .field("bounds", &self.bounds)
            .field("time_dependent", &self.time_dependent)
            .finish()
    }
}

impl MetricField {
    pub fn new(
        dim: usize,
        eval: TensorFn,
        regularity: Regularity,
        window: (f64, f64),
        bounds: EllipticityBounds,
        time_dependent: bool,
    ) -> Self {
        Self { dim, eval, regularity, window, bounds, time_dependent, flat: false }
    }

    /// The flat metric `g^{αβ} = δ^{αβ}`.
    pub fn flat(dim: usize) -> Self {
        let mut m = Self::new(
            dim,
            Arc::new(|_, _| [[1.0, 0.0], [0.0, 1.0]]),
            Regularity::Smooth,
            (f64::NEG_INFINITY, f64::INFINITY),
            EllipticityBounds { lower: 1.0, upper: 1.0 },
            false,
        );
        m.flat = true;
        m
    }

    /// True only for metrics built by [`MetricField::flat`].
    pub fn is_flat(&self) -> bool {
        self.flat
    }

    /// One-dimensional metric `g^{11} = f(t, x)`.
    pub fn scalar_1d<F>(f: F, regularity: Regularity, window: (f64, f64), bounds: EllipticityBounds, time_dependent: bool) -> Self
    where
        F: Fn(f64, Position) -> f64 + Send + Sync + 'static,
    {
        Self::new(1, Arc::new(move |t, x| [[f(t, x), 0.0], [0.0, 1.0]]), regularity, window, bounds, time_dependent)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval(&self, t: f64, x: Position) -> Tensor2 {
        (self.eval)(t, x)
    }

    pub fn evaluator(&self) -> &TensorFn {
        &self.eval
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn with_window(mut self, window: (f64, f64)) -> Self {
        self.window = window;
        self
    }

    /// Declared envelope (catalog data, not a measurement).
    pub fn bounds(&self) -> EllipticityBounds {
        self.bounds
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn contains_time(&self, t: f64) -> bool {
        t >= self.window.0 && t <= self.window.1
    }

    pub fn check_time(&self, t: f64) -> Result<(), FieldError> {
        if self.contains_time(t) {
            Ok(())
        } else {
            Err(FieldError::OutsideWindow { t, lo: self.window.0, hi: self.window.1 })
        }
    }

    /// `g^{αβ} ξ_α ξ_β`.
    #[inline]
    pub fn quadratic(&self, t: f64, x: Position, xi: [f64; 2]) -> f64 {
        let g = self.eval(t, x);
        if self.dim == 1 {
            g[0][0] * xi[0] * xi[0]
        } else {
            g[0][0] * xi[0] * xi[0] + 2.0 * g[0][1] * xi[0] * xi[1] + g[1][1] * xi[1] * xi[1]
        }
    }

    /// `∂ₜ g^{αβ}` by a centred difference of the evaluator.
    pub fn time_derivative(&self, t: f64, x: Position) -> Tensor2 {
        if !self.time_dependent {
            return [[0.0; 2]; 2];
        }
        let d = 1e-5 * (1.0 + t.abs());
        let p = self.eval(t + d, x);
        let m = self.eval(t - d, x);
        let mut out = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                out[a][b] = (p[a][b] - m[a][b]) / (2.0 * d);
            }
        }
        out
    }
}

/// Eigenvalues of the leading `dim × dim` block of a symmetric matrix, ascending.
pub fn sym_eigenvalues(g: &Tensor2, dim: usize) -> [f64; 2] {
    if dim == 1 {
        return [g[0][0], g[0][0]];
    }
    let tr = 0.5 * (g[0][0] + g[1][1]);
    let d = (0.25 * (g[0][0] - g[1][1]).powi(2) + g[0][1] * g[0][1]).sqrt();
    [tr - d, tr + d]
}

/// Spectral norm of the leading block (symmetric part).
pub(crate) fn sym_norm(g: &Tensor2, dim: usize) -> f64 {
    let e = sym_eigenvalues(g, dim);
    e[0].abs().max(e[1].abs())
}

/// Sampled eigenvalue envelope of `g^{αβ}` over `window × grid`.
pub fn validate_ellipticity(
    metric: &MetricField,
    grid: &PeriodicGrid,
    window: (f64, f64),
    sample_times: usize,
) -> Result<EllipticityBounds, FieldError> {
    if sample_times < 2 {
        return Err(FieldError::TooFewSamples(sample_times));
    }
    if metric.dim() != grid.dim() {
        return Err(FieldError::DimensionMismatch { metric: metric.dim(), grid: grid.dim() });
    }
    let dim = grid.dim();
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for j in 0..sample_times {
        let t = window.0 + (window.1 - window.0) * j as f64 / (sample_times - 1) as f64;
        for node in 0..grid.len() {
            let g = metric.eval(t, grid.position(node));
            if dim == 2 {
                let scale = g[0][1].abs().max(g[1][0].abs()).max(1.0);
                if (g[0][1] - g[1][0]).abs() > 1e-12 * scale {
                    return Err(FieldError::NonSymmetric { t, node });
                }
            }
            let e = sym_eigenvalues(&g, dim);
            if !(e[0] > 0.0) {
                return Err(FieldError::NonPositive { t, node, eig: e[0] });
            }
            lower = lower.min(e[0]);
            upper = upper.max(e[1]);
        }
    }
    Ok(EllipticityBounds { lower, upper })
}

/// A coefficient of `L₁`, either identically zero or a function of `(t, x)`.
#[derive(Clone)]
pub enum Coefficient {
    Zero,
    Func(ScalarFn),
}

impl std::fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coefficient::Zero => write!(f, "Zero"),
            Coefficient::Func(_) => write!(f, "Func(..)"),
        }
    }
}

impl Coefficient {
    pub fn func<F: Fn(f64, Position) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Coefficient::Func(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        if c == 0.0 {
            Coefficient::Zero
        } else {
            Coefficient::func(move |_, _| c)
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coefficient::Zero)
    }

    #[inline]
    pub fn eval(&self, t: f64, x: Position) -> f64 {
        match self {
            Coefficient::Zero => 0.0,
            Coefficient::Func(f) => f(t, x),
        }
    }

    pub fn sample(&self, grid: &Arc<PeriodicGrid>, t: f64) -> GridFunction {
        match self {
            Coefficient::Zero => GridFunction::zeros(grid),
            Coefficient::Func(f) => GridFunction::from_fn(grid, |x| f(t, x)),
        }
        .with_time(t)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        match self {
            Coefficient::Zero => Coefficient::Zero,
            Coefficient::Func(f) => {
                let f = Arc::clone(f);
                Coefficient::func(move |t, x| alpha * f(t, x))
            }
        }
    }
}

/// `L₁ = b⁰ ∂ₜ + b^α ∂_α + c`.
#[derive(Clone, Debug)]
pub struct FirstOrderOperator {
    pub b0: Coefficient,
    pub b: Vec<Coefficient>,
    pub c: Coefficient,
    /// Regularity tags for `b⁰`, `b^α` (shared), `c`.
    pub regularity: [Regularity; 3],
    pub time_dependent: bool,
}

impl FirstOrderOperator {
    pub fn zero(dim: usize) -> Self {
        Self {
            b0: Coefficient::Zero,
            b: vec![Coefficient::Zero; dim],
            c: Coefficient::Zero,
            regularity: [Regularity::Smooth; 3],
            time_dependent: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn is_zero(&self) -> bool {
        self.b0.is_zero() && self.c.is_zero() && self.b.iter().all(Coefficient::is_zero)
    }

    pub fn with_b0(mut self, b0: Coefficient) -> Self {
        self.b0 = b0;
        self
    }

    pub fn with_b(mut self, axis: usize, b: Coefficient) -> Self {
        self.b[axis] = b;
        self
    }

    pub fn with_c(mut self, c: Coefficient) -> Self {
        self.c = c;
        self
    }

    pub fn with_regularity(mut self, tags: [Regularity; 3]) -> Self {
        self.regularity = tags;
        self
    }

    pub fn time_dependent(mut self, yes: bool) -> Self {
        self.time_dependent = yes;
        self
    }
}

/// Node samples of an operator's coefficients at one time.
#[derive(Debug, Clone)]
pub(crate) struct SampledOperator {
    pub b0: Option<Vec<f64>>,
    pub b: Vec<Option<Vec<f64>>>,
    pub c: Option<Vec<f64>>,
}

impl SampledOperator {
    pub fn sample(op: &FirstOrderOperator, grid: &PeriodicGrid, t: f64) -> Self {
        Self::sample_at(op, grid, |_| t)
    }

    /// Samples with a per-node evaluation time.
    pub fn sample_at<T: Fn(usize) -> f64>(op: &FirstOrderOperator, grid: &PeriodicGrid, time: T) -> Self {
        let s = |c: &Coefficient| match c {
            Coefficient::Zero => None,
            Coefficient::Func(f) => Some((0..grid.len()).map(|i| f(time(i), grid.position(i))).collect()),
        };
        Self { b0: s(&op.b0), b: op.b.iter().map(s).collect(), c: s(&op.c) }
    }

    /// Adds `-(b⁰ v + b^α D_α u + c u)` to `out`.
    pub fn subtract_from(&self, grid: &PeriodicGrid, u: &[f64], v: &[f64], out: &mut [f64]) {
        if let Some(b0) = &self.b0 {
            for i in 0..out.len() {
                out[i] -= b0[i] * v[i];
            }
        }
        if let Some(c) = &self.c {
            for i in 0..out.len() {
                out[i] -= c[i] * u[i];
            }
        }
        for (axis, b) in self.b.iter().enumerate() {
            if let Some(b) = b {
                let inv = 0.5 / grid.spacing(axis);
                for i in 0..out.len() {
                    let d = (u[grid.neighbor(i, axis, 1)] - u[grid.neighbor(i, axis, -1)]) * inv;
                    out[i] -= b[i] * d;
                }
            }
        }
    }
}

/// Discrete divergence-form operator `γ⁻¹ ∂_α(γ g^{αβ} ∂_β ·)` frozen at one
/// set of evaluation times.
///
/// Diagonal terms use face fluxes `γ_{i+½} g^{αα}(x_{i+½}) D⁺u`; the
/// off-diagonal term (dim 2) uses centred differences at nodes. Both pieces
/// are symmetric in the γ-weighted inner product.
#[derive(Debug, Clone)]
pub(crate) struct SpatialForm {
    grid: Arc<PeriodicGrid>,
    /// `γ_{i+½} g^{αα}` at faces, one vector per axis.
    face: Vec<Vec<f64>>,
    /// `γ_i g^{01}` at nodes (2d only).
    cross: Option<Vec<f64>>,
}

impl SpatialForm {
    pub fn at_time(grid: &Arc<PeriodicGrid>, metric: &MetricField, t: f64) -> Self {
        Self::assemble(grid, metric, 1.0, |_| t, |_, _| t)
    }

    /// `scale · γ⁻¹∂(γ g ∂)` with the metric evaluated at `node_time(i)` and
    /// `face_time(i, axis)`.
    pub fn assemble<N, F>(grid: &Arc<PeriodicGrid>, metric: &MetricField, scale: f64, node_time: N, face_time: F) -> Self
    where
        N: Fn(usize) -> f64,
        F: Fn(usize, usize) -> f64,
    {
        let dim = grid.dim();
        let face = (0..dim)
            .map(|axis| {
                let gf = grid.face_density(axis);
                (0..grid.len())
                    .map(|i| scale * gf[i] * metric.eval(face_time(i, axis), grid.face_position(i, axis))[axis][axis])
                    .collect()
            })
            .collect();
        let cross = (dim == 2).then(|| {
            (0..grid.len())
                .map(|i| scale * grid.density()[i] * metric.eval(node_time(i), grid.position(i))[0][1])
                .filter(|_| true)
                .collect::<Vec<f64>>()
        });
        let cross = cross.filter(|c| c.iter().any(|&v| v != 0.0));
        Self { grid: Arc::clone(grid), face, cross }
    }

    /// Writes the operator applied to `u` into `out`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let g = &*self.grid;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (axis, fc) in self.face.iter().enumerate() {
            let h2 = g.spacing(axis) * g.spacing(axis);
            for i in 0..u.len() {
                let ip = g.neighbor(i, axis, 1);
                let im = g.neighbor(i, axis, -1);
                out[i] += (fc[i] * (u[ip] - u[i]) - fc[im] * (u[i] - u[im])) / h2;
            }
        }
        if let Some(cross) = &self.cross {
            let d = |f: &[f64], i: usize, axis: usize| {
                (f[g.neighbor(i, axis, 1)] - f[g.neighbor(i, axis, -1)]) / (2.0 * g.spacing(axis))
            };
            for (a, b) in [(0usize, 1usize), (1, 0)] {
                let flux: Vec<f64> = (0..u.len()).map(|i| cross[i] * d(u, i, b)).collect();
                for i in 0..u.len() {
                    out[i] += d(&flux, i, a);
                }
            }
        }
        for (o, gam) in out.iter_mut().zip(g.density()) {
            *o /= gam;
        }
    }

    /// `Σ γ g^{αβ} D_α u D_β u · dx`, the discrete `∫ g^{αβ}∂_αu∂_βu dν`.
    pub fn quadratic(&self, u: &[f64]) -> f64 {
        self.node_density(u).iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Per-node share of the gradient energy (faces split evenly between
    /// their two nodes), already weighted by γ.
    pub fn node_density(&self, u: &[f64]) -> Vec<f64> {
        let g = &*self.grid;
        let mut out = vec![0.0; u.len()];
        for (axis, fc) in self.face.iter().enumerate() {
            let h = g.spacing(axis);
            for i in 0..u.len() {
                let ip = g.neighbor(i, axis, 1);
                let e = fc[i] * ((u[ip] - u[i]) / h).powi(2);
                out[i] += 0.5 * e;
                out[ip] += 0.5 * e;
            }
        }
        if let Some(cross) = &self.cross {
            for i in 0..u.len() {
                let d0 = (u[g.neighbor(i, 0, 1)] - u[g.neighbor(i, 0, -1)]) / (2.0 * g.spacing(0));
                let d1 = (u[g.neighbor(i, 1, 1)] - u[g.neighbor(i, 1, -1)]) / (2.0 * g.spacing(1));
                out[i] += 2.0 * cross[i] * d0 * d1;
            }
        }
        out
    }
}

/// The spatial part of the d'Alembertian, `γ⁻¹ ∂_α(γ g^{αβ} ∂_β u)`, at time `t`.
pub fn dalembertian_spatial(u: &GridFunction, metric: &MetricField, t: f64) -> GridFunction {
    let form = SpatialForm::at_time(u.grid(), metric, t);
    let mut out = vec![0.0; u.len()];
    form.apply(u.values(), &mut out);
    GridFunction::from_raw(u.grid(), out).with_time(t)
}

/// `g^{αβ} ∂_α∂_β u` with second differences at nodes.
pub fn metric_hessian_contraction(u: &GridFunction, metric: &MetricField, t: f64) -> GridFunction {
    let g = u.grid();
    let v = u.values();
    let out = (0..g.len())
        .map(|i| {
            let m = metric.eval(t, g.position(i));
            let mut acc = 0.0;
            for axis in 0..g.dim() {
                let h = g.spacing(axis);
                acc += m[axis][axis] * (v[g.neighbor(i, axis, 1)] - 2.0 * v[i] + v[g.neighbor(i, axis, -1)]) / (h * h);
            }
            if g.dim() == 2 && m[0][1] != 0.0 {
                let pp = v[g.neighbor(g.neighbor(i, 0, 1), 1, 1)];
                let pm = v[g.neighbor(g.neighbor(i, 0, 1), 1, -1)];
                let mp = v[g.neighbor(g.neighbor(i, 0, -1), 1, 1)];
                let mm = v[g.neighbor(g.neighbor(i, 0, -1), 1, -1)];
                acc += 2.0 * m[0][1] * (pp - pm - mp + mm) / (4.0 * g.spacing(0) * g.spacing(1));
            }
            acc
        })
        .collect();
    GridFunction::from_raw(g, out).with_time(t)
}

/// A state `(u, ∂ₜu)` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub u: GridFunction,
    pub ut: GridFunction,
    pub time: f64,
}

impl StateVector {
    pub fn new(u: GridFunction, ut: GridFunction, time: f64) -> Self {
        assert!(crate::grid::same_grid(u.grid(), ut.grid()), "u and ut on different grids");
        assert!(time.is_finite(), "state time must be finite");
        Self { u: u.with_time(time), ut: ut.with_time(time), time }
    }

    pub fn zeros(grid: &Arc<PeriodicGrid>, time: f64) -> Self {
        Self::new(GridFunction::zeros(grid), GridFunction::zeros(grid), time)
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        self.u.grid()
    }
}

/// `b⁰∂ₜu + b^α∂_αu + c u` at time `t`, with centred spatial differences.
pub fn apply_first_order(state: &StateVector, op: &FirstOrderOperator, t: f64) -> GridFunction {
    let grid = state.grid();
    let sampled = SampledOperator::sample(op, grid, t);
    let mut out = vec![0.0; grid.len()];
    sampled.subtract_from(grid, state.u.values(), state.ut.values(), &mut out);
    out.iter_mut().for_each(|v| *v = -*v);
    GridFunction::from_raw(grid, out).with_time(t)
}

/// Output of [`to_nondivergence_form`].
#[derive(Debug, Clone)]
pub struct NondivergenceForm {
    pub op: FirstOrderOperator,
    /// Set when metric derivatives were taken across possible kinks.
    pub derivative_warning: bool,
}

/// Rewrites `□ + L₁` as `∂ₜ² − g^{αβ}∂_α∂_β + L̃₁` with
/// `p⁰ = b⁰`, `p^β = −γ⁻¹∂_α(γ g^{αβ}) + b^β`, `q = c`.
///
/// Metric derivatives are centred differences of the evaluator with the grid
/// spacing as step; `∂ ln γ` is interpolated linearly from node differences.
pub fn to_nondivergence_form(metric: &MetricField, op: &FirstOrderOperator, grid: &Arc<PeriodicGrid>) -> NondivergenceForm {
    let dim = grid.dim();
    let log_gamma_grad: Option<Arc<Vec<Vec<f64>>>> = (!grid.has_unit_density()).then(|| {
        let lg: Vec<f64> = grid.density().iter().map(|g| g.ln()).collect();
        Arc::new(
            (0..dim)
                .map(|axis| {
                    let h = grid.spacing(axis);
                    (0..grid.len()).map(|i| (lg[grid.neighbor(i, axis, 1)] - lg[grid.neighbor(i, axis, -1)]) / (2.0 * h)).collect()
                })
                .collect(),
        )
    });
    let steps: [f64; 2] = [grid.spacing(0), if dim == 2 { grid.spacing(1) } else { 1.0 }];
    let mut b = Vec::with_capacity(dim);
    for beta in 0..dim {
        let eval = Arc::clone(metric.evaluator());
        let lgg = log_gamma_grad.clone();
        let grid_c = Arc::clone(grid);
        let b_beta = op.b[beta].clone();
        b.push(Coefficient::func(move |t, x| {
            let mut div = 0.0;
            for alpha in 0..dim {
                let mut xp = x;
                let mut xm = x;
                xp[alpha] += steps[alpha];
                xm[alpha] -= steps[alpha];
                div += (eval(t, xp)[alpha][beta] - eval(t, xm)[alpha][beta]) / (2.0 * steps[alpha]);
                if let Some(lgg) = &lgg {
                    div += eval(t, x)[alpha][beta] * interpolate_periodic(&grid_c, &lgg[alpha], x);
                }
            }
            b_beta.eval(t, x) - div
        }));
    }
    let out = FirstOrderOperator {
        b0: op.b0.clone(),
        b,
        c: op.c.clone(),
        regularity: [op.regularity[0], metric.regularity().min_with(op.regularity[1]), op.regularity[2]],
        time_dependent: op.time_dependent || metric.is_time_dependent(),
    };
    NondivergenceForm { op: out, derivative_warning: metric.regularity() == Regularity::Lipschitz }
}

impl Regularity {
    fn rank(self) -> u8 {
        match self {
            Regularity::Smooth => 3,
            Regularity::C1 => 2,
            Regularity::Lipschitz => 1,
            Regularity::Bounded => 0,
        }
    }

    /// Regularity of a coefficient built from one derivative of `self`
    /// combined with `other`.
    pub fn min_with(self, other: Regularity) -> Regularity {
        let lowered = match self {
            Regularity::Smooth => Regularity::Smooth,
            Regularity::C1 => Regularity::Bounded,
            Regularity::Lipschitz | Regularity::Bounded => Regularity::Bounded,
        };
        if lowered.rank() <= other.rank() {
            lowered
        } else {
            other
        }
    }
}

/// Periodic (multi)linear interpolation of node values at an arbitrary position.
pub(crate) fn interpolate_periodic(grid: &PeriodicGrid, values: &[f64], x: Position) -> f64 {
    let dim = grid.dim();
    let mut base = [0isize; 2];
    let mut frac = [0.0; 2];
    for axis in 0..dim {
        let s = x[axis] / grid.spacing(axis);
        let f = s.floor();
        base[axis] = f as isize;
        frac[axis] = s - f;
    }
    let idx = |di: isize, dj: isize| {
        let i = (base[0] + di).rem_euclid(grid.points(0) as isize) as usize;
        let j = if dim == 2 { (base[1] + dj).rem_euclid(grid.points(1) as isize) as usize } else { 0 };
        values[grid.flat_index([i, j])]
    };
    if dim == 1 {
        idx(0, 0) * (1.0 - frac[0]) + idx(1, 0) * frac[0]
    } else {
        let a = idx(0, 0) * (1.0 - frac[0]) + idx(1, 0) * frac[0];
        let b = idx(0, 1) * (1.0 - frac[0]) + idx(1, 1) * frac[0];
        a * (1.0 - frac[1]) + b * frac[1]
    }
}
