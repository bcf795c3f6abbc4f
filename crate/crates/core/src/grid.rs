//! Periodic grids on flat tori and the sampled fields that live on them.
//!
//! Nodes sit at `x = i * spacing` along each axis, row-major with axis 0
//! fastest. All stencils wrap around.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

/// Spatial position; the second entry is ignored on one-dimensional grids.
pub type Position = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
    #[error("need at least 8 points per axis, got {0}")]
    TooFewPoints(usize),
    #[error("circumference must be positive and finite, got {0}")]
    BadCircumference(f64),
    #[error("density must be strictly positive and finite at every node")]
    BadDensity,
    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("kernel has a negative value at node {0}")]
    NegativeKernel(usize),
    #[error("kernel mass is {0}, expected 1")]
    KernelNotNormalized(f64),
}

/// Uniform periodic grid on `[0, L_0) x [0, L_1)` with a positive density γ.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGrid {
    dim: usize,
    points: [usize; 2],
    circumference: [f64; 2],
    spacing: [f64; 2],
    gamma: Vec<f64>,
}

impl PeriodicGrid {
    /// Grid with `points[axis]` nodes per axis, circumference 2π and γ ≡ 1.
    pub fn new(points: &[usize]) -> Result<Arc<Self>, GridError> {
        let circ = vec![2.0 * PI; points.len()];
        Self::with_circumference(points, &circ)
    }

    pub fn new_1d(n: usize) -> Arc<Self> {
        Self::new(&[n]).expect("invalid 1d grid")
    }

    pub fn new_2d(nx: usize, ny: usize) -> Arc<Self> {
        Self::new(&[nx, ny]).expect("invalid 2d grid")
    }

    pub fn with_circumference(points: &[usize], circumference: &[f64]) -> Result<Arc<Self>, GridError> {
        let dim = points.len();
        if dim == 0 || dim > 2 {
            return Err(GridError::BadDimension(dim));
        }
        if circumference.len() != dim {
            return Err(GridError::LengthMismatch { expected: dim, got: circumference.len() });
        }
        let mut p = [1usize; 2];
        let mut c = [1.0f64; 2];
        let mut h = [1.0f64; 2];
        for axis in 0..dim {
            if points[axis] < 8 {
                return Err(GridError::TooFewPoints(points[axis]));
            }
            if !(circumference[axis].is_finite() && circumference[axis] > 0.0) {
                return Err(GridError::BadCircumference(circumference[axis]));
            }
            p[axis] = points[axis];
            c[axis] = circumference[axis];
            h[axis] = circumference[axis] / points[axis] as f64;
        }
        let len = p[0] * p[1];
        Ok(Arc::new(Self { dim, points: p, circumference: c, spacing: h, gamma: vec![1.0; len] }))
    }

    /// Replace γ by `density(x)` sampled at the nodes.
    pub fn with_density<F: Fn(Position) -> f64>(&self, density: F) -> Result<Arc<Self>, GridError> {
        let gamma: Vec<f64> = (0..self.len()).map(|i| density(self.position(i))).collect();
        if gamma.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(GridError::BadDensity);
        }
        Ok(Arc::new(Self { gamma, ..self.clone() }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.points[0] * self.points[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self, axis: usize) -> usize {
        self.points[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing[a]).fold(f64::INFINITY, f64::min)
    }

    pub fn circumference(&self, axis: usize) -> f64 {
        self.circumference[axis]
    }

    /// Lebesgue volume of one cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing[a]).product()
    }

    /// Node values of γ.
    pub fn density(&self) -> &[f64] {
        &self.gamma
    }

    pub fn has_unit_density(&self) -> bool {
        self.gamma.iter().all(|&g| g == 1.0)
    }

    pub fn check_axis(&self, axis: usize) -> Result<(), GridError> {
        if axis < self.dim {
            Ok(())
        } else {
            Err(GridError::AxisOutOfRange { axis, dim: self.dim })
        }
    }

    /// Multi-index of a flat node index.
    pub fn index_of(&self, idx: usize) -> [usize; 2] {
        [idx % self.points[0], idx / self.points[0]]
    }

    pub fn flat_index(&self, ij: [usize; 2]) -> usize {
        ij[0] + self.points[0] * ij[1]
    }

    pub fn position(&self, idx: usize) -> Position {
        let ij = self.index_of(idx);
        let mut x = [0.0; 2];
        for axis in 0..self.dim {
            x[axis] = ij[axis] as f64 * self.spacing[axis];
        }
        x
    }

    /// Midpoint between node `idx` and its `+1` neighbour along `axis`.
    pub fn face_position(&self, idx: usize, axis: usize) -> Position {
        let mut x = self.position(idx);
        x[axis] += 0.5 * self.spacing[axis];
        x
    }

    /// Periodic neighbour of `idx` shifted by `offset` nodes along `axis`.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let n = self.points[axis] as isize;
        let mut ij = self.index_of(idx);
        ij[axis] = (ij[axis] as isize + offset).rem_euclid(n) as usize;
        self.flat_index(ij)
    }

    /// Displacement of node `idx` from the origin, wrapped into `(-L/2, L/2]`.
    pub fn wrapped_offset(&self, idx: usize) -> Position {
        let ij = self.index_of(idx);
        let mut y = [0.0; 2];
        for axis in 0..self.dim {
            let n = self.points[axis] as isize;
            let mut k = ij[axis] as isize;
            if k > n / 2 {
                k -= n;
            }
            y[axis] = k as f64 * self.spacing[axis];
        }
        y
    }

    /// γ averaged onto the faces `i + 1/2` along `axis`.
    pub fn face_density(&self, axis: usize) -> Vec<f64> {
        (0..self.len())
            .map(|i| 0.5 * (self.gamma[i] + self.gamma[self.neighbor(i, axis, 1)]))
            .collect()
    }
}

/// Real values sampled at every node of a [`PeriodicGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<PeriodicGrid>,
    values: Vec<f64>,
    time: Option<f64>,
}

impl GridFunction {
    pub fn from_values(grid: &Arc<PeriodicGrid>, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self { grid: Arc::clone(grid), values, time: None })
    }

    /// Sample `f` at every node. Panics if `f` produces a non-finite value.
    pub fn from_fn<F: Fn(Position) -> f64>(grid: &Arc<PeriodicGrid>, f: F) -> Self {
        let values = (0..grid.len()).map(|i| grid.position(i)).map(f).collect();
        Self::from_values(grid, values).expect("sampled function is not finite")
    }

    pub fn zeros(grid: &Arc<PeriodicGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<PeriodicGrid>, c: f64) -> Self {
        Self { grid: Arc::clone(grid), values: vec![c; grid.len()], time: None }
    }

    /// Skips the finiteness check; callers inside the crate guarantee it or
    /// detect blow-up themselves.
    pub(crate) fn from_raw(grid: &Arc<PeriodicGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid: Arc::clone(grid), values, time: None }
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self { grid: Arc::clone(&self.grid), values: self.values.iter().map(|&v| f(v)).collect(), time: self.time }
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Self, f: F) -> Self {
        assert!(same_grid(&self.grid, &other.grid), "grid mismatch");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: Arc::clone(&self.grid), values, time: self.time }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: Self) -> GridFunction {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: Self) -> GridFunction {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Add for GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: Self) -> GridFunction {
        &self + &rhs
    }
}

impl Sub for GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: Self) -> GridFunction {
        &self - &rhs
    }
}

impl Mul<f64> for &GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: f64) -> GridFunction {
        self.scale(rhs)
    }
}

impl Neg for &GridFunction {
    type Output = GridFunction;
    fn neg(self) -> GridFunction {
        self.scale(-1.0)
    }
}

pub(crate) fn same_grid(a: &Arc<PeriodicGrid>, b: &Arc<PeriodicGrid>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffScheme {
    Centered2,
    Forward1,
    Backward1,
}

/// Finite-difference derivative along `axis` with periodic wraparound.
pub fn diff(f: &GridFunction, axis: usize, scheme: DiffScheme) -> Result<GridFunction, GridError> {
    let grid = f.grid();
    grid.check_axis(axis)?;
    let h = grid.spacing(axis);
    let v = f.values();
    let out = (0..grid.len())
        .map(|i| {
            let p = v[grid.neighbor(i, axis, 1)];
            let m = v[grid.neighbor(i, axis, -1)];
            match scheme {
                DiffScheme::Centered2 => (p - m) / (2.0 * h),
                DiffScheme::Forward1 => (p - v[i]) / h,
                DiffScheme::Backward1 => (v[i] - m) / h,
            }
        })
        .collect();
    Ok(GridFunction { grid: Arc::clone(grid), values: out, time: f.time })
}

/// `∫_X f dν` with `dν = γ dx`, by the node-sum rule.
pub fn integrate(f: &GridFunction) -> f64 {
    let g = f.grid();
    f.values().iter().zip(g.density()).map(|(v, w)| v * w).sum::<f64>() * g.cell_volume()
}

/// `∫_X f dx` (unit density), by the node-sum rule.
pub fn integrate_lebesgue(f: &GridFunction) -> f64 {
    f.values().iter().sum::<f64>() * f.grid().cell_volume()
}

/// Periodic convolution `(f * K)(x_i) = Σ_j f(x_i - y_j) K(y_j) dx`.
///
/// The kernel is indexed from the origin node: `kernel[0]` is `K(0)`.
pub fn convolve_periodic(f: &GridFunction, kernel: &GridFunction) -> Result<GridFunction, GridError> {
    if !same_grid(f.grid(), kernel.grid()) {
        return Err(GridError::GridMismatch);
    }
    if let Some(i) = kernel.values().iter().position(|&k| k < 0.0) {
        return Err(GridError::NegativeKernel(i));
    }
    let mass = integrate_lebesgue(kernel);
    if (mass - 1.0).abs() > 1e-12 {
        return Err(GridError::KernelNotNormalized(mass));
    }
    Ok(convolve_signed(f, kernel))
}

/// Convolution without the approximate-identity checks; used for
/// derivative kernels, which have zero mass and change sign.
pub(crate) fn convolve_signed(f: &GridFunction, kernel: &GridFunction) -> GridFunction {
    let grid = f.grid();
    let dv = grid.cell_volume();
    let support: Vec<(usize, f64)> = kernel
        .values()
        .iter()
        .enumerate()
        .filter(|(_, k)| **k != 0.0)
        .map(|(j, k)| (j, k * dv))
        .collect();
    let n0 = grid.points(0) as isize;
    let n1 = grid.points(1) as isize;
    let v = f.values();
    let out = (0..grid.len())
        .map(|i| {
            let ij = grid.index_of(i);
            support
                .iter()
                .map(|&(j, w)| {
                    let jj = grid.index_of(j);
                    let a = (ij[0] as isize - jj[0] as isize).rem_euclid(n0) as usize;
                    let b = (ij[1] as isize - jj[1] as isize).rem_euclid(n1) as usize;
                    v[grid.flat_index([a, b])] * w
                })
                .sum()
        })
        .collect();
    GridFunction { grid: Arc::clone(grid), values: out, time: f.time }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_small_or_bad_grids() {
        assert_eq!(PeriodicGrid::new(&[4]).unwrap_err(), GridError::TooFewPoints(4));
        assert_eq!(PeriodicGrid::new(&[8, 8, 8]).unwrap_err(), GridError::BadDimension(3));
        let g = PeriodicGrid::new_1d(16);
        assert_eq!(g.with_density(|x| x[0] - 1.0).unwrap_err(), GridError::BadDensity);
    }

    #[test]
    fn spacing_is_circumference_over_points() {
        let g = PeriodicGrid::with_circumference(&[10, 20], &[1.0, 4.0]).unwrap();
        assert_eq!(g.spacing(0), 0.1);
        assert_eq!(g.spacing(1), 0.2);
        assert_eq!(g.len(), 200);
        assert!((g.cell_volume() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn centered_derivative_of_sine() {
        for n in [32usize, 64, 128] {
            let g = PeriodicGrid::new_1d(n);
            let f = GridFunction::from_fn(&g, |x| x[0].sin());
            let d = diff(&f, 0, DiffScheme::Centered2).unwrap();
            let h = g.spacing(0);
            let err = (0..n).map(|i| (d.values()[i] - g.position(i)[0].cos()).abs()).fold(0.0, f64::max);
            assert!(err <= h * h / 6.0 + 1e-14, "n={n} err={err}");
        }
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let g = PeriodicGrid::new_2d(16, 12);
        let f = GridFunction::constant(&g, 3.7);
        for axis in 0..2 {
            for s in [DiffScheme::Centered2, DiffScheme::Forward1, DiffScheme::Backward1] {
                assert!(diff(&f, axis, s).unwrap().values().iter().all(|&v| v == 0.0));
            }
        }
        assert_eq!(diff(&f, 2, DiffScheme::Centered2).unwrap_err(), GridError::AxisOutOfRange { axis: 2, dim: 2 });
    }

    #[test]
    fn one_sided_slopes_at_kink_of_abs_sine() {
        // |sin x| has a kink at x = π; left slope -1, right slope +1.
        let n = 256;
        let g = PeriodicGrid::new_1d(n);
        let h = g.spacing(0);
        let f = GridFunction::from_fn(&g, |x| x[0].sin().abs());
        let below = n / 2 - 1;
        let fwd = diff(&f, 0, DiffScheme::Forward1).unwrap().values()[below];
        let bwd = diff(&f, 0, DiffScheme::Backward1).unwrap().values()[below];
        // hand-evaluated difference quotients
        let x = below as f64 * h;
        assert!((fwd - (0.0 - x.sin()) / h).abs() < 1e-12);
        assert!((fwd + 1.0).abs() < 1e-3);
        assert!((bwd + 1.0).abs() < 1e-3);
        let at_kink = diff(&f, 0, DiffScheme::Centered2).unwrap().values()[n / 2];
        assert!(at_kink.abs() < 1e-12);
    }

    #[test]
    fn quadrature_examples() {
        let g = PeriodicGrid::new_1d(64);
        assert!((integrate(&GridFunction::constant(&g, 1.0)) - 2.0 * PI).abs() < 1e-13);
        let s2 = GridFunction::from_fn(&g, |x| x[0].sin().powi(2));
        assert!((integrate(&s2) - PI).abs() < 1e-12);

        let coarse = integrate(&GridFunction::from_fn(&g, |x| x[0].sin().exp()));
        let fine_grid = PeriodicGrid::new_1d(4096);
        let fine = integrate(&GridFunction::from_fn(&fine_grid, |x| x[0].sin().exp()));
        assert!((coarse - fine).abs() < 1e-10);
    }

    #[test]
    fn weighted_quadrature_uses_density() {
        let g = PeriodicGrid::new_1d(64).with_density(|x| 2.0 + x[0].cos()).unwrap();
        let one = GridFunction::constant(&g, 1.0);
        assert!((integrate(&one) - 4.0 * PI).abs() < 1e-12);
        assert!((integrate_lebesgue(&one) - 2.0 * PI).abs() < 1e-12);
    }

    fn delta_kernel(g: &Arc<PeriodicGrid>) -> GridFunction {
        let mut v = vec![0.0; g.len()];
        v[0] = 1.0 / g.cell_volume();
        GridFunction::from_values(g, v).unwrap()
    }

    fn gaussian_kernel(g: &Arc<PeriodicGrid>, width: f64) -> GridFunction {
        let raw: Vec<f64> =
            (0..g.len()).map(|i| (-(g.wrapped_offset(i)[0] / width).powi(2)).exp()).collect();
        let mass: f64 = raw.iter().sum::<f64>() * g.cell_volume();
        GridFunction::from_values(g, raw.iter().map(|v| v / mass).collect()).unwrap()
    }

    #[test]
    fn convolution_identities() {
        let g = PeriodicGrid::new_1d(64);
        let k = gaussian_kernel(&g, 0.3);
        let c = GridFunction::constant(&g, 2.5);
        let out = convolve_periodic(&c, &k).unwrap();
        assert!(out.values().iter().all(|v| (v - 2.5).abs() < 1e-13));

        let f = GridFunction::from_fn(&g, |x| (3.0 * x[0]).sin() + x[0].cos());
        let same = convolve_periodic(&f, &delta_kernel(&g)).unwrap();
        for (a, b) in same.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn convolution_rejects_bad_kernels() {
        let g = PeriodicGrid::new_1d(16);
        let f = GridFunction::constant(&g, 1.0);
        let half = GridFunction::constant(&g, 0.5 / (2.0 * PI));
        assert!(matches!(convolve_periodic(&f, &half), Err(GridError::KernelNotNormalized(_))));
        let mut v = delta_kernel(&g).into_values();
        v[3] = -1.0;
        let bad = GridFunction::from_values(&g, v).unwrap();
        assert_eq!(convolve_periodic(&f, &bad).unwrap_err(), GridError::NegativeKernel(3));
    }

    #[test]
    fn smoothed_step_matches_direct_summation() {
        let n = 128;
        let g = PeriodicGrid::new_1d(n);
        let step = GridFunction::from_fn(&g, |x| if x[0] < PI { 1.0 } else { 0.0 });
        let k = gaussian_kernel(&g, 0.2);
        let out = convolve_periodic(&step, &k).unwrap();

        // direct O(N^2) oracle
        let h = g.spacing(0);
        let oracle: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| step.values()[(i + n - j) % n] * k.values()[j] * h).sum())
            .collect();
        let l2_gap: f64 = out.values().iter().zip(&oracle).map(|(a, b)| (a - b).powi(2)).sum::<f64>() * h;
        assert!(l2_gap.sqrt() < 1e-13);

        // transition on [0, π] rises monotonically through the first half
        let v = out.values();
        for i in n / 4..n / 2 {
            assert!(v[i + 1] <= v[i] + 1e-15);
        }
        assert!((integrate(&out) - integrate(&step)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn discrete_divergence_theorem(coeffs in proptest::collection::vec(-1.0f64..1.0, 6)) {
            let g = PeriodicGrid::new_1d(48);
            let f = GridFunction::from_fn(&g, |x| {
                coeffs.iter().enumerate().map(|(k, c)| c * ((k as f64 + 1.0) * x[0] + k as f64).sin()).sum::<f64>()
                    + (x[0].cos()).exp()
            });
            let d = diff(&f, 0, DiffScheme::Centered2).unwrap();
            prop_assert!(integrate(&d).abs() < 1e-12);
        }

        #[test]
        fn convolution_commutes_with_centered_diff(vals in proptest::collection::vec(-1.0f64..1.0, 32), width in 0.1f64..0.8) {
            let g = PeriodicGrid::new_1d(32);
            let f = GridFunction::from_values(&g, vals).unwrap();
            let k = gaussian_kernel(&g, width);
            let a = diff(&convolve_periodic(&f, &k).unwrap(), 0, DiffScheme::Centered2).unwrap();
            let b = convolve_periodic(&diff(&f, 0, DiffScheme::Centered2).unwrap(), &k).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn convolution_preserves_mean(vals in proptest::collection::vec(-5.0f64..5.0, 32), width in 0.1f64..1.0) {
            let g = PeriodicGrid::new_1d(32);
            let f = GridFunction::from_values(&g, vals).unwrap();
            let k = gaussian_kernel(&g, width);
            let out = convolve_periodic(&f, &k).unwrap();
            prop_assert!((integrate_lebesgue(&out) - integrate_lebesgue(&f)).abs() < 1e-11);
        }
    }

    #[test]
    fn quadrature_converges_for_smooth_integrand() {
        // non-periodic-smooth integrand |sin x|^3 has a limited-order rule
        let exact = 8.0 / 3.0;
        let errs: Vec<f64> = [32usize, 64, 128]
            .iter()
            .map(|&n| {
                let g = PeriodicGrid::new_1d(n);
                (integrate(&GridFunction::from_fn(&g, |x| x[0].sin().abs().powi(3))) - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 2.0 - 0.1, "{errs:?}");
        }
    }

    #[test]
    fn two_dimensional_indexing_round_trips() {
        let g = PeriodicGrid::new_2d(8, 10);
        for i in 0..g.len() {
            assert_eq!(g.flat_index(g.index_of(i)), i);
            assert_eq!(g.neighbor(g.neighbor(i, 1, 3), 1, -3), i);
        }
        assert_eq!(g.neighbor(7, 0, 1), 0);
    }
}
