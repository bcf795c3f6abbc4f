//! Lipschitz graphs `Σ = {(φ(x), x)}`: eikonal residuals, causal type,
//! the `dν⁰` density, the foliation `Σ_t` and the flattening `s = t − φ(x)`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

use crate::fields::{interpolate_periodic, Coefficient, FirstOrderOperator, MetricField};
use crate::grid::{GridError, GridFunction, PeriodicGrid};

/// Default classification tolerance on the eikonal residual.
pub const DEFAULT_TOL: f64 = 1e-6;

/// RK4 sub-steps per grid cell for the eikonal ODE.
const EIKONAL_SUBSTEPS: usize = 8;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("surface is timelike for this metric")]
    Timelike,
    #[error("lambda must lie in (0, 1), got {0}")]
    LambdaOutOfRange(f64),
    #[error("flattened coefficient a = {a} is not positive at node {node}")]
    NonPositiveA { node: usize, a: f64 },
    #[error("unknown surface {0:?}")]
    UnknownSurface(String),
    #[error("{0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Spacelike,
    Null,
    WeaklySpacelike,
    TimelikeInvalid,
}

#[derive(Debug, Clone)]
pub struct CharacteristicSurface {
    phi: GridFunction,
    grad_phi: Vec<GridFunction>,
    /// `[backward, forward][axis][node]` one-sided slopes.
    one_sided: [Vec<Vec<f64>>; 2],
    kink_mask: Vec<bool>,
    lipschitz_bound: f64,
    metric: MetricField,
    tol: f64,
    residual: GridFunction,
    classification: Classification,
}

impl CharacteristicSurface {
    /// Surface from node values only: centred gradients, finite-difference
    /// one-sided slopes.
    pub fn from_phi(phi: GridFunction, metric: &MetricField, tol: f64) -> Self {
        let grid = Arc::clone(phi.grid());
        let (bwd, fwd) = fd_one_sided(&phi);
        let grad = (0..grid.dim())
            .map(|a| GridFunction::from_raw(&grid, bwd[a].iter().zip(&fwd[a]).map(|(b, f)| 0.5 * (b + f)).collect()))
            .collect();
        Self::assemble(phi, grad, [bwd, fwd], vec![false; grid.len()], metric, tol)
    }

    fn assemble(
        phi: GridFunction,
        grad_phi: Vec<GridFunction>,
        one_sided: [Vec<Vec<f64>>; 2],
        extra_kinks: Vec<bool>,
        metric: &MetricField,
        tol: f64,
    ) -> Self {
        let grid = Arc::clone(phi.grid());
        let (bwd, fwd) = fd_one_sided(&phi);
        let mut kink_mask = extra_kinks;
        let mut lip: f64 = 0.0;
        for axis in 0..grid.dim() {
            let thresh = grid.spacing(axis).sqrt();
            for i in 0..grid.len() {
                if (fwd[axis][i] - bwd[axis][i]).abs() > thresh {
                    kink_mask[i] = true;
                }
                lip = lip.max(fwd[axis][i].abs());
            }
        }
        let mut s = Self {
            residual: GridFunction::zeros(&grid),
            phi,
            grad_phi,
            one_sided,
            kink_mask,
            lipschitz_bound: lip,
            metric: metric.clone(),
            tol,
            classification: Classification::TimelikeInvalid,
        };
        s.residual = eikonal_residual(&s, metric);
        s.classification = classify_residual(&s.residual, &s.kink_mask, tol);
        s
    }

    /// Constant surface `φ ≡ value`.
    pub fn slice(grid: &Arc<PeriodicGrid>, value: f64, metric: &MetricField) -> Self {
        Self::from_phi(GridFunction::constant(grid, value), metric, DEFAULT_TOL)
    }

    /// Light cone from the vertex at the origin node.
    ///
    /// Flat metrics use the periodic distance. Otherwise (1d only) the two
    /// branches solve `φ' = ±1/√g^{11}(φ, x)` outward from the vertex and
    /// `φ` is their minimum.
    pub fn cone(grid: &Arc<PeriodicGrid>, metric: &MetricField) -> Result<Self, SurfaceError> {
        if metric.is_flat() {
            return Ok(flat_cone(grid, metric));
        }
        if grid.dim() != 1 {
            return Err(SurfaceError::Unsupported("curved cones are only built in one dimension"));
        }
        Ok(eikonal_cone(grid, metric))
    }

    /// Cone capped at half its height: null on the slopes, spacelike on top.
    pub fn flatcone(grid: &Arc<PeriodicGrid>, metric: &MetricField) -> Result<Self, SurfaceError> {
        let cone = Self::cone(grid, metric)?;
        let cap = if metric.is_flat() { PI / 2.0 } else { 0.5 * cone.phi.max() };
        let phi = cone.phi.map(|v| v.min(cap));
        let capped: Vec<bool> = cone.phi.values().iter().map(|&v| v >= cap).collect();
        let (bwd_fd, fwd_fd) = fd_one_sided(&phi);
        let n = grid.len();
        let mut grad = Vec::new();
        let mut bwd = Vec::new();
        let mut fwd = Vec::new();
        for axis in 0..grid.dim() {
            let mut g = cone.grad_phi[axis].values().to_vec();
            let mut b = cone.one_sided[0][axis].clone();
            let mut f = cone.one_sided[1][axis].clone();
            for i in 0..n {
                let near_cap = capped[i] || capped[grid.neighbor(i, axis, 1)] || capped[grid.neighbor(i, axis, -1)];
                if near_cap {
                    b[i] = bwd_fd[axis][i];
                    f[i] = fwd_fd[axis][i];
                    g[i] = if capped[i] && capped[grid.neighbor(i, axis, 1)] && capped[grid.neighbor(i, axis, -1)] {
                        0.0
                    } else {
                        0.5 * (b[i] + f[i])
                    };
                }
            }
            grad.push(GridFunction::from_raw(grid, g));
            bwd.push(b);
            fwd.push(f);
        }
        Ok(Self::assemble(phi, grad, [bwd, fwd], cone.kink_mask.clone(), metric, cone.tol))
    }

    /// `φ = ½ sin x` (first axis).
    pub fn halfsine(grid: &Arc<PeriodicGrid>, metric: &MetricField) -> Self {
        Self::from_phi(GridFunction::from_fn(grid, |x| 0.5 * x[0].sin()), metric, DEFAULT_TOL)
    }

    /// Named catalog surfaces: `cone`, `flatcone`, `slice`, `halfsine`.
    pub fn by_name(name: &str, grid: &Arc<PeriodicGrid>, metric: &MetricField) -> Result<Self, SurfaceError> {
        match name {
            "cone" => Self::cone(grid, metric),
            "flatcone" => Self::flatcone(grid, metric),
            "slice" => Ok(Self::slice(grid, 0.0, metric)),
            "halfsine" => Ok(Self::halfsine(grid, metric)),
            other => Err(SurfaceError::UnknownSurface(other.to_string())),
        }
    }

    pub fn names() -> &'static [&'static str] {
        &["cone", "flatcone", "slice", "halfsine"]
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        self.phi.grid()
    }

    pub fn phi(&self) -> &GridFunction {
        &self.phi
    }

    pub fn grad_phi(&self, axis: usize) -> &GridFunction {
        &self.grad_phi[axis]
    }

    pub fn kink_mask(&self) -> &[bool] {
        &self.kink_mask
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn classification(&self) -> Classification {
        self.classification
    }

    /// Residual against the metric the surface was built with.
    pub fn residual(&self) -> &GridFunction {
        &self.residual
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn phi_range(&self) -> (f64, f64) {
        (self.phi.min(), self.phi.max())
    }

    /// Gradient at node `i` as a covector.
    pub fn grad_at(&self, i: usize) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (axis, gf) in self.grad_phi.iter().enumerate() {
            g[axis] = gf.values()[i];
        }
        g
    }

    /// CSV rows `x, phi, residual, kink_flag` (first coordinate only in 2d: `x, y, ...`).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let grid = self.grid();
        writeln!(w, "# goursat-lab surface v1")?;
        if grid.dim() == 1 {
            writeln!(w, "x,phi,residual,kink_flag")?;
        } else {
            writeln!(w, "x,y,phi,residual,kink_flag")?;
        }
        for i in 0..grid.len() {
            let p = grid.position(i);
            if grid.dim() == 2 {
                write!(w, "{},", p[1])?;
            }
            writeln!(w, "{},{},{},{}", p[0], self.phi.values()[i], self.residual.values()[i], u8::from(self.kink_mask[i]))?;
        }
        Ok(())
    }
}

fn fd_one_sided(phi: &GridFunction) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let g = phi.grid();
    let v = phi.values();
    let mut bwd = Vec::new();
    let mut fwd = Vec::new();
    for axis in 0..g.dim() {
        let h = g.spacing(axis);
        bwd.push((0..g.len()).map(|i| (v[i] - v[g.neighbor(i, axis, -1)]) / h).collect());
        fwd.push((0..g.len()).map(|i| (v[g.neighbor(i, axis, 1)] - v[i]) / h).collect());
    }
    (bwd, fwd)
}

fn flat_cone(grid: &Arc<PeriodicGrid>, metric: &MetricField) -> CharacteristicSurface {
    let n = grid.len();
    let offsets: Vec<[f64; 2]> = (0..n).map(|i| grid.wrapped_offset(i)).collect();
    let phi = GridFunction::from_raw(grid, offsets.iter().map(|y| (y[0] * y[0] + y[1] * y[1]).sqrt()).collect());
    if grid.dim() == 1 {
        // finite differences of |x| are exact away from the two kinks
        return CharacteristicSurface::from_phi(phi, metric, DEFAULT_TOL);
    }
    let one_sided = {
        let (b, f) = fd_one_sided(&phi);
        [b, f]
    };
    let grad = (0..grid.dim())
        .map(|axis| {
            let g = (0..n)
                .map(|i| {
                    let r = phi.values()[i];
                    if r == 0.0 {
                        0.0
                    } else {
                        offsets[i][axis] / r
                    }
                })
                .collect();
            GridFunction::from_raw(grid, g)
        })
        .collect();
    CharacteristicSurface::assemble(phi, grad, one_sided, vec![false; n], metric, DEFAULT_TOL)
}

fn eikonal_cone(grid: &Arc<PeriodicGrid>, metric: &MetricField) -> CharacteristicSurface {
    let n = grid.len();
    let h = grid.spacing(0);
    let len = grid.circumference(0);
    let g11 = |t: f64, x: f64| metric.eval(t, [x, 0.0])[0][0];
    let rhs = |phi: f64, x: f64| 1.0 / g11(phi, x).sqrt();

    // Branch values at half-cell resolution: index 2i is node i, 2i+1 the midpoint.
    let march = |dir: f64| -> Vec<f64> {
        let m = EIKONAL_SUBSTEPS;
        let d = 0.5 * h / (m / 2) as f64;
        let mut out = vec![0.0; 2 * n + 1];
        let mut phi = 0.0;
        let mut xi = 0.0;
        let x_of = |xi: f64| if dir > 0.0 { xi } else { len - xi };
        for k in 0..2 * n {
            for _ in 0..m / 2 {
                let k1 = rhs(phi, x_of(xi));
                let k2 = rhs(phi + 0.5 * d * k1, x_of(xi + 0.5 * d));
                let k3 = rhs(phi + 0.5 * d * k2, x_of(xi + 0.5 * d));
                let k4 = rhs(phi + d * k3, x_of(xi + d));
                phi += d / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                xi += d;
            }
            out[k + 1] = phi;
        }
        out
    };
    let right = march(1.0);
    let left_rev = march(-1.0);
    // left branch indexed by position along x
    let left: Vec<f64> = (0..=2 * n).map(|k| left_rev[2 * n - k]).collect();

    let phi_vals: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { right[2 * i].min(left[2 * i]) }).collect();
    // sign of the active branch on cell (i, i+1)
    let cell_sign: Vec<f64> = (0..n).map(|i| if right[2 * i + 1] <= left[2 * i + 1] { 1.0 } else { -1.0 }).collect();
    let mut bwd = vec![0.0; n];
    let mut fwd = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut kinks = vec![false; n];
    for i in 0..n {
        let x = grid.position(i)[0];
        let speed = rhs(phi_vals[i], x);
        let sb = cell_sign[(i + n - 1) % n];
        let sf = cell_sign[i];
        bwd[i] = sb * speed;
        fwd[i] = sf * speed;
        grad[i] = 0.5 * (bwd[i] + fwd[i]);
        kinks[i] = sb != sf;
    }
    let phi = GridFunction::from_raw(grid, phi_vals);
    CharacteristicSurface::assemble(phi, vec![GridFunction::from_raw(grid, grad)], [vec![bwd], vec![fwd]], kinks, metric, DEFAULT_TOL)
}

/// `g^{αβ}(φ(x), x) ∂_αφ ∂_βφ − 1` per node.
///
/// Kink nodes carry the one-sided combination of smallest magnitude.
pub fn eikonal_residual(surface: &CharacteristicSurface, metric: &MetricField) -> GridFunction {
    let grid = surface.grid();
    let dim = grid.dim();
    let vals = (0..grid.len())
        .map(|i| {
            let x = grid.position(i);
            let t = surface.phi.values()[i];
            if !surface.kink_mask[i] {
                return metric.quadratic(t, x, surface.grad_at(i)) - 1.0;
            }
            let mut best = f64::INFINITY;
            for combo in 0..(1usize << dim) {
                let mut xi = [0.0; 2];
                for (axis, slot) in xi.iter_mut().enumerate().take(dim) {
                    *slot = surface.one_sided[(combo >> axis) & 1][axis][i];
                }
                let r = metric.quadratic(t, x, xi) - 1.0;
                if r.abs() < best.abs() {
                    best = r;
                }
            }
            best
        })
        .collect();
    GridFunction::from_raw(grid, vals)
}

fn classify_residual(residual: &GridFunction, kinks: &[bool], tol: f64) -> Classification {
    let smooth = || residual.values().iter().zip(kinks).filter(|(_, &k)| !k).map(|(r, _)| *r);
    if smooth().all(|r| r.abs() <= tol) {
        Classification::Null
    } else if smooth().all(|r| r <= -tol) {
        Classification::Spacelike
    } else if smooth().all(|r| r <= tol) {
        Classification::WeaklySpacelike
    } else {
        Classification::TimelikeInvalid
    }
}

/// Causal type of `Σ` under `metric` with threshold `tol`.
pub fn classify(surface: &CharacteristicSurface, metric: &MetricField, tol: f64) -> Classification {
    classify_residual(&eikonal_residual(surface, metric), &surface.kink_mask, tol)
}

/// `1 − g^{αβ}∂_αφ∂_βφ` per node.
pub fn dnu0_density(surface: &CharacteristicSurface, metric: &MetricField) -> Result<GridFunction, SurfaceError> {
    if classify(surface, metric, surface.tol) == Classification::TimelikeInvalid {
        return Err(SurfaceError::Timelike);
    }
    Ok(eikonal_residual(surface, metric).map(|r| -r))
}

/// `Σ_t = {(t + φ(x), x)}`, reclassified with the metric at shifted times.
pub fn foliation_slice(surface: &CharacteristicSurface, t: f64) -> CharacteristicSurface {
    let mut s = surface.clone();
    if t == 0.0 {
        return s;
    }
    s.phi = surface.phi.map(|v| v + t);
    s.residual = eikonal_residual(&s, &s.metric);
    s.classification = classify_residual(&s.residual, &s.kink_mask, s.tol);
    s
}

/// The λ-slowed equation in coordinates `(s, x)`, `s = t − φ(x)`:
///
/// `a ∂ₛ²w − 2 B^β ∂ₛ∂_βw − λ γ⁻¹∂_α(γ g^{αβ} ∂_βw) + (lower order) = 0`,
/// with `a = 1 − λ g^{αβ}φ_αφ_β` and `B^β = λ g^{αβ}φ_α`, metric at `t = s + φ`.
#[derive(Debug, Clone)]
pub struct TransformedProblem {
    pub lambda: f64,
    /// `a` at nodes, `s = 0`.
    pub a: GridFunction,
    /// `B^β` on the faces of axis β, `s = 0`.
    pub cross: Vec<GridFunction>,
    /// Unscaled metric; the spatial operator is `λ` times its divergence form.
    pub spatial: MetricField,
    /// `L₁` rewritten in `(s, x)`.
    pub first_order: FirstOrderOperator,
    pub surface: CharacteristicSurface,
}

impl TransformedProblem {
    pub fn a_min(&self) -> f64 {
        self.a.min()
    }

    /// `(a, B)` at flattened time `s`.
    pub fn coefficients_at(&self, s: f64) -> (GridFunction, Vec<GridFunction>) {
        if s == 0.0 || !self.spatial.is_time_dependent() {
            return (self.a.clone(), self.cross.clone());
        }
        flattened_coefficients(&self.spatial, &self.surface, self.lambda, s)
    }

    /// Largest characteristic speed `(|B| + √(B² + a λ g))/a` over nodes.
    pub fn max_speed(&self, s: f64) -> f64 {
        let (a, cross) = self.coefficients_at(s);
        let grid = self.surface.grid();
        let mut best: f64 = 0.0;
        for i in 0..grid.len() {
            let t = s + self.surface.phi.values()[i];
            let g = self.spatial.eval(t, grid.position(i));
            let c = self.lambda * crate::fields::sym_eigenvalues(&g, grid.dim())[1];
            let mut b2 = 0.0;
            for (axis, cr) in cross.iter().enumerate() {
                let bm = cr.values()[i].abs().max(cr.values()[grid.neighbor(i, axis, -1)].abs());
                b2 += bm * bm;
            }
            let b = b2.sqrt();
            let ai = a.values()[i];
            best = best.max((b + (b * b + ai * c).sqrt()) / ai);
        }
        best
    }
}

fn flattened_coefficients(metric: &MetricField, surface: &CharacteristicSurface, lambda: f64, s: f64) -> (GridFunction, Vec<GridFunction>) {
    let grid = surface.grid();
    let phi = surface.phi.values();
    let dim = grid.dim();
    let a = (0..grid.len())
        .map(|i| 1.0 - lambda * metric.quadratic(s + phi[i], grid.position(i), surface.grad_at(i)))
        .collect();
    let cross = (0..dim)
        .map(|beta| {
            let h = grid.spacing(beta);
            let vals = (0..grid.len())
                .map(|i| {
                    let ip = grid.neighbor(i, beta, 1);
                    let t = s + 0.5 * (phi[i] + phi[ip]);
                    let g = metric.eval(t, grid.face_position(i, beta));
                    let mut b = g[beta][beta] * (phi[ip] - phi[i]) / h;
                    for alpha in (0..dim).filter(|&a| a != beta) {
                        let da = 0.5 * (surface.grad_phi[alpha].values()[i] + surface.grad_phi[alpha].values()[ip]);
                        b += g[alpha][beta] * da;
                    }
                    lambda * b
                })
                .collect();
            GridFunction::from_raw(grid, vals)
        })
        .collect();
    (GridFunction::from_raw(grid, a), cross)
}

/// Change of variables `s = t − φ(x)` for the λ-slowed equation.
pub fn flatten(
    metric: &MetricField,
    op: &FirstOrderOperator,
    surface: &CharacteristicSurface,
    lambda: f64,
) -> Result<TransformedProblem, SurfaceError> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(SurfaceError::LambdaOutOfRange(lambda));
    }
    if classify(surface, metric, surface.tol) == Classification::TimelikeInvalid {
        return Err(SurfaceError::Timelike);
    }
    let (a, cross) = flattened_coefficients(metric, surface, lambda, 0.0);
    if let Some((node, &a_i)) = a.values().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(SurfaceError::NonPositiveA { node, a: a_i });
    }
    let first_order = flatten_operator(op, surface);
    Ok(TransformedProblem { lambda, a, cross, spatial: metric.clone(), first_order, surface: surface.clone() })
}

/// `L₁` in `(s, x)`: `b⁰ → b⁰ − b^α φ_α`, coefficients evaluated at `t = s + φ(x)`.
fn flatten_operator(op: &FirstOrderOperator, surface: &CharacteristicSurface) -> FirstOrderOperator {
    let grid = Arc::clone(surface.grid());
    let phi = Arc::new(surface.phi.values().to_vec());
    let grads: Arc<Vec<Vec<f64>>> = Arc::new(surface.grad_phi.iter().map(|g| g.values().to_vec()).collect());
    let shift = |c: &Coefficient| match c {
        Coefficient::Zero => Coefficient::Zero,
        Coefficient::Func(f) => {
            let f = Arc::clone(f);
            let grid = Arc::clone(&grid);
            let phi = Arc::clone(&phi);
            Coefficient::func(move |s, x| f(s + interpolate_periodic(&grid, &phi, x), x))
        }
    };
    let b0 = if op.b.iter().all(Coefficient::is_zero) {
        shift(&op.b0)
    } else {
        let b0 = op.b0.clone();
        let b = op.b.clone();
        let grid = Arc::clone(&grid);
        let phi = Arc::clone(&phi);
        let grads = Arc::clone(&grads);
        Coefficient::func(move |s, x| {
            let t = s + interpolate_periodic(&grid, &phi, x);
            let mut v = b0.eval(t, x);
            for (axis, ba) in b.iter().enumerate() {
                v -= ba.eval(t, x) * interpolate_periodic(&grid, &grads[axis], x);
            }
            v
        })
    };
    FirstOrderOperator {
        b0,
        b: op.b.iter().map(shift).collect(),
        c: shift(&op.c),
        regularity: op.regularity,
        time_dependent: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::catalog;
    use proptest::prelude::*;

    fn flat() -> MetricField {
        MetricField::flat(1)
    }

    #[test]
    fn flat_cone_is_null_with_kinks_at_vertex_and_antipode() {
        let g = PeriodicGrid::new_1d(64);
        let cone = CharacteristicSurface::cone(&g, &flat()).unwrap();
        for i in 0..g.len() {
            let x = g.position(i)[0];
            assert!((cone.phi().values()[i] - x.min(2.0 * PI - x)).abs() < 1e-12);
        }
        let kinks: Vec<usize> = (0..g.len()).filter(|&i| cone.kink_mask()[i]).collect();
        assert_eq!(kinks, vec![0, 32]);
        assert!(cone.residual().values().iter().all(|r| r.abs() < 1e-12));
        assert_eq!(cone.classification(), Classification::Null);
        let d = dnu0_density(&cone, &flat()).unwrap();
        assert!(d.max_abs() < 1e-12);
    }

    #[test]
    fn odd_grid_cone_has_antipode_between_nodes() {
        let g = PeriodicGrid::new_1d(63);
        let cone = CharacteristicSurface::cone(&g, &flat()).unwrap();
        assert_eq!(cone.classification(), Classification::Null);
        assert!(cone.kink_mask()[0]);
        assert!(cone.kink_mask().iter().filter(|&&k| k).count() <= 3);
    }

    #[test]
    fn halfsine_is_spacelike() {
        let g = PeriodicGrid::new_1d(256);
        let s = CharacteristicSurface::halfsine(&g, &flat());
        assert_eq!(s.classification(), Classification::Spacelike);
        let h = g.spacing(0);
        for i in 0..g.len() {
            let x = g.position(i)[0];
            let want = 0.25 * x.cos().powi(2) - 1.0;
            assert!((s.residual().values()[i] - want).abs() < h * h / 4.0);
            assert!(s.residual().values()[i] <= -0.75 + 1e-12);
        }
        let d = dnu0_density(&s, &flat()).unwrap();
        for i in 0..g.len() {
            let x = g.position(i)[0];
            assert!((d.values()[i] - (1.0 - 0.25 * x.cos().powi(2))).abs() < h * h / 4.0);
        }
    }

    #[test]
    fn slice_flatcone_and_sawtooth() {
        let g = PeriodicGrid::new_1d(128);
        let slice = CharacteristicSurface::slice(&g, 0.0, &flat());
        assert_eq!(slice.classification(), Classification::Spacelike);
        assert!(dnu0_density(&slice, &flat()).unwrap().values().iter().all(|&v| v == 1.0));

        let fc = CharacteristicSurface::flatcone(&g, &flat()).unwrap();
        assert_eq!(fc.classification(), Classification::WeaklySpacelike);
        // residual by hand per piece: 0 on the slopes, −1 on the cap
        for i in 0..g.len() {
            if fc.kink_mask()[i] {
                continue;
            }
            let x = g.position(i)[0];
            let dist = x.min(2.0 * PI - x);
            let want = if dist < PI / 2.0 { 0.0 } else { -1.0 };
            assert!((fc.residual().values()[i] - want).abs() < 1e-12, "node {i}");
        }

        let saw = CharacteristicSurface::from_phi(GridFunction::from_fn(&g, |x| 2.0 * x[0].min(2.0 * PI - x[0])), &flat(), DEFAULT_TOL);
        assert_eq!(saw.classification(), Classification::TimelikeInvalid);
        assert!(saw.residual().values().iter().zip(saw.kink_mask()).filter(|(_, &k)| !k).all(|(r, _)| (r - 3.0).abs() < 1e-12));
        assert!(matches!(dnu0_density(&saw, &flat()), Err(SurfaceError::Timelike)));
    }

    /// Independent oracle: `φ(x) = min(∫₀ˣ, ∫ₓ^{2π}) dy/√g(y)` for a
    /// time-independent metric, by composite Simpson.
    fn quadrature_cone(g: impl Fn(f64) -> f64, x: f64) -> f64 {
        let simpson = |a: f64, b: f64| {
            let m = 4000;
            let h = (b - a) / m as f64;
            let f = |y: f64| 1.0 / g(y).sqrt();
            let mut acc = f(a) + f(b);
            for k in 1..m {
                acc += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        simpson(0.0, x).min(simpson(x, 2.0 * PI))
    }

    #[test]
    fn eikonal_cone_matches_quadrature_and_fourth_order_residual() {
        let entry = catalog("smooth1d").unwrap();
        let g = PeriodicGrid::new_1d(256);
        let cone = CharacteristicSurface::cone(&g, &entry.metric).unwrap();
        assert_eq!(cone.classification(), Classification::Null);
        let gfun = |y: f64| 1.0 + 0.5 * y.sin().powi(2);
        for i in 0..g.len() {
            let x = g.position(i)[0];
            assert!((cone.phi().values()[i] - quadrature_cone(gfun, x)).abs() < 1e-9, "node {i}");
        }
        // residual from a 4th-order stencil, away from kinks
        let v = cone.phi().values();
        let h = g.spacing(0);
        let n = g.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            if (0..5).any(|k| cone.kink_mask()[(i + n + k - 2) % n]) {
                continue;
            }
            let d = (-v[(i + 2) % n] + 8.0 * v[(i + 1) % n] - 8.0 * v[(i + n - 1) % n] + v[(i + n - 2) % n]) / (12.0 * h);
            worst = worst.max((gfun(g.position(i)[0]) * d * d - 1.0).abs());
        }
        assert!(worst < 1e-6, "{worst}");
        assert!(dnu0_density(&cone, &entry.metric).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn foliation_examples() {
        let g = PeriodicGrid::new_1d(128);
        let cone = CharacteristicSurface::cone(&g, &flat()).unwrap();
        let same = foliation_slice(&cone, 0.0);
        assert_eq!(same.phi(), cone.phi());
        for t in [-2.0, 0.7, 5.0] {
            let s = foliation_slice(&cone, t);
            assert_eq!(s.classification(), Classification::Null);
            assert!((s.phi().values()[3] - cone.phi().values()[3] - t).abs() < 1e-12);
        }

        let eps = 0.1;
        let m = crate::fields::c1_metric(eps, (-1.0, 5.0));
        let cone = CharacteristicSurface::cone(&g, &m).unwrap();
        assert!(cone.residual().max_abs() < 1e-12);
        let shifted = foliation_slice(&cone, 0.5);
        let r = shifted.residual();
        assert!(r.max_abs() > 1e-4);
        // |Δg| ≤ ε t and |φ'|² ≤ 1/g_min
        let bound = eps * 0.5 / m.bounds().lower;
        assert!(r.max_abs() <= bound, "{} > {bound}", r.max_abs());
    }

    #[test]
    fn flatten_examples() {
        let g = PeriodicGrid::new_1d(128);
        let op = FirstOrderOperator::zero(1);
        let slice = CharacteristicSurface::slice(&g, 0.0, &flat());
        let tp = flatten(&flat(), &op, &slice, 0.5).unwrap();
        assert!(tp.a.values().iter().all(|&a| a == 1.0));
        assert!(tp.cross[0].values().iter().all(|&b| b == 0.0));

        let cone = CharacteristicSurface::cone(&g, &flat()).unwrap();
        let tp = flatten(&flat(), &op, &cone, 0.75).unwrap();
        for i in 0..g.len() {
            if !cone.kink_mask()[i] {
                assert!((tp.a.values()[i] - 0.25).abs() < 1e-12);
            }
        }

        let entry = catalog("smooth1d").unwrap();
        let hs = CharacteristicSurface::halfsine(&g, &entry.metric);
        let tp = flatten(&entry.metric, &entry.op, &hs, 0.9).unwrap();
        let a_exact = |x: f64| 1.0 - 0.9 * (1.0 + 0.5 * x.sin().powi(2)) * 0.25 * x.cos().powi(2);
        let dense_min = (0..100_000).map(|k| a_exact(2.0 * PI * k as f64 / 100_000.0)).fold(f64::INFINITY, f64::min);
        assert!((tp.a_min() - dense_min).abs() < 1e-3, "{} vs {dense_min}", tp.a_min());
        let h = g.spacing(0);
        for i in 0..g.len() {
            assert!((tp.a.values()[i] - a_exact(g.position(i)[0])).abs() < h * h);
        }

        assert!(matches!(flatten(&flat(), &op, &cone, 1.0), Err(SurfaceError::LambdaOutOfRange(_))));
        let saw = CharacteristicSurface::from_phi(GridFunction::from_fn(&g, |x| 2.0 * x[0].min(2.0 * PI - x[0])), &flat(), DEFAULT_TOL);
        assert!(matches!(flatten(&flat(), &op, &saw, 0.5), Err(SurfaceError::Timelike)));
    }

    #[test]
    fn flattened_first_order_operator() {
        let g = PeriodicGrid::new_1d(64);
        let op = FirstOrderOperator::zero(1).with_b0(Coefficient::constant(2.0)).with_b(0, Coefficient::constant(0.5));
        let hs = CharacteristicSurface::halfsine(&g, &flat());
        let tp = flatten(&flat(), &op, &hs, 0.5).unwrap();
        for i in 0..g.len() {
            let x = g.position(i);
            let want = 2.0 - 0.5 * hs.grad_phi(0).values()[i];
            assert!((tp.first_order.b0.eval(0.3, x) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dimensional_flat_cone() {
        let g = PeriodicGrid::new_2d(32, 32);
        let cone = CharacteristicSurface::cone(&g, &MetricField::flat(2)).unwrap();
        assert_eq!(cone.classification(), Classification::Null);
        assert!(cone.kink_mask()[0]);
        let kinked = cone.kink_mask().iter().filter(|&&k| k).count();
        assert!(kinked < g.len() / 4, "{kinked}");
    }

    proptest! {
        #[test]
        fn flatten_identity(lambda in 0.05f64..0.95, c in -3.0f64..3.0) {
            let g = PeriodicGrid::new_1d(48);
            let entry = catalog("smooth1d").unwrap();
            let hs = CharacteristicSurface::from_phi(GridFunction::from_fn(&g, |x| 0.4 * x[0].sin() + 0.1 * (2.0 * x[0]).cos() + c), &entry.metric, DEFAULT_TOL);
            let tp = flatten(&entry.metric, &entry.op, &hs, lambda).unwrap();
            for i in 0..g.len() {
                let q = entry.metric.quadratic(hs.phi().values()[i], g.position(i), hs.grad_at(i));
                prop_assert!((tp.a.values()[i] + lambda * q - 1.0).abs() < 1e-14);
            }
        }

        #[test]
        fn classification_ignores_constant_shift(c in -10.0f64..10.0) {
            let g = PeriodicGrid::new_1d(64);
            let entry = catalog("smooth1d").unwrap();
            for s in [CharacteristicSurface::halfsine(&g, &entry.metric), CharacteristicSurface::cone(&g, &entry.metric).unwrap()] {
                let shifted = CharacteristicSurface::from_phi(s.phi().map(|v| v + c), &entry.metric, DEFAULT_TOL);
                let base = CharacteristicSurface::from_phi(s.phi().clone(), &entry.metric, DEFAULT_TOL);
                prop_assert_eq!(shifted.classification(), base.classification());
            }
        }
    }

    #[test]
    fn kink_measure_shrinks() {
        let mut measures = vec![];
        for n in [64usize, 128, 256, 512] {
            let g = PeriodicGrid::new_1d(n);
            let fc = CharacteristicSurface::flatcone(&g, &flat()).unwrap();
            measures.push(fc.kink_mask().iter().filter(|&&k| k).count() as f64 * g.spacing(0));
        }
        for w in measures.windows(2) {
            assert!(w[1] < w[0]);
        }
    }
}
