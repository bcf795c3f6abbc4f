use std::sync::Arc;

use super::{Coefficient, EllipticityBounds, FieldError, FirstOrderOperator, MetricField, Regularity, ScalarFn};
use crate::grid::Position;

/// Manufactured solution: `u`, `∂ₜu` and the source `f = □u + L₁u`.
///
/// Sources assume unit density γ ≡ 1.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarFn,
    pub ut: ScalarFn,
    pub source: ScalarFn,
}

impl std::fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ExactSolution(..)")
    }
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub metric: MetricField,
    pub op: FirstOrderOperator,
    pub exact: Option<ExactSolution>,
}

impl CatalogEntry {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }
}

const NAMES: [&str; 5] = ["flat1d", "smooth1d", "lipschitz1d", "c1_1d", "flat2d"];

/// Default window for the time-independent entries.
const WIDE: (f64, f64) = (-100.0, 100.0);

pub fn catalog_names() -> &'static [&'static str] {
    &NAMES
}

pub fn catalog(name: &str) -> Result<CatalogEntry, FieldError> {
    match name {
        "flat1d" => Ok(flat1d()),
        "smooth1d" => Ok(smooth1d()),
        "lipschitz1d" => Ok(lipschitz1d()),
        "c1_1d" => Ok(c1_entry(0.1, (-1.0, 1.0))),
        "flat2d" => Ok(flat2d()),
        other => Err(FieldError::UnknownCatalog(other.to_string())),
    }
}

fn flat1d() -> CatalogEntry {
    CatalogEntry {
        name: "flat1d",
        metric: MetricField::flat(1).with_window(WIDE),
        op: FirstOrderOperator::zero(1),
        exact: Some(ExactSolution {
            u: Arc::new(|t, x| (x[0] - t).sin()),
            ut: Arc::new(|t, x| -(x[0] - t).cos()),
            source: Arc::new(|_, _| 0.0),
        }),
    }
}

fn flat2d() -> CatalogEntry {
    let c = std::f64::consts::SQRT_2;
    CatalogEntry {
        name: "flat2d",
        metric: MetricField::flat(2).with_window(WIDE),
        op: FirstOrderOperator::zero(2),
        exact: Some(ExactSolution {
            u: Arc::new(move |t, x| (x[0] + x[1] - c * t).sin()),
            ut: Arc::new(move |t, x| -c * (x[0] + x[1] - c * t).cos()),
            source: Arc::new(|_, _| 0.0),
        }),
    }
}

/// `u = cos t sin x` in 1d with `g^{11} = g(t,x)` and `∂ₓg = gx(t,x)`.
fn standing_wave<G, GX>(g: G, gx: GX, op: &FirstOrderOperator) -> ExactSolution
where
    G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    GX: Fn(f64, f64) -> f64 + Send + Sync + 'static,
{
    let op = op.clone();
    ExactSolution {
        u: Arc::new(|t, x| t.cos() * x[0].sin()),
        ut: Arc::new(|t, x| -t.sin() * x[0].sin()),
        source: Arc::new(move |t, p: Position| {
            let x = p[0];
            let (u, ut, ux) = (t.cos() * x.sin(), -t.sin() * x.sin(), t.cos() * x.cos());
            let utt = -u;
            // ∂ₓ(g ∂ₓu) = gx·ux + g·uxx
            let flux_div = gx(t, x) * ux - g(t, x) * u;
            utt - flux_div + op.b0.eval(t, p) * ut + op.b[0].eval(t, p) * ux + op.c.eval(t, p) * u
        }),
    }
}

fn smooth1d() -> CatalogEntry {
    let metric = MetricField::scalar_1d(
        |_, x| 1.0 + 0.5 * x[0].sin().powi(2),
        Regularity::Smooth,
        WIDE,
        EllipticityBounds { lower: 1.0, upper: 1.5 },
        false,
    );
    let op = FirstOrderOperator::zero(1)
        .with_b0(Coefficient::constant(0.2))
        .with_b(0, Coefficient::func(|_, x| 0.1 * x[0].sin()))
        .with_c(Coefficient::func(|_, x| 0.5 + 0.1 * x[0].cos()));
    let exact = standing_wave(|_, x| 1.0 + 0.5 * x.sin().powi(2), |_, x| x.sin() * x.cos(), &op);
    CatalogEntry { name: "smooth1d", metric, op, exact: Some(exact) }
}

fn lipschitz1d() -> CatalogEntry {
    let metric = MetricField::scalar_1d(
        |_, x| 1.0 + 0.5 * x[0].sin().abs(),
        Regularity::Lipschitz,
        WIDE,
        EllipticityBounds { lower: 1.0, upper: 1.5 },
        false,
    );
    let op = FirstOrderOperator::zero(1)
        .with_b0(Coefficient::func(|_, x| 0.1 * x[0].cos().abs()))
        .with_c(Coefficient::func(|_, x| 0.2 * signum0(x[0].sin())))
        .with_regularity([Regularity::Lipschitz, Regularity::Smooth, Regularity::Bounded]);
    let exact = standing_wave(|_, x| 1.0 + 0.5 * x.sin().abs(), |_, x| 0.5 * signum0(x.sin()) * x.cos(), &op);
    CatalogEntry { name: "lipschitz1d", metric, op, exact: Some(exact) }
}

fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `g^{11} = 1 + ½sin²x + ε t cos x` on `window`.
pub fn c1_metric(eps: f64, window: (f64, f64)) -> MetricField {
    let tmax = window.0.abs().max(window.1.abs());
    MetricField::scalar_1d(
        move |t, x| 1.0 + 0.5 * x[0].sin().powi(2) + eps * t * x[0].cos(),
        Regularity::C1,
        window,
        EllipticityBounds { lower: 1.0 - eps.abs() * tmax, upper: 1.5 + eps.abs() * tmax },
        eps != 0.0,
    )
}

fn c1_entry(eps: f64, window: (f64, f64)) -> CatalogEntry {
    let op = FirstOrderOperator::zero(1);
    let exact = standing_wave(
        move |t, x| 1.0 + 0.5 * x.sin().powi(2) + eps * t * x.cos(),
        move |t, x| x.sin() * x.cos() - eps * t * x.sin(),
        &op,
    );
    CatalogEntry { name: "c1_1d", metric: c1_metric(eps, window), op, exact: Some(exact) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::validate_ellipticity;
    use crate::grid::PeriodicGrid;

    /// `□u + L₁u` by nested centred differences of the closures.
    fn fd_source(entry: &CatalogEntry, t: f64, x: Position) -> f64 {
        let ex = entry.exact.as_ref().unwrap();
        let d = 1e-3;
        let u = |t: f64, x: Position| (ex.u)(t, x);
        let utt = (u(t + d, x) - 2.0 * u(t, x) + u(t - d, x)) / (d * d);
        let mut div = 0.0;
        let mut first = 0.0;
        for axis in 0..entry.dim() {
            let shift = |s: f64| {
                let mut y = x;
                y[axis] += s;
                y
            };
            let flux = |y: Position| {
                let g = entry.metric.eval(t, y)[axis][axis];
                g * (u(t, shift_pos(y, axis, d / 2.0)) - u(t, shift_pos(y, axis, -d / 2.0))) / d
            };
            div += (flux(shift(d / 2.0)) - flux(shift(-d / 2.0))) / d;
            first += entry.op.b[axis].eval(t, x) * (u(t, shift(d)) - u(t, shift(-d))) / (2.0 * d);
        }
        utt - div + entry.op.b0.eval(t, x) * (ex.ut)(t, x) + first + entry.op.c.eval(t, x) * u(t, x)
    }

    fn shift_pos(mut y: Position, axis: usize, s: f64) -> Position {
        y[axis] += s;
        y
    }

    #[test]
    fn manufactured_sources_match_finite_differences() {
        for name in catalog_names() {
            let entry = catalog(name).unwrap();
            let ex = entry.exact.as_ref().unwrap();
            for &t in &[-0.7, 0.0, 0.4] {
                for k in 0..13 {
                    // stay away from the kinks of |sin x| and |cos x|
                    let x = [0.31 + 0.47 * k as f64, 0.2 + 0.3 * k as f64];
                    let want = fd_source(&entry, t, x);
                    let got = (ex.source)(t, x);
                    assert!((want - got).abs() < 1e-4, "{name} t={t} x={x:?}: {got} vs {want}");
                    let d = 1e-6;
                    let ut = ((ex.u)(t + d, x) - (ex.u)(t - d, x)) / (2.0 * d);
                    assert!((ut - (ex.ut)(t, x)).abs() < 1e-8, "{name} ut");
                }
            }
        }
    }

    #[test]
    fn every_entry_is_elliptic_on_its_window() {
        for name in catalog_names() {
            let entry = catalog(name).unwrap();
            let grid = if entry.dim() == 1 { PeriodicGrid::new_1d(256) } else { PeriodicGrid::new_2d(32, 32) };
            let (lo, hi) = entry.metric.window();
            let b = validate_ellipticity(&entry.metric, &grid, (lo.max(-5.0), hi.min(5.0)), 9).unwrap();
            assert!(b.lower > 0.0 && b.lower <= b.upper);
            assert!(entry.metric.bounds().contains(&b, 1e-12), "{name}: {b:?}");
        }
    }

    #[test]
    fn catalog_examples() {
        let flat = catalog("flat1d").unwrap();
        let g = PeriodicGrid::new_1d(64);
        let b = validate_ellipticity(&flat.metric, &g, (-1.0, 1.0), 3).unwrap();
        assert_eq!((b.lower, b.upper), (1.0, 1.0));
        assert!(flat.exact.is_some());
        assert_eq!(catalog("lipschitz1d").unwrap().metric.regularity(), Regularity::Lipschitz);
        assert_eq!(catalog("c1_1d").unwrap().metric.regularity(), Regularity::C1);
        assert!(matches!(catalog("nope"), Err(FieldError::UnknownCatalog(_))));
    }

    #[test]
    fn lipschitz_envelope_by_dense_sampling() {
        let entry = catalog("lipschitz1d").unwrap();
        let grid = PeriodicGrid::new_1d(10_000);
        let b = validate_ellipticity(&entry.metric, &grid, (0.0, 1.0), 2).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-12);
        assert!((b.upper - 1.5).abs() < 1e-6);
    }

    #[test]
    fn c1_window_example() {
        let m = c1_metric(0.1, (-1.0, 1.0));
        let grid = PeriodicGrid::new_1d(512);
        let b = validate_ellipticity(&m, &grid, (-1.0, 1.0), 33).unwrap();
        // sampling oracle: min/max of 1 + ½sin²x ± 0.1cos x over x with |t| ≤ 1
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..33 {
            let t = -1.0 + 2.0 * j as f64 / 32.0;
            for i in 0..512 {
                let x = grid.position(i)[0];
                let v = 1.0 + 0.5 * x.sin().powi(2) + 0.1 * t * x.cos();
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        assert_eq!((b.lower, b.upper), (lo, hi));
        assert!(b.lower > 0.85);
    }
}
