use std::io::Write;
use std::sync::Arc;

use crate::fields::{FirstOrderOperator, MetricField, ScalarFn, StateVector};
use crate::grid::{GridFunction, PeriodicGrid};

use super::CauchyError;

/// Stored steps of a solve, with cubic Hermite reconstruction in time.
#[derive(Clone)]
pub struct Trajectory {
    pub(crate) grid: Arc<PeriodicGrid>,
    pub(crate) times: Vec<f64>,
    pub(crate) u: Vec<Vec<f64>>,
    pub(crate) ut: Vec<Vec<f64>>,
    pub(crate) utt: Vec<Vec<f64>>,
    pub(crate) dt: f64,
    pub(crate) reference: usize,
    pub(crate) metric: MetricField,
    pub(crate) op: FirstOrderOperator,
    pub(crate) source: Option<ScalarFn>,
}

impl std::fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trajectory")
            .field("steps", &self.times.len())
            .field("window", &self.window())
            .field("dt", &self.dt)
            .finish()
    }
}

impl Trajectory {
    /// The trajectory `u ≡ value` on `window`, sampled every `dt`.
    pub fn constant(grid: &Arc<PeriodicGrid>, value: f64, window: (f64, f64), dt: f64) -> Self {
        let n = ((window.1 - window.0) / dt).ceil().max(1.0) as usize;
        let times: Vec<f64> = (0..=n).map(|k| window.0 + (window.1 - window.0) * k as f64 / n as f64).collect();
        let len = grid.len();
        Self {
            grid: Arc::clone(grid),
            u: vec![vec![value; len]; times.len()],
            ut: vec![vec![0.0; len]; times.len()],
            utt: vec![vec![0.0; len]; times.len()],
            times,
            dt: (window.1 - window.0) / n as f64,
            reference: 0,
            metric: MetricField::flat(grid.dim()),
            op: FirstOrderOperator::zero(grid.dim()),
            source: None,
        }
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    /// Stored times, strictly increasing.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Index of the data time.
    pub fn reference_index(&self) -> usize {
        self.reference
    }

    pub fn window(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().expect("non-empty trajectory"))
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn op(&self) -> &FirstOrderOperator {
        &self.op
    }

    pub fn source(&self) -> Option<&ScalarFn> {
        self.source.as_ref()
    }

    pub fn state(&self, i: usize) -> StateVector {
        StateVector::new(
            GridFunction::from_raw(&self.grid, self.u[i].clone()),
            GridFunction::from_raw(&self.grid, self.ut[i].clone()),
            self.times[i],
        )
    }

    pub fn states(&self) -> impl Iterator<Item = StateVector> + '_ {
        (0..self.len()).map(|i| self.state(i))
    }

    fn locate(&self, t: f64) -> Result<(usize, f64, f64), CauchyError> {
        let (lo, hi) = self.window();
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(CauchyError::OutsideWindow { t, lo, hi });
        }
        if self.len() == 1 {
            return Ok((0, 0.0, 1.0));
        }
        let t = t.clamp(lo, hi);
        let k = match self.times.binary_search_by(|x| x.partial_cmp(&t).expect("finite times")) {
            Ok(k) => k.min(self.len() - 2),
            Err(k) => k.saturating_sub(1).min(self.len() - 2),
        };
        let tau = self.times[k + 1] - self.times[k];
        Ok((k, (t - self.times[k]) / tau, tau))
    }

    /// `(u, ∂ₜu)` at one node and any time in the window.
    pub fn node_value(&self, node: usize, t: f64) -> Result<(f64, f64), CauchyError> {
        let (k, s, tau) = self.locate(t)?;
        if self.len() == 1 {
            return Ok((self.u[0][node], self.ut[0][node]));
        }
        Ok(hermite(s, tau, [&self.u, &self.ut, &self.utt], k, node))
    }

    /// State at time `t` by cubic Hermite interpolation of stored steps.
    pub fn interpolate(&self, t: f64) -> Result<StateVector, CauchyError> {
        let (k, s, tau) = self.locate(t)?;
        if self.len() == 1 {
            return Ok(self.state(0));
        }
        let (u, ut): (Vec<f64>, Vec<f64>) = (0..self.grid.len()).map(|i| hermite(s, tau, [&self.u, &self.ut, &self.utt], k, i)).unzip();
        Ok(StateVector::new(GridFunction::from_raw(&self.grid, u), GridFunction::from_raw(&self.grid, ut), t))
    }

    /// CSV: one row per stored time, `t` followed by node values of `u`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# goursat-lab solution v1")?;
        write!(w, "t")?;
        for i in 0..self.grid.len() {
            write!(w, ",u{i}")?;
        }
        writeln!(w)?;
        for (k, t) in self.times.iter().enumerate() {
            write!(w, "{t}")?;
            for v in &self.u[k] {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[inline]
fn hermite(s: f64, tau: f64, f: [&Vec<Vec<f64>>; 3], k: usize, i: usize) -> (f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let [u, ut, utt] = f;
    let a = h00 * u[k][i] + h10 * tau * ut[k][i] + h01 * u[k + 1][i] + h11 * tau * ut[k + 1][i];
    let b = h00 * ut[k][i] + h10 * tau * utt[k][i] + h01 * ut[k + 1][i] + h11 * tau * utt[k + 1][i];
    (a, b)
}
