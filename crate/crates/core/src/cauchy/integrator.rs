//! Explicit one-step integrators for `y' = F(t, y)` and for second-order
//! systems `q'' = A(t, q, q')`.

/// Time integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    /// Kick-drift-kick Verlet; needs an acceleration independent of `q'`.
    Leapfrog,
    /// Heun's method. Weakly unstable for undamped waves; opt-in only.
    Rk2,
    /// Classical fourth-order Runge–Kutta.
    Rk4,
}

impl std::str::FromStr for TimeScheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "leapfrog" => Ok(TimeScheme::Leapfrog),
            "rk2" | "rk2_system" => Ok(TimeScheme::Rk2),
            "rk4" => Ok(TimeScheme::Rk4),
            other => Err(format!("unknown scheme {other:?} (leapfrog, rk2, rk4)")),
        }
    }
}

/// `y' = F(t, y)`.
pub(crate) trait FirstOrderSystem {
    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]);
}

/// `q'' = A(t, q, p)` with `p = q'`; `y = [q; p]`.
pub(crate) trait SecondOrderSystem {
    fn accel(&mut self, t: f64, q: &[f64], p: &[f64], out: &mut [f64]);
}

struct AsFirstOrder<'a, S: SecondOrderSystem>(&'a mut S);

impl<S: SecondOrderSystem> FirstOrderSystem for AsFirstOrder<'_, S> {
    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) {
        let n = y.len() / 2;
        let (q, p) = y.split_at(n);
        let (dq, dp) = dy.split_at_mut(n);
        dq.copy_from_slice(p);
        self.0.accel(t, q, p, dp);
    }
}

/// Stage buffers reused across steps.
pub(crate) struct Stepper {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Stepper {
    pub fn new(len: usize) -> Self {
        Self { k: std::array::from_fn(|_| vec![0.0; len]), tmp: vec![0.0; len] }
    }

    /// One Runge–Kutta step of size `dt` (negative for backward runs).
    pub fn rk_step<S: FirstOrderSystem>(&mut self, scheme: TimeScheme, sys: &mut S, t: f64, dt: f64, y: &mut [f64]) {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        match scheme {
            TimeScheme::Rk2 | TimeScheme::Leapfrog => {
                sys.rhs(t, y, k1);
                for i in 0..y.len() {
                    tmp[i] = y[i] + dt * k1[i];
                }
                sys.rhs(t + dt, tmp, k2);
                for i in 0..y.len() {
                    y[i] += 0.5 * dt * (k1[i] + k2[i]);
                }
            }
            TimeScheme::Rk4 => {
                sys.rhs(t, y, k1);
                for i in 0..y.len() {
                    tmp[i] = y[i] + 0.5 * dt * k1[i];
                }
                sys.rhs(t + 0.5 * dt, tmp, k2);
                for i in 0..y.len() {
                    tmp[i] = y[i] + 0.5 * dt * k2[i];
                }
                sys.rhs(t + 0.5 * dt, tmp, k3);
                for i in 0..y.len() {
                    tmp[i] = y[i] + dt * k3[i];
                }
                sys.rhs(t + dt, tmp, k4);
                for i in 0..y.len() {
                    y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
    }

    /// One step of a second-order system; `y = [q; p]`.
    pub fn second_order_step<S: SecondOrderSystem>(&mut self, scheme: TimeScheme, sys: &mut S, t: f64, dt: f64, y: &mut [f64]) {
        match scheme {
            TimeScheme::Leapfrog => {
                let n = y.len() / 2;
                let acc = &mut self.k[0][..n];
                let (q, p) = y.split_at_mut(n);
                sys.accel(t, q, p, acc);
                for i in 0..n {
                    p[i] += 0.5 * dt * acc[i];
                    q[i] += dt * p[i];
                }
                sys.accel(t + dt, q, p, acc);
                for i in 0..n {
                    p[i] += 0.5 * dt * acc[i];
                }
            }
            _ => self.rk_step(scheme, &mut AsFirstOrder(sys), t, dt, y),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator(f64);
    impl SecondOrderSystem for Oscillator {
        fn accel(&mut self, _t: f64, q: &[f64], _p: &[f64], out: &mut [f64]) {
            out[0] = -self.0 * self.0 * q[0];
        }
    }

    fn run(scheme: TimeScheme, steps: usize) -> f64 {
        let mut y = vec![1.0, 0.0];
        let dt = 1.0 / steps as f64;
        let mut s = Stepper::new(2);
        let mut sys = Oscillator(2.0);
        for n in 0..steps {
            s.second_order_step(scheme, &mut sys, n as f64 * dt, dt, &mut y);
        }
        (y[0] - 2f64.cos()).abs()
    }

    #[test]
    fn orders_of_accuracy() {
        for (scheme, p) in [(TimeScheme::Leapfrog, 2.0), (TimeScheme::Rk2, 2.0), (TimeScheme::Rk4, 4.0)] {
            let rate = (run(scheme, 50) / run(scheme, 100)).log2();
            assert!((rate - p).abs() < 0.15, "{scheme:?}: {rate}");
        }
    }

    #[test]
    fn backward_steps_undo_forward_steps() {
        let mut y = vec![0.3, -0.2];
        let mut s = Stepper::new(2);
        let mut sys = Oscillator(1.0);
        let dt = 0.01;
        for n in 0..100 {
            s.second_order_step(TimeScheme::Leapfrog, &mut sys, n as f64 * dt, dt, &mut y);
        }
        for n in (0..100).rev() {
            s.second_order_step(TimeScheme::Leapfrog, &mut sys, (n + 1) as f64 * dt, -dt, &mut y);
        }
        assert!((y[0] - 0.3).abs() < 1e-13 && (y[1] + 0.2).abs() < 1e-13);
    }

    #[test]
    fn parses_scheme_names() {
        assert_eq!("rk4".parse::<TimeScheme>().unwrap(), TimeScheme::Rk4);
        assert_eq!("rk2_system".parse::<TimeScheme>().unwrap(), TimeScheme::Rk2);
        assert!("euler".parse::<TimeScheme>().is_err());
    }
}
