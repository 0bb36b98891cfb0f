//! Ground truth: fixed-step classical RK4 and the Primer closed form.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::io::Write;

#[derive(Debug, thiserror::Error)]
pub enum ReferenceError {
    #[error("integration interval must satisfy t1 > t0 (got t0={t0}, t1={t1})")]
    EmptyInterval { t0: f64, t1: f64 },
    #[error("n_steps must be at least 1")]
    NoSteps,
    #[error("initial state has {actual} components, system dimension is {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("vector field returned a non-finite value at t={t}")]
    NonFinite { t: f64 },
    #[error("t={t} is outside the trajectory range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Field = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// `dy/dt = f(t, y)` with a fixed state dimension.
pub struct FirstOrderSystem {
    dim: usize,
    field: Box<Field>,
}

impl fmt::Debug for FirstOrderSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FirstOrderSystem").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl FirstOrderSystem {
    /// `field(t, y, dy)` must fill all of `dy`.
    pub fn new<F>(dim: usize, field: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        assert!(dim > 0, "system dimension must be positive");
        Self { dim, field: Box::new(field) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let mut dy = vec![0.0; self.dim];
        (self.field)(t, y, &mut dy);
        dy
    }
}

/// States on a uniform time grid, endpoints included.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub step: f64,
}

impl Trajectory {
    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("trajectory has at least two nodes")
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    /// First state component at every node.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[k]).collect()
    }

    /// Linear interpolation between the bracketing nodes; exact on nodes.
    pub fn sample(&self, t: f64) -> Result<Vec<f64>, ReferenceError> {
        let (start, end) = (self.start(), self.end());
        if !(start..=end).contains(&t) {
            return Err(ReferenceError::OutOfRange { t, start, end });
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        if self.times[i] == t || i + 1 == self.times.len() {
            return Ok(self.states[i].clone());
        }
        let frac = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        Ok(self.states[i].iter().zip(&self.states[i + 1]).map(|(a, b)| a + (b - a) * frac).collect())
    }

    /// Interpolated first component.
    pub fn sample_u(&self, t: f64) -> Result<f64, ReferenceError> {
        Ok(self.sample(t)?[0])
    }

    /// CSV with header `t,u` (one state) or `t,u,du` (two states).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), ReferenceError> {
        let names = ["u", "du"];
        let mut header = String::from("t");
        for k in 0..self.dim() {
            header.push(',');
            match names.get(k) {
                Some(n) => header.push_str(n),
                None => header.push_str(&format!("y{k}")),
            }
        }
        writeln!(out, "{header}")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(out, "{t:.16e}")?;
            for v in s {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Classical fourth-order Runge-Kutta with step `(t1 - t0) / n_steps`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn rk4_integrate(
    system: &FirstOrderSystem,
    y0: &[f64],
    t0: f64,
    t1: f64,
    n_steps: usize,
) -> Result<Trajectory, ReferenceError> {
    if !(t1 > t0) {
        return Err(ReferenceError::EmptyInterval { t0, t1 });
    }
    if n_steps == 0 {
        return Err(ReferenceError::NoSteps);
    }
    let dim = system.dim();
    if y0.len() != dim {
        return Err(ReferenceError::DimensionMismatch { expected: dim, actual: y0.len() });
    }
    let h = (t1 - t0) / n_steps as f64;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    times.push(t0);
    states.push(y0.to_vec());

    let mut y = y0.to_vec();
    let mut tmp = vec![0.0; dim];
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let eval = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), ReferenceError> {
        (system.field)(t, y, dy);
        if dy.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(ReferenceError::NonFinite { t })
        }
    };
    for i in 0..n_steps {
        let t = t0 + i as f64 * h;
        eval(t, &y, &mut k1)?;
        for d in 0..dim {
            tmp[d] = y[d] + 0.5 * h * k1[d];
        }
        eval(t + 0.5 * h, &tmp, &mut k2)?;
        for d in 0..dim {
            tmp[d] = y[d] + 0.5 * h * k2[d];
        }
        eval(t + 0.5 * h, &tmp, &mut k3)?;
        for d in 0..dim {
            tmp[d] = y[d] + h * k3[d];
        }
        eval(t + h, &tmp, &mut k4)?;
        for d in 0..dim {
            y[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        times.push(if i + 1 == n_steps { t1 } else { t0 + (i + 1) as f64 * h });
        states.push(y.clone());
    }
    Ok(Trajectory { times, states, step: h })
}

/// Closed form of `u' + a u = sin(w t)`, `u(0) = u0`.
pub fn linear_forced_decay(damping: f64, omega: f64, u0: f64, t: f64) -> f64 {
    let d = damping * damping + omega * omega;
    let a = damping / d;
    let b = -omega / d;
    (u0 - b) * (-damping * t).exp() + a * (omega * t).sin() + b * (omega * t).cos()
}

/// Primer oscillator exact solution with `a = 0.1`, `w = pi/2`, `u(0) = 1`.
pub fn primer_analytic(t: f64) -> f64 {
    linear_forced_decay(0.1, FRAC_PI_2, 1.0, t)
}
