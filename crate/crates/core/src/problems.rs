//! The oscillator initial-value problems: residuals, initial conditions,
//! first-order reductions and the Duffing energy.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet2, Scalar};
use crate::reference::FirstOrderSystem;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("domain must satisfy t_end > t_start with finite bounds (got [{0}, {1}])")]
    Domain(f64, f64),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("{0} has no conserved energy")]
    NoEnergy(&'static str),
}

fn default_damping() -> f64 {
    0.1
}

fn default_forcing() -> f64 {
    FRAC_PI_2
}

/// Equation family and its coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Oscillator {
    /// `u' + a u = sin(w t)`.
    Primer {
        #[serde(default = "default_damping")]
        damping: f64,
        #[serde(default = "default_forcing")]
        omega: f64,
    },
    /// `u'' + w0^2 u - eps w0 (1 - u^2) u' = 0`.
    VanDerPol { omega0: f64, epsilon: f64 },
    /// `u'' + alpha u + beta u^3 = 0`.
    Duffing { alpha: f64, beta: f64 },
}

impl Oscillator {
    pub fn name(&self) -> &'static str {
        match self {
            Oscillator::Primer { .. } => "primer",
            Oscillator::VanDerPol { .. } => "van_der_pol",
            Oscillator::Duffing { .. } => "duffing",
        }
    }

    /// Highest time derivative in the equation.
    pub fn order(&self) -> usize {
        match self {
            Oscillator::Primer { .. } => 1,
            _ => 2,
        }
    }

    fn coefficients(&self) -> [f64; 2] {
        match *self {
            Oscillator::Primer { damping, omega } => [damping, omega],
            Oscillator::VanDerPol { omega0, epsilon } => [omega0, epsilon],
            Oscillator::Duffing { alpha, beta } => [alpha, beta],
        }
    }
}

/// An oscillator posed on a time domain with initial conditions.
///
/// `du0` is ignored by the first-order Primer equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorProblem {
    pub oscillator: Oscillator,
    pub domain: [f64; 2],
    pub u0: f64,
    #[serde(default)]
    pub du0: f64,
}

impl OscillatorProblem {
    /// `u(0) = 1` on `[0, 30]`.
    pub fn primer() -> Self {
        Self {
            oscillator: Oscillator::Primer { damping: default_damping(), omega: default_forcing() },
            domain: [0.0, 30.0],
            u0: 1.0,
            du0: 0.0,
        }
    }

    /// `w0 = 15`, `(u, u')(0) = (1, 0)` on `[0, 1.5]`.
    pub fn van_der_pol(epsilon: f64) -> Self {
        Self { oscillator: Oscillator::VanDerPol { omega0: 15.0, epsilon }, domain: [0.0, 1.5], u0: 1.0, du0: 0.0 }
    }

    /// `alpha = beta = 1`, `(u, u')(0) = (15, 0)` on `[0, 1.5]`.
    pub fn duffing() -> Self {
        Self { oscillator: Oscillator::Duffing { alpha: 1.0, beta: 1.0 }, domain: [0.0, 1.5], u0: 15.0, du0: 0.0 }
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let [a, b] = self.domain;
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(ProblemError::Domain(a, b));
        }
        if !self.u0.is_finite() {
            return Err(ProblemError::NonFinite("u0"));
        }
        if !self.du0.is_finite() {
            return Err(ProblemError::NonFinite("du0"));
        }
        if self.oscillator.coefficients().iter().any(|c| !c.is_finite()) {
            return Err(ProblemError::NonFinite("oscillator coefficient"));
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.oscillator.order()
    }

    pub fn start(&self) -> f64 {
        self.domain[0]
    }

    pub fn end(&self) -> f64 {
        self.domain[1]
    }

    /// Initial state: `[u0]` or `[u0, du0]`.
    pub fn initial_state(&self) -> Vec<f64> {
        match self.order() {
            1 => vec![self.u0],
            _ => vec![self.u0, self.du0],
        }
    }

    /// Amount by which the jet `u` at time `t` violates the equation.
    pub fn residual<T: Scalar>(&self, u: Jet2<T>, t: f64) -> T {
        match self.oscillator {
            Oscillator::Primer { damping, omega } => u.v1 + u.v0 * damping - (omega * t).sin(),
            Oscillator::VanDerPol { omega0, epsilon } => {
                let damping = (u.v0 * u.v0 * -1.0 + 1.0) * u.v1 * (epsilon * omega0);
                u.v2 + u.v0 * (omega0 * omega0) - damping
            }
            Oscillator::Duffing { alpha, beta } => u.v2 + u.v0 * alpha + u.v0 * u.v0 * u.v0 * beta,
        }
    }

    /// `[u - u0]`, plus `[u' - du0]` for second-order problems.
    pub fn initial_condition_residuals<T: Scalar>(&self, u: Jet2<T>) -> Vec<T> {
        let mut r = vec![u.v0 - self.u0];
        if self.order() == 2 {
            r.push(u.v1 - self.du0);
        }
        r
    }

    /// `E = u'^2/2 + alpha u^2/2 + beta u^4/4`, defined for Duffing only.
    pub fn energy<T: Scalar>(&self, u: T, du: T) -> Result<T, ProblemError> {
        match self.oscillator {
            Oscillator::Duffing { alpha, beta } => {
                let u2 = u * u;
                Ok(du * du * 0.5 + u2 * (0.5 * alpha) + u2 * u2 * (0.25 * beta))
            }
            other => Err(ProblemError::NoEnergy(other.name())),
        }
    }

    /// Energy at the initial conditions.
    pub fn initial_energy(&self) -> Result<f64, ProblemError> {
        self.energy(self.u0, self.du0)
    }

    /// State-space form with state `u` or `(u, u')`.
    pub fn to_first_order_system(&self) -> FirstOrderSystem {
        match self.oscillator {
            Oscillator::Primer { damping, omega } => {
                FirstOrderSystem::new(1, move |t, y, dy| dy[0] = -damping * y[0] + (omega * t).sin())
            }
            Oscillator::VanDerPol { omega0, epsilon } => FirstOrderSystem::new(2, move |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -omega0 * omega0 * y[0] + epsilon * omega0 * (1.0 - y[0] * y[0]) * y[1];
            }),
            Oscillator::Duffing { alpha, beta } => FirstOrderSystem::new(2, move |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -alpha * y[0] - beta * y[0] * y[0] * y[0];
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::rk4_integrate;
    use approx::assert_relative_eq;

    #[test]
    fn residual_examples() {
        let p = OscillatorProblem::primer();
        assert_relative_eq!(p.residual(Jet2::new(1.0, 0.0, 0.0), 0.0), 0.1);
        let v = OscillatorProblem::van_der_pol(5.0);
        assert_relative_eq!(v.residual(Jet2::new(1.0, 0.0, 0.0), 0.3), 225.0);
        let d = OscillatorProblem::duffing();
        assert_relative_eq!(d.residual(Jet2::new(2.0, 0.7, 0.0), 0.0), 10.0);
    }

    #[test]
    fn initial_condition_examples() {
        let p = OscillatorProblem::primer();
        assert_eq!(p.initial_condition_residuals(Jet2::new(1.0, 0.3, 0.0)), vec![0.0]);
        let v = OscillatorProblem::van_der_pol(1.0);
        assert_eq!(v.initial_condition_residuals(Jet2::new(1.0, 0.0, 4.0)), vec![0.0, 0.0]);
        let d = OscillatorProblem::duffing();
        assert_eq!(d.initial_condition_residuals(Jet2::new(0.0, 0.5, 0.0)), vec![-15.0, 0.5]);
    }

    #[test]
    fn energy_examples() {
        let d = OscillatorProblem::duffing();
        assert_eq!(d.energy(1.0, 0.0).unwrap(), 0.75);
        assert_eq!(d.energy(0.0, 2.0).unwrap(), 2.0);
        assert_eq!(d.initial_energy().unwrap(), 112.5 + 12656.25);
        assert_eq!(d.initial_energy().unwrap(), 12768.75);
    }

    #[test]
    fn energy_rejected_for_dissipative_problems() {
        assert_eq!(OscillatorProblem::primer().energy(1.0, 0.0), Err(ProblemError::NoEnergy("primer")));
        assert!(OscillatorProblem::van_der_pol(1.0).initial_energy().is_err());
    }

    #[test]
    fn first_order_fields() {
        let p = OscillatorProblem::primer().to_first_order_system();
        assert_relative_eq!(p.eval(1.0, &[2.0])[0], -0.2 + 1.0);
        let v = OscillatorProblem::van_der_pol(5.0).to_first_order_system();
        let dy = v.eval(0.0, &[0.5, 2.0]);
        assert_eq!(dy[0], 2.0);
        assert_relative_eq!(dy[1], -225.0 * 0.5 + 75.0 * 0.75 * 2.0);
        let d = OscillatorProblem::duffing().to_first_order_system();
        assert_eq!(d.eval(0.0, &[2.0, -1.0]), vec![-1.0, -10.0]);
    }

    #[test]
    fn validation() {
        let mut p = OscillatorProblem::primer();
        assert!(p.validate().is_ok());
        p.domain = [1.0, 1.0];
        assert_eq!(p.validate(), Err(ProblemError::Domain(1.0, 1.0)));
        let mut d = OscillatorProblem::duffing();
        d.u0 = f64::NAN;
        assert!(d.validate().is_err());
    }

    #[test]
    fn orders() {
        assert_eq!(OscillatorProblem::primer().order(), 1);
        assert_eq!(OscillatorProblem::van_der_pol(3.0).order(), 2);
        assert_eq!(OscillatorProblem::duffing().initial_state(), vec![15.0, 0.0]);
    }

    /// Five-point central derivative of uniformly sampled values.
    fn derivative(values: &[f64], h: f64, i: usize) -> f64 {
        (values[i - 2] - 8.0 * values[i - 1] + 8.0 * values[i + 1] - values[i + 2]) / (12.0 * h)
    }

    fn max_reference_residual(problem: &OscillatorProblem) -> f64 {
        let sys = problem.to_first_order_system();
        let traj = rk4_integrate(&sys, &problem.initial_state(), problem.start(), problem.end(), 30_000).unwrap();
        let u = traj.component(0);
        let du = traj.component(traj.dim() - 1);
        let h = traj.step;
        (2..u.len() - 2)
            .map(|i| {
                let jet = if problem.order() == 1 {
                    Jet2::new(u[i], derivative(&u, h, i), 0.0)
                } else {
                    Jet2::new(u[i], du[i], derivative(&du, h, i))
                };
                problem.residual(jet, traj.times[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn reference_trajectories_satisfy_their_equations() {
        for problem in [
            OscillatorProblem::primer(),
            OscillatorProblem::van_der_pol(1.0),
            OscillatorProblem::van_der_pol(5.0),
            OscillatorProblem::duffing(),
        ] {
            let r = max_reference_residual(&problem);
            assert!(r < 1e-4, "{}: residual {r}", problem.oscillator.name());
        }
    }

    #[test]
    fn duffing_is_odd() {
        let d = OscillatorProblem::duffing();
        let u = Jet2::new(1.3, -0.4, 2.2);
        assert_eq!(d.residual(-u, 0.0), -d.residual(u, 0.0));

        let sys = d.to_first_order_system();
        let up = rk4_integrate(&sys, &[15.0, 0.0], 0.0, 1.5, 500).unwrap();
        let down = rk4_integrate(&sys, &[-15.0, 0.0], 0.0, 1.5, 500).unwrap();
        for (a, b) in up.states.iter().zip(&down.states) {
            assert_eq!(a[0], -b[0]);
            assert_eq!(a[1], -b[1]);
        }
    }

    #[test]
    fn duffing_energy_conserved_van_der_pol_not() {
        let d = OscillatorProblem::duffing();
        let traj = rk4_integrate(&d.to_first_order_system(), &d.initial_state(), 0.0, 1.5, 3000).unwrap();
        let e0 = d.initial_energy().unwrap();
        let drift = traj.states.iter().map(|s| ((d.energy(s[0], s[1]).unwrap() - e0) / e0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-6, "drift {drift}");

        let v = OscillatorProblem::van_der_pol(5.0);
        let traj = rk4_integrate(&v.to_first_order_system(), &v.initial_state(), 0.0, 1.5, 3000).unwrap();
        let harmonic = |s: &Vec<f64>| 0.5 * s[1] * s[1] + 0.5 * 225.0 * s[0] * s[0];
        let e0 = harmonic(&traj.states[0]);
        let change = traj.states.iter().map(|s| ((harmonic(s) - e0) / e0).abs()).fold(0.0, f64::max);
        assert!(change > 0.01, "change {change}");
    }

    #[test]
    fn config_round_trip() {
        let d = OscillatorProblem::duffing();
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"kind\":\"duffing\""));
        assert_eq!(serde_json::from_str::<OscillatorProblem>(&json).unwrap(), d);
        let p: OscillatorProblem =
            serde_json::from_str(r#"{"oscillator":{"kind":"primer"},"domain":[0,30],"u0":1}"#).unwrap();
        assert_eq!(p, OscillatorProblem::primer());
        let bad = r#"{"oscillator":{"kind":"duffing","alpha":1,"beta":1,"gamma":2},"domain":[0,1],"u0":1}"#;
        assert!(serde_json::from_str::<OscillatorProblem>(bad).is_err());
    }
}
