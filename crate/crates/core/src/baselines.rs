//! Step-size schedules and the first-order baselines (SGD, Adam).

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, Zip};
use thiserror::Error;

use crate::ParamVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("schedule parameters must be finite and strictly positive")]
    NonPositive,
    #[error("iteration counter starts at 1")]
    ZeroIteration,
    #[error("cannot parse schedule `{0}`; expected gain(tau, alpha0), sqrt_decay(alpha0) or constant(alpha)")]
    Parse(String),
}

/// Step size `α_k` as a function of the 1-based iteration counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// `τ·α₀/(τ + k)`.
    Gain { tau: f64, alpha0: f64 },
    /// `α₀/√k`.
    SqrtDecay { alpha0: f64 },
    Constant { alpha: f64 },
}

impl Schedule {
    pub fn gain(tau: f64, alpha0: f64) -> Result<Self, ScheduleError> {
        Self::Gain { tau, alpha0 }.validated()
    }

    pub fn sqrt_decay(alpha0: f64) -> Result<Self, ScheduleError> {
        Self::SqrtDecay { alpha0 }.validated()
    }

    pub fn constant(alpha: f64) -> Result<Self, ScheduleError> {
        Self::Constant { alpha }.validated()
    }

    fn validated(self) -> Result<Self, ScheduleError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        let valid = match self {
            Schedule::Gain { tau, alpha0 } => ok(tau) && ok(alpha0),
            Schedule::SqrtDecay { alpha0 } => ok(alpha0),
            Schedule::Constant { alpha } => ok(alpha),
        };
        if valid {
            Ok(self)
        } else {
            Err(ScheduleError::NonPositive)
        }
    }

    pub fn step_size(&self, k: u64) -> Result<f64, ScheduleError> {
        if k == 0 {
            return Err(ScheduleError::ZeroIteration);
        }
        let k = k as f64;
        Ok(match *self {
            Schedule::Gain { tau, alpha0 } => tau * alpha0 / (tau + k),
            Schedule::SqrtDecay { alpha0 } => alpha0 / k.sqrt(),
            Schedule::Constant { alpha } => alpha,
        })
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Gain { tau, alpha0 } => write!(f, "gain({tau}, {alpha0})"),
            Schedule::SqrtDecay { alpha0 } => write!(f, "sqrt_decay({alpha0})"),
            Schedule::Constant { alpha } => write!(f, "constant({alpha})"),
        }
    }
}

impl FromStr for Schedule {
    type Err = ScheduleError;

    /// Accepts `gain(τ, α₀)`, `sqrt_decay(α₀)` and `constant(α)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ScheduleError::Parse(s.to_string());
        let t = s.trim();
        let open = t.find('(').ok_or_else(err)?;
        if !t.ends_with(')') {
            return Err(err());
        }
        let name = t[..open].trim().to_ascii_lowercase();
        let args: Vec<f64> = t[open + 1..t.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| err())?;
        match (name.as_str(), args.as_slice()) {
            ("gain", [tau, alpha0]) => Schedule::gain(*tau, *alpha0),
            ("sqrt_decay", [alpha0]) => Schedule::sqrt_decay(*alpha0),
            ("constant", [alpha]) => Schedule::constant(*alpha),
            _ => Err(err()),
        }
    }
}

/// `w − α·grad`.
pub fn sgd_step(w: ArrayView1<f64>, grad: ArrayView1<f64>, alpha: f64) -> ParamVector {
    assert_eq!(w.len(), grad.len(), "parameter and gradient lengths differ");
    let mut out = w.to_owned();
    out.scaled_add(-alpha, &grad);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { alpha: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam moment estimates with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Array1<f64>,
    second: Array1<f64>,
    k: u64,
    config: AdamConfig,
}

impl AdamState {
    pub fn new(dim: usize, config: AdamConfig) -> Self {
        assert!(
            (0.0..1.0).contains(&config.beta1) && (0.0..1.0).contains(&config.beta2),
            "Adam decay rates must lie in [0, 1)"
        );
        Self { first: Array1::zeros(dim), second: Array1::zeros(dim), k: 0, config }
    }

    pub fn iterations(&self) -> u64 {
        self.k
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Applies one Adam update to `w` in place with step size `alpha`.
    pub fn step_with(&mut self, w: &mut Array1<f64>, grad: ArrayView1<f64>, alpha: f64) {
        assert_eq!(w.len(), grad.len(), "parameter and gradient lengths differ");
        assert_eq!(w.len(), self.first.len(), "parameter length differs from Adam state");
        let AdamConfig { beta1, beta2, epsilon, .. } = self.config;
        self.k += 1;
        let c1 = 1.0 - beta1.powi(self.k as i32);
        let c2 = 1.0 - beta2.powi(self.k as i32);
        Zip::from(w)
            .and(&mut self.first)
            .and(&mut self.second)
            .and(grad)
            .for_each(|w, m, v, &g| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= alpha * m_hat / (v_hat.sqrt() + epsilon);
            });
    }

    pub fn step(&mut self, w: &mut Array1<f64>, grad: ArrayView1<f64>) {
        let alpha = self.config.alpha;
        self.step_with(w, grad, alpha);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sqrt_decay_values() {
        let s = Schedule::sqrt_decay(1.0).unwrap();
        assert_eq!(s.step_size(1).unwrap(), 1.0);
        assert_eq!(s.step_size(4).unwrap(), 0.5);
        assert!((s.step_size(100).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn gain_and_constant_values() {
        let g = Schedule::gain(10.0, 1.0).unwrap();
        assert_eq!(g.step_size(1).unwrap(), 10.0 / 11.0);
        let c = Schedule::constant(0.01).unwrap();
        assert_eq!(c.step_size(1).unwrap(), 0.01);
        assert_eq!(c.step_size(123_456).unwrap(), 0.01);
    }

    #[test]
    fn zero_iteration_and_bad_parameters_rejected() {
        assert_eq!(Schedule::constant(1.0).unwrap().step_size(0), Err(ScheduleError::ZeroIteration));
        assert!(Schedule::gain(0.0, 1.0).is_err());
        assert!(Schedule::sqrt_decay(-1.0).is_err());
        assert!(Schedule::constant(f64::NAN).is_err());
    }

    #[test]
    fn schedule_parse_round_trip() {
        for s in [
            Schedule::gain(10.0, 0.5).unwrap(),
            Schedule::sqrt_decay(1.0).unwrap(),
            Schedule::constant(0.01).unwrap(),
        ] {
            assert_eq!(s.to_string().parse::<Schedule>().unwrap(), s);
        }
        assert!("sqrt_decay(1, 2)".parse::<Schedule>().is_err());
        assert!("linear(1)".parse::<Schedule>().is_err());
        assert!("constant(0)".parse::<Schedule>().is_err());
    }

    #[test]
    fn sgd_examples() {
        assert_eq!(sgd_step(array![1.0, 1.0].view(), array![1.0, 0.0].view(), 0.5), array![0.5, 1.0]);
        let w = array![0.3, -2.0];
        assert_eq!(sgd_step(w.view(), array![0.0, 0.0].view(), 0.5), w);
        // ½‖w‖² has gradient w.
        let mut w = array![1.0, 0.0];
        for _ in 0..2 {
            w = sgd_step(w.view(), w.view(), 0.5);
        }
        assert_eq!(w, array![0.25, 0.0]);
    }

    #[test]
    fn adam_first_step_is_signed_alpha() {
        let mut st = AdamState::new(3, AdamConfig::default());
        let mut w = array![0.0, 0.0, 0.0];
        st.step(&mut w, array![5.0, -0.2, 1e-3].view());
        for (dw, sign) in w.iter().zip([-1.0, 1.0, -1.0]) {
            assert!(dw.abs() <= 1e-3);
            assert!(dw.signum() == sign);
        }
        assert!((w[0] + 1e-3).abs() < 1e-11);
    }

    #[test]
    fn adam_with_zero_gradient_never_moves() {
        let mut st = AdamState::new(2, AdamConfig::default());
        let mut w = array![1.5, -0.5];
        for _ in 0..50 {
            st.step(&mut w, array![0.0, 0.0].view());
        }
        assert_eq!(w, array![1.5, -0.5]);
    }

    #[test]
    fn adam_three_unit_gradient_steps() {
        // With a constant gradient the bias-corrected moments are exactly g and g²,
        // so every step is α·1/(1 + ε).
        let cfg = AdamConfig::default();
        let mut st = AdamState::new(1, cfg);
        let mut w = array![0.0];
        let mut prev = 0.0;
        for _ in 0..3 {
            st.step(&mut w, array![1.0].view());
            let step = prev - w[0];
            assert!(step > 0.0 && step <= cfg.alpha);
            assert!((step - cfg.alpha / (1.0 + cfg.epsilon)).abs() < 1e-15);
            prev = w[0];
        }
        assert!(-w[0] < 3.0 * cfg.alpha);
    }
}
