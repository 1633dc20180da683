//! Control signals: an analytic base profile on `[0, τ−δ]` followed by an
//! optional synthesized tail on `[τ−δ, τ]`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::controllability::TailControl;
use crate::state::Side;

/// Named analytic control profiles. Modes are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControlProfile {
    #[default]
    Zero,
    Constant { mode: usize, amplitude: f64 },
    /// `amplitude · sin(frequency · t)` on one mode.
    Sine { mode: usize, amplitude: f64, frequency: f64 },
}

impl ControlProfile {
    pub fn eval(&self, t: f64, modes: usize) -> DVector<f64> {
        let mut u = DVector::zeros(modes);
        match *self {
            ControlProfile::Zero => {}
            ControlProfile::Constant { mode, amplitude } => {
                if (1..=modes).contains(&mode) {
                    u[mode - 1] = amplitude;
                }
            }
            ControlProfile::Sine { mode, amplitude, frequency } => {
                if (1..=modes).contains(&mode) {
                    u[mode - 1] = amplitude * (frequency * t).sin();
                }
            }
        }
        u
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ControlProfile::Zero)
    }
}

/// Piecewise control `u(t)` in modal coefficients.
#[derive(Debug, Clone)]
pub struct ControlSignal {
    modes: usize,
    base: ControlProfile,
    tail: Option<TailControl>,
}

impl ControlSignal {
    pub fn base_only(base: ControlProfile, modes: usize) -> Self {
        Self { modes, base, tail: None }
    }

    pub fn with_tail(base: ControlProfile, modes: usize, tail: TailControl) -> Self {
        Self { modes, base, tail: Some(tail) }
    }

    pub fn base(&self) -> &ControlProfile {
        &self.base
    }

    pub fn tail(&self) -> Option<&TailControl> {
        self.tail.as_ref()
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn is_identically_zero(&self) -> bool {
        self.base.is_zero() && self.tail.is_none()
    }

    /// `u(t)`; at the handoff instant `τ−δ` the side picks base (left) or tail (right).
    pub fn value(&self, t: f64, side: Side) -> DVector<f64> {
        if let Some(tail) = &self.tail {
            let handoff = tail.window().start();
            let tol = 1e-12 * tail.window().horizon.max(1.0);
            let in_tail = t > handoff + tol || ((t - handoff).abs() <= tol && side == Side::Right);
            if in_tail {
                return tail.eval(t.min(tail.window().horizon));
            }
        }
        self.base.eval(t, self.modes)
    }
}
