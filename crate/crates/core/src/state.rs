//! Points of `Z^{1/2}` in modal coordinates, the delay history, the impulse
//! schedule, and the trajectory record that delayed lookups read from.

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::nonlinearity::ImpulseMap;
use crate::spectral::SpectralBasis;

/// Damping `η`, stiffness `γ`, delay `r` and horizon `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub eta: f64,
    pub gamma: f64,
    pub delay: f64,
    pub horizon: f64,
}

impl ModelParams {
    pub fn new(eta: f64, gamma: f64, delay: f64, horizon: f64) -> Result<Self> {
        let p = Self { eta, gamma, delay, horizon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta", self.eta),
            ("gamma", self.gamma),
            ("delay", self.delay),
            ("horizon", self.horizon),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.delay >= self.horizon {
            return Err(Error::InvalidParameter(format!(
                "delay r = {} must be below the horizon {}",
                self.delay, self.horizon
            )));
        }
        Ok(())
    }
}

/// Truncated spectral coefficients: position `w` and velocity `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    pub w: DVector<f64>,
    pub v: DVector<f64>,
}

impl ModalState {
    pub fn new(w: DVector<f64>, v: DVector<f64>) -> Result<Self> {
        check_dim(w.len(), v.len())?;
        Ok(Self { w, v })
    }

    pub fn zeros(modes: usize) -> Self {
        Self { w: DVector::zeros(modes), v: DVector::zeros(modes) }
    }

    pub fn modes(&self) -> usize {
        self.w.len()
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { w: &self.w * c, v: &self.v * c }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { w: &self.w + &other.w, v: &self.v + &other.v }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { w: &self.w - &other.w, v: &self.v - &other.v }
    }

    /// Coordinates in which the `Z^{1/2}` inner product is Euclidean:
    /// `[√λ_1 w_1, …, √λ_N w_N, v_1, …, v_N]`.
    pub fn to_energy(&self, eigenvalues: &[f64]) -> DVector<f64> {
        let n = self.modes();
        DVector::from_fn(2 * n, |i, _| {
            if i < n {
                eigenvalues[i].sqrt() * self.w[i]
            } else {
                self.v[i - n]
            }
        })
    }

    pub fn from_energy(x: &DVector<f64>, eigenvalues: &[f64]) -> Self {
        let n = x.len() / 2;
        Self {
            w: DVector::from_fn(n, |i, _| x[i] / eigenvalues[i].sqrt()),
            v: DVector::from_fn(n, |i, _| x[n + i]),
        }
    }
}

/// `‖z‖²_{Z^{1/2}} = Σ λ_j w_j² + Σ v_j²`.
pub fn z_half_norm(state: &ModalState, basis: &SpectralBasis) -> Result<f64> {
    check_dim(basis.modes(), state.w.len())?;
    check_dim(basis.modes(), state.v.len())?;
    Ok(energy_norm(state, basis.eigenvalues()))
}

pub(crate) fn energy_norm(state: &ModalState, eigenvalues: &[f64]) -> f64 {
    let pos: f64 = state.w.iter().zip(eigenvalues).map(|(w, l)| l * w * w).sum();
    (pos + state.v.norm_squared()).sqrt()
}

/// `z(t_k^+) = z(t_k^-) + (0, I_k)`: only the velocity jumps.
pub fn apply_impulse(state: &ModalState, impulse: &DVector<f64>) -> Result<ModalState> {
    check_dim(state.modes(), impulse.len())?;
    Ok(ModalState { w: state.w.clone(), v: &state.v + impulse })
}

/// Which one-sided limit to read at a jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Number of whole steps of size `dt` in `x`, if `x` lies on the grid.
pub fn grid_steps(x: f64, dt: f64) -> Option<usize> {
    if !(dt > 0.0) || x < 0.0 {
        return None;
    }
    let k = (x / dt).round();
    if ((x / dt) - k).abs() <= 1e-9 * k.max(1.0) {
        Some(k as usize)
    } else {
        None
    }
}

/// Initial data `Φ` sampled at `s = -r, -r + Δt, …, 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySegment {
    dt: f64,
    samples: Vec<ModalState>,
}

impl HistorySegment {
    pub fn new(dt: f64, delay: f64, samples: Vec<ModalState>) -> Result<Self> {
        let steps = grid_steps(delay, dt).ok_or_else(|| {
            Error::InvalidParameter(format!("dt = {dt} does not divide the delay r = {delay}"))
        })?;
        if samples.len() != steps + 1 {
            return Err(Error::DimensionMismatch { expected: steps + 1, actual: samples.len() });
        }
        if let Some(first) = samples.first() {
            for s in &samples {
                check_dim(first.modes(), s.modes())?;
            }
        }
        Ok(Self { dt, samples })
    }

    /// Samples a closure `s ↦ Φ(s)` on the history grid.
    pub fn from_fn<F: Fn(f64) -> ModalState>(dt: f64, delay: f64, profile: F) -> Result<Self> {
        let steps = grid_steps(delay, dt).ok_or_else(|| {
            Error::InvalidParameter(format!("dt = {dt} does not divide the delay r = {delay}"))
        })?;
        let samples = (0..=steps)
            .map(|i| profile(-((steps - i) as f64) * dt))
            .collect();
        Self::new(dt, delay, samples)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of steps spanning `[-r, 0]`.
    pub fn steps(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn samples(&self) -> &[ModalState] {
        &self.samples
    }

    /// `Φ(0)`.
    pub fn initial(&self) -> &ModalState {
        self.samples.last().expect("history has at least one sample")
    }

    /// Sample at `s = k Δt`, `-steps <= k <= 0`.
    pub fn at_index(&self, k: isize) -> Option<&ModalState> {
        let i = self.steps() as isize + k;
        if i < 0 || k > 0 {
            None
        } else {
            self.samples.get(i as usize)
        }
    }
}

/// Impulse instants `t_1 < … < t_p` in `(0, τ)` and their maps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImpulseSchedule {
    pub times: Vec<f64>,
    pub maps: Vec<ImpulseMap>,
}

impl ImpulseSchedule {
    pub fn new(times: Vec<f64>, maps: Vec<ImpulseMap>) -> Result<Self> {
        check_dim(times.len(), maps.len())?;
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("impulse times must be strictly increasing".into()));
        }
        Ok(Self { times, maps })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `t_p`, or 0 without impulses.
    pub fn last_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Grid step of each impulse; every `t_k` must be a multiple of `dt` in `(0, τ)`.
    pub fn step_indices(&self, dt: f64, horizon: f64) -> Result<Vec<usize>> {
        self.times
            .iter()
            .map(|&t| {
                if !(t > 0.0 && t < horizon) {
                    return Err(Error::InvalidParameter(format!(
                        "impulse time {t} must lie in (0, {horizon})"
                    )));
                }
                grid_steps(t, dt).ok_or_else(|| {
                    Error::InvalidParameter(format!("dt = {dt} does not divide impulse time {t}"))
                })
            })
            .collect()
    }
}

/// An impulse as it happened: left limit, evaluated jump and right limit.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseEvent {
    pub step: usize,
    pub time: f64,
    pub jump: DVector<f64>,
    pub before: ModalState,
    pub after: ModalState,
}

/// States at every grid time `k Δt` (right limits at impulse instants),
/// plus the left limits at the impulse steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dt: f64,
    states: Vec<ModalState>,
    left_limits: BTreeMap<usize, ModalState>,
    events: Vec<ImpulseEvent>,
}

impl Trajectory {
    pub fn new(dt: f64, initial: ModalState) -> Self {
        Self { dt, states: vec![initial], left_limits: BTreeMap::new(), events: Vec::new() }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn states(&self) -> &[ModalState] {
        &self.states
    }

    pub fn events(&self) -> &[ImpulseEvent] {
        &self.events
    }

    /// Index of the latest stored state.
    pub fn last_step(&self) -> usize {
        self.states.len() - 1
    }

    pub fn last(&self) -> &ModalState {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub(crate) fn push(&mut self, state: ModalState) {
        self.states.push(state);
    }

    pub(crate) fn record_impulse(&mut self, event: ImpulseEvent) {
        let step = event.step;
        debug_assert_eq!(step, self.last_step());
        self.left_limits.insert(step, event.before.clone());
        self.states[step] = event.after.clone();
        self.events.push(event);
    }

    pub fn state(&self, step: usize, side: Side) -> Option<&ModalState> {
        if side == Side::Left {
            if let Some(s) = self.left_limits.get(&step) {
                return Some(s);
            }
        }
        self.states.get(step)
    }

    pub fn is_jump(&self, step: usize) -> bool {
        self.left_limits.contains_key(&step)
    }
}

/// State at grid index `k` over the combined history/trajectory timeline:
/// `k < 0` reads `Φ(kΔt)`, `k >= 0` reads the trajectory.
pub fn state_at_index<'a>(
    trajectory: &'a Trajectory,
    history: &'a HistorySegment,
    k: isize,
    side: Side,
) -> Result<&'a ModalState> {
    let t = k as f64 * trajectory.dt();
    if k < 0 {
        history.at_index(k).ok_or(Error::TimeOutOfRange {
            t,
            start: -(history.steps() as f64) * history.dt(),
            end: 0.0,
        })
    } else {
        trajectory.state(k as usize, side).ok_or(Error::TimeOutOfRange {
            t,
            start: 0.0,
            end: trajectory.time(trajectory.last_step()),
        })
    }
}

/// `z(t - r)`, read from the history when `t - r <= 0`.
pub fn delayed_state<'a>(
    trajectory: &'a Trajectory,
    history: &'a HistorySegment,
    t: f64,
) -> Result<&'a ModalState> {
    let dt = trajectory.dt();
    let steps = (t / dt).round() as isize;
    let k = steps - history.steps() as isize;
    if k < -(history.steps() as isize) || t < -1e-9 * dt {
        return Err(Error::TimeOutOfRange {
            t: t - history.steps() as f64 * dt,
            start: -(history.steps() as f64) * dt,
            end: trajectory.time(trajectory.last_step()),
        });
    }
    if k == 0 {
        return Ok(history.initial());
    }
    state_at_index(trajectory, history, k, Side::Right)
}
