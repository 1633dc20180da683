//! Steering procedure end to end: validate a configuration, run the base
//! phase to `τ−δ`, synthesize the tail on `[τ−δ, τ]`, finish the run and
//! compare against the linear prediction. Sweeps over `(α, δ)`.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use crate::config::{ExperimentConfig, TargetProfile};
use crate::control::{ControlProfile, ControlSignal};
use crate::controllability::{
    steering_error, synthesize_tail, ControlSystem, GramianData, SteeringWindow, TailControl,
};
use crate::dynamics::{fmt_float, MemorySpec, Model, Simulation, Simulator};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::nonlinearity::{check_growth, MemoryKernel};
use crate::spectral::{build_basis, overlap_matrix, ActuatorRegion, DomainSpec};
use crate::state::{grid_steps, HistorySegment, ImpulseSchedule, ModalState, ModelParams, Trajectory};

/// One broken hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub hypothesis: &'static str,
    pub detail: String,
}

/// Result of [`validate_config`]; empty when the configuration is admissible.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, hypothesis: &'static str, detail: impl Into<String>) {
        self.violations.push(Violation { hypothesis, detail: detail.into() });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "configuration is valid");
        }
        write!(f, "{} violation(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  [{}] {}", v.hypothesis, v.detail)?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

pub const H_MODEL: &str = "model: eta, gamma, r, tau > 0 and r < tau";
pub const H_DOMAIN: &str = "domain: L > 0, N >= 1, grid points >= 4N";
pub const H_ACTUATOR: &str = "actuator: 0 <= a < b <= L";
pub const H_GRID: &str = "grid: dt divides r, tau, every t_k and every delta";
pub const H_IMPULSES: &str = "impulses: 0 < t_1 < ... < t_p < tau, one map per time";
pub const H_WINDOW: &str = "window: 0 < delta < min(tau - t_p, r)";
pub const H_GROWTH: &str = "growth: |f(t,w,v,u)| <= a0 sqrt(w^2 + v^2) + b0";
pub const H_KERNEL: &str = "memory: M bounded on [0,tau]^2, g bounded";
pub const H_PROFILES: &str = "profiles: history, target and base control match N";
pub const H_SOLVER: &str = "solver: node counts and alpha list";

/// Checks every hypothesis the steering procedure relies on.
pub fn validate_config(c: &ExperimentConfig) -> ValidationReport {
    let mut r = ValidationReport::default();
    let m = c.model;
    let pos = |x: f64| x > 0.0 && x.is_finite();
    if !(pos(m.eta) && pos(m.gamma) && pos(m.delay) && pos(m.horizon)) {
        r.push(H_MODEL, format!("eta = {}, gamma = {}, r = {}, tau = {}", m.eta, m.gamma, m.delay, m.horizon));
    } else if m.delay >= m.horizon {
        r.push(H_MODEL, format!("r = {} is not below tau = {}", m.delay, m.horizon));
    }

    let d = c.domain;
    let n = d.modes;
    let grid = d.grid_points.unwrap_or(4 * n);
    if !pos(d.length) || n == 0 || grid < 4 * n {
        r.push(H_DOMAIN, format!("L = {}, N = {n}, grid points = {grid}", d.length));
    }

    let a = c.actuator.a.unwrap_or(0.0);
    let b = c.actuator.b.unwrap_or(d.length);
    if !(a >= 0.0 && a < b && b <= d.length) {
        r.push(H_ACTUATOR, format!("region ({a}, {b}) on [0, {}]", d.length));
    }

    let dt = c.solver.dt;
    if !pos(dt) {
        r.push(H_GRID, format!("dt = {dt} is not positive"));
    } else {
        for (name, x) in [("r", m.delay), ("tau", m.horizon)] {
            if grid_steps(x, dt).is_none() {
                r.push(H_GRID, format!("dt = {dt} does not divide {name} = {x}"));
            }
        }
        for &t in &c.impulses.times {
            if grid_steps(t, dt).is_none() {
                r.push(H_GRID, format!("dt = {dt} does not divide t_k = {t}"));
            }
        }
        for &delta in &c.sweep.deltas {
            if grid_steps(delta, dt).is_none() {
                r.push(H_GRID, format!("dt = {dt} does not divide delta = {delta}"));
            }
        }
    }

    let times = &c.impulses.times;
    if times.len() != c.impulses.maps.len() {
        r.push(H_IMPULSES, format!("{} times but {} maps", times.len(), c.impulses.maps.len()));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        r.push(H_IMPULSES, "impulse times are not strictly increasing");
    }
    for &t in times {
        if !(t > 0.0 && t < m.horizon) {
            r.push(H_IMPULSES, format!("t_k = {t} outside (0, {})", m.horizon));
        }
    }

    let tp = times.last().copied().unwrap_or(0.0);
    for &delta in &c.sweep.deltas {
        let bound = (m.horizon - tp).min(m.delay);
        if !(delta > 0.0 && delta < bound) {
            r.push(H_WINDOW, format!("delta = {delta} not in (0, {bound}) with tau - t_p = {}, r = {}", m.horizon - tp, m.delay));
        }
    }

    let nl = &c.nonlinearity;
    if !(nl.growth.a0 >= 0.0 && nl.growth.b0 >= 0.0 && nl.growth.a0.is_finite() && nl.growth.b0.is_finite()) {
        r.push(H_GROWTH, format!("declared a0 = {}, b0 = {} must be finite and >= 0", nl.growth.a0, nl.growth.b0));
    } else if let Some(v) = check_growth(&nl.f, &nl.growth, m.horizon.max(0.0), nl.probe_seed) {
        r.push(
            H_GROWTH,
            format!(
                "|f({}, {}, {}, {})| = {} exceeds {} (a0 = {}, b0 = {})",
                v.t,
                v.w,
                v.v,
                v.u,
                v.value.abs(),
                v.bound,
                nl.growth.a0,
                nl.growth.b0
            ),
        );
    }

    let kernel_ok = match c.memory.kernel {
        MemoryKernel::Constant { m0 } => m0.is_finite(),
        MemoryKernel::Exponential { m0, kappa } => m0.is_finite() && kappa.is_finite() && kappa >= 0.0,
    };
    if !kernel_ok || !c.memory.g.sup().is_finite() {
        r.push(H_KERNEL, format!("kernel {:?}, g {:?}", c.memory.kernel, c.memory.g));
    }

    if let crate::config::HistoryProfile::Modes { w, v } = &c.history.profile {
        if w.len() > n || v.len() > n {
            r.push(H_PROFILES, format!("history has {} / {} coefficients for N = {n}", w.len(), v.len()));
        }
    }
    match &c.target.profile {
        TargetProfile::Modes { w, v } if w.len() > n || v.len() > n => {
            r.push(H_PROFILES, format!("target has {} / {} coefficients for N = {n}", w.len(), v.len()));
        }
        &TargetProfile::Bump { center, half_width, displacement, velocity } => {
            let finite = [center, half_width, displacement, velocity].iter().all(|x| x.is_finite());
            if !finite || !(half_width > 0.0) || !(0.0..=d.length).contains(&center) {
                r.push(H_PROFILES, format!("bump center {center}, half width {half_width} on [0, {}]", d.length));
            }
        }
        _ => {}
    }
    match c.actuator.base {
        ControlProfile::Constant { mode, .. } | ControlProfile::Sine { mode, .. } if !(1..=n).contains(&mode) => {
            r.push(H_PROFILES, format!("base control mode {mode} outside 1..={n}"));
        }
        _ => {}
    }

    if c.solver.window_nodes < 2 || c.solver.control_nodes < 1 {
        r.push(
            H_SOLVER,
            format!("window_nodes = {}, control_nodes = {}", c.solver.window_nodes, c.solver.control_nodes),
        );
    }
    if c.sweep.alphas.iter().any(|&a| !pos(a)) {
        r.push(H_SOLVER, "every alpha must be positive");
    }
    r
}

/// A validated configuration turned into a ready-to-run model.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    simulator: Simulator,
    system: ControlSystem,
    target: ModalState,
    base: ControlProfile,
}

impl Experiment {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        validate_config(config).into_result()?;
        let c = config;
        let n = c.domain.modes;
        let domain = DomainSpec::new(c.domain.length, c.domain.grid_points.unwrap_or(4 * n));
        let basis = build_basis(domain, n)?;
        let region = ActuatorRegion::new(c.actuator.a.unwrap_or(0.0), c.actuator.b.unwrap_or(c.domain.length))?;
        let overlap = overlap_matrix(&basis, region)?;
        let params = ModelParams::new(c.model.eta, c.model.gamma, c.model.delay, c.model.horizon)?;
        let impulses = ImpulseSchedule::new(c.impulses.times.clone(), c.impulses.maps.clone())?;
        let model = Model {
            basis,
            params,
            overlap: overlap.clone(),
            forcing: c.nonlinearity.f,
            memory: MemorySpec { kernel: c.memory.kernel, g: c.memory.g },
            impulses,
        };
        let stepper = c.solver.stepper();
        let profile = c.history.profile.clone();
        let history = HistorySegment::from_fn(stepper.dt, params.delay, |s| profile.eval(s, n))?;
        let target = c.target.profile.state(&model.basis);
        let simulator = Simulator::new(model, stepper, history)?;
        let system = ControlSystem::new(simulator.semigroup().clone(), overlap)?;
        Ok(Self {
            config: config.clone(),
            simulator,
            system,
            target,
            base: c.actuator.base,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn simulator(&self) -> &Simulator {
        &self.simulator
    }

    pub fn system(&self) -> &ControlSystem {
        &self.system
    }

    pub fn target(&self) -> &ModalState {
        &self.target
    }

    pub fn base_control(&self) -> ControlSignal {
        ControlSignal::base_only(self.base, self.simulator.model().modes())
    }

    /// Runs the base control on `[0, τ]` without steering.
    pub fn simulate(&self) -> Result<Trajectory> {
        self.simulator.run(&self.base_control())
    }

    pub fn window(&self, delta: f64) -> Result<SteeringWindow> {
        let p = self.simulator.model().params;
        let w = SteeringWindow::new(
            p.horizon,
            delta,
            self.config.solver.window_nodes,
            p.delay,
            self.simulator.model().impulses.last_time(),
        )?;
        self.simulator
            .step_of(w.start())
            .ok_or_else(|| Error::InvalidParameter(format!("tau - delta = {} is not a grid time", w.start())))?;
        Ok(w)
    }

    pub fn gramian(&self, delta: f64, exec: Execution) -> Result<GramianData> {
        self.system.assemble_gramian(&self.window(delta)?, exec)
    }

    /// Phase 1 (base control up to `τ−δ`), the Gramian, and the uncontrolled
    /// continuation used as a baseline.
    pub fn prepare(&self, delta: f64, exec: Execution) -> Result<Phase1<'_>> {
        let window = self.window(delta)?;
        let handoff_step = self.simulator.step_of(window.start()).expect("checked by window");
        let clock = Instant::now();
        let mut base = self.simulator.start();
        base.advance(handoff_step, &self.base_control())?;
        let phase1_seconds = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let gramian = self.system.assemble_gramian(&window, exec)?;
        let gramian_seconds = clock.elapsed().as_secs_f64();
        let mut free = base.clone();
        free.advance(self.simulator.horizon_steps(), &self.base_control())?;
        let uncontrolled_error = self.distance_to_target(free.state());
        Ok(Phase1 {
            experiment: self,
            window,
            handoff_step,
            base,
            gramian,
            uncontrolled_error,
            phase1_seconds,
            gramian_seconds,
        })
    }

    fn distance_to_target(&self, z: &ModalState) -> f64 {
        crate::state::energy_norm(&z.sub(&self.target), self.simulator.model().basis.eigenvalues())
    }

    pub fn run_steering(&self, alpha: f64, delta: f64, exec: Execution) -> Result<SteeringOutcome> {
        self.prepare(delta, exec)?.steer(alpha)
    }

    /// Replaces the target state `z₁`.
    pub fn with_target(mut self, target: ModalState) -> Result<Self> {
        crate::error::check_dim(self.simulator.model().modes(), target.modes())?;
        self.target = target;
        Ok(self)
    }

    /// Every `(δ, α)` pair of the configured lists.
    pub fn sweep(&self, exec: Execution) -> Vec<SweepRow> {
        self.sweep_with(&self.config.sweep.alphas, &self.config.sweep.deltas, exec)
    }

    /// Every `(δ, α)` pair; phase 1 and the Gramian are computed once per `δ`.
    /// Failing rows are reported, not propagated.
    pub fn sweep_with(&self, alphas: &[f64], deltas: &[f64], exec: Execution) -> Vec<SweepRow> {
        let prepared = exec::map(exec, deltas, |&d| self.prepare(d, Execution::Sequential));
        let mut jobs = Vec::new();
        for (i, &delta) in deltas.iter().enumerate() {
            for &alpha in alphas {
                jobs.push((i, delta, alpha));
            }
        }
        exec::map(exec, &jobs, |&(i, delta, alpha)| match &prepared[i] {
            Err(e) => SweepRow { alpha, delta, outcome: Err(e.to_string()), timings: Timings::default() },
            Ok(p) => match p.steer(alpha) {
                Ok(o) => SweepRow { alpha, delta, outcome: Ok(o.row), timings: o.timings },
                Err(e) => SweepRow { alpha, delta, outcome: Err(e.to_string()), timings: Timings::default() },
            },
        })
    }
}

/// Base-phase state at the handoff `τ−δ`, shared by every `α`.
#[derive(Debug, Clone)]
pub struct Phase1<'a> {
    experiment: &'a Experiment,
    pub window: SteeringWindow,
    pub handoff_step: usize,
    base: Simulation<'a>,
    pub gramian: GramianData,
    pub uncontrolled_error: f64,
    phase1_seconds: f64,
    gramian_seconds: f64,
}

impl<'a> Phase1<'a> {
    pub fn simulation(&self) -> &Simulation<'a> {
        &self.base
    }

    pub fn handoff_state(&self) -> &ModalState {
        self.base.state()
    }

    /// Phases 2 and 3 for one `α`.
    pub fn steer(&self, alpha: f64) -> Result<SteeringOutcome> {
        let ex = self.experiment;
        let sys = &ex.system;
        let eigs = ex.simulator.model().basis.eigenvalues();
        let clock = Instant::now();
        let tail = synthesize_tail(sys, &self.gramian, self.handoff_state(), &ex.target, alpha)?;
        let control = ControlSignal::with_tail(ex.base, sys.modes(), tail.clone());
        let mut run = self.base.clone();
        run.advance(ex.simulator.horizon_steps(), &control)?;
        let tail_seconds = clock.elapsed().as_secs_f64();

        let z_end = run.state().to_energy(eigs);
        let free = sys.semigroup().apply(self.window.delta, self.handoff_state())?.to_energy(eigs);
        let linear = free + sys.controllability_map_energy(|t| tail.eval(t), &self.window)?;
        let target = ex.target.to_energy(eigs);
        let row = SteeringRow {
            alpha,
            delta: self.window.delta,
            final_error: (&z_end - &target).norm(),
            linear_residual: steering_error(&self.gramian, alpha, tail.residual())?,
            nonlinear_perturbation: (&z_end - &linear).norm(),
            q_min: self.gramian.min_eigenvalue(),
            uncontrolled_error: self.uncontrolled_error,
            target_gap: tail.residual().norm(),
        };
        let tail_lookups = run.delayed_lookups()[self.handoff_step..].iter().copied().max().unwrap_or(isize::MIN);
        Ok(SteeringOutcome {
            row,
            trajectory: run.into_trajectory(),
            tail,
            max_tail_lookup: tail_lookups,
            timings: Timings {
                phase1_seconds: self.phase1_seconds,
                gramian_seconds: self.gramian_seconds,
                tail_seconds,
            },
        })
    }
}

/// One `(α, δ)` result. Norms are `Z^{1/2}` norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringRow {
    pub alpha: f64,
    pub delta: f64,
    /// `‖z(τ) − z₁‖`
    pub final_error: f64,
    /// `‖α(αI+Q)⁻¹ĥ‖`
    pub linear_residual: f64,
    /// `‖z(τ) − y(τ)‖` against the linear prediction `y(τ) = T(δ)z(τ−δ) + G u_α`
    pub nonlinear_perturbation: f64,
    pub q_min: f64,
    /// `‖z(τ) − z₁‖` when the base control is kept on the window
    pub uncontrolled_error: f64,
    /// `‖ĥ‖ = ‖z₁ − T(δ)z(τ−δ)‖`
    pub target_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub phase1_seconds: f64,
    pub gramian_seconds: f64,
    pub tail_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SteeringOutcome {
    pub row: SteeringRow,
    pub trajectory: Trajectory,
    pub tail: TailControl,
    /// Largest trajectory index read through the delay after the handoff.
    pub max_tail_lookup: isize,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub delta: f64,
    pub outcome: std::result::Result<SteeringRow, String>,
    pub timings: Timings,
}

const REPORT_HEADER: [&str; 10] = [
    "alpha",
    "delta",
    "final_error",
    "linear_residual",
    "nonlinear_perturbation",
    "q_min",
    "uncontrolled_error",
    "target_gap",
    "status",
    "message",
];

/// Writes `report.csv`; deterministic for a given configuration.
pub fn write_report<W: std::io::Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(REPORT_HEADER)?;
    for r in rows {
        let mut rec = vec![fmt_float(r.alpha), fmt_float(r.delta)];
        match &r.outcome {
            Ok(s) => {
                rec.extend(
                    [
                        s.final_error,
                        s.linear_residual,
                        s.nonlinear_perturbation,
                        s.q_min,
                        s.uncontrolled_error,
                        s.target_gap,
                    ]
                    .map(fmt_float),
                );
                rec.extend(["ok".to_string(), String::new()]);
            }
            Err(msg) => {
                rec.extend(std::iter::repeat_n(String::new(), 6));
                rec.extend(["failed".to_string(), msg.clone()]);
            }
        }
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_report_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_report(std::fs::File::create(path)?, rows)
}

/// Wall-clock timings, kept apart from `report.csv` so the report stays reproducible.
pub fn write_timings_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut wr = csv::Writer::from_path(path)?;
    wr.write_record(["alpha", "delta", "phase1_seconds", "gramian_seconds", "tail_seconds"])?;
    for r in rows {
        wr.write_record(
            [r.alpha, r.delta, r.timings.phase1_seconds, r.timings.gramian_seconds, r.timings.tail_seconds]
                .map(fmt_float),
        )?;
    }
    wr.flush()?;
    Ok(())
}

/// Writes `index, eigenvalue` in ascending order.
pub fn write_gramian_spectrum<W: std::io::Write>(out: W, gramian: &GramianData) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["index", "eigenvalue"])?;
    for (i, e) in gramian.spectrum().iter().enumerate() {
        wr.write_record([i.to_string(), fmt_float(*e)])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::HistoryProfile;
    use crate::nonlinearity::{Forcing, GrowthBound};

    const LINEAR: &str = r#"
[model]
eta = 1.0
gamma = 1.0
delay = 0.5
horizon = 1.0

[domain]
modes = 4

[history]
profile = { kind = "modes", w = [1.0, -0.5, 0.25, 0.1], v = [0.0, 0.3, 0.0, -0.2] }

[target]
profile = { kind = "modes", w = [0.2, 0.0, -0.1, 0.0], v = [0.5, 0.0, 0.0, 0.1] }

[solver]
dt = 0.01

[sweep]
alphas = [1e-1, 1e-3, 1e-6]
deltas = [0.1]
"#;

    const SEMILINEAR: &str = r#"
[model]
eta = 1.0
gamma = 1.0
delay = 0.4
horizon = 1.0

[domain]
modes = 8

[actuator]
a = 0.5
b = 2.5

[nonlinearity]
f = { kind = "saturated-linear", gain = 0.2, offset = 0.1 }
growth = { a0 = 0.2, b0 = 0.1 }

[memory]
kernel = { kind = "exponential", m0 = 0.5, kappa = 1.0 }
g = { kind = "sin", amplitude = 0.3 }

[impulses]
times = [0.5]
maps = [{ kind = "proportional", gain = -0.5, clip = 0.3 }]

[history]
profile = { kind = "sine-mode", mode = 2, amplitude = 0.5, frequency = 1.0 }

[target]
profile = { kind = "bump", center = 1.5, half_width = 0.8, displacement = 0.0, velocity = 1.0 }

[solver]
dt = 0.01

[sweep]
alphas = [1e-2, 1e-4]
deltas = [0.25, 0.1, 0.04]
"#;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(text).unwrap()
    }

    fn hypotheses(c: &ExperimentConfig) -> Vec<&'static str> {
        validate_config(c).violations.iter().map(|v| v.hypothesis).collect()
    }

    #[test]
    fn shipped_examples_validate() {
        assert!(validate_config(&cfg(LINEAR)).is_ok());
        assert!(validate_config(&cfg(SEMILINEAR)).is_ok());
    }

    #[test]
    fn window_equal_to_delay_is_rejected() {
        let mut c = cfg(LINEAR);
        c.sweep.deltas = vec![0.5];
        assert_eq!(hypotheses(&c), vec![H_WINDOW]);
    }

    #[test]
    fn impulse_inside_window_is_rejected() {
        let mut c = cfg(SEMILINEAR);
        c.impulses.times = vec![0.8];
        c.sweep.deltas = vec![0.25];
        assert_eq!(hypotheses(&c), vec![H_WINDOW]);
    }

    #[test]
    fn growth_violation_is_rejected() {
        let mut c = cfg(LINEAR);
        c.nonlinearity.f = Forcing::Quadratic { coefficient: 1.0 };
        c.nonlinearity.growth = GrowthBound { a0: 1.0, b0: 1.0 };
        assert_eq!(hypotheses(&c), vec![H_GROWTH]);
        let mut c = cfg(LINEAR);
        c.nonlinearity.f = Forcing::SaturatedLinear { gain: 0.5, offset: 0.2 };
        c.nonlinearity.growth = GrowthBound { a0: 0.5, b0: 0.2 };
        assert!(validate_config(&c).is_ok());
        c.nonlinearity.growth = GrowthBound { a0: 0.4, b0: 0.2 };
        assert_eq!(hypotheses(&c), vec![H_GROWTH]);
    }

    #[test]
    fn grid_and_profile_violations_are_named() {
        let mut c = cfg(LINEAR);
        c.solver.dt = 0.03;
        c.history.profile = HistoryProfile::Modes { w: vec![0.0; 5], v: vec![] };
        c.sweep.alphas = vec![-1.0];
        let h = hypotheses(&c);
        assert!(h.contains(&H_GRID) && h.contains(&H_PROFILES) && h.contains(&H_SOLVER));
        let e = Experiment::from_config(&c).unwrap_err();
        assert!(matches!(e, Error::Validation(_)));
        assert!(e.to_string().contains(H_GRID));
    }

    #[test]
    fn linear_final_error_equals_residual() {
        let ex = Experiment::from_config(&cfg(LINEAR)).unwrap();
        for alpha in [1e-1, 1e-3, 1e-6] {
            let o = ex.run_steering(alpha, 0.1, Execution::Sequential).unwrap();
            let r = o.row;
            assert!((r.final_error - r.linear_residual).abs() < 1e-8, "{r:?}");
            assert!(r.nonlinear_perturbation < 1e-8);
        }
        let r = ex.run_steering(1e-6, 0.1, Execution::Sequential).unwrap().row;
        assert!(r.final_error <= 1e-6 / (1e-6 + r.q_min) * r.target_gap);
    }

    #[test]
    fn free_target_needs_no_tail() {
        let ex = Experiment::from_config(&cfg(LINEAR)).unwrap();
        let p = ex.prepare(0.1, Execution::Sequential).unwrap();
        let free = ex.system().semigroup().apply(0.1, p.handoff_state()).unwrap();
        let ex = ex.with_target(free).unwrap();
        let o = ex.run_steering(1e-3, 0.1, Execution::Sequential).unwrap();
        assert!(o.row.target_gap < 1e-15);
        assert!(o.tail.eval(0.95).amax() < 1e-12);
        let plain = ex.simulate().unwrap();
        assert!((&o.trajectory.last().v - &plain.last().v).amax() < 1e-12);
    }

    #[test]
    fn sweep_columns_behave() {
        let ex = Experiment::from_config(&cfg(SEMILINEAR)).unwrap();
        let rows = ex.sweep(Execution::default());
        assert_eq!(rows.len(), 6);
        let ok: Vec<SteeringRow> = rows.iter().map(|r| r.outcome.clone().unwrap()).collect();
        for r in &ok {
            assert!(r.final_error <= r.linear_residual + r.nonlinear_perturbation + 1e-9);
        }
        // alpha descending at fixed delta
        for pair in ok.chunks(2) {
            assert!(pair[1].linear_residual <= pair[0].linear_residual);
        }
        // delta descending at fixed alpha
        let pert: Vec<f64> = ok.iter().step_by(2).map(|r| r.nonlinear_perturbation).collect();
        assert!(pert[0] > pert[1] && pert[1] > pert[2], "{pert:?}");
        let single = ex.sweep_with(&[1e-3], &[0.1], Execution::Sequential);
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn rows_share_phase_one() {
        let ex = Experiment::from_config(&cfg(SEMILINEAR)).unwrap();
        let p = ex.prepare(0.1, Execution::Sequential).unwrap();
        let a = p.steer(1e-2).unwrap();
        let b = p.steer(1e-4).unwrap();
        let fresh = ex.prepare(0.1, Execution::Sequential).unwrap();
        let k = p.handoff_step;
        assert_eq!(a.trajectory.states()[..=k], b.trajectory.states()[..=k]);
        assert_eq!(a.trajectory.states()[..=k], *fresh.simulation().trajectory().states());
        assert!(a.max_tail_lookup <= k as isize);
    }

    #[test]
    fn failing_rows_do_not_abort_the_sweep() {
        let ex = Experiment::from_config(&cfg(SEMILINEAR)).unwrap();
        let rows = ex.sweep_with(&[1e-3], &[0.1, 0.4], Execution::Sequential);
        assert!(rows[0].outcome.is_ok());
        assert!(rows[1].outcome.is_err());
        let mut buf = Vec::new();
        write_report(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(2).unwrap().contains(",failed,"));
    }

    #[test]
    fn reports_are_reproducible() {
        let ex = Experiment::from_config(&cfg(SEMILINEAR)).unwrap();
        let bytes = |exec| {
            let mut buf = Vec::new();
            write_report(&mut buf, &ex.sweep(exec)).unwrap();
            buf
        };
        let a = bytes(Execution::Sequential);
        assert_eq!(a, bytes(Execution::Sequential));
        assert_eq!(a, bytes(Execution::Parallel));
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("alpha,delta,final_error,"));
        assert!(text.contains("1.0000000000000000e-2,2.5000000000000000e-1,"));
    }

    #[test]
    fn spectrum_dump_is_sorted() {
        let ex = Experiment::from_config(&cfg(SEMILINEAR)).unwrap();
        let g = ex.gramian(0.1, Execution::Sequential).unwrap();
        let mut buf = Vec::new();
        write_gramian_spectrum(&mut buf, &g).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let values: Vec<f64> =
            text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert_eq!(values.len(), 16);
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
    }
}
