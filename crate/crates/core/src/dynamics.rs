//! Time stepping of the semilinear delayed system
//! `z' = 𝔸z + 𝔹u + ∫₀ᵗ 𝕄_g ds + 𝔽` with impulses.
//!
//! The linear part is propagated exactly by the modal blocks. The forcing
//! `memory + 𝔽` only reads states at `t − r` with `r ≥ Δt`, so its value at the
//! end of a step is known before the step is taken; the exponential Heun
//! scheme interpolates it linearly across the step. The control enters through
//! a per-step Gauss–Legendre rule.

use std::io::Write;
use std::path::Path;

use nalgebra::{DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::control::ControlSignal;
use crate::error::{check_dim, Error, Result};
use crate::nonlinearity::{Forcing, GrowthBound, MemoryKernel, MemoryNonlinearity};
use crate::quadrature::GaussLegendre;
use crate::semigroup::Semigroup;
use crate::spectral::{OverlapMatrix, SpectralBasis};
use crate::state::{
    energy_norm, grid_steps, state_at_index, HistorySegment, ImpulseEvent, ImpulseSchedule, ModalState,
    ModelParams, Side, Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Forcing interpolated linearly across the step (second order).
    #[default]
    ExponentialHeun,
    /// Forcing frozen at the left end of the step (first order).
    ExponentialEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryQuadrature {
    /// Direct composite trapezoid over the whole past, `O(n)` per step.
    #[default]
    Trapezoid,
    /// `O(1)` recursion, exact for kernels of the form `m₀ e^{−κ(t−s)}`.
    ExponentialRecursion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub memory_quadrature: MemoryQuadrature,
    /// Gauss–Legendre nodes per step for the control integral.
    pub control_nodes: usize,
}

impl SolverConfig {
    pub fn new(dt: f64) -> Self {
        Self { dt, scheme: Scheme::default(), memory_quadrature: MemoryQuadrature::default(), control_nodes: 4 }
    }
}

/// Memory integrand `M(t,s) g(w(s−r,x))`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MemorySpec {
    pub kernel: MemoryKernel,
    pub g: MemoryNonlinearity,
}

impl MemorySpec {
    pub fn is_zero(&self) -> bool {
        self.g.is_zero() || matches!(self.kernel, MemoryKernel::Constant { m0 } | MemoryKernel::Exponential { m0, .. } if m0 == 0.0)
    }
}

/// Everything that defines the controlled semilinear system.
#[derive(Debug, Clone)]
pub struct Model {
    pub basis: SpectralBasis,
    pub params: ModelParams,
    pub overlap: OverlapMatrix,
    pub forcing: Forcing,
    pub memory: MemorySpec,
    pub impulses: ImpulseSchedule,
}

impl Model {
    pub fn semigroup(&self) -> Semigroup {
        Semigroup::new(self.basis.eigenvalues(), self.params.eta, self.params.gamma)
    }

    pub fn modes(&self) -> usize {
        self.basis.modes()
    }
}

/// Per-mode second columns of `φ₁ = ∫₀^Δt e^{Rs} ds` and
/// `φ₂ = ∫₀^Δt e^{Rs}(Δt−s)/Δt ds`.
#[derive(Debug, Clone)]
struct ForcingWeights {
    phi1: Vec<[f64; 2]>,
    phi2: Vec<[f64; 2]>,
}

impl ForcingWeights {
    fn new(semigroup: &Semigroup, dt: f64) -> Result<Self> {
        let panels = (semigroup.spectral_radius() * dt).ceil().max(1.0) as usize;
        let rule = GaussLegendre::new(8);
        let n = semigroup.modes();
        let mut phi1 = vec![[0.0; 2]; n];
        let mut phi2 = vec![[0.0; 2]; n];
        let width = dt / panels as f64;
        for p in 0..panels {
            let a = p as f64 * width;
            for (s, w) in rule.on_interval(a, a + width) {
                let blocks = semigroup.plain_blocks(s)?;
                let ramp = (dt - s) / dt;
                for (j, e) in blocks.iter().enumerate() {
                    for i in 0..2 {
                        phi1[j][i] += w * e[(i, 1)];
                        phi2[j][i] += w * ramp * e[(i, 1)];
                    }
                }
            }
        }
        Ok(Self { phi1, phi2 })
    }
}

/// A model bound to a time grid and an initial history.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: Model,
    solver: SolverConfig,
    history: HistorySegment,
    semigroup: Semigroup,
    step_blocks: Vec<Matrix2<f64>>,
    weights: ForcingWeights,
    // (relative node in (0, Δt), weight, e^{R(Δt−σ)} per mode)
    control_rule: Vec<(f64, f64, Vec<Matrix2<f64>>)>,
    delay_steps: usize,
    horizon_steps: usize,
    impulse_steps: Vec<usize>,
}

impl Simulator {
    pub fn new(model: Model, solver: SolverConfig, history: HistorySegment) -> Result<Self> {
        model.params.validate()?;
        let dt = solver.dt;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if solver.control_nodes == 0 {
            return Err(Error::InvalidParameter("control_nodes must be at least 1".into()));
        }
        let delay_steps = grid_steps(model.params.delay, dt)
            .ok_or_else(|| Error::InvalidParameter(format!("dt = {dt} does not divide r = {}", model.params.delay)))?;
        let horizon_steps = grid_steps(model.params.horizon, dt).ok_or_else(|| {
            Error::InvalidParameter(format!("dt = {dt} does not divide tau = {}", model.params.horizon))
        })?;
        if delay_steps == 0 {
            return Err(Error::InvalidParameter("delay must span at least one step".into()));
        }
        if (history.dt() - dt).abs() > 1e-15 * dt || history.steps() != delay_steps {
            return Err(Error::InvalidParameter("history grid does not match the solver grid".into()));
        }
        check_dim(model.modes(), history.initial().modes())?;
        if let MemoryQuadrature::ExponentialRecursion = solver.memory_quadrature {
            if !matches!(model.memory.kernel, MemoryKernel::Exponential { .. } | MemoryKernel::Constant { .. }) {
                return Err(Error::InvalidParameter("recursion needs an exponential kernel".into()));
            }
        }
        let impulse_steps = model.impulses.step_indices(dt, model.params.horizon)?;
        let semigroup = model.semigroup();
        let step_blocks = semigroup.plain_blocks(dt)?;
        let weights = ForcingWeights::new(&semigroup, dt)?;
        let rule = GaussLegendre::new(solver.control_nodes);
        let control_rule = rule
            .on_interval(0.0, dt)
            .map(|(s, w)| Ok((s, w, semigroup.plain_blocks(dt - s)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model,
            solver,
            history,
            semigroup,
            step_blocks,
            weights,
            control_rule,
            delay_steps,
            horizon_steps,
            impulse_steps,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn history(&self) -> &HistorySegment {
        &self.history
    }

    pub fn semigroup(&self) -> &Semigroup {
        &self.semigroup
    }

    pub fn dt(&self) -> f64 {
        self.solver.dt
    }

    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    pub fn horizon_steps(&self) -> usize {
        self.horizon_steps
    }

    /// Grid index of `t`, if `t` is a grid time in `[0, τ]`.
    pub fn step_of(&self, t: f64) -> Option<usize> {
        grid_steps(t, self.dt()).filter(|&k| k <= self.horizon_steps)
    }

    pub fn start(&self) -> Simulation<'_> {
        Simulation {
            sim: self,
            trajectory: Trajectory::new(self.dt(), self.history.initial().clone()),
            memory_samples: Vec::new(),
            memory_values: Vec::new(),
            lookups: Vec::new(),
        }
    }

    /// Integrates on `[0, τ]`.
    pub fn run(&self, control: &ControlSignal) -> Result<Trajectory> {
        let mut s = self.start();
        s.advance(self.horizon_steps, control)?;
        Ok(s.into_trajectory())
    }

    /// `Σ_j c_j φ_j(x)` on the grid.
    fn field(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        self.model.basis.synthesize_field(coeffs).expect("dimension checked")
    }

    fn analyze(&self, samples: &DVector<f64>) -> DVector<f64> {
        self.model.basis.analyze_field(samples).expect("dimension checked")
    }

    /// Jump coefficients `𝕀_k` evaluated pseudo-spectrally on the pre-impulse state.
    pub fn impulse_jump(&self, k: usize, t: f64, before: &ModalState, u: &DVector<f64>) -> DVector<f64> {
        let map = self.model.impulses.maps[k];
        let (w, v, uf) = (self.field(&before.w), self.field(&before.v), self.field(u));
        let samples = DVector::from_fn(w.len(), |m, _| map.eval(t, w[m], v[m], uf[m]));
        self.analyze(&samples)
    }

    /// Maximum over `[0, τ]` of the block-exponential 2-norms in energy coordinates.
    pub fn semigroup_bound(&self) -> Result<f64> {
        let samples = self.horizon_steps.max(1000);
        let mut best: f64 = 1.0;
        for i in 0..=samples {
            let t = self.model.params.horizon * i as f64 / samples as f64;
            for e in self.semigroup.energy_blocks(t)? {
                best = best.max(nalgebra::Matrix2::from(e).singular_values().max());
            }
        }
        Ok(best)
    }
}

/// An in-progress run. Cloning forks the run, which is how one base-phase
/// trajectory is shared by several tails.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    sim: &'a Simulator,
    trajectory: Trajectory,
    // G_i = coefficients of g(w(s_i − r, ·))
    memory_samples: Vec<DVector<f64>>,
    // memory term at each grid node
    memory_values: Vec<DVector<f64>>,
    lookups: Vec<isize>,
}

impl<'a> Simulation<'a> {
    pub fn simulator(&self) -> &'a Simulator {
        self.sim
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.trajectory
    }

    pub fn step(&self) -> usize {
        self.trajectory.last_step()
    }

    pub fn state(&self) -> &ModalState {
        self.trajectory.last()
    }

    /// Largest trajectory index read through the delay while computing
    /// step `n → n+1`, stored at position `n`. History reads are negative.
    pub fn delayed_lookups(&self) -> &[isize] {
        &self.lookups
    }

    fn delayed(&self, n: usize, side: Side, lookup: &mut isize) -> Result<&ModalState> {
        let k = n as isize - self.sim.delay_steps as isize;
        *lookup = (*lookup).max(k);
        if k == 0 {
            return Ok(self.sim.history.initial());
        }
        state_at_index(&self.trajectory, &self.sim.history, k, side)
    }

    fn memory_sample(&mut self, i: usize, lookup: &mut isize) -> Result<()> {
        while self.memory_samples.len() <= i {
            let idx = self.memory_samples.len();
            // w is continuous across impulses, so the side is immaterial
            let w = self.delayed(idx, Side::Right, lookup)?.w.clone();
            let field = self.sim.field(&w);
            let g = self.sim.model.memory.g;
            let sample = self.sim.analyze(&field.map(|x| g.eval(x)));
            self.memory_samples.push(sample);
        }
        Ok(())
    }

    /// `∫₀^{t_n} M(t_n, s) G(s) ds` by composite trapezoid.
    fn memory_at(&mut self, n: usize, lookup: &mut isize) -> Result<DVector<f64>> {
        let modes = self.sim.model.modes();
        if self.sim.model.memory.is_zero() {
            return Ok(DVector::zeros(modes));
        }
        if let Some(m) = self.memory_values.get(n) {
            return Ok(m.clone());
        }
        let dt = self.sim.dt();
        let kernel = self.sim.model.memory.kernel;
        while self.memory_values.len() <= n {
            let k = self.memory_values.len();
            self.memory_sample(k, lookup)?;
            let value = if k == 0 {
                DVector::zeros(modes)
            } else {
                match self.sim.solver.memory_quadrature {
                    MemoryQuadrature::Trapezoid => {
                        let t = k as f64 * dt;
                        let mut acc = &self.memory_samples[0] * (0.5 * kernel.eval(t, 0.0));
                        for i in 1..k {
                            acc += &self.memory_samples[i] * kernel.eval(t, i as f64 * dt);
                        }
                        acc += &self.memory_samples[k] * (0.5 * kernel.eval(t, t));
                        acc * dt
                    }
                    MemoryQuadrature::ExponentialRecursion => {
                        let (m0, kappa) = match kernel {
                            MemoryKernel::Constant { m0 } => (m0, 0.0),
                            MemoryKernel::Exponential { m0, kappa } => (m0, kappa),
                        };
                        let decay = (-kappa * dt).exp();
                        let half = 0.5 * dt * m0;
                        (&self.memory_values[k - 1] + &self.memory_samples[k - 1] * half) * decay
                            + &self.memory_samples[k] * half
                    }
                }
            };
            self.memory_values.push(value);
        }
        Ok(self.memory_values[n].clone())
    }

    /// Velocity forcing `memory + f(t, w(t−r), v(t−r), u(t))` at node `n`.
    fn forcing_at(&mut self, n: usize, side: Side, u: &DVector<f64>, lookup: &mut isize) -> Result<DVector<f64>> {
        let mut out = self.memory_at(n, lookup)?;
        let f = self.sim.model.forcing;
        if !f.is_zero() {
            let t = n as f64 * self.sim.dt();
            let z = self.delayed(n, side, lookup)?;
            let (w, v) = (self.sim.field(&z.w), self.sim.field(&z.v));
            let uf = self.sim.field(u);
            let samples = DVector::from_fn(w.len(), |m, _| f.eval(t, w[m], v[m], uf[m]));
            out += self.sim.analyze(&samples);
        }
        Ok(out)
    }

    /// Advances to grid step `until` under `control`.
    pub fn advance(&mut self, until: usize, control: &ControlSignal) -> Result<()> {
        let sim = self.sim;
        if until > sim.horizon_steps {
            return Err(Error::TimeOutOfRange {
                t: until as f64 * sim.dt(),
                start: 0.0,
                end: sim.model.params.horizon,
            });
        }
        check_dim(sim.model.modes(), control.modes())?;
        let dt = sim.dt();
        let o = sim.overlap_matrix();
        while self.step() < until {
            let n = self.step();
            let t = n as f64 * dt;
            let mut lookup = isize::MIN;
            let z = self.trajectory.state(n, Side::Right).expect("current step").clone();
            let u_now = control.value(t, Side::Right);
            let u_next = control.value(t + dt, Side::Left);
            let f_now = self.forcing_at(n, Side::Right, &u_now, &mut lookup)?;
            let f_next = match sim.solver.scheme {
                Scheme::ExponentialHeun => Some(self.forcing_at(n + 1, Side::Left, &u_next, &mut lookup)?),
                Scheme::ExponentialEuler => None,
            };
            let mut next = ModalState::zeros(z.modes());
            for (j, e) in sim.step_blocks.iter().enumerate() {
                next.w[j] = e[(0, 0)] * z.w[j] + e[(0, 1)] * z.v[j];
                next.v[j] = e[(1, 0)] * z.w[j] + e[(1, 1)] * z.v[j];
            }
            if !control.is_identically_zero() {
                for (s, weight, blocks) in &sim.control_rule {
                    let ou = o * control.value(t + s, Side::Right);
                    for (j, e) in blocks.iter().enumerate() {
                        next.w[j] += weight * e[(0, 1)] * ou[j];
                        next.v[j] += weight * e[(1, 1)] * ou[j];
                    }
                }
            }
            // φ₁F_n + φ₂(F_{n+1} − F_n)
            for j in 0..z.modes() {
                let (p1, p2) = (sim.weights.phi1[j], sim.weights.phi2[j]);
                let slope = f_next.as_ref().map_or(0.0, |f1| f1[j] - f_now[j]);
                next.w[j] += p1[0] * f_now[j] + p2[0] * slope;
                next.v[j] += p1[1] * f_now[j] + p2[1] * slope;
            }
            if !next.is_finite() {
                return Err(Error::NonFinite { t: t + dt, step: n + 1 });
            }
            self.lookups.push(lookup);
            self.trajectory.push(next);
            if let Some(k) = sim.impulse_steps.iter().position(|&s| s == n + 1) {
                let before = self.trajectory.last().clone();
                let time = (n + 1) as f64 * dt;
                let jump = sim.impulse_jump(k, time, &before, &u_next);
                let after = ModalState { w: before.w.clone(), v: &before.v + &jump };
                self.trajectory.record_impulse(ImpulseEvent { step: n + 1, time, jump, before, after });
            }
        }
        Ok(())
    }
}

impl Simulator {
    fn overlap_matrix(&self) -> &nalgebra::DMatrix<f64> {
        self.model.overlap.matrix()
    }
}

/// Gronwall envelope `e(t_n)` for `‖z(t_n)‖`:
/// `max(sup‖Φ‖, M_T(‖Φ(0)‖ + Σ‖𝕀_k‖ + ∫₀ᵗ (b̃ + ‖M‖_∞ ĝ √L s + ‖u‖) ds)) e^{M_T ã t}`
/// with `ã = a₀ max(1, λ₁^{−1/2})`, `b̃ = b₀ √L`, `ĝ = sup|g|`.
pub fn gronwall_envelope(
    sim: &Simulator,
    growth: &GrowthBound,
    trajectory: &Trajectory,
    control: &ControlSignal,
) -> Result<Vec<f64>> {
    let model = sim.model();
    let eigs = model.basis.eigenvalues();
    let length = model.basis.length();
    let mt = sim.semigroup_bound()?;
    let a_tilde = growth.a0 * (1.0 / eigs[0].sqrt()).max(1.0);
    let b_tilde = growth.b0 * length.sqrt();
    let mem = model.memory.kernel.sup_norm(model.params.horizon) * model.memory.g.sup() * length.sqrt();
    let hist_sup = sim.history().samples().iter().map(|s| energy_norm(s, eigs)).fold(0.0, f64::max);
    let jumps: f64 = trajectory.events().iter().map(|e| e.jump.norm()).sum();
    let dt = sim.dt();
    let rule = GaussLegendre::new(4);
    let mut control_integral = 0.0;
    let mut out = Vec::with_capacity(trajectory.states().len());
    for n in 0..trajectory.states().len() {
        let t = n as f64 * dt;
        if n > 0 {
            control_integral += rule.integrate(t - dt, t, |s| control.value(s, Side::Right).norm());
        }
        let jumps_so_far: f64 = trajectory.events().iter().filter(|e| e.step <= n).map(|e| e.jump.norm()).sum();
        debug_assert!(jumps_so_far <= jumps);
        let k = mt * (energy_norm(sim.history().initial(), eigs)
            + jumps_so_far
            + b_tilde * t
            + 0.5 * mem * t * t
            + control_integral);
        out.push(hist_sup.max(k) * (mt * a_tilde * t).exp());
    }
    Ok(out)
}

/// Writes `t, norm, w_1..w_N, v_1..v_N, event`; impulse steps get a
/// `pre` row with the left limit followed by a `post` row.
pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory, eigenvalues: &[f64]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write_trajectory(&mut out, trajectory, eigenvalues)?;
    out.flush()?;
    Ok(())
}

pub fn write_trajectory<W: Write>(out: W, trajectory: &Trajectory, eigenvalues: &[f64]) -> Result<()> {
    let n = eigenvalues.len();
    let mut wr = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "norm".to_string()];
    header.extend((1..=n).map(|j| format!("w_{j}")));
    header.extend((1..=n).map(|j| format!("v_{j}")));
    header.push("event".into());
    wr.write_record(&header)?;
    let row = |t: f64, s: &ModalState, tag: &str| {
        let mut r = vec![fmt_float(t), fmt_float(energy_norm(s, eigenvalues))];
        r.extend(s.w.iter().map(|&x| fmt_float(x)));
        r.extend(s.v.iter().map(|&x| fmt_float(x)));
        r.push(tag.to_string());
        r
    };
    for (k, s) in trajectory.states().iter().enumerate() {
        let t = trajectory.time(k);
        if trajectory.is_jump(k) {
            let before = trajectory.state(k, Side::Left).expect("left limit");
            wr.write_record(row(t, before, "pre"))?;
            wr.write_record(row(t, s, "post"))?;
        } else {
            wr.write_record(row(t, s, ""))?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}
