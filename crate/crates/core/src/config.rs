//! TOML experiment configuration.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::control::ControlProfile;
use crate::controllability::DEFAULT_WINDOW_NODES;
use crate::dynamics::{MemoryQuadrature, Scheme, SolverConfig};
use crate::error::{Error, Result};
use crate::nonlinearity::{Forcing, GrowthBound, ImpulseMap, MemoryKernel, MemoryNonlinearity};
use crate::quadrature::GaussLegendre;
use crate::spectral::SpectralBasis;
use crate::state::ModalState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub domain: DomainSection,
    #[serde(default)]
    pub actuator: ActuatorSection,
    #[serde(default)]
    pub nonlinearity: NonlinearitySection,
    #[serde(default)]
    pub memory: MemorySection,
    #[serde(default)]
    pub impulses: ImpulseSection,
    #[serde(default)]
    pub history: HistorySection,
    #[serde(default)]
    pub target: TargetSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub eta: f64,
    pub gamma: f64,
    pub delay: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(default = "default_length")]
    pub length: f64,
    pub modes: usize,
    /// Collocation points; defaults to `4 · modes`.
    pub grid_points: Option<usize>,
}

fn default_length() -> f64 {
    std::f64::consts::PI
}

/// Control region `(a, b)`; the whole interval when omitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ActuatorSection {
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// Control applied before the steering window.
    #[serde(default)]
    pub base: ControlProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySection {
    #[serde(default)]
    pub f: Forcing,
    /// Declared `(a₀, b₀)`; checked against `f` on a random probe set.
    pub growth: GrowthBound,
    #[serde(default = "default_seed")]
    pub probe_seed: u64,
}

fn default_seed() -> u64 {
    0x5eed
}

impl Default for NonlinearitySection {
    fn default() -> Self {
        Self { f: Forcing::Zero, growth: GrowthBound { a0: 0.0, b0: 0.0 }, probe_seed: default_seed() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MemorySection {
    #[serde(default)]
    pub kernel: MemoryKernel,
    #[serde(default)]
    pub g: MemoryNonlinearity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ImpulseSection {
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default)]
    pub maps: Vec<ImpulseMap>,
}

/// Initial history `Φ(s)`, `s ∈ [−r, 0]`, in modal coefficients (modes 1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HistoryProfile {
    /// Constant in time.
    Modes { w: Vec<f64>, v: Vec<f64> },
    /// `w_m(s) = A cos(ωs)`, `v_m(s) = −Aω sin(ωs)`.
    SineMode { mode: usize, amplitude: f64, frequency: f64 },
}

impl Default for HistoryProfile {
    fn default() -> Self {
        HistoryProfile::SineMode { mode: 1, amplitude: 1.0, frequency: 1.0 }
    }
}

impl HistoryProfile {
    pub fn eval(&self, s: f64, modes: usize) -> ModalState {
        match self {
            HistoryProfile::Modes { w, v } => ModalState {
                w: DVector::from_fn(modes, |j, _| w.get(j).copied().unwrap_or(0.0)),
                v: DVector::from_fn(modes, |j, _| v.get(j).copied().unwrap_or(0.0)),
            },
            &HistoryProfile::SineMode { mode, amplitude, frequency } => {
                let mut z = ModalState::zeros(modes);
                if (1..=modes).contains(&mode) {
                    z.w[mode - 1] = amplitude * (frequency * s).cos();
                    z.v[mode - 1] = -amplitude * frequency * (frequency * s).sin();
                }
                z
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct HistorySection {
    #[serde(default)]
    pub profile: HistoryProfile,
}

/// Target state `z₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetProfile {
    #[default]
    Zero,
    Modes { w: Vec<f64>, v: Vec<f64> },
    /// Projection of the fields `displacement · β(x)` and `velocity · β(x)`,
    /// where `β` is the smooth bump `exp(1 − 1/(1 − ρ²))`, `ρ = (x − center)/half_width`.
    Bump { center: f64, half_width: f64, displacement: f64, velocity: f64 },
}

/// `exp(1 − 1/(1 − ρ²))` on `|ρ| < 1`, zero outside; peak value 1.
pub fn bump(x: f64, center: f64, half_width: f64) -> f64 {
    let r = (x - center) / half_width;
    if r.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

impl TargetProfile {
    pub fn state(&self, basis: &SpectralBasis) -> ModalState {
        let modes = basis.modes();
        match self {
            TargetProfile::Zero => ModalState::zeros(modes),
            TargetProfile::Modes { w, v } => ModalState {
                w: DVector::from_fn(modes, |j, _| w.get(j).copied().unwrap_or(0.0)),
                v: DVector::from_fn(modes, |j, _| v.get(j).copied().unwrap_or(0.0)),
            },
            &TargetProfile::Bump { center, half_width, displacement, velocity } => {
                let profile = fine_projection(basis, |x| bump(x, center, half_width));
                ModalState { w: &profile * displacement, v: &profile * velocity }
            }
        }
    }
}

/// `∫ f φ_j` by composite Gauss–Legendre, accurate for compactly supported `f`.
fn fine_projection<F: Fn(f64) -> f64>(basis: &SpectralBasis, f: F) -> DVector<f64> {
    let rule = GaussLegendre::new(16);
    let panels = 64 * basis.modes().max(4);
    let h = basis.length() / panels as f64;
    DVector::from_fn(basis.modes(), |j, _| {
        (0..panels)
            .map(|p| rule.integrate(p as f64 * h, (p + 1) as f64 * h, |x| f(x) * basis.eigenfunction(j, x)))
            .sum()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    #[serde(default)]
    pub profile: TargetProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub memory_quadrature: MemoryQuadrature,
    #[serde(default = "default_control_nodes")]
    pub control_nodes: usize,
    #[serde(default = "default_window_nodes")]
    pub window_nodes: usize,
}

impl SolverSection {
    pub fn stepper(&self) -> SolverConfig {
        SolverConfig {
            dt: self.dt,
            scheme: self.scheme,
            memory_quadrature: self.memory_quadrature,
            control_nodes: self.control_nodes,
        }
    }
}

fn default_control_nodes() -> usize {
    4
}

fn default_window_nodes() -> usize {
    DEFAULT_WINDOW_NODES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default = "default_output")]
    pub output_dir: String,
}

fn default_alphas() -> Vec<f64> {
    vec![1e-2, 1e-4, 1e-6]
}

fn default_output() -> String {
    "out".into()
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { alphas: default_alphas(), deltas: Vec::new(), output_dir: default_output() }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }
}
