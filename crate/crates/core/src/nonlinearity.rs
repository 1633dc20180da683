//! Built-in registry for the forcing `f`, the memory nonlinearity `g`, the
//! memory kernel `M` and the impulse maps `I_k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// `f(t, w(t−r), w_t(t−r), u(t))`, evaluated pointwise in `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Forcing {
    #[default]
    Zero,
    /// `gain (tanh w + tanh v)/√2 + offset cos t`
    SaturatedLinear { gain: f64, offset: f64 },
    /// `gain (tanh w + tanh v)/√2 + offset cos(t) tanh(u)`
    ControlCoupled { gain: f64, offset: f64 },
    /// `coefficient w²`; violates any linear growth bound.
    Quadratic { coefficient: f64 },
}

impl Forcing {
    pub fn eval(&self, t: f64, w: f64, v: f64, u: f64) -> f64 {
        match *self {
            Forcing::Zero => 0.0,
            Forcing::SaturatedLinear { gain, offset } => {
                gain * (w.tanh() + v.tanh()) * std::f64::consts::FRAC_1_SQRT_2 + offset * t.cos()
            }
            Forcing::ControlCoupled { gain, offset } => {
                gain * (w.tanh() + v.tanh()) * std::f64::consts::FRAC_1_SQRT_2
                    + offset * t.cos() * u.tanh()
            }
            Forcing::Quadratic { coefficient } => coefficient * w * w,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }

    /// Growth constants `(a₀, b₀)` that the shipped bounded entries satisfy.
    pub fn natural_growth(&self) -> Option<GrowthBound> {
        match *self {
            Forcing::Zero => Some(GrowthBound { a0: 0.0, b0: 0.0 }),
            Forcing::SaturatedLinear { gain, offset } | Forcing::ControlCoupled { gain, offset } => {
                Some(GrowthBound { a0: gain.abs(), b0: offset.abs() })
            }
            Forcing::Quadratic { .. } => None,
        }
    }
}

/// Declared constants of `|f(t,w,v,u)| ≤ a₀√(w²+v²) + b₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthBound {
    pub a0: f64,
    pub b0: f64,
}

impl GrowthBound {
    pub fn bound(&self, w: f64, v: f64) -> f64 {
        self.a0 * w.hypot(v) + self.b0
    }
}

/// Worst probe found while checking a growth bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthViolation {
    pub t: f64,
    pub w: f64,
    pub v: f64,
    pub u: f64,
    pub value: f64,
    pub bound: f64,
}

/// Number of random points in the growth probe set.
pub const GROWTH_PROBES: usize = 4096;

/// Samples `f` on a seeded probe set spanning several magnitudes and
/// returns the worst violation of the declared bound beyond `1e-9`.
pub fn check_growth(f: &Forcing, growth: &GrowthBound, horizon: f64, seed: u64) -> Option<GrowthViolation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales = [1e-3, 1.0, 10.0, 1e3];
    let mut worst: Option<GrowthViolation> = None;
    for i in 0..GROWTH_PROBES {
        let s = scales[i % scales.len()];
        let t = rng.random_range(0.0..=horizon);
        let w = rng.random_range(-s..=s);
        let v = rng.random_range(-s..=s);
        let u = rng.random_range(-s..=s);
        let value = f.eval(t, w, v, u);
        let bound = growth.bound(w, v);
        let excess = value.abs() - bound;
        if !value.is_finite() || excess > 1e-9 {
            let better = worst.is_none_or(|p| excess > p.value.abs() - p.bound);
            if better {
                worst = Some(GrowthViolation { t, w, v, u, value, bound });
            }
        }
    }
    worst
}

/// `g` in the memory integrand `M(t,s) g(w(s−r, x))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MemoryNonlinearity {
    #[default]
    Zero,
    Sin { amplitude: f64 },
    Tanh { amplitude: f64 },
    Constant { value: f64 },
}

impl MemoryNonlinearity {
    pub fn eval(&self, w: f64) -> f64 {
        match *self {
            MemoryNonlinearity::Zero => 0.0,
            MemoryNonlinearity::Sin { amplitude } => amplitude * w.sin(),
            MemoryNonlinearity::Tanh { amplitude } => amplitude * w.tanh(),
            MemoryNonlinearity::Constant { value } => value,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, MemoryNonlinearity::Zero)
    }

    /// `sup |g|`.
    pub fn sup(&self) -> f64 {
        match *self {
            MemoryNonlinearity::Zero => 0.0,
            MemoryNonlinearity::Sin { amplitude } | MemoryNonlinearity::Tanh { amplitude } => amplitude.abs(),
            MemoryNonlinearity::Constant { value } => value.abs(),
        }
    }
}

/// Scalar memory kernel `M(t, s)`, used for `s ≤ t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MemoryKernel {
    Constant { m0: f64 },
    /// `m0 e^{−κ(t−s)}`
    Exponential { m0: f64, kappa: f64 },
}

impl Default for MemoryKernel {
    fn default() -> Self {
        MemoryKernel::Constant { m0: 0.0 }
    }
}

impl MemoryKernel {
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        match *self {
            MemoryKernel::Constant { m0 } => m0,
            MemoryKernel::Exponential { m0, kappa } => m0 * (-kappa * (t - s)).exp(),
        }
    }

    /// `‖M‖_∞` over `0 ≤ s ≤ t ≤ τ`.
    pub fn sup_norm(&self, horizon: f64) -> f64 {
        match *self {
            MemoryKernel::Constant { m0 } => m0.abs(),
            MemoryKernel::Exponential { m0, kappa } => m0.abs() * (-kappa * horizon).exp().max(1.0),
        }
    }
}

/// Jump `I_k(t, w, v, u)` added to the velocity at an impulse instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ImpulseMap {
    ConstantKick { amplitude: f64 },
    /// `clamp(gain · v, −clip, clip)`
    Proportional { gain: f64, clip: f64 },
}

impl ImpulseMap {
    pub fn eval(&self, _t: f64, _w: f64, v: f64, _u: f64) -> f64 {
        match *self {
            ImpulseMap::ConstantKick { amplitude } => amplitude,
            ImpulseMap::Proportional { gain, clip } => (gain * v).clamp(-clip.abs(), clip.abs()),
        }
    }
}
