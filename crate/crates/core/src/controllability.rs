//! Controllability map `G_{τδ}`, its adjoint, the Gramian `Q_{τδ} = G G*`,
//! the regularized right inverse `G*(αI + Q)⁻¹` and the steering error.
//!
//! All operators act on energy coordinates `(√λ_j w_j, v_j)` (see
//! [`ModalState::to_energy`]), where the `Z^{1/2}` inner product is Euclidean
//! and adjoints are transposes.

use nalgebra::{Cholesky, DMatrix, DVector, Matrix2};

use crate::control::ControlProfile;
use crate::error::{check_dim, Error, Result};
use crate::exec::{self, Execution};
use crate::quadrature::GaussLegendre;
use crate::semigroup::Semigroup;
use crate::spectral::OverlapMatrix;
use crate::state::ModalState;

/// Default Gauss–Legendre node count per steering window.
pub const DEFAULT_WINDOW_NODES: usize = 64;

/// Steering window `[τ−δ, τ]` with its quadrature resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringWindow {
    pub horizon: f64,
    pub delta: f64,
    pub nodes: usize,
}

impl SteeringWindow {
    /// Checks `0 < δ < min{τ − t_p, r}`.
    pub fn new(horizon: f64, delta: f64, nodes: usize, delay: f64, last_impulse: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("window length delta = {delta} must be positive")));
        }
        if !(delta < delay) {
            return Err(Error::InvalidParameter(format!("delta = {delta} must be below the delay r = {delay}")));
        }
        if !(delta < horizon - last_impulse) {
            return Err(Error::InvalidParameter(format!(
                "delta = {delta} must be below tau - t_p = {}",
                horizon - last_impulse
            )));
        }
        if nodes < 2 {
            return Err(Error::InvalidParameter(format!("window quadrature needs at least 2 nodes, got {nodes}")));
        }
        Ok(Self { horizon, delta, nodes })
    }

    /// `τ − δ`.
    pub fn start(&self) -> f64 {
        self.horizon - self.delta
    }

    pub fn contains(&self, t: f64) -> bool {
        let tol = 1e-12 * self.horizon.max(1.0);
        t >= self.start() - tol && t <= self.horizon + tol
    }

    fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange { t, start: self.start(), end: self.horizon })
        }
    }
}

/// `𝔹_ϖ u = (0, O u)`.
pub fn input_map(u: &DVector<f64>, overlap: &OverlapMatrix) -> Result<ModalState> {
    check_dim(overlap.modes(), u.len())?;
    Ok(ModalState { w: DVector::zeros(u.len()), v: overlap.matrix() * u })
}

/// The linear controlled system `z' = 𝔸z + 𝔹_ϖ u`.
#[derive(Debug, Clone)]
pub struct ControlSystem {
    semigroup: Semigroup,
    overlap: OverlapMatrix,
}

impl ControlSystem {
    pub fn new(semigroup: Semigroup, overlap: OverlapMatrix) -> Result<Self> {
        check_dim(semigroup.modes(), overlap.modes())?;
        Ok(Self { semigroup, overlap })
    }

    pub fn semigroup(&self) -> &Semigroup {
        &self.semigroup
    }

    pub fn overlap(&self) -> &OverlapMatrix {
        &self.overlap
    }

    pub fn modes(&self) -> usize {
        self.semigroup.modes()
    }

    fn eigenvalues(&self) -> &[f64] {
        self.semigroup.eigenvalues()
    }

    /// `𝔹* T*(τ−t) x̂` for an energy-coordinate vector `x̂`.
    fn adjoint_energy(&self, x: &DVector<f64>, t: f64, window: &SteeringWindow) -> Result<DVector<f64>> {
        let blocks = self.semigroup.energy_blocks((window.horizon - t).max(0.0))?;
        Ok(self.adjoint_with_blocks(&blocks, x))
    }

    fn adjoint_with_blocks(&self, blocks: &[Matrix2<f64>], x: &DVector<f64>) -> DVector<f64> {
        let n = blocks.len();
        let vpart = DVector::from_fn(n, |j, _| blocks[j][(0, 1)] * x[j] + blocks[j][(1, 1)] * x[n + j]);
        self.overlap.matrix() * vpart
    }

    /// `T(σ) 𝔹 u` in energy coordinates.
    fn forward_with_blocks(&self, blocks: &[Matrix2<f64>], u: &DVector<f64>) -> DVector<f64> {
        let n = blocks.len();
        let ou = self.overlap.matrix() * u;
        let mut out = DVector::zeros(2 * n);
        for j in 0..n {
            out[j] = blocks[j][(0, 1)] * ou[j];
            out[n + j] = blocks[j][(1, 1)] * ou[j];
        }
        out
    }

    /// `G*_{τδ} z` evaluated at `t ∈ [τ−δ, τ]`.
    pub fn adjoint_map(&self, z: &ModalState, t: f64, window: &SteeringWindow) -> Result<DVector<f64>> {
        window.check(t)?;
        check_dim(self.modes(), z.modes())?;
        self.adjoint_energy(&z.to_energy(self.eigenvalues()), t, window)
    }

    /// `G_{τδ} u = ∫_{τ−δ}^{τ} T(τ−s) 𝔹 u(s) ds` by Gauss–Legendre quadrature,
    /// in energy coordinates.
    pub fn controllability_map_energy<F>(&self, u: F, window: &SteeringWindow) -> Result<DVector<f64>>
    where
        F: Fn(f64) -> DVector<f64>,
    {
        let rule = GaussLegendre::new(window.nodes);
        let mut acc = DVector::zeros(2 * self.modes());
        for (s, weight) in rule.on_interval(window.start(), window.horizon) {
            let us = u(s);
            check_dim(self.modes(), us.len())?;
            let blocks = self.semigroup.energy_blocks(window.horizon - s)?;
            acc += self.forward_with_blocks(&blocks, &us) * weight;
        }
        Ok(acc)
    }

    pub fn controllability_map<F>(&self, u: F, window: &SteeringWindow) -> Result<ModalState>
    where
        F: Fn(f64) -> DVector<f64>,
    {
        let x = self.controllability_map_energy(u, window)?;
        Ok(ModalState::from_energy(&x, self.eigenvalues()))
    }

    /// `Q = Σ_k ω_k T(τ−t_k) 𝔹𝔹* T*(τ−t_k)`, symmetrized.
    pub fn assemble_gramian(&self, window: &SteeringWindow, exec: Execution) -> Result<GramianData> {
        if window.nodes < 2 {
            return Err(Error::InvalidParameter(format!(
                "window quadrature needs at least 2 nodes, got {}",
                window.nodes
            )));
        }
        let rule = GaussLegendre::new(window.nodes);
        let nodes: Vec<(f64, f64)> = rule.on_interval(window.start(), window.horizon).collect();
        let n = self.modes();
        let o = self.overlap.matrix();
        let partials = exec::map(exec, &nodes, |&(s, weight)| -> Result<DMatrix<f64>> {
            let blocks = self.semigroup.energy_blocks(window.horizon - s)?;
            // columns of T(σ)𝔹 for unit inputs: 2N × N
            let m = DMatrix::from_fn(2 * n, n, |i, k| {
                if i < n {
                    blocks[i][(0, 1)] * o[(i, k)]
                } else {
                    blocks[i - n][(1, 1)] * o[(i - n, k)]
                }
            });
            Ok(&m * m.transpose() * weight)
        });
        let mut q = DMatrix::zeros(2 * n, 2 * n);
        for p in partials {
            q += p?;
        }
        let q = (&q + q.transpose()) * 0.5;
        Ok(GramianData { q, window: *window })
    }
}

/// The Gramian over one steering window.
#[derive(Debug, Clone, PartialEq)]
pub struct GramianData {
    pub q: DMatrix<f64>,
    pub window: SteeringWindow,
}

impl GramianData {
    pub fn from_matrix(q: DMatrix<f64>, window: SteeringWindow) -> Self {
        Self { q, window }
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// Eigenvalues in ascending order.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.q.symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum().first().copied().unwrap_or(0.0)
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.q - self.q.transpose()).amax()
    }
}

/// Solves `(αI + Q) x = rhs` by Cholesky factorization.
pub fn regularized_solve(gramian: &GramianData, alpha: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    check_dim(gramian.dim(), rhs.len())?;
    let n = gramian.dim();
    let a = &gramian.q + DMatrix::identity(n, n) * alpha;
    let chol = Cholesky::new(a.clone()).ok_or_else(|| Error::Factorization {
        alpha,
        min_eigenvalue: gramian.min_eigenvalue(),
    })?;
    let mut x = chol.solve(rhs);
    let target = 1e-10 * rhs.norm();
    for _ in 0..2 {
        let r = rhs - &a * &x;
        if r.norm() <= target {
            break;
        }
        x += chol.solve(&r);
    }
    Ok(x)
}

/// `‖α(αI + Q)⁻¹ ĥ‖`, the `Z^{1/2}` distance left by the regularized control.
pub fn steering_error(gramian: &GramianData, alpha: f64, residual: &DVector<f64>) -> Result<f64> {
    Ok((regularized_solve(gramian, alpha, residual)? * alpha).norm())
}

/// Tail control `u_α(t) = 𝔹*T*(τ−t) (αI+Q)⁻¹ ĥ`, evaluated on demand from
/// the stored generator.
#[derive(Debug, Clone)]
pub struct TailControl {
    system: ControlSystem,
    window: SteeringWindow,
    alpha: f64,
    residual: DVector<f64>,
    solved: DVector<f64>,
    auxiliary: Option<Auxiliary>,
}

#[derive(Debug, Clone)]
struct Auxiliary {
    profile: ControlProfile,
    // (αI+Q)⁻¹ G v
    correction: DVector<f64>,
}

impl TailControl {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn window(&self) -> &SteeringWindow {
        &self.window
    }

    /// `ĥ`, in energy coordinates.
    pub fn residual(&self) -> &DVector<f64> {
        &self.residual
    }

    /// `(αI + Q)⁻¹ ĥ`, in energy coordinates.
    pub fn solved(&self) -> &DVector<f64> {
        &self.solved
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let blocks = self
            .system
            .semigroup
            .energy_blocks((self.window.horizon - t).max(0.0))
            .expect("non-negative time");
        match &self.auxiliary {
            None => self.system.adjoint_with_blocks(&blocks, &self.solved),
            Some(aux) => {
                let dual = &self.solved - &aux.correction;
                self.system.adjoint_with_blocks(&blocks, &dual) + aux.profile.eval(t, self.system.modes())
            }
        }
    }
}

/// Builds the tail that steers `z(τ−δ)` towards `z₁`:
/// `ĥ = z₁ − T(δ) z(τ−δ)`, `u_α = G*(αI+Q)⁻¹ĥ`.
pub fn synthesize_tail(
    system: &ControlSystem,
    gramian: &GramianData,
    handoff: &ModalState,
    target: &ModalState,
    alpha: f64,
) -> Result<TailControl> {
    synthesize_tail_with(system, gramian, handoff, target, alpha, None)
}

/// Variant with an auxiliary control `v`:
/// `u_α = G*(αI+Q)⁻¹ĥ + v − G*(αI+Q)⁻¹ G v`.
pub fn synthesize_tail_with(
    system: &ControlSystem,
    gramian: &GramianData,
    handoff: &ModalState,
    target: &ModalState,
    alpha: f64,
    auxiliary: Option<ControlProfile>,
) -> Result<TailControl> {
    check_dim(system.modes(), handoff.modes())?;
    check_dim(system.modes(), target.modes())?;
    let window = gramian.window;
    let free = system.semigroup.apply(window.delta, handoff)?;
    let residual = target.sub(&free).to_energy(system.eigenvalues());
    let solved = regularized_solve(gramian, alpha, &residual)?;
    let auxiliary = match auxiliary {
        None => None,
        Some(profile) => {
            let n = system.modes();
            let gv = system.controllability_map_energy(|t| profile.eval(t, n), &window)?;
            Some(Auxiliary { profile, correction: regularized_solve(gramian, alpha, &gv)? })
        }
    };
    Ok(TailControl { system: system.clone(), window, alpha, residual, solved, auxiliary })
}

/// Convenience for callers holding energy-coordinate data.
pub fn energy_to_state(x: &DVector<f64>, system: &ControlSystem) -> ModalState {
    ModalState::from_energy(x, system.eigenvalues())
}
