//! The analytic semigroup `T(t) = Σ_j e^{R_j t} P_j` through closed-form
//! 2×2 modal block exponentials.
//!
//! Mode `j` evolves by `R_j = [[0, 1], [-γλ_j, -ηλ_j^{1/2}]]`. The adjoint is
//! taken in the `Z^{1/2}` inner product `Σ λ_j w_j w'_j + Σ v_j v'_j`, which
//! is the plain transpose once the state is written in energy coordinates
//! `(√λ_j w_j, v_j)`.

use nalgebra::{Complex, DVector, Matrix2};

use crate::error::{check_dim, Error, Result};
use crate::state::ModalState;

/// `|η² − 4γ|` below which the repeated-root formula is used.
pub const CRITICAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingRegime {
    Underdamped,
    Critical,
    Overdamped,
}

impl DampingRegime {
    pub fn classify(eta: f64, gamma: f64) -> Self {
        let d = eta * eta - 4.0 * gamma;
        if d.abs() < CRITICAL_TOLERANCE {
            Self::Critical
        } else if d > 0.0 {
            Self::Overdamped
        } else {
            Self::Underdamped
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalBlock {
    pub index: usize,
    pub lambda: f64,
    pub matrix: Matrix2<f64>,
    pub regime: DampingRegime,
}

impl ModalBlock {
    pub fn new(index: usize, lambda: f64, eta: f64, gamma: f64) -> Self {
        let matrix = Matrix2::new(0.0, 1.0, -gamma * lambda, -eta * lambda.sqrt());
        Self { index, lambda, matrix, regime: DampingRegime::classify(eta, gamma) }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockExponential {
    pub index: usize,
    pub t: f64,
    pub matrix: Matrix2<f64>,
}

/// Roots of `μ² + ηλ^{1/2} μ + γλ = 0`, the eigenvalues of `R_j`.
pub fn block_eigenvalues(lambda: f64, eta: f64, gamma: f64) -> [Complex<f64>; 2] {
    let b = eta * lambda.sqrt();
    let c = gamma * lambda;
    match DampingRegime::classify(eta, gamma) {
        DampingRegime::Critical => {
            let mu = Complex::new(-0.5 * b, 0.0);
            [mu, mu]
        }
        DampingRegime::Overdamped => {
            let sq = (lambda * (eta * eta - 4.0 * gamma)).sqrt();
            let big = -0.5 * (b + sq);
            // Vieta's product avoids cancellation in the small root
            [Complex::new(c / big, 0.0), Complex::new(big, 0.0)]
        }
        DampingRegime::Underdamped => {
            let im = 0.5 * (lambda * (4.0 * gamma - eta * eta)).sqrt();
            [Complex::new(-0.5 * b, im), Complex::new(-0.5 * b, -im)]
        }
    }
}

/// `e^{R t}` for `R = [[0, 1], [-c, -b]]`, writing `R = sI + N` with
/// `s = -b/2` and `N² = q² I`.
pub(crate) fn block_exp_matrix(lambda: f64, eta: f64, gamma: f64, t: f64, regime: DampingRegime) -> Matrix2<f64> {
    let b = eta * lambda.sqrt();
    let c = gamma * lambda;
    let s = -0.5 * b;
    let n = Matrix2::new(0.5 * b, 1.0, -c, -0.5 * b);
    let (even, odd) = match regime {
        DampingRegime::Critical => {
            let e = (s * t).exp();
            (e, e * t)
        }
        DampingRegime::Overdamped => {
            let q = 0.5 * (lambda * (eta * eta - 4.0 * gamma)).sqrt();
            let fast = ((s + q) * t).exp();
            let slow = ((s - q) * t).exp();
            (0.5 * (fast + slow), fast * (-(-2.0 * q * t).exp_m1()) / (2.0 * q))
        }
        DampingRegime::Underdamped => {
            let w = 0.5 * (lambda * (4.0 * gamma - eta * eta)).sqrt();
            let e = (s * t).exp();
            let (sin, cos) = (w * t).sin_cos();
            (e * cos, e * sin / w)
        }
    };
    Matrix2::identity() * even + n * odd
}

/// Per-mode propagators for a fixed set of eigenvalues and `(η, γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Semigroup {
    eigenvalues: Vec<f64>,
    eta: f64,
    gamma: f64,
    regime: DampingRegime,
}

impl Semigroup {
    pub fn new(eigenvalues: &[f64], eta: f64, gamma: f64) -> Self {
        Self {
            eigenvalues: eigenvalues.to_vec(),
            eta,
            gamma,
            regime: DampingRegime::classify(eta, gamma),
        }
    }

    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn regime(&self) -> DampingRegime {
        self.regime
    }

    pub fn block(&self, j: usize) -> ModalBlock {
        ModalBlock::new(j, self.eigenvalues[j], self.eta, self.gamma)
    }

    pub fn block_eigenvalues(&self, j: usize) -> [Complex<f64>; 2] {
        block_eigenvalues(self.eigenvalues[j], self.eta, self.gamma)
    }

    pub fn block_exp(&self, j: usize, t: f64) -> Result<BlockExponential> {
        check_time(t)?;
        Ok(BlockExponential {
            index: j,
            t,
            matrix: block_exp_matrix(self.eigenvalues[j], self.eta, self.gamma, t, self.regime),
        })
    }

    /// All blocks at time `t`, in energy coordinates `(√λ w, v)`.
    pub fn energy_blocks(&self, t: f64) -> Result<Vec<Matrix2<f64>>> {
        check_time(t)?;
        Ok(self
            .eigenvalues
            .iter()
            .map(|&l| to_energy(block_exp_matrix(l, self.eta, self.gamma, t, self.regime), l))
            .collect())
    }

    /// All blocks `e^{R_j t}` at time `t`, acting on `(w_j, v_j)`.
    pub fn plain_blocks(&self, t: f64) -> Result<Vec<Matrix2<f64>>> {
        check_time(t)?;
        Ok(self
            .eigenvalues
            .iter()
            .map(|&l| block_exp_matrix(l, self.eta, self.gamma, t, self.regime))
            .collect())
    }

    /// Largest block eigenvalue modulus, `max_j |μ_j|`.
    pub fn spectral_radius(&self) -> f64 {
        (0..self.modes())
            .flat_map(|j| self.block_eigenvalues(j))
            .map(|m| m.norm())
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, t: f64, z: &ModalState) -> Result<ModalState> {
        check_time(t)?;
        check_dim(self.modes(), z.modes())?;
        let mut out = z.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let e = block_exp_matrix(l, self.eta, self.gamma, t, self.regime);
            let (w, v) = (z.w[j], z.v[j]);
            out.w[j] = e[(0, 0)] * w + e[(0, 1)] * v;
            out.v[j] = e[(1, 0)] * w + e[(1, 1)] * v;
        }
        Ok(out)
    }

    /// `T*(t) z` with respect to the `Z^{1/2}` inner product:
    /// per mode `W⁻¹ e^{R_j t}ᵀ W` with `W = diag(λ_j, 1)`.
    pub fn apply_adjoint(&self, t: f64, z: &ModalState) -> Result<ModalState> {
        check_time(t)?;
        check_dim(self.modes(), z.modes())?;
        let mut out = z.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let e = block_exp_matrix(l, self.eta, self.gamma, t, self.regime);
            let (w, v) = (z.w[j], z.v[j]);
            out.w[j] = e[(0, 0)] * w + e[(1, 0)] / l * v;
            out.v[j] = e[(0, 1)] * l * w + e[(1, 1)] * v;
        }
        Ok(out)
    }

    /// Largest `ω` with every mode decaying like `e^{-ωt}`: the distance of
    /// the rightmost block eigenvalue from the imaginary axis.
    pub fn decay_rate(&self) -> f64 {
        (0..self.modes())
            .map(|j| {
                let [a, b] = self.block_eigenvalues(j);
                -a.re.max(b.re)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// `D E D⁻¹` with `D = diag(√λ, 1)`.
pub(crate) fn to_energy(e: Matrix2<f64>, lambda: f64) -> Matrix2<f64> {
    let s = lambda.sqrt();
    Matrix2::new(e[(0, 0)], s * e[(0, 1)], e[(1, 0)] / s, e[(1, 1)])
}

/// Applies per-mode energy-coordinate blocks to a stacked `[ŵ; v]` vector.
pub fn apply_blocks(blocks: &[Matrix2<f64>], x: &DVector<f64>, transpose: bool) -> DVector<f64> {
    let n = blocks.len();
    let mut out = DVector::zeros(2 * n);
    for (j, e) in blocks.iter().enumerate() {
        let (a, b) = (x[j], x[n + j]);
        let e = if transpose { e.transpose() } else { *e };
        out[j] = e[(0, 0)] * a + e[(0, 1)] * b;
        out[n + j] = e[(1, 0)] * a + e[(1, 1)] * b;
    }
    out
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("semigroup time must be >= 0, got {t}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::expm_oracle::expm_oracle;

    #[test]
    fn eigenvalue_examples() {
        let close = |z: Complex<f64>, re: f64, im: f64| (z.re - re).abs() < 1e-14 && (z.im - im).abs() < 1e-14;
        let [a, b] = block_eigenvalues(1.0, 3.0, 2.0);
        assert!(close(a, -1.0, 0.0) && close(b, -2.0, 0.0));
        let [a, b] = block_eigenvalues(1.0, 2.0, 1.0);
        assert!(close(a, -1.0, 0.0) && close(b, -1.0, 0.0));
        let [a, b] = block_eigenvalues(1.0, 1.0, 1.0);
        let h = 3f64.sqrt() / 2.0;
        assert!(close(a, -0.5, h) && close(b, -0.5, -h));
        // quadratic-formula oracle, all regimes, several λ
        for (eta, gamma) in [(3.0, 2.0), (2.0, 1.0), (1.0, 1.0), (0.3, 5.0)] {
            for lambda in [1.0, 4.0, 37.0] {
                let (b, c) = (eta * f64::sqrt(lambda), gamma * lambda);
                for mu in block_eigenvalues(lambda, eta, gamma) {
                    let p = mu * mu + mu * b + c;
                    assert!(p.norm() < 1e-10 * c, "{eta} {gamma} {lambda}");
                    assert!(mu.re < 0.0);
                }
            }
        }
    }

    #[test]
    fn identity_at_zero() {
        let sg = Semigroup::new(&[1.0, 4.0, 9.0], 1.0, 1.0);
        for j in 0..3 {
            assert_eq!(sg.block_exp(j, 0.0).unwrap().matrix, Matrix2::identity());
        }
        assert!(sg.block_exp(0, -1.0).is_err());
    }

    #[test]
    fn critical_example() {
        let sg = Semigroup::new(&[1.0], 2.0, 1.0);
        let e = sg.block_exp(0, 1.0).unwrap().matrix;
        let expected = Matrix2::new(2.0, 1.0, -1.0, 0.0) * (-1.0f64).exp();
        assert!((e - expected).abs().max() < 1e-15);
        let oracle = expm_oracle(sg.block(0).matrix);
        assert!((e - oracle).abs().max() < 1e-14);
    }

    #[test]
    fn matches_oracle_in_every_regime() {
        for (eta, gamma) in [(3.0, 2.0), (2.0, 1.0), (1.0, 1.0), (2.0, 1.0 - 2.5e-7), (2.0, 1.0 + 2.5e-7)] {
            for lambda in [1.0, 4.0, 25.0] {
                let block = ModalBlock::new(0, lambda, eta, gamma);
                for t in [1e-3, 0.1, 0.7, 2.0, 10.0] {
                    let e = block_exp_matrix(lambda, eta, gamma, t, block.regime);
                    let oracle = expm_oracle(block.matrix * t);
                    let rel = (e - oracle).norm() / oracle.norm();
                    assert!(rel < 1e-12, "eta {eta} gamma {gamma} lambda {lambda} t {t}: {rel:e}");
                }
            }
        }
    }

    #[test]
    fn determinant_follows_trace() {
        let sg = Semigroup::new(&[1.0, 9.0, 64.0], 0.7, 1.3);
        for j in 0..3 {
            for t in [0.0, 0.05, 0.5, 1.0] {
                let e = sg.block_exp(j, t).unwrap().matrix;
                let expected = (sg.block(j).trace() * t).exp();
                assert!((e.determinant() - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn exponential_law_per_block() {
        let sg = Semigroup::new(&[1.0, 4.0, 49.0], 1.5, 0.8);
        for j in 0..3 {
            for (t, s) in [(0.1, 0.3), (0.7, 0.2), (1.0, 1.0)] {
                let lhs = sg.block_exp(j, t + s).unwrap().matrix;
                let rhs = sg.block_exp(j, t).unwrap().matrix * sg.block_exp(j, s).unwrap().matrix;
                assert!((lhs - rhs).abs().max() < 1e-10);
            }
        }
    }

    #[test]
    fn branches_agree_at_the_critical_point() {
        let (lambda, eta) = (3.0, 2.0);
        for (gamma, regime) in [(1.0 - 1e-11, DampingRegime::Overdamped), (1.0 + 1e-11, DampingRegime::Underdamped)] {
            for t in [0.1, 1.0, 5.0] {
                let a = block_exp_matrix(lambda, eta, gamma, t, regime);
                let b = block_exp_matrix(lambda, eta, gamma, t, DampingRegime::Critical);
                assert!((a - b).abs().max() < 1e-9);
            }
        }
    }

    #[test]
    fn adjoint_property() {
        let lambdas: Vec<f64> = (1..=6).map(|j| (j * j) as f64).collect();
        let sg = Semigroup::new(&lambdas, 0.9, 1.7);
        let x = ModalState {
            w: DVector::from_vec(vec![0.3, -1.0, 0.2, 0.05, -0.4, 0.9]),
            v: DVector::from_vec(vec![1.0, 0.5, -0.7, 0.0, 2.0, -0.1]),
        };
        let y = ModalState {
            w: DVector::from_vec(vec![-0.6, 0.2, 0.1, 1.0, 0.3, -0.2]),
            v: DVector::from_vec(vec![0.4, -0.9, 0.3, 0.8, -1.5, 0.6]),
        };
        let ip = |a: &ModalState, b: &ModalState| a.to_energy(&lambdas).dot(&b.to_energy(&lambdas));
        for t in [0.0, 0.3, 1.0] {
            let lhs = ip(&sg.apply(t, &x).unwrap(), &y);
            let rhs = ip(&x, &sg.apply_adjoint(t, &y).unwrap());
            assert!((lhs - rhs).abs() < 1e-10);
        }
        assert_eq!(sg.apply(0.0, &x).unwrap(), x);
    }

    #[test]
    fn energy_blocks_transpose_is_adjoint() {
        let lambdas = [1.0, 4.0, 9.0];
        let sg = Semigroup::new(&lambdas, 1.1, 0.6);
        let z = ModalState {
            w: DVector::from_vec(vec![0.2, -0.3, 0.9]),
            v: DVector::from_vec(vec![1.0, 0.1, -0.4]),
        };
        let blocks = sg.energy_blocks(0.4).unwrap();
        let via_energy = apply_blocks(&blocks, &z.to_energy(&lambdas), true);
        let direct = sg.apply_adjoint(0.4, &z).unwrap().to_energy(&lambdas);
        assert!((via_energy - direct).amax() < 1e-14);
        let fwd = apply_blocks(&blocks, &z.to_energy(&lambdas), false);
        let direct = sg.apply(0.4, &z).unwrap().to_energy(&lambdas);
        assert!((fwd - direct).amax() < 1e-14);
    }

    #[test]
    fn gamma_weighted_adjoint_block() {
        // [[0, -1], [γλ, -ηλ^{1/2}]] is the adjoint of R under
        // the weight diag(γλ, 1), not under the Z^{1/2} weight diag(λ, 1)
        let (lambda, eta, gamma) = (4.0, 0.8, 2.5);
        let r = ModalBlock::new(0, lambda, eta, gamma).matrix;
        let gamma_weighted = Matrix2::new(0.0, -1.0, gamma * lambda, -eta * lambda.sqrt());
        let energy = Matrix2::new(gamma * lambda, 0.0, 0.0, 1.0);
        let adjoint = energy.try_inverse().unwrap() * r.transpose() * energy;
        assert!((adjoint - gamma_weighted).abs().max() < 1e-14);
        let z_weight = Matrix2::new(lambda, 0.0, 0.0, 1.0);
        let z_adjoint = z_weight.try_inverse().unwrap() * r.transpose() * z_weight;
        assert!((z_adjoint - gamma_weighted).abs().max() > 1e-3);
    }
}
