//! Dirichlet sine basis of `-d²/dx²` on `(0, L)`, the actuator overlap
//! matrix, and the pseudo-spectral grid transforms.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub length: f64,
    pub grid_points: usize,
}

impl DomainSpec {
    pub fn new(length: f64, grid_points: usize) -> Self {
        Self { length, grid_points }
    }

    /// Domain with the default collocation resolution of `4 * modes`.
    pub fn with_default_grid(length: f64, modes: usize) -> Self {
        Self::new(length, 4 * modes)
    }
}

/// Truncated eigenbasis `φ_j(x) = √(2/L) sin(jπx/L)`, `λ_j = (jπ/L)²`.
///
/// The collocation grid is the interior grid `x_m = mL/(M+1)`, on which
/// the sine transform is exactly orthogonal with weight `h = L/(M+1)`.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    length: f64,
    eigenvalues: Vec<f64>,
    grid: Vec<f64>,
    weight: f64,
    // rows: grid points, columns: modes
    synthesis: DMatrix<f64>,
}

pub fn build_basis(domain: DomainSpec, modes: usize) -> Result<SpectralBasis> {
    if modes < 1 {
        return Err(Error::InvalidParameter("basis truncation must be at least 1".into()));
    }
    if !(domain.length > 0.0) || !domain.length.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "domain length must be positive, got {}",
            domain.length
        )));
    }
    if domain.grid_points < 4 * modes {
        return Err(Error::InvalidParameter(format!(
            "grid_points = {} is below 4N = {}",
            domain.grid_points,
            4 * modes
        )));
    }
    let length = domain.length;
    let m = domain.grid_points;
    let eigenvalues = (1..=modes)
        .map(|j| {
            let k = j as f64 * PI / length;
            k * k
        })
        .collect();
    let weight = length / (m as f64 + 1.0);
    let grid: Vec<f64> = (1..=m).map(|i| i as f64 * weight).collect();
    let norm = (2.0 / length).sqrt();
    let denom = (m + 1) as f64;
    let synthesis = DMatrix::from_fn(m, modes, |i, j| {
        // sin(jπx_m/L) = sin(π (i+1)(j+1)/(M+1)); reduce the integer product exactly
        let p = ((i + 1) * (j + 1)) % (2 * (m + 1));
        norm * sin_pi(p as f64 / denom)
    });
    Ok(SpectralBasis { length, eigenvalues, grid, weight, synthesis })
}

impl SpectralBasis {
    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.eigenvalues[j]
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn grid_points(&self) -> usize {
        self.grid.len()
    }

    /// Quadrature weight of the collocation grid.
    pub fn grid_weight(&self) -> f64 {
        self.weight
    }

    /// Value of the `j`-th (0-based) eigenfunction at `x`.
    pub fn eigenfunction(&self, j: usize, x: f64) -> f64 {
        (2.0 / self.length).sqrt() * sin_pi((j + 1) as f64 * x / self.length)
    }

    /// Grid samples of the field with modal coefficients `coeffs`.
    pub fn synthesize_field(&self, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.modes(), coeffs.len())?;
        Ok(&self.synthesis * coeffs)
    }

    /// First `N` modal coefficients of grid samples, by the discrete sine transform.
    pub fn analyze_field(&self, samples: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.grid_points(), samples.len())?;
        Ok(self.synthesis.tr_mul(samples) * self.weight)
    }

    /// Projects a pointwise function of `x` onto the basis.
    pub fn project<F: Fn(f64) -> f64>(&self, f: F) -> DVector<f64> {
        let samples = DVector::from_iterator(self.grid_points(), self.grid.iter().map(|&x| f(x)));
        self.synthesis.tr_mul(&samples) * self.weight
    }
}

/// Subinterval `ϖ = (a, b)` carrying the distributed control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorRegion {
    pub a: f64,
    pub b: f64,
}

impl ActuatorRegion {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && a < b) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "actuator region ({a}, {b}) must satisfy 0 <= a < b"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn full(length: f64) -> Self {
        Self { a: 0.0, b: length }
    }

    pub fn check_inside(&self, length: f64) -> Result<()> {
        if self.b > length {
            return Err(Error::InvalidParameter(format!(
                "actuator region ({}, {}) exceeds the domain (0, {length})",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

/// `O_ij = ⟨1_ϖ φ_i, φ_j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix(pub DMatrix<f64>);

impl OverlapMatrix {
    pub fn identity(modes: usize) -> Self {
        Self(DMatrix::identity(modes, modes))
    }

    pub fn zeros(modes: usize) -> Self {
        Self(DMatrix::zeros(modes, modes))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn modes(&self) -> usize {
        self.0.nrows()
    }
}

/// Closed-form overlap integrals via `sin A sin B = ½[cos(A−B) − cos(A+B)]`.
pub fn overlap_matrix(basis: &SpectralBasis, region: ActuatorRegion) -> Result<OverlapMatrix> {
    region.check_inside(basis.length)?;
    let n = basis.modes();
    let l = basis.length;
    let (a, b) = (region.a / l, region.b / l);
    // ∫_a^b cos(mπx/L) dx, in units where the 1/L prefactor is absorbed
    let c = |m: usize| -> f64 {
        if m == 0 {
            b - a
        } else {
            let m = m as f64;
            (sin_pi(m * b) - sin_pi(m * a)) / (m * PI)
        }
    };
    let mut o = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let (p, q) = (i + 1, j + 1);
            let v = c(q - p) - c(p + q);
            o[(i, j)] = v;
            o[(j, i)] = v;
        }
    }
    Ok(OverlapMatrix(o))
}

/// `sin(πx)` with exact zeros at the integers.
pub(crate) fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (x / 2.0).round();
    if r == 0.0 || r.abs() == 1.0 {
        return 0.0;
    }
    (PI * r).sin()
}
