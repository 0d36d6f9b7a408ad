//! Discretized energy representation: a uniform grid over the absolutely
//! continuous spectrum, sections of the (trivial) fiber bundle over it, and
//! integral-kernel operators acting on those sections.
//!
//! All quadratures use the uniform weight `w = h`. On such a grid the time
//! integral of `exp(it(E_i - E_j))` over the window `[-T*, T*]`, with
//! `T* = π/h`, equals `(2π/h) δ_ij` exactly, which is what lets the kernel
//! identities of the time-of-occurrence construction hold to rounding error.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Uniform grid `E_i = e_min + i h`, `i = 0..n_points`, with units ħ = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyGrid {
    e_min: f64,
    e_max: f64,
    n_points: usize,
    spacing: f64,
    mass: f64,
    fiber_dim: usize,
}

impl EnergyGrid {
    pub fn new(e_min: f64, e_max: f64, n_points: usize, mass: f64, fiber_dim: usize) -> Result<Self> {
        if !(e_min > 0.0) || !e_min.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "e_min = {e_min} must be positive (momentum k = sqrt(2mE) must be real and nonzero)"
            )));
        }
        if !(e_max > e_min) || !e_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "empty energy range [{e_min}, {e_max}]"
            )));
        }
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!("n_points = {n_points} must be at least 2")));
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidGrid(format!("mass = {mass} must be positive")));
        }
        if fiber_dim == 0 {
            return Err(Error::InvalidGrid("fiber_dim must be at least 1".into()));
        }
        let spacing = (e_max - e_min) / (n_points - 1) as f64;
        Ok(Self {
            e_min,
            e_max,
            n_points,
            spacing,
            mass,
            fiber_dim,
        })
    }

    /// Scalar fiber, unit mass.
    pub fn scalar(e_min: f64, e_max: f64, n_points: usize) -> Result<Self> {
        Self::new(e_min, e_max, n_points, 1.0, 1)
    }

    pub fn e_min(&self) -> f64 {
        self.e_min
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Quadrature weight (uniform, equal to the spacing).
    pub fn weight(&self) -> f64 {
        self.spacing
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    /// Length of a section vector, `n_points * fiber_dim`.
    pub fn dim(&self) -> usize {
        self.n_points * self.fiber_dim
    }

    /// Alias-free time horizon `T* = π/h`.
    pub fn nyquist_time(&self) -> f64 {
        PI / self.spacing
    }

    pub fn energy(&self, i: usize) -> f64 {
        self.e_min + i as f64 * self.spacing
    }

    pub fn energies(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.energy(i)).collect()
    }

    pub fn momentum(&self, i: usize) -> f64 {
        (2.0 * self.mass * self.energy(i)).sqrt()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.momentum(i)).collect()
    }

    pub(crate) fn ensure_same(&self, other: &EnergyGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub(crate) fn ensure_in_window(&self, t: f64) -> Result<()> {
        let horizon = self.nyquist_time();
        if t.abs() > horizon * (1.0 + 1e-12) || !t.is_finite() {
            Err(Error::OutsideNyquistWindow { time: t, horizon })
        } else {
            Ok(())
        }
    }
}

/// A section Φ(E) of the energy bundle, stored as `n_points * fiber_dim`
/// complex values (fiber index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    grid: EnergyGrid,
    values: DVector<Complex64>,
}

impl Section {
    pub fn new(grid: EnergyGrid, values: DVector<Complex64>) -> Result<Self> {
        if values.len() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: EnergyGrid) -> Self {
        Self {
            grid,
            values: DVector::zeros(grid.dim()),
        }
    }

    /// Scalar-fiber section sampled from `f(E)`.
    pub fn from_fn(grid: EnergyGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        if grid.fiber_dim() != 1 {
            return Err(Error::InvalidParameter(
                "from_fn builds scalar sections; use Section::new for fiber_dim > 1".into(),
            ));
        }
        let values = DVector::from_iterator(grid.len(), grid.energies().into_iter().map(f));
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &EnergyGrid {
        &self.grid
    }

    pub fn values(&self) -> &DVector<Complex64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<Complex64> {
        self.values
    }

    /// Fiber vector at grid point `i`.
    pub fn fiber(&self, i: usize) -> &[Complex64] {
        let d = self.grid.fiber_dim();
        &self.values.as_slice()[i * d..(i + 1) * d]
    }

    pub fn norm_squared(&self) -> f64 {
        self.grid.weight() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n2 = self.norm_squared();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::Numerical("cannot normalize a zero section".into()));
        }
        Ok(self.scaled(Complex64::new(1.0 / n2.sqrt(), 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: &self.values * factor,
        }
    }

    pub(crate) fn ensure_normalized(&self, tol: f64) -> Result<()> {
        let n2 = self.norm_squared();
        if (n2 - 1.0).abs() > tol {
            Err(Error::NotNormalized(n2))
        } else {
            Ok(())
        }
    }

    /// Largest fiber norm at the two ends of the grid.
    pub fn boundary_magnitude(&self) -> f64 {
        let last = self.grid.len() - 1;
        let norm = |s: &[Complex64]| s.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        norm(self.fiber(0)).max(norm(self.fiber(last)))
    }
}

/// `⟨a, b⟩ = Σ_i w conj(a_i) b_i`, antilinear in the first argument.
pub fn inner_product(a: &Section, b: &Section) -> Result<Complex64> {
    a.grid.ensure_same(&b.grid)?;
    let sum: Complex64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(sum * a.grid.weight())
}

/// Integral kernel `K(E_i, E_j)` (a `fiber_dim`-square block per pair)
/// acting by `(KΦ)(E_i) = Σ_j w K(E_i, E_j) Φ(E_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelOperator {
    grid: EnergyGrid,
    entries: CMatrix,
}

impl KernelOperator {
    pub fn new(grid: EnergyGrid, entries: CMatrix) -> Result<Self> {
        if entries.nrows() != grid.dim() || entries.ncols() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: entries.nrows().max(entries.ncols()),
            });
        }
        Ok(Self { grid, entries })
    }

    /// Scalar kernel sampled from `f(i, j)`.
    pub fn from_fn(grid: EnergyGrid, f: impl Fn(usize, usize) -> Complex64) -> Result<Self> {
        if grid.fiber_dim() != 1 {
            return Err(Error::InvalidParameter(
                "from_fn builds scalar kernels; use KernelOperator::new for fiber_dim > 1".into(),
            ));
        }
        let n = grid.len();
        Ok(Self {
            grid,
            entries: DMatrix::from_fn(n, n, f),
        })
    }

    pub fn zeros(grid: EnergyGrid) -> Self {
        Self {
            grid,
            entries: DMatrix::zeros(grid.dim(), grid.dim()),
        }
    }

    /// Kernel of the identity operator, `δ_ij / w` on the fiber diagonal.
    pub fn identity(grid: EnergyGrid) -> Self {
        Self {
            grid,
            entries: DMatrix::identity(grid.dim(), grid.dim()) * Complex64::new(1.0 / grid.weight(), 0.0),
        }
    }

    /// Build from the operator matrix `w K` (the matrix in the orthonormal
    /// basis of normalized grid delta functions).
    pub fn from_operator_matrix(grid: EnergyGrid, matrix: CMatrix) -> Result<Self> {
        Self::new(grid, matrix * Complex64::new(1.0 / grid.weight(), 0.0))
    }

    pub fn grid(&self) -> &EnergyGrid {
        &self.grid
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    /// `w K`, the operator matrix in the orthonormal grid basis.
    pub fn operator_matrix(&self) -> CMatrix {
        &self.entries * Complex64::new(self.grid.weight(), 0.0)
    }

    /// Fiber block `K(E_i, E_j)`.
    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        let d = self.grid.fiber_dim();
        self.entries.view((i * d, j * d), (d, d)).into_owned()
    }

    pub fn apply(&self, phi: &Section) -> Result<Section> {
        self.grid.ensure_same(phi.grid())?;
        Section::new(
            self.grid,
            (&self.entries * phi.values()) * Complex64::new(self.grid.weight(), 0.0),
        )
    }

    /// `Σ_ij w² conj(Φ_i) K_ij Φ_j`.
    pub fn quadratic_form(&self, phi: &Section) -> Result<Complex64> {
        self.grid.ensure_same(phi.grid())?;
        let w = self.grid.weight();
        Ok(phi.values().dotc(&(&self.entries * phi.values())) * (w * w))
    }

    /// Max entrywise asymmetry of the operator matrix `w K`.
    pub fn hermitian_deviation(&self) -> f64 {
        linalg::hermitian_deviation(&self.entries) * self.grid.weight()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Max entrywise difference of the operator matrices `w K`.
    pub fn max_deviation(&self, other: &KernelOperator) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(linalg::max_abs(&(&self.entries - &other.entries)) * self.grid.weight())
    }

    /// Max entrywise deviation of `w K` from the identity matrix.
    pub fn deviation_from_identity(&self) -> f64 {
        self.max_deviation(&KernelOperator::identity(self.grid))
            .expect("same grid")
    }
}

/// Tolerance on the asymmetry of `w K` accepted by the eigenvalue routines.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Smallest eigenvalue of the operator matrix `w K` (hermitized).
pub fn min_eigenvalue(k: &KernelOperator) -> Result<f64> {
    Ok(eigenvalue_range(k)?.0)
}

/// Smallest and largest eigenvalues of `w K`.
pub fn eigenvalue_range(k: &KernelOperator) -> Result<(f64, f64)> {
    let m = k.operator_matrix();
    let asym = linalg::hermitian_deviation(&m);
    if asym > HERMITIAN_TOLERANCE * linalg::max_abs(&m).max(1.0) {
        return Err(Error::NotHermitian(asym));
    }
    let vals = linalg::eigenvalues(&m);
    Ok((vals[0], vals[vals.len() - 1]))
}
