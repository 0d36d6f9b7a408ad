//! Occurrence-time POVM of a detector effect in the energy representation.
//!
//! Given the kernel `a(E,E')` of a positive effect `A`, the Heisenberg
//! evolution `α_t(A)` has kernel `exp(itE) a(E,E') exp(-itE')`. Integrating
//! over a time interval `I` gives the partial duration operator `B(I)`; the
//! full-line integral `B` is diagonal, `2π δ(E-E') a(E,E)`. Normalizing
//! `B(I)` by `B^{-1/2}` on both sides yields the POVM element
//!
//! ```text
//! P(I)(E,E') = (1/2π) c(E,E') ∫_I exp(it(E-E')) dt,
//! c(E,E')    = a(E,E)^{-1/2} a(E,E') a(E',E')^{-1/2}.
//! ```
//!
//! On the uniform grid every time integral is truncated to the alias-free
//! window `[-T*, T*]`. The first moment of `P` is the covariant derivative
//! `T_A = -i ∂_E + d_A(E)` with connection `d_A(E) = -i ∂_{E'} c(E,E')|_{E'=E}`.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{self, EnergyGrid, KernelOperator, Section, HERMITIAN_TOLERANCE};
use crate::linalg::{self, CMatrix};
use crate::stencil::UniformDerivative;

/// Diagonal entries of an effect kernel must exceed this value.
pub const DIAGONAL_FLOOR: f64 = 1e-12;
/// Eigenvalue floor accepted as "positive semidefinite".
pub const POSITIVITY_TOLERANCE: f64 = 1e-10;
/// Connection asymmetry above which a warning is logged.
pub const CONNECTION_ASYMMETRY_WARNING: f64 = 1e-6;
/// Below this `|Δ|` the window integral uses its Taylor series.
const SERIES_THRESHOLD: f64 = 1e-8;

/// Kernel `a(E,E')` of a positive effect `A`.
///
/// Construction checks hermiticity and positive semidefiniteness. The
/// strictly positive diagonal `a(E,E) > 0` is enforced by the operations
/// that divide by it (`normalize_kernel`, `matrix_povm`), so the zero effect
/// remains representable.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectKernel {
    kernel: KernelOperator,
}

impl EffectKernel {
    pub fn new(kernel: KernelOperator) -> Result<Self> {
        let m = kernel.operator_matrix();
        let scale = linalg::max_abs(&m).max(1.0);
        let asym = linalg::hermitian_deviation(&m);
        if asym > HERMITIAN_TOLERANCE * scale {
            return Err(Error::NotHermitian(asym));
        }
        let vals = linalg::eigenvalues(&m);
        let top = vals[vals.len() - 1].abs().max(1.0);
        if vals[0] < -POSITIVITY_TOLERANCE * top {
            return Err(Error::NotPositive(vals[0]));
        }
        Ok(Self { kernel })
    }

    pub fn zero(grid: EnergyGrid) -> Self {
        Self {
            kernel: KernelOperator::zeros(grid),
        }
    }

    pub fn kernel(&self) -> &KernelOperator {
        &self.kernel
    }

    pub fn grid(&self) -> &EnergyGrid {
        self.kernel.grid()
    }

    /// Smallest eigenvalue of each diagonal fiber block `a(E_i,E_i)`.
    pub fn diagonal_floor(&self) -> Vec<f64> {
        (0..self.grid().len())
            .map(|i| {
                let block = self.kernel.block(i, i);
                if block.nrows() == 1 {
                    block[(0, 0)].re
                } else {
                    linalg::eigenvalues(&block)[0]
                }
            })
            .collect()
    }

    pub fn ensure_positive_diagonal(&self) -> Result<()> {
        for (index, value) in self.diagonal_floor().into_iter().enumerate() {
            if !(value > DIAGONAL_FLOOR) {
                return Err(Error::DegenerateDiagonal { index, value });
            }
        }
        Ok(())
    }
}

/// Unit-diagonal kernel `c(E,E')`, the POVM density in the energy representation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedKernel {
    kernel: KernelOperator,
}

impl NormalizedKernel {
    /// Validates unit diagonal (to 1e-12) and hermiticity.
    pub fn new(kernel: KernelOperator) -> Result<Self> {
        let grid = *kernel.grid();
        let d = grid.fiber_dim();
        let entries = kernel.entries();
        for i in 0..grid.len() {
            for a in 0..d {
                for b in 0..d {
                    let target = if a == b { 1.0 } else { 0.0 };
                    let z = entries[(i * d + a, i * d + b)];
                    if (z - Complex64::new(target, 0.0)).norm() > 1e-12 {
                        return Err(Error::InvalidParameter(format!(
                            "normalized kernel must have unit diagonal; c(E_{i},E_{i}) = {z}"
                        )));
                    }
                }
            }
        }
        let asym = linalg::hermitian_deviation(entries);
        if asym > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Self { kernel })
    }

    /// `c(E,E') = 1` (fiber identity): the effect that sees every energy alike.
    pub fn trivial(grid: EnergyGrid) -> Self {
        Self::phase(grid, 0.0)
    }

    /// `c(E,E') = exp(-iτ(E-E'))`, whose click density is the trivial one
    /// translated by `τ`.
    pub fn phase(grid: EnergyGrid, tau: f64) -> Self {
        let n = grid.len();
        let d = grid.fiber_dim();
        let energies = grid.energies();
        let entries = DMatrix::from_fn(n * d, n * d, |r, s| {
            if r % d != s % d {
                return Complex64::new(0.0, 0.0);
            }
            let (i, j) = (r / d, s / d);
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, -tau * (energies[i] - energies[j]))
            }
        });
        Self {
            kernel: KernelOperator::new(grid, entries).expect("dimensions match"),
        }
    }

    pub(crate) fn from_trusted(kernel: KernelOperator) -> Self {
        Self { kernel }
    }

    pub fn kernel(&self) -> &KernelOperator {
        &self.kernel
    }

    pub fn grid(&self) -> &EnergyGrid {
        self.kernel.grid()
    }
}

/// `c(E,E') = a(E,E)^{-1/2} a(E,E') a(E',E')^{-1/2}`.
pub fn normalize_kernel(a: &EffectKernel) -> Result<NormalizedKernel> {
    a.ensure_positive_diagonal()?;
    let grid = *a.grid();
    let n = grid.len();
    let d = grid.fiber_dim();
    let entries = a.kernel().entries();

    let inv_sqrt: Vec<CMatrix> = (0..n)
        .map(|i| linalg::inverse_sqrt(&a.kernel().block(i, i), DIAGONAL_FLOOR))
        .collect::<Result<_>>()?;

    let mut c = DMatrix::zeros(n * d, n * d);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                c.view_mut((i * d, i * d), (d, d))
                    .copy_from(&DMatrix::identity(d, d));
                continue;
            }
            if d == 1 {
                let scale = (entries[(i, i)].re * entries[(j, j)].re).sqrt();
                c[(i, j)] = entries[(i, j)] / scale;
            } else {
                let block = entries.view((i * d, j * d), (d, d));
                let normalized = &inv_sqrt[i] * block * &inv_sqrt[j];
                c.view_mut((i * d, j * d), (d, d)).copy_from(&normalized);
            }
        }
    }
    // restore exact hermiticity lost to rounding in the block products
    let c = linalg::hermitize(&c);
    Ok(NormalizedKernel::from_trusted(KernelOperator::new(grid, c)?))
}

/// Bounded time interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    pub start: f64,
    pub end: f64,
}

impl TimeInterval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() || end < start {
            return Err(Error::InvalidInterval(start, end));
        }
        Ok(Self { start, end })
    }

    /// The full alias-free window `[-T*, T*]` of a grid.
    pub fn nyquist(grid: &EnergyGrid) -> Self {
        let t = grid.nyquist_time();
        Self { start: -t, end: t }
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn shifted(&self, t: f64) -> Self {
        Self {
            start: self.start + t,
            end: self.end + t,
        }
    }

    /// Split into `pieces` contiguous subintervals of equal length.
    pub fn partition(&self, pieces: usize) -> Vec<Self> {
        let step = self.length() / pieces as f64;
        (0..pieces)
            .map(|p| Self {
                start: if p == 0 { self.start } else { self.start + p as f64 * step },
                end: if p + 1 == pieces {
                    self.end
                } else {
                    self.start + (p + 1) as f64 * step
                },
            })
            .collect()
    }

    fn within(&self, grid: &EnergyGrid) -> Result<()> {
        grid.ensure_in_window(self.start)?;
        grid.ensure_in_window(self.end)
    }
}

/// `∫_a^b exp(itΔ) dt`, exact at `Δ = 0` and series-evaluated just above it.
pub fn window_integral(interval: TimeInterval, delta: f64) -> Complex64 {
    let (a, b) = (interval.start, interval.end);
    if delta.abs() < SERIES_THRESHOLD {
        let i = Complex64::new(0.0, 1.0);
        let d = delta;
        Complex64::new(b - a, 0.0) + i * (d * (b * b - a * a) / 2.0)
            - Complex64::new(d * d * (b.powi(3) - a.powi(3)) / 6.0, 0.0)
            - i * (d.powi(3) * (b.powi(4) - a.powi(4)) / 24.0)
    } else {
        (Complex64::from_polar(1.0, b * delta) - Complex64::from_polar(1.0, a * delta))
            / Complex64::new(0.0, delta)
    }
}

/// Multiply each fiber block `(i, j)` of a kernel by `f(E_i - E_j)`.
fn schur_with_energy_function(
    grid: &EnergyGrid,
    entries: &CMatrix,
    f: impl Fn(f64) -> Complex64,
) -> CMatrix {
    let d = grid.fiber_dim();
    let energies = grid.energies();
    DMatrix::from_fn(entries.nrows(), entries.ncols(), |r, s| {
        let z = entries[(r, s)];
        if z == Complex64::new(0.0, 0.0) {
            return z;
        }
        z * f(energies[r / d] - energies[s / d])
    })
}

/// POVM element `P(I)` as a kernel on the energy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMeasureKernel {
    pub interval: TimeInterval,
    pub kernel: KernelOperator,
}

impl IntervalMeasureKernel {
    /// Smallest and largest eigenvalues of the operator `P(I)`.
    pub fn eigenvalue_range(&self) -> Result<(f64, f64)> {
        grid::eigenvalue_range(&self.kernel)
    }
}

/// Kernel formula `(1/2π) c(E,E') ∫_I exp(it(E-E')) dt`.
pub fn interval_kernel(c: &NormalizedKernel, interval: TimeInterval) -> Result<IntervalMeasureKernel> {
    if !(interval.end > interval.start) {
        return Err(Error::InvalidInterval(interval.start, interval.end));
    }
    let entries = schur_with_energy_function(c.grid(), c.kernel().entries(), |delta| {
        window_integral(interval, delta) / (2.0 * PI)
    });
    Ok(IntervalMeasureKernel {
        interval,
        kernel: KernelOperator::new(*c.grid(), entries)?,
    })
}

/// Max entrywise deviation (on `w P`) between the translated element
/// `exp(itE) P(I)(E,E') exp(-itE')` and `P(I + t)`.
pub fn shift_interval_covariance_check(c: &NormalizedKernel, interval: TimeInterval, t: f64) -> Result<f64> {
    let p = interval_kernel(c, interval)?;
    let shifted = interval_kernel(c, interval.shifted(t))?;
    let grid = *c.grid();
    let translated = schur_with_energy_function(&grid, p.kernel.entries(), |delta| {
        Complex64::from_polar(1.0, t * delta)
    });
    Ok(linalg::max_abs(&(translated - shifted.kernel.entries())) * grid.weight())
}

/// Half-width `T` of a symmetric time window `[-T, T]`, `0 < T ≤ T*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    half_width: f64,
}

impl TimeWindow {
    pub fn new(half_width: f64, grid: &EnergyGrid) -> Result<Self> {
        let horizon = grid.nyquist_time();
        if !(half_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time window half-width must be positive, got {half_width}"
            )));
        }
        if half_width > horizon * (1.0 + 1e-12) {
            return Err(Error::OutsideNyquistWindow {
                time: half_width,
                horizon,
            });
        }
        Ok(Self { half_width })
    }

    pub fn nyquist(grid: &EnergyGrid) -> Self {
        Self {
            half_width: grid.nyquist_time(),
        }
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }
}

/// `B_T` with kernel `a(E,E') ∫_{-T}^{T} exp(it(E-E')) dt = a(E,E') 2 sin(TΔ)/Δ`.
pub fn truncated_duration_operator(a: &EffectKernel, window: TimeWindow) -> Result<KernelOperator> {
    let grid = *a.grid();
    TimeWindow::new(window.half_width, &grid)?;
    let t = window.half_width;
    let entries = schur_with_energy_function(&grid, a.kernel().entries(), |delta| {
        if delta == 0.0 {
            Complex64::new(2.0 * t, 0.0)
        } else {
            Complex64::new(2.0 * (t * delta).sin() / delta, 0.0)
        }
    });
    KernelOperator::new(grid, entries)
}

fn hermitian_inverse(m: &CMatrix) -> Result<CMatrix> {
    let chol = Cholesky::new(linalg::hermitize(m))
        .ok_or_else(|| Error::Numerical("Cholesky factorization failed".into()))?;
    Ok(linalg::hermitize(&chol.inverse()))
}

/// `(B_T + 1)^{-1}` as an operator matrix.
fn resolvent_at(a: &EffectKernel, window: TimeWindow) -> Result<CMatrix> {
    let b = truncated_duration_operator(a, window)?.operator_matrix();
    let n = b.nrows();
    hermitian_inverse(&(b + CMatrix::identity(n, n)))
}

/// Diagnostics of the decreasing net `C_T = (B_T + 1)^{-1}`.
#[derive(Debug, Clone)]
pub struct NetLimitReport {
    pub times: Vec<f64>,
    /// Smallest eigenvalue of any `C_T` (should be ≥ 0).
    pub positivity_floor: f64,
    /// Largest eigenvalue of any `C_T` minus one (should be ≤ 0).
    pub upper_bound_excess: f64,
    /// Largest eigenvalue of any `C_{T_{k+1}} - C_{T_k}` (should be ≤ 0).
    pub monotonicity_violation: f64,
    /// Limit candidate `C` at `T*`.
    pub limit: KernelOperator,
    /// `B = C^{-1} - 1`.
    pub duration: KernelOperator,
}

impl NetLimitReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.positivity_floor >= -tol && self.upper_bound_excess <= tol && self.monotonicity_violation <= tol
    }
}

/// `C` at `T*` and `B = C^{-1} - 1`, both as operator matrices.
fn duration_limit(a: &EffectKernel) -> Result<(CMatrix, CMatrix)> {
    let grid = *a.grid();
    let c = resolvent_at(a, TimeWindow::nyquist(&grid))?;
    let n = c.nrows();
    let b = hermitian_inverse(&c)? - CMatrix::identity(n, n);
    Ok((c, linalg::hermitize(&b)))
}

/// Checks that `(B_T + 1)^{-1}` is positive, bounded by one and decreasing
/// along `times`, and reports the limit `C` and `B = C^{-1} - 1` at `T*`.
pub fn net_limit_check(a: &EffectKernel, times: &[f64]) -> Result<NetLimitReport> {
    let grid = *a.grid();
    if times.is_empty() {
        return Err(Error::InvalidParameter("net_limit_check needs at least one time".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("times must be strictly ascending".into()));
    }
    let mut floor = f64::INFINITY;
    let mut excess = f64::NEG_INFINITY;
    let mut violation = f64::NEG_INFINITY;
    let mut previous: Option<CMatrix> = None;
    for &t in times {
        let c = resolvent_at(a, TimeWindow::new(t, &grid)?)?;
        let vals = linalg::eigenvalues(&c);
        floor = floor.min(vals[0]);
        excess = excess.max(vals[vals.len() - 1] - 1.0);
        if let Some(prev) = &previous {
            let diff = linalg::eigenvalues(&(&c - prev));
            violation = violation.max(diff[diff.len() - 1]);
        }
        previous = Some(c);
    }
    if times.len() == 1 {
        violation = 0.0;
    }
    let (c, b) = duration_limit(a)?;
    Ok(NetLimitReport {
        times: times.to_vec(),
        positivity_floor: floor,
        upper_bound_excess: excess,
        monotonicity_violation: violation,
        limit: KernelOperator::from_operator_matrix(grid, c)?,
        duration: KernelOperator::from_operator_matrix(grid, b)?,
    })
}

/// `P(I) = B^{-1/2} B(I) B^{-1/2}` computed with matrices, independently of
/// the kernel formula in [`interval_kernel`].
pub fn matrix_povm(a: &EffectKernel, interval: TimeInterval) -> Result<IntervalMeasureKernel> {
    let grid = *a.grid();
    interval.within(&grid)?;
    a.ensure_positive_diagonal()?;
    let (_, b) = duration_limit(a)?;
    let floor = DIAGONAL_FLOOR * linalg::max_abs(&b).max(1.0);
    let b_inv_sqrt = linalg::inverse_sqrt(&b, floor)?;
    let partial = schur_with_energy_function(&grid, a.kernel().entries(), |delta| window_integral(interval, delta))
        * Complex64::new(grid.weight(), 0.0);
    let p = &b_inv_sqrt * partial * &b_inv_sqrt;
    Ok(IntervalMeasureKernel {
        interval,
        kernel: KernelOperator::from_operator_matrix(grid, linalg::hermitize(&p))?,
    })
}

/// `⟨Φ, BΦ⟩ = 2π Σ_i w Φ_i^† a(E_i,E_i) Φ_i`.
pub fn total_duration_expectation(a: &EffectKernel, phi: &Section) -> Result<f64> {
    let grid = *a.grid();
    grid.ensure_same(phi.grid())?;
    let mut total = 0.0;
    for i in 0..grid.len() {
        let block = a.kernel().block(i, i);
        let v = nalgebra::DVector::from_column_slice(phi.fiber(i));
        total += v.dotc(&(&block * &v)).re;
    }
    Ok(2.0 * PI * grid.weight() * total)
}

/// Hermitian fiber-matrix field `d_A(E)` (units of time).
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    grid: EnergyGrid,
    values: Vec<CMatrix>,
    asymmetry: f64,
}

impl Connection {
    pub fn scalar(grid: EnergyGrid, values: Vec<f64>) -> Result<Self> {
        if grid.fiber_dim() != 1 {
            return Err(Error::InvalidParameter("scalar connection on a fibered grid".into()));
        }
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid,
            values: values
                .into_iter()
                .map(|v| CMatrix::from_element(1, 1, Complex64::new(v, 0.0)))
                .collect(),
            asymmetry: 0.0,
        })
    }

    /// Fiber-matrix connection; every value must be hermitian to 1e-10.
    pub fn from_matrices(grid: EnergyGrid, values: Vec<CMatrix>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let d = grid.fiber_dim();
        let mut asymmetry: f64 = 0.0;
        for m in &values {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: m.nrows(),
                });
            }
            asymmetry = asymmetry.max(linalg::hermitian_deviation(m));
        }
        if asymmetry > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian(asymmetry));
        }
        Ok(Self {
            grid,
            values,
            asymmetry,
        })
    }

    pub fn grid(&self) -> &EnergyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    /// Anti-hermitian part discarded when the finite-difference estimate was
    /// hermitized (zero for connections built from exact values).
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    /// Real values in the scalar-fiber case.
    pub fn scalar_values(&self) -> Option<Vec<f64>> {
        (self.grid.fiber_dim() == 1).then(|| self.values.iter().map(|m| m[(0, 0)].re).collect())
    }

    /// Max spectral norm over the grid.
    pub fn max_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|m| {
                let vals = linalg::eigenvalues(m);
                vals[0].abs().max(vals[vals.len() - 1].abs())
            })
            .fold(0.0, f64::max)
    }

    /// Max fiber-entry deviation of the matrices from hermiticity.
    pub fn hermitian_deviation(&self) -> f64 {
        self.values
            .iter()
            .map(linalg::hermitian_deviation)
            .fold(0.0, f64::max)
    }

    /// `(T_A Φ)(E) = -i ∂_E Φ(E) + d_A(E) Φ(E)` for sections vanishing at
    /// both ends of the spectrum.
    pub fn apply_time_operator(&self, phi: &Section) -> Result<Section> {
        self.grid.ensure_same(phi.grid())?;
        let edge = phi.boundary_magnitude();
        if edge > 1e-8 {
            return Err(Error::BoundaryNonvanishing(edge));
        }
        Ok(self.apply_unchecked(phi))
    }

    pub(crate) fn apply_unchecked(&self, phi: &Section) -> Section {
        let n = self.grid.len();
        let d = self.grid.fiber_dim();
        let deriv = UniformDerivative::new(n, self.grid.spacing());
        let values = phi.values().as_slice();
        let minus_i = Complex64::new(0.0, -1.0);
        let mut out = nalgebra::DVector::zeros(n * d);
        for i in 0..n {
            let (start, w) = deriv.stencil(i);
            for a in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for (s, &ws) in w.iter().enumerate() {
                    acc += values[(start + s) * d + a] * ws;
                }
                let mut conn = Complex64::new(0.0, 0.0);
                for b in 0..d {
                    conn += self.values[i][(a, b)] * values[i * d + b];
                }
                out[i * d + a] = minus_i * acc + conn;
            }
        }
        Section::new(self.grid, out).expect("dimensions match")
    }

    /// `Re ⟨Φ, T_A Φ⟩`.
    pub fn expectation(&self, phi: &Section) -> Result<f64> {
        let t_phi = self.apply_time_operator(phi)?;
        Ok(grid::inner_product(phi, &t_phi)?.re)
    }
}

/// `d_A(E_i) = -i ∂_{E'} c(E_i, E')|_{E'=E_i}` by finite differences in the
/// second slot, hermitized, with the discarded asymmetry kept as a diagnostic.
pub fn connection(c: &NormalizedKernel) -> Result<Connection> {
    let grid = *c.grid();
    let n = grid.len();
    if n < 3 {
        return Err(Error::InvalidGrid("connection needs at least 3 grid points".into()));
    }
    let d = grid.fiber_dim();
    let deriv = UniformDerivative::new(n, grid.spacing());
    let entries = c.kernel().entries();
    let minus_i = Complex64::new(0.0, -1.0);
    let mut asymmetry: f64 = 0.0;
    let values = (0..n)
        .map(|i| {
            let (start, w) = deriv.stencil(i);
            let mut raw = CMatrix::zeros(d, d);
            for (s, &ws) in w.iter().enumerate() {
                let j = start + s;
                raw += entries.view((i * d, j * d), (d, d)) * Complex64::new(ws, 0.0);
            }
            raw *= minus_i;
            let herm = linalg::hermitize(&raw);
            asymmetry = asymmetry.max(linalg::max_abs(&(&raw - &herm)));
            herm
        })
        .collect();
    if asymmetry > CONNECTION_ASYMMETRY_WARNING {
        log::warn!(
            "connection asymmetry {asymmetry:.3e} exceeds {CONNECTION_ASYMMETRY_WARNING:e}; \
             the kernel is not smooth on this grid"
        );
    }
    Ok(Connection {
        grid,
        values,
        asymmetry,
    })
}

/// `T_A Φ` with the connection derived from `c`.
pub fn apply_time_operator(c: &NormalizedKernel, phi: &Section) -> Result<Section> {
    connection(c)?.apply_time_operator(phi)
}

/// Fourier coefficients of a click density: `p(t) = (1/2π) Σ_n M_n exp(itnh)`
/// with `M_n = Σ_{i-j=n} w² Φ_i^† c(E_i,E_j) Φ_j`.
#[derive(Debug, Clone)]
pub struct CorrelationSeries {
    spacing: f64,
    // coeffs[n] for n = 0..N; negative orders are the conjugates
    coeffs: Vec<Complex64>,
}

impl CorrelationSeries {
    pub fn new(c: &NormalizedKernel, phi: &Section) -> Result<Self> {
        let grid = *c.grid();
        grid.ensure_same(phi.grid())?;
        let n = grid.len();
        let d = grid.fiber_dim();
        let w2 = grid.weight() * grid.weight();
        let entries = c.kernel().entries();
        let values = phi.values().as_slice();
        let support: Vec<usize> = (0..n)
            .filter(|&i| phi.fiber(i).iter().any(|z| *z != Complex64::new(0.0, 0.0)))
            .collect();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
        for &i in &support {
            for &j in support.iter().filter(|&&j| j <= i) {
                let mut z = Complex64::new(0.0, 0.0);
                for a in 0..d {
                    for b in 0..d {
                        z += values[i * d + a].conj() * entries[(i * d + a, j * d + b)] * values[j * d + b];
                    }
                }
                coeffs[i - j] += z * w2;
            }
        }
        Ok(Self {
            spacing: grid.spacing(),
            coeffs,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let z = Complex64::from_polar(1.0, t * self.spacing);
        let mut acc = Complex64::new(0.0, 0.0);
        for coeff in self.coeffs.iter().skip(1).rev() {
            acc = (acc + coeff) * z;
        }
        (self.coeffs[0].re + 2.0 * acc.re) / (2.0 * PI)
    }
}

/// Click density `p(t) = ⟨Φ, α_t(A) Φ⟩ / ⟨Φ, B Φ⟩`-normalized, i.e.
/// `(1/2π) Σ_ij w² Φ_i^† c(E_i,E_j) exp(it(E_i-E_j)) Φ_j`.
pub fn click_density(c: &NormalizedKernel, phi: &Section, times: &[f64]) -> Result<Vec<f64>> {
    let grid = *c.grid();
    for &t in times {
        grid.ensure_in_window(t)?;
    }
    phi.ensure_normalized(1e-8)?;
    let series = CorrelationSeries::new(c, phi)?;
    Ok(times.iter().map(|&t| series.eval(t)).collect())
}

/// Refinement tolerance of [`first_moment`].
pub const FIRST_MOMENT_TOLERANCE: f64 = 1e-4;

/// `∫ t p(t) dt` over the alias-free window, refined by halving the time
/// step until the result changes by less than 1e-4 (relative).
pub fn first_moment(c: &NormalizedKernel, phi: &Section) -> Result<f64> {
    let grid = *c.grid();
    phi.ensure_normalized(1e-8)?;
    let edge = phi.boundary_magnitude();
    if edge > 1e-8 {
        return Err(Error::BoundaryNonvanishing(edge));
    }
    let series = CorrelationSeries::new(c, phi)?;
    let horizon = grid.nyquist_time();
    let time_unit = 1.0 / (grid.e_max() - grid.e_min());
    let moment = |samples: usize| {
        let dt = 2.0 * horizon / samples as f64;
        (0..samples)
            .map(|k| {
                let t = -horizon + k as f64 * dt;
                t * series.eval(t)
            })
            .sum::<f64>()
            * dt
    };
    let mut samples = (2 * grid.len()).max(64);
    let mut current = moment(samples);
    let mut history = vec![(samples, current)];
    while samples < 1 << 22 {
        samples *= 2;
        let refined = moment(samples);
        history.push((samples, refined));
        if (refined - current).abs() < FIRST_MOMENT_TOLERANCE * refined.abs().max(time_unit) {
            return Ok(refined);
        }
        current = refined;
    }
    Err(Error::Numerical(format!(
        "first moment did not converge under step halving: {history:?}"
    )))
}

/// Transition time `d_1 - d_2` between two effects.
pub fn transition_time(d1: &Connection, d2: &Connection) -> Result<Connection> {
    d1.grid.ensure_same(&d2.grid)?;
    let values = d1
        .values
        .iter()
        .zip(&d2.values)
        .map(|(a, b)| a - b)
        .collect();
    Ok(Connection {
        grid: d1.grid,
        values,
        asymmetry: d1.asymmetry + d2.asymmetry,
    })
}
