//! Passage effect of a thin spherical shell `A = Q* P Q`, where `P` projects
//! onto radii in the shell and `Q` selects outgoing waves.
//!
//! On an energy eigenfunction, `(2mH)^{-1/2}` acts as `1/k`, so
//! `Q = σ_Q (i/k) ∂_r - 1`. The effect kernel is
//! `a(E,E') = (m/√(kk')) ⟨Q u_k, P Q u_k'⟩` with `u_k` normalized to unit
//! incoming amplitude, `u_k → exp(-ikr) + exp(ikr + iδ(k))`.
//!
//! # Sign convention
//!
//! Literal evaluation of the displayed formulas is not self-consistent, so
//! the signs are fixed by two anchors: a free particle must click at the
//! classical traversal time `mR/k > 0`, and a repulsive core must shorten the
//! click time. The frozen choice is
//!
//! * `σ_Q = +1`: `Q e^{ikr} = -2 e^{ikr}`, `Q e^{-ikr} = 0`;
//! * `c(E,E') = sinc(ρ(k-k')/2) e^{-iR(k-k')} e^{-i(δ(k)-δ(k'))}`
//!   (`σ_R = -1`, `σ_δ = +1`), which is what `⟨Q u_k, P Q u_k'⟩` produces;
//! * `d_A(E) = mR/k + ∂_E δ`, so the click delay relative to free motion is
//!   `+∂_E δ`, negative for a hard sphere.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{EnergyGrid, KernelOperator};
use crate::povm::{Connection, EffectKernel, NormalizedKernel};
use crate::radial::{solve_radial, PhaseShiftTable, PotentialSpec, RadialSettings, RadialSolution};
use crate::stencil::UniformDerivative;

/// Spherical shell of radius `R` and thickness `ρ` centered on `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellSpec {
    radius: f64,
    thickness: f64,
    mass: f64,
}

impl ShellSpec {
    pub fn new(radius: f64, thickness: f64, mass: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("shell radius must be positive, got {radius}")));
        }
        if !(thickness >= 0.0) || thickness >= 2.0 * radius {
            return Err(Error::InvalidParameter(format!(
                "shell thickness must lie in [0, 2R), got {thickness}"
            )));
        }
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        Ok(Self {
            radius,
            thickness,
            mass,
        })
    }

    /// Infinitely thin shell.
    pub fn thin(radius: f64, mass: f64) -> Result<Self> {
        Self::new(radius, 0.0, mass)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn inner(&self) -> f64 {
        self.radius - 0.5 * self.thickness
    }

    pub fn outer(&self) -> f64 {
        self.radius + 0.5 * self.thickness
    }
}

/// `Q = σ (i/k) ∂_r - 1` on energy eigenfunctions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutgoingSelector {
    sign: i8,
}

impl OutgoingSelector {
    /// `σ_Q = +1`: annihilates `exp(-ikr)`.
    pub const CALIBRATED: Self = Self { sign: 1 };
    /// `σ_Q = -1`, the operator as displayed; annihilates `exp(ikr)` instead.
    pub const LITERAL: Self = Self { sign: -1 };

    pub fn sign(&self) -> i8 {
        self.sign
    }

    /// Apply to samples of an eigenfunction with momentum `k` on a uniform
    /// radial grid with step `dr`.
    pub fn apply(&self, samples: &[Complex64], k: f64, dr: f64) -> Vec<Complex64> {
        let derivative = UniformDerivative::new(samples.len(), dr).apply(samples);
        let factor = Complex64::new(0.0, self.sign as f64 / k);
        samples
            .iter()
            .zip(derivative)
            .map(|(&u, du)| factor * du - u)
            .collect()
    }
}

impl Default for OutgoingSelector {
    fn default() -> Self {
        Self::CALIBRATED
    }
}

/// `Q u` for a real radial solution, as a complex radial vector.
#[allow(non_snake_case)]
pub fn apply_Q(selector: &OutgoingSelector, solution: &RadialSolution) -> Vec<Complex64> {
    let samples: Vec<Complex64> = solution.values().iter().map(|&u| Complex64::new(u, 0.0)).collect();
    selector.apply(&samples, solution.k(), solution.dr())
}

/// Signs `(σ_R, σ_δ)` in `c = sinc · exp(iσ_R R(k-k')) · exp(-iσ_δ(δ(k)-δ(k')))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignConvention {
    pub sigma_r: i8,
    pub sigma_delta: i8,
}

impl SignConvention {
    pub const CALIBRATED: Self = Self {
        sigma_r: -1,
        sigma_delta: 1,
    };

    pub fn all() -> [Self; 4] {
        [(1, 1), (1, -1), (-1, 1), (-1, -1)].map(|(sigma_r, sigma_delta)| Self { sigma_r, sigma_delta })
    }
}

impl Default for SignConvention {
    fn default() -> Self {
        Self::CALIBRATED
    }
}

/// Regular solutions at every grid momentum, solved in parallel on a common
/// radial grid that covers the shell.
pub fn solve_on_grid(
    p: &PotentialSpec,
    grid: &EnergyGrid,
    shell: &ShellSpec,
    settings: &RadialSettings,
) -> Result<Vec<RadialSolution>> {
    let settings = settings.covering(shell.outer() + 0.5);
    grid.momenta()
        .par_iter()
        .map(|&k| solve_radial(p, k, settings.r_max, settings.dr))
        .collect()
}

/// Nonnegative quadrature weights on the radial nodes for `∫_{r_a}^{r_b} f dr`,
/// integrating the piecewise-linear interpolant of `f` exactly.
fn shell_weights(r_a: f64, r_b: f64, dr: f64, len: usize) -> Vec<(usize, f64)> {
    let mut weights = vec![0.0; len];
    let first = (r_a / dr).floor() as usize;
    let last = ((r_b / dr).ceil() as usize).min(len - 1);
    for n in first..last {
        let (x0, x1) = (n as f64 * dr, (n + 1) as f64 * dr);
        let (a, b) = (r_a.max(x0), r_b.min(x1));
        if b <= a {
            continue;
        }
        // ∫_a^b of the hat functions at x0 and x1
        let s = |x: f64| (x - x0) / dr;
        let (sa, sb) = (s(a), s(b));
        let w1 = dr * 0.5 * (sb * sb - sa * sa);
        weights[n] += dr * (sb - sa) - w1;
        weights[n + 1] += w1;
    }
    weights
        .into_iter()
        .enumerate()
        .filter(|(_, w)| *w > 0.0)
        .collect()
}

/// `a(E_i,E_j) = (m/√(k_i k_j)) ∫_shell conj(Q u_i) Q u_j dr` with
/// incoming-normalized `u`, as a Gram matrix.
pub fn numerical_effect_kernel(
    selector: &OutgoingSelector,
    shell: &ShellSpec,
    p: &PotentialSpec,
    solutions: &[RadialSolution],
    grid: &EnergyGrid,
) -> Result<EffectKernel> {
    if shell.thickness() <= 0.0 {
        return Err(Error::InvalidParameter(
            "the numerical kernel needs a shell of positive thickness".into(),
        ));
    }
    if grid.fiber_dim() != 1 {
        return Err(Error::InvalidParameter("shell kernels are scalar".into()));
    }
    if solutions.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: solutions.len(),
        });
    }
    let (dr, len) = (solutions[0].dr(), solutions[0].len());
    for (i, sol) in solutions.iter().enumerate() {
        if sol.dr() != dr || sol.len() != len {
            return Err(Error::InvalidParameter("radial solutions do not share a grid".into()));
        }
        if (sol.k() - grid.momentum(i)).abs() > 1e-12 * sol.k() {
            return Err(Error::InvalidParameter(format!(
                "solution {i} has k = {} but the grid momentum is {}",
                sol.k(),
                grid.momentum(i)
            )));
        }
    }
    if shell.outer() > solutions[0].r_max() {
        return Err(Error::InvalidParameter(format!(
            "shell [{}, {}] extends beyond the radial grid (r_max = {})",
            shell.inner(),
            shell.outer(),
            solutions[0].r_max()
        )));
    }
    p.ensure_negligible_at(shell.inner())
        .map_err(|e| Error::InvalidParameter(format!("shell outside the asymptotic region: {e}")))?;

    let weights = shell_weights(shell.inner(), shell.outer(), dr, len);
    if weights.is_empty() {
        return Err(Error::InvalidParameter("shell does not overlap the radial grid".into()));
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    // rows: grid points, columns: shell nodes scaled by √weight
    let rows: Vec<Vec<Complex64>> = solutions
        .par_iter()
        .map(|sol| {
            let q = apply_Q(selector, sol);
            // u_incoming-normalized = -2i exp(iφ) u, φ = δ_std - lπ/2
            let phi = sol.asymptotic_phase() - half_pi * sol.angular_momentum() as f64;
            let norm = Complex64::new(0.0, -2.0) * Complex64::from_polar(1.0, phi);
            let scale = (shell.mass() / sol.k()).sqrt();
            weights
                .iter()
                .map(|&(n, w)| q[n] * norm * (w.sqrt() * scale))
                .collect()
        })
        .collect();
    let m = DMatrix::from_fn(rows.len(), weights.len(), |i, s| rows[i][s]);
    let gram = m.conjugate() * m.transpose();
    EffectKernel::new(KernelOperator::new(*grid, gram)?)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Closed-form normalized kernel in the frozen convention.
pub fn closed_form_c(shell: &ShellSpec, table: &PhaseShiftTable, grid: &EnergyGrid) -> Result<NormalizedKernel> {
    closed_form_c_with(shell, table, grid, SignConvention::CALIBRATED)
}

/// `c(E,E') = sinc(ρ(k-k')/2) exp(iσ_R R(k-k')) exp(-iσ_δ(δ(k)-δ(k')))`
/// with `δ` the S-matrix phase `Δ = π + 2 δ_std`.
pub fn closed_form_c_with(
    shell: &ShellSpec,
    table: &PhaseShiftTable,
    grid: &EnergyGrid,
    convention: SignConvention,
) -> Result<NormalizedKernel> {
    table.ensure_matches(grid)?;
    let k = &table.k;
    let delta = &table.delta_paper;
    let (sr, sd) = (convention.sigma_r as f64, convention.sigma_delta as f64);
    let (radius, rho) = (shell.radius(), shell.thickness());
    let kernel = KernelOperator::from_fn(*grid, |i, j| {
        if i == j {
            return Complex64::new(1.0, 0.0);
        }
        let dk = k[i] - k[j];
        let phase = sr * radius * dk - sd * (delta[i] - delta[j]);
        Complex64::from_polar(sinc(0.5 * rho * dk), phase)
    })?;
    NormalizedKernel::new(kernel)
}

/// `d_A(E) = mR/k + ∂_E δ` in the frozen convention.
pub fn shell_connection(shell: &ShellSpec, table: &PhaseShiftTable, grid: &EnergyGrid) -> Result<Connection> {
    shell_connection_with(shell, table, grid, SignConvention::CALIBRATED)
}

/// `d_A(E) = -σ_R mR/k + σ_δ ∂_E δ`, the exact connection of
/// [`closed_form_c_with`] for the same convention.
pub fn shell_connection_with(
    shell: &ShellSpec,
    table: &PhaseShiftTable,
    grid: &EnergyGrid,
    convention: SignConvention,
) -> Result<Connection> {
    table.ensure_matches(grid)?;
    let (sr, sd) = (convention.sigma_r as f64, convention.sigma_delta as f64);
    let values = table
        .k
        .iter()
        .zip(&table.d_delta_de)
        .map(|(&k, &dd)| -sr * shell.mass() * shell.radius() / k + sd * dd)
        .collect();
    Connection::scalar(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::connection;
    use crate::radial::build_phase_table;

    fn plane_wave(k: f64, sign: f64, dr: f64, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::from_polar(1.0, sign * k * (20.0 + i as f64 * dr) + 0.3))
            .collect()
    }

    #[test]
    fn selector_keeps_outgoing_and_kills_incoming() {
        let (k, dr, n) = (1.7, 0.005, 200);
        let q = OutgoingSelector::CALIBRATED;
        let out = plane_wave(k, 1.0, dr, n);
        let inc = plane_wave(k, -1.0, dr, n);
        for (a, b) in q.apply(&out, k, dr).iter().zip(&out) {
            assert!((a + b * 2.0).norm() < 1e-6);
        }
        for a in q.apply(&inc, k, dr) {
            assert!(a.norm() < 1e-6);
        }
    }

    #[test]
    fn literal_selector_keeps_incoming() {
        let (k, dr, n) = (1.7, 0.005, 200);
        let out = plane_wave(k, 1.0, dr, n);
        for a in OutgoingSelector::LITERAL.apply(&out, k, dr) {
            assert!(a.norm() < 1e-6);
        }
    }

    #[test]
    fn sine_has_outgoing_amplitude_two() {
        let (k, dr, n) = (1.3, 0.005, 400);
        let u: Vec<Complex64> = (0..n).map(|i| Complex64::new(2.0 * (k * i as f64 * dr).sin(), 0.0)).collect();
        for (i, q) in OutgoingSelector::CALIBRATED.apply(&u, k, dr).iter().enumerate() {
            // 2 sin(kr) = -i e^{ikr} + i e^{-ikr}; Q maps it to 2i e^{ikr}
            let expected = Complex64::new(0.0, 2.0) * Complex64::from_polar(1.0, k * i as f64 * dr);
            assert!((q - expected).norm() < 1e-6);
        }
    }

    #[test]
    fn shell_weights_integrate_linear_functions() {
        let w = shell_weights(0.123, 0.987, 0.1, 20);
        let integral: f64 = w.iter().map(|&(n, w)| w * (1.0 + 2.0 * n as f64 * 0.1)).sum();
        let exact = (0.987 - 0.123) + (0.987f64.powi(2) - 0.123f64.powi(2));
        assert!((integral - exact).abs() < 1e-12);
        assert!(w.iter().all(|&(_, w)| w > 0.0));
    }

    fn free_setup(n: usize) -> (EnergyGrid, PhaseShiftTable) {
        let grid = EnergyGrid::scalar(1.0, 3.0, n).unwrap();
        let p = PotentialSpec::free(0);
        let settings = RadialSettings::for_potential(&p, grid.momentum(n - 1));
        let table = build_phase_table(&p, &grid.momenta(), &settings).unwrap();
        (grid, table)
    }

    #[test]
    fn free_connection_is_traversal_time() {
        let (grid, table) = free_setup(201);
        let shell = ShellSpec::thin(10.0, 1.0).unwrap();
        let exact = shell_connection(&shell, &table, &grid).unwrap().scalar_values().unwrap();
        let numeric = connection(&closed_form_c(&shell, &table, &grid).unwrap())
            .unwrap()
            .scalar_values()
            .unwrap();
        for i in 0..grid.len() {
            let classical = 10.0 / grid.momentum(i);
            assert!((exact[i] - classical).abs() < 1e-12);
            assert!((numeric[i] - classical).abs() < 1e-8, "i = {i}: {}", numeric[i] - classical);
        }
    }

    #[test]
    fn thin_and_thick_kernels_agree_to_second_order() {
        let (grid, table) = free_setup(41);
        let rho = 0.05;
        let thin = closed_form_c(&ShellSpec::thin(10.0, 1.0).unwrap(), &table, &grid).unwrap();
        let thick = closed_form_c(&ShellSpec::new(10.0, rho, 1.0).unwrap(), &table, &grid).unwrap();
        let dk = grid.momentum(40) - grid.momentum(0);
        let dev = crate::linalg::max_abs(&(thin.kernel().entries() - thick.kernel().entries()));
        assert!(dev < (rho * dk).powi(2), "{dev}");
    }

    #[test]
    fn numerical_kernel_is_gram_positive_and_matches_closed_form() {
        let (grid, table) = free_setup(41);
        let p = PotentialSpec::free(0);
        let shell = ShellSpec::new(10.0, 0.2, 1.0).unwrap();
        let settings = RadialSettings::for_potential(&p, grid.momentum(40));
        let sols = solve_on_grid(&p, &grid, &shell, &settings).unwrap();
        let a = numerical_effect_kernel(&OutgoingSelector::CALIBRATED, &shell, &p, &sols, &grid).unwrap();
        assert!(crate::grid::min_eigenvalue(a.kernel()).unwrap() >= -1e-10);
        assert!(a.diagonal_floor().iter().all(|&d| d > 0.0));
        let c = crate::povm::normalize_kernel(&a).unwrap();
        let closed = closed_form_c(&shell, &table, &grid).unwrap();
        let dev = crate::linalg::max_abs(&(c.kernel().entries() - closed.kernel().entries()));
        assert!(dev < 1e-3, "{dev}");
    }

    #[test]
    fn shell_inside_potential_is_rejected() {
        let grid = EnergyGrid::scalar(1.0, 2.0, 5).unwrap();
        let p = PotentialSpec::new(
            crate::radial::PotentialKind::Exponential { strength: 5.0, range: 1.0 },
            0,
            1.0,
        )
        .unwrap();
        let shell = ShellSpec::new(5.0, 0.2, 1.0).unwrap();
        let settings = RadialSettings::for_potential(&p, 2.0);
        let sols = solve_on_grid(&p, &grid, &shell, &settings).unwrap();
        assert!(numerical_effect_kernel(&OutgoingSelector::CALIBRATED, &shell, &p, &sols, &grid).is_err());
    }
}
