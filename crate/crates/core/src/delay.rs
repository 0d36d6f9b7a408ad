//! Scattering time delay from three routes: the shift of the wave-packet
//! click density, the on-shell Eisenbud–Wigner formula, and the expectation
//! of `S^{-1}[T_A, S]`.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{inner_product, EnergyGrid, Section};
use crate::linalg::{self, CMatrix};
use crate::povm::{connection, Connection, NormalizedKernel};
use crate::radial::{build_phase_table, on_shell_S, phase_shift_energy_derivative, OnShellMatrix, PhaseShiftTable, PotentialSpec, RadialSettings};
use crate::shell::{closed_form_c, shell_connection, ShellSpec, SignConvention};
use crate::stencil::UniformDerivative;

/// Packets with `σ_k/k0` at or below this are "narrow".
pub const NARROW_RATIO: f64 = 0.05;
/// Captured mass below which the time window is considered too short.
pub const MIN_CAPTURED_MASS: f64 = 0.99;

/// Gaussian momentum packet `φ(k) ∝ exp(-(k-k0)²/4σ_k²)`, cut at `5σ_k`
/// and shifted so it vanishes continuously there, stored as a normalized
/// section in the energy representation (`Φ(E) = φ(k) √(m/k)`).
#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    k0: f64,
    sigma_k: f64,
    section: Section,
}

impl WavePacket {
    pub fn gaussian(grid: &EnergyGrid, k0: f64, sigma_k: f64) -> Result<Self> {
        if !(k0 > 0.0) || !(sigma_k > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "packet needs k0 > 0 and sigma_k > 0 (k0 = {k0}, sigma_k = {sigma_k})"
            )));
        }
        let (lo, hi) = (k0 - 5.0 * sigma_k, k0 + 5.0 * sigma_k);
        let (k_min, k_max) = (grid.momentum(0), grid.momentum(grid.len() - 1));
        if !(lo > k_min && hi < k_max) {
            return Err(Error::InvalidParameter(format!(
                "packet support [{lo}, {hi}] must lie strictly inside the grid momenta [{k_min}, {k_max}]"
            )));
        }
        if grid.fiber_dim() != 1 {
            return Err(Error::InvalidParameter("wave packets are scalar".into()));
        }
        let floor = (-25.0_f64 / 4.0).exp();
        let m = grid.mass();
        let values = DVector::from_iterator(
            grid.len(),
            grid.momenta().into_iter().map(|k| {
                if (k - k0).abs() >= 5.0 * sigma_k {
                    return Complex64::new(0.0, 0.0);
                }
                let x = (k - k0) / sigma_k;
                Complex64::new(((-x * x / 4.0).exp() - floor) * (m / k).sqrt(), 0.0)
            }),
        );
        let section = Section::new(*grid, values)?.normalized()?;
        Ok(Self { k0, sigma_k, section })
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn sigma_k(&self) -> f64 {
        self.sigma_k
    }

    pub fn section(&self) -> &Section {
        &self.section
    }

    pub fn is_narrow(&self) -> bool {
        self.sigma_k / self.k0 <= NARROW_RATIO
    }

    /// `E0 = k0²/2m`.
    pub fn central_energy(&self) -> f64 {
        self.k0 * self.k0 / (2.0 * self.section.grid().mass())
    }
}

/// Uniform time axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeAxis {
    pub t_min: f64,
    pub t_max: f64,
    pub n: usize,
}

impl TimeAxis {
    pub fn new(t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        if !(t_max > t_min) || n < 3 {
            return Err(Error::InvalidParameter(format!(
                "time axis needs t_max > t_min and at least 3 points (got [{t_min}, {t_max}], n = {n})"
            )));
        }
        Ok(Self { t_min, t_max, n })
    }

    pub fn step(&self) -> f64 {
        (self.t_max - self.t_min) / (self.n - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.step();
        (0..self.n).map(|i| self.t_min + i as f64 * dt).collect()
    }

    fn within(&self, grid: &EnergyGrid) -> Result<()> {
        let horizon = grid.nyquist_time();
        for t in [self.t_min, self.t_max] {
            if t.abs() > horizon {
                return Err(Error::OutsideNyquistWindow { time: t, horizon });
            }
        }
        Ok(())
    }
}

/// Click density on a time axis, renormalized to unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickDensity {
    pub times: Vec<f64>,
    pub density: Vec<f64>,
    /// `Σ p Δt` before renormalization.
    pub captured_mass: f64,
}

impl ClickDensity {
    pub fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn mean(&self) -> f64 {
        let dt = self.step();
        self.times.iter().zip(&self.density).map(|(t, p)| t * p).sum::<f64>() * dt
    }

    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.step()
    }
}

/// `p(t) = |G(t)|²/2π` with
/// `G(t) = Σ_j w Φ_j exp(-iσ_R k_j R + iσ_δ δ(k_j) - i t E_j)`,
/// the factorized form of the click density for the closed-form shell kernel.
pub fn packet_click_density(
    packet: &WavePacket,
    shell: &ShellSpec,
    table: &PhaseShiftTable,
    axis: &TimeAxis,
) -> Result<ClickDensity> {
    packet_click_density_with(packet, shell, table, axis, SignConvention::CALIBRATED)
}

pub fn packet_click_density_with(
    packet: &WavePacket,
    shell: &ShellSpec,
    table: &PhaseShiftTable,
    axis: &TimeAxis,
    convention: SignConvention,
) -> Result<ClickDensity> {
    let grid = *packet.section.grid();
    table.ensure_matches(&grid)?;
    axis.within(&grid)?;
    let (sr, sd) = (convention.sigma_r as f64, convention.sigma_delta as f64);
    let w = grid.weight();
    let energies = grid.energies();
    let phi = packet.section.values();
    // amplitudes with the time-independent phase folded in
    let support: Vec<(f64, Complex64)> = (0..grid.len())
        .filter(|&j| phi[j] != Complex64::new(0.0, 0.0))
        .map(|j| {
            let phase = -sr * table.k[j] * shell.radius() + sd * table.delta_paper[j];
            (energies[j], phi[j] * w * Complex64::from_polar(1.0, phase))
        })
        .collect();
    let times = axis.times();
    let raw: Vec<f64> = times
        .iter()
        .map(|&t| {
            let g: Complex64 = support
                .iter()
                .map(|&(e, a)| a * Complex64::from_polar(1.0, -t * e))
                .sum();
            g.norm_sqr() / (2.0 * PI)
        })
        .collect();
    let captured_mass = raw.iter().sum::<f64>() * axis.step();
    if captured_mass < MIN_CAPTURED_MASS {
        log::warn!(
            "time window [{}, {}] captures only {captured_mass:.4} of the click probability",
            axis.t_min,
            axis.t_max
        );
    }
    if !(captured_mass > 0.0) {
        return Err(Error::Numerical("click density vanishes on the time window".into()));
    }
    Ok(ClickDensity {
        times,
        density: raw.into_iter().map(|p| p / captured_mass).collect(),
        captured_mass,
    })
}

/// Shift between the free and interacting click densities.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftMeasurement {
    pub t_mean_free: f64,
    pub t_mean_int: f64,
    pub shift_mean: f64,
    pub shift_peak: f64,
    /// False when either density has two local maxima above half height.
    pub peak_reliable: bool,
    /// `Σ |p_int(t + s) - p_free(t)| Δt` at the supplied shift `s`.
    pub l1_overlap_residual: f64,
}

fn peak_location(times: &[f64], p: &[f64]) -> (f64, bool) {
    let (imax, &pmax) = p
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty density");
    let maxima = (1..p.len() - 1)
        .filter(|&i| p[i] > p[i - 1] && p[i] >= p[i + 1] && p[i] > 0.5 * pmax)
        .count();
    let location = if imax == 0 || imax + 1 == p.len() {
        times[imax]
    } else {
        let (a, b, c) = (p[imax - 1], p[imax], p[imax + 1]);
        let denom = a - 2.0 * b + c;
        let offset = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        times[imax] + offset * (times[1] - times[0])
    };
    (location, maxima <= 1)
}

fn interpolate(times: &[f64], p: &[f64], t: f64) -> f64 {
    let dt = times[1] - times[0];
    let x = (t - times[0]) / dt;
    if x < 0.0 || x > (times.len() - 1) as f64 {
        return 0.0;
    }
    let i = (x.floor() as usize).min(times.len() - 2);
    let s = x - i as f64;
    p[i] * (1.0 - s) + p[i + 1] * s
}

/// Mean and peak shifts, and the `L¹` residual of `p_int(t + shift) - p_free(t)`.
pub fn measure_shift(p_free: &[f64], p_int: &[f64], times: &[f64], shift: f64) -> Result<ShiftMeasurement> {
    if p_free.len() != times.len() || p_int.len() != times.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: p_free.len().min(p_int.len()),
        });
    }
    if times.len() < 3 {
        return Err(Error::InvalidParameter("need at least 3 time points".into()));
    }
    let dt = times[1] - times[0];
    let mean = |p: &[f64]| times.iter().zip(p).map(|(t, p)| t * p).sum::<f64>() * dt;
    let (t_mean_free, t_mean_int) = (mean(p_free), mean(p_int));
    let (peak_free, ok_free) = peak_location(times, p_free);
    let (peak_int, ok_int) = peak_location(times, p_int);
    let l1 = times
        .iter()
        .zip(p_free)
        .map(|(&t, &pf)| (interpolate(times, p_int, t + shift) - pf).abs())
        .sum::<f64>()
        * dt;
    Ok(ShiftMeasurement {
        t_mean_free,
        t_mean_int,
        shift_mean: t_mean_int - t_mean_free,
        shift_peak: peak_int - peak_free,
        peak_reliable: ok_free && ok_int,
        l1_overlap_residual: l1,
    })
}

/// Pointwise on-shell delay `S^{-1}(-i∂_E)S + S^{-1}[d_A, S]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EisenbudWignerDelay {
    pub derivative_term: Vec<CMatrix>,
    pub commutator_term: Vec<CMatrix>,
}

impl EisenbudWignerDelay {
    pub fn total(&self) -> Vec<CMatrix> {
        self.derivative_term
            .iter()
            .zip(&self.commutator_term)
            .map(|(a, b)| a + b)
            .collect()
    }

    /// Real delays in the scalar case.
    pub fn scalar(&self) -> Option<Vec<f64>> {
        (self.derivative_term[0].nrows() == 1).then(|| self.total().iter().map(|m| m[(0, 0)].re).collect())
    }

    /// Largest entry of the commutator term anywhere on the grid.
    pub fn commutator_magnitude(&self) -> f64 {
        self.commutator_term.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    /// `Σ_i w Φ_i† t(E_i) Φ_i`.
    pub fn weighted_average(&self, phi: &Section) -> f64 {
        let grid = phi.grid();
        self.total()
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let v = DVector::from_column_slice(phi.fiber(i));
                v.dotc(&(linalg::hermitize(t) * &v)).re
            })
            .sum::<f64>()
            * grid.weight()
    }
}

pub fn eisenbud_wigner(s: &OnShellMatrix, d: &Connection) -> Result<EisenbudWignerDelay> {
    let grid = *s.grid();
    grid.ensure_same(d.grid())?;
    let n = grid.len();
    let deriv = UniformDerivative::new(n, grid.spacing());
    let values = s.values();
    let minus_i = Complex64::new(0.0, -1.0);
    let mut derivative_term = Vec::with_capacity(n);
    let mut commutator_term = Vec::with_capacity(n);
    for i in 0..n {
        let (start, w) = deriv.stencil(i);
        let mut ds = CMatrix::zeros(values[i].nrows(), values[i].ncols());
        for (k, &wk) in w.iter().enumerate() {
            ds += &values[start + k] * Complex64::new(wk, 0.0);
        }
        let s_inv = values[i].adjoint();
        derivative_term.push(&s_inv * ds * minus_i);
        let dv = &d.values()[i];
        commutator_term.push(&s_inv * (dv * &values[i] - &values[i] * dv));
    }
    Ok(EisenbudWignerDelay {
        derivative_term,
        commutator_term,
    })
}

/// `⟨φ_out, T_A φ_out⟩ - ⟨φ_in, T_A φ_in⟩` and `⟨φ_in, S^{-1}[T_A, S] φ_in⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorDelay {
    pub difference_form: f64,
    pub commutator_form: f64,
}

pub fn operator_delay(phi: &Section, s: &OnShellMatrix, c: &NormalizedKernel) -> Result<OperatorDelay> {
    let grid = *phi.grid();
    grid.ensure_same(s.grid())?;
    let d = connection(c)?;
    let apply_s = |x: &Section| -> Result<Section> {
        let dim = grid.fiber_dim();
        let mut out = DVector::zeros(grid.dim());
        for (i, m) in s.values().iter().enumerate() {
            let v = DVector::from_column_slice(x.fiber(i));
            out.rows_mut(i * dim, dim).copy_from(&(m * v));
        }
        Section::new(grid, out)
    };
    let t_in = d.apply_time_operator(phi)?;
    let out = apply_s(phi)?;
    let t_out = d.apply_time_operator(&out)?;
    let difference_form = inner_product(&out, &t_out)?.re - inner_product(phi, &t_in)?.re;
    // S^{-1}[T, S]φ = S†(T S φ - S T φ)
    let s_t_in = apply_s(&t_in)?;
    let mut commutator = t_out.values() - s_t_in.values();
    let dim = grid.fiber_dim();
    for (i, m) in s.values().iter().enumerate() {
        let v = commutator.rows(i * dim, dim).clone_owned();
        commutator.rows_mut(i * dim, dim).copy_from(&(m.adjoint() * v));
    }
    let commutator_form = inner_product(phi, &Section::new(grid, commutator)?)?.re;
    Ok(OperatorDelay {
        difference_form,
        commutator_form,
    })
}

/// Inputs of an end-to-end delay measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayExperiment {
    pub grid: EnergyGrid,
    pub potential: PotentialSpec,
    pub settings: RadialSettings,
    pub shell: ShellSpec,
    pub k0: f64,
    pub sigma_k: f64,
    pub axis: TimeAxis,
}

/// Everything a delay run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayReport {
    pub free_density: ClickDensity,
    pub interacting_density: ClickDensity,
    pub shift: ShiftMeasurement,
    /// `∂_E Δ` at `E0`, with `Δ = π + 2 δ_std` the S-matrix phase.
    pub wigner_delay_at_k0: f64,
    /// Eisenbud–Wigner delay averaged over `|Φ|²`.
    pub wigner_delay_averaged: f64,
    pub operator_delay: OperatorDelay,
    /// Classical traversal time `mR/k0`.
    pub traversal_time: f64,
}

/// Relative tolerance of the three-route comparison.
pub const ROUTE_TOLERANCE: f64 = 0.05;

impl DelayReport {
    /// `(density vs Eisenbud–Wigner, density vs operator, Eisenbud–Wigner vs operator)`
    /// as relative differences.
    pub fn route_disagreements(&self) -> [f64; 3] {
        let floor = 1e-4 * self.traversal_time;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(floor);
        let (d, e, o) = (
            self.shift.shift_mean,
            self.wigner_delay_averaged,
            self.operator_delay.difference_form,
        );
        [rel(d, e), rel(d, o), rel(e, o)]
    }

    pub fn routes_agree(&self) -> bool {
        self.route_disagreements().iter().all(|&r| r <= ROUTE_TOLERANCE)
    }
}

impl DelayExperiment {
    pub fn run(&self) -> Result<DelayReport> {
        let momenta = self.grid.momenta();
        let settings = self.settings.covering(self.shell.radius());
        let free_potential = self.potential.without_potential();
        let table_int = build_phase_table(&self.potential, &momenta, &settings)?;
        let table_free = build_phase_table(&free_potential, &momenta, &settings)?;
        let packet = WavePacket::gaussian(&self.grid, self.k0, self.sigma_k)?;

        let free_density = packet_click_density(&packet, &self.shell, &table_free, &self.axis)?;
        let interacting_density = packet_click_density(&packet, &self.shell, &table_int, &self.axis)?;
        let wigner_delay_at_k0 = 2.0 * phase_shift_energy_derivative(&self.potential, self.k0, &settings)?;
        let shift = measure_shift(
            &free_density.density,
            &interacting_density.density,
            &free_density.times,
            wigner_delay_at_k0,
        )?;

        let s = on_shell_S(&table_int, &self.grid)?;
        let detector = shell_connection(&self.shell, &table_free, &self.grid)?;
        let ew = eisenbud_wigner(&s, &detector)?;
        let c = closed_form_c(&self.shell, &table_free, &self.grid)?;
        let op = operator_delay(packet.section(), &s, &c)?;
        Ok(DelayReport {
            free_density,
            interacting_density,
            shift,
            wigner_delay_at_k0,
            wigner_delay_averaged: ew.weighted_average(packet.section()),
            operator_delay: op,
            traversal_time: self.shell.mass() * self.shell.radius() / self.k0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> EnergyGrid {
        EnergyGrid::scalar(0.5, 4.5, 401).unwrap()
    }

    #[test]
    fn packet_is_normalized_and_vanishes_at_edges() {
        let p = WavePacket::gaussian(&grid(), 2.0, 0.04).unwrap();
        assert!((p.section().norm_squared() - 1.0).abs() < 1e-10);
        assert!(p.section().boundary_magnitude() == 0.0);
        assert!(p.is_narrow());
        assert!(WavePacket::gaussian(&grid(), 1.0, 0.1).is_err());
    }

    #[test]
    fn identical_densities_have_no_shift() {
        let times: Vec<f64> = (0..101).map(|i| i as f64 * 0.1).collect();
        let p: Vec<f64> = times.iter().map(|t| (-(t - 5.0f64).powi(2)).exp() / PI.sqrt()).collect();
        let m = measure_shift(&p, &p, &times, 0.0).unwrap();
        assert_eq!(m.shift_mean, 0.0);
        assert_eq!(m.shift_peak, 0.0);
        assert!(m.l1_overlap_residual < 1e-14);
        assert!(m.peak_reliable);
    }

    #[test]
    fn translated_density_is_detected() {
        let times: Vec<f64> = (0..2001).map(|i| i as f64 * 0.01).collect();
        let bump = |c: f64| -> Vec<f64> {
            times.iter().map(|t| (-(t - c).powi(2)).exp() / PI.sqrt()).collect()
        };
        let m = measure_shift(&bump(8.0), &bump(9.5), &times, 1.5).unwrap();
        assert!((m.shift_mean - 1.5).abs() < 1e-8);
        assert!((m.shift_peak - 1.5).abs() < 1e-4);
        assert!(m.l1_overlap_residual < 1e-4);
    }

    #[test]
    fn bimodal_density_flags_peak() {
        let times: Vec<f64> = (0..2001).map(|i| i as f64 * 0.01).collect();
        let p: Vec<f64> = times
            .iter()
            .map(|t| (-(t - 5.0f64).powi(2)).exp() + 0.8 * (-(t - 12.0f64).powi(2)).exp())
            .collect();
        assert!(!measure_shift(&p, &p, &times, 0.0).unwrap().peak_reliable);
    }

    #[test]
    fn constant_phase_has_no_delay() {
        let g = grid();
        let s = OnShellMatrix::from_phases(g, &vec![0.7; g.len()]).unwrap();
        let d = Connection::scalar(g, vec![3.0; g.len()]).unwrap();
        let ew = eisenbud_wigner(&s, &d).unwrap();
        for t in ew.scalar().unwrap() {
            assert!(t.abs() < 1e-10);
        }
        assert_eq!(ew.commutator_magnitude(), 0.0);
    }

    #[test]
    fn identity_s_has_no_operator_delay() {
        let g = grid();
        let p = WavePacket::gaussian(&g, 2.0, 0.1).unwrap();
        let c = NormalizedKernel::phase(g, 4.0);
        let op = operator_delay(p.section(), &OnShellMatrix::identity(g), &c).unwrap();
        assert_eq!(op.difference_form, 0.0);
        assert_eq!(op.commutator_form, 0.0);
    }

    #[test]
    fn linear_phase_gives_constant_delay() {
        let g = grid();
        let phases: Vec<f64> = g.energies().iter().map(|e| -1.5 * e).collect();
        let s = OnShellMatrix::from_phases(g, &phases).unwrap();
        let p = WavePacket::gaussian(&g, 2.0, 0.1).unwrap();
        let c = NormalizedKernel::phase(g, 4.0);
        let op = operator_delay(p.section(), &s, &c).unwrap();
        assert!((op.difference_form + 1.5).abs() < 1e-8);
        assert!((op.difference_form - op.commutator_form).abs() < 1e-10);
    }
}
