//! Radial Schrödinger equation `u'' = [2mV(r) + l(l+1)/r² - k²] u`,
//! phase-shift extraction and the on-shell scattering matrix.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::analytic::fold;
use crate::bessel::{riccati_j, riccati_n};
use crate::error::{Error, Result};
use crate::grid::EnergyGrid;
use crate::linalg::{self, CMatrix};

/// Potentials below this magnitude count as zero (short-range cutoff).
pub const NEGLIGIBLE_POTENTIAL: f64 = 1e-12;
/// Largest cumulative rescaling of the Numerov iterate.
const MAX_CUMULATIVE_SCALE_LOG10: f64 = 300.0;
const RESCALE_THRESHOLD: f64 = 1e100;

/// Radial potential sampled at points `r_i` with linear interpolation.
///
/// Below the first sample the first value is used; beyond the last sample
/// the potential is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPotential {
    r: Vec<f64>,
    v: Vec<f64>,
}

impl TabulatedPotential {
    pub fn new(r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if r.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: r.len(),
                got: v.len(),
            });
        }
        if r.len() < 2 {
            return Err(Error::InvalidParameter("tabulated potential needs at least two samples".into()));
        }
        if r[0] < 0.0 || r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "tabulated radii must be nonnegative and strictly increasing".into(),
            ));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("tabulated potential values must be finite".into()));
        }
        Ok(Self { r, v })
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn value(&self, r: f64) -> f64 {
        let last = self.r.len() - 1;
        if r <= self.r[0] {
            return self.v[0];
        }
        if r > self.r[last] {
            return 0.0;
        }
        let i = self.r.partition_point(|&x| x <= r).min(last) - 1;
        let s = (r - self.r[i]) / (self.r[i + 1] - self.r[i]);
        self.v[i] + s * (self.v[i + 1] - self.v[i])
    }

    /// Radius beyond which the potential is negligible.
    fn range(&self) -> f64 {
        match self.v.iter().rposition(|x| x.abs() >= NEGLIGIBLE_POTENTIAL) {
            None => 0.0,
            Some(i) => self.r[(i + 1).min(self.r.len() - 1)],
        }
    }
}

/// Two whitespace-separated columns `r V(r)` per line; blank lines and
/// lines starting with `#` are skipped.
impl FromStr for TabulatedPotential {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut r = Vec::new();
        let mut v = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::InvalidParameter(format!("line {}: cannot parse {s:?} as a number", lineno + 1))
                })
            };
            if cols.len() != 2 {
                return Err(Error::InvalidParameter(format!(
                    "line {}: expected two columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            r.push(parse(cols[0])?);
            v.push(parse(cols[1])?);
        }
        Self::new(r, v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Free,
    /// Impenetrable core of the given radius.
    HardSphere { radius: f64 },
    /// `V0` for `r < r0`, zero outside.
    SquareBarrier { height: f64, width: f64 },
    /// `V0 exp(-r/a0)`.
    Exponential { strength: f64, range: f64 },
    Tabulated(TabulatedPotential),
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Free => write!(f, "free"),
            Self::HardSphere { radius } => write!(f, "hard_sphere(a={radius})"),
            Self::SquareBarrier { height, width } => write!(f, "square_barrier(V0={height}, r0={width})"),
            Self::Exponential { strength, range } => write!(f, "exponential(V0={strength}, a0={range})"),
            Self::Tabulated(t) => write!(f, "tabulated({} samples)", t.r.len()),
        }
    }
}

/// A central potential in one angular-momentum channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub angular_momentum: usize,
    pub mass: f64,
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind, angular_momentum: usize, mass: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")))
            }
        };
        match &kind {
            PotentialKind::Free | PotentialKind::Tabulated(_) => {}
            PotentialKind::HardSphere { radius } => positive("hard-sphere radius", *radius)?,
            PotentialKind::SquareBarrier { height, width } => {
                positive("barrier width", *width)?;
                if !height.is_finite() {
                    return Err(Error::InvalidParameter("barrier height must be finite".into()));
                }
            }
            PotentialKind::Exponential { strength, range } => {
                positive("exponential range", *range)?;
                if !strength.is_finite() {
                    return Err(Error::InvalidParameter("exponential strength must be finite".into()));
                }
            }
        }
        Ok(Self {
            kind,
            angular_momentum,
            mass,
        })
    }

    pub fn free(angular_momentum: usize) -> Self {
        Self {
            kind: PotentialKind::Free,
            angular_momentum,
            mass: 1.0,
        }
    }

    /// Same channel and mass with the potential switched off.
    pub fn without_potential(&self) -> Self {
        Self {
            kind: PotentialKind::Free,
            angular_momentum: self.angular_momentum,
            mass: self.mass,
        }
    }

    /// `V(r)`; infinite inside a hard core.
    pub fn value(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Free => 0.0,
            PotentialKind::HardSphere { radius } => {
                if r < *radius {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            PotentialKind::SquareBarrier { height, width } => {
                if r < *width {
                    *height
                } else {
                    0.0
                }
            }
            PotentialKind::Exponential { strength, range } => strength * (-r / range).exp(),
            PotentialKind::Tabulated(t) => t.value(r),
        }
    }

    /// Radius beyond which `|V| < 1e-12`.
    pub fn range(&self) -> f64 {
        match &self.kind {
            PotentialKind::Free => 0.0,
            PotentialKind::HardSphere { radius } => *radius,
            PotentialKind::SquareBarrier { width, .. } => *width,
            PotentialKind::Exponential { strength, range } => {
                if strength.abs() <= NEGLIGIBLE_POTENTIAL {
                    0.0
                } else {
                    range * (strength.abs() / NEGLIGIBLE_POTENTIAL).ln()
                }
            }
            PotentialKind::Tabulated(t) => t.range(),
        }
    }

    /// Radius of a discontinuity the radial grid must hit exactly.
    fn edge(&self) -> Option<f64> {
        match &self.kind {
            PotentialKind::HardSphere { radius } => Some(*radius),
            PotentialKind::SquareBarrier { width, .. } => Some(*width),
            _ => None,
        }
    }

    /// Step actually used for a requested step `dr`: shrunk so that a
    /// potential edge falls on a grid node at index ≥ 3.
    pub fn snapped_step(&self, dr: f64) -> f64 {
        match self.edge() {
            Some(edge) => edge / (edge / dr).ceil().max(3.0),
            None => dr,
        }
    }

    pub fn ensure_negligible_at(&self, r: f64) -> Result<()> {
        let v = self.value(r);
        if !(v.abs() < NEGLIGIBLE_POTENTIAL) {
            return Err(Error::InvalidParameter(format!(
                "potential {} is not negligible at r = {r} (|V| = {:.3e} ≥ {NEGLIGIBLE_POTENTIAL:e})",
                self.kind,
                v.abs()
            )));
        }
        Ok(())
    }
}

/// Radial grid extent and matching radius for a batch of solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSettings {
    pub r_max: f64,
    pub dr: f64,
    pub r_match: f64,
}

impl RadialSettings {
    pub fn new(r_max: f64, dr: f64, r_match: f64) -> Result<Self> {
        if !(dr > 0.0) || !(r_match > 0.0) || !(r_max > r_match + 2.0 * dr) {
            return Err(Error::InvalidParameter(format!(
                "radial settings need dr > 0 and r_max > r_match + 2 dr (r_max = {r_max}, dr = {dr}, r_match = {r_match})"
            )));
        }
        Ok(Self { r_max, dr, r_match })
    }

    /// Matching just outside the potential range (at least 15), step small
    /// enough that `k_max dr ≤ 0.02`.
    pub fn for_potential(p: &PotentialSpec, k_max: f64) -> Self {
        let dr = (0.02 / k_max).min(0.005);
        let r_match = (p.range() + 2.0).max(15.0);
        Self {
            r_max: r_match + 1.0,
            dr,
            r_match,
        }
    }

    /// Extend the grid so that it also covers radius `r`.
    pub fn covering(self, r: f64) -> Self {
        Self {
            r_max: self.r_max.max(r + 1.0),
            ..self
        }
    }
}

/// Regular radial solution normalized to unit asymptotic amplitude,
/// `u → cos δ ĵ_l(kr) - sin δ n̂_l(kr)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    k: f64,
    dr: f64,
    angular_momentum: usize,
    u: Vec<f64>,
    asymptotic_phase: f64,
}

impl RadialSolution {
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn angular_momentum(&self) -> usize {
        self.angular_momentum
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn radius(&self, i: usize) -> f64 {
        i as f64 * self.dr
    }

    pub fn r_grid(&self) -> Vec<f64> {
        (0..self.u.len()).map(|i| self.radius(i)).collect()
    }

    pub fn r_max(&self) -> f64 {
        self.radius(self.u.len() - 1)
    }

    /// Phase of the normalization fit at the outer end of the grid.
    pub fn asymptotic_phase(&self) -> f64 {
        self.asymptotic_phase
    }

    /// Max deviation of `u` from its asymptotic form over `r ≥ from`.
    pub fn asymptotic_residual(&self, from: f64) -> f64 {
        let (s, c) = self.asymptotic_phase.sin_cos();
        let l = self.angular_momentum;
        (0..self.u.len())
            .filter(|&i| self.radius(i) >= from)
            .map(|i| {
                let x = self.k * self.radius(i);
                (self.u[i] - (c * riccati_j(l, x) - s * riccati_n(l, x))).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Numerov integration from the inner boundary to `r_max`.
///
/// The step is shrunk (see [`PotentialSpec::snapped_step`]) so that a hard
/// core or barrier edge sits on a node; across a barrier edge the three-point
/// formula carries the jump correction that keeps it fourth order.
pub fn solve_radial(p: &PotentialSpec, k: f64, r_max: f64, dr: f64) -> Result<RadialSolution> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidParameter(format!("momentum must be positive, got {k}")));
    }
    if !(dr > 0.0) {
        return Err(Error::InvalidParameter(format!("radial step must be positive, got {dr}")));
    }
    let dr = p.snapped_step(dr);
    if k * dr >= 0.2 {
        return Err(Error::InvalidParameter(format!(
            "radial step too coarse: k dr = {:.3} ≥ 0.2",
            k * dr
        )));
    }
    let last = (r_max / dr).ceil() as usize;
    if last < 8 || p.range() >= r_max {
        return Err(Error::InvalidParameter(format!(
            "radial grid [0, {r_max}] does not extend beyond the potential range {}",
            p.range()
        )));
    }
    integrate(p, k, last, dr)
}

fn integrate(p: &PotentialSpec, k: f64, last: usize, dr: f64) -> Result<RadialSolution> {
    let l = p.angular_momentum;
    let centrifugal = (l * (l + 1)) as f64;
    let two_m = 2.0 * p.mass;
    let h2 = dr * dr;
    let edge_index = p.edge().map(|e| (e / dr).round() as usize);
    let core = matches!(p.kind, PotentialKind::HardSphere { .. });

    // g approached from the left and from the right of each node
    let mut g_left = vec![0.0; last + 1];
    let mut g_right = vec![0.0; last + 1];
    for i in 0..=last {
        let r = i as f64 * dr;
        let g = |v: f64| {
            if r == 0.0 {
                two_m * v - k * k
            } else {
                two_m * v + centrifugal / (r * r) - k * k
            }
        };
        let v = if core { 0.0 } else { p.value(r) };
        g_left[i] = g(v);
        g_right[i] = g(v);
        if r == 0.0 && l > 0 {
            g_left[i] = 0.0;
            g_right[i] = 0.0;
        }
        if Some(i) == edge_index {
            if let PotentialKind::SquareBarrier { height, .. } = p.kind {
                g_left[i] = g(height);
            }
        }
    }

    let mut u = vec![0.0; last + 1];
    let first = if core {
        let start = edge_index.expect("hard core has an edge");
        u[start + 1] = dr;
        start + 1
    } else if l == 0 {
        let q = k * k - two_m * p.value(0.0);
        u[1] = dr * (1.0 - q * h2 / 6.0);
        1
    } else {
        let q = k * k - two_m * p.value(0.0);
        let series = |r: f64| r.powi(l as i32 + 1) * (1.0 - q * r * r / (2.0 * (2 * l + 3) as f64));
        u[1] = series(dr);
        u[2] = series(2.0 * dr);
        2
    };

    let mut scale_log10 = 0.0;
    for n in first..last {
        let t_prev = h2 * g_right[n - 1] / 12.0;
        let t_next = h2 * g_left[n + 1] / 12.0;
        let jump = g_right[n] - g_left[n];
        let t_mid = h2 * 0.5 * (g_left[n] + g_right[n]) / 12.0;
        let mut rhs = 2.0 * u[n] * (1.0 + 5.0 * t_mid) - u[n - 1] * (1.0 - t_prev);
        if jump != 0.0 && n >= 2 {
            let slope = (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * dr);
            rhs += dr * h2 / 12.0 * jump * slope;
        }
        u[n + 1] = rhs / (1.0 - t_next);
        if u[n + 1].abs() > RESCALE_THRESHOLD {
            for x in &mut u[..=n + 1] {
                *x /= RESCALE_THRESHOLD;
            }
            scale_log10 += RESCALE_THRESHOLD.log10();
            if scale_log10 > MAX_CUMULATIVE_SCALE_LOG10 {
                return Err(Error::Numerical(format!(
                    "radial solution grew beyond 1e{MAX_CUMULATIVE_SCALE_LOG10} (classically forbidden region too deep)"
                )));
            }
        }
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("radial integration produced non-finite values".into()));
    }

    let (amplitude_sin, amplitude_cos) = match_pair(&u, k, dr, l, last - 1)
        .ok_or_else(|| Error::Numerical("degenerate asymptotic fit at r_max".into()))?;
    let amplitude = amplitude_sin.hypot(amplitude_cos);
    if !(amplitude > 0.0) {
        return Err(Error::Numerical("radial solution vanishes identically".into()));
    }
    let raw = amplitude_sin.atan2(amplitude_cos);
    let phase = fold(raw);
    // flipping the phase by π flips the sign of the amplitude
    let signed = if (raw - phase).abs() > 1.0 { -amplitude } else { amplitude };
    for x in &mut u {
        *x /= signed;
    }
    Ok(RadialSolution {
        k,
        dr,
        angular_momentum: l,
        u,
        asymptotic_phase: phase,
    })
}

/// `(A sin δ, A cos δ)` from `u` at nodes `i` and `i+1`, or `None` when the
/// matching determinant is too small.
fn match_pair(u: &[f64], k: f64, dr: f64, l: usize, i: usize) -> Option<(f64, f64)> {
    let (x1, x2) = (k * i as f64 * dr, k * (i + 1) as f64 * dr);
    let (j1, j2) = (riccati_j(l, x1), riccati_j(l, x2));
    let (n1, n2) = (riccati_n(l, x1), riccati_n(l, x2));
    let det = j1 * n2 - j2 * n1;
    // the Wronskian makes det ≈ k dr; anything far below signals trouble
    if !(det.abs() > 1e-3 * k * dr) {
        return None;
    }
    let (u1, u2) = (u[i], u[i + 1]);
    Some(((u1 * j2 - u2 * j1) / det, (u1 * n2 - u2 * n1) / det))
}

/// Two-point match at `r_match` and `r_match + dr` against
/// `A [cos δ ĵ_l(kr) - sin δ n̂_l(kr)]`; returns `δ` in `(-π/2, π/2]`.
pub fn extract_phase_shift(sol: &RadialSolution, p: &PotentialSpec, r_match: f64) -> Result<f64> {
    p.ensure_negligible_at(r_match)?;
    let first = (r_match / sol.dr).round() as usize;
    for i in (first..sol.u.len().saturating_sub(1)).take(10) {
        if let Some((s, c)) = match_pair(&sol.u, sol.k, sol.dr, sol.angular_momentum, i) {
            return Ok(fold(s.atan2(c)));
        }
    }
    Err(Error::Numerical(format!(
        "no usable matching point near r = {r_match} within the radial grid"
    )))
}

/// Phase shift at one momentum, measured relative to free propagation on
/// the same radial grid so that the grid's own dispersion cancels.
pub fn phase_shift(p: &PotentialSpec, k: f64, settings: &RadialSettings) -> Result<f64> {
    let sol = solve_radial(p, k, settings.r_max, settings.dr)?;
    let dr = sol.dr;
    let reference = integrate(&p.without_potential(), k, sol.u.len() - 1, dr)?;
    let interacting = extract_phase_shift(&sol, p, settings.r_match)?;
    let free = extract_phase_shift(&reference, &p.without_potential(), settings.r_match)?;
    Ok(fold(interacting - free))
}

/// `dδ_std/dE` by Richardson-refined central differences in energy.
pub fn phase_shift_energy_derivative(p: &PotentialSpec, k: f64, settings: &RadialSettings) -> Result<f64> {
    let center = phase_shift(p, k, settings)?;
    let energy = k * k / (2.0 * p.mass);
    let eps = (0.02_f64).min(0.25 * energy);
    let at = |e: f64| -> Result<f64> {
        let d = phase_shift(p, (2.0 * p.mass * e).sqrt(), settings)?;
        Ok(d + PI * ((center - d) / PI).round())
    };
    let difference = |h: f64| -> Result<f64> { Ok((at(energy + h)? - at(energy - h)?) / (2.0 * h)) };
    let coarse = difference(eps)?;
    let fine = difference(eps / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Phase shifts on a momentum grid with a continuous branch.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShiftTable {
    pub potential: PotentialSpec,
    pub k: Vec<f64>,
    /// Principal values in `(-π/2, π/2]` before unwrapping.
    pub delta_principal: Vec<f64>,
    /// Multiple of π added to each principal value.
    pub branch: Vec<i64>,
    /// Standard convention, continuous branch: `u → sin(kr - lπ/2 + δ)`.
    pub delta_std: Vec<f64>,
    /// S-matrix phase `Δ = π + 2 δ_std`, the phase of `exp(-ikr) + exp(ikr + iΔ)`.
    pub delta_paper: Vec<f64>,
    /// `dΔ/dE`.
    pub d_delta_de: Vec<f64>,
}

impl PhaseShiftTable {
    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.k.iter().map(|k| k * k / (2.0 * self.potential.mass)).collect()
    }

    /// Check that the table was built on the momenta of `grid`.
    pub fn ensure_matches(&self, grid: &EnergyGrid) -> Result<()> {
        if self.k.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: self.k.len(),
            });
        }
        for (i, &k) in self.k.iter().enumerate() {
            let target = grid.momentum(i);
            if (k - target).abs() > 1e-12 * target {
                return Err(Error::InvalidParameter(format!(
                    "phase table momentum {k} does not match grid momentum {target} at index {i}"
                )));
            }
        }
        if (self.potential.mass - grid.mass()).abs() > 1e-15 * grid.mass() {
            return Err(Error::InvalidParameter("phase table and energy grid use different masses".into()));
        }
        Ok(())
    }
}

/// Solves every momentum in parallel, unwraps the branch along the grid
/// and attaches `dΔ/dE`.
pub fn build_phase_table(p: &PotentialSpec, k_grid: &[f64], settings: &RadialSettings) -> Result<PhaseShiftTable> {
    if k_grid.is_empty() {
        return Err(Error::InvalidParameter("empty momentum grid".into()));
    }
    if k_grid[0] <= 0.0 || k_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("momentum grid must be positive and ascending".into()));
    }
    let points: Vec<(f64, f64)> = k_grid
        .par_iter()
        .map(|&k| Ok((phase_shift(p, k, settings)?, phase_shift_energy_derivative(p, k, settings)?)))
        .collect::<Result<_>>()?;

    let mut branch = vec![0i64; k_grid.len()];
    let mut delta_std = vec![points[0].0; k_grid.len()];
    for i in 1..k_grid.len() {
        let (principal, slope_e) = points[i];
        let (_, prev_slope_e) = points[i - 1];
        let de = (k_grid[i] * k_grid[i] - k_grid[i - 1] * k_grid[i - 1]) / (2.0 * p.mass);
        let predicted = delta_std[i - 1] + 0.5 * (slope_e + prev_slope_e) * de;
        let n = ((predicted - principal) / PI).round();
        let value = principal + n * PI;
        if (value - delta_std[i - 1]).abs() >= PI / 2.0 {
            return Err(Error::Numerical(format!(
                "phase unwrapping is ambiguous between k = {} and k = {}; use a finer momentum grid",
                k_grid[i - 1],
                k_grid[i]
            )));
        }
        branch[i] = n as i64;
        delta_std[i] = value;
    }
    Ok(PhaseShiftTable {
        potential: p.clone(),
        k: k_grid.to_vec(),
        delta_principal: points.iter().map(|p| p.0).collect(),
        branch,
        delta_paper: delta_std.iter().map(|d| PI + 2.0 * d).collect(),
        d_delta_de: points.iter().map(|p| 2.0 * p.1).collect(),
        delta_std,
    })
}

/// On-shell scattering matrix `S(E)` at every point of an energy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OnShellMatrix {
    grid: EnergyGrid,
    values: Vec<CMatrix>,
}

/// Unitarity tolerance for externally supplied `S(E)`.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

impl OnShellMatrix {
    /// Unitary fiber matrices, one per grid point.
    pub fn from_matrices(grid: EnergyGrid, values: Vec<CMatrix>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let d = grid.fiber_dim();
        for (index, s) in values.iter().enumerate() {
            if s.nrows() != d || s.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: s.nrows(),
                });
            }
            let deviation = linalg::unitarity_deviation(s);
            if deviation > UNITARITY_TOLERANCE {
                return Err(Error::NotUnitary { index, deviation });
            }
        }
        Ok(Self { grid, values })
    }

    /// Scalar `S(E) = exp(i phase(E))`.
    pub fn from_phases(grid: EnergyGrid, phases: &[f64]) -> Result<Self> {
        if grid.fiber_dim() != 1 {
            return Err(Error::InvalidParameter("scalar S on a fibered grid".into()));
        }
        if phases.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: phases.len(),
            });
        }
        let values = phases
            .iter()
            .map(|&p| DMatrix::from_element(1, 1, Complex64::from_polar(1.0, p)))
            .collect();
        Ok(Self { grid, values })
    }

    pub fn identity(grid: EnergyGrid) -> Self {
        let d = grid.fiber_dim();
        Self {
            values: vec![CMatrix::identity(d, d); grid.len()],
            grid,
        }
    }

    pub fn grid(&self) -> &EnergyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }
}

/// `S(E) = exp(iΔ(k(E)))` from a table built on the grid momenta.
#[allow(non_snake_case)]
pub fn on_shell_S(table: &PhaseShiftTable, grid: &EnergyGrid) -> Result<OnShellMatrix> {
    table.ensure_matches(grid)?;
    OnShellMatrix::from_phases(*grid, &table.delta_paper)
}
