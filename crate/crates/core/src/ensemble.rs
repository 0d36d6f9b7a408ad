//! Random smooth effects and states for property checks.
//!
//! Effects are sums of a few smooth rank-one terms plus a full-rank
//! baseline, so `a(E,E) > 0` everywhere. States are chirped Gaussians that
//! vanish at both ends of the grid to below 1e-10.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::Result;
use crate::grid::{EnergyGrid, KernelOperator, Section};
use crate::povm::EffectKernel;

fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<Complex64> {
    let v = DVector::from_fn(d, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

/// Largest phase slope `|τ|` used by the generators (units of time).
pub const MAX_PHASE_SLOPE: f64 = 6.0;

pub fn random_smooth_effect<R: Rng + ?Sized>(grid: &EnergyGrid, rng: &mut R) -> Result<EffectKernel> {
    let n = grid.len();
    let d = grid.fiber_dim();
    let energies = grid.energies();
    let (lo, width) = (grid.e_min(), grid.e_max() - grid.e_min());
    let mut profiles: Vec<Vec<DVector<Complex64>>> = Vec::new();

    // full-rank baseline: one smooth term per fiber direction
    for axis in 0..d {
        let amp = rng.random_range(0.4..0.8);
        let wiggle = rng.random_range(0.0..0.3);
        let freq = rng.random_range(0.5..2.0) * PI / width;
        let offset = rng.random_range(0.0..2.0 * PI);
        let tau = rng.random_range(-MAX_PHASE_SLOPE..MAX_PHASE_SLOPE);
        profiles.push(
            energies
                .iter()
                .map(|&e| {
                    let mag = amp + wiggle * (freq * (e - lo) + offset).sin();
                    let mut v = DVector::zeros(d);
                    v[axis] = Complex64::from_polar(mag, -tau * e);
                    v
                })
                .collect(),
        );
    }
    // localized bumps with random fiber directions
    for _ in 0..2 {
        let center = lo + rng.random_range(0.2..0.8) * width;
        let spread = rng.random_range(0.1..0.3) * width;
        let amp = rng.random_range(0.2..1.0);
        let tau = rng.random_range(-MAX_PHASE_SLOPE..MAX_PHASE_SLOPE);
        let dir = random_unit_vector(rng, d);
        profiles.push(
            energies
                .iter()
                .map(|&e| {
                    let x = (e - center) / spread;
                    &dir * Complex64::from_polar(amp * (-0.5 * x * x).exp(), -tau * e)
                })
                .collect(),
        );
    }

    let mut entries = DMatrix::zeros(n * d, n * d);
    for g in &profiles {
        for i in 0..n {
            for j in 0..n {
                for a in 0..d {
                    for b in 0..d {
                        entries[(i * d + a, j * d + b)] += g[i][a] * g[j][b].conj();
                    }
                }
            }
        }
    }
    EffectKernel::new(KernelOperator::new(*grid, entries)?)
}

/// Normalized chirped Gaussian centered in the middle fifth of the grid
/// with width 1/20 of the energy range.
pub fn random_smooth_state<R: Rng + ?Sized>(grid: &EnergyGrid, rng: &mut R) -> Result<Section> {
    let d = grid.fiber_dim();
    let (lo, width) = (grid.e_min(), grid.e_max() - grid.e_min());
    let center = lo + rng.random_range(0.4..0.6) * width;
    let spread = width / 20.0;
    let tau = rng.random_range(-MAX_PHASE_SLOPE..MAX_PHASE_SLOPE);
    let chirp = rng.random_range(-0.1..0.1) / (spread * spread);
    let dir = random_unit_vector(rng, d);
    let twist = random_unit_vector(rng, d);
    let mut values = DVector::zeros(grid.dim());
    for (i, e) in grid.energies().into_iter().enumerate() {
        let x = (e - center) / spread;
        let envelope = Complex64::from_polar((-0.5 * x * x).exp(), tau * e + chirp * (e - center).powi(2));
        // fiber direction rotates smoothly across the packet
        let s = 0.5 * (1.0 + (x / 3.0).tanh());
        let v = (&dir * Complex64::new(1.0 - s, 0.0) + &twist * Complex64::new(s, 0.0)) * envelope;
        values.rows_mut(i * d, d).copy_from(&v);
    }
    Section::new(*grid, values)?.normalized()
}
