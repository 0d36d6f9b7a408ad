//! Closed-form phase shifts used as oracles for the radial solver.
//!
//! All phases follow the standard convention `u → sin(kr - lπ/2 + δ)`.

use crate::bessel::{riccati_j, riccati_n};

/// Hard sphere of radius `a`: `tan δ = ĵ_l(ka) / n̂_l(ka)`, principal branch.
pub fn hard_sphere_phase(l: usize, k: f64, a: f64) -> f64 {
    if l == 0 {
        return fold(-k * a);
    }
    let x = k * a;
    (riccati_j(l, x) / riccati_n(l, x)).atan()
}

/// `dδ/dk = -a / (ĵ_l(ka)² + n̂_l(ka)²)`.
pub fn hard_sphere_phase_dk(l: usize, k: f64, a: f64) -> f64 {
    let x = k * a;
    let j = riccati_j(l, x);
    let n = riccati_n(l, x);
    -a / (j * j + n * n)
}

/// s-wave square barrier `V = V0` for `r < r0` (any sign of `V0`),
/// `E = k²/2m`, principal branch.
pub fn square_barrier_phase(k: f64, height: f64, width: f64, mass: f64) -> f64 {
    let (y, x, _, _) = square_barrier_parts(k, height, width, mass);
    fold(y.atan2(x) - k * width)
}

/// `dδ/dk` for [`square_barrier_phase`].
pub fn square_barrier_phase_dk(k: f64, height: f64, width: f64, mass: f64) -> f64 {
    let (y, x, dy, dx) = square_barrier_parts(k, height, width, mass);
    (x * dy - y * dx) / (x * x + y * y) - width
}

// δ + k r0 = atan2(y, x) with the interior solution matched at r0:
// E > V0: y = k sin(K r0),  x = K cos(K r0),  K = √(k² - 2mV0)
// E < V0: y = k sinh(κ r0), x = κ cosh(κ r0), κ = √(2mV0 - k²)
// returns (y, x, dy/dk, dx/dk)
fn square_barrier_parts(k: f64, height: f64, r0: f64, mass: f64) -> (f64, f64, f64, f64) {
    let q2 = k * k - 2.0 * mass * height;
    if q2.abs() < 1e-14 * k * k {
        // u = r inside: tan(δ + k r0) = k r0
        let y = k * r0;
        return (y, 1.0, r0, 0.0);
    }
    if q2 > 0.0 {
        let big_k = q2.sqrt();
        let dk_dk = k / big_k;
        let (s, c) = (big_k * r0).sin_cos();
        let y = k * s;
        let x = big_k * c;
        let dy = s + k * c * r0 * dk_dk;
        let dx = dk_dk * c - big_k * s * r0 * dk_dk;
        (y, x, dy, dx)
    } else {
        let kappa = (-q2).sqrt();
        let dkappa = -k / kappa;
        // scale both by exp(-κ r0) to keep atan2 finite for thick barriers
        let e = (-2.0 * kappa * r0).exp();
        let sh = 0.5 * (1.0 - e);
        let ch = 0.5 * (1.0 + e);
        let y = k * sh;
        let x = kappa * ch;
        let dy = sh + k * ch * r0 * dkappa - y * r0 * dkappa;
        let dx = dkappa * ch + kappa * sh * r0 * dkappa - x * r0 * dkappa;
        (y, x, dy, dx)
    }
}

/// Chain rule `dδ/dE = (m/k) dδ/dk`.
pub fn energy_derivative(dk: f64, k: f64, mass: f64) -> f64 {
    dk * mass / k
}

/// Fold an angle into `(-π/2, π/2]`.
pub fn fold(delta: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut d = delta - PI * (delta / PI).round();
    if d <= -FRAC_PI_2 {
        d += PI;
    } else if d > FRAC_PI_2 {
        d -= PI;
    }
    d
}
