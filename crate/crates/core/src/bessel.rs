//! Riccati–Bessel functions `ĵ_l(x) = x j_l(x)` and `n̂_l(x) = x y_l(x)`.
//!
//! With this sign choice `ĵ_0 = sin x`, `n̂_0 = -cos x`, the Wronskian is
//! `ĵ_l n̂_l' - ĵ_l' n̂_l = 1` and the regular solution outside a potential is
//! `cos δ ĵ_l(kr) - sin δ n̂_l(kr) → sin(kr - lπ/2 + δ)`.

/// `ĵ_l(x)`. Upward recurrence when `x ≥ l`, Miller's downward recurrence otherwise.
pub fn riccati_j(l: usize, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let j0 = x.sin();
    if l == 0 {
        return j0;
    }
    let j1 = x.sin() / x - x.cos();
    if l == 1 {
        return j1;
    }
    if x >= l as f64 {
        let (mut prev, mut cur) = (j0, j1);
        for m in 1..l {
            let next = (2 * m + 1) as f64 / x * cur - prev;
            prev = cur;
            cur = next;
        }
        return cur;
    }
    miller(l, x, j0, j1)
}

fn miller(l: usize, x: f64, j0: f64, j1: f64) -> f64 {
    let top = l + 20 + (x.abs().sqrt() * 10.0) as usize;
    let (mut above, mut cur) = (0.0_f64, 1e-30_f64);
    let mut at_l = 0.0;
    let mut at_1 = 0.0;
    let mut at_0 = 0.0;
    // ĵ_{m-1} = (2m+1)/x ĵ_m - ĵ_{m+1}
    for m in (1..=top).rev() {
        let below = (2 * m + 1) as f64 / x * cur - above;
        above = cur;
        cur = below;
        if cur.abs() > 1e200 {
            above *= 1e-200;
            cur *= 1e-200;
            at_l *= 1e-200;
        }
        if m - 1 == l {
            at_l = cur;
        }
        if m == 1 {
            at_1 = above;
            at_0 = cur;
        }
    }
    if j0.abs() >= j1.abs() {
        at_l * j0 / at_0
    } else {
        at_l * j1 / at_1
    }
}

/// `n̂_l(x)` by upward recurrence, which is stable for the irregular solution.
pub fn riccati_n(l: usize, x: f64) -> f64 {
    let n0 = -x.cos();
    if l == 0 {
        return n0;
    }
    let n1 = -x.cos() / x - x.sin();
    let (mut prev, mut cur) = (n0, n1);
    for m in 1..l {
        let next = (2 * m + 1) as f64 / x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Spherical Bessel `j_l(x)`.
pub fn spherical_j(l: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    riccati_j(l, x) / x
}

/// Derivatives `(ĵ_l'(x), n̂_l'(x))` from `f_l' = f_{l-1} - l f_l / x` (`l ≥ 1`)
/// and `ĵ_0' = cos x`, `n̂_0' = sin x`.
pub fn riccati_derivatives(l: usize, x: f64) -> (f64, f64) {
    if l == 0 {
        return (x.cos(), x.sin());
    }
    let lf = l as f64;
    (
        riccati_j(l - 1, x) - lf * riccati_j(l, x) / x,
        riccati_n(l - 1, x) - lf * riccati_n(l, x) / x,
    )
}
