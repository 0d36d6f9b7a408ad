use clicktime::analytic::{hard_sphere_phase, square_barrier_phase};
use clicktime::radial::{build_phase_table, phase_shift, PotentialKind, PotentialSpec, RadialSettings};

fn wrapped(d: f64) -> f64 {
    d - std::f64::consts::PI * (d / std::f64::consts::PI).round()
}

fn hard_sphere_error(dr: f64) -> f64 {
    let p = PotentialSpec::new(PotentialKind::HardSphere { radius: 1.0 }, 0, 1.0).unwrap();
    let settings = RadialSettings::new(16.0, dr, 15.0).unwrap();
    wrapped(phase_shift(&p, 2.0, &settings).unwrap() - hard_sphere_phase(0, 2.0, 1.0)).abs()
}

#[test]
fn numerov_error_falls_at_fourth_order() {
    let coarse = hard_sphere_error(0.05);
    let fine = hard_sphere_error(0.025);
    eprintln!("errors {coarse:e} {fine:e} ratio {}", coarse / fine);
    assert!(coarse / fine >= 12.0);
}

#[test]
fn square_barrier_matches_closed_form_across_threshold() {
    let p = PotentialSpec::new(PotentialKind::SquareBarrier { height: 2.0, width: 1.0 }, 0, 1.0).unwrap();
    let settings = RadialSettings::for_potential(&p, 3.0);
    for k in [0.5, 1.5, 2.0, 2.5, 3.0] {
        let got = phase_shift(&p, k, &settings).unwrap();
        let want = square_barrier_phase(k, 2.0, 1.0, 1.0);
        assert!(wrapped(got - want).abs() < 1e-6, "k = {k}: {got} vs {want}");
    }
}

#[test]
fn higher_partial_waves_match_hard_sphere() {
    for l in 1..4 {
        let p = PotentialSpec::new(PotentialKind::HardSphere { radius: 1.0 }, l, 1.0).unwrap();
        let settings = RadialSettings::for_potential(&p, 2.5);
        for k in [0.8, 1.6, 2.5] {
            let got = phase_shift(&p, k, &settings).unwrap();
            let want = hard_sphere_phase(l, k, 1.0);
            assert!(wrapped(got - want).abs() < 1e-6, "l = {l}, k = {k}: {got} vs {want}");
        }
    }
}

#[test]
fn exponential_phase_is_independent_of_matching_radius() {
    let p = PotentialSpec::new(PotentialKind::Exponential { strength: 5.0, range: 1.0 }, 0, 1.0).unwrap();
    let base = RadialSettings::for_potential(&p, 3.0);
    let near = phase_shift(&p, 2.0, &base).unwrap();
    let far_settings = RadialSettings::new(base.r_max + 10.0, base.dr, base.r_match + 10.0).unwrap();
    let far = phase_shift(&p, 2.0, &far_settings).unwrap();
    assert!(wrapped(near - far).abs() < 1e-6, "{near} vs {far}");
}

#[test]
fn soft_repulsive_phase_turns_back_toward_zero() {
    // a finite repulsive potential has δ < 0 vanishing at both ends of the
    // spectrum, so δ(k) has an interior minimum and dδ/dE > 0 above it
    let p = PotentialSpec::new(PotentialKind::Exponential { strength: 5.0, range: 1.0 }, 0, 1.0).unwrap();
    let k: Vec<f64> = (0..40).map(|i| 0.5 + 0.06 * i as f64).collect();
    let settings = RadialSettings::for_potential(&p, k[39]);
    let table = build_phase_table(&p, &k, &settings).unwrap();
    assert!(table.delta_std.iter().all(|d| *d < 0.0));
    let lowest = (0..k.len())
        .min_by(|&a, &b| table.delta_std[a].total_cmp(&table.delta_std[b]))
        .unwrap();
    assert!(lowest > 0 && lowest < k.len() - 1);
    assert!(table.delta_std[..=lowest].windows(2).all(|w| w[1] < w[0]));
    assert!(table.delta_std[lowest..].windows(2).all(|w| w[1] > w[0]));
}
