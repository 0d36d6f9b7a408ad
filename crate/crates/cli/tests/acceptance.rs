//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;

use clicktime::analytic::{hard_sphere_phase, square_barrier_phase};
use clicktime::delay::eisenbud_wigner;
use clicktime::ensemble::{random_smooth_effect, random_smooth_state};
use clicktime::linalg::{self, CMatrix};
use clicktime::povm::{
    connection, first_moment, interval_kernel, matrix_povm, net_limit_check, normalize_kernel,
    shift_interval_covariance_check, total_duration_expectation,
};
use clicktime::radial::{build_phase_table, phase_shift, OnShellMatrix};
use clicktime::shell::{closed_form_c, shell_connection};
use clicktime::{
    Connection, DelayExperiment, DelayReport, EffectKernel, EnergyGrid, PotentialKind, PotentialSpec,
    RadialSettings, Section, ShellSpec, TimeAxis, TimeInterval,
};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_interval(rng: &mut ChaCha8Rng, horizon: f64) -> TimeInterval {
    let start = rng.random_range(-horizon..horizon);
    let end = rng.random_range(start..horizon);
    TimeInterval::new(start, if end > start { end } else { horizon }).unwrap()
}

fn povm_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut additivity, mut covariance, mut normalization, mut floor, mut partition) =
        (0.0_f64, 0.0_f64, 0.0_f64, f64::INFINITY, 0.0_f64);
    let grids = [
        EnergyGrid::scalar(0.5, 4.5, 401).unwrap(),
        EnergyGrid::scalar(0.5, 2.5, 101).unwrap(),
        EnergyGrid::new(0.5, 2.5, 41, 1.0, 2).unwrap(),
    ];
    for grid in grids {
        let horizon = grid.nyquist_time();
        for _ in 0..3 {
            let c = normalize_kernel(&random_smooth_effect(&grid, &mut rng).unwrap()).unwrap();
            let p = |i: TimeInterval| interval_kernel(&c, i).unwrap().kernel.operator_matrix();
            for _ in 0..4 {
                let outer = random_interval(&mut rng, horizon);
                let cut = 0.5 * (outer.start + outer.end);
                let left = TimeInterval::new(outer.start, cut).unwrap();
                let right = TimeInterval::new(cut, outer.end).unwrap();
                additivity = additivity.max(linalg::max_abs(&(p(left) + p(right) - p(outer))));
                let t = rng.random_range(-horizon..horizon);
                covariance = covariance.max(shift_interval_covariance_check(&c, outer, t).unwrap());
                floor = floor.min(interval_kernel(&c, outer).unwrap().eigenvalue_range().unwrap().0);
            }
            let whole = TimeInterval::nyquist(&grid);
            normalization = normalization.max(interval_kernel(&c, whole).unwrap().kernel.deviation_from_identity());
            let pieces = whole.partition(64);
            let mut resum = p(pieces[0]);
            for piece in &pieces[1..] {
                resum += p(*piece);
            }
            partition = partition.max(linalg::max_abs(&(resum - CMatrix::identity(grid.dim(), grid.dim()))));
        }
    }
    check(
        additivity <= 1e-12 && covariance <= 1e-12 && normalization <= 1e-10 && floor >= -1e-10 && partition <= 1e-10,
        format!(
            "additivity {additivity:.1e}, covariance {covariance:.1e}, normalization {normalization:.1e}, \
             eigenvalue floor {floor:.1e}, 64-piece re-sum {partition:.1e}"
        ),
    )
}

fn construction_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut net_worst) = (0.0_f64, 0.0_f64);
    for n in 0..20 {
        let grid = if n % 3 == 2 {
            EnergyGrid::new(0.5, 2.5, 41, 1.0, 2).unwrap()
        } else {
            EnergyGrid::scalar(0.5, 2.5, 61).unwrap()
        };
        let a = random_smooth_effect(&grid, &mut rng).unwrap();
        let c = normalize_kernel(&a).unwrap();
        let interval = random_interval(&mut rng, grid.nyquist_time());
        let by_matrix = matrix_povm(&a, interval).unwrap();
        let by_kernel = interval_kernel(&c, interval).unwrap();
        worst = worst.max(by_matrix.kernel.max_deviation(&by_kernel.kernel).unwrap());
        let t = grid.nyquist_time();
        let net = net_limit_check(&a, &[t / 8.0, t / 4.0, t / 2.0, t]).unwrap();
        net_worst = net_worst
            .max(-net.positivity_floor)
            .max(net.upper_bound_excess)
            .max(net.monotonicity_violation);
    }
    check(
        worst <= 1e-10 && net_worst <= 1e-10,
        format!("matrix vs kernel {worst:.1e} over 20 effects, net monotonicity {net_worst:.1e}"),
    )
}

/// Rectangle rule over one period `2T*` of the trigonometric polynomial
/// `t ↦ ⟨e^{-itH}Φ, A e^{-itH}Φ⟩`.
fn duration_by_time_quadrature(a: &EffectKernel, phi: &Section) -> f64 {
    let grid = *a.grid();
    let d = grid.fiber_dim();
    let op = a.kernel().operator_matrix();
    let horizon = grid.nyquist_time();
    let nodes = 4 * grid.len();
    let dt = 2.0 * horizon / nodes as f64;
    let energies = grid.energies();
    let sum: f64 = (0..nodes)
        .map(|s| {
            let t = -horizon + s as f64 * dt;
            let v = DVector::from_fn(grid.dim(), |r, _| phi.values()[r] * Complex64::from_polar(1.0, -t * energies[r / d]));
            v.dotc(&(&op * &v)).re
        })
        .sum();
    sum * dt * grid.weight()
}

fn plancherel() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for n in 0..10 {
        let grid = EnergyGrid::new(0.5, 2.5, 81, 1.0, 1 + n % 2).unwrap();
        let a = random_smooth_effect(&grid, &mut rng).unwrap();
        let phi = random_smooth_state(&grid, &mut rng).unwrap();
        let closed = total_duration_expectation(&a, &phi).unwrap();
        let brute = duration_by_time_quadrature(&a, &phi);
        worst = worst.max((closed - brute).abs() / brute.abs());
    }
    check(worst <= 1e-6, format!("max relative deviation {worst:.1e} over 10 pairs"))
}

fn moment_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = EnergyGrid::scalar(0.5, 2.5, 201).unwrap();
    let unit = 1.0 / (grid.e_max() - grid.e_min());
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let c = normalize_kernel(&random_smooth_effect(&grid, &mut rng).unwrap()).unwrap();
        let phi = random_smooth_state(&grid, &mut rng).unwrap();
        let moment = first_moment(&c, &phi).unwrap();
        let expected = connection(&c).unwrap().expectation(&phi).unwrap();
        worst = worst.max((moment - expected).abs() / expected.abs().max(unit));
    }
    check(worst <= 1e-3, format!("max relative deviation {worst:.1e} over 10 states"))
}

fn wrapped(d: f64) -> f64 {
    d - PI * (d / PI).round()
}

fn phase_shifts() -> Outcome {
    let k: Vec<f64> = (0..26).map(|i| 0.5 + 0.1 * i as f64).collect();
    let sphere = PotentialSpec::new(PotentialKind::HardSphere { radius: 1.0 }, 0, 1.0).unwrap();
    let table = build_phase_table(&sphere, &k, &RadialSettings::for_potential(&sphere, 3.0)).unwrap();
    let sphere_err = table
        .delta_std
        .iter()
        .zip(&k)
        .map(|(d, k)| (d + k).abs())
        .fold(0.0, f64::max);

    let barrier = PotentialSpec::new(PotentialKind::SquareBarrier { height: 2.0, width: 1.0 }, 0, 1.0).unwrap();
    let settings = RadialSettings::for_potential(&barrier, 3.0);
    let barrier_err = k
        .iter()
        .map(|&k| wrapped(phase_shift(&barrier, k, &settings).unwrap() - square_barrier_phase(k, 2.0, 1.0, 1.0)).abs())
        .fold(0.0, f64::max);

    let error_at = |dr: f64| {
        let s = RadialSettings::new(16.0, dr, 15.0).unwrap();
        wrapped(phase_shift(&sphere, 2.0, &s).unwrap() - hard_sphere_phase(0, 2.0, 1.0)).abs()
    };
    let factor = error_at(0.05) / error_at(0.025);
    check(
        sphere_err <= 1e-8 && barrier_err <= 1e-6 && factor >= 12.0,
        format!("hard sphere {sphere_err:.1e}, square barrier {barrier_err:.1e}, convergence factor {factor:.2}"),
    )
}

fn connection_anchor() -> Outcome {
    let grid = EnergyGrid::scalar(0.5, 4.5, 401).unwrap();
    let k = grid.momenta();
    let shell = ShellSpec::thin(10.0, 1.0).unwrap();
    let sphere = PotentialSpec::new(PotentialKind::HardSphere { radius: 1.0 }, 0, 1.0).unwrap();
    let settings = RadialSettings::for_potential(&sphere, k[k.len() - 1]);
    let routes = |p: &PotentialSpec| {
        let table = build_phase_table(p, &k, &settings).unwrap();
        let closed = shell_connection(&shell, &table, &grid).unwrap().scalar_values().unwrap();
        let by_difference = connection(&closed_form_c(&shell, &table, &grid).unwrap())
            .unwrap()
            .scalar_values()
            .unwrap();
        (closed, by_difference)
    };
    let (free_closed, free_diff) = routes(&sphere.without_potential());
    let (hs_closed, hs_diff) = routes(&sphere);
    let mut free_err: f64 = 0.0;
    let mut hs_err: f64 = 0.0;
    let mut hs_sign = f64::NEG_INFINITY;
    for i in 0..k.len() {
        let traversal = 10.0 / k[i];
        free_err = free_err.max((free_closed[i] - traversal).abs()).max((free_diff[i] - traversal).abs());
        let expected = 2.0 / k[i];
        for dev in [hs_closed[i] - free_closed[i], hs_diff[i] - free_diff[i]] {
            hs_err = hs_err.max((dev.abs() - expected).abs());
            hs_sign = hs_sign.max(dev);
        }
    }
    check(
        free_err <= 1e-8 && hs_err <= 1e-4 && hs_sign < 0.0,
        format!(
            "free d_A vs mR/k {free_err:.1e}; hard sphere |d_A - d_free| vs 2ma/k {hs_err:.1e} \
             (deviation is negative, an advance)"
        ),
    )
}

fn experiment(kind: PotentialKind, radius: f64, t_min: f64, t_max: f64) -> DelayReport {
    let grid = EnergyGrid::scalar(0.5, 4.5, 401).unwrap();
    let potential = PotentialSpec::new(kind, 0, 1.0).unwrap();
    DelayExperiment {
        grid,
        settings: RadialSettings::for_potential(&potential, grid.momentum(400)),
        potential,
        shell: ShellSpec::thin(radius, 1.0).unwrap(),
        k0: 2.0,
        sigma_k: 0.04,
        axis: TimeAxis::new(t_min, t_max, 4000).unwrap(),
    }
    .run()
    .unwrap()
}

fn time_delay(sphere: &DelayReport, exponential: &DelayReport) -> Outcome {
    let shift = sphere.shift.shift_mean;
    let [a, b, c] = exponential.route_disagreements();
    check(
        (shift + 1.0).abs() <= 0.05 && exponential.routes_agree(),
        format!(
            "hard sphere shift {shift:.5} (expected -1.0); exponential routes {:.4}/{:.4}/{:.4}, \
             pairwise disagreement {:.1e}/{:.1e}/{:.1e}",
            exponential.shift.shift_mean,
            exponential.wigner_delay_averaged,
            exponential.operator_delay.difference_form,
            a,
            b,
            c
        ),
    )
}

fn interaction_independence(sphere: &DelayReport, exponential: &DelayReport) -> Outcome {
    let (a, b) = (sphere.shift.l1_overlap_residual, exponential.shift.l1_overlap_residual);
    check(
        a <= 0.02 && b <= 0.02,
        format!("L1 residual hard sphere {a:.1e}, exponential {b:.1e}"),
    )
}

fn noncentral() -> Outcome {
    let grid = EnergyGrid::new(0.5, 2.5, 201, 1.0, 2).unwrap();
    let (c, s) = (0.6_f64, 0.8_f64);
    let phase = Complex64::from_polar(1.0, 0.7);
    let u = CMatrix::from_row_slice(2, 2, &[Complex64::new(c, 0.0), -phase.conj() * s, phase * s, Complex64::new(c, 0.0)]);
    let theta = |e: f64| [0.4 * e * e - 1.1 * e, (2.0 * e).sin() + 0.3 * e];
    let d_theta = |e: f64| [0.8 * e - 1.1, 2.0 * (2.0 * e).cos() + 0.3];
    let values = grid
        .energies()
        .into_iter()
        .map(|e| {
            let [t1, t2] = theta(e);
            let diag = CMatrix::from_diagonal(&DVector::from_vec(vec![
                Complex64::from_polar(1.0, t1),
                Complex64::from_polar(1.0, t2),
            ]));
            &u * diag * u.adjoint()
        })
        .collect();
    let s_matrix = OnShellMatrix::from_matrices(grid, values).unwrap();
    let d = Connection::from_matrices(
        grid,
        grid.momenta().iter().map(|k| CMatrix::identity(2, 2) * Complex64::new(7.0 / k, 0.0)).collect(),
    )
    .unwrap();
    let delay = eisenbud_wigner(&s_matrix, &d).unwrap();
    let mut worst: f64 = 0.0;
    for (i, t) in delay.total().iter().enumerate() {
        let got = linalg::eigenvalues(&linalg::hermitize(t));
        let mut want = d_theta(grid.energy(i));
        want.sort_by(f64::total_cmp);
        worst = worst.max((got[0] - want[0]).abs()).max((got[1] - want[1]).abs());
    }
    let commutator = delay.commutator_magnitude();
    check(
        worst <= 1e-4 && commutator <= 1e-12,
        format!("eigenvalue deviation {worst:.1e}, commutator term {commutator:.1e}"),
    )
}

struct Run {
    code: i32,
    stderr: String,
}

fn clicktime(args: &[&str], dir: &Path) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_clicktime"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn files_in(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = match std::fs::read_dir(dir) {
        Ok(entries) => entries
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    files.sort();
    files
}

const RESONANT_SHELL: &str = "0 0\n0.999 0\n1.0 25\n1.3 25\n1.301 0\n";
const NARROW_RESONANT_SHELL: &str = "0 0\n0.999 0\n1.0 40\n1.3 40\n1.301 0\n";

fn cli_contract() -> Outcome {
    let work = tempfile::tempdir().unwrap();
    let dir = work.path();
    std::fs::write(dir.join("shell.dat"), RESONANT_SHELL).unwrap();
    std::fs::write(dir.join("narrow.dat"), NARROW_RESONANT_SHELL).unwrap();
    std::fs::write(dir.join("sphere.toml"), "[output]\nformats = [\"csv\", \"json\"]\n").unwrap();
    std::fs::write(dir.join("bad_kind.toml"), "[potential]\nkind = \"yukawa\"\n").unwrap();
    std::fs::write(dir.join("short_window.toml"), "[time]\nt_min = -40.0\nt_max = 4.0\n").unwrap();
    std::fs::write(
        dir.join("unresolved.toml"),
        "[grid]\nn_points = 101\n[potential]\nkind = \"tabulated\"\nfile = \"narrow.dat\"\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("resonance.toml"),
        "[grid]\ne_max = 5.5\nn_points = 161\n[potential]\nkind = \"tabulated\"\nfile = \"shell.dat\"\n\
         [packet]\nk0 = 2.73861\n[time]\nt_min = -60.0\nt_max = 100.5\n",
    )
    .unwrap();
    std::fs::write(dir.join("blocker"), "").unwrap();

    let mut notes = Vec::new();
    let mut ok = true;
    for cmd in ["phase-shifts", "povm-check", "density", "delay"] {
        let first = clicktime(&[cmd, "--config", "sphere.toml", "--out", "a", "--seed", "7"], dir);
        let second = clicktime(&[cmd, "--config", "sphere.toml", "--out", "b", "--seed", "7"], dir);
        let same = first.code == 0 && second.code == 0 && files_in(&dir.join("a")) == files_in(&dir.join("b"));
        ok &= same;
        if !same {
            notes.push(format!("{cmd} not reproducible"));
        }
    }
    let produced = files_in(&dir.join("a")).len();
    ok &= produced == 9;

    let expect = |args: &[&str], out: &str, code: i32, needle: &str, leaves_files: bool| -> Option<String> {
        let run = clicktime(args, dir);
        let files = files_in(&dir.join(out)).len();
        let good = run.code == code && run.stderr.contains(needle) && (files > 0) == leaves_files;
        (!good).then(|| format!("{args:?}: exit {}, {files} files, stderr {:?}", run.code, run.stderr))
    };
    let cases = [
        expect(&["phase-shifts", "--config", "bad_kind.toml", "--out", "c2"], "c2", 2, "potential.kind", false),
        expect(&["density", "--config", "short_window.toml", "--out", "c3a"], "c3a", 3, "captures only", false),
        expect(&["phase-shifts", "--config", "unresolved.toml", "--out", "c3b"], "c3b", 3, "unwrapping", false),
        expect(&["delay", "--config", "resonance.toml", "--out", "c4"], "c4", 4, "routes disagree", true),
        expect(&["phase-shifts", "--config", "missing.toml", "--out", "c1a"], "c1a", 1, "cannot read", false),
        expect(&["phase-shifts", "--out", "blocker/sub"], "blocker/sub", 1, "cannot write", false),
    ];
    for failure in cases.into_iter().flatten() {
        ok = false;
        notes.push(failure);
    }
    check(
        ok,
        if notes.is_empty() {
            format!("4 subcommands bit-identical across runs ({produced} files); exit codes 1, 2, 3, 3, 4 as contracted")
        } else {
            notes.join("; ")
        },
    )
}

fn guarded(f: impl FnOnce() -> Outcome + std::panic::UnwindSafe) -> Outcome {
    std::panic::catch_unwind(f).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    let start = std::time::Instant::now();
    let sphere = experiment(PotentialKind::HardSphere { radius: 1.0 }, 10.0, -40.0, 60.0);
    let exponential = experiment(PotentialKind::Exponential { strength: 5.0, range: 1.0 }, 40.0, -40.0, 80.0);
    let results = [
        ("1 POVM axioms", guarded(povm_axioms)),
        ("2 construction equivalence", guarded(construction_equivalence)),
        ("3 duration / Plancherel", guarded(plancherel)),
        ("4 moment consistency", guarded(moment_consistency)),
        ("5 phase shifts", guarded(phase_shifts)),
        ("6 connection anchor", guarded(connection_anchor)),
        ("7 time delay", guarded(|| time_delay(&sphere, &exponential))),
        ("8 interaction independence", guarded(|| interaction_independence(&sphere, &exponential))),
        ("9 noncentral delay matrix", guarded(noncentral)),
        ("10 CLI determinism and exit codes", guarded(cli_contract)),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1} s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
