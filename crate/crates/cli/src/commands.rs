//! The four subcommands. Each returns the files it wants written and, when
//! the run completed but an acceptance check failed, the error that sets
//! the exit code.

use clicktime::delay::{packet_click_density, ClickDensity, MIN_CAPTURED_MASS};
use clicktime::ensemble::random_smooth_effect;
use clicktime::grid::eigenvalue_range;
use clicktime::linalg;
use clicktime::povm::{
    interval_kernel, matrix_povm, net_limit_check, normalize_kernel, shift_interval_covariance_check,
};
use clicktime::radial::build_phase_table;
use clicktime::shell::closed_form_c;
use clicktime::{DelayExperiment, NormalizedKernel, PhaseShiftTable, TimeInterval};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{Format, RunConfig};
use crate::error::{CliError, Stage};
use crate::table::{pretty, Artifact, Cell, ResultTable};

pub struct CommandOutput {
    pub tables: Vec<ResultTable>,
    /// Extra JSON documents, always written as `<name>.json`.
    pub summaries: Vec<(String, serde_json::Value)>,
    pub verdict: Result<(), CliError>,
}

impl CommandOutput {
    fn passed(tables: Vec<ResultTable>) -> Self {
        Self {
            tables,
            summaries: Vec::new(),
            verdict: Ok(()),
        }
    }

    pub fn artifacts(&self, formats: &[Format]) -> Vec<Artifact> {
        let mut out = Vec::new();
        for table in &self.tables {
            for &f in formats {
                out.push(Artifact::table(table, f));
            }
        }
        for (name, value) in &self.summaries {
            out.push(Artifact {
                file_name: format!("{name}.json"),
                contents: pretty(value),
            });
        }
        out
    }
}

fn phase_table(config: &RunConfig, free: bool) -> Result<PhaseShiftTable, CliError> {
    let potential = if free {
        config.potential.without_potential()
    } else {
        config.potential.clone()
    };
    let settings = config.settings.covering(config.shell.radius());
    build_phase_table(&potential, &config.grid.momenta(), &settings).stage("phase shifts")
}

pub fn cmd_phase_shifts(config: &RunConfig) -> Result<CommandOutput, CliError> {
    let table = build_phase_table(&config.potential, &config.grid.momenta(), &config.settings)
        .stage("phase shifts")?;
    let energies = config.grid.energies();
    let mut out = ResultTable::new(
        "phase_shifts",
        &[
            ("k", "1/length"),
            ("E", "energy"),
            ("delta_std", "rad"),
            ("delta_paper", "rad"),
            ("dDelta_dE", "1/energy"),
        ],
    );
    for (i, e) in energies.iter().enumerate() {
        out.push(vec![
            table.k[i].into(),
            (*e).into(),
            table.delta_std[i].into(),
            table.delta_paper[i].into(),
            table.d_delta_de[i].into(),
        ]);
    }
    Ok(CommandOutput::passed(vec![out]))
}

const ADDITIVITY_TOLERANCE: f64 = 1e-12;
const COVARIANCE_TOLERANCE: f64 = 1e-12;
const NORMALIZATION_TOLERANCE: f64 = 1e-10;
const POSITIVITY_TOLERANCE: f64 = 1e-10;
const PARTITION_TOLERANCE: f64 = 1e-10;
const MATRIX_ROUTE_TOLERANCE: f64 = 1e-10;
const NET_TOLERANCE: f64 = 1e-10;
const PARTITION_PIECES: usize = 64;
const TRIALS: usize = 6;

fn random_interval(rng: &mut ChaCha8Rng, horizon: f64) -> TimeInterval {
    let start = rng.random_range(-horizon..horizon);
    let end = rng.random_range(start..=horizon);
    TimeInterval {
        start,
        end: if end > start { end } else { horizon },
    }
}

struct InvariantRow {
    name: String,
    deviation: f64,
    threshold: f64,
}

fn kernel_invariants(label: &str, c: &NormalizedKernel, rng: &mut ChaCha8Rng) -> Result<Vec<InvariantRow>, CliError> {
    let grid = *c.grid();
    let horizon = grid.nyquist_time();
    let stage = "povm invariants";
    let p = |i: TimeInterval| interval_kernel(c, i).stage(stage).map(|k| k.kernel.operator_matrix());

    let mut additivity: f64 = 0.0;
    let mut covariance: f64 = 0.0;
    let mut positivity: f64 = 0.0;
    for _ in 0..TRIALS {
        let outer = random_interval(rng, horizon);
        let cut = rng.random_range(outer.start..=outer.end);
        let (left, right) = (TimeInterval { end: cut, ..outer }, TimeInterval { start: cut, ..outer });
        if left.length() > 0.0 && right.length() > 0.0 {
            let dev = linalg::max_abs(&(p(left)? + p(right)? - p(outer)?));
            additivity = additivity.max(dev);
        }
        let t = rng.random_range(-horizon / 2.0..horizon / 2.0);
        covariance = covariance.max(shift_interval_covariance_check(c, outer, t).stage(stage)?);
        let (lo, hi) = interval_kernel(c, outer)
            .stage(stage)?
            .eigenvalue_range()
            .stage(stage)?;
        positivity = positivity.max(-lo).max(hi - 1.0);
    }

    let whole = TimeInterval::nyquist(&grid);
    let normalization = interval_kernel(c, whole).stage(stage)?.kernel.deviation_from_identity();
    let mut resum = p(whole.partition(PARTITION_PIECES)[0])?;
    for piece in &whole.partition(PARTITION_PIECES)[1..] {
        resum += p(*piece)?;
    }
    let partition = linalg::max_abs(&(resum - p(whole)?));

    let row = |name: &str, deviation: f64, threshold: f64| InvariantRow {
        name: format!("{name}[{label}]"),
        deviation,
        threshold,
    };
    Ok(vec![
        row("additivity", additivity, ADDITIVITY_TOLERANCE),
        row("covariance", covariance, COVARIANCE_TOLERANCE),
        row("normalization", normalization, NORMALIZATION_TOLERANCE),
        row("positivity", positivity.max(0.0), POSITIVITY_TOLERANCE),
        row("partition", partition, PARTITION_TOLERANCE),
    ])
}

pub fn cmd_povm_check(config: &RunConfig, seed: u64) -> Result<CommandOutput, CliError> {
    let grid = config.grid;
    let stage = "povm invariants";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let effect = random_smooth_effect(&grid, &mut rng).stage(stage)?;
    let random_c = normalize_kernel(&effect).stage(stage)?;
    let detector_c = closed_form_c(&config.shell, &phase_table(config, false)?, &grid).stage(stage)?;

    let mut rows = kernel_invariants("random", &random_c, &mut rng)?;
    rows.extend(kernel_invariants("detector", &detector_c, &mut rng)?);

    let horizon = grid.nyquist_time();
    let mut matrix_route: f64 = 0.0;
    for interval in [random_interval(&mut rng, horizon), random_interval(&mut rng, horizon), TimeInterval::nyquist(&grid)] {
        let by_matrix = matrix_povm(&effect, interval).stage(stage)?;
        let by_kernel = interval_kernel(&random_c, interval).stage(stage)?;
        matrix_route = matrix_route.max(by_matrix.kernel.max_deviation(&by_kernel.kernel).stage(stage)?);
    }
    rows.push(InvariantRow {
        name: "matrix_vs_kernel[random]".into(),
        deviation: matrix_route,
        threshold: MATRIX_ROUTE_TOLERANCE,
    });
    let net = net_limit_check(&effect, &[horizon / 4.0, horizon / 2.0, horizon]).stage(stage)?;
    rows.push(InvariantRow {
        name: "net_monotone[random]".into(),
        deviation: (-net.positivity_floor)
            .max(net.upper_bound_excess)
            .max(net.monotonicity_violation)
            .max(0.0),
        threshold: NET_TOLERANCE,
    });
    let (lo, _) = eigenvalue_range(&net.duration).stage(stage)?;
    rows.push(InvariantRow {
        name: "duration_positive[random]".into(),
        deviation: (-lo).max(0.0),
        threshold: POSITIVITY_TOLERANCE,
    });

    let mut table = ResultTable::new(
        "povm_check",
        &[("invariant", "-"), ("deviation", "1"), ("threshold", "1"), ("pass", "-")],
    );
    let mut failed = Vec::new();
    for r in &rows {
        let pass = r.deviation <= r.threshold;
        if !pass {
            failed.push(format!("{} = {:e} > {:e}", r.name, r.deviation, r.threshold));
        }
        table.push(vec![Cell::Text(r.name.clone()), r.deviation.into(), r.threshold.into(), pass.into()]);
    }
    let verdict = if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::InvariantFailed(format!("invariants failed: {}", failed.join("; "))))
    };
    Ok(CommandOutput {
        tables: vec![table],
        summaries: Vec::new(),
        verdict,
    })
}

fn peak_time(d: &ClickDensity) -> f64 {
    let i = (0..d.density.len())
        .max_by(|&a, &b| d.density[a].total_cmp(&d.density[b]))
        .unwrap_or(0);
    d.times[i]
}

fn ensure_captured(label: &str, d: &ClickDensity, config: &RunConfig) -> Result<(), CliError> {
    if d.captured_mass < MIN_CAPTURED_MASS {
        return Err(CliError::LowCapturedMass(format!(
            "{label} click density: time window [{}, {}] captures only {:.4} of the probability (need {MIN_CAPTURED_MASS}); widen [time]",
            config.axis.t_min, config.axis.t_max, d.captured_mass
        )));
    }
    Ok(())
}

pub fn cmd_density(config: &RunConfig) -> Result<CommandOutput, CliError> {
    let free = packet_click_density(&config.packet, &config.shell, &phase_table(config, true)?, &config.axis)
        .stage("click density")?;
    let int = packet_click_density(&config.packet, &config.shell, &phase_table(config, false)?, &config.axis)
        .stage("click density")?;
    ensure_captured("free", &free, config)?;
    ensure_captured("interacting", &int, config)?;

    let mut table = ResultTable::new("density", &[("t", "1/energy"), ("p_free", "energy"), ("p_int", "energy")]);
    for i in 0..free.times.len() {
        table.push(vec![free.times[i].into(), free.density[i].into(), int.density[i].into()]);
    }
    let summary = json!({
        "captured_mass_free": free.captured_mass,
        "captured_mass_int": int.captured_mass,
        "peak_free": peak_time(&free),
        "peak_int": peak_time(&int),
        "mean_free": free.mean(),
        "mean_int": int.mean(),
        "traversal_time": config.shell.mass() * config.shell.radius() / config.packet.k0(),
    });
    Ok(CommandOutput {
        tables: vec![table],
        summaries: vec![("density_summary".into(), summary)],
        verdict: Ok(()),
    })
}

pub fn cmd_delay(config: &RunConfig) -> Result<CommandOutput, CliError> {
    let experiment = DelayExperiment {
        grid: config.grid,
        potential: config.potential.clone(),
        settings: config.settings,
        shell: config.shell,
        k0: config.packet.k0(),
        sigma_k: config.packet.sigma_k(),
        axis: config.axis,
    };
    let report = experiment.run().stage("delay")?;
    ensure_captured("free", &report.free_density, config)?;
    ensure_captured("interacting", &report.interacting_density, config)?;

    let [density_vs_wigner, density_vs_operator, wigner_vs_operator] = report.route_disagreements();
    let agree = report.routes_agree();
    let mut table = ResultTable::new(
        "delay",
        &[
            ("shift_mean", "1/energy"),
            ("shift_peak", "1/energy"),
            ("peak_reliable", "-"),
            ("wigner_delay_at_k0", "1/energy"),
            ("wigner_delay_averaged", "1/energy"),
            ("operator_delay", "1/energy"),
            ("operator_delay_commutator", "1/energy"),
            ("l1_overlap_residual", "1"),
            ("traversal_time", "1/energy"),
            ("density_vs_wigner", "1"),
            ("density_vs_operator", "1"),
            ("wigner_vs_operator", "1"),
            ("routes_agree", "-"),
        ],
    );
    table.push(vec![
        report.shift.shift_mean.into(),
        report.shift.shift_peak.into(),
        report.shift.peak_reliable.into(),
        report.wigner_delay_at_k0.into(),
        report.wigner_delay_averaged.into(),
        report.operator_delay.difference_form.into(),
        report.operator_delay.commutator_form.into(),
        report.shift.l1_overlap_residual.into(),
        report.traversal_time.into(),
        density_vs_wigner.into(),
        density_vs_operator.into(),
        wigner_vs_operator.into(),
        agree.into(),
    ]);
    let verdict = if agree {
        Ok(())
    } else {
        Err(CliError::InvariantFailed(format!(
            "delay routes disagree beyond {}: density/wigner {density_vs_wigner:e}, density/operator {density_vs_operator:e}, wigner/operator {wigner_vs_operator:e}",
            clicktime::delay::ROUTE_TOLERANCE
        )))
    };
    Ok(CommandOutput {
        tables: vec![table],
        summaries: Vec::new(),
        verdict,
    })
}
