//! TOML run configuration.
//!
//! Every section is optional; omitted keys take the defaults shown in
//! [`SCHEMA`]. Loading re-validates the preconditions of the library calls
//! each subcommand makes, so a config that loads cannot fail on a bad
//! parameter later.

use std::path::{Path, PathBuf};

use clicktime::radial::TabulatedPotential;
use clicktime::{
    EnergyGrid, PotentialKind, PotentialSpec, RadialSettings, ShellSpec, TimeAxis, WavePacket,
};
use serde::Deserialize;

use crate::error::CliError;

pub const SCHEMA: &str = r#"CONFIG (TOML; every key optional, defaults shown)

  [grid]                     energy grid, hbar = 1
  e_min = 0.5                lowest energy, > 0
  e_max = 4.5                highest energy, > e_min
  n_points = 401             number of grid points, >= 11
  mass = 1.0                 particle mass, > 0

  [potential]
  kind = "hard_sphere"       free | hard_sphere | square_barrier | exponential | tabulated
  l = 0                      angular momentum
  radius = 1.0               hard_sphere: core radius a
  height = 1.0               square_barrier: V0 (any sign)
  width = 1.0                square_barrier: r0
  strength = 5.0             exponential: V0 in V0 exp(-r/a0)
  range = 1.0                exponential: a0
  file = "v.dat"             tabulated: two whitespace-separated columns r V(r),
                             '#' comments allowed, linear interpolation, V = 0
                             beyond the last r; path relative to the config file

  [detector]                 spherical shell [R - rho/2, R + rho/2]
  radius = 10.0              R, must lie outside the potential
  thickness = 0.0            rho, 0 for an infinitely thin shell

  [packet]                   Gaussian in k, support |k - k0| < 5 sigma_k
  k0 = 2.0
  sigma_k = 0.04

  [time]                     click-time axis, inside [-pi/h, pi/h]
  t_min = -40.0
  t_max = 60.0
  n_t = 4000

  [output]
  directory = "out"          overridden by --out
  formats = ["csv"]          any of "csv", "json"; overridden by --format

  [solver]                   radial Numerov solver; defaults adapt to the grid
  dr = 0.005                 step, min(0.02 / k_max, 0.005) by default
  r_match = 15.0             matching radius, max(range + 2, 15) by default
  r_max = 16.0               outer radius, r_match + 1 by default

CSV files carry a units row under the header (hbar = 1: time = 1/energy).
"#;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    grid: RawGrid,
    potential: RawPotential,
    detector: RawDetector,
    packet: RawPacket,
    time: RawTime,
    output: RawOutput,
    solver: Option<RawSolver>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawGrid {
    e_min: f64,
    e_max: f64,
    n_points: i64,
    mass: f64,
}

impl Default for RawGrid {
    fn default() -> Self {
        Self {
            e_min: 0.5,
            e_max: 4.5,
            n_points: 401,
            mass: 1.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawPotential {
    kind: String,
    l: i64,
    radius: Option<f64>,
    height: Option<f64>,
    width: Option<f64>,
    strength: Option<f64>,
    range: Option<f64>,
    file: Option<PathBuf>,
}

impl Default for RawPotential {
    fn default() -> Self {
        Self {
            kind: "hard_sphere".into(),
            l: 0,
            radius: None,
            height: None,
            width: None,
            strength: None,
            range: None,
            file: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawDetector {
    radius: f64,
    thickness: f64,
}

impl Default for RawDetector {
    fn default() -> Self {
        Self {
            radius: 10.0,
            thickness: 0.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawPacket {
    k0: f64,
    sigma_k: f64,
}

impl Default for RawPacket {
    fn default() -> Self {
        Self { k0: 2.0, sigma_k: 0.04 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawTime {
    t_min: f64,
    t_max: f64,
    n_t: i64,
}

impl Default for RawTime {
    fn default() -> Self {
        Self {
            t_min: -40.0,
            t_max: 60.0,
            n_t: 4000,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawOutput {
    directory: PathBuf,
    formats: Vec<String>,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec!["csv".into()],
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    dr: Option<f64>,
    r_match: Option<f64>,
    r_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Self::Csv),
            "json" => Some(Self::Json),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: EnergyGrid,
    pub potential: PotentialSpec,
    pub shell: ShellSpec,
    pub packet: WavePacket,
    pub axis: TimeAxis,
    pub settings: RadialSettings,
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

fn require(key: &str, value: Option<f64>) -> Result<f64, CliError> {
    value.ok_or_else(|| CliError::config(key, "required for this potential kind"))
}

fn positive(key: &str, value: f64) -> Result<f64, CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::config(key, format!("must be a positive finite number, got {value}")))
    }
}

fn finite(key: &str, value: f64) -> Result<f64, CliError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::config(key, format!("must be finite, got {value}")))
    }
}

fn reject(key: &str) -> impl Fn(clicktime::Error) -> CliError + '_ {
    move |e| CliError::config(key, e.to_string())
}

impl RunConfig {
    pub fn defaults() -> Result<Self, CliError> {
        Self::from_raw(RawConfig::default(), Path::new("."))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parse TOML text; relative file paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let document = toml::de::Deserializer::parse(text)
            .map_err(|e| CliError::config("<document>", e.to_string().trim_end()))?;
        let raw: RawConfig = serde_path_to_error::deserialize(document).map_err(|e| {
            let key = match e.path().to_string() {
                p if p == "." || p.is_empty() => "<document>".to_string(),
                p => p,
            };
            CliError::config(key, e.inner().message())
        })?;
        Self::from_raw(raw, base)
    }

    fn from_raw(raw: RawConfig, base: &Path) -> Result<Self, CliError> {
        let g = &raw.grid;
        let e_min = positive("grid.e_min", g.e_min)?;
        let e_max = positive("grid.e_max", g.e_max)?;
        if e_max <= e_min {
            return Err(CliError::config("grid.e_max", format!("must exceed grid.e_min = {e_min}")));
        }
        if g.n_points < 11 {
            return Err(CliError::config("grid.n_points", format!("must be at least 11, got {}", g.n_points)));
        }
        let mass = positive("grid.mass", g.mass)?;
        let grid = EnergyGrid::new(e_min, e_max, g.n_points as usize, mass, 1).map_err(reject("grid"))?;

        let potential = potential_from_raw(&raw.potential, mass, base)?;

        let d = &raw.detector;
        let radius = positive("detector.radius", d.radius)?;
        if d.thickness.is_nan() || d.thickness < 0.0 || d.thickness >= 2.0 * radius {
            return Err(CliError::config(
                "detector.thickness",
                format!("must lie in [0, 2 * detector.radius), got {}", d.thickness),
            ));
        }
        let shell = ShellSpec::new(radius, d.thickness, mass).map_err(reject("detector"))?;
        potential
            .ensure_negligible_at(shell.inner())
            .map_err(|e| CliError::config("detector.radius", format!("shell must lie outside the potential: {e}")))?;

        let p = &raw.packet;
        let k0 = positive("packet.k0", p.k0)?;
        let sigma_k = positive("packet.sigma_k", p.sigma_k)?;
        let packet = WavePacket::gaussian(&grid, k0, sigma_k).map_err(reject("packet.k0"))?;

        let t = &raw.time;
        let t_min = finite("time.t_min", t.t_min)?;
        let t_max = finite("time.t_max", t.t_max)?;
        if t_max <= t_min {
            return Err(CliError::config("time.t_max", format!("must exceed time.t_min = {t_min}")));
        }
        if t.n_t < 3 {
            return Err(CliError::config("time.n_t", format!("must be at least 3, got {}", t.n_t)));
        }
        let horizon = grid.nyquist_time();
        for (key, value) in [("time.t_min", t_min), ("time.t_max", t_max)] {
            if value.abs() > horizon {
                return Err(CliError::config(
                    key,
                    format!("|{value}| exceeds the alias-free horizon pi/h = {horizon}"),
                ));
            }
        }
        let axis = TimeAxis::new(t_min, t_max, t.n_t as usize).map_err(reject("time"))?;

        let k_max = grid.momentum(grid.len() - 1);
        let mut settings = RadialSettings::for_potential(&potential, k_max);
        if let Some(s) = &raw.solver {
            if let Some(dr) = s.dr {
                settings.dr = positive("solver.dr", dr)?;
                if k_max * dr >= 0.2 {
                    return Err(CliError::config(
                        "solver.dr",
                        format!("k_max * dr must stay below 0.2 (k_max = {k_max})"),
                    ));
                }
            }
            if let Some(r_match) = s.r_match {
                settings.r_match = positive("solver.r_match", r_match)?;
                settings.r_max = settings.r_max.max(settings.r_match + 1.0);
            }
            if let Some(r_max) = s.r_max {
                settings.r_max = positive("solver.r_max", r_max)?;
            }
            settings = RadialSettings::new(settings.r_max, settings.dr, settings.r_match)
                .map_err(reject("solver.r_max"))?;
            potential
                .ensure_negligible_at(settings.r_match)
                .map_err(reject("solver.r_match"))?;
        }

        let formats = raw
            .output
            .formats
            .iter()
            .map(|f| {
                Format::parse(f)
                    .ok_or_else(|| CliError::config("output.formats", format!("unknown format {f:?}, expected csv or json")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if formats.is_empty() {
            return Err(CliError::config("output.formats", "must name at least one format"));
        }

        Ok(Self {
            grid,
            potential,
            shell,
            packet,
            axis,
            settings,
            directory: raw.output.directory,
            formats,
        })
    }
}

fn potential_from_raw(raw: &RawPotential, mass: f64, base: &Path) -> Result<PotentialSpec, CliError> {
    if raw.l < 0 {
        return Err(CliError::config("potential.l", format!("must be non-negative, got {}", raw.l)));
    }
    let kind = match raw.kind.as_str() {
        "free" => PotentialKind::Free,
        "hard_sphere" => PotentialKind::HardSphere {
            radius: positive("potential.radius", raw.radius.unwrap_or(1.0))?,
        },
        "square_barrier" => PotentialKind::SquareBarrier {
            height: finite("potential.height", require("potential.height", raw.height)?)?,
            width: positive("potential.width", require("potential.width", raw.width)?)?,
        },
        "exponential" => PotentialKind::Exponential {
            strength: finite("potential.strength", require("potential.strength", raw.strength)?)?,
            range: positive("potential.range", require("potential.range", raw.range)?)?,
        },
        "tabulated" => {
            let file = raw
                .file
                .as_ref()
                .ok_or_else(|| CliError::config("potential.file", "required for a tabulated potential"))?;
            let path = base.join(file);
            let text = std::fs::read_to_string(&path).map_err(|e| {
                CliError::config("potential.file", format!("cannot read {}: {e}", path.display()))
            })?;
            PotentialKind::Tabulated(
                text.parse::<TabulatedPotential>()
                    .map_err(|e| CliError::config("potential.file", e.to_string()))?,
            )
        }
        other => {
            return Err(CliError::config(
                "potential.kind",
                format!("unknown kind {other:?}, expected free, hard_sphere, square_barrier, exponential or tabulated"),
            ))
        }
    };
    PotentialSpec::new(kind, raw.l as usize, mass).map_err(reject("potential"))
}
