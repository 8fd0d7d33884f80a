//! Run configuration: flags, sweep specs and config files.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const JOBS_ENV: &str = "MASERPHASE_JOBS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Distribution,
    Potential,
    Branches,
    PhaseDiagram,
    Corrlength,
    Autocorr,
    Twinkle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Distribution => "distribution",
            Command::Potential => "potential",
            Command::Branches => "branches",
            Command::PhaseDiagram => "phase-diagram",
            Command::Corrlength => "corrlength",
            Command::Autocorr => "autocorr",
            Command::Twinkle => "twinkle",
        }
    }

    fn default_tol(self) -> f64 {
        match self {
            Command::Distribution | Command::Twinkle => maserphase::distribution::DEFAULT_TAIL_TOL,
            Command::Corrlength | Command::Autocorr => maserphase::spectrum::DEFAULT_GAP_TOL,
            Command::Potential | Command::Branches | Command::PhaseDiagram => maserphase::potential::DEFAULT_QUAD_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// A scalar value or an inclusive sweep `lo:hi:steps` over `steps + 1` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamSpec {
    Scalar(f64),
    Sweep { lo: f64, hi: f64, steps: usize },
}

impl ParamSpec {
    pub fn is_sweep(&self) -> bool {
        matches!(self, ParamSpec::Sweep { .. })
    }

    pub fn len(&self) -> usize {
        match *self {
            ParamSpec::Scalar(_) => 1,
            ParamSpec::Sweep { steps, .. } => steps + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, i: usize) -> f64 {
        match *self {
            ParamSpec::Scalar(v) => v,
            ParamSpec::Sweep { lo, hi, steps } => {
                if i == steps {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / steps as f64
                }
            }
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            ParamSpec::Scalar(v) => (v, v),
            ParamSpec::Sweep { lo, hi, .. } => (lo, hi),
        }
    }
}

impl fmt::Display for ParamSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamSpec::Scalar(v) => write!(f, "{v}"),
            ParamSpec::Sweep { lo, hi, steps } => write!(f, "{lo}:{hi}:{steps}"),
        }
    }
}

impl FromStr for ParamSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number"));
        match parts.as_slice() {
            [v] => {
                let v = num(v)?;
                if !v.is_finite() {
                    return Err(format!("'{s}' is not finite"));
                }
                Ok(ParamSpec::Scalar(v))
            }
            [lo, hi, steps] => {
                let (lo, hi) = (num(lo)?, num(hi)?);
                let steps: usize = steps.trim().parse().map_err(|_| format!("'{steps}' is not a step count"))?;
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(format!("sweep '{s}' needs finite lo < hi"));
                }
                if steps < 2 {
                    return Err(format!("sweep '{s}' needs at least 2 steps"));
                }
                Ok(ParamSpec::Sweep { lo, hi, steps })
            }
            _ => Err(format!("'{s}' is neither a value nor lo:hi:steps")),
        }
    }
}

impl Serialize for ParamSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ParamSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fully resolved run description. Every field is explicit so that the
/// metadata written next to the data reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub flux: ParamSpec,
    pub excitation: ParamSpec,
    pub thermal_photons: ParamSpec,
    pub detuning: ParamSpec,
    pub pump: ParamSpec,
    /// Photon-number grid `x = n/N` for `potential`.
    pub x: ParamSpec,
    /// Time grid in units of `1/γ` for `autocorr`.
    pub t: ParamSpec,
    /// Poisson terms kept in the large-N distribution.
    pub terms: u32,
    pub n_max: Option<usize>,
    pub tol: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl RunConfig {
    /// Sweep points in row order: `N` outermost, `θ` innermost.
    pub fn points(&self) -> Vec<[f64; 5]> {
        let specs = [self.flux, self.excitation, self.thermal_photons, self.detuning, self.pump];
        let mut out = vec![[0.0; 5]];
        for (slot, spec) in specs.iter().enumerate() {
            let vals = spec.values();
            out = out
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |&v| {
                        let mut q = p;
                        q[slot] = v;
                        q
                    })
                })
                .collect();
        }
        out
    }

    pub fn is_sweep(&self) -> bool {
        [self.flux, self.excitation, self.thermal_photons, self.detuning, self.pump]
            .iter()
            .any(ParamSpec::is_sweep)
    }

    fn validate(&self) -> Result<(), CliError> {
        let check = |flag: &str, spec: &ParamSpec, ok: &dyn Fn(f64) -> bool, what: &str| {
            let (lo, hi) = spec.bounds();
            if ok(lo) && ok(hi) {
                Ok(())
            } else {
                Err(CliError::Usage(format!("--{flag} {spec}: {what}")))
            }
        };
        check("N", &self.flux, &|v| v >= 0.0, "flux must be nonnegative")?;
        check("a", &self.excitation, &|v| (0.0..=1.0).contains(&v), "a must lie in [0, 1]")?;
        check("nb", &self.thermal_photons, &|v| v >= 0.0, "thermal photon number must be nonnegative")?;
        check("delta", &self.detuning, &|v| v.is_finite(), "detuning must be finite")?;
        check("theta", &self.pump, &|v| v >= 0.0, "pump parameter must be nonnegative")?;
        check("x", &self.x, &|v| v >= 0.0, "x grid must be nonnegative")?;
        check("t", &self.t, &|v| v >= 0.0, "time grid must be nonnegative")?;
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::Usage(format!("--tol {}: must be positive", self.tol)));
        }
        let unused: &[(&str, ParamSpec)] = match self.command {
            Command::Branches => &[("N", self.flux), ("theta", self.pump)],
            Command::Twinkle => &[("theta", self.pump)],
            _ => &[],
        };
        for (flag, spec) in unused {
            if spec.is_sweep() {
                return Err(CliError::Usage(format!("--{flag} cannot be swept for {}", self.command.name())));
            }
        }
        if self.command == Command::PhaseDiagram {
            if !self.pump.is_sweep() || !self.excitation.is_sweep() {
                return Err(CliError::Usage("--theta and --a must be sweeps for phase-diagram".into()));
            }
            for (flag, spec) in [("N", self.flux), ("nb", self.thermal_photons), ("delta", self.detuning)] {
                if spec.is_sweep() {
                    return Err(CliError::Usage(format!("--{flag} cannot be swept for phase-diagram")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "maserphase", version, about = "Micromaser photon statistics, phase diagram and correlation length")]
struct Args {
    /// What to compute.
    #[arg(value_enum, required_unless_present = "config")]
    command: Option<Command>,

    /// Re-run from a config file or from the metadata of a previous output.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Atomic flux N (value or lo:hi:steps).
    #[arg(long = "N", allow_hyphen_values = true)]
    flux: Option<ParamSpec>,

    /// Excited-state fraction a of the injected atoms.
    #[arg(long = "a", allow_hyphen_values = true)]
    excitation: Option<ParamSpec>,

    /// Thermal photon number n_b.
    #[arg(long = "nb", allow_hyphen_values = true)]
    thermal_photons: Option<ParamSpec>,

    /// Detuning Δ.
    #[arg(long = "delta", allow_hyphen_values = true)]
    detuning: Option<ParamSpec>,

    /// Pump parameter θ.
    #[arg(long = "theta", allow_hyphen_values = true)]
    pump: Option<ParamSpec>,

    /// Grid in x = n/N for `potential`.
    #[arg(long)]
    x: Option<ParamSpec>,

    /// Time grid in units of 1/γ for `autocorr`.
    #[arg(long)]
    t: Option<ParamSpec>,

    /// Poisson terms K in the large-N distribution.
    #[arg(long)]
    terms: Option<u32>,

    /// Photon-number truncation.
    #[arg(long = "nmax")]
    n_max: Option<usize>,

    /// Numerical tolerance of the owning module.
    #[arg(long)]
    tol: Option<f64>,

    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum)]
    format: Option<Format>,

    /// Worker threads, 0 for automatic.
    #[arg(long)]
    jobs: Option<usize>,
}

fn scalar(v: f64) -> ParamSpec {
    ParamSpec::Scalar(v)
}

fn sweep(lo: f64, hi: f64, steps: usize) -> ParamSpec {
    ParamSpec::Sweep { lo, hi, steps }
}

fn env_jobs() -> Result<Option<usize>, CliError> {
    match std::env::var(JOBS_ENV) {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{JOBS_ENV}={s}: not a nonnegative integer"))),
        _ => Ok(None),
    }
}

/// Parses a command line. `--help` and `--version` come back as
/// [`CliError::Display`] carrying the text to print.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError::Display(e.to_string()),
        _ => CliError::Usage(e.to_string().trim_end().to_string()),
    })?;
    let base = match &args.config {
        Some(path) => Some(read_config_file(path)?),
        None => None,
    };
    let command = match (args.command, &base) {
        (Some(c), _) => c,
        (None, Some(b)) => b.command,
        (None, None) => return Err(CliError::Usage("a command is required".into())),
    };
    let pick = |flag: Option<ParamSpec>, from_base: Option<ParamSpec>, default: ParamSpec| {
        flag.or(from_base).unwrap_or(default)
    };
    let b = base.as_ref();
    let diagram = command == Command::PhaseDiagram;
    let cfg = RunConfig {
        command,
        flux: pick(args.flux, b.map(|c| c.flux), scalar(100.0)),
        excitation: pick(args.excitation, b.map(|c| c.excitation), if diagram { sweep(0.3, 1.0, 64) } else { scalar(1.0) }),
        thermal_photons: pick(args.thermal_photons, b.map(|c| c.thermal_photons), scalar(0.15)),
        detuning: pick(args.detuning, b.map(|c| c.detuning), scalar(0.0)),
        pump: pick(args.pump, b.map(|c| c.pump), if diagram { sweep(0.5, 25.0, 128) } else { scalar(1.0) }),
        x: pick(args.x, b.map(|c| c.x), sweep(0.0, 1.2, 240)),
        t: pick(args.t, b.map(|c| c.t), sweep(0.0, 20.0, 400)),
        terms: args.terms.or(b.map(|c| c.terms)).unwrap_or(0),
        n_max: args.n_max.or(b.and_then(|c| c.n_max)),
        tol: args.tol.or(b.map(|c| c.tol)).unwrap_or_else(|| command.default_tol()),
        out: args.out.or(b.and_then(|c| c.out.clone())),
        format: args.format.or(b.map(|c| c.format)).unwrap_or(Format::Csv),
        jobs: match args.jobs.or(b.map(|c| c.jobs)) {
            Some(j) => j,
            None => env_jobs()?.unwrap_or(0),
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a bare JSON config, a JSON output document or the `# config:` line
/// of a CSV output.
pub fn read_config_file(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
    parse_config_text(&text).map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))
}

pub fn parse_config_text(text: &str) -> Result<RunConfig, String> {
    if let Some(line) = text.lines().find_map(|l| l.strip_prefix("# config: ")) {
        return serde_json::from_str(line).map_err(|e| e.to_string());
    }
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let inner = value.get("metadata").and_then(|m| m.get("config")).cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| e.to_string())
}
