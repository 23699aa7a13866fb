//! Command-line front end: config resolution, dispatch and exit codes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ionshift::ion_params::{builtin_yb171, load_species, IonSpecies, LaserField, MagneticField};
use ionshift::polarization::PolarizationState;
use ionshift::stark::QubitKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod commands;

pub const BUILTIN_SPECIES: &str = "builtin:yb171";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<ionshift::Error> for CliError {
    fn from(e: ionshift::Error) -> Self {
        use ionshift::Error as E;
        match e {
            E::Schema { .. } | E::Validation { .. } | E::UnsupportedGeometry { .. } => CliError::Config(e.to_string()),
            E::CombSingularity { .. } | E::Domain(_) | E::FitNotConverged(_) => CliError::Numeric(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QubitArg {
    Clock,
    #[value(name = "zeeman+")]
    ZeemanPlus,
    #[value(name = "zeeman-")]
    ZeemanMinus,
}

impl From<QubitArg> for QubitKind {
    fn from(q: QubitArg) -> Self {
        match q {
            QubitArg::Clock => QubitKind::Clock,
            QubitArg::ZeemanPlus => QubitKind::ZeemanPlus,
            QubitArg::ZeemanMinus => QubitKind::ZeemanMinus,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ionshift", version, about = "AC Stark shifts of 171Yb+ hyperfine qubits under a pulsed comb")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// `builtin:yb171` or a path to a species JSON file
    #[arg(long, global = true)]
    pub species: Option<String>,
    #[arg(long = "power-mw", global = true)]
    pub power_mw: Option<f64>,
    #[arg(long = "waist-um", global = true)]
    pub waist_um: Option<f64>,
    #[arg(long = "rep-rate-mhz", global = true)]
    pub rep_rate_mhz: Option<f64>,
    #[arg(long = "pulse-ps", global = true)]
    pub pulse_ps: Option<f64>,
    #[arg(long = "b-gauss", global = true)]
    pub b_gauss: Option<f64>,
    /// Half-wave plate angle in degrees
    #[arg(long = "hwp-deg", global = true)]
    pub hwp_deg: Option<f64>,
    /// Quarter-wave plate angle in degrees
    #[arg(long = "qwp-deg", global = true)]
    pub qwp_deg: Option<f64>,
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Differential shift versus relative wave-plate angle
    ScanTheta {
        #[arg(long, value_enum, default_value = "clock")]
        qubit: QubitArg,
        #[arg(long = "resolution-deg", default_value_t = 0.5)]
        resolution_deg: f64,
    },
    /// Differential shift versus laser power at fixed polarization
    ScanIntensity {
        #[arg(long, value_enum, default_value = "clock")]
        qubit: QubitArg,
        /// Relative angle θ (HWP with QWP at 0°); defaults to the configured plates
        #[arg(long = "theta-deg")]
        theta_deg: Option<f64>,
        #[arg(long = "powers-mw", value_delimiter = ',', default_value = "0,10,20,30,40,52.1,60,70,80")]
        powers_mw: Vec<f64>,
    },
    /// Minimum-|shift| angle and zero crossings
    FindMagic {
        #[arg(long, value_enum, default_value = "clock")]
        qubit: QubitArg,
        /// Also write the 0.1° scan as CSV
        #[arg(long = "scan-out")]
        scan_out: Option<PathBuf>,
    },
    /// Smallest field allowing full clock-shift cancellation
    ThresholdField {
        #[arg(long = "b-min", default_value_t = 0.0)]
        b_min: f64,
        #[arg(long = "b-max", default_value_t = 100.0)]
        b_max: f64,
    },
    /// Zeeman-dressed ground states
    DressedStates,
    /// Ramsey contrast decay under intensity noise
    Ramsey(RamseyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RamseyArgs {
    #[arg(long, value_enum, default_value = "clock")]
    pub qubit: QubitArg,
    #[arg(long = "theta-deg")]
    pub theta_deg: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub shots: usize,
    /// Fractional intensity noise; calibrated when omitted
    #[arg(long = "sigma-i")]
    pub sigma_i: Option<f64>,
    /// Clock T2 at the calibration angle used to fix the noise
    #[arg(long = "calibrate-t2-ms", default_value_t = 0.478)]
    pub calibrate_t2_ms: f64,
    #[arg(long = "calibrate-theta-deg", default_value_t = 22.5)]
    pub calibrate_theta_deg: f64,
    /// Laser-free T2 floor; defaults to 331 ms (clock) or 0.853 ms (Zeeman)
    #[arg(long = "baseline-t2-ms")]
    pub baseline_t2_ms: Option<f64>,
    #[arg(long = "baseline-exponent", default_value_t = 1.0)]
    pub baseline_exponent: f64,
    #[arg(long = "no-baseline")]
    pub no_baseline: bool,
    /// Longest free-evolution time; defaults to three predicted T2
    #[arg(long = "tau-max-ms")]
    pub tau_max_ms: Option<f64>,
    #[arg(long, default_value_t = 40)]
    pub points: usize,
    /// Where to write the JSON summary (default: stderr)
    #[arg(long = "summary-out")]
    pub summary_out: Option<PathBuf>,
}

/// Fully resolved run parameters, echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub species: String,
    pub power_mw: f64,
    pub waist_um: f64,
    pub rep_rate_mhz: f64,
    pub pulse_ps: f64,
    pub b_gauss: f64,
    pub hwp_deg: f64,
    pub qwp_deg: f64,
    pub format: Format,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            species: BUILTIN_SPECIES.to_string(),
            power_mw: 52.1,
            waist_um: 7.0,
            rep_rate_mhz: 118.993,
            pulse_ps: 12.883,
            b_gauss: 11.343,
            hwp_deg: 22.5,
            qwp_deg: 0.0,
            format: Format::Csv,
            seed: 1,
        }
    }
}

/// Config-file form: every key optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    species: Option<String>,
    power_mw: Option<f64>,
    waist_um: Option<f64>,
    rep_rate_mhz: Option<f64>,
    pulse_ps: Option<f64>,
    b_gauss: Option<f64>,
    hwp_deg: Option<f64>,
    qwp_deg: Option<f64>,
    format: Option<Format>,
    seed: Option<u64>,
}

impl RunConfig {
    pub fn resolve(args: &GlobalArgs) -> CliResult<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
                serde_json::from_str::<PartialConfig>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => PartialConfig::default(),
        };
        let d = RunConfig::default();
        let cfg = RunConfig {
            species: args.species.clone().or(file.species).unwrap_or(d.species),
            power_mw: args.power_mw.or(file.power_mw).unwrap_or(d.power_mw),
            waist_um: args.waist_um.or(file.waist_um).unwrap_or(d.waist_um),
            rep_rate_mhz: args.rep_rate_mhz.or(file.rep_rate_mhz).unwrap_or(d.rep_rate_mhz),
            pulse_ps: args.pulse_ps.or(file.pulse_ps).unwrap_or(d.pulse_ps),
            b_gauss: args.b_gauss.or(file.b_gauss).unwrap_or(d.b_gauss),
            hwp_deg: args.hwp_deg.or(file.hwp_deg).unwrap_or(d.hwp_deg),
            qwp_deg: args.qwp_deg.or(file.qwp_deg).unwrap_or(d.qwp_deg),
            format: args.format.or(file.format).unwrap_or(d.format),
            seed: args.seed.or(file.seed).unwrap_or(d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        for (name, v) in [("hwp_deg", self.hwp_deg), ("qwp_deg", self.qwp_deg)] {
            if !v.is_finite() {
                return Err(CliError::Config(format!("{name} must be finite, got {v}")));
            }
        }
        self.laser()?;
        self.field()?;
        Ok(())
    }

    pub fn species(&self) -> CliResult<IonSpecies> {
        if self.species == BUILTIN_SPECIES {
            return Ok(builtin_yb171());
        }
        if let Some(other) = self.species.strip_prefix("builtin:") {
            return Err(CliError::Config(format!("unknown builtin species `{other}`")));
        }
        let text = fs::read_to_string(&self.species)
            .map_err(|e| CliError::Io(format!("reading species file {}: {e}", self.species)))?;
        Ok(load_species(&text)?)
    }

    pub fn laser(&self) -> CliResult<LaserField> {
        Ok(LaserField::from_lab_units(
            self.power_mw,
            self.waist_um,
            self.pulse_ps,
            self.rep_rate_mhz,
        )?)
    }

    pub fn field(&self) -> CliResult<MagneticField> {
        Ok(MagneticField::from_gauss(self.b_gauss)?)
    }

    pub fn polarization(&self) -> PolarizationState {
        PolarizationState::from_wave_plates(self.hwp_deg.to_radians(), self.qwp_deg.to_radians())
    }

    pub fn header_line(&self) -> String {
        format!("# config: {}\n", serde_json::to_string(self).expect("config serializes"))
    }
}

/// Write `text` to `path`, or stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("writing {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(format!("writing stdout: {e}")))
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = RunConfig::resolve(&cli.global)?;
    let out = cli.global.out.as_deref();
    match cli.command {
        Command::ScanTheta { qubit, resolution_deg } => commands::scan_theta(&cfg, qubit.into(), resolution_deg, out),
        Command::ScanIntensity {
            qubit,
            theta_deg,
            powers_mw,
        } => commands::scan_intensity(&cfg, qubit.into(), theta_deg, &powers_mw, out),
        Command::FindMagic { qubit, scan_out } => commands::find_magic(&cfg, qubit.into(), scan_out.as_deref(), out),
        Command::ThresholdField { b_min, b_max } => commands::threshold_field(&cfg, (b_min, b_max), out),
        Command::DressedStates => commands::dressed_states(&cfg, out),
        Command::Ramsey(args) => commands::ramsey(&cfg, &args, out),
    }
}
