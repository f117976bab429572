//! Batch driver for `framedisc`: builds a model, covering and sampling plan
//! from a JSON config and writes deterministic JSON reports.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use framedisc_core::discretizer::InverseMethod;
use framedisc_core::{check_property_d, discretize, Covering, CoveringReport, DiscretizationResult, Error, OscReport, PhaseRule};
use serde::Serialize;

pub mod config;
pub mod merge;

pub use config::{ExperimentConfig, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Refused(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Property(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Refused(_) => EXIT_REFUSED,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Property(_) => EXIT_PROPERTY,
        }
    }

    /// Library errors raised while interpreting the config.
    pub(crate) fn config(e: Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub(crate) fn from_core(e: Error) -> Self {
        match e {
            Error::NotContractive { .. } => CliError::Refused(e.to_string()),
            Error::RefineExhausted { .. } => CliError::Property(e.to_string()),
            Error::Numerical(_) | Error::NotConverged { .. } | Error::NonFinite(_) => CliError::Numerical(e.to_string()),
            Error::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "framedisc", version, about = "Discretize continuous frames on finite quadrature models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the configured covering.
    Validate(ConfigArgs),
    /// Oscillation report for the configured (or refined) covering.
    Osc(ConfigArgs),
    /// Full discretization pipeline with residual checks.
    Discretize(ConfigArgs),
    /// Summarize JSON reports as a CSV table.
    ReportMerge {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Config file plus overrides; flag names follow the config keys.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<PhaseRule>,
    #[arg(long)]
    pub method: Option<InverseMethod>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Window width, one value or comma-separated per axis.
    #[arg(long, value_delimiter = ',')]
    pub width: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub overlap: Option<Vec<f64>>,
    /// Exponent of `Y`, a number or `inf`.
    #[arg(long)]
    pub p: Option<String>,
    /// Search for a covering instead of using the configured one.
    #[arg(long)]
    pub refine: bool,
    #[arg(long)]
    pub max_rounds: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        let per_axis = |v: &Vec<f64>| {
            if v.len() == 1 {
                config::PerAxis::All(v[0])
            } else {
                config::PerAxis::Each(v.clone())
            }
        };
        if let Some(v) = &self.width {
            cfg.covering.kind = config::CoveringKind::Windows;
            cfg.covering.width = Some(per_axis(v));
        }
        if let Some(v) = &self.overlap {
            cfg.covering.overlap = Some(per_axis(v));
        }
        if let Some(p) = &self.p {
            cfg.weight.p = framedisc_core::Exponent::parse(p).map_err(CliError::config)?;
        }
        if self.refine && cfg.refine.is_none() {
            cfg.refine = Some(config::RefineSpec::default());
        }
        if let Some(v) = self.max_rounds {
            cfg.refine.get_or_insert_with(Default::default).max_rounds = v;
        }
        if let Some(v) = &self.output {
            cfg.output = Some(v.clone());
        }
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: &'static str,
    command: &'a str,
    #[serde(flatten)]
    body: T,
}

#[derive(Debug, Serialize)]
pub struct ValidateReport {
    pub covering_id: String,
    #[serde(flatten)]
    pub report: CoveringReport,
}

#[derive(Debug, Serialize)]
pub struct OscCommandReport {
    #[serde(flatten)]
    pub report: OscReport,
    pub contraction_bound: f64,
    pub contraction_bound_sharp: f64,
    pub refined: bool,
}

/// Serialized report plus the exit code it implies.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub json: String,
    pub message: Option<String>,
}

fn render<T: Serialize>(command: &str, body: T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(&Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        body,
    })
    .map_err(|e| CliError::Numerical(format!("report serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn cmd_validate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let exp = cfg.experiment()?;
    let (cov, _) = cfg.build_covering(&exp)?;
    let space = exp.model.space();
    let mut report = cov.validate(space).map_err(CliError::config)?;
    if report.moderate {
        report.c_mu = Some(cov.weight_compatibility(&exp.weight).map_err(CliError::config)?);
    }
    let code = if report.moderate { EXIT_OK } else { EXIT_PROPERTY };
    let message = (!report.moderate).then(|| {
        format!(
            "covering is not moderate ({} uncovered points, {} empty sets)",
            report.uncovered.len(),
            report.empty_sets.len()
        )
    });
    let json = render(
        "validate",
        ValidateReport {
            covering_id: cov.id(),
            report,
        },
    )?;
    Ok(Outcome { code, json, message })
}

fn uncovered_error(cov: &Covering, exp: &config::Experiment) -> Result<(), CliError> {
    let report = cov.validate(exp.model.space()).map_err(CliError::config)?;
    if !report.moderate {
        return Err(CliError::Config(format!(
            "covering is not moderate ({} uncovered points, {} empty sets); run validate",
            report.uncovered.len(),
            report.empty_sets.len()
        )));
    }
    Ok(())
}

pub fn cmd_osc(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let exp = cfg.experiment()?;
    let (cov, refined_report, refined) = if cfg.refine.is_some() && cfg.delta == 0.0 {
        // no covering can satisfy the strict inequality; report the search endpoint
        let cov = Covering::singletons(exp.model.len());
        (cov, None, true)
    } else {
        let (cov, rep) = cfg.build_covering(&exp)?;
        let refined = rep.is_some();
        (cov, rep, refined)
    };
    uncovered_error(&cov, &exp)?;
    let report = match refined_report {
        Some(r) => r,
        None => check_property_d(&exp.model, &cov, &exp.gamma, &exp.weight, cfg.delta).map_err(CliError::from_core)?,
    };
    let ok = report.holds_d && report.holds_58;
    let message = (!ok).then(|| {
        format!(
            "property check failed: holds_D = {}, holds_58 = {} (osc norm {:.6}, delta {})",
            report.holds_d, report.holds_58, report.osc_norm, report.delta
        )
    });
    let body = OscCommandReport {
        contraction_bound: report.contraction_bound(),
        contraction_bound_sharp: report.sharp_contraction_bound(),
        report,
        refined,
    };
    Ok(Outcome {
        code: if ok { EXIT_OK } else { EXIT_PROPERTY },
        json: render("osc", body)?,
        message,
    })
}

pub fn run_discretize(cfg: &ExperimentConfig) -> Result<DiscretizationResult, CliError> {
    let exp = cfg.experiment()?;
    let (cov, _) = cfg.build_covering(&exp)?;
    uncovered_error(&cov, &exp)?;
    let plan = cfg.build_plan(&exp, &cov)?;
    discretize(&exp.model, &plan, &exp.gamma, &exp.y, &cfg.pipeline_options()).map_err(CliError::from_core)
}

pub fn cmd_discretize(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let result = run_discretize(cfg)?;
    let code = if result.passed() { EXIT_OK } else { EXIT_PROPERTY };
    let message = (!result.passed()).then(|| format!("failing checks: {}", result.failing.join(", ")));
    Ok(Outcome {
        code,
        json: render("discretize", &result)?,
        message,
    })
}

fn write_output(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}"))),
    }
}

fn run_config_command(
    args: &ConfigArgs,
    f: fn(&ExperimentConfig) -> Result<Outcome, CliError>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let outcome = args.resolve().and_then(|cfg| {
        let out = f(&cfg)?;
        write_output(cfg.output.as_deref(), &out.json, stdout)?;
        Ok(out)
    });
    match outcome {
        Ok(out) => {
            if let Some(msg) = out.message {
                let _ = writeln!(stderr, "{msg}");
            }
            out.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn execute<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{e}")
            } else {
                write!(stdout, "{e}")
            };
            return code;
        }
    };
    match &cli.command {
        Command::Validate(a) => run_config_command(a, cmd_validate, stdout, stderr),
        Command::Osc(a) => run_config_command(a, cmd_osc, stdout, stderr),
        Command::Discretize(a) => run_config_command(a, cmd_discretize, stdout, stderr),
        Command::ReportMerge { reports, output } => {
            match merge::merge_reports(reports).and_then(|csv| write_output(output.as_deref(), &csv, stdout)) {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    e.exit_code()
                }
            }
        }
    }
}
