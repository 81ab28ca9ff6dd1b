//! `revlin`: oracle queries, Monte Carlo runs and coefficient dumps.
//!
//! Exit codes: 0 pass, 1 fail, 2 usage or configuration error,
//! 3 inconclusive.

mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use revlin::coefficients::{regvar_diagnostic, weight_profile, write_coefficients_csv, CoefficientFamily};
use revlin::innovations::{ChainSpec, GroupWalkSpec};
use revlin::mc::{run_experiment, Verdict};
use revlin::oracle::{check_conditions, limit_targets, round_json, CovarianceModel};
use serde::Serialize;

use config::{parse_chain, parse_family, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Run(String),
}

impl From<revlin::Error> for CliError {
    fn from(e: revlin::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(name = "revlin", version, about = "Linear processes with reversible Markov innovations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Chain shorthand, e.g. `mh:a=1,q=1`; overrides the config.
    #[arg(long)]
    chain: Option<String>,
    /// Coefficient family shorthand, e.g. `fracint:d=0.25`; overrides the config.
    #[arg(long)]
    family: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print limit targets and condition checks.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Exit 1 if some condition fails.
        #[arg(long)]
        strict: bool,
    },
    /// Run a Monte Carlo experiment and write its report.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores). Does not affect results.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write coefficient and weight CSVs plus regular-variation diagnostics.
    Coeffs {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1024)]
        n: usize,
        /// Largest coefficient index written.
        #[arg(long, default_value_t = 100)]
        i_max: i64,
        /// Truncation tolerance for the weight window.
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
    },
    /// Validate a configuration without running it.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        strict: bool,
    },
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::empty(),
    };
    if let Some(c) = &common.chain {
        cfg.chain = Some(parse_chain(c)?);
    }
    if let Some(f) = &common.family {
        cfg.family = Some(parse_family(f)?);
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &RunConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut value = serde_json::to_value(v).map_err(|e| CliError::Run(e.to_string()))?;
    round_json(&mut value);
    serde_json::to_string_pretty(&value).map_err(|e| CliError::Run(e.to_string()))
}

fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn group_of(chain: &ChainSpec) -> Option<&GroupWalkSpec> {
    match chain {
        ChainSpec::Group(g) => Some(g),
        _ => None,
    }
}

#[derive(Serialize)]
struct OracleOutput {
    chain: ChainSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    family: Option<CoefficientFamily>,
    model: CovarianceModel,
    targets: revlin::oracle::LimitTargets,
    conditions: revlin::oracle::ConditionReport,
}

fn oracle_output(cfg: &RunConfig) -> Result<OracleOutput, CliError> {
    let chain = cfg
        .chain
        .clone()
        .ok_or_else(|| CliError::Config("no chain given (use --chain or a config)".into()))?;
    let model = CovarianceModel::from_chain(&chain).map_err(|e| CliError::Config(e.to_string()))?;
    let targets = limit_targets(&chain, cfg.family.as_ref()).map_err(|e| CliError::Config(e.to_string()))?;
    let conditions = check_conditions(&model, group_of(&chain));
    Ok(OracleOutput { chain, family: cfg.family, model, targets, conditions })
}

fn cmd_oracle(common: &Common, strict: bool) -> Result<u8, CliError> {
    let cfg = load(common)?;
    let out = oracle_output(&cfg)?;
    let json = to_json(&out)?;
    emit(&json);
    if common.out.is_some() || cfg.output.dir.is_some() {
        write_file(&out_dir(common, &cfg), "oracle.json", &json)?;
    }
    let failed = out.conditions.failed();
    if !failed.is_empty() {
        eprintln!("conditions not satisfied: {}", failed.join(", "));
        if strict {
            return Ok(EXIT_FAIL);
        }
    }
    Ok(EXIT_PASS)
}

fn cmd_run(common: &Common, seed: Option<u64>, threads: Option<usize>) -> Result<u8, CliError> {
    let cfg = load(common)?;
    let mut exp = cfg.experiment()?;
    if let Some(s) = seed {
        exp.seed = s;
    }
    if threads == Some(0) {
        return Err(CliError::Config("--threads must be positive".into()));
    }
    let report = run_experiment(&exp, threads)?;
    let dir = out_dir(common, &cfg);
    let path = write_file(&dir, &cfg.output.report, &report.to_json_string()?)?;
    if let Some(name) = &cfg.output.samples_csv {
        std::fs::create_dir_all(&dir)?;
        report.write_samples_csv(BufWriter::new(File::create(dir.join(name))?))?;
    }
    let verdict = report.verdict();
    for c in &report.statistics.checks {
        eprintln!(
            "{:<14} {}: estimate {:.6} ± {:.6}, target {:.6}",
            format!("{:?}", c.verdict).to_lowercase(),
            c.name,
            c.estimate,
            c.se,
            c.target
        );
    }
    eprintln!("verdict: {verdict:?}; report written to {}", path.display());
    Ok(match verdict {
        Verdict::Pass => EXIT_PASS,
        Verdict::Fail => EXIT_FAIL,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    })
}

#[derive(Serialize)]
struct CoeffsOutput {
    family: CoefficientFamily,
    n: usize,
    bn2: f64,
    bn2_estimate: f64,
    window: (i64, i64),
    tail_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    regvar: Option<revlin::coefficients::RegVarDiagnostic>,
}

fn cmd_coeffs(common: &Common, n: usize, i_max: i64, eps: f64) -> Result<u8, CliError> {
    let cfg = load(common)?;
    let family = cfg
        .family
        .ok_or_else(|| CliError::Config("no family given (use --family or a config)".into()))?;
    if n == 0 {
        return Err(CliError::Config("--n must be positive".into()));
    }
    let profile = weight_profile(&family, n, eps).map_err(|e| CliError::Config(e.to_string()))?;
    let regvar = if n >= 16 {
        Some(regvar_diagnostic(&family, n, &[0.25, 0.5, 1.0])?)
    } else {
        None
    };
    let out = CoeffsOutput {
        family,
        n,
        bn2: profile.bn2,
        bn2_estimate: profile.bn2_estimate(),
        window: (profile.j_min, profile.j_max),
        tail_fraction: profile.tail_fraction,
        regvar,
    };
    let json = to_json(&out)?;
    emit(&json);
    let dir = out_dir(common, &cfg);
    std::fs::create_dir_all(&dir)?;
    write_coefficients_csv(&family, i_max, BufWriter::new(File::create(dir.join("coefficients.csv"))?))?;
    profile.write_csv(BufWriter::new(File::create(dir.join("weights.csv"))?))?;
    write_file(&dir, "coeffs.json", &json)?;
    Ok(EXIT_PASS)
}

fn cmd_check(common: &Common, strict: bool) -> Result<u8, CliError> {
    let cfg = load(common)?;
    if cfg.experiment.is_some() {
        cfg.experiment()?;
    }
    let out = oracle_output(&cfg)?;
    let failed = out.conditions.failed();
    emit(&to_json(&out.conditions)?);
    if failed.is_empty() {
        eprintln!("configuration valid");
        Ok(EXIT_PASS)
    } else {
        eprintln!("configuration valid; conditions not satisfied: {}", failed.join(", "));
        Ok(if strict { EXIT_FAIL } else { EXIT_PASS })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Oracle { common, strict } => cmd_oracle(common, *strict),
        Command::Run { common, seed, threads } => cmd_run(common, *seed, *threads),
        Command::Coeffs { common, n, i_max, eps } => cmd_coeffs(common, *n, *i_max, *eps),
        Command::Check { common, strict } => cmd_check(common, *strict),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}
