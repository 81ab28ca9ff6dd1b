//! Run configuration documents and the `kind:key=value,...` shorthands.

use std::path::{Path, PathBuf};

use revlin::coefficients::CoefficientFamily;
use revlin::innovations::ChainSpec;
use revlin::mc::{ExperimentConfig, Mode, Tolerances, DEFAULT_EPS};
use serde::Deserialize;
use serde_json::{Map, Number, Value};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub chain: Option<ChainSpec>,
    pub family: Option<CoefficientFamily>,
    pub experiment: Option<ExperimentSection>,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub mode: Mode,
    pub n: usize,
    pub replicates: usize,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_report() -> String {
    "report.json".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default = "default_report")]
    pub report: String,
    /// File name for per-replicate samples; none means no dump.
    pub samples_csv: Option<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: None, report: default_report(), samples_csv: None }
    }
}

impl RunConfig {
    pub fn empty() -> Self {
        Self { chain: None, family: None, experiment: None, output: OutputSection::default() }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let chain = self.chain.clone().ok_or_else(|| CliError::Config("config has no chain".into()))?;
        let family = self.family.ok_or_else(|| CliError::Config("config has no family".into()))?;
        let e = self
            .experiment
            .as_ref()
            .ok_or_else(|| CliError::Config("config has no experiment section".into()))?;
        let cfg = ExperimentConfig {
            chain,
            family,
            mode: e.mode,
            n: e.n,
            replicates: e.replicates,
            t_grid: e.t_grid.clone(),
            eps: e.eps,
            seed: e.seed,
            tolerances: e.tolerances,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

fn scalar(v: &str) -> Result<Value, CliError> {
    if let Ok(i) = v.parse::<u64>() {
        return Ok(Value::Number(i.into()));
    }
    let x: f64 = v
        .parse()
        .map_err(|_| CliError::Config(format!("'{v}' is not a number")))?;
    Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| CliError::Config(format!("'{v}' is not finite")))
}

fn float(v: &str) -> Result<Value, CliError> {
    let x: f64 = v
        .parse()
        .map_err(|_| CliError::Config(format!("'{v}' is not a number")))?;
    Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| CliError::Config(format!("'{v}' is not finite")))
}

fn list(v: &str) -> Result<Value, CliError> {
    v.split(':').map(float).collect::<Result<Vec<_>, _>>().map(Value::Array)
}

fn split_shorthand(s: &str) -> Result<(String, Vec<(String, String)>), CliError> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut pairs = Vec::new();
    for item in rest.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got '{item}'")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok((kind.trim().to_lowercase(), pairs))
}

/// `mh:a=1,q=1`, `gaussian:r=0.5,c=1:0.5`, or
/// `group:m=6,nu=0:0.5:0:0:0:0.5,f1=0.5,f5=0.5` (`fi<j>` sets an imaginary part).
pub fn parse_chain(s: &str) -> Result<ChainSpec, CliError> {
    let (kind, pairs) = split_shorthand(s)?;
    let mut obj = Map::new();
    let kind = match kind.as_str() {
        "mh" | "metropolis" => "mh",
        "gaussian" | "hermite" => "gaussian",
        "group" | "cyclic" => "group",
        other => return Err(CliError::Config(format!("unknown chain kind '{other}'"))),
    };
    obj.insert("kind".into(), kind.into());
    let mut terms: Vec<(usize, f64, f64)> = Vec::new();
    for (k, v) in pairs {
        match (kind, k.as_str()) {
            ("gaussian", "c" | "hermite") => {
                obj.insert("hermite".into(), list(&v)?);
            }
            ("group", "nu" | "step_pmf") => {
                obj.insert("step_pmf".into(), list(&v)?);
            }
            ("group", "m") => {
                obj.insert("m".into(), scalar(&v)?);
            }
            ("group", key) if key.starts_with('f') => {
                let (imag, idx) = match key.strip_prefix("fi") {
                    Some(idx) => (true, idx),
                    None => (false, &key[1..]),
                };
                let idx: usize = idx
                    .parse()
                    .map_err(|_| CliError::Config(format!("bad Fourier key '{key}'")))?;
                let x: f64 = v
                    .parse()
                    .map_err(|_| CliError::Config(format!("'{v}' is not a number")))?;
                let slot = match terms.iter().position(|t| t.0 == idx) {
                    Some(p) => p,
                    None => {
                        terms.push((idx, 0.0, 0.0));
                        terms.len() - 1
                    }
                };
                if imag {
                    terms[slot].2 = x;
                } else {
                    terms[slot].1 = x;
                }
            }
            (_, key) => {
                obj.insert(key.into(), float(&v)?);
            }
        }
    }
    if kind == "group" {
        let fourier = terms
            .into_iter()
            .map(|(index, re, im)| serde_json::json!({ "index": index, "re": re, "im": im }))
            .collect();
        obj.insert("fourier".into(), Value::Array(fourier));
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::Config(format!("invalid chain '{s}': {e}")))
}

/// `fracint:d=0.25`, `powerlaw:alpha=0.7`, `geometric:ratio=0.5`, `delta`, ...
pub fn parse_family(s: &str) -> Result<CoefficientFamily, CliError> {
    let (kind, pairs) = split_shorthand(s)?;
    let variant = match kind.replace(['_', '-'], "").as_str() {
        "powerlaw" => "power_law",
        "fracint" | "farima" => "frac_int",
        "powerdiff" => "power_diff",
        "logpower" => "log_power",
        "geometric" => "geometric",
        "delta" => "delta",
        other => return Err(CliError::Config(format!("unknown coefficient family '{other}'"))),
    };
    let mut obj = Map::new();
    obj.insert("variant".into(), variant.into());
    for (k, v) in pairs {
        obj.insert(k, float(&v)?);
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::Config(format!("invalid family '{s}': {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_shorthands() {
        let c = parse_chain("mh:a=1,q=1").unwrap();
        assert_eq!(c.kind(), "mh");
        let g = parse_chain("gaussian:r=0.5,c=1:0.5").unwrap();
        match g {
            ChainSpec::Gaussian(s) => assert_eq!(s.hermite(), &[1.0, 0.5]),
            _ => panic!(),
        }
        let w = parse_chain("group:m=6,nu=0:0.5:0:0:0:0.5,f1=0.5,f5=0.5,f3=1").unwrap();
        match w {
            ChainSpec::Group(s) => {
                assert_eq!(s.m(), 6);
                assert_eq!(s.fourier()[3].re, 1.0);
            }
            _ => panic!(),
        }
        assert!(parse_chain("mh:a=1").is_err());
        assert!(parse_chain("mh:a=-1,q=1").is_err());
        assert!(parse_chain("bogus:a=1").is_err());
        assert!(parse_chain("mh:a=1,q=1,z=3").is_err());
    }

    #[test]
    fn family_shorthands() {
        assert_eq!(parse_family("fracint:d=0.25").unwrap(), CoefficientFamily::FracInt { d: 0.25 });
        assert_eq!(parse_family("delta").unwrap(), CoefficientFamily::Delta);
        assert_eq!(
            parse_family("geometric:ratio=0.5").unwrap(),
            CoefficientFamily::Geometric { ratio: 0.5, scale: 1.0 }
        );
        assert!(parse_family("fracint:d=0.7").is_err());
        assert!(parse_family("nope").is_err());
    }

    #[test]
    fn config_documents() {
        let cfg = RunConfig::parse(
            r#"{"chain": {"kind": "mh", "a": 1, "q": 1},
                "family": {"variant": "delta"},
                "experiment": {"mode": "clt", "n": 100, "replicates": 10},
                "output": {"samples_csv": "s.csv"}}"#,
        )
        .unwrap();
        let e = cfg.experiment().unwrap();
        assert_eq!(e.n, 100);
        assert_eq!(cfg.output.report, "report.json");
        assert!(RunConfig::parse(r#"{"chain": {"kind": "mh", "a": 1, "q": 1}, "extra": 1}"#).is_err());
        assert!(RunConfig::parse(
            r#"{"experiment": {"mode": "clt", "n": 100, "replicates": 10, "typo": 1}}"#
        )
        .is_err());
    }
}
