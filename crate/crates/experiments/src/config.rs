use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    BellSweep,
    Interference,
    Decoherence,
    Syncoherence,
    Precession,
    CartesianSpins,
    PseudoQuantumRegion,
    CorrelationTable,
    McSequences,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::BellSweep,
        Experiment::Interference,
        Experiment::Decoherence,
        Experiment::Syncoherence,
        Experiment::Precession,
        Experiment::CartesianSpins,
        Experiment::PseudoQuantumRegion,
        Experiment::CorrelationTable,
        Experiment::McSequences,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::BellSweep => "bell-sweep",
            Experiment::Interference => "interference",
            Experiment::Decoherence => "decoherence",
            Experiment::Syncoherence => "syncoherence",
            Experiment::Precession => "precession",
            Experiment::CartesianSpins => "cartesian-spins",
            Experiment::PseudoQuantumRegion => "pseudo-quantum-region",
            Experiment::CorrelationTable => "correlation-table",
            Experiment::McSequences => "mc-sequences",
        }
    }

    /// Accepted parameters and their defaults.
    pub fn defaults(self) -> Vec<(&'static str, Value)> {
        use serde_json::json;
        let tau = 2.0 * std::f64::consts::PI;
        let third = 1.0 / 3.0;
        match self {
            Experiment::BellSweep => vec![
                ("divisions", json!(8)),
                ("classical_resolution", json!(4)),
                ("kappa_max", json!(5.0)),
            ],
            Experiment::Interference => vec![
                ("delta", json!(1.0)),
                ("t_max", json!(tau)),
                ("points", json!(101)),
                ("dt", json!(1e-3)),
            ],
            Experiment::Decoherence => vec![
                ("rate", json!(-0.5)),
                ("rho", json!([0.6, 0.0, 0.8])),
                ("omega", json!(0.0)),
                ("t_max", json!(10.0)),
                ("dt", json!(1e-3)),
                ("output_every", json!(100)),
            ],
            Experiment::Syncoherence => vec![
                ("a", json!(3.0)),
                ("b", json!(2.0)),
                ("p0", json!(0.1)),
                ("d0", json!(0.0)),
                ("law", json!("linear")),
                ("t_max", json!(10.0)),
                ("dt", json!(1e-3)),
                ("output_every", json!(100)),
            ],
            Experiment::Precession => vec![
                ("h", json!([0.0, 0.0, 1.0])),
                ("rho", json!([1.0, 0.0, 0.0])),
                ("t_max", json!(10.0)),
                ("dt", json!(1e-3)),
                ("output_every", json!(100)),
            ],
            Experiment::CartesianSpins => vec![
                ("p", json!([third, 0.0, 0.0, 0.0, third, 0.0, 0.0, third])),
                ("p1", json!(0.25)),
                ("outcome", json!(1)),
                ("samples", json!(10_000)),
            ],
            Experiment::PseudoQuantumRegion => vec![
                ("ns", json!([4, 8, 16, 32, 64])),
                ("grid", json!(61)),
                ("samples", json!(100)),
            ],
            Experiment::CorrelationTable => {
                vec![("samples", json!(1000)), ("orth_states", json!(100))]
            }
            Experiment::McSequences => vec![
                ("n", json!(1_000_000)),
                ("theta", json!(std::f64::consts::FRAC_PI_2)),
                ("phi", json!(std::f64::consts::FRAC_PI_4)),
            ],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| ConfigError::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("no experiment given")]
    MissingExperiment,
    #[error("unknown parameter `{key}` for {experiment}")]
    UnknownParameter { experiment: Experiment, key: String },
    #[error("parameter `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("malformed override `{0}` (expected key=value)")]
    MalformedOverride(String),
    #[error("cannot read {path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("bad config file: {0}")]
    Parse(String),
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::UnknownExperiment(_) => "unknown_experiment",
            ConfigError::MissingExperiment => "missing_experiment",
            ConfigError::UnknownParameter { .. } => "unknown_parameter",
            ConfigError::InvalidValue { .. } => "invalid_value",
            ConfigError::MalformedOverride(_) => "malformed_override",
            ConfigError::Io { .. } => "io",
            ConfigError::Parse(_) => "parse",
        }
    }

    pub fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::InvalidValue {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

/// The on-disk form; every field may be overridden from the command line.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: Params,
    pub seed: u64,
    pub out: PathBuf,
}

pub const DEFAULT_SEED: u64 = 20240917;

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            params: Params::defaults(experiment),
            seed: DEFAULT_SEED,
            out: PathBuf::from("."),
        }
    }

    /// Merges a config file with command-line overrides, which win.
    pub fn resolve(
        file: ConfigFile,
        experiment: Option<&str>,
        seed: Option<u64>,
        out: Option<PathBuf>,
        overrides: &[String],
    ) -> Result<Self, ConfigError> {
        let name = experiment
            .map(str::to_string)
            .or(file.experiment)
            .ok_or(ConfigError::MissingExperiment)?;
        let mut config = ExperimentConfig::new(name.parse()?);
        for (k, v) in file.params {
            config.params.set(&k, v)?;
        }
        for o in overrides {
            let (k, v) = parse_override(o)?;
            config.params.set(k, v)?;
        }
        config.seed = seed.or(file.seed).unwrap_or(DEFAULT_SEED);
        config.out = out.or(file.out).unwrap_or_else(|| PathBuf::from("."));
        Ok(config)
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Result<Self, ConfigError> {
        self.params.set(key, value.into())?;
        Ok(self)
    }
}

/// `key=value`; the value is read as JSON when it parses, otherwise as a string.
pub fn parse_override(s: &str) -> Result<(&str, Value), ConfigError> {
    let (k, v) = s
        .split_once('=')
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| ConfigError::MalformedOverride(s.to_string()))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim(), value))
}

/// Parameters with defaults filled in; only keys known to the experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Params {
    #[serde(skip)]
    experiment: Experiment,
    #[serde(flatten)]
    values: BTreeMap<String, Value>,
}

impl Params {
    pub fn defaults(experiment: Experiment) -> Self {
        Params {
            experiment,
            values: experiment
                .defaults()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        }
    }

    pub fn set(&mut self, key: &str, value: Value) -> Result<(), ConfigError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(ConfigError::UnknownParameter {
                experiment: self.experiment,
                key: key.to_string(),
            }),
        }
    }

    fn get(&self, key: &str) -> &Value {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("{key} is not a parameter of {}", self.experiment))
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.get(key)
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| ConfigError::invalid(key, "expected a finite number"))
    }

    pub fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let x = self.f64(key)?;
        if x > 0.0 {
            Ok(x)
        } else {
            Err(ConfigError::invalid(key, format!("{x} is not positive")))
        }
    }

    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        self.get(key)
            .as_u64()
            .ok_or_else(|| ConfigError::invalid(key, "expected a nonnegative integer"))
    }

    /// An integer in `lo..=hi`.
    pub fn count(&self, key: &str, lo: u64, hi: u64) -> Result<usize, ConfigError> {
        let n = self.u64(key)?;
        if n < lo || n > hi {
            return Err(ConfigError::invalid(
                key,
                format!("{n} outside {lo}..={hi}"),
            ));
        }
        Ok(n as usize)
    }

    pub fn i64(&self, key: &str) -> Result<i64, ConfigError> {
        self.get(key)
            .as_i64()
            .ok_or_else(|| ConfigError::invalid(key, "expected an integer"))
    }

    pub fn str(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key)
            .as_str()
            .ok_or_else(|| ConfigError::invalid(key, "expected a string"))
    }

    pub fn f64s(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let bad = || ConfigError::invalid(key, "expected an array of finite numbers");
        self.get(key)
            .as_array()
            .ok_or_else(bad)?
            .iter()
            .map(|v| v.as_f64().filter(|x| x.is_finite()).ok_or_else(bad))
            .collect()
    }

    pub fn fixed<const N: usize>(&self, key: &str) -> Result<[f64; N], ConfigError> {
        let v = self.f64s(key)?;
        v.try_into().map_err(|v: Vec<f64>| {
            ConfigError::invalid(key, format!("expected {N} numbers, got {}", v.len()))
        })
    }

    pub fn counts(&self, key: &str) -> Result<Vec<u64>, ConfigError> {
        let bad = || ConfigError::invalid(key, "expected an array of nonnegative integers");
        self.get(key)
            .as_array()
            .ok_or_else(bad)?
            .iter()
            .map(|v| v.as_u64().ok_or_else(bad))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_as_json_or_string() {
        assert_eq!(parse_override("n=5").unwrap(), ("n", Value::from(5)));
        assert_eq!(
            parse_override("law=scaling").unwrap(),
            ("law", Value::from("scaling"))
        );
        assert_eq!(
            parse_override("rho=[1,0,0]").unwrap().1,
            serde_json::json!([1, 0, 0])
        );
        assert!(parse_override("=3").is_err());
        assert!(parse_override("nothing").is_err());
    }

    #[test]
    fn unknown_keys_and_names_are_rejected() {
        assert!(matches!(
            "bell".parse::<Experiment>(),
            Err(ConfigError::UnknownExperiment(_))
        ));
        let e = ExperimentConfig::new(Experiment::Precession).with("omega", 1.0);
        assert!(matches!(e, Err(ConfigError::UnknownParameter { .. })));
        for x in Experiment::ALL {
            assert_eq!(x.name().parse::<Experiment>().unwrap(), x);
        }
    }

    #[test]
    fn command_line_wins_over_file() {
        let file: ConfigFile = serde_json::from_str(
            r#"{"experiment": "interference", "seed": 3, "params": {"delta": 2.0, "points": 7}}"#,
        )
        .unwrap();
        let c =
            ExperimentConfig::resolve(file, None, Some(9), None, &["delta=0.5".into()]).unwrap();
        assert_eq!(c.experiment, Experiment::Interference);
        assert_eq!(c.seed, 9);
        assert_eq!(c.params.f64("delta").unwrap(), 0.5);
        assert_eq!(c.params.u64("points").unwrap(), 7);
    }
}
