//! Run configuration documents and compact model strings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::ConstantKind;
use crate::models::{
    preset_bernoulli_laplace, preset_double_sided_poisson, preset_linear_zero_range, preset_poisson,
    preset_segment, preset_sine_death, preset_two_point, preset_ultra_log_concave, ModelSpec, Preset,
    SegmentKind,
};

/// A model given either by preset name and parameters or by explicit rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Poisson { lambda: f64, n_max: usize },
    UltraLogConcave { gamma: Vec<f64> },
    SegmentUniform { n: usize },
    SegmentGaussian { n: usize },
    DoubleSidedPoisson { lambda: f64, n_max: usize },
    LinearZr { a: Vec<f64>, particles: usize },
    HomogeneousBl { lambda: f64, sites: usize, particles: usize },
    BernoulliLaplace { intensities: Vec<f64>, particles: usize },
    TwoPoint { rate: f64 },
    SineDeath { amplitude: f64, n_max: usize },
    BirthDeath {
        birth: Vec<f64>,
        death: Vec<f64>,
        #[serde(default)]
        offset: i64,
    },
    ZeroRange { rates: Vec<Vec<f64>> },
}

impl ModelConfig {
    pub fn build(&self) -> Result<Preset> {
        match self {
            ModelConfig::Poisson { lambda, n_max } => preset_poisson(*lambda, *n_max),
            ModelConfig::UltraLogConcave { gamma } => preset_ultra_log_concave(gamma),
            ModelConfig::SegmentUniform { n } => preset_segment(SegmentKind::Uniform, *n),
            ModelConfig::SegmentGaussian { n } => preset_segment(SegmentKind::Gaussian, *n),
            ModelConfig::DoubleSidedPoisson { lambda, n_max } => {
                preset_double_sided_poisson(*lambda, *n_max)
            }
            ModelConfig::LinearZr { a, particles } => preset_linear_zero_range(a, *particles),
            ModelConfig::HomogeneousBl { lambda, sites, particles } => {
                preset_bernoulli_laplace(&vec![*lambda; *sites], *particles)
            }
            ModelConfig::BernoulliLaplace { intensities, particles } => {
                preset_bernoulli_laplace(intensities, *particles)
            }
            ModelConfig::TwoPoint { rate } => preset_two_point(*rate),
            ModelConfig::SineDeath { amplitude, n_max } => preset_sine_death(*amplitude, *n_max),
            ModelConfig::BirthDeath { birth, death, offset } => explicit(ModelSpec::BirthDeath {
                birth: birth.clone(),
                death: death.clone(),
                offset: *offset,
            }),
            ModelConfig::ZeroRange { rates } => explicit(ModelSpec::ZeroRange {
                particles: rates.first().map_or(0, |r| r.len().saturating_sub(1)),
                rates: rates.clone(),
            }),
        }
    }

    /// Copy with one top-level parameter replaced.
    pub fn with_parameter(&self, name: &str, value: &toml::Value) -> Result<ModelConfig> {
        let mut table = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        let slot = table.get_mut(name).ok_or_else(|| {
            Error::Config(format!("model has no parameter `{name}` to sweep"))
        })?;
        *slot = match (&*slot, value) {
            (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
            _ => value.clone(),
        };
        table.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
    }
}

fn explicit(spec: ModelSpec) -> Result<Preset> {
    spec.validate()?;
    Ok(Preset { preset: None, spec, certified: None })
}

/// Parses `name:key=value,key=value`, with `/` separating array entries and
/// `;` separating rows of a table.
pub fn parse_model_string(s: &str) -> Result<ModelConfig> {
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut table = toml::Table::new();
    table.insert("preset".into(), toml::Value::String(name.trim().to_string()));
    for item in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("model parameter `{item}` is not key=value")))?;
        table.insert(key.trim().to_string(), parse_scalar_or_array(raw.trim())?);
    }
    table.try_into().map_err(|e: toml::de::Error| {
        Error::Config(format!("model `{s}`: {}", e.message()))
    })
}

fn parse_scalar(raw: &str) -> Result<toml::Value> {
    if let Ok(i) = raw.parse::<i64>() {
        return Ok(toml::Value::Integer(i));
    }
    raw.parse::<f64>()
        .map(toml::Value::Float)
        .map_err(|_| Error::Config(format!("`{raw}` is not a number")))
}

fn parse_scalar_or_array(raw: &str) -> Result<toml::Value> {
    if raw.contains(';') {
        let rows = raw
            .split(';')
            .map(|row| parse_array(row).map(toml::Value::Array))
            .collect::<Result<Vec<_>>>()?;
        return Ok(toml::Value::Array(rows));
    }
    if raw.contains('/') {
        return Ok(toml::Value::Array(parse_array(raw)?));
    }
    parse_scalar(raw)
}

fn parse_array(raw: &str) -> Result<Vec<toml::Value>> {
    raw.split('/')
        .map(|x| parse_scalar(x.trim()).map(as_float))
        .collect()
}

fn as_float(v: toml::Value) -> toml::Value {
    match v {
        toml::Value::Integer(i) => toml::Value::Float(i as f64),
        other => other,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// Initial function of an evolution task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialFunction {
    /// `exp(U)` with `U` uniform on `[-spread, spread]`, seeded.
    Random {
        #[serde(default = "default_spread")]
        spread: f64,
    },
    /// `1 + amplitude phi / max|phi|` with `phi` the gap eigenfunction.
    GapMode {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// `exp(slope * i)` by state index.
    Exponential { slope: f64 },
    Values { values: Vec<f64> },
}

fn default_spread() -> f64 {
    1.0
}

fn default_amplitude() -> f64 {
    0.5
}

/// Constant used by an evolution decay check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckConstant {
    Value(f64),
    Named(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayCheckConfig {
    pub kind: crate::evolution::DecayKind,
    /// A number, or `"certified"` for the model's certificate.
    pub constant: CheckConstant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    Certify,
    Estimate {
        kind: ConstantKind,
        #[serde(default)]
        restarts: Option<usize>,
    },
    Evolve {
        f0: InitialFunction,
        t_max: f64,
        #[serde(default = "default_points")]
        points: usize,
        #[serde(default)]
        check: Vec<DecayCheckConfig>,
    },
    Counterexample { c1: f64, epsilon: f64 },
    Smooth { n0: usize },
    Sweep {
        parameter: String,
        values: Vec<toml::Value>,
        kind: ConstantKind,
        #[serde(default)]
        restarts: Option<usize>,
    },
}

fn default_points() -> usize {
    101
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Certify => "certify",
            Task::Estimate { .. } => "estimate",
            Task::Evolve { .. } => "evolve",
            Task::Counterexample { .. } => "counterexample",
            Task::Smooth { .. } => "smooth",
            Task::Sweep { .. } => "sweep",
        }
    }

    fn needs_model(&self) -> bool {
        !matches!(self, Task::Counterexample { .. })
    }
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    pub tasks: Vec<Task>,
}

impl RunConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(describe(&e, text)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::Config("`tasks` must contain at least one task".into()));
        }
        if self.model.is_none() {
            if let Some(t) = self.tasks.iter().find(|t| t.needs_model()) {
                return Err(Error::Config(format!("task `{}` needs a [model] table", t.name())));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// `line N: message` for a TOML error.
fn describe(e: &toml::de::Error, text: &str) -> String {
    let msg = e.message().trim();
    let Some(span) = e.span() else {
        return msg.to_string();
    };
    let start = span.start.min(text.len());
    let mut line = text[..start].matches('\n').count() + 1;
    // errors inside a tagged table point at the table; find the key itself
    if let Some(key) = msg.strip_prefix("unknown field `").and_then(|r| r.split('`').next()) {
        let mut section = text[start..].lines().enumerate().take_while(|(k, l)| {
            *k == 0 || !l.trim_start().starts_with('[')
        });
        if let Some((k, _)) = section.find(|(_, l)| {
            l.trim_start().strip_prefix(key).is_some_and(|r| r.trim_start().starts_with('='))
        }) {
            line += k;
        }
    }
    format!("line {line}: {msg}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_strings() {
        assert_eq!(
            parse_model_string("poisson:lambda=1,n_max=60").unwrap(),
            ModelConfig::Poisson { lambda: 1.0, n_max: 60 }
        );
        assert_eq!(
            parse_model_string("linear_zr:a=1/1.2/1.4,particles=4").unwrap(),
            ModelConfig::LinearZr { a: vec![1.0, 1.2, 1.4], particles: 4 }
        );
        assert_eq!(
            parse_model_string("zero_range:rates=0/1/2;0/1/1.5").unwrap(),
            ModelConfig::ZeroRange { rates: vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.5]] }
        );
        let err = parse_model_string("poisson:lamda=1,n_max=60").unwrap_err().to_string();
        assert!(err.contains("lamda"), "{err}");
        assert!(parse_model_string("nonsense:x=1").is_err());
    }

    #[test]
    fn config_errors_name_key_and_line() {
        let text = "seed = 1\n[model]\npreset = \"poisson\"\nlambda = 1.0\nn_max = 10\ncolour = 3\n\n[[tasks]]\ntype = \"certify\"\n";
        let err = RunConfig::from_toml(text).unwrap_err().to_string();
        assert!(err.contains("colour") && err.contains("line 6"), "{err}");
        let text = "seed = 1\nbogus = 2\n[[tasks]]\ntype = \"counterexample\"\nc1 = 100.0\nepsilon = 0.01\n";
        let err = RunConfig::from_toml(text).unwrap_err().to_string();
        assert!(err.contains("bogus") && err.contains("line 2"), "{err}");
        let text = "[[tasks]]\ntype = \"certify\"\n";
        assert!(RunConfig::from_toml(text).is_err());
        let text = "tasks = []\n";
        assert!(RunConfig::from_toml(text).is_err());
    }

    #[test]
    fn sweep_parameter_substitution() {
        let m = ModelConfig::Poisson { lambda: 1.0, n_max: 10 };
        let m2 = m.with_parameter("lambda", &toml::Value::Integer(2)).unwrap();
        assert_eq!(m2, ModelConfig::Poisson { lambda: 2.0, n_max: 10 });
        let m3 = m.with_parameter("n_max", &toml::Value::Integer(20)).unwrap();
        assert_eq!(m3, ModelConfig::Poisson { lambda: 1.0, n_max: 20 });
        assert!(m.with_parameter("sites", &toml::Value::Integer(3)).is_err());
    }

    #[test]
    fn round_trip() {
        let text = "seed = 3\nformats = [\"json\"]\n[model]\npreset = \"two_point\"\nrate = 1.0\n\n[[tasks]]\ntype = \"estimate\"\nkind = \"mlsi\"\n\n[[tasks]]\ntype = \"evolve\"\nt_max = 2.0\nf0 = { type = \"random\" }\ncheck = [{ kind = \"kappa\", constant = \"certified\" }, { kind = \"mlsi\", constant = 0.5 }]\n";
        let cfg = RunConfig::from_toml(text).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
