//! Declarative model descriptions and the named example families.
//!
//! A [`ModelSpec`] is plain data: rate tables plus size parameters. The
//! constructors in this module produce the standard instances (Poisson,
//! ultra log-concave, segment walks, the two-sided Poisson chain on a
//! truncated integer line, linear zero-range, homogeneous exclusion) and
//! record the theorem-backed constant next to the spec when one is known.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Family-specific rate tables.
///
/// * `birth_death`: `birth[n] = a(n)`, `death[n] = b(n)` on `0..=n_max`.
///   `offset` shifts displayed labels, so a chain on `{-m..m}` is stored on
///   indices `0..=2m` with `offset = -m`.
/// * `zero_range`: `rates[x][n] = c_x(n)` for `n = 0..=particles`.
/// * `bernoulli_laplace`: one positive clock intensity per site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    BirthDeath {
        birth: Vec<f64>,
        death: Vec<f64>,
        #[serde(default)]
        offset: i64,
    },
    ZeroRange {
        particles: usize,
        rates: Vec<Vec<f64>>,
    },
    BernoulliLaplace {
        particles: usize,
        intensities: Vec<f64>,
    },
}

impl ModelSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            ModelSpec::BirthDeath { .. } => "birth_death",
            ModelSpec::ZeroRange { .. } => "zero_range",
            ModelSpec::BernoulliLaplace { .. } => "bernoulli_laplace",
        }
    }

    /// Number of sites `L` (1 for one-dimensional chains).
    pub fn sites(&self) -> usize {
        match self {
            ModelSpec::BirthDeath { .. } => 1,
            ModelSpec::ZeroRange { rates, .. } => rates.len(),
            ModelSpec::BernoulliLaplace { intensities, .. } => intensities.len(),
        }
    }

    /// Particle number `N`, or the truncation level for one-dimensional chains.
    pub fn size_parameter(&self) -> usize {
        match self {
            ModelSpec::BirthDeath { birth, .. } => birth.len().saturating_sub(1),
            ModelSpec::ZeroRange { particles, .. } => *particles,
            ModelSpec::BernoulliLaplace { particles, .. } => *particles,
        }
    }

    /// Multiply every rate by `s > 0`.
    pub fn scaled(&self, s: f64) -> ModelSpec {
        match self {
            ModelSpec::BirthDeath { birth, death, offset } => ModelSpec::BirthDeath {
                birth: birth.iter().map(|v| v * s).collect(),
                death: death.iter().map(|v| v * s).collect(),
                offset: *offset,
            },
            ModelSpec::ZeroRange { particles, rates } => ModelSpec::ZeroRange {
                particles: *particles,
                rates: rates
                    .iter()
                    .map(|row| row.iter().map(|v| v * s).collect())
                    .collect(),
            },
            ModelSpec::BernoulliLaplace { particles, intensities } => {
                ModelSpec::BernoulliLaplace {
                    particles: *particles,
                    intensities: intensities.iter().map(|v| v * s).collect(),
                }
            }
        }
    }

    /// Checks shapes, signs and boundary conventions.
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::BirthDeath { birth, death, .. } => {
                if birth.len() != death.len() {
                    return Err(Error::InvalidModel(format!(
                        "birth and death tables differ in length ({} vs {})",
                        birth.len(),
                        death.len()
                    )));
                }
                if birth.len() < 2 {
                    return Err(Error::InvalidModel(
                        "one-dimensional chain needs at least two states".into(),
                    ));
                }
                for (n, (&a, &b)) in birth.iter().zip(death).enumerate() {
                    check_rate(a, || format!("a({n})"))?;
                    check_rate(b, || format!("b({n})"))?;
                }
                let top = birth.len() - 1;
                if death[0] != 0.0 {
                    return Err(Error::Boundary(format!(
                        "death rate at the lowest state must be 0, got {}",
                        death[0]
                    )));
                }
                if birth[top] != 0.0 {
                    return Err(Error::Boundary(format!(
                        "birth rate at the truncation level must be 0, got {}",
                        birth[top]
                    )));
                }
                for n in 0..top {
                    if birth[n] <= 0.0 {
                        return Err(Error::InvalidModel(format!(
                            "a({n}) must be positive below the truncation level"
                        )));
                    }
                    if death[n + 1] <= 0.0 {
                        return Err(Error::InvalidModel(format!(
                            "b({}) must be positive above the lowest state",
                            n + 1
                        )));
                    }
                }
                Ok(())
            }
            ModelSpec::ZeroRange { particles, rates } => {
                if rates.is_empty() {
                    return Err(Error::InvalidModel("zero-range model needs L >= 1".into()));
                }
                for (x, row) in rates.iter().enumerate() {
                    if row.len() != particles + 1 {
                        return Err(Error::InvalidModel(format!(
                            "site {} rate table has {} entries, expected N + 1 = {}",
                            x + 1,
                            row.len(),
                            particles + 1
                        )));
                    }
                    for (n, &c) in row.iter().enumerate() {
                        check_rate(c, || format!("c_{}({n})", x + 1))?;
                        if n == 0 && c != 0.0 {
                            return Err(Error::InvalidModel(format!(
                                "c_{}(0) must be 0, got {c}",
                                x + 1
                            )));
                        }
                        if n > 0 && c <= 0.0 {
                            return Err(Error::InvalidModel(format!(
                                "c_{}({n}) must be positive",
                                x + 1
                            )));
                        }
                    }
                }
                Ok(())
            }
            ModelSpec::BernoulliLaplace { particles, intensities } => {
                if intensities.is_empty() {
                    return Err(Error::InvalidModel(
                        "Bernoulli-Laplace model needs L >= 1".into(),
                    ));
                }
                if *particles > intensities.len() {
                    return Err(Error::InvalidModel(format!(
                        "N = {particles} exceeds L = {}",
                        intensities.len()
                    )));
                }
                for (x, &l) in intensities.iter().enumerate() {
                    check_rate(l, || format!("lambda_{}", x + 1))?;
                    if l <= 0.0 {
                        return Err(Error::InvalidModel(format!(
                            "lambda_{} must be positive",
                            x + 1
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

fn check_rate(v: f64, loc: impl FnOnce() -> String) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidModel(format!("rate {} is not finite", loc())));
    }
    if v < 0.0 {
        return Err(Error::NegativeRate { location: loc(), value: v });
    }
    Ok(())
}

/// Named parameterized families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum RatePreset {
    Poisson { lambda: f64, n_max: usize },
    UltraLogConcave { gamma: Vec<f64> },
    SegmentUniform { n: usize },
    SegmentGaussian { n: usize },
    DoubleSidedPoisson { lambda: f64, n_max: usize },
    LinearZr { a: Vec<f64>, particles: usize },
    HomogeneousBl { lambda: f64, sites: usize, particles: usize },
    /// Symmetric chain on two states jumping at `rate` in each direction.
    TwoPoint { rate: f64 },
    /// `a(n) = 1`, `b(n) = n + amplitude * sin(n)`, truncated at `n_max`.
    SineDeath { amplitude: f64, n_max: usize },
}

impl RatePreset {
    pub fn build(&self) -> Result<Preset> {
        match self {
            RatePreset::Poisson { lambda, n_max } => preset_poisson(*lambda, *n_max),
            RatePreset::UltraLogConcave { gamma } => preset_ultra_log_concave(gamma),
            RatePreset::SegmentUniform { n } => preset_segment(SegmentKind::Uniform, *n),
            RatePreset::SegmentGaussian { n } => preset_segment(SegmentKind::Gaussian, *n),
            RatePreset::DoubleSidedPoisson { lambda, n_max } => {
                preset_double_sided_poisson(*lambda, *n_max)
            }
            RatePreset::LinearZr { a, particles } => preset_linear_zero_range(a, *particles),
            RatePreset::HomogeneousBl { lambda, sites, particles } => {
                preset_bernoulli_laplace(&vec![*lambda; *sites], *particles)
            }
            RatePreset::TwoPoint { rate } => preset_two_point(*rate),
            RatePreset::SineDeath { amplitude, n_max } => preset_sine_death(*amplitude, *n_max),
        }
    }
}

/// A spec together with the preset it came from and, when a theorem covers
/// it, the certified lower bound on the convexity constant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Preset {
    pub preset: Option<RatePreset>,
    pub spec: ModelSpec,
    pub certified: Option<f64>,
}

impl Preset {
    fn new(preset: RatePreset, spec: ModelSpec, certified: Option<f64>) -> Result<Self> {
        spec.validate()?;
        Ok(Preset { preset: Some(preset), spec, certified })
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidModel(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// `a(n) = lambda`, `b(n) = n` on `0..=n_max`, with `a(n_max) = 0`.
pub fn preset_poisson(lambda: f64, n_max: usize) -> Result<Preset> {
    positive("lambda", lambda)?;
    if n_max < 2 {
        return Err(Error::InvalidModel("Poisson preset needs n_max >= 2".into()));
    }
    let mut birth = vec![lambda; n_max + 1];
    birth[n_max] = 0.0;
    let death = (0..=n_max).map(|n| n as f64).collect();
    Preset::new(
        RatePreset::Poisson { lambda, n_max },
        ModelSpec::BirthDeath { birth, death, offset: 0 },
        Some(1.0),
    )
}

/// Chain with `a(n) = 1` whose stationary law has `n! pi(n)` proportional
/// to `gamma(n)`. Rejects `gamma` that is not log-concave.
pub fn preset_ultra_log_concave(gamma: &[f64]) -> Result<Preset> {
    if gamma.len() < 3 {
        return Err(Error::InvalidModel("gamma needs at least three entries".into()));
    }
    for (n, &g) in gamma.iter().enumerate() {
        positive(&format!("gamma({n})"), g)?;
    }
    for n in 1..gamma.len() - 1 {
        let lhs = gamma[n] * gamma[n];
        let rhs = gamma[n + 1] * gamma[n - 1];
        if lhs < rhs {
            return Err(Error::LogConcavity { index: n, lhs, rhs });
        }
    }
    let top = gamma.len() - 1;
    let mut birth = vec![1.0; top + 1];
    birth[top] = 0.0;
    let mut death = vec![0.0; top + 1];
    for n in 1..=top {
        death[n] = n as f64 * gamma[n - 1] / gamma[n];
    }
    let certified = death[1];
    Preset::new(
        RatePreset::UltraLogConcave { gamma: gamma.to_vec() },
        ModelSpec::BirthDeath { birth, death, offset: 0 },
        Some(certified),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Uniform,
    Gaussian,
}

/// Nearest-neighbour walk on `{0..n}` reversible w.r.t. the uniform law or
/// the law proportional to `exp(-k^2 / n^2)`.
pub fn preset_segment(kind: SegmentKind, n: usize) -> Result<Preset> {
    if n < 2 {
        return Err(Error::InvalidModel("segment preset needs n >= 2".into()));
    }
    let mut birth = vec![1.0; n + 1];
    birth[n] = 0.0;
    let nn = (n * n) as f64;
    let death = (0..=n)
        .map(|k| match (k, kind) {
            (0, _) => 0.0,
            (_, SegmentKind::Uniform) => 1.0,
            (_, SegmentKind::Gaussian) => ((2 * k - 1) as f64 / nn).exp(),
        })
        .collect();
    let preset = match kind {
        SegmentKind::Uniform => RatePreset::SegmentUniform { n },
        SegmentKind::Gaussian => RatePreset::SegmentGaussian { n },
    };
    Preset::new(preset, ModelSpec::BirthDeath { birth, death, offset: 0 }, None)
}

/// Two-sided Poisson law `lambda^|n| / |n|!` on `{-n_max..n_max}`.
pub fn preset_double_sided_poisson(lambda: f64, n_max: usize) -> Result<Preset> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidModel(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if n_max < 2 {
        return Err(Error::InvalidModel("n_max must be at least 2".into()));
    }
    let m = n_max as i64;
    let len = 2 * n_max + 1;
    let mut birth = vec![0.0; len];
    let mut death = vec![0.0; len];
    for (i, (a, b)) in birth.iter_mut().zip(death.iter_mut()).enumerate() {
        let n = i as i64 - m;
        *a = match n {
            _ if n == m => 0.0,
            _ if n >= 0 => lambda,
            _ => -n as f64,
        };
        *b = match n {
            _ if n == -m => 0.0,
            _ if n <= 0 => lambda,
            _ => n as f64,
        };
    }
    Preset::new(
        RatePreset::DoubleSidedPoisson { lambda, n_max },
        ModelSpec::BirthDeath { birth, death, offset: -m },
        Some(1.0 - lambda),
    )
}

/// Symmetric two-state chain.
pub fn preset_two_point(rate: f64) -> Result<Preset> {
    positive("rate", rate)?;
    Preset::new(
        RatePreset::TwoPoint { rate },
        ModelSpec::BirthDeath { birth: vec![rate, 0.0], death: vec![0.0, rate], offset: 0 },
        None,
    )
}

/// `a(n) = 1`, `b(n) = n + amplitude sin n`: Lipschitz rates that are only
/// monotone on a large scale when the amplitude is big.
pub fn preset_sine_death(amplitude: f64, n_max: usize) -> Result<Preset> {
    if n_max < 2 {
        return Err(Error::InvalidModel("n_max must be at least 2".into()));
    }
    let mut birth = vec![1.0; n_max + 1];
    birth[n_max] = 0.0;
    let death = (0..=n_max)
        .map(|n| {
            let x = n as f64;
            x + amplitude * x.sin()
        })
        .collect();
    Preset::new(
        RatePreset::SineDeath { amplitude, n_max },
        ModelSpec::BirthDeath { birth, death, offset: 0 },
        None,
    )
}

/// Zero-range process from explicit per-site tables `c_x(0..=N)`.
pub fn preset_zero_range(rates: Vec<Vec<f64>>) -> Result<ModelSpec> {
    let particles = rates.first().map_or(0, |r| r.len().saturating_sub(1));
    let spec = ModelSpec::ZeroRange { particles, rates };
    spec.validate()?;
    Ok(spec)
}

/// Independent walkers: `c_x(n) = a_x n`.
pub fn preset_linear_zero_range(a: &[f64], particles: usize) -> Result<Preset> {
    for (x, &v) in a.iter().enumerate() {
        positive(&format!("a_{}", x + 1), v)?;
    }
    let rates = a
        .iter()
        .map(|&ax| (0..=particles).map(|n| ax * n as f64).collect())
        .collect();
    let spec = ModelSpec::ZeroRange { particles, rates };
    let certified = condition_b(a).map(|(c, delta)| c - delta);
    Preset::new(RatePreset::LinearZr { a: a.to_vec(), particles }, spec, certified)
}

/// Exclusion dynamics on the complete graph with clock intensities `lambdas`.
pub fn preset_bernoulli_laplace(lambdas: &[f64], particles: usize) -> Result<Preset> {
    let spec = ModelSpec::BernoulliLaplace { particles, intensities: lambdas.to_vec() };
    spec.validate()?;
    let certified = condition_b(lambdas).map(|(c, delta)| c - delta);
    let preset = match lambdas.first() {
        Some(&l) if lambdas.iter().all(|&v| v == l) => {
            Some(RatePreset::HomogeneousBl { lambda: l, sites: lambdas.len(), particles })
        }
        _ => None,
    };
    Ok(Preset { preset, spec, certified })
}

/// Tightest `(c, delta)` with `c <= v <= c + delta` for every value, if
/// `delta < c`.
pub fn condition_b(values: &[f64]) -> Option<(f64, f64)> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return None;
    }
    let delta = hi - lo;
    (lo > 0.0 && delta < lo).then_some((lo, delta))
}
