//! Task execution, report files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::{CheckConstant, DecayCheckConfig, Format, InitialFunction, ModelConfig, RunConfig, Task};
use crate::bochner::{canonical_r, certified_kappa, check_p1, check_p2, check_p3, Certificate};
use crate::chain::Chain;
use crate::error::{Error, Result};
use crate::estimation::{estimate_model, ConstantKind, EstimateOptions};
use crate::evolution::{
    counterexample_42, detect_nonconvexity, entropy_decay_check, evolve, evolve_exact, fit_decay_rate,
    uniform_grid, EXACT_LIMIT,
};
use crate::models::{ModelSpec, Preset};
use crate::perturbation::{smoothed_increment_identity, transfer_for_rates, verify_hypotheses};
use crate::spectral::spectral_decomposition_gap;

pub const OUTPUT_ENV: &str = "ENTROPY_DECAY_OUTPUT_DIR";
pub const DEFAULT_OUTPUT: &str = "entropy-decay-output";

/// A number together with what it is: exact, a certified lower bound, or a
/// numerical estimate.
#[derive(Clone, Debug, Serialize)]
pub struct Tagged {
    pub kind: &'static str,
    pub value: f64,
}

impl Tagged {
    fn exact(value: f64) -> Self {
        Tagged { kind: "exact", value }
    }

    fn lower(value: f64) -> Self {
        Tagged { kind: "certified_lower_bound", value }
    }

    fn numerical(value: f64) -> Self {
        Tagged { kind: "numerical_estimate", value }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn assertion(name: &str, passed: bool, detail: String) -> Assertion {
    Assertion { name: name.to_string(), passed, detail }
}

struct TaskOutput {
    report: Value,
    csv: Option<String>,
    assertions: Vec<Assertion>,
    summary: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskRecord {
    pub index: usize,
    #[serde(rename = "type")]
    pub task: &'static str,
    pub passed: bool,
    pub files: Vec<String>,
    pub summary: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub formats: Vec<Format>,
    pub tasks: Vec<TaskRecord>,
    pub exit_code: i32,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides the config and the environment when set.
    pub output: Option<PathBuf>,
    pub parallel_sweep: bool,
}

/// Output directory: explicit flag, then the environment, then the config,
/// then the default.
pub fn output_dir(cfg: &RunConfig, opts: &RunOptions) -> PathBuf {
    if let Some(p) = &opts.output {
        return p.clone();
    }
    if let Some(p) = std::env::var_os(OUTPUT_ENV).filter(|p| !p.is_empty()) {
        return PathBuf::from(p);
    }
    PathBuf::from(cfg.output.as_deref().unwrap_or(DEFAULT_OUTPUT))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs every task, writes reports and the manifest, and returns the manifest.
/// `config_text` is the document the hash is taken over.
pub fn run(cfg: &RunConfig, config_text: &str, opts: &RunOptions) -> Result<Manifest> {
    cfg.validate()?;
    let dir = output_dir(cfg, opts);
    fs::create_dir_all(&dir)?;
    let model = match &cfg.model {
        Some(m) => Some((m, m.build()?)),
        None => None,
    };
    let mut records = Vec::new();
    for (index, task) in cfg.tasks.iter().enumerate() {
        let seed = cfg.seed.wrapping_add(index as u64);
        let out = run_task(task, model.as_ref().map(|(m, p)| (*m, p)), seed, opts)?;
        let stem = format!("task-{index:02}-{}", task.name());
        let mut files = Vec::new();
        if cfg.formats.contains(&Format::Json) {
            let doc = json!({
                "task": task.name(),
                "index": index,
                "config": task,
                "report": out.report,
                "assertions": out.assertions,
            });
            files.push(write(&dir, &format!("{stem}.json"), &pretty(&doc)?)?);
        }
        if let (Some(csv), true) = (&out.csv, cfg.formats.contains(&Format::Csv)) {
            files.push(write(&dir, &format!("{stem}.csv"), csv)?);
        }
        let passed = out.assertions.iter().all(|a| a.passed);
        for a in out.assertions.iter().filter(|a| !a.passed) {
            eprintln!("task {index} ({}): assertion `{}` failed: {}", task.name(), a.name, a.detail);
        }
        println!("[{index}] {}: {}", task.name(), out.summary);
        records.push(TaskRecord { index, task: task.name(), passed, files, summary: out.summary });
    }
    let exit_code = if records.iter().all(|r| r.passed) { 0 } else { 2 };
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: sha256_hex(config_text.as_bytes()),
        seed: cfg.seed,
        formats: cfg.formats.clone(),
        tasks: records,
        exit_code,
    };
    write(&dir, "config.toml", config_text)?;
    write(&dir, "manifest.json", &pretty(&manifest)?)?;
    Ok(manifest)
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<String> {
    fs::write(dir.join(name), contents)?;
    Ok(name.to_string())
}

fn run_task(task: &Task, model: Option<(&ModelConfig, &Preset)>, seed: u64, opts: &RunOptions) -> Result<TaskOutput> {
    let need = || model.ok_or_else(|| Error::Config(format!("task `{}` needs a model", task.name())));
    match task {
        Task::Certify => certify(&need()?.1.spec),
        Task::Estimate { kind, restarts } => estimate(&need()?.1.spec, *kind, *restarts, seed, true),
        Task::Evolve { f0, t_max, points, check } => {
            evolve_task(&need()?.1.spec, f0, *t_max, *points, check, seed)
        }
        Task::Counterexample { c1, epsilon } => counterexample(*c1, *epsilon),
        Task::Smooth { n0 } => smooth(&need()?.1.spec, *n0),
        Task::Sweep { parameter, values, kind, restarts } => {
            sweep(need()?.0, parameter, values, *kind, *restarts, seed, opts.parallel_sweep)
        }
    }
}

fn certificate_tag(c: &Certificate) -> Option<Tagged> {
    c.kappa_opt().map(Tagged::lower)
}

/// Wraps every bare float below `v` as `{kind, value}`. Integers (counts and
/// indices) and already tagged numbers are left alone.
fn tag_floats(v: impl Serialize, kind: &'static str) -> Value {
    fn walk(v: Value, kind: &'static str) -> Value {
        match v {
            Value::Number(n) if n.is_f64() => json!(Tagged { kind, value: n.as_f64().unwrap_or(f64::NAN) }),
            Value::Array(items) => Value::Array(items.into_iter().map(|x| walk(x, kind)).collect()),
            Value::Object(map) if !(map.contains_key("kind") && map.contains_key("value")) => {
                Value::Object(map.into_iter().map(|(k, x)| (k, walk(x, kind))).collect())
            }
            other => other,
        }
    }
    walk(serde_json::to_value(v).unwrap_or(Value::Null), kind)
}

/// Certificate with its bound tagged as certified and its witness as exact.
fn certificate_json(c: &Certificate) -> Value {
    json!({
        "kind": c.kind,
        "kappa": Tagged::lower(c.kappa),
        "witness": tag_floats(&c.witness, "exact"),
    })
}

fn certify(spec: &ModelSpec) -> Result<TaskOutput> {
    let chain = Chain::new(spec)?;
    let cert = certified_kappa(spec)?;
    let gap = spectral_decomposition_gap(&chain.generator, &chain.measure)?.gap;
    let r = canonical_r(spec, &chain.generator)?;
    let p1 = check_p1(&r);
    let p2 = check_p2(&r, &chain.measure, &chain.generator)?;
    let p3 = check_p3(&r, &chain.generator)?;
    let witness_kappa = cert.kappa_from_witness();
    let assertions = vec![
        assertion("p1_symmetry", p1.passed, format!("max violation {:e}", p1.max_violation)),
        assertion("p2_invariance", p2.passed, format!("max relative violation {:e}", p2.max_violation)),
        assertion("p3_commutation", p3.passed, format!("{} failures", p3.max_violation)),
        assertion(
            "witness_reproduces_kappa",
            (witness_kappa - cert.kappa).abs() <= 1e-12 * cert.kappa.abs().max(1.0),
            format!("witness {witness_kappa}, certificate {}", cert.kappa),
        ),
        assertion(
            "kappa_at_most_twice_gap",
            cert.kappa <= 2.0 * gap * (1.0 + 1e-9),
            format!("kappa {}, gap {gap}", cert.kappa),
        ),
    ];
    let summary = match cert.kappa_opt() {
        Some(k) => format!("{:?} kappa >= {k} (certified), gap = {gap}", cert.kind),
        None => format!("no certificate, gap = {gap}"),
    };
    let report = json!({
        "family": spec.family_name(),
        "n_states": chain.n_states(),
        "certificate": certificate_json(&cert),
        "kappa": certificate_tag(&cert),
        "gap": Tagged::exact(gap),
        "r_function": tag_floats(json!({ "nnz": r.nnz(), "p1": p1, "p2": p2, "p3": p3 }), "exact"),
    });
    Ok(TaskOutput { report, csv: None, assertions, summary })
}

fn estimate_options(restarts: Option<usize>, seed: u64, parallel: bool) -> EstimateOptions {
    EstimateOptions { restarts, seed, parallel, ..Default::default() }
}

fn estimate(spec: &ModelSpec, kind: ConstantKind, restarts: Option<usize>, seed: u64, parallel: bool) -> Result<TaskOutput> {
    let chain = Chain::new(spec)?;
    let gap = spectral_decomposition_gap(&chain.generator, &chain.measure)?.gap;
    let mut rep = estimate_model(spec, kind, &estimate_options(restarts, seed, parallel))?;
    if kind == ConstantKind::Gap {
        rep.certified_lower = None;
    }
    let upper = kind.quadratic_limit_factor() * gap;
    let mut assertions = vec![assertion(
        "estimate_within_quadratic_limit",
        rep.value <= upper * (1.0 + 1e-9),
        format!("estimate {}, quadratic limit {upper}", rep.value),
    )];
    if let Some(low) = rep.certified_lower {
        assertions.push(assertion(
            "estimate_above_certified_bound",
            rep.value >= low * (1.0 - 1e-6),
            format!("estimate {}, certified {low}", rep.value),
        ));
    }
    let summary = format!("{} = {} ({})", kind.name(), rep.value, rep.report_kind());
    let report = json!({
        "family": spec.family_name(),
        "n_states": chain.n_states(),
        "constant": kind,
        "estimate": Tagged { kind: rep.report_kind(), value: rep.value },
        "certified_lower": rep.certified_lower.map(Tagged::lower),
        "gap": Tagged::exact(gap),
        "diagnostics": tag_floats(&rep.diagnostics, rep.report_kind()),
    });
    Ok(TaskOutput { report, csv: None, assertions, summary })
}

fn initial_function(f0: &InitialFunction, chain: &Chain, seed: u64) -> Result<Vec<f64>> {
    let n = chain.n_states();
    let f = match f0 {
        InitialFunction::Random { spread } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.random_range(-spread.abs()..=spread.abs()).exp()).collect()
        }
        InitialFunction::GapMode { amplitude } => {
            if !(amplitude.abs() < 1.0) {
                return Err(Error::Config(format!("gap_mode amplitude must lie in (-1, 1), got {amplitude}")));
            }
            let phi = spectral_decomposition_gap(&chain.generator, &chain.measure)?.eigenfunction;
            let m = phi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            phi.iter().map(|x| 1.0 + amplitude * x / m).collect()
        }
        InitialFunction::Exponential { slope } => (0..n).map(|i| (slope * i as f64).exp()).collect(),
        InitialFunction::Values { values } => {
            if values.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: values.len() });
            }
            values.clone()
        }
    };
    if let Some((i, v)) = f.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::NonPositive { index: i, value: *v });
    }
    Ok(f)
}

fn check_constant(c: &DecayCheckConfig, spec: &ModelSpec) -> Result<f64> {
    match &c.constant {
        CheckConstant::Value(v) => Ok(*v),
        CheckConstant::Named(s) if s == "certified" => certified_kappa(spec)?
            .kappa_opt()
            .ok_or_else(|| Error::Config("check constant `certified` but the model has no certificate".into())),
        CheckConstant::Named(s) => {
            Err(Error::Config(format!("unknown check constant `{s}` (a number or \"certified\")")))
        }
    }
}

fn evolve_task(
    spec: &ModelSpec,
    f0: &InitialFunction,
    t_max: f64,
    points: usize,
    checks: &[DecayCheckConfig],
    seed: u64,
) -> Result<TaskOutput> {
    if !(t_max > 0.0 && t_max.is_finite()) || points < 2 {
        return Err(Error::Config(format!("need t_max > 0 and points >= 2, got {t_max} and {points}")));
    }
    let chain = Chain::new(spec)?;
    let f = initial_function(f0, &chain, seed)?;
    let times = uniform_grid(t_max, points);
    let traj = evolve(&chain.generator, &chain.measure, &f, &times)?;
    let exact_mismatch = if chain.n_states() <= EXACT_LIMIT {
        let ex = evolve_exact(&chain.generator, &chain.measure, &f, &times)?;
        let scale = traj.ent[0].max(f64::MIN_POSITIVE);
        Some(traj.ent.iter().zip(&ex.ent).map(|(a, b)| (a - b).abs() / scale).fold(0.0, f64::max))
    } else {
        None
    };
    let m0 = traj.mass[0];
    let mass_drift = traj.mass.iter().map(|m| (m - m0).abs() / m0).fold(0.0, f64::max);
    let mut assertions = vec![assertion(
        "mass_conserved",
        mass_drift <= 1e-8,
        format!("relative drift {mass_drift:e}"),
    )];
    let mut results = Vec::new();
    for c in checks {
        let constant = check_constant(c, spec)?;
        let r = entropy_decay_check(&traj, constant, c.kind)?;
        assertions.push(assertion(
            &format!("{:?}_decay_at_{constant}", c.kind).to_lowercase(),
            r.passed,
            format!("worst ratio {}, first failure {:?}", r.worst_ratio, r.first_failure),
        ));
        results.push(r);
    }
    let rate = fit_decay_rate(&traj).ok();
    let summary = format!(
        "Ent {:e} -> {:e} over t = {t_max}, fitted rate {}",
        traj.ent[0],
        traj.ent[traj.len() - 1],
        rate.map_or("n/a".to_string(), |r| r.to_string())
    );
    let report = json!({
        "family": spec.family_name(),
        "n_states": chain.n_states(),
        "points": traj.len(),
        "initial_entropy": Tagged::exact(traj.ent[0]),
        "final_entropy": Tagged::numerical(traj.ent[traj.len() - 1]),
        "fitted_rate": rate.map(Tagged::numerical),
        "nonconvex_at": detect_nonconvexity(&traj).map(Tagged::numerical),
        "derivative_mismatch": Tagged::numerical(traj.derivative_mismatch()),
        "exact_mismatch": exact_mismatch.map(Tagged::numerical),
        "mass_drift": Tagged::numerical(mass_drift),
        "checks": tag_floats(&results, "numerical_estimate"),
    });
    Ok(TaskOutput { report, csv: Some(traj.to_csv()), assertions, summary })
}

fn counterexample(c1: f64, epsilon: f64) -> Result<TaskOutput> {
    let ce = counterexample_42(c1, epsilon)?;
    let assertions = vec![assertion(
        "closed_form_matches_direct",
        ce.relative_mismatch <= 1e-10,
        format!("relative mismatch {:e}", ce.relative_mismatch),
    )];
    let sign = if ce.total < 0.0 { "negative" } else { "nonnegative" };
    let summary = format!("second derivative at t = 0 is {} ({sign})", ce.total);
    let report = json!({
        "counterexample": tag_floats(&ce, "exact"),
        "second_derivative": Tagged::exact(ce.total),
        "convexity_fails": ce.total < 0.0,
    });
    Ok(TaskOutput { report, csv: None, assertions, summary })
}

fn smooth(spec: &ModelSpec, n0: usize) -> Result<TaskOutput> {
    let ModelSpec::BirthDeath { birth, death, .. } = spec else {
        return Err(Error::WrongFamily { expected: "birth_death", got: spec.family_name() });
    };
    let top = birth.len() - 1;
    if birth[..top].iter().any(|&a| a != 1.0) {
        return Err(Error::InvalidModel("smoothing compares chains with unit birth rates".into()));
    }
    let t = transfer_for_rates(death, n0)?;
    let s = &t.smoothed;
    let identity_err = (n0..=top - n0)
        .map(|k| {
            let lhs = s.b_tilde[k + 1] - s.b_tilde[k];
            (lhs - smoothed_increment_identity(death, n0, k)).abs() / lhs.abs().max(1.0)
        })
        .fold(0.0, f64::max);
    let hyp = verify_hypotheses(death, f64::INFINITY, f64::NEG_INFINITY, n0);
    let assertions = vec![
        assertion("smoothed_rates_increasing", s.delta1 > 0.0, format!("delta1 {}", s.delta1)),
        assertion("increment_identity", identity_err <= 1e-12, format!("max relative error {identity_err:e}")),
    ];
    let summary = format!(
        "delta1 = {}, pi/pi_tilde in [{}, {}], alpha >= {}",
        s.delta1,
        s.ratio_bounds.0,
        s.ratio_bounds.1,
        t.alpha.map_or("n/a".to_string(), |a| a.to_string())
    );
    let mut csv = String::from("n,b,b_tilde\n");
    for (k, (b, bt)) in death.iter().zip(&s.b_tilde).enumerate() {
        csv.push_str(&format!("{k},{b:.16e},{bt:.16e}\n"));
    }
    let report = json!({
        "n0": n0,
        "sup_increment": Tagged::exact(hyp.sup_increment),
        "inf_window_gain": Tagged::exact(hyp.inf_window_gain),
        "delta1": Tagged::exact(s.delta1),
        "delta1_full": Tagged::exact(s.delta1_full),
        "tail_start": s.tail_start,
        "ratio_bounds": tag_floats(s.ratio_bounds, "exact"),
        "certificate": certificate_json(&t.certificate),
        "alpha": t.alpha.map(Tagged::lower),
    });
    Ok(TaskOutput { report, csv: Some(csv), assertions, summary })
}

struct SweepPoint {
    value: toml::Value,
    n_states: usize,
    gap: f64,
    certified: Option<f64>,
    estimate: f64,
    estimate_kind: &'static str,
}

fn sweep(
    model: &ModelConfig,
    parameter: &str,
    values: &[toml::Value],
    kind: ConstantKind,
    restarts: Option<usize>,
    seed: u64,
    parallel: bool,
) -> Result<TaskOutput> {
    let models = values
        .iter()
        .map(|v| model.with_parameter(parameter, v))
        .collect::<Result<Vec<_>>>()?;
    let point = |(k, m): (usize, &ModelConfig)| -> Result<SweepPoint> {
        let spec = m.build()?.spec;
        let chain = Chain::new(&spec)?;
        let gap = spectral_decomposition_gap(&chain.generator, &chain.measure)?.gap;
        let opts = estimate_options(restarts, seed.wrapping_mul(1_000_003).wrapping_add(k as u64), !parallel);
        let rep = estimate_model(&spec, kind, &opts)?;
        Ok(SweepPoint {
            value: values[k].clone(),
            n_states: chain.n_states(),
            gap,
            certified: certified_kappa(&spec)?.kappa_opt(),
            estimate: rep.value,
            estimate_kind: rep.report_kind(),
        })
    };
    let points: Vec<SweepPoint> = if parallel {
        models.par_iter().enumerate().map(point).collect::<Result<_>>()?
    } else {
        models.iter().enumerate().map(point).collect::<Result<_>>()?
    };
    let mut assertions = Vec::new();
    let mut csv = format!("{parameter},n_states,gap,certified_kappa,{}\n", kind.name());
    for p in &points {
        if let Some(c) = p.certified.filter(|_| kind != ConstantKind::Gap) {
            assertions.push(assertion(
                &format!("estimate_above_certified_bound[{}]", p.value),
                p.estimate >= c * (1.0 - 1e-6),
                format!("estimate {}, certified {c}", p.estimate),
            ));
        }
        csv.push_str(&format!(
            "{},{},{:.16e},{},{:.16e}\n",
            p.value,
            p.n_states,
            p.gap,
            p.certified.map_or(String::new(), |c| format!("{c:.16e}")),
            p.estimate
        ));
    }
    let summary = format!("{} points over `{parameter}`", points.len());
    let points: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "parameter_value": tag_floats(&p.value, "exact"),
                "n_states": p.n_states,
                "gap": Tagged::exact(p.gap),
                "certified": p.certified.map(Tagged::lower),
                "estimate": Tagged { kind: p.estimate_kind, value: p.estimate },
            })
        })
        .collect();
    let report = json!({ "parameter": parameter, "constant": kind, "points": points });
    Ok(TaskOutput { report, csv: Some(csv), assertions, summary })
}
