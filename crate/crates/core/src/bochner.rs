//! R-functions, the structural checks on them, the Bochner identity, the
//! Γ-form lower bound and closed-form certified convexity constants.

use serde::Serialize;

use crate::chain::{check_len, Generator, Measure, MOVE_DOWN, MOVE_UP};
use crate::error::{Error, Result};
use crate::functionals::{require_min_positive, second_derivative_form};
use crate::models::{condition_b, ModelSpec};

/// Sparse nonnegative table `R(eta, gamma, delta)`, stored row by state and
/// sorted by `(gamma, delta)` within each row.
#[derive(Clone, Debug, PartialEq)]
pub struct RFunction {
    row_ptr: Vec<usize>,
    gammas: Vec<u32>,
    deltas: Vec<u32>,
    values: Vec<f64>,
}

/// One `(state, gamma, delta)` index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Triple {
    pub state: usize,
    pub gamma: usize,
    pub delta: usize,
}

impl RFunction {
    /// Builds a table from explicit entries. Zero entries are dropped;
    /// negative, non-finite or duplicated entries are rejected.
    pub fn from_triples(n_states: usize, mut triples: Vec<(Triple, f64)>) -> Result<Self> {
        triples.sort_by_key(|t| t.0);
        let mut r = RFunction {
            row_ptr: vec![0; n_states + 1],
            gammas: Vec::with_capacity(triples.len()),
            deltas: Vec::with_capacity(triples.len()),
            values: Vec::with_capacity(triples.len()),
        };
        let mut prev: Option<Triple> = None;
        for (t, v) in triples {
            if t.state >= n_states {
                return Err(Error::DimensionMismatch { expected: n_states, got: t.state + 1 });
            }
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidModel(format!("R{:?} = {v} is not a nonnegative number", t)));
            }
            if prev == Some(t) {
                return Err(Error::InvalidModel(format!("duplicate R entry {t:?}")));
            }
            prev = Some(t);
            if v == 0.0 {
                continue;
            }
            r.row_ptr[t.state + 1] += 1;
            r.gammas.push(t.gamma as u32);
            r.deltas.push(t.delta as u32);
            r.values.push(v);
        }
        for i in 0..n_states {
            r.row_ptr[i + 1] += r.row_ptr[i];
        }
        Ok(r)
    }

    fn from_rows(n_states: usize, mut row: impl FnMut(usize, &mut Vec<(u32, u32, f64)>)) -> Self {
        let mut r = RFunction { row_ptr: vec![0], gammas: vec![], deltas: vec![], values: vec![] };
        let mut buf = Vec::new();
        for i in 0..n_states {
            buf.clear();
            row(i, &mut buf);
            buf.sort_by_key(|&(g, d, _)| (g, d));
            for &(g, d, v) in &buf {
                if v > 0.0 {
                    r.gammas.push(g);
                    r.deltas.push(d);
                    r.values.push(v);
                }
            }
            r.row_ptr.push(r.values.len());
        }
        r
    }

    pub fn n_states(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Number of stored (positive) entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(gamma, delta, value)` for every stored entry at `state`.
    pub fn row(&self, state: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (self.row_ptr[state]..self.row_ptr[state + 1])
            .map(move |k| (self.gammas[k] as usize, self.deltas[k] as usize, self.values[k]))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Triple, f64)> + '_ {
        (0..self.n_states()).flat_map(move |state| {
            self.row(state).map(move |(gamma, delta, v)| (Triple { state, gamma, delta }, v))
        })
    }

    /// `R(state, gamma, delta)`, zero when absent.
    pub fn get(&self, state: usize, gamma: usize, delta: usize) -> f64 {
        let lo = self.row_ptr[state];
        let hi = self.row_ptr[state + 1];
        let key = (gamma as u32, delta as u32);
        let mut a = lo;
        let mut b = hi;
        while a < b {
            let m = (a + b) / 2;
            match (self.gammas[m], self.deltas[m]).cmp(&key) {
                std::cmp::Ordering::Less => a = m + 1,
                std::cmp::Ordering::Greater => b = m,
                std::cmp::Ordering::Equal => return self.values[m],
            }
        }
        0.0
    }

    /// Copy with one entry replaced (or inserted); used for negative controls.
    pub fn with_entry(&self, t: Triple, value: f64) -> Result<Self> {
        let mut triples: Vec<(Triple, f64)> = self.iter().filter(|(k, _)| *k != t).collect();
        triples.push((t, value));
        RFunction::from_triples(self.n_states(), triples)
    }
}

fn wrong_family(expected: &'static str, spec: &ModelSpec) -> Error {
    Error::WrongFamily { expected, got: spec.family_name() }
}

/// `R(n,+,+) = a(n)a(n+1)`, `R(n,-,-) = b(n)b(n-1)`, `R(n,+,-) = R(n,-,+) = a(n)b(n)`.
pub fn r_birth_death(spec: &ModelSpec) -> Result<RFunction> {
    let ModelSpec::BirthDeath { birth: a, death: b, .. } = spec else {
        return Err(wrong_family("birth_death", spec));
    };
    spec.validate()?;
    let top = a.len() - 1;
    let (up, down) = (MOVE_UP as u32, MOVE_DOWN as u32);
    Ok(RFunction::from_rows(a.len(), |n, row| {
        let a_next = if n < top { a[n + 1] } else { 0.0 };
        let b_prev = if n > 0 { b[n - 1] } else { 0.0 };
        row.push((up, up, a[n] * a_next));
        row.push((down, down, b[n] * b_prev));
        row.push((up, down, a[n] * b[n]));
        row.push((down, up, a[n] * b[n]));
    }))
}

fn hop_generator_check(spec: &ModelSpec, gen: &Generator) -> Result<()> {
    if gen.space().sites() != spec.sites() {
        return Err(Error::InvalidModel("generator does not belong to this model".into()));
    }
    Ok(())
}

/// `R(eta, xy, uv) = L^-2 c_x(eta_x) c_u(eta_u)` for `x != u`, and
/// `L^-2 c_x(eta_x) c_x(eta_x - 1)` for `x = u`.
pub fn r_zero_range(spec: &ModelSpec, gen: &Generator) -> Result<RFunction> {
    let ModelSpec::ZeroRange { rates, .. } = spec else {
        return Err(wrong_family("zero_range", spec));
    };
    hop_generator_check(spec, gen)?;
    let l2 = (rates.len() * rates.len()) as f64;
    let moves = gen.moves();
    let space = gen.space();
    Ok(RFunction::from_rows(gen.n_states(), |i, row| {
        let eta = space.config(i);
        let acting: Vec<usize> = gen.transitions(i).map(|(mv, _, _)| mv).collect();
        for &g in &acting {
            let (x, _) = moves.hop_sites(g).expect("hop move");
            let nx = eta[x] as usize;
            for &d in &acting {
                let (u, _) = moves.hop_sites(d).expect("hop move");
                let v = if x != u {
                    rates[x][nx] * rates[u][eta[u] as usize]
                } else {
                    rates[x][nx] * rates[x][nx - 1]
                };
                row.push((g as u32, d as u32, v / l2));
            }
        }
    }))
}

/// `R(eta, xy, zu) = L^-2 lambda_x lambda_z eta_x (1 - eta_y) eta_z (1 - eta_u)`
/// when `x, y, z, u` are distinct, zero otherwise.
pub fn r_bernoulli_laplace(spec: &ModelSpec, gen: &Generator) -> Result<RFunction> {
    let ModelSpec::BernoulliLaplace { intensities, .. } = spec else {
        return Err(wrong_family("bernoulli_laplace", spec));
    };
    hop_generator_check(spec, gen)?;
    let l2 = (intensities.len() * intensities.len()) as f64;
    let moves = gen.moves();
    Ok(RFunction::from_rows(gen.n_states(), |i, row| {
        // a move acts exactly when eta_x (1 - eta_y) = 1
        let acting: Vec<usize> = gen.transitions(i).map(|(mv, _, _)| mv).collect();
        for &g in &acting {
            let (x, y) = moves.hop_sites(g).expect("hop move");
            for &d in &acting {
                let (z, u) = moves.hop_sites(d).expect("hop move");
                if x != z && x != u && y != z && y != u {
                    row.push((g as u32, d as u32, intensities[x] * intensities[z] / l2));
                }
            }
        }
    }))
}

/// The canonical R-function of the model's family.
pub fn canonical_r(spec: &ModelSpec, gen: &Generator) -> Result<RFunction> {
    match spec {
        ModelSpec::BirthDeath { .. } => r_birth_death(spec),
        ModelSpec::ZeroRange { .. } => r_zero_range(spec, gen),
        ModelSpec::BernoulliLaplace { .. } => r_bernoulli_laplace(spec, gen),
    }
}

/// Outcome of a structural check on an R-function.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    /// Number of entries or basis elements examined.
    pub checked: usize,
    /// Largest violation (absolute for P1, relative for P2, count for P3).
    pub max_violation: f64,
    pub offending: Option<Triple>,
}

/// Symmetry `R(eta, gamma, delta) = R(eta, delta, gamma)`, exactly.
pub fn check_p1(r: &RFunction) -> CheckReport {
    let mut worst = 0.0;
    let mut offending = None;
    let mut checked = 0;
    for (t, v) in r.iter() {
        checked += 1;
        let diff = (v - r.get(t.state, t.delta, t.gamma)).abs();
        if diff > worst {
            worst = diff;
            offending = Some(t);
        }
    }
    CheckReport { passed: offending.is_none(), checked, max_violation: worst, offending }
}

/// Commutation `gamma delta (eta) = delta gamma (eta)` wherever `R > 0`.
pub fn check_p3(r: &RFunction, gen: &Generator) -> Result<CheckReport> {
    check_len(gen.n_states(), r.n_states())?;
    let mut failures = 0usize;
    let mut offending = None;
    let mut checked = 0;
    for (t, _) in r.iter() {
        checked += 1;
        let gd = gen.target(gen.target(t.state, t.delta), t.gamma);
        let dg = gen.target(gen.target(t.state, t.gamma), t.delta);
        if gd != dg {
            failures += 1;
            offending.get_or_insert(t);
        }
    }
    Ok(CheckReport { passed: failures == 0, checked, max_violation: failures as f64, offending })
}

/// Relative tolerance used by [`check_p2`].
pub const P2_TOLERANCE: f64 = 1e-12;

/// `pi[sum R psi(eta, gamma, delta)] = pi[sum R psi(gamma eta, gamma^-1, delta)]`
/// for every indicator `psi` of a single triple.
///
/// Each side is a measure on triples; the identity for all `psi` is
/// equality of the two measures, which is checked bucket by bucket.
pub fn check_p2(r: &RFunction, pi: &Measure, gen: &Generator) -> Result<CheckReport> {
    check_len(gen.n_states(), r.n_states())?;
    check_len(gen.n_states(), pi.len())?;
    let w = pi.weights();
    let lhs: Vec<(Triple, f64)> = r.iter().map(|(t, v)| (t, w[t.state] * v)).collect();
    let mut rhs: Vec<(Triple, f64)> = r
        .iter()
        .map(|(t, v)| {
            let moved = Triple {
                state: gen.target(t.state, t.gamma),
                gamma: gen.moves().inverse(t.gamma),
                delta: t.delta,
            };
            (moved, w[t.state] * v)
        })
        .collect();
    rhs.sort_by_key(|e| e.0);
    // images are distinct because moves are invertible where R > 0, but merge anyway
    let mut merged: Vec<(Triple, f64)> = Vec::with_capacity(rhs.len());
    for (t, v) in rhs {
        match merged.last_mut() {
            Some(last) if last.0 == t => last.1 += v,
            _ => merged.push((t, v)),
        }
    }
    let scale = lhs.iter().chain(&merged).map(|e| e.1).fold(0.0, f64::max);
    let mut worst = 0.0;
    let mut offending = None;
    let mut checked = 0;
    let (mut i, mut j) = (0, 0);
    while i < lhs.len() || j < merged.len() {
        let (t, diff) = match (lhs.get(i), merged.get(j)) {
            (Some(a), Some(b)) if a.0 == b.0 => {
                i += 1;
                j += 1;
                (a.0, (a.1 - b.1).abs())
            }
            (Some(a), Some(b)) if a.0 < b.0 => {
                i += 1;
                (a.0, a.1)
            }
            (Some(a), None) => {
                i += 1;
                (a.0, a.1)
            }
            (_, Some(b)) => {
                j += 1;
                (b.0, b.1)
            }
            (None, None) => unreachable!(),
        };
        checked += 1;
        let rel = if scale > 0.0 { diff / scale } else { 0.0 };
        if rel > worst {
            worst = rel;
            offending = Some(t);
        }
    }
    Ok(CheckReport { passed: worst <= P2_TOLERANCE, checked, max_violation: worst, offending })
}

fn second_difference(gen: &Generator, f: &[f64], i: usize, g: usize, d: usize) -> f64 {
    let gi = gen.target(i, g);
    f[gen.target(gi, d)] - f[gi] - f[gen.target(i, d)] + f[i]
}

/// Both sides of the Bochner identity and the size of their summands.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BochnerSides {
    /// `pi[sum R grad_g f grad_d g]`
    pub first_order: f64,
    /// `1/4 pi[sum R grad_g grad_d f grad_g grad_d g]`
    pub second_order: f64,
    /// Largest sum of absolute summands on either side.
    pub scale: f64,
}

impl BochnerSides {
    pub fn residual(&self) -> f64 {
        self.first_order - self.second_order
    }

    pub fn relative_residual(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.residual().abs() / self.scale
        }
    }
}

pub fn bochner_sides(
    r: &RFunction,
    gen: &Generator,
    pi: &Measure,
    f: &[f64],
    g: &[f64],
) -> Result<BochnerSides> {
    let n = gen.n_states();
    check_len(n, r.n_states())?;
    check_len(n, pi.len())?;
    check_len(n, f.len())?;
    check_len(n, g.len())?;
    let w = pi.weights();
    let (mut first, mut second, mut abs1, mut abs2) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for (ga, de, v) in r.row(i) {
            let t1 = w[i] * v * (f[gen.target(i, ga)] - f[i]) * (g[gen.target(i, de)] - g[i]);
            let t2 = 0.25
                * w[i]
                * v
                * second_difference(gen, f, i, ga, de)
                * second_difference(gen, g, i, ga, de);
            first += t1;
            second += t2;
            abs1 += t1.abs();
            abs2 += t2.abs();
        }
    }
    Ok(BochnerSides { first_order: first, second_order: second, scale: abs1.max(abs2) })
}

/// `pi[sum R grad_g f grad_d g] - 1/4 pi[sum R grad_g grad_d f grad_g grad_d g]`.
pub fn bochner_residual(
    r: &RFunction,
    gen: &Generator,
    pi: &Measure,
    f: &[f64],
    g: &[f64],
) -> Result<f64> {
    Ok(bochner_sides(r, gen, pi, f, g)?.residual())
}

/// `pi[sum Gamma (grad_g f grad_d log f + grad_g f grad_d f / f)]` with
/// `Gamma = c(eta, g) c(eta, d) - R(eta, g, d)`.
///
/// The `c c` part is the second-derivative form, so only the support of `R`
/// is traversed.
pub fn gamma_form(gen: &Generator, pi: &Measure, r: &RFunction, f: &[f64]) -> Result<f64> {
    check_len(gen.n_states(), r.n_states())?;
    let s = second_derivative_form(gen, pi, f)?;
    require_min_positive(f)?;
    let w = pi.weights();
    let mut correction = 0.0;
    for i in 0..gen.n_states() {
        let fi = f[i];
        let mut acc = 0.0;
        for (ga, de, v) in r.row(i) {
            let dg = f[gen.target(i, ga)] - fi;
            let fd = f[gen.target(i, de)];
            acc += v * dg * ((fd / fi).ln() + (fd - fi) / fi);
        }
        correction += w[i] * acc;
    }
    Ok(s - correction)
}

/// Minimum of the four nonnegative bracketed expressions arising from the
/// Γ-form bound at a commuting square with values `a, b, c, d`.
pub fn four_point_nonneg(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let term = |x: f64, y: f64| x * x.ln() - x * y.ln() + y - x;
    term(d, b * c / a)
        .min(term(c, d * a / b))
        .min(term(b, d * a / c))
        .min(term(a, b * c / d))
}

/// `F(alpha, beta) = beta/alpha + alpha/beta + alpha beta - alpha - beta - 1`.
pub fn bl_three_site_f(alpha: f64, beta: f64) -> f64 {
    beta / alpha + alpha / beta + alpha * beta - alpha - beta - 1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// Monotone birth-death rates with a uniform increment bound.
    Theorem1A,
    /// Zero-range rates with increments in `[c, c + delta]`, `delta < c`.
    Theorem2B,
    /// Bernoulli-Laplace intensities in `[c, c + delta]`, `delta < c`.
    ThmBlB,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// `a(n) - a(n+1) + b(n+1) - b(n)` for each `n` below the top.
    Increments { increments: Vec<f64>, argmin: usize },
    ConditionB { c: f64, delta: f64 },
    Failed { reason: String },
}

/// A certified lower bound `kappa` on the entropy convexity constant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub kappa: f64,
    pub witness: Witness,
}

impl Certificate {
    fn none(reason: impl Into<String>) -> Self {
        Certificate {
            kind: CertificateKind::None,
            kappa: 0.0,
            witness: Witness::Failed { reason: reason.into() },
        }
    }

    pub fn is_certified(&self) -> bool {
        self.kind != CertificateKind::None
    }

    /// Recomputes `kappa` from the witness alone.
    pub fn kappa_from_witness(&self) -> f64 {
        match &self.witness {
            Witness::Increments { increments, .. } => {
                increments.iter().copied().fold(f64::INFINITY, f64::min)
            }
            Witness::ConditionB { c, delta } => c - delta,
            Witness::Failed { .. } => 0.0,
        }
    }

    pub fn kappa_opt(&self) -> Option<f64> {
        self.is_certified().then_some(self.kappa)
    }
}

/// Monotonicity of the rates and `kappa = min_n [a(n) - a(n+1) + b(n+1) - b(n)]`
/// over `n = 0..n_max - 1`.
pub fn check_assumption_a(spec: &ModelSpec) -> Result<Certificate> {
    let ModelSpec::BirthDeath { birth: a, death: b, offset } = spec else {
        return Err(wrong_family("birth_death", spec));
    };
    spec.validate()?;
    let label = |n: usize| n as i64 + offset;
    for n in 0..a.len() - 1 {
        if a[n + 1] > a[n] {
            return Ok(Certificate::none(format!("a increases at n = {}", label(n))));
        }
        if b[n + 1] < b[n] {
            return Ok(Certificate::none(format!("b decreases at n = {}", label(n))));
        }
    }
    let increments: Vec<f64> =
        (0..a.len() - 1).map(|n| a[n] - a[n + 1] + b[n + 1] - b[n]).collect();
    let (argmin, kappa) = increments
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (n, v)| if v < acc.1 { (n, v) } else { acc });
    if !(kappa > 0.0) {
        return Ok(Certificate::none(format!(
            "increment vanishes at n = {} (value {kappa})",
            label(argmin)
        )));
    }
    Ok(Certificate {
        kind: CertificateKind::Theorem1A,
        kappa,
        witness: Witness::Increments { increments, argmin },
    })
}

/// `min A_x(eta)` over sites and configurations with `eta_x > 0`, where
/// `A_x(eta) = (c_x(eta_x) - c_x(eta_x - 1))(1 - 1/(2L))
///   - 1/(2L) sum_{v != x} (c_v(eta_v + 1) - c_v(eta_v))`.
pub fn zero_range_ax_min(spec: &ModelSpec, gen: &Generator) -> Result<f64> {
    let ModelSpec::ZeroRange { rates, .. } = spec else {
        return Err(wrong_family("zero_range", spec));
    };
    hop_generator_check(spec, gen)?;
    for (x, c) in rates.iter().enumerate() {
        if let Some(n) = (0..c.len() - 1).find(|&n| c[n + 1] < c[n]) {
            return Err(Error::Monotonicity { site: x + 1, n });
        }
    }
    let l = rates.len() as f64;
    let inv = 1.0 / (2.0 * l);
    let mut best = f64::INFINITY;
    for eta in gen.space().iter() {
        for (x, &nx) in eta.iter().enumerate() {
            if nx == 0 {
                continue;
            }
            let nx = nx as usize;
            let own = (rates[x][nx] - rates[x][nx - 1]) * (1.0 - inv);
            let others: f64 = eta
                .iter()
                .enumerate()
                .filter(|&(v, _)| v != x)
                .map(|(v, &nv)| rates[v][nv as usize + 1] - rates[v][nv as usize])
                .sum();
            best = best.min(own - inv * others);
        }
    }
    Ok(best)
}

/// Dispatches to the sufficient condition of the model's family.
pub fn certified_kappa(spec: &ModelSpec) -> Result<Certificate> {
    spec.validate()?;
    match spec {
        ModelSpec::BirthDeath { .. } => check_assumption_a(spec),
        ModelSpec::ZeroRange { rates, .. } => {
            let mut increments = Vec::new();
            for (x, c) in rates.iter().enumerate() {
                for n in 0..c.len() - 1 {
                    let inc = c[n + 1] - c[n];
                    if inc < 0.0 {
                        return Ok(Certificate::none(format!(
                            "c_{} decreases at n = {n}",
                            x + 1
                        )));
                    }
                    increments.push(inc);
                }
            }
            Ok(condition_b_certificate(&increments, CertificateKind::Theorem2B, "rate increments"))
        }
        ModelSpec::BernoulliLaplace { intensities, .. } => {
            Ok(condition_b_certificate(intensities, CertificateKind::ThmBlB, "intensities"))
        }
    }
}

fn condition_b_certificate(values: &[f64], kind: CertificateKind, what: &str) -> Certificate {
    match condition_b(values) {
        Some((c, delta)) => Certificate { kind, kappa: c - delta, witness: Witness::ConditionB { c, delta } },
        None => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Certificate::none(format!("{what} span [{lo}, {hi}]: spread is not below the minimum"))
        }
    }
}
