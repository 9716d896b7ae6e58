//! Finite state spaces, move sets, sparse generators and stationary measures.
//!
//! Generators are written in move form: `Lf(eta) = sum_g c(eta, g) (f(g eta) - f(eta))`
//! with a fixed finite move set. Every move is a total map; where a move
//! cannot act (empty source site, occupied target, boundary of a truncated
//! line) it maps the state to itself and carries rate zero.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// Default cap on the number of enumerated states.
pub const DEFAULT_STATE_CAP: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq)]
enum Layout {
    /// One-dimensional chain on `0..len`; labels are shifted by `offset`.
    Line { len: usize, offset: i64 },
    /// Occupation vectors on `sites` sites with fixed particle number and
    /// optional per-site capacity (1 for exclusion).
    Sites { sites: usize, particles: usize, capacity: Option<u32> },
}

/// Enumerated configurations in lexicographic order with a dense index.
#[derive(Clone, Debug)]
pub struct StateSpace {
    layout: Layout,
    width: usize,
    configs: Vec<u32>,
    /// `counts[k][s]`: number of length-`k` suffixes summing to `s`.
    counts: Vec<Vec<u64>>,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.configs.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn sites(&self) -> usize {
        self.width
    }

    pub fn conserved_particles(&self) -> Option<usize> {
        match self.layout {
            Layout::Line { .. } => None,
            Layout::Sites { particles, .. } => Some(particles),
        }
    }

    /// Occupation vector of state `i` (a single entry for one-dimensional chains).
    pub fn config(&self, i: usize) -> &[u32] {
        &self.configs[i * self.width..(i + 1) * self.width]
    }

    /// Integer label of a one-dimensional state (index plus offset).
    pub fn line_label(&self, i: usize) -> Option<i64> {
        match self.layout {
            Layout::Line { offset, .. } => Some(i as i64 + offset),
            Layout::Sites { .. } => None,
        }
    }

    /// Human-readable label: `n` for lines, `(e1,e2,...)` for site configurations.
    pub fn label(&self, i: usize) -> String {
        match self.line_label(i) {
            Some(n) => n.to_string(),
            None => {
                let parts: Vec<String> = self.config(i).iter().map(|v| v.to_string()).collect();
                format!("({})", parts.join(","))
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.configs.chunks(self.width)
    }

    /// Dense index of a configuration, if it belongs to the space.
    pub fn index_of(&self, config: &[u32]) -> Option<usize> {
        if config.len() != self.width {
            return None;
        }
        match self.layout {
            Layout::Line { len, .. } => {
                let n = config[0] as usize;
                (n < len).then_some(n)
            }
            Layout::Sites { particles, capacity, .. } => {
                if config.iter().map(|&v| v as usize).sum::<usize>() != particles {
                    return None;
                }
                if let Some(cap) = capacity {
                    if config.iter().any(|&v| v > cap) {
                        return None;
                    }
                }
                Some(self.rank(config))
            }
        }
    }

    fn rank(&self, config: &[u32]) -> usize {
        let Layout::Sites { sites, particles, .. } = self.layout else {
            return config[0] as usize;
        };
        let mut remaining = particles;
        let mut r = 0u64;
        for (i, &v) in config.iter().enumerate().take(sites - 1) {
            let suffix = sites - i - 1;
            for lower in 0..v as usize {
                r += self.counts[suffix][remaining - lower];
            }
            remaining -= v as usize;
        }
        r as usize
    }
}

fn suffix_counts(sites: usize, particles: usize, capacity: Option<u32>) -> Vec<Vec<u128>> {
    let mut counts = vec![vec![0u128; particles + 1]; sites + 1];
    counts[0][0] = 1;
    for k in 1..=sites {
        for s in 0..=particles {
            let top = capacity.map_or(s, |c| s.min(c as usize));
            let mut total = 0u128;
            for v in 0..=top {
                total = total.saturating_add(counts[k - 1][s - v]);
            }
            counts[k][s] = total;
        }
    }
    counts
}

/// Size of the conserved sector of `spec` without enumerating it.
pub fn state_count(spec: &ModelSpec) -> u128 {
    match spec {
        ModelSpec::BirthDeath { birth, .. } => birth.len() as u128,
        ModelSpec::ZeroRange { particles, rates } => {
            suffix_counts(rates.len(), *particles, None)[rates.len()][*particles]
        }
        ModelSpec::BernoulliLaplace { particles, intensities } => {
            if *particles > intensities.len() {
                return 0;
            }
            suffix_counts(intensities.len(), *particles, Some(1))[intensities.len()][*particles]
        }
    }
}

/// Enumerates the conserved sector of `spec` with the default state cap.
pub fn enumerate_states(spec: &ModelSpec) -> Result<StateSpace> {
    enumerate_states_with_cap(spec, DEFAULT_STATE_CAP)
}

pub fn enumerate_states_with_cap(spec: &ModelSpec, cap: usize) -> Result<StateSpace> {
    spec.validate()?;
    match spec {
        ModelSpec::BirthDeath { birth, offset, .. } => {
            let len = birth.len();
            if len > cap {
                return Err(Error::Capacity { states: len as u128, cap });
            }
            Ok(StateSpace {
                layout: Layout::Line { len, offset: *offset },
                width: 1,
                configs: (0..len as u32).collect(),
                counts: Vec::new(),
            })
        }
        ModelSpec::ZeroRange { particles, rates } => {
            enumerate_sites(rates.len(), *particles, None, cap)
        }
        ModelSpec::BernoulliLaplace { particles, intensities } => {
            enumerate_sites(intensities.len(), *particles, Some(1), cap)
        }
    }
}

fn enumerate_sites(
    sites: usize,
    particles: usize,
    capacity: Option<u32>,
    cap: usize,
) -> Result<StateSpace> {
    let wide = suffix_counts(sites, particles, capacity);
    let total = wide[sites][particles];
    if total > cap as u128 {
        return Err(Error::Capacity { states: total, cap });
    }
    let counts: Vec<Vec<u64>> = wide
        .iter()
        .map(|row| row.iter().map(|&c| c.min(u64::MAX as u128) as u64).collect())
        .collect();
    let mut configs = Vec::with_capacity(total as usize * sites);
    let mut current = vec![0u32; sites];
    fill_lex(&mut configs, &mut current, 0, particles, capacity, &wide);
    Ok(StateSpace {
        layout: Layout::Sites { sites, particles, capacity },
        width: sites,
        configs,
        counts,
    })
}

fn fill_lex(
    out: &mut Vec<u32>,
    current: &mut [u32],
    pos: usize,
    remaining: usize,
    capacity: Option<u32>,
    counts: &[Vec<u128>],
) {
    let sites = current.len();
    if pos == sites - 1 {
        if capacity.is_none_or(|c| remaining as u32 <= c) {
            current[pos] = remaining as u32;
            out.extend_from_slice(current);
        }
        return;
    }
    let top = capacity.map_or(remaining, |c| remaining.min(c as usize));
    for v in 0..=top {
        if counts[sites - pos - 1][remaining - v] == 0 {
            continue;
        }
        current[pos] = v as u32;
        fill_lex(out, current, pos + 1, remaining - v, capacity, counts);
    }
}

/// A labelled move together with the id of its inverse.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Move {
    pub id: usize,
    pub label: String,
    pub inverse_id: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum MoveKind {
    /// `+` and `-` on a line.
    Line,
    /// `xy`: one particle from `x` to `y`, `x != y`.
    Hop { sites: usize },
}

/// The fixed move set `G` of a model.
#[derive(Clone, Debug)]
pub struct MoveSet {
    kind: MoveKind,
    moves: Vec<Move>,
}

pub const MOVE_UP: usize = 0;
pub const MOVE_DOWN: usize = 1;

impl MoveSet {
    fn line() -> Self {
        MoveSet {
            kind: MoveKind::Line,
            moves: vec![
                Move { id: MOVE_UP, label: "+".into(), inverse_id: MOVE_DOWN },
                Move { id: MOVE_DOWN, label: "-".into(), inverse_id: MOVE_UP },
            ],
        }
    }

    fn hops(sites: usize) -> Self {
        let mut moves = Vec::with_capacity(sites * sites.saturating_sub(1));
        for x in 0..sites {
            for y in 0..sites {
                if x != y {
                    moves.push(Move {
                        id: moves.len(),
                        label: format!("{}{}", x + 1, y + 1),
                        inverse_id: hop_id(sites, y, x),
                    });
                }
            }
        }
        MoveSet { kind: MoveKind::Hop { sites }, moves }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn inverse(&self, id: usize) -> usize {
        self.moves[id].inverse_id
    }

    /// `(x, y)` zero-based site pair of a hop move.
    pub fn hop_sites(&self, id: usize) -> Option<(usize, usize)> {
        match self.kind {
            MoveKind::Line => None,
            MoveKind::Hop { sites } => {
                let x = id / (sites - 1);
                let r = id % (sites - 1);
                Some((x, if r >= x { r + 1 } else { r }))
            }
        }
    }

    pub fn hop(&self, x: usize, y: usize) -> Option<usize> {
        match self.kind {
            MoveKind::Hop { sites } if x != y && x < sites && y < sites => Some(hop_id(sites, x, y)),
            _ => None,
        }
    }
}

fn hop_id(sites: usize, x: usize, y: usize) -> usize {
    x * (sites - 1) + if y > x { y - 1 } else { y }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }
}

/// Sparse rate table `c(eta, g)` plus the assembled generator matrix.
#[derive(Clone, Debug)]
pub struct Generator {
    space: Arc<StateSpace>,
    moves: MoveSet,
    row_ptr: Vec<usize>,
    move_ids: Vec<u32>,
    targets: Vec<u32>,
    rates: Vec<f64>,
    matrix: CsrMatrix,
}

/// Builds the move-form generator of `spec` on an enumerated space.
pub fn build_generator(spec: &ModelSpec, space: &StateSpace) -> Result<Generator> {
    build_generator_shared(spec, Arc::new(space.clone()))
}

pub fn build_generator_shared(spec: &ModelSpec, space: Arc<StateSpace>) -> Result<Generator> {
    spec.validate()?;
    if state_count(spec) != space.len() as u128 || spec.sites() != space.sites() {
        return Err(Error::InvalidModel("state space was not enumerated from this spec".into()));
    }
    let n = space.len();
    let moves = match spec {
        ModelSpec::BirthDeath { .. } => MoveSet::line(),
        _ => MoveSet::hops(spec.sites()),
    };
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut move_ids = Vec::new();
    let mut targets = Vec::new();
    let mut rates = Vec::new();
    row_ptr.push(0);
    let mut scratch = Vec::with_capacity(space.sites());
    let l = spec.sites() as f64;
    for i in 0..n {
        match spec {
            ModelSpec::BirthDeath { birth, death, .. } => {
                if birth[i] > 0.0 {
                    move_ids.push(MOVE_UP as u32);
                    targets.push((i + 1) as u32);
                    rates.push(birth[i]);
                }
                if death[i] > 0.0 {
                    move_ids.push(MOVE_DOWN as u32);
                    targets.push((i - 1) as u32);
                    rates.push(death[i]);
                }
            }
            ModelSpec::ZeroRange { rates: table, .. } => {
                let cfg = space.config(i);
                for (id, mv) in moves.moves.iter().enumerate() {
                    let (x, y) = moves.hop_sites(mv.id).unwrap();
                    let c = table[x][cfg[x] as usize];
                    if c > 0.0 {
                        scratch.clear();
                        scratch.extend_from_slice(cfg);
                        scratch[x] -= 1;
                        scratch[y] += 1;
                        move_ids.push(id as u32);
                        targets.push(space.rank(&scratch) as u32);
                        rates.push(c / l);
                    }
                }
            }
            ModelSpec::BernoulliLaplace { intensities, .. } => {
                let cfg = space.config(i);
                for (id, mv) in moves.moves.iter().enumerate() {
                    let (x, y) = moves.hop_sites(mv.id).unwrap();
                    if cfg[x] == 1 && cfg[y] == 0 {
                        scratch.clear();
                        scratch.extend_from_slice(cfg);
                        scratch[x] = 0;
                        scratch[y] = 1;
                        move_ids.push(id as u32);
                        targets.push(space.rank(&scratch) as u32);
                        rates.push(intensities[x] / l);
                    }
                }
            }
        }
        row_ptr.push(move_ids.len());
    }
    let mut g = Generator {
        space,
        moves,
        row_ptr,
        move_ids,
        targets,
        rates,
        matrix: CsrMatrix { n, row_ptr: vec![0; n + 1], cols: Vec::new(), vals: Vec::new() },
    };
    g.matrix = g.assemble_matrix();
    Ok(g)
}

impl Generator {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn shared_space(&self) -> Arc<StateSpace> {
        Arc::clone(&self.space)
    }

    pub fn moves(&self) -> &MoveSet {
        &self.moves
    }

    pub fn n_states(&self) -> usize {
        self.space.len()
    }

    pub fn n_moves(&self) -> usize {
        self.moves.len()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// `(move, target, rate)` for every move with positive rate at `state`.
    pub fn transitions(&self, state: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let r = self.row_ptr[state]..self.row_ptr[state + 1];
        r.map(move |k| (self.move_ids[k] as usize, self.targets[k] as usize, self.rates[k]))
    }

    /// `c(eta, g)`; zero for moves that cannot act.
    pub fn rate(&self, state: usize, mv: usize) -> f64 {
        self.find(state, mv).map_or(0.0, |k| self.rates[k])
    }

    /// `g(eta)` as a total map: moves that cannot act leave the state unchanged.
    pub fn target(&self, state: usize, mv: usize) -> usize {
        self.find(state, mv).map_or(state, |k| self.targets[k] as usize)
    }

    fn find(&self, state: usize, mv: usize) -> Option<usize> {
        let lo = self.row_ptr[state];
        let hi = self.row_ptr[state + 1];
        self.move_ids[lo..hi]
            .binary_search(&(mv as u32))
            .ok()
            .map(|k| lo + k)
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    /// Largest total exit rate `max |L[eta, eta]|`.
    pub fn max_exit_rate(&self) -> f64 {
        (0..self.n_states())
            .map(|i| self.transitions(i).map(|(_, _, c)| c).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Rebuilds the matrix from the rate table.
    pub fn assemble_matrix(&self) -> CsrMatrix {
        let n = self.n_states();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(self.rates.len() + n);
        let mut vals = Vec::with_capacity(self.rates.len() + n);
        row_ptr.push(0);
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        for i in 0..n {
            row.clear();
            for (_, t, c) in self.transitions(i) {
                if t != i {
                    *row.entry(t).or_insert(0.0) += c;
                }
            }
            let exit: f64 = row.values().sum();
            row.insert(i, -exit);
            for (&j, &v) in &row {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    /// Copy of this generator with every rate multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Generator {
        let mut g = self.clone();
        g.rates.iter_mut().for_each(|c| *c *= s);
        g.matrix = g.assemble_matrix();
        g
    }

    /// Copy with a single `c(eta, g)` replaced. The move must already act at
    /// `state`; used to build negative controls.
    pub fn with_rate(&self, state: usize, mv: usize, rate: f64) -> Result<Generator> {
        let k = self.find(state, mv).ok_or_else(|| {
            Error::InvalidModel(format!("move {mv} does not act at state {state}"))
        })?;
        let mut g = self.clone();
        g.rates[k] = rate;
        g.matrix = g.assemble_matrix();
        Ok(g)
    }

    /// `(Lf)(eta) = sum_g c(eta, g) (f(g eta) - f(eta))`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_states(), f.len())?;
        Ok(self.apply_unchecked(f))
    }

    pub(crate) fn apply_unchecked(&self, f: &[f64]) -> Vec<f64> {
        (0..self.n_states())
            .map(|i| {
                let fi = f[i];
                self.transitions(i).map(|(_, t, c)| c * (f[t] - fi)).sum()
            })
            .collect()
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Strictly positive probability vector on a state space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Measure {
    weights: Vec<f64>,
}

impl Measure {
    /// Normalizes positive weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        for (i, &w) in weights.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::NonPositive { index: i, value: w });
            }
        }
        let total: f64 = weights.iter().sum();
        Ok(Measure { weights: weights.into_iter().map(|w| w / total).collect() })
    }

    /// Normalizes `exp(log_weights)` after subtracting the maximum.
    pub fn from_log_weights(log_weights: &[f64]) -> Result<Self> {
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Domain("log-weights are not finite".into()));
        }
        let w: Vec<f64> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
        Self::from_weights(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `pi[f]`.
    pub fn expect(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(p, v)| p * v).sum()
    }
}

/// Real function on the states.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateFunction {
    values: Vec<f64>,
}

impl StateFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Domain(format!("entry {i} is not finite ({v})")));
        }
        Ok(StateFunction { values })
    }

    pub fn constant(n: usize, c: f64) -> Self {
        StateFunction { values: vec![c; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rejects any entry `<= 0`.
    pub fn require_positive(&self) -> Result<()> {
        require_positive(&self.values)
    }
}

impl AsRef<[f64]> for StateFunction {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn require_positive(f: &[f64]) -> Result<()> {
    match f.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        Some((index, &value)) => Err(Error::NonPositive { index, value }),
        None => Ok(()),
    }
}

/// Sparse matrix-vector product realizing `Lf`.
pub fn apply_generator(gen: &Generator, f: &StateFunction) -> Result<StateFunction> {
    Ok(StateFunction { values: gen.apply(f.values())? })
}

/// Normalized stationary (product or canonical) measure of `spec`.
pub fn stationary_measure(spec: &ModelSpec, space: &StateSpace) -> Result<Measure> {
    Measure::from_log_weights(&log_stationary_weights(spec, space)?)
}

/// Unnormalized `log pi`, finite even where `pi` underflows.
pub fn log_stationary_weights(spec: &ModelSpec, space: &StateSpace) -> Result<Vec<f64>> {
    spec.validate()?;
    let log_w: Vec<f64> = match spec {
        ModelSpec::BirthDeath { birth, death, .. } => {
            let mut lw = Vec::with_capacity(birth.len());
            let mut acc = 0.0;
            lw.push(acc);
            for n in 0..birth.len() - 1 {
                acc += birth[n].ln() - death[n + 1].ln();
                lw.push(acc);
            }
            lw
        }
        ModelSpec::ZeroRange { particles, rates } => {
            // log p_x(n) = -sum_{k=1}^n log c_x(k)
            let log_p: Vec<Vec<f64>> = rates
                .iter()
                .map(|row| {
                    let mut out = Vec::with_capacity(particles + 1);
                    let mut acc = 0.0;
                    out.push(0.0);
                    for c in &row[1..] {
                        acc -= c.ln();
                        out.push(acc);
                    }
                    out
                })
                .collect();
            space
                .iter()
                .map(|cfg| cfg.iter().enumerate().map(|(x, &n)| log_p[x][n as usize]).sum())
                .collect()
        }
        ModelSpec::BernoulliLaplace { intensities, .. } => space
            .iter()
            .map(|cfg| {
                cfg.iter()
                    .zip(intensities)
                    .map(|(&e, &l)| {
                        let norm = (1.0 + l).ln();
                        if e == 1 {
                            -norm
                        } else {
                            l.ln() - norm
                        }
                    })
                    .sum()
            })
            .collect(),
    };
    check_len(space.len(), log_w.len())?;
    Ok(log_w)
}

/// Outcome of the detailed-balance scan.
#[derive(Clone, Debug, Serialize)]
pub struct ReversibilityReport {
    pub max_abs_violation: f64,
    pub max_rel_violation: f64,
    /// `(state, move)` pairs whose relative violation exceeds the tolerance.
    pub offending: Vec<(usize, usize)>,
    /// Pairs with positive rate whose inverse move does not return to the start.
    pub broken_inverses: Vec<(usize, usize)>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks `pi(eta) c(eta, g) = pi(g eta) c(g eta, g^-1)` for every pair with
/// positive rate; violations are reported, never raised.
pub fn check_reversibility(gen: &Generator, pi: &Measure, tol: f64) -> ReversibilityReport {
    let w = pi.weights();
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    let mut offending = Vec::new();
    let mut broken = Vec::new();
    for i in 0..gen.n_states() {
        for (mv, t, c) in gen.transitions(i) {
            let inv = gen.moves().inverse(mv);
            if gen.target(t, inv) != i {
                broken.push((i, mv));
            }
            let lhs = w[i] * c;
            let rhs = w[t] * gen.rate(t, inv);
            let abs = (lhs - rhs).abs();
            let rel = abs / lhs.max(rhs);
            max_abs = max_abs.max(abs);
            max_rel = max_rel.max(rel);
            if rel > tol {
                offending.push((i, mv));
            }
        }
    }
    ReversibilityReport {
        max_abs_violation: max_abs,
        max_rel_violation: max_rel,
        passed: offending.is_empty() && broken.is_empty(),
        offending,
        broken_inverses: broken,
        tolerance: tol,
    }
}

/// A model instance bundling space, generator and stationary measure.
#[derive(Clone, Debug)]
pub struct Chain {
    pub spec: ModelSpec,
    pub generator: Generator,
    pub measure: Measure,
}

impl Chain {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        let space = Arc::new(enumerate_states(spec)?);
        let generator = build_generator_shared(spec, Arc::clone(&space))?;
        let measure = stationary_measure(spec, &space)?;
        Ok(Chain { spec: spec.clone(), generator, measure })
    }

    pub fn n_states(&self) -> usize {
        self.generator.n_states()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{preset_bernoulli_laplace, preset_linear_zero_range, preset_poisson};

    fn zr(l: usize, n: usize) -> ModelSpec {
        preset_linear_zero_range(&vec![1.0; l], n).unwrap().spec
    }

    #[test]
    fn zero_range_two_sites_two_particles() {
        let s = enumerate_states(&zr(2, 2)).unwrap();
        let cfgs: Vec<&[u32]> = s.iter().collect();
        assert_eq!(cfgs, vec![&[0, 2][..], &[1, 1], &[2, 0]]);
        assert_eq!(s.conserved_particles(), Some(2));
    }

    #[test]
    fn bl_one_particle_three_sites() {
        let spec = preset_bernoulli_laplace(&[1.0; 3], 1).unwrap().spec;
        let s = enumerate_states(&spec).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.config(0), &[0, 0, 1]);
        assert_eq!(s.config(2), &[1, 0, 0]);
    }

    #[test]
    fn stars_and_bars_count_matches_brute_force() {
        // brute force over {0..N}^L
        let (l, n) = (3usize, 4u32);
        let mut brute = Vec::new();
        for a in 0..=n {
            for b in 0..=n {
                for c in 0..=n {
                    if a + b + c == n {
                        brute.push(vec![a, b, c]);
                    }
                }
            }
        }
        brute.sort();
        let s = enumerate_states(&zr(l, n as usize)).unwrap();
        assert_eq!(s.len(), 15);
        let got: Vec<Vec<u32>> = s.iter().map(|c| c.to_vec()).collect();
        assert_eq!(got, brute);
        for (i, c) in got.iter().enumerate() {
            assert_eq!(s.index_of(c), Some(i));
        }
        assert_eq!(s.index_of(&[1, 1, 1]), None);
    }

    #[test]
    fn capacity_cap() {
        let err = enumerate_states_with_cap(&zr(6, 20), 1000).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
    }

    #[test]
    fn birth_death_matrix_rows() {
        let spec = ModelSpec::BirthDeath {
            birth: vec![1.0, 1.0, 0.0],
            death: vec![0.0, 1.0, 2.0],
            offset: 0,
        };
        let s = enumerate_states(&spec).unwrap();
        let g = build_generator(&spec, &s).unwrap();
        let m = g.matrix().to_dense();
        let expected = [[-1.0, 1.0, 0.0], [1.0, -2.0, 1.0], [0.0, 2.0, -2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[(i, j)], expected[i][j]);
            }
        }
        // total maps: + at the top and - at the bottom are identities with rate 0
        assert_eq!(g.target(2, MOVE_UP), 2);
        assert_eq!(g.rate(2, MOVE_UP), 0.0);
        assert_eq!(g.target(0, MOVE_DOWN), 0);
    }

    #[test]
    fn small_hop_rates() {
        let bl = preset_bernoulli_laplace(&[1.0, 1.0], 1).unwrap().spec;
        let c = Chain::new(&bl).unwrap();
        assert_eq!(c.n_states(), 2);
        let m = c.generator.matrix().to_dense();
        assert_eq!(m[(0, 1)], 0.5);
        assert_eq!(m[(1, 0)], 0.5);
        assert_eq!(c.measure.weights(), &[0.5, 0.5]);

        let z = Chain::new(&zr(2, 1)).unwrap();
        let m = z.generator.matrix().to_dense();
        assert_eq!(m[(0, 1)], 0.5);
        assert_eq!(m[(1, 0)], 0.5);
    }

    #[test]
    fn stationary_examples() {
        let p = preset_poisson(1.0, 4).unwrap().spec;
        let c = Chain::new(&p).unwrap();
        let fact = [1.0, 1.0, 2.0, 6.0, 24.0];
        let z: f64 = fact.iter().map(|f| 1.0 / f).sum();
        for (n, w) in c.measure.weights().iter().enumerate() {
            assert!((w - 1.0 / fact[n] / z).abs() < 1e-15);
        }
        let z = Chain::new(&zr(2, 2)).unwrap();
        let expect = [0.25, 0.5, 0.25];
        for (w, e) in z.measure.weights().iter().zip(expect) {
            assert!((w - e).abs() < 1e-15);
        }
    }

    #[test]
    fn reversibility_and_negative_control() {
        let p = Chain::new(&preset_poisson(1.0, 20).unwrap().spec).unwrap();
        let rep = check_reversibility(&p.generator, &p.measure, 1e-12);
        assert!(rep.passed);
        assert!(rep.max_abs_violation < 1e-14);

        let rates = vec![
            (0..=2).map(|n| n as f64).collect(),
            (0..=2).map(|n| 2.0 * n as f64).collect(),
            (0..=2).map(|n| 3.0 * n as f64).collect(),
        ];
        let spec = crate::models::preset_zero_range(rates).unwrap();
        let c = Chain::new(&spec).unwrap();
        let rep = check_reversibility(&c.generator, &c.measure, 1e-12);
        assert!(rep.passed && rep.max_abs_violation < 1e-13);

        let bad = c.generator.with_rate(0, c.generator.transitions(0).next().unwrap().0, 7.0).unwrap();
        let rep = check_reversibility(&bad, &c.measure, 1e-12);
        assert!(!rep.passed);
        assert!(rep.offending.contains(&(0, bad.transitions(0).next().unwrap().0)));
    }

    #[test]
    fn apply_matches_dense_and_kills_constants() {
        let c = Chain::new(&zr(3, 3)).unwrap();
        let n = c.n_states();
        let ones = vec![1.0; n];
        assert!(c.generator.apply(&ones).unwrap().iter().all(|v| *v == 0.0));
        let f: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 * 0.3 - 1.0).collect();
        let sparse = c.generator.apply(&f).unwrap();
        let dense = c.generator.matrix().to_dense() * nalgebra::DVector::from_vec(f.clone());
        for i in 0..n {
            assert!((sparse[i] - dense[i]).abs() < 1e-13);
        }
        assert!(c.generator.apply(&f[1..]).is_err());

        let bl = Chain::new(&preset_bernoulli_laplace(&[1.0, 1.0], 1).unwrap().spec).unwrap();
        let lf = bl.generator.apply(&[0.0, 1.0]).unwrap();
        assert_eq!(lf, vec![0.5, -0.5]);
    }

    #[test]
    fn matrix_rebuild_is_bit_identical() {
        let c = Chain::new(&preset_bernoulli_laplace(&[1.0, 1.3, 0.7, 2.0], 2).unwrap().spec).unwrap();
        assert_eq!(c.generator.assemble_matrix(), *c.generator.matrix());
    }
}
