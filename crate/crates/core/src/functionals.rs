//! Entropy, variance, Dirichlet forms and the entropy second-derivative form.

use serde::Serialize;

use crate::chain::{check_len, Generator, Measure};
use crate::error::{Error, Result};

/// Smallest admissible entry for functionals that need `f > 0`.
pub const MIN_POSITIVE: f64 = 1e-300;

/// A functional value with an optional itemized breakdown.
#[derive(Clone, Debug, Serialize)]
pub struct FunctionalValue {
    pub value: f64,
    pub breakdown: Option<Vec<Contribution>>,
}

/// One summand: a state, optionally a move, and its weighted contribution.
#[derive(Clone, Debug, Serialize)]
pub struct Contribution {
    pub state: usize,
    pub mv: Option<usize>,
    pub value: f64,
}

pub(crate) fn require_min_positive(f: &[f64]) -> Result<()> {
    match f.iter().enumerate().find(|(_, &v)| !(v >= MIN_POSITIVE) || !v.is_finite()) {
        Some((index, &value)) => Err(Error::NonPositive { index, value }),
        None => Ok(()),
    }
}

fn require_nonnegative(f: &[f64]) -> Result<()> {
    match f.iter().enumerate().find(|(_, &v)| !(v >= 0.0) || !v.is_finite()) {
        Some((index, &value)) => Err(Error::Negative { index, value }),
        None => Ok(()),
    }
}

/// `x ln x - x + 1`, nonnegative, accurate near `x = 1`.
pub fn bregman_xlogx(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let u = x - 1.0;
    if u.abs() < 1e-2 {
        // sum_{k>=2} (-1)^k u^k / (k (k - 1))
        let mut term = u * u;
        let mut acc = 0.0;
        for k in 2..12 {
            let kf = k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * term / (kf * (kf - 1.0));
            term *= u;
        }
        acc
    } else {
        x * x.ln() - u
    }
}

/// `Ent_pi(f) = pi[f log f] - pi[f] log pi[f]` with `0 log 0 = 0`.
///
/// Evaluated as `m pi[phi(f / m)]` with `phi(x) = x ln x - x + 1` and
/// `m = pi[f]`, so every summand is nonnegative.
pub fn entropy(pi: &Measure, f: &[f64]) -> Result<f64> {
    Ok(entropy_detailed(pi, f, false)?.value)
}

pub fn entropy_detailed(pi: &Measure, f: &[f64], breakdown: bool) -> Result<FunctionalValue> {
    check_len(pi.len(), f.len())?;
    require_nonnegative(f)?;
    let m = pi.expect(f);
    if !(m > 0.0) {
        return Err(Error::Domain("entropy needs pi[f] > 0".into()));
    }
    if f.iter().all(|&v| v == f[0]) {
        let breakdown = breakdown.then(|| {
            (0..f.len()).map(|state| Contribution { state, mv: None, value: 0.0 }).collect()
        });
        return Ok(FunctionalValue { value: 0.0, breakdown });
    }
    let terms = pi.weights().iter().zip(f).map(|(&p, &v)| p * m * bregman_xlogx(v / m));
    if breakdown {
        let items: Vec<Contribution> = terms
            .enumerate()
            .map(|(state, value)| Contribution { state, mv: None, value })
            .collect();
        let value = items.iter().map(|c| c.value).sum();
        Ok(FunctionalValue { value, breakdown: Some(items) })
    } else {
        Ok(FunctionalValue { value: terms.sum(), breakdown: None })
    }
}

/// `h(mu | pi) = sum mu log(mu / pi)`; `+inf` when `mu` charges a state
/// where `pi` vanishes. Accepts sub-probability `mu`.
pub fn relative_entropy(mu: &[f64], pi: &[f64]) -> Result<f64> {
    check_len(pi.len(), mu.len())?;
    require_nonnegative(mu)?;
    require_nonnegative(pi)?;
    let mut h = 0.0;
    for (&m, &p) in mu.iter().zip(pi) {
        if m == 0.0 {
            continue;
        }
        if p == 0.0 {
            return Ok(f64::INFINITY);
        }
        h += m * (m / p).ln();
    }
    Ok(h)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PinskerCheck {
    pub tv: f64,
    pub relative_entropy: f64,
    pub bound_ok: bool,
}

/// Total variation distance and the bound `tv^2 <= h(mu | pi)`.
pub fn pinsker_check(mu: &[f64], pi: &[f64]) -> Result<PinskerCheck> {
    let h = relative_entropy(mu, pi)?;
    let tv = 0.5 * mu.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(PinskerCheck { tv, relative_entropy: h, bound_ok: tv * tv <= h + 1e-12 })
}

/// `E(f, g) = 1/2 pi[sum_g c (grad f)(grad g)]`.
pub fn dirichlet_form(gen: &Generator, pi: &Measure, f: &[f64], g: &[f64]) -> Result<f64> {
    Ok(dirichlet_form_detailed(gen, pi, f, g, false)?.value)
}

pub fn dirichlet_form_detailed(
    gen: &Generator,
    pi: &Measure,
    f: &[f64],
    g: &[f64],
    breakdown: bool,
) -> Result<FunctionalValue> {
    let n = gen.n_states();
    check_len(n, pi.len())?;
    check_len(n, f.len())?;
    check_len(n, g.len())?;
    let w = pi.weights();
    let mut value = 0.0;
    let mut items = breakdown.then(Vec::new);
    for i in 0..n {
        for (mv, t, c) in gen.transitions(i) {
            let term = 0.5 * w[i] * c * (f[t] - f[i]) * (g[t] - g[i]);
            value += term;
            if let Some(items) = items.as_mut() {
                items.push(Contribution { state: i, mv: Some(mv), value: term });
            }
        }
    }
    Ok(FunctionalValue { value, breakdown: items })
}

/// `-pi[f L g]`, the defining form of the Dirichlet form.
pub fn dirichlet_form_dual(gen: &Generator, pi: &Measure, f: &[f64], g: &[f64]) -> Result<f64> {
    check_len(gen.n_states(), f.len())?;
    let lg = gen.apply(g)?;
    Ok(-pi.weights().iter().zip(f).zip(&lg).map(|((p, a), b)| p * a * b).sum::<f64>())
}

/// `E(f, log f)`; requires `f > 0`.
pub fn mlsi_form(gen: &Generator, pi: &Measure, f: &[f64]) -> Result<f64> {
    Ok(mlsi_form_detailed(gen, pi, f, false)?.value)
}

pub fn mlsi_form_detailed(
    gen: &Generator,
    pi: &Measure,
    f: &[f64],
    breakdown: bool,
) -> Result<FunctionalValue> {
    check_len(gen.n_states(), f.len())?;
    check_len(pi.len(), f.len())?;
    require_min_positive(f)?;
    let w = pi.weights();
    let mut value = 0.0;
    let mut items = breakdown.then(Vec::new);
    for i in 0..gen.n_states() {
        for (mv, t, c) in gen.transitions(i) {
            let term = 0.5 * w[i] * c * (f[t] - f[i]) * (f[t] / f[i]).ln();
            value += term;
            if let Some(items) = items.as_mut() {
                items.push(Contribution { state: i, mv: Some(mv), value: term });
            }
        }
    }
    Ok(FunctionalValue { value, breakdown: items })
}

/// `pi[Lf L log f] + pi[(Lf)^2 / f]`, the second time derivative of
/// `Ent_pi(T_t f)` at `t = 0`.
pub fn second_derivative_form(gen: &Generator, pi: &Measure, f: &[f64]) -> Result<f64> {
    check_len(gen.n_states(), f.len())?;
    check_len(pi.len(), f.len())?;
    require_min_positive(f)?;
    let log_f: Vec<f64> = f.iter().map(|v| v.ln()).collect();
    let lf = gen.apply_unchecked(f);
    let llog = gen.apply_unchecked(&log_f);
    Ok(pi
        .weights()
        .iter()
        .enumerate()
        .map(|(i, &p)| p * (lf[i] * llog[i] + lf[i] * lf[i] / f[i]))
        .sum())
}

/// `Var_pi(f) = pi[(f - pi[f])^2]`.
pub fn variance(pi: &Measure, f: &[f64]) -> Result<f64> {
    check_len(pi.len(), f.len())?;
    let m = pi.expect(f);
    Ok(pi.weights().iter().zip(f).map(|(p, v)| p * (v - m) * (v - m)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Chain;
    use crate::models::{preset_bernoulli_laplace, preset_poisson, preset_two_point};

    fn uniform2() -> Measure {
        Measure::from_weights(vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let pi = uniform2();
        assert_eq!(entropy(&pi, &[3.0, 3.0]).unwrap(), 0.0);
        for t in [0.1f64, 0.5, 2.0, 7.0] {
            let m: f64 = (1.0 + t) / 2.0;
            let closed = t * t.ln() / 2.0 - m * m.ln();
            assert!((entropy(&pi, &[1.0, t]).unwrap() - closed).abs() < 1e-15);
        }
        assert_eq!(entropy(&pi, &[1.0, 1.0]).unwrap(), 0.0);
        // 0 log 0 = 0: f = (0, 2) under uniform has Ent = log 2
        assert!((entropy(&pi, &[0.0, 2.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(entropy(&pi, &[-1.0, 2.0]).is_err());
    }

    #[test]
    fn entropy_breakdown_is_nonnegative() {
        let pi = Measure::from_weights(vec![0.2, 0.3, 0.5]).unwrap();
        let v = entropy_detailed(&pi, &[0.1, 4.0, 1.3], true).unwrap();
        let items = v.breakdown.unwrap();
        assert!(items.iter().all(|c| c.value >= 0.0));
    }

    #[test]
    fn bregman_branches_agree() {
        for x in [0.989f64, 0.9901, 1.0099, 1.011] {
            let direct = x * x.ln() - x + 1.0;
            assert!((bregman_xlogx(x) - direct).abs() < 1e-16);
        }
        assert_eq!(bregman_xlogx(1.0), 0.0);
    }

    #[test]
    fn relative_entropy_and_pinsker() {
        let pi = [0.5, 0.5];
        assert_eq!(relative_entropy(&pi, &pi).unwrap(), 0.0);
        assert!((relative_entropy(&[1.0, 0.0], &pi).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(relative_entropy(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), f64::INFINITY);
        let p = pinsker_check(&[1.0, 0.0], &pi).unwrap();
        assert_eq!(p.tv, 0.5);
        assert!(p.bound_ok);
        let p = pinsker_check(&pi, &pi).unwrap();
        assert_eq!(p.tv, 0.0);
        assert!(p.bound_ok);
    }

    #[test]
    fn two_point_forms() {
        // rate 1 each way: E(f, log f) = (t - 1) log t / 2
        let c = Chain::new(&preset_two_point(1.0).unwrap().spec).unwrap();
        for t in [0.2f64, 3.0, 10.0] {
            let v = mlsi_form(&c.generator, &c.measure, &[1.0, t]).unwrap();
            assert!((v - 0.5 * (t - 1.0) * t.ln()).abs() < 1e-14 * v);
        }
        // rate 1/2 each way: (t - 1) log t / 4
        let c = Chain::new(&preset_bernoulli_laplace(&[1.0, 1.0], 1).unwrap().spec).unwrap();
        let t = 3.0f64;
        let v = mlsi_form(&c.generator, &c.measure, &[1.0, t]).unwrap();
        assert!((v - 0.25 * (t - 1.0) * t.ln()).abs() < 1e-15);
        assert_eq!(variance(&c.measure, &[0.0, 1.0]).unwrap(), 0.25);
    }

    #[test]
    fn constants_vanish() {
        let c = Chain::new(&preset_poisson(1.0, 10).unwrap().spec).unwrap();
        let k = vec![2.5; c.n_states()];
        let f: Vec<f64> = (0..c.n_states()).map(|n| 1.0 + n as f64).collect();
        assert_eq!(mlsi_form(&c.generator, &c.measure, &k).unwrap(), 0.0);
        assert_eq!(second_derivative_form(&c.generator, &c.measure, &k).unwrap(), 0.0);
        assert_eq!(dirichlet_form(&c.generator, &c.measure, &k, &f).unwrap(), 0.0);
        assert!(variance(&c.measure, &k).unwrap() < 1e-28);
        assert!(mlsi_form(&c.generator, &c.measure, &vec![0.0; c.n_states()]).is_err());
        let mut tiny = k.clone();
        tiny[3] = 1e-301;
        assert!(matches!(
            second_derivative_form(&c.generator, &c.measure, &tiny),
            Err(Error::NonPositive { index: 3, .. })
        ));
    }

    #[test]
    fn birth_death_dirichlet_is_one_sided_sum() {
        let c = Chain::new(&preset_poisson(1.3, 12).unwrap().spec).unwrap();
        let n = c.n_states();
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let g: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos() + 0.1 * i as f64).collect();
        let w = c.measure.weights();
        let a = match &c.spec {
            crate::models::ModelSpec::BirthDeath { birth, .. } => birth.clone(),
            _ => unreachable!(),
        };
        let direct: f64 = (0..n - 1).map(|i| w[i] * a[i] * (f[i + 1] - f[i]) * (g[i + 1] - g[i])).sum();
        let e = dirichlet_form(&c.generator, &c.measure, &f, &g).unwrap();
        assert!((e - direct).abs() < 1e-14 * direct.abs().max(1e-300));
        let dual = dirichlet_form_dual(&c.generator, &c.measure, &f, &g).unwrap();
        assert!((e - dual).abs() <= 1e-11 * e.abs());
    }
}
