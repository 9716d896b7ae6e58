//! Smoothing of death rates that are only increasing on a large scale, and
//! transfer of entropy constants between chains with equivalent laws.

use serde::Serialize;

use crate::bochner::{check_assumption_a, Certificate};
use crate::chain::{enumerate_states, log_stationary_weights};
use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// Smoothed death rates together with the derived constants.
#[derive(Clone, Debug, Serialize)]
pub struct SmoothedRates {
    pub b_tilde: Vec<f64>,
    pub n0: usize,
    /// `min grad_+ b_tilde` over the interior (untouched by the tail).
    pub delta1: f64,
    /// `min grad_+ b_tilde` over the whole range, tail included.
    pub delta1_full: f64,
    /// `(min, max)` of `pi / pi_tilde` for the chains with `a = 1`.
    pub ratio_bounds: (f64, f64),
    /// First index whose window was shrunk at the truncation end.
    pub tail_start: usize,
}

impl SmoothedRates {
    /// Birth-death model with `a = 1` (zero at the top) and death rates `b_tilde`.
    pub fn spec(&self) -> ModelSpec {
        unit_birth_spec(&self.b_tilde)
    }
}

/// Birth-death model with `a(n) = 1` below the top and death rates `b`.
pub fn unit_birth_spec(b: &[f64]) -> ModelSpec {
    let mut birth = vec![1.0; b.len()];
    if let Some(top) = birth.last_mut() {
        *top = 0.0;
    }
    ModelSpec::BirthDeath { birth, death: b.to_vec(), offset: 0 }
}

/// `b(k) + (1/w) sum_{j=1}^{w-1} ((w - j)/w) [b(k+j) + b(k-j) - 2 b(k)]` with
/// window `w`.
fn smooth_at(b: &[f64], k: usize, w: usize) -> f64 {
    let wf = w as f64;
    let s: f64 = (1..w)
        .map(|j| (wf - j as f64) / wf * (b[k + j] + b[k - j] - 2.0 * b[k]))
        .sum();
    b[k] + s / wf
}

/// Averages `b` over a window of width `n0` for `k >= n0` and interpolates
/// linearly to zero below `n0`. For the last indices the window shrinks to
/// the available range; those indices start at `tail_start`.
pub fn smooth_rates(b: &[f64], n0: usize) -> Result<SmoothedRates> {
    if n0 < 2 {
        return Err(Error::Domain(format!("smoothing window must be at least 2, got {n0}")));
    }
    let k_max = b.len().saturating_sub(1);
    if k_max <= 2 * n0 {
        return Err(Error::Domain(format!(
            "window {n0} exceeds the array: need more than {} entries, got {}",
            2 * n0 + 1,
            b.len()
        )));
    }
    if b[0] != 0.0 {
        return Err(Error::Boundary(format!("b(0) must be 0, got {}", b[0])));
    }
    let mut bt = vec![0.0; b.len()];
    for (k, v) in bt.iter_mut().enumerate().skip(n0) {
        *v = smooth_at(b, k, n0.min(k_max - k + 1));
    }
    let anchor = bt[n0];
    for (k, v) in bt.iter_mut().enumerate().take(n0) {
        *v = anchor * k as f64 / n0 as f64;
    }
    let tail_start = k_max + 2 - n0;
    let increments: Vec<f64> = bt.windows(2).map(|w| w[1] - w[0]).collect();
    let delta1 = increments[..tail_start - 1].iter().copied().fold(f64::INFINITY, f64::min);
    let delta1_full = increments.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio_bounds = measure_ratio_bounds(&unit_birth_spec(b), &unit_birth_spec(&bt))?;
    Ok(SmoothedRates { b_tilde: bt, n0, delta1, delta1_full, ratio_bounds, tail_start })
}

/// `(1/n0^2) sum_{j=1}^{n0} [b(k+j) - b(k+j-n0)]`, which equals
/// `b_tilde(k+1) - b_tilde(k)` whenever both windows are full.
pub fn smoothed_increment_identity(b: &[f64], n0: usize, k: usize) -> f64 {
    let s: f64 = (1..=n0).map(|j| b[k + j] - b[k + j - n0]).sum();
    s / (n0 * n0) as f64
}

/// Realized large-scale monotonicity constants of `b`.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    /// `max |b(n+1) - b(n)|`
    pub sup_increment: f64,
    /// `min [b(n + n0) - b(n)]`
    pub inf_window_gain: f64,
    pub lipschitz_ok: bool,
    pub gain_ok: bool,
    pub passed: bool,
}

pub fn verify_hypotheses(b: &[f64], c1: f64, delta: f64, n0: usize) -> HypothesisReport {
    let sup_increment = b.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let inf_window_gain = (0..b.len().saturating_sub(n0))
        .map(|n| b[n + n0] - b[n])
        .fold(f64::INFINITY, f64::min);
    let lipschitz_ok = sup_increment <= c1;
    let gain_ok = inf_window_gain >= delta;
    HypothesisReport {
        sup_increment,
        inf_window_gain,
        lipschitz_ok,
        gain_ok,
        passed: lipschitz_ok && gain_ok,
    }
}

/// Exact `(min, max)` of `pi(n) / pi_tilde(n)` for two birth-death models on
/// the same range with identical birth rates.
pub fn measure_ratio_bounds(spec: &ModelSpec, spec_tilde: &ModelSpec) -> Result<(f64, f64)> {
    let (ModelSpec::BirthDeath { birth: a, .. }, ModelSpec::BirthDeath { birth: at, .. }) =
        (spec, spec_tilde)
    else {
        return Err(Error::WrongFamily {
            expected: "birth_death",
            got: if spec.family_name() != "birth_death" { spec.family_name() } else { spec_tilde.family_name() },
        });
    };
    if a.len() != at.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: at.len() });
    }
    if a != at {
        return Err(Error::InvalidModel("comparison needs identical birth rates".into()));
    }
    let lp = normalized_log(log_stationary_weights(spec, &enumerate_states(spec)?)?);
    let lq = normalized_log(log_stationary_weights(spec_tilde, &enumerate_states(spec_tilde)?)?);
    let (mut low, mut high) = (f64::INFINITY, f64::NEG_INFINITY);
    for (p, q) in lp.iter().zip(&lq) {
        low = low.min(p - q);
        high = high.max(p - q);
    }
    Ok((low.exp(), high.exp()))
}

fn normalized_log(mut lw: Vec<f64>) -> Vec<f64> {
    let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z = m + lw.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    lw.iter_mut().for_each(|x| *x -= z);
    lw
}

/// `alpha_tilde * low / high`: with shared rates, `E_pi >= low E_pi_tilde`
/// and `Ent_pi <= high Ent_pi_tilde`.
pub fn transfer_constant(alpha_tilde: f64, low: f64, high: f64) -> Result<f64> {
    if !(low > 0.0 && low <= high && high.is_finite()) {
        return Err(Error::Domain(format!("need 0 < low <= high, got ({low}, {high})")));
    }
    Ok(alpha_tilde * low / high)
}

/// `Ent_pi(f) = inf_{t > 0} pi[f log f - f log t - f + t]`, evaluated at `t`.
pub fn variational_entropy_integrand(pi: &[f64], f: &[f64], t: f64) -> f64 {
    pi.iter()
        .zip(f)
        .map(|(p, &x)| {
            let v = if x > 0.0 { x * (x / t).ln() - x + t } else { t };
            p * v
        })
        .sum()
}

/// Full comparison route for non-monotone death rates.
#[derive(Clone, Debug, Serialize)]
pub struct TransferReport {
    pub smoothed: SmoothedRates,
    /// Certificate of the smoothed chain.
    pub certificate: Certificate,
    /// Lower bound on the entropy decay rate of the original chain.
    pub alpha: Option<f64>,
}

pub fn transfer_for_rates(b: &[f64], n0: usize) -> Result<TransferReport> {
    let smoothed = smooth_rates(b, n0)?;
    let certificate = check_assumption_a(&smoothed.spec())?;
    let alpha = match certificate.kappa_opt() {
        Some(k) => Some(transfer_constant(k, smoothed.ratio_bounds.0, smoothed.ratio_bounds.1)?),
        None => None,
    };
    Ok(TransferReport { smoothed, certificate, alpha })
}

/// `n + amplitude sin n` on `0..=k_max`.
pub fn sine_rates(amplitude: f64, k_max: usize) -> Vec<f64> {
    (0..=k_max).map(|n| n as f64 + amplitude * (n as f64).sin()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_rates_are_fixed() {
        let b: Vec<f64> = (0..40).map(|n| n as f64).collect();
        for n0 in [2, 5, 7] {
            let s = smooth_rates(&b, n0).unwrap();
            for k in 0..40 {
                assert!((s.b_tilde[k] - k as f64).abs() < 1e-12, "n0={n0} k={k}");
            }
            assert_eq!(s.ratio_bounds, (1.0, 1.0));
        }
    }

    #[test]
    fn increment_identity_on_interior() {
        let b = sine_rates(0.4, 200);
        let n0 = 7;
        let s = smooth_rates(&b, n0).unwrap();
        for k in n0..=200 - n0 {
            let lhs = s.b_tilde[k + 1] - s.b_tilde[k];
            let rhs = smoothed_increment_identity(&b, n0, k);
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0), "k={k}");
        }
        assert!(s.delta1 > 0.0);
        assert_eq!(s.tail_start, 200 - n0 + 2);
    }

    #[test]
    fn summation_by_parts() {
        let psi: Vec<f64> = (0..12).map(|j| (j as f64 * 0.37).cos()).collect();
        let phi: Vec<f64> = (0..13).map(|j| (j as f64 * 1.3).sin() + j as f64).collect();
        let (l, m) = (2, 10);
        let lhs: f64 = (l..=m).map(|j| psi[j] * (phi[j + 1] - phi[j])).sum();
        let rhs = psi[m] * phi[m + 1] - psi[l] * phi[l]
            - (l + 1..=m).map(|j| phi[j] * (psi[j] - psi[j - 1])).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn hypotheses_for_sine_rates() {
        let b = sine_rates(0.4, 200);
        let r = verify_hypotheses(&b, 1.4, 6.2, 7);
        assert!(r.passed, "{r:?}");
        let lin: Vec<f64> = (0..30).map(|n| n as f64).collect();
        let r = verify_hypotheses(&lin, 1.0, 7.0, 7);
        assert_eq!((r.sup_increment, r.inf_window_gain), (1.0, 7.0));
        let r = verify_hypotheses(&sine_rates(2.0, 200), 1.0, 0.0, 1);
        assert!(!r.passed && r.inf_window_gain < 0.0);
    }

    #[test]
    fn transfer_identity_and_errors() {
        assert_eq!(transfer_constant(0.7, 1.0, 1.0).unwrap(), 0.7);
        assert!(transfer_constant(1.0, 2.0, 1.0).is_err());
        let r = transfer_for_rates(&sine_rates(0.4, 200), 7).unwrap();
        assert!(r.alpha.unwrap() > 0.0);
        assert!(smooth_rates(&sine_rates(0.4, 10), 7).is_err());
    }
}
