//! Semigroup evolution `T_t = exp(tL)`, entropy trajectories, decay checks
//! and the three-site zero-range chain whose entropy decay is not convex.

use serde::{Deserialize, Serialize};

use crate::chain::{check_len, enumerate_states, Chain, Generator, Measure};
use crate::error::{Error, Result};
use crate::functionals::{entropy, mlsi_form, require_min_positive, second_derivative_form};
use crate::models::preset_zero_range;
use crate::spectral::full_spectrum;

/// Relative tolerance of the adaptive integrator.
pub const RTOL: f64 = 1e-10;

/// Largest space for which [`evolve_exact`] is offered.
pub const EXACT_LIMIT: usize = 200;

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub f_t: Vec<Vec<f64>>,
    /// `Ent_pi(T_t f)`
    pub ent: Vec<f64>,
    /// `-E(T_t f, log T_t f)`
    pub dent: Vec<f64>,
    /// Second-derivative form at `T_t f`.
    pub d2ent: Vec<f64>,
    /// `pi[T_t f]`
    pub mass: Vec<f64>,
}

impl Trajectory {
    fn from_states(gen: &Generator, pi: &Measure, times: Vec<f64>, f_t: Vec<Vec<f64>>) -> Result<Self> {
        let mut t = Trajectory {
            ent: Vec::with_capacity(times.len()),
            dent: Vec::with_capacity(times.len()),
            d2ent: Vec::with_capacity(times.len()),
            mass: Vec::with_capacity(times.len()),
            times,
            f_t: Vec::new(),
        };
        for f in &f_t {
            t.ent.push(entropy(pi, f)?);
            t.dent.push(-mlsi_form(gen, pi, f)?);
            t.d2ent.push(second_derivative_form(gen, pi, f)?);
            t.mass.push(pi.expect(f));
        }
        t.f_t = f_t;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|centered difference of ent - dent|` over interior grid points.
    pub fn derivative_mismatch(&self) -> f64 {
        (1..self.len().saturating_sub(1))
            .map(|k| {
                let fd = (self.ent[k + 1] - self.ent[k - 1]) / (self.times[k + 1] - self.times[k - 1]);
                (fd - self.dent[k]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// CSV with header `t,entropy,d_entropy,d2_entropy`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,entropy,d_entropy,d2_entropy\n");
        for k in 0..self.len() {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.times[k], self.ent[k], self.dent[k], self.d2ent[k]
            ));
        }
        s
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.first() != Some(&0.0) {
        return Err(Error::Domain("time grid must start at 0".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(Error::Domain("time grid must be strictly increasing and finite".into()));
    }
    Ok(())
}

/// Uniform grid `0, dt, 2 dt, .., t_final`.
pub fn uniform_grid(t_final: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points).map(|k| t_final * k as f64 / (points - 1) as f64).collect()
}

// Dormand-Prince 5(4) tableau
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `df/dt = Lf` with an embedded Runge-Kutta pair, landing
/// exactly on each grid time, and records the entropy functionals there.
pub fn evolve(gen: &Generator, pi: &Measure, f0: &[f64], times: &[f64]) -> Result<Trajectory> {
    let states = evolve_states(gen, f0, times)?;
    Trajectory::from_states(gen, pi, times.to_vec(), states)
}

/// `T_t f0` at each grid time.
pub fn evolve_states(gen: &Generator, f0: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = gen.n_states();
    check_len(n, f0.len())?;
    require_min_positive(f0)?;
    check_times(times)?;
    let fmin = f0.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = 1e-13 * fmin;
    let max_exit = gen.max_exit_rate();
    let h_cap = if max_exit > 0.0 { 0.5 / max_exit } else { f64::INFINITY };
    let mut out = Vec::with_capacity(times.len());
    let mut y = f0.to_vec();
    out.push(y.clone());
    let mut t = 0.0;
    let mut h = h_cap.min(times.get(1).copied().unwrap_or(1.0)).min(1.0);
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    k[0] = gen.apply_unchecked(&y);
    let mut stage = vec![0.0; n];
    for &target in &times[1..] {
        while t < target {
            let last = target - t <= h * (1.0 + 1e-12);
            let step = if last { target - t } else { h };
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += step * A[s][j] * kj[i];
                    }
                    stage[i] = acc;
                }
                k[s] = gen.apply_unchecked(&stage);
            }
            // stage 6 is evaluated at the 5th-order solution (FSAL)
            let y_new = stage.clone();
            let mut err = 0.0f64;
            let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..n {
                let mut e = 0.0;
                for s in 0..7 {
                    e += (B5[s] - B4[s]) * k[s][i];
                }
                let tol = 1e-3 * RTOL * scale + RTOL * y_new[i].abs().max(y[i].abs());
                err = err.max((step * e).abs() / tol);
            }
            let positive = y_new.iter().all(|&v| v >= floor);
            if err <= 1.0 && positive {
                t = if last { target } else { t + step };
                y = y_new;
                k[0] = std::mem::take(&mut k[6]);
                k[6] = vec![0.0; n];
                let grow = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
                if !last {
                    h = (step * grow.clamp(0.2, 5.0)).min(h_cap);
                } else {
                    h = h.max(step.min(h_cap));
                }
            } else {
                let shrink = if positive { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.5 };
                h = step * shrink;
                if h < 1e-14 * target.max(1.0) {
                    return Err(Error::Integration(format!(
                        "step size underflow at t = {t} (positivity floor {floor:e})"
                    )));
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Same trajectory computed from a full eigendecomposition of `L`.
pub fn evolve_exact(gen: &Generator, pi: &Measure, f0: &[f64], times: &[f64]) -> Result<Trajectory> {
    let n = gen.n_states();
    check_len(n, f0.len())?;
    require_min_positive(f0)?;
    check_times(times)?;
    if n > EXACT_LIMIT {
        return Err(Error::SpaceTooLarge { states: n, max: EXACT_LIMIT });
    }
    let (values, vectors) = full_spectrum(gen, pi)?;
    let sq: Vec<f64> = pi.weights().iter().map(|p| p.sqrt()).collect();
    let u: Vec<f64> = (0..n).map(|i| sq[i] * f0[i]).collect();
    let coeffs: Vec<f64> = (0..n).map(|j| (0..n).map(|i| vectors[(i, j)] * u[i]).sum()).collect();
    let states = times
        .iter()
        .map(|&t| {
            (0..n)
                .map(|i| {
                    let s: f64 = (0..n)
                        .map(|j| vectors[(i, j)] * coeffs[j] * (-values[j].max(0.0) * t).exp())
                        .sum();
                    s / sq[i]
                })
                .collect()
        })
        .collect();
    Trajectory::from_states(gen, pi, times.to_vec(), states)
}

/// Evolution of a law `mu0`: `h(mu0 T_t | pi) = Ent_pi(T_t (d mu0 / d pi))`
/// by self-adjointness.
pub fn evolve_measure(gen: &Generator, pi: &Measure, mu0: &[f64], times: &[f64]) -> Result<Trajectory> {
    check_len(pi.len(), mu0.len())?;
    let density: Vec<f64> = mu0.iter().zip(pi.weights()).map(|(m, p)| m / p).collect();
    evolve(gen, pi, &density, times)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    /// `Ent(T_t f) <= exp(-alpha t) Ent(f)`
    Mlsi,
    /// `E(T_t f, log T_t f) <= exp(-kappa t) E(f, log f)`
    Kappa,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayCheck {
    pub kind: DecayKind,
    pub constant: f64,
    pub passed: bool,
    pub first_failure: Option<f64>,
    /// Largest `value(t) / (exp(-c t) value(0))` on the grid.
    pub worst_ratio: f64,
}

/// Checks exponential decay at rate `constant` on the trajectory grid.
pub fn entropy_decay_check(traj: &Trajectory, constant: f64, kind: DecayKind) -> Result<DecayCheck> {
    if !(constant > 0.0) {
        return Err(Error::Domain(format!("decay constant must be positive, got {constant}")));
    }
    let series: Vec<f64> = match kind {
        DecayKind::Mlsi => traj.ent.clone(),
        DecayKind::Kappa => traj.dent.iter().map(|d| -d).collect(),
    };
    let v0 = series[0];
    let mut first_failure = None;
    let mut worst = 0.0f64;
    for (k, (&t, &v)) in traj.times.iter().zip(&series).enumerate() {
        let bound = (-constant * t).exp() * v0;
        if bound > 0.0 {
            worst = worst.max(v / bound);
        }
        if k > 0 && v > bound * (1.0 + 1e-8) && first_failure.is_none() {
            first_failure = Some(t);
        }
    }
    Ok(DecayCheck { kind, constant, passed: first_failure.is_none(), first_failure, worst_ratio: worst })
}

/// First grid time where the entropy fails to be convex.
pub fn detect_nonconvexity(traj: &Trajectory) -> Option<f64> {
    let threshold = 1e-12 * traj.dent.first().map_or(0.0, |d| d.abs());
    traj.times.iter().zip(&traj.d2ent).find(|(_, &d2)| d2 < -threshold).map(|(&t, _)| t)
}

/// Least-squares decay rate of `ent` over the window `ent > 1e-8 ent(0)`.
pub fn fit_decay_rate(traj: &Trajectory) -> Result<f64> {
    let e0 = traj.ent.first().copied().unwrap_or(0.0);
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.ent)
        .filter(|(_, &e)| e0 > 0.0 && e > 1e-8 * e0)
        .map(|(&t, &e)| (t, e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::WindowTooShort(pts.len()));
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    Ok(-sxy / sxx)
}

#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub c1: f64,
    pub epsilon: f64,
    /// `Q_x` for `x = 1, 2, 3`.
    pub q: [f64; 3],
    /// `(Z L^2)^-1 sum_x c_x Q_x`
    pub total: f64,
    /// Second-derivative form on the three-state chain.
    pub second_derivative: f64,
    pub relative_mismatch: f64,
}

/// One particle on three sites with rates `(c1, 1, 1)` and
/// `f = (1, 2, epsilon)` by particle position.
pub fn counterexample_42(c1: f64, epsilon: f64) -> Result<Counterexample> {
    if !(c1 > 1.0 && c1.is_finite()) {
        return Err(Error::Domain(format!("c1 must exceed 1, got {c1}")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let f = [1.0, 2.0, epsilon];
    let c = [c1, 1.0, 1.0];
    let l = 3.0;
    let z: f64 = c.iter().map(|v| 1.0 / v).sum();
    let mut q = [0.0; 3];
    for x in 0..3 {
        for y in 0..3 {
            for zz in 0..3 {
                let dy = f[y] - f[x];
                q[x] += dy * (f[zz] / f[x]).ln() + dy * (f[zz] - f[x]) / f[x];
            }
        }
    }
    let total = (0..3).map(|x| c[x] * q[x]).sum::<f64>() / (z * l * l);

    let spec = preset_zero_range(c.iter().map(|&cx| vec![0.0, cx]).collect())?;
    let space = enumerate_states(&spec)?;
    let fv: Vec<f64> = space
        .iter()
        .map(|cfg| f[cfg.iter().position(|&k| k == 1).expect("one particle")])
        .collect();
    let chain = Chain::new(&spec)?;
    let s = second_derivative_form(&chain.generator, &chain.measure, &fv)?;
    let relative_mismatch = (s - total).abs() / total.abs().max(s.abs()).max(f64::MIN_POSITIVE);
    Ok(Counterexample { c1, epsilon, q, total, second_derivative: s, relative_mismatch })
}
