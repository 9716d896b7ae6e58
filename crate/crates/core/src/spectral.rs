//! Spectral gap of a reversible generator.
//!
//! `-L` is self-adjoint in `L^2(pi)`, so `S = D^{1/2} (-L) D^{-1/2}` with
//! `D = diag(pi)` is a symmetric matrix with the same spectrum.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::chain::{check_len, check_reversibility, Generator, Measure};
use crate::error::{Error, Result};

/// Largest space handled by a dense symmetric eigensolve.
pub const DENSE_LIMIT: usize = 1500;

/// Tolerance on the smallest eigenvalue, which must be zero.
pub const ZERO_MODE_TOL: f64 = 1e-10;

const REVERSIBILITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Dense,
    Lanczos,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralGap {
    pub gap: f64,
    /// Smallest eigenvalue of `-L`; zero up to rounding.
    pub zero_mode: f64,
    /// Eigenfunction of `-L` for `gap`, normalized in `L^2(pi)`.
    #[serde(skip)]
    pub eigenfunction: Vec<f64>,
    pub method: EigenMethod,
}

/// Second-smallest eigenvalue of `-L`.
pub fn spectral_gap(gen: &Generator, pi: &Measure) -> Result<f64> {
    Ok(spectral_decomposition_gap(gen, pi)?.gap)
}

/// Gap together with its eigenfunction.
pub fn spectral_decomposition_gap(gen: &Generator, pi: &Measure) -> Result<SpectralGap> {
    let n = gen.n_states();
    check_len(n, pi.len())?;
    let rev = check_reversibility(gen, pi, REVERSIBILITY_TOL);
    if !rev.passed {
        return Err(Error::NotReversible { residual: rev.max_rel_violation });
    }
    if n < 2 {
        return Err(Error::Domain("spectral gap needs at least two states".into()));
    }
    if n <= DENSE_LIMIT {
        dense_gap(gen, pi)
    } else {
        lanczos_gap(gen, pi)
    }
}

/// Dense symmetrized `-L`.
pub fn symmetrized_dense(gen: &Generator, pi: &Measure) -> DMatrix<f64> {
    let n = gen.n_states();
    let sq: Vec<f64> = pi.weights().iter().map(|p| p.sqrt()).collect();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for (j, v) in gen.matrix().row(i) {
            s[(i, j)] -= sq[i] * v / sq[j];
        }
    }
    // remove rounding asymmetry
    let t = s.transpose();
    (s + t) * 0.5
}

/// Full eigendecomposition of the symmetrized `-L`, eigenvalues ascending.
pub fn full_spectrum(gen: &Generator, pi: &Measure) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = gen.n_states();
    check_len(n, pi.len())?;
    if n > DENSE_LIMIT {
        return Err(Error::SpaceTooLarge { states: n, max: DENSE_LIMIT });
    }
    let eig = SymmetricEigen::new(symmetrized_dense(gen, pi));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

fn unsymmetrize(pi: &Measure, u: impl Iterator<Item = f64>) -> Vec<f64> {
    pi.weights().iter().zip(u).map(|(p, x)| x / p.sqrt()).collect()
}

fn dense_gap(gen: &Generator, pi: &Measure) -> Result<SpectralGap> {
    let (values, vectors) = full_spectrum(gen, pi)?;
    check_zero_mode(values[0])?;
    Ok(SpectralGap {
        gap: values[1],
        zero_mode: values[0],
        eigenfunction: unsymmetrize(pi, vectors.column(1).iter().copied()),
        method: EigenMethod::Dense,
    })
}

fn check_zero_mode(z: f64) -> Result<()> {
    if z.abs() > ZERO_MODE_TOL {
        return Err(Error::Domain(format!("smallest eigenvalue {z:e} is not zero")));
    }
    Ok(())
}

/// `y = S x` for the symmetrized `-L`.
fn sym_mul(gen: &Generator, sq: &[f64], x: &[f64]) -> Vec<f64> {
    let m = gen.matrix();
    (0..gen.n_states())
        .map(|i| -sq[i] * m.row(i).map(|(j, v)| v * x[j] / sq[j]).sum::<f64>())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
}

/// Lanczos with full reorthogonalization on the complement of `sqrt(pi)`.
fn lanczos_gap(gen: &Generator, pi: &Measure) -> Result<SpectralGap> {
    let n = gen.n_states();
    let sq: Vec<f64> = pi.weights().iter().map(|p| p.sqrt()).collect();
    let ground = sym_mul(gen, &sq, &sq);
    let zero_mode = dot(&ground, &sq);
    check_zero_mode(zero_mode)?;
    let max_steps = (n - 1).min(800);
    let mut basis: Vec<Vec<f64>> = vec![sq.clone()];
    // deterministic, generic start vector
    let mut v: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.618_033_988_75).fract() - 0.5).collect();
    orthogonalize(&mut v, &basis);
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut krylov: Vec<Vec<f64>> = Vec::new();
    let mut last = f64::INFINITY;
    for step in 0..max_steps {
        let mut w = sym_mul(gen, &sq, &v);
        let a = dot(&w, &v);
        alphas.push(a);
        krylov.push(v.clone());
        basis.push(v.clone());
        orthogonalize(&mut w, &basis);
        let b = dot(&w, &w).sqrt();
        let k = alphas.len();
        if step % 10 == 9 || b < 1e-14 || k == max_steps {
            let t = DMatrix::from_fn(k, k, |i, j| {
                if i == j {
                    alphas[i]
                } else if i + 1 == j {
                    betas[i]
                } else if j + 1 == i {
                    betas[j]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let (idx, theta) = eig
                .eigenvalues
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, x)| if x < acc.1 { (i, x) } else { acc });
            let residual = b * eig.eigenvectors[(k - 1, idx)].abs();
            let converged = residual <= 1e-10 * theta.abs().max(1e-12) || b < 1e-14;
            if converged || (theta - last).abs() <= 1e-13 * theta.abs() && residual < 1e-8 {
                let mut u = vec![0.0; n];
                for (c, q) in krylov.iter().enumerate() {
                    let coef = eig.eigenvectors[(c, idx)];
                    u.iter_mut().zip(q).for_each(|(x, y)| *x += coef * y);
                }
                return Ok(SpectralGap {
                    gap: theta,
                    zero_mode,
                    eigenfunction: unsymmetrize(pi, u.into_iter()),
                    method: EigenMethod::Lanczos,
                });
            }
            last = theta;
        }
        betas.push(b);
        v = w.into_iter().map(|x| x / b).collect();
    }
    Err(Error::Domain("Lanczos iteration did not converge".into()))
}
