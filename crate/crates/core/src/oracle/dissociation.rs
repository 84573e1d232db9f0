//! Number-state solutions for a molecular coherent state dissociating into
//! two atomic modes under `Ĥ = â† b̂₁ b̂₂ + h.c.`.
//!
//! The Hamiltonian conserves `N_mol + n₁` and `n₁ = n₂`, so each molecular
//! Fock component `|n⟩` evolves inside the sector spanned by
//! `|n - k, k, k⟩`. For fermions `k ∈ {0, 1}` and the sector is a two-level
//! Rabi problem with frequency `√n`; for bosons it is the tridiagonal chain
//! `⟨k + 1|Ĥ|k⟩ = √(n - k) (k + 1)`. Sector results are averaged with
//! Poisson weights.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dissociation::Statistics;
use crate::error::{Error, Result};

/// Largest Poisson tail mass allowed beyond the molecule cutoff.
pub const POISSON_TAIL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumberStatePoint {
    pub t: f64,
    pub n1: f64,
    pub molecules: f64,
}

fn poisson(n: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    (n as f64 * mean.ln() - mean - ln_fact).exp()
}

/// Poisson mass at and above `cutoff`.
fn poisson_tail(cutoff: usize, mean: f64) -> f64 {
    let mut tail = 0.0;
    let mut n = cutoff;
    loop {
        let p = poisson(n, mean);
        tail += p;
        if n as f64 > mean && p < 1e-18 * tail.max(1e-300) {
            break;
        }
        if p == 0.0 && n as f64 > mean {
            break;
        }
        n += 1;
    }
    tail
}

/// Smallest molecule cutoff whose Poisson tail is below the tolerance.
pub fn poisson_cutoff(mean: f64) -> usize {
    let mut cutoff = mean.ceil() as usize + 1;
    while poisson_tail(cutoff, mean) >= POISSON_TAIL_TOL {
        cutoff += 1;
    }
    cutoff
}

/// `⟨n₁(t)⟩` and `⟨N_mol(t)⟩` on `t_grid`, summing molecular Fock
/// components `n < cutoff`.
pub fn dissociation_oracle(
    kind: Statistics,
    n_mean: f64,
    cutoff: usize,
    t_grid: &[f64],
) -> Result<Vec<NumberStatePoint>> {
    if !(n_mean >= 0.0 && n_mean.is_finite()) {
        return Err(Error::InvalidParameter(format!("mean molecule number must be >= 0, got {n_mean}")));
    }
    let tail = poisson_tail(cutoff, n_mean);
    if tail >= POISSON_TAIL_TOL {
        return Err(Error::InvalidParameter(format!(
            "molecule cutoff {cutoff} leaves Poisson tail {tail:e} (need < {POISSON_TAIL_TOL:e}); use at least {}",
            poisson_cutoff(n_mean)
        )));
    }
    let mut n1 = vec![0.0; t_grid.len()];
    for n in 1..cutoff {
        let p = poisson(n, n_mean);
        if p == 0.0 {
            continue;
        }
        match kind {
            Statistics::Fermionic => {
                let omega = (n as f64).sqrt();
                for (acc, &t) in n1.iter_mut().zip(t_grid) {
                    *acc += p * (omega * t).sin().powi(2);
                }
            }
            Statistics::Bosonic => {
                let mut h = DMatrix::<f64>::zeros(n + 1, n + 1);
                for k in 0..n {
                    let c = ((n - k) as f64).sqrt() * (k + 1) as f64;
                    h[(k, k + 1)] = c;
                    h[(k + 1, k)] = c;
                }
                let eig = SymmetricEigen::new(h);
                for (acc, &t) in n1.iter_mut().zip(t_grid) {
                    let mut mean_k = 0.0;
                    for k in 0..=n {
                        let (mut re, mut im) = (0.0, 0.0);
                        for j in 0..=n {
                            let amp = eig.eigenvectors[(k, j)] * eig.eigenvectors[(0, j)];
                            let phase = eig.eigenvalues[j] * t;
                            re += amp * phase.cos();
                            im -= amp * phase.sin();
                        }
                        mean_k += k as f64 * (re * re + im * im);
                    }
                    *acc += p * mean_k;
                }
            }
        }
    }
    Ok(t_grid.iter().zip(n1).map(|(&t, n1)| NumberStatePoint { t, n1, molecules: n_mean - n1 }).collect())
}
