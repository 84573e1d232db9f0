//! Exact thermal averages of small Hubbard clusters.
//!
//! Spin-up orbital of site `i` is mode `i`, spin-down is mode `M + i`. The
//! Hamiltonian is assembled in the occupation basis with the same adjacency
//! matrix as the samplers, `H = -t Σ A_ij a†_iσ a_jσ + U Σ n_i↑ n_i↓ - μ N`,
//! and diagonalized densely.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{HubbardParams, Lattice};
use crate::oracle::fock::{annihilate, create};

/// Largest Hilbert-space dimension (four states per site) handled.
pub const ED_MAX_DIMENSION: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdPoint {
    pub tau: f64,
    pub energy_per_site: f64,
    /// Particles per site per spin.
    pub filling: f64,
    /// Site average of `⟨n↑n↓⟩ / (⟨n↑⟩⟨n↓⟩)`.
    pub g2: f64,
}

/// Dense many-body Hamiltonian in the occupation basis.
pub fn hubbard_hamiltonian(params: &HubbardParams, lattice: &Lattice) -> Result<DMatrix<f64>> {
    let sites = lattice.sites();
    let modes = 2 * sites;
    if modes >= usize::BITS as usize || (1usize << modes) > ED_MAX_DIMENSION {
        return Err(Error::SizeCap(format!(
            "exact diagonalization limited to dimension {ED_MAX_DIMENSION}, lattice has {sites} sites"
        )));
    }
    let dim = 1usize << modes;
    let mut h = DMatrix::zeros(dim, dim);
    for s in 0..dim {
        let mut diag = 0.0;
        for i in 0..sites {
            let up = (s >> i & 1) as f64;
            let dn = (s >> (sites + i) & 1) as f64;
            diag += params.u * up * dn - params.mu * (up + dn);
        }
        h[(s, s)] += diag;
        if params.t == 0.0 {
            continue;
        }
        for b in lattice.bonds() {
            for offset in [0, sites] {
                let Some((s1, mid)) = annihilate(s, b.to + offset) else { continue };
                let Some((s2, target)) = create(mid, b.from + offset) else { continue };
                h[(target, s)] -= params.t * b.count as f64 * s1 * s2;
            }
        }
    }
    Ok(h)
}

/// Energy per site, filling and same-site `g²` at each `τ` of the grid for
/// the thermal state `e^{-τH} / Tr e^{-τH}`.
pub fn ed_hubbard(params: &HubbardParams, lattice: &Lattice, tau_grid: &[f64]) -> Result<Vec<EdPoint>> {
    params.validate()?;
    let sites = lattice.sites();
    let h = hubbard_hamiltonian(params, lattice)?;
    let dim = h.nrows();
    let eig = SymmetricEigen::new(h);
    let e = &eig.eigenvalues;
    let v = &eig.eigenvectors;
    let e_min = e.iter().copied().fold(f64::INFINITY, f64::min);

    // Expectations of diagonal operators in every eigenstate.
    let mut up = DMatrix::zeros(dim, sites);
    let mut dn = DMatrix::zeros(dim, sites);
    let mut both = DMatrix::zeros(dim, sites);
    for k in 0..dim {
        for s in 0..dim {
            let p = v[(s, k)] * v[(s, k)];
            if p == 0.0 {
                continue;
            }
            for i in 0..sites {
                let (a, b) = (s >> i & 1 == 1, s >> (sites + i) & 1 == 1);
                if a {
                    up[(k, i)] += p;
                }
                if b {
                    dn[(k, i)] += p;
                }
                if a && b {
                    both[(k, i)] += p;
                }
            }
        }
    }

    let mut out = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let w: Vec<f64> = e.iter().map(|ek| (-tau * (ek - e_min)).exp()).collect();
        let z: f64 = w.iter().sum();
        let avg = |f: &dyn Fn(usize) -> f64| w.iter().enumerate().map(|(k, wk)| wk * f(k)).sum::<f64>() / z;
        let energy = avg(&|k| e[k]);
        let mut filling = 0.0;
        let mut g2 = 0.0;
        for i in 0..sites {
            let (nu, nd, nb) = (avg(&|k| up[(k, i)]), avg(&|k| dn[(k, i)]), avg(&|k| both[(k, i)]));
            filling += nu + nd;
            g2 += nb / (nu * nd);
        }
        out.push(EdPoint {
            tau,
            energy_per_site: energy / sites as f64,
            filling: filling / (2 * sites) as f64,
            g2: g2 / sites as f64,
        });
    }
    Ok(out)
}
