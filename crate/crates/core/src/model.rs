//! Lattice geometry and the Hubbard Hamiltonian evaluated on phase-space
//! number matrices.
//!
//! Site `(x, y)` has index `x + lx * y`. Neighbour sums run over ordered
//! pairs, so every undirected bond appears in both directions. A periodic
//! dimension of extent 2 reaches the same neighbour in both directions and
//! therefore carries a doubled bond.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Couplings and geometry of a Hubbard model
/// `H = -t Σ_<ij>σ n_ij,σ + U Σ_j n_jj↑ n_jj↓ - μ Σ_jσ n_jj,σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HubbardParams {
    pub t: f64,
    pub u: f64,
    pub mu: f64,
    pub lx: usize,
    pub ly: usize,
    pub periodic: bool,
}

impl HubbardParams {
    pub fn new(t: f64, u: f64, mu: f64, lx: usize, ly: usize, periodic: bool) -> Result<Self> {
        let params = Self { t, u, mu, lx, ly, periodic };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lx == 0 || self.ly == 0 {
            return Err(Error::InvalidParameter(format!(
                "lattice extents must be >= 1, got {}x{}",
                self.lx, self.ly
            )));
        }
        for (name, v) in [("t", self.t), ("u", self.u), ("mu", self.mu)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Sign of the interaction; `+1` when `U = 0`.
    pub fn sign(&self) -> f64 {
        if self.u < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn sites(&self) -> usize {
        self.lx * self.ly
    }

    pub fn lattice(&self) -> Lattice {
        build_lattice(self.lx, self.ly, self.periodic)
    }
}

/// A directed nearest-neighbour bond with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub from: usize,
    pub to: usize,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    lx: usize,
    ly: usize,
    periodic: bool,
    adjacency: DMatrix<u32>,
    bonds: Vec<Bond>,
}

impl Lattice {
    pub fn sites(&self) -> usize {
        self.lx * self.ly
    }

    pub fn extents(&self) -> (usize, usize) {
        (self.lx, self.ly)
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    pub fn adjacency(&self) -> &DMatrix<u32> {
        &self.adjacency
    }

    /// Non-zero adjacency entries in column-major order.
    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn site(&self, x: usize, y: usize) -> usize {
        x + self.lx * y
    }

    /// Relabels sites: new site `perm[i]` takes the role of old site `i`.
    pub fn permuted(&self, perm: &[usize]) -> Lattice {
        let m = self.sites();
        assert_eq!(perm.len(), m);
        let mut adjacency = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                adjacency[(perm[i], perm[j])] = self.adjacency[(i, j)];
            }
        }
        Lattice {
            lx: self.lx,
            ly: self.ly,
            periodic: self.periodic,
            bonds: bonds_of(&adjacency),
            adjacency,
        }
    }
}

fn bonds_of(adjacency: &DMatrix<u32>) -> Vec<Bond> {
    let m = adjacency.nrows();
    let mut bonds = Vec::new();
    for to in 0..m {
        for from in 0..m {
            let count = adjacency[(from, to)];
            if count > 0 {
                bonds.push(Bond { from, to, count });
            }
        }
    }
    bonds
}

/// Builds the nearest-neighbour adjacency of an `lx × ly` rectangle.
pub fn build_lattice(lx: usize, ly: usize, periodic: bool) -> Lattice {
    assert!(lx >= 1 && ly >= 1, "lattice extents must be >= 1");
    let m = lx * ly;
    let mut adjacency = DMatrix::<u32>::zeros(m, m);
    let index = |x: usize, y: usize| x + lx * y;

    for y in 0..ly {
        for x in 0..lx {
            let here = index(x, y);
            // +x / -x
            if lx > 1 {
                for step in [1isize, -1] {
                    let nx = x as isize + step;
                    let nx = if periodic {
                        nx.rem_euclid(lx as isize)
                    } else if (0..lx as isize).contains(&nx) {
                        nx
                    } else {
                        continue;
                    };
                    adjacency[(here, index(nx as usize, y))] += 1;
                }
            }
            if ly > 1 {
                for step in [1isize, -1] {
                    let ny = y as isize + step;
                    let ny = if periodic {
                        ny.rem_euclid(ly as isize)
                    } else if (0..ly as isize).contains(&ny) {
                        ny
                    } else {
                        continue;
                    };
                    adjacency[(here, index(x, ny as usize))] += 1;
                }
            }
        }
    }

    Lattice { lx, ly, periodic, bonds: bonds_of(&adjacency), adjacency }
}

/// Energy of a phase-space point, with column-major `m × m` slices.
pub(crate) fn energy_of(n_up: &[f64], n_dn: &[f64], params: &HubbardParams, lattice: &Lattice) -> f64 {
    let m = lattice.sites();
    let mut hopping = 0.0;
    if params.t != 0.0 {
        for b in lattice.bonds() {
            let k = b.from + b.to * m;
            hopping += b.count as f64 * (n_up[k] + n_dn[k]);
        }
    }
    let mut interaction = 0.0;
    let mut number = 0.0;
    for j in 0..m {
        let up = n_up[j * (m + 1)];
        let dn = n_dn[j * (m + 1)];
        interaction += up * dn;
        number += up + dn;
    }
    -params.t * hopping + params.u * interaction - params.mu * number
}

/// `H(n↑, n↓)` with the number matrices standing in for `⟨a†_i a_j⟩`.
pub fn hamiltonian_value(
    n_up: &DMatrix<f64>,
    n_dn: &DMatrix<f64>,
    params: &HubbardParams,
    lattice: &Lattice,
) -> Result<f64> {
    let m = lattice.sites();
    for n in [n_up, n_dn] {
        if n.nrows() != m || n.ncols() != m {
            return Err(Error::DimensionMismatch { expected: m, got: n.nrows().max(n.ncols()) });
        }
    }
    Ok(energy_of(n_up.as_slice(), n_dn.as_slice(), params, lattice))
}
