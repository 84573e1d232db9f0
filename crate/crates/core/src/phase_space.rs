//! Phase-space points of the fermionic Gaussian representation and the
//! moments they stand for.
//!
//! A [`GeneralFermiState`] is the full complex covariance triple
//! `(n, m, m⁺)` with a weight `Ω`. Normally ordered quadratic moments are
//! read off directly:
//!
//! ```text
//! ⟨a†_i a_j⟩ = n_ij     ⟨a_i a_j⟩ = m_ij     ⟨a†_i a†_j⟩ = m⁺_ij
//! ```
//!
//! and quartic moments follow from Wick's theorem. Both conventions are
//! pinned by trace computations against the Fock-space kernel in
//! [`crate::oracle::kernel`].
//!
//! [`HubbardTrajectory`] is the restricted point used by the imaginary-time
//! sampler: real number matrices per spin, no pairing, and a log-weight.

use nalgebra::{DMatrix, DMatrixView};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::stats::Estimate;

const ANTISYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralFermiState {
    n: DMatrix<Complex64>,
    m: DMatrix<Complex64>,
    m_plus: DMatrix<Complex64>,
    omega: Complex64,
}

/// Which quadratic moment to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    /// `⟨a†_i a_j⟩`
    Number,
    /// `⟨a_i a_j⟩`
    Pair,
    /// `⟨a†_i a†_j⟩`
    PairPlus,
}

impl GeneralFermiState {
    /// Builds a state, rejecting pairing matrices that are not antisymmetric
    /// to `1e-12`. Stored pairing matrices are exactly antisymmetric.
    pub fn new(
        n: DMatrix<Complex64>,
        m: DMatrix<Complex64>,
        m_plus: DMatrix<Complex64>,
        omega: Complex64,
    ) -> Result<Self> {
        let modes = n.nrows();
        for mat in [&n, &m, &m_plus] {
            if mat.nrows() != modes || mat.ncols() != modes {
                return Err(Error::DimensionMismatch { expected: modes, got: mat.nrows().max(mat.ncols()) });
            }
        }
        let m = exact_antisymmetric(m)?;
        let m_plus = exact_antisymmetric(m_plus)?;
        Ok(Self { n, m, m_plus, omega })
    }

    pub fn vacuum(modes: usize) -> Self {
        let z = DMatrix::zeros(modes, modes);
        Self { n: z.clone(), m: z.clone(), m_plus: z, omega: Complex64::new(1.0, 0.0) }
    }

    /// Uncorrelated state with diagonal occupations.
    pub fn diagonal(occupations: &[f64]) -> Self {
        let modes = occupations.len();
        let mut s = Self::vacuum(modes);
        for (i, &o) in occupations.iter().enumerate() {
            s.n[(i, i)] = Complex64::new(o, 0.0);
        }
        s
    }

    pub fn modes(&self) -> usize {
        self.n.nrows()
    }

    pub fn n(&self) -> &DMatrix<Complex64> {
        &self.n
    }

    pub fn m(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn m_plus(&self) -> &DMatrix<Complex64> {
        &self.m_plus
    }

    pub fn omega(&self) -> Complex64 {
        self.omega
    }

    pub fn with_omega(mut self, omega: Complex64) -> Self {
        self.omega = omega;
        self
    }

    /// Independent complex entries of `(n, m, m⁺)`: `M(2M - 1)`.
    pub fn free_parameter_count(&self) -> usize {
        let modes = self.modes();
        modes * modes + modes * modes.saturating_sub(1)
    }

    fn check_index(&self, idx: &[usize]) -> Result<()> {
        let modes = self.modes();
        match idx.iter().find(|&&i| i >= modes) {
            Some(&index) => Err(Error::IndexOutOfRange { index, modes }),
            None => Ok(()),
        }
    }

    pub fn quadratic_moment(&self, kind: MomentKind, i: usize, j: usize) -> Result<Complex64> {
        self.check_index(&[i, j])?;
        Ok(match kind {
            MomentKind::Number => self.n[(i, j)],
            MomentKind::Pair => self.m[(i, j)],
            MomentKind::PairPlus => self.m_plus[(i, j)],
        })
    }

    /// Wick expansion of `⟨a†_i a†_j a_k a_l⟩`.
    pub fn quartic_moment(&self, i: usize, j: usize, k: usize, l: usize) -> Result<Complex64> {
        self.check_index(&[i, j, k, l])?;
        let (n, m, mp) = (&self.n, &self.m, &self.m_plus);
        Ok(mp[(i, j)] * m[(k, l)] - n[(i, k)] * n[(j, l)] + n[(i, l)] * n[(j, k)])
    }
}

fn exact_antisymmetric(a: DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let dev = (&a + a.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > ANTISYMMETRY_TOL {
        return Err(Error::NotAntisymmetric(dev));
    }
    Ok((&a - a.transpose()) * Complex64::new(0.5, 0.0))
}

/// `quadratic_moment` as a free function.
pub fn quadratic_moment(state: &GeneralFermiState, kind: MomentKind, i: usize, j: usize) -> Result<Complex64> {
    state.quadratic_moment(kind, i, j)
}

/// `quartic_moment` as a free function.
pub fn quartic_moment(state: &GeneralFermiState, i: usize, j: usize, k: usize, l: usize) -> Result<Complex64> {
    state.quartic_moment(i, j, k, l)
}

/// One imaginary-time sample: real number matrices for each spin plus a
/// log-weight, packed as `[n↑ | n↓ | ln Ω]` with column-major matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct HubbardTrajectory {
    modes: usize,
    state: Vec<f64>,
}

impl HubbardTrajectory {
    pub fn from_parts(n_up: &DMatrix<f64>, n_dn: &DMatrix<f64>, log_weight: f64) -> Result<Self> {
        let modes = n_up.nrows();
        for n in [n_up, n_dn] {
            if n.nrows() != modes || n.ncols() != modes {
                return Err(Error::DimensionMismatch { expected: modes, got: n.nrows().max(n.ncols()) });
            }
        }
        let mut state = Vec::with_capacity(2 * modes * modes + 1);
        state.extend_from_slice(n_up.as_slice());
        state.extend_from_slice(n_dn.as_slice());
        state.push(log_weight);
        Ok(Self { modes, state })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn n_up(&self) -> DMatrixView<'_, f64> {
        let mm = self.modes * self.modes;
        DMatrixView::from_slice(&self.state[..mm], self.modes, self.modes)
    }

    pub fn n_dn(&self) -> DMatrixView<'_, f64> {
        let mm = self.modes * self.modes;
        DMatrixView::from_slice(&self.state[mm..2 * mm], self.modes, self.modes)
    }

    pub fn log_weight(&self) -> f64 {
        self.state[self.state.len() - 1]
    }

    pub fn set_log_weight(&mut self, lw: f64) {
        let last = self.state.len() - 1;
        self.state[last] = lw;
    }

    /// Diagonal occupation `n_jj,σ`; `spin` 0 is up.
    pub fn occupation(&self, spin: usize, site: usize) -> f64 {
        let mm = self.modes * self.modes;
        self.state[spin * mm + site * (self.modes + 1)]
    }

    pub fn is_finite(&self) -> bool {
        self.state.iter().all(|x| x.is_finite())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.state
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.state
    }

    pub(crate) fn split(&self) -> (&[f64], &[f64], f64) {
        let mm = self.modes * self.modes;
        (&self.state[..mm], &self.state[mm..2 * mm], self.state[2 * mm])
    }
}

/// The unnormalised identity `ρ(0) = 1`: every spin-orbital half filled
/// with no correlations.
pub fn init_infinite_temperature(modes: usize) -> HubbardTrajectory {
    assert!(modes >= 1, "need at least one mode");
    let half = DMatrix::identity(modes, modes) * 0.5;
    HubbardTrajectory::from_parts(&half, &half, 0.0).expect("square by construction")
}

/// Weighted Hubbard estimates at one inverse temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservablePoint {
    pub tau: f64,
    /// `⟨H⟩` per site, chemical-potential term included.
    pub energy_per_site: Estimate,
    /// `⟨H + μN⟩` per site: hopping plus interaction only.
    pub canonical_energy_per_site: Estimate,
    pub filling: Estimate,
    pub g2: Estimate,
    pub population: usize,
    pub mean_log_weight: f64,
}
