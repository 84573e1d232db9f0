//! Dense operators on the fermionic occupation basis.
//!
//! Basis state `s` is the bitstring of occupations with mode 0 as the least
//! significant bit. Ladder operators carry the Jordan-Wigner string over
//! lower modes, so `a_k |s⟩ = (-1)^{#occupied modes below k} |s - e_k⟩`.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type FockOperator = DMatrix<Complex64>;

/// Largest mode count for which dense ladder matrices are built.
pub const MAX_MODES: usize = 12;

/// Sign and target of `a_k |s⟩`, or `None` when mode `k` is empty.
#[inline]
pub fn annihilate(s: usize, k: usize) -> Option<(f64, usize)> {
    if s >> k & 1 == 0 {
        return None;
    }
    let sign = if (s & ((1 << k) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    Some((sign, s ^ (1 << k)))
}

/// Sign and target of `a†_k |s⟩`, or `None` when mode `k` is full.
#[inline]
pub fn create(s: usize, k: usize) -> Option<(f64, usize)> {
    if s >> k & 1 == 1 {
        return None;
    }
    let sign = if (s & ((1 << k) - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    Some((sign, s | (1 << k)))
}

/// Annihilation matrices `a_0, …, a_{M-1}`; creation operators are their
/// transposes.
pub fn annihilators(modes: usize) -> Vec<FockOperator> {
    assert!(modes <= MAX_MODES, "{modes} modes exceeds the dense limit of {MAX_MODES}");
    let dim = 1usize << modes;
    (0..modes)
        .map(|k| {
            let mut a = DMatrix::zeros(dim, dim);
            for s in 0..dim {
                if let Some((sign, t)) = annihilate(s, k) {
                    a[(t, s)] = Complex64::new(sign, 0.0);
                }
            }
            a
        })
        .collect()
}

pub fn creators(modes: usize) -> Vec<FockOperator> {
    annihilators(modes).iter().map(|a| a.transpose()).collect()
}
