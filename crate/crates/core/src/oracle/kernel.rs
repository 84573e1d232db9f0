//! Fock-space materialization of Gaussian kernels
//!
//! ```text
//! Λ = Ω Pf[σ_A] :exp[-â†(I_ext - σ⁻¹/2)â]:
//! σ = [[I - nᵀ, -m], [-m⁺, n - I]]      I_ext = diag(I, -I)
//! â = (a_1 … a_M, a†_1 … a†_M)          â† = (a†_1 … a†_M, a_1 … a_M)
//! ```
//!
//! The normally ordered exponential is expanded in a Grassmann-like algebra
//! whose generators are the `2M` ladder operators, creators first. A
//! monomial is a bitmask over generators read in increasing order, which is
//! already normal order; products pick up one sign per transposition and
//! repeated generators vanish, so the series stops at order `M`. Each
//! monomial then becomes a product of ladder matrices and the result is
//! scaled to unit trace.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::oracle::fock::{annihilators, FockOperator};
use crate::oracle::pfaffian::pfaffian;
use crate::phase_space::GeneralFermiState;

/// Largest mode count accepted by [`materialize_kernel`].
pub const KERNEL_MAX_MODES: usize = 3;
/// Largest mode count accepted by [`check_identities`].
pub const IDENTITY_MAX_MODES: usize = 2;
/// Central-difference step for `∂Λ/∂σ`.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

const SINGULAR_TOL: f64 = 1e-12;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedCovariance {
    pub sigma: DMatrix<Complex64>,
    pub i_ext: DMatrix<Complex64>,
}

impl ExtendedCovariance {
    pub fn from_state(state: &GeneralFermiState) -> Self {
        let m = state.modes();
        let eye = DMatrix::<Complex64>::identity(m, m);
        let mut sigma = DMatrix::zeros(2 * m, 2 * m);
        sigma.view_mut((0, 0), (m, m)).copy_from(&(&eye - state.n().transpose()));
        sigma.view_mut((0, m), (m, m)).copy_from(&(-state.m()));
        sigma.view_mut((m, 0), (m, m)).copy_from(&(-state.m_plus()));
        sigma.view_mut((m, m), (m, m)).copy_from(&(state.n() - &eye));
        Self { sigma, i_ext: extended_identity(m) }
    }

    pub fn modes(&self) -> usize {
        self.sigma.nrows() / 2
    }

    /// Reads `(n, m, m⁺)` back out of `σ`. The pairing blocks are not
    /// symmetrized, so off-manifold perturbations are visible.
    pub fn blocks(&self) -> (DMatrix<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>) {
        let m = self.modes();
        let eye = DMatrix::<Complex64>::identity(m, m);
        let n = (&eye - self.sigma.view((0, 0), (m, m))).transpose();
        let pair = -self.sigma.view((0, m), (m, m)).into_owned();
        let pair_plus = -self.sigma.view((m, 0), (m, m)).into_owned();
        (n, pair, pair_plus)
    }

    /// `σ_A = σ P` with `P` the block swap; antisymmetric on the manifold.
    pub fn sigma_a(&self) -> DMatrix<Complex64> {
        let m = self.modes();
        let mut out = DMatrix::zeros(2 * m, 2 * m);
        out.view_mut((0, 0), (2 * m, m)).copy_from(&self.sigma.columns(m, m));
        out.view_mut((0, m), (2 * m, m)).copy_from(&self.sigma.columns(0, m));
        out
    }
}

fn extended_identity(modes: usize) -> DMatrix<Complex64> {
    let mut i_ext = DMatrix::identity(2 * modes, 2 * modes);
    for k in modes..2 * modes {
        i_ext[(k, k)] = c(-1.0);
    }
    i_ext
}

/// Index of the generator that `â_ν` (or equivalently `â†_{ν±M}`) denotes.
fn partner(nu: usize, modes: usize) -> usize {
    (nu + modes) % (2 * modes)
}

/// Product of two monomials in normal-ordered form; `None` when they share a
/// generator.
fn monomial_product(a: usize, b: usize) -> Option<(f64, usize)> {
    if a & b != 0 {
        return None;
    }
    let mut swaps = 0u32;
    let mut rest = a;
    while rest != 0 {
        let g = rest.trailing_zeros();
        swaps += (b & ((1usize << g) - 1)).count_ones();
        rest &= rest - 1;
    }
    Some((if swaps % 2 == 0 { 1.0 } else { -1.0 }, a | b))
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![c(0.0); a.len()];
    for (ma, &ca) in a.iter().enumerate().filter(|(_, z)| z.norm() != 0.0) {
        for (mb, &cb) in b.iter().enumerate().filter(|(_, z)| z.norm() != 0.0) {
            if let Some((sign, mask)) = monomial_product(ma, mb) {
                out[mask] += sign * ca * cb;
            }
        }
    }
    out
}

fn invert(sigma: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let lu = sigma.clone().lu();
    let scale = sigma.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let det = lu.determinant();
    if !(det.norm() > SINGULAR_TOL * scale.powi(sigma.nrows() as i32)) {
        return Err(Error::SingularCovariance);
    }
    lu.try_inverse().ok_or(Error::SingularCovariance)
}

/// `:exp[-â†Qâ]:` before normalization.
fn unnormalized_kernel(cov: &ExtendedCovariance) -> Result<FockOperator> {
    let m = cov.modes();
    if m > KERNEL_MAX_MODES {
        return Err(Error::SizeCap(format!("kernel materialization supports at most {KERNEL_MAX_MODES} modes, got {m}")));
    }
    let q = &cov.i_ext - invert(&cov.sigma)? * c(0.5);
    let k = 2 * m;
    let terms = 1usize << k;

    let mut x = vec![c(0.0); terms];
    for mu in 0..k {
        for nu in 0..k {
            let (g1, g2) = (mu, partner(nu, m));
            if g1 == g2 {
                continue;
            }
            let sign = if g1 < g2 { 1.0 } else { -1.0 };
            x[(1 << g1) | (1 << g2)] -= sign * q[(mu, nu)];
        }
    }
    let mut series = vec![c(0.0); terms];
    series[0] = c(1.0);
    let mut term = series.clone();
    for order in 1..=m {
        term = poly_mul(&term, &x).into_iter().map(|z| z / order as f64).collect();
        for (s, t) in series.iter_mut().zip(&term) {
            *s += t;
        }
    }

    let a = annihilators(m);
    let generator = |g: usize| if g < m { a[g].transpose() } else { a[g - m].clone() };
    let dim = 1usize << m;
    let mut out = FockOperator::zeros(dim, dim);
    for (mask, coeff) in series.iter().enumerate() {
        if coeff.norm() == 0.0 {
            continue;
        }
        let mut op = FockOperator::identity(dim, dim);
        for g in (0..k).filter(|g| mask >> g & 1 == 1) {
            op *= generator(g);
        }
        out += op * *coeff;
    }
    Ok(out)
}

/// The kernel as a `2^M × 2^M` matrix with trace `Ω`.
pub fn materialize_kernel(state: &GeneralFermiState) -> Result<FockOperator> {
    let raw = unnormalized_kernel(&ExtendedCovariance::from_state(state))?;
    let trace = raw.trace();
    if trace.norm() == 0.0 || !trace.is_finite() {
        return Err(Error::SingularCovariance);
    }
    Ok(raw * (state.omega() / trace))
}

/// Normalization that makes the trace one: `1 / Tr :exp[-â†Qâ]:`.
pub fn trace_normalization(state: &GeneralFermiState) -> Result<Complex64> {
    let raw = unnormalized_kernel(&ExtendedCovariance::from_state(state))?;
    Ok(c(1.0) / raw.trace())
}

/// `Pf[σ_A]` with `σ_A = σP`, including the ordering sign `(-1)^{M(M-1)/2}`
/// that relates the two block orderings.
pub fn pfaffian_normalization(state: &GeneralFermiState) -> Result<Complex64> {
    let cov = ExtendedCovariance::from_state(state);
    let m = cov.modes();
    let sign = if (m * m.saturating_sub(1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * pfaffian(&cov.sigma_a())?)
}

/// Maximum elementwise deviation of each line of the operator identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityDeviations {
    /// `Ω ∂Λ/∂Ω = Λ`
    pub weight: f64,
    /// `:â â† Λ: = -σΛ + σ ∂Λ/∂σ σ`
    pub normal: f64,
    /// `{â :â† Λ:} = σΛ - (σ - I) ∂Λ/∂σ σ`
    pub mixed: f64,
    /// `{â â† Λ} = -(σ - I)Λ + (σ - I) ∂Λ/∂σ (σ - I)`
    pub antinormal: f64,
}

impl IdentityDeviations {
    pub fn max(&self) -> f64 {
        self.weight.max(self.normal).max(self.mixed).max(self.antinormal)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.weight, self.normal, self.mixed, self.antinormal]
    }
}

fn kernel_at(sigma: &DMatrix<Complex64>, omega: Complex64) -> Result<FockOperator> {
    let cov = ExtendedCovariance { sigma: sigma.clone(), i_ext: extended_identity(sigma.nrows() / 2) };
    let raw = unnormalized_kernel(&cov)?;
    let trace = raw.trace();
    Ok(raw * (omega / trace))
}

pub fn check_identities(state: &GeneralFermiState) -> Result<IdentityDeviations> {
    check_identities_with_step(state, DEFAULT_FD_STEP)
}

/// Evaluates all four identity lines with central differences of step `h`.
///
/// `∂Λ/∂σ_{βα}` is taken along `E_{βα} - E_{π(α)π(β)}`, the direction that
/// keeps `σP` antisymmetric; entries that are their own partner have zero
/// derivative.
pub fn check_identities_with_step(state: &GeneralFermiState, h: f64) -> Result<IdentityDeviations> {
    let cov = ExtendedCovariance::from_state(state);
    let m = cov.modes();
    if m > IDENTITY_MAX_MODES {
        return Err(Error::SizeCap(format!("identity check supports at most {IDENTITY_MAX_MODES} modes, got {m}")));
    }
    let scale = cov.sigma.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if !(h.is_finite() && h > 0.0 && scale + h != scale && h >= 1e3 * f64::EPSILON * scale) {
        return Err(Error::StepUnderflow(h));
    }
    let k = 2 * m;
    let omega = state.omega();
    let lambda = kernel_at(&cov.sigma, omega)?;
    let dim = lambda.nrows();

    let mut d = vec![FockOperator::zeros(dim, dim); k * k];
    for alpha in 0..k {
        for beta in 0..k {
            let (r, col) = (beta, alpha);
            let (pr, pc) = (partner(alpha, m), partner(beta, m));
            if (pr, pc) == (r, col) {
                continue;
            }
            let mut dir = DMatrix::<Complex64>::zeros(k, k);
            dir[(r, col)] += c(1.0);
            dir[(pr, pc)] -= c(1.0);
            let plus = kernel_at(&(&cov.sigma + &dir * c(h)), omega)?;
            let minus = kernel_at(&(&cov.sigma - &dir * c(h)), omega)?;
            d[alpha * k + beta] = (plus - minus) / c(2.0 * h);
        }
    }

    let sandwich = |x: &DMatrix<Complex64>, y: &DMatrix<Complex64>, mu: usize, nu: usize| {
        let mut out = FockOperator::zeros(dim, dim);
        for alpha in 0..k {
            for beta in 0..k {
                let coeff = x[(mu, alpha)] * y[(beta, nu)];
                if coeff.norm() != 0.0 {
                    out += &d[alpha * k + beta] * coeff;
                }
            }
        }
        out
    };

    let a = annihilators(m);
    let ad: Vec<FockOperator> = a.iter().map(|x| x.transpose()).collect();
    // â_μ and â†_ν with a flag for creation operators.
    let hat = |mu: usize| if mu < m { (&a[mu], false) } else { (&ad[mu - m], true) };
    let hat_dag = |nu: usize| if nu < m { (&ad[nu], true) } else { (&a[nu - m], false) };
    let sigma = &cov.sigma;
    let shifted = sigma - &cov.i_ext;

    let weight = {
        let hw = 0.5 * omega.norm().max(1.0);
        let up = kernel_at(sigma, omega + hw)?;
        let down = kernel_at(sigma, omega - hw)?;
        max_abs(&((up - down) * (omega / (2.0 * hw)) - &lambda))
    };

    let (mut normal, mut mixed, mut antinormal) = (0.0f64, 0.0f64, 0.0f64);
    for mu in 0..k {
        for nu in 0..k {
            let (x, x_cre) = hat(mu);
            let (y, y_cre) = hat_dag(nu);

            let lhs2 = match (x_cre, y_cre) {
                (true, true) => x * y * &lambda,
                (true, false) => x * &lambda * y,
                (false, true) => -(y * &lambda * x),
                (false, false) => &lambda * x * y,
            };
            let inner = if y_cre { y * &lambda } else { &lambda * y };
            let lhs3 = if x_cre { -(&inner * x) } else { x * &inner };
            let lhs4 = match (x_cre, y_cre) {
                (false, false) => x * y * &lambda,
                (false, true) => x * &lambda * y,
                (true, false) => -(y * &lambda * x),
                (true, true) => &lambda * x * y,
            };

            let rhs2 = -(&lambda * sigma[(mu, nu)]) + sandwich(sigma, sigma, mu, nu);
            let rhs3 = &lambda * sigma[(mu, nu)] - sandwich(&shifted, sigma, mu, nu);
            let rhs4 = -(&lambda * shifted[(mu, nu)]) + sandwich(&shifted, &shifted, mu, nu);

            normal = normal.max(max_abs(&(lhs2 - rhs2)));
            mixed = mixed.max(max_abs(&(lhs3 - rhs3)));
            antinormal = antinormal.max(max_abs(&(lhs4 - rhs4)));
        }
    }
    Ok(IdentityDeviations { weight, normal, mixed, antinormal })
}

/// Tolerances for a kernel battery.
pub const TRACE_TOL: f64 = 1e-12;
pub const MOMENT_TOL: f64 = 1e-10;
pub const IDENTITY_TOL: f64 = 1e-6;

/// Outcome for one state of a kernel battery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCheckRow {
    pub index: usize,
    pub modes: usize,
    /// `|Tr Λ - 1|`
    pub trace_deviation: f64,
    /// Largest quadratic-moment error relative to the largest covariance
    /// entry.
    pub moment_deviation: f64,
    /// Present for states small enough for the identity check.
    pub identities: Option<IdentityDeviations>,
}

impl KernelCheckRow {
    pub fn passes(&self) -> bool {
        self.trace_deviation <= TRACE_TOL
            && self.moment_deviation <= MOMENT_TOL
            && self.identities.is_none_or(|d| d.max() < IDENTITY_TOL)
    }
}

/// Largest normwise-relative error of `Tr(a†_i a_j Λ)`, `Tr(a_i a_j Λ)` and
/// `Tr(a†_i a†_j Λ)` against `n`, `m` and `m⁺`.
pub fn moment_deviation(state: &GeneralFermiState, kernel: &FockOperator) -> f64 {
    let modes = state.modes();
    let a = annihilators(modes);
    let scale = [state.n(), state.m(), state.m_plus()]
        .iter()
        .flat_map(|m| m.iter())
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for i in 0..modes {
        for j in 0..modes {
            let got = [
                (a[i].transpose() * &a[j] * kernel).trace(),
                (&a[i] * &a[j] * kernel).trace(),
                (a[i].transpose() * a[j].transpose() * kernel).trace(),
            ];
            let want = [state.n()[(i, j)], state.m()[(i, j)], state.m_plus()[(i, j)]];
            for (g, w) in got.iter().zip(want) {
                worst = worst.max((g - w).norm() / scale);
            }
        }
    }
    worst
}

/// Seeded battery over `count` random states cycling through one to three
/// modes.
pub fn kernel_battery(seed: u64, count: usize) -> Result<Vec<KernelCheckRow>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|index| {
            let modes = 1 + index % KERNEL_MAX_MODES;
            let state = random_state(&mut rng, modes);
            let kernel = materialize_kernel(&state)?;
            let identities = if modes <= IDENTITY_MAX_MODES { Some(check_identities(&state)?) } else { None };
            Ok(KernelCheckRow {
                index,
                modes,
                trace_deviation: (kernel.trace() - state.omega()).norm(),
                moment_deviation: moment_deviation(&state, &kernel),
                identities,
            })
        })
        .collect()
}

fn max_abs(a: &FockOperator) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Random state with number-matrix spectrum uniform on `(0.05, 0.95)`,
/// a Haar-like unitary eigenbasis and independent antisymmetric pairing
/// matrices of Frobenius norm at most `0.2`.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, modes: usize) -> GeneralFermiState {
    let gauss = |rng: &mut R| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    let z = DMatrix::from_fn(modes, modes, |_, _| gauss(rng));
    let basis = z.qr().q();
    let spectrum = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(modes, |_, _| c(rng.random_range(0.05..0.95))));
    let n = &basis * spectrum * basis.adjoint();

    let pairing = |rng: &mut R| {
        let raw = DMatrix::from_fn(modes, modes, |_, _| gauss(rng));
        let anti = (&raw - raw.transpose()) * c(0.5);
        let norm = anti.norm();
        if norm == 0.0 {
            anti
        } else {
            anti * c(rng.random_range(0.0..0.2) / norm)
        }
    };
    let m = pairing(rng);
    let m_plus = pairing(rng);
    GeneralFermiState::new(n, m, m_plus, c(1.0)).expect("constructed pairing matrices are antisymmetric")
}
