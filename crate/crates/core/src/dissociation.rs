//! Real-time dissociation of a molecular condensate into atom pairs.
//!
//! One molecular mode `â` couples to two atomic modes through
//! `Ĥ = â† b̂₁ b̂₂ + h.c.`. The atoms are bosons or fermions; the phase space
//! is `(α, α⁺, n₁, n₂, m, m⁺)` and evolves as
//!
//! ```text
//! ṅ_j = i(α⁺m - αm⁺) ± √i n_j (m ζ₁* + m⁺ ζ₂*)
//! ṁ   = -iα(1 ± n₁ ± n₂) + √i (± m² ζ₁* + n₁n₂ ζ₂*)
//! ṁ⁺  =  iα⁺(1 ± n₁ ± n₂) + √i (n₁n₂ ζ₁* ± m⁺² ζ₂*)
//! α̇   = -i m - √i ζ₁
//! α̇⁺  =  i m⁺ + √i ζ₂
//! ```
//!
//! with `+` for bosons, `-` for fermions and complex noises satisfying
//! `⟨ζ_k ζ_k'⟩ = 0`, `⟨ζ_k ζ*_k'⟩ = δ_kk' δ(t - t')`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sde::{IntegratorConfig, NoiseStream, Scheme, Stepper, DEFAULT_MIDPOINT_ITERATIONS};
use crate::stats::{batched, Estimate, DEFAULT_BATCHES};

/// Batch error of `⟨n₁⟩` beyond which the reported series is cut.
pub const DEFAULT_ERROR_CEILING: f64 = 0.1;

const FLAT_LEN: usize = 12;
const NOISE_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistics {
    Bosonic,
    Fermionic,
}

impl Statistics {
    pub fn name(&self) -> &'static str {
        match self {
            Statistics::Bosonic => "bose",
            Statistics::Fermionic => "fermi",
        }
    }

    /// `+1` for bosons, `-1` for fermions.
    pub fn sign(&self) -> f64 {
        match self {
            Statistics::Bosonic => 1.0,
            Statistics::Fermionic => -1.0,
        }
    }
}

impl fmt::Display for Statistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bose" | "bosonic" | "boson" => Ok(Statistics::Bosonic),
            "fermi" | "fermionic" | "fermion" => Ok(Statistics::Fermionic),
            other => Err(Error::InvalidParameter(format!("unknown statistics {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DissociationState {
    pub alpha: Complex64,
    pub alpha_plus: Complex64,
    pub n1: Complex64,
    pub n2: Complex64,
    pub m: Complex64,
    pub m_plus: Complex64,
}

impl DissociationState {
    /// Molecular coherent state with mean number `n_mean` and empty atoms.
    pub fn coherent(n_mean: f64) -> Self {
        let a = Complex64::new(n_mean.sqrt(), 0.0);
        Self { alpha: a, alpha_plus: a, ..Self::default() }
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|x| x.is_finite())
    }

    fn to_flat(self) -> [f64; FLAT_LEN] {
        let mut out = [0.0; FLAT_LEN];
        for (k, z) in [self.alpha, self.alpha_plus, self.n1, self.n2, self.m, self.m_plus].into_iter().enumerate() {
            out[2 * k] = z.re;
            out[2 * k + 1] = z.im;
        }
        out
    }

    fn from_flat(y: &[f64]) -> Self {
        let z = |k: usize| Complex64::new(y[2 * k], y[2 * k + 1]);
        Self { alpha: z(0), alpha_plus: z(1), n1: z(2), n2: z(3), m: z(4), m_plus: z(5) }
    }
}

/// Time derivative of every phase-space variable for the given noises.
pub fn dissociation_derivative(
    state: &DissociationState,
    zeta1: Complex64,
    zeta2: Complex64,
    kind: Statistics,
) -> DissociationState {
    let s = kind.sign();
    let i = Complex64::i();
    let sqrt_i = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
    let DissociationState { alpha, alpha_plus, n1, n2, m, m_plus } = *state;
    let (c1, c2) = (zeta1.conj(), zeta2.conj());

    let exchange = i * (alpha_plus * m - alpha * m_plus);
    let pair_noise = s * sqrt_i * (m * c1 + m_plus * c2);
    let blocking = 1.0 + s * n1 + s * n2;
    DissociationState {
        alpha: -i * m - sqrt_i * zeta1,
        alpha_plus: i * m_plus + sqrt_i * zeta2,
        n1: exchange + pair_noise * n1,
        n2: exchange + pair_noise * n2,
        m: -i * alpha * blocking + sqrt_i * (s * m * m * c1 + n1 * n2 * c2),
        m_plus: i * alpha_plus * blocking + sqrt_i * (n1 * n2 * c1 + s * m_plus * m_plus * c2),
    }
}

/// Flat right-hand side; `noise` holds `[Re η₁, Im η₁, Re η₂, Im η₂]` with
/// `ζ_k = η_k / √2`.
fn flat_derivative(y: &[f64], noise: &[f64], kind: Statistics, out: &mut [f64]) {
    let z1 = Complex64::new(noise[0], noise[1]) * FRAC_1_SQRT_2;
    let z2 = Complex64::new(noise[2], noise[3]) * FRAC_1_SQRT_2;
    let d = dissociation_derivative(&DissociationState::from_flat(y), z1, z2, kind);
    out.copy_from_slice(&d.to_flat());
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealtimeConfig {
    pub trajectories: usize,
    pub dt: f64,
    pub t_max: f64,
    pub midpoint_iterations: usize,
    pub scheme: Scheme,
    pub record_every: usize,
    pub batches: usize,
    pub error_ceiling: f64,
    pub seed: u64,
}

impl RealtimeConfig {
    pub fn new(trajectories: usize, dt: f64, t_max: f64, seed: u64) -> Self {
        Self {
            trajectories,
            dt,
            t_max,
            midpoint_iterations: DEFAULT_MIDPOINT_ITERATIONS,
            scheme: Scheme::StratonovichMidpoint,
            record_every: 1,
            batches: DEFAULT_BATCHES,
            error_ceiling: DEFAULT_ERROR_CEILING,
            seed,
        }
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig { dstep: self.dt, midpoint_iterations: self.midpoint_iterations, scheme: self.scheme }
    }

    pub fn steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.integrator().validate()?;
        if self.trajectories == 0 {
            return Err(Error::InvalidParameter("need at least one trajectory".into()));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("time_max must be >= 0, got {}", self.t_max)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record interval must be >= 1 step".into()));
        }
        if !(self.error_ceiling > 0.0) {
            return Err(Error::InvalidParameter(format!("error ceiling must be > 0, got {}", self.error_ceiling)));
        }
        Ok(())
    }
}

/// Ensemble estimates at one time; the `_im` fields are the imaginary parts,
/// which vanish in expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct DissociationPoint {
    pub t: f64,
    pub n1: Estimate,
    pub n1_im: Estimate,
    pub n2: Estimate,
    pub n2_im: Estimate,
    /// `⟨α⁺α⟩`
    pub molecules: Estimate,
    pub molecules_im: Estimate,
    /// `⟨α⁺α⟩ + ½(⟨n₁⟩ + ⟨n₂⟩)`
    pub conserved: Estimate,
    pub conserved_im: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealtimeSeries {
    pub kind: Statistics,
    pub n_mean: f64,
    pub points: Vec<DissociationPoint>,
    /// Time at which the series was cut because the `⟨n₁⟩` estimate stopped
    /// being finite or its batch error passed the ceiling.
    pub truncated_at: Option<f64>,
}

fn estimate(states: &[DissociationState], t: f64, batches: usize) -> DissociationPoint {
    let n = states.len();
    let est = |f: &dyn Fn(&DissociationState) -> Complex64| -> (Estimate, Estimate) {
        let values: Vec<Complex64> = states.iter().map(f).collect();
        let mean = |r: std::ops::Range<usize>| values[r.clone()].iter().sum::<Complex64>() / r.len() as f64;
        (batched(n, batches, |r| mean(r).re), batched(n, batches, |r| mean(r).im))
    };
    let (n1, n1_im) = est(&|s| s.n1);
    let (n2, n2_im) = est(&|s| s.n2);
    let (molecules, molecules_im) = est(&|s| s.alpha_plus * s.alpha);
    let (conserved, conserved_im) = est(&|s| s.alpha_plus * s.alpha + 0.5 * (s.n1 + s.n2));
    DissociationPoint { t, n1, n1_im, n2, n2_im, molecules, molecules_im, conserved, conserved_im }
}

/// Integrates an ensemble started from a molecular coherent state with mean
/// number `n_mean`.
pub fn run_realtime(kind: Statistics, n_mean: f64, config: &RealtimeConfig) -> Result<RealtimeSeries> {
    config.validate()?;
    if !(n_mean >= 0.0 && n_mean.is_finite()) {
        return Err(Error::InvalidParameter(format!("mean molecule number must be >= 0, got {n_mean}")));
    }
    let steps = config.steps();
    let variance = 1.0 / config.dt;
    let integrator = config.integrator();
    let mut states: Vec<[f64; FLAT_LEN]> = vec![DissociationState::coherent(n_mean).to_flat(); config.trajectories];

    let snapshot = |states: &[[f64; FLAT_LEN]]| -> Vec<DissociationState> {
        states.iter().map(|y| DissociationState::from_flat(y)).collect()
    };
    let mut series = RealtimeSeries { kind, n_mean, points: Vec::new(), truncated_at: None };
    series.points.push(estimate(&snapshot(&states), 0.0, config.batches));

    let mut step = 0;
    while step < steps {
        let barrier = ((step / config.record_every + 1) * config.record_every).min(steps);
        states.par_iter_mut().enumerate().for_each_init(
            || Stepper::new(integrator),
            |stepper, (id, y)| {
                let mut noise = [0.0; NOISE_LEN];
                for k in step..barrier {
                    NoiseStream::new(config.seed, id as u64, k as u64).fill_gaussian(variance, &mut noise);
                    if stepper.step(y, &noise, |y, xi, out| flat_derivative(y, xi, kind, out)).is_err() {
                        y.fill(f64::NAN);
                        break;
                    }
                }
            },
        );
        step = barrier;
        let t = step as f64 * config.dt;
        let point = estimate(&snapshot(&states), t, config.batches);
        let blown = !point.n1.value.is_finite() || point.n1.error.is_some_and(|e| !(e <= config.error_ceiling));
        if blown {
            series.truncated_at = Some(t);
            break;
        }
        series.points.push(point);
    }
    Ok(series)
}
