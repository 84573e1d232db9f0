//! Stochastic integration and counter-based noise.
//!
//! Noise for step `counter` of trajectory `stream_id` under `master_seed`
//! comes from a ChaCha8 stream positioned at a fixed word offset, so the
//! draws depend only on that triple and never on scheduling or on how many
//! values earlier steps consumed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Midpoint iterations used unless configured otherwise.
pub const DEFAULT_MIDPOINT_ITERATIONS: usize = 4;

/// Words of the ChaCha stream reserved per step.
const WORDS_PER_STEP_LOG2: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Semi-implicit midpoint rule; converges to the Stratonovich solution.
    StratonovichMidpoint,
    /// Explicit Euler-Maruyama; converges to the Ito solution.
    EulerMaruyama,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::StratonovichMidpoint => "midpoint",
            Scheme::EulerMaruyama => "euler",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "midpoint" | "stratonovich" | "stratonovich_midpoint" => Ok(Scheme::StratonovichMidpoint),
            "euler" | "euler_maruyama" | "ito" => Ok(Scheme::EulerMaruyama),
            other => Err(format!("unknown scheme `{other}` (expected midpoint or euler)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dstep: f64,
    pub midpoint_iterations: usize,
    pub scheme: Scheme,
}

impl IntegratorConfig {
    pub fn midpoint(dstep: f64) -> Self {
        Self { dstep, midpoint_iterations: DEFAULT_MIDPOINT_ITERATIONS, scheme: Scheme::StratonovichMidpoint }
    }

    pub fn euler(dstep: f64) -> Self {
        Self { dstep, midpoint_iterations: 1, scheme: Scheme::EulerMaruyama }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.midpoint_iterations = iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dstep > 0.0 && self.dstep.is_finite()) {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {}", self.dstep)));
        }
        if self.midpoint_iterations == 0 {
            return Err(Error::InvalidParameter("midpoint_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Address of one step's worth of noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseStream {
    pub master_seed: u64,
    pub stream_id: u64,
    pub counter: u64,
}

impl NoiseStream {
    pub fn new(master_seed: u64, stream_id: u64, counter: u64) -> Self {
        Self { master_seed, stream_id, counter }
    }

    /// Generator positioned at the start of this step's block.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng.set_word_pos((self.counter as u128) << WORDS_PER_STEP_LOG2);
        rng
    }

    /// Fills `out` with independent zero-mean Gaussians of `variance`.
    pub fn fill_gaussian(&self, variance: f64, out: &mut [f64]) {
        if variance == 0.0 {
            out.fill(0.0);
            return;
        }
        let sd = variance.sqrt();
        let mut rng = self.rng();
        for x in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x = sd * z;
        }
    }
}

pub fn gaussian_draws(stream: &NoiseStream, count: usize, variance: f64) -> Result<Vec<f64>> {
    if !(variance >= 0.0) {
        return Err(Error::InvalidParameter(format!("variance must be >= 0, got {variance}")));
    }
    let mut out = vec![0.0; count];
    stream.fill_gaussian(variance, &mut out);
    Ok(out)
}

/// SplitMix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic 64-bit identifier derived from an ordered list of parts.
pub fn derive_stream_id(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6A09_E667_F3BC_C908, |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// Why a step was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepFailure {
    /// The derivative or the new state went non-finite.
    NonFinite,
    /// The midpoint fixed-point iteration grew instead of contracting.
    NotContracting,
}

/// Reusable single-step integrator; holds scratch buffers so the hot loop
/// does not allocate.
#[derive(Debug, Clone)]
pub struct Stepper {
    config: IntegratorConfig,
    bar: Vec<f64>,
    deriv: Vec<f64>,
}

impl Stepper {
    pub fn new(config: IntegratorConfig) -> Self {
        Self { config, bar: Vec::new(), deriv: Vec::new() }
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    /// Advances `y` in place by one step. `derivative(state, noises, out)`
    /// writes the full right-hand side, noise terms included; noises stay
    /// fixed across midpoint iterations.
    ///
    /// A midpoint step fails when its last fixed-point correction is larger
    /// than its first one.
    pub fn step<F>(&mut self, y: &mut [f64], noises: &[f64], mut derivative: F) -> std::result::Result<(), StepFailure>
    where
        F: FnMut(&[f64], &[f64], &mut [f64]),
    {
        let n = y.len();
        let dt = self.config.dstep;
        self.deriv.resize(n, 0.0);
        match self.config.scheme {
            Scheme::EulerMaruyama => {
                derivative(y, noises, &mut self.deriv);
                if !self.deriv.iter().all(|d| d.is_finite()) {
                    return Err(StepFailure::NonFinite);
                }
                for (yi, di) in y.iter_mut().zip(&self.deriv) {
                    *yi += dt * di;
                }
            }
            Scheme::StratonovichMidpoint => {
                self.bar.clear();
                self.bar.extend_from_slice(y);
                let half = 0.5 * dt;
                let mut first = 0.0;
                let mut last = 0.0;
                for k in 0..self.config.midpoint_iterations {
                    derivative(&self.bar, noises, &mut self.deriv);
                    if !self.deriv.iter().all(|d| d.is_finite()) {
                        return Err(StepFailure::NonFinite);
                    }
                    last = 0.0f64;
                    for ((b, yi), di) in self.bar.iter_mut().zip(y.iter()).zip(&self.deriv) {
                        let next = yi + half * di;
                        last = last.max((next - *b).abs());
                        *b = next;
                    }
                    if k == 0 {
                        first = last;
                    }
                }
                if self.config.midpoint_iterations > 1 && !(last <= first) {
                    return Err(StepFailure::NotContracting);
                }
                for (yi, b) in y.iter_mut().zip(&self.bar) {
                    *yi = 2.0 * b - *yi;
                }
            }
        }
        if y.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(StepFailure::NonFinite)
        }
    }
}

/// One semi-implicit midpoint step from `state`.
pub fn step_stratonovich<F>(
    state: &[f64],
    derivative_fn: F,
    noises: &[f64],
    config: &IntegratorConfig,
) -> std::result::Result<Vec<f64>, StepFailure>
where
    F: FnMut(&[f64], &[f64], &mut [f64]),
{
    let mut stepper = Stepper::new(IntegratorConfig { scheme: Scheme::StratonovichMidpoint, ..*config });
    let mut y = state.to_vec();
    stepper.step(&mut y, noises, derivative_fn)?;
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variance_draws_are_zero() {
        let s = NoiseStream::new(1, 2, 3);
        assert!(gaussian_draws(&s, 17, 0.0).unwrap().iter().all(|&x| x == 0.0));
        assert!(gaussian_draws(&s, 3, -1.0).is_err());
    }

    #[test]
    fn million_draws_have_zero_mean_and_requested_variance() {
        let s = NoiseStream::new(42, 0, 0);
        let n = 1_000_000;
        let x = gaussian_draws(&s, n, 2.0).unwrap();
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // SE of the mean is sqrt(2/1e6); SE of the variance is 2*sqrt(2/1e6).
        assert!(mean.abs() < 3.0 * (2.0 / n as f64).sqrt(), "mean {mean}");
        assert!((var - 2.0).abs() < 3.0 * 2.0 * (2.0 / n as f64).sqrt(), "var {var}");
    }

    #[test]
    fn draws_are_addressed_not_sequenced() {
        let a = gaussian_draws(&NoiseStream::new(9, 4, 11), 8, 1.0).unwrap();
        // Touch unrelated addresses in between.
        let _ = gaussian_draws(&NoiseStream::new(9, 4, 10), 1000, 1.0).unwrap();
        let _ = gaussian_draws(&NoiseStream::new(9, 5, 11), 3, 1.0).unwrap();
        let b = gaussian_draws(&NoiseStream::new(9, 4, 11), 8, 1.0).unwrap();
        assert_eq!(a, b);
        let c = gaussian_draws(&NoiseStream::new(9, 4, 12), 8, 1.0).unwrap();
        let d = gaussian_draws(&NoiseStream::new(9, 5, 11), 8, 1.0).unwrap();
        let e = gaussian_draws(&NoiseStream::new(10, 4, 11), 8, 1.0).unwrap();
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(a, e);
        // Prefixes agree regardless of how many are requested.
        let long = gaussian_draws(&NoiseStream::new(9, 4, 11), 20, 1.0).unwrap();
        assert_eq!(&long[..8], &a[..]);
    }

    #[test]
    fn stream_ids_are_order_sensitive() {
        assert_ne!(derive_stream_id(&[1, 2, 3]), derive_stream_id(&[3, 2, 1]));
        assert_eq!(derive_stream_id(&[1, 2, 3]), derive_stream_id(&[1, 2, 3]));
    }

    #[test]
    fn zero_derivative_leaves_state() {
        let y = vec![1.0, -2.0, 3.5];
        let out = step_stratonovich(&y, |_, _, d| d.fill(0.0), &[], &IntegratorConfig::midpoint(0.1)).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn exponential_decay() {
        let cfg = IntegratorConfig::midpoint(0.01);
        let mut stepper = Stepper::new(cfg);
        let mut y = vec![1.0];
        for _ in 0..100 {
            stepper.step(&mut y, &[], |s, _, d| d[0] = -s[0]).unwrap();
        }
        assert!((y[0] - (-1f64).exp()).abs() < 1e-4, "{}", y[0]);
    }

    #[test]
    fn non_finite_derivative_is_flagged() {
        let mut stepper = Stepper::new(IntegratorConfig::midpoint(0.1));
        let mut y = vec![1.0];
        assert_eq!(stepper.step(&mut y, &[], |_, _, d| d[0] = f64::NAN), Err(StepFailure::NonFinite));
        let mut stepper = Stepper::new(IntegratorConfig::euler(0.1));
        assert_eq!(stepper.step(&mut y, &[], |_, _, d| d[0] = f64::INFINITY), Err(StepFailure::NonFinite));
    }

    #[test]
    fn growing_midpoint_iteration_is_flagged() {
        let mut stepper = Stepper::new(IntegratorConfig::midpoint(0.1));
        let mut y = vec![1.0];
        assert_eq!(stepper.step(&mut y, &[], |s, _, d| d[0] = 30.0 * s[0]), Err(StepFailure::NotContracting));
        let mut y = vec![1.0];
        assert!(stepper.step(&mut y, &[], |s, _, d| d[0] = 3.0 * s[0]).is_ok());
        let mut single = Stepper::new(IntegratorConfig::midpoint(0.1).with_iterations(1));
        let mut y = vec![1.0];
        assert!(single.step(&mut y, &[], |s, _, d| d[0] = 30.0 * s[0]).is_ok());
    }

    /// `dy = y ∘ ξ dt` with `⟨ξξ'⟩ = δ(t - t')`: by the ordinary chain rule
    /// `ln y(t)` is the integrated noise, so mean 0 and variance `t`. The Ito
    /// reading of the same equation gives mean `-t/2` instead.
    fn log_moments(config: IntegratorConfig, paths: u64) -> (f64, f64) {
        let dt = config.dstep;
        let steps = (1.0 / dt).round() as u64;
        let mut stepper = Stepper::new(config);
        let mut logs = Vec::with_capacity(paths as usize);
        for p in 0..paths {
            let mut y = vec![1.0];
            let mut xi = [0.0];
            for k in 0..steps {
                NoiseStream::new(5, p, k).fill_gaussian(1.0 / dt, &mut xi);
                stepper.step(&mut y, &xi, |s, noise, d| d[0] = s[0] * noise[0]).unwrap();
            }
            logs.push(y[0].ln());
        }
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn midpoint_follows_stratonovich_chain_rule() {
        let paths = 10_000;
        let (mean, var) = log_moments(IntegratorConfig::midpoint(0.01), paths);
        let n = paths as f64;
        assert!(mean.abs() < 3.0 * (1.0 / n).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn euler_maruyama_follows_ito() {
        let paths = 10_000;
        let (mean, _) = log_moments(IntegratorConfig::euler(0.001), paths);
        assert!((mean + 0.5).abs() < 3.0 * (1.0 / paths as f64).sqrt() + 0.01, "mean {mean}");
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::midpoint(0.0).validate().is_err());
        assert!(IntegratorConfig::midpoint(0.1).with_iterations(0).validate().is_err());
        assert!(IntegratorConfig::midpoint(0.1).validate().is_ok());
        assert_eq!("euler".parse::<Scheme>().unwrap(), Scheme::EulerMaruyama);
        assert!("rk4".parse::<Scheme>().is_err());
    }
}
