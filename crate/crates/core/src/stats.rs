//! Weighted estimators over trajectory ensembles.
//!
//! Weights are carried as logarithms and re-exponentiated relative to the
//! largest one, so estimates are unchanged by a uniform log-weight shift.
//! Error bars come from contiguous batches of trajectories: every estimator,
//! ratios included, is recomputed per batch and the spread of the batch
//! values gives the standard error.

use std::ops::Range;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default number of batches for error bars.
pub const DEFAULT_BATCHES: usize = 20;

/// A point estimate with an optional standard error. `error` is `None`
/// when it cannot be defined (fewer than two batches).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: Option<f64>,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, error: Some(0.0) }
    }

    /// Combines a full-ensemble value with per-batch values of the same
    /// estimator.
    pub fn from_batches(value: f64, batch_values: &[f64]) -> Self {
        Self { value, error: standard_error(batch_values) }
    }

    /// Deviation from `reference` in units of the error bar.
    pub fn sigmas_from(&self, reference: f64) -> Option<f64> {
        let err = self.error?;
        let dev = self.value - reference;
        if err == 0.0 {
            return Some(if dev == 0.0 { 0.0 } else { f64::INFINITY });
        }
        Some(dev.abs() / err)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.error.is_none_or(f64::is_finite)
    }
}

/// Standard error of the mean of `batch_values`, `None` below two batches.
pub fn standard_error(batch_values: &[f64]) -> Option<f64> {
    let b = batch_values.len();
    if b < 2 {
        return None;
    }
    let mean = batch_values.iter().sum::<f64>() / b as f64;
    let var = batch_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    Some((var / b as f64).sqrt())
}

fn check_lengths(values: usize, weights: usize) -> Result<()> {
    if values != weights {
        return Err(Error::LengthMismatch { values, weights });
    }
    if values == 0 {
        return Err(Error::Empty);
    }
    Ok(())
}

/// Relative weights `exp(lw_i - max lw)`.
pub fn relative_weights(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    log_weights.iter().map(|lw| (lw - max).exp()).collect()
}

fn shifted_sums<T>(values: &[T], log_weights: &[f64], zero: T, scale: impl Fn(T, f64) -> T) -> Result<(T, f64)>
where
    T: Copy + std::ops::Add<Output = T>,
{
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::InvalidParameter("no trajectory carries positive weight".into()));
    }
    let mut num = zero;
    let mut den = 0.0;
    for (&v, &lw) in values.iter().zip(log_weights) {
        let w = (lw - max).exp();
        if w > 0.0 {
            num = num + scale(v, w);
            den += w;
        }
    }
    Ok((num, den))
}

/// `Σ w_i v_i / Σ w_i` with `w_i = exp(lw_i - max lw)`.
pub fn weighted_mean(values: &[f64], log_weights: &[f64]) -> Result<f64> {
    check_lengths(values.len(), log_weights.len())?;
    let (num, den) = shifted_sums(values, log_weights, 0.0, |v, w| v * w)?;
    Ok(num / den)
}

pub fn weighted_mean_complex(values: &[Complex64], log_weights: &[f64]) -> Result<Complex64> {
    check_lengths(values.len(), log_weights.len())?;
    let (num, den) = shifted_sums(values, log_weights, Complex64::new(0.0, 0.0), |v, w| v * w)?;
    Ok(num / den)
}

/// Contiguous, near-equal partition of `0..len` into `batches` pieces.
pub fn batch_ranges(len: usize, batches: usize) -> Result<Vec<Range<usize>>> {
    if batches < 2 || len < batches {
        return Err(Error::UndefinedError { batches, len });
    }
    Ok((0..batches).map(|b| b * len / batches..(b + 1) * len / batches).collect())
}

/// Standard error of the weighted mean from `batches` contiguous batches.
pub fn batch_error(values: &[f64], log_weights: &[f64], batches: usize) -> Result<f64> {
    check_lengths(values.len(), log_weights.len())?;
    let ranges = batch_ranges(values.len(), batches)?;
    let means = ranges
        .into_iter()
        .map(|r| weighted_mean(&values[r.clone()], &log_weights[r]))
        .collect::<Result<Vec<_>>>()?;
    Ok(standard_error(&means).expect("at least two batches"))
}

/// Evaluates `estimator` on the whole range and on each batch.
pub fn batched<F>(len: usize, batches: usize, estimator: F) -> Estimate
where
    F: Fn(Range<usize>) -> f64,
{
    let value = estimator(0..len);
    match batch_ranges(len, batches) {
        Ok(ranges) => {
            let per: Vec<f64> = ranges.into_iter().map(&estimator).collect();
            Estimate::from_batches(value, &per)
        }
        Err(_) => Estimate { value, error: None },
    }
}

/// Complex counterpart of [`batched`]: errors for real and imaginary parts.
pub fn batched_complex<F>(len: usize, batches: usize, estimator: F) -> (Estimate, Estimate)
where
    F: Fn(Range<usize>) -> Complex64,
{
    let value = estimator(0..len);
    match batch_ranges(len, batches) {
        Ok(ranges) => {
            let per: Vec<Complex64> = ranges.into_iter().map(&estimator).collect();
            let re: Vec<f64> = per.iter().map(|z| z.re).collect();
            let im: Vec<f64> = per.iter().map(|z| z.im).collect();
            (Estimate::from_batches(value.re, &re), Estimate::from_batches(value.im, &im))
        }
        Err(_) => (Estimate { value: value.re, error: None }, Estimate { value: value.im, error: None }),
    }
}
