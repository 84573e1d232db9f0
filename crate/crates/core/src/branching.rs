//! Population control for weighted trajectory ensembles.
//!
//! At a branch event each valid trajectory with relative weight
//! `v_i = w_i · target / Σw` is replicated `⌊v_i + u_i⌋` times, `u_i`
//! uniform on `[0, 1)`, and every survivor carries the common weight
//! `Σw / target`. The expected weighted sum of any observable is unchanged.
//! Trajectories whose state went non-finite are removed and counted.

use rand::Rng;

use crate::error::{Error, Result};
use crate::phase_space::HubbardTrajectory;
use crate::sde::{derive_stream_id, NoiseStream};

const BRANCH_STREAM_TAG: u64 = 0xB4A2_C4E5;

/// A trajectory plus the identifier of its noise stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Walker {
    pub trajectory: HubbardTrajectory,
    pub stream_id: u64,
    /// Set once a step of the trajectory failed; it is no longer
    /// advanced or measured and is removed at the next branch event.
    pub invalid: bool,
}

impl Walker {
    pub fn new(trajectory: HubbardTrajectory, stream_id: u64) -> Self {
        Self { trajectory, stream_id, invalid: false }
    }

    /// Valid trajectories may carry zero weight (`ln Ω = -∞`) but nothing
    /// else non-finite.
    pub fn is_valid(&self) -> bool {
        if self.invalid {
            return false;
        }
        let s = self.trajectory.as_slice();
        let (matrices, lw) = s.split_at(s.len() - 1);
        matrices.iter().all(|x| x.is_finite()) && (lw[0].is_finite() || lw[0] == f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    walkers: Vec<Walker>,
    generation: u64,
    min_population: usize,
    max_population: usize,
}

impl Ensemble {
    pub fn new(walkers: Vec<Walker>) -> Self {
        let n = walkers.len();
        Self { walkers, generation: 0, min_population: n, max_population: n }
    }

    pub fn len(&self) -> usize {
        self.walkers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walkers.is_empty()
    }

    pub fn walkers(&self) -> &[Walker] {
        &self.walkers
    }

    pub fn walkers_mut(&mut self) -> &mut [Walker] {
        &mut self.walkers
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Smallest and largest population seen so far.
    pub fn population_bounds(&self) -> (usize, usize) {
        (self.min_population, self.max_population)
    }

    pub fn valid_count(&self) -> usize {
        self.walkers.iter().filter(|w| w.is_valid()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchConfig {
    /// Steps between branch events.
    pub interval: usize,
    pub target_population: usize,
    pub seed: u64,
}

impl BranchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.interval == 0 {
            return Err(Error::InvalidParameter("branch interval must be >= 1".into()));
        }
        if self.target_population < 2 {
            return Err(Error::InvalidParameter("branch target must be >= 2".into()));
        }
        Ok(())
    }
}

/// What happened at one branch event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchStats {
    pub generation: u64,
    pub population_before: usize,
    pub population_after: usize,
    pub killed_invalid: usize,
    /// Shannon entropy of the normalized pre-branch weights.
    pub weight_entropy: f64,
}

/// Copy counts for relative weights `v` using uniforms from the ensemble's
/// branch stream.
fn copy_counts(relative: &[f64], seed: u64, generation: u64) -> Vec<usize> {
    let stream = NoiseStream::new(seed, derive_stream_id(&[BRANCH_STREAM_TAG, generation]), 0);
    let mut rng = stream.rng();
    relative
        .iter()
        .map(|&v| {
            let u: f64 = rng.random();
            (v + u).floor() as usize
        })
        .collect()
}

pub fn branch(ensemble: &Ensemble, config: &BranchConfig) -> Result<(Ensemble, BranchStats)> {
    config.validate()?;
    let generation = ensemble.generation;
    let valid: Vec<bool> = ensemble.walkers.iter().map(Walker::is_valid).collect();
    let killed_invalid = valid.iter().filter(|v| !**v).count();

    let max_lw = ensemble
        .walkers
        .iter()
        .zip(&valid)
        .filter(|(_, ok)| **ok)
        .map(|(w, _)| w.trajectory.log_weight())
        .fold(f64::NEG_INFINITY, f64::max);
    if max_lw == f64::NEG_INFINITY {
        return Err(Error::Extinction { generation });
    }

    let weights: Vec<f64> = ensemble
        .walkers
        .iter()
        .zip(&valid)
        .map(|(w, &ok)| if ok { (w.trajectory.log_weight() - max_lw).exp() } else { 0.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    let target = config.target_population as f64;
    let relative: Vec<f64> = weights.iter().map(|w| w * target / total).collect();
    let weight_entropy = -weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|w| {
            let p = w / total;
            p * p.ln()
        })
        .sum::<f64>();

    let counts = copy_counts(&relative, config.seed, generation);
    let new_lw = max_lw + (total / target).ln();
    let mut walkers = Vec::with_capacity(config.target_population + config.target_population / 4);
    for (parent, &copies) in ensemble.walkers.iter().zip(&counts) {
        for copy in 0..copies {
            let mut trajectory = parent.trajectory.clone();
            trajectory.set_log_weight(new_lw);
            let stream_id = derive_stream_id(&[parent.stream_id, generation, copy as u64]);
            walkers.push(Walker::new(trajectory, stream_id));
        }
    }
    if walkers.is_empty() {
        return Err(Error::Extinction { generation });
    }

    let stats = BranchStats {
        generation,
        population_before: ensemble.len(),
        population_after: walkers.len(),
        killed_invalid,
        weight_entropy,
    };
    let n = walkers.len();
    Ok((
        Ensemble {
            walkers,
            generation: generation + 1,
            min_population: ensemble.min_population.min(n),
            max_population: ensemble.max_population.max(n),
        },
        stats,
    ))
}
