//! Imaginary-time evolution of weighted Hubbard trajectories.
//!
//! Each trajectory carries real number matrices `n↑`, `n↓` and a log-weight
//! that obey the Stratonovich equations
//!
//! ```text
//! dn_σ/dτ   = ½ [ (I - n_σ) Δ¹_σ n_σ + n_σ Δ²_σ (I - n_σ) ]
//! d ln Ω/dτ = -H(n↑, n↓)
//! Δʳ_ij,σ   = t A_ij - δ_ij [ |U| (s n_jj,-σ - n_jj,σ + ½) - μ + f_σ ξʳ_j ]
//! ```
//!
//! with `f↑ = 1`, `f↓ = -s`, `s = sign(U)` and real noises
//! `⟨ξʳ_j(τ) ξʳ'_j'(τ')⟩ = 2|U| δ(τ - τ') δ_jj' δ_rr'`. One pair of noise
//! fields per site is shared by both spins. Everything is real, so weights
//! stay positive.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::branching::{branch, BranchConfig, BranchStats, Ensemble, Walker};
use crate::error::{Error, Result};
use crate::linalg::matmul;
use crate::model::{energy_of, HubbardParams, Lattice};
use crate::phase_space::{init_infinite_temperature, HubbardTrajectory, ObservablePoint};
use crate::sde::{IntegratorConfig, NoiseStream, Scheme, Stepper, DEFAULT_MIDPOINT_ITERATIONS};
use crate::stats::{batched, DEFAULT_BATCHES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    /// Noise sign `f_σ`.
    fn noise_sign(self, s: f64) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -s,
        }
    }
}

/// Per-step noise variance `2|U| / dτ`.
pub fn noise_variance(params: &HubbardParams, dtau: f64) -> f64 {
    2.0 * params.u.abs() / dtau
}

fn check_dims(traj: &HubbardTrajectory, lattice: &Lattice) -> Result<()> {
    if traj.modes() != lattice.sites() {
        return Err(Error::DimensionMismatch { expected: lattice.sites(), got: traj.modes() });
    }
    Ok(())
}

fn check_noise(xi: &[f64], m: usize) -> Result<()> {
    if xi.len() != 2 * m {
        return Err(Error::DimensionMismatch { expected: 2 * m, got: xi.len() });
    }
    Ok(())
}

/// Diagonal part `d_j` of `Δʳ_σ = t A - diag(d)`.
#[inline]
fn delta_diagonal(
    params: &HubbardParams,
    own: &[f64],
    other: &[f64],
    xi_r: &[f64],
    spin: Spin,
    out: &mut [f64],
) {
    let m = out.len();
    let s = params.sign();
    let abs_u = params.u.abs();
    let f = spin.noise_sign(s);
    for j in 0..m {
        let d = j * (m + 1);
        out[j] = abs_u * (s * other[d] - own[d] + 0.5) - params.mu + f * xi_r[j];
    }
}

/// The matrix `Δʳ_σ` for noise set `r ∈ {1, 2}`; `xi` holds `[ξ¹ | ξ²]`.
pub fn delta_matrix(
    traj: &HubbardTrajectory,
    params: &HubbardParams,
    lattice: &Lattice,
    xi: &[f64],
    r: usize,
    spin: Spin,
) -> Result<DMatrix<f64>> {
    check_dims(traj, lattice)?;
    let m = lattice.sites();
    check_noise(xi, m)?;
    if r != 1 && r != 2 {
        return Err(Error::InvalidParameter(format!("noise index r must be 1 or 2, got {r}")));
    }
    let (up, dn, _) = traj.split();
    let (own, other) = match spin {
        Spin::Up => (up, dn),
        Spin::Down => (dn, up),
    };
    let mut diag = vec![0.0; m];
    delta_diagonal(params, own, other, &xi[(r - 1) * m..r * m], spin, &mut diag);
    let mut delta = lattice.adjacency().map(|a| params.t * a as f64);
    for j in 0..m {
        delta[(j, j)] -= diag[j];
    }
    Ok(delta)
}

/// Scratch space for one evaluation of the right-hand side.
#[derive(Debug, Clone)]
struct Workspace {
    d1: Vec<f64>,
    d2: Vec<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(m: usize) -> Self {
        Self { d1: vec![0.0; m], d2: vec![0.0; m], p1: vec![0.0; m * m], p2: vec![0.0; m * m], tmp: vec![0.0; m * m] }
    }
}

/// `½[(I - n)Δ¹n + nΔ²(I - n)]` written into `out`, with
/// `Δʳ = t A - diag(dʳ)`.
fn spin_drift(params: &HubbardParams, lattice: &Lattice, n: &[f64], ws: &mut Workspace, out: &mut [f64]) {
    let m = lattice.sites();
    let Workspace { d1, d2, p1, p2, tmp } = ws;

    // p1 = Δ¹ n, p2 = n Δ²
    for j in 0..m {
        for i in 0..m {
            let k = i + j * m;
            p1[k] = -d1[i] * n[k];
            p2[k] = -n[k] * d2[j];
        }
    }
    if params.t != 0.0 {
        for b in lattice.bonds() {
            let c = params.t * b.count as f64;
            // (A n)_ij += A_{from,to} n_{to,j} with i = from
            for j in 0..m {
                p1[b.from + j * m] += c * n[b.to + j * m];
            }
            // (n A)_ij += n_{i,from} A_{from,to} with j = to
            for i in 0..m {
                p2[i + b.to * m] += c * n[i + b.from * m];
            }
        }
    }

    // out = ½[(p1 - n p1) + (p2 - p2 n)]
    matmul(n, p1, tmp, m);
    for k in 0..m * m {
        out[k] = 0.5 * (p1[k] - tmp[k] + p2[k]);
    }
    matmul(p2, n, tmp, m);
    for k in 0..m * m {
        out[k] -= 0.5 * tmp[k];
    }
}

/// Full right-hand side on the packed state `[n↑ | n↓ | ln Ω]`.
struct Dynamics<'a> {
    params: &'a HubbardParams,
    lattice: &'a Lattice,
    ws: Workspace,
}

impl<'a> Dynamics<'a> {
    fn new(params: &'a HubbardParams, lattice: &'a Lattice) -> Self {
        Self { params, lattice, ws: Workspace::new(lattice.sites()) }
    }

    fn rhs(&mut self, state: &[f64], xi: &[f64], out: &mut [f64]) {
        let m = self.lattice.sites();
        let mm = m * m;
        let (up, rest) = state.split_at(mm);
        let (dn, _) = rest.split_at(mm);
        let (out_up, rest) = out.split_at_mut(mm);
        let (out_dn, out_lw) = rest.split_at_mut(mm);
        let zeros;
        let (xi1, xi2) = if xi.is_empty() {
            zeros = vec![0.0; m];
            (&zeros[..], &zeros[..])
        } else {
            xi.split_at(m)
        };

        delta_diagonal(self.params, up, dn, xi1, Spin::Up, &mut self.ws.d1);
        delta_diagonal(self.params, up, dn, xi2, Spin::Up, &mut self.ws.d2);
        spin_drift(self.params, self.lattice, up, &mut self.ws, out_up);

        delta_diagonal(self.params, dn, up, xi1, Spin::Down, &mut self.ws.d1);
        delta_diagonal(self.params, dn, up, xi2, Spin::Down, &mut self.ws.d2);
        spin_drift(self.params, self.lattice, dn, &mut self.ws, out_dn);

        out_lw[0] = -energy_of(up, dn, self.params, self.lattice);
    }
}

/// Right-hand side of the number-matrix equations for both spins.
pub fn drift(
    traj: &HubbardTrajectory,
    params: &HubbardParams,
    lattice: &Lattice,
    xi: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_dims(traj, lattice)?;
    let m = lattice.sites();
    check_noise(xi, m)?;
    let mut out = vec![0.0; 2 * m * m + 1];
    Dynamics::new(params, lattice).rhs(traj.as_slice(), xi, &mut out);
    if !out.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidParameter("drift is not finite".into()));
    }
    Ok((
        DMatrix::from_column_slice(m, m, &out[..m * m]),
        DMatrix::from_column_slice(m, m, &out[m * m..2 * m * m]),
    ))
}

/// `d ln Ω / dτ = -H(n↑, n↓)`.
pub fn log_weight_derivative(traj: &HubbardTrajectory, params: &HubbardParams, lattice: &Lattice) -> Result<f64> {
    check_dims(traj, lattice)?;
    let (up, dn, _) = traj.split();
    Ok(-energy_of(up, dn, params, lattice))
}

/// Settings for one imaginary-time run.
#[derive(Debug, Clone, PartialEq)]
pub struct HubbardRunConfig {
    pub trajectories: usize,
    pub dtau: f64,
    pub tau_max: f64,
    pub midpoint_iterations: usize,
    pub scheme: Scheme,
    /// Steps between observable records.
    pub record_every: usize,
    pub branching: Option<BranchConfig>,
    pub batches: usize,
    pub seed: u64,
}

impl HubbardRunConfig {
    pub fn new(trajectories: usize, dtau: f64, tau_max: f64, seed: u64) -> Self {
        Self {
            trajectories,
            dtau,
            tau_max,
            midpoint_iterations: DEFAULT_MIDPOINT_ITERATIONS,
            scheme: Scheme::StratonovichMidpoint,
            record_every: 1,
            branching: None,
            batches: DEFAULT_BATCHES,
            seed,
        }
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig { dstep: self.dtau, midpoint_iterations: self.midpoint_iterations, scheme: self.scheme }
    }

    pub fn steps(&self) -> usize {
        (self.tau_max / self.dtau).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.integrator().validate()?;
        if self.trajectories == 0 {
            return Err(Error::InvalidParameter("need at least one trajectory".into()));
        }
        if !(self.tau_max >= 0.0 && self.tau_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau_max must be >= 0, got {}", self.tau_max)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record interval must be >= 1 step".into()));
        }
        if let Some(b) = &self.branching {
            b.validate()?;
        }
        Ok(())
    }
}

/// Integrity counters accumulated over a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunDiagnostics {
    /// Number of (trajectory, step) weight checks performed.
    pub weight_checks: u64,
    /// Steps at which a trajectory with finite number matrices had a weight
    /// that was not a positive real number.
    pub weight_violations: u64,
    /// Trajectories dropped because a step failed: non-finite state or a
    /// midpoint iteration that did not contract.
    pub invalid_trajectories: u64,
    pub branch_events: Vec<BranchStats>,
    /// Smallest and largest population seen, including the initial one.
    pub population_bounds: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImaginaryTimeRun {
    pub points: Vec<ObservablePoint>,
    pub diagnostics: RunDiagnostics,
}

#[derive(Debug, Clone, Copy, Default)]
struct WalkerReport {
    checks: u64,
    violations: u64,
    failed: bool,
}

fn advance_walker(
    walker: &mut Walker,
    params: &HubbardParams,
    seed: u64,
    from_step: usize,
    to_step: usize,
    variance: f64,
    stepper: &mut Stepper,
    dynamics: &mut Dynamics<'_>,
    noise: &mut Vec<f64>,
) -> WalkerReport {
    let mut report = WalkerReport::default();
    if walker.invalid {
        return report;
    }
    let m = walker.trajectory.modes();
    noise.resize(if params.u != 0.0 { 2 * m } else { 0 }, 0.0);
    for step in from_step..to_step {
        if !noise.is_empty() {
            NoiseStream::new(seed, walker.stream_id, step as u64).fill_gaussian(variance, noise);
        }
        let state = walker.trajectory.as_mut_slice();
        let ok = stepper.step(state, noise, |y, xi, out| dynamics.rhs(y, xi, out));
        report.checks += 1;
        let (matrices, lw) = state.split_at(state.len() - 1);
        let matrices_finite = matrices.iter().all(|x| x.is_finite());
        if matrices_finite && (lw[0].is_nan() || lw[0] == f64::INFINITY) {
            report.violations += 1;
        }
        if ok.is_err() {
            walker.invalid = true;
            report.failed = true;
            break;
        }
    }
    report
}

/// Weighted energy per site, filling and same-site `g²` over the valid
/// walkers of `ensemble`, with batch errors.
pub fn estimate_observables(
    ensemble: &Ensemble,
    params: &HubbardParams,
    lattice: &Lattice,
    batches: usize,
) -> Result<ObservablePoint> {
    let walkers: Vec<&HubbardTrajectory> =
        ensemble.walkers().iter().filter(|w| w.is_valid()).map(|w| &w.trajectory).collect();
    if walkers.is_empty() {
        return Err(Error::Extinction { generation: ensemble.generation() });
    }
    for w in &walkers {
        check_dims(w, lattice)?;
    }
    let m = lattice.sites();
    let n = walkers.len();
    let lw: Vec<f64> = walkers.iter().map(|w| w.log_weight()).collect();
    let energy: Vec<f64> = walkers
        .iter()
        .map(|w| {
            let (up, dn, _) = w.split();
            energy_of(up, dn, params, lattice) / m as f64
        })
        .collect();
    let canonical = HubbardParams { mu: 0.0, ..*params };
    let canonical_energy: Vec<f64> = walkers
        .iter()
        .map(|w| {
            let (up, dn, _) = w.split();
            energy_of(up, dn, &canonical, lattice) / m as f64
        })
        .collect();
    let filling: Vec<f64> = walkers
        .iter()
        .map(|w| (0..m).map(|j| w.occupation(0, j) + w.occupation(1, j)).sum::<f64>() / (2 * m) as f64)
        .collect();

    let weights_in = |r: std::ops::Range<usize>| -> Vec<f64> {
        let max = lw[r.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lw[r].iter().map(|x| (x - max).exp()).collect()
    };
    let mean_of = |values: &[f64], r: std::ops::Range<usize>| -> f64 {
        let w = weights_in(r.clone());
        let den: f64 = w.iter().sum();
        w.iter().zip(&values[r]).map(|(w, v)| w * v).sum::<f64>() / den
    };

    let energy_est = batched(n, batches, |r| mean_of(&energy, r));
    let canonical_est = batched(n, batches, |r| mean_of(&canonical_energy, r));
    let filling_est = batched(n, batches, |r| mean_of(&filling, r));
    let g2_est = batched(n, batches, |r| {
        let w = weights_in(r.clone());
        let total: f64 = w.iter().sum();
        let mut g2 = 0.0;
        for j in 0..m {
            let (mut both, mut up, mut dn) = (0.0, 0.0, 0.0);
            for (wi, t) in w.iter().zip(&walkers[r.clone()]) {
                let (a, b) = (t.occupation(0, j), t.occupation(1, j));
                both += wi * a * b;
                up += wi * a;
                dn += wi * b;
            }
            g2 += both * total / (up * dn);
        }
        g2 / m as f64
    });

    Ok(ObservablePoint {
        tau: 0.0,
        energy_per_site: energy_est,
        canonical_energy_per_site: canonical_est,
        filling: filling_est,
        g2: g2_est,
        population: n,
        mean_log_weight: lw.iter().sum::<f64>() / n as f64,
    })
}

/// Runs the imaginary-time sampler from `τ = 0` to `τ_max`, recording
/// observables every `record_every` steps and at the end.
pub fn run_imaginary_time(params: &HubbardParams, config: &HubbardRunConfig) -> Result<ImaginaryTimeRun> {
    params.validate()?;
    config.validate()?;
    let lattice = params.lattice();
    let m = lattice.sites();
    let steps = config.steps();
    let variance = noise_variance(params, config.dtau);
    let integrator = config.integrator();

    let mut ensemble = Ensemble::new(
        (0..config.trajectories).map(|i| Walker::new(init_infinite_temperature(m), i as u64)).collect(),
    );
    let mut diagnostics = RunDiagnostics::default();
    let mut points = Vec::new();

    let record = |ensemble: &Ensemble, step: usize, points: &mut Vec<ObservablePoint>| -> Result<()> {
        let mut p = estimate_observables(ensemble, params, &lattice, config.batches)?;
        p.tau = step as f64 * config.dtau;
        points.push(p);
        Ok(())
    };
    record(&ensemble, 0, &mut points)?;

    let branch_interval = config.branching.map(|b| b.interval).unwrap_or(usize::MAX);
    let mut step = 0;
    while step < steps {
        let next_record = (step / config.record_every + 1) * config.record_every;
        let next_branch = step.checked_div(branch_interval).map_or(usize::MAX, |q| (q + 1).saturating_mul(branch_interval));
        let barrier = next_record.min(next_branch).min(steps);

        let reports: Vec<WalkerReport> = ensemble
            .walkers_mut()
            .par_iter_mut()
            .map_init(
                || (Stepper::new(integrator), Dynamics::new(params, &lattice), Vec::new()),
                |(stepper, dynamics, noise), walker| {
                    advance_walker(walker, params, config.seed, step, barrier, variance, stepper, dynamics, noise)
                },
            )
            .collect();
        for r in &reports {
            diagnostics.weight_checks += r.checks;
            diagnostics.weight_violations += r.violations;
            diagnostics.invalid_trajectories += r.failed as u64;
        }
        step = barrier;

        if let Some(bc) = &config.branching {
            if step % bc.interval == 0 {
                let (next, stats) = branch(&ensemble, bc)?;
                ensemble = next;
                diagnostics.branch_events.push(stats);
            }
        }
        if ensemble.valid_count() == 0 {
            return Err(Error::Extinction { generation: ensemble.generation() });
        }
        if step % config.record_every == 0 || step == steps {
            record(&ensemble, step, &mut points)?;
        }
    }
    diagnostics.population_bounds = ensemble.population_bounds();
    Ok(ImaginaryTimeRun { points, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_lattice;
    use crate::stats::Estimate;

    fn single_site(u: f64, mu: f64) -> (HubbardParams, Lattice) {
        let p = HubbardParams::new(0.0, u, mu, 1, 1, false).unwrap();
        let l = p.lattice();
        (p, l)
    }

    fn diag_traj(up: &[f64], dn: &[f64], lw: f64) -> HubbardTrajectory {
        let u = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(up));
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(dn));
        HubbardTrajectory::from_parts(&u, &d, lw).unwrap()
    }

    #[test]
    fn delta_cancels_at_half_filling() {
        let (p, l) = single_site(2.0, 1.0);
        let t = init_infinite_temperature(1);
        for spin in [Spin::Up, Spin::Down] {
            for r in [1, 2] {
                assert_eq!(delta_matrix(&t, &p, &l, &[0.0, 0.0], r, spin).unwrap()[(0, 0)], 0.0);
            }
        }
    }

    #[test]
    fn delta_without_interaction_is_hopping() {
        let p = HubbardParams::new(0.7, 0.0, 0.0, 2, 2, true).unwrap();
        let l = p.lattice();
        let t = diag_traj(&[0.1, 0.2, 0.3, 0.4], &[0.9, 0.8, 0.7, 0.6], 0.0);
        let d = delta_matrix(&t, &p, &l, &[0.0; 8], 1, Spin::Down).unwrap();
        assert_eq!(d, l.adjacency().map(|a| 0.7 * a as f64));
    }

    #[test]
    fn delta_noise_sign_for_down_spin() {
        let (p, l) = single_site(2.0, 1.0);
        let t = init_infinite_temperature(1);
        let d = delta_matrix(&t, &p, &l, &[1.0, 0.0], 1, Spin::Down).unwrap();
        assert_eq!(d[(0, 0)], 1.0);
        let d = delta_matrix(&t, &p, &l, &[1.0, 0.0], 1, Spin::Up).unwrap();
        assert_eq!(d[(0, 0)], -1.0);
        // Second noise set is used for r = 2 only.
        let d = delta_matrix(&t, &p, &l, &[1.0, 0.0], 2, Spin::Up).unwrap();
        assert_eq!(d[(0, 0)], 0.0);
        // Attractive interaction flips the down-spin sign.
        let (pa, _) = single_site(-2.0, 1.0);
        let d = delta_matrix(&t, &pa, &l, &[1.0, 0.0], 1, Spin::Down).unwrap();
        assert_eq!(d[(0, 0)], -(2.0 * (-0.5 - 0.5 + 0.5) - 1.0 + 1.0));
    }

    #[test]
    fn delta_rejects_bad_inputs() {
        let (p, l) = single_site(2.0, 1.0);
        let t = init_infinite_temperature(1);
        assert!(delta_matrix(&t, &p, &l, &[0.0], 1, Spin::Up).is_err());
        assert!(delta_matrix(&t, &p, &l, &[0.0, 0.0], 3, Spin::Up).is_err());
        let big = init_infinite_temperature(2);
        assert!(delta_matrix(&big, &p, &l, &[0.0, 0.0], 1, Spin::Up).is_err());
    }

    #[test]
    fn stationary_point_at_half_filling() {
        let (p, l) = single_site(2.0, 1.0);
        let (du, dd) = drift(&init_infinite_temperature(1), &p, &l, &[0.0, 0.0]).unwrap();
        assert_eq!(du[(0, 0)], 0.0);
        assert_eq!(dd[(0, 0)], 0.0);
    }

    #[test]
    fn empty_and_full_states_absorb() {
        let p = HubbardParams::new(1.0, 4.0, 0.5, 2, 2, true).unwrap();
        let l = p.lattice();
        let xi = [3.0, -1.0, 0.5, 2.0, -4.0, 1.5, 0.2, -0.7];
        let zero = DMatrix::zeros(4, 4);
        let one = DMatrix::identity(4, 4);
        for (a, b) in [(&zero, &one), (&one, &zero), (&zero, &zero), (&one, &one)] {
            let t = HubbardTrajectory::from_parts(a, b, 0.0).unwrap();
            let (du, dd) = drift(&t, &p, &l, &xi).unwrap();
            assert!(du.iter().all(|&x| x == 0.0));
            assert!(dd.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn drift_matches_dense_formula() {
        let p = HubbardParams::new(0.8, 3.0, 0.4, 3, 2, true).unwrap();
        let l = p.lattice();
        let m = l.sites();
        let up = DMatrix::from_fn(m, m, |i, j| 0.1 * ((i * 3 + j * 5) % 7) as f64);
        let dn = DMatrix::from_fn(m, m, |i, j| 0.05 * ((i * 2 + j) % 9) as f64);
        let t = HubbardTrajectory::from_parts(&up, &dn, 0.0).unwrap();
        let xi: Vec<f64> = (0..2 * m).map(|k| (k as f64 - 5.0) * 0.3).collect();
        let (du, dd) = drift(&t, &p, &l, &xi).unwrap();
        let eye = DMatrix::<f64>::identity(m, m);
        for (spin, n, got) in [(Spin::Up, &up, du), (Spin::Down, &dn, dd)] {
            let d1 = delta_matrix(&t, &p, &l, &xi, 1, spin).unwrap();
            let d2 = delta_matrix(&t, &p, &l, &xi, 2, spin).unwrap();
            let want = ((&eye - n) * d1 * n + n * d2 * (&eye - n)) * 0.5;
            assert!((got - want).amax() < 1e-12);
        }
    }

    #[test]
    fn weight_derivative_by_substitution() {
        let (p, l) = single_site(2.0, 1.0);
        let g = log_weight_derivative(&init_infinite_temperature(1), &p, &l).unwrap();
        assert_eq!(g, 0.5);
        let vac = diag_traj(&[0.0], &[0.0], 0.0);
        assert_eq!(log_weight_derivative(&vac, &p, &l).unwrap(), 0.0);

        let p = HubbardParams::new(1.0, 4.0, 0.3, 2, 2, true).unwrap();
        let l = p.lattice();
        let t = diag_traj(&[0.1, 0.9, 0.4, 0.6], &[0.3, 0.2, 0.8, 0.5], 0.0);
        let h = crate::model::hamiltonian_value(&t.n_up().into_owned(), &t.n_dn().into_owned(), &p, &l).unwrap();
        assert_eq!(log_weight_derivative(&t, &p, &l).unwrap(), -h);
    }

    #[test]
    fn noiseless_single_site_weight_grows_linearly() {
        let (p, _) = single_site(2.0, 1.0);
        let mut cfg = HubbardRunConfig::new(3, 0.01, 1.0, 5);
        cfg.record_every = 25;
        let zero_noise = HubbardParams { u: 0.0, mu: 0.0, ..p };
        let run = run_imaginary_time(&zero_noise, &cfg).unwrap();
        assert!(run.points.iter().all(|pt| pt.mean_log_weight == 0.0));

        let l = p.lattice();
        let mut stepper = Stepper::new(IntegratorConfig::midpoint(0.01));
        let mut dynamics = Dynamics::new(&p, &l);
        let mut t = init_infinite_temperature(1);
        for _ in 0..100 {
            stepper.step(t.as_mut_slice(), &[0.0, 0.0], |y, xi, out| dynamics.rhs(y, xi, out)).unwrap();
        }
        assert_eq!(t.n_up()[(0, 0)], 0.5);
        assert!((t.log_weight() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn infinite_temperature_estimates_are_exact() {
        for (t, u, mu) in [(1.0, 4.0, 0.0), (0.3, 4.0, 0.0), (1.0, 2.0, 1.0)] {
            let p = HubbardParams::new(t, u, mu, 2, 2, true).unwrap();
            let l = p.lattice();
            let ens = Ensemble::new((0..40).map(|i| Walker::new(init_infinite_temperature(4), i)).collect());
            let pt = estimate_observables(&ens, &p, &l, 20).unwrap();
            assert_eq!(pt.energy_per_site.value, u / 4.0 - mu);
            assert_eq!(pt.energy_per_site.error, Some(0.0));
            assert_eq!(pt.canonical_energy_per_site.value, u / 4.0);
            assert_eq!(pt.filling.value, 0.5);
            assert_eq!(pt.g2.value, 1.0);
            assert_eq!(pt.g2.error, Some(0.0));
        }
    }

    #[test]
    fn constant_observable_with_equal_weights() {
        let p = HubbardParams::new(0.0, 1.0, 0.0, 1, 1, false).unwrap();
        let l = p.lattice();
        let ens = Ensemble::new((0..10).map(|i| Walker::new(diag_traj(&[0.25], &[0.25], 1.5), i)).collect());
        let pt = estimate_observables(&ens, &p, &l, 5).unwrap();
        assert_eq!(pt.filling, Estimate { value: 0.25, error: Some(0.0) });
        let single = estimate_observables(&ens, &p, &l, 1).unwrap();
        assert_eq!(single.filling.error, None);
    }

    #[test]
    fn site_permutation_permutes_estimates() {
        let p = HubbardParams::new(0.5, 3.0, 0.2, 3, 1, true).unwrap();
        let l = build_lattice(3, 1, true);
        let perm = [2, 0, 1];
        let lp = l.permuted(&perm);
        let make = |occ: [f64; 3]| diag_traj(&occ, &[occ[1], occ[2], occ[0]], occ[0]);
        let permute = |t: &HubbardTrajectory| {
            let f = |n: DMatrix<f64>| {
                let mut out = DMatrix::zeros(3, 3);
                for i in 0..3 {
                    for j in 0..3 {
                        out[(perm[i], perm[j])] = n[(i, j)];
                    }
                }
                out
            };
            HubbardTrajectory::from_parts(&f(t.n_up().into_owned()), &f(t.n_dn().into_owned()), t.log_weight())
                .unwrap()
        };
        let trajs = [make([0.1, 0.5, 0.9]), make([0.3, 0.2, 0.6]), make([0.7, 0.4, 0.2]), make([0.5, 0.5, 0.1])];
        let ens = Ensemble::new(trajs.iter().enumerate().map(|(i, t)| Walker::new(t.clone(), i as u64)).collect());
        let ensp = Ensemble::new(trajs.iter().enumerate().map(|(i, t)| Walker::new(permute(t), i as u64)).collect());
        let a = estimate_observables(&ens, &p, &l, 2).unwrap();
        let b = estimate_observables(&ensp, &p, &lp, 2).unwrap();
        assert!((a.energy_per_site.value - b.energy_per_site.value).abs() < 1e-12);
        assert!((a.filling.value - b.filling.value).abs() < 1e-12);
        assert!((a.g2.value - b.g2.value).abs() < 1e-12);
    }

    #[test]
    fn run_records_grid_and_diagnostics() {
        let p = HubbardParams::new(1.0, 4.0, 2.0, 2, 2, true).unwrap();
        let mut cfg = HubbardRunConfig::new(64, 0.01, 0.5, 3);
        cfg.record_every = 10;
        cfg.batches = 4;
        cfg.branching = Some(BranchConfig { interval: 5, target_population: 64, seed: 3 });
        let run = run_imaginary_time(&p, &cfg).unwrap();
        let taus: Vec<f64> = run.points.iter().map(|p| p.tau).collect();
        assert_eq!(taus.len(), 6);
        assert!((taus[5] - 0.5).abs() < 1e-12);
        assert_eq!(run.diagnostics.branch_events.len(), 10);
        assert_eq!(run.diagnostics.weight_violations, 0);
        assert!(run.diagnostics.weight_checks >= 50 * run.diagnostics.population_bounds.0 as u64);
        assert_eq!(run.points[0].energy_per_site.value, 1.0 - 2.0);
    }

    #[test]
    fn run_is_reproducible() {
        let p = HubbardParams::new(1.0, 4.0, 0.0, 2, 1, true).unwrap();
        let mut cfg = HubbardRunConfig::new(50, 0.02, 0.4, 11);
        cfg.record_every = 5;
        cfg.batches = 5;
        cfg.branching = Some(BranchConfig { interval: 4, target_population: 50, seed: 11 });
        let a = run_imaginary_time(&p, &cfg).unwrap();
        let b = run_imaginary_time(&p, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn population_stays_bounded_under_fig2_weights() {
        // 2×2 version of the energy-scan couplings.
        for mu in [0.0, 1.0, 2.0] {
            let p = HubbardParams::new(1.0, 4.0, mu, 2, 2, true).unwrap();
            let target = 200;
            let mut cfg = HubbardRunConfig::new(target, 0.01, 2.0, 17);
            cfg.record_every = 50;
            cfg.branching = Some(BranchConfig { interval: 5, target_population: target, seed: 17 });
            let run = run_imaginary_time(&p, &cfg).unwrap();
            let (lo, hi) = run.diagnostics.population_bounds;
            assert!(lo >= target / 2 && hi <= 2 * target, "mu {mu}: population range {lo}..{hi}");
        }
    }
}
