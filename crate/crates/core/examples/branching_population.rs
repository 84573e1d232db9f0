//! Population control on a doped 2×2 cluster: each branch event resamples
//! walkers by weight and drops the ones that diverged.

use gaussian_qmc::branching::BranchConfig;
use gaussian_qmc::hubbard::{run_imaginary_time, HubbardRunConfig};
use gaussian_qmc::model::HubbardParams;

fn main() -> gaussian_qmc::Result<()> {
    let params = HubbardParams::new(1.0, 4.0, 0.0, 2, 2, true)?;
    let mut run = HubbardRunConfig::new(1_000, 0.01, 3.0, 21);
    run.record_every = 50;
    run.branching = Some(BranchConfig { interval: 20, target_population: 1_000, seed: 21 });
    let result = run_imaginary_time(&params, &run)?;
    let d = &result.diagnostics;

    println!("{:>4} {:>7} {:>7} {:>8} {:>8}", "gen", "before", "after", "invalid", "entropy");
    for b in &d.branch_events {
        println!(
            "{:4} {:7} {:7} {:8} {:8.3}",
            b.generation, b.population_before, b.population_after, b.killed_invalid, b.weight_entropy
        );
    }
    println!("population range {:?}, invalid trajectories {}", d.population_bounds, d.invalid_trajectories);
    let last = result.points.last().expect("at least one record");
    println!("energy/site at tau = {}: {:.4}", last.tau, last.energy_per_site.value);
    Ok(())
}
