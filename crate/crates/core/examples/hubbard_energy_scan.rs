//! Energy per site and filling against chemical potential on a periodic
//! lattice at fixed inverse temperature.
//!
//! `cargo run --release --example hubbard_energy_scan -- 4 2.0`

use gaussian_qmc::branching::BranchConfig;
use gaussian_qmc::hubbard::{run_imaginary_time, HubbardRunConfig};
use gaussian_qmc::model::HubbardParams;

fn main() -> gaussian_qmc::Result<()> {
    let mut args = std::env::args().skip(1);
    let l: usize = args.next().map_or(4, |s| s.parse().expect("lattice size"));
    let tau: f64 = args.next().map_or(2.0, |s| s.parse().expect("tau"));

    println!("{l}x{l}, U=4, t=1, tau={tau}");
    println!("{:>5} {:>9} {:>8} {:>9} {:>8}", "mu", "E/site", "err", "filling", "err");
    for mu in [-1.0, 0.0, 1.0, 2.0] {
        let params = HubbardParams::new(1.0, 4.0, mu, l, l, true)?;
        let mut run = HubbardRunConfig::new(400, 0.01, tau, 9);
        run.record_every = run.steps().max(1);
        run.branching = Some(BranchConfig { interval: 10, target_population: 400, seed: 9 });
        let result = run_imaginary_time(&params, &run)?;
        let p = result.points.last().expect("at least one record");
        println!(
            "{mu:5.1} {:9.4} {:8.4} {:9.4} {:8.4}",
            p.energy_per_site.value,
            p.energy_per_site.error.unwrap_or(f64::NAN),
            p.filling.value,
            p.filling.error.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
