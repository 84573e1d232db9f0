//! Sampled energy and filling on a 2×2 periodic cluster next to exact
//! diagonalization.

use gaussian_qmc::branching::BranchConfig;
use gaussian_qmc::hubbard::{run_imaginary_time, HubbardRunConfig};
use gaussian_qmc::model::HubbardParams;
use gaussian_qmc::oracle::ed_hubbard;

fn main() -> gaussian_qmc::Result<()> {
    let mu: f64 = std::env::args().nth(1).map_or(Ok(2.0), |s| s.parse()).expect("mu must be a number");
    let params = HubbardParams::new(1.0, 4.0, mu, 2, 2, true)?;
    let mut run = HubbardRunConfig::new(2_000, 0.01, 2.0, 5);
    run.record_every = 25;
    run.branching = Some(BranchConfig { interval: 10, target_population: 2_000, seed: 5 });
    let result = run_imaginary_time(&params, &run)?;
    let taus: Vec<f64> = result.points.iter().map(|p| p.tau).collect();
    let exact = ed_hubbard(&params, &params.lattice(), &taus)?;

    println!("mu = {mu}");
    println!("{:>5} {:>18} {:>9} {:>18} {:>9}", "tau", "energy/site", "exact", "filling", "exact");
    for (p, e) in result.points.iter().zip(&exact) {
        let ee = p.energy_per_site.error.unwrap_or(f64::NAN);
        let fe = p.filling.error.unwrap_or(f64::NAN);
        println!(
            "{:5.2} {:9.4} ± {:6.4} {:9.4} {:9.4} ± {:6.4} {:9.4}",
            p.tau, p.energy_per_site.value, ee, e.energy_per_site, p.filling.value, fe, e.filling
        );
    }
    Ok(())
}
