//! Antibunching on an isolated half-filled site: the sampled `g²(τ)` falls
//! toward zero and tracks the closed form.

use gaussian_qmc::hubbard::{run_imaginary_time, HubbardRunConfig};
use gaussian_qmc::model::HubbardParams;
use gaussian_qmc::oracle::single_site_analytic;

fn main() -> gaussian_qmc::Result<()> {
    let params = HubbardParams::new(0.0, 2.0, 1.0, 1, 1, false)?;
    let mut run = HubbardRunConfig::new(20_000, 0.01, 6.0, 1);
    run.record_every = 50;
    let result = run_imaginary_time(&params, &run)?;

    println!("{:>5} {:>10} {:>10} {:>10} {:>8}", "tau", "g2", "err", "exact", "filling");
    for p in &result.points {
        let (_, exact) = single_site_analytic(params.u, params.mu, p.tau);
        let err = p.g2.error.unwrap_or(f64::NAN);
        println!("{:5.2} {:10.5} {:10.5} {:10.5} {:8.4}", p.tau, p.g2.value, err, exact, p.filling.value);
    }
    println!("weight violations: {}", result.diagnostics.weight_violations);
    Ok(())
}
