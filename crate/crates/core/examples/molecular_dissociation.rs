//! Dissociation of a molecular coherent state into fermionic or bosonic
//! atom pairs, compared with the number-state solution.

use gaussian_qmc::dissociation::{run_realtime, RealtimeConfig, Statistics};
use gaussian_qmc::oracle::{dissociation_oracle, poisson_cutoff};

fn main() -> gaussian_qmc::Result<()> {
    let n_mean = 9.0;
    for kind in [Statistics::Fermionic, Statistics::Bosonic] {
        let mut cfg = RealtimeConfig::new(4_000, 0.001, 1.0, 3);
        cfg.record_every = 50;
        let series = run_realtime(kind, n_mean, &cfg)?;
        let t: Vec<f64> = series.points.iter().map(|p| p.t).collect();
        let exact = dissociation_oracle(kind, n_mean, poisson_cutoff(n_mean), &t)?;

        println!("{kind}: sampling stops at t = {:?}", series.truncated_at);
        for (p, e) in series.points.iter().zip(&exact) {
            let err = p.n1.error.unwrap_or(f64::NAN);
            println!("  t={:4.2}  n1 {:7.4} ± {:6.4}  exact {:7.4}  conserved {:7.3}", p.t, p.n1.value, err, e.n1, p.conserved.value);
        }
    }
    Ok(())
}
