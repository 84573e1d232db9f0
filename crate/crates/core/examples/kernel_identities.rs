//! Builds explicit Fock-space kernels for random Gaussian states and checks
//! normalization and the differential identities.

use gaussian_qmc::oracle::{
    check_identities, kernel_battery, materialize_kernel, pfaffian_normalization, random_state, trace_normalization,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gaussian_qmc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let state = random_state(&mut rng, 2);
    let kernel = materialize_kernel(&state)?;
    println!("2-mode kernel: {}x{}, trace {:.12}", kernel.nrows(), kernel.ncols(), kernel.trace());
    println!("1/trace of the unnormalized series: {:.12}", trace_normalization(&state)?);
    println!("pfaffian normalization:             {:.12}", pfaffian_normalization(&state)?);
    let d = check_identities(&state)?;
    println!("identity deviations: weight {:.1e}, normal {:.1e}, mixed {:.1e}, antinormal {:.1e}", d.weight, d.normal, d.mixed, d.antinormal);

    let rows = kernel_battery(7, 30)?;
    let passed = rows.iter().filter(|r| r.passes()).count();
    println!("battery: {passed}/{} states pass", rows.len());
    Ok(())
}
