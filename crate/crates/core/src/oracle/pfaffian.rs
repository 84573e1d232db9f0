//! Pfaffian of a complex antisymmetric matrix by Parlett-Reid elimination
//! with partial pivoting.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const ANTISYMMETRY_TOL: f64 = 1e-12;

pub fn pfaffian(a: &DMatrix<Complex64>) -> Result<Complex64> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    let dev = (a + a.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > ANTISYMMETRY_TOL {
        return Err(Error::NotAntisymmetric(dev));
    }
    if n % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut a = a.clone();
    let mut pf = Complex64::new(1.0, 0.0);
    for k in (0..n.saturating_sub(1)).step_by(2) {
        let (offset, _) = a
            .view((k + 1, k), (n - k - 1, 1))
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, z)| if z.norm() > best.1 { (i, z.norm()) } else { best });
        let kp = k + 1 + offset;
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        let pivot = a[(k, k + 1)];
        if pivot.norm() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        pf *= pivot;
        if k + 2 < n {
            let tau: Vec<Complex64> = (k + 2..n).map(|j| a[(k, j)] / pivot).collect();
            let col: Vec<Complex64> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
    }
    Ok(pf)
}
