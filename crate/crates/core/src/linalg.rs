//! Column-major square products for the sampler's inner loop.

const NAIVE_LIMIT: usize = 8;

/// `out = a · b` for `m × m` column-major slices.
pub(crate) fn matmul(a: &[f64], b: &[f64], out: &mut [f64], m: usize) {
    debug_assert_eq!(a.len(), m * m);
    debug_assert_eq!(b.len(), m * m);
    debug_assert_eq!(out.len(), m * m);
    if m <= NAIVE_LIMIT {
        out.fill(0.0);
        for j in 0..m {
            let col = &mut out[j * m..(j + 1) * m];
            for k in 0..m {
                let bkj = b[k + j * m];
                if bkj == 0.0 {
                    continue;
                }
                let acol = &a[k * m..(k + 1) * m];
                for (o, &aik) in col.iter_mut().zip(acol) {
                    *o += aik * bkj;
                }
            }
        }
    } else {
        // SAFETY: all three slices hold m*m elements laid out column-major
        // (row stride 1, column stride m), and `out` does not alias inputs.
        unsafe {
            matrixmultiply::dgemm(
                m,
                m,
                m,
                1.0,
                a.as_ptr(),
                1,
                m as isize,
                b.as_ptr(),
                1,
                m as isize,
                0.0,
                out.as_mut_ptr(),
                1,
                m as isize,
            );
        }
    }
}
