//! Dense Hermitian eigensolver (LAPACK `zheevr`).
//!
//! `zheevd` is avoided on purpose: its divide-and-conquer merge goes through
//! `dgemm`, and OpenBLAS 0.3.20's AVX-512 `dgemm` kernel returns wrong products
//! from about n = 300 up, which silently destroys eigenvector orthogonality.
//! `zheevr` needs only complex level-3 BLAS.

use lapack_sys::{__BindgenComplex, zheevr_};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

type Z = __BindgenComplex<f64>;

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a Hermitian
/// matrix. Only the lower triangle of `a` is read.
pub fn eigh(mut a: DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::invalid("eigh needs a square matrix"));
    }
    if n == 0 {
        return Ok((Vec::new(), a));
    }
    let ni = i32::try_from(n).map_err(|_| Error::invalid("matrix too large for LAPACK"))?;
    let mut w = vec![0.0f64; n];
    let mut z = DMatrix::<Complex64>::zeros(n, n);
    let mut isuppz = vec![0i32; 2 * n];
    let (jobz, range, uplo) = (b'V' as std::ffi::c_char, b'A' as std::ffi::c_char, b'L' as std::ffi::c_char);
    let (vl, vu, il, iu, abstol) = (0.0f64, 0.0f64, 0i32, 0i32, 0.0f64);
    let mut m = 0i32;
    let mut info = 0i32;
    let a_ptr = a.as_mut_ptr() as *mut Z;
    let z_ptr = z.as_mut_ptr() as *mut Z;

    let mut work_q = Z { re: 0.0, im: 0.0 };
    let mut rwork_q = 0.0f64;
    let mut iwork_q = 0i32;
    // SAFETY: `Complex64` is `repr(C)` {re, im}, matching the bindgen complex type;
    // nalgebra stores `a` and `z` contiguously in column-major order with leading
    // dimension n, and `isuppz` has the documented 2n entries.
    unsafe {
        zheevr_(
            &jobz, &range, &uplo, &ni, a_ptr, &ni, &vl, &vu, &il, &iu, &abstol, &mut m,
            w.as_mut_ptr(), z_ptr, &ni, isuppz.as_mut_ptr(),
            &mut work_q, &-1, &mut rwork_q, &-1, &mut iwork_q, &-1, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Diagnostics(format!("zheevr workspace query failed: info={info}")));
    }
    let lwork = (work_q.re as i32).max(2 * ni);
    let lrwork = (rwork_q as i32).max(24 * ni);
    let liwork = iwork_q.max(10 * ni);
    let mut work = vec![Z { re: 0.0, im: 0.0 }; lwork as usize];
    let mut rwork = vec![0.0f64; lrwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    // SAFETY: as above; workspace sizes are at least the queried and documented minima.
    unsafe {
        zheevr_(
            &jobz, &range, &uplo, &ni, a_ptr, &ni, &vl, &vu, &il, &iu, &abstol, &mut m,
            w.as_mut_ptr(), z_ptr, &ni, isuppz.as_mut_ptr(),
            work.as_mut_ptr(), &lwork, rwork.as_mut_ptr(), &lrwork,
            iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Diagnostics(format!("zheevr failed: info={info}")));
    }
    if m != ni {
        return Err(Error::Diagnostics(format!("zheevr returned {m} of {n} eigenpairs")));
    }
    Ok((w, z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(n: usize, real: bool) {
        let mut seed = 12345u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let raw = DMatrix::from_fn(n, n, |_, _| Complex64::new(next(), if real { 0.0 } else { next() }));
        let h = &raw + raw.adjoint();
        let (w, v) = eigh(h.clone()).unwrap();
        assert!(w.windows(2).all(|p| p[0] <= p[1]));
        for (k, &wk) in w.iter().enumerate() {
            let col = v.column(k);
            let r = &h * col - col * Complex64::new(wk, 0.0);
            assert!(r.norm() < 1e-10 * (n as f64).sqrt(), "{k}: {}", r.norm());
        }
        let id = v.adjoint() * &v;
        let err = (id - DMatrix::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "n={n}: {err}");
    }

    #[test]
    fn residuals_of_random_hermitian() {
        check(40, false);
    }

    // sizes where the OpenBLAS 0.3.20 AVX-512 dgemm defect broke zheevd
    #[test]
    fn large_real_symmetric_stays_orthonormal() {
        check(512, true);
    }

    #[test]
    fn exactly_degenerate_spectrum() {
        let n = 300;
        let d = DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::new((r % 3) as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let (w, v) = eigh(d).unwrap();
        assert_eq!(w[0], 0.0);
        assert_eq!(w[n - 1], 2.0);
        let err = (v.adjoint() * &v - DMatrix::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }
}
