//! Dense kernels. Matrix products split work by output row, which keeps
//! multi-threaded results bitwise identical to serial execution.

use rayon::prelude::*;

use crate::real::Real;

/// Work threshold below which the serial path is always used.
const PAR_FLOPS: usize = 1 << 18;

/// C[m,n] += A[m,k] * B[k,n]
pub fn matmul<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize, c: &mut [T], parallel: bool) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let row = |i: usize, out: &mut [T]| {
        for kk in 0..k {
            let av = a[i * k + kk];
            if av == T::ZERO {
                continue;
            }
            let brow = &b[kk * n..kk * n + n];
            for (o, bv) in out.iter_mut().zip(brow) {
                *o += av * *bv;
            }
        }
    };
    if parallel && m > 1 && m * k * n >= PAR_FLOPS {
        c.par_chunks_mut(n).enumerate().for_each(|(i, out)| row(i, out));
    } else {
        for (i, out) in c.chunks_mut(n).enumerate() {
            row(i, out);
        }
    }
}

/// C[m,k] += A[m,n] * B^T where B is [k,n] (i.e. dot products of rows).
pub fn matmul_nt<T: Real>(
    a: &[T],
    b: &[T],
    m: usize,
    n: usize,
    k: usize,
    c: &mut [T],
    parallel: bool,
) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * k);
    let row = |i: usize, out: &mut [T]| {
        let arow = &a[i * n..i * n + n];
        for (kk, o) in out.iter_mut().enumerate() {
            let brow = &b[kk * n..kk * n + n];
            let mut acc = T::ZERO;
            for (av, bv) in arow.iter().zip(brow) {
                acc += *av * *bv;
            }
            *o += acc;
        }
    };
    if parallel && m > 1 && m * n * k >= PAR_FLOPS {
        c.par_chunks_mut(k).enumerate().for_each(|(i, out)| row(i, out));
    } else {
        for (i, out) in c.chunks_mut(k).enumerate() {
            row(i, out);
        }
    }
}

/// C[k,n] += A^T * B where A is [m,k], B is [m,n].
pub fn matmul_tn<T: Real>(
    a: &[T],
    b: &[T],
    m: usize,
    k: usize,
    n: usize,
    c: &mut [T],
    parallel: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    let row = |kk: usize, out: &mut [T]| {
        for i in 0..m {
            let av = a[i * k + kk];
            if av == T::ZERO {
                continue;
            }
            let brow = &b[i * n..i * n + n];
            for (o, bv) in out.iter_mut().zip(brow) {
                *o += av * *bv;
            }
        }
    };
    if parallel && k > 1 && m * k * n >= PAR_FLOPS {
        c.par_chunks_mut(n).enumerate().for_each(|(kk, out)| row(kk, out));
    } else {
        for (kk, out) in c.chunks_mut(n).enumerate() {
            row(kk, out);
        }
    }
}
