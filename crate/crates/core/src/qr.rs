//! Householder QR with column pivoting for dense least squares.

use rayon::prelude::*;

use crate::scalar::Real;

/// Solution of `min ||A x - b||` from a rank-revealing factorisation.
#[derive(Debug, Clone)]
pub struct LstsqSolution<T> {
    /// Coefficients in the original column order; dropped columns get zero.
    pub coef: Vec<T>,
    /// Original indices of columns left out as numerically dependent, ascending.
    pub dropped: Vec<usize>,
    pub rank: usize,
}

/// Solves the least-squares problem for the column-major `m x n` matrix `a`.
///
/// Columns are pivoted by largest remaining norm; factorisation stops once that norm
/// falls below `drop_tol` times the largest initial column norm. `a` and `b` are
/// overwritten.
pub fn lstsq_pivoted<T: Real>(
    a: &mut [T],
    b: &mut [T],
    m: usize,
    n: usize,
    drop_tol: T,
) -> LstsqSolution<T> {
    assert_eq!(a.len(), m * n);
    assert_eq!(b.len(), m);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut diag = vec![T::zero(); n];
    let kmax = m.min(n);

    let col_norm = |col: &[T], from: usize| -> T {
        col[from..].iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
    };
    let reference = a
        .par_chunks(m)
        .map(|c| col_norm(c, 0))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(T::zero(), |x, y| x.max(y));

    let mut rank = 0;
    if reference > T::zero() {
        for k in 0..kmax {
            let norms: Vec<T> = a[k * m..].par_chunks(m).map(|c| col_norm(c, k)).collect();
            let (rel, best) = norms
                .iter()
                .enumerate()
                .fold((0usize, T::zero()), |(bi, bn), (i, &x)| if x > bn { (i, x) } else { (bi, bn) });
            if best <= drop_tol * reference {
                break;
            }
            let piv = k + rel;
            if piv != k {
                let (lo, hi) = a.split_at_mut(piv * m);
                lo[k * m..(k + 1) * m].swap_with_slice(&mut hi[..m]);
                perm.swap(k, piv);
            }

            let (head, tail) = a.split_at_mut((k + 1) * m);
            let col = &mut head[k * m..];
            let x0 = col[k];
            let alpha = if x0 >= T::zero() { -best } else { best };
            col[k] = x0 - alpha;
            let vtv = col[k..].iter().fold(T::zero(), |acc, &x| acc + x * x);
            diag[k] = alpha;
            rank = k + 1;
            if vtv == T::zero() {
                continue;
            }
            let v = &col[k..];
            let reflect = |target: &mut [T]| {
                let dot = v
                    .iter()
                    .zip(&target[k..])
                    .fold(T::zero(), |acc, (&vi, &ti)| acc + vi * ti);
                let f = T::lit(2.0) * dot / vtv;
                for (ti, &vi) in target[k..].iter_mut().zip(v) {
                    *ti = *ti - f * vi;
                }
            };
            tail.par_chunks_mut(m).for_each(reflect);
            reflect(b);
        }
    }

    // Back substitution on the leading rank x rank block of R.
    let mut z = vec![T::zero(); rank];
    for i in (0..rank).rev() {
        let mut acc = b[i];
        for j in i + 1..rank {
            acc = acc - a[j * m + i] * z[j];
        }
        z[i] = acc / diag[i];
    }
    let mut coef = vec![T::zero(); n];
    for (i, &zi) in z.iter().enumerate() {
        coef[perm[i]] = zi;
    }
    let mut dropped: Vec<usize> = perm[rank..].to_vec();
    dropped.sort_unstable();
    LstsqSolution {
        coef,
        dropped,
        rank,
    }
}
