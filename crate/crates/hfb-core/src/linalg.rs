//! Dense complex linear algebra for kernel matrices.
//!
//! Everything here is deterministic: no randomized pivoting, no
//! parallel reductions, so repeated runs are bit-identical.

use num_complex::Complex64;

use crate::error::{HfbError, Result};

/// `c = scale * a * b` for square row-major matrices of order `n`.
pub fn matmul_scaled(a: &[Complex64], b: &[Complex64], n: usize, scale: f64) -> Vec<Complex64> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n * n);
    let mut c = vec![Complex64::default(); n * n];
    for i in 0..n {
        let arow = &a[i * n..(i + 1) * n];
        let crow = &mut c[i * n..(i + 1) * n];
        for (k, &aik) in arow.iter().enumerate() {
            if aik == Complex64::default() {
                continue;
            }
            let brow = &b[k * n..(k + 1) * n];
            for (cv, &bkj) in crow.iter_mut().zip(brow.iter()) {
                *cv += aik * bkj;
            }
        }
    }
    if scale != 1.0 {
        for v in c.iter_mut() {
            *v *= scale;
        }
    }
    c
}

/// Attempted Cholesky factorization of a hermitian matrix (lower triangular,
/// in place). Returns false if a pivot fails, i.e. the matrix is not
/// positive definite within roundoff.
fn cholesky_in_place(a: &mut [Complex64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = Complex64::new(d, 0.0);
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// True if the hermitian matrix `a - shift*I` is positive definite.
pub fn is_pd_shifted(a: &[Complex64], n: usize, shift: f64) -> bool {
    let mut m = a.to_vec();
    for i in 0..n {
        m[i * n + i] -= shift;
    }
    cholesky_in_place(&mut m, n)
}

/// Row-sum norm `max_i sum_j |a_ij|`.
pub fn row_sum_norm(a: &[Complex64], n: usize) -> f64 {
    (0..n)
        .map(|i| a[i * n..(i + 1) * n].iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0f64, f64::max)
}

/// Column-sum norm `max_j sum_i |a_ij|`.
pub fn col_sum_norm(a: &[Complex64], n: usize) -> f64 {
    let mut sums = vec![0.0f64; n];
    for i in 0..n {
        for j in 0..n {
            sums[j] += a[i * n + j].norm();
        }
    }
    sums.into_iter().fold(0.0f64, f64::max)
}

/// Rigorous spectral-norm upper bound `sqrt(norm_1 * norm_inf)`.
pub fn schur_norm_bound(a: &[Complex64], n: usize) -> f64 {
    (row_sum_norm(a, n) * col_sum_norm(a, n)).sqrt()
}

/// Smallest eigenvalue of a hermitian matrix by Cholesky bisection,
/// to absolute tolerance `tol`.
pub fn min_eig_hermitian(a: &[Complex64], n: usize, tol: f64) -> f64 {
    let bound = schur_norm_bound(a, n).max(tol);
    // Invariant: a - lo*I is PD (or lo is below every eigenvalue),
    // a - hi*I is not PD.
    let mut lo = -bound * (1.0 + 1e-12) - tol;
    let mut hi = bound * (1.0 + 1e-12) + tol;
    if is_pd_shifted(a, n, hi) {
        return hi;
    }
    if !is_pd_shifted(a, n, lo) {
        return lo;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if is_pd_shifted(a, n, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest singular value by power iteration on `a* a`, deterministic
/// fixed start vector. Accurate to ~1e-10 relative for well-separated
/// leading singular values; always a lower bound up to iteration error.
pub fn op_norm_power(a: &[Complex64], n: usize, iters: usize) -> f64 {
    let mut v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + (i as f64 * 0.7368).sin() * 0.3, (i as f64 * 0.2931).cos() * 0.3))
        .collect();
    let mut av = vec![Complex64::default(); n];
    let mut atav = vec![Complex64::default(); n];
    let mut sigma2 = 0.0f64;
    for _ in 0..iters {
        for (i, slot) in av.iter_mut().enumerate() {
            let mut s = Complex64::default();
            for (j, &vj) in v.iter().enumerate() {
                s += a[i * n + j] * vj;
            }
            *slot = s;
        }
        for (j, slot) in atav.iter_mut().enumerate() {
            let mut s = Complex64::default();
            for i in 0..n {
                s += a[i * n + j].conj() * av[i];
            }
            *slot = s;
        }
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let rayleigh: f64 = v
            .iter()
            .zip(atav.iter())
            .map(|(x, y)| (x.conj() * y).re)
            .sum::<f64>()
            / vnorm2.max(f64::MIN_POSITIVE);
        sigma2 = rayleigh.max(0.0);
        let nrm = atav.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return 0.0;
        }
        for (slot, &x) in v.iter_mut().zip(atav.iter()) {
            *slot = x / nrm;
        }
    }
    sigma2.sqrt()
}

/// Inverse of a general complex matrix via LU with partial pivoting.
/// Also reports the 1-norm condition estimate `norm1(a) * norm1(inv)`.
pub fn invert(a: &[Complex64], n: usize) -> Result<(Vec<Complex64>, f64)> {
    let mut lu = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = lu[k * n + k].norm();
        for i in (k + 1)..n {
            let m = lu[i * n + k].norm();
            if m > best {
                best = m;
                p = i;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(HfbError::Numeric("singular matrix in invert".into()));
        }
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
        }
        let pivot = lu[k * n + k];
        for i in (k + 1)..n {
            let f = lu[i * n + k] / pivot;
            lu[i * n + k] = f;
            for j in (k + 1)..n {
                let sub = f * lu[k * n + j];
                lu[i * n + j] -= sub;
            }
        }
    }
    // Solve A X = I column by column.
    let mut inv = vec![Complex64::default(); n * n];
    let mut col = vec![Complex64::default(); n];
    for c in 0..n {
        for (i, slot) in col.iter_mut().enumerate() {
            *slot = if perm[i] == c { Complex64::new(1.0, 0.0) } else { Complex64::default() };
        }
        for i in 1..n {
            for k in 0..i {
                let sub = lu[i * n + k] * col[k];
                col[i] -= sub;
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let sub = lu[i * n + k] * col[k];
                col[i] -= sub;
            }
            col[i] /= lu[i * n + i];
        }
        for i in 0..n {
            inv[i * n + c] = col[i];
        }
    }
    let cond = col_sum_norm(a, n) * col_sum_norm(&inv, n);
    Ok((inv, cond))
}
