//! Small dense complex linear algebra: a row-major matrix, cyclic Jacobi for
//! Hermitian eigenvalues, and power and Lanczos iterations for operator norms.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::default(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A^* x` without forming the adjoint.
    pub fn matvec_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![Complex64::default(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * xi;
            }
        }
        out
    }

    /// Product `self * other`; rows are computed in parallel.
    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows);
        let cols = other.cols;
        let mut data = vec![Complex64::default(); self.rows * cols];
        data.par_chunks_mut(cols).enumerate().for_each(|(i, out)| {
            for (l, &a) in self.row(i).iter().enumerate() {
                if a == Complex64::default() {
                    continue;
                }
                for (o, b) in out.iter_mut().zip(other.row(l)) {
                    *o += a * b;
                }
            }
        });
        CMatrix {
            rows: self.rows,
            cols,
            data,
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobiOutcome {
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    pub sweeps: usize,
    /// Frobenius norm of the off-diagonal part at exit.
    pub off_norm: f64,
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Each rotation first removes the phase of `h_pq` and then applies the real
/// symmetric rotation, so the `(p, q)` entry is annihilated exactly. Sweeps
/// continue until the off-diagonal Frobenius norm is at most
/// `tol * max(1, ||H||_F)`.
pub fn hermitian_eigenvalues(h: &CMatrix, tol: f64, max_sweeps: usize) -> Result<JacobiOutcome> {
    assert_eq!(h.rows(), h.cols(), "matrix must be square");
    let n = h.rows();
    let mut a = h.clone();
    // Symmetrise away rounding noise in the input.
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    let threshold = tol * a.frobenius().max(1.0);
    let mut sweeps = 0;
    let mut off = off_diagonal_norm(&a);
    while off > threshold {
        if sweeps == max_sweeps {
            return Err(Error::NonConvergence {
                iterations: sweeps,
                residual: off,
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, p, q);
            }
        }
        sweeps += 1;
        off = off_diagonal_norm(&a);
    }
    let mut eigenvalues: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    eigenvalues.sort_by(|x, y| y.total_cmp(x));
    Ok(JacobiOutcome {
        eigenvalues,
        sweeps,
        off_norm: off,
    })
}

fn rotate(a: &mut CMatrix, p: usize, q: usize) {
    let hpq = a[(p, q)];
    let g = hpq.norm();
    if g == 0.0 {
        return;
    }
    let phase = hpq / g;
    let (app, aqq) = (a[(p, p)].re, a[(q, q)].re);
    let theta = (aqq - app) / (2.0 * g);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.rows();
    // Columns p, q of H U with U = D R, D = diag(1, conj(phase)) on (p, q).
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let hrp = a[(r, p)];
        let hrq = a[(r, q)] * phase.conj();
        let new_p = hrp * c - hrq * s;
        let new_q = hrp * s + hrq * c;
        a[(r, p)] = new_p;
        a[(r, q)] = new_q;
        a[(p, r)] = new_p.conj();
        a[(q, r)] = new_q.conj();
    }
    a[(p, p)] = Complex64::new(app - t * g, 0.0);
    a[(q, q)] = Complex64::new(aqq + t * g, 0.0);
    a[(p, q)] = Complex64::default();
    a[(q, p)] = Complex64::default();
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormEstimate {
    pub norm: f64,
    pub iterations: usize,
    /// `|| A^*A x - lambda x ||` at the final unit vector.
    pub residual: f64,
    pub converged: bool,
}

pub(crate) fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn random_unit(rng: &mut impl Rng, len: usize) -> Vec<Complex64> {
    let mut x: Vec<Complex64> = (0..len)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let s = norm2(&x);
    x.iter_mut().for_each(|z| *z /= s);
    x
}

/// Power iteration on `A^* A` for an operator given by `apply` and `adjoint`.
///
/// Stops once the Rayleigh quotient `||A x||^2` changes by at most `tol`
/// relative between steps and the eigen-residual is at most `sqrt(tol)`
/// relative. A non-converged run is reported, not rejected.
pub fn power_norm<F, G>(
    len: usize,
    apply: F,
    adjoint: G,
    tol: f64,
    max_iter: usize,
    rng: &mut impl Rng,
) -> NormEstimate
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
    G: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let mut x = random_unit(rng, len);
    let mut prev = f64::NAN;
    let mut iterations = 0;
    loop {
        let y = apply(&x);
        let z = adjoint(&y);
        iterations += 1;
        let lambda = y.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let residual = x
            .iter()
            .zip(&z)
            .map(|(xi, zi)| (zi - xi * lambda).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let znorm = norm2(&z);
        let settled = (lambda - prev).abs() <= tol * lambda && residual <= tol.sqrt() * lambda;
        if lambda == 0.0 || znorm == 0.0 || settled || iterations >= max_iter {
            return NormEstimate {
                norm: lambda.sqrt(),
                iterations,
                residual,
                converged: lambda == 0.0 || znorm == 0.0 || settled,
            };
        }
        prev = lambda;
        x = z.into_iter().map(|v| v / znorm).collect();
    }
}

fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal `a`
/// and off-diagonal `b`, by Sturm-sequence bisection.
fn tridiagonal_max_eigenvalue(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..m {
        let left = if i > 0 { b[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < m { b[i].abs() } else { 0.0 };
        lo = lo.min(a[i] - left - right);
        hi = hi.max(a[i] + left + right);
    }
    // Number of eigenvalues below x.
    let below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0f64;
        for i in 0..m {
            d = a[i] - x - if i > 0 { b[i - 1] * b[i - 1] / d } else { 0.0 };
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) == m {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Solves `(T - sigma I) x = rhs` for symmetric tridiagonal `T` by LU with
/// partial pivoting. Zero pivots are nudged to a tiny value.
fn tridiagonal_solve(a: &[f64], b: &[f64], sigma: f64, rhs: &mut [f64]) {
    let m = a.len();
    let tiny = f64::EPSILON * (sigma.abs() + 1.0);
    let mut d: Vec<f64> = a.iter().map(|v| v - sigma).collect();
    let mut dl = b.to_vec();
    let mut du = b.to_vec();
    let mut du2 = vec![0.0f64; m.saturating_sub(2)];
    let mut swapped = vec![false; m.saturating_sub(1)];
    for i in 0..m.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let f = dl[i] / d[i];
            dl[i] = f;
            d[i + 1] -= f * du[i];
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = f;
            let t = du[i];
            du[i] = d[i + 1];
            d[i + 1] = t - f * d[i + 1];
            if i + 2 < m {
                du2[i] = du[i + 1];
                du[i + 1] *= -f;
            }
            swapped[i] = true;
        }
    }
    if d[m - 1] == 0.0 {
        d[m - 1] = tiny;
    }
    for i in 0..m.saturating_sub(1) {
        if swapped[i] {
            rhs.swap(i, i + 1);
        }
        rhs[i + 1] -= dl[i] * rhs[i];
    }
    for i in (0..m).rev() {
        let mut v = rhs[i];
        if i + 1 < m {
            v -= du[i] * rhs[i + 1];
        }
        if i + 2 < m {
            v -= du2[i] * rhs[i + 2];
        }
        rhs[i] = v / d[i];
    }
}

/// Unit eigenvector of the tridiagonal matrix for the eigenvalue `theta`, by
/// two steps of inverse iteration.
fn tridiagonal_eigenvector(a: &[f64], b: &[f64], theta: f64) -> Vec<f64> {
    let m = a.len();
    let sigma = theta + 1e-12 * theta.abs().max(1e-300);
    let mut s = vec![1.0 / (m as f64).sqrt(); m];
    for _ in 0..2 {
        tridiagonal_solve(a, b, sigma, &mut s);
        let n = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        s.iter_mut().for_each(|v| *v /= n);
    }
    s
}

/// Operators up to this dimension get full reorthogonalisation in
/// [`lanczos_norm`].
pub const FULL_REORTH_LEN: usize = 1024;

/// Lanczos iteration on `A^* A`.
///
/// Up to [`FULL_REORTH_LEN`] every new vector is reorthogonalised against the
/// whole basis. Above it only the three-term recurrence is enforced: loss of
/// orthogonality then creates duplicate copies of converged Ritz values but
/// none above the top eigenvalue, and the final residual test on the Ritz
/// vector guards the estimate.
///
/// The largest Ritz value is tracked by bisection. Once it changes by at most
/// `tol` relative and the Lanczos residual estimate `beta_m |s_m|` is small,
/// the Ritz vector is formed and accepted if its eigen-residual is at most
/// `sqrt(tol)` relative, the same test as [`power_norm`]. The
/// returned norm is `||A x||` at that unit vector. `iterations` counts
/// applications of `A^* A`.
pub fn lanczos_norm<F, G>(
    len: usize,
    apply: F,
    adjoint: G,
    tol: f64,
    max_steps: usize,
    rng: &mut impl Rng,
) -> NormEstimate
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
    G: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let max_steps = max_steps.min(len).max(1);
    let mut basis = vec![random_unit(rng, len)];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut prev = f64::NAN;
    let mut applies = 0;
    loop {
        let j = alpha.len();
        let mut w = adjoint(&apply(&basis[j]));
        applies += 1;
        alpha.push(dot(&basis[j], &w).re);
        // Two passes of Gram-Schmidt, against the whole basis when it is small
        // and against the last two vectors otherwise.
        let from = if len <= FULL_REORTH_LEN {
            0
        } else {
            j.saturating_sub(1)
        };
        for _ in 0..2 {
            for q in &basis[from..=j] {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let b = norm2(&w);
        let theta = tridiagonal_max_eigenvalue(&alpha, &beta);
        let exhausted = b <= 1e-14 * theta.abs() || alpha.len() >= max_steps;
        let s = tridiagonal_eigenvector(&alpha, &beta, theta);
        let estimate = b * s[s.len() - 1].abs();
        let settled = (theta - prev).abs() <= tol * theta && estimate <= 0.5 * tol.sqrt() * theta;
        if exhausted || settled {
            let mut x = vec![Complex64::default(); len];
            for (q, &sj) in basis.iter().zip(&s) {
                x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += qi * sj);
            }
            let xn = norm2(&x);
            x.iter_mut().for_each(|v| *v /= xn);
            let y = apply(&x);
            let z = adjoint(&y);
            applies += 1;
            let lambda = y.iter().map(|v| v.norm_sqr()).sum::<f64>();
            let residual = x
                .iter()
                .zip(&z)
                .map(|(xi, zi)| (zi - xi * lambda).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let ok = lambda == 0.0 || residual <= tol.sqrt() * lambda;
            if ok || exhausted {
                return NormEstimate {
                    norm: lambda.sqrt(),
                    iterations: applies,
                    residual,
                    converged: ok,
                };
            }
        }
        prev = theta;
        w.iter_mut().for_each(|v| *v /= b);
        basis.push(w);
        beta.push(b);
    }
}

/// Spectral norm of a dense matrix by power iteration on `A^* A`.
pub fn operator_norm(a: &CMatrix, tol: f64, max_iter: usize, rng: &mut impl Rng) -> NormEstimate {
    power_norm(
        a.cols(),
        |x| a.matvec(x),
        |y| a.matvec_adjoint(y),
        tol,
        max_iter,
        rng,
    )
}
