//! The unitary discrete Fourier transform and its restriction to Cantor sets.
//!
//! ```text
//! F_N u(j) = N^{-1/2} sum_l exp(-2 pi i j l / N) u(l)
//! ```
//!
//! [`DftPlan`] runs a recursive decimation-in-time Cooley-Tukey transform when
//! `N` is a perfect power `r^k` (radix `r`, naive `r`-point butterflies) and
//! falls back to the direct `O(N^2)` sum otherwise.
//!
//! Two realisations of the restricted operator `1_C F_N 1_C` live here:
//! [`RestrictedOperator`] masks a length-`N` vector and runs the full FFT,
//! while [`CantorTransform`] works in compressed coordinates (one entry per
//! point of `C_k`) and prunes the radix-`M` recursion to the digits of the
//! alphabet, costing `O(k A^{k+1})` instead of `O(k M^{k+1})`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::cantor::CantorSet;
use crate::error::{Error, Result};

/// `exp(-2 pi i t / n)` for `t = 0..n`.
fn twiddle_table(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|t| {
            let (s, c) = (2.0 * PI * t as f64 / n as f64).sin_cos();
            Complex64::new(c, -s)
        })
        .collect()
}

/// Smallest `r >= 2` with `n = r^k`, if `n` is a perfect power with `k >= 2`.
fn perfect_power_radix(n: usize) -> Option<usize> {
    if n < 4 {
        return None;
    }
    let mut r = 2;
    while r * r <= n {
        let mut x = n;
        while x % r == 0 {
            x /= r;
        }
        if x == 1 {
            return Some(r);
        }
        r += 1;
    }
    None
}

fn check_finite(u: &[Complex64]) -> Result<()> {
    match u
        .iter()
        .position(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// A precomputed transform of fixed size.
#[derive(Debug, Clone)]
pub struct DftPlan {
    n: usize,
    radix: Option<usize>,
    twiddles: Vec<Complex64>,
    radix_twiddles: Vec<Complex64>,
}

impl DftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "transform size must be positive");
        let radix = perfect_power_radix(n);
        Self::build(n, radix)
    }

    /// Plan for `n = base^k` using radix `base`.
    pub fn with_radix(base: usize, k: u32) -> Self {
        assert!(base >= 2);
        let n = base.pow(k);
        Self::build(n, if k >= 2 { Some(base) } else { None })
    }

    fn build(n: usize, radix: Option<usize>) -> Self {
        let twiddles = twiddle_table(n);
        let radix_twiddles = match radix {
            Some(r) => (0..r).map(|t| twiddles[t * (n / r)]).collect(),
            None => Vec::new(),
        };
        Self {
            n,
            radix,
            twiddles,
            radix_twiddles,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn radix(&self) -> Option<usize> {
        self.radix
    }

    fn check(&self, u: &[Complex64]) -> Result<()> {
        if u.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: u.len(),
            });
        }
        check_finite(u)
    }

    /// Unitary forward transform.
    pub fn forward(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(u)?;
        let mut out = vec![Complex64::default(); self.n];
        self.forward_into(u, &mut out);
        Ok(out)
    }

    /// Unitary inverse transform, kernel `exp(+2 pi i j l / N)`.
    pub fn inverse(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(v)?;
        let mut out = vec![Complex64::default(); self.n];
        self.inverse_into(v, &mut out);
        Ok(out)
    }

    /// Forward transform without validation; `out` must have length `N`.
    pub(crate) fn forward_into(&self, u: &[Complex64], out: &mut [Complex64]) {
        match self.radix {
            Some(r) => {
                let mut scratch = vec![Complex64::default(); r];
                self.radix_pass(u, 1, out, 1, &mut scratch);
            }
            None => naive_into(&self.twiddles, u, out),
        }
        let scale = 1.0 / (self.n as f64).sqrt();
        out.iter_mut().for_each(|z| *z *= scale);
    }

    pub(crate) fn inverse_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        let conj: Vec<Complex64> = v.iter().map(|z| z.conj()).collect();
        self.forward_into(&conj, out);
        out.iter_mut().for_each(|z| *z = z.conj());
    }

    fn radix_pass(
        &self,
        input: &[Complex64],
        stride: usize,
        out: &mut [Complex64],
        tw_stride: usize,
        scratch: &mut [Complex64],
    ) {
        let len = out.len();
        if len == 1 {
            out[0] = input[0];
            return;
        }
        let r = scratch.len();
        let sub = len / r;
        for j in 0..r {
            self.radix_pass(
                &input[j * stride..],
                stride * r,
                &mut out[j * sub..(j + 1) * sub],
                tw_stride * r,
                scratch,
            );
        }
        for q in 0..sub {
            for j in 0..r {
                scratch[j] = out[j * sub + q] * self.twiddles[j * q * tw_stride];
            }
            for s in 0..r {
                let mut acc = Complex64::default();
                for (j, &t) in scratch.iter().enumerate() {
                    acc += t * self.radix_twiddles[(j * s) % r];
                }
                out[s * sub + q] = acc;
            }
        }
    }
}

fn naive_into(twiddles: &[Complex64], u: &[Complex64], out: &mut [Complex64]) {
    let n = u.len();
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::default();
        for (l, &x) in u.iter().enumerate() {
            acc += twiddles[(j * l) % n] * x;
        }
        *o = acc;
    }
}

/// Direct `O(N^2)` unitary DFT.
pub fn naive_dft(u: &[Complex64]) -> Vec<Complex64> {
    let n = u.len();
    let twiddles = twiddle_table(n);
    let mut out = vec![Complex64::default(); n];
    naive_into(&twiddles, u, &mut out);
    let scale = 1.0 / (n as f64).sqrt();
    out.iter_mut().for_each(|z| *z *= scale);
    out
}

pub fn dft(n: usize, u: &[Complex64]) -> Result<Vec<Complex64>> {
    if u.len() != n || n == 0 {
        return Err(Error::LengthMismatch {
            expected: n,
            got: u.len(),
        });
    }
    DftPlan::new(n).forward(u)
}

pub fn idft(n: usize, v: &[Complex64]) -> Result<Vec<Complex64>> {
    if v.len() != n || n == 0 {
        return Err(Error::LengthMismatch {
            expected: n,
            got: v.len(),
        });
    }
    DftPlan::new(n).inverse(v)
}

/// `1_C F_N 1_C` on full-length vectors, by masking and a size-`N` FFT.
#[derive(Debug, Clone)]
pub struct RestrictedOperator {
    plan: DftPlan,
    mask: Vec<bool>,
}

impl RestrictedOperator {
    pub fn new(set: &CantorSet) -> Self {
        Self {
            plan: DftPlan::with_radix(set.alphabet().base(), set.order()),
            mask: set.mask(),
        }
    }

    pub fn n(&self) -> usize {
        self.plan.len()
    }

    fn masked(&self, u: &[Complex64]) -> Vec<Complex64> {
        u.iter()
            .zip(&self.mask)
            .map(|(&z, &keep)| if keep { z } else { Complex64::default() })
            .collect()
    }

    fn mask_in_place(&self, v: &mut [Complex64]) {
        for (z, &keep) in v.iter_mut().zip(&self.mask) {
            if !keep {
                *z = Complex64::default();
            }
        }
    }

    pub fn apply(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut v = self.plan.forward(&self.masked(u))?;
        self.mask_in_place(&mut v);
        Ok(v)
    }

    /// `(1_C F_N 1_C)^* = 1_C F_N^{-1} 1_C`.
    pub fn apply_adjoint(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut v = self.plan.inverse(&self.masked(u))?;
        self.mask_in_place(&mut v);
        Ok(v)
    }
}

pub fn restricted_apply(set: &CantorSet, u: &[Complex64]) -> Result<Vec<Complex64>> {
    RestrictedOperator::new(set).apply(u)
}

pub fn restricted_apply_adjoint(set: &CantorSet, u: &[Complex64]) -> Result<Vec<Complex64>> {
    RestrictedOperator::new(set).apply_adjoint(u)
}

/// `1_C F_N 1_C` in compressed coordinates: entry `p` of a vector is the
/// value at the `p`-th smallest point of `C_k`.
#[derive(Debug, Clone)]
pub struct CantorTransform {
    base: usize,
    card: usize,
    order: u32,
    n: usize,
    digits: Vec<usize>,
    twiddles: Vec<Complex64>,
    /// `digit_twiddles[r * A + s] = exp(-2 pi i d_r d_s / M)`.
    digit_twiddles: Vec<Complex64>,
    /// Integer values of `C_j` for `j = 0..k-1`; `C_0 = {0}`.
    levels: Vec<Vec<u64>>,
}

impl CantorTransform {
    pub fn new(set: &CantorSet) -> Self {
        let alphabet = set.alphabet();
        let (m, card) = (alphabet.base(), alphabet.card());
        let n = set.n() as usize;
        let twiddles = twiddle_table(n);
        let digits = alphabet.digits().to_vec();
        let mut digit_twiddles = Vec::with_capacity(card * card);
        for &dr in &digits {
            for &ds in &digits {
                digit_twiddles.push(twiddles[((dr * ds) % m) * (n / m)]);
            }
        }
        let mut levels = vec![vec![0u64]];
        let mut scale = 1u64;
        for _ in 1..set.order() {
            let prev = levels.last().unwrap();
            let mut next = Vec::with_capacity(prev.len() * card);
            for &d in &digits {
                next.extend(prev.iter().map(|&x| x + d as u64 * scale));
            }
            levels.push(next);
            scale *= m as u64;
        }
        Self {
            base: m,
            card,
            order: set.order(),
            n,
            digits,
            twiddles,
            digit_twiddles,
            levels,
        }
    }

    /// Number of points `A^k`.
    pub fn len(&self) -> usize {
        self.card.pow(self.order)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: x.len(),
            });
        }
        check_finite(x)?;
        let mut out = vec![Complex64::default(); x.len()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    pub fn apply_adjoint(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let conj: Vec<Complex64> = x.iter().map(|z| z.conj()).collect();
        let mut out = self.apply(&conj)?;
        out.iter_mut().for_each(|z| *z = z.conj());
        Ok(out)
    }

    pub(crate) fn apply_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        let mut scratch = vec![Complex64::default(); self.card];
        self.pass(x, 1, out, self.order, &mut scratch);
        let scale = 1.0 / (self.n as f64).sqrt();
        out.iter_mut().for_each(|z| *z *= scale);
    }

    /// The matrix is complex symmetric, so the adjoint is its entrywise conjugate.
    pub(crate) fn apply_adjoint_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        let conj: Vec<Complex64> = x.iter().map(|z| z.conj()).collect();
        self.apply_into(&conj, out);
        out.iter_mut().for_each(|z| *z = z.conj());
    }

    fn pass(
        &self,
        input: &[Complex64],
        stride: usize,
        out: &mut [Complex64],
        level: u32,
        scratch: &mut [Complex64],
    ) {
        if level == 0 {
            out[0] = input[0];
            return;
        }
        let a = self.card;
        let sub = out.len() / a;
        for r in 0..a {
            self.pass(
                &input[r * stride..],
                stride * a,
                &mut out[r * sub..(r + 1) * sub],
                level - 1,
                scratch,
            );
        }
        // exp(-2 pi i d q / M^level), read from the size-N table.
        let step = self.n / self.base.pow(level);
        let lower = &self.levels[(level - 1) as usize];
        for (qp, &q) in lower.iter().enumerate() {
            for r in 0..a {
                let e = self.digits[r] as u64 * q * step as u64;
                scratch[r] = out[r * sub + qp] * self.twiddles[e as usize];
            }
            for s in 0..a {
                let mut acc = Complex64::default();
                for (r, &t) in scratch.iter().enumerate() {
                    acc += t * self.digit_twiddles[r * a + s];
                }
                out[s * sub + qp] = acc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::Alphabet;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = crate::rng::rng_from_seed(seed);
        (0..n)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn small_examples() {
        assert_eq!(dft(1, &[c(1.0, 0.0)]).unwrap(), vec![c(1.0, 0.0)]);
        let v = dft(4, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(max_diff(&v, &[c(0.5, 0.0); 4]) < 1e-15);
        let v = dft(4, &[c(1.0, 0.0); 4]).unwrap();
        assert!(max_diff(&v, &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]) < 1e-15);
        let u = idft(4, &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(max_diff(&u, &[c(1.0, 0.0); 4]) < 1e-15);
        assert_eq!(idft(1, &[c(0.0, 1.0)]).unwrap(), vec![c(0.0, 1.0)]);
    }

    #[test]
    fn errors() {
        assert_eq!(
            dft(3, &[c(1.0, 0.0)]),
            Err(Error::LengthMismatch {
                expected: 3,
                got: 1
            })
        );
        assert_eq!(
            dft(2, &[c(1.0, 0.0), c(f64::NAN, 0.0)]),
            Err(Error::NonFinite(1))
        );
    }

    #[test]
    fn radix_detection() {
        assert_eq!(perfect_power_radix(243), Some(3));
        assert_eq!(perfect_power_radix(16), Some(2));
        assert_eq!(perfect_power_radix(36), Some(6));
        assert_eq!(perfect_power_radix(12), None);
        assert_eq!(perfect_power_radix(7), None);
        assert_eq!(DftPlan::with_radix(10, 3).radix(), Some(10));
    }

    #[test]
    fn round_trip_243() {
        let u = random_vec(243, 1);
        let back = idft(243, &dft(243, &u).unwrap()).unwrap();
        assert!(max_diff(&u, &back) <= 1e-10);
    }

    #[test]
    fn fft_matches_naive_and_fallback() {
        for &(m, k) in &[(3usize, 4u32), (4, 3), (6, 2), (10, 2)] {
            let u = random_vec(m.pow(k), 11);
            let fast = DftPlan::with_radix(m, k).forward(&u).unwrap();
            assert!(max_diff(&fast, &naive_dft(&u)) < 1e-12, "M={m} k={k}");
        }
        let u = random_vec(12, 3);
        assert!(max_diff(&dft(12, &u).unwrap(), &naive_dft(&u)) < 1e-13);
    }

    #[test]
    fn adjoint_identity() {
        let n = 125;
        let (u, v) = (random_vec(n, 5), random_vec(n, 6));
        let fu = dft(n, &u).unwrap();
        let iv = idft(n, &v).unwrap();
        let lhs: Complex64 = fu.iter().zip(&v).map(|(a, b)| a * b.conj()).sum();
        let rhs: Complex64 = u.iter().zip(&iv).map(|(a, b)| a * b.conj()).sum();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn restricted_examples() {
        let a = Alphabet::new(3, &[0, 2]).unwrap();
        let c1 = CantorSet::new(&a, 1).unwrap();
        let delta1 = [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
        assert!(restricted_apply(&c1, &delta1)
            .unwrap()
            .iter()
            .all(|z| z.norm() == 0.0));
        let delta0 = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let v = restricted_apply(&c1, &delta0).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!(max_diff(&v, &[c(s, 0.0), c(0.0, 0.0), c(s, 0.0)]) < 1e-15);

        let full = CantorSet::new(&Alphabet::full(3).unwrap(), 3).unwrap();
        let u = random_vec(27, 2);
        assert!(max_diff(&restricted_apply(&full, &u).unwrap(), &dft(27, &u).unwrap()) < 1e-14);
        assert!(
            max_diff(
                &restricted_apply_adjoint(&full, &u).unwrap(),
                &idft(27, &u).unwrap()
            ) < 1e-14
        );
        let zero = vec![Complex64::default(); 27];
        assert!(restricted_apply_adjoint(&full, &zero)
            .unwrap()
            .iter()
            .all(|z| z.norm() == 0.0));
    }

    /// Dense matrix of `1_C F_N 1_C` built entry by entry.
    fn dense_restricted(set: &CantorSet) -> Vec<Vec<Complex64>> {
        let n = set.n() as usize;
        let mask = set.mask();
        let s = 1.0 / (n as f64).sqrt();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|l| {
                        if mask[j] && mask[l] {
                            let th = -2.0 * PI * ((j * l) % n) as f64 / n as f64;
                            Complex64::from_polar(s, th)
                        } else {
                            Complex64::default()
                        }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn adjoint_after_apply_matches_dense_gram() {
        let a = Alphabet::new(3, &[0, 2]).unwrap();
        let set = CantorSet::new(&a, 2).unwrap();
        let op = RestrictedOperator::new(&set);
        let dense = dense_restricted(&set);
        let n = 9;
        for col in 0..n {
            let mut e = vec![Complex64::default(); n];
            e[col] = c(1.0, 0.0);
            let got = op.apply_adjoint(&op.apply(&e).unwrap()).unwrap();
            // (T^* T)_{i,col} = sum_j conj(T_{j,i}) T_{j,col}
            let want: Vec<Complex64> = (0..n)
                .map(|i| (0..n).map(|j| dense[j][i].conj() * dense[j][col]).sum())
                .collect();
            assert!(max_diff(&got, &want) < 1e-10);
        }
    }

    #[test]
    fn adjoint_matches_dense_conjugate_transpose() {
        let a = Alphabet::new(4, &[1, 3]).unwrap();
        let set = CantorSet::new(&a, 4).unwrap();
        let op = RestrictedOperator::new(&set);
        let dense = dense_restricted(&set);
        let u = random_vec(256, 9);
        let got = op.apply_adjoint(&u).unwrap();
        let want: Vec<Complex64> = (0..256)
            .map(|i| (0..256).map(|j| dense[j][i].conj() * u[j]).sum())
            .collect();
        assert!(max_diff(&got, &want) < 1e-10);
    }

    #[test]
    fn compressed_transform_matches_masked_fft() {
        let cases: &[(usize, &[usize], u32)] = &[
            (3, &[0, 2], 1),
            (3, &[0, 2], 3),
            (5, &[1, 2, 4], 3),
            (7, &[0, 3, 5, 6], 2),
            (10, &[2, 3, 7], 3),
            (4, &[0, 1, 2, 3], 2),
            (6, &[5], 3),
        ];
        for &(m, digits, k) in cases {
            let set = CantorSet::new(&Alphabet::new(m, digits).unwrap(), k).unwrap();
            let fast = CantorTransform::new(&set);
            let op = RestrictedOperator::new(&set);
            let x = random_vec(set.len(), 21);
            let mut full = vec![Complex64::default(); set.n() as usize];
            for (p, &i) in set.indices().iter().enumerate() {
                full[i as usize] = x[p];
            }
            let want = op.apply(&full).unwrap();
            let want_adj = op.apply_adjoint(&full).unwrap();
            let got = fast.apply(&x).unwrap();
            let got_adj = fast.apply_adjoint(&x).unwrap();
            for (p, &i) in set.indices().iter().enumerate() {
                assert!((got[p] - want[i as usize]).norm() < 1e-12, "M={m} k={k}");
                assert!((got_adj[p] - want_adj[i as usize]).norm() < 1e-12);
            }
        }
    }
}
