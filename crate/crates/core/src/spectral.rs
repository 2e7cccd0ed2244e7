//! Operator norms `r_k`, decay exponents and the Gram/Schur machinery.
//!
//! `r_k` is estimated matrix-free by power iteration on `T^* T`, where `T` is
//! the restricted transform [`CantorTransform`]. A Lanczos solver on the same
//! operator is available for population sweeps, where clustered top singular
//! values make plain power iteration slow. For `k = 1` the Gram matrix
//! `F_jk = (1/M) sum_{l in A} exp(2 pi i (k - j) l / M)` of the `A x A` block
//! gives an independent dense route through cyclic Jacobi.
//!
//! Submultiplicativity `r_{k1+k2} <= r_{k1} r_{k2}` makes
//! `-log r_k / (k log M)` superadditive, so every `beta_k` is a certified lower
//! bound for the sharp exponent. [`beta_lower`] reports the best of them.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::cantor::{checked_size, Alphabet, CantorSet};
use crate::error::{Error, Result};
use crate::fourier::CantorTransform;
use crate::linalg::{hermitian_eigenvalues, lanczos_norm, power_norm, CMatrix};
use crate::rng;
use crate::Limits;

/// Floor applied to `r_k` before taking logarithms.
pub const R_FLOOR: f64 = 1e-300;

/// Off-diagonal tolerance for the dense Jacobi route.
pub const JACOBI_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    Power,
    Lanczos,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Dense => "dense",
            Method::Power => "power",
            Method::Lanczos => "lanczos",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub alphabet: Alphabet,
    pub k: u32,
    pub r_k: f64,
    pub beta_k: f64,
    pub iterations: usize,
    pub residual: f64,
    pub method: Method,
    pub converged: bool,
}

impl SpectralReport {
    pub const CSV_HEADER: [&'static str; 8] = [
        "M",
        "alphabet",
        "k",
        "r_k",
        "beta_k",
        "method",
        "residual",
        "iterations",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.alphabet.base().to_string(),
            self.alphabet.to_string(),
            self.k.to_string(),
            self.r_k.to_string(),
            self.beta_k.to_string(),
            self.method.to_string(),
            self.residual.to_string(),
            self.iterations.to_string(),
        ]
    }
}

/// `beta_k = -log r_k / (k log M)`.
pub fn beta_from_r(r: f64, k: u32, base: usize) -> f64 {
    -r.max(R_FLOOR).ln() / (k as f64 * (base as f64).ln())
}

/// The three reference exponents as functions of the dimension `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelopes {
    /// `max(0, 1/2 - delta)`, from the Hilbert-Schmidt bound.
    pub volume_bound: f64,
    /// `max(0, 1/2 - 3 delta / 4)`.
    pub red_line: f64,
    /// `(1 - delta) / 2`, attained by delta functions.
    pub best_possible: f64,
}

impl Envelopes {
    pub fn new(delta: f64) -> Self {
        Self {
            volume_bound: (0.5 - delta).max(0.0),
            red_line: (0.5 - 0.75 * delta).max(0.0),
            best_possible: (1.0 - delta) / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub alphabet: Alphabet,
    /// Indexed by positions in the sorted digit list.
    pub entries: CMatrix,
}

pub fn gram_matrix(alphabet: &Alphabet) -> GramMatrix {
    let m = alphabet.base() as i64;
    let digits = alphabet.digits();
    let entries = CMatrix::from_fn(digits.len(), digits.len(), |j, k| {
        if j == k {
            return Complex64::new(digits.len() as f64 / m as f64, 0.0);
        }
        let diff = digits[k] as i64 - digits[j] as i64;
        digits
            .iter()
            .map(|&l| {
                let e = (diff * l as i64).rem_euclid(m);
                Complex64::from_polar(1.0, 2.0 * PI * e as f64 / m as f64)
            })
            .sum::<Complex64>()
            / m as f64
    });
    GramMatrix {
        alphabet: alphabet.clone(),
        entries,
    }
}

/// `max_j sum_k |F_jk|`, an upper bound for `r_1^2`.
pub fn schur_bound(alphabet: &Alphabet) -> f64 {
    let g = gram_matrix(alphabet).entries;
    (0..g.rows())
        .map(|j| g.row(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn r1_dense(alphabet: &Alphabet) -> Result<SpectralReport> {
    r1_dense_with(alphabet, Limits::default().dense_cap)
}

pub fn r1_dense_with(alphabet: &Alphabet, dense_cap: usize) -> Result<SpectralReport> {
    if alphabet.card() > dense_cap {
        return Err(Error::DenseCapExceeded {
            a: alphabet.card(),
            cap: dense_cap,
        });
    }
    let gram = gram_matrix(alphabet);
    let out = hermitian_eigenvalues(&gram.entries, JACOBI_TOL, 100)?;
    let r = out.eigenvalues[0].max(0.0).sqrt();
    Ok(SpectralReport {
        alphabet: alphabet.clone(),
        k: 1,
        r_k: r,
        beta_k: beta_from_r(r, 1, alphabet.base()),
        iterations: out.sweeps,
        residual: out.off_norm,
        method: Method::Dense,
        converged: true,
    })
}

/// `r_k` from the dense `A^k x A^k` block of `F_N`, via Jacobi on its Gram
/// matrix. Independent of the FFT code paths; meant for small sets.
pub fn rk_dense(alphabet: &Alphabet, k: u32, dense_cap: usize) -> Result<SpectralReport> {
    let set = CantorSet::new(alphabet, k)?;
    if set.len() > dense_cap {
        return Err(Error::DenseCapExceeded {
            a: set.len(),
            cap: dense_cap,
        });
    }
    let n = set.n();
    let idx = set.indices();
    let scale = 1.0 / (n as f64).sqrt();
    let block = CMatrix::from_fn(idx.len(), idx.len(), |i, j| {
        let e = (idx[i] as u128 * idx[j] as u128 % n as u128) as f64;
        Complex64::from_polar(scale, -2.0 * PI * e / n as f64)
    });
    let gram = block.matmul(&block.adjoint());
    let out = hermitian_eigenvalues(&gram, JACOBI_TOL, 100)?;
    let r = out.eigenvalues[0].max(0.0).sqrt();
    Ok(SpectralReport {
        alphabet: alphabet.clone(),
        k,
        r_k: r,
        beta_k: beta_from_r(r, k, alphabet.base()),
        iterations: out.sweeps,
        residual: out.off_norm,
        method: Method::Dense,
        converged: true,
    })
}

/// Iterative solver used for `r_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    #[default]
    Power,
    /// At most [`LANCZOS_MAX_STEPS`] Krylov vectors per restart.
    Lanczos,
}

pub const LANCZOS_MAX_STEPS: usize = 640;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerOptions {
    /// Relative change of the Rayleigh quotient that ends the iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Independent random starts; the largest estimate wins.
    pub restarts: u32,
    pub n_cap: u64,
    pub solver: Solver,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100_000,
            restarts: 2,
            n_cap: Limits::default().n_cap,
            solver: Solver::Power,
        }
    }
}

pub fn rk_power(alphabet: &Alphabet, k: u32, tol: f64, seed: u64) -> Result<SpectralReport> {
    rk_power_with(
        alphabet,
        k,
        &PowerOptions {
            tol,
            ..PowerOptions::default()
        },
        seed,
    )
}

pub fn rk_power_with(
    alphabet: &Alphabet,
    k: u32,
    opts: &PowerOptions,
    seed: u64,
) -> Result<SpectralReport> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let set = CantorSet::with_cap(alphabet, k, opts.n_cap)?;
    let op = CantorTransform::new(&set);
    let len = op.len();
    let apply = |x: &[Complex64]| {
        let mut y = vec![Complex64::default(); len];
        op.apply_into(x, &mut y);
        y
    };
    let adjoint = |x: &[Complex64]| {
        let mut y = vec![Complex64::default(); len];
        op.apply_adjoint_into(x, &mut y);
        y
    };
    let mut best = None::<crate::linalg::NormEstimate>;
    let mut iterations = 0;
    let mut all_converged = true;
    for restart in 0..opts.restarts.max(1) {
        let mut stream = rng::stream(seed, restart as u64);
        let est = match opts.solver {
            Solver::Power => power_norm(len, apply, adjoint, opts.tol, opts.max_iter, &mut stream),
            Solver::Lanczos => lanczos_norm(
                len,
                apply,
                adjoint,
                opts.tol,
                opts.max_iter.min(LANCZOS_MAX_STEPS),
                &mut stream,
            ),
        };
        iterations += est.iterations;
        all_converged &= est.converged;
        if best.as_ref().map_or(true, |b| est.norm > b.norm) {
            best = Some(est);
        }
    }
    let best = best.expect("at least one restart");
    Ok(SpectralReport {
        alphabet: alphabet.clone(),
        k,
        r_k: best.norm,
        beta_k: beta_from_r(best.norm, k, alphabet.base()),
        iterations,
        residual: best.residual,
        method: match opts.solver {
            Solver::Power => Method::Power,
            Solver::Lanczos => Method::Lanczos,
        },
        converged: all_converged,
    })
}

/// `rk_power` for `k = 1..=k_max`, each with its own derived seed.
pub fn beta_profile(
    alphabet: &Alphabet,
    k_max: u32,
    opts: &PowerOptions,
    seed: u64,
) -> Result<Vec<SpectralReport>> {
    if k_max == 0 {
        return Err(Error::OrderTooSmall { k: 0, min: 1 });
    }
    checked_size(alphabet.base(), k_max, opts.n_cap)?;
    (1..=k_max)
        .map(|k| rk_power_with(alphabet, k, opts, rng::derive_seed(seed, k as u64)))
        .collect()
}

/// `max_{k <= k_max} beta_k`, a lower bound for the sharp exponent.
pub fn beta_lower(alphabet: &Alphabet, k_max: u32, tol: f64, seed: u64) -> Result<f64> {
    beta_lower_with(
        alphabet,
        k_max,
        &PowerOptions {
            tol,
            ..PowerOptions::default()
        },
        seed,
    )
}

pub fn beta_lower_with(
    alphabet: &Alphabet,
    k_max: u32,
    opts: &PowerOptions,
    seed: u64,
) -> Result<f64> {
    if alphabet.is_trivial() {
        return Err(Error::TrivialAlphabet {
            m: alphabet.base(),
            a: alphabet.card(),
        });
    }
    Ok(best_beta(&beta_profile(alphabet, k_max, opts, seed)?))
}

pub(crate) fn best_beta(profile: &[SpectralReport]) -> f64 {
    profile
        .iter()
        .map(|r| r.beta_k)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha(m: usize, d: &[usize]) -> Alphabet {
        Alphabet::new(m, d).unwrap()
    }

    #[test]
    fn gram_examples() {
        let g = gram_matrix(&alpha(4, &[0, 1])).entries;
        assert!((g[(0, 0)] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((g[(1, 1)] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((g[(0, 1)] - Complex64::new(0.25, 0.25)).norm() < 1e-15);
        let g = gram_matrix(&alpha(5, &[3])).entries;
        assert_eq!((g.rows(), g[(0, 0)]), (1, Complex64::new(0.2, 0.0)));
        let g = gram_matrix(&alpha(3, &[0, 2])).entries;
        assert!((g[(0, 1)].norm() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gram_is_hermitian_psd_with_constant_diagonal() {
        for m in 3..=9 {
            for mask in 1u32..(1 << m) {
                let d: Vec<usize> = (0..m).filter(|&i| mask >> i & 1 == 1).collect();
                let a = alpha(m, &d);
                let g = gram_matrix(&a).entries;
                for j in 0..d.len() {
                    assert!((g[(j, j)].re - d.len() as f64 / m as f64).abs() <= 1e-12);
                    for k in 0..d.len() {
                        assert!((g[(k, j)] - g[(j, k)].conj()).norm() <= 1e-12);
                    }
                }
                let ev = hermitian_eigenvalues(&g, JACOBI_TOL, 100).unwrap();
                assert!(ev.eigenvalues.iter().all(|&l| l >= -1e-10));
            }
        }
    }

    #[test]
    fn r1_dense_examples() {
        for m in 3..=7 {
            let r = r1_dense(&alpha(m, &[m - 1])).unwrap();
            assert!((r.r_k - (m as f64).powf(-0.5)).abs() < 1e-12);
        }
        // Gram eigenvalues 1/2 +- sqrt(2)/4, so r_1 = cos(pi/8).
        let r = r1_dense(&alpha(4, &[0, 1])).unwrap();
        assert!((r.r_k - (PI / 8.0).cos()).abs() < 1e-12);
        let r = r1_dense(&alpha(3, &[0, 2])).unwrap();
        assert!((r.r_k - 1.0).abs() < 1e-10);
        assert_eq!(r.method, Method::Dense);
        assert!(matches!(
            r1_dense_with(&alpha(5, &[0, 1, 2]), 2),
            Err(Error::DenseCapExceeded { a: 3, cap: 2 })
        ));
    }

    #[test]
    fn rk_power_examples() {
        let r = rk_power(&alpha(3, &[0, 2]), 1, 1e-12, 1).unwrap();
        assert!((r.r_k - 1.0).abs() < 1e-8);
        assert!(r.converged);
        for k in 1..=3 {
            let r = rk_power(&Alphabet::full(4).unwrap(), k, 1e-12, 2).unwrap();
            assert!((r.r_k - 1.0).abs() < 1e-12);
        }
        let a = alpha(4, &[0, 1]);
        let r1 = rk_power(&a, 1, 1e-12, 3).unwrap().r_k;
        let r2 = rk_power(&a, 2, 1e-12, 3).unwrap().r_k;
        assert!(r2 <= r1 * r1 * (1.0 + 1e-9));
        assert!((r2 - rk_dense(&a, 2, 64).unwrap().r_k).abs() < 1e-9);
        assert!(matches!(
            rk_power_with(
                &alpha(3, &[0, 2]),
                5,
                &PowerOptions {
                    n_cap: 100,
                    ..PowerOptions::default()
                },
                0
            ),
            Err(Error::OrderTooLarge { .. })
        ));
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let opts = PowerOptions {
            max_iter: 1,
            ..PowerOptions::default()
        };
        let r = rk_power_with(&alpha(7, &[0, 2, 3]), 2, &opts, 9).unwrap();
        assert!(!r.converged);
        assert!(r.residual > 0.0);
    }

    #[test]
    fn power_agrees_with_dense_blocks() {
        for (m, d, k) in [
            (5, vec![0, 1, 3], 2u32),
            (6, vec![1, 2, 4, 5], 2),
            (3, vec![0, 2], 4),
        ] {
            let a = alpha(m, &d);
            let dense = rk_dense(&a, k, 512).unwrap();
            let power = rk_power(&a, k, 1e-12, 5).unwrap();
            assert!((dense.r_k - power.r_k).abs() < 1e-8, "{a} k={k}");
        }
    }

    #[test]
    fn beta_lower_examples() {
        let b = beta_lower(&alpha(4, &[0, 1]), 1, 1e-12, 0).unwrap();
        assert!((b + (PI / 8.0).cos().ln() / 4f64.ln()).abs() < 1e-9);
        let b = beta_lower(&alpha(3, &[0, 2]), 1, 1e-12, 0).unwrap();
        assert!(b.abs() < 1e-9);
        assert!(matches!(
            beta_lower(&Alphabet::full(3).unwrap(), 1, 1e-12, 0),
            Err(Error::TrivialAlphabet { m: 3, a: 3 })
        ));
        assert!(matches!(
            beta_lower(&alpha(3, &[1]), 1, 1e-12, 0),
            Err(Error::TrivialAlphabet { .. })
        ));
    }

    #[test]
    fn schur_examples() {
        let s = schur_bound(&alpha(4, &[0, 1]));
        assert!((s - (0.5 + 2f64.sqrt() / 4.0)).abs() < 1e-12);
        assert!((s - 0.853_55).abs() < 1e-5);
        assert!((schur_bound(&alpha(6, &[2])) - 1.0 / 6.0).abs() < 1e-15);
        assert!((schur_bound(&alpha(3, &[0, 2])) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn envelopes_at_half() {
        let e = Envelopes::new(0.5);
        assert_eq!(e.volume_bound, 0.0);
        assert!((e.red_line - 0.125).abs() < 1e-15);
        assert!((e.best_possible - 0.25).abs() < 1e-15);
    }

    #[test]
    fn report_row_matches_header() {
        let r = r1_dense(&alpha(4, &[0, 1])).unwrap();
        let row = r.csv_record();
        assert_eq!(row.len(), SpectralReport::CSV_HEADER.len());
        assert_eq!(row[1], "4:0,1");
        assert_eq!(row[5], "dense");
    }
}
