//! Open quantum maps `B_N = F_N^{-1} diag(blocks)`, where block `a` is
//! `chi F_{N/M} chi` for `a` in the alphabet and zero otherwise.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::cantor::{checked_size, Alphabet};
use crate::error::{Error, Result};
use crate::fourier::DftPlan;
use crate::linalg::{operator_norm, CMatrix};
use crate::rng;
use crate::Limits;

const NORM_TOL: f64 = 1e-12;
const NORM_MAX_ITER: usize = 20_000;

/// Cutoff applied on both sides of each block transform.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Cutoff {
    /// `chi = 1`.
    #[default]
    Identity,
    /// Real weights on `0..N/M`.
    Weights(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct OpenQuantumMap {
    alphabet: Alphabet,
    k: u32,
    n: usize,
    weights: Vec<f64>,
    matrix: CMatrix,
}

fn block_entry(w: &[f64], r: usize, c: usize) -> Complex64 {
    let n = w.len();
    let e = (r * c % n) as f64;
    Complex64::from_polar(w[r] * w[c] / (n as f64).sqrt(), -2.0 * PI * e / n as f64)
}

pub fn build_bn(alphabet: &Alphabet, k: u32, cutoff: Cutoff) -> Result<OpenQuantumMap> {
    build_bn_with_cap(alphabet, k, cutoff, Limits::default().oqm_dense_cap)
}

pub fn build_bn_with_cap(
    alphabet: &Alphabet,
    k: u32,
    cutoff: Cutoff,
    dense_cap: u64,
) -> Result<OpenQuantumMap> {
    if k < 2 {
        return Err(Error::OrderTooSmall { k, min: 2 });
    }
    let n = checked_size(alphabet.base(), k, dense_cap)? as usize;
    let sub = n / alphabet.base();
    let weights = match cutoff {
        Cutoff::Identity => vec![1.0; sub],
        Cutoff::Weights(w) => {
            if w.len() != sub {
                return Err(Error::LengthMismatch {
                    expected: sub,
                    got: w.len(),
                });
            }
            if let Some(i) = w.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(i));
            }
            w
        }
    };
    let plan = DftPlan::with_radix(alphabet.base(), k);
    let mut matrix = CMatrix::zeros(n, n);
    let mut column = vec![Complex64::default(); n];
    let mut image = vec![Complex64::default(); n];
    for &a in alphabet.digits() {
        for c in 0..sub {
            column.iter_mut().for_each(|z| *z = Complex64::default());
            for r in 0..sub {
                column[a * sub + r] = block_entry(&weights, r, c);
            }
            plan.inverse_into(&column, &mut image);
            for (row, z) in image.iter().enumerate() {
                matrix[(row, a * sub + c)] = *z;
            }
        }
    }
    Ok(OpenQuantumMap {
        alphabet: alphabet.clone(),
        k,
        n,
        weights,
        matrix,
    })
}

impl OpenQuantumMap {
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// The block-diagonal factor before `F_N^{-1}` is applied.
    pub fn middle_factor(&self) -> CMatrix {
        let sub = self.weights.len();
        CMatrix::from_fn(self.n, self.n, |i, j| {
            let (bi, bj) = (i / sub, j / sub);
            if bi == bj && self.alphabet.contains_digit(bi) {
                block_entry(&self.weights, i % sub, j % sub)
            } else {
                Complex64::default()
            }
        })
    }

    /// `B_N u` computed with FFTs, without the dense matrix.
    pub fn apply(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        if u.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: u.len(),
            });
        }
        let sub = self.weights.len();
        let inner = DftPlan::new(sub);
        let mut mid = vec![Complex64::default(); self.n];
        for &a in self.alphabet.digits() {
            let block: Vec<Complex64> =
                (0..sub).map(|r| u[a * sub + r] * self.weights[r]).collect();
            let out = inner.forward(&block)?;
            for r in 0..sub {
                mid[a * sub + r] = out[r] * self.weights[r];
            }
        }
        DftPlan::with_radix(self.alphabet.base(), self.k).inverse(&mid)
    }

    /// Operator norm by power iteration on the dense matrix.
    pub fn norm(&self, seed: u64) -> f64 {
        operator_norm(
            &self.matrix,
            NORM_TOL,
            NORM_MAX_ITER,
            &mut rng::rng_from_seed(seed),
        )
        .norm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralRadius {
    /// Extrapolated estimate, clamped to `[0, rho_upper]`.
    pub rho: f64,
    /// Last raw Gelfand term; always an upper bound for the spectral radius.
    pub rho_upper: f64,
    /// Number of squarings performed.
    pub j_used: u32,
    /// `||B^(2^j)||^(1/2^j)` for `j = 0..=j_used`.
    pub norm_sequence: Vec<f64>,
    pub converged: bool,
}

/// Squarings performed before convergence is tested. Non-normal maps often
/// keep `||B^n|| = 1` for the first few powers.
pub const MIN_SQUARINGS: u32 = 3;

/// Gelfand estimate of the spectral radius by repeated squaring.
///
/// Each power is renormalised before squaring and its scale carried in log
/// form. With `e_j = log ||B^(2^j)|| / 2^j ~ log rho + c / 2^j`, the
/// Richardson step `2 e_j - e_(j-1)` removes the leading error term. Stops
/// when two consecutive extrapolated values differ by at most `tol` relative
/// (after [`MIN_SQUARINGS`]), when a power vanishes, or after `j_max`
/// squarings.
pub fn spectral_radius(b: &OpenQuantumMap, j_max: u32, tol: f64, seed: u64) -> SpectralRadius {
    let mut power = b.matrix.clone();
    let mut log_scale = 0.0f64;
    let mut logs: Vec<f64> = Vec::new();
    let mut extrapolated: Vec<f64> = Vec::new();
    let mut j = 0u32;
    let finish = |logs: &[f64], extrapolated: &[f64], j: u32, converged: bool| {
        let seq: Vec<f64> = logs.iter().map(|e| e.exp()).collect();
        let upper = seq.last().copied().unwrap_or(0.0);
        let rho = extrapolated.last().map_or(upper, |e| e.exp().min(upper));
        SpectralRadius {
            rho,
            rho_upper: upper,
            j_used: j,
            norm_sequence: seq,
            converged,
        }
    };
    loop {
        let norm = operator_norm(
            &power,
            NORM_TOL,
            NORM_MAX_ITER,
            &mut rng::stream(seed, j as u64),
        )
        .norm;
        if norm == 0.0 || !norm.is_finite() {
            return SpectralRadius {
                rho: 0.0,
                rho_upper: 0.0,
                j_used: j,
                norm_sequence: logs.iter().map(|e| e.exp()).chain([0.0]).collect(),
                converged: true,
            };
        }
        let log_norm = log_scale + norm.ln();
        logs.push(log_norm / 2f64.powi(j as i32));
        if j >= 1 {
            extrapolated.push(2.0 * logs[j as usize] - logs[j as usize - 1]);
        }
        if j >= MIN_SQUARINGS && extrapolated.len() >= 2 {
            let (a, c) = (
                extrapolated[extrapolated.len() - 2],
                extrapolated[extrapolated.len() - 1],
            );
            if (a.exp() - c.exp()).abs() <= tol * a.exp() {
                return finish(&logs, &extrapolated, j, true);
            }
        }
        if j >= j_max {
            return finish(&logs, &extrapolated, j, false);
        }
        power.scale(1.0 / norm);
        power = power.matmul(&power);
        log_scale = 2.0 * log_norm;
        j += 1;
    }
}

/// A named exponent to compare `rho` against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaCandidate {
    pub label: String,
    pub beta: f64,
}

/// The volume exponent and `1/2 - 3 delta/4 - eps` for the given alphabet.
pub fn default_candidates(alphabet: &Alphabet, epsilon: f64) -> Vec<BetaCandidate> {
    let d = alphabet.dimension();
    vec![
        BetaCandidate {
            label: "volume".into(),
            beta: (0.5 - d).max(0.0),
        },
        BetaCandidate {
            label: format!("red_line_minus_{epsilon}"),
            beta: 0.5 - 0.75 * d - epsilon,
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapFlag {
    BoundHolds,
    AsymptoticRegimeNotReached,
    /// `M^{-beta} >= 1`, which every contraction satisfies.
    Vacuous,
}

impl std::fmt::Display for GapFlag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GapFlag::BoundHolds => "bound_holds",
            GapFlag::AsymptoticRegimeNotReached => "asymptotic_regime_not_reached",
            GapFlag::Vacuous => "vacuous",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub m: usize,
    pub alphabet: Alphabet,
    pub k: u32,
    pub n: usize,
    pub rho: f64,
    pub rho_upper: f64,
    pub norm: f64,
    pub rho_converged: bool,
    pub beta_label: String,
    pub beta: f64,
    pub m_pow_neg_beta: f64,
    pub m_pow_pos_beta: f64,
    pub flag: GapFlag,
}

impl GapRow {
    pub const CSV_HEADER: [&'static str; 13] = [
        "M",
        "alphabet",
        "k",
        "N",
        "rho",
        "rho_upper",
        "norm",
        "rho_converged",
        "beta_label",
        "beta",
        "m_pow_neg_beta",
        "m_pow_pos_beta",
        "flag",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.m.to_string(),
            self.alphabet.to_string(),
            self.k.to_string(),
            self.n.to_string(),
            self.rho.to_string(),
            self.rho_upper.to_string(),
            self.norm.to_string(),
            self.rho_converged.to_string(),
            self.beta_label.clone(),
            self.beta.to_string(),
            self.m_pow_neg_beta.to_string(),
            self.m_pow_pos_beta.to_string(),
            self.flag.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapOptions {
    pub j_max: u32,
    pub tol: f64,
    pub seed: u64,
    pub dense_cap: u64,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self {
            j_max: 12,
            tol: 1e-4,
            seed: 0,
            dense_cap: Limits::default().oqm_dense_cap,
        }
    }
}

/// One row per order and candidate exponent.
pub fn gap_report(
    alphabet: &Alphabet,
    ks: &[u32],
    candidates: &[BetaCandidate],
    opts: &GapOptions,
) -> Result<Vec<GapRow>> {
    let m = alphabet.base();
    let mut rows = Vec::new();
    for &k in ks {
        let b = build_bn_with_cap(alphabet, k, Cutoff::Identity, opts.dense_cap)?;
        let seed = rng::derive_seed(opts.seed, k as u64);
        let norm = b.norm(seed);
        let sr = spectral_radius(&b, opts.j_max, opts.tol, seed);
        for c in candidates {
            let neg = (m as f64).powf(-c.beta);
            let flag = if neg >= 1.0 {
                GapFlag::Vacuous
            } else if sr.rho <= neg {
                GapFlag::BoundHolds
            } else {
                GapFlag::AsymptoticRegimeNotReached
            };
            rows.push(GapRow {
                m,
                alphabet: alphabet.clone(),
                k,
                n: b.n(),
                rho: sr.rho,
                rho_upper: sr.rho_upper,
                norm,
                rho_converged: sr.converged,
                beta_label: c.label.clone(),
                beta: c.beta,
                m_pow_neg_beta: neg,
                m_pow_pos_beta: (m as f64).powf(c.beta),
                flag,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::naive_dft;
    use rand::Rng;

    fn alpha(m: usize, d: &[usize]) -> Alphabet {
        Alphabet::new(m, d).unwrap()
    }

    #[test]
    fn three_two_layout() {
        let b = build_bn(&alpha(3, &[0, 2]), 2, Cutoff::Identity).unwrap();
        let d = b.middle_factor();
        for i in 0..9 {
            for j in 0..9 {
                let (bi, bj) = (i / 3, j / 3);
                let zero = d[(i, j)].norm() == 0.0;
                assert_eq!(zero, !(bi == bj && bi != 1), "({i},{j})");
            }
        }
        // B = F^{-1} D, so F B recovers D.
        for j in 0..9 {
            let col: Vec<Complex64> = (0..9).map(|i| b.matrix()[(i, j)]).collect();
            let back = naive_dft(&col);
            for i in 0..9 {
                assert!((back[i] - d[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn radius_escapes_the_unit_plateau() {
        // ||B|| = ||B^2|| = 1 here while the spectral radius is about 0.90043;
        // reference value from an independent dense eigensolver.
        let b = build_bn(&alpha(3, &[0, 2]), 2, Cutoff::Identity).unwrap();
        let sr = spectral_radius(&b, 14, 1e-7, 1);
        assert!((sr.norm_sequence[1] - 1.0).abs() < 1e-9);
        assert!((sr.rho - 0.9004329787).abs() < 1e-5, "{}", sr.rho);
        assert!(sr.rho <= sr.rho_upper);
    }

    #[test]
    fn build_errors() {
        assert!(matches!(
            build_bn(&alpha(3, &[0, 2]), 1, Cutoff::Identity),
            Err(Error::OrderTooSmall { k: 1, min: 2 })
        ));
        assert!(matches!(
            build_bn(&alpha(3, &[0, 2]), 8, Cutoff::Identity),
            Err(Error::OrderTooLarge { .. })
        ));
        assert!(matches!(
            build_bn(&alpha(3, &[0, 2]), 2, Cutoff::Weights(vec![1.0; 2])),
            Err(Error::LengthMismatch {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn norms_with_identity_cutoff() {
        let b = build_bn(&Alphabet::full(3).unwrap(), 3, Cutoff::Identity).unwrap();
        assert!((b.norm(1) - 1.0).abs() < 1e-10);
        let b = build_bn(&alpha(3, &[0, 2]), 2, Cutoff::Identity).unwrap();
        assert!(b.norm(2) <= 1.0 + 1e-9);
    }

    #[test]
    fn dense_matches_matrix_free() {
        for (a, k) in [(alpha(3, &[0, 2]), 3u32), (alpha(4, &[1, 2]), 2)] {
            let b = build_bn(&a, k, Cutoff::Identity).unwrap();
            for j in 0..b.n() {
                let mut e = vec![Complex64::default(); b.n()];
                e[j] = Complex64::new(1.0, 0.0);
                let col = b.apply(&e).unwrap();
                for i in 0..b.n() {
                    assert!((col[i] - b.matrix()[(i, j)]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn weighted_cutoff_contracts() {
        let w: Vec<f64> = (0..9).map(|i| (i as f64 / 9.0 * PI).sin().abs()).collect();
        let b = build_bn(&alpha(3, &[0, 2]), 3, Cutoff::Weights(w)).unwrap();
        let mut r = rng::rng_from_seed(3);
        for _ in 0..5 {
            let u: Vec<Complex64> = (0..27)
                .map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
                .collect();
            let nu = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let bu = b.apply(&u).unwrap();
            let nbu = bu.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(nbu <= nu * (1.0 + 1e-9));
        }
    }

    #[test]
    fn spectral_radius_examples() {
        let b = build_bn(&Alphabet::full(3).unwrap(), 2, Cutoff::Identity).unwrap();
        let sr = spectral_radius(&b, 12, 1e-4, 0);
        assert!((sr.rho - 1.0).abs() < 1e-6);

        let b = build_bn(&alpha(3, &[1]), 2, Cutoff::Identity).unwrap();
        let sr = spectral_radius(&b, 12, 1e-4, 0);
        let norm = b.norm(0);
        assert!(sr.rho <= norm + 1e-6);
        assert!(sr
            .norm_sequence
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-6)));

        let b = build_bn(&alpha(3, &[0, 2]), 3, Cutoff::Identity).unwrap();
        let sr = spectral_radius(&b, 12, 1e-4, 0);
        assert!(sr.rho <= b.norm(0) + 1e-6);
        assert!(sr.rho > 0.0);
    }

    #[test]
    fn gap_report_flags() {
        let full = Alphabet::full(3).unwrap();
        let cands = vec![
            BetaCandidate {
                label: "a".into(),
                beta: 0.1,
            },
            BetaCandidate {
                label: "b".into(),
                beta: -0.2,
            },
        ];
        let rows = gap_report(&full, &[2], &cands, &GapOptions::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].flag, GapFlag::AsymptoticRegimeNotReached);
        assert_eq!(rows[1].flag, GapFlag::Vacuous);
        assert_eq!(rows[0].csv_record().len(), GapRow::CSV_HEADER.len());

        let a = alpha(3, &[0, 2]);
        let c = default_candidates(&a, 0.1);
        let d = 2f64.ln() / 3f64.ln();
        assert!((c[1].beta - (0.5 - 0.75 * d - 0.1)).abs() < 1e-15);
        let rows = gap_report(&a, &[2, 3], &c, &GapOptions::default()).unwrap();
        assert_eq!(rows.len(), 4);
        assert!((rows[1].m_pow_neg_beta - 3f64.powf(-c[1].beta)).abs() < 1e-15);
    }
}
