//! Harnesses over whole alphabet spaces: success fractions for the
//! probabilistic bound, mean exponents, the dimension curve dataset and
//! exponential-sum concentration reports.

use rayon::prelude::*;
use serde::Serialize;

use crate::alphabets::{
    self, exp_sum, exp_sum_lipschitz, frequency_bound_16, frequency_bound_64, AlphabetSpace,
    LipMode, Mode, TailReport,
};
use crate::cantor::Alphabet;
use crate::error::{Error, Result};
use crate::rng;
use crate::spectral::{best_beta, beta_profile, Envelopes, PowerOptions, Solver};

/// Largest `N` used when picking a default `k_max`.
pub const DEFAULT_N_LIMIT: u64 = 100_000;
pub const DEFAULT_K_MAX: u32 = 4;

/// `min(4, max k with M^k <= 10^5)`.
pub fn default_k_max(m: usize) -> u32 {
    let mut k = 0;
    let mut n = 1u64;
    while k < DEFAULT_K_MAX && n * m as u64 <= DEFAULT_N_LIMIT {
        n *= m as u64;
        k += 1;
    }
    k.max(1)
}

fn check_nontrivial(m: usize, a: usize) -> Result<()> {
    if !(1 < a && a < m) {
        return Err(Error::TrivialAlphabet { m, a });
    }
    Ok(())
}

/// `beta_lower` for every alphabet of the population, in population order.
/// The power iteration for alphabet `i` is seeded from `(seed, i)`.
pub fn population_betas(
    space: &AlphabetSpace,
    mode: Mode,
    k_max: u32,
    opts: &PowerOptions,
    seed: u64,
) -> Result<Vec<(Alphabet, f64)>> {
    check_nontrivial(space.m, space.a)?;
    let pop = alphabets::population(space, mode)?;
    pop.into_par_iter()
        .enumerate()
        .map(|(i, a)| {
            let profile = beta_profile(&a, k_max, opts, rng::derive_seed(seed, i as u64))?;
            let b = best_beta(&profile);
            Ok((a, b))
        })
        .collect()
}

/// Relative tolerance for population sweeps. A relative error `e` in `r_k`
/// moves `beta_k` by about `e / (k ln M)`.
pub const SWEEP_TOL: f64 = 1e-10;

/// Solver settings for population sweeps: one Lanczos start at [`SWEEP_TOL`].
pub fn sweep_options() -> PowerOptions {
    PowerOptions {
        tol: SWEEP_TOL,
        restarts: 1,
        solver: Solver::Lanczos,
        ..PowerOptions::default()
    }
}

/// `max(0, 1 - 4 M exp(-M^{4 eps} / 64))`.
pub fn theorem_floor(m: usize, epsilon: f64) -> f64 {
    let m = m as f64;
    (1.0 - 4.0 * m * (-m.powf(4.0 * epsilon) / 64.0).exp()).max(0.0)
}

/// `1/2 - 3 delta / 4 - eps`.
pub fn fupc_threshold(delta: f64, epsilon: f64) -> f64 {
    0.5 - 0.75 * delta - epsilon
}

pub fn success_fraction(betas: &[f64], threshold: f64) -> f64 {
    betas.iter().filter(|&&b| b >= threshold).count() as f64 / betas.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FupcRecord {
    pub m: usize,
    pub a_card: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub threshold: f64,
    pub mode: Mode,
    /// Alphabets examined.
    pub count: u64,
    pub k_max: u32,
    pub success_fraction: f64,
    pub theorem_floor: f64,
    pub floor_vacuous: bool,
    pub floor_holds: bool,
    /// `delta < 2/3`.
    pub in_regime: bool,
    pub seed: u64,
}

impl FupcRecord {
    pub const CSV_HEADER: [&'static str; 14] = [
        "M",
        "A",
        "delta",
        "epsilon",
        "threshold",
        "mode",
        "count",
        "k_max",
        "success_fraction",
        "theorem_floor",
        "floor_vacuous",
        "floor_holds",
        "in_regime",
        "seed",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.m.to_string(),
            self.a_card.to_string(),
            self.delta.to_string(),
            self.epsilon.to_string(),
            self.threshold.to_string(),
            self.mode.label().to_string(),
            self.count.to_string(),
            self.k_max.to_string(),
            self.success_fraction.to_string(),
            self.theorem_floor.to_string(),
            self.floor_vacuous.to_string(),
            self.floor_holds.to_string(),
            self.in_regime.to_string(),
            self.seed.to_string(),
        ]
    }
}

/// Builds the record from precomputed exponents.
pub fn fupc_from_betas(
    space: &AlphabetSpace,
    epsilon: f64,
    mode: Mode,
    k_max: u32,
    seed: u64,
    betas: &[f64],
) -> FupcRecord {
    let delta = space.dimension();
    let threshold = fupc_threshold(delta, epsilon);
    let floor = theorem_floor(space.m, epsilon);
    let fraction = success_fraction(betas, threshold);
    FupcRecord {
        m: space.m,
        a_card: space.a,
        delta,
        epsilon,
        threshold,
        mode,
        count: betas.len() as u64,
        k_max,
        success_fraction: fraction,
        theorem_floor: floor,
        floor_vacuous: floor <= 0.0,
        floor_holds: fraction >= floor,
        in_regime: delta < 2.0 / 3.0,
        seed,
    }
}

pub fn fupc_experiment(
    m: usize,
    a_card: usize,
    epsilon: f64,
    mode: Mode,
    k_max: u32,
    seed: u64,
) -> Result<FupcRecord> {
    if !(epsilon > 0.0) {
        return Err(Error::NonpositiveInput("epsilon"));
    }
    let space = AlphabetSpace::new(m, a_card)?;
    let betas: Vec<f64> = population_betas(&space, mode, k_max, &sweep_options(), seed)?
        .into_iter()
        .map(|(_, b)| b)
        .collect();
    Ok(fupc_from_betas(&space, epsilon, mode, k_max, seed, &betas))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub m: usize,
    pub a_card: usize,
    pub delta: f64,
    pub mean_beta_lower: f64,
    /// Zero in exact mode.
    pub std_error: f64,
    pub count: u64,
    pub volume_bound: f64,
    pub red_line: f64,
    pub best_possible: f64,
    pub k_max: u32,
    pub mode: Mode,
    pub seed: u64,
    /// `mean >= red_line`; expected only for large `M`.
    pub above_red_line: bool,
    pub dominates_volume: bool,
}

impl CurvePoint {
    pub const CSV_HEADER: [&'static str; 15] = [
        "M",
        "A",
        "delta",
        "mean_beta_lower",
        "std_error",
        "count",
        "volume_bound",
        "red_line",
        "best_possible",
        "k_max",
        "mode",
        "samples",
        "seed",
        "above_red_line",
        "dominates_volume",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        let samples = match self.mode {
            Mode::Exact => String::new(),
            Mode::MonteCarlo { samples, .. } => samples.to_string(),
        };
        vec![
            self.m.to_string(),
            self.a_card.to_string(),
            self.delta.to_string(),
            self.mean_beta_lower.to_string(),
            self.std_error.to_string(),
            self.count.to_string(),
            self.volume_bound.to_string(),
            self.red_line.to_string(),
            self.best_possible.to_string(),
            self.k_max.to_string(),
            self.mode.label().to_string(),
            samples,
            self.seed.to_string(),
            self.above_red_line.to_string(),
            self.dominates_volume.to_string(),
        ]
    }
}

/// Tolerance for the volume-bound comparison.
pub const VOLUME_TOL: f64 = 1e-6;

pub fn curve_point_from_betas(
    space: &AlphabetSpace,
    k_max: u32,
    mode: Mode,
    seed: u64,
    betas: &[f64],
) -> CurvePoint {
    let n = betas.len() as f64;
    let mean = betas.iter().sum::<f64>() / n;
    let std_error = match mode {
        Mode::Exact => 0.0,
        Mode::MonteCarlo { .. } if betas.len() > 1 => {
            let ss: f64 = betas.iter().map(|b| (b - mean).powi(2)).sum();
            (ss / ((n - 1.0) * n)).sqrt()
        }
        Mode::MonteCarlo { .. } => f64::INFINITY,
    };
    let delta = space.dimension();
    let env = Envelopes::new(delta);
    CurvePoint {
        m: space.m,
        a_card: space.a,
        delta,
        mean_beta_lower: mean,
        std_error,
        count: betas.len() as u64,
        volume_bound: env.volume_bound,
        red_line: env.red_line,
        best_possible: env.best_possible,
        k_max,
        mode,
        seed,
        above_red_line: mean >= env.red_line,
        dominates_volume: mean >= env.volume_bound - VOLUME_TOL,
    }
}

pub fn expectation_experiment(
    m: usize,
    a_card: usize,
    k_max: u32,
    mode: Mode,
    seed: u64,
) -> Result<CurvePoint> {
    let space = AlphabetSpace::new(m, a_card)?;
    let betas: Vec<f64> = population_betas(&space, mode, k_max, &sweep_options(), seed)?
        .into_iter()
        .map(|(_, b)| b)
        .collect();
    Ok(curve_point_from_betas(&space, k_max, mode, seed, &betas))
}

/// One exact curve point per `(M, A)` with `1 < A < M`. `k_max` defaults to
/// [`default_k_max`] for each `M`.
pub fn figure1_dataset(
    m_range: std::ops::RangeInclusive<usize>,
    k_max: Option<u32>,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::new();
    for m in m_range {
        let k = k_max.unwrap_or_else(|| default_k_max(m));
        for a in 2..m {
            out.push(expectation_experiment(m, a, k, Mode::Exact, seed)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub freq: i64,
    /// Empirical tails with the bound from the measured Lipschitz constant.
    pub tail: TailReport,
    pub lip_mode: &'static str,
    /// `2 exp(-L^2/16)` with `L = t / sqrt(A)`.
    pub bound_16: Vec<f64>,
    /// `2 exp(-L^2/64)` with `L = t / sqrt(A)`.
    pub bound_64: Vec<f64>,
    pub held_measured: bool,
    pub held_16: bool,
    pub held_64: bool,
}

impl ConcentrationReport {
    pub const CSV_HEADER: [&'static str; 12] = [
        "t",
        "empirical",
        "bound",
        "mode",
        "samples",
        "seed",
        "ci_low",
        "ci_high",
        "L",
        "bound_16",
        "bound_64",
        "lip",
    ];

    pub fn csv_records(&self) -> Vec<Vec<String>> {
        let sqrt_a = (self.tail.a as f64).sqrt();
        self.tail
            .csv_records()
            .into_iter()
            .enumerate()
            .map(|(i, mut row)| {
                row.push((self.tail.t_grid[i] / sqrt_a).to_string());
                row.push(self.bound_16[i].to_string());
                row.push(self.bound_64[i].to_string());
                row.push(self.tail.lip.to_string());
                row
            })
            .collect()
    }
}

/// `n` equally spaced points on `[0, hi]`.
pub fn uniform_grid(hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Tails of `exp_sum(., freq)` against the measured-Lipschitz bound and both
/// per-frequency forms. Exact mode measures the Lipschitz constant over all
/// swaps; Monte Carlo uses the closed form.
pub fn concentration_experiment(
    m: usize,
    a_card: usize,
    freq: i64,
    t_grid: &[f64],
    mode: Mode,
) -> Result<ConcentrationReport> {
    concentration_experiment_in(&AlphabetSpace::new(m, a_card)?, freq, t_grid, mode)
}

/// [`concentration_experiment`] over a space with its own caps.
pub fn concentration_experiment_in(
    space: &AlphabetSpace,
    freq: i64,
    t_grid: &[f64],
    mode: Mode,
) -> Result<ConcentrationReport> {
    let (m, a_card) = (space.m, space.a);
    if freq.rem_euclid(m as i64) == 0 {
        return Err(Error::InvalidParameter(format!(
            "frequency {freq} is divisible by M = {m}"
        )));
    }
    let f = |a: &Alphabet| exp_sum(a, freq);
    let (lip, lip_mode) = match mode {
        Mode::Exact => (alphabets::lipschitz_norm(f, space, LipMode::Swap)?, "swap"),
        Mode::MonteCarlo { .. } => (exp_sum_lipschitz(space, freq), "closed_form"),
    };
    let tail = alphabets::tail_report(f, space, t_grid, mode, lip)?;
    let sqrt_a = (a_card as f64).sqrt();
    let bound_16: Vec<f64> = t_grid
        .iter()
        .map(|t| frequency_bound_16(t / sqrt_a))
        .collect();
    let bound_64: Vec<f64> = t_grid
        .iter()
        .map(|t| frequency_bound_64(t / sqrt_a))
        .collect();
    Ok(ConcentrationReport {
        freq,
        held_measured: tail.dominated_by(&tail.bound),
        held_16: tail.dominated_by(&bound_16),
        held_64: tail.dominated_by(&bound_64),
        tail,
        lip_mode,
        bound_16,
        bound_64,
    })
}
