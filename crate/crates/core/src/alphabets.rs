//! The space of alphabets with `A` digits in base `M`, under the uniform
//! counting measure and the symmetric-difference metric.

use std::f64::consts::PI;

use num_bigint::BigUint;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cantor::Alphabet;
use crate::error::{Error, Result};
use crate::rng;
use crate::Limits;

/// Ranks per parallel work item. Fixed so that results never depend on the
/// number of threads.
const CHUNK: u128 = 1 << 14;

/// Relative slack used when comparing exponential sums against `L sqrt(A)`.
const CMP_SLACK: f64 = 1e-12;

/// Normal quantile for 95% Wilson intervals.
const Z95: f64 = 1.959_963_984_540_054;

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// `C(m, a)` exactly; zero when `a > m`.
pub fn space_cardinality(m: usize, a: usize) -> BigUint {
    if a > m {
        return BigUint::from(0u8);
    }
    let k = a.min(m - a);
    let mut c = BigUint::from(1u8);
    for i in 0..k {
        c = c * BigUint::from(m - i) / BigUint::from(i + 1);
    }
    c
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlphabetSpace {
    pub m: usize,
    pub a: usize,
    #[serde(serialize_with = "ser_big")]
    pub cardinality: BigUint,
    #[serde(skip)]
    cap: u64,
}

fn ser_big<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl AlphabetSpace {
    pub fn new(m: usize, a: usize) -> Result<Self> {
        Self::with_cap(m, a, Limits::default().enumeration_cap)
    }

    pub fn with_cap(m: usize, a: usize, cap: u64) -> Result<Self> {
        if m < 3 {
            return Err(Error::BaseTooSmall(m));
        }
        if a == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if a > m {
            return Err(Error::InvalidParameter(format!(
                "alphabet size {a} exceeds the base {m}"
            )));
        }
        Ok(Self {
            m,
            a,
            cardinality: space_cardinality(m, a),
            cap,
        })
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn dimension(&self) -> f64 {
        (self.a as f64).ln() / (self.m as f64).ln()
    }

    /// The cardinality as a machine integer, if it is within the cap.
    pub fn enumerable_count(&self) -> Result<u128> {
        self.check_count(&self.cardinality)
    }

    fn check_count(&self, count: &BigUint) -> Result<u128> {
        let too_large = || Error::EnumerationTooLarge {
            count: u128::try_from(count).unwrap_or(u128::MAX),
            cap: self.cap,
        };
        let n = u128::try_from(count).map_err(|_| too_large())?;
        if n > self.cap as u128 {
            return Err(too_large());
        }
        Ok(n)
    }

    /// Lexicographic rank of `alphabet`.
    pub fn rank(&self, alphabet: &Alphabet) -> Result<u128> {
        if alphabet.base() != self.m {
            return Err(Error::BaseMismatch(self.m, alphabet.base()));
        }
        if alphabet.card() != self.a {
            return Err(Error::InvalidParameter(format!(
                "alphabet has {} digits, space expects {}",
                alphabet.card(),
                self.a
            )));
        }
        let mut r = 0u128;
        let mut next = 0;
        for (i, &c) in alphabet.digits().iter().enumerate() {
            for v in next..c {
                r += binom(self.m - 1 - v, self.a - 1 - i);
            }
            next = c + 1;
        }
        Ok(r)
    }

    /// Inverse of [`AlphabetSpace::rank`].
    pub fn unrank(&self, mut r: u128) -> Result<Alphabet> {
        let total = u128::try_from(&self.cardinality).unwrap_or(u128::MAX);
        if r >= total {
            return Err(Error::IndexOutOfRange {
                index: u64::try_from(r).unwrap_or(u64::MAX),
                n: u64::try_from(total).unwrap_or(u64::MAX),
            });
        }
        Alphabet::new(self.m, &unrank_digits(self.m, self.a, &mut r))
    }

    /// All alphabets in lexicographic order.
    pub fn iter(&self) -> Result<Combinations> {
        let count = self.enumerable_count()?;
        Ok(Combinations::starting_at(self.m, self.a, 0, count))
    }
}

fn unrank_digits(m: usize, a: usize, r: &mut u128) -> Vec<usize> {
    let mut digits = Vec::with_capacity(a);
    let mut v = 0;
    for i in 0..a {
        loop {
            let c = binom(m - 1 - v, a - 1 - i);
            if *r < c {
                break;
            }
            *r -= c;
            v += 1;
        }
        digits.push(v);
        v += 1;
    }
    digits
}

/// Lexicographic iterator over `a`-subsets of `0..m`.
#[derive(Debug, Clone)]
pub struct Combinations {
    m: usize,
    current: Vec<usize>,
    remaining: u128,
}

impl Combinations {
    fn starting_at(m: usize, a: usize, mut start: u128, remaining: u128) -> Self {
        let current = if remaining > 0 {
            unrank_digits(m, a, &mut start)
        } else {
            Vec::new()
        };
        Self {
            m,
            current,
            remaining,
        }
    }

    fn advance(&mut self) {
        let a = self.current.len();
        let mut i = a;
        while i > 0 {
            i -= 1;
            if self.current[i] < self.m - a + i {
                self.current[i] += 1;
                for j in i + 1..a {
                    self.current[j] = self.current[j - 1] + 1;
                }
                return;
            }
        }
    }
}

impl Iterator for Combinations {
    type Item = Alphabet;

    fn next(&mut self) -> Option<Alphabet> {
        if self.remaining == 0 {
            return None;
        }
        let out = Alphabet::new(self.m, &self.current).expect("valid combination");
        self.remaining -= 1;
        if self.remaining > 0 {
            self.advance();
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

pub fn enumerate(m: usize, a: usize) -> Result<Combinations> {
    AlphabetSpace::new(m, a)?.iter()
}

/// Uniform draw by partial Fisher-Yates selection.
pub fn sample(space: &AlphabetSpace, rng: &mut impl Rng) -> Alphabet {
    let mut pool: Vec<usize> = (0..space.m).collect();
    for i in 0..space.a {
        let j = rng.gen_range(i..space.m);
        pool.swap(i, j);
    }
    Alphabet::new(space.m, &pool[..space.a]).expect("distinct digits")
}

/// `n` uniform draws; draw `i` depends only on `(seed, i)`.
pub fn sample_many(space: &AlphabetSpace, n: u64, seed: u64) -> Vec<Alphabet> {
    let chunks = n.div_ceil(CHUNK as u64);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(seed, c);
            let len = (n - c * CHUNK as u64).min(CHUNK as u64);
            (0..len).map(|_| sample(space, &mut r)).collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

/// `|A1 symmetric-difference A2|`.
pub fn metric(a1: &Alphabet, a2: &Alphabet) -> Result<usize> {
    if a1.base() != a2.base() {
        return Err(Error::BaseMismatch(a1.base(), a2.base()));
    }
    Ok((0..a1.base())
        .filter(|&d| a1.contains_digit(d) != a2.contains_digit(d))
        .count())
}

fn unit(num: i64, den: usize) -> Complex64 {
    let e = num.rem_euclid(den as i64);
    Complex64::from_polar(1.0, 2.0 * PI * e as f64 / den as f64)
}

/// `sum_{j in A} exp(2 pi i m j / M)`.
pub fn exp_sum(alphabet: &Alphabet, m_freq: i64) -> Complex64 {
    let base = alphabet.base() as i64;
    let m = m_freq.rem_euclid(base);
    alphabet
        .digits()
        .iter()
        .map(|&j| unit(m * j as i64, alphabet.base()))
        .sum()
}

/// Lipschitz constant of `exp_sum(., m_freq)` on the space, computed from
/// the largest chord between two of the M roots it can swap.
pub fn exp_sum_lipschitz(space: &AlphabetSpace, m_freq: i64) -> f64 {
    if space.a == space.m {
        return 0.0;
    }
    let mut best = 0.0f64;
    for j in 0..space.m {
        for l in j + 1..space.m {
            let d = unit(m_freq * j as i64, space.m) - unit(m_freq * l as i64, space.m);
            best = best.max(d.norm());
        }
    }
    best / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::MonteCarlo { .. } => "monte_carlo",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Mode::Exact => None,
            Mode::MonteCarlo { seed, .. } => Some(*seed),
        }
    }
}

/// The alphabets a mode ranges over: the whole space in rank order, or the
/// seeded sample in draw order.
pub fn population(space: &AlphabetSpace, mode: Mode) -> Result<Vec<Alphabet>> {
    match mode {
        Mode::Exact => {
            let count = space.enumerable_count()?;
            let chunks = count.div_ceil(CHUNK);
            Ok((0..chunks)
                .into_par_iter()
                .map(|c| {
                    let start = c * CHUNK;
                    let len = (count - start).min(CHUNK);
                    Combinations::starting_at(space.m, space.a, start, len).collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
                .concat())
        }
        Mode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidParameter(
                    "sample count must be positive".into(),
                ));
            }
            Ok(sample_many(space, samples, seed))
        }
    }
}

fn evaluate<F>(f: &F, space: &AlphabetSpace, mode: Mode) -> Result<Vec<Complex64>>
where
    F: Fn(&Alphabet) -> Complex64 + Sync,
{
    Ok(population(space, mode)?.par_iter().map(f).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    #[serde(serialize_with = "ser_complex")]
    pub value: Complex64,
    /// Zero in exact mode.
    pub std_error: f64,
    pub count: u64,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(&crate::format_complex(*z))
}

fn mean_of(values: &[Complex64]) -> Complex64 {
    values.iter().sum::<Complex64>() / values.len() as f64
}

fn estimate_from(values: &[Complex64], mode: Mode) -> Estimate {
    let n = values.len();
    let mean = mean_of(values);
    let std_error = match mode {
        Mode::Exact => 0.0,
        Mode::MonteCarlo { .. } if n > 1 => {
            let ss: f64 = values.iter().map(|v| (v - mean).norm_sqr()).sum();
            (ss / ((n - 1) as f64 * n as f64)).sqrt()
        }
        Mode::MonteCarlo { .. } => f64::INFINITY,
    };
    Estimate {
        value: mean,
        std_error,
        count: n as u64,
    }
}

pub fn expectation<F>(f: F, space: &AlphabetSpace, mode: Mode) -> Result<Estimate>
where
    F: Fn(&Alphabet) -> Complex64 + Sync,
{
    Ok(estimate_from(&evaluate(&f, space, mode)?, mode))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LipMode {
    /// Every pair of alphabets.
    AllPairs,
    /// Pairs at distance 2 only, which already attains the maximum.
    Swap,
}

pub fn lipschitz_norm<F>(f: F, space: &AlphabetSpace, mode: LipMode) -> Result<f64>
where
    F: Fn(&Alphabet) -> Complex64 + Sync,
{
    let count = space.enumerable_count()?;
    match mode {
        LipMode::AllPairs => {
            let pairs = BigUint::from(count) * BigUint::from(count.saturating_sub(1)) / 2u8;
            space.check_count(&pairs)?;
            let points = population(space, Mode::Exact)?;
            let values: Vec<Complex64> = points.par_iter().map(&f).collect();
            Ok((0..points.len())
                .into_par_iter()
                .map(|i| {
                    let mut best = 0.0f64;
                    for j in i + 1..points.len() {
                        let d = metric(&points[i], &points[j]).expect("same base") as f64;
                        best = best.max((values[i] - values[j]).norm() / d);
                    }
                    best
                })
                .reduce(|| 0.0, f64::max))
        }
        LipMode::Swap => {
            let points = population(space, Mode::Exact)?;
            Ok(points
                .par_iter()
                .map(|p| {
                    let fp = f(p);
                    let mut best = 0.0f64;
                    let mut digits = p.digits().to_vec();
                    for i in 0..digits.len() {
                        let old = digits[i];
                        for e in (0..space.m).filter(|&e| !p.contains_digit(e)) {
                            digits[i] = e;
                            let q = Alphabet::new(space.m, &digits).expect("swap stays valid");
                            best = best.max((fp - f(&q)).norm());
                        }
                        digits[i] = old;
                    }
                    best / 2.0
                })
                .reduce(|| 0.0, f64::max))
        }
    }
}

/// Fraction of `values` with `|v - mean| >= t`.
fn tail_fraction(values: &[Complex64], mean: Complex64, t: f64) -> f64 {
    let hits = values.iter().filter(|v| (**v - mean).norm() >= t).count();
    hits as f64 / values.len() as f64
}

fn check_t(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "deviation t must be finite and non-negative, got {t}"
        )));
    }
    Ok(())
}

/// `mu(|f - E f| >= t)`, exact or estimated from the sample.
pub fn tail_probability<F>(f: F, space: &AlphabetSpace, t: f64, mode: Mode) -> Result<f64>
where
    F: Fn(&Alphabet) -> Complex64 + Sync,
{
    check_t(t)?;
    let values = evaluate(&f, space, mode)?;
    Ok(tail_fraction(&values, mean_of(&values), t))
}

/// `min(1, 2 exp(-t^2 / (16 A lip^2)))`.
pub fn concentration_bound(a_card: usize, lip: f64, t: f64) -> Result<f64> {
    if !(lip > 0.0) {
        return Err(Error::NonpositiveLipschitz(lip));
    }
    check_t(t)?;
    Ok((2.0 * (-t * t / (16.0 * a_card as f64 * lip * lip)).exp()).min(1.0))
}

/// 95% Wilson score interval for `hits / n`.
pub fn wilson_interval(p: f64, n: u64) -> (f64, f64) {
    let n = n as f64;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub m: usize,
    pub a: usize,
    pub t_grid: Vec<f64>,
    pub empirical_tail: Vec<f64>,
    pub bound: Vec<f64>,
    pub mode: Mode,
    /// Number of alphabets behind each empirical value.
    pub samples: u64,
    #[serde(serialize_with = "ser_complex")]
    pub mean: Complex64,
    pub lip: f64,
    /// Wilson intervals, Monte Carlo only.
    pub ci_low: Option<Vec<f64>>,
    pub ci_high: Option<Vec<f64>>,
}

impl TailReport {
    pub const CSV_HEADER: [&'static str; 8] = [
        "t",
        "empirical",
        "bound",
        "mode",
        "samples",
        "seed",
        "ci_low",
        "ci_high",
    ];

    pub fn csv_records(&self) -> Vec<Vec<String>> {
        let seed = self.mode.seed().map(|s| s.to_string()).unwrap_or_default();
        (0..self.t_grid.len())
            .map(|i| {
                let ci =
                    |v: &Option<Vec<f64>>| v.as_ref().map(|v| v[i].to_string()).unwrap_or_default();
                vec![
                    self.t_grid[i].to_string(),
                    self.empirical_tail[i].to_string(),
                    self.bound[i].to_string(),
                    self.mode.label().to_string(),
                    self.samples.to_string(),
                    seed.clone(),
                    ci(&self.ci_low),
                    ci(&self.ci_high),
                ]
            })
            .collect()
    }

    /// Whether every empirical value sits at or below `bound`.
    pub fn dominated_by(&self, bound: &[f64]) -> bool {
        self.empirical_tail
            .iter()
            .zip(bound)
            .all(|(e, b)| *e <= *b + 1e-15)
    }
}

/// Empirical tails of `f` over `t_grid`, next to [`concentration_bound`] with
/// Lipschitz constant `lip`. A zero `lip` means `f` is constant.
pub fn tail_report<F>(
    f: F,
    space: &AlphabetSpace,
    t_grid: &[f64],
    mode: Mode,
    lip: f64,
) -> Result<TailReport>
where
    F: Fn(&Alphabet) -> Complex64 + Sync,
{
    for &t in t_grid {
        check_t(t)?;
    }
    if lip < 0.0 || !lip.is_finite() {
        return Err(Error::NonpositiveLipschitz(lip));
    }
    let values = evaluate(&f, space, mode)?;
    let mean = mean_of(&values);
    let empirical_tail: Vec<f64> = t_grid
        .iter()
        .map(|&t| tail_fraction(&values, mean, t))
        .collect();
    let bound = t_grid
        .iter()
        .map(|&t| {
            if lip == 0.0 {
                Ok(if t > 0.0 { 0.0 } else { 1.0 })
            } else {
                concentration_bound(space.a, lip, t)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let n = values.len() as u64;
    let (ci_low, ci_high) = match mode {
        Mode::Exact => (None, None),
        Mode::MonteCarlo { .. } => {
            let (lo, hi) = empirical_tail
                .iter()
                .map(|&p| wilson_interval(p, n))
                .unzip();
            (Some(lo), Some(hi))
        }
    };
    Ok(TailReport {
        m: space.m,
        a: space.a,
        t_grid: t_grid.to_vec(),
        empirical_tail,
        bound,
        mode,
        samples: n,
        mean,
        lip,
        ci_low,
        ci_high,
    })
}

fn within(z: Complex64, level: f64) -> bool {
    z.norm() <= level * (1.0 + CMP_SLACK) + CMP_SLACK
}

/// Whether `|exp_sum(a, m)| <= L sqrt(A)` for every `m = 1..M-1`.
pub fn good_set_member(alphabet: &Alphabet, l: f64) -> bool {
    let level = l * (alphabet.card() as f64).sqrt();
    (1..alphabet.base() as i64).all(|m| within(exp_sum(alphabet, m), level))
}

/// Per-frequency failure bound `2 exp(-L^2 / 16)`.
pub fn frequency_bound_16(l: f64) -> f64 {
    (2.0 * (-l * l / 16.0).exp()).min(1.0)
}

/// Per-frequency failure bound `2 exp(-L^2 / 64)`.
pub fn frequency_bound_64(l: f64) -> f64 {
    (2.0 * (-l * l / 64.0).exp()).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoodSetReport {
    pub m: usize,
    pub a: usize,
    pub l: f64,
    pub mode: Mode,
    pub samples: u64,
    /// Measure of the alphabets outside the good set.
    pub complement: f64,
    /// Failure measure for each frequency `m = 1..M-1`.
    pub per_frequency: Vec<f64>,
    pub frequency_bound_16: f64,
    pub frequency_bound_64: f64,
    /// `min(1, 2 (M-1) exp(-L^2/16))`.
    pub union_bound_16: f64,
    /// `min(1, 4 M exp(-L^2/64))`.
    pub union_bound_64: f64,
}

impl GoodSetReport {
    pub const CSV_HEADER: [&'static str; 11] = [
        "M",
        "A",
        "L",
        "mode",
        "samples",
        "seed",
        "complement",
        "max_per_frequency",
        "frequency_bound_16",
        "union_bound_16",
        "union_bound_64",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.m.to_string(),
            self.a.to_string(),
            self.l.to_string(),
            self.mode.label().to_string(),
            self.samples.to_string(),
            self.mode.seed().map(|s| s.to_string()).unwrap_or_default(),
            self.complement.to_string(),
            self.max_per_frequency().to_string(),
            self.frequency_bound_16.to_string(),
            self.union_bound_16.to_string(),
            self.union_bound_64.to_string(),
        ]
    }

    pub fn max_per_frequency(&self) -> f64 {
        self.per_frequency.iter().copied().fold(0.0, f64::max)
    }
}

pub fn good_set_report(space: &AlphabetSpace, l: f64, mode: Mode) -> Result<GoodSetReport> {
    if !(l > 0.0) {
        return Err(Error::NonpositiveInput("L"));
    }
    let points = population(space, mode)?;
    let n = points.len() as f64;
    let level = l * (space.a as f64).sqrt();
    let fails: Vec<Vec<bool>> = points
        .par_iter()
        .map(|p| {
            (1..space.m as i64)
                .map(|m| !within(exp_sum(p, m), level))
                .collect()
        })
        .collect();
    let per_frequency = (0..space.m - 1)
        .map(|i| fails.iter().filter(|f| f[i]).count() as f64 / n)
        .collect();
    let complement = fails.iter().filter(|f| f.iter().any(|&b| b)).count() as f64 / n;
    let m = space.m as f64;
    Ok(GoodSetReport {
        m: space.m,
        a: space.a,
        l,
        mode,
        samples: points.len() as u64,
        complement,
        per_frequency,
        frequency_bound_16: frequency_bound_16(l),
        frequency_bound_64: frequency_bound_64(l),
        union_bound_16: (2.0 * (m - 1.0) * (-l * l / 16.0).exp()).min(1.0),
        union_bound_64: (4.0 * m * (-l * l / 64.0).exp()).min(1.0),
    })
}
