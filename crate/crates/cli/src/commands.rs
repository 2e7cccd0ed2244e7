//! Drivers for the reporting subcommands.

use clap::Args;
use fup_core::alphabets::{good_set_report, AlphabetSpace, Mode};
use fup_core::experiments::{
    concentration_experiment_in, curve_point_from_betas, default_k_max, fupc_from_betas,
    population_betas, sweep_options, uniform_grid, ConcentrationReport, CurvePoint, FupcRecord,
};
use fup_core::oqm::{default_candidates, gap_report, GapOptions, GapRow};
use fup_core::spectral::{
    r1_dense_with, rk_power_with, schur_bound, Envelopes, PowerOptions, Solver, SpectralReport,
};
use fup_core::{format_complex, Alphabet};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{emit, Report, Table};
use crate::{CliError, ModeArgs};

/// Parses `lo..hi` (inclusive) or a single value.
pub fn parse_range(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("expected `lo..hi` or a number, got {s:?}"));
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
    let (lo, hi) = match s.split_once("..") {
        Some((lo, hi)) => (num(lo)?, num(hi.trim_start_matches('='))?),
        None => {
            let v = num(s)?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

fn parse_alphabet(s: &str) -> Result<Alphabet, CliError> {
    Ok(s.parse::<Alphabet>()?)
}

fn mode_of(args: &ModeArgs, seed: u64) -> Mode {
    match args.mc {
        Some(samples) => Mode::MonteCarlo { samples, seed },
        None => Mode::Exact,
    }
}

fn power_options(cfg: &RunConfig, tol: f64, lanczos: bool) -> PowerOptions {
    PowerOptions {
        tol,
        solver: if lanczos {
            Solver::Lanczos
        } else {
            Solver::Power
        },
        n_cap: cfg.limits.n_cap,
        ..PowerOptions::default()
    }
}

fn space(cfg: &RunConfig, m: usize, a: usize) -> Result<AlphabetSpace, CliError> {
    Ok(AlphabetSpace::with_cap(m, a, cfg.limits.enumeration_cap)?)
}

#[derive(Debug, Args, Serialize)]
pub struct BetaArgs {
    /// Alphabet as `M:d0,d1,...`, e.g. `3:0,2`.
    pub alphabet: String,
    #[arg(long = "kmax", default_value_t = 3)]
    pub kmax: u32,
    /// Relative tolerance for the power iteration.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Use the Lanczos solver instead of power iteration.
    #[arg(long)]
    pub lanczos: bool,
}

#[derive(Debug, Serialize)]
struct BetaRow {
    #[serde(flatten)]
    report: SpectralReport,
    schur_bound: f64,
    #[serde(flatten)]
    envelopes: Envelopes,
}

pub fn beta(cfg: &RunConfig, args: &BetaArgs) -> Result<(), CliError> {
    let alphabet = parse_alphabet(&args.alphabet)?;
    if args.kmax == 0 {
        return Err(CliError::Usage("--kmax must be at least 1".into()));
    }
    let opts = power_options(cfg, args.tol, args.lanczos);
    let mut reports = Vec::new();
    let mut report = Report::default();
    if alphabet.card() <= cfg.limits.dense_cap {
        reports.push(r1_dense_with(&alphabet, cfg.limits.dense_cap)?);
    } else {
        report.notes.push(format!(
            "dense route skipped: A exceeds dense cap {}",
            cfg.limits.dense_cap
        ));
    }
    for k in 1..=args.kmax {
        let seed = fup_core::rng::derive_seed(cfg.master_seed, k as u64);
        reports.push(rk_power_with(&alphabet, k, &opts, seed)?);
    }
    if alphabet.card() == 1 {
        report
            .notes
            .push("trivial alphabet (A = 1): r_k = N^(-1/2) for every k".into());
    } else if alphabet.card() == alphabet.base() {
        report
            .notes
            .push("trivial alphabet (A = M): the restriction is F_N itself, r_k = 1".into());
    }
    let schur = schur_bound(&alphabet);
    let env = Envelopes::new(alphabet.dimension());
    let rows: Vec<BetaRow> = reports
        .into_iter()
        .map(|r| BetaRow {
            report: r,
            schur_bound: schur,
            envelopes: env,
        })
        .collect();
    let mut header: Vec<&str> = SpectralReport::CSV_HEADER.to_vec();
    header.extend([
        "converged",
        "schur_bound",
        "volume_bound",
        "red_line",
        "best_possible",
    ]);
    let csv_rows = rows
        .iter()
        .map(|r| {
            let mut v = r.report.csv_record();
            v.push(r.report.converged.to_string());
            v.push(schur.to_string());
            v.push(env.volume_bound.to_string());
            v.push(env.red_line.to_string());
            v.push(env.best_possible.to_string());
            v
        })
        .collect();
    report
        .tables
        .push(Table::new("rows", &header, csv_rows, &rows));
    emit(cfg, &report)
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub a: Option<usize>,
    #[command(flatten)]
    pub mode: ModeArgs,
    /// Largest order per alphabet (default: min(4, max k with M^k <= 1e5)).
    #[arg(long = "kmax")]
    pub kmax: Option<u32>,
    /// Also report the success fraction at threshold 1/2 - 3 delta/4 - eps.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Mean exponents for every 1 < A < M, M = 3..10.
    #[arg(long, conflicts_with_all = ["m", "a", "all_m"])]
    pub figure1: bool,
    /// Mean exponents for every 1 < A < M over a range of M, e.g. `3..10`.
    #[arg(long, value_name = "RANGE", conflicts_with_all = ["m", "a"])]
    pub all_m: Option<String>,
    /// Use plain power iteration (two restarts) instead of one Lanczos start.
    #[arg(long)]
    pub power: bool,
    /// Relative solver tolerance (default 1e-10 for Lanczos, 1e-12 for power).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Serialize)]
struct AlphabetRow {
    index: usize,
    alphabet: Alphabet,
    beta_lower: f64,
}

pub fn sweep(cfg: &RunConfig, args: &SweepArgs) -> Result<(), CliError> {
    let mode = mode_of(&args.mode, cfg.master_seed);
    let base = if args.power {
        PowerOptions::default()
    } else {
        sweep_options()
    };
    let opts = PowerOptions {
        tol: args.tol.unwrap_or(base.tol),
        n_cap: cfg.limits.n_cap,
        ..base
    };
    let ms: Option<Vec<u64>> = if args.figure1 {
        Some((3..=10).collect())
    } else {
        args.all_m.as_deref().map(parse_range).transpose()?
    };
    let mut report = Report::default();
    if let Some(ms) = ms {
        let mut points = Vec::new();
        for m in ms {
            let m = m as usize;
            let k = args.kmax.unwrap_or_else(|| default_k_max(m));
            for a in 2..m {
                let sp = space(cfg, m, a)?;
                let betas: Vec<f64> = population_betas(&sp, mode, k, &opts, cfg.master_seed)?
                    .into_iter()
                    .map(|(_, b)| b)
                    .collect();
                points.push(curve_point_from_betas(
                    &sp,
                    k,
                    mode,
                    cfg.master_seed,
                    &betas,
                ));
            }
        }
        let rows = points.iter().map(CurvePoint::csv_record).collect();
        report
            .tables
            .push(Table::new("curve", &CurvePoint::CSV_HEADER, rows, &points));
        return emit(cfg, &report);
    }

    let (Some(m), Some(a)) = (args.m, args.a) else {
        return Err(CliError::Usage(
            "sweep needs --m and --a, or --figure1, or --all-m".into(),
        ));
    };
    let k = args.kmax.unwrap_or_else(|| default_k_max(m));
    let sp = space(cfg, m, a)?;
    let pairs = population_betas(&sp, mode, k, &opts, cfg.master_seed)?;
    let rows: Vec<AlphabetRow> = pairs
        .into_iter()
        .enumerate()
        .map(|(index, (alphabet, beta_lower))| AlphabetRow {
            index,
            alphabet,
            beta_lower,
        })
        .collect();
    let betas: Vec<f64> = rows.iter().map(|r| r.beta_lower).collect();
    let point = curve_point_from_betas(&sp, k, mode, cfg.master_seed, &betas);
    let csv_rows = rows
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                r.alphabet.to_string(),
                r.beta_lower.to_string(),
            ]
        })
        .collect();
    report.tables.push(Table::new(
        "alphabets",
        &["index", "alphabet", "beta_lower"],
        csv_rows,
        &rows,
    ));
    report.tables.push(Table::new(
        "summary",
        &CurvePoint::CSV_HEADER,
        vec![point.csv_record()],
        &point,
    ));
    if let Some(eps) = args.epsilon {
        if !(eps > 0.0) {
            return Err(CliError::Usage("--epsilon must be positive".into()));
        }
        let rec = fupc_from_betas(&sp, eps, mode, k, cfg.master_seed, &betas);
        report.tables.push(Table::new(
            "fupc",
            &FupcRecord::CSV_HEADER,
            vec![rec.csv_record()],
            &rec,
        ));
    }
    emit(cfg, &report)
}

#[derive(Debug, Args, Serialize)]
pub struct ConcentrationArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub a: usize,
    /// Frequency of the exponential sum.
    #[arg(long, default_value_t = 1)]
    pub freq: i64,
    /// Largest deviation on the grid (default 2A).
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    #[command(flatten)]
    pub mode: ModeArgs,
}

pub fn concentration(cfg: &RunConfig, args: &ConcentrationArgs) -> Result<(), CliError> {
    let sp = space(cfg, args.m, args.a)?;
    let grid = uniform_grid(args.tmax.unwrap_or(2.0 * args.a as f64), args.points);
    let mode = mode_of(&args.mode, cfg.master_seed);
    let rep = concentration_experiment_in(&sp, args.freq, &grid, mode)?;
    let mut report = Report::default();
    report.tables.push(Table::new(
        "tail",
        &ConcentrationReport::CSV_HEADER,
        rep.csv_records(),
        &rep,
    ));
    let summary = vec![vec![
        rep.freq.to_string(),
        format_complex(rep.tail.mean),
        rep.tail.lip.to_string(),
        rep.lip_mode.to_string(),
        rep.held_measured.to_string(),
        rep.held_16.to_string(),
        rep.held_64.to_string(),
    ]];
    report.tables.push(Table::new(
        "summary",
        &[
            "freq",
            "mean",
            "lip",
            "lip_mode",
            "held_measured",
            "held_16",
            "held_64",
        ],
        summary,
        &serde_json::json!({
            "held_measured": rep.held_measured,
            "held_16": rep.held_16,
            "held_64": rep.held_64,
        }),
    ));
    emit(cfg, &report)
}

#[derive(Debug, Args, Serialize)]
pub struct GoodsetArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub a: usize,
    /// Cancellation level; repeat for several.
    #[arg(long = "L", required = true)]
    pub l: Vec<f64>,
    #[command(flatten)]
    pub mode: ModeArgs,
}

pub fn goodset(cfg: &RunConfig, args: &GoodsetArgs) -> Result<(), CliError> {
    let sp = space(cfg, args.m, args.a)?;
    let mode = mode_of(&args.mode, cfg.master_seed);
    let reps = args
        .l
        .iter()
        .map(|&l| good_set_report(&sp, l, mode))
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = Report::default();
    let rows = reps.iter().map(|r| r.csv_record()).collect();
    report.tables.push(Table::new(
        "goodset",
        &fup_core::alphabets::GoodSetReport::CSV_HEADER,
        rows,
        &reps,
    ));
    emit(cfg, &report)
}

#[derive(Debug, Args, Serialize)]
pub struct OqmArgs {
    /// Alphabet as `M:d0,d1,...`.
    pub alphabet: String,
    /// Orders, e.g. `2..4`.
    #[arg(long, default_value = "2..3")]
    pub k: String,
    /// Slack in the candidate exponent 1/2 - 3 delta/4 - eps.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Maximum number of squarings.
    #[arg(long = "jmax", default_value_t = 12)]
    pub jmax: u32,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
}

pub fn oqm(cfg: &RunConfig, args: &OqmArgs) -> Result<(), CliError> {
    let alphabet = parse_alphabet(&args.alphabet)?;
    let ks: Vec<u32> = parse_range(&args.k)?
        .into_iter()
        .map(|k| u32::try_from(k).map_err(|_| CliError::Usage(format!("order {k} too large"))))
        .collect::<Result<_, _>>()?;
    let opts = GapOptions {
        j_max: args.jmax,
        tol: args.tol,
        seed: cfg.master_seed,
        dense_cap: cfg.limits.oqm_dense_cap,
    };
    let rows = gap_report(
        &alphabet,
        &ks,
        &default_candidates(&alphabet, args.epsilon),
        &opts,
    )?;
    let mut report = Report::default();
    let csv_rows = rows.iter().map(GapRow::csv_record).collect();
    report
        .tables
        .push(Table::new("gaps", &GapRow::CSV_HEADER, csv_rows, &rows));
    emit(cfg, &report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("2..4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_range("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_range("5").unwrap(), vec![5]);
        assert!(parse_range("4..2").is_err());
        assert!(parse_range("a..2").is_err());
    }
}
