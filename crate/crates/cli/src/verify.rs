//! Invariant suite behind `fup verify`.

use std::f64::consts::PI;

use clap::Args;
use fup_core::alphabets::{exp_sum, expectation, AlphabetSpace, Mode};
use fup_core::experiments::{
    concentration_experiment_in, curve_point_from_betas, population_betas, uniform_grid,
};
use fup_core::fourier::{naive_dft, DftPlan};
use fup_core::oqm::{build_bn_with_cap, spectral_radius, Cutoff};
use fup_core::permutations::{
    build_prefix_chain, lift_and_compare, metric_p, verify_length_certificate, PermutationSpace,
};
use fup_core::spectral::{r1_dense, rk_dense, rk_power_with, schur_bound, PowerOptions};
use fup_core::{Alphabet, Complex64};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{emit, Report, Table};
use crate::CliError;

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Smaller instances only.
    #[arg(long)]
    pub quick: bool,
}

#[derive(Debug, Serialize)]
struct Check {
    check: &'static str,
    passed: bool,
    detail: String,
}

type Outcome = Result<(bool, String), CliError>;

/// Deterministic test vector, no RNG involved.
fn probe(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|j| {
            let x = j as f64;
            Complex64::new((1.3 * x + 0.2).sin(), (0.7 * x * x + 0.5).cos())
        })
        .collect()
}

fn alphabet(m: usize, d: &[usize]) -> Result<Alphabet, CliError> {
    Ok(Alphabet::new(m, d)?)
}

fn power(cfg: &RunConfig) -> PowerOptions {
    PowerOptions {
        n_cap: cfg.limits.n_cap,
        ..PowerOptions::default()
    }
}

fn check_dft(quick: bool) -> Outcome {
    let mut worst = 0.0f64;
    let cases: &[(usize, u32)] = if quick {
        &[(3, 4), (4, 3)]
    } else {
        &[(3, 6), (4, 5), (6, 3), (7, 3)]
    };
    for &(m, k) in cases {
        let plan = DftPlan::with_radix(m, k);
        let u = probe(plan.len());
        let fast = plan.forward(&u)?;
        let slow = naive_dft(&u);
        let back = plan.inverse(&fast)?;
        for i in 0..u.len() {
            worst = worst
                .max((fast[i] - slow[i]).norm())
                .max((back[i] - u[i]).norm());
        }
    }
    Ok((worst <= 1e-9, format!("max deviation {worst:.3e}")))
}

/// `r_1^2 = (2 + 2|cos(pi d^2 / M)|) / M` for `{0, d}`.
fn check_closed_form() -> Outcome {
    let mut worst = 0.0f64;
    for m in 3..=9usize {
        for d in 1..m {
            let r = r1_dense(&alphabet(m, &[0, d])?)?.r_k;
            let exact =
                ((2.0 + 2.0 * (PI * (d * d) as f64 / m as f64).cos().abs()) / m as f64).sqrt();
            worst = worst.max((r - exact).abs());
        }
    }
    Ok((
        worst <= 1e-10,
        format!("max |r_1 - closed form| {worst:.3e}"),
    ))
}

fn sample_alphabets() -> Result<Vec<Alphabet>, CliError> {
    [
        (3, &[0, 2][..]),
        (4, &[0, 1][..]),
        (5, &[0, 2, 3][..]),
        (6, &[1, 2, 5][..]),
        (7, &[0, 3][..]),
    ]
    .iter()
    .map(|(m, d)| alphabet(*m, d))
    .collect()
}

fn check_sandwich(cfg: &RunConfig, quick: bool) -> Outcome {
    let k_max = if quick { 2 } else { 3 };
    let mut failures = Vec::new();
    for a in sample_alphabets()? {
        for k in 1..=k_max {
            let r = rk_power_with(&a, k, &power(cfg), k as u64)?.r_k;
            let n = (a.base() as f64).powi(k as i32);
            let card = (a.card() as f64).powi(k as i32);
            let lower = (card / n).sqrt();
            let upper = (card / n.sqrt()).min(1.0);
            if r < lower * (1.0 - 1e-9) || r > upper * (1.0 + 1e-9) {
                failures.push(format!("{a} k={k}"));
            }
        }
    }
    Ok((
        failures.is_empty(),
        detail_list(&failures, "all within bounds"),
    ))
}

fn check_submultiplicative(cfg: &RunConfig, quick: bool) -> Outcome {
    let k_max = if quick { 3 } else { 4 };
    let mut failures = Vec::new();
    for a in sample_alphabets()? {
        let r: Vec<f64> = (1..=k_max)
            .map(|k| rk_power_with(&a, k, &power(cfg), k as u64).map(|s| s.r_k))
            .collect::<Result<_, _>>()?;
        for i in 1..=k_max as usize {
            for j in 1..=k_max as usize - i {
                if r[i + j - 1] > r[i - 1] * r[j - 1] * (1.0 + 1e-9) {
                    failures.push(format!("{a} r_{} > r_{i} r_{j}", i + j));
                }
            }
        }
    }
    Ok((
        failures.is_empty(),
        detail_list(&failures, "r_(i+j) <= r_i r_j"),
    ))
}

fn check_dense_power(cfg: &RunConfig) -> Outcome {
    let mut worst = 0.0f64;
    for a in sample_alphabets()? {
        for k in 1..=2 {
            let dense = rk_dense(&a, k, cfg.limits.dense_cap)?.r_k;
            let pow = rk_power_with(&a, k, &power(cfg), 7)?.r_k;
            worst = worst.max((dense - pow).abs());
        }
    }
    Ok((worst <= 1e-8, format!("max |dense - power| {worst:.3e}")))
}

fn check_schur() -> Outcome {
    let mut failures = Vec::new();
    for a in sample_alphabets()? {
        let r = r1_dense(&a)?.r_k;
        if r * r > schur_bound(&a) + 1e-12 {
            failures.push(a.to_string());
        }
    }
    Ok((
        failures.is_empty(),
        detail_list(&failures, "r_1^2 <= max row sum"),
    ))
}

fn check_zero_expectation(cfg: &RunConfig, quick: bool) -> Outcome {
    let (m, a) = if quick { (6, 3) } else { (9, 4) };
    let space = AlphabetSpace::with_cap(m, a, cfg.limits.enumeration_cap)?;
    let mut worst = 0.0f64;
    for freq in 1..m as i64 {
        let e = expectation(|x: &Alphabet| exp_sum(x, freq), &space, Mode::Exact)?;
        worst = worst.max(e.value.norm());
    }
    Ok((worst <= 1e-12, format!("M={m} A={a} max |E| {worst:.3e}")))
}

fn check_concentration(cfg: &RunConfig, quick: bool) -> Outcome {
    let (m, a) = if quick { (7, 3) } else { (10, 4) };
    let space = AlphabetSpace::with_cap(m, a, cfg.limits.enumeration_cap)?;
    let rep =
        concentration_experiment_in(&space, 1, &uniform_grid(2.0 * a as f64, 25), Mode::Exact)?;
    Ok((
        rep.held_measured && rep.held_64,
        format!(
            "M={m} A={a} measured={} per_freq_64={} per_freq_16={}",
            rep.held_measured, rep.held_64, rep.held_16
        ),
    ))
}

fn check_permutations(quick: bool) -> Outcome {
    let (m, a) = if quick { (5, 2) } else { (6, 3) };
    let lift = lift_and_compare(|x: &Alphabet| exp_sum(x, 1), m, a)?;
    let lip_ok = lift.lifted_lip <= 2.0 * lift.lip + 1e-12;
    let space = PermutationSpace::new(m, a)?;
    let points = space.enumerate();
    let chain = build_prefix_chain(m, a)?;
    let metric = |i: usize, j: usize| metric_p(&points[i], &points[j]).expect("same shape") as f64;
    let length = verify_length_certificate(points.len(), metric, &chain)?;
    let expected = 2.0 * (a as f64).sqrt();
    Ok((
        lift.exp_equal && lip_ok && (length - expected).abs() <= 1e-12,
        format!(
            "M={m} A={a} E equal={} Lip(F o P)={:.6} Lip(F)={:.6} length={length:.6}",
            lift.exp_equal, lift.lifted_lip, lift.lip
        ),
    ))
}

fn check_volume(cfg: &RunConfig, quick: bool) -> Outcome {
    let cases: &[(usize, usize)] = if quick {
        &[(5, 2), (6, 2)]
    } else {
        &[(5, 2), (6, 2), (7, 3), (8, 3)]
    };
    let mut failures = Vec::new();
    for &(m, a) in cases {
        let space = AlphabetSpace::with_cap(m, a, cfg.limits.enumeration_cap)?;
        let k = 2;
        let betas: Vec<f64> =
            population_betas(&space, Mode::Exact, k, &power(cfg), cfg.master_seed)?
                .into_iter()
                .map(|(_, b)| b)
                .collect();
        let point = curve_point_from_betas(&space, k, Mode::Exact, cfg.master_seed, &betas);
        if !point.dominates_volume {
            failures.push(format!("M={m} A={a}"));
        }
    }
    Ok((
        failures.is_empty(),
        detail_list(&failures, "mean beta >= volume bound"),
    ))
}

fn check_oqm(cfg: &RunConfig) -> Outcome {
    let cap = cfg.limits.oqm_dense_cap;
    let a = alphabet(4, &[0, 1])?;
    let b = build_bn_with_cap(&a, 2, Cutoff::Identity, cap)?;
    let norm = b.norm(cfg.master_seed);
    let rho = spectral_radius(&b, 12, 1e-4, cfg.master_seed).rho;
    let u = probe(b.n());
    let dense = b.matrix().matvec(&u);
    let fast = b.apply(&u)?;
    let diff = dense
        .iter()
        .zip(&fast)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    let full = build_bn_with_cap(&Alphabet::full(3)?, 2, Cutoff::Identity, cap)?;
    let rho_full = spectral_radius(&full, 12, 1e-6, cfg.master_seed).rho;
    let ok = norm <= 1.0 + 1e-9
        && rho <= norm * (1.0 + 1e-6)
        && diff <= 1e-10
        && (rho_full - 1.0).abs() <= 1e-6;
    Ok((
        ok,
        format!("norm={norm:.6} rho={rho:.6} apply_diff={diff:.3e} rho_unitary={rho_full:.6}"),
    ))
}

fn detail_list(failures: &[String], ok: &str) -> String {
    if failures.is_empty() {
        ok.to_string()
    } else {
        format!("failed: {}", failures.join("; "))
    }
}

pub fn run(cfg: &RunConfig, args: &VerifyArgs) -> Result<(), CliError> {
    let q = args.quick;
    let suite: Vec<(&'static str, Outcome)> = vec![
        ("dft", check_dft(q)),
        ("closed_form_r", check_closed_form()),
        ("sandwich", check_sandwich(cfg, q)),
        ("submultiplicativity", check_submultiplicative(cfg, q)),
        ("dense_power", check_dense_power(cfg)),
        ("schur", check_schur()),
        ("zero_expectation", check_zero_expectation(cfg, q)),
        ("concentration", check_concentration(cfg, q)),
        ("permutations", check_permutations(q)),
        ("volume_domination", check_volume(cfg, q)),
        ("oqm", check_oqm(cfg)),
    ];
    let mut checks = Vec::new();
    for (name, outcome) in suite {
        let (passed, detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        checks.push(Check {
            check: name,
            passed,
            detail,
        });
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.check)
        .collect();
    let rows = checks
        .iter()
        .map(|c| {
            vec![
                c.check.to_string(),
                if c.passed { "pass" } else { "fail" }.to_string(),
                c.detail.clone(),
            ]
        })
        .collect();
    let mut report = Report::default();
    report.tables.push(Table::new(
        "checks",
        &["check", "status", "detail"],
        rows,
        &checks,
    ));
    emit(cfg, &report)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}
