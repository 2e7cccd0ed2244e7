//! Property and exhaustive checks of the structural invariants.

use fup_core::alphabets::{
    enumerate, exp_sum, good_set_report, lipschitz_norm, metric, sample_many, tail_report,
    AlphabetSpace, LipMode, Mode,
};
use fup_core::experiments::{fupc_from_betas, population_betas, sweep_options, uniform_grid};
use fup_core::fourier::{dft, idft};
use fup_core::linalg::hermitian_eigenvalues;
use fup_core::oqm::{build_bn, spectral_radius, Cutoff};
use fup_core::permutations::{fiber_sizes, metric_space_tail_bound, project, PermutationSpace};
use fup_core::spectral::{gram_matrix, JACOBI_TOL};
use fup_core::{rng, Alphabet, Complex64};
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn arb_alphabet(max_m: usize) -> impl Strategy<Value = Alphabet> {
    (3..=max_m).prop_flat_map(|m| {
        proptest::sample::subsequence((0..m).collect::<Vec<_>>(), 1..=m)
            .prop_map(move |d| Alphabet::new(m, &d).unwrap())
    })
}

fn arb_vector(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dft_is_unitary_and_adjoint_to_idft(
        (u, v) in (1usize..200).prop_flat_map(|n| (arb_vector(n), arb_vector(n)))
    ) {
        let n = u.len();
        let fu = dft(n, &u).unwrap();
        let nu: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let nfu: f64 = fu.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!((nu - nfu).abs() <= 1e-10 * nu.max(1.0));
        let lhs = inner(&fu, &v);
        let rhs = inner(&u, &idft(n, &v).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn gram_is_hermitian_and_positive(a in arb_alphabet(12)) {
        let g = gram_matrix(&a).entries;
        let n = g.rows();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((g[(i, j)] - g[(j, i)].conj()).norm() <= 1e-14);
            }
        }
        let eig = hermitian_eigenvalues(&g, JACOBI_TOL, 100).unwrap().eigenvalues;
        prop_assert!(eig.iter().all(|&l| l >= -1e-12));
        // Trace is A * (A / M).
        let trace: f64 = (0..n).map(|i| g[(i, i)].re).sum();
        prop_assert!((trace - (n * n) as f64 / a.base() as f64).abs() <= 1e-12);
    }

    #[test]
    fn open_map_contracts(
        (a, u) in arb_alphabet(5)
            .prop_filter("needs 1 < A < M", |a| !a.is_trivial())
            .prop_flat_map(|a| {
                let n = a.base() * a.base();
                (Just(a), arb_vector(n))
            })
    ) {
        let b = build_bn(&a, 2, Cutoff::Identity).unwrap();
        let bu = b.apply(&u).unwrap();
        let nu: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let nbu: f64 = bu.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(nbu <= nu * (1.0 + 1e-9));
        let dense = b.matrix().matvec(&u);
        for (x, y) in dense.iter().zip(&bu) {
            prop_assert!((x - y).norm() <= 1e-9);
        }
    }
}

#[test]
fn alphabet_metric_axioms_on_six_three() {
    let all: Vec<Alphabet> = enumerate(6, 3).unwrap().collect();
    for x in &all {
        for y in &all {
            let dxy = metric(x, y).unwrap();
            assert_eq!(dxy, metric(y, x).unwrap());
            assert_eq!(dxy == 0, x == y);
            for z in &all {
                assert!(metric(x, z).unwrap() <= dxy + metric(y, z).unwrap());
            }
        }
    }
}

#[test]
fn tails_sit_under_concentration_bound_on_enumerable_spaces() {
    for (m, a) in [(5usize, 2usize), (7, 3), (8, 4), (9, 3), (10, 5)] {
        let space = AlphabetSpace::new(m, a).unwrap();
        for freq in 1..m as i64 {
            let f = |x: &Alphabet| exp_sum(x, freq);
            let lip = lipschitz_norm(f, &space, LipMode::Swap).unwrap();
            assert!(lip <= 1.0 + 1e-12, "Lip {lip} for ({m},{a}) freq {freq}");
            let grid = uniform_grid(2.0 * a as f64, 30);
            let rep = tail_report(f, &space, &grid, Mode::Exact, lip).unwrap();
            assert!(rep.dominated_by(&rep.bound), "({m},{a}) freq {freq}");
        }
    }
}

#[test]
fn good_set_complement_under_both_union_bounds() {
    for (m, a) in [(7usize, 3usize), (9, 4), (11, 5)] {
        let space = AlphabetSpace::new(m, a).unwrap();
        for l in [0.5, 1.0, 2.0, 3.0, 4.0, 6.0] {
            let g = good_set_report(&space, l, Mode::Exact).unwrap();
            assert!(g.complement <= g.union_bound_64 + 1e-15);
            assert!(g.complement <= g.union_bound_16 + 1e-15, "({m},{a}) L={l}");
        }
    }
}

#[test]
fn projection_pushes_uniform_measure_forward() {
    for (m, a) in [(4usize, 2usize), (5, 3), (6, 3)] {
        let fibers = fiber_sizes(m, a).unwrap();
        let total: usize = fibers.values().sum();
        let space = AlphabetSpace::new(m, a).unwrap();
        assert_eq!(fibers.len() as u128, space.enumerable_count().unwrap());
        // Every set S of alphabets gets measure |S| / C(M, A); check on the
        // sets {alphabets containing digit d}.
        for d in 0..m {
            let lifted: usize = fibers
                .iter()
                .filter(|(k, _)| k.contains_digit(d))
                .map(|(_, v)| v)
                .sum();
            let direct = fibers.keys().filter(|k| k.contains_digit(d)).count();
            let mu_p = lifted as f64 / total as f64;
            let mu = direct as f64 / fibers.len() as f64;
            assert!((mu_p - mu).abs() <= 1e-15);
        }
    }
}

#[test]
fn permutation_tail_bound_holds_for_lifted_sums() {
    for (m, a) in [(5usize, 3usize), (6, 3)] {
        let perms = PermutationSpace::new(m, a).unwrap().enumerate();
        let values: Vec<Complex64> = perms
            .iter()
            .map(|p| exp_sum(&project(p).unwrap(), 1))
            .collect();
        let mut lip = 0.0f64;
        for i in 0..perms.len() {
            for j in i + 1..perms.len() {
                let d = fup_core::permutations::metric_p(&perms[i], &perms[j]).unwrap() as f64;
                lip = lip.max((values[i] - values[j]).norm() / d);
            }
        }
        let mean = values.iter().sum::<Complex64>() / values.len() as f64;
        let l = 2.0 * (a as f64).sqrt();
        for t in uniform_grid(2.0 * a as f64, 40) {
            let tail = values.iter().filter(|v| (*v - mean).norm() >= t).count() as f64
                / values.len() as f64;
            assert!(tail <= metric_space_tail_bound(l, lip, t).unwrap() + 1e-15);
        }
    }
}

#[test]
fn success_fraction_does_not_grow_when_threshold_tightens() {
    let space = AlphabetSpace::new(9, 3).unwrap();
    let betas: Vec<f64> = population_betas(&space, Mode::Exact, 2, &sweep_options(), 1)
        .unwrap()
        .into_iter()
        .map(|(_, b)| b)
        .collect();
    let mut prev = f64::INFINITY;
    for eps in [0.3, 0.2, 0.1, 0.05, 0.01] {
        let f = fupc_from_betas(&space, eps, Mode::Exact, 2, 1, &betas).success_fraction;
        assert!(f <= prev);
        prev = f;
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let space = AlphabetSpace::new(8, 3).unwrap();
    let mode = Mode::MonteCarlo {
        samples: 70_000,
        seed: 3,
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let sample = sample_many(&space, 70_000, 3);
                let betas = population_betas(
                    &AlphabetSpace::new(6, 3).unwrap(),
                    Mode::Exact,
                    2,
                    &sweep_options(),
                    9,
                )
                .unwrap();
                let tail =
                    tail_report(|x: &Alphabet| exp_sum(x, 1), &space, &[0.5, 1.0], mode, 1.0)
                        .unwrap();
                (sample, betas, tail)
            })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn monte_carlo_sampling_is_uniform() {
    // Chi-square goodness of fit over the 20 alphabets of (6, 3).
    let space = AlphabetSpace::new(6, 3).unwrap();
    let draws = 100_000u64;
    let mut counts = vec![0u64; 20];
    for a in sample_many(&space, draws, 17) {
        counts[space.rank(&a).unwrap() as usize] += 1;
    }
    let expected = draws as f64 / 20.0;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let p = 1.0 - ChiSquared::new(19.0).unwrap().cdf(stat);
    assert!(p > 1e-3, "chi-square {stat}, p = {p}");
}

#[test]
fn spectral_radius_stays_below_norm() {
    let mut g = rng::stream(5, 0);
    for _ in 0..6 {
        let m = g.gen_range(3..=5usize);
        let a_card = g.gen_range(2..m);
        let a = fup_core::alphabets::sample(&AlphabetSpace::new(m, a_card).unwrap(), &mut g);
        let b = build_bn(&a, 2, Cutoff::Identity).unwrap();
        let sr = spectral_radius(&b, 12, 1e-6, 1);
        assert!(sr.rho <= b.norm(1) + 1e-6);
        assert!(sr.rho <= sr.rho_upper);
    }
}
