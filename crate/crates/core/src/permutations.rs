//! Injective maps `{0..A-1} -> {0..M-1}`, their projection onto alphabets,
//! and length certificates for finite metric spaces.

use std::collections::{BTreeMap, HashSet};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabets::{self, AlphabetSpace, LipMode, Mode};
use crate::cantor::Alphabet;
use crate::error::{Error, Result};
use crate::Limits;

/// Agreement tolerance for expectations and Lipschitz comparisons.
pub const LIFT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Permutation {
    pub m: usize,
    /// `values[j]` is the image of `j`.
    pub values: Vec<usize>,
}

impl Permutation {
    pub fn new(m: usize, values: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; m];
        for &v in &values {
            if v >= m {
                return Err(Error::DigitOutOfRange { digit: v, base: m });
            }
            if seen[v] {
                return Err(Error::DuplicateDigit(v));
            }
            seen[v] = true;
        }
        if values.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        Ok(Self { m, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Number of positions where the two maps disagree.
pub fn metric_p(p1: &Permutation, p2: &Permutation) -> Result<usize> {
    if p1.m != p2.m || p1.len() != p2.len() {
        return Err(Error::ShapeMismatch);
    }
    Ok(p1
        .values
        .iter()
        .zip(&p2.values)
        .filter(|(a, b)| a != b)
        .count())
}

/// The image of `p` as an alphabet.
pub fn project(p: &Permutation) -> Result<Alphabet> {
    Alphabet::new(p.m, &p.values)
}

fn falling(m: usize, a: usize) -> Option<u128> {
    (0..a).try_fold(1u128, |acc, i| acc.checked_mul((m - i) as u128))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PermutationSpace {
    pub m: usize,
    pub a: usize,
    pub count: u64,
}

impl PermutationSpace {
    pub fn new(m: usize, a: usize) -> Result<Self> {
        Self::with_cap(m, a, Limits::default().permutation_cap)
    }

    pub fn with_cap(m: usize, a: usize, cap: u64) -> Result<Self> {
        if m < 3 {
            return Err(Error::BaseTooSmall(m));
        }
        if a == 0 || a > m {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= A <= M, got A = {a}, M = {m}"
            )));
        }
        let count = falling(m, a).unwrap_or(u128::MAX);
        if count > cap as u128 {
            return Err(Error::EnumerationTooLarge { count, cap });
        }
        Ok(Self {
            m,
            a,
            count: count as u64,
        })
    }

    /// Lexicographic rank.
    pub fn rank(&self, p: &Permutation) -> usize {
        let mut used = vec![false; self.m];
        let mut r = 0usize;
        for (i, &v) in p.values.iter().enumerate() {
            let smaller = (0..v).filter(|&u| !used[u]).count();
            r += smaller * falling(self.m - i - 1, self.a - i - 1).unwrap() as usize;
            used[v] = true;
        }
        r
    }

    /// All elements in lexicographic order.
    pub fn enumerate(&self) -> Vec<Permutation> {
        let mut out = Vec::with_capacity(self.count as usize);
        let mut current = Vec::with_capacity(self.a);
        let mut used = vec![false; self.m];
        self.fill(&mut current, &mut used, &mut out);
        out
    }

    fn fill(&self, current: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Permutation>) {
        if current.len() == self.a {
            out.push(Permutation {
                m: self.m,
                values: current.clone(),
            });
            return;
        }
        for v in 0..self.m {
            if !used[v] {
                used[v] = true;
                current.push(v);
                self.fill(current, used, out);
                current.pop();
                used[v] = false;
            }
        }
    }
}

/// Number of permutations over each alphabet.
pub fn fiber_sizes(m: usize, a: usize) -> Result<BTreeMap<Alphabet, usize>> {
    let space = PermutationSpace::new(m, a)?;
    let mut sizes = BTreeMap::new();
    for p in space.enumerate() {
        *sizes.entry(project(&p)?).or_insert(0) += 1;
    }
    Ok(sizes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftComparison {
    pub m: usize,
    pub a: usize,
    pub expectation: Complex64,
    pub lifted_expectation: Complex64,
    pub lip: f64,
    pub lifted_lip: f64,
    pub exp_equal: bool,
    pub lip_contracts: bool,
}

/// Compares `f` with `f o P` by full enumeration of both spaces.
pub fn lift_and_compare<F>(f: F, m: usize, a: usize) -> Result<LiftComparison>
where
    F: Fn(&Alphabet) -> Complex64 + Sync,
{
    let perms = PermutationSpace::new(m, a)?;
    let alphas = AlphabetSpace::new(m, a)?;
    let points = perms.enumerate();
    let values: Vec<Complex64> = points
        .par_iter()
        .map(|p| f(&project(p).expect("valid image")))
        .collect();
    let lifted_expectation = values.iter().sum::<Complex64>() / values.len() as f64;
    let lifted_lip = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0f64;
            for j in i + 1..points.len() {
                let d = metric_p(&points[i], &points[j]).expect("same shape") as f64;
                best = best.max((values[i] - values[j]).norm() / d);
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    let expectation = alphabets::expectation(&f, &alphas, Mode::Exact)?.value;
    let lip = alphabets::lipschitz_norm(&f, &alphas, LipMode::Swap)?;
    Ok(LiftComparison {
        m,
        a,
        expectation,
        lifted_expectation,
        lip,
        lifted_lip,
        exp_equal: (expectation - lifted_expectation).norm() <= LIFT_TOL,
        lip_contracts: lifted_lip <= lip + LIFT_TOL,
    })
}

/// A bijection between two sibling blocks, stored as explicit images.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiblingPairing {
    /// Level of the two sibling blocks, `1..=n`.
    pub level: usize,
    /// Index of their common parent at `level - 1`.
    pub parent: usize,
    pub from: usize,
    pub to: usize,
    /// `map[i]` is the image of the `i`-th point of block `from`.
    pub map: Vec<usize>,
}

/// Nested partitions of a finite set of points `0..n`, with step bounds and
/// sibling bijections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionChain {
    pub space: String,
    /// `levels[k]` lists the blocks of the `k`-th partition as point ranks.
    pub levels: Vec<Vec<Vec<usize>>>,
    /// `a_1 .. a_n`.
    pub step_bounds: Vec<f64>,
    pub pairings: Vec<SiblingPairing>,
}

impl PartitionChain {
    /// `sqrt(sum a_k^2)`.
    pub fn length(&self) -> f64 {
        self.step_bounds.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// Partition of `Pi(m, a)` by fixed prefixes, with transposition bijections.
pub fn build_prefix_chain(m: usize, a: usize) -> Result<PartitionChain> {
    let space = PermutationSpace::new(m, a)?;
    let points = space.enumerate();
    let total = points.len();
    let mut levels = Vec::with_capacity(a + 1);
    let mut pairings = Vec::new();
    for k in 0..=a {
        // Lexicographic order makes every prefix class a contiguous run.
        let size = falling(m - k, a - k).unwrap() as usize;
        let blocks: Vec<Vec<usize>> = (0..total / size)
            .map(|b| (b * size..(b + 1) * size).collect())
            .collect();
        if k > 0 {
            let fanout = m - k + 1;
            for parent in 0..total / (size * fanout) {
                for i in 0..fanout {
                    for j in i + 1..fanout {
                        let from = parent * fanout + i;
                        let to = parent * fanout + j;
                        let r = points[from * size].values[k - 1];
                        let s = points[to * size].values[k - 1];
                        let map = blocks[from]
                            .iter()
                            .map(|&x| {
                                let values = points[x]
                                    .values
                                    .iter()
                                    .map(|&v| match v {
                                        v if v == r => s,
                                        v if v == s => r,
                                        v => v,
                                    })
                                    .collect();
                                space.rank(&Permutation { m, values })
                            })
                            .collect();
                        pairings.push(SiblingPairing {
                            level: k,
                            parent,
                            from,
                            to,
                            map,
                        });
                    }
                }
            }
        }
        levels.push(blocks);
    }
    Ok(PartitionChain {
        space: format!("Pi({m},{a})"),
        levels,
        step_bounds: vec![2.0; a],
        pairings,
    })
}

/// The two-level chain `{X}`, `{{x}}` with `a_1` the diameter.
pub fn trivial_chain<D>(n: usize, metric: D) -> PartitionChain
where
    D: Fn(usize, usize) -> f64,
{
    let mut diam = 0.0f64;
    let mut pairings = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            diam = diam.max(metric(x, y));
            pairings.push(SiblingPairing {
                level: 1,
                parent: 0,
                from: x,
                to: y,
                map: vec![y],
            });
        }
    }
    PartitionChain {
        space: format!("points({n})"),
        levels: vec![vec![(0..n).collect()], (0..n).map(|x| vec![x]).collect()],
        step_bounds: vec![diam],
        pairings,
    }
}

fn violation(level: usize, blocks: Vec<usize>, witness: Option<usize>, reason: &str) -> Error {
    Error::CertificateViolation {
        level,
        blocks,
        witness,
        reason: reason.into(),
    }
}

/// Checks the partition conditions and every sibling bijection, returning
/// the certified length `sqrt(sum a_k^2)`.
pub fn verify_length_certificate<D>(
    n_points: usize,
    metric: D,
    chain: &PartitionChain,
) -> Result<f64>
where
    D: Fn(usize, usize) -> f64 + Sync,
{
    let n = chain.levels.len().saturating_sub(1);
    if n == 0 {
        return Err(violation(
            0,
            vec![],
            None,
            "chain needs at least two levels",
        ));
    }
    if chain.step_bounds.len() != n {
        return Err(violation(n, vec![], None, "one step bound per refinement"));
    }
    if let Some(k) = chain.step_bounds.iter().position(|a| !(*a > 0.0)) {
        return Err(violation(
            k + 1,
            vec![],
            None,
            "step bounds must be positive",
        ));
    }
    if chain.levels[0].len() != 1 {
        return Err(violation(0, vec![], None, "level 0 must be a single block"));
    }

    // owner[k][x] = block of x at level k
    let mut owner = Vec::with_capacity(n + 1);
    for (k, blocks) in chain.levels.iter().enumerate() {
        let mut own = vec![usize::MAX; n_points];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(violation(k, vec![b], None, "empty block"));
            }
            for &x in block {
                if x >= n_points {
                    return Err(violation(k, vec![b], Some(x), "point out of range"));
                }
                if own[x] != usize::MAX {
                    return Err(violation(k, vec![own[x], b], Some(x), "blocks overlap"));
                }
                own[x] = b;
            }
        }
        if let Some(x) = own.iter().position(|&b| b == usize::MAX) {
            return Err(violation(k, vec![], Some(x), "point not covered"));
        }
        owner.push(own);
    }
    if let Some(b) = chain.levels[n].iter().position(|blk| blk.len() != 1) {
        return Err(violation(
            n,
            vec![b],
            None,
            "final level must be singletons",
        ));
    }

    // parent[k][b] for k >= 1
    let mut parent = vec![Vec::new()];
    for k in 1..=n {
        let mut par = Vec::with_capacity(chain.levels[k].len());
        for (b, block) in chain.levels[k].iter().enumerate() {
            let p = owner[k - 1][block[0]];
            if let Some(&x) = block.iter().find(|&&x| owner[k - 1][x] != p) {
                return Err(violation(
                    k,
                    vec![b],
                    Some(x),
                    "level does not refine the previous one",
                ));
            }
            par.push(p);
        }
        parent.push(par);
    }

    let checks: Vec<Result<(usize, usize, usize)>> = chain
        .pairings
        .par_iter()
        .map(|pr| {
            let k = pr.level;
            if k == 0 || k > n {
                return Err(violation(
                    k,
                    vec![pr.from, pr.to],
                    None,
                    "pairing level out of range",
                ));
            }
            let blocks = &chain.levels[k];
            if pr.from >= blocks.len() || pr.to >= blocks.len() || pr.from == pr.to {
                return Err(violation(
                    k,
                    vec![pr.from, pr.to],
                    None,
                    "pairing blocks invalid",
                ));
            }
            if parent[k][pr.from] != pr.parent || parent[k][pr.to] != pr.parent {
                return Err(violation(
                    k,
                    vec![pr.from, pr.to],
                    None,
                    "paired blocks are not siblings",
                ));
            }
            let src = &blocks[pr.from];
            if pr.map.len() != src.len() || blocks[pr.to].len() != src.len() {
                return Err(violation(
                    k,
                    vec![pr.from, pr.to],
                    None,
                    "block sizes differ",
                ));
            }
            let mut hit = HashSet::with_capacity(src.len());
            for (&x, &y) in src.iter().zip(&pr.map) {
                if y >= n_points || owner[k][y] != pr.to {
                    return Err(violation(
                        k,
                        vec![pr.from, pr.to],
                        Some(x),
                        "image leaves the target block",
                    ));
                }
                if !hit.insert(y) {
                    return Err(violation(
                        k,
                        vec![pr.from, pr.to],
                        Some(x),
                        "map is not injective",
                    ));
                }
                if metric(x, y) > chain.step_bounds[k - 1] * (1.0 + 1e-12) {
                    return Err(violation(
                        k,
                        vec![pr.from, pr.to],
                        Some(x),
                        "displacement exceeds the step bound",
                    ));
                }
            }
            let (lo, hi) = (pr.from.min(pr.to), pr.from.max(pr.to));
            Ok((k, lo, hi))
        })
        .collect();
    let mut covered = HashSet::new();
    for c in checks {
        covered.insert(c?);
    }

    for k in 1..=n {
        let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (b, &p) in parent[k].iter().enumerate() {
            children.entry(p).or_default().push(b);
        }
        for sibs in children.values() {
            for (i, &p) in sibs.iter().enumerate() {
                for &q in &sibs[i + 1..] {
                    if !covered.contains(&(k, p, q)) {
                        return Err(violation(
                            k,
                            vec![p, q],
                            None,
                            "sibling pair has no bijection",
                        ));
                    }
                }
            }
        }
    }
    Ok(chain.length())
}

/// `min(1, 2 exp(-t^2 / (4 l^2 lip^2)))`.
pub fn metric_space_tail_bound(l: f64, lip: f64, t: f64) -> Result<f64> {
    if !(l > 0.0) {
        return Err(Error::NonpositiveInput("length l"));
    }
    if !(lip > 0.0) {
        return Err(Error::NonpositiveInput("Lipschitz constant"));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t must be non-negative, got {t}"
        )));
    }
    Ok((2.0 * (-t * t / (4.0 * l * l * lip * lip)).exp()).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabets::{concentration_bound, exp_sum};

    fn perm(m: usize, v: &[usize]) -> Permutation {
        Permutation::new(m, v.to_vec()).unwrap()
    }

    fn hamming(points: &[Permutation]) -> impl Fn(usize, usize) -> f64 + Sync + '_ {
        move |x, y| metric_p(&points[x], &points[y]).unwrap() as f64
    }

    #[test]
    fn metric_examples() {
        assert_eq!(metric_p(&perm(4, &[0, 1]), &perm(4, &[0, 1])).unwrap(), 0);
        assert_eq!(metric_p(&perm(4, &[0, 1]), &perm(4, &[1, 0])).unwrap(), 2);
        assert_eq!(
            metric_p(&perm(4, &[0, 1, 2]), &perm(4, &[0, 2, 1])).unwrap(),
            2
        );
        assert!(matches!(
            metric_p(&perm(4, &[0, 1]), &perm(4, &[0, 1, 2])),
            Err(Error::ShapeMismatch)
        ));
        assert!(Permutation::new(3, vec![1, 1]).is_err());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(
            project(&perm(3, &[2, 0])).unwrap(),
            Alphabet::new(3, &[0, 2]).unwrap()
        );
        let sizes = fiber_sizes(5, 3).unwrap();
        assert_eq!(sizes.len(), 10);
        assert!(sizes.values().all(|&s| s == 6));
        // Projection is 2-Lipschitz, and no better: [0,1] and [2,3] are at
        // distance 2 while their images are at distance 4.
        let pts = PermutationSpace::new(4, 2).unwrap().enumerate();
        let mut worst = 0.0f64;
        for x in &pts {
            for y in &pts {
                let d = alphabets::metric(&project(x).unwrap(), &project(y).unwrap()).unwrap();
                let dp = metric_p(x, y).unwrap();
                assert!(2 * dp >= d);
                if dp > 0 {
                    worst = worst.max(d as f64 / dp as f64);
                }
            }
        }
        assert_eq!(worst, 2.0);
    }

    #[test]
    fn enumeration_and_rank() {
        let space = PermutationSpace::new(5, 3).unwrap();
        let pts = space.enumerate();
        assert_eq!(pts.len(), 60);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(space.rank(p), i);
        }
        assert_eq!(PermutationSpace::new(10, 5).unwrap().count, 30240);
        assert!(matches!(
            PermutationSpace::new(12, 8),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn lift_examples() {
        let r = lift_and_compare(|a| exp_sum(a, 1), 5, 3).unwrap();
        assert!(r.exp_equal);
        // A single changed position is a digit swap in the image.
        assert!((r.lifted_lip - 2.0 * r.lip).abs() < 1e-12);
        assert!(!r.lip_contracts);
        let r = lift_and_compare(|_| Complex64::new(2.0, 0.0), 4, 2).unwrap();
        assert!(r.exp_equal && r.lip_contracts);
        assert_eq!((r.lip, r.lifted_lip), (0.0, 0.0));
        let r = lift_and_compare(
            |a| Complex64::new(a.contains_digit(0) as u8 as f64, 0.0),
            4,
            2,
        )
        .unwrap();
        assert!(r.exp_equal);
        assert!((r.lifted_expectation.re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn prefix_chain_examples() {
        let chain = build_prefix_chain(5, 3).unwrap();
        assert_eq!(chain.levels.len(), 4);
        let pts = PermutationSpace::new(5, 3).unwrap().enumerate();
        let l = verify_length_certificate(pts.len(), hamming(&pts), &chain).unwrap();
        assert!((l - 2.0 * 3f64.sqrt()).abs() < 1e-12);

        let chain = build_prefix_chain(3, 1).unwrap();
        assert_eq!(chain.step_bounds, vec![2.0]);
        assert_eq!(chain.pairings.len(), 3);
        let pts = PermutationSpace::new(3, 1).unwrap().enumerate();
        assert_eq!(
            verify_length_certificate(3, hamming(&pts), &chain).unwrap(),
            2.0
        );
    }

    #[test]
    fn prefix_chain_displacements_at_most_two() {
        let pts = PermutationSpace::new(6, 3).unwrap().enumerate();
        let chain = build_prefix_chain(6, 3).unwrap();
        for pr in &chain.pairings {
            for (&x, &y) in chain.levels[pr.level][pr.from].iter().zip(&pr.map) {
                assert!(metric_p(&pts[x], &pts[y]).unwrap() <= 2);
            }
        }
    }

    #[test]
    fn trivial_chain_gives_diameter() {
        let pts = PermutationSpace::new(4, 2).unwrap().enumerate();
        let d = hamming(&pts);
        let chain = trivial_chain(pts.len(), &d);
        assert_eq!(
            verify_length_certificate(pts.len(), &d, &chain).unwrap(),
            2.0
        );
    }

    #[test]
    fn corrupted_chains_are_rejected() {
        let pts = PermutationSpace::new(5, 3).unwrap().enumerate();
        let d = hamming(&pts);
        let good = build_prefix_chain(5, 3).unwrap();

        let mut bad = good.clone();
        let target = bad.pairings[7].map[0];
        bad.pairings[7].map[1] = target;
        assert!(matches!(
            verify_length_certificate(pts.len(), &d, &bad),
            Err(Error::CertificateViolation { .. })
        ));

        let mut bad = good.clone();
        bad.step_bounds[1] = 1.0;
        assert!(matches!(
            verify_length_certificate(pts.len(), &d, &bad),
            Err(Error::CertificateViolation { level: 2, .. })
        ));

        let mut bad = good.clone();
        bad.pairings.pop();
        assert!(verify_length_certificate(pts.len(), &d, &bad).is_err());

        let mut bad = good.clone();
        bad.levels.pop();
        bad.step_bounds.pop();
        assert!(matches!(
            verify_length_certificate(pts.len(), &d, &bad),
            Err(Error::CertificateViolation { level: 2, .. })
        ));

        let mut bad = good;
        bad.levels[1].swap(0, 1);
        assert!(verify_length_certificate(pts.len(), &d, &bad).is_err());
    }

    #[test]
    fn chain_json_round_trip() {
        let chain = build_prefix_chain(4, 2).unwrap();
        let text = serde_json::to_string(&chain).unwrap();
        let back: PartitionChain = serde_json::from_str(&text).unwrap();
        assert_eq!(back, chain);
    }

    #[test]
    fn tail_bound_examples() {
        for a in 1..6 {
            for t in [0.0, 0.5, 3.0, 9.0] {
                let l = 2.0 * (a as f64).sqrt();
                let lhs = metric_space_tail_bound(l, 0.7, t).unwrap();
                let rhs = concentration_bound(a, 0.7, t).unwrap();
                assert!((lhs - rhs).abs() < 1e-15);
            }
        }
        assert_eq!(metric_space_tail_bound(1.0, 1.0, 0.0).unwrap(), 1.0);
        assert!(matches!(
            metric_space_tail_bound(0.0, 1.0, 1.0),
            Err(Error::NonpositiveInput(_))
        ));
    }

    #[test]
    fn lifted_tails_dominated_on_small_spaces() {
        for (m, a) in [(5, 3), (6, 3)] {
            let pts = PermutationSpace::new(m, a).unwrap().enumerate();
            let vals: Vec<Complex64> = pts
                .iter()
                .map(|p| exp_sum(&project(p).unwrap(), 1))
                .collect();
            let mean = vals.iter().sum::<Complex64>() / vals.len() as f64;
            let lip = lift_and_compare(|x| exp_sum(x, 1), m, a)
                .unwrap()
                .lifted_lip;
            for i in 0..=40 {
                let t = i as f64 * 2.0 * a as f64 / 40.0;
                let tail = vals.iter().filter(|v| (**v - mean).norm() >= t).count() as f64
                    / vals.len() as f64;
                let bound = metric_space_tail_bound(2.0 * (a as f64).sqrt(), lip, t).unwrap();
                assert!(tail <= bound, "({m},{a}) t={t}");
            }
        }
    }
}
