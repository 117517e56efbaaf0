//! Subset selection toward a target feature distribution.
//!
//! Given `K` items described by `M` features, pick `N` of them so that the
//! per-feature histograms (`H` equal-width bins) are as close as possible, in
//! L1, to `N` times a target PMF:
//!
//! ```text
//! min_x  sum_m || B^m x - N D_{*m} ||_1   s.t.  ||x||_1 = N,  x in {0,1}^K
//! ```
//!
//! Two solvers are provided: exhaustive enumeration for small instances and a
//! greedy construction refined by best-improvement 1-swap local search.
//! Ties are always broken toward the lexicographically smallest index set.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("selection has {got} items, expected {expected}")]
    Cardinality { expected: usize, got: usize },
    #[error("{combinations} subsets exceed the enumeration budget of {budget}; use local search")]
    BudgetExceeded { combinations: u128, budget: u128 },
}

const TIE_EPS: f64 = 1e-9;
pub const DEFAULT_EXACT_BUDGET: u128 = 2_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetProblem {
    /// `K` rows of `M` features.
    features: Vec<Vec<f64>>,
    bins: usize,
    /// `H` rows of `M` probabilities; each column sums to one.
    target_pmf: Vec<Vec<f64>>,
    subset_size: usize,
}

impl SubsetProblem {
    pub fn new(
        features: Vec<Vec<f64>>,
        bins: usize,
        target_pmf: Vec<Vec<f64>>,
        subset_size: usize,
    ) -> Result<Self, SamplerError> {
        let k = features.len();
        if k == 0 {
            return Err(SamplerError::InvalidProblem("no items".into()));
        }
        let m = features[0].len();
        if m == 0 || features.iter().any(|f| f.len() != m) {
            return Err(SamplerError::InvalidProblem(
                "feature rows must share a nonzero length".into(),
            ));
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SamplerError::InvalidProblem("non-finite feature".into()));
        }
        if subset_size == 0 || subset_size > k {
            return Err(SamplerError::InvalidProblem(format!(
                "subset size {subset_size} not in 1..={k}"
            )));
        }
        if bins == 0 || target_pmf.len() != bins || target_pmf.iter().any(|r| r.len() != m) {
            return Err(SamplerError::InvalidProblem(format!(
                "target PMF must be {bins}x{m}"
            )));
        }
        for j in 0..m {
            let s: f64 = target_pmf.iter().map(|r| r[j]).sum();
            if (s - 1.0).abs() > 1e-9 || target_pmf.iter().any(|r| r[j] < 0.0) {
                return Err(SamplerError::InvalidProblem(format!(
                    "PMF column {j} sums to {s}"
                )));
            }
        }
        Ok(Self {
            features,
            bins,
            target_pmf,
            subset_size,
        })
    }

    /// Uniform target over `bins` bins on every feature.
    pub fn uniform(
        features: Vec<Vec<f64>>,
        bins: usize,
        subset_size: usize,
    ) -> Result<Self, SamplerError> {
        let m = features.first().map_or(0, Vec::len);
        let pmf = vec![vec![1.0 / bins.max(1) as f64; m]; bins];
        Self::new(features, bins, pmf, subset_size)
    }

    pub fn items(&self) -> usize {
        self.features.len()
    }

    pub fn dims(&self) -> usize {
        self.features[0].len()
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn subset_size(&self) -> usize {
        self.subset_size
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn target_pmf(&self) -> &[Vec<f64>] {
        &self.target_pmf
    }
}

/// Bin membership per dimension. `assignment[m][i]` is the bin of item `i`
/// in dimension `m`, which is the row holding the single 1 in column `i` of
/// `B^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinMatrices {
    bins: usize,
    assignment: Vec<Vec<usize>>,
}

impl BinMatrices {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn dims(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self, dim: usize) -> &[usize] {
        &self.assignment[dim]
    }

    /// Dense `H x K` 0/1 matrix for one dimension.
    pub fn matrix(&self, dim: usize) -> Vec<Vec<u8>> {
        let a = &self.assignment[dim];
        (0..self.bins)
            .map(|h| a.iter().map(|&b| (b == h) as u8).collect())
            .collect()
    }
}

/// Equal-width bins over the observed `[min, max]` of each dimension.
pub fn quantize(problem: &SubsetProblem) -> BinMatrices {
    let h = problem.bins;
    let assignment = (0..problem.dims())
        .map(|m| {
            let col = problem.features.iter().map(|f| f[m]);
            let lo = col.clone().fold(f64::INFINITY, f64::min);
            let hi = col.clone().fold(f64::NEG_INFINITY, f64::max);
            col.map(|v| {
                if hi <= lo {
                    0
                } else {
                    ((h as f64 * (v - lo) / (hi - lo)).floor() as usize).min(h - 1)
                }
            })
            .collect()
        })
        .collect();
    BinMatrices {
        bins: h,
        assignment,
    }
}

/// L1 distance between the selected histograms and `N * D`.
pub fn objective(
    x: &[u8],
    bins: &BinMatrices,
    target_pmf: &[Vec<f64>],
    n: usize,
) -> Result<f64, SamplerError> {
    let got = x.iter().filter(|&&v| v != 0).count();
    if got != n || x.iter().any(|&v| v > 1) {
        return Err(SamplerError::Cardinality { expected: n, got });
    }
    let mut total = 0.0;
    for m in 0..bins.dims() {
        let mut counts = vec![0usize; bins.bins];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 1 {
                counts[bins.assignment[m][i]] += 1;
            }
        }
        for (h, &c) in counts.iter().enumerate() {
            total += (c as f64 - n as f64 * target_pmf[h][m]).abs();
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionVector {
    /// Selected item indices, ascending.
    pub selected: Vec<usize>,
    pub objective: f64,
}

impl SelectionVector {
    pub fn indicator(&self, items: usize) -> Vec<u8> {
        let mut x = vec![0u8; items];
        for &i in &self.selected {
            x[i] = 1;
        }
        x
    }

    /// Strict preference: lower objective, then lexicographically smaller set.
    fn better_than(&self, other: &SelectionVector) -> bool {
        if self.objective < other.objective - TIE_EPS {
            return true;
        }
        if self.objective > other.objective + TIE_EPS {
            return false;
        }
        self.selected < other.selected
    }
}

/// Running histogram state for incremental objective updates.
struct Histograms<'a> {
    assign: &'a [Vec<usize>],
    targets: Vec<Vec<f64>>,
    counts: Vec<Vec<i64>>,
}

impl<'a> Histograms<'a> {
    fn new(problem: &SubsetProblem, bins: &'a BinMatrices) -> Self {
        let n = problem.subset_size as f64;
        let targets = (0..problem.dims())
            .map(|m| {
                (0..bins.bins)
                    .map(|h| n * problem.target_pmf[h][m])
                    .collect()
            })
            .collect();
        Self {
            assign: &bins.assignment,
            targets,
            counts: vec![vec![0; bins.bins]; problem.dims()],
        }
    }

    fn objective(&self) -> f64 {
        let mut t = 0.0;
        for (c, tg) in self.counts.iter().zip(&self.targets) {
            for (&ci, &ti) in c.iter().zip(tg) {
                t += (ci as f64 - ti).abs();
            }
        }
        t
    }

    fn add(&mut self, item: usize, sign: i64) {
        for (m, a) in self.assign.iter().enumerate() {
            self.counts[m][a[item]] += sign;
        }
    }

    fn add_delta(&self, item: usize) -> f64 {
        let mut d = 0.0;
        for (m, a) in self.assign.iter().enumerate() {
            let b = a[item];
            let (c, t) = (self.counts[m][b] as f64, self.targets[m][b]);
            d += (c + 1.0 - t).abs() - (c - t).abs();
        }
        d
    }

    fn swap_delta(&self, out: usize, inn: usize) -> f64 {
        let mut d = 0.0;
        for (m, a) in self.assign.iter().enumerate() {
            let (bo, bi) = (a[out], a[inn]);
            if bo == bi {
                continue;
            }
            let (co, to) = (self.counts[m][bo] as f64, self.targets[m][bo]);
            let (ci, ti) = (self.counts[m][bi] as f64, self.targets[m][bi]);
            d += (co - 1.0 - to).abs() - (co - to).abs() + (ci + 1.0 - ti).abs() - (ci - ti).abs();
        }
        d
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Global optimum by enumerating all `C(K, N)` subsets in lexicographic order.
pub fn solve_exact(problem: &SubsetProblem, budget: u128) -> Result<SelectionVector, SamplerError> {
    let (k, n) = (problem.items(), problem.subset_size);
    let combinations = binomial(k, n);
    if combinations > budget {
        return Err(SamplerError::BudgetExceeded {
            combinations,
            budget,
        });
    }
    let bins = quantize(problem);
    let mut hist = Histograms::new(problem, &bins);
    let mut current = Vec::with_capacity(n);
    let mut best: Option<SelectionVector> = None;

    fn walk(
        start: usize,
        k: usize,
        n: usize,
        hist: &mut Histograms<'_>,
        current: &mut Vec<usize>,
        best: &mut Option<SelectionVector>,
    ) {
        if current.len() == n {
            let obj = hist.objective();
            // Enumeration is lexicographic, so only a strictly better value replaces.
            if best.as_ref().is_none_or(|b| obj < b.objective - TIE_EPS) {
                *best = Some(SelectionVector {
                    selected: current.clone(),
                    objective: obj,
                });
            }
            return;
        }
        let remaining = n - current.len();
        for i in start..=k - remaining {
            current.push(i);
            hist.add(i, 1);
            walk(i + 1, k, n, hist, current, best);
            hist.add(i, -1);
            current.pop();
        }
    }

    walk(0, k, n, &mut hist, &mut current, &mut best);
    Ok(best.expect("at least one subset"))
}

fn finish(hist: &Histograms<'_>, mut selected: Vec<usize>) -> SelectionVector {
    selected.sort_unstable();
    SelectionVector {
        objective: hist.objective(),
        selected,
    }
}

/// Greedy construction: repeatedly add the item that lowers the objective
/// most, lowest index on ties.
pub fn solve_greedy(problem: &SubsetProblem) -> SelectionVector {
    let bins = quantize(problem);
    let mut hist = Histograms::new(problem, &bins);
    let mut chosen = vec![false; problem.items()];
    let mut selected = Vec::with_capacity(problem.subset_size);
    greedy_fill(&mut hist, &mut chosen, &mut selected, problem.subset_size);
    finish(&hist, selected)
}

fn greedy_fill(
    hist: &mut Histograms<'_>,
    chosen: &mut [bool],
    selected: &mut Vec<usize>,
    n: usize,
) {
    while selected.len() < n {
        let mut best: Option<(f64, usize)> = None;
        for (i, _) in chosen.iter().enumerate().filter(|(_, &c)| !c) {
            let d = hist.add_delta(i);
            if best.is_none_or(|(bd, _)| d < bd - TIE_EPS) {
                best = Some((d, i));
            }
        }
        let (_, i) = best.expect("enough unselected items");
        chosen[i] = true;
        selected.push(i);
        hist.add(i, 1);
    }
}

/// Best-improvement 1-swap descent to a local optimum.
fn swap_descent(hist: &mut Histograms<'_>, chosen: &mut [bool], selected: &mut [usize]) {
    loop {
        selected.sort_unstable();
        let mut best: Option<(f64, usize, usize)> = None;
        for (pos, &out) in selected.iter().enumerate() {
            for inn in (0..chosen.len()).filter(|&i| !chosen[i]) {
                let d = hist.swap_delta(out, inn);
                if d < -TIE_EPS && best.is_none_or(|(bd, _, _)| d < bd - TIE_EPS) {
                    best = Some((d, pos, inn));
                }
            }
        }
        let Some((_, pos, inn)) = best else { return };
        let out = selected[pos];
        hist.add(out, -1);
        hist.add(inn, 1);
        chosen[out] = false;
        chosen[inn] = true;
        selected[pos] = inn;
    }
}

/// Greedy construction plus 1-swap local search, repeated over `restarts`
/// starts. The first start is the deterministic greedy solution; later
/// starts begin from seeded random subsets.
pub fn solve_local_search(problem: &SubsetProblem, seed: u64, restarts: usize) -> SelectionVector {
    let bins = quantize(problem);
    let (k, n) = (problem.items(), problem.subset_size);
    let mut best: Option<SelectionVector> = None;
    for r in 0..restarts.max(1) {
        let mut hist = Histograms::new(problem, &bins);
        let mut chosen = vec![false; k];
        let mut selected = Vec::with_capacity(n);
        if r == 0 {
            greedy_fill(&mut hist, &mut chosen, &mut selected, n);
        } else {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            for i in index::sample(&mut rng, k, n) {
                chosen[i] = true;
                selected.push(i);
                hist.add(i, 1);
            }
        }
        swap_descent(&mut hist, &mut chosen, &mut selected);
        let candidate = finish(&hist, selected);
        if best.as_ref().is_none_or(|b| candidate.better_than(b)) {
            best = Some(candidate);
        }
    }
    best.expect("at least one restart")
}

/// One independent problem per content category, each with its own `N`.
pub fn solve_by_category(
    categories: &[(String, SubsetProblem)],
    seed: u64,
    restarts: usize,
) -> Vec<(String, SelectionVector)> {
    categories
        .iter()
        .enumerate()
        .map(|(c, (name, p))| {
            (
                name.clone(),
                solve_local_search(p, seed.wrapping_add(c as u64), restarts),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn one_dim(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    /// Independent objective: materialize B^m and evaluate the matrix form.
    fn matrix_objective(problem: &SubsetProblem, x: &[u8]) -> f64 {
        let b = quantize(problem);
        let n = problem.subset_size() as f64;
        (0..problem.dims())
            .map(|m| {
                b.matrix(m)
                    .iter()
                    .enumerate()
                    .map(|(h, row)| {
                        let bx: f64 = row.iter().zip(x).map(|(&r, &xi)| (r * xi) as f64).sum();
                        (bx - n * problem.target_pmf()[h][m]).abs()
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    fn brute_force(problem: &SubsetProblem) -> (f64, Vec<usize>) {
        let k = problem.items();
        let mut best = (f64::INFINITY, vec![]);
        let mut subsets: Vec<Vec<usize>> = (0u32..1 << k)
            .filter(|m| m.count_ones() as usize == problem.subset_size())
            .map(|m| (0..k).filter(|&i| m >> i & 1 == 1).collect())
            .collect();
        subsets.sort();
        for s in subsets {
            let mut x = vec![0u8; k];
            s.iter().for_each(|&i| x[i] = 1);
            let obj = matrix_objective(problem, &x);
            if obj < best.0 - 1e-9 {
                best = (obj, s);
            }
        }
        best
    }

    fn random_problem(seed: u64, k: usize, m: usize, h: usize, n: usize) -> SubsetProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = (0..k)
            .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
            .collect();
        SubsetProblem::uniform(f, h, n).unwrap()
    }

    #[test]
    fn quantize_examples() {
        let p = SubsetProblem::uniform(one_dim(&[0.0, 0.5, 1.0]), 2, 1).unwrap();
        assert_eq!(quantize(&p).assignment(0), &[0, 1, 1]);
        let flat = SubsetProblem::uniform(one_dim(&[3.0; 4]), 3, 2).unwrap();
        assert_eq!(quantize(&flat).assignment(0), &[0, 0, 0, 0]);
        // range [1, 7], width 2: floor(3 * (v - 1) / 6)
        let six = SubsetProblem::uniform(one_dim(&[1.0, 2.0, 3.0, 4.5, 6.9, 7.0]), 3, 2).unwrap();
        assert_eq!(quantize(&six).assignment(0), &[0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn bin_matrix_columns_have_single_one() {
        let p = random_problem(7, 20, 3, 4, 5);
        let b = quantize(&p);
        for m in 0..3 {
            let mat = b.matrix(m);
            for i in 0..20 {
                assert_eq!(mat.iter().map(|r| r[i] as usize).sum::<usize>(), 1);
            }
        }
    }

    #[test]
    fn objective_examples() {
        let p = SubsetProblem::uniform(one_dim(&[0.0, 0.1, 0.9, 1.0]), 2, 2).unwrap();
        let b = quantize(&p);
        assert_eq!(
            objective(&[1, 0, 1, 0], &b, p.target_pmf(), 2).unwrap(),
            0.0
        );
        assert_eq!(
            objective(&[1, 1, 0, 0], &b, p.target_pmf(), 2).unwrap(),
            2.0
        );
        assert_eq!(
            objective(&[1, 1, 1, 0], &b, p.target_pmf(), 2),
            Err(SamplerError::Cardinality {
                expected: 2,
                got: 3
            })
        );
    }

    #[test]
    fn objective_matches_matrix_form() {
        let p = random_problem(11, 10, 2, 3, 4);
        let b = quantize(&p);
        let x = [1, 0, 0, 1, 0, 1, 0, 0, 1, 0];
        assert!(
            (objective(&x, &b, p.target_pmf(), 4).unwrap() - matrix_objective(&p, &x)).abs()
                < 1e-12
        );
    }

    #[test]
    fn exact_balances_symmetric_instance() {
        let p = SubsetProblem::uniform(one_dim(&[0.1, 0.2, 0.3, 0.6, 0.7, 0.8]), 2, 2).unwrap();
        let s = solve_exact(&p, DEFAULT_EXACT_BUDGET).unwrap();
        assert_eq!(s.objective, 0.0);
        assert_eq!(s.selected, vec![0, 3]);
    }

    #[test]
    fn exact_full_set() {
        let p = SubsetProblem::uniform(one_dim(&[0.0, 0.1, 0.2, 1.0]), 2, 4).unwrap();
        let s = solve_exact(&p, DEFAULT_EXACT_BUDGET).unwrap();
        assert_eq!(s.selected, vec![0, 1, 2, 3]);
        // counts (3, 1) vs targets (2, 2)
        assert_eq!(s.objective, 2.0);
    }

    #[test]
    fn exact_matches_enumeration_oracle() {
        let p = random_problem(42, 8, 2, 2, 4);
        let s = solve_exact(&p, DEFAULT_EXACT_BUDGET).unwrap();
        let (obj, set) = brute_force(&p);
        assert!((s.objective - obj).abs() < 1e-12);
        assert_eq!(s.selected, set);
        let ls = solve_local_search(&p, 1, 8);
        assert!((ls.objective - obj).abs() < 1e-12);
    }

    #[test]
    fn budget_exceeded() {
        let p = random_problem(1, 40, 1, 2, 20);
        assert!(matches!(
            solve_exact(&p, DEFAULT_EXACT_BUDGET),
            Err(SamplerError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn greedy_reaches_unique_zero() {
        // Two bins; exactly one item in the upper bin, N = 2: the only
        // zero-objective subsets contain item 5.
        let p = SubsetProblem::uniform(one_dim(&[0.0, 0.05, 0.1, 0.15, 0.2, 1.0]), 2, 2).unwrap();
        let s = solve_local_search(&p, 0, 1);
        assert_eq!(s.objective, 0.0);
        assert_eq!(s.selected, vec![0, 5]);
    }

    #[test]
    fn local_search_deterministic() {
        let p = random_problem(5, 30, 3, 3, 9);
        assert_eq!(solve_local_search(&p, 17, 1), solve_local_search(&p, 17, 1));
        assert_eq!(solve_local_search(&p, 17, 4), solve_local_search(&p, 17, 4));
    }

    #[test]
    fn invalid_problems() {
        assert!(SubsetProblem::uniform(vec![], 2, 1).is_err());
        assert!(SubsetProblem::uniform(one_dim(&[1.0, 2.0]), 2, 3).is_err());
        assert!(
            SubsetProblem::new(one_dim(&[1.0, 2.0]), 2, vec![vec![0.3], vec![0.3]], 1).is_err()
        );
    }

    proptest! {
        #[test]
        fn solver_ordering(seed in any::<u64>(), m in 1usize..3, h in 2usize..4) {
            let p = random_problem(seed, 9, m, h, 4);
            let exact = solve_exact(&p, DEFAULT_EXACT_BUDGET).unwrap();
            let ls = solve_local_search(&p, seed, 3);
            let greedy = solve_greedy(&p);
            prop_assert!(exact.objective <= ls.objective + 1e-9);
            prop_assert!(ls.objective <= greedy.objective + 1e-9);
            for s in [&exact, &ls, &greedy] {
                prop_assert_eq!(s.selected.len(), 4);
                let x = s.indicator(9);
                prop_assert!((matrix_objective(&p, &x) - s.objective).abs() < 1e-9);
            }
        }

        #[test]
        fn objective_depends_only_on_bins(seed in any::<u64>()) {
            let p = random_problem(seed, 12, 2, 3, 5);
            let scaled: Vec<Vec<f64>> = p.features().iter().map(|f| f.iter().map(|v| 4.0 * v).collect()).collect();
            let q = SubsetProblem::uniform(scaled, 3, 5).unwrap();
            prop_assert_eq!(quantize(&p), quantize(&q));
            let x = solve_greedy(&p).indicator(12);
            prop_assert_eq!(objective(&x, &quantize(&p), p.target_pmf(), 5).unwrap(),
                            objective(&x, &quantize(&q), q.target_pmf(), 5).unwrap());
        }
    }
}
