//! Permutation reference distributions: restricted Monte Carlo and exhaustive
//! local tests, and single or product-group global tests.
//!
//! Local tests only need the images of the tested vertex's neighbours, so a
//! restricted permutation is drawn as a partial Fisher-Yates shuffle of the
//! other `n - 1` indices. Each vertex has its own RNG stream, which makes the
//! permutation sequence independent of the statistic being tested.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assoc::{local_statistic, row_summary, ObservationVector, ProximityKind, Statistic};
use crate::error::{Error, ExclusionReason, Result};
use crate::graph::WeightMatrix;
use crate::inference::Tail;
use crate::rng::{stream, StreamRng};

/// Largest `n` accepted by the exhaustive enumerators.
pub const MAX_EXHAUSTIVE_N: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PermutationMode {
    RestrictedLocal { vertex: usize },
    SingleGlobal,
    ProductGroupGlobal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub mode: PermutationMode,
    pub perms: usize,
    pub seed: u64,
    pub tail: Tail,
}

impl PermutationPlan {
    pub fn new(mode: PermutationMode, perms: usize, seed: u64, tail: Tail) -> Result<Self> {
        if perms == 0 {
            return Err(Error::InvalidParameter("permutation count must be at least 1".into()));
        }
        Ok(Self { mode, perms, seed, tail })
    }
}

/// Uniform permutation of `0..n` fixing `fixed`; entry `j` is the source index
/// whose value moves to position `j`.
pub fn draw_restricted_permutation<R: Rng + ?Sized>(rng: &mut R, n: usize, fixed: usize) -> Vec<usize> {
    assert!(fixed < n, "fixed index out of range");
    let mut others: Vec<usize> = (0..n).filter(|&j| j != fixed).collect();
    for t in (1..others.len()).rev() {
        let k = rng.random_range(0..=t);
        others.swap(t, k);
    }
    let mut perm = Vec::with_capacity(n);
    let mut it = others.into_iter();
    for j in 0..n {
        perm.push(if j == fixed { fixed } else { it.next().unwrap() });
    }
    perm
}

/// Uniform permutation of `0..n`.
pub fn draw_permutation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for t in (1..n).rev() {
        let k = rng.random_range(0..=t);
        perm.swap(t, k);
    }
    perm
}

/// Draws the first `m` entries of a uniform shuffle of `pool` in place.
fn partial_shuffle<R: Rng + ?Sized>(rng: &mut R, pool: &mut [usize], m: usize) {
    let len = pool.len();
    for t in 0..m {
        let k = rng.random_range(t..len);
        pool.swap(t, k);
    }
}

/// Result of a Monte Carlo or exhaustive permutation test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermOutcome {
    pub p: f64,
    /// Permutations meeting the tail criterion, the observed one included.
    pub hits: u64,
    /// Denominator of `p`.
    pub total: u64,
}

impl PermOutcome {
    fn new(hits: u64, total: u64) -> Self {
        Self {
            p: hits as f64 / total as f64,
            hits,
            total,
        }
    }
}

/// How a permuted statistic is compared with the observed one.
///
/// Moran, G and G* at vertex `i` are all monotone in the neighbour sum
/// `S(π) = Σ_{j∈N(i)} y_π(j)`, so they are compared through `S` with an
/// orientation sign; this gives identical reference distributions for the
/// three statistics under a shared stream. Geary is compared through
/// `γ_i(π)` itself.
#[derive(Debug, Clone, Copy)]
struct LocalComparator {
    yi: f64,
    kind: ProximityKind,
    sign: f64,
    centre: f64,
    observed: f64,
    tol: f64,
    tail: Tail,
}

impl LocalComparator {
    fn new(w: &WeightMatrix, y: &ObservationVector, stat: Statistic, i: usize, tail: Tail) -> Result<Self> {
        if w.n() != y.len() {
            return Err(Error::InvalidParameter("weights and observations differ in size".into()));
        }
        if i >= y.len() {
            return Err(Error::InvalidParameter(format!("vertex {i} out of range")));
        }
        // surfaces zero-variance / zero-sum problems exactly as the statistic would
        local_statistic(w, y, stat, i)?;
        let n = y.len();
        let m = w.degree(i) as f64;
        let yi = y.get(i);
        let kind = stat.proximity();
        let nbrs = w.neighbors(i);
        let (sign, centre, observed, max_term) = match stat {
            Statistic::Geary => {
                let row = row_summary(w, y, kind, i);
                let max_term = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| kind.eval(y, i, j).abs())
                    .fold(0.0, f64::max);
                (1.0, row.centering(), row.gamma, max_term)
            }
            _ => {
                let sign = match stat {
                    Statistic::Moran => sign_of(yi - y.mean()),
                    Statistic::GetisG => sign_of(y.sum() - yi),
                    _ => sign_of(y.sum()),
                };
                let (mean_excl, _) = y.leave_one_out(i);
                let observed: f64 = nbrs.iter().map(|&j| y.get(j)).sum();
                let max_term = (0..n).filter(|&j| j != i).map(|j| y.get(j).abs()).fold(0.0, f64::max);
                (sign, m * mean_excl, observed, max_term)
            }
        };
        let tol = 64.0 * f64::EPSILON * (m * max_term + centre.abs() + observed.abs());
        Ok(Self {
            yi,
            kind,
            sign,
            centre,
            observed,
            tol,
            tail,
        })
    }

    fn is_constant(&self) -> bool {
        self.sign == 0.0
    }

    /// Comparison quantity for a permutation that sends the neighbours to `images`.
    fn quantity(&self, y: &ObservationVector, images: &[usize]) -> f64 {
        match self.kind {
            ProximityKind::GearySquare => images
                .iter()
                .map(|&j| self.kind.eval_values(y.mean(), self.yi, y.get(j)))
                .sum(),
            ProximityKind::MoranCross => images.iter().map(|&j| y.get(j)).sum(),
        }
    }

    fn exceeds(&self, q: f64) -> bool {
        exceeds(self.tail, self.sign, q, self.observed, self.centre, self.tol)
    }
}

fn sign_of(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn exceeds(tail: Tail, sign: f64, q: f64, observed: f64, centre: f64, tol: f64) -> bool {
    match tail {
        Tail::Upper => sign * (q - observed) >= -tol,
        Tail::Lower => sign * (q - observed) <= tol,
        Tail::TwoSided => (q - centre).abs() >= (observed - centre).abs() - tol,
    }
}

/// Restricted Monte Carlo p-value `(1 + #{k : T(π_k) ⪰ T*}) / (B + 1)`.
pub fn mc_local_pvalue(
    w: &WeightMatrix,
    y: &ObservationVector,
    stat: Statistic,
    plan: &PermutationPlan,
) -> Result<PermOutcome> {
    let PermutationMode::RestrictedLocal { vertex: i } = plan.mode else {
        return Err(Error::InvalidParameter("local test needs a restricted-local plan".into()));
    };
    let cmp = LocalComparator::new(w, y, stat, i, plan.tail)?;
    let b = plan.perms as u64;
    if cmp.is_constant() {
        return Ok(PermOutcome::new(b + 1, b + 1));
    }
    let m = w.degree(i);
    let mut pool: Vec<usize> = (0..y.len()).filter(|&j| j != i).collect();
    let mut rng = stream(plan.seed, "local-mc", i as u64, 0);
    let mut hits = 1u64;
    for _ in 0..b {
        partial_shuffle(&mut rng, &mut pool, m);
        if cmp.exceeds(cmp.quantity(y, &pool[..m])) {
            hits += 1;
        }
    }
    Ok(PermOutcome::new(hits, b + 1))
}

/// Exact proportion of the `(n-1)!` restricted permutations (identity
/// included) meeting the tail criterion.
pub fn exhaustive_local_pvalue(
    w: &WeightMatrix,
    y: &ObservationVector,
    stat: Statistic,
    i: usize,
    tail: Tail,
) -> Result<PermOutcome> {
    let n = y.len();
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::Infeasible(format!(
            "exhaustive enumeration needs n <= {MAX_EXHAUSTIVE_N}, got n = {n}"
        )));
    }
    let cmp = LocalComparator::new(w, y, stat, i, tail)?;
    let total: u64 = (1..n as u64).product();
    if cmp.is_constant() {
        return Ok(PermOutcome::new(total, total));
    }
    // Positions of the neighbours within the list of other indices.
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let slots: Vec<usize> = w
        .neighbors(i)
        .iter()
        .map(|j| others.iter().position(|o| o == j).unwrap())
        .collect();
    let mut arr = others.clone();
    let mut images = vec![0usize; slots.len()];
    let mut hits = 0u64;
    heap_permutations(&mut arr, |a| {
        for (img, &s) in images.iter_mut().zip(&slots) {
            *img = a[s];
        }
        if cmp.exceeds(cmp.quantity(y, &images)) {
            hits += 1;
        }
    });
    Ok(PermOutcome::new(hits, total))
}

/// Visits every permutation of `a` (Heap's algorithm, iterative).
fn heap_permutations(a: &mut [usize], mut visit: impl FnMut(&[usize])) {
    let n = a.len();
    let mut c = vec![0usize; n];
    visit(a);
    let mut k = 0;
    while k < n {
        if c[k] < k {
            if k % 2 == 0 {
                a.swap(0, k);
            } else {
                a.swap(c[k], k);
            }
            visit(a);
            c[k] += 1;
            k = 0;
        } else {
            c[k] = 0;
            k += 1;
        }
    }
}

/// `γ(π)` under an independent restricted permutation of every row.
pub fn product_group_gamma(
    w: &WeightMatrix,
    y: &ObservationVector,
    kind: ProximityKind,
    rng: &mut StreamRng,
    pool: &mut Vec<usize>,
) -> f64 {
    let n = y.len();
    let mut total = 0.0;
    for i in 0..n {
        let m = w.degree(i);
        if m == 0 {
            continue;
        }
        pool.clear();
        pool.extend((0..n).filter(|&j| j != i));
        partial_shuffle(rng, pool, m);
        let yi = y.get(i);
        total += pool[..m].iter().map(|&j| kind.eval_values(y.mean(), yi, y.get(j))).sum::<f64>();
    }
    total
}

/// Global gamma with the value at vertex `j` taken from `y[perm[j]]`.
fn permuted_global_gamma(w: &WeightMatrix, y: &ObservationVector, kind: ProximityKind, perm: &[usize]) -> f64 {
    let mean = y.mean();
    let mut total = 0.0;
    for i in 0..y.len() {
        let yi = y.get(perm[i]);
        for &j in w.neighbors(i) {
            total += kind.eval_values(mean, yi, y.get(perm[j]));
        }
    }
    total
}

/// Reference centre for the two-sided global test: the exact permutation mean
/// `M Σ_{k≠l} λ_kl / (n(n-1))` for a single permutation, `Σ m_i λ̄₋ᵢ` for the
/// product group.
pub fn global_centre(w: &WeightMatrix, y: &ObservationVector, kind: ProximityKind, mode: PermutationMode) -> f64 {
    let n = y.len();
    let rows: Vec<_> = (0..n).map(|i| row_summary(w, y, kind, i)).collect();
    match mode {
        PermutationMode::ProductGroupGlobal => rows.iter().map(|r| r.centering()).sum(),
        _ => {
            let pair_mean = rows.iter().map(|r| r.lambda_mean).sum::<f64>() / n as f64;
            w.degrees().iter().sum::<usize>() as f64 * pair_mean
        }
    }
}

struct GlobalComparator {
    centre: f64,
    observed: f64,
    tol: f64,
    tail: Tail,
}

impl GlobalComparator {
    fn new(w: &WeightMatrix, y: &ObservationVector, kind: ProximityKind, mode: PermutationMode, tail: Tail) -> Self {
        let observed = permuted_global_gamma(w, y, kind, &(0..y.len()).collect::<Vec<_>>());
        let centre = global_centre(w, y, kind, mode);
        let scale: f64 = (0..y.len())
            .map(|i| w.neighbors(i).iter().map(|&j| kind.eval(y, i, j).abs()).sum::<f64>())
            .sum();
        let tol = 64.0 * f64::EPSILON * (scale + centre.abs() + observed.abs());
        Self {
            centre,
            observed,
            tol,
            tail,
        }
    }

    fn exceeds(&self, q: f64) -> bool {
        exceeds(self.tail, 1.0, q, self.observed, self.centre, self.tol)
    }
}

fn check_global(w: &WeightMatrix, y: &ObservationVector) -> Result<()> {
    if w.n() != y.len() {
        return Err(Error::InvalidParameter("weights and observations differ in size".into()));
    }
    if y.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 vertices".into()));
    }
    Ok(())
}

/// Monte Carlo p-value for the global gamma statistic.
///
/// Replicate `k` uses its own stream, so the result does not depend on how
/// replicates are scheduled across threads.
pub fn mc_global_pvalue(
    w: &WeightMatrix,
    y: &ObservationVector,
    kind: ProximityKind,
    plan: &PermutationPlan,
) -> Result<PermOutcome> {
    check_global(w, y)?;
    if matches!(plan.mode, PermutationMode::RestrictedLocal { .. }) {
        return Err(Error::InvalidParameter("global test needs a global plan".into()));
    }
    let b = plan.perms as u64;
    if y.variance() == 0.0 {
        return Ok(PermOutcome::new(b + 1, b + 1));
    }
    let cmp = GlobalComparator::new(w, y, kind, plan.mode, plan.tail);
    let n = y.len();
    let hits: u64 = (0..b)
        .into_par_iter()
        .map_init(Vec::new, |pool, k| {
            let mut rng = stream(plan.seed, "global-mc", k, 0);
            let q = match plan.mode {
                PermutationMode::ProductGroupGlobal => product_group_gamma(w, y, kind, &mut rng, pool),
                _ => permuted_global_gamma(w, y, kind, &draw_permutation(&mut rng, n)),
            };
            u64::from(cmp.exceeds(q))
        })
        .sum();
    Ok(PermOutcome::new(hits + 1, b + 1))
}

/// Exact single-permutation global p-value over all `n!` arrangements.
pub fn exhaustive_global_pvalue(
    w: &WeightMatrix,
    y: &ObservationVector,
    kind: ProximityKind,
    tail: Tail,
) -> Result<PermOutcome> {
    check_global(w, y)?;
    let n = y.len();
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::Infeasible(format!(
            "exhaustive enumeration needs n <= {MAX_EXHAUSTIVE_N}, got n = {n}"
        )));
    }
    let total: u64 = (1..=n as u64).product();
    if y.variance() == 0.0 {
        return Ok(PermOutcome::new(total, total));
    }
    let cmp = GlobalComparator::new(w, y, kind, PermutationMode::SingleGlobal, tail);
    let mut arr: Vec<usize> = (0..n).collect();
    let mut hits = 0u64;
    heap_permutations(&mut arr, |p| {
        if cmp.exceeds(permuted_global_gamma(w, y, kind, p)) {
            hits += 1;
        }
    });
    Ok(PermOutcome::new(hits, total))
}

/// Reason an observation vector makes a local permutation test meaningless.
pub fn data_exclusion(y: &ObservationVector, stat: Statistic) -> Option<ExclusionReason> {
    match stat {
        Statistic::Moran | Statistic::Geary if y.variance() == 0.0 => Some(ExclusionReason::ZeroVariance),
        Statistic::GetisGStar if y.sum() == 0.0 => Some(ExclusionReason::ZeroSum),
        _ => None,
    }
}
