//! Synthetic graphs, null and correlated samplers, uniformity tests, and the
//! null-uniformity and power studies built from them.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assoc::{ObservationVector, Statistic};
use crate::error::{Error, Result};
use crate::graph::{Graph, WeightMatrix};
use crate::inference::{global_test, local_tests, EmpiricalBetaConfig, LocalOptions, Tail, ThresholdMode};
use crate::perm::{mc_global_pvalue, mc_local_pvalue, PermutationMode, PermutationPlan};
use crate::rng::{derive_seed, stream};
use crate::specfun::ln_erfc;

/// Stored 1% critical value of the Anderson-Darling statistic for a fully
/// specified null.
pub const AD_CRITICAL_1PCT: f64 = 3.857;
/// Smallest sample accepted by [`anderson_darling_uniform`].
pub const AD_MIN_N: usize = 8;
/// p-values are clamped to `[ε, 1-ε]` before the uniformity tests.
pub const UNIFORMITY_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Gaussian,
    /// Unit-rate exponential.
    Exponential,
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(Distribution::Gaussian),
            "exponential" | "exp" => Ok(Distribution::Exponential),
            _ => Err(Error::InvalidParameter(format!("unknown distribution `{s}`"))),
        }
    }
}

/// A planar triangulation with the coordinates of its vertices.
#[derive(Debug, Clone)]
pub struct PlanarMap {
    pub graph: Graph,
    pub points: Vec<[f64; 2]>,
}

/// Delaunay triangulation of `n` uniform points in the unit square.
pub fn planar_triangulation(n: usize, seed: u64) -> Result<PlanarMap> {
    if n < 3 {
        return Err(Error::InvalidParameter("planar triangulation needs n >= 3".into()));
    }
    let mut rng = stream(seed, "planar", n as u64, 0);
    let points: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let pts: Vec<delaunator::Point> = points.iter().map(|p| delaunator::Point { x: p[0], y: p[1] }).collect();
    let tri = delaunator::triangulate(&pts);
    let mut graph = Graph::new();
    for i in 0..n {
        graph.add_vertex(&format!("v{i}"));
    }
    for t in tri.triangles.chunks_exact(3) {
        graph.add_edge(t[0], t[1]);
        graph.add_edge(t[1], t[2]);
        graph.add_edge(t[2], t[0]);
    }
    // collinear input has no triangles; the hull is then a path
    for pair in tri.hull.windows(2) {
        graph.add_edge(pair[0], pair[1]);
    }
    if !graph.is_connected() {
        return Err(Error::InvalidParameter("triangulation is not connected".into()));
    }
    Ok(PlanarMap { graph, points })
}

/// Cycle on `n` vertices.
pub fn ring_graph(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidParameter("ring needs n >= 3".into()));
    }
    let mut g = Graph::new();
    for i in 0..n {
        g.add_vertex(&format!("v{i}"));
    }
    for i in 0..n {
        g.add_edge(i, (i + 1) % n);
    }
    Ok(g)
}

/// Rook-adjacency lattice with `rows × cols` vertices.
pub fn grid_graph(rows: usize, cols: usize) -> Result<Graph> {
    if rows == 0 || cols == 0 || rows * cols < 2 {
        return Err(Error::InvalidParameter("grid needs at least 2 cells".into()));
    }
    let mut g = Graph::new();
    for r in 0..rows {
        for c in 0..cols {
            g.add_vertex(&format!("r{r}c{c}"));
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                g.add_edge(v, v + 1);
            }
            if r + 1 < rows {
                g.add_edge(v, v + cols);
            }
        }
    }
    Ok(g)
}

/// Where a study's graph comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GraphSpec {
    Planar { n: usize },
    Ring { n: usize },
    Grid { rows: usize, cols: usize },
    /// Edge list supplied by the caller, identified by a content digest.
    File { source: String },
}

impl GraphSpec {
    /// Builds a synthetic graph. File graphs must be loaded by the caller.
    pub fn generate(&self, seed: u64) -> Result<Graph> {
        match *self {
            GraphSpec::Planar { n } => Ok(planar_triangulation(n, derive_seed(seed, "graph", 0))?.graph),
            GraphSpec::Ring { n } => ring_graph(n),
            GraphSpec::Grid { rows, cols } => grid_graph(rows, cols),
            GraphSpec::File { .. } => Err(Error::InvalidParameter("file graphs are loaded by the caller".into())),
        }
    }
}

/// `n` iid draws; Gaussian through the standard normal sampler, exponential as
/// `-ln(1 - U)`.
pub fn simulate_iid<R: Rng + ?Sized>(dist: Distribution, n: usize, rng: &mut R) -> ObservationVector {
    let values = (0..n)
        .map(|_| match dist {
            Distribution::Gaussian => rng.sample::<f64, _>(StandardNormal),
            Distribution::Exponential => -(1.0 - rng.random::<f64>()).ln(),
        })
        .collect();
    ObservationVector::new(values).expect("finite draws")
}

/// Sampler for `N(0, I + cA)` and its exponential-marginal copula.
#[derive(Debug, Clone)]
pub struct CorrelatedSampler {
    n: usize,
    /// Row-major lower Cholesky factor.
    l: Vec<f64>,
}

impl CorrelatedSampler {
    pub fn new(w: &WeightMatrix, c: f64) -> Result<Self> {
        let n = w.n();
        if !c.is_finite() {
            return Err(Error::InvalidParameter(format!("correlation coefficient {c} is not finite")));
        }
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0;
            for &j in w.neighbors(i) {
                a[i * n + j] = c;
            }
        }
        // Cholesky-Banachiewicz, failing at the first non-positive pivot
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::NotPositiveDefinite { index: i, pivot: s });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn sample_gaussian<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        (0..self.n)
            .map(|i| (0..=i).map(|k| self.l[i * self.n + k] * z[k]).sum())
            .collect()
    }

    /// Correlated draw with the requested marginals. Exponential marginals use
    /// `-ln Φ(-x)` of the latent Gaussian, evaluated in log space.
    pub fn sample<R: Rng + ?Sized>(&self, dist: Distribution, rng: &mut R) -> ObservationVector {
        let x = self.sample_gaussian(rng);
        let values = match dist {
            Distribution::Gaussian => x,
            Distribution::Exponential => x
                .into_iter()
                .map(|v| std::f64::consts::LN_2 - ln_erfc(v / std::f64::consts::SQRT_2))
                .collect(),
        };
        ObservationVector::new(values).expect("finite draws")
    }
}

pub fn simulate_correlated_gaussian<R: Rng + ?Sized>(w: &WeightMatrix, c: f64, rng: &mut R) -> Result<ObservationVector> {
    Ok(CorrelatedSampler::new(w, c)?.sample(Distribution::Gaussian, rng))
}

pub fn simulate_correlated_exponential<R: Rng + ?Sized>(
    w: &WeightMatrix,
    c: f64,
    rng: &mut R,
) -> Result<ObservationVector> {
    Ok(CorrelatedSampler::new(w, c)?.sample(Distribution::Exponential, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdResult {
    pub a2: f64,
    pub reject_1pct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p_value: f64,
    pub reject_1pct: bool,
}

fn clamped_sorted(p: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("{v} is not a probability")));
    }
    let mut u: Vec<f64> = p
        .iter()
        .map(|v| v.clamp(UNIFORMITY_CLAMP, 1.0 - UNIFORMITY_CLAMP))
        .collect();
    u.sort_by(f64::total_cmp);
    Ok(u)
}

/// Anderson-Darling test of uniformity on `(0, 1)`.
pub fn anderson_darling_uniform(p: &[f64]) -> Result<AdResult> {
    if p.len() < AD_MIN_N {
        return Err(Error::InvalidParameter(format!(
            "Anderson-Darling needs at least {AD_MIN_N} values, got {}",
            p.len()
        )));
    }
    let u = clamped_sorted(p)?;
    let n = u.len();
    let s: f64 = (0..n)
        .map(|i| (2 * i + 1) as f64 * (u[i].ln() + (-u[n - 1 - i]).ln_1p()))
        .sum();
    let a2 = -(n as f64) - s / n as f64;
    Ok(AdResult {
        a2,
        reject_1pct: a2 > AD_CRITICAL_1PCT,
    })
}

/// Kolmogorov-Smirnov test of uniformity using the asymptotic Kolmogorov
/// distribution with Stephens' finite-sample correction.
pub fn ks_uniform(p: &[f64]) -> Result<KsResult> {
    if p.is_empty() {
        return Err(Error::InvalidParameter("KS test needs at least one value".into()));
    }
    let u = clamped_sorted(p)?;
    let n = u.len() as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    let p_value = kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
    Ok(KsResult {
        d,
        p_value,
        reject_1pct: p_value < 0.01,
    })
}

/// `P(K > λ)` for the Kolmogorov distribution.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series, fast for small λ
        let x = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| ((2 * k - 1) as f64).powi(2) * x).map(f64::exp).sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// p-value source in a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Local beta-corrected bound.
    Beta,
    /// Local sub-Gaussian bound.
    Subgauss,
    /// Local normal approximation from the randomization moments.
    Zscore,
    /// Monte Carlo permutation test (local or global).
    Mc,
    /// Global analytic bound.
    Analytic,
    /// Global analytic bound after the empirical beta transform.
    EmpiricalBeta,
}

impl Method {
    fn is_local(self) -> bool {
        matches!(self, Method::Beta | Method::Subgauss | Method::Zscore | Method::Mc)
    }

    fn is_global(self) -> bool {
        matches!(self, Method::Analytic | Method::EmpiricalBeta | Method::Mc)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Beta => "beta",
            Method::Subgauss => "subgauss",
            Method::Zscore => "zscore",
            Method::Mc => "mc",
            Method::Analytic => "analytic",
            Method::EmpiricalBeta => "empirical_beta",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(Method::Beta),
            "subgauss" => Ok(Method::Subgauss),
            "zscore" => Ok(Method::Zscore),
            "mc" => Ok(Method::Mc),
            "analytic" => Ok(Method::Analytic),
            "empirical-beta" | "empirical_beta" => Ok(Method::EmpiricalBeta),
            _ => Err(Error::InvalidParameter(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// One p-value per testable vertex and replicate.
    Local,
    /// One p-value per replicate.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullStudyConfig {
    pub graph: GraphSpec,
    pub k: usize,
    pub distribution: Distribution,
    pub reps: usize,
    pub statistics: Vec<Statistic>,
    pub methods: Vec<Method>,
    pub scope: Scope,
    /// Permutations per Monte Carlo test.
    pub perms: usize,
    /// Replicates of the empirical beta transform.
    pub empirical_beta_r: usize,
    pub permutation_mode: PermutationMode,
    pub threshold: ThresholdMode,
    pub tail: Tail,
    pub seed: u64,
}

impl NullStudyConfig {
    /// Defaults for the local null-uniformity study.
    pub fn local(graph: GraphSpec, distribution: Distribution, reps: usize, seed: u64) -> Self {
        Self {
            graph,
            k: 1,
            distribution,
            reps,
            statistics: vec![Statistic::Moran],
            methods: vec![Method::Beta],
            scope: Scope::Local,
            perms: 999,
            empirical_beta_r: crate::inference::DEFAULT_EMPIRICAL_BETA_R,
            permutation_mode: PermutationMode::SingleGlobal,
            threshold: ThresholdMode::Centered,
            tail: Tail::TwoSided,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidParameter("reps must be at least 1".into()));
        }
        if self.statistics.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidParameter("need at least one statistic and one method".into()));
        }
        if self.perms == 0 {
            return Err(Error::InvalidParameter("perms must be at least 1".into()));
        }
        for m in &self.methods {
            let ok = match self.scope {
                Scope::Local => m.is_local(),
                Scope::Global => m.is_global(),
            };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "method `{}` is not available for a {:?} study",
                    m.name(),
                    self.scope
                )));
            }
        }
        if self.methods.contains(&Method::EmpiricalBeta) && self.empirical_beta_r < 2 {
            return Err(Error::InvalidParameter("empirical beta transform needs r >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStudyConfig {
    pub graph: GraphSpec,
    pub k: usize,
    pub distribution: Distribution,
    pub c_grid: Vec<f64>,
    pub reps: usize,
    pub perms: usize,
    pub alpha: f64,
    pub statistics: Vec<Statistic>,
    pub permutation_mode: PermutationMode,
    /// Adds the empirical beta transform with this many replicates.
    pub empirical_beta_r: Option<usize>,
    pub threshold: ThresholdMode,
    pub seed: u64,
}

impl PowerStudyConfig {
    pub fn new(graph: GraphSpec, distribution: Distribution, c_grid: Vec<f64>, reps: usize, seed: u64) -> Self {
        Self {
            graph,
            k: 1,
            distribution,
            c_grid,
            reps,
            perms: 500,
            alpha: 0.05,
            statistics: vec![Statistic::Moran],
            permutation_mode: PermutationMode::SingleGlobal,
            empirical_beta_r: None,
            threshold: ThresholdMode::Centered,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 || self.perms == 0 {
            return Err(Error::InvalidParameter("reps and perms must be at least 1".into()));
        }
        if self.c_grid.is_empty() || self.statistics.is_empty() {
            return Err(Error::InvalidParameter("need a non-empty c grid and statistic list".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {} is not in (0, 1)", self.alpha)));
        }
        if matches!(self.empirical_beta_r, Some(r) if r < 2) {
            return Err(Error::InvalidParameter("empirical beta transform needs r >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "study")]
pub enum StudyConfig {
    Null(NullStudyConfig),
    Power(PowerStudyConfig),
}

/// p-values of one replicate in one (statistic, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullReplicate {
    pub p_values: Vec<f64>,
    /// Vertices with no p-value (degenerate rows or unavailable moments).
    pub dropped: usize,
    pub ad: Option<AdResult>,
    pub ks: Option<KsResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullCell {
    pub statistic: Statistic,
    pub method: Method,
    pub distribution: Distribution,
    pub replicates: Vec<NullReplicate>,
    /// Replicates whose Anderson-Darling test rejects at 1%.
    pub ad_rejections: usize,
    pub ks_rejections: usize,
    /// Uniformity of all replicate p-values pooled (global studies).
    pub pooled_ad: Option<AdResult>,
    pub pooled_ks: Option<KsResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub c: f64,
    pub statistic: Statistic,
    pub method: Method,
    pub p_values: Vec<f64>,
    pub rejections: usize,
    pub power: f64,
    /// Binomial standard error `√(power (1 - power) / R)`.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphInfo {
    pub vertices: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub graph: GraphInfo,
    pub null_cells: Vec<NullCell>,
    pub power: Vec<PowerPoint>,
}

fn graph_info(w: &WeightMatrix) -> GraphInfo {
    GraphInfo {
        vertices: w.n(),
        edges: w.degrees().iter().sum::<usize>() / 2,
    }
}

fn uniformity(p: &[f64]) -> (Option<AdResult>, Option<KsResult>) {
    (anderson_darling_uniform(p).ok(), ks_uniform(p).ok())
}

/// One replicate of a local null study: `(statistic, method) -> (p, dropped)`.
fn local_replicate(
    cfg: &NullStudyConfig,
    w: &WeightMatrix,
    y: &ObservationVector,
    rep: usize,
) -> Result<Vec<(Vec<f64>, usize)>> {
    let mut out = Vec::new();
    let mc_seed = derive_seed(cfg.seed, "null-mc", rep as u64);
    for &stat in &cfg.statistics {
        let opts = LocalOptions {
            threshold: cfg.threshold,
            tail: cfg.tail,
            zscore: cfg.methods.contains(&Method::Zscore),
        };
        let results = local_tests(w, y, stat, opts)?;
        for &method in &cfg.methods {
            let mut p = Vec::new();
            let mut dropped = 0;
            for r in &results {
                if r.excluded.is_some() {
                    dropped += 1;
                    continue;
                }
                let value = match method {
                    Method::Beta => r.p_beta.map(|v| v.p),
                    Method::Subgauss => r.p_subgauss.map(|v| v.p),
                    Method::Zscore => r.p_zscore.map(|v| v.p),
                    Method::Mc => {
                        let plan = PermutationPlan::new(
                            PermutationMode::RestrictedLocal { vertex: r.vertex },
                            cfg.perms,
                            mc_seed,
                            cfg.tail,
                        )?;
                        Some(mc_local_pvalue(w, y, stat, &plan)?.p)
                    }
                    _ => unreachable!("validated"),
                };
                match value {
                    Some(v) => p.push(v),
                    None => dropped += 1,
                }
            }
            out.push((p, dropped));
        }
    }
    Ok(out)
}

fn global_replicate(cfg: &NullStudyConfig, w: &WeightMatrix, y: &ObservationVector, rep: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for &stat in &cfg.statistics {
        let emp = cfg.methods.contains(&Method::EmpiricalBeta).then(|| EmpiricalBetaConfig {
            r: cfg.empirical_beta_r,
            seed: derive_seed(cfg.seed, "null-alg1", rep as u64),
        });
        let g = global_test(w, y, stat, cfg.threshold, emp)?;
        for &method in &cfg.methods {
            out.push(match method {
                Method::Analytic => g.p_analytic.p,
                Method::EmpiricalBeta => g.p_emp_beta.expect("requested"),
                Method::Mc => {
                    let plan = PermutationPlan::new(
                        cfg.permutation_mode,
                        cfg.perms,
                        derive_seed(cfg.seed, "null-mc", rep as u64),
                        cfg.tail,
                    )?;
                    mc_global_pvalue(w, y, stat.proximity(), &plan)?.p
                }
                _ => unreachable!("validated"),
            });
        }
    }
    Ok(out)
}

/// Simulates iid data on `w` and records the p-values of every requested
/// (statistic, method) pair. Replicate `r` draws its data from its own stream,
/// so the report does not depend on the thread count.
pub fn run_null_study(cfg: &NullStudyConfig, w: &WeightMatrix) -> Result<StudyReport> {
    cfg.validate()?;
    let n = w.n();
    let cells_per_rep = cfg.statistics.len() * cfg.methods.len();
    let per_rep: Vec<Vec<(Vec<f64>, usize)>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let y = simulate_iid(cfg.distribution, n, &mut stream(cfg.seed, "null-data", rep as u64, 0));
            match cfg.scope {
                Scope::Local => local_replicate(cfg, w, &y, rep),
                Scope::Global => Ok(global_replicate(cfg, w, &y, rep)?.into_iter().map(|p| (vec![p], 0)).collect()),
            }
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(cells_per_rep);
    let mut idx = 0;
    for &statistic in &cfg.statistics {
        for &method in &cfg.methods {
            let replicates: Vec<NullReplicate> = per_rep
                .iter()
                .map(|r| {
                    let (p, dropped) = &r[idx];
                    let (ad, ks) = match cfg.scope {
                        Scope::Local => uniformity(p),
                        Scope::Global => (None, None),
                    };
                    NullReplicate {
                        p_values: p.clone(),
                        dropped: *dropped,
                        ad,
                        ks,
                    }
                })
                .collect();
            let (pooled_ad, pooled_ks) = match cfg.scope {
                Scope::Global => uniformity(&replicates.iter().flat_map(|r| r.p_values.iter().copied()).collect::<Vec<_>>()),
                Scope::Local => (None, None),
            };
            cells.push(NullCell {
                statistic,
                method,
                distribution: cfg.distribution,
                ad_rejections: replicates.iter().filter(|r| r.ad.is_some_and(|a| a.reject_1pct)).count(),
                ks_rejections: replicates.iter().filter(|r| r.ks.is_some_and(|k| k.reject_1pct)).count(),
                replicates,
                pooled_ad,
                pooled_ks,
            });
            idx += 1;
        }
    }
    Ok(StudyReport {
        config: StudyConfig::Null(cfg.clone()),
        graph: graph_info(w),
        null_cells: cells,
        power: Vec::new(),
    })
}

/// Power of the analytic and Monte Carlo global tests against `I + cA`
/// correlated data, for each `c` in the grid.
pub fn run_power_study(cfg: &PowerStudyConfig, w: &WeightMatrix) -> Result<StudyReport> {
    cfg.validate()?;
    let samplers: Vec<CorrelatedSampler> = cfg
        .c_grid
        .iter()
        .map(|&c| CorrelatedSampler::new(w, c).map_err(|e| Error::InvalidParameter(format!("c = {c}: {e}"))))
        .collect::<Result<_>>()?;
    let mut methods = vec![Method::Analytic, Method::Mc];
    if cfg.empirical_beta_r.is_some() {
        methods.push(Method::EmpiricalBeta);
    }
    let mut points = Vec::new();
    for (ci, (&c, sampler)) in cfg.c_grid.iter().zip(&samplers).enumerate() {
        // rows: replicate; columns: (statistic, method)
        let rows: Vec<Vec<f64>> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                let y = sampler.sample(cfg.distribution, &mut stream(cfg.seed, "power-data", ci as u64, rep as u64));
                let index = (ci * cfg.reps + rep) as u64;
                let mut row = Vec::new();
                for &stat in &cfg.statistics {
                    let emp = cfg.empirical_beta_r.map(|r| EmpiricalBetaConfig {
                        r,
                        seed: derive_seed(cfg.seed, "power-alg1", index),
                    });
                    let g = global_test(w, &y, stat, cfg.threshold, emp)?;
                    let plan = PermutationPlan::new(
                        cfg.permutation_mode,
                        cfg.perms,
                        derive_seed(cfg.seed, "power-mc", index),
                        Tail::TwoSided,
                    )?;
                    let mc = mc_global_pvalue(w, &y, stat.proximity(), &plan)?.p;
                    row.push(g.p_analytic.p);
                    row.push(mc);
                    if let Some(p) = g.p_emp_beta {
                        row.push(p);
                    }
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        let mut col = 0;
        for &statistic in &cfg.statistics {
            for &method in &methods {
                let p_values: Vec<f64> = rows.iter().map(|r| r[col]).collect();
                let rejections = p_values.iter().filter(|&&p| p < cfg.alpha).count();
                let power = rejections as f64 / cfg.reps as f64;
                points.push(PowerPoint {
                    c,
                    statistic,
                    method,
                    p_values,
                    rejections,
                    power,
                    se: (power * (1.0 - power) / cfg.reps as f64).sqrt(),
                });
                col += 1;
            }
        }
    }
    Ok(StudyReport {
        config: StudyConfig::Power(cfg.clone()),
        graph: graph_info(w),
        null_cells: Vec::new(),
        power: points,
    })
}

/// QQ plot data: per cell and replicate, sorted p-values against the uniform
/// plotting positions `(i - 0.5)/n`.
pub fn qq_csv(report: &StudyReport) -> String {
    let mut out = String::from("statistic,method,distribution,replicate,rank,expected,observed\n");
    for cell in &report.null_cells {
        for (r, rep) in cell.replicates.iter().enumerate() {
            let mut p = rep.p_values.clone();
            p.sort_by(f64::total_cmp);
            let n = p.len() as f64;
            for (i, v) in p.iter().enumerate() {
                let expected = (i as f64 + 0.5) / n;
                out.push_str(&format!(
                    "{},{},{},{},{},{:?},{:?}\n",
                    cell.statistic.name(),
                    cell.method.name(),
                    distribution_name(cell.distribution),
                    r,
                    i + 1,
                    expected,
                    v
                ));
            }
        }
    }
    out
}

/// Power curve data, one row per (c, statistic, method).
pub fn power_csv(report: &StudyReport) -> String {
    let mut out = String::from("c,statistic,method,power,se,rejections,reps\n");
    for p in &report.power {
        out.push_str(&format!(
            "{:?},{},{},{:?},{:?},{},{}\n",
            p.c,
            p.statistic.name(),
            p.method.name(),
            p.power,
            p.se,
            p.rejections,
            p.p_values.len()
        ));
    }
    out
}

fn distribution_name(d: Distribution) -> &'static str {
    match d {
        Distribution::Gaussian => "gaussian",
        Distribution::Exponential => "exponential",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::knn_weights;

    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn generators() {
        let r = ring_graph(6).unwrap();
        assert_eq!((r.vertex_count(), r.edge_count()), (6, 6));
        let g = grid_graph(3, 4).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (12, 17));
        assert!(ring_graph(2).is_err() && grid_graph(1, 1).is_err());

        let a = planar_triangulation(338, 42).unwrap();
        let b = planar_triangulation(338, 42).unwrap();
        assert_eq!(a.graph.edges(), b.graph.edges());
        assert!(a.graph.is_connected());
        let e = a.graph.edge_count();
        assert!((338..=3 * 338 - 6).contains(&e));
        assert_ne!(planar_triangulation(338, 43).unwrap().graph.edges(), a.graph.edges());
    }

    #[test]
    fn iid_moments() {
        let mut rng = stream(1, "t", 0, 0);
        let e = simulate_iid(Distribution::Exponential, 1_000_000, &mut rng);
        assert!((e.mean() - 1.0).abs() < 0.004);
        let g = simulate_iid(Distribution::Gaussian, 1_000_000, &mut rng);
        assert!((g.variance() - 1.0).abs() < 0.005);
        let again = simulate_iid(Distribution::Gaussian, 10, &mut stream(1, "u", 0, 0));
        assert_eq!(again, simulate_iid(Distribution::Gaussian, 10, &mut stream(1, "u", 0, 0)));
    }

    #[test]
    fn correlated_gaussian_covariance() {
        let w = knn_weights(&ring_graph(4).unwrap(), 1).unwrap();
        let s = CorrelatedSampler::new(&w, 0.15).unwrap();
        let mut rng = stream(2, "t", 0, 0);
        let reps = 100_000;
        let (mut s01, mut s00, mut s11, mut s02) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..reps {
            let x = s.sample_gaussian(&mut rng);
            s01 += x[0] * x[1];
            s00 += x[0] * x[0];
            s11 += x[1] * x[1];
            s02 += x[0] * x[2];
        }
        let r = s01 / (s00 * s11).sqrt();
        assert!((r - 0.15).abs() < 0.01, "{r}");
        assert!((s02 / reps as f64).abs() < 0.01);
        // c = 0 gives the identity factor
        let id = CorrelatedSampler::new(&w, 0.0).unwrap();
        let mut a = stream(3, "t", 0, 0);
        let mut b = stream(3, "t", 0, 0);
        let z: Vec<f64> = (0..4).map(|_| b.sample::<f64, _>(StandardNormal)).collect();
        assert_eq!(id.sample_gaussian(&mut a), z);
    }

    #[test]
    fn star_breaks_positive_definiteness() {
        // K1,4 has λmax = 2, so I + cA is singular at c = 1/2
        let mut g = Graph::new();
        for i in 0..5 {
            g.add_vertex(&i.to_string());
        }
        for i in 1..5 {
            g.add_edge(0, i);
        }
        let w = knn_weights(&g, 1).unwrap();
        assert!(CorrelatedSampler::new(&w, 0.49).is_ok());
        match CorrelatedSampler::new(&w, 0.6) {
            Err(Error::NotPositiveDefinite { index, pivot }) => {
                assert!(index > 0);
                assert!(pivot < 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exponential_copula() {
        let w = knn_weights(&ring_graph(50).unwrap(), 1).unwrap();
        let mut rng = stream(4, "t", 0, 0);
        let s = CorrelatedSampler::new(&w, 0.3).unwrap();
        let mut total = 0.0;
        let reps = 20_000;
        for _ in 0..reps {
            total += s.sample(Distribution::Exponential, &mut rng).values().iter().sum::<f64>();
        }
        let mean = total / (reps * 50) as f64;
        // marginal sd 1, but neighbours are positively dependent: allow for it
        assert!((mean - 1.0).abs() < 3.0 * (2.0 / (reps * 50) as f64).sqrt(), "{mean}");

        let mut prev = -1.0;
        for c in [0.0, 0.2, 0.4] {
            let s = CorrelatedSampler::new(&w, c).unwrap();
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for _ in 0..4000 {
                let y = s.sample(Distribution::Exponential, &mut rng);
                for i in 0..50 {
                    a.push(y.get(i));
                    b.push(y.get((i + 1) % 50));
                }
            }
            let rho = corr(&ranks(&a), &ranks(&b));
            assert!(rho > prev, "{c}: {rho} <= {prev}");
            prev = rho;
        }
        let iid = simulate_correlated_exponential(&w, 0.0, &mut rng).unwrap();
        assert!(iid.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn anderson_darling_examples() {
        let n = 338;
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let ad = anderson_darling_uniform(&grid).unwrap();
        assert!(ad.a2 < 0.1 && !ad.reject_1pct);
        let low: Vec<f64> = (0..n).map(|i| 0.01 * i as f64 / n as f64).collect();
        assert!(anderson_darling_uniform(&low).unwrap().reject_1pct);
        assert!(anderson_darling_uniform(&grid[..7]).is_err());
        assert!(anderson_darling_uniform(&[0.0, 1.0, 0.5, 0.2, 0.3, 0.4, 0.6, 0.7]).unwrap().a2.is_finite());
    }

    #[test]
    fn anderson_darling_critical_value_by_simulation() {
        let sims = 100_000;
        let mut a2: Vec<f64> = (0..sims as u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream(99, "ad-crit", k, 0);
                let u: Vec<f64> = (0..338).map(|_| rng.random::<f64>()).collect();
                anderson_darling_uniform(&u).unwrap().a2
            })
            .collect();
        a2.sort_by(f64::total_cmp);
        let q99 = a2[(0.99 * sims as f64) as usize];
        assert!((q99 - AD_CRITICAL_1PCT).abs() < 0.05, "{q99}");
    }

    #[test]
    fn ks_examples() {
        let n = 200;
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let ks = ks_uniform(&grid).unwrap();
        assert!((ks.d - 0.5 / n as f64).abs() < 1e-15);
        assert!(ks.p_value > 0.99);
        let low: Vec<f64> = grid.iter().map(|v| v * 0.5).collect();
        assert!(ks_uniform(&low).unwrap().reject_1pct);
        // continuity of the two series at the switch point
        let (a, b) = (kolmogorov_survival(1.18 - 1e-12), kolmogorov_survival(1.18));
        assert!((a - b).abs() < 1e-10);
        assert!((kolmogorov_survival(1.3580986393225507) - 0.05).abs() < 1e-6);
    }

    #[test]
    fn null_study_smoke_and_round_trip() {
        let mut cfg = NullStudyConfig::local(GraphSpec::Planar { n: 60 }, Distribution::Exponential, 1, 5);
        cfg.statistics = vec![Statistic::Moran, Statistic::Geary];
        cfg.methods = vec![Method::Beta, Method::Zscore, Method::Mc];
        cfg.perms = 99;
        let g = cfg.graph.generate(cfg.seed).unwrap();
        let w = knn_weights(&g, cfg.k).unwrap();
        let report = run_null_study(&cfg, &w).unwrap();
        assert_eq!(report.null_cells.len(), 6);
        let json = serde_json::to_string(&report).unwrap();
        let back: StudyReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert_eq!(run_null_study(&cfg, &w).unwrap(), report);
        let qq = qq_csv(&report);
        let rows = qq.lines().count() - 1;
        let expected: usize = report.null_cells.iter().map(|c| c.replicates[0].p_values.len()).sum();
        assert_eq!(rows, expected);
    }

    #[test]
    fn global_null_study() {
        let mut cfg = NullStudyConfig::local(GraphSpec::Ring { n: 30 }, Distribution::Gaussian, 12, 8);
        cfg.scope = Scope::Global;
        cfg.methods = vec![Method::Analytic, Method::EmpiricalBeta, Method::Mc];
        cfg.perms = 99;
        let w = knn_weights(&cfg.graph.generate(cfg.seed).unwrap(), 1).unwrap();
        let report = run_null_study(&cfg, &w).unwrap();
        for cell in &report.null_cells {
            assert_eq!(cell.replicates.len(), 12);
            assert!(cell.pooled_ad.is_some());
        }
        cfg.methods = vec![Method::Beta];
        assert!(run_null_study(&cfg, &w).is_err());
    }

    #[test]
    fn power_study_rejects_non_pd_grid() {
        let g = planar_triangulation(40, 1).unwrap().graph;
        let w = knn_weights(&g, 1).unwrap();
        let cfg = PowerStudyConfig::new(GraphSpec::Planar { n: 40 }, Distribution::Gaussian, vec![0.0, 2.0], 2, 1);
        match run_power_study(&cfg, &w) {
            Err(Error::InvalidParameter(msg)) => assert!(msg.starts_with("c = 2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn power_study_smoke() {
        let w = knn_weights(&ring_graph(30).unwrap(), 1).unwrap();
        let mut cfg = PowerStudyConfig::new(GraphSpec::Ring { n: 30 }, Distribution::Exponential, vec![0.0, 0.3], 20, 3);
        cfg.perms = 99;
        cfg.statistics = vec![Statistic::Geary];
        cfg.empirical_beta_r = Some(10);
        let report = run_power_study(&cfg, &w).unwrap();
        assert_eq!(report.power.len(), 6);
        assert_eq!(report.power[2].method, Method::EmpiricalBeta);
        let csv = power_csv(&report);
        assert_eq!(csv.lines().count(), 7);
        let json = serde_json::to_string(&report).unwrap();
        assert_eq!(serde_json::from_str::<StudyReport>(&json).unwrap(), report);
    }
}
