//! Proximity rows, local gamma indices, the named LISA/GISA statistics and
//! their moments under total randomization.
//!
//! Proximity matrices are never stored; each row `λ_i·` is recomputed from the
//! observations when needed, so a test over `n` vertices uses `O(n)` memory.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ExclusionReason, Result};
use crate::graph::{classify_vertex, ConnectivityClass, Graph, WeightMatrix};

/// Per-vertex measurements aligned with the graph's vertex order, with cached
/// summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationVector {
    values: Vec<f64>,
    mean: f64,
    variance: f64,
    kurtosis: f64,
}

impl ObservationVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("observation vector is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("observation {i} is not finite")));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sum2: f64 = values.iter().map(|v| v * v).sum();
        let sum4: f64 = values.iter().map(|v| v.powi(4)).sum();
        // raw (uncentred) fourth-moment ratio, as printed for the moment formulas
        let kurtosis = if sum2 > 0.0 { n * sum4 / (sum2 * sum2) } else { f64::NAN };
        Ok(Self {
            values,
            mean,
            variance,
            kurtosis,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Sample mean `ȳ`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `σ̂² = n⁻¹ Σ (y_i - ȳ)²`.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// `b = n Σ y⁴ / (Σ y²)²` on raw values; NaN when all values are zero.
    pub fn kurtosis(&self) -> f64 {
        self.kurtosis
    }

    pub fn sum(&self) -> f64 {
        self.mean * self.values.len() as f64
    }

    /// Mean and `n-1`-divisor variance of the values with index `i` removed.
    pub fn leave_one_out(&self, i: usize) -> (f64, f64) {
        let n1 = (self.values.len() - 1) as f64;
        let mean = self
            .values
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| v)
            .sum::<f64>()
            / n1;
        let var = self
            .values
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| (v - mean).powi(2))
            .sum::<f64>()
            / n1;
        (mean, var)
    }

    /// A copy with values rearranged so that position `j` holds `y[perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let values = perm.iter().map(|&p| self.values[p]).collect();
        Self::new(values).expect("permutation of finite values")
    }
}

/// Parses an `id,value` CSV and aligns it with `graph`'s vertex order.
pub fn load_observations(text: &str, graph: &Graph) -> Result<ObservationVector> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "value" {
        return Err(Error::Parse {
            line: 1,
            message: "expected header `id,value`".into(),
        });
    }

    let mut seen: HashMap<usize, usize> = HashMap::new();
    let mut values = vec![f64::NAN; graph.vertex_count()];
    for (k, record) in reader.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| Error::Parse {
            line: row,
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(row);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let id = &record[0];
        let idx = graph.index_of(id).ok_or_else(|| Error::Parse {
            line,
            message: format!("id `{id}` is not a vertex of the graph"),
        })?;
        let value: f64 = record[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("cannot parse value `{}`", &record[1]),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("value `{}` is not finite", &record[1]),
            });
        }
        if let Some(prev) = seen.insert(idx, line) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate id `{id}` (first seen on line {prev})"),
            });
        }
        values[idx] = value;
    }
    if let Some(missing) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::Parse {
            line: 0,
            message: format!("no observation for vertex `{}`", graph.id(missing)),
        });
    }
    ObservationVector::new(values)
}

/// Proximity function `λ(y_i, y_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProximityKind {
    /// `(y_i - ȳ)(y_j - ȳ)`
    MoranCross,
    /// `(y_i - y_j)²`
    GearySquare,
}

impl ProximityKind {
    #[inline]
    pub fn eval(self, y: &ObservationVector, i: usize, j: usize) -> f64 {
        self.eval_values(y.mean(), y.get(i), y.get(j))
    }

    #[inline]
    pub fn eval_values(self, mean: f64, yi: f64, yj: f64) -> f64 {
        match self {
            ProximityKind::MoranCross => (yi - mean) * (yj - mean),
            ProximityKind::GearySquare => (yi - yj) * (yi - yj),
        }
    }
}

/// The four named local/global statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Moran,
    Geary,
    #[serde(rename = "getis")]
    GetisG,
    #[serde(rename = "getis-star")]
    GetisGStar,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [Statistic::Moran, Statistic::Geary, Statistic::GetisG, Statistic::GetisGStar];

    /// Moran and both Getis-Ord statistics share the cross-product gamma test.
    pub fn proximity(self) -> ProximityKind {
        match self {
            Statistic::Geary => ProximityKind::GearySquare,
            _ => ProximityKind::MoranCross,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Moran => "moran",
            Statistic::Geary => "geary",
            Statistic::GetisG => "getis",
            Statistic::GetisGStar => "getis-star",
        }
    }
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moran" => Ok(Statistic::Moran),
            "geary" => Ok(Statistic::Geary),
            "getis" => Ok(Statistic::GetisG),
            "getis-star" => Ok(Statistic::GetisGStar),
            _ => Err(Error::InvalidParameter(format!("unknown statistic `{s}`"))),
        }
    }
}

/// `λ_ij` for all `j`, including the unused diagonal entry.
pub fn proximity_row(y: &ObservationVector, kind: ProximityKind, i: usize) -> Vec<f64> {
    (0..y.len()).map(|j| kind.eval(y, i, j)).collect()
}

/// Row-level quantities entering the local bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalRowSummary {
    pub vertex: usize,
    /// `m_i`
    pub degree: usize,
    /// `λ̄₋ᵢ = (n-1)⁻¹ Σ_{j≠i} λ_ij`
    pub lambda_mean: f64,
    /// `s_i² = (n-1)⁻¹ Σ_{j≠i} (λ_ij - λ̄₋ᵢ)²`
    pub lambda_var: f64,
    /// `γ_i = Σ_j w_ij λ_ij`
    pub gamma: f64,
}

impl LocalRowSummary {
    /// Mean of `γ_i(π)` over restricted permutations, `m_i λ̄₋ᵢ`.
    pub fn centering(&self) -> f64 {
        self.degree as f64 * self.lambda_mean
    }

    /// `γ_i - m_i λ̄₋ᵢ`
    pub fn deviation(&self) -> f64 {
        self.gamma - self.centering()
    }
}

/// Row summary without the connectivity check; degenerate rows are allowed.
pub fn row_summary(w: &WeightMatrix, y: &ObservationVector, kind: ProximityKind, i: usize) -> LocalRowSummary {
    let n = y.len();
    let mean = y.mean();
    let yi = y.get(i);
    let vals = y.values();
    let mut sum = 0.0;
    for (j, &yj) in vals.iter().enumerate() {
        if j != i {
            sum += kind.eval_values(mean, yi, yj);
        }
    }
    let lambda_mean = sum / (n - 1) as f64;
    let mut ss = 0.0;
    for (j, &yj) in vals.iter().enumerate() {
        if j != i {
            ss += (kind.eval_values(mean, yi, yj) - lambda_mean).powi(2);
        }
    }
    let gamma = w.neighbors(i).iter().map(|&j| kind.eval_values(mean, yi, vals[j])).sum();
    LocalRowSummary {
        vertex: i,
        degree: w.degree(i),
        lambda_mean,
        lambda_var: ss / (n - 1) as f64,
        gamma,
    }
}

/// Reason a vertex cannot be tested from its connectivity alone.
pub fn structural_exclusion(w: &WeightMatrix, i: usize) -> Option<ExclusionReason> {
    if classify_vertex(w, i) != ConnectivityClass::Degenerate {
        None
    } else if w.degree(i) == 0 {
        Some(ExclusionReason::Isolated)
    } else {
        Some(ExclusionReason::FullyConnected)
    }
}

/// Local gamma index and row summary at vertex `i`.
///
/// Defined for every vertex; the bound-based tests reject degenerate rows
/// separately (see [`structural_exclusion`]).
pub fn local_gamma(w: &WeightMatrix, y: &ObservationVector, kind: ProximityKind, i: usize) -> Result<LocalRowSummary> {
    check_dims(w, y)?;
    if i >= y.len() {
        return Err(Error::InvalidParameter(format!("vertex {i} out of range")));
    }
    Ok(row_summary(w, y, kind, i))
}

fn check_dims(w: &WeightMatrix, y: &ObservationVector) -> Result<()> {
    if w.n() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "weight matrix has {} rows but there are {} observations",
            w.n(),
            y.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 vertices".into()));
    }
    Ok(())
}

/// Value of a named local statistic at vertex `i`.
///
/// * Moran: `I_i = γ_i(MoranCross) / σ̂²`
/// * Geary: `C_i = γ_i(GearySquare) / σ̂²`
/// * Getis G: `Σ_{j≠i} w_ij y_j / Σ_{j≠i} y_j`
/// * Getis G*: `Σ_j w_ij y_j / Σ_j y_j`
pub fn local_statistic(w: &WeightMatrix, y: &ObservationVector, stat: Statistic, i: usize) -> Result<f64> {
    check_dims(w, y)?;
    let nbr_sum: f64 = w.neighbors(i).iter().map(|&j| y.get(j)).sum();
    match stat {
        Statistic::Moran | Statistic::Geary => {
            if y.variance() <= 0.0 {
                return Err(Error::DegenerateData(ExclusionReason::ZeroVariance));
            }
            Ok(row_summary(w, y, stat.proximity(), i).gamma / y.variance())
        }
        Statistic::GetisG => {
            let denom = y.sum() - y.get(i);
            if denom == 0.0 {
                return Err(Error::DegenerateData(ExclusionReason::ZeroSum));
            }
            Ok(nbr_sum / denom)
        }
        Statistic::GetisGStar => {
            let denom = y.sum();
            if denom == 0.0 {
                return Err(Error::DegenerateData(ExclusionReason::ZeroSum));
            }
            Ok(nbr_sum / denom)
        }
    }
}

/// Mean and variance of a local statistic under the randomization null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub statistic: Statistic,
    pub mean: f64,
    pub variance: f64,
    /// Leave-one-out mean `ȳ₋ᵢ` (Getis G only).
    pub mean_excl: Option<f64>,
    /// Leave-one-out variance `σ̂²₋ᵢ` (Getis G only).
    pub var_excl: Option<f64>,
}

impl MomentSummary {
    /// False when the formula produced a non-positive variance; the z-score
    /// path is then unavailable.
    pub fn has_positive_variance(&self) -> bool {
        self.variance > 0.0 && self.variance.is_finite()
    }

    pub fn z_score(&self, value: f64) -> Option<f64> {
        self.has_positive_variance()
            .then(|| (value - self.mean) / self.variance.sqrt())
    }
}

/// Moments of a local statistic with binary weights, so that
/// `w_(1) = w_(2) = m_i`:
///
/// * `E I_i = -m/(n-1)`, `Var I_i = m(n-b)/(n-1) + (m²-m)(2b-n)/((n-1)(n-2)) - m²/(n-1)²`
/// * `E C_i = 2nm/(n-1)`, `Var C_i = n/(n-1) (m²-m)(3+b) - (2nm/(n-1))²`
/// * `E G_i = m/(n-1)`, `Var G_i = m(n-1-m) σ̂²₋ᵢ / ((n-1)²(n-2) ȳ₋ᵢ²)`
/// * `E G*_i = m/n`, `Var G*_i = m(n-m) σ̂² / (n²(n-1) ȳ²)`
pub fn lisa_moments(w: &WeightMatrix, y: &ObservationVector, stat: Statistic, i: usize) -> Result<MomentSummary> {
    check_dims(w, y)?;
    let n = y.len();
    if n < 3 {
        return Err(Error::InvalidParameter("moments need at least 3 vertices".into()));
    }
    let nf = n as f64;
    let m = w.degree(i) as f64;
    let b = y.kurtosis();
    let mut out = MomentSummary {
        statistic: stat,
        mean: 0.0,
        variance: 0.0,
        mean_excl: None,
        var_excl: None,
    };
    match stat {
        Statistic::Moran => {
            if y.variance() <= 0.0 {
                return Err(Error::DegenerateData(ExclusionReason::ZeroVariance));
            }
            out.mean = -m / (nf - 1.0);
            out.variance = m * (nf - b) / (nf - 1.0) + (m * m - m) * (2.0 * b - nf) / ((nf - 1.0) * (nf - 2.0))
                - m * m / ((nf - 1.0) * (nf - 1.0));
        }
        Statistic::Geary => {
            if y.variance() <= 0.0 {
                return Err(Error::DegenerateData(ExclusionReason::ZeroVariance));
            }
            out.mean = 2.0 * nf * m / (nf - 1.0);
            out.variance = nf / (nf - 1.0) * (m * m - m) * (3.0 + b) - out.mean * out.mean;
        }
        Statistic::GetisG => {
            let (mean_excl, var_excl) = y.leave_one_out(i);
            if mean_excl == 0.0 {
                return Err(Error::DegenerateData(ExclusionReason::ZeroSum));
            }
            out.mean = m / (nf - 1.0);
            out.variance =
                m * (nf - 1.0 - m) * var_excl / ((nf - 1.0).powi(2) * (nf - 2.0) * mean_excl * mean_excl);
            out.mean_excl = Some(mean_excl);
            out.var_excl = Some(var_excl);
        }
        Statistic::GetisGStar => {
            if y.mean() == 0.0 {
                return Err(Error::DegenerateData(ExclusionReason::ZeroSum));
            }
            out.mean = m / nf;
            out.variance = m * (nf - m) * y.variance() / (nf * nf * (nf - 1.0) * y.mean() * y.mean());
        }
    }
    Ok(out)
}

/// A global statistic together with the vertices whose rows are degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalStatistic {
    pub statistic: Statistic,
    pub value: f64,
    /// Isolated or fully connected vertices. They still contribute their
    /// (fixed) local value to the sum.
    pub degenerate: Vec<(usize, ExclusionReason)>,
}

/// Sum of the local statistic over all vertices.
pub fn global_statistic(w: &WeightMatrix, y: &ObservationVector, stat: Statistic) -> Result<GlobalStatistic> {
    check_dims(w, y)?;
    let mut value = 0.0;
    let mut degenerate = Vec::new();
    for i in 0..y.len() {
        if let Some(reason) = structural_exclusion(w, i) {
            degenerate.push((i, reason));
        }
        value += local_statistic(w, y, stat, i)?;
    }
    Ok(GlobalStatistic {
        statistic: stat,
        value,
        degenerate,
    })
}

/// `γ = Σ_i γ_i` over every vertex.
pub fn global_gamma(w: &WeightMatrix, y: &ObservationVector, kind: ProximityKind) -> f64 {
    (0..y.len()).map(|i| row_summary(w, y, kind, i).gamma).sum()
}
