//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns a JSON string. The `*_json` functions hold the logic
//! and are plain Rust so they can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use lisa_bounds::assoc::{LocalRowSummary, Statistic};
use lisa_bounds::graph::{classify_vertex, knn_weights, ConnectivityClass, WeightMatrix};
use lisa_bounds::inference::{
    global_test, local_pvalue_beta, local_pvalue_subgauss, local_tests, LocalOptions, ThresholdMode,
};
use lisa_bounds::rng::stream;
use lisa_bounds::sim::{
    planar_triangulation, run_null_study, simulate_correlated_gaussian, Distribution, GraphSpec, Method,
    NullStudyConfig,
};

type DemoResult<T> = std::result::Result<T, String>;

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("demo payloads serialize")
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct BoundCurves {
    n: usize,
    m: usize,
    connectivity: ConnectivityClass,
    t: Vec<f64>,
    subgauss: Vec<f64>,
    beta: Vec<f64>,
}

/// Both local bounds as functions of the threshold `t`, for unit proximity
/// variance, `n` vertices and `m` neighbours.
pub fn bound_curves_json(n: usize, m: usize, points: usize) -> DemoResult<String> {
    if n < 3 || m == 0 || m + 1 >= n {
        return Err(format!("need 3 <= n and 1 <= m <= n - 2, got n = {n}, m = {m}"));
    }
    let row = |t: f64| LocalRowSummary {
        vertex: 0,
        degree: m,
        lambda_mean: 0.0,
        lambda_var: 1.0,
        gamma: t,
    };
    let sg = |t: f64| local_pvalue_subgauss(&row(t), n, ThresholdMode::Centered).map(|b| b.value.p);
    // Extend the range until the sub-Gaussian bound falls below 1e-6.
    let mut t_max = 1.0;
    while sg(t_max).map_err(err)? > 1e-6 {
        t_max *= 1.5;
    }
    let points = points.clamp(2, 2000);
    let t: Vec<f64> = (0..points).map(|k| t_max * k as f64 / (points - 1) as f64).collect();
    let subgauss = t.iter().map(|&x| sg(x)).collect::<Result<Vec<_>, _>>().map_err(err)?;
    let beta = t
        .iter()
        .map(|&x| local_pvalue_beta(&row(x), n, ThresholdMode::Centered).map(|b| b.value.p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let connectivity = if 2 * m > n {
        ConnectivityClass::HighConnected
    } else {
        ConnectivityClass::LowConnected
    };
    Ok(to_json(&BoundCurves {
        n,
        m,
        connectivity,
        t,
        subgauss,
        beta,
    }))
}

#[derive(Serialize)]
struct MapVertex {
    x: f64,
    y: f64,
    value: f64,
    degree: usize,
    p_beta: Option<f64>,
    p_subgauss: Option<f64>,
    excluded: bool,
}

#[derive(Serialize)]
struct MapReport {
    edges: Vec<(usize, usize)>,
    vertices: Vec<MapVertex>,
    global_p: f64,
    global_gamma: f64,
}

/// Random planar map with spatially correlated data of strength `c`, and the
/// local and global test results on it.
pub fn planar_lisa_json(n: usize, seed: u64, c: f64, stat: &str, k: usize) -> DemoResult<String> {
    let stat: Statistic = stat.parse().map_err(err)?;
    let map = planar_triangulation(n, seed).map_err(err)?;
    let w: WeightMatrix = knn_weights(&map.graph, k).map_err(err)?;
    let y = simulate_correlated_gaussian(&w, c, &mut stream(seed, "demo-data", 0, 0)).map_err(err)?;
    let results = local_tests(&w, &y, stat, LocalOptions::default()).map_err(err)?;
    let global = global_test(&w, &y, stat, ThresholdMode::Centered, None).map_err(err)?;
    let vertices = results
        .iter()
        .map(|r| {
            let [px, py] = map.points[r.vertex];
            MapVertex {
                x: px,
                y: py,
                value: y.get(r.vertex),
                degree: w.degree(r.vertex),
                p_beta: r.p_beta.map(|p| p.p),
                p_subgauss: r.p_subgauss.map(|p| p.p),
                excluded: r.excluded.is_some() || classify_vertex(&w, r.vertex) == ConnectivityClass::Degenerate,
            }
        })
        .collect();
    Ok(to_json(&MapReport {
        edges: map.graph.edges().to_vec(),
        vertices,
        global_p: global.p_analytic.p,
        global_gamma: global.gamma,
    }))
}

#[derive(Serialize)]
struct QqSeries {
    method: Method,
    ad_rejections: usize,
    expected: Vec<f64>,
    observed: Vec<f64>,
}

#[derive(Serialize)]
struct QqReport {
    reps: usize,
    series: Vec<QqSeries>,
}

/// Pooled null p-values of the beta and z-score methods, thinned to at most
/// `max_points` quantiles per method.
pub fn null_qq_json(n: usize, reps: usize, seed: u64, stat: &str, dist: &str, max_points: usize) -> DemoResult<String> {
    let stat: Statistic = stat.parse().map_err(err)?;
    let dist: Distribution = dist.parse().map_err(err)?;
    let spec = GraphSpec::Planar { n };
    let w = knn_weights(&spec.generate(seed).map_err(err)?, 1).map_err(err)?;
    let mut cfg = NullStudyConfig::local(spec, dist, reps, seed);
    cfg.statistics = vec![stat];
    cfg.methods = vec![Method::Beta, Method::Zscore];
    let report = run_null_study(&cfg, &w).map_err(err)?;
    let max_points = max_points.max(2);
    let series = report
        .null_cells
        .iter()
        .map(|cell| {
            let mut p: Vec<f64> = cell.replicates.iter().flat_map(|r| r.p_values.iter().copied()).collect();
            p.sort_by(f64::total_cmp);
            let len = p.len();
            let step = len.div_ceil(max_points).max(1);
            let (expected, observed) = (0..len)
                .step_by(step)
                .map(|i| ((i as f64 + 0.5) / len as f64, p[i]))
                .unzip();
            QqSeries {
                method: cell.method,
                ad_rejections: cell.ad_rejections,
                expected,
                observed,
            }
        })
        .collect();
    Ok(to_json(&QqReport { reps, series }))
}

#[wasm_bindgen]
pub fn bound_curves(n: usize, m: usize) -> Result<String, JsValue> {
    bound_curves_json(n, m, 200).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn planar_lisa(n: usize, seed: u32, c: f64, stat: &str, k: usize) -> Result<String, JsValue> {
    planar_lisa_json(n, seed as u64, c, stat, k).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn null_qq(n: usize, reps: usize, seed: u32, stat: &str, dist: &str) -> Result<String, JsValue> {
    null_qq_json(n, reps, seed as u64, stat, dist, 400).map_err(|e| JsValue::from_str(&e))
}
