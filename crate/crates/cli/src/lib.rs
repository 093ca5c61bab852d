//! The `lisa` command-line tool.
//!
//! Subcommands:
//!
//! * `lisa` runs per-vertex tests on an edge list and an observation file.
//! * `gisa` runs the global test on the same inputs.
//! * `simulate-null` runs a null-uniformity study on a synthetic or supplied graph.
//! * `power-study` runs a power comparison against correlated data.
//!
//! Exit codes: 0 on success, 2 for input errors, 3 for infeasible requests and
//! 4 when numeric degeneracy left no requested method with a result.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use lisa_bounds::assoc::{load_observations, ObservationVector};
use lisa_bounds::graph::{knn_weights, load_edge_list, Graph};
use lisa_bounds::inference::{
    global_test, local_tests, EmpiricalBetaConfig, LocalOptions, Tail, ThresholdMode, DEFAULT_EMPIRICAL_BETA_R,
};
use lisa_bounds::perm::{
    exhaustive_local_pvalue, mc_global_pvalue, mc_local_pvalue, PermutationMode, PermutationPlan,
};
use lisa_bounds::sim::{
    power_csv, qq_csv, run_null_study, run_power_study, Distribution, GraphInfo, GraphSpec, Method,
    NullStudyConfig, PowerStudyConfig, Scope,
};
use lisa_bounds::{Error, ExclusionReason, Statistic, WeightMatrix};

pub mod report;

use report::{
    ExcludedVertex, GisaReport, GisaResult, InputDigest, LisaReport, RunManifest, StudyOutput, VertexReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "lisa", version, about = "Spatial autocorrelation tests with analytic permutation p-values")]
pub struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Local tests at every vertex.
    Lisa(LisaArgs),
    /// Global test.
    Gisa(GisaArgs),
    /// Null-uniformity study on iid data.
    SimulateNull(NullArgs),
    /// Power of analytic and Monte Carlo global tests.
    PowerStudy(PowerArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LisaMethod {
    Beta,
    Subgauss,
    Zscore,
    Mc,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GisaMethod {
    Analytic,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PermMode {
    /// One unrestricted permutation of all values per replicate.
    Single,
    /// Independent restricted permutations for every vertex.
    Product,
}

impl PermMode {
    fn mode(self) -> PermutationMode {
        match self {
            PermMode::Single => PermutationMode::SingleGlobal,
            PermMode::Product => PermutationMode::ProductGroupGlobal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Planar,
    Ring,
    Grid,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeArg {
    Local,
    Global,
}

/// Inputs shared by `lisa` and `gisa`.
#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Edge list CSV with header `src,dst`.
    #[arg(long)]
    #[serde(skip)]
    pub edges: PathBuf,
    /// Observations CSV with header `id,value`.
    #[arg(long)]
    #[serde(skip)]
    pub obs: PathBuf,
    /// moran, geary, getis or getis-star.
    #[arg(long, default_value = "moran")]
    pub stat: Statistic,
    /// Neighbourhood order of the binary weights.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value = "two-sided")]
    pub tail: Tail,
    /// Use |γ| rather than its deviation from the permutation mean as threshold.
    #[arg(long)]
    pub literal_threshold: bool,
    /// Root seed for all random draws; required by `mc` and `--empirical-beta`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Write the dense weight matrix as CSV.
    #[arg(long)]
    #[serde(skip)]
    pub dump_weights: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct LisaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_values_t = vec![LisaMethod::Beta])]
    pub method: Vec<LisaMethod>,
    /// Monte Carlo permutations per vertex.
    #[arg(long, default_value_t = 10_000)]
    pub perms: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct GisaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_values_t = vec![GisaMethod::Analytic])]
    pub method: Vec<GisaMethod>,
    #[arg(long, default_value_t = 500)]
    pub perms: usize,
    #[arg(long, value_enum, default_value_t = PermMode::Single)]
    pub perm_mode: PermMode,
    /// Apply the empirical beta transform with R replicates (default 10).
    #[arg(long, value_name = "R", num_args = 0..=1, default_missing_value = "10")]
    pub empirical_beta: Option<usize>,
}

/// Graph selection shared by the study subcommands.
#[derive(Debug, Args, Serialize)]
pub struct GraphArgs {
    #[arg(long, value_enum, default_value_t = GraphKind::Planar)]
    pub graph: GraphKind,
    /// Vertex count for planar and ring graphs.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// Edge list for `--graph file`.
    #[arg(long)]
    #[serde(skip)]
    pub edges: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct NullArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value = "gaussian")]
    pub dist: Distribution,
    #[arg(long, default_values = ["moran"])]
    pub stat: Vec<Statistic>,
    #[arg(long, default_values = ["beta"])]
    pub method: Vec<Method>,
    #[arg(long, value_enum, default_value_t = ScopeArg::Local)]
    pub scope: ScopeArg,
    #[arg(long, default_value_t = 30)]
    pub reps: usize,
    #[arg(long, default_value_t = 999)]
    pub perms: usize,
    #[arg(long, default_value_t = DEFAULT_EMPIRICAL_BETA_R)]
    pub empirical_beta: usize,
    #[arg(long, value_enum, default_value_t = PermMode::Single)]
    pub perm_mode: PermMode,
    #[arg(long, default_value = "two-sided")]
    pub tail: Tail,
    #[arg(long)]
    pub literal_threshold: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Write QQ plot data as CSV.
    #[arg(long)]
    #[serde(skip)]
    pub qq_csv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PowerArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value = "gaussian")]
    pub dist: Distribution,
    #[arg(long, value_delimiter = ',', default_value = "0,0.03,0.06,0.09,0.12,0.15")]
    pub c_grid: Vec<f64>,
    #[arg(long, default_value_t = 400)]
    pub reps: usize,
    #[arg(long, default_value_t = 500)]
    pub perms: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_values = ["moran"])]
    pub stat: Vec<Statistic>,
    #[arg(long, value_name = "R", num_args = 0..=1, default_missing_value = "10")]
    pub empirical_beta: Option<usize>,
    #[arg(long, value_enum, default_value_t = PermMode::Single)]
    pub perm_mode: PermMode,
    #[arg(long)]
    pub literal_threshold: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Write the power curves as CSV.
    #[arg(long)]
    #[serde(skip)]
    pub power_csv: Option<PathBuf>,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_) => EXIT_INFEASIBLE,
            Error::DegenerateData(_) | Error::DegenerateFit(_) | Error::Excluded { .. } => EXIT_DEGENERATE,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> CliResult<i32> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::input("--threads must be at least 1"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::input(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Lisa(a) => cmd_lisa(a),
        Command::Gisa(a) => cmd_gisa(a),
        Command::SimulateNull(a) => cmd_simulate_null(a),
        Command::PowerStudy(a) => cmd_power_study(a),
    })
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    match out {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_context(path: &Path, e: Error) -> CliError {
    let mut err = CliError::from(e);
    err.message = format!("{}: {}", path.display(), err.message);
    err
}

fn manifest<A: Serialize>(
    subcommand: &'static str,
    args: &A,
    inputs: Vec<InputDigest>,
    seed: Option<u64>,
) -> RunManifest {
    RunManifest {
        tool: "lisa",
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        flags: serde_json::to_value(args).expect("flags serialize"),
        inputs,
        seed,
    }
}

struct LoadedData {
    graph: Graph,
    w: WeightMatrix,
    y: ObservationVector,
    inputs: Vec<InputDigest>,
}

fn load_data(a: &DataArgs) -> CliResult<LoadedData> {
    let edges = read(&a.edges)?;
    let obs = read(&a.obs)?;
    let graph = load_edge_list(&edges).map_err(|e| with_context(&a.edges, e))?;
    let y = load_observations(&obs, &graph).map_err(|e| with_context(&a.obs, e))?;
    let w = knn_weights(&graph, a.k)?;
    if let Some(p) = &a.dump_weights {
        write(p, &w.to_dense_csv(graph.ids()))?;
    }
    Ok(LoadedData {
        inputs: vec![
            InputDigest::new("edges", edges.as_bytes()),
            InputDigest::new("observations", obs.as_bytes()),
        ],
        graph,
        w,
        y,
    })
}

fn threshold_mode(literal: bool) -> ThresholdMode {
    if literal {
        ThresholdMode::Literal
    } else {
        ThresholdMode::Centered
    }
}

fn graph_info(g: &Graph) -> GraphInfo {
    GraphInfo {
        vertices: g.vertex_count(),
        edges: g.edge_count(),
    }
}

fn cmd_lisa(a: &LisaArgs) -> CliResult<i32> {
    let wants = |m| a.method.contains(&m);
    if wants(LisaMethod::Mc) && a.data.seed.is_none() {
        return Err(CliError::input("--method mc needs --seed"));
    }
    if a.perms == 0 {
        return Err(CliError::input("--perms must be at least 1"));
    }
    let d = load_data(&a.data)?;
    let n = d.y.len();
    if wants(LisaMethod::Exhaustive) && n > lisa_bounds::perm::MAX_EXHAUSTIVE_N {
        return Err(Error::Infeasible(format!(
            "exhaustive enumeration needs n <= {}, got n = {n}",
            lisa_bounds::perm::MAX_EXHAUSTIVE_N
        ))
        .into());
    }
    let stat = a.data.stat;
    let opts = LocalOptions {
        threshold: threshold_mode(a.data.literal_threshold),
        tail: a.data.tail,
        zscore: wants(LisaMethod::Zscore),
    };
    let results = local_tests(&d.w, &d.y, stat, opts)?;
    let seed = a.data.seed.unwrap_or(0);

    let mut excluded = Vec::new();
    let mut testable = Vec::new();
    for r in results {
        match r.excluded {
            Some(reason) => excluded.push(ExcludedVertex {
                id: d.graph.id(r.vertex).to_string(),
                index: r.vertex,
                reason,
            }),
            None => testable.push(r),
        }
    }
    let vertices: Vec<VertexReport> = testable
        .par_iter()
        .map(|r| -> CliResult<VertexReport> {
            let i = r.vertex;
            let p_mc = if wants(LisaMethod::Mc) {
                let plan = PermutationPlan::new(PermutationMode::RestrictedLocal { vertex: i }, a.perms, seed, a.data.tail)?;
                Some(mc_local_pvalue(&d.w, &d.y, stat, &plan)?.p)
            } else {
                None
            };
            let p_exhaustive = if wants(LisaMethod::Exhaustive) {
                Some(exhaustive_local_pvalue(&d.w, &d.y, stat, i, a.data.tail)?.p)
            } else {
                None
            };
            let pick = |m, v: Option<lisa_bounds::inference::PValue>| if wants(m) { v } else { None };
            let beta = pick(LisaMethod::Beta, r.p_beta);
            let sg = pick(LisaMethod::Subgauss, r.p_subgauss);
            Ok(VertexReport {
                id: d.graph.id(i).to_string(),
                index: i,
                degree: d.w.degree(i),
                connectivity: r.connectivity,
                value: r.value,
                gamma: r.gamma,
                centering: r.centering,
                threshold: r.threshold,
                p_beta: beta.map(|v| v.p),
                ln_p_beta: beta.map(|v| v.ln_p),
                p_subgauss: sg.map(|v| v.p),
                ln_p_subgauss: sg.map(|v| v.ln_p),
                p_zscore: r.p_zscore.map(|v| v.p),
                p_mc,
                p_exhaustive,
                flags: r.flags.clone(),
            })
        })
        .collect::<CliResult<_>>()?;

    let data_degenerate = vertices.is_empty()
        && excluded
            .iter()
            .any(|e| matches!(e.reason, ExclusionReason::ZeroVariance | ExclusionReason::ZeroSum));
    let report = LisaReport {
        manifest: manifest("lisa", a, d.inputs, a.data.seed),
        graph: graph_info(&d.graph),
        statistic: stat,
        k: a.data.k,
        tail: a.data.tail,
        threshold_mode: opts.threshold,
        vertices,
        excluded,
    };
    emit(a.data.out.as_deref(), &report)?;
    if data_degenerate {
        eprintln!("error: the observations leave no testable vertex");
        return Ok(EXIT_DEGENERATE);
    }
    Ok(EXIT_OK)
}

fn cmd_gisa(a: &GisaArgs) -> CliResult<i32> {
    let wants_mc = a.method.contains(&GisaMethod::Mc);
    if (wants_mc || a.empirical_beta.is_some()) && a.data.seed.is_none() {
        return Err(CliError::input("--method mc and --empirical-beta need --seed"));
    }
    if a.perms == 0 {
        return Err(CliError::input("--perms must be at least 1"));
    }
    let d = load_data(&a.data)?;
    let seed = a.data.seed.unwrap_or(0);
    let mode = threshold_mode(a.data.literal_threshold);
    let emp = a.empirical_beta.map(|r| EmpiricalBetaConfig { r, seed });
    let g = global_test(&d.w, &d.y, a.data.stat, mode, emp)?;
    let p_mc = if wants_mc {
        let plan = PermutationPlan::new(a.perm_mode.mode(), a.perms, seed, a.data.tail)?;
        Some(mc_global_pvalue(&d.w, &d.y, a.data.stat.proximity(), &plan)?.p)
    } else {
        None
    };
    let report = GisaReport {
        manifest: manifest("gisa", a, d.inputs, a.data.seed),
        graph: graph_info(&d.graph),
        statistic: a.data.stat,
        k: a.data.k,
        threshold_mode: mode,
        result: GisaResult {
            gamma: g.gamma,
            centering: g.centering,
            threshold: g.threshold,
            upsilon2: g.upsilon2,
            varpi2: g.varpi2,
            eta: g.eta,
            p_analytic: g.p_analytic.p,
            ln_p_analytic: g.p_analytic.ln_p,
            p_emp_beta: g.p_emp_beta,
            emp_beta_params: g.emp_beta_params,
            r: g.r,
            p_mc,
            flags: g.flags,
        },
    };
    emit(a.data.out.as_deref(), &report)?;
    Ok(EXIT_OK)
}

/// Builds the study graph and its spec; file graphs also yield an input digest.
fn study_graph(a: &GraphArgs, seed: u64, default_n: usize) -> CliResult<(GraphSpec, Graph, Vec<InputDigest>)> {
    let n = a.n.unwrap_or(default_n);
    let (spec, inputs) = match a.graph {
        GraphKind::Planar => (GraphSpec::Planar { n }, vec![]),
        GraphKind::Ring => (GraphSpec::Ring { n }, vec![]),
        GraphKind::Grid => {
            let (Some(rows), Some(cols)) = (a.rows, a.cols) else {
                return Err(CliError::input("--graph grid needs --rows and --cols"));
            };
            (GraphSpec::Grid { rows, cols }, vec![])
        }
        GraphKind::File => {
            let Some(path) = &a.edges else {
                return Err(CliError::input("--graph file needs --edges"));
            };
            let text = read(path)?;
            let graph = load_edge_list(&text).map_err(|e| with_context(path, e))?;
            let digest = InputDigest::new("edges", text.as_bytes());
            let spec = GraphSpec::File {
                source: format!("sha256:{}", digest.sha256),
            };
            return Ok((spec, graph, vec![digest]));
        }
    };
    let graph = spec.generate(seed)?;
    Ok((spec, graph, inputs))
}

fn cmd_simulate_null(a: &NullArgs) -> CliResult<i32> {
    let (spec, graph, inputs) = study_graph(&a.graph, a.seed, 338)?;
    let w = knn_weights(&graph, a.graph.k)?;
    let cfg = NullStudyConfig {
        graph: spec,
        k: a.graph.k,
        distribution: a.dist,
        reps: a.reps,
        statistics: a.stat.clone(),
        methods: a.method.clone(),
        scope: match a.scope {
            ScopeArg::Local => Scope::Local,
            ScopeArg::Global => Scope::Global,
        },
        perms: a.perms,
        empirical_beta_r: a.empirical_beta,
        permutation_mode: a.perm_mode.mode(),
        threshold: threshold_mode(a.literal_threshold),
        tail: a.tail,
        seed: a.seed,
    };
    let study = run_null_study(&cfg, &w)?;
    if let Some(p) = &a.qq_csv {
        write(p, &qq_csv(&study))?;
    }
    emit(
        a.out.as_deref(),
        &StudyOutput {
            manifest: manifest("simulate-null", a, inputs, Some(a.seed)),
            study,
        },
    )?;
    Ok(EXIT_OK)
}

fn cmd_power_study(a: &PowerArgs) -> CliResult<i32> {
    let (spec, graph, inputs) = study_graph(&a.graph, a.seed, 100)?;
    let w = knn_weights(&graph, a.graph.k)?;
    let cfg = PowerStudyConfig {
        graph: spec,
        k: a.graph.k,
        distribution: a.dist,
        c_grid: a.c_grid.clone(),
        reps: a.reps,
        perms: a.perms,
        alpha: a.alpha,
        statistics: a.stat.clone(),
        permutation_mode: a.perm_mode.mode(),
        empirical_beta_r: a.empirical_beta,
        threshold: threshold_mode(a.literal_threshold),
        seed: a.seed,
    };
    let study = run_power_study(&cfg, &w)?;
    if let Some(p) = &a.power_csv {
        write(p, &power_csv(&study))?;
    }
    emit(
        a.out.as_deref(),
        &StudyOutput {
            manifest: manifest("power-study", a, inputs, Some(a.seed)),
            study,
        },
    )?;
    Ok(EXIT_OK)
}
