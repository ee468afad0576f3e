//! Command-line front end. [`run`] takes the argument list and output
//! streams explicitly so it can be driven from tests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::cut::{brute_force_maxcut, evaluate_cut, spectral_partition, CutMethod, RANDOM_CUT_FRACTION};
use crate::error::Error;
use crate::generators::{
    densify_sweep, epsilon_sweep, gen_community, gen_erdos_renyi, gen_grid, gen_ring, gen_sbm, gen_sensor,
    log_epsilon_grid,
};
use crate::gnn::{demo_model_config, train_demo_with, DemoTask, PooledGraph, TrainConfig};
use crate::graph::Graph;
use crate::io::{parse_levels, GraphFile, PyramidFile};
use crate::kron::DEFAULT_EPSILON;
use crate::pyramid::{build_pyramid_with, pooling_partition, PyramidOptions};
use crate::rng::derive_seed;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Library(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Library(Error::Parse(_)) => EXIT_USAGE,
            CliError::Library(_) => EXIT_PRECONDITION,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ndp", version, about = "Graph coarsening by node decimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a graph from one of the built-in families.
    Gen(GenArgs),
    /// Build a coarsening pyramid.
    Coarsen(CoarsenArgs),
    /// Spectral cut with bounds.
    Cut(CutArgs),
    /// Exact maximum cut by enumeration (at most 22 nodes).
    Oracle(OracleArgs),
    /// Densification or sparsification sweep, written as CSV.
    Sweep(SweepArgs),
    /// Train the demo classifier and print a JSON-lines report.
    TrainDemo(TrainArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Grid,
    Ring,
    Sbm,
    Sensor,
    Erdos,
    Community,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long = "type", value_enum)]
    family: Family,
    /// Node count (grid: side length when rows/cols are omitted).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    /// Edge probability for Erdős–Rényi graphs.
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    #[arg(long, default_value_t = 0.5)]
    p_in: f64,
    #[arg(long, default_value_t = 0.05)]
    p_out: f64,
    /// Comma-separated block sizes for the block model.
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long, default_value_t = 4)]
    communities: usize,
    /// Nearest neighbours per sensor.
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CoarsenArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "0")]
    levels: String,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pool each level from the sparsified rather than the raw coarsened graph.
    #[arg(long)]
    sparsify_between: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CutArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepMode {
    Densify,
    Epsilon,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: SweepMode,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    /// Eigenvalues compared by the spectral distance (default: min(10, n − 1)).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskName {
    RingVsGrid,
    SmoothVsRough,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "ring-vs-grid")]
    task: TaskName,
    #[arg(long, default_value_t = 20)]
    per_class: usize,
    /// Grid side for the signal task.
    #[arg(long, default_value_t = 8)]
    side: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    /// Comma-separated pool strides.
    #[arg(long, default_value = "2,2")]
    strides: String,
    #[arg(long, default_value_t = crate::gnn::DEFAULT_LEARNING_RATE)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Shared pyramid file over the signal grid.
    #[arg(long)]
    pyramid: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{e}");
                EXIT_OK
            };
            return code;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Gen(a) => cmd_gen(&a, stdout),
        Command::Coarsen(a) => cmd_coarsen(&a, stdout, stderr),
        Command::Cut(a) => cmd_cut(&a, stdout),
        Command::Oracle(a) => cmd_oracle(&a, stdout),
        Command::Sweep(a) => cmd_sweep(&a, stdout),
        Command::TrainDemo(a) => cmd_train(&a, stdout, stderr),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_graph(path: &Path) -> CliResult<Graph> {
    Ok(GraphFile::parse(&read_text(path)?)?.to_graph()?)
}

fn emit(out: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => stdout.write_all(bytes).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn parse_list(text: &str, what: &str) -> CliResult<Vec<usize>> {
    text.split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("bad {what} list {text:?}: {e}")))
}

fn require_n(a: &GenArgs) -> CliResult<usize> {
    a.n.ok_or_else(|| CliError::Usage("--n is required for this family".into()))
}

fn cmd_gen(a: &GenArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let g = match a.family {
        Family::Grid => {
            let rows = a
                .rows
                .or(a.n)
                .ok_or_else(|| CliError::Usage("grid needs --rows/--cols or --n".into()))?;
            gen_grid(rows, a.cols.unwrap_or(rows))?
        }
        Family::Ring => gen_ring(require_n(a)?)?,
        Family::Erdos => gen_erdos_renyi(require_n(a)?, a.p, a.seed)?,
        Family::Sensor => gen_sensor(require_n(a)?, a.k, a.sigma, a.seed)?,
        Family::Community => gen_community(require_n(a)?, a.communities, a.p_in, a.p_out, a.seed)?,
        Family::Sbm => {
            let blocks = match &a.blocks {
                Some(text) => parse_list(text, "block")?,
                None => {
                    let n = require_n(a)?;
                    vec![n / 2, n - n / 2]
                }
            };
            gen_sbm(&blocks, a.p_in, a.p_out, a.seed)?
        }
    };
    emit(
        a.out.as_deref(),
        GraphFile::from_graph(&g)?.to_json().as_bytes(),
        stdout,
    )
}

fn cmd_coarsen(a: &CoarsenArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let g = read_graph(&a.input)?;
    let opts = PyramidOptions {
        levels: parse_levels(&a.levels)?,
        epsilon: a.epsilon,
        seed: a.seed,
        sparsify_between: a.sparsify_between,
    };
    let pyramid = build_pyramid_with(&g, &opts)?;
    if pyramid.truncated {
        let _ = writeln!(
            stderr,
            "warning: coarsening stopped early; emitted {} of {} requested levels",
            pyramid.levels.len(),
            opts.levels.len()
        );
    }
    emit(
        a.out.as_deref(),
        PyramidFile::from_pyramid(&pyramid)?.to_json().as_bytes(),
        stdout,
    )
}

fn json_line(value: &impl Serialize) -> String {
    serde_json::to_string(value).expect("plain values serialize") + "\n"
}

fn cmd_cut(a: &CutArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let g = read_graph(&a.input)?;
    if g.n() == 0 {
        return Err(Error::InvalidGraph("graph has no nodes".into()).into());
    }
    let value = if !g.has_edges() || g.n() < 2 {
        let p = spectral_partition(&g)?;
        json!({
            "gamma": 0.0,
            "method": CutMethod::Spectral,
            "upper_bound": null,
            "lambda_s_max": null,
            "lower_bound": RANDOM_CUT_FRACTION,
            "trevisan_ok": false,
            "no_edges": true,
            "keep": p.keep,
        })
    } else {
        // Same partition the first pooling step of `coarsen` uses.
        let p = pooling_partition(&g, derive_seed(a.seed, 0))?;
        let report = evaluate_cut(&g, &p)?;
        json!({
            "gamma": report.gamma,
            "method": p.method,
            "upper_bound": report.upper_bound,
            "lambda_s_max": report.lambda_s_max,
            "lower_bound": report.lower_bound,
            "trevisan_ok": report.trevisan_ok,
            "no_edges": false,
            "keep": p.keep,
        })
    };
    emit(None, json_line(&value).as_bytes(), stdout)
}

fn cmd_oracle(a: &OracleArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let g = read_graph(&a.input)?;
    let (assignment, gamma) = brute_force_maxcut(&g)?;
    let value = json!({ "maxcut_gamma": gamma, "assignment": assignment });
    emit(None, json_line(&value).as_bytes(), stdout)
}

fn to_csv<R: Serialize>(records: &[R]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| CliError::Usage(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Usage(format!("csv: {e}")))
}

fn cmd_sweep(a: &SweepArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let g = read_graph(&a.input)?;
    let bytes = match a.mode {
        SweepMode::Densify => to_csv(&densify_sweep(&g, a.steps, a.seed)?)?,
        SweepMode::Epsilon => {
            if a.steps == 0 {
                return Err(CliError::Usage("--steps must be at least 1".into()));
            }
            let mut grid = vec![0.0];
            grid.extend(log_epsilon_grid(a.steps - 1));
            let k = a.k.unwrap_or_else(|| g.n().saturating_sub(1).min(10));
            to_csv(&epsilon_sweep(&g, &grid, k)?)?
        }
    };
    emit(a.out.as_deref(), &bytes, stdout)
}

fn cmd_train(a: &TrainArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let task = match a.task {
        TaskName::RingVsGrid => DemoTask::RingVsGrid { per_class: a.per_class },
        TaskName::SmoothVsRough => DemoTask::SmoothVsRough {
            per_class: a.per_class,
            side: a.side,
        },
    };
    let config = TrainConfig {
        hidden_width: a.hidden,
        strides: parse_list(&a.strides, "stride")?,
        epochs: a.epochs,
        learning_rate: a.lr,
        batch_size: a.batch_size,
        epsilon: a.epsilon,
        ..TrainConfig::default()
    };
    let shared = match &a.pyramid {
        Some(path) => {
            let file = PyramidFile::parse(&read_text(path)?)?;
            let grid = gen_grid(a.side, a.side)?;
            Some(PooledGraph::from_file(
                &grid,
                &file,
                &demo_model_config(task, &config)?,
            )?)
        }
        None => None,
    };
    let report = train_demo_with(task, &config, a.seed, shared)?;
    let mut text = report.to_jsonl();
    text.push_str(&json_line(&json!({ "final_accuracy": report.final_accuracy() })));
    let _ = writeln!(stderr, "final training accuracy {:.4}", report.final_accuracy());
    emit(a.out.as_deref(), text.as_bytes(), stdout)
}
