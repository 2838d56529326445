//! Command-line front end: `search`, `gen`, `overlap`, `retrain`.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 non-finite numerics.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};

use crate::engine::{
    lowest_scored, overlap, removal_count, retrain_and_eval, retrain_seeds, run_search, to_json, write_json,
    SearchConfig,
};
use crate::error::Error;
use crate::graphio::{gen_noisy_sbm, load_graph, save_graph, save_synthetic_meta, SbmParams, SparseGraph};
use crate::operators::OpKind;
use crate::sparsifier::{MaskCheckpoint, StructureMask};
use crate::supernet::{arch_from_json, arch_to_json};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "gassip", version, about = "Lightweight graph architecture search with graph sparsification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search an architecture, sparsify the graph, retrain and report.
    Search(SearchArgs),
    /// Generate a synthetic graph directory.
    Gen(GenArgs),
    /// Overlap of the edges removed by two structure masks.
    Overlap(OverlapArgs),
    /// Retrain a fixed architecture and report accuracy.
    Retrain(RetrainArgs),
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// TOML file with a `[search]` table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub retrain_runs: Option<usize>,
    /// Include wall-clock time in result.json (makes it non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value = "sbm")]
    pub kind: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated block sizes.
    #[arg(long, value_delimiter = ',', default_values_t = vec![100usize, 100])]
    pub block_sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    pub p_out: f64,
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub mean_separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub noise_edges: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    #[arg(long)]
    pub mask_a: PathBuf,
    #[arg(long)]
    pub mask_b: PathBuf,
    #[arg(long)]
    pub ratio: f64,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct RetrainArgs {
    /// JSON list of operation names, one per layer.
    #[arg(long)]
    pub arch: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Structure mask checkpoint; edges below threshold are dropped.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// On-disk configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub paths: Paths,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// An error carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    fn write(path: &Path, e: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: format!("writing {}: {e}", path.display()),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: 1,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::InvalidArgument(_) | Error::TooManyArchitectures { .. } | Error::Json(_) => EXIT_USAGE,
            Error::NonFinite(_) => EXIT_NUMERIC,
            Error::Graph(_) | Error::Index(_) | Error::Dimension(_) | Error::EmptyNodeSet => EXIT_DATA,
            Error::NonScalarLoss(..) | Error::Io(_) => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Worker threads for independent retraining runs, from `GASSIP_THREADS`.
pub fn threads_from_env() -> CliResult<usize> {
    match std::env::var("GASSIP_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::usage(format!("GASSIP_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

pub fn read_config(path: &Path) -> CliResult<CliConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let config: CliConfig = toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(config)
}

fn load_data(dir: &Path) -> CliResult<SparseGraph> {
    load_graph(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_mask(path: &Path) -> CliResult<StructureMask> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let ck: MaskCheckpoint =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(StructureMask::from_checkpoint(&ck))
}

fn dataset_name(graph: &SparseGraph, dir: &Path) -> String {
    if graph.name.is_empty() {
        dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    } else {
        graph.name.clone()
    }
}

pub fn cmd_search(args: &SearchArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let file = match &args.config {
        Some(p) => read_config(p)?,
        None => CliConfig::default(),
    };
    let mut config = file.search;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(e) = args.epochs {
        config.epochs = e;
    }
    if let Some(r) = args.retrain_runs {
        config.retrain_runs = r;
    }
    config.validate()?;
    let data = args
        .data
        .clone()
        .or(file.paths.data)
        .ok_or_else(|| CliError::usage("no data directory given"))?;
    let out = args
        .out
        .clone()
        .or(file.paths.out)
        .ok_or_else(|| CliError::usage("no output directory given"))?;
    let threads = threads_from_env()?;
    let graph = load_data(&data)?;
    info!("searching on {} ({} nodes, {} edges)", data.display(), graph.num_nodes, graph.num_edges());

    let result = run_search(&graph, &config, threads)?;
    create_dir(&out)?;
    let report = result.report(&dataset_name(&graph, &data), args.timing);
    write_file(&out.join("result.json"), &to_json(&report)?)?;
    write_file(&out.join("arch.json"), &format!("{}\n", arch_to_json(&result.outcome.kinds)))?;
    write_json(out.join("mask.json"), &result.outcome.mask.checkpoint())?;
    if !args.timing {
        write_json(
            out.join("timing.json"),
            &serde_json::json!({ "wall_clock_seconds": result.wall_clock_seconds }),
        )?;
    }
    save_graph(&result.outcome.sparsified, out.join("graph_sp")).map_err(|e| CliError::write(&out, e))?;
    writeln!(
        stdout,
        "arch {} | edges {}/{} | params {}/{} | accuracy {:.4} +- {:.4}",
        arch_to_json(&result.outcome.kinds),
        report.edges_kept,
        report.edges_total,
        report.params_kept,
        report.params_total,
        report.accuracy_mean,
        report.accuracy_std
    )
    .ok();
    Ok(())
}

pub fn cmd_gen(args: &GenArgs, stdout: &mut dyn Write) -> CliResult<()> {
    if args.kind != "sbm" {
        return Err(CliError::usage(format!("unknown generator kind {:?}", args.kind)));
    }
    let params = SbmParams {
        block_sizes: args.block_sizes.clone(),
        p_in: args.p_in,
        p_out: args.p_out,
        feature_dim: args.feature_dim,
        mean_separation: args.mean_separation,
        sigma: args.sigma,
        seed: args.seed,
    };
    let (graph, meta) = gen_noisy_sbm(&params, args.noise_edges).map_err(|e| CliError::usage(e.to_string()))?;
    save_graph(&graph, &args.out).map_err(|e| CliError::write(&args.out, e))?;
    save_synthetic_meta(&meta, &args.out).map_err(|e| CliError::write(&args.out, e))?;
    writeln!(
        stdout,
        "{}: {} nodes, {} edges ({} injected)",
        args.out.display(),
        graph.num_nodes,
        graph.num_edges(),
        meta.noise_edge_ids.len()
    )
    .ok();
    Ok(())
}


#[derive(Serialize)]
struct OverlapReport<'a> {
    overlap: f64,
    ratio: f64,
    removed: usize,
    edges_total: usize,
    mask_a: &'a Path,
    mask_b: &'a Path,
    data: &'a Path,
}

pub fn cmd_overlap(args: &OverlapArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let graph = load_data(&args.data)?;
    let a = read_mask(&args.mask_a)?;
    let b = read_mask(&args.mask_b)?;
    for (m, p) in [(&a, &args.mask_a), (&b, &args.mask_b)] {
        if m.num_edges() != graph.num_edges() {
            return Err(CliError::usage(format!(
                "{} holds {} edge scores, the graph has {} edges",
                p.display(),
                m.num_edges(),
                graph.num_edges()
            )));
        }
    }
    let removed_a = lowest_scored(&a.mask_values(), args.ratio);
    let removed_b = lowest_scored(&b.mask_values(), args.ratio);
    let value = overlap(&removed_a, &removed_b, args.ratio, graph.num_edges())?;
    let report = OverlapReport {
        overlap: value,
        ratio: args.ratio,
        removed: removal_count(args.ratio, graph.num_edges()),
        edges_total: graph.num_edges(),
        mask_a: &args.mask_a,
        mask_b: &args.mask_b,
        data: &args.data,
    };
    write!(stdout, "{}", to_json(&report)?).ok();
    Ok(())
}

#[derive(Serialize)]
struct RetrainReport<'a> {
    dataset: String,
    arch: &'a [OpKind],
    config: &'a SearchConfig,
    runs: usize,
    edges_total: usize,
    edges_kept: usize,
    params_total: usize,
    params_kept: usize,
    accuracy_mean: f64,
    accuracy_std: f64,
    test_acc: Vec<f64>,
    best_epoch: Vec<usize>,
}

pub fn cmd_retrain(args: &RetrainArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let mut config = match &args.config {
        Some(p) => read_config(p)?.search,
        None => SearchConfig::default(),
    };
    if let Some(s) = args.seed {
        config.seed = s;
    }
    config.retrain_runs = args.runs;
    config.validate()?;
    let text = fs::read_to_string(&args.arch).map_err(|e| CliError::usage(format!("{}: {e}", args.arch.display())))?;
    let arch = arch_from_json(&text).map_err(|e| CliError::usage(format!("{}: {e}", args.arch.display())))?;
    config.layers = arch.len();
    let threads = threads_from_env()?;
    let graph = load_data(&args.data)?;
    let edges_total = graph.num_edges();
    let graph = match &args.mask {
        Some(p) => {
            let mask = read_mask(p)?;
            if mask.num_edges() != edges_total {
                return Err(CliError::usage(format!(
                    "{} holds {} edge scores, the graph has {edges_total} edges",
                    p.display(),
                    mask.num_edges()
                )));
            }
            graph.with_edges_retained(&mask.binarize())
        }
        None => graph,
    };
    let seeds = retrain_seeds(config.seed, config.retrain_runs);
    let metrics = retrain_and_eval(&arch, None, &graph, &config, &seeds, threads)?;
    let report = RetrainReport {
        dataset: dataset_name(&graph, &args.data),
        arch: &arch,
        config: &config,
        runs: metrics.runs.len(),
        edges_total,
        edges_kept: graph.num_edges(),
        params_total: metrics.params_total,
        params_kept: metrics.params_kept,
        accuracy_mean: metrics.accuracy_mean,
        accuracy_std: metrics.accuracy_std,
        test_acc: metrics.runs.iter().map(|r| r.test_acc).collect(),
        best_epoch: metrics.runs.iter().map(|r| r.best_epoch).collect(),
    };
    create_dir(&args.out)?;
    write_file(&args.out.join("retrain.json"), &to_json(&report)?)?;
    writeln!(
        stdout,
        "arch {} | accuracy {:.4} +- {:.4} over {} runs",
        arch_to_json(&arch),
        metrics.accuracy_mean,
        metrics.accuracy_std,
        metrics.runs.len()
    )
    .ok();
    Ok(())
}

/// Parses `args` (program name first) and runs the command, writing
/// human-readable output to `stdout` and errors to stderr. Returns the exit
/// code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Search(a) => cmd_search(a, stdout),
        Command::Gen(a) => cmd_gen(a, stdout),
        Command::Overlap(a) => cmd_overlap(a, stdout),
        Command::Retrain(a) => cmd_retrain(a, stdout),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
