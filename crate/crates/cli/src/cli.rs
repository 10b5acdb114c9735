//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use stylenet_core::analysis::{evaluate, louvain, Level, Partition};
use stylenet_core::networks::read_graphml;

use crate::config::{FileConfig, Overrides, RunConfig, PROVIDER_URL_ENV};
use crate::error::CliError;
use crate::pipeline::{run_bench_command, run_pipeline, run_sweep_command, Stage};

#[derive(Debug, Parser)]
#[command(name = "stylenet", version, about = "Sentence-reuse similarity networks over news coverage")]
struct Args {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: OverrideArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct OverrideArgs {
    /// Line-delimited JSON articles.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// file:<path>, http:<url> or toy:<dim>,<seed>.
    #[arg(long, global = true)]
    provider: Option<String>,
    /// Sentiment lexicon (term<TAB>valence per line); defaults to the bundled one.
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    #[arg(long, global = true)]
    tau1: Option<f64>,
    #[arg(long, global = true)]
    tau2: Option<f64>,
    /// edit or overlap.
    #[arg(long, global = true)]
    metric: Option<String>,
    #[arg(long, global = true)]
    resolution: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short = 'o', global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LevelArg {
    Article,
    Domain,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every stage and write the manifest.
    Pipeline,
    /// Split articles into sentences.
    Segment,
    /// Embed sentences (cached per provider).
    Embed,
    /// Match sentences and assign symbols.
    Match,
    /// Article-to-article similarity matrices.
    Similarity,
    /// Article and domain networks.
    Network,
    /// Louvain clusters, for the run or for one GraphML file.
    Cluster {
        /// Cluster this network instead of running the pipeline.
        #[arg(long)]
        network: Option<PathBuf>,
        /// Partition CSV destination (stdout when omitted).
        #[arg(long, requires = "network")]
        out: Option<PathBuf>,
    },
    /// Compare clusters with bias labels, for the run or for one GraphML file.
    Evaluate {
        #[arg(long)]
        network: Option<PathBuf>,
        /// Partition CSV; Louvain is run when omitted.
        #[arg(long, requires = "network")]
        clusters: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "domain", requires = "network")]
        level: LevelArg,
        #[arg(long, default_value = "", requires = "network")]
        event_id: String,
    },
    /// Cross-event consensus of domain clusters.
    Ensemble,
    /// Threshold sensitivity surfaces.
    Sweep,
    /// Text comparison report over an alteration suite.
    Bench {
        /// Suite file; the bundled suite when omitted.
        #[arg(long)]
        suite: Option<PathBuf>,
    },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve(args: &Args, suite: Option<PathBuf>) -> Result<RunConfig, CliError> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let o = &args.overrides;
    let flags = Overrides {
        corpus: o.corpus.clone(),
        provider: o.provider.clone(),
        lexicon: o.lexicon.clone(),
        tau1: o.tau1,
        tau2: o.tau2,
        metric: o.metric.clone(),
        resolution: o.resolution,
        seed: o.seed,
        output_dir: o.output_dir.clone(),
        suite,
    };
    RunConfig::resolve(file, flags, std::env::var(PROVIDER_URL_ENV).ok())
}

fn run(args: Args) -> Result<(), CliError> {
    let suite = match &args.command {
        Command::Bench { suite } => suite.clone(),
        _ => None,
    };
    let config = resolve(&args, suite)?;
    let stage = match &args.command {
        Command::Pipeline | Command::Ensemble => Stage::Ensemble,
        Command::Segment => Stage::Segment,
        Command::Embed => Stage::Embed,
        Command::Match => Stage::Match,
        Command::Similarity => Stage::Similarity,
        Command::Network => Stage::Network,
        Command::Cluster { network: Some(network), out } => {
            return cluster_file(&config, network, out.as_deref());
        }
        Command::Cluster { network: None, .. } => Stage::Cluster,
        Command::Evaluate { network: Some(network), clusters, level, event_id } => {
            return evaluate_file(&config, network, clusters.as_deref(), *level, event_id);
        }
        Command::Evaluate { network: None, .. } => Stage::Evaluate,
        Command::Sweep => {
            let [a, b] = run_sweep_command(&config)?;
            println!("{}\n{}", a.display(), b.display());
            return Ok(());
        }
        Command::Bench { .. } => {
            println!("{}", run_bench_command(&config)?.display());
            return Ok(());
        }
    };
    let manifest = run_pipeline(&config, stage)?;
    println!(
        "{}: {} files through stage {}",
        config.output_dir.display(),
        manifest.files.len(),
        stage.name()
    );
    Ok(())
}

fn cluster_file(config: &RunConfig, network: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let n = read_graphml(network).map_err(|e| CliError::data("cluster", e))?;
    let p = louvain(&n, config.resolution, config.seed);
    let mut buf = Vec::new();
    p.write_csv(&mut buf).map_err(|e| CliError::data("cluster", e))?;
    match out {
        Some(path) => fs::write(path, buf).map_err(|e| CliError::data("cluster", format!("{}: {e}", path.display()))),
        None => {
            print!("{}", String::from_utf8(buf).expect("csv is utf-8"));
            Ok(())
        }
    }
}

fn evaluate_file(
    config: &RunConfig,
    network: &Path,
    clusters: Option<&Path>,
    level: LevelArg,
    event_id: &str,
) -> Result<(), CliError> {
    let n = read_graphml(network).map_err(|e| CliError::data("evaluate", e))?;
    let p = match clusters {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| CliError::data("evaluate", format!("{}: {e}", path.display())))?;
            Partition::read_csv(BufReader::new(file)).map_err(|e| CliError::data("evaluate", e))?
        }
        None => louvain(&n, config.resolution, config.seed),
    };
    let level = match level {
        LevelArg::Article => Level::Article,
        LevelArg::Domain => Level::Domain,
    };
    let report = evaluate(event_id, level, &n, &p, &config.bias_scale, config.resolution)
        .map_err(|e| CliError::data("evaluate", e))?;
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(())
}
