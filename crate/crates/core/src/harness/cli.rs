use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::ExperimentConfig;
use super::pipeline::{apply, evaluate, evaluation_negatives, forget_split, run_experiment, EvalSets};
use super::store::{load_predictor, save_predictor, TrainedArtifacts};
use crate::error::Error;
use crate::gnn::{train, ModelConfig, TrainConfig};
use crate::graph::{
    generate_features, generate_sbm, load_edge_list, load_features, read_edge_list, split_edges,
    write_edge_list, write_features, Backbone, SbmParams, UnlearnSplit,
};
use crate::seed;
use crate::unlearn::{retrain, BranchGraph, Method};

/// Environment variable consulted when neither `--output-dir` nor the
/// config file names an output directory.
pub const OUTPUT_DIR_ENV: &str = "EUB_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "eub", version, about = "Edge unlearning benchmark for GNN link predictors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a stochastic block model and write it as an edge list.
    GenGraph(GenGraphArgs),
    /// Split a graph, train a link predictor and save it with its data.
    Train(TrainArgs),
    /// Apply one unlearning method to a trained model.
    Unlearn(UnlearnArgs),
    /// Score a saved predictor against a saved reference predictor.
    Eval(EvalArgs),
    /// Run a full sweep from a JSON config.
    Run(RunArgs),
}

#[derive(Debug, Args)]
struct GenGraphArgs {
    #[arg(long)]
    blocks: usize,
    #[arg(long)]
    nodes_per_block: usize,
    #[arg(long)]
    p_in: f64,
    #[arg(long)]
    p_out: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write standard-normal features of this width.
    #[arg(long, requires = "features_out")]
    feature_dim: Option<usize>,
    #[arg(long, requires = "feature_dim")]
    features_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Node features as CSV; drawn at random when absent.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    feature_dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.9)]
    train_frac: f64,
    #[arg(long, default_value_t = 0.05)]
    val_frac: f64,
    #[arg(long, default_value = "gcn")]
    backbone: Backbone,
    #[arg(long, default_value_t = 2)]
    num_layers: usize,
    #[arg(long, default_value_t = 64)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 64)]
    out_dim: usize,
    #[arg(long, default_value_t = 1)]
    gat_heads: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 50)]
    patience: usize,
    #[arg(long, default_value_t = 1)]
    negatives_per_positive: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct UnlearnArgs {
    /// Directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    method: Method,
    #[arg(long, conflicts_with = "forget")]
    forget_ratio: Option<f64>,
    /// Edge list of the edges to forget.
    #[arg(long)]
    forget: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    gnndelete_lambda: f64,
    #[arg(long, default_value_t = 50)]
    gnndelete_epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    gnndelete_learning_rate: f64,
    #[arg(long, default_value = "retain")]
    gnndelete_branch_graph: BranchGraph,
    #[arg(long, default_value_t = 5)]
    grad_ascent_steps: usize,
    #[arg(long, default_value_t = 0.01)]
    grad_ascent_learning_rate: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Predictor directory written by `unlearn`.
    #[arg(long)]
    unlearned: PathBuf,
    /// Reference predictor, normally `unlearn --method retrain`.
    #[arg(long)]
    reference: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

macro_rules! overrides {
    ($($field:ident : $ty:ty),* $(,)?) => {
        /// Flags named after the config keys; each one overrides the file.
        #[derive(Debug, Args)]
        struct Overrides {
            $(
                #[arg(long)]
                $field: Option<$ty>,
            )*
            /// Comma-separated, e.g. `0.01,0.05`.
            #[arg(long, value_delimiter = ',')]
            forget_ratios: Option<Vec<f64>>,
            /// Comma-separated method ids.
            #[arg(long, value_delimiter = ',')]
            methods: Option<Vec<Method>>,
        }

        impl Overrides {
            fn apply(self, cfg: &mut ExperimentConfig) {
                $(
                    if let Some(v) = self.$field {
                        cfg.$field = overrides!(@wrap $field v);
                    }
                )*
                if let Some(v) = self.forget_ratios {
                    cfg.forget_ratios = v;
                }
                if let Some(v) = self.methods {
                    cfg.methods = v;
                }
            }
        }
    };
    (@wrap edge_list $v:ident) => { Some($v) };
    (@wrap features $v:ident) => { Some($v) };
    (@wrap $field:ident $v:ident) => { $v };
}

overrides! {
    sbm_blocks: usize,
    sbm_nodes_per_block: usize,
    sbm_p_in: f64,
    sbm_p_out: f64,
    edge_list: PathBuf,
    features: PathBuf,
    feature_dim: usize,
    train_frac: f64,
    val_frac: f64,
    backbone: Backbone,
    num_layers: usize,
    hidden_dim: usize,
    out_dim: usize,
    gat_heads: usize,
    gat_slope: f64,
    gin_eps: f64,
    epochs: usize,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    adam_epsilon: f64,
    negatives_per_positive: usize,
    patience: usize,
    gnndelete_lambda: f64,
    gnndelete_epochs: usize,
    gnndelete_learning_rate: f64,
    gnndelete_branch_graph: BranchGraph,
    grad_ascent_steps: usize,
    grad_ascent_learning_rate: f64,
    histogram_bin_width: f64,
    runs: usize,
    base_seed: u64,
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON config with keys named as the flags below (snake_case).
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

enum Failure {
    Config(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Config(msg),
            other => Failure::Runtime(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

/// Entry point of the `eub` binary. Returns the process exit code: 0 on
/// success, 1 for usage or configuration errors, 2 for runtime failures.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{rendered}")
            } else {
                write!(stderr, "{rendered}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::GenGraph(a) => gen_graph(a, stdout),
        Command::Train(a) => train_cmd(a, stdout),
        Command::Unlearn(a) => unlearn_cmd(a, stdout),
        Command::Eval(a) => eval_cmd(a, stdout),
        Command::Run(a) => run_cmd(a, stdout, stderr),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Config(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
    }
}

fn create(path: &PathBuf) -> Result<BufWriter<File>, Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn gen_graph(a: GenGraphArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let params = SbmParams {
        blocks: a.blocks,
        nodes_per_block: a.nodes_per_block,
        p_in: a.p_in,
        p_out: a.p_out,
    };
    let graph = generate_sbm(params, a.seed).map_err(|e| Failure::Config(e.to_string()))?;
    let mut out = create(&a.out)?;
    write_edge_list(&graph, &mut out)?;
    out.flush()?;
    if let (Some(dim), Some(path)) = (a.feature_dim, &a.features_out) {
        let featured = generate_features(&graph, dim, seed::derive(a.seed, &[seed::FEATURES]))?;
        let mut out = create(path)?;
        write_features(featured.features().expect("just generated"), &mut out)?;
        out.flush()?;
    }
    writeln!(stdout, "{} nodes, {} edges -> {}", graph.num_nodes(), graph.num_edges(), a.out.display())?;
    Ok(())
}

fn train_cmd(a: TrainArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let graph = load_edge_list(&a.graph)?;
    let graph = match &a.features {
        Some(path) => graph.with_features(load_features(path)?)?,
        None => generate_features(&graph, a.feature_dim, seed::derive(a.seed, &[seed::FEATURES]))?,
    };
    let config = ModelConfig {
        num_layers: a.num_layers,
        gat_heads: a.gat_heads,
        ..ModelConfig::new(a.backbone, a.hidden_dim, a.out_dim)
    };
    let tcfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        patience: a.patience,
        negatives_per_positive: a.negatives_per_positive,
        seed: seed::derive(a.seed, &[seed::TRAIN]),
        ..TrainConfig::default()
    };
    config.validate().map_err(|e| Failure::Config(e.to_string()))?;
    tcfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let split = split_edges(&graph, a.train_frac, a.val_frac, seed::derive(a.seed, &[seed::SPLIT]))?;
    let model = train(&config, &graph, &split, &tcfg)?;
    TrainedArtifacts {
        model,
        graph,
        split,
        train: tcfg,
    }
    .save(&a.out)?;
    writeln!(stdout, "trained {} -> {}", config.backbone, a.out.display())?;
    Ok(())
}

fn unlearn_cmd(a: UnlearnArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let art = TrainedArtifacts::load(&a.model)?;
    let usplit = match (&a.forget, a.forget_ratio) {
        (Some(path), _) => {
            let file = File::open(path)?;
            let forget = read_edge_list(file)?.edge_list();
            let in_forget: std::collections::HashSet<_> = forget.iter().copied().collect();
            let retain = art
                .split
                .train_pos
                .iter()
                .copied()
                .filter(|e| !in_forget.contains(e))
                .collect::<Vec<_>>();
            if retain.len() + forget.len() != art.split.train_pos.len() {
                return Err(Failure::Config("forget edges must be training edges".into()));
            }
            let ratio = forget.len() as f64 / art.split.train_pos.len() as f64;
            UnlearnSplit { forget, retain, ratio }
        }
        (None, Some(ratio)) => forget_split(&art.split, ratio, a.seed).map_err(|e| Failure::Config(e.to_string()))?,
        (None, None) => return Err(Failure::Config("one of --forget-ratio or --forget is required".into())),
    };
    let cfg = ExperimentConfig {
        gnndelete_lambda: a.gnndelete_lambda,
        gnndelete_epochs: a.gnndelete_epochs,
        gnndelete_learning_rate: a.gnndelete_learning_rate,
        gnndelete_branch_graph: a.gnndelete_branch_graph,
        grad_ascent_steps: a.grad_ascent_steps,
        grad_ascent_learning_rate: a.grad_ascent_learning_rate,
        ..ExperimentConfig::default()
    };
    let pred = match a.method {
        Method::Retrain => retrain(&art.model.config, &art.graph, &art.split, &usplit, &art.train)?,
        Method::Original => {
            return Err(Failure::Config("\"original\" is not an unlearning method".into()));
        }
        method => {
            let model = std::sync::Arc::new(art.model.clone());
            let train_graph = art.split.train_graph(&art.graph)?;
            apply(method, &cfg, &model, &train_graph, &usplit, a.seed, usplit.ratio)?
        }
    };
    save_predictor(&a.out, &pred, usplit.ratio, &usplit.forget)?;
    writeln!(
        stdout,
        "{} forgot {} edges in {:.6}s -> {}",
        pred.method,
        usplit.forget.len(),
        pred.wall_time,
        a.out.display()
    )?;
    Ok(())
}

fn eval_cmd(a: EvalArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let art = TrainedArtifacts::load(&a.model)?;
    let (pred, meta) = load_predictor(&a.unlearned)?;
    let (reference, _) = load_predictor(&a.reference)?;
    let in_forget: std::collections::HashSet<_> = meta.forget.iter().copied().collect();
    let usplit = UnlearnSplit {
        forget: meta.forget.clone(),
        retain: art
            .split
            .train_pos
            .iter()
            .copied()
            .filter(|e| !in_forget.contains(e))
            .collect(),
        ratio: meta.forget_ratio,
    };
    let pool = evaluation_negatives(&art.graph, &art.split, usplit.forget.len(), a.seed)?;
    let (retain_pool, forget_pool) = pool.split_at(art.split.train_pos.len());
    let sets = EvalSets {
        split: &art.split,
        usplit: &usplit,
        retain_neg: &retain_pool[..usplit.retain.len()],
        forget_neg: forget_pool,
    };
    let (report, _) = evaluate(&pred, &reference, &sets, a.seed)?;
    let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    match &a.out {
        Some(path) => {
            let mut out = create(path)?;
            writeln!(out, "{json}")?;
            out.flush()?;
        }
        None => writeln!(stdout, "{json}")?,
    }
    Ok(())
}

fn run_cmd(a: RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Failure::Config(e.to_string()))?;
            let names_dir = value.get("output_dir").is_some();
            let mut cfg: ExperimentConfig =
                serde_json::from_value(value).map_err(|e| Failure::Config(e.to_string()))?;
            if !names_dir {
                apply_env_output_dir(&mut cfg);
            }
            cfg
        }
        None => {
            let mut cfg = ExperimentConfig::default();
            apply_env_output_dir(&mut cfg);
            cfg
        }
    };
    a.overrides.apply(&mut cfg);
    cfg.validate()?;
    let agg = run_experiment(&cfg)?;
    writeln!(
        stdout,
        "{} runs, {} failed -> {}",
        agg.runs,
        agg.failed_runs.len(),
        cfg.output_dir.display()
    )?;
    if agg.failed_runs.is_empty() {
        Ok(())
    } else {
        for f in &agg.failed_runs {
            writeln!(stderr, "run {} failed: {}", f.run, f.error)?;
        }
        Err(Failure::Runtime(Error::invalid(format!(
            "{} of {} runs failed",
            agg.failed_runs.len(),
            agg.runs
        ))))
    }
}

fn apply_env_output_dir(cfg: &mut ExperimentConfig) {
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
        cfg.output_dir = PathBuf::from(dir);
    }
}
