use clap::{Args, Parser, Subcommand, ValueEnum};
use pgso_core::graph::GraphFormat;
use pgso_core::nn::ReadoutMode;
use pgso_core::operator::{ParamSet, Preset};
use pgso_core::train::{FeatureTransform, OperatorSpec, Telemetry};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "pgso", version, about = "Parametrised graph shift operators: analysis and training")]
pub struct Cli {
    /// Worker threads for data-parallel work [default: all cores]
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,

    /// Suppress the summary printed on success
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Built-in operator presets
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
    /// Spectrum and Gershgorin bounds of one operator on one graph
    Analyze(AnalyzeArgs),
    /// Train a node- or graph-classification model
    Train(TrainArgs),
    /// Learned operator parameters across SBM sparsity levels
    SbmStudy(SbmStudyArgs),
    /// One training run per initial preset
    InitSweep(InitSweepArgs),
    /// Fixed preset against its trainable counterpart
    Converge(ConvergeArgs),
    /// Sample an SBM graph and write it to a file
    Generate(GenerateArgs),
    /// Re-run a pipeline from its run.json manifest
    Rerun(RerunArgs),
}

#[derive(Debug, Subcommand)]
pub enum PresetsAction {
    /// Print every preset with its formula and parameter tuple
    List,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    #[value(name = "edge_list")]
    EdgeList,
    Bundle,
}

impl From<FormatArg> for GraphFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::EdgeList => GraphFormat::EdgeList,
            FormatArg::Bundle => GraphFormat::Bundle,
        }
    }
}

impl FormatArg {
    pub fn name(self) -> &'static str {
        match self {
            FormatArg::EdgeList => "edge_list",
            FormatArg::Bundle => "bundle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Full,
    Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Node,
    Graph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Gcn,
    Gin,
    Sgc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    /// Stratified 80/10/10
    Random,
    /// 20 training nodes per class, 500 validation, 1000 test
    Planetoid,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_name = "PATH")]
    pub graph: PathBuf,
    #[arg(long, value_enum, default_value = "bundle")]
    pub format: FormatArg,
    /// Operator to analyse; the mode prefix is ignored
    #[arg(long, default_value = "preset:gcn_norm")]
    pub operator: OperatorSpec,
    /// Explicit tuple "m1=.. m2=.. m3=.. e1=.. e2=.. e3=.. a=.." (overrides --operator)
    #[arg(long)]
    pub params: Option<ParamSet>,
    #[arg(long, value_enum, default_value = "full")]
    pub mode: ModeArg,
    /// Lower bound on augmented degrees d_i + a
    #[arg(long, default_value_t = 1e-6)]
    pub clamp: f64,
    /// Largest graph for dense eigensolves
    #[arg(long, default_value_t = pgso_core::spectral::DEFAULT_DENSE_LIMIT)]
    pub dense_limit: usize,
    /// Output CSV; eigenvalues go to <stem>.eigenvalues.csv
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
}

/// Input data: a graph file, or an SBM sample when --graph is absent.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long, value_name = "PATH")]
    pub graph: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bundle")]
    pub format: FormatArg,
    #[arg(long, value_enum, default_value = "node")]
    pub task: TaskArg,
    #[arg(long, value_enum, default_value = "random")]
    pub split: SplitArg,
    /// SBM communities (used without --graph)
    #[arg(long, default_value_t = 3)]
    pub sbm_k: usize,
    /// SBM community size (used without --graph)
    #[arg(long, default_value_t = 200)]
    pub sbm_size: usize,
    /// SBM within-community edge probability
    #[arg(long, default_value_t = 0.5)]
    pub sbm_p: f64,
    /// SBM between-community edge probability
    #[arg(long, default_value_t = 0.25)]
    pub sbm_q: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training epochs [default depends on the command]
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    /// Number of propagation layers [default: 3 for node tasks, 4 for graph tasks]
    #[arg(long)]
    pub depth: Option<usize>,
    /// preset:<name> (fixed), pgso:<name> or mpgso:<name> (trainable)
    #[arg(long, default_value = "pgso:gcn_norm")]
    pub operator: OperatorSpec,
    /// off, bounds, or full:<n> (bounds every epoch, spectra every n epochs) [default depends on the command]
    #[arg(long)]
    pub telemetry: Option<Telemetry>,
    /// [default: gcn for node tasks, gin for graph tasks]
    #[arg(long, value_enum)]
    pub arch: Option<ArchArg>,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub clamp: f64,
    /// raw or standardize [default: standardize for node tasks, raw for graph tasks]
    #[arg(long)]
    pub features: Option<FeatureTransform>,
    #[arg(long, default_value = "sum")]
    pub readout: ReadoutMode,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = pgso_core::spectral::DEFAULT_DENSE_LIMIT)]
    pub dense_limit: usize,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct SbmStudyArgs {
    /// Fifteen levels, 25 repeats, community size 200
    #[arg(long)]
    pub full: bool,
    /// Comma-separated p:q pairs, e.g. 0.5:0.25,0.3:0.15
    #[arg(long)]
    pub levels: Option<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub community_size: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct InitSweepArgs {
    /// Comma-separated preset names
    #[arg(long, default_value = "gcn_norm,adjacency,random_walk_laplacian,symmetric_laplacian,all_zeros")]
    pub inits: String,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub size: usize,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 0.25)]
    pub q: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "bundle")]
    pub format: FormatArg,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Where the rerun writes; the recorded output location is not reused
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

pub fn parse_inits(s: &str) -> Result<Vec<Preset>, String> {
    s.split(',').map(|n| n.trim().parse::<Preset>().map_err(|e| e.to_string())).collect()
}

pub fn parse_levels(s: &str) -> Result<Vec<(f64, f64)>, String> {
    s.split(',')
        .map(|pair| {
            let (p, q) = pair.split_once(':').ok_or_else(|| format!("level '{pair}' must look like p:q"))?;
            let p = p.trim().parse::<f64>().map_err(|e| format!("level '{pair}': {e}"))?;
            let q = q.trim().parse::<f64>().map_err(|e| format!("level '{pair}': {e}"))?;
            Ok((p, q))
        })
        .collect()
}
