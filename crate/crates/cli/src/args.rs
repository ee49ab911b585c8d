use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "anfield",
    version,
    about = "Neighbourhood functions, harmonic centralities, and device-network simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact per-vertex neighbourhood counts and harmonic centralities
    Exact(ExactArgs),
    /// Sketch-based neighbourhood estimation over the whole graph
    Anf(AnfArgs),
    /// Asynchronous device-network simulation, with optional churn
    Simulate(SimulateArgs),
    /// Compare an approximate table against the exact oracle
    Compare(CompareArgs),
    /// Generate a graph in the edge-list format
    Gen(GenArgs),
}

#[derive(Args, Debug)]
pub struct GraphArgs {
    /// Edge-list file (`# nodes=N directed=B` header optional)
    #[arg(long)]
    pub graph: PathBuf,
    /// Treat edges as directed regardless of the file header
    #[arg(long)]
    pub directed: bool,
}

#[derive(Args, Debug)]
pub struct SketchArgs {
    /// Counter implementation
    #[arg(long, value_enum, default_value_t = KindArg::Hll)]
    pub kind: KindArg,
    /// log2 of the register count b (sketches use 2^b registers)
    #[arg(long = "registers-log2", default_value_t = 8)]
    pub registers_log2: u8,
    /// Seed for sketch hashing and, where used, scheduling
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Write to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExactArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Largest neighbourhood radius to count
    #[arg(long)]
    pub hmax: usize,
    /// Source set: `all`, `list:1,2,3`, or `file:PATH`
    #[arg(long, default_value = "all")]
    pub sources: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct AnfArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Largest radius; omit to iterate until the estimates stop changing
    #[arg(long)]
    pub hmax: Option<usize>,
    /// Relative change below which the fixpoint iteration stops (with no
    /// --hmax); defaults to 0
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    pub sketch: SketchArgs,
    /// Source set: `all`, `list:1,2,3`, or `file:PATH`
    #[arg(long, default_value = "all")]
    pub sources: String,
    /// Drop the self term: unions run over neighbours only
    #[arg(long = "no-reflexive")]
    pub no_reflexive: bool,
    /// Also write the final serialized sketches to this file (hll only)
    #[arg(long = "dump-sketches")]
    pub dump_sketches: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Program the devices run
    #[arg(long, value_enum, default_value_t = ProgramArg::Anf)]
    pub program: ProgramArg,
    /// Largest neighbourhood radius
    #[arg(long)]
    pub hmax: usize,
    /// Hop bound for leader claims (election only; defaults to hmax)
    #[arg(long)]
    pub grain: Option<u32>,
    #[command(flatten)]
    pub sketch: SketchArgs,
    /// Source set: `all`, `list:1,2,3`, or `file:PATH`
    #[arg(long, default_value = "all")]
    pub sources: String,
    /// Device firing order
    #[arg(long, value_enum, default_value_t = SchedulerArg::Rr)]
    pub scheduler: SchedulerArg,
    /// Total firing events to run
    #[arg(long, conflicts_with = "sweeps")]
    pub events: Option<u64>,
    /// Full sweeps to run (events = sweeps x devices); defaults to hmax + 2
    #[arg(long)]
    pub sweeps: Option<u64>,
    /// Churn script applied during the run
    #[arg(long)]
    pub churn: Option<PathBuf>,
    /// Also write the devices' final radius-hmax sketches (hll, anf program)
    #[arg(long = "dump-sketches")]
    pub dump_sketches: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Compute both tables in-process from this graph
    #[arg(long, conflicts_with_all = ["approx", "exact"])]
    pub graph: Option<PathBuf>,
    /// Treat edges as directed regardless of the file header
    #[arg(long)]
    pub directed: bool,
    /// Largest radius (in-process mode)
    #[arg(long)]
    pub hmax: Option<usize>,
    #[command(flatten)]
    pub sketch: SketchArgs,
    /// Source set: `all`, `list:1,2,3`, or `file:PATH`
    #[arg(long, default_value = "all")]
    pub sources: String,
    /// Approximate table (`vertex,h,estimate` CSV) to compare
    #[arg(long, requires = "exact")]
    pub approx: Option<PathBuf>,
    /// Exact table (`vertex,h,count` CSV) to compare against
    #[arg(long, requires = "approx")]
    pub exact: Option<PathBuf>,
    /// Size of the top-ranked overlap check
    #[arg(long, default_value_t = 10)]
    pub topk: usize,
    /// Write the JSON report to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub shape: ShapeArg,
    /// Vertex count (path, ring, gnp)
    #[arg(long)]
    pub n: Option<usize>,
    /// Grid rows
    #[arg(long)]
    pub rows: Option<usize>,
    /// Grid columns
    #[arg(long)]
    pub cols: Option<usize>,
    /// Edge probability (gnp)
    #[arg(long)]
    pub p: Option<f64>,
    /// Seed for the gnp generator
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum KindArg {
    Hll,
    Exact,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchedulerArg {
    /// Round-robin in ascending device order
    Rr,
    /// A fresh seeded permutation per sweep
    Random,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProgramArg {
    Anf,
    Election,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeArg {
    Path,
    Ring,
    Grid,
    Gnp,
}
