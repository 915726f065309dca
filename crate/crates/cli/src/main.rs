mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Modular assembly, position-dependent coupling and model-order reduction
/// of spring-coupled flexible subsystems.
///
/// Exit status: 0 on success, 1 for invalid input, 2 for numerical failures
/// (singular solves, unattainable accuracy, failed verification).
#[derive(Parser, Debug)]
#[command(name = "modlink", version)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the stage bench as a manifest plus Matrix Market files.
    Gen(GenArgs),
    /// Build the interconnection matrices at each operating point.
    Assemble(AssembleArgs),
    /// Closed-loop FRF tables over operating points, using the FRF cache.
    Sweep(SweepArgs),
    /// Reduce subsystems and write a reduced manifest with the bases.
    Reduce(ReduceArgs),
    /// Find minimal subsystem orders meeting a relative-error threshold.
    Search(SearchArgs),
    /// Relative-error report of a reduced manifest against the full one.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Operating points: `grid:lo:hi:n[,lo:hi:n]` or `d1,d2;d1,d2;...`.
    /// Defaults to the manifest's list.
    #[arg(long)]
    ops: Option<String>,
    /// Frequency grid in Hz, `min:max:count[:log|lin]`. Defaults to the
    /// manifest's grid.
    #[arg(long)]
    freq: Option<String>,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Add the third stage (two interfaces, two offsets).
    #[arg(long)]
    top_stage: bool,
    /// Write the reference model with a port at every interface node instead.
    #[arg(long = "static")]
    static_model: bool,
    /// Virtual points per side of the base interface.
    #[arg(long, default_value_t = 5)]
    n_v: usize,
    /// Virtual points on the top stage.
    #[arg(long, default_value_t = 3)]
    top_n_v: usize,
    /// Scales every beam's bending stiffness.
    #[arg(long, default_value_t = 1.0)]
    stiffness_scale: f64,
    /// Spring stiffness (N/m).
    #[arg(long)]
    spring_stiffness: Option<f64>,
    /// Modal damping ratio of every stage.
    #[arg(long)]
    zeta: Option<f64>,
}

#[derive(Args, Debug)]
struct AssembleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Output directory for `sweep.csv` and `sweep.json`.
    #[arg(long)]
    out: PathBuf,
    /// `output/input` label pairs, or `all`.
    #[arg(long)]
    entries: Option<String>,
    /// Write frequencies as `f / F_REF` and magnitudes relative to each
    /// entry's peak. Presentation only.
    #[arg(long, value_name = "F_REF")]
    normalize: Option<f64>,
    /// FRF cache directory (default: `.modlink-cache` next to the manifest).
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, conflicts_with = "cache")]
    no_cache: bool,
}

#[derive(Args, Debug)]
struct ReductionArgs {
    /// `bt|cb|hh` for every subsystem, or `name=bt|cb|hh|full`; repeatable.
    #[arg(long, required = true)]
    method: Vec<String>,
    /// Largest admissible relative error.
    #[arg(long, default_value_t = modlink::mor::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Relative magnitude below which frequencies are not compared.
    #[arg(long, default_value_t = modlink::mor::DEFAULT_FLOOR)]
    floor: f64,
    /// `output/input` label pairs checked, or `all`.
    #[arg(long)]
    entries: Option<String>,
    /// Add frequencies around the resonances of the full model.
    #[arg(long)]
    refine: bool,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    reduction: ReductionArgs,
    /// Fixed orders `name=N` (states for BT, DOFs for CB/HH). Subsystems
    /// without one get the order found by the search.
    #[arg(long)]
    order: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    reduction: ReductionArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Reference model.
    #[command(flatten)]
    model: ModelArgs,
    /// Model compared against the reference (same external ports).
    #[arg(long)]
    reduced: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    entries: Option<String>,
    #[arg(long, default_value_t = modlink::mor::DEFAULT_FLOOR)]
    floor: f64,
    /// Fail (exit 2) when the error reaches this value.
    #[arg(long)]
    threshold: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Assemble(a) => commands::assemble(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Reduce(a) => commands::reduce(a),
        Command::Search(a) => commands::search(a),
        Command::Compare(a) => commands::compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = String::new();
            for cause in e.chain() {
                let text = cause.to_string();
                if !msg.contains(&text) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&text);
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
