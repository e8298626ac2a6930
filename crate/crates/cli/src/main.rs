use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tensopt_cli::commands::{self, Format, SearchArgs};
use tensopt_cli::exit;
use tensopt_search::BeamParams;

#[derive(Parser)]
#[command(name = "tensopt", version, about = "LLM-guided kernel optimization for a systolic-array accelerator")]
struct Cli {
    /// Worker threads for evaluation and concurrent LLM requests (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log search progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run a kernel once and print its performance report.
    Simulate {
        kernel: PathBuf,
        #[arg(short, long)]
        config: PathBuf,
        /// Run the timing model; without it only functional results are computed.
        #[arg(long)]
        timed: bool,
        /// Seed of the random inputs.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check a kernel against the workload's reference oracle.
    Verify {
        kernel: PathBuf,
        #[arg(short, long)]
        config: PathBuf,
        /// Functional and timed trial counts, e.g. `5,20`.
        #[arg(long, value_parser = parse_pair)]
        trials: Option<(usize, usize)>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the beam search from the configured start kernel.
    Optimize {
        #[arg(short, long)]
        config: PathBuf,
        /// Output directory (overrides `output_dir`).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Replay a recorded schedule, then refine.
    Reuse {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        /// Full search iterations after the replay.
        #[arg(long, default_value_t = 0)]
        refine: usize,
        /// Beam width, plans per member and code samples per plan during the replay.
        #[arg(long, value_parser = parse_triple, default_value = "2,2,2")]
        beam: (usize, usize, usize),
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Summarize a search trace.
    Report {
        trace: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        /// Compare against a second (reuse) trace at matched call budgets.
        #[arg(long)]
        iso: Option<PathBuf>,
    },
}

fn numbers(s: &str, n: usize) -> Result<Vec<usize>, String> {
    let v: Vec<usize> = s.split(',').map(|x| x.trim().parse::<usize>().map_err(|e| format!("'{x}': {e}"))).collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers"));
    }
    Ok(v)
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    numbers(s, 2).map(|v| (v[0], v[1]))
}

fn parse_triple(s: &str) -> Result<(usize, usize, usize), String> {
    numbers(s, 3).map(|v| (v[0], v[1], v[2]))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.verbose { "info" } else { "warn" })).init();
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
        log::warn!("could not size the worker pool: {e}");
    }
    let mut stdout = std::io::stdout().lock();
    let out = &mut stdout;
    let result = match cli.command {
        Command::Simulate { kernel, config, timed, seed } => commands::simulate(&kernel, &config, timed, seed, out),
        Command::Verify { kernel, config, trials, seed } => commands::verify(&kernel, &config, trials, seed, out),
        Command::Optimize { config, out: dir } => commands::optimize(&SearchArgs { config: &config, out_dir: dir, jobs }, out),
        Command::Reuse { config, schedule, refine, beam, out: dir } => {
            let params = BeamParams { beam_width: beam.0, plans_per_element: beam.1, codes_per_plan: beam.2 };
            commands::reuse(&SearchArgs { config: &config, out_dir: dir, jobs }, &schedule, refine, params, out)
        }
        Command::Report { trace, format, iso } => {
            let format = match format {
                FormatArg::Json => Format::Json,
                FormatArg::Csv => Format::Csv,
            };
            commands::report(&trace, format, iso.as_deref(), out)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(if f.code == exit::OK { 1 } else { f.code as u8 })
        }
    }
}
