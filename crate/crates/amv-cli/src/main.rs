//! `amv`: command-line experiment runner. Every subcommand builds an
//! experiment configuration (from a JSON file or flags), runs it, and emits
//! CSV plus a JSON metadata sidecar.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 numeric failure,
//! 4 wall-time budget exhausted (partial results were still written).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use amv_core::{
    AmvError, Command, ExperimentConfig, SpaceDescriptor, Strategy, TestFunction, VolumeMode,
};

#[derive(Parser)]
#[command(name = "amv", version, about = "Spectra of the asymptotic mean value Laplacian")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Lowest eigenvalues of the operator on one instance
    Spectrum(RunArgs),
    /// Radius sweep of eigenvalues against the Laplace targets
    Converge(RunArgs),
    /// Finite-radius action on a fixed test function over a radius sweep
    L2limit(RunArgs),
    /// Compare against the exact sup-metric torus spectrum
    OracleTorus(RunArgs),
    /// Verify the cube scaling identity
    Scaling(RunArgs),
    /// Structural diagnostics (bounds, volumes, thresholds)
    Diagnostics(RunArgs),
    /// Scan the exact torus spectral gap over a radius grid
    SincScan(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceArg {
    Torus,
    Cube,
    Interval,
    Sphere,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Linf,
    Euclid,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Grid,
    Iid,
    Fibonacci,
}

#[derive(Clone, Copy, ValueEnum)]
enum VolumesArg {
    Empirical,
    Analytic,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestFunctionArg {
    NeumannCos,
    Linear,
    TorusMode,
    SphereHarmonic,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration; mutually exclusive with the
    /// space/sampling flags
    #[arg(long, conflicts_with_all = ["space", "n", "r"])]
    config: Option<PathBuf>,

    /// Model space
    #[arg(long, value_enum)]
    space: Option<SpaceArg>,

    /// Torus metric
    #[arg(long, value_enum, default_value = "linf")]
    metric: MetricArg,

    /// Dimension
    #[arg(long, default_value_t = 1)]
    m: usize,

    /// Side length for cube / interval
    #[arg(long, default_value_t = 1.0)]
    side: f64,

    /// Sample count(s), comma separated
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,

    /// Ball radius / radii, comma separated
    #[arg(long, value_delimiter = ',')]
    r: Vec<f64>,

    /// Highest eigenvalue index (indices 0..=k)
    #[arg(long, default_value_t = 5)]
    k: usize,

    /// Sampling strategy
    #[arg(long, value_enum, default_value = "grid")]
    strategy: StrategyArg,

    /// Ball volume mode
    #[arg(long, value_enum, default_value = "empirical")]
    volumes: VolumesArg,

    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Output CSV path; a `<out>.meta.json` sidecar is written next to it.
    /// Without it the CSV goes to stdout
    #[arg(long)]
    out: Option<PathBuf>,

    /// Test function for l2limit
    #[arg(long, value_enum)]
    test_function: Option<TestFunctionArg>,

    /// Frequency cutoff for sinc-scan
    #[arg(long)]
    pmax: Option<u32>,

    /// Global wall-time budget in seconds
    #[arg(long)]
    budget_secs: Option<f64>,
}

fn build_config(command: Command, args: &RunArgs) -> amv_core::Result<ExperimentConfig> {
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = ExperimentConfig::from_json(&text)?;
        cfg.command = command;
        if args.out.is_some() {
            cfg.output_path = args.out.clone();
        }
        return Ok(cfg);
    }
    let space = match args.space {
        Some(SpaceArg::Torus) => match args.metric {
            MetricArg::Linf => SpaceDescriptor::flat_torus_linf(args.m)?,
            MetricArg::Euclid => SpaceDescriptor::flat_torus_euclid(args.m)?,
        },
        Some(SpaceArg::Cube) => SpaceDescriptor::hypercube(args.m, args.side)?,
        Some(SpaceArg::Interval) => SpaceDescriptor::interval(args.side)?,
        Some(SpaceArg::Sphere) => SpaceDescriptor::sphere2(),
        None => {
            return Err(AmvError::invalid(
                "either --config or --space (with --n and --r) is required",
            ))
        }
    };
    if args.n.is_empty() || args.r.is_empty() {
        if command != Command::SincScan {
            return Err(AmvError::invalid("--n and --r are required with --space"));
        }
    }
    let cfg = ExperimentConfig {
        command,
        space,
        n: if args.n.is_empty() { vec![2] } else { args.n.clone() },
        r: if args.r.is_empty() {
            // sinc-scan default grid marker: the harness expands a single
            // radius into the full 0.01..0.99 grid
            vec![0.5]
        } else {
            args.r.clone()
        },
        k: args.k,
        strategy: match args.strategy {
            StrategyArg::Grid => Strategy::Grid,
            StrategyArg::Iid => Strategy::Iid,
            StrategyArg::Fibonacci => Strategy::Fibonacci,
        },
        seed: args.seed,
        volume_mode: match args.volumes {
            VolumesArg::Empirical => VolumeMode::Empirical,
            VolumesArg::Analytic => VolumeMode::Analytic,
        },
        output_path: args.out.clone(),
        test_function: args.test_function.map(|tf| match tf {
            TestFunctionArg::NeumannCos => TestFunction::NeumannCos,
            TestFunctionArg::Linear => TestFunction::Linear,
            TestFunctionArg::TorusMode => TestFunction::TorusMode,
            TestFunctionArg::SphereHarmonic => TestFunction::SphereHarmonic,
        }),
        pmax: args.pmax,
        budget_secs: args.budget_secs,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code_for(err: &AmvError) -> ExitCode {
    match err {
        AmvError::NumericFailure(_) | AmvError::ConvergenceFailure { .. } => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn execute(command: Command, args: &RunArgs) -> ExitCode {
    let cfg = match build_config(command, args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("amv: {e}");
            return exit_code_for(&e);
        }
    };
    let table = match amv_core::run(&cfg) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("amv: {e}");
            return exit_code_for(&e);
        }
    };
    for w in &table.metadata.warnings {
        eprintln!("amv: warning: {w}");
    }
    let written = match &cfg.output_path {
        Some(path) => table.write_csv(path),
        None => {
            print!("{}", table.csv_string());
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("amv: {e}");
        return exit_code_for(&e);
    }
    if table.metadata.truncated {
        eprintln!("amv: wall-time budget exhausted; results are partial");
        return ExitCode::from(4);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    // eigensolves stay sequential for run-to-run reproducibility;
    // AMV_THREADS caps the rayon pool used for assembly and searches
    // (element-wise parallelism there never changes results)
    faer::set_global_parallelism(faer::Par::Seq);
    if let Ok(value) = std::env::var("AMV_THREADS") {
        match value.parse::<usize>() {
            Ok(t) if t >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            _ => {
                eprintln!("amv: AMV_THREADS must be a positive integer, got {value:?}");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Spectrum(a) => execute(Command::Spectrum, a),
        Cmd::Converge(a) => execute(Command::Converge, a),
        Cmd::L2limit(a) => execute(Command::L2limit, a),
        Cmd::OracleTorus(a) => execute(Command::OracleTorus, a),
        Cmd::Scaling(a) => execute(Command::Scaling, a),
        Cmd::Diagnostics(a) => execute(Command::Diagnostics, a),
        Cmd::SincScan(a) => execute(Command::SincScan, a),
    }
}
