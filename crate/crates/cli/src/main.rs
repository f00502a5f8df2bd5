use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmconc::sampling::SamplerConfig;
use mmconc::Field;
use mmconc_cli::{dump_samples, execute, CliError, ConfigBuilder, ConfigError, Experiment};

#[derive(Parser)]
#[command(name = "mmconc", version, about = "Concentration experiments on Stiefel manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment and write `<out>/<experiment>.csv`.
    Run(Box<RunArgs>),
    /// Parse a config file, echo the resolved values and report warnings.
    Validate { config: PathBuf },
    /// Dump raw samples as CSV with a JSON sidecar.
    Sample(SampleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// mbdist, fullmeas, prok, lipschitz, pushforward, obsdiam, bounds or decomp-props
    experiment: String,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated list of r, c, h.
    #[arg(long)]
    field: Option<String>,
    /// Comma-separated list of matrix heights.
    #[arg(long = "N")]
    big_n: Option<String>,
    /// Column rule: const:k, power:p, powerlog:p or table:path.
    #[arg(long = "n")]
    n: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    /// Base seed; MMCONC_SEED takes precedence.
    #[arg(long)]
    seed: Option<String>,
    /// ass or condi.
    #[arg(long)]
    condition: Option<String>,
    #[arg(long)]
    a: Option<String>,
    #[arg(long = "a-prime")]
    a_prime: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    /// Retained rows for mbdist.
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long)]
    workers: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Haar,
    Gaussian,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, default_value = "r")]
    field: String,
    #[arg(long = "N")]
    big_n: usize,
    #[arg(long = "n", default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale columns to radius sqrt(N^F - 1).
    #[arg(long)]
    scaled: bool,
    #[arg(long, value_enum, default_value = "haar")]
    kind: Kind,
    #[arg(long, default_value = "samples.csv")]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

fn env_seed() -> Option<String> {
    std::env::var("MMCONC_SEED").ok().filter(|s| !s.trim().is_empty())
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let experiment: Experiment = args.experiment.parse()?;
    let mut builder = ConfigBuilder::new();
    if let Some(path) = &args.config {
        builder.load_file(path)?;
    }
    builder.next_source();
    let flags = [
        ("field", args.field),
        ("N", args.big_n),
        ("n", args.n),
        ("kappa", args.kappa),
        ("samples", args.samples),
        ("seed", args.seed),
        ("condition", args.condition),
        ("a", args.a),
        ("a_prime", args.a_prime),
        ("epsilon", args.epsilon),
        ("l", args.l),
        ("out", args.out),
        ("workers", args.workers),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            builder.set(key, &v, 0)?;
        }
    }
    if let Some(seed) = env_seed() {
        builder.set("seed", &seed, 0)?;
    }
    builder.set("experiment", experiment.name(), 0)?;
    let cfg = builder.build()?;
    let (outcome, manifest) = execute(experiment, &cfg)?;
    for line in &outcome.summaries {
        println!("{line}");
    }
    log::info!("wrote {}", manifest.display());
    Ok(())
}

fn sample(args: SampleArgs) -> Result<(), CliError> {
    let field = Field::parse(&args.field)
        .ok_or_else(|| ConfigError::invalid("field", format!("`{}` is not one of r, c, h", args.field)))?;
    let seed = match env_seed() {
        Some(s) => s
            .trim()
            .parse()
            .map_err(|_| ConfigError::invalid("seed", format!("MMCONC_SEED `{s}` is not an integer")))?,
        None => args.seed,
    };
    let cfg = SamplerConfig::new(field, args.big_n, args.n, args.scaled, seed, args.samples)
        .map_err(|e| ConfigError::invalid("sample", e.to_string()))?;
    let sidecar = dump_samples(&cfg, matches!(args.kind, Kind::Haar), &args.out, args.workers)?;
    println!(
        "sample N={} n={} field={field}: {} rows to {} (sidecar {})",
        args.big_n,
        args.n,
        args.samples,
        args.out.display(),
        sidecar.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(*args),
        Command::Validate { config } => mmconc_cli::config::validate(&config)
            .map(|report| print!("{report}"))
            .map_err(CliError::from),
        Command::Sample(args) => sample(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
