use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use autocop::env::warehouse;
use autocop::env::EnvKind;
use autocop::harness::{self, report, ExperimentConfig, HarnessError, Metrics, Mode, Pipeline};
use autocop::trace::Trace;

#[derive(Parser)]
#[command(name = "autocop", version, about = "Generate context-oriented adaptations from learned options")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: learn, extract options, generate adaptations, evaluate.
    Run(RunArgs),
    /// Primitive learning and evaluation without adaptations.
    Baseline(RunArgs),
    /// Side-by-side comparison of two output directories (baseline first).
    Compare { baseline: PathBuf, autocop: PathBuf },
    /// Draw the path of a warehouse episode from a trace file.
    RenderPath {
        trace: PathBuf,
        /// Episode to draw; defaults to the first one in the file.
        #[arg(long)]
        episode: Option<u64>,
        /// Configuration file with the grid geometry.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["driving", "warehouse"])]
    env: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Primitive learning steps (driving).
    #[arg(long)]
    steps: Option<u64>,
    /// Primitive learning episodes (warehouse).
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_option_length: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run this many consecutive seeds in parallel.
    #[arg(long, default_value_t = 1)]
    repeat: u64,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig, HarnessError> {
        let env = match &self.env {
            Some(e) => e.parse().map_err(HarnessError::Config)?,
            None => EnvKind::Driving,
        };
        let mut c = ExperimentConfig::new(env);
        if let Some(path) = &self.config {
            c.apply_file(path)?;
        }
        if let Some(e) = &self.env {
            c.env = e.parse().map_err(HarnessError::Config)?;
        }
        c.seed = self.seed.unwrap_or(c.seed);
        c.steps = self.steps.unwrap_or(c.steps);
        c.episodes = self.episodes.unwrap_or(c.episodes);
        c.batch_size = self.batch_size.unwrap_or(c.batch_size);
        c.max_option_length = self.max_option_length.unwrap_or(c.max_option_length);
        c.out = self.out.clone().or(c.out);
        c.validate()?;
        Ok(c)
    }
}

fn run(args: &RunArgs, mode: Mode) -> Result<(), HarnessError> {
    let c = args.config()?;
    if args.repeat > 1 {
        let rows = harness::run_repeated(&c, args.repeat, mode)?;
        print!("{}", Metrics::to_csv(&rows)?);
        return Ok(());
    }
    let p = Pipeline::new(c.clone())?;
    match mode {
        Mode::Autocop => {
            let r = p.run()?;
            if let Some(dir) = &c.out {
                p.write_run(dir, &r)?;
            }
            print!("{}", report::run_summary(&c, &r));
        }
        Mode::Baseline => {
            let r = p.run_baseline()?;
            if let Some(dir) = &c.out {
                p.write_baseline(dir, &r)?;
            }
            print!("{}", report::baseline_summary(&c, &r));
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn compare(a: &Path, b: &Path) -> Result<(), HarnessError> {
    let base = Metrics::from_csv(&read(&a.join("metrics.csv"))?)?;
    let auto = Metrics::from_csv(&read(&b.join("metrics.csv"))?)?;
    let mut matched = 0;
    for m in &base {
        if let Some(n) = auto.iter().find(|n| n.seed == m.seed) {
            if base.len() > 1 {
                println!("seed {}", m.seed);
            }
            println!("{}", harness::compare_report(m, n)?);
            matched += 1;
        }
    }
    if matched == 0 {
        return Err(HarnessError::Config("no matching seeds in the two directories".into()));
    }
    Ok(())
}

fn render(trace: &Path, episode: Option<u64>, config: Option<&Path>) -> Result<(), HarnessError> {
    let mut c = ExperimentConfig::new(EnvKind::Warehouse);
    if let Some(path) = config {
        c.apply_file(path)?;
    }
    let trace = Trace::from_tsv(&read(trace)?, &warehouse::ACTIONS)
        .map_err(|e| HarnessError::Config(format!("not a warehouse trace: {e}")))?;
    let episode = episode.or_else(|| trace.records().first().and_then(|r| r.episode));
    print!("{}", harness::render_path(&trace, &c.warehouse, episode)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args, Mode::Autocop),
        Command::Baseline(args) => run(args, Mode::Baseline),
        Command::Compare { baseline, autocop } => compare(baseline, autocop),
        Command::RenderPath { trace, episode, config } => render(trace, *episode, config.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
