use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use netrobust_core::StepGraphon;
use netrobust_driver::{eg1_state, kl_between, run_experiment, run_radius_search, sample_graphs, CliError, ExperimentConfig, Overrides};

/// Worst-case robustness of graph-feature inference in a KL ball of step graphons.
#[derive(Parser)]
#[command(name = "netrobust", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Anneal over replicates and write traces, scores and tables.
    Run(RunArgs),
    /// Find the smallest radius at which the center is not robust.
    RadiusSearch(RunArgs),
    /// Walk perturb/rescale moves from a flat graphon and save the state.
    MakeEg1 {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 100)]
        moves: usize,
        /// Perturb concentration (default n²).
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long, default_value_t = netrobust_core::neighborhood::DEFAULT_DELTA)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Divergence KL(center ‖ model) between two step-graphon files.
    Kl {
        center: PathBuf,
        model: PathBuf,
        /// Use the point-pattern Monte Carlo estimate.
        #[arg(long)]
        mc: bool,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample graphs from a step-graphon file as edge lists.
    Sample {
        model: PathBuf,
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; one `graph_<k>.txt` per sample.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    method: Option<u8>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides { seed: self.seed, out: self.out.clone(), replicates: self.replicates, method: self.method });
        Ok(cfg)
    }
}

fn read_model(path: &Path) -> Result<StepGraphon, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    StepGraphon::from_text(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_out(out: &mut (dyn Write + Send), text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::io("stdout", e))
}

fn execute(command: Command, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match command {
        Command::Run(args) => {
            let dir = run_experiment(&args.load()?)?;
            write_out(out, &format!("{}\n", dir.display()))?;
        }
        Command::RadiusSearch(args) => {
            let dir = run_radius_search(&args.load()?)?;
            write_out(out, &format!("{}\n", dir.display()))?;
        }
        Command::MakeEg1 { n, p, moves, kappa, delta, seed, out: path } => {
            let kappa = kappa.unwrap_or((n * n) as f64);
            let w = eg1_state(n, p, moves, kappa, delta, seed).map_err(|e| CliError::Config(e.to_string()))?;
            std::fs::write(&path, w.to_text()).map_err(|e| CliError::io(&path, e))?;
        }
        Command::Kl { center, model, mc, points, reps, seed } => {
            let (a, b) = (read_model(&center)?, read_model(&model)?);
            let k = kl_between(&a, &b, mc.then_some((points, reps)), seed)?;
            write_out(out, &format!("kl,std_error\n{},{}\n", k.value, k.std_error))?;
        }
        Command::Sample { model, nodes, count, seed, out: dir } => {
            let w = read_model(&model)?;
            let graphs = sample_graphs(&w, nodes, count, seed).map_err(|e| CliError::Config(e.to_string()))?;
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            for (k, g) in graphs.iter().enumerate() {
                let path = dir.join(format!("graph_{k:04}.txt"));
                std::fs::write(&path, g.to_text()).map_err(|e| CliError::io(&path, e))?;
            }
        }
    }
    Ok(())
}

/// Parses and runs one command; returns the process exit code.
fn run<I, T>(args: I, out: &mut (dyn Write + Send)) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors; --help and --version are not
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Config(format!("field `threads`: {e}")))
            .and_then(|pool| pool.install(|| execute(cli.command, out))),
        None => execute(cli.command, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("netrobust: {e}");
            e.exit_code() as u8
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os(), &mut std::io::stdout()))
}
