use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use aos::config::ExperimentConfig;
use aos::output::{self, Manifest};
use aos::{run_batch, CliError, Result, Schedule};
use aos_core::processes::{builtin_setups, ModelType};
use aos_core::strategies::parse_strategy_list;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aos", version, about = "Active output selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Built-in synthetic setups.
    Setups {
        #[command(subcommand)]
        command: SetupsCommand,
    },
    /// Run all strategies on the Jura heavy-metal table.
    Jura {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Rebuild summary, savings and plot from a result directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum SetupsCommand {
    List,
}

#[derive(Args)]
struct Overrides {
    /// Comma-separated strategy tags, e.g. sq,rr,g,cvh,sf.
    #[arg(long)]
    strategies: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Execute runs one after another instead of on all cores.
    #[arg(long)]
    sequential: bool,
}

impl Overrides {
    fn apply(&self, config: &mut ExperimentConfig) -> Result<()> {
        if let Some(list) = &self.strategies {
            config.strategies = parse_strategy_list(list).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(runs) = self.runs {
            config.runs = runs;
        }
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        config.validate()
    }

    fn schedule(&self) -> Schedule {
        if self.sequential {
            Schedule::Sequential
        } else {
            Schedule::Parallel
        }
    }
}

fn execute(config: &ExperimentConfig, schedule: Schedule) -> Result<()> {
    let done = AtomicUsize::new(0);
    let total = config.runs;
    let progress = |_run: usize| {
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        eprintln!("[{n}/{total}] runs finished");
    };
    let outcome = run_batch(config, schedule, &progress)?;
    for f in &outcome.failures {
        let strategy = f.strategy.map_or("all strategies", |k| k.tag());
        eprintln!("run {} ({strategy}) failed: {}", f.run, f.message);
    }
    if let Some(e) = outcome.all_failed() {
        return Err(e.into());
    }
    let manifest = Manifest::new(config, &outcome, outcome.dim, outcome.output_names.clone());
    let written = output::write_all(&config.output_dir, &manifest, &outcome.records)?;
    print_result(&written);
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(aos_core::AosError::Numerical(format!("{} run(s) failed", outcome.failures.len())).into())
    }
}

fn print_result(written: &output::Written) {
    let s = &written.summary;
    println!("{:<8}{:>12}{:>12}", "strategy", "mean@end", "std@end");
    for c in &s.curves {
        println!("{:<8}{:>12.5}{:>12.5}", c.strategy.tag(), c.mean.last().unwrap(), c.std.last().unwrap());
    }
    if !written.savings.is_empty() {
        let reference = s.curves.iter().map(|c| c.strategy).find(|k| written.savings.iter().all(|(t, _)| t != k));
        if let Some(reference) = reference {
            print!("{}", output::format_savings(reference, &written.savings));
        }
    }
    for f in &written.files {
        println!("wrote {}", f.display());
    }
}

fn list_setups() {
    for s in builtin_setups() {
        println!("{} (inputs: {})", s.name, s.dim);
        for (m, o) in s.outputs.iter().enumerate() {
            let kind = match o.model_type {
                ModelType::Sigmoid => "sigmoid",
                ModelType::Polynomial => "polynomial",
                ModelType::SigmoidWithSteps => "sigmoid with steps",
            };
            println!(
                "  y{}: {kind:<20} complexity {:<3} noise {:<3} (SNR {})",
                m + 1,
                o.complexity.symbol(),
                o.noise.symbol(),
                o.noise.snr()
            );
        }
    }
}

fn report(dir: &Path) -> Result<()> {
    let manifest = Manifest::read(dir)?;
    let records = output::read_records(&dir.join(output::RECORDS_FILE), manifest.dim, &manifest.outputs)?;
    let written = output::write_reports(dir, &records, &manifest.problem)?;
    print_result(&written);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides } => {
            let mut c = ExperimentConfig::load(&config)?;
            overrides.apply(&mut c)?;
            execute(&c, overrides.schedule())
        }
        Command::Setups { command: SetupsCommand::List } => {
            list_setups();
            Ok(())
        }
        Command::Jura { data, overrides } => {
            let table = aos::jura_io::load_jura(&data)?;
            eprintln!("{}: {} samples, metals {}", data.display(), table.len(), table.metals.join(", "));
            let mut c = ExperimentConfig::jura(data);
            c.output_dir = PathBuf::from("results/jura");
            overrides.apply(&mut c)?;
            execute(&c, overrides.schedule())
        }
        Command::Report { input } => report(&input),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
