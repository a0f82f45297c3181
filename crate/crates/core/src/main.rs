use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gridsched::pipeline::{exit_code, run_pipeline, Mode, PipelineArgs};

#[derive(Parser)]
#[command(name = "gridsched", version, about = "Stochastic day-ahead microgrid scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PerScenario,
    Expected,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, reduce, optimize and write every artifact.
    Run {
        /// Case file, or `case33` for the bundled case.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        scenarios: usize,
        #[arg(long, default_value_t = 10)]
        reduce: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value = "per-scenario")]
        mode: ModeArg,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        swarm: usize,
        #[arg(long, default_value_t = 500)]
        iters: usize,
    },
}

fn init_threads() {
    let Ok(v) = std::env::var("GRIDSCHED_THREADS") else { return };
    match v.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("warning: could not size thread pool: {e}");
            }
        }
        _ => eprintln!("warning: ignoring GRIDSCHED_THREADS={v}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let Command::Run { config, scenarios, reduce, seed, mode, out, swarm, iters } = cli.command;
    let args = PipelineArgs {
        config,
        scenarios,
        reduce,
        seed,
        mode: match mode {
            ModeArg::PerScenario => Mode::PerScenario,
            ModeArg::Expected => Mode::Expected,
        },
        out,
        swarm,
        iters,
    };
    match run_pipeline(&args) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            println!();
            for p in &outcome.profits {
                println!(
                    "scenario {:>3}  p = {:.4}  profit = {:>10.2}  violation = {:.3e}",
                    p.scenario, p.probability, p.profit, p.violation
                );
            }
            println!("best scenario: {}", outcome.best);
            println!("expected profit: {:.2}", outcome.expected_profit);
            if outcome.best_violation > 0.0 {
                eprintln!(
                    "warning: reported schedule violates constraints (total violation {:.3e})",
                    outcome.best_violation
                );
            }
            println!("artifacts written to {}", args.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
