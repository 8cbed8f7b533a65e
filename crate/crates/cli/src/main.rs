use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use easp_cli::catalog::CATALOG;
use easp_cli::experiment::{run_file, Overrides};
use easp_core::harness::oracles::{run_suite, SUITES};

#[derive(Parser)]
#[command(
    name = "easp",
    version,
    about = "Seeded experiments for eventually-almost-surely correct predictors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        file: PathBuf,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Print every predictor, model and loss identifier.
    List,
    /// Run a brute-force check suite.
    Oracle {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

const USAGE: u8 = 2;

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("EASP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| format!("EASP_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(USAGE);
    }
    match cli.command {
        Command::Run {
            file,
            trials,
            horizon,
            out,
        } => match run_file(&file, &Overrides { trials, horizon }, &out) {
            Ok(run) => {
                for (id, m) in &run.report.models {
                    let status = if m.pass { "pass" } else { "FAIL" };
                    println!(
                        "{id}: {status} settled={:.4} stopped={:.4} mean_loss={:.3} {}",
                        m.settled_fraction,
                        m.stopped_fraction,
                        m.mean_cumulative_loss,
                        m.failures.join("; ")
                    );
                }
                println!("wrote {}", run.manifest.summary_json);
                println!("wrote {}", run.manifest.trials_csv);
                println!("wrote {}", run.manifest_path.display());
                ExitCode::from(u8::from(!run.report.pass))
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(USAGE)
            }
        },
        Command::List => {
            for e in CATALOG {
                let params = if e.params.is_empty() { "-" } else { e.params };
                println!("{:<9} {:<20} [{}] {}", e.category.label(), e.id, params, e.note);
            }
            println!("{} entries", CATALOG.len());
            ExitCode::SUCCESS
        }
        Command::Oracle { suite, seed } => match run_suite(&suite, seed) {
            Ok(report) => {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
                ExitCode::from(u8::from(!report.pass()))
            }
            Err(_) => {
                eprintln!("error: unknown suite `{suite}`; expected one of {}", SUITES.join(", "));
                ExitCode::from(USAGE)
            }
        },
    }
}
