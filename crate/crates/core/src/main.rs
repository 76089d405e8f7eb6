use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use yamabe_lab::runner::{
    convergence_sweep, output_root, run, write_orders_csv, CaseSpec, ExperimentConfig,
};
use yamabe_lab::theorem::{verify_theorem_b, Case, VerifyOptions};
use yamabe_lab::{LabError, Result};

#[derive(Parser)]
#[command(
    name = "yamabe-lab",
    version,
    about = "Relative Yamabe constants under boundary-value Ricci flow"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every case and exponent of a config and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output root; defaults to the config's `out`, then $YAMABE_LAB_OUT.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (all cores by default).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Observed convergence orders over successive halvings.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the evolution formula for one named case and print the report.
    Verify {
        /// cylinder, hemisphere or perturbed_cylinder.
        #[arg(long)]
        case: String,
        #[arg(long)]
        p: f64,
        /// Time step of the rate difference; 1e-4 / max |R| by default.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long = "N", default_value_t = 128)]
        intervals: usize,
    },
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| LabError::io(path, e))
}

fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run { config, out, jobs } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            let root = output_root(out.as_deref(), &cfg);
            let summary = run(&cfg, &root, jobs)?;
            for r in summary.reports() {
                println!(
                    "{:<20} p = {:<8} lhs = {:>14.8} rhs = {:>14.8} rel_error = {:.3e} {}",
                    r.case,
                    r.p,
                    r.lhs_fd,
                    r.rhs_total,
                    r.rel_error,
                    if r.passed { "PASS" } else { "FAIL" }
                );
            }
            for c in &summary.cases {
                for e in &c.errors {
                    eprintln!("{}: {e}", c.name);
                }
            }
            println!("summary written to {}", root.join("summary.md").display());
            Ok(summary.exit_code() as u8)
        }
        Command::Sweep {
            config,
            levels,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = convergence_sweep(&cfg, levels)?;
            let root = output_root(out.as_deref(), &cfg);
            create_dir(&root)?;
            let path = root.join("orders.csv");
            let file = fs::File::create(&path).map_err(|e| LabError::io(&path, e))?;
            write_orders_csv(&rows, file)?;
            write_orders_csv(&rows, std::io::stdout())?;
            Ok(0)
        }
        Command::Verify {
            case,
            p,
            dt,
            n,
            intervals,
        } => {
            let case = Case::new(CaseSpec::Named(case).geometry()?, n, intervals);
            let report = verify_theorem_b(&case, p, dt, &VerifyOptions::default())?;
            println!("{}", report.to_json()?);
            Ok(u8::from(report.trusted && !report.passed))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
