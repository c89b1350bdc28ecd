use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qnd_cli::{load_config, output_dir, run_in, summary::Summary, sweep_in, Axis, CliError};

#[derive(Parser)]
#[command(name = "qndsim", version, about = "Continuous QND monitoring checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run { config: PathBuf },
    /// Rerun a scenario over values of one axis.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

fn report(s: &Summary) {
    for c in &s.checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        if c.comparison == "reported" {
            println!("{tag} {} = {:e} (reported)", c.name, c.value);
        } else {
            println!("{tag} {} = {:e} ({} {:e})", c.name, c.value, c.comparison, c.threshold);
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<bool, CliError> = match cli.command {
        Command::Run { config } => load_config(&config).and_then(|cfg| {
            let dir = output_dir(&cfg);
            let s = run_in(&cfg, &dir)?;
            report(&s);
            println!("wrote {}", dir.join("summary.json").display());
            Ok(s.pass)
        }),
        Command::Sweep { config, axis, values } => load_config(&config).and_then(|cfg| {
            let dir = output_dir(&cfg);
            let r = sweep_in(&cfg, axis, &values, &dir)?;
            for run in &r.runs {
                println!("{} {} = {}", if run.pass { "PASS" } else { "FAIL" }, axis.name(), run.value);
            }
            if let Some(c) = r.fitted_inverse_slope {
                println!("fitted slope C = {c:e}");
            }
            println!("wrote {}", dir.join("sweep.csv").display());
            Ok(r.pass)
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed; see summary.json for residuals");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
