use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pima::harness::{run_campaign, CampaignConfig, ProtocolSpec};
use pima::scheduling::L2Table;

#[derive(Parser)]
#[command(name = "pima-sim", version, about = "PIMA and baseline MAC simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign described by a JSON file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Restrict to these protocols (repeatable).
        #[arg(long)]
        protocol: Vec<ProtocolSpec>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the optimal data-slot count for each estimate as CSV.
    Table {
        #[arg(long)]
        nu_max: usize,
        #[arg(long, default_value_t = 50)]
        users: usize,
    },
    /// Run the exhaustive self-checks.
    Validate,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> pima::Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            config,
            protocol,
            seed,
            out,
        } => {
            let mut cfg = CampaignConfig::load(&config)?;
            if !protocol.is_empty() {
                cfg.protocols = protocol;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if out.is_some() {
                cfg.out = out;
            }
            let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let result = run_campaign(&cfg)?;
            result.write_to_dir(&dir)?;
            eprintln!(
                "wrote {} points to {}",
                result.points.len(),
                dir.join("results.csv").display()
            );
        }
        Command::Table { nu_max, users } => {
            if users == 0 {
                return Err(pima::Error::InvalidParameter(
                    "users must be positive".into(),
                ));
            }
            let table = L2Table::build(users);
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            w.write_record(["nu", "l2_star", "eta_star"])?;
            for (nu, l2, eta) in table.rows().take_while(|r| r.0 <= nu_max) {
                w.write_record([nu.to_string(), l2.to_string(), format!("{eta:.12}")])?;
            }
            w.flush()?;
        }
        Command::Validate => {
            let checks = pima::oracle::validate();
            let mut ok = true;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
                ok &= c.passed;
            }
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
