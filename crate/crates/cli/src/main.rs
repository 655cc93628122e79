use std::path::PathBuf;
use std::process::ExitCode;

use afm_cli::commands::{self, Execution};
use afm_cli::config::{ExperimentConfig, Overrides};
use afm_cli::error::{CliError, Result};
use afm_cli::{io, verify};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "afm",
    version,
    about = "Run, sweep and verify AFM optimizer experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config and write trajectories plus summary.json.
    Run(Common),
    /// Run the config over its `grid` block and write sweep.csv.
    Sweep(Common),
    /// Integrate the differential inclusion and write di_seed*.jsonl.
    SimulateDi(Common),
    /// Check module invariants and the acceptance criteria.
    Verify {
        /// Skip the acceptance criteria.
        #[arg(long)]
        invariants_only: bool,
        /// Also write verify.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Comma-separated seeds; replaces the config's seeds.
    #[arg(long, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Run even if the stepsize schedule fails its checks.
    #[arg(long)]
    override_schedule_check: bool,
    /// Treat optimizer warnings as errors.
    #[arg(long)]
    strict: bool,
    /// Run seeds one after another.
    #[arg(long)]
    serial: bool,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, Execution)> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            seeds: self.seed_list.clone(),
            out: self.out.clone(),
        });
        let v = cfg.validate(self.override_schedule_check, self.strict)?;
        for w in &v.warnings {
            eprintln!("warning: {w}");
        }
        if let Some(report) = v.schedule.filter(|r| !r.passed()) {
            eprintln!(
                "warning: schedule check overridden: {}",
                report.failure_names().join(", ")
            );
        }
        let exec = if self.serial {
            Execution::Serial
        } else {
            Execution::Parallel
        };
        Ok((cfg, exec))
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            let (cfg, exec) = c.load()?;
            let summary = commands::run(&cfg, exec)?;
            let agg = &summary.aggregate;
            println!(
                "{} runs ({} diverged) -> {}",
                agg.runs,
                agg.diverged,
                cfg.out_dir().display()
            );
            if let Some(f) = agg.median_final_f {
                println!("median final f {f:.6e}");
            }
        }
        Command::Sweep(c) => {
            let (cfg, exec) = c.load()?;
            let rows = commands::sweep(&cfg, exec)?;
            println!(
                "{} rows -> {}",
                rows.len(),
                cfg.out_dir().join("sweep.csv").display()
            );
        }
        Command::SimulateDi(c) => {
            let (cfg, exec) = c.load()?;
            for r in commands::simulate(&cfg, exec)? {
                println!(
                    "seed {} {:?} phi {:.6e} dist {:?} violations {}",
                    r.seed, r.status, r.final_phi, r.stationary_dist, r.phi_violations
                );
            }
        }
        Command::Verify {
            invariants_only,
            out,
        } => {
            let mut report = verify::Report {
                checks: verify::invariants(afm_core::clip::clip),
            };
            if !invariants_only {
                report.checks.extend(verify::acceptance());
            }
            println!("{report}");
            if let Some(dir) = out {
                io::write_json(&dir.join("verify.json"), &report)?;
            }
            if !report.passed() {
                let ids: Vec<&str> = report.failures().iter().map(|c| c.id.as_str()).collect();
                return Err(CliError::Verification(ids.join(", ")));
            }
        }
    }
    Ok(())
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
