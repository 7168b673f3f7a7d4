use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use psdyn_cli::{run, sweep_hbar, CliError, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "psdyn",
    version,
    about = "Phase-space semiclassical propagation scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// output directory, overriding output.directory of the config
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// worker threads, 0 picks the number of cores
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// reserved; every computation is deterministic
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// compute every configured method at every configured time
    Run { config: PathBuf },
    /// measure how the beam phase error scales with hbar
    SweepHbar {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        hbars: Vec<f64>,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Validation(format!("threads: {e}")))?;
    }
    let _ = cli.seed;
    let path = match &cli.command {
        Command::Run { config } | Command::SweepHbar { config, .. } => config,
    };
    let scenario = ScenarioConfig::load(path)?.validate()?;
    let out = cli
        .out_dir
        .clone()
        .unwrap_or_else(|| scenario.config.output.directory.clone());
    match cli.command {
        Command::Run { .. } => {
            let summary = run(&scenario, &out)?;
            for f in &summary.fields {
                match &f.error {
                    Some(e) => println!("{:<9} t={:<6} FAILED {e}", f.method, f.t),
                    None => println!("{:<9} t={:<6} {:>10.1} ms", f.method, f.t, f.runtime_ms),
                }
            }
            for c in &summary.comparisons {
                println!(
                    "{} vs {} t={}: rel_l2={:.3e} sup={:.3e} phase_sup={:.3e}",
                    c.method_a, c.method_b, c.t, c.rel_l2, c.sup, c.phase_sup
                );
            }
            println!("report written to {}", out.join("report.toml").display());
            if let Some(e) = summary.failure() {
                return Err(CliError::Numerical(e.to_string()));
            }
        }
        Command::SweepHbar { hbars, .. } => {
            let report = sweep_hbar(&scenario, &hbars, &out)?;
            println!("{:>6} {:>8} {:>12} {:>8}", "t", "hbar", "D", "ratio");
            for r in &report.rows {
                let ratio = r.ratio.map_or("-".to_string(), |x| format!("{x:.3}"));
                println!(
                    "{:>6} {:>8} {:>12.4e} {:>8}",
                    r.t, r.hbar, r.discrepancy, ratio
                );
            }
            println!("{}", if report.pass { "PASS" } else { "FAIL" });
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
