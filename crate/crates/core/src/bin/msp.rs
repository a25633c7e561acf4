use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use msp_core::experiment::{
    emit_figure_data, estimate_file, run_detection_table, run_oracle_check, run_risk_table, simulate_to_file,
    EpsilonLabel, ExperimentConfig,
};
use msp_core::MspError;

#[derive(Parser)]
#[command(name = "msp", version, about = "Adaptive signal estimation under Lévy noise")]
struct Cli {
    /// TOML experiment config; defaults reproduce the multipath study
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo replications
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// grid size p
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one observation path to CSV
    Simulate {
        /// e.g. "1/sqrt(100)"; defaults to the first configured value
        #[arg(long)]
        epsilon: Option<String>,
    },
    /// Run the estimator on a path CSV
    Estimate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Empirical risk per ε
    RiskTable,
    /// Modal signal counts of both detectors per ε
    DetectTable,
    /// Observed path, true signal and estimate on the grid
    FigureData {
        /// defaults to every configured value
        #[arg(long)]
        epsilon: Option<String>,
    },
    /// Per-candidate risks against the selected estimator
    OracleCheck {
        #[arg(long)]
        epsilon: Option<String>,
    },
}

fn labels(cfg: &ExperimentConfig, given: Option<&str>, all: bool) -> msp_core::Result<Vec<EpsilonLabel>> {
    match given {
        Some(s) => Ok(vec![s.parse()?]),
        None if all => Ok(cfg.epsilons.clone()),
        None => Ok(cfg.epsilons[..1].to_vec()),
    }
}

fn run(cli: Cli) -> msp_core::Result<()> {
    let mut cfg = match &cli.config {
        Some(file) => ExperimentConfig::load(file).map_err(|e| match e {
            MspError::Io(io) => MspError::Config(format!("{}: {io}", file.display())),
            e => e,
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.output_dir = o;
    }
    if let Some(n) = cli.reps {
        cfg.reps = n;
    }
    if let Some(p) = cli.grid {
        cfg.grid = p;
    }
    cfg.validate()?;

    match cli.command {
        Command::Simulate { epsilon } => {
            for l in labels(&cfg, epsilon.as_deref(), false)? {
                println!("{}", simulate_to_file(&cfg, &l)?.display());
            }
        }
        Command::Estimate { input } => println!("{}", estimate_file(&cfg, &input)?.display()),
        Command::RiskTable => {
            println!("epsilon_label,R_bar,R_bar_rel");
            for row in run_risk_table(&cfg)? {
                println!("{},{},{}", row.label, row.report.r_bar, row.report.r_bar_rel);
            }
        }
        Command::DetectTable => {
            println!("epsilon,q_hat_1_mode,q_hat_2_mode");
            for row in run_detection_table(&cfg)? {
                println!("{},{},{}", row.label, row.q_hat_1_mode, row.q_hat_2_mode);
            }
        }
        Command::FigureData { epsilon } => {
            for l in labels(&cfg, epsilon.as_deref(), true)? {
                println!("{}", emit_figure_data(&cfg, &l)?.display());
            }
        }
        Command::OracleCheck { epsilon } => {
            for l in labels(&cfg, epsilon.as_deref(), false)? {
                let c = run_oracle_check(&cfg, &l)?;
                println!(
                    "{}: risk_star={} bound={} oracle_ratio={} holds={}",
                    l,
                    c.report.risk_star,
                    c.bound,
                    c.report.oracle_ratio,
                    c.holds()
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                MspError::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
