use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isac_core::harness::{
    self, ambiguity_table_csv, derive_seed, run_selfcheck, run_sense, sweep_csv, CheckStatus, ScenarioConfig,
    SelfcheckOptions,
};
use isac_core::{IsacError, ProfileKind};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_SELFCHECK: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "isac", version, about = "OFDM sensing and communication link simulator")]
struct Cli {
    /// Scenario file with flat `key=value` lines; missing keys take defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides `seeds.master_seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Directory for CSV outputs; stdout when absent.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for sweeps. Never changes output bytes.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the two-way range ambiguity interval for each SCS and comb size.
    AmbiguityTable,
    /// Run one sensing slot batch and estimate target ranges and velocities.
    Sense {
        /// Overrides `estimator.algorithm` (prs_only, alg1, alg2).
        #[arg(long)]
        algorithm: Option<String>,
        /// Sets the sensing amplitude; the communication share is derived.
        #[arg(long, value_name = "A")]
        sqrt_gamma_s: Option<f64>,
        /// Also write every nonzero RE of the transmitted grid.
        #[arg(long)]
        dump_grid: bool,
    },
    /// Monte-Carlo BER sweep over power splits and comb sizes.
    SweepPower {
        /// Comma-separated communication amplitudes; defaults to `sweep.sqrt_gamma_c`.
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        sqrt_gamma_c: Option<Vec<f64>>,
    },
    /// Run the fast invariant suite.
    Selfcheck {
        #[arg(long, hide = true, value_delimiter = ',')]
        stagger_override: Option<Vec<usize>>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
    Selfcheck,
}

impl From<IsacError> for Failure {
    fn from(e: IsacError) -> Self {
        match e {
            IsacError::Config { .. } | IsacError::Parse { .. } | IsacError::Overlap { .. } => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, name: &str, body: &str) -> Result<(), Failure> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            log::info!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn cmd_sense(
    cli: &Cli,
    algorithm: Option<&str>,
    sqrt_gamma_s: Option<f64>,
    dump_grid: bool,
) -> Result<(), Failure> {
    let mut cfg = load_config(cli)?;
    if let Some(name) = algorithm {
        cfg.algorithm = match name {
            "prs_only" => ProfileKind::PrsOnly,
            "alg1" => ProfileKind::Alg1,
            "alg2" => ProfileKind::Alg2,
            other => {
                return Err(Failure::Config(format!(
                    "invalid estimator.algorithm: `{other}` (prs_only, alg1, alg2)"
                )))
            }
        };
    }
    if let Some(a) = sqrt_gamma_s {
        let split = isac_core::PowerSplit::from_sqrt_gamma_s(a)?;
        cfg.gamma_s = split.gamma_s();
        cfg.gamma_c = split.gamma_c();
    }
    if cli.seed.is_some() {
        cfg.payload_seed = derive_seed(cfg.master_seed, 0, 0);
        cfg.noise_seed = derive_seed(cfg.master_seed, 0, 1);
    }
    cfg.validate()?;
    let out = run_sense(&cfg)?;
    if let Some(dir) = cli.out.as_deref() {
        emit(Some(dir), "range_profile.csv", &out.range_profile.normalized().to_csv())?;
        emit(Some(dir), "velocity_profile.csv", &out.velocity_profile.normalized().to_csv())?;
        if dump_grid {
            emit(Some(dir), "grid.csv", &out.grid.dump_csv())?;
        }
    }
    println!("{}", out.summary());
    Ok(())
}

fn cmd_sweep(cli: &Cli, sqrt_gamma_c: Option<&[f64]>) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let list = sqrt_gamma_c.unwrap_or(&cfg.sweep_sqrt_gamma_c).to_vec();
    let points = match cli.threads {
        Some(n) => harness::sweep_power_with_threads(&cfg, &list, n.max(1))?,
        None => harness::sweep_power(&cfg, &list)?,
    };
    emit(cli.out.as_deref(), "ber_sweep.csv", &sweep_csv(&points))
}

fn cmd_selfcheck(stagger_override: Option<&[usize]>) -> Result<(), Failure> {
    let opts = SelfcheckOptions {
        stagger_override: stagger_override.map(<[usize]>::to_vec),
    };
    let started = std::time::Instant::now();
    let report = run_selfcheck(&opts);
    for o in &report {
        println!("{o}");
    }
    let failed = report.iter().filter(|o| o.status == CheckStatus::Fail).count();
    println!(
        "selfcheck: {} checks, {failed} failed, {:.2}s",
        report.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        Err(Failure::Selfcheck)
    } else {
        Ok(())
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::AmbiguityTable => emit(cli.out.as_deref(), "ambiguity_table.csv", &ambiguity_table_csv()),
        Command::Sense {
            algorithm,
            sqrt_gamma_s,
            dump_grid,
        } => cmd_sense(cli, algorithm.as_deref(), *sqrt_gamma_s, *dump_grid),
        Command::SweepPower { sqrt_gamma_c } => cmd_sweep(cli, sqrt_gamma_c.as_deref()),
        Command::Selfcheck { stagger_override } => cmd_selfcheck(stagger_override.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Selfcheck) => ExitCode::from(EXIT_SELFCHECK),
    }
}
