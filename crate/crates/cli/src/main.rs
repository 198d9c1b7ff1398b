use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mxlearn::estimators::estimate_constants;
use mxlearn::harness::{
    fit_loglog_slope, parse_config_with_base, preset, read_gap_series, reference_optimum,
    run_experiment, timing_report, Algorithm, ExperimentConfig, DEFAULT_TOLERANCE,
};
use mxlearn::optimizers::{heuristic_constants, validate_policy, PolicyMode};
use mxlearn::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Matrix exponential learning experiments for MIMO uplinks.
#[derive(Parser)]
#[command(name = "mxlearn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration used as the base; keys in --config override it.
    #[arg(long)]
    preset: Option<String>,
}

impl ConfigArgs {
    fn load(&self) -> mxlearn::Result<ExperimentConfig> {
        let base = self.preset.as_deref().map(preset).transpose()?;
        match (&self.config, base) {
            (Some(path), base) => parse_config_with_base(path, base),
            (None, Some(cfg)) => Ok(cfg),
            (None, None) => Err(Error::InvalidConfig {
                field: "config".into(),
                reason: "pass --config, --preset or both".into(),
            }),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured algorithm and seed, writing CSVs and a summary.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Replace the configured seeds by this single seed.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the configured step policies against the convergence conditions.
    ValidatePolicy {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Samples used to estimate the Lipschitz constants.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Compute the optimal sum rate of the configured instance.
    Reference {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Fit the log-log slope of the ergodic gap in a trajectory CSV.
    Slope {
        #[arg(long)]
        csv: PathBuf,
        /// Fit window as `LO,HI`.
        #[arg(long, value_parser = parse_window)]
        window: (f64, f64),
    },
    /// Per-iteration wall-clock time per algorithm and receiver size.
    Timing {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated receive antenna counts.
        #[arg(long, value_delimiter = ',', required = true)]
        antennas: Vec<usize>,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if !(lo < hi) {
        return Err("LO must be below HI".into());
    }
    Ok((lo, hi))
}

fn mode_of(a: Algorithm) -> Option<PolicyMode> {
    match a {
        Algorithm::Mxl0 => Some(PolicyMode::Mxl0Asymptotic),
        Algorithm::Mxl0Plus => Some(PolicyMode::Mxl0Plus),
        Algorithm::Amxl0Plus => Some(PolicyMode::Amxl0Plus),
        _ => None,
    }
}

fn execute(cmd: Command) -> mxlearn::Result<bool> {
    match cmd {
        Command::Run {
            cfg,
            seed_override,
            out,
        } => {
            let mut cfg = cfg.load()?;
            if let Some(s) = seed_override {
                cfg.seeds = vec![s];
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            let s = run_experiment(&cfg)?;
            println!("r_star = {}", s.reference.value);
            for &a in &cfg.algorithms {
                let gap = s.median_final_gap(a).unwrap_or(f64::NAN);
                match s.median_slope(a) {
                    Some(sl) => println!("{a}: median final gap {gap:.6e}, median slope {sl:.3}"),
                    None => println!("{a}: median final gap {gap:.6e}"),
                }
            }
            println!("wrote {} runs and {}", s.runs.len(), s.summary_path.display());
            Ok(true)
        }
        Command::ValidatePolicy { cfg, samples } => {
            let cfg = cfg.load()?;
            let ch = cfg.channels()?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.channel_seed);
            let constants = estimate_constants(&ch, samples, &mut rng)?;
            println!("estimated L = {} (empirical lower bound)", constants.rate_lipschitz);
            if let Ok((g, d)) = heuristic_constants(&constants, cfg.antennas()) {
                println!("heuristic horizon_sqrt constants: gamma0 = {g:.4}, delta0 = {d:.4}");
            }
            let mut ok = true;
            for &a in &cfg.algorithms {
                let Some(mode) = mode_of(a) else {
                    continue;
                };
                let report = validate_policy(&cfg.step_policy(a), cfg.antennas(), mode, Some(&constants));
                println!("[{a}]");
                print!("{report}");
                ok &= report.is_feasible();
            }
            Ok(ok)
        }
        Command::Reference { cfg } => {
            let cfg = cfg.load()?;
            let r = reference_optimum(&cfg.channels()?, DEFAULT_TOLERANCE)?;
            println!("r_star = {}", r.value);
            println!("iwf = {} ({} rounds)", r.iwf, r.iwf_rounds);
            if let Some(m) = r.mxl {
                println!("mxl = {m}");
            }
            println!("consistent = {}", r.consistent);
            Ok(true)
        }
        Command::Slope { csv, window } => {
            let series = read_gap_series(&csv)?;
            println!("{}", fit_loglog_slope(&series, window)?);
            Ok(true)
        }
        Command::Timing { cfg, antennas } => {
            let cfg = cfg.load()?;
            println!("algorithm,rx_antennas,iterations,mean_ns,median_ns");
            for r in timing_report(&cfg, &antennas)? {
                println!(
                    "{},{},{},{:.0},{:.0}",
                    r.algorithm, r.rx_antennas, r.iterations, r.mean_ns, r.median_ns
                );
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
