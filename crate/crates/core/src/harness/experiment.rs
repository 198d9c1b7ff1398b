use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::config::{Algorithm, ExperimentConfig};
use super::reference::{reference_optimum, ReferenceOptimum, DEFAULT_TOLERANCE};
use super::slope::fit_loglog_slope;
use crate::error::{Error, Result};
use crate::network::ChannelRealization;
use crate::optimizers::{
    run_amxl0_plus, run_iwf, run_mxl, run_mxl0, run_mxl0_plus, run_swf, RunStreams, StepPolicy,
    Trajectory, UpdateLaw,
};

pub const CSV_HEADER: &str = "t,realized_rate,base_rate,ergodic_rate,gap_ergodic,gamma,delta,active_users,elapsed_ns";

/// Runs one algorithm on `ch`. Water-filling schemes ignore `policy`, `law`
/// and `seed`; for iterative water-filling `iterations` caps the rounds.
pub fn run_algorithm(
    ch: &ChannelRealization,
    algorithm: Algorithm,
    policy: &StepPolicy,
    law: &UpdateLaw,
    iterations: usize,
    seed: u64,
) -> Result<Trajectory> {
    let mut streams = RunStreams::new(seed, ch.num_users());
    match algorithm {
        Algorithm::Mxl => run_mxl(ch, policy, iterations),
        Algorithm::Mxl0 => run_mxl0(ch, policy, iterations, &mut streams),
        Algorithm::Mxl0Plus => run_mxl0_plus(ch, policy, iterations, &mut streams),
        Algorithm::Amxl0Plus => run_amxl0_plus(ch, policy, law, iterations, &mut streams),
        Algorithm::Iwf => run_iwf(ch, iterations, DEFAULT_TOLERANCE),
        Algorithm::Swf => run_swf(ch, iterations),
    }
}

/// Writes a trajectory as CSV. Floats use the shortest representation that
/// parses back to the same value. `elapsed_ns` is written as 0 unless
/// `with_timing` is set.
pub fn write_csv<W: Write>(
    mut w: W,
    tr: &Trajectory,
    r_star: f64,
    report_bits: bool,
    with_timing: bool,
) -> std::io::Result<()> {
    let unit = if report_bits { std::f64::consts::LN_2 } else { 1.0 };
    writeln!(w, "{CSV_HEADER}")?;
    for (i, r) in tr.records.iter().enumerate() {
        let active = r
            .active_users
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let elapsed = if with_timing {
            tr.elapsed_ns.get(i).copied().unwrap_or(0)
        } else {
            0
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            r.realized_rate / unit,
            r.base_rate / unit,
            r.ergodic_rate / unit,
            (r_star - r.ergodic_rate) / unit,
            r.gamma,
            r.delta,
            active,
            elapsed
        )?;
    }
    Ok(())
}

/// Reads `(t, gap_ergodic)` pairs from a CSV written by [`write_csv`].
pub fn read_gap_series(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, h)| h).unwrap_or("");
    let cols: Vec<&str> = header.split(',').collect();
    let find = |name: &str| {
        cols.iter().position(|c| *c == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let (ti, gi) = (find("t")?, find("gap_ergodic")?);
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let get = |j: usize| -> Result<f64> {
            fields
                .get(j)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: i + 1,
                    message: format!("bad or missing field {j}"),
                })
        };
        out.push((get(ti)?, get(gi)?));
    }
    Ok(out)
}

pub fn csv_name(algorithm: Algorithm, seed: u64) -> String {
    format!("{}_seed{seed}.csv", algorithm.name())
}

/// Slope window used in summaries: the last two decades of the run.
pub fn summary_window(iterations: usize) -> (f64, f64) {
    ((iterations as f64 / 100.0).max(1.0), iterations as f64)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub path: PathBuf,
    pub final_gap: f64,
    pub slope: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ExperimentSummary {
    pub reference: ReferenceOptimum,
    pub runs: Vec<RunSummary>,
    pub runtime: Duration,
    pub summary_path: PathBuf,
}

impl ExperimentSummary {
    pub fn median_final_gap(&self, algorithm: Algorithm) -> Option<f64> {
        median(
            self.runs
                .iter()
                .filter(|r| r.algorithm == algorithm)
                .map(|r| r.final_gap)
                .collect(),
        )
    }

    pub fn median_slope(&self, algorithm: Algorithm) -> Option<f64> {
        median(
            self.runs
                .iter()
                .filter(|r| r.algorithm == algorithm)
                .filter_map(|r| r.slope)
                .collect(),
        )
    }
}

/// Runs every configured algorithm for every seed, writing one CSV per
/// `(algorithm, seed)` and a `summary.txt` into `cfg.output`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let start = Instant::now();
    let ch = cfg.channels()?;
    for &a in &cfg.algorithms {
        if a.is_zeroth_order() {
            cfg.step_policy(a).require_feasible_queries(cfg.antennas())?;
        }
    }
    let reference = reference_optimum(&ch, DEFAULT_TOLERANCE)?;
    fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;

    let jobs: Vec<(Algorithm, u64)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let window = summary_window(cfg.iterations);
    let runs = jobs
        .par_iter()
        .map(|&(algorithm, seed)| -> Result<RunSummary> {
            let tr = run_algorithm(
                &ch,
                algorithm,
                &cfg.step_policy(algorithm),
                &cfg.update_law,
                cfg.iterations,
                seed,
            )?;
            let path = cfg.output.join(csv_name(algorithm, seed));
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(file);
            write_csv(&mut w, &tr, reference.value, cfg.report_bits, cfg.record_timing)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&path, e))?;
            let final_gap = reference.value - tr.last().map_or(0.0, |r| r.ergodic_rate);
            let slope = fit_loglog_slope(&tr.ergodic_gaps(reference.value), window).ok();
            Ok(RunSummary {
                algorithm,
                seed,
                path,
                final_gap,
                slope,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let runtime = start.elapsed();
    let summary_path = cfg.output.join("summary.txt");
    let summary = ExperimentSummary {
        reference,
        runs,
        runtime,
        summary_path: summary_path.clone(),
    };
    write_summary(&summary_path, cfg, &summary)?;
    Ok(summary)
}

fn write_summary(path: &Path, cfg: &ExperimentConfig, s: &ExperimentSummary) -> Result<()> {
    let unit = if cfg.report_bits { std::f64::consts::LN_2 } else { 1.0 };
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    line("rng", RunStreams::ALGORITHM.to_string());
    line("rate_unit", if cfg.report_bits { "bits" } else { "nats" }.to_string());
    line("channel_seed", cfg.channel_seed.to_string());
    line("r_star", (s.reference.value / unit).to_string());
    line("r_star.iwf_rounds", s.reference.iwf_rounds.to_string());
    line("r_star.consistent", s.reference.consistent.to_string());
    let (lo, hi) = summary_window(cfg.iterations);
    line("slope_window", format!("{lo},{hi}"));
    for &a in &cfg.algorithms {
        for r in s.runs.iter().filter(|r| r.algorithm == a) {
            line(&format!("{a}.seed{}.final_gap", r.seed), (r.final_gap / unit).to_string());
        }
        if let Some(g) = s.median_final_gap(a) {
            line(&format!("{a}.median_final_gap"), (g / unit).to_string());
        }
        line(
            &format!("{a}.median_slope"),
            s.median_slope(a).map_or("n/a".to_string(), |x| x.to_string()),
        );
    }
    line("runtime_s", s.runtime.as_secs_f64().to_string());
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One point of a horizon sweep.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub horizon: usize,
    /// Final ergodic gap per seed, in seed order.
    pub gaps: Vec<f64>,
    pub median_gap: f64,
}

/// Runs `algorithm` once per `(horizon, seed)` with the policy tuned for that
/// horizon, and reports the final ergodic gap against `r_star`.
pub fn horizon_sweep(
    ch: &ChannelRealization,
    algorithm: Algorithm,
    policy_for: impl Fn(usize) -> StepPolicy + Sync,
    law: &UpdateLaw,
    horizons: &[usize],
    seeds: &[u64],
    r_star: f64,
) -> Result<Vec<SweepPoint>> {
    let jobs: Vec<(usize, u64)> = horizons
        .iter()
        .flat_map(|&h| seeds.iter().map(move |&s| (h, s)))
        .collect();
    let gaps = jobs
        .par_iter()
        .map(|&(h, s)| {
            let tr = run_algorithm(ch, algorithm, &policy_for(h), law, h, s)?;
            Ok(r_star - tr.last().map_or(0.0, |r| r.ergodic_rate))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(horizons
        .iter()
        .zip(gaps.chunks(seeds.len().max(1)))
        .map(|(&horizon, g)| SweepPoint {
            horizon,
            gaps: g.to_vec(),
            median_gap: median(g.to_vec()).unwrap_or(f64::NAN),
        })
        .collect())
}

/// `n` horizons spaced evenly in log scale over `[lo, hi]`, rounded.
pub fn log_spaced_horizons(lo: usize, hi: usize, n: usize) -> Vec<usize> {
    if n < 2 {
        return vec![hi];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp().round() as usize)
        .collect()
}

/// Per-iteration wall-clock statistics of one algorithm at one receiver size.
#[derive(Clone, Debug)]
pub struct TimingRow {
    pub algorithm: Algorithm,
    pub rx_antennas: usize,
    pub iterations: usize,
    pub mean_ns: f64,
    pub median_ns: f64,
}

/// Times every configured algorithm for every receiver size in
/// `rx_antennas`, using the first configured seed. For iterative
/// water-filling one iteration is a full round over the users.
pub fn timing_report(cfg: &ExperimentConfig, rx_antennas: &[usize]) -> Result<Vec<TimingRow>> {
    cfg.validate()?;
    let seed = cfg.seeds[0];
    let mut rows = Vec::new();
    for &n in rx_antennas {
        let mut c = cfg.clone();
        c.rx_antennas = n;
        c.validate()?;
        let ch = c.channels()?;
        for &a in &c.algorithms {
            // Water-filling would stop early once converged; give it a tolerance it cannot meet.
            let tr = match a {
                Algorithm::Iwf => run_iwf(&ch, c.iterations, f64::MIN_POSITIVE)?,
                _ => run_algorithm(&ch, a, &c.step_policy(a), &c.update_law, c.iterations, seed)?,
            };
            let mut per: Vec<f64> = std::iter::once(0)
                .chain(tr.elapsed_ns.iter().copied())
                .collect::<Vec<u64>>()
                .windows(2)
                .map(|w| w[1].saturating_sub(w[0]) as f64)
                .collect();
            let mean = per.iter().sum::<f64>() / per.len() as f64;
            per.sort_by(f64::total_cmp);
            rows.push(TimingRow {
                algorithm: a,
                rx_antennas: n,
                iterations: per.len(),
                mean_ns: mean,
                median_ns: median(per).unwrap_or(f64::NAN),
            });
        }
    }
    Ok(rows)
}
