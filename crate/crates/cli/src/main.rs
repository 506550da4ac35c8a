//! `sdag`: simulations, closed-form analyses and the example DAG.

mod demo;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use sdag_analysis::format::sig12;
use sdag_analysis::{
    nakamoto_discounted_depth, secure_latency_mc, theta, type1_fraction, w1, w2, AnalysisError, Convention, DelayCurve,
    FailureRule, SecureParams,
};
use sdag_core::Hash256;
use sdag_sim::{ConfigError, SimConfig, SimMetrics};
use thiserror::Error;

use crate::manifest::RunManifest;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("unstable queue: load {load} is not below 1")]
    Unstable { load: f64 },
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Unstable { .. } => 3,
            CliError::Domain(_) => 4,
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Unstable { load } => CliError::Unstable { load },
            other => CliError::Domain(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "sdag", version, about = "Structured blockDAG simulator and calculators")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the discrete-event simulator on a TOML config.
    Simulate(SimulateArgs),
    /// Closed forms and Monte-Carlo estimates; values print with 12 significant digits.
    Analyze {
        #[command(subcommand)]
        what: Analyze,
    },
    /// Build the five-miner example DAG and write its dump, level sets, DFS order and ledger.
    DemoDag {
        #[arg(long, default_value = "demo-dag")]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long, env = "SDAG_SEED")]
    seed: Option<u64>,
    #[arg(long, default_value = "sim-out")]
    out: PathBuf,
    /// Independent runs with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    /// Honest rate (1-share)*rate, adversary share*rate.
    Total,
    /// Honest rate fixed, adversary share/(1-share)*rate on top.
    Extra,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    /// Fail when ones <= zeros + adversary.
    AtMost,
    /// Fail when ones < zeros + adversary.
    Below,
}

#[derive(Subcommand)]
enum Analyze {
    /// Upper bound on the wasted share of capacity.
    Theta {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        tbar: f64,
        #[arg(long)]
        c: f64,
    },
    /// Mean mempool wait; exits 3 when the queue is unstable.
    W1 {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        c: f64,
        /// Mean delay, used to compute the wasted share.
        #[arg(long, conflicts_with = "theta")]
        tbar: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        /// Also print the queue length.
        #[arg(long)]
        queue: bool,
    },
    /// Infection latency: q1, exact q1/(n mu) and the closed-form bound.
    W2 {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        mu: f64,
    },
    /// Long-run share of type-1 milestones.
    Fraction {
        /// Honest milestone rate p*n*mu.
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = 2.0)]
        t0: f64,
        #[arg(long, default_value = "quadratic")]
        curve: String,
    },
    /// Secure-latency failure frequencies as CSV.
    Secure {
        #[arg(long, default_value_t = 0.1)]
        rate: f64,
        #[arg(long)]
        share: f64,
        #[arg(long, default_value_t = 2.0)]
        t0: f64,
        #[arg(long, default_value = "quadratic")]
        curve: String,
        /// `start:step:end` (inclusive) or a comma list.
        #[arg(long, default_value = "10:10:990")]
        grid: String,
        #[arg(long, default_value_t = 1_000_000)]
        paths: u64,
        #[arg(long, env = "SDAG_SEED", default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ConventionArg::Total)]
        convention: ConventionArg,
        #[arg(long, value_enum, default_value_t = RuleArg::AtMost)]
        rule: RuleArg,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write curve.csv and a manifest here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Confirmation depth from the race formula with a discounted honest share.
    Depth {
        #[arg(long)]
        share: f64,
        #[arg(long)]
        fraction: f64,
        #[arg(long, default_value_t = 1e-3)]
        risk: f64,
    },
}

fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Domain(format!("bad grid `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
        let (a, step, b) = (v[0], v[1], v[2]);
        if !(step > 0.0) || b < a {
            return Err(bad());
        }
        let count = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|i| a + step * i as f64).collect());
    }
    s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect()
}

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool")
}

/// Prefix the offending key's line to validation messages.
fn config_message(path: &Path, text: &str, e: &ConfigError) -> String {
    match e {
        ConfigError::Invalid { key, .. } => {
            let line = text.lines().position(|l| {
                let l = l.trim_start();
                l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
            });
            match line {
                Some(i) => format!("{}:{}: {e}", path.display(), i + 1),
                None => format!("{}: {e}", path.display()),
            }
        }
        _ => format!("{}: {e}", path.display()),
    }
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = SimConfig::from_toml_str(&text).map_err(|e| CliError::Config(config_message(&args.config, &text, &e)))?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    std::fs::create_dir_all(&args.out)?;
    let seeds: Vec<u64> = (0..args.runs.max(1)).map(|i| cfg.seed.wrapping_add(i)).collect();
    let results: Vec<SimMetrics> = pool(args.jobs).install(|| {
        seeds
            .par_iter()
            .map(|s| sdag_sim::run(&SimConfig { seed: *s, ..cfg.clone() }).expect("validated config"))
            .collect()
    });
    let mut man = RunManifest::new(cfg.digest().to_hex(), Some(cfg.seed));
    man.artifact(&args.out, "config.toml", &cfg.to_toml())?;
    let mut rows = format!("{}\n", SimMetrics::csv_header());
    for m in &results {
        rows.push_str(&m.csv_row());
        rows.push('\n');
        let d = format!("run-{}", m.seed);
        man.artifact(&args.out, &format!("{d}/queueing_latency.csv"), &SimMetrics::samples_csv(&m.queueing_latency))?;
        man.artifact(&args.out, &format!("{d}/infection_latency.csv"), &SimMetrics::samples_csv(&m.infection_latency))?;
        man.artifact(&args.out, &format!("{d}/mempool.csv"), &SimMetrics::samples_csv(&m.mempool_samples))?;
        man.artifact(&args.out, &format!("{d}/shares.csv"), &m.shares_csv())?;
        if cfg.trace {
            man.artifact(&args.out, &format!("{d}/trace.csv"), &m.trace_csv())?;
        }
    }
    man.artifact(&args.out, "metrics.csv", &rows)?;
    man.write(&args.out)?;
    print!("{rows}");
    Ok(())
}

fn analyze(what: Analyze) -> Result<(), CliError> {
    match what {
        Analyze::Theta { mu, tbar, c } => {
            if !(mu >= 0.0 && tbar >= 0.0 && c >= 0.0) {
                return Err(CliError::Domain("mu, tbar and c must be nonnegative".into()));
            }
            println!("{}", sig12(theta(c, mu, tbar)));
        }
        Analyze::W1 { lambda, n, mu, c, tbar, theta: th, queue } => {
            let th = match (th, tbar) {
                (Some(t), _) => t,
                (None, Some(tb)) => theta(c, mu, tb),
                (None, None) => 0.0,
            };
            let w = w1(lambda, n, mu, c, th)?;
            println!("{}", sig12(w));
            if queue {
                println!("{}", sig12(sdag_analysis::queue_length(lambda, n, mu, c, th)?));
            }
        }
        Analyze::W2 { n, p, mu } => {
            let r = w2(n, p, mu)?;
            println!("q1 {}", sig12(r.q1));
            println!("exact {}", sig12(r.exact));
            println!("bound {}", sig12(r.bound));
        }
        Analyze::Fraction { rate, t0, curve } => {
            let c = DelayCurve::new(&curve, t0)?;
            println!("{}", sig12(type1_fraction(rate, &c)?));
        }
        Analyze::Secure { rate, share, t0, curve, grid, paths, seed, convention, rule, jobs, out } => {
            let mut p = SecureParams::new(rate, share, DelayCurve::new(&curve, t0)?);
            p.convention = match convention {
                ConventionArg::Total => Convention::Total,
                ConventionArg::Extra => Convention::Extra,
            };
            p.rule = match rule {
                RuleArg::AtMost => FailureRule::AtMost,
                RuleArg::Below => FailureRule::Below,
            };
            let g = parse_grid(&grid)?;
            let curve_out = pool(jobs).install(|| secure_latency_mc(&p, &g, paths, seed))?;
            let csv = curve_out.to_csv();
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    let key = format!("{rate} {share} {curve}:{t0} {grid} {paths} {convention:?} {rule:?}", convention = p.convention, rule = p.rule);
                    let mut man = RunManifest::new(Hash256::digest(key.as_bytes()).to_hex(), Some(seed));
                    man.artifact(&dir, "curve.csv", &csv)?;
                    man.write(&dir)?;
                }
                None => print!("{csv}"),
            }
        }
        Analyze::Depth { share, fraction, risk } => {
            println!("{}", nakamoto_discounted_depth(share, fraction, risk)?);
        }
    }
    Ok(())
}

fn demo_dag(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    let d = demo::build();
    let mut man = RunManifest::new(Hash256::digest(d.dag.as_bytes()).to_hex(), None);
    man.artifact(out, "example.dag", &d.dag)?;
    man.artifact(out, "levels.txt", &d.levels)?;
    man.artifact(out, "dfs.txt", &d.dfs)?;
    man.artifact(out, "ledger.csv", &d.ledger)?;
    man.write(out)?;
    print!("{}", d.levels);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Simulate(a) => simulate(a),
        Cmd::Analyze { what } => analyze(what),
        Cmd::DemoDag { out } => demo_dag(&out),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
