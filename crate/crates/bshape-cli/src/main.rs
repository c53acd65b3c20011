//! Command-line pipeline for Bayesian shape-restricted profiling of
//! time-course data.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 data or file error,
//! 3 numerical failure.

mod commands;
mod config;
mod svg;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "bshape",
    version,
    about = "Hierarchical Bayesian shape-restricted profiling of time-course data"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args, Clone)]
struct Flags {
    /// flat key=value config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// dataset CSV (gene_id,time,replicate,intensity)
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// annotation CSV (gene_id,genome_pos,early,taag,catg,structural,name)
    #[arg(long, global = true)]
    annotations: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// master seed for every random stream
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// number of MCMC chains
    #[arg(long, global = true)]
    chains: Option<usize>,
    /// sweeps per chain
    #[arg(long, global = true)]
    iters: Option<u64>,
    /// burn-in sweeps discarded per chain
    #[arg(long, global = true)]
    burnin: Option<u64>,
    /// thinning interval for retained draws
    #[arg(long, global = true)]
    thin: Option<u64>,
    /// Bernstein polynomial order
    #[arg(long, global = true)]
    order: Option<usize>,
    /// cluster count for expression-profile K-means
    #[arg(long = "k-profiles", global = true)]
    k_profiles: Option<usize>,
    /// group count for onset/peak K-means
    #[arg(long = "k-groups", global = true)]
    k_groups: Option<usize>,
    /// comma-separated unimodality horizons in (0, 1]
    #[arg(long, global = true, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    /// shared profile grid size
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Monte Carlo draws for prior probabilities
    #[arg(long = "prior-draws", global = true)]
    prior_draws: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset plus ground truth
    Simulate,
    /// Run the posterior sampler and write chain checkpoints
    Fit,
    /// Gelman–Rubin convergence diagnostics per gene and estimand
    Diagnose,
    /// Posterior (and prior) feature tables per gene
    Features,
    /// Unimodality and increasing-before-max tests with Bayes factors
    TestShape,
    /// Expression-profile clusters and onset/peak groups with figures
    Cluster,
    /// Motif, colocalization, neighbor and odds-ratio association tables
    Assoc,
    /// Everything above plus per-gene fit plots and predictive checks
    Report,
}

fn resolve_config(flags: &Flags) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &flags.config {
        let map = config::parse_config_file(path)?;
        cfg.apply_file(&map)?;
    }
    if let Some(v) = &flags.data {
        cfg.data = Some(v.clone());
    }
    if let Some(v) = &flags.annotations {
        cfg.annotations = Some(v.clone());
    }
    if let Some(v) = &flags.out {
        cfg.out = v.clone();
    }
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = flags.chains {
        cfg.chains = v;
    }
    if let Some(v) = flags.iters {
        cfg.iters = v;
    }
    if let Some(v) = flags.burnin {
        cfg.burnin = v;
    }
    if let Some(v) = flags.thin {
        cfg.thin = v;
    }
    if let Some(v) = flags.order {
        cfg.order = v;
    }
    if let Some(v) = flags.k_profiles {
        cfg.k_profiles = v;
    }
    if let Some(v) = flags.k_groups {
        cfg.k_groups = v;
    }
    if let Some(v) = &flags.tau {
        cfg.tau = v.clone();
    }
    if let Some(v) = flags.grid {
        cfg.grid = v;
    }
    if let Some(v) = flags.prior_draws {
        cfg.prior_draws = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's help/version output is a success, not a usage error
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let cfg = match resolve_config(&cli.flags) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    let result = match cli.cmd {
        Cmd::Simulate => commands::cmd_simulate(&cfg),
        Cmd::Fit => commands::cmd_fit(&cfg),
        Cmd::Diagnose => commands::cmd_diagnose(&cfg),
        Cmd::Features => commands::cmd_features(&cfg),
        Cmd::TestShape => commands::cmd_test_shape(&cfg),
        Cmd::Cluster => commands::cmd_cluster(&cfg),
        Cmd::Assoc => commands::cmd_assoc(&cfg),
        Cmd::Report => commands::cmd_report(&cfg),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code
        }
    }
}
