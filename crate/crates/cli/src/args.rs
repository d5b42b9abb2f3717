//! Command-line arguments and their merge into a [`RunManifest`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use finsler_core::descent::DescentMode;

use crate::error::CliError;
use crate::manifest::{Command, RunManifest};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "FINSLER_THREADS";

#[derive(Debug, Parser)]
#[command(name = "finsler", version, about = "Finsler descent for planar curve matching and synthetic flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Evolve SOURCE towards TARGET by descent on the matching energy.
    Match {
        source: Option<PathBuf>,
        target: Option<PathBuf>,
        #[command(flatten)]
        opts: Options,
    },
    /// Evolve SOURCE along the synthetic field with a fixed step.
    Flow {
        source: Option<PathBuf>,
        #[command(flatten)]
        opts: Options,
    },
    /// Write the h¹ and Finsler gradients of the matching energy at SOURCE.
    Gradient {
        source: Option<PathBuf>,
        target: Option<PathBuf>,
        #[command(flatten)]
        opts: Options,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    FinslerRigid,
    FinslerSimilarity,
    SobolevH1,
    L2,
    SyntheticF,
}

impl From<ModeArg> for DescentMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::FinslerRigid => DescentMode::FinslerRigid,
            ModeArg::FinslerSimilarity => DescentMode::FinslerSimilarity,
            ModeArg::SobolevH1 => DescentMode::SobolevH1,
            ModeArg::L2 => DescentMode::L2,
            ModeArg::SyntheticF => DescentMode::SyntheticF,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Start from a saved manifest; other flags override it.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Named parameter set (matching-rigid, matching-simil).
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of nodes after resampling.
    #[arg(long)]
    pub n: Option<usize>,
    /// Width of the wide kernel Gaussian.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Width of the narrow kernel Gaussian.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Deviation parameter; `flow` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    pub rho: Vec<f64>,
    /// Stretch budget; `flow` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    /// Initial step for `match`, fixed step for `flow`.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Wolfe sufficient-decrease constant.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Wolfe curvature constant.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Iteration cap for `match`, number of steps for `flow`.
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Seed of the pair sampler in the rigidity diagnostics.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write only every k-th frame.
    #[arg(long)]
    pub frame_every: Option<usize>,
    /// Keep input coordinates instead of normalising the bounding box.
    #[arg(long)]
    pub no_normalize: bool,
    /// Also write the cone program as text (`gradient` only).
    #[arg(long)]
    pub dump_program: bool,
}

fn single(name: &str, values: &[f64], command: Command) -> Result<Option<f64>, CliError> {
    match values {
        [] => Ok(None),
        [x] => Ok(Some(*x)),
        _ if command == Command::Flow => Ok(None),
        _ => Err(CliError::input(format!("--{name} takes a single value for this command"))),
    }
}

/// Builds the manifest: saved manifest or defaults, then preset, then flags.
pub fn build_manifest(
    command: Command,
    source: Option<PathBuf>,
    target: Option<PathBuf>,
    o: &Options,
) -> Result<RunManifest, CliError> {
    let mut m = match &o.manifest {
        Some(path) => {
            let m = RunManifest::load(path)?;
            if m.command != command {
                return Err(CliError::input(format!(
                    "manifest is for {:?}, not {:?}",
                    m.command, command
                )));
            }
            m
        }
        None => {
            let source = source.clone().ok_or_else(|| CliError::input("a source curve is required"))?;
            RunManifest::new(command, source, target.clone(), PathBuf::from("out"))
        }
    };
    if let Some(s) = source {
        m.source = s;
    }
    if target.is_some() {
        m.target = target;
    }
    if let Some(p) = &o.preset {
        m.apply_preset(p)?;
    }
    if let Some(out) = &o.out {
        m.out = out.clone();
    }
    if let Some(n) = o.n {
        m.n = n;
    }
    if let Some(s) = o.sigma {
        m.kernel.sigma = s;
    }
    if let Some(d) = o.delta {
        m.kernel.delta = d;
    }
    if let Some(r) = single("rho", &o.rho, command)? {
        m.descent.rho = r;
    }
    if let Some(l) = single("lambda", &o.lambda, command)? {
        m.descent.lambda = l;
    }
    if command == Command::Flow {
        if o.rho.len() > 1 {
            m.flow.rhos = o.rho.clone();
        }
        if o.lambda.len() > 1 {
            m.flow.lambdas = o.lambda.clone();
        }
    }
    if let Some(t) = o.tau {
        match command {
            Command::Flow => m.flow.tau = t,
            _ => m.descent.tau_init = t,
        }
    }
    if let Some(a) = o.alpha {
        m.descent.wolfe.alpha = a;
    }
    if let Some(b) = o.beta {
        m.descent.wolfe.beta = b;
    }
    if let Some(k) = o.max_iters {
        match command {
            Command::Flow => m.flow.steps = k,
            _ => m.descent.max_iters = k,
        }
    }
    if let Some(mode) = o.mode {
        m.descent.mode = mode.into();
    }
    if let Some(seed) = o.seed {
        m.seed = seed;
    }
    m.descent.seed = m.seed;
    if let Some(k) = o.frame_every {
        m.frame_every = k;
    }
    if o.no_normalize {
        m.normalize = false;
    }
    if o.dump_program {
        m.dump_program = true;
    }
    Ok(m)
}

/// Sizes the global worker pool from [`THREADS_ENV`], if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::input(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::input(format!("cannot size thread pool: {e}")))
}
