use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use entbound::conic::SolverConfig;
use entbound::measures::{FwConfig, LogBase, MeasureConfig};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "entbound", version, about = "Entanglement measures and bounds for bipartite states")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Gap and feasibility tolerance of the SDP solver.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    /// Iteration cap of the conditional-gradient REE bound.
    #[arg(long = "max-iters", global = true, default_value_t = 500)]
    pub max_iters: usize,
    /// Seed for randomly generated states.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Logarithm base of reported values.
    #[arg(long, global = true, value_enum, default_value = "2")]
    pub base: BaseArg,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Include wall times in reports (makes output non-reproducible).
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaseArg {
    #[value(name = "2")]
    Two,
    #[value(name = "e")]
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    Em,
    Ew,
    W0,
    Logneg,
    Mprimal,
    Mdual,
    Ree,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate measures on a state file.
    Measure {
        state: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "em,ew,w0,logneg")]
        which: Vec<MeasureArg>,
    },
    /// 2R(ρ_r) against the REE upper bound of ρ_r⊗ρ_r over a grid of r.
    #[command(name = "sweep-fig1")]
    SweepFig1 {
        #[arg(long, default_value_t = 0.45)]
        rmin: f64,
        #[arg(long, default_value_t = 0.548)]
        rmax: f64,
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
    /// E_W, one-copy zero-error rate and E_M of ρ^(α) over a grid of α.
    #[command(name = "sweep-fig2")]
    SweepFig2 {
        #[arg(long, default_value_t = 0.01)]
        amin: f64,
        #[arg(long, default_value_t = 0.5)]
        amax: f64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Explicit grid, overrides amin/amax/steps.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// Check the ordering of the measures on one state.
    Verify {
        #[arg(long, conflicts_with = "family", required_unless_present = "family")]
        state: Option<PathBuf>,
        /// e.g. phi:3, rho-r:0.5, rho-alpha:0.15, random:3x3:4
        #[arg(long)]
        family: Option<String>,
    },
    /// Certify R(ρ_r⊗ρ_r) < 2R(ρ_r) with an explicit PPT state.
    Nonadditivity {
        #[arg(long, default_value_t = 0.547)]
        r: f64,
        /// Where to write the certificate state; defaults to next to --out.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
}

/// Validated global settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub base: LogBase,
    pub jobs: usize,
    pub timings: bool,
}

impl RunConfig {
    pub fn from_args(g: &GlobalArgs) -> Result<Self, CliError> {
        if !(g.tol > 0.0 && g.tol < 1.0) {
            return Err(CliError::Input(format!("--tol must lie in (0, 1), got {}", g.tol)));
        }
        if g.max_iters == 0 {
            return Err(CliError::Input("--max-iters must be positive".into()));
        }
        if g.jobs == 0 {
            return Err(CliError::Input("--jobs must be positive".into()));
        }
        Ok(Self {
            out: g.out.clone(),
            tol: g.tol,
            max_iters: g.max_iters,
            seed: g.seed,
            base: match g.base {
                BaseArg::Two => LogBase::Two,
                BaseArg::E => LogBase::Natural,
            },
            jobs: g.jobs,
            timings: g.timings,
        })
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            gap_tol: self.tol,
            feas_tol: self.tol,
            ..SolverConfig::default()
        }
    }

    pub fn measure(&self) -> MeasureConfig {
        MeasureConfig {
            solver: self.solver(),
            base: self.base,
        }
    }

    pub fn fw(&self) -> FwConfig {
        FwConfig {
            max_iters: self.max_iters,
            solver: self.solver(),
            base: self.base,
            ..FwConfig::default()
        }
    }

    pub fn base_name(&self) -> &'static str {
        match self.base {
            LogBase::Two => "2",
            LogBase::Natural => "e",
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: None,
            tol: 1e-8,
            max_iters: 500,
            seed: 0,
            base: LogBase::Two,
            jobs: 1,
            timings: false,
        }
    }
}
