use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "externa", version, about = "Mechanism design laboratory for machine-learning markets")]
pub struct Cli {
    /// Worker threads for parallel audits and experiments.
    #[arg(long, global = true, env = "EXTERNA_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// linear, power-market, proportional or quasi-monotone.
    #[arg(long)]
    pub model: Option<String>,

    #[arg(long)]
    pub agents: Option<usize>,

    /// Growth rate of the power market.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,

    /// Linear externality matrix, rows separated by `;`, e.g. "1,0;0,1".
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_matrix: Option<String>,

    /// identity, identity-unbounded or sigmoid.
    #[arg(long)]
    pub quality: Option<String>,

    /// Grid as "D=<upper>,eps=<step>".
    #[arg(long)]
    pub grid: Option<String>,

    #[arg(long = "D")]
    pub upper: Option<f64>,

    #[arg(long)]
    pub eps: Option<f64>,

    /// Seed for randomly drawn coefficients.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Audit a mechanism on a grid.
    Audit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// mep+efficient-linear, mep+best-model, vcg or free.
        #[arg(long)]
        mechanism: Option<String>,
        /// Comma-separated: ic, ir, wbb, efficiency, desirable, necessary, sufficient.
        #[arg(long)]
        property: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        quad_step: Option<f64>,
    },
    /// Run a mechanism on one profile.
    Mep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        mechanism: Option<String>,
        /// True types, comma-separated.
        #[arg(long)]
        types: Option<String>,
        /// Reports, comma-separated, `none` for non-participation; truthful when omitted.
        #[arg(long)]
        reports: Option<String>,
    },
    /// The two-agent counterexample where VCG is not IC.
    VcgExample {
        #[command(flatten)]
        common: Common,
    },
    /// Decide whether a desirable mechanism exists on a grid.
    Existence {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Disparity boundary of the power market.
    Boundary {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        agents: Option<usize>,
        /// Solve every D/eps independently and record the whole sequence.
        #[arg(long)]
        full: bool,
    },
    /// Run an experiment sweep: scaling, types or boundary.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        positive_diagonal: bool,
    },
}
