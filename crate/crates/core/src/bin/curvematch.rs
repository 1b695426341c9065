use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use curvematch::io::{self, Outcome, RunConfig, SyntheticKind};

#[derive(Parser)]
#[command(name = "curvematch", version, about = "Geodesic matching and statistics of closed plane curves")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Weight of the endpoint penalty (overrides the configuration).
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel work.
    #[arg(long, global = true, env = "CURVEMATCH_JOBS")]
    jobs: Option<usize>,
    /// Random seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Geodesic from SOURCE to TARGET (curve files).
    Match { source: PathBuf, target: PathBuf },
    /// All pairwise distances of a dataset; resumes from a checkpoint.
    Matrix {
        dataset: PathBuf,
        /// Stop after computing this many new entries.
        #[arg(long)]
        max_pairs: Option<usize>,
    },
    /// Spectral clustering of a distance matrix CSV.
    Cluster {
        matrix: PathBuf,
        /// Nearest neighbours per shape.
        #[arg(short)]
        p: Option<usize>,
        /// Number of clusters.
        #[arg(short)]
        k: Option<usize>,
        /// Dataset whose labels are compared with the clusters.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Karcher mean of a dataset.
    Mean { dataset: PathBuf },
    /// Tangent PCA at the Karcher mean of a dataset.
    Pca { dataset: PathBuf },
    /// Writes a synthetic labelled dataset.
    GenSynthetic {
        #[arg(long, value_enum, default_value = "classes")]
        kind: Kind,
        /// Shapes per class (or in total for wings).
        #[arg(long, default_value_t = 12)]
        count: usize,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Kind {
    Classes,
    Wings,
}

fn run(cli: Cli) -> curvematch::Result<Outcome> {
    let c = &cli.common;
    let mut config = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(l) = c.lambda {
        config.lambda = l;
    }
    if let Some(s) = c.seed {
        config.seed = s;
    }
    if let Command::Cluster { p, k, .. } = &cli.command {
        config.cluster.p = p.unwrap_or(config.cluster.p);
        config.cluster.k = k.unwrap_or(config.cluster.k);
    }
    config.validate()?;
    let out = &c.out;
    match &cli.command {
        Command::Match { source, target } => io::cmd_match(source, target, &config, out),
        Command::Matrix { dataset, max_pairs } => io::cmd_matrix(dataset, &config, out, *max_pairs),
        Command::Cluster { matrix, truth, .. } => io::cmd_cluster(matrix, &config, truth.as_deref(), out),
        Command::Mean { dataset } => io::cmd_mean(dataset, &config, out),
        Command::Pca { dataset } => io::cmd_pca(dataset, &config, out),
        Command::GenSynthetic { kind, count } => {
            let kind = match kind {
                Kind::Classes => SyntheticKind::Classes,
                Kind::Wings => SyntheticKind::Wings,
            };
            io::cmd_gen_synthetic(kind, *count, config.seed, out).map(|_| Outcome::Success)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Exit code 2 means "not converged", so usage errors exit with 1.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.jobs {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(1)
        }
    }
}
