use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use perclab::harness::{run, ConventionChoice, Experiment, ExperimentConfig, RunError};
use perclab::lattice::LatticeKind;

/// Monte Carlo experiments on critical percolation and FK-Ising clusters.
///
/// Exit codes: 0 success, 1 invalid configuration, 2 runtime error, 3 a checked property failed.
#[derive(Parser, Debug)]
#[command(name = "perclab", version)]
struct Cli {
    /// TOML experiment configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output root; each run writes to <out>/<config hash>/.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write sampled configurations in the binary format.
    Sample(Overrides),
    /// Estimate the normaliser π̂₁(η, 1) for each mesh.
    Pi1Table(Overrides),
    /// Arm-event probabilities.
    Arms(Overrides),
    /// Box approximation versus clusters, sample by sample.
    ApproxVerify(Overrides),
    /// Total variation between cluster and box-sum measures.
    Measures(Overrides),
    /// Masses of the two largest clusters in Λ₁.
    Largest(Overrides),
    /// Magnetization, cutoff field and two-point function.
    Ising(Overrides),
    /// Arm probabilities with log-log exponent fits.
    Exponents(Overrides),
}

/// Lists are comma separated, e.g. `--b 0.25,0.5,1`.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    kind: Option<LatticeKind>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    n_samples: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    b: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    psi: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    r: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    eta_list: Option<Vec<f64>>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    side: Option<u8>,
    #[arg(long)]
    kappa_hp: Option<String>,
    #[arg(long)]
    sign_seed: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    gap: Option<u64>,
    #[arg(long)]
    convention: Option<ConventionChoice>,
    #[arg(long)]
    norm_table: Option<PathBuf>,
}

macro_rules! set {
    ($target:expr, $value:expr) => {
        if let Some(v) = $value {
            $target = v;
        }
    };
}

fn build(cli: Cli) -> Result<ExperimentConfig, String> {
    let (experiment, o) = match cli.command {
        Command::Sample(o) => (Experiment::Sample, o),
        Command::Pi1Table(o) => (Experiment::Pi1Table, o),
        Command::Arms(o) => (Experiment::Arms, o),
        Command::ApproxVerify(o) => (Experiment::ApproxVerify, o),
        Command::Measures(o) => (Experiment::Measures, o),
        Command::Largest(o) => (Experiment::Largest, o),
        Command::Ising(o) => (Experiment::Ising, o),
        Command::Exponents(o) => (Experiment::Exponents, o),
    };
    let mut c = match &cli.config {
        Some(path) => {
            let c = ExperimentConfig::load(path).map_err(|e| e.to_string())?;
            if c.experiment != experiment {
                return Err(format!("config {} is for `{}`, not `{}`", path.display(), c.experiment.name(), experiment.name()));
            }
            c
        }
        None => ExperimentConfig::template(experiment),
    };
    set!(c.mesh.kind, o.kind);
    set!(c.mesh.eta, o.eta);
    set!(c.mesh.k, o.k);
    if o.p.is_some() {
        c.mesh.p = o.p;
    }
    set!(c.mesh.seed, cli.seed);
    set!(c.n_samples, o.n_samples);
    set!(c.workers, cli.workers);
    set!(c.output, cli.out);
    set!(c.scales.a, o.a);
    set!(c.scales.b, o.b);
    set!(c.scales.eps, o.eps);
    set!(c.scales.delta, o.delta);
    set!(c.scales.psi, o.psi);
    set!(c.scales.r, o.r);
    set!(c.scales.eta, o.eta_list);
    set!(c.arms.kappa, o.kappa);
    set!(c.arms.kappa_hp, o.kappa_hp);
    if o.side.is_some() {
        c.arms.side = o.side;
    }
    if o.sign_seed.is_some() {
        c.sign_seed = o.sign_seed;
    }
    set!(c.sweeps.burn_in, o.burn_in);
    set!(c.sweeps.gap, o.gap);
    set!(c.convention, o.convention);
    if o.norm_table.is_some() {
        c.norm_table = o.norm_table;
    }
    Ok(c)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = match build(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&config) {
        Ok(out) => {
            println!("{}", out.dir.display());
            for f in &out.manifest.files {
                println!("  {}", f.name);
            }
            if out.manifest.assertion_failed {
                eprintln!("check failed; see {}", out.dir.join("manifest.json").display());
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ RunError::Validation(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
