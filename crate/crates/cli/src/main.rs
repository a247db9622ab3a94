//! Command-line driver: simulate data, fit, align, cluster, and report.
//!
//! Staged subcommands share one output directory and resume from persisted
//! artifacts, so `fit` followed by `report` completes the remaining stages
//! without re-sampling. Exit codes: 0 success, 1 usage or simulation error,
//! 2..=6 the failing pipeline stage (load, fit, align, cluster, report).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use irtmap::config::{load_config, RunConfig};
use irtmap::latent::Point;
use irtmap::ns::Domain2D;
use irtmap::persist::{save_json, save_likert_csv};
use irtmap::pipeline::{run_pipeline_until, PipelineOptions, Stage};
use irtmap::synth::{simulate_lsirm, simulate_thomas, ParentSpec, TruthSpec};

#[derive(Parser)]
#[command(
    name = "irtmap",
    about = "Latent space item response maps with point-process clustering",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic data with a known truth sidecar.
    Simulate(SimulateArgs),
    /// Load responses and draw posterior chains.
    Fit(RunArgs),
    /// Procrustes-align the fitted chains (within and across groups).
    Align(RunArgs),
    /// Cluster the item map with a Neyman-Scott ensemble.
    Cluster(RunArgs),
    /// Assemble the report, tables, and plots from persisted stages.
    Report(RunArgs),
    /// Run every stage end to end.
    Pipeline(RunArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Optional TOML config supplying the default seed.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the dataset and truth sidecar.
    #[arg(long)]
    out: PathBuf,
    #[command(subcommand)]
    kind: SimulateKind,
}

#[derive(Subcommand)]
enum SimulateKind {
    /// Binary response matrix from the latent space model.
    Lsirm {
        /// Respondent count.
        #[arg(long, default_value_t = 300)]
        n: usize,
        /// Item count.
        #[arg(long, default_value_t = 30)]
        p: usize,
        /// Distance weight of the generating model.
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Basename of the CSV/JSON outputs.
        #[arg(long, default_value = "responses")]
        name: String,
    },
    /// Clustered point pattern from a Thomas process.
    Thomas {
        /// Fixed parent locations as "x,y;x,y;...".
        #[arg(long, conflicts_with = "n_parents")]
        parents: Option<String>,
        /// Number of uniform random parents.
        #[arg(long)]
        n_parents: Option<usize>,
        /// Expected offspring per parent.
        #[arg(long)]
        alpha: f64,
        /// Gaussian kernel spread.
        #[arg(long)]
        omega: f64,
        /// Domain as "x0,x1,y0,y1".
        #[arg(long, default_value = "0,1,0,1")]
        domain: String,
        /// Basename of the CSV/JSON outputs.
        #[arg(long, default_value = "points")]
        name: String,
    },
}

fn parse_points(raw: &str) -> anyhow::Result<Vec<Point>> {
    raw.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let coords: Vec<&str> = pair.split(',').map(str::trim).collect();
            if coords.len() != 2 {
                bail!("expected x,y pair, got {pair:?}");
            }
            Ok([
                coords[0].parse().context("bad x coordinate")?,
                coords[1].parse().context("bad y coordinate")?,
            ])
        })
        .collect()
}

fn parse_domain(raw: &str) -> anyhow::Result<Domain2D> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|s| s.trim().parse().context("bad domain coordinate"))
        .collect::<anyhow::Result<_>>()?;
    if parts.len() != 4 {
        bail!("domain must be x0,x1,y0,y1");
    }
    Ok(Domain2D::new(parts[0], parts[1], parts[2], parts[3])?)
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let base_cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let seed = args.seed.unwrap_or(base_cfg.seed);
    std::fs::create_dir_all(&args.out)?;
    match args.kind {
        SimulateKind::Lsirm { n, p, gamma, name } => {
            let spec = TruthSpec {
                gamma,
                ..TruthSpec::default()
            };
            let (matrix, truth) = simulate_lsirm(n, p, &spec, seed)?;
            let csv = args.out.join(format!("{name}.csv"));
            save_likert_csv(&matrix, &csv)?;
            save_json(&truth, &args.out.join(format!("{name}_truth.json")))?;
            println!(
                "wrote {} ({}x{}) and its truth sidecar",
                csv.display(),
                n,
                p
            );
        }
        SimulateKind::Thomas {
            parents,
            n_parents,
            alpha,
            omega,
            domain,
            name,
        } => {
            let dom = parse_domain(&domain)?;
            let parent_spec = match (parents, n_parents) {
                (Some(raw), None) => ParentSpec::Fixed(parse_points(&raw)?),
                (None, Some(m)) => ParentSpec::Count(m),
                (None, None) => bail!("pass either --parents or --n-parents"),
                (Some(_), Some(_)) => unreachable!("clap forbids both"),
            };
            let truth = simulate_thomas(&parent_spec, alpha, omega, &dom, seed)?;
            let csv = args.out.join(format!("{name}.csv"));
            let mut w = csv::WriterBuilder::new().from_path(&csv)?;
            w.write_record(["x", "y"])?;
            for p in &truth.offspring {
                w.write_record([p[0].to_string(), p[1].to_string()])?;
            }
            w.flush()?;
            save_json(&truth, &args.out.join(format!("{name}_truth.json")))?;
            println!(
                "wrote {} ({} offspring of {} parents, {} discarded)",
                csv.display(),
                truth.offspring.len(),
                truth.parents.len(),
                truth.discarded
            );
        }
    }
    Ok(())
}

fn run_stage(args: RunArgs, stop: Stage) -> ExitCode {
    let cfg = match load_config(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(Stage::Load.exit_code() as u8);
        }
    };
    let opts = PipelineOptions {
        seed: args.seed,
        out_dir: args.out,
    };
    match run_pipeline_until(cfg, &opts, stop) {
        Ok(Some(report)) => {
            println!(
                "report written for {} group(s); R-hat max {:.4}",
                report.groups.len(),
                report
                    .groups
                    .iter()
                    .map(|g| g.convergence.rhat_max)
                    .fold(f64::NEG_INFINITY, f64::max)
            );
            ExitCode::SUCCESS
        }
        Ok(None) => {
            println!("completed through stage {}", stop.name());
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.stage.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => match simulate(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
        Command::Fit(args) => run_stage(args, Stage::Fit),
        Command::Align(args) => run_stage(args, Stage::Align),
        Command::Cluster(args) => run_stage(args, Stage::Cluster),
        Command::Report(args) => run_stage(args, Stage::Report),
        Command::Pipeline(args) => run_stage(args, Stage::Report),
    }
}
