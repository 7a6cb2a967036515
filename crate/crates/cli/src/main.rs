use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use rfgp::active::{random_observations, run_active_on, Replay, Scoring};
use rfgp::bench::run_benchmark;
use rfgp::config::{parse_config, RunConfig};
use rfgp::covariance::LatticeMemo;
use rfgp::dynamic::reconstruct_dynamic_with;
use rfgp::eval::{error_curve_with, error_report};
use rfgp::field::FieldGrid;
use rfgp::geometry::Lattice;
use rfgp::io;
use rfgp::observation::ObservationSet;
use rfgp::oracle::{gen_dynamic_pair, OracleSpec};
use rfgp::reconstruct::{reconstruct_with, Reconstruction};

#[derive(Parser)]
#[command(
    name = "rfgp",
    version,
    about = "Radio field reconstruction with ray-structured Gaussian processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set rays.R=8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => parse_config(p)?,
            None => RunConfig::default(),
        };
        Ok(base.with_overrides(&self.overrides)?)
    }
}

#[derive(Args)]
struct GridOutputs {
    /// Predicted mean grid (CSV).
    #[arg(long)]
    mean: Option<PathBuf>,
    /// Predicted variance grid (CSV).
    #[arg(long)]
    variance: Option<PathBuf>,
    #[arg(long)]
    mean_pgm: Option<PathBuf>,
    #[arg(long)]
    variance_pgm: Option<PathBuf>,
}

impl GridOutputs {
    fn write(&self, rec: &Reconstruction) -> Result<()> {
        if let Some(p) = &self.mean {
            io::write_grid_csv(&rec.mean, p)?;
        }
        if let Some(p) = &self.variance {
            io::write_grid_csv(&rec.variance, p)?;
        }
        if let Some(p) = &self.mean_pgm {
            io::write_pgm(&rec.mean, p)?;
        }
        if let Some(p) = &self.variance_pgm {
            io::write_pgm(&rec.variance, p)?;
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render the configured synthetic field to a grid CSV.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// For a dynamic pair, also write the slot-t field here.
        #[arg(long)]
        before: Option<PathBuf>,
    },
    /// Draw uniformly random observations from a truth grid.
    Sample {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict mean and variance on the configured lattice.
    Reconstruct {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        obs: PathBuf,
        #[command(flatten)]
        grids: GridOutputs,
    },
    /// Variance-driven sampling against a truth grid or a recorded dataset.
    Active {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, required_unless_present = "replay")]
        truth: Option<PathBuf>,
        /// Answer only at the positions recorded in this observations CSV.
        #[arg(long, conflicts_with = "truth")]
        replay: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        global_argmax: bool,
        #[arg(long)]
        trace: PathBuf,
        /// Error after every `stride` trace observations (needs --truth).
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        stride: usize,
        #[command(flatten)]
        grids: GridOutputs,
    },
    /// Learn a change from a slot-t baseline grid.
    Dynamic {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        baseline: PathBuf,
        /// Slot-(t+1) truth grid, used as the oracle.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        composed: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Per-round error of the composed field.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Error of a prediction grid against a truth grid.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Observations whose nearest cells are excluded.
        #[arg(long)]
        obs: Option<PathBuf>,
        /// Report CSV; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Active-versus-random and difference-versus-scratch suites.
    Benchmark {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn with_seed(mut cfg: RunConfig, seed: u64) -> RunConfig {
    cfg.seed = seed;
    cfg
}

/// Takes the scene geometry from a grid so candidates line up with it.
fn on_grid(mut cfg: RunConfig, grid: &FieldGrid) -> RunConfig {
    cfg.bounds = grid.bounds();
    cfg.resolution = grid.resolution();
    cfg.candidate_res = grid.resolution();
    cfg
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate { cfg, out, before } => {
            let cfg = cfg.load()?;
            let spec = cfg.oracle.spec()?;
            match (&spec, before) {
                (
                    OracleSpec::DynamicPair {
                        base,
                        bump_center,
                        bump_amp,
                        bump_radius,
                    },
                    Some(before),
                ) => {
                    let (t, t1) = gen_dynamic_pair(
                        cfg.bounds,
                        cfg.resolution,
                        base,
                        *bump_center,
                        *bump_amp,
                        *bump_radius,
                    )?;
                    io::write_grid_csv(&t, before)?;
                    io::write_grid_csv(&t1, &out)?;
                }
                (_, Some(_)) => bail!("--before needs oracle.kind = dynamic-pair"),
                (_, None) => io::write_grid_csv(&spec.render(cfg.bounds, cfg.resolution)?, &out)?,
            }
        }
        Command::Sample {
            truth,
            count,
            seed,
            out,
        } => {
            let truth = io::read_grid_csv(&truth)?;
            let obs = random_observations(&truth, &truth.positions(), count, seed)?;
            io::save_observations_csv(&obs, &out)?;
        }
        Command::Reconstruct { cfg, obs, grids } => {
            let cfg = cfg.load()?;
            let obs = io::load_observations_csv(&obs)?;
            let lattice = Lattice::new(cfg.bounds, cfg.resolution)?;
            let memo = LatticeMemo::new(&cfg.rays, cfg.resolution);
            let rec = reconstruct_with(
                &memo,
                &lattice,
                &obs,
                &cfg.kernel,
                &cfg.local_options(),
                cfg.scope,
            )?;
            grids.write(&rec)?;
        }
        Command::Active {
            cfg,
            truth,
            replay,
            seed,
            budget,
            global_argmax,
            trace: trace_path,
            curve,
            stride,
            grids,
        } => {
            let mut cfg = with_seed(cfg.load()?, seed);
            if let Some(b) = budget {
                cfg.budget = b;
            }
            cfg.global_argmax |= global_argmax;
            let opts = cfg.local_options();
            let (trace, lattice, memo, truth) = match (truth, replay) {
                (Some(t), _) => {
                    let truth = io::read_grid_csv(&t)?;
                    cfg = on_grid(cfg, &truth);
                    let memo = LatticeMemo::new(&cfg.rays, cfg.resolution);
                    let scoring = Scoring {
                        truth: &truth,
                        baseline: None,
                    };
                    let trace = run_active_on(
                        &memo,
                        &truth,
                        truth.bounds(),
                        &truth.positions(),
                        &cfg.kernel,
                        &opts,
                        &cfg.sampler(),
                        Some(scoring),
                    )?;
                    (trace, *truth.lattice(), memo, Some(truth))
                }
                (None, Some(r)) => {
                    let source = Replay::new(io::load_observations_csv(&r)?);
                    let memo = LatticeMemo::new(&cfg.rays, cfg.resolution);
                    let trace = run_active_on(
                        &memo,
                        &source,
                        cfg.bounds,
                        &source.positions(),
                        &cfg.kernel,
                        &opts,
                        &cfg.sampler(),
                        None,
                    )?;
                    (trace, Lattice::new(cfg.bounds, cfg.resolution)?, memo, None)
                }
                (None, None) => bail!("either --truth or --replay is required"),
            };
            io::write_trace_csv(&trace, &trace_path)?;
            if let Some(path) = curve {
                let Some(truth) = &truth else {
                    bail!("--curve needs --truth")
                };
                io::write_curve_csv(
                    &error_curve_with(&memo, &trace, truth, &cfg.kernel, &opts, stride)?,
                    &path,
                )?;
            }
            let obs = trace.observations()?;
            let rec = reconstruct_with(&memo, &lattice, &obs, &cfg.kernel, &opts, cfg.scope)?;
            grids.write(&rec)?;
        }
        Command::Dynamic {
            cfg,
            baseline,
            truth,
            seed,
            budget,
            composed,
            trace,
            curve,
        } => {
            let baseline = io::read_grid_csv(&baseline)?;
            let truth = io::read_grid_csv(&truth)?;
            let mut cfg = on_grid(with_seed(cfg.load()?, seed), &baseline);
            if let Some(b) = budget {
                cfg.budget = b;
            }
            let memo = LatticeMemo::new(&cfg.rays, cfg.resolution);
            let res = reconstruct_dynamic_with(
                &memo,
                &baseline,
                &truth,
                &cfg.kernel,
                &cfg.dynamic_options(),
                &cfg.sampler(),
                Some(&truth),
            )?;
            io::write_grid_csv(&res.composed, &composed)?;
            io::write_trace_csv(&res.trace, &trace)?;
            if let Some(path) = curve {
                io::write_curve_csv(&res.trace.metrics, &path)?;
            }
        }
        Command::Evaluate {
            pred,
            truth,
            obs,
            out,
        } => {
            let pred = io::read_grid_csv(&pred)?;
            let truth = io::read_grid_csv(&truth)?;
            let exclude = match obs {
                Some(p) => io::load_observations_csv(&p)?,
                None => ObservationSet::default(),
            };
            let report = error_report(&pred, &truth, &exclude.positions())?;
            match out {
                Some(p) => io::write_report_csv(&report, &p)?,
                None => print!("{}", io::report_to_csv(&report)),
            }
        }
        Command::Benchmark { cfg, seed, out_dir } => {
            let cfg = with_seed(cfg.load()?, seed);
            let out = run_benchmark(&cfg, Path::new(&out_dir))?;
            for f in &out.files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
