//! `snipcov` — covariance estimation for functional snippets.
//!
//! Subcommands: `simulate`, `estimate`, `benchmark`, `calibrate-h0`,
//! `predict-grid`. Exit codes: 0 success, 2 input error, 3 estimation
//! failure, 4 benchmark abort.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ConfigMap;
use snipcov_core::bench::{calibrate_h0_constant, run_benchmark};
use snipcov_core::cov::{emit_grid, fit_pipeline, GridEmission};
use snipcov_core::io::{
    curve_to_csv, dataset_to_csv, matrix_to_csv, read_dataset_csv, truth_grid_to_csv, write_text,
    Summary,
};
use snipcov_core::sim::sample_dataset;
use snipcov_core::types::EvalGrid;
use snipcov_core::{Covariance, Dataset, Error, Grid};

#[derive(Parser)]
#[command(name = "snipcov", version, about = "Mean and covariance estimation for functional snippets")]
struct Cli {
    /// Master seed; overrides any seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Key-value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draws a snippet dataset and its ground-truth grids.
    Simulate,
    /// Fits the full pipeline to a dataset CSV and emits grids.
    Estimate(EstimateArgs),
    /// Runs a Monte-Carlo benchmark cell.
    Benchmark,
    /// Calibrates the constant of the empirical noise-bandwidth rule.
    CalibrateH0,
    /// Like `estimate`, but on a caller-chosen evaluation grid.
    PredictGrid(PredictArgs),
}

#[derive(clap::Args)]
struct EstimateArgs {
    /// Input dataset CSV (subject_id,t,y).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    domain_lo: f64,
    #[arg(long)]
    domain_hi: f64,
    /// Drop subjects with fewer than this many observations.
    #[arg(long, default_value_t = 0)]
    min_m: usize,
    /// Evaluation grid size.
    #[arg(long, default_value_t = 51)]
    grid_n: usize,
    /// Project the emitted covariance matrix onto the PSD cone.
    #[arg(long, default_value_t = false)]
    psd_project: bool,
}

#[derive(clap::Args)]
struct PredictArgs {
    #[command(flatten)]
    base: EstimateArgs,
    /// Explicit comma-separated grid points (overrides --grid-n).
    #[arg(long)]
    grid_points: Option<String>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::ParseError { .. }
        | Error::Io(_)
        | Error::EmptyDataset
        | Error::InvalidDomain { .. }
        | Error::TimeOutOfDomain { .. }
        | Error::LengthMismatch { .. }
        | Error::EmptySubject { .. }
        | Error::InvalidSimConfig(_) => 2,
        Error::BenchAborted { .. } => 4,
        _ => 3,
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigMap, Error> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            ConfigMap::parse(&text)
        }
        None => Ok(ConfigMap::default()),
    }
}

fn model_summary(summary: &mut Summary, model: &Covariance) {
    summary
        .section("mean")
        .push("bandwidth", model.mean.bandwidth())
        .push("selected_by_cv", model.mean.selected_by_cv());
    summary
        .section("variance_function")
        .push("bandwidth", model.variance.varsigma_sq.bandwidth())
        .push("l2_norm_varsigma", model.variance.l2_norm_varsigma)
        .push("floor", model.variance.floor);
    summary
        .section("noise")
        .push("sigma0_sq", model.noise.sigma0_sq)
        .push("h0", model.noise.h0_used)
        .push("fallback_triggered", model.noise.fallback_triggered)
        .push("ridged", model.noise.ridged);
    let theta = model
        .correlation
        .theta()
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",");
    summary
        .section("correlation")
        .push("family", model.correlation.family_name())
        .push("theta", theta)
        .push("objective_value", model.fit.objective_value)
        .push("n_starts", model.fit.n_starts)
        .push("converged", model.fit.converged)
        .push("excluded_pair_count", model.fit.excluded_pair_count)
        .push("delta_hat", model.delta_hat);
    if let Some(dn) = model.selected_dn {
        summary.push("selected_dn", dn);
    }
}

fn write_model_grids(out: &Path, emission: &GridEmission<f64>) -> Result<(), Error> {
    write_text(
        &out.join("mean_grid.csv"),
        &curve_to_csv("mean", &emission.grid, &emission.mean),
    )?;
    write_text(
        &out.join("var_grid.csv"),
        &curve_to_csv("var_x", &emission.grid, &emission.sigma_x_sq),
    )?;
    write_text(&out.join("cov_grid.csv"), &matrix_to_csv(&emission.grid, &emission.cov))?;
    Ok(())
}

fn run_estimate(
    cli: &Cli,
    args: &EstimateArgs,
    grid: Option<Grid>,
    command_name: &str,
) -> Result<(), Error> {
    let cfg = load_config(&cli.config)?;
    let (ds, report): (Dataset, _) =
        read_dataset_csv(&args.input, args.domain_lo, args.domain_hi, args.min_m)?;
    let seed = cli.seed.unwrap_or(0);
    let pipeline = cfg.pipeline(seed)?;
    let model = fit_pipeline(&ds, &pipeline)?;
    let grid = grid.unwrap_or_else(|| {
        EvalGrid::uniform(args.domain_lo, args.domain_hi, args.grid_n.max(2))
    });
    let mut emission = emit_grid(&model, &grid);
    if args.psd_project {
        emission = snipcov_core::psd_projected(&emission);
    }

    let mut summary = Summary::new();
    summary
        .section("run")
        .push("command", command_name)
        .push("input", args.input.display())
        .push("seed", seed)
        .push("n_subjects", ds.n_subjects())
        .push("total_obs", ds.total_obs())
        .push("data_rows", report.data_rows)
        .push("subjects_dropped_min_m", report.subjects_dropped_min_m)
        .push("duplicate_time_subjects", ds.duplicate_time_subjects().len())
        .push("grid_len", grid.len());
    model_summary(&mut summary, &model);
    summary
        .section("emission")
        .push("undefined_corr_pairs", emission.undefined_corr_pairs);
    write_text(&cli.out.join("summary.txt"), &summary.to_text())?;
    write_model_grids(&cli.out, &emission)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    match &cli.command {
        Command::Simulate => {
            let cfg = load_config(&cli.config)?;
            let sim = cfg.sim_config(cli.seed)?;
            let (ds, truth) = sample_dataset(&sim)?;
            let grid = EvalGrid::uniform(0.0, 1.0, 51);
            write_text(&cli.out.join("dataset.csv"), &dataset_to_csv(&ds))?;
            write_text(&cli.out.join("truth_grid.csv"), &truth_grid_to_csv(&grid, &truth))?;
            let mut summary = Summary::new();
            summary
                .section("run")
                .push("command", "simulate")
                .push("seed", sim.seed)
                .push("n_subjects", ds.n_subjects())
                .push("total_obs", ds.total_obs())
                .push("sigma0_sq", truth.sigma0_sq);
            write_text(&cli.out.join("summary.txt"), &summary.to_text())?;
            Ok(())
        }
        Command::Estimate(args) => run_estimate(cli, args, None, "estimate"),
        Command::PredictGrid(args) => {
            let grid = match &args.grid_points {
                Some(raw) => {
                    let pts: Result<Vec<f64>, Error> = raw
                        .split(',')
                        .map(|v| {
                            v.trim().parse::<f64>().map_err(|_| {
                                Error::InvalidSimConfig(format!("invalid grid point `{v}`"))
                            })
                        })
                        .collect();
                    Some(EvalGrid::from_points(pts?)?)
                }
                None => None,
            };
            run_estimate(cli, &args.base, grid, "predict-grid")
        }
        Command::Benchmark => {
            let cfg = load_config(&cli.config)?;
            let scenario = cfg.bench_scenario(cli.seed)?;
            let result = run_benchmark(&scenario)?;
            write_text(&cli.out.join("bench_results.csv"), &result.rows_csv())?;
            let mut summary = Summary::new();
            summary
                .section("run")
                .push("command", "benchmark")
                .push("seed", scenario.seed)
                .push("replicates", scenario.replicates)
                .push("n", scenario.sim.n)
                .push("failures", result.failures.len())
                .push("wall_secs", format!("{:.3}", result.wall_secs));
            for s in &result.summaries {
                summary
                    .section(&format!("{}_{}", s.method, s.metric))
                    .push("value", s.value)
                    .push(
                        "se",
                        s.se.map(|v| v.to_string()).unwrap_or_else(|| "undefined".into()),
                    )
                    .push("n_used", s.n_used);
            }
            write_text(&cli.out.join("summary.txt"), &summary.to_text())?;
            Ok(())
        }
        Command::CalibrateH0 => {
            let cfg = load_config(&cli.config)?;
            let settings = cfg.calibration_settings()?;
            let g = cfg
                .get("calibrate.g")
                .map(|v| {
                    v.parse::<usize>().map_err(|_| {
                        Error::InvalidSimConfig(format!("invalid calibrate.g `{v}`"))
                    })
                })
                .transpose()?
                .unwrap_or(20);
            let seed = cli.seed.unwrap_or(0);
            let calibration = calibrate_h0_constant(&settings, g, seed)?;
            let mut summary = Summary::new();
            summary
                .section("run")
                .push("command", "calibrate-h0")
                .push("seed", seed)
                .push("g", g)
                .push("settings", settings.len());
            summary.section("result").push("c", calibration.c);
            for (k, p) in calibration.points.iter().enumerate() {
                summary
                    .section(&format!("setting_{k}"))
                    .push("h_hat", p.h_hat)
                    .push("n", p.n)
                    .push("mean_m", p.mean_m)
                    .push("delta_hat", p.delta_hat)
                    .push("varsigma_norm", p.varsigma_norm)
                    .push("x", p.x);
            }
            write_text(&cli.out.join("summary.txt"), &summary.to_text())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
