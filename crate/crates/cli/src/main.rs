mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use holonet::bench::{benchmark_case, field_csv, reference_for, run_case, BenchOverrides};
use holonet::checkpoint::Checkpoint;
use holonet::train::{fit, gradient_check, sample_train_test, validate_bcs, FitReport, Model};
use holonet::{Error, Result};

use config::{load_config, resolve_seed, Overrides};

/// Relative error bound of the gradient check.
const GRADCHECK_TOL: f64 = 1e-5;
const GRADCHECK_DIRECTIONS: usize = 20;

#[derive(Parser)]
#[command(name = "holonet", version, about = "Holomorphic neural solvers for 2D elliptic boundary-value problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run seed; falls back to the config's seed, then HOLONET_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Field CSV grid resolution (points per axis).
    #[arg(long)]
    grid: Option<usize>,
    /// Worker threads for loss evaluation. Results are bit-reproducible only with 1.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a registered benchmark and print its error report as JSON.
    Bench {
        name: String,
        /// Override the number of training epochs.
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare analytic loss gradients with finite differences.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        /// Check a trained model instead of a fresh initialization.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Describe a checkpoint file.
    Inspect { checkpoint: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::Contract(_)
        | Error::Geometry(_)
        | Error::Unsupported(_)
        | Error::Range(_) => 2,
        Error::TrainingDiverged { .. } | Error::Diverged { .. } => 3,
        _ => 1,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn loss_csv(fit: &FitReport) -> String {
    let mut out = String::from("epoch,train_loss,test_loss,seconds\n");
    for r in &fit.history {
        let test = r.test_loss.map(|t| format!("{t:e}")).unwrap_or_default();
        writeln!(out, "{},{:e},{},{}", r.epoch, r.train_loss, test, r.seconds).expect("string write");
    }
    out
}

fn cmd_run(config: &Path, common: &Common) -> Result<()> {
    let cfg = load_config(
        config,
        &Overrides {
            seed: common.seed,
            out_dir: common.out_dir.clone(),
            grid: common.grid,
            threads: common.threads,
        },
    )?;
    let dir = &cfg.outputs.dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    write_file(
        &dir.join("resolved_config.json"),
        &serde_json::to_string_pretty(&cfg.resolved).expect("json"),
    )?;

    let mut model = Model::new(cfg.problem.build()?, &cfg.domain, &cfg.network, cfg.seed, cfg.train.n_train)?;
    validate_bcs(&model, &cfg.domain)?;
    let ckpt_path = dir.join("checkpoint.json");
    let mut hook = |epoch: usize, m: &Model| Checkpoint::from_model(m, epoch, None).save(&ckpt_path);
    let report = fit(&mut model, &cfg.domain, &cfg.train, cfg.seed, &mut hook)?;

    Checkpoint::from_model(&model, cfg.train.epochs, Some(report.adam.clone())).save(&ckpt_path)?;
    write_file(&dir.join("loss.csv"), &loss_csv(&report))?;
    write_file(&dir.join("field.csv"), &field_csv(&model, &cfg.domain, cfg.outputs.grid, None)?)?;
    let last = report.history.last();
    println!(
        "trained {} epochs in {:.2} s; final train loss {:e}; outputs in {}",
        cfg.train.epochs,
        report.seconds,
        last.map_or(f64::NAN, |r| r.train_loss),
        dir.display()
    );
    Ok(())
}

fn cmd_bench(name: &str, epochs: Option<usize>, common: &Common) -> Result<()> {
    let seed = resolve_seed(common.seed, None)?;
    let overrides = BenchOverrides {
        seed: Some(seed),
        epochs,
        threads: common.threads,
        ..Default::default()
    };
    let case = benchmark_case(name, &overrides)?;
    let start = std::time::Instant::now();
    let reference = reference_for(name)?;
    let outcome = run_case(&case, &reference, start.elapsed().as_secs_f64())?;
    let json = serde_json::to_string_pretty(&outcome.report).expect("json");
    if let Some(dir) = &common.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        write_file(&dir.join("report.json"), &json)?;
        write_file(&dir.join("loss.csv"), &loss_csv(&outcome.fit))?;
        let grid = common.grid.unwrap_or(config::DEFAULT_GRID);
        write_file(
            &dir.join("field.csv"),
            &field_csv(&outcome.model, &case.domain, grid, Some(&reference))?,
        )?;
        Checkpoint::from_model(&outcome.model, case.train.epochs, Some(outcome.fit.adam.clone()))
            .save(&dir.join("checkpoint.json"))?;
    }
    println!("{json}");
    Ok(())
}

fn cmd_gradcheck(config: &Path, checkpoint: Option<&Path>, common: &Common) -> Result<bool> {
    let cfg = load_config(
        config,
        &Overrides {
            seed: common.seed,
            ..Default::default()
        },
    )?;
    let model = match checkpoint {
        Some(p) => Checkpoint::load(p)?.to_model()?,
        None => Model::new(cfg.problem.build()?, &cfg.domain, &cfg.network, cfg.seed, cfg.train.n_train)?,
    };
    validate_bcs(&model, &cfg.domain)?;
    let (batch, _) = sample_train_test(&cfg.domain, &cfg.train, cfg.seed)?;
    let report = gradient_check(&model, &cfg.domain, &batch, GRADCHECK_DIRECTIONS, cfg.seed)?;
    let pass = report.rel_errors.iter().all(|e| *e <= GRADCHECK_TOL);
    println!(
        "{} directions, worst relative error {:e} (tolerance {:e}); analytic routes differ by {:e}: {}",
        report.rel_errors.len(),
        report.worst,
        GRADCHECK_TOL,
        report.route_mismatch,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, common } => cmd_run(config, common).map(|_| true),
        Command::Bench { name, epochs, common } => cmd_bench(name, *epochs, common).map(|_| true),
        Command::Gradcheck {
            config,
            checkpoint,
            common,
        } => cmd_gradcheck(config, checkpoint.as_deref(), common),
        Command::Inspect { checkpoint } => Checkpoint::load(checkpoint).and_then(|c| c.summary()).map(|s| {
            print!("{s}");
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
