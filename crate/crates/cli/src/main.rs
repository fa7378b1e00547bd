mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use skytrace::adsb::{
    group_into_trajectories, parse_csv, synth_generate, write_csv, write_rejects, AdsbRecord,
    ParseOutcome, TrajectoryStore,
};
use skytrace::mc::mc_predict;
use skytrace::model::{build_model, ModelKind};
use skytrace::preprocess::{build_dataset, Dataset, TARGET_COLUMNS};
use skytrace::seed::{derive_seed, stream};
use skytrace::train::{
    compare_models, compute_metrics, persistence_prediction, predict_all, split_samples, train,
    write_history, CompareSettings,
};
use skytrace::{Cg3dModel, Error, Result, Tensor};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "skytrace",
    version,
    about = "4D flight-trajectory forecasting from ADS-B data"
)]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// `key=value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// Dropout rate of the model.
    #[arg(long, global = true)]
    dropout: Option<f64>,
    #[arg(long, global = true)]
    kind: Option<ModelKind>,
    #[arg(long, global = true)]
    mc_samples: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic ADS-B state vectors as CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse a CSV file and group records into trajectories.
    Ingest {
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write rejected rows; defaults to `<out>.rejects.tsv`.
        #[arg(long)]
        rejects: Option<PathBuf>,
    },
    /// Resample, reduce and window a trajectory store into a dataset.
    Preprocess {
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on a dataset.
    Train {
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss CSV; defaults to `<out>.history.csv`.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Validation metrics of a checkpoint next to the persistence baseline.
    Evaluate {
        dataset: PathBuf,
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train all architectures and write a comparison report.
    Compare {
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// MC-dropout mean and spread for one dataset sample.
    McPredict {
        dataset: PathBuf,
        checkpoint: PathBuf,
        #[arg(long)]
        sample: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve(opts: &GlobalOpts) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &opts.config {
        cfg.apply_file(path)?;
    }
    for s in &opts.sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set `{s}`: expected key=value")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(v) = opts.seed {
        cfg.seed = v;
    }
    if let Some(v) = opts.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = opts.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = opts.dropout {
        cfg.model.dropout_rate = v;
    }
    if let Some(v) = opts.kind {
        cfg.kind = v;
    }
    if let Some(v) = opts.mc_samples {
        cfg.mc_samples = v;
    }
    cfg.finish()?;
    Ok(cfg)
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("SKYTRACE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Config(format!(
            "SKYTRACE_THREADS `{raw}` is not a positive integer"
        ))
    })?;
    // A second initialization (only possible in-process) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Adopts the dataset's window geometry and checks the model fits it.
fn model_config_for(cfg: &mut RunConfig, ds: &Dataset) -> Result<()> {
    cfg.model.window = ds.config.window.input;
    cfg.model.horizon = ds.config.window.horizon;
    cfg.model.validate()
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let mut cfg = resolve(&cli.opts)?;
    match cli.command {
        Command::Synth { out } => {
            let trajs = synth_generate(&cfg.synth)?;
            let records: Vec<AdsbRecord> = trajs
                .iter()
                .flat_map(|t| t.records.iter().cloned())
                .collect();
            write_csv(&records, BufWriter::new(File::create(&out)?))?;
            println!(
                "{} records from {} trajectories",
                records.len(),
                trajs.len()
            );
        }
        Command::Ingest { csv, out, rejects } => {
            // A zero-byte file has no header to check; treat it as holding no rows.
            let parsed: ParseOutcome = if fs::metadata(&csv)?.len() == 0 {
                Default::default()
            } else {
                parse_csv(&csv)?
            };
            let rejects_path = rejects.unwrap_or_else(|| with_suffix(&out, ".rejects.tsv"));
            let mut w = BufWriter::new(File::create(&rejects_path)?);
            write_rejects(&parsed.rejects, &mut w)?;
            w.flush()?;
            let accepted = parsed.records.len();
            let grouped = group_into_trajectories(parsed.records, cfg.gap_threshold_s);
            println!(
                "accepted {accepted}, rejected {}, trajectories {}, short segments discarded {}",
                parsed.rejects.len(),
                grouped.trajectories.len(),
                grouped.discarded_segments
            );
            if grouped.trajectories.is_empty() {
                return Err(Error::InsufficientData("no trajectories".into()));
            }
            TrajectoryStore::new(cfg.gap_threshold_s, grouped.trajectories).save(&out)?;
        }
        Command::Preprocess { store, out } => {
            let store = TrajectoryStore::load(&store)?;
            let ds = build_dataset(&store.trajectories, &cfg.preprocess)?;
            ds.save(&out)?;
            let r = &ds.report;
            println!(
                "{} samples from {} trajectories ({} degenerate, {} too short); {} spatial + {} temporal components",
                r.samples,
                r.trajectories_in,
                r.degenerate,
                r.too_short,
                ds.spatial_dims(),
                ds.temporal_dims()
            );
        }
        Command::Train {
            dataset,
            out,
            history,
        } => {
            let ds = Dataset::load(&dataset)?;
            model_config_for(&mut cfg, &ds)?;
            let mut model: Cg3dModel = build_model(
                &cfg.model,
                cfg.kind,
                ds.spatial_dims(),
                ds.temporal_dims(),
                cfg.seed,
            )?;
            let outcome = train(&mut model, &ds.samples, &cfg.train)?;
            model.save(&out)?;
            let history_path = history.unwrap_or_else(|| with_suffix(&out, ".history.csv"));
            let mut buf = Vec::new();
            write_history(&outcome.history, &mut buf)?;
            fs::write(&history_path, buf)?;
            if let Some(last) = outcome.history.last() {
                println!(
                    "{} epoch {}: train mse {:.6}, val mse {:.6}, val mae {:.6}",
                    cfg.kind.label(),
                    last.epoch,
                    last.train_mse,
                    last.val_mse,
                    last.val_mae
                );
            }
        }
        Command::Evaluate {
            dataset,
            checkpoint,
            out,
        } => {
            let ds = Dataset::load(&dataset)?;
            let model: Cg3dModel = Cg3dModel::load(&checkpoint)?;
            check_dims(&model, &ds)?;
            let split = split_samples(&ds.samples, &cfg.train)?;
            let val: Vec<_> = split.val.iter().map(|&i| &ds.samples[i]).collect();
            let targets: Vec<Tensor> = val.iter().map(|s| s.target.clone()).collect();
            let model_m = compute_metrics(&predict_all(&model, &val)?, &targets)?;
            let persist: Vec<Tensor> = val.iter().map(|s| persistence_prediction(s)).collect();
            let persist_m = compute_metrics(&persist, &targets)?;
            let doc = json!({
                "model": model.kind.label(),
                "val_samples": val.len(),
                "metrics": model_m,
                "persistence": persist_m,
            });
            emit(&doc, out.as_deref())?;
        }
        Command::Compare { dataset, out } => {
            let ds = Dataset::load(&dataset)?;
            model_config_for(&mut cfg, &ds)?;
            let settings = CompareSettings {
                model: cfg.model.clone(),
                train: cfg.train.clone(),
                mc_samples: cfg.mc_samples,
            };
            let report = compare_models(&ds, &settings)?;
            write_text(&out, &report.to_json()?)?;
            for row in &report.rows {
                println!("{:<16} mae {:.6} rmse {:.6}", row.model, row.mae, row.rmse);
            }
            println!(
                "{:<16} mae {:.6} rmse {:.6}",
                report.persistence.model, report.persistence.mae, report.persistence.rmse
            );
            println!("mc delta {:+.3}%", report.mc_delta_percent);
        }
        Command::McPredict {
            dataset,
            checkpoint,
            sample,
            out,
        } => {
            let ds = Dataset::load(&dataset)?;
            let model: Cg3dModel = Cg3dModel::load(&checkpoint)?;
            check_dims(&model, &ds)?;
            let s = ds.samples.get(sample).ok_or_else(|| {
                Error::Contract(format!(
                    "sample {sample} out of range; dataset has {}",
                    ds.samples.len()
                ))
            })?;
            let seed = derive_seed(cfg.seed, stream::MC, sample as u64);
            let pred = mc_predict(&model, &s.input, cfg.mc_samples, seed)?;
            let rows = |t: &Tensor| -> Vec<Vec<f64>> {
                t.data()
                    .chunks(TARGET_COLUMNS.len())
                    .map(<[f64]>::to_vec)
                    .collect()
            };
            let mean = rows(&pred.mean);
            let std = rows(&pred.std);
            let scaler = &ds.target_scaler;
            let mean_phys: Vec<Vec<f64>> = mean
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    scaler.invert(&mut r);
                    r
                })
                .collect();
            let std_phys: Vec<Vec<f64>> = std
                .iter()
                .map(|r| r.iter().zip(&scaler.scale).map(|(s, k)| s * k).collect())
                .collect();
            let doc = json!({
                "sample": sample,
                "trajectory": ds.trajectory_ids.get(s.trajectory),
                "passes": pred.samples,
                "seed": pred.seed,
                "columns": TARGET_COLUMNS,
                "mean": mean,
                "std": std,
                "mean_physical": mean_phys,
                "std_physical": std_phys,
            });
            emit(&doc, out.as_deref())?;
        }
    }
    Ok(())
}

fn check_dims(model: &Cg3dModel, ds: &Dataset) -> Result<()> {
    if (model.d_spatial, model.d_temporal) != (ds.spatial_dims(), ds.temporal_dims())
        || model.config.window != ds.config.window.input
        || model.config.horizon != ds.config.window.horizon
    {
        return Err(Error::Shape(format!(
            "checkpoint expects {}+{} features over {} steps, horizon {}; dataset has {}+{} over {}, horizon {}",
            model.d_spatial,
            model.d_temporal,
            model.config.window,
            model.config.horizon,
            ds.spatial_dims(),
            ds.temporal_dims(),
            ds.config.window.input,
            ds.config.window.horizon
        )));
    }
    Ok(())
}

fn emit(doc: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    match out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(if matches!(e, Error::Config(_)) { 2 } else { 1 })
        }
    }
}
