//! `modalae` command-line interface: gradient checks, training, evaluation,
//! sweeps, benchmark presets, synthetic recovery runs, and format conversion.
//!
//! Exit codes: 0 success, 1 failed check, 2 usage/config/data error,
//! 3 numerical divergence during training.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use modalae::classifier::{
    error_rate, export_latents, extract_features, hidden_sweep, hidden_sweep_csv, lambda_sweep,
    lambda_sweep_csv, ortho_report, run_pipeline, subspace_alignment, train_softmax,
    PipelineConfig,
};
use modalae::config::ExperimentConfig;
use modalae::data::{self, Dataset, SplitSpec};
use modalae::error::{Error, Result};
use modalae::gradcheck::{finite_diff_grad, grad_relative_error};
use modalae::mat::Mat;
use modalae::model::{backward, build_m, total_loss_with_ctx, AEConfig, MMode, Variant};
use modalae::params::init_params;
use modalae::rng::Rng;
use modalae::trainer::{load_checkpoint, save_checkpoint, train_autoencoder, TrainConfig};

#[derive(Parser)]
#[command(
    name = "modalae",
    version,
    about = "Autoencoder lab: orthogonal decoders, baselines, and benchmark harnesses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare analytic gradients against central finite differences.
    Gradcheck {
        /// Variant to check: bae|dae|cae|sae|mae|mdae|mcae|msae|all.
        #[arg(long, default_value = "all")]
        variant: String,
        /// Input dimension of the probe instance.
        #[arg(long, default_value_t = 6)]
        d: usize,
        /// Hidden dimension of the probe instance.
        #[arg(long, default_value_t = 3)]
        m: usize,
        /// Batch size of the probe instance.
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        /// Gram scaling mode for modal variants: identity|invnorm.
        #[arg(long, default_value = "invnorm")]
        m_mode: String,
    },
    /// Train an autoencoder from a config file; writes checkpoint + report.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint: train the softmax head on train-split
    /// features, report test error and decoder orthogonality.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also export test-split latent features as CSV.
        #[arg(long, default_value_t = false)]
        latents: bool,
    },
    /// Sweep the modal weight or the hidden-layer size.
    Sweep {
        /// Sweep kind: lambda|hidden.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated values, e.g. "0,0.1,0.4,1" or "4,8,16,32,64".
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the benchmark grid (NN baseline + 8 variants per dataset) with
    /// the published per-dataset hyperparameters.
    Table1 {
        /// Directory holding dataset subdirectories (see README).
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long, default_value = "out/table1")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Comma-separated rows to run (default: every dataset found).
        #[arg(long)]
        rows: Option<String>,
        /// Hidden layer size shared by every autoencoder cell.
        #[arg(long, default_value_t = 8)]
        hidden: usize,
    },
    /// Generate a synthetic mode-superposition dataset, train MAE plus a
    /// BAE control, and report subspace recovery.
    Synth {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        d: usize,
        /// Number of generating modes (also the default hidden size).
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda_m: f64,
        /// Hidden layer size; defaults to the mode count.
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out/synth")]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 50)]
        batch_size: usize,
        #[arg(long, default_value_t = 0.5)]
        learning_rate: f64,
    },
    /// Convert a dataset between the supported formats (output is amat).
    Convert {
        /// Input format: idx|amat|csv.
        #[arg(long)]
        format: String,
        /// IDX image file (with --labels), or amat/csv input path.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// CSV label column.
        #[arg(long, default_value_t = 0)]
        label_column: usize,
        /// CSV has a header line to skip.
        #[arg(long, default_value_t = false)]
        header: bool,
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Divergence { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Gradcheck {
            variant,
            d,
            m,
            n,
            seed,
            eps,
            m_mode,
        } => cmd_gradcheck(&variant, d, m, n, seed, eps, &m_mode),
        Command::Train { config, out, seed } => cmd_train(&config, out, seed),
        Command::Eval {
            checkpoint,
            config,
            out,
            seed,
            latents,
        } => cmd_eval(&checkpoint, &config, out, seed, latents),
        Command::Sweep {
            kind,
            config,
            values,
            out,
            seed,
        } => cmd_sweep(&kind, &config, &values, out, seed),
        Command::Table1 {
            data_dir,
            out,
            seed,
            rows,
            hidden,
        } => cmd_table1(&data_dir, &out, seed, rows.as_deref(), hidden),
        Command::Synth {
            n,
            d,
            m,
            sigma,
            lambda_m,
            hidden,
            seed,
            out,
            epochs,
            batch_size,
            learning_rate,
        } => cmd_synth(
            n,
            d,
            m,
            sigma,
            lambda_m,
            hidden.unwrap_or(m),
            seed,
            &out,
            epochs,
            batch_size,
            learning_rate,
        ),
        Command::Convert {
            format,
            input,
            images,
            labels,
            label_column,
            header,
            output,
        } => cmd_convert(&format, input, images, labels, label_column, header, &output),
    }
}

// ---------------------------------------------------------------------------
// manifest

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

fn write_manifest(
    out_dir: &Path,
    config_hash: &str,
    seed: u64,
    outputs: &[PathBuf],
) -> Result<()> {
    let manifest = serde_json::json!({
        "config_hash": config_hash,
        "seed": seed,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest is valid json") + "\n",
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// gradcheck

/// Hyperparameters used by the gradient probe; chosen nonzero so every term
/// of each variant is exercised.
fn probe_config(variant: Variant, m_mode: MMode) -> AEConfig {
    let mut cfg = match variant {
        Variant::Bae => AEConfig::bae(),
        Variant::Dae => AEConfig::dae(0.25),
        Variant::Cae => AEConfig::cae(0.13),
        Variant::Sae => AEConfig::sae(0.07),
        Variant::Mae => AEConfig::mae(0.4),
        Variant::Mdae => AEConfig::mdae(0.25, 0.4),
        Variant::Mcae => AEConfig::mcae(0.13, 0.4),
        Variant::Msae => AEConfig::msae(0.07, 0.4),
    };
    cfg.m_mode = m_mode;
    cfg
}

/// Relative error between the analytic gradient and central differences for
/// one variant at the given instance size. `InvNormDiag` scales are frozen
/// at the base point, matching how the analytic gradient treats them.
fn gradcheck_variant(
    variant: Variant,
    m_mode: MMode,
    d: usize,
    m: usize,
    n: usize,
    seed: u64,
    eps: f64,
) -> Result<f64> {
    let cfg = probe_config(variant, m_mode);
    let base = Rng::new(seed);
    let params = init_params(d, m, &mut base.substream("init"));
    let mut data_rng = base.substream("data");
    let x = Mat::from_vec(n, d, (0..n * d).map(|_| data_rng.uniform()).collect())?;
    let rng = base.substream("corrupt");
    let (_, analytic) = backward(&cfg, &params, &x, &rng)?;
    let frozen = if cfg.variant.uses_modal() && cfg.lambda_m > 0.0 {
        Some(build_m(&params.w2, cfg.m_mode)?)
    } else {
        None
    };
    let numeric = finite_diff_grad(
        |p| {
            total_loss_with_ctx(&cfg, p, &x, &rng, frozen.as_ref())
                .map(|b| b.total)
                .unwrap_or(f64::NAN)
        },
        &params,
        eps,
    )?;
    Ok(grad_relative_error(&analytic, &numeric))
}

fn cmd_gradcheck(
    variant: &str,
    d: usize,
    m: usize,
    n: usize,
    seed: u64,
    eps: f64,
    m_mode: &str,
) -> Result<ExitCode> {
    let m_mode = MMode::parse(m_mode)?;
    let variants: Vec<Variant> = if variant.eq_ignore_ascii_case("all") {
        Variant::ALL.to_vec()
    } else {
        vec![Variant::parse(variant)?]
    };
    let mut worst: f64 = 0.0;
    for v in variants {
        let rel = gradcheck_variant(v, m_mode, d, m, n, seed, eps)?;
        worst = worst.max(rel);
        println!(
            "{:<5} d={} m={} n={} seed={}  max relative error {:.3e}  {}",
            v.as_str(),
            d,
            m,
            n,
            seed,
            rel,
            if rel < 1e-6 { "PASS" } else { "FAIL" }
        );
    }
    if worst < 1e-6 {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("gradient check failed: max relative error {:.3e} >= 1e-6", worst);
        Ok(ExitCode::from(1))
    }
}

// ---------------------------------------------------------------------------
// train

fn load_config(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<(ExperimentConfig, String)> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {}", path.display(), e)))?;
    let mut cfg = ExperimentConfig::parse(std::str::from_utf8(&bytes).map_err(|_| {
        Error::Config(format!("config {} is not valid UTF-8", path.display()))
    })?)?;
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let hash = sha256_hex(&bytes);
    Ok((cfg, hash))
}

fn cmd_train(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<ExitCode> {
    let (cfg, hash) = load_config(config, out, seed)?;
    let (train, valid, _test) = cfg.load_splits()?;
    std::fs::create_dir_all(&cfg.out_dir)?;

    let base = Rng::new(cfg.seed);
    let init = init_params(train.dim(), cfg.hidden, &mut base.substream("init"));
    let t_cfg = TrainConfig {
        seed: base.substream("train").seed(),
        ..cfg.train
    };
    let (params, report) = train_autoencoder(&train, &valid, &cfg.ae, &t_cfg, &init)?;

    let ckpt_path = cfg.out_dir.join("checkpoint.mae");
    let report_path = cfg.out_dir.join("train_report.csv");
    save_checkpoint(&params, &ckpt_path)?;
    report.save_csv(&report_path)?;
    write_manifest(&cfg.out_dir, &hash, cfg.seed, &[ckpt_path, report_path])?;

    let last = report.epoch_losses.last().expect("at least one epoch");
    println!(
        "trained {} for {} epochs in {:.1}s",
        cfg.ae.variant, report.stopped_epoch, report.wall_seconds
    );
    println!(
        "final train loss: total {:.6} (recon {:.6}, modal {:.6}, contractive {:.6}, sparse {:.6})",
        last.train.total, last.train.recon, last.train.modal, last.train.contractive, last.train.sparse
    );
    println!("final validation loss: {:.6}", last.val_total);
    println!("final modal penalty (raw): {:.6e}", report.final_modal_penalty);
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// eval

fn cmd_eval(
    checkpoint: &Path,
    config: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    latents: bool,
) -> Result<ExitCode> {
    let (cfg, hash) = load_config(config, out, seed)?;
    let (train, _valid, test) = cfg.load_splits()?;
    let params = load_checkpoint(checkpoint)?;
    let (d, _) = params.dims();
    if d != train.dim() {
        return Err(Error::Dimension(format!(
            "checkpoint input dimension {} vs dataset width {}",
            d,
            train.dim()
        )));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;

    let base = Rng::new(cfg.seed);
    let clf_cfg = TrainConfig {
        seed: base.substream("classifier").seed(),
        ..cfg.classifier
    };
    let train_features = extract_features(&params, &train)?;
    let clf = train_softmax(&train_features, &train.labels, train.num_classes, &clf_cfg)?;
    let test_features = extract_features(&params, &test)?;
    let metrics = error_rate(&clf, &test_features, &test.labels)?;
    let ortho = ortho_report(&params.w2)?;

    let metrics_path = cfg.out_dir.join("eval_metrics.csv");
    std::fs::write(
        &metrics_path,
        format!(
            "error_rate_percent,max_abs_cos,mean_offdiag_cos_sq,penalty_identity_mode,penalty_invnorm_mode\n{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            metrics.error_rate_percent,
            ortho.max_abs_cos,
            ortho.mean_offdiag_cos_sq,
            ortho.penalty_identity_mode,
            ortho.penalty_invnorm_mode
        ),
    )?;
    let confusion_path = cfg.out_dir.join("confusion.csv");
    {
        let k = metrics.confusion.len();
        let mut text = (0..k)
            .map(|c| format!("pred_{}", c))
            .collect::<Vec<_>>()
            .join(",");
        text.push('\n');
        for row in &metrics.confusion {
            text.push_str(
                &row.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
            );
            text.push('\n');
        }
        std::fs::write(&confusion_path, text)?;
    }
    let mut outputs = vec![metrics_path, confusion_path];
    if latents {
        let latents_path = cfg.out_dir.join("latents.csv");
        export_latents(&test_features, &test.labels, &latents_path)?;
        outputs.push(latents_path);
    }
    write_manifest(&cfg.out_dir, &hash, cfg.seed, &outputs)?;

    println!("test error rate: {:.2}%", metrics.error_rate_percent);
    println!(
        "decoder orthogonality: max |cos| {:.4}, mean off-diag cos^2 {:.6}",
        ortho.max_abs_cos, ortho.mean_offdiag_cos_sq
    );
    println!(
        "penalty identity mode {:.6e}, inverse-norm mode {:.6e}",
        ortho.penalty_identity_mode, ortho.penalty_invnorm_mode
    );
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// sweep

fn pipeline_from_config(cfg: &ExperimentConfig) -> PipelineConfig {
    PipelineConfig {
        ae: cfg.ae,
        hidden: cfg.hidden,
        ae_train: cfg.train,
        clf_train: cfg.classifier,
        seed: cfg.seed,
    }
}

fn parse_values<T: std::str::FromStr>(values: &str, what: &str) -> Result<Vec<T>> {
    let parsed: Vec<T> = values
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("cannot parse {} value '{}'", what, s)))
        })
        .collect::<Result<_>>()?;
    if parsed.is_empty() {
        return Err(Error::Config(format!("{} sweep needs at least one value", what)));
    }
    Ok(parsed)
}

fn cmd_sweep(
    kind: &str,
    config: &Path,
    values: &str,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<ExitCode> {
    let (cfg, hash) = load_config(config, out, seed)?;
    let (train, valid, test) = cfg.load_splits()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let pipeline = pipeline_from_config(&cfg);
    let csv_path = match kind {
        "lambda" => {
            let lambdas: Vec<f64> = parse_values(values, "lambda")?;
            let rows = lambda_sweep(&train, &valid, &test, &pipeline, &lambdas)?;
            for r in &rows {
                println!("lambda_m {:<8} error {:.2}%", r.lambda_m, r.error_rate_percent);
            }
            let path = cfg.out_dir.join("lambda_sweep.csv");
            std::fs::write(&path, lambda_sweep_csv(&rows))?;
            path
        }
        "hidden" => {
            let sizes: Vec<usize> = parse_values(values, "hidden size")?;
            let rows = hidden_sweep(&train, &valid, &test, &pipeline, &sizes)?;
            for r in &rows {
                println!(
                    "hidden {:<4} bae {:.2}%  mae {:.2}%",
                    r.hidden, r.error_bae_percent, r.error_mae_percent
                );
            }
            let path = cfg.out_dir.join("hidden_sweep.csv");
            std::fs::write(&path, hidden_sweep_csv(&rows))?;
            path
        }
        other => {
            return Err(Error::Config(format!(
                "unknown sweep kind '{}' (expected lambda or hidden)",
                other
            )))
        }
    };
    write_manifest(&cfg.out_dir, &hash, cfg.seed, &[csv_path])?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// table1

/// Per-dataset hyperparameters for the benchmark grid.
struct Table1Row {
    name: &'static str,
    dae_alpha: f64,
    cae_lambda: f64,
    sae_lambda: f64,
    mae_lambda: f64,
}

const TABLE1_ROWS: [Table1Row; 6] = [
    Table1Row { name: "mnist", dae_alpha: 0.05, cae_lambda: 0.001, sae_lambda: 0.1, mae_lambda: 0.4 },
    Table1Row { name: "bg-rand", dae_alpha: 0.01, cae_lambda: 0.001, sae_lambda: 0.05, mae_lambda: 0.001 },
    Table1Row { name: "bg-img", dae_alpha: 0.01, cae_lambda: 0.001, sae_lambda: 0.001, mae_lambda: 0.1 },
    Table1Row { name: "rot", dae_alpha: 0.01, cae_lambda: 0.001, sae_lambda: 0.1, mae_lambda: 0.1 },
    Table1Row { name: "bg-img-rot", dae_alpha: 0.1, cae_lambda: 0.01, sae_lambda: 0.05, mae_lambda: 0.0005 },
    Table1Row { name: "usps", dae_alpha: 0.01, cae_lambda: 0.001, sae_lambda: 0.1, mae_lambda: 0.7 },
];

/// Repo-default training settings for benchmark cells (the published table
/// reports only the regularization weights).
fn table1_train_defaults(seed_component: u64) -> (TrainConfig, TrainConfig) {
    let ae = TrainConfig {
        batch_size: 100,
        learning_rate: 0.1,
        max_epochs: 100,
        patience: 10,
        seed: seed_component,
        shuffle_each_epoch: true,
    };
    let clf = TrainConfig {
        batch_size: 100,
        learning_rate: 0.5,
        max_epochs: 200,
        patience: 0,
        seed: seed_component,
        shuffle_each_epoch: true,
    };
    (ae, clf)
}

/// Locate a dataset under the data directory and produce its splits.
/// MNIST pools the IDX train and test pairs and re-splits; amat pairs use
/// the train file for train/valid and the test file as the test set; CSV
/// datasets split 60/10/30.
fn table1_splits(data_dir: &Path, name: &str, seed: u64) -> Result<Option<(Dataset, Dataset, Dataset)>> {
    let dir = data_dir.join(name);
    if name == "mnist" {
        let files = [
            dir.join("train-images-idx3-ubyte"),
            dir.join("train-labels-idx1-ubyte"),
            dir.join("t10k-images-idx3-ubyte"),
            dir.join("t10k-labels-idx1-ubyte"),
        ];
        if !files.iter().all(|f| f.exists()) {
            return Ok(None);
        }
        let pooled = data::load_idx(&files[0], &files[1])?
            .concat(&data::load_idx(&files[2], &files[3])?)?;
        let spec = SplitSpec {
            n_train: 10_000,
            n_valid: 10_000,
            n_test: 50_000,
            seed,
            shuffle: true,
        };
        return Ok(Some(data::split(&pooled, &spec)?));
    }
    if name == "usps" {
        let path = dir.join("usps.csv");
        if !path.exists() {
            return Ok(None);
        }
        let all = data::load_csv(&path, 0, false)?;
        let n = all.len();
        let spec = SplitSpec {
            n_train: n * 6 / 10,
            n_valid: n / 10,
            n_test: n - n * 6 / 10 - n / 10,
            seed,
            shuffle: true,
        };
        return Ok(Some(data::split(&all, &spec)?));
    }
    let train_path = dir.join("train.amat");
    let test_path = dir.join("test.amat");
    if !(train_path.exists() && test_path.exists()) {
        return Ok(None);
    }
    let train_pool = data::load_amat(&train_path)?;
    let test = data::load_amat(&test_path)?;
    let n = train_pool.len();
    let n_train = n * 5 / 6;
    let spec = SplitSpec {
        n_train,
        n_valid: n - n_train,
        n_test: 0,
        seed,
        shuffle: true,
    };
    let (train, valid, _) = data::split(&train_pool, &spec)?;
    Ok(Some((train, valid, test)))
}

fn cmd_table1(
    data_dir: &Path,
    out: &Path,
    seed: u64,
    rows: Option<&str>,
    hidden: usize,
) -> Result<ExitCode> {
    let requested: Vec<&str> = match rows {
        Some(list) => list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect(),
        None => TABLE1_ROWS.iter().map(|r| r.name).collect(),
    };
    for name in &requested {
        if !TABLE1_ROWS.iter().any(|r| r.name == *name) {
            return Err(Error::Config(format!("unknown table1 row '{}'", name)));
        }
    }
    std::fs::create_dir_all(out)?;
    let (ae_train, clf_train) = table1_train_defaults(seed);

    let mut csv = String::new();
    csv.push_str(&format!(
        "# hidden={} ae: lr={} batch={} epochs={} patience={} | classifier: lr={} batch={} epochs={}\n",
        hidden,
        ae_train.learning_rate,
        ae_train.batch_size,
        ae_train.max_epochs,
        ae_train.patience,
        clf_train.learning_rate,
        clf_train.batch_size,
        clf_train.max_epochs
    ));
    csv.push_str("dataset,nn,bae,dae,cae,sae,mae,mdae,mcae,msae\n");

    let mut ran_any = false;
    for row in TABLE1_ROWS.iter().filter(|r| requested.contains(&r.name)) {
        let splits = match table1_splits(data_dir, row.name, seed) {
            Ok(Some(s)) => s,
            Ok(None) => {
                println!("{}: dataset files not found, skipping", row.name);
                continue;
            }
            Err(e) => {
                println!("{}: failed to load ({}), skipping", row.name, e);
                continue;
            }
        };
        ran_any = true;
        let (train, valid, test) = &splits;
        println!(
            "{}: {} train / {} valid / {} test, d={}, {} classes",
            row.name,
            train.len(),
            valid.len(),
            test.len(),
            train.dim(),
            train.num_classes
        );

        // The NN baseline trains the softmax directly on raw features.
        let nn_cell = (|| -> Result<f64> {
            let clf_cfg = TrainConfig {
                seed: Rng::new(seed).substream("classifier").seed(),
                ..clf_train
            };
            let clf = train_softmax(&train.features, &train.labels, train.num_classes, &clf_cfg)?;
            Ok(error_rate(&clf, &test.features, &test.labels)?.error_rate_percent)
        })();

        let variant_cfgs: Vec<(&str, AEConfig)> = vec![
            ("bae", AEConfig::bae()),
            ("dae", AEConfig::dae(row.dae_alpha)),
            ("cae", AEConfig::cae(row.cae_lambda)),
            ("sae", AEConfig::sae(row.sae_lambda)),
            ("mae", AEConfig::mae(row.mae_lambda)),
            ("mdae", AEConfig::mdae(row.dae_alpha, row.mae_lambda)),
            ("mcae", AEConfig::mcae(row.cae_lambda, row.mae_lambda)),
            ("msae", AEConfig::msae(row.sae_lambda, row.mae_lambda)),
        ];
        // Cells share the same seed, so every variant starts from the same
        // initialization.
        let cells: Vec<std::result::Result<f64, String>> = variant_cfgs
            .par_iter()
            .map(|(_, ae)| {
                let cfg = PipelineConfig {
                    ae: *ae,
                    hidden,
                    ae_train,
                    clf_train,
                    seed,
                };
                run_pipeline(train, valid, test, &cfg)
                    .map(|o| o.metrics.error_rate_percent)
                    .map_err(|e| e.to_string())
            })
            .collect();

        let fmt_cell = |r: &std::result::Result<f64, String>| match r {
            Ok(v) => format!("{:.2}", v),
            Err(_) => "ERR".to_string(),
        };
        let nn_str = match &nn_cell {
            Ok(v) => format!("{:.2}", v),
            Err(_) => "ERR".to_string(),
        };
        csv.push_str(&format!(
            "{},{},{}\n",
            row.name,
            nn_str,
            cells.iter().map(fmt_cell).collect::<Vec<_>>().join(",")
        ));
        for ((name, _), cell) in variant_cfgs.iter().zip(&cells) {
            match cell {
                Ok(v) => println!("  {:<5} {:.2}%", name, v),
                Err(e) => println!("  {:<5} ERR ({})", name, e),
            }
        }
        if let Ok(v) = nn_cell {
            println!("  {:<5} {:.2}%", "nn", v);
        }
    }
    if !ran_any {
        return Err(Error::Config(format!(
            "no requested dataset found under {}",
            data_dir.display()
        )));
    }
    let csv_path = out.join("table1.csv");
    std::fs::write(&csv_path, csv)?;
    write_manifest(out, &sha256_hex(format!("table1 seed={} hidden={}", seed, hidden).as_bytes()), seed, &[csv_path.clone()])?;
    println!("wrote {}", csv_path.display());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// synth

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    n: usize,
    d: usize,
    m: usize,
    sigma: f64,
    lambda_m: f64,
    hidden: usize,
    seed: u64,
    out: &Path,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
) -> Result<ExitCode> {
    let (dataset, truth) = data::make_modal_dataset(n, d, m, sigma, seed)?;
    std::fs::create_dir_all(out)?;

    let n_train = n * 8 / 10;
    let spec = SplitSpec {
        n_train,
        n_valid: n - n_train,
        n_test: 0,
        seed,
        shuffle: true,
    };
    let (train, valid, _) = data::split(&dataset, &spec)?;

    let base = Rng::new(seed);
    let init = init_params(d, hidden, &mut base.substream("init"));
    let t_cfg = TrainConfig {
        batch_size,
        learning_rate,
        max_epochs: epochs,
        patience: 0,
        seed: base.substream("train").seed(),
        shuffle_each_epoch: true,
    };
    let mae_cfg = AEConfig::mae(lambda_m);
    let (mae_params, mae_report) = train_autoencoder(&train, &valid, &mae_cfg, &t_cfg, &init)?;
    // BAE control from the identical initialization and schedule.
    let (bae_params, bae_report) =
        train_autoencoder(&train, &valid, &AEConfig::bae(), &t_cfg, &init)?;

    let report_line = |label: &str,
                       params: &modalae::params::ParamSet,
                       final_penalty: f64|
     -> Result<(String, f64, f64)> {
        let ortho = ortho_report(&params.w2)?;
        let angle = if hidden == m {
            subspace_alignment(&params.w2, &truth)?
        } else {
            f64::NAN
        };
        println!(
            "{}: largest principal angle {:.2} deg, max |cos| {:.4}, mean off-diag cos^2 {:.6}",
            label, angle, ortho.max_abs_cos, ortho.mean_offdiag_cos_sq
        );
        Ok((
            format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                label, angle, ortho.max_abs_cos, ortho.mean_offdiag_cos_sq, final_penalty
            ),
            angle,
            ortho.max_abs_cos,
        ))
    };

    println!(
        "synthetic dataset: n={} d={} modes={} sigma={} seed={}",
        n, d, m, sigma, seed
    );
    let (mae_row, _, _) = report_line("mae", &mae_params, mae_report.final_modal_penalty)?;
    let (bae_row, _, _) = report_line("bae", &bae_params, bae_report.final_modal_penalty)?;

    let dataset_path = out.join("dataset.amat");
    data::save_amat(&dataset, &dataset_path)?;
    let truth_path = out.join("ground_truth.json");
    let psi_rows: Vec<Vec<f64>> = (0..truth.psi.rows())
        .map(|r| truth.psi.row(r).to_vec())
        .collect();
    let coord_rows: Vec<Vec<f64>> = (0..truth.modal_coords.rows())
        .map(|r| truth.modal_coords.row(r).to_vec())
        .collect();
    let truth_json = serde_json::json!({
        "psi": psi_rows,
        "modal_coords": coord_rows,
        "noise_sigma": truth.noise_sigma,
        "raw_min": truth.raw_min,
        "raw_range": truth.raw_range,
    });
    std::fs::write(
        &truth_path,
        serde_json::to_string(&truth_json).expect("ground truth is valid json") + "\n",
    )?;
    let report_path = out.join("recovery_report.csv");
    std::fs::write(
        &report_path,
        format!(
            "model,alignment_degrees,max_abs_cos,mean_offdiag_cos_sq,final_modal_penalty\n{}{}",
            mae_row, bae_row
        ),
    )?;
    let mae_ckpt = out.join("mae_checkpoint.mae");
    let bae_ckpt = out.join("bae_checkpoint.mae");
    save_checkpoint(&mae_params, &mae_ckpt)?;
    save_checkpoint(&bae_params, &bae_ckpt)?;
    write_manifest(
        out,
        &sha256_hex(
            format!(
                "synth n={} d={} m={} sigma={} lambda_m={} hidden={} epochs={} batch={} lr={}",
                n, d, m, sigma, lambda_m, hidden, epochs, batch_size, learning_rate
            )
            .as_bytes(),
        ),
        seed,
        &[dataset_path, truth_path, report_path, mae_ckpt, bae_ckpt],
    )?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// convert

fn cmd_convert(
    format: &str,
    input: Option<PathBuf>,
    images: Option<PathBuf>,
    labels: Option<PathBuf>,
    label_column: usize,
    header: bool,
    output: &Path,
) -> Result<ExitCode> {
    let need_input = || -> Result<PathBuf> {
        input
            .clone()
            .ok_or_else(|| Error::Config(format!("--input is required for format '{}'", format)))
    };
    let dataset = match format {
        "idx" => {
            let images = images
                .ok_or_else(|| Error::Config("--images is required for format 'idx'".into()))?;
            let labels = labels
                .ok_or_else(|| Error::Config("--labels is required for format 'idx'".into()))?;
            data::load_idx(&images, &labels)?
        }
        "amat" => data::load_amat(&need_input()?)?,
        "csv" => data::load_csv(&need_input()?, label_column, header)?,
        other => {
            return Err(Error::Config(format!(
                "unknown format '{}' (expected idx, amat, or csv)",
                other
            )))
        }
    };
    if let Some(parent) = output.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    data::save_amat(&dataset, output)?;
    println!(
        "wrote {}: {} samples, {} features, {} classes",
        output.display(),
        dataset.len(),
        dataset.dim(),
        dataset.num_classes
    );
    Ok(ExitCode::SUCCESS)
}
