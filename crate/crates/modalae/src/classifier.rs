//! Softmax classification on frozen autoencoder features, plus the
//! orthogonality and subspace diagnostics and the sweep harnesses.
//!
//! The classifier never fine-tunes the autoencoder: features are extracted
//! once and a single softmax layer is trained on top, which isolates the
//! quality of the learned representation.

use rayon::prelude::*;
use std::path::Path;

use crate::data::{Dataset, ModalGroundTruth};
use crate::error::{Error, Result};
use crate::linalg::{orthonormalize_columns, singular_values};
use crate::mat::{matmul, softmax_rows, Mat};
use crate::model::{build_m, encode, modal_penalty, AEConfig, MMode, Variant};
use crate::params::{init_params, ParamSet};
use crate::rng::Rng;
use crate::trainer::{train_autoencoder, TrainConfig, TrainReport};

/// Single softmax layer: logits = features·wᵀ + b.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierParams {
    /// K×m weight matrix.
    pub w: Mat,
    /// Length-K bias.
    pub b: Vec<f64>,
}

impl ClassifierParams {
    pub fn zeros(num_classes: usize, feature_dim: usize) -> Self {
        ClassifierParams {
            w: Mat::zeros(num_classes, feature_dim),
            b: vec![0.0; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.w.rows()
    }

    pub fn logits(&self, features: &Mat) -> Result<Mat> {
        matmul(features, &self.w.transpose())?.add_row_vec(&self.b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalMetrics {
    pub error_rate_percent: f64,
    /// confusion[true][predicted] counts.
    pub confusion: Vec<Vec<usize>>,
}

/// Pairwise cosine statistics of the decoder columns, with the orthogonality
/// penalty evaluated in both scaling modes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrthoReport {
    pub max_abs_cos: f64,
    pub mean_offdiag_cos_sq: f64,
    pub penalty_identity_mode: f64,
    pub penalty_invnorm_mode: f64,
}

/// Hidden activations of the autoencoder on a whole dataset.
pub fn extract_features(ae_params: &ParamSet, data: &Dataset) -> Result<Mat> {
    encode(ae_params, &data.features)
}

/// Mean cross-entropy of the softmax classifier on the given features.
pub fn softmax_loss(clf: &ClassifierParams, features: &Mat, labels: &[usize]) -> Result<f64> {
    let probs = softmax_rows(&clf.logits(features)?);
    let mut total = 0.0;
    for (s, &y) in labels.iter().enumerate() {
        total -= probs[(s, y)].max(1e-300).ln();
    }
    Ok(total / features.rows() as f64)
}

/// Train the softmax layer by mini-batch gradient descent from zero
/// initialization. Deterministic per seed; `patience` is ignored because the
/// classifier trains without a validation set.
pub fn train_softmax(
    features: &Mat,
    labels: &[usize],
    num_classes: usize,
    t_cfg: &TrainConfig,
) -> Result<ClassifierParams> {
    t_cfg.validate()?;
    if features.rows() != labels.len() {
        return Err(Error::Mismatch(format!(
            "{} feature rows vs {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::Label(format!(
            "label {} out of range for {} classes",
            bad, num_classes
        )));
    }
    let n = features.rows();
    let m = features.cols();
    let mut clf = ClassifierParams::zeros(num_classes, m);
    let base = Rng::new(t_cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..t_cfg.max_epochs {
        if t_cfg.shuffle_each_epoch {
            base.substream_n("shuffle", epoch as u64).shuffle(&mut order);
        }
        for (batch_idx, chunk) in order.chunks(t_cfg.batch_size).enumerate() {
            let batch = features.gather_rows(chunk);
            let probs = softmax_rows(&clf.logits(&batch)?);
            let nb = chunk.len() as f64;
            // dZ = (P - Y) / batch size
            let mut dz = probs;
            for (r, &src) in chunk.iter().enumerate() {
                let y = labels[src];
                dz[(r, y)] -= 1.0;
            }
            let dz = dz.scale(1.0 / nb);
            let gw = matmul(&dz.transpose(), &batch)?;
            let gb = dz.col_sums();
            clf.w.add_scaled(&gw, -t_cfg.learning_rate);
            for (b, g) in clf.b.iter_mut().zip(gb) {
                *b -= t_cfg.learning_rate * g;
            }
            if !(clf.w.all_finite() && clf.b.iter().all(|x| x.is_finite())) {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_idx,
                    last_params: Box::new(ParamSet::zeros(1, 1)),
                });
            }
        }
    }
    Ok(clf)
}

/// Argmax classification with ties broken toward the lowest class index.
pub fn error_rate(clf: &ClassifierParams, features: &Mat, labels: &[usize]) -> Result<EvalMetrics> {
    if features.rows() != labels.len() {
        return Err(Error::Mismatch(format!(
            "{} feature rows vs {} labels",
            features.rows(),
            labels.len()
        )));
    }
    let k = clf.num_classes();
    let logits = clf.logits(features)?;
    let mut confusion = vec![vec![0usize; k]; k];
    let mut correct = 0usize;
    for (s, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::Label(format!(
                "label {} out of range for {} classes",
                y, k
            )));
        }
        let row = logits.row(s);
        let mut pred = 0usize;
        for (c, &v) in row.iter().enumerate() {
            if v > row[pred] {
                pred = c;
            }
        }
        confusion[y][pred] += 1;
        if pred == y {
            correct += 1;
        }
    }
    let total = labels.len().max(1);
    Ok(EvalMetrics {
        error_rate_percent: 100.0 * (1.0 - correct as f64 / total as f64),
        confusion,
    })
}

/// Absolute cosines of all unordered decoder column pairs (i < j).
pub fn pairwise_abs_cosines(w2: &Mat) -> Result<Vec<f64>> {
    let m = w2.cols();
    let gram = matmul(&w2.transpose(), w2)?;
    for j in 0..m {
        if gram[(j, j)] == 0.0 {
            return Err(Error::DegenerateColumn(format!(
                "decoder column {} is zero; cosines undefined",
                j
            )));
        }
    }
    let mut out = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            out.push((gram[(i, j)] / (gram[(i, i)].sqrt() * gram[(j, j)].sqrt())).abs());
        }
    }
    Ok(out)
}

/// Cosine statistics and both penalty values for a decoder matrix.
pub fn ortho_report(w2: &Mat) -> Result<OrthoReport> {
    let cosines = pairwise_abs_cosines(w2)?;
    let max_abs_cos = cosines.iter().cloned().fold(0.0, f64::max);
    let mean_offdiag_cos_sq = if cosines.is_empty() {
        0.0
    } else {
        cosines.iter().map(|c| c * c).sum::<f64>() / cosines.len() as f64
    };
    let penalty_identity_mode = modal_penalty(w2, &build_m(w2, MMode::Identity)?);
    let penalty_invnorm_mode = modal_penalty(w2, &build_m(w2, MMode::InvNormDiag)?);
    Ok(OrthoReport {
        max_abs_cos,
        mean_offdiag_cos_sq,
        penalty_identity_mode,
        penalty_invnorm_mode,
    })
}

/// Largest principal angle, in degrees, between the decoder column span and
/// the ground-truth mode span. Zero means identical subspaces.
pub fn subspace_alignment(w2: &Mat, truth: &ModalGroundTruth) -> Result<f64> {
    if w2.rows() != truth.psi.rows() {
        return Err(Error::Dimension(format!(
            "decoder has {} rows but mode shapes have {}",
            w2.rows(),
            truth.psi.rows()
        )));
    }
    if w2.cols() != truth.psi.cols() {
        return Err(Error::Dimension(format!(
            "decoder has {} columns but ground truth has {} modes",
            w2.cols(),
            truth.psi.cols()
        )));
    }
    let q1 = orthonormalize_columns(w2, 1e-10)?;
    let q2 = orthonormalize_columns(&truth.psi, 1e-10)?;
    let overlap = matmul(&q1.transpose(), &q2)?;
    let sv = singular_values(&overlap)?;
    let smallest = sv.last().copied().unwrap_or(1.0).clamp(0.0, 1.0);
    Ok(smallest.acos().to_degrees())
}

/// Write features plus a final label column as CSV. Row order is preserved;
/// an empty matrix produces a header-only file.
pub fn export_latents(features: &Mat, labels: &[usize], path: &Path) -> Result<()> {
    if features.rows() != labels.len() {
        return Err(Error::Mismatch(format!(
            "{} feature rows vs {} labels",
            features.rows(),
            labels.len()
        )));
    }
    let mut out = String::new();
    for j in 0..features.cols() {
        out.push_str(&format!("f{},", j));
    }
    out.push_str("label\n");
    for r in 0..features.rows() {
        for &x in features.row(r) {
            out.push_str(&format!("{:.16e},", x));
        }
        out.push_str(&format!("{}\n", labels[r]));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Everything one train-autoencoder → train-classifier → evaluate cell needs
/// besides the datasets.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub ae: AEConfig,
    pub hidden: usize,
    pub ae_train: TrainConfig,
    pub clf_train: TrainConfig,
    /// Substream root; init, trainer, and classifier seeds derive from it.
    pub seed: u64,
}

impl PipelineConfig {
    /// Derived generator for parameter initialization.
    pub fn init_rng(&self) -> Rng {
        Rng::new(self.seed).substream("init")
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub ae_params: ParamSet,
    pub train_report: TrainReport,
    pub metrics: EvalMetrics,
    pub ortho: OrthoReport,
}

/// One full pipeline run: train the autoencoder, freeze it, train the
/// softmax head on train-split features, evaluate on the test split.
pub fn run_pipeline(
    train: &Dataset,
    valid: &Dataset,
    test: &Dataset,
    cfg: &PipelineConfig,
) -> Result<PipelineOutcome> {
    let base = Rng::new(cfg.seed);
    let init = init_params(train.dim(), cfg.hidden, &mut cfg.init_rng());
    let ae_train = TrainConfig {
        seed: base.substream("train").seed(),
        ..cfg.ae_train
    };
    let (ae_params, train_report) = train_autoencoder(train, valid, &cfg.ae, &ae_train, &init)?;
    let clf_train = TrainConfig {
        seed: base.substream("classifier").seed(),
        ..cfg.clf_train
    };
    let train_features = extract_features(&ae_params, train)?;
    let clf = train_softmax(&train_features, &train.labels, train.num_classes, &clf_train)?;
    let test_features = extract_features(&ae_params, test)?;
    let metrics = error_rate(&clf, &test_features, &test.labels)?;
    let ortho = ortho_report(&ae_params.w2)?;
    Ok(PipelineOutcome {
        ae_params,
        train_report,
        metrics,
        ortho,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaRow {
    pub lambda_m: f64,
    pub error_rate_percent: f64,
}

/// One pipeline per λ value, seeds shared across cells so every λ starts
/// from the same initialization. Cells run in parallel; row order follows
/// the input list.
pub fn lambda_sweep(
    train: &Dataset,
    valid: &Dataset,
    test: &Dataset,
    base_cfg: &PipelineConfig,
    lambda_values: &[f64],
) -> Result<Vec<LambdaRow>> {
    if lambda_values.is_empty() {
        return Err(Error::Config("lambda sweep needs at least one value".into()));
    }
    if let Some(&bad) = lambda_values.iter().find(|&&l| !(l.is_finite() && l >= 0.0)) {
        return Err(Error::Config(format!("lambda values must be >= 0, got {}", bad)));
    }
    lambda_values
        .par_iter()
        .map(|&lambda_m| {
            let mut cfg = base_cfg.clone();
            cfg.ae.variant = Variant::Mae;
            cfg.ae.lambda_m = lambda_m;
            let outcome = run_pipeline(train, valid, test, &cfg).map_err(|e| {
                Error::Config(format!("lambda {} cell failed: {}", lambda_m, e))
            })?;
            Ok(LambdaRow {
                lambda_m,
                error_rate_percent: outcome.metrics.error_rate_percent,
            })
        })
        .collect()
}

pub fn lambda_sweep_csv(rows: &[LambdaRow]) -> String {
    let mut out = String::from("lambda_m,error_rate_percent\n");
    for r in rows {
        out.push_str(&format!("{:.16e},{:.16e}\n", r.lambda_m, r.error_rate_percent));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HiddenRow {
    pub hidden: usize,
    pub error_bae_percent: f64,
    pub error_mae_percent: f64,
}

/// Paired BAE/MAE pipelines per hidden size. Both members of a pair share
/// the same initialization seed, so the only difference is the penalty.
pub fn hidden_sweep(
    train: &Dataset,
    valid: &Dataset,
    test: &Dataset,
    base_cfg: &PipelineConfig,
    sizes: &[usize],
) -> Result<Vec<HiddenRow>> {
    if sizes.is_empty() {
        return Err(Error::Config("hidden sweep needs at least one size".into()));
    }
    if sizes.contains(&0) {
        return Err(Error::Config("hidden sizes must be at least 1".into()));
    }
    sizes
        .par_iter()
        .map(|&m| {
            let cell_seed = Rng::new(base_cfg.seed).substream_n("cell", m as u64).seed();
            let mut bae_cfg = base_cfg.clone();
            bae_cfg.ae = AEConfig {
                m_mode: base_cfg.ae.m_mode,
                ..AEConfig::bae()
            };
            bae_cfg.hidden = m;
            bae_cfg.seed = cell_seed;
            let mut mae_cfg = base_cfg.clone();
            mae_cfg.ae.variant = Variant::Mae;
            mae_cfg.hidden = m;
            mae_cfg.seed = cell_seed;
            let cell = |label: &str, cfg: &PipelineConfig| {
                run_pipeline(train, valid, test, cfg)
                    .map_err(|e| Error::Config(format!("{} cell at m={} failed: {}", label, m, e)))
            };
            let bae = cell("bae", &bae_cfg)?;
            let mae = cell("mae", &mae_cfg)?;
            Ok(HiddenRow {
                hidden: m,
                error_bae_percent: bae.metrics.error_rate_percent,
                error_mae_percent: mae.metrics.error_rate_percent,
            })
        })
        .collect()
}

pub fn hidden_sweep_csv(rows: &[HiddenRow]) -> String {
    let mut out = String::from("hidden,error_bae_percent,error_mae_percent\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.16e},{:.16e}\n",
            r.hidden, r.error_bae_percent, r.error_mae_percent
        ));
    }
    out
}
