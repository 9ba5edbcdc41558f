//! Deterministic mini-batch gradient descent with optional validation-based
//! early stopping.
//!
//! Randomness is split into labeled substreams of the training seed: batch
//! order comes from `("shuffle", epoch)`, corruption masks from
//! `("corrupt", epoch, batch)`, and epoch-end evaluations from their own
//! streams, so noise and batch order are independently reproducible.

use std::path::Path;
use std::time::Instant;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{backward, build_m, modal_penalty, total_loss, AEConfig, LossBreakdown};
use crate::params::ParamSet;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Early-stopping patience in epochs; 0 disables early stopping.
    pub patience: usize,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning_rate must be finite, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Loss curve entry: full-set losses evaluated at the end of an epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLoss {
    pub train: LossBreakdown,
    pub val_total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<EpochLoss>,
    pub stopped_epoch: usize,
    pub wall_seconds: f64,
    /// Raw (unweighted) orthogonality penalty of the returned decoder,
    /// computed in the configured scaling mode.
    pub final_modal_penalty: f64,
}

impl TrainReport {
    /// CSV rendering of the loss curves. Wall-clock time is deliberately not
    /// written so rerunning a seed reproduces the file byte for byte.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,recon,modal,contractive,sparse,total,val_total\n");
        for (i, e) in self.epoch_losses.iter().enumerate() {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                i + 1,
                e.train.recon,
                e.train.modal,
                e.train.contractive,
                e.train.sparse,
                e.train.total,
                e.val_total,
            ));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Run mini-batch gradient descent on the configured variant.
///
/// Returns the trained parameters (the validation-best snapshot when patience
/// is enabled, otherwise the last-epoch parameters) and the loss curves.
/// Identical inputs and seed produce bitwise-identical outputs.
pub fn train_autoencoder(
    train: &Dataset,
    valid: &Dataset,
    ae_cfg: &AEConfig,
    t_cfg: &TrainConfig,
    init: &ParamSet,
) -> Result<(ParamSet, TrainReport)> {
    ae_cfg.validate()?;
    t_cfg.validate()?;
    let (d, _) = init.dims();
    if train.dim() != d {
        return Err(Error::Dimension(format!(
            "training data width {} vs parameter input dimension {}",
            train.dim(),
            d
        )));
    }
    if !valid.is_empty() && valid.dim() != d {
        return Err(Error::Dimension(format!(
            "validation data width {} vs parameter input dimension {}",
            valid.dim(),
            d
        )));
    }
    if t_cfg.patience > 0 && valid.is_empty() {
        return Err(Error::Config(
            "early stopping (patience > 0) requires a non-empty validation set".into(),
        ));
    }

    let started = Instant::now();
    let base = Rng::new(t_cfg.seed);
    let n = train.len();
    let mut params = init.clone();
    let mut epoch_losses = Vec::new();
    let mut best: Option<(f64, ParamSet)> = None;
    let mut stale_epochs = 0usize;
    let mut stopped_epoch = 0usize;

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..t_cfg.max_epochs {
        if t_cfg.shuffle_each_epoch {
            base.substream_n("shuffle", epoch as u64).shuffle(&mut order);
        }
        for (batch_idx, chunk) in order.chunks(t_cfg.batch_size).enumerate() {
            let batch = train.features.gather_rows(chunk);
            let batch_rng = base.substream_n2("corrupt", epoch as u64, batch_idx as u64);
            let (loss, grad) = backward(ae_cfg, &params, &batch, &batch_rng)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_idx,
                    last_params: Box::new(params),
                });
            }
            let mut updated = params.clone();
            updated.step(&grad, t_cfg.learning_rate);
            if !updated.all_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_idx,
                    last_params: Box::new(params),
                });
            }
            params = updated;
        }

        let train_loss = total_loss(
            ae_cfg,
            &params,
            &train.features,
            &base.substream_n("eval-train", epoch as u64),
        )?;
        let val_total = if valid.is_empty() {
            f64::NAN
        } else {
            total_loss(
                ae_cfg,
                &params,
                &valid.features,
                &base.substream_n("eval-valid", epoch as u64),
            )?
            .total
        };
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: order.chunks(t_cfg.batch_size).count(),
                last_params: Box::new(params),
            });
        }
        epoch_losses.push(EpochLoss {
            train: train_loss,
            val_total,
        });
        stopped_epoch = epoch + 1;

        if t_cfg.patience > 0 {
            let improved = best.as_ref().map_or(true, |(b, _)| val_total < *b);
            if improved {
                best = Some((val_total, params.clone()));
                stale_epochs = 0;
            } else {
                stale_epochs += 1;
                if stale_epochs >= t_cfg.patience {
                    break;
                }
            }
        }
    }

    let final_params = match best {
        Some((_, snapshot)) if t_cfg.patience > 0 => snapshot,
        _ => params,
    };
    let final_modal_penalty = match build_m(&final_params.w2, ae_cfg.m_mode) {
        Ok(ctx) => modal_penalty(&final_params.w2, &ctx),
        Err(_) => f64::NAN,
    };
    let report = TrainReport {
        epoch_losses,
        stopped_epoch,
        wall_seconds: started.elapsed().as_secs_f64(),
        final_modal_penalty,
    };
    Ok((final_params, report))
}

/// Write parameters in the binary checkpoint format.
pub fn save_checkpoint(params: &ParamSet, path: &Path) -> Result<()> {
    params.save(path)
}

/// Read parameters back from a checkpoint file.
pub fn load_checkpoint(path: &Path) -> Result<ParamSet> {
    ParamSet::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_modal_dataset;
    use crate::mat::Mat;
    use crate::model::{MMode, Variant};
    use crate::params::init_params;

    fn tiny_dataset(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = Rng::new(seed);
        let features = Mat::from_vec(n, d, (0..n * d).map(|_| rng.uniform()).collect()).unwrap();
        Dataset::from_parts(features, vec![0; n]).unwrap()
    }

    fn quick_cfg(seed: u64, epochs: usize) -> TrainConfig {
        TrainConfig {
            batch_size: 8,
            learning_rate: 0.1,
            max_epochs: epochs,
            patience: 0,
            seed,
            shuffle_each_epoch: true,
        }
    }

    #[test]
    fn mae_lambda_zero_matches_bae_bitwise() {
        let train = tiny_dataset(32, 6, 1);
        let valid = tiny_dataset(8, 6, 2);
        let init = init_params(6, 3, &mut Rng::new(3).substream("init"));
        let t_cfg = quick_cfg(4, 5);
        let (p_bae, r_bae) =
            train_autoencoder(&train, &valid, &AEConfig::bae(), &t_cfg, &init).unwrap();
        let (p_mae, r_mae) =
            train_autoencoder(&train, &valid, &AEConfig::mae(0.0), &t_cfg, &init).unwrap();
        assert_eq!(p_bae, p_mae);
        assert_eq!(r_bae.epoch_losses, r_mae.epoch_losses);
    }

    #[test]
    fn mdae_alpha_zero_matches_mae_bitwise() {
        let train = tiny_dataset(32, 6, 5);
        let valid = tiny_dataset(8, 6, 6);
        let init = init_params(6, 3, &mut Rng::new(7).substream("init"));
        let t_cfg = quick_cfg(8, 5);
        let (p_mae, r_mae) =
            train_autoencoder(&train, &valid, &AEConfig::mae(0.4), &t_cfg, &init).unwrap();
        let (p_mdae, r_mdae) =
            train_autoencoder(&train, &valid, &AEConfig::mdae(0.0, 0.4), &t_cfg, &init).unwrap();
        assert_eq!(p_mae, p_mdae);
        assert_eq!(r_mae.epoch_losses, r_mdae.epoch_losses);
    }

    #[test]
    fn zero_learning_rate_returns_init() {
        let train = tiny_dataset(16, 5, 9);
        let valid = tiny_dataset(4, 5, 10);
        let init = init_params(5, 2, &mut Rng::new(11).substream("init"));
        let mut t_cfg = quick_cfg(12, 3);
        t_cfg.learning_rate = 0.0;
        let (p, _) = train_autoencoder(&train, &valid, &AEConfig::bae(), &t_cfg, &init).unwrap();
        assert_eq!(p, init);
    }

    #[test]
    fn single_full_batch_step_matches_hand_update() {
        let train = tiny_dataset(12, 5, 13);
        let valid = tiny_dataset(4, 5, 14);
        let init = init_params(5, 2, &mut Rng::new(15).substream("init"));
        let t_cfg = TrainConfig {
            batch_size: 12,
            learning_rate: 0.05,
            max_epochs: 1,
            patience: 0,
            seed: 16,
            shuffle_each_epoch: true,
        };
        let cfg = AEConfig::bae();
        let (p, _) = train_autoencoder(&train, &valid, &cfg, &t_cfg, &init).unwrap();
        // Recompute the same single step directly. The shuffled full batch
        // contains all rows, in the epoch-0 shuffle order.
        let base = Rng::new(16);
        let mut order: Vec<usize> = (0..12).collect();
        base.substream_n("shuffle", 0).shuffle(&mut order);
        let batch = train.features.gather_rows(&order);
        let (_, grad) =
            backward(&cfg, &init, &batch, &base.substream_n2("corrupt", 0, 0)).unwrap();
        let mut expect = init.clone();
        expect.step(&grad, 0.05);
        assert_eq!(p, expect);
    }

    #[test]
    fn quadratic_weight_decay_step_matches_hand_arithmetic() {
        // W2 = 0, b2 = 0 reconstructs 0.5 exactly; with x = 0.5 the
        // reconstruction gradient vanishes and only the weight-decay term
        // drives the first update of W1, which is purely quadratic.
        let n = 6;
        let d = 4;
        let x = Mat::from_vec(n, d, vec![0.5; n * d]).unwrap();
        let train = Dataset::from_parts(x, vec![0; n]).unwrap();
        let mut init = init_params(d, 2, &mut Rng::new(17).substream("init"));
        init.w2 = Mat::zeros(d, 2);
        init.b2 = vec![0.0; d];
        let lambda_s = 0.3;
        let lr = 0.1;
        let t_cfg = TrainConfig {
            batch_size: n,
            learning_rate: lr,
            max_epochs: 1,
            patience: 0,
            seed: 18,
            shuffle_each_epoch: false,
        };
        let (p, _) =
            train_autoencoder(&train, &Dataset::from_parts(Mat::zeros(0, d), vec![]).unwrap(),
                &AEConfig::sae(lambda_s), &t_cfg, &init)
            .unwrap();
        for i in 0..init.w1.rows() {
            for j in 0..d {
                let w = init.w1[(i, j)];
                let expect = w - lr * (2.0 * lambda_s * w);
                assert_eq!(p.w1[(i, j)], expect);
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let train = tiny_dataset(40, 8, 19);
        let valid = tiny_dataset(10, 8, 20);
        let init = init_params(8, 3, &mut Rng::new(21).substream("init"));
        let mut t_cfg = quick_cfg(22, 8);
        t_cfg.patience = 3;
        let cfg = AEConfig::mdae(0.1, 0.4);
        let (p1, r1) = train_autoencoder(&train, &valid, &cfg, &t_cfg, &init).unwrap();
        let (p2, r2) = train_autoencoder(&train, &valid, &cfg, &t_cfg, &init).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(r1.epoch_losses, r2.epoch_losses);
        assert_eq!(r1.stopped_epoch, r2.stopped_epoch);
        assert_eq!(r1.to_csv(), r2.to_csv());
    }

    #[test]
    fn full_batch_training_loss_non_increasing() {
        let (data, _) = make_modal_dataset(200, 16, 4, 0.05, 23).unwrap();
        let init = init_params(16, 4, &mut Rng::new(24).substream("init"));
        let t_cfg = TrainConfig {
            batch_size: 200,
            learning_rate: 1e-2,
            max_epochs: 10,
            patience: 0,
            seed: 25,
            shuffle_each_epoch: true,
        };
        let valid = Dataset::from_parts(Mat::zeros(0, 16), vec![]).unwrap();
        let (_, report) =
            train_autoencoder(&data, &valid, &AEConfig::bae(), &t_cfg, &init).unwrap();
        for w in report.epoch_losses.windows(2) {
            assert!(
                w[1].train.total <= w[0].train.total + 1e-12,
                "loss rose: {} -> {}",
                w[0].train.total,
                w[1].train.total
            );
        }
    }

    #[test]
    fn modal_penalty_shrinks_during_mae_training() {
        let (data, _) = make_modal_dataset(300, 16, 4, 0.01, 26).unwrap();
        let init = init_params(16, 4, &mut Rng::new(27).substream("init"));
        let mut cfg = AEConfig::mae(1.0);
        cfg.m_mode = MMode::InvNormDiag;
        let initial = modal_penalty(&init.w2, &build_m(&init.w2, cfg.m_mode).unwrap());
        let t_cfg = TrainConfig {
            batch_size: 50,
            learning_rate: 0.1,
            max_epochs: 30,
            patience: 0,
            seed: 28,
            shuffle_each_epoch: true,
        };
        let valid = Dataset::from_parts(Mat::zeros(0, 16), vec![]).unwrap();
        let (_, report) = train_autoencoder(&data, &valid, &cfg, &t_cfg, &init).unwrap();
        assert!(
            report.final_modal_penalty < initial,
            "penalty {} did not shrink below {}",
            report.final_modal_penalty,
            initial
        );
    }

    #[test]
    fn divergence_reports_position_and_last_params() {
        let train = tiny_dataset(16, 5, 29);
        let valid = tiny_dataset(4, 5, 30);
        let init = init_params(5, 3, &mut Rng::new(31).substream("init"));
        let mut t_cfg = quick_cfg(32, 3);
        t_cfg.learning_rate = 1e155;
        let err =
            train_autoencoder(&train, &valid, &AEConfig::mae(1.0), &t_cfg, &init).unwrap_err();
        match err {
            Error::Divergence {
                epoch,
                batch,
                last_params,
            } => {
                assert_eq!(epoch, 0);
                assert!(batch >= 1);
                assert!(last_params.all_finite());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn early_stopping_returns_validation_best() {
        let train = tiny_dataset(60, 6, 33);
        let valid = tiny_dataset(20, 6, 34);
        let init = init_params(6, 3, &mut Rng::new(35).substream("init"));
        let mut t_cfg = quick_cfg(36, 50);
        t_cfg.patience = 5;
        let (p, report) =
            train_autoencoder(&train, &valid, &AEConfig::bae(), &t_cfg, &init).unwrap();
        assert!(report.stopped_epoch <= 50);
        // The returned parameters reproduce the best recorded validation
        // loss.
        let best = report
            .epoch_losses
            .iter()
            .map(|e| e.val_total)
            .fold(f64::INFINITY, f64::min);
        let base = Rng::new(36);
        let best_epoch = report
            .epoch_losses
            .iter()
            .position(|e| e.val_total == best)
            .unwrap();
        let relchecked = total_loss(
            &AEConfig::bae(),
            &p,
            &valid.features,
            &base.substream_n("eval-valid", best_epoch as u64),
        )
        .unwrap();
        assert_eq!(relchecked.total, best);
    }

    #[test]
    fn checkpoint_round_trip_via_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ae.ckpt");
        let p = init_params(10, 4, &mut Rng::new(37));
        save_checkpoint(&p, &path).unwrap();
        let q = load_checkpoint(&path).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn dims_must_match_init() {
        let train = tiny_dataset(8, 5, 38);
        let valid = tiny_dataset(2, 5, 39);
        let init = init_params(6, 3, &mut Rng::new(40));
        let err = train_autoencoder(&train, &valid, &AEConfig::bae(), &quick_cfg(41, 1), &init)
            .unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn report_csv_shape() {
        let train = tiny_dataset(16, 4, 42);
        let valid = tiny_dataset(4, 4, 43);
        let init = init_params(4, 2, &mut Rng::new(44));
        let (_, report) =
            train_autoencoder(&train, &valid, &AEConfig::bae(), &quick_cfg(45, 4), &init).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.trim_end().split('\n').collect();
        assert_eq!(lines[0], "epoch,recon,modal,contractive,sparse,total,val_total");
        assert_eq!(lines.len(), 1 + report.stopped_epoch);
        assert_eq!(report.epoch_losses.len(), report.stopped_epoch);
        // Variant with every term active populates all columns.
        let _ = Variant::ALL;
    }
}
