//! Autoencoder variants: forward passes, loss terms, and analytic gradients.
//!
//! One hidden layer, sigmoid activations on both sides. Eight variants share
//! the reconstruction loss and differ in which penalties are active:
//!
//! | variant | corruption | modal | contractive | sparse |
//! |---------|------------|-------|-------------|--------|
//! | BAE     |            |       |             |        |
//! | DAE     | α          |       |             |        |
//! | CAE     |            |       | λ_c         |        |
//! | SAE     |            |       |             | λ_s    |
//! | MAE     |            | λ_m   |             |        |
//! | MDAE    | α          | λ_m   |             |        |
//! | MCAE    |            | λ_m   | λ_c         |        |
//! | MSAE    |            | λ_m   |             | λ_s    |
//!
//! The modal penalty drives the Gram matrix of the decoder columns toward
//! identity: either the raw Gram (`Identity` mode, columns end up
//! orthonormal) or the cosine-similarity Gram (`InvNormDiag` mode, columns
//! end up mutually orthogonal but freely scaled). In `InvNormDiag` mode the
//! per-column scales are recomputed from the current decoder every time the
//! penalty is evaluated but treated as constants under differentiation; the
//! analytic gradient is checked against finite differences of that frozen
//! objective.

use crate::error::{Error, Result};
use crate::mat::{frob_sq, matmul, sigmoid, Mat};
use crate::params::ParamSet;
use crate::rng::Rng;

/// Clamp bound keeping the KL sparsity divergence finite.
const KL_CLAMP: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Bae,
    Dae,
    Cae,
    Sae,
    Mae,
    Mdae,
    Mcae,
    Msae,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Bae,
        Variant::Dae,
        Variant::Cae,
        Variant::Sae,
        Variant::Mae,
        Variant::Mdae,
        Variant::Mcae,
        Variant::Msae,
    ];

    pub fn uses_corruption(self) -> bool {
        matches!(self, Variant::Dae | Variant::Mdae)
    }

    pub fn uses_modal(self) -> bool {
        matches!(
            self,
            Variant::Mae | Variant::Mdae | Variant::Mcae | Variant::Msae
        )
    }

    pub fn uses_contractive(self) -> bool {
        matches!(self, Variant::Cae | Variant::Mcae)
    }

    pub fn uses_sparse(self) -> bool {
        matches!(self, Variant::Sae | Variant::Msae)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Bae => "bae",
            Variant::Dae => "dae",
            Variant::Cae => "cae",
            Variant::Sae => "sae",
            Variant::Mae => "mae",
            Variant::Mdae => "mdae",
            Variant::Mcae => "mcae",
            Variant::Msae => "msae",
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        match s.to_ascii_lowercase().as_str() {
            "bae" => Ok(Variant::Bae),
            "dae" => Ok(Variant::Dae),
            "cae" => Ok(Variant::Cae),
            "sae" => Ok(Variant::Sae),
            "mae" => Ok(Variant::Mae),
            "mdae" => Ok(Variant::Mdae),
            "mcae" => Ok(Variant::Mcae),
            "msae" => Ok(Variant::Msae),
            other => Err(Error::Config(format!("unknown variant '{}'", other))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Choice of the constant matrix in the orthogonality penalty.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MMode {
    /// Penalize the raw Gram: columns driven to orthonormality.
    Identity,
    /// Penalize the cosine-similarity Gram (per-column inverse-norm scaling,
    /// detached): columns driven to mutual orthogonality, norms free.
    InvNormDiag,
}

impl MMode {
    pub fn parse(s: &str) -> Result<MMode> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(MMode::Identity),
            "invnorm" | "invnormdiag" => Ok(MMode::InvNormDiag),
            other => Err(Error::Config(format!("unknown m-mode '{}'", other))),
        }
    }
}

/// Form of the sparsity penalty for SAE/MSAE.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sparsity {
    /// Squared Frobenius norms of both weight matrices.
    WeightDecay,
    /// KL divergence between a target rate and the mean hidden activations.
    Kl { rho: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AEConfig {
    pub variant: Variant,
    pub lambda_m: f64,
    pub lambda_c: f64,
    pub lambda_s: f64,
    /// Corruption fraction for the denoising variants, in [0, 1].
    pub alpha: f64,
    pub m_mode: MMode,
    pub sparsity: Sparsity,
}

impl AEConfig {
    pub fn new(variant: Variant) -> Self {
        AEConfig {
            variant,
            lambda_m: 0.0,
            lambda_c: 0.0,
            lambda_s: 0.0,
            alpha: 0.0,
            m_mode: MMode::InvNormDiag,
            sparsity: Sparsity::WeightDecay,
        }
    }

    pub fn bae() -> Self {
        AEConfig::new(Variant::Bae)
    }

    pub fn dae(alpha: f64) -> Self {
        AEConfig {
            alpha,
            ..AEConfig::new(Variant::Dae)
        }
    }

    pub fn cae(lambda_c: f64) -> Self {
        AEConfig {
            lambda_c,
            ..AEConfig::new(Variant::Cae)
        }
    }

    pub fn sae(lambda_s: f64) -> Self {
        AEConfig {
            lambda_s,
            ..AEConfig::new(Variant::Sae)
        }
    }

    pub fn mae(lambda_m: f64) -> Self {
        AEConfig {
            lambda_m,
            ..AEConfig::new(Variant::Mae)
        }
    }

    pub fn mdae(alpha: f64, lambda_m: f64) -> Self {
        AEConfig {
            alpha,
            lambda_m,
            ..AEConfig::new(Variant::Mdae)
        }
    }

    pub fn mcae(lambda_c: f64, lambda_m: f64) -> Self {
        AEConfig {
            lambda_c,
            lambda_m,
            ..AEConfig::new(Variant::Mcae)
        }
    }

    pub fn msae(lambda_s: f64, lambda_m: f64) -> Self {
        AEConfig {
            lambda_s,
            lambda_m,
            ..AEConfig::new(Variant::Msae)
        }
    }

    /// Reject hyperparameters that are out of range or active for a variant
    /// that does not use them.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lambda_m.is_finite() && self.lambda_m >= 0.0) {
            return bad(format!("lambda_m must be finite and >= 0, got {}", self.lambda_m));
        }
        if !(self.lambda_c.is_finite() && self.lambda_c >= 0.0) {
            return bad(format!("lambda_c must be finite and >= 0, got {}", self.lambda_c));
        }
        if !(self.lambda_s.is_finite() && self.lambda_s >= 0.0) {
            return bad(format!("lambda_s must be finite and >= 0, got {}", self.lambda_s));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if let Sparsity::Kl { rho } = self.sparsity {
            if !(rho > 0.0 && rho < 1.0) {
                return bad(format!("KL target rate must lie in (0, 1), got {}", rho));
            }
        }
        if self.lambda_m > 0.0 && !self.variant.uses_modal() {
            return bad(format!("lambda_m set but variant {} has no modal term", self.variant));
        }
        if self.lambda_c > 0.0 && !self.variant.uses_contractive() {
            return bad(format!(
                "lambda_c set but variant {} has no contractive term",
                self.variant
            ));
        }
        if self.lambda_s > 0.0 && !self.variant.uses_sparse() {
            return bad(format!("lambda_s set but variant {} has no sparse term", self.variant));
        }
        if self.alpha > 0.0 && !self.variant.uses_corruption() {
            return bad(format!("alpha set but variant {} has no corruption", self.variant));
        }
        Ok(())
    }
}

/// Per-term loss values. Every term already includes its λ weight, so the
/// terms sum to `total` exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub recon: f64,
    pub modal: f64,
    pub contractive: f64,
    pub sparse: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn compose(recon: f64, modal: f64, contractive: f64, sparse: f64) -> Self {
        LossBreakdown {
            recon,
            modal,
            contractive,
            sparse,
            total: recon + modal + contractive + sparse,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
            && self.recon.is_finite()
            && self.modal.is_finite()
            && self.contractive.is_finite()
            && self.sparse.is_finite()
    }
}

/// Q = σ(X·W1ᵀ + b1), one row of hidden activations per sample.
pub fn encode(params: &ParamSet, x: &Mat) -> Result<Mat> {
    let z = matmul(x, &params.w1.transpose())?.add_row_vec(&params.b1)?;
    Ok(sigmoid(&z))
}

/// X̂ = σ(Q·W2ᵀ + b2): each reconstruction is the sigmoid of the
/// latent-weighted sum of decoder columns plus bias.
pub fn decode(params: &ParamSet, q: &Mat) -> Result<Mat> {
    let z = matmul(q, &params.w2.transpose())?.add_row_vec(&params.b2)?;
    Ok(sigmoid(&z))
}

/// Mean over samples of the squared reconstruction error (sum over feature
/// dimensions within a sample).
pub fn recon_loss(x: &Mat, x_hat: &Mat) -> Result<f64> {
    if x.rows() != x_hat.rows() || x.cols() != x_hat.cols() {
        return Err(Error::Dimension(format!(
            "reconstruction loss on {}x{} vs {}x{}",
            x.rows(),
            x.cols(),
            x_hat.rows(),
            x_hat.cols()
        )));
    }
    let mut sum = 0.0;
    for (a, b) in x.data().iter().zip(x_hat.data()) {
        let d = a - b;
        sum += d * d;
    }
    Ok(sum / x.rows() as f64)
}

/// Scaling context for the orthogonality penalty. `scales` is `None` in
/// `Identity` mode; in `InvNormDiag` mode it holds the per-column factors
/// 1/‖wᵢ‖, which are constants with respect to differentiation.
#[derive(Clone, Debug)]
pub struct PenaltyCtx {
    scales: Option<Vec<f64>>,
}

impl PenaltyCtx {
    pub fn mode(&self) -> MMode {
        if self.scales.is_some() {
            MMode::InvNormDiag
        } else {
            MMode::Identity
        }
    }
}

/// Build the penalty context for the given decoder matrix and mode.
pub fn build_m(w2: &Mat, mode: MMode) -> Result<PenaltyCtx> {
    match mode {
        MMode::Identity => Ok(PenaltyCtx { scales: None }),
        MMode::InvNormDiag => {
            let m = w2.cols();
            let mut scales = Vec::with_capacity(m);
            for j in 0..m {
                let norm_sq: f64 = (0..w2.rows()).map(|r| w2[(r, j)] * w2[(r, j)]).sum();
                if norm_sq == 0.0 {
                    return Err(Error::DegenerateColumn(format!(
                        "decoder column {} is zero; inverse-norm scaling undefined",
                        j
                    )));
                }
                scales.push(1.0 / norm_sq.sqrt());
            }
            Ok(PenaltyCtx {
                scales: Some(scales),
            })
        }
    }
}

/// Deviation of the (scaled) decoder Gram matrix from identity, as a squared
/// Frobenius norm. With `InvNormDiag` scaling the Gram is the
/// cosine-similarity matrix, whose diagonal is one by construction, so only
/// off-diagonal cosines contribute.
pub fn modal_penalty(w2: &Mat, ctx: &PenaltyCtx) -> f64 {
    let gram = matmul(&w2.transpose(), w2).expect("transpose shapes always agree");
    let m = gram.rows();
    let mut p = 0.0;
    match &ctx.scales {
        None => {
            for i in 0..m {
                for j in 0..m {
                    let target = if i == j { 1.0 } else { 0.0 };
                    let dev = gram[(i, j)] - target;
                    p += dev * dev;
                }
            }
        }
        Some(s) => {
            debug_assert_eq!(s.len(), m, "context built for a different matrix");
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        let cos = s[i] * gram[(i, j)] * s[j];
                        p += cos * cos;
                    }
                }
            }
        }
    }
    p
}

/// Gradient of [`modal_penalty`] with respect to the decoder, holding the
/// context scales constant: 4·W2·(S), where S is the (scaled) Gram deviation.
pub fn modal_penalty_grad(w2: &Mat, ctx: &PenaltyCtx) -> Mat {
    let gram = matmul(&w2.transpose(), w2).expect("transpose shapes always agree");
    let m = gram.rows();
    let mut s_mat = Mat::zeros(m, m);
    match &ctx.scales {
        None => {
            for i in 0..m {
                for j in 0..m {
                    let target = if i == j { 1.0 } else { 0.0 };
                    s_mat[(i, j)] = gram[(i, j)] - target;
                }
            }
        }
        Some(s) => {
            debug_assert_eq!(s.len(), m, "context built for a different matrix");
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        // D S D with S the zero-diagonal cosine deviation.
                        s_mat[(i, j)] = s[i] * (s[i] * gram[(i, j)] * s[j]) * s[j];
                    }
                }
            }
        }
    }
    matmul(w2, &s_mat)
        .expect("m x m product always agrees")
        .scale(4.0)
}

/// Masking corruption: each entry is independently zeroed with probability
/// `alpha`. `alpha == 0` returns the input untouched without consuming
/// randomness.
pub fn corrupt(x: &Mat, alpha: f64, rng: &mut Rng) -> Mat {
    if alpha <= 0.0 {
        return x.clone();
    }
    let mut out = x.clone();
    for v in out.data_mut() {
        if rng.uniform() < alpha {
            *v = 0.0;
        }
    }
    out
}

/// Batch mean of the squared Frobenius norm of the encoder Jacobian. For a
/// sigmoid encoder this is Σᵢ (qᵢ(1−qᵢ))²·‖row i of W1‖² per sample.
pub fn contractive_penalty(params: &ParamSet, x: &Mat) -> Result<f64> {
    let q = encode(params, x)?;
    Ok(contractive_penalty_given_q(params, &q))
}

fn contractive_penalty_given_q(params: &ParamSet, q: &Mat) -> f64 {
    let (_, m) = params.dims();
    let row_norms_sq: Vec<f64> = (0..m)
        .map(|i| params.w1.row(i).iter().map(|w| w * w).sum())
        .collect();
    let n = q.rows();
    let mut total = 0.0;
    for s in 0..n {
        let qrow = q.row(s);
        for i in 0..m {
            let h = qrow[i] * (1.0 - qrow[i]);
            total += h * h * row_norms_sq[i];
        }
    }
    total / n as f64
}

/// Sparsity penalty: either plain weight decay over both weight matrices or
/// the KL divergence between the target rate and per-unit mean activations.
/// Mean activations are clamped away from {0, 1} to keep the divergence
/// finite.
pub fn sparse_penalty(params: &ParamSet, q: &Mat, cfg: &AEConfig) -> f64 {
    match cfg.sparsity {
        Sparsity::WeightDecay => frob_sq(&params.w1) + frob_sq(&params.w2),
        Sparsity::Kl { rho } => {
            let rates = mean_activations_clamped(q);
            rates
                .iter()
                .map(|&r| rho * (rho / r).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - r)).ln())
                .sum()
        }
    }
}

fn mean_activations_clamped(q: &Mat) -> Vec<f64> {
    let n = q.rows() as f64;
    q.col_sums()
        .into_iter()
        .map(|s| (s / n).clamp(KL_CLAMP, 1.0 - KL_CLAMP))
        .collect()
}

/// Encoder input for the variant: corrupted for the denoising family,
/// the clean batch otherwise.
fn encoder_input(cfg: &AEConfig, x: &Mat, rng: &Rng) -> Mat {
    if cfg.variant.uses_corruption() && cfg.alpha > 0.0 {
        let mut mask_rng = rng.clone();
        corrupt(x, cfg.alpha, &mut mask_rng)
    } else {
        x.clone()
    }
}

/// Full loss for the configured variant. The reconstruction target is always
/// the clean batch; denoising variants encode a corrupted copy drawn from
/// `rng` (the same generator state reproduces the same mask, which is how
/// [`backward`] stays consistent with its own loss).
pub fn total_loss(cfg: &AEConfig, params: &ParamSet, x: &Mat, rng: &Rng) -> Result<LossBreakdown> {
    cfg.validate()?;
    let ctx = if cfg.variant.uses_modal() && cfg.lambda_m > 0.0 {
        Some(build_m(&params.w2, cfg.m_mode)?)
    } else {
        None
    };
    total_loss_with_ctx(cfg, params, x, rng, ctx.as_ref())
}

/// Like [`total_loss`], but with a caller-supplied penalty context, so the
/// objective with frozen scales can be probed directly (finite-difference
/// checks of the detached `InvNormDiag` objective).
pub fn total_loss_with_ctx(
    cfg: &AEConfig,
    params: &ParamSet,
    x: &Mat,
    rng: &Rng,
    ctx: Option<&PenaltyCtx>,
) -> Result<LossBreakdown> {
    cfg.validate()?;
    let enc_in = encoder_input(cfg, x, rng);
    let q = encode(params, &enc_in)?;
    let x_hat = decode(params, &q)?;
    let recon = recon_loss(x, &x_hat)?;

    let modal = if cfg.variant.uses_modal() && cfg.lambda_m > 0.0 {
        let built;
        let ctx = match ctx {
            Some(c) => c,
            None => {
                built = build_m(&params.w2, cfg.m_mode)?;
                &built
            }
        };
        cfg.lambda_m * modal_penalty(&params.w2, ctx)
    } else {
        0.0
    };

    let contractive = if cfg.variant.uses_contractive() && cfg.lambda_c > 0.0 {
        cfg.lambda_c * contractive_penalty(params, x)?
    } else {
        0.0
    };

    let sparse = if cfg.variant.uses_sparse() && cfg.lambda_s > 0.0 {
        cfg.lambda_s * sparse_penalty(params, &q, cfg)
    } else {
        0.0
    };

    Ok(LossBreakdown::compose(recon, modal, contractive, sparse))
}

/// Analytic gradient of [`total_loss`] with respect to all of θ, along with
/// the loss breakdown from the shared forward pass. For denoising variants
/// the corruption mask is drawn from `rng` exactly as in [`total_loss`].
/// `InvNormDiag` scales are rebuilt from the current decoder and detached.
pub fn backward(
    cfg: &AEConfig,
    params: &ParamSet,
    x: &Mat,
    rng: &Rng,
) -> Result<(LossBreakdown, ParamSet)> {
    cfg.validate()?;
    let (d, m) = params.dims();
    let n = x.rows();
    let enc_in = encoder_input(cfg, x, rng);
    let q = encode(params, &enc_in)?;
    let x_hat = decode(params, &q)?;
    let recon = recon_loss(x, &x_hat)?;

    let mut grad = ParamSet::zeros(d, m);

    // Reconstruction term: dL/dZ2 = (2/n)(x̂ − x) ⊙ x̂(1 − x̂).
    let scale = 2.0 / n as f64;
    let g2 = x_hat
        .zip_with(x, |xh, xv| scale * (xh - xv) * xh * (1.0 - xh))
        .expect("shapes checked by recon_loss");
    grad.w2 = matmul(&g2.transpose(), &q)?;
    grad.b2 = g2.col_sums();
    let gq = matmul(&g2, &params.w2)?;
    let g1 = gq
        .zip_with(&q, |g, qv| g * qv * (1.0 - qv))
        .expect("same shape by construction");
    grad.w1 = matmul(&g1.transpose(), &enc_in)?;
    grad.b1 = g1.col_sums();

    // Modal term on W2, context scales detached.
    let modal = if cfg.variant.uses_modal() && cfg.lambda_m > 0.0 {
        let ctx = build_m(&params.w2, cfg.m_mode)?;
        let p = modal_penalty(&params.w2, &ctx);
        grad.w2
            .add_scaled(&modal_penalty_grad(&params.w2, &ctx), cfg.lambda_m);
        cfg.lambda_m * p
    } else {
        0.0
    };

    // Contractive term on W1 and b1 (clean input; the contractive variants
    // have no corruption, so q here is the clean encoding).
    let contractive = if cfg.variant.uses_contractive() && cfg.lambda_c > 0.0 {
        let p = contractive_penalty_given_q(params, &q);
        let row_norms_sq: Vec<f64> = (0..m)
            .map(|i| params.w1.row(i).iter().map(|w| w * w).sum())
            .collect();
        // Direct weight dependence: (2/n)·Σ_s h², per row of W1.
        let mut h_sq_sums = vec![0.0; m];
        let mut t = Mat::zeros(n, m);
        for s in 0..n {
            let qrow = q.row(s);
            for i in 0..m {
                let h = qrow[i] * (1.0 - qrow[i]);
                h_sq_sums[i] += h * h;
                // Chain through the pre-activation: h² changes at rate
                // 2h·h' with h' = h(1−2q).
                t[(s, i)] = scale * row_norms_sq[i] * h * h * (1.0 - 2.0 * qrow[i]);
            }
        }
        for i in 0..m {
            let w_scale = cfg.lambda_c * scale * h_sq_sums[i];
            for jj in 0..d {
                grad.w1[(i, jj)] += w_scale * params.w1[(i, jj)];
            }
        }
        grad.w1.add_scaled(&matmul(&t.transpose(), x)?, cfg.lambda_c);
        for (b, v) in grad.b1.iter_mut().zip(t.col_sums()) {
            *b += cfg.lambda_c * v;
        }
        cfg.lambda_c * p
    } else {
        0.0
    };

    // Sparse term.
    let sparse = if cfg.variant.uses_sparse() && cfg.lambda_s > 0.0 {
        let p = sparse_penalty(params, &q, cfg);
        match cfg.sparsity {
            Sparsity::WeightDecay => {
                grad.w1.add_scaled(&params.w1, 2.0 * cfg.lambda_s);
                grad.w2.add_scaled(&params.w2, 2.0 * cfg.lambda_s);
            }
            Sparsity::Kl { rho } => {
                let rates = mean_activations_clamped(&q);
                let raw_rates: Vec<f64> =
                    q.col_sums().into_iter().map(|s| s / n as f64).collect();
                let mut u = Mat::zeros(n, m);
                for (i, (&r, &raw)) in rates.iter().zip(&raw_rates).enumerate() {
                    // Clamped units sit on a locally constant branch of the
                    // objective; their gradient contribution is zero.
                    if raw < KL_CLAMP || raw > 1.0 - KL_CLAMP {
                        continue;
                    }
                    let dkl = -rho / r + (1.0 - rho) / (1.0 - r);
                    for s in 0..n {
                        let qv = q[(s, i)];
                        u[(s, i)] = dkl * qv * (1.0 - qv) / n as f64;
                    }
                }
                grad.w1.add_scaled(&matmul(&u.transpose(), x)?, cfg.lambda_s);
                for (b, v) in grad.b1.iter_mut().zip(u.col_sums()) {
                    *b += cfg.lambda_s * v;
                }
            }
        }
        cfg.lambda_s * p
    } else {
        0.0
    };

    Ok((
        LossBreakdown::compose(recon, modal, contractive, sparse),
        grad,
    ))
}
