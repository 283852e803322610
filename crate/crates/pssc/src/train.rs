//! Full-batch training: AE pretraining, then fine-tuning of the unified
//! objective with Adam and an epoch-wise refresh of the pseudo-graph and
//! pseudo-labels.

use crate::error::{PsscError, Result};
use crate::linalg::Mat;
use crate::loss::{loss_and_grads_with_cache, recon_loss_and_grads, LossBreakdown, LossConfig};
use crate::model::{forward, pseudo_labels, ForwardMode, Grads, PsscParams};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub lr_pretrain: f64,
    pub lr_finetune: f64,
    pub epochs_pretrain: usize,
    pub epochs_finetune: usize,
    pub thres: f64,
    pub margin: f64,
    pub warmup_epochs: usize,
    pub seed: u64,
    pub freeze_laplacian: bool,
    pub normalize_pair_losses: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma1: 1.0,
            gamma2: 0.1,
            gamma3: 0.1,
            lr_pretrain: 1e-3,
            lr_finetune: 1e-4,
            epochs_pretrain: 500,
            epochs_finetune: 300,
            thres: 0.8,
            margin: 1.0,
            warmup_epochs: 1,
            seed: 0,
            freeze_laplacian: false,
            normalize_pair_losses: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr_pretrain <= 0.0 || self.lr_finetune <= 0.0 {
            return Err(PsscError::config("learning rates must be positive"));
        }
        if !(self.thres > 0.0 && self.thres <= 1.0) {
            return Err(PsscError::config("thres must lie in (0, 1]"));
        }
        if self.gamma1 < 0.0 || self.gamma2 < 0.0 || self.gamma3 < 0.0 {
            return Err(PsscError::config("gamma weights must be non-negative"));
        }
        Ok(())
    }

    fn loss_config(&self, warmup: bool) -> LossConfig {
        LossConfig {
            gamma1: self.gamma1,
            gamma2: if warmup { 0.0 } else { self.gamma2 },
            gamma3: if warmup { 0.0 } else { self.gamma3 },
            margin: self.margin,
            normalize_pair_losses: self.normalize_pair_losses,
            freeze_laplacian: self.freeze_laplacian,
        }
    }
}

/// Bias-corrected Adam accumulators shaped like the parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: PsscParams,
    pub v: PsscParams,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &PsscParams) -> AdamState {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One coordinatewise bias-corrected Adam update.
pub fn adam_step(state: &mut AdamState, params: &mut PsscParams, grads: &Grads, lr: f64) {
    state.t += 1;
    let b1 = state.beta1;
    let b2 = state.beta2;
    let eps = state.eps;
    let bc1 = 1.0 - b1.powi(state.t as i32);
    let bc2 = 1.0 - b2.powi(state.t as i32);
    params.visit_with3(grads, &mut state.m, &mut state.v, |p, g, m, v| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    });
}

/// Per-epoch record of the loss terms and confident-sample count.
#[derive(Debug, Clone, Default)]
pub struct TrainTrace {
    pub epochs: Vec<LossBreakdown>,
    pub confident_counts: Vec<usize>,
    /// max|diag(C)| measured after each epoch's update.
    pub c_diag_max: Vec<f64>,
    /// Worst classifier row-sum deviation from 1 in that epoch's forward pass.
    pub f_row_sum_err: Vec<f64>,
}

impl TrainTrace {
    fn push(&mut self, bd: LossBreakdown, confident: usize, c_diag: f64, f_err: f64) {
        self.epochs.push(bd);
        self.confident_counts.push(confident);
        self.c_diag_max.push(c_diag);
        self.f_row_sum_err.push(f_err);
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

/// Plain-AE pretraining (self-expression and classifier untouched).
pub fn pretrain(x: &Mat, mut params: PsscParams, cfg: &TrainConfig) -> Result<(PsscParams, TrainTrace)> {
    cfg.validate()?;
    let mut adam = AdamState::new(&params);
    let mut trace = TrainTrace::default();
    for epoch in 0..cfg.epochs_pretrain {
        let (recon, grads) = recon_loss_and_grads(&params, x)?;
        if !recon.is_finite() {
            return Err(PsscError::Divergence {
                epoch,
                term: "recon".into(),
            });
        }
        adam_step(&mut adam, &mut params, &grads, cfg.lr_pretrain);
        trace.push(
            LossBreakdown {
                recon,
                total: recon,
                ..LossBreakdown::default()
            },
            0,
            params.max_abs_c_diagonal(),
            0.0,
        );
    }
    Ok((params, trace))
}

/// Fine-tuning of the unified objective: per epoch, one full-batch Adam step
/// against gradients computed from that epoch's pre-update forward pass, with
/// pseudo-graph and pseudo-labels refreshed from the same pass.
pub fn finetune(x: &Mat, mut params: PsscParams, cfg: &TrainConfig) -> Result<(PsscParams, TrainTrace)> {
    cfg.validate()?;
    if x.cols() != params.n() {
        return Err(PsscError::contract(format!(
            "finetune: X has {} columns but C is {}×{}",
            x.cols(),
            params.n(),
            params.n()
        )));
    }
    let mut adam = AdamState::new(&params);
    let mut trace = TrainTrace::default();
    for epoch in 0..cfg.epochs_finetune {
        let cache = forward(&params, x, ForwardMode::Full)?;
        let labels = pseudo_labels(&cache.f, cfg.thres);
        let warmup = epoch < cfg.warmup_epochs;
        let loss_cfg = cfg.loss_config(warmup);
        let (bd, grads) =
            loss_and_grads_with_cache(&params, x, &cache, &loss_cfg, &labels).map_err(|e| {
                match e {
                    PsscError::Divergence { term, .. } => PsscError::Divergence { epoch, term },
                    other => other,
                }
            })?;
        adam_step(&mut adam, &mut params, &grads, cfg.lr_finetune);
        params.zero_c_diagonal();
        debug_assert_eq!(params.max_abs_c_diagonal(), 0.0);
        let mut f_err = 0.0f64;
        for i in 0..cache.f.rows() {
            let sum: f64 = cache.f.row(i).iter().sum();
            f_err = f_err.max((sum - 1.0).abs());
        }
        trace.push(bd, labels.confident_count(), params.max_abs_c_diagonal(), f_err);

        // early stop on a flat total over a 10-epoch window
        let t = trace.len();
        if t > 10 {
            let prev = trace.epochs[t - 11].total;
            let cur = trace.epochs[t - 1].total;
            if (cur - prev).abs() / prev.abs().max(1e-12) < 1e-7 {
                break;
            }
        }
    }
    Ok((params, trace))
}
