//! Shared training loop: gradient accumulation, AdamW, an EMA shadow of
//! the weights, per-epoch dev evaluation and best-checkpoint selection.

use candle_core::backprop::GradStore;
use candle_core::{Tensor, Var};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{ModelError, Result};
use crate::nn::Weights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_macro_f1: f64,
    pub dev_accuracy: f64,
    pub optimizer_steps: usize,
}

/// Index of the epoch with the highest dev macro F1; the earliest wins ties.
pub fn select_best(metrics: &[EpochMetrics]) -> Option<usize> {
    metrics
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |best, (i, m)| match best {
            Some((_, b)) if b >= m.dev_macro_f1 => best,
            _ => Some((i, m.dev_macro_f1)),
        })
        .map(|(i, _)| i)
}

/// Exponential moving average of the weights. The decay ramps up as
/// `min(decay, (1 + t) / (10 + t))` so early shadows are not dominated by
/// the initialization.
pub struct Ema {
    decay: f64,
    updates: usize,
    shadow: Weights,
}

impl Ema {
    pub fn new(weights: &Weights, decay: f64) -> Result<Self> {
        let shadow = weights.iter().map(|(k, v)| Ok((k.clone(), v.detach().copy()?))).collect::<Result<_>>()?;
        Ok(Ema { decay, updates: 0, shadow })
    }

    pub fn effective_decay(&self) -> f64 {
        let t = self.updates as f64;
        self.decay.min((1.0 + t) / (10.0 + t))
    }

    pub fn update(&mut self, weights: &Weights) -> Result<()> {
        let d = self.effective_decay();
        for (name, w) in weights {
            let s = self.shadow.get_mut(name).ok_or_else(|| ModelError::MissingWeight(name.clone()))?;
            *s = ((&*s * d)? + (w.detach() * (1.0 - d))?)?;
        }
        self.updates += 1;
        Ok(())
    }

    pub fn shadow(&self) -> &Weights {
        &self.shadow
    }
}

pub(crate) struct Trainer {
    vars: Vec<(String, Var)>,
    opt: AdamW,
    ema: Ema,
    pending: GradStore,
    micro: usize,
    accum: usize,
    pub steps: usize,
}

impl Trainer {
    pub fn new(init: &Weights, cfg: &TrainConfig) -> Result<Self> {
        let vars: Vec<(String, Var)> =
            init.iter().map(|(k, v)| Ok((k.clone(), Var::from_tensor(v)?))).collect::<Result<_>>()?;
        let opt = AdamW::new(
            vars.iter().map(|(_, v)| v.clone()).collect(),
            ParamsAdamW { lr: cfg.learning_rate, weight_decay: cfg.weight_decay, ..ParamsAdamW::default() },
        )?;
        let ema = Ema::new(init, cfg.ema_decay)?;
        Ok(Trainer { vars, opt, ema, pending: GradStore::default(), micro: 0, accum: cfg.grad_accum_steps, steps: 0 })
    }

    /// Live weights: tensors backed by the trainable variables.
    pub fn live(&self) -> Weights {
        self.vars.iter().map(|(k, v)| (k.clone(), v.as_tensor().clone())).collect()
    }

    pub fn ema(&self) -> &Ema {
        &self.ema
    }

    /// Backpropagates one micro-batch loss and steps the optimizer every
    /// `grad_accum_steps` micro-batches.
    pub fn push(&mut self, loss: &Tensor) -> Result<()> {
        let grads = (loss / self.accum as f64)?.backward()?;
        self.pending.extend(grads)?;
        self.micro += 1;
        if self.micro == self.accum {
            self.apply()?;
        }
        Ok(())
    }

    /// Applies whatever gradient is pending.
    pub fn apply(&mut self) -> Result<()> {
        if self.micro == 0 {
            return Ok(());
        }
        let grads = std::mem::take(&mut self.pending);
        self.opt.step(&grads)?;
        self.micro = 0;
        self.steps += 1;
        self.ema.update(&self.live())?;
        Ok(())
    }
}

pub(crate) struct FitOutcome {
    pub best: Weights,
    pub best_epoch: usize,
    pub metrics: Vec<EpochMetrics>,
}

/// Runs the epoch loop. `loss` builds a differentiable loss from live
/// weights for a micro-batch; `evaluate` scores a weight set on dev and
/// returns `(macro_f1, accuracy)`.
pub(crate) fn fit<E>(
    cfg: &TrainConfig,
    init: &Weights,
    examples: &[E],
    id_of: impl Fn(&E) -> &str,
    mut loss: impl FnMut(&Weights, &[&E]) -> Result<Tensor>,
    mut evaluate: impl FnMut(&Weights) -> Result<(f64, f64)>,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<FitOutcome> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(ModelError::NoExamples("training set is empty".into()));
    }
    let mut trainer = Trainer::new(init, cfg)?;
    let mut metrics = Vec::new();
    let mut best: Option<(usize, Weights)> = None;
    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(epoch as u64));
        let mut order: Vec<&E> = examples.iter().collect();
        order.shuffle(&mut rng);
        let live = trainer.live();
        let (mut total, mut batches) = (0.0f64, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let l = loss(&live, chunk)?;
            let value = f64::from(l.to_scalar::<f32>()?);
            if !value.is_finite() {
                return Err(ModelError::NonFinite {
                    epoch,
                    step: trainer.steps,
                    first_id: id_of(chunk[0]).to_string(),
                });
            }
            total += value;
            batches += 1;
            trainer.push(&l)?;
        }
        trainer.apply()?;
        let shadow = trainer.ema().shadow().clone();
        let (dev_macro_f1, dev_accuracy) = evaluate(&shadow)?;
        let m = EpochMetrics {
            epoch,
            train_loss: total / batches.max(1) as f64,
            dev_macro_f1,
            dev_accuracy,
            optimizer_steps: trainer.steps,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} dev macro F1 {:.4} dev accuracy {:.4} ({} steps)",
            m.train_loss,
            m.dev_macro_f1,
            m.dev_accuracy,
            m.optimizer_steps
        );
        on_epoch(&m);
        metrics.push(m);
        if select_best(&metrics) == Some(metrics.len() - 1) {
            best = Some((epoch, shadow));
        }
    }
    let (best_epoch, best) = best.expect("at least one epoch ran");
    Ok(FitOutcome { best, best_epoch, metrics })
}
