//! Minibatch Adam over the mean tag loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{record_batch, BetaLeaves, CountModelError, CountModelParams, TagExample};
use crate::diffengine::{AdamConfig, AdamState, Matrix, Tape};
use crate::predictors::Predictor;

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Keep the regression weights at their initial values.
    pub freeze_betas: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 15, batch_size: 32, adam: AdamConfig::default(), seed: 0, freeze_betas: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    /// Example-weighted mean of the minibatch losses seen during the epoch.
    pub train_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub predictor: Predictor,
    pub params: CountModelParams,
    pub curve: Vec<EpochReport>,
}

fn betas_matrices(p: &CountModelParams) -> [Matrix; 2] {
    [Matrix::column(p.beta_target.to_vec()), Matrix::column(p.beta_ntc.to_vec())]
}

/// Trains `predictor` and the regression weights in `params`; dispersions
/// stay fixed. `on_epoch` sees the model after every epoch.
pub fn train<F>(
    examples: &[TagExample],
    mut predictor: Predictor,
    mut params: CountModelParams,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainedModel, CountModelError>
where
    F: FnMut(&EpochReport, &Predictor, &CountModelParams),
{
    params.validate()?;
    if params.proportion_mode.needs_adjust() && !predictor.has_adjust() {
        return Err(CountModelError::AdjustMissing);
    }
    if examples.is_empty() || cfg.batch_size == 0 {
        return Err(CountModelError::InvalidConfig("training needs examples and a positive batch size".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pred_adam = AdamState::new(cfg.adam.clone(), predictor.params().values());
    let mut beta_adam = AdamState::new(cfg.adam.clone(), &betas_matrices(&params));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&TagExample> = idx.iter().map(|&i| &examples[i]).collect();
            let mut tape = Tape::new();
            let leaves = predictor.params().record(&mut tape);
            let betas = BetaLeaves::record(&mut tape, &params);
            let nodes = record_batch(&mut tape, &predictor, &leaves, betas, &batch, &params)?;
            let loss = tape.value(nodes.loss).item();
            if !loss.is_finite() {
                let mu = tape.value(nodes.mu_target);
                let bad = mu.as_slice().iter().position(|m| !(m.is_finite() && *m > 0.0));
                let detail = match bad {
                    Some(k) => format!("loss={loss}; tag `{}` has mu_target={}", batch[k].tag_id, mu.as_slice()[k]),
                    None => format!("loss={loss}"),
                };
                return Err(CountModelError::NaNLoss { epoch, batch: bi, detail });
            }
            total += loss * batch.len() as f64;

            let mut grads = tape.backward(nodes.loss)?;
            let pg: Vec<Matrix> = leaves.iter().map(|&l| grads.take(l)).collect();
            pred_adam.step(predictor.params_mut().values_mut(), &pg)?;
            if !cfg.freeze_betas {
                let bg = [grads.take(betas.target), grads.take(betas.ntc)];
                let mut bm = betas_matrices(&params);
                beta_adam.step(&mut bm, &bg)?;
                params.beta_target.copy_from_slice(bm[0].as_slice());
                params.beta_ntc.copy_from_slice(bm[1].as_slice());
            }
        }
        let report = EpochReport { epoch, train_loss: total / examples.len() as f64 };
        on_epoch(&report, &predictor, &params);
        curve.push(report);
    }
    Ok(TrainedModel { predictor, params, curve })
}
