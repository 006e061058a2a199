//! Mini-batch training loop and evaluation.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::math::ParamSet;
use crate::metrics::{compute_metrics, ApMethod, Metrics, ScoreBasis};
use crate::model::GrmModel;
use crate::optim::{AdamConfig, OptimizerState, SgdConfig};
use crate::scalar::Scalar;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
    pub sgd: SgdConfig,
    pub adam: AdamConfig,
    /// Epochs without a validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub ap_method: ApMethod,
    pub score_basis: ScoreBasis,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            seed: 0,
            sgd: SgdConfig::default(),
            adam: AdamConfig::default(),
            patience: 10,
            ap_method: ApMethod::RankAverage,
            score_basis: ScoreBasis::Probability,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch_size must be positive".into()));
        }
        self.sgd.validate()?;
        self.adam.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss over the epoch, each sample scored just before its batch update.
    pub train_loss: f64,
    pub val_map: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Mean training loss of the initial parameters.
    pub initial_loss: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned (0 = initial).
    pub best_epoch: usize,
    pub stopped_early: bool,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

impl History {
    /// One line per epoch, preceded by the initial loss.
    pub fn to_text(&self) -> String {
        let mut out = format!("epoch=0 train_loss={:.6}\n", self.initial_loss);
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "epoch={} train_loss={:.6} val_map={} val_accuracy={}",
                e.epoch,
                e.train_loss,
                opt(e.val_map),
                opt(e.val_accuracy)
            );
        }
        let _ = writeln!(out, "best_epoch={} stopped_early={}", self.best_epoch, self.stopped_early);
        out
    }

    pub fn final_loss(&self) -> f64 {
        self.epochs.last().map_or(self.initial_loss, |e| e.train_loss)
    }
}

pub struct TrainOutcome<T> {
    pub model: GrmModel<T>,
    pub history: History,
}

fn check_data<T: Scalar>(model: &GrmModel<T>, data: &Dataset<T>) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Invalid("dataset is empty".into()));
    }
    if data.dims != model.config.dims {
        return Err(Error::shape("dataset", format!("{:?}", data.dims), format!("{:?}", model.config.dims)));
    }
    Ok(())
}

/// Per-sample losses in dataset order.
pub fn sample_losses<T: Scalar>(model: &GrmModel<T>, graph: &KnowledgeGraph, data: &Dataset<T>) -> Result<Vec<f64>> {
    check_data(model, data)?;
    data.samples
        .par_iter()
        .map(|s| model.loss(s, graph).map(|l| l.to_f64_lossy()))
        .collect()
}

pub fn mean_loss<T: Scalar>(model: &GrmModel<T>, graph: &KnowledgeGraph, data: &Dataset<T>) -> Result<f64> {
    let losses = sample_losses(model, graph, data)?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Score table (`n x M`, dataset order).
pub fn score_table<T: Scalar>(
    model: &GrmModel<T>,
    graph: &KnowledgeGraph,
    data: &Dataset<T>,
) -> Result<Vec<Vec<f64>>> {
    check_data(model, data)?;
    data.samples
        .par_iter()
        .map(|s| {
            let p = model.forward(s, graph)?;
            Ok(p.scores.iter().map(|v| v.to_f64_lossy()).collect())
        })
        .collect()
}

pub fn evaluate<T: Scalar>(
    model: &GrmModel<T>,
    graph: &KnowledgeGraph,
    data: &Dataset<T>,
    ap_method: ApMethod,
    basis: ScoreBasis,
) -> Result<Metrics> {
    let scores: Vec<Vec<f64>> = score_table(model, graph, data)?.iter().map(|r| basis.apply(r)).collect();
    let labels: Vec<usize> = data.samples.iter().map(|s| s.label).collect();
    compute_metrics(&scores, &labels, model.config.dims.relationships, ap_method)
}

/// Averaged batch gradient plus each sample's loss. Gradients are computed
/// in parallel and summed in batch order.
fn batch_gradient<T: Scalar>(
    model: &GrmModel<T>,
    graph: &KnowledgeGraph,
    data: &Dataset<T>,
    batch: &[usize],
) -> Result<(ParamSet<T>, Vec<T>)> {
    let parts: Vec<(T, ParamSet<T>)> = batch
        .par_iter()
        .map(|&i| model.loss_and_grad(&data.samples[i], graph).map(|(l, g, _)| (l, g)))
        .collect::<Result<_>>()?;
    let mut losses = Vec::with_capacity(parts.len());
    let mut total: Option<ParamSet<T>> = None;
    for (l, g) in parts {
        losses.push(l);
        match total.as_mut() {
            None => total = Some(g),
            Some(t) => t.add_assign(&g),
        }
    }
    let mut total = total.expect("batch is non-empty");
    total.scale(T::one() / T::from_usize_lossy(batch.len()));
    Ok((total, losses))
}

/// Trains `model` in place of a copy and returns the best-validation
/// parameters (or the last ones when no validation set is given).
pub fn train<T: Scalar>(
    model: GrmModel<T>,
    graph: &KnowledgeGraph,
    train_set: &Dataset<T>,
    val_set: Option<&Dataset<T>>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    check_data(&model, train_set)?;
    if let Some(v) = val_set {
        check_data(&model, v)?;
    }
    let mut model = model;
    let mut optimizer = OptimizerState::new(&model.params, cfg.sgd, cfg.adam)?;
    let mut history = History {
        initial_loss: mean_loss(&model, graph, train_set)?,
        ..History::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(f64, ParamSet<T>)> = None;
    let mut since_best = 0;
    let mut losses = vec![0.0; train_set.len()];
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (grads, batch_losses) = batch_gradient(&model, graph, train_set, batch)?;
            for (&i, l) in batch.iter().zip(batch_losses) {
                let l = l.to_f64_lossy();
                if !l.is_finite() {
                    return Err(Error::Divergence { epoch, batch: b, loss: l });
                }
                losses[i] = l;
            }
            optimizer.step(&mut model.params, &grads)?;
            if !model.params.is_finite() {
                return Err(Error::Divergence { epoch, batch: b, loss: f64::NAN });
            }
        }
        let train_loss = losses.iter().sum::<f64>() / losses.len() as f64;
        let mut record = EpochRecord {
            epoch,
            train_loss,
            val_map: None,
            val_accuracy: None,
        };
        if let Some(v) = val_set {
            let m = evaluate(&model, graph, v, cfg.ap_method, cfg.score_basis)?;
            record.val_map = Some(m.map);
            record.val_accuracy = Some(m.accuracy);
            if best.as_ref().map_or(true, |(b, _)| m.map > *b) {
                best = Some((m.map, model.params.clone()));
                history.best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
            }
        } else {
            history.best_epoch = epoch;
        }
        log::debug!("epoch {epoch}: loss {train_loss:.6} val_map {}", opt(record.val_map));
        history.epochs.push(record);
        if cfg.patience > 0 && since_best >= cfg.patience {
            history.stopped_early = true;
            break;
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok(TrainOutcome { model, history })
}
