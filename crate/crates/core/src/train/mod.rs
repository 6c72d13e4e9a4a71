//! Training loop, epoch timing and best-validation model selection.

pub mod config;
pub mod gradcheck;
pub mod grid;
pub mod objective;
pub mod optim;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FilterIndex, Split, Triple};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Metrics};
use crate::model::ModelParams;

pub use config::{ModelConfig, OptimizerKind};
pub use gradcheck::gradient_check;
pub use grid::{grid_search, Grid, GridEntry, GridResult};
pub use objective::{batch_objective, loss, Gradients, Penalty, Workspace};
pub use optim::Optimizer;

/// Keeps the shuffling stream apart from the initialization stream.
const SHUFFLE_STREAM: u64 = 0x5eed_5eed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Wall-clock seconds of the training pass alone.
    pub seconds: f64,
}

impl ModelConfig {
    pub fn penalty(&self) -> Penalty {
        Penalty {
            mode: self.reg_mode,
            norm: self.reg_norm,
            coefficient: self.reg_coefficient,
        }
    }

    pub fn init_model(&self, n_entities: usize, n_relations: usize) -> Result<ModelParams> {
        ModelParams::random(
            self.family,
            self.layout,
            self.rank,
            n_entities,
            n_relations,
            self.init_std,
            self.seed,
        )
    }
}

/// Applies reciprocal augmentation when the config asks for it.
pub fn prepare_dataset(raw: &Dataset, config: &ModelConfig) -> Result<Dataset> {
    match (config.reciprocal, raw.is_reciprocal()) {
        (true, false) => raw.augment_reciprocal(),
        (false, true) => Err(Error::InvalidConfig(
            "dataset already carries reciprocal relations but reciprocal = false".into(),
        )),
        _ => Ok(raw.clone()),
    }
}

/// Mutable training state for one model.
pub struct Trainer {
    config: ModelConfig,
    model: ModelParams,
    grads: Gradients,
    workspace: Workspace,
    entity_opt: Optimizer,
    relation_opt: Optimizer,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    epoch: usize,
}

impl Trainer {
    pub fn new(model: ModelParams, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        if (model.family(), model.layout(), model.rank()) != (config.family, config.layout, config.rank) {
            return Err(Error::InvalidConfig(format!(
                "model is {}/{} rank {}, config is {} rank {}",
                model.family(),
                model.layout(),
                model.rank(),
                config.label(),
                config.rank
            )));
        }
        Ok(Trainer {
            grads: Gradients::zeros_like(&model),
            workspace: Workspace::new(&model),
            entity_opt: Optimizer::new(config.optimizer, model.entity_table().len()),
            relation_opt: Optimizer::new(config.optimizer, model.relation_table().len()),
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM),
            order: Vec::new(),
            epoch: 0,
            config: config.clone(),
            model,
        })
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn into_model(self) -> ModelParams {
        self.model
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// Optimizer steps one epoch takes over `n_triples` training triples.
    pub fn steps_per_epoch(&self, n_triples: usize) -> usize {
        n_triples.div_ceil(self.config.batch_size)
    }

    /// One shuffled pass over `train`.
    pub fn train_epoch(&mut self, train: &[Triple]) -> Result<EpochStats> {
        if train.is_empty() {
            return Err(Error::EmptySplit("train".into()));
        }
        let start = Instant::now();
        let penalty = self.config.penalty();
        let lr = self.config.learning_rate;
        self.order.clear();
        self.order.extend(0..train.len());
        self.order.shuffle(&mut self.rng);
        let mut batch = Vec::with_capacity(self.config.batch_size);
        let mut weighted = 0.0;
        for (b, chunk) in self.order.chunks(self.config.batch_size).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i]));
            self.grads.clear();
            let value = batch_objective(
                &self.model,
                &batch,
                &penalty,
                Some(&mut self.grads),
                &mut self.workspace,
            )
            .map_err(|e| match e {
                Error::NonFinite => Error::Divergence {
                    epoch: self.epoch,
                    batch: b,
                    value: f64::NAN,
                },
                other => other,
            })?;
            self.entity_opt.step(lr, &mut self.model.entities, &self.grads.entities);
            self.relation_opt
                .step(lr, &mut self.model.relations, &self.grads.relations);
            weighted += value * batch.len() as f64;
        }
        let seconds = start.elapsed().as_secs_f64().max(1e-9);
        let mean_loss = weighted / train.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Divergence {
                epoch: self.epoch,
                batch: 0,
                value: mean_loss,
            });
        }
        let stats = EpochStats {
            epoch: self.epoch,
            mean_loss,
            seconds,
        };
        self.epoch += 1;
        Ok(stats)
    }
}

/// Batch-size-weighted mean objective over `triples` at the current
/// parameters, batched in the given order.
pub fn dataset_objective(model: &ModelParams, triples: &[Triple], config: &ModelConfig) -> Result<f64> {
    let mut ws = Workspace::new(model);
    let penalty = config.penalty();
    let mut weighted = 0.0;
    for chunk in triples.chunks(config.batch_size) {
        weighted += batch_objective(model, chunk, &penalty, None, &mut ws)? * chunk.len() as f64;
    }
    Ok(weighted / triples.len() as f64)
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Parameters at the best validation MRR.
    pub model: ModelParams,
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_valid: Metrics,
    /// `(epochs completed, validation MRR)` at every evaluation.
    pub valid_history: Vec<(usize, f64)>,
}

impl FitResult {
    pub fn mean_epoch_seconds(&self) -> f64 {
        self.epochs.iter().map(|e| e.seconds).sum::<f64>() / self.epochs.len() as f64
    }
}

/// Trains for `config.epochs` epochs, evaluating on the validation split
/// every `config.eval_every` epochs and after the last one, and keeps the
/// parameters with the highest validation MRR.
pub fn fit(dataset: &Dataset, filter: &FilterIndex, config: &ModelConfig) -> Result<FitResult> {
    if config.reciprocal != dataset.is_reciprocal() {
        return Err(Error::InvalidConfig(format!(
            "config reciprocal = {} but dataset reciprocal = {}",
            config.reciprocal,
            dataset.is_reciprocal()
        )));
    }
    let model = config.init_model(dataset.n_entities(), dataset.n_relations())?;
    let mut trainer = Trainer::new(model, config)?;
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(ModelParams, usize, Metrics)> = None;
    let mut valid_history = Vec::new();
    for e in 0..config.epochs {
        epochs.push(trainer.train_epoch(&dataset.train)?);
        let done = e + 1;
        if done % config.eval_every == 0 || done == config.epochs {
            let m = evaluate(trainer.model(), dataset, Split::Valid, filter)?;
            valid_history.push((done, m.mrr));
            if best.as_ref().is_none_or(|(_, _, b)| m.mrr > b.mrr) {
                best = Some((trainer.model().clone(), done, m));
            }
        }
    }
    let (model, best_epoch, best_valid) = best.expect("at least one evaluation");
    Ok(FitResult {
        model,
        epochs,
        best_epoch,
        best_valid,
        valid_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{Family, Layout};
    use crate::data::build_filter_index;
    use crate::synth::{generate_synthetic_kg, RelationFamily, SynthConfig};

    fn toy() -> Dataset {
        let raw = generate_synthetic_kg(&SynthConfig::new(30, &RelationFamily::ALL, 0.5, 3)).unwrap();
        raw.augment_reciprocal().unwrap()
    }

    fn config(family: Family, layout: Layout) -> ModelConfig {
        let mut c = ModelConfig::new(family, layout);
        c.rank = 8;
        c.batch_size = 16;
        c.epochs = 3;
        c.seed = 5;
        c
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_untouched() {
        let d = toy();
        for kind in OptimizerKind::ALL {
            let mut cfg = config(Family::FiveStar, Layout::ConjDiag);
            cfg.learning_rate = 0.0;
            cfg.optimizer = kind;
            let model = cfg.init_model(d.n_entities(), d.n_relations()).unwrap();
            let before = dataset_objective(&model, &d.train, &cfg).unwrap();
            let mut trainer = Trainer::new(model.clone(), &cfg).unwrap();
            let stats = trainer.train_epoch(&d.train).unwrap();
            assert_eq!(trainer.model(), &model);
            assert!((stats.mean_loss - before).abs() <= 1e-12 * before.abs());
        }
    }

    #[test]
    fn same_seed_same_losses() {
        let d = toy();
        let cfg = config(Family::ComplEx, Layout::ConjHalf);
        let run = || {
            let mut t = Trainer::new(cfg.init_model(d.n_entities(), d.n_relations()).unwrap(), &cfg).unwrap();
            (0..3)
                .map(|_| t.train_epoch(&d.train).unwrap().mean_loss)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn full_and_conjugate_take_the_same_number_of_steps() {
        let d = toy();
        let full = Trainer::new(
            config(Family::FiveStar, Layout::Full)
                .init_model(d.n_entities(), d.n_relations())
                .unwrap(),
            &config(Family::FiveStar, Layout::Full),
        )
        .unwrap();
        let conj = Trainer::new(
            config(Family::FiveStar, Layout::ConjDiag)
                .init_model(d.n_entities(), d.n_relations())
                .unwrap(),
            &config(Family::FiveStar, Layout::ConjDiag),
        )
        .unwrap();
        assert_eq!(full.steps_per_epoch(d.train.len()), conj.steps_per_epoch(d.train.len()));
        assert_eq!(full.model().relation_reals(), 2 * conj.model().relation_reals());
    }

    #[test]
    fn fit_keeps_best_validation_checkpoint() {
        let d = toy();
        let mut cfg = config(Family::ComplEx, Layout::Full);
        cfg.epochs = 6;
        cfg.eval_every = 2;
        let filter = build_filter_index(&d);
        let r = fit(&d, &filter, &cfg).unwrap();
        assert_eq!(r.epochs.len(), 6);
        assert_eq!(r.valid_history.len(), 3);
        let best = r
            .valid_history
            .iter()
            .map(|&(_, m)| m)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.best_valid.mrr, best);
        let again = evaluate(&r.model, &d, Split::Valid, &filter).unwrap();
        assert_eq!(again, r.best_valid);
        assert!(r.epochs.iter().all(|e| e.seconds > 0.0));
    }

    #[test]
    fn fit_rejects_mismatched_reciprocal_state() {
        let d = toy();
        let mut cfg = config(Family::ComplEx, Layout::Full);
        cfg.reciprocal = false;
        assert!(matches!(
            fit(&d, &build_filter_index(&d), &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let d = toy();
        let mut cfg = config(Family::ComplEx, Layout::Full);
        cfg.optimizer = OptimizerKind::Sgd;
        cfg.learning_rate = 1e150;
        cfg.init_std = 1.0;
        let mut t = Trainer::new(cfg.init_model(d.n_entities(), d.n_relations()).unwrap(), &cfg).unwrap();
        let err = (0..5)
            .find_map(|_| t.train_epoch(&d.train).err())
            .expect("should diverge");
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }
}
