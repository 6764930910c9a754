use std::fmt::Write as _;

use log::info;

use crate::corpus::{EncodedCorpus, batchify};
use crate::numerics::{Real, Rng};

use super::network::{Dropout, HiddenState, loss_and_grads, perplexity, sgd_step};
use super::{ModelDims, ModelError, ModelParams};

/// Training hyperparameters. Defaults are the full-scale recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub layers: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub batch_size: usize,
    pub dropout_p: f64,
    pub lr_initial: f64,
    pub bptt_len: usize,
    pub clip_norm: f64,
    pub max_epochs: usize,
    pub anneal_factor: f64,
    pub init_range: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            hidden: 650,
            embed_dim: 650,
            batch_size: 128,
            dropout_p: 0.2,
            lr_initial: 20.0,
            bptt_len: 35,
            clip_norm: 0.25,
            max_epochs: 40,
            anneal_factor: 4.0,
            init_range: 0.1,
            seed: 1111,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.layers == 0 || self.hidden == 0 || self.embed_dim == 0 {
            return bad("layers, hidden and embed_dim must be positive");
        }
        if self.batch_size == 0 || self.bptt_len == 0 {
            return bad("batch_size and bptt_len must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad("dropout must lie in [0, 1)");
        }
        // lr = 0 is accepted: it freezes the model, which is useful for baselines.
        if !(self.lr_initial >= 0.0) || !self.lr_initial.is_finite() {
            return bad("learning rate must be non-negative and finite");
        }
        if !(self.anneal_factor > 1.0) {
            return bad("anneal factor must exceed 1");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip norm must be positive");
        }
        Ok(())
    }

    pub fn dims(&self, vocab: usize) -> ModelDims {
        ModelDims { vocab, embed: self.embed_dim, hidden: self.hidden, layers: self.layers }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub valid_ppl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub seed: u64,
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().min_by(|a, b| a.valid_ppl.total_cmp(&b.valid_ppl))
    }

    pub fn best_valid_ppl(&self) -> f64 {
        self.best().map_or(f64::INFINITY, |r| r.valid_ppl)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,lr,train_loss,valid_ppl\n");
        for r in &self.records {
            writeln!(s, "{},{},{},{}", r.epoch, r.lr, r.train_loss, r.valid_ppl).unwrap();
        }
        s
    }
}

/// Trains from a seeded initialisation. See [`train_with`].
pub fn train<F: Real>(
    config: &TrainConfig,
    vocab_size: usize,
    train_corpus: &EncodedCorpus,
    valid_corpus: &EncodedCorpus,
) -> Result<(ModelParams<F>, TrainLog), ModelError> {
    let mut rng = Rng::new(config.seed);
    let init = ModelParams::init(config.dims(vocab_size), config.init_range, &mut rng);
    train_with(config, init, rng, train_corpus, valid_corpus)
}

/// Epoch loop: clipped SGD over contiguous BPTT blocks, validation
/// perplexity after every epoch, learning rate divided by `anneal_factor`
/// whenever validation fails to improve. Returns the best-validation
/// parameters.
pub fn train_with<F: Real>(
    config: &TrainConfig,
    mut params: ModelParams<F>,
    mut rng: Rng,
    train_corpus: &EncodedCorpus,
    valid_corpus: &EncodedCorpus,
) -> Result<(ModelParams<F>, TrainLog), ModelError> {
    config.validate()?;
    let d = params.validate()?;
    train_corpus.check_against_dims(d.vocab)?;
    valid_corpus.check_against_dims(d.vocab)?;
    let plan = batchify(train_corpus, config.batch_size, config.bptt_len)?;

    let mut lr = config.lr_initial;
    let mut best: Option<(f64, ModelParams<F>)> = None;
    let mut log = TrainLog { seed: config.seed, records: Vec::new() };
    for epoch in 1..=config.max_epochs {
        let mut state = HiddenState::for_model(&params, config.batch_size);
        let mut total = 0.0;
        for (k, block) in plan.blocks().enumerate() {
            let dropout = Dropout::On { p: config.dropout_p, rng: &mut rng };
            let (loss, grads, next) = loss_and_grads(&params, &block, &state, dropout)?;
            if !loss.is_finite() {
                return Err(ModelError::Divergence(format!("epoch {epoch}, block {k}: loss {loss}")));
            }
            sgd_step(&mut params, &grads, lr, config.clip_norm)
                .map_err(|e| ModelError::Divergence(format!("epoch {epoch}, block {k}: {e}")))?;
            state = next;
            total += loss;
        }
        let train_loss = total / plan.num_blocks() as f64;
        let valid_ppl = perplexity(&params, &valid_corpus.ids)?;
        if !valid_ppl.is_finite() {
            return Err(ModelError::Divergence(format!("epoch {epoch}: validation perplexity {valid_ppl}")));
        }
        info!(
            "seed {} epoch {epoch}: lr {lr} train loss {train_loss:.4} valid ppl {valid_ppl:.3}",
            config.seed
        );
        log.records.push(EpochRecord { epoch, lr, train_loss, valid_ppl });
        match &best {
            Some((b, _)) if valid_ppl >= *b => lr /= config.anneal_factor,
            _ => best = Some((valid_ppl, params.clone())),
        }
    }
    let params = best.map_or(params, |(_, p)| p);
    Ok((params, log))
}

impl EncodedCorpus {
    fn check_against_dims(&self, vocab: usize) -> Result<(), ModelError> {
        match self.ids.iter().find(|&&i| i as usize >= vocab) {
            Some(&id) => Err(ModelError::InvalidId { id, vocab }),
            None => Ok(()),
        }
    }
}

/// The `k` runs with lowest best-validation perplexity, with mean and sample
/// standard deviation of those perplexities.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// `(seed, best validation perplexity)`, ascending by perplexity.
    pub chosen: Vec<(u64, f64)>,
    pub mean_ppl: f64,
    pub sd_ppl: f64,
}

pub fn select_best(runs: &[(u64, f64)], k: usize) -> Selection {
    let mut sorted = runs.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    sorted.truncate(k);
    let vals: Vec<f64> = sorted.iter().map(|r| r.1).collect();
    let (mean_ppl, sd_ppl) = crate::evaluator::mean_sd(&vals);
    Selection { chosen: sorted, mean_ppl, sd_ppl }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            layers: 1,
            hidden: 8,
            embed_dim: 8,
            batch_size: 2,
            dropout_p: 0.1,
            lr_initial: 1.0,
            bptt_len: 5,
            max_epochs: 3,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    fn corpus(split: Split, n: usize) -> EncodedCorpus {
        EncodedCorpus { ids: (0..n).map(|i| [2u32, 3, 4, 1][i % 4]).collect(), split }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig { dropout_p: 1.0, ..TrainConfig::default() };
        assert!(matches!(c.validate(), Err(ModelError::Config(_))));
        let c = TrainConfig { anneal_factor: 1.0, ..TrainConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn training_is_deterministic_and_learns() {
        let tr = corpus(Split::Train, 400);
        let va = corpus(Split::Valid, 80);
        let cfg = TrainConfig { max_epochs: 8, ..tiny_config() };
        let (p1, l1) = train::<f64>(&cfg, 5, &tr, &va).unwrap();
        let (p2, l2) = train::<f64>(&cfg, 5, &tr, &va).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(p1, p2);
        assert_eq!(l1.records.len(), 8);
        assert!(l1.best_valid_ppl() < 2.0, "{l1:?}");
    }

    #[test]
    fn zero_learning_rate_freezes_model() {
        let tr = corpus(Split::Train, 200);
        let va = corpus(Split::Valid, 40);
        let cfg = TrainConfig { lr_initial: 0.0, max_epochs: 2, ..tiny_config() };
        let mut rng = Rng::new(cfg.seed);
        let init: ModelParams<f64> = ModelParams::init(cfg.dims(5), cfg.init_range, &mut rng);
        let ppl0 = perplexity(&init, &va.ids).unwrap();
        let (p, log) = train::<f64>(&cfg, 5, &tr, &va).unwrap();
        assert_eq!(p, init);
        assert!(log.records.iter().all(|r| r.valid_ppl == ppl0));
    }

    #[test]
    fn anneals_when_validation_worsens_and_keeps_best() {
        // Validation follows the reversed cycle, so fitting the training
        // cycle makes it worse after the first epoch.
        let tr = corpus(Split::Train, 400);
        let va = EncodedCorpus { ids: (0..80).map(|i| [4u32, 3, 2, 1][i % 4]).collect(), split: Split::Valid };
        let cfg = TrainConfig { max_epochs: 4, ..tiny_config() };
        let (p, log) = train::<f64>(&cfg, 5, &tr, &va).unwrap();
        let lrs: Vec<f64> = log.records.iter().map(|r| r.lr).collect();
        // Recompute the schedule from the recorded perplexities.
        let mut lr = 1.0;
        let mut best = f64::INFINITY;
        let mut expect = Vec::new();
        for r in &log.records {
            expect.push(lr);
            if r.valid_ppl < best {
                best = r.valid_ppl;
            } else {
                lr /= cfg.anneal_factor;
            }
        }
        assert_eq!(lrs, expect);
        assert!(lrs.last().unwrap() < &1.0, "{log:?}");
        let kept = perplexity(&p, &va.ids).unwrap();
        assert_eq!(kept, log.best_valid_ppl());
        assert_eq!(log.to_csv().lines().next(), Some("epoch,lr,train_loss,valid_ppl"));
    }

    #[test]
    fn selection_of_best_runs() {
        let runs = [(1, 50.0), (2, 40.0), (3, 45.0), (4, 60.0)];
        let s = select_best(&runs, 2);
        assert_eq!(s.chosen, vec![(2, 40.0), (3, 45.0)]);
        assert!((s.mean_ppl - 42.5).abs() < 1e-12);
        assert!((s.sd_ppl - (12.5f64).sqrt()).abs() < 1e-12);
    }
}
