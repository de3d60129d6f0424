use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{
    triplet_loss_grad, ConvBlock, ConvBlockParams, HeadConfig, ModelError, Result, Sample, Triplet, TripletRef,
    TripletSampler,
};
use crate::encoding::JointEmbeddingInput;

/// Optimisation settings. Defaults: margin 0.2, SGD with learning rate 1e-3
/// and momentum 0.9, batches of 32 triplets, half of the negatives drawn from
/// the anchor's class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub same_class_negative_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            margin: 0.2,
            learning_rate: 1e-3,
            momentum: 0.9,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            same_class_negative_fraction: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::Config(m));
        if !(self.margin >= 0.0) {
            return bad(format!("margin must be >= 0, got {}", self.margin));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.same_class_negative_fraction) {
            return bad(format!(
                "same-class negative fraction must be in [0, 1], got {}",
                self.same_class_negative_fraction
            ));
        }
        Ok(())
    }

    fn sampler_seed(&self) -> u64 {
        self.seed ^ 0x9e37_79b9_7f4a_7c15
    }
}

/// Resolves a sample to its network input. Implementations decide how much
/// to keep in memory; the trainer asks for each view when it needs it.
pub trait FeatureSource {
    fn load(&self, sample: &Sample) -> Result<JointEmbeddingInput>;
}

impl FeatureSource for HashMap<String, JointEmbeddingInput> {
    fn load(&self, sample: &Sample) -> Result<JointEmbeddingInput> {
        self.get(&sample.record_id)
            .cloned()
            .ok_or_else(|| ModelError::MissingFeatures(sample.record_id.clone()))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ConvBlockParams,
    /// Mean triplet loss of each epoch, in order.
    pub epoch_losses: Vec<f64>,
    /// Forward passes whose pre-normalisation output was exactly zero.
    pub zero_embeddings: usize,
}

fn resolve(sampler: &TripletSampler, source: &dyn FeatureSource, t: &TripletRef) -> Result<Triplet> {
    let s = sampler.samples();
    let get = |i: usize| -> Result<(Sample, JointEmbeddingInput)> { Ok((s[i].clone(), source.load(&s[i])?)) };
    Ok(Triplet {
        anchor: get(t.anchor)?,
        positive: get(t.positive)?,
        negative: get(t.negative)?,
    })
}

/// Fits one shared parameter set: all three towers of every triplet run
/// through the same [`ConvBlock`]. Each epoch draws one triplet per
/// (anchor, positive, negative instance) combination and takes one SGD step
/// per batch on the batch-mean loss.
pub fn train(
    samples: Vec<Sample>,
    source: &dyn FeatureSource,
    head: HeadConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut block = ConvBlock::new(ConvBlockParams::init(head, cfg.seed)?);
    let mut sampler = TripletSampler::new(samples, cfg.same_class_negative_fraction, cfg.sampler_seed())?;
    let mut velocity = ConvBlockParams::zeros(head);
    let per_epoch = sampler.instance_triplets();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut zero_embeddings = 0usize;

    for epoch in 0..cfg.epochs {
        let mut remaining = per_epoch;
        let mut epoch_loss = 0.0;
        let mut batch_idx = 0;
        while remaining > 0 {
            let size = remaining.min(cfg.batch_size);
            remaining -= size;
            let mut grads = ConvBlockParams::zeros(head);
            let mut batch_loss = 0.0;
            for _ in 0..size {
                let drawn = sampler.draw();
                let t = resolve(&sampler, source, &drawn)?;
                let (ea, ca) = block.forward(&t.anchor.1.map)?;
                let (ep, cp) = block.forward(&t.positive.1.map)?;
                let (en, cn) = block.forward(&t.negative.1.map)?;
                // f64::max swallows NaN, so check the embeddings before the hinge
                if [&ea, &ep, &en].iter().any(|e| !e.norm().is_finite()) {
                    return Err(ModelError::Divergence {
                        epoch,
                        batch: batch_idx,
                        loss: f64::NAN,
                    });
                }
                zero_embeddings += [&ca, &cp, &cn].iter().filter(|c| c.pre_norm() == 0.0).count();
                let g = triplet_loss_grad(ea.as_slice(), ep.as_slice(), en.as_slice(), cfg.margin)?;
                batch_loss += g.loss;
                if g.loss > 0.0 {
                    for (cache, grad) in [(&ca, &g.anchor), (&cp, &g.positive), (&cn, &g.negative)] {
                        let (pg, _) = block.backward(cache, grad)?;
                        grads.add_scaled(&pg, 1.0);
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(ModelError::Divergence {
                    epoch,
                    batch: batch_idx,
                    loss: batch_loss,
                });
            }
            epoch_loss += batch_loss;
            grads.scale(1.0 / size as f64);
            velocity.scale(cfg.momentum);
            velocity.add_scaled(&grads, 1.0);
            let params = block.params_mut();
            params.add_scaled(&velocity, -cfg.learning_rate);
            if !params.is_finite() {
                return Err(ModelError::Divergence {
                    epoch,
                    batch: batch_idx,
                    loss: f64::NAN,
                });
            }
            batch_idx += 1;
        }
        let mean = epoch_loss / per_epoch as f64;
        log::info!("epoch {:>3}: mean triplet loss {mean:.6}", epoch + 1);
        epoch_losses.push(mean);
    }
    if zero_embeddings > 0 {
        log::warn!("{zero_embeddings} forward passes produced an all-zero embedding");
    }
    Ok(TrainOutcome {
        params: block.into_params(),
        epoch_losses,
        zero_embeddings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{FeatureMap, Provenance};

    /// Two instances per constant background level, two views each with a
    /// small per-view perturbation.
    fn toy_set() -> (Vec<Sample>, HashMap<String, JointEmbeddingInput>) {
        let mut samples = Vec::new();
        let mut feats = HashMap::new();
        for inst in 0..4 {
            for view in 0..3 {
                let id = format!("i{inst}_v{view}");
                let data: Vec<f32> = (0..7 * 7 * 4)
                    .map(|k| {
                        let c = k % 4;
                        let base = if c == 0 { 0.2 * inst as f32 } else { 0.5 };
                        base + 0.01 * ((k * 7 + view * 13) % 5) as f32
                    })
                    .collect();
                feats.insert(
                    id.clone(),
                    JointEmbeddingInput::single(FeatureMap::new(7, 7, 4, data).unwrap(), Provenance::Concat),
                );
                samples.push(Sample {
                    record_id: id,
                    instance_id: format!("inst{inst}"),
                    class_label: "chair".into(),
                });
            }
        }
        (samples, feats)
    }

    fn head() -> HeadConfig {
        HeadConfig {
            in_channels: 4,
            conv1_channels: 8,
            conv2_channels: 8,
            embed_dim: 8,
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let (s, f) = toy_set();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            ..Default::default()
        };
        let out = train(s, &f, head(), &cfg).unwrap();
        assert_eq!(out.params, ConvBlockParams::init(head(), cfg.seed).unwrap());
        assert_eq!(out.epoch_losses.len(), 3);
    }

    #[test]
    fn deterministic_given_seed() {
        let (s, f) = toy_set();
        let cfg = TrainConfig {
            epochs: 4,
            seed: 17,
            ..Default::default()
        };
        let a = train(s.clone(), &f, head(), &cfg).unwrap();
        let b = train(s, &f, head(), &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }

    #[test]
    fn loss_decreases_on_separable_set() {
        let (s, f) = toy_set();
        let cfg = TrainConfig {
            epochs: 40,
            learning_rate: 0.01,
            ..Default::default()
        };
        let out = train(s, &f, head(), &cfg).unwrap();
        let first = out.epoch_losses[0];
        let last = *out.epoch_losses.last().unwrap();
        assert!(last < first, "first {first}, last {last}");
    }

    #[test]
    fn missing_features_error() {
        let (s, mut f) = toy_set();
        f.remove("i0_v0");
        let cfg = TrainConfig {
            epochs: 5,
            ..Default::default()
        };
        assert!(matches!(train(s, &f, head(), &cfg), Err(ModelError::MissingFeatures(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let (s, f) = toy_set();
        let cfg = TrainConfig {
            learning_rate: 1e300,
            epochs: 5,
            ..Default::default()
        };
        assert!(matches!(train(s, &f, head(), &cfg), Err(ModelError::Divergence { .. })));
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            margin: -0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
