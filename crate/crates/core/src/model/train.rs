//! Minibatch training with Adam.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::blstm::{Hyper, ModelParams};
use super::loss::{weighted_loss, ExtraTerms, LossBreakdown};
use crate::error::{Error, Result};
use crate::extract::{build_ctc_target, ManifestRecord, PeRule};
use crate::ink::{featurize_order, FeatureSequence, FrameKind, OffStrokeFeature};

/// One path of one sample, ready for the network.
#[derive(Clone, Debug)]
pub struct TrainExample {
    pub sample_id: String,
    pub rule: PeRule,
    pub feats: FeatureSequence,
    pub target: Vec<usize>,
    /// Frames of pen-ups between two strokes of the same symbol.
    pub intra_symbol: Vec<usize>,
}

pub fn prepare_examples(records: &[ManifestRecord], off: OffStrokeFeature) -> Result<Vec<TrainExample>> {
    records
        .iter()
        .map(|r| {
            let sample = r.sample()?;
            if let Some(&bad) = r.stroke_order.iter().find(|&&s| s as usize >= sample.strokes.len()) {
                return Err(Error::InvalidInk(format!("{}: path references missing stroke {bad}", r.sample_id)));
            }
            let feats = featurize_order(&sample, &r.stroke_order, off);
            let inside = r.intra_symbol_positions()?;
            let intra_symbol = feats
                .kinds
                .iter()
                .enumerate()
                .filter(|(_, k)| matches!(k, FrameKind::OffStroke(p) if inside.contains(p)))
                .map(|(t, _)| t)
                .collect();
            Ok(TrainExample {
                sample_id: r.sample_id.clone(),
                rule: r.rule,
                feats,
                target: build_ctc_target(&r.target_tokens()?)?,
                intra_symbol,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hyper: Hyper,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    /// Fraction of samples (not paths) held out for validation.
    pub validation_fraction: f64,
    /// Loss weight of paths produced by each extraction rule, in
    /// root-to-leaf, writing-order, shuffled, connection-query order.
    pub rule_weights: [f64; 4],
    /// Also penalize relation mass at pen-ups inside a symbol.
    pub constrain_intra_symbol: bool,
    /// Weight of the off-stroke symbol penalty; 0 disables it.
    pub offstroke_weight: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hyper: Hyper::default(),
            epochs: 100,
            batch_size: 16,
            learning_rate: 1e-3,
            clip_norm: 5.0,
            validation_fraction: 0.1,
            rule_weights: [1.0; 4],
            constrain_intra_symbol: false,
            offstroke_weight: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.hyper.layers == 0 || self.hyper.hidden == 0 {
            return bad("layers and hidden must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must be in [0, 1)");
        }
        if !(self.offstroke_weight >= 0.0 && self.offstroke_weight.is_finite()) {
            return bad("offstroke_weight must be non-negative");
        }
        if self.rule_weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return bad("rule weights must be non-negative");
        }
        Ok(())
    }

    fn extra_terms<'a>(&self, ex: &'a TrainExample) -> ExtraTerms<'a> {
        ExtraTerms {
            relation_frames: if self.constrain_intra_symbol { &ex.intra_symbol } else { &[] },
            offstroke_weight: self.offstroke_weight,
        }
    }

    fn weight(&self, rule: PeRule) -> f64 {
        match rule {
            PeRule::RootToLeaf => self.rule_weights[0],
            PeRule::WritingOrder => self.rule_weights[1],
            PeRule::Shuffled => self.rule_weights[2],
            PeRule::Connection => self.rule_weights[3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training losses per path, measured before each update.
    pub ctc: f64,
    pub ce: f64,
    pub total: f64,
    pub val_total: Option<f64>,
}

pub const METRICS_HEADER: &str = "epoch,ctc,ce,total,val_total";

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        let val = self.val_total.map(|v| v.to_string()).unwrap_or_default();
        format!("{},{},{},{},{}", self.epoch, self.ctc, self.ce, self.total, val)
    }
}

pub fn write_metrics_csv<W: Write>(mut w: W, history: &[EpochMetrics]) -> Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for m in history {
        writeln!(w, "{}", m.csv_row())?;
    }
    Ok(())
}

pub struct TrainOutcome {
    /// Parameters with the lowest validation loss (the last ones when
    /// nothing is held out).
    pub best: ModelParams,
    pub last: ModelParams,
    pub history: Vec<EpochMetrics>,
}

/// Returned by the per-epoch observer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr }
    }

    fn step(&mut self, w: &mut [f64], g: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..w.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g[i] * g[i];
            w[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Loss and weight gradient of one path.
pub fn example_gradient(params: &ModelParams, ex: &TrainExample, extra: &ExtraTerms) -> Result<(LossBreakdown, Vec<f64>)> {
    let cache = params.forward_cached(&ex.feats)?;
    let (loss, dlogits) = weighted_loss(&cache.logits, &ex.feats, &ex.target, extra)?;
    Ok((loss, params.backward(&cache, &dlogits)))
}

/// Split sample ids into (train, validation) deterministically.
fn split(examples: &[TrainExample], cfg: &TrainConfig) -> (Vec<usize>, Vec<usize>) {
    let ids: BTreeSet<&str> = examples.iter().map(|e| e.sample_id.as_str()).collect();
    let mut ids: Vec<&str> = ids.into_iter().collect();
    let n_val = ((ids.len() as f64) * cfg.validation_fraction).floor() as usize;
    let n_val = n_val.min(ids.len().saturating_sub(1));
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed));
    let val: BTreeSet<&str> = ids[..n_val].iter().copied().collect();
    let (mut tr, mut va) = (Vec::new(), Vec::new());
    for (i, e) in examples.iter().enumerate() {
        if val.contains(e.sample_id.as_str()) {
            va.push(i);
        } else {
            tr.push(i);
        }
    }
    (tr, va)
}

/// Mean total loss over `idx` without updating anything.
pub fn mean_loss(params: &ModelParams, examples: &[TrainExample], idx: &[usize], cfg: &TrainConfig) -> Result<LossBreakdown> {
    let losses: Vec<Result<LossBreakdown>> = idx
        .par_iter()
        .map(|&i| {
            let ex = &examples[i];
            let logits = params.forward_cached(&ex.feats)?.logits;
            Ok(weighted_loss(&logits, &ex.feats, &ex.target, &cfg.extra_terms(ex))?.0)
        })
        .collect();
    let mut sum = LossBreakdown::default();
    for l in losses {
        let l = l?;
        sum.ctc += l.ctc;
        sum.ce += l.ce;
        sum.total += l.total;
    }
    let n = idx.len().max(1) as f64;
    Ok(LossBreakdown { ctc: sum.ctc / n, ce: sum.ce / n, total: sum.total / n })
}

/// Train from scratch. `observer` sees every epoch's metrics and the
/// current weights and may stop training early.
pub fn train(
    examples: &[TrainExample],
    cfg: &TrainConfig,
    observer: impl FnMut(&EpochMetrics, &ModelParams) -> Control,
) -> Result<TrainOutcome> {
    train_from(ModelParams::init(cfg.hyper), examples, cfg, observer)
}

pub fn train_from(
    mut params: ModelParams,
    examples: &[TrainExample],
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochMetrics, &ModelParams) -> Control,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::Empty("no training paths".into()));
    }
    let (mut train_idx, val_idx) = split(examples, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(params.weights.len(), cfg.learning_rate);
    let mut history = Vec::new();
    let mut best: Option<(f64, ModelParams)> = None;

    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut sum = LossBreakdown::default();
        for batch in train_idx.chunks(cfg.batch_size) {
            let results: Vec<Result<(LossBreakdown, Vec<f64>)>> = batch
                .par_iter()
                .map(|&i| example_gradient(&params, &examples[i], &cfg.extra_terms(&examples[i])))
                .collect();
            let mut grad = vec![0.0; params.weights.len()];
            let mut batch_weight = 0.0;
            for (&i, r) in batch.iter().zip(results) {
                let (loss, g) = r?;
                let w = cfg.weight(examples[i].rule);
                sum.ctc += loss.ctc;
                sum.ce += loss.ce;
                sum.total += loss.total;
                batch_weight += w;
                if w != 0.0 {
                    grad.iter_mut().zip(&g).for_each(|(a, b)| *a += w * b);
                }
            }
            if batch_weight == 0.0 {
                continue;
            }
            grad.iter_mut().for_each(|g| *g /= batch_weight);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !norm.is_finite() {
                let ids: Vec<&str> = batch.iter().map(|&i| examples[i].sample_id.as_str()).collect();
                return Err(Error::NonFinite(format!(
                    "gradient in epoch {epoch} (batch samples: {})",
                    ids.join(", ")
                )));
            }
            if norm > cfg.clip_norm {
                let s = cfg.clip_norm / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            adam.step(&mut params.weights, &grad);
        }
        let n = train_idx.len().max(1) as f64;
        let val_total = if val_idx.is_empty() { None } else { Some(mean_loss(&params, examples, &val_idx, cfg)?.total) };
        let metrics = EpochMetrics {
            epoch,
            ctc: sum.ctc / n,
            ce: sum.ce / n,
            total: sum.total / n,
            val_total,
        };
        if !metrics.total.is_finite() {
            return Err(Error::NonFinite(format!("training loss in epoch {epoch}")));
        }
        if let Some(v) = val_total {
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, params.clone()));
            }
        }
        let control = observer(&metrics, &params);
        history.push(metrics);
        if control == Control::Stop {
            break;
        }
    }
    let best = best.map(|(_, p)| p).unwrap_or_else(|| params.clone());
    Ok(TrainOutcome { best, last: params, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ink::FrameKind;

    fn toy(id: &str, n: usize) -> TrainExample {
        // "a Right b" over two strokes
        let mut frames = vec![[0.1, 0.0, 1.0]; n];
        let mut kinds = vec![FrameKind::Stroke(0); n];
        frames.push([0.5, 0.1, 0.0]);
        kinds.push(FrameKind::OffStroke(1));
        frames.extend(vec![[0.0, 0.1, 1.0]; n]);
        kinds.extend(vec![FrameKind::Stroke(1); n]);
        TrainExample {
            sample_id: id.into(),
            rule: PeRule::WritingOrder,
            feats: FeatureSequence { frames, kinds },
            target: vec![10, crate::alphabet::Relation::Right.label_id(), 20],
            intra_symbol: Vec::new(),
        }
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            hyper: Hyper { layers: 1, hidden: 6, seed: 1, ..Hyper::default() },
            epochs: 30,
            batch_size: 2,
            learning_rate: 0.01,
            validation_fraction: 0.0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn loss_goes_down_and_runs_are_reproducible() {
        let ex = vec![toy("a", 3), toy("b", 4), toy("c", 2)];
        let a = train(&ex, &cfg(), |_, _| Control::Continue).unwrap();
        let b = train(&ex, &cfg(), |_, _| Control::Continue).unwrap();
        assert_eq!(a.last.weights, b.last.weights);
        assert!(a.history.last().unwrap().total < a.history[0].total);
    }

    #[test]
    fn observer_can_stop() {
        let ex = vec![toy("a", 3)];
        let out = train(&ex, &cfg(), |m, _| if m.epoch == 3 { Control::Stop } else { Control::Continue }).unwrap();
        assert_eq!(out.history.len(), 3);
    }

    #[test]
    fn validation_split_is_by_sample() {
        let ex = vec![toy("a", 3), toy("a", 4), toy("b", 3), toy("c", 3), toy("d", 3)];
        let c = TrainConfig { validation_fraction: 0.5, ..cfg() };
        let (tr, va) = split(&ex, &c);
        assert_eq!(tr.len() + va.len(), 5);
        for &v in &va {
            assert!(tr.iter().all(|&t| ex[t].sample_id != ex[v].sample_id));
        }
        assert!(!va.is_empty());
    }

    #[test]
    fn metrics_csv() {
        let m = EpochMetrics { epoch: 1, ctc: 1.0, ce: 0.5, total: 1.5, val_total: None };
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &[m]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,ctc,ce,total,val_total\n1,1,0.5,1.5,\n");
    }

    #[test]
    fn bad_config() {
        let c = TrainConfig { batch_size: 0, ..cfg() };
        assert!(train(&[toy("a", 2)], &c, |_, _| Control::Continue).is_err());
        assert!(train(&[], &cfg(), |_, _| Control::Continue).is_err());
    }
}
