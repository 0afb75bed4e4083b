//! Training objective: CTC plus a penalty on relation mass at pen-down frames.

use serde::{Deserialize, Serialize};

use super::blstm::log_softmax;
use super::ctc::ctc_loss;
use crate::alphabet::{BLANK_ID, NUM_SYMBOLS, RELATION_IDS};
use crate::error::Result;
use crate::ink::{FeatureSequence, FrameKind};

/// Floor applied to the non-relation mass before taking its log.
pub const CONSTRAINT_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ctc: f64,
    pub ce: f64,
    pub total: f64,
}

/// `-sum over stroke frames of log(max(1 - R_t, eps))`, where `R_t` is the
/// probability of the six relations plus NoRel at frame `t`; returned with
/// its gradient with respect to the logits.
pub fn constraint_loss(probs: &[Vec<f64>], feats: &FeatureSequence) -> (f64, Vec<Vec<f64>>) {
    let frames = frames_where(feats, |k| matches!(k, FrameKind::Stroke(_)));
    mass_penalty(probs, &frames, RELATION_IDS)
}

/// The same penalty on arbitrary frames, e.g. pen-ups between two strokes of
/// one symbol.
pub fn relation_penalty(probs: &[Vec<f64>], frames: &[usize]) -> (f64, Vec<Vec<f64>>) {
    mass_penalty(probs, frames, RELATION_IDS)
}

/// The mirror image of [`constraint_loss`]: penalizes symbol mass at
/// off-stroke frames, which should carry only a relation or blank.
pub fn offstroke_symbol_loss(probs: &[Vec<f64>], feats: &FeatureSequence) -> (f64, Vec<Vec<f64>>) {
    let frames = frames_where(feats, |k| matches!(k, FrameKind::OffStroke(_)));
    mass_penalty(probs, &frames, 0..NUM_SYMBOLS)
}

fn frames_where(feats: &FeatureSequence, select: impl Fn(&FrameKind) -> bool) -> Vec<usize> {
    feats.kinds.iter().enumerate().filter(|(_, k)| select(k)).map(|(t, _)| t).collect()
}

/// `-sum over frames of log(max(1 - M_t, eps))` with `M_t` the mass on
/// `labels`. The gradient of `-log(1 - M)` with respect to logit `j` is
/// `p_j (1[j in labels] - M) / (1 - M)`, and zero where the floor applies.
fn mass_penalty(probs: &[Vec<f64>], frames: &[usize], labels: std::ops::Range<usize>) -> (f64, Vec<Vec<f64>>) {
    let mut loss = 0.0;
    let mut grad = vec![vec![0.0; probs.first().map_or(0, Vec::len)]; probs.len()];
    for &t in frames {
        let p = &probs[t];
        let m: f64 = p[labels.clone()].iter().sum();
        let rest = 1.0 - m;
        if rest <= CONSTRAINT_EPS {
            loss -= CONSTRAINT_EPS.ln();
            continue;
        }
        loss -= rest.ln();
        for (j, g) in grad[t].iter_mut().enumerate() {
            let ind = if labels.contains(&j) { 1.0 } else { 0.0 };
            *g = p[j] * (ind - m) / rest;
        }
    }
    (loss, grad)
}

/// CTC on `target` plus the stroke-frame constraint, from raw logits.
pub fn combined_loss(
    logits: &[Vec<f64>],
    feats: &FeatureSequence,
    target: &[usize],
) -> Result<(LossBreakdown, Vec<Vec<f64>>)> {
    weighted_loss(logits, feats, target, &ExtraTerms::default())
}

/// Optional penalties on top of [`combined_loss`]; both are folded into `ce`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExtraTerms<'a> {
    /// Frames that get the relation penalty in addition to stroke frames.
    pub relation_frames: &'a [usize],
    /// Weight of [`offstroke_symbol_loss`].
    pub offstroke_weight: f64,
}

pub fn weighted_loss(
    logits: &[Vec<f64>],
    feats: &FeatureSequence,
    target: &[usize],
    extra: &ExtraTerms,
) -> Result<(LossBreakdown, Vec<Vec<f64>>)> {
    let log_probs: Vec<Vec<f64>> = logits.iter().map(|z| log_softmax(z)).collect();
    let probs: Vec<Vec<f64>> = log_probs.iter().map(|r| r.iter().map(|v| v.exp()).collect()).collect();
    let (ctc, mut grad) = ctc_loss(&log_probs, target, BLANK_ID)?;
    let (mut ce, g) = constraint_loss(&probs, feats);
    add_into(&mut grad, &g, 1.0);
    if !extra.relation_frames.is_empty() {
        let (l, g) = relation_penalty(&probs, extra.relation_frames);
        ce += l;
        add_into(&mut grad, &g, 1.0);
    }
    if extra.offstroke_weight != 0.0 {
        let (l, g) = offstroke_symbol_loss(&probs, feats);
        ce += extra.offstroke_weight * l;
        add_into(&mut grad, &g, extra.offstroke_weight);
    }
    Ok((LossBreakdown { ctc, ce, total: ctc + ce }, grad))
}

fn add_into(acc: &mut [Vec<f64>], g: &[Vec<f64>], w: f64) {
    for (a, b) in acc.iter_mut().zip(g) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += w * y;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::{NOREL_ID, NUM_LABELS};

    fn kinds(stroke: usize, off: usize) -> FeatureSequence {
        let mut kinds = vec![FrameKind::Stroke(0); stroke];
        kinds.extend((0..off).map(|i| FrameKind::OffStroke(i + 1)));
        FeatureSequence { frames: vec![[0.0; 3]; kinds.len()], kinds }
    }

    #[test]
    fn uniform_closed_form() {
        for k in 1..6 {
            let probs = vec![vec![1.0 / NUM_LABELS as f64; NUM_LABELS]; k + 2];
            let (l, _) = constraint_loss(&probs, &kinds(k, 2));
            let want = -(k as f64) * (1.0 - 7.0 / 109.0f64).ln();
            assert!((l - want).abs() < 1e-9, "{l} vs {want}");
        }
    }

    #[test]
    fn no_relation_mass_is_zero() {
        let mut p = vec![0.0; NUM_LABELS];
        p[3] = 0.5;
        p[BLANK_ID] = 0.5;
        let (l, g) = constraint_loss(&vec![p; 3], &kinds(3, 0));
        assert_eq!(l, 0.0);
        assert!(g.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_relation_is_clamped() {
        let mut p = vec![0.0; NUM_LABELS];
        p[NOREL_ID] = 1.0;
        let (l, g) = constraint_loss(&[p], &kinds(1, 0));
        assert!((l + CONSTRAINT_EPS.ln()).abs() < 1e-12);
        assert!(g[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn offstroke_penalty_mirrors_stroke_penalty() {
        let probs = vec![vec![1.0 / NUM_LABELS as f64; NUM_LABELS]; 5];
        let (l, _) = offstroke_symbol_loss(&probs, &kinds(2, 3));
        assert!((l + 3.0 * (1.0 - 101.0 / 109.0f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn relation_penalty_on_chosen_frames() {
        let probs = vec![vec![1.0 / NUM_LABELS as f64; NUM_LABELS]; 4];
        let (l, g) = relation_penalty(&probs, &[1, 3]);
        assert!((l + 2.0 * (1.0 - 7.0 / 109.0f64).ln()).abs() < 1e-9);
        assert!(g[0].iter().all(|&v| v == 0.0));
        assert!(g[1].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn off_stroke_frames_are_free() {
        let mut p = vec![0.0; NUM_LABELS];
        p[NOREL_ID] = 0.9;
        p[0] = 0.1;
        let (l, _) = constraint_loss(&vec![p; 4], &kinds(0, 4));
        assert_eq!(l, 0.0);
    }
}
