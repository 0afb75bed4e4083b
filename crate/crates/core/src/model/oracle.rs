//! A classifier that reads the answer off the ground truth, for testing the
//! decoding and tree-building stages in isolation.

use std::collections::HashMap;

use super::Classifier;
use crate::alphabet::{symbol_id, Relation, BLANK_ID, NUM_LABELS};
use crate::error::{Error, Result};
use crate::ink::{FeatureSequence, FrameKind};
use crate::srt::{NodeId, Srt};

pub struct OracleClassifier {
    truth: Srt,
    node_of_stroke: HashMap<u32, NodeId>,
    eps: f64,
}

impl OracleClassifier {
    /// `eps` is the probability mass spread over all wrong labels.
    pub fn new(truth: Srt, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::Config(format!("oracle epsilon {eps} must be in [0, 1)")));
        }
        let mut node_of_stroke = HashMap::new();
        for n in truth.nodes() {
            if symbol_id(&n.label).is_none() {
                return Err(Error::UnknownLabel(vec![n.label.clone()]));
            }
            for &s in &n.stroke_ids {
                node_of_stroke.insert(s, n.id);
            }
        }
        Ok(OracleClassifier { truth, node_of_stroke, eps })
    }

    fn node(&self, stroke: u32) -> Result<NodeId> {
        self.node_of_stroke
            .get(&stroke)
            .copied()
            .ok_or_else(|| Error::InvalidInk(format!("stroke {stroke} is not in the ground truth")))
    }

    fn one_hot(&self, label: usize) -> Vec<f64> {
        let mut d = vec![self.eps / (NUM_LABELS - 1) as f64; NUM_LABELS];
        d[label] = 1.0 - self.eps;
        d
    }

    fn stroke_at(feats: &FeatureSequence, t: usize) -> Option<u32> {
        match feats.kinds.get(t) {
            Some(FrameKind::Stroke(s)) => Some(*s),
            _ => None,
        }
    }
}

impl Classifier for OracleClassifier {
    fn classify(&self, feats: &FeatureSequence) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(feats.len());
        for (t, kind) in feats.kinds.iter().enumerate() {
            let label = match *kind {
                FrameKind::Stroke(s) => {
                    let n = self.node(s)?;
                    symbol_id(&self.truth.node(n).label).expect("checked in new") as usize
                }
                FrameKind::OffStroke(_) => {
                    let before = t.checked_sub(1).and_then(|p| Self::stroke_at(feats, p));
                    let after = Self::stroke_at(feats, t + 1);
                    let (Some(a), Some(b)) = (before, after) else {
                        return Err(Error::InvalidInk(format!("off-stroke frame {t} is not between strokes")));
                    };
                    let (na, nb) = (self.node(a)?, self.node(b)?);
                    if na == nb {
                        BLANK_ID
                    } else if let Some((_, rel)) = self.truth.parent(nb).filter(|(p, _)| *p == na) {
                        rel.label_id()
                    } else {
                        Relation::NoRel.label_id()
                    }
                }
            };
            out.push(self.one_hot(label));
        }
        Ok(out)
    }
}
