//! Turning per-frame distributions into a 1D SRT.

use serde::{Deserialize, Serialize};

use crate::alphabet::{Relation, BLANK_ID, NUM_SYMBOLS, SYMBOLS};
use crate::error::{Error, Result};
use crate::ink::{FeatureSequence, FrameKind};

/// Decision at one pen-up frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Junction {
    /// The strokes on both sides belong to one symbol.
    Blank,
    Relation { relation: Relation, probability: f64 },
}

/// Label an off-stroke frame: the most likely of the six relations and
/// NoRel wins if it is at least as likely as blank.
pub fn decode_relation(dist: &[f64]) -> Junction {
    let mut best = Relation::ALL[0];
    for r in Relation::ALL {
        if dist[r.label_id()] > dist[best.label_id()] {
            best = r;
        }
    }
    let p = dist[best.label_id()];
    if p >= dist[BLANK_ID] {
        Junction::Relation { relation: best, probability: p }
    } else {
        Junction::Blank
    }
}

/// [`decode_relation`] at every off-stroke frame, in order.
pub fn decode_relations(probs: &[Vec<f64>], feats: &FeatureSequence) -> Vec<Junction> {
    feats
        .off_stroke_frames()
        .into_iter()
        .map(|t| decode_relation(&probs[t]))
        .collect()
}

/// How per-frame symbol probabilities are pooled over a segment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregation {
    /// Per-class maximum over the segment's frames.
    #[default]
    Max,
    /// Per-class geometric mean over the segment's frames.
    GeometricMean,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Aggregation::Max),
            "geomean" | "geometric-mean" => Ok(Aggregation::GeometricMean),
            other => Err(Error::Config(format!("unknown aggregation '{other}' (expected max or geomean)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneDSymbol {
    pub label: String,
    pub strokes: Vec<u32>,
    pub score: f64,
}

/// Alternating symbol / relation sequence; `relations[i]` links
/// `symbols[i]` to `symbols[i + 1]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OneDSrt {
    pub symbols: Vec<OneDSymbol>,
    pub relations: Vec<Relation>,
    pub relation_probs: Vec<f64>,
}

impl OneDSrt {
    pub fn tokens(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, s) in self.symbols.iter().enumerate() {
            if i > 0 {
                out.push(self.relations[i - 1].to_string());
            }
            out.push(s.label.clone());
        }
        out
    }
}

/// Group strokes into symbols at blank junctions and label each group.
pub fn recognize_1d(probs: &[Vec<f64>], feats: &FeatureSequence, agg: Aggregation) -> Result<OneDSrt> {
    if probs.len() != feats.len() {
        return Err(Error::Dimension(format!(
            "{} distributions for {} frames",
            probs.len(),
            feats.len()
        )));
    }
    if feats.is_empty() {
        return Ok(OneDSrt::default());
    }
    let mut out = OneDSrt::default();
    let mut frames: Vec<usize> = Vec::new();
    let mut strokes: Vec<u32> = Vec::new();
    for (t, kind) in feats.kinds.iter().enumerate() {
        match *kind {
            FrameKind::Stroke(s) => {
                if strokes.last() != Some(&s) {
                    strokes.push(s);
                }
                frames.push(t);
            }
            FrameKind::OffStroke(_) => match decode_relation(&probs[t]) {
                Junction::Blank => frames.push(t),
                Junction::Relation { relation, probability } => {
                    out.symbols.push(label_segment(probs, &frames, std::mem::take(&mut strokes), agg));
                    frames.clear();
                    out.relations.push(relation);
                    out.relation_probs.push(probability);
                }
            },
        }
    }
    out.symbols.push(label_segment(probs, &frames, strokes, agg));
    Ok(out)
}

fn label_segment(probs: &[Vec<f64>], frames: &[usize], strokes: Vec<u32>, agg: Aggregation) -> OneDSymbol {
    let score = |c: usize| match agg {
        Aggregation::Max => frames.iter().map(|&t| probs[t][c]).fold(0.0, f64::max),
        Aggregation::GeometricMean => {
            let s: f64 = frames.iter().map(|&t| probs[t][c].max(1e-300).ln()).sum();
            (s / frames.len() as f64).exp()
        }
    };
    let mut best = 0;
    let mut best_score = score(0);
    for c in 1..NUM_SYMBOLS {
        let v = score(c);
        if v > best_score {
            best = c;
            best_score = v;
        }
    }
    OneDSymbol { label: SYMBOLS[best].to_string(), strokes, score: best_score }
}
