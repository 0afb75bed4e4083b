//! Ink samples, preprocessing and frame features.

mod inkml;
mod mathml;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::srt::{BBox, Srt};

pub use inkml::{load_inkml_file, parse_inkml, write_inkml};

pub type Point = [f64; 2];

/// Default resampling step in height-normalized units.
pub const DEFAULT_SPACING: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub id: u32,
    pub points: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InkSample {
    pub source_id: String,
    pub strokes: Vec<Stroke>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Srt>,
}

impl InkSample {
    /// Build a sample from raw point lists, numbering strokes in order.
    pub fn from_points(source_id: impl Into<String>, strokes: Vec<Vec<Point>>) -> Result<InkSample> {
        let sample = InkSample {
            source_id: source_id.into(),
            strokes: strokes
                .into_iter()
                .enumerate()
                .map(|(i, points)| Stroke { id: i as u32, points })
                .collect(),
            ground_truth: None,
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.strokes.iter().enumerate() {
            if s.id as usize != i {
                return Err(Error::InvalidInk(format!("stroke {i} has id {}", s.id)));
            }
            if s.points.is_empty() {
                return Err(Error::InvalidInk(format!("stroke {i} has no points")));
            }
            if s.points.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInk(format!("stroke {i} has a non-finite coordinate")));
            }
        }
        if let Some(gt) = &self.ground_truth {
            if let Some(&s) = gt.stroke_ids().iter().find(|&&s| s as usize >= self.strokes.len()) {
                return Err(Error::InvalidInk(format!("ground truth references missing stroke {s}")));
            }
        }
        Ok(())
    }

    pub fn with_ground_truth(mut self, srt: Srt) -> Result<InkSample> {
        self.ground_truth = Some(srt);
        self.validate()?;
        Ok(self)
    }

    pub fn point_lists(&self) -> Vec<Vec<Point>> {
        self.strokes.iter().map(|s| s.points.clone()).collect()
    }

    pub fn bbox(&self) -> Option<BBox> {
        BBox::of_points(self.strokes.iter().flat_map(|s| s.points.iter()))
    }

    pub fn stroke_bbox(&self, ids: &[u32]) -> Option<BBox> {
        BBox::of_points(ids.iter().flat_map(|&i| self.strokes[i as usize].points.iter()))
    }
}

/// Wire format shared with the recognition service: `{"strokes": [[[x,y],...],...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrokesJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<u32>,
    pub strokes: Vec<Vec<Point>>,
}

pub fn parse_strokes_json(source_id: &str, bytes: &[u8]) -> Result<InkSample> {
    let raw: StrokesJson = serde_json::from_slice(bytes)?;
    InkSample::from_points(source_id, raw.strokes)
}

/// Translate the ink to the origin, scale it to unit height (or unit width
/// for flat ink) and resample every stroke to a fixed Euclidean step.
///
/// The points realizing the sample's extreme coordinates are kept, so the
/// bounding box survives resampling and the operation is idempotent.
pub fn normalize(sample: &InkSample, spacing: f64) -> Result<InkSample> {
    if sample.strokes.is_empty() {
        return Err(Error::InvalidInk("no strokes".into()));
    }
    if spacing.is_nan() || spacing <= 0.0 {
        return Err(Error::InvalidInk(format!("resampling step must be positive, got {spacing}")));
    }
    let bbox = sample.bbox().expect("strokes have points");
    let scale = if bbox.height() > 0.0 {
        1.0 / bbox.height()
    } else if bbox.width() > 0.0 {
        1.0 / bbox.width()
    } else {
        1.0
    };
    let transformed: Vec<Vec<Point>> = sample
        .strokes
        .iter()
        .map(|s| {
            let mut pts: Vec<Point> = s
                .points
                .iter()
                .map(|p| [(p[0] - bbox.min_x) * scale, (p[1] - bbox.min_y) * scale])
                .collect();
            pts.dedup();
            pts
        })
        .collect();

    let anchors = extreme_points(&transformed);
    let strokes = transformed
        .iter()
        .enumerate()
        .map(|(i, pts)| {
            let forced: Vec<usize> = anchors
                .iter()
                .filter(|(s, _)| *s == i)
                .map(|(_, v)| *v)
                .collect();
            Stroke { id: i as u32, points: resample(pts, &forced, spacing) }
        })
        .collect();
    Ok(InkSample {
        source_id: sample.source_id.clone(),
        strokes,
        ground_truth: sample.ground_truth.clone(),
    })
}

/// (stroke, vertex) of the first point attaining each of min x, min y, max x, max y.
fn extreme_points(strokes: &[Vec<Point>]) -> Vec<(usize, usize)> {
    let mut best: [Option<(usize, usize, f64)>; 4] = [None; 4];
    for (si, pts) in strokes.iter().enumerate() {
        for (vi, p) in pts.iter().enumerate() {
            let keys = [p[0], p[1], -p[0], -p[1]];
            for (slot, key) in best.iter_mut().zip(keys) {
                if slot.is_none_or(|(_, _, k)| key < k) {
                    *slot = Some((si, vi, key));
                }
            }
        }
    }
    let mut out: Vec<(usize, usize)> = best.iter().flatten().map(|&(s, v, _)| (s, v)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

const STEP_TOL: f64 = 1e-9;

/// Walk the polyline emitting a point every `step` (Euclidean) while keeping
/// the first, last and `forced` vertices.
fn resample(pts: &[Point], forced: &[usize], step: f64) -> Vec<Point> {
    if pts.len() <= 1 {
        return pts.to_vec();
    }
    let mut cuts: Vec<usize> = vec![0];
    cuts.extend(forced.iter().copied().filter(|&v| v > 0 && v < pts.len() - 1));
    cuts.push(pts.len() - 1);
    cuts.sort_unstable();
    cuts.dedup();

    let mut out = vec![pts[0]];
    for w in cuts.windows(2) {
        resample_piece(&pts[w[0]..=w[1]], step, &mut out);
    }
    out
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// `out` already ends with `piece[0]`; appends samples through `piece.last()`.
fn resample_piece(piece: &[Point], step: f64, out: &mut Vec<Point>) {
    let end = *piece.last().expect("non-empty piece");
    let piece_start = out.len() - 1;
    let mut cur = piece[0];
    let mut seg = 0;
    let mut t0 = 0.0;
    'walk: loop {
        while seg + 1 < piece.len() {
            let (u, v) = (piece[seg], piece[seg + 1]);
            if dist(v, cur) >= step * (1.0 - STEP_TOL) {
                let w = [v[0] - u[0], v[1] - u[1]];
                let d = [u[0] - cur[0], u[1] - cur[1]];
                let a = w[0] * w[0] + w[1] * w[1];
                let b = 2.0 * (w[0] * d[0] + w[1] * d[1]);
                let c = d[0] * d[0] + d[1] * d[1] - step * step;
                let disc = (b * b - 4.0 * a * c).max(0.0);
                let t = ((-b + disc.sqrt()) / (2.0 * a)).clamp(t0, 1.0);
                let p = if t >= 1.0 - STEP_TOL {
                    t0 = 0.0;
                    seg += 1;
                    v
                } else {
                    t0 = t;
                    [u[0] + t * w[0], u[1] + t * w[1]]
                };
                out.push(p);
                cur = p;
                continue 'walk;
            }
            seg += 1;
            t0 = 0.0;
        }
        break;
    }

    let last = *out.last().expect("non-empty");
    if last == end {
        return;
    }
    let can_replace = out.len() - 1 > piece_start
        && dist(end, out[out.len() - 2]) >= 0.5 * step
        && dist(end, last) < 0.5 * step;
    if can_replace {
        *out.last_mut().expect("non-empty") = end;
    } else {
        out.push(end);
    }
}

/// Per-frame tag of a [`FeatureSequence`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameKind {
    /// A pen-down sample of the given stroke id.
    Stroke(u32),
    /// The single pen-up frame before the `gap`-th stroke of the sequence.
    OffStroke(usize),
}

/// Representation of the pen-up movement between two strokes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum OffStrokeFeature {
    /// Displacement from the end of one stroke to the start of the next.
    #[default]
    Delta,
    /// Absolute midpoint of that displacement.
    Midpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSequence {
    /// `(dx, dy, pen_down)` per frame.
    pub frames: Vec<[f64; 3]>,
    pub kinds: Vec<FrameKind>,
}

pub const FEATURE_DIM: usize = 3;

impl FeatureSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frame indices of the off-stroke frames, in order.
    pub fn off_stroke_frames(&self) -> Vec<usize> {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| matches!(k, FrameKind::OffStroke(_)))
            .map(|(i, _)| i)
            .collect()
    }

    /// Stroke ids in the order they appear.
    pub fn stroke_order(&self) -> Vec<u32> {
        let mut out: Vec<u32> = Vec::new();
        for k in &self.kinds {
            if let FrameKind::Stroke(s) = *k {
                if out.last() != Some(&s) {
                    out.push(s);
                }
            }
        }
        out
    }

    /// For each stroke position in the sequence, its frame range.
    pub fn stroke_spans(&self) -> Vec<(u32, std::ops::Range<usize>)> {
        let mut out: Vec<(u32, std::ops::Range<usize>)> = Vec::new();
        for (i, k) in self.kinds.iter().enumerate() {
            if let FrameKind::Stroke(s) = *k {
                match out.last_mut() {
                    Some((last, r)) if *last == s && r.end == i => r.end = i + 1,
                    _ => out.push((s, i..i + 1)),
                }
            }
        }
        out
    }
}

/// Features of all strokes in writing order.
pub fn featurize(sample: &InkSample) -> FeatureSequence {
    let order: Vec<u32> = (0..sample.strokes.len() as u32).collect();
    featurize_order(sample, &order, OffStrokeFeature::Delta)
}

/// Features of the given strokes in the given order; off-stroke frames are
/// derived from whichever strokes end up adjacent.
pub fn featurize_order(sample: &InkSample, order: &[u32], off: OffStrokeFeature) -> FeatureSequence {
    let mut frames = Vec::new();
    let mut kinds = Vec::new();
    let mut prev: Option<Point> = None;
    for (pos, &sid) in order.iter().enumerate() {
        let pts = &sample.strokes[sid as usize].points;
        if let Some(p) = prev {
            let q = pts[0];
            let f = match off {
                OffStrokeFeature::Delta => [q[0] - p[0], q[1] - p[1], 0.0],
                OffStrokeFeature::Midpoint => [(q[0] + p[0]) / 2.0, (q[1] + p[1]) / 2.0, 0.0],
            };
            frames.push(f);
            kinds.push(FrameKind::OffStroke(pos));
        }
        for (k, p) in pts.iter().enumerate() {
            let f = if k == 0 {
                [0.0, 0.0, 1.0]
            } else {
                [p[0] - pts[k - 1][0], p[1] - pts[k - 1][1], 1.0]
            };
            frames.push(f);
            kinds.push(FrameKind::Stroke(sid));
        }
        prev = pts.last().copied();
    }
    FeatureSequence { frames, kinds }
}
