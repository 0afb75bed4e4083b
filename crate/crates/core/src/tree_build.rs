//! From a 1D SRT to a full SRT: cut at NoRel, sort the pieces by position,
//! then reconnect them using the classifier as a relation scorer.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::alphabet::{Relation, BLANK_ID};
use crate::error::{Error, Result};
use crate::ink::{featurize_order, normalize, FrameKind, InkSample, OffStrokeFeature, DEFAULT_SPACING};
use crate::model::{recognize_1d, Aggregation, Classifier, OneDSrt};
use crate::srt::{BBox, NodeId, Srt, SrtBuilder};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubSrt {
    pub tree: Srt,
    pub bbox: BBox,
    pub stuck: bool,
}

impl SubSrt {
    pub fn new(tree: Srt, ink: &InkSample) -> Result<Self> {
        let bbox = ink
            .stroke_bbox(&tree.stroke_ids())
            .filter(BBox::is_finite)
            .ok_or_else(|| Error::InvalidInk("sub-SRT has no ink".into()))?;
        Ok(SubSrt { tree, bbox, stuck: false })
    }
}

/// Split the 1D SRT into maximal NoRel-free runs, each chained into a tree
/// rooted at its first symbol.
pub fn cut_at_norel(oned: &OneDSrt, ink: &InkSample) -> Result<Vec<SubSrt>> {
    if oned.symbols.is_empty() {
        return Ok(Vec::new());
    }
    let mut runs: Vec<Vec<usize>> = vec![vec![0]];
    for (i, rel) in oned.relations.iter().enumerate() {
        if *rel == Relation::NoRel {
            runs.push(vec![i + 1]);
        } else {
            runs.last_mut().expect("non-empty").push(i + 1);
        }
    }
    runs.into_iter()
        .map(|run| {
            let mut b = SrtBuilder::new();
            let ids: Vec<usize> = run
                .iter()
                .map(|&s| b.node(oned.symbols[s].label.clone(), oned.symbols[s].strokes.clone()))
                .collect();
            for k in 1..run.len() {
                b.edge(ids[k - 1], ids[k], oned.relations[run[k] - 1]);
            }
            SubSrt::new(b.build()?, ink)
        })
        .collect()
}

/// `a` goes before `b`: left of it, else above it, else by left edge.
fn before(a: &BBox, b: &BBox) -> bool {
    if a.max_x < b.min_x {
        return true;
    }
    if b.max_x < a.min_x {
        return false;
    }
    if a.max_y < b.min_y {
        return true;
    }
    if b.max_y < a.min_y {
        return false;
    }
    a.min_x < b.min_x
}

/// Stable insertion sort by position. The positional order is not
/// transitive in general, so a library sort (which may panic or loop on an
/// inconsistent comparator) is avoided.
pub fn sort_subtrees(mut list: Vec<SubSrt>) -> Vec<SubSrt> {
    for i in 1..list.len() {
        let mut j = i;
        while j > 0 && before(&list[j].bbox, &list[j - 1].bbox) {
            list.swap(j, j - 1);
            j -= 1;
        }
    }
    list
}

/// Nodes without an outgoing Right edge.
pub fn candidate_nodes(tree: &Srt) -> Vec<NodeId> {
    (0..tree.len())
        .filter(|&n| tree.child_with(n, Relation::Right).is_none())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectionScore {
    pub candidate_node: NodeId,
    pub target: usize,
    /// Most likely of the six relations and NoRel at the junction.
    pub relation: Relation,
    pub probability: f64,
    pub p_blank: f64,
    pub p_norel: f64,
}

/// Score the junction between one node of a sub-SRT and another sub-SRT by
/// classifying the node's strokes followed by the target's strokes.
pub fn score_connection(
    classifier: &dyn Classifier,
    source: &Srt,
    node: NodeId,
    target: &SubSrt,
    target_index: usize,
    ink: &InkSample,
    off: OffStrokeFeature,
) -> Result<ConnectionScore> {
    let mut order: Vec<u32> = source.node(node).stroke_ids.clone();
    let junction_pos = order.len();
    for n in target.tree.preorder() {
        order.extend(&target.tree.node(n).stroke_ids);
    }
    if junction_pos == 0 || order.len() == junction_pos {
        return Err(Error::InvalidInk("connection scoring needs strokes on both sides".into()));
    }
    let feats = featurize_order(ink, &order, off);
    let t = feats
        .kinds
        .iter()
        .position(|k| *k == FrameKind::OffStroke(junction_pos))
        .expect("junction frame exists");
    let dist = classifier.classify(&feats)?;
    let d = &dist[t];
    let mut best = Relation::ALL[0];
    for r in Relation::ALL {
        if d[r.label_id()] > d[best.label_id()] {
            best = r;
        }
    }
    Ok(ConnectionScore {
        candidate_node: node,
        target: target_index,
        relation: best,
        probability: d[best.label_id()],
        p_blank: d[BLANK_ID],
        p_norel: d[Relation::NoRel.label_id()],
    })
}

/// A usable connection: a spatial relation at least as likely as blank and
/// NoRel, into a free slot of the candidate node.
pub fn is_valid(score: &ConnectionScore, source: &Srt) -> bool {
    score.relation.is_spatial()
        && score.probability >= score.p_blank
        && score.probability >= score.p_norel
        && source.child_with(score.candidate_node, score.relation).is_none()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConnectionKind {
    Local,
    Global,
}

/// One scoring decision, for debugging and the UI inspection panel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub kind: ConnectionKind,
    pub source: usize,
    pub target: usize,
    pub candidate_label: String,
    pub candidate_strokes: Vec<u32>,
    pub relation: Relation,
    pub probability: f64,
    pub valid: bool,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Connected {
    pub srt: Srt,
    /// Fragments that could not be attached anywhere.
    pub dropped: Vec<Srt>,
    pub trace: Vec<TraceEvent>,
    pub classifier_calls: usize,
}

struct Connector<'a> {
    classifier: &'a dyn Classifier,
    ink: &'a InkSample,
    off: OffStrokeFeature,
    trace: Vec<TraceEvent>,
    calls: usize,
}

impl Connector<'_> {
    /// Best valid connection from any candidate of `list[i]` into any of `targets`.
    fn best(&mut self, list: &[SubSrt], i: usize, targets: &[usize], kind: ConnectionKind) -> Result<Option<ConnectionScore>> {
        let source = &list[i].tree;
        let mut best: Option<ConnectionScore> = None;
        let first_event = self.trace.len();
        for &k in targets {
            for n in candidate_nodes(source) {
                let s = score_connection(self.classifier, source, n, &list[k], k, self.ink, self.off)?;
                self.calls += 1;
                let valid = is_valid(&s, source);
                let node = source.node(n);
                self.trace.push(TraceEvent {
                    kind,
                    source: i,
                    target: k,
                    candidate_label: node.label.clone(),
                    candidate_strokes: node.stroke_ids.clone(),
                    relation: s.relation,
                    probability: s.probability,
                    valid,
                    accepted: false,
                });
                if valid && best.as_ref().is_none_or(|b| s.probability > b.probability) {
                    best = Some(s);
                }
            }
        }
        if let Some(b) = &best {
            let cand = &source.node(b.candidate_node).stroke_ids;
            if let Some(ev) = self.trace[first_event..]
                .iter_mut()
                .find(|e| e.target == b.target && &e.candidate_strokes == cand)
            {
                ev.accepted = true;
            }
        }
        Ok(best)
    }
}

/// Reconnect sorted sub-SRTs.
///
/// Each pass walks the list; `l_i` first tries its right neighbour, then
/// every other fragment except that neighbour. A successful connection
/// removes the attached fragment, clears all stuck flags and restarts the
/// pass. The loop ends when one fragment remains or all are stuck; the
/// first fragment is returned and the rest are reported as dropped.
pub fn connect(
    classifier: &dyn Classifier,
    mut list: Vec<SubSrt>,
    ink: &InkSample,
    off: OffStrokeFeature,
) -> Result<Connected> {
    if list.is_empty() {
        return Err(Error::Empty("nothing to connect".into()));
    }
    let mut c = Connector { classifier, ink, off, trace: Vec::new(), calls: 0 };
    'outer: while list.len() > 1 && !list.iter().all(|s| s.stuck) {
        for i in 0..list.len() {
            if list[i].stuck {
                continue;
            }
            let mut tried_local = None;
            if i + 1 < list.len() {
                tried_local = Some(i + 1);
                if let Some(s) = c.best(&list, i, &[i + 1], ConnectionKind::Local)? {
                    join(&mut list, i, s, ink)?;
                    continue 'outer;
                }
            }
            let others: Vec<usize> = (0..list.len()).filter(|&k| k != i && Some(k) != tried_local).collect();
            if let Some(s) = c.best(&list, i, &others, ConnectionKind::Global)? {
                join(&mut list, i, s, ink)?;
                continue 'outer;
            }
            list[i].stuck = true;
        }
    }
    let mut rest = list.into_iter();
    let first = rest.next().expect("non-empty");
    Ok(Connected {
        srt: first.tree,
        dropped: rest.map(|s| s.tree).collect(),
        trace: c.trace,
        classifier_calls: c.calls,
    })
}

fn join(list: &mut Vec<SubSrt>, i: usize, s: ConnectionScore, ink: &InkSample) -> Result<()> {
    let child = list.remove(s.target);
    let i = if s.target < i { i - 1 } else { i };
    let tree = list[i].tree.attach(s.candidate_node, s.relation, &child.tree)?;
    list[i] = SubSrt::new(tree, ink)?;
    list.iter_mut().for_each(|l| l.stuck = false);
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecognizeOptions {
    pub spacing: f64,
    pub off_stroke: OffStrokeFeature,
    pub aggregation: Aggregation,
    /// Skip positional sorting (for ablations).
    pub sort: bool,
}

impl Default for RecognizeOptions {
    fn default() -> Self {
        RecognizeOptions {
            spacing: DEFAULT_SPACING,
            off_stroke: OffStrokeFeature::Delta,
            aggregation: Aggregation::Max,
            sort: true,
        }
    }
}

/// Wall-clock milliseconds per stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub normalize: f64,
    pub classify: f64,
    pub decode: f64,
    pub connect: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recognition {
    pub srt: Srt,
    pub oned: OneDSrt,
    pub dropped: Vec<Srt>,
    pub trace: Vec<TraceEvent>,
    pub timing_ms: StageTimes,
}

/// Full pipeline: normalize, classify in writing order, decode the 1D SRT,
/// cut, sort and reconnect.
pub fn recognize(classifier: &dyn Classifier, sample: &InkSample, opts: &RecognizeOptions) -> Result<Recognition> {
    let start = Instant::now();
    let mut lap = start;
    let mut split = || {
        let now = Instant::now();
        let ms = now.duration_since(lap).as_secs_f64() * 1e3;
        lap = now;
        ms
    };
    let mut t = StageTimes::default();
    let ink = normalize(sample, opts.spacing)?;
    let order: Vec<u32> = (0..ink.strokes.len() as u32).collect();
    let feats = featurize_order(&ink, &order, opts.off_stroke);
    t.normalize = split();
    let probs = classifier.classify(&feats)?;
    t.classify = split();
    let oned = recognize_1d(&probs, &feats, opts.aggregation)?;
    let mut list = cut_at_norel(&oned, &ink)?;
    if opts.sort {
        list = sort_subtrees(list);
    }
    t.decode = split();
    let connected = connect(classifier, list, &ink, opts.off_stroke)?;
    let points = sample.point_lists();
    let srt = connected.srt.with_bboxes(&points)?;
    let dropped = connected.dropped.iter().map(|d| d.with_bboxes(&points)).collect::<Result<Vec<_>>>()?;
    t.connect = split();
    t.total = start.elapsed().as_secs_f64() * 1e3;
    Ok(Recognition { srt, oned, dropped, trace: connected.trace, timing_ms: t })
}
