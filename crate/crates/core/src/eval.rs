//! LgEval-style scoring of predicted trees against ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::alphabet::Relation;
use crate::srt::Srt;

pub const REPORT_VERSION: u32 = 1;

/// Raw counts behind one recall/precision pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub matched: usize,
    pub truth: usize,
    pub pred: usize,
}

impl MatchCounts {
    pub fn recall(&self) -> f64 {
        ratio(self.matched, self.truth)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.matched, self.pred)
    }

    fn add(&mut self, o: MatchCounts) {
        self.matched += o.matched;
        self.truth += o.truth;
        self.pred += o.pred;
    }
}

/// Empty denominators count as perfect: nothing was missed or invented.
fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

fn stroke_key(srt: &Srt, n: usize) -> BTreeSet<u32> {
    srt.node(n).stroke_ids.iter().copied().collect()
}

/// Node index of `b` with the same stroke set as each node of `a`.
fn stroke_matches(a: &Srt, b: &Srt) -> Vec<Option<usize>> {
    let index: BTreeMap<BTreeSet<u32>, usize> = (0..b.len()).map(|n| (stroke_key(b, n), n)).collect();
    (0..a.len()).map(|n| index.get(&stroke_key(a, n)).copied()).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolScore {
    pub segments: MatchCounts,
    pub seg_class: MatchCounts,
}

/// Segments match on identical stroke sets; seg+class also needs equal labels.
pub fn score_symbols(pred: &Srt, truth: &Srt) -> SymbolScore {
    let m = stroke_matches(truth, pred);
    let seg = m.iter().filter(|x| x.is_some()).count();
    let seg_class = m
        .iter()
        .enumerate()
        .filter(|(t, p)| p.is_some_and(|p| pred.node(p).label == truth.node(*t).label))
        .count();
    SymbolScore {
        segments: MatchCounts { matched: seg, truth: truth.len(), pred: pred.len() },
        seg_class: MatchCounts { matched: seg_class, truth: truth.len(), pred: pred.len() },
    }
}

/// An edge matches when both endpoints are segmented and labelled correctly
/// and the relation agrees.
pub fn score_relations(pred: &Srt, truth: &Srt) -> MatchCounts {
    let m = stroke_matches(truth, pred);
    let good = |t: usize| m[t].filter(|&p| pred.node(p).label == truth.node(t).label);
    let pred_edges: BTreeSet<(usize, usize, Relation)> =
        pred.edges().iter().map(|e| (e.parent, e.child, e.relation)).collect();
    let matched = truth
        .edges()
        .iter()
        .filter(|e| match (good(e.parent), good(e.child)) {
            (Some(p), Some(c)) => pred_edges.contains(&(p, c, e.relation)),
            _ => false,
        })
        .count();
    MatchCounts { matched, truth: truth.edges().len(), pred: pred.edges().len() }
}

type EdgeMap = BTreeMap<(BTreeSet<u32>, BTreeSet<u32>), Relation>;

fn edge_map(srt: &Srt) -> EdgeMap {
    srt.edges()
        .iter()
        .map(|e| ((stroke_key(srt, e.parent), stroke_key(srt, e.child)), e.relation))
        .collect()
}

/// Label-graph distance: node label errors on stroke-matched nodes, plus
/// unmatched nodes on either side, plus edge label errors, plus edges
/// present on one side only. Node and edge errors weigh the same.
pub fn error_count(pred: Option<&Srt>, truth: &Srt) -> usize {
    let Some(pred) = pred else {
        return truth.len() + truth.edges().len();
    };
    let m = stroke_matches(truth, pred);
    let mut errors = 0;
    for (t, p) in m.iter().enumerate() {
        match p {
            Some(p) if pred.node(*p).label == truth.node(t).label => {}
            _ => errors += 1,
        }
    }
    let matched_pred: BTreeSet<usize> = m.iter().flatten().copied().collect();
    errors += pred.len() - matched_pred.len();
    let te = edge_map(truth);
    let pe = edge_map(pred);
    for (k, r) in &te {
        if pe.get(k) != Some(r) {
            errors += 1;
        }
    }
    errors += pe.keys().filter(|k| !te.contains_key(*k)).count();
    errors
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpRate {
    pub correct: f64,
    pub le1: f64,
    pub le2: f64,
    pub le3: f64,
}

pub fn exprate(pairs: &[(Option<&Srt>, &Srt)]) -> ExpRate {
    let errors: Vec<usize> = pairs.iter().map(|(p, t)| error_count(*p, t)).collect();
    exprate_from_errors(&errors)
}

fn exprate_from_errors(errors: &[usize]) -> ExpRate {
    let frac = |k: usize| {
        if errors.is_empty() {
            0.0
        } else {
            errors.iter().filter(|&&e| e <= k).count() as f64 / errors.len() as f64
        }
    };
    ExpRate { correct: frac(0), le1: frac(1), le2: frac(2), le3: frac(3) }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConfusionEntry {
    pub truth: String,
    pub output: String,
    pub count: usize,
}

/// Label used for stroke pairs inside one symbol.
pub const SEGMENT_EDGE: &str = "*";

/// Relation label of every ordered pair of distinct strokes; pairs inside
/// one symbol get `*`, unrelated pairs NoRel.
fn stroke_pair_labels(srt: Option<&Srt>, strokes: &BTreeSet<u32>) -> BTreeMap<(u32, u32), String> {
    let mut out = BTreeMap::new();
    for &a in strokes {
        for &b in strokes {
            if a != b {
                out.insert((a, b), Relation::NoRel.as_str().to_string());
            }
        }
    }
    let Some(srt) = srt else { return out };
    for n in srt.nodes() {
        for &a in &n.stroke_ids {
            for &b in &n.stroke_ids {
                if a != b {
                    out.insert((a, b), SEGMENT_EDGE.to_string());
                }
            }
        }
    }
    for e in srt.edges() {
        for &a in &srt.node(e.parent).stroke_ids {
            for &b in &srt.node(e.child).stroke_ids {
                out.insert((a, b), e.relation.as_str().to_string());
            }
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Confusions {
    pub nodes: Vec<ConfusionEntry>,
    pub edges: Vec<ConfusionEntry>,
}

/// Node table over stroke-matched nodes and edge table over stroke pairs,
/// both including the diagonal.
pub fn confusion_tables(pairs: &[(Option<&Srt>, &Srt)]) -> Confusions {
    let mut nodes: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut edges: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (pred, truth) in pairs {
        if let Some(pred) = pred {
            for (t, p) in stroke_matches(truth, pred).into_iter().enumerate() {
                if let Some(p) = p {
                    *nodes.entry((truth.node(t).label.clone(), pred.node(p).label.clone())).or_default() += 1;
                }
            }
        }
        let strokes: BTreeSet<u32> = truth.stroke_ids().into_iter().collect();
        let tl = stroke_pair_labels(Some(truth), &strokes);
        let pl = stroke_pair_labels(*pred, &strokes);
        for (k, t) in tl {
            let p = pl.get(&k).cloned().unwrap_or_else(|| Relation::NoRel.as_str().to_string());
            *edges.entry((t, p)).or_default() += 1;
        }
    }
    let flatten = |m: BTreeMap<(String, String), usize>| {
        m.into_iter()
            .map(|((truth, output), count)| ConfusionEntry { truth, output, count })
            .collect()
    };
    Confusions { nodes: flatten(nodes), edges: flatten(edges) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallPrecision {
    pub recall: f64,
    pub precision: f64,
    #[serde(flatten)]
    pub counts: MatchCounts,
}

impl From<MatchCounts> for RecallPrecision {
    fn from(counts: MatchCounts) -> Self {
        RecallPrecision { recall: counts.recall(), precision: counts.precision(), counts }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub v: u32,
    /// Samples that were scored.
    pub samples: usize,
    /// Samples skipped for lack of ground truth.
    pub excluded_no_truth: usize,
    /// Scored samples for which recognition returned an error.
    pub failed: usize,
    pub segments: RecallPrecision,
    pub seg_class: RecallPrecision,
    pub tree_relations: RecallPrecision,
    pub exprate: ExpRate,
    pub error_weighting: String,
    pub node_confusions: Vec<ConfusionEntry>,
    pub edge_confusions: Vec<ConfusionEntry>,
}

impl EvalReport {
    /// Score aligned `(prediction, truth)` pairs; `None` marks a failed recognition.
    pub fn from_pairs(pairs: &[(Option<&Srt>, &Srt)], excluded_no_truth: usize) -> Self {
        let mut seg = MatchCounts::default();
        let mut seg_class = MatchCounts::default();
        let mut rel = MatchCounts::default();
        for (pred, truth) in pairs {
            match pred {
                Some(p) => {
                    let s = score_symbols(p, truth);
                    seg.add(s.segments);
                    seg_class.add(s.seg_class);
                    rel.add(score_relations(p, truth));
                }
                None => {
                    let miss = MatchCounts { matched: 0, truth: truth.len(), pred: 0 };
                    seg.add(miss);
                    seg_class.add(miss);
                    rel.add(MatchCounts { matched: 0, truth: truth.edges().len(), pred: 0 });
                }
            }
        }
        let conf = confusion_tables(pairs);
        EvalReport {
            v: REPORT_VERSION,
            samples: pairs.len(),
            excluded_no_truth,
            failed: pairs.iter().filter(|(p, _)| p.is_none()).count(),
            segments: seg.into(),
            seg_class: seg_class.into(),
            tree_relations: rel.into(),
            exprate: exprate(pairs),
            error_weighting: "node and edge label errors weighted equally".into(),
            node_confusions: conf.nodes,
            edge_confusions: conf.edges,
        }
    }

    /// Aligned text: symbol/relation recall and precision, then ExpRate columns.
    pub fn to_text(&self) -> String {
        let pct = |x: f64| format!("{:.2}", 100.0 * x);
        let mut s = String::new();
        let _ = writeln!(s, "samples: {}  excluded (no ground truth): {}  failed: {}", self.samples, self.excluded_no_truth, self.failed);
        let _ = writeln!(s, "error counting: {}", self.error_weighting);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "", "Segments", "", "Seg+Cls", "", "TreeRel", "");
        let _ = writeln!(s, "{:<10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "", "Rec", "Prec", "Rec", "Prec", "Rec", "Prec");
        let _ = writeln!(
            s,
            "{:<10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "system",
            pct(self.segments.recall),
            pct(self.segments.precision),
            pct(self.seg_class.recall),
            pct(self.seg_class.precision),
            pct(self.tree_relations.recall),
            pct(self.tree_relations.precision)
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<10} {:>8} {:>8} {:>8} {:>8}", "", "Correct", "<=1", "<=2", "<=3");
        let _ = writeln!(
            s,
            "{:<10} {:>8} {:>8} {:>8} {:>8}",
            "system",
            pct(self.exprate.correct),
            pct(self.exprate.le1),
            pct(self.exprate.le2),
            pct(self.exprate.le3)
        );
        s
    }
}

/// `truth,output,count` rows.
pub fn confusions_csv(entries: &[ConfusionEntry]) -> String {
    let mut s = String::from("truth,output,count\n");
    for e in entries {
        let _ = writeln!(s, "{},{},{}", csv_field(&e.truth), csv_field(&e.output), e.count);
    }
    s
}

fn csv_field(f: &str) -> String {
    if f.contains([',', '"', '\n']) {
        format!("\"{}\"", f.replace('"', "\"\""))
    } else {
        f.to_string()
    }
}
