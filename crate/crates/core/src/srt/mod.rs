//! Symbol relation trees.
//!
//! An [`Srt`] is stored in canonical form: nodes are ordered by their first
//! stroke id and a node's [`NodeId`] is its index in that order. Two trees
//! with the same symbols, stroke assignments and labelled edges therefore
//! compare equal regardless of how they were built.

mod latex;
mod lg;
mod paths;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::alphabet::Relation;
use crate::error::{Error, Result};

pub use latex::{latex_symbol, to_latex};
pub use lg::{from_lg, to_lg, LgDocument, LgObject, LgRelation};
pub use paths::{
    connection_query_paths, derived_paths_from_root, random_root_shuffle_paths, reconstruct_from_paths,
    writing_order_path, DerivedPath, NodeKey, ShuffleScope, Token,
};

pub type NodeId = usize;

/// Axis-aligned box in the coordinates of the ink it was measured on, y pointing down.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        BBox { min_x, min_y, max_x, max_y }
    }

    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a [f64; 2]>) -> Option<BBox> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = BBox::new(first[0], first[1], first[0], first[1]);
        for p in it {
            b.min_x = b.min_x.min(p[0]);
            b.min_y = b.min_y.min(p[1]);
            b.max_x = b.max_x.max(p[0]);
            b.max_y = b.max_y.max(p[1]);
        }
        Some(b)
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn is_finite(&self) -> bool {
        [self.min_x, self.min_y, self.max_x, self.max_y]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrtNode {
    pub id: NodeId,
    pub label: String,
    pub stroke_ids: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
}

impl SrtNode {
    pub fn first_stroke(&self) -> u32 {
        self.stroke_ids[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SrtEdge {
    pub parent: NodeId,
    pub child: NodeId,
    pub relation: Relation,
}

/// A validated symbol relation tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SrtRepr")]
pub struct Srt {
    nodes: Vec<SrtNode>,
    edges: Vec<SrtEdge>,
    root: NodeId,
    #[serde(skip)]
    parent: Vec<Option<(NodeId, Relation)>>,
}

#[derive(Deserialize)]
struct SrtRepr {
    nodes: Vec<SrtNode>,
    edges: Vec<SrtEdge>,
    root: NodeId,
}

impl TryFrom<SrtRepr> for Srt {
    type Error = Error;

    fn try_from(repr: SrtRepr) -> Result<Self> {
        let mut b = SrtBuilder::default();
        let mut index = HashMap::new();
        let mut root_strokes = None;
        for n in repr.nodes {
            if n.id == repr.root {
                let mut s = n.stroke_ids.clone();
                s.sort_unstable();
                root_strokes = Some(s);
            }
            let idx = b.node_with_bbox(n.label, n.stroke_ids, n.bbox);
            if index.insert(n.id, idx).is_some() {
                return Err(Error::InvalidTree(format!("duplicate node id {}", n.id)));
            }
        }
        let lookup = |id: NodeId| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::InvalidTree(format!("edge references unknown node {id}")))
        };
        for e in repr.edges {
            b.edge(lookup(e.parent)?, lookup(e.child)?, e.relation);
        }
        let srt = b.build()?;
        match root_strokes {
            Some(s) if s == srt.node(srt.root).stroke_ids => Ok(srt),
            Some(_) => Err(Error::InvalidTree("declared root has a parent".into())),
            None => Err(Error::InvalidTree(format!("unknown root {}", repr.root))),
        }
    }
}

impl Srt {
    pub fn nodes(&self) -> &[SrtNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[SrtEdge] {
        &self.edges
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &SrtNode {
        &self.nodes[id]
    }

    pub fn parent(&self, id: NodeId) -> Option<(NodeId, Relation)> {
        self.parent[id]
    }

    /// Outgoing edges of `id`, ordered by child id (writing order).
    pub fn children(&self, id: NodeId) -> impl Iterator<Item = &SrtEdge> {
        let mut out: Vec<&SrtEdge> = self.edges.iter().filter(|e| e.parent == id).collect();
        out.sort_by_key(|e| e.child);
        out.into_iter()
    }

    pub fn child_with(&self, id: NodeId, relation: Relation) -> Option<NodeId> {
        self.edges
            .iter()
            .find(|e| e.parent == id && e.relation == relation)
            .map(|e| e.child)
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        !self.edges.iter().any(|e| e.parent == id)
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&i| self.is_leaf(i)).collect()
    }

    /// Depth of `id` below the root (root = 0).
    pub fn depth(&self, mut id: NodeId) -> usize {
        let mut d = 0;
        while let Some((p, _)) = self.parent[id] {
            id = p;
            d += 1;
        }
        d
    }

    /// Nodes in pre-order, children visited in writing order.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            let kids: Vec<NodeId> = self.children(n).map(|e| e.child).collect();
            stack.extend(kids.into_iter().rev());
        }
        out
    }

    /// All strokes of the tree, ascending.
    pub fn stroke_ids(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.nodes.iter().flat_map(|n| n.stroke_ids.iter().copied()).collect();
        s.sort_unstable();
        s
    }

    pub fn find_by_strokes(&self, strokes: &[u32]) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.stroke_ids == strokes)
    }

    /// Union of node boxes, if every node has one.
    pub fn bbox(&self) -> Option<BBox> {
        let mut it = self.nodes.iter().map(|n| n.bbox);
        let first = it.next()??;
        it.try_fold(first, |acc, b| b.map(|b| acc.union(&b)))
    }

    /// Same tree with node boxes recomputed from `strokes` (indexed by stroke id).
    pub fn with_bboxes(&self, strokes: &[Vec<[f64; 2]>]) -> Result<Srt> {
        let mut out = self.clone();
        for n in &mut out.nodes {
            let mut pts = Vec::new();
            for &s in &n.stroke_ids {
                let stroke = strokes.get(s as usize).ok_or_else(|| {
                    Error::InvalidTree(format!("node '{}' references missing stroke {s}", n.label))
                })?;
                pts.extend(stroke.iter());
            }
            n.bbox = BBox::of_points(pts.iter());
        }
        Ok(out)
    }

    /// Compare labels, stroke assignments and edges, ignoring boxes.
    pub fn same_structure(&self, other: &Srt) -> bool {
        self.root == other.root
            && self.edges == other.edges
            && self.nodes.len() == other.nodes.len()
            && self
                .nodes
                .iter()
                .zip(&other.nodes)
                .all(|(a, b)| a.label == b.label && a.stroke_ids == b.stroke_ids)
    }

    /// Extract the subtree rooted at `id` as a standalone tree.
    pub fn subtree(&self, id: NodeId) -> Srt {
        let mut b = SrtBuilder::default();
        let mut map = HashMap::new();
        let mut stack = vec![id];
        let mut order = Vec::new();
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            map.insert(n, b.node_with_bbox(node.label.clone(), node.stroke_ids.clone(), node.bbox));
            order.push(n);
            stack.extend(self.children(n).map(|e| e.child));
        }
        for e in &self.edges {
            if let (Some(&p), Some(&c)) = (map.get(&e.parent), map.get(&e.child)) {
                b.edge(p, c, e.relation);
            }
        }
        b.build().expect("subtree of a valid tree is valid")
    }

    /// Attach `child` (as a whole tree) under `at` with `relation`.
    pub fn attach(&self, at: NodeId, relation: Relation, child: &Srt) -> Result<Srt> {
        let mut b = SrtBuilder::from_srt(self);
        let offset = self.nodes.len();
        for n in &child.nodes {
            b.node_with_bbox(n.label.clone(), n.stroke_ids.clone(), n.bbox);
        }
        for e in &child.edges {
            b.edge(e.parent + offset, e.child + offset, e.relation);
        }
        b.edge(at, child.root + offset, relation);
        b.build()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("Srt serializes")
    }
}

/// Incremental constructor; [`SrtBuilder::build`] validates and canonicalizes.
#[derive(Clone, Debug, Default)]
pub struct SrtBuilder {
    nodes: Vec<(String, Vec<u32>, Option<BBox>)>,
    edges: Vec<(usize, usize, Relation)>,
}

impl SrtBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_srt(srt: &Srt) -> Self {
        let mut b = SrtBuilder::default();
        for n in &srt.nodes {
            b.node_with_bbox(n.label.clone(), n.stroke_ids.clone(), n.bbox);
        }
        for e in &srt.edges {
            b.edge(e.parent, e.child, e.relation);
        }
        b
    }

    /// Add a node; returns its builder index (not its final [`NodeId`]).
    pub fn node(&mut self, label: impl Into<String>, strokes: impl Into<Vec<u32>>) -> usize {
        self.node_with_bbox(label, strokes, None)
    }

    pub fn node_with_bbox(
        &mut self,
        label: impl Into<String>,
        strokes: impl Into<Vec<u32>>,
        bbox: Option<BBox>,
    ) -> usize {
        self.nodes.push((label.into(), strokes.into(), bbox));
        self.nodes.len() - 1
    }

    pub fn edge(&mut self, parent: usize, child: usize, relation: Relation) -> &mut Self {
        self.edges.push((parent, child, relation));
        self
    }

    pub fn build(self) -> Result<Srt> {
        if self.nodes.is_empty() {
            return Err(Error::EmptySrt);
        }
        let mut seen = BTreeSet::new();
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (label, mut strokes, bbox) in self.nodes {
            if label.is_empty() {
                return Err(Error::InvalidTree("empty symbol label".into()));
            }
            if strokes.is_empty() {
                return Err(Error::InvalidTree(format!("symbol '{label}' has no strokes")));
            }
            strokes.sort_unstable();
            if strokes.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidTree(format!("symbol '{label}' repeats a stroke")));
            }
            for &s in &strokes {
                if !seen.insert(s) {
                    return Err(Error::OverlappingSegmentation(s));
                }
            }
            nodes.push(SrtNode { id: 0, label, stroke_ids: strokes, bbox });
        }

        // canonical order: by first stroke
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by_key(|&i| nodes[i].stroke_ids[0]);
        let mut remap = vec![0; nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let mut slots: Vec<Option<SrtNode>> = nodes.into_iter().map(Some).collect();
        let mut nodes: Vec<SrtNode> = order
            .iter()
            .map(|&old| slots[old].take().expect("permutation"))
            .collect();
        for (i, n) in nodes.iter_mut().enumerate() {
            n.id = i;
        }

        let n = nodes.len();
        let mut parent: Vec<Option<(NodeId, Relation)>> = vec![None; n];
        let mut slot_used = BTreeSet::new();
        let mut edges = Vec::with_capacity(self.edges.len());
        for (p, c, r) in self.edges {
            if p >= n || c >= n {
                return Err(Error::InvalidTree(format!("edge {p}->{c} references a missing node")));
            }
            if !r.is_spatial() {
                return Err(Error::InvalidTree("NoRel cannot label a tree edge".into()));
            }
            let (p, c) = (remap[p], remap[c]);
            if p == c {
                return Err(Error::InvalidTree(format!("self loop on '{}'", nodes[p].label)));
            }
            if parent[c].is_some() {
                return Err(Error::InvalidTree(format!(
                    "symbol '{}' has more than one parent",
                    nodes[c].label
                )));
            }
            if !slot_used.insert((p, r)) {
                return Err(Error::InvalidTree(format!(
                    "symbol '{}' has two {r} children",
                    nodes[p].label
                )));
            }
            parent[c] = Some((p, r));
            edges.push(SrtEdge { parent: p, child: c, relation: r });
        }
        edges.sort();

        let roots: Vec<NodeId> = (0..n).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::InvalidTree(format!(
                "expected exactly one root, found {}",
                roots.len()
            )));
        }
        let root = roots[0];
        // every node must reach the root without revisiting
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some((p, _)) = parent[cur] {
                cur = p;
                steps += 1;
                if steps > n {
                    return Err(Error::InvalidTree("cycle".into()));
                }
            }
            if cur != root {
                return Err(Error::InvalidTree("disconnected".into()));
            }
        }

        Ok(Srt { nodes, edges, root, parent })
    }
}

/// Count of nodes per label, handy for reports.
pub fn label_histogram(srt: &Srt) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for n in srt.nodes() {
        *m.entry(n.label.as_str()).or_insert(0) += 1;
    }
    m
}


#[cfg(test)]
mod tests {
    use super::fixtures::int_d2x;
    use super::*;

    #[test]
    fn canonical_order_and_equality() {
        let a = int_d2x();
        let mut b = SrtBuilder::new();
        let x = b.node("x", vec![4, 3]);
        let two = b.node("2", vec![2]);
        let d = b.node("d", vec![1]);
        let int = b.node("\\int", vec![0]);
        b.edge(d, two, Relation::Sup)
            .edge(d, x, Relation::Right)
            .edge(int, d, Relation::Right);
        assert_eq!(a, b.build().unwrap());
        assert_eq!(a.root(), 0);
        assert_eq!(a.node(3).stroke_ids, vec![3, 4]);
        assert_eq!(a.leaves(), vec![2, 3]);
        assert_eq!(a.preorder(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn rejects_invalid_trees() {
        assert!(matches!(SrtBuilder::new().build(), Err(Error::EmptySrt)));

        let mut b = SrtBuilder::new();
        let a = b.node("a", vec![0]);
        let c = b.node("b", vec![1]);
        b.edge(a, c, Relation::NoRel);
        assert!(b.build().is_err());

        let mut b = SrtBuilder::new();
        b.node("a", vec![0]);
        b.node("b", vec![0, 1]);
        assert!(matches!(b.build(), Err(Error::OverlappingSegmentation(0))));

        let mut b = SrtBuilder::new();
        let a = b.node("a", vec![0]);
        let c = b.node("b", vec![1]);
        let d = b.node("c", vec![2]);
        b.edge(a, c, Relation::Right).edge(a, d, Relation::Right);
        assert!(b.build().is_err(), "two Right children");

        let mut b = SrtBuilder::new();
        b.node("a", vec![0]);
        b.node("b", vec![1]);
        assert!(b.build().is_err(), "forest");

        let mut b = SrtBuilder::new();
        let a = b.node("a", vec![0]);
        let c = b.node("b", vec![1]);
        b.edge(a, c, Relation::Right).edge(c, a, Relation::Sup);
        assert!(b.build().is_err(), "cycle");
    }

    #[test]
    fn json_round_trip() {
        let t = int_d2x();
        let s = serde_json::to_string(&t).unwrap();
        let back: Srt = serde_json::from_str(&s).unwrap();
        assert_eq!(t, back);
        let bad = r#"{"nodes":[{"id":0,"label":"a","stroke_ids":[0]}],"edges":[{"parent":0,"child":5,"relation":"Right"}],"root":0}"#;
        assert!(serde_json::from_str::<Srt>(bad).is_err());
    }

    #[test]
    fn attach_and_subtree() {
        let t = int_d2x();
        let sub = t.subtree(1);
        assert_eq!(sub.len(), 3);
        assert_eq!(sub.node(sub.root()).label, "d");

        let mut b = SrtBuilder::new();
        b.node("y", vec![9]);
        let y = b.build().unwrap();
        let joined = t.attach(3, Relation::Right, &y).unwrap();
        assert_eq!(joined.len(), 5);
        assert_eq!(joined.child_with(3, Relation::Right), Some(4));
        assert!(t.attach(1, Relation::Right, &y).is_err(), "slot occupied");
    }
}
