use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NodeId, Srt, SrtBuilder};
use crate::alphabet::Relation;
use crate::error::{Error, Result};

/// Identity of a symbol across paths: its sorted stroke set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeKey(pub Vec<u32>);

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Token {
    Symbol(String),
    Relation(Relation),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Symbol(s) => f.write_str(s),
            Token::Relation(r) => write!(f, "{r}"),
        }
    }
}

/// A linearized walk through an SRT: `[sym, rel, sym, ..., sym]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DerivedPath {
    pub tokens: Vec<Token>,
    /// One entry per symbol token, in order.
    pub nodes: Vec<NodeKey>,
}

impl DerivedPath {
    fn from_walk(srt: &Srt, walk: &[NodeId]) -> DerivedPath {
        let mut tokens = Vec::with_capacity(walk.len() * 2);
        for (i, &n) in walk.iter().enumerate() {
            if i > 0 {
                let prev = walk[i - 1];
                let rel = match srt.parent(n) {
                    Some((p, r)) if p == prev => r,
                    _ => Relation::NoRel,
                };
                tokens.push(Token::Relation(rel));
            }
            tokens.push(Token::Symbol(srt.node(n).label.clone()));
        }
        DerivedPath {
            tokens,
            nodes: walk.iter().map(|&n| NodeKey(srt.node(n).stroke_ids.clone())).collect(),
        }
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter_map(|t| match t {
            Token::Symbol(s) => Some(s.as_str()),
            Token::Relation(_) => None,
        })
    }

    pub fn relations(&self) -> impl Iterator<Item = Relation> + '_ {
        self.tokens.iter().filter_map(|t| match t {
            Token::Relation(r) => Some(*r),
            Token::Symbol(_) => None,
        })
    }

    /// Strokes of the visited symbols, symbol by symbol.
    pub fn stroke_order(&self) -> Vec<u32> {
        self.nodes.iter().flat_map(|k| k.0.iter().copied()).collect()
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.to_string()).collect()
    }
}

/// One path per leaf, following tree edges from the root. Leaves are
/// visited in depth-first order with children in writing order.
pub fn derived_paths_from_root(srt: &Srt) -> Result<Vec<DerivedPath>> {
    if srt.is_empty() {
        return Err(Error::EmptySrt);
    }
    let mut out = Vec::new();
    let mut walk = Vec::new();
    collect_root_paths(srt, srt.root(), &mut walk, &mut out);
    Ok(out)
}

fn collect_root_paths(srt: &Srt, n: NodeId, walk: &mut Vec<NodeId>, out: &mut Vec<DerivedPath>) {
    walk.push(n);
    let kids: Vec<NodeId> = srt.children(n).map(|e| e.child).collect();
    if kids.is_empty() {
        out.push(DerivedPath::from_walk(srt, walk));
    }
    for k in kids {
        collect_root_paths(srt, k, walk, out);
    }
    walk.pop();
}

/// All symbols in writing order (first stroke ascending). A relation is
/// emitted only where the earlier symbol is the tree parent of the later one.
pub fn writing_order_path(srt: &Srt) -> Result<DerivedPath> {
    if srt.is_empty() {
        return Err(Error::EmptySrt);
    }
    // canonical node order is already writing order
    let walk: Vec<NodeId> = (0..srt.len()).collect();
    Ok(DerivedPath::from_walk(srt, &walk))
}

/// Which sub-trees get their order randomized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShuffleScope {
    /// Only the sub-trees hanging off the root; each is then walked in writing order.
    #[default]
    Root,
    /// Children of every node, walked in pre-order.
    AllNodes,
}

pub fn random_root_shuffle_paths(
    srt: &Srt,
    count: usize,
    seed: u64,
    scope: ShuffleScope,
) -> Vec<DerivedPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let walk = match scope {
                ShuffleScope::Root => {
                    let mut subtrees: Vec<NodeId> = srt.children(srt.root()).map(|e| e.child).collect();
                    subtrees.shuffle(&mut rng);
                    let mut walk = vec![srt.root()];
                    for s in subtrees {
                        let mut members = descendants(srt, s);
                        members.sort_unstable();
                        walk.extend(members);
                    }
                    walk
                }
                ShuffleScope::AllNodes => {
                    let mut walk = Vec::with_capacity(srt.len());
                    let mut stack = vec![srt.root()];
                    while let Some(n) = stack.pop() {
                        walk.push(n);
                        let mut kids: Vec<NodeId> = srt.children(n).map(|e| e.child).collect();
                        kids.shuffle(&mut rng);
                        stack.extend(kids.into_iter().rev());
                    }
                    walk
                }
            };
            DerivedPath::from_walk(srt, &walk)
        })
        .collect()
}

/// Paths shaped like the queries made when reconnecting sub-trees: one
/// candidate symbol followed by a NoRel-free run of the writing-order path.
///
/// The writing-order path is cut at NoRel into chains. For every ordered
/// pair of chains, each node of the first without a Right edge inside its
/// chain is a candidate. The junction label is the true relation when the
/// candidate is the parent of the second chain's head, else NoRel. All
/// positive queries are kept plus up to `negatives` NoRel ones drawn at
/// random.
pub fn connection_query_paths(srt: &Srt, negatives: usize, seed: u64) -> Vec<DerivedPath> {
    let mut chains: Vec<Vec<NodeId>> = Vec::new();
    for n in 0..srt.len() {
        match chains.last_mut() {
            Some(c) if srt.parent(n).is_some_and(|(p, _)| p == n - 1) => c.push(n),
            _ => chains.push(vec![n]),
        }
    }
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (i, from) in chains.iter().enumerate() {
        let candidates = from.iter().enumerate().filter(|(k, &n)| {
            from.get(k + 1).is_none_or(|&next| srt.parent(next) != Some((n, Relation::Right)))
        });
        for (_, &cand) in candidates {
            for (j, to) in chains.iter().enumerate() {
                if i == j {
                    continue;
                }
                let linked = srt.parent(to[0]).is_some_and(|(p, _)| p == cand);
                let walk: Vec<NodeId> = std::iter::once(cand).chain(to.iter().copied()).collect();
                if linked { &mut pos } else { &mut neg }.push(walk);
            }
        }
    }
    neg.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    neg.truncate(negatives);
    pos.into_iter().chain(neg).map(|w| DerivedPath::from_walk(srt, &w)).collect()
}

fn descendants(srt: &Srt, n: NodeId) -> Vec<NodeId> {
    let mut out = vec![];
    let mut stack = vec![n];
    while let Some(x) = stack.pop() {
        out.push(x);
        stack.extend(srt.children(x).map(|e| e.child));
    }
    out
}

/// Rebuild a tree from the union of paths. Symbols are identified by their
/// stroke sets; each non-NoRel relation links the symbol before it (parent)
/// to the symbol after it (child).
pub fn reconstruct_from_paths(paths: &[DerivedPath]) -> Result<Srt> {
    let mut labels: BTreeMap<NodeKey, String> = BTreeMap::new();
    let mut parent_of: HashMap<NodeKey, (NodeKey, Relation)> = HashMap::new();

    for (pi, path) in paths.iter().enumerate() {
        let symbols: Vec<&str> = path.symbols().collect();
        let relations: Vec<Relation> = path.relations().collect();
        if symbols.len() != path.nodes.len() || relations.len() + 1 != symbols.len() {
            return Err(Error::InconsistentPaths(format!("path {pi} is not an alternating sequence")));
        }
        for (key, label) in path.nodes.iter().zip(&symbols) {
            match labels.get(key) {
                Some(l) if l != label => {
                    return Err(Error::InconsistentPaths(format!(
                        "strokes {:?} labelled both '{l}' and '{label}'",
                        key.0
                    )))
                }
                Some(_) => {}
                None => {
                    labels.insert(key.clone(), label.to_string());
                }
            }
        }
        for (i, rel) in relations.iter().enumerate() {
            if !rel.is_spatial() {
                continue;
            }
            let (p, c) = (&path.nodes[i], &path.nodes[i + 1]);
            match parent_of.get(c) {
                Some((pp, pr)) if pp == p && pr != rel => {
                    return Err(Error::InconsistentPaths(format!(
                        "strokes {:?} -> {:?} labelled both {pr} and {rel}",
                        p.0, c.0
                    )))
                }
                Some((pp, _)) if pp != p => {
                    return Err(Error::InconsistentPaths(format!(
                        "strokes {:?} have two parents",
                        c.0
                    )))
                }
                Some(_) => {}
                None => {
                    parent_of.insert(c.clone(), (p.clone(), *rel));
                }
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptySrt);
    }

    let mut b = SrtBuilder::new();
    let mut index = HashMap::new();
    for (key, label) in &labels {
        index.insert(key.clone(), b.node(label.clone(), key.0.clone()));
    }
    let mut slots = HashMap::new();
    for (c, (p, r)) in &parent_of {
        if let Some(other) = slots.insert((p.clone(), *r), c.clone()) {
            return Err(Error::InconsistentPaths(format!(
                "strokes {:?} have two {r} children ({:?}, {:?})",
                p.0, other.0, c.0
            )));
        }
        b.edge(index[p], index[c], *r);
    }
    b.build().map_err(|e| match e {
        Error::InvalidTree(msg) => Error::PathsNotATree(msg),
        other => other,
    })
}
