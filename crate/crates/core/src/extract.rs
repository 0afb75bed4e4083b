//! Training targets from ground-truth trees.
//!
//! Three extraction rules turn one annotated sample into several
//! `(stroke order, label sequence)` pairs:
//!
//! * [`PeRule::RootToLeaf`]: every root-to-leaf path, relations only.
//! * [`PeRule::WritingOrder`]: all symbols in writing order, NoRel between
//!   symbols that are not parent and child.
//! * [`PeRule::Shuffled`]: the root's sub-trees in random order.
//!
//! A fourth, opt-in source, [`PeRule::Connection`], emits short paths shaped
//! like the relation queries made while reconnecting sub-trees.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::alphabet::{symbol_id, Label, Relation, NUM_LABELS};
use crate::error::{Error, Result};
use crate::ink::{InkSample, Point};
use crate::srt::{
    connection_query_paths, derived_paths_from_root, random_root_shuffle_paths, writing_order_path, DerivedPath,
    ShuffleScope, Srt, Token,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PeRule {
    #[serde(rename = "PE1")]
    RootToLeaf,
    #[serde(rename = "PE2")]
    WritingOrder,
    #[serde(rename = "PE3")]
    Shuffled,
    #[serde(rename = "CQ")]
    Connection,
}

impl PeRule {
    pub const ALL: [PeRule; 4] = [PeRule::RootToLeaf, PeRule::WritingOrder, PeRule::Shuffled, PeRule::Connection];
    /// The three path-extraction rules used by default.
    pub const DEFAULT: [PeRule; 3] = [PeRule::RootToLeaf, PeRule::WritingOrder, PeRule::Shuffled];

    pub fn name(self) -> &'static str {
        match self {
            PeRule::RootToLeaf => "PE1",
            PeRule::WritingOrder => "PE2",
            PeRule::Shuffled => "PE3",
            PeRule::Connection => "CQ",
        }
    }
}

impl std::str::FromStr for PeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PE1" | "1" => Ok(PeRule::RootToLeaf),
            "PE2" | "2" => Ok(PeRule::WritingOrder),
            "PE3" | "3" => Ok(PeRule::Shuffled),
            "CQ" => Ok(PeRule::Connection),
            other => Err(Error::Config(format!("unknown extraction rule '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPath {
    pub stroke_order: Vec<u32>,
    pub target: Vec<Token>,
    /// Number of strokes of each symbol in `target`, in order.
    pub symbol_sizes: Vec<u32>,
    pub source_rule: PeRule,
}

impl LabeledPath {
    fn new(path: &DerivedPath, rule: PeRule) -> Self {
        LabeledPath {
            stroke_order: path.stroke_order(),
            target: path.tokens.clone(),
            symbol_sizes: path.nodes.iter().map(|k| k.0.len() as u32).collect(),
            source_rule: rule,
        }
    }

    pub fn symbol_count(&self) -> usize {
        self.target.iter().filter(|t| matches!(t, Token::Symbol(_))).count()
    }

    pub fn target_strings(&self) -> Vec<String> {
        self.target.iter().map(|t| t.to_string()).collect()
    }
}

fn ground_truth(sample: &InkSample) -> Result<&Srt> {
    sample
        .ground_truth
        .as_ref()
        .ok_or_else(|| Error::MissingGroundTruth(sample.source_id.clone()))
}

pub fn extract_pe1(sample: &InkSample) -> Result<Vec<LabeledPath>> {
    let gt = ground_truth(sample)?;
    Ok(derived_paths_from_root(gt)?
        .iter()
        .map(|p| LabeledPath::new(p, PeRule::RootToLeaf))
        .collect())
}

/// Error unless every symbol's strokes are consecutive and the symbols
/// cover strokes `0..n` in order.
pub fn check_consecutive(sample: &InkSample) -> Result<()> {
    let gt = ground_truth(sample)?;
    let mut next = 0u32;
    for node in gt.nodes() {
        let contiguous = node.stroke_ids.iter().enumerate().all(|(i, &s)| s == next + i as u32);
        if !contiguous {
            return Err(Error::NonConsecutiveSymbol {
                label: node.label.clone(),
                strokes: node.stroke_ids.clone(),
            });
        }
        next += node.stroke_ids.len() as u32;
    }
    if next as usize != sample.strokes.len() {
        return Err(Error::InvalidInk(format!(
            "ground truth covers {next} of {} strokes",
            sample.strokes.len()
        )));
    }
    Ok(())
}

pub fn extract_pe2(sample: &InkSample) -> Result<LabeledPath> {
    check_consecutive(sample)?;
    let gt = ground_truth(sample)?;
    Ok(LabeledPath::new(&writing_order_path(gt)?, PeRule::WritingOrder))
}

/// Up to `count` shuffled paths, skipping the writing-order path and repeats.
pub fn extract_pe3(
    sample: &InkSample,
    count: usize,
    seed: u64,
    scope: ShuffleScope,
) -> Result<Vec<LabeledPath>> {
    let gt = ground_truth(sample)?;
    let wo = writing_order_path(gt)?;
    let mut seen: HashSet<DerivedPath> = HashSet::from([wo]);
    Ok(random_root_shuffle_paths(gt, count, seed, scope)
        .into_iter()
        .filter(|p| seen.insert(p.clone()))
        .map(|p| LabeledPath::new(&p, PeRule::Shuffled))
        .collect())
}

/// Connection-query paths; see [`connection_query_paths`].
pub fn extract_connection(sample: &InkSample, negatives: usize, seed: u64) -> Result<Vec<LabeledPath>> {
    check_consecutive(sample)?;
    let gt = ground_truth(sample)?;
    Ok(connection_query_paths(gt, negatives, seed)
        .iter()
        .map(|p| LabeledPath::new(p, PeRule::Connection))
        .collect())
}

/// Label ids of a target; blanks are left to the CTC layer.
pub fn build_ctc_target(target: &[Token]) -> Result<Vec<usize>> {
    let mut unknown = Vec::new();
    let ids: Vec<usize> = target
        .iter()
        .map(|t| match t {
            Token::Symbol(s) => match symbol_id(s) {
                Some(i) => Label::Symbol(i).id(),
                None => {
                    unknown.push(s.clone());
                    0
                }
            },
            Token::Relation(r) => r.label_id(),
        })
        .collect();
    if unknown.is_empty() {
        Ok(ids)
    } else {
        Err(Error::UnknownLabel(unknown))
    }
}

pub fn target_from_ids(ids: &[usize]) -> Result<Vec<Token>> {
    ids.iter()
        .map(|&id| match Label::from_id(id) {
            Some(Label::Symbol(i)) => Ok(Token::Symbol(crate::alphabet::SYMBOLS[i as usize].to_string())),
            Some(Label::Relation(r)) => Ok(Token::Relation(r)),
            _ => Err(Error::UnknownLabel(vec![format!("id {id} (of {NUM_LABELS})")])),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub rules: Vec<PeRule>,
    pub pe3_count: usize,
    /// NoRel connection queries kept per sample, on top of all positive ones.
    pub connection_negatives: usize,
    pub seed: u64,
    pub scope: ShuffleScope,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            rules: PeRule::DEFAULT.to_vec(),
            pe3_count: 4,
            connection_negatives: 8,
            seed: 0,
            scope: ShuffleScope::Root,
        }
    }
}

fn sample_seed(seed: u64, id: &str) -> u64 {
    // FNV-1a, stable across runs and platforms
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed
}

/// All configured paths of one sample. Samples whose symbols are written
/// with interleaved strokes are rejected with [`Error::NonConsecutiveSymbol`].
pub fn extract_sample(sample: &InkSample, cfg: &ExtractConfig) -> Result<Vec<LabeledPath>> {
    check_consecutive(sample)?;
    let mut out = Vec::new();
    for rule in PeRule::ALL {
        if !cfg.rules.contains(&rule) {
            continue;
        }
        match rule {
            PeRule::RootToLeaf => out.extend(extract_pe1(sample)?),
            PeRule::WritingOrder => out.push(extract_pe2(sample)?),
            PeRule::Shuffled => out.extend(extract_pe3(
                sample,
                cfg.pe3_count,
                sample_seed(cfg.seed, &sample.source_id),
                cfg.scope,
            )?),
            PeRule::Connection => out.extend(extract_connection(
                sample,
                cfg.connection_negatives,
                sample_seed(cfg.seed, &sample.source_id).rotate_left(17),
            )?),
        }
    }
    Ok(out)
}

pub const MANIFEST_VERSION: u32 = 1;

/// One line of a training manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub v: u32,
    pub sample_id: String,
    pub rule: PeRule,
    pub stroke_order: Vec<u32>,
    pub target: Vec<String>,
    /// Strokes per symbol; lets training find pen-ups inside a symbol.
    #[serde(default)]
    pub symbol_sizes: Vec<u32>,
    /// Normalized ink of the whole sample, indexed by stroke id.
    pub ink: Vec<Vec<Point>>,
}

impl ManifestRecord {
    pub fn new(sample: &InkSample, path: &LabeledPath) -> Self {
        ManifestRecord {
            v: MANIFEST_VERSION,
            sample_id: sample.source_id.clone(),
            rule: path.source_rule,
            stroke_order: path.stroke_order.clone(),
            target: path.target_strings(),
            symbol_sizes: path.symbol_sizes.clone(),
            ink: sample.point_lists(),
        }
    }

    pub fn target_tokens(&self) -> Result<Vec<Token>> {
        self.target
            .iter()
            .map(|s| {
                // symbols first: single letters like "A" double as relation aliases
                if symbol_id(s).is_some() {
                    Ok(Token::Symbol(s.clone()))
                } else {
                    s.parse::<Relation>().map(Token::Relation)
                }
            })
            .collect()
    }

    /// Positions `p` in `stroke_order` whose preceding pen-up lies inside a
    /// symbol (between its strokes `p - 1` and `p`).
    pub fn intra_symbol_positions(&self) -> Result<Vec<usize>> {
        if self.symbol_sizes.is_empty() {
            return Ok(Vec::new());
        }
        let total: u32 = self.symbol_sizes.iter().sum();
        if total as usize != self.stroke_order.len() || self.symbol_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "{}: symbol sizes {:?} do not cover {} strokes",
                self.sample_id,
                self.symbol_sizes,
                self.stroke_order.len()
            )));
        }
        let mut out = Vec::new();
        let mut start = 0usize;
        for &n in &self.symbol_sizes {
            out.extend(start + 1..start + n as usize);
            start += n as usize;
        }
        Ok(out)
    }

    pub fn sample(&self) -> Result<InkSample> {
        InkSample::from_points(self.sample_id.clone(), self.ink.clone())
    }
}

pub fn write_manifest<W: Write>(mut w: W, records: &[ManifestRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest<R: BufRead>(r: R) -> Result<Vec<ManifestRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Config(format!("manifest line {}: {e}", i + 1)))?;
        if rec.v != MANIFEST_VERSION {
            return Err(Error::Config(format!("manifest line {}: unsupported version {}", i + 1, rec.v)));
        }
        out.push(rec);
    }
    Ok(out)
}
