//! Output label space of the symbol-relation classifier.
//!
//! Label ids are laid out as `[symbols (101) | relations (6) | NoRel | blank]`,
//! giving 109 outputs per frame.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// The 101 CROHME 2014 symbol classes, in label-id order.
pub const SYMBOLS: [&str; 101] = [
    "!", "(", ")", "+", "COMMA", "-", ".", "/", "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
    "=", "A", "B", "C", "E", "F", "G", "H", "I", "L", "M", "N", "P", "R", "S", "T", "V", "X",
    "Y", "[", "\\Delta", "\\alpha", "\\beta", "\\cos", "\\div", "\\exists", "\\forall",
    "\\gamma", "\\geq", "\\gt", "\\in", "\\infty", "\\int", "\\lambda", "\\ldots", "\\leq",
    "\\lim", "\\log", "\\lt", "\\mu", "\\neq", "\\phi", "\\pi", "\\pm", "\\prime",
    "\\rightarrow", "\\sigma", "\\sin", "\\sqrt", "\\sum", "\\tan", "\\theta", "\\times", "\\{",
    "\\}", "]", "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l", "m", "n", "o", "p",
    "q", "r", "s", "t", "u", "v", "w", "x", "y", "z", "|",
];

pub const NUM_SYMBOLS: usize = SYMBOLS.len();
pub const NUM_RELATIONS: usize = 6;
/// Total classifier output width including NoRel and blank.
pub const NUM_LABELS: usize = NUM_SYMBOLS + NUM_RELATIONS + 2;
pub const NOREL_ID: usize = NUM_SYMBOLS + NUM_RELATIONS;
pub const BLANK_ID: usize = NOREL_ID + 1;
/// Ids of the six spatial relations plus NoRel.
pub const RELATION_IDS: std::ops::Range<usize> = NUM_SYMBOLS..BLANK_ID;

/// Spatial relation between two symbols, plus the `NoRel` sentinel used
/// inside linearized paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    Right,
    Above,
    Below,
    Inside,
    Sup,
    Sub,
    NoRel,
}

impl Relation {
    /// The six relations that may label a tree edge.
    pub const SPATIAL: [Relation; 6] = [
        Relation::Right,
        Relation::Above,
        Relation::Below,
        Relation::Inside,
        Relation::Sup,
        Relation::Sub,
    ];
    pub const ALL: [Relation; 7] = [
        Relation::Right,
        Relation::Above,
        Relation::Below,
        Relation::Inside,
        Relation::Sup,
        Relation::Sub,
        Relation::NoRel,
    ];

    pub fn is_spatial(self) -> bool {
        self != Relation::NoRel
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Right => "Right",
            Relation::Above => "Above",
            Relation::Below => "Below",
            Relation::Inside => "Inside",
            Relation::Sup => "Sup",
            Relation::Sub => "Sub",
            Relation::NoRel => "NoRel",
        }
    }

    pub fn label_id(self) -> usize {
        NUM_SYMBOLS + self as usize
    }

    pub fn from_label_id(id: usize) -> Option<Relation> {
        RELATION_IDS
            .contains(&id)
            .then(|| Relation::ALL[id - NUM_SYMBOLS])
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "Right" | "R" => Relation::Right,
            "Above" | "A" => Relation::Above,
            "Below" | "B" => Relation::Below,
            "Inside" | "I" => Relation::Inside,
            "Sup" | "Superscript" => Relation::Sup,
            "Sub" | "Subscript" => Relation::Sub,
            "NoRel" => Relation::NoRel,
            other => return Err(Error::UnknownLabel(vec![other.to_string()])),
        })
    }
}

/// A single classifier output label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Symbol(u16),
    Relation(Relation),
    Blank,
}

impl Label {
    pub fn id(self) -> usize {
        match self {
            Label::Symbol(i) => i as usize,
            Label::Relation(r) => r.label_id(),
            Label::Blank => BLANK_ID,
        }
    }

    pub fn from_id(id: usize) -> Option<Label> {
        match id {
            i if i < NUM_SYMBOLS => Some(Label::Symbol(i as u16)),
            i if RELATION_IDS.contains(&i) => Relation::from_label_id(i).map(Label::Relation),
            BLANK_ID => Some(Label::Blank),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Symbol(i) => SYMBOLS[i as usize],
            Label::Relation(r) => r.as_str(),
            Label::Blank => "<blank>",
        }
    }
}

/// Look up a symbol class id, accepting the usual CROHME spellings.
pub fn symbol_id(name: &str) -> Option<u16> {
    let canonical = canonical_symbol(name);
    SYMBOLS.iter().position(|s| *s == canonical).map(|i| i as u16)
}

/// Map alternate spellings found in CROHME files onto the canonical class name.
pub fn canonical_symbol(name: &str) -> &str {
    match name {
        "," => "COMMA",
        "<" => "\\lt",
        ">" => "\\gt",
        "\\frac" | "\\hline" => "-",
        "\\cdots" | "\\dots" => "\\ldots",
        "\\lbrace" => "\\{",
        "\\rbrace" => "\\}",
        "\\to" => "\\rightarrow",
        "\\ge" => "\\geq",
        "\\le" => "\\leq",
        "\\ne" => "\\neq",
        "'" => "\\prime",
        other => other,
    }
}

pub fn is_symbol(name: &str) -> bool {
    symbol_id(name).is_some()
}

/// Names of all 109 labels in id order.
pub fn all_label_names() -> Vec<&'static str> {
    (0..NUM_LABELS)
        .map(|i| Label::from_id(i).expect("dense label ids").name())
        .collect()
}

/// Stable fingerprint of the label layout, stored in checkpoints.
pub fn alphabet_hash() -> String {
    let mut h = Sha256::new();
    for name in all_label_names() {
        h.update(name.as_bytes());
        h.update([0u8]);
    }
    let digest = h.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn partitions_are_disjoint_and_dense() {
        assert_eq!(NUM_SYMBOLS, 101);
        assert_eq!(NUM_LABELS, 109);
        let names = all_label_names();
        let unique: HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), NUM_LABELS);
        for id in 0..NUM_LABELS {
            assert_eq!(Label::from_id(id).unwrap().id(), id);
        }
        assert_eq!(Label::from_id(NUM_LABELS), None);
    }

    #[test]
    fn relation_ids() {
        assert_eq!(Relation::Right.label_id(), 101);
        assert_eq!(Relation::NoRel.label_id(), NOREL_ID);
        assert_eq!(BLANK_ID, 108);
        for r in Relation::ALL {
            assert_eq!(r.as_str().parse::<Relation>().unwrap(), r);
        }
    }

    #[test]
    fn aliases() {
        assert_eq!(symbol_id(","), symbol_id("COMMA"));
        assert_eq!(symbol_id("<"), symbol_id("\\lt"));
        assert!(symbol_id("\\notasymbol").is_none());
        assert_eq!(alphabet_hash().len(), 16);
    }
}
