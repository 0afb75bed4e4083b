//! Label-graph (LG) files as used by LgEval.
//!
//! Object format lines:
//!
//! ```text
//! O, id, label, 1.0, stroke, stroke, ...
//! R, parentId, childId, relation, 1.0
//! ```
//!
//! The older stroke-level format (`N, stroke, label, w` and
//! `E, s1, s2, label, w` with `*` joining strokes of one symbol) is also
//! accepted on input.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use super::{Srt, SrtBuilder};
use crate::alphabet::Relation;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LgObject {
    pub id: String,
    pub label: String,
    pub weight: f64,
    pub strokes: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LgRelation {
    pub parent: String,
    pub child: String,
    pub label: Relation,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LgDocument {
    pub objects: Vec<LgObject>,
    pub relations: Vec<LgRelation>,
}

pub fn to_lg(srt: &Srt) -> LgDocument {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let ids: Vec<String> = srt
        .nodes()
        .iter()
        .map(|n| {
            let k = counts.entry(n.label.as_str()).or_insert(0);
            *k += 1;
            format!("{}_{}", n.label, k)
        })
        .collect();
    LgDocument {
        objects: srt
            .nodes()
            .iter()
            .map(|n| LgObject {
                id: ids[n.id].clone(),
                label: n.label.clone(),
                weight: 1.0,
                strokes: n.stroke_ids.clone(),
            })
            .collect(),
        relations: srt
            .edges()
            .iter()
            .map(|e| LgRelation {
                parent: ids[e.parent].clone(),
                child: ids[e.child].clone(),
                label: e.relation,
                weight: 1.0,
            })
            .collect(),
    }
}

pub fn from_lg(doc: &LgDocument) -> Result<Srt> {
    let mut b = SrtBuilder::new();
    let mut index = HashMap::new();
    for o in &doc.objects {
        if index.insert(o.id.as_str(), b.node(o.label.clone(), o.strokes.clone())).is_some() {
            return Err(Error::InvalidTree(format!("duplicate object id '{}'", o.id)));
        }
    }
    for r in &doc.relations {
        let find = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::InvalidTree(format!("relation references unknown object '{id}'")))
        };
        b.edge(find(&r.parent)?, find(&r.child)?, r.label);
    }
    b.build()
}

impl fmt::Display for LgDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# IUD, generated")?;
        writeln!(f, "# Objects({}):", self.objects.len())?;
        for o in &self.objects {
            write!(f, "O, {}, {}, {:.1}", o.id, o.label, o.weight)?;
            for s in &o.strokes {
                write!(f, ", {s}")?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        writeln!(f, "# Relations from SRT:")?;
        for r in &self.relations {
            writeln!(f, "R, {}, {}, {}, {:.1}", r.parent, r.child, r.label, r.weight)?;
        }
        Ok(())
    }
}

impl FromStr for LgDocument {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut doc = LgDocument::default();
        // stroke-level form
        let mut node_labels: BTreeMap<u32, String> = BTreeMap::new();
        let mut stroke_edges: Vec<(u32, u32, String, usize)> = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| Error::LgParse { line: line_no, msg: msg.to_string() };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let weight = |s: Option<&&str>| -> Result<f64> {
                match s {
                    None => Ok(1.0),
                    Some(w) => w.parse().map_err(|_| err(&format!("bad weight '{w}'"))),
                }
            };
            let stroke = |s: &str| -> Result<u32> {
                s.parse().map_err(|_| err(&format!("bad stroke id '{s}'")))
            };
            match fields[0] {
                "O" => {
                    if fields.len() < 5 {
                        return Err(err("object line needs id, label, weight and at least one stroke"));
                    }
                    let strokes = fields[4..].iter().map(|s| stroke(s)).collect::<Result<Vec<_>>>()?;
                    doc.objects.push(LgObject {
                        id: fields[1].to_string(),
                        label: fields[2].to_string(),
                        weight: weight(fields.get(3))?,
                        strokes,
                    });
                }
                "R" | "EO" => {
                    if fields.len() < 4 {
                        return Err(err("relation line needs parent, child and label"));
                    }
                    let label: Relation = fields[3]
                        .parse()
                        .map_err(|_| err(&format!("unknown relation '{}'", fields[3])))?;
                    if !label.is_spatial() {
                        return Err(err("NoRel is not a valid edge label"));
                    }
                    doc.relations.push(LgRelation {
                        parent: fields[1].to_string(),
                        child: fields[2].to_string(),
                        label,
                        weight: weight(fields.get(4))?,
                    });
                }
                "N" => {
                    if fields.len() < 3 {
                        return Err(err("node line needs stroke and label"));
                    }
                    node_labels.insert(stroke(fields[1])?, fields[2].to_string());
                }
                "E" => {
                    if fields.len() < 4 {
                        return Err(err("edge line needs two strokes and a label"));
                    }
                    stroke_edges.push((stroke(fields[1])?, stroke(fields[2])?, fields[3].to_string(), line_no));
                }
                other => return Err(err(&format!("unknown line type '{other}'"))),
            }
        }

        if !node_labels.is_empty() {
            if !doc.objects.is_empty() {
                return Err(Error::LgParse { line: 0, msg: "mixes N/E and O/R lines".into() });
            }
            stroke_level_to_objects(&node_labels, &stroke_edges, &mut doc)?;
        }
        Ok(doc)
    }
}

fn stroke_level_to_objects(
    labels: &BTreeMap<u32, String>,
    edges: &[(u32, u32, String, usize)],
    doc: &mut LgDocument,
) -> Result<()> {
    // union-find over '*' edges
    let strokes: Vec<u32> = labels.keys().copied().collect();
    let pos: HashMap<u32, usize> = strokes.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut uf: Vec<usize> = (0..strokes.len()).collect();
    fn find(uf: &mut [usize], mut i: usize) -> usize {
        while uf[i] != i {
            uf[i] = uf[uf[i]];
            i = uf[i];
        }
        i
    }
    let lookup = |s: u32, line: usize| {
        pos.get(&s)
            .copied()
            .ok_or(Error::LgParse { line, msg: format!("edge references unknown stroke {s}") })
    };
    for (a, b, label, line) in edges {
        if label == "*" {
            let (ia, ib) = (lookup(*a, *line)?, lookup(*b, *line)?);
            let (ra, rb) = (find(&mut uf, ia), find(&mut uf, ib));
            uf[ra] = rb;
        }
    }
    let mut groups: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    for (i, s) in strokes.iter().enumerate() {
        groups.entry(find(&mut uf, i)).or_default().push(*s);
    }
    let mut group_id = HashMap::new();
    for (k, (root, members)) in groups.iter().enumerate() {
        let id = format!("obj_{k}");
        group_id.insert(*root, id.clone());
        doc.objects.push(LgObject {
            id,
            label: labels[&members[0]].clone(),
            weight: 1.0,
            strokes: members.clone(),
        });
    }
    let mut seen = std::collections::HashSet::new();
    for (a, b, label, line) in edges {
        if label == "*" {
            continue;
        }
        let rel: Relation = label
            .parse()
            .map_err(|_| Error::LgParse { line: *line, msg: format!("unknown relation '{label}'") })?;
        let ra = find(&mut uf, lookup(*a, *line)?);
        let rb = find(&mut uf, lookup(*b, *line)?);
        if rel.is_spatial() && seen.insert((ra, rb)) {
            doc.relations.push(LgRelation {
                parent: group_id[&ra].clone(),
                child: group_id[&rb].clone(),
                label: rel,
                weight: 1.0,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::srt::fixtures::int_d2x;

    #[test]
    fn single_node_document() {
        let mut b = SrtBuilder::new();
        b.node("a", vec![0]);
        let doc = to_lg(&b.build().unwrap());
        assert_eq!(doc.objects.len(), 1);
        assert!(doc.relations.is_empty());
    }

    #[test]
    fn int_d2x_counts_and_round_trip() {
        let t = int_d2x();
        let doc = to_lg(&t);
        assert_eq!(doc.objects.len(), 4);
        let mut rels: Vec<_> = doc.relations.iter().map(|r| r.label).collect();
        rels.sort();
        assert_eq!(rels, [Relation::Right, Relation::Right, Relation::Sup]);
        let text = doc.to_string();
        let parsed: LgDocument = text.parse().unwrap();
        assert_eq!(parsed, doc);
        assert_eq!(from_lg(&parsed).unwrap(), t);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "# header\nO, a_1, a, 1.0, 0\nR, a_1, b_1\n";
        match text.parse::<LgDocument>() {
            Err(Error::LgParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "O, a_1, a, 1.0, zero\n";
        assert!(matches!(text.parse::<LgDocument>(), Err(Error::LgParse { line: 1, .. })));
        assert!(matches!("Q, 1\n".parse::<LgDocument>(), Err(Error::LgParse { line: 1, .. })));
    }

    #[test]
    fn stroke_level_format() {
        let text = "\
N, 0, \\int, 1.0
N, 1, d, 1.0
N, 2, 2, 1.0
N, 3, x, 1.0
N, 4, x, 1.0
E, 0, 1, Right, 1.0
E, 1, 2, Sup, 1.0
E, 1, 3, Right, 1.0
E, 1, 4, Right, 1.0
E, 3, 4, *, 1.0
E, 4, 3, *, 1.0
";
        let doc: LgDocument = text.parse().unwrap();
        assert_eq!(from_lg(&doc).unwrap(), int_d2x());
    }
}
