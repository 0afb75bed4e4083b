//! Layout relations from CROHME presentation MathML.
//!
//! Every `mi`/`mn`/`mo` leaf, and every `mfrac`/`msqrt`, carries an
//! `xml:id` that the segmentation trace groups point at.

use roxmltree::Node;

use crate::alphabet::Relation;
use crate::error::{Error, Result};

const XML_NS: &str = "http://www.w3.org/XML/1998/namespace";

#[derive(Debug, Default)]
pub(crate) struct Layout {
    /// xml:id of every symbol-bearing element, in document order.
    pub symbols: Vec<String>,
    /// (parent xml:id, child xml:id, relation)
    pub edges: Vec<(String, String, Relation)>,
}

/// First and last baseline symbol of a converted fragment.
struct Span {
    head: String,
    tail: String,
}

pub(crate) fn layout_from_mathml(math: Node) -> Result<Layout> {
    let mut layout = Layout::default();
    if row(math, &mut layout)?.is_none() {
        return Err(Error::InkMl("empty MathML annotation".into()));
    }
    Ok(layout)
}

fn elements<'a, 'i>(n: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    n.children().filter(|c| c.is_element())
}

fn xml_id(n: Node) -> Result<String> {
    n.attribute((XML_NS, "id"))
        .or_else(|| n.attribute("id"))
        .map(str::to_string)
        .ok_or_else(|| Error::InkMl(format!("<{}> has no xml:id", n.tag_name().name())))
}

fn row(n: Node, out: &mut Layout) -> Result<Option<Span>> {
    let mut span: Option<Span> = None;
    for child in elements(n) {
        if let Some(next) = element(child, out)? {
            span = Some(match span {
                None => next,
                Some(prev) => {
                    out.edges.push((prev.tail, next.head.clone(), Relation::Right));
                    Span { head: prev.head, tail: next.tail }
                }
            });
        }
    }
    Ok(span)
}

fn nth(n: Node, i: usize, out: &mut Layout) -> Result<Span> {
    let child = elements(n).nth(i).ok_or_else(|| {
        Error::InkMl(format!("<{}> is missing argument {}", n.tag_name().name(), i + 1))
    })?;
    element(child, out)?
        .ok_or_else(|| Error::InkMl(format!("<{}> argument {} is empty", n.tag_name().name(), i + 1)))
}

fn element(n: Node, out: &mut Layout) -> Result<Option<Span>> {
    let tag = n.tag_name().name();
    match tag {
        "math" | "mrow" | "mstyle" | "mpadded" | "semantics" => row(n, out),
        "annotation" | "annotation-xml" | "none" | "mspace" => Ok(None),
        "mi" | "mn" | "mo" | "mtext" => {
            let id = xml_id(n)?;
            out.symbols.push(id.clone());
            Ok(Some(Span { head: id.clone(), tail: id }))
        }
        "msup" | "msub" | "msubsup" | "munder" | "mover" | "munderover" => {
            let base = nth(n, 0, out)?;
            let rels: &[Relation] = match tag {
                "msup" => &[Relation::Sup],
                "msub" => &[Relation::Sub],
                "msubsup" => &[Relation::Sub, Relation::Sup],
                "munder" => &[Relation::Below],
                "mover" => &[Relation::Above],
                _ => &[Relation::Below, Relation::Above],
            };
            for (i, rel) in rels.iter().enumerate() {
                let arg = nth(n, i + 1, out)?;
                // scripts hang off the last baseline symbol of the base
                out.edges.push((base.tail.clone(), arg.head, *rel));
            }
            Ok(Some(base))
        }
        "mfrac" => {
            let id = xml_id(n)?;
            out.symbols.push(id.clone());
            let num = nth(n, 0, out)?;
            let den = nth(n, 1, out)?;
            out.edges.push((id.clone(), num.head, Relation::Above));
            out.edges.push((id.clone(), den.head, Relation::Below));
            Ok(Some(Span { head: id.clone(), tail: id }))
        }
        "msqrt" => {
            let id = xml_id(n)?;
            out.symbols.push(id.clone());
            if let Some(inner) = row(n, out)? {
                out.edges.push((id.clone(), inner.head, Relation::Inside));
            }
            Ok(Some(Span { head: id.clone(), tail: id }))
        }
        other => Err(Error::InkMl(format!("unsupported MathML element <{other}>"))),
    }
}
