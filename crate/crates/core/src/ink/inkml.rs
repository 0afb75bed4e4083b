use std::collections::HashMap;
use std::path::Path;

use roxmltree::{Document, Node};

use super::mathml::layout_from_mathml;
use super::{InkSample, Point, Stroke};
use crate::alphabet::{canonical_symbol, is_symbol};
use crate::error::{Error, Result};
use crate::srt::{from_lg, LgDocument, SrtBuilder};

const XML_NS: &str = "http://www.w3.org/XML/1998/namespace";

struct SymbolGroup {
    label: String,
    strokes: Vec<u32>,
    href: Option<String>,
}

/// Parse a CROHME InkML document.
///
/// Strokes follow trace document order. Ground truth is built from the
/// segmentation trace groups plus the MathML layout annotation when both
/// are present.
pub fn parse_inkml(source_id: &str, bytes: &[u8]) -> Result<InkSample> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::InkMl(format!("not UTF-8: {e}")))?;
    let doc = Document::parse(text).map_err(|e| Error::InkMl(e.to_string()))?;
    let root = doc.root_element();

    let mut strokes = Vec::new();
    let mut trace_index: HashMap<String, u32> = HashMap::new();
    for trace in root.descendants().filter(|n| n.has_tag_name("trace")) {
        let idx = strokes.len() as u32;
        let points = parse_trace(trace.text().unwrap_or(""))
            .map_err(|e| Error::InkMl(format!("trace {idx}: {e}")))?;
        if let Some(id) = trace.attribute("id").or_else(|| trace.attribute((XML_NS, "id"))) {
            trace_index.insert(id.to_string(), idx);
        }
        strokes.push(Stroke { id: idx, points });
    }
    if strokes.is_empty() {
        return Err(Error::InkMl("no trace data".into()));
    }

    let groups = symbol_groups(root, &trace_index)?;
    let unknown: Vec<String> = groups
        .iter()
        .filter(|g| !is_symbol(&g.label))
        .map(|g| g.label.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownLabel(unknown));
    }

    let math = root
        .descendants()
        .find(|n| n.has_tag_name("math"));
    let ground_truth = match (groups.is_empty(), math) {
        (false, Some(math)) => Some(tree_from_groups(&groups, math)?),
        _ => None,
    };

    let sample = InkSample { source_id: source_id.to_string(), strokes, ground_truth };
    sample.validate()?;
    Ok(sample)
}

/// Load an InkML file; a sibling `.lg` file, when present, supplies the ground truth.
pub fn load_inkml_file(path: &Path) -> Result<InkSample> {
    let bytes = std::fs::read(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut sample = parse_inkml(&id, &bytes)?;
    let lg_path = path.with_extension("lg");
    if lg_path.exists() {
        let doc: LgDocument = std::fs::read_to_string(&lg_path)?.parse()?;
        let srt = from_lg(&doc)?;
        let unknown: Vec<String> = srt
            .nodes()
            .iter()
            .filter(|n| !is_symbol(&n.label))
            .map(|n| n.label.clone())
            .collect();
        if !unknown.is_empty() {
            return Err(Error::UnknownLabel(unknown));
        }
        sample = sample.with_ground_truth(srt)?;
    }
    Ok(sample)
}

/// Write the traces of a sample as a minimal InkML document. Ground truth is
/// not embedded; pair the file with an `.lg` file for that.
pub fn write_inkml(sample: &InkSample) -> String {
    let mut out = String::from("<ink xmlns=\"http://www.w3.org/2003/InkML\">\n");
    for s in &sample.strokes {
        let pts: Vec<String> = s.points.iter().map(|[x, y]| format!("{x} {y}")).collect();
        out.push_str(&format!("<trace id=\"{}\">{}</trace>\n", s.id, pts.join(", ")));
    }
    out.push_str("</ink>\n");
    out
}

fn parse_trace(text: &str) -> std::result::Result<Vec<Point>, String> {
    let mut out = Vec::new();
    for chunk in text.split(',') {
        let chunk = chunk.trim();
        if chunk.is_empty() {
            continue;
        }
        let mut vals = chunk.split_whitespace();
        let x = vals.next().ok_or("empty point")?;
        let y = vals.next().ok_or_else(|| format!("point '{chunk}' has one coordinate"))?;
        let p = [
            x.parse::<f64>().map_err(|_| format!("bad coordinate '{x}'"))?,
            y.parse::<f64>().map_err(|_| format!("bad coordinate '{y}'"))?,
        ];
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(format!("non-finite point '{chunk}'"));
        }
        out.push(p);
    }
    if out.is_empty() {
        return Err("missing trace data".into());
    }
    Ok(out)
}

fn truth_annotation(n: Node) -> Option<String> {
    n.children()
        .find(|c| c.has_tag_name("annotation") && c.attribute("type") == Some("truth"))
        .and_then(|c| c.text())
        .map(|t| t.trim().to_string())
}

fn symbol_groups(root: Node, traces: &HashMap<String, u32>) -> Result<Vec<SymbolGroup>> {
    let mut out = Vec::new();
    for g in root.descendants().filter(|n| n.has_tag_name("traceGroup")) {
        let strokes: Vec<u32> = g
            .children()
            .filter(|c| c.has_tag_name("traceView"))
            .map(|v| {
                let r = v.attribute("traceDataRef").unwrap_or("");
                traces
                    .get(r)
                    .copied()
                    .ok_or_else(|| Error::InkMl(format!("traceView references unknown trace '{r}'")))
            })
            .collect::<Result<_>>()?;
        if strokes.is_empty() {
            continue;
        }
        let label = truth_annotation(g)
            .ok_or_else(|| Error::InkMl("symbol trace group without a truth label".into()))?;
        let href = g
            .children()
            .find(|c| c.has_tag_name("annotationXML"))
            .and_then(|c| c.attribute("href"))
            .map(str::to_string);
        out.push(SymbolGroup { label: canonical_symbol(&label).to_string(), strokes, href });
    }
    Ok(out)
}

fn tree_from_groups(groups: &[SymbolGroup], math: Node) -> Result<crate::srt::Srt> {
    let layout = layout_from_mathml(math)?;
    let mut b = SrtBuilder::new();
    let mut by_href = HashMap::new();
    for g in groups {
        let idx = b.node(g.label.clone(), g.strokes.clone());
        if let Some(h) = &g.href {
            by_href.insert(h.as_str(), idx);
        }
    }
    let lookup = |id: &str| {
        by_href
            .get(id)
            .copied()
            .ok_or_else(|| Error::InkMl(format!("MathML symbol '{id}' has no strokes")))
    };
    for id in &layout.symbols {
        lookup(id)?;
    }
    for (p, c, r) in &layout.edges {
        b.edge(lookup(p)?, lookup(c)?, *r);
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::srt::fixtures::int_d2x;

    pub(crate) const INT_D2X: &str = r#"<ink xmlns="http://www.w3.org/2003/InkML">
<annotation type="truth">$\int d^2x$</annotation>
<annotationXML type="truth" encoding="Content-MathML">
 <math xmlns="http://www.w3.org/1998/Math/MathML">
  <mrow>
   <mo xml:id="\int_1">\int</mo>
   <mrow>
    <msup><mi xml:id="d_1">d</mi><mn xml:id="2_1">2</mn></msup>
    <mi xml:id="x_1">x</mi>
   </mrow>
  </mrow>
 </math>
</annotationXML>
<trace id="0">10 0, 12 5, 10 20</trace>
<trace id="1">20 10, 22 12, 24 18</trace>
<trace id="2">28 2, 30 4</trace>
<trace id="3">33 12, 38 18</trace>
<trace id="4">38 12, 33 18</trace>
<traceGroup xml:id="5">
 <annotation type="truth">Segmentation</annotation>
 <traceGroup xml:id="6"><annotation type="truth">\int</annotation><traceView traceDataRef="0"/><annotationXML href="\int_1"/></traceGroup>
 <traceGroup xml:id="7"><annotation type="truth">d</annotation><traceView traceDataRef="1"/><annotationXML href="d_1"/></traceGroup>
 <traceGroup xml:id="8"><annotation type="truth">2</annotation><traceView traceDataRef="2"/><annotationXML href="2_1"/></traceGroup>
 <traceGroup xml:id="9"><annotation type="truth">x</annotation><traceView traceDataRef="3"/><traceView traceDataRef="4"/><annotationXML href="x_1"/></traceGroup>
</traceGroup>
</ink>"#;

    #[test]
    fn one_trace() {
        let s = parse_inkml("a", br#"<ink><trace>0 0, 1 1</trace></ink>"#).unwrap();
        assert_eq!(s.strokes.len(), 1);
        assert_eq!(s.strokes[0].points, vec![[0.0, 0.0], [1.0, 1.0]]);
        assert!(s.ground_truth.is_none());
    }

    #[test]
    fn time_channel_ignored() {
        let s = parse_inkml("a", b"<ink><trace>0 0 100, 1 1 110,2 3 120</trace></ink>").unwrap();
        assert_eq!(s.strokes[0].points.len(), 3);
    }

    #[test]
    fn crohme_style_sample() {
        let s = parse_inkml("int", INT_D2X.as_bytes()).unwrap();
        assert_eq!(s.strokes.len(), 5);
        assert_eq!(s.ground_truth.unwrap(), int_d2x());
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_inkml("a", b"<ink><trace>0 0"), Err(Error::InkMl(_))));
        assert!(matches!(parse_inkml("a", b"<ink></ink>"), Err(Error::InkMl(_))));
        assert!(matches!(parse_inkml("a", b"<ink><trace>0 zz</trace></ink>"), Err(Error::InkMl(_))));
        let bad = INT_D2X.replace("<annotation type=\"truth\">d</annotation>", "<annotation type=\"truth\">\\foo</annotation>");
        match parse_inkml("a", bad.as_bytes()) {
            Err(Error::UnknownLabel(l)) => assert_eq!(l, vec!["\\foo".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fraction_and_sqrt_layout() {
        let xml = r#"<ink>
<annotationXML><math><mrow>
 <mfrac xml:id="-_1"><mi xml:id="h_1">h</mi><mn xml:id="2_1">2</mn></mfrac>
 <msqrt xml:id="\sqrt_1"><mi xml:id="x_1">x</mi></msqrt>
</mrow></math></annotationXML>
<trace id="a">0 5, 10 5</trace>
<trace id="b">4 0, 5 3</trace>
<trace id="c">4 7, 6 9</trace>
<trace id="d">12 5, 14 9, 20 0</trace>
<trace id="e">15 5, 18 8</trace>
<traceGroup>
 <traceGroup><annotation type="truth">-</annotation><traceView traceDataRef="a"/><annotationXML href="-_1"/></traceGroup>
 <traceGroup><annotation type="truth">h</annotation><traceView traceDataRef="b"/><annotationXML href="h_1"/></traceGroup>
 <traceGroup><annotation type="truth">2</annotation><traceView traceDataRef="c"/><annotationXML href="2_1"/></traceGroup>
 <traceGroup><annotation type="truth">\sqrt</annotation><traceView traceDataRef="d"/><annotationXML href="\sqrt_1"/></traceGroup>
 <traceGroup><annotation type="truth">x</annotation><traceView traceDataRef="e"/><annotationXML href="x_1"/></traceGroup>
</traceGroup></ink>"#;
        let s = parse_inkml("f", xml.as_bytes()).unwrap();
        let gt = s.ground_truth.unwrap();
        assert_eq!(crate::srt::to_latex(&gt), "\\frac{h}{2}\\sqrt{x}");
    }

    #[test]
    fn written_traces_parse_back() {
        let s = parse_inkml("int", INT_D2X.as_bytes()).unwrap();
        let back = parse_inkml("int", write_inkml(&s).as_bytes()).unwrap();
        assert_eq!(back.point_lists(), s.point_lists());
        assert!(back.ground_truth.is_none());
    }
}
