use super::{NodeId, Srt};
use crate::alphabet::Relation;

/// LaTeX text for a symbol class name.
pub fn latex_symbol(label: &str) -> &str {
    match label {
        "COMMA" => ",",
        "\\lt" => "<",
        "\\gt" => ">",
        other => other,
    }
}

fn is_bar(label: &str) -> bool {
    matches!(label, "-" | "\\frac")
}

/// Render a tree as a LaTeX string.
///
/// Right chains concatenate, Sup/Sub become `^{}`/`_{}`, Inside under a
/// radical becomes `\sqrt{}`, and Above/Below become `\frac{}{}` on a
/// fraction bar or `\overset`/`\underset` on anything else.
pub fn to_latex(srt: &Srt) -> String {
    render(srt, srt.root())
}

fn render(srt: &Srt, n: NodeId) -> String {
    let label = srt.node(n).label.as_str();
    let child = |r: Relation| srt.child_with(n, r).map(|c| render(srt, c));
    let above = child(Relation::Above);
    let below = child(Relation::Below);

    let mut head = if is_bar(label) && (above.is_some() || below.is_some()) {
        format!(
            "\\frac{{{}}}{{{}}}",
            above.clone().unwrap_or_default(),
            below.clone().unwrap_or_default()
        )
    } else {
        let mut base = latex_symbol(label).to_string();
        if let Some(b) = &below {
            base = format!("\\underset{{{b}}}{{{base}}}");
        }
        if let Some(a) = &above {
            base = format!("\\overset{{{a}}}{{{base}}}");
        }
        base
    };

    if let Some(inside) = child(Relation::Inside) {
        if label == "\\sqrt" {
            head = format!("\\sqrt{{{inside}}}");
        } else {
            head = format!("{head}{{{inside}}}");
        }
    }
    if let Some(sub) = child(Relation::Sub) {
        head = format!("{head}_{{{sub}}}");
    }
    if let Some(sup) = child(Relation::Sup) {
        head = format!("{head}^{{{sup}}}");
    }
    if let Some(right) = child(Relation::Right) {
        join(&mut head, &right);
    }
    head
}

/// Concatenate, inserting a space only where a control word would
/// otherwise swallow a following letter.
fn join(acc: &mut String, next: &str) {
    if ends_with_control_word(acc) && next.starts_with(|c: char| c.is_ascii_alphabetic()) {
        acc.push(' ');
    }
    acc.push_str(next);
}

fn ends_with_control_word(s: &str) -> bool {
    let trimmed = s.trim_end_matches(|c: char| c.is_ascii_alphabetic());
    trimmed.len() < s.len() && trimmed.ends_with('\\')
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::srt::fixtures::int_d2x;
    use crate::srt::SrtBuilder;

    #[test]
    fn int_d2x_renders() {
        assert_eq!(to_latex(&int_d2x()), "\\int d^{2}x");
    }

    #[test]
    fn single_node() {
        let mut b = SrtBuilder::new();
        b.node("x", vec![0]);
        assert_eq!(to_latex(&b.build().unwrap()), "x");
    }

    #[test]
    fn fraction_then_log() {
        let mut b = SrtBuilder::new();
        let bar = b.node("-", vec![0]);
        let h = b.node("h", vec![1]);
        let two = b.node("2", vec![2]);
        let log = b.node("\\log", vec![3, 4, 5]);
        let h2 = b.node("h", vec![6]);
        b.edge(bar, h, Relation::Above)
            .edge(bar, two, Relation::Below)
            .edge(bar, log, Relation::Right)
            .edge(log, h2, Relation::Right);
        assert_eq!(to_latex(&b.build().unwrap()), "\\frac{h}{2}\\log h");
    }

    #[test]
    fn above_on_non_bar_and_sqrt() {
        let mut b = SrtBuilder::new();
        let sum = b.node("\\sum", vec![0]);
        let i = b.node("i", vec![1]);
        let n = b.node("n", vec![2]);
        let sq = b.node("\\sqrt", vec![3]);
        let x = b.node("x", vec![4]);
        b.edge(sum, i, Relation::Below)
            .edge(sum, n, Relation::Above)
            .edge(sum, sq, Relation::Right)
            .edge(sq, x, Relation::Inside);
        assert_eq!(
            to_latex(&b.build().unwrap()),
            "\\overset{n}{\\underset{i}{\\sum}}\\sqrt{x}"
        );
    }

    #[test]
    fn sub_and_sup_order() {
        let mut b = SrtBuilder::new();
        let x = b.node("x", vec![0]);
        let i = b.node("i", vec![1]);
        let two = b.node("2", vec![2]);
        let comma = b.node("COMMA", vec![3]);
        b.edge(x, i, Relation::Sub)
            .edge(x, two, Relation::Sup)
            .edge(x, comma, Relation::Right);
        assert_eq!(to_latex(&b.build().unwrap()), "x_{i}^{2},");
    }
}
