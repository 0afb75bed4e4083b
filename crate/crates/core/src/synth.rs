//! Synthetic handwriting: typeset a layout tree into strokes with a known SRT.
//!
//! Glyphs are fixed pseudo-random polylines per label, so a classifier can
//! learn them, and every construct is written in a fixed order: base before
//! scripts, fraction bar before numerator before denominator, radical before
//! its contents, operator before its limits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alphabet::{symbol_id, Relation};
use crate::error::{Error, Result};
use crate::ink::{InkSample, Point};
use crate::srt::SrtBuilder;

#[derive(Clone, Debug, PartialEq)]
pub enum Layout {
    Sym(String),
    Row(Vec<Layout>),
    /// A symbol with optional superscript and subscript.
    Script { base: String, sup: Option<Box<Layout>>, sub: Option<Box<Layout>> },
    Frac(Box<Layout>, Box<Layout>),
    Sqrt(Box<Layout>),
    /// A large operator with limits above and below.
    Limits { op: String, above: Option<Box<Layout>>, below: Option<Box<Layout>> },
}

pub fn sym(s: &str) -> Layout {
    Layout::Sym(s.to_string())
}

pub fn row(items: Vec<Layout>) -> Layout {
    Layout::Row(items)
}

pub fn sup(base: &str, s: Layout) -> Layout {
    Layout::Script { base: base.into(), sup: Some(Box::new(s)), sub: None }
}

pub fn sub(base: &str, s: Layout) -> Layout {
    Layout::Script { base: base.into(), sup: None, sub: Some(Box::new(s)) }
}

pub fn subsup(base: &str, lo: Layout, hi: Layout) -> Layout {
    Layout::Script { base: base.into(), sup: Some(Box::new(hi)), sub: Some(Box::new(lo)) }
}

pub fn frac(num: Layout, den: Layout) -> Layout {
    Layout::Frac(Box::new(num), Box::new(den))
}

pub fn sqrt(inner: Layout) -> Layout {
    Layout::Sqrt(Box::new(inner))
}

pub fn limits(op: &str, below: Option<Layout>, above: Option<Layout>) -> Layout {
    Layout::Limits { op: op.into(), above: above.map(Box::new), below: below.map(Box::new) }
}

impl Layout {
    pub fn symbol_count(&self) -> usize {
        let opt = |l: &Option<Box<Layout>>| l.as_ref().map_or(0, |l| l.symbol_count());
        match self {
            Layout::Sym(_) => 1,
            Layout::Row(v) => v.iter().map(Layout::symbol_count).sum(),
            Layout::Script { sup, sub, .. } => 1 + opt(sup) + opt(sub),
            Layout::Frac(a, b) => 1 + a.symbol_count() + b.symbol_count(),
            Layout::Sqrt(a) => 1 + a.symbol_count(),
            Layout::Limits { above, below, .. } => 1 + opt(above) + opt(below),
        }
    }
}

/// Symbols placed in writing order, with tree edges between them.
#[derive(Clone, Debug, Default)]
struct Frag {
    syms: Vec<(String, [f64; 4])>,
    edges: Vec<(usize, usize, Relation)>,
    head: usize,
    tail: usize,
}

impl Frag {
    fn extent(&self) -> [f64; 4] {
        let mut e = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for (_, b) in &self.syms {
            e = [e[0].min(b[0]), e[1].min(b[1]), e[2].max(b[2]), e[3].max(b[3])];
        }
        e
    }

    fn shift(mut self, dx: f64, dy: f64) -> Frag {
        for (_, b) in &mut self.syms {
            *b = [b[0] + dx, b[1] + dy, b[2] + dx, b[3] + dy];
        }
        self
    }

    /// Append `other`, returning the offset of its symbols.
    fn absorb(&mut self, other: Frag) -> usize {
        let off = self.syms.len();
        self.syms.extend(other.syms);
        self.edges.extend(other.edges.into_iter().map(|(a, b, r)| (a + off, b + off, r)));
        off
    }

    fn single(label: &str, b: [f64; 4]) -> Frag {
        Frag { syms: vec![(label.to_string(), b)], ..Frag::default() }
    }
}

fn is_tall(label: &str) -> bool {
    matches!(label, "\\int" | "\\sum" | "\\prod" | "(" | ")" | "[" | "]" | "\\{" | "\\}" | "|")
}

fn glyph_width(label: &str) -> f64 {
    match label {
        "\\log" | "\\lim" | "\\sin" | "\\cos" | "\\tan" => 1.4,
        "\\int" | "(" | ")" | "[" | "]" | "|" | "1" | "i" | "j" | "l" | "!" => 0.35,
        _ => 0.6,
    }
}

/// Baseline at y = 0, y grows downwards, `s` is the font size.
fn place(l: &Layout, s: f64) -> Frag {
    match l {
        Layout::Sym(label) => {
            let w = glyph_width(label) * s;
            let b = match label.as_str() {
                "-" => [0.0, -0.37 * s, w, -0.33 * s],
                "=" | "+" | "\\times" | "\\pm" => [0.0, -0.55 * s, w, -0.15 * s],
                _ if is_tall(label) => [0.0, -0.95 * s, w, 0.25 * s],
                _ => [0.0, -0.7 * s, w, 0.0],
            };
            Frag::single(label, b)
        }
        Layout::Row(items) => {
            let mut out = Frag::default();
            let mut x = 0.0;
            for (k, item) in items.iter().enumerate() {
                let f = place(item, s);
                let e = f.extent();
                let off = out.absorb(f.clone().shift(x - e[0], 0.0));
                if k == 0 {
                    out.head = off + f.head;
                } else {
                    out.edges.push((out.tail, off + f.head, Relation::Right));
                }
                out.tail = off + f.tail;
                x += e[2] - e[0] + 0.25 * s;
            }
            out
        }
        Layout::Script { base, sup, sub } => {
            let mut out = place(&Layout::Sym(base.clone()), s);
            let be = out.extent();
            let x = be[2] + 0.05 * s;
            if let Some(hi) = sup {
                let f = place(hi, 0.6 * s);
                let e = f.extent();
                let dy = be[1] + 0.3 * s - e[3];
                let off = out.absorb(f.clone().shift(x - e[0], dy));
                out.edges.push((0, off + f.head, Relation::Sup));
            }
            if let Some(lo) = sub {
                let f = place(lo, 0.6 * s);
                let e = f.extent();
                let dy = be[3] - 0.15 * s - e[1];
                let off = out.absorb(f.clone().shift(x - e[0], dy));
                out.edges.push((0, off + f.head, Relation::Sub));
            }
            out
        }
        Layout::Frac(num, den) => {
            let n = place(num, 0.8 * s);
            let d = place(den, 0.8 * s);
            let (ne, de) = (n.extent(), d.extent());
            let w = (ne[2] - ne[0]).max(de[2] - de[0]) + 0.3 * s;
            let mut out = Frag::single("-", [0.0, -0.37 * s, w, -0.33 * s]);
            let nx = (w - (ne[2] - ne[0])) / 2.0 - ne[0];
            let off = out.absorb(n.clone().shift(nx, -0.5 * s - ne[3]));
            out.edges.push((0, off + n.head, Relation::Above));
            let dx = (w - (de[2] - de[0])) / 2.0 - de[0];
            let off = out.absorb(d.clone().shift(dx, -0.2 * s - de[1]));
            out.edges.push((0, off + d.head, Relation::Below));
            out
        }
        Layout::Sqrt(inner) => {
            let f = place(inner, s);
            let e = f.extent();
            let mut out = Frag::single("\\sqrt", [0.0, e[1] - 0.2 * s, e[2] - e[0] + 0.55 * s, e[3] + 0.15 * s]);
            let off = out.absorb(f.clone().shift(0.45 * s - e[0], 0.0));
            out.edges.push((0, off + f.head, Relation::Inside));
            out
        }
        Layout::Limits { op, above, below } => {
            let mut out = place(&Layout::Sym(op.clone()), s);
            let oe = out.extent();
            let cx = (oe[0] + oe[2]) / 2.0;
            if let Some(a) = above {
                let f = place(a, 0.55 * s);
                let e = f.extent();
                let off = out.absorb(f.clone().shift(cx - (e[0] + e[2]) / 2.0, oe[1] - 0.1 * s - e[3]));
                out.edges.push((0, off + f.head, Relation::Above));
            }
            if let Some(b) = below {
                let f = place(b, 0.55 * s);
                let e = f.extent();
                let off = out.absorb(f.clone().shift(cx - (e[0] + e[2]) / 2.0, oe[3] + 0.1 * s - e[1]));
                out.edges.push((0, off + f.head, Relation::Below));
            }
            out
        }
    }
}

fn label_seed(label: &str) -> u64 {
    label.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

fn two_stroke(label: &str) -> bool {
    matches!(
        label,
        "x" | "+" | "=" | "i" | "j" | "t" | "f" | "k" | "y" | "X" | "T" | "E" | "F" | "H" | "\\pi" | "\\div"
            | "\\pm" | "\\neq" | "\\log" | "\\sin" | "\\cos" | "\\lim" | "A"
    )
}

/// Strokes of a glyph in the unit square (y down).
pub fn glyph(label: &str) -> Vec<Vec<Point>> {
    match label {
        "-" => return vec![vec![[0.0, 0.5], [0.5, 0.52], [1.0, 0.5]]],
        "\\sqrt" => return vec![vec![[0.0, 0.6], [0.12, 0.5], [0.25, 1.0], [0.4, 0.0], [1.0, 0.0]]],
        "=" => return vec![vec![[0.0, 0.1], [1.0, 0.1]], vec![[0.0, 0.9], [1.0, 0.9]]],
        "+" => return vec![vec![[0.0, 0.5], [1.0, 0.5]], vec![[0.5, 0.0], [0.5, 1.0]]],
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(label_seed(label));
    let n = if two_stroke(label) { 2 } else { 1 };
    (0..n)
        .map(|_| {
            let k = rng.random_range(3..=6);
            let mut pts: Vec<Point> = (0..k).map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
            // pin the glyph to its box so every symbol fills its extent
            pts[0][1] = 0.0;
            pts[k - 1][1] = 1.0;
            pts
        })
        .collect()
}

/// Typeset a layout as ink with ground truth. `jitter` is point noise as a
/// fraction of the font size.
pub fn render(id: &str, layout: &Layout, jitter: f64, seed: u64) -> Result<InkSample> {
    let s = 100.0;
    let frag = place(layout, s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strokes: Vec<Vec<Point>> = Vec::new();
    let mut b = SrtBuilder::new();
    for (label, bx) in &frag.syms {
        if symbol_id(label).is_none() {
            return Err(Error::UnknownLabel(vec![label.clone()]));
        }
        let mut ids = Vec::new();
        for g in glyph(label) {
            ids.push(strokes.len() as u32);
            strokes.push(
                g.iter()
                    .map(|p| {
                        let nx = rng.random_range(-1.0..=1.0) * jitter * s;
                        let ny = rng.random_range(-1.0..=1.0) * jitter * s;
                        [bx[0] + p[0] * (bx[2] - bx[0]) + nx, bx[1] + p[1] * (bx[3] - bx[1]) + ny]
                    })
                    .collect(),
            );
        }
        b.node(label.clone(), ids);
    }
    for &(p, c, r) in &frag.edges {
        b.edge(p, c, r);
    }
    let srt = b.build()?;
    let srt = srt.with_bboxes(&strokes)?;
    InkSample::from_points(id, strokes)?.with_ground_truth(srt)
}

/// Random layouts drawn from a small vocabulary.
pub struct LayoutGenerator {
    rng: ChaCha8Rng,
    pub max_symbols: usize,
    pub vocab: Vec<&'static str>,
    /// Operators that take limits.
    pub big_ops: Vec<&'static str>,
}

pub const DEFAULT_VOCAB: [&str; 16] =
    ["a", "b", "c", "x", "y", "n", "k", "0", "1", "2", "3", "4", "+", "-", "=", "\\pi"];

impl LayoutGenerator {
    pub fn new(seed: u64, max_symbols: usize) -> Self {
        LayoutGenerator { rng: ChaCha8Rng::seed_from_u64(seed), max_symbols, vocab: DEFAULT_VOCAB.to_vec(), big_ops: vec!["\\sum", "\\int"] }
    }

    fn letter(&mut self) -> String {
        // bases and script heads avoid operators
        let v: Vec<&str> = self.vocab.iter().copied().filter(|s| !matches!(*s, "+" | "-" | "=")).collect();
        v[self.rng.random_range(0..v.len())].to_string()
    }

    fn any(&mut self) -> String {
        self.vocab[self.rng.random_range(0..self.vocab.len())].to_string()
    }

    fn atom(&mut self, depth: usize) -> Layout {
        let roll: f64 = self.rng.random();
        let nested = depth < 2;
        if !nested || roll < 0.35 {
            return Layout::Sym(self.any());
        }
        if roll < 0.6 {
            let base = self.letter();
            let kind = self.rng.random_range(0..3);
            let hi = (kind != 1).then(|| Box::new(self.small_row(depth + 1)));
            let lo = (kind != 0).then(|| Box::new(self.small_row(depth + 1)));
            return Layout::Script { base, sup: hi, sub: lo };
        }
        if roll < 0.75 {
            return frac(self.small_row(depth + 1), self.small_row(depth + 1));
        }
        if roll < 0.88 {
            return sqrt(self.small_row(depth + 1));
        }
        let op = self.big_ops[self.rng.random_range(0..self.big_ops.len())];
        let below = Some(self.small_row(depth + 1));
        let above = if self.rng.random_bool(0.6) { Some(self.small_row(depth + 1)) } else { None };
        limits(op, below, above)
    }

    fn small_row(&mut self, depth: usize) -> Layout {
        let n = self.rng.random_range(1..=2);
        let items: Vec<Layout> = (0..n).map(|_| self.atom(depth + 1)).collect();
        if items.len() == 1 {
            items.into_iter().next().expect("one item")
        } else {
            Layout::Row(items)
        }
    }

    /// A top-level row with between 2 and `max_symbols` symbols.
    pub fn next_layout(&mut self) -> Layout {
        loop {
            let n = self.rng.random_range(1..=4);
            let l = Layout::Row((0..n).map(|_| self.atom(0)).collect());
            let c = l.symbol_count();
            if (2..=self.max_symbols).contains(&c) {
                return l;
            }
        }
    }
}

/// Hand-picked layouts covering every relation, including the running
/// examples `\int d^{2}x` and `\frac{h}{2}\log h`.
pub fn showcase() -> Vec<(&'static str, Layout)> {
    vec![
        ("int_d2x", row(vec![sym("\\int"), sup("d", sym("2")), sym("x")])),
        ("frac_h2_log_h", row(vec![frac(sym("h"), sym("2")), sym("\\log"), sym("h")])),
        ("x_sq_plus_1", row(vec![sup("x", sym("2")), sym("+"), sym("1")])),
        ("sqrt_x", row(vec![sqrt(sym("x"))])),
        ("x_i_sq", subsup("x", sym("i"), sym("2"))),
        ("sum_i_n", row(vec![limits("\\sum", Some(row(vec![sym("i"), sym("="), sym("1")])), Some(sym("n"))), sub("a", sym("i"))])),
        ("nested_frac", frac(frac(sym("a"), sym("b")), sym("c"))),
        ("sqrt_frac", row(vec![sqrt(frac(sym("1"), sym("2"))), sym("="), sym("y")])),
        ("e_pow_sum", sup("e", row(vec![sym("x"), sym("+"), sym("y")]))),
        ("a_b_sub_sup", row(vec![sub("a", sym("0")), sym("+"), sup("b", sym("k"))])),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::srt::to_latex;

    #[test]
    fn running_examples_render() {
        let s = showcase();
        let a = render(s[0].0, &s[0].1, 0.0, 0).unwrap();
        assert_eq!(to_latex(a.ground_truth.as_ref().unwrap()), "\\int d^{2}x");
        let b = render(s[1].0, &s[1].1, 0.0, 0).unwrap();
        assert_eq!(to_latex(b.ground_truth.as_ref().unwrap()), "\\frac{h}{2}\\log h");
    }

    #[test]
    fn all_relations_in_showcase() {
        let mut seen = std::collections::BTreeSet::new();
        for (id, l) in showcase() {
            let s = render(id, &l, 0.02, 1).unwrap();
            for e in s.ground_truth.unwrap().edges() {
                seen.insert(e.relation);
            }
        }
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn strokes_follow_writing_order() {
        for (id, l) in showcase() {
            let s = render(id, &l, 0.0, 0).unwrap();
            let gt = s.ground_truth.unwrap();
            let mut firsts: Vec<u32> = gt.nodes().iter().map(|n| n.first_stroke()).collect();
            let sorted = {
                let mut f = firsts.clone();
                f.sort();
                f
            };
            assert_eq!(firsts, sorted, "{id}");
            firsts.dedup();
            assert_eq!(gt.len(), l.symbol_count());
        }
    }

    #[test]
    fn generator_is_deterministic_and_bounded() {
        let mut a = LayoutGenerator::new(3, 15);
        let mut b = LayoutGenerator::new(3, 15);
        for _ in 0..30 {
            let l = a.next_layout();
            assert_eq!(l, b.next_layout());
            assert!(l.symbol_count() <= 15);
            render("g", &l, 0.02, 0).unwrap();
        }
    }

    #[test]
    fn glyphs_are_stable() {
        assert_eq!(glyph("a"), glyph("a"));
        assert_ne!(glyph("a"), glyph("b"));
    }
}
