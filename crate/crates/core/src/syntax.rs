//! Terms over the modal substitution algebra signature.
//!
//! Formulas are written as s-expressions:
//!
//! ```text
//! t ::= T | F | (g NAME) | (not t) | (or t t) | (and t t) | (imp t t)
//!     | (box t) | (dia t) | (c N t) | (q N t) | (s OVER FROM t)
//! ```
//!
//! `dia`, `q` and `imp` are expanded while parsing and never stored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Index = usize;
pub type IndexSet = BTreeSet<Index>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Zero,
    One,
    Not(Box<Term>),
    Or(Box<Term>, Box<Term>),
    And(Box<Term>, Box<Term>),
    /// Necessity.
    Nec(Box<Term>),
    /// Cylindrification (existential quantifier) on an index.
    Cyl(Index, Box<Term>),
    /// `Subst(over, from, t)` overwrites coordinate `over` with the value at `from`.
    Subst(Index, Index, Box<Term>),
    Gen(String),
}

impl Term {
    pub fn gen(name: impl Into<String>) -> Term {
        Term::Gen(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(t: Term) -> Term {
        Term::Not(Box::new(t))
    }

    pub fn or(a: Term, b: Term) -> Term {
        Term::Or(Box::new(a), Box::new(b))
    }

    pub fn and(a: Term, b: Term) -> Term {
        Term::And(Box::new(a), Box::new(b))
    }

    pub fn nec(t: Term) -> Term {
        Term::Nec(Box::new(t))
    }

    /// `¬□¬t`
    pub fn dia(t: Term) -> Term {
        Term::not(Term::nec(Term::not(t)))
    }

    pub fn imp(a: Term, b: Term) -> Term {
        Term::or(Term::not(a), b)
    }

    pub fn cyl(i: Index, t: Term) -> Term {
        Term::Cyl(i, Box::new(t))
    }

    /// Universal quantifier `¬c_i¬t`.
    pub fn q(i: Index, t: Term) -> Term {
        Term::not(Term::cyl(i, Term::not(t)))
    }

    pub fn subst(over: Index, from: Index, t: Term) -> Term {
        Term::Subst(over, from, Box::new(t))
    }

    /// Negation that cancels an outer `Not` instead of stacking one.
    pub fn negate(t: &Term) -> Term {
        match t {
            Term::Not(inner) => (**inner).clone(),
            other => Term::not(other.clone()),
        }
    }

    /// Conjunction of a list, `One` when empty.
    pub fn conj<I: IntoIterator<Item = Term>>(items: I) -> Term {
        let mut it = items.into_iter();
        match it.next() {
            None => Term::One,
            Some(first) => it.fold(first, Term::and),
        }
    }

    /// Disjunction of a list, `Zero` when empty.
    pub fn disj<I: IntoIterator<Item = Term>>(items: I) -> Term {
        let mut it = items.into_iter();
        match it.next() {
            None => Term::Zero,
            Some(first) => it.fold(first, Term::or),
        }
    }

    /// Cylindrify over every index of `indices`, innermost last.
    pub fn cyl_all<'a, I: IntoIterator<Item = &'a Index>>(indices: I, t: Term) -> Term {
        let v: Vec<Index> = indices.into_iter().copied().collect();
        v.into_iter().rev().fold(t, |acc, i| Term::cyl(i, acc))
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Zero | Term::One | Term::Gen(_) => 1,
            Term::Not(t) | Term::Nec(t) | Term::Cyl(_, t) | Term::Subst(_, _, t) => 1 + t.size(),
            Term::Or(a, b) | Term::And(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Zero | Term::One | Term::Gen(_) => 0,
            Term::Not(t) | Term::Nec(t) | Term::Cyl(_, t) | Term::Subst(_, _, t) => 1 + t.depth(),
            Term::Or(a, b) | Term::And(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn modal_depth(&self) -> usize {
        match self {
            Term::Zero | Term::One | Term::Gen(_) => 0,
            Term::Nec(t) => 1 + t.modal_depth(),
            Term::Not(t) | Term::Cyl(_, t) | Term::Subst(_, _, t) => t.modal_depth(),
            Term::Or(a, b) | Term::And(a, b) => a.modal_depth().max(b.modal_depth()),
        }
    }

    /// No cylindrification or substitution nodes.
    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Term::Zero | Term::One | Term::Gen(_) => true,
            Term::Cyl(..) | Term::Subst(..) => false,
            Term::Not(t) | Term::Nec(t) => t.is_quantifier_free(),
            Term::Or(a, b) | Term::And(a, b) => a.is_quantifier_free() && b.is_quantifier_free(),
        }
    }

    pub fn generators(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_generators(&mut out);
        out
    }

    fn collect_generators(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Zero | Term::One => {}
            Term::Gen(name) => {
                out.insert(name.clone());
            }
            Term::Not(t) | Term::Nec(t) | Term::Cyl(_, t) | Term::Subst(_, _, t) => {
                t.collect_generators(out)
            }
            Term::Or(a, b) | Term::And(a, b) => {
                a.collect_generators(out);
                b.collect_generators(out);
            }
        }
    }

    /// Every index written in the term, bound or free, excluding generator dimension sets.
    pub fn written_indices(&self) -> IndexSet {
        let mut out = IndexSet::new();
        self.collect_written(&mut out);
        out
    }

    fn collect_written(&self, out: &mut IndexSet) {
        match self {
            Term::Zero | Term::One | Term::Gen(_) => {}
            Term::Cyl(i, t) => {
                out.insert(*i);
                t.collect_written(out);
            }
            Term::Subst(u, l, t) => {
                out.insert(*u);
                out.insert(*l);
                t.collect_written(out);
            }
            Term::Not(t) | Term::Nec(t) => t.collect_written(out),
            Term::Or(a, b) | Term::And(a, b) => {
                a.collect_written(out);
                b.collect_written(out);
            }
        }
    }

    /// All subterms including `self`, outermost first.
    pub fn subterms(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            out.push(t);
            match t {
                Term::Zero | Term::One | Term::Gen(_) => {}
                Term::Not(x) | Term::Nec(x) | Term::Cyl(_, x) | Term::Subst(_, _, x) => stack.push(x),
                Term::Or(a, b) | Term::And(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
            }
        }
        out
    }
}

impl Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Zero => write!(f, "F"),
            Term::One => write!(f, "T"),
            Term::Gen(name) => write!(f, "(g {name})"),
            Term::Not(t) => write!(f, "(not {t})"),
            Term::Or(a, b) => write!(f, "(or {a} {b})"),
            Term::And(a, b) => write!(f, "(and {a} {b})"),
            Term::Nec(t) => write!(f, "(box {t})"),
            Term::Cyl(i, t) => write!(f, "(c {i} {t})"),
            Term::Subst(u, l, t) => write!(f, "(s {u} {l} {t})"),
        }
    }
}

/// Declared dimension set of each generator.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    dims: BTreeMap<String, IndexSet>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, name: impl Into<String>, dims: impl IntoIterator<Item = Index>) {
        self.dims.insert(name.into(), dims.into_iter().collect());
    }

    pub fn with(mut self, name: impl Into<String>, dims: impl IntoIterator<Item = Index>) -> Self {
        self.declare(name, dims);
        self
    }

    pub fn dims(&self, name: &str) -> Result<&IndexSet> {
        self.dims
            .get(name)
            .ok_or_else(|| Error::UndeclaredGenerator(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.dims.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.dims.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &IndexSet)> {
        self.dims.iter()
    }

    /// Merges declarations from `other`; later declarations win.
    pub fn extend(&mut self, other: &Signature) {
        for (k, v) in &other.dims {
            self.dims.insert(k.clone(), v.clone());
        }
    }

    /// Parses the line format `NAME: i j k`. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Signature> {
        let mut sig = Signature::new();
        let mut offset = 0;
        for line in text.lines() {
            let line_start = offset;
            offset += line.len() + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (name, rest) = content.split_once(':').ok_or_else(|| Error::Syntax {
                pos: line_start,
                msg: format!("expected `NAME: indices`, got `{content}`"),
            })?;
            let name = name.trim();
            if name.is_empty() || !is_name(name) {
                return Err(Error::Syntax {
                    pos: line_start,
                    msg: format!("bad generator name `{name}`"),
                });
            }
            let mut dims = IndexSet::new();
            for tok in rest.split_whitespace() {
                let i = tok.parse::<Index>().map_err(|_| Error::Syntax {
                    pos: line_start,
                    msg: format!("malformed index `{tok}`"),
                })?;
                dims.insert(i);
            }
            sig.dims.insert(name.to_string(), dims);
        }
        Ok(sig)
    }

    /// Declares every generator of `t` that is not yet declared with an empty dimension set.
    pub fn declare_missing_as_nullary(&mut self, t: &Term) {
        for g in t.generators() {
            self.dims.entry(g).or_default();
        }
    }

    /// Largest index written in `t` or in the dimension sets of its generators, plus one.
    pub fn required_width(&self, t: &Term) -> Result<usize> {
        let mut max = t.written_indices().into_iter().max().map(|i| i + 1).unwrap_or(0);
        for g in t.generators() {
            if let Some(m) = self.dims(&g)?.iter().max() {
                max = max.max(m + 1);
            }
        }
        Ok(max)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, dims) in &self.dims {
            write!(f, "{name}:")?;
            for i in dims {
                write!(f, " {i}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn is_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| !c.is_whitespace() && c != '(' && c != ')' && c != ':' && c != '#')
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(text: &str) -> Vec<(usize, Tok<'_>)> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == '(' {
            out.push((i, Tok::Open));
            i += 1;
        } else if c == ')' {
            out.push((i, Tok::Close));
            i += 1;
        } else {
            let start = i;
            while i < bytes.len() {
                let d = bytes[i] as char;
                if d.is_ascii_whitespace() || d == '(' || d == ')' {
                    break;
                }
                i += 1;
            }
            out.push((start, Tok::Atom(&text[start..i])));
        }
    }
    out
}

struct Parser<'a, 's> {
    toks: Vec<(usize, Tok<'a>)>,
    pos: usize,
    end: usize,
    sig: &'s Signature,
}

impl<'a> Parser<'a, '_> {
    fn err<T>(&self, at: usize, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { pos: at, msg: msg.into() })
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.end)
    }

    fn next(&mut self) -> Result<(usize, Tok<'a>)> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => self.err(self.end, "unexpected end of input"),
        }
    }

    fn index(&mut self) -> Result<Index> {
        match self.next()? {
            (p, Tok::Atom(s)) => s
                .parse::<Index>()
                .or_else(|_| self.err(p, format!("malformed or negative index `{s}`"))),
            (p, _) => self.err(p, "expected an index"),
        }
    }

    fn close(&mut self) -> Result<()> {
        match self.next()? {
            (_, Tok::Close) => Ok(()),
            (p, _) => self.err(p, "expected `)`"),
        }
    }

    fn term(&mut self) -> Result<Term> {
        let (p, tok) = self.next()?;
        match tok {
            Tok::Atom("T") => Ok(Term::One),
            Tok::Atom("F") => Ok(Term::Zero),
            Tok::Atom(a) => self.err(p, format!("unexpected atom `{a}`")),
            Tok::Close => self.err(p, "unexpected `)`"),
            Tok::Open => {
                let (hp, head) = self.next()?;
                let Tok::Atom(head) = head else {
                    return self.err(hp, "expected an operator");
                };
                let t = match head {
                    "g" => match self.next()? {
                        (np, Tok::Atom(name)) => {
                            if !self.sig.contains(name) {
                                return Err(Error::UndeclaredGenerator(name.to_string()));
                            }
                            let _ = np;
                            Term::gen(name)
                        }
                        (np, _) => return self.err(np, "expected a generator name"),
                    },
                    "not" => Term::not(self.term()?),
                    "box" => Term::nec(self.term()?),
                    "dia" => Term::dia(self.term()?),
                    "or" => {
                        let a = self.term()?;
                        Term::or(a, self.term()?)
                    }
                    "and" => {
                        let a = self.term()?;
                        Term::and(a, self.term()?)
                    }
                    "imp" => {
                        let a = self.term()?;
                        Term::imp(a, self.term()?)
                    }
                    "c" => {
                        let i = self.index()?;
                        Term::cyl(i, self.term()?)
                    }
                    "q" => {
                        let i = self.index()?;
                        Term::q(i, self.term()?)
                    }
                    "s" => {
                        let over = self.index()?;
                        let from = self.index()?;
                        Term::subst(over, from, self.term()?)
                    }
                    other => return self.err(hp, format!("unknown operator `{other}`")),
                };
                self.close()?;
                Ok(t)
            }
        }
    }
}

/// Parses one formula; every generator must be declared in `sig`.
pub fn parse(text: &str, sig: &Signature) -> Result<Term> {
    let mut p = Parser { toks: tokenize(text), pos: 0, end: text.len(), sig };
    let t = p.term()?;
    if p.pos != p.toks.len() {
        return p.err(p.here(), "trailing input after formula");
    }
    Ok(t)
}

/// Parses a formula, declaring unknown generators as nullary in `sig`.
pub fn parse_open(text: &str, sig: &mut Signature) -> Result<Term> {
    let mut relaxed = sig.clone();
    for (_, tok) in tokenize(text).windows(2).filter_map(|w| match (&w[0].1, &w[1].1) {
        (Tok::Atom("g"), Tok::Atom(n)) => Some(((), n.to_string())),
        _ => None,
    }) {
        if !relaxed.contains(&tok) {
            relaxed.declare(tok, []);
        }
    }
    let t = parse(text, &relaxed)?;
    *sig = relaxed;
    Ok(t)
}

/// Syntactic upper bound of the dimension set of `t`.
pub fn free_indices(t: &Term, sig: &Signature) -> Result<IndexSet> {
    Ok(match t {
        Term::Zero | Term::One => IndexSet::new(),
        Term::Gen(name) => sig.dims(name)?.clone(),
        Term::Not(x) | Term::Nec(x) => free_indices(x, sig)?,
        Term::Or(a, b) | Term::And(a, b) => {
            let mut s = free_indices(a, sig)?;
            s.extend(free_indices(b, sig)?);
            s
        }
        Term::Cyl(i, x) => {
            let mut s = free_indices(x, sig)?;
            s.remove(i);
            s
        }
        Term::Subst(u, l, x) => {
            let mut s = free_indices(x, sig)?;
            if s.remove(u) {
                s.insert(*l);
            }
            s
        }
    })
}

/// Whether `t` lies in the neat reduct below `cutoff`.
pub fn in_neat_reduct(t: &Term, cutoff: usize, sig: &Signature) -> Result<bool> {
    Ok(free_indices(t, sig)?.iter().all(|&i| i < cutoff))
}

/// Unbounded supply of indices not used elsewhere.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSupply {
    next: Index,
    reserved: IndexSet,
    issued: Vec<Index>,
}

impl IndexSupply {
    pub fn new(start: Index) -> Self {
        IndexSupply { next: start, ..Default::default() }
    }

    pub fn reserve(&mut self, indices: impl IntoIterator<Item = Index>) {
        self.reserved.extend(indices);
    }

    pub fn next_candidate(&self) -> Index {
        self.next
    }

    pub fn issued(&self) -> &[Index] {
        &self.issued
    }

    /// Largest index that is issued or reserved.
    pub fn high_water(&self) -> Option<Index> {
        let a = self.issued.iter().max().copied();
        let b = self.reserved.iter().max().copied();
        a.max(b)
    }

    /// Smallest index at or above the counter avoiding `avoid` and every reserved index.
    pub fn fresh(&mut self, avoid: &IndexSet) -> Index {
        let mut i = self.next;
        while avoid.contains(&i) || self.reserved.contains(&i) {
            i += 1;
        }
        self.next = i + 1;
        self.issued.push(i);
        i
    }
}

/// Free function form of [`IndexSupply::fresh`].
pub fn fresh_index(supply: &mut IndexSupply, avoid: &IndexSet) -> Index {
    supply.fresh(avoid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig() -> Signature {
        Signature::new().with("p", [0, 1]).with("q", [0, 3])
    }

    fn set(v: &[usize]) -> IndexSet {
        v.iter().copied().collect()
    }

    #[test]
    fn parses_constructors_and_sugar() {
        let s = sig();
        assert_eq!(parse("(s 1 0 (g p))", &s).unwrap(), Term::subst(1, 0, Term::gen("p")));
        assert_eq!(
            parse("(dia (g p))", &s).unwrap(),
            Term::not(Term::nec(Term::not(Term::gen("p"))))
        );
        assert_eq!(
            parse("(q 0 (g p))", &s).unwrap(),
            Term::not(Term::cyl(0, Term::not(Term::gen("p"))))
        );
        assert_eq!(
            parse(" ( imp T\n F ) ", &s).unwrap(),
            Term::or(Term::not(Term::One), Term::Zero)
        );
    }

    #[test]
    fn parse_errors() {
        let s = sig();
        assert!(matches!(parse("(g zz)", &s), Err(Error::UndeclaredGenerator(_))));
        assert!(matches!(parse("(c -1 (g p))", &s), Err(Error::Syntax { pos: 3, .. })));
        assert!(matches!(parse("(c x (g p))", &s), Err(Error::Syntax { .. })));
        assert!(matches!(parse("(not T", &s), Err(Error::Syntax { pos: 6, .. })));
        assert!(matches!(parse("T T", &s), Err(Error::Syntax { pos: 2, .. })));
        assert!(matches!(parse("(frob T)", &s), Err(Error::Syntax { .. })));
    }

    #[test]
    fn free_index_examples() {
        let s = sig();
        assert_eq!(free_indices(&Term::cyl(0, Term::gen("p")), &s).unwrap(), set(&[1]));
        assert_eq!(free_indices(&Term::subst(1, 2, Term::gen("p")), &s).unwrap(), set(&[0, 2]));
        assert_eq!(free_indices(&Term::gen("p"), &s).unwrap(), set(&[0, 1]));
        assert_eq!(free_indices(&Term::subst(5, 2, Term::gen("p")), &s).unwrap(), set(&[0, 1]));
        assert!(free_indices(&Term::gen("nope"), &s).is_err());
    }

    #[test]
    fn neat_reduct_examples() {
        let s = sig();
        assert!(in_neat_reduct(&Term::cyl(3, Term::gen("q")), 3, &s).unwrap());
        assert!(!in_neat_reduct(&Term::gen("q"), 1, &s).unwrap());
        assert!(in_neat_reduct(&Term::One, 0, &s).unwrap());
    }

    #[test]
    fn fresh_index_examples() {
        let mut sup = IndexSupply::new(5);
        assert_eq!(sup.fresh(&set(&[5, 6])), 7);
        let mut sup = IndexSupply::new(0);
        assert_eq!(sup.fresh(&IndexSet::new()), 0);
        let a = sup.fresh(&IndexSet::new());
        let b = sup.fresh(&IndexSet::new());
        assert!(a < b);
        let mut sup = IndexSupply::new(0);
        sup.reserve([0, 1, 2]);
        assert_eq!(sup.fresh(&set(&[3])), 4);
    }

    #[test]
    fn signature_file() {
        let s = Signature::parse("# gens\np: 0 1\n\nq:\n").unwrap();
        assert_eq!(s.dims("p").unwrap(), &set(&[0, 1]));
        assert!(s.dims("q").unwrap().is_empty());
        assert!(Signature::parse("p 0 1").is_err());
        assert!(Signature::parse("p: a").is_err());
        assert_eq!(Signature::parse(&s.to_string()).unwrap(), s);
    }

    #[test]
    fn parse_open_declares() {
        let mut s = Signature::new();
        let t = parse_open("(and (g a) (g b))", &mut s).unwrap();
        assert_eq!(t, Term::and(Term::gen("a"), Term::gen("b")));
        assert!(s.contains("a") && s.contains("b"));
    }
}
