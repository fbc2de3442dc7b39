//! Finite transformations of the index set and the semigroup richness checks.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::syntax::{free_indices, Index, IndexSet, Signature, Term};

/// Endomap of the naturals that is the identity outside a finite set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FiniteTransformation {
    map: BTreeMap<Index, Index>,
}

impl FiniteTransformation {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Builds from pairs; identity pairs are dropped, later pairs win.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Index, Index)>) -> Self {
        let mut map = BTreeMap::new();
        for (i, j) in pairs {
            if i == j {
                map.remove(&i);
            } else {
                map.insert(i, j);
            }
        }
        FiniteTransformation { map }
    }

    /// `[i|j]`
    pub fn replacement(i: Index, j: Index) -> Self {
        Self::from_pairs([(i, j)])
    }

    /// `[i,j]`
    pub fn transposition(i: Index, j: Index) -> Self {
        Self::from_pairs([(i, j), (j, i)])
    }

    pub fn apply(&self, i: Index) -> Index {
        self.map.get(&i).copied().unwrap_or(i)
    }

    pub fn support(&self) -> IndexSet {
        self.map.keys().copied().collect()
    }

    pub fn is_identity(&self) -> bool {
        self.map.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Index, Index)> + '_ {
        self.map.iter().map(|(a, b)| (*a, *b))
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &FiniteTransformation) -> FiniteTransformation {
        let dom: BTreeSet<Index> = self.map.keys().chain(inner.map.keys()).copied().collect();
        Self::from_pairs(dom.into_iter().map(|i| (i, self.apply(inner.apply(i)))))
    }

    /// `self[i|j]`
    pub fn update(&self, i: Index, j: Index) -> FiniteTransformation {
        let mut out = self.clone();
        if i == j {
            out.map.remove(&i);
        } else {
            out.map.insert(i, j);
        }
        out
    }

    pub fn restrict_eq(&self, other: &FiniteTransformation, on: &IndexSet) -> bool {
        on.iter().all(|&i| self.apply(i) == other.apply(i))
    }
}

impl fmt::Display for FiniteTransformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.map.is_empty() {
            return write!(f, "Id");
        }
        write!(f, "[")?;
        for (k, (i, j)) in self.map.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{i}|{j}")?;
        }
        write!(f, "]")
    }
}

#[derive(Serialize, Deserialize)]
struct TransformationFile {
    map: Vec<[Index; 2]>,
}

impl Serialize for FiniteTransformation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TransformationFile { map: self.pairs().map(|(a, b)| [a, b]).collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FiniteTransformation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = TransformationFile::deserialize(d)?;
        Ok(FiniteTransformation::from_pairs(f.map.into_iter().map(|[a, b]| (a, b))))
    }
}

pub fn compose(sigma: &FiniteTransformation, tau: &FiniteTransformation) -> FiniteTransformation {
    sigma.compose(tau)
}

pub fn update(tau: &FiniteTransformation, i: Index, j: Index) -> FiniteTransformation {
    tau.update(i, j)
}

/// A single substitution step `(over, from)`.
pub type SubstStep = (Index, Index);

/// Encodes `s_τ` as substitution steps through the first `k` indices outside
/// `blocked`, where `k = |support(τ)|`. Steps are listed outermost first.
pub fn decompose_s_tau(tau: &FiniteTransformation, blocked: &IndexSet) -> Vec<SubstStep> {
    let pairs: Vec<(Index, Index)> = tau.pairs().collect();
    let k = pairs.len();
    let mut blocked = blocked.clone();
    for (u, v) in &pairs {
        blocked.insert(*u);
        blocked.insert(*v);
    }
    let fresh: Vec<Index> = (0..).filter(|i| !blocked.contains(i)).take(k).collect();
    let mut steps = Vec::with_capacity(2 * k);
    for (n, (_, v)) in pairs.iter().enumerate() {
        steps.push((fresh[n], *v));
    }
    for (n, (u, _)) in pairs.iter().enumerate() {
        steps.push((*u, fresh[n]));
    }
    steps
}

/// Wraps `t` in substitution steps, the first step outermost.
pub fn apply_steps(steps: &[SubstStep], t: Term) -> Term {
    steps.iter().rev().fold(t, |acc, &(over, from)| Term::subst(over, from, acc))
}

/// `s_τ t`, blocking the free indices of `t` together with the support and range of `τ`.
pub fn apply_s_tau(tau: &FiniteTransformation, t: &Term, sig: &Signature) -> Result<Term> {
    let blocked = free_indices(t, sig)?;
    Ok(apply_steps(&decompose_s_tau(tau, &blocked), t.clone()))
}

/// Built-in total maps on the naturals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    Id,
    Suc,
    Pred,
    Rep(Index, Index),
    Swap(Index, Index),
}

impl Rule {
    pub fn apply(self, x: Index) -> Index {
        match self {
            Rule::Id => x,
            Rule::Suc => x + 1,
            Rule::Pred => x.saturating_sub(1),
            Rule::Rep(i, j) => {
                if x == i {
                    j
                } else {
                    x
                }
            }
            Rule::Swap(i, j) => {
                if x == i {
                    j
                } else if x == j {
                    i
                } else {
                    x
                }
            }
        }
    }

    fn max_index(self) -> Index {
        match self {
            Rule::Id | Rule::Suc | Rule::Pred => 0,
            Rule::Rep(i, j) | Rule::Swap(i, j) => i.max(j),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Id => write!(f, "id"),
            Rule::Suc => write!(f, "suc"),
            Rule::Pred => write!(f, "pred"),
            Rule::Rep(i, j) => write!(f, "rep {i} {j}"),
            Rule::Swap(i, j) => write!(f, "swap {i} {j}"),
        }
    }
}

/// Composition of rules, applied right to left.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<Rule>);

impl Word {
    pub fn apply(&self, x: Index) -> Index {
        self.0.iter().rev().fold(x, |acc, r| r.apply(acc))
    }

    pub fn pow(rule: Rule, n: usize) -> Word {
        Word(vec![rule; n])
    }

    /// `self ∘ other`
    pub fn then_after(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend(other.0.iter().copied());
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "id");
        }
        let parts: Vec<String> = self.0.iter().map(|r| r.to_string()).collect();
        write!(f, "{}", parts.join(" ∘ "))
    }
}

/// Generators plus the bounds of the finite fragment to explore.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemigroupSpec {
    pub generators: Vec<Rule>,
    pub depth: usize,
    pub window: usize,
}

impl SemigroupSpec {
    /// Parses lines `suc`, `pred`, `id`, `rep I J`, `swap I J`, `reps N`
    /// (all `rep i j` with `i,j < N`), `swaps N`, `window N`, `depth N`.
    pub fn parse(text: &str) -> Result<SemigroupSpec> {
        let mut spec = SemigroupSpec { generators: Vec::new(), depth: 3, window: 8 };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let num = |k: usize| -> Result<usize> {
                toks.get(k).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Syntax {
                    pos: lineno,
                    msg: format!("expected a number in `{line}`"),
                })
            };
            match toks[0] {
                "id" => spec.generators.push(Rule::Id),
                "suc" => spec.generators.push(Rule::Suc),
                "pred" => spec.generators.push(Rule::Pred),
                "rep" => spec.generators.push(Rule::Rep(num(1)?, num(2)?)),
                "swap" => spec.generators.push(Rule::Swap(num(1)?, num(2)?)),
                "reps" => {
                    let n = num(1)?;
                    for i in 0..n {
                        for j in 0..n {
                            if i != j {
                                spec.generators.push(Rule::Rep(i, j));
                            }
                        }
                    }
                }
                "swaps" => {
                    let n = num(1)?;
                    for i in 0..n {
                        for j in i + 1..n {
                            spec.generators.push(Rule::Swap(i, j));
                        }
                    }
                }
                "window" => spec.window = num(1)?,
                "depth" => spec.depth = num(1)?,
                other => {
                    return Err(Error::Syntax { pos: lineno, msg: format!("unknown rule `{other}`") })
                }
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Pass { witness: Option<String> },
    /// `exhaustive` is true when the generated semigroup was fully enumerated.
    Fail { counterexample: String, exhaustive: bool },
    InconclusiveAtBound { missing: String },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }
    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fail { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RichReport {
    pub window: usize,
    pub depth: usize,
    pub elements: usize,
    pub closed: bool,
    pub update_closure: Verdict,
    pub split_pair: Verdict,
    pub conjugation: Verdict,
    pub notes: Vec<String>,
}

/// Values of a word on `0..ext`; two words with equal signatures are merged.
type Signature_ = Vec<Index>;

struct Fragment {
    ext: usize,
    words: Vec<Word>,
    index: HashMap<Signature_, usize>,
    closed: bool,
}

impl Fragment {
    fn enumerate(gens: &[Rule], depth: usize, ext: usize) -> Fragment {
        let sig = |w: &Word| -> Signature_ { (0..ext).map(|i| w.apply(i)).collect() };
        let mut words = Vec::new();
        let mut index = HashMap::new();
        let mut queue = VecDeque::new();
        for g in gens {
            let w = Word(vec![*g]);
            let s = sig(&w);
            if let std::collections::hash_map::Entry::Vacant(e) = index.entry(s) {
                e.insert(words.len());
                words.push(w.clone());
                queue.push_back((w, 1));
            }
        }
        let mut closed = true;
        while let Some((w, d)) = queue.pop_front() {
            for g in gens {
                let nw = Word(vec![*g]).then_after(&w);
                let s = sig(&nw);
                if index.contains_key(&s) {
                    continue;
                }
                if d >= depth {
                    closed = false;
                    continue;
                }
                index.insert(s, words.len());
                words.push(nw.clone());
                queue.push_back((nw, d + 1));
            }
        }
        Fragment { ext, words, index, closed }
    }

    fn values(&self, w: &Word) -> Signature_ {
        (0..self.ext).map(|i| w.apply(i)).collect()
    }

    fn contains(&self, values: &Signature_) -> bool {
        self.index.contains_key(values)
    }
}

/// Indices below `window` missed by the range of `w` over all naturals.
fn range_gaps(w: &Word, window: usize, ext: usize) -> IndexSet {
    let hit: IndexSet = (0..ext).map(|x| w.apply(x)).filter(|&y| y < window).collect();
    (0..window).filter(|i| !hit.contains(i)).collect()
}

fn extent(gens: &[Rule], window: usize, depth: usize) -> usize {
    let m = gens.iter().map(|r| r.max_index()).max().unwrap_or(0);
    window.max(m + 1) + depth + 2
}

/// Checks the three richness conditions on the depth-bounded fragment.
///
/// Condition (3) reads `f[(α∖Rg σ)|Id]` as resetting every index outside the
/// range of `σ` to itself.
pub fn rich_check(spec: &SemigroupSpec) -> Result<RichReport> {
    if spec.window == 0 || spec.depth == 0 {
        return Err(Error::InvalidBounds("window and depth must be positive".into()));
    }
    if let Some(r) = spec.generators.iter().find(|r| r.max_index() >= spec.window) {
        return Err(Error::InvalidBounds(format!("rule `{r}` leaves window {}", spec.window)));
    }
    // Every rule moves an index by at most one step once it exceeds the rule
    // indices, so values beyond `ext` can never land back inside the window.
    let ext = extent(&spec.generators, spec.window, spec.depth);
    let frag = Fragment::enumerate(&spec.generators, spec.depth, ext);
    let mut notes = vec![
        "condition (3) reads (σ∘τ∘π)[(α∖Rg σ)|Id] as resetting indices outside Rg σ to the identity"
            .to_string(),
    ];

    // (1) closure under point updates
    let mut missing = None;
    'outer: for w in &frag.words {
        let vals = frag.values(w);
        for i in 0..spec.window {
            for j in 0..spec.window {
                let mut v = vals.clone();
                v[i] = j;
                if !frag.contains(&v) {
                    missing = Some(format!("({w})[{i}|{j}]"));
                    break 'outer;
                }
            }
        }
    }
    let update_closure = match missing {
        None => Verdict::Pass { witness: None },
        Some(m) if frag.closed => Verdict::Fail { counterexample: m, exhaustive: true },
        Some(m) => Verdict::InconclusiveAtBound { missing: m },
    };

    // (2) split pair: π∘σ = Id with Rg σ ≠ α
    let mut split = None;
    for s in &frag.words {
        let gaps = range_gaps(s, spec.window, ext);
        if gaps.is_empty() {
            continue;
        }
        if let Some(p) = frag.words.iter().find(|p| (0..ext).all(|i| p.apply(s.apply(i)) == i)) {
            split = Some((s.clone(), p.clone(), gaps));
            break;
        }
    }
    let split_pair = match &split {
        Some((s, p, gaps)) => Verdict::Pass {
            witness: Some(format!("σ = {s}, π = {p}, missing from range: {gaps:?}")),
        },
        None => {
            if !frag.closed {
                notes.push("no split pair within the depth bound".into());
            }
            Verdict::Fail {
                counterexample: "no σ, π with π∘σ = Id and Rg σ ≠ α".into(),
                exhaustive: frag.closed,
            }
        }
    };

    // (3) conjugation closure, relative to the split pair found for (2)
    let conjugation = match &split {
        None => Verdict::InconclusiveAtBound { missing: "no split pair to conjugate with".into() },
        Some((s, p, _)) => {
            let in_range: Vec<bool> = {
                let gaps = range_gaps(s, ext, ext + spec.depth + 2);
                (0..ext).map(|i| !gaps.contains(&i)).collect()
            };
            let mut missing = None;
            for t in &frag.words {
                let conj = s.then_after(t).then_after(p);
                let vals: Vec<Index> =
                    (0..ext).map(|i| if in_range[i] { conj.apply(i) } else { i }).collect();
                if !frag.contains(&vals) {
                    missing = Some(format!("(σ∘({t})∘π) reset outside Rg σ"));
                    break;
                }
            }
            match missing {
                None => Verdict::Pass { witness: None },
                Some(m) if frag.closed => Verdict::Fail { counterexample: m, exhaustive: true },
                Some(m) => Verdict::InconclusiveAtBound { missing: m },
            }
        }
    };

    Ok(RichReport {
        window: spec.window,
        depth: spec.depth,
        elements: frag.words.len(),
        closed: frag.closed,
        update_closure,
        split_pair,
        conjugation,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrongRow {
    pub n: usize,
    pub support: Vec<Index>,
    pub range_complement: Vec<Index>,
    pub support_bounded: bool,
    pub support_outside_range: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrongReport {
    pub sigma: Rule,
    pub pi: Rule,
    pub window: usize,
    pub rows: Vec<StrongRow>,
    pub pass: bool,
}

/// Checks, for each `1 ≤ n ≤ n_max`, that `supp(σⁿ∘πⁿ)` is a proper part of
/// the window and lies outside `Rng(σⁿ)`.
pub fn strongly_rich_check(sigma: Rule, pi: Rule, n_max: usize, window: usize) -> StrongReport {
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let sn = Word::pow(sigma, n);
        let h = sn.then_after(&Word::pow(pi, n));
        let support: Vec<Index> = (0..window).filter(|&i| h.apply(i) != i).collect();
        let ext = extent(&[sigma, pi], window, n);
        let gaps = range_gaps(&sn, window, ext);
        let support_bounded = support.len() < window;
        let support_outside_range = support.iter().all(|i| gaps.contains(i));
        rows.push(StrongRow {
            n,
            support,
            range_complement: gaps.into_iter().collect(),
            support_bounded,
            support_outside_range,
        });
    }
    let pass = rows.iter().all(|r| r.support_bounded && r.support_outside_range);
    StrongReport { sigma, pi, window, rows, pass }
}
