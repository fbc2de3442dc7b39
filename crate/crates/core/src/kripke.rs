//! Finite Kripke systems and the concrete algebra of world-indexed truth tables.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::syntax::{Index, Signature, Term};

/// Worlds, accessibility, and per-world domains.
///
/// Worlds and domain elements are addressed by position; labels are kept for I/O.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KripkeSystem {
    pub worlds: Vec<String>,
    pub edges: BTreeSet<(usize, usize)>,
    pub domain: Vec<String>,
    pub world_domain: Vec<BTreeSet<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    EmptyDomain { world: String },
    DomainShrink { from: String, to: String },
    UnknownElement { world: String, element: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyDomain { world } => write!(f, "empty domain at {world}"),
            Violation::DomainShrink { from, to } => write!(f, "domain shrinks along {from} -> {to}"),
            Violation::UnknownElement { world, element } => {
                write!(f, "world {world} uses unknown element #{element}")
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SystemFile {
    worlds: Vec<String>,
    edges: Vec<[String; 2]>,
    #[serde(default)]
    domain: Vec<String>,
    #[serde(default)]
    world_domain: BTreeMap<String, Vec<String>>,
}

impl KripkeSystem {
    /// One domain element shared by every world.
    pub fn frame(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        KripkeSystem {
            worlds: (0..n).map(|i| format!("w{i}")).collect(),
            edges: edges.into_iter().collect(),
            domain: vec!["d0".into()],
            world_domain: vec![[0].into_iter().collect(); n],
        }
    }

    /// Constant domain of size `m` at every world.
    pub fn constant(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, m: usize) -> Self {
        KripkeSystem {
            worlds: (0..n).map(|i| format!("w{i}")).collect(),
            edges: edges.into_iter().collect(),
            domain: (0..m).map(|i| format!("d{i}")).collect(),
            world_domain: vec![(0..m).collect(); n],
        }
    }

    pub fn num_worlds(&self) -> usize {
        self.worlds.len()
    }

    pub fn successors(&self, w: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((w, 0)..(w + 1, 0)).map(|&(_, v)| v)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (w, d) in self.world_domain.iter().enumerate() {
            if d.is_empty() {
                out.push(Violation::EmptyDomain { world: self.worlds[w].clone() });
            }
            for &e in d {
                if e >= self.domain.len() {
                    out.push(Violation::UnknownElement { world: self.worlds[w].clone(), element: e });
                }
            }
        }
        for &(a, b) in &self.edges {
            if !self.world_domain[a].is_subset(&self.world_domain[b]) {
                out.push(Violation::DomainShrink {
                    from: self.worlds[a].clone(),
                    to: self.worlds[b].clone(),
                });
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SystemFile {
            worlds: self.worlds.clone(),
            edges: self
                .edges
                .iter()
                .map(|&(a, b)| [self.worlds[a].clone(), self.worlds[b].clone()])
                .collect(),
            domain: self.domain.clone(),
            world_domain: self
                .world_domain
                .iter()
                .enumerate()
                .map(|(w, d)| {
                    (self.worlds[w].clone(), d.iter().map(|&e| self.domain[e].clone()).collect())
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Reads the JSON system format. A missing domain means a single shared element.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: SystemFile = serde_json::from_str(text)?;
        let widx: HashMap<&str, usize> =
            file.worlds.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let lookup = |w: &str| {
            widx.get(w).copied().ok_or_else(|| Error::InvalidSystem(format!("unknown world `{w}`")))
        };
        let mut edges = BTreeSet::new();
        for [a, b] in &file.edges {
            edges.insert((lookup(a)?, lookup(b)?));
        }
        let (domain, world_domain) = if file.domain.is_empty() {
            (vec!["d0".to_string()], vec![[0].into_iter().collect(); file.worlds.len()])
        } else {
            let didx: HashMap<&str, usize> =
                file.domain.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
            let mut wd = vec![BTreeSet::new(); file.worlds.len()];
            for (w, elems) in &file.world_domain {
                let wi = lookup(w)?;
                for e in elems {
                    let ei = didx.get(e.as_str()).copied().ok_or_else(|| {
                        Error::InvalidSystem(format!("unknown domain element `{e}`"))
                    })?;
                    wd[wi].insert(ei);
                }
            }
            (file.domain.clone(), wd)
        };
        Ok(KripkeSystem { worlds: file.worlds, edges, domain, world_domain })
    }
}

pub fn validate_system(k: &KripkeSystem) -> Vec<Violation> {
    k.validate()
}

/// Tuple coding for one system at a fixed width.
#[derive(Debug, Clone)]
pub struct Space {
    pub m: usize,
    pub width: usize,
    pow: Vec<usize>,
    pub size: usize,
    pub valid: Vec<Vec<usize>>,
    succ: Vec<Vec<usize>>,
}

impl Space {
    pub fn new(k: &KripkeSystem, width: usize) -> Self {
        let m = k.domain.len().max(1);
        let pow: Vec<usize> = (0..=width).map(|i| m.pow(i as u32)).collect();
        let size = pow[width];
        let valid = k
            .world_domain
            .iter()
            .map(|d| {
                (0..size)
                    .filter(|&code| (0..width).all(|c| d.contains(&((code / pow[c]) % m))))
                    .collect()
            })
            .collect();
        let succ = (0..k.num_worlds()).map(|w| k.successors(w).collect()).collect();
        Space { m, width, pow, size, valid, succ }
    }

    #[inline]
    pub fn coord(&self, code: usize, c: usize) -> usize {
        (code / self.pow[c]) % self.m
    }

    #[inline]
    pub fn set_coord(&self, code: usize, c: usize, v: usize) -> usize {
        code - self.coord(code, c) * self.pow[c] + v * self.pow[c]
    }

    pub fn encode(&self, tuple: &[usize]) -> usize {
        tuple.iter().enumerate().map(|(c, &v)| v * self.pow[c]).sum()
    }

    pub fn decode(&self, code: usize) -> Vec<usize> {
        (0..self.width).map(|c| self.coord(code, c)).collect()
    }
}

/// A family of per-world truth tables over assignment tuples.
///
/// Entries for tuples outside a world's domain are kept false.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlgebraElement {
    pub width: usize,
    pub tables: Vec<Vec<bool>>,
}

impl AlgebraElement {
    pub fn get(&self, sp: &Space, w: usize, tuple: &[usize]) -> bool {
        self.tables[w][sp.encode(tuple)]
    }

    fn same_shape(&self, other: &AlgebraElement) -> Result<()> {
        if self.width != other.width
            || self.tables.len() != other.tables.len()
            || self.tables.iter().zip(&other.tables).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::ShapeMismatch("elements come from different systems or widths".into()));
        }
        Ok(())
    }
}

pub type Valuation = BTreeMap<String, AlgebraElement>;

/// The concrete algebra over one Kripke system at a fixed width.
#[derive(Debug, Clone)]
pub struct ConcreteAlgebra<'k> {
    pub system: &'k KripkeSystem,
    pub space: Space,
}

impl<'k> ConcreteAlgebra<'k> {
    pub fn new(system: &'k KripkeSystem, width: usize) -> Result<Self> {
        let v = system.validate();
        if !v.is_empty() {
            let msgs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            return Err(Error::InvalidSystem(msgs.join("; ")));
        }
        Ok(ConcreteAlgebra { system, space: Space::new(system, width) })
    }

    pub fn width(&self) -> usize {
        self.space.width
    }

    fn build(&self, mut f: impl FnMut(usize, usize) -> bool) -> AlgebraElement {
        let sp = &self.space;
        let tables = sp
            .valid
            .iter()
            .enumerate()
            .map(|(w, codes)| {
                let mut t = vec![false; sp.size];
                for &c in codes {
                    t[c] = f(w, c);
                }
                t
            })
            .collect();
        AlgebraElement { width: sp.width, tables }
    }

    pub fn zero(&self) -> AlgebraElement {
        self.build(|_, _| false)
    }

    pub fn one(&self) -> AlgebraElement {
        self.build(|_, _| true)
    }

    pub fn from_fn(&self, mut f: impl FnMut(usize, &[usize]) -> bool) -> AlgebraElement {
        let sp = self.space.clone();
        self.build(|w, c| f(w, &sp.decode(c)))
    }

    pub fn not(&self, e: &AlgebraElement) -> AlgebraElement {
        self.build(|w, c| !e.tables[w][c])
    }

    pub fn or(&self, a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
        self.build(|w, c| a.tables[w][c] || b.tables[w][c])
    }

    pub fn and(&self, a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
        self.build(|w, c| a.tables[w][c] && b.tables[w][c])
    }

    /// `□`: true at `(w, x)` iff true at `(w', x)` for every successor `w'`.
    pub fn nec(&self, e: &AlgebraElement) -> AlgebraElement {
        let succ = &self.space.succ;
        self.build(|w, c| succ[w].iter().all(|&v| e.tables[v][c]))
    }

    /// Join over all tuples differing from `x` at most at coordinate `i`.
    pub fn cyl(&self, i: Index, e: &AlgebraElement) -> AlgebraElement {
        let sp = &self.space;
        let dom = &self.system.world_domain;
        self.build(|w, c| dom[w].iter().any(|&d| e.tables[w][sp.set_coord(c, i, d)]))
    }

    /// Reads `e` at `x` with coordinate `over` overwritten by `x[from]`.
    pub fn subst(&self, over: Index, from: Index, e: &AlgebraElement) -> AlgebraElement {
        let sp = &self.space;
        self.build(|w, c| e.tables[w][sp.set_coord(c, over, sp.coord(c, from))])
    }

    pub fn leq(&self, a: &AlgebraElement, b: &AlgebraElement) -> Result<bool> {
        leq(a, b)
    }

    /// A uniformly random family (not necessarily monotone).
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        self.build(|_, _| rng.gen_bool(0.5))
    }

    /// A random element depending only on the coordinates in `dims`.
    pub fn random_restricted<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        dims: &BTreeSet<Index>,
    ) -> AlgebraElement {
        self.restricted_from_bits(dims, |_| rng.gen_bool(0.5))
    }

    /// Element depending only on `dims`. Bit `k` gives the value of the
    /// `k`-th (world, projected tuple over that world's domain) pair, worlds
    /// in order and projections in increasing code order.
    pub fn restricted_from_bits(
        &self,
        dims: &BTreeSet<Index>,
        mut bit: impl FnMut(usize) -> bool,
    ) -> AlgebraElement {
        let sp = &self.space;
        let dims: Vec<Index> = dims.iter().copied().collect();
        let psize = sp.m.pow(dims.len() as u32);
        let mut next = 0usize;
        let proj_tables: Vec<Vec<bool>> = self
            .system
            .world_domain
            .iter()
            .map(|d| {
                (0..psize)
                    .map(|pc| {
                        let inside = (0..dims.len())
                            .all(|k| d.contains(&((pc / sp.m.pow(k as u32)) % sp.m)));
                        if inside {
                            next += 1;
                            bit(next - 1)
                        } else {
                            false
                        }
                    })
                    .collect()
            })
            .collect();
        self.build(|w, c| {
            let mut pc = 0;
            let mut mul = 1;
            for &i in &dims {
                pc += sp.coord(c, i) * mul;
                mul *= sp.m;
            }
            proj_tables[w][pc]
        })
    }

    /// Number of independent bits of an element restricted to `dims`.
    pub fn restricted_bits(&self, dims: &BTreeSet<Index>) -> u32 {
        self.system
            .world_domain
            .iter()
            .map(|d| (d.len() as u32).saturating_pow(dims.len() as u32))
            .sum()
    }

    pub fn eval(&self, t: &Term, val: &Valuation) -> Result<AlgebraElement> {
        let mut memo = HashMap::new();
        self.eval_memo(t, val, &mut memo)
    }

    fn eval_memo(
        &self,
        t: &Term,
        val: &Valuation,
        memo: &mut HashMap<*const Term, AlgebraElement>,
    ) -> Result<AlgebraElement> {
        let key = t as *const Term;
        if let Some(e) = memo.get(&key) {
            return Ok(e.clone());
        }
        let w = self.width();
        let check = |i: Index| -> Result<()> {
            if i >= w {
                Err(Error::WidthTooSmall { needed: i + 1, width: w })
            } else {
                Ok(())
            }
        };
        let e = match t {
            Term::Zero => self.zero(),
            Term::One => self.one(),
            Term::Gen(name) => {
                let e = val.get(name).ok_or_else(|| Error::UndeclaredGenerator(name.clone()))?;
                if e.width != w || e.tables.len() != self.system.num_worlds() {
                    return Err(Error::ShapeMismatch(format!("valuation of `{name}`")));
                }
                e.clone()
            }
            Term::Not(x) => {
                let a = self.eval_memo(x, val, memo)?;
                self.not(&a)
            }
            Term::Or(x, y) => {
                let a = self.eval_memo(x, val, memo)?;
                let b = self.eval_memo(y, val, memo)?;
                self.or(&a, &b)
            }
            Term::And(x, y) => {
                let a = self.eval_memo(x, val, memo)?;
                let b = self.eval_memo(y, val, memo)?;
                self.and(&a, &b)
            }
            Term::Nec(x) => {
                let a = self.eval_memo(x, val, memo)?;
                self.nec(&a)
            }
            Term::Cyl(i, x) => {
                check(*i)?;
                let a = self.eval_memo(x, val, memo)?;
                self.cyl(*i, &a)
            }
            Term::Subst(u, l, x) => {
                check(*u)?;
                check(*l)?;
                let a = self.eval_memo(x, val, memo)?;
                self.subst(*u, *l, &a)
            }
        };
        memo.insert(key, e.clone());
        Ok(e)
    }

    /// Whether truth persists along accessibility.
    pub fn monotone(&self, e: &AlgebraElement) -> bool {
        monotone_check(self.system, e)
    }
}

/// All length-`n` tuples over `elems`, first coordinate varying slowest.
pub fn product(elems: &[usize], n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * elems.len());
        for t in &out {
            for &e in elems {
                let mut t2 = t.clone();
                t2.push(e);
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

pub fn eval(t: &Term, k: &KripkeSystem, val: &Valuation, width: usize) -> Result<AlgebraElement> {
    ConcreteAlgebra::new(k, width)?.eval(t, val)
}

pub fn leq(a: &AlgebraElement, b: &AlgebraElement) -> Result<bool> {
    a.same_shape(b)?;
    Ok(a.tables.iter().zip(&b.tables).all(|(x, y)| x.iter().zip(y).all(|(p, q)| !p || *q)))
}

/// `wRw' ⇒ e_w ≤ e_w'` on tuples over `D_w`.
pub fn monotone_check(k: &KripkeSystem, e: &AlgebraElement) -> bool {
    let sp = Space::new(k, e.width);
    k.edges
        .iter()
        .all(|&(a, b)| sp.valid[a].iter().all(|&c| !e.tables[a][c] || e.tables[b][c]))
}

/// Random valuation respecting each generator's dimension set.
pub fn random_valuation<R: Rng + ?Sized>(
    alg: &ConcreteAlgebra<'_>,
    gens: &BTreeSet<String>,
    sig: &Signature,
    rng: &mut R,
) -> Result<Valuation> {
    let mut val = Valuation::new();
    for g in gens {
        let dims = sig.dims(g)?;
        val.insert(g.clone(), alg.random_restricted(rng, dims));
    }
    Ok(val)
}

/// Valuation file: generator → default value plus explicit entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValuationFile {
    pub width: usize,
    pub generators: BTreeMap<String, GeneratorTable>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorTable {
    pub default: bool,
    pub entries: Vec<ValuationEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValuationEntry {
    pub world: String,
    pub tuple: Vec<String>,
    pub value: bool,
}

impl ValuationFile {
    pub fn from_valuation(k: &KripkeSystem, val: &Valuation, width: usize) -> Self {
        let sp = Space::new(k, width);
        let generators = val
            .iter()
            .map(|(name, e)| {
                let mut entries = Vec::new();
                for (w, codes) in sp.valid.iter().enumerate() {
                    for &c in codes {
                        if e.tables[w][c] {
                            entries.push(ValuationEntry {
                                world: k.worlds[w].clone(),
                                tuple: sp.decode(c).iter().map(|&d| k.domain[d].clone()).collect(),
                                value: true,
                            });
                        }
                    }
                }
                (name.clone(), GeneratorTable { default: false, entries })
            })
            .collect();
        ValuationFile { width, generators }
    }

    pub fn to_valuation(&self, k: &KripkeSystem) -> Result<Valuation> {
        let alg = ConcreteAlgebra::new(k, self.width)?;
        let widx: HashMap<&str, usize> =
            k.worlds.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let didx: HashMap<&str, usize> =
            k.domain.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
        let mut val = Valuation::new();
        for (name, table) in &self.generators {
            let mut e = if table.default { alg.one() } else { alg.zero() };
            for entry in &table.entries {
                let w = *widx.get(entry.world.as_str()).ok_or_else(|| {
                    Error::InvalidSystem(format!("unknown world `{}`", entry.world))
                })?;
                if entry.tuple.len() != self.width {
                    return Err(Error::ShapeMismatch(format!("tuple width in `{name}`")));
                }
                let tuple: Vec<usize> = entry
                    .tuple
                    .iter()
                    .map(|d| {
                        didx.get(d.as_str()).copied().ok_or_else(|| {
                            Error::InvalidSystem(format!("unknown domain element `{d}`"))
                        })
                    })
                    .collect::<Result<_>>()?;
                let c = alg.space.encode(&tuple);
                if alg.space.valid[w].binary_search(&c).is_ok() {
                    e.tables[w][c] = entry.value;
                }
            }
            val.insert(name.clone(), e);
        }
        Ok(val)
    }
}

/// Frame conditions used to filter enumerated systems.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameConditions {
    pub serial: bool,
    pub reflexive: bool,
    pub transitive: bool,
}

impl FrameConditions {
    pub fn admits(&self, n: usize, edges: &BTreeSet<(usize, usize)>) -> bool {
        let has = |a: usize, b: usize| edges.contains(&(a, b));
        if self.reflexive && !(0..n).all(|w| has(w, w)) {
            return false;
        }
        if self.serial && !(0..n).all(|w| (0..n).any(|v| has(w, v))) {
            return false;
        }
        if self.transitive {
            for &(a, b) in edges {
                for c in 0..n {
                    if has(b, c) && !has(a, c) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

fn edges_from_bits(n: usize, bits: u64) -> BTreeSet<(usize, usize)> {
    let mut e = BTreeSet::new();
    for a in 0..n {
        for b in 0..n {
            if bits >> (a * n + b) & 1 == 1 {
                e.insert((a, b));
            }
        }
    }
    e
}

/// Every system with at most `max_worlds` worlds and domain size at most
/// `max_domain` whose world domains jointly cover the domain.
pub fn enumerate_systems(
    max_worlds: usize,
    max_domain: usize,
    cond: FrameConditions,
) -> Vec<KripkeSystem> {
    let mut out = Vec::new();
    for n in 1..=max_worlds {
        for bits in 0..(1u64 << (n * n)) {
            let edges = edges_from_bits(n, bits);
            if !cond.admits(n, &edges) {
                continue;
            }
            for m in 1..=max_domain {
                let full = (1usize << m) - 1;
                let masks: Vec<usize> = (1..=full).collect();
                let mut choice = vec![0usize; n];
                loop {
                    let wd: Vec<usize> = choice.iter().map(|&i| masks[i]).collect();
                    let covers = wd.iter().fold(0, |a, b| a | b) == full;
                    let mono = edges.iter().all(|&(a, b)| wd[a] & !wd[b] == 0);
                    if covers && mono {
                        out.push(KripkeSystem {
                            worlds: (0..n).map(|i| format!("w{i}")).collect(),
                            edges: edges.clone(),
                            domain: (0..m).map(|i| format!("d{i}")).collect(),
                            world_domain: wd
                                .iter()
                                .map(|&mask| (0..m).filter(|b| mask >> b & 1 == 1).collect())
                                .collect(),
                        });
                    }
                    let mut k = 0;
                    while k < n {
                        choice[k] += 1;
                        if choice[k] < masks.len() {
                            break;
                        }
                        choice[k] = 0;
                        k += 1;
                    }
                    if k == n {
                        break;
                    }
                }
            }
        }
    }
    out
}

/// A random valid system within the bounds satisfying `cond`.
pub fn random_system<R: Rng + ?Sized>(
    rng: &mut R,
    max_worlds: usize,
    max_domain: usize,
    cond: FrameConditions,
) -> KripkeSystem {
    loop {
        let n = rng.gen_range(1..=max_worlds.max(1));
        let m = rng.gen_range(1..=max_domain.max(1));
        let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        for a in 0..n {
            for b in 0..n {
                if rng.gen_bool(0.4) {
                    edges.insert((a, b));
                }
            }
        }
        if cond.reflexive {
            edges.extend((0..n).map(|w| (w, w)));
        }
        if cond.serial {
            for w in 0..n {
                if !edges.iter().any(|&(a, _)| a == w) {
                    edges.insert((w, rng.gen_range(0..n)));
                }
            }
        }
        if cond.transitive {
            edges = transitive_closure(n, &edges);
        }
        if !cond.admits(n, &edges) {
            continue;
        }
        let mut wd: Vec<BTreeSet<usize>> = (0..n)
            .map(|_| {
                let mut s: BTreeSet<usize> = (0..m).filter(|_| rng.gen_bool(0.5)).collect();
                if s.is_empty() {
                    s.insert(rng.gen_range(0..m));
                }
                s
            })
            .collect();
        loop {
            let mut changed = false;
            for &(a, b) in &edges {
                let add: Vec<usize> = wd[a].difference(&wd[b]).copied().collect();
                if !add.is_empty() {
                    wd[b].extend(add);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        return KripkeSystem {
            worlds: (0..n).map(|i| format!("w{i}")).collect(),
            edges,
            domain: (0..m).map(|i| format!("d{i}")).collect(),
            world_domain: wd,
        };
    }
}

pub fn transitive_closure(n: usize, edges: &BTreeSet<(usize, usize)>) -> BTreeSet<(usize, usize)> {
    let mut reach = vec![vec![false; n]; n];
    for &(a, b) in edges {
        reach[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    for (i, row) in reach.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            if r {
                out.insert((i, j));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn validate_examples() {
        let k = KripkeSystem::frame(1, []);
        assert!(k.validate().is_empty());

        let k = KripkeSystem {
            worlds: vec!["u".into(), "v".into()],
            edges: [(0, 1)].into_iter().collect(),
            domain: vec!["a".into(), "b".into()],
            world_domain: vec![set(&[0, 1]), set(&[0])],
        };
        assert_eq!(
            k.validate(),
            vec![Violation::DomainShrink { from: "u".into(), to: "v".into() }]
        );

        let k = KripkeSystem {
            worlds: vec!["w".into()],
            edges: BTreeSet::new(),
            domain: vec!["a".into()],
            world_domain: vec![BTreeSet::new()],
        };
        assert_eq!(k.validate(), vec![Violation::EmptyDomain { world: "w".into() }]);
    }

    #[test]
    fn eval_examples() {
        let sig = Signature::new().with("p", [0, 1]);
        let k = KripkeSystem::constant(1, [], 2);
        let alg = ConcreteAlgebra::new(&k, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let val = random_valuation(&alg, &["p".to_string()].into(), &sig, &mut rng).unwrap();

        // vacuous box
        let b = alg.eval(&Term::nec(Term::gen("p")), &val).unwrap();
        assert_eq!(b, alg.one());

        // substitution reads the source coordinate
        let s = alg.eval(&Term::subst(0, 1, Term::gen("p")), &val).unwrap();
        let p = &val["p"];
        for a in 0..2 {
            for bb in 0..2 {
                assert_eq!(s.get(&alg.space, 0, &[a, bb]), p.get(&alg.space, 0, &[bb, bb]));
            }
        }

        // single element: cylindrification is the identity
        let k1 = KripkeSystem::constant(1, [], 1);
        let alg1 = ConcreteAlgebra::new(&k1, 2).unwrap();
        let val1 = random_valuation(&alg1, &["p".to_string()].into(), &sig, &mut rng).unwrap();
        let c = alg1.eval(&Term::cyl(0, Term::gen("p")), &val1).unwrap();
        assert_eq!(c, val1["p"]);
    }

    #[test]
    fn eval_errors() {
        let k = KripkeSystem::constant(1, [], 2);
        let alg = ConcreteAlgebra::new(&k, 1).unwrap();
        let val = Valuation::new();
        assert!(matches!(alg.eval(&Term::cyl(2, Term::One), &val), Err(Error::WidthTooSmall { .. })));
        assert!(matches!(alg.eval(&Term::gen("p"), &val), Err(Error::UndeclaredGenerator(_))));
        let bad = KripkeSystem { world_domain: vec![BTreeSet::new()], ..k.clone() };
        assert!(ConcreteAlgebra::new(&bad, 1).is_err());
    }

    #[test]
    fn leq_examples() {
        let k = KripkeSystem::constant(2, [(0, 1)], 2);
        let alg = ConcreteAlgebra::new(&k, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let e = alg.random_element(&mut rng);
            assert!(leq(&e, &e).unwrap());
            assert!(leq(&alg.zero(), &e).unwrap());
            assert!(leq(&e, &alg.cyl(0, &e)).unwrap());
        }
        let other = ConcreteAlgebra::new(&k, 1).unwrap();
        assert!(leq(&alg.zero(), &other.zero()).is_err());
    }

    #[test]
    fn monotone_examples() {
        let k = KripkeSystem::constant(2, [(0, 1)], 1);
        let alg = ConcreteAlgebra::new(&k, 1).unwrap();
        assert!(monotone_check(&k, &alg.one()));
        let only_root = alg.from_fn(|w, _| w == 0);
        assert!(!monotone_check(&k, &only_root));
        let k0 = KripkeSystem::constant(2, [], 1);
        let alg0 = ConcreteAlgebra::new(&k0, 1).unwrap();
        assert!(monotone_check(&k0, &alg0.from_fn(|w, _| w == 0)));
    }

    #[test]
    fn cylindrification_is_closure_and_box_distributes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let k = random_system(&mut rng, 3, 3, FrameConditions::default());
            assert!(k.validate().is_empty());
            let alg = ConcreteAlgebra::new(&k, 2).unwrap();
            let e = alg.random_element(&mut rng);
            let f = alg.random_element(&mut rng);
            let c = alg.cyl(1, &e);
            assert!(leq(&e, &c).unwrap());
            assert_eq!(alg.cyl(1, &c), c);
            assert_eq!(alg.nec(&alg.and(&e, &f)), alg.and(&alg.nec(&e), &alg.nec(&f)));
        }
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"worlds":["w0","w1"],"edges":[["w0","w1"]],"domain":["a","b"],
                       "worldDomain":{"w0":["a"],"w1":["a","b"]}}"#;
        let k = KripkeSystem::from_json(text).unwrap();
        assert_eq!(k.world_domain, vec![set(&[0]), set(&[0, 1])]);
        assert_eq!(KripkeSystem::from_json(&k.to_json().unwrap()).unwrap(), k);

        let sig = Signature::new().with("p", [0]);
        let alg = ConcreteAlgebra::new(&k, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let val = random_valuation(&alg, &["p".to_string()].into(), &sig, &mut rng).unwrap();
        let file = ValuationFile::from_valuation(&k, &val, 1);
        let text = serde_json::to_string(&file).unwrap();
        let back: ValuationFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_valuation(&k).unwrap(), val);
    }

    #[test]
    fn enumeration_counts() {
        // one world, one element, with or without a loop
        assert_eq!(enumerate_systems(1, 1, FrameConditions::default()).len(), 2);
        let all = enumerate_systems(2, 2, FrameConditions::default());
        assert!(all.iter().all(|k| k.validate().is_empty()));
        let refl = FrameConditions { reflexive: true, ..Default::default() };
        assert!(enumerate_systems(2, 1, refl).iter().all(|k| k.edges.contains(&(0, 0))));
    }
}
