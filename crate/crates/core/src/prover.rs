//! Sequent search for K, D, T, K4, D4 and S4, finite grounding of
//! quantified terms, the bounded consequence relation, and an exhaustive
//! small-frame countermodel oracle.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kripke::{
    enumerate_systems, transitive_closure, AlgebraElement, ConcreteAlgebra, FrameConditions,
    KripkeSystem, Valuation, ValuationFile,
};
use crate::par::{self, Exec};
use crate::rewrite::trial_seed;
use crate::syntax::{free_indices, Index, Signature, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Logic {
    K,
    D,
    T,
    K4,
    D4,
    S4,
}

impl Logic {
    pub const ALL: [Logic; 6] = [Logic::K, Logic::D, Logic::T, Logic::K4, Logic::D4, Logic::S4];

    pub fn conditions(self) -> FrameConditions {
        let (serial, reflexive, transitive) = match self {
            Logic::K => (false, false, false),
            Logic::D => (true, false, false),
            Logic::T => (false, true, false),
            Logic::K4 => (false, false, true),
            Logic::D4 => (true, false, true),
            Logic::S4 => (false, true, true),
        };
        FrameConditions { serial, reflexive, transitive }
    }

    pub fn serial(self) -> bool {
        matches!(self, Logic::D | Logic::D4)
    }

    pub fn reflexive(self) -> bool {
        matches!(self, Logic::T | Logic::S4)
    }

    pub fn transitive(self) -> bool {
        matches!(self, Logic::K4 | Logic::D4 | Logic::S4)
    }
}

impl fmt::Display for Logic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Logic::K => "K",
            Logic::D => "D",
            Logic::T => "T",
            Logic::K4 => "K4",
            Logic::D4 => "D4",
            Logic::S4 => "S4",
        };
        f.write_str(s)
    }
}

impl FromStr for Logic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Logic> {
        Logic::ALL
            .into_iter()
            .find(|l| l.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidBounds(format!("unknown logic `{s}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Sequent {
    pub ante: Vec<Term>,
    pub succ: Vec<Term>,
}

impl Sequent {
    pub fn new(ante: impl IntoIterator<Item = Term>, succ: impl IntoIterator<Item = Term>) -> Self {
        Sequent { ante: ante.into_iter().collect(), succ: succ.into_iter().collect() }
    }

    /// `⊢ t`
    pub fn goal(t: Term) -> Self {
        Sequent { ante: Vec::new(), succ: vec![t] }
    }

    pub fn formula(&self) -> Term {
        Term::imp(Term::conj(self.ante.iter().cloned()), Term::disj(self.succ.iter().cloned()))
    }
}

fn show_side<'a>(ts: impl IntoIterator<Item = &'a Term>) -> String {
    ts.into_iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} => {}", show_side(&self.ante), show_side(&self.succ))
    }
}

/// A generator applied to domain elements, written `p[a,b]` as an atom name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundAtom {
    pub name: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn parse(text: &str) -> GroundAtom {
        match text.split_once('[') {
            Some((name, rest)) => GroundAtom {
                name: name.to_string(),
                args: rest
                    .trim_end_matches(']')
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect(),
            },
            None => GroundAtom { name: text.to_string(), args: Vec::new() },
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            f.write_str(&self.name)
        } else {
            write!(f, "{}[{}]", self.name, self.args.join(","))
        }
    }
}

/// Grounds `t` at one ambient tuple (domain positions) over a constant domain.
pub fn ground_at(t: &Term, tuple: &[usize], domain: &[String], sig: &Signature) -> Result<Term> {
    if domain.is_empty() {
        return Err(Error::InvalidBounds("empty grounding domain".into()));
    }
    let width = tuple.len();
    let check = |i: Index| {
        if i >= width {
            Err(Error::WidthTooSmall { needed: i + 1, width })
        } else {
            Ok(())
        }
    };
    Ok(match t {
        Term::Zero | Term::One => t.clone(),
        Term::Gen(p) => {
            let dims = sig.dims(p)?;
            let mut args = Vec::with_capacity(dims.len());
            for &i in dims {
                check(i)?;
                args.push(domain[tuple[i]].clone());
            }
            Term::gen(GroundAtom { name: p.clone(), args }.to_string())
        }
        Term::Not(a) => Term::not(ground_at(a, tuple, domain, sig)?),
        Term::Or(a, b) => {
            Term::or(ground_at(a, tuple, domain, sig)?, ground_at(b, tuple, domain, sig)?)
        }
        Term::And(a, b) => {
            Term::and(ground_at(a, tuple, domain, sig)?, ground_at(b, tuple, domain, sig)?)
        }
        Term::Nec(a) => Term::nec(ground_at(a, tuple, domain, sig)?),
        Term::Cyl(i, a) => {
            check(*i)?;
            let mut parts = Vec::with_capacity(domain.len());
            let mut x = tuple.to_vec();
            for d in 0..domain.len() {
                x[*i] = d;
                parts.push(ground_at(a, &x, domain, sig)?);
            }
            Term::disj(parts)
        }
        Term::Subst(u, l, a) => {
            check(*u)?;
            check(*l)?;
            let mut x = tuple.to_vec();
            x[*u] = tuple[*l];
            ground_at(a, &x, domain, sig)?
        }
    })
}

/// One grounded formula per ambient tuple in `domain^width`.
pub fn expand_quantifiers(
    t: &Term,
    domain: &[String],
    width: usize,
    sig: &Signature,
) -> Result<Vec<(Vec<String>, Term)>> {
    let fv = free_indices(t, sig)?;
    if let Some(&i) = fv.iter().next_back() {
        if i >= width {
            return Err(Error::WidthTooSmall { needed: i + 1, width });
        }
    }
    let elems: Vec<usize> = (0..domain.len()).collect();
    crate::kripke::product(&elems, width)
        .into_iter()
        .map(|x| {
            let g = ground_at(t, &x, domain, sig)?;
            Ok((x.iter().map(|&d| domain[d].clone()).collect(), g))
        })
        .collect()
}

/// Atoms (generator names) of a propositional term.
pub fn atoms(t: &Term) -> BTreeSet<String> {
    t.generators()
}

fn check_propositional(t: &Term) -> Result<()> {
    if t.is_quantifier_free() {
        Ok(())
    } else {
        Err(Error::NotPropositional)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Proof {
    pub rule: &'static str,
    pub sequent: String,
    pub premises: Vec<Proof>,
}

impl Proof {
    /// Rule-application log, one line per step in depth-first order.
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.push_lines(0, &mut out);
        out
    }

    fn push_lines(&self, depth: usize, out: &mut Vec<String>) {
        out.push(format!("{}{}: {}", "  ".repeat(depth), self.rule, self.sequent));
        for p in &self.premises {
            p.push_lines(depth + 1, out);
        }
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Proof::size).sum::<usize>()
    }

    pub fn rules(&self) -> BTreeSet<&'static str> {
        let mut s: BTreeSet<&'static str> = [self.rule].into();
        for p in &self.premises {
            s.extend(p.rules());
        }
        s
    }
}

/// A point of a Kripke system falsifying a term or sequent.
#[derive(Debug, Clone)]
pub struct Countermodel {
    pub system: KripkeSystem,
    pub width: usize,
    pub valuation: Valuation,
    pub world: usize,
    pub tuple: Vec<usize>,
}

#[derive(Serialize)]
struct CountermodelOut {
    system: serde_json::Value,
    valuation: ValuationFile,
    world: String,
    tuple: Vec<String>,
}

impl Countermodel {
    pub fn value(&self, t: &Term) -> Result<bool> {
        let alg = ConcreteAlgebra::new(&self.system, self.width)?;
        let e = alg.eval(t, &self.valuation)?;
        Ok(e.tables[self.world][alg.space.encode(&self.tuple)])
    }

    pub fn falsifies(&self, s: &Sequent) -> Result<bool> {
        for a in &s.ante {
            if !self.value(a)? {
                return Ok(false);
            }
        }
        for b in &s.succ {
            if self.value(b)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        let out = CountermodelOut {
            system: serde_json::from_str(&self.system.to_json()?)?,
            valuation: ValuationFile::from_valuation(&self.system, &self.valuation, self.width),
            world: self.system.worlds[self.world].clone(),
            tuple: self.tuple.iter().map(|&d| self.system.domain[d].clone()).collect(),
        };
        Ok(serde_json::to_value(out)?)
    }

    /// Propositional model from per-world true atoms over a one-element domain.
    pub fn propositional(
        n: usize,
        edges: BTreeSet<(usize, usize)>,
        truth: &[BTreeSet<String>],
        atoms: &BTreeSet<String>,
        world: usize,
    ) -> Countermodel {
        let system = KripkeSystem::frame(n, edges);
        let valuation = atoms
            .iter()
            .map(|a| {
                let tables = (0..n).map(|w| vec![truth[w].contains(a)]).collect();
                (a.clone(), AlgebraElement { width: 0, tables })
            })
            .collect();
        Countermodel { system, width: 0, valuation, world, tuple: Vec::new() }
    }

    /// Keeps only `keep` (which must contain the point), renumbering worlds.
    fn restrict(&self, keep: &[usize]) -> Countermodel {
        let pos: HashMap<usize, usize> = keep.iter().enumerate().map(|(i, &w)| (w, i)).collect();
        let system = KripkeSystem {
            worlds: (0..keep.len()).map(|i| format!("w{i}")).collect(),
            edges: self
                .system
                .edges
                .iter()
                .filter_map(|(a, b)| Some((*pos.get(a)?, *pos.get(b)?)))
                .collect(),
            domain: self.system.domain.clone(),
            world_domain: keep.iter().map(|&w| self.system.world_domain[w].clone()).collect(),
        };
        let valuation = self
            .valuation
            .iter()
            .map(|(k, e)| {
                let tables = keep.iter().map(|&w| e.tables[w].clone()).collect();
                (k.clone(), AlgebraElement { width: e.width, tables })
            })
            .collect();
        Countermodel { system, width: self.width, valuation, world: pos[&self.world], tuple: self.tuple.clone() }
    }

    fn reachable(&self) -> Vec<usize> {
        let mut seen = BTreeSet::from([self.world]);
        let mut todo = vec![self.world];
        while let Some(w) = todo.pop() {
            for v in self.system.successors(w) {
                if seen.insert(v) {
                    todo.push(v);
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Prunes to the generated subframe, then greedily drops worlds while the
    /// frame stays in the logic's class and the sequent stays falsified.
    pub fn minimize(&self, logic: Logic, s: &Sequent) -> Result<Countermodel> {
        let mut cur = self.restrict(&self.reachable());
        let mut w = cur.system.num_worlds();
        while w > 0 {
            w -= 1;
            if w == cur.world {
                continue;
            }
            let keep: Vec<usize> = (0..cur.system.num_worlds()).filter(|&v| v != w).collect();
            let cand = cur.restrict(&keep);
            let cand = cand.restrict(&cand.reachable());
            if logic.conditions().admits(cand.system.num_worlds(), &cand.system.edges)
                && cand.falsifies(s)?
            {
                cur = cand;
                w = w.min(cur.system.num_worlds());
            }
        }
        Ok(cur)
    }
}

#[derive(Debug, Clone)]
pub enum ProveResult {
    Provable(Proof),
    Refuted(Countermodel),
}

impl ProveResult {
    pub fn is_provable(&self) -> bool {
        matches!(self, ProveResult::Provable(_))
    }
}

static FALLBACKS: AtomicUsize = AtomicUsize::new(0);

/// Number of refutations whose extracted model had to be replaced by the oracle.
pub fn extraction_fallbacks() -> usize {
    FALLBACKS.load(Ordering::Relaxed)
}

/// Node budget for one proof search.
pub const DEFAULT_BUDGET: usize = 2_000_000;

pub fn prove(logic: Logic, s: &Sequent) -> Result<ProveResult> {
    prove_with_budget(logic, s, DEFAULT_BUDGET)
}

pub fn prove_with_budget(logic: Logic, s: &Sequent, budget: usize) -> Result<ProveResult> {
    for t in s.ante.iter().chain(&s.succ) {
        check_propositional(t)?;
    }
    let mut search = Search { logic, budget, steps: 0, cache: HashMap::new() };
    let gamma: BTreeSet<Term> = s.ante.iter().cloned().collect();
    let delta: BTreeSet<Term> = s.succ.iter().cloned().collect();
    match search.node(gamma, delta, BTreeSet::new(), &mut Vec::new())? {
        Outcome::Proved(p) => Ok(ProveResult::Provable(to_proof(&p))),
        Outcome::Failed(cm) => {
            let mut all_atoms = BTreeSet::new();
            for t in s.ante.iter().chain(&s.succ) {
                all_atoms.extend(atoms(t));
            }
            let model = build_model(logic, &cm, &all_atoms);
            if !model.falsifies(s)? {
                // extraction should never fail; fall back to the oracle if it does
                FALLBACKS.fetch_add(1, Ordering::Relaxed);
                let f = s.formula();
                return match bounded_countermodel_prop(&f, logic, 4)? {
                    Some(m) => Ok(ProveResult::Refuted(m)),
                    None => Err(Error::Internal(format!("countermodel extraction failed for {s}"))),
                };
            }
            Ok(ProveResult::Refuted(model.minimize(logic, s)?))
        }
    }
}

pub fn is_valid(logic: Logic, t: &Term) -> Result<bool> {
    Ok(prove(logic, &Sequent::goal(t.clone()))?.is_provable())
}

struct PNode {
    rule: &'static str,
    sequent: String,
    premises: Vec<Rc<PNode>>,
}

fn to_proof(p: &PNode) -> Proof {
    Proof { rule: p.rule, sequent: p.sequent.clone(), premises: p.premises.iter().map(|q| to_proof(q)).collect() }
}

struct CmNode {
    atoms: BTreeSet<String>,
    children: Vec<CmLink>,
}

enum CmLink {
    Node(Rc<CmNode>),
    Loop(usize),
}

enum Outcome {
    Proved(Rc<PNode>),
    Failed(Rc<CmNode>),
}

type Key = (Vec<Term>, Vec<Term>, Vec<Term>);
type Premise = (BTreeSet<Term>, BTreeSet<Term>);

struct Search {
    logic: Logic,
    budget: usize,
    steps: usize,
    cache: HashMap<Key, Rc<PNode>>,
}

fn show(gamma: &BTreeSet<Term>, delta: &BTreeSet<Term>) -> String {
    format!("{} => {}", show_side(gamma), show_side(delta))
}

impl Search {
    fn proved(&self, rule: &'static str, g: &BTreeSet<Term>, d: &BTreeSet<Term>, prem: Vec<Rc<PNode>>) -> Outcome {
        Outcome::Proved(Rc::new(PNode { rule, sequent: show(g, d), premises: prem }))
    }

    fn node(
        &mut self,
        gamma: BTreeSet<Term>,
        delta: BTreeSet<Term>,
        tdone: BTreeSet<Term>,
        stack: &mut Vec<Premise>,
    ) -> Result<Outcome> {
        self.steps += 1;
        if self.steps > self.budget {
            return Err(Error::BudgetExceeded(format!("{} proof-search nodes", self.budget)));
        }
        let key: Key = (
            gamma.iter().cloned().collect(),
            delta.iter().cloned().collect(),
            tdone.iter().cloned().collect(),
        );
        if let Some(p) = self.cache.get(&key) {
            return Ok(Outcome::Proved(p.clone()));
        }
        let out = self.expand(gamma, delta, tdone, stack)?;
        if let Outcome::Proved(p) = &out {
            self.cache.insert(key, p.clone());
        }
        Ok(out)
    }

    fn expand(
        &mut self,
        gamma: BTreeSet<Term>,
        delta: BTreeSet<Term>,
        tdone: BTreeSet<Term>,
        stack: &mut Vec<Premise>,
    ) -> Result<Outcome> {
        if gamma.contains(&Term::Zero) || delta.contains(&Term::One) || gamma.intersection(&delta).next().is_some() {
            return Ok(self.proved("axiom", &gamma, &delta, Vec::new()));
        }
        // left rules
        if let Some(f) = gamma.iter().find(|f| !matches!(f, Term::Gen(_) | Term::Nec(_))).cloned() {
            let mut g = gamma.clone();
            g.remove(&f);
            let mut d = delta.clone();
            return match f {
                Term::One => self.node(g, d, tdone, stack),
                Term::Not(a) => {
                    d.insert(*a);
                    self.unary("not-L", &gamma, &delta, g, d, tdone, stack)
                }
                Term::And(a, b) => {
                    g.insert(*a);
                    g.insert(*b);
                    self.unary("and-L", &gamma, &delta, g, d, tdone, stack)
                }
                Term::Or(a, b) => {
                    let mut g1 = g.clone();
                    g1.insert(*a);
                    g.insert(*b);
                    self.binary("or-L", &gamma, &delta, (g1, d.clone()), (g, d), tdone, stack)
                }
                _ => Err(Error::NotPropositional),
            };
        }
        if let Some(f) = delta.iter().find(|f| !matches!(f, Term::Gen(_) | Term::Nec(_))).cloned() {
            let g = gamma.clone();
            let mut d = delta.clone();
            d.remove(&f);
            return match f {
                Term::Zero => self.node(g, d, tdone, stack),
                Term::Not(a) => {
                    let mut g = g;
                    g.insert(*a);
                    self.unary("not-R", &gamma, &delta, g, d, tdone, stack)
                }
                Term::Or(a, b) => {
                    d.insert(*a);
                    d.insert(*b);
                    self.unary("or-R", &gamma, &delta, g, d, tdone, stack)
                }
                Term::And(a, b) => {
                    let mut d1 = d.clone();
                    d1.insert(*a);
                    d.insert(*b);
                    self.binary("and-R", &gamma, &delta, (g.clone(), d1), (g, d), tdone, stack)
                }
                _ => Err(Error::NotPropositional),
            };
        }
        if self.logic.reflexive() {
            if let Some(b) = gamma.iter().find(|f| matches!(f, Term::Nec(_)) && !tdone.contains(*f)).cloned() {
                let Term::Nec(body) = &b else { unreachable!() };
                let mut g = gamma.clone();
                g.insert((**body).clone());
                let mut t = tdone.clone();
                t.insert(b.clone());
                return self.unary("box-T", &gamma, &delta, g, delta.clone(), t, stack);
            }
        }
        self.modal(gamma, delta, stack)
    }

    #[allow(clippy::too_many_arguments)]
    fn unary(
        &mut self,
        rule: &'static str,
        gamma: &BTreeSet<Term>,
        delta: &BTreeSet<Term>,
        g: BTreeSet<Term>,
        d: BTreeSet<Term>,
        tdone: BTreeSet<Term>,
        stack: &mut Vec<Premise>,
    ) -> Result<Outcome> {
        Ok(match self.node(g, d, tdone, stack)? {
            Outcome::Proved(p) => self.proved(rule, gamma, delta, vec![p]),
            failed => failed,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn binary(
        &mut self,
        rule: &'static str,
        gamma: &BTreeSet<Term>,
        delta: &BTreeSet<Term>,
        left: Premise,
        right: Premise,
        tdone: BTreeSet<Term>,
        stack: &mut Vec<Premise>,
    ) -> Result<Outcome> {
        let p1 = match self.node(left.0, left.1, tdone.clone(), stack)? {
            Outcome::Proved(p) => p,
            failed => return Ok(failed),
        };
        let p2 = match self.node(right.0, right.1, tdone, stack)? {
            Outcome::Proved(p) => p,
            failed => return Ok(failed),
        };
        Ok(self.proved(rule, gamma, delta, vec![p1, p2]))
    }

    fn modal(&mut self, gamma: BTreeSet<Term>, delta: BTreeSet<Term>, stack: &mut Vec<Premise>) -> Result<Outcome> {
        let logic = self.logic;
        let boxes: Vec<&Term> = gamma.iter().filter(|f| matches!(f, Term::Nec(_))).collect();
        let bodies = boxes.iter().map(|b| match b {
            Term::Nec(x) => (**x).clone(),
            _ => unreachable!(),
        });
        let carried: BTreeSet<Term> = match logic {
            Logic::K | Logic::D | Logic::T => bodies.collect(),
            Logic::K4 | Logic::D4 => bodies.chain(boxes.iter().map(|b| (*b).clone())).collect(),
            Logic::S4 => boxes.iter().map(|b| (*b).clone()).collect(),
        };
        let rule = if logic.transitive() { "box-4" } else { "box-K" };
        let mut premises: Vec<(&'static str, BTreeSet<Term>)> = delta
            .iter()
            .filter_map(|f| match f {
                Term::Nec(b) => Some((rule, [(**b).clone()].into())),
                _ => None,
            })
            .collect();
        if logic.serial() && !boxes.is_empty() {
            premises.push(("serial", BTreeSet::new()));
        }
        let mut children = Vec::new();
        for (rule, d) in premises {
            let premise = (carried.clone(), d);
            if logic.transitive() {
                if let Some(k) = stack.iter().position(|p| *p == premise) {
                    children.push(CmLink::Loop(k));
                    continue;
                }
            }
            stack.push(premise.clone());
            let r = self.node(premise.0, premise.1, BTreeSet::new(), stack);
            stack.pop();
            match r? {
                Outcome::Proved(p) => return Ok(self.proved(rule, &gamma, &delta, vec![p])),
                Outcome::Failed(cm) => children.push(CmLink::Node(cm)),
            }
        }
        let atoms = gamma
            .iter()
            .filter_map(|f| match f {
                Term::Gen(a) => Some(a.clone()),
                _ => None,
            })
            .collect();
        Ok(Outcome::Failed(Rc::new(CmNode { atoms, children })))
    }
}

fn build_model(logic: Logic, root: &CmNode, all_atoms: &BTreeSet<String>) -> Countermodel {
    let mut truth: Vec<BTreeSet<String>> = Vec::new();
    let mut edges = BTreeSet::new();
    fn walk(
        node: &CmNode,
        path: &mut Vec<usize>,
        truth: &mut Vec<BTreeSet<String>>,
        edges: &mut BTreeSet<(usize, usize)>,
    ) -> usize {
        let id = truth.len();
        truth.push(node.atoms.clone());
        for c in &node.children {
            match c {
                CmLink::Node(child) => {
                    path.push(usize::MAX);
                    let depth = path.len() - 1;
                    // the child's world id is only known after the push below
                    let cid = truth.len();
                    path[depth] = cid;
                    let got = walk(child, path, truth, edges);
                    debug_assert_eq!(got, cid);
                    path.pop();
                    edges.insert((id, cid));
                }
                CmLink::Loop(k) => {
                    edges.insert((id, path[*k]));
                }
            }
        }
        id
    }
    walk(root, &mut Vec::new(), &mut truth, &mut edges);
    let n = truth.len();
    if logic.reflexive() {
        edges.extend((0..n).map(|w| (w, w)));
    }
    if logic.transitive() {
        edges = transitive_closure(n, &edges);
    }
    if logic.serial() {
        for w in 0..n {
            if !edges.iter().any(|&(a, _)| a == w) {
                edges.insert((w, w));
            }
        }
    }
    Countermodel::propositional(n, edges, &truth, all_atoms, 0)
}

/// Frames on `1..=4` worlds generated from world 0, one per isomorphism
/// class fixing the root, for each logic.
struct SmallFrame {
    n: usize,
    succ: Vec<Vec<usize>>,
}

fn small_frames(logic: Logic) -> &'static [SmallFrame] {
    static FRAMES: OnceLock<BTreeMap<Logic, Vec<SmallFrame>>> = OnceLock::new();
    let all = FRAMES.get_or_init(|| {
        let mut out: BTreeMap<Logic, Vec<SmallFrame>> = Logic::ALL.iter().map(|&l| (l, Vec::new())).collect();
        for n in 1..=4usize {
            let perms = permutations_fixing_zero(n);
            for bits in 0u64..(1 << (n * n)) {
                let has = |a: usize, b: usize| bits >> (a * n + b) & 1 == 1;
                let canonical = perms.iter().all(|p| {
                    let mut code = 0u64;
                    for a in 0..n {
                        for b in 0..n {
                            if has(a, b) {
                                code |= 1 << (p[a] * n + p[b]);
                            }
                        }
                    }
                    code >= bits
                });
                if !canonical {
                    continue;
                }
                let succ: Vec<Vec<usize>> = (0..n).map(|a| (0..n).filter(|&b| has(a, b)).collect()).collect();
                let mut seen = vec![false; n];
                seen[0] = true;
                let mut todo = vec![0];
                while let Some(w) = todo.pop() {
                    for &v in &succ[w] {
                        if !seen[v] {
                            seen[v] = true;
                            todo.push(v);
                        }
                    }
                }
                if !seen.iter().all(|&s| s) {
                    continue;
                }
                let edges: BTreeSet<(usize, usize)> =
                    (0..n).flat_map(|a| succ[a].iter().map(move |&b| (a, b))).collect();
                for l in Logic::ALL {
                    if l.conditions().admits(n, &edges) {
                        out.get_mut(&l).unwrap().push(SmallFrame { n, succ: succ.clone() });
                    }
                }
            }
        }
        out
    });
    &all[&logic]
}

fn permutations_fixing_zero(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut rest: Vec<usize> = (1..n).collect();
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            let mut p = vec![0];
            p.extend(a.iter().copied());
            out.push(p);
            return;
        }
        for i in 0..k {
            heap(k - 1, a, out);
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
        }
    }
    let k = rest.len();
    heap(k, &mut rest, &mut out);
    out
}

/// Truth of `t` for every valuation at once, one bit per valuation.
fn eval_bits(t: &Term, f: &SmallFrame, atom_pos: &BTreeMap<String, usize>, natoms: usize, blocks: usize) -> Vec<Vec<u64>> {
    let n = f.n;
    let full = vec![vec![!0u64; blocks]; n];
    match t {
        Term::Zero => vec![vec![0; blocks]; n],
        Term::One => full,
        Term::Gen(a) => {
            let i = atom_pos[a];
            (0..n)
                .map(|w| {
                    let bit = w * natoms + i;
                    (0..blocks)
                        .map(|k| {
                            let mut word = 0u64;
                            for j in 0..64 {
                                let v = (k * 64 + j) as u64;
                                if v >> bit & 1 == 1 {
                                    word |= 1 << j;
                                }
                            }
                            word
                        })
                        .collect()
                })
                .collect()
        }
        Term::Not(a) => {
            let mut x = eval_bits(a, f, atom_pos, natoms, blocks);
            x.iter_mut().flatten().for_each(|b| *b = !*b);
            x
        }
        Term::Or(a, b) | Term::And(a, b) => {
            let mut x = eval_bits(a, f, atom_pos, natoms, blocks);
            let y = eval_bits(b, f, atom_pos, natoms, blocks);
            let or = matches!(t, Term::Or(..));
            for (xw, yw) in x.iter_mut().zip(&y) {
                for (p, q) in xw.iter_mut().zip(yw) {
                    *p = if or { *p | q } else { *p & q };
                }
            }
            x
        }
        Term::Nec(a) => {
            let x = eval_bits(a, f, atom_pos, natoms, blocks);
            (0..n)
                .map(|w| {
                    let mut acc = vec![!0u64; blocks];
                    for &v in &f.succ[w] {
                        for (p, q) in acc.iter_mut().zip(&x[v]) {
                            *p &= q;
                        }
                    }
                    acc
                })
                .collect()
        }
        Term::Cyl(..) | Term::Subst(..) => unreachable!("checked propositional"),
    }
}

/// Exhaustive search for a point falsifying a propositional `t` on frames of
/// the logic with at most `max_worlds` (≤ 4) worlds.
pub fn bounded_countermodel_prop(t: &Term, logic: Logic, max_worlds: usize) -> Result<Option<Countermodel>> {
    bounded_countermodel_prop_with(t, logic, max_worlds, Exec::default())
}

pub fn bounded_countermodel_prop_with(
    t: &Term,
    logic: Logic,
    max_worlds: usize,
    exec: Exec,
) -> Result<Option<Countermodel>> {
    check_propositional(t)?;
    if max_worlds == 0 || max_worlds > 4 {
        return Err(Error::InvalidBounds("propositional oracle supports 1..=4 worlds".into()));
    }
    let names = atoms(t);
    let natoms = names.len();
    let atom_pos: BTreeMap<String, usize> = names.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
    let frames: Vec<&SmallFrame> = small_frames(logic).iter().filter(|f| f.n <= max_worlds).collect();
    if frames.iter().any(|f| f.n * natoms > 24) {
        return Err(Error::BudgetExceeded(format!("{natoms} atoms on {max_worlds} worlds")));
    }
    let hit = par::find_first(exec, frames.len(), |i| {
        let f = frames[i];
        let nv = 1usize << (f.n * natoms);
        let blocks = nv.div_ceil(64);
        let bits = eval_bits(t, f, &atom_pos, natoms, blocks);
        for (k, word) in bits[0].iter().enumerate() {
            let lanes = if nv >= 64 { !0u64 } else { (1u64 << nv) - 1 };
            let bad = !word & lanes;
            if bad != 0 {
                return Some((k * 64 + bad.trailing_zeros() as usize) as u64);
            }
        }
        None
    });
    Ok(hit.map(|(i, v)| {
        let f = frames[i];
        let edges = (0..f.n).flat_map(|a| f.succ[a].iter().map(move |&b| (a, b))).collect();
        let truth: Vec<BTreeSet<String>> = (0..f.n)
            .map(|w| names.iter().enumerate().filter(|(j, _)| v >> (w * natoms + j) & 1 == 1).map(|(_, a)| a.clone()).collect())
            .collect();
        Countermodel::propositional(f.n, edges, &truth, &names, 0)
    }))
}

/// Bounds for the quantified countermodel search.
#[derive(Debug, Clone)]
pub struct OracleBounds {
    pub max_worlds: usize,
    pub max_domain: usize,
    pub width: usize,
    /// Valuations tried per system when exhaustive enumeration is too large.
    pub samples: usize,
    pub seed: u64,
}

impl Default for OracleBounds {
    fn default() -> Self {
        OracleBounds { max_worlds: 2, max_domain: 2, width: 2, samples: 64, seed: 0 }
    }
}

/// Searches small systems of the logic for a point where `t` is false.
/// Quantifier-free terms use the exhaustive propositional oracle.
pub fn bounded_countermodel(t: &Term, logic: Logic, bounds: &OracleBounds, sig: &Signature) -> Result<Option<Countermodel>> {
    if t.is_quantifier_free() {
        return bounded_countermodel_prop(t, logic, bounds.max_worlds.min(4));
    }
    let width = bounds.width.max(sig.required_width(t)?);
    let systems = enumerate_systems(bounds.max_worlds, bounds.max_domain, logic.conditions());
    let gens: Vec<(String, BTreeSet<Index>)> =
        t.generators().into_iter().map(|g| Ok((g.clone(), sig.dims(&g)?.clone()))).collect::<Result<_>>()?;
    let hit = par::find_first(Exec::default(), systems.len(), |s| {
        let k = &systems[s];
        let alg = ConcreteAlgebra::new(k, width).ok()?;
        let bits: u32 = gens.iter().map(|(_, d)| alg.restricted_bits(d)).sum();
        let try_val = |val: Valuation| -> Option<Countermodel> {
            let e = alg.eval(t, &val).ok()?;
            for (w, codes) in alg.space.valid.iter().enumerate() {
                for &c in codes {
                    if !e.tables[w][c] {
                        return Some(Countermodel {
                            system: k.clone(),
                            width,
                            valuation: val,
                            world: w,
                            tuple: alg.space.decode(c),
                        });
                    }
                }
            }
            None
        };
        if bits <= 12 {
            for code in 0u64..(1 << bits) {
                let mut val = Valuation::new();
                let mut shift = 0;
                for (g, d) in &gens {
                    val.insert(g.clone(), alg.restricted_from_bits(d, |j| code >> (shift + j) & 1 == 1));
                    shift += alg.restricted_bits(d) as usize;
                }
                if let Some(m) = try_val(val) {
                    return Some(m);
                }
            }
            None
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(bounds.seed, s as u64));
            (0..bounds.samples).find_map(|_| {
                let val = gens.iter().map(|(g, d)| (g.clone(), alg.random_restricted(&mut rng, d))).collect();
                try_val(val)
            })
        }
    });
    Ok(hit.map(|(_, m)| m))
}

/// Outcome of the bounded consequence check.
#[derive(Debug, Clone)]
pub struct ConsequenceResult {
    pub holds: bool,
    pub domain_bound: usize,
    /// Domain size, ambient tuple and propositional countermodel of a failure.
    pub failure: Option<(usize, Vec<usize>, Countermodel)>,
}

/// Restricted growth strings of length `k` with values below `m`.
fn growth_strings(k: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(k: usize, m: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        let top = if cur.is_empty() { 0 } else { (max + 1).min(m - 1) };
        for v in 0..=top {
            cur.push(v);
            go(k, m, max.max(v), cur, out);
            cur.pop();
        }
    }
    go(k, m, 0, &mut cur, &mut out);
    out
}

/// `Γ →_A Δ` over constant grounding domains of every size up to `domain_bound`.
pub fn consequence(
    gamma: &[Term],
    delta: &[Term],
    logic: Logic,
    domain_bound: usize,
    width: usize,
    sig: &Signature,
) -> Result<ConsequenceResult> {
    let lhs = Term::conj(gamma.iter().cloned());
    let rhs = Term::disj(delta.iter().cloned());
    let mut fv = free_indices(&lhs, sig)?;
    fv.extend(free_indices(&rhs, sig)?);
    let width = width.max(sig.required_width(&lhs)?).max(sig.required_width(&rhs)?);
    let fv: Vec<Index> = fv.into_iter().collect();
    for m in 1..=domain_bound.max(1) {
        let domain: Vec<String> = (0..m).map(|i| format!("d{i}")).collect();
        for assign in growth_strings(fv.len(), m) {
            let mut tuple = vec![0usize; width];
            for (&i, &d) in fv.iter().zip(&assign) {
                tuple[i] = d;
            }
            let s = Sequent::new([ground_at(&lhs, &tuple, &domain, sig)?], [ground_at(&rhs, &tuple, &domain, sig)?]);
            if let ProveResult::Refuted(cm) = prove(logic, &s)? {
                return Ok(ConsequenceResult { holds: false, domain_bound, failure: Some((m, tuple, cm)) });
            }
        }
    }
    Ok(ConsequenceResult { holds: true, domain_bound, failure: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_open;

    fn t(text: &str) -> Term {
        parse_open(text, &mut Signature::new()).unwrap()
    }

    #[test]
    fn prove_examples() {
        let dia_top = Sequent::goal(t("(dia T)"));
        assert!(prove(Logic::D, &dia_top).unwrap().is_provable());
        match prove(Logic::K, &dia_top).unwrap() {
            ProveResult::Refuted(m) => {
                assert_eq!(m.system.num_worlds(), 1);
                assert!(m.system.edges.is_empty());
            }
            other => panic!("{other:?}"),
        }
        let four = Sequent::new([t("(box (g p))")], [t("(box (box (g p)))")]);
        assert!(prove(Logic::K4, &four).unwrap().is_provable());
        assert!(!prove(Logic::K, &four).unwrap().is_provable());
        let tee = Sequent::new([t("(box (g p))")], [t("(g p)")]);
        assert!(prove(Logic::T, &tee).unwrap().is_provable());
        assert!(!prove(Logic::K4, &tee).unwrap().is_provable());
    }

    #[test]
    fn rejects_quantified_input() {
        let s = Sequent::goal(t("(c 0 (g p))"));
        assert!(matches!(prove(Logic::K, &s), Err(Error::NotPropositional)));
    }

    #[test]
    fn budget_is_reported() {
        let f = t("(imp (box (or (g p) (g q))) (or (box (g p)) (dia (g q))))");
        assert!(matches!(prove_with_budget(Logic::S4, &Sequent::goal(f), 2), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn refutations_are_checked_countermodels() {
        let f = t("(imp (dia (box (g p))) (box (dia (g p))))");
        for l in Logic::ALL {
            match prove(l, &Sequent::goal(f.clone())).unwrap() {
                ProveResult::Refuted(m) => assert!(!m.value(&f).unwrap(), "{l}"),
                ProveResult::Provable(_) => panic!("{l} proves .2"),
            }
        }
    }

    #[test]
    fn oracle_examples() {
        let taut = t("(or (not (g p)) (g p))");
        for l in Logic::ALL {
            assert!(bounded_countermodel_prop(&taut, l, 4).unwrap().is_none());
        }
        let m = bounded_countermodel_prop(&t("(box (g p))"), Logic::K, 2).unwrap().unwrap();
        assert!(!m.value(&t("(box (g p))")).unwrap());
        let tee = t("(imp (box (g p)) (g p))");
        assert!(bounded_countermodel_prop(&tee, Logic::T, 4).unwrap().is_none());
        assert!(bounded_countermodel_prop(&tee, Logic::K, 4).unwrap().is_some());
    }

    #[test]
    fn frame_counts() {
        // one-world frames: with and without the loop
        assert_eq!(small_frames(Logic::K).iter().filter(|f| f.n == 1).count(), 2);
        assert_eq!(small_frames(Logic::S4).iter().filter(|f| f.n == 1).count(), 1);
        // rooted two-world frames up to iso: 0->1 plus any of the 3 other edges
        assert_eq!(small_frames(Logic::K).iter().filter(|f| f.n == 2).count(), 8);
    }

    #[test]
    fn grounding_examples() {
        let sig = Signature::new().with("p", [0]).with("q", [0, 1]);
        let dom = vec!["a".to_string(), "b".to_string()];
        let g = ground_at(&Term::cyl(0, Term::gen("p")), &[0], &dom, &sig).unwrap();
        assert_eq!(g, Term::or(Term::gen("p[a]"), Term::gen("p[b]")));
        let g = ground_at(&Term::subst(0, 1, Term::gen("q")), &[0, 1], &dom, &sig).unwrap();
        assert_eq!(g, Term::gen("q[b,b]"));
        assert_eq!(ground_at(&Term::gen("p"), &[0], &dom, &sig).unwrap(), Term::gen("p[a]"));
        assert!(ground_at(&Term::cyl(3, Term::One), &[0], &dom, &sig).is_err());
        assert_eq!(expand_quantifiers(&Term::gen("q"), &dom, 2, &sig).unwrap().len(), 4);
        assert_eq!(GroundAtom::parse("q[a,b]"), GroundAtom { name: "q".into(), args: vec!["a".into(), "b".into()] });
    }

    #[test]
    fn consequence_examples() {
        let sig = Signature::new().with("p", [0]);
        let p = Term::gen("p");
        assert!(consequence(&[p.clone()], &[p.clone()], Logic::K, 2, 1, &sig).unwrap().holds);
        let r = consequence(&[Term::cyl(0, p.clone())], &[p.clone()], Logic::K, 2, 1, &sig).unwrap();
        assert!(!r.holds);
        assert_eq!(r.failure.unwrap().0, 2);
        assert!(consequence(&[p.clone()], &[Term::cyl(0, p)], Logic::K, 2, 1, &sig).unwrap().holds);
    }

    #[test]
    fn growth_string_counts() {
        // Bell numbers restricted by domain size
        assert_eq!(growth_strings(3, 3).len(), 5);
        assert_eq!(growth_strings(3, 2).len(), 4);
        assert_eq!(growth_strings(0, 2).len(), 1);
    }
}
