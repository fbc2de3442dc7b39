//! Craig interpolants from tagged sequent proofs, independent verification,
//! and the interpolation corpus format.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::prover::{
    bounded_countermodel_prop, consequence, prove, Logic, ProveResult, Sequent, DEFAULT_BUDGET,
};
use crate::random::{random_term, TermShape};
use crate::rewrite::normalize;
use crate::syntax::{free_indices, parse, Index, IndexSet, Signature, Term};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InterpolationProblem {
    pub logic: Logic,
    pub left: Term,
    pub right: Term,
    #[serde(skip)]
    pub sig: Signature,
    pub x1: BTreeSet<String>,
    pub x2: BTreeSet<String>,
    pub expected: Option<Term>,
}

impl InterpolationProblem {
    pub fn new(logic: Logic, left: Term, right: Term, sig: Signature) -> Self {
        let x1 = left.generators();
        let x2 = right.generators();
        InterpolationProblem { logic, left, right, sig, x1, x2, expected: None }
    }

    pub fn common(&self) -> BTreeSet<String> {
        self.x1.intersection(&self.x2).cloned().collect()
    }

    pub fn is_propositional(&self) -> bool {
        self.left.is_quantifier_free() && self.right.is_quantifier_free()
    }

    fn check_vocabulary(&self) -> Result<()> {
        if !self.left.generators().is_subset(&self.x1) || !self.right.generators().is_subset(&self.x2) {
            return Err(Error::InvalidBounds("vocabulary split does not cover the formulas".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Read off a tagged proof of the propositional implication.
    Tableau,
    /// Smallest enumerated term over the common vocabulary that verifies.
    Candidate,
    /// No re-abstraction found; `ground` carries the ground interpolant.
    GroundFallback,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InterpolationResult {
    pub interpolant: Term,
    pub method: Method,
    pub left_proof: Vec<String>,
    pub right_proof: Vec<String>,
    pub vocabulary_ok: bool,
    pub index_ok: bool,
    pub domain_bound: usize,
    pub ground: Option<String>,
}

/// Interpolant for `A → B` in the logic, with the vocabulary split of `p`.
pub fn interpolate(p: &InterpolationProblem, domain_bound: usize) -> Result<InterpolationResult> {
    p.check_vocabulary()?;
    let width = p.sig.required_width(&p.left)?.max(p.sig.required_width(&p.right)?);
    let pre = consequence(std::slice::from_ref(&p.left), std::slice::from_ref(&p.right), p.logic, domain_bound, width, &p.sig)?;
    if !pre.holds {
        return Err(Error::NotDerivable);
    }
    let common = p.common();
    let fv_ok = |t: &Term| -> Result<bool> {
        let a = free_indices(&p.left, &p.sig)?;
        let b = free_indices(&p.right, &p.sig)?;
        Ok(free_indices(t, &p.sig)?.is_subset(&a.intersection(&b).copied().collect()))
    };
    if p.is_propositional() {
        let i = tableau_interpolant(p.logic, &p.left, &p.right)?;
        let left_proof = proof_lines(p.logic, &p.left, &i)?;
        let right_proof = proof_lines(p.logic, &i, &p.right)?;
        return Ok(InterpolationResult {
            vocabulary_ok: i.generators().is_subset(&common),
            index_ok: fv_ok(&i)?,
            interpolant: i,
            method: Method::Tableau,
            left_proof,
            right_proof,
            domain_bound,
            ground: None,
        });
    }
    let verifies = |c: &Term| -> Result<bool> {
        if !fv_ok(c)? {
            return Ok(false);
        }
        Ok(consequence(std::slice::from_ref(&p.left), std::slice::from_ref(c), p.logic, domain_bound, width, &p.sig)?.holds
            && consequence(std::slice::from_ref(c), std::slice::from_ref(&p.right), p.logic, domain_bound, width, &p.sig)?.holds)
    };
    let bound_note = |side: &str| vec![format!("{side} implication holds at domain bound {domain_bound}")];
    for c in quantified_candidates(p, &common)? {
        if c.generators().is_subset(&common) && verifies(&c)? {
            return Ok(InterpolationResult {
                interpolant: c,
                method: Method::Candidate,
                left_proof: bound_note("left"),
                right_proof: bound_note("right"),
                vocabulary_ok: true,
                index_ok: true,
                domain_bound,
                ground: None,
            });
        }
    }
    // ground fallback at the largest domain, all free coordinates distinct
    let domain: Vec<String> = (0..domain_bound.max(1)).map(|i| format!("d{i}")).collect();
    let tuple: Vec<usize> = (0..width).map(|i| i.min(domain.len() - 1)).collect();
    let ga = crate::prover::ground_at(&p.left, &tuple, &domain, &p.sig)?;
    let gb = crate::prover::ground_at(&p.right, &tuple, &domain, &p.sig)?;
    let gi = tableau_interpolant(p.logic, &ga, &gb)?;
    Ok(InterpolationResult {
        interpolant: Term::One,
        method: Method::GroundFallback,
        left_proof: Vec::new(),
        right_proof: Vec::new(),
        vocabulary_ok: false,
        index_ok: false,
        domain_bound,
        ground: Some(gi.to_string()),
    })
}

fn proof_lines(logic: Logic, a: &Term, b: &Term) -> Result<Vec<String>> {
    match prove(logic, &Sequent::new([a.clone()], [b.clone()]))? {
        ProveResult::Provable(pr) => Ok(pr.lines()),
        ProveResult::Refuted(_) => Err(Error::Internal(format!("extracted interpolant fails: {a} => {b}"))),
    }
}

/// Heuristic candidates first, then all terms over the common vocabulary by size.
fn quantified_candidates(p: &InterpolationProblem, common: &BTreeSet<String>) -> Result<Vec<Term>> {
    let fa = free_indices(&p.left, &p.sig)?;
    let fb = free_indices(&p.right, &p.sig)?;
    let mut out = Vec::new();
    let only_a: Vec<Index> = fa.difference(&fb).copied().collect();
    let only_b: Vec<Index> = fb.difference(&fa).copied().collect();
    out.push(Term::cyl_all(&only_a, p.left.clone()));
    let mut q = Term::negate(&p.right);
    q = Term::cyl_all(&only_b, q);
    out.push(Term::negate(&q));
    let mut indices: IndexSet = p.left.written_indices();
    indices.extend(p.right.written_indices());
    indices.extend(&fa);
    indices.extend(&fb);
    let mut atoms: Vec<Term> = common.iter().map(|g| Term::gen(g.clone())).collect();
    atoms.push(Term::Zero);
    atoms.push(Term::One);
    out.extend(enumerate_terms(&atoms, &indices, 5, true, 20_000));
    Ok(out)
}

/// All terms over `atoms` up to `max_size` nodes, smallest first, with
/// commutative duplicates skipped and each size level capped at `cap`.
pub fn enumerate_terms(atoms: &[Term], indices: &IndexSet, max_size: usize, modal: bool, cap: usize) -> Vec<Term> {
    let mut levels: Vec<Vec<Term>> = vec![Vec::new(), atoms.to_vec()];
    for s in 2..=max_size {
        let mut lvl = Vec::new();
        for t in &levels[s - 1] {
            lvl.push(Term::not(t.clone()));
            if modal {
                lvl.push(Term::nec(t.clone()));
            }
            for &i in indices {
                lvl.push(Term::cyl(i, t.clone()));
                for &j in indices {
                    if i != j {
                        lvl.push(Term::subst(i, j, t.clone()));
                    }
                }
            }
        }
        for i in 1..s - 1 {
            let j = s - 1 - i;
            if i > j {
                break;
            }
            for a in &levels[i] {
                for b in &levels[j] {
                    if i == j && a >= b {
                        continue;
                    }
                    lvl.push(Term::or(a.clone(), b.clone()));
                    lvl.push(Term::and(a.clone(), b.clone()));
                }
            }
        }
        lvl.truncate(cap);
        levels.push(lvl);
    }
    levels.into_iter().flatten().collect()
}

/// Constant folding and double negation removal.
pub fn simplify(t: &Term) -> Term {
    match t {
        Term::Not(a) => match simplify(a) {
            Term::Zero => Term::One,
            Term::One => Term::Zero,
            Term::Not(x) => *x,
            x => Term::not(x),
        },
        Term::Or(a, b) => match (simplify(a), simplify(b)) {
            (Term::One, _) | (_, Term::One) => Term::One,
            (Term::Zero, x) | (x, Term::Zero) => x,
            (x, y) if x == y => x,
            (x, y) => Term::or(x, y),
        },
        Term::And(a, b) => match (simplify(a), simplify(b)) {
            (Term::Zero, _) | (_, Term::Zero) => Term::Zero,
            (Term::One, x) | (x, Term::One) => x,
            (x, y) if x == y => x,
            (x, y) => Term::and(x, y),
        },
        Term::Nec(a) => match simplify(a) {
            Term::One => Term::One,
            x => Term::nec(x),
        },
        Term::Cyl(i, a) => Term::cyl(*i, simplify(a)),
        Term::Subst(u, l, a) => Term::subst(*u, *l, simplify(a)),
        _ => t.clone(),
    }
}

/// Maehara interpolant of a valid propositional implication `a → b`.
pub fn tableau_interpolant(logic: Logic, a: &Term, b: &Term) -> Result<Term> {
    if !a.is_quantifier_free() || !b.is_quantifier_free() {
        return Err(Error::NotPropositional);
    }
    let mut s = Tagged { logic, budget: DEFAULT_BUDGET, steps: 0, cache: HashMap::new() };
    let start = TSeq {
        g: [[a.clone()].into(), BTreeSet::new()],
        d: [BTreeSet::new(), [b.clone()].into()],
        tdone: [BTreeSet::new(), BTreeSet::new()],
    };
    match s.node(start, &mut Vec::new())? {
        Some(i) => Ok(simplify(&i)),
        None => Err(Error::NotDerivable),
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct TSeq {
    g: [BTreeSet<Term>; 2],
    d: [BTreeSet<Term>; 2],
    tdone: [BTreeSet<Term>; 2],
}

struct Tagged {
    logic: Logic,
    budget: usize,
    steps: usize,
    cache: HashMap<TSeq, Term>,
}

fn decomposable(f: &Term) -> bool {
    !matches!(f, Term::Gen(_) | Term::Nec(_))
}

impl Tagged {
    fn node(&mut self, s: TSeq, stack: &mut Vec<TSeq>) -> Result<Option<Term>> {
        self.steps += 1;
        if self.steps > self.budget {
            return Err(Error::BudgetExceeded(format!("{} interpolation nodes", self.budget)));
        }
        if let Some(i) = self.cache.get(&s) {
            return Ok(Some(i.clone()));
        }
        let out = self.expand(s.clone(), stack)?;
        if let Some(i) = &out {
            self.cache.insert(s, i.clone());
        }
        Ok(out)
    }

    fn expand(&mut self, s: TSeq, stack: &mut Vec<TSeq>) -> Result<Option<Term>> {
        if s.g[0].contains(&Term::Zero) || s.d[0].contains(&Term::One) {
            return Ok(Some(Term::Zero));
        }
        if s.g[1].contains(&Term::Zero) || s.d[1].contains(&Term::One) {
            return Ok(Some(Term::One));
        }
        if s.g[0].intersection(&s.d[0]).next().is_some() {
            return Ok(Some(Term::Zero));
        }
        if s.g[1].intersection(&s.d[1]).next().is_some() {
            return Ok(Some(Term::One));
        }
        if let Some(f) = s.g[0].intersection(&s.d[1]).next() {
            return Ok(Some(f.clone()));
        }
        if let Some(f) = s.g[1].intersection(&s.d[0]).next() {
            return Ok(Some(Term::not(f.clone())));
        }
        for side in 0..2 {
            if let Some(f) = s.g[side].iter().find(|f| decomposable(f)).cloned() {
                let mut n = s.clone();
                n.g[side].remove(&f);
                return match f {
                    Term::One => self.node(n, stack),
                    Term::Not(a) => {
                        n.d[side].insert(*a);
                        self.node(n, stack)
                    }
                    Term::And(a, b) => {
                        n.g[side].insert(*a);
                        n.g[side].insert(*b);
                        self.node(n, stack)
                    }
                    Term::Or(a, b) => {
                        let mut n2 = n.clone();
                        n.g[side].insert(*a);
                        n2.g[side].insert(*b);
                        self.branch(side, n, n2, stack)
                    }
                    _ => Err(Error::NotPropositional),
                };
            }
        }
        for side in 0..2 {
            if let Some(f) = s.d[side].iter().find(|f| decomposable(f)).cloned() {
                let mut n = s.clone();
                n.d[side].remove(&f);
                return match f {
                    Term::Zero => self.node(n, stack),
                    Term::Not(a) => {
                        n.g[side].insert(*a);
                        self.node(n, stack)
                    }
                    Term::Or(a, b) => {
                        n.d[side].insert(*a);
                        n.d[side].insert(*b);
                        self.node(n, stack)
                    }
                    Term::And(a, b) => {
                        let mut n2 = n.clone();
                        n.d[side].insert(*a);
                        n2.d[side].insert(*b);
                        self.branch(side, n, n2, stack)
                    }
                    _ => Err(Error::NotPropositional),
                };
            }
        }
        if self.logic.reflexive() {
            for side in 0..2 {
                if let Some(b) = s.g[side].iter().find(|f| matches!(f, Term::Nec(_)) && !s.tdone[side].contains(*f)).cloned() {
                    let Term::Nec(body) = &b else { unreachable!() };
                    let mut n = s.clone();
                    n.g[side].insert((**body).clone());
                    n.tdone[side].insert(b.clone());
                    return self.node(n, stack);
                }
            }
        }
        self.modal(s, stack)
    }

    fn branch(&mut self, side: usize, a: TSeq, b: TSeq, stack: &mut Vec<TSeq>) -> Result<Option<Term>> {
        let Some(i1) = self.node(a, stack)? else { return Ok(None) };
        let Some(i2) = self.node(b, stack)? else { return Ok(None) };
        Ok(Some(if side == 0 { Term::or(i1, i2) } else { Term::and(i1, i2) }))
    }

    fn carried(&self, g: &BTreeSet<Term>) -> BTreeSet<Term> {
        let boxes = g.iter().filter(|f| matches!(f, Term::Nec(_)));
        let bodies = boxes.clone().map(|b| match b {
            Term::Nec(x) => (**x).clone(),
            _ => unreachable!(),
        });
        match self.logic {
            Logic::K | Logic::D | Logic::T => bodies.collect(),
            Logic::K4 | Logic::D4 => bodies.chain(boxes.cloned()).collect(),
            Logic::S4 => boxes.cloned().collect(),
        }
    }

    fn modal(&mut self, s: TSeq, stack: &mut Vec<TSeq>) -> Result<Option<Term>> {
        let carried = [self.carried(&s.g[0]), self.carried(&s.g[1])];
        let empty = [BTreeSet::new(), BTreeSet::new()];
        let mut premises: Vec<(Option<usize>, TSeq)> = Vec::new();
        for side in 0..2 {
            for f in &s.d[side] {
                if let Term::Nec(b) = f {
                    let mut d = empty.clone();
                    d[side].insert((**b).clone());
                    premises.push((Some(side), TSeq { g: carried.clone(), d, tdone: empty.clone() }));
                }
            }
        }
        let has_boxes = s.g.iter().flatten().any(|f| matches!(f, Term::Nec(_)));
        if self.logic.serial() && has_boxes {
            premises.push((None, TSeq { g: carried.clone(), d: empty.clone(), tdone: empty.clone() }));
        }
        for (side, premise) in premises {
            if self.logic.transitive() && stack.contains(&premise) {
                continue;
            }
            stack.push(premise.clone());
            let r = self.node(premise, stack);
            stack.pop();
            if let Some(c) = r? {
                return Ok(Some(match side {
                    Some(0) => Term::dia(c),
                    _ => Term::nec(c),
                }));
            }
        }
        Ok(None)
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyReport {
    pub left_ok: bool,
    pub right_ok: bool,
    pub vocabulary_ok: bool,
    pub index_ok: bool,
    /// Set for quantifier-free problems: both implications also survive the
    /// exhaustive frame oracle on up to four worlds.
    pub oracle_ok: Option<bool>,
    pub notes: Vec<String>,
}

impl VerifyReport {
    /// Left implication, right implication and vocabulary containment.
    pub fn passed(&self) -> bool {
        self.left_ok && self.right_ok && self.vocabulary_ok
    }
}

/// Re-checks a proposed interpolant without trusting how it was produced.
pub fn verify_interpolant(p: &InterpolationProblem, i: &Term, domain_bound: usize) -> Result<VerifyReport> {
    let width = p.sig.required_width(&p.left)?.max(p.sig.required_width(&p.right)?);
    let mut notes = Vec::new();
    let mut check = |a: &Term, b: &Term, name: &str| -> Result<bool> {
        let r = consequence(std::slice::from_ref(a), std::slice::from_ref(b), p.logic, domain_bound, width, &p.sig)?;
        if let Some((m, tuple, _)) = &r.failure {
            notes.push(format!("{name} implication fails at domain size {m}, tuple {tuple:?}"));
        }
        Ok(r.holds)
    };
    let left_ok = check(&p.left, i, "left")?;
    let right_ok = check(i, &p.right, "right")?;
    let common = p.common();
    let extra: Vec<String> = i.generators().difference(&common).cloned().collect();
    let vocabulary_ok = extra.is_empty();
    if !vocabulary_ok {
        notes.push(format!("generators outside the common vocabulary: {}", extra.join(" ")));
    }
    let fa = free_indices(&p.left, &p.sig)?;
    let fb = free_indices(&p.right, &p.sig)?;
    let shared: IndexSet = fa.intersection(&fb).copied().collect();
    let index_ok = free_indices(i, &p.sig)?.is_subset(&shared);
    if !index_ok {
        notes.push("free indices outside those shared by both sides".into());
    }
    let oracle_ok = if p.is_propositional() && i.is_quantifier_free() {
        let a = bounded_countermodel_prop(&Term::imp(p.left.clone(), i.clone()), p.logic, 4)?;
        let b = bounded_countermodel_prop(&Term::imp(i.clone(), p.right.clone()), p.logic, 4)?;
        Some(a.is_none() && b.is_none())
    } else {
        None
    };
    Ok(VerifyReport { left_ok, right_ok, vocabulary_ok, index_ok, oracle_ok, notes })
}

/// A parsed corpus: shared signature and problems in file order.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub sig: Signature,
    pub problems: Vec<InterpolationProblem>,
}

fn names(field: &str) -> BTreeSet<String> {
    field.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

/// Reads `sig NAME: i j ...` and `problem LOGIC ; A ; B ; X1 ; X2 [; I]` lines.
/// Generators not declared by a `sig` line are nullary.
pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut sig = Signature::new();
    let mut raw = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("sig ") {
            sig.extend(&Signature::parse(rest)?);
        } else if let Some(rest) = line.strip_prefix("problem ") {
            raw.push((n + 1, rest.to_string()));
        } else {
            return Err(Error::Syntax { pos: n + 1, msg: format!("unrecognized corpus line `{line}`") });
        }
    }
    let mut problems = Vec::new();
    for (n, rest) in raw {
        let fields: Vec<&str> = rest.split(';').map(str::trim).collect();
        if fields.len() < 5 || fields.len() > 6 {
            return Err(Error::Syntax { pos: n, msg: "expected 5 or 6 `;`-separated fields".into() });
        }
        let mut local = sig.clone();
        for f in [fields[1], fields[2]].iter().chain(fields.get(5)) {
            let mut s = Signature::new();
            let t = crate::syntax::parse_open(f, &mut s)?;
            for g in t.generators() {
                if !local.contains(&g) {
                    local.declare(g, []);
                }
            }
        }
        let logic: Logic = fields[0].parse()?;
        let left = parse(fields[1], &local)?;
        let right = parse(fields[2], &local)?;
        let expected = fields.get(5).map(|f| parse(f, &local)).transpose()?;
        problems.push(InterpolationProblem {
            logic,
            left,
            right,
            sig: local,
            x1: names(fields[3]),
            x2: names(fields[4]),
            expected,
        });
    }
    Ok(Corpus { sig, problems })
}

impl fmt::Display for InterpolationProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(" ");
        write!(f, "problem {} ; {} ; {} ; {} ; {}", self.logic, self.left, self.right, join(&self.x1), join(&self.x2))?;
        if let Some(e) = &self.expected {
            write!(f, " ; {e}")?;
        }
        Ok(())
    }
}

/// Random valid implications `A → B` with `A` over {p,q} and `B` over {p,r}.
/// Implications whose sides are constant or whose only interpolants are
/// constants are kept but limited to a fifth of each logic's share.
pub fn generate_corpus(seed: u64, per_logic: usize) -> Result<Vec<InterpolationProblem>> {
    let sig = Signature::new().with("p", []).with("q", []).with("r", []);
    let shape = TermShape { depth: 3, quantified: false, constants: false, sugar: true, ..Default::default() };
    let mut out = Vec::new();
    for (li, logic) in Logic::ALL.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(li as u64));
        let (mut kept, mut trivial) = (0, 0);
        let left_gens = ["p".to_string(), "q".to_string()];
        let right_gens = ["p".to_string(), "r".to_string()];
        let mut attempts = 0;
        let mut seen = BTreeSet::new();
        while kept < per_logic {
            attempts += 1;
            if attempts > 200_000 {
                return Err(Error::BudgetExceeded(format!("corpus generation for {logic}")));
            }
            let a = random_term(&mut rng, &left_gens, &shape);
            let b = random_term(&mut rng, &right_gens, &shape);
            if !seen.insert((a.clone(), b.clone()))
                || !prove(logic, &Sequent::new([a.clone()], [b.clone()]))?.is_provable()
            {
                continue;
            }
            let i = tableau_interpolant(logic, &a, &b)?;
            let constant = matches!(normalize(&i, &sig)?, Term::Zero | Term::One);
            if constant {
                if trivial * 5 >= per_logic {
                    continue;
                }
                trivial += 1;
            }
            let mut pr = InterpolationProblem::new(logic, a, b, sig.clone());
            pr.x1 = left_gens.iter().cloned().collect();
            pr.x2 = right_gens.iter().cloned().collect();
            out.push(pr);
            kept += 1;
        }
    }
    Ok(out)
}

/// Runs interpolation and verification over a corpus.
pub fn run_corpus(
    problems: &[InterpolationProblem],
    domain_bound: usize,
    exec: Exec,
) -> Vec<Result<(InterpolationResult, VerifyReport)>> {
    par::map_slice(exec, problems, |p| {
        let r = interpolate(p, domain_bound)?;
        let v = verify_interpolant(p, &r.interpolant, domain_bound)?;
        Ok((r, v))
    })
}
