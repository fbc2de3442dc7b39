//! Separability, bounded saturation of theory/cotheory pairs, modal witness
//! children, and the countermodel built from saturated pairs.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::{enumerate_terms, simplify, tableau_interpolant};
use crate::kripke::{eval, monotone_check, transitive_closure, ConcreteAlgebra, KripkeSystem, Space, Valuation};
use crate::prover::{consequence, Logic};
use crate::rewrite::normalize;
use crate::syntax::{free_indices, Index, IndexSet, IndexSupply, Signature, Term};
use crate::transform::{apply_s_tau, FiniteTransformation};

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SaturationConfig {
    /// Enumerated terms offered to each side beyond the subterms of the input.
    pub steps: usize,
    pub logic: Logic,
    pub domain_bound: usize,
    /// Term depth of the enumerations and of separator candidates.
    pub depth: usize,
    /// Height of the world tree; defaults to the modal depth of the input plus one.
    pub tree_depth: Option<usize>,
}

impl Default for SaturationConfig {
    fn default() -> Self {
        SaturationConfig { steps: 16, logic: Logic::K, domain_bound: 2, depth: 2, tree_depth: None }
    }
}

impl SaturationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.domain_bound == 0 || self.depth == 0 || self.tree_depth == Some(0) {
            return Err(Error::InvalidBounds("saturation bounds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    T,
    F,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum Verdict {
    /// Already a member.
    Present,
    /// Case 1: adding it makes the pair separable.
    Separable { separator: Term },
    /// Case 2.
    Added,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceEntry {
    pub step: usize,
    pub side: Side,
    pub term: Term,
    pub verdict: Verdict,
    pub witness: Option<Term>,
    pub witness_index: Option<Index>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TheoryPair {
    pub t: Vec<Term>,
    pub f: Vec<Term>,
    pub seed_t: Vec<Term>,
    pub seed_f: Vec<Term>,
    pub stage: usize,
    pub dilation_level: usize,
    pub log: Vec<TraceEntry>,
}

impl TheoryPair {
    pub fn in_t(&self, a: &Term) -> bool {
        self.t.contains(a)
    }

    pub fn in_f(&self, b: &Term) -> bool {
        self.f.contains(b)
    }

    /// Every intermediate pair `(T_n, F_n)`, replayed from the trace.
    pub fn prefixes(&self) -> Vec<(Vec<Term>, Vec<Term>)> {
        let mut t = self.seed_t.clone();
        let mut f = self.seed_f.clone();
        let mut out = vec![(t.clone(), f.clone())];
        for e in &self.log {
            let target = if e.side == Side::T { &mut t } else { &mut f };
            let mut changed = false;
            if e.verdict == Verdict::Added {
                push_new(target, e.term.clone());
                changed = true;
            }
            if let Some(w) = &e.witness {
                push_new(target, w.clone());
                changed = true;
            }
            if changed {
                out.push((t.clone(), f.clone()));
            }
        }
        out
    }

    /// Seeds, enumerated terms and witnesses seen by the construction.
    pub fn universe(&self) -> Vec<Term> {
        let mut out = Vec::new();
        for x in self.seed_t.iter().chain(&self.seed_f) {
            push_new(&mut out, x.clone());
        }
        for e in &self.log {
            push_new(&mut out, e.term.clone());
            if let Some(w) = &e.witness {
                push_new(&mut out, w.clone());
            }
        }
        out
    }
}

fn push_new(v: &mut Vec<Term>, t: Term) -> bool {
    if v.contains(&t) {
        false
    } else {
        v.push(t);
        true
    }
}

fn all_indices(terms: &[Term], sig: &Signature) -> Result<IndexSet> {
    let mut s = IndexSet::new();
    for t in terms {
        s.extend(t.written_indices());
        s.extend(free_indices(t, sig)?);
    }
    Ok(s)
}

fn width_of(terms: &[Term], sig: &Signature) -> Result<usize> {
    let mut w = 0;
    for t in terms {
        w = w.max(sig.required_width(t)?);
    }
    Ok(w)
}

/// Largest term size the depth bound allows, capped to keep enumeration small.
fn size_for(depth: usize) -> usize {
    ((1usize << depth.min(3)) - 1).min(7)
}

/// A separator `c` over `common` with `Γ → c` and `c → Δ`, if one is found
/// at the configured bounds. `None` means inseparable at the bound.
pub fn separable(
    gamma: &[Term],
    delta: &[Term],
    common: &BTreeSet<String>,
    cfg: &SaturationConfig,
    sig: &Signature,
) -> Result<Option<Term>> {
    let logic = cfg.logic;
    let bound = cfg.domain_bound;
    if !consequence(gamma, delta, logic, bound, 0, sig)?.holds {
        return Ok(None);
    }
    let lhs = Term::conj(gamma.iter().cloned());
    let rhs = Term::disj(delta.iter().cloned());
    if lhs.is_quantifier_free() && rhs.is_quantifier_free() {
        let c = simplify(&tableau_interpolant(logic, &lhs, &rhs)?);
        if c.generators().is_subset(common) {
            return Ok(Some(c));
        }
    }
    let over_common = |t: &&Term| t.generators().is_subset(common);
    let mut members: Vec<Term> = Vec::new();
    members.push(Term::conj(gamma.iter().filter(over_common).cloned()));
    members.push(Term::disj(delta.iter().filter(over_common).cloned()));
    members.extend(gamma.iter().chain(delta).filter(over_common).cloned());
    let mut indices = all_indices(gamma, sig)?;
    indices.extend(all_indices(delta, sig)?);
    let mut atoms = vec![Term::Zero, Term::One];
    atoms.extend(common.iter().map(|g| Term::gen(g.clone())));
    let enumerated = enumerate_terms(&atoms, &indices, size_for(cfg.depth), true, 400);
    for c in members.into_iter().chain(enumerated.into_iter().filter(|c| c.depth() <= cfg.depth)) {
        if consequence(std::slice::from_ref(&lhs), std::slice::from_ref(&c), logic, bound, 0, sig)?.holds
            && consequence(std::slice::from_ref(&c), std::slice::from_ref(&rhs), logic, bound, 0, sig)?.holds
        {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

/// Enumeration of one side: subterms of the seeds over `gens` with their
/// negations, then up to `cfg.steps` further non-modal terms by size.
fn universe(seeds: &[Term], gens: &BTreeSet<String>, width: usize, cfg: &SaturationConfig, sig: &Signature) -> Result<Vec<Term>> {
    let mut out = Vec::new();
    let usable = |t: &Term| !t.generators().is_empty() && t.generators().is_subset(gens);
    for s in seeds {
        for sub in s.subterms() {
            if usable(sub) {
                push_new(&mut out, simplify(sub));
                push_new(&mut out, simplify(&Term::negate(sub)));
            }
        }
    }
    let mut indices = all_indices(seeds, sig)?;
    indices.extend(0..width);
    let atoms: Vec<Term> = gens.iter().map(|g| Term::gen(g.clone())).collect();
    let mut extra = 0;
    for t in enumerate_terms(&atoms, &indices, size_for(cfg.depth), false, 400) {
        if extra >= cfg.steps {
            break;
        }
        if t.depth() <= cfg.depth && usable(&t) && push_new(&mut out, simplify(&t)) {
            extra += 1;
        }
    }
    Ok(out)
}

/// `Cyl(k, x)` as `(k, x)`.
fn as_cyl(t: &Term) -> Option<(Index, &Term)> {
    match t {
        Term::Cyl(k, x) => Some((*k, x)),
        _ => None,
    }
}

/// `q_k x = ¬c_k¬x` as `(k, x)`.
fn as_q(t: &Term) -> Option<(Index, Term)> {
    match t {
        Term::Not(inner) => match &**inner {
            Term::Cyl(k, y) => Some((*k, simplify(&Term::negate(y)))),
            _ => None,
        },
        _ => None,
    }
}

fn as_box(t: &Term) -> Option<&Term> {
    match t {
        Term::Nec(a) => Some(a),
        _ => None,
    }
}

/// `¬□x` read as `◊¬x`.
fn as_dia(t: &Term) -> Option<Term> {
    match t {
        Term::Not(inner) => match &**inner {
            Term::Nec(x) => Some(simplify(&Term::negate(x))),
            _ => None,
        },
        _ => None,
    }
}

/// Some `j ∉ Δ(c_k x)` with `s^k_j x` already in `set` (`j = k` means `x` itself).
fn has_witness(set: &[Term], k: Index, x: &Term, sig: &Signature) -> Result<bool> {
    let outer = free_indices(&Term::cyl(k, x.clone()), sig)?;
    for t in set {
        if t == x {
            return Ok(true);
        }
        if let Term::Subst(u, j, body) = t {
            if *u == k && **body == *x && !outer.contains(j) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Saturates `(Γ, Δ)` over the enumerated fragments of `Sg X1` and `Sg X2`.
#[allow(clippy::too_many_arguments)]
pub fn saturate(
    gamma: &[Term],
    delta: &[Term],
    x1: &BTreeSet<String>,
    x2: &BTreeSet<String>,
    cfg: &SaturationConfig,
    supply: &mut IndexSupply,
    sig: &Signature,
) -> Result<TheoryPair> {
    cfg.validate()?;
    let common: BTreeSet<String> = x1.intersection(x2).cloned().collect();
    if let Some(c) = separable(gamma, delta, &common, cfg, sig)? {
        return Err(Error::Separable(c));
    }
    let mut seeds: Vec<Term> = gamma.to_vec();
    seeds.extend(delta.iter().cloned());
    let width = width_of(&seeds, sig)?;
    let u1 = universe(&seeds, x1, width, cfg, sig)?;
    let u2 = universe(&seeds, x2, width, cfg, sig)?;
    supply.reserve(0..width);
    supply.reserve(all_indices(&u1, sig)?);
    supply.reserve(all_indices(&u2, sig)?);
    supply.reserve(all_indices(&seeds, sig)?);

    let mut t: Vec<Term> = Vec::new();
    for g in gamma {
        push_new(&mut t, simplify(g));
    }
    let mut f: Vec<Term> = Vec::new();
    for d in delta {
        push_new(&mut f, simplify(d));
    }
    let mut pair = TheoryPair {
        seed_t: t.clone(),
        seed_f: f.clone(),
        t,
        f,
        stage: 0,
        dilation_level: 0,
        log: Vec::new(),
    };

    for n in 0..u1.len().max(u2.len()) {
        if let Some(a) = u1.get(n) {
            let entry = offer(&mut pair, Side::T, a, n, &common, cfg, supply, sig)?;
            pair.log.push(entry);
        }
        if let Some(b) = u2.get(n) {
            let entry = offer(&mut pair, Side::F, b, n, &common, cfg, supply, sig)?;
            pair.log.push(entry);
        }
    }
    let mut all = pair.t.clone();
    all.extend(pair.f.iter().cloned());
    let top = all_indices(&all, sig)?.into_iter().max().unwrap_or(0);
    pair.dilation_level = top.max(supply.high_water().unwrap_or(0)).max(width.saturating_sub(1));
    Ok(pair)
}

/// One odd (T side) or even (F side) step of the construction.
#[allow(clippy::too_many_arguments)]
fn offer(
    pair: &mut TheoryPair,
    side: Side,
    a: &Term,
    step: usize,
    common: &BTreeSet<String>,
    cfg: &SaturationConfig,
    supply: &mut IndexSupply,
    sig: &Signature,
) -> Result<TraceEntry> {
    let present = match side {
        Side::T => pair.in_t(a),
        Side::F => pair.in_f(a),
    };
    let verdict = if present {
        Verdict::Present
    } else {
        let (mut t, mut f) = (pair.t.clone(), pair.f.clone());
        match side {
            Side::T => t.push(a.clone()),
            Side::F => f.push(a.clone()),
        }
        match separable(&t, &f, common, cfg, sig)? {
            Some(c) => Verdict::Separable { separator: c },
            None => {
                pair.t = t;
                pair.f = f;
                Verdict::Added
            }
        }
    };
    let mut entry = TraceEntry { step, side, term: a.clone(), verdict, witness: None, witness_index: None };
    if matches!(entry.verdict, Verdict::Separable { .. }) {
        return Ok(entry);
    }
    let quantified = match side {
        Side::T => as_cyl(a).map(|(k, x)| (k, x.clone())),
        Side::F => as_q(a),
    };
    if let Some((k, x)) = quantified {
        let set = if side == Side::T { &pair.t } else { &pair.f };
        if !has_witness(set, k, &x, sig)? {
            if let Some(w) = mirrored_witness(pair, side, k, &x, common, cfg, sig)? {
                match side {
                    Side::T => push_new(&mut pair.t, w.clone()),
                    Side::F => push_new(&mut pair.f, w.clone()),
                };
                entry.witness = Some(w);
                return Ok(entry);
            }
            let mut in_play: Vec<Term> = pair.t.clone();
            in_play.extend(pair.f.iter().cloned());
            in_play.push(a.clone());
            let i = supply.fresh(&all_indices(&in_play, sig)?);
            let w = Term::subst(k, i, x);
            match side {
                Side::T => push_new(&mut pair.t, w.clone()),
                Side::F => push_new(&mut pair.f, w.clone()),
            };
            entry.witness = Some(w);
            entry.witness_index = Some(i);
        }
    }
    Ok(entry)
}

/// Reuses an element already named on the other side: `s^k_j ¬x` there
/// means `s^k_j x` may join this side, provided the pair stays inseparable.
fn mirrored_witness(
    pair: &TheoryPair,
    side: Side,
    k: Index,
    x: &Term,
    common: &BTreeSet<String>,
    cfg: &SaturationConfig,
    sig: &Signature,
) -> Result<Option<Term>> {
    let other = if side == Side::T { &pair.f } else { &pair.t };
    let neg = simplify(&Term::negate(x));
    let outer = free_indices(&Term::cyl(k, x.clone()), sig)?;
    for o in other {
        let cand = match o {
            t if *t == neg => x.clone(),
            Term::Subst(u, j, body) if *u == k && **body == neg && !outer.contains(j) => Term::subst(k, *j, x.clone()),
            _ => continue,
        };
        let (mut t, mut f) = (pair.t.clone(), pair.f.clone());
        match side {
            Side::T => t.push(cand.clone()),
            Side::F => f.push(cand.clone()),
        }
        if separable(&t, &f, common, cfg, sig)?.is_none() {
            return Ok(Some(cand));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub condition: u8,
    pub passed: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SaturationReport {
    pub conditions: Vec<ConditionCheck>,
}

impl SaturationReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn condition(&self, n: u8) -> Option<&ConditionCheck> {
        self.conditions.iter().find(|c| c.condition == n)
    }
}

/// Saturation conditions (1)-(6) restricted to `universe`.
pub fn check_saturated(
    pair: &TheoryPair,
    universe: &[Term],
    x1: &BTreeSet<String>,
    x2: &BTreeSet<String>,
    cfg: &SaturationConfig,
    sig: &Signature,
) -> Result<SaturationReport> {
    let common: BTreeSet<String> = x1.intersection(x2).cloned().collect();
    let in_u = |t: &Term| universe.contains(t);
    let mut checks = Vec::new();
    let mut record = |n: u8, bad: Option<String>| {
        checks.push(ConditionCheck { condition: n, passed: bad.is_none(), witness: bad });
    };

    let (logic, bound) = (cfg.logic, cfg.domain_bound);
    let mut bad = None;
    for a in universe {
        if a.generators().is_subset(x1) && !pair.in_t(a) && consequence(&pair.t, std::slice::from_ref(a), logic, bound, 0, sig)?.holds {
            bad = Some(format!("T entails {a} but does not contain it"));
            break;
        }
        if a.generators().is_subset(x2) && !pair.in_f(a) && consequence(std::slice::from_ref(a), &pair.f, logic, bound, 0, sig)?.holds {
            bad = Some(format!("{a} entails F but is not in it"));
            break;
        }
    }
    record(1, bad);

    let shared = pair.t.iter().find(|a| pair.in_f(a));
    let bad = match shared {
        Some(a) => Some(format!("{a} in both T and F")),
        None => separable(&pair.t, &pair.f, &common, cfg, sig)?.map(|c| format!("separator {c}")),
    };
    record(2, bad);

    let mut bad = None;
    for x in pair.t.iter().filter(|x| in_u(x)) {
        if let Term::Or(a, b) = x {
            if in_u(a) && in_u(b) && !pair.in_t(a) && !pair.in_t(b) {
                bad = Some(x.to_string());
                break;
            }
        }
    }
    record(3, bad);

    let mut bad = None;
    for x in pair.t.iter().filter(|x| in_u(x)) {
        if let Some((k, body)) = as_cyl(x) {
            if !has_witness(&pair.t, k, body, sig)? {
                bad = Some(x.to_string());
                break;
            }
        }
    }
    record(4, bad);

    let mut bad = None;
    for x in pair.f.iter().filter(|x| in_u(x)) {
        if let Term::And(a, b) = x {
            if in_u(a) && in_u(b) && !pair.in_f(a) && !pair.in_f(b) {
                bad = Some(x.to_string());
                break;
            }
        }
    }
    record(5, bad);

    let mut bad = None;
    for x in pair.f.iter().filter(|x| in_u(x)) {
        if let Some((k, body)) = as_q(x) {
            if !has_witness(&pair.f, k, &body, sig)? {
                bad = Some(x.to_string());
                break;
            }
        }
    }
    record(6, bad);
    Ok(SaturationReport { conditions: checks })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModalChild {
    /// The modal formula the child witnesses, or `serial`.
    pub origin: String,
    pub pair: TheoryPair,
}

#[derive(Debug, Clone, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModalStep {
    pub children: Vec<ModalChild>,
    /// Child seeds that should be inseparable but were separated at the bound.
    pub claim_violations: Vec<String>,
}

/// Modal reading of a pair: members are normalized, theory members split
/// into conjuncts and cotheory members into disjuncts.
#[derive(Debug, Clone, Default)]
pub struct ModalView {
    pub t_parts: Vec<Term>,
    pub f_parts: Vec<Term>,
}

impl ModalView {
    pub fn of(pair: &TheoryPair, sig: &Signature) -> Result<ModalView> {
        let mut v = ModalView::default();
        let dom = pair.dilation_level;
        for x in &pair.t {
            push_new(&mut v.t_parts, x.clone());
            split(&simplify(&normalize(x, sig)?), true, dom, sig, &mut v.t_parts)?;
        }
        for x in &pair.f {
            push_new(&mut v.f_parts, x.clone());
            split(&simplify(&normalize(x, sig)?), false, dom, sig, &mut v.f_parts)?;
        }
        Ok(v)
    }

    fn boxes_t(&self) -> impl Iterator<Item = (&Term, Term)> {
        self.t_parts.iter().filter_map(|x| as_box(x).map(|a| (x, simplify(a))))
    }

    fn dias_t(&self) -> impl Iterator<Item = (&Term, Term)> {
        self.t_parts.iter().filter_map(|x| as_dia(x).map(|a| (x, a)))
    }

    fn boxes_f(&self) -> impl Iterator<Item = (&Term, Term)> {
        self.f_parts.iter().filter_map(|x| as_box(x).map(|a| (x, simplify(a))))
    }

    fn dias_f(&self) -> impl Iterator<Item = (&Term, Term)> {
        self.f_parts.iter().filter_map(|x| as_dia(x).map(|a| (x, a)))
    }
}

/// Conjuncts (theory side) or disjuncts (cotheory side), with universal
/// resp. existential statements unfolded over the elements `0..=dom`.
fn split(t: &Term, conj: bool, dom: usize, sig: &Signature, out: &mut Vec<Term>) -> Result<()> {
    let unfold = if conj { as_q(t) } else { as_cyl(t).map(|(k, x)| (k, x.clone())) };
    match (t, conj) {
        (Term::And(a, b), true) | (Term::Or(a, b), false) => {
            split(a, conj, dom, sig, out)?;
            split(b, conj, dom, sig, out)?;
        }
        _ => {
            if !push_new(out, t.clone()) {
                return Ok(());
            }
            if let Some((k, x)) = unfold {
                for j in 0..=dom {
                    let inst = simplify(&normalize(&Term::subst(k, j, x.clone()), sig)?);
                    split(&inst, conj, dom, sig, out)?;
                }
            }
        }
    }
    Ok(())
}

/// Child seeds for `◊a ∈ T` and `□b ∈ F`, plus a serial child when the
/// logic needs one and no other child exists.
pub fn modal_seeds(pair: &TheoryPair, logic: Logic, sig: &Signature) -> Result<Vec<(String, Vec<Term>, Vec<Term>)>> {
    let view = ModalView::of(pair, sig)?;
    let carry = logic.transitive();
    let mut boxes_t = Vec::new();
    for (x, a) in view.boxes_t() {
        push_new(&mut boxes_t, a);
        if carry {
            push_new(&mut boxes_t, x.clone());
        }
    }
    let mut dias_f = Vec::new();
    for (x, b) in view.dias_f() {
        push_new(&mut dias_f, b);
        if carry {
            push_new(&mut dias_f, x.clone());
        }
    }
    let mut out = Vec::new();
    for (x, a) in view.dias_t() {
        let mut st = vec![a];
        st.extend(boxes_t.iter().cloned());
        out.push((x.to_string(), dedup(st), dias_f.clone()));
    }
    for (x, b) in view.boxes_f() {
        let mut sf = vec![b];
        sf.extend(dias_f.iter().cloned());
        out.push((x.to_string(), boxes_t.clone(), dedup(sf)));
    }
    if out.is_empty() && logic.serial() {
        out.push(("serial".to_string(), boxes_t, dias_f));
    }
    Ok(out)
}

fn dedup(v: Vec<Term>) -> Vec<Term> {
    let mut out = Vec::new();
    for t in v {
        push_new(&mut out, t);
    }
    out
}

/// Saturated children of `pair`, one per box or diamond obligation.
pub fn modal_witness_step(
    pair: &TheoryPair,
    x1: &BTreeSet<String>,
    x2: &BTreeSet<String>,
    cfg: &SaturationConfig,
    supply: &mut IndexSupply,
    sig: &Signature,
) -> Result<ModalStep> {
    let common: BTreeSet<String> = x1.intersection(x2).cloned().collect();
    let mut step = ModalStep::default();
    for (origin, st, sf) in modal_seeds(pair, cfg.logic, sig)? {
        let covered = step.children.iter().any(|c| {
            st.iter().all(|a| c.pair.in_t(a)) && sf.iter().all(|b| c.pair.in_f(b))
        });
        if covered {
            continue;
        }
        if let Some(c) = separable(&st, &sf, &common, cfg, sig)? {
            step.claim_violations.push(format!("{origin}: child seed separated by {c}"));
            continue;
        }
        let mut child = saturate(&st, &sf, x1, x2, cfg, supply, sig)?;
        child.stage = pair.stage + 1;
        child.dilation_level = child.dilation_level.max(pair.dilation_level);
        step.children.push(ModalChild { origin, pair: child });
    }
    Ok(step)
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WorldInfo {
    pub parent: Option<usize>,
    pub origin: String,
    pub pair: TheoryPair,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelReport {
    pub domain_bound: usize,
    pub gamma: Vec<(String, bool)>,
    pub delta: Vec<(String, bool)>,
    pub violations: Vec<String>,
    pub frame_ok: bool,
    pub self_loops_added: usize,
    pub monotone: BTreeMap<String, bool>,
    /// For common generators: whether the theory side and cotheory side readings agree.
    pub psi_agreement: BTreeMap<String, bool>,
    pub claim_violations: Vec<String>,
}

impl ModelReport {
    pub fn passed(&self) -> bool {
        self.gamma.iter().all(|g| g.1) && self.delta.iter().all(|d| !d.1) && self.violations.is_empty() && self.frame_ok
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BuiltModel {
    #[serde(skip)]
    pub system: KripkeSystem,
    #[serde(skip)]
    pub valuation: Valuation,
    pub width: usize,
    pub world: usize,
    pub tuple: Vec<usize>,
    pub worlds: Vec<WorldInfo>,
    pub report: ModelReport,
}

/// Kripke system and valuation from saturated pairs, with the evaluation report at the root.
#[allow(clippy::too_many_arguments)]
pub fn build_countermodel(
    gamma: &[Term],
    delta: &[Term],
    x1: &BTreeSet<String>,
    x2: &BTreeSet<String>,
    cfg: &SaturationConfig,
    supply: &mut IndexSupply,
    sig: &Signature,
) -> Result<BuiltModel> {
    cfg.validate()?;
    let mut seeds: Vec<Term> = gamma.to_vec();
    seeds.extend(delta.iter().cloned());
    let width = width_of(&seeds, sig)?;
    let height = cfg.tree_depth.unwrap_or_else(|| seeds.iter().map(|t| t.modal_depth()).max().unwrap_or(0) + 1);

    let root = saturate(gamma, delta, x1, x2, cfg, supply, sig)?;
    let mut worlds = vec![WorldInfo { parent: None, origin: "root".into(), pair: root }];
    let mut claim_violations = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(w) = queue.pop_front() {
        if worlds[w].pair.stage >= height {
            continue;
        }
        let step = modal_witness_step(&worlds[w].pair, x1, x2, cfg, supply, sig)?;
        claim_violations.extend(step.claim_violations.into_iter().map(|v| format!("world {w}: {v}")));
        for c in step.children {
            worlds.push(WorldInfo { parent: Some(w), origin: c.origin, pair: c.pair });
            queue.push_back(worlds.len() - 1);
        }
    }

    let n = worlds.len();
    let mut edges = BTreeSet::new();
    let views = worlds.iter().map(|w| ModalView::of(&w.pair, sig)).collect::<Result<Vec<_>>>()?;
    for a in 0..n {
        for b in 0..n {
            if related(&worlds[a].pair, &views[a], &worlds[b].pair, &views[b], cfg.logic) {
                edges.insert((a, b));
            }
        }
    }
    // a tree edge always satisfies the transfer conditions; kept explicit in case of bound artifacts
    for (i, w) in worlds.iter().enumerate() {
        if let Some(p) = w.parent {
            edges.insert((p, i));
        }
    }
    let logic = cfg.logic;
    if logic.reflexive() {
        edges.extend((0..n).map(|w| (w, w)));
    }
    if logic.transitive() {
        edges = transitive_closure(n, &edges);
    }
    let mut self_loops_added = 0;
    if logic.serial() {
        for w in 0..n {
            if !edges.iter().any(|&(a, _)| a == w) {
                edges.insert((w, w));
                self_loops_added += 1;
            }
        }
    }

    let levels: Vec<usize> = worlds.iter().map(|w| w.pair.dilation_level).collect();
    let m = levels.iter().max().copied().unwrap_or(0) + 1;
    let system = KripkeSystem {
        worlds: (0..n).map(|i| format!("w{i}")).collect(),
        edges,
        domain: (0..m).map(|i| format!("d{i}")).collect(),
        world_domain: levels.iter().map(|&l| (0..=l).collect()).collect(),
    };
    let violations: Vec<String> = system.validate().iter().map(|v| v.to_string()).collect();
    if !violations.is_empty() {
        return Err(Error::Internal(format!("built system is invalid: {}", violations.join("; "))));
    }
    let alg = ConcreteAlgebra::new(&system, width)?;

    let mut gens: BTreeSet<String> = x1.union(x2).cloned().collect();
    for s in &seeds {
        gens.extend(s.generators());
    }
    let mut valuation = Valuation::new();
    let mut monotone = BTreeMap::new();
    let mut psi_agreement = BTreeMap::new();
    for g in &gens {
        let dims = sig.dims(g)?.clone();
        let theory_side = x1.contains(g);
        let psi1 = psi(&alg, &worlds, g, &dims, true, cfg, sig)?;
        let image = if theory_side { psi1.clone() } else { psi(&alg, &worlds, g, &dims, false, cfg, sig)? };
        if theory_side && x2.contains(g) {
            let psi2 = psi(&alg, &worlds, g, &dims, false, cfg, sig)?;
            psi_agreement.insert(g.clone(), psi2 == psi1);
        }
        monotone.insert(g.clone(), monotone_check(&system, &image));
        valuation.insert(g.clone(), image);
    }

    let tuple: Vec<usize> = (0..width).collect();
    let sp = Space::new(&system, width);
    let at_root = |t: &Term| -> Result<bool> { Ok(eval(t, &system, &valuation, width)?.get(&sp, 0, &tuple)) };
    let gamma_r = gamma.iter().map(|a| Ok((a.to_string(), at_root(a)?))).collect::<Result<Vec<_>>>()?;
    let delta_r = delta.iter().map(|a| Ok((a.to_string(), at_root(a)?))).collect::<Result<Vec<_>>>()?;
    let frame_ok = logic.conditions().admits(n, &system.edges);
    let report = ModelReport {
        domain_bound: cfg.domain_bound,
        gamma: gamma_r,
        delta: delta_r,
        violations,
        frame_ok,
        self_loops_added,
        monotone,
        psi_agreement,
        claim_violations,
    };
    Ok(BuiltModel { system, valuation, width, world: 0, tuple, worlds, report })
}

/// `wRw'`: stage and dilation order plus the box and diamond transfer conditions.
/// Transitive logics also carry the modal formulas themselves, as the child seeds do.
fn related(w: &TheoryPair, wv: &ModalView, v: &TheoryPair, vv: &ModalView, logic: Logic) -> bool {
    if w.stage > v.stage || w.dilation_level > v.dilation_level {
        return false;
    }
    let carry = logic.transitive();
    let boxes = wv.boxes_t().all(|(x, a)| vv.t_parts.contains(&a) && (!carry || vv.t_parts.contains(x)));
    let dias = wv.dias_f().all(|(x, b)| vv.f_parts.contains(&b) && (!carry || vv.f_parts.contains(x)));
    boxes && dias
}

/// Image of a generator: `s_x g` entailed by `T_w`, or (cotheory side) `s_x g` not entailing `F_w`.
fn psi(
    alg: &ConcreteAlgebra,
    worlds: &[WorldInfo],
    g: &str,
    dims: &IndexSet,
    theory_side: bool,
    cfg: &SaturationConfig,
    sig: &Signature,
) -> Result<crate::kripke::AlgebraElement> {
    let mut cache: HashMap<(usize, Vec<usize>), bool> = HashMap::new();
    let mut err = None;
    let gen = Term::gen(g);
    let e = alg.from_fn(|w, tuple| {
        let key: Vec<usize> = dims.iter().map(|&i| tuple[i]).collect();
        if let Some(&v) = cache.get(&(w, key.clone())) {
            return v;
        }
        let tau = FiniteTransformation::from_pairs(dims.iter().map(|&i| (i, tuple[i])));
        let r = apply_s_tau(&tau, &gen, sig).and_then(|sx| {
            let p = &worlds[w].pair;
            if theory_side {
                Ok(consequence(&p.t, &[sx], cfg.logic, cfg.domain_bound, 0, sig)?.holds)
            } else {
                Ok(!consequence(&[sx], &p.f, cfg.logic, cfg.domain_bound, 0, sig)?.holds)
            }
        });
        let v = match r {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                false
            }
        };
        cache.insert((w, key), v);
        v
    });
    match err {
        Some(e) => Err(e),
        None => Ok(e),
    }
}

/// Witness indices are fresh: none occurs in an earlier formula of the trace.
pub fn witnesses_fresh(pair: &TheoryPair, sig: &Signature) -> Result<bool> {
    let mut seen = all_indices(&pair.seed_t, sig)?;
    seen.extend(all_indices(&pair.seed_f, sig)?);
    for e in &pair.log {
        if let Some(i) = e.witness_index {
            if seen.contains(&i) {
                return Ok(false);
            }
        }
        seen.extend(all_indices(std::slice::from_ref(&e.term), sig)?);
        if let Some(w) = &e.witness {
            seen.extend(all_indices(std::slice::from_ref(w), sig)?);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Term {
        Term::gen("p")
    }
    fn q() -> Term {
        Term::gen("q")
    }
    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }
    fn prop_sig() -> Signature {
        Signature::new().with("p", []).with("q", []).with("r", [])
    }

    #[test]
    fn separable_examples() {
        let sig = prop_sig();
        let cfg = SaturationConfig::default();
        let w = separable(&[Term::and(p(), q())], &[Term::or(p(), Term::gen("r"))], &set(&["p"]), &cfg, &sig).unwrap();
        assert_eq!(w, Some(p()));
        let cfg2 = SaturationConfig { depth: 2, ..cfg.clone() };
        assert_eq!(separable(&[p()], &[q()], &set(&[]), &cfg2, &sig).unwrap(), None);
        assert_eq!(separable(&[p()], &[p()], &set(&["p"]), &cfg, &sig).unwrap(), Some(p()));
    }

    #[test]
    fn separable_found_by_enumeration_for_quantified_input() {
        let sig = Signature::new().with("p", [0]);
        let cfg = SaturationConfig::default();
        let c = separable(&[p()], &[Term::cyl(0, p())], &set(&["p"]), &cfg, &sig).unwrap().unwrap();
        assert!(consequence(&[p()], &[c.clone()], Logic::K, 2, 0, &sig).unwrap().holds);
        assert!(consequence(&[c], &[Term::cyl(0, p())], Logic::K, 2, 0, &sig).unwrap().holds);
    }

    #[test]
    fn saturate_adds_fresh_cylinder_witness() {
        let sig = Signature::new().with("p", [0]).with("q", []);
        let cfg = SaturationConfig::default();
        let mut supply = IndexSupply::new(0);
        let pair =
            saturate(&[Term::cyl(0, p())], &[q()], &set(&["p"]), &set(&["q"]), &cfg, &mut supply, &sig).unwrap();
        assert!(pair.in_t(&Term::cyl(0, p())));
        let w = pair.t.iter().find_map(|t| match t {
            Term::Subst(0, i, b) if **b == p() => Some(*i),
            _ => None,
        });
        let i = w.expect("witness present");
        assert_ne!(i, 0);
        assert!(witnesses_fresh(&pair, &sig).unwrap());
    }

    #[test]
    fn saturate_rejects_separable_input() {
        let sig = prop_sig();
        let mut supply = IndexSupply::new(0);
        let r = saturate(&[p()], &[p()], &set(&["p"]), &set(&["p"]), &SaturationConfig::default(), &mut supply, &sig);
        assert!(matches!(r, Err(Error::Separable(_))));
    }

    #[test]
    fn saturate_dia_p_against_p() {
        let sig = prop_sig();
        let cfg = SaturationConfig::default();
        let mut supply = IndexSupply::new(0);
        let x = set(&["p"]);
        let pair = saturate(&[Term::dia(p())], &[p()], &x, &x, &cfg, &mut supply, &sig).unwrap();
        assert!(!pair.in_t(&p()));
        for (t, f) in pair.prefixes() {
            assert!(separable(&t, &f, &x, &cfg, &sig).unwrap().is_none());
        }
        let rep = check_saturated(&pair, &pair.universe(), &x, &x, &cfg, &sig).unwrap();
        for n in [2, 3, 4] {
            assert!(rep.condition(n).unwrap().passed, "{n}: {rep:?}");
        }
    }

    #[test]
    fn check_saturated_detects_violations() {
        let sig = prop_sig();
        let cfg = SaturationConfig::default();
        let x = set(&["p", "q"]);
        let mk = |t: Vec<Term>, f: Vec<Term>| TheoryPair {
            seed_t: t.clone(),
            seed_f: f.clone(),
            t,
            f,
            stage: 0,
            dilation_level: 0,
            log: Vec::new(),
        };
        let clash = mk(vec![p()], vec![p()]);
        let rep = check_saturated(&clash, &[p()], &x, &x, &cfg, &sig).unwrap();
        assert!(!rep.condition(2).unwrap().passed);
        let or = Term::or(p(), q());
        let bad = mk(vec![or.clone()], vec![]);
        let rep = check_saturated(&bad, &[or, p(), q()], &x, &x, &cfg, &sig).unwrap();
        assert!(!rep.condition(3).unwrap().passed);
    }

    #[test]
    fn modal_seeds_follow_the_claim() {
        let r = Term::gen("r");
        let pair = TheoryPair {
            seed_t: vec![],
            seed_f: vec![],
            t: vec![Term::dia(p()), Term::nec(q())],
            f: vec![Term::dia(r.clone())],
            stage: 0,
            dilation_level: 0,
            log: Vec::new(),
        };
        let seeds = modal_seeds(&pair, Logic::K, &prop_sig()).unwrap();
        assert_eq!(seeds.len(), 1);
        assert_eq!(seeds[0].1, vec![p(), q()]);
        assert_eq!(seeds[0].2, vec![r]);
        let empty = TheoryPair { t: vec![p()], f: vec![q()], ..pair.clone() };
        assert!(modal_seeds(&empty, Logic::K, &prop_sig()).unwrap().is_empty());
        assert_eq!(modal_seeds(&empty, Logic::D, &prop_sig()).unwrap().len(), 1);
    }

    #[test]
    fn countermodel_dia_p() {
        let sig = prop_sig();
        let cfg = SaturationConfig::default();
        let x = set(&["p"]);
        let mut supply = IndexSupply::new(0);
        let m = build_countermodel(&[Term::dia(p())], &[p()], &x, &x, &cfg, &mut supply, &sig).unwrap();
        assert!(m.report.passed(), "{:?}", m.report);
        assert_eq!(m.system.num_worlds(), 2);
        let sp = Space::new(&m.system, 0);
        assert!(!m.valuation["p"].get(&sp, 0, &[]));
        assert!(m.valuation["p"].get(&sp, 1, &[]));
        assert!(m.system.edges.contains(&(0, 1)));
    }

    #[test]
    fn countermodel_cylinder() {
        let sig = Signature::new().with("p", [0]);
        let cfg = SaturationConfig { domain_bound: 2, ..Default::default() };
        let x = set(&["p"]);
        let mut supply = IndexSupply::new(0);
        let m = build_countermodel(&[Term::cyl(0, p())], &[p()], &x, &x, &cfg, &mut supply, &sig).unwrap();
        assert!(m.report.passed(), "{:?}", m.report);
        assert_eq!(m.system.world_domain[0].len(), 2);
        let sp = Space::new(&m.system, 1);
        let at = |d: usize| m.valuation["p"].get(&sp, 0, &[d]);
        assert!(!at(m.tuple[0]));
        assert!(at(1 - m.tuple[0]));
    }

    #[test]
    fn countermodel_independent_atoms() {
        let sig = prop_sig();
        let mut supply = IndexSupply::new(0);
        let m = build_countermodel(&[p()], &[q()], &set(&["p"]), &set(&["q"]), &SaturationConfig::default(), &mut supply, &sig)
            .unwrap();
        assert!(m.report.passed());
        assert_eq!(m.system.num_worlds(), 1);
    }

    #[test]
    fn countermodels_respect_frame_conditions() {
        let sig = prop_sig();
        let x = set(&["p", "q"]);
        let cases = [
            (Logic::D, vec![Term::nec(p())], vec![q()]),
            (Logic::T, vec![Term::dia(p())], vec![q()]),
            (Logic::K4, vec![Term::nec(p())], vec![Term::nec(Term::nec(q()))]),
            (Logic::S4, vec![Term::dia(p())], vec![Term::nec(Term::dia(p()))]),
        ];
        for (logic, g, d) in cases {
            let cfg = SaturationConfig { logic, ..Default::default() };
            let mut supply = IndexSupply::new(0);
            let m = build_countermodel(&g, &d, &x, &x, &cfg, &mut supply, &sig).unwrap();
            assert!(m.report.frame_ok, "{logic}");
            assert!(m.report.passed(), "{logic}: {:?}", m.report);
            for &(a, b) in &m.system.edges {
                assert!(m.worlds[a].pair.dilation_level <= m.worlds[b].pair.dilation_level);
            }
        }
    }
}
