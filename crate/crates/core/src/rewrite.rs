//! Oriented normalization, the identity catalogue, and a bounded semantic
//! equality oracle over small Kripke systems.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kripke::{
    enumerate_systems, ConcreteAlgebra, FrameConditions, KripkeSystem, Valuation, ValuationFile,
};
use crate::par::{self, Exec};
use crate::random::{default_signature, random_term, TermShape};
use crate::syntax::{free_indices, Index, IndexSet, Signature, Term};
use crate::transform::{apply_s_tau, FiniteTransformation};

/// Passes allowed before `normalize` gives up.
pub const REWRITE_LIMIT: usize = 200_000;

pub fn normalize(t: &Term, sig: &Signature) -> Result<Term> {
    let mut fuel = REWRITE_LIMIT;
    norm(t, sig, &mut fuel)
}

fn norm(t: &Term, sig: &Signature, fuel: &mut usize) -> Result<Term> {
    let rebuilt = match t {
        Term::Zero | Term::One | Term::Gen(_) => t.clone(),
        Term::Not(a) => Term::Not(Box::new(norm(a, sig, fuel)?)),
        Term::Or(a, b) => Term::Or(Box::new(norm(a, sig, fuel)?), Box::new(norm(b, sig, fuel)?)),
        Term::And(a, b) => Term::And(Box::new(norm(a, sig, fuel)?), Box::new(norm(b, sig, fuel)?)),
        Term::Nec(a) => Term::Nec(Box::new(norm(a, sig, fuel)?)),
        Term::Cyl(i, a) => Term::Cyl(*i, Box::new(norm(a, sig, fuel)?)),
        Term::Subst(u, l, a) => Term::Subst(*u, *l, Box::new(norm(a, sig, fuel)?)),
    };
    match root_rule(&rebuilt, sig)? {
        Some(next) => {
            if *fuel == 0 {
                return Err(Error::RewriteLimit(REWRITE_LIMIT));
            }
            *fuel -= 1;
            norm(&next, sig, fuel)
        }
        None => Ok(rebuilt),
    }
}

fn complementary(a: &Term, b: &Term) -> bool {
    matches!(a, Term::Not(x) if **x == *b) || matches!(b, Term::Not(x) if **x == *a)
}

/// One rewrite at the root, assuming the children are already normal.
fn root_rule(t: &Term, sig: &Signature) -> Result<Option<Term>> {
    use Term::*;
    let fv = |x: &Term| free_indices(x, sig);
    let r = match t {
        Not(a) => match &**a {
            Zero => Some(One),
            One => Some(Zero),
            Not(x) => Some((**x).clone()),
            _ => None,
        },
        Or(a, b) => match (&**a, &**b) {
            (Zero, x) | (x, Zero) => Some(x.clone()),
            (One, _) | (_, One) => Some(One),
            (x, y) if x == y => Some(x.clone()),
            (x, y) if complementary(x, y) => Some(One),
            (x, y) if x > y => Some(Term::or(y.clone(), x.clone())),
            _ => None,
        },
        And(a, b) => match (&**a, &**b) {
            (One, x) | (x, One) => Some(x.clone()),
            (Zero, _) | (_, Zero) => Some(Zero),
            (x, y) if x == y => Some(x.clone()),
            (x, y) if complementary(x, y) => Some(Zero),
            (x, y) if x > y => Some(Term::and(y.clone(), x.clone())),
            _ => None,
        },
        Nec(a) if **a == One => Some(One),
        Cyl(i, a) => {
            let i = *i;
            match &**a {
                Zero => Some(Zero),
                One => Some(One),
                x if !fv(x)?.contains(&i) => Some(x.clone()),
                Cyl(j, x) if *j < i => Some(Term::cyl(*j, Term::cyl(i, (**x).clone()))),
                And(x, y) if !fv(x)?.contains(&i) => {
                    Some(Term::and((**x).clone(), Term::cyl(i, (**y).clone())))
                }
                And(x, y) if !fv(y)?.contains(&i) => {
                    Some(Term::and((**y).clone(), Term::cyl(i, (**x).clone())))
                }
                _ => None,
            }
        }
        Subst(u, l, a) => {
            let (u, l) = (*u, *l);
            if u == l || !fv(a)?.contains(&u) {
                return Ok(Some((**a).clone()));
            }
            let s = |x: &Term| Term::subst(u, l, x.clone());
            match &**a {
                Not(x) => Some(Term::not(s(x))),
                Or(x, y) => Some(Term::or(s(x), s(y))),
                And(x, y) => Some(Term::and(s(x), s(y))),
                Nec(x) => Some(Term::nec(s(x))),
                Cyl(k, x) if *k != u && *k != l => Some(Term::cyl(*k, s(x))),
                // s(u<-l) s(u<-m) x = s(u<-m) x for u != m
                Subst(u2, m, x) if *u2 == u && *m != u => Some(Term::subst(u, *m, (**x).clone())),
                // s(u<-l) s(l<-u) x = s(u<-l) x
                Subst(l2, u2, x) if *l2 == l && *u2 == u => Some(Term::subst(u, l, (**x).clone())),
                // s(u<-l) s(k<-u) x = s(k<-l) x when u is not free in x
                Subst(k, u2, x) if *u2 == u && *k != u && !fv(x)?.contains(&u) => {
                    Some(Term::subst(*k, l, (**x).clone()))
                }
                Subst(c, d, x) if u != *c && u != *d && *c != l && (*c, *d) < (u, l) => {
                    Some(Term::subst(*c, *d, Term::subst(u, l, (**x).clone())))
                }
                _ => None,
            }
        }
        _ => None,
    };
    Ok(r)
}

/// Bounds for the semantic equality oracle.
#[derive(Debug, Clone, Serialize)]
pub struct Bounds {
    pub max_worlds: usize,
    pub max_domain: usize,
    pub max_indices: usize,
    /// Largest number of (system, valuation) pairs checked exhaustively.
    pub budget: u64,
    /// Samples drawn when the exhaustive count exceeds the budget. Zero turns
    /// an over-budget instance into an error.
    pub samples: usize,
    pub seed: u64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { max_worlds: 2, max_domain: 2, max_indices: 3, budget: 4096, samples: 256, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Witness {
    pub system: String,
    pub valuation: ValuationFile,
    pub world: String,
    pub tuple: Vec<String>,
    pub left: bool,
    pub right: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EqOutcome {
    pub equal: bool,
    pub exhaustive: bool,
    pub checked: u64,
    pub witness: Option<Witness>,
}

fn difference(
    alg: &ConcreteAlgebra<'_>,
    t: &Term,
    u: &Term,
    val: &Valuation,
) -> Result<Option<Witness>> {
    let a = alg.eval(t, val)?;
    let b = alg.eval(u, val)?;
    if a == b {
        return Ok(None);
    }
    let k = alg.system;
    for (w, codes) in alg.space.valid.iter().enumerate() {
        for &c in codes {
            if a.tables[w][c] != b.tables[w][c] {
                return Ok(Some(Witness {
                    system: k.to_json()?,
                    valuation: ValuationFile::from_valuation(k, val, alg.width()),
                    world: k.worlds[w].clone(),
                    tuple: alg.space.decode(c).iter().map(|&d| k.domain[d].clone()).collect(),
                    left: a.tables[w][c],
                    right: b.tables[w][c],
                }));
            }
        }
    }
    Err(Error::Internal("elements differ outside valid tuples".into()))
}

pub fn eq_at_bound(t: &Term, u: &Term, sig: &Signature, bounds: &Bounds) -> Result<EqOutcome> {
    eq_at_bound_with(t, u, sig, bounds, Exec::default())
}

pub fn eq_at_bound_with(
    t: &Term,
    u: &Term,
    sig: &Signature,
    bounds: &Bounds,
    exec: Exec,
) -> Result<EqOutcome> {
    if bounds.max_worlds == 0 || bounds.max_domain == 0 {
        return Err(Error::InvalidBounds("need at least one world and one element".into()));
    }
    let mut fv = free_indices(t, sig)?;
    fv.extend(free_indices(u, sig)?);
    if let Some(&i) = fv.iter().next_back() {
        if i >= bounds.max_indices {
            return Err(Error::InvalidBounds(format!(
                "free index {i} outside 0..{}",
                bounds.max_indices
            )));
        }
    }
    let width =
        bounds.max_indices.max(sig.required_width(t)?).max(sig.required_width(u)?).max(1);
    let mut gens = t.generators();
    gens.extend(u.generators());
    let dims: Vec<(String, IndexSet)> =
        gens.iter().map(|g| Ok((g.clone(), sig.dims(g)?.clone()))).collect::<Result<_>>()?;

    let systems = enumerate_systems(bounds.max_worlds, bounds.max_domain, FrameConditions::default());
    let algebras: Vec<ConcreteAlgebra<'_>> =
        systems.iter().map(|k| ConcreteAlgebra::new(k, width)).collect::<Result<_>>()?;
    let bits: Vec<u32> = algebras
        .iter()
        .map(|alg| dims.iter().map(|(_, d)| alg.restricted_bits(d)).sum())
        .collect();
    let total: u64 = bits
        .iter()
        .map(|&b| if b >= 63 { u64::MAX } else { 1u64 << b })
        .fold(0u64, |a, b| a.saturating_add(b));

    if total <= bounds.budget {
        let mut offsets = Vec::with_capacity(bits.len());
        let mut acc = 0u64;
        for &b in &bits {
            offsets.push(acc);
            acc += 1u64 << b;
        }
        let found = par::find_first(exec, total as usize, |n| {
            let s = offsets.partition_point(|&o| o <= n as u64) - 1;
            let code = n as u64 - offsets[s];
            let alg = &algebras[s];
            let mut val = Valuation::new();
            let mut shift = 0u32;
            for (g, d) in &dims {
                let e = alg.restricted_from_bits(d, |k| code >> (shift + k as u32) & 1 == 1);
                shift += alg.restricted_bits(d);
                val.insert(g.clone(), e);
            }
            difference(alg, t, u, &val).transpose()
        });
        return match found {
            Some((_, w)) => {
                Ok(EqOutcome { equal: false, exhaustive: true, checked: total, witness: Some(w?) })
            }
            None => Ok(EqOutcome { equal: true, exhaustive: true, checked: total, witness: None }),
        };
    }
    if bounds.samples == 0 {
        return Err(Error::BudgetExceeded(format!(
            "{total} instances exceed the budget of {}",
            bounds.budget
        )));
    }
    let found = par::find_first(exec, bounds.samples, |n| {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(bounds.seed, n as u64));
        let alg = &algebras[rng.gen_range(0..algebras.len())];
        let mut val = Valuation::new();
        for (g, d) in &dims {
            val.insert(g.clone(), alg.random_restricted(&mut rng, d));
        }
        difference(alg, t, u, &val).transpose()
    });
    match found {
        Some((n, w)) => Ok(EqOutcome {
            equal: false,
            exhaustive: false,
            checked: n as u64 + 1,
            witness: Some(w?),
        }),
        None => Ok(EqOutcome {
            equal: true,
            exhaustive: false,
            checked: bounds.samples as u64,
            witness: None,
        }),
    }
}

/// Per-trial seed derived from a base seed (splitmix64 finalizer).
pub fn trial_seed(base: u64, trial: u64) -> u64 {
    let mut z = base ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const AXIOMS: [&str; 14] = [
    "ax1", "ax2", "ax3", "ax4", "ax5", "ax6", "ax7", "ax8", "ax9", "ax10", "ax11", "ax12", "ax13",
    "ax14",
];

pub const DERIVED: [&str; 12] = [
    "L1", "L2", "L3", "L4", "L5", "L6", "L7", "tau-i", "tau-ii", "tau-iii", "tau-iv",
    "tau-v",
];

pub const AX1_AS_PRINTED: &str = "ax1-as-printed";

pub fn identity_names() -> Vec<&'static str> {
    AXIOMS.iter().chain(DERIVED.iter()).copied().chain([AX1_AS_PRINTED]).collect()
}

/// Which reading of the substitution notation an identity was encoded with.
pub fn reading(name: &str) -> &'static str {
    match name {
        "ax1" => "normality: box 1 = 1 and box(x and y) = box x and box y",
        "ax1-as-printed" => "box(-x or y) <= -box x or -box y, as an inequality",
        "ax3" => "x <= c_i x, encoded as x or c_i x = c_i x",
        "L5" | "L7" | "tau-i" | "tau-ii" | "tau-iii" | "tau-iv" | "tau-v" => {
            "s_tau x reads x at the tuple precomposed with tau"
        }
        "L6" => "s^mu_nu = s(mu0<-nu0) s(mu1<-nu1) ..., outermost first",
        _ => "s^i_j overwrites coordinate i with the value at coordinate j",
    }
}

/// Metavariables and index range for one instantiation.
pub struct InstanceCtx<'a> {
    pub x: Term,
    pub y: Term,
    pub sig: &'a Signature,
    /// Indices written by the identity are drawn from `0..index_range`.
    pub index_range: usize,
}

fn leq_eq(a: Term, b: Term) -> (Term, Term) {
    (Term::or(a, b.clone()), b)
}

fn subst_seq(overs: &[Index], froms: &[Index], t: Term) -> Term {
    overs.iter().zip(froms).rev().fold(t, |acc, (&o, &f)| Term::subst(o, f, acc))
}

fn distinct<R: Rng + ?Sized>(rng: &mut R, pool: &[Index], k: usize) -> Vec<Index> {
    pool.choose_multiple(rng, k).copied().collect()
}

fn random_transformation<R: Rng + ?Sized>(rng: &mut R, range: usize) -> FiniteTransformation {
    let n = rng.gen_range(1..=2.min(range));
    let pool: Vec<Index> = (0..range).collect();
    let dom = distinct(rng, &pool, n);
    FiniteTransformation::from_pairs(dom.into_iter().map(|i| (i, rng.gen_range(0..range))))
}

fn random_subset<R: Rng + ?Sized>(rng: &mut R, range: usize) -> IndexSet {
    let pool: Vec<Index> = (0..range).collect();
    let k = rng.gen_range(1..=2.min(range));
    distinct(rng, &pool, k).into_iter().collect()
}

/// Indices outside `avoid`, smallest first.
fn outside(avoid: &IndexSet, k: usize) -> Vec<Index> {
    (0..).filter(|i| !avoid.contains(i)).take(k).collect()
}

/// Instantiates `name` with random indices. `None` means the drawn indices
/// violate the identity's side condition.
pub fn instantiate<R: Rng + ?Sized>(
    name: &str,
    rng: &mut R,
    ctx: &InstanceCtx<'_>,
) -> Result<Option<Vec<(Term, Term)>>> {
    let n = ctx.index_range.max(1);
    let x = ctx.x.clone();
    let y = ctx.y.clone();
    let (i, j, k, l) =
        (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
    let s = Term::subst;
    let c = Term::cyl;
    let stau = |tau: &FiniteTransformation, t: &Term| apply_s_tau(tau, t, ctx.sig);
    let eqs = match name {
        "ax1" => vec![
            (Term::nec(Term::and(x.clone(), y.clone())), Term::and(Term::nec(x), Term::nec(y))),
            (Term::nec(Term::One), Term::One),
        ],
        "ax1-as-printed" => vec![leq_eq(
            Term::nec(Term::or(Term::not(x.clone()), y.clone())),
            Term::or(Term::not(Term::nec(x)), Term::not(Term::nec(y))),
        )],
        "ax2" => vec![(c(j, Term::Zero), Term::Zero)],
        "ax3" => vec![leq_eq(x.clone(), c(i, x))],
        "ax4" => vec![(
            c(i, Term::and(x.clone(), c(i, y.clone()))),
            Term::and(c(i, x), c(i, y)),
        )],
        "ax5" => vec![(c(i, Term::or(x.clone(), y.clone())), Term::or(c(i, x), c(i, y)))],
        "ax6" => vec![(c(i, c(j, x.clone())), c(j, c(i, x)))],
        "ax7" => vec![(s(i, i, x.clone()), x)],
        "ax8" => vec![
            (s(i, j, Term::or(x.clone(), y.clone())), Term::or(s(i, j, x.clone()), s(i, j, y.clone()))),
            (s(i, j, Term::and(x.clone(), y.clone())), Term::and(s(i, j, x.clone()), s(i, j, y))),
            (s(i, j, Term::not(x.clone())), Term::not(s(i, j, x))),
        ],
        "ax9" => vec![(s(i, j, c(i, x.clone())), c(i, x))],
        "ax10" => {
            if i == j {
                return Ok(None);
            }
            vec![(c(i, s(i, j, x.clone())), s(i, j, x))]
        }
        "ax11" => {
            if k == i || k == j {
                return Ok(None);
            }
            vec![(s(i, j, c(k, x.clone())), c(k, s(i, j, x)))]
        }
        "ax12" => vec![(c(i, s(j, i, x.clone())), c(j, s(i, j, x)))],
        "ax13" => {
            let set: BTreeSet<Index> = [i, j, k, l].into_iter().collect();
            if set.len() != 4 {
                return Ok(None);
            }
            vec![(s(j, i, s(l, k, x.clone())), s(l, k, s(j, i, x)))]
        }
        "ax14" => vec![(s(l, i, s(j, l, x.clone())), s(l, i, s(j, i, x)))],
        "L1" => vec![(s(i, j, s(k, i, c(i, x.clone()))), s(k, j, c(i, x)))],
        "L2" => {
            let cc = c(i, c(k, x));
            vec![(s(i, j, s(l, i, cc.clone())), s(k, j, s(l, k, cc)))]
        }
        "L3" => {
            if i == l {
                return Ok(None);
            }
            vec![(s(i, j, s(i, l, x.clone())), s(i, l, x))]
        }
        "L4" => vec![(s(i, j, s(j, i, x.clone())), s(i, j, x))],
        "L5" => {
            let tau = FiniteTransformation::replacement(i, j);
            vec![(stau(&tau, &x)?, s(i, j, x))]
        }
        "L6" => {
            let kk = rng.gen_range(1..=2.min(n));
            let pool: Vec<Index> = (0..n).collect();
            let mu = distinct(rng, &pool, kk);
            let nu: Vec<Index> = (0..kk).map(|_| rng.gen_range(0..n)).collect();
            let mut avoid = free_indices(&x, ctx.sig)?;
            avoid.extend(&mu);
            avoid.extend(&nu);
            let fresh = outside(&avoid, 2 * kk);
            // pi and rho are disjoint here or overlap, chosen at random
            let pi: Vec<Index> = fresh[..kk].to_vec();
            let rho: Vec<Index> = if rng.gen_bool(0.5) {
                fresh[kk..].to_vec()
            } else {
                let mut r = pi.clone();
                r.reverse();
                r
            };
            vec![(
                subst_seq(&pi, &nu, subst_seq(&mu, &pi, x.clone())),
                subst_seq(&rho, &nu, subst_seq(&mu, &rho, x)),
            )]
        }
        "L7" => {
            let tau = random_transformation(rng, n);
            let supp: Vec<Index> = tau.support().into_iter().collect();
            let mut mu = supp.clone();
            let rest: Vec<Index> = (0..n).filter(|a| !supp.contains(a)).collect();
            if mu.len() < 2 && !rest.is_empty() && rng.gen_bool(0.5) {
                mu.push(*rest.choose(rng).unwrap());
            }
            mu.shuffle(rng);
            if mu.is_empty() {
                mu.push(rng.gen_range(0..n));
            }
            let tmu: Vec<Index> = mu.iter().map(|&a| tau.apply(a)).collect();
            let mut avoid = free_indices(&x, ctx.sig)?;
            avoid.extend(&mu);
            avoid.extend(&tmu);
            let pi = outside(&avoid, mu.len());
            vec![(stau(&tau, &x)?, subst_seq(&pi, &tmu, subst_seq(&mu, &pi, x)))]
        }
        "tau-i" => {
            let tau = random_transformation(rng, n);
            vec![
                (
                    stau(&tau, &Term::or(x.clone(), y.clone()))?,
                    Term::or(stau(&tau, &x)?, stau(&tau, &y)?),
                ),
                (
                    stau(&tau, &Term::and(x.clone(), y.clone()))?,
                    Term::and(stau(&tau, &x)?, stau(&tau, &y)?),
                ),
                (stau(&tau, &Term::not(x.clone()))?, Term::not(stau(&tau, &x)?)),
                (stau(&tau, &Term::Zero)?, Term::Zero),
            ]
        }
        "tau-ii" => {
            let sigma = random_transformation(rng, n);
            let tau = random_transformation(rng, n);
            vec![(stau(&sigma.compose(&tau), &x)?, stau(&sigma, &stau(&tau, &x)?)?)]
        }
        "tau-iii" => {
            let sigma = random_transformation(rng, n);
            let gamma = random_subset(rng, n);
            let mut tau = sigma.clone();
            for &g in &gamma {
                tau = tau.update(g, rng.gen_range(0..n));
            }
            let cx = Term::cyl_all(&gamma, x);
            vec![(stau(&sigma, &cx)?, stau(&tau, &cx)?)]
        }
        "tau-iv" => {
            let sigma = random_transformation(rng, n);
            let fv = free_indices(&x, ctx.sig)?;
            let mut tau = sigma.clone();
            for a in (0..n).filter(|a| !fv.contains(a)) {
                if rng.gen_bool(0.5) {
                    tau = tau.update(a, rng.gen_range(0..n));
                }
            }
            vec![(stau(&sigma, &x)?, stau(&tau, &x)?)]
        }
        "tau-v" => {
            let tau = random_transformation(rng, n);
            let gamma = random_subset(rng, n);
            let mut delta: IndexSet = gamma.difference(&tau.support()).copied().collect();
            delta.extend(tau.support().into_iter().filter(|u| gamma.contains(&tau.apply(*u))));
            let images: BTreeSet<Index> = delta.iter().map(|&d| tau.apply(d)).collect();
            if images.len() != delta.len() {
                return Ok(None);
            }
            vec![(
                Term::cyl_all(&gamma, stau(&tau, &x)?),
                stau(&tau, &Term::cyl_all(&delta, x))?,
            )]
        }
        other => return Err(Error::UnknownIdentity(other.to_string())),
    };
    Ok(Some(eqs))
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IdentityCounterexample {
    pub trial: usize,
    pub left: String,
    pub right: String,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IdentityReport {
    pub id: String,
    pub reading: String,
    pub trials: usize,
    pub checked: usize,
    pub skipped: usize,
    pub exhaustive: usize,
    pub failures: usize,
    pub counterexample: Option<IdentityCounterexample>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

enum TrialResult {
    Skipped,
    Checked { exhaustive: bool, failure: Option<IdentityCounterexample> },
}

/// Checks a catalogued identity on `trials` instances that satisfy its side
/// conditions. Draws that violate them are skipped and counted; at most
/// `20 * trials` draws are attempted.
pub fn check_identity(id: &str, trials: usize, bounds: &Bounds) -> Result<IdentityReport> {
    check_identity_with(id, trials, bounds, Exec::default())
}

pub fn check_identity_with(
    id: &str,
    trials: usize,
    bounds: &Bounds,
    exec: Exec,
) -> Result<IdentityReport> {
    if !identity_names().contains(&id) {
        return Err(Error::UnknownIdentity(id.to_string()));
    }
    let sig = default_signature(bounds.max_indices);
    let gens: Vec<String> = sig.names().cloned().collect();
    let index_range = bounds.max_indices.max(4);
    let inner = Bounds { max_indices: index_range, ..bounds.clone() };
    let shape = TermShape { depth: 2, max_index: bounds.max_indices, ..Default::default() };

    let run = |n: usize| -> Result<TrialResult> {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(bounds.seed, n as u64));
        let ctx = InstanceCtx {
            x: random_term(&mut rng, &gens, &shape),
            y: random_term(&mut rng, &gens, &shape),
            sig: &sig,
            index_range,
        };
        let Some(eqs) = instantiate(id, &mut rng, &ctx)? else {
            return Ok(TrialResult::Skipped);
        };
        let mut exhaustive = true;
        for (l, r) in eqs {
            let b = Bounds { seed: trial_seed(bounds.seed ^ 0x5eed, n as u64), ..inner.clone() };
            let out = eq_at_bound_with(&l, &r, &sig, &b, Exec::Sequential)?;
            exhaustive &= out.exhaustive;
            if !out.equal {
                return Ok(TrialResult::Checked {
                    exhaustive,
                    failure: Some(IdentityCounterexample {
                        trial: n,
                        left: l.to_string(),
                        right: r.to_string(),
                        witness: out.witness,
                    }),
                });
            }
        }
        Ok(TrialResult::Checked { exhaustive, failure: None })
    };

    let mut report = IdentityReport {
        id: id.to_string(),
        reading: reading(id).to_string(),
        trials,
        checked: 0,
        skipped: 0,
        exhaustive: 0,
        failures: 0,
        counterexample: None,
    };
    let max_draws = trials.saturating_mul(20).max(1);
    let mut next = 0usize;
    while report.checked < trials && next < max_draws {
        let chunk = (trials - report.checked).min(max_draws - next);
        let results = par::map_range(exec, chunk, |d| run(next + d));
        next += chunk;
        for r in results {
            match r? {
                TrialResult::Skipped => report.skipped += 1,
                TrialResult::Checked { exhaustive, failure } => {
                    if report.checked == trials {
                        continue;
                    }
                    report.checked += 1;
                    report.exhaustive += exhaustive as usize;
                    if let Some(f) = failure {
                        report.failures += 1;
                        report.counterexample.get_or_insert(f);
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Per-axiom outcome of checking the axioms directly on one system's algebra.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AxiomRow {
    pub name: String,
    pub checked: usize,
    pub skipped: usize,
    pub failures: usize,
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub width: usize,
    pub rows: Vec<AxiomRow>,
}

impl AxiomReport {
    pub fn row(&self, name: &str) -> Option<&AxiomRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Checks the axioms on the algebra of `k` at `width`, with the metavariables
/// ranging over arbitrary (not necessarily monotone) elements.
pub fn check_axioms(
    k: &KripkeSystem,
    width: usize,
    trials: usize,
    include_printed: bool,
    seed: u64,
) -> Result<AxiomReport> {
    let alg = ConcreteAlgebra::new(k, width)?;
    let all: IndexSet = (0..width).collect();
    let sig = Signature::new().with("x", all.clone()).with("y", all);
    let mut names: Vec<&str> = AXIOMS.to_vec();
    if include_printed {
        names.push(AX1_AS_PRINTED);
    }
    let mut rows = Vec::new();
    for (a, name) in names.iter().enumerate() {
        let mut row = AxiomRow {
            name: name.to_string(),
            checked: 0,
            skipped: 0,
            failures: 0,
            counterexample: None,
        };
        for n in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed ^ a as u64, n as u64));
            let mut val = Valuation::new();
            val.insert("x".into(), alg.random_element(&mut rng));
            val.insert("y".into(), alg.random_element(&mut rng));
            let ctx = InstanceCtx { x: Term::gen("x"), y: Term::gen("y"), sig: &sig, index_range: width };
            let Some(eqs) = instantiate(name, &mut rng, &ctx)? else {
                row.skipped += 1;
                continue;
            };
            row.checked += 1;
            for (l, r) in eqs {
                if alg.eval(&l, &val)? != alg.eval(&r, &val)? {
                    row.failures += 1;
                    row.counterexample.get_or_insert_with(|| format!("{l} != {r}"));
                    break;
                }
            }
        }
        rows.push(row);
    }
    Ok(AxiomReport { width, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn sig() -> Signature {
        Signature::new().with("p", [0, 1]).with("q", [0])
    }

    fn n(text: &str) -> Term {
        normalize(&parse(text, &sig()).unwrap(), &sig()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(n("(s 0 0 (g p))"), Term::gen("p"));
        assert_eq!(n("(c 1 F)"), Term::Zero);
        assert_eq!(n("(s 1 0 (c 1 (g p)))"), n("(c 1 (g p))"));
        assert_eq!(n("(c 1 (c 0 (g p)))"), n("(c 0 (c 1 (g p)))"));
        assert_eq!(n("(box T)"), Term::One);
        assert_eq!(n("(not (not (g q)))"), Term::gen("q"));
    }

    #[test]
    fn normalize_is_sound_and_idempotent_on_samples() {
        let s = default_signature(3);
        let gens: Vec<String> = s.names().cloned().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shape = TermShape::default();
        for _ in 0..40 {
            let t = random_term(&mut rng, &gens, &shape);
            let nt = normalize(&t, &s).unwrap();
            assert_eq!(normalize(&nt, &s).unwrap(), nt);
            let out = eq_at_bound(&t, &nt, &s, &Bounds::default()).unwrap();
            assert!(out.equal, "{t} vs {nt}: {:?}", out.witness);
        }
    }

    #[test]
    fn eq_at_bound_examples() {
        let s = Signature::new().with("p", [0]);
        let p = Term::gen("p");
        let b = Bounds::default();
        assert!(eq_at_bound(&p, &Term::not(Term::not(p.clone())), &s, &b).unwrap().equal);

        let out = eq_at_bound(&Term::cyl(0, p.clone()), &p, &s, &b).unwrap();
        assert!(!out.equal && out.exhaustive);
        let w = out.witness.unwrap();
        let k = KripkeSystem::from_json(&w.system).unwrap();
        assert_eq!(k.domain.len(), 2);

        let out = eq_at_bound(&Term::nec(Term::One), &Term::One, &s, &b).unwrap();
        assert!(out.equal && out.exhaustive);
    }

    #[test]
    fn eq_at_bound_budget() {
        let s = Signature::new().with("p", [0, 1]).with("q", [0, 1]);
        let b = Bounds { samples: 0, budget: 10, ..Bounds::default() };
        let t = Term::or(Term::gen("p"), Term::gen("q"));
        assert!(matches!(eq_at_bound(&t, &t, &s, &b), Err(Error::BudgetExceeded(_))));
        let far = Term::subst(0, 7, Term::gen("p"));
        assert!(matches!(
            eq_at_bound(&far, &far, &s, &Bounds::default()),
            Err(Error::InvalidBounds(_))
        ));
    }

    #[test]
    fn check_identity_examples() {
        let b = Bounds::default();
        let r = check_identity("L1", 40, &b).unwrap();
        assert!(r.passed() && r.checked == 40);
        let r = check_identity("ax13", 20, &b).unwrap();
        assert!(r.passed() && r.skipped > 0);
        let r = check_identity("ax1-as-printed", 40, &b).unwrap();
        assert!(!r.passed() && r.counterexample.is_some());
        assert!(matches!(check_identity("ax99", 1, &b), Err(Error::UnknownIdentity(_))));
    }

    #[test]
    fn axiom4_interaction() {
        let s = Signature::new().with("x", [0, 1]).with("y", [1, 2]);
        for i in 0..3 {
            let l = Term::cyl(i, Term::and(Term::gen("x"), Term::cyl(i, Term::gen("y"))));
            let r = Term::and(Term::cyl(i, Term::gen("x")), Term::cyl(i, Term::gen("y")));
            assert!(eq_at_bound(&l, &r, &s, &Bounds::default()).unwrap().equal);
        }
    }

    #[test]
    fn check_axioms_on_small_systems() {
        let k = KripkeSystem::constant(2, [(0, 1), (1, 1)], 2);
        let r = check_axioms(&k, 3, 30, true, 4).unwrap();
        for row in &r.rows {
            if row.name == AX1_AS_PRINTED {
                assert!(row.failures > 0);
            } else {
                assert_eq!(row.failures, 0, "{}: {:?}", row.name, row.counterexample);
            }
        }
        let r1 = check_axioms(&k, 1, 10, false, 0).unwrap();
        assert!(r1.rows.iter().all(|row| row.failures == 0));
    }
}
