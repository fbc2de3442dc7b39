//! Seeded random generation of terms, used by the identity checker and tests.

use rand::Rng;

use crate::syntax::{Index, Signature, Term};

/// Shape of randomly generated terms.
#[derive(Debug, Clone)]
pub struct TermShape {
    pub depth: usize,
    /// Indices used by `Cyl` and `Subst` are drawn from `0..max_index`.
    pub max_index: usize,
    pub modal: bool,
    pub quantified: bool,
    /// Include the constants `T`/`F` among leaves.
    pub constants: bool,
    /// Include `dia`/`imp` sugar (expanded on construction).
    pub sugar: bool,
}

impl Default for TermShape {
    fn default() -> Self {
        TermShape { depth: 3, max_index: 3, modal: true, quantified: true, constants: true, sugar: false }
    }
}

pub fn random_term<R: Rng + ?Sized>(rng: &mut R, gens: &[String], shape: &TermShape) -> Term {
    gen_term(rng, gens, shape, shape.depth)
}

fn leaf<R: Rng + ?Sized>(rng: &mut R, gens: &[String], shape: &TermShape) -> Term {
    let consts = if shape.constants { 2 } else { 0 };
    let n = gens.len() + consts;
    if n == 0 {
        return Term::One;
    }
    let k = rng.gen_range(0..n);
    if k < gens.len() {
        Term::gen(gens[k].clone())
    } else if k == gens.len() {
        Term::One
    } else {
        Term::Zero
    }
}

fn gen_term<R: Rng + ?Sized>(rng: &mut R, gens: &[String], shape: &TermShape, depth: usize) -> Term {
    if depth == 0 || rng.gen_bool(0.25) {
        return leaf(rng, gens, shape);
    }
    let idx = |rng: &mut R| -> Index { rng.gen_range(0..shape.max_index.max(1)) };
    loop {
        let op = rng.gen_range(0..9);
        let d = depth - 1;
        return match op {
            0 => Term::not(gen_term(rng, gens, shape, d)),
            1 => Term::or(gen_term(rng, gens, shape, d), gen_term(rng, gens, shape, d)),
            2 => Term::and(gen_term(rng, gens, shape, d), gen_term(rng, gens, shape, d)),
            3 if shape.modal => Term::nec(gen_term(rng, gens, shape, d)),
            4 if shape.modal && shape.sugar => Term::dia(gen_term(rng, gens, shape, d)),
            5 if shape.sugar => Term::imp(gen_term(rng, gens, shape, d), gen_term(rng, gens, shape, d)),
            6 | 7 if shape.quantified => {
                let i = idx(rng);
                Term::cyl(i, gen_term(rng, gens, shape, d))
            }
            8 if shape.quantified => {
                let u = idx(rng);
                let l = idx(rng);
                Term::subst(u, l, gen_term(rng, gens, shape, d))
            }
            _ => continue,
        };
    }
}

/// Signature used by randomized identity checks: three generators with
/// different dimension sets inside `0..max_index`.
pub fn default_signature(max_index: usize) -> Signature {
    let m = max_index.max(1);
    Signature::new()
        .with("p", [0, 1 % m])
        .with("q", [(1 % m), (2 % m)])
        .with("r", [0])
}
