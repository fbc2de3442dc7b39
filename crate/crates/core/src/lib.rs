//! Modal substitution algebras: terms, concrete Kripke semantics, a sequent
//! prover with interpolation, and a saturation-based countermodel builder.

pub mod cli;
pub mod correspond;
pub mod error;
pub mod interp;
pub mod kripke;
pub mod par;
pub mod prover;
pub mod random;
pub mod rewrite;
pub mod saturate;
pub mod syntax;
pub mod transform;

pub use error::{Error, Result};
