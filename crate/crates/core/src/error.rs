use thiserror::Error;

use crate::syntax::Term;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("undeclared generator `{0}`")]
    UndeclaredGenerator(String),

    #[error("evaluation width {width} too small, need at least {needed}")]
    WidthTooSmall { needed: usize, width: usize },

    #[error("invalid Kripke system: {0}")]
    InvalidSystem(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("search budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("unknown identity `{0}`")]
    UnknownIdentity(String),

    #[error("formula is not propositional (contains cylindrification or substitution)")]
    NotPropositional,

    #[error("implication is not derivable at the given bound")]
    NotDerivable,

    #[error("pair is separable, witness {0}")]
    Separable(Term),

    #[error("rewrite limit exceeded after {0} passes")]
    RewriteLimit(usize),

    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
