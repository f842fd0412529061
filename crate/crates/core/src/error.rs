use std::fmt;

use thiserror::Error;

/// Position in source text, 1-based.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },

    #[error("{pos}: predicate {pred} used with arity {found}, previously {expected}")]
    Arity {
        pos: Pos,
        pred: String,
        expected: usize,
        found: usize,
    },

    #[error("{pos}: predicate {pred} is both extensional and intensional")]
    KindClash { pos: Pos, pred: String },

    #[error("{pos}: update atom on intensional predicate {pred}")]
    UpdateOnIntensional { pos: Pos, pred: String },

    #[error("{pos}: non-ground fact {fact}")]
    NonGroundFact { pos: Pos, fact: String },

    #[error("{pos}: only facts and #domain directives are allowed here")]
    NotAFact { pos: Pos },

    #[error("unknown predicate {0}")]
    UnknownPredicate(String),

    #[error("program is not stratifiable: {0}")]
    NotStratifiable(String),

    #[error("goal is not admissible:\n{0}")]
    NotAdmissible(String),

    #[error("unfolding did not converge within {0} rounds")]
    BoundExceeded(usize),

    #[error("no completed definition for negated predicate {0}")]
    MissingDefinition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
