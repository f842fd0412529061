//! U-Datalog with stratified negation: deferred updates as constraints.

pub mod analysis;
pub mod compose;
pub mod constraint;
pub mod error;
pub mod eval;
pub mod formula;
pub mod interp;
pub mod parser;
pub mod program;
pub mod term;
pub mod transaction;

pub use error::{Error, Result};
