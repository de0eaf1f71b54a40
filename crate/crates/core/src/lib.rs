//! Reasoning over disjunctive embedded dependencies: a disjunctive chase for
//! query entailment, conjunctive query utilities, and a compiler from
//! nondeterministic Turing machines to rule sets.

pub mod chase;
pub mod error;
pub mod lab;
mod lex;
pub mod machine;
pub mod query;
pub mod rules;
pub mod terms;

pub use error::{Error, Result};
