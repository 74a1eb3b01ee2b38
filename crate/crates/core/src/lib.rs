//! Grounder for disjunctive logic programs with function symbols.
//!
//! Rules are flattened so that every function application becomes a
//! body-level function atom linked by an id argument, bodies are
//! reordered so function atoms sit where their arguments are bound, and
//! instantiation runs component by component with tentative id invention
//! committed per match. The `-maxNesting=k` bound caps term depth and
//! guarantees termination; brute-force oracles check the whole pipeline
//! at desk scale.

pub mod ast;
pub mod depgraph;
pub mod flat;
pub mod ground;
pub mod oracle;
pub mod parse;
pub mod pipeline;
pub mod reorder;
pub mod rewrite;
pub mod term_store;

pub use ast::{Atom, Constant, Literal, Program, Rule, Term};
pub use flat::{FlatProgram, FlatRule, Provenance};
pub use ground::{GroundOptions, GroundProgram, GroundRule};
pub use parse::{parse_program, ParseError};
pub use pipeline::{run, Mode, PipelineError, RunConfig, RunOutput};
pub use term_store::{NestingExceeded, TermId, TermStore};
