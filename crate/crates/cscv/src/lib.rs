//! Context-sensitive concolic verification for contracts written in a
//! minimal contract language (MCL).
//!
//! The pipeline is: parse a contract, a temporal safety property, and a
//! block snapshot ([`frontend`]); compute read/write sets and state-variable
//! dependencies ([`analysis`]); build a context pairing a minimal evaluation
//! function with a relevance ranking of the external write functions
//! ([`context`]); optimize it by compiling the property into per-function
//! pre/postconditions, folding constant view calls, and selecting heuristics
//! ([`optimization`]); then explore the induced transition system with
//! concolic execution until a replay-validated attack vector is found, the
//! state space reaches a fixpoint, or a budget runs out ([`engine`]).
//! Path constraints are discharged by [`solver`], either through an external
//! SMT-LIB2 process or a built-in bounded enumerator.

pub mod analysis;
pub mod context;
pub mod corpus;
pub mod engine;
pub mod frontend;
pub mod monitor;
pub mod optimization;
pub mod oracle;
pub mod report;
pub mod solver;
pub mod value;
