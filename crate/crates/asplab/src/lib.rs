//! asplab: a reference engine and benchmark factory for disjunctive
//! logic programs under stable-model semantics.
//!
//! The crate parses, grounds and solves small programs with strong and
//! default negation, disjunctive heads and integrity constraints;
//! synthesizes benchmark samples for three tasks (entailment,
//! verification, computation) from randomly generated dependency
//! graphs; renders programs as controlled natural language; and scores
//! prediction files against solver-certified ground truth.

pub mod ast;
pub mod evaluator;
pub mod graphgen;
pub mod rulegen;
pub mod grounder;
pub mod parser;
pub mod samplegen;
pub mod solver;
pub mod textualizer;
