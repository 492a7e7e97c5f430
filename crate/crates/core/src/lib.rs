//! Causality-based model checking over concurrent trace tableaux.
//!
//! The checker represents hypothetical property violations as concurrent
//! traces (events labeled by transition predicates, causal links, conflicts)
//! and refutes or realizes them by growing a tableau of traces linked by
//! trace-transformer proof rules. A brute-force explicit-state oracle
//! provides independent ground truth at desk scale.

pub mod gen;
pub mod logic;
pub mod model;
pub mod oracle;
pub mod reference;
pub mod tableau;
pub mod trace;
pub mod transformers;
