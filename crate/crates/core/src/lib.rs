//! Query-aware context compression driven by attention reactions.
//!
//! A context is scored token by token by how much its attention profile
//! shifts once the query is appended. Token scores are mapped back onto
//! sentences through [`easy`] alignment, and [`retrieval`] keeps the most
//! reactive sentences that fit a token budget.

pub mod attention;
pub mod baselines;
pub mod easy;
pub mod exec;
pub mod harness;
pub mod retrieval;
pub mod seed;
pub mod sentence_split;
pub mod tokenization;
