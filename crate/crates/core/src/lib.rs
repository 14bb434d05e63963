//! Search-based test generation for event-driven block programs.

pub mod brute;
pub mod corpus;
pub mod encoding;
pub mod events;
pub mod fitness;
pub mod graphs;
pub mod postprocess;
pub mod project;
pub mod mutation;
pub mod search;
pub mod suite;
pub mod value;
pub mod vm;
