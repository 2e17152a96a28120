//! Corpora, fuzz campaigns and scaling benchmarks.

pub mod bench;
pub mod config;
pub mod corpus;
pub mod fuzz;
