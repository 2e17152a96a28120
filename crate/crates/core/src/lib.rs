//! First-DFS spanning trees on port-ordered graphs: a sequential marker, a
//! local verifier for its labels, a silent self-stabilizing construction
//! driven by that verifier, and DFS-order token circulation on top.
//!
//! ```
//! use silentdfs_core::graph::{generate, GraphKind};
//! use silentdfs_core::oracle::first_dfs_mark;
//! use silentdfs_core::registers::Configuration;
//! use silentdfs_core::verifier::{verify_all, VerifyMode};
//!
//! let g = generate(GraphKind::RandomConnected, 20, 7).unwrap();
//! let labels = Configuration::from_labels(&first_dfs_mark(&g));
//! assert!(verify_all(&g, &labels, VerifyMode::FirstDfs).accepted());
//! ```

pub mod doc;
pub mod experiments;
pub mod graph;
pub mod oracle;
pub mod registers;
pub mod stabilizer;
pub mod token;
pub mod verifier;

pub use graph::{GraphKind, NodeId, PathString, Port, PortGraph};
pub use oracle::{first_dfs_mark, Interval, LabeledConfiguration};
pub use registers::{Configuration, NodeRegisters, Phase};
pub use verifier::{verify_all, Predicate, Verdict, VerdictMap, VerifyMode};
