//! Silent self-stabilizing construction of the first-DFS labeling.

mod audit;
mod daemon;
mod inject;
mod sim;
mod step;

pub use audit::{
    audit_register_width, bits_for, log2_ceil, FieldWidths, NodeAudit, WidthAudit, WidthViolation,
};
pub use daemon::{ActivationMode, Daemon, DaemonSchedule};
pub use inject::{inject, Corruption, Field, FieldValue, InjectError};
pub use sim::{
    is_legal, legal_configuration, run, Metrics, RoundRecord, RoundSummary, RunOptions, SimError,
    SimResult, SimTrace, Simulator, VerdictSummary, WriteRecord,
};
pub use step::{local_step, local_step_traced, StepOutcome};
