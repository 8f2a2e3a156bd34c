pub mod config;
pub mod fault;
pub mod journal;
pub mod runner;
pub mod tasks;

pub use config::PipelineConfig;
pub use journal::{Checkpoints, Journal, JournalEntry, JournalScope, NoCheckpoints};
pub use runner::{run_pipeline, workspace_status, RunSummary, TaskState, TaskStatus, Workspace};
