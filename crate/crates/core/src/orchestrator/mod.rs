//! Resumable pipeline execution over an on-disk job store.
//!
//! A job moves through `queued → classifying → splitting → extracting →
//! assessing → (awaiting_review →) validating → complete`, or ends in `failed`
//! or `dead_lettered`. Every stage writes its output file before the job
//! record advances, and a stage whose output file already exists reuses it, so
//! a job killed between any two writes resumes without repeating backend calls.

mod engine;
mod job;
mod pool;
pub mod retry;
mod store;

pub use engine::{
    stage_file, Components, Engine, EngineSettings, FlaggedAttribute, Intermediates, ReviewItem,
    StageLimits, ASSESS, CLASSIFY, EXTRACT, INTAKE, REVIEW, SPLIT, VALIDATE,
};
pub use job::{
    now_millis, AssessOutput, CompletionEvent, ConfidenceSummary, DeadLetterRecord,
    DeterminationSummary, ExtractOutput, JobRecord, QueueName, ReviewOutput, RuleOutcome, Stage,
};
pub use pool::WorkerPool;
pub use retry::{RecordingSleeper, RetryPolicy, Sleeper, ThreadSleeper};
pub use store::JobStore;
