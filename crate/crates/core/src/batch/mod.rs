//! Manifest-driven batch runs, evaluation of stored results, and the
//! synthetic corpus generator.

mod config;
mod corpus;
mod manifest;
mod run;

pub use config::{EngineConfig, LoadedConfig};
pub use corpus::{
    generate_corpus, write_corpus, CorpusEntry, CorpusSpec, CorpusSummary, GeneratedPacket,
};
pub use manifest::{load_manifest, parse_manifest, Manifest, ManifestFormat, ManifestRow};
pub use run::{
    builtin_extractor, evaluate, mask_latency, process, EvaluateOutcome, Modalities, PacketResult,
    ProcessOptions, ReportRow, RunOutcome, RunReport, BUILTIN_BACKENDS,
};
