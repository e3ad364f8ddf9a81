//! Processing core for multi-document packets.
//!
//! A packet (an ordered list of pre-OCR'd pages) flows through a fixed pipeline:
//!
//! 1. [`segmentation`] labels every page with a BIO tag and decodes the tags into
//!    contiguous sections, one document class each.
//! 2. [`extraction`] builds a schema-driven request per section, calls a pluggable
//!    backend and validates the structured response.
//! 3. [`assessment`] turns per-attribute confidences into a report and routes
//!    low-confidence documents to human review.
//! 4. [`rules`] curates facts from the extraction results and evaluates business
//!    rules into pass / fail / information-not-found determinations.
//!
//! [`orchestrator`] runs those stages as a resumable state machine backed by an
//! on-disk job store, with retries, a dead-letter area and per-stage concurrency
//! limits. [`evaluation`] scores extraction and splitting output against ground
//! truth, and [`batch`] wires everything together for manifest-driven runs.

pub mod assessment;
pub mod batch;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod model;
pub mod orchestrator;
pub mod rules;
pub mod segmentation;

pub use error::{Error, Result};
pub use model::{
    AttributeSchema, BoundingBox, ClassSchema, ComparatorKind, ComparatorSpec, DocumentPacket,
    GroundTruth, Page, TextLine, Value, ValueKind,
};

/// Reserved class for pages that match no configured class.
pub const OTHER_CLASS: &str = "other";
