//! Measuring verbatim reproduction of a reference corpus in generated text.
//!
//! The pipeline: index a corpus ([`corpus`]), filter refusals
//! ([`hygiene`]), compute per-character match and reproduction profiles
//! ([`metrics`]), and aggregate per-record results ([`report`]). Record
//! formats live in [`records`]; [`generation`] optionally collects model
//! outputs from a chat-completion endpoint.

pub mod analysis;
pub mod corpus;
pub mod generation;
pub mod hygiene;
pub mod manifest;
pub mod metrics;
pub mod records;
pub mod report;
