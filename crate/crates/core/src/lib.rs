//! Interpretation of low-level process event streams as steps of high-level
//! activity instances.
//!
//! The crate combines an incremental argumentation-based reasoner, which
//! encodes a type-level event/activity mapping and a declarative process
//! model, with a neural sequence tagger that ranks candidate activities for
//! each incoming event.

pub mod aaf;
pub mod cli;
pub mod eval;
pub mod fixtures;
pub mod model;
pub mod pipeline;
pub mod reasoner;
pub mod service;
pub mod synth;
pub mod tagger;
