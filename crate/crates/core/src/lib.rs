//! Anchor-relative node importance estimation on knowledge graphs.
//!
//! [`graph`] holds the data model, [`features`] the semantic and structural
//! encoders, [`model`] the network with training and inference,
//! [`metrics`] and [`baselines`] the evaluation side, and [`datagen`] a
//! synthetic corpus generator.

pub mod baselines;
pub mod datagen;
pub mod eval;
pub mod features;
pub mod fingerprint;
pub mod graph;
pub mod metrics;
pub mod model;
