//! File formats.

pub mod checkpoint;
pub mod corpus;
pub mod fingerprints;
pub mod pairs;
pub mod report;
