//! Scenario files, run orchestration, artifact persistence and offline verification
//! for the curvature-flow audits in `rhlab-core`.

pub mod artifact;
pub mod plots;
pub mod report;
pub mod run;
pub mod scenario;
pub mod verify;
