//! Benchmark construction from real-world Python code: corpus acquisition,
//! self-containment analysis, control-flow filtering, test synthesis,
//! packaging and candidate evaluation.

pub mod bridge;
pub mod corpus;
pub mod flow;
pub mod judge;
pub mod par;
pub mod scopes;
pub mod syntax;
pub mod harness;
pub mod package;
pub mod synth;
pub mod orchestrator;
