//! Verification and benchmarking: path-independence graphs, error
//! transparency, RB/IRB, injected-noise sweeps and the error budget.

pub mod budget;
pub mod graph;
pub mod rb;
pub mod rwa;
pub mod sweep;
pub mod transparency;

pub use graph::{check_path_independence, gate_graph, PathIndependenceReport, TransitionGraph};
pub use transparency::{check_error_transparency, classify, Transparency, TransparencyEntry};
