//! Episodic evaluation harness for the multi-level metric classifier head:
//! bank file IO, weight checkpoints, the eval/train/sweep drivers, and
//! machine-readable reports. The numerical kernels live in `mml-core`.

pub mod bank_io;
pub mod checkpoint;
pub mod harness;
pub mod report;

pub use harness::{
    evaluate, sweep, train_fusion, BankSource, BranchMask, RunConfig, RunReport,
};
