//! Adaptive pruning of multi-image visual token sequences.
//!
//! A [`TokenBundle`] holds the visual tokens of each image plus the text
//! tokens of the prompt. [`pipeline::prune`] measures redundancy within and
//! across images, turns it into a retention budget, keeps the most
//! representative tokens of each image, filters the pooled survivors for
//! global diversity and finally picks a diverse, text-aligned subset with
//! budgeted Pareto selection.
//!
//! The `parallel` feature (on by default) runs per-image work and candidate
//! scoring on rayon; without it everything runs on the calling thread with
//! identical results.

pub mod allocation;
pub mod bench;
pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
mod par;
pub mod pipeline;
pub mod selection;
pub mod types;

pub use error::{Error, Result};
pub use par::with_threads;
pub use pipeline::{analyze, apply_selection, prune};
pub use types::{
    FinalBudget, GreedyObjective, InterVariant, PruneConfig, RedundancyReport, ResolvedBudgets,
    Selection, StageSizes, TokenBundle, TokenMatrix, TokenScore,
};
