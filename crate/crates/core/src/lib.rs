//! Slice-based robustness evaluation for text models.
//!
//! Datasets are immutable, fingerprinted tables ([`dataset`]). Per-example
//! side information is computed once by [`cache::CachedOperation`]s and kept
//! in a content-addressed [`cache::CacheStore`]. Slice builders
//! ([`slices`]) turn datasets and cached scores into subpopulations,
//! transformations, attacks and wrapped evaluation sets, each carrying its
//! provenance. Slices are collected into versioned [`testbench::TestBench`]es
//! and evaluated into [`report::Report`]s.

pub mod cache;
pub mod canonical;
pub mod dataset;
pub mod error;
pub mod identifier;
pub mod ops;
pub mod report;
pub mod slices;
pub mod summ;
pub mod testbench;
pub mod text;

pub use dataset::{Column, ColumnKind, Dataset, Example, Fingerprint};
pub use error::{Error, Result};
pub use identifier::{Identifier, Param};
