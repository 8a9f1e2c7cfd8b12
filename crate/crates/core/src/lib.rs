//! Journal impact indicators with a correction for citation-window bias.
//!
//! The two-year impact factor samples a large share of lifetime citations for
//! journals whose papers are cited quickly and a small share for journals
//! whose papers are cited slowly over decades. This crate measures that share
//! (window coverage) from a journal's own citation history and rescales the
//! impact factor so that every journal is sampled at the same quantile of its
//! citations.
//!
//! - [`ledger`]: citation CSV ingestion, alias resolution, per-journal profiles
//! - [`curves`]: per-volume accrual curves, standardization, anomaly detection
//! - [`metrics`]: impact factor, immediacy, half-life, coverage, scaling
//! - [`report`]: per-journal indicator reports
//! - [`synth`]: deterministic synthetic profiles and bundled fixtures

pub mod curves;
pub mod ledger;
pub mod metrics;
pub mod report;
pub mod synth;

pub use curves::{AccrualCurve, AnomalyFinding, ClassThresholds, CountBasis, CurveKind, JournalClass};
pub use ledger::{AliasMap, CitationProfile, CitationRecord, JournalId, PublicationCounts};
pub use metrics::{Flag, HalfLifeJcr, WindowPolicy};
pub use report::{compute_report, IndicatorReport, JournalReport};
pub use synth::{Kernel, SynthSpec};
