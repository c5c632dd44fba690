//! Dynamic bandwidth allocation for layered multicast/broadcast (MBS) video plus
//! prioritized non-MBS traffic in a single wireless cell.
//!
//! The crate has three layers:
//!
//! - [`alloc`] computes per-session MBS layer grants from the bandwidth left
//!   after non-MBS commitments (near-uniform two-level degradation or
//!   priority-ordered multi-level degradation), with [`engine`] running the
//!   stateful admission controller on top of it;
//! - [`queue`] builds and solves the one-dimensional birth-death loss model of
//!   the same system and evaluates dropping/blocking probabilities, forced
//!   termination, and utilization (generic over the [`Real`] scalar, f64 by
//!   default);
//! - [`sim`] is a seeded discrete-event simulator driving the engine with
//!   Poisson arrivals, used to validate the chain and to measure what it
//!   approximates; [`sweep`] wraps both behind the CSV experiment driver.
//!
//! Bandwidths are exact integer bits/s throughout ([`Bandwidth`]); all
//! feasibility comparisons are strict integer inequalities.

pub mod alloc;
pub mod config;
pub mod engine;
pub mod metrics;
pub mod queue;
pub mod real;
pub mod sim;
pub mod sweep;
pub mod units;

pub use alloc::{
    allocate, allocate_full, allocate_min, allocate_multi_level, allocate_two_level,
    classify_load, AllocError, LoadClass, MbsAllocation, SessionGrant, TechniqueDetail,
};
pub use config::{
    load_config, to_config_text, BackgroundClass, ConfigError, MbsSessionSpec, SchemeId,
    SystemConfig, Technique, UnicastClass, VoiceClass,
};
pub use engine::{
    apply_scheme, AdmissionDecision, AdmissionRequest, CallClass, CallId, Cell, DegradationLevel,
    DegradationTarget, EngineError, MbsMode, NonMbsMode, Origin, ReofferOutcome, SchemePolicy,
    Verdict,
};
pub use metrics::{CiHalfwidths, ClassCounts, MetricsReport, SimCounts};
pub use queue::{
    analyze, blocking_probabilities, blocking_probabilities_product_form, build_model,
    derive_rates, derive_thresholds, derived_metrics, dropping_probability,
    dropping_probability_product_form, solve, AnalyticMetrics, MarkovModel, ModelError,
    OfferedRates, StationaryDistribution,
};
pub use real::Real;
pub use sim::{run, validate_against_chain, ChainComparison, ComparisonRow, SimConfig, SimError};
pub use sweep::{
    allocation_csv, allocation_for, rate_grid, render_allocation, run_sweep, SweepError,
    SweepMode, SweepPoint, SweepResult, SweepSpec, CSV_HEADER,
};
pub use units::{Bandwidth, BandwidthParseError};

/// The baseline 20 Mbps / 12-session parameterization shipped with the repo.
pub const BASELINE_CONFIG: &str = include_str!("../../../configs/baseline.conf");
