//! Per-session MBS layer grants for a given non-MBS commitment.
//!
//! Under low traffic every session runs at maximum quality. Under congestion the
//! available bandwidth `C - C_nB` is split by one of two techniques:
//!
//! - **two-level**: remove layers near-uniformly, so the removed-layer count
//!   differs by at most one across sessions (a scan finds the unique removal
//!   depth, then the unique count of sessions that keep one extra layer);
//! - **multi-level**: keep the highest-priority sessions at full quality and
//!   push the rest to minimum quality (a scan finds the unique split point).
//!
//! Both scans mirror the defining inequalities directly on exact integer sums,
//! so the result is correct by construction and unique (the row totals are
//! monotone in the scanned parameter).

use thiserror::Error;

use crate::config::{SystemConfig, Technique};
use crate::units::Bandwidth;

/// Traffic regime for a given non-MBS commitment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadClass {
    /// Everything fits: every MBS session can run at maximum quality.
    LowTraffic,
    /// MBS sessions must give up enhancement layers.
    Congested,
}

/// How an allocation was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TechniqueDetail {
    /// Low-traffic full-quality allocation.
    Full,
    /// Two-level: `removed_layers` stripped from every session, with the first
    /// `upgraded_sessions` sessions keeping one layer more than the rest.
    TwoLevel { removed_layers: u8, upgraded_sessions: u16 },
    /// Multi-level: the first `full_quality_sessions` sessions at max quality,
    /// the rest at minimum quality.
    MultiLevel { full_quality_sessions: u16 },
}

/// Grant for one MBS session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionGrant {
    pub session_id: u16,
    pub layers: u8,
    pub bandwidth: Bandwidth,
}

/// Complete MBS allocation across all sessions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MbsAllocation {
    pub grants: Vec<SessionGrant>,
    pub total: Bandwidth,
    pub detail: TechniqueDetail,
}

impl MbsAllocation {
    pub fn total_layers(&self) -> u32 {
        self.grants.iter().map(|g| g.layers as u32).sum()
    }

    pub fn mean_layers(&self) -> f64 {
        if self.grants.is_empty() {
            0.0
        } else {
            self.total_layers() as f64 / self.grants.len() as f64
        }
    }
}

/// Allocation failures.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum AllocError {
    /// The non-MBS commitment exceeds what the cell can give up.
    #[error("non-MBS demand {demand} exceeds the maximum {max} (would push MBS below its floor)")]
    ExcessDemand { demand: Bandwidth, max: Bandwidth },
}

/// Classify the load for a given non-MBS commitment.
pub fn classify_load(
    config: &SystemConfig,
    non_mbs_bw: Bandwidth,
) -> Result<LoadClass, AllocError> {
    if non_mbs_bw > config.non_mbs_max() {
        return Err(AllocError::ExcessDemand {
            demand: non_mbs_bw,
            max: config.non_mbs_max(),
        });
    }
    let available = config.capacity - non_mbs_bw;
    if available >= config.mbs_total_max() {
        Ok(LoadClass::LowTraffic)
    } else {
        Ok(LoadClass::Congested)
    }
}

/// Low-traffic allocation: every session at maximum quality.
pub fn allocate_full(config: &SystemConfig) -> MbsAllocation {
    let grants: Vec<SessionGrant> = config
        .mbs_sessions
        .iter()
        .map(|s| SessionGrant {
            session_id: s.session_id,
            layers: s.max_layers,
            bandwidth: s.max_bw(),
        })
        .collect();
    let total = grants.iter().map(|g| g.bandwidth).sum();
    MbsAllocation {
        grants,
        total,
        detail: TechniqueDetail::Full,
    }
}

/// Floor allocation: every session at minimum quality (used by the fixed-floor
/// schemes and as the congestion limit).
pub fn allocate_min(config: &SystemConfig) -> MbsAllocation {
    let grants: Vec<SessionGrant> = config
        .mbs_sessions
        .iter()
        .map(|s| SessionGrant {
            session_id: s.session_id,
            layers: s.min_layers,
            bandwidth: s.min_bw(),
        })
        .collect();
    let total = grants.iter().map(|g| g.bandwidth).sum();
    MbsAllocation {
        grants,
        total,
        detail: TechniqueDetail::MultiLevel {
            full_quality_sessions: 0,
        },
    }
}

/// Layer count of session `s` with `removed` layers stripped, clamped at the
/// session's minimum. Clamping extends the uniform-removal rule to sessions
/// whose enhancement span is shorter than the removal depth.
fn layers_after_removal(s: &crate::config::MbsSessionSpec, removed: u16) -> u8 {
    let target = s.max_layers as i32 - removed as i32;
    target.max(s.min_layers as i32) as u8
}

/// Total MBS bandwidth with `removed` layers stripped from every session.
fn row_total(config: &SystemConfig, removed: u16) -> Bandwidth {
    config
        .mbs_sessions
        .iter()
        .map(|s| s.bw_at(layers_after_removal(s, removed)))
        .sum()
}

fn check_feasible(config: &SystemConfig, non_mbs_bw: Bandwidth) -> Result<Bandwidth, AllocError> {
    if non_mbs_bw > config.non_mbs_max() {
        return Err(AllocError::ExcessDemand {
            demand: non_mbs_bw,
            max: config.non_mbs_max(),
        });
    }
    Ok(config.capacity - non_mbs_bw)
}

/// Two-level (near-uniform) degradation.
///
/// Finds the unique removal depth whose uniform row still exceeds the available
/// bandwidth while one level deeper fits, then the unique prefix of sessions
/// that can take back one layer from the leftover. The spread of removed layers
/// across sessions never exceeds one.
pub fn allocate_two_level(
    config: &SystemConfig,
    non_mbs_bw: Bandwidth,
) -> Result<MbsAllocation, AllocError> {
    let available = check_feasible(config, non_mbs_bw)?;

    if available >= config.mbs_total_max() {
        // Boundary of the congestion inequality: nothing to remove.
        let mut alloc = allocate_full(config);
        alloc.detail = TechniqueDetail::TwoLevel {
            removed_layers: 0,
            upgraded_sessions: config.session_count() as u16,
        };
        return Ok(alloc);
    }

    // Smallest removal depth whose row fits; the depth before it is the unique
    // value satisfying both defining inequalities.
    let max_span = config
        .mbs_sessions
        .iter()
        .map(|s| (s.max_layers - s.min_layers) as u16)
        .max()
        .unwrap_or(0);
    let mut deeper = 0u16;
    while row_total(config, deeper) > available {
        deeper += 1;
        debug_assert!(deeper <= max_span, "row totals must reach the floor");
    }
    // `deeper` >= 1 here because the full row did not fit.
    let removed = deeper - 1;

    // Upgrade cost per session: one layer back from the deeper row (zero when
    // the session is clamped at its minimum either way).
    let base_total = row_total(config, deeper);
    let mut leftover = available - base_total;
    let mut upgraded = 0u16;
    for s in &config.mbs_sessions {
        let cost =
            s.bw_at(layers_after_removal(s, removed)) - s.bw_at(layers_after_removal(s, deeper));
        if cost <= leftover {
            leftover -= cost;
            upgraded += 1;
        } else {
            break;
        }
    }

    let grants: Vec<SessionGrant> = config
        .mbs_sessions
        .iter()
        .enumerate()
        .map(|(idx, s)| {
            let depth = if (idx as u16) < upgraded { removed } else { deeper };
            let layers = layers_after_removal(s, depth);
            SessionGrant {
                session_id: s.session_id,
                layers,
                bandwidth: s.bw_at(layers),
            }
        })
        .collect();
    let total = grants.iter().map(|g| g.bandwidth).sum();
    debug_assert!(total <= available);
    Ok(MbsAllocation {
        grants,
        total,
        detail: TechniqueDetail::TwoLevel {
            removed_layers: removed.min(u8::MAX as u16) as u8,
            upgraded_sessions: upgraded,
        },
    })
}

/// Multi-level (priority-ordered) degradation.
///
/// Finds the unique count of highest-priority sessions that can run at full
/// quality while the rest sit at minimum quality; leftover bandwidth smaller
/// than the next session's full enhancement span stays unallocated.
pub fn allocate_multi_level(
    config: &SystemConfig,
    non_mbs_bw: Bandwidth,
) -> Result<MbsAllocation, AllocError> {
    let available = check_feasible(config, non_mbs_bw)?;

    let floor_total = config.mbs_total_min();
    let mut budget = available - floor_total;
    let mut full_count = 0u16;
    for s in &config.mbs_sessions {
        let span = s.span_bw();
        if span <= budget {
            budget -= span;
            full_count += 1;
        } else {
            break;
        }
    }

    let grants: Vec<SessionGrant> = config
        .mbs_sessions
        .iter()
        .enumerate()
        .map(|(idx, s)| {
            let layers = if (idx as u16) < full_count {
                s.max_layers
            } else {
                s.min_layers
            };
            SessionGrant {
                session_id: s.session_id,
                layers,
                bandwidth: s.bw_at(layers),
            }
        })
        .collect();
    let total = grants.iter().map(|g| g.bandwidth).sum();
    debug_assert!(total <= available);
    Ok(MbsAllocation {
        grants,
        total,
        detail: TechniqueDetail::MultiLevel {
            full_quality_sessions: full_count,
        },
    })
}

/// Allocate per the config's technique, using the full-quality allocation when
/// the load classifies as low.
pub fn allocate(config: &SystemConfig, non_mbs_bw: Bandwidth) -> Result<MbsAllocation, AllocError> {
    match classify_load(config, non_mbs_bw)? {
        LoadClass::LowTraffic => Ok(allocate_full(config)),
        LoadClass::Congested => match config.technique {
            Technique::TwoLevel => allocate_two_level(config, non_mbs_bw),
            Technique::MultiLevel => allocate_multi_level(config, non_mbs_bw),
        },
    }
}
