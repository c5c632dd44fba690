//! Stateful single-cell admission controller.
//!
//! The engine owns the ledger of active non-MBS calls and derives the MBS
//! allocation from whatever bandwidth the ledger leaves over (for the dynamic
//! scheme) or keeps it pinned (fixed schemes). Admission follows the degradation
//! cascade: a request is served from free bandwidth first; if the guaranteed
//! threshold (minimum for handover, maximum for new calls) still does not fit,
//! bandwidth is reclaimed in order from MBS enhancement layers (implicit in the
//! pool accounting), then background calls, then, for handover calls only,
//! unicast enhancement layers. New background calls are lowest priority and only
//! ever use bandwidth that is already idle.
//!
//! All bookkeeping is exact integer bits/s; conservation
//! (`non_mbs + mbs <= capacity`) holds after every operation.

use std::fmt;

use thiserror::Error;

use crate::alloc::{allocate, allocate_full, allocate_min, MbsAllocation};
use crate::config::{SchemeId, SystemConfig};
use crate::units::Bandwidth;

/// Non-MBS traffic class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CallClass {
    Voice,
    Unicast,
    Background,
}

impl CallClass {
    pub const ALL: [CallClass; 3] = [CallClass::Voice, CallClass::Unicast, CallClass::Background];

    pub fn as_str(&self) -> &'static str {
        match self {
            CallClass::Voice => "voice",
            CallClass::Unicast => "unicast",
            CallClass::Background => "background",
        }
    }
}

/// Where a request comes from. Handover calls are the highest-priority arrivals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    New,
    Handover,
}

/// Identifier of an active call in the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CallId(pub u64);

impl fmt::Display for CallId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "call#{}", self.0)
    }
}

/// An admission request with its bandwidth band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdmissionRequest {
    pub class: CallClass,
    pub origin: Origin,
    pub req_max_bw: Bandwidth,
    pub req_min_bw: Bandwidth,
}

impl AdmissionRequest {
    /// Build the canonical request for a class/origin under a config: voice is
    /// rigid, unicast spans its layer band, background spans requested down to
    /// the origin-appropriate degradation floor.
    pub fn for_class(config: &SystemConfig, class: CallClass, origin: Origin) -> Self {
        let (req_max_bw, req_min_bw) = match class {
            CallClass::Voice => (config.voice.bandwidth, config.voice.bandwidth),
            CallClass::Unicast => (config.unicast.max_bw(), config.unicast.min_bw()),
            CallClass::Background => {
                let floor = match origin {
                    Origin::Handover => config.background.handover_floor(),
                    Origin::New => config.background.newcall_floor(),
                };
                (config.background.requested_bw, floor)
            }
        };
        debug_assert!(req_min_bw <= req_max_bw);
        AdmissionRequest {
            class,
            origin,
            req_max_bw,
            req_min_bw,
        }
    }
}

/// What reclamation hit which traffic to serve a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegradationTarget {
    MbsSessions,
    BackgroundCalls,
    UnicastCalls,
}

/// Admission verdict. `Blocked` is only ever produced for new calls and
/// `Dropped` only for handover calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Admitted { granted_bw: Bandwidth },
    Blocked,
    Dropped,
}

/// The engine's answer to one request, with the reclamation trail.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissionDecision {
    pub verdict: Verdict,
    pub degradations: Vec<(DegradationTarget, Bandwidth)>,
}

impl AdmissionDecision {
    pub fn admitted(&self) -> bool {
        matches!(self.verdict, Verdict::Admitted { .. })
    }

    fn refused(origin: Origin) -> Self {
        AdmissionDecision {
            verdict: match origin {
                Origin::New => Verdict::Blocked,
                Origin::Handover => Verdict::Dropped,
            },
            degradations: Vec::new(),
        }
    }
}

/// Result of re-offering an in-progress call as a handover arrival.
#[derive(Debug, Clone, PartialEq)]
pub enum ReofferOutcome {
    /// The call stays in the cell under a fresh grant.
    Continued {
        call_id: CallId,
        granted_bw: Bandwidth,
        decision: AdmissionDecision,
    },
    /// The call could not be carried and leaves the system.
    Dropped,
}

/// MBS reservation behavior of a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbsMode {
    /// MBS takes whatever the non-MBS ledger leaves, between floor and ceiling.
    Dynamic,
    /// MBS pinned at the all-sessions maximum.
    FixedMax,
    /// MBS pinned at the all-sessions minimum.
    FixedMin,
}

/// Non-MBS admission behavior of a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonMbsMode {
    /// Handover priority plus two-level background degradation (the dynamic policy).
    PrioritizedAdaptive,
    /// Degradation available to every arrival alike; no handover priority.
    NonPrioritizedAdaptive,
    /// No degradation, no priority: every call needs its maximum up front.
    Rigid,
}

/// Policy bundle a scheme id expands to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemePolicy {
    pub mbs: MbsMode,
    pub non_mbs: NonMbsMode,
}

impl From<SchemeId> for SchemePolicy {
    fn from(id: SchemeId) -> Self {
        let mbs = match id.get() {
            1 => MbsMode::Dynamic,
            2..=4 => MbsMode::FixedMax,
            _ => MbsMode::FixedMin,
        };
        let non_mbs = match id.get() {
            1 | 2 | 5 => NonMbsMode::PrioritizedAdaptive,
            3 | 6 => NonMbsMode::NonPrioritizedAdaptive,
            _ => NonMbsMode::Rigid,
        };
        SchemePolicy { mbs, non_mbs }
    }
}

/// Expand the config's scheme id into its policy bundle.
pub fn apply_scheme(config: &SystemConfig) -> SchemePolicy {
    SchemePolicy::from(config.scheme)
}

/// Coarse view of how squeezed the cell currently is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegradationLevel {
    None,
    MbsAndBackgroundDegraded,
    UnicastAlsoDegraded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ActiveCall {
    id: CallId,
    class: CallClass,
    granted: Bandwidth,
    /// Enhancement layers; meaningful for unicast calls only.
    layers: u8,
}

/// The single-cell admission engine. Mutations are serialized through `&mut`;
/// snapshots (clones) are plain immutable values.
#[derive(Debug, Clone)]
pub struct Cell {
    config: SystemConfig,
    policy: SchemePolicy,
    calls: Vec<ActiveCall>,
    non_mbs_bw: Bandwidth,
    mbs: MbsAllocation,
    next_id: u64,
    /// Round-robin cursors so repeated layer removal/restoration spreads evenly.
    uni_reclaim_cursor: usize,
    uni_restore_cursor: usize,
    // Cheap occupancy counters so the per-event restoration pass can skip
    // stages with no candidates.
    uni_below_max: usize,
    bg_below_new_level: usize,
    bg_below_full: usize,
}

/// Engine failures (verdicts are not errors).
#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("unknown {0}")]
    UnknownCall(CallId),
}

impl Cell {
    pub fn new(config: SystemConfig) -> Self {
        let policy = apply_scheme(&config);
        let mbs = match policy.mbs {
            MbsMode::Dynamic | MbsMode::FixedMax => allocate_full(&config),
            MbsMode::FixedMin => allocate_min(&config),
        };
        Cell {
            config,
            policy,
            calls: Vec::new(),
            non_mbs_bw: Bandwidth::ZERO,
            mbs,
            next_id: 0,
            uni_reclaim_cursor: 0,
            uni_restore_cursor: 0,
            uni_below_max: 0,
            bg_below_new_level: 0,
            bg_below_full: 0,
        }
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn policy(&self) -> SchemePolicy {
        self.policy
    }

    pub fn non_mbs_bw(&self) -> Bandwidth {
        self.non_mbs_bw
    }

    pub fn mbs(&self) -> &MbsAllocation {
        &self.mbs
    }

    pub fn active_calls(&self) -> usize {
        self.calls.len()
    }

    /// (id, class, granted bandwidth, layers) for every active call, in
    /// admission order.
    pub fn ledger(&self) -> impl Iterator<Item = (CallId, CallClass, Bandwidth, u8)> + '_ {
        self.calls.iter().map(|c| (c.id, c.class, c.granted, c.layers))
    }

    pub fn granted_bw(&self, id: CallId) -> Option<Bandwidth> {
        self.calls.iter().find(|c| c.id == id).map(|c| c.granted)
    }

    pub fn class_of(&self, id: CallId) -> Option<CallClass> {
        self.calls.iter().find(|c| c.id == id).map(|c| c.class)
    }

    /// Sum of active unicast enhancement layers (for quality statistics).
    pub fn unicast_layer_sum(&self) -> u64 {
        self.calls
            .iter()
            .filter(|c| c.class == CallClass::Unicast)
            .map(|c| c.layers as u64)
            .sum()
    }

    pub fn unicast_call_count(&self) -> usize {
        self.calls
            .iter()
            .filter(|c| c.class == CallClass::Unicast)
            .count()
    }

    pub fn degradation_level(&self) -> DegradationLevel {
        if self
            .calls
            .iter()
            .any(|c| c.class == CallClass::Unicast && c.layers < self.config.unicast.max_layers)
        {
            DegradationLevel::UnicastAlsoDegraded
        } else if self.mbs.total < self.config.mbs_total_max()
            || self
                .calls
                .iter()
                .any(|c| c.class == CallClass::Background && c.granted < self.config.background.requested_bw)
        {
            DegradationLevel::MbsAndBackgroundDegraded
        } else {
            DegradationLevel::None
        }
    }

    /// Bandwidth the non-MBS ledger may grow into, counting MBS enhancement
    /// bandwidth above the scheme's floor as reclaimable.
    fn pool(&self) -> Bandwidth {
        let reserved = match self.policy.mbs {
            MbsMode::Dynamic | MbsMode::FixedMin => self.config.mbs_total_min(),
            MbsMode::FixedMax => self.config.mbs_total_max(),
        };
        self.config.capacity - reserved
    }

    /// MBS bandwidth the scheme would take at zero congestion; background calls
    /// are only restored to their full request from bandwidth beyond this.
    fn mbs_ceiling(&self) -> Bandwidth {
        match self.policy.mbs {
            MbsMode::Dynamic | MbsMode::FixedMax => self.config.mbs_total_max(),
            MbsMode::FixedMin => self.config.mbs_total_min(),
        }
    }

    fn pool_free(&self) -> Bandwidth {
        self.pool().saturating_sub(self.non_mbs_bw)
    }

    /// Bandwidth idle right now, with MBS at its current allocation.
    fn actual_free(&self) -> Bandwidth {
        self.config.capacity - self.mbs.total - self.non_mbs_bw
    }

    fn background_slack(&self, floor: Bandwidth, exclude: Option<CallId>) -> Bandwidth {
        self.calls
            .iter()
            .filter(|c| c.class == CallClass::Background && Some(c.id) != exclude)
            .map(|c| c.granted.saturating_sub(floor))
            .sum()
    }

    fn unicast_slack(&self, exclude: Option<CallId>) -> Bandwidth {
        let min_layers = self.config.unicast.min_layers;
        self.calls
            .iter()
            .filter(|c| c.class == CallClass::Unicast && Some(c.id) != exclude)
            .map(|c| self.config.unicast.layer_bw * (c.layers - min_layers) as u64)
            .sum()
    }

    /// Guaranteed admission level and reclamation rights for a request.
    /// Returns `(threshold_bw, background_floor_right, may_reclaim_unicast)`;
    /// `None` background floor means the request may not degrade anyone.
    fn rights(&self, request: &AdmissionRequest) -> (Bandwidth, Option<Bandwidth>, bool) {
        match (self.policy.non_mbs, request.origin) {
            (NonMbsMode::Rigid, _) => (request.req_max_bw, None, false),
            (NonMbsMode::NonPrioritizedAdaptive, _) => {
                // No priority tiers: every arrival gets the deep floor.
                let threshold = match request.class {
                    CallClass::Background => self.config.background.handover_floor(),
                    _ => request.req_min_bw,
                };
                (
                    threshold,
                    Some(self.config.background.handover_floor()),
                    true,
                )
            }
            (NonMbsMode::PrioritizedAdaptive, Origin::Handover) => (
                request.req_min_bw,
                Some(self.config.background.handover_floor()),
                true,
            ),
            (NonMbsMode::PrioritizedAdaptive, Origin::New) => match request.class {
                // New background calls may not trigger any reclamation.
                CallClass::Background => (request.req_max_bw, None, false),
                _ => (
                    request.req_max_bw,
                    Some(self.config.background.newcall_floor()),
                    false,
                ),
            },
        }
    }

    /// Would `request` be admitted against the current state? Pure check; the
    /// excluded call's grant stays counted but its slack is not reclaimable
    /// (used for handover re-offers contending alongside themselves).
    pub fn would_admit(&self, request: &AdmissionRequest, exclude: Option<CallId>) -> bool {
        // New background calls are special-cased onto idle bandwidth.
        if self.policy.non_mbs == NonMbsMode::PrioritizedAdaptive
            && request.origin == Origin::New
            && request.class == CallClass::Background
        {
            let free = self.actual_free();
            return request.req_max_bw <= free || self.config.background.newcall_floor() <= free;
        }
        let (threshold, bg_floor, uni_rights) = self.rights(request);
        let mut budget = match self.policy.non_mbs {
            NonMbsMode::Rigid => self.actual_free(),
            _ => self.pool_free(),
        };
        if let Some(floor) = bg_floor {
            budget += self.background_slack(floor, exclude);
        }
        if uni_rights {
            budget += self.unicast_slack(exclude);
        }
        threshold <= budget
    }

    /// Entry grant: the best level in `[threshold, req_max]` that fits in the
    /// free pool; degradation of other calls only ever covers the threshold.
    fn entry_grant(&self, request: &AdmissionRequest, threshold: Bandwidth) -> (Bandwidth, u8) {
        let free = match self.policy.non_mbs {
            NonMbsMode::Rigid => self.actual_free(),
            _ => self.pool_free(),
        };
        match request.class {
            CallClass::Voice => (request.req_max_bw, 0),
            CallClass::Unicast => {
                let uni = &self.config.unicast;
                let floor_layers = if threshold == request.req_max_bw {
                    uni.max_layers
                } else {
                    uni.min_layers
                };
                let mut layers = floor_layers;
                for cand in (floor_layers..=uni.max_layers).rev() {
                    if uni.bw_at(cand) <= free {
                        layers = cand;
                        break;
                    }
                }
                (uni.bw_at(layers), layers)
            }
            CallClass::Background => {
                // Quantized to the three defined service levels.
                let bg = &self.config.background;
                let level = [bg.requested_bw, bg.newcall_floor(), bg.handover_floor()]
                    .into_iter()
                    .find(|&lvl| lvl >= threshold && lvl <= free)
                    .unwrap_or(threshold);
                (level.max(threshold), 0)
            }
        }
    }

    /// Process one admission request. Refusals leave the state untouched.
    pub fn admit(&mut self, request: &AdmissionRequest) -> (AdmissionDecision, Option<CallId>) {
        // Lowest-priority path: new background calls live off idle bandwidth only.
        if self.policy.non_mbs == NonMbsMode::PrioritizedAdaptive
            && request.origin == Origin::New
            && request.class == CallClass::Background
        {
            let free = self.actual_free();
            let grant = if request.req_max_bw <= free {
                request.req_max_bw
            } else {
                let fallback = self.config.background.newcall_floor();
                if fallback <= free {
                    fallback
                } else {
                    return (AdmissionDecision::refused(request.origin), None);
                }
            };
            let id = self.push_call(request.class, grant, 0);
            let mbs_delta = self.recompute_mbs();
            debug_assert_eq!(mbs_delta, Bandwidth::ZERO, "idle-only admission must not shrink MBS");
            return (
                AdmissionDecision {
                    verdict: Verdict::Admitted { granted_bw: grant },
                    degradations: Vec::new(),
                },
                Some(id),
            );
        }

        if !self.would_admit(request, None) {
            return (AdmissionDecision::refused(request.origin), None);
        }

        let (threshold, bg_floor, uni_rights) = self.rights(request);
        let (grant, layers) = self.entry_grant(request, threshold);
        let free = match self.policy.non_mbs {
            NonMbsMode::Rigid => self.actual_free(),
            _ => self.pool_free(),
        };
        let mut degradations = Vec::new();
        let shortfall = grant.saturating_sub(free);
        if !shortfall.is_zero() {
            let mut remaining = shortfall;
            if let Some(floor) = bg_floor {
                let reclaimed = self.reclaim_from_background(remaining, floor);
                if !reclaimed.is_zero() {
                    degradations.push((DegradationTarget::BackgroundCalls, reclaimed));
                }
                remaining = remaining.saturating_sub(reclaimed);
            }
            if !remaining.is_zero() && uni_rights {
                let reclaimed = self.reclaim_from_unicast(remaining);
                if !reclaimed.is_zero() {
                    degradations.push((DegradationTarget::UnicastCalls, reclaimed));
                }
                remaining = remaining.saturating_sub(reclaimed);
            }
            assert!(
                remaining.is_zero(),
                "feasibility pre-checked; shortfall must be covered"
            );
        }

        let id = self.push_call(request.class, grant, layers);
        let mbs_delta = self.recompute_mbs();
        if !mbs_delta.is_zero() {
            // MBS gave up enhancement bandwidth for this admission; it is the
            // first reclamation stage, so it leads the record.
            degradations.insert(0, (DegradationTarget::MbsSessions, mbs_delta));
        }
        (
            AdmissionDecision {
                verdict: Verdict::Admitted { granted_bw: grant },
                degradations,
            },
            Some(id),
        )
    }

    /// Remove a call and redistribute the freed bandwidth (degraded unicast
    /// first, then background up to its new-call level, then MBS, then
    /// background up to its full request).
    pub fn release(&mut self, id: CallId) -> Result<(), EngineError> {
        self.remove_call(id)?;
        self.restore();
        self.recompute_mbs();
        Ok(())
    }

    /// Re-offer an active call as a handover arrival against the current cell
    /// state (the call still holds its bandwidth during the check, as if it
    /// arrived at an identically loaded neighbor cell). On success the old
    /// grant is swapped for a fresh handover-level grant.
    pub fn reoffer_handover(&mut self, id: CallId) -> Result<ReofferOutcome, EngineError> {
        let class = self.class_of(id).ok_or(EngineError::UnknownCall(id))?;
        let request = AdmissionRequest::for_class(&self.config, class, Origin::Handover);
        if !self.would_admit(&request, Some(id)) {
            // Dropped: the departure itself frees the old grant.
            self.release(id)?;
            return Ok(ReofferOutcome::Dropped);
        }
        self.remove_call(id)?;
        let (decision, new_id) = self.admit(&request);
        let new_id = new_id.expect("re-offer was feasibility-checked");
        let granted_bw = match decision.verdict {
            Verdict::Admitted { granted_bw } => granted_bw,
            _ => unreachable!("re-offer admission cannot refuse"),
        };
        self.restore();
        self.recompute_mbs();
        Ok(ReofferOutcome::Continued {
            call_id: new_id,
            granted_bw,
            decision,
        })
    }

    // ------------------------------------------------------------------
    // Ledger mutation helpers: every bandwidth change funnels through these
    // so the occupancy counters and the cached sum stay consistent.
    // ------------------------------------------------------------------

    fn push_call(&mut self, class: CallClass, granted: Bandwidth, layers: u8) -> CallId {
        let id = CallId(self.next_id);
        self.next_id += 1;
        match class {
            CallClass::Unicast if layers < self.config.unicast.max_layers => {
                self.uni_below_max += 1
            }
            CallClass::Background => {
                if granted < self.config.background.newcall_floor() {
                    self.bg_below_new_level += 1;
                }
                if granted < self.config.background.requested_bw {
                    self.bg_below_full += 1;
                }
            }
            _ => {}
        }
        self.calls.push(ActiveCall {
            id,
            class,
            granted,
            layers,
        });
        self.non_mbs_bw += granted;
        id
    }

    fn remove_call(&mut self, id: CallId) -> Result<(), EngineError> {
        let idx = self
            .calls
            .iter()
            .position(|c| c.id == id)
            .ok_or(EngineError::UnknownCall(id))?;
        let call = self.calls.remove(idx);
        self.non_mbs_bw -= call.granted;
        match call.class {
            CallClass::Unicast if call.layers < self.config.unicast.max_layers => {
                self.uni_below_max -= 1
            }
            CallClass::Background => {
                if call.granted < self.config.background.newcall_floor() {
                    self.bg_below_new_level -= 1;
                }
                if call.granted < self.config.background.requested_bw {
                    self.bg_below_full -= 1;
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn set_background_bw(&mut self, idx: usize, new_bw: Bandwidth) {
        let new_level = self.config.background.newcall_floor();
        let full = self.config.background.requested_bw;
        debug_assert_eq!(self.calls[idx].class, CallClass::Background);
        let old = self.calls[idx].granted;
        if old == new_bw {
            return;
        }
        match (old < new_level, new_bw < new_level) {
            (false, true) => self.bg_below_new_level += 1,
            (true, false) => self.bg_below_new_level -= 1,
            _ => {}
        }
        match (old < full, new_bw < full) {
            (false, true) => self.bg_below_full += 1,
            (true, false) => self.bg_below_full -= 1,
            _ => {}
        }
        self.calls[idx].granted = new_bw;
        if new_bw > old {
            self.non_mbs_bw += new_bw - old;
        } else {
            self.non_mbs_bw -= old - new_bw;
        }
    }

    fn set_unicast_layers(&mut self, idx: usize, layers: u8) {
        let max = self.config.unicast.max_layers;
        let bw = self.config.unicast.bw_at(layers);
        debug_assert_eq!(self.calls[idx].class, CallClass::Unicast);
        let old_layers = self.calls[idx].layers;
        if old_layers == layers {
            return;
        }
        match (old_layers < max, layers < max) {
            (false, true) => self.uni_below_max += 1,
            (true, false) => self.uni_below_max -= 1,
            _ => {}
        }
        let old_bw = self.calls[idx].granted;
        self.calls[idx].layers = layers;
        self.calls[idx].granted = bw;
        if bw > old_bw {
            self.non_mbs_bw += bw - old_bw;
        } else {
            self.non_mbs_bw -= old_bw - bw;
        }
    }

    fn recompute_mbs(&mut self) -> Bandwidth {
        let before = self.mbs.total;
        self.mbs = match self.policy.mbs {
            MbsMode::FixedMax => allocate_full(&self.config),
            MbsMode::FixedMin => allocate_min(&self.config),
            MbsMode::Dynamic => allocate(&self.config, self.non_mbs_bw)
                .expect("ledger is kept within the non-MBS pool"),
        };
        debug_assert!(self.non_mbs_bw + self.mbs.total <= self.config.capacity);
        before.saturating_sub(self.mbs.total)
    }

    /// Squeeze background calls evenly down toward `floor` until `needed` is
    /// reclaimed; returns the amount actually reclaimed.
    fn reclaim_from_background(&mut self, needed: Bandwidth, floor: Bandwidth) -> Bandwidth {
        let mut remaining = needed;
        loop {
            let candidates: Vec<usize> = self
                .calls
                .iter()
                .enumerate()
                .filter(|(_, c)| c.class == CallClass::Background && c.granted > floor)
                .map(|(i, _)| i)
                .collect();
            if candidates.is_empty() || remaining.is_zero() {
                break;
            }
            // Equal shares per round, rounded up so progress is guaranteed;
            // the running cap keeps the total exact.
            let share = Bandwidth::from_bps(remaining.bps().div_ceil(candidates.len() as u64));
            for idx in candidates {
                if remaining.is_zero() {
                    break;
                }
                let slack = self.calls[idx].granted - floor;
                let cut = slack.min(share).min(remaining);
                let new_bw = self.calls[idx].granted - cut;
                self.set_background_bw(idx, new_bw);
                remaining -= cut;
            }
        }
        needed - remaining
    }

    /// Raise background calls evenly toward `target`, spending at most `budget`;
    /// returns the amount spent.
    fn raise_background(&mut self, target: Bandwidth, budget: Bandwidth) -> Bandwidth {
        let mut left = budget;
        loop {
            let candidates: Vec<usize> = self
                .calls
                .iter()
                .enumerate()
                .filter(|(_, c)| c.class == CallClass::Background && c.granted < target)
                .map(|(i, _)| i)
                .collect();
            if candidates.is_empty() || left.is_zero() {
                break;
            }
            let share = Bandwidth::from_bps(left.bps().div_ceil(candidates.len() as u64));
            for idx in candidates {
                if left.is_zero() {
                    break;
                }
                let deficit = target - self.calls[idx].granted;
                let add = deficit.min(share).min(left);
                let new_bw = self.calls[idx].granted + add;
                self.set_background_bw(idx, new_bw);
                left -= add;
            }
        }
        budget - left
    }

    /// Strip unicast enhancement layers one at a time, round-robin, stopping as
    /// soon as `needed` is covered; returns the reclaimed amount (granularity is
    /// one layer, so it may overshoot by less than one layer's bandwidth).
    fn reclaim_from_unicast(&mut self, needed: Bandwidth) -> Bandwidth {
        let layer_bw = self.config.unicast.layer_bw;
        let min_layers = self.config.unicast.min_layers;
        let mut reclaimed = Bandwidth::ZERO;
        if layer_bw.is_zero() {
            return reclaimed;
        }
        while reclaimed < needed {
            let n = self.calls.len();
            let mut removed_any = false;
            for step in 0..n {
                if reclaimed >= needed {
                    break;
                }
                let idx = (self.uni_reclaim_cursor + step) % n;
                let c = &self.calls[idx];
                if c.class == CallClass::Unicast && c.layers > min_layers {
                    let layers = c.layers - 1;
                    self.set_unicast_layers(idx, layers);
                    reclaimed += layer_bw;
                    removed_any = true;
                    self.uni_reclaim_cursor = (idx + 1) % n;
                }
            }
            if !removed_any {
                break;
            }
        }
        reclaimed
    }

    /// Post-departure restoration: degraded unicast first, then background to
    /// its new-call level, then MBS (implicit in the pool), then background to
    /// its full request from bandwidth MBS does not claim.
    fn restore(&mut self) {
        if self.policy.non_mbs == NonMbsMode::Rigid {
            return; // rigid calls are never degraded
        }
        let mut budget = self.pool_free();

        // Stage 1: unicast layers, one per call per pass, round-robin.
        let layer_bw = self.config.unicast.layer_bw;
        let max_layers = self.config.unicast.max_layers;
        while self.uni_below_max > 0 && !layer_bw.is_zero() && budget >= layer_bw {
            let n = self.calls.len();
            let mut restored_any = false;
            for step in 0..n {
                if budget < layer_bw {
                    break;
                }
                let idx = (self.uni_restore_cursor + step) % n;
                let c = &self.calls[idx];
                if c.class == CallClass::Unicast && c.layers < max_layers {
                    let layers = c.layers + 1;
                    self.set_unicast_layers(idx, layers);
                    budget -= layer_bw;
                    restored_any = true;
                    self.uni_restore_cursor = (idx + 1) % n;
                }
            }
            if !restored_any {
                break;
            }
        }

        // Stage 2: background up to the level new-call admissions guarantee
        // (the full request directly when no priority tiers exist).
        let stage2_target = match self.policy.non_mbs {
            NonMbsMode::PrioritizedAdaptive => self.config.background.newcall_floor(),
            _ => self.config.background.requested_bw,
        };
        let needs_stage2 = match self.policy.non_mbs {
            NonMbsMode::PrioritizedAdaptive => self.bg_below_new_level > 0,
            _ => self.bg_below_full > 0,
        };
        if needs_stage2 && !budget.is_zero() {
            self.raise_background(stage2_target, budget);
        }

        // Stage 4: full background restoration only from bandwidth beyond what
        // MBS would claim at zero congestion (stage 3, the MBS recompute, is the
        // caller's closing step).
        if self.bg_below_full > 0 {
            let surplus = (self.config.capacity - self.mbs_ceiling()).saturating_sub(self.non_mbs_bw);
            if !surplus.is_zero() {
                self.raise_background(self.config.background.requested_bw, surplus);
            }
        }
    }

    /// Consistency check used by tests and the fuzz harness: cached sums,
    /// conservation, per-class bands, and scheme pinning.
    pub fn check_invariants(&self) -> Result<(), String> {
        let ledger_sum: Bandwidth = self.calls.iter().map(|c| c.granted).sum();
        if ledger_sum != self.non_mbs_bw {
            return Err(format!(
                "cached non-MBS sum {} != ledger sum {}",
                self.non_mbs_bw, ledger_sum
            ));
        }
        if self.non_mbs_bw + self.mbs.total > self.config.capacity {
            return Err(format!(
                "capacity exceeded: {} + {} > {}",
                self.non_mbs_bw, self.mbs.total, self.config.capacity
            ));
        }
        for c in &self.calls {
            match c.class {
                CallClass::Voice => {
                    if c.granted != self.config.voice.bandwidth {
                        return Err(format!("{}: voice grant {} moved", c.id, c.granted));
                    }
                }
                CallClass::Unicast => {
                    let uni = &self.config.unicast;
                    if c.layers < uni.min_layers || c.layers > uni.max_layers {
                        return Err(format!("{}: unicast layers {} out of band", c.id, c.layers));
                    }
                    if c.granted != uni.bw_at(c.layers) {
                        return Err(format!("{}: unicast grant/layers mismatch", c.id));
                    }
                }
                CallClass::Background => {
                    let bg = &self.config.background;
                    if c.granted < bg.handover_floor() || c.granted > bg.requested_bw {
                        return Err(format!(
                            "{}: background grant {} outside [{}, {}]",
                            c.id,
                            c.granted,
                            bg.handover_floor(),
                            bg.requested_bw
                        ));
                    }
                }
            }
        }
        for (g, s) in self.mbs.grants.iter().zip(&self.config.mbs_sessions) {
            if g.layers < s.min_layers || g.layers > s.max_layers {
                return Err(format!("mbs session {}: layers out of band", s.session_id));
            }
        }
        match self.policy.mbs {
            MbsMode::FixedMax if self.mbs.total != self.config.mbs_total_max() => {
                return Err("fixed-max scheme drifted off the maximum".into());
            }
            MbsMode::FixedMin if self.mbs.total != self.config.mbs_total_min() => {
                return Err("fixed-min scheme drifted off the minimum".into());
            }
            _ => {}
        }
        let uni_below = self
            .calls
            .iter()
            .filter(|c| c.class == CallClass::Unicast && c.layers < self.config.unicast.max_layers)
            .count();
        if uni_below != self.uni_below_max {
            return Err("unicast occupancy counter drifted".into());
        }
        let bg_below_new = self
            .calls
            .iter()
            .filter(|c| {
                c.class == CallClass::Background && c.granted < self.config.background.newcall_floor()
            })
            .count();
        let bg_below_full = self
            .calls
            .iter()
            .filter(|c| {
                c.class == CallClass::Background && c.granted < self.config.background.requested_bw
            })
            .count();
        if bg_below_new != self.bg_below_new_level || bg_below_full != self.bg_below_full {
            return Err("background occupancy counters drifted".into());
        }
        Ok(())
    }

    /// Test-only: build a cell around an explicit ledger (class, bandwidth,
    /// layers). Grants must already lie within their class bands.
    #[cfg(test)]
    pub(crate) fn with_ledger(
        config: SystemConfig,
        entries: impl IntoIterator<Item = (CallClass, Bandwidth, u8)>,
    ) -> Self {
        let mut cell = Cell::new(config);
        for (class, granted, layers) in entries {
            cell.push_call(class, granted, layers);
        }
        cell.recompute_mbs();
        cell.check_invariants().expect("injected ledger must be valid");
        cell
    }
}
