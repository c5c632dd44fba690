//! Shared output type of the analytic solver and the simulator.

/// Outcome counters for one traffic class: new-call admissions/blocks plus
/// handover re-offers/drops.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassCounts {
    pub offered: u64,
    pub admitted: u64,
    pub blocked: u64,
    pub handover_offered: u64,
    pub handover_admitted: u64,
    pub dropped: u64,
}

/// Event counters from one simulation (summed over replications).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimCounts {
    pub voice: ClassCounts,
    pub unicast: ClassCounts,
    pub background: ClassCounts,
    pub completed: u64,
}

impl SimCounts {
    pub fn class(&self, idx: usize) -> &ClassCounts {
        [&self.voice, &self.unicast, &self.background][idx]
    }

    pub fn offered_new(&self) -> u64 {
        self.voice.offered + self.unicast.offered + self.background.offered
    }

    pub fn admitted_new(&self) -> u64 {
        self.voice.admitted + self.unicast.admitted + self.background.admitted
    }

    pub fn handover_offered(&self) -> u64 {
        self.voice.handover_offered + self.unicast.handover_offered + self.background.handover_offered
    }

    pub fn handover_admitted(&self) -> u64 {
        self.voice.handover_admitted + self.unicast.handover_admitted + self.background.handover_admitted
    }

    pub fn dropped(&self) -> u64 {
        self.voice.dropped + self.unicast.dropped + self.background.dropped
    }
}

/// 95% confidence half-widths across replications (normal approximation).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CiHalfwidths {
    pub p_drop: f64,
    pub p_block_voice: f64,
    pub p_block_unicast: f64,
    pub p_block_background: f64,
    pub p_forced_termination: f64,
    pub utilization: f64,
}

/// Performance metrics for one operating point.
///
/// Produced by both the chain solver and the simulator; `counts` and `ci` are
/// populated only on the simulation path.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    /// Handover dropping probability.
    pub p_drop: f64,
    /// New-call blocking probability per class.
    pub p_block_voice: f64,
    pub p_block_unicast: f64,
    pub p_block_background: f64,
    /// Probability an admitted call is eventually cut by a dropped handover.
    pub p_forced_termination: f64,
    /// Time-averaged allocated bandwidth over capacity.
    pub utilization: f64,
    /// Time-averaged total MBS bandwidth, bits/s.
    pub mean_mbs_bw: f64,
    /// Time-averaged mean enhancement layers per MBS session.
    pub mean_mbs_layers: f64,
    /// Call-time-averaged enhancement layers per active unicast call.
    pub mean_unicast_layers: f64,
    pub counts: Option<SimCounts>,
    pub ci: Option<CiHalfwidths>,
}

impl MetricsReport {
    pub fn probabilities_in_unit_interval(&self) -> bool {
        [
            self.p_drop,
            self.p_block_voice,
            self.p_block_unicast,
            self.p_block_background,
            self.p_forced_termination,
            self.utilization,
        ]
        .iter()
        .all(|p| (0.0..=1.0).contains(p))
    }
}
