//! Experiment driver: arrival-rate sweeps across schemes, analytic and/or
//! simulated, rendered as CSV.
//!
//! Sweep points run concurrently but rows come out ordered by (rate, scheme,
//! mode) and every random stream derives from the one sweep seed, so reruns are
//! byte-identical. Simulation replications at the same rate share seeds across
//! schemes (common random numbers), which sharpens scheme comparisons.

use rayon::prelude::*;
use thiserror::Error;

use crate::alloc::{allocate_full, allocate_multi_level, allocate_two_level, AllocError, MbsAllocation, TechniqueDetail};
use crate::config::{SchemeId, SystemConfig, Technique};
use crate::metrics::MetricsReport;
use crate::queue::{analyze, ModelError};
use crate::sim::{run, SimConfig, SimError};
use crate::units::Bandwidth;

/// What to evaluate at each sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Analytic,
    Sim,
    Both,
}

impl SweepMode {
    fn wants_analytic(self) -> bool {
        matches!(self, SweepMode::Analytic | SweepMode::Both)
    }

    fn wants_sim(self) -> bool {
        matches!(self, SweepMode::Sim | SweepMode::Both)
    }
}

/// Sweep parameters.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Arrival rates in calls/s, ascending.
    pub rates: Vec<f64>,
    pub schemes: Vec<SchemeId>,
    pub technique: Technique,
    pub mode: SweepMode,
    pub seed: u64,
    pub replications: u32,
    /// Offered new calls per replication (sets the horizon).
    pub offered_calls: u64,
}

/// One evaluated (rate, scheme, mode) cell.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub rate: f64,
    pub scheme: SchemeId,
    pub analytic: bool,
    pub report: MetricsReport,
}

/// All points of a sweep plus the inputs needed to render CSV.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub seed: u64,
    pub technique: Technique,
}

/// Sweep failures. A failing point aborts the sweep with context; there are no
/// silent gaps.
#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error("analytic evaluation failed at rate {rate}, scheme {scheme}: {source}")]
    Analytic {
        rate: f64,
        scheme: SchemeId,
        source: ModelError,
    },
    #[error("simulation failed at rate {rate}, scheme {scheme}: {source}")]
    Sim {
        rate: f64,
        scheme: SchemeId,
        source: SimError,
    },
    #[error(transparent)]
    Alloc(#[from] AllocError),
}

/// Build the rate grid from an inclusive range on an exact micro-rate lattice
/// (no floating-point drift in the rate column).
pub fn rate_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>, SweepError> {
    if !(min > 0.0 && max >= min && step > 0.0) {
        return Err(SweepError::Invalid(
            "need 0 < rate-min <= rate-max and rate-step > 0".into(),
        ));
    }
    let to_micro = |v: f64| (v * 1e6).round() as u64;
    let (min_u, max_u, step_u) = (to_micro(min), to_micro(max), to_micro(step));
    if step_u == 0 {
        return Err(SweepError::Invalid("rate-step is below 1e-6 calls/s".into()));
    }
    let mut rates = Vec::new();
    let mut v = min_u;
    while v <= max_u {
        rates.push(v as f64 / 1e6);
        v += step_u;
    }
    Ok(rates)
}

/// Evaluate the whole sweep. Points run in parallel; output order is fixed.
pub fn run_sweep(config: &SystemConfig, spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    if spec.schemes.is_empty() {
        return Err(SweepError::Invalid("scheme list is empty".into()));
    }
    if spec.rates.is_empty() {
        return Err(SweepError::Invalid("rate grid is empty".into()));
    }

    let mut tasks = Vec::new();
    for (rate_idx, &rate) in spec.rates.iter().enumerate() {
        for &scheme in &spec.schemes {
            tasks.push((rate_idx, rate, scheme));
        }
    }

    let points: Result<Vec<Vec<SweepPoint>>, SweepError> = tasks
        .par_iter()
        .map(|&(rate_idx, rate, scheme)| {
            let mut cfg = config.clone();
            cfg.scheme = scheme;
            cfg.technique = spec.technique;
            let mut out = Vec::with_capacity(2);
            if spec.mode.wants_analytic() {
                let report = analyze(&cfg, rate).map_err(|source| SweepError::Analytic {
                    rate,
                    scheme,
                    source,
                })?;
                out.push(SweepPoint {
                    rate,
                    scheme,
                    analytic: true,
                    report,
                });
            }
            if spec.mode.wants_sim() {
                // Same per-rate seed for every scheme: common random numbers.
                let seed = spec.seed.wrapping_add(rate_idx as u64 * 1_000_003);
                let sim = SimConfig::sized(cfg, rate, seed, spec.offered_calls, spec.replications);
                let report = run(&sim).map_err(|source| SweepError::Sim {
                    rate,
                    scheme,
                    source,
                })?;
                out.push(SweepPoint {
                    rate,
                    scheme,
                    analytic: false,
                    report,
                });
            }
            Ok(out)
        })
        .collect();

    Ok(SweepResult {
        points: points?.into_iter().flatten().collect(),
        seed: spec.seed,
        technique: spec.technique,
    })
}

pub const CSV_HEADER: &str = "rate,scheme,technique,mode,p_drop,p_block_voice,p_block_unicast,p_block_back,p_forced_term,utilization,mbs_bw_mbps,mean_mbs_layers,mean_uni_layers,ci_halfwidth_pdrop";

impl SweepResult {
    /// Render the stable CSV schema, seed echoed as a leading comment.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# seed = {}\n", self.seed));
        if self.points.iter().any(|p| p.analytic) {
            out.push_str(
                "# analytic rows: mbs/utilization/layer columns use a linear interpolation across the degraded region\n",
            );
        }
        out.push_str(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let r = &p.report;
            let ci = r.ci.map(|c| c.p_drop).unwrap_or(0.0);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                p.rate,
                p.scheme,
                self.technique,
                if p.analytic { "analytic" } else { "sim" },
                r.p_drop,
                r.p_block_voice,
                r.p_block_unicast,
                r.p_block_background,
                r.p_forced_termination,
                r.utilization,
                r.mean_mbs_bw / 1e6,
                r.mean_mbs_layers,
                r.mean_unicast_layers,
                ci,
            ));
        }
        out
    }
}

/// Allocation for a given non-MBS commitment under an explicit technique.
pub fn allocation_for(
    config: &SystemConfig,
    non_mbs_bw: Bandwidth,
    technique: Technique,
) -> Result<MbsAllocation, AllocError> {
    match crate::alloc::classify_load(config, non_mbs_bw)? {
        crate::alloc::LoadClass::LowTraffic => Ok(allocate_full(config)),
        crate::alloc::LoadClass::Congested => match technique {
            Technique::TwoLevel => allocate_two_level(config, non_mbs_bw),
            Technique::MultiLevel => allocate_multi_level(config, non_mbs_bw),
        },
    }
}

/// Human-readable allocation table.
pub fn render_allocation(alloc: &MbsAllocation, non_mbs_bw: Bandwidth) -> String {
    let mut out = String::new();
    out.push_str(&format!("non-MBS commitment: {non_mbs_bw}\n"));
    match alloc.detail {
        TechniqueDetail::Full => out.push_str("regime: low traffic (all sessions at maximum quality)\n"),
        TechniqueDetail::TwoLevel {
            removed_layers,
            upgraded_sessions,
        } => out.push_str(&format!(
            "regime: congested, two-level (removed layers = {removed_layers}, sessions keeping one extra = {upgraded_sessions})\n"
        )),
        TechniqueDetail::MultiLevel {
            full_quality_sessions,
        } => out.push_str(&format!(
            "regime: congested, multi-level (full-quality sessions = {full_quality_sessions})\n"
        )),
    }
    out.push_str("session  layers  bandwidth\n");
    for g in &alloc.grants {
        out.push_str(&format!(
            "{:>7}  {:>6}  {}\n",
            g.session_id, g.layers, g.bandwidth
        ));
    }
    out.push_str(&format!("total MBS bandwidth: {}\n", alloc.total));
    out
}

/// Machine-readable allocation rows.
pub fn allocation_csv(alloc: &MbsAllocation) -> String {
    let mut out = String::from("session,layers,bandwidth_bps\n");
    for g in &alloc.grants {
        out.push_str(&format!("{},{},{}\n", g.session_id, g.layers, g.bandwidth.bps()));
    }
    out
}
