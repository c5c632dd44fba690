//! One-dimensional birth-death loss model of the cell.
//!
//! States count the M always-on MBS sessions plus the active non-MBS calls.
//! Three regions shape the birth rates: up to `N` every stream is admitted, from
//! `N` to `N+L` new background calls are blocked, beyond `N+L` only handover
//! calls enter, and the chain ends at `N+S` where handovers drop too. The
//! stationary distribution comes from the balance recurrence with running
//! renormalization; the closed product form (with ratio powers and factorials
//! moved into log space) is kept as an independent route for cross-checks.

use thiserror::Error;

use crate::config::SystemConfig;
use crate::engine::{apply_scheme, MbsMode, NonMbsMode, SchemePolicy};
use crate::metrics::MetricsReport;
use crate::real::Real;

/// Parameters of the chain: state thresholds and offered rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovModel<R: Real = f64> {
    /// States reserved for the always-active MBS sessions (the chain floor, M).
    pub base_states: usize,
    /// Last state of the full-quality region (N).
    pub full_end: usize,
    /// Length of the MBS/background-degraded region (L).
    pub degrade_len: usize,
    /// Length from `full_end` to the last state (S); the handover-only tail is
    /// the last `S - L` states.
    pub tail_len: usize,
    pub new_voice_rate: R,
    pub new_unicast_rate: R,
    pub new_background_rate: R,
    pub handover_rate: R,
    /// Channel-holding completion rate per call (completion + cell departure).
    pub service_rate: R,
}

/// Model construction / solving failures.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("degenerate model: {0}")]
    Degenerate(String),
}

impl<R: Real> MarkovModel<R> {
    #[allow(clippy::too_many_arguments)] // mirrors the full parameter set
    pub fn new(
        base_states: usize,
        full_end: usize,
        degrade_len: usize,
        tail_len: usize,
        new_voice_rate: R,
        new_unicast_rate: R,
        new_background_rate: R,
        handover_rate: R,
        service_rate: R,
    ) -> Result<Self, ModelError> {
        if full_end < base_states {
            return Err(ModelError::Invalid("full_end must be >= base_states".into()));
        }
        if tail_len < degrade_len {
            return Err(ModelError::Invalid("tail_len must be >= degrade_len".into()));
        }
        let rates = [
            new_voice_rate,
            new_unicast_rate,
            new_background_rate,
            handover_rate,
        ];
        if rates.iter().any(|r| !r.is_finite() || *r < R::zero()) {
            return Err(ModelError::Invalid("arrival rates must be >= 0".into()));
        }
        if !service_rate.is_finite() || service_rate <= R::zero() {
            return Err(ModelError::Invalid("service rate must be > 0".into()));
        }
        let model = MarkovModel {
            base_states,
            full_end,
            degrade_len,
            tail_len,
            new_voice_rate,
            new_unicast_rate,
            new_background_rate,
            handover_rate,
            service_rate,
        };
        let total = model.total_rate();
        if !total.is_finite() || total <= R::zero() {
            return Err(ModelError::Invalid("total arrival rate must be > 0".into()));
        }
        Ok(model)
    }

    /// Total offered rate: every new stream plus handovers.
    pub fn total_rate(&self) -> R {
        self.new_voice_rate + self.new_unicast_rate + self.new_background_rate + self.handover_rate
    }

    /// Rate admitted in the degraded region: voice + unicast news + handovers.
    pub fn adaptive_rate(&self) -> R {
        self.new_voice_rate + self.new_unicast_rate + self.handover_rate
    }

    pub fn last_state(&self) -> usize {
        self.full_end + self.tail_len
    }

    pub fn state_count(&self) -> usize {
        self.last_state() - self.base_states + 1
    }

    /// Birth rate out of `state` (toward `state + 1`).
    pub fn birth_rate(&self, state: usize) -> R {
        if state < self.full_end {
            self.total_rate()
        } else if state < self.full_end + self.degrade_len {
            self.adaptive_rate()
        } else {
            self.handover_rate
        }
    }

    /// Death rate out of `state`: one server per active non-MBS call.
    pub fn death_rate(&self, state: usize) -> R {
        R::from_usize_lossy(state - self.base_states) * self.service_rate
    }
}

/// Stationary probabilities over states `base_states ..= last_state`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution<R: Real = f64> {
    base: usize,
    probs: Vec<R>,
}

impl<R: Real> StationaryDistribution<R> {
    pub fn prob(&self, state: usize) -> R {
        self.probs[state - self.base]
    }

    pub fn states(&self) -> impl Iterator<Item = (usize, R)> + '_ {
        self.probs.iter().enumerate().map(move |(k, &p)| (self.base + k, p))
    }

    pub fn sum(&self) -> R {
        self.probs.iter().fold(R::zero(), |acc, &p| acc + p)
    }
}

/// Solve the balance recurrence with running renormalization (no factorials,
/// no overflow for long chains).
pub fn solve<R: Real>(model: &MarkovModel<R>) -> Result<StationaryDistribution<R>, ModelError> {
    let total = model.state_count();
    let mut probs = Vec::with_capacity(total);
    let mut current = R::one();
    probs.push(current);
    let rescale_above = R::max_value().sqrt();

    for state in (model.base_states + 1)..=model.last_state() {
        let birth = model.birth_rate(state - 1);
        let death = model.death_rate(state);
        current = current * birth / death;
        if current > rescale_above {
            for p in probs.iter_mut() {
                *p = *p / current;
            }
            current = R::one();
        }
        probs.push(current);
    }

    let sum = probs.iter().fold(R::zero(), |acc, &p| acc + p);
    if !sum.is_finite() || sum <= R::zero() {
        return Err(ModelError::Degenerate(
            "stationary weights did not normalize".into(),
        ));
    }
    for p in probs.iter_mut() {
        *p = *p / sum;
    }
    Ok(StationaryDistribution {
        base: model.base_states,
        probs,
    })
}

/// Largest relative balance-equation residual across adjacent state pairs.
///
/// Pairs whose probabilities have fallen out of the normal floating range are
/// skipped; denormals carry no relative precision and are numerically zero.
pub fn max_balance_residual<R: Real>(
    model: &MarkovModel<R>,
    dist: &StationaryDistribution<R>,
) -> R {
    let mut worst = R::zero();
    for state in (model.base_states + 1)..=model.last_state() {
        let p_prev = dist.prob(state - 1);
        let p_cur = dist.prob(state);
        if p_prev < R::min_positive_value() || p_cur < R::min_positive_value() {
            continue;
        }
        let inflow = model.birth_rate(state - 1) * p_prev;
        let outflow = model.death_rate(state) * p_cur;
        let scale = inflow.max(outflow);
        if scale > R::zero() {
            let residual = (inflow - outflow).abs() / scale;
            worst = worst.max(residual);
        }
    }
    worst
}

/// Handover dropping probability: the chain's top state.
pub fn dropping_probability<R: Real>(
    dist: &StationaryDistribution<R>,
    model: &MarkovModel<R>,
) -> R {
    dist.prob(model.last_state())
}

/// New-call blocking: voice/unicast are refused from `N+L` up, background from
/// `N` up. Returns `(voice_and_unicast, background)`.
pub fn blocking_probabilities<R: Real>(
    dist: &StationaryDistribution<R>,
    model: &MarkovModel<R>,
) -> (R, R) {
    let vu_start = model.full_end + model.degrade_len;
    let mut p_vu = R::zero();
    let mut p_back = R::zero();
    for (state, p) in dist.states() {
        if state >= vu_start {
            p_vu = p_vu + p;
        }
        if state >= model.full_end {
            p_back = p_back + p;
        }
    }
    (p_vu, p_back)
}

// ----------------------------------------------------------------------
// Product-form route (independent of the recurrence path): per-state weights
// from the closed expressions, normalized through log space.
// ----------------------------------------------------------------------

fn log_weights<R: Real>(model: &MarkovModel<R>) -> Vec<R> {
    let m = model.base_states;
    let n = model.full_end;
    let l = model.degrade_len;
    let ln_total = model.total_rate().ln();
    let ln_adaptive = model.adaptive_rate().ln();
    let ln_handover = model.handover_rate.ln();
    let ln_mu = model.service_rate.ln();

    let mut ln_factorial = R::zero();
    let mut out = Vec::with_capacity(model.state_count());
    for state in m..=model.last_state() {
        let k = state - m;
        if k > 0 {
            ln_factorial = ln_factorial + R::from_usize_lossy(k).ln();
        }
        let full_steps = k.min(n - m);
        let degrade_steps = k.saturating_sub(n - m).min(l);
        let tail_steps = k.saturating_sub(n - m + l);
        let mut lw = R::from_usize_lossy(full_steps) * ln_total
            - ln_factorial
            - R::from_usize_lossy(k) * ln_mu;
        if degrade_steps > 0 {
            lw = lw + R::from_usize_lossy(degrade_steps) * ln_adaptive;
        }
        if tail_steps > 0 {
            lw = lw + R::from_usize_lossy(tail_steps) * ln_handover;
        }
        out.push(lw);
    }
    out
}

fn product_form_probs<R: Real>(model: &MarkovModel<R>) -> Vec<R> {
    let lws = log_weights(model);
    let max_lw = lws
        .iter()
        .fold(R::neg_infinity(), |acc, &w| acc.max(w));
    let weights: Vec<R> = lws.iter().map(|&w| (w - max_lw).exp()).collect();
    let total = weights.iter().fold(R::zero(), |acc, &w| acc + w);
    weights.into_iter().map(|w| w / total).collect()
}

/// Dropping probability evaluated through the closed product form.
pub fn dropping_probability_product_form<R: Real>(model: &MarkovModel<R>) -> R {
    let probs = product_form_probs(model);
    *probs.last().expect("at least one state")
}

/// Blocking probabilities evaluated through the closed product form.
pub fn blocking_probabilities_product_form<R: Real>(model: &MarkovModel<R>) -> (R, R) {
    let probs = product_form_probs(model);
    let m = model.base_states;
    let vu_start = model.full_end + model.degrade_len - m;
    let back_start = model.full_end - m;
    let mut p_vu = R::zero();
    let mut p_back = R::zero();
    for (k, &p) in probs.iter().enumerate() {
        if k >= vu_start {
            p_vu = p_vu + p;
        }
        if k >= back_start {
            p_back = p_back + p;
        }
    }
    (p_vu, p_back)
}

// ----------------------------------------------------------------------
// Config -> model derivation
// ----------------------------------------------------------------------

/// Offered rates split out of a total new-call rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfferedRates {
    pub new_voice: f64,
    pub new_unicast: f64,
    pub new_background: f64,
    pub handover: f64,
    /// Channel-holding rate: completion plus cell departure.
    pub service: f64,
}

/// Split a total new-call rate by the configured class ratio; handovers are the
/// fraction of calls whose dwell expires before completion (no blocking
/// feedback), and the service rate is the channel-holding rate.
pub fn derive_rates(config: &SystemConfig, total_new_rate: f64) -> OfferedRates {
    let weight_sum = config.arrival_weight_sum();
    let completion = config.completion_rate();
    let dwell = config.dwell_rate();
    OfferedRates {
        new_voice: total_new_rate * config.arrival_ratio[0] / weight_sum,
        new_unicast: total_new_rate * config.arrival_ratio[1] / weight_sum,
        new_background: total_new_rate * config.arrival_ratio[2] / weight_sum,
        handover: total_new_rate * dwell / (dwell + completion),
        service: completion + dwell,
    }
}

/// Arrival-ratio-weighted mean per-call bandwidth at one QoS level.
fn weighted_mean_bw(config: &SystemConfig, voice: f64, unicast: f64, background: f64) -> f64 {
    let w = &config.arrival_ratio;
    (w[0] * voice + w[1] * unicast + w[2] * background) / config.arrival_weight_sum()
}

fn calls_that_fit(pool_bps: f64, mean_bw: f64) -> usize {
    if pool_bps <= 0.0 || mean_bw <= 0.0 {
        return 0;
    }
    // Epsilon absorbs float noise when the quotient is an exact integer.
    (pool_bps / mean_bw + 1e-9).floor() as usize
}

/// Mean per-call bandwidths at the three QoS levels: full quality, background
/// at its new-call level, and everything at the floor.
fn qos_level_means(config: &SystemConfig) -> (f64, f64, f64) {
    let voice = config.voice.bandwidth.as_f64();
    let full = weighted_mean_bw(
        config,
        voice,
        config.unicast.max_bw().as_f64(),
        config.background.requested_bw.as_f64(),
    );
    let mid = weighted_mean_bw(
        config,
        voice,
        config.unicast.max_bw().as_f64(),
        config.background.newcall_floor().as_f64(),
    );
    let min = weighted_mean_bw(
        config,
        voice,
        config.unicast.min_bw().as_f64(),
        config.background.handover_floor().as_f64(),
    );
    (full, mid, min)
}

/// Derive the chain thresholds `(M, N, L, S)` for the config's scheme.
///
/// Each region boundary is the largest call count whose cumulative demand, at
/// the region's QoS level and the scheme's MBS reservation, still fits.
pub fn derive_thresholds(config: &SystemConfig) -> Result<(usize, usize, usize, usize), ModelError> {
    let policy = apply_scheme(config);
    let m = config.session_count();
    let (full_mean, mid_mean, min_mean) = qos_level_means(config);

    // Pool while every MBS session runs at the scheme's zero-congestion level,
    // and pool once MBS sits at the scheme's floor.
    let pool_full = match policy.mbs {
        MbsMode::Dynamic | MbsMode::FixedMax => config.non_mbs_min(),
        MbsMode::FixedMin => config.non_mbs_max(),
    }
    .as_f64();
    let pool_floor = match policy.mbs {
        MbsMode::Dynamic | MbsMode::FixedMin => config.non_mbs_max(),
        MbsMode::FixedMax => config.non_mbs_min(),
    }
    .as_f64();

    let (n_off, l, s) = match policy.non_mbs {
        NonMbsMode::PrioritizedAdaptive => {
            let n_off = calls_that_fit(pool_full, full_mean);
            let nl_off = calls_that_fit(pool_floor, mid_mean).max(n_off);
            let ns_off = calls_that_fit(pool_floor, min_mean).max(nl_off);
            (n_off, nl_off - n_off, ns_off - n_off)
        }
        NonMbsMode::NonPrioritizedAdaptive => {
            (calls_that_fit(pool_floor, min_mean), 0, 0)
        }
        NonMbsMode::Rigid => (calls_that_fit(pool_floor, full_mean), 0, 0),
    };

    if n_off + s == 0 {
        return Err(ModelError::Degenerate(
            "capacity cannot host even one call at the floor QoS level".into(),
        ));
    }
    Ok((m, m + n_off, l, s))
}

/// Thresholds plus rates in one step.
pub fn build_model<R: Real>(
    config: &SystemConfig,
    total_new_rate: f64,
) -> Result<MarkovModel<R>, ModelError> {
    let (m, n, l, s) = derive_thresholds(config)?;
    let rates = derive_rates(config, total_new_rate);
    MarkovModel::new(
        m,
        n,
        l,
        s,
        R::from_f64_lossy(rates.new_voice),
        R::from_f64_lossy(rates.new_unicast),
        R::from_f64_lossy(rates.new_background),
        R::from_f64_lossy(rates.handover),
        R::from_f64_lossy(rates.service),
    )
}

// ----------------------------------------------------------------------
// Derived metrics
// ----------------------------------------------------------------------

/// Chain-level performance metrics beyond the raw probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticMetrics<R: Real = f64> {
    /// Probability an admitted call is eventually cut by a dropped handover
    /// (renewal over repeated handover attempts).
    pub forced_termination: R,
    /// Expected allocated bandwidth over capacity.
    pub utilization: R,
    /// Expected total MBS bandwidth, bits/s.
    pub mean_mbs_bw: R,
    /// Expected allocated non-MBS bandwidth, bits/s.
    pub mean_non_mbs_bw: R,
    /// Mean enhancement layers per MBS session (linear-in-bandwidth proxy).
    pub mean_mbs_layers: R,
    /// Mean enhancement layers per active unicast call (call-weighted).
    pub mean_unicast_layers: R,
}

/// Map each state to allocated bandwidth and aggregate.
///
/// MBS bandwidth interpolates linearly from the scheme's ceiling to its floor
/// across the degraded region (an approximation standing in for the technique's
/// step structure); per-call bandwidth uses the region's QoS-level mean.
pub fn derived_metrics<R: Real>(
    dist: &StationaryDistribution<R>,
    model: &MarkovModel<R>,
    config: &SystemConfig,
) -> AnalyticMetrics<R> {
    let policy: SchemePolicy = apply_scheme(config);
    let capacity = R::from_f64_lossy(config.capacity.as_f64());
    let (full_mean, mid_mean, min_mean) = qos_level_means(config);
    let ceiling = R::from_f64_lossy(match policy.mbs {
        MbsMode::Dynamic | MbsMode::FixedMax => config.mbs_total_max(),
        MbsMode::FixedMin => config.mbs_total_min(),
    }
    .as_f64());
    let floor = R::from_f64_lossy(match policy.mbs {
        MbsMode::Dynamic | MbsMode::FixedMin => config.mbs_total_min(),
        MbsMode::FixedMax => config.mbs_total_max(),
    }
    .as_f64());

    let n = model.full_end;
    let l = model.degrade_len;
    let mbs_at = |state: usize| -> R {
        if state <= n || ceiling == floor {
            ceiling
        } else if state <= n + l {
            let frac = R::from_usize_lossy(state - n) / R::from_usize_lossy(l);
            ceiling - (ceiling - floor) * frac
        } else {
            floor
        }
    };
    let per_call_at = |state: usize| -> R {
        match policy.non_mbs {
            NonMbsMode::Rigid => R::from_f64_lossy(full_mean),
            NonMbsMode::NonPrioritizedAdaptive => {
                // Single-region chain: blend from full quality at the floor
                // state down to minimum quality at the blocking boundary.
                let span = n - model.base_states;
                if span == 0 || state >= n {
                    R::from_f64_lossy(min_mean)
                } else {
                    let frac = R::from_usize_lossy(state - model.base_states)
                        / R::from_usize_lossy(span);
                    R::from_f64_lossy(full_mean)
                        - (R::from_f64_lossy(full_mean) - R::from_f64_lossy(min_mean)) * frac
                }
            }
            NonMbsMode::PrioritizedAdaptive => {
                if state <= n {
                    R::from_f64_lossy(full_mean)
                } else if state <= n + l {
                    R::from_f64_lossy(mid_mean)
                } else {
                    R::from_f64_lossy(min_mean)
                }
            }
        }
    };

    let mut mean_mbs = R::zero();
    let mut mean_non_mbs = R::zero();
    let mut mean_allocated = R::zero();
    let mut uni_layer_weight = R::zero();
    let mut call_weight = R::zero();
    let k_max = R::from_usize_lossy(config.unicast.max_layers as usize);
    let k_min = R::from_usize_lossy(config.unicast.min_layers as usize);
    for (state, p) in dist.states() {
        let mbs_bw = mbs_at(state);
        let calls = R::from_usize_lossy(state - model.base_states);
        let non_mbs = (calls * per_call_at(state)).min(capacity - mbs_bw);
        mean_mbs = mean_mbs + p * mbs_bw;
        mean_non_mbs = mean_non_mbs + p * non_mbs;
        mean_allocated = mean_allocated + p * (mbs_bw + non_mbs).min(capacity);
        // Unicast quality: full layers through the degraded region, floor beyond.
        let layers = if state <= n + l { k_max } else { k_min };
        uni_layer_weight = uni_layer_weight + p * calls * layers;
        call_weight = call_weight + p * calls;
    }

    let p_drop = dropping_probability(dist, model);
    let completion = R::from_f64_lossy(config.completion_rate());
    let dwell = R::from_f64_lossy(config.dwell_rate());
    let p_handover = dwell / (dwell + completion);
    let forced_termination =
        p_handover * p_drop / (R::one() - p_handover * (R::one() - p_drop));

    let layer_span: f64 = config
        .mbs_sessions
        .iter()
        .map(|s| s.layer_bw.as_f64())
        .sum();
    let base_total: f64 = config
        .mbs_sessions
        .iter()
        .map(|s| s.min_bw().as_f64())
        .sum();
    let min_layer_mean = if config.mbs_sessions.is_empty() {
        0.0
    } else {
        config
            .mbs_sessions
            .iter()
            .map(|s| s.min_layers as f64)
            .sum::<f64>()
            / config.mbs_sessions.len() as f64
    };
    let mean_mbs_layers = if layer_span > 0.0 {
        R::from_f64_lossy(min_layer_mean)
            + (mean_mbs - R::from_f64_lossy(base_total)) / R::from_f64_lossy(layer_span)
    } else {
        R::from_f64_lossy(min_layer_mean)
    };

    let mean_unicast_layers = if call_weight > R::zero() {
        uni_layer_weight / call_weight
    } else {
        k_max
    };

    AnalyticMetrics {
        forced_termination,
        utilization: mean_allocated / capacity,
        mean_mbs_bw: mean_mbs,
        mean_non_mbs_bw: mean_non_mbs,
        mean_mbs_layers,
        mean_unicast_layers,
    }
}

/// Full analytic evaluation of one operating point, as a [`MetricsReport`].
pub fn analyze(config: &SystemConfig, total_new_rate: f64) -> Result<MetricsReport, ModelError> {
    let model = build_model::<f64>(config, total_new_rate)?;
    let dist = solve(&model)?;
    let p_drop = dropping_probability(&dist, &model);
    let (p_block_vu, p_block_back) = blocking_probabilities(&dist, &model);
    let extra = derived_metrics(&dist, &model, config);
    Ok(MetricsReport {
        p_drop,
        p_block_voice: p_block_vu,
        p_block_unicast: p_block_vu,
        p_block_background: p_block_back,
        p_forced_termination: extra.forced_termination,
        utilization: extra.utilization,
        mean_mbs_bw: extra.mean_mbs_bw,
        mean_mbs_layers: extra.mean_mbs_layers,
        mean_unicast_layers: extra.mean_unicast_layers,
        counts: None,
        ci: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::load_config;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn baseline() -> SystemConfig {
        load_config(crate::BASELINE_CONFIG).unwrap()
    }

    /// Erlang-B closed form by the standard recurrence; the independent oracle.
    fn erlang_b(servers: usize, offered: f64) -> f64 {
        let mut b = 1.0;
        for k in 1..=servers {
            b = offered * b / (k as f64 + offered * b);
        }
        b
    }

    fn erlang_model(servers: usize, offered: f64) -> MarkovModel {
        // Single-region chain: all arrivals alike, unit service rate.
        MarkovModel::new(0, servers, 0, 0, offered, 0.0, 0.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn two_server_toy_matches_closed_form() {
        // lambda = mu over two rigid servers: probabilities 0.4, 0.4, 0.2 and
        // Erlang-B(2, 1) = 0.2.
        let model = MarkovModel::new(0, 2, 0, 0, 1.0, 0.0, 0.0, 0.0, 1.0).unwrap();
        let dist = solve(&model).unwrap();
        assert_relative_eq!(dist.prob(0), 0.4, max_relative = 1e-14);
        assert_relative_eq!(dist.prob(1), 0.4, max_relative = 1e-14);
        assert_relative_eq!(dist.prob(2), 0.2, max_relative = 1e-14);
        assert_relative_eq!(dropping_probability(&dist, &model), 0.2, max_relative = 1e-14);
        assert_relative_eq!(erlang_b(2, 1.0), 0.2, max_relative = 1e-14);
        let (p_vu, p_back) = blocking_probabilities(&dist, &model);
        assert_relative_eq!(p_vu, 0.2, max_relative = 1e-14);
        assert_relative_eq!(p_back, 0.2, max_relative = 1e-14);
    }

    #[test]
    fn vanishing_load_concentrates_at_the_floor_state() {
        let model = MarkovModel::new(3, 10, 2, 5, 1e-13, 0.0, 0.0, 1e-14, 1.0).unwrap();
        let dist = solve(&model).unwrap();
        assert!(dist.prob(3) > 1.0 - 1e-11);
    }

    #[test]
    fn distribution_normalizes_and_runs_long_chains() {
        // 10_000 states would overflow naive factorials; the renormalized
        // recurrence must stay finite and sum to one.
        let model = MarkovModel::new(0, 8_000, 1_000, 2_000, 300.0, 20.0, 80.0, 50.0, 0.05).unwrap();
        let dist = solve(&model).unwrap();
        assert_relative_eq!(dist.sum(), 1.0, epsilon = 1e-12);
        assert!(max_balance_residual(&model, &dist) < 1e-10);
    }

    #[test]
    fn product_form_agrees_with_recurrence() {
        let model = MarkovModel::new(12, 73, 60, 101, 0.5, 0.1, 0.4, 0.18, 0.0101851).unwrap();
        let dist = solve(&model).unwrap();
        let p_drop = dropping_probability(&dist, &model);
        let p_drop_pf = dropping_probability_product_form(&model);
        assert_relative_eq!(p_drop, p_drop_pf, max_relative = 1e-12);
        let (p_vu, p_back) = blocking_probabilities(&dist, &model);
        let (p_vu_pf, p_back_pf) = blocking_probabilities_product_form(&model);
        assert_relative_eq!(p_vu, p_vu_pf, max_relative = 1e-12);
        assert_relative_eq!(p_back, p_back_pf, max_relative = 1e-12);
    }

    #[test]
    fn handover_only_chain_reduces_to_erlang_b() {
        // When every arrival is a handover the region split is vacuous and the
        // chain is a plain loss system again.
        let servers = 8;
        let model = MarkovModel::new(0, 5, 3, 3, 0.0, 0.0, 0.0, 2.0, 1.0).unwrap();
        let dist = solve(&model).unwrap();
        assert_relative_eq!(
            dropping_probability(&dist, &model),
            erlang_b(servers, 2.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn unreachable_tail_zeroes_the_dropping_probability() {
        let model = MarkovModel::new(0, 5, 1, 4, 1.0, 0.2, 0.3, 1e-280, 1.0).unwrap();
        let dist = solve(&model).unwrap();
        // Three tail states gated by a vanishing handover rate.
        assert!(dropping_probability(&dist, &model) < 1e-300);
    }

    #[test]
    fn erlang_reduction_over_grid() {
        for servers in [1usize, 5, 20, 100, 200] {
            for offered in [0.1, 1.0, 5.0, 20.0] {
                let model = erlang_model(servers, offered);
                let dist = solve(&model).unwrap();
                let b = erlang_b(servers, offered);
                assert_relative_eq!(
                    dropping_probability(&dist, &model),
                    b,
                    max_relative = 1e-10,
                    epsilon = 1e-300
                );
            }
        }
    }

    #[test]
    fn scheme_aware_thresholds() {
        // Recomputed by hand from the baseline pools (8 or 14 Mbps) and the
        // QoS-level means (130 / 115.6 / 86 kbps).
        let expect = [
            (1u8, (12usize, 73usize, 60usize, 101usize)),
            (2, (12, 73, 8, 32)),
            (3, (12, 105, 0, 0)),
            (4, (12, 73, 0, 0)),
            (5, (12, 119, 14, 55)),
            (6, (12, 174, 0, 0)),
            (7, (12, 119, 0, 0)),
        ];
        for (scheme, want) in expect {
            let mut cfg = baseline();
            cfg.scheme = crate::SchemeId::new(scheme).unwrap();
            assert_eq!(derive_thresholds(&cfg).unwrap(), want, "scheme {scheme}");
        }
    }

    #[test]
    fn baseline_thresholds_match_recomputation() {
        let cfg = baseline();
        // Weighted mean at full quality: (5*64 + 1*500 + 4*120)/10 = 130 kbps.
        let (full, mid, min) = qos_level_means(&cfg);
        assert_relative_eq!(full, 130_000.0, max_relative = 1e-12);
        assert_relative_eq!(mid, 115_600.0, max_relative = 1e-12);
        assert_relative_eq!(min, 86_000.0, max_relative = 1e-12);

        let (m, n, l, s) = derive_thresholds(&cfg).unwrap();
        assert_eq!(m, 12);
        // floor(8 Mbps / 130 kbps) = 61 full-quality calls.
        assert_eq!(n - m, 61);
        // floor(14 Mbps / 115.6 kbps) = 121; floor(14 Mbps / 86 kbps) = 162.
        assert_eq!(l, 121 - 61);
        assert_eq!(s, 162 - 61);
    }

    #[test]
    fn thresholds_scale_with_capacity() {
        // With no MBS reservation the pool is the whole capacity, so the
        // construction is linear in it.
        let mut cfg = baseline();
        cfg.mbs_sessions.clear();
        let mut doubled = cfg.clone();
        doubled.capacity = crate::Bandwidth::from_mbps(40);
        let (m, n, _, _) = derive_thresholds(&cfg).unwrap();
        let (m2, n2, _, _) = derive_thresholds(&doubled).unwrap();
        let grew = (n2 - m2) as i64 - 2 * (n - m) as i64;
        assert!(grew.abs() <= 1, "doubling capacity should double the region within rounding");
    }

    #[test]
    fn rigid_class_blind_config_collapses_to_single_region() {
        let mut cfg = baseline();
        cfg.mbs_sessions.clear();
        cfg.voice.bandwidth = crate::Bandwidth::from_kbps(100);
        cfg.unicast.base_layer_bw = crate::Bandwidth::from_kbps(100);
        cfg.unicast.max_layers = 0;
        cfg.unicast.min_layers = 0;
        cfg.background.requested_bw = crate::Bandwidth::from_kbps(100);
        cfg.background.handover_degrade_fraction = 0.0;
        cfg.background.newcall_degrade_fraction = 0.0;
        cfg.capacity = crate::Bandwidth::from_mbps(2);
        cfg.validate().unwrap();
        let (m, n, l, s) = derive_thresholds(&cfg).unwrap();
        assert_eq!((m, n - m, l, s), (0, 20, 0, 0));
    }

    #[test]
    fn degenerate_capacity_is_an_error() {
        // Rigid sessions eating the whole cell: no room for a single call.
        let mut cfg = baseline();
        for s in &mut cfg.mbs_sessions {
            s.max_layers = 0;
            s.min_layers = 0;
        }
        cfg.capacity = cfg.mbs_total_max();
        cfg.validate().unwrap();
        assert!(matches!(
            derive_thresholds(&cfg),
            Err(ModelError::Degenerate(_))
        ));
    }

    #[test]
    fn rates_split_and_limits() {
        let cfg = baseline();
        let rates = derive_rates(&cfg, 1.0);
        assert_relative_eq!(rates.new_voice, 0.5, max_relative = 1e-12);
        assert_relative_eq!(rates.new_unicast, 0.1, max_relative = 1e-12);
        assert_relative_eq!(rates.new_background, 0.4, max_relative = 1e-12);
        // mu = 1/120 + 1/540
        assert_relative_eq!(rates.service, 1.0 / 120.0 + 1.0 / 540.0, max_relative = 1e-12);
        // handover share eta/(eta + mu_c) = (1/540)/(1/540 + 1/120) = 2/11
        assert_relative_eq!(rates.handover, 2.0 / 11.0, max_relative = 1e-12);

        let mut immobile = cfg.clone();
        immobile.mean_dwell_time_s = 1e15;
        let rates = derive_rates(&immobile, 1.0);
        assert!(rates.handover < 1e-12);
        assert_relative_eq!(rates.service, 1.0 / 120.0, max_relative = 1e-6);
    }

    #[test]
    fn forced_termination_limits() {
        let cfg = baseline();
        let model = build_model::<f64>(&cfg, 1e-12).unwrap();
        let dist = solve(&model).unwrap();
        let metrics = derived_metrics(&dist, &model, &cfg);
        // Dropping is impossible at vanishing load, so forced termination is too.
        assert!(metrics.forced_termination < 1e-9);

        let mut immobile = cfg.clone();
        immobile.mean_dwell_time_s = 1e15;
        let model = build_model::<f64>(&immobile, 0.8).unwrap();
        let dist = solve(&model).unwrap();
        let metrics = derived_metrics(&dist, &model, &immobile);
        assert!(metrics.forced_termination < 1e-9, "no handovers, no forced terminations");
    }

    #[test]
    fn saturation_pushes_utilization_to_one_and_mbs_to_the_floor() {
        let cfg = baseline();
        let model = build_model::<f64>(&cfg, 1e9).unwrap();
        let dist = solve(&model).unwrap();
        let metrics = derived_metrics(&dist, &model, &cfg);
        assert!(metrics.utilization > 0.995, "got {}", metrics.utilization);
        assert_relative_eq!(
            metrics.mean_mbs_bw,
            cfg.mbs_total_min().as_f64(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn f32_instantiation_solves_small_models() {
        let model = MarkovModel::<f32>::new(0, 2, 0, 0, 1.0, 0.0, 0.0, 0.0, 1.0).unwrap();
        let dist = solve(&model).unwrap();
        assert!((dist.prob(2) - 0.2).abs() < 1e-6);
    }

    proptest! {
        /// Random feasible models: normalization, balance, probability nesting,
        /// and product-form agreement.
        #[test]
        fn chain_consistency_random_models(
            m in 0usize..20,
            n_off in 1usize..80,
            l in 0usize..40,
            s_extra in 0usize..40,
            lv in 1e-3f64..10.0,
            lu in 1e-3f64..10.0,
            lb in 1e-3f64..10.0,
            lh in 1e-3f64..10.0,
            mu in 1e-3f64..1.0,
        ) {
            let model = MarkovModel::new(
                m, m + n_off, l, l + s_extra, lv, lu, lb, lh, mu,
            ).unwrap();
            let dist = solve(&model).unwrap();
            prop_assert!((dist.sum() - 1.0).abs() < 1e-12);
            prop_assert!(max_balance_residual(&model, &dist) < 1e-10);

            let p_drop = dropping_probability(&dist, &model);
            let (p_vu, p_back) = blocking_probabilities(&dist, &model);
            prop_assert!(p_drop <= p_vu + 1e-15);
            prop_assert!(p_vu <= p_back + 1e-15);

            let pf_drop = dropping_probability_product_form(&model);
            let (pf_vu, pf_back) = blocking_probabilities_product_form(&model);
            prop_assert!((p_drop - pf_drop).abs() <= 1e-12 * p_drop.max(pf_drop).max(1e-300));
            prop_assert!((p_vu - pf_vu).abs() <= 1e-12 * p_vu.max(pf_vu).max(1e-300));
            prop_assert!((p_back - pf_back).abs() <= 1e-12 * p_back.max(pf_back).max(1e-300));
        }

        /// All three probabilities are non-decreasing in the offered load.
        #[test]
        fn probabilities_monotone_in_load(rate_lo in 0.05f64..1.0, step in 1.05f64..2.0) {
            let cfg = baseline();
            let mut prev: Option<(f64, f64, f64)> = None;
            for k in 0..4 {
                let rate = rate_lo * step.powi(k);
                let model = build_model::<f64>(&cfg, rate).unwrap();
                let dist = solve(&model).unwrap();
                let p_drop = dropping_probability(&dist, &model);
                let (p_vu, p_back) = blocking_probabilities(&dist, &model);
                if let Some((d0, v0, b0)) = prev {
                    prop_assert!(p_drop >= d0 - 1e-12);
                    prop_assert!(p_vu >= v0 - 1e-12);
                    prop_assert!(p_back >= b0 - 1e-12);
                }
                prev = Some((p_drop, p_vu, p_back));
            }
        }
    }
}
