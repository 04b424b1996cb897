//! Bottleneck link: fluid token-bucket shaper plus demand aggregation.
//!
//! All volumes inside the shaper are carried in bits; the byte-denominated
//! bucket and limit from [`LinkConfig`] are converted on entry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::{EmissionState, FlowSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    /// Total link capacity `T`, bits per second.
    pub capacity: f64,
    /// Token fill rate, bits per second.
    pub tbf_rate: f64,
    /// Bucket depth, bytes.
    pub tbf_burst: f64,
    /// Maximum queued volume, bytes.
    pub tbf_limit: f64,
    /// Bytes. Kept for parity with the shaper command line; the fluid model
    /// does not packetize.
    pub mtu: u32,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            capacity: 1e7,
            tbf_rate: 1e7,
            tbf_burst: 1_250_000.0,
            tbf_limit: 1_250_000.0,
            mtu: 1540,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return Err(Error::config("link.capacity", "must be positive"));
        }
        if !(self.tbf_rate > 0.0 && self.tbf_rate.is_finite()) {
            return Err(Error::config("link.tbf_rate", "must be positive"));
        }
        if !(self.tbf_burst > 0.0 && self.tbf_burst.is_finite()) {
            return Err(Error::config("link.tbf_burst", "must be positive"));
        }
        if !(self.tbf_limit >= 0.0 && self.tbf_limit.is_finite()) {
            return Err(Error::config("link.tbf_limit", "must be non-negative"));
        }
        Ok(())
    }

    pub fn burst_bits(&self) -> f64 {
        self.tbf_burst * 8.0
    }

    pub fn limit_bits(&self) -> f64 {
        self.tbf_limit * 8.0
    }
}

/// Token bucket contents and queued backlog, both in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShaperState {
    pub tokens: f64,
    pub backlog: f64,
}

impl ShaperState {
    /// Full bucket, empty queue.
    pub fn full(config: &LinkConfig) -> Self {
        ShaperState {
            tokens: config.tbf_burst,
            backlog: 0.0,
        }
    }

    pub fn within_bounds(&self, config: &LinkConfig) -> bool {
        (0.0..=config.tbf_burst).contains(&self.tokens)
            && (0.0..=config.tbf_limit).contains(&self.backlog)
    }
}

/// Result of one shaper tick. Volumes in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutcome {
    pub state: ShaperState,
    pub output: f64,
    pub dropped: f64,
}

/// Advances the shaper by one tick.
///
/// Tokens refill first (capped at the bucket depth), then queued plus newly
/// arriving bits leave as far as tokens and the line rate allow; whatever
/// still does not fit in the queue limit is dropped.
pub fn shape_tick(state: ShaperState, demand: f64, dt: f64, config: &LinkConfig) -> TickOutcome {
    debug_assert!(dt > 0.0 && demand >= 0.0);
    let burst_bits = config.burst_bits();
    let tokens = (state.tokens * 8.0 + config.tbf_rate * dt).min(burst_bits);
    let queued = state.backlog * 8.0 + demand;
    let output = queued.min(tokens).min(config.capacity * dt);
    let remaining = queued - output;
    let limit_bits = config.limit_bits();
    let (backlog, dropped) = if remaining > limit_bits {
        (limit_bits, remaining - limit_bits)
    } else {
        (remaining, 0.0)
    };
    TickOutcome {
        state: ShaperState {
            tokens: ((tokens - output) / 8.0).clamp(0.0, config.tbf_burst),
            backlog: (backlog / 8.0).clamp(0.0, config.tbf_limit),
        },
        output,
        dropped,
    }
}

/// A flow admitted onto the link together with its emission process.
#[derive(Debug, Clone)]
pub struct ActiveFlow {
    pub spec: FlowSpec,
    pub emission: EmissionState,
}

/// Bits offered by `flows` over `[t, t + dt)`.
pub fn aggregate_demand<'a>(flows: impl IntoIterator<Item = &'a mut ActiveFlow>, t: f64, dt: f64) -> f64 {
    flows
        .into_iter()
        .map(|f| f.emission.bits_between(&f.spec, t, t + dt))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::{EmissionModel, TrafficConfig};

    #[test]
    fn idle_link() {
        let c = LinkConfig::default();
        let out = shape_tick(ShaperState::full(&c), 0.0, 0.1, &c);
        assert_eq!(out.output, 0.0);
        assert_eq!(out.dropped, 0.0);
        assert_eq!(out.state.tokens, c.tbf_burst);
        assert_eq!(out.state.backlog, 0.0);
    }

    #[test]
    fn demand_at_rate_passes_through() {
        let c = LinkConfig::default();
        let dt = 0.1;
        let mut s = ShaperState::full(&c);
        for _ in 0..200 {
            let out = shape_tick(s, c.tbf_rate * dt, dt, &c);
            assert!((out.output - c.tbf_rate * dt).abs() < 1e-6);
            assert_eq!(out.dropped, 0.0);
            s = out.state;
        }
    }

    #[test]
    fn sustained_overload_respects_envelope() {
        let c = LinkConfig::default();
        let dt = 0.1;
        let mut s = ShaperState::full(&c);
        let mut total = 0.0;
        for _ in 0..100 {
            let out = shape_tick(s, 2.0 * c.tbf_rate * dt, dt, &c);
            total += out.output;
            s = out.state;
        }
        assert!(total <= c.burst_bits() + c.tbf_rate * 10.0 + 1e-6);
    }

    #[test]
    fn queue_overflow_drops() {
        let c = LinkConfig {
            tbf_limit: 1000.0,
            ..LinkConfig::default()
        };
        let out = shape_tick(ShaperState::full(&c), 1e7, 0.1, &c);
        assert!((out.output - 1e6).abs() < 1e-6);
        assert!((out.state.backlog - 1000.0).abs() < 1e-9);
        assert!((out.dropped - (1e7 - 1e6 - 8000.0)).abs() < 1e-6);
    }

    fn flow(id: u64, avg: f64) -> FlowSpec {
        FlowSpec {
            flow_id: id,
            arrival_time: 0.0,
            lifetime: 1e6,
            avg_rate: avg,
            peak_rate: avg * 1.2,
            source_tag: String::new(),
        }
    }

    #[test]
    fn demand_sums() {
        assert_eq!(aggregate_demand(&mut Vec::<ActiveFlow>::new(), 0.0, 1.0), 0.0);
        let tc = TrafficConfig {
            emission_model: EmissionModel::Constant,
            ..TrafficConfig::default()
        };
        let mut flows: Vec<ActiveFlow> = (0..3)
            .map(|i| {
                let spec = flow(i, 1e6);
                ActiveFlow {
                    emission: EmissionState::new(&spec, &tc, 0),
                    spec,
                }
            })
            .collect();
        assert!((aggregate_demand(&mut flows, 5.0, 1.0) - 3e6).abs() < 1e-6);
    }
}
