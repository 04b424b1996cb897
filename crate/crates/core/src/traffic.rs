//! Flow population: Poisson arrivals, hyper-exponential lifetimes and a
//! per-flow fluid emission process.
//!
//! Every random draw comes from a ChaCha stream seeded from the run seed, so a
//! `(TrafficConfig, seed)` pair pins the whole trace. Arrival/lifetime draws
//! and per-flow emission draws use separate streams; adding flows or querying
//! emission at different tick sizes never perturbs the arrival sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a flow emits bits while it is alive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmissionModel {
    /// Sends at `avg_rate` for its whole lifetime.
    Constant,
    /// Alternates between `peak_rate` (ON) and silence (OFF) with exponential
    /// sojourns; the duty cycle is `avg_rate / peak_rate`.
    OnOff,
}

impl EmissionModel {
    pub fn as_str(self) -> &'static str {
        match self {
            EmissionModel::Constant => "constant",
            EmissionModel::OnOff => "on_off",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "constant" | "cbr" => Some(EmissionModel::Constant),
            "on_off" | "onoff" => Some(EmissionModel::OnOff),
            _ => None,
        }
    }
}

/// One traffic flow as seen by the admission controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub flow_id: u64,
    /// Seconds since the start of the run.
    pub arrival_time: f64,
    /// Seconds.
    pub lifetime: f64,
    /// Bits per second.
    pub avg_rate: f64,
    /// Bits per second.
    pub peak_rate: f64,
    /// Origin label used by the scheme-selection policy.
    pub source_tag: String,
}

impl FlowSpec {
    pub fn departure_time(&self) -> f64 {
        self.arrival_time + self.lifetime
    }

    pub fn is_active_at(&self, t: f64) -> bool {
        self.arrival_time <= t && t < self.departure_time()
    }

    pub fn validate(&self) -> Result<()> {
        let key = |f: &str| format!("flow[{}].{f}", self.flow_id);
        if !(self.avg_rate > 0.0 && self.avg_rate <= self.peak_rate) {
            return Err(Error::config(
                key("avg_rate"),
                format!(
                    "need 0 < avg_rate <= peak_rate, got {} / {}",
                    self.avg_rate, self.peak_rate
                ),
            ));
        }
        if !(self.lifetime > 0.0) {
            return Err(Error::config(key("lifetime"), "must be positive"));
        }
        if !(self.arrival_time >= 0.0) {
            return Err(Error::config(key("arrival_time"), "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficConfig {
    pub mean_interarrival: f64,
    /// Nominal mean lifetime, used for offered-load reporting. Per-flow means
    /// are drawn uniformly from `[lifetime_min_mean, lifetime_max_mean]`.
    pub mean_lifetime: f64,
    pub lifetime_min_mean: f64,
    pub lifetime_max_mean: f64,
    pub avg_rate: f64,
    pub peak_rate: f64,
    pub emission_model: EmissionModel,
    /// Mean ON sojourn in seconds (ON/OFF only).
    pub on_mean: f64,
    pub rng_seed: u64,
    /// Flows are tagged uniformly at random from this list.
    pub source_tags: Vec<String>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            mean_interarrival: 8.0,
            mean_lifetime: 75.0,
            lifetime_min_mean: 30.0,
            lifetime_max_mean: 120.0,
            avg_rate: 1e6,
            peak_rate: 1.2e6,
            emission_model: EmissionModel::OnOff,
            on_mean: 10.0,
            rng_seed: 0,
            source_tags: vec!["edge-a".to_string()],
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be a positive finite number, got {v}")))
            }
        };
        positive("traffic.mean_interarrival", self.mean_interarrival)?;
        positive("traffic.mean_lifetime", self.mean_lifetime)?;
        positive("traffic.lifetime_min_mean", self.lifetime_min_mean)?;
        positive("traffic.lifetime_max_mean", self.lifetime_max_mean)?;
        positive("traffic.avg_rate", self.avg_rate)?;
        positive("traffic.peak_rate", self.peak_rate)?;
        if self.lifetime_min_mean > self.lifetime_max_mean {
            return Err(Error::config(
                "traffic.lifetime_min_mean",
                "must not exceed traffic.lifetime_max_mean",
            ));
        }
        if self.mean_lifetime < self.lifetime_min_mean || self.mean_lifetime > self.lifetime_max_mean {
            return Err(Error::config(
                "traffic.mean_lifetime",
                format!(
                    "must lie in [{}, {}]",
                    self.lifetime_min_mean, self.lifetime_max_mean
                ),
            ));
        }
        if self.avg_rate > self.peak_rate {
            return Err(Error::config(
                "traffic.avg_rate",
                "must not exceed traffic.peak_rate",
            ));
        }
        if self.emission_model == EmissionModel::OnOff {
            positive("traffic.on_mean", self.on_mean)?;
        }
        if self.source_tags.is_empty() {
            return Err(Error::config("traffic.source_tags", "needs at least one tag"));
        }
        Ok(())
    }

    /// Mean OFF sojourn that makes the long-run rate equal `avg_rate`.
    pub fn off_mean(&self) -> f64 {
        self.on_mean * (self.peak_rate - self.avg_rate) / self.avg_rate
    }

    /// Offered load in bits per second (arrival rate x mean lifetime x mean rate).
    pub fn offered_load(&self) -> f64 {
        self.avg_rate * self.mean_lifetime / self.mean_interarrival
    }
}

/// Draws the arrival sequence over `[0, horizon)`.
pub fn generate_arrivals(config: &TrafficConfig, horizon: f64) -> Result<Vec<FlowSpec>> {
    config.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::config("experiment.horizon", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let gap = Exp::new(1.0 / config.mean_interarrival)
        .map_err(|e| Error::config("traffic.mean_interarrival", e.to_string()))?;

    let mut flows = Vec::new();
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut rng);
        if t >= horizon {
            break;
        }
        let mean = if config.lifetime_max_mean > config.lifetime_min_mean {
            rng.gen_range(config.lifetime_min_mean..=config.lifetime_max_mean)
        } else {
            config.lifetime_min_mean
        };
        let mut lifetime = Exp::new(1.0 / mean)
            .map_err(|e| Error::config("traffic.lifetime_min_mean", e.to_string()))?
            .sample(&mut rng);
        if lifetime <= 0.0 {
            lifetime = f64::MIN_POSITIVE;
        }
        let tag = if config.source_tags.len() > 1 {
            &config.source_tags[rng.gen_range(0..config.source_tags.len())]
        } else {
            &config.source_tags[0]
        };
        flows.push(FlowSpec {
            flow_id: flows.len() as u64,
            arrival_time: t,
            lifetime,
            avg_rate: config.avg_rate,
            peak_rate: config.peak_rate,
            source_tag: tag.clone(),
        });
    }
    Ok(flows)
}

const EMISSION_SEED_SALT: u64 = 0x5deece66d_u64;

/// Per-flow emission process.
///
/// Queries must normally move forward in time; a query earlier than the last
/// one replays the stream from the flow's start, so results never depend on
/// query order.
#[derive(Debug, Clone)]
pub struct EmissionState {
    model: EmissionModel,
    on_mean: f64,
    off_mean: f64,
    origin: ChaCha8Rng,
    rng: ChaCha8Rng,
    on: bool,
    /// Start of the current sojourn.
    since: f64,
    /// End of the current sojourn (infinite when the state never switches).
    until: f64,
    start: f64,
}

impl EmissionState {
    pub fn new(flow: &FlowSpec, config: &TrafficConfig, run_seed: u64) -> Self {
        let mut origin = ChaCha8Rng::seed_from_u64(run_seed ^ EMISSION_SEED_SALT);
        origin.set_stream(flow.flow_id.wrapping_add(1));
        let off_mean = config.on_mean * (flow.peak_rate - flow.avg_rate) / flow.avg_rate;
        let mut state = EmissionState {
            model: config.emission_model,
            on_mean: config.on_mean,
            off_mean,
            rng: origin.clone(),
            origin,
            on: true,
            since: flow.arrival_time,
            until: f64::INFINITY,
            start: flow.arrival_time,
        };
        state.restart();
        state
    }

    fn restart(&mut self) {
        self.rng = self.origin.clone();
        self.since = self.start;
        self.until = f64::INFINITY;
        self.on = true;
        if self.model == EmissionModel::OnOff && self.off_mean > 0.0 {
            // Start in the stationary regime; sojourns are memoryless.
            let duty = self.on_mean / (self.on_mean + self.off_mean);
            self.on = self.rng.gen_bool(duty);
            self.until = self.start + self.draw_sojourn();
        }
    }

    fn draw_sojourn(&mut self) -> f64 {
        let mean = if self.on { self.on_mean } else { self.off_mean };
        Exp::new(1.0 / mean).expect("positive sojourn mean").sample(&mut self.rng)
    }

    fn advance_to(&mut self, t: f64) {
        if t < self.since {
            self.restart();
        }
        while self.until <= t {
            self.on = !self.on;
            self.since = self.until;
            self.until = self.since + self.draw_sojourn();
        }
    }

    fn current_rate(&self, flow: &FlowSpec) -> f64 {
        match self.model {
            EmissionModel::Constant => flow.avg_rate,
            EmissionModel::OnOff if self.on => flow.peak_rate,
            EmissionModel::OnOff => 0.0,
        }
    }

    /// Whether an ON/OFF flow is currently in its ON state (always true for
    /// constant flows).
    pub fn is_on(&self) -> bool {
        self.model == EmissionModel::Constant || self.on
    }

    /// Instantaneous rate in bits per second at `t`.
    pub fn rate_at(&mut self, flow: &FlowSpec, t: f64) -> Result<f64> {
        if !flow.is_active_at(t) {
            return Err(Error::OutOfInterval {
                flow_id: flow.flow_id,
                t,
                start: flow.arrival_time,
                end: flow.departure_time(),
            });
        }
        if self.model == EmissionModel::Constant {
            return Ok(flow.avg_rate);
        }
        self.advance_to(t);
        Ok(self.current_rate(flow))
    }

    /// Bits emitted over `[t0, t1)` intersected with the flow's active interval.
    pub fn bits_between(&mut self, flow: &FlowSpec, t0: f64, t1: f64) -> f64 {
        let a = t0.max(flow.arrival_time);
        let b = t1.min(flow.departure_time());
        if b <= a {
            return 0.0;
        }
        if self.model == EmissionModel::Constant {
            return flow.avg_rate * (b - a);
        }
        self.advance_to(a);
        let mut bits = 0.0;
        let mut cur = a;
        loop {
            let seg_end = self.until.min(b);
            bits += self.current_rate(flow) * (seg_end - cur);
            if seg_end >= b {
                break;
            }
            cur = seg_end;
            self.advance_to(cur);
        }
        bits
    }
}

/// Free-function form of [`EmissionState::rate_at`].
pub fn flow_rate_at(flow: &FlowSpec, t: f64, state: &mut EmissionState) -> Result<f64> {
    state.rate_at(flow, t)
}
