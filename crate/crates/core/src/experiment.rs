//! End-to-end runs: traffic, admission, shaping and telemetry advanced on a
//! fixed tick, then aggregated across seeds.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admission::{AdmissionDecision, AdmissionRequest, GebConfig, SchemeKind, SchemeState, SelectionPolicy};
use crate::error::{Error, Result};
use crate::link::{aggregate_demand, shape_tick, ActiveFlow, LinkConfig, ShaperState};
use crate::stats::{ci95_half_width, compute_gains, mean, moving_average, GainRow, SchemeMetrics};
use crate::telemetry::{LinkMonitor, SamplerConfig};
use crate::traffic::{generate_arrivals, EmissionState, FlowSpec, TrafficConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub traffic: TrafficConfig,
    pub link: LinkConfig,
    pub sampler: SamplerConfig,
    /// Utilization target for PBAC-ES and SWMSA.
    pub theta: f64,
    pub geb: GebConfig,
    pub ewma_beta: f64,
    /// Scheme routing for single-policy runs.
    pub policy: SelectionPolicy,
    /// Schemes compared side by side, each on its own run per seed.
    pub schemes: Vec<SchemeKind>,
    /// Scheme whose gains over the others are tabulated.
    pub gain_target: SchemeKind,
    pub tick_dt: f64,
    pub horizon: f64,
    pub warmup_discard: f64,
    pub runs: usize,
    pub base_seed: u64,
    /// Log every scheme's verdict at each arrival; `authoritative` alone
    /// decides which flows enter.
    pub coupled_mode: bool,
    pub authoritative: SchemeKind,
    /// Samples per trailing moving-average point in usage series.
    pub moving_average_window: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            traffic: TrafficConfig::default(),
            link: LinkConfig::default(),
            sampler: SamplerConfig::default(),
            theta: 1.0,
            geb: GebConfig::default(),
            ewma_beta: 0.2,
            policy: SelectionPolicy::single(SchemeKind::EwmaPbac),
            schemes: SchemeKind::ALL.to_vec(),
            gain_target: SchemeKind::EwmaPbac,
            tick_dt: 0.1,
            horizon: 14_400.0,
            warmup_discard: 60.0,
            runs: 10,
            base_seed: 1,
            coupled_mode: false,
            authoritative: SchemeKind::EwmaPbac,
            moving_average_window: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.traffic.validate()?;
        self.link.validate()?;
        self.sampler.validate()?;
        self.geb.validate()?;
        self.policy.validate()?;
        SchemeState::new(self.link.capacity, self.theta, self.geb)?;
        crate::telemetry::EwmaState::new(self.ewma_beta)?;
        if !(self.tick_dt > 0.0 && self.tick_dt.is_finite()) {
            return Err(Error::config("experiment.tick_dt", "must be positive"));
        }
        if !(self.horizon.is_finite() && self.warmup_discard >= 0.0 && self.horizon > self.warmup_discard) {
            return Err(Error::config(
                "experiment.horizon",
                format!(
                    "need horizon > warmup_discard >= 0, got {} and {}",
                    self.horizon, self.warmup_discard
                ),
            ));
        }
        if self.runs == 0 {
            return Err(Error::config("experiment.runs", "must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("experiment.schemes", "needs at least one scheme"));
        }
        if self.moving_average_window == 0 {
            return Err(Error::config("report.moving_average_window", "must be at least 1"));
        }
        crate::telemetry::Sampler::new(&self.sampler, self.tick_dt, 0.0)?;
        Ok(())
    }

    /// Copy of this config routing every request to `scheme`.
    pub fn with_scheme(&self, scheme: SchemeKind) -> Self {
        ExperimentConfig {
            policy: SelectionPolicy::single(scheme),
            ..self.clone()
        }
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        let base = self.base_seed;
        (0..self.runs as u64).map(move |i| base.wrapping_add(i))
    }
}

/// One admission request as it was decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub time: f64,
    pub flow_id: u64,
    pub source_tag: String,
    /// Whether the request falls after the warm-up and enters the metrics.
    pub counted: bool,
    pub decision: AdmissionDecision,
}

/// Every scheme's verdict on one shared state, in `SchemeKind::ALL` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledRecord {
    pub time: f64,
    pub flow_id: u64,
    pub decisions: Vec<AdmissionDecision>,
}

impl CoupledRecord {
    pub fn verdict(&self, scheme: SchemeKind) -> Option<&AdmissionDecision> {
        self.decisions.iter().find(|d| d.scheme == scheme)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsageRow {
    pub timestamp: f64,
    pub usage: f64,
    pub moving_average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Scheme name, or `policy` when requests were routed to several schemes.
    pub label: String,
    pub scheme: Option<SchemeKind>,
    pub seed: u64,
    pub requests: usize,
    pub admitted: usize,
    pub rejected: usize,
    pub blocking_probability: f64,
    pub avg_utilization: f64,
    pub dropped_bits: f64,
    pub usage_series: Vec<UsageRow>,
    pub decisions: Vec<DecisionRecord>,
    pub coupled: Vec<CoupledRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Departure {
    time: f64,
    flow_id: u64,
}

impl Eq for Departure {}

impl Ord for Departure {
    // Reversed so the heap pops the earliest departure first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.flow_id.cmp(&self.flow_id))
    }
}

impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A single run, advanced one tick at a time.
pub struct Simulation {
    config: ExperimentConfig,
    seed: u64,
    arrivals: Vec<FlowSpec>,
    next_arrival: usize,
    active: BTreeMap<u64, ActiveFlow>,
    departures: BinaryHeap<Departure>,
    scheme_state: SchemeState,
    policy: SelectionPolicy,
    monitor: LinkMonitor,
    shaper: ShaperState,
    tick: u64,
    total_ticks: u64,
    post_warmup_bits: f64,
    dropped_bits: f64,
    samples: Vec<(f64, f64)>,
    decisions: Vec<DecisionRecord>,
    coupled: Vec<CoupledRecord>,
}

impl Simulation {
    pub fn new(config: &ExperimentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let traffic = TrafficConfig {
            rng_seed: seed,
            ..config.traffic.clone()
        };
        let arrivals = generate_arrivals(&traffic, config.horizon)?;
        Ok(Simulation {
            config: ExperimentConfig {
                traffic,
                ..config.clone()
            },
            seed,
            arrivals,
            next_arrival: 0,
            active: BTreeMap::new(),
            departures: BinaryHeap::new(),
            scheme_state: SchemeState::new(config.link.capacity, config.theta, config.geb)?,
            policy: config.policy.clone(),
            monitor: LinkMonitor::new(&config.sampler, config.tick_dt, config.ewma_beta)?,
            shaper: ShaperState::full(&config.link),
            tick: 0,
            total_ticks: (config.horizon / config.tick_dt).round() as u64,
            post_warmup_bits: 0.0,
            dropped_bits: 0.0,
            samples: Vec::new(),
            decisions: Vec::new(),
            coupled: Vec::new(),
        })
    }

    /// Replaces the routing policy; flows already admitted are untouched.
    pub fn set_policy(&mut self, policy: SelectionPolicy) -> Result<()> {
        policy.validate()?;
        self.policy = policy;
        Ok(())
    }

    pub fn now(&self) -> f64 {
        self.tick as f64 * self.config.tick_dt
    }

    pub fn is_finished(&self) -> bool {
        self.tick >= self.total_ticks
    }

    pub fn scheme_state(&self) -> &SchemeState {
        &self.scheme_state
    }

    pub fn active_flow_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.active.keys().copied()
    }

    pub fn arrivals(&self) -> &[FlowSpec] {
        &self.arrivals
    }

    fn depart_until(&mut self, t: f64) -> Result<()> {
        while let Some(d) = self.departures.peek().copied() {
            if d.time > t {
                break;
            }
            self.departures.pop();
            if let Some(flow) = self.active.remove(&d.flow_id) {
                self.scheme_state.on_depart(&flow.spec)?;
            }
        }
        Ok(())
    }

    fn handle_arrival(&mut self, flow: FlowSpec) -> Result<()> {
        self.depart_until(flow.arrival_time)?;
        let req = AdmissionRequest::for_flow(&flow);
        let snapshot = self.monitor.snapshot();
        let decision = if self.config.coupled_mode {
            let decisions = SchemeKind::ALL
                .iter()
                .map(|&s| self.scheme_state.decide(s, &snapshot, &req))
                .collect::<Result<Vec<_>>>()?;
            let chosen = *decisions
                .iter()
                .find(|d| d.scheme == self.config.authoritative)
                .expect("authoritative scheme is one of ALL");
            self.coupled.push(CoupledRecord {
                time: flow.arrival_time,
                flow_id: flow.flow_id,
                decisions,
            });
            chosen
        } else {
            let scheme = self.policy.select_scheme(&flow.source_tag)?;
            self.scheme_state.decide(scheme, &snapshot, &req)?
        };
        self.decisions.push(DecisionRecord {
            time: flow.arrival_time,
            flow_id: flow.flow_id,
            source_tag: flow.source_tag.clone(),
            counted: flow.arrival_time >= self.config.warmup_discard,
            decision,
        });
        if decision.admit {
            self.scheme_state.on_admit(&req)?;
            self.departures.push(Departure {
                time: flow.departure_time(),
                flow_id: flow.flow_id,
            });
            let emission = EmissionState::new(&flow, &self.config.traffic, self.seed);
            self.active.insert(flow.flow_id, ActiveFlow { spec: flow, emission });
        }
        Ok(())
    }

    /// Advances one tick. Returns `false` once the horizon is reached.
    pub fn step(&mut self) -> Result<bool> {
        if self.is_finished() {
            return Ok(false);
        }
        let dt = self.config.tick_dt;
        let t = self.now();
        let t_end = (self.tick + 1) as f64 * dt;
        self.depart_until(t)?;
        while let Some(flow) = self.arrivals.get(self.next_arrival) {
            if flow.arrival_time >= t_end {
                break;
            }
            let flow = flow.clone();
            self.next_arrival += 1;
            self.handle_arrival(flow)?;
        }

        let demand = aggregate_demand(self.active.values_mut(), t, t_end - t);
        let out = shape_tick(self.shaper, demand, dt, &self.config.link);
        self.shaper = out.state;
        if t >= self.config.warmup_discard - 1e-9 * dt {
            self.post_warmup_bits += out.output;
            self.dropped_bits += out.dropped;
        }
        if let Some(sample) = self.monitor.record_tick(out.output) {
            self.samples.push((sample.timestamp, sample.usage));
        }
        self.tick += 1;
        Ok(!self.is_finished())
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while self.step()? {}
        Ok(())
    }

    pub fn into_report(self) -> RunReport {
        let counted = self.decisions.iter().filter(|d| d.counted);
        let (requests, admitted) = counted.fold((0, 0), |(r, a), d| (r + 1, a + d.decision.admit as usize));
        let rejected = requests - admitted;
        let usage: Vec<f64> = self.samples.iter().map(|s| s.1).collect();
        let ma = moving_average(&usage, self.config.moving_average_window);
        let span = self.total_ticks as f64 * self.config.tick_dt - self.config.warmup_discard;
        let scheme = if self.config.coupled_mode {
            Some(self.config.authoritative)
        } else {
            self.policy.uniform_scheme()
        };
        RunReport {
            label: scheme.map_or_else(|| "policy".to_string(), |s| s.name().to_string()),
            scheme,
            seed: self.seed,
            requests,
            admitted,
            rejected,
            blocking_probability: if requests == 0 {
                0.0
            } else {
                rejected as f64 / requests as f64
            },
            avg_utilization: self.post_warmup_bits / (self.config.link.capacity * span),
            dropped_bits: self.dropped_bits,
            usage_series: self
                .samples
                .iter()
                .zip(ma)
                .map(|(&(timestamp, usage), moving_average)| UsageRow {
                    timestamp,
                    usage,
                    moving_average,
                })
                .collect(),
            decisions: self.decisions,
            coupled: self.coupled,
        }
    }
}

/// Runs one seed under `config.policy`.
pub fn run_once(config: &ExperimentConfig, seed: u64) -> Result<RunReport> {
    let mut sim = Simulation::new(config, seed)?;
    sim.run_to_end()?;
    Ok(sim.into_report())
}

/// Cross-run summary for one arm of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub label: String,
    pub scheme: Option<SchemeKind>,
    pub runs: usize,
    pub mean_blocking: f64,
    pub ci95_blocking: Option<f64>,
    pub mean_utilization: f64,
    pub ci95_utilization: Option<f64>,
}

impl SchemeSummary {
    pub fn from_runs(label: &str, scheme: Option<SchemeKind>, runs: &[RunReport]) -> Self {
        let blocking: Vec<f64> = runs.iter().map(|r| r.blocking_probability).collect();
        let util: Vec<f64> = runs.iter().map(|r| r.avg_utilization).collect();
        SchemeSummary {
            label: label.to_string(),
            scheme,
            runs: runs.len(),
            mean_blocking: mean(&blocking),
            ci95_blocking: ci95_half_width(&blocking),
            mean_utilization: mean(&util),
            ci95_utilization: ci95_half_width(&util),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub summaries: Vec<SchemeSummary>,
    pub gains: Vec<GainRow>,
    /// Per-run reports, grouped by arm then ordered by seed.
    pub runs: Vec<RunReport>,
}

impl AggregateReport {
    pub fn summary(&self, scheme: SchemeKind) -> Option<&SchemeSummary> {
        self.summaries.iter().find(|s| s.scheme == Some(scheme))
    }

    pub fn runs_for<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a RunReport> + 'a {
        self.runs.iter().filter(move |r| r.label == label)
    }
}

fn run_arms(arms: &[ExperimentConfig], seeds: &[u64]) -> Result<Vec<RunReport>> {
    let jobs: Vec<(&ExperimentConfig, u64)> = arms
        .iter()
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    // `collect` keeps input order, so the result is independent of scheduling.
    jobs.into_par_iter().map(|(c, s)| run_once(c, s)).collect()
}

fn summarize(runs: &[RunReport], per_arm: usize) -> Vec<SchemeSummary> {
    runs.chunks(per_arm)
        .map(|chunk| SchemeSummary::from_runs(&chunk[0].label, chunk[0].scheme, chunk))
        .collect()
}

/// Runs every scheme in `config.schemes` on seeds `base_seed..base_seed+runs`
/// and tabulates gains of `config.gain_target` over the rest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateReport> {
    config.validate()?;
    let seeds: Vec<u64> = config.seeds().collect();
    let arms: Vec<ExperimentConfig> = config.schemes.iter().map(|&s| config.with_scheme(s)).collect();
    let runs = run_arms(&arms, &seeds)?;
    let summaries = summarize(&runs, seeds.len());
    let metrics: Vec<SchemeMetrics> = summaries
        .iter()
        .filter_map(|s| {
            s.scheme.map(|scheme| SchemeMetrics {
                scheme,
                blocking: s.mean_blocking,
                utilization: s.mean_utilization,
            })
        })
        .collect();
    Ok(AggregateReport {
        gains: compute_gains(&metrics, config.gain_target),
        summaries,
        runs,
    })
}

/// Runs `config.policy` (or the coupled configuration) across all seeds.
pub fn run_policy(config: &ExperimentConfig) -> Result<AggregateReport> {
    config.validate()?;
    let seeds: Vec<u64> = config.seeds().collect();
    let runs = run_arms(std::slice::from_ref(config), &seeds)?;
    Ok(AggregateReport {
        summaries: summarize(&runs, seeds.len()),
        gains: Vec::new(),
        runs,
    })
}
