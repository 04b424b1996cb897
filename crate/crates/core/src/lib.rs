//! Fluid-level simulator for bandwidth admission control on a shaped
//! bottleneck link.
//!
//! Four admission schemes are provided: peak-rate summation (`PBAC-ES`),
//! sliding-window measured sum (`SWMSA`), Gaussian equivalent bandwidth
//! (`GEB`) and the hybrid of an EWMA load measurement with the peak-rate sum
//! (`EWMA-PBAC`). The [`experiment`] module drives seeded runs of all of them
//! over identical traffic and produces blocking/utilization summaries.

pub mod admission;
pub mod config;
pub mod error;
pub mod experiment;
pub mod link;
pub mod report;
pub mod stats;
pub mod telemetry;
pub mod traffic;

pub use admission::{
    alpha, AdmissionDecision, AdmissionRequest, Dispersion, GebConfig, PolicyRule, SchemeKind, SchemeState,
    SelectionPolicy, EPSILON_MAX,
};
pub use config::{parse_config, parse_config_str, render_config};
pub use error::{Error, Result};
pub use experiment::{
    run_experiment, run_once, run_policy, AggregateReport, CoupledRecord, DecisionRecord, ExperimentConfig,
    RunReport, SchemeSummary, Simulation, UsageRow,
};
pub use link::{aggregate_demand, shape_tick, ActiveFlow, LinkConfig, ShaperState, TickOutcome};
pub use report::{emit_reports, OutputBundle};
pub use stats::{ci95_half_width, compute_gains, moving_average, student_t_critical, GainRow, SchemeMetrics};
pub use telemetry::{
    ewma_update, EwmaState, LinkMonitor, MeasurementSample, SampleWindow, SamplerConfig, TelemetrySnapshot,
    VarianceKind, WindowStats,
};
pub use traffic::{flow_rate_at, generate_arrivals, EmissionModel, EmissionState, FlowSpec, TrafficConfig};
