//! Admission control schemes.
//!
//! Four criteria share one shape, `request + estimate < rhs`, and differ only
//! in where the estimate of current load comes from:
//!
//! | scheme      | estimate                               | rhs     |
//! |-------------|----------------------------------------|---------|
//! | `PBAC-ES`   | sum of admitted peaks                  | theta*T |
//! | `SWMSA`     | sliding-window mean of measured usage  | theta*T |
//! | `GEB`       | window mean + alpha(eps) * dispersion  | T       |
//! | `EWMA-PBAC` | min(EWMA of measured usage, peak sum)  | T       |
//!
//! Ties reject. Before the first measurement the measured estimates read as
//! zero (idle link).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::{EwmaState, TelemetrySnapshot, WindowStats};
use crate::traffic::FlowSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeKind {
    PbacEs,
    Swmsa,
    Geb,
    EwmaPbac,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::EwmaPbac,
        SchemeKind::PbacEs,
        SchemeKind::Geb,
        SchemeKind::Swmsa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::PbacEs => "PBAC-ES",
            SchemeKind::Swmsa => "SWMSA",
            SchemeKind::Geb => "GEB",
            SchemeKind::EwmaPbac => "EWMA-PBAC",
        }
    }

    /// Case-insensitive; `-` and `_` are interchangeable.
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().replace('_', "-").as_str() {
            "PBAC-ES" | "PBACES" => Some(SchemeKind::PbacEs),
            "SWMSA" => Some(SchemeKind::Swmsa),
            "GEB" => Some(SchemeKind::Geb),
            "EWMA-PBAC" | "EWMAPBAC" => Some(SchemeKind::EwmaPbac),
            _ => None,
        }
    }

    /// Whether the scheme reads link measurements.
    pub fn is_measurement_based(self) -> bool {
        !matches!(self, SchemeKind::PbacEs)
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Largest epsilon for which the Gaussian coefficient is real: `1/sqrt(2*pi)`.
pub const EPSILON_MAX: f64 = 0.398_942_280_401_432_7;

/// Gaussian equivalent-bandwidth coefficient `sqrt(2 ln(1/eps) - ln(2 pi))`.
pub fn alpha(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= EPSILON_MAX) {
        return Err(Error::EpsilonDomain { epsilon });
    }
    if epsilon == EPSILON_MAX {
        return Ok(0.0);
    }
    let radicand = 2.0 * (1.0 / epsilon).ln() - (2.0 * PI).ln();
    Ok(radicand.max(0.0).sqrt())
}

/// Which spread measure multiplies alpha in the GEB estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Dispersion {
    #[default]
    Stddev,
    /// Literal variance in (bits/s)^2; dimensionally inconsistent but kept
    /// for side-by-side comparison.
    Variance,
}

impl Dispersion {
    pub fn as_str(self) -> &'static str {
        match self {
            Dispersion::Stddev => "stddev",
            Dispersion::Variance => "variance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stddev" | "std" => Some(Dispersion::Stddev),
            "variance" | "var" => Some(Dispersion::Variance),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GebConfig {
    pub epsilon: f64,
    pub dispersion: Dispersion,
}

impl Default for GebConfig {
    fn default() -> Self {
        GebConfig {
            epsilon: 0.3,
            dispersion: Dispersion::Stddev,
        }
    }
}

impl GebConfig {
    pub fn validate(&self) -> Result<()> {
        alpha(self.epsilon).map(|_| ()).map_err(|e| {
            Error::config(
                "geb.epsilon",
                format!("{e}; must lie in (0, {EPSILON_MAX:.4}]"),
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissionRequest {
    pub flow: FlowSpec,
    pub requested_peak: f64,
    pub requested_avg: f64,
}

impl AdmissionRequest {
    pub fn for_flow(flow: &FlowSpec) -> Self {
        AdmissionRequest {
            flow: flow.clone(),
            requested_peak: flow.peak_rate,
            requested_avg: flow.avg_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissionDecision {
    pub admit: bool,
    pub scheme: SchemeKind,
    /// Load estimate the criterion used, bits per second.
    pub estimate: f64,
    /// Right-hand side of the criterion, bits per second.
    pub criterion_rhs: f64,
    /// Requested bandwidth, bits per second.
    pub request: f64,
}

impl AdmissionDecision {
    fn evaluate(scheme: SchemeKind, request: f64, estimate: f64, criterion_rhs: f64) -> Self {
        AdmissionDecision {
            admit: request + estimate < criterion_rhs,
            scheme,
            estimate,
            criterion_rhs,
            request,
        }
    }

    /// Re-checks the verdict from the recorded fields.
    pub fn is_consistent(&self) -> bool {
        self.admit == (self.request + self.estimate < self.criterion_rhs)
    }
}

/// Criterion parameters plus the set of admitted, not yet departed flows.
#[derive(Debug, Clone)]
pub struct SchemeState {
    /// Utilization target applied to PBAC-ES and SWMSA.
    pub theta: f64,
    /// Link capacity `T`, bits per second.
    pub capacity: f64,
    pub geb: GebConfig,
    admitted: BTreeMap<u64, f64>,
    admitted_peak_sum: f64,
}

impl SchemeState {
    pub fn new(capacity: f64, theta: f64, geb: GebConfig) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::config("admission.theta", format!("must lie in (0, 1], got {theta}")));
        }
        if !(capacity > 0.0) {
            return Err(Error::config("link.capacity", "must be positive"));
        }
        geb.validate()?;
        Ok(SchemeState {
            theta,
            capacity,
            geb,
            admitted: BTreeMap::new(),
            admitted_peak_sum: 0.0,
        })
    }

    /// Sum of peak rates of currently admitted flows (`C2`).
    pub fn admitted_peak_sum(&self) -> f64 {
        self.admitted_peak_sum
    }

    pub fn admitted_count(&self) -> usize {
        self.admitted.len()
    }

    pub fn is_admitted(&self, flow_id: u64) -> bool {
        self.admitted.contains_key(&flow_id)
    }

    // Recomputed over the live set in id order so that the sum depends only
    // on which flows are present, never on the admit/depart history.
    fn resum(&mut self) {
        self.admitted_peak_sum = self.admitted.values().sum();
    }

    pub fn on_admit(&mut self, req: &AdmissionRequest) -> Result<()> {
        if self.admitted.contains_key(&req.flow.flow_id) {
            return Err(Error::Bookkeeping(format!(
                "flow {} admitted twice",
                req.flow.flow_id
            )));
        }
        self.admitted.insert(req.flow.flow_id, req.requested_peak);
        self.resum();
        Ok(())
    }

    pub fn on_depart(&mut self, flow: &FlowSpec) -> Result<()> {
        if self.admitted.remove(&flow.flow_id).is_none() {
            return Err(Error::Bookkeeping(format!(
                "flow {} departed without being admitted",
                flow.flow_id
            )));
        }
        self.resum();
        Ok(())
    }

    pub fn decide_pbac_es(&self, req: &AdmissionRequest) -> AdmissionDecision {
        AdmissionDecision::evaluate(
            SchemeKind::PbacEs,
            req.requested_peak,
            self.admitted_peak_sum,
            self.theta * self.capacity,
        )
    }

    pub fn decide_swmsa(&self, stats: &WindowStats, req: &AdmissionRequest) -> AdmissionDecision {
        AdmissionDecision::evaluate(
            SchemeKind::Swmsa,
            req.requested_peak,
            stats.mean,
            self.theta * self.capacity,
        )
    }

    /// Equivalent-bandwidth estimate `mean + alpha * dispersion`.
    pub fn equivalent_bandwidth(&self, stats: &WindowStats) -> Result<f64> {
        let a = alpha(self.geb.epsilon)?;
        let spread = match self.geb.dispersion {
            Dispersion::Stddev => stats.stddev,
            Dispersion::Variance => stats.variance,
        };
        Ok(stats.mean + a * spread)
    }

    pub fn decide_geb(&self, stats: &WindowStats, req: &AdmissionRequest) -> Result<AdmissionDecision> {
        Ok(AdmissionDecision::evaluate(
            SchemeKind::Geb,
            req.requested_peak,
            self.equivalent_bandwidth(stats)?,
            self.capacity,
        ))
    }

    pub fn decide_ewma_pbac(&self, ewma: &EwmaState, req: &AdmissionRequest) -> AdmissionDecision {
        let measured = if ewma.initialized { ewma.m_t } else { 0.0 };
        AdmissionDecision::evaluate(
            SchemeKind::EwmaPbac,
            req.requested_peak,
            measured.min(self.admitted_peak_sum),
            self.capacity,
        )
    }

    /// Dispatches to the named scheme using the latest telemetry snapshot.
    pub fn decide(
        &self,
        scheme: SchemeKind,
        snapshot: &TelemetrySnapshot,
        req: &AdmissionRequest,
    ) -> Result<AdmissionDecision> {
        let stats = snapshot.stats.unwrap_or_default();
        Ok(match scheme {
            SchemeKind::PbacEs => self.decide_pbac_es(req),
            SchemeKind::Swmsa => self.decide_swmsa(&stats, req),
            SchemeKind::Geb => self.decide_geb(&stats, req)?,
            SchemeKind::EwmaPbac => self.decide_ewma_pbac(&snapshot.ewma, req),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRule {
    pub match_tag: String,
    pub scheme: SchemeKind,
}

/// Ordered per-source scheme selection with a catch-all default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub rules: Vec<PolicyRule>,
    pub default: Option<SchemeKind>,
}

impl SelectionPolicy {
    pub fn single(scheme: SchemeKind) -> Self {
        SelectionPolicy {
            rules: Vec::new(),
            default: Some(scheme),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.default.is_none() {
            return Err(Error::config("policy.default", "a default scheme is required"));
        }
        Ok(())
    }

    /// First rule whose tag equals `source_tag`, else the default.
    pub fn select_scheme(&self, source_tag: &str) -> Result<SchemeKind> {
        let default = self
            .default
            .ok_or_else(|| Error::config("policy.default", "a default scheme is required"))?;
        Ok(self
            .rules
            .iter()
            .find(|r| r.match_tag == source_tag)
            .map_or(default, |r| r.scheme))
    }

    /// The single scheme this policy always picks, if it has no rules that
    /// differ from the default.
    pub fn uniform_scheme(&self) -> Option<SchemeKind> {
        let d = self.default?;
        self.rules.iter().all(|r| r.scheme == d).then_some(d)
    }
}
