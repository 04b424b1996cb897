//! Link monitor: periodic usage samples, sliding-window statistics and the
//! EWMA load estimate.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Seconds between samples.
    pub sample_period: f64,
    /// Samples retained in the sliding window.
    pub window_samples: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            sample_period: 1.0,
            window_samples: 10,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return Err(Error::config("sampler.sample_period", "must be positive"));
        }
        if self.window_samples == 0 {
            return Err(Error::config("sampler.window_samples", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSample {
    /// End of the sampling period, seconds.
    pub timestamp: f64,
    /// Mean shaper output over the period, bits per second.
    pub usage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindowStats {
    pub mean: f64,
    pub variance: f64,
    pub stddev: f64,
    pub count: usize,
}

/// Normalisation of the window variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum VarianceKind {
    /// Divide by `n`.
    #[default]
    Population,
    /// Divide by `n - 1` (0 for a single sample).
    Sample,
}

/// Fixed-capacity buffer of the most recent usage samples.
#[derive(Debug, Clone)]
pub struct SampleWindow {
    capacity: usize,
    kind: VarianceKind,
    samples: VecDeque<f64>,
}

impl SampleWindow {
    pub fn new(capacity: usize) -> Self {
        Self::with_kind(capacity, VarianceKind::Population)
    }

    pub fn with_kind(capacity: usize, kind: VarianceKind) -> Self {
        assert!(capacity >= 1, "window capacity must be at least 1");
        SampleWindow {
            capacity,
            kind,
            samples: VecDeque::with_capacity(capacity),
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends a sample, evicting the oldest once full, and returns the
    /// statistics of the retained samples.
    pub fn push_sample(&mut self, s: MeasurementSample) -> WindowStats {
        debug_assert!(s.usage >= 0.0);
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(s.usage);
        self.stats()
    }

    /// Welford pass over the retained buffer. The window is small, so a
    /// fresh pass per sample avoids the drift of add/remove updates.
    pub fn stats(&self) -> WindowStats {
        let mut mean = 0.0;
        let mut m2 = 0.0;
        let mut n = 0usize;
        for x in self.samples() {
            n += 1;
            let delta = x - mean;
            mean += delta / n as f64;
            m2 += delta * (x - mean);
        }
        if n == 0 {
            return WindowStats::default();
        }
        let denom = match self.kind {
            VarianceKind::Population => n as f64,
            VarianceKind::Sample if n > 1 => (n - 1) as f64,
            VarianceKind::Sample => 1.0,
        };
        let all_equal = self.samples.iter().all(|&x| x == self.samples[0]);
        let variance = if all_equal { 0.0 } else { (m2 / denom).max(0.0) };
        WindowStats {
            mean,
            variance,
            stddev: variance.sqrt(),
            count: n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EwmaState {
    pub m_t: f64,
    pub beta: f64,
    pub initialized: bool,
}

impl EwmaState {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::config("ewma.beta", format!("must lie in (0, 1), got {beta}")));
        }
        Ok(EwmaState {
            m_t: 0.0,
            beta,
            initialized: false,
        })
    }

    /// Folds in a new measurement. The first measurement seeds the estimate.
    #[must_use]
    pub fn update(self, m: f64) -> EwmaState {
        debug_assert!(m >= 0.0);
        let m_t = if self.initialized {
            self.beta * m + (1.0 - self.beta) * self.m_t
        } else {
            m
        };
        EwmaState {
            m_t,
            initialized: true,
            ..self
        }
    }
}

pub fn ewma_update(state: EwmaState, m: f64) -> EwmaState {
    state.update(m)
}

/// Integrates shaper output into fixed-period samples.
///
/// Time is tracked in whole ticks so sample boundaries never drift.
#[derive(Debug, Clone)]
pub struct Sampler {
    period: f64,
    ticks_per_sample: u64,
    start: f64,
    ticks: u64,
    taken: u64,
    bits: f64,
}

impl Sampler {
    pub fn new(config: &SamplerConfig, tick_dt: f64, start: f64) -> Result<Self> {
        config.validate()?;
        let ratio = config.sample_period / tick_dt;
        let ticks_per_sample = ratio.round();
        if ticks_per_sample < 1.0 || (ratio - ticks_per_sample).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::config(
                "experiment.tick_dt",
                format!(
                    "must divide sampler.sample_period ({}) evenly, got {tick_dt}",
                    config.sample_period
                ),
            ));
        }
        Ok(Sampler {
            period: config.sample_period,
            ticks_per_sample: ticks_per_sample as u64,
            start,
            ticks: 0,
            taken: 0,
            bits: 0.0,
        })
    }

    /// Records one tick of output; returns a sample at each period boundary.
    pub fn record_tick(&mut self, output_bits: f64) -> Option<MeasurementSample> {
        self.bits += output_bits;
        self.ticks += 1;
        if self.ticks % self.ticks_per_sample != 0 {
            return None;
        }
        self.taken += 1;
        let sample = MeasurementSample {
            timestamp: self.start + self.taken as f64 * self.period,
            usage: self.bits / self.period,
        };
        self.bits = 0.0;
        Some(sample)
    }
}

/// What the admission controller sees: the last completed measurement state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetrySnapshot {
    /// `None` until the first sample lands.
    pub stats: Option<WindowStats>,
    pub ewma: EwmaState,
    pub last_sample: Option<MeasurementSample>,
}

/// Sampler, window and EWMA for one link.
#[derive(Debug, Clone)]
pub struct LinkMonitor {
    sampler: Sampler,
    window: SampleWindow,
    ewma: EwmaState,
    snapshot: TelemetrySnapshot,
}

impl LinkMonitor {
    pub fn new(config: &SamplerConfig, tick_dt: f64, beta: f64) -> Result<Self> {
        let ewma = EwmaState::new(beta)?;
        Ok(LinkMonitor {
            sampler: Sampler::new(config, tick_dt, 0.0)?,
            window: SampleWindow::new(config.window_samples),
            ewma,
            snapshot: TelemetrySnapshot {
                stats: None,
                ewma,
                last_sample: None,
            },
        })
    }

    pub fn record_tick(&mut self, output_bits: f64) -> Option<MeasurementSample> {
        let sample = self.sampler.record_tick(output_bits)?;
        let stats = self.window.push_sample(sample);
        self.ewma = self.ewma.update(sample.usage);
        self.snapshot = TelemetrySnapshot {
            stats: Some(stats),
            ewma: self.ewma,
            last_sample: Some(sample),
        };
        Some(sample)
    }

    pub fn snapshot(&self) -> TelemetrySnapshot {
        self.snapshot
    }
}
