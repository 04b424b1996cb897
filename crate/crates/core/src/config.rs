//! Flat `key = value` experiment configuration.
//!
//! Keys are dotted (`traffic.mean_interarrival`). Blank lines and lines
//! starting with `#` are ignored; a trailing `# comment` after a value is
//! stripped. Absent keys take their defaults and unknown keys are rejected.
//!
//! ```text
//! traffic.mean_interarrival = 6
//! traffic.emission_model = on_off
//! policy.rules = edge-a:ewma-pbac, edge-b:geb
//! policy.default = swmsa
//! experiment.schemes = ewma-pbac, pbac-es, geb, swmsa
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::admission::{Dispersion, PolicyRule, SchemeKind};
use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::traffic::EmissionModel;

/// Every recognised key, in rendering order.
pub const KEYS: &[&str] = &[
    "traffic.mean_interarrival",
    "traffic.mean_lifetime",
    "traffic.lifetime_min_mean",
    "traffic.lifetime_max_mean",
    "traffic.avg_rate",
    "traffic.peak_rate",
    "traffic.emission_model",
    "traffic.on_mean",
    "traffic.source_tags",
    "link.capacity",
    "link.tbf_rate",
    "link.tbf_burst",
    "link.tbf_limit",
    "link.mtu",
    "sampler.sample_period",
    "sampler.window_samples",
    "admission.theta",
    "geb.epsilon",
    "geb.dispersion",
    "ewma.beta",
    "policy.rules",
    "policy.default",
    "experiment.schemes",
    "experiment.gain_target",
    "experiment.tick_dt",
    "experiment.horizon",
    "experiment.warmup_discard",
    "experiment.runs",
    "experiment.base_seed",
    "experiment.coupled_mode",
    "experiment.authoritative",
    "report.moving_average_window",
];

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

fn number<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("expected {expected}, got `{value}`")))
}

fn scheme(key: &str, value: &str) -> Result<SchemeKind> {
    SchemeKind::parse(value).ok_or_else(|| {
        Error::config(
            key,
            format!("expected one of PBAC-ES, SWMSA, GEB, EWMA-PBAC, got `{value}`"),
        )
    })
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn apply(config: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    const REAL: &str = "a real number";
    const COUNT: &str = "a non-negative integer";
    match key {
        "traffic.mean_interarrival" => config.traffic.mean_interarrival = number(key, value, REAL)?,
        "traffic.mean_lifetime" => config.traffic.mean_lifetime = number(key, value, REAL)?,
        "traffic.lifetime_min_mean" => config.traffic.lifetime_min_mean = number(key, value, REAL)?,
        "traffic.lifetime_max_mean" => config.traffic.lifetime_max_mean = number(key, value, REAL)?,
        "traffic.avg_rate" => config.traffic.avg_rate = number(key, value, REAL)?,
        "traffic.peak_rate" => config.traffic.peak_rate = number(key, value, REAL)?,
        "traffic.emission_model" => {
            config.traffic.emission_model = EmissionModel::parse(value)
                .ok_or_else(|| Error::config(key, format!("expected constant or on_off, got `{value}`")))?
        }
        "traffic.on_mean" => config.traffic.on_mean = number(key, value, REAL)?,
        "traffic.source_tags" => config.traffic.source_tags = list(value).map(String::from).collect(),
        "link.capacity" => config.link.capacity = number(key, value, REAL)?,
        "link.tbf_rate" => config.link.tbf_rate = number(key, value, REAL)?,
        "link.tbf_burst" => config.link.tbf_burst = number(key, value, REAL)?,
        "link.tbf_limit" => config.link.tbf_limit = number(key, value, REAL)?,
        "link.mtu" => config.link.mtu = number(key, value, COUNT)?,
        "sampler.sample_period" => config.sampler.sample_period = number(key, value, REAL)?,
        "sampler.window_samples" => config.sampler.window_samples = number(key, value, COUNT)?,
        "admission.theta" => config.theta = number(key, value, REAL)?,
        "geb.epsilon" => config.geb.epsilon = number(key, value, REAL)?,
        "geb.dispersion" => {
            config.geb.dispersion = Dispersion::parse(value)
                .ok_or_else(|| Error::config(key, format!("expected stddev or variance, got `{value}`")))?
        }
        "ewma.beta" => config.ewma_beta = number(key, value, REAL)?,
        "policy.rules" => {
            config.policy.rules = list(value)
                .map(|pair| {
                    let (tag, s) = pair
                        .split_once(':')
                        .ok_or_else(|| Error::config(key, format!("expected tag:scheme, got `{pair}`")))?;
                    Ok(PolicyRule {
                        match_tag: tag.trim().to_string(),
                        scheme: scheme(key, s)?,
                    })
                })
                .collect::<Result<_>>()?
        }
        "policy.default" => config.policy.default = Some(scheme(key, value)?),
        "experiment.schemes" => {
            config.schemes = list(value).map(|s| scheme(key, s)).collect::<Result<_>>()?
        }
        "experiment.gain_target" => config.gain_target = scheme(key, value)?,
        "experiment.tick_dt" => config.tick_dt = number(key, value, REAL)?,
        "experiment.horizon" => config.horizon = number(key, value, REAL)?,
        "experiment.warmup_discard" => config.warmup_discard = number(key, value, REAL)?,
        "experiment.runs" => config.runs = number(key, value, COUNT)?,
        "experiment.base_seed" => config.base_seed = number(key, value, "an unsigned 64-bit integer")?,
        "experiment.coupled_mode" => config.coupled_mode = number(key, value, "true or false")?,
        "experiment.authoritative" => config.authoritative = scheme(key, value)?,
        "report.moving_average_window" => config.moving_average_window = number(key, value, COUNT)?,
        _ => return Err(Error::config(key, "unknown key")),
    }
    Ok(())
}

/// Parses and validates configuration text.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    let mut seen = std::collections::HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(
                format!("line {}", lineno + 1),
                format!("expected `key = value`, got `{line}`"),
            )
        })?;
        let key = key.trim();
        if !seen.insert(key.to_string()) {
            return Err(Error::config(key, "given more than once"));
        }
        apply(&mut config, key, value.trim())?;
    }
    config.validate()?;
    Ok(config)
}

/// Writes every key with its current value. Parsing the output reproduces
/// `config` exactly.
pub fn render_config(config: &ExperimentConfig) -> String {
    let t = &config.traffic;
    let join = |v: Vec<String>| v.join(", ");
    let values: Vec<String> = vec![
        t.mean_interarrival.to_string(),
        t.mean_lifetime.to_string(),
        t.lifetime_min_mean.to_string(),
        t.lifetime_max_mean.to_string(),
        t.avg_rate.to_string(),
        t.peak_rate.to_string(),
        t.emission_model.as_str().to_string(),
        t.on_mean.to_string(),
        t.source_tags.join(", "),
        config.link.capacity.to_string(),
        config.link.tbf_rate.to_string(),
        config.link.tbf_burst.to_string(),
        config.link.tbf_limit.to_string(),
        config.link.mtu.to_string(),
        config.sampler.sample_period.to_string(),
        config.sampler.window_samples.to_string(),
        config.theta.to_string(),
        config.geb.epsilon.to_string(),
        config.geb.dispersion.as_str().to_string(),
        config.ewma_beta.to_string(),
        join(
            config
                .policy
                .rules
                .iter()
                .map(|r| format!("{}:{}", r.match_tag, r.scheme))
                .collect(),
        ),
        config.policy.default.map_or_else(String::new, |s| s.to_string()),
        join(config.schemes.iter().map(|s| s.to_string()).collect()),
        config.gain_target.to_string(),
        config.tick_dt.to_string(),
        config.horizon.to_string(),
        config.warmup_discard.to_string(),
        config.runs.to_string(),
        config.base_seed.to_string(),
        config.coupled_mode.to_string(),
        config.authoritative.to_string(),
        config.moving_average_window.to_string(),
    ];
    debug_assert_eq!(values.len(), KEYS.len());
    let mut out = String::new();
    for (key, value) in KEYS.iter().zip(values) {
        // Empty lists are omitted; an empty value would not parse back.
        if !value.is_empty() {
            let _ = writeln!(out, "{key} = {value}");
        }
    }
    out
}
