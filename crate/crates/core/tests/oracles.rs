//! Implementations checked against independently computed references.

use mbac_core::traffic::EmissionModel;
use mbac_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Two-pass mean/variance straight from the definition.
fn brute_stats(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

#[test]
fn window_stats_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut window = SampleWindow::new(10);
    let mut shadow: Vec<f64> = Vec::new();
    for k in 0..10_000 {
        let usage = if rng.gen_bool(0.05) { 7e6 } else { rng.gen_range(0.0..1.2e7) };
        shadow.push(usage);
        if shadow.len() > 10 {
            shadow.remove(0);
        }
        let got = window.push_sample(MeasurementSample {
            timestamp: k as f64,
            usage,
        });
        let (mean, var) = brute_stats(&shadow);
        assert_eq!(got.count, shadow.len());
        assert!(rel_close(got.mean, mean, 1e-9), "push {k}: {} vs {mean}", got.mean);
        assert!(rel_close(got.variance, var, 1e-9), "push {k}: {} vs {var}", got.variance);
        assert!(rel_close(got.stddev, var.sqrt(), 1e-9));
    }
}

#[test]
fn ewma_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let beta = 0.2;
    let m0 = 4.4e6;
    let inputs: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..1e7)).collect();
    let mut state = EwmaState::new(beta).unwrap().update(m0);
    for t in 1..=inputs.len() {
        state = ewma_update(state, inputs[t - 1]);
        // beta * sum_{k=0}^{t-1} (1-beta)^k m_{t-k} + (1-beta)^t M_0
        let closed: f64 = (0..t)
            .map(|k| beta * (1.0 - beta).powi(k as i32) * inputs[t - 1 - k])
            .sum::<f64>()
            + (1.0 - beta).powi(t as i32) * m0;
        assert!(rel_close(state.m_t, closed, 1e-9), "t={t}: {} vs {closed}", state.m_t);
    }
}

#[test]
fn token_bucket_envelope_and_conservation() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut violations = 0;
    for trace in 0..200 {
        let link = LinkConfig {
            tbf_burst: rng.gen_range(1e3..2e6),
            tbf_limit: rng.gen_range(0.0..2e6),
            ..LinkConfig::default()
        };
        let dt = [0.01, 0.1, 0.5][trace % 3];
        let ticks = 400;
        let demand: Vec<f64> = (0..ticks)
            .map(|_| rng.gen_range(0.0..3.0) * link.tbf_rate * dt * rng.gen_range(0.0f64..1.0).powi(2))
            .collect();
        let mut state = ShaperState {
            tokens: rng.gen_range(0.0..=link.tbf_burst),
            backlog: rng.gen_range(0.0..=link.tbf_limit),
        };
        let mut outputs = Vec::with_capacity(ticks);
        for &d in &demand {
            let out = shape_tick(state, d, dt, &link);
            let delta_backlog = (out.state.backlog - state.backlog) * 8.0;
            let lhs = d;
            let rhs = out.output + out.dropped + delta_backlog;
            assert!(rel_close(lhs, rhs, 1e-6), "conservation: {lhs} vs {rhs}");
            assert!(out.state.within_bounds(&link));
            assert!(out.output <= link.capacity * dt * (1.0 + 1e-12));
            outputs.push(out.output);
            state = out.state;
        }
        // Every window [i, j) of ticks: output <= B + r * tau.
        for i in 0..ticks {
            let mut cum = 0.0;
            for (j, o) in outputs.iter().enumerate().skip(i) {
                cum += o;
                let tau = (j + 1 - i) as f64 * dt;
                if cum > link.burst_bits() + link.tbf_rate * tau + 1e-6 {
                    violations += 1;
                }
            }
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn demand_matches_per_flow_recompute() {
    let traffic = TrafficConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let specs: Vec<FlowSpec> = (0..12)
        .map(|i| FlowSpec {
            flow_id: i,
            arrival_time: rng.gen_range(0.0..20.0),
            lifetime: rng.gen_range(5.0..80.0),
            avg_rate: 1e6,
            peak_rate: 1.2e6,
            source_tag: String::new(),
        })
        .collect();
    let mut flows: Vec<ActiveFlow> = specs
        .iter()
        .map(|s| ActiveFlow {
            spec: s.clone(),
            emission: EmissionState::new(s, &traffic, 5),
        })
        .collect();
    // Reference: fresh emission states, point rate sampled on a 1 ms grid.
    let mut refs: Vec<EmissionState> = specs.iter().map(|s| EmissionState::new(s, &traffic, 5)).collect();
    let dt = 0.1;
    let mut total = 0.0;
    let mut total_ref = 0.0;
    for k in 0..1000 {
        let t = k as f64 * dt;
        let got = aggregate_demand(flows.iter_mut(), t, dt);
        let mut expected = 0.0;
        for (spec, st) in specs.iter().zip(refs.iter_mut()) {
            for j in 0..100 {
                let tj = t + (j as f64 + 0.5) * dt / 100.0;
                if spec.is_active_at(tj) {
                    expected += flow_rate_at(spec, tj, st).unwrap() * dt / 100.0;
                }
            }
        }
        total += got;
        total_ref += expected;
        assert!((got - expected).abs() <= 0.05 * 1.2e6 * dt * specs.len() as f64);
    }
    assert!(rel_close(total, total_ref, 1e-3), "{total} vs {total_ref}");
}

#[test]
fn constant_flows_sum_linearly() {
    let traffic = TrafficConfig {
        emission_model: EmissionModel::Constant,
        ..TrafficConfig::default()
    };
    let mut flows: Vec<ActiveFlow> = (0..3)
        .map(|i| {
            let spec = FlowSpec {
                flow_id: i,
                arrival_time: 0.0,
                lifetime: 100.0,
                avg_rate: 1e6,
                peak_rate: 1.2e6,
                source_tag: String::new(),
            };
            ActiveFlow {
                emission: EmissionState::new(&spec, &traffic, 0),
                spec,
            }
        })
        .collect();
    assert!(rel_close(aggregate_demand(flows.iter_mut(), 10.0, 1.0), 3e6, 1e-12));
}

#[test]
fn arrival_count_matches_poisson_mean() {
    // Poisson count with mean horizon / mean_interarrival = 100.
    let mut counts = Vec::with_capacity(1000);
    for seed in 0..1000 {
        let c = TrafficConfig {
            mean_interarrival: 6.0,
            rng_seed: seed,
            ..TrafficConfig::default()
        };
        counts.push(generate_arrivals(&c, 600.0).unwrap().len() as f64);
    }
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    let se = (100.0f64 / 1000.0).sqrt();
    assert!((mean - 100.0).abs() < 3.0 * se, "mean count {mean}");
}

#[test]
fn interarrival_gaps_are_exponential() {
    let c = TrafficConfig {
        mean_interarrival: 6.0,
        rng_seed: 17,
        ..TrafficConfig::default()
    };
    let flows = generate_arrivals(&c, 6.0 * 12_000.0).unwrap();
    assert!(flows.len() >= 10_000);
    let mut prev = 0.0;
    let gaps: Vec<f64> = flows
        .iter()
        .map(|f| {
            let g = f.arrival_time - prev;
            prev = f.arrival_time;
            g
        })
        .collect();
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    // Exponential: sd equals the mean.
    let se = 6.0 / n.sqrt();
    assert!((mean - 6.0).abs() < 3.0 * se, "mean gap {mean}");
    // Lifetimes: mixture mean (30 + 120) / 2.
    let lmean = flows.iter().map(|f| f.lifetime).sum::<f64>() / n;
    assert!((lmean - 75.0).abs() < 3.0, "mean lifetime {lmean}");
}

#[test]
fn on_off_duty_cycle_converges() {
    let c = TrafficConfig {
        on_mean: 2.0,
        ..TrafficConfig::default()
    };
    let flow = FlowSpec {
        flow_id: 0,
        arrival_time: 0.0,
        lifetime: 10_000.0,
        avg_rate: 1e6,
        peak_rate: 1.2e6,
        source_tag: String::new(),
    };
    let mut st = EmissionState::new(&flow, &c, 31);
    let bits = st.bits_between(&flow, 0.0, 10_000.0);
    let on_fraction = bits / (1.2e6 * 10_000.0);
    assert!((on_fraction - 1.0 / 1.2).abs() / (1.0 / 1.2) < 0.02, "{on_fraction}");
}

#[test]
fn alpha_reference_values_and_monotonicity() {
    // mpmath at 30 digits.
    assert!((alpha(0.3).unwrap() - 0.755_028_835_371_554_9).abs() < 1e-12);
    assert!((alpha(0.1).unwrap() - 1.663_518_295_534_721_8).abs() < 1e-12);
    assert_eq!(alpha(EPSILON_MAX).unwrap(), 0.0);
    let grid: Vec<f64> = (1..=100).map(|i| EPSILON_MAX * i as f64 / 100.0).collect();
    for w in grid.windows(2) {
        assert!(alpha(w[0]).unwrap() > alpha(w[1]).unwrap());
    }
}

#[test]
fn moving_average_matches_trailing_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<f64> = (0..5000).map(|_| rng.gen_range(0.0..1e7)).collect();
    let got = moving_average(&xs, 10);
    assert_eq!(got.len(), xs.len());
    for i in 0..xs.len() {
        let lo = i.saturating_sub(9);
        let expected = xs[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64;
        assert!(rel_close(got[i], expected, 1e-9), "index {i}");
    }
}

#[test]
fn t_critical_value_df9() {
    // scipy.stats.t.ppf(0.975, 9)
    assert!((student_t_critical(0.95, 9) - 2.262_157_162_854_099_3).abs() < 1e-9);
    // scipy.stats.t.ppf(0.975, 39)
    assert!((student_t_critical(0.95, 39) - 2.022_690_920_036_760_4).abs() < 1e-9);
}

#[test]
fn ci_width_shrinks_with_root_n() {
    // Same sample variance at both sizes: alternating +-1 around 0.5.
    let synth = |n: usize| -> Vec<f64> { (0..n).map(|i| if i % 2 == 0 { 0.4 } else { 0.6 }).collect() };
    let ten = ci95_half_width(&synth(10)).unwrap();
    let forty = ci95_half_width(&synth(40)).unwrap();
    let ratio = forty / ten;
    assert!((ratio - 0.5).abs() <= 0.1, "ratio {ratio}");
}
