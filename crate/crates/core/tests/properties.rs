use std::collections::BTreeMap;

use mbac_core::*;
use proptest::prelude::*;

fn flow(id: u64, peak: f64) -> FlowSpec {
    FlowSpec {
        flow_id: id,
        arrival_time: 0.0,
        lifetime: 1.0,
        avg_rate: peak / 1.2,
        peak_rate: peak,
        source_tag: String::new(),
    }
}

fn state_with(capacity: f64, theta: f64, c2: f64) -> SchemeState {
    let mut s = SchemeState::new(capacity, theta, GebConfig::default()).unwrap();
    if c2 > 0.0 {
        s.on_admit(&AdmissionRequest::for_flow(&flow(u64::MAX, c2))).unwrap();
    }
    s
}

fn stats_of(samples: &[f64]) -> WindowStats {
    let mut w = SampleWindow::new(samples.len().max(1));
    let mut st = WindowStats::default();
    for (i, &x) in samples.iter().enumerate() {
        st = w.push_sample(MeasurementSample {
            timestamp: i as f64,
            usage: x,
        });
    }
    st
}

proptest! {
    #[test]
    fn window_mean_bounded_and_variance_zero_iff_equal(
        xs in prop::collection::vec(0.0f64..2e7, 1..30),
        cap in 1usize..12,
    ) {
        let mut w = SampleWindow::new(cap);
        for (i, &x) in xs.iter().enumerate() {
            let s = w.push_sample(MeasurementSample { timestamp: i as f64, usage: x });
            let kept: Vec<f64> = w.samples().collect();
            let lo = kept.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = kept.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(s.count <= cap);
            prop_assert!(s.mean >= lo * (1.0 - 1e-12) && s.mean <= hi * (1.0 + 1e-12));
            prop_assert!(s.variance >= 0.0);
            prop_assert_eq!(s.variance == 0.0, lo == hi);
            prop_assert!((s.stddev - s.variance.sqrt()).abs() <= 1e-9 * s.stddev.max(1.0));
        }
    }

    #[test]
    fn ewma_is_convex_combination(prev in 0.0f64..2e7, m in 0.0f64..2e7, beta in 0.01f64..0.99) {
        let st = EwmaState { m_t: prev, beta, initialized: true };
        let next = st.update(m).m_t;
        prop_assert!(next >= prev.min(m) * (1.0 - 1e-12));
        prop_assert!(next <= prev.max(m) * (1.0 + 1e-12));
    }

    #[test]
    fn pbac_es_matches_criterion(
        capacity in 1e6f64..1e8,
        c2 in 0.0f64..1e8,
        peak in 1.0f64..5e6,
        theta in 0.05f64..=1.0,
    ) {
        let s = state_with(capacity, theta, c2);
        let d = s.decide_pbac_es(&AdmissionRequest::for_flow(&flow(1, peak)));
        prop_assert_eq!(d.admit, peak + s.admitted_peak_sum() < theta * capacity);
        prop_assert!(d.is_consistent());
    }

    #[test]
    fn swmsa_matches_window_mean_criterion(
        xs in prop::collection::vec(0.0f64..1.2e7, 1..10),
        peak in 1e5f64..3e6,
    ) {
        let s = state_with(1e7, 1.0, 0.0);
        let st = stats_of(&xs);
        let brute_mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let d = s.decide_swmsa(&st, &AdmissionRequest::for_flow(&flow(1, peak)));
        prop_assert!((d.estimate - brute_mean).abs() <= 1e-6 * brute_mean.max(1.0));
        // Away from the boundary the verdict cannot depend on rounding.
        if (peak + brute_mean - 1e7).abs() > 1.0 {
            prop_assert_eq!(d.admit, peak + brute_mean < 1e7);
        }
    }

    #[test]
    fn ewma_pbac_matches_criterion(
        m_t in 0.0f64..2e7,
        c2 in 0.0f64..2e7,
        peak in 1.0f64..5e6,
        capacity in 1e6f64..3e7,
    ) {
        let s = state_with(capacity, 1.0, c2);
        let ewma = EwmaState { m_t, beta: 0.2, initialized: true };
        let d = s.decide_ewma_pbac(&ewma, &AdmissionRequest::for_flow(&flow(1, peak)));
        let c3 = m_t.min(s.admitted_peak_sum());
        prop_assert_eq!(d.estimate, c3);
        prop_assert_eq!(d.admit, peak + c3 < capacity);
    }

    #[test]
    fn geb_dominance_over_swmsa(
        xs in prop::collection::vec(0.0f64..1.2e7, 1..10),
        peak in 1e5f64..3e6,
        eps in 0.01f64..0.39,
    ) {
        let mut s = state_with(1e7, 1.0, 0.0);
        s.geb.epsilon = eps;
        let st = stats_of(&xs);
        let r = AdmissionRequest::for_flow(&flow(1, peak));
        let g = s.decide_geb(&st, &r).unwrap();
        let w = s.decide_swmsa(&st, &r);
        prop_assert!(g.estimate >= w.estimate);
        prop_assert!(!g.admit || w.admit);
    }

    #[test]
    fn hybrid_dominance_over_pbac(
        m_t in 0.0f64..2e7,
        c2 in 0.0f64..2e7,
        peak in 1.0f64..5e6,
        initialized in any::<bool>(),
    ) {
        let s = state_with(1e7, 1.0, c2);
        let ewma = EwmaState { m_t, beta: 0.2, initialized };
        let r = AdmissionRequest::for_flow(&flow(1, peak));
        let p = s.decide_pbac_es(&r);
        let e = s.decide_ewma_pbac(&ewma, &r);
        prop_assert!(!p.admit || e.admit);
    }

    #[test]
    fn peak_sum_tracks_live_set(ops in prop::collection::vec((0u64..20, 1e5f64..3e6, any::<bool>()), 1..200)) {
        let mut s = SchemeState::new(1e7, 1.0, GebConfig::default()).unwrap();
        let mut live: BTreeMap<u64, f64> = BTreeMap::new();
        for (id, peak, admit) in ops {
            let f = flow(id, peak);
            if admit {
                let res = s.on_admit(&AdmissionRequest::for_flow(&f));
                prop_assert_eq!(res.is_ok(), !live.contains_key(&id));
                live.entry(id).or_insert(peak);
            } else {
                let res = s.on_depart(&f);
                prop_assert_eq!(res.is_ok(), live.remove(&id).is_some());
            }
            let brute: f64 = live.values().sum();
            prop_assert!(s.admitted_peak_sum() >= 0.0);
            prop_assert!((s.admitted_peak_sum() - brute).abs() <= 1e-9 * brute.max(1.0));
            prop_assert_eq!(s.admitted_count(), live.len());
        }
    }

    #[test]
    fn config_render_round_trips(
        ia in 0.5f64..50.0,
        beta in 0.01f64..0.99,
        eps in 0.01f64..0.39,
        seed in any::<u64>(),
        coupled in any::<bool>(),
        window in 1usize..40,
    ) {
        let mut c = ExperimentConfig::default();
        c.traffic.mean_interarrival = ia;
        c.ewma_beta = beta;
        c.geb.epsilon = eps;
        c.base_seed = seed;
        c.coupled_mode = coupled;
        c.sampler.window_samples = window;
        let text = render_config(&c);
        prop_assert_eq!(parse_config_str(&text).unwrap(), c);
    }
}
