use roqj_core::analysis::Observable;
use roqj_core::engines::{roqj_step_p, CounterRng};
use roqj_core::model::{
    build_amplitude_damping, build_dephasing, build_network_model, build_pauli_model, network_rate, sample_couplings,
};
use roqj_core::oracle::{integrate_master_equation, pauli_exact};
use roqj_core::rate_operator::spectral_split;
use roqj_core::*;

fn plus() -> InitialState {
    InitialState::Pure(PureState::plus())
}

#[test]
fn eternal_qubit_tracks_closed_form() {
    let model = build_pauli_model([0.5, 0.5, 0.0]).unwrap();
    let config = RunConfig::new(EngineKind::RoqjP, 0.002, 1.5, 2000, 17)
        .sample_every(50)
        .with_observables(vec![Observable::Re(0, 1)]);
    let r = run(&model, &plus(), &config).unwrap();
    for (s, &t) in r.times.iter().enumerate() {
        let exact = 0.5 * (-t).exp() * t.cosh();
        let (m, e) = (r.observable_means[s][0], r.observable_stderr[s][0]);
        assert!((m - exact).abs() <= (4.0 * e).max(0.02), "t = {t}: {m} ± {e} vs {exact}");
    }
    // Coherence read off the averaged state matches the observable.
    let last = r.averaged_states.last().unwrap();
    assert!((last.get(0, 1).re - r.observable_means.last().unwrap()[0]).abs() < 1e-12);
}

#[test]
fn general_engine_matches_closed_form_without_negative_eigenvalues() {
    let x = [0.5, 0.5, 0.0];
    let model = build_pauli_model(x).unwrap();
    let mut config = RunConfig::new(EngineKind::RoqjGeneral, 0.002, 1.0, 2000, 5)
        .sample_every(100)
        .with_observables(vec![Observable::Re(0, 1)]);
    config.batches = 10;
    let r = run(&model, &plus(), &config).unwrap();
    assert_eq!(r.reverse_jumps, 0);
    assert_eq!(r.leaked_weight, 0.0);
    let rho0 = DensityMatrix::from_pure(&PureState::plus());
    for (s, &t) in r.times.iter().enumerate() {
        let exact = pauli_exact(x, &rho0, t).unwrap().get(0, 1).re;
        let (m, e) = (r.observable_means[s][0], r.observable_stderr[s][0]);
        assert!((m - exact).abs() <= (4.0 * e).max(0.02), "t = {t}: {m} ± {e} vs {exact}");
    }
}

#[test]
fn amplitude_damping_engines_agree() {
    let model = build_amplitude_damping(1.0).unwrap();
    let init = InitialState::Pure(PureState::basis(2, 1));
    let mut means = Vec::new();
    for engine in [EngineKind::Mcwf, EngineKind::RoqjP] {
        let config = RunConfig::new(engine, 0.01, 2.0, 3000, 8)
            .sample_every(50)
            .with_observables(vec![Observable::Population(1)]);
        let r = run(&model, &init, &config).unwrap();
        for (s, &t) in r.times.iter().enumerate() {
            let (m, e) = (r.observable_means[s][0], r.observable_stderr[s][0]);
            assert!((m - (-t).exp()).abs() <= 4.0 * e + 0.01 * t, "{engine} t = {t}: {m} ± {e}");
        }
        means.push(r);
    }
    for s in 0..means[0].times.len() {
        let d = (means[0].observable_means[s][0] - means[1].observable_means[s][0]).abs();
        let e = means[0].observable_stderr[s][0].hypot(means[1].observable_stderr[s][0]);
        assert!(d <= 4.0 * e + 1e-12, "sample {s}: {d} vs {e}");
    }
}

#[test]
fn conditional_jump_frequency_matches_rate() {
    // 10⁵ draws from |+⟩ at a fixed time: the jump fraction is λ dt.
    let model = build_pauli_model([0.5, 0.5, 0.0]).unwrap();
    let at = model.at(0.4).unwrap();
    let dt = 0.01;
    let lambda = spectral_split(&at.rate_operator(&PureState::plus()).unwrap(), None).unwrap().forward_rate();
    let rng = CounterRng::new(99);
    let trials = 100_000;
    let jumps = (0..trials)
        .filter(|&k| {
            let u = rng.uniform(CounterRng::trajectory_stream(k), 1);
            roqj_step_p(&PureState::plus(), &at, dt, u, 0.5).unwrap().jump.is_some()
        })
        .count();
    let p = lambda * dt;
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    assert!((jumps as f64 - trials as f64 * p).abs() < 4.0 * sd, "{jumps} vs {}", trials as f64 * p);
}

#[test]
fn negative_dephasing_recovers_coherence() {
    // γ(t) = 0.5 + cos(4t) is negative on intervals: coherence partially revives.
    let model = build_dephasing(TimeRate::varying(|t| 0.5 + (4.0 * t).cos()));
    let mut config = RunConfig::new(EngineKind::RoqjGeneral, 0.002, 1.2, 2000, 3)
        .sample_every(50)
        .with_observables(vec![Observable::Re(0, 1)]);
    config.batches = 10;
    let r = run(&model, &plus(), &config).unwrap();
    assert!(r.reverse_jumps > 0);
    assert!(r.leak_fraction() < 0.01, "leak {}", r.leak_fraction());
    let exact = integrate_master_equation(&model, &plus().density(), 1.2, 0.0002, 10).unwrap();
    for (s, &t) in r.times.iter().enumerate() {
        let e = exact.at(t).get(0, 1).re;
        let (m, err) = (r.observable_means[s][0], r.observable_stderr[s][0]);
        assert!((m - e).abs() <= (4.0 * err).max(0.02), "t = {t}: {m} ± {err} vs {e}");
    }
}

#[test]
fn small_network_general_engine() {
    let n = 4;
    let model = build_network_model(n, &sample_couplings(n, 0.6, 3), TimeRate::varying(network_rate)).unwrap();
    let mut config = RunConfig::new(EngineKind::RoqjGeneral, 0.005, 4.0, 1000, 21)
        .sample_every(40)
        .with_observables((0..n).map(Observable::Population).collect());
    config.match_tol = 1e-3;
    let init = InitialState::Pure(PureState::basis(n, 0));
    let r = run(&model, &init, &config).unwrap();
    assert!(r.leak_fraction() < 0.01, "leak {}", r.leak_fraction());
    assert!(r.diagnostics.max_forward_channels <= n);
    let exact = integrate_master_equation(&model, &init.density(), 4.0, 0.0005, 10).unwrap();
    for (s, &t) in r.times.iter().enumerate() {
        for i in 0..n {
            let e = exact.at(t).get(i, i).re;
            let (m, err) = (r.observable_means[s][i], r.observable_stderr[s][i]);
            assert!((m - e).abs() <= (3.0 * err).max(0.04), "t = {t}, site {i}: {m} ± {err} vs {e}");
        }
    }
}

#[test]
fn records_follow_tracked_members() {
    let model = build_dephasing(TimeRate::varying(|t| (4.0 * t).cos()));
    let mut config = RunConfig::new(EngineKind::RoqjGeneral, 0.005, 1.5, 200, 4).sample_every(300);
    config.batches = 2;
    config.record_trajectories = 20;
    let r = run(&model, &plus(), &config).unwrap();
    assert_eq!(r.records.len(), 20);
    let events: usize = r.records.iter().map(|rec| rec.len()).sum();
    assert!(events > 0);
    for rec in &r.records {
        assert_eq!(rec.samples.len(), r.times.len());
        assert!(rec.events.windows(2).all(|w| w[0].t <= w[1].t));
        assert!(rec.events.iter().all(|e| e.source_class.is_some() && e.target_class.is_some()));
    }
}

#[test]
fn seeds_change_trajectories_not_means() {
    let model = build_pauli_model([0.5, 0.5, 0.0]).unwrap();
    let run_with = |seed| {
        let config = RunConfig::new(EngineKind::RoqjP, 0.01, 1.0, 2000, seed)
            .sample_every(100)
            .with_observables(vec![Observable::Re(0, 1)]);
        run(&model, &plus(), &config).unwrap()
    };
    let (a, b) = (run_with(1), run_with(2));
    assert_ne!(a.jump_histogram, b.jump_histogram);
    let last = a.times.len() - 1;
    let d = (a.observable_means[last][0] - b.observable_means[last][0]).abs();
    let e = a.observable_stderr[last][0].hypot(b.observable_stderr[last][0]);
    assert!(d < 4.0 * e, "{d} vs {e}");
}

#[test]
fn tracking_every_member_reproduces_the_average() {
    let model = build_dephasing(TimeRate::varying(|t| 0.5 + (4.0 * t).cos()));
    for engine in [EngineKind::RoqjP, EngineKind::RoqjGeneral] {
        let model = if engine == EngineKind::RoqjP { build_pauli_model([0.5, 0.5, 0.0]).unwrap() } else { model.clone() };
        let mut config = RunConfig::new(engine, 0.005, 1.0, 150, 6).sample_every(20);
        config.batches = 1;
        config.record_trajectories = 150;
        let r = run(&model, &plus(), &config).unwrap();
        assert_eq!(r.records.len(), 150);
        for (s, avg) in r.averaged_states.iter().enumerate() {
            let mut sum = CMatrix::zeros(2, 2);
            for rec in &r.records {
                sum += rec.samples[s].projector();
            }
            sum /= num_complex::Complex64::new(150.0, 0.0);
            assert!((sum - avg.matrix()).norm() < 1e-12, "{engine} sample {s}");
        }
    }
}
