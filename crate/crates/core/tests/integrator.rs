mod common;

use chimera_core::coupling::{CouplingSpec, CHAOS_ETA, SADDLE_ETA};
use chimera_core::integrator::{integrate, integrate_sampled, FnSystem, IntegratorConfig};
use chimera_core::network::NetworkSpec;
use chimera_core::observables::average_frequency;

/// Error at t = 2 of y' = cos(t) y (exact exp(sin t)) with every step of size h.
fn fixed_step_error(h: f64) -> f64 {
    let sys = FnSystem {
        dim: 1,
        f: |t: f64, y: &[f64], dy: &mut [f64]| dy[0] = t.cos() * y[0],
    };
    let cfg = IntegratorConfig {
        rtol: 1e3,
        atol: 1e3,
        initial_step: Some(h),
        max_step: Some(h),
        ..Default::default()
    };
    let stepper = integrate_sampled(&sys, 0.0, &[1.0], 2.0, &cfg, 2.0, |_, _| {}).unwrap();
    assert_eq!(stepper.stats().rejected, 0);
    assert_eq!(stepper.stats().accepted, (2.0 / h).round() as usize);
    (stepper.y()[0] - 2f64.sin().exp()).abs()
}

#[test]
fn fifth_order_convergence_slope() {
    let hs = [0.2, 0.1, 0.05, 0.025];
    let errs: Vec<f64> = hs.iter().map(|&h| fixed_step_error(h)).collect();
    for w in errs.windows(2) {
        let slope = (w[0] / w[1]).log2();
        assert!((4.6..5.6).contains(&slope), "slope {slope}, errors {errs:?}");
    }
}

#[test]
fn runs_are_bitwise_reproducible() {
    let net = NetworkSpec::product(2, 4, 0.0, CouplingSpec::gchaos(SADDLE_ETA.0, SADDLE_ETA.1), 0.2).unwrap();
    let x0: Vec<f64> = (0..8).map(|i| (i as f64 * 1.3).sin() * 3.0).collect();
    let cfg = IntegratorConfig::default();
    let a = integrate(&net, &x0, 50.0, &cfg, 0.1).unwrap();
    let b = integrate(&net, &x0, 50.0, &cfg, 0.1).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sampling_cadence_does_not_change_steps() {
    let net = NetworkSpec::single(4, 0.0, CouplingSpec::gchaos(CHAOS_ETA.0, CHAOS_ETA.1)).unwrap();
    let x0 = [0.0, 1.0, 2.5, 4.0];
    let cfg = IntegratorConfig::default();
    let coarse = integrate(&net, &x0, 40.0, &cfg, 5.0).unwrap();
    let fine = integrate(&net, &x0, 40.0, &cfg, 0.01).unwrap();
    assert_eq!(coarse.meta.stats, fine.meta.stats);
    assert_eq!(coarse.last_phases(), fine.last_phases());
    for (i, &t) in coarse.times.iter().enumerate() {
        let j = fine.index_at_or_after(t - 1e-9);
        for (a, b) in coarse.phases_at(i).iter().zip(fine.phases_at(j)) {
            assert!((a - b).abs() < 1e-12, "t = {t}");
        }
    }
}

#[test]
fn lifted_phases_give_average_frequencies() {
    let net = NetworkSpec::single(4, 0.7, CouplingSpec::gchaos(CHAOS_ETA.0, CHAOS_ETA.1)).unwrap();
    let x0 = [0.0, 1.0, 2.5, 4.0];
    let tr = integrate(&net, &x0, 200.0, &IntegratorConfig::default(), 0.1).unwrap();
    let f = average_frequency(&tr, 0.0, 200.0).unwrap();
    let last = tr.last_phases().unwrap();
    for k in 0..4 {
        assert!((f[k] - (last[k] - x0[k]) / 200.0).abs() < 1e-12);
    }
    // consecutive samples never jump by a wrap
    for i in 1..tr.len() {
        for k in 0..4 {
            assert!((tr.phases_at(i)[k] - tr.phases_at(i - 1)[k]).abs() < 1.0);
        }
    }
}

#[test]
fn diagonal_frequency_is_omega_plus_g0() {
    let g = CouplingSpec::gchaos(SADDLE_ETA.0, SADDLE_ETA.1);
    let g0 = common::gchaos_direct(0.0, SADDLE_ETA.0, SADDLE_ETA.1);
    let omega = 0.4;
    let net = NetworkSpec::product(2, 4, omega, g, 0.0).unwrap();
    let x0 = [0.3, 0.3, 0.3, 0.3, -1.1, -1.1, -1.1, -1.1];
    let tr = integrate(&net, &x0, 100.0, &IntegratorConfig::default(), 1.0).unwrap();
    for f in average_frequency(&tr, 0.0, 100.0).unwrap() {
        assert!((f - (omega + g0)).abs() < 1e-8, "{f} vs {}", omega + g0);
    }
}
