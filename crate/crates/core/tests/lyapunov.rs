mod common;

use chimera_core::coupling::{CouplingSpec, CHAOS_ETA};
use chimera_core::integrator::IntegratorConfig;
use chimera_core::lyapunov::{max_lyapunov, LyapunovConfig};
use chimera_core::network::NetworkSpec;

#[test]
fn benettin_agrees_with_two_trajectory_estimate() {
    let net = NetworkSpec::single(4, 0.0, CouplingSpec::gchaos(CHAOS_ETA.0, CHAOS_ETA.1)).unwrap();
    let x0 = [0.1, 1.4, 2.9, 4.6];
    let cfg = LyapunovConfig {
        total_time: 2000.0,
        skip: 100.0,
        seed: 3,
        ..Default::default()
    };
    let benettin = max_lyapunov(&net, &x0, &cfg, &IntegratorConfig::default()).unwrap().lambda_max;
    let oracle = common::two_trajectory_lyapunov(&net, &x0, 1e-8, 2000.0, 100.0, 1.0, 3);
    assert!(benettin > 0.01, "benettin {benettin}");
    let rel = (benettin - oracle).abs() / oracle.abs();
    assert!(rel < 0.2, "benettin {benettin} oracle {oracle}");
}

#[test]
fn uncoupled_rotation_has_zero_exponent() {
    let net = NetworkSpec::single(3, 1.3, CouplingSpec::zero()).unwrap();
    let r = max_lyapunov(&net, &[0.0, 1.0, 2.0], &LyapunovConfig { total_time: 100.0, skip: 10.0, ..Default::default() }, &IntegratorConfig::default()).unwrap();
    assert!(r.lambda_max.abs() < 1e-14);
    assert_eq!(r.times.len(), r.running.len());
}
