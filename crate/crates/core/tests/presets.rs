//! Figure presets against a hand-written parameter table.

use chimera_core::experiment::{FigurePreset, InitialCondition, Job, SweepPolicy};
use serde_json::Value;

fn table() -> Value {
    serde_json::from_str(include_str!("data/presets.json")).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn check_near_sync(ic: &InitialCondition, row: &Value) {
    match ic {
        InitialCondition::NearSync { perturbation, warmup } => {
            assert_eq!(*perturbation, row["perturbation"].as_f64().unwrap());
            assert_eq!(*warmup, row["warmup"].as_f64().unwrap());
        }
        other => panic!("unexpected initial condition {other:?}"),
    }
}

#[test]
fn presets_match_parameter_table() {
    let table = table();
    for p in FigurePreset::ALL {
        let row = &table[p.id()];
        let cfg = p.config(0);
        let net = cfg.network.as_ref().unwrap();
        assert_eq!(cfg.job.name(), row["job"].as_str().unwrap(), "{}", p.id());
        assert_eq!(net.population_count() as u64, row["m"].as_u64().unwrap());
        assert_eq!(net.population_range(0).len() as u64, row["n"].as_u64().unwrap());
        assert_eq!(net.epsilon(), row["epsilon"].as_f64().unwrap());
        let g = &net.populations()[0].coupling;
        if let Some(g0) = row["g0"].as_f64() {
            assert!(close(g.eval(0.0), g0, 1e-3), "{}: g(0) = {}", p.id(), g.eval(0.0));
            assert!(close(g.derivative(0.0), row["dg0"].as_f64().unwrap(), 1e-3));
        }
        if let Some(h) = row["harmonics"].as_u64() {
            assert_eq!(g.harmonics() as u64, h);
        }
        assert_eq!(cfg.integrator.rtol, 1e-9);
        assert_eq!(cfg.integrator.atol, 1e-11);
        match &cfg.job {
            Job::Simulate(j) => {
                assert_eq!(j.duration, row["duration"].as_f64().unwrap());
                check_near_sync(&j.initial, row);
            }
            Job::Lyapunov(j) => {
                assert_eq!(j.lyapunov.total_time, row["total_time"].as_f64().unwrap());
                assert_eq!(j.lyapunov.skip, 500.0);
                assert_eq!(j.lyapunov.renorm_interval, 1.0);
                check_near_sync(&j.initial, row);
            }
            Job::Sweep(j) => {
                let grid: Vec<f64> = row["eps_grid"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
                assert_eq!(j.eps_grid.len(), grid.len());
                for (a, b) in j.eps_grid.iter().zip(&grid) {
                    assert!(close(*a, *b, 1e-12), "{}: {a} vs {b}", p.id());
                }
                assert_eq!(j.lyapunov.total_time, row["total_time"].as_f64().unwrap());
                let policy: SweepPolicy = serde_json::from_value(row["policy"].clone()).unwrap();
                assert_eq!(j.policy, policy);
                if let Some(settle) = row["settle"].as_f64() {
                    let Some(InitialCondition::Settled { duration, .. }) = &j.initial else {
                        panic!("{} should settle its initial condition", p.id())
                    };
                    assert_eq!(*duration, settle);
                }
            }
            other => panic!("unexpected job {other:?}"),
        }
    }
}
