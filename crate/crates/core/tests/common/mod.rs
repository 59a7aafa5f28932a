//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use chimera_core::integrator::{integrate, IntegratorConfig, LiftedTrajectory};
use chimera_core::network::NetworkSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `sum_{r=1}^{4} c_r cos(r phi + xi_r)` written out term by term.
pub fn gchaos_direct(phi: f64, eta1: f64, eta2: f64) -> f64 {
    -2.0 * (phi + eta1).cos() - 2.0 * (2.0 * phi - eta1).cos() - (3.0 * phi + eta1 + eta2).cos()
        - 0.88 * (4.0 * phi + eta1 + eta2).cos()
}

/// Two equal populations, plus-sign convention, written as nested loops.
pub fn two_population_field(x: &[f64], n: usize, omega: f64, eps: f64, g: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let (p, q) = x.split_at(n);
    let mut out = vec![omega; 2 * n];
    for k in 0..n {
        for j in 0..n {
            out[k] += (g(p[k] - p[j]) + eps * g(p[k] - q[j])) / n as f64;
            out[n + k] += (g(q[k] - q[j]) + eps * g(q[k] - p[j])) / n as f64;
        }
    }
    out
}

/// Magnitude of the mean of `e^{i phi}` computed with a running complex sum.
pub fn order_parameter_direct(phases: &[f64]) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for p in phases {
        re += p.cos();
        im += p.sin();
    }
    (re * re + im * im).sqrt() / phases.len() as f64
}

/// Largest exponent from the divergence of two nearby trajectories, with the
/// separation pulled back to `d0` every `interval` time units. Does not use
/// the variational equations.
pub fn two_trajectory_lyapunov(
    net: &NetworkSpec,
    x0: &[f64],
    d0: f64,
    total: f64,
    skip: f64,
    interval: f64,
    seed: u64,
) -> f64 {
    let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dir: Vec<f64> = (0..x0.len()).map(|_| rng.random::<f64>() - 0.5).collect();
    let s = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    dir.iter_mut().for_each(|v| *v *= d0 / s);
    let mut a = x0.to_vec();
    let mut b: Vec<f64> = a.iter().zip(&dir).map(|(x, d)| x + d).collect();
    let steps = (total / interval).round() as usize;
    let mut sum = 0.0;
    let mut counted = 0.0;
    for i in 0..steps {
        a = endpoint(&integrate(net, &a, interval, &cfg, interval).unwrap());
        b = endpoint(&integrate(net, &b, interval, &cfg, interval).unwrap());
        let d = a.iter().zip(&b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt();
        if (i + 1) as f64 * interval > skip + 1e-9 {
            sum += (d / d0).ln();
            counted += interval;
        }
        for (y, x) in b.iter_mut().zip(&a) {
            *y = x + (*y - x) * d0 / d;
        }
    }
    sum / counted
}

fn endpoint(tr: &LiftedTrajectory) -> Vec<f64> {
    tr.last_phases().unwrap().to_vec()
}

/// Piecewise-linear lifted trajectory whose oscillator `k` turns at rate
/// `rates[w][k]` during window `w` of length `window`, sampled every `dt`.
pub fn synthetic_trajectory(rates: &[Vec<f64>], window: f64, dt: f64) -> LiftedTrajectory {
    let dim = rates[0].len();
    let mut tr = LiftedTrajectory::new(dim);
    let per = (window / dt).round() as usize;
    let mut phase = vec![0.0; dim];
    tr.push(0.0, &phase, &rates[0]);
    for (w, r) in rates.iter().enumerate() {
        for s in 1..=per {
            let t = w as f64 * window + s as f64 * dt;
            for (p, v) in phase.iter_mut().zip(r) {
                *p += v * dt;
            }
            tr.push(t, &phase, r);
        }
    }
    tr
}

/// Central-difference Jacobian, row-major.
pub fn fd_jacobian(net: &NetworkSpec, x: &[f64], h: f64) -> Vec<f64> {
    let d = x.len();
    let mut jac = vec![0.0; d * d];
    for b in 0..d {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[b] += h;
        xm[b] -= h;
        let fp = net.vector_field(&xp, 0.0).unwrap();
        let fm = net.vector_field(&xm, 0.0).unwrap();
        for a in 0..d {
            jac[a * d + b] = (fp[a] - fm[a]) / (2.0 * h);
        }
    }
    jac
}
