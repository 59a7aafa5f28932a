//! Maximal Lyapunov exponent by Benettin renormalization of the variational flow.

use std::f64::consts::TAU;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{Dopri5, IntegratorConfig, LiftedTrajectory, TangentSystem, TrajectoryMeta};
use crate::network::NetworkSpec;
use crate::observables::{frequency_report, FrequencyReport};

/// Tangent norms below this are treated as a collapse.
pub const COLLAPSE_GUARD: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LyapunovConfig {
    pub total_time: f64,
    pub skip: f64,
    pub renorm_interval: f64,
    /// Seed for the random unit tangent vector.
    pub seed: u64,
    /// Explicit initial tangent; overrides the seeded draw.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tangent: Option<Vec<f64>>,
    /// Populations whose tangent components are averaged after the draw, so the
    /// tangent lies in the tangent space of their synchronized subspaces.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub synchronized: Vec<usize>,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            total_time: 7000.0,
            skip: 500.0,
            renorm_interval: 1.0,
            seed: 0,
            tangent: None,
            synchronized: Vec::new(),
        }
    }
}

impl LyapunovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.total_time.is_finite() && self.skip >= 0.0 && self.total_time > self.skip) {
            return Err(Error::param(format!(
                "need total time > skip >= 0, got T = {}, skip = {}",
                self.total_time, self.skip
            )));
        }
        if !(self.renorm_interval > 0.0 && self.renorm_interval.is_finite()) {
            return Err(Error::param("renormalization interval must be positive"));
        }
        Ok(())
    }

    /// Initial unit tangent vector for `net`.
    pub fn initial_tangent(&self, net: &NetworkSpec) -> Result<Vec<f64>> {
        let dim = net.dim();
        let mut v = match &self.tangent {
            Some(v) if v.len() != dim => {
                return Err(Error::Dimension {
                    expected: dim,
                    got: v.len(),
                })
            }
            Some(v) => v.clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
            }
        };
        for &l in &self.synchronized {
            if l >= net.population_count() {
                return Err(Error::Index {
                    index: l,
                    len: net.population_count(),
                });
            }
            let r = net.population_range(l);
            let mean = v[r.clone()].iter().sum::<f64>() / r.len() as f64;
            v[r].iter_mut().for_each(|x| *x = mean);
        }
        let n = norm(&v);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::param("initial tangent must be a finite nonzero vector"));
        }
        v.iter_mut().for_each(|x| *x /= n);
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    pub lambda_max: f64,
    /// Checkpoint times after the transient.
    pub times: Vec<f64>,
    /// Running estimate at each post-skip checkpoint.
    pub running: Vec<f64>,
    /// `log |v|` accumulated over each post-skip renormalization interval.
    pub log_increments: Vec<f64>,
    pub config: LyapunovConfig,
}

/// Output of a Benettin run that also keeps the base trajectory.
#[derive(Clone, Debug)]
pub struct LyapunovRun {
    pub result: LyapunovResult,
    pub trajectory: LiftedTrajectory,
    pub final_state: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn checkpoints(cfg: &LyapunovConfig) -> Vec<f64> {
    let count = (cfg.total_time / cfg.renorm_interval * (1.0 + 1e-12)).floor() as usize;
    let mut pts: Vec<f64> = (1..=count).map(|k| k as f64 * cfg.renorm_interval).collect();
    pts.push(cfg.total_time);
    if cfg.skip > 0.0 {
        pts.push(cfg.skip);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * cfg.renorm_interval);
    pts.retain(|&t| t <= cfg.total_time);
    pts
}

/// Estimates the maximal Lyapunov exponent along the orbit of `x0`.
pub fn max_lyapunov(
    net: &NetworkSpec,
    x0: &[f64],
    cfg: &LyapunovConfig,
    icfg: &IntegratorConfig,
) -> Result<LyapunovResult> {
    run(net, x0, cfg, icfg, None).map(|r| r.result)
}

/// As [`max_lyapunov`], additionally recording the base trajectory every
/// `sample_interval` time units.
pub fn max_lyapunov_with_trajectory(
    net: &NetworkSpec,
    x0: &[f64],
    cfg: &LyapunovConfig,
    icfg: &IntegratorConfig,
    sample_interval: f64,
) -> Result<LyapunovRun> {
    if !(sample_interval > 0.0 && sample_interval.is_finite()) {
        return Err(Error::param("sample interval must be positive"));
    }
    run(net, x0, cfg, icfg, Some(sample_interval))
}

fn run(
    net: &NetworkSpec,
    x0: &[f64],
    cfg: &LyapunovConfig,
    icfg: &IntegratorConfig,
    sample_interval: Option<f64>,
) -> Result<LyapunovRun> {
    cfg.validate()?;
    let d = net.dim();
    if x0.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: x0.len(),
        });
    }
    let v0 = cfg.initial_tangent(net)?;
    let sys = TangentSystem { net };
    let mut y0 = x0.to_vec();
    y0.extend_from_slice(&v0);
    let mut stepper = Dopri5::new(&sys, 0.0, &y0, icfg)?;

    let mut traj = LiftedTrajectory::new(d);
    let mut rates = vec![0.0; d];
    let mut buf = vec![0.0; 2 * d];
    let mut next_sample = 0.0;
    let mut sample_index = 0usize;
    if let Some(dt) = sample_interval {
        net.rates_into(0.0, x0, &mut rates);
        traj.push(0.0, x0, &rates);
        sample_index = 1;
        next_sample = dt;
    }

    let mut times = Vec::new();
    let mut running = Vec::new();
    let mut increments = Vec::new();
    let mut log_sum = 0.0;
    for tc in checkpoints(cfg) {
        while stepper.t() < tc {
            stepper.step(tc)?;
            if let Some(dt) = sample_interval {
                while next_sample <= stepper.t() {
                    let ts = next_sample;
                    if ts == stepper.t() {
                        buf.copy_from_slice(stepper.y());
                    } else {
                        stepper.interpolate(ts, &mut buf);
                    }
                    net.rates_into(ts, &buf[..d], &mut rates);
                    traj.push(ts, &buf[..d], &rates);
                    sample_index += 1;
                    next_sample = sample_index as f64 * dt;
                }
            }
        }
        let t = stepper.t();
        let y = stepper.y();
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        let n = norm(&y[d..]);
        if !(n >= COLLAPSE_GUARD) || !n.is_finite() {
            return Err(Error::TangentCollapse { t, norm: n });
        }
        if t > cfg.skip {
            let inc = n.ln();
            log_sum += inc;
            increments.push(inc);
            times.push(t);
            running.push(log_sum / (t - cfg.skip));
        }
        stepper.rescale_linear_block(d..2 * d, 1.0 / n);
    }
    if let Some(dt) = sample_interval {
        let t_end = stepper.t();
        if traj.end_time() < t_end - 1e-9 * dt {
            net.rates_into(t_end, &stepper.y()[..d], &mut rates);
            traj.push(t_end, &stepper.y()[..d], &rates);
        }
    }
    traj.meta = TrajectoryMeta {
        integrator: icfg.clone(),
        network_hash: net.content_hash(),
        seed: Some(cfg.seed),
        stats: stepper.stats(),
    };
    let lambda_max = *running.last().ok_or_else(|| Error::param("no checkpoint after the transient"))?;
    Ok(LyapunovRun {
        result: LyapunovResult {
            lambda_max,
            times,
            running,
            log_increments: increments,
            config: cfg.clone(),
        },
        trajectory: traj,
        final_state: stepper.y()[..d].to_vec(),
    })
}

/// Uniform sample on `Δ_n × T^n × ..`: population 0 fully synchronized at one
/// uniform phase, every other oscillator independently uniform.
pub fn sample_sync_cross<R: Rng>(net: &NetworkSpec, rng: &mut R) -> Vec<f64> {
    let r0 = net.population_range(0);
    let sync = rng.random_range(0.0..TAU);
    (0..net.dim())
        .map(|i| if r0.contains(&i) { sync } else { rng.random_range(0.0..TAU) })
        .collect()
}

/// Uniform phases sorted into the canonical order `φ_1 < .. < φ_n < φ_1 + 2π`.
pub fn sample_canonical<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum IcPolicy {
    /// Fresh uniform draw on the synchronized cross for every ε.
    RandomOnSyncCross { seed: u64 },
    /// Start from `x0` (or a seeded draw) and reuse each final state for the next ε.
    Adiabatic {
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
    },
    /// Same initial condition for every ε.
    Fixed { x0: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepOptions {
    pub burn_in: f64,
    pub n_windows: usize,
    pub sample_interval: f64,
    /// Worker threads; `0` uses the global rayon pool.
    pub workers: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            burn_in: 500.0,
            n_windows: 10,
            sample_interval: 0.1,
            workers: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepData {
    pub lyapunov: LyapunovResult,
    pub report: FrequencyReport,
    pub initial_state: Vec<f64>,
    pub final_state: Vec<f64>,
}

#[derive(Debug)]
pub struct SweepPoint {
    pub eps: f64,
    /// Seed of the random draws for this point (initial state and tangent).
    pub seed: u64,
    pub outcome: Result<SweepData>,
}

/// Per-point seed derived from the base seed and the grid index.
pub fn point_seed(base: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index as u64 + 1);
    rng.random()
}

fn sweep_point(
    template: &NetworkSpec,
    eps: f64,
    seed: u64,
    x0: &[f64],
    cfg: &LyapunovConfig,
    icfg: &IntegratorConfig,
    opts: &SweepOptions,
) -> Result<SweepData> {
    let net = template.with_epsilon(eps)?;
    let mut lc = cfg.clone();
    lc.seed = seed;
    let run = max_lyapunov_with_trajectory(&net, x0, &lc, icfg, opts.sample_interval)?;
    let report = frequency_report(std::slice::from_ref(&run.trajectory), opts.burn_in, opts.n_windows)?;
    Ok(SweepData {
        lyapunov: run.result,
        report,
        initial_state: x0.to_vec(),
        final_state: run.final_state,
    })
}

/// Runs one Benettin estimate and one frequency report per ε. Independent
/// policies run in parallel; the adiabatic policy is sequential by nature.
pub fn lyapunov_sweep(
    template: &NetworkSpec,
    eps_grid: &[f64],
    policy: &IcPolicy,
    cfg: &LyapunovConfig,
    icfg: &IntegratorConfig,
    opts: &SweepOptions,
) -> Result<Vec<SweepPoint>> {
    if let Some(e) = eps_grid.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
        return Err(Error::param(format!("coupling strengths must be nonnegative, got {e}")));
    }
    cfg.validate()?;
    icfg.validate()?;
    let d = template.dim();
    match policy {
        IcPolicy::Fixed { x0 } if x0.len() != d => {
            return Err(Error::Dimension {
                expected: d,
                got: x0.len(),
            })
        }
        IcPolicy::Adiabatic { x0: Some(x0), .. } if x0.len() != d => {
            return Err(Error::Dimension {
                expected: d,
                got: x0.len(),
            })
        }
        _ => {}
    }

    if let IcPolicy::Adiabatic { seed, x0 } = policy {
        let mut state = match x0 {
            Some(x) => x.clone(),
            None => sample_sync_cross(template, &mut ChaCha8Rng::seed_from_u64(*seed)),
        };
        let mut out = Vec::with_capacity(eps_grid.len());
        for (i, &eps) in eps_grid.iter().enumerate() {
            let s = point_seed(*seed, i);
            let outcome = sweep_point(template, eps, s, &state, cfg, icfg, opts);
            if let Ok(data) = &outcome {
                state = data.final_state.clone();
            }
            out.push(SweepPoint { eps, seed: s, outcome });
        }
        return Ok(out);
    }

    let task = |(i, &eps): (usize, &f64)| {
        let (s, x0) = match policy {
            IcPolicy::RandomOnSyncCross { seed } => {
                let s = point_seed(*seed, i);
                (s, sample_sync_cross(template, &mut ChaCha8Rng::seed_from_u64(s)))
            }
            IcPolicy::Fixed { x0 } => (point_seed(0, i), x0.clone()),
            IcPolicy::Adiabatic { .. } => unreachable!(),
        };
        SweepPoint {
            eps,
            seed: s,
            outcome: sweep_point(template, eps, s, &x0, cfg, icfg, opts),
        }
    };
    if opts.workers == 0 {
        return Ok(eps_grid.par_iter().enumerate().map(task).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| eps_grid.par_iter().enumerate().map(task).collect()))
}

/// Writes `eps, lambda_max, pop1_freq_min, pop1_freq_max, pop2_freq_min, pop2_freq_max, seed`
/// using coarse rate ranges per population. Failed points keep their row with
/// `NaN` values; the caller records the failure itself.
pub fn write_sweep_csv<W: Write>(mut w: W, net: &NetworkSpec, points: &[SweepPoint]) -> Result<()> {
    writeln!(
        w,
        "eps,lambda_max,pop1_freq_min,pop1_freq_max,pop2_freq_min,pop2_freq_max,seed"
    )?;
    let pops = net.population_count();
    for p in points {
        match &p.outcome {
            Ok(data) => {
                let mut cols = vec![p.eps.to_string(), data.lyapunov.lambda_max.to_string()];
                for l in 0..2 {
                    match (l < pops).then(|| data.report.coarse_hull(net.population_range(l))).flatten() {
                        Some(iv) => {
                            cols.push(iv.lower.to_string());
                            cols.push(iv.upper.to_string());
                        }
                        None => cols.extend(["NaN".to_string(), "NaN".to_string()]),
                    }
                }
                cols.push(p.seed.to_string());
                writeln!(w, "{}", cols.join(","))?;
            }
            Err(_) => writeln!(w, "{},NaN,NaN,NaN,NaN,NaN,{}", p.eps, p.seed)?,
        }
    }
    Ok(())
}

/// Writes the convergence series as `t, lambda_running`.
pub fn write_convergence_csv<W: Write>(mut w: W, result: &LyapunovResult) -> Result<()> {
    writeln!(w, "t,lambda_running")?;
    for (t, l) in result.times.iter().zip(&result.running) {
        writeln!(w, "{t},{l}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{BumpReading, CouplingSpec, SADDLE_ETA};

    fn short(t: f64, skip: f64) -> LyapunovConfig {
        LyapunovConfig {
            total_time: t,
            skip,
            ..LyapunovConfig::default()
        }
    }

    #[test]
    fn zero_coupling_has_zero_exponent() {
        let net = NetworkSpec::product(2, 3, 1.0, CouplingSpec::zero(), 0.3).unwrap();
        let x0 = [0.1, 0.5, 2.0, 3.0, 4.0, 5.0];
        let r = max_lyapunov(&net, &x0, &short(50.0, 10.0), &IntegratorConfig::default()).unwrap();
        assert!(r.lambda_max.abs() < 1e-14, "{}", r.lambda_max);
        assert_eq!(r.times.len(), 40);
    }

    #[test]
    fn running_series_matches_increments() {
        let net = NetworkSpec::single(4, 0.0, CouplingSpec::gchaos(0.11151, 0.05586)).unwrap();
        let x0 = [0.0, 1.0, 2.5, 4.0];
        let r = max_lyapunov(&net, &x0, &short(60.0, 10.0), &IntegratorConfig::default()).unwrap();
        assert_eq!(*r.running.last().unwrap(), r.lambda_max);
        let sum: f64 = r.log_increments.iter().sum();
        assert!((sum / 50.0 - r.lambda_max).abs() < 1e-12);
    }

    #[test]
    fn synchronized_attracting_state_is_neutral() {
        let g = CouplingSpec::ghat(SADDLE_ETA.0, SADDLE_ETA.1, BumpReading::Calibrated);
        assert!(g.derivative(0.0) < 0.0);
        let net = NetworkSpec::product(2, 4, 0.0, g, 0.0).unwrap();
        let x0 = [0.3, 0.3, 0.3, 0.3, 2.0, 2.0, 2.0, 2.0];
        let r = max_lyapunov(&net, &x0, &short(300.0, 50.0), &IntegratorConfig::default()).unwrap();
        assert!(r.lambda_max.abs() < 1e-2, "{}", r.lambda_max);
    }

    #[test]
    fn checkpoint_grid_includes_skip_and_end() {
        let c = checkpoints(&LyapunovConfig {
            total_time: 3.5,
            skip: 1.25,
            renorm_interval: 1.0,
            ..Default::default()
        });
        assert_eq!(c, vec![1.0, 1.25, 2.0, 3.0, 3.5]);
    }

    #[test]
    fn config_validation() {
        assert!(short(10.0, 10.0).validate().is_err());
        let mut c = LyapunovConfig::default();
        c.renorm_interval = 0.0;
        assert!(c.validate().is_err());
        let net3 = NetworkSpec::single(3, 0.0, CouplingSpec::zero()).unwrap();
        c = LyapunovConfig::default();
        c.tangent = Some(vec![0.0; 3]);
        assert!(c.initial_tangent(&net3).is_err());
        c.tangent = Some(vec![1.0; 2]);
        assert!(c.initial_tangent(&net3).is_err());
        let net = NetworkSpec::product(2, 3, 0.0, CouplingSpec::zero(), 0.0).unwrap();
        let v = LyapunovConfig::default().initial_tangent(&net).unwrap();
        assert!((norm(&v) - 1.0).abs() < 1e-15);
        c = LyapunovConfig {
            synchronized: vec![0],
            ..Default::default()
        };
        let v = c.initial_tangent(&net).unwrap();
        assert!(v[..3].iter().all(|&x| x == v[0]));
        assert!((norm(&v) - 1.0).abs() < 1e-15);
        c.synchronized = vec![2];
        assert!(c.initial_tangent(&net).is_err());
    }

    #[test]
    fn trajectory_samples_follow_grid() {
        let net = NetworkSpec::single(3, 1.0, CouplingSpec::gchaos(0.1, 0.05)).unwrap();
        let run = max_lyapunov_with_trajectory(
            &net,
            &[0.0, 2.0, 4.0],
            &short(5.0, 1.0),
            &IntegratorConfig::default(),
            0.25,
        )
        .unwrap();
        assert_eq!(run.trajectory.len(), 21);
        assert_eq!(run.trajectory.end_time(), 5.0);
        assert_eq!(run.final_state, run.trajectory.last_phases().unwrap());
    }

    #[test]
    fn sync_cross_sample_structure() {
        let net = NetworkSpec::product(2, 4, 0.0, CouplingSpec::zero(), 0.1).unwrap();
        let x = sample_sync_cross(&net, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(x[..4].iter().all(|&p| p == x[0]));
        assert!(x[4..].windows(2).all(|w| w[0] != w[1]));
        assert!(x.iter().all(|p| (0.0..TAU).contains(p)));
    }

    #[test]
    fn sweep_rejects_negative_eps_and_marks_failures() {
        let net = NetworkSpec::product(2, 2, 0.0, CouplingSpec::gchaos(0.1, 0.05), 0.0).unwrap();
        let pol = IcPolicy::Fixed { x0: vec![0.0; 4] };
        let cfg = short(20.0, 5.0);
        let opts = SweepOptions {
            burn_in: 5.0,
            n_windows: 2,
            ..Default::default()
        };
        assert!(lyapunov_sweep(&net, &[0.1, -0.1], &pol, &cfg, &IntegratorConfig::default(), &opts).is_err());
        let mut icfg = IntegratorConfig::default();
        icfg.max_steps = 5;
        let pts = lyapunov_sweep(&net, &[0.0, 0.1], &pol, &cfg, &icfg, &opts).unwrap();
        assert!(pts.iter().all(|p| p.outcome.as_ref().is_err_and(|e| e.is_numeric())));
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &net, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().contains("NaN"));
    }

    #[test]
    fn point_seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..5).map(|i| point_seed(7, i)).collect();
        let b: Vec<u64> = (0..5).map(|i| point_seed(7, i)).collect();
        assert_eq!(a, b);
        let mut s = a.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 5);
    }
}
