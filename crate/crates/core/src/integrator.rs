//! Adaptive Dormand–Prince 5(4) integration with PI step-size control and
//! fourth-order dense output.
//!
//! Recorded phases are lifted to the real line, so a trajectory gives average
//! frequencies directly as lifted-phase differences. Internally each phase is
//! kept within one turn of zero and its winding is tracked separately: at
//! lifted values in the thousands the float spacing is about 1e-13, and two
//! oscillators that close would merge bitwise and never separate again.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkSpec;

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Number of leading components that are angles: the field must not change
    /// when any one of them moves by 2π.
    fn angle_dims(&self) -> usize {
        0
    }
}

impl OdeSystem for NetworkSpec {
    fn dim(&self) -> usize {
        NetworkSpec::dim(self)
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        self.rates_into(t, y, dy)
    }

    fn angle_dims(&self) -> usize {
        NetworkSpec::dim(self)
    }
}

/// Network phases co-integrated with a tangent vector: state `[x; v]` with
/// `v' = J(x) v`.
pub struct TangentSystem<'a> {
    pub net: &'a NetworkSpec,
}

impl OdeSystem for TangentSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.net.dim()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let d = self.net.dim();
        let (x, v) = y.split_at(d);
        let (dx, dv) = dy.split_at_mut(d);
        self.net.rates_and_tangent_into(t, x, v, dx, dv);
    }

    fn angle_dims(&self) -> usize {
        self.net.dim()
    }
}

/// Closure-backed system, handy for scalar test problems.
pub struct FnSystem<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.f)(t, y, dy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when absent.
    pub initial_step: Option<f64>,
    /// Upper bound on the step size; unbounded when absent.
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-9,
            atol: 1e-11,
            initial_step: None,
            max_step: None,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        IntegratorConfig {
            rtol,
            atol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.rtol.is_finite() && self.atol.is_finite()) {
            return Err(Error::param("integrator tolerances must be positive and finite"));
        }
        if self.initial_step.is_some_and(|h| !(h > 0.0)) {
            return Err(Error::param("initial step must be positive"));
        }
        if self.max_step.is_some_and(|h| !(h > 0.0)) {
            return Err(Error::param("max step must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::param("max_steps must be at least 1"));
        }
        Ok(())
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;

/// Step statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Explicit Dormand–Prince 5(4) stepper over any [`OdeSystem`].
pub struct Dopri5<'a, S: OdeSystem> {
    sys: &'a S,
    cfg: IntegratorConfig,
    t: f64,
    /// State with angles reduced; `lifted` adds back `winding` turns.
    y: Vec<f64>,
    winding: Vec<f64>,
    lifted: Vec<f64>,
    h: f64,
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    cont: [Vec<f64>; 5],
    t_old: f64,
    h_old: f64,
    facold: f64,
    last_rejected: bool,
    stats: StepStats,
}

impl<'a, S: OdeSystem> Dopri5<'a, S> {
    pub fn new(sys: &'a S, t0: f64, y0: &[f64], cfg: &IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        let n = sys.dim();
        if y0.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: y0.len(),
            });
        }
        if y0.iter().any(|v| !v.is_finite()) || !t0.is_finite() {
            return Err(Error::NonFinite { t: t0 });
        }
        let zeros = || vec![0.0; n];
        let mut s = Dopri5 {
            sys,
            cfg: cfg.clone(),
            t: t0,
            y: y0.to_vec(),
            winding: vec![0.0; sys.angle_dims().min(n)],
            lifted: y0.to_vec(),
            h: 0.0,
            k: std::array::from_fn(|_| zeros()),
            ytmp: zeros(),
            ynew: zeros(),
            cont: std::array::from_fn(|_| zeros()),
            t_old: t0,
            h_old: 0.0,
            facold: 1e-4,
            last_rejected: false,
            stats: StepStats::default(),
        };
        s.wrap_angles();
        sys.rhs(t0, &s.y, &mut s.k[0]);
        s.stats.evaluations += 1;
        if s.k[0].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: t0 });
        }
        for (c, y) in s.cont[0].iter_mut().zip(&s.y) {
            *c = *y;
        }
        s.h = match cfg.initial_step {
            Some(h) => h,
            None => s.initial_step(),
        };
        s.h = s.h.min(s.max_step());
        Ok(s)
    }

    /// Moves every angle outside [-2π, 2π] back by whole turns, in the state
    /// and in the interpolant's base point, then refreshes the lifted copy.
    fn wrap_angles(&mut self) {
        use std::f64::consts::TAU;
        for (i, w) in self.winding.iter_mut().enumerate() {
            let v = self.y[i];
            if v.abs() > TAU {
                let turns = (v / TAU).round();
                let shift = turns * TAU;
                self.y[i] = v - shift;
                self.cont[0][i] -= shift;
                *w += turns;
            }
        }
        self.lifted.copy_from_slice(&self.y);
        for (l, w) in self.lifted.iter_mut().zip(&self.winding) {
            *l += w * TAU;
        }
    }

    fn max_step(&self) -> f64 {
        self.cfg.max_step.unwrap_or(f64::INFINITY)
    }

    /// Starting step heuristic of Hairer, Nørsett and Wanner.
    fn initial_step(&mut self) -> f64 {
        let n = self.y.len() as f64;
        let sk = |y: f64| self.cfg.atol + self.cfg.rtol * y.abs();
        let rms = |v: &mut dyn Iterator<Item = f64>| (v.map(|x| x * x).sum::<f64>() / n).sqrt();
        let d0 = rms(&mut self.y.iter().map(|&y| y / sk(y)));
        let d1 = rms(&mut self.k[0].iter().zip(&self.y).map(|(&f, &y)| f / sk(y)));
        let mut h0 = if d0 < 1e-10 || d1 < 1e-10 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(self.max_step());
        for ((yt, y), f) in self.ytmp.iter_mut().zip(&self.y).zip(&self.k[0]) {
            *yt = y + h0 * f;
        }
        self.sys.rhs(self.t + h0, &self.ytmp, &mut self.k[1]);
        self.stats.evaluations += 1;
        let d2 = rms(&mut self
            .k[1]
            .iter()
            .zip(&self.k[0])
            .zip(&self.y)
            .map(|((&f1, &f0), &y)| (f1 - f0) / sk(y)))
            / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dmax).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Current state with lifted angles.
    pub fn y(&self) -> &[f64] {
        &self.lifted
    }

    /// Start of the most recent accepted step.
    pub fn t_prev(&self) -> f64 {
        self.t_old
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    /// Multiplies the components `range` of the state, and of the stored
    /// derivative, by `factor`. Exact only for blocks the vector field depends
    /// on linearly and does not feed back from, such as a tangent vector.
    pub fn rescale_linear_block(&mut self, range: std::ops::Range<usize>, factor: f64) {
        for v in &mut self.y[range.clone()] {
            *v *= factor;
        }
        for v in &mut self.k[0][range.clone()] {
            *v *= factor;
        }
        // the interpolant no longer matches the rescaled state
        for c in &mut self.cont {
            for v in &mut c[range.clone()] {
                *v *= factor;
            }
        }
        for v in &mut self.lifted[range] {
            *v *= factor;
        }
    }

    /// Takes one accepted step, never stepping past `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        let n = self.y.len();
        let remaining = t_limit - self.t;
        if remaining <= 0.0 {
            return Ok(());
        }
        loop {
            if self.stats.accepted + self.stats.rejected >= self.cfg.max_steps {
                return Err(Error::MaxSteps {
                    max_steps: self.cfg.max_steps,
                    t: self.t,
                });
            }
            let mut h = self.h.min(self.max_step());
            let remaining = t_limit - self.t;
            let last = h >= remaining || 1.01 * h >= remaining;
            if last {
                h = remaining;
            }
            if 0.1 * h.abs() <= self.t.abs() * f64::EPSILON || h <= 0.0 {
                return Err(Error::StepSize { t: self.t, h });
            }

            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, a) in A[s].iter().enumerate().take(s) {
                        acc += a * self.k[j][i];
                    }
                    self.ytmp[i] = self.y[i] + h * acc;
                }
                let (head, tail) = self.k.split_at_mut(s);
                let _ = head;
                self.sys.rhs(self.t + C[s] * h, &self.ytmp, &mut tail[0]);
                if s == 6 {
                    std::mem::swap(&mut self.ynew, &mut self.ytmp);
                }
            }
            self.stats.evaluations += 6;

            let mut err = 0.0f64;
            let mut finite = true;
            for i in 0..n {
                let mut e = 0.0;
                for (j, ej) in E.iter().enumerate() {
                    e += ej * self.k[j][i];
                }
                let sk = self.cfg.atol + self.cfg.rtol * self.y[i].abs().max(self.ynew[i].abs());
                let r = (h * e / sk).abs();
                if !r.is_finite() || !self.k[6][i].is_finite() {
                    finite = false;
                }
                err = err.max(r);
            }
            if !finite {
                self.stats.rejected += 1;
                self.last_rejected = true;
                self.h = h * FAC_MIN;
                continue;
            }

            let fac11 = err.powf(EXPO1);
            let fac = (fac11 / self.facold.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;

            if err <= 1.0 {
                self.facold = err.max(1e-4);
                self.stats.accepted += 1;
                for i in 0..n {
                    let ydiff = self.ynew[i] - self.y[i];
                    let bspl = h * self.k[0][i] - ydiff;
                    self.cont[0][i] = self.y[i];
                    self.cont[1][i] = ydiff;
                    self.cont[2][i] = bspl;
                    self.cont[3][i] = ydiff - h * self.k[6][i] - bspl;
                    let mut d = 0.0;
                    for (j, dj) in D.iter().enumerate() {
                        d += dj * self.k[j][i];
                    }
                    self.cont[4][i] = h * d;
                }
                self.t_old = self.t;
                self.h_old = h;
                self.t = if last { t_limit } else { self.t + h };
                std::mem::swap(&mut self.y, &mut self.ynew);
                self.wrap_angles();
                self.k.swap(0, 6);
                if self.last_rejected {
                    h_new = h_new.min(h);
                }
                self.last_rejected = false;
                // a step clipped to t_limit says little about the next one; keep
                // the larger of the pending proposal and the new one
                self.h = if last { h_new.max(self.h) } else { h_new };
                return Ok(());
            }
            self.stats.rejected += 1;
            self.last_rejected = true;
            self.h = h / (fac11 / SAFE).min(1.0 / FAC_MIN);
        }
    }

    /// Dense-output state at `t` inside the last accepted step.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) {
        let theta = if self.h_old == 0.0 {
            0.0
        } else {
            (t - self.t_old) / self.h_old
        };
        let theta1 = 1.0 - theta;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.cont[0][i]
                + theta
                    * (self.cont[1][i]
                        + theta1
                            * (self.cont[2][i]
                                + theta * (self.cont[3][i] + theta1 * self.cont[4][i])));
        }
        for (o, w) in out.iter_mut().zip(&self.winding) {
            *o += w * std::f64::consts::TAU;
        }
    }
}

/// Metadata attached to a recorded trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub integrator: IntegratorConfig,
    pub network_hash: String,
    pub seed: Option<u64>,
    pub stats: StepStats,
}

/// Sampled solution with lifted (unwrapped) phases and the instantaneous rates
/// at each sample.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LiftedTrajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Row-major, one row of `dim` phases per sample.
    pub phases: Vec<f64>,
    /// Vector field evaluated at each recorded state.
    pub rates: Vec<f64>,
    pub meta: TrajectoryMeta,
}

impl LiftedTrajectory {
    pub fn new(dim: usize) -> Self {
        LiftedTrajectory {
            dim,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, phases: &[f64], rates: &[f64]) {
        debug_assert_eq!(phases.len(), self.dim);
        self.times.push(t);
        self.phases.extend_from_slice(phases);
        self.rates.extend_from_slice(rates);
    }

    pub fn phases_at(&self, i: usize) -> &[f64] {
        &self.phases[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rates_at(&self, i: usize) -> &[f64] {
        &self.rates[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_phases(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.phases_at(self.len() - 1))
    }

    pub fn start_time(&self) -> f64 {
        self.times.first().copied().unwrap_or(0.0)
    }

    pub fn end_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at_or_after(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t)
    }

    /// Samples with `t0 <= t <= t1`, as a new trajectory.
    pub fn slice_time(&self, t0: f64, t1: f64) -> LiftedTrajectory {
        let i0 = self.index_at_or_after(t0);
        let i1 = self.times.partition_point(|&s| s <= t1);
        LiftedTrajectory {
            dim: self.dim,
            times: self.times[i0..i1].to_vec(),
            phases: self.phases[i0 * self.dim..i1 * self.dim].to_vec(),
            rates: self.rates[i0 * self.dim..i1 * self.dim].to_vec(),
            meta: self.meta.clone(),
        }
    }
}

fn sample_times(t0: f64, t1: f64, dt: f64) -> impl Iterator<Item = f64> {
    let count = ((t1 - t0) / dt * (1.0 + 1e-12)).floor() as usize;
    let grid_end = t0 + count as f64 * dt;
    let tail = ((t1 - grid_end) > 1e-9 * dt).then_some(t1);
    (0..=count).map(move |k| t0 + k as f64 * dt).chain(tail)
}

fn check_span(duration: f64, sample_interval: f64) -> Result<()> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::param(format!("duration must be positive, got {duration}")));
    }
    if !(sample_interval > 0.0 && sample_interval.is_finite()) {
        return Err(Error::param(format!(
            "sample interval must be positive, got {sample_interval}"
        )));
    }
    Ok(())
}

/// Integrates `sys` from `t0` for `duration`, calling `observe(t, y)` at every
/// sample time `t0 + k * interval` (and at the final time). Returns the stepper
/// so callers can read its final state and statistics.
pub fn integrate_sampled<'a, S: OdeSystem>(
    sys: &'a S,
    t0: f64,
    y0: &[f64],
    duration: f64,
    cfg: &IntegratorConfig,
    sample_interval: f64,
    mut observe: impl FnMut(f64, &[f64]),
) -> Result<Dopri5<'a, S>> {
    check_span(duration, sample_interval)?;
    let t1 = t0 + duration;
    let mut stepper = Dopri5::new(sys, t0, y0, cfg)?;
    let mut buf = vec![0.0; sys.dim()];
    let mut samples = sample_times(t0, t1, sample_interval).peekable();
    if let Some(&ts) = samples.peek() {
        if ts <= t0 {
            observe(t0, y0);
            samples.next();
        }
    }
    while stepper.t() < t1 {
        stepper.step(t1)?;
        while let Some(&ts) = samples.peek() {
            if ts > stepper.t() {
                break;
            }
            if ts == stepper.t() {
                observe(ts, stepper.y());
            } else {
                stepper.interpolate(ts, &mut buf);
                observe(ts, &buf);
            }
            samples.next();
        }
        if stepper.y().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: stepper.t() });
        }
    }
    Ok(stepper)
}

/// Integrates the network from `t0` and records phases and rates at the given
/// cadence.
pub fn integrate_from(
    net: &NetworkSpec,
    t0: f64,
    x0: &[f64],
    duration: f64,
    cfg: &IntegratorConfig,
    sample_interval: f64,
) -> Result<LiftedTrajectory> {
    let mut traj = LiftedTrajectory::new(net.dim());
    let mut rates = vec![0.0; net.dim()];
    let stepper = integrate_sampled(net, t0, x0, duration, cfg, sample_interval, |t, y| {
        net.rates_into(t, y, &mut rates);
        traj.push(t, y, &rates);
    })?;
    traj.meta = TrajectoryMeta {
        integrator: cfg.clone(),
        network_hash: net.content_hash(),
        seed: None,
        stats: stepper.stats(),
    };
    Ok(traj)
}

/// Integrates the network over `[0, duration]`.
pub fn integrate(
    net: &NetworkSpec,
    x0: &[f64],
    duration: f64,
    cfg: &IntegratorConfig,
    sample_interval: f64,
) -> Result<LiftedTrajectory> {
    integrate_from(net, 0.0, x0, duration, cfg, sample_interval)
}

/// Tangent norms recorded at checkpoints, without renormalization.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TangentHistory {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub final_tangent: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Co-integrates `x' = f(x)` and `v' = J(x) v`, recording the base trajectory
/// and `|v|` every `checkpoint_interval`.
pub fn integrate_augmented(
    net: &NetworkSpec,
    x0: &[f64],
    v0: &[f64],
    duration: f64,
    cfg: &IntegratorConfig,
    checkpoint_interval: f64,
) -> Result<(LiftedTrajectory, TangentHistory)> {
    let d = net.dim();
    if x0.len() != d || v0.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: if x0.len() != d { x0.len() } else { v0.len() },
        });
    }
    if !(norm(v0) > 0.0) {
        return Err(Error::param("initial tangent vector must be nonzero"));
    }
    let sys = TangentSystem { net };
    let mut y0 = x0.to_vec();
    y0.extend_from_slice(v0);
    let mut traj = LiftedTrajectory::new(d);
    let mut hist = TangentHistory::default();
    let mut rates = vec![0.0; d];
    let stepper = integrate_sampled(&sys, 0.0, &y0, duration, cfg, checkpoint_interval, |t, y| {
        let (x, v) = y.split_at(d);
        net.rates_into(t, x, &mut rates);
        traj.push(t, x, &rates);
        hist.times.push(t);
        hist.norms.push(norm(v));
    })?;
    hist.final_tangent = stepper.y()[d..].to_vec();
    traj.meta = TrajectoryMeta {
        integrator: cfg.clone(),
        network_hash: net.content_hash(),
        seed: None,
        stats: stepper.stats(),
    };
    Ok((traj, hist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::CouplingSpec;

    #[test]
    fn exponential_decay_is_accurate() {
        let sys = FnSystem {
            dim: 1,
            f: |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0],
        };
        let cfg = IntegratorConfig::with_tolerances(1e-10, 1e-12);
        let mut last = 0.0;
        integrate_sampled(&sys, 0.0, &[1.0], 5.0, &cfg, 0.5, |t, y| {
            assert!((y[0] - (-t).exp()).abs() < 1e-9, "t={t}");
            last = t;
        })
        .unwrap();
        assert_eq!(last, 5.0);
    }

    #[test]
    fn dense_output_matches_exact_solution_between_steps() {
        let sys = FnSystem {
            dim: 2,
            f: |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
        };
        let cfg = IntegratorConfig::with_tolerances(1e-10, 1e-12);
        integrate_sampled(&sys, 0.0, &[0.0, 1.0], 10.0, &cfg, 0.0137, |t, y| {
            assert!((y[0] - t.sin()).abs() < 1e-8);
            assert!((y[1] - t.cos()).abs() < 1e-8);
        })
        .unwrap();
    }

    #[test]
    fn sample_grid_includes_endpoint() {
        let v: Vec<f64> = sample_times(0.0, 1.0, 0.25).collect();
        assert_eq!(v, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let v: Vec<f64> = sample_times(0.0, 1.1, 0.5).collect();
        assert_eq!(v, vec![0.0, 0.5, 1.0, 1.1]);
    }

    #[test]
    fn max_steps_guard() {
        let net = NetworkSpec::single(3, 1.0, CouplingSpec::gchaos(0.1, 0.05)).unwrap();
        let cfg = IntegratorConfig {
            max_steps: 5,
            ..Default::default()
        };
        let err = integrate(&net, &[0.0, 1.0, 2.0], 100.0, &cfg, 1.0).unwrap_err();
        assert!(matches!(err, Error::MaxSteps { max_steps: 5, .. }));
        assert!(err.is_numeric());
    }

    #[test]
    fn blowup_reports_non_finite_or_step_failure() {
        let sys = FnSystem {
            dim: 1,
            f: |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0],
        };
        let err = integrate_sampled(&sys, 0.0, &[1.0], 2.0, &IntegratorConfig::default(), 0.1, |_, _| {})
            .err()
            .expect("blow-up must fail");
        assert!(err.is_numeric(), "{err}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let net = NetworkSpec::single(2, 0.0, CouplingSpec::zero()).unwrap();
        let cfg = IntegratorConfig::default();
        assert!(integrate(&net, &[0.0, 0.0], -1.0, &cfg, 0.1).is_err());
        assert!(integrate(&net, &[0.0, 0.0], 1.0, &cfg, 0.0).is_err());
        assert!(integrate(&net, &[0.0], 1.0, &cfg, 0.1).is_err());
        assert!(integrate(&net, &[f64::NAN, 0.0], 1.0, &cfg, 0.1).is_err());
        let bad = IntegratorConfig::with_tolerances(0.0, 1e-9);
        assert!(integrate(&net, &[0.0, 0.0], 1.0, &bad, 0.1).is_err());
        assert!(integrate_augmented(&net, &[0.0, 0.0], &[0.0, 0.0], 1.0, &cfg, 0.1).is_err());
    }

    #[test]
    fn rescaling_tangent_block_is_exact() {
        let net = NetworkSpec::single(3, 0.0, CouplingSpec::gchaos(0.1, 0.05)).unwrap();
        let sys = TangentSystem { net: &net };
        let y0 = [0.0, 1.0, 2.5, 0.3, -0.2, 0.5];
        let cfg = IntegratorConfig {
            initial_step: Some(1e-3),
            ..Default::default()
        };
        let mut half = y0;
        for v in &mut half[3..] {
            *v *= 0.5;
        }
        let mut a = Dopri5::new(&sys, 0.0, &y0, &cfg).unwrap();
        let mut b = Dopri5::new(&sys, 0.0, &half, &cfg).unwrap();
        a.rescale_linear_block(3..6, 0.5);
        for _ in 0..50 {
            a.step(10.0).unwrap();
            b.step(10.0).unwrap();
        }
        assert_eq!(a.y(), b.y());
    }

    #[test]
    fn angles_stay_reduced_while_lifted_phases_grow() {
        let net = NetworkSpec::single(2, 7.0, CouplingSpec::zero()).unwrap();
        // a constant field would otherwise take a single step of the whole span
        let cfg = IntegratorConfig {
            max_step: Some(0.5),
            ..Default::default()
        };
        let mut s = Dopri5::new(&net, 0.0, &[0.0, 1e-14], &cfg).unwrap();
        while s.t() < 1000.0 {
            s.step(1000.0).unwrap();
            assert!(s.y.iter().all(|v| v.abs() <= std::f64::consts::TAU));
        }
        assert!((s.y()[0] - 7000.0).abs() < 1e-8);
        // the offset is far below the spacing of floats near 7000
        assert!((s.y[1] - s.y[0] - 1e-14).abs() < 5e-15);
        let mut mid = [0.0; 2];
        s.interpolate(0.5 * (s.t_prev() + s.t()), &mut mid);
        assert!((mid[0] - 3.5 * (s.t_prev() + s.t())).abs() < 1e-8);
    }
}
