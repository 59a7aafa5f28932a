//! Experiment configs, figure presets and the artifact-writing runner behind
//! the `chimera` binary.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{bound_report, sample_sync_ball};
use crate::coupling::{reduce_phase, BumpReading, CouplingSpec, SADDLE_ETA};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig, LiftedTrajectory};
use crate::lyapunov::{
    lyapunov_sweep, max_lyapunov_with_trajectory, sample_canonical, sample_sync_cross, write_convergence_csv,
    write_sweep_csv, IcPolicy, LyapunovConfig, SweepOptions,
};
use crate::network::NetworkSpec;
use crate::observables::{
    classify_weak_chimera, first_drop_below, first_sustained_exceedance, frequency_report, order_parameter,
    ChimeraVerdict, FrequencyReport, DEFAULT_SEP_MARGIN, DEFAULT_SYNC_TOL,
};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "CHIMERA_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Absent only for `figure` jobs, which bring their own network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSpec>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub seed: u64,
    pub job: Job,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Job {
    Simulate(SimulateJob),
    Lyapunov(LyapunovJob),
    Sweep(SweepJob),
    Classify(ClassifyJob),
    Bounds(BoundsJob),
    Figure { preset: FigurePreset },
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Simulate(_) => "simulate",
            Job::Lyapunov(_) => "lyapunov",
            Job::Sweep(_) => "sweep",
            Job::Classify(_) => "classify",
            Job::Bounds(_) => "bounds",
            Job::Figure { .. } => "figure",
        }
    }
}

/// How the initial phases are chosen. Random draws use the experiment seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Explicit { x0: Vec<f64> },
    /// Uniform on `Δ_n × T^n`: population 1 synchronized, the rest independent.
    SyncCross,
    /// Every population sorted into the canonical order.
    Canonical,
    /// Population 1 synchronized then spread by `perturbation`; the other
    /// populations are first run uncoupled for `warmup` time units so they
    /// start on their attractor.
    NearSync {
        perturbation: f64,
        #[serde(default)]
        warmup: f64,
    },
    /// Runs the full network from `from` for `duration` (at `epsilon` if
    /// given) and starts from the final state.
    Settled {
        from: Box<InitialCondition>,
        duration: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
    },
}

impl InitialCondition {
    pub fn resolve(&self, net: &NetworkSpec, icfg: &IntegratorConfig, seed: u64) -> Result<Vec<f64>> {
        let d = net.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            InitialCondition::Explicit { x0 } => {
                if x0.len() != d {
                    return Err(Error::Config(format!(
                        "initial condition has {} phases, network has {d}",
                        x0.len()
                    )));
                }
                if x0.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Config("initial phases must be finite".into()));
                }
                Ok(x0.clone())
            }
            InitialCondition::SyncCross => Ok(sample_sync_cross(net, &mut rng)),
            InitialCondition::Canonical => Ok((0..net.population_count())
                .flat_map(|l| sample_canonical(net.population_range(l).len(), &mut rng))
                .collect()),
            InitialCondition::NearSync { perturbation, warmup } => {
                if !(perturbation.is_finite() && *warmup >= 0.0 && warmup.is_finite()) {
                    return Err(Error::Config("near-sync perturbation and warmup must be finite, warmup >= 0".into()));
                }
                let mut x = sample_sync_cross(net, &mut rng);
                for l in 1..net.population_count() {
                    let r = net.population_range(l);
                    let mut part = sample_canonical(r.len(), &mut rng);
                    if *warmup > 0.0 {
                        let pop = &net.populations()[l];
                        let single = NetworkSpec::single(pop.n, pop.omega, pop.coupling.clone())?;
                        let tr = integrate(&single, &part, *warmup, icfg, *warmup)?;
                        part = tr.last_phases().expect("nonempty").to_vec();
                    }
                    x[r].copy_from_slice(&part);
                }
                let r0 = net.population_range(0);
                let n = r0.len();
                if n > 1 {
                    for (i, k) in r0.enumerate() {
                        x[k] += perturbation * (2.0 * i as f64 / (n - 1) as f64 - 1.0);
                    }
                }
                Ok(x)
            }
            InitialCondition::Settled { from, duration, epsilon } => {
                if !(*duration > 0.0 && duration.is_finite()) {
                    return Err(Error::Config("settling duration must be positive".into()));
                }
                let x = from.resolve(net, icfg, seed)?;
                let settle_net = match epsilon {
                    Some(e) => net.with_epsilon(*e).map_err(config_err)?,
                    None => net.clone(),
                };
                let tr = integrate(&settle_net, &x, *duration, icfg, *duration)?;
                Ok(tr.last_phases().expect("nonempty").to_vec())
            }
        }
    }
}

/// Escape from the synchronized population, read off one order parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EscapeDetector {
    /// First time `R_population` drops below `threshold`.
    DropBelow { population: usize, threshold: f64 },
    /// First time `R_population` stays above `threshold` for `hold` time units.
    SustainedAbove { population: usize, threshold: f64, hold: f64 },
}

impl Default for EscapeDetector {
    fn default() -> Self {
        EscapeDetector::DropBelow {
            population: 0,
            threshold: 1.0 - 1e-4,
        }
    }
}

impl EscapeDetector {
    fn population(&self) -> usize {
        match self {
            EscapeDetector::DropBelow { population, .. } | EscapeDetector::SustainedAbove { population, .. } => {
                *population
            }
        }
    }

    pub fn detect(&self, times: &[f64], order: &[Vec<f64>]) -> Option<f64> {
        let series = order.get(self.population())?;
        match self {
            EscapeDetector::DropBelow { threshold, .. } => first_drop_below(times, series, *threshold),
            EscapeDetector::SustainedAbove { threshold, hold, .. } => {
                first_sustained_exceedance(times, series, *threshold, *hold)
            }
        }
    }
}

fn default_sample_interval() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateJob {
    pub duration: f64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    pub initial: InitialCondition,
    /// Oscillator whose lifted phase defines the co-rotating frame.
    #[serde(default)]
    pub frame_reference: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escape: Option<EscapeDetector>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrequencyOptions {
    pub burn_in: f64,
    pub n_windows: usize,
    pub sync_tol: f64,
    pub sep_margin: f64,
}

impl Default for FrequencyOptions {
    fn default() -> Self {
        FrequencyOptions {
            burn_in: 500.0,
            n_windows: 10,
            sync_tol: DEFAULT_SYNC_TOL,
            sep_margin: DEFAULT_SEP_MARGIN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovJob {
    pub initial: InitialCondition,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    /// Trajectory sampling; also used for the frequency report.
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    #[serde(default)]
    pub frame_reference: usize,
    #[serde(default)]
    pub frequency: FrequencyOptions,
    /// Write trajectory, order-parameter and frame CSVs as well.
    #[serde(default)]
    pub write_trajectory: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepPolicy {
    RandomOnSyncCross,
    Adiabatic,
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepJob {
    pub eps_grid: Vec<f64>,
    pub policy: SweepPolicy,
    /// Starting point for `fixed` and `adiabatic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialCondition>,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    #[serde(default)]
    pub options: SweepOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyJob {
    pub initial: InitialCondition,
    pub duration: f64,
    /// Number of trajectories, seeded `seed, seed + 1, ..`.
    #[serde(default = "one")]
    pub ensemble: usize,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    #[serde(default)]
    pub frequency: FrequencyOptions,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuiltinRegion {
    /// Ball of the given radius about the diagonal of one population, in
    /// phase-difference coordinates.
    SyncBall { population: usize, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsJob {
    pub region: BuiltinRegion,
    #[serde(default = "default_bound_samples")]
    pub samples: usize,
    /// Perturbation bound; defaults to the network's inter-population bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
}

fn default_bound_samples() -> usize {
    10_000
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigurePreset {
    Fig1,
    Fig2,
    Fig3a,
    Fig3b,
    Fig4a,
    Fig4b,
}

impl std::str::FromStr for FigurePreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
            .map_err(|_| Error::Config(format!("unknown figure preset '{s}'")))
    }
}

impl FigurePreset {
    pub const ALL: [FigurePreset; 6] = [
        FigurePreset::Fig1,
        FigurePreset::Fig2,
        FigurePreset::Fig3a,
        FigurePreset::Fig3b,
        FigurePreset::Fig4a,
        FigurePreset::Fig4b,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            FigurePreset::Fig1 => "fig1",
            FigurePreset::Fig2 => "fig2",
            FigurePreset::Fig3a => "fig3a",
            FigurePreset::Fig3b => "fig3b",
            FigurePreset::Fig4a => "fig4a",
            FigurePreset::Fig4b => "fig4b",
        }
    }

    pub fn network(&self) -> NetworkSpec {
        let (e1, e2) = SADDLE_ETA;
        let (n, g, eps) = match self {
            FigurePreset::Fig1 => (4, CouplingSpec::gchaos(e1, e2), 0.2),
            FigurePreset::Fig2 => (4, CouplingSpec::gchaos(e1, e2), 0.0),
            FigurePreset::Fig3a => (4, CouplingSpec::ghat(e1, e2, BumpReading::Calibrated), 0.2),
            FigurePreset::Fig3b => (7, CouplingSpec::ghat(e1, e2, BumpReading::Calibrated), 0.2),
            FigurePreset::Fig4a | FigurePreset::Fig4b => (4, CouplingSpec::table1(), 0.1),
        };
        NetworkSpec::product(2, n, 0.0, g, eps).expect("preset network is valid")
    }

    /// Fully resolved experiment for this figure.
    pub fn config(&self, seed: u64) -> ExperimentConfig {
        // Population 2 is warmed up only where sync is unstable on its own;
        // with an attracting diagonal the warmup can land it there.
        let near_sync = |p: f64, warmup: f64| InitialCondition::NearSync {
            perturbation: p,
            warmup,
        };
        let lyap_job = || {
            Job::Lyapunov(LyapunovJob {
                initial: near_sync(1e-3, 0.0),
                lyapunov: LyapunovConfig::default(),
                sample_interval: 0.5,
                frame_reference: 0,
                frequency: FrequencyOptions::default(),
                write_trajectory: true,
            })
        };
        let job = match self {
            FigurePreset::Fig1 => Job::Simulate(SimulateJob {
                duration: 300.0,
                sample_interval: 0.05,
                initial: near_sync(1e-6, 500.0),
                frame_reference: 0,
                escape: Some(EscapeDetector::default()),
            }),
            FigurePreset::Fig2 => Job::Sweep(SweepJob {
                eps_grid: (0..=12).map(|i| i as f64 * 0.025).collect(),
                policy: SweepPolicy::RandomOnSyncCross,
                initial: None,
                lyapunov: LyapunovConfig::default(),
                options: SweepOptions::default(),
            }),
            FigurePreset::Fig3a | FigurePreset::Fig3b | FigurePreset::Fig4a => lyap_job(),
            FigurePreset::Fig4b => Job::Sweep(SweepJob {
                eps_grid: (0..=10).map(|i| i as f64 * 0.02).collect(),
                policy: SweepPolicy::Fixed,
                initial: Some(InitialCondition::Settled {
                    from: Box::new(near_sync(1e-3, 0.0)),
                    duration: 1000.0,
                    epsilon: None,
                }),
                lyapunov: LyapunovConfig::default(),
                options: SweepOptions::default(),
            }),
        };
        ExperimentConfig {
            network: Some(self.network()),
            integrator: IntegratorConfig::default(),
            seed,
            job,
            output_dir: None,
        }
    }
}

/// Command-line overrides applied on top of a config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub eps: Option<f64>,
    pub duration: Option<f64>,
    pub workers: Option<usize>,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other if !other.is_numeric() => Error::Config(other.to_string()),
        other => other,
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("cannot parse config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Expands `figure` jobs and applies overrides.
    pub fn resolve(&self, ov: &Overrides) -> Result<ExperimentConfig> {
        let mut cfg = match &self.job {
            Job::Figure { preset } => {
                let mut c = preset.config(ov.seed.unwrap_or(self.seed));
                c.output_dir = self.output_dir.clone();
                c
            }
            _ => self.clone(),
        };
        if let Some(s) = ov.seed {
            cfg.seed = s;
        }
        let net = cfg
            .network
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{} job needs a network block", cfg.job.name())))?;
        if let Some(e) = ov.eps {
            match &mut cfg.job {
                Job::Sweep(s) => s.eps_grid = vec![e],
                _ => cfg.network = Some(net.with_epsilon(e).map_err(config_err)?),
            }
        }
        if let Some(t) = ov.duration {
            match &mut cfg.job {
                Job::Simulate(j) => j.duration = t,
                Job::Classify(j) => j.duration = t,
                Job::Lyapunov(j) => j.lyapunov.total_time = t,
                Job::Sweep(j) => j.lyapunov.total_time = t,
                Job::Bounds(_) | Job::Figure { .. } => {}
            }
        }
        if let (Job::Sweep(s), Some(w)) = (&mut cfg.job, ov.workers) {
            s.options.workers = w;
        }
        match &mut cfg.job {
            Job::Lyapunov(j) => j.lyapunov.seed = cfg.seed,
            Job::Sweep(j) => j.lyapunov.seed = cfg.seed,
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural checks that need no integration.
    pub fn validate(&self) -> Result<()> {
        let net = self
            .network
            .as_ref()
            .ok_or_else(|| Error::Config("missing network block".into()))?;
        self.integrator.validate().map_err(config_err)?;
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be positive, got {v}")))
            }
        };
        let freq = |f: &FrequencyOptions| -> Result<()> {
            if f.n_windows == 0 || !(f.burn_in >= 0.0) || !(f.sync_tol >= 0.0) || !(f.sep_margin >= 0.0) {
                return Err(Error::Config("invalid frequency options".into()));
            }
            Ok(())
        };
        let reference = |r: usize| {
            if r < net.dim() {
                Ok(())
            } else {
                Err(Error::Config(format!("frame reference {r} out of range")))
            }
        };
        match &self.job {
            Job::Simulate(j) => {
                positive(j.duration, "duration")?;
                positive(j.sample_interval, "sample interval")?;
                reference(j.frame_reference)?;
                if let Some(e) = &j.escape {
                    if e.population() >= net.population_count() {
                        return Err(Error::Config("escape detector population out of range".into()));
                    }
                }
            }
            Job::Lyapunov(j) => {
                j.lyapunov.validate().map_err(config_err)?;
                positive(j.sample_interval, "sample interval")?;
                reference(j.frame_reference)?;
                freq(&j.frequency)?;
            }
            Job::Sweep(j) => {
                j.lyapunov.validate().map_err(config_err)?;
                if j.eps_grid.is_empty() || j.eps_grid.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
                    return Err(Error::Config("eps grid must be nonempty with values >= 0".into()));
                }
                if j.policy == SweepPolicy::Fixed && j.initial.is_none() {
                    return Err(Error::Config("fixed policy needs an initial condition".into()));
                }
                positive(j.options.sample_interval, "sample interval")?;
                if j.options.n_windows == 0 {
                    return Err(Error::Config("need at least one window".into()));
                }
            }
            Job::Classify(j) => {
                positive(j.duration, "duration")?;
                positive(j.sample_interval, "sample interval")?;
                freq(&j.frequency)?;
                if j.ensemble == 0 {
                    return Err(Error::Config("ensemble must be nonempty".into()));
                }
                if net.dim() < 3 {
                    return Err(Error::Config("classification needs at least 3 oscillators".into()));
                }
            }
            Job::Bounds(j) => {
                let BuiltinRegion::SyncBall { population, radius } = j.region;
                if population >= net.population_count() || !(radius > 0.0 && radius < std::f64::consts::PI) {
                    return Err(Error::Config("invalid sync ball region".into()));
                }
                if j.samples == 0 {
                    return Err(Error::Config("need at least one sample".into()));
                }
                if let Some(m) = j.m {
                    positive(m, "perturbation bound")?;
                }
            }
            Job::Figure { .. } => return Err(Error::Config("figure job must be resolved first".into())),
        }
        Ok(())
    }
}

/// One output file and its content hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub job: String,
    pub seed: u64,
    pub config_sha256: String,
    pub complete: bool,
    pub files: Vec<ManifestEntry>,
}

/// Summary returned by [`run`].
#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    /// Set when a sweep finished with failed points (their rows are still written).
    pub failure: Option<Error>,
}

struct Artifacts {
    dir: PathBuf,
    files: BTreeMap<String, Vec<u8>>,
}

impl Artifacts {
    fn new(dir: &Path) -> Self {
        Artifacts {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.insert(name.to_string(), bytes);
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut s = serde_json::to_vec_pretty(value).expect("serializable");
        s.push(b'\n');
        self.add(name, s);
    }

    fn add_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    fn commit(self, cfg: &ExperimentConfig, complete: bool) -> Result<Manifest> {
        fs::create_dir_all(&self.dir)?;
        let mut entries = Vec::new();
        for (name, bytes) in &self.files {
            let mut f = BufWriter::new(fs::File::create(self.dir.join(name))?);
            f.write_all(bytes)?;
            f.flush()?;
            entries.push(ManifestEntry {
                path: name.clone(),
                sha256: hex::encode(Sha256::digest(bytes)),
                bytes: bytes.len() as u64,
            });
        }
        let config_bytes = self.files.get("config.json").expect("config is always written");
        let manifest = Manifest {
            job: cfg.job.name().to_string(),
            seed: cfg.seed,
            config_sha256: hex::encode(Sha256::digest(config_bytes)),
            complete,
            files: entries,
        };
        let mut m = serde_json::to_vec_pretty(&manifest).expect("serializable");
        m.push(b'\n');
        fs::write(self.dir.join("manifest.json"), m)?;
        Ok(manifest)
    }
}

/// Column label `phi_l_k` (1-based population and oscillator).
fn label(net: &NetworkSpec, i: usize) -> (usize, usize) {
    let l = (0..net.population_count())
        .find(|&l| net.population_range(l).contains(&i))
        .expect("index in range");
    (l + 1, i - net.population_range(l).start + 1)
}

/// `t, phi_1_1, .., dphi_1_1, ..` with lifted phases and instantaneous rates.
pub fn write_trajectory_csv<W: Write>(mut w: W, net: &NetworkSpec, traj: &LiftedTrajectory) -> Result<()> {
    let d = traj.dim;
    let mut head = vec!["t".to_string()];
    head.extend((0..d).map(|i| {
        let (l, k) = label(net, i);
        format!("phi_{l}_{k}")
    }));
    head.extend((0..d).map(|i| {
        let (l, k) = label(net, i);
        format!("dphi_{l}_{k}")
    }));
    writeln!(w, "{}", head.join(","))?;
    for i in 0..traj.len() {
        let mut row = vec![traj.times[i].to_string()];
        row.extend(traj.phases_at(i).iter().map(|v| v.to_string()));
        row.extend(traj.rates_at(i).iter().map(|v| v.to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// `t, R_1, .., R_m`.
pub fn write_order_csv<W: Write>(mut w: W, net: &NetworkSpec, traj: &LiftedTrajectory) -> Result<()> {
    let m = net.population_count();
    let head: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=m).map(|l| format!("R_{l}")))
        .collect();
    writeln!(w, "{}", head.join(","))?;
    for i in 0..traj.len() {
        let p = traj.phases_at(i);
        let mut row = vec![traj.times[i].to_string()];
        row.extend((0..m).map(|l| order_parameter(&p[net.population_range(l)]).to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// `t, phi_1_1_rel, ..`: phases minus the reference oscillator's lifted phase,
/// wrapped into `(-π, π]`.
pub fn write_frame_csv<W: Write>(mut w: W, net: &NetworkSpec, traj: &LiftedTrajectory, reference: usize) -> Result<()> {
    let d = traj.dim;
    let mut head = vec!["t".to_string()];
    head.extend((0..d).map(|i| {
        let (l, k) = label(net, i);
        format!("phi_{l}_{k}_rel")
    }));
    writeln!(w, "{}", head.join(","))?;
    for i in 0..traj.len() {
        let p = traj.phases_at(i);
        let r = p[reference];
        let mut row = vec![traj.times[i].to_string()];
        row.extend(p.iter().map(|v| reduce_phase(v - r).to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

fn trajectory_artifacts(art: &mut Artifacts, net: &NetworkSpec, traj: &LiftedTrajectory, reference: usize) -> Result<()> {
    art.add_with("trajectory.csv", |b| write_trajectory_csv(b, net, traj))?;
    art.add_json("trajectory.json", &traj.meta);
    art.add_with("order.csv", |b| write_order_csv(b, net, traj))?;
    art.add_with("frame.csv", |b| write_frame_csv(b, net, traj, reference))
}

#[derive(Serialize)]
struct SimulateSummary {
    escape_time: Option<f64>,
    detector: Option<EscapeDetector>,
    samples: usize,
    end_time: f64,
}

#[derive(Serialize)]
struct ClassifyOutput<'a> {
    report: &'a FrequencyReport,
    verdict: &'a ChimeraVerdict,
}

#[derive(Serialize)]
struct SweepRecord {
    eps: f64,
    seed: u64,
    lambda_max: Option<f64>,
    report: Option<FrequencyReport>,
    initial_state: Option<Vec<f64>>,
    final_state: Option<Vec<f64>>,
    error: Option<String>,
}

/// Runs a resolved config, writing every artifact plus `config.json` and
/// `manifest.json` into `out_dir`. Nothing is written when the config is
/// invalid or the run fails outright.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let net = cfg.network.as_ref().expect("validated");
    let icfg = &cfg.integrator;
    let mut art = Artifacts::new(out_dir);
    art.add("config.json", format!("{}\n", cfg.to_json()).into_bytes());
    let mut failure = None;
    match &cfg.job {
        Job::Simulate(j) => {
            let x0 = j.initial.resolve(net, icfg, cfg.seed).map_err(config_err)?;
            let mut traj = integrate(net, &x0, j.duration, icfg, j.sample_interval)?;
            traj.meta.seed = Some(cfg.seed);
            let ranges: Vec<_> = (0..net.population_count()).map(|l| net.population_range(l)).collect();
            let order = crate::observables::order_parameter_series(&traj, &ranges);
            let escape_time = j.escape.as_ref().and_then(|e| e.detect(&traj.times, &order));
            trajectory_artifacts(&mut art, net, &traj, j.frame_reference)?;
            art.add_json(
                "summary.json",
                &SimulateSummary {
                    escape_time,
                    detector: j.escape.clone(),
                    samples: traj.len(),
                    end_time: traj.end_time(),
                },
            );
        }
        Job::Lyapunov(j) => {
            let x0 = j.initial.resolve(net, icfg, cfg.seed).map_err(config_err)?;
            let run = max_lyapunov_with_trajectory(net, &x0, &j.lyapunov, icfg, j.sample_interval)?;
            art.add_json("lyapunov.json", &run.result);
            art.add_with("convergence.csv", |b| write_convergence_csv(b, &run.result))?;
            if let Ok(rep) = frequency_report(
                std::slice::from_ref(&run.trajectory),
                j.frequency.burn_in,
                j.frequency.n_windows,
            ) {
                if net.dim() >= 3 {
                    let verdict = classify_weak_chimera(&rep, j.frequency.sync_tol, j.frequency.sep_margin)?;
                    art.add_json(
                        "classification.json",
                        &ClassifyOutput {
                            report: &rep,
                            verdict: &verdict,
                        },
                    );
                }
            }
            if j.write_trajectory {
                trajectory_artifacts(&mut art, net, &run.trajectory, j.frame_reference)?;
            }
        }
        Job::Sweep(j) => {
            let policy = match j.policy {
                SweepPolicy::RandomOnSyncCross => IcPolicy::RandomOnSyncCross { seed: cfg.seed },
                SweepPolicy::Adiabatic => IcPolicy::Adiabatic {
                    seed: cfg.seed,
                    x0: match &j.initial {
                        Some(ic) => Some(ic.resolve(net, icfg, cfg.seed).map_err(config_err)?),
                        None => None,
                    },
                },
                SweepPolicy::Fixed => IcPolicy::Fixed {
                    x0: j
                        .initial
                        .as_ref()
                        .expect("validated")
                        .resolve(net, icfg, cfg.seed)
                        .map_err(config_err)?,
                },
            };
            let points = lyapunov_sweep(net, &j.eps_grid, &policy, &j.lyapunov, icfg, &j.options)?;
            art.add_with("sweep.csv", |b| write_sweep_csv(b, net, &points))?;
            let mut failed = Vec::new();
            let records: Vec<SweepRecord> = points
                .into_iter()
                .map(|p| match p.outcome {
                    Ok(d) => SweepRecord {
                        eps: p.eps,
                        seed: p.seed,
                        lambda_max: Some(d.lyapunov.lambda_max),
                        report: Some(d.report),
                        initial_state: Some(d.initial_state),
                        final_state: Some(d.final_state),
                        error: None,
                    },
                    Err(e) => {
                        failed.push(format!("eps = {}: {e}", p.eps));
                        if failure.is_none() {
                            failure = Some(e.clone_numeric());
                        }
                        SweepRecord {
                            eps: p.eps,
                            seed: p.seed,
                            lambda_max: None,
                            report: None,
                            initial_state: None,
                            final_state: None,
                            error: Some(e.to_string()),
                        }
                    }
                })
                .collect();
            art.add_json("sweep.json", &records);
            if !failed.is_empty() {
                art.add("FAILED", format!("{}\n", failed.join("\n")).into_bytes());
            }
        }
        Job::Classify(j) => {
            let mut ensemble = Vec::with_capacity(j.ensemble);
            for i in 0..j.ensemble {
                let s = cfg.seed.wrapping_add(i as u64);
                let x0 = j.initial.resolve(net, icfg, s).map_err(config_err)?;
                ensemble.push(integrate(net, &x0, j.duration, icfg, j.sample_interval)?);
            }
            let rep = frequency_report(&ensemble, j.frequency.burn_in, j.frequency.n_windows).map_err(config_err)?;
            let verdict = classify_weak_chimera(&rep, j.frequency.sync_tol, j.frequency.sep_margin)?;
            art.add_json("report.json", &rep);
            art.add_json("verdict.json", &verdict);
        }
        Job::Bounds(j) => {
            let BuiltinRegion::SyncBall { population, radius } = j.region;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let unperturbed = net.with_epsilon(0.0).map_err(config_err)?;
            let region = sample_sync_ball(&unperturbed, population, radius, j.samples, None, &mut rng)?;
            region.validate()?;
            let m = j.m.unwrap_or_else(|| net.perturbation_bound());
            if !(m > 0.0) {
                return Err(Error::Config(
                    "perturbation bound is zero; give m explicitly for a single population".into(),
                ));
            }
            let report = bound_report(&region, &unperturbed, m)?;
            art.add_json("bounds.json", &report);
        }
        Job::Figure { .. } => unreachable!("validated"),
    }
    let manifest = art.commit(cfg, failure.is_none())?;
    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        manifest,
        failure,
    })
}

impl Error {
    /// Numeric errors are plain data, so a copy can be kept after reporting.
    fn clone_numeric(&self) -> Error {
        match self {
            Error::MaxSteps { max_steps, t } => Error::MaxSteps {
                max_steps: *max_steps,
                t: *t,
            },
            Error::StepSize { t, h } => Error::StepSize { t: *t, h: *h },
            Error::NonFinite { t } => Error::NonFinite { t: *t },
            Error::TangentCollapse { t, norm } => Error::TangentCollapse { t: *t, norm: *norm },
            other => Error::Config(other.to_string()),
        }
    }
}

/// Process exit status for an error: 2 for bad input, 3 for numerical failure.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        3
    } else if matches!(e, Error::Io(_)) {
        1
    } else {
        2
    }
}
