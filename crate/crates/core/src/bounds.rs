//! Sample-based estimators for absorbing regions, admissible coupling
//! strengths and frequency separation.
//!
//! Every quantity here is an inf/sup replaced by a min/max over samples, so a
//! passing check is numerical evidence, not a proof.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::reduce_phase;
use crate::error::{Error, Result};
use crate::network::NetworkSpec;
use crate::observables::FrequencyInterval;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Boundary samples must satisfy `|W| <= BOUNDARY_TOL`.
pub const BOUNDARY_TOL: f64 = 1e-8;
/// Bisection keeps halving until `|W| <= BISECTION_TOL` (after a minimum number of steps).
pub const BISECTION_TOL: f64 = 1e-10;
pub const MIN_BISECTION_STEPS: usize = 20;
const MAX_BISECTION_STEPS: usize = 200;

const CAVEAT: &str = "sample-based estimate; not a rigorous enclosure";

/// Autonomous vector field evaluated at sample points.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]);
}

/// Networks are evaluated at `t = 0`.
impl VectorField for NetworkSpec {
    fn dim(&self) -> usize {
        NetworkSpec::dim(self)
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.rates_into(0.0, x, out)
    }
}

pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Region `R = {W <= 0}` with boundary samples and an interior cloud.
#[derive(Clone)]
pub struct RegionSpec {
    pub dim: usize,
    pub w: ScalarFn,
    pub grad: GradientFn,
    pub boundary: Vec<Vec<f64>>,
    pub cloud: Vec<Vec<f64>>,
}

impl std::fmt::Debug for RegionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RegionSpec")
            .field("dim", &self.dim)
            .field("boundary", &self.boundary.len())
            .field("cloud", &self.cloud.len())
            .finish()
    }
}

impl RegionSpec {
    pub fn new(dim: usize, w: ScalarFn, grad: GradientFn) -> Self {
        RegionSpec {
            dim,
            w,
            grad,
            boundary: Vec::new(),
            cloud: Vec::new(),
        }
    }

    pub fn with_boundary(mut self, pts: Vec<Vec<f64>>) -> Self {
        self.boundary = pts;
        self
    }

    pub fn with_cloud(mut self, pts: Vec<Vec<f64>>) -> Self {
        self.cloud = pts;
        self
    }

    /// Checks sample dimensions, `|W| <= 1e-8` on the boundary, `W <= 0` on the
    /// cloud and the gradient against central differences (`1e-5`).
    pub fn validate(&self) -> Result<()> {
        for p in self.boundary.iter().chain(&self.cloud) {
            if p.len() != self.dim {
                return Err(Error::Dimension {
                    expected: self.dim,
                    got: p.len(),
                });
            }
        }
        for (i, p) in self.boundary.iter().enumerate() {
            let w = (self.w)(p);
            if !(w.abs() <= BOUNDARY_TOL) {
                return Err(Error::param(format!("boundary sample {i} has W = {w:e}")));
            }
            let g = (self.grad)(p);
            if g.len() != self.dim {
                return Err(Error::Dimension {
                    expected: self.dim,
                    got: g.len(),
                });
            }
            let fd = fd_gradient(&*self.w, p, 1e-6);
            for (k, (a, b)) in g.iter().zip(&fd).enumerate() {
                if (a - b).abs() > 1e-5 * a.abs().max(1.0) {
                    return Err(Error::param(format!(
                        "gradient component {k} at boundary sample {i} is {a}, finite differences give {b}"
                    )));
                }
            }
        }
        if let Some(i) = self.cloud.iter().position(|p| !((self.w)(p) <= BOUNDARY_TOL)) {
            return Err(Error::param(format!("cloud sample {i} lies outside the region")));
        }
        Ok(())
    }

    fn max_gradient_norm(&self) -> f64 {
        self.boundary
            .iter()
            .map(|p| norm(&(self.grad)(p)))
            .fold(0.0, f64::max)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn fd_gradient(w: &(dyn Fn(&[f64]) -> f64 + Send + Sync), x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|k| {
            y[k] = x[k] + h;
            let up = w(&y);
            y[k] = x[k] - h;
            let dn = w(&y);
            y[k] = x[k];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// Moves along the segment from `inside` (`W < 0`) to `outside` (`W > 0`)
/// onto `W = 0`: at least 20 halvings, then on until `|W| <= 1e-10`.
pub fn bisect_boundary(w: &dyn Fn(&[f64]) -> f64, inside: &[f64], outside: &[f64]) -> Option<Vec<f64>> {
    if !(w(inside) < 0.0 && w(outside) > 0.0) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let at = |s: f64| -> Vec<f64> { inside.iter().zip(outside).map(|(a, b)| a + s * (b - a)).collect() };
    for step in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let p = at(mid);
        let v = w(&p);
        if step + 1 >= MIN_BISECTION_STEPS && v.abs() <= BISECTION_TOL {
            return Some(p);
        }
        if v > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let p = at(0.5 * (lo + hi));
    (w(&p).abs() <= BOUNDARY_TOL).then_some(p)
}

/// Draws `count` uniform points in the box `[lo, hi]^dim`; exterior draws are
/// bisected towards `center` onto the boundary and interior draws join the
/// cloud. Suitable for regions star-shaped about `center`.
pub fn sample_region<R: Rng>(
    region: RegionSpec,
    center: &[f64],
    lo: f64,
    hi: f64,
    count: usize,
    rng: &mut R,
) -> Result<RegionSpec> {
    if center.len() != region.dim {
        return Err(Error::Dimension {
            expected: region.dim,
            got: center.len(),
        });
    }
    if !((region.w)(center) < 0.0) {
        return Err(Error::param("sampling center must be interior (W < 0)"));
    }
    if !(lo < hi) {
        return Err(Error::param("empty sampling box"));
    }
    let mut out = region;
    for _ in 0..count {
        let x: Vec<f64> = (0..out.dim).map(|_| rng.random_range(lo..hi)).collect();
        let v = (out.w)(&x);
        if v > 0.0 {
            if let Some(b) = bisect_boundary(&*out.w, center, &x) {
                out.boundary.push(b);
            }
        } else {
            out.cloud.push(x);
        }
    }
    Ok(out)
}

/// Tube of radius `radius` about the diagonal of population `population`,
/// in phase-difference coordinates `d_k = reduce(phi_k - phi_0)`:
/// `W = sum_k d_k^2 - radius^2`. Other oscillators are unconstrained.
pub fn sync_ball(net: &NetworkSpec, population: usize, radius: f64) -> Result<RegionSpec> {
    if population >= net.population_count() {
        return Err(Error::Index {
            index: population,
            len: net.population_count(),
        });
    }
    if !(radius > 0.0 && radius < std::f64::consts::PI) {
        return Err(Error::param(format!("radius must be in (0, π), got {radius}")));
    }
    let range = net.population_range(population);
    if range.len() < 2 {
        return Err(Error::param("sync ball needs a population of at least 2"));
    }
    let dim = net.dim();
    let r2 = radius * radius;
    let (a, b) = (range.start, range.end);
    let w: ScalarFn = Arc::new(move |x: &[f64]| {
        (a + 1..b).map(|k| reduce_phase(x[k] - x[a]).powi(2)).sum::<f64>() - r2
    });
    let grad: GradientFn = Arc::new(move |x: &[f64]| {
        let mut g = vec![0.0; dim];
        for k in a + 1..b {
            let d = 2.0 * reduce_phase(x[k] - x[a]);
            g[k] = d;
            g[a] -= d;
        }
        g
    });
    Ok(RegionSpec::new(dim, w, grad))
}

/// Populates a [`sync_ball`] with `count` boundary points and `count` interior
/// points. Boundary points have exact radius; the remaining oscillators are
/// drawn uniformly unless `others` supplies a point to take them from.
pub fn sample_sync_ball<R: Rng>(
    net: &NetworkSpec,
    population: usize,
    radius: f64,
    count: usize,
    others: Option<&[f64]>,
    rng: &mut R,
) -> Result<RegionSpec> {
    let region = sync_ball(net, population, radius)?;
    let range = net.population_range(population);
    let dim = net.dim();
    if let Some(o) = others {
        if o.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: o.len(),
            });
        }
    }
    let k = range.len() - 1;
    let draw = |scale: f64, rng: &mut R| -> Vec<f64> {
        let mut x: Vec<f64> = match others {
            Some(o) => o.to_vec(),
            None => (0..dim).map(|_| rng.random_range(0.0..TAU)).collect(),
        };
        let u: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let un = norm(&u);
        let base = x[range.start];
        for (i, ui) in u.iter().enumerate() {
            x[range.start + 1 + i] = base + scale * ui / un;
        }
        x
    };
    let mut boundary = Vec::with_capacity(count);
    let mut cloud = Vec::with_capacity(count);
    for _ in 0..count {
        boundary.push(draw(radius, rng));
        let s = radius * rng.random::<f64>().powf(1.0 / k as f64);
        cloud.push(draw(s, rng));
    }
    // rounding in the difference coordinates can leave |W| slightly off zero
    let w = region.w.clone();
    let boundary = boundary
        .into_iter()
        .map(|x| {
            if w(&x).abs() <= BISECTION_TOL {
                x
            } else {
                let mut inside = x.clone();
                inside[range.start + 1..range.end].iter_mut().for_each(|p| *p = x[range.start]);
                let mut outside = x.clone();
                for p in outside[range.start + 1..range.end].iter_mut() {
                    *p = x[range.start] + 1.5 * (*p - x[range.start]);
                }
                bisect_boundary(&*w, &inside, &outside).unwrap_or(x)
            }
        })
        .collect();
    Ok(region.with_boundary(boundary).with_cloud(cloud))
}

/// `[min, max]` of the `k`-th component of the vector field over the cloud.
pub fn nk_interval(field: &dyn VectorField, samples: &[Vec<f64>], k: usize) -> Result<FrequencyInterval> {
    if samples.is_empty() {
        return Err(Error::param("empty sample cloud"));
    }
    let d = field.dim();
    if k >= d {
        return Err(Error::Index { index: k, len: d });
    }
    let mut out = vec![0.0; d];
    let vals = samples.iter().map(|x| {
        field.eval(x, &mut out);
        out[k]
    });
    Ok(FrequencyInterval::hull(vals.collect::<Vec<_>>()).expect("nonempty"))
}

/// `N_k` for every oscillator over the same cloud.
pub fn nk_intervals(field: &dyn VectorField, samples: &[Vec<f64>]) -> Result<Vec<FrequencyInterval>> {
    if samples.is_empty() {
        return Err(Error::param("empty sample cloud"));
    }
    let d = field.dim();
    let mut acc: Vec<FrequencyInterval> = Vec::new();
    let mut out = vec![0.0; d];
    for x in samples {
        if x.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: x.len(),
            });
        }
        field.eval(x, &mut out);
        if acc.is_empty() {
            acc = out.iter().map(|&v| FrequencyInterval::point(v)).collect();
        } else {
            for (iv, &v) in acc.iter_mut().zip(&out) {
                iv.lower = iv.lower.min(v);
                iv.upper = iv.upper.max(v);
            }
        }
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingMargin {
    /// `-max W'(x) . f(x)` over the boundary samples.
    pub xi: f64,
    pub absorbing: bool,
    pub samples: usize,
}

/// Margin by which the field crosses the sampled boundary inward.
pub fn absorbing_margin(region: &RegionSpec, field: &dyn VectorField) -> Result<AbsorbingMargin> {
    if region.boundary.is_empty() {
        return Err(Error::param("region has no boundary samples"));
    }
    if field.dim() != region.dim {
        return Err(Error::Dimension {
            expected: region.dim,
            got: field.dim(),
        });
    }
    let mut f = vec![0.0; region.dim];
    let mut worst = f64::NEG_INFINITY;
    for x in &region.boundary {
        field.eval(x, &mut f);
        let g = (region.grad)(x);
        let dot: f64 = g.iter().zip(&f).map(|(a, b)| a * b).sum();
        worst = worst.max(dot);
    }
    let xi = -worst;
    Ok(AbsorbingMargin {
        xi,
        absorbing: xi > 0.0,
        samples: region.boundary.len(),
    })
}

/// `eps0 = xi / (M max |W'|)` and `eta = eps0 M`.
pub fn admissible_epsilon(xi: f64, m: f64, region: &RegionSpec) -> Result<(f64, f64)> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::param(format!("margin must be positive, got {xi}")));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::param(format!("perturbation bound must be positive, got {m}")));
    }
    if region.boundary.is_empty() {
        return Err(Error::param("region has no boundary samples"));
    }
    let gmax = region.max_gradient_norm();
    if !(gmax > 0.0 && gmax.is_finite()) {
        return Err(Error::param("gradient vanishes on every boundary sample"));
    }
    let eps0 = xi / (m * gmax);
    Ok((eps0, eps0 * m))
}

/// True iff `g0` lies farther than `2 eta` from every interval.
pub fn separation_certificate(g0: f64, n: &[FrequencyInterval], eta: f64) -> bool {
    let d = n.iter().map(|iv| iv.distance_to_point(g0)).fold(f64::INFINITY, f64::min);
    d > 2.0 * eta
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub xi: f64,
    pub absorbing: bool,
    pub m: f64,
    pub max_gradient_norm: f64,
    pub epsilon0: Option<f64>,
    pub eta: Option<f64>,
    pub nk: Vec<FrequencyInterval>,
    pub boundary_samples: usize,
    pub cloud_samples: usize,
    pub caveat: String,
}

/// Evaluates the full chain `xi -> (eps0, eta)` and the `N_k` boxes over the
/// cloud. `eps0` and `eta` are absent when the absorbing test fails.
pub fn bound_report(region: &RegionSpec, field: &dyn VectorField, m: f64) -> Result<BoundReport> {
    let margin = absorbing_margin(region, field)?;
    let (epsilon0, eta) = if margin.absorbing {
        let (e, h) = admissible_epsilon(margin.xi, m, region)?;
        (Some(e), Some(h))
    } else {
        (None, None)
    };
    let nk = if region.cloud.is_empty() {
        Vec::new()
    } else {
        nk_intervals(field, &region.cloud)?
    };
    Ok(BoundReport {
        xi: margin.xi,
        absorbing: margin.absorbing,
        m,
        max_gradient_norm: region.max_gradient_norm(),
        epsilon0,
        eta,
        nk,
        boundary_samples: region.boundary.len(),
        cloud_samples: region.cloud.len(),
        caveat: CAVEAT.into(),
    })
}
