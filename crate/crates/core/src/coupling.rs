//! Phase interaction functions.
//!
//! A [`CouplingSpec`] is a 2π-periodic function `g` built from a truncated
//! Fourier series plus any number of C∞ bump terms. Evaluation and the exact
//! derivative are closed form; nothing here is approximated numerically.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Phase shifts of the saddle-type chaotic coupling shown in the two-population
/// transient and sweep experiments.
pub const SADDLE_ETA: (f64, f64) = (0.1104, 0.057511);

/// Phase shifts for which a single population of four oscillators is chaotic.
pub const CHAOS_ETA: (f64, f64) = (0.11151, 0.05586);

/// Amplitudes c_1..c_4 of the four-harmonic chaotic coupling.
pub const CHAOS_AMPLITUDES: [f64; 4] = [-2.0, -2.0, -1.0, -0.88];

/// Cosine coefficients of the analytic eleven-term trigonometric polynomial,
/// in table order (printed row labels 0..=10).
pub const TABLE1_COS: [f64; 11] = [
    -0.48239, -0.48239, -0.23244, -0.20325, 0.01322, 0.01261, 0.01191, 0.01111, 0.01023, 0.00927,
    0.00823,
];

/// Sine coefficients matching [`TABLE1_COS`].
pub const TABLE1_SIN: [f64; 11] = [
    0.0538, -0.05766, 0.03754, 0.0313, -0.00626, -0.0074, -0.00849, -0.00951, -0.01045, -0.01131,
    -0.01209,
];

/// Zero-crossing guard for the bump exponent: `1 - x^2` below this evaluates to 0.
const BUMP_EDGE: f64 = 1e-12;

/// Reduces a phase into `(-π, π]`.
pub fn reduce_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Truncated Fourier series in one of two parameterizations. Index `r` of each
/// coefficient list is the harmonic number; index 0 is the constant term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum FourierSeries {
    /// `sum_r amplitudes[r] * cos(r*phi + shifts[r])`
    ShiftedCosine {
        amplitudes: Vec<f64>,
        shifts: Vec<f64>,
    },
    /// `sum_r cos[r] * cos(r*phi) + sin[r] * sin(r*phi)`
    SineCosine { cos: Vec<f64>, sin: Vec<f64> },
}

impl FourierSeries {
    pub fn zero() -> Self {
        FourierSeries::SineCosine {
            cos: vec![],
            sin: vec![],
        }
    }

    /// Coefficients in `a_r cos(r phi) + b_r sin(r phi)` form.
    fn to_cos_sin(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let (a, b) = match self {
            FourierSeries::ShiftedCosine { amplitudes, shifts } => {
                if amplitudes.len() != shifts.len() {
                    return Err(Error::param(format!(
                        "shifted-cosine series needs equal-length amplitudes and shifts ({} vs {})",
                        amplitudes.len(),
                        shifts.len()
                    )));
                }
                // c cos(r phi + xi) = c cos(xi) cos(r phi) - c sin(xi) sin(r phi)
                amplitudes
                    .iter()
                    .zip(shifts)
                    .map(|(&c, &xi)| (c * xi.cos(), -c * xi.sin()))
                    .unzip()
            }
            FourierSeries::SineCosine { cos, sin } => {
                let len = cos.len().max(sin.len());
                let mut a = cos.clone();
                let mut b = sin.clone();
                a.resize(len, 0.0);
                b.resize(len, 0.0);
                (a, b)
            }
        };
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::param("Fourier coefficients must be finite"));
        }
        Ok((a, b))
    }

    /// Sum of absolute values of all stored coefficients.
    pub fn coefficient_mass(&self) -> f64 {
        match self {
            FourierSeries::ShiftedCosine { amplitudes, .. } => {
                amplitudes.iter().map(|c| c.abs()).sum()
            }
            FourierSeries::SineCosine { cos, sin } => cos.iter().chain(sin).map(|c| c.abs()).sum(),
        }
    }
}

/// How the bump argument is formed from the reduced phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpArgument {
    /// `phi / width - offset`
    #[default]
    Scaled,
    /// `(phi - offset) / width`, the offset acting as a phase.
    Shifted,
}

/// `amplitude * beta(x)` with `beta(x) = exp(-1 / (1 - x^2))` on `|x| < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BumpRepr", into = "BumpRepr")]
pub struct BumpTerm {
    amplitude: f64,
    width: f64,
    offset: f64,
    argument: BumpArgument,
}

#[derive(Serialize, Deserialize)]
struct BumpRepr {
    amplitude: f64,
    width: f64,
    offset: f64,
    #[serde(default)]
    argument: BumpArgument,
}

impl TryFrom<BumpRepr> for BumpTerm {
    type Error = Error;
    fn try_from(r: BumpRepr) -> Result<Self> {
        BumpTerm::with_argument(r.amplitude, r.width, r.offset, r.argument)
    }
}

impl From<BumpTerm> for BumpRepr {
    fn from(b: BumpTerm) -> Self {
        BumpRepr {
            amplitude: b.amplitude,
            width: b.width,
            offset: b.offset,
            argument: b.argument,
        }
    }
}

/// Closed arc of phases `[lo, hi]`, expressed in reduced coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseArc {
    pub lo: f64,
    pub hi: f64,
}

impl BumpTerm {
    /// Bump with the `phi / width - offset` argument.
    pub fn new(amplitude: f64, width: f64, offset: f64) -> Result<Self> {
        Self::with_argument(amplitude, width, offset, BumpArgument::Scaled)
    }

    pub fn with_argument(
        amplitude: f64,
        width: f64,
        offset: f64,
        argument: BumpArgument,
    ) -> Result<Self> {
        if !(amplitude.is_finite() && offset.is_finite()) {
            return Err(Error::param("bump amplitude and offset must be finite"));
        }
        if !(width > 0.0 && width < PI) {
            return Err(Error::param(format!(
                "bump width must lie in (0, pi), got {width}"
            )));
        }
        Ok(BumpTerm {
            amplitude,
            width,
            offset,
            argument,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn argument(&self) -> BumpArgument {
        self.argument
    }

    #[inline]
    fn arg(&self, phi: f64) -> f64 {
        let p = reduce_phase(phi);
        match self.argument {
            BumpArgument::Scaled => p / self.width - self.offset,
            BumpArgument::Shifted => (p - self.offset) / self.width,
        }
    }

    pub fn eval(&self, phi: f64) -> f64 {
        self.eval_with_derivative(phi).0
    }

    pub fn derivative(&self, phi: f64) -> f64 {
        self.eval_with_derivative(phi).1
    }

    #[inline]
    pub fn eval_with_derivative(&self, phi: f64) -> (f64, f64) {
        if self.amplitude == 0.0 {
            return (0.0, 0.0);
        }
        let x = self.arg(phi);
        let s = 1.0 - x * x;
        if s < BUMP_EDGE {
            return (0.0, 0.0);
        }
        let v = self.amplitude * (-1.0 / s).exp();
        // d/dx exp(-1/(1-x^2)) = exp(...) * (-2x / (1-x^2)^2); dx/dphi = 1/width
        let d = v * (-2.0 * x / (s * s)) / self.width;
        (v, d)
    }

    /// Phase at which the bump attains its extremum `amplitude / e`.
    pub fn peak(&self) -> f64 {
        match self.argument {
            BumpArgument::Scaled => self.width * self.offset,
            BumpArgument::Shifted => self.offset,
        }
    }
}

/// Closed arc on which the bump may be nonzero, clipped to `[-π, π]`.
/// Zero-amplitude bumps, and bumps whose arc misses `(-π, π]`, have no support.
pub fn bump_support(term: &BumpTerm) -> Option<PhaseArc> {
    if term.amplitude == 0.0 {
        return None;
    }
    let (lo, hi) = match term.argument {
        BumpArgument::Scaled => (
            term.width * (term.offset - 1.0),
            term.width * (term.offset + 1.0),
        ),
        BumpArgument::Shifted => (term.offset - term.width, term.offset + term.width),
    };
    let lo = lo.max(-PI);
    let hi = hi.min(PI);
    (lo <= hi).then_some(PhaseArc { lo, hi })
}

/// A 2π-periodic coupling function: Fourier base plus bump terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CouplingInput", into = "CouplingRepr")]
pub struct CouplingSpec {
    base: FourierSeries,
    bumps: Vec<BumpTerm>,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CouplingRepr {
    base: FourierSeries,
    #[serde(default)]
    bumps: Vec<BumpTerm>,
}

fn saddle_eta1() -> f64 {
    SADDLE_ETA.0
}

fn saddle_eta2() -> f64 {
    SADDLE_ETA.1
}

/// Named presets accepted in configs; they are always written back inline.
#[derive(Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
enum PresetRepr {
    Gchaos {
        #[serde(default = "saddle_eta1")]
        eta1: f64,
        #[serde(default = "saddle_eta2")]
        eta2: f64,
    },
    Ghat {
        #[serde(default = "saddle_eta1")]
        eta1: f64,
        #[serde(default = "saddle_eta2")]
        eta2: f64,
        #[serde(default)]
        reading: BumpReading,
    },
    Table1 {
        #[serde(default)]
        indexing: TableIndexing,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CouplingInput {
    Preset(PresetRepr),
    Inline(CouplingRepr),
}

impl TryFrom<CouplingInput> for CouplingSpec {
    type Error = Error;
    fn try_from(r: CouplingInput) -> Result<Self> {
        match r {
            CouplingInput::Inline(r) => CouplingSpec::new(r.base, r.bumps),
            CouplingInput::Preset(PresetRepr::Gchaos { eta1, eta2 }) => Ok(CouplingSpec::gchaos(eta1, eta2)),
            CouplingInput::Preset(PresetRepr::Ghat { eta1, eta2, reading }) => {
                Ok(CouplingSpec::ghat(eta1, eta2, reading))
            }
            CouplingInput::Preset(PresetRepr::Table1 { indexing }) => Ok(CouplingSpec::table1_with(indexing)),
        }
    }
}

impl From<CouplingSpec> for CouplingRepr {
    fn from(c: CouplingSpec) -> Self {
        CouplingRepr {
            base: c.base,
            bumps: c.bumps,
        }
    }
}

/// How the eleven table rows map onto harmonics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableIndexing {
    /// Row `i` is harmonic `i + 1`, so the sum runs over r = 1..=11.
    #[default]
    Harmonics1To11,
    /// Row `i` is harmonic `i`; row 0 becomes a constant offset.
    AsPrinted,
}

/// Which reading of the bump parameters the `ghat` preset uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpReading {
    /// Bump `-beta((phi - c) / b)`. Reproduces ĝ(0) = -6.1332 and ĝ'(0) = -2.5782.
    #[default]
    Calibrated,
    /// Bump `+beta(phi / b - c)`, taking the parameters at face value.
    Literal,
}

impl CouplingSpec {
    pub fn new(base: FourierSeries, bumps: Vec<BumpTerm>) -> Result<Self> {
        let (cos, sin) = base.to_cos_sin()?;
        Ok(CouplingSpec {
            base,
            bumps,
            cos,
            sin,
        })
    }

    pub fn zero() -> Self {
        Self::new(FourierSeries::zero(), vec![]).expect("zero series is valid")
    }

    pub fn from_series(base: FourierSeries) -> Result<Self> {
        Self::new(base, vec![])
    }

    /// `sum_{r=1}^{4} c_r cos(r phi + xi_r)` with the chaotic amplitudes and
    /// shifts `(eta1, -eta1, eta1 + eta2, eta1 + eta2)`; the r = 0 term is zero.
    pub fn gchaos(eta1: f64, eta2: f64) -> Self {
        let [c1, c2, c3, c4] = CHAOS_AMPLITUDES;
        Self::from_series(FourierSeries::ShiftedCosine {
            amplitudes: vec![0.0, c1, c2, c3, c4],
            shifts: vec![0.0, eta1, -eta1, eta1 + eta2, eta1 + eta2],
        })
        .expect("finite coefficients")
    }

    /// [`gchaos`](Self::gchaos) plus the bump with a = 1, b = 0.1, c = 0.04
    /// under the given reading.
    pub fn ghat(eta1: f64, eta2: f64, reading: BumpReading) -> Self {
        let (a, arg) = match reading {
            BumpReading::Calibrated => (-1.0, BumpArgument::Shifted),
            BumpReading::Literal => (1.0, BumpArgument::Scaled),
        };
        let bump = BumpTerm::with_argument(a, 0.1, 0.04, arg).expect("valid bump");
        Self::gchaos(eta1, eta2).with_bump(bump)
    }

    /// The eleven-row analytic trigonometric polynomial over harmonics 1..=11.
    pub fn table1() -> Self {
        Self::table1_with(TableIndexing::default())
    }

    pub fn table1_with(indexing: TableIndexing) -> Self {
        let lead = match indexing {
            TableIndexing::Harmonics1To11 => vec![0.0],
            TableIndexing::AsPrinted => vec![],
        };
        let cos = lead.iter().chain(&TABLE1_COS).copied().collect();
        let sin = lead.iter().chain(&TABLE1_SIN).copied().collect();
        Self::from_series(FourierSeries::SineCosine { cos, sin }).expect("finite coefficients")
    }

    pub fn with_bump(mut self, bump: BumpTerm) -> Self {
        self.bumps.push(bump);
        self
    }

    /// The same function without its bump terms.
    pub fn without_bumps(&self) -> Self {
        CouplingSpec {
            bumps: vec![],
            ..self.clone()
        }
    }

    pub fn base(&self) -> &FourierSeries {
        &self.base
    }

    pub fn bumps(&self) -> &[BumpTerm] {
        &self.bumps
    }

    /// Highest harmonic present in the base series.
    pub fn harmonics(&self) -> usize {
        self.cos.len().saturating_sub(1)
    }

    /// `sum |coefficients| + sum |a| / e`, an upper bound for `|g|`.
    pub fn sup_bound(&self) -> f64 {
        let series: f64 = self
            .cos
            .iter()
            .zip(&self.sin)
            .map(|(a, b)| a.hypot(*b))
            .sum();
        series
            + self
                .bumps
                .iter()
                .map(|b| b.amplitude.abs() * (-1.0f64).exp())
                .sum::<f64>()
    }

    pub fn eval(&self, phi: f64) -> f64 {
        self.eval_with_derivative(phi).0
    }

    pub fn derivative(&self, phi: f64) -> f64 {
        self.eval_with_derivative(phi).1
    }

    /// `(g(phi), g'(phi))`, sharing one set of trigonometric evaluations.
    #[inline]
    pub fn eval_with_derivative(&self, phi: f64) -> (f64, f64) {
        let p = reduce_phase(phi);
        let mut value = 0.0;
        let mut deriv = 0.0;
        if let Some(&a0) = self.cos.first() {
            value += a0;
            if self.cos.len() > 1 {
                let (s1, c1) = p.sin_cos();
                let (mut s, mut c) = (s1, c1);
                for r in 1..self.cos.len() {
                    let (a, b) = (self.cos[r], self.sin[r]);
                    let rf = r as f64;
                    value += a * c + b * s;
                    deriv += rf * (b * c - a * s);
                    // angle addition: (r+1) phi from r phi and phi
                    let sn = s * c1 + c * s1;
                    c = c * c1 - s * s1;
                    s = sn;
                }
            }
        }
        for bump in &self.bumps {
            let (v, d) = bump.eval_with_derivative(p);
            value += v;
            deriv += d;
        }
        (value, deriv)
    }
}

/// True iff every bump's support is disjoint from the closed interval
/// `[lo, hi] ⊂ (0, 2π)`, in which case the bumps leave `g` unchanged there.
pub fn coupling_safety_check(spec: &CouplingSpec, lo: f64, hi: f64) -> Result<bool> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::param(format!(
            "protected interval [{lo}, {hi}] is empty or reversed"
        )));
    }
    if lo <= 0.0 || hi >= TAU {
        return Err(Error::param(format!(
            "protected interval [{lo}, {hi}] must lie inside (0, 2pi)"
        )));
    }
    let clear = spec.bumps.iter().filter_map(bump_support).all(|arc| {
        (-1..=1).all(|k| {
            let shift = k as f64 * TAU;
            arc.hi + shift < lo || arc.lo + shift > hi
        })
    });
    Ok(clear)
}
