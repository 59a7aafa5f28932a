//! Oscillator network vector fields.
//!
//! Every supported network reduces to the same pairwise form
//!
//! ```text
//! dphi_a/dt = omega_a + sum_c sum_b K^c_ab g_c(phi_a - phi_b) + eps * Y_a(t)
//! ```
//!
//! where each *channel* `c` carries one coupling function and a dense weight
//! matrix. Product mode uses weight `1/n` inside a population and `eps/n`
//! between populations (with the `+` sign); matrix mode uses `-H_ab / n`.
//! The Jacobian follows directly: `J_ab = -K_ab g'(phi_a - phi_b)` off the
//! diagonal and minus the off-diagonal row sum on it.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coupling::CouplingSpec;
use crate::error::{Error, Result};

/// `n` identical oscillators with intrinsic frequency `omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub n: usize,
    #[serde(default)]
    pub omega: f64,
    pub coupling: CouplingSpec,
}

impl PopulationSpec {
    pub fn new(n: usize, omega: f64, coupling: CouplingSpec) -> Self {
        PopulationSpec { n, omega, coupling }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingMode {
    /// Weakly coupled product of identical populations.
    #[default]
    Product,
    /// Explicit weight matrix over all oscillators, `omega - (1/n) sum_j H_kj g(..)`.
    Matrix { weights: Vec<Vec<f64>> },
}

/// Bounded additive forcing `eps * Y_a`, used to break the permutation symmetry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// `Y_a = offsets[a]`
    Detuning { offsets: Vec<f64> },
    /// `Y_a = amplitudes[a] * sin(frequency * t + phases[a])`
    Forcing {
        amplitudes: Vec<f64>,
        frequency: f64,
        phases: Vec<f64>,
    },
    /// `Y_a = weights[a] * (1/N) sum_b h(phi_a - phi_b)` over all `N` oscillators.
    PhaseCoupled {
        weights: Vec<f64>,
        coupling: CouplingSpec,
    },
}

impl Perturbation {
    /// Declared bound `M >= sup |Y_a|`.
    pub fn bound(&self) -> f64 {
        let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        match self {
            Perturbation::Detuning { offsets } => max_abs(offsets),
            Perturbation::Forcing { amplitudes, .. } => max_abs(amplitudes),
            Perturbation::PhaseCoupled { weights, coupling } => {
                max_abs(weights) * coupling.sup_bound()
            }
        }
    }

    fn len(&self) -> usize {
        match self {
            Perturbation::Detuning { offsets } => offsets.len(),
            Perturbation::Forcing { amplitudes, .. } => amplitudes.len(),
            Perturbation::PhaseCoupled { weights, .. } => weights.len(),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.len() != dim {
            return Err(Error::param(format!(
                "perturbation has {} entries for {dim} oscillators",
                self.len()
            )));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            Perturbation::Detuning { offsets } => finite(offsets),
            Perturbation::Forcing {
                amplitudes,
                frequency,
                phases,
            } => {
                if phases.len() != dim {
                    return Err(Error::param("forcing phases must match oscillator count"));
                }
                finite(amplitudes) && finite(phases) && frequency.is_finite()
            }
            Perturbation::PhaseCoupled { weights, .. } => finite(weights),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param("perturbation entries must be finite"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct NetworkRepr {
    populations: Vec<PopulationSpec>,
    #[serde(default)]
    epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inter_coupling: Option<CouplingSpec>,
    #[serde(default)]
    mode: CouplingMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    perturbation: Option<Perturbation>,
}

#[derive(Clone, Debug)]
struct Channel {
    coupling: CouplingSpec,
    /// Row-major `dim x dim`.
    weights: Vec<f64>,
    /// Nonzero columns of each row, so sparse networks stay cheap.
    support: Vec<Vec<usize>>,
}

/// m populations of phase oscillators, weakly coupled with strength `epsilon`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct NetworkSpec {
    repr: NetworkRepr,
    offsets: Vec<usize>,
    dim: usize,
    omega: Vec<f64>,
    channels: Vec<Channel>,
}

impl PartialEq for NetworkSpec {
    fn eq(&self, other: &Self) -> bool {
        self.repr == other.repr
    }
}

impl TryFrom<NetworkRepr> for NetworkSpec {
    type Error = Error;
    fn try_from(repr: NetworkRepr) -> Result<Self> {
        NetworkSpec::build(repr)
    }
}

impl From<NetworkSpec> for NetworkRepr {
    fn from(n: NetworkSpec) -> Self {
        n.repr
    }
}

impl NetworkSpec {
    /// `m` identical populations of `n` oscillators sharing one coupling function.
    pub fn product(m: usize, n: usize, omega: f64, coupling: CouplingSpec, epsilon: f64) -> Result<Self> {
        Self::build(NetworkRepr {
            populations: (0..m)
                .map(|_| PopulationSpec::new(n, omega, coupling.clone()))
                .collect(),
            epsilon,
            inter_coupling: None,
            mode: CouplingMode::Product,
            perturbation: None,
        })
    }

    /// A single globally coupled population.
    pub fn single(n: usize, omega: f64, coupling: CouplingSpec) -> Result<Self> {
        Self::product(1, n, omega, coupling, 0.0)
    }

    /// General network with an explicit weight matrix over all oscillators.
    pub fn matrix(populations: Vec<PopulationSpec>, weights: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(NetworkRepr {
            populations,
            epsilon: 0.0,
            inter_coupling: None,
            mode: CouplingMode::Matrix { weights },
            perturbation: None,
        })
    }

    pub fn from_populations(populations: Vec<PopulationSpec>, epsilon: f64) -> Result<Self> {
        Self::build(NetworkRepr {
            populations,
            epsilon,
            inter_coupling: None,
            mode: CouplingMode::Product,
            perturbation: None,
        })
    }

    pub fn with_inter_coupling(&self, g: CouplingSpec) -> Result<Self> {
        let mut repr = self.repr.clone();
        repr.inter_coupling = Some(g);
        Self::build(repr)
    }

    pub fn with_perturbation(&self, p: Perturbation) -> Result<Self> {
        let mut repr = self.repr.clone();
        repr.perturbation = Some(p);
        Self::build(repr)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut repr = self.repr.clone();
        repr.epsilon = epsilon;
        Self::build(repr)
    }

    fn build(repr: NetworkRepr) -> Result<Self> {
        if repr.populations.is_empty() {
            return Err(Error::param("network needs at least one population"));
        }
        if !(repr.epsilon.is_finite() && repr.epsilon >= 0.0) {
            return Err(Error::param(format!(
                "coupling strength must be finite and >= 0, got {}",
                repr.epsilon
            )));
        }
        for (i, p) in repr.populations.iter().enumerate() {
            if p.n == 0 {
                return Err(Error::param(format!("population {i} has no oscillators")));
            }
            if !p.omega.is_finite() {
                return Err(Error::param(format!("population {i} has non-finite omega")));
            }
        }
        let mut offsets = Vec::with_capacity(repr.populations.len() + 1);
        let mut dim = 0;
        for p in &repr.populations {
            offsets.push(dim);
            dim += p.n;
        }
        offsets.push(dim);
        let omega: Vec<f64> = repr
            .populations
            .iter()
            .flat_map(|p| std::iter::repeat_n(p.omega, p.n))
            .collect();

        let mut channels = Vec::new();
        match &repr.mode {
            CouplingMode::Product => {
                let n = repr.populations[0].n;
                if repr.populations.iter().any(|p| p.n != n) {
                    return Err(Error::param(
                        "product mode requires equal population sizes",
                    ));
                }
                let m = repr.populations.len();
                let inv_n = 1.0 / n as f64;
                let eps = repr.epsilon;
                // intra-population channel per distinct coupling; inter-population
                // either shares it or gets its own channel
                for (l, pop) in repr.populations.iter().enumerate() {
                    let mut intra = vec![0.0; dim * dim];
                    for k in 0..n {
                        for j in 0..n {
                            intra[(l * n + k) * dim + l * n + j] = inv_n;
                        }
                    }
                    let mut inter = vec![0.0; dim * dim];
                    if eps > 0.0 {
                        for r in (0..m).filter(|&r| r != l) {
                            for k in 0..n {
                                for j in 0..n {
                                    inter[(l * n + k) * dim + r * n + j] = eps * inv_n;
                                }
                            }
                        }
                    }
                    match &repr.inter_coupling {
                        None => {
                            for (w, v) in intra.iter_mut().zip(&inter) {
                                *w += v;
                            }
                            push_channel(&mut channels, pop.coupling.clone(), intra, dim);
                        }
                        Some(g_inter) => {
                            push_channel(&mut channels, pop.coupling.clone(), intra, dim);
                            push_channel(&mut channels, g_inter.clone(), inter, dim);
                        }
                    }
                }
            }
            CouplingMode::Matrix { weights } => {
                if repr.inter_coupling.is_some() {
                    return Err(Error::param(
                        "matrix mode takes its coupling from the row's population",
                    ));
                }
                if weights.len() != dim || weights.iter().any(|r| r.len() != dim) {
                    return Err(Error::param(format!(
                        "coupling matrix must be {dim} x {dim}"
                    )));
                }
                if weights.iter().flatten().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(Error::param("coupling weights must be finite and nonnegative"));
                }
                let inv_n = 1.0 / dim as f64;
                for (l, pop) in repr.populations.iter().enumerate() {
                    let mut w = vec![0.0; dim * dim];
                    for a in offsets[l]..offsets[l + 1] {
                        for b in 0..dim {
                            w[a * dim + b] = -weights[a][b] * inv_n;
                        }
                    }
                    push_channel(&mut channels, pop.coupling.clone(), w, dim);
                }
            }
        }
        if let Some(p) = &repr.perturbation {
            p.validate(dim)?;
            if let Perturbation::PhaseCoupled { weights, coupling } = p {
                let inv = repr.epsilon / dim as f64;
                let mut w = vec![0.0; dim * dim];
                for a in 0..dim {
                    for b in 0..dim {
                        w[a * dim + b] = weights[a] * inv;
                    }
                }
                push_channel(&mut channels, coupling.clone(), w, dim);
            }
        }
        Ok(NetworkSpec {
            repr,
            offsets,
            dim,
            omega,
            channels,
        })
    }

    /// Bound `M` on the terms multiplied by `epsilon`: the inter-population
    /// coupling in product mode (at unit strength) plus any declared perturbation.
    pub fn perturbation_bound(&self) -> f64 {
        let declared = self.repr.perturbation.as_ref().map_or(0.0, Perturbation::bound);
        if !self.is_product() {
            return declared;
        }
        let m = self.repr.populations.len();
        let sup = match &self.repr.inter_coupling {
            Some(g) => g.sup_bound(),
            None => self
                .repr
                .populations
                .iter()
                .map(|p| p.coupling.sup_bound())
                .fold(0.0, f64::max),
        };
        (m - 1) as f64 * sup + declared
    }

    /// Total number of oscillators.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn populations(&self) -> &[PopulationSpec] {
        &self.repr.populations
    }

    pub fn population_count(&self) -> usize {
        self.repr.populations.len()
    }

    /// Index range of population `l` in a [`PhaseVector`](crate::PhaseVector).
    pub fn population_range(&self, l: usize) -> std::ops::Range<usize> {
        self.offsets[l]..self.offsets[l + 1]
    }

    pub fn epsilon(&self) -> f64 {
        self.repr.epsilon
    }

    pub fn mode(&self) -> &CouplingMode {
        &self.repr.mode
    }

    pub fn perturbation(&self) -> Option<&Perturbation> {
        self.repr.perturbation.as_ref()
    }

    pub fn is_product(&self) -> bool {
        matches!(self.repr.mode, CouplingMode::Product)
    }

    /// Coupling function used between population `l` and population `r`.
    pub fn coupling_between(&self, l: usize, r: usize) -> &CouplingSpec {
        match (&self.repr.inter_coupling, l == r) {
            (Some(g), false) => g,
            _ => &self.repr.populations[l].coupling,
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(&self.repr).expect("network serializes");
        hex::encode(Sha256::digest(&json))
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len == self.dim {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.dim,
                got: len,
            })
        }
    }

    /// Time derivative of every phase.
    pub fn vector_field(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let mut out = vec![0.0; self.dim];
        self.rates_into(t, x, &mut out);
        Ok(out)
    }

    /// Unchecked [`vector_field`](Self::vector_field) writing into `out`.
    pub fn rates_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        out.copy_from_slice(&self.omega);
        for ch in &self.channels {
            for (a, cols) in ch.support.iter().enumerate() {
                let row = &ch.weights[a * self.dim..(a + 1) * self.dim];
                let xa = x[a];
                let mut s = 0.0;
                for &b in cols {
                    s += row[b] * ch.coupling.eval(xa - x[b]);
                }
                out[a] += s;
            }
        }
        self.add_forcing(t, out);
    }

    fn add_forcing(&self, t: f64, out: &mut [f64]) {
        let eps = self.repr.epsilon;
        match &self.repr.perturbation {
            Some(Perturbation::Detuning { offsets }) => {
                for (o, d) in out.iter_mut().zip(offsets) {
                    *o += eps * d;
                }
            }
            Some(Perturbation::Forcing {
                amplitudes,
                frequency,
                phases,
            }) => {
                for ((o, a), p) in out.iter_mut().zip(amplitudes).zip(phases) {
                    *o += eps * a * (frequency * t + p).sin();
                }
            }
            _ => {}
        }
    }

    /// Rates and the Jacobian-vector product `J(x) v` in one pass.
    pub fn rates_and_tangent_into(
        &self,
        t: f64,
        x: &[f64],
        v: &[f64],
        rates: &mut [f64],
        tangent: &mut [f64],
    ) {
        rates.copy_from_slice(&self.omega);
        tangent.fill(0.0);
        for ch in &self.channels {
            for (a, cols) in ch.support.iter().enumerate() {
                let row = &ch.weights[a * self.dim..(a + 1) * self.dim];
                let (xa, va) = (x[a], v[a]);
                let mut s = 0.0;
                let mut ds = 0.0;
                for &b in cols {
                    let (g, dg) = ch.coupling.eval_with_derivative(xa - x[b]);
                    s += row[b] * g;
                    ds += row[b] * dg * (va - v[b]);
                }
                rates[a] += s;
                tangent[a] += ds;
            }
        }
        self.add_forcing(t, rates);
    }

    /// Exact Jacobian, row-major `dim x dim`. Forcing terms do not depend on the
    /// phases, so the result is independent of time.
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let d = self.dim;
        let mut jac = vec![0.0; d * d];
        for ch in &self.channels {
            for (a, cols) in ch.support.iter().enumerate() {
                let row = &ch.weights[a * d..(a + 1) * d];
                for &b in cols.iter().filter(|&&b| b != a) {
                    let c = row[b] * ch.coupling.derivative(x[a] - x[b]);
                    jac[a * d + b] -= c;
                    jac[a * d + a] += c;
                }
            }
        }
        Ok(jac)
    }
}

fn push_channel(channels: &mut Vec<Channel>, coupling: CouplingSpec, weights: Vec<f64>, dim: usize) {
    let support: Vec<Vec<usize>> = (0..dim)
        .map(|a| (0..dim).filter(|&b| weights[a * dim + b] != 0.0).collect())
        .collect();
    if support.iter().all(Vec::is_empty) {
        return;
    }
    // merge with an existing channel carrying the same function
    if let Some(ch) = channels.iter_mut().find(|c| c.coupling == coupling) {
        for (w, v) in ch.weights.iter_mut().zip(&weights) {
            *w += v;
        }
        ch.support = (0..dim)
            .map(|a| (0..dim).filter(|&b| ch.weights[a * dim + b] != 0.0).collect())
            .collect();
        return;
    }
    channels.push(Channel {
        coupling,
        weights,
        support,
    });
}

/// `Theta_k(phi, psi) = (1/n) sum_j g(phi_k - psi_j)`, self term included.
pub fn mean_field_coupling(g: &CouplingSpec, phi: &[f64], psi: &[f64], k: usize) -> Result<f64> {
    if phi.len() != psi.len() {
        return Err(Error::Dimension {
            expected: phi.len(),
            got: psi.len(),
        });
    }
    let pk = *phi.get(k).ok_or(Error::Index {
        index: k,
        len: phi.len(),
    })?;
    let s: f64 = psi.iter().map(|&p| g.eval(pk - p)).sum();
    Ok(s / psi.len() as f64)
}

fn check_permutation(p: &[usize], len: usize, what: &str) -> Result<()> {
    if p.len() != len {
        return Err(Error::param(format!(
            "{what} permutation has length {}, expected {len}",
            p.len()
        )));
    }
    let mut seen = vec![false; len];
    for &i in p {
        if i >= len || std::mem::replace(&mut seen[i], true) {
            return Err(Error::param(format!("{what} is not a permutation")));
        }
    }
    Ok(())
}

/// Action of `T x (S_n wr S_m)` on a product-mode phase vector: oscillator
/// `(l, k)` moves to `(pop_perm[l], intra_perm[k])` and every phase is shifted
/// by `shift`. Pass `shift = 0` to act on rate vectors.
pub fn symmetry_orbit(
    x: &[f64],
    n: usize,
    shift: f64,
    intra_perm: &[usize],
    pop_perm: &[usize],
) -> Result<Vec<f64>> {
    if n == 0 || x.len() % n != 0 {
        return Err(Error::param(format!(
            "phase vector of length {} is not a multiple of n = {n}",
            x.len()
        )));
    }
    let m = x.len() / n;
    check_permutation(intra_perm, n, "intra-population")?;
    check_permutation(pop_perm, m, "population")?;
    let mut y = vec![0.0; x.len()];
    for l in 0..m {
        for k in 0..n {
            y[pop_perm[l] * n + intra_perm[k]] = x[l * n + k] + shift;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{BumpReading, FourierSeries, SADDLE_ETA};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gchaos() -> CouplingSpec {
        CouplingSpec::gchaos(SADDLE_ETA.0, SADDLE_ETA.1)
    }

    fn random_phases(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect()
    }

    /// Explicit double loops over the two-population equations.
    fn two_pop_oracle(g: &CouplingSpec, omega: f64, eps: f64, n: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 2 * n];
        for l in 0..2 {
            let r = 1 - l;
            for k in 0..n {
                let pk = x[l * n + k];
                let mut own = 0.0;
                let mut other = 0.0;
                for j in 0..n {
                    own += g.eval(pk - x[l * n + j]);
                    other += g.eval(pk - x[r * n + j]);
                }
                out[l * n + k] = omega + own / n as f64 + eps * other / n as f64;
            }
        }
        out
    }

    #[test]
    fn mean_field_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = random_phases(&mut rng, 4);
        let psi = random_phases(&mut rng, 4);
        assert_eq!(mean_field_coupling(&CouplingSpec::zero(), &phi, &psi, 2).unwrap(), 0.0);
        let g = gchaos();
        let same = vec![0.7; 4];
        assert_eq!(mean_field_coupling(&g, &same, &same, 1).unwrap(), g.eval(0.0));
        for k in 0..4 {
            let direct: f64 = psi.iter().map(|p| g.eval(phi[k] - p)).sum::<f64>() / 4.0;
            let got = mean_field_coupling(&g, &phi, &psi, k).unwrap();
            assert!((got - direct).abs() <= 1e-12 * direct.abs());
        }
        assert!(matches!(
            mean_field_coupling(&g, &phi, &psi, 4),
            Err(Error::Index { .. })
        ));
    }

    #[test]
    fn uncoupled_diagonals_rotate_at_g0() {
        let g = gchaos();
        let net = NetworkSpec::product(2, 4, 0.3, g.clone(), 0.0).unwrap();
        let x = [1.0, 1.0, 1.0, 1.0, -2.0, -2.0, -2.0, -2.0];
        for r in net.vector_field(&x, 0.0).unwrap() {
            assert!((r - (0.3 + g.eval(0.0))).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_coupling_gives_omega() {
        let net = NetworkSpec::product(3, 5, 1.25, CouplingSpec::zero(), 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_phases(&mut rng, 15);
        assert!(net.vector_field(&x, 3.0).unwrap().iter().all(|&r| r == 1.25));
        assert!(net.jacobian(&x).unwrap().iter().all(|&j| j == 0.0));
    }

    #[test]
    fn matches_loop_oracle() {
        let g = gchaos();
        let net = NetworkSpec::product(2, 4, 0.0, g.clone(), 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = random_phases(&mut rng, 8);
            let got = net.vector_field(&x, 0.0).unwrap();
            let want = two_pop_oracle(&g, 0.0, 0.2, 4, &x);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn separate_inter_coupling() {
        let g = gchaos();
        let h = CouplingSpec::table1();
        let net = NetworkSpec::product(2, 3, 0.0, g.clone(), 0.1)
            .unwrap()
            .with_inter_coupling(h.clone())
            .unwrap();
        let x = [0.1, 0.5, 2.0, -1.0, 0.3, 4.0];
        let got = net.vector_field(&x, 0.0).unwrap();
        let own: f64 = (0..3).map(|j| g.eval(x[0] - x[j])).sum::<f64>() / 3.0;
        let other: f64 = (3..6).map(|j| h.eval(x[0] - x[j])).sum::<f64>() / 3.0;
        assert!((got[0] - own - 0.1 * other).abs() < 1e-13);
    }

    #[test]
    fn dimension_checks() {
        let net = NetworkSpec::product(2, 4, 0.0, gchaos(), 0.1).unwrap();
        assert!(matches!(
            net.vector_field(&[0.0; 7], 0.0),
            Err(Error::Dimension { expected: 8, got: 7 })
        ));
        assert!(net.jacobian(&[0.0; 9]).is_err());
    }

    #[test]
    fn construction_rejects_bad_input() {
        let g = gchaos();
        assert!(NetworkSpec::product(2, 0, 0.0, g.clone(), 0.1).is_err());
        assert!(NetworkSpec::product(2, 4, 0.0, g.clone(), -0.1).is_err());
        assert!(NetworkSpec::product(0, 4, 0.0, g.clone(), 0.1).is_err());
        assert!(NetworkSpec::from_populations(
            vec![PopulationSpec::new(3, 0.0, g.clone()), PopulationSpec::new(4, 0.0, g.clone())],
            0.1
        )
        .is_err());
        let pops = vec![PopulationSpec::new(2, 0.0, g.clone())];
        assert!(NetworkSpec::matrix(pops.clone(), vec![vec![1.0, 1.0]]).is_err());
        assert!(NetworkSpec::matrix(pops, vec![vec![1.0, -1.0], vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn matrix_mode_uses_minus_sign() {
        let sine = CouplingSpec::from_series(FourierSeries::SineCosine {
            cos: vec![0.0, 0.0],
            sin: vec![0.0, 1.0],
        })
        .unwrap();
        let net = NetworkSpec::matrix(
            vec![PopulationSpec::new(2, 0.5, sine)],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap();
        let x = [0.3, -0.4];
        let r = net.vector_field(&x, 0.0).unwrap();
        assert!((r[0] - (0.5 - 0.5 * (0.7f64).sin())).abs() < 1e-15);
        assert!((r[1] - (0.5 - 0.5 * (-0.7f64).sin())).abs() < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let net = NetworkSpec::product(2, 4, 0.0, gchaos(), 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = net.dim();
        for _ in 0..10 {
            let x = random_phases(&mut rng, d);
            let jac = net.jacobian(&x).unwrap();
            let h = 1e-6;
            for b in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[b] += h;
                xm[b] -= h;
                let fp = net.vector_field(&xp, 0.0).unwrap();
                let fm = net.vector_field(&xm, 0.0).unwrap();
                for a in 0..d {
                    let fd = (fp[a] - fm[a]) / (2.0 * h);
                    assert!((fd - jac[a * d + b]).abs() < 1e-5);
                }
            }
            for a in 0..d {
                let s: f64 = jac[a * d..(a + 1) * d].iter().sum();
                assert!(s.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_block_diagonal_when_uncoupled() {
        let net = NetworkSpec::product(2, 4, 0.0, gchaos(), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_phases(&mut rng, 8);
        let jac = net.jacobian(&x).unwrap();
        for a in 0..8 {
            for b in 0..8 {
                if a / 4 != b / 4 {
                    assert_eq!(jac[a * 8 + b], 0.0);
                }
            }
        }
    }

    #[test]
    fn tangent_product_matches_jacobian() {
        let g = CouplingSpec::ghat(SADDLE_ETA.0, SADDLE_ETA.1, BumpReading::Calibrated);
        let net = NetworkSpec::product(2, 4, 0.0, g, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_phases(&mut rng, 8);
        let v: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let jac = net.jacobian(&x).unwrap();
        let mut rates = vec![0.0; 8];
        let mut jv = vec![0.0; 8];
        net.rates_and_tangent_into(0.0, &x, &v, &mut rates, &mut jv);
        assert_eq!(rates, net.vector_field(&x, 0.0).unwrap());
        for a in 0..8 {
            let want: f64 = (0..8).map(|b| jac[a * 8 + b] * v[b]).sum();
            assert!((jv[a] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn synchronized_population_has_equal_rates() {
        let net = NetworkSpec::product(2, 4, 0.0, gchaos(), 0.37).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut x = random_phases(&mut rng, 8);
        x[..4].fill(1.9);
        let r = net.vector_field(&x, 0.0).unwrap();
        assert!(r[..4].iter().all(|&v| v == r[0]));
    }

    #[test]
    fn equivariance_under_wreath_product_and_shift() {
        use rand::seq::SliceRandom;
        let net = NetworkSpec::product(2, 4, 0.2, gchaos(), 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let x = random_phases(&mut rng, 8);
            let mut sigma: Vec<usize> = (0..4).collect();
            sigma.shuffle(&mut rng);
            let tau: Vec<usize> = if rng.random_bool(0.5) { vec![1, 0] } else { vec![0, 1] };
            let c = rng.random_range(-10.0..10.0);
            let gx = symmetry_orbit(&x, 4, c, &sigma, &tau).unwrap();
            let lhs = net.vector_field(&gx, 0.0).unwrap();
            let rhs = symmetry_orbit(&net.vector_field(&x, 0.0).unwrap(), 4, 0.0, &sigma, &tau).unwrap();
            for (a, b) in lhs.iter().zip(&rhs) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn symmetry_orbit_basics() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(symmetry_orbit(&x, 3, 0.0, &[0, 1, 2], &[0, 1]).unwrap(), x);
        assert_eq!(
            symmetry_orbit(&x, 3, 0.0, &[0, 1, 2], &[1, 0]).unwrap(),
            [4.0, 5.0, 6.0, 1.0, 2.0, 3.0]
        );
        assert!(symmetry_orbit(&x, 3, 0.0, &[0, 0, 2], &[0, 1]).is_err());
        assert!(symmetry_orbit(&x, 3, 0.0, &[0, 1, 2], &[0]).is_err());
        assert!(symmetry_orbit(&x, 4, 0.0, &[0, 1, 2, 3], &[0]).is_err());
    }

    #[test]
    fn perturbations_add_scaled_terms() {
        let base = NetworkSpec::product(2, 2, 0.0, gchaos(), 0.5).unwrap();
        let x = [0.1, 0.2, 0.3, 0.4];
        let plain = base.vector_field(&x, 0.0).unwrap();

        let det = base
            .with_perturbation(Perturbation::Detuning {
                offsets: vec![1.0, -1.0, 0.0, 2.0],
            })
            .unwrap();
        let r = det.vector_field(&x, 0.0).unwrap();
        assert!((r[3] - plain[3] - 1.0).abs() < 1e-14);
        assert_eq!(det.perturbation().unwrap().bound(), 2.0);

        let forced = base
            .with_perturbation(Perturbation::Forcing {
                amplitudes: vec![1.0; 4],
                frequency: 2.0,
                phases: vec![0.0; 4],
            })
            .unwrap();
        let r = forced.vector_field(&x, 0.7).unwrap();
        assert!((r[0] - plain[0] - 0.5 * (1.4f64).sin()).abs() < 1e-14);

        let h = CouplingSpec::table1();
        let pc = base
            .with_perturbation(Perturbation::PhaseCoupled {
                weights: vec![1.0, 0.0, 0.0, 0.0],
                coupling: h.clone(),
            })
            .unwrap();
        let r = pc.vector_field(&x, 0.0).unwrap();
        let y0: f64 = x.iter().map(|b| h.eval(x[0] - b)).sum::<f64>() / 4.0;
        assert!((r[0] - plain[0] - 0.5 * y0).abs() < 1e-13);
        assert_eq!(&r[1..], &plain[1..]);
        assert!(base
            .with_perturbation(Perturbation::Detuning { offsets: vec![1.0] })
            .is_err());
    }

    #[test]
    fn serde_round_trip() {
        let net = NetworkSpec::product(2, 4, 0.1, gchaos(), 0.2).unwrap();
        let s = serde_json::to_string(&net).unwrap();
        let back: NetworkSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.content_hash(), net.content_hash());
        assert_ne!(net.with_epsilon(0.3).unwrap().content_hash(), net.content_hash());
    }
}
