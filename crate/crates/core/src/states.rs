//! Product and dense quantum states, partial traces, and empirical
//! certification of exponential decay of correlations.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Module, Result};
use crate::hamiltonian::{self, CenteredTerm, HamiltonianSpec, LocalHamiltonian, LocalTerm};
use crate::lattice::{one_norm_distance, Geometry, LatticeSpec};
use crate::linalg::{self, c64, CMat, Placement};

pub const STATE_TOL: f64 = 1e-12;
pub const DENSE_TOL: f64 = 1e-10;

fn check_density(m: &CMat, tol: f64, label: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(Module::States, label, "matrix is not square"));
    }
    let dev = linalg::hermitian_deviation(m);
    if dev > tol {
        return Err(Error::invalid(Module::States, label, format!("not Hermitian (deviation {dev:e})")));
    }
    let tr = linalg::trace(m);
    if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
        return Err(Error::invalid(Module::States, label, format!("trace {tr} is not 1")));
    }
    let lo = linalg::eigvalsh(m)?.first().copied().unwrap_or(0.0);
    if lo < -DENSE_TOL {
        return Err(Error::invalid(Module::States, label, format!("not positive semi-definite (min eigenvalue {lo:e})")));
    }
    Ok(())
}

/// `rho = ⊗_s rho_s` in spin order.
#[derive(Debug, Clone)]
pub struct ProductState {
    factors: Vec<CMat>,
}

impl ProductState {
    pub fn new(factors: Vec<CMat>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::invalid(Module::States, "factors", "at least one factor is required"));
        }
        let d = factors[0].nrows();
        for (i, f) in factors.iter().enumerate() {
            if f.nrows() != d {
                return Err(Error::DimensionMismatch { expected: d, found: f.nrows() });
            }
            check_density(f, STATE_TOL, &format!("factors[{i}]"))?;
        }
        Ok(ProductState { factors })
    }

    /// Every spin in the pure state `psi` (normalised here).
    pub fn uniform_pure(psi: &[c64], spins: usize) -> Result<Self> {
        let f = pure_projector(psi)?;
        Self::new(vec![f; spins])
    }

    pub fn factors(&self) -> &[CMat] {
        &self.factors
    }

    pub fn spin_count(&self) -> usize {
        self.factors.len()
    }

    pub fn local_dim(&self) -> usize {
        self.factors[0].nrows()
    }

    /// Reduced state on an ascending support.
    pub fn reduced(&self, support: &[usize]) -> CMat {
        let mut out = linalg::identity(1);
        for &s in support {
            out = linalg::kron(&out, &self.factors[s]);
        }
        out
    }

    pub fn expectation_local(&self, op: &CMat, support: &[usize]) -> f64 {
        linalg::trace_of_product(&self.reduced(support), op).re
    }

    /// Per-spin state vectors, when every factor is rank one.
    pub fn pure_factors(&self) -> Result<Option<Vec<Vec<c64>>>> {
        let d = self.local_dim();
        let mut vectors = Vec::with_capacity(self.factors.len());
        for f in &self.factors {
            let e = linalg::eigh(f)?;
            if e.values[d - 1] < 1.0 - STATE_TOL {
                return Ok(None);
            }
            vectors.push(e.vector(d - 1));
        }
        Ok(Some(vectors))
    }

    /// Dense form. All-pure products become state vectors.
    pub fn to_density(&self) -> Result<DensityState> {
        let d = self.local_dim();
        let spins = self.spin_count();
        linalg::checked_dim(d, spins)?;
        if let Some(vectors) = self.pure_factors()? {
            let mut psi = vec![c64::new(1.0, 0.0)];
            for v in &vectors {
                psi = psi.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
            }
            return DensityState::pure(psi, spins, d);
        }
        let mut m = linalg::identity(1);
        for f in &self.factors {
            m = linalg::kron(&m, f);
        }
        Ok(DensityState {
            spins,
            d,
            repr: Representation::Mixed(m),
            scale: 1.0,
        })
    }
}

fn pure_projector(psi: &[c64]) -> Result<CMat> {
    let norm: f64 = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::invalid(Module::States, "vector", "zero vector"));
    }
    let n = psi.len();
    Ok(faer::Mat::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / (norm * norm)))
}

#[derive(Debug, Clone)]
pub enum Representation {
    Pure(Vec<c64>),
    Mixed(CMat),
}

/// A state on the whole register, kept as a vector when pure. Pure vectors
/// are stored as given; `scale = 1 / |psi|^2` is applied to every quadratic
/// quantity, so simple vectors like the cat state give exact weights.
#[derive(Debug, Clone)]
pub struct DensityState {
    spins: usize,
    d: usize,
    repr: Representation,
    scale: f64,
}

impl DensityState {
    pub fn pure(psi: Vec<c64>, spins: usize, d: usize) -> Result<Self> {
        let dim = linalg::checked_dim(d, spins)?;
        if psi.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: psi.len() });
        }
        let norm_sqr: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
        if norm_sqr == 0.0 || !norm_sqr.is_finite() {
            return Err(Error::invalid(Module::States, "vector", "vector must be nonzero and finite"));
        }
        Ok(DensityState {
            spins,
            d,
            repr: Representation::Pure(psi),
            scale: 1.0 / norm_sqr,
        })
    }

    pub fn mixed(m: CMat, spins: usize, d: usize) -> Result<Self> {
        let dim = linalg::checked_dim(d, spins)?;
        if m.nrows() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
        }
        check_density(&m, DENSE_TOL, "state")?;
        Ok(DensityState {
            spins,
            d,
            repr: Representation::Mixed(m),
            scale: 1.0,
        })
    }

    pub fn spin_count(&self) -> usize {
        self.spins
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.d.pow(self.spins as u32)
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    /// `1 / |psi|^2` for pure states, 1 for mixed ones.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn matrix(&self) -> CMat {
        match &self.repr {
            Representation::Pure(psi) => pure_projector(psi).expect("normalised"),
            Representation::Mixed(m) => m.clone(),
        }
    }

    /// `Tr(rho op)` for a full-register operator.
    pub fn expectation(&self, op: &CMat) -> f64 {
        match &self.repr {
            Representation::Pure(psi) => self.scale * linalg::inner(psi, &linalg::mat_vec(op, psi)).re,
            Representation::Mixed(m) => linalg::trace_of_product(m, op).re,
        }
    }

    /// `Tr(rho (op ⊗ I))` for `op` on an ascending support.
    pub fn expectation_local(&self, op: &CMat, support: &[usize]) -> f64 {
        match &self.repr {
            Representation::Pure(psi) => {
                let place = Placement::new(support, self.spins, self.d);
                self.scale * linalg::inner(psi, &linalg::apply_to_vector(op, &place, psi)).re
            }
            Representation::Mixed(_) => {
                let reduced = self.partial_trace(support).expect("nonempty support");
                linalg::trace_of_product(&reduced, op).re
            }
        }
    }

    /// Reduced density matrix on `keep`, factors in ascending spin order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<CMat> {
        let keep: Vec<usize> = keep.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if keep.is_empty() {
            return Err(Error::invalid(Module::States, "keep", "cannot trace out every spin"));
        }
        if keep[keep.len() - 1] >= self.spins {
            return Err(Error::invalid(Module::States, "keep", format!("spin {} out of range", keep[keep.len() - 1])));
        }
        let place = Placement::new(&keep, self.spins, self.d);
        let offs = place.offsets().to_vec();
        let local = offs.len();
        let mut out = linalg::zeros(local);
        for base in place.bases() {
            for (a, &oa) in offs.iter().enumerate() {
                for (b, &ob) in offs.iter().enumerate() {
                    out[(a, b)] += match &self.repr {
                        Representation::Pure(psi) => psi[base + oa] * psi[base + ob].conj() * self.scale,
                        Representation::Mixed(m) => m[(base + oa, base + ob)],
                    };
                }
            }
        }
        Ok(out)
    }
}

/// Either structured product form or a dense state.
#[derive(Debug, Clone)]
pub enum State {
    Product(ProductState),
    Dense(DensityState),
}

impl State {
    pub fn spin_count(&self) -> usize {
        match self {
            State::Product(p) => p.spin_count(),
            State::Dense(s) => s.spin_count(),
        }
    }

    pub fn local_dim(&self) -> usize {
        match self {
            State::Product(p) => p.local_dim(),
            State::Dense(s) => s.local_dim(),
        }
    }

    pub fn to_density(&self) -> Result<DensityState> {
        match self {
            State::Product(p) => p.to_density(),
            State::Dense(s) => Ok(s.clone()),
        }
    }

    pub fn as_product(&self) -> Option<&ProductState> {
        match self {
            State::Product(p) => Some(p),
            State::Dense(_) => None,
        }
    }

    pub fn expectation_local(&self, op: &CMat, support: &[usize]) -> f64 {
        match self {
            State::Product(p) => p.expectation_local(op, support),
            State::Dense(s) => s.expectation_local(op, support),
        }
    }
}

/// `g_w = h_w - Tr(rho h_w) I`.
pub fn center(term: &LocalTerm, state: &State) -> CenteredTerm {
    let offset = state.expectation_local(term.matrix(), term.support());
    CenteredTerm {
        base: term.clone(),
        offset,
    }
}

/// Row-major `[re, im]` factor entries, as in term JSON.
pub type FactorJson = Vec<[f64; 2]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateSpec {
    /// Explicit per-spin density matrices.
    Product { factors: Vec<FactorJson> },
    /// Every spin in `sqrt(1-p)|0> + sqrt(p)|1>`, or the diagonal mixture
    /// with the same populations when `mixed`.
    Iid {
        p: f64,
        #[serde(default)]
        mixed: bool,
    },
    /// Independent seeded random factors.
    RandomProduct {
        #[serde(default)]
        mixed: bool,
    },
    /// `(|0...0> + |d-1...d-1>) / sqrt(2)`.
    Cat,
    /// Lowest eigenvector of the Hamiltonian, or of `of` when given.
    Ground {
        #[serde(default)]
        of: Option<Box<HamiltonianSpec>>,
    },
    /// `exp(-beta H) / Tr`, with `H` replaced by `of` when given.
    Gibbs {
        beta: f64,
        #[serde(default)]
        of: Option<Box<HamiltonianSpec>>,
    },
    /// Dense matrix in the binary operator layout.
    Binary { path: String },
}

fn matrix_from_json(entries: &[[f64; 2]], label: &str) -> Result<CMat> {
    let n = (entries.len() as f64).sqrt().round() as usize;
    if n * n != entries.len() || n == 0 {
        return Err(Error::invalid(Module::States, label, "entries do not form a square matrix"));
    }
    Ok(faer::Mat::from_fn(n, n, |i, j| c64::new(entries[i * n + j][0], entries[i * n + j][1])))
}

/// Builds a state. `hamiltonian` is needed for ground and Gibbs states.
pub fn make_state(spec: &StateSpec, geometry: &Geometry, hamiltonian: Option<&LocalHamiltonian>, seed: u64) -> Result<State> {
    let spins = geometry.spin_count();
    let d = geometry.local_dim();
    let assemble = |of: &Option<Box<HamiltonianSpec>>| -> Result<CMat> {
        match of {
            Some(spec) => spec.build(geometry, seed, false)?.assemble(),
            None => hamiltonian
                .ok_or_else(|| Error::invalid(Module::States, "kind", "this state needs a Hamiltonian"))?
                .assemble(),
        }
    };
    match spec {
        StateSpec::Product { factors } => {
            if factors.len() != spins {
                return Err(Error::invalid(Module::States, "factors", format!("{} factors for {spins} spins", factors.len())));
            }
            let mats = factors
                .iter()
                .enumerate()
                .map(|(i, f)| matrix_from_json(f, &format!("factors[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            if mats.iter().any(|m| m.nrows() != d) {
                return Err(Error::invalid(Module::States, "factors", format!("factors must be {d}x{d}")));
            }
            Ok(State::Product(ProductState::new(mats)?))
        }
        StateSpec::Iid { p, mixed } => {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::invalid(Module::States, "p", "must lie in [0, 1]"));
            }
            let factor = if *mixed {
                let mut diag = vec![0.0; d];
                diag[0] = 1.0 - p;
                diag[1] += p;
                linalg::real_diag(&diag)
            } else {
                let mut psi = vec![c64::new(0.0, 0.0); d];
                psi[0] = c64::new((1.0 - p).sqrt(), 0.0);
                psi[1] = c64::new(p.sqrt(), 0.0);
                pure_projector(&psi)?
            };
            Ok(State::Product(ProductState::new(vec![factor; spins])?))
        }
        StateSpec::RandomProduct { mixed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut gauss = || c64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            let factors = (0..spins)
                .map(|_| {
                    if *mixed {
                        let g = faer::Mat::from_fn(d, d, |_, _| gauss());
                        let a = &g * linalg::adjoint(&g);
                        let a = linalg::scale(&linalg::add(&a, &linalg::adjoint(&a)), 0.5);
                        let tr = linalg::trace(&a).re;
                        Ok(linalg::scale(&a, 1.0 / tr))
                    } else {
                        let psi: Vec<c64> = (0..d).map(|_| gauss()).collect();
                        pure_projector(&psi)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(State::Product(ProductState::new(factors)?))
        }
        StateSpec::Cat => {
            let dim = linalg::checked_dim(d, spins)?;
            let mut psi = vec![c64::new(0.0, 0.0); dim];
            psi[0] = c64::new(1.0, 0.0);
            psi[dim - 1] = c64::new(1.0, 0.0);
            Ok(State::Dense(DensityState::pure(psi, spins, d)?))
        }
        StateSpec::Ground { of } => {
            let h = assemble(of)?;
            let e = linalg::eigh(&h)?;
            Ok(State::Dense(DensityState::pure(e.vector(0), spins, d)?))
        }
        StateSpec::Gibbs { beta, of } => {
            if *beta < 0.0 || !beta.is_finite() {
                return Err(Error::invalid(Module::States, "beta", "inverse temperature must be finite and non-negative"));
            }
            let h = assemble(of)?;
            let e = linalg::eigh(&h)?;
            let ground = e.values[0];
            let z: f64 = e.values.iter().map(|x| (-beta * (x - ground)).exp()).sum();
            let m = e.reconstruct(|x| (-beta * (x - ground)).exp() / z);
            let m = linalg::scale(&linalg::add(&m, &linalg::adjoint(&m)), 0.5);
            Ok(State::Dense(DensityState::mixed(m, spins, d)?))
        }
        StateSpec::Binary { path } => {
            let file = std::fs::File::open(path)?;
            let m = hamiltonian::read_binary(std::io::BufReader::new(file))?;
            Ok(State::Dense(DensityState::mixed(m, spins, d)?))
        }
    }
}

pub fn write_state_binary<W: Write>(state: &DensityState, out: W) -> Result<()> {
    hamiltonian::write_binary(&state.matrix(), out)
}

pub fn read_state_binary<R: Read>(input: R, spins: usize, d: usize) -> Result<DensityState> {
    DensityState::mixed(hamiltonian::read_binary(input)?, spins, d)
}

/// Finite operator family used to probe correlations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum ProbeClass {
    /// Norm-one traceless Hermitian basis on each single site.
    SingleSiteBasis,
    /// Norm-one products of that basis (identity allowed, not all
    /// identity) on lattice-connected regions of at most `s_max` sites.
    ContiguousRegionBasis { s_max: usize },
}

impl ProbeClass {
    fn regions(&self, spec: &LatticeSpec) -> Result<Vec<Vec<usize>>> {
        let n = spec.site_count();
        let s_max = match self {
            ProbeClass::SingleSiteBasis => 1,
            ProbeClass::ContiguousRegionBasis { s_max } => *s_max,
        };
        if s_max == 0 || s_max > 2 {
            return Err(Error::invalid(Module::States, "s_max", "contiguous regions support 1 <= s_max <= 2"));
        }
        let sites = spec.sites();
        let mut out: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        if s_max == 2 {
            for a in 0..n {
                for b in a + 1..n {
                    if one_norm_distance(&sites[a], &sites[b])? == 1 {
                        out.push(vec![a, b]);
                    }
                }
            }
        }
        Ok(out)
    }

    fn operators(&self, d: usize, size: usize) -> Vec<CMat> {
        let single = linalg::normalized_traceless_basis(d);
        if size == 1 {
            return single;
        }
        let mut with_id = vec![linalg::identity(d)];
        with_id.extend(single);
        let mut out = Vec::new();
        for (i, a) in with_id.iter().enumerate() {
            for (j, b) in with_id.iter().enumerate() {
                if i + j > 0 {
                    out.push(linalg::kron(a, b));
                }
            }
        }
        out
    }
}

/// The operator pair achieving the largest covariance at one distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeWitness {
    pub region_a: Vec<usize>,
    pub operator_a: usize,
    pub region_b: Vec<usize>,
    pub operator_b: usize,
    pub distance: u32,
    pub covariance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCertificate {
    #[serde(rename = "C")]
    pub c: f64,
    pub l0: u32,
    pub sigma: f64,
    pub probe_class: ProbeClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayViolation {
    pub witness: ProbeWitness,
    pub allowed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum DecayVerdict {
    Certified(CorrelationCertificate),
    Violated(DecayViolation),
}

/// Absolute slack when comparing covariances with `C e^{-l/sigma}`.
pub const COVARIANCE_TOL: f64 = 1e-12;

/// Largest `|Tr(rho A⊗B) - Tr(rho A) Tr(rho B)|` over probe pairs with
/// disjoint regions, per distance `l >= 1`, ascending in `l`.
pub fn covariance_profile(state: &DensityState, spec: &LatticeSpec, class: ProbeClass) -> Result<Vec<ProbeWitness>> {
    if state.spin_count() != spec.site_count() || state.local_dim() != spec.d {
        return Err(Error::invalid(Module::States, "state", "state does not match the lattice"));
    }
    let d = spec.d;
    let regions = class.regions(spec)?;
    let geometry = Geometry::Lattice(*spec);
    let mut pairs = Vec::new();
    for (i, a) in regions.iter().enumerate() {
        for b in &regions[i + 1..] {
            if a.iter().any(|s| b.contains(s)) {
                continue;
            }
            let l = hamiltonian::operator_distance(a, b, &geometry)?;
            pairs.push((a.clone(), b.clone(), l));
        }
    }
    let ops: Vec<Vec<CMat>> = (0..=2).map(|s| if s == 0 { Vec::new() } else { class.operators(d, s) }).collect();
    let best: Vec<ProbeWitness> = pairs
        .par_iter()
        .map(|(a, b, l)| {
            let union: Vec<usize> = a.iter().chain(b).copied().collect::<BTreeSet<_>>().into_iter().collect();
            let rho = state.partial_trace(&union)?;
            let pos_a: Vec<usize> = a.iter().map(|s| union.binary_search(s).expect("in union")).collect();
            let pos_b: Vec<usize> = b.iter().map(|s| union.binary_search(s).expect("in union")).collect();
            let u = union.len();
            let emb_a: Vec<CMat> = ops[a.len()].iter().map(|op| linalg::embed(op, &pos_a, u, d)).collect();
            let emb_b: Vec<CMat> = ops[b.len()].iter().map(|op| linalg::embed(op, &pos_b, u, d)).collect();
            let mean_a: Vec<f64> = emb_a.iter().map(|x| linalg::trace_of_product(&rho, x).re).collect();
            let mean_b: Vec<f64> = emb_b.iter().map(|x| linalg::trace_of_product(&rho, x).re).collect();
            let mut witness = ProbeWitness {
                region_a: a.clone(),
                operator_a: 0,
                region_b: b.clone(),
                operator_b: 0,
                distance: *l,
                covariance: -1.0,
            };
            for (i, x) in emb_a.iter().enumerate() {
                let rx = &rho * x;
                for (j, y) in emb_b.iter().enumerate() {
                    let cov = (linalg::trace_of_product(&rx, y).re - mean_a[i] * mean_b[j]).abs();
                    if cov > witness.covariance {
                        witness.operator_a = i;
                        witness.operator_b = j;
                        witness.covariance = cov;
                    }
                }
            }
            Ok(witness)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut by_distance: std::collections::BTreeMap<u32, ProbeWitness> = std::collections::BTreeMap::new();
    for w in best {
        match by_distance.get(&w.distance) {
            Some(cur) if cur.covariance >= w.covariance => {}
            _ => {
                by_distance.insert(w.distance, w);
            }
        }
    }
    Ok(by_distance.into_values().collect())
}

/// Checks `cov <= C e^{-l/sigma}` on every probe pair at distance `l >= l0`.
pub fn certify_decay(
    state: &DensityState,
    spec: &LatticeSpec,
    c: f64,
    l0: u32,
    sigma: f64,
    class: ProbeClass,
) -> Result<DecayVerdict> {
    if !(c > 0.0 && sigma > 0.0 && l0 > 0) {
        return Err(Error::invalid(Module::States, "decay", "C, l0 and sigma must be positive"));
    }
    let profile = covariance_profile(state, spec, class)?;
    Ok(judge_profile(&profile, c, l0, sigma, class))
}

/// Certification from a precomputed profile.
pub fn judge_profile(profile: &[ProbeWitness], c: f64, l0: u32, sigma: f64, class: ProbeClass) -> DecayVerdict {
    let mut worst: Option<DecayViolation> = None;
    for w in profile.iter().filter(|w| w.distance >= l0) {
        let allowed = c * (-(w.distance as f64) / sigma).exp();
        let excess = w.covariance - allowed;
        if excess > COVARIANCE_TOL && worst.as_ref().is_none_or(|v| excess > v.witness.covariance - v.allowed) {
            worst = Some(DecayViolation {
                witness: w.clone(),
                allowed,
            });
        }
    }
    match worst {
        Some(v) => DecayVerdict::Violated(v),
        None => DecayVerdict::Certified(CorrelationCertificate {
            c,
            l0,
            sigma,
            probe_class: class,
        }),
    }
}

/// Least-squares fit of `ln cov = ln C - l / sigma` over `l >= l0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// `-1 / slope`; absent when the fitted slope is not negative.
    pub sigma: Option<f64>,
    /// Smallest `C` covering every fitted point at this `sigma`.
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub points: usize,
}

/// Covariances at or below this are treated as exact zeros and skipped.
pub const FIT_FLOOR: f64 = 1e-13;

pub fn fit_decay(profile: &[ProbeWitness], l0: u32) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .filter(|w| w.distance >= l0 && w.covariance > FIT_FLOOR)
        .map(|w| (w.distance as f64, w.covariance.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sigma = (slope < 0.0).then(|| -1.0 / slope);
    let c = sigma.map(|s| pts.iter().map(|&(l, y)| (y + l / s).exp()).fold(0.0, f64::max));
    Some(DecayFit {
        slope,
        intercept,
        sigma,
        c,
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{standard_model, ModelSpec};
    use crate::lattice::InteractionHypergraph;

    fn chain(l: u32) -> LatticeSpec {
        LatticeSpec::new(1, l, 0, 2).unwrap()
    }

    fn cat(spins: usize) -> DensityState {
        let g = Geometry::Lattice(chain(spins as u32 - 1));
        make_state(&StateSpec::Cat, &g, None, 0).unwrap().to_density().unwrap()
    }

    #[test]
    fn cat_two_qubits_matrix() {
        let m = cat(2).matrix();
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert!((m[(i, j)].re - 0.5).abs() < 1e-15);
        }
        assert_eq!(m[(1, 1)].re, 0.0);
    }

    #[test]
    fn cat_reduces_to_maximally_mixed_qubit() {
        let rho = cat(3);
        for s in 0..3 {
            let r = rho.partial_trace(&[s]).unwrap();
            assert!(linalg::max_abs_diff(&r, &linalg::scale(&linalg::identity(2), 0.5)) < 1e-15);
        }
        let all = rho.partial_trace(&[0, 1, 2]).unwrap();
        assert!(linalg::max_abs_diff(&all, &rho.matrix()) < 1e-15);
        assert!(rho.partial_trace(&[]).is_err());
    }

    #[test]
    fn product_partial_trace_recovers_factor() {
        let g = Geometry::Lattice(chain(2));
        let p = make_state(&StateSpec::RandomProduct { mixed: true }, &g, None, 5).unwrap();
        let prod = p.as_product().unwrap().clone();
        let dense = p.to_density().unwrap();
        assert!(matches!(dense.representation(), Representation::Mixed(_)));
        for s in 0..3 {
            let r = dense.partial_trace(&[s]).unwrap();
            assert!(linalg::max_abs_diff(&r, &prod.factors()[s]) < 1e-12);
        }
    }

    #[test]
    fn pure_products_stay_vectors() {
        let g = Geometry::Lattice(chain(3));
        let p = make_state(&StateSpec::Iid { p: 0.3, mixed: false }, &g, None, 0).unwrap();
        let dense = p.to_density().unwrap();
        assert!(matches!(dense.representation(), Representation::Pure(_)));
        let z = linalg::pauli_z();
        assert!((dense.expectation_local(&z, &[2]) - 0.4).abs() < 1e-12);
        assert!((p.expectation_local(&z, &[2]) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn gibbs_and_ground_states() {
        let g = Geometry::Hypergraph(InteractionHypergraph::new(3, vec![vec![0], vec![1], vec![2]], 2).unwrap());
        let h = standard_model(&ModelSpec::ClassicalField, &g, 0).unwrap();
        let hot = make_state(&StateSpec::Gibbs { beta: 0.0, of: None }, &g, Some(&h), 0).unwrap().to_density().unwrap();
        assert!(linalg::max_abs_diff(&hot.matrix(), &linalg::scale(&linalg::identity(8), 0.125)) < 1e-15);
        assert!(make_state(&StateSpec::Gibbs { beta: -1.0, of: None }, &g, Some(&h), 0).is_err());
        let ground = make_state(&StateSpec::Ground { of: None }, &g, Some(&h), 0).unwrap().to_density().unwrap();
        let Representation::Pure(psi) = ground.representation() else { panic!() };
        assert_eq!(psi[0].norm_sqr() * ground.scale(), 1.0);
        assert!(make_state(&StateSpec::Ground { of: None }, &g, None, 0).is_err());
        let spec: StateSpec = serde_json::from_str(r#"{"kind":"ground","of":{"model":"classical-field"}}"#).unwrap();
        let other = make_state(&spec, &g, None, 0).unwrap().to_density().unwrap();
        assert!(linalg::max_abs_diff(&other.matrix(), &ground.matrix()) < 1e-15);
    }

    #[test]
    fn centered_terms_have_zero_mean() {
        let g = Geometry::Lattice(chain(3));
        let h = standard_model(&ModelSpec::RandomPsd { real: false }, &g, 2).unwrap();
        let st = make_state(&StateSpec::RandomProduct { mixed: false }, &g, None, 9).unwrap();
        let dense = State::Dense(st.to_density().unwrap());
        for t in h.terms() {
            for s in [&st, &dense] {
                let ct = center(t, s);
                assert!(s.expectation_local(&ct.matrix(), ct.support()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn product_states_have_no_correlations() {
        let spec = chain(3);
        let g = Geometry::Lattice(spec);
        let st = make_state(&StateSpec::RandomProduct { mixed: true }, &g, None, 1).unwrap().to_density().unwrap();
        let profile = covariance_profile(&st, &spec, ProbeClass::ContiguousRegionBasis { s_max: 2 }).unwrap();
        assert!(profile.iter().all(|w| w.covariance < 1e-12));
        let v = certify_decay(&st, &spec, 1e-6, 1, 0.1, ProbeClass::SingleSiteBasis).unwrap();
        assert!(matches!(v, DecayVerdict::Certified(_)));
    }

    #[test]
    fn cat_correlations_do_not_decay() {
        let spec = chain(5);
        let rho = cat(6);
        let profile = covariance_profile(&rho, &spec, ProbeClass::SingleSiteBasis).unwrap();
        for w in &profile {
            // ⟨Z_i Z_j⟩ - ⟨Z_i⟩⟨Z_j⟩ = 1 on the cat state.
            assert!((w.covariance - 1.0).abs() < 1e-12, "{w:?}");
        }
        assert_eq!(profile[4].distance, 5);
        // With |1><1| probes the same covariance is 1/2 - 1/4.
        let p1 = linalg::basis_projector(2, 1);
        let both = linalg::kron(&p1, &p1);
        let cov = rho.expectation_local(&both, &[0, 5]) - rho.expectation_local(&p1, &[0]) * rho.expectation_local(&p1, &[5]);
        assert!((cov - 0.25).abs() < 1e-12);
        let v = certify_decay(&rho, &spec, 1.0, 1, 1.0, ProbeClass::SingleSiteBasis).unwrap();
        let DecayVerdict::Violated(v) = v else { panic!() };
        assert_eq!(v.witness.distance, 5);
    }

    #[test]
    fn certificates_are_monotone_in_c() {
        let spec = chain(5);
        let rho = cat(6);
        let profile = covariance_profile(&rho, &spec, ProbeClass::SingleSiteBasis).unwrap();
        for c in [0.5, 1.0, 2.0, 10.0] {
            let lo = judge_profile(&profile, c, 1, 100.0, ProbeClass::SingleSiteBasis);
            let hi = judge_profile(&profile, 2.0 * c, 1, 100.0, ProbeClass::SingleSiteBasis);
            if matches!(lo, DecayVerdict::Certified(_)) {
                assert!(matches!(hi, DecayVerdict::Certified(_)));
            }
        }
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let profile: Vec<ProbeWitness> = (1..6)
            .map(|l| ProbeWitness {
                region_a: vec![0],
                operator_a: 0,
                region_b: vec![l as usize],
                operator_b: 0,
                distance: l,
                covariance: 0.3 * (-(l as f64) / 1.5).exp(),
            })
            .collect();
        let fit = fit_decay(&profile, 1).unwrap();
        assert!((fit.sigma.unwrap() - 1.5).abs() < 1e-10);
        assert!((fit.c.unwrap() - 0.3).abs() < 1e-10);
    }

    #[test]
    fn binary_state_round_trip() {
        let rho = cat(2);
        let mut buf = Vec::new();
        write_state_binary(&rho, &mut buf).unwrap();
        let back = read_state_binary(buf.as_slice(), 2, 2).unwrap();
        assert!(linalg::max_abs_diff(&back.matrix(), &rho.matrix()) < 1e-15);
    }

    #[test]
    fn rejects_bad_factors() {
        let bad = linalg::scale(&linalg::identity(2), 0.6);
        assert!(ProductState::new(vec![bad]).is_err());
        let json = r#"{"kind":"iid","p":1.5}"#;
        let spec: StateSpec = serde_json::from_str(json).unwrap();
        assert!(make_state(&spec, &Geometry::Lattice(chain(1)), None, 0).is_err());
    }
}
