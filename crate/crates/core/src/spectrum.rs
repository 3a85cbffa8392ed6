//! Energy distributions `Tr(rho Π_f)`, tail weights, central moments and
//! Markov's inequality.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::combinatorics::{for_each_tuple, satisfies_q, OrderedTuple};
use crate::error::{Error, Module, Result};
use crate::hamiltonian::LocalHamiltonian;
use crate::lattice::InteractionHypergraph;
use crate::linalg::{self, c64, CMat, Placement};
use crate::states::{DensityState, ProductState, Representation};

pub const R_MAX_CAP: usize = 32;
/// Relative agreement required between the two moment routes.
pub const MOMENT_AGREEMENT: f64 = 1e-8;
pub const TUPLE_CAP: u128 = 1_000_000;
/// Levels this light are eigensolver noise and are left out of CSV rows.
pub const CSV_WEIGHT_FLOOR: f64 = 1e-14;

/// Per-eigenvector spectral data of `H` weighted by `rho`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// `<u_k|rho|u_k>`.
    pub weights: Vec<f64>,
}

impl SpectralData {
    pub fn new(state: &DensityState, h: &CMat) -> Result<Self> {
        if h.nrows() != state.dim() {
            return Err(Error::DimensionMismatch { expected: state.dim(), found: h.nrows() });
        }
        let eig = linalg::eigh(h)?;
        let weights = match state.representation() {
            Representation::Pure(psi) => eig.overlaps(psi).into_iter().map(|w| w * state.scale()).collect(),
            Representation::Mixed(m) => eig.diagonal_of(m),
        };
        Ok(SpectralData { values: eig.values, weights })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }

    /// `sum_k w_k (f_k - mean)^r`.
    pub fn central_moment(&self, mean: f64, r: usize) -> f64 {
        self.values.iter().zip(&self.weights).map(|(f, w)| w * (f - mean).powi(r as i32)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub f: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Geq,
    Leq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyDistribution {
    pub levels: Vec<Level>,
    pub cluster_tol: f64,
}

impl EnergyDistribution {
    /// Eigenvalues closer than `cluster_tol` to their predecessor join its
    /// level; a level sits at the mean of its eigenvalues.
    pub fn from_spectral(data: &SpectralData, cluster_tol: f64) -> Self {
        let mut levels: Vec<Level> = Vec::new();
        let mut members = 0usize;
        let mut sum = 0.0;
        let mut prev = f64::NEG_INFINITY;
        for (&f, &w) in data.values.iter().zip(&data.weights) {
            if f - prev > cluster_tol || levels.is_empty() {
                if let Some(last) = levels.last_mut() {
                    last.f = sum / members as f64;
                }
                levels.push(Level { f, weight: 0.0 });
                members = 0;
                sum = 0.0;
            }
            let last = levels.last_mut().expect("nonempty");
            last.weight += w;
            members += 1;
            sum += f;
            prev = f;
        }
        if let Some(last) = levels.last_mut() {
            last.f = sum / members as f64;
        }
        EnergyDistribution { levels, cluster_tol }
    }

    pub fn total_weight(&self) -> f64 {
        self.levels.iter().map(|l| l.weight).sum()
    }

    pub fn mean(&self) -> f64 {
        self.levels.iter().map(|l| l.f * l.weight).sum()
    }

    /// Weight of levels with `f >= threshold` (or `<=`), compared exactly.
    pub fn tail_weight(&self, threshold: f64, side: Side) -> f64 {
        self.levels
            .iter()
            .filter(|l| match side {
                Side::Geq => l.f >= threshold,
                Side::Leq => l.f <= threshold,
            })
            .map(|l| l.weight)
            .sum::<f64>()
            + 0.0
    }

    /// Like [`Self::tail_weight`], but levels within `cluster_tol` of the
    /// threshold also count. Never smaller than the exact tail.
    pub fn tail_weight_inclusive(&self, threshold: f64, side: Side) -> f64 {
        match side {
            Side::Geq => self.tail_weight(threshold - self.cluster_tol, side),
            Side::Leq => self.tail_weight(threshold + self.cluster_tol, side),
        }
    }

    /// Columns `f, weight, cumulative_geq, cumulative_leq`, one row per
    /// level with weight above [`CSV_WEIGHT_FLOOR`]. Cumulative columns
    /// still include every level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("f,weight,cumulative_geq,cumulative_leq\n");
        let total = self.levels.len();
        let mut leq = 0.0;
        let mut geq: Vec<f64> = vec![0.0; total];
        let mut acc = 0.0;
        for i in (0..total).rev() {
            acc += self.levels[i].weight;
            geq[i] = acc;
        }
        for (i, l) in self.levels.iter().enumerate() {
            leq += l.weight;
            if l.weight <= CSV_WEIGHT_FLOOR {
                continue;
            }
            out.push_str(&format!("{},{},{},{}\n", fmt_num(l.f), fmt_num(l.weight), fmt_num(geq[i]), fmt_num(leq)));
        }
        out
    }
}

/// Shortest round-trip form (exponent notation for extreme magnitudes),
/// with `-0` printed as `0`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_finite() {
        let s = serde_json::to_string(&x).expect("finite float");
        s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
    } else {
        format!("{x}")
    }
}

pub fn default_cluster_tol(n: usize) -> f64 {
    1e-9 * (n.max(1) as f64)
}

pub fn energy_distribution(state: &DensityState, h: &LocalHamiltonian, cluster_tol: Option<f64>) -> Result<EnergyDistribution> {
    let data = SpectralData::new(state, &h.assemble()?)?;
    Ok(EnergyDistribution::from_spectral(&data, cluster_tol.unwrap_or_else(|| default_cluster_tol(h.term_count()))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub mean: f64,
    /// `r -> Tr(rho (H - mean)^r)` for even `r`.
    pub central_moments: BTreeMap<usize, f64>,
}

impl MomentTable {
    pub fn get(&self, r: usize) -> Result<f64> {
        if r % 2 == 1 || r == 0 {
            return Err(Error::OddOrder(r));
        }
        self.central_moments
            .get(&r)
            .copied()
            .ok_or_else(|| Error::Precondition(format!("moment of order {r} was not computed")))
    }
}

fn check_r_max(r_max: usize) -> Result<()> {
    if r_max % 2 == 1 || r_max == 0 {
        return Err(Error::OddOrder(r_max));
    }
    if r_max > R_MAX_CAP {
        return Err(Error::invalid(Module::Spectrum, "r_max", format!("at most {R_MAX_CAP}")));
    }
    Ok(())
}

/// Moments from the eigendecomposition only.
pub fn spectral_moments(data: &SpectralData, r_max: usize) -> Result<MomentTable> {
    check_r_max(r_max)?;
    let mean = data.mean();
    let central_moments = (2..=r_max).step_by(2).map(|r| (r, data.central_moment(mean, r))).collect();
    Ok(MomentTable { mean, central_moments })
}

/// Moments `Tr(rho M^r)`, `M = H - mean I`, by repeated multiplication.
pub fn matrix_power_moments(state: &DensityState, h: &CMat, mean: f64, r_max: usize) -> Result<BTreeMap<usize, f64>> {
    check_r_max(r_max)?;
    let dim = h.nrows();
    let m = linalg::sub(h, &linalg::scale(&linalg::identity(dim), mean));
    let mut out = BTreeMap::new();
    match state.representation() {
        Representation::Pure(psi) => {
            // Even moments as ||M^{r/2} psi||^2.
            let mut v = psi.clone();
            for half in 1..=r_max / 2 {
                v = linalg::mat_vec(&m, &v);
                out.insert(2 * half, state.scale() * v.iter().map(|x| x.norm_sqr()).sum::<f64>());
            }
        }
        Representation::Mixed(rho) => {
            let mut p = rho.clone();
            for k in 1..=r_max {
                p = &m * &p;
                if k % 2 == 0 {
                    out.insert(k, linalg::trace(&p).re);
                }
            }
        }
    }
    Ok(out)
}

/// Central moments by both routes; errors if they disagree.
pub fn central_moments(state: &DensityState, h: &LocalHamiltonian, r_max: usize) -> Result<MomentTable> {
    let hm = h.assemble()?;
    let data = SpectralData::new(state, &hm)?;
    central_moments_with(state, &hm, &data, r_max)
}

pub fn central_moments_with(state: &DensityState, hm: &CMat, data: &SpectralData, r_max: usize) -> Result<MomentTable> {
    let table = spectral_moments(data, r_max)?;
    let power = matrix_power_moments(state, hm, table.mean, r_max)?;
    let spread = data
        .values
        .iter()
        .map(|f| (f - table.mean).abs())
        .fold(1.0, f64::max);
    for (&r, &spec) in &table.central_moments {
        let pw = power[&r];
        let floor = 1e-12 * spread.powi(r as i32);
        if (spec - pw).abs() > MOMENT_AGREEMENT * spec.abs().max(pw.abs()) + floor {
            return Err(Error::Inconsistent(format!(
                "moment r = {r}: spectral {spec:e} vs matrix-power {pw:e}"
            )));
        }
    }
    Ok(table)
}

/// `Tr(rho (H - mean)^r) / a^r`.
pub fn markov_tail_bound(table: &MomentTable, a: f64, r: usize) -> Result<f64> {
    if a.is_nan() || a <= 0.0 {
        return Err(Error::invalid(Module::Spectrum, "a", "must be positive"));
    }
    Ok(table.get(r)? / a.powi(r as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TupleMode {
    /// Skips tuples failing property Q.
    Filtered,
    /// Evaluates every tuple and records the ones Q would drop.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleExpansion {
    pub r: usize,
    pub sum: f64,
    pub evaluated: u64,
    pub skipped: u64,
    /// Largest `|Tr(rho g_{w1} ... g_{wr})|` among Q-tuples.
    pub max_abs_term: f64,
    /// `max(c, 1 - c)^r` when all terms and offsets coincide.
    pub uniform_term_bound: Option<f64>,
    /// Values of non-Q tuples (full mode only).
    pub dropped_values: Vec<f64>,
}

/// `sum_{w1..wr} Tr(rho g_{w1} ... g_{wr})` for a product state.
pub fn tuple_moment_expansion(state: &ProductState, h: &LocalHamiltonian, r: usize, mode: TupleMode) -> Result<TupleExpansion> {
    if r == 0 {
        return Err(Error::OddOrder(r));
    }
    let n = h.term_count();
    let space = (n as u128).checked_pow(r as u32).unwrap_or(u128::MAX);
    if space > TUPLE_CAP {
        return Err(Error::Infeasible { space, cap: TUPLE_CAP });
    }
    if state.spin_count() != h.spin_count() || state.local_dim() != h.local_dim() {
        return Err(Error::invalid(Module::Spectrum, "state", "product state does not match the Hamiltonian"));
    }
    let d = h.local_dim();
    let supports: Vec<Vec<usize>> = h.terms().iter().map(|t| t.support().to_vec()).collect();
    let graph = InteractionHypergraph::new(h.spin_count(), supports.clone(), d)?;
    let centered: Vec<CMat> = h
        .terms()
        .iter()
        .map(|t| {
            let c = state.expectation_local(t.matrix(), t.support());
            linalg::sub(t.matrix(), &linalg::scale(&linalg::identity(t.matrix().nrows()), c))
        })
        .collect();
    let offsets: Vec<f64> = h.terms().iter().map(|t| state.expectation_local(t.matrix(), t.support())).collect();
    let uniform = h.is_translation_invariant() && offsets.windows(2).all(|p| (p[0] - p[1]).abs() < 1e-14);
    let uniform_term_bound = uniform.then(|| offsets[0].max(1.0 - offsets[0]).powi(r as i32));

    let mut out = TupleExpansion {
        r,
        sum: 0.0,
        evaluated: 0,
        skipped: 0,
        max_abs_term: 0.0,
        uniform_term_bound,
        dropped_values: Vec::new(),
    };
    let pure = state.pure_factors()?;
    let mut failure = None;
    for_each_tuple(n, r, &[], |tuple| {
        if failure.is_some() {
            return;
        }
        let q = satisfies_q(&graph, &OrderedTuple(tuple.to_vec()));
        if !q && mode == TupleMode::Filtered {
            out.skipped += 1;
            return;
        }
        match tuple_value(state, pure.as_deref(), &supports, &centered, tuple, d) {
            Ok(v) => {
                out.sum += v;
                out.evaluated += 1;
                if q {
                    out.max_abs_term = out.max_abs_term.max(v.abs());
                } else {
                    out.skipped += 1;
                    out.dropped_values.push(v);
                }
            }
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// `Tr(rho_U g_{w1} ... g_{wr})` on the union `U` of the tuple's supports,
/// as `<psi_U| g_{w1} ... g_{wr} |psi_U>` when every factor is pure.
fn tuple_value(
    state: &ProductState,
    pure: Option<&[Vec<c64>]>,
    supports: &[Vec<usize>],
    centered: &[CMat],
    tuple: &[usize],
    d: usize,
) -> Result<f64> {
    let mut union: Vec<usize> = tuple.iter().flat_map(|&w| supports[w].iter().copied()).collect();
    union.sort_unstable();
    union.dedup();
    let u = union.len();
    linalg::checked_dim(d, u)?;
    let place = |w: usize| {
        let pos: Vec<usize> = supports[w].iter().map(|s| union.binary_search(s).expect("in union")).collect();
        Placement::new(&pos, u, d)
    };
    if let Some(vectors) = pure {
        let mut psi = vec![c64::new(1.0, 0.0)];
        for &s in &union {
            psi = psi.iter().flat_map(|a| vectors[s].iter().map(move |b| a * b)).collect();
        }
        let mut v = psi.clone();
        for &w in tuple.iter().rev() {
            v = linalg::apply_to_vector(&centered[w], &place(w), &v);
        }
        return Ok(linalg::inner(&psi, &v).re);
    }
    let mut x = state.reduced(&union);
    for &w in tuple.iter().rev() {
        x = linalg::apply_to_matrix(&centered[w], &place(w), &x);
    }
    let tr: c64 = linalg::trace(&x);
    Ok(tr.re)
}

/// Moments as pretty JSON.
pub fn moments_json(table: &MomentTable) -> Result<String> {
    Ok(serde_json::to_string_pretty(table)?)
}
