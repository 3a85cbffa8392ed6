//! Local Hamiltonians `H = sum_w h_w` with positive semi-definite terms of
//! norm at most one, assembled densely on the full register.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Module, Result};
use crate::lattice::{dual_interactions, support_indices, Geometry, LatticeSpec};
use crate::linalg::{self, c64, CMat};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-10;

/// A term `h_w` acting on `support` (ascending spin indices). The matrix
/// factors follow the support order, first support spin most significant.
#[derive(Debug, Clone)]
pub struct LocalTerm {
    support: Vec<usize>,
    matrix: CMat,
}

impl LocalTerm {
    /// Builds a term and checks it is Hermitian, PSD and of norm <= 1.
    pub fn new(support: Vec<usize>, matrix: CMat, d: usize) -> Result<Self> {
        let term = Self::unchecked(support, matrix);
        term.validate(d, "term")?;
        Ok(term)
    }

    pub(crate) fn unchecked(support: Vec<usize>, matrix: CMat) -> Self {
        LocalTerm { support, matrix }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn validate(&self, d: usize, label: &str) -> Result<()> {
        if self.support.is_empty() || self.support.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::invalid(Module::Hamiltonian, label, "support must be nonempty and strictly ascending"));
        }
        let dim = d.pow(self.support.len() as u32);
        if self.matrix.nrows() != dim || self.matrix.ncols() != dim {
            return Err(Error::invalid(
                Module::Hamiltonian,
                label,
                format!("matrix is {}x{}, support needs {dim}x{dim}", self.matrix.nrows(), self.matrix.ncols()),
            ));
        }
        let dev = linalg::hermitian_deviation(&self.matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::invalid(Module::Hamiltonian, label, format!("not Hermitian (deviation {dev:e})")));
        }
        let eig = linalg::eigvalsh(&self.matrix)?;
        let (lo, hi) = (eig[0], eig[eig.len() - 1]);
        if lo < -PSD_TOL {
            return Err(Error::invalid(
                Module::Hamiltonian,
                label,
                format!("not positive semi-definite (min eigenvalue {lo:e}); see --shift-to-psd"),
            ));
        }
        if hi > 1.0 + NORM_TOL {
            return Err(Error::invalid(Module::Hamiltonian, label, format!("operator norm {hi} exceeds 1")));
        }
        Ok(())
    }

    /// `I - h`.
    pub fn complement(&self) -> LocalTerm {
        let n = self.matrix.nrows();
        LocalTerm {
            support: self.support.clone(),
            matrix: linalg::sub(&linalg::identity(n), &self.matrix),
        }
    }
}

/// `(h + ||h|| I) / (2 ||h||)`: maps any Hermitian `h` to a PSD matrix of
/// norm at most one with the same eigenvectors.
pub fn shift_to_psd(h: &CMat) -> Result<CMat> {
    let norm = linalg::hermitian_norm(h)?;
    if norm == 0.0 {
        return Ok(h.clone());
    }
    let n = h.nrows();
    Ok(linalg::scale(&linalg::add(h, &linalg::scale(&linalg::identity(n), norm)), 0.5 / norm))
}

/// `g_w = h_w - offset * I`, where `offset` is the expectation of `h_w` in
/// the state the term was centred against.
#[derive(Debug, Clone)]
pub struct CenteredTerm {
    pub base: LocalTerm,
    pub offset: f64,
}

impl CenteredTerm {
    pub fn matrix(&self) -> CMat {
        let n = self.base.matrix.nrows();
        linalg::sub(&self.base.matrix, &linalg::scale(&linalg::identity(n), self.offset))
    }

    pub fn support(&self) -> &[usize] {
        &self.base.support
    }
}

#[derive(Debug, Clone)]
pub struct LocalHamiltonian {
    geometry: Geometry,
    terms: Vec<LocalTerm>,
}

impl LocalHamiltonian {
    /// Terms are matched to interactions (or hypergraph terms) by position.
    pub fn new(geometry: Geometry, terms: Vec<LocalTerm>) -> Result<Self> {
        let expected = geometry.term_count();
        if terms.len() != expected {
            return Err(Error::invalid(
                Module::Hamiltonian,
                "terms",
                format!("{} terms given, geometry has {expected}", terms.len()),
            ));
        }
        let supports = geometry.term_supports()?;
        let d = geometry.local_dim();
        for (i, (term, allowed)) in terms.iter().zip(&supports).enumerate() {
            let label = format!("terms[{i}]");
            term.validate(d, &label)?;
            let ok = match geometry {
                Geometry::Lattice(_) => term.support.iter().all(|s| allowed.binary_search(s).is_ok()),
                Geometry::Hypergraph(_) => &term.support == allowed,
            };
            if !ok {
                return Err(Error::invalid(
                    Module::Hamiltonian,
                    label,
                    format!("support {:?} does not fit interaction support {allowed:?}", term.support),
                ));
            }
        }
        Ok(LocalHamiltonian { geometry, terms })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn terms(&self) -> &[LocalTerm] {
        &self.terms
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn spin_count(&self) -> usize {
        self.geometry.spin_count()
    }

    pub fn local_dim(&self) -> usize {
        self.geometry.local_dim()
    }

    pub fn total_dim(&self) -> Result<usize> {
        linalg::checked_dim(self.local_dim(), self.spin_count())
    }

    /// Dense `sum_w h_w` with identity padding.
    pub fn assemble(&self) -> Result<CMat> {
        let dim = self.total_dim()?;
        let mut h = linalg::zeros(dim);
        for term in &self.terms {
            linalg::add_embedded(&mut h, &term.matrix, &term.support, self.spin_count(), self.local_dim());
        }
        Ok(h)
    }

    /// Assembles in a caller-chosen term order.
    pub fn assemble_in_order(&self, order: &[usize]) -> Result<CMat> {
        let dim = self.total_dim()?;
        let mut h = linalg::zeros(dim);
        for &i in order {
            let term = &self.terms[i];
            linalg::add_embedded(&mut h, &term.matrix, &term.support, self.spin_count(), self.local_dim());
        }
        Ok(h)
    }

    /// `H' = sum_w (I - h_w)`, whose spectrum is `n - spec(H)`.
    pub fn complement(&self) -> LocalHamiltonian {
        LocalHamiltonian {
            geometry: self.geometry.clone(),
            terms: self.terms.iter().map(LocalTerm::complement).collect(),
        }
    }

    /// True when every term carries the same matrix.
    pub fn is_translation_invariant(&self) -> bool {
        self.terms.windows(2).all(|p| {
            p[0].matrix.nrows() == p[1].matrix.nrows() && linalg::max_abs_diff(&p[0].matrix, &p[1].matrix) == 0.0
        })
    }
}

/// Minimum site distance between the supports of two terms on a lattice.
/// Overlapping supports give 0.
pub fn operator_distance(a: &[usize], b: &[usize], geometry: &Geometry) -> Result<u32> {
    let Geometry::Lattice(spec) = geometry else {
        return Err(Error::invalid(Module::Hamiltonian, "geometry", "operator distance needs a lattice geometry"));
    };
    let sites = spec.sites();
    let mut best = u32::MAX;
    for &x in a {
        for &y in b {
            let dist = crate::lattice::one_norm_distance(&sites[x], &sites[y])?;
            best = best.min(dist);
        }
    }
    if best == u32::MAX {
        return Err(Error::invalid(Module::Hamiltonian, "support", "empty support"));
    }
    Ok(best)
}

/// Test-model factory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelSpec {
    /// Each term is the average of `|1><1|` over its support.
    ClassicalField,
    /// `-J <ZZ> - h <X>` per term, averaged over nearest-neighbour pairs
    /// and sites of the support, then shifted into `[0, 1]`.
    TransverseIsing {
        #[serde(default = "one")]
        coupling: f64,
        #[serde(default = "one")]
        field: f64,
    },
    /// `G G^† / ||G G^†||` for Gaussian `G`, from the experiment seed.
    RandomPsd {
        #[serde(default)]
        real: bool,
    },
}

fn one() -> f64 {
    1.0
}

/// Nearest-neighbour pairs inside a support: lattice neighbours, or
/// consecutive spins of a hypergraph term.
fn support_pairs(support: &[usize], geometry: &Geometry) -> Vec<(usize, usize)> {
    match geometry {
        Geometry::Lattice(spec) => {
            let sites = spec.sites();
            let mut pairs = Vec::new();
            for (i, &a) in support.iter().enumerate() {
                for &b in &support[i + 1..] {
                    if crate::lattice::one_norm_distance(&sites[a], &sites[b]).ok() == Some(1) {
                        pairs.push((a, b));
                    }
                }
            }
            pairs
        }
        Geometry::Hypergraph(_) => support.windows(2).map(|p| (p[0], p[1])).collect(),
    }
}

fn local_position(support: &[usize], spin: usize) -> usize {
    support.binary_search(&spin).expect("spin in support")
}

pub fn standard_model(model: &ModelSpec, geometry: &Geometry, seed: u64) -> Result<LocalHamiltonian> {
    let d = geometry.local_dim();
    let supports = geometry.term_supports()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::with_capacity(supports.len());
    for support in supports {
        let s = support.len();
        let local = d.pow(s as u32);
        let matrix = match model {
            ModelSpec::ClassicalField => {
                let mut m = linalg::zeros(local);
                for pos in 0..s {
                    linalg::add_embedded(&mut m, &linalg::basis_projector(d, 1), &[pos], s, d);
                }
                linalg::scale(&m, 1.0 / s as f64)
            }
            ModelSpec::TransverseIsing { coupling, field } => {
                if d != 2 {
                    return Err(Error::invalid(Module::Hamiltonian, "model", "transverse-ising needs qubits (d = 2)"));
                }
                let mut raw = linalg::zeros(local);
                let pairs = support_pairs(&support, geometry);
                let zz = linalg::kron(&linalg::pauli_z(), &linalg::pauli_z());
                for &(a, b) in &pairs {
                    let pos = [local_position(&support, a), local_position(&support, b)];
                    let piece = linalg::embed(&zz, &pos, s, d);
                    raw = linalg::sub(&raw, &linalg::scale(&piece, coupling / pairs.len() as f64));
                }
                for pos in 0..s {
                    let piece = linalg::embed(&linalg::pauli_x(), &[pos], s, d);
                    raw = linalg::sub(&raw, &linalg::scale(&piece, field / s as f64));
                }
                shift_to_psd(&raw)?
            }
            ModelSpec::RandomPsd { real } => {
                let g = faer::Mat::from_fn(local, local, |_, _| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = if *real { 0.0 } else { StandardNormal.sample(&mut rng) };
                    c64::new(re, im)
                });
                let a = &g * linalg::adjoint(&g);
                let a = linalg::scale(&linalg::add(&a, &linalg::adjoint(&a)), 0.5);
                let norm = linalg::hermitian_norm(&a)?;
                linalg::scale(&a, 1.0 / norm)
            }
        };
        terms.push(LocalTerm::unchecked(support, matrix));
    }
    LocalHamiltonian::new(geometry.clone(), terms)
}

/// JSON term: support plus row-major `[re, im]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub support: Vec<usize>,
    pub matrix: Vec<[f64; 2]>,
}

impl TermJson {
    pub fn to_matrix(&self) -> Result<CMat> {
        let len = self.matrix.len();
        let n = (len as f64).sqrt().round() as usize;
        if n * n != len {
            return Err(Error::invalid(Module::Hamiltonian, "matrix", format!("{len} entries do not form a square matrix")));
        }
        Ok(faer::Mat::from_fn(n, n, |i, j| {
            let [re, im] = self.matrix[i * n + j];
            c64::new(re, im)
        }))
    }

    pub fn from_term(term: &LocalTerm) -> Self {
        let m = term.matrix();
        let n = m.nrows();
        TermJson {
            support: term.support().to_vec(),
            matrix: (0..n * n).map(|k| [m[(k / n, k % n)].re, m[(k / n, k % n)].im]).collect(),
        }
    }
}

/// Either a named model or explicit terms, one per interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HamiltonianSpec {
    Model(ModelSpec),
    Explicit { terms: Vec<TermJson> },
}

impl HamiltonianSpec {
    /// `shift` applies [`shift_to_psd`] to every explicit term first.
    pub fn build(&self, geometry: &Geometry, seed: u64, shift: bool) -> Result<LocalHamiltonian> {
        match self {
            HamiltonianSpec::Model(model) => standard_model(model, geometry, seed),
            HamiltonianSpec::Explicit { terms } => {
                let terms = terms
                    .iter()
                    .map(|t| {
                        let m = t.to_matrix()?;
                        let m = if shift { shift_to_psd(&m)? } else { m };
                        Ok(LocalTerm::unchecked(t.support.clone(), m))
                    })
                    .collect::<Result<Vec<_>>>()?;
                LocalHamiltonian::new(geometry.clone(), terms)
            }
        }
    }
}

/// Row-major little-endian f64 `re, im` pairs, no header.
pub fn write_binary<W: Write>(m: &CMat, mut out: W) -> Result<()> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut buf = Vec::with_capacity(rows * cols * 16);
    for i in 0..rows {
        for j in 0..cols {
            buf.extend_from_slice(&m[(i, j)].re.to_le_bytes());
            buf.extend_from_slice(&m[(i, j)].im.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Reads a square matrix written by [`write_binary`].
pub fn read_binary<R: Read>(mut input: R) -> Result<CMat> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % 16 != 0 {
        return Err(Error::invalid(Module::Hamiltonian, "binary", "length is not a multiple of 16 bytes"));
    }
    let count = bytes.len() / 16;
    let n = (count as f64).sqrt().round() as usize;
    if n * n != count {
        return Err(Error::invalid(Module::Hamiltonian, "binary", format!("{count} entries do not form a square matrix")));
    }
    let value = |k: usize| f64::from_le_bytes(bytes[k * 8..k * 8 + 8].try_into().expect("8 bytes"));
    Ok(faer::Mat::from_fn(n, n, |i, j| {
        let k = i * n + j;
        c64::new(value(2 * k), value(2 * k + 1))
    }))
}

/// Lattice supports of every interaction, for callers that build terms by
/// hand.
pub fn lattice_supports(spec: &LatticeSpec) -> Result<Vec<Vec<usize>>> {
    dual_interactions(spec).iter().map(|w| support_indices(w, spec)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::InteractionHypergraph;

    fn singletons(n: usize) -> Geometry {
        Geometry::Hypergraph(InteractionHypergraph::new(n, (0..n).map(|i| vec![i]).collect(), 2).unwrap())
    }

    #[test]
    fn single_term_embeds_as_itself() {
        let h = standard_model(&ModelSpec::ClassicalField, &singletons(1), 0).unwrap();
        let m = h.assemble().unwrap();
        assert_eq!(linalg::max_abs_diff(&m, &linalg::basis_projector(2, 1)), 0.0);
    }

    #[test]
    fn classical_field_is_hamming_weight() {
        let h = standard_model(&ModelSpec::ClassicalField, &singletons(4), 0).unwrap();
        let m = h.assemble().unwrap();
        for i in 0..16usize {
            for j in 0..16usize {
                let want = if i == j { i.count_ones() as f64 } else { 0.0 };
                assert_eq!(m[(i, j)], c64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn classical_field_three_spins_has_binomial_multiplicities() {
        let h = standard_model(&ModelSpec::ClassicalField, &singletons(3), 0).unwrap();
        let eig = linalg::eigvalsh(&h.assemble().unwrap()).unwrap();
        let counts: Vec<usize> = (0..4).map(|f| eig.iter().filter(|&&x| (x - f as f64).abs() < 1e-12).count()).collect();
        assert_eq!(counts, vec![1, 3, 3, 1]);
    }

    #[test]
    fn complement_is_involution_and_reflects_spectrum() {
        let g = Geometry::Hypergraph(InteractionHypergraph::chain(4, 2, 2).unwrap());
        let h = standard_model(&ModelSpec::RandomPsd { real: false }, &g, 7).unwrap();
        let twice = h.complement().complement();
        for (a, b) in h.terms().iter().zip(twice.terms()) {
            assert!(linalg::max_abs_diff(a.matrix(), b.matrix()) < 1e-15);
        }
        let n = h.term_count() as f64;
        let hm = h.assemble().unwrap();
        let hp = h.complement().assemble().unwrap();
        let want = linalg::sub(&linalg::scale(&linalg::identity(hm.nrows()), n), &hm);
        assert!(linalg::max_abs_diff(&hp, &want) < 1e-10);
        let mut a = linalg::eigvalsh(&hm).unwrap();
        let b = linalg::eigvalsh(&hp).unwrap();
        a.iter_mut().for_each(|x| *x = n - *x);
        a.reverse();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_terms_complement_to_n_identity() {
        let g = singletons(2);
        let terms = (0..2).map(|i| LocalTerm::unchecked(vec![i], linalg::zeros(2))).collect();
        let h = LocalHamiltonian::new(g, terms).unwrap().complement();
        let m = h.assemble().unwrap();
        assert_eq!(linalg::max_abs_diff(&m, &linalg::scale(&linalg::identity(4), 2.0)), 0.0);
    }

    #[test]
    fn models_respect_term_constraints() {
        let spec = LatticeSpec::new(1, 5, 0, 2).unwrap();
        let g = Geometry::Lattice(spec);
        for model in [
            ModelSpec::ClassicalField,
            ModelSpec::TransverseIsing { coupling: 1.0, field: 3.0 },
            ModelSpec::RandomPsd { real: true },
        ] {
            let h = standard_model(&model, &g, 3).unwrap();
            for t in h.terms() {
                let norm = linalg::hermitian_norm(t.matrix()).unwrap();
                assert!(norm <= 1.0 + NORM_TOL);
            }
        }
    }

    #[test]
    fn random_models_are_deterministic() {
        let g = Geometry::Hypergraph(InteractionHypergraph::chain(3, 2, 2).unwrap());
        let a = standard_model(&ModelSpec::RandomPsd { real: false }, &g, 11).unwrap();
        let b = standard_model(&ModelSpec::RandomPsd { real: false }, &g, 11).unwrap();
        let c = standard_model(&ModelSpec::RandomPsd { real: false }, &g, 12).unwrap();
        assert_eq!(linalg::max_abs_diff(&a.assemble().unwrap(), &b.assemble().unwrap()), 0.0);
        assert!(linalg::max_abs_diff(&a.assemble().unwrap(), &c.assemble().unwrap()) > 0.0);
    }

    #[test]
    fn rejects_non_psd_and_oversized_terms() {
        let g = singletons(1);
        let err = LocalHamiltonian::new(g.clone(), vec![LocalTerm::unchecked(vec![0], linalg::pauli_z())]).unwrap_err();
        assert!(err.to_string().contains("terms[0]"));
        let big = linalg::scale(&linalg::identity(2), 1.5);
        assert!(LocalHamiltonian::new(g.clone(), vec![LocalTerm::unchecked(vec![0], big)]).is_err());
        let shifted = shift_to_psd(&linalg::pauli_z()).unwrap();
        assert!(LocalHamiltonian::new(g, vec![LocalTerm::unchecked(vec![0], shifted)]).is_ok());
    }

    #[test]
    fn rejects_support_outside_interaction() {
        let spec = LatticeSpec::new(1, 3, 0, 2).unwrap();
        let mut terms: Vec<LocalTerm> = lattice_supports(&spec)
            .unwrap()
            .into_iter()
            .map(|s| LocalTerm::unchecked(s, linalg::zeros(4)))
            .collect();
        terms[0] = LocalTerm::unchecked(vec![0, 2], linalg::zeros(4));
        assert!(LocalHamiltonian::new(Geometry::Lattice(spec), terms).is_err());
    }

    #[test]
    fn operator_distances() {
        let spec = LatticeSpec::new(1, 4, 0, 2).unwrap();
        let g = Geometry::Lattice(spec);
        assert_eq!(operator_distance(&[0, 1], &[0, 1], &g).unwrap(), 0);
        assert_eq!(operator_distance(&[0, 1], &[3, 4], &g).unwrap(), 2);
        assert!(operator_distance(&[0], &[1], &singletons(2)).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let g = Geometry::Hypergraph(InteractionHypergraph::chain(3, 2, 2).unwrap());
        let m = standard_model(&ModelSpec::RandomPsd { real: false }, &g, 1).unwrap().assemble().unwrap();
        let mut buf = Vec::new();
        write_binary(&m, &mut buf).unwrap();
        assert_eq!(buf.len(), 64 * 16);
        assert_eq!(&buf[16..24], &m[(0, 1)].re.to_le_bytes());
        let back = read_binary(buf.as_slice()).unwrap();
        assert_eq!(linalg::max_abs_diff(&m, &back), 0.0);
    }

    #[test]
    fn explicit_terms_from_json() {
        let text = r#"{ "terms": [ { "support": [0], "matrix": [[0,0],[0,0],[0,0],[1,0]] } ] }"#;
        let spec: HamiltonianSpec = serde_json::from_str(text).unwrap();
        let h = spec.build(&singletons(1), 0, false).unwrap();
        assert_eq!(h.assemble().unwrap()[(1, 1)], c64::new(1.0, 0.0));
        let model: HamiltonianSpec = serde_json::from_str(r#"{ "model": "transverse-ising", "field": 2.0 }"#).unwrap();
        assert_eq!(model, HamiltonianSpec::Model(ModelSpec::TransverseIsing { coupling: 1.0, field: 2.0 }));
    }
}
