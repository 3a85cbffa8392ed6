//! Hypercubic lattices, their dual lattice of interactions, and general
//! bounded-degree interaction hypergraphs.
//!
//! Sites are integer vectors in `[0, L]^D`. Interactions sit on the dual
//! lattice of half-integer points strictly inside `(0, L)^D`; an interaction
//! is stored by the integer parts `c_i` of its coordinates `w_i = c_i + 1/2`,
//! so every distance in this module is computed exactly in integers.
//!
//! Sites are numbered lexicographically with the first coordinate most
//! significant. The tensor-product basis of the full Hilbert space follows
//! the same order: site 0 is the leftmost factor.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Module, Result};

/// A lattice site `v` with `0 <= v_i <= L`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Site(pub Vec<u32>);

/// A dual-lattice point `w` with coordinates `c_i + 1/2`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interaction {
    half_coords: Vec<u32>,
}

impl Interaction {
    /// Builds the interaction whose i-th coordinate is `half_coords[i] + 1/2`.
    pub fn from_floor(half_coords: Vec<u32>) -> Self {
        Interaction { half_coords }
    }

    /// Integer parts `c_i` of the coordinates.
    pub fn floor_coords(&self) -> &[u32] {
        &self.half_coords
    }

    pub fn coords(&self) -> Vec<f64> {
        self.half_coords.iter().map(|&c| c as f64 + 0.5).collect()
    }

    pub fn dim(&self) -> usize {
        self.half_coords.len()
    }
}

impl Site {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Anything with integer-offset coordinates on a common grid.
pub trait GridPoint {
    fn grid(&self) -> &[u32];
}

impl GridPoint for Site {
    fn grid(&self) -> &[u32] {
        &self.0
    }
}

impl GridPoint for Interaction {
    fn grid(&self) -> &[u32] {
        &self.half_coords
    }
}

/// 1-norm distance between two points of the same kind. Site-site and
/// interaction-interaction distances are always integers because the
/// half-integer offsets cancel.
pub fn one_norm_distance<P: GridPoint>(a: &P, b: &P) -> Result<u32> {
    let (a, b) = (a.grid(), b.grid());
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| x.abs_diff(y)).sum())
}

/// Geometry of a `D`-dimensional lattice of side `L` with local dimension
/// `d` and interaction half-width `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    #[serde(rename = "D")]
    pub dim: u32,
    #[serde(rename = "L")]
    pub side: u32,
    pub k: u32,
    #[serde(default = "default_local_dim")]
    pub d: usize,
}

fn default_local_dim() -> usize {
    2
}

impl LatticeSpec {
    pub fn new(dim: u32, side: u32, k: u32, d: usize) -> Result<Self> {
        let spec = LatticeSpec { dim, side, k, d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid(Module::Lattice, "D", "dimension must be positive"));
        }
        if self.side == 0 {
            return Err(Error::invalid(Module::Lattice, "L", "side length must be positive"));
        }
        if self.d < 2 {
            return Err(Error::invalid(Module::Lattice, "d", "local dimension must be at least 2"));
        }
        Ok(())
    }

    /// `(L+1)^D`.
    pub fn site_count(&self) -> usize {
        (self.side as usize + 1).pow(self.dim)
    }

    /// `n = L^D`.
    pub fn interaction_count(&self) -> usize {
        (self.side as usize).pow(self.dim)
    }

    /// All sites in lexicographic order.
    pub fn sites(&self) -> Vec<Site> {
        grid_points(self.dim as usize, self.side + 1).into_iter().map(Site).collect()
    }

    pub fn site_index(&self, site: &Site) -> Result<usize> {
        if site.dim() != self.dim as usize {
            return Err(Error::DimensionMismatch {
                expected: self.dim as usize,
                found: site.dim(),
            });
        }
        let base = self.side as usize + 1;
        let mut index = 0usize;
        for &c in &site.0 {
            if c > self.side {
                return Err(Error::invalid(Module::Lattice, "site", format!("coordinate {c} outside [0, {}]", self.side)));
            }
            index = index * base + c as usize;
        }
        Ok(index)
    }

    pub fn contains(&self, w: &Interaction) -> bool {
        w.dim() == self.dim as usize && w.half_coords.iter().all(|&c| c < self.side)
    }
}

fn grid_points(dim: usize, per_axis: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::with_capacity((per_axis as usize).pow(dim as u32));
    let mut current = vec![0u32; dim];
    loop {
        out.push(current.clone());
        let mut axis = dim;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            current[axis] += 1;
            if current[axis] < per_axis {
                break;
            }
            current[axis] = 0;
        }
    }
}

/// Every interaction of the lattice, lexicographically ordered. There are
/// exactly `L^D` of them.
pub fn dual_interactions(spec: &LatticeSpec) -> Vec<Interaction> {
    grid_points(spec.dim as usize, spec.side)
        .into_iter()
        .map(Interaction::from_floor)
        .collect()
}

/// Sites `v` of the lattice with `|v_i - w_i| <= k + 1/2` on every axis.
pub fn support_sites(w: &Interaction, spec: &LatticeSpec) -> Result<BTreeSet<Site>> {
    if !spec.contains(w) {
        return Err(Error::invalid(Module::Lattice, "interaction", format!("{:?} is not in the dual lattice", w.coords())));
    }
    let k = spec.k;
    let ranges: Vec<(u32, u32)> = w
        .half_coords
        .iter()
        .map(|&c| (c.saturating_sub(k), (c + 1 + k).min(spec.side)))
        .collect();
    let mut out = BTreeSet::new();
    let mut current: Vec<u32> = ranges.iter().map(|r| r.0).collect();
    loop {
        out.insert(Site(current.clone()));
        let mut axis = ranges.len();
        loop {
            if axis == 0 {
                return Ok(out);
            }
            axis -= 1;
            if current[axis] < ranges[axis].1 {
                current[axis] += 1;
                break;
            }
            current[axis] = ranges[axis].0;
        }
    }
}

/// Support of interaction `w` as sorted site indices.
pub fn support_indices(w: &Interaction, spec: &LatticeSpec) -> Result<Vec<usize>> {
    support_sites(w, spec)?.iter().map(|s| spec.site_index(s)).collect()
}

/// A collection of spins with local terms given as spin subsets.
///
/// `m` is the largest neighbour count, where neighbours of a term are the
/// *other* terms sharing at least one spin. `g` is the largest number of
/// terms acting on a single spin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionHypergraph {
    spin_count: usize,
    terms: Vec<Vec<usize>>,
    k: usize,
    m: usize,
    g: usize,
    d: usize,
}

impl InteractionHypergraph {
    /// Builds a hypergraph over spins `0..spin_count`. Each term must be a
    /// nonempty set of distinct spins; terms are stored sorted.
    pub fn new(spin_count: usize, terms: Vec<Vec<usize>>, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid(Module::Lattice, "d", "local dimension must be at least 2"));
        }
        let mut sorted = Vec::with_capacity(terms.len());
        for (i, term) in terms.into_iter().enumerate() {
            let set: BTreeSet<usize> = term.iter().copied().collect();
            if set.is_empty() {
                return Err(Error::invalid(Module::Lattice, format!("terms[{i}]"), "term has empty support"));
            }
            if set.len() != term.len() {
                return Err(Error::invalid(Module::Lattice, format!("terms[{i}]"), "term repeats a spin"));
            }
            if let Some(&s) = set.iter().next_back().filter(|&&s| s >= spin_count) {
                return Err(Error::invalid(Module::Lattice, format!("terms[{i}]"), format!("spin {s} out of range")));
            }
            sorted.push(set.into_iter().collect::<Vec<_>>());
        }
        let k = sorted.iter().map(Vec::len).max().unwrap_or(0);
        let mut per_spin = vec![0usize; spin_count];
        for term in &sorted {
            for &s in term {
                per_spin[s] += 1;
            }
        }
        let g = per_spin.into_iter().max().unwrap_or(0);
        let mut h = InteractionHypergraph {
            spin_count,
            terms: sorted,
            k,
            m: 0,
            g,
            d,
        };
        h.m = h.neighbor_sets().iter().map(BTreeSet::len).max().unwrap_or(0);
        Ok(h)
    }

    /// Like [`InteractionHypergraph::new`] but also checks declared locality
    /// and neighbour bounds.
    pub fn with_declared(spin_count: usize, terms: Vec<Vec<usize>>, d: usize, k: Option<usize>, m: Option<usize>) -> Result<Self> {
        let h = Self::new(spin_count, terms, d)?;
        if let Some(k) = k {
            if h.k > k {
                return Err(Error::invalid(Module::Lattice, "k", format!("a term acts on {} spins, more than declared k = {k}", h.k)));
            }
        }
        if let Some(m) = m {
            if h.m > m {
                let worst = h.neighbor_sets().iter().position(|s| s.len() == h.m).unwrap_or(0);
                return Err(Error::invalid(Module::Lattice, "m", format!("term {worst} has {} neighbours, more than declared m = {m}", h.m)));
            }
        }
        Ok(h)
    }

    pub fn spin_count(&self) -> usize {
        self.spin_count
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[Vec<usize>] {
        &self.terms
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    /// Largest term size.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Largest neighbour count.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Largest number of terms touching one spin.
    pub fn g(&self) -> usize {
        self.g
    }

    pub fn uniform_locality(&self) -> Option<usize> {
        let first = self.terms.first()?.len();
        self.terms.iter().all(|t| t.len() == first).then_some(first)
    }

    pub fn intersects(&self, a: usize, b: usize) -> bool {
        let (x, y) = (&self.terms[a], &self.terms[b]);
        let (mut i, mut j) = (0, 0);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    /// `N(w)` for every term: the other terms sharing a spin with it.
    pub fn neighbor_sets(&self) -> Vec<BTreeSet<usize>> {
        let n = self.terms.len();
        (0..n)
            .map(|a| (0..n).filter(|&b| b != a && self.intersects(a, b)).collect())
            .collect()
    }

    /// The lattice interaction structure viewed as a hypergraph over sites.
    pub fn from_lattice(spec: &LatticeSpec) -> Result<Self> {
        let terms = dual_interactions(spec)
            .iter()
            .map(|w| support_indices(w, spec))
            .collect::<Result<Vec<_>>>()?;
        Self::new(spec.site_count(), terms, spec.d)
    }

    /// Spins `0..N` with terms `{i, i+1, ..., i+width-1}`.
    pub fn chain(spin_count: usize, width: usize, d: usize) -> Result<Self> {
        if width == 0 || width > spin_count {
            return Err(Error::invalid(Module::Lattice, "width", "chain term width must be in 1..=N"));
        }
        let terms = (0..=spin_count - width).map(|i| (i..i + width).collect()).collect();
        Self::new(spin_count, terms, d)
    }
}

/// Map from term index to its neighbour set, validated against a declared
/// bound `m`.
pub fn neighbor_sets(h: &InteractionHypergraph, declared_m: Option<usize>) -> Result<BTreeMap<usize, BTreeSet<usize>>> {
    let sets = h.neighbor_sets();
    if let Some(m) = declared_m {
        if let Some((w, s)) = sets.iter().enumerate().find(|(_, s)| s.len() > m) {
            return Err(Error::invalid(Module::Lattice, "m", format!("term {w} has {} neighbours, more than declared m = {m}", s.len())));
        }
    }
    Ok(sets.into_iter().enumerate().collect())
}

/// Geometry of a Hamiltonian: either a lattice with its dual interactions or
/// a free hypergraph of spins.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Lattice(LatticeSpec),
    Hypergraph(InteractionHypergraph),
}

impl Geometry {
    pub fn spin_count(&self) -> usize {
        match self {
            Geometry::Lattice(s) => s.site_count(),
            Geometry::Hypergraph(h) => h.spin_count(),
        }
    }

    pub fn term_count(&self) -> usize {
        match self {
            Geometry::Lattice(s) => s.interaction_count(),
            Geometry::Hypergraph(h) => h.term_count(),
        }
    }

    pub fn local_dim(&self) -> usize {
        match self {
            Geometry::Lattice(s) => s.d,
            Geometry::Hypergraph(h) => h.local_dim(),
        }
    }

    /// Nominal support of every term: `S(w, k)` on a lattice, `w` itself on
    /// a hypergraph.
    pub fn term_supports(&self) -> Result<Vec<Vec<usize>>> {
        match self {
            Geometry::Lattice(spec) => dual_interactions(spec).iter().map(|w| support_indices(w, spec)).collect(),
            Geometry::Hypergraph(h) => Ok(h.terms().to_vec()),
        }
    }

    /// The hypergraph of term supports (the lattice's own view when the
    /// geometry is a lattice).
    pub fn as_hypergraph(&self) -> Result<InteractionHypergraph> {
        match self {
            Geometry::Lattice(spec) => InteractionHypergraph::from_lattice(spec),
            Geometry::Hypergraph(h) => Ok(h.clone()),
        }
    }
}

/// JSON form of a geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeometrySpec {
    Lattice(LatticeSpec),
    Hypergraph(HypergraphSpec),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpinLabel {
    Index(u64),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypergraphSpec {
    pub spins: Vec<SpinLabel>,
    pub terms: Vec<Vec<SpinLabel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default = "default_local_dim")]
    pub d: usize,
}

impl GeometrySpec {
    pub fn build(&self) -> Result<Geometry> {
        match self {
            GeometrySpec::Lattice(spec) => {
                spec.validate()?;
                Ok(Geometry::Lattice(*spec))
            }
            GeometrySpec::Hypergraph(spec) => {
                let mut index = BTreeMap::new();
                for (i, label) in spec.spins.iter().enumerate() {
                    if index.insert(label.clone(), i).is_some() {
                        return Err(Error::invalid(Module::Lattice, format!("spins[{i}]"), "duplicate spin label"));
                    }
                }
                let terms = spec
                    .terms
                    .iter()
                    .enumerate()
                    .map(|(t, term)| {
                        term.iter()
                            .map(|label| {
                                index.get(label).copied().ok_or_else(|| {
                                    Error::invalid(Module::Lattice, format!("terms[{t}]"), format!("unknown spin {label:?}"))
                                })
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                let h = InteractionHypergraph::with_declared(spec.spins.len(), terms, spec.d, spec.k, spec.m)?;
                Ok(Geometry::Hypergraph(h))
            }
        }
    }
}

/// The six-triangle spin collection used as the running hypergraph example:
/// twelve spins, six 3-local terms arranged in a path, each sharing spins
/// only with its predecessor and successor.
pub fn triangle_path_example() -> InteractionHypergraph {
    let terms = vec![
        vec![0, 7, 8],
        vec![8, 1, 10],
        vec![10, 2, 11],
        vec![11, 3, 4],
        vec![4, 5, 9],
        vec![6, 5, 9],
    ];
    InteractionHypergraph::new(12, terms, 2).expect("static example is valid")
}
