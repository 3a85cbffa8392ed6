//! Ordered tuples of interactions whose elements all have a nearby partner,
//! the selection encoding that counts them, and the closed-form counting
//! bounds.
//!
//! Two proximity notions are supported through [`Proximity`]:
//!
//! * lattice mode: `w_i` and `w_j` are partners when `||w_i - w_j|| <= l`;
//! * hypergraph mode: terms are partners when their supports intersect.
//!
//! In both modes the partner of an entry must sit at a *different index*;
//! repeated entries count as partners of each other.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rayon::prelude::*;

use crate::error::{Error, Module, Result};
use crate::lattice::{dual_interactions, one_norm_distance, InteractionHypergraph, LatticeSpec};

/// Cap on `n^r` for exact tuple counting.
pub const COUNT_CAP: u128 = 100_000_000;
/// Cap on `n^r` when all tuples are materialised.
pub const GROUP_CAP: u128 = 10_000_000;

/// Sequence of interaction (or term) indices, repeats allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrderedTuple(pub Vec<usize>);

impl OrderedTuple {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Pairwise relation among `size()` items that drives both the tuple
/// property and the selection encoding.
pub trait Proximity: Sync {
    fn size(&self) -> usize;

    /// Whether `a` can serve as the partner of `b` in a qualifying tuple.
    fn partners(&self, a: usize, b: usize) -> bool;

    /// Closeness a `b = 1` selection entry must have to some earlier entry.
    fn selection_close(&self, a: usize, b: usize) -> bool;
}

/// Lattice interactions with a distance threshold `l`.
#[derive(Debug, Clone)]
pub struct LatticeProximity {
    n: usize,
    distances: Vec<u32>,
    l: u32,
}

impl LatticeProximity {
    pub fn new(spec: &LatticeSpec, l: u32) -> Self {
        let ws = dual_interactions(spec);
        let n = ws.len();
        let mut distances = vec![0u32; n * n];
        for (i, a) in ws.iter().enumerate() {
            for (j, b) in ws.iter().enumerate() {
                distances[i * n + j] = one_norm_distance(a, b).expect("same lattice");
            }
        }
        LatticeProximity { n, distances, l }
    }

    pub fn threshold(&self) -> u32 {
        self.l
    }

    pub fn with_threshold(&self, l: u32) -> Self {
        LatticeProximity { l, ..self.clone() }
    }

    pub fn distance(&self, a: usize, b: usize) -> u32 {
        self.distances[a * self.n + b]
    }
}

impl Proximity for LatticeProximity {
    fn size(&self) -> usize {
        self.n
    }

    fn partners(&self, a: usize, b: usize) -> bool {
        self.distance(a, b) <= self.l
    }

    fn selection_close(&self, a: usize, b: usize) -> bool {
        self.distance(a, b) <= 2 * self.l
    }
}

/// Hypergraph terms; partners share a spin.
///
/// The selection closeness is overlap of *closed* neighbourhoods
/// `N(w) ∪ {w}`, so that a repeated term, or two intersecting terms with no
/// third common neighbour, still satisfy it.
#[derive(Debug, Clone)]
pub struct HypergraphProximity {
    n: usize,
    intersect: Vec<bool>,
    overlap: Vec<bool>,
}

impl HypergraphProximity {
    pub fn new(h: &InteractionHypergraph) -> Self {
        let n = h.term_count();
        let mut intersect = vec![false; n * n];
        for a in 0..n {
            for b in 0..n {
                intersect[a * n + b] = h.intersects(a, b);
            }
        }
        let mut overlap = vec![false; n * n];
        for a in 0..n {
            for b in 0..n {
                overlap[a * n + b] = (0..n).any(|c| intersect[a * n + c] && intersect[b * n + c]);
            }
        }
        HypergraphProximity { n, intersect, overlap }
    }
}

impl Proximity for HypergraphProximity {
    fn size(&self) -> usize {
        self.n
    }

    fn partners(&self, a: usize, b: usize) -> bool {
        self.intersect[a * self.n + b]
    }

    fn selection_close(&self, a: usize, b: usize) -> bool {
        self.overlap[a * self.n + b]
    }
}

/// True iff every entry has a partner at another index. Singletons never
/// qualify.
pub fn satisfies_property<P: Proximity + ?Sized>(tuple: &[usize], prox: &P) -> bool {
    tuple.iter().enumerate().all(|(i, &a)| {
        tuple.iter().enumerate().any(|(j, &b)| j != i && prox.partners(a, b))
    })
}

/// Property `P(l)` for a tuple of lattice interactions.
pub fn satisfies_p(spec: &LatticeSpec, tuple: &OrderedTuple, l: u32) -> bool {
    satisfies_property(&tuple.0, &LatticeProximity::new(spec, l))
}

/// Property `Q` for a tuple of hypergraph terms.
pub fn satisfies_q(h: &InteractionHypergraph, tuple: &OrderedTuple) -> bool {
    satisfies_property(&tuple.0, &HypergraphProximity::new(h))
}

fn tuple_space(n: usize, r: usize, cap: u128) -> Result<u128> {
    let space = (n as u128).checked_pow(r as u32).unwrap_or(u128::MAX);
    if space > cap {
        return Err(Error::Infeasible { space, cap });
    }
    Ok(space)
}

/// Visits every tuple in `prefix × [0, n)^(r - prefix.len())` in
/// lexicographic order.
pub fn for_each_tuple(n: usize, r: usize, prefix: &[usize], mut f: impl FnMut(&[usize])) {
    if r == 0 || n == 0 {
        if r == 0 {
            f(&[]);
        }
        return;
    }
    let mut t = vec![0usize; r];
    t[..prefix.len()].copy_from_slice(prefix);
    let free = prefix.len();
    loop {
        f(&t);
        let mut pos = r;
        loop {
            if pos == free {
                return;
            }
            pos -= 1;
            t[pos] += 1;
            if t[pos] < n {
                break;
            }
            t[pos] = 0;
        }
    }
}

/// Counts qualifying tuples, splitting the space on the first entry across
/// workers.
pub fn count_tuples<P: Proximity>(prox: &P, r: usize) -> Result<u128> {
    let n = prox.size();
    tuple_space(n, r, COUNT_CAP)?;
    if r == 0 || n == 0 {
        return Ok(0);
    }
    Ok((0..n)
        .into_par_iter()
        .map(|first| {
            let mut count = 0u128;
            for_each_tuple(n, r, &[first], |t| {
                if satisfies_property(t, prox) {
                    count += 1;
                }
            });
            count
        })
        .sum())
}

/// Exact `N_D(n, r, l)` by enumeration.
pub fn count_p_tuples(spec: &LatticeSpec, r: usize, l: u32) -> Result<u128> {
    tuple_space(spec.interaction_count(), r, COUNT_CAP)?;
    count_tuples(&LatticeProximity::new(spec, l), r)
}

/// Exact `N_{k,m}(n, r)` by enumeration.
pub fn count_q_tuples(h: &InteractionHypergraph, r: usize) -> Result<u128> {
    tuple_space(h.term_count(), r, COUNT_CAP)?;
    count_tuples(&HypergraphProximity::new(h), r)
}

/// Bit-annotated tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Selection(pub Vec<(bool, usize)>);

impl Selection {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> Vec<bool> {
        self.0.iter().map(|e| e.0).collect()
    }

    pub fn zero_count(&self) -> usize {
        self.0.iter().filter(|e| !e.0).count()
    }

    /// Checks both selection conditions: a set bit needs an earlier entry
    /// that is selection-close, and at most `r/2` bits are clear.
    pub fn validate<P: Proximity + ?Sized>(&self, prox: &P) -> Result<()> {
        for (i, &(bit, x)) in self.0.iter().enumerate() {
            if x >= prox.size() {
                return Err(Error::invalid(Module::Combinatorics, format!("selection[{i}]"), "entry outside the interaction set"));
            }
            if bit && !self.0[..i].iter().any(|&(_, y)| prox.selection_close(x, y)) {
                return Err(Error::invalid(Module::Combinatorics, format!("selection[{i}]"), "set bit without a close earlier entry"));
            }
        }
        if 2 * self.zero_count() > self.len() {
            return Err(Error::invalid(
                Module::Combinatorics,
                "selection",
                format!("{} clear bits exceed r/2 = {}", self.zero_count(), self.len() / 2),
            ));
        }
        Ok(())
    }
}

/// `R(i)`: for a clear-bit index, the smallest later set-bit partner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointerRelation(pub Vec<Option<usize>>);

/// Intermediate state of the three-phase assignment, kept for inspection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionTrace {
    pub initial_bits: Vec<bool>,
    pub pointers: PointerRelation,
    pub selection: Selection,
}

/// Maps a qualifying tuple to its selection.
///
/// Initialization clears the bit of every entry with no earlier partner.
/// Pointer creation sends each clear entry to its first later partner
/// (necessarily a set entry). Update keeps, for each pointer target, only
/// the earliest clear entry and sets the rest.
pub fn assign_selection<P: Proximity + ?Sized>(tuple: &OrderedTuple, prox: &P) -> Result<SelectionTrace> {
    let t = &tuple.0;
    if let Some(&bad) = t.iter().find(|&&x| x >= prox.size()) {
        return Err(Error::Precondition(format!("entry {bad} outside the interaction set")));
    }
    let r = t.len();
    let initial_bits: Vec<bool> = (0..r).map(|i| (0..i).any(|j| prox.partners(t[i], t[j]))).collect();

    let mut pointers = vec![None; r];
    for i in 0..r {
        if initial_bits[i] {
            continue;
        }
        let j = (i + 1..r)
            .find(|&j| initial_bits[j] && prox.partners(t[j], t[i]))
            .ok_or_else(|| Error::Precondition(format!("entry {i} has no partner; tuple does not qualify")))?;
        pointers[i] = Some(j);
    }

    let mut bits = initial_bits.clone();
    let mut claimed: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..r {
        if let Some(target) = pointers[i] {
            if claimed.insert(target, i).is_some() {
                bits[i] = true;
            }
        }
    }

    let selection = Selection(bits.into_iter().zip(t.iter().copied()).collect());
    Ok(SelectionTrace {
        initial_bits,
        pointers: PointerRelation(pointers),
        selection,
    })
}

/// `D(w_1, ..., w_r) = max_i min_{j != i} ||w_i - w_j||`; `None` for r < 2.
pub fn farthest_distance(tuple: &[usize], prox: &LatticeProximity) -> Option<u32> {
    if tuple.len() < 2 {
        return None;
    }
    tuple
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            tuple
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &b)| prox.distance(a, b))
                .min()
                .expect("r >= 2")
        })
        .max()
}

/// Partitions all `n^r` tuples into the collections `T(l)` keyed by
/// farthest distance.
pub fn group_by_farthest_distance(spec: &LatticeSpec, r: usize) -> Result<BTreeMap<u32, Vec<OrderedTuple>>> {
    if r < 2 {
        return Err(Error::Precondition("farthest distance needs r >= 2".into()));
    }
    tuple_space(spec.interaction_count(), r, GROUP_CAP)?;
    let prox = LatticeProximity::new(spec, 0);
    let mut groups: BTreeMap<u32, Vec<OrderedTuple>> = BTreeMap::new();
    for_each_tuple(prox.size(), r, &[], |t| {
        let l = farthest_distance(t, &prox).expect("r >= 2");
        groups.entry(l).or_default().push(OrderedTuple(t.to_vec()));
    });
    Ok(groups)
}

fn even_order(r: usize) -> Result<u32> {
    if r == 0 || !r.is_multiple_of(2) {
        return Err(Error::OddOrder(r));
    }
    Ok((r / 2) as u32)
}

/// `(4 (4l)^D n r)^(r/2)`, exactly.
pub fn bound_p(n: u64, r: usize, l: u64, dim: u32) -> Result<BigUint> {
    let half = even_order(r)?;
    let base = BigUint::from(4u32) * BigUint::from(4 * l).pow(dim) * BigUint::from(n) * BigUint::from(r);
    Ok(base.pow(half))
}

/// `(4 m^2 n r)^(r/2)`, exactly.
///
/// A term always partners itself, so the neighbour count entering the
/// formula is taken as at least one; the result is zero only when `n = 0`.
pub fn bound_q(n: u64, r: usize, m: u64) -> Result<BigUint> {
    let half = even_order(r)?;
    let m = m.max(1);
    let base = BigUint::from(4u32) * BigUint::from(m).pow(2) * BigUint::from(n) * BigUint::from(r);
    Ok(base.pow(half))
}
