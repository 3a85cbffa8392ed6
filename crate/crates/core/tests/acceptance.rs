//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines always reach stdout; exits non-zero on any FAIL.

use std::collections::HashSet;
use std::f64::consts::E;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use energy_tails::bounds::{self, SweepInput, TheoremId};
use energy_tails::combinatorics::{self, HypergraphProximity, LatticeProximity, OrderedTuple};
use energy_tails::experiment::{self, ExperimentConfig, RunOptions, Task};
use energy_tails::hamiltonian::{standard_model, ModelSpec};
use energy_tails::lattice::{one_norm_distance, triangle_path_example, Interaction, Site};
use energy_tails::linalg;
use energy_tails::spectrum::{self, EnergyDistribution, Side, SpectralData, TupleMode};
use energy_tails::states::{make_state, StateSpec};
use energy_tails::{DensityState, Geometry, InteractionHypergraph, LatticeSpec, LocalHamiltonian, State};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    check(t < limit, || format!("took {t:?}, limit {limit:?}"))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn chain(spins: usize, width: usize) -> Geometry {
    Geometry::Hypergraph(InteractionHypergraph::chain(spins, width, 2).unwrap())
}

fn model(spec: ModelSpec, g: &Geometry, seed: u64) -> LocalHamiltonian {
    standard_model(&spec, g, seed).unwrap()
}

fn random_psd(g: &Geometry, seed: u64) -> LocalHamiltonian {
    model(ModelSpec::RandomPsd { real: false }, g, seed)
}

fn product(g: &Geometry, seed: u64, mixed: bool) -> State {
    make_state(&StateSpec::RandomProduct { mixed }, g, None, seed).unwrap()
}

/// Entangled pure state: ground state of an unrelated random model.
fn entangled_pure(g: &Geometry, seed: u64) -> DensityState {
    let other = random_psd(g, seed ^ 0xabcd);
    make_state(&StateSpec::Ground { of: None }, g, Some(&other), seed).unwrap().to_density().unwrap()
}

/// Full-rank entangled mixed state.
fn entangled_mixed(g: &Geometry, seed: u64) -> DensityState {
    let pure = entangled_pure(g, seed);
    let mix = product(g, seed ^ 0x77, true).to_density().unwrap();
    let m = linalg::add(&linalg::scale(&pure.matrix(), 0.7), &linalg::scale(&mix.matrix(), 0.3));
    DensityState::mixed(m, g.spin_count(), 2).unwrap()
}

fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Every in-range ordered tuple satisfying `keep`, visited once.
fn qualifying(n: usize, r: usize, keep: impl Fn(&OrderedTuple) -> bool) -> Vec<OrderedTuple> {
    let mut out = Vec::new();
    combinatorics::for_each_tuple(n, r, &[], |t| {
        let t = OrderedTuple(t.to_vec());
        if keep(&t) {
            out.push(t);
        }
    });
    out
}

// 1. Lattice tuple counts and selections.
fn lattice_suite() -> Outcome {
    let start = Instant::now();
    let mut cases = vec![];
    for side in [3u32, 4, 5] {
        for r in [2usize, 4] {
            for l in [1u32, 2] {
                cases.push((1u32, side, r, l));
            }
        }
    }
    cases.push((2, 3, 2, 1));
    cases.push((2, 3, 2, 2));
    let mut tuples = 0usize;
    for (dim, side, r, l) in cases {
        let spec = LatticeSpec::new(dim, side, 0, 2).map_err(err)?;
        let n = spec.interaction_count();
        let prox = LatticeProximity::new(&spec, l);
        let found = qualifying(n, r, |t| combinatorics::satisfies_p(&spec, t, l));
        let library = combinatorics::count_p_tuples(&spec, r, l).map_err(err)?;
        check(library == found.len() as u128, || format!("D={dim} n={n} r={r} l={l}: library count {library} != {}", found.len()))?;
        let bound = combinatorics::bound_p(n as u64, r, l as u64, dim).map_err(err)?;
        check(BigUint::from(found.len()) <= bound, || format!("D={dim} n={n} r={r} l={l}: {} > {bound}", found.len()))?;
        let mut seen = HashSet::new();
        for t in &found {
            let s = combinatorics::assign_selection(t, &prox).map_err(err)?.selection;
            s.validate(&prox).map_err(|e| format!("{t:?}: {e}"))?;
            check(seen.insert(s), || format!("selection collision at {t:?}"))?;
        }
        tuples += found.len();
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("{tuples} qualifying tuples, all selections distinct and valid"))
}

fn random_hypergraph(seed: u64) -> InteractionHypergraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spins = rng.gen_range(3..=7);
    let n = rng.gen_range(2..=6);
    let terms = (0..n)
        .map(|_| {
            let size = rng.gen_range(1..=3);
            let mut t: Vec<usize> = rand::seq::index::sample(&mut rng, spins, size).into_vec();
            t.sort_unstable();
            t
        })
        .collect();
    InteractionHypergraph::new(spins, terms, 2).unwrap()
}

// 2. Hypergraph tuple counts and selections.
fn hypergraph_suite() -> Outcome {
    let start = Instant::now();
    let fig = triangle_path_example();
    check(fig.term_count() == 6 && fig.m() == 2 && fig.k() == 3, || "triangle path parameters".into())?;
    let graphs: Vec<InteractionHypergraph> = std::iter::once(fig).chain((0..20).map(random_hypergraph)).collect();
    let mut tuples = 0usize;
    for (i, h) in graphs.iter().enumerate() {
        let prox = HypergraphProximity::new(h);
        for r in [2usize, 4] {
            let found = qualifying(h.term_count(), r, |t| combinatorics::satisfies_q(h, t));
            let library = combinatorics::count_q_tuples(h, r).map_err(err)?;
            check(library == found.len() as u128, || format!("graph {i} r={r}: library count {library} != {}", found.len()))?;
            let bound = combinatorics::bound_q(h.term_count() as u64, r, h.m() as u64).map_err(err)?;
            check(BigUint::from(found.len()) <= bound, || format!("graph {i} r={r}: {} > {bound}", found.len()))?;
            let mut seen = HashSet::new();
            for t in &found {
                let s = combinatorics::assign_selection(t, &prox).map_err(err)?.selection;
                s.validate(&prox).map_err(|e| format!("graph {i} {t:?}: {e}"))?;
                check(seen.insert(s), || format!("graph {i}: selection collision at {t:?}"))?;
            }
            tuples += found.len();
        }
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("{} hypergraphs, {tuples} qualifying tuples", graphs.len()))
}

/// Exact central moment of Binomial(n, p) by direct summation over the pmf.
fn binomial_central_moment(n: u64, p: &BigRational, r: u32) -> f64 {
    let q = BigRational::one() - p;
    let mean = p * BigRational::from_integer(BigInt::from(n));
    let mut choose = BigInt::one();
    let mut total = BigRational::zero();
    for k in 0..=n {
        if k > 0 {
            choose = choose * BigInt::from(n - k + 1) / BigInt::from(k);
        }
        let pk = num_traits::pow(p.clone(), k as usize) * num_traits::pow(q.clone(), (n - k) as usize);
        let dev = BigRational::from_integer(BigInt::from(k)) - &mean;
        total += BigRational::from_integer(choose.clone()) * pk * num_traits::pow(dev, r as usize);
    }
    total.to_f64().unwrap()
}

// 3. Binomial oracle and two-route moments.
fn moment_oracle() -> Outcome {
    let mut checked = 0;
    for n in 4usize..=10 {
        let g = chain(n, 1);
        let h = model(ModelSpec::ClassicalField, &g, 0);
        for (num, den) in [(1, 10), (1, 2), (9, 10)] {
            let p = num as f64 / den as f64;
            let rho = make_state(&StateSpec::Iid { p, mixed: false }, &g, None, 0).unwrap().to_density().unwrap();
            let table = spectrum::central_moments(&rho, &h, 8).map_err(err)?;
            let exact_p = BigRational::new(BigInt::from(num), BigInt::from(den));
            for r in [2u32, 4, 6, 8] {
                let want = binomial_central_moment(n as u64, &exact_p, r);
                let got = table.get(r as usize).map_err(err)?;
                check(rel_close(got, want, 1e-10), || format!("n={n} p={p} r={r}: {got} vs {want}"))?;
                checked += 1;
            }
        }
    }
    for i in 0..50u64 {
        let spins = 2 + (i as usize % 9);
        let g = chain(spins, 1 + (i as usize % 3).min(spins - 1));
        let h = random_psd(&g, 1000 + i);
        let rho = if spins <= 7 { entangled_mixed(&g, i) } else { entangled_pure(&g, i) };
        let hm = h.assemble().map_err(err)?;
        let data = SpectralData::new(&rho, &hm).map_err(err)?;
        let spectral = spectrum::spectral_moments(&data, 8).map_err(err)?;
        let power = spectrum::matrix_power_moments(&rho, &hm, spectral.mean, 8).map_err(err)?;
        for r in [2usize, 4, 6, 8] {
            let (a, b) = (spectral.get(r).map_err(err)?, power[&r]);
            check(rel_close(a, b, 1e-8), || format!("pair {i} ({spins} qubits) r={r}: spectral {a} vs power {b}"))?;
        }
    }
    Ok(format!("{checked} binomial moments at rel 1e-10; 50 random pairs agree at rel 1e-8"))
}

// 4. Markov inequality.
fn markov_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut closest = f64::INFINITY;
    let mut tight = 0;
    for i in 0..200u64 {
        let spins = rng.gen_range(2..=8);
        let width = rng.gen_range(1..=3usize).min(spins);
        let g = chain(spins, width);
        let h = random_psd(&g, rng.gen());
        let rho = match i % 3 {
            0 => product(&g, rng.gen(), false).to_density().unwrap(),
            1 => product(&g, rng.gen(), true).to_density().unwrap(),
            _ => entangled_pure(&g, rng.gen()),
        };
        // Absolute deviation, up to half the largest possible spread.
        let a: f64 = rng.gen_range(0.02..0.5) * h.term_count() as f64;
        let r = 2 * rng.gen_range(1..=4usize);
        let table = spectrum::central_moments(&rho, &h, r).map_err(err)?;
        let data = SpectralData::new(&rho, &h.assemble().map_err(err)?).map_err(err)?;
        let dist = EnergyDistribution::from_spectral(&data, 0.0);
        // Both sides together, which is stronger than either alone.
        let tail = dist.tail_weight(dist.mean() + a, Side::Geq) + dist.tail_weight(dist.mean() - a, Side::Leq);
        let bound = spectrum::markov_tail_bound(&table, a, r).map_err(err)?;
        check(tail <= bound + 1e-12, || format!("instance {i}: tail {tail} > bound {bound}"))?;
        closest = closest.min(bound - tail);
        tight += usize::from(bound < 1.0);
    }
    Ok(format!("200 instances, smallest margin {closest:.3e}, {tight} with bound below 1"))
}

// 5. Product-state tail, both sides, with the lower tail also read through
// the dual Hamiltonian.
fn product_tail_suite() -> Outcome {
    let start = Instant::now();
    let mut cases: Vec<(String, Geometry, LocalHamiltonian, State)> = Vec::new();
    for spins in [4usize, 8, 12] {
        let g = chain(spins, 1);
        let h = model(ModelSpec::ClassicalField, &g, 0);
        for p in [0.1, 0.5, 0.9] {
            let s = make_state(&StateSpec::Iid { p, mixed: false }, &g, None, 0).unwrap();
            cases.push((format!("field {spins} iid {p}"), g.clone(), h.clone(), s));
        }
        cases.push((format!("field {spins} random"), g.clone(), h.clone(), product(&g, spins as u64, true)));
    }
    for spins in [6usize, 9, 12] {
        let g = chain(spins, 2);
        let tfim = model(ModelSpec::TransverseIsing { coupling: 1.0, field: 1.0 }, &g, 0);
        cases.push((format!("ising {spins}"), g.clone(), tfim, product(&g, 50 + spins as u64, false)));
    }
    for spins in [6usize, 9] {
        let g = chain(spins, 2);
        cases.push((format!("random-psd {spins}"), g.clone(), random_psd(&g, spins as u64), product(&g, 60 + spins as u64, true)));
    }
    let mut points = 0;
    let mut nonzero = 0;
    for (label, _g, h, state) in &cases {
        let n = h.term_count() as f64;
        let m = h.geometry().as_hypergraph().map_err(err)?.m() as f64;
        let a_min = (8.0 * E * m.max(1.0).powi(2) / n).sqrt();
        let grid: Vec<f64> = (0..50).map(|i| a_min * (1.0 + 2.0 * i as f64 / 49.0)).collect();
        let direct = SweepInput { state, hamiltonian: h, certificate: None, cluster_tol: None };
        let reports = bounds::evaluate_sweep(&direct, TheoremId::ProductTail, &grid).map_err(err)?;
        let dual_h = h.complement();
        let dual = SweepInput { state, hamiltonian: &dual_h, certificate: None, cluster_tol: None };
        let dual_reports = bounds::evaluate_sweep(&dual, TheoremId::ProductTail, &grid).map_err(err)?;
        for (r, d) in reports.iter().zip(&dual_reports) {
            check(r.regime_valid, || format!("{label}: grid point {:?} outside regime", r.params.get("a")))?;
            let bound = r.bound_value.unwrap();
            let tail = r.empirical_tail.unwrap();
            check(tail <= bound + 1e-12, || format!("{label}: tail {tail} > {bound} at {:?}", r.params))?;
            check(r.satisfied == Some(true), || format!("{label}: verdict {:?}", r.satisfied))?;
            // H's lower tail is H'-dual's upper tail.
            if r.side == Some(Side::Leq) {
                let mirrored = dual_reports.iter().find(|x| x.side == Some(Side::Geq) && x.params["a"] == r.params["a"]).unwrap();
                let t = mirrored.empirical_tail.unwrap();
                check((t - tail).abs() <= 1e-10, || format!("{label}: dual tail {t} vs lower tail {tail}"))?;
            }
            check(d.satisfied == Some(true), || format!("{label}: dual verdict {:?}", d.satisfied))?;
            points += 1;
            nonzero += usize::from(tail > 0.0);
        }
    }
    within(start, Duration::from_secs(300))?;
    Ok(format!("{} instances, {points} points (both sides), {nonzero} with nonzero tail", cases.len()))
}

fn tfim() -> serde_json::Value {
    serde_json::json!({ "model": "transverse-ising", "coupling": 1.0, "field": 4.0 })
}

fn decay_config(side: u32, h: serde_json::Value, theorem: &str, grid: serde_json::Value) -> ExperimentConfig {
    let cfg = serde_json::json!({
        "geometry": { "kind": "lattice", "D": 1, "L": side, "k": 0 },
        "hamiltonian": h,
        "state": { "kind": "ground", "of": tfim() },
        "params": {
            "theorem": theorem,
            "grid": grid,
            "probe_class": { "class": "contiguous-region-basis", "s_max": 2 }
        }
    });
    serde_json::from_value(cfg).unwrap()
}

// 6. Decaying-correlation tail and moment bounds on gapped chain ground
// states, plus the integral estimate.
fn decay_suite() -> Outcome {
    let (mut valid, mut vacuous, mut moments) = (0, 0, 0);
    let mut sigma = vec![];
    for side in [7u32, 8, 9] {
        for h in [tfim(), serde_json::json!({ "model": "classical-field" })] {
            let cfg = decay_config(side, h.clone(), "decay-tail", serde_json::json!({ "points": 50 }));
            let out = experiment::verify(&cfg, &RunOptions::default(), false).map_err(err)?;
            let cert = out.certificate.ok_or("no certificate issued")?;
            sigma.push(cert.sigma);
            for r in out.reports.iter().filter(|r| r.regime_valid) {
                check(r.satisfied == Some(true), || format!("L={side}: {}", serde_json::to_string(r).unwrap()))?;
                valid += 1;
                vacuous += usize::from(r.vacuous);
            }
            let cfg = decay_config(side, h, "decay-moment", serde_json::json!([2, 4]));
            let out = experiment::verify(&cfg, &RunOptions::default(), false).map_err(err)?;
            for r in &out.reports {
                check(r.satisfied == Some(true), || format!("L={side} moment: {}", serde_json::to_string(r).unwrap()))?;
                moments += 1;
            }
        }
    }
    let mut integrals = 0;
    for r in [2u64, 4] {
        for dim in [1u32, 2] {
            for s in [0.5, 1.0, 2.0] {
                let c = bounds::integral_estimate_check(r, dim, s, 200).map_err(err)?;
                check(c.holds, || format!("integral estimate fails at r={r} D={dim} sigma={s}: {c:?}"))?;
                integrals += 1;
            }
        }
    }
    check(valid > 0, || "no regime-valid grid points".into())?;
    let (lo, hi) = sigma.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    Ok(format!(
        "{valid} regime-valid points ({vacuous} vacuous), {moments} moment checks, {integrals} integral checks; fitted sigma {lo:.3}..{hi:.3}"
    ))
}

// 7. Q-filtered expansion equals the full one.
fn q_filter_suite() -> Outcome {
    let mut instances = 0;
    let mut dropped = 0usize;
    for spins in 2usize..=8 {
        for width in 1usize..=3.min(spins) {
            let g = chain(spins, width);
            let models = [
                random_psd(&g, (spins * 10 + width) as u64),
                model(ModelSpec::ClassicalField, &g, 0),
                model(ModelSpec::TransverseIsing { coupling: 1.0, field: 0.5 }, &g, 0),
            ];
            for (j, h) in models.iter().enumerate() {
                let n = h.term_count() as f64;
                let State::Product(p) = product(&g, (spins * 100 + width * 10 + j) as u64, j % 2 == 0 && spins <= 6) else { unreachable!() };
                for r in [2usize, 4, 6] {
                    if n.powi(r as i32) > 1e5 {
                        continue;
                    }
                    let f = spectrum::tuple_moment_expansion(&p, h, r, TupleMode::Filtered).map_err(err)?;
                    let full = spectrum::tuple_moment_expansion(&p, h, r, TupleMode::Full).map_err(err)?;
                    let diff = (f.sum - full.sum).abs();
                    check(diff <= 1e-12, || format!("{spins} spins width {width} model {j} r={r}: |filtered - full| = {diff:e}"))?;
                    if let Some(v) = full.dropped_values.iter().find(|v| v.abs() > 1e-12) {
                        return Err(format!("{spins} spins width {width} model {j} r={r}: dropped tuple value {v:e}"));
                    }
                    dropped += full.dropped_values.len();
                    instances += 1;
                }
            }
        }
    }
    Ok(format!("{instances} expansions, {dropped} dropped tuples all within 1e-12"))
}

// 8. Duality, the cat state, and the worked geometry examples.
fn duality_and_geometry() -> Outcome {
    for seed in 0..5u64 {
        let g = chain(5, 2);
        let h = random_psd(&g, seed);
        let rho = entangled_mixed(&g, seed);
        let n = h.term_count() as f64;
        let d = EnergyDistribution::from_spectral(&SpectralData::new(&rho, &h.assemble().map_err(err)?).map_err(err)?, 1e-9);
        let c = EnergyDistribution::from_spectral(&SpectralData::new(&rho, &h.complement().assemble().map_err(err)?).map_err(err)?, 1e-9);
        check(d.levels.len() == c.levels.len(), || format!("seed {seed}: level counts differ"))?;
        for (x, y) in d.levels.iter().zip(c.levels.iter().rev()) {
            check((x.f - (n - y.f)).abs() <= 1e-10 && (x.weight - y.weight).abs() <= 1e-10, || {
                format!("seed {seed}: ({}, {}) vs dual ({}, {})", x.f, x.weight, y.f, y.weight)
            })?;
        }
    }
    let spec = LatticeSpec::new(1, 5, 0, 2).map_err(err)?;
    let g = Geometry::Lattice(spec);
    let h = model(ModelSpec::ClassicalField, &g, 0);
    let cat = make_state(&StateSpec::Cat, &g, None, 0).unwrap().to_density().map_err(err)?;
    let dist = spectrum::energy_distribution(&cat, &h, None).map_err(err)?;
    let levels: Vec<(f64, f64)> = dist.levels.iter().filter(|l| l.weight > 0.0).map(|l| (l.f, l.weight)).collect();
    check(levels == vec![(0.0, 0.5), (5.0, 0.5)], || format!("cat distribution {levels:?}"))?;

    let site = one_norm_distance(&Site(vec![0, 2]), &Site(vec![2, 3])).map_err(err)?;
    let dual = one_norm_distance(&Interaction::from_floor(vec![2, 2]), &Interaction::from_floor(vec![0, 1])).map_err(err)?;
    check(site == 3 && dual == 3, || format!("distances {site}, {dual}"))?;
    let fig = triangle_path_example();
    let (k, m, gd) = (fig.k(), fig.m(), fig.g());
    let (gn, kn) = (gd * fig.spin_count(), k * fig.term_count());
    check((k, m, gd, gn, kn) == (3, 2, 2, 24, 18), || format!("k={k} m={m} g={gd} gN={gn} kn={kn}"))?;
    Ok("dual spectra mirror; cat at {0, 5} with weights 1/2; distances 3, 3; k=3 m=2 g=2 gN=24 >= kn=18".into())
}

fn task_of(cfg: &ExperimentConfig) -> Task {
    cfg.task.unwrap_or(Task::Verify)
}

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

// 9. Shipped configs are byte-for-byte reproducible.
fn determinism() -> Outcome {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut configs: Vec<PathBuf> = fs::read_dir(&root).map_err(err)?.map(|e| e.unwrap().path()).collect();
    configs.sort();
    let mut files = 0;
    for path in &configs {
        let cfg = ExperimentConfig::load(path).map_err(err)?;
        let runs: Vec<Vec<(String, Vec<u8>)>> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let opts = RunOptions { out_dir: Some(dir.path().to_path_buf()), ..Default::default() };
                experiment::run(&cfg, task_of(&cfg), &opts).map(|_| outputs(dir.path()))
            })
            .collect::<Result<_, _>>()
            .map_err(|e| format!("{}: {e}", path.display()))?;
        check(!runs[0].is_empty() && runs[0] == runs[1], || format!("{} differs between runs", path.display()))?;
        files += runs[0].len();
    }
    Ok(format!("{} configs, {files} output files identical across runs", configs.len()))
}

fn main() {
    linalg::use_sequential_kernels();
    let criteria: [Criterion; 9] = [
        ("lattice tuple counts and selections", lattice_suite),
        ("hypergraph tuple counts and selections", hypergraph_suite),
        ("moment oracle and two-route agreement", moment_oracle),
        ("markov tail inequality", markov_suite),
        ("product-state tail sweep", product_tail_suite),
        ("decaying-correlation tail and moments", decay_suite),
        ("q-filter exactness", q_filter_suite),
        ("duality and geometry", duality_and_geometry),
        ("determinism of shipped configs", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
