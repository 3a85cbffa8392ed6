//! Experiment configs and task dispatch. Every task writes deterministic
//! artifacts into an output directory.

use std::fs;
use std::path::{Path, PathBuf};

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::{self, BoundReport, SweepInput, TheoremId};
use crate::combinatorics;
use crate::error::{Error, Module, Result};
use crate::hamiltonian::{self, HamiltonianSpec, LocalHamiltonian};
use crate::lattice::{Geometry, GeometrySpec, LatticeSpec};
use crate::linalg;
use crate::spectrum::{self, SpectralData};
use crate::states::{self, CorrelationCertificate, DecayVerdict, ProbeClass, State, StateSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Build,
    Distribution,
    Moments,
    Combi,
    Certify,
    Verify,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Build => "build",
            Task::Distribution => "distribution",
            Task::Moments => "moments",
            Task::Combi => "combi",
            Task::Certify => "certify",
            Task::Verify => "verify",
        }
    }
}

/// Decay parameters to certify, as `C`, `l0`, `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRequest {
    #[serde(rename = "C")]
    pub c: f64,
    pub l0: u32,
    pub sigma: f64,
}

/// Sizes for the tuple-counting task. Without `n`, the config geometry is
/// used: property P on a lattice, property Q on a hypergraph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombiParams {
    pub r: usize,
    #[serde(default)]
    pub l: Option<u32>,
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(rename = "D", default)]
    pub dim: Option<u32>,
}

/// Grid of `a` values (or orders `r` for moment theorems).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range { from: f64, to: f64, points: usize },
    /// `points` values from the smallest valid `a` to `span` times it.
    Regime {
        points: usize,
        #[serde(default = "default_span")]
        span: f64,
    },
}

fn default_span() -> f64 {
    3.0
}

impl Grid {
    fn linspace(from: f64, to: f64, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![from],
            _ => (0..points).map(|i| from + (to - from) * i as f64 / (points - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskParams {
    #[serde(default)]
    pub r_max: Option<usize>,
    #[serde(default)]
    pub grid: Option<Grid>,
    #[serde(default)]
    pub theorem: Option<TheoremId>,
    #[serde(default)]
    pub probe_class: Option<ProbeClass>,
    #[serde(default)]
    pub cluster_tol: Option<f64>,
    #[serde(default)]
    pub decay: Option<DecayRequest>,
    /// Smallest distance used when fitting a decay profile.
    #[serde(default)]
    pub fit_l0: Option<u32>,
    #[serde(default)]
    pub combi: Option<CombiParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub hamiltonian: Option<HamiltonianSpec>,
    #[serde(default)]
    pub state: Option<StateSpec>,
    /// When present, must match the task requested on the command line.
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: TaskParams,
    /// Default output directory, relative to the config file.
    #[serde(default)]
    pub out: Option<String>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::invalid(Module::Experiment, "config", format!("cannot read {}: {e}", path.display()))
        })?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| {
            Error::invalid(Module::Experiment, "config", format!("{}: {e}", path.display()))
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub shift_to_psd: bool,
    pub out_dir: Option<PathBuf>,
}

/// Everything built from a config before a task runs.
pub struct Model {
    pub geometry: Geometry,
    pub hamiltonian: Option<LocalHamiltonian>,
    pub state: Option<State>,
}

fn require<'a, T>(value: Option<&'a T>, field: &str) -> Result<&'a T> {
    value.ok_or_else(|| Error::invalid(Module::Experiment, field, "required by this task"))
}

pub fn build_model(cfg: &ExperimentConfig, opts: &RunOptions, need_state: bool) -> Result<Model> {
    let seed = opts.seed.unwrap_or(cfg.seed);
    let geometry = cfg.geometry.build()?;
    let hamiltonian = match &cfg.hamiltonian {
        Some(spec) => Some(spec.build(&geometry, seed, opts.shift_to_psd)?),
        None => None,
    };
    let state = match (&cfg.state, need_state) {
        (Some(spec), true) => {
            let spec = match spec {
                StateSpec::Binary { path } => StateSpec::Binary {
                    path: cfg.base_dir.join(path).to_string_lossy().into_owned(),
                },
                other => other.clone(),
            };
            // Offset keeps state randomness independent of the model's.
            Some(states::make_state(&spec, &geometry, hamiltonian.as_ref(), seed.wrapping_add(0x9e37_79b9_7f4a_7c15))?)
        }
        (None, true) => return Err(Error::invalid(Module::Experiment, "state", "required by this task")),
        _ => None,
    };
    Ok(Model {
        geometry,
        hamiltonian,
        state,
    })
}

fn write(dir: &Path, name: &str, contents: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    written.push(path);
    Ok(())
}

fn pretty(v: &impl Serialize) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Runs `task`, returning the paths written.
pub fn run(cfg: &ExperimentConfig, task: Task, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    if let Some(t) = cfg.task {
        if t != task {
            return Err(Error::invalid(
                Module::Experiment,
                "task",
                format!("config declares task {} but {} was requested", t.name(), task.name()),
            ));
        }
    }
    let dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.out.as_ref().map(|o| cfg.base_dir.join(o)))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    match task {
        Task::Build => run_build(cfg, opts, &dir, &mut written)?,
        Task::Distribution => run_distribution(cfg, opts, &dir, &mut written)?,
        Task::Moments => run_moments(cfg, opts, &dir, &mut written)?,
        Task::Combi => run_combi(cfg, &dir, &mut written)?,
        Task::Certify => run_certify(cfg, opts, &dir, &mut written)?,
        Task::Verify => run_verify(cfg, opts, &dir, &mut written)?,
    }
    Ok(written)
}

fn run_build(cfg: &ExperimentConfig, opts: &RunOptions, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let model = build_model(cfg, opts, false)?;
    let h = require(model.hamiltonian.as_ref(), "hamiltonian")?;
    let hm = h.assemble()?;
    let eig = linalg::eigvalsh(&hm)?;
    let n = h.term_count() as f64;
    let (lo, hi) = (eig[0], eig[eig.len() - 1]);
    if lo < -1e-9 || hi > n + 1e-9 {
        return Err(Error::Inconsistent(format!("spectrum [{lo}, {hi}] leaves [0, {n}]")));
    }
    let graph = model.geometry.as_hypergraph()?;
    let mut bin = Vec::new();
    hamiltonian::write_binary(&hm, &mut bin)?;
    write(dir, "hamiltonian.bin", &bin, written)?;
    let terms: Vec<hamiltonian::TermJson> = h.terms().iter().map(hamiltonian::TermJson::from_term).collect();
    write(dir, "terms.json", &pretty(&terms)?, written)?;
    let summary = json!({
        "spins": h.spin_count(),
        "terms": h.term_count(),
        "local_dim": h.local_dim(),
        "dim": hm.nrows(),
        "k": graph.k(),
        "m": graph.m(),
        "g": graph.g(),
        "min_eigenvalue": lo,
        "max_eigenvalue": hi,
        "hermitian_deviation": linalg::hermitian_deviation(&hm),
    });
    write(dir, "build.json", &pretty(&summary)?, written)
}

fn run_distribution(cfg: &ExperimentConfig, opts: &RunOptions, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let model = build_model(cfg, opts, true)?;
    let h = require(model.hamiltonian.as_ref(), "hamiltonian")?;
    let rho = require(model.state.as_ref(), "state")?.to_density()?;
    let dist = spectrum::energy_distribution(&rho, h, cfg.params.cluster_tol)?;
    write(dir, "distribution.csv", dist.to_csv().as_bytes(), written)
}

fn run_moments(cfg: &ExperimentConfig, opts: &RunOptions, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let model = build_model(cfg, opts, true)?;
    let h = require(model.hamiltonian.as_ref(), "hamiltonian")?;
    let rho = require(model.state.as_ref(), "state")?.to_density()?;
    let table = spectrum::central_moments(&rho, h, cfg.params.r_max.unwrap_or(8))?;
    write(dir, "moments.json", &pretty(&table)?, written)
}

fn biguint_json(b: &num_bigint::BigUint) -> Value {
    match b.to_u64() {
        Some(v) => json!(v),
        None => json!(b.to_string()),
    }
}

fn run_combi(cfg: &ExperimentConfig, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let p = *require(cfg.params.combi.as_ref(), "params.combi")?;
    let out = match (p.n, p.dim) {
        (Some(n), dim) => {
            let dim = dim.unwrap_or(1);
            let side = (n as f64).powf(1.0 / dim as f64).round() as u32;
            if (side as u64).pow(dim) != n {
                return Err(Error::invalid(Module::Experiment, "params.combi.n", format!("{n} is not a perfect {dim}-th power")));
            }
            let spec = LatticeSpec::new(dim, side, 0, 2)?;
            combi_lattice(&spec, p)?
        }
        (None, _) => match cfg.geometry.build()? {
            Geometry::Lattice(spec) => combi_lattice(&spec, p)?,
            Geometry::Hypergraph(h) => {
                let count = combinatorics::count_q_tuples(&h, p.r)?;
                let bound = combinatorics::bound_q(h.term_count() as u64, p.r, h.m() as u64)?;
                json!({
                    "property": "Q",
                    "n": h.term_count(),
                    "r": p.r,
                    "m": h.m(),
                    "count": count as u64,
                    "bound": biguint_json(&bound),
                    "ratio": ratio(count, &bound),
                })
            }
        },
    };
    write(dir, "combi.json", &pretty(&out)?, written)
}

fn ratio(count: u128, bound: &num_bigint::BigUint) -> Value {
    match bound.to_f64() {
        Some(b) if b > 0.0 => json!(count as f64 / b),
        _ => Value::Null,
    }
}

fn combi_lattice(spec: &LatticeSpec, p: CombiParams) -> Result<Value> {
    let l = p.l.ok_or_else(|| Error::invalid(Module::Experiment, "params.combi.l", "required for lattice counting"))?;
    let n = spec.interaction_count() as u64;
    let count = combinatorics::count_p_tuples(spec, p.r, l)?;
    let bound = combinatorics::bound_p(n, p.r, l as u64, spec.dim)?;
    Ok(json!({
        "property": "P",
        "n": n,
        "D": spec.dim,
        "r": p.r,
        "l": l,
        "count": count as u64,
        "bound": biguint_json(&bound),
        "ratio": ratio(count, &bound),
    }))
}

/// Certification outcome plus the profile it was judged on.
#[derive(Debug, Clone, Serialize)]
pub struct CertifyOutput {
    pub verdict: DecayVerdict,
    pub fit: Option<states::DecayFit>,
    pub profile: Vec<states::ProbeWitness>,
}

/// Certifies the requested decay, or fits one when none is requested.
pub fn certify(cfg: &ExperimentConfig, state: &State, geometry: &Geometry) -> Result<CertifyOutput> {
    let Geometry::Lattice(spec) = geometry else {
        return Err(Error::invalid(Module::Experiment, "geometry", "certification needs a lattice geometry"));
    };
    let class = cfg.params.probe_class.unwrap_or(ProbeClass::SingleSiteBasis);
    let rho = state.to_density()?;
    let profile = states::covariance_profile(&rho, spec, class)?;
    let fit_l0 = cfg.params.fit_l0.unwrap_or(1);
    let fit = states::fit_decay(&profile, fit_l0);
    let request = match cfg.params.decay {
        Some(d) => d,
        None => {
            let f = fit.as_ref().and_then(|f| f.sigma.zip(f.c)).or_else(|| {
                // Exactly uncorrelated beyond l0: any positive pair works.
                profile
                    .iter()
                    .filter(|w| w.distance >= fit_l0)
                    .all(|w| w.covariance <= states::FIT_FLOOR)
                    .then_some((1.0, states::FIT_FLOOR))
            });
            let (sigma, c) = f.ok_or_else(|| {
                Error::Precondition("correlations do not decay over the probed distances; give params.decay explicitly".into())
            })?;
            DecayRequest { c, l0: fit_l0, sigma }
        }
    };
    let verdict = states::judge_profile(&profile, request.c, request.l0, request.sigma, class);
    Ok(CertifyOutput { verdict, fit, profile })
}

fn run_certify(cfg: &ExperimentConfig, opts: &RunOptions, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let model = build_model(cfg, opts, true)?;
    let out = certify(cfg, require(model.state.as_ref(), "state")?, &model.geometry)?;
    write(dir, "certificate.json", &pretty(&out)?, written)
}

/// Grid values for `theorem`, resolving regime-relative grids.
pub fn resolve_grid(grid: &Grid, theorem: TheoremId, h: &LocalHamiltonian, cert: Option<&CorrelationCertificate>) -> Result<Vec<f64>> {
    Ok(match grid {
        Grid::Values(v) => v.clone(),
        Grid::Range { from, to, points } => Grid::linspace(*from, *to, *points),
        Grid::Regime { points, span } => {
            let n = h.term_count() as f64;
            let a_min = match theorem {
                TheoremId::ProductTail => {
                    let m = bounds::effective_m(h.geometry().as_hypergraph()?.m() as u64);
                    (8.0 * std::f64::consts::E * m * m / n).sqrt()
                }
                TheoremId::SpinCountTail => {
                    let p = bounds::SpinCountParams::from_geometry(h.geometry())?;
                    (8.0 * std::f64::consts::E * p.scale()).sqrt() / n
                }
                TheoremId::DecayTail => {
                    let cert = cert.ok_or_else(|| Error::Precondition("decay grid needs a certificate".into()))?;
                    let Geometry::Lattice(spec) = h.geometry() else {
                        return Err(Error::invalid(Module::Experiment, "geometry", "decay theorems need a lattice"));
                    };
                    let p = bounds::DecayParams {
                        n,
                        c: cert.c,
                        l0: cert.l0 as f64,
                        sigma: cert.sigma,
                        dim: spec.dim,
                        k: spec.k as f64,
                    };
                    let r = bounds::tail_bound_decay(&p, 1.0)?;
                    let g = r.params["gaussian_min_a"];
                    let s = r.params["stretched_min_a"];
                    if r.range_empty == Some(true) {
                        s
                    } else {
                        g.min(s)
                    }
                }
                _ => return Err(Error::invalid(Module::Experiment, "params.grid", "regime grids apply to tail theorems")),
            };
            Grid::linspace(a_min, a_min * span, *points)
        }
    })
}

/// Reports and the certificate they relied on.
pub struct VerifyOutput {
    pub reports: Vec<BoundReport>,
    pub certificate: Option<CorrelationCertificate>,
}

/// Evaluates the configured theorem; `abort` turns false verdicts into
/// [`Error::TheoremViolation`].
pub fn verify(cfg: &ExperimentConfig, opts: &RunOptions, abort: bool) -> Result<VerifyOutput> {
    let model = build_model(cfg, opts, true)?;
    let h = require(model.hamiltonian.as_ref(), "hamiltonian")?;
    let state = require(model.state.as_ref(), "state")?;
    let theorem = *require(cfg.params.theorem.as_ref(), "params.theorem")?;
    let certificate = if theorem.needs_certificate() {
        match certify(cfg, state, &model.geometry)?.verdict {
            DecayVerdict::Certified(c) => Some(c),
            DecayVerdict::Violated(v) => {
                return Err(Error::Precondition(format!(
                    "requested decay is not certified: covariance {:e} at distance {} exceeds {:e}",
                    v.witness.covariance, v.witness.distance, v.allowed
                )))
            }
        }
    } else {
        None
    };
    let grid = require(cfg.params.grid.as_ref(), "params.grid")?;
    let grid = resolve_grid(grid, theorem, h, certificate.as_ref())?;
    let input = SweepInput {
        state,
        hamiltonian: h,
        certificate: certificate.as_ref(),
        cluster_tol: cfg.params.cluster_tol,
    };
    let reports = if abort {
        bounds::verify_sweep(&input, theorem, &grid)?
    } else {
        bounds::evaluate_sweep(&input, theorem, &grid)?
    };
    Ok(VerifyOutput { reports, certificate })
}

fn run_verify(cfg: &ExperimentConfig, opts: &RunOptions, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let out = match verify(cfg, opts, true) {
        Err(Error::TheoremViolation { count, first }) => {
            // Keep the evidence before aborting.
            let all = verify(cfg, opts, false)?;
            write(dir, "reports.json", &pretty(&all.reports)?, written)?;
            write(dir, "sweep.csv", bounds::sweep_csv(&all.reports).as_bytes(), written)?;
            return Err(Error::TheoremViolation { count, first });
        }
        other => other?,
    };
    write(dir, "reports.json", &pretty(&out.reports)?, written)?;
    write(dir, "sweep.csv", bounds::sweep_csv(&out.reports).as_bytes(), written)
}

/// Spectral data for a built model, for callers that want more than one
/// artifact from a single diagonalisation.
pub fn spectral_data(model: &Model) -> Result<SpectralData> {
    let h = require(model.hamiltonian.as_ref(), "hamiltonian")?;
    let rho = require(model.state.as_ref(), "state")?.to_density()?;
    SpectralData::new(&rho, &h.assemble()?)
}
