//! Closed-form moment and tail bounds, their regimes, and verdicts against
//! exact spectra.
//!
//! Every bound is evaluated exactly as printed. Alongside it, reports carry
//! `markov_chain_value`: Markov's inequality applied to the corresponding
//! moment bound at the order `r` the derivation picks. The chain value is
//! what the derivation actually establishes, and it is always a valid upper
//! bound on the tail.

use std::collections::BTreeMap;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Module, Result};
use crate::hamiltonian::LocalHamiltonian;
use crate::lattice::Geometry;
use crate::spectrum::{self, EnergyDistribution, MomentTable, Side, SpectralData};
use crate::states::{CorrelationCertificate, DensityState, State};

/// Slack in `empirical <= bound + SLACK`.
pub const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremId {
    /// Moment bound for states with exponentially decaying correlations.
    DecayMoment,
    /// Tail bound for such states; Gaussian and stretched regimes.
    DecayTail,
    /// Moment bound for product states on bounded-degree hypergraphs.
    ProductMoment,
    /// Tail bound for product states.
    ProductTail,
    /// The product tail bound restated with spin count `N`, degree `g` and
    /// exact locality `k`.
    SpinCountTail,
}

impl TheoremId {
    pub fn is_moment(self) -> bool {
        matches!(self, TheoremId::DecayMoment | TheoremId::ProductMoment)
    }

    pub fn needs_certificate(self) -> bool {
        matches!(self, TheoremId::DecayMoment | TheoremId::DecayTail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeBound {
    pub regime: String,
    pub bound: f64,
    /// Order chosen by the derivation.
    pub r: u64,
    pub markov_chain_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BoundReport {
    pub theorem: Option<TheoremId>,
    pub params: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    pub regime_valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range_empty: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub regimes: Vec<RegimeBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_value: Option<f64>,
    pub vacuous: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub markov_chain_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_tail: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_moment: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub satisfied: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BoundReport {
    fn new(theorem: TheoremId, params: &[(&str, f64)]) -> Self {
        BoundReport {
            theorem: Some(theorem),
            params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            ..Default::default()
        }
    }

    fn set_bound(&mut self, value: f64) {
        self.bound_value = Some(value);
        self.vacuous = value > 1.0;
    }

    /// Records an empirical tail and, in regime, the verdict.
    pub fn judge_tail(&mut self, tail: f64) {
        self.empirical_tail = Some(tail);
        self.satisfied = match (self.regime_valid, self.bound_value) {
            (true, Some(b)) => Some(tail <= b + SLACK),
            _ => None,
        };
    }

    fn judge_moment(&mut self, moment: f64) {
        self.empirical_moment = Some(moment);
        self.satisfied = self.bound_value.map(|b| moment <= b * (1.0 + SLACK) + SLACK);
    }
}

/// `ceil(x)`, except that values within a few ulps above an integer round
/// down to it, so thresholds computed in floating point do not jump.
pub fn guarded_ceil(x: f64) -> f64 {
    let c = x.ceil();
    let below = c - 1.0;
    if x - below <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
        below
    } else {
        c
    }
}

/// `a >= t`, allowing `a` a few ulps short of `t`.
fn at_least(a: f64, t: f64) -> bool {
    a >= t * (1.0 - 4.0 * f64::EPSILON)
}

fn check_even(r: u64) -> Result<()> {
    if r == 0 || r % 2 == 1 {
        return Err(Error::OddOrder(r as usize));
    }
    Ok(())
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::invalid(Module::Bounds, name, "must be positive and finite"));
    }
    Ok(())
}

/// Parameters of the decay-of-correlation theorems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub n: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub l0: f64,
    pub sigma: f64,
    #[serde(rename = "D")]
    pub dim: u32,
    pub k: f64,
}

impl DecayParams {
    /// `4 l0 + 8 D k`.
    pub fn a_const(&self) -> f64 {
        4.0 * self.l0 + 8.0 * self.dim as f64 * self.k
    }

    /// `1 + C sigma e^{2Dk/sigma}`.
    pub fn prefactor(&self) -> f64 {
        1.0 + self.c * self.sigma * self.correlation_factor()
    }

    fn correlation_factor(&self) -> f64 {
        (2.0 * self.dim as f64 * self.k / self.sigma).exp()
    }

    fn validate(&self) -> Result<()> {
        check_positive("n", self.n)?;
        check_positive("sigma", self.sigma)?;
        check_positive("l0", self.l0)?;
        if self.c < 0.0 || self.k < 0.0 || self.dim == 0 {
            return Err(Error::invalid(Module::Bounds, "decay", "C, k must be non-negative and D positive"));
        }
        Ok(())
    }

    fn pairs(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("n", self.n),
            ("C", self.c),
            ("l0", self.l0),
            ("sigma", self.sigma),
            ("D", self.dim as f64),
            ("k", self.k),
        ]
    }
}

/// `(4 A^D n r)^{r/2} + C e^{2Dk/sigma} sigma (4 (D sigma / 2)^D n r^{D+1})^{r/2}`
/// with `A = 4 l0 + 8 D k`.
pub fn moment_bound_decay(p: &DecayParams, r: u64) -> Result<f64> {
    check_even(r)?;
    p.validate()?;
    let (d, rf, half) = (p.dim as i32, r as f64, r as f64 / 2.0);
    let first = (4.0 * p.a_const().powi(d) * p.n * rf).powf(half);
    let second = p.c
        * p.correlation_factor()
        * p.sigma
        * (4.0 * (p.dim as f64 * p.sigma / 2.0).powi(d) * p.n * rf.powi(d + 1)).powf(half);
    Ok(first + second)
}

/// Markov applied to [`moment_bound_decay`] at deviation `n a`.
pub fn decay_markov_chain(p: &DecayParams, a: f64, r: u64) -> Result<f64> {
    let (d, rf, half) = (p.dim as i32, r as f64, r as f64 / 2.0);
    let na2 = p.n * a * a;
    check_even(r)?;
    let first = (4.0 * p.a_const().powi(d) * rf / na2).powf(half);
    let second = p.c
        * p.correlation_factor()
        * p.sigma
        * (4.0 * (p.dim as f64 * p.sigma / 2.0).powi(d) * rf.powi(d + 1) / na2).powf(half);
    Ok(first + second)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// Last index summed explicitly; the rest is the exact tail integral.
    pub l_max: u64,
    pub remainder: f64,
    pub holds: bool,
}

/// `sum_{l>=1} l^p e^{-l/sigma}` (plus a rigorous tail remainder) against
/// `sigma^{p+1} p^p`, `p = rD/2`.
pub fn integral_estimate_check(r: u64, dim: u32, sigma: f64, l_max: u64) -> Result<IntegralCheck> {
    check_even(r)?;
    check_positive("sigma", sigma)?;
    let p = r * dim as u64 / 2;
    if p == 0 {
        return Err(Error::invalid(Module::Bounds, "D", "must be positive"));
    }
    // The summand decreases beyond l = p sigma, so the tail sum is at most
    // the integral from l_max on.
    let l_max = l_max.max((p as f64 * sigma).ceil() as u64).max(1);
    let pi = p as i32;
    let mut lhs = 0.0;
    for l in 1..=l_max {
        let lf = l as f64;
        lhs += (pi as f64 * lf.ln() - lf / sigma).exp();
    }
    let x = l_max as f64 / sigma;
    // Gamma(p + 1, x) = p! e^{-x} sum_{j<=p} x^j / j!.
    let mut series = 0.0;
    let mut term = 1.0;
    for j in 0..=p {
        if j > 0 {
            term *= x / j as f64;
        }
        series += term;
    }
    let factorial: f64 = (1..=p).map(|j| j as f64).product();
    let remainder = sigma.powi(pi + 1) * factorial * (-x).exp() * series;
    lhs += remainder;
    let rhs = sigma.powi(pi + 1) * (p as f64).powi(pi);
    Ok(IntegralCheck {
        lhs,
        rhs,
        l_max,
        remainder,
        holds: lhs <= rhs,
    })
}

/// Regime analysis and bound for decaying-correlation states at deviation
/// `n a`.
pub fn tail_bound_decay(p: &DecayParams, a: f64) -> Result<BoundReport> {
    p.validate()?;
    check_positive("a", a)?;
    let mut params = p.pairs();
    params.push(("a", a));
    let mut report = BoundReport::new(TheoremId::DecayTail, &params);
    let big_a = p.a_const();
    let d = p.dim as f64;
    let na2 = p.n * a * a;
    let g_lo = (8.0 * E * big_a.powf(d) / p.n).sqrt();
    let g_hi = (8.0 * E * big_a.powf(d + 1.0) / (p.n * d * p.sigma)).sqrt();
    let s_lo = (big_a.powf(d + 1.0) / (d * p.sigma * p.n)).sqrt();
    report.params.insert("gaussian_min_a".into(), g_lo);
    report.params.insert("gaussian_max_a".into(), g_hi);
    report.params.insert("stretched_min_a".into(), s_lo);
    let range_empty = g_lo > g_hi;
    report.range_empty = Some(range_empty);
    if range_empty {
        report.notes.push("gaussian range is empty at these parameters".into());
    }
    if !range_empty && at_least(a, g_lo) && at_least(g_hi, a) {
        let x = na2 / (8.0 * E * big_a.powf(d));
        let r = 2 * guarded_ceil(x) as u64;
        report.regimes.push(RegimeBound {
            regime: "gaussian".into(),
            bound: p.prefactor() * (-x).exp(),
            r,
            markov_chain_value: decay_markov_chain(p, a, r)?,
        });
    }
    if at_least(a, s_lo) {
        let y = (na2 / (8.0 * E * (d * p.sigma).powf(d))).powf(1.0 / (d + 1.0));
        let r = 2 * (guarded_ceil(y) as u64).max(1);
        report.regimes.push(RegimeBound {
            regime: "stretched".into(),
            bound: p.prefactor() * (-y).exp(),
            r,
            markov_chain_value: decay_markov_chain(p, a, r)?,
        });
    }
    finish_regimes(&mut report);
    Ok(report)
}

/// Sets validity and the preferred (smallest) printed bound and chain value.
fn finish_regimes(report: &mut BoundReport) {
    report.regime_valid = !report.regimes.is_empty();
    if let Some(best) = report.regimes.iter().map(|g| g.bound).reduce(f64::min) {
        report.set_bound(best);
        report.markov_chain_value = report.regimes.iter().map(|g| g.markov_chain_value).reduce(f64::min);
    }
    if report.regimes.len() > 1 {
        report.notes.push("both regimes apply; bound_value is their minimum".into());
    }
}

/// `max(m, 1)`: every term neighbours itself, so the moment bound needs at
/// least one neighbour.
pub fn effective_m(m: u64) -> f64 {
    m.max(1) as f64
}

/// `(4 m^2 n r)^{r/2}`.
pub fn moment_bound_product(n: f64, r: u64, m: u64) -> Result<f64> {
    check_even(r)?;
    let m = effective_m(m);
    Ok((4.0 * m * m * n * r as f64).powf(r as f64 / 2.0))
}

/// `(4 m^2 r / (n a^2))^{r/2}`.
pub fn product_markov_chain(n: f64, a: f64, m: u64, r: u64) -> Result<f64> {
    check_even(r)?;
    let m = effective_m(m);
    Ok((4.0 * m * m * r as f64 / (n * a * a)).powf(r as f64 / 2.0))
}

/// Product-state tail: valid for `a >= sqrt(8 e m^2 / n)`, bound
/// `e^{-n a^2 / (4 e m^2)}`.
pub fn tail_bound_product(n: f64, a: f64, m: u64) -> Result<BoundReport> {
    check_positive("n", n)?;
    check_positive("a", a)?;
    let mut report = BoundReport::new(TheoremId::ProductTail, &[("n", n), ("a", a), ("m", m as f64)]);
    let me = effective_m(m);
    if m == 0 {
        report.notes.push("m = 0 evaluated as m = 1".into());
    }
    let a_min = (8.0 * E * me * me / n).sqrt();
    report.params.insert("min_a".into(), a_min);
    if at_least(a, a_min) {
        let r = 2 * guarded_ceil(n * a * a / (8.0 * E * me * me)) as u64;
        report.regimes.push(RegimeBound {
            regime: "product".into(),
            bound: (-(n * a * a) / (4.0 * E * me * me)).exp(),
            r,
            markov_chain_value: product_markov_chain(n, a, m, r)?,
        });
    }
    finish_regimes(&mut report);
    Ok(report)
}

/// Degree data needed by the spin-count form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinCountParams {
    /// Number of spins.
    #[serde(rename = "N")]
    pub spins: f64,
    pub g: u64,
    pub k: u64,
    /// Number of terms and neighbour bound, when known, for the relations
    /// `g N >= k n` and `m <= k g`.
    pub n: Option<f64>,
    pub m: Option<u64>,
}

impl SpinCountParams {
    pub fn from_geometry(geometry: &Geometry) -> Result<Self> {
        let h = geometry.as_hypergraph()?;
        let k = h.uniform_locality().ok_or_else(|| {
            Error::invalid(Module::Bounds, "k", "every term must act on exactly k spins")
        })?;
        Ok(SpinCountParams {
            spins: h.spin_count() as f64,
            g: h.g() as u64,
            k: k as u64,
            n: Some(h.term_count() as f64),
            m: Some(h.m() as u64),
        })
    }

    /// `g^3 k N`.
    pub fn scale(&self) -> f64 {
        (self.g as f64).powi(3) * self.k as f64 * self.spins
    }
}

/// Tail at deviation `eps`: valid for `eps >= sqrt(8 e g^3 k N)`, bound
/// `e^{-eps^2 / (4 e g^3 k N)}`.
pub fn tail_bound_corollary(p: &SpinCountParams, eps: f64) -> Result<BoundReport> {
    check_positive("N", p.spins)?;
    check_positive("eps", eps)?;
    if p.g == 0 || p.k == 0 {
        return Err(Error::invalid(Module::Bounds, "g", "g and k must be positive"));
    }
    let mut report = BoundReport::new(
        TheoremId::SpinCountTail,
        &[("N", p.spins), ("g", p.g as f64), ("k", p.k as f64), ("eps", eps)],
    );
    let scale = p.scale();
    report.params.insert("g3kN".into(), scale);
    let eps_min = (8.0 * E * scale).sqrt();
    report.params.insert("min_eps".into(), eps_min);
    if let Some(n) = p.n {
        report.params.insert("n".into(), n);
        let gn = p.g as f64 * p.spins;
        let kn = p.k as f64 * n;
        report.notes.push(format!("gN = {gn} {} kn = {kn}", if gn >= kn { ">=" } else { "<" }));
    }
    if let Some(m) = p.m {
        report.params.insert("m".into(), m as f64);
        let kg = p.k * p.g;
        report.notes.push(format!("m = {m} {} kg = {kg}", if m <= kg { "<=" } else { ">" }));
    }
    if at_least(eps, eps_min) {
        let x = eps * eps / (8.0 * E * scale);
        let r = 2 * guarded_ceil(x) as u64;
        let chain = (4.0 * scale * r as f64 / (eps * eps)).powf(r as f64 / 2.0);
        report.regimes.push(RegimeBound {
            regime: "spin-count".into(),
            bound: (-(eps * eps) / (4.0 * E * scale)).exp(),
            r,
            markov_chain_value: chain,
        });
    } else {
        report.notes.push(format!("vacuous range: needs eps >= {eps_min:.4}"));
    }
    finish_regimes(&mut report);
    Ok(report)
}

/// Everything a sweep needs, precomputed once.
pub struct SweepInput<'a> {
    pub state: &'a State,
    pub hamiltonian: &'a LocalHamiltonian,
    pub certificate: Option<&'a CorrelationCertificate>,
    pub cluster_tol: Option<f64>,
}

/// [`evaluate_sweep`], aborting with [`Error::TheoremViolation`] if any
/// verdict is false.
pub fn verify_sweep(input: &SweepInput<'_>, theorem: TheoremId, grid: &[f64]) -> Result<Vec<BoundReport>> {
    finish_sweep(evaluate_sweep(input, theorem, grid)?)
}

/// Evaluates `theorem` on every grid point and compares with the exact
/// spectrum. Tail theorems read the grid as values of `a` (deviation
/// `n a` on both sides of the mean); moment theorems read it as orders `r`.
pub fn evaluate_sweep(input: &SweepInput<'_>, theorem: TheoremId, grid: &[f64]) -> Result<Vec<BoundReport>> {
    let h = input.hamiltonian;
    let n = h.term_count() as f64;
    let geometry = h.geometry();
    let decay = if theorem.needs_certificate() {
        let cert = input
            .certificate
            .ok_or_else(|| Error::Precondition("decay theorems need a correlation certificate".into()))?;
        let Geometry::Lattice(spec) = geometry else {
            return Err(Error::invalid(Module::Bounds, "geometry", "decay theorems need a lattice geometry"));
        };
        Some(DecayParams {
            n,
            c: cert.c,
            l0: cert.l0 as f64,
            sigma: cert.sigma,
            dim: spec.dim,
            k: spec.k as f64,
        })
    } else {
        None
    };
    if matches!(theorem, TheoremId::ProductTail | TheoremId::ProductMoment | TheoremId::SpinCountTail)
        && input.state.as_product().is_none()
    {
        return Err(Error::Precondition("product-state theorems need a product state".into()));
    }
    let m = geometry.as_hypergraph()?.m() as u64;
    let spin_params = if theorem == TheoremId::SpinCountTail {
        Some(SpinCountParams::from_geometry(geometry)?)
    } else {
        None
    };

    let density: DensityState = input.state.to_density()?;
    let hm = h.assemble()?;
    let data = SpectralData::new(&density, &hm)?;
    let mean = data.mean();
    let cert_notes = |report: &mut BoundReport| {
        if let Some(c) = input.certificate.filter(|_| theorem.needs_certificate()) {
            let class = serde_json::to_string(&c.probe_class).unwrap_or_default();
            report.notes.push(format!("decay certified on probe class {class}; tuples beyond l0 + 2Dk use it"));
        }
    };

    if theorem.is_moment() {
        let orders: Vec<u64> = grid.iter().map(|&r| r as u64).collect();
        if orders.iter().zip(grid).any(|(&r, &g)| r as f64 != g) {
            return Err(Error::invalid(Module::Bounds, "grid", "moment theorems take integer orders r"));
        }
        let r_max = orders.iter().copied().max().unwrap_or(2) as usize;
        let r_max = r_max + r_max % 2;
        let table: MomentTable = spectrum::central_moments_with(&density, &hm, &data, r_max.max(2))?;
        let mut out = Vec::with_capacity(orders.len());
        for r in orders {
            check_even(r)?;
            let mut report;
            let bound = match decay {
                Some(p) => {
                    let mut params = p.pairs();
                    params.push(("r", r as f64));
                    report = BoundReport::new(theorem, &params);
                    moment_bound_decay(&p, r)?
                }
                None => {
                    report = BoundReport::new(theorem, &[("n", n), ("m", m as f64), ("r", r as f64)]);
                    moment_bound_product(n, r, m)?
                }
            };
            report.regime_valid = true;
            report.set_bound(bound);
            report.vacuous = false;
            report.judge_moment(table.get(r as usize)?);
            cert_notes(&mut report);
            out.push(report);
        }
        return Ok(out);
    }

    let dist = EnergyDistribution::from_spectral(&data, input.cluster_tol.unwrap_or_else(|| spectrum::default_cluster_tol(h.term_count())));
    let mut out = Vec::with_capacity(2 * grid.len());
    for &a in grid {
        for side in [Side::Geq, Side::Leq] {
            let mut report = match theorem {
                TheoremId::DecayTail => tail_bound_decay(decay.as_ref().expect("decay params"), a)?,
                TheoremId::ProductTail => tail_bound_product(n, a, m)?,
                TheoremId::SpinCountTail => tail_bound_corollary(spin_params.as_ref().expect("spin params"), n * a)?,
                _ => unreachable!("moment theorems handled above"),
            };
            report.params.insert("a".into(), a);
            report.params.insert("mean".into(), mean);
            report.side = Some(side);
            let threshold = match side {
                Side::Geq => mean + n * a,
                Side::Leq => mean - n * a,
            };
            report.params.insert("threshold".into(), threshold);
            report.judge_tail(dist.tail_weight_inclusive(threshold, side));
            cert_notes(&mut report);
            out.push(report);
        }
    }
    Ok(out)
}

fn finish_sweep(reports: Vec<BoundReport>) -> Result<Vec<BoundReport>> {
    let failed: Vec<&BoundReport> = reports.iter().filter(|r| r.satisfied == Some(false)).collect();
    if let Some(first) = failed.first() {
        return Err(Error::TheoremViolation {
            count: failed.len(),
            first: serde_json::to_string(first)?,
        });
    }
    Ok(reports)
}

/// Sweep rows `a, empirical_tail, bound, regime` (one per report).
pub fn sweep_csv(reports: &[BoundReport]) -> String {
    let mut out = String::from("a,side,empirical_tail,bound,regime\n");
    for r in reports {
        let a = r.params.get("a").or_else(|| r.params.get("r")).copied().unwrap_or(f64::NAN);
        let side = match r.side {
            Some(Side::Geq) => "upper",
            Some(Side::Leq) => "lower",
            None => "moment",
        };
        let emp = r.empirical_tail.or(r.empirical_moment).map(spectrum::fmt_num).unwrap_or_default();
        let bound = r.bound_value.map(spectrum::fmt_num).unwrap_or_default();
        let regime = if r.regime_valid {
            r.regimes.iter().map(|g| g.regime.as_str()).collect::<Vec<_>>().join("+")
        } else {
            "none".to_string()
        };
        let regime = if regime.is_empty() { "moment".to_string() } else { regime };
        out.push_str(&format!("{},{side},{emp},{bound},{regime}\n", spectrum::fmt_num(a)));
    }
    out
}
