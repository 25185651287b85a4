//! Randomized check harness: samples admissible measures on a space and runs
//! every comparison check on them, aggregating per-check results.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::gram::{SolverConfig, ORACLE_MAX_ATOMS};
use crate::invariants::{
    alpha_rescale_check, cone_vs_base_check, embedding_check, product_delta_check, radial_check,
    strip_check, Backend, CheckReport,
};
use crate::measure::{ball_mass_check, strip_cone_point_mass, ConeMeasure};
use crate::metric::{FiniteMetricSpace, ProductConePoint, ProductConfiguration};
use crate::net::{
    constant_general, general_hypothesis_check, greedy_net, net_bound_pipeline, PipelineConfig,
};
use crate::sampling::{random_admissible_cone_measure, random_admissible_measure};

pub const CHECK_BALL_MASS: &str = "ball-mass-at-most-cap-bound";
pub const CHECK_NET_CHAIN: &str = "net-kernel-bound-chain";
pub const CHECK_GENERAL_BOUND: &str = "separated-net-constant-bound";

/// Angles at which ball masses are checked.
pub const BALL_THETAS: [f64; 5] = [0.0, PI / 12.0, PI / 6.0, PI / 4.0, PI / 3.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralNetParams {
    pub theta: f64,
    pub alpha: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub trials: usize,
    pub seed: u64,
    pub jobs: usize,
    /// Slack on comparisons between invariant values.
    pub tol: f64,
    /// Slack on barycenter defects and ball masses.
    pub defect_tol: f64,
    /// Use the full-matrix solver where the problem is small enough.
    pub oracle: bool,
    pub solver: SolverConfig,
    pub net_radius: f64,
    pub general: Option<GeneralNetParams>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            trials: 20,
            seed: 0,
            jobs: 1,
            tol: 1e-4,
            defect_tol: crate::measure::DEFAULT_DEFECT_TOL,
            oracle: false,
            solver: SolverConfig::default(),
            net_radius: crate::net::DEFAULT_NET_RADIUS,
            general: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CheckSummary {
    pub runs: usize,
    pub passed: usize,
    /// Largest `lhs − rhs` seen.
    pub worst_margin: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub trial: usize,
    pub report: CheckReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub trials: usize,
    pub seed: u64,
    /// Trials for which no admissible measure could be sampled.
    pub skipped_trials: usize,
    pub checks: BTreeMap<String, CheckSummary>,
    pub failures: Vec<Failure>,
    pub errors: Vec<String>,
    pub all_passed: bool,
    /// Values are invariants of the finite sample given, not of any space it
    /// approximates.
    pub label: &'static str,
}

/// Runs `cfg.trials` independent trials; trial `k` uses its own generator
/// stream, so the report does not depend on `cfg.jobs`.
pub fn run_verify(space: &FiniteMetricSpace, cfg: &VerifyConfig) -> Result<VerifyReport> {
    let space = Arc::new(space.clone());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let outcomes: Vec<TrialOutcome> =
        pool.install(|| (0..cfg.trials).into_par_iter().map(|k| run_trial(&space, cfg, k)).collect());

    let mut report = VerifyReport {
        trials: cfg.trials,
        seed: cfg.seed,
        skipped_trials: 0,
        checks: BTreeMap::new(),
        failures: Vec::new(),
        errors: Vec::new(),
        all_passed: true,
        label: "finite-sample invariants",
    };
    for (k, outcome) in outcomes.into_iter().enumerate() {
        if outcome.skipped {
            report.skipped_trials += 1;
        }
        for r in outcome.reports {
            let s = report.checks.entry(r.check.clone()).or_insert(CheckSummary {
                worst_margin: f64::NEG_INFINITY,
                tol: r.tol,
                ..CheckSummary::default()
            });
            s.runs += 1;
            s.worst_margin = s.worst_margin.max(r.lhs - r.rhs);
            if r.holds {
                s.passed += 1;
            } else {
                report.failures.push(Failure { trial: k, report: r });
            }
        }
        report.errors.extend(outcome.errors.into_iter().map(|e| format!("trial {k}: {e}")));
    }
    report.all_passed = report.failures.is_empty() && report.errors.is_empty();
    Ok(report)
}

#[derive(Default)]
struct TrialOutcome {
    skipped: bool,
    reports: Vec<CheckReport>,
    errors: Vec<String>,
}

impl TrialOutcome {
    fn push(&mut self, r: Result<CheckReport>) {
        match r {
            Ok(r) => self.reports.push(r),
            Err(e) => self.errors.push(e.to_string()),
        }
    }
}

fn backend_for(cfg: &VerifyConfig, atoms: usize, seed: u64) -> Backend {
    if cfg.oracle && atoms <= ORACLE_MAX_ATOMS {
        Backend::Oracle
    } else {
        Backend::Solver(SolverConfig { seed, ..cfg.solver })
    }
}

fn run_trial(space: &Arc<FiniteMetricSpace>, cfg: &VerifyConfig, k: usize) -> TrialOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(k as u64);
    let mut out = TrialOutcome::default();
    let Some(mu) = random_admissible_measure(space, &mut rng) else {
        out.skipped = true;
        return out;
    };
    let solver_seed: u64 = rng.random();
    let n = space.len();

    for x in 0..n {
        for &theta in &BALL_THETAS {
            out.push(ball_mass_check(space, &mu, x, theta, cfg.defect_tol).map(|b| {
                CheckReport::le(CHECK_BALL_MASS, b.mass, b.bound, cfg.defect_tol, json!({ "x": x, "theta": theta }))
            }));
        }
    }

    // Mixed radii with a cone-point atom, then the chain strip → rescale → normalize.
    if let Some(nu) = random_admissible_cone_measure(space.clone(), 0.3, 3.0, 0.15, &mut rng) {
        let b = backend_for(cfg, nu.measure().len(), solver_seed);
        out.push(strip_check(&nu, &b, cfg.tol, cfg.defect_tol));
        out.push(cone_vs_base_check(&nu, &b, cfg.tol, cfg.defect_tol));
        if let Ok(stripped) = strip_cone_point_mass(&nu) {
            out.push(radial_check(&stripped, &b, cfg.tol, cfg.defect_tol));
            let atoms: Vec<usize> = stripped.measure().atoms().iter().map(|a| a.index).collect();
            if atoms.len() >= 2 {
                let size = rng.random_range(1..atoms.len());
                let group: Vec<usize> = sample(&mut rng, atoms.len(), size).iter().map(|i| atoms[i]).collect();
                for alpha in [rng.random_range(0.2..0.95), rng.random_range(1.05..5.0)] {
                    out.push(alpha_rescale_check(&stripped, &group, alpha, &b, cfg.tol, cfg.defect_tol));
                }
            }
        }
    }

    // Product of two copies of the space under a coupling of two admissible marginals.
    if let (Some(a), Some(c)) = (
        small_cone_measure(space, 4, &mut rng),
        small_cone_measure(space, 4, &mut rng),
    ) {
        match couple(&a, &c, &mut rng) {
            Ok((pc, m)) => {
                let b = backend_for(cfg, m.len(), solver_seed);
                out.push(product_delta_check(&pc, &m, &b, cfg.tol, cfg.defect_tol));
                let factors = vec![space.clone(), space.clone()];
                let b = backend_for(cfg, a.measure().len(), solver_seed);
                out.push(embedding_check(rng.random_range(0..2), &a, &factors, &b, 1e-8));
            }
            Err(e) => out.errors.push(e.to_string()),
        }
    }

    let b = backend_for(cfg, n, solver_seed);
    let pcfg = PipelineConfig { net_radius: cfg.net_radius, tol: cfg.tol, defect_tol: cfg.defect_tol, backend: b };
    out.push(net_bound_pipeline(space, &mu, &pcfg).map(|r| {
        let mut c = CheckReport::le(CHECK_NET_CHAIN, r.sdp_value, r.big_c_n, cfg.tol, json!(r));
        c.holds = r.chain_ok;
        c
    }));

    if let Some(g) = cfg.general {
        out.push(general_bound_check(space, &mu, g, &b, cfg));
    }
    out
}

/// `δ̃(μ) ≤ c²_{θ,α,ε}` for the net at the configured radius, provided the
/// separation hypothesis holds on it.
fn general_bound_check(
    space: &FiniteMetricSpace,
    mu: &crate::measure::WeightedMeasure,
    g: GeneralNetParams,
    b: &Backend,
    cfg: &VerifyConfig,
) -> Result<CheckReport> {
    let net = greedy_net(space, cfg.net_radius)?;
    let h = general_hypothesis_check(space, &net.centers, g.theta, g.alpha, g.eps);
    let (_, c2) = constant_general(g.theta, g.alpha, g.eps)?;
    if !h.holds {
        return Err(Error::InvalidArgument(format!("net hypothesis fails at pair {:?}", h.failing_pair)));
    }
    let v = crate::invariants::delta_tilde_mu(space, mu, b, cfg.defect_tol)?.value;
    Ok(CheckReport::le(CHECK_GENERAL_BOUND, v, c2, cfg.tol, json!({ "hypothesis": h })))
}

/// An admissible cone measure with at most `max_atoms` atoms.
fn small_cone_measure<R: Rng + ?Sized>(
    space: &Arc<FiniteMetricSpace>,
    max_atoms: usize,
    rng: &mut R,
) -> Option<ConeMeasure> {
    for _ in 0..20 {
        let n = space.len().min(max_atoms + 2);
        let mut idx: Vec<usize> = (0..space.len()).collect();
        idx.shuffle(rng);
        idx.truncate(n);
        idx.sort_unstable();
        let sub = Arc::new(space.subspace(&idx));
        let apex = if rng.random_bool(0.3) { 0.2 } else { 0.0 };
        let Some(nu) = random_admissible_cone_measure(sub, 0.5, 2.0, apex, rng) else {
            continue;
        };
        if nu.measure().len() > max_atoms {
            continue;
        }
        let atoms: Vec<_> = nu
            .weighted_points()
            .map(|(p, w)| {
                let q = match p.base() {
                    Some(b) => crate::metric::ConePoint::new(idx[b], p.radius()).expect("valid radius"),
                    None => p,
                };
                (q, w)
            })
            .collect();
        if let Ok(m) = ConeMeasure::from_atoms(space.clone(), atoms) {
            return Some(m);
        }
    }
    None
}

/// A coupling of two cone measures on the same space by the north-west
/// corner rule after shuffling both atom orders; it has at most
/// `|a| + |c| − 1` atoms.
pub fn couple<R: Rng + ?Sized>(
    a: &ConeMeasure,
    c: &ConeMeasure,
    rng: &mut R,
) -> Result<(ProductConfiguration, crate::measure::WeightedMeasure)> {
    let mut xs: Vec<_> = a.weighted_points().collect();
    let mut ys: Vec<_> = c.weighted_points().collect();
    xs.shuffle(rng);
    ys.shuffle(rng);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rc) = (xs[0].1, ys[0].1);
    while i < xs.len() && j < ys.len() {
        let w = ra.min(rc);
        if w > 0.0 {
            points.push(ProductConePoint { components: vec![xs[i].0, ys[j].0] });
            weights.push((points.len() - 1, w));
        }
        ra -= w;
        rc -= w;
        if ra <= 1e-15 && i + 1 < xs.len() {
            i += 1;
            ra = xs[i].1;
        } else if ra <= 1e-15 {
            i += 1;
        }
        if rc <= 1e-15 && j + 1 < ys.len() {
            j += 1;
            rc = ys[j].1;
        } else if rc <= 1e-15 {
            j += 1;
        }
    }
    let spaces = vec![Arc::new(a.space().clone()), Arc::new(c.space().clone())];
    let cfg = ProductConfiguration::new(spaces, points)?;
    Ok((cfg, crate::measure::WeightedMeasure::normalized(weights)?))
}
