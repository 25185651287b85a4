//! The invariants themselves and the comparison checks between them.
//!
//! `δ(ν)` is the Gram value of a cone measure barycentered at the cone point,
//! `δ̃(μ)` the unit-sphere value of a measure on the base space. The check
//! functions return a [`CheckReport`] comparing two computed quantities.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::gram::{
    build_delta_problem_at_apex, build_delta_tilde_problem, build_product_delta_problem,
    oracle_solve, solve, GramProblem, SolverConfig, SolverResult,
};
use crate::measure::{
    alpha_rescale, barycenter_defect, base_defect, find_admissible_measure, radial_normalize,
    strip_cone_point_mass, BarycenterReport, ConeMeasure, WeightedMeasure,
};
use crate::metric::{ConePoint, FiniteMetricSpace, ProductConePoint, ProductConfiguration};
use crate::sampling::random_admissible_measure;

/// Slack allowed when comparing two solver values.
pub const DEFAULT_CHECK_TOL: f64 = 1e-4;

/// Which method evaluates the semidefinite programs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// The low-rank solver.
    Solver(SolverConfig),
    /// The full-matrix reference solver (at most 8 atoms).
    Oracle,
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Solver(SolverConfig::default())
    }
}

impl Backend {
    pub fn run(&self, p: &GramProblem) -> Result<SolverResult> {
        match self {
            Backend::Solver(cfg) => Ok(solve(p, cfg)),
            Backend::Oracle => oracle_solve(p),
        }
    }
}

/// An invariant value with the admissibility evidence and solver output.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantValue {
    pub value: f64,
    pub barycenter: BarycenterReport,
    pub solver: SolverResult,
}

/// `δ(ν)` for a cone measure whose barycenter is the cone point.
pub fn delta_nu(nu: &ConeMeasure, backend: &Backend, tol: f64) -> Result<InvariantValue> {
    let barycenter = barycenter_defect(nu, tol).require()?;
    let solver = backend.run(&build_delta_problem_at_apex(nu)?)?;
    Ok(InvariantValue { value: solver.primal_value, barycenter, solver })
}

/// `δ̃(μ)` for a measure on `X` whose unit-radius lift is barycentered at the
/// cone point.
pub fn delta_tilde_mu(
    space: &FiniteMetricSpace,
    mu: &WeightedMeasure,
    backend: &Backend,
    tol: f64,
) -> Result<InvariantValue> {
    let barycenter = base_defect(space, mu, tol).require()?;
    let solver = backend.run(&build_delta_tilde_problem(space, mu)?)?;
    Ok(InvariantValue { value: solver.primal_value, barycenter, solver })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub seed: u64,
    /// Random admissible starting measures besides the admissibility-LP one.
    pub starts: usize,
    /// Ascent steps per start.
    pub steps: usize,
    /// Exhaustive weight grid resolution used when `n ≤ 4` (0 disables).
    pub grid: usize,
    pub solver: SolverConfig,
    pub tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            starts: 3,
            steps: 20,
            grid: 24,
            solver: SolverConfig { restarts: 2, ..SolverConfig::default() },
            tol: crate::measure::DEFAULT_DEFECT_TOL,
        }
    }
}

/// Outcome of the search for `δ̃(X)`, the supremum of `δ̃(μ)` over admissible
/// `μ`.
#[derive(Debug, Clone)]
pub enum SpaceSearch {
    /// No measure on `X` is barycentered at the cone point; the supremum is
    /// `−∞` by convention.
    NoAdmissibleMeasure,
    /// A lower estimate attained by `measure`.
    Estimate { value: f64, measure: WeightedMeasure, evaluations: usize, converged: bool },
}

/// Heuristic lower estimate of `δ̃(X)`: projected-gradient ascent on the
/// weight simplex from several admissible starts, where each step is pulled
/// back into the admissible set by mixing with an admissible measure; plus an
/// exhaustive weight grid when `X` has at most four points. The gradient of
/// `μ ↦ δ̃(μ)` at an optimal Gram `G` is `2 G t`.
pub fn delta_tilde_space(space: &FiniteMetricSpace, cfg: &SearchConfig) -> SpaceSearch {
    let Some(anchor) = find_admissible_measure(space, cfg.tol) else {
        return SpaceSearch::NoAdmissibleMeasure;
    };
    let n = space.len();
    let backend = Backend::Solver(cfg.solver);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let anchor_w = anchor.dense(n);
    let mut evaluations = 0;
    let mut converged = true;

    let evaluate = |w: &[f64], evaluations: &mut usize| -> Option<(f64, Vec<Vec<f64>>)> {
        let mu = WeightedMeasure::normalized(w.iter().copied().enumerate()).ok()?;
        let p = build_delta_tilde_problem(space, &mu).ok()?;
        let res = backend.run(&p).ok()?;
        *evaluations += 1;
        Some((res.primal_value, res.gram()))
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let consider = |value: f64, w: &[f64], best: &mut Option<(f64, Vec<f64>)>| {
        if best.as_ref().is_none_or(|b| value > b.0) {
            *best = Some((value, w.to_vec()));
        }
    };

    let mut starts = vec![anchor_w.clone()];
    for _ in 0..cfg.starts {
        if let Some(mu) = random_admissible_measure(space, &mut rng) {
            starts.push(mu.dense(n));
        }
    }
    for start in starts {
        let mut w = start;
        let Some((mut value, mut gram)) = evaluate(&w, &mut evaluations) else {
            continue;
        };
        consider(value, &w, &mut best);
        let mut step = 0.5;
        let mut improved_last = false;
        for _ in 0..cfg.steps {
            let grad: Vec<f64> =
                (0..n).map(|i| 2.0 * (0..n).map(|j| gram[i][j] * w[j]).sum::<f64>()).collect();
            let mut accepted = false;
            while step > 1e-6 {
                let raw: Vec<f64> = w.iter().zip(&grad).map(|(a, g)| a + step * g).collect();
                let trial = pull_back(space, &project_simplex(&raw), &anchor_w);
                if let Some((v, g)) = evaluate(&trial, &mut evaluations) {
                    if v > value + 1e-9 {
                        w = trial;
                        value = v;
                        gram = g;
                        accepted = true;
                        step *= 1.5;
                        break;
                    }
                }
                step *= 0.5;
            }
            improved_last = accepted;
            if !accepted {
                break;
            }
        }
        consider(value, &w, &mut best);
        converged &= !improved_last;
    }

    if n <= 4 && cfg.grid > 0 {
        for w in simplex_grid(n, cfg.grid) {
            if !base_is_admissible(space, &w, cfg.tol) {
                continue;
            }
            if let Some((v, _)) = evaluate(&w, &mut evaluations) {
                consider(v, &w, &mut best);
            }
        }
    }

    let (value, w) = best.unwrap_or((f64::NEG_INFINITY, anchor_w));
    let measure =
        WeightedMeasure::normalized(w.into_iter().enumerate()).expect("weights on the simplex");
    SpaceSearch::Estimate { value, measure, evaluations, converged }
}

fn base_is_admissible(space: &FiniteMetricSpace, w: &[f64], tol: f64) -> bool {
    WeightedMeasure::normalized(w.iter().copied().enumerate())
        .map(|mu| base_defect(space, &mu, tol).is_cone_point_barycenter)
        .unwrap_or(false)
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Mixes `w` with the admissible `anchor` by the smallest amount that makes
/// every barycenter sum nonpositive. The sums are linear in the weights, so
/// the required amount is exact.
fn pull_back(space: &FiniteMetricSpace, w: &[f64], anchor: &[f64]) -> Vec<f64> {
    let n = space.len();
    let sums = |v: &[f64], x: usize| -> f64 {
        (0..n).map(|i| v[i] * crate::metric::cos_trunc(space.d(x, i))).sum()
    };
    let mut lambda: f64 = 0.0;
    for x in 0..n {
        let a = sums(w, x);
        if a > 0.0 {
            let b = sums(anchor, x);
            lambda = lambda.max(a / (a - b));
        }
    }
    let lambda = lambda.min(1.0);
    w.iter().zip(anchor).map(|(a, b)| (1.0 - lambda) * a + lambda * b).collect()
}

/// All weight vectors on `n` atoms with entries in multiples of `1/k`.
fn simplex_grid(n: usize, k: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == n {
            cur.push(left);
            out.push(cur.iter().map(|c| *c as f64 / k as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(n, left - c, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, k, k, &mut Vec::new(), &mut out);
    }
    out
}

/// A comparison `lhs ≤ rhs + tol` between two computed quantities.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    /// Name of the inequality being checked.
    #[serde(rename = "lemma")]
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub tol: f64,
    pub witness: serde_json::Value,
}

impl CheckReport {
    pub fn le(name: &str, lhs: f64, rhs: f64, tol: f64, witness: serde_json::Value) -> Self {
        Self { check: name.to_string(), lhs, rhs, holds: lhs <= rhs + tol, tol, witness }
    }
}

pub const CHECK_STRIP: &str = "strip-cone-point-mass-monotone";
pub const CHECK_ALPHA_UP: &str = "alpha-rescale-monotone-up";
pub const CHECK_ALPHA_DOWN: &str = "alpha-rescale-monotone-down";
pub const CHECK_RADIAL: &str = "radial-normalize-monotone";
pub const CHECK_PRODUCT: &str = "product-delta-at-most-max-factor";
pub const CHECK_CONE_VS_BASE: &str = "cone-delta-at-most-base-delta-tilde";
pub const CHECK_EMBED: &str = "factor-embedding-preserves-delta";

/// Product-cone measure obtained by placing every atom of `mu_k` in factor
/// `k` and the cone point in every other factor.
pub fn embed_component_measure(
    k: usize,
    mu_k: &ConeMeasure,
    factors: &[Arc<FiniteMetricSpace>],
) -> Result<(ProductConfiguration, WeightedMeasure)> {
    if k >= factors.len() {
        return Err(Error::InvalidArgument(format!(
            "factor {k} out of range for {} factors",
            factors.len()
        )));
    }
    if *factors[k] != *mu_k.space() {
        return Err(Error::InvalidArgument(format!("measure does not live on factor {k}")));
    }
    let points: Vec<ProductConePoint> = mu_k
        .config()
        .points()
        .iter()
        .map(|p| {
            let mut q = ProductConePoint::apex(factors.len());
            q.components[k] = *p;
            q
        })
        .collect();
    let cfg = ProductConfiguration::new(factors.to_vec(), points)?;
    Ok((cfg, mu_k.measure().clone()))
}

/// The image of a product measure under projection to factor `k`.
pub fn marginal(cfg: &ProductConfiguration, measure: &WeightedMeasure, k: usize) -> Result<ConeMeasure> {
    ConeMeasure::from_atoms(
        cfg.spaces()[k].clone(),
        measure.atoms().iter().map(|a| (cfg.points()[a.index].components[k], a.weight)).collect::<Vec<_>>(),
    )
}

/// `δ(ν) ≤ max_k δ(ν_k)` for a measure on a product of cones, where `ν_k` are
/// the marginals. Every marginal must be barycentered at its cone point;
/// marginals with all mass at the cone point carry no δ and are skipped.
pub fn product_delta_check(
    cfg: &ProductConfiguration,
    measure: &WeightedMeasure,
    backend: &Backend,
    tol: f64,
    defect_tol: f64,
) -> Result<CheckReport> {
    let mut factor_values = Vec::new();
    let mut rhs = 0.0f64;
    for k in 0..cfg.spaces().len() {
        let nu_k = marginal(cfg, measure, k)?;
        let report = barycenter_defect(&nu_k, defect_tol);
        if !report.is_cone_point_barycenter {
            return Err(Error::MarginalBarycenter { factor: k, defect: report.defect });
        }
        if nu_k.weighted_points().all(|(p, _)| p.is_apex()) {
            factor_values.push(serde_json::Value::Null);
            continue;
        }
        let v = delta_nu(&nu_k, backend, defect_tol)?.value;
        rhs = rhs.max(v);
        factor_values.push(json!(v));
    }
    let lhs = backend.run(&build_product_delta_problem(cfg, measure)?)?.primal_value;
    Ok(CheckReport::le(CHECK_PRODUCT, lhs, rhs, tol, json!({ "factor_deltas": factor_values })))
}

/// `δ(ν) ≤ δ̃(μ)` where `μ` is the base measure obtained from `ν` by removing
/// any cone-point mass and pushing all atoms out to radius 1.
pub fn cone_vs_base_check(nu: &ConeMeasure, backend: &Backend, tol: f64, defect_tol: f64) -> Result<CheckReport> {
    let lhs = delta_nu(nu, backend, defect_tol)?.value;
    let (unit, alphas) = match nu.unlift() {
        Some(_) => (nu.clone(), Vec::new()),
        None => {
            let stripped = strip_cone_point_mass(nu)?;
            let norm = radial_normalize(&stripped, defect_tol)?;
            (norm.measure, norm.alphas)
        }
    };
    let mu = unit.unlift().expect("radial normalization ends at radius 1");
    let rhs = delta_tilde_mu(nu.space(), &mu, backend, defect_tol)?.value;
    Ok(CheckReport::le(
        CHECK_CONE_VS_BASE,
        lhs,
        rhs,
        tol,
        json!({ "alphas": alphas, "base_atoms": mu.atoms() }),
    ))
}

/// `δ(ν) ≤ δ(ν′)` where `ν′` drops the cone-point atom.
pub fn strip_check(nu: &ConeMeasure, backend: &Backend, tol: f64, defect_tol: f64) -> Result<CheckReport> {
    let stripped = strip_cone_point_mass(nu)?;
    let lhs = delta_nu(nu, backend, defect_tol)?.value;
    let rhs = delta_nu(&stripped, backend, defect_tol)?.value;
    Ok(CheckReport::le(CHECK_STRIP, lhs, rhs, tol, json!({ "atoms": nu.measure().len() })))
}

/// Compares `δ(ν)` and `δ(ν′)` for `ν′ = alpha_rescale(ν, group, α)`, in the
/// direction the rescaling criterion predicts: `δ(ν) ≤ δ(ν′)` when it reports
/// monotone-up, `δ(ν′) ≤ δ(ν)` otherwise.
pub fn alpha_rescale_check(
    nu: &ConeMeasure,
    group: &[usize],
    alpha: f64,
    backend: &Backend,
    tol: f64,
    defect_tol: f64,
) -> Result<CheckReport> {
    let res = alpha_rescale(nu, group, alpha)?;
    let before = delta_nu(nu, backend, defect_tol)?.value;
    let after = delta_nu(&res.measure, backend, defect_tol)?.value;
    let witness = json!({ "group": group, "alpha": alpha, "monotone_up": res.monotone_up });
    Ok(if res.monotone_up {
        CheckReport::le(CHECK_ALPHA_UP, before, after, tol, witness)
    } else {
        CheckReport::le(CHECK_ALPHA_DOWN, after, before, tol, witness)
    })
}

/// `δ(ν) ≤ δ(radial_normalize(ν))` for `ν` without cone-point mass.
pub fn radial_check(nu: &ConeMeasure, backend: &Backend, tol: f64, defect_tol: f64) -> Result<CheckReport> {
    let norm = radial_normalize(nu, defect_tol)?;
    let lhs = delta_nu(nu, backend, defect_tol)?.value;
    let rhs = delta_nu(&norm.measure, backend, defect_tol)?.value;
    Ok(CheckReport::le(
        CHECK_RADIAL,
        lhs,
        rhs,
        tol,
        json!({ "alphas": norm.alphas, "steps_monotone": norm.steps_monotone }),
    ))
}

/// `δ` of a factor measure against `δ` of its embedding into the product.
pub fn embedding_check(
    k: usize,
    mu_k: &ConeMeasure,
    factors: &[Arc<FiniteMetricSpace>],
    backend: &Backend,
    tol: f64,
) -> Result<CheckReport> {
    let (cfg, measure) = embed_component_measure(k, mu_k, factors)?;
    let a = backend.run(&build_delta_problem_at_apex(mu_k)?)?.primal_value;
    let b = backend.run(&build_product_delta_problem(&cfg, &measure)?)?.primal_value;
    let mut r = CheckReport::le(CHECK_EMBED, (a - b).abs(), 0.0, tol, json!({ "factor": k, "component": a, "embedded": b }));
    r.lhs = b;
    r.rhs = a;
    r.holds = (a - b).abs() <= tol;
    Ok(r)
}

/// `(‖E‖, Σ tᵢ ⟨E/‖E‖, φᵢ⟩)` for `E = Σ tᵢ φᵢ`; the two agree whenever
/// `E ≠ 0`.
pub fn mean_norm_identity(vectors: &[Vec<f64>], weights: &[f64]) -> Option<(f64, f64)> {
    let dim = vectors.first()?.len();
    let mut e = vec![0.0; dim];
    for (v, t) in vectors.iter().zip(weights) {
        for (ek, vk) in e.iter_mut().zip(v) {
            *ek += t * vk;
        }
    }
    let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return None;
    }
    let integral: f64 = vectors
        .iter()
        .zip(weights)
        .map(|(v, t)| t * v.iter().zip(&e).map(|(a, b)| a * b / norm).sum::<f64>())
        .sum();
    Some((norm, integral))
}

/// A random permutation of `0..n` and the space relabeled by it, used to
/// check that values do not depend on point numbering.
pub fn random_relabeling<R: Rng + ?Sized>(space: &FiniteMetricSpace, rng: &mut R) -> (Vec<usize>, FiniteMetricSpace) {
    let mut perm: Vec<usize> = (0..space.len()).collect();
    perm.shuffle(rng);
    let relabeled = space.permuted(&perm);
    (perm, relabeled)
}

/// Relabels a cone measure along `perm` (new index `a` is old `perm[a]`).
pub fn relabel_cone_measure(nu: &ConeMeasure, perm: &[usize], relabeled: Arc<FiniteMetricSpace>) -> Result<ConeMeasure> {
    let mut inverse = vec![0; perm.len()];
    for (a, &i) in perm.iter().enumerate() {
        inverse[i] = a;
    }
    ConeMeasure::from_atoms(
        relabeled,
        nu.weighted_points()
            .map(|(p, w)| {
                let q = match p.base() {
                    Some(b) => ConePoint::new(inverse[b], p.radius()).expect("valid radius"),
                    None => ConePoint::apex(),
                };
                (q, w)
            })
            .collect::<Vec<_>>(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_admissible_cone_measure, random_circle, regular_circle};
    use std::f64::consts::PI;

    fn space(m: Vec<Vec<f64>>) -> Arc<FiniteMetricSpace> {
        Arc::new(FiniteMetricSpace::new(m, 1e-9).unwrap())
    }

    fn tripod() -> Arc<FiniteMetricSpace> {
        space(vec![vec![0.0, PI, PI], vec![PI, 0.0, PI], vec![PI, PI, 0.0]])
    }

    fn pair(d: f64) -> Arc<FiniteMetricSpace> {
        space(vec![vec![0.0, d], vec![d, 0.0]])
    }

    const TOL: f64 = crate::measure::DEFAULT_DEFECT_TOL;

    #[test]
    fn delta_examples() {
        let b = Backend::default();
        let nu = ConeMeasure::lift(tripod(), &WeightedMeasure::uniform(0..3).unwrap()).unwrap();
        assert!(delta_nu(&nu, &b, TOL).unwrap().value <= 1e-6);
        let nu = ConeMeasure::lift(pair(PI), &WeightedMeasure::uniform(0..2).unwrap()).unwrap();
        assert!(delta_nu(&nu, &b, TOL).unwrap().value <= 1e-6);
        let bad = ConeMeasure::lift(pair(PI), &WeightedMeasure::new([(0, 0.7), (1, 0.3)]).unwrap()).unwrap();
        assert!(matches!(delta_nu(&bad, &b, TOL), Err(Error::Inadmissible { .. })));
    }

    #[test]
    fn delta_tilde_examples() {
        let b = Backend::default();
        let hex = regular_circle(6);
        let v = delta_tilde_mu(&hex, &WeightedMeasure::uniform(0..6).unwrap(), &b, TOL).unwrap();
        assert!(v.value <= 1e-6);
        let x = pair(PI);
        assert!(delta_tilde_mu(&x, &WeightedMeasure::uniform(0..2).unwrap(), &b, TOL).unwrap().value <= 1e-6);
        // Three points pairwise 2π/3: solver and oracle agree.
        let d = 2.0 * PI / 3.0;
        let tri = space(vec![vec![0.0, d, d], vec![d, 0.0, d], vec![d, d, 0.0]]);
        let mu = WeightedMeasure::uniform(0..3).unwrap();
        let s = delta_tilde_mu(&tri, &mu, &b, TOL).unwrap().value;
        let o = delta_tilde_mu(&tri, &mu, &Backend::Oracle, TOL).unwrap().value;
        assert!((0.0..=1.0).contains(&s));
        assert!((s - o).abs() <= 1e-4, "{s} vs {o}");
    }

    #[test]
    fn space_search_examples() {
        let cfg = SearchConfig::default();
        assert!(matches!(delta_tilde_space(&pair(PI / 2.0), &cfg), SpaceSearch::NoAdmissibleMeasure));
        match delta_tilde_space(&pair(PI), &cfg) {
            SpaceSearch::Estimate { value, measure, .. } => {
                assert!(value.abs() <= 1e-6);
                assert!((measure.weight_of(0) - 0.5).abs() < 1e-9);
            }
            SpaceSearch::NoAdmissibleMeasure => panic!("antipodal pair is admissible"),
        }
        let x = regular_circle(5);
        match delta_tilde_space(&x, &cfg) {
            SpaceSearch::Estimate { value, measure, .. } => {
                assert!((0.0..=1.0).contains(&value));
                assert!(base_defect(&x, &measure, TOL).is_cone_point_barycenter);
            }
            SpaceSearch::NoAdmissibleMeasure => panic!("pentagon is admissible"),
        }
    }

    #[test]
    fn embedding_is_isometric() {
        let t = tripod();
        let factors = vec![t.clone(), t.clone()];
        let nu = ConeMeasure::lift(t, &WeightedMeasure::uniform(0..3).unwrap()).unwrap();
        let (cfg, m) = embed_component_measure(0, &nu, &factors).unwrap();
        let a = build_delta_problem_at_apex(&nu).unwrap();
        let b = build_product_delta_problem(&cfg, &m).unwrap();
        assert_eq!(a.diag(), b.diag());
        assert_eq!(a.weights(), b.weights());
        for (x, y) in a.constraints().iter().zip(b.constraints()) {
            assert_eq!((x.i, x.j, x.kind), (y.i, y.j, y.kind));
            assert!((x.rhs - y.rhs).abs() <= 1e-12);
        }
        let r = embedding_check(1, &ConeMeasure::lift(factors[1].clone(), &WeightedMeasure::uniform(0..3).unwrap()).unwrap(), &factors, &Backend::default(), 1e-8).unwrap();
        assert!(r.holds);
        assert!(embed_component_measure(2, &nu, &factors).is_err());
    }

    #[test]
    fn apex_atom_embeds_to_product_apex() {
        let t = tripod();
        let nu = ConeMeasure::from_atoms(
            t.clone(),
            vec![(ConePoint::apex(), 0.2), (ConePoint::unit(0), 0.4), (ConePoint::unit(1), 0.4)],
        )
        .unwrap();
        let (cfg, _) = embed_component_measure(1, &nu, &[t.clone(), t]).unwrap();
        assert!(cfg.points().iter().any(|p| p.is_apex()));
    }

    #[test]
    fn product_of_tripods() {
        let t = tripod();
        let spaces = vec![t.clone(), t];
        // Diagonal product measure: atom k sits over base k in both factors.
        let points: Vec<ProductConePoint> = (0..3)
            .map(|k| ProductConePoint { components: vec![ConePoint::unit(k), ConePoint::unit(k)] })
            .collect();
        let cfg = ProductConfiguration::new(spaces, points).unwrap();
        let m = WeightedMeasure::uniform(0..3).unwrap();
        let r = product_delta_check(&cfg, &m, &Backend::default(), 1e-4, TOL).unwrap();
        assert!(r.holds);
        assert!(r.lhs <= 1e-6);
    }

    #[test]
    fn product_with_trivial_factor() {
        let t = tripod();
        let spaces = vec![t.clone(), t.clone()];
        let points: Vec<ProductConePoint> = (0..3)
            .map(|k| ProductConePoint { components: vec![ConePoint::unit(k), ConePoint::apex()] })
            .collect();
        let cfg = ProductConfiguration::new(spaces, points).unwrap();
        let m = WeightedMeasure::uniform(0..3).unwrap();
        let r = product_delta_check(&cfg, &m, &Backend::Oracle, 1e-4, TOL).unwrap();
        assert!(r.holds);
        assert!(r.witness["factor_deltas"][1].is_null());
        let nu = ConeMeasure::lift(t, &m).unwrap();
        let direct = delta_nu(&nu, &Backend::Oracle, TOL).unwrap().value;
        assert!((r.lhs - direct).abs() < 1e-6);
    }

    #[test]
    fn product_rejects_off_center_marginal() {
        let x = pair(PI);
        let points = vec![
            ProductConePoint { components: vec![ConePoint::unit(0), ConePoint::unit(0)] },
            ProductConePoint { components: vec![ConePoint::unit(1), ConePoint::unit(0)] },
        ];
        let cfg = ProductConfiguration::new(vec![x.clone(), x], points).unwrap();
        let m = WeightedMeasure::uniform(0..2).unwrap();
        let err = product_delta_check(&cfg, &m, &Backend::Oracle, 1e-4, TOL).unwrap_err();
        assert!(matches!(err, Error::MarginalBarycenter { factor: 1, .. }));
    }

    #[test]
    fn cone_vs_base_examples() {
        let b = Backend::default();
        let nu = ConeMeasure::lift(tripod(), &WeightedMeasure::uniform(0..3).unwrap()).unwrap();
        let r = cone_vs_base_check(&nu, &b, 1e-4, TOL).unwrap();
        assert!(r.holds && r.lhs <= 1e-6 && r.rhs <= 1e-6);

        let x = pair(PI);
        let nu = ConeMeasure::from_atoms(
            x,
            vec![(ConePoint::new(0, 1.0).unwrap(), 2.0 / 3.0), (ConePoint::new(1, 2.0).unwrap(), 1.0 / 3.0)],
        )
        .unwrap();
        let r = cone_vs_base_check(&nu, &b, 1e-4, TOL).unwrap();
        assert!(r.holds, "{r:?}");

        let hex = Arc::new(regular_circle(6));
        let nu = ConeMeasure::lift(hex, &WeightedMeasure::uniform(0..6).unwrap()).unwrap();
        let r = cone_vs_base_check(&nu, &b, 1e-4, TOL).unwrap();
        assert!(r.holds && r.lhs <= 1e-6 && r.rhs <= 1e-6);
    }

    #[test]
    fn monotonicity_checks_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut done = 0;
        while done < 5 {
            let x = Arc::new(random_circle(5, &mut rng));
            let Some(nu) = random_admissible_cone_measure(x, 0.5, 2.0, 0.2, &mut rng) else {
                continue;
            };
            if nu.measure().len() < 3 {
                continue;
            }
            assert!(strip_check(&nu, &Backend::Oracle, 1e-4, TOL).unwrap().holds);
            let stripped = strip_cone_point_mass(&nu).unwrap();
            assert!(radial_check(&stripped, &Backend::Oracle, 1e-4, TOL).unwrap().holds);
            let first = stripped.measure().atoms()[0].index;
            for alpha in [0.5, 2.0] {
                let r = alpha_rescale_check(&stripped, &[first], alpha, &Backend::Oracle, 1e-4, TOL).unwrap();
                assert!(r.holds, "{r:?}");
            }
            done += 1;
        }
    }

    #[test]
    fn mean_norm_identity_holds() {
        let v = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()]];
        let (a, b) = mean_norm_identity(&v, &[0.5, 0.3, 0.2]).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(mean_norm_identity(&[vec![1.0], vec![-1.0]], &[0.5, 0.5]).is_none());
    }

    #[test]
    fn relabeling_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Arc::new(random_circle(6, &mut rng));
        let nu = loop {
            if let Some(nu) = random_admissible_cone_measure(x.clone(), 0.5, 2.0, 0.0, &mut rng) {
                if nu.measure().len() >= 3 {
                    break nu;
                }
            }
        };
        let (perm, y) = random_relabeling(&x, &mut rng);
        let nu2 = relabel_cone_measure(&nu, &perm, Arc::new(y)).unwrap();
        let b = Backend::default();
        let a = delta_nu(&nu, &b, TOL).unwrap().value;
        let c = delta_nu(&nu2, &b, TOL).unwrap().value;
        assert!((a - c).abs() <= 1e-10, "{a} vs {c}");
    }

    #[test]
    fn simplex_helpers() {
        let p = project_simplex(&[0.8, 0.6, -0.2]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p[0] - 0.6).abs() < 1e-12 && (p[1] - 0.4).abs() < 1e-12 && p[2] == 0.0);
        assert_eq!(simplex_grid(3, 2).len(), 6);
    }
}
