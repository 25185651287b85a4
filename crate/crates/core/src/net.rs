//! Covering nets, the distance embedding into `ℝ^N`, the Gaussian sphere
//! kernel built on it, and the explicit constants bounding `δ̃`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gram::{build_delta_tilde_problem, SolverConfig};
use crate::invariants::Backend;
use crate::measure::{base_defect, WeightedMeasure};
use crate::metric::{cos_trunc, FiniteMetricSpace};

/// Net radius used by the bound pipeline.
pub const DEFAULT_NET_RADIUS: f64 = PI / 12.0;
/// Slack on the `2/3` cap-mass bound.
pub const CAP_MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetCover {
    pub centers: Vec<usize>,
    pub radius: f64,
    /// `max_x min_{s ∈ S} d(x, s) − ε`; nonpositive when the closed `ε`-balls
    /// around the centers cover `X`.
    pub coverage_defect: f64,
}

impl NetCover {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn covers(&self) -> bool {
        self.coverage_defect <= 0.0
    }
}

/// Farthest-point sampling from point 0: add the point farthest from the
/// current centers until every point lies within `ε`.
pub fn greedy_net(space: &FiniteMetricSpace, eps: f64) -> Result<NetCover> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("net radius {eps} must be > 0")));
    }
    if space.is_empty() {
        return Err(Error::InvalidArgument("empty space".into()));
    }
    let mut centers = vec![0];
    let mut nearest: Vec<f64> = space.row(0).to_vec();
    loop {
        let (far, dist) = nearest
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
        if dist <= eps {
            return Ok(NetCover { centers, radius: eps, coverage_defect: dist - eps });
        }
        centers.push(far);
        for (x, d) in nearest.iter_mut().enumerate() {
            *d = d.min(space.d(x, far));
        }
    }
}

/// Coverage defect of an arbitrary center set.
pub fn coverage_defect(space: &FiniteMetricSpace, centers: &[usize], eps: f64) -> f64 {
    (0..space.len())
        .map(|x| centers.iter().map(|&s| space.d(x, s)).fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max)
        - eps
}

/// Row `i` is `F_S(xᵢ) = (d(xᵢ, s₁), …, d(xᵢ, s_N))`.
pub fn net_embedding(space: &FiniteMetricSpace, centers: &[usize]) -> Result<Vec<Vec<f64>>> {
    if centers.is_empty() {
        return Err(Error::InvalidArgument("net has no centers".into()));
    }
    if let Some(&s) = centers.iter().find(|&&s| s >= space.len()) {
        return Err(Error::InvalidArgument(format!("center {s} out of range")));
    }
    Ok((0..space.len()).map(|x| centers.iter().map(|&s| space.d(x, s)).collect()).collect())
}

fn row_dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Largest `‖F(x) − F(y)‖ − L·d(x, y)` over pairs; nonpositive when `F` is
/// `L`-Lipschitz.
pub fn lipschitz_excess(space: &FiniteMetricSpace, f: &[Vec<f64>], l: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..f.len() {
        for j in i + 1..f.len() {
            worst = worst.max(row_dist_sq(&f[i], &f[j]).sqrt() - l * space.d(i, j));
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationCheck {
    /// Smallest embedded distance among pairs with `d ≥ min_dist`, minus `bound`.
    pub slack: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub pairs: usize,
}

/// For every pair with `d(x, y) ≥ min_dist`, compares `‖F(x) − F(y)‖` against
/// `bound`.
pub fn separation_check(space: &FiniteMetricSpace, f: &[Vec<f64>], min_dist: f64, bound: f64) -> SeparationCheck {
    let mut out = SeparationCheck { slack: f64::INFINITY, worst_pair: None, pairs: 0 };
    for i in 0..f.len() {
        for j in i + 1..f.len() {
            if space.d(i, j) >= min_dist {
                out.pairs += 1;
                let s = row_dist_sq(&f[i], &f[j]).sqrt() - bound;
                if s < out.slack {
                    out.slack = s;
                    out.worst_pair = Some((i, j));
                }
            }
        }
    }
    out
}

/// `Kᵢⱼ = exp(−t‖Fᵢ − Fⱼ‖²)`: the Gram matrix of the unit vectors
/// `e^{−t‖ζ‖²} Exp(√(2t) ζ)` evaluated at the rows of `F`.
pub fn gaussian_gram(f: &[Vec<f64>], t: f64) -> Result<Vec<Vec<f64>>> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("kernel parameter {t} must be > 0")));
    }
    Ok(f.iter()
        .map(|a| f.iter().map(|b| (-t * row_dist_sq(a, b)).exp()).collect())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// `min_{i<j} Kᵢⱼ − cos(min{π, dᵢⱼ})`.
    pub slack: f64,
    pub worst_pair: Option<(usize, usize)>,
}

/// Whether the unit vectors with Gram `K` satisfy every angle constraint
/// `∠(φ(x), φ(y)) ≤ min{π, d(x, y)}`.
pub fn feasibility_check(k: &[Vec<f64>], space: &FiniteMetricSpace, tol: f64) -> Result<Feasibility> {
    let n = space.len();
    if k.len() != n || k.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument(format!("kernel must be {n}×{n}")));
    }
    if let Some(i) = (0..n).find(|&i| (k[i][i] - 1.0).abs() > 1e-12) {
        return Err(Error::InvalidArgument(format!("kernel diagonal {} at {i} is not 1", k[i][i])));
    }
    let mut slack = f64::INFINITY;
    let mut worst_pair = None;
    for i in 0..n {
        for j in i + 1..n {
            let s = k[i][j] - cos_trunc(space.d(i, j));
            if s < slack {
                slack = s;
                worst_pair = Some((i, j));
            }
        }
    }
    Ok(Feasibility { feasible: slack >= -tol, slack, worst_pair })
}

/// `tᵀKt` for a feasible `K`; an upper bound on `δ̃(μ)`.
pub fn kernel_upper_bound(
    space: &FiniteMetricSpace,
    mu: &WeightedMeasure,
    k: &[Vec<f64>],
    tol: f64,
) -> Result<f64> {
    let f = feasibility_check(k, space, tol)?;
    if !f.feasible {
        return Err(Error::InvalidArgument(format!(
            "kernel violates the angle constraint by {:.3e} at {:?}",
            -f.slack, f.worst_pair
        )));
    }
    if mu.max_index() >= space.len() {
        return Err(Error::InvalidArgument("measure index out of range".into()));
    }
    Ok(mu
        .atoms()
        .iter()
        .flat_map(|a| mu.atoms().iter().map(move |b| a.weight * b.weight * k[a.index][b.index]))
        .sum())
}

fn check_net_size(n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidArgument("net size must be at least 1".into()));
    }
    Ok(())
}

/// `c_N = 2/3 + (1/3)·√((e^{−π²/36N} + 1)/2)`.
pub fn constant_small_cn(n: usize) -> Result<f64> {
    check_net_size(n)?;
    let e = (-PI * PI / (36.0 * n as f64)).exp();
    Ok(2.0 / 3.0 + ((e + 1.0) / 2.0).sqrt() / 3.0)
}

/// `C(N) = c_N²`, the bound on `δ̃` for spaces with a `π/12`-net of size `N`.
pub fn constant_big_cn(n: usize) -> Result<f64> {
    constant_small_cn(n).map(|c| c * c)
}

/// `η = arccos(e^{−π²/36N})`.
pub fn eta(n: usize) -> Result<f64> {
    check_net_size(n)?;
    Ok((-PI * PI / (36.0 * n as f64)).exp().acos())
}

/// `c_{θ,α,ε} = 1/(1+cos θ) + √((e^{−αε²/2}+1)/2)·cos θ/(1+cos θ)` and its
/// square.
pub fn constant_general(theta: f64, alpha: f64, eps: f64) -> Result<(f64, f64)> {
    if !(theta > 0.0 && theta < PI / 2.0) {
        return Err(Error::InvalidArgument(format!("θ = {theta} outside (0, π/2)")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("α = {alpha} outside (0, 1]")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("ε = {eps} must be > 0")));
    }
    let c = theta.cos();
    let v = 1.0 / (1.0 + c) + (((-alpha * eps * eps / 2.0).exp() + 1.0) / 2.0).sqrt() * c / (1.0 + c);
    Ok((v, v * v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub holds: bool,
    /// Pairs with `d ≥ θ` that are checked.
    pub pairs: usize,
    /// Smallest separating-center count over those pairs.
    pub min_count: usize,
    /// `α·#S`.
    pub required: f64,
    /// First pair with too few separating centers.
    pub failing_pair: Option<(usize, usize)>,
}

/// For every pair with `d(x, y) ≥ θ`, counts the centers `s` with
/// `|d(x, s) − d(y, s)| ≥ ε` and compares the count with `α·#S`.
pub fn general_hypothesis_check(
    space: &FiniteMetricSpace,
    centers: &[usize],
    theta: f64,
    alpha: f64,
    eps: f64,
) -> HypothesisCheck {
    let required = alpha * centers.len() as f64;
    let mut out = HypothesisCheck { holds: true, pairs: 0, min_count: centers.len(), required, failing_pair: None };
    for x in 0..space.len() {
        for y in x + 1..space.len() {
            if space.d(x, y) < theta {
                continue;
            }
            out.pairs += 1;
            let count =
                centers.iter().filter(|&&s| (space.d(x, s) - space.d(y, s)).abs() >= eps).count();
            out.min_count = out.min_count.min(count);
            if (count as f64) < required && out.failing_pair.is_none() {
                out.holds = false;
                out.failing_pair = Some((x, y));
            }
        }
    }
    out
}

/// Unit vectors in `ℝᵐ` realizing `K` exactly up to rounding, via the
/// symmetric eigendecomposition with negative eigenvalues clipped and rows
/// renormalized.
pub fn realize_kernel(k: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = k.len();
    let eig = SymmetricEigen::new(DMatrix::from_fn(m, m, |i, j| k[i][j]));
    (0..m)
        .map(|i| {
            let mut row: Vec<f64> =
                (0..m).map(|c| eig.eigenvectors[(i, c)] * eig.eigenvalues[c].max(0.0).sqrt()).collect();
            let len = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len > 0.0 {
                row.iter_mut().for_each(|x| *x /= len);
            }
            row
        })
        .collect()
}

pub fn min_eigenvalue(k: &[Vec<f64>]) -> f64 {
    let m = k.len();
    SymmetricEigen::new(DMatrix::from_fn(m, m, |i, j| k[i][j])).eigenvalues.min()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Concentration {
    /// Pushforward mass of the closed cap of angular radius `η/2` around the
    /// normalized mean; `0` when the mean vanishes.
    pub cap_mass: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Mass of `{φ(x) : ∠(φ(x), v) ≤ η/2}` for `v` the normalized mean of the
/// realized vectors, against `2/3`.
pub fn concentration_check(vectors: &[Vec<f64>], mu: &WeightedMeasure, eta: f64) -> Concentration {
    let dim = vectors.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; dim];
    for a in mu.atoms() {
        for (m, v) in mean.iter_mut().zip(&vectors[a.index]) {
            *m += a.weight * v;
        }
    }
    let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
    let bound = 2.0 / 3.0;
    let cap_mass = if norm <= 1e-12 {
        0.0
    } else {
        let cos_half = (eta / 2.0).cos();
        mu.atoms()
            .iter()
            .filter(|a| {
                let c: f64 = vectors[a.index].iter().zip(&mean).map(|(x, y)| x * y).sum::<f64>() / norm;
                c >= cos_half
            })
            .map(|a| a.weight)
            .fold(0.0, |acc, w| acc + w)
    };
    Concentration { cap_mass, bound, holds: cap_mass <= bound + CAP_MASS_TOL }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub net_radius: f64,
    pub coverage_defect: f64,
    pub centers: Vec<usize>,
    pub eta: f64,
    pub c_n: f64,
    #[serde(rename = "C_N")]
    pub big_c_n: f64,
    pub kernel_t: f64,
    /// `tᵀKt`.
    pub kernel_value: f64,
    /// `δ̃(μ)` from the semidefinite program.
    pub sdp_value: f64,
    pub kernel_min_eigenvalue: f64,
    pub kernel_feasibility_slack: f64,
    pub concentration: Concentration,
    /// `sdp_value ≤ kernel_value + tol ≤ C_N + tol < 1`, the kernel is a
    /// feasible point, and the concentration bound holds.
    pub chain_ok: bool,
    pub tol: f64,
}

pub struct PipelineConfig {
    pub net_radius: f64,
    pub tol: f64,
    pub defect_tol: f64,
    pub backend: Backend,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            net_radius: DEFAULT_NET_RADIUS,
            tol: 1e-4,
            defect_tol: crate::measure::DEFAULT_DEFECT_TOL,
            backend: Backend::Solver(SolverConfig::default()),
        }
    }
}

/// Builds the `π/12`-net (or the configured radius), the kernel feasible point
/// `K = gaussian_gram(F_S, 1/(2N))`, solves `δ̃(μ)`, and reports the chain of
/// bounds together with the cap concentration check.
pub fn net_bound_pipeline(space: &FiniteMetricSpace, mu: &WeightedMeasure, cfg: &PipelineConfig) -> Result<BoundReport> {
    base_defect(space, mu, cfg.defect_tol).require()?;
    let net = greedy_net(space, cfg.net_radius)?;
    let n = net.len();
    let f = net_embedding(space, &net.centers)?;
    let kernel_t = 1.0 / (2.0 * n as f64);
    let k = gaussian_gram(&f, kernel_t)?;
    let feas = feasibility_check(&k, space, 1e-12)?;
    let kernel_value = kernel_upper_bound(space, mu, &k, 1e-12)?;
    let sdp_value = cfg.backend.run(&build_delta_tilde_problem(space, mu)?)?.primal_value;
    let c_n = constant_small_cn(n)?;
    let big_c_n = c_n * c_n;
    let eta = eta(n)?;
    let concentration = concentration_check(&realize_kernel(&k), mu, eta);
    let chain_ok = feas.feasible
        && net.covers()
        && sdp_value <= kernel_value + cfg.tol
        && kernel_value <= big_c_n + cfg.tol
        && big_c_n < 1.0
        && concentration.holds;
    Ok(BoundReport {
        n,
        net_radius: cfg.net_radius,
        coverage_defect: net.coverage_defect,
        centers: net.centers,
        eta,
        c_n,
        big_c_n,
        kernel_t,
        kernel_value,
        sdp_value,
        kernel_min_eigenvalue: min_eigenvalue(&k),
        kernel_feasibility_slack: feas.slack,
        concentration,
        chain_ok,
        tol: cfg.tol,
    })
}

/// Writes `N,C_N` rows for `N = 1..=max_n`.
pub fn write_constants_csv<W: Write>(out: W, max_n: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "C_N"]).map_err(csv_err)?;
    for n in 1..=max_n {
        w.write_record([n.to_string(), format!("{:.17e}", constant_big_cn(n)?)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::regular_circle;

    fn pair(d: f64) -> FiniteMetricSpace {
        FiniteMetricSpace::new(vec![vec![0.0, d], vec![d, 0.0]], 1e-9).unwrap()
    }

    #[test]
    fn nets() {
        let x = regular_circle(12);
        let net = greedy_net(&x, PI / 6.0).unwrap();
        assert!(net.len() <= 6 && net.covers());
        assert_eq!(greedy_net(&x, x.diam()).unwrap().len(), 1);
        assert_eq!(greedy_net(&x, 0.1).unwrap().len(), 12);
        assert!(greedy_net(&x, 0.0).is_err());
        assert!(coverage_defect(&x, &net.centers, PI / 6.0) <= 0.0);
    }

    #[test]
    fn embedding_two_points() {
        let x = pair(PI);
        let f = net_embedding(&x, &[0, 1]).unwrap();
        assert_eq!(f, vec![vec![0.0, PI], vec![PI, 0.0]]);
        assert!(lipschitz_excess(&x, &f, 2f64.sqrt()) <= 1e-12);
        let k = gaussian_gram(&f, 0.25).unwrap();
        // exp(−π²/2)
        assert!((k[0][1] - 0.0071918833558263656078).abs() < 1e-15);
        let mu = WeightedMeasure::uniform(0..2).unwrap();
        let v = kernel_upper_bound(&x, &mu, &k, 1e-12).unwrap();
        assert!((v - 0.5035959416779131828).abs() < 1e-15);
        assert_eq!(kernel_upper_bound(&x, &WeightedMeasure::point_mass(0), &k, 1e-12).unwrap(), 1.0);
    }

    #[test]
    fn identity_kernel_is_infeasible_for_close_points() {
        let x = pair(1.0);
        let k = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let f = feasibility_check(&k, &x, 1e-12).unwrap();
        assert!(!f.feasible);
        assert!(kernel_upper_bound(&x, &WeightedMeasure::point_mass(0), &k, 1e-12).is_err());
        assert!(feasibility_check(&[vec![2.0, 0.0], vec![0.0, 1.0]], &x, 1e-12).is_err());
    }

    #[test]
    fn constants() {
        let table = [
            (1, 0.959185253726393962),
            (2, 0.97841488534882215459),
            (5, 0.99106742354187382618),
            (10, 0.99548257800204944554),
            (100, 0.99954359546646593413),
        ];
        for (n, c) in table {
            assert!((constant_big_cn(n).unwrap() - c).abs() < 1e-12, "N = {n}");
        }
        assert!((constant_small_cn(1).unwrap() - 0.97938003539300001498).abs() < 1e-12);
        assert!((eta(1).unwrap() - 0.70715431323388759848).abs() < 1e-12);
        assert!(constant_big_cn(0).is_err());
        let (c, c2) = constant_general(PI / 3.0, 1.0, 1.0).unwrap();
        assert!((c - 0.96541690234417792967).abs() < 1e-12);
        assert!((c2 - 0.93202979533182798532).abs() < 1e-12);
        assert!((constant_general(PI / 3.0, 1.0, 1e-9).unwrap().0 - 1.0).abs() < 1e-9);
        assert!(constant_general(PI / 2.0, 1.0, 1.0).is_err());
        assert!(constant_general(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn hypothesis_counts() {
        let x = regular_circle(8);
        let all: Vec<usize> = (0..8).collect();
        let h = general_hypothesis_check(&x, &all, PI / 3.0, 0.25, 0.5);
        assert!(h.holds, "{h:?}");
        let h = general_hypothesis_check(&x, &[0], PI / 3.0, 1.0, 0.5);
        assert!(!h.holds && h.failing_pair.is_some());
    }

    #[test]
    fn pipeline_on_circle() {
        let x = regular_circle(12);
        let r = net_bound_pipeline(&x, &WeightedMeasure::uniform(0..12).unwrap(), &PipelineConfig::default()).unwrap();
        assert!(r.chain_ok, "{r:?}");
        assert!(r.sdp_value <= 1e-6);
        assert!(r.kernel_min_eigenvalue >= -1e-9);
        let r = net_bound_pipeline(&pair(PI), &WeightedMeasure::uniform(0..2).unwrap(), &PipelineConfig::default()).unwrap();
        assert_eq!(r.n, 2);
        assert!(r.chain_ok);
    }

    #[test]
    fn csv_table() {
        let mut buf = Vec::new();
        write_constants_csv(&mut buf, 3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("N,C_N\n1,9.5918525372639"));
    }
}
