//! Low-rank factorization solver.
//!
//! `G = V Vᵀ` with the rows of `V` kept at their prescribed norms exactly
//! (each row is `√dᵢ · wᵢ/‖wᵢ‖`), so the diagonal equalities never drift.
//! The pairwise lower bounds `G_ij ≥ l_ij` go into an augmented Lagrangian
//! with a squared-hinge penalty; each subproblem is minimized by L-BFGS.
//! The best restart is rounded to feasibility by mixing in the rank-one
//! aligned Gram, which satisfies every constraint, so the reported value is a
//! true upper bound on the SDP infimum.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::problem::GramProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub seed: u64,
    pub restarts: usize,
    /// L-BFGS iterations per augmented-Lagrangian subproblem.
    pub max_inner_iters: usize,
    pub max_outer_iters: usize,
    pub feas_tol: f64,
    pub gap_tol: f64,
    /// Factor width; `None` uses `min(m, ⌈√(2m)⌉ + 1)`.
    pub rank: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 8,
            max_inner_iters: 5000,
            max_outer_iters: 60,
            feas_tol: 1e-7,
            gap_tol: 1e-4,
            rank: None,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverResult {
    /// Rows of `V`; `G = V Vᵀ`.
    pub factor: Vec<Vec<f64>>,
    pub primal_value: f64,
    pub max_infeasibility: f64,
    /// Lagrangian lower bound on the infimum (`-inf` when unavailable).
    pub lower_bound: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    pub converged: bool,
}

impl SolverResult {
    pub fn gram(&self) -> Vec<Vec<f64>> {
        gram_of(&self.factor)
    }
}

pub(crate) fn gram_of(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|a| rows.iter().map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum()).collect())
        .collect()
}

pub fn default_rank(m: usize) -> usize {
    let r = ((2.0 * m as f64).sqrt().ceil() as usize) + 1;
    r.min(m).max(1)
}

struct Pair {
    i: usize,
    j: usize,
    lower: f64,
    scale: f64,
}

/// Augmented-Lagrangian state for one problem.
struct Landscape<'a> {
    p: &'a GramProblem,
    m: usize,
    r: usize,
    norm: Vec<f64>,
    active: Vec<bool>,
    pairs: Vec<Pair>,
}

impl<'a> Landscape<'a> {
    fn new(p: &'a GramProblem, r: usize) -> Self {
        let norm: Vec<f64> = p.diag().iter().map(|d| d.sqrt()).collect();
        let active: Vec<bool> = norm.iter().map(|a| *a > 0.0).collect();
        let pairs = p
            .lower_bounds()
            .into_iter()
            .filter(|&(i, j, _)| active[i] && active[j])
            .map(|(i, j, lower)| Pair { i, j, lower, scale: norm[i] * norm[j] })
            .collect();
        Self { p, m: p.m(), r, norm, active, pairs }
    }

    fn unit_rows(&self, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (m, r) = (self.m, self.r);
        let mut u = vec![0.0; m * r];
        let mut len = vec![1.0; m];
        for i in 0..m {
            if !self.active[i] {
                continue;
            }
            let row = &w[i * r..(i + 1) * r];
            let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            len[i] = n;
            for k in 0..r {
                u[i * r + k] = row[k] / n;
            }
        }
        (u, len)
    }

    /// Factor rows `√dᵢ · uᵢ`.
    fn rows(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let r = self.r;
        (0..self.m).map(|i| (0..r).map(|k| self.norm[i] * u[i * r + k]).collect()).collect()
    }

    fn dot(&self, u: &[f64], i: usize, j: usize) -> f64 {
        let r = self.r;
        u[i * r..(i + 1) * r].iter().zip(&u[j * r..(j + 1) * r]).map(|(a, b)| a * b).sum()
    }

    fn objective_u(&self, u: &[f64]) -> f64 {
        let s = self.mean(u);
        s.iter().map(|x| x * x).sum::<f64>() / self.p.normalizer()
    }

    fn mean(&self, u: &[f64]) -> Vec<f64> {
        let (r, t) = (self.r, self.p.weights());
        let mut s = vec![0.0; r];
        for i in 0..self.m {
            if self.active[i] && t[i] > 0.0 {
                let c = t[i] * self.norm[i];
                for k in 0..r {
                    s[k] += c * u[i * r + k];
                }
            }
        }
        s
    }

    /// Constraint values `gₚ = l − G_ij` (≤ 0 when satisfied).
    fn residuals(&self, u: &[f64]) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lower - p.scale * self.dot(u, p.i, p.j)).collect()
    }

    /// Augmented Lagrangian and its gradient with respect to the raw rows `w`.
    fn eval(&self, w: &[f64], lambda: &[f64], rho: f64, grad: &mut [f64]) -> f64 {
        let (m, r) = (self.m, self.r);
        let (u, len) = self.unit_rows(w);
        let t = self.p.weights();
        let nz = self.p.normalizer();
        let s = self.mean(&u);
        let mut value = s.iter().map(|x| x * x).sum::<f64>() / nz;
        let mut gu = vec![0.0; m * r];
        for i in 0..m {
            if self.active[i] && t[i] > 0.0 {
                let c = 2.0 * t[i] * self.norm[i] / nz;
                for k in 0..r {
                    gu[i * r + k] = c * s[k];
                }
            }
        }
        for (p, &lam) in self.pairs.iter().zip(lambda) {
            let h = p.lower - p.scale * self.dot(&u, p.i, p.j) + lam / rho;
            if h > 0.0 {
                value += 0.5 * rho * h * h;
                let c = rho * h * p.scale;
                for k in 0..r {
                    gu[p.i * r + k] -= c * u[p.j * r + k];
                    gu[p.j * r + k] -= c * u[p.i * r + k];
                }
            }
        }
        for i in 0..m {
            let row = i * r..(i + 1) * r;
            if !self.active[i] {
                grad[row].fill(0.0);
                continue;
            }
            let radial: f64 = gu[row.clone()].iter().zip(&u[row.clone()]).map(|(g, x)| g * x).sum();
            for k in row {
                grad[k] = (gu[k] - radial * u[k]) / len[i];
            }
        }
        value
    }

    /// L-BFGS on the subproblem; returns iterations used.
    fn minimize(&self, w: &mut Vec<f64>, lambda: &[f64], rho: f64, max_iters: usize) -> usize {
        const MEMORY: usize = 8;
        const GRAD_TOL: f64 = 1e-10;
        let n = w.len();
        let mut g = vec![0.0; n];
        let mut f = self.eval(w, lambda, rho, &mut g);
        let mut hist_s: Vec<Vec<f64>> = Vec::new();
        let mut hist_y: Vec<Vec<f64>> = Vec::new();
        let mut g_new = vec![0.0; n];
        let mut stall = 0;
        for it in 0..max_iters {
            if g.iter().fold(0.0f64, |a, x| a.max(x.abs())) <= GRAD_TOL {
                return it;
            }
            // Two-loop recursion.
            let mut d: Vec<f64> = g.iter().map(|x| -x).collect();
            let k = hist_s.len();
            let mut alpha = vec![0.0; k];
            for idx in (0..k).rev() {
                let rho_i = 1.0 / dotv(&hist_y[idx], &hist_s[idx]);
                alpha[idx] = rho_i * dotv(&hist_s[idx], &d);
                axpy(-alpha[idx], &hist_y[idx], &mut d);
            }
            if k > 0 {
                let gamma = dotv(&hist_s[k - 1], &hist_y[k - 1]) / dotv(&hist_y[k - 1], &hist_y[k - 1]);
                d.iter_mut().for_each(|x| *x *= gamma);
            } else {
                let gn = dotv(&g, &g).sqrt();
                d.iter_mut().for_each(|x| *x /= gn.max(1.0));
            }
            for idx in 0..k {
                let rho_i = 1.0 / dotv(&hist_y[idx], &hist_s[idx]);
                let beta = rho_i * dotv(&hist_y[idx], &d);
                axpy(alpha[idx] - beta, &hist_s[idx], &mut d);
            }
            let mut slope = dotv(&g, &d);
            if !(slope < 0.0) {
                hist_s.clear();
                hist_y.clear();
                d = g.iter().map(|x| -x).collect();
                slope = -dotv(&g, &g);
            }

            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let trial: Vec<f64> = w.iter().zip(&d).map(|(x, di)| x + step * di).collect();
                let ft = self.eval(&trial, lambda, rho, &mut g_new);
                if ft <= f + 1e-4 * step * slope {
                    accepted = Some((trial, ft));
                    break;
                }
                step *= 0.5;
            }
            let Some((trial, ft)) = accepted else {
                return it;
            };
            let s: Vec<f64> = trial.iter().zip(w.iter()).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            if dotv(&s, &y) > 1e-16 * dotv(&s, &s).sqrt() * dotv(&y, &y).sqrt() {
                if hist_s.len() == MEMORY {
                    hist_s.remove(0);
                    hist_y.remove(0);
                }
                hist_s.push(s);
                hist_y.push(y);
            }
            let decrease = f - ft;
            *w = trial;
            g.copy_from_slice(&g_new);
            f = ft;
            if decrease <= 1e-16 * f.abs().max(1e-12) {
                stall += 1;
                if stall >= 5 {
                    return it + 1;
                }
            } else {
                stall = 0;
            }
        }
        max_iters
    }
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

struct RestartOutcome {
    factor: Vec<Vec<f64>>,
    value: f64,
    infeasibility: f64,
    lower_bound: f64,
    iterations: usize,
    converged: bool,
}

/// A restart whose rounded value is within this of its own dual bound ends the
/// search early.
const CERTIFIED_GAP: f64 = 1e-7;

/// Extra factor columns a restart may add to leave a saddle.
const MAX_ESCAPES: usize = 4;
const ESCAPE_STEP: f64 = 0.05;

/// Solves the problem from up to `restarts` seeded random starts and keeps
/// the lowest rounded value (ties to the earliest restart). Stops early once
/// the incumbent is certified optimal by its dual bound.
pub fn solve(p: &GramProblem, cfg: &SolverConfig) -> SolverResult {
    // Solve in a numbering-independent order so relabeled inputs give the
    // same answer, then map the factor rows back.
    let order = p.canonical_order();
    let mut res = solve_in_order(&p.permuted(&order), cfg);
    let mut factor = vec![Vec::new(); order.len()];
    for (a, row) in res.factor.into_iter().enumerate() {
        factor[order[a]] = row;
    }
    res.factor = factor;
    res
}

fn solve_in_order(p: &GramProblem, cfg: &SolverConfig) -> SolverResult {
    let m = p.m();
    let r = cfg.rank.unwrap_or_else(|| default_rank(m)).clamp(1, m);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<RestartOutcome> = None;
    let mut iterations = 0;
    let mut used = 0;
    for _ in 0..cfg.restarts.max(1) {
        used += 1;
        let w0: Vec<f64> = (0..m * r).map(|_| StandardNormal.sample(&mut rng)).collect();
        let out = run_restart(p, r, w0, cfg);
        iterations += out.iterations;
        let better = match &best {
            None => true,
            Some(b) => out.value < b.value,
        };
        if better {
            best = Some(out);
        }
        let b = best.as_ref().expect("just set");
        if b.converged && b.value - b.lower_bound <= CERTIFIED_GAP {
            break;
        }
    }
    let best = best.expect("at least one restart");
    SolverResult {
        factor: best.factor,
        primal_value: best.value,
        max_infeasibility: best.infeasibility,
        lower_bound: best.lower_bound,
        iterations,
        restarts: used,
        seed: cfg.seed,
        converged: best.converged,
    }
}

/// One restart: augmented Lagrangian to convergence, then, while the dual
/// certificate shows a negative direction, one more factor column along it.
fn run_restart(p: &GramProblem, r: usize, mut w: Vec<f64>, cfg: &SolverConfig) -> RestartOutcome {
    let mut land = Landscape::new(p, r);
    let mut lambda = vec![0.0; land.pairs.len()];
    let mut rho = 10.0;
    let mut iterations = 0;
    let mut converged;
    let mut escapes = 0;
    loop {
        let (iters, done) = augmented_lagrangian(&land, &mut w, &mut lambda, &mut rho, cfg);
        iterations += iters;
        converged = done;
        if !done || escapes == MAX_ESCAPES {
            break;
        }
        let (u, _) = land.unit_rows(&w);
        let cert = certificate(&land, &lambda, &land.rows(&u));
        if land.objective_u(&u) - cert.bound <= 0.1 * cfg.gap_tol || cert.min_eig >= -1e-9 {
            break;
        }
        escapes += 1;
        let (m, old) = (land.m, land.r);
        let wide = old + 1;
        w = vec![0.0; m * wide];
        for i in 0..m {
            w[i * wide..i * wide + old].copy_from_slice(&u[i * old..(i + 1) * old]);
            if land.active[i] {
                w[i * wide + old] = ESCAPE_STEP * cert.direction[i] / land.norm[i];
            }
        }
        land = Landscape::new(p, wide);
    }
    let (u, _) = land.unit_rows(&w);
    let factor = mix_with_aligned(p, land.rows(&u), cfg.feas_tol);
    let gram = gram_of(&factor);
    let lower_bound = certificate(&land, &lambda, &factor).bound;
    RestartOutcome {
        value: p.objective(&gram).max(0.0),
        infeasibility: p.max_violation(&gram),
        lower_bound,
        factor,
        iterations,
        converged,
    }
}

/// Outer multiplier loop; returns inner iterations used and whether the
/// iterate is feasible, complementary and stationary in value.
fn augmented_lagrangian(
    land: &Landscape<'_>,
    w: &mut Vec<f64>,
    lambda: &mut [f64],
    rho: &mut f64,
    cfg: &SolverConfig,
) -> (usize, bool) {
    let mut prev_viol = f64::INFINITY;
    let mut prev_obj = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..cfg.max_outer_iters {
        iterations += land.minimize(w, lambda, *rho, cfg.max_inner_iters);
        let (u, _) = land.unit_rows(w);
        // Reset the raw scale; the landscape only sees directions.
        *w = u.clone();
        if land.pairs.is_empty() {
            return (iterations, true);
        }
        let g = land.residuals(&u);
        let viol = g.iter().fold(0.0f64, |a, x| a.max(*x));
        for (l, gi) in lambda.iter_mut().zip(&g) {
            *l = (*l + *rho * gi).max(0.0);
        }
        let slack = lambda.iter().zip(&g).fold(0.0f64, |a, (l, gi)| a.max(l * gi.abs()));
        let obj = land.objective_u(&u);
        if viol <= 0.1 * cfg.feas_tol
            && (obj <= 1e-14 || (slack <= 1e-9 && (obj - prev_obj).abs() <= 1e-10))
        {
            return (iterations, true);
        }
        if viol > 0.25 * prev_viol {
            *rho = (*rho * 5.0).min(1e7);
        }
        prev_viol = viol;
        prev_obj = obj;
    }
    (iterations, false)
}

/// Mixes `G = V Vᵀ` with the aligned Gram `aaᵀ` just enough to satisfy every
/// pair bound to within half of `feas_tol`. The rows of `V` must already have
/// norms `√diag`; mixing preserves them.
pub(crate) fn mix_with_aligned(p: &GramProblem, rows: Vec<Vec<f64>>, feas_tol: f64) -> Vec<Vec<f64>> {
    let norm: Vec<f64> = p.diag().iter().map(|d| d.sqrt()).collect();
    let mut theta: f64 = 0.0;
    for (i, j, lower) in p.lower_bounds() {
        let g: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
        let need = lower - 0.5 * feas_tol - g;
        if need > 0.0 {
            let room = norm[i] * norm[j] - g;
            theta = theta.max(if room > 0.0 { need / room } else { 1.0 });
        }
    }
    if theta <= 0.0 {
        return rows;
    }
    let theta = theta.min(1.0);
    let keep = (1.0 - theta).sqrt();
    let mix = theta.sqrt();
    rows.into_iter()
        .zip(&norm)
        .map(|(row, a)| {
            let mut out: Vec<f64> = row.iter().map(|x| keep * x).collect();
            out.push(mix * a);
            out
        })
        .collect()
}

struct Certificate {
    bound: f64,
    min_eig: f64,
    /// Eigenvector of the smallest eigenvalue, zero on fixed-zero rows.
    direction: Vec<f64>,
}

/// Lagrangian bound `Σ λ l + Σ yᵢ dᵢ + λ_min(S)·Σ dᵢ` with
/// `S = C − Λ − Diag(y)`, valid for any `λ ≥ 0` and `y`; `y` is chosen from
/// stationarity at the factor `V`.
fn certificate(land: &Landscape<'_>, lambda: &[f64], factor: &[Vec<f64>]) -> Certificate {
    let p = land.p;
    let m = p.m();
    let idx: Vec<usize> = (0..m).filter(|&i| land.active[i]).collect();
    let k = idx.len();
    if k == 0 {
        return Certificate { bound: 0.0, min_eig: 0.0, direction: vec![0.0; m] };
    }
    let mut pos = vec![usize::MAX; m];
    for (a, &i) in idx.iter().enumerate() {
        pos[i] = a;
    }
    let t = p.weights();
    let nz = p.normalizer();
    let mut s = DMatrix::<f64>::from_fn(k, k, |a, b| t[idx[a]] * t[idx[b]] / nz);
    let mut constant = 0.0;
    for (pair, &lam) in land.pairs.iter().zip(lambda) {
        let (a, b) = (pos[pair.i], pos[pair.j]);
        s[(a, b)] -= 0.5 * lam;
        s[(b, a)] -= 0.5 * lam;
        constant += lam * pair.lower;
    }
    let v = DMatrix::<f64>::from_fn(k, factor[0].len(), |a, c| factor[idx[a]][c]);
    let sv = &s * &v;
    let diag = p.diag();
    let mut trace = 0.0;
    for a in 0..k {
        let d = diag[idx[a]];
        let y = sv.row(a).dot(&v.row(a)) / d;
        s[(a, a)] -= y;
        constant += y * d;
        trace += d;
    }
    let eig = SymmetricEigen::new(s);
    let (col, min_eig) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (c, e)| if e < acc.1 { (c, e) } else { acc });
    let mut direction = vec![0.0; m];
    for a in 0..k {
        direction[idx[a]] = eig.eigenvectors[(a, col)];
    }
    Certificate { bound: constant + min_eig * trace, min_eig, direction }
}
