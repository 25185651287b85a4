//! Random test instances: sampled spaces, admissible measures, and Gram
//! problems. Everything is driven by a caller-supplied generator so a single
//! seed reproduces a whole run.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::gram::{ConstraintKind, GramProblem, PairConstraint};
use crate::measure::{admissibility_game, base_defect, ConeMeasure, WeightedMeasure, DEFAULT_DEFECT_TOL};
use crate::metric::{shortest_path_metric, ConePoint, FiniteMetricSpace};

const MIN_GAP: f64 = 1e-3;

/// Closest distinct points allowed in sampled spaces, so the metric stays
/// well conditioned.
fn well_separated(dist: &[Vec<f64>]) -> bool {
    dist.iter().enumerate().all(|(i, row)| row.iter().enumerate().all(|(j, d)| i == j || *d >= MIN_GAP))
}

/// `n` equally spaced points on a circle of length `2π`.
pub fn regular_circle(n: usize) -> FiniteMetricSpace {
    // Distances from index gaps, so equal arcs are bitwise equal.
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let k = i.abs_diff(j);
                    2.0 * PI * k.min(n - k) as f64 / n as f64
                })
                .collect()
        })
        .collect();
    FiniteMetricSpace::new(dist, 1e-9).expect("circle distances form a metric")
}

fn circle_from_angles(angles: &[f64]) -> FiniteMetricSpace {
    let dist: Vec<Vec<f64>> = angles
        .iter()
        .map(|a| {
            angles
                .iter()
                .map(|b| {
                    let d = (a - b).rem_euclid(2.0 * PI);
                    d.min(2.0 * PI - d)
                })
                .collect()
        })
        .collect();
    FiniteMetricSpace::new(dist, 1e-9).expect("circle distances form a metric")
}

/// `n` random points on a circle of length `2π` with the arc metric.
pub fn random_circle<R: Rng + ?Sized>(n: usize, rng: &mut R) -> FiniteMetricSpace {
    loop {
        let angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let x = circle_from_angles(&angles);
        if well_separated(&x.to_rows()) {
            return x;
        }
    }
}

/// `n` random points on the unit sphere `S²` with the angle metric.
pub fn random_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> FiniteMetricSpace {
    loop {
        let pts: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                let v: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
                let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                v.map(|c| c / len)
            })
            .collect();
        let dist: Vec<Vec<f64>> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                pts.iter()
                    .enumerate()
                    .map(|(j, q)| {
                        if i == j {
                            return 0.0;
                        }
                        let c = p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
                        c.clamp(-1.0, 1.0).acos()
                    })
                    .collect()
            })
            .collect();
        if !well_separated(&dist) {
            continue;
        }
        if let Ok(x) = FiniteMetricSpace::new(dist, 1e-9) {
            return x;
        }
    }
}

/// Shortest-path metric of a random connected weighted graph on `n` vertices,
/// rescaled so its diameter is `diam`.
pub fn random_graph_metric<R: Rng + ?Sized>(n: usize, diam: f64, rng: &mut R) -> FiniteMetricSpace {
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push((u, v, rng.random_range(0.2..1.0)));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(0.3) {
                edges.push((u, v, rng.random_range(0.2..1.0)));
            }
        }
    }
    let x = shortest_path_metric(&edges, n).expect("spanning tree keeps the graph connected");
    if n < 2 {
        return x;
    }
    x.scaled(diam / x.diam()).expect("positive scale")
}

/// A random measure on `X` whose unit-radius lift is barycentered at the
/// cone point, or `None` when `X` has none. Mixes several admissibility-game
/// solutions with random row scalings and supports.
pub fn random_admissible_measure<R: Rng + ?Sized>(
    space: &FiniteMetricSpace,
    rng: &mut R,
) -> Option<WeightedMeasure> {
    let n = space.len();
    if n < 2 {
        return None;
    }
    let mut mix = vec![0.0; n];
    let mut found = 0;
    for attempt in 0..6 {
        let cols: Vec<usize> = if attempt == 0 {
            (0..n).collect()
        } else {
            let k = rng.random_range(2..=n);
            let mut c = sample(rng, n, k).into_vec();
            c.sort_unstable();
            c
        };
        let scale: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..3.0)).collect();
        let (value, mu) = admissibility_game(space, &cols, Some(&scale));
        if value > DEFAULT_DEFECT_TOL || !base_defect(space, &mu, DEFAULT_DEFECT_TOL).is_cone_point_barycenter {
            continue;
        }
        let c: f64 = rng.random_range(0.2..1.0);
        for a in mu.atoms() {
            mix[a.index] += c * a.weight;
        }
        found += 1;
    }
    if found == 0 {
        return None;
    }
    let mu = WeightedMeasure::normalized(mix.into_iter().enumerate()).ok()?;
    base_defect(space, &mu, DEFAULT_DEFECT_TOL).is_cone_point_barycenter.then_some(mu)
}

/// An admissible cone measure with random radii in `[r_lo, r_hi]`: weights
/// `tᵢ ∝ sᵢ / rᵢ` for an admissible base measure `s`, so every barycenter sum
/// keeps its sign. With `apex_weight > 0` an atom at the cone point is added.
pub fn random_admissible_cone_measure<R: Rng + ?Sized>(
    space: Arc<FiniteMetricSpace>,
    r_lo: f64,
    r_hi: f64,
    apex_weight: f64,
    rng: &mut R,
) -> Option<ConeMeasure> {
    let base = random_admissible_measure(&space, rng)?;
    let mut atoms: Vec<(ConePoint, f64)> = base
        .atoms()
        .iter()
        .map(|a| {
            let r = if r_hi > r_lo { rng.random_range(r_lo..r_hi) } else { r_lo };
            (ConePoint::new(a.index, r).expect("positive radius"), a.weight / r)
        })
        .collect();
    if apex_weight > 0.0 {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        atoms.push((ConePoint::apex(), total * apex_weight / (1.0 - apex_weight)));
    }
    ConeMeasure::from_atoms(space, atoms).ok()
}

/// A random Gram problem with `m` atoms: either the unit-sphere kind
/// (lower bounds on entries) or the cone kind (bounds on squared distances),
/// with random weights on a random support of at least two atoms.
pub fn random_gram_problem<R: Rng + ?Sized>(m: usize, rng: &mut R) -> GramProblem {
    let x = if rng.random_bool(0.5) { random_sphere(m, rng) } else { random_circle(m, rng) };
    let k = rng.random_range(2.min(m)..=m);
    let support = sample(rng, m, k).into_vec();
    let mut weights = vec![0.0; m];
    for &i in &support {
        weights[i] = rng.random_range(0.05..1.0);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let mut constraints = Vec::new();
    if rng.random_bool(0.5) {
        for i in 0..m {
            for j in i + 1..m {
                let rhs = x.d(i, j).min(PI).cos();
                constraints.push(PairConstraint { i, j, kind: ConstraintKind::LowerBoundOnGij, rhs });
            }
        }
        GramProblem::new(vec![1.0; m], constraints, weights, 1.0).expect("valid sphere problem")
    } else {
        let radii: Vec<f64> = (0..m).map(|_| rng.random_range(0.3..2.0)).collect();
        for i in 0..m {
            for j in i + 1..m {
                let c = x.d(i, j).min(PI).cos();
                let d2 = radii[i] * radii[i] + radii[j] * radii[j] - 2.0 * radii[i] * radii[j] * c;
                constraints.push(PairConstraint { i, j, kind: ConstraintKind::UpperBoundOnDist2, rhs: d2 });
            }
        }
        let diag: Vec<f64> = radii.iter().map(|r| r * r).collect();
        let normalizer: f64 = weights.iter().zip(&diag).map(|(t, d)| t * d).sum();
        GramProblem::new(diag, constraints, weights, normalizer).expect("valid cone problem")
    }
}
