use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{ConeMeasure, WeightedMeasure};
use crate::metric::{cos_trunc, FiniteMetricSpace, ProductConfiguration};

/// How a pairwise constraint bounds the Gram entries of `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// `G_ij ≥ rhs`.
    #[serde(rename = "ge")]
    LowerBoundOnGij,
    /// `G_ii + G_jj − 2 G_ij ≤ rhs`.
    #[serde(rename = "dist2")]
    UpperBoundOnDist2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairConstraint {
    pub i: usize,
    pub j: usize,
    pub kind: ConstraintKind,
    pub rhs: f64,
}

/// minimize `tᵀ G t / normalizer` over PSD `G` with `G_ii = diag_i` and the
/// pairwise constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct GramProblem {
    diag: Vec<f64>,
    constraints: Vec<PairConstraint>,
    weights: Vec<f64>,
    normalizer: f64,
}

impl GramProblem {
    pub fn new(
        diag: Vec<f64>,
        constraints: Vec<PairConstraint>,
        weights: Vec<f64>,
        normalizer: f64,
    ) -> Result<Self> {
        let m = diag.len();
        if m == 0 {
            return Err(Error::InvalidArgument("problem has no variables".into()));
        }
        if weights.len() != m {
            return Err(Error::InvalidArgument(format!("{} weights for {m} atoms", weights.len())));
        }
        if diag.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidArgument("diagonal targets must be finite and >= 0".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument("objective weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("objective weights sum to {total}")));
        }
        if !(normalizer > 0.0 && normalizer.is_finite()) {
            return Err(Error::InvalidArgument(format!("normalizer {normalizer} must be > 0")));
        }
        for c in &constraints {
            if c.i >= m || c.j >= m || c.i == c.j || !c.rhs.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "bad constraint ({}, {}, {})",
                    c.i, c.j, c.rhs
                )));
            }
        }
        Ok(Self { diag, constraints, weights, normalizer })
    }

    pub fn m(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn constraints(&self) -> &[PairConstraint] {
        &self.constraints
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Every constraint rewritten as `G_ij ≥ l` (the diagonal is fixed), one
    /// entry per pair `i < j` keeping the tightest bound.
    pub fn lower_bounds(&self) -> Vec<(usize, usize, f64)> {
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            let (i, j) = if c.i < c.j { (c.i, c.j) } else { (c.j, c.i) };
            let l = match c.kind {
                ConstraintKind::LowerBoundOnGij => c.rhs,
                ConstraintKind::UpperBoundOnDist2 => 0.5 * (self.diag[i] + self.diag[j] - c.rhs),
            };
            out.push((i, j, l));
        }
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(b.2.total_cmp(&a.2)));
        out.dedup_by(|later, first| later.0 == first.0 && later.1 == first.1);
        out
    }

    /// `tᵀ G t / normalizer` for a Gram matrix given row-major.
    pub fn objective(&self, gram: &[Vec<f64>]) -> f64 {
        let t = &self.weights;
        let mut s = 0.0;
        for i in 0..self.m() {
            for j in 0..self.m() {
                s += t[i] * t[j] * gram[i][j];
            }
        }
        s / self.normalizer
    }

    /// Largest violation of the diagonal equalities and pair constraints.
    pub fn max_violation(&self, gram: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, d) in self.diag.iter().enumerate() {
            worst = worst.max((gram[i][i] - d).abs());
        }
        for c in &self.constraints {
            let v = match c.kind {
                ConstraintKind::LowerBoundOnGij => c.rhs - gram[c.i][c.j],
                ConstraintKind::UpperBoundOnDist2 => {
                    gram[c.i][c.i] + gram[c.j][c.j] - 2.0 * gram[c.i][c.j] - c.rhs
                }
            };
            worst = worst.max(v);
        }
        worst
    }

    /// The same problem with new atom `a` being old atom `order[a]`.
    pub fn permuted(&self, order: &[usize]) -> GramProblem {
        let mut inverse = vec![0; order.len()];
        for (a, &i) in order.iter().enumerate() {
            inverse[i] = a;
        }
        let mut constraints: Vec<PairConstraint> = self
            .constraints
            .iter()
            .map(|c| {
                let (i, j) = (inverse[c.i], inverse[c.j]);
                let (i, j) = if i < j { (i, j) } else { (j, i) };
                PairConstraint { i, j, ..*c }
            })
            .collect();
        constraints.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)).then(a.rhs.total_cmp(&b.rhs)));
        GramProblem {
            diag: order.iter().map(|&i| self.diag[i]).collect(),
            constraints,
            weights: order.iter().map(|&i| self.weights[i]).collect(),
            normalizer: self.normalizer,
        }
    }

    /// An atom order that depends only on the problem data, not on how the
    /// atoms happen to be numbered: atoms are sorted by weight, squared norm,
    /// and the sorted list of their pair bounds.
    pub(crate) fn canonical_order(&self) -> Vec<usize> {
        let m = self.m();
        let mut lower = vec![f64::NEG_INFINITY; m * m];
        for (i, j, l) in self.lower_bounds() {
            lower[i * m + j] = l;
            lower[j * m + i] = l;
        }
        let keys: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut nbrs: Vec<[f64; 3]> = (0..m)
                    .filter(|&j| j != i)
                    .map(|j| [lower[i * m + j], self.weights[j], self.diag[j]])
                    .collect();
                nbrs.sort_by(|a, b| cmp_slices(a, b));
                let mut key = vec![self.weights[i], self.diag[i]];
                key.extend(nbrs.into_iter().flatten());
                key
            })
            .collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| cmp_slices(&keys[a], &keys[b]));
        order
    }

    /// The rank-one Gram with every vector pointing the same way.
    pub fn aligned_gram(&self) -> Vec<Vec<f64>> {
        let a: Vec<f64> = self.diag.iter().map(|d| d.sqrt()).collect();
        a.iter().map(|ai| a.iter().map(|aj| ai * aj).collect()).collect()
    }

    pub fn to_dump(&self, seed: u64) -> ProblemDump {
        ProblemDump {
            diag: self.diag.clone(),
            constraints: self.constraints.iter().map(|c| (c.i, c.j, c.kind, c.rhs)).collect(),
            weights: self.weights.clone(),
            normalizer: self.normalizer,
            seed,
        }
    }

    pub fn from_dump(dump: &ProblemDump) -> Result<Self> {
        Self::new(
            dump.diag.clone(),
            dump.constraints.iter().map(|&(i, j, kind, rhs)| PairConstraint { i, j, kind, rhs }).collect(),
            dump.weights.clone(),
            dump.normalizer,
        )
    }
}

fn cmp_slices(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// JSON form of a problem: `{"diag", "constraints": [[i, j, "ge"|"dist2", rhs]], "weights", "normalizer", "seed"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDump {
    pub diag: Vec<f64>,
    pub constraints: Vec<(usize, usize, ConstraintKind, f64)>,
    pub weights: Vec<f64>,
    pub normalizer: f64,
    pub seed: u64,
}

/// Unit vectors over every point of `X` whose pairwise angles are at most the
/// distances; objective weights from `μ`.
pub fn build_delta_tilde_problem(space: &FiniteMetricSpace, mu: &WeightedMeasure) -> Result<GramProblem> {
    let n = space.len();
    if mu.max_index() >= n {
        return Err(Error::InvalidArgument("measure index out of range".into()));
    }
    let mut constraints = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            constraints.push(PairConstraint {
                i,
                j,
                kind: ConstraintKind::LowerBoundOnGij,
                rhs: cos_trunc(space.d(i, j)),
            });
        }
    }
    GramProblem::new(vec![1.0; n], constraints, mu.dense(n), 1.0)
}

/// Vectors over the atoms of `ν` with norms `bar_distances` and 1-Lipschitz
/// pair constraints; objective normalized by `Σ tᵢ bar_distancesᵢ²`.
/// `bar_distances` is indexed like the atoms of `ν`.
pub fn build_delta_problem(nu: &ConeMeasure, bar_distances: &[f64]) -> Result<GramProblem> {
    let atoms = nu.measure().atoms();
    if bar_distances.len() != atoms.len() {
        return Err(Error::InvalidArgument(format!(
            "{} barycenter distances for {} atoms",
            bar_distances.len(),
            atoms.len()
        )));
    }
    let cfg = nu.config();
    delta_problem_from_parts(
        bar_distances.iter().map(|b| b * b).collect(),
        |a, b| {
            let d = cfg.distance(atoms[a].index, atoms[b].index);
            d * d
        },
        atoms.iter().map(|a| a.weight).collect(),
    )
}

/// [`build_delta_problem`] for a measure barycentered at the cone point, where
/// the distance to the barycenter is the radius.
pub fn build_delta_problem_at_apex(nu: &ConeMeasure) -> Result<GramProblem> {
    let radii: Vec<f64> = nu.weighted_points().map(|(p, _)| p.radius()).collect();
    build_delta_problem(nu, &radii)
}

/// δ problem for a measure on a product of cones barycentered at the product
/// cone point. `measure` indexes `cfg`'s points.
pub fn build_product_delta_problem(
    cfg: &ProductConfiguration,
    measure: &WeightedMeasure,
) -> Result<GramProblem> {
    if measure.max_index() >= cfg.len() {
        return Err(Error::InvalidArgument("measure index out of range".into()));
    }
    let atoms = measure.atoms();
    delta_problem_from_parts(
        atoms.iter().map(|a| cfg.points()[a.index].norm_sq()).collect(),
        |a, b| cfg.distance_sq(atoms[a].index, atoms[b].index),
        atoms.iter().map(|a| a.weight).collect(),
    )
}

fn delta_problem_from_parts(
    norms_sq: Vec<f64>,
    dist_sq: impl Fn(usize, usize) -> f64,
    weights: Vec<f64>,
) -> Result<GramProblem> {
    let m = norms_sq.len();
    if m < 2 {
        return Err(Error::SingleAtom(m));
    }
    let normalizer: f64 = weights.iter().zip(&norms_sq).map(|(t, r2)| t * r2).sum();
    if normalizer <= 0.0 {
        return Err(Error::AllMassAtConePoint);
    }
    let mut constraints = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            constraints.push(PairConstraint {
                i,
                j,
                kind: ConstraintKind::UpperBoundOnDist2,
                rhs: dist_sq(i, j),
            });
        }
    }
    GramProblem::new(norms_sq, constraints, weights, normalizer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::ConePoint;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn tripod() -> Arc<FiniteMetricSpace> {
        Arc::new(
            FiniteMetricSpace::new(vec![vec![0.0, PI, PI], vec![PI, 0.0, PI], vec![PI, PI, 0.0]], 1e-9)
                .unwrap(),
        )
    }

    #[test]
    fn tripod_delta_problem() {
        let nu = ConeMeasure::lift(tripod(), &WeightedMeasure::uniform(0..3).unwrap()).unwrap();
        let p = build_delta_problem_at_apex(&nu).unwrap();
        assert_eq!(p.diag(), &[1.0, 1.0, 1.0]);
        for (_, _, l) in p.lower_bounds() {
            assert!((l + 1.0).abs() < 1e-15);
        }
        // Three unit vectors at 120 degrees.
        let g: Vec<Vec<f64>> =
            (0..3).map(|i| (0..3).map(|j| if i == j { 1.0 } else { -0.5 }).collect()).collect();
        assert!(p.max_violation(&g) <= 0.0);
        assert!(p.objective(&g).abs() < 1e-15);
    }

    #[test]
    fn delta_problem_errors() {
        let x = tripod();
        let single = ConeMeasure::lift(x.clone(), &WeightedMeasure::point_mass(0)).unwrap();
        assert!(matches!(build_delta_problem_at_apex(&single), Err(Error::SingleAtom(1))));
        let apex_pair = ConeMeasure::from_atoms(x.clone(), [(ConePoint::apex(), 1.0)]).unwrap();
        assert!(build_delta_problem_at_apex(&apex_pair).is_err());
    }

    #[test]
    fn antipodal_delta_tilde_problem() {
        let x = FiniteMetricSpace::new(vec![vec![0.0, PI], vec![PI, 0.0]], 1e-9).unwrap();
        let p = build_delta_tilde_problem(&x, &WeightedMeasure::uniform(0..2).unwrap()).unwrap();
        assert_eq!(p.lower_bounds(), vec![(0, 1, -1.0)]);
        let g = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        assert_eq!(p.objective(&g), 0.0);
        assert_eq!(p.max_violation(&g), 0.0);
    }

    #[test]
    fn regular_polygon_cosine_gram_is_optimal() {
        let n = 6;
        let m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let k = (i as i64 - j as i64).rem_euclid(n as i64) as usize;
                        2.0 * PI * k.min(n - k) as f64 / n as f64
                    })
                    .collect()
            })
            .collect();
        let x = FiniteMetricSpace::new(m, 1e-9).unwrap();
        let p = build_delta_tilde_problem(&x, &WeightedMeasure::uniform(0..n).unwrap()).unwrap();
        let g: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| x.d(i, j).cos()).collect()).collect();
        assert!(p.max_violation(&g) < 1e-15);
        assert!(p.objective(&g).abs() < 1e-15);
    }

    #[test]
    fn aligned_gram_is_feasible() {
        let x = tripod();
        let nu = ConeMeasure::from_atoms(
            x,
            [(ConePoint::new(0, 1.0).unwrap(), 0.5), (ConePoint::new(1, 3.0).unwrap(), 0.25), (ConePoint::new(2, 2.0).unwrap(), 0.25)],
        )
        .unwrap();
        let p = build_delta_problem_at_apex(&nu).unwrap();
        let g = p.aligned_gram();
        assert!(p.max_violation(&g) <= 1e-12);
        let v = p.objective(&g);
        assert!(v <= 1.0 + 1e-15 && v > 0.0);
    }

    #[test]
    fn dump_round_trip() {
        let nu = ConeMeasure::lift(tripod(), &WeightedMeasure::uniform(0..3).unwrap()).unwrap();
        let p = build_delta_problem_at_apex(&nu).unwrap();
        let s = serde_json::to_string(&p.to_dump(7)).unwrap();
        assert!(s.contains("\"dist2\""));
        let back: ProblemDump = serde_json::from_str(&s).unwrap();
        assert_eq!(GramProblem::from_dump(&back).unwrap(), p);
        assert_eq!(back.seed, 7);
    }
}
