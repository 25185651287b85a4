//! Finite metric spaces, the truncated cosine, and Euclidean cone geometry.
//!
//! A [`FiniteMetricSpace`] stands in for a sampled CAT(1) space `X`: distances
//! are in radians and anything at or beyond `π` is treated as antipodal by the
//! cone constructions. Points of `Cone(X)` are `[x, r]` pairs; the cone point
//! has no base.

use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, MetricViolation, Result};

pub const DEFAULT_METRIC_TOL: f64 = 1e-9;

// Validation stops collecting triangle witnesses after this many.
const MAX_REPORTED_VIOLATIONS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    n: usize,
    dist: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl FiniteMetricSpace {
    /// Validates `dist` against the metric axioms. Entries that are symmetric
    /// within `tol` are averaged; triangle violations up to `tol` are accepted.
    pub fn new(dist: Vec<Vec<f64>>, tol: f64) -> Result<Self> {
        validate_metric(&dist, tol)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} points",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn diam(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    /// Multiplies every distance by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale factor {factor}")));
        }
        Ok(Self {
            n: self.n,
            dist: self.dist.iter().map(|d| d * factor).collect(),
            labels: self.labels.clone(),
        })
    }

    /// The space restricted to (and reindexed by) `indices`.
    pub fn subspace(&self, indices: &[usize]) -> Self {
        let n = indices.len();
        let mut dist = vec![0.0; n * n];
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate() {
                dist[a * n + b] = self.d(i, j);
            }
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i].clone()).collect());
        Self { n, dist, labels }
    }

    /// Reorders points so that new index `a` is old index `perm[a]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        self.subspace(perm)
    }
}

/// Checks the metric axioms and returns the validated space, or every
/// violation found (triangle witnesses capped at a few dozen).
pub fn validate_metric(dist: &[Vec<f64>], tol: f64) -> Result<FiniteMetricSpace> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be >= 0")));
    }
    let n = dist.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty distance matrix".into()));
    }
    let mut violations = Vec::new();
    for (i, row) in dist.iter().enumerate() {
        if row.len() != n {
            violations.push(MetricViolation::NotSquare { rows: n, row: i, len: row.len() });
        }
    }
    if !violations.is_empty() {
        return Err(Error::InvalidMetric(violations));
    }
    for i in 0..n {
        for j in 0..n {
            let v = dist[i][j];
            if !v.is_finite() {
                violations.push(MetricViolation::NonFinite { i, j });
            } else if v < 0.0 {
                violations.push(MetricViolation::Negative { i, j, value: v });
            }
        }
    }
    if !violations.is_empty() {
        return Err(Error::InvalidMetric(violations));
    }

    let mut flat = vec![0.0; n * n];
    for i in 0..n {
        if dist[i][i] != 0.0 {
            violations.push(MetricViolation::NonzeroDiagonal { i, value: dist[i][i] });
        }
        for j in (i + 1)..n {
            let (a, b) = (dist[i][j], dist[j][i]);
            if (a - b).abs() > tol {
                violations.push(MetricViolation::Asymmetric { i, j, dij: a, dji: b });
            }
            let avg = 0.5 * (a + b);
            if avg == 0.0 {
                violations.push(MetricViolation::ZeroOffDiagonal { i, j });
            }
            flat[i * n + j] = avg;
            flat[j * n + i] = avg;
        }
    }
    if !violations.is_empty() {
        return Err(Error::InvalidMetric(violations));
    }

    'outer: for i in 0..n {
        for k in (i + 1)..n {
            let dik = flat[i * n + k];
            for j in 0..n {
                if j == i || j == k {
                    continue;
                }
                let (dij, djk) = (flat[i * n + j], flat[j * n + k]);
                if dik > dij + djk + tol {
                    violations.push(MetricViolation::Triangle { i, j, k, dik, dij, djk });
                    if violations.len() >= MAX_REPORTED_VIOLATIONS {
                        break 'outer;
                    }
                }
            }
        }
    }
    if !violations.is_empty() {
        return Err(Error::InvalidMetric(violations));
    }
    Ok(FiniteMetricSpace { n, dist: flat, labels: None })
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry(f64, usize);

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All-pairs shortest-path metric of a weighted undirected graph on `n`
/// vertices (Dijkstra from every vertex).
pub fn shortest_path_metric(edges: &[(usize, usize, f64)], n: usize) -> Result<FiniteMetricSpace> {
    if n == 0 {
        return Err(Error::InvalidArgument("graph has no vertices".into()));
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, j, len) in edges {
        if i >= n || j >= n {
            return Err(Error::InvalidArgument(format!("edge ({i},{j}) out of range for n = {n}")));
        }
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::InvalidArgument(format!("edge ({i},{j}) has length {len}")));
        }
        if i == j {
            continue;
        }
        adj[i].push((j, len));
        adj[j].push((i, len));
    }

    let mut dist = vec![f64::INFINITY; n * n];
    for src in 0..n {
        let row = &mut dist[src * n..(src + 1) * n];
        row[src] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry(0.0, src));
        while let Some(HeapEntry(d, u)) = heap.pop() {
            if d > row[u] {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = d + w;
                if nd < row[v] {
                    row[v] = nd;
                    heap.push(HeapEntry(nd, v));
                }
            }
        }
        if let Some(unreachable) = row.iter().position(|d| d.is_infinite()) {
            return Err(Error::Disconnected { from: src, unreachable });
        }
    }
    // Dijkstra from both ends can differ in the last bit; symmetrize.
    for i in 0..n {
        for j in (i + 1)..n {
            let m = dist[i * n + j].min(dist[j * n + i]);
            dist[i * n + j] = m;
            dist[j * n + i] = m;
        }
    }
    Ok(FiniteMetricSpace { n, dist, labels: None })
}

/// `cos(min{π, d})`, rejecting negative distances.
pub fn truncated_cosine(d: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::InvalidArgument(format!("distance {d} must be >= 0")));
    }
    Ok(cos_trunc(d))
}

#[inline]
pub(crate) fn cos_trunc(d: f64) -> f64 {
    if d >= PI {
        -1.0
    } else {
        d.cos()
    }
}

/// A point `[x, r]` of `Cone(X)`. The cone point is stored with no base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    base: Option<usize>,
    radius: f64,
}

impl ConePoint {
    pub fn new(base: usize, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("cone radius {radius}")));
        }
        if radius == 0.0 {
            return Ok(Self::apex());
        }
        Ok(Self { base: Some(base), radius })
    }

    /// The cone point `O`.
    pub const fn apex() -> Self {
        Self { base: None, radius: 0.0 }
    }

    /// `E_x`, the unit-radius point over `x`.
    pub const fn unit(base: usize) -> Self {
        Self { base: Some(base), radius: 1.0 }
    }

    pub fn base(&self) -> Option<usize> {
        self.base
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn is_apex(&self) -> bool {
        self.base.is_none()
    }
}

pub fn cone_inner(v: &ConePoint, w: &ConePoint, space: &FiniteMetricSpace) -> f64 {
    match (v.base, w.base) {
        (Some(x), Some(y)) => v.radius * w.radius * cos_trunc(space.d(x, y)),
        _ => 0.0,
    }
}

pub fn cone_distance(v: &ConePoint, w: &ConePoint, space: &FiniteMetricSpace) -> f64 {
    match (v.base, w.base) {
        (Some(x), Some(y)) => {
            let (t, s) = (v.radius, w.radius);
            let d = space.d(x, y);
            if x == y {
                (t - s).abs()
            } else if d >= PI {
                t + s
            } else {
                (t * t + s * s - 2.0 * t * s * d.cos()).max(0.0).sqrt()
            }
        }
        (Some(_), None) => v.radius,
        (None, Some(_)) => w.radius,
        (None, None) => 0.0,
    }
}

/// Radial rescaling `[x, r] -> [x, αr]`; fixes the cone point.
pub fn scale_cone_point(v: &ConePoint, alpha: f64) -> Result<ConePoint> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale factor {alpha} must be > 0")));
    }
    match v.base {
        Some(x) => ConePoint::new(x, alpha * v.radius),
        None => Ok(ConePoint::apex()),
    }
}

/// A finite set of points of `Cone(X)` together with `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeConfiguration {
    space: Arc<FiniteMetricSpace>,
    points: Vec<ConePoint>,
}

impl ConeConfiguration {
    pub fn new(space: Arc<FiniteMetricSpace>, points: Vec<ConePoint>) -> Result<Self> {
        for (k, p) in points.iter().enumerate() {
            if let Some(b) = p.base {
                if b >= space.len() {
                    return Err(Error::InvalidArgument(format!(
                        "cone point {k} has base {b}, space has {} points",
                        space.len()
                    )));
                }
            }
        }
        Ok(Self { space, points })
    }

    pub fn space(&self) -> &FiniteMetricSpace {
        &self.space
    }

    pub fn space_arc(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    pub fn points(&self) -> &[ConePoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &ConePoint {
        &self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        cone_distance(&self.points[i], &self.points[j], &self.space)
    }

    pub fn inner(&self, i: usize, j: usize) -> f64 {
        cone_inner(&self.points[i], &self.points[j], &self.space)
    }
}

/// A point of a finite ℓ²-product of cones, one component per factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductConePoint {
    pub components: Vec<ConePoint>,
}

impl ProductConePoint {
    pub fn apex(factors: usize) -> Self {
        Self { components: vec![ConePoint::apex(); factors] }
    }

    /// Distance to the product cone point.
    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c.radius * c.radius).sum::<f64>().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.components.iter().map(|c| c.radius * c.radius).sum()
    }

    pub fn is_apex(&self) -> bool {
        self.components.iter().all(ConePoint::is_apex)
    }
}

pub fn product_cone_distance(
    u: &ProductConePoint,
    v: &ProductConePoint,
    spaces: &[Arc<FiniteMetricSpace>],
) -> Result<f64> {
    product_cone_distance_sq(u, v, spaces).map(f64::sqrt)
}

pub(crate) fn product_cone_distance_sq(
    u: &ProductConePoint,
    v: &ProductConePoint,
    spaces: &[Arc<FiniteMetricSpace>],
) -> Result<f64> {
    if u.components.len() != spaces.len() || v.components.len() != spaces.len() {
        return Err(Error::InvalidArgument(format!(
            "component counts {} and {} do not match {} factors",
            u.components.len(),
            v.components.len(),
            spaces.len()
        )));
    }
    Ok(u.components
        .iter()
        .zip(&v.components)
        .zip(spaces)
        .map(|((a, b), s)| {
            let d = cone_distance(a, b, s);
            d * d
        })
        .sum())
}

/// Points of a product of cones over the given factor spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductConfiguration {
    spaces: Vec<Arc<FiniteMetricSpace>>,
    points: Vec<ProductConePoint>,
}

impl ProductConfiguration {
    pub fn new(spaces: Vec<Arc<FiniteMetricSpace>>, points: Vec<ProductConePoint>) -> Result<Self> {
        for (k, p) in points.iter().enumerate() {
            if p.components.len() != spaces.len() {
                return Err(Error::InvalidArgument(format!(
                    "product point {k} has {} components, expected {}",
                    p.components.len(),
                    spaces.len()
                )));
            }
            for (c, s) in p.components.iter().zip(&spaces) {
                if matches!(c.base, Some(b) if b >= s.len()) {
                    return Err(Error::InvalidArgument(format!(
                        "product point {k} has a base out of range"
                    )));
                }
            }
        }
        Ok(Self { spaces, points })
    }

    pub fn spaces(&self) -> &[Arc<FiniteMetricSpace>] {
        &self.spaces
    }

    pub fn points(&self) -> &[ProductConePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn distance_sq(&self, i: usize, j: usize) -> f64 {
        product_cone_distance_sq(&self.points[i], &self.points[j], &self.spaces)
            .expect("components validated on construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_point(d: f64) -> FiniteMetricSpace {
        FiniteMetricSpace::new(vec![vec![0.0, d], vec![d, 0.0]], 1e-9).unwrap()
    }

    #[test]
    fn two_point_metric_is_valid() {
        let x = two_point(PI);
        assert_eq!(x.len(), 2);
        assert_eq!(x.diam(), PI);
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let err = validate_metric(&[vec![0.0, 1.0], vec![2.0, 0.0]], 1e-9).unwrap_err();
        match err {
            Error::InvalidMetric(v) => {
                assert!(matches!(v[0], MetricViolation::Asymmetric { i: 0, j: 1, .. }))
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn triangle_violation_has_witness() {
        let m = vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]];
        let err = validate_metric(&m, 1e-9).unwrap_err();
        match err {
            Error::InvalidMetric(v) => assert_eq!(
                v,
                vec![MetricViolation::Triangle { i: 0, j: 1, k: 2, dik: 3.0, dij: 1.0, djk: 1.0 }]
            ),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn triangle_slack_within_tolerance_accepted() {
        let m = vec![vec![0.0, 1.0, 2.0 + 1e-10], vec![1.0, 0.0, 1.0], vec![2.0 + 1e-10, 1.0, 0.0]];
        assert!(validate_metric(&m, 1e-9).is_ok());
        assert!(validate_metric(&m, 0.0).is_err());
    }

    #[test]
    fn non_finite_and_negative_rejected() {
        assert!(validate_metric(&[vec![0.0, f64::NAN], vec![f64::NAN, 0.0]], 1e-9).is_err());
        assert!(validate_metric(&[vec![0.0, -1.0], vec![-1.0, 0.0]], 1e-9).is_err());
        assert!(validate_metric(&[vec![0.0, 0.0], vec![0.0, 0.0]], 1e-9).is_err());
        assert!(validate_metric(&[vec![0.0, 1.0]], 1e-9).is_err());
    }

    #[test]
    fn shortest_paths() {
        let tri = shortest_path_metric(&[(0, 1, PI), (1, 2, PI), (2, 0, PI)], 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(tri.d(i, j), if i == j { 0.0 } else { PI });
            }
        }
        let path = shortest_path_metric(&[(0, 1, 1.0), (1, 2, 1.0)], 3).unwrap();
        assert_eq!(path.d(0, 2), 2.0);

        let edges: Vec<_> = (0..6).map(|i| (i, (i + 1) % 6, PI / 3.0)).collect();
        let hex = shortest_path_metric(&edges, 6).unwrap();
        assert!((hex.d(0, 3) - PI).abs() < 1e-15);
        assert!((hex.d(1, 4) - PI).abs() < 1e-15);
        assert!((hex.d(0, 2) - 2.0 * PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn disconnected_graph_names_vertex() {
        let err = shortest_path_metric(&[(0, 1, 1.0)], 3).unwrap_err();
        assert!(matches!(err, Error::Disconnected { from: 0, unreachable: 2 }));
    }

    #[test]
    fn truncated_cosine_values() {
        assert_eq!(truncated_cosine(0.0).unwrap(), 1.0);
        assert!((truncated_cosine(PI / 3.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(truncated_cosine(1.5 * PI).unwrap(), -1.0);
        assert!(truncated_cosine(-0.1).is_err());
    }

    #[test]
    fn cone_distance_examples() {
        let x = two_point(PI / 2.0);
        let a = ConePoint::new(0, 1.0).unwrap();
        let b = ConePoint::new(0, 2.0).unwrap();
        let c = ConePoint::new(1, 1.0).unwrap();
        assert_eq!(cone_distance(&a, &b, &x), 1.0);
        assert!((cone_distance(&a, &c, &x) - 2f64.sqrt()).abs() < 1e-15);
        let y = two_point(PI);
        assert_eq!(cone_distance(&a, &c, &y), 2.0);
        assert_eq!(cone_distance(&ConePoint::apex(), &b, &y), 2.0);
    }

    #[test]
    fn cone_inner_examples() {
        let x = two_point(PI / 3.0);
        let a = ConePoint::unit(0);
        let c = ConePoint::unit(1);
        assert_eq!(cone_inner(&a, &a, &x), 1.0);
        assert!((cone_inner(&a, &c, &x) - 0.5).abs() < 1e-15);
        assert_eq!(cone_inner(&ConePoint::apex(), &c, &x), 0.0);
    }

    #[test]
    fn apex_is_canonical() {
        assert_eq!(ConePoint::new(3, 0.0).unwrap(), ConePoint::apex());
        assert_eq!(ConePoint::new(1, 0.0).unwrap(), ConePoint::new(0, 0.0).unwrap());
        assert!(ConePoint::new(0, -1.0).is_err());
        assert!(ConePoint::new(0, f64::INFINITY).is_err());
    }

    #[test]
    fn scaling() {
        let p = ConePoint::unit(4);
        assert_eq!(scale_cone_point(&p, 2.0).unwrap(), ConePoint::new(4, 2.0).unwrap());
        assert_eq!(scale_cone_point(&ConePoint::apex(), 5.0).unwrap(), ConePoint::apex());
        let q = ConePoint::new(4, 2.0).unwrap();
        assert_eq!(scale_cone_point(&q, 0.5).unwrap(), p);
        assert!(scale_cone_point(&p, 0.0).is_err());
        assert!(scale_cone_point(&p, -1.0).is_err());
    }

    #[test]
    fn product_distance_examples() {
        // Factor distances 3 and 4 along a common ray.
        let x = Arc::new(two_point(1.0));
        let spaces = vec![x.clone(), x.clone()];
        let u = ProductConePoint { components: vec![ConePoint::unit(0), ConePoint::unit(0)] };
        let v = ProductConePoint {
            components: vec![ConePoint::new(0, 4.0).unwrap(), ConePoint::new(0, 5.0).unwrap()],
        };
        assert_eq!(product_cone_distance(&u, &v, &spaces).unwrap(), 5.0);
        assert_eq!(product_cone_distance(&u, &u, &spaces).unwrap(), 0.0);

        let one = vec![x.clone()];
        let a = ProductConePoint { components: vec![ConePoint::unit(0)] };
        let b = ProductConePoint { components: vec![ConePoint::unit(1)] };
        let d = cone_distance(&ConePoint::unit(0), &ConePoint::unit(1), &x);
        assert_eq!(product_cone_distance(&a, &b, &one).unwrap(), d);
        assert!(product_cone_distance(&a, &u, &one).is_err());
    }

    fn arb_space() -> impl Strategy<Value = FiniteMetricSpace> {
        // Angular distances between random points on S^2 form a metric.
        (2usize..7)
            .prop_flat_map(|n| proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), n))
            .prop_filter_map("degenerate", |pts| {
                let unit: Vec<[f64; 3]> = pts
                    .iter()
                    .map(|&(a, b, c)| {
                        let r = (a * a + b * b + c * c).sqrt();
                        [a / r, b / r, c / r]
                    })
                    .collect();
                if unit.iter().any(|u| !u[0].is_finite()) {
                    return None;
                }
                let n = unit.len();
                let mut m = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            let dot: f64 = (0..3).map(|k| unit[i][k] * unit[j][k]).sum();
                            m[i][j] = dot.clamp(-1.0, 1.0).acos();
                        }
                    }
                }
                FiniteMetricSpace::new(m, 1e-9).ok()
            })
    }

    proptest! {
        #[test]
        fn law_of_cosines_identity(space in arb_space(), r in proptest::collection::vec(0.0f64..3.0, 2)) {
            let x = space;
            let n = x.len();
            for i in 0..n {
                for j in 0..n {
                    let v = ConePoint::new(i, r[0]).unwrap();
                    let w = ConePoint::new(j, r[1]).unwrap();
                    let d = cone_distance(&v, &w, &x);
                    let rhs = r[0] * r[0] + r[1] * r[1] - 2.0 * cone_inner(&v, &w, &x);
                    prop_assert!((d * d - rhs).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn cone_distance_is_a_metric(
            space in arb_space(),
            picks in proptest::collection::vec((0usize..8, 0.0f64..3.0), 3..8),
        ) {
            let n = space.len();
            let pts: Vec<ConePoint> = picks.iter().map(|&(b, r)| ConePoint::new(b % n, r).unwrap()).collect();
            let cfg = ConeConfiguration::new(Arc::new(space), pts).unwrap();
            for i in 0..cfg.len() {
                for j in 0..cfg.len() {
                    prop_assert!((cfg.distance(i, j) - cfg.distance(j, i)).abs() <= 1e-12);
                    for k in 0..cfg.len() {
                        prop_assert!(cfg.distance(i, k) <= cfg.distance(i, j) + cfg.distance(j, k) + 1e-9);
                    }
                }
            }
        }

        #[test]
        fn truncated_cosine_monotone(a in 0.0f64..10.0, b in 0.0f64..10.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(truncated_cosine(lo).unwrap() >= truncated_cosine(hi).unwrap());
            if lo >= PI {
                prop_assert_eq!(truncated_cosine(lo).unwrap(), -1.0);
            }
        }

        #[test]
        fn product_embedding_is_isometric(
            space in arb_space(),
            a in (0usize..8, 0.0f64..3.0),
            b in (0usize..8, 0.0f64..3.0),
            k in 0usize..3,
        ) {
            let n = space.len();
            let x = Arc::new(space);
            let spaces = vec![x.clone(), x.clone(), x.clone()];
            let va = ConePoint::new(a.0 % n, a.1).unwrap();
            let vb = ConePoint::new(b.0 % n, b.1).unwrap();
            let mut pa = ProductConePoint::apex(3);
            let mut pb = ProductConePoint::apex(3);
            pa.components[k] = va;
            pb.components[k] = vb;
            let d = product_cone_distance(&pa, &pb, &spaces).unwrap();
            prop_assert!((d - cone_distance(&va, &vb, &x)).abs() <= 1e-12);
        }
    }
}
