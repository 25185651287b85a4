//! Finitely supported probability measures, the cone-point barycenter test,
//! and the radial normalization procedures for measures on a cone.
//!
//! For a measure `ν = Σ tᵢ Dirac[xᵢ, rᵢ]` on `Cone(X)` the barycenter is the
//! cone point exactly when `Σ tᵢ rᵢ cos(min{π, d(x, xᵢ)}) ≤ 0` for every
//! `x ∈ X`. On a finite `X` this is checked at every point; the largest of
//! these sums is the *defect*.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::solve_min_max_game;
use crate::metric::{cos_trunc, ConeConfiguration, ConePoint, FiniteMetricSpace};

pub const DEFAULT_DEFECT_TOL: f64 = 1e-9;
const WEIGHT_SUM_TOL: f64 = 1e-12;
const RADIUS_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub index: usize,
    pub weight: f64,
}

/// A probability measure on an indexed carrier. Atoms are sorted by index,
/// duplicates merged, zero weights dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMeasure {
    atoms: Vec<Atom>,
}

impl WeightedMeasure {
    /// Weights must already sum to 1 (within 1e-12).
    pub fn new(atoms: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let atoms = canonical_atoms(atoms)?;
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { atoms })
    }

    /// Divides the weights by their sum.
    pub fn normalized(atoms: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut atoms = canonical_atoms(atoms)?;
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        for a in &mut atoms {
            a.weight /= total;
        }
        Ok(Self { atoms })
    }

    pub fn point_mass(index: usize) -> Self {
        Self { atoms: vec![Atom { index, weight: 1.0 }] }
    }

    pub fn uniform(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::normalized(indices.into_iter().map(|i| (i, 1.0)))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.atoms.iter().map(|a| a.index)
    }

    pub fn weight_of(&self, index: usize) -> f64 {
        self.atoms
            .binary_search_by_key(&index, |a| a.index)
            .map_or(0.0, |k| self.atoms[k].weight)
    }

    /// Whether the support has at least two points.
    pub fn has_two_points(&self) -> bool {
        self.atoms.len() >= 2
    }

    pub fn max_index(&self) -> usize {
        self.atoms.last().map_or(0, |a| a.index)
    }

    /// Dense weight vector of length `n` (zero off the support).
    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut w = vec![0.0; n];
        for a in &self.atoms {
            w[a.index] = a.weight;
        }
        w
    }

    /// Relabels atom indices through `map` (old index -> new index).
    pub fn relabeled(&self, map: impl Fn(usize) -> usize) -> Result<Self> {
        Self::new(self.atoms.iter().map(|a| (map(a.index), a.weight)))
    }
}

fn canonical_atoms(atoms: impl IntoIterator<Item = (usize, f64)>) -> Result<Vec<Atom>> {
    let mut v: Vec<Atom> = Vec::new();
    for (index, weight) in atoms {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight {weight} at atom {index}")));
        }
        if weight > 0.0 {
            v.push(Atom { index, weight });
        }
    }
    v.sort_by_key(|a| a.index);
    let mut merged: Vec<Atom> = Vec::with_capacity(v.len());
    for a in v {
        match merged.last_mut() {
            Some(last) if last.index == a.index => last.weight += a.weight,
            _ => merged.push(a),
        }
    }
    if merged.is_empty() {
        return Err(Error::InvalidArgument("measure has no positive weight".into()));
    }
    Ok(merged)
}

/// A measure on a finite configuration of cone points.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeMeasure {
    config: ConeConfiguration,
    measure: WeightedMeasure,
}

impl ConeMeasure {
    pub fn new(config: ConeConfiguration, measure: WeightedMeasure) -> Result<Self> {
        if measure.max_index() >= config.len() {
            return Err(Error::InvalidArgument(format!(
                "measure references point {} of a {}-point configuration",
                measure.max_index(),
                config.len()
            )));
        }
        Ok(Self { config, measure })
    }

    /// Builds the configuration from the atoms themselves, merging atoms at
    /// the same cone point. Weights are renormalized.
    pub fn from_atoms(
        space: Arc<FiniteMetricSpace>,
        atoms: impl IntoIterator<Item = (ConePoint, f64)>,
    ) -> Result<Self> {
        let mut points: Vec<ConePoint> = Vec::new();
        let mut weights = Vec::new();
        for (p, w) in atoms {
            let k = match points.iter().position(|q| *q == p) {
                Some(k) => k,
                None => {
                    points.push(p);
                    points.len() - 1
                }
            };
            weights.push((k, w));
        }
        let measure = WeightedMeasure::normalized(weights)?;
        let config = ConeConfiguration::new(space, points)?;
        Self::new(config, measure)
    }

    /// `ι_*μ`: every atom of a measure on `X` placed at radius 1.
    pub fn lift(space: Arc<FiniteMetricSpace>, mu: &WeightedMeasure) -> Result<Self> {
        if mu.max_index() >= space.len() {
            return Err(Error::InvalidArgument("measure index out of range".into()));
        }
        Self::from_atoms(space, mu.atoms().iter().map(|a| (ConePoint::unit(a.index), a.weight)))
    }

    pub fn config(&self) -> &ConeConfiguration {
        &self.config
    }

    pub fn measure(&self) -> &WeightedMeasure {
        &self.measure
    }

    pub fn space(&self) -> &FiniteMetricSpace {
        self.config.space()
    }

    /// `(point, weight)` for each atom, in atom order.
    pub fn weighted_points(&self) -> impl Iterator<Item = (ConePoint, f64)> + '_ {
        self.measure.atoms().iter().map(|a| (*self.config.point(a.index), a.weight))
    }

    /// Second moment about the cone point, `Σ tᵢ rᵢ²`.
    pub fn second_moment(&self) -> f64 {
        self.weighted_points().map(|(p, w)| w * p.radius() * p.radius()).sum()
    }

    /// If every atom has radius 1, the corresponding measure on `X`.
    pub fn unlift(&self) -> Option<WeightedMeasure> {
        let mut atoms = Vec::new();
        for (p, w) in self.weighted_points() {
            if (p.radius() - 1.0).abs() > RADIUS_TIE_TOL {
                return None;
            }
            atoms.push((p.base()?, w));
        }
        WeightedMeasure::normalized(atoms).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarycenterReport {
    /// `max_x Σ tᵢ ⟨E_x, vᵢ⟩`.
    pub defect: f64,
    /// Base point attaining the max.
    pub witness: usize,
    pub is_cone_point_barycenter: bool,
    /// Accepted only because of the tolerance (`0 < defect ≤ tol`).
    pub marginal: bool,
}

impl BarycenterReport {
    fn from_defect(defect: f64, witness: usize, tol: f64) -> Self {
        Self {
            defect,
            witness,
            is_cone_point_barycenter: defect <= tol,
            marginal: defect > 0.0 && defect <= tol,
        }
    }

    pub fn require(self) -> Result<Self> {
        if self.is_cone_point_barycenter {
            Ok(self)
        } else {
            Err(Error::Inadmissible { defect: self.defect, witness: self.witness })
        }
    }
}

/// Evaluates the cone-point barycenter criterion at every base point.
pub fn barycenter_defect(nu: &ConeMeasure, tol: f64) -> BarycenterReport {
    let space = nu.space();
    let pts: Vec<(ConePoint, f64)> = nu.weighted_points().collect();
    let mut best = (f64::NEG_INFINITY, 0);
    for x in 0..space.len() {
        let s: f64 = pts
            .iter()
            .filter_map(|(p, w)| p.base().map(|b| w * p.radius() * cos_trunc(space.d(x, b))))
            .sum();
        if s > best.0 {
            best = (s, x);
        }
    }
    BarycenterReport::from_defect(best.0, best.1, tol)
}

/// Barycenter test for `ι_*μ` without building the cone measure.
pub fn base_defect(space: &FiniteMetricSpace, mu: &WeightedMeasure, tol: f64) -> BarycenterReport {
    let mut best = (f64::NEG_INFINITY, 0);
    for x in 0..space.len() {
        let s: f64 = mu.atoms().iter().map(|a| a.weight * cos_trunc(space.d(x, a.index))).sum();
        if s > best.0 {
            best = (s, x);
        }
    }
    BarycenterReport::from_defect(best.0, best.1, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallMass {
    pub mass: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Mass of the closed ball `{y : d(x, y) ≤ θ}` against `1/(1 + cos θ)`.
pub fn ball_mass_check(
    space: &FiniteMetricSpace,
    mu: &WeightedMeasure,
    x: usize,
    theta: f64,
    tol: f64,
) -> Result<BallMass> {
    if !(0.0..FRAC_PI_2).contains(&theta) {
        return Err(Error::InvalidArgument(format!("θ = {theta} outside [0, π/2)")));
    }
    if x >= space.len() || mu.max_index() >= space.len() {
        return Err(Error::InvalidArgument("point index out of range".into()));
    }
    base_defect(space, mu, tol).require()?;
    let mass: f64 =
        mu.atoms().iter().filter(|a| space.d(x, a.index) <= theta).map(|a| a.weight).sum();
    let bound = 1.0 / (1.0 + theta.cos());
    Ok(BallMass { mass, bound, holds: mass <= bound + tol })
}

/// Removes the atom at the cone point and renormalizes the rest.
pub fn strip_cone_point_mass(nu: &ConeMeasure) -> Result<ConeMeasure> {
    let apex_weight: f64 =
        nu.weighted_points().filter(|(p, _)| p.is_apex()).map(|(_, w)| w).sum();
    if apex_weight == 0.0 {
        return Ok(nu.clone());
    }
    if nu.weighted_points().all(|(p, _)| p.is_apex()) {
        return Err(Error::AllMassAtConePoint);
    }
    ConeMeasure::from_atoms(
        nu.config.space_arc().clone(),
        nu.weighted_points().filter(|(p, _)| !p.is_apex()),
    )
}

#[derive(Debug, Clone)]
pub struct AlphaRescale {
    pub measure: ConeMeasure,
    /// Whether the rescaled measure is guaranteed to have δ at least as large.
    pub monotone_up: bool,
}

/// Moves the `group` atoms (configuration point indices) radially by `α` and
/// divides their weights by `α`, then renormalizes.
pub fn alpha_rescale(nu: &ConeMeasure, group: &[usize], alpha: f64) -> Result<AlphaRescale> {
    rescale_group(nu, group, alpha, None)
}

fn rescale_group(
    nu: &ConeMeasure,
    group: &[usize],
    alpha: f64,
    snap: Option<f64>,
) -> Result<AlphaRescale> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("α = {alpha} must be > 0")));
    }
    let in_group = |k: usize| group.contains(&k);
    let atoms = nu.measure.atoms();
    if group.is_empty() || !group.iter().all(|g| atoms.iter().any(|a| a.index == *g)) {
        return Err(Error::InvalidArgument("group must be a nonempty set of atoms".into()));
    }
    if atoms.iter().all(|a| in_group(a.index)) {
        return Err(Error::InvalidArgument("group must be a proper subset of the atoms".into()));
    }

    let (mut a, mut b, mut big_a, mut big_b) = (0.0, 0.0, 0.0, 0.0);
    for atom in atoms {
        let r = nu.config.point(atom.index).radius();
        if in_group(atom.index) {
            a += atom.weight;
            big_a += atom.weight * r * r;
        } else {
            b += atom.weight;
            big_b += atom.weight * r * r;
        }
    }
    if big_b <= 0.0 {
        return Err(Error::InvalidArgument("atoms outside the group all sit at the cone point".into()));
    }
    // α·A/B ≤ a/b for α > 1, reversed for α < 1 (cross-multiplied).
    let lhs = alpha * big_a * b;
    let rhs = a * big_b;
    let monotone_up = if alpha > 1.0 {
        lhs <= rhs
    } else if alpha < 1.0 {
        lhs >= rhs
    } else {
        true
    };

    let mut out = Vec::with_capacity(atoms.len());
    for atom in atoms {
        let p = *nu.config.point(atom.index);
        if in_group(atom.index) {
            let q = match (snap, p.base()) {
                (Some(r), Some(x)) => ConePoint::new(x, r)?,
                _ => crate::metric::scale_cone_point(&p, alpha)?,
            };
            out.push((q, atom.weight / alpha));
        } else {
            out.push((p, atom.weight));
        }
    }
    let measure = ConeMeasure::from_atoms(nu.config.space_arc().clone(), out)?;
    Ok(AlphaRescale { measure, monotone_up })
}

#[derive(Debug, Clone)]
pub struct RadialNormalization {
    pub measure: ConeMeasure,
    /// The `α` applied at each pushing step.
    pub alphas: Vec<f64>,
    /// Whether each step satisfied the monotonicity criterion.
    pub steps_monotone: Vec<bool>,
}

impl RadialNormalization {
    pub fn iterations(&self) -> usize {
        self.alphas.len()
    }
}

/// Pushes the innermost atoms out to the next radius until every atom sits at
/// the same radius, then rescales that radius to 1.
pub fn radial_normalize(nu: &ConeMeasure, tol: f64) -> Result<RadialNormalization> {
    barycenter_defect(nu, tol).require()?;
    if nu.weighted_points().any(|(p, _)| p.is_apex()) {
        return Err(Error::InvalidArgument(
            "measure has mass at the cone point; strip it first".into(),
        ));
    }
    let mut cur = nu.clone();
    let mut alphas = Vec::new();
    let mut steps_monotone = Vec::new();
    loop {
        let radii: Vec<(usize, f64)> =
            cur.measure.atoms().iter().map(|a| (a.index, cur.config.point(a.index).radius())).collect();
        let r_min = radii.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let tie = RADIUS_TIE_TOL * r_min.max(1.0);
        let group: Vec<usize> =
            radii.iter().filter(|r| r.1 - r_min <= tie).map(|r| r.0).collect();
        if group.len() == radii.len() {
            break;
        }
        let r_next = radii
            .iter()
            .filter(|r| r.1 - r_min > tie)
            .map(|r| r.1)
            .fold(f64::INFINITY, f64::min);
        let alpha = r_next / r_min;
        let step = rescale_group(&cur, &group, alpha, Some(r_next))?;
        alphas.push(alpha);
        steps_monotone.push(step.monotone_up);
        cur = step.measure;
    }
    let unit = cur.weighted_points().map(|(p, w)| {
        (ConePoint::unit(p.base().expect("no apex atoms")), w)
    });
    let measure = ConeMeasure::from_atoms(cur.config.space_arc().clone(), unit.collect::<Vec<_>>())?;
    Ok(RadialNormalization { measure, alphas, steps_monotone })
}

/// Whether some measure supported on `columns` has its lift barycentered at
/// the cone point, and the best such weights. The game value is
/// `min_t max_x Σ tᵢ cos(min{π, d(x, xᵢ)})` with every row scaled by
/// `row_scale` (positive), which selects different admissible measures.
pub fn admissibility_game(
    space: &FiniteMetricSpace,
    columns: &[usize],
    row_scale: Option<&[f64]>,
) -> (f64, WeightedMeasure) {
    let a: Vec<Vec<f64>> = (0..space.len())
        .map(|x| {
            let s = row_scale.map_or(1.0, |r| r[x]);
            columns.iter().map(|&i| s * cos_trunc(space.d(x, i))).collect()
        })
        .collect();
    let g = solve_min_max_game(&a);
    let mu = WeightedMeasure::normalized(columns.iter().copied().zip(g.weights))
        .expect("game weights lie on the simplex");
    (g.value, mu)
}

/// Some admissible measure on `X`, if one exists (defect ≤ `tol`).
pub fn find_admissible_measure(space: &FiniteMetricSpace, tol: f64) -> Option<WeightedMeasure> {
    let cols: Vec<usize> = (0..space.len()).collect();
    let (_, mu) = admissibility_game(space, &cols, None);
    base_defect(space, &mu, tol).is_cone_point_barycenter.then_some(mu)
}
