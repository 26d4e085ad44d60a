//! Convex state spaces, states, effects, and measurements.
//!
//! Everything lives in homogeneous coordinates: a state of an ambient
//! `d`-dimensional space is a vector in `R^(d+1)` whose last entry is 1,
//! and an effect is a linear functional on that space (its last entry is
//! the constant term). Affine maps and affine functionals then become
//! plain linear algebra.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::lp;

/// Absolute tolerance for feasibility and equality checks.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    /// Finitely many genuine extreme points; LP answers are exact.
    Polytope,
    /// Vertex/ray sample of a smooth body; all checks are approximate
    /// relative to the sampled hull.
    Discretized,
}

/// How faithfully `effect_rays` generates the cone of nonnegative
/// affine functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayExactness {
    /// The listed rays are the full set of extremal rays.
    Complete,
    /// Products of the factors' complete rays (composite spaces); exact
    /// for every identity used here, possibly a strict subcone.
    ProductClosed,
    /// Discretization of a smooth cone.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Simplex { n: usize },
    Gbit,
    BlochBall { axes: usize },
    Product,
    Custom,
}

#[derive(Debug, Clone)]
pub struct SpaceOptions {
    pub tol: f64,
    /// Verify per-vertex extremality by LP at construction. Mandatory for
    /// polytopes loaded from files; catalog constructors with structural
    /// extremality arguments may skip it.
    pub check_extremality: bool,
    /// Verify every ray is nonnegative on every vertex at construction.
    /// Quadratic in the sample size; catalog constructors whose rays are
    /// nonnegative by construction may skip it.
    pub check_ray_positivity: bool,
    pub kind: SpaceKind,
    pub exactness: RayExactness,
    pub family: Family,
}

impl Default for SpaceOptions {
    fn default() -> Self {
        SpaceOptions {
            tol: DEFAULT_TOL,
            check_extremality: true,
            check_ray_positivity: true,
            kind: SpaceKind::Polytope,
            exactness: RayExactness::Complete,
            family: Family::Custom,
        }
    }
}

#[derive(Debug)]
pub struct StateSpace {
    label: String,
    dim: usize,
    pure_states: Vec<DVector<f64>>,
    effect_rays: Vec<DVector<f64>>,
    kind: SpaceKind,
    exactness: RayExactness,
    family: Family,
    tol: f64,
    /// Indices of an affinely independent vertex subset spanning the
    /// affine hull; functional identities are checked on these.
    affine_basis: Vec<usize>,
    /// Canonical nonnegative weights with `sum_i w_i r_i = iota` on the
    /// space; witnesses that the unit is in the ray cone.
    unit_weights: Vec<f64>,
    /// Cached fidelity-LP constraint rows: `rows[t][i] = r_i(basis vertex t)`.
    lp_rows: Vec<Vec<f64>>,
}

impl StateSpace {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        pure_states: Vec<Vec<f64>>,
        effect_rays: Vec<Vec<f64>>,
        opts: SpaceOptions,
    ) -> Result<Arc<StateSpace>> {
        let label = label.into();
        if dim == 0 {
            return Err(Error::InvalidSpace("ambient dimension must be positive".into()));
        }
        if pure_states.is_empty() {
            return Err(Error::InvalidSpace("no pure states".into()));
        }
        if effect_rays.is_empty() {
            return Err(Error::InvalidSpace(
                "no effect rays; supply them or compute them for a polytope".into(),
            ));
        }
        let h = dim + 1;
        let mut verts = Vec::with_capacity(pure_states.len());
        for (i, v) in pure_states.iter().enumerate() {
            if v.len() != h {
                return Err(Error::Dimension(format!(
                    "pure state {i} has length {}, expected {h}",
                    v.len()
                )));
            }
            if (v[dim] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidSpace(format!(
                    "pure state {i} has homogeneous coordinate {} != 1",
                    v[dim]
                )));
            }
            verts.push(DVector::from_column_slice(v));
        }
        let mut rays = Vec::with_capacity(effect_rays.len());
        for (i, r) in effect_rays.iter().enumerate() {
            if r.len() != h {
                return Err(Error::Dimension(format!(
                    "effect ray {i} has length {}, expected {h}",
                    r.len()
                )));
            }
            rays.push(DVector::from_column_slice(r));
        }

        // Rays must be nonnegative on every vertex.
        if opts.check_ray_positivity {
            for (i, r) in rays.iter().enumerate() {
                for (v, p) in verts.iter().enumerate() {
                    let val = r.dot(p);
                    if val < -opts.tol {
                        return Err(Error::InvalidSpace(format!(
                            "effect ray {i} is negative ({val:.3e}) on pure state {v}"
                        )));
                    }
                }
            }
        }

        let affine_basis = greedy_affine_basis(&verts, 1e-10);
        let lp_rows: Vec<Vec<f64>> = affine_basis
            .iter()
            .map(|&t| rays.iter().map(|r| r.dot(&verts[t])).collect())
            .collect();

        // iota must lie in the ray cone, otherwise no measurement can be
        // assembled from rays and the fidelity LP is infeasible.
        let unit_weights = match lp::solve_feasibility(
            lp_rows.clone(),
            vec![1.0; lp_rows.len()],
            &lp::Options::default(),
        )? {
            lp::Outcome::Optimal(s) => s.x,
            _ => {
                return Err(Error::InvalidSpace(
                    "unit effect is not in the cone spanned by the effect rays".into(),
                ))
            }
        };

        let space = StateSpace {
            label,
            dim,
            pure_states: verts,
            effect_rays: rays,
            kind: opts.kind,
            exactness: opts.exactness,
            family: opts.family,
            tol: opts.tol,
            affine_basis,
            unit_weights,
            lp_rows,
        };

        if opts.check_extremality {
            for i in 0..space.pure_states.len() {
                if space.in_hull_excluding(&space.pure_states[i], Some(i))?.is_inside() {
                    return Err(Error::InvalidSpace(format!(
                        "pure state {i} is not an extreme point (it lies in the hull of the others)"
                    )));
                }
            }
        }
        Ok(Arc::new(space))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Homogeneous dimension `d + 1`.
    pub fn hdim(&self) -> usize {
        self.dim + 1
    }

    pub fn pure_states(&self) -> &[DVector<f64>] {
        &self.pure_states
    }

    pub fn n_vertices(&self) -> usize {
        self.pure_states.len()
    }

    pub fn effect_rays(&self) -> &[DVector<f64>] {
        &self.effect_rays
    }

    pub fn n_rays(&self) -> usize {
        self.effect_rays.len()
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn exactness(&self) -> RayExactness {
        self.exactness
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn affine_basis(&self) -> &[usize] {
        &self.affine_basis
    }

    pub fn unit_weights(&self) -> &[f64] {
        &self.unit_weights
    }

    /// The unit effect iota = (0, ..., 0, 1).
    pub fn unit(&self) -> DVector<f64> {
        let mut u = DVector::zeros(self.hdim());
        u[self.dim] = 1.0;
        u
    }

    /// Fidelity-LP constraint rows over the first `n_rays` rays.
    pub fn lp_rows_prefix(&self, n_rays: usize) -> Vec<Vec<f64>> {
        self.lp_rows
            .iter()
            .map(|row| row[..n_rays].to_vec())
            .collect()
    }

    pub(crate) fn same_space(&self, other: &StateSpace) -> bool {
        std::ptr::eq(self, other)
            || (self.label == other.label
                && self.dim == other.dim
                && self.pure_states.len() == other.pure_states.len())
    }

    fn in_hull_excluding(&self, target: &DVector<f64>, skip: Option<usize>) -> Result<Membership> {
        let h = self.hdim();
        let cols: Vec<&DVector<f64>> = self
            .pure_states
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(_, p)| p)
            .collect();
        let rows: Vec<Vec<f64>> = (0..h)
            .map(|r| cols.iter().map(|p| p[r]).collect())
            .collect();
        let rhs: Vec<f64> = (0..h).map(|r| target[r]).collect();
        match lp::solve_feasibility(rows, rhs, &lp::Options::default())? {
            lp::Outcome::Optimal(s) => {
                // Re-expand weights over the full vertex list.
                let mut weights = vec![0.0; self.pure_states.len()];
                let mut k = 0;
                for i in 0..self.pure_states.len() {
                    if Some(i) == skip {
                        continue;
                    }
                    weights[i] = s.x[k];
                    k += 1;
                }
                Ok(Membership::Inside { weights })
            }
            lp::Outcome::Infeasible(f) => {
                let witness = DVector::from_column_slice(&f.y);
                let margin = witness.dot(target);
                Ok(Membership::Outside { witness, margin })
            }
            lp::Outcome::Unbounded => unreachable!("feasibility LP cannot be unbounded"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Membership {
    /// Barycentric weights over the pure states reproducing the point.
    Inside { weights: Vec<f64> },
    /// Separating affine functional `w` with `w(p) <= 0` on every vertex
    /// and `w(target) = margin > 0`.
    Outside { witness: DVector<f64>, margin: f64 },
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        matches!(self, Membership::Inside { .. })
    }
}

/// Convex-hull membership of a raw homogeneous vector.
pub fn membership(coords: &[f64], space: &StateSpace) -> Result<Membership> {
    if coords.len() != space.hdim() {
        return Err(Error::Dimension(format!(
            "vector length {} but space has homogeneous dimension {}",
            coords.len(),
            space.hdim()
        )));
    }
    if (coords[space.dim()] - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!(
            "homogeneous coordinate is {}, expected 1",
            coords[space.dim()]
        )));
    }
    let target = DVector::from_column_slice(coords);
    space.in_hull_excluding(&target, None)
}

#[derive(Clone)]
pub struct State {
    coords: DVector<f64>,
    space: Arc<StateSpace>,
}

impl std::fmt::Debug for State {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "State({} in {})", fmt_vec(&self.coords), self.space.label())
    }
}

impl State {
    pub fn new(coords: Vec<f64>, space: &Arc<StateSpace>) -> Result<State> {
        match membership(&coords, space)? {
            Membership::Inside { .. } => Ok(State {
                coords: DVector::from_column_slice(&coords),
                space: Arc::clone(space),
            }),
            Membership::Outside { margin, .. } => Err(Error::InvalidState(format!(
                "point is outside the state space (separation margin {margin:.3e})"
            ))),
        }
    }

    /// The i-th pure state.
    pub fn vertex(space: &Arc<StateSpace>, i: usize) -> State {
        State {
            coords: space.pure_states()[i].clone(),
            space: Arc::clone(space),
        }
    }

    /// Convex combination of the pure states with the given weights.
    pub fn from_barycentric(weights: &[f64], space: &Arc<StateSpace>) -> Result<State> {
        if weights.len() != space.n_vertices() {
            return Err(Error::Dimension(format!(
                "{} weights for {} vertices",
                weights.len(),
                space.n_vertices()
            )));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < -1e-12) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(
                "barycentric weights must be nonnegative and sum to 1".into(),
            ));
        }
        let mut coords = DVector::zeros(space.hdim());
        for (w, p) in weights.iter().zip(space.pure_states()) {
            coords += p * *w;
        }
        Ok(State {
            coords,
            space: Arc::clone(space),
        })
    }

    /// Construct without the membership LP. For internal call sites that
    /// already hold a convexity argument (e.g. outputs of `apply` are
    /// checked by the caller).
    pub(crate) fn from_parts_unchecked(coords: DVector<f64>, space: Arc<StateSpace>) -> State {
        State { coords, space }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn membership(&self) -> Result<Membership> {
        let v: Vec<f64> = self.coords.iter().copied().collect();
        membership(&v, &self.space)
    }

    /// Coordinate-identical (used for the exact `F(s,s) = 1` shortcut).
    pub fn coords_eq(&self, other: &State) -> bool {
        self.coords == other.coords
    }

    pub fn mix(&self, other: &State, lambda: f64) -> Result<State> {
        if !self.space.same_space(&other.space) {
            return Err(Error::SpaceMismatch("mixing states of different spaces".into()));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidState(format!("mixing weight {lambda} outside [0,1]")));
        }
        Ok(State {
            coords: &self.coords * lambda + &other.coords * (1.0 - lambda),
            space: Arc::clone(&self.space),
        })
    }

    /// Euclidean distance between coordinate vectors; a cheap sameness
    /// proxy used by cycle detection.
    pub fn coord_distance(&self, other: &State) -> f64 {
        (&self.coords - &other.coords).norm()
    }
}

#[derive(Clone)]
pub struct Effect {
    functional: DVector<f64>,
    space: Arc<StateSpace>,
}

impl std::fmt::Debug for Effect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Effect({} on {})", fmt_vec(&self.functional), self.space.label())
    }
}

impl Effect {
    pub fn new(functional: Vec<f64>, space: &Arc<StateSpace>) -> Result<Effect> {
        if functional.len() != space.hdim() {
            return Err(Error::Dimension(format!(
                "functional length {} but homogeneous dimension is {}",
                functional.len(),
                space.hdim()
            )));
        }
        let f = DVector::from_column_slice(&functional);
        for (v, p) in space.pure_states().iter().enumerate() {
            let val = f.dot(p);
            if !(-space.tol()..=1.0 + space.tol()).contains(&val) {
                return Err(Error::InvalidEffect(format!(
                    "value {val:.6} on pure state {v} outside [0, 1]"
                )));
            }
        }
        Ok(Effect {
            functional: f,
            space: Arc::clone(space),
        })
    }

    pub fn unit(space: &Arc<StateSpace>) -> Effect {
        Effect {
            functional: space.unit(),
            space: Arc::clone(space),
        }
    }

    pub fn zero(space: &Arc<StateSpace>) -> Effect {
        Effect {
            functional: DVector::zeros(space.hdim()),
            space: Arc::clone(space),
        }
    }

    /// The scaled ray `weight * r_i`, valid whenever the scaling keeps the
    /// vertex values within [0, 1].
    pub fn from_ray(space: &Arc<StateSpace>, ray: usize, weight: f64) -> Result<Effect> {
        let f: Vec<f64> = (space.effect_rays()[ray].clone() * weight)
            .iter()
            .copied()
            .collect();
        Effect::new(f, space)
    }

    pub(crate) fn from_parts_unchecked(functional: DVector<f64>, space: Arc<StateSpace>) -> Effect {
        Effect { functional, space }
    }

    pub fn functional(&self) -> &DVector<f64> {
        &self.functional
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    /// Partial order on effects: `self >= other` pointwise on the space
    /// (affinity makes vertex checks sufficient).
    pub fn dominates(&self, other: &Effect, tol: f64) -> bool {
        self.space.same_space(&other.space)
            && self
                .space
                .pure_states()
                .iter()
                .all(|p| self.functional.dot(p) - other.functional.dot(p) >= -tol)
    }

    pub fn mix(&self, other: &Effect, lambda: f64) -> Result<Effect> {
        if !self.space.same_space(&other.space) {
            return Err(Error::SpaceMismatch("mixing effects of different spaces".into()));
        }
        Ok(Effect {
            functional: &self.functional * lambda + &other.functional * (1.0 - lambda),
            space: Arc::clone(&self.space),
        })
    }
}

/// Outcome probability `e(s)`.
pub fn evaluate_effect(e: &Effect, s: &State) -> Result<f64> {
    if !e.space().same_space(s.space()) {
        return Err(Error::SpaceMismatch(
            "effect and state belong to different spaces".into(),
        ));
    }
    let raw = e.functional().dot(s.coords());
    let tol = s.space().tol();
    if raw < -tol || raw > 1.0 + tol {
        return Err(Error::InvalidEffect(format!(
            "pairing value {raw:.6} outside [0, 1] beyond tolerance"
        )));
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// Labeled outcome distribution.
#[derive(Debug, Clone)]
pub struct Distribution {
    pub outcomes: Vec<(String, f64)>,
}

impl Distribution {
    pub fn probs(&self) -> Vec<f64> {
        self.outcomes.iter().map(|(_, p)| *p).collect()
    }

    pub fn total(&self) -> f64 {
        self.outcomes.iter().map(|(_, p)| p).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Measurement {
    outcomes: Vec<(String, Effect)>,
}

impl Measurement {
    pub fn new(outcomes: Vec<(String, Effect)>) -> Result<Measurement> {
        let Some((_, first)) = outcomes.first() else {
            return Err(Error::InvalidMeasurement("no outcomes".into()));
        };
        let space = Arc::clone(first.space());
        let mut sum = DVector::zeros(space.hdim());
        for (_, e) in &outcomes {
            if !e.space().same_space(&space) {
                return Err(Error::InvalidMeasurement(
                    "outcome effects live on different spaces".into(),
                ));
            }
            sum += e.functional();
        }
        // Completeness is an identity of functionals on the state space:
        // check it on an affine basis of the vertices. (Strict componentwise
        // equality would wrongly reject e.g. the fine simplex measurement,
        // whose coordinate functionals sum to iota only on the affine hull.)
        let unit = space.unit();
        for &t in space.affine_basis() {
            let p = &space.pure_states()[t];
            let gap = (sum.dot(p) - unit.dot(p)).abs();
            if gap > space.tol() {
                return Err(Error::InvalidMeasurement(format!(
                    "effects sum to {:.9} != 1 on basis vertex {t}",
                    sum.dot(p)
                )));
            }
        }
        Ok(Measurement { outcomes })
    }

    pub fn outcomes(&self) -> &[(String, Effect)] {
        &self.outcomes
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        self.outcomes[0].1.space()
    }

    pub fn n_outcomes(&self) -> usize {
        self.outcomes.len()
    }
}

/// Outcome distribution of measurement `m` on state `s`.
pub fn measure(m: &Measurement, s: &State) -> Result<Distribution> {
    if !m.space().same_space(s.space()) {
        return Err(Error::SpaceMismatch(
            "measurement and state belong to different spaces".into(),
        ));
    }
    let mut outcomes = Vec::with_capacity(m.n_outcomes());
    for (label, e) in m.outcomes() {
        outcomes.push((label.clone(), evaluate_effect(e, s)?));
    }
    let d = Distribution { outcomes };
    let total = d.total();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidMeasurement(format!(
            "outcome probabilities sum to {total}, expected 1"
        )));
    }
    Ok(d)
}

/// One line of a report-style validation.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst numerical margin observed (negative margins are failures).
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, margin: f64, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            margin,
            detail,
        });
    }
}

/// Full report-style validation of a state space.
pub fn validate_space(space: &StateSpace) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let tol = space.tol();

    let mut worst = 0.0f64;
    let mut bad = String::new();
    for (i, p) in space.pure_states().iter().enumerate() {
        let dev = (p[space.dim()] - 1.0).abs();
        if dev > worst {
            worst = dev;
            bad = format!("vertex {i}");
        }
    }
    rep.push(
        "homogeneous-coordinates",
        worst <= 1e-12,
        1e-12 - worst,
        bad,
    );

    let mut worst = f64::INFINITY;
    let mut bad = String::new();
    for (i, r) in space.effect_rays().iter().enumerate() {
        for (v, p) in space.pure_states().iter().enumerate() {
            let val = r.dot(p);
            if val < worst {
                worst = val;
                bad = format!("ray {i} on vertex {v}");
            }
        }
    }
    rep.push("rays-nonnegative-on-vertices", worst >= -tol, worst + tol, bad);

    let unit = space.unit();
    let mut worst = 0.0f64;
    for p in space.pure_states() {
        worst = worst.max((unit.dot(p) - 1.0).abs());
    }
    rep.push(
        "unit-evaluates-to-one",
        worst <= tol,
        tol - worst,
        String::new(),
    );

    let residual: f64 = {
        let lhs: Vec<f64> = space
            .lp_rows_prefix(space.n_rays())
            .iter()
            .map(|row| {
                row.iter()
                    .zip(space.unit_weights())
                    .map(|(a, w)| a * w)
                    .sum::<f64>()
            })
            .collect();
        lhs.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max)
    };
    rep.push(
        "unit-in-ray-cone",
        residual <= 1e-7,
        1e-7 - residual,
        String::new(),
    );

    if space.kind() == SpaceKind::Polytope {
        let mut all_extreme = true;
        let mut detail = String::new();
        for i in 0..space.n_vertices() {
            match space.in_hull_excluding(&space.pure_states()[i], Some(i)) {
                Ok(m) if m.is_inside() => {
                    all_extreme = false;
                    detail = format!("vertex {i} lies in the hull of the others");
                    break;
                }
                Ok(_) => {}
                Err(e) => {
                    all_extreme = false;
                    detail = format!("extremality LP failed on vertex {i}: {e}");
                    break;
                }
            }
        }
        rep.push("vertices-extreme", all_extreme, 0.0, detail);
    } else {
        rep.push(
            "vertices-extreme",
            true,
            0.0,
            "discretized space: extremality holds structurally for the sample".into(),
        );
    }
    rep
}

/// Report-style validation of an effect candidate against a space.
pub fn validate_effect(functional: &[f64], space: &StateSpace) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if functional.len() != space.hdim() {
        rep.push(
            "dimension",
            false,
            -1.0,
            format!("length {} != {}", functional.len(), space.hdim()),
        );
        return rep;
    }
    let f = DVector::from_column_slice(functional);
    let tol = space.tol();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut lo_at = 0;
    let mut hi_at = 0;
    for (v, p) in space.pure_states().iter().enumerate() {
        let val = f.dot(p);
        if val < lo {
            lo = val;
            lo_at = v;
        }
        if val > hi {
            hi = val;
            hi_at = v;
        }
    }
    rep.push(
        "nonnegative-on-vertices",
        lo >= -tol,
        lo + tol,
        format!("minimum {lo:.9} at vertex {lo_at}"),
    );
    rep.push(
        "at-most-one-on-vertices",
        hi <= 1.0 + tol,
        1.0 + tol - hi,
        format!("maximum {hi:.9} at vertex {hi_at}"),
    );
    rep
}

/// Report-style validation of a measurement candidate.
pub fn validate_measurement(effects: &[Vec<f64>], space: &StateSpace) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let mut sum = DVector::zeros(space.hdim());
    for (k, f) in effects.iter().enumerate() {
        let sub = validate_effect(f, space);
        for c in sub.checks {
            rep.push(
                &format!("outcome-{k}-{}", c.name),
                c.passed,
                c.margin,
                c.detail,
            );
        }
        if f.len() == space.hdim() {
            sum += DVector::from_column_slice(f);
        }
    }
    let unit = space.unit();
    let mut worst = 0.0f64;
    let mut at = 0;
    for &t in space.affine_basis() {
        let p = &space.pure_states()[t];
        let dev = (sum.dot(p) - unit.dot(p)).abs();
        if dev > worst {
            worst = dev;
            at = t;
        }
    }
    rep.push(
        "sums-to-unit",
        worst <= space.tol(),
        space.tol() - worst,
        format!("worst deviation {worst:.3e} at basis vertex {at}"),
    );
    rep
}

/// Greedy affinely independent spanning subset (lowest indices win).
fn greedy_affine_basis(verts: &[DVector<f64>], tol: f64) -> Vec<usize> {
    let mut basis: Vec<usize> = Vec::new();
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for (i, v) in verts.iter().enumerate() {
        let mut resid = v.clone();
        for q in &ortho {
            let c = q.dot(&resid);
            resid -= q * c;
        }
        let norm = resid.norm();
        if norm > tol * v.norm().max(1.0) {
            ortho.push(resid / norm);
            basis.push(i);
        }
    }
    basis
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", items.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn membership_vertex_and_midpoint() {
        let bit = models::classical_simplex(2).unwrap();
        // vertex: weight 1 on itself
        let m = membership(&[1.0, 0.0, 1.0], &bit).unwrap();
        match m {
            Membership::Inside { weights } => {
                assert!((weights[0] - 1.0).abs() < 1e-9);
                assert!(weights[1].abs() < 1e-9);
            }
            _ => panic!("vertex must be inside"),
        }
        // midpoint: weights (0.5, 0.5)
        let m = membership(&[0.5, 0.5, 1.0], &bit).unwrap();
        match m {
            Membership::Inside { weights } => {
                assert!((weights[0] - 0.5).abs() < 1e-9);
                assert!((weights[1] - 0.5).abs() < 1e-9);
            }
            _ => panic!("midpoint must be inside"),
        }
    }

    #[test]
    fn membership_outside_with_witness() {
        let bit = models::classical_simplex(2).unwrap();
        let m = membership(&[2.0, -1.0, 1.0], &bit).unwrap();
        match m {
            Membership::Outside { witness, margin } => {
                assert!(margin > 1e-9);
                for p in bit.pure_states() {
                    assert!(witness.dot(p) <= 1e-9, "witness must be <= 0 on vertices");
                }
            }
            _ => panic!("(2,-1) is outside the bit simplex"),
        }
    }

    #[test]
    fn membership_rejects_bad_input() {
        let bit = models::classical_simplex(2).unwrap();
        assert!(membership(&[1.0, 0.0], &bit).is_err());
        assert!(membership(&[1.0, 0.0, 2.0], &bit).is_err());
    }

    #[test]
    fn evaluate_effect_examples() {
        let bit = models::classical_simplex(2).unwrap();
        let s = State::new(vec![0.3, 0.7, 1.0], &bit).unwrap();
        let unit = Effect::unit(&bit);
        assert_eq!(evaluate_effect(&unit, &s).unwrap(), 1.0);
        let zero = Effect::zero(&bit);
        assert_eq!(evaluate_effect(&zero, &s).unwrap(), 0.0);
        let delta0 = Effect::new(vec![1.0, 0.0, 0.0], &bit).unwrap();
        assert!((evaluate_effect(&delta0, &s).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn measure_excludes_incomplete_family() {
        let bit = models::classical_simplex(2).unwrap();
        let delta0 = Effect::new(vec![1.0, 0.0, 0.0], &bit).unwrap();
        // {delta0, delta0} does not sum to iota
        let err = Measurement::new(vec![
            ("0".into(), delta0.clone()),
            ("0'".into(), delta0.clone()),
        ]);
        assert!(matches!(err, Err(Error::InvalidMeasurement(_))));
    }

    #[test]
    fn measure_bit_distribution() {
        let bit = models::classical_simplex(2).unwrap();
        let s = State::new(vec![0.3, 0.7, 1.0], &bit).unwrap();
        let m = models::fine_measurement(&bit).unwrap();
        let d = measure(&m, &s).unwrap();
        assert!((d.outcomes[0].1 - 0.3).abs() < 1e-12);
        assert!((d.outcomes[1].1 - 0.7).abs() < 1e-12);
        let single = Measurement::new(vec![("all".into(), Effect::unit(&bit))]).unwrap();
        let d1 = measure(&single, &s).unwrap();
        assert_eq!(d1.outcomes.len(), 1);
        assert!((d1.outcomes[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn effect_out_of_range_rejected() {
        let bit = models::classical_simplex(2).unwrap();
        // 2 * iota evaluates to 2 on every vertex
        assert!(Effect::new(vec![0.0, 0.0, 2.0], &bit).is_err());
    }

    #[test]
    fn validation_report_flags_bad_effect_and_measurement() {
        let tri = models::classical_simplex(3).unwrap();
        let rep = validate_space(&tri);
        assert!(rep.all_passed(), "{:?}", rep.checks);

        let bad = validate_effect(&[0.0, 0.0, 0.0, 2.0], &tri);
        assert!(!bad.all_passed());

        let delta0 = vec![1.0, 0.0, 0.0, 0.0];
        let rep = validate_measurement(&[delta0.clone(), delta0], &tri);
        assert!(!rep.all_passed());
        assert!(rep.checks.iter().any(|c| c.name == "sums-to-unit" && !c.passed));
    }

    #[test]
    fn redundant_vertex_rejected() {
        // A "triangle" with its own midpoint listed as a vertex.
        let err = StateSpace::new(
            "bad",
            2,
            vec![
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 1.0],
                vec![0.0, 1.0, 1.0],
                vec![0.5, 0.5, 1.0],
            ],
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![-1.0, -1.0, 1.0],
            ],
            SpaceOptions::default(),
        );
        assert!(matches!(err, Err(Error::InvalidSpace(_))), "{err:?}");
    }

    #[test]
    fn barycentric_roundtrip() {
        let tri = models::classical_simplex(3).unwrap();
        let s = State::from_barycentric(&[0.2, 0.3, 0.5], &tri).unwrap();
        match s.membership().unwrap() {
            Membership::Inside { weights } => {
                let mut recon = DVector::zeros(tri.hdim());
                for (w, p) in weights.iter().zip(tri.pure_states()) {
                    recon += p * *w;
                }
                assert!((recon - s.coords()).norm() < 1e-9);
            }
            _ => panic!("barycentric state must be inside"),
        }
    }
}
