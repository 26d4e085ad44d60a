//! Composite systems: product states, minimal-tensor mixtures, and
//! maximal-tensor bilinear tables, with marginals, no-signalling checks,
//! and the product-form detector the chain simulator relies on.
//!
//! A bipartite joint state is canonically a bilinear form `phi` on effect
//! pairs, stored as an `hA x hB` matrix in homogeneous coordinates:
//! `phi(e, f) = e' PHI f`, the unit pairing sits at the bottom-right
//! corner, and the marginals are the last column and last row.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models;
use crate::space::{Effect, State, StateSpace};

#[derive(Debug, Clone)]
pub struct ProductState {
    factors: Vec<State>,
}

impl ProductState {
    pub fn new(factors: Vec<State>) -> Result<ProductState> {
        if factors.len() < 2 {
            return Err(Error::InvalidComposite(
                "a product state needs at least two factors".into(),
            ));
        }
        Ok(ProductState { factors })
    }

    pub fn factors(&self) -> &[State] {
        &self.factors
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    /// Kronecker coordinates of the joint (row-major over factor pairs).
    pub fn kron_coords(&self) -> DVector<f64> {
        let mut acc: DVector<f64> = self.factors[0].coords().clone();
        for f in &self.factors[1..] {
            acc = kron_vec(&acc, f.coords());
        }
        acc
    }
}

/// `s (x) t` with the defining bilinear values `s(e) t(f)`.
pub fn product_state(s: &State, t: &State) -> Result<ProductState> {
    ProductState::new(vec![s.clone(), t.clone()])
}

#[derive(Debug, Clone)]
pub struct MinTensorState {
    components: Vec<(f64, ProductState)>,
}

impl MinTensorState {
    pub fn new(components: Vec<(f64, ProductState)>) -> Result<MinTensorState> {
        let Some((_, first)) = components.first() else {
            return Err(Error::InvalidComposite("empty mixture".into()));
        };
        let k = first.n_factors();
        let mut total = 0.0;
        for (w, p) in &components {
            if *w < -1e-12 {
                return Err(Error::InvalidComposite(format!("negative weight {w}")));
            }
            if p.n_factors() != k {
                return Err(Error::InvalidComposite(
                    "mixture components have different factor counts".into(),
                ));
            }
            for (i, f) in p.factors().iter().enumerate() {
                if !f.space().same_space(first.factors()[i].space()) {
                    return Err(Error::InvalidComposite(format!(
                        "component factor {i} lives on a different space"
                    )));
                }
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidComposite(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(MinTensorState { components })
    }

    pub fn components(&self) -> &[(f64, ProductState)] {
        &self.components
    }

    pub fn n_factors(&self) -> usize {
        self.components[0].1.n_factors()
    }

    pub fn factor_space(&self, i: usize) -> &Arc<StateSpace> {
        self.components[0].1.factors()[i].space()
    }
}

/// Bipartite joint state as a bilinear form over effect pairs.
#[derive(Debug, Clone)]
pub struct MaxTensorState {
    space_a: Arc<StateSpace>,
    space_b: Arc<StateSpace>,
    /// Raw joint values over ray pairs; kept verbatim for report-style
    /// checks even when slightly inconsistent.
    table: DMatrix<f64>,
    /// Bilinear form fitted to the table (exact for internal constructors).
    phi: DMatrix<f64>,
    /// Worst absolute deviation between `table` and the fitted form.
    fit_residual: f64,
}

impl MaxTensorState {
    /// From the canonical bilinear form.
    pub fn from_phi(
        space_a: &Arc<StateSpace>,
        space_b: &Arc<StateSpace>,
        phi: DMatrix<f64>,
    ) -> Result<MaxTensorState> {
        if phi.nrows() != space_a.hdim() || phi.ncols() != space_b.hdim() {
            return Err(Error::Dimension(format!(
                "phi must be {} x {}",
                space_a.hdim(),
                space_b.hdim()
            )));
        }
        let norm = phi[(space_a.dim(), space_b.dim())];
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidComposite(format!(
                "phi(iota, iota) = {norm}, expected 1"
            )));
        }
        let table = ray_table(space_a, space_b, &phi);
        Ok(MaxTensorState {
            space_a: Arc::clone(space_a),
            space_b: Arc::clone(space_b),
            table,
            phi,
            fit_residual: 0.0,
        })
    }

    /// From raw joint values over ray pairs. The bilinear form is fitted by
    /// least squares; `fit_residual` reports how consistent the table is.
    pub fn from_table(
        space_a: &Arc<StateSpace>,
        space_b: &Arc<StateSpace>,
        table: DMatrix<f64>,
    ) -> Result<MaxTensorState> {
        let (na, nb) = (space_a.n_rays(), space_b.n_rays());
        if table.nrows() != na || table.ncols() != nb {
            return Err(Error::Dimension(format!("table must be {na} x {nb}")));
        }
        let (ha, hb) = (space_a.hdim(), space_b.hdim());
        if na * nb > 1_000_000 || ha * hb > 400 {
            return Err(Error::InvalidComposite(
                "max-tensor tables are supported at desk scale only".into(),
            ));
        }
        // Least squares for vec(phi): design[(i,j),(p,q)] = rA[i][p] * rB[j][q].
        let mut design = DMatrix::zeros(na * nb, ha * hb);
        let mut rhs = DVector::zeros(na * nb);
        for i in 0..na {
            for j in 0..nb {
                let row = i * nb + j;
                rhs[row] = table[(i, j)];
                for p in 0..ha {
                    for q in 0..hb {
                        design[(row, p * hb + q)] =
                            space_a.effect_rays()[i][p] * space_b.effect_rays()[j][q];
                    }
                }
            }
        }
        let svd = design.svd(true, true);
        let sol = svd
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::InvalidComposite(format!("bilinear fit failed: {e}")))?;
        let phi = DMatrix::from_fn(ha, hb, |p, q| sol[p * hb + q]);
        let fitted = ray_table(space_a, space_b, &phi);
        let fit_residual = (&fitted - &table).abs().max();
        Ok(MaxTensorState {
            space_a: Arc::clone(space_a),
            space_b: Arc::clone(space_b),
            table,
            phi,
            fit_residual,
        })
    }

    pub fn space_a(&self) -> &Arc<StateSpace> {
        &self.space_a
    }

    pub fn space_b(&self) -> &Arc<StateSpace> {
        &self.space_b
    }

    pub fn table(&self) -> &DMatrix<f64> {
        &self.table
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn fit_residual(&self) -> f64 {
        self.fit_residual
    }

    /// phi(iota_A, iota_B); 1 for a normalized joint state.
    pub fn normalization(&self) -> f64 {
        self.phi[(self.space_a.dim(), self.space_b.dim())]
    }

    /// Positivity of the raw table: worst (most negative) entry.
    pub fn min_table_entry(&self) -> (f64, (usize, usize)) {
        let mut best = (f64::INFINITY, (0, 0));
        for i in 0..self.table.nrows() {
            for j in 0..self.table.ncols() {
                if self.table[(i, j)] < best.0 {
                    best = (self.table[(i, j)], (i, j));
                }
            }
        }
        best
    }
}

fn ray_table(a: &StateSpace, b: &StateSpace, phi: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.n_rays(), b.n_rays(), |i, j| {
        (a.effect_rays()[i].transpose() * phi * &b.effect_rays()[j])[(0, 0)]
    })
}

#[derive(Debug, Clone)]
pub enum CompositeState {
    Product(ProductState),
    MinMixture(MinTensorState),
    MaxTable(MaxTensorState),
}

impl CompositeState {
    pub fn n_factors(&self) -> usize {
        match self {
            CompositeState::Product(p) => p.n_factors(),
            CompositeState::MinMixture(m) => m.n_factors(),
            CompositeState::MaxTable(_) => 2,
        }
    }
}

/// Bipartite phi matrix of a composite (bipartite composites only).
fn phi_of(c: &CompositeState) -> Result<DMatrix<f64>> {
    match c {
        CompositeState::Product(p) => {
            if p.n_factors() != 2 {
                return Err(Error::InvalidComposite(
                    "bipartite operation on a multipartite product".into(),
                ));
            }
            Ok(p.factors()[0].coords() * p.factors()[1].coords().transpose())
        }
        CompositeState::MinMixture(m) => {
            if m.n_factors() != 2 {
                return Err(Error::InvalidComposite(
                    "bipartite operation on a multipartite mixture".into(),
                ));
            }
            let ha = m.factor_space(0).hdim();
            let hb = m.factor_space(1).hdim();
            let mut phi = DMatrix::zeros(ha, hb);
            for (w, p) in m.components() {
                phi += p.factors()[0].coords() * p.factors()[1].coords().transpose() * *w;
            }
            Ok(phi)
        }
        CompositeState::MaxTable(t) => Ok(t.phi.clone()),
    }
}

fn factor_spaces(c: &CompositeState) -> Vec<Arc<StateSpace>> {
    match c {
        CompositeState::Product(p) => p.factors().iter().map(|f| Arc::clone(f.space())).collect(),
        CompositeState::MinMixture(m) => (0..m.n_factors())
            .map(|i| Arc::clone(m.factor_space(i)))
            .collect(),
        CompositeState::MaxTable(t) => vec![Arc::clone(&t.space_a), Arc::clone(&t.space_b)],
    }
}

/// Joint outcome probability for a pair of effects on a bipartite composite.
pub fn joint_probability(c: &CompositeState, e_a: &Effect, e_b: &Effect) -> Result<f64> {
    let spaces = factor_spaces(c);
    if spaces.len() != 2 {
        return Err(Error::InvalidComposite(
            "joint_probability takes a bipartite composite".into(),
        ));
    }
    if !e_a.space().same_space(&spaces[0]) || !e_b.space().same_space(&spaces[1]) {
        return Err(Error::SpaceMismatch(
            "effects do not match the composite's factor spaces".into(),
        ));
    }
    if let CompositeState::MaxTable(t) = c {
        if t.fit_residual > 1e-7 {
            return Err(Error::InvalidComposite(format!(
                "table is not bilinear (residual {:.3e}); raw-table checks only",
                t.fit_residual
            )));
        }
    }
    let phi = phi_of(c)?;
    let val = (e_a.functional().transpose() * phi * e_b.functional())[(0, 0)];
    let tol = spaces[0].tol().max(spaces[1].tol());
    if val < -tol || val > 1.0 + tol {
        return Err(Error::InvalidComposite(format!(
            "joint probability {val:.6} outside [0, 1]: not a valid joint state"
        )));
    }
    Ok(val.clamp(0.0, 1.0))
}

/// Marginal state on the chosen subsystem.
pub fn marginal(c: &CompositeState, which: usize) -> Result<State> {
    match c {
        CompositeState::Product(p) => {
            p.factors().get(which).cloned().ok_or_else(|| {
                Error::InvalidComposite(format!("no factor {which}"))
            })
        }
        CompositeState::MinMixture(m) => {
            if which >= m.n_factors() {
                return Err(Error::InvalidComposite(format!("no factor {which}")));
            }
            let space = Arc::clone(m.factor_space(which));
            let mut coords = DVector::zeros(space.hdim());
            for (w, p) in m.components() {
                coords += p.factors()[which].coords() * *w;
            }
            State::new(coords.iter().copied().collect(), &space).map_err(|e| {
                Error::InvalidComposite(format!("marginal fails membership: {e}"))
            })
        }
        CompositeState::MaxTable(t) => {
            let (space, coords): (&Arc<StateSpace>, DVector<f64>) = match which {
                0 => (&t.space_a, t.phi.column(t.space_b.dim()).into_owned()),
                1 => (&t.space_b, t.phi.row(t.space_a.dim()).transpose()),
                _ => return Err(Error::InvalidComposite(format!("no factor {which}"))),
            };
            State::new(coords.iter().copied().collect(), space).map_err(|e| {
                Error::InvalidComposite(format!(
                    "marginal fails membership: composite is not a valid joint state ({e})"
                ))
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoSignallingReport {
    pub max_deviation: f64,
    pub passed: bool,
    pub detail: String,
}

/// No-signalling over the canonical measurement families: for every pair
/// of complete measurements on one side and every effect ray on the
/// other, the summed joint values must agree.
pub fn check_no_signalling(c: &CompositeState, tol: f64) -> Result<NoSignallingReport> {
    let max = match c {
        CompositeState::MaxTable(t) => t.clone(),
        other => to_max_tensor(other)?,
    };
    let fams_a = models::measurement_families(&max.space_a);
    let fams_b = models::measurement_families(&max.space_b);

    let mut worst = 0.0f64;
    let mut detail = String::from("no deviation");

    // side A varies, side B effect fixed
    let weights_a: Vec<Vec<f64>> = fams_a
        .iter()
        .map(|f| f.total_weights(max.space_a.n_rays()))
        .collect();
    for j in 0..max.space_b.n_rays() {
        let sums: Vec<f64> = weights_a
            .iter()
            .map(|w| {
                (0..max.space_a.n_rays())
                    .map(|i| w[i] * max.table[(i, j)])
                    .sum()
            })
            .collect();
        let (lo, hi) = min_max(&sums);
        if hi - lo > worst {
            worst = hi - lo;
            detail = format!("A-side measurements disagree on B ray {j} by {:.3e}", hi - lo);
        }
    }
    // side B varies, side A effect fixed
    let weights_b: Vec<Vec<f64>> = fams_b
        .iter()
        .map(|f| f.total_weights(max.space_b.n_rays()))
        .collect();
    for i in 0..max.space_a.n_rays() {
        let sums: Vec<f64> = weights_b
            .iter()
            .map(|w| {
                (0..max.space_b.n_rays())
                    .map(|j| w[j] * max.table[(i, j)])
                    .sum()
            })
            .collect();
        let (lo, hi) = min_max(&sums);
        if hi - lo > worst {
            worst = hi - lo;
            detail = format!("B-side measurements disagree on A ray {i} by {:.3e}", hi - lo);
        }
    }
    Ok(NoSignallingReport {
        max_deviation: worst,
        passed: worst <= tol,
        detail,
    })
}

fn min_max(vals: &[f64]) -> (f64, f64) {
    vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

/// Exact conversion of a bipartite product/mixture into its bilinear table.
pub fn to_max_tensor(c: &CompositeState) -> Result<MaxTensorState> {
    let spaces = factor_spaces(c);
    if spaces.len() != 2 {
        return Err(Error::InvalidComposite(
            "max-tensor conversion takes a bipartite composite".into(),
        ));
    }
    MaxTensorState::from_phi(&spaces[0], &spaces[1], phi_of(c)?)
}

#[derive(Debug, Clone)]
pub enum ProductForm {
    /// Factor states recovered from the marginals, in order.
    Product(Vec<State>),
    NotProduct {
        max_deviation: f64,
        /// Ray-pair index of the worst deviation at the failing cut.
        at: (usize, usize),
    },
}

impl ProductForm {
    pub fn deviation(&self) -> f64 {
        match self {
            ProductForm::Product(_) => 0.0,
            ProductForm::NotProduct { max_deviation, .. } => *max_deviation,
        }
    }
}

/// Does the joint equal the outer product of its marginals? Multipartite
/// composites are tested pairwise-recursively on first-vs-rest cuts.
pub fn is_product_form(c: &CompositeState, tol: f64) -> Result<ProductForm> {
    match c {
        CompositeState::Product(p) => Ok(ProductForm::Product(p.factors().to_vec())),
        CompositeState::MaxTable(t) => {
            let phi = &t.phi;
            let a = marginal(c, 0)?;
            let b = marginal(c, 1)?;
            match cut_deviation(phi, &a, &b, &t.space_a, &t.space_b) {
                (dev, _) if dev <= tol => Ok(ProductForm::Product(vec![a, b])),
                (dev, at) => Ok(ProductForm::NotProduct {
                    max_deviation: dev,
                    at,
                }),
            }
        }
        CompositeState::MinMixture(m) => product_form_min(m, tol),
    }
}

fn product_form_min(m: &MinTensorState, tol: f64) -> Result<ProductForm> {
    let k = m.n_factors();
    // first-vs-rest cut: phi over (space 0) x (kron of the rest)
    let space0 = Arc::clone(m.factor_space(0));
    let h0 = space0.hdim();
    let rest_h: usize = (1..k).map(|i| m.factor_space(i).hdim()).product();
    let mut phi = DMatrix::zeros(h0, rest_h);
    for (w, p) in m.components() {
        let mut rest: DVector<f64> = p.factors()[1].coords().clone();
        for f in &p.factors()[2..] {
            rest = kron_vec(&rest, f.coords());
        }
        phi += p.factors()[0].coords() * rest.transpose() * *w;
    }
    let marg0 = marginal(&CompositeState::MinMixture(m.clone()), 0)?;
    let rest_marg: DVector<f64> = {
        let mut acc = DVector::zeros(rest_h);
        for (w, p) in m.components() {
            let mut rest: DVector<f64> = p.factors()[1].coords().clone();
            for f in &p.factors()[2..] {
                rest = kron_vec(&rest, f.coords());
            }
            acc += rest * *w;
        }
        acc
    };
    // deviation over ray pairs: rays of factor 0 against products of rest rays
    let delta = &phi - marg0.coords() * rest_marg.transpose();
    let rest_rays = kron_rays(&(1..k).map(|i| Arc::clone(m.factor_space(i))).collect::<Vec<_>>());
    let mut dev = 0.0f64;
    let mut at = (0, 0);
    for (i, r) in space0.effect_rays().iter().enumerate() {
        let left = r.transpose() * &delta;
        for (j, q) in rest_rays.iter().enumerate() {
            let v = (&left * q)[(0, 0)].abs();
            if v > dev {
                dev = v;
                at = (i, j);
            }
        }
    }
    if dev > tol {
        return Ok(ProductForm::NotProduct {
            max_deviation: dev,
            at,
        });
    }
    if k == 2 {
        let marg1 = marginal(&CompositeState::MinMixture(m.clone()), 1)?;
        return Ok(ProductForm::Product(vec![marg0, marg1]));
    }
    // recurse on the rest
    let rest_min = MinTensorState::new(
        m.components()
            .iter()
            .map(|(w, p)| {
                Ok((*w, ProductState::new(p.factors()[1..].to_vec())?))
            })
            .collect::<Result<Vec<_>>>()?,
    )?;
    match product_form_min(&rest_min, tol)? {
        ProductForm::Product(mut rest_factors) => {
            let mut out = vec![marg0];
            out.append(&mut rest_factors);
            Ok(ProductForm::Product(out))
        }
        not => Ok(not),
    }
}

fn cut_deviation(
    phi: &DMatrix<f64>,
    a: &State,
    b: &State,
    sa: &StateSpace,
    sb: &StateSpace,
) -> (f64, (usize, usize)) {
    let delta = phi - a.coords() * b.coords().transpose();
    let mut dev = 0.0f64;
    let mut at = (0, 0);
    for (i, r) in sa.effect_rays().iter().enumerate() {
        let left = r.transpose() * &delta;
        for (j, q) in sb.effect_rays().iter().enumerate() {
            let v = (&left * q)[(0, 0)].abs();
            if v > dev {
                dev = v;
                at = (i, j);
            }
        }
    }
    (dev, at)
}

fn kron_vec(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i * b.len() + j] = a[i] * b[j];
        }
    }
    out
}

fn kron_rays(spaces: &[Arc<StateSpace>]) -> Vec<DVector<f64>> {
    let mut acc: Vec<DVector<f64>> = spaces[0].effect_rays().to_vec();
    for s in &spaces[1..] {
        let mut next = Vec::with_capacity(acc.len() * s.n_rays());
        for a in &acc {
            for r in s.effect_rays() {
                next.push(kron_vec(a, r));
            }
        }
        acc = next;
    }
    acc
}

/// Embed factor states into a Kronecker product space.
pub fn embed_kron(factors: &[&State], product: &Arc<StateSpace>) -> Result<State> {
    let mut acc: DVector<f64> = factors
        .first()
        .ok_or_else(|| Error::InvalidComposite("no factors".into()))?
        .coords()
        .clone();
    for f in &factors[1..] {
        acc = kron_vec(&acc, f.coords());
    }
    if acc.len() != product.hdim() {
        return Err(Error::Dimension(format!(
            "embedded length {} but product space has homogeneous dimension {}",
            acc.len(),
            product.hdim()
        )));
    }
    Ok(State::from_parts_unchecked(acc, Arc::clone(product)))
}

/// Embed classical factor states into the flat joint simplex (coordinates
/// are the joint distribution, index = row-major over factors).
pub fn embed_flat_classical(factors: &[&State], flat: &Arc<StateSpace>) -> Result<State> {
    let dims: Vec<usize> = factors.iter().map(|f| f.space().dim()).collect();
    let total: usize = dims.iter().product();
    if flat.dim() != total {
        return Err(Error::Dimension(format!(
            "flat simplex has dimension {}, factors give {total}",
            flat.dim()
        )));
    }
    let mut joint = vec![1.0f64];
    for (f, &d) in factors.iter().zip(&dims) {
        let mut next = Vec::with_capacity(joint.len() * d);
        for &v in &joint {
            for i in 0..d {
                next.push(v * f.coords()[i]);
            }
        }
        joint = next;
    }
    joint.push(1.0);
    Ok(State::from_parts_unchecked(
        DVector::from_vec(joint),
        Arc::clone(flat),
    ))
}

/// Split a flat-classical bipartite state into marginals and report the
/// worst coordinate deviation from their outer product.
pub fn split_flat_pair(
    joint: &State,
    sys: &Arc<StateSpace>,
    app: &Arc<StateSpace>,
) -> Result<(State, State, f64)> {
    let n = sys.dim();
    let m = app.dim();
    if joint.space().dim() != n * m {
        return Err(Error::Dimension(format!(
            "joint lives on dimension {}, expected {}",
            joint.space().dim(),
            n * m
        )));
    }
    let p = joint.coords();
    let mut ms = vec![0.0; n];
    let mut ma = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            ms[i] += p[i * m + j];
            ma[j] += p[i * m + j];
        }
    }
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..m {
            dev = dev.max((p[i * m + j] - ms[i] * ma[j]).abs());
        }
    }
    ms.push(1.0);
    ma.push(1.0);
    Ok((State::new(ms, sys)?, State::new(ma, app)?, dev))
}

/// Split a Kronecker bipartite state into marginals plus the worst
/// ray-pair deviation from their outer product.
pub fn split_kron_pair(
    joint: &State,
    sa: &Arc<StateSpace>,
    sb: &Arc<StateSpace>,
) -> Result<(State, State, f64)> {
    let (ha, hb) = (sa.hdim(), sb.hdim());
    if joint.coords().len() != ha * hb {
        return Err(Error::Dimension(format!(
            "joint length {} but factors give {}",
            joint.coords().len(),
            ha * hb
        )));
    }
    let phi = DMatrix::from_fn(ha, hb, |i, j| joint.coords()[i * hb + j]);
    let a = State::new(
        phi.column(sb.dim()).iter().copied().collect(),
        sa,
    )?;
    let b = State::new(
        phi.row(sa.dim()).iter().copied().collect(),
        sb,
    )?;
    let (dev, _) = cut_deviation(&phi, &a, &b, sa, sb);
    Ok((a, b, dev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::space::evaluate_effect;

    fn bit_vertex(i: usize) -> State {
        let bit = models::classical_simplex(2).unwrap();
        State::vertex(&bit, i)
    }

    #[test]
    fn product_state_joint_values() {
        let bit = models::classical_simplex(2).unwrap();
        let d0 = State::vertex(&bit, 0);
        let d1 = State::vertex(&bit, 1);
        let p = CompositeState::Product(product_state(&d0, &d1).unwrap());
        let e0 = Effect::new(vec![1.0, 0.0, 0.0], &bit).unwrap();
        let e1 = Effect::new(vec![0.0, 1.0, 0.0], &bit).unwrap();
        // concentrated on (0, 1)
        assert!((joint_probability(&p, &e0, &e1).unwrap() - 1.0).abs() < 1e-12);
        assert!(joint_probability(&p, &e0, &e0).unwrap() < 1e-12);
        // normalization at (iota, iota)
        let unit = Effect::unit(&bit);
        assert!((joint_probability(&p, &unit, &unit).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlated_mixture_joint_and_marginals() {
        let bit = models::classical_simplex(2).unwrap();
        let d0 = bit_vertex(0);
        let d1 = bit_vertex(1);
        let mix = MinTensorState::new(vec![
            (0.5, product_state(&d0, &d0).unwrap()),
            (0.5, product_state(&d1, &d1).unwrap()),
        ])
        .unwrap();
        let c = CompositeState::MinMixture(mix);
        let e0 = Effect::new(vec![1.0, 0.0, 0.0], &bit).unwrap();
        let e1 = Effect::new(vec![0.0, 1.0, 0.0], &bit).unwrap();
        assert!(joint_probability(&c, &e0, &e1).unwrap() < 1e-12);
        for which in 0..2 {
            let m = marginal(&c, which).unwrap();
            assert!((m.coords()[0] - 0.5).abs() < 1e-12);
            assert!((m.coords()[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn product_marginal_is_the_factor() {
        let bit = models::classical_simplex(2).unwrap();
        let s = State::new(vec![0.3, 0.7, 1.0], &bit).unwrap();
        let t = State::new(vec![0.9, 0.1, 1.0], &bit).unwrap();
        let p = CompositeState::Product(product_state(&s, &t).unwrap());
        assert!(marginal(&p, 0).unwrap().coords_eq(&s));
        assert!(marginal(&p, 1).unwrap().coords_eq(&t));
    }

    #[test]
    fn outer_product_table_for_mixed_factors() {
        let g = models::gbit().unwrap();
        let tri = models::classical_simplex(3).unwrap();
        let corner = State::vertex(&g, 0);
        let v2 = State::vertex(&tri, 2);
        let c = CompositeState::Product(product_state(&corner, &v2).unwrap());
        let max = to_max_tensor(&c).unwrap();
        for (i, r) in g.effect_rays().iter().enumerate() {
            for (j, q) in tri.effect_rays().iter().enumerate() {
                let ra = Effect::from_parts_unchecked(r.clone(), Arc::clone(&g));
                let qb = Effect::from_parts_unchecked(q.clone(), Arc::clone(&tri));
                let lhs = max.table()[(i, j)];
                let rhs = evaluate_effect(&ra, &corner).unwrap()
                    * evaluate_effect(&qb, &v2).unwrap();
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn no_signalling_passes_for_products_and_mixtures() {
        let g = models::gbit().unwrap();
        let a = State::new(vec![0.3, -0.2, 1.0], &g).unwrap();
        let b = State::new(vec![-0.5, 0.4, 1.0], &g).unwrap();
        let p = CompositeState::Product(product_state(&a, &b).unwrap());
        let rep = check_no_signalling(&p, 1e-9).unwrap();
        assert!(rep.passed, "{}", rep.detail);

        let mix = MinTensorState::new(vec![
            (0.25, product_state(&a, &b).unwrap()),
            (0.75, product_state(&b, &a).unwrap()),
        ])
        .unwrap();
        let rep = check_no_signalling(&CompositeState::MinMixture(mix), 1e-9).unwrap();
        assert!(rep.passed, "{}", rep.detail);
    }

    #[test]
    fn corrupted_table_fails_no_signalling() {
        let g = models::gbit().unwrap();
        let pr = models::pr_box(&g).unwrap();
        let mut table = pr.table().clone();
        table[(0, 0)] += 0.1;
        let corrupted = MaxTensorState::from_table(&g, &g, table).unwrap();
        let rep = check_no_signalling(&CompositeState::MaxTable(corrupted), 1e-9).unwrap();
        assert!(!rep.passed);
        assert!(
            (rep.max_deviation - 0.1).abs() < 1e-9,
            "deviation {} should be ~0.1",
            rep.max_deviation
        );
    }

    #[test]
    fn pr_box_positive_no_signalling_not_product() {
        let g = models::gbit().unwrap();
        let pr = models::pr_box(&g).unwrap();
        let (min_entry, _) = pr.min_table_entry();
        assert!(min_entry >= -1e-12, "PR table entry {min_entry}");
        assert!((pr.normalization() - 1.0).abs() < 1e-12);
        let c = CompositeState::MaxTable(pr);
        let rep = check_no_signalling(&c, 1e-9).unwrap();
        assert!(rep.passed, "{}", rep.detail);
        // marginals are the gbit center
        let m = marginal(&c, 0).unwrap();
        assert!(m.coords()[0].abs() < 1e-12 && m.coords()[1].abs() < 1e-12);
        match is_product_form(&c, 1e-9).unwrap() {
            ProductForm::NotProduct { max_deviation, .. } => {
                assert!((max_deviation - 0.25).abs() < 1e-9, "dev {max_deviation}");
            }
            _ => panic!("PR box is not a product state"),
        }
    }

    #[test]
    fn correlated_mixture_is_not_product_deviation_quarter() {
        let bit = models::classical_simplex(2).unwrap();
        let d0 = State::vertex(&bit, 0);
        let d1 = State::vertex(&bit, 1);
        let mix = MinTensorState::new(vec![
            (0.5, product_state(&d0, &d0).unwrap()),
            (0.5, product_state(&d1, &d1).unwrap()),
        ])
        .unwrap();
        match is_product_form(&CompositeState::MinMixture(mix), 1e-9).unwrap() {
            ProductForm::NotProduct { max_deviation, at } => {
                assert!((max_deviation - 0.25).abs() < 1e-12);
                // worst deviation at a (delta_i, delta_j) ray pair
                assert!(at.0 < 2 && at.1 < 2);
            }
            _ => panic!("correlated mixture is not product"),
        }
    }

    #[test]
    fn three_factor_recursive_factorization() {
        let bit = models::classical_simplex(2).unwrap();
        let tri = models::classical_simplex(3).unwrap();
        let s = State::new(vec![0.3, 0.7, 1.0], &bit).unwrap();
        let t = State::new(vec![0.2, 0.5, 0.3, 1.0], &tri).unwrap();
        let u = State::new(vec![0.9, 0.1, 1.0], &bit).unwrap();
        let p = ProductState::new(vec![s.clone(), t.clone(), u.clone()]).unwrap();
        // as a single-component mixture (exercises the recursive path)
        let min = MinTensorState::new(vec![(1.0, p)]).unwrap();
        match is_product_form(&CompositeState::MinMixture(min), 1e-9).unwrap() {
            ProductForm::Product(factors) => {
                assert_eq!(factors.len(), 3);
                assert!(factors[0].coord_distance(&s) < 1e-9);
                assert!(factors[1].coord_distance(&t) < 1e-9);
                assert!(factors[2].coord_distance(&u) < 1e-9);
            }
            ProductForm::NotProduct { max_deviation, .. } => {
                panic!("product of three factors reported non-product ({max_deviation})")
            }
        }
    }

    #[test]
    fn flat_embedding_roundtrip() {
        let bit = models::classical_simplex(2).unwrap();
        let tri = models::classical_simplex(3).unwrap();
        let flat = models::classical_simplex(6).unwrap();
        let s = State::new(vec![0.3, 0.7, 1.0], &bit).unwrap();
        let t = State::new(vec![0.2, 0.5, 0.3, 1.0], &tri).unwrap();
        let joint = embed_flat_classical(&[&s, &t], &flat).unwrap();
        let (ms, mt, dev) = split_flat_pair(&joint, &bit, &tri).unwrap();
        assert!(dev < 1e-12);
        assert!(ms.coord_distance(&s) < 1e-12);
        assert!(mt.coord_distance(&t) < 1e-12);
    }

    #[test]
    fn kron_embedding_roundtrip() {
        let g = models::gbit().unwrap();
        let bit = models::classical_simplex(2).unwrap();
        let p = models::product_space(&g, &bit).unwrap();
        let a = State::new(vec![0.3, -0.4, 1.0], &g).unwrap();
        let b = State::new(vec![0.8, 0.2, 1.0], &bit).unwrap();
        let joint = embed_kron(&[&a, &b], &p).unwrap();
        let (ma, mb, dev) = split_kron_pair(&joint, &g, &bit).unwrap();
        assert!(dev < 1e-12);
        assert!(ma.coord_distance(&a) < 1e-12);
        assert!(mb.coord_distance(&b) < 1e-12);
    }
}
