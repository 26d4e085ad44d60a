//! Affine dynamics between state spaces, with certified invertibility.
//!
//! A transformation is an affine map in homogeneous coordinates (bottom
//! row pinned to (0, ..., 0, 1)). Invertibility in the operational sense
//! is a bijection of the state sets; affinity reduces the check to exact
//! matrix inversion plus vertex-image membership both ways.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::space::{Family, State, StateSpace};

/// Refuse certificates when the linear part is worse conditioned than this.
pub const DEFAULT_CONDITION_CAP: f64 = 1e8;

#[derive(Clone)]
pub struct Transformation {
    label: String,
    matrix: DMatrix<f64>,
    domain: Arc<StateSpace>,
    codomain: Arc<StateSpace>,
}

impl std::fmt::Debug for Transformation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Transformation({}: {} -> {})",
            self.label,
            self.domain.label(),
            self.codomain.label()
        )
    }
}

impl Transformation {
    pub fn new(
        label: impl Into<String>,
        rows: Vec<Vec<f64>>,
        domain: &Arc<StateSpace>,
        codomain: &Arc<StateSpace>,
    ) -> Result<Transformation> {
        let hd = domain.hdim();
        let hc = codomain.hdim();
        if rows.len() != hc || rows.iter().any(|r| r.len() != hd) {
            return Err(Error::Dimension(format!(
                "matrix must be {hc} x {hd} for these spaces"
            )));
        }
        let matrix = DMatrix::from_fn(hc, hd, |i, j| rows[i][j]);
        let bottom_ok = (0..hd - 1).all(|j| matrix[(hc - 1, j)].abs() <= 1e-12)
            && (matrix[(hc - 1, hd - 1)] - 1.0).abs() <= 1e-12;
        if !bottom_ok {
            return Err(Error::InvalidTransformation(
                "bottom row must be (0, ..., 0, 1); the map is not affine".into(),
            ));
        }
        Ok(Transformation {
            label: label.into(),
            matrix,
            domain: Arc::clone(domain),
            codomain: Arc::clone(codomain),
        })
    }

    pub fn identity(space: &Arc<StateSpace>) -> Transformation {
        Transformation {
            label: "identity".into(),
            matrix: DMatrix::identity(space.hdim(), space.hdim()),
            domain: Arc::clone(space),
            codomain: Arc::clone(space),
        }
    }

    /// Endomorphism sending vertex `i` to vertex `perm[i]`.
    ///
    /// For classical simplices this is the coordinate permutation matrix.
    /// For other polytopes the matrix is solved from the vertex images,
    /// which requires the vertices to span the homogeneous space.
    pub fn from_vertex_permutation(
        label: impl Into<String>,
        space: &Arc<StateSpace>,
        perm: &[usize],
    ) -> Result<Transformation> {
        let nv = space.n_vertices();
        if perm.len() != nv {
            return Err(Error::InvalidTransformation(format!(
                "permutation has {} entries for {} vertices",
                perm.len(),
                nv
            )));
        }
        let mut seen = vec![false; nv];
        for &p in perm {
            if p >= nv || seen[p] {
                return Err(Error::InvalidTransformation(
                    "permutation is not a bijection of vertex indices".into(),
                ));
            }
            seen[p] = true;
        }
        let h = space.hdim();
        let matrix = if let Family::Simplex { n } = space.family() {
            let mut m = DMatrix::zeros(h, h);
            for i in 0..n {
                m[(perm[i], i)] = 1.0;
            }
            m[(n, n)] = 1.0;
            m
        } else {
            // Solve M * V = V_perm; vertices must span.
            let v = DMatrix::from_fn(h, nv, |r, c| space.pure_states()[c][r]);
            let vp = DMatrix::from_fn(h, nv, |r, c| space.pure_states()[perm[c]][r]);
            let vt_svd = v.transpose().svd(true, true);
            if vt_svd.rank(1e-10) < h {
                return Err(Error::InvalidTransformation(
                    "vertices do not span; supply the matrix explicitly".into(),
                ));
            }
            let mt = vt_svd
                .solve(&vp.transpose(), 1e-12)
                .map_err(|e| Error::InvalidTransformation(e.to_string()))?;
            let m = mt.transpose();
            // vertex images must reproduce exactly-ish
            let resid = (&m * &v - &vp).abs().max();
            if resid > 1e-8 {
                return Err(Error::InvalidTransformation(format!(
                    "no affine map realizes this vertex permutation (residual {resid:.3e})"
                )));
            }
            m
        };
        Transformation::new(label, matrix_rows(&matrix), space, space)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn domain(&self) -> &Arc<StateSpace> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<StateSpace> {
        &self.codomain
    }

    /// Apply to a state; the image must pass membership in the codomain.
    pub fn apply(&self, s: &State) -> Result<State> {
        if !s.space().same_space(&self.domain) {
            return Err(Error::SpaceMismatch(format!(
                "state lives on {}, transformation domain is {}",
                s.space().label(),
                self.domain.label()
            )));
        }
        let image: DVector<f64> = &self.matrix * s.coords();
        State::new(image.iter().copied().collect(), &self.codomain).map_err(|_| {
            Error::InvalidTransformation(format!(
                "image of state leaves the codomain {}",
                self.codomain.label()
            ))
        })
    }

    /// `other` after `self` (apply `self` first).
    pub fn then(&self, other: &Transformation) -> Result<Transformation> {
        if !self.codomain.same_space(&other.domain) {
            return Err(Error::SpaceMismatch(format!(
                "cannot compose: {} ends on {}, next starts on {}",
                self.label,
                self.codomain.label(),
                other.domain.label()
            )));
        }
        Ok(Transformation {
            label: format!("{};{}", self.label, other.label),
            matrix: &other.matrix * &self.matrix,
            domain: Arc::clone(&self.domain),
            codomain: Arc::clone(&other.codomain),
        })
    }

    /// `self` composed j times (domain must equal codomain).
    pub fn power(&self, j: usize) -> Result<Transformation> {
        if !self.domain.same_space(&self.codomain) {
            return Err(Error::SpaceMismatch("power of a non-endomorphism".into()));
        }
        let mut out = Transformation::identity(&self.domain);
        for _ in 0..j {
            out = out.then(self)?;
        }
        Ok(out)
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[derive(Debug, Clone)]
pub struct InvertibilityCertificate {
    pub inverse: Transformation,
    pub max_roundtrip_error: f64,
    /// Every codomain pure state has a preimage inside the domain.
    pub surjectivity_witness: bool,
    pub condition_number: f64,
}

#[derive(Debug, Clone)]
pub struct Refutation {
    pub reason: String,
    /// Vertex index at fault, when the failure is localized.
    pub vertex: Option<usize>,
}

#[derive(Debug, Clone)]
pub enum InvertibilityOutcome {
    Certified(InvertibilityCertificate),
    Refuted(Refutation),
}

impl InvertibilityOutcome {
    pub fn certificate(self) -> Result<InvertibilityCertificate> {
        match self {
            InvertibilityOutcome::Certified(c) => Ok(c),
            InvertibilityOutcome::Refuted(r) => Err(Error::NotInvertible(r.reason)),
        }
    }
}

/// Certify that `t` is a bijection of its domain onto its codomain, or
/// refute with the failing vertex / singularity.
pub fn verify_invertible(t: &Transformation, tol: f64) -> Result<InvertibilityOutcome> {
    if t.domain().dim() != t.codomain().dim() {
        return Err(Error::Dimension(
            "invertibility needs equal domain and codomain dimensions".into(),
        ));
    }
    let d = t.domain().dim();

    // Forward images of domain vertices must land in the codomain.
    for (i, p) in t.domain().pure_states().iter().enumerate() {
        let img: DVector<f64> = t.matrix() * p;
        let coords: Vec<f64> = img.iter().copied().collect();
        match crate::space::membership(&coords, t.codomain()) {
            Ok(m) if m.is_inside() => {}
            Ok(_) => {
                return Ok(InvertibilityOutcome::Refuted(Refutation {
                    reason: format!("image of domain vertex {i} falls outside the codomain"),
                    vertex: Some(i),
                }))
            }
            Err(e) => return Err(e),
        }
    }

    // Linear part conditioning.
    let linear = t.matrix().view((0, 0), (d, d)).into_owned();
    let sv = linear.svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin <= 0.0 || !smin.is_finite() {
        return Ok(InvertibilityOutcome::Refuted(Refutation {
            reason: "linear part is singular".into(),
            vertex: None,
        }));
    }
    let condition = smax / smin;
    if condition > DEFAULT_CONDITION_CAP {
        return Ok(InvertibilityOutcome::Refuted(Refutation {
            reason: format!(
                "linear part condition number {condition:.3e} exceeds the cap {DEFAULT_CONDITION_CAP:.1e}"
            ),
            vertex: None,
        }));
    }

    let Some(inv) = t.matrix().clone().try_inverse() else {
        return Ok(InvertibilityOutcome::Refuted(Refutation {
            reason: "matrix inversion failed".into(),
            vertex: None,
        }));
    };

    // Surjectivity: codomain vertices must have preimages inside the domain.
    for (i, q) in t.codomain().pure_states().iter().enumerate() {
        let pre: DVector<f64> = &inv * q;
        let coords: Vec<f64> = pre.iter().copied().collect();
        match crate::space::membership(&coords, t.domain()) {
            Ok(m) if m.is_inside() => {}
            Ok(_) => {
                return Ok(InvertibilityOutcome::Refuted(Refutation {
                    reason: format!("codomain vertex {i} has no preimage in the domain"),
                    vertex: Some(i),
                }))
            }
            Err(e) => return Err(e),
        }
    }

    // Roundtrip errors on vertices, both directions.
    let mut err = 0.0f64;
    for p in t.domain().pure_states() {
        let back: DVector<f64> = &inv * (t.matrix() * p);
        err = err.max((back - p).abs().max());
    }
    for q in t.codomain().pure_states() {
        let fwd: DVector<f64> = t.matrix() * (&inv * q);
        err = err.max((fwd - q).abs().max());
    }
    if err > tol {
        return Ok(InvertibilityOutcome::Refuted(Refutation {
            reason: format!("roundtrip error {err:.3e} exceeds tolerance {tol:.1e}"),
            vertex: None,
        }));
    }

    let inverse = Transformation {
        label: format!("{}^-1", t.label()),
        matrix: inv,
        domain: Arc::clone(t.codomain()),
        codomain: Arc::clone(t.domain()),
    };
    Ok(InvertibilityOutcome::Certified(InvertibilityCertificate {
        inverse,
        max_roundtrip_error: err,
        surjectivity_witness: true,
        condition_number: condition,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::space::DEFAULT_TOL;

    #[test]
    fn identity_applies() {
        let bit = models::classical_simplex(2).unwrap();
        let s = State::new(vec![0.3, 0.7, 1.0], &bit).unwrap();
        let id = Transformation::identity(&bit);
        let out = id.apply(&s).unwrap();
        assert!(out.coords_eq(&s));
    }

    #[test]
    fn bit_swap_permutation() {
        let bit = models::classical_simplex(2).unwrap();
        let swap = Transformation::from_vertex_permutation("swap", &bit, &[1, 0]).unwrap();
        let s = State::new(vec![0.3, 0.7, 1.0], &bit).unwrap();
        let out = swap.apply(&s).unwrap();
        assert!((out.coords()[0] - 0.7).abs() < 1e-12);
        assert!((out.coords()[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn cnot_on_four_point_space() {
        // flat (s, a) index = 2 s + a; CNOT: (s, a) -> (s, a xor s)
        let four = models::classical_simplex(4).unwrap();
        let cnot =
            Transformation::from_vertex_permutation("cnot", &four, &[0, 1, 3, 2]).unwrap();
        let s10 = State::vertex(&four, 2); // (s=1, a=0)
        let out = cnot.apply(&s10).unwrap();
        assert!(out.coords_eq(&State::vertex(&four, 3))); // (s=1, a=1)
    }

    #[test]
    fn permutations_certify_with_zero_roundtrip() {
        let tri = models::classical_simplex(3).unwrap();
        let rot = Transformation::from_vertex_permutation("cycle", &tri, &[1, 2, 0]).unwrap();
        match verify_invertible(&rot, DEFAULT_TOL).unwrap() {
            InvertibilityOutcome::Certified(c) => {
                assert_eq!(c.max_roundtrip_error, 0.0);
                assert!(c.surjectivity_witness);
                // inverse of a cycle is the reverse cycle
                let s = State::vertex(&tri, 0);
                let fwd = rot.apply(&s).unwrap();
                let back = c.inverse.apply(&fwd).unwrap();
                assert!(back.coords_eq(&s));
            }
            InvertibilityOutcome::Refuted(r) => panic!("refuted: {}", r.reason),
        }
    }

    #[test]
    fn projection_refuted_as_singular() {
        let bit = models::classical_simplex(2).unwrap();
        // send everything to vertex 0
        let proj = Transformation::new(
            "collapse",
            vec![
                vec![0.0, 0.0, 1.0],
                vec![0.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            &bit,
            &bit,
        )
        .unwrap();
        match verify_invertible(&proj, DEFAULT_TOL).unwrap() {
            InvertibilityOutcome::Refuted(r) => {
                assert!(r.reason.contains("singular"), "{}", r.reason)
            }
            _ => panic!("projection must be refuted"),
        }
    }

    fn gbit_rotation(theta: f64) -> Vec<Vec<f64>> {
        let (s, c) = theta.sin_cos();
        vec![
            vec![c, -s, 0.0],
            vec![s, c, 0.0],
            vec![0.0, 0.0, 1.0],
        ]
    }

    #[test]
    fn gbit_rotation_90_certified_45_refuted() {
        let g = models::gbit().unwrap();
        let r90 = Transformation::new(
            "rot90",
            gbit_rotation(std::f64::consts::FRAC_PI_2),
            &g,
            &g,
        )
        .unwrap();
        match verify_invertible(&r90, 1e-6).unwrap() {
            InvertibilityOutcome::Certified(c) => assert!(c.max_roundtrip_error < 1e-12),
            InvertibilityOutcome::Refuted(r) => panic!("rot90 refuted: {}", r.reason),
        }

        let r45 = Transformation::new(
            "rot45",
            gbit_rotation(std::f64::consts::FRAC_PI_4),
            &g,
            &g,
        )
        .unwrap();
        match verify_invertible(&r45, 1e-6).unwrap() {
            InvertibilityOutcome::Refuted(r) => {
                assert!(r.vertex.is_some());
                assert!(r.reason.contains("outside"), "{}", r.reason);
            }
            _ => panic!("rot45 must be refuted: corners leave the square"),
        }
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let tri = models::classical_simplex(3).unwrap();
        let rot = Transformation::from_vertex_permutation("cycle", &tri, &[1, 2, 0]).unwrap();
        let cert = verify_invertible(&rot, DEFAULT_TOL)
            .unwrap()
            .certificate()
            .unwrap();
        let id = rot.then(&cert.inverse).unwrap();
        let eye = DMatrix::<f64>::identity(4, 4);
        assert!((id.matrix() - eye).abs().max() < 1e-12);
    }

    #[test]
    fn power_matches_repeated_application() {
        let four = models::classical_simplex(4).unwrap();
        let cyc = Transformation::from_vertex_permutation("c", &four, &[1, 2, 3, 0]).unwrap();
        let s = State::new(vec![0.1, 0.2, 0.3, 0.4, 1.0], &four).unwrap();
        let mut cur = s.clone();
        for _ in 0..3 {
            cur = cyc.apply(&cur).unwrap();
        }
        let jumped = cyc.power(3).unwrap().apply(&s).unwrap();
        assert!(cur.coord_distance(&jumped) < 1e-12);
    }

    #[test]
    fn affinity_preserves_mixtures() {
        let g = models::gbit().unwrap();
        let rot = Transformation::new(
            "rot90",
            gbit_rotation(std::f64::consts::FRAC_PI_2),
            &g,
            &g,
        )
        .unwrap();
        let a = State::new(vec![0.3, -0.2, 1.0], &g).unwrap();
        let b = State::new(vec![-0.5, 0.1, 1.0], &g).unwrap();
        for &lam in &[0.0, 0.25, 0.5, 0.9, 1.0] {
            let mixed_then = rot.apply(&a.mix(&b, lam).unwrap()).unwrap();
            let then_mixed = rot
                .apply(&a)
                .unwrap()
                .mix(&rot.apply(&b).unwrap(), lam)
                .unwrap();
            assert!(mixed_then.coord_distance(&then_mixed) < 1e-12);
        }
    }
}
