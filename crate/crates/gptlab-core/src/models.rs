//! Built-in GPT models: classical simplices, the gbit square, and the
//! discretized Bloch ball, plus product constructions and the canonical
//! measurement families the other modules lean on.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::space::{
    Effect, Family, Measurement, RayExactness, SpaceKind, SpaceOptions, StateSpace,
};

/// Classical n-outcome system: vertices are the standard basis
/// (homogenized), effect rays the n coordinate functionals.
pub fn classical_simplex(n: usize) -> Result<Arc<StateSpace>> {
    if n < 2 {
        return Err(Error::InvalidSpace(format!(
            "classical simplex needs n >= 2, got {n}"
        )));
    }
    classical_simplex_labeled(n, &format!("classical:{n}"))
}

pub(crate) fn classical_simplex_labeled(n: usize, label: &str) -> Result<Arc<StateSpace>> {
    let verts: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut v = vec![0.0; n + 1];
            v[i] = 1.0;
            v[n] = 1.0;
            v
        })
        .collect();
    let rays: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n + 1];
            r[i] = 1.0;
            r
        })
        .collect();
    StateSpace::new(
        label,
        n,
        verts,
        rays,
        SpaceOptions {
            family: Family::Simplex { n },
            ..SpaceOptions::default()
        },
    )
}

/// The square state space (one half of boxworld): corners at (+-1, +-1),
/// extremal effects the four half-plane edge functionals (1 +- x)/2 and
/// (1 +- y)/2.
pub fn gbit() -> Result<Arc<StateSpace>> {
    StateSpace::new(
        "gbit",
        2,
        vec![
            vec![1.0, 1.0, 1.0],
            vec![1.0, -1.0, 1.0],
            vec![-1.0, 1.0, 1.0],
            vec![-1.0, -1.0, 1.0],
        ],
        vec![
            vec![0.5, 0.0, 0.5],
            vec![-0.5, 0.0, 0.5],
            vec![0.0, 0.5, 0.5],
            vec![0.0, -0.5, 0.5],
        ],
        SpaceOptions {
            family: Family::Gbit,
            ..SpaceOptions::default()
        },
    )
}

/// Golden ratio.
const PHI: f64 = 1.618_033_988_749_895;

/// Unit axes on the upper hemisphere: uniform z-strata with golden-angle
/// azimuth. Axis k is the same for every total count prefix-compatible
/// with `strided_order`.
fn fib_axes(n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|k| {
            let z = (2 * k + 1) as f64 / (2 * n) as f64;
            let theta = std::f64::consts::TAU * ((k as f64 / PHI) % 1.0);
            let r = (1.0 - z * z).max(0.0).sqrt();
            [r * theta.cos(), r * theta.sin(), z]
        })
        .collect()
}

/// Emission order making the first n/4 and n/2 entries stride-4 and
/// stride-2 sub-lattices: ray-set prefixes are then uniform lattices
/// themselves, and refining a prefix only ever adds rays, so the
/// fidelity LP value is non-increasing across refinement levels.
fn strided_order(n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).step_by(4).collect();
    order.extend((2..n).step_by(4));
    order.extend((1..n).step_by(2));
    order
}

/// Qubit state space as a GPT: pure-state sample of the Bloch sphere in
/// antipodal pairs, effect rays the matching spin effects (1 +- u.x)/2.
/// All hull and cone checks are approximate relative to the sample.
pub fn bloch_ball(n_rays: usize) -> Result<Arc<StateSpace>> {
    if n_rays < 6 || n_rays % 2 != 0 {
        return Err(Error::InvalidSpace(format!(
            "bloch ball needs an even ray count >= 6, got {n_rays}"
        )));
    }
    let n_axes = n_rays / 2;
    let axes = fib_axes(n_axes);
    let order = strided_order(n_axes);

    let mut verts = Vec::with_capacity(n_rays);
    let mut rays = Vec::with_capacity(n_rays);
    for &k in &order {
        let [x, y, z] = axes[k];
        verts.push(vec![x, y, z, 1.0]);
        verts.push(vec![-x, -y, -z, 1.0]);
        rays.push(vec![x / 2.0, y / 2.0, z / 2.0, 0.5]);
        rays.push(vec![-x / 2.0, -y / 2.0, -z / 2.0, 0.5]);
    }
    StateSpace::new(
        format!("bloch:{n_rays}"),
        3,
        verts,
        rays,
        SpaceOptions {
            // Sample points are distinct unit vectors, hence extreme in
            // their own hull; the spin effects are nonnegative on the unit
            // ball by Cauchy-Schwarz. Skip the quadratic LP sweeps.
            check_extremality: false,
            check_ray_positivity: false,
            kind: SpaceKind::Discretized,
            exactness: RayExactness::Sampled,
            family: Family::BlochBall { axes: n_axes },
            ..SpaceOptions::default()
        },
    )
}

/// State of the Bloch model from a Bloch vector (norm <= 1). Points very
/// close to the sphere may fall outside the sampled hull; that is the
/// honest answer for the discretized model.
pub fn bloch_state(space: &Arc<StateSpace>, bloch: [f64; 3]) -> Result<crate::space::State> {
    crate::space::State::new(vec![bloch[0], bloch[1], bloch[2], 1.0], space)
}

/// Kronecker product of two spaces: vertices are products of vertices,
/// rays products of rays. This carries exactly the product effect
/// structure; with a classical factor that is the full effect cone.
pub fn product_space(a: &Arc<StateSpace>, b: &Arc<StateSpace>) -> Result<Arc<StateSpace>> {
    let ha = a.hdim();
    let hb = b.hdim();
    let kron = |u: &DVector<f64>, v: &DVector<f64>| -> Vec<f64> {
        let mut out = vec![0.0; ha * hb];
        for i in 0..ha {
            for j in 0..hb {
                out[i * hb + j] = u[i] * v[j];
            }
        }
        out
    };
    let verts: Vec<Vec<f64>> = a
        .pure_states()
        .iter()
        .flat_map(|u| b.pure_states().iter().map(move |v| kron(u, v)))
        .collect();
    let rays: Vec<Vec<f64>> = a
        .effect_rays()
        .iter()
        .flat_map(|u| b.effect_rays().iter().map(move |v| kron(u, v)))
        .collect();

    let classical = |s: &StateSpace| matches!(s.family(), Family::Simplex { .. });
    let exactness = match (a.exactness(), b.exactness()) {
        (RayExactness::Sampled, _) | (_, RayExactness::Sampled) => RayExactness::Sampled,
        (RayExactness::Complete, RayExactness::Complete)
            if classical(a) || classical(b) =>
        {
            RayExactness::Complete
        }
        _ => RayExactness::ProductClosed,
    };
    let kind = if a.kind() == SpaceKind::Discretized || b.kind() == SpaceKind::Discretized {
        SpaceKind::Discretized
    } else {
        SpaceKind::Polytope
    };
    StateSpace::new(
        format!("{}(x){}", a.label(), b.label()),
        ha * hb - 1,
        verts,
        rays,
        SpaceOptions {
            // Products of extreme points are extreme in the minimal tensor
            // product; products of valid rays are nonnegative on them.
            check_extremality: false,
            check_ray_positivity: false,
            kind,
            exactness,
            family: Family::Product,
            ..SpaceOptions::default()
        },
    )
}

/// The fine measurement of a classical simplex: one outcome per vertex.
pub fn fine_measurement(space: &Arc<StateSpace>) -> Result<Measurement> {
    let Family::Simplex { n } = space.family() else {
        return Err(Error::InvalidMeasurement(
            "fine measurement is defined for classical simplices".into(),
        ));
    };
    let outcomes = (0..n)
        .map(|i| Ok((i.to_string(), Effect::from_ray(space, i, 1.0)?)))
        .collect::<Result<Vec<_>>>()?;
    Measurement::new(outcomes)
}

/// A complete measurement written as groups of weighted rays.
#[derive(Debug, Clone)]
pub struct RayMeasurement {
    /// Outcome k is the effect `sum_j w_j r_{i_j}` over its `(i_j, w_j)`.
    pub outcomes: Vec<Vec<(usize, f64)>>,
}

impl RayMeasurement {
    /// Total ray weights, summed across outcomes.
    pub fn total_weights(&self, n_rays: usize) -> Vec<f64> {
        let mut w = vec![0.0; n_rays];
        for outcome in &self.outcomes {
            for &(i, wi) in outcome {
                w[i] += wi;
            }
        }
        w
    }

    pub fn to_measurement(&self, space: &Arc<StateSpace>) -> Result<Measurement> {
        let outcomes = self
            .outcomes
            .iter()
            .enumerate()
            .map(|(k, parts)| {
                let mut f = DVector::zeros(space.hdim());
                for &(i, w) in parts {
                    f += &space.effect_rays()[i] * w;
                }
                let eff = Effect::new(f.iter().copied().collect(), space)?;
                Ok((k.to_string(), eff))
            })
            .collect::<Result<Vec<_>>>()?;
        Measurement::new(outcomes)
    }
}

/// Canonical complete measurement families of a space, used by the
/// no-signalling checker and as sampling anchors.
pub fn measurement_families(space: &StateSpace) -> Vec<RayMeasurement> {
    match space.family() {
        Family::Simplex { n } => vec![RayMeasurement {
            outcomes: (0..n).map(|i| vec![(i, 1.0)]).collect(),
        }],
        Family::Gbit => vec![
            RayMeasurement {
                outcomes: vec![vec![(0, 1.0)], vec![(1, 1.0)]],
            },
            RayMeasurement {
                outcomes: vec![vec![(2, 1.0)], vec![(3, 1.0)]],
            },
        ],
        Family::BlochBall { axes } => {
            // one 2-outcome spin measurement per axis; cap the family size
            let take = axes.min(64);
            (0..take)
                .map(|k| RayMeasurement {
                    outcomes: vec![vec![(2 * k, 1.0)], vec![(2 * k + 1, 1.0)]],
                })
                .collect()
        }
        Family::Product | Family::Custom => {
            // the canonical unit decomposition, one scaled ray per outcome
            let outcomes: Vec<Vec<(usize, f64)>> = space
                .unit_weights()
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 1e-12)
                .map(|(i, &w)| vec![(i, w)])
                .collect();
            vec![RayMeasurement { outcomes }]
        }
    }
}

/// The PR-box joint state on a pair of gbits: perfectly correlated for
/// measurement pairs (x,x), (x,y), (y,x) and anticorrelated for (y,y),
/// with uniformly mixed marginals.
pub fn pr_box(gbit_space: &Arc<StateSpace>) -> Result<crate::tensor::MaxTensorState> {
    if gbit_space.family() != Family::Gbit {
        return Err(Error::InvalidComposite(
            "the PR box is defined on a pair of gbits".into(),
        ));
    }
    let phi = nalgebra::DMatrix::from_row_slice(
        3,
        3,
        &[1.0, 1.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 1.0],
    );
    crate::tensor::MaxTensorState::from_phi(gbit_space, gbit_space, phi)
}

/// Random interior-leaning state: a flat-Dirichlet mixture of the pure
/// states.
pub fn random_state(
    space: &Arc<StateSpace>,
    rng: &mut impl rand::Rng,
) -> Result<crate::space::State> {
    let w = crate::rng::random_distribution(rng, space.n_vertices());
    crate::space::State::from_barycentric(&w, space)
}

/// A random certified symmetry of the model: a vertex permutation for
/// simplices, a dihedral element for the gbit square.
pub fn random_symmetry(
    space: &Arc<StateSpace>,
    rng: &mut impl rand::Rng,
) -> Result<crate::transform::Transformation> {
    use crate::transform::Transformation;
    match space.family() {
        Family::Simplex { n } => {
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                perm.swap(i, j);
            }
            Transformation::from_vertex_permutation("random-permutation", space, &perm)
        }
        Family::Gbit => {
            // dihedral group of the square: rotation by k*90deg, then an
            // optional reflection across the x-axis
            let k = rng.gen_range(0..4u8);
            let flip = rng.gen_bool(0.5);
            let (s, c) = (f64::from(k) * std::f64::consts::FRAC_PI_2).sin_cos();
            let rows = if flip {
                vec![
                    vec![c, s, 0.0],
                    vec![s, -c, 0.0],
                    vec![0.0, 0.0, 1.0],
                ]
            } else {
                vec![
                    vec![c, -s, 0.0],
                    vec![s, c, 0.0],
                    vec![0.0, 0.0, 1.0],
                ]
            };
            Transformation::new("random-dihedral", rows, space, space)
        }
        other => Err(Error::InvalidTransformation(format!(
            "no canonical symmetry family for {other:?}"
        ))),
    }
}

/// Named catalog entries at a given Bloch ray budget.
pub fn catalog(bloch_rays: usize) -> Vec<(String, Result<Arc<StateSpace>>)> {
    let mut entries: Vec<(String, Result<Arc<StateSpace>>)> = Vec::new();
    for n in 2..=6 {
        entries.push((format!("classical:{n}"), classical_simplex(n)));
    }
    entries.push(("gbit".into(), gbit()));
    entries.push((format!("bloch:{bloch_rays}"), bloch_ball(bloch_rays)));
    entries
}
