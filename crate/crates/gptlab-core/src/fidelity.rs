//! The measurement-infimum fidelity and its oracles.
//!
//! `F(s1, s2) = inf_M F_c(p1(M), p2(M))` over all measurements, where
//! `F_c(p, q) = sum_i sqrt(p_i q_i)`. Splitting an outcome `e = f + g`
//! never increases `F_c` (Cauchy-Schwarz), so the infimum is attained on
//! measurements whose effects are proportional to extremal rays of the
//! effect cone. Writing such a measurement as ray weights `w >= 0` with
//! `sum_i w_i r_i = iota` makes the objective linear in `w`: the infimum
//! becomes a finite LP, exact for polyhedral cones and an upper bound
//! that tightens with refinement for sampled ones.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::lp;
use crate::models;
use crate::rng;
use crate::space::{Effect, Measurement, SpaceKind, State, StateSpace};
use crate::transform::Transformation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidelityMethod {
    ExactLp,
    DiscretizedLp,
    Sampled,
    ClosedForm,
}

impl FidelityMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            FidelityMethod::ExactLp => "exact-LP",
            FidelityMethod::DiscretizedLp => "discretized-LP",
            FidelityMethod::Sampled => "sampled",
            FidelityMethod::ClosedForm => "closed-form",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FidelityResult {
    pub value: f64,
    pub optimal_measurement: Measurement,
    pub method: FidelityMethod,
    /// 0 for exact LPs; for sampled cones, the observed decrease over the
    /// last refinement halving (a heuristic slack, not a certified bound).
    pub gap_bound: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct FidelityOptions {
    /// Use only the first `n` rays (prefixes of a sampled cone are
    /// uniform sub-lattices). `None` means all rays.
    pub n_rays: Option<usize>,
    /// Estimate `gap_bound` by re-solving at half the rays (sampled cones).
    pub estimate_gap: bool,
}

impl Default for FidelityOptions {
    fn default() -> Self {
        FidelityOptions {
            n_rays: None,
            estimate_gap: true,
        }
    }
}

/// Bhattacharyya coefficient of two distributions.
pub fn classical_fidelity(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!(
            "distributions have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    for (name, d) in [("first", p), ("second", q)] {
        if d.iter().any(|&x| x < -1e-12) {
            return Err(Error::InvalidState(format!("{name} distribution has negative entries")));
        }
        let total: f64 = d.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!(
                "{name} distribution sums to {total}, expected 1"
            )));
        }
    }
    let value: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| (a.max(0.0) * b.max(0.0)).sqrt())
        .sum();
    Ok(value.clamp(0.0, 1.0))
}

/// Objective coefficients sqrt(r_i(s1) r_i(s2)) over a ray prefix.
fn objective(s1: &State, s2: &State, n_rays: usize) -> Vec<f64> {
    let space = s1.space();
    (0..n_rays)
        .map(|i| {
            let r = &space.effect_rays()[i];
            let prod = r.dot(s1.coords()).max(0.0) * r.dot(s2.coords()).max(0.0);
            let c = prod.max(0.0).sqrt();
            if c < 1e-15 {
                0.0
            } else {
                c
            }
        })
        .collect()
}

fn solve_ray_lp(space: &Arc<StateSpace>, c: Vec<f64>, n_rays: usize) -> Result<lp::Solution> {
    let rows = space.lp_rows_prefix(n_rays);
    let m = rows.len();
    match lp::solve(
        &lp::Problem {
            objective: c,
            rows,
            rhs: vec![1.0; m],
        },
        &lp::Options::default(),
    )? {
        lp::Outcome::Optimal(sol) => Ok(sol),
        lp::Outcome::Infeasible(_) => Err(Error::InvalidSpace(
            "unit effect is not in the span of the ray prefix; effect cone malformed".into(),
        )),
        lp::Outcome::Unbounded => Err(Error::InvalidSpace(
            "fidelity LP unbounded; effect cone malformed".into(),
        )),
    }
}

fn measurement_from_weights(
    space: &Arc<StateSpace>,
    weights: &[f64],
) -> Result<Measurement> {
    let mut outcomes = Vec::new();
    for (i, &w) in weights.iter().enumerate() {
        if w > 1e-14 {
            outcomes.push((format!("ray-{i}"), Effect::from_ray(space, i, w)?));
        }
    }
    Measurement::new(outcomes)
}

/// GPT fidelity of Eq-style measurement infimum, by LP over effect rays.
pub fn fidelity_with(s1: &State, s2: &State, opts: &FidelityOptions) -> Result<FidelityResult> {
    let space = s1.space();
    if !space.same_space(s2.space()) {
        return Err(Error::SpaceMismatch(
            "fidelity takes two states of the same space".into(),
        ));
    }
    let method = match space.kind() {
        SpaceKind::Polytope => FidelityMethod::ExactLp,
        SpaceKind::Discretized => FidelityMethod::DiscretizedLp,
    };

    // Identical states: every measurement gives identical distributions,
    // so F = 1 for any cone; keep it exact.
    if s1.coords_eq(s2) {
        let unit = Measurement::new(vec![("iota".into(), Effect::unit(space))])?;
        return Ok(FidelityResult {
            value: 1.0,
            optimal_measurement: unit,
            method,
            gap_bound: 0.0,
        });
    }

    let n_rays = opts.n_rays.unwrap_or_else(|| space.n_rays()).min(space.n_rays());
    if n_rays == 0 {
        return Err(Error::InvalidSpace("no effect rays available".into()));
    }
    let sol = solve_ray_lp(space, objective(s1, s2, n_rays), n_rays)?;
    let value = sol.objective.clamp(0.0, 1.0);
    let optimal_measurement = measurement_from_weights(space, &sol.x)?;

    let gap_bound = if method == FidelityMethod::DiscretizedLp && opts.estimate_gap {
        let half = {
            let h = n_rays / 2;
            h - (h % 2)
        };
        if half >= 2 {
            let coarse = solve_ray_lp(space, objective(s1, s2, half), half)?;
            (coarse.objective - value).max(0.0)
        } else {
            0.0
        }
    } else {
        0.0
    };

    Ok(FidelityResult {
        value,
        optimal_measurement,
        method,
        gap_bound,
    })
}

pub fn fidelity(s1: &State, s2: &State) -> Result<FidelityResult> {
    fidelity_with(s1, s2, &FidelityOptions::default())
}

#[derive(Debug, Clone)]
pub struct SampledFidelity {
    /// Minimum classical fidelity over the sampled measurements: an upper
    /// bound on the true infimum.
    pub value: f64,
    pub best_measurement: Measurement,
    pub n_samples: usize,
}

/// Independent oracle for the LP: minimum of `F_c` over random valid
/// measurements (random-objective LP vertices, their mixtures, and random
/// coarse-grainings). Always an upper bound on the infimum.
pub fn fidelity_sampled(
    s1: &State,
    s2: &State,
    n_samples: usize,
    seed: u64,
    mode: ExecMode,
) -> Result<SampledFidelity> {
    let space = s1.space();
    if !space.same_space(s2.space()) {
        return Err(Error::SpaceMismatch(
            "fidelity takes two states of the same space".into(),
        ));
    }
    if n_samples == 0 {
        return Err(Error::InvalidState("need at least one sample".into()));
    }
    let n_rays = space.n_rays();
    let rows = space.lp_rows_prefix(n_rays);
    let a_vals: Vec<f64> = space
        .effect_rays()
        .iter()
        .map(|r| r.dot(s1.coords()).max(0.0))
        .collect();
    let b_vals: Vec<f64> = space
        .effect_rays()
        .iter()
        .map(|r| r.dot(s2.coords()).max(0.0))
        .collect();

    // Each sample: a random vertex of the feasible set (random objective),
    // optionally mixed with the canonical unit decomposition, optionally
    // coarse-grained into outcome groups.
    let evals: Vec<(f64, Vec<f64>, Vec<usize>)> = exec::map_indexed(mode, n_samples, |t| {
        let mut r = rng::split(seed, 0x5a3c, t as u64);
        let c: Vec<f64> = (0..n_rays).map(|_| r.gen_range(-1.0..1.0)).collect();
        let sol = match lp::solve(
            &lp::Problem {
                objective: c,
                rows: rows.clone(),
                rhs: vec![1.0; rows.len()],
            },
            &lp::Options::default(),
        ) {
            Ok(lp::Outcome::Optimal(s)) => s,
            _ => {
                // fall back to the canonical decomposition
                lp::Solution {
                    x: space.unit_weights().to_vec(),
                    objective: 0.0,
                    basis: vec![],
                }
            }
        };
        let mut w = sol.x;
        if r.gen_bool(0.3) {
            let theta: f64 = r.gen_range(0.0..1.0);
            for (wi, ui) in w.iter_mut().zip(space.unit_weights()) {
                *wi = theta * *wi + (1.0 - theta) * ui;
            }
        }
        // group assignment for coarse-graining (group 0.. per ray)
        let groups: Vec<usize> = if r.gen_bool(0.5) {
            let g = r.gen_range(2..=4usize);
            (0..n_rays).map(|_| r.gen_range(0..g)).collect()
        } else {
            (0..n_rays).collect()
        };
        let n_groups = groups.iter().copied().max().unwrap_or(0) + 1;
        let mut p = vec![0.0; n_groups];
        let mut q = vec![0.0; n_groups];
        for i in 0..n_rays {
            p[groups[i]] += w[i] * a_vals[i];
            q[groups[i]] += w[i] * b_vals[i];
        }
        let fc: f64 = p
            .iter()
            .zip(&q)
            .map(|(&x, &y)| (x.max(0.0) * y.max(0.0)).sqrt())
            .sum();
        (fc.clamp(0.0, 1.0), w, groups)
    });

    let mut best = 0usize;
    for (t, e) in evals.iter().enumerate() {
        if e.0 < evals[best].0 {
            best = t;
        }
    }
    let (value, weights, groups) = &evals[best];

    // materialize the best measurement (grouped effects)
    let n_groups = groups.iter().copied().max().unwrap_or(0) + 1;
    let mut outcomes = Vec::new();
    for g in 0..n_groups {
        let mut f = nalgebra::DVector::zeros(space.hdim());
        for i in 0..n_rays {
            if groups[i] == g && weights[i] > 1e-14 {
                f += &space.effect_rays()[i] * weights[i];
            }
        }
        if f.amax() > 1e-14 {
            outcomes.push((
                format!("group-{g}"),
                Effect::new(f.iter().copied().collect(), space)?,
            ));
        }
    }
    Ok(SampledFidelity {
        value: *value,
        best_measurement: Measurement::new(outcomes)?,
        n_samples,
    })
}

/// Uhlmann fidelity of two qubit states given as Bloch vectors:
/// `sqrt((1 + a.b + sqrt((1-|a|^2)(1-|b|^2))) / 2)`.
pub fn uhlmann_fidelity(a: [f64; 3], b: [f64; 3]) -> Result<f64> {
    let na2 = a.iter().map(|x| x * x).sum::<f64>();
    let nb2 = b.iter().map(|x| x * x).sum::<f64>();
    if na2 > 1.0 + 1e-9 || nb2 > 1.0 + 1e-9 {
        return Err(Error::InvalidState(format!(
            "Bloch vectors must have norm <= 1 (got {}, {})",
            na2.sqrt(),
            nb2.sqrt()
        )));
    }
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let inner = ((1.0 - na2).max(0.0) * (1.0 - nb2).max(0.0)).sqrt();
    Ok((((1.0 + dot + inner) / 2.0).max(0.0)).sqrt().clamp(0.0, 1.0))
}

/// If `F(s1, s2) <= tol`, a two-outcome measurement whose outcome
/// distributions have disjoint supports; otherwise `None`.
pub fn orthogonality_certificate(
    s1: &State,
    s2: &State,
    tol: f64,
) -> Result<Option<Measurement>> {
    let fid = fidelity(s1, s2)?;
    if fid.value > tol {
        return Ok(None);
    }
    let space = s1.space();
    // group the optimal measurement's outcomes by which state sees them
    let mut f1 = nalgebra::DVector::zeros(space.hdim());
    let mut f2 = nalgebra::DVector::zeros(space.hdim());
    for (_, e) in fid.optimal_measurement.outcomes() {
        let on_s1 = e.functional().dot(s1.coords());
        if on_s1 > tol.sqrt() {
            f1 += e.functional();
        } else {
            f2 += e.functional();
        }
    }
    let e1 = Effect::new(f1.iter().copied().collect(), space)?;
    let e2 = Effect::new(f2.iter().copied().collect(), space)?;
    let m = Measurement::new(vec![("s1-side".into(), e1), ("s2-side".into(), e2)])?;
    // disjoint supports within tolerance
    let d1 = crate::space::measure(&m, s1)?;
    let d2 = crate::space::measure(&m, s2)?;
    let overlap = d1
        .probs()
        .iter()
        .zip(d2.probs())
        .map(|(&p, q)| p.min(q))
        .fold(0.0f64, f64::max);
    if overlap > tol.sqrt() {
        return Err(Error::InvalidMeasurement(format!(
            "orthogonality certificate failed: outcome overlap {overlap:.3e}"
        )));
    }
    Ok(Some(m))
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PropertyReport {
    pub trials: usize,
    /// (i) worst `max(0, F(s1 x t1, s2 x t2) - F(s1,s2) F(t1,t2))`.
    pub max_submultiplicativity_violation: f64,
    /// (ii) worst `|F(s1 x t, s2 x t) - F(s1, s2)|`.
    pub max_stability_deviation: f64,
    /// (iii) worst `|F(G s1, G s2) - F(s1, s2)|` over certified symmetries.
    pub max_invariance_deviation: f64,
    pub passed: bool,
    pub tol: f64,
}

/// Check the paper-level fidelity properties (i)-(iii) on random states
/// of the given polyhedral models.
pub fn verify_fidelity_properties(
    spaces: &[Arc<StateSpace>],
    n_trials: usize,
    seed: u64,
    tol: f64,
    mode: ExecMode,
) -> Result<PropertyReport> {
    if spaces.is_empty() {
        return Err(Error::InvalidSpace("no spaces given".into()));
    }
    // product spaces for all ordered pairs, built once
    let mut products = Vec::new();
    for a in spaces {
        let mut row = Vec::new();
        for b in spaces {
            row.push(models::product_space(a, b)?);
        }
        products.push(row);
    }

    let deviations = exec::map_indexed(mode, n_trials, |t| -> Result<(f64, f64, f64)> {
        let mut r = rng::split(seed, 0x17ab, t as u64);
        let ia = r.gen_range(0..spaces.len());
        let ib = r.gen_range(0..spaces.len());
        let sa = &spaces[ia];
        let sb = &spaces[ib];
        let prod = &products[ia][ib];
        let s1 = models::random_state(sa, &mut r)?;
        let s2 = models::random_state(sa, &mut r)?;
        let t1 = models::random_state(sb, &mut r)?;
        let t2 = models::random_state(sb, &mut r)?;

        let f_s = fidelity(&s1, &s2)?.value;
        let f_t = fidelity(&t1, &t2)?.value;

        // (i) sub-multiplicativity over the product
        let j1 = crate::tensor::embed_kron(&[&s1, &t1], prod)?;
        let j2 = crate::tensor::embed_kron(&[&s2, &t2], prod)?;
        let f_joint = fidelity(&j1, &j2)?.value;
        let viol_i = (f_joint - f_s * f_t).max(0.0);

        // (ii) stability under appending a common factor
        let k1 = crate::tensor::embed_kron(&[&s1, &t1], prod)?;
        let k2 = crate::tensor::embed_kron(&[&s2, &t1], prod)?;
        let dev_ii = (fidelity(&k1, &k2)?.value - f_s).abs();

        // (iii) invariance under certified symmetries
        let g = models::random_symmetry(sa, &mut r)?;
        crate::transform::verify_invertible(&g, 1e-9)?.certificate()?;
        let g1 = g.apply(&s1)?;
        let g2 = g.apply(&s2)?;
        let dev_iii = (fidelity(&g1, &g2)?.value - f_s).abs();

        Ok((viol_i, dev_ii, dev_iii))
    });

    let mut max_i = 0.0f64;
    let mut max_ii = 0.0f64;
    let mut max_iii = 0.0f64;
    for d in deviations {
        let (a, b, c) = d?;
        max_i = max_i.max(a);
        max_ii = max_ii.max(b);
        max_iii = max_iii.max(c);
    }
    Ok(PropertyReport {
        trials: n_trials,
        max_submultiplicativity_violation: max_i,
        max_stability_deviation: max_ii,
        max_invariance_deviation: max_iii,
        passed: max_i <= tol && max_ii <= tol && max_iii <= tol,
        tol,
    })
}

/// Split a valid effect `e` into `(f, e - f)` with `f` a random valid
/// effect dominated by `e`; used to exercise the fine-graining lemma.
pub fn random_split(e: &Effect, rng: &mut impl Rng) -> Result<(Effect, Effect)> {
    let space = e.space();
    // random nonnegative ray combination, scaled under e
    let mut f = nalgebra::DVector::zeros(space.hdim());
    for r in space.effect_rays() {
        f += r * rng.gen_range(0.0..1.0);
    }
    // largest alpha with alpha * f <= e on all vertices
    let mut alpha = f64::INFINITY;
    for p in space.pure_states() {
        let fv = f.dot(p);
        let ev = e.functional().dot(p);
        if fv > 1e-12 {
            alpha = alpha.min(ev / fv);
        }
    }
    if !alpha.is_finite() || alpha <= 0.0 {
        // e vanishes identically: split as (0, e)
        return Ok((Effect::zero(space), e.clone()));
    }
    let scale = alpha * rng.gen_range(0.0..1.0);
    f *= scale;
    let g = e.functional() - &f;
    Ok((
        Effect::new(f.iter().copied().collect(), space)?,
        Effect::new(g.iter().copied().collect(), space)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::space::State;

    const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn classical_fidelity_basics() {
        assert_eq!(classical_fidelity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let p = [0.2, 0.3, 0.5];
        assert!((classical_fidelity(&p, &p).unwrap() - 1.0).abs() < 1e-12);
        let v = classical_fidelity(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!((v - SQRT_HALF).abs() < 1e-12);
        assert!(classical_fidelity(&[0.5, 0.6], &[1.0, 0.0]).is_err());
        assert!(classical_fidelity(&[-0.1, 1.1], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn simplex_lp_matches_bhattacharyya() {
        use rand::SeedableRng;
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in 2..=5usize {
            let space = models::classical_simplex(n).unwrap();
            for _ in 0..20 {
                let p = crate::rng::random_distribution(&mut r, n);
                let q = crate::rng::random_distribution(&mut r, n);
                let sp = State::from_barycentric(&p, &space).unwrap();
                let sq = State::from_barycentric(&q, &space).unwrap();
                let lp_val = fidelity(&sp, &sq).unwrap();
                let closed = classical_fidelity(&p, &q).unwrap();
                assert!(
                    (lp_val.value - closed).abs() < 1e-9,
                    "n={n}: lp {} vs closed {closed}",
                    lp_val.value
                );
                assert_eq!(lp_val.method, FidelityMethod::ExactLp);
                assert_eq!(lp_val.gap_bound, 0.0);
            }
        }
    }

    #[test]
    fn optimal_measurement_reproduces_value() {
        let space = models::classical_simplex(4).unwrap();
        let s1 = State::from_barycentric(&[0.4, 0.3, 0.2, 0.1], &space).unwrap();
        let s2 = State::from_barycentric(&[0.1, 0.2, 0.3, 0.4], &space).unwrap();
        let fid = fidelity(&s1, &s2).unwrap();
        let d1 = crate::space::measure(&fid.optimal_measurement, &s1).unwrap();
        let d2 = crate::space::measure(&fid.optimal_measurement, &s2).unwrap();
        let fc = classical_fidelity(&d1.probs(), &d2.probs()).unwrap();
        assert!((fc - fid.value).abs() < 1e-9);
    }

    #[test]
    fn gbit_frozen_values() {
        let g = models::gbit().unwrap();
        let corner = State::vertex(&g, 0);
        let adjacent = State::vertex(&g, 1);
        let opposite = State::vertex(&g, 3);
        let center = State::new(vec![0.0, 0.0, 1.0], &g).unwrap();

        assert!(fidelity(&corner, &adjacent).unwrap().value < 1e-12);
        assert!(fidelity(&corner, &opposite).unwrap().value < 1e-12);
        let cc = fidelity(&center, &corner).unwrap().value;
        assert!((cc - SQRT_HALF).abs() < 1e-9, "center-corner {cc}");

        // independent scipy-LP oracle values
        let a = State::new(vec![0.3, -0.4, 1.0], &g).unwrap();
        let b = State::new(vec![-0.2, 0.1, 1.0], &g).unwrap();
        let v = fidelity(&a, &b).unwrap().value;
        assert!((v - 0.9674505282478892).abs() < 1e-9, "mixed pair {v}");

        let c = State::new(vec![0.5, 0.5, 1.0], &g).unwrap();
        let d = State::new(vec![0.5, -0.5, 1.0], &g).unwrap();
        let v = fidelity(&c, &d).unwrap().value;
        assert!((v - 0.8660254037844386).abs() < 1e-9, "edge-mid pair {v}");
    }

    #[test]
    fn self_fidelity_is_exactly_one() {
        let g = models::gbit().unwrap();
        let s = State::new(vec![0.2, -0.7, 1.0], &g).unwrap();
        let fid = fidelity(&s, &s).unwrap();
        assert_eq!(fid.value, 1.0);
    }

    #[test]
    fn fidelity_is_symmetric() {
        let g = models::gbit().unwrap();
        let a = State::new(vec![0.3, -0.4, 1.0], &g).unwrap();
        let b = State::new(vec![-0.2, 0.1, 1.0], &g).unwrap();
        let ab = fidelity(&a, &b).unwrap().value;
        let ba = fidelity(&b, &a).unwrap().value;
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn sampled_oracle_never_beats_lp() {
        let space = models::classical_simplex(3).unwrap();
        let s1 = State::from_barycentric(&[0.6, 0.3, 0.1], &space).unwrap();
        let s2 = State::from_barycentric(&[0.1, 0.1, 0.8], &space).unwrap();
        let lp_val = fidelity(&s1, &s2).unwrap().value;
        let sampled =
            fidelity_sampled(&s1, &s2, 500, 42, ExecMode::Sequential).unwrap();
        assert!(
            sampled.value >= lp_val - 1e-9,
            "sampled {} below LP {lp_val}",
            sampled.value
        );
        // identical states: every sample sees identical distributions
        let same = fidelity_sampled(&s1, &s1, 50, 7, ExecMode::Sequential).unwrap();
        assert!((same.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sampled_oracle_deterministic_across_modes() {
        let space = models::classical_simplex(4).unwrap();
        let s1 = State::from_barycentric(&[0.4, 0.3, 0.2, 0.1], &space).unwrap();
        let s2 = State::from_barycentric(&[0.25, 0.25, 0.25, 0.25], &space).unwrap();
        let a = fidelity_sampled(&s1, &s2, 200, 11, ExecMode::Sequential).unwrap();
        let b = fidelity_sampled(&s1, &s2, 200, 11, ExecMode::Parallel).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn uhlmann_closed_form() {
        assert_eq!(uhlmann_fidelity([0.0, 0.0, 1.0], [0.0, 0.0, -1.0]).unwrap(), 0.0);
        assert_eq!(uhlmann_fidelity([0.3, 0.1, -0.2], [0.3, 0.1, -0.2]).unwrap(), 1.0);
        let v = uhlmann_fidelity([0.0, 0.0, 0.0], [0.0, 0.0, 1.0]).unwrap();
        assert!((v - SQRT_HALF).abs() < 1e-12);
        // frozen against an independent density-matrix computation
        let v = uhlmann_fidelity([0.3, 0.1, -0.2], [-0.1, 0.4, 0.25]).unwrap();
        assert!((v - 0.9413911548218262).abs() < 1e-12);
        let v = uhlmann_fidelity([0.6, 0.0, 0.0], [0.0, 0.8, 0.0]).unwrap();
        assert!((v - 0.8602325267042625).abs() < 1e-11);
        assert!(uhlmann_fidelity([1.1, 0.0, 0.0], [0.0, 0.0, 0.0]).is_err());
    }

    /// Same values through the eigenvalue route `sqrt(l+) + sqrt(l-)`
    /// of the (non-Hermitian) product rho * sigma.
    #[test]
    fn uhlmann_matches_eigenvalue_route() {
        use rand::SeedableRng;
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let rand_bloch = |r: &mut rand_chacha::ChaCha8Rng| {
                let v: [f64; 3] = [
                    r.gen_range(-1.0..1.0),
                    r.gen_range(-1.0..1.0),
                    r.gen_range(-1.0..1.0),
                ];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                let scale = r.gen_range(0.0..0.999) / n.max(1e-9);
                [v[0] * scale, v[1] * scale, v[2] * scale]
            };
            let a = rand_bloch(&mut r);
            let b = rand_bloch(&mut r);
            let tr = (1.0 + a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>()) / 2.0;
            let det = (1.0 - a.iter().map(|x| x * x).sum::<f64>()) / 4.0
                * ((1.0 - b.iter().map(|x| x * x).sum::<f64>()) / 4.0);
            let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
            let expected = (((tr + disc) / 2.0).max(0.0)).sqrt() + (((tr - disc) / 2.0).max(0.0)).sqrt();
            let got = uhlmann_fidelity(a, b).unwrap();
            assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
        }
    }

    #[test]
    fn orthogonality_certificates() {
        let bit = models::classical_simplex(2).unwrap();
        let d0 = State::vertex(&bit, 0);
        let d1 = State::vertex(&bit, 1);
        let m = orthogonality_certificate(&d0, &d1, 1e-9).unwrap().unwrap();
        let p0 = crate::space::measure(&m, &d0).unwrap().probs();
        let p1 = crate::space::measure(&m, &d1).unwrap().probs();
        assert!((p0[0] - 1.0).abs() < 1e-9 && p0[1] < 1e-9);
        assert!((p1[1] - 1.0).abs() < 1e-9 && p1[0] < 1e-9);

        assert!(orthogonality_certificate(&d0, &d0, 1e-9).unwrap().is_none());

        let g = models::gbit().unwrap();
        let c0 = State::vertex(&g, 0);
        let c1 = State::vertex(&g, 1);
        let m = orthogonality_certificate(&c0, &c1, 1e-9).unwrap().unwrap();
        assert_eq!(m.n_outcomes(), 2);
    }

    #[test]
    fn fine_graining_never_increases_fc() {
        use rand::SeedableRng;
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let spaces = [
            models::classical_simplex(3).unwrap(),
            models::gbit().unwrap(),
        ];
        for space in &spaces {
            for _ in 0..200 {
                let s1 = models::random_state(space, &mut r).unwrap();
                let s2 = models::random_state(space, &mut r).unwrap();
                // random complete measurement from the canonical family,
                // then a random outcome split
                let m = models::measurement_families(space)[0]
                    .to_measurement(space)
                    .unwrap();
                let k = r.gen_range(0..m.n_outcomes());
                let e = &m.outcomes()[k].1;
                let (f, g) = random_split(e, &mut r).unwrap();
                let coarse = (evaluate(e, &s1) * evaluate(e, &s2)).max(0.0).sqrt();
                let fine = (evaluate(&f, &s1) * evaluate(&f, &s2)).max(0.0).sqrt()
                    + (evaluate(&g, &s1) * evaluate(&g, &s2)).max(0.0).sqrt();
                assert!(
                    fine <= coarse + 1e-12,
                    "fine {fine} > coarse {coarse}"
                );
            }
        }
    }

    fn evaluate(e: &Effect, s: &State) -> f64 {
        e.functional().dot(s.coords())
    }

    #[test]
    fn properties_hold_on_small_sweep() {
        let spaces = vec![
            models::classical_simplex(2).unwrap(),
            models::classical_simplex(3).unwrap(),
            models::gbit().unwrap(),
        ];
        let rep =
            verify_fidelity_properties(&spaces, 40, 123, 1e-9, ExecMode::Sequential).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn bloch_small_budget_tracks_uhlmann() {
        let b = models::bloch_ball(500).unwrap();
        let s1 = models::bloch_state(&b, [0.0, 0.0, 0.9]).unwrap();
        let s2 = models::bloch_state(&b, [0.6, 0.0, 0.0]).unwrap();
        let fid = fidelity(&s1, &s2).unwrap();
        let u = uhlmann_fidelity([0.0, 0.0, 0.9], [0.6, 0.0, 0.0]).unwrap();
        assert_eq!(fid.method, FidelityMethod::DiscretizedLp);
        assert!(fid.value >= u - 1e-9, "LP below Uhlmann: {} < {u}", fid.value);
        assert!((fid.value - u).abs() < 2e-2, "LP {} vs uhlmann {u}", fid.value);
        // antipodal lattice vertices: separating measurement available
        let p = State::vertex(&b, 0);
        let q = State::vertex(&b, 1);
        assert!(fidelity(&p, &q).unwrap().value < 1e-9);
    }

    #[test]
    fn bloch_refinement_is_monotone() {
        let b = models::bloch_ball(2000).unwrap();
        let s1 = models::bloch_state(&b, [0.3, -0.2, 0.35]).unwrap();
        let s2 = models::bloch_state(&b, [-0.4, 0.1, 0.2]).unwrap();
        let mut prev = f64::INFINITY;
        for rays in [500, 1000, 2000] {
            let v = fidelity_with(
                &s1,
                &s2,
                &FidelityOptions {
                    n_rays: Some(rays),
                    estimate_gap: false,
                },
            )
            .unwrap()
            .value;
            assert!(v <= prev + 1e-12, "refinement increased: {v} > {prev}");
            prev = v;
        }
    }
}
