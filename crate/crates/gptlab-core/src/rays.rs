//! Extremal rays of the nonnegative-functional cone of a polytope.
//!
//! Given vertices in homogeneous coordinates, enumerates the extreme rays
//! of `{ f : f(p_v) >= 0 for all v }` restricted to the span of the
//! vertices, by the incremental double-description method. Desk-scale
//! only; model files with large vertex sets must ship their rays.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_VERTICES: usize = 64;
const MAX_DIM: usize = 12;
const MAX_GENERATORS: usize = 4096;
const EPS: f64 = 1e-10;

/// Compute extremal effect rays from pure states. Each returned ray is
/// scaled so that its largest vertex evaluation equals 1 (the sharp
/// representative of the ray).
pub fn extremal_rays(pure_states: &[DVector<f64>]) -> Result<Vec<Vec<f64>>> {
    let h = pure_states
        .first()
        .map(|p| p.len())
        .ok_or_else(|| Error::InvalidSpace("no vertices".into()))?;
    if pure_states.len() > MAX_VERTICES {
        return Err(Error::InvalidSpace(format!(
            "ray enumeration supports at most {MAX_VERTICES} vertices; supply effect_rays explicitly"
        )));
    }

    // Orthonormal basis Q of span(vertices).
    let mut q_cols: Vec<DVector<f64>> = Vec::new();
    for p in pure_states {
        let mut resid = p.clone();
        for q in &q_cols {
            let c = q.dot(&resid);
            resid -= q * c;
        }
        let n = resid.norm();
        if n > 1e-10 {
            q_cols.push(resid / n);
        }
    }
    let r = q_cols.len();
    if r > MAX_DIM {
        return Err(Error::InvalidSpace(format!(
            "ray enumeration supports span dimension at most {MAX_DIM}"
        )));
    }

    // Inequality normals in span coordinates: n_v . alpha >= 0.
    let normals: Vec<DVector<f64>> = pure_states
        .iter()
        .map(|p| DVector::from_iterator(r, q_cols.iter().map(|q| q.dot(p))))
        .collect();

    // Initial full-rank subset.
    let mut init: Vec<usize> = Vec::new();
    {
        let mut ortho: Vec<DVector<f64>> = Vec::new();
        for (i, n) in normals.iter().enumerate() {
            let mut resid = n.clone();
            for q in &ortho {
                let c = q.dot(&resid);
                resid -= q * c;
            }
            let norm = resid.norm();
            if norm > 1e-10 {
                ortho.push(resid / norm);
                init.push(i);
                if init.len() == r {
                    break;
                }
            }
        }
    }
    if init.len() < r {
        return Err(Error::InvalidSpace(
            "vertex normals do not span; cone is not pointed".into(),
        ));
    }

    let n_mat = DMatrix::from_fn(r, r, |i, j| normals[init[i]][j]);
    let n_inv = n_mat
        .try_inverse()
        .ok_or_else(|| Error::InvalidSpace("degenerate initial normal set".into()))?;
    let mut gens: Vec<DVector<f64>> = (0..r).map(|k| n_inv.column(k).into_owned()).collect();
    let mut processed: Vec<usize> = init.clone();

    for (vi, n) in normals.iter().enumerate() {
        if init.contains(&vi) {
            continue;
        }
        let vals: Vec<f64> = gens.iter().map(|g| n.dot(g)).collect();
        if vals.iter().all(|&v| v >= -EPS) {
            processed.push(vi);
            continue; // inequality already satisfied by the whole cone
        }
        let tight_sets: Vec<Vec<usize>> = gens
            .iter()
            .map(|g| {
                processed
                    .iter()
                    .copied()
                    .filter(|&p| normals[p].dot(g).abs() <= EPS * normals[p].norm().max(1.0))
                    .collect()
            })
            .collect();

        let mut next: Vec<DVector<f64>> = Vec::new();
        for (g, &v) in gens.iter().zip(&vals) {
            if v >= -EPS {
                next.push(g.clone());
            }
        }
        for (i, gi) in gens.iter().enumerate() {
            if vals[i] <= EPS {
                continue;
            }
            for (j, gj) in gens.iter().enumerate() {
                if vals[j] >= -EPS {
                    continue;
                }
                if !adjacent(&tight_sets, i, j) {
                    continue;
                }
                let mut g_new = gj * vals[i] - gi * vals[j];
                let norm = g_new.norm();
                if norm > EPS {
                    g_new /= norm;
                    next.push(g_new);
                }
            }
        }
        if next.len() > MAX_GENERATORS {
            return Err(Error::InvalidSpace(
                "ray enumeration exceeded the generator cap".into(),
            ));
        }
        gens = dedupe(next);
        processed.push(vi);
    }

    // Map back to R^h and scale each ray so max vertex evaluation is 1.
    let mut rays = Vec::with_capacity(gens.len());
    for alpha in &gens {
        let mut f = DVector::zeros(h);
        for (a, q) in alpha.iter().zip(&q_cols) {
            f += q * *a;
        }
        let maxval = pure_states
            .iter()
            .map(|p| f.dot(p))
            .fold(f64::NEG_INFINITY, f64::max);
        if maxval <= EPS {
            continue; // numerically null direction
        }
        f /= maxval;
        rays.push(f.iter().copied().collect::<Vec<f64>>());
    }
    rays.sort_by(|a, b| a.partial_cmp(b).expect("finite ray entries"));
    Ok(rays)
}

/// Combinatorial adjacency: no third generator's tight set contains the
/// intersection of the pair's tight sets.
fn adjacent(tight: &[Vec<usize>], i: usize, j: usize) -> bool {
    let inter: Vec<usize> = tight[i]
        .iter()
        .copied()
        .filter(|v| tight[j].contains(v))
        .collect();
    for (k, t) in tight.iter().enumerate() {
        if k == i || k == j {
            continue;
        }
        if inter.iter().all(|v| t.contains(v)) {
            return false;
        }
    }
    true
}

fn dedupe(gens: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for g in gens {
        let dup = out.iter().any(|o| {
            let c = o.dot(&g) / (o.norm() * g.norm());
            c > 1.0 - 1e-9
        });
        if !dup {
            out.push(g);
        }
    }
    out
}
