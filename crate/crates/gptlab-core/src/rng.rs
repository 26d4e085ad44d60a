//! Seeded, splittable randomness.
//!
//! Every random quantity in the toolkit flows from one 64-bit seed.
//! Per-trial generators are derived by mixing the seed with the trial
//! index, so sweeps can run trials in any order (or in parallel) and
//! still reproduce byte-identical results.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; decorrelates seed/stream pairs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn root(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed))
}

/// Independent generator for trial `index` of the stream named `tag`.
pub fn split(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed ^ mix(tag) ^ mix(index).rotate_left(17)))
}

/// Random point of the probability simplex with `n` outcomes
/// (normalized exponentials, i.e. flat Dirichlet).
pub fn random_distribution(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.gen_range(1e-12..1.0);
            -u.ln()
        })
        .collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_streams_reproduce() {
        let a: Vec<u64> = {
            let mut r = split(42, 7, 3);
            (0..5).map(|_| r.gen()).collect()
        };
        let b: Vec<u64> = {
            let mut r = split(42, 7, 3);
            (0..5).map(|_| r.gen()).collect()
        };
        assert_eq!(a, b);
        let c: Vec<u64> = {
            let mut r = split(42, 7, 4);
            (0..5).map(|_| r.gen()).collect()
        };
        assert_ne!(a, c);
    }

    #[test]
    fn distributions_normalize() {
        let mut r = root(1);
        for n in 2..8 {
            let d = random_distribution(&mut r, n);
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(d.iter().all(|&x| x >= 0.0));
        }
    }
}
