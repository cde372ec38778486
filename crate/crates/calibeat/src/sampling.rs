//! Seeded, reproducible sampling of simplex points for verification
//! harnesses and constant estimation.

use crate::num::Scalar;
use crate::simplex::{ActionSet, Dist};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The fixed, portable generator used everywhere randomness is needed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sample a simplex point.  Exact backends draw small random rationals so
/// identities can be checked exactly; float backends draw a flat Dirichlet.
/// With `interior = true` every coordinate is strictly positive.
pub fn sample_dist<T: Scalar>(
    actions: &ActionSet,
    rng: &mut ChaCha8Rng,
    interior: bool,
) -> Dist<T> {
    let n = actions.size();
    if T::EXACT {
        let lo = if interior { 1 } else { 0 };
        loop {
            let nums: Vec<i64> = (0..n).map(|_| rng.random_range(lo..=12i64)).collect();
            let total: i64 = nums.iter().sum();
            if total == 0 {
                continue;
            }
            let weights = nums.iter().map(|&k| T::from_ratio(k, total)).collect();
            return Dist::new(actions, weights).expect("valid by construction");
        }
    } else {
        // Flat Dirichlet via exponential spacings.
        let mut raw: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.random_range(1e-12..1.0);
                -u.ln()
            })
            .collect();
        if interior {
            for r in raw.iter_mut() {
                *r += 0.05;
            }
        }
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|&r| T::from_f64_approx(r / total)).collect();
        Dist::new(actions, weights).expect("valid by construction")
    }
}

/// A point at distance roughly `eps` from `base`, inside the simplex.
pub fn perturb_dist<T: Scalar>(base: &Dist<T>, eps: f64, rng: &mut ChaCha8Rng) -> Dist<T> {
    let n = base.len();
    let mut dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean = dir.iter().sum::<f64>() / n as f64;
    for d in dir.iter_mut() {
        *d -= mean;
    }
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-15);
    let mut w: Vec<f64> = base
        .weights()
        .iter()
        .zip(&dir)
        .map(|(b, d)| (b.to_f64() + eps * d / norm).max(0.0))
        .collect();
    let total: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= total;
    }
    Dist::new(base.action_set(), w.into_iter().map(T::from_f64_approx).collect())
        .expect("projected back onto the simplex")
}

/// Sample a pure action index.
pub fn sample_action(actions: &ActionSet, rng: &mut ChaCha8Rng) -> usize {
    rng.random_range(0..actions.size())
}
