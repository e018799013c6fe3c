#![allow(dead_code)]

use rand::Rng;
use treerpo::env::{TokenId, Vocabulary, PAD};
use treerpo::policy::{FeatureMap, PolicyParams};
use treerpo::rng;

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Params with every entry ~ N(0, scale^2).
pub fn gaussian_params<R: Rng>(features: FeatureMap, scale: f64, rng: &mut R) -> PolicyParams {
    let mut p = PolicyParams::zeros(features);
    for i in 0..p.num_params() {
        p.set(i, scale * normal(rng));
    }
    p
}

pub fn small_features(hashed: bool) -> FeatureMap {
    let f = FeatureMap::new(Vocabulary::SIZE, 3, PAD).unwrap();
    if hashed {
        f.with_hashed_context(4, 5).unwrap()
    } else {
        f
    }
}

pub fn random_tokens<R: Rng>(rng: &mut R, len: usize) -> Vec<TokenId> {
    (0..len).map(|_| rng.gen_range(0..Vocabulary::SIZE)).collect()
}

pub fn seeded(seed: u64) -> rng::Rng {
    rng::from_seed(seed)
}

/// Relative error with an absolute floor for tiny coordinates.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}
